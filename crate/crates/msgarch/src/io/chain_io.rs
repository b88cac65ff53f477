//! Chain directory layout: `manifest.txt` plus one long-format CSV per
//! parameter block (`draws_theta.csv`, `draws_P.csv`, `draws_D.csv`,
//! `cluster_counts.csv`). Indices in the files are 1-based; units are
//! identified by their labels.

use std::collections::BTreeMap;
use std::path::Path;

use crate::gibbs::{AcceptanceTrace, DrawSnapshot, PosteriorDraws};
use crate::model::{RegimeParams, TransitionMatrix};
use crate::scalar::Scalar;

use super::panel_csv::format_value;
use super::{read_to_string, write_string, IoError};

/// Ordered key = value map written next to every run's outputs; always
/// includes enough to reproduce the run (full config and seed).
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    pub entries: BTreeMap<String, String>,
}

impl Manifest {
    pub fn set(&mut self, key: &str, value: impl std::fmt::Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        write_string(path, &out)
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        let entries = super::config::parse_config_file(path)?;
        Ok(Self { entries })
    }
}

/// Write the four draw CSVs plus the manifest into `dir`.
pub fn write_chain<S: Scalar>(
    dir: &Path,
    draws: &PosteriorDraws<S>,
    manifest: &Manifest,
) -> Result<(), IoError> {
    std::fs::create_dir_all(dir).map_err(|source| IoError::File {
        path: dir.display().to_string(),
        source,
    })?;
    let mut manifest = manifest.clone();
    manifest.set("n_units", draws.n_units);
    manifest.set("n_regimes", draws.n_regimes);
    manifest.set("n_draws", draws.n_draws());
    manifest.set("unit_labels", draws.unit_labels.join(","));
    for (name, trace) in [
        ("acceptance_mu", &draws.acceptance.mu),
        ("acceptance_garch", &draws.acceptance.garch),
        ("acceptance_path", &draws.acceptance.path),
        ("acceptance_common_mean", &draws.acceptance.common_mean),
        ("acceptance_atoms", &draws.acceptance.atoms),
    ] {
        if !trace.is_empty() {
            manifest.set(name, format!("{:.6}", AcceptanceTrace::mean_of(trace)));
        }
    }
    manifest.write(&dir.join("manifest.txt"))?;

    let k = draws.n_regimes;
    let labels = &draws.unit_labels;

    let mut theta = String::from("sweep,unit,regime,mu,gamma,alpha,beta,state_freq\n");
    let mut p_rows = String::from("sweep,unit,from,to,value\n");
    let mut d_rows = String::from("sweep,unit,regime,component\n");
    let mut counts = String::from("sweep,regime,m\n");
    for snap in &draws.snapshots {
        for (i, label) in labels.iter().enumerate() {
            for kk in 0..k {
                let p = &snap.params[i];
                theta.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    snap.sweep,
                    label,
                    kk + 1,
                    format_value(p.mu[kk]),
                    format_value(p.gamma[kk]),
                    format_value(p.alpha[kk]),
                    format_value(p.beta[kk]),
                    format_value(snap.occupancy[i * k + kk]),
                ));
                for to in 0..k {
                    p_rows.push_str(&format!(
                        "{},{},{},{},{}\n",
                        snap.sweep,
                        label,
                        kk + 1,
                        to + 1,
                        format_value(snap.trans[i].prob(kk, to)),
                    ));
                }
                d_rows.push_str(&format!(
                    "{},{},{},{}\n",
                    snap.sweep,
                    label,
                    kk + 1,
                    snap.alloc[i * k + kk] + 1,
                ));
            }
        }
        for kk in 0..k {
            counts.push_str(&format!("{},{},{}\n", snap.sweep, kk + 1, snap.occupied[kk]));
        }
    }
    write_string(&dir.join("draws_theta.csv"), &theta)?;
    write_string(&dir.join("draws_P.csv"), &p_rows)?;
    write_string(&dir.join("draws_D.csv"), &d_rows)?;
    write_string(&dir.join("cluster_counts.csv"), &counts)?;
    Ok(())
}

fn parse_usize(path: &str, line: usize, field: &str) -> Result<usize, IoError> {
    field.trim().parse().map_err(|_| IoError::Parse {
        path: path.to_string(),
        line,
        message: format!("bad integer {field:?}"),
    })
}

fn parse_f64(path: &str, line: usize, field: &str) -> Result<f64, IoError> {
    field.trim().parse().map_err(|_| IoError::Parse {
        path: path.to_string(),
        line,
        message: format!("bad number {field:?}"),
    })
}

/// Reload a chain directory into a `PosteriorDraws` (acceptance traces are
/// summarized in the manifest and not reconstructed).
pub fn load_chain<S: Scalar>(dir: &Path) -> Result<(PosteriorDraws<S>, Manifest), IoError> {
    let manifest = Manifest::read(&dir.join("manifest.txt"))?;
    let n_units: usize = manifest
        .get("n_units")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| IoError::InvalidArgument("manifest lacks n_units".into()))?;
    let n_regimes: usize = manifest
        .get("n_regimes")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| IoError::InvalidArgument("manifest lacks n_regimes".into()))?;
    let unit_labels: Vec<String> = manifest
        .get("unit_labels")
        .ok_or_else(|| IoError::InvalidArgument("manifest lacks unit_labels".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let unit_index: BTreeMap<&str, usize> =
        unit_labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let k = n_regimes;

    // sweep -> snapshot under construction.
    let mut by_sweep: BTreeMap<usize, DrawSnapshot<S>> = BTreeMap::new();
    let blank = |sweep: usize| DrawSnapshot::<S> {
        sweep,
        params: vec![
            RegimeParams::new(
                vec![S::zero(); k],
                vec![S::zero(); k],
                vec![S::zero(); k],
                vec![S::zero(); k],
            );
            n_units
        ],
        trans: vec![
            TransitionMatrix::new(
                {
                    let mut p = vec![S::zero(); k * k];
                    for j in 0..k {
                        p[j * k + j] = S::one();
                    }
                    p
                },
                k,
            )
            .expect("identity rows are stochastic");
            n_units
        ],
        alloc: vec![0usize; n_units * k],
        occupied: vec![0usize; k],
        occupancy: vec![S::zero(); n_units * k],
        paths: None,
    };

    let theta_path = dir.join("draws_theta.csv");
    let content = read_to_string(&theta_path)?;
    let path_s = theta_path.display().to_string();
    for (idx, line) in content.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(IoError::Parse {
                path: path_s.clone(),
                line: idx + 1,
                message: format!("expected 8 fields, found {}", f.len()),
            });
        }
        let sweep = parse_usize(&path_s, idx + 1, f[0])?;
        let unit = *unit_index.get(f[1]).ok_or_else(|| IoError::Parse {
            path: path_s.clone(),
            line: idx + 1,
            message: format!("unknown unit {:?}", f[1]),
        })?;
        let regime = parse_usize(&path_s, idx + 1, f[2])? - 1;
        let snap = by_sweep.entry(sweep).or_insert_with(|| blank(sweep));
        snap.params[unit].mu[regime] = S::from_f64(parse_f64(&path_s, idx + 1, f[3])?);
        snap.params[unit].gamma[regime] = S::from_f64(parse_f64(&path_s, idx + 1, f[4])?);
        snap.params[unit].alpha[regime] = S::from_f64(parse_f64(&path_s, idx + 1, f[5])?);
        snap.params[unit].beta[regime] = S::from_f64(parse_f64(&path_s, idx + 1, f[6])?);
        snap.occupancy[unit * k + regime] = S::from_f64(parse_f64(&path_s, idx + 1, f[7])?);
    }

    let p_path = dir.join("draws_P.csv");
    let content = read_to_string(&p_path)?;
    let path_s = p_path.display().to_string();
    let mut trans_cells: BTreeMap<(usize, usize), Vec<S>> = BTreeMap::new();
    for (idx, line) in content.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let sweep = parse_usize(&path_s, idx + 1, f[0])?;
        let unit = *unit_index.get(f[1]).ok_or_else(|| IoError::Parse {
            path: path_s.clone(),
            line: idx + 1,
            message: format!("unknown unit {:?}", f[1]),
        })?;
        let from = parse_usize(&path_s, idx + 1, f[2])? - 1;
        let to = parse_usize(&path_s, idx + 1, f[3])? - 1;
        let value = S::from_f64(parse_f64(&path_s, idx + 1, f[4])?);
        trans_cells
            .entry((sweep, unit))
            .or_insert_with(|| vec![S::zero(); k * k])[from * k + to] = value;
    }
    for ((sweep, unit), cells) in trans_cells {
        let snap = by_sweep.entry(sweep).or_insert_with(|| blank(sweep));
        snap.trans[unit] = TransitionMatrix::new(cells, k).map_err(IoError::Model)?;
    }

    let d_path = dir.join("draws_D.csv");
    let content = read_to_string(&d_path)?;
    let path_s = d_path.display().to_string();
    for (idx, line) in content.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let sweep = parse_usize(&path_s, idx + 1, f[0])?;
        let unit = *unit_index.get(f[1]).ok_or_else(|| IoError::Parse {
            path: path_s.clone(),
            line: idx + 1,
            message: format!("unknown unit {:?}", f[1]),
        })?;
        let regime = parse_usize(&path_s, idx + 1, f[2])? - 1;
        let comp = parse_usize(&path_s, idx + 1, f[3])? - 1;
        let snap = by_sweep.entry(sweep).or_insert_with(|| blank(sweep));
        snap.alloc[unit * k + regime] = comp;
    }

    let c_path = dir.join("cluster_counts.csv");
    let content = read_to_string(&c_path)?;
    let path_s = c_path.display().to_string();
    for (idx, line) in content.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let sweep = parse_usize(&path_s, idx + 1, f[0])?;
        let regime = parse_usize(&path_s, idx + 1, f[1])? - 1;
        let m = parse_usize(&path_s, idx + 1, f[2])?;
        let snap = by_sweep.entry(sweep).or_insert_with(|| blank(sweep));
        snap.occupied[regime] = m;
    }

    let snapshots: Vec<DrawSnapshot<S>> = by_sweep.into_values().collect();
    let occupied_trace = snapshots.iter().map(|s| s.occupied.clone()).collect();
    Ok((
        PosteriorDraws {
            snapshots,
            acceptance: AcceptanceTrace::default(),
            occupied_trace,
            n_units,
            n_regimes,
            unit_labels,
        },
        manifest,
    ))
}
