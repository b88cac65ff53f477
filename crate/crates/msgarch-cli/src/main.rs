//! Command-line interface: simulate synthetic panels, fit the panel
//! MS-GARCH model, analyze chain output, compute descriptive statistics, and
//! print the analytic prior on the number of clusters.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use msgarch::analysis::{
    cluster_count_posterior, coclustering_matrix, cross_tab, point_partition, spectral_reorder,
    summarize_parameters, variation_of_information,
};
use msgarch::dgp::{generate_benchmark, DGPSpec};
use msgarch::gibbs::{run_chain, SamplerConfig};
use msgarch::io::{
    apply_hyperparameters, apply_sampler_config, cross_section_density, load_chain,
    load_panel_csv, parse_config_file, prices_to_returns, rolling_moments, silverman_bandwidth,
    write_chain, write_panel, Manifest,
};
use msgarch::model::{InitialStateDist, Sigma0Policy};
use msgarch::pyp::prior_cluster_pmf;
use msgarch::{Hyperparameters, Panel, Real};

#[derive(Parser)]
#[command(
    name = "msgarch",
    about = "Bayesian nonparametric panel Markov-switching GARCH",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic two-regime panel with known clustering structure.
    Simulate(SimulateArgs),
    /// Run the Gibbs sampler on a panel and write a chain directory.
    Fit(FitArgs),
    /// Turn a chain directory into clustering analytics.
    Analyze(AnalyzeArgs),
    /// Rolling log-volatility/log-kurtosis and cross-sectional densities.
    Stats(StatsArgs),
    /// Analytic prior distribution of the number of clusters.
    PriorClusters(PriorClustersArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Number of units.
    #[arg(long, default_value_t = 30)]
    units: usize,
    /// Series length.
    #[arg(long, default_value_t = 300)]
    length: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Input panel CSV (header: date,<unit1>,...).
    #[arg(long)]
    panel: PathBuf,
    /// Output chain directory.
    #[arg(long)]
    out: PathBuf,
    /// Flat key = value configuration file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Interpret the input as prices and convert to percentage log-returns.
    #[arg(long)]
    from_prices: bool,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thinning: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Exact Metropolis-Hastings corrections in the atom and allocation
    /// updates.
    #[arg(long)]
    exact_mh: bool,
    #[arg(long)]
    parallelism: Option<usize>,
    /// Keep full hidden paths in the stored draws.
    #[arg(long)]
    store_paths: bool,
    /// Number of regimes.
    #[arg(long)]
    k: Option<usize>,
    /// First-stage standard deviation of the regime means.
    #[arg(long)]
    s: Option<f64>,
    /// First-stage beta precision.
    #[arg(long)]
    r: Option<f64>,
    /// Upper bound of the GARCH intercept support.
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    m_star: Option<f64>,
    #[arg(long)]
    s_star: Option<f64>,
    /// Pitman-Yor discount.
    #[arg(long)]
    nu: Option<f64>,
    /// Pitman-Yor concentration.
    #[arg(long)]
    psi: Option<f64>,
    /// Dirichlet precision of the transition rows.
    #[arg(long)]
    phi: Option<f64>,
    /// Dirichlet hyperparameter of the common row means (default 1/K).
    #[arg(long)]
    d: Option<f64>,
    /// Initial conditional variance: `sample_variance` or a fixed number.
    #[arg(long)]
    sigma0: Option<String>,
    /// Initial regime distribution: `stationary` or `uniform`.
    #[arg(long)]
    initial_state: Option<String>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Chain directory produced by `fit`.
    #[arg(long)]
    chain: PathBuf,
    /// Output directory (defaults to the chain directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    panel: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Rolling window sizes.
    #[arg(long, value_delimiter = ',', default_values_t = vec![20usize, 30, 40])]
    windows: Vec<usize>,
    /// Reference dates (time labels) for the cross-sectional densities;
    /// defaults to the quartile positions of each window's output.
    #[arg(long, value_delimiter = ',')]
    ref_dates: Vec<String>,
    /// Kernel bandwidth; defaults to the normal rule of thumb per date.
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long)]
    from_prices: bool,
}

#[derive(Args)]
struct PriorClustersArgs {
    /// Number of units.
    #[arg(long)]
    n: usize,
    /// Pitman-Yor discount.
    #[arg(long)]
    nu: f64,
    /// Pitman-Yor concentration.
    #[arg(long)]
    psi: f64,
    /// Output CSV file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Fit(args) => run_fit(args),
        Command::Analyze(args) => run_analyze(args),
        Command::Stats(args) => run_stats(args),
        Command::PriorClusters(args) => run_prior_clusters(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let start = Instant::now();
    ensure_dir(&args.out)?;
    let spec: DGPSpec<Real> = DGPSpec::two_regime(args.units, args.length, args.seed);
    let (mut panel, truth) = generate_benchmark(&spec)?;
    panel.time_labels = (1..=args.length).map(|t| format!("t{t:05}")).collect();
    write_panel(&panel, &args.out.join("panel.csv"))?;

    let mut params = String::from("unit,regime,cluster,mu,gamma,alpha,beta,p_stay\n");
    for i in 0..args.units {
        for k in 0..2 {
            let p = &truth.params[i];
            params.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                panel.unit_labels[i],
                k + 1,
                truth.labels[k][i] + 1,
                p.mu[k],
                p.gamma[k],
                p.alpha[k],
                p.beta[k],
                truth.trans[i].prob(k, k),
            ));
        }
    }
    write_file(&args.out.join("truth_params.csv"), &params)?;

    let mut paths = String::from("date");
    for label in &panel.unit_labels {
        paths.push(',');
        paths.push_str(label);
    }
    paths.push('\n');
    for t in 0..args.length {
        paths.push_str(&panel.time_labels[t]);
        for i in 0..args.units {
            paths.push_str(&format!(",{}", truth.paths[i].states[t] + 1));
        }
        paths.push('\n');
    }
    write_file(&args.out.join("truth_paths.csv"), &paths)?;

    let mut manifest = Manifest::default();
    manifest.set("command", "simulate");
    manifest.set("units", args.units);
    manifest.set("length", args.length);
    manifest.set("seed", args.seed);
    manifest.set("wall_seconds", format!("{:.3}", start.elapsed().as_secs_f64()));
    manifest.write(&args.out.join("manifest.txt"))?;
    println!("wrote panel and ground truth to {}", args.out.display());
    Ok(())
}

fn build_fit_config(args: &FitArgs, n_units: usize) -> Result<(Hyperparameters, SamplerConfig)> {
    let mut file_map: BTreeMap<String, String> = BTreeMap::new();
    if let Some(path) = &args.config {
        file_map = parse_config_file(path)?;
    }
    let mut hp: Hyperparameters = Hyperparameters::new(2);
    apply_hyperparameters(&file_map, &mut hp)?;
    let mut cfg = SamplerConfig {
        iterations: 2000,
        burn_in: 1000,
        thinning: 1,
        parallelism: std::thread::available_parallelism().map_or(1, |n| n.get()),
        ..SamplerConfig::default()
    };
    apply_sampler_config(&file_map, &mut cfg)?;

    if let Some(k) = args.k {
        hp.n_regimes = k;
        if !file_map.contains_key("d") && args.d.is_none() {
            hp.d = 1.0 / k as f64;
        }
    }
    if let Some(v) = args.s {
        hp.s = v;
    }
    if let Some(v) = args.r {
        hp.r = v;
    }
    if let Some(v) = args.a {
        hp.a = v;
    }
    if let Some(v) = args.m_star {
        hp.m_star = v;
    }
    if let Some(v) = args.s_star {
        hp.s_star = v;
    }
    if let Some(v) = args.nu {
        hp.nu = v;
    }
    if let Some(v) = args.psi {
        hp.psi = v;
    }
    if let Some(v) = args.phi {
        hp.phi = v;
    }
    if let Some(v) = args.d {
        hp.d = v;
    }
    if let Some(v) = &args.sigma0 {
        hp.sigma0 = if v == "sample_variance" {
            Sigma0Policy::SampleVariance
        } else {
            Sigma0Policy::Fixed(
                v.parse().context("--sigma0 must be a number or sample_variance")?,
            )
        };
    }
    if let Some(v) = &args.initial_state {
        hp.initial_state = match v.as_str() {
            "stationary" => InitialStateDist::Stationary,
            "uniform" => InitialStateDist::Uniform,
            other => bail!("--initial-state must be stationary or uniform, got {other:?}"),
        };
    }
    if let Some(v) = args.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = args.burn_in {
        cfg.burn_in = v;
    }
    if let Some(v) = args.thinning {
        cfg.thinning = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if args.exact_mh {
        cfg.exact_mh = true;
    }
    if let Some(v) = args.parallelism {
        cfg.parallelism = v;
    }
    if args.store_paths {
        cfg.store_paths = true;
    }
    hp.validate()?;
    cfg.validate(n_units)?;
    Ok((hp, cfg))
}

fn describe_hp(manifest: &mut Manifest, hp: &Hyperparameters) {
    manifest.set("k", hp.n_regimes);
    manifest.set("s", hp.s);
    manifest.set("r", hp.r);
    manifest.set("a", hp.a);
    manifest.set("m_star", hp.m_star);
    manifest.set("s_star", hp.s_star);
    manifest.set("nu", hp.nu);
    manifest.set("psi", hp.psi);
    manifest.set("phi", hp.phi);
    manifest.set("d", hp.d);
    manifest.set(
        "sigma0",
        match hp.sigma0 {
            Sigma0Policy::SampleVariance => "sample_variance".to_string(),
            Sigma0Policy::Fixed(v) => v.to_string(),
        },
    );
    manifest.set(
        "initial_state",
        match hp.initial_state {
            InitialStateDist::Stationary => "stationary",
            InitialStateDist::Uniform => "uniform",
        },
    );
}

fn run_fit(args: FitArgs) -> Result<()> {
    let start = Instant::now();
    let mut panel: Panel = load_panel_csv(&args.panel)?;
    if args.from_prices {
        panel = prices_to_returns(&panel)?;
    }
    let (hp, cfg) = build_fit_config(&args, panel.n_units())?;
    ensure_dir(&args.out)?;

    let mut manifest = Manifest::default();
    manifest.set("command", "fit");
    manifest.set("panel", args.panel.display());
    manifest.set("from_prices", args.from_prices);
    manifest.set("iterations", cfg.iterations);
    manifest.set("burn_in", cfg.burn_in);
    manifest.set("thinning", cfg.thinning);
    manifest.set("seed", cfg.seed);
    manifest.set("independence_weight", cfg.independence_weight);
    manifest.set("exact_mh", cfg.exact_mh);
    manifest.set("parallelism", cfg.parallelism);
    describe_hp(&mut manifest, &hp);

    let draws = run_chain(panel, hp, cfg)?;
    manifest.set("wall_seconds", format!("{:.3}", start.elapsed().as_secs_f64()));
    write_chain(&args.out, &draws, &manifest)?;
    println!(
        "stored {} draws in {} ({} units, {} regimes)",
        draws.n_draws(),
        args.out.display(),
        draws.n_units,
        draws.n_regimes
    );
    Ok(())
}

fn run_analyze(args: AnalyzeArgs) -> Result<()> {
    let start = Instant::now();
    let out = args.out.clone().unwrap_or_else(|| args.chain.clone());
    ensure_dir(&out)?;
    let (draws, chain_manifest) = load_chain::<Real>(&args.chain)?;
    if draws.n_draws() == 0 {
        bail!("chain directory {} holds no draws", args.chain.display());
    }
    let k = draws.n_regimes;

    // Cluster-count posteriors.
    let mut pmf_csv = String::from("regime,m,probability\n");
    let mut map_counts = Vec::with_capacity(k);
    for kk in 0..k {
        let (pmf, map_m) = cluster_count_posterior(&draws, kk)?;
        for (m, p) in &pmf {
            pmf_csv.push_str(&format!("{},{},{}\n", kk + 1, m, p));
        }
        map_counts.push(map_m);
    }
    write_file(&out.join("cluster_pmf.csv"), &pmf_csv)?;

    // Co-clustering at the MAP count, spectral order, point partitions.
    let mut partitions = Vec::with_capacity(k);
    let mut partitions_csv = String::from("regime,unit,cluster\n");
    for kk in 0..k {
        let coclust = coclustering_matrix(&draws, kk, map_counts[kk])?;
        let order = spectral_reorder(&coclust.probs, coclust.n_units);
        let mut matrix_csv = String::from("unit");
        for &j in &order {
            matrix_csv.push(',');
            matrix_csv.push_str(&draws.unit_labels[j]);
        }
        matrix_csv.push('\n');
        for &i in &order {
            matrix_csv.push_str(&draws.unit_labels[i]);
            for &j in &order {
                matrix_csv.push_str(&format!(",{}", coclust.at(i, j)));
            }
            matrix_csv.push('\n');
        }
        write_file(&out.join(format!("cocluster_regime{}.csv", kk + 1)), &matrix_csv)?;
        let mut order_csv = String::from("position,unit\n");
        for (pos, &i) in order.iter().enumerate() {
            order_csv.push_str(&format!("{},{}\n", pos + 1, draws.unit_labels[i]));
        }
        write_file(&out.join(format!("cocluster_order_regime{}.csv", kk + 1)), &order_csv)?;

        let partition = point_partition(&coclust, map_counts[kk])?;
        for (i, &label) in partition.labels().iter().enumerate() {
            partitions_csv.push_str(&format!(
                "{},{},{}\n",
                kk + 1,
                draws.unit_labels[i],
                label + 1
            ));
        }
        partitions.push(partition);
    }
    write_file(&out.join("partitions.csv"), &partitions_csv)?;

    // Variation of information across regime pairs plus the cross tables.
    let mut vi_report = String::new();
    for kk in 0..k {
        vi_report.push_str(&format!("map_clusters_regime{} = {}\n", kk + 1, map_counts[kk]));
    }
    for a in 0..k {
        for b in (a + 1)..k {
            let (vi, norm) = variation_of_information(&partitions[a], &partitions[b])?;
            vi_report.push_str(&format!("vi_bits_regime{}v{} = {}\n", a + 1, b + 1, vi));
            vi_report.push_str(&format!("vi_normalized_regime{}v{} = {}\n", a + 1, b + 1, norm));
            let table = cross_tab(&partitions[a], &partitions[b]);
            let m2 = partitions[b].n_clusters();
            let rows: Vec<String> = table
                .chunks(m2)
                .map(|row| row.iter().map(usize::to_string).collect::<Vec<_>>().join(":"))
                .collect();
            vi_report.push_str(&format!(
                "cross_tab_regime{}v{} = {}\n",
                a + 1,
                b + 1,
                rows.join(";")
            ));
        }
    }
    write_file(&out.join("vi_report.txt"), &vi_report)?;

    // Parameter summaries.
    let mut summary_csv = String::from("unit,regime,parameter,mean,q05,q95\n");
    for row in summarize_parameters(&draws)? {
        summary_csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            draws.unit_labels[row.unit],
            row.regime + 1,
            row.name,
            row.mean,
            row.q05,
            row.q95
        ));
    }
    write_file(&out.join("summary.csv"), &summary_csv)?;

    let mut manifest = Manifest::default();
    manifest.set("command", "analyze");
    manifest.set("chain", args.chain.display());
    if let Some(seed) = chain_manifest.get("seed") {
        manifest.set("chain_seed", seed);
    }
    for (kk, m) in map_counts.iter().enumerate() {
        manifest.set(&format!("map_clusters_regime{}", kk + 1), m);
    }
    manifest.set("wall_seconds", format!("{:.3}", start.elapsed().as_secs_f64()));
    manifest.write(&out.join("analyze_manifest.txt"))?;
    println!(
        "analytics written to {} (MAP cluster counts: {:?})",
        out.display(),
        map_counts
    );
    Ok(())
}

fn run_stats(args: StatsArgs) -> Result<()> {
    let start = Instant::now();
    ensure_dir(&args.out)?;
    let mut panel: Panel = load_panel_csv(&args.panel)?;
    if args.from_prices {
        panel = prices_to_returns(&panel)?;
    }
    for &window in &args.windows {
        anyhow::ensure!(
            window >= 4 && window <= panel.n_obs(),
            "window {window} incompatible with series length {}",
            panel.n_obs()
        );
        let n_out = panel.n_obs() - window + 1;
        let mut rolling: Vec<(Vec<Option<Real>>, Vec<Option<Real>>)> = Vec::new();
        for i in 0..panel.n_units() {
            rolling.push(rolling_moments(panel.series(i), window)?);
        }
        let mut csv = String::from("date,unit,log_volatility,log_kurtosis\n");
        for pos in 0..n_out {
            let date = &panel.time_labels[pos + window - 1];
            for (i, (lv, lk)) in rolling.iter().enumerate() {
                let fmt = |v: &Option<Real>| match v {
                    Some(x) => x.to_string(),
                    None => "NA".to_string(),
                };
                csv.push_str(&format!(
                    "{},{},{},{}\n",
                    date,
                    panel.unit_labels[i],
                    fmt(&lv[pos]),
                    fmt(&lk[pos])
                ));
            }
        }
        write_file(&args.out.join(format!("rolling_w{window}.csv")), &csv)?;

        // Cross-sectional densities at the reference dates.
        let positions: Vec<(usize, String)> = if args.ref_dates.is_empty() {
            [0.25, 0.5, 0.75]
                .iter()
                .map(|q| {
                    let pos = ((n_out - 1) as f64 * q) as usize;
                    (pos, panel.time_labels[pos + window - 1].clone())
                })
                .collect()
        } else {
            args.ref_dates
                .iter()
                .map(|d| {
                    let t = panel
                        .time_labels
                        .iter()
                        .position(|l| l == d)
                        .with_context(|| format!("date {d:?} not in the panel"))?;
                    let pos = t.checked_sub(window - 1).with_context(|| {
                        format!("date {d:?} precedes the first full window of size {window}")
                    })?;
                    anyhow::ensure!(pos < n_out, "date {d:?} beyond the last window");
                    Ok((pos, d.clone()))
                })
                .collect::<Result<_>>()?
        };
        let mut density_csv = String::from("statistic,date,grid,density\n");
        for (pos, date) in &positions {
            for (name, select) in [("log_volatility", 0usize), ("log_kurtosis", 1usize)] {
                let values: Vec<Real> = rolling
                    .iter()
                    .filter_map(|(lv, lk)| if select == 0 { lv[*pos] } else { lk[*pos] })
                    .collect();
                if values.is_empty() {
                    continue;
                }
                let bw = args.bandwidth.unwrap_or_else(|| silverman_bandwidth(&values));
                let lo = values.iter().cloned().fold(f64::INFINITY, f64::min) - 3.0 * bw;
                let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0 * bw;
                let grid: Vec<Real> =
                    (0..256).map(|j| lo + (hi - lo) * j as f64 / 255.0).collect();
                let density = cross_section_density(&values, &grid, bw)?;
                for (x, f) in grid.iter().zip(&density) {
                    density_csv.push_str(&format!("{name},{date},{x},{f}\n"));
                }
            }
        }
        write_file(&args.out.join(format!("density_w{window}.csv")), &density_csv)?;
    }
    let mut manifest = Manifest::default();
    manifest.set("command", "stats");
    manifest.set("panel", args.panel.display());
    manifest.set(
        "windows",
        args.windows.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
    );
    manifest.set("wall_seconds", format!("{:.3}", start.elapsed().as_secs_f64()));
    manifest.write(&args.out.join("stats_manifest.txt"))?;
    println!("statistics written to {}", args.out.display());
    Ok(())
}

fn run_prior_clusters(args: PriorClustersArgs) -> Result<()> {
    let prior = prior_cluster_pmf(args.n, args.nu, args.psi)?;
    let mut csv = String::from("quantity,index,value\n");
    for (h, p) in prior.pmf.iter().enumerate() {
        csv.push_str(&format!("pmf,{},{}\n", h + 1, p));
    }
    csv.push_str(&format!("mean,,{}\n", prior.mean));
    match args.out {
        Some(path) => write_file(&path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}
