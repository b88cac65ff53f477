//! Panel CSV format: UTF-8, comma separated, header `date,<unit1>,...`, one
//! row per time point, decimal-point numerics.

use std::path::Path;

use crate::model::Panel;
use crate::scalar::Scalar;

use super::{read_to_string, write_string, IoError};

pub fn load_panel_csv<S: Scalar>(path: &Path) -> Result<Panel<S>, IoError> {
    let content = read_to_string(path)?;
    let path_s = path.display().to_string();
    let mut lines = content.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| IoError::Empty(path_s.clone()))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 2 {
        return Err(IoError::Parse {
            path: path_s,
            line: 1,
            message: "header must be date,<unit1>,...".into(),
        });
    }
    let unit_labels: Vec<String> = columns[1..].iter().map(|s| s.trim().to_string()).collect();
    let n_units = unit_labels.len();
    let mut time_labels = Vec::new();
    let mut columns_data: Vec<Vec<S>> = vec![Vec::new(); n_units];
    for (line_idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row_no = line_idx + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != n_units + 1 {
            return Err(IoError::Cell {
                path: path_s,
                row: row_no,
                column: cells.len().min(n_units + 1),
                message: format!("expected {} cells, found {}", n_units + 1, cells.len()),
            });
        }
        time_labels.push(cells[0].trim().to_string());
        for (u, cell) in cells[1..].iter().enumerate() {
            let trimmed = cell.trim();
            let value: f64 = trimmed.parse().map_err(|_| IoError::Cell {
                path: path_s.clone(),
                row: row_no,
                column: u + 2,
                message: if trimmed.is_empty() {
                    "missing value".into()
                } else {
                    format!("not a number: {trimmed:?}")
                },
            })?;
            columns_data[u].push(S::from_f64(value));
        }
    }
    let n_obs = time_labels.len();
    if n_obs < 2 {
        return Err(IoError::Parse {
            path: path_s,
            line: n_obs + 1,
            message: format!("need at least 2 observations, found {n_obs}"),
        });
    }
    let mut values = Vec::with_capacity(n_units * n_obs);
    for col in &columns_data {
        values.extend_from_slice(col);
    }
    Panel::new(values, n_units, n_obs, unit_labels, time_labels).map_err(IoError::Model)
}

pub fn write_panel<S: Scalar>(panel: &Panel<S>, path: &Path) -> Result<(), IoError> {
    let mut out = String::from("date");
    for label in &panel.unit_labels {
        out.push(',');
        out.push_str(label);
    }
    out.push('\n');
    for t in 0..panel.n_obs() {
        out.push_str(&panel.time_labels[t]);
        for i in 0..panel.n_units() {
            out.push(',');
            out.push_str(&format_value(panel.series(i)[t]));
        }
        out.push('\n');
    }
    write_string(path, &out)
}

/// Shortest decimal that round-trips the value exactly.
pub(crate) fn format_value<S: Scalar>(v: S) -> String {
    let x = v.to_f64_lossy();
    let mut s = format!("{x}");
    if s.parse::<f64>() != Ok(x) {
        s = format!("{x:.17e}");
    }
    s
}

/// Percentage log-returns from a price panel: 100 * (log p_t - log p_{t-1}).
pub fn prices_to_returns<S: Scalar>(panel: &Panel<S>) -> Result<Panel<S>, IoError> {
    let n = panel.n_units();
    let t = panel.n_obs();
    for i in 0..n {
        for (j, &p) in panel.series(i).iter().enumerate() {
            if !(p > S::zero()) {
                return Err(IoError::InvalidArgument(format!(
                    "price at unit {}, row {} is not positive",
                    panel.unit_labels[i],
                    j + 1
                )));
            }
        }
    }
    let hundred = S::from_f64(100.0);
    let mut values = Vec::with_capacity(n * (t - 1));
    for i in 0..n {
        let y = panel.series(i);
        for j in 1..t {
            values.push(hundred * (y[j].ln() - y[j - 1].ln()));
        }
    }
    Panel::new(
        values,
        n,
        t - 1,
        panel.unit_labels.clone(),
        panel.time_labels[1..].to_vec(),
    )
    .map_err(IoError::Model)
}
