//! Trajectory CSV export with a fixed column schema.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Mat;
use crate::simulator::{Sample, TrajectoryLog};

/// Column names for the given dimensions. Indices are 1-based; matrix
/// entries are `name_row_col`.
pub fn csv_columns(n: usize, n_u: usize, n_w: usize, n_r: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    let vec_cols = |cols: &mut Vec<String>, name: &str, len: usize| {
        cols.extend((1..=len).map(|i| format!("{name}_{i}")));
    };
    vec_cols(&mut cols, "x", n);
    vec_cols(&mut cols, "x_m", n);
    vec_cols(&mut cols, "e", n);
    vec_cols(&mut cols, "u", n_u);
    vec_cols(&mut cols, "r", n_r);
    for name in ["W", "W_hat", "W_hat_star"] {
        for i in 1..=n_w {
            for j in 1..=n_u {
                cols.push(format!("{name}_{i}_{j}"));
            }
        }
    }
    cols.extend(
        [
            "s",
            "lambda_min_Phi_ff",
            "V",
            "V_star",
            "residual_layer1",
            "residual_layer2",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    cols
}

/// Shortest-exact form: 17 significant digits round-trip every `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn row(s: &Sample) -> Vec<String> {
    let mut out = vec![format_float(s.t)];
    for v in [&s.x, &s.x_m, &s.e, &s.u, &s.r] {
        out.extend(v.iter().map(|x| format_float(*x)));
    }
    let row_major = |m: &Mat, out: &mut Vec<String>| {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.push(format_float(m[(i, j)]));
            }
        }
    };
    row_major(&s.w, &mut out);
    row_major(&s.w_hat, &mut out);
    row_major(&s.w_hat_star, &mut out);
    out.push(if s.s { "1" } else { "0" }.to_string());
    for v in [
        s.lambda_min_phi_ff,
        s.v,
        s.v_star,
        s.residual_layer1,
        s.residual_layer2,
    ] {
        out.push(format_float(v));
    }
    out
}

/// Writes the header and one row per sample.
pub fn write_csv_to<W: Write>(log: &TrajectoryLog, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(csv_columns(log.n, log.n_u, log.n_w, log.n_r))?;
    for s in &log.samples {
        w.write_record(row(s))?;
    }
    w.flush().map_err(|e| Error::io("csv", e))?;
    Ok(())
}

pub fn write_csv(log: &TrajectoryLog, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(log, std::io::BufWriter::new(file))
}
