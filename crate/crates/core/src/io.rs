//! Plain-text formats: matrix and vector CSV, problem directories, trajectories.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Result, ZapError};
use crate::linalg::MeasurementMatrix;
use crate::signals::{ProblemMeta, RecoveryProblem, SparseSignal, Truth};
use crate::zap::Trajectory;

/// Float format used for every file: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    let t = tok.trim();
    match t {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => t.parse::<f64>().map_err(|e| ZapError::Parse {
            line,
            msg: format!("`{t}`: {e}"),
        }),
    }
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut s = format!("# rows={} cols={}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn matrix_from_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines.next().ok_or(ZapError::Parse {
        line: 1,
        msg: "empty matrix file".into(),
    })?;
    let bad_header = || ZapError::Parse {
        line: hline + 1,
        msg: "expected `# rows=M cols=N`".into(),
    };
    let rest = header.trim().strip_prefix('#').ok_or_else(bad_header)?;
    let mut rows = None;
    let mut cols = None;
    for kv in rest.split_whitespace() {
        match kv.split_once('=') {
            Some(("rows", v)) => rows = v.parse::<usize>().ok(),
            Some(("cols", v)) => cols = v.parse::<usize>().ok(),
            _ => return Err(bad_header()),
        }
    }
    let (rows, cols) = rows.zip(cols).ok_or_else(bad_header)?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (i, line) in lines {
        let vals = line
            .split(',')
            .map(|t| parse_f64(t, i + 1))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != cols {
            return Err(ZapError::Parse {
                line: i + 1,
                msg: format!("expected {cols} values, found {}", vals.len()),
            });
        }
        data.extend(vals);
        seen += 1;
    }
    if seen != rows {
        return Err(ZapError::Parse {
            line: 0,
            msg: format!("header declares {rows} rows, found {seen}"),
        });
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn vector_to_csv(v: &[f64]) -> String {
    let mut s = String::with_capacity(v.len() * 24);
    for x in v {
        s.push_str(&fmt_f64(*x));
        s.push('\n');
    }
    s
}

pub fn vector_from_csv(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| parse_f64(l, i + 1))
        .collect()
}

/// `key=value` lines, blank lines and `#` comments ignored.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ZapError::Parse {
            line: i + 1,
            msg: format!("expected key=value, found `{line}`"),
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn meta_text(p: &RecoveryProblem) -> String {
    let mut s = String::new();
    let m = &p.meta;
    if let Some(seed) = m.seed {
        let _ = writeln!(s, "seed={seed}");
    }
    if let Some(k) = m.sparsity {
        let _ = writeln!(s, "S={k}");
    }
    if let Some(v) = m.p {
        let _ = writeln!(s, "p={}", fmt_f64(v));
    }
    if let Some(v) = m.magnitude {
        let _ = writeln!(s, "R={}", fmt_f64(v));
    }
    let _ = writeln!(s, "epsilon={}", fmt_f64(p.epsilon));
    if let Some(v) = m.snr_db {
        let _ = writeln!(s, "snr_db={}", fmt_f64(v));
    }
    s
}

pub fn write_problem(dir: &Path, p: &RecoveryProblem) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("A.csv"), matrix_to_csv(p.a.as_matrix()))?;
    fs::write(dir.join("y.csv"), vector_to_csv(&p.y))?;
    if let Some(t) = p.truth_values() {
        fs::write(dir.join("truth.csv"), vector_to_csv(t))?;
    }
    fs::write(dir.join("meta"), meta_text(p))?;
    Ok(())
}

pub fn read_problem(dir: &Path) -> Result<RecoveryProblem> {
    let a = MeasurementMatrix::new(matrix_from_csv(&fs::read_to_string(dir.join("A.csv"))?)?)?;
    let y = vector_from_csv(&fs::read_to_string(dir.join("y.csv"))?)?;
    let mut meta = ProblemMeta::default();
    let mut epsilon = 0.0;
    let meta_path = dir.join("meta");
    if meta_path.exists() {
        for (k, v) in parse_key_values(&fs::read_to_string(meta_path)?)? {
            let num = |v: &str| parse_f64(v, 0);
            match k.as_str() {
                "seed" => {
                    meta.seed = Some(v.parse().map_err(|e| ZapError::Parse {
                        line: 0,
                        msg: format!("seed: {e}"),
                    })?)
                }
                "S" => {
                    meta.sparsity = Some(v.parse().map_err(|e| ZapError::Parse {
                        line: 0,
                        msg: format!("S: {e}"),
                    })?)
                }
                "p" => meta.p = Some(num(&v)?),
                "R" => meta.magnitude = Some(num(&v)?),
                "epsilon" => epsilon = num(&v)?,
                "snr_db" => meta.snr_db = Some(num(&v)?),
                _ => {}
            }
        }
    }
    let truth_path = dir.join("truth.csv");
    let truth = if truth_path.exists() {
        let v = vector_from_csv(&fs::read_to_string(truth_path)?)?;
        Some(match SparseSignal::from_values(v.clone()) {
            Ok(s) if meta.sparsity == Some(s.sparsity()) => Truth::Sparse(s),
            _ => Truth::Plain(v),
        })
    } else {
        None
    };
    Ok(RecoveryProblem::new(a, y, truth, epsilon)?.with_meta(meta))
}

/// Trajectory samples as CSV `iter,l1_norm,residual,deviation`.
pub fn trajectory_to_csv(t: &Trajectory) -> String {
    let mut s = String::from("iter,l1_norm,residual,deviation\n");
    for smp in &t.samples {
        let dev = smp.deviation.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{}",
            smp.iter,
            fmt_f64(smp.l1_norm),
            fmt_f64(smp.residual),
            dev
        );
    }
    s
}
