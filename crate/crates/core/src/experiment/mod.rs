//! Seeded experiment grids: recovery probability curves, SNR sweeps, the
//! step-size and noise grid, and bound comparisons.

mod bound;
mod config;
mod omp;
pub mod svg;

use std::fmt::Write as _;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;

pub use bound::{run_bound_compare, BoundCompareReport};
pub use config::{
    parse_count_list, parse_float_list, ExperimentConfig, ExperimentKind, SolverKind, DEFAULT_L0_ALPHA,
};
pub use omp::{omp_baseline, omp_path, OmpPath};

use crate::error::{invalid, Result, ZapError};
use crate::io::fmt_f64;
use crate::signals::{trial_seed, RecoveryProblem};
use crate::vector;
use crate::zap::{solve, AttractingTerm, SolverConfig};

/// Reconstruction SNR returned for an exact match.
pub const SNR_EXACT: f64 = f64::INFINITY;

/// Per-trial SNRs are clipped here before averaging so one exact recovery
/// does not turn a cell mean into infinity.
pub const SNR_CAP_DB: f64 = 300.0;

/// `20 log10(||x|| / ||x - x_hat||)` in dB; `+inf` once the error is below `1e-30`.
pub fn reconstruction_snr(x_true: &[f64], x_hat: &[f64]) -> Result<f64> {
    if x_true.len() != x_hat.len() {
        return Err(ZapError::DimensionMismatch {
            expected: x_true.len(),
            got: x_hat.len(),
        });
    }
    let signal = vector::norm2(x_true);
    if signal == 0.0 {
        return Err(ZapError::ZeroSignal);
    }
    let err = vector::dist2(x_true, x_hat);
    if err < 1e-30 {
        return Ok(SNR_EXACT);
    }
    Ok(20.0 * (signal / err).log10())
}

/// Iteration budget for one cell: the configured value, or `ceil(2 / gamma)`.
pub fn iteration_budget(config: &ExperimentConfig, gamma: f64) -> usize {
    if config.max_iters > 0 {
        config.max_iters
    } else {
        (2.0 / gamma).ceil() as usize
    }
}

/// Parameters of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub m: usize,
    pub s: usize,
    pub snr_db: f64,
    pub gamma: f64,
}

/// Cells in row order: `M`, then `S`, then `snr_db`, then `gamma`.
pub fn grid(config: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &m in &config.m {
        for &s in &config.s {
            for &snr_db in &config.snr_db {
                for &gamma in &config.gamma {
                    cells.push(Cell { m, s, snr_db, gamma });
                }
            }
        }
    }
    cells
}

/// Runs one solver on `problem` and returns the reconstruction SNR.
pub fn run_solver(
    solver: SolverKind,
    problem: &RecoveryProblem,
    gamma: f64,
    max_iters: usize,
    alpha: f64,
    sparsity: usize,
) -> Result<f64> {
    let truth = problem
        .truth_values()
        .ok_or_else(|| invalid("problem", "needs a ground truth"))?;
    let x_hat = match solver {
        SolverKind::Omp => omp_baseline(problem, sparsity)?,
        SolverKind::ZapL1 | SolverKind::ZapL0 => {
            let attracting = if solver == SolverKind::ZapL1 {
                AttractingTerm::L1
            } else {
                AttractingTerm::L0 { alpha }
            };
            let cfg = SolverConfig {
                gamma,
                max_iters,
                attracting,
                record_every: max_iters,
                ..SolverConfig::default()
            };
            solve(problem, &cfg, None)?.final_iterate
        }
    };
    reconstruction_snr(truth, &x_hat)
}

/// Aggregate of one solver over the trials of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverStats {
    pub solver: SolverKind,
    pub trials: usize,
    pub successes: usize,
    /// Trials that returned an error.
    pub failures: usize,
    /// Mean of the clipped SNRs over trials that did not fail.
    pub mean_snr_db: f64,
}

impl SolverStats {
    pub fn success_probability(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub cell: Cell,
    pub stats: Vec<SolverStats>,
}

/// Run metadata kept out of the CSV so reruns stay byte-identical.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub config_echo: String,
    pub version: String,
    pub timestamp_unix: u64,
    pub workers: usize,
    pub elapsed_secs: f64,
}

impl Provenance {
    pub fn to_text(&self) -> String {
        format!(
            "version={}\ntimestamp_unix={}\nworkers={}\nelapsed_secs={:.3}\n# config\n{}",
            self.version, self.timestamp_unix, self.workers, self.elapsed_secs, self.config_echo
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
    pub provenance: Provenance,
}

fn trial_outcomes(config: &ExperimentConfig, cell: Cell, k: usize) -> Vec<Result<f64>> {
    let seed = trial_seed(config.master_seed, k as u64);
    let problem = RecoveryProblem::sparse(cell.m, config.n, cell.s, cell.snr_db, seed);
    let max_iters = iteration_budget(config, cell.gamma);
    config
        .solvers
        .iter()
        .map(|&solver| match &problem {
            Ok(p) => run_solver(solver, p, cell.gamma, max_iters, config.alpha, cell.s),
            Err(e) => Err(invalid("problem", e.to_string())),
        })
        .collect()
}

/// Runs every `(cell, trial)` task. Trial `k` of every cell uses the same
/// derived seed, and results are gathered in task order, so the output does
/// not depend on the number of workers.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    if config.experiment == ExperimentKind::BoundCompare {
        return Err(invalid(
            "experiment",
            "bound comparisons run through run_bound_compare",
        ));
    }
    let started = Instant::now();
    let cells = grid(config);
    let tasks: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..config.trials).map(move |k| (c, k)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| invalid("workers", e.to_string()))?;
    let outcomes: Vec<Vec<Result<f64>>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, k)| trial_outcomes(config, cells[c], k))
            .collect()
    });

    let rows = cells
        .iter()
        .enumerate()
        .map(|(c, &cell)| {
            let trials = &outcomes[c * config.trials..(c + 1) * config.trials];
            let stats = config
                .solvers
                .iter()
                .enumerate()
                .map(|(j, &solver)| {
                    let mut successes = 0;
                    let mut failures = 0;
                    let mut sum = 0.0;
                    for t in trials {
                        match &t[j] {
                            Ok(snr) => {
                                if *snr >= config.exact_recovery_threshold_db {
                                    successes += 1;
                                }
                                sum += snr.min(SNR_CAP_DB);
                            }
                            Err(_) => failures += 1,
                        }
                    }
                    let ok = config.trials - failures;
                    SolverStats {
                        solver,
                        trials: config.trials,
                        successes,
                        failures,
                        mean_snr_db: if ok > 0 { sum / ok as f64 } else { f64::NAN },
                    }
                })
                .collect();
            ReportRow { cell, stats }
        })
        .collect();

    Ok(ExperimentReport {
        config: config.clone(),
        rows,
        provenance: Provenance {
            config_echo: config.to_text(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            workers: pool.current_num_threads(),
            elapsed_secs: started.elapsed().as_secs_f64(),
        },
    })
}

impl ExperimentReport {
    /// One row per grid cell; per-solver columns
    /// `<solver>_success,<solver>_mean_snr_db,<solver>_failures`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("experiment,N,M,S,snr_db,gamma,trials,seed");
        for solver in &self.config.solvers {
            let _ = write!(s, ",{0}_success,{0}_mean_snr_db,{0}_failures", solver.name());
        }
        s.push('\n');
        for row in &self.rows {
            let c = row.cell;
            let _ = write!(
                s,
                "{},{},{},{},{},{},{},{}",
                self.config.experiment,
                self.config.n,
                c.m,
                c.s,
                fmt_f64(c.snr_db),
                fmt_f64(c.gamma),
                self.config.trials,
                self.config.master_seed
            );
            for st in &row.stats {
                let _ = write!(
                    s,
                    ",{},{},{}",
                    fmt_f64(st.success_probability()),
                    fmt_f64(st.mean_snr_db),
                    st.failures
                );
            }
            s.push('\n');
        }
        s
    }

    /// Line chart of the varied parameter against probability or mean SNR,
    /// one series per solver and combination of the other parameters.
    pub fn to_svg(&self) -> String {
        let cfg = &self.config;
        let (x_label, log_x): (&str, bool) = match cfg.experiment {
            ExperimentKind::PhaseM => ("measurements M", false),
            ExperimentKind::PhaseS => ("sparsity S", false),
            ExperimentKind::SnrSweep => ("measurement SNR (dB)", false),
            ExperimentKind::StepNoiseGrid => ("step size gamma", true),
            _ => ("trial cell", false),
        };
        let x_of = |c: &Cell, i: usize| match cfg.experiment {
            ExperimentKind::PhaseM => c.m as f64,
            ExperimentKind::PhaseS => c.s as f64,
            ExperimentKind::SnrSweep => c.snr_db,
            ExperimentKind::StepNoiseGrid => c.gamma,
            _ => i as f64,
        };
        let key_of = |c: &Cell| -> String {
            let mut parts = Vec::new();
            if cfg.experiment != ExperimentKind::PhaseM && cfg.m.len() > 1 {
                parts.push(format!("M={}", c.m));
            }
            if cfg.experiment != ExperimentKind::PhaseS && cfg.s.len() > 1 {
                parts.push(format!("S={}", c.s));
            }
            if cfg.experiment != ExperimentKind::SnrSweep && cfg.snr_db.len() > 1 {
                parts.push(format!("snr={}", c.snr_db));
            }
            if cfg.experiment != ExperimentKind::StepNoiseGrid && cfg.gamma.len() > 1 {
                parts.push(format!("gamma={:e}", c.gamma));
            }
            parts.join(" ")
        };
        let prob = cfg.experiment.reports_probability();
        let mut series: Vec<svg::Series> = Vec::new();
        for (j, solver) in cfg.solvers.iter().enumerate() {
            for (i, row) in self.rows.iter().enumerate() {
                let key = key_of(&row.cell);
                let label = if key.is_empty() {
                    solver.name().to_string()
                } else {
                    format!("{solver} {key}")
                };
                let st = &row.stats[j];
                let y = if prob {
                    st.success_probability()
                } else {
                    st.mean_snr_db
                };
                let point = (x_of(&row.cell, i), y);
                match series.iter_mut().find(|s| s.label == label) {
                    Some(s) => s.points.push(point),
                    None => series.push(svg::Series {
                        label,
                        points: vec![point],
                    }),
                }
            }
        }
        for s in &mut series {
            s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        svg::Chart {
            title: format!("{} (N={}, {} trials)", cfg.experiment, cfg.n, cfg.trials),
            x_label: x_label.into(),
            y_label: if prob {
                "recovery probability".into()
            } else {
                "mean reconstruction SNR (dB)".into()
            },
            log_x,
            log_y: false,
            series,
        }
        .render()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn snr_values() {
        let x = [0.6, 0.8, 0.0];
        assert_eq!(reconstruction_snr(&x, &x).unwrap(), f64::INFINITY);
        assert_relative_eq!(
            reconstruction_snr(&x, &[0.61, 0.8, 0.0]).unwrap(),
            40.0,
            epsilon = 1e-9
        );
        assert_relative_eq!(
            reconstruction_snr(&x, &[0.6, 0.7, 0.0]).unwrap(),
            20.0,
            epsilon = 1e-9
        );
        assert!(matches!(
            reconstruction_snr(&[0.0; 3], &x),
            Err(ZapError::ZeroSignal)
        ));
    }

    fn small(kind: ExperimentKind) -> ExperimentConfig {
        ExperimentConfig {
            experiment: kind,
            n: 40,
            m: vec![12, 20],
            s: vec![2],
            trials: 3,
            master_seed: 11,
            max_iters: 400,
            gamma: vec![1e-3],
            solvers: vec![SolverKind::ZapL1, SolverKind::ZapL0, SolverKind::Omp],
            ..Default::default()
        }
    }

    #[test]
    fn square_cell_recovers_exactly() {
        let cfg = ExperimentConfig {
            n: 30,
            m: vec![30],
            s: vec![3],
            trials: 1,
            ..Default::default()
        };
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.rows[0].stats[0].success_probability(), 1.0);
    }

    #[test]
    fn report_shape_and_determinism() {
        let cfg = small(ExperimentKind::PhaseM);
        let a = run_experiment(&cfg).unwrap();
        assert_eq!(a.rows.len(), 2);
        let csv = a.to_csv();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("experiment,N,M,S,snr_db,gamma,trials,seed,zap_l1_success"));
        for row in &a.rows {
            for st in &row.stats {
                assert!((0.0..=1.0).contains(&st.success_probability()));
                assert_eq!(st.trials, 3);
            }
        }
        let one = run_experiment(&ExperimentConfig {
            workers: 1,
            ..cfg.clone()
        })
        .unwrap();
        let many = run_experiment(&ExperimentConfig { workers: 4, ..cfg }).unwrap();
        assert_eq!(one.to_csv(), csv);
        assert_eq!(many.to_csv(), csv);
        assert!(a.provenance.to_text().contains("experiment=phase_m"));
    }

    #[test]
    fn svg_per_kind() {
        let mut cfg = small(ExperimentKind::StepNoiseGrid);
        cfg.m = vec![16];
        cfg.gamma = vec![1e-2, 1e-3];
        cfg.snr_db = vec![20.0, f64::INFINITY];
        cfg.trials = 1;
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.rows.len(), 4);
        let svg = r.to_svg();
        // Three solvers times two noise levels.
        assert_eq!(svg.matches("<polyline").count(), 6);
        assert!(svg.contains("mean reconstruction SNR"));
    }

    #[test]
    fn budget_and_dispatch() {
        let cfg = ExperimentConfig {
            gamma: vec![1e-3],
            ..Default::default()
        };
        assert_eq!(iteration_budget(&cfg, 1e-3), 2000);
        assert_eq!(
            iteration_budget(&ExperimentConfig { max_iters: 7, ..cfg }, 1e-3),
            7
        );
        let bad = ExperimentConfig {
            experiment: ExperimentKind::BoundCompare,
            ..Default::default()
        };
        assert!(run_experiment(&bad).is_err());
    }
}
