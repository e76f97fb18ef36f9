//! Experiment configuration and its `key=value` text form.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Result, ZapError};
use crate::io::{fmt_f64, parse_key_values};

/// Default `l0` shape parameter, chosen by a calibration sweep on unit-norm
/// sparse signals (N = 200, S = 10, gamma = 5e-4). Larger values widen the
/// steady-state jitter, which scales with `gamma * alpha`.
pub const DEFAULT_L0_ALPHA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    PhaseM,
    PhaseS,
    SnrSweep,
    BoundCompare,
    StepNoiseGrid,
    SolveOne,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::PhaseM,
        ExperimentKind::PhaseS,
        ExperimentKind::SnrSweep,
        ExperimentKind::BoundCompare,
        ExperimentKind::StepNoiseGrid,
        ExperimentKind::SolveOne,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::PhaseM => "phase_m",
            ExperimentKind::PhaseS => "phase_s",
            ExperimentKind::SnrSweep => "snr_sweep",
            ExperimentKind::BoundCompare => "bound_compare",
            ExperimentKind::StepNoiseGrid => "step_noise_grid",
            ExperimentKind::SolveOne => "solve_one",
        }
    }

    /// Phase experiments report recovery probability; the rest mean SNR.
    pub fn reports_probability(self) -> bool {
        matches!(self, ExperimentKind::PhaseM | ExperimentKind::PhaseS)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = ZapError;
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == norm || k.name().replace('_', "") == norm)
            .ok_or_else(|| invalid("experiment", format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    ZapL1,
    ZapL0,
    Omp,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::ZapL1 => "zap_l1",
            SolverKind::ZapL0 => "zap_l0",
            SolverKind::Omp => "omp",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = ZapError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "zap_l1" | "zapl1" | "l1" => Ok(SolverKind::ZapL1),
            "zap_l0" | "zapl0" | "l0" => Ok(SolverKind::ZapL0),
            "omp" => Ok(SolverKind::Omp),
            _ => Err(invalid("solvers", format!("unknown solver `{s}`"))),
        }
    }
}

/// Full description of a seeded experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n: usize,
    pub m: Vec<usize>,
    pub s: Vec<usize>,
    pub snr_db: Vec<f64>,
    pub gamma: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub solvers: Vec<SolverKind>,
    pub exact_recovery_threshold_db: f64,
    pub alpha: f64,
    /// Iteration budget; `0` picks `ceil(2 / gamma)` per cell.
    pub max_iters: usize,
    /// Constant `mu` values for bound comparisons.
    pub mu: Vec<f64>,
    /// Use sampled constants when the instance is too large for exact ones.
    pub estimate: bool,
    /// Row stride of bound-comparison CSVs.
    pub record_every: usize,
    /// Worker threads; `0` lets the pool decide. Never affects results.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::PhaseM,
            n: 200,
            m: (40..=120).step_by(10).collect(),
            s: vec![10],
            snr_db: vec![f64::INFINITY],
            gamma: vec![crate::zap::DEFAULT_GAMMA],
            trials: 50,
            master_seed: 0,
            solvers: vec![SolverKind::ZapL1],
            exact_recovery_threshold_db: 40.0,
            alpha: DEFAULT_L0_ALPHA,
            max_iters: 0,
            mu: vec![1.5, 2.0, 4.0],
            estimate: false,
            record_every: 1,
            workers: 0,
        }
    }
}

fn parse_num<T: FromStr>(key: &'static str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.trim()
        .parse::<T>()
        .map_err(|e| invalid(key, format!("`{v}`: {e}")))
}

fn parse_float(key: &'static str, v: &str) -> Result<f64> {
    match v.trim().to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        t => parse_num(key, t),
    }
}

/// `a,b,c` or the inclusive range `start:stop:step`.
pub fn parse_count_list(key: &'static str, v: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = v.split(':').collect();
    if parts.len() == 3 {
        let (a, b, step): (usize, usize, usize) = (
            parse_num(key, parts[0])?,
            parse_num(key, parts[1])?,
            parse_num(key, parts[2])?,
        );
        if step == 0 || b < a {
            return Err(invalid(key, format!("bad range `{v}`")));
        }
        return Ok((a..=b).step_by(step).collect());
    }
    v.split(',').map(|t| parse_num(key, t)).collect()
}

pub fn parse_float_list(key: &'static str, v: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = v.split(':').collect();
    if parts.len() == 3 {
        let (a, b, step) = (
            parse_float(key, parts[0])?,
            parse_float(key, parts[1])?,
            parse_float(key, parts[2])?,
        );
        if !(step > 0.0) || b < a {
            return Err(invalid(key, format!("bad range `{v}`")));
        }
        let count = ((b - a) / step + 1e-9).floor() as usize;
        return Ok((0..=count).map(|k| a + step * k as f64).collect());
    }
    v.split(',').map(|t| parse_float(key, t)).collect()
}

fn parse_bool(key: &'static str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" => Ok(false),
        _ => Err(invalid(key, format!("expected a boolean, got `{v}`"))),
    }
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.trim() {
            "experiment" => self.experiment = value.parse()?,
            "N" | "n" => self.n = parse_num("N", value)?,
            "M" | "m" => self.m = parse_count_list("M", value)?,
            "S" | "s" => self.s = parse_count_list("S", value)?,
            "snr_db" | "snr" => self.snr_db = parse_float_list("snr_db", value)?,
            "gamma" => self.gamma = parse_float_list("gamma", value)?,
            "trials" => self.trials = parse_num("trials", value)?,
            "seed" | "master_seed" => self.master_seed = parse_num("seed", value)?,
            "solvers" | "solver" => self.solvers = value.split(',').map(str::parse).collect::<Result<_>>()?,
            "threshold_db" | "exact_recovery_threshold_db" => {
                self.exact_recovery_threshold_db = parse_float("threshold_db", value)?
            }
            "alpha" => self.alpha = parse_float("alpha", value)?,
            "max_iters" => self.max_iters = parse_num("max_iters", value)?,
            "mu" => self.mu = parse_float_list("mu", value)?,
            "estimate" => self.estimate = parse_bool("estimate", value)?,
            "record_every" => self.record_every = parse_num("record_every", value)?,
            "workers" => self.workers = parse_num("workers", value)?,
            other => {
                return Err(ZapError::InvalidParameter {
                    name: "config",
                    reason: format!("unknown key `{other}`"),
                })
            }
        }
        Ok(())
    }

    /// Applies every line of a `key=value` file on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (k, v) in parse_key_values(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    /// Text form that [`ExperimentConfig::from_text`] reads back unchanged.
    /// `workers` is omitted; it cannot change results.
    pub fn to_text(&self) -> String {
        let f = |v: &f64| fmt_f64(*v);
        let mut s = String::new();
        s += &format!("experiment={}\n", self.experiment);
        s += &format!("N={}\n", self.n);
        s += &format!("M={}\n", join(&self.m, usize::to_string));
        s += &format!("S={}\n", join(&self.s, usize::to_string));
        s += &format!("snr_db={}\n", join(&self.snr_db, f));
        s += &format!("gamma={}\n", join(&self.gamma, f));
        s += &format!("trials={}\n", self.trials);
        s += &format!("seed={}\n", self.master_seed);
        s += &format!("solvers={}\n", join(&self.solvers, |k| k.name().to_string()));
        s += &format!("threshold_db={}\n", fmt_f64(self.exact_recovery_threshold_db));
        s += &format!("alpha={}\n", fmt_f64(self.alpha));
        s += &format!("max_iters={}\n", self.max_iters);
        s += &format!("mu={}\n", join(&self.mu, f));
        s += &format!("estimate={}\n", self.estimate);
        s += &format!("record_every={}\n", self.record_every);
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("N", "must be positive"));
        }
        for (name, empty) in [
            ("M", self.m.is_empty()),
            ("S", self.s.is_empty()),
            ("snr_db", self.snr_db.is_empty()),
            ("gamma", self.gamma.is_empty()),
            ("solvers", self.solvers.is_empty()),
        ] {
            if empty {
                return Err(ZapError::InvalidParameter {
                    name,
                    reason: "must not be empty".into(),
                });
            }
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        for &m in &self.m {
            if m == 0 || m > self.n {
                return Err(invalid("M", format!("{m} must lie in 1..={}", self.n)));
            }
        }
        for &s in &self.s {
            if s == 0 || s > self.n {
                return Err(ZapError::InvalidSparsity { s, n: self.n });
            }
            if self.solvers.contains(&SolverKind::Omp) && self.m.iter().any(|&m| s > m) {
                return Err(invalid("S", "OMP needs S <= M in every cell"));
            }
        }
        if self.snr_db.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
            return Err(invalid("snr_db", "must be a number or inf"));
        }
        if self.gamma.iter().any(|g| !(*g > 0.0) || !g.is_finite()) {
            return Err(invalid("gamma", "must be positive"));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(invalid("alpha", "must be positive"));
        }
        if self.exact_recovery_threshold_db.is_nan() {
            return Err(invalid("threshold_db", "must be a number"));
        }
        if self.record_every == 0 {
            return Err(invalid("record_every", "must be at least 1"));
        }
        if self.experiment == ExperimentKind::BoundCompare && self.mu.iter().any(|mu| !(*mu > 1.0)) {
            return Err(invalid("mu", "every value must exceed 1"));
        }
        Ok(())
    }

    /// Named configurations. `desk_*` are the reduced-scale defaults;
    /// `paper_*` reproduce the full-size grids (N = 1000) and are slow.
    pub fn preset(name: &str) -> Result<Self> {
        let d = ExperimentConfig::default();
        let all = vec![SolverKind::ZapL1, SolverKind::ZapL0, SolverKind::Omp];
        let c = match name {
            "desk_phase_m" => d,
            "desk_phase_s" => ExperimentConfig {
                experiment: ExperimentKind::PhaseS,
                m: vec![80],
                s: (5..=40).step_by(5).collect(),
                ..d
            },
            "desk_snr_sweep" => ExperimentConfig {
                experiment: ExperimentKind::SnrSweep,
                m: vec![80],
                s: vec![10],
                snr_db: vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
                solvers: all,
                ..d
            },
            "desk_step_noise" => ExperimentConfig {
                experiment: ExperimentKind::StepNoiseGrid,
                n: 100,
                m: vec![40],
                s: vec![5],
                snr_db: vec![20.0, 40.0, f64::INFINITY],
                gamma: vec![1e-2, 1e-3, 1e-4, 1e-5],
                trials: 20,
                ..d
            },
            "desk_bound_compare" => ExperimentConfig {
                experiment: ExperimentKind::BoundCompare,
                n: 8,
                m: vec![6],
                s: vec![1],
                gamma: vec![1e-3],
                trials: 1,
                ..d
            },
            "paper_fig1" => ExperimentConfig {
                n: 1000,
                m: (140..=320).step_by(20).collect(),
                s: vec![50],
                trials: 200,
                solvers: all,
                ..d
            },
            "paper_fig2" => ExperimentConfig {
                experiment: ExperimentKind::PhaseS,
                n: 1000,
                m: vec![200],
                s: (25..=70).step_by(5).collect(),
                trials: 200,
                solvers: all,
                ..d
            },
            "paper_fig3" => ExperimentConfig {
                experiment: ExperimentKind::SnrSweep,
                n: 1000,
                m: vec![200],
                s: vec![30],
                snr_db: vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
                trials: 200,
                solvers: all,
                ..d
            },
            "paper_fig4" => ExperimentConfig {
                experiment: ExperimentKind::BoundCompare,
                n: 1000,
                m: vec![250],
                s: vec![50],
                trials: 1,
                estimate: true,
                max_iters: 8000,
                record_every: 10,
                ..d
            },
            "paper_fig6" => ExperimentConfig {
                experiment: ExperimentKind::StepNoiseGrid,
                n: 1000,
                m: vec![150],
                s: vec![20],
                snr_db: vec![10.0, 20.0, 30.0, 40.0, f64::INFINITY],
                gamma: vec![1e-2, 1e-3, 1e-4, 1e-5],
                trials: 100,
                ..d
            },
            _ => return Err(invalid("preset", format!("unknown preset `{name}`"))),
        };
        Ok(c)
    }

    pub const PRESETS: [&'static str; 10] = [
        "desk_phase_m",
        "desk_phase_s",
        "desk_snr_sweep",
        "desk_step_noise",
        "desk_bound_compare",
        "paper_fig1",
        "paper_fig2",
        "paper_fig3",
        "paper_fig4",
        "paper_fig6",
    ];
}
