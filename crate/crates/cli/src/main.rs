use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use zap_core::experiment::{run_bound_compare, run_experiment, ExperimentConfig, ExperimentKind};
use zap_core::io::{fmt_f64, read_problem, trajectory_to_csv, vector_to_csv, write_problem};
use zap_core::oracle::{l1_min_solution, sparsest_solution, L1_MAX_N, SPARSEST_MAX_N};
use zap_core::signals::{
    add_noise, derive_seed, gen_compressible_signal, gen_gaussian_matrix, ProblemMeta, RecoveryProblem, Truth,
};
use zap_core::theory::{analyze, check_conditions, default_m0};
use zap_core::zap::{AttractingTerm, SolverConfig, ZapSolver};
use zap_core::{ProjectionOperator, ZapError};

/// Sparse recovery by zero-point attracting projection.
#[derive(Parser)]
#[command(name = "zap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the iteration on a problem directory.
    Solve(SolveArgs),
    /// Generate a seeded problem directory.
    Gen(GenArgs),
    /// Print recovery conditions and convergence constants for a problem.
    Analyze(AnalyzeArgs),
    /// Run a seeded experiment grid and write CSV, SVG and provenance files.
    Bench(BenchArgs),
    /// Brute-force sparsest and minimum-l1 solutions of a small problem.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Problem directory (A.csv, y.csv, optional truth.csv and meta).
    dir: PathBuf,
    #[arg(long, default_value_t = zap_core::zap::DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, default_value_t = 20_000)]
    max_iters: usize,
    /// Attracting term: l1 or l0.
    #[arg(long, default_value = "l1")]
    attracting: String,
    #[arg(long, default_value_t = zap_core::experiment::DEFAULT_L0_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = 100)]
    record_every: usize,
    /// Small steps in a row that end the run; 0 disables the check.
    #[arg(long, default_value_t = 200)]
    plateau_window: usize,
    /// Output directory; defaults to the problem directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(short = 'n', long = "n")]
    n: usize,
    #[arg(short = 'm', long = "m")]
    m: usize,
    /// Sparsity of an exactly sparse truth.
    #[arg(short = 's', long = "s", conflicts_with = "p")]
    s: Option<usize>,
    /// Decay exponent of a compressible truth, in (0, 1).
    #[arg(long, requires = "r")]
    p: Option<f64>,
    /// Magnitude of a compressible truth.
    #[arg(long)]
    r: Option<f64>,
    /// Measurement SNR in dB; omit for noiseless.
    #[arg(long)]
    snr_db: Option<f64>,
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
struct AnalyzeArgs {
    dir: PathBuf,
    /// Sparsity used for the RIP and coherence conditions; read from meta if omitted.
    #[arg(short = 's', long = "s")]
    s: Option<usize>,
    #[arg(long, default_value_t = 2.0)]
    mu: f64,
    /// Seed for sampled constants on large instances.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    /// phase_m, phase_s, snr_sweep, bound_compare, step_noise_grid or solve_one.
    experiment: String,
    /// Master seed; required so every run is reproducible.
    #[arg(long)]
    seed: u64,
    /// key=value configuration file, applied after the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named starting configuration, e.g. desk_phase_m or paper_fig1.
    #[arg(long)]
    preset: Option<String>,
    #[arg(short = 'n', long = "n")]
    n: Option<usize>,
    /// List `a,b,c` or inclusive range `start:stop:step`.
    #[arg(short = 'm', long = "m")]
    m: Option<String>,
    #[arg(short = 's', long = "s")]
    s: Option<String>,
    #[arg(long)]
    snr_db: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated subset of zap_l1, zap_l0, omp.
    #[arg(long)]
    solvers: Option<String>,
    #[arg(long)]
    threshold_db: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    mu: Option<String>,
    /// Allow sampled constants for bound comparisons on large instances.
    #[arg(long)]
    estimate: bool,
    #[arg(long)]
    record_every: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    dir: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Gen(a) => gen(a),
        Command::Analyze(a) => analyze_cmd(a),
        Command::Bench(a) => bench(a),
        Command::Oracle(a) => oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() || matches!(e, ZapError::Io(_)) {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn bad(name: &'static str, reason: impl Into<String>) -> ZapError {
    ZapError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

fn solve(a: SolveArgs) -> Result<(), ZapError> {
    let problem = read_problem(&a.dir)?;
    let attracting = match a.attracting.as_str() {
        "l1" => AttractingTerm::L1,
        "l0" => AttractingTerm::L0 { alpha: a.alpha },
        other => return Err(bad("attracting", format!("expected l1 or l0, got `{other}`"))),
    };
    let config = SolverConfig {
        gamma: a.gamma,
        max_iters: a.max_iters,
        plateau_window: a.plateau_window,
        attracting,
        record_every: a.record_every,
        ..SolverConfig::default()
    };
    let solver = ZapSolver::new(&problem, config)?;
    let traj = solver.run(None, problem.truth_values())?;
    let out = a.out.unwrap_or(a.dir);
    fs::create_dir_all(&out)?;
    fs::write(out.join("trajectory.csv"), trajectory_to_csv(&traj))?;
    fs::write(out.join("x_hat.csv"), vector_to_csv(&traj.final_iterate))?;
    let last = traj.final_sample();
    println!("iterations={}", traj.iterations);
    println!("stop={}", traj.stop_reason);
    println!("l1_norm={}", fmt_f64(last.l1_norm));
    println!("residual={}", fmt_f64(last.residual));
    if let Some(d) = last.deviation {
        println!("deviation={}", fmt_f64(d));
    }
    Ok(())
}

fn gen(a: GenArgs) -> Result<(), ZapError> {
    let snr = a.snr_db.unwrap_or(f64::INFINITY);
    let problem = match (a.s, a.p) {
        (Some(s), None) => RecoveryProblem::sparse(a.m, a.n, s, snr, a.seed)?,
        (None, Some(p)) => {
            let r = a.r.ok_or_else(|| bad("r", "required with --p"))?;
            let matrix = gen_gaussian_matrix(a.m, a.n, derive_seed(a.seed, 1))?;
            let x = gen_compressible_signal(a.n, p, r, derive_seed(a.seed, 2))?;
            let clean = matrix.apply(x.values());
            let (y, eps) = if snr.is_infinite() {
                (clean, 0.0)
            } else {
                add_noise(&clean, snr, derive_seed(a.seed, 3))?
            };
            let meta = ProblemMeta {
                seed: Some(a.seed),
                p: Some(p),
                magnitude: Some(r),
                snr_db: Some(snr),
                ..Default::default()
            };
            RecoveryProblem::new(matrix, y, Some(Truth::Compressible(x)), eps)?.with_meta(meta)
        }
        _ => return Err(bad("s", "give exactly one of --s or --p/--r")),
    };
    write_problem(&a.out, &problem)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn analyze_cmd(a: AnalyzeArgs) -> Result<(), ZapError> {
    let problem = read_problem(&a.dir)?;
    let s =
        a.s.or(problem.meta.sparsity)
            .ok_or_else(|| bad("s", "not in meta; pass --s"))?;
    let report = check_conditions(&problem.a, s)?;
    println!("S={}", report.sparsity);
    println!("coherence={}", fmt_f64(report.coherence));
    println!("coherence_ok={}", report.coherence_ok);
    match (report.delta_2s, report.rip_ok) {
        (Some(d), Some(ok)) => {
            println!("delta_2S={}", fmt_f64(d));
            println!("rip_ok={ok}");
        }
        _ => println!("# delta_2S omitted: subset scan too large"),
    }

    let n = problem.a.cols();
    let x_star = if n <= L1_MAX_N {
        let sol = l1_min_solution(&problem.a, &problem.y)?;
        if !sol.unique {
            println!("# warning: the l1 minimizer is not unique");
        }
        sol.x
    } else {
        problem
            .truth_values()
            .ok_or_else(|| bad("truth", "needed as reference beyond the oracle size"))?
            .to_vec()
    };
    let proj = ProjectionOperator::build(&problem.a)?;
    let x0 = proj.least_squares_point(&problem.y)?;
    let m0 = default_m0(&x0, Some(&x_star));
    let constants = analyze(&problem.a, &x_star, m0, a.mu, a.seed)?;
    print!("{constants}");
    Ok(())
}

fn bench(a: BenchArgs) -> Result<(), ZapError> {
    let kind: ExperimentKind = a.experiment.parse()?;
    let mut cfg = match &a.preset {
        Some(p) => ExperimentConfig::preset(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(path) = &a.config {
        cfg.apply_text(&fs::read_to_string(path)?)?;
    }
    cfg.experiment = kind;
    cfg.master_seed = a.seed;
    let text_flags = [
        ("M", &a.m),
        ("S", &a.s),
        ("snr_db", &a.snr_db),
        ("gamma", &a.gamma),
        ("solvers", &a.solvers),
        ("mu", &a.mu),
    ];
    for (key, value) in text_flags {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    if let Some(v) = a.n {
        cfg.n = v;
    }
    if let Some(v) = a.trials {
        cfg.trials = v;
    }
    if let Some(v) = a.threshold_db {
        cfg.exact_recovery_threshold_db = v;
    }
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    if let Some(v) = a.max_iters {
        cfg.max_iters = v;
    }
    if let Some(v) = a.record_every {
        cfg.record_every = v;
    }
    if let Some(v) = a.workers {
        cfg.workers = v;
    }
    cfg.estimate |= a.estimate;
    cfg.validate()?;

    fs::create_dir_all(&a.out)?;
    let stem = kind.name();
    let path = |ext: &str| -> PathBuf { a.out.join(format!("{stem}.{ext}")) };
    if kind == ExperimentKind::BoundCompare {
        let r = run_bound_compare(&cfg)?;
        fs::write(path("csv"), r.to_csv())?;
        fs::write(path("svg"), r.to_svg())?;
        let prov = format!(
            "version={}\ncertified={}\nattempts={}\n# constants\n{}# config\n{}",
            env!("CARGO_PKG_VERSION"),
            r.certified,
            r.attempts,
            r.constants,
            cfg.to_text()
        );
        fs::write(path("provenance"), prov)?;
    } else {
        let r = run_experiment(&cfg)?;
        fs::write(path("csv"), r.to_csv())?;
        fs::write(path("svg"), r.to_svg())?;
        fs::write(path("provenance"), r.provenance.to_text())?;
    }
    report_written(&a.out, stem);
    Ok(())
}

fn report_written(dir: &Path, stem: &str) {
    for ext in ["csv", "svg", "provenance"] {
        println!("wrote {}", dir.join(format!("{stem}.{ext}")).display());
    }
}

fn oracle(a: OracleArgs) -> Result<(), ZapError> {
    let problem = read_problem(&a.dir)?;
    let n = problem.a.cols();
    if n > SPARSEST_MAX_N.max(L1_MAX_N) {
        return Err(ZapError::TooLarge {
            what: "oracle enumeration",
            size: n as u128,
            limit: SPARSEST_MAX_N.max(L1_MAX_N) as u128,
        });
    }
    let show = |x: &[f64]| x.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(",");
    if n <= SPARSEST_MAX_N {
        let p0 = sparsest_solution(&problem.a, &problem.y)?;
        println!("p0_x={}", show(&p0.x));
        println!("p0_objective={}", fmt_f64(p0.objective));
        println!("p0_unique={}", p0.unique);
    }
    if n <= L1_MAX_N {
        let p1 = l1_min_solution(&problem.a, &problem.y)?;
        println!("p1_x={}", show(&p1.x));
        println!("p1_objective={}", fmt_f64(p1.objective));
        println!("p1_unique={}", p1.unique);
    }
    Ok(())
}
