//! Command-line front end: solve/predict, Ramsey search, oracle checks and
//! encoding export. Every flag can also be set through an
//! `ANALOG_MAXSAT_*` environment variable; the JSON result file echoes the
//! effective configuration so runs are reproducible from the artifact
//! alone.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use analog_maxsat::dynamics::{choose_b, integrate_traced, SolverParams};
use analog_maxsat::ensemble::{run_ensemble_with_workers, LevelSemantics, TableSummary};
use analog_maxsat::formula::{
    exhaustive_min_energy, parse_dimacs_file, write_dimacs, Formula, ParseOptions,
    TautologyPolicy, DEFAULT_ORACLE_VAR_LIMIT,
};
use analog_maxsat::predictor::{
    escape_rates_sem, fit_power_law, predict_min, solve, write_escape_csv, FitOptions,
    FitPointJson, LedgerStatus, PredictorConfig, SolveReport,
};
use analog_maxsat::ramsey::{
    count_mono_cliques, encode, encode_circulant, two_phase_search, TwoPhaseConfig,
};

#[derive(Parser)]
#[command(
    name = "analog-maxsat",
    version,
    about = "Chaotic continuous-time MaxSAT solver with escape-rate extrapolation"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve a DIMACS CNF instance, predicting and deciding the optimum
    Solve(SolveArgs),
    /// Two-phase Ramsey coloring search for R(m,m) on K_n
    Ramsey(RamseyArgs),
    /// Exhaustive exact minimum energy (small instances)
    Oracle(OracleArgs),
    /// Print a Ramsey clique encoding as DIMACS
    Encode(EncodeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum SemanticsArg {
    /// reached level E = visited energy <= E
    Le,
    /// reached level E = visited energy < E
    Lt,
}

impl From<SemanticsArg> for LevelSemantics {
    fn from(s: SemanticsArg) -> Self {
        match s {
            SemanticsArg::Le => LevelSemantics::Le,
            SemanticsArg::Lt => LevelSemantics::Lt,
        }
    }
}

/// `auto` (probe rule) or an explicit hat strength.
#[derive(Clone, Debug)]
enum BArg {
    Auto,
    Fixed(f64),
}

impl std::str::FromStr for BArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            Ok(BArg::Auto)
        } else {
            s.parse::<f64>()
                .map(BArg::Fixed)
                .map_err(|_| format!("expected `auto` or a number, got {s:?}"))
        }
    }
}

impl std::fmt::Display for BArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BArg::Auto => write!(f, "auto"),
            BArg::Fixed(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// DIMACS CNF input file
    cnf: PathBuf,
    /// Hat-term strength: `auto` runs the probe rule
    #[arg(long, default_value = "auto", env = "ANALOG_MAXSAT_B")]
    b: BArg,
    /// Trajectory horizon in analog time
    #[arg(long, default_value_t = 50.0, env = "ANALOG_MAXSAT_TMAX")]
    tmax: f64,
    /// Trajectories run before the first prediction
    #[arg(long, default_value_t = 100, env = "ANALOG_MAXSAT_GAMMA_MIN")]
    gamma_min: u64,
    /// Hard trajectory budget
    #[arg(long, default_value_t = 2_000_000, env = "ANALOG_MAXSAT_GAMMA_MAX")]
    gamma_max: u64,
    /// Master seed; trajectory i uses stream i of this seed
    #[arg(long, default_value_t = 0, env = "ANALOG_MAXSAT_SEED")]
    seed: u64,
    /// Worker threads (0 = all cores); never affects results
    #[arg(long, default_value_t = 0, env = "ANALOG_MAXSAT_THREADS")]
    threads: usize,
    /// Write p(E,t) curves as CSV
    #[arg(long, env = "ANALOG_MAXSAT_PET_CSV")]
    pet_csv: Option<PathBuf>,
    /// Write (E, kappa) points as CSV
    #[arg(long, env = "ANALOG_MAXSAT_KAPPA_CSV")]
    kappa_csv: Option<PathBuf>,
    /// Write the trace (t, E, V, |s|) of trajectory 0 as CSV
    #[arg(long, env = "ANALOG_MAXSAT_TRACE_CSV")]
    trace_csv: Option<PathBuf>,
    /// JSON report path (default: stdout)
    #[arg(long, env = "ANALOG_MAXSAT_OUT")]
    out: Option<PathBuf>,
    /// Best-assignment text file (whitespace-separated 0/1)
    #[arg(long, env = "ANALOG_MAXSAT_ASSIGNMENT_OUT")]
    assignment_out: Option<PathBuf>,
    /// Level convention for the escape-rate estimates
    #[arg(long, value_enum, default_value_t = SemanticsArg::Le, env = "ANALOG_MAXSAT_LEVEL_SEMANTICS")]
    level_semantics: SemanticsArg,
    /// How far below E_bar the intercept scan reaches
    #[arg(long, default_value_t = 10.0, env = "ANALOG_MAXSAT_E0_SCAN_DEPTH")]
    e0_scan_depth: f64,
    /// Minimum samples for a level to enter the fit
    #[arg(long, default_value_t = 5, env = "ANALOG_MAXSAT_MIN_COUNT")]
    min_count: u64,
    /// Exclude fit levels below this energy
    #[arg(long, env = "ANALOG_MAXSAT_FIT_E_MIN")]
    fit_e_min: Option<i64>,
    /// Exclude fit levels above this energy
    #[arg(long, env = "ANALOG_MAXSAT_FIT_E_MAX")]
    fit_e_max: Option<i64>,
    /// Absolute step-error tolerance
    #[arg(long, default_value_t = 1e-6, env = "ANALOG_MAXSAT_ABS_TOL")]
    abs_tol: f64,
    /// Relative step-error tolerance
    #[arg(long, default_value_t = 1e-4, env = "ANALOG_MAXSAT_REL_TOL")]
    rel_tol: f64,
    /// Drop tautological clauses instead of rejecting the input
    #[arg(long, env = "ANALOG_MAXSAT_PERMISSIVE")]
    permissive: bool,
}

#[derive(Args)]
struct RamseyArgs {
    /// Clique order m of R(m,m)
    #[arg(long, env = "ANALOG_MAXSAT_M")]
    m: usize,
    /// Graph order n (vertices of the complete graph)
    #[arg(long, env = "ANALOG_MAXSAT_N")]
    n: usize,
    /// Circulant-space trajectories in phase 1
    #[arg(long, default_value_t = 200, env = "ANALOG_MAXSAT_PHASE1_GAMMA")]
    phase1_gamma: u64,
    /// Full-space trajectories in phase 2 (one per kept seed)
    #[arg(long, default_value_t = 50, env = "ANALOG_MAXSAT_PHASE2_BUDGET")]
    phase2_budget: u64,
    /// Keep seeds within this many cliques of the best seen
    #[arg(long, default_value_t = 20, env = "ANALOG_MAXSAT_SEED_SLACK")]
    seed_slack: i64,
    /// Hat strength for the full-space phase (`auto` = probe rule)
    #[arg(long, default_value = "auto", env = "ANALOG_MAXSAT_B")]
    b: BArg,
    /// Hat strength for the circulant phase (`auto` = probe rule)
    #[arg(long, default_value = "auto", env = "ANALOG_MAXSAT_B_PHASE1")]
    b_phase1: BArg,
    /// Trajectory horizon in analog time
    #[arg(long, default_value_t = 50.0, env = "ANALOG_MAXSAT_TMAX")]
    tmax: f64,
    /// Inward offset of phase-2 corner starts
    #[arg(long, default_value_t = 1e-3, env = "ANALOG_MAXSAT_CORNER_EPSILON")]
    corner_epsilon: f64,
    #[arg(long, default_value_t = 0, env = "ANALOG_MAXSAT_SEED")]
    seed: u64,
    #[arg(long, default_value_t = 0, env = "ANALOG_MAXSAT_THREADS")]
    threads: usize,
    /// Run a full-space prediction ensemble of this size (0 = skip)
    #[arg(long, default_value_t = 0, env = "ANALOG_MAXSAT_PREDICT_GAMMA")]
    predict_gamma: u64,
    /// Horizon for the prediction ensemble (default: --tmax)
    #[arg(long, env = "ANALOG_MAXSAT_PREDICT_TMAX")]
    predict_tmax: Option<f64>,
    #[arg(long, default_value_t = 5, env = "ANALOG_MAXSAT_MIN_COUNT")]
    min_count: u64,
    #[arg(long, default_value_t = 10.0, env = "ANALOG_MAXSAT_E0_SCAN_DEPTH")]
    e0_scan_depth: f64,
    /// Coloring matrix output (n lines of n 0/1 values)
    #[arg(long, env = "ANALOG_MAXSAT_COLORING_OUT")]
    coloring_out: Option<PathBuf>,
    /// JSON summary path (default: stdout)
    #[arg(long, env = "ANALOG_MAXSAT_OUT")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// DIMACS CNF input file
    cnf: PathBuf,
    /// Exhaustive-sweep variable cap
    #[arg(long, default_value_t = DEFAULT_ORACLE_VAR_LIMIT, env = "ANALOG_MAXSAT_VAR_LIMIT")]
    var_limit: usize,
    /// Drop tautological clauses instead of rejecting the input
    #[arg(long, env = "ANALOG_MAXSAT_PERMISSIVE")]
    permissive: bool,
}

#[derive(Args)]
struct EncodeArgs {
    /// Clique order m
    #[arg(long, env = "ANALOG_MAXSAT_M")]
    m: usize,
    /// Graph order n
    #[arg(long, env = "ANALOG_MAXSAT_N")]
    n: usize,
    /// Apply the circulant distance-variable reduction
    #[arg(long, env = "ANALOG_MAXSAT_CIRCULANT")]
    circulant: bool,
    /// Output path (default: stdout)
    #[arg(long, env = "ANALOG_MAXSAT_OUT")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.cmd {
        Cmd::Solve(args) => cmd_solve(args),
        Cmd::Ramsey(args) => cmd_ramsey(args),
        Cmd::Oracle(args) => cmd_oracle(args),
        Cmd::Encode(args) => cmd_encode(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn parse_opts(permissive: bool) -> ParseOptions {
    ParseOptions {
        tautologies: if permissive {
            TautologyPolicy::Drop
        } else {
            TautologyPolicy::Reject
        },
    }
}

fn load_formula(path: &Path, permissive: bool) -> Result<Formula> {
    parse_dimacs_file(path, parse_opts(permissive))
        .with_context(|| format!("reading {}", path.display()))
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(value)?;
    match out {
        Some(path) => {
            let mut f = BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            );
            f.write_all(&bytes)?;
            f.write_all(b"\n")?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(&bytes)?;
            lock.write_all(b"\n")?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SolveConfigEcho {
    cnf: String,
    b_requested: String,
    b_used: f64,
    tmax: f64,
    gamma_min: u64,
    gamma_max: u64,
    seed: u64,
    threads: usize,
    level_semantics: SemanticsArg,
    e0_scan_depth: f64,
    min_count: u64,
    fit_e_min: Option<i64>,
    fit_e_max: Option<i64>,
    abs_tol: f64,
    rel_tol: f64,
    permissive: bool,
}

#[derive(Serialize)]
struct SolveResultFile<'a> {
    command: &'static str,
    config: SolveConfigEcho,
    report: &'a SolveReport,
    /// Ensemble view: per-level counts and best assignments.
    table: TableSummary,
    runtime_seconds: f64,
}

fn cmd_solve(args: SolveArgs) -> Result<u8> {
    let started = Instant::now();
    let formula = load_formula(&args.cnf, args.permissive)?;

    let b_used = match args.b {
        BArg::Fixed(v) => v,
        BArg::Auto => choose_b(&formula, &SolverParams::probe_defaults(), args.seed),
    };
    let params = SolverParams::<f64> {
        b: b_used,
        t_max: args.tmax,
        abs_tol: args.abs_tol,
        rel_tol: args.rel_tol,
        ..SolverParams::default()
    };
    let cfg = PredictorConfig::<f64> {
        gamma_min: args.gamma_min,
        gamma_max: args.gamma_max,
        min_count: args.min_count,
        fit: FitOptions {
            scan_depth: args.e0_scan_depth,
            ..FitOptions::default()
        },
        semantics: args.level_semantics.into(),
        fit_level_min: args.fit_e_min,
        fit_level_max: args.fit_e_max,
        ..PredictorConfig::default()
    };

    let outcome = solve(&formula, &params, &cfg, args.seed, args.threads);

    if let Some(path) = &args.assignment_out {
        if let Some(best) = outcome.best_assignment() {
            let mut w = BufWriter::new(File::create(path)?);
            best.write_text(&mut w)?;
        }
    }
    if let Some(path) = &args.pet_csv {
        let w = BufWriter::new(File::create(path)?);
        outcome
            .table
            .write_survival_csv(w, 500, args.level_semantics.into())?;
    }
    if let Some(path) = &args.kappa_csv {
        let points = escape_rates_sem(&outcome.table, args.min_count, args.level_semantics.into());
        write_escape_csv(&points, BufWriter::new(File::create(path)?))?;
    }
    if let Some(path) = &args.trace_csv {
        write_trace_csv(&formula, &params, args.seed, path)?;
    }

    let report = outcome.report();
    let file = SolveResultFile {
        command: "solve",
        config: SolveConfigEcho {
            cnf: args.cnf.display().to_string(),
            b_requested: args.b.to_string(),
            b_used,
            tmax: args.tmax,
            gamma_min: args.gamma_min,
            gamma_max: args.gamma_max,
            seed: args.seed,
            threads: args.threads,
            level_semantics: args.level_semantics,
            e0_scan_depth: args.e0_scan_depth,
            min_count: args.min_count,
            fit_e_min: args.fit_e_min,
            fit_e_max: args.fit_e_max,
            abs_tol: args.abs_tol,
            rel_tol: args.rel_tol,
            permissive: args.permissive,
        },
        report: &report,
        table: outcome.table.summary(),
        runtime_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&file, args.out.as_deref())?;

    Ok(match outcome.ledger.status {
        LedgerStatus::Decided(_) => 0,
        _ => {
            eprintln!("maximum number of trajectories reached; increase --gamma-max");
            2
        }
    })
}

fn write_trace_csv(
    formula: &Formula,
    params: &SolverParams<f64>,
    seed: u64,
    path: &Path,
) -> Result<()> {
    let s0 = analog_maxsat::ensemble::trajectory_start(formula, seed, 0);
    let rows = match integrate_traced(formula, params, s0) {
        Ok((_, rows)) => rows,
        Err(fail) => bail!("trace trajectory failed: {fail}"),
    };
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,E,V,radius")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.t, r.energy, r.potential, r.radius)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RamseyPredictionJson {
    gamma: u64,
    e_bar: Option<i64>,
    #[serde(rename = "E0")]
    e0: Option<f64>,
    c: Option<f64>,
    beta: Option<f64>,
    chi2: Option<f64>,
    #[serde(rename = "E_pred")]
    e_pred: Option<i64>,
    predicted_satisfiable: Option<bool>,
    fit_points: Vec<FitPointJson>,
    fit_error: Option<String>,
}

#[derive(Serialize)]
struct RamseyConfigEcho {
    m: usize,
    n: usize,
    phase1_gamma: u64,
    phase2_budget: u64,
    seed_slack: i64,
    b_requested: String,
    b_phase1_requested: String,
    b_phase1_used: f64,
    b_phase2_used: f64,
    tmax: f64,
    corner_epsilon: f64,
    seed: u64,
    threads: usize,
    predict_gamma: u64,
    predict_tmax: f64,
    min_count: u64,
    e0_scan_depth: f64,
}

#[derive(Serialize)]
struct RamseyResultFile {
    command: &'static str,
    config: RamseyConfigEcho,
    m: usize,
    n: usize,
    best_energy: i64,
    mono_cliques: Vec<Vec<usize>>,
    phase1_seeds_kept: usize,
    phase1_best_energy: Option<i64>,
    phase1_pool_empty: bool,
    coloring: Vec<String>,
    prediction: Option<RamseyPredictionJson>,
    runtime_seconds: f64,
}

fn cmd_ramsey(args: RamseyArgs) -> Result<u8> {
    let started = Instant::now();
    if args.m < 3 || args.m > args.n {
        bail!("invalid orders: need 3 <= m <= n, got m = {}, n = {}", args.m, args.n);
    }

    let mut cfg = TwoPhaseConfig::<f64>::new(args.m, args.n);
    cfg.phase1_gamma = args.phase1_gamma;
    cfg.phase2_budget = args.phase2_budget;
    cfg.master_seed = args.seed;
    cfg.params = cfg.params.with_t_max(args.tmax);
    cfg.b_phase1 = match args.b_phase1 {
        BArg::Auto => None,
        BArg::Fixed(v) => Some(v),
    };
    cfg.b_phase2 = match args.b {
        BArg::Auto => None,
        BArg::Fixed(v) => Some(v),
    };
    cfg.seed_slack = args.seed_slack;
    cfg.corner_epsilon = args.corner_epsilon;
    cfg.workers = args.threads;

    let result = two_phase_search(&cfg)?;

    if let Some(path) = &args.coloring_out {
        let mut w = BufWriter::new(File::create(path)?);
        result.best_coloring.write_text(&mut w)?;
    }

    let predict_tmax = args.predict_tmax.unwrap_or(args.tmax);
    let prediction = (args.predict_gamma > 0).then(|| {
        let (full, _) = encode(args.m, args.n).expect("orders validated above");
        let params = SolverParams::<f64> {
            b: result.b_phase2,
            t_max: predict_tmax,
            ..SolverParams::default()
        };
        let table =
            run_ensemble_with_workers(&full, &params, args.predict_gamma, args.seed, args.threads);
        let points = escape_rates_sem(&table, args.min_count, LevelSemantics::Le);
        let e_bar = table.best_energy();
        let fit = fit_power_law(
            &points,
            e_bar.unwrap_or(0),
            &FitOptions {
                scan_depth: args.e0_scan_depth,
                ..FitOptions::default()
            },
        );
        match fit {
            Ok(fit) => {
                let pred = predict_min(&fit);
                RamseyPredictionJson {
                    gamma: table.gamma(),
                    e_bar,
                    e0: Some(fit.e0),
                    c: Some(fit.c),
                    beta: Some(fit.beta),
                    chi2: Some(fit.chi2),
                    e_pred: Some(pred.energy),
                    predicted_satisfiable: Some(pred.satisfiable),
                    fit_points: fit
                        .points_used
                        .iter()
                        .map(|p| FitPointJson {
                            e: p.energy,
                            kappa: p.kappa,
                            n: p.sample_count,
                        })
                        .collect(),
                    fit_error: None,
                }
            }
            Err(e) => RamseyPredictionJson {
                gamma: table.gamma(),
                e_bar,
                e0: None,
                c: None,
                beta: None,
                chi2: None,
                e_pred: None,
                predicted_satisfiable: None,
                fit_points: Vec::new(),
                fit_error: Some(e.to_string()),
            },
        }
    });

    let mut coloring_rows = Vec::with_capacity(args.n);
    {
        let mut buf = Vec::new();
        result.best_coloring.write_text(&mut buf)?;
        for line in String::from_utf8(buf)?.lines() {
            coloring_rows.push(line.to_string());
        }
    }

    let file = RamseyResultFile {
        command: "ramsey",
        config: RamseyConfigEcho {
            m: args.m,
            n: args.n,
            phase1_gamma: args.phase1_gamma,
            phase2_budget: args.phase2_budget,
            seed_slack: args.seed_slack,
            b_requested: args.b.to_string(),
            b_phase1_requested: args.b_phase1.to_string(),
            b_phase1_used: result.b_phase1,
            b_phase2_used: result.b_phase2,
            tmax: args.tmax,
            corner_epsilon: args.corner_epsilon,
            seed: args.seed,
            threads: args.threads,
            predict_gamma: args.predict_gamma,
            predict_tmax,
            min_count: args.min_count,
            e0_scan_depth: args.e0_scan_depth,
        },
        m: args.m,
        n: args.n,
        best_energy: result.best_energy,
        mono_cliques: result.mono_cliques,
        phase1_seeds_kept: result.phase1_seeds_kept,
        phase1_best_energy: result.phase1_best_energy,
        phase1_pool_empty: result.phase1_pool_empty,
        coloring: coloring_rows,
        prediction,
        runtime_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&file, args.out.as_deref())?;
    debug_assert_eq!(
        count_mono_cliques(&result.best_coloring, args.m) as i64,
        result.best_energy
    );
    Ok(0)
}

fn cmd_oracle(args: OracleArgs) -> Result<u8> {
    let formula = load_formula(&args.cnf, args.permissive)?;
    let (e_min, witness) = exhaustive_min_energy(&formula, args.var_limit)?;
    let stdout = io::stdout();
    let mut w = stdout.lock();
    writeln!(w, "E_min {e_min}")?;
    witness.write_text(&mut w)?;
    Ok(0)
}

fn cmd_encode(args: EncodeArgs) -> Result<u8> {
    let formula = if args.circulant {
        encode_circulant(args.m, args.n)?.0
    } else {
        encode(args.m, args.n)?.0
    };
    match &args.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            write_dimacs(&formula, &mut w)?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            write_dimacs(&formula, &mut w)?;
        }
    }
    Ok(0)
}
