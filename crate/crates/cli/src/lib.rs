//! Command-line front end: configuration loading, orchestration and
//! atomic CSV output for the tracking experiments.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;
use tvadmm_core::analysis::report;
use tvadmm_core::engine::{trace_header, trace_rows};
use tvadmm_core::{estimate_decay, theorem1_rhs, Experiment, SimConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "tvadmm", version, about = "Decentralized ADMM tracking experiments")]
pub struct Cli {
    /// Flat `key = value` configuration file; defaults apply when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Overrides the configured output directory.
    #[arg(long, global = true, value_name = "PATH")]
    pub out_dir: Option<PathBuf>,

    /// Worker threads for the Monte Carlo tracks.
    #[arg(long, global = true, value_name = "N", env = "TVADMM_THREADS")]
    pub threads: Option<usize>,

    /// Also write the per-round engine trace of the first track (`simulate`).
    #[arg(long, global = true)]
    pub trace: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo tracking run: curves.csv and moments.csv.
    Simulate,
    /// Moment estimates, decay fit and the mean-square bound: bound.csv.
    Bound,
    /// Contraction-product decay fit: decay.csv.
    Decay,
    /// Prints the network size and Laplacian constants.
    GraphInfo,
    /// Checks the one-step tracking inequality at every step of every track.
    VerifyLemma1 {
        /// Also write the per-step quantities to contraction.csv.
        #[arg(long)]
        contraction_csv: bool,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] tvadmm_core::Error),
    #[error("{0}")]
    Invariant(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Core(tvadmm_core::Error::Track { .. }) => EXIT_NUMERICAL,
            CliError::Core(_) => EXIT_USAGE,
            CliError::Invariant(_) => EXIT_INVARIANT,
            CliError::Output { .. } => EXIT_USAGE,
        }
    }
}

/// Loads the configuration and applies the command-line overrides.
pub fn load_config(cli: &Cli) -> Result<SimConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => SimConfig::from_path(path).map_err(|e| match e {
            tvadmm_core::Error::Io(io) => CliError::Usage(format!("cannot read {}: {io}", path.display())),
            other => CliError::Core(other),
        })?,
        None => SimConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let wrap = |source| CliError::Output {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(wrap)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(wrap)?;
    std::fs::rename(&tmp, path).map_err(wrap)
}

fn emit(out: &mut dyn Write, line: std::fmt::Arguments<'_>) {
    // A closed stdout must not turn a finished run into a failure.
    let _ = out.write_fmt(line);
    let _ = out.write_all(b"\n");
}

/// Runs the parsed command, printing a short summary to `out`.
pub fn run(cli: &Cli, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
            pool.install(|| dispatch(cli, &cfg, out))
        }
        None => dispatch(cli, &cfg, out),
    }
}

fn dispatch(cli: &Cli, cfg: &SimConfig, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate => cmd_simulate(cfg, cli.trace, out),
        Command::Bound => cmd_bound(cfg, out),
        Command::Decay => cmd_decay(cfg, out),
        Command::GraphInfo => cmd_graph_info(cfg, out),
        Command::VerifyLemma1 { contraction_csv } => cmd_verify_lemma1(cfg, *contraction_csv, out),
    }
}

pub fn cmd_simulate(cfg: &SimConfig, trace: bool, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let exp = Experiment::new(cfg)?;
    let mc = exp.monte_carlo()?;
    let curves = cfg.out_dir.join("curves.csv");
    let moments = cfg.out_dir.join("moments.csv");
    write_atomic(&curves, &report::curves_csv(&mc.curves))?;
    write_atomic(&moments, &report::moments_csv(&mc.moments))?;
    if trace {
        let p = cfg.dim_p;
        let mut text = trace_header(p);
        exp.run_track_visiting(exp.track_seed(0), |s| text.push_str(&trace_rows(s, p)))?;
        write_atomic(&cfg.out_dir.join("trace.csv"), &text)?;
    }
    let m = &mc.moments;
    emit(out, format_args!("tracks = {}, steps = {}", mc.records.len(), mc.curves.len()));
    emit(out, format_args!("B_x4_hat = {:e} (sem {:e})", m.b_x4_hat, m.b_x4_sem));
    emit(out, format_args!("B_lambda4_hat = {:e} (sem {:e})", m.b_lambda4_hat, m.b_lambda4_sem));
    emit(out, format_args!("wrote {}", cfg.out_dir.display()));
    Ok(())
}

pub fn cmd_bound(cfg: &SimConfig, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let exp = Experiment::new(cfg)?;
    let mc = exp.monte_carlo()?;
    let fit = estimate_decay(cfg, cfg.decay_window.min(cfg.track_len))?;
    let b = theorem1_rhs(&mc.moments, &fit, &exp.bound_params(), &mc.curves.u_g_means())?;
    write_atomic(&cfg.out_dir.join("bound.csv"), &report::bound_csv(&b))?;
    emit(out, format_args!("B1 = {:e}, B2 = {:e}", b.b1, b.b2));
    emit(out, format_args!("C_hat = {}, gamma_hat = {}", b.c_hat, b.gamma_hat));
    emit(out, format_args!("bound = {:e}, observed plateau = {:e}", b.theorem1_rhs, b.observed_plateau));
    emit(out, format_args!("bound_satisfied = {}", b.bound_satisfied));
    Ok(())
}

pub fn cmd_decay(cfg: &SimConfig, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let fit = estimate_decay(cfg, cfg.decay_window.min(cfg.track_len))?;
    write_atomic(&cfg.out_dir.join("decay.csv"), &report::decay_csv(&fit))?;
    emit(out, format_args!("C_hat = {}", fit.c_hat));
    emit(out, format_args!("gamma_hat = {}", fit.gamma_hat));
    emit(out, format_args!("r_squared = {}", fit.r_squared));
    Ok(())
}

pub fn cmd_graph_info(cfg: &SimConfig, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let exp = Experiment::new(cfg)?;
    let s = exp.spectrum();
    emit(out, format_args!("n = {}", exp.graph().n_nodes()));
    emit(out, format_args!("m_arcs = {}", exp.arcs().m_arcs()));
    emit(out, format_args!("gamma_L = {}", s.gamma_l));
    emit(out, format_args!("Gamma_L = {}", s.big_gamma_l));
    emit(out, format_args!("convention = {}", s.convention));
    Ok(())
}

pub fn cmd_verify_lemma1(cfg: &SimConfig, contraction_csv: bool, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let exp = Experiment::new(cfg)?;
    let records = exp.run_tracks(cfg.num_tracks)?;
    if contraction_csv {
        write_atomic(&cfg.out_dir.join("contraction.csv"), &report::contraction_csv(&records))?;
    }
    let steps: usize = records.iter().map(|r| r.len()).sum();
    let violations: usize = records.iter().map(|r| r.lemma1_violations()).sum();
    let min_slack = records
        .iter()
        .flat_map(|r| r.lemma1.iter())
        .map(|c| c.slack / (1.0 + c.rhs))
        .fold(f64::INFINITY, f64::min);
    emit(out, format_args!("checked {steps} steps over {} tracks", records.len()));
    emit(out, format_args!("violations = {violations}"));
    emit(out, format_args!("min relative slack = {min_slack:e}"));
    if violations > 0 {
        return Err(CliError::Invariant(format!("{violations} of {steps} steps violate the tracking inequality")));
    }
    Ok(())
}
