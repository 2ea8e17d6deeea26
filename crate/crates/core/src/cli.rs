//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage, 2 data or parse failure, 3 numerical
//! failure (no positive MLE, non-convergence, unstable experiment).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;
use serde_json::json;

use crate::asymptotics::{
    check_integral_relation, curves_from_replications, jamming_density, limit_information, mle_normality_report,
    random_minor_checks, run_replications, score_clt_report, AsymptoticsError, ExperimentConfig, DEFAULT_NODES,
};
use crate::coverage::DEFAULT_RESOLUTION_FACTOR;
use crate::estimator::{confidence_intervals, fit_mle, EstimatorError, Existence, FitOptions};
use crate::geometry::Domain;
use crate::io::{
    self, read_sequence, write_report, write_sequence, CurvesReport, EstimateReport, IoError,
    ReplaySummary,
};
use crate::params::CsaParams;
use crate::render::{render_svg, RenderOptions};
use crate::simulator::{simulate_with, PointSequence, SimulationOptions, Stop, GENERATOR};
use crate::statistics::{estimate_order, replay, Trajectory};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser, Serialize)]
#[command(name = "csa", version, about = "Cooperative sequential adsorption: simulation and likelihood inference")]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "CSA_OUT_DIR", default_value = "csa-out")]
    pub out_dir: PathBuf,
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Simulate a sequence and write it as a sequence file.
    Simulate(SimulateArgs),
    /// Replay a sequence file into t and Gamma statistics.
    Replay(ReplayArgs),
    /// Fit the weights by maximum likelihood with normal intervals.
    Estimate(EstimateArgs),
    /// Monte Carlo checks of the large-volume limits.
    Experiment(ExperimentArgs),
    /// Draw a sequence file as an SVG scatter plot.
    Render(RenderArgs),
}

#[derive(Debug, Args, Serialize, Clone)]
pub struct ModelArgs {
    /// Interaction radius.
    #[arg(long = "R", value_name = "R")]
    pub radius: f64,
    /// Weights beta_1..beta_N (beta_0 = 1 is implied). Omit for the hard-core model.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub beta: Vec<f64>,
    /// Dimension of the domain.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Grid edge for area statistics [default: R/50].
    #[arg(long)]
    pub resolution: Option<f64>,
}

impl ModelArgs {
    fn params(&self, scale: f64) -> Result<CsaParams, CliError> {
        let domain = Domain::new(self.dim, scale).map_err(CliError::usage)?;
        CsaParams::new(self.radius, self.beta.clone(), domain).map_err(CliError::usage)
    }

    fn cell_edge(&self) -> f64 {
        self.resolution.unwrap_or(self.radius / DEFAULT_RESOLUTION_FACTOR)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Domain volume.
    #[arg(long, default_value_t = 1.0)]
    pub m: f64,
    /// Number of points to place.
    #[arg(long = "l", value_name = "L", conflicts_with = "until_jamming", required_unless_present = "until_jamming")]
    pub count: Option<usize>,
    /// Run until no admissible area is left.
    #[arg(long)]
    pub until_jamming: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Also write an SVG scatter plot.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct ReplayArgs {
    /// Sequence file.
    pub input: PathBuf,
    /// Model order [default: from the file, else the largest insertion count].
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub resolution: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub replay: ReplayArgs,
    /// Confidence level of the intervals.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Score normality at the true weights.
    Clt,
    /// MLE normality and interval coverage.
    Mle,
    /// Limit curves and the integral relation.
    Curves,
    /// Determinant identities of the information integrand.
    Minors,
}

#[derive(Debug, Args, Serialize)]
pub struct ExperimentArgs {
    pub kind: ExperimentKind,
    /// Interaction radius (not used by `minors`).
    #[arg(long = "R", value_name = "R", default_value_t = 0.02)]
    pub radius: f64,
    #[arg(long, value_delimiter = ',', num_args = 0.., default_values_t = [300.0, 500.0])]
    pub beta: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long)]
    pub resolution: Option<f64>,
    /// Domain volumes to run, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [4.0])]
    pub m: Vec<f64>,
    /// Target density; when absent, a fraction of the pilot jamming density.
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub mu_fraction: f64,
    /// Until-jamming pilot runs at volume 1.
    #[arg(long, default_value_t = 5)]
    pub pilot_runs: usize,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads for replications.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Lambda grid nodes.
    #[arg(long, default_value_t = DEFAULT_NODES)]
    pub nodes: usize,
    /// Random cases for `minors`.
    #[arg(long, default_value_t = 100)]
    pub cases: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct RenderArgs {
    pub input: PathBuf,
    /// Output path [default: <out-dir>/<input stem>.svg].
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Drawing width in pixels.
    #[arg(long, default_value_t = 800.0)]
    pub size: f64,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_USAGE,
            message: e.to_string(),
        }
    }

    fn data(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_DATA,
            message: e.to_string(),
        }
    }

    fn numerical(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_NUMERICAL,
            message: e.to_string(),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        Self::data(e)
    }
}

impl From<AsymptoticsError> for CliError {
    fn from(e: AsymptoticsError) -> Self {
        match e {
            AsymptoticsError::InvalidInput(_) | AsymptoticsError::Params(_) => Self::usage(e),
            AsymptoticsError::UnstableRegime { .. } | AsymptoticsError::Estimator(_) => Self::numerical(e),
            _ => Self::data(e),
        }
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the exit code. Diagnostics go to stderr as a single line.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

struct Output<'a> {
    dir: &'a Path,
    cli: &'a Cli,
    resolved: serde_json::Value,
    files: Vec<String>,
}

impl<'a> Output<'a> {
    fn new(cli: &'a Cli) -> Result<Self, CliError> {
        fs::create_dir_all(&cli.out_dir).map_err(|e| CliError::data(format!("{}: {e}", cli.out_dir.display())))?;
        Ok(Self {
            dir: &cli.out_dir,
            cli,
            resolved: serde_json::Value::Null,
            files: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn manifest(&self) -> Result<(), CliError> {
        let doc = json!({
            "tool": "csa",
            "version": env!("CARGO_PKG_VERSION"),
            "generator": GENERATOR,
            "invocation": self.cli,
            "resolved": self.resolved,
            "outputs": self.files,
        });
        let path = self.dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&doc).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(cli, a),
        Command::Replay(a) => cmd_replay(cli, a),
        Command::Estimate(a) => cmd_estimate(cli, a),
        Command::Experiment(a) => cmd_experiment(cli, a),
        Command::Render(a) => cmd_render(cli, a),
    }
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> Result<(), CliError> {
    let params = a.model.params(a.m)?;
    let stop = match a.count {
        Some(n) => Stop::Count(n),
        None => Stop::UntilJamming,
    };
    let opts = SimulationOptions {
        resolution: a.model.resolution,
        ..SimulationOptions::default()
    };
    let mut out = Output::new(cli)?;
    let seq_path = out.path("sequence.csv");
    let svg_path = a.svg.then(|| out.path("sequence.svg"));
    out.resolved = json!({ "params": params, "stop": stop, "seed": a.seed, "cell_edge": a.model.cell_edge() });
    out.manifest()?;

    let seq = simulate_with(&params, stop, a.seed, &opts).map_err(CliError::data)?;
    if seq.shortfall() {
        warn!("jammed after {} of {} points", seq.len(), a.count.unwrap_or(0));
    }
    write_sequence(&seq_path, &seq)?;
    if let Some(p) = svg_path {
        write_text(&p, &render_svg(&seq, &RenderOptions::default()))?;
    }
    println!(
        "{} points{} -> {}",
        seq.len(),
        if seq.jammed { " (jammed)" } else { "" },
        seq_path.display()
    );
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn load_trajectory(a: &ReplayArgs) -> Result<(PointSequence, Trajectory), CliError> {
    let seq = read_sequence(&a.input)?;
    let order = match a.order {
        Some(n) => n,
        None => match &seq.beta {
            Some(b) => b.order(),
            None => match &seq.insertion_counts {
                Some(c) => c.iter().copied().max().unwrap_or(0) as usize,
                None => estimate_order(&seq.points, seq.radius).map_err(CliError::data)?,
            },
        },
    };
    let h = a.resolution.unwrap_or(seq.radius / DEFAULT_RESOLUTION_FACTOR);
    info!("replaying {} points at order {order}, grid edge {h}", seq.len());
    let traj = replay(&seq, order, h).map_err(CliError::data)?;
    Ok((seq, traj))
}

fn cmd_replay(cli: &Cli, a: &ReplayArgs) -> Result<(), CliError> {
    let mut out = Output::new(cli)?;
    let path = out.path("replay.json");
    out.manifest()?;
    let (_, traj) = load_trajectory(a)?;
    let summary = ReplaySummary::from_trajectory(&traj);
    write_report(&path, &summary)?;
    println!("t = {:?}", summary.t);
    Ok(())
}

fn subscript(n: usize) -> String {
    n.to_string()
        .chars()
        .map(|c| char::from_u32(0x2080 + c.to_digit(10).unwrap_or(0)).unwrap_or(c))
        .collect()
}

fn cmd_estimate(cli: &Cli, a: &EstimateArgs) -> Result<(), CliError> {
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(CliError::usage(format!("level must lie in (0, 1), got {}", a.level)));
    }
    let mut out = Output::new(cli)?;
    let path = out.path("estimate.json");
    out.manifest()?;
    let (_, traj) = load_trajectory(&a.replay)?;
    let opts = FitOptions {
        tol: a.tol,
        max_iter: a.max_iter,
        init: None,
    };
    let fit = match fit_mle(&traj, &opts) {
        Ok(f) => f,
        Err(EstimatorError::NonConvergence { last }) => {
            let report = EstimateReport {
                fit: *last,
                intervals: None,
                t: traj.t().to_vec(),
            };
            write_report(&path, &report)?;
            return Err(CliError::numerical("Newton iteration did not converge"));
        }
        Err(e) => return Err(CliError::numerical(e)),
    };
    let intervals = match fit.existence {
        Existence::Interior if fit.converged => Some(confidence_intervals(&fit, a.level).map_err(CliError::numerical)?),
        _ => None,
    };
    let existence = fit.existence;
    let converged = fit.converged;
    let report = EstimateReport {
        fit,
        intervals,
        t: traj.t().to_vec(),
    };
    write_report(&path, &report)?;
    match existence {
        Existence::Interior if converged => {}
        Existence::Interior => return Err(CliError::numerical("information is not positive definite at the optimum")),
        Existence::BoundaryZero(j) | Existence::Unidentified(j) => {
            return Err(CliError::numerical(format!("no positive MLE for β{}", subscript(j))))
        }
        Existence::Divergent(j) => {
            return Err(CliError::numerical(format!(
                "no finite MLE for β{}: likelihood grows without bound",
                subscript(j)
            )))
        }
    }
    let ci = report.intervals.as_ref().expect("interior fit has intervals");
    for j in 0..ci.estimate.len() {
        println!(
            "beta_{} = {:.6} [{:.6}, {:.6}]",
            j + 1,
            ci.estimate[j],
            ci.lower[j],
            ci.upper[j]
        );
    }
    Ok(())
}

fn cmd_render(cli: &Cli, a: &RenderArgs) -> Result<(), CliError> {
    let mut out = Output::new(cli)?;
    let path = match &a.output {
        Some(p) => {
            out.files.push(p.display().to_string());
            p.clone()
        }
        None => {
            let stem = a.input.file_stem().and_then(|s| s.to_str()).unwrap_or("sequence");
            out.path(&format!("{stem}.svg"))
        }
    };
    out.manifest()?;
    let seq = read_sequence(&a.input)?;
    let opts = RenderOptions {
        size: a.size,
        ..RenderOptions::default()
    };
    write_text(&path, &render_svg(&seq, &opts))?;
    println!("{}", path.display());
    Ok(())
}

fn cmd_experiment(cli: &Cli, a: &ExperimentArgs) -> Result<(), CliError> {
    let mut out = Output::new(cli)?;
    if a.kind == ExperimentKind::Minors {
        let path = out.path("minors.json");
        out.manifest()?;
        let report = random_minor_checks(a.cases, a.seed)?;
        write_report(&path, &report)?;
        println!(
            "max relative error {:.3e}, cholesky failures {}",
            report.max_relative_error, report.cholesky_failures
        );
        return Ok(());
    }
    let model = ModelArgs {
        radius: a.radius,
        beta: a.beta.clone(),
        dim: a.dim,
        resolution: a.resolution,
    };
    if a.m.is_empty() {
        return Err(CliError::usage("need at least one volume"));
    }
    let base = model.params(1.0)?;
    let stem = match a.kind {
        ExperimentKind::Clt => "clt",
        ExperimentKind::Mle => "mle",
        _ => "curves",
    };
    let jam_path = a.mu.is_none().then(|| out.path("jamming.json"));
    let paths: Vec<PathBuf> = a.m.iter().map(|m| out.path(&format!("{stem}_m{m}.json"))).collect();
    out.resolved = json!({ "params": base, "mu": a.mu, "mu_fraction": a.mu_fraction });
    out.manifest()?;

    let mu = match (a.mu, jam_path) {
        (Some(mu), _) => mu,
        (None, Some(p)) => {
            let opts = SimulationOptions {
                resolution: a.resolution,
                ..SimulationOptions::default()
            };
            let est = jamming_density(&base, a.pilot_runs, a.seed ^ 0xA5A5_A5A5, &opts)?;
            write_report(&p, &est)?;
            info!("pilot jamming density {:.1}", est.density);
            a.mu_fraction * est.density
        }
        (None, None) => unreachable!(),
    };
    out.resolved["mu"] = json!(mu);
    out.manifest()?;

    for (m, path) in a.m.iter().zip(&paths) {
        let mut cfg = ExperimentConfig::new(model.params(*m)?, mu, a.reps, a.seed);
        cfg.resolution = a.resolution;
        cfg.nodes = a.nodes;
        cfg.jobs = a.jobs;
        match a.kind {
            ExperimentKind::Clt => {
                let reps = run_replications(&cfg, false)?;
                let r = score_clt_report(&cfg, &reps);
                write_report(path, &r)?;
                println!("m = {m}: covariance deviation {:.3}", r.max_relative_deviation());
            }
            ExperimentKind::Mle => {
                let reps = run_replications(&cfg, true)?;
                match mle_normality_report(&cfg, &reps) {
                    Ok(r) => {
                        write_report(path, &r)?;
                        let cov = r.mle.as_ref().map(|s| s.coverage.clone()).unwrap_or_default();
                        println!("m = {m}: coverage {cov:?}, covariance deviation {:.3}", r.max_relative_deviation());
                    }
                    Err(AsymptoticsError::UnstableRegime { failed, reps, report }) => {
                        write_report(path, report.as_ref())?;
                        return Err(CliError::numerical(format!("{failed} of {reps} fits failed to converge")));
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            _ => {
                let reps = run_replications(&cfg, false)?;
                let curves = curves_from_replications(&cfg, &reps);
                let residuals =
                    check_integral_relation(&curves, &cfg.params.beta).map_err(CliError::from)?;
                let info = limit_information(&curves, &cfg.params.beta, mu)?;
                let n = info.nrows();
                let report = CurvesReport {
                    limit_information: (0..n).map(|i| (0..n).map(|j| info[(i, j)]).collect()).collect(),
                    residuals,
                    curves,
                };
                write_report(path, &report)?;
                io::write_curves_csv(&path.with_extension("csv"), &report.curves)?;
                for r in &report.residuals {
                    println!("m = {m}: j = {} relative residual {:.4}", r.j, r.relative());
                }
            }
        }
    }
    Ok(())
}
