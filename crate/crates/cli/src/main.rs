//! `ivp`: interval prediction from the command line.
//!
//! Exit codes: 0 success, 1 certificate infeasible or not found, 2 bad
//! flags or unwritable output, 3 the stable predictor produced a
//! non-finite state (or another integration failure), 4 input file
//! missing, malformed or invalid, 5 the highway embedding could not be
//! built.

mod manifest;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use interval_predictor::highway::{
    inclusion_violations, monte_carlo_truth, predict_highway, HighwayError, HighwayPrediction,
    TruthConfig, TruthModel, TruthSample, VehicleState,
};
use interval_predictor::io::scenario::{
    load_certificate, load_model, parse_scenario, write_certificate, ScalarScenario, ScenarioFile,
};
use interval_predictor::io::IoError;
use interval_predictor::lmi::{check_certificate, search_certificate, SearchOutcome, DEFAULT_TOL};
use interval_predictor::predictor::{integrate, Predictor};
use interval_predictor::{IntervalTrajectory, Method, SignalBounds};

use manifest::RunManifest;
use output::{Outputs, TraceSet};

/// A run is called diverging when the tube width more than triples over
/// the second half of the horizon, or the run was truncated.
const DIVERGENCE_RATIO: f64 = 3.0;
const LPV_SLACK: f64 = 1e-6;
const NONLINEAR_SLACK: f64 = 1e-3;

mod exit {
    pub const INFEASIBLE: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const NON_FINITE: u8 = 3;
    pub const INPUT: u8 = 4;
    pub const EMBEDDING: u8 = 5;
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl std::fmt::Display) -> Self {
        Self {
            code,
            message: message.to_string(),
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        let code = match e {
            IoError::Write { .. } => exit::USAGE,
            _ => exit::INPUT,
        };
        Failure::new(code, e)
    }
}

type CmdResult = Result<u8, Failure>;

#[derive(Parser)]
#[command(name = "ivp", version, about = "Interval prediction for LPV systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Predict the scalar example `x' = -theta x + d`.
    ScalarDemo(ScalarArgs),
    /// Predict vehicle tubes for a highway scenario.
    Highway(HighwayArgs),
    /// Check or search stability certificates.
    #[command(subcommand)]
    Cert(CertCommand),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Naive,
    Stable,
    Both,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Naive => vec![Method::Naive],
            MethodArg::Stable => vec![Method::Stable],
            MethodArg::Both => vec![Method::Naive, Method::Stable],
        }
    }

    fn name(self) -> &'static str {
        match self {
            MethodArg::Naive => "naive",
            MethodArg::Stable => "stable",
            MethodArg::Both => "both",
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Svg,
    All,
}

impl FormatArg {
    fn name(self) -> &'static str {
        match self {
            FormatArg::Csv => "csv",
            FormatArg::Json => "json",
            FormatArg::Svg => "svg",
            FormatArg::All => "all",
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TruthArg {
    Linearized,
    Nonlinear,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() && x > 0.0 => Ok(x),
        _ => Err(format!("expected a positive number, got {s}")),
    }
}

#[derive(Args)]
struct CommonArgs {
    #[arg(long, value_enum, default_value = "stable")]
    method: MethodArg,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    format: FormatArg,
}

#[derive(Args)]
struct ScalarArgs {
    /// Scalar scenario file; the built-in example is used when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value = "10", value_parser = positive, allow_hyphen_values = true)]
    horizon: f64,
    #[arg(long, default_value = "0.01", value_parser = positive, allow_hyphen_values = true)]
    dt: f64,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct HighwayArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value = "2", value_parser = positive, allow_hyphen_values = true)]
    horizon: f64,
    #[arg(long, default_value = "0.02", value_parser = positive, allow_hyphen_values = true)]
    dt: f64,
    /// Number of Monte-Carlo truth samples.
    #[arg(long, default_value_t = 0)]
    mc: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Period at which truth samples redraw their gains.
    #[arg(long, default_value = "0.2", value_parser = positive, allow_hyphen_values = true)]
    resample: f64,
    #[arg(long, value_enum, default_value = "linearized")]
    truth: TruthArg,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Subcommand)]
enum CertCommand {
    /// Evaluate a certificate against a model.
    Check {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        cert: PathBuf,
    },
    /// Search for a certificate and write it on success.
    Find {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4000)]
        max_iters: usize,
        #[arg(long, default_value = "certificate.json")]
        out: PathBuf,
    },
}

fn width_growth(traj: &IntervalTrajectory) -> (f64, f64) {
    let w = |k: usize| traj.states[k].max_width();
    let last = traj.states.len() - 1;
    let initial = w(0);
    let ratio_total = if initial > 0.0 {
        w(last) / initial
    } else {
        f64::INFINITY
    };
    let mid = w(last / 2);
    let ratio_half = if mid > 0.0 { w(last) / mid } else { 1.0 };
    (ratio_total, ratio_half)
}

fn is_diverging(traj: &IntervalTrajectory) -> bool {
    traj.truncated_at.is_some() || width_growth(traj).1 > DIVERGENCE_RATIO
}

fn read_input(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::new(exit::INPUT, format!("cannot read {}: {e}", path.display())))
}

fn scalar_demo(args: &ScalarArgs) -> CmdResult {
    let (scenario, input_text) = match &args.scenario {
        Some(path) => {
            let text = read_input(path)?;
            match parse_scenario(&text)? {
                ScenarioFile::Scalar(s) => (s, text),
                ScenarioFile::Highway(_) => {
                    return Err(Failure::new(
                        exit::INPUT,
                        "expected a scalar scenario, found a highway scenario",
                    ))
                }
            }
        }
        None => {
            let s = ScalarScenario::demo();
            let text = interval_predictor::io::scenario::scenario_to_json(&ScenarioFile::Scalar(
                s.clone(),
            ));
            (s, text)
        }
    };
    let model = scenario.model();
    let d = SignalBounds::constant(scenario.input.clone());

    let mut manifest = RunManifest::new("scalar-demo", input_text.as_bytes());
    manifest.flag(
        "scenario",
        args.scenario.as_ref().map(|p| p.display().to_string()),
    );
    manifest.flag("method", args.common.method.name());
    manifest.flag("horizon", args.horizon);
    manifest.flag("dt", args.dt);
    manifest.flag("format", args.common.format.name());

    let mut sets = Vec::new();
    let mut code = 0;
    for method in args.common.method.methods() {
        let predictor = Predictor::for_model(method, &model);
        let traj = integrate(&predictor, &scenario.initial, &d, args.horizon, args.dt)
            .map_err(|e| Failure::new(exit::NON_FINITE, e))?;
        let last = traj.last();
        let (total, half) = width_growth(&traj);
        println!(
            "{}: t = {:.4}, x in [{:.6}, {:.6}], width ratio vs t=0 {:.4e}, over second half {:.4}",
            method.as_str(),
            traj.times.last().expect("nonempty"),
            last.lower()[0],
            last.upper()[0],
            total,
            half
        );
        if let Some(t) = traj.truncated_at {
            println!("{}: state became non-finite at t = {t}", method.as_str());
        }
        if is_diverging(&traj) {
            eprintln!("warning: the {} tube is diverging", method.as_str());
            if method == Method::Stable && traj.truncated_at.is_some() {
                code = exit::NON_FINITE;
            }
        }
        sets.push(TraceSet::single(method, "scalar", &["x"], traj));
    }

    let outputs = Outputs::new(&args.common.out, args.common.format)?;
    outputs.write_all(&sets, &[], &mut manifest)?;
    outputs.write_manifest(&manifest)?;
    if code != 0 {
        return Err(Failure::new(
            code,
            "the stable predictor produced a non-finite state",
        ));
    }
    Ok(0)
}

fn highway_failure(e: HighwayError) -> Failure {
    match e {
        HighwayError::InvalidScenario(_) => Failure::new(exit::INPUT, e),
        HighwayError::Predict(_) => Failure::new(exit::NON_FINITE, e),
        _ => Failure::new(exit::EMBEDDING, e),
    }
}

fn highway(args: &HighwayArgs) -> CmdResult {
    let text = read_input(&args.scenario)?;
    let scenario = match parse_scenario(&text)? {
        ScenarioFile::Highway(h) => h,
        ScenarioFile::Scalar(_) => {
            return Err(Failure::new(
                exit::INPUT,
                "expected a highway scenario, found a scalar scenario",
            ))
        }
    };

    let mut manifest = RunManifest::new("highway", text.as_bytes());
    manifest.flag("scenario", args.scenario.display().to_string());
    manifest.flag("method", args.common.method.name());
    manifest.flag("horizon", args.horizon);
    manifest.flag("dt", args.dt);
    manifest.flag("mc", args.mc);
    manifest.flag("resample", args.resample);
    manifest.flag(
        "truth",
        match args.truth {
            TruthArg::Linearized => "linearized",
            TruthArg::Nonlinear => "nonlinear",
        },
    );
    manifest.flag("format", args.common.format.name());
    manifest.seed = Some(args.seed);

    let predictions: Vec<HighwayPrediction> = args
        .common
        .method
        .methods()
        .into_iter()
        .map(|m| predict_highway(&scenario, args.horizon, args.dt, m))
        .collect::<Result<_, _>>()
        .map_err(highway_failure)?;

    let truth: Vec<TruthSample> = if args.mc > 0 {
        let cfg = TruthConfig {
            samples: args.mc,
            resample_period: args.resample,
            seed: args.seed,
            horizon: args.horizon,
            dt: args.dt,
            model: match args.truth {
                TruthArg::Linearized => TruthModel::Linearized,
                TruthArg::Nonlinear => TruthModel::Nonlinear,
            },
        };
        monte_carlo_truth(&scenario, &cfg).map_err(highway_failure)?
    } else {
        Vec::new()
    };

    let mut code = 0;
    for p in &predictions {
        let name = p.method.as_str();
        let lon = &p.longitudinal;
        let last = lon.last();
        for (i, v) in p.vehicles.iter().enumerate() {
            let st = v.tube.last();
            let n = p.vehicles.len();
            println!(
                "{name}: {} at t = {:.3}: x width {:.4}, v width {:.4}, y width {:.4}, lanes {:?}{}",
                v.id,
                v.tube.times.last().expect("nonempty"),
                last.upper()[i] - last.lower()[i],
                last.upper()[n + i] - last.lower()[n + i],
                st.upper()[1] - st.lower()[1],
                v.lanes.iter().map(|l| l.lane).collect::<Vec<_>>(),
                if v.lateral_degraded {
                    " (constant-heading lateral tube)"
                } else {
                    ""
                }
            );
        }
        if let Some(t) = p.truncated_at {
            println!("{name}: state became non-finite at t = {t}");
        }
        if is_diverging(lon) || p.vehicles.iter().any(|v| is_diverging(&v.tube)) {
            eprintln!("warning: the {name} tube is diverging");
            if p.method == Method::Stable && p.truncated_at.is_some() {
                code = exit::NON_FINITE;
            }
        }
        if !truth.is_empty() {
            let report = match args.truth {
                TruthArg::Linearized => inclusion_violations(p, &truth, |_| LPV_SLACK),
                TruthArg::Nonlinear => inclusion_violations(p, &truth, |s: &[VehicleState]| {
                    let norm = s
                        .iter()
                        .flat_map(|v| v.to_array())
                        .map(|x| x * x)
                        .sum::<f64>()
                        .sqrt();
                    NONLINEAR_SLACK * (1.0 + norm)
                }),
            };
            println!(
                "{name}: {} of {} truth samples leave the tube (worst excess {:.3e})",
                report.violations,
                truth.len(),
                report.worst_excess
            );
        }
    }

    let sets: Vec<TraceSet> = predictions.iter().map(TraceSet::highway).collect();
    let outputs = Outputs::new(&args.common.out, args.common.format)?;
    outputs.write_all(&sets, &truth, &mut manifest)?;
    outputs.write_manifest(&manifest)?;
    if code != 0 {
        return Err(Failure::new(
            code,
            "the stable predictor produced a non-finite state",
        ));
    }
    Ok(0)
}

fn print_report(r: &interval_predictor::lmi::CertificateReport) {
    println!("positivity1_margin {}", r.positivity1_margin);
    println!("positivity2_margin {}", r.positivity2_margin);
    println!("gamma_margin {}", r.gamma_margin);
    println!("upsilon_max_eig {:e}", r.upsilon_max_eig);
    println!("feasible {}", r.feasible);
}

fn cert(cmd: &CertCommand) -> CmdResult {
    match cmd {
        CertCommand::Check { model, cert } => {
            let model = load_model(model)?;
            let cert = load_certificate(cert)?;
            if cert.len() != Some(2 * model.dim()) {
                return Err(Failure::new(
                    exit::INPUT,
                    format!(
                        "certificate diagonals must have length {} for this model",
                        2 * model.dim()
                    ),
                ));
            }
            let report = check_certificate(&model, &cert, DEFAULT_TOL);
            print_report(&report);
            Ok(if report.feasible { 0 } else { exit::INFEASIBLE })
        }
        CertCommand::Find {
            model,
            seed,
            max_iters,
            out,
        } => {
            let model = load_model(model)?;
            match search_certificate(&model, *max_iters, *seed) {
                SearchOutcome::Found(c) => {
                    print_report(&check_certificate(&model, &c, DEFAULT_TOL));
                    write_certificate(&c, out)?;
                    println!("certificate written to {}", out.display());
                    Ok(0)
                }
                SearchOutcome::Infeasible { best_penalty } => {
                    println!("infeasible: no certificate found (best penalty {best_penalty:e})");
                    Ok(exit::INFEASIBLE)
                }
            }
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("IVP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::new(
            exit::USAGE,
            format!("IVP_THREADS must be a positive integer, got {raw}"),
        )
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::new(exit::USAGE, e))
}

/// Usage line of the deepest subcommand named on the command line.
fn usage_for_args() -> clap::builder::StyledStr {
    let mut cmd = Cli::command();
    cmd.build();
    for arg in std::env::args().skip(1) {
        match cmd.find_subcommand(&arg) {
            Some(sub) => cmd = sub.clone(),
            None => break,
        }
    }
    cmd.render_usage()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::from(0);
            }
            if !e.to_string().contains("Usage:") {
                eprintln!("\n{}", usage_for_args());
            }
            return ExitCode::from(exit::USAGE);
        }
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::ScalarDemo(a) => scalar_demo(a),
        Command::Highway(a) => highway(a),
        Command::Cert(c) => cert(c),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
