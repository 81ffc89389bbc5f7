//! Command-line driver: simulate pulsation curves (`run`), sweep the
//! peak-time scaling law (`scan`), and run the verification battery
//! (`verify`).
//!
//! Exit codes: `0` success, `1` invalid parameters or I/O failure,
//! `2` verification criterion failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pulsar_core::acceptance;
use pulsar_core::graph::{binomial, WedgeGraph};
use pulsar_core::perturbation::lambda_series;
use pulsar_core::reduction::{reduced_curve, ClassDecomposition};
use pulsar_core::spectral::{predict, asymptotic_tau, PulsationPrediction};
use pulsar_core::walk::{self, ProbabilityCurve};

/// The full engine refuses composites with more symmetric arcs than this.
const FULL_ARC_CAP: u128 = 1_000_000;

#[derive(Parser)]
#[command(
    name = "pulsar",
    version,
    about = "Grover-walk pulsation on wedge composites"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one composite and emit its finding-probability curve.
    Run(RunArgs),
    /// Sweep n at fixed k and fit the peak-time scaling exponent.
    Scan(ScanArgs),
    /// Run the verification battery and report pass/fail per criterion.
    Verify(VerifyArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum GraphKind {
    /// Johnson graph J(n, k) with an m-leaf star at one vertex.
    JohnsonStar,
    /// n-dimensional hypercube with an m-leaf star at one vertex.
    HypercubeStar,
    /// Clique on n vertices sharing one vertex with a clique on n2.
    CompleteComplete,
}

impl GraphKind {
    fn name(self) -> &'static str {
        match self {
            GraphKind::JohnsonStar => "johnson-star",
            GraphKind::HypercubeStar => "hypercube-star",
            GraphKind::CompleteComplete => "complete-complete",
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Engine {
    /// Evolve the walk on the full arc space.
    Full,
    /// Evolve the exact (3k+2)-dimensional reduced walk.
    Reduced,
    /// Reduced curve side by side with the sin^2(theta t) envelope.
    Theory,
    /// Full and reduced runs with their maximum deviation.
    Compare,
}

impl Engine {
    fn name(self) -> &'static str {
        match self {
            Engine::Full => "full",
            Engine::Reduced => "reduced",
            Engine::Theory => "theory",
            Engine::Compare => "compare",
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Composite family to build.
    #[arg(long, value_enum, default_value_t = GraphKind::JohnsonStar)]
    graph: GraphKind,
    /// Ground-set size (johnson-star), dimension (hypercube-star), or
    /// base clique size (complete-complete).
    #[arg(long)]
    n: usize,
    /// Subset size of the Johnson base (johnson-star only).
    #[arg(long)]
    k: Option<usize>,
    /// Number of star leaves (johnson-star and hypercube-star).
    #[arg(long)]
    m: Option<usize>,
    /// Attached clique size (complete-complete only).
    #[arg(long)]
    n2: Option<usize>,
    /// Number of walk steps to record (the curve has tmax + 1 rows).
    #[arg(long = "tmax")]
    t_max: usize,
    /// Which pipeline produces the curve.
    #[arg(long, value_enum, default_value_t = Engine::Full)]
    engine: Engine,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON summary path; the summary is skipped when omitted.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct ScanArgs {
    /// Subset size of the Johnson base.
    #[arg(long)]
    k: usize,
    /// Number of star leaves.
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// Ground-set sizes to sweep, comma separated; at least three.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON summary path; the summary is skipped when omitted.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// JSON report path; the report is skipped when omitted.
    #[arg(long)]
    summary: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Scan(args) => scan(args),
        Command::Verify(args) => verify(args),
    };
    match result {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

/// Formats a probability with 12 significant digits.
fn sig(v: f64) -> String {
    format!("{v:.11e}")
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>, String> {
    match path {
        Some(p) => {
            let file = File::create(p)
                .map_err(|e| format!("cannot create {}: {e}", p.display()))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

fn finish(mut out: Box<dyn Write>, what: &str) -> Result<(), String> {
    out.flush().map_err(|e| format!("cannot write {what}: {e}"))
}

fn write_json(path: &PathBuf, value: &impl Serialize) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| format!("cannot encode summary: {e}"))?;
    let mut out = BufWriter::new(
        File::create(path).map_err(|e| format!("cannot create {}: {e}", path.display()))?,
    );
    writeln!(out, "{text}").and_then(|()| out.flush())
        .map_err(|e| format!("cannot write {}: {e}", path.display()))
}

#[derive(Serialize)]
struct Agreement {
    max_abs_deviation: f64,
    at_step: usize,
}

#[derive(Serialize)]
struct RunSummary {
    schema: u32,
    graph: &'static str,
    engine: &'static str,
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n2: Option<usize>,
    t_max: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda_exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda_series: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau_hat: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau_asym: Option<f64>,
    tau_sim: usize,
    peak_prob: f64,
    trough_prob: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    agreement: Option<Agreement>,
}

/// Validated `run` parameters for one composite family.
struct RunPlan {
    kind: GraphKind,
    n: usize,
    k: Option<usize>,
    m: Option<usize>,
    n2: Option<usize>,
}

impl RunPlan {
    fn validate(args: &RunArgs) -> Result<RunPlan, String> {
        let kind = args.graph;
        match kind {
            GraphKind::JohnsonStar => {
                if args.k.is_none() {
                    return Err("johnson-star needs --k".into());
                }
                if args.n2.is_some() {
                    return Err("--n2 applies only to complete-complete".into());
                }
            }
            GraphKind::HypercubeStar => {
                if args.k.is_some() {
                    return Err("--k applies only to johnson-star".into());
                }
                if args.n2.is_some() {
                    return Err("--n2 applies only to complete-complete".into());
                }
            }
            GraphKind::CompleteComplete => {
                if args.k.is_some() {
                    return Err("--k applies only to johnson-star".into());
                }
                if args.m.is_some() {
                    return Err("--m applies only to star composites".into());
                }
                if args.n2.is_none() {
                    return Err("complete-complete needs --n2".into());
                }
            }
        }
        let m = match kind {
            GraphKind::CompleteComplete => None,
            _ => Some(args.m.unwrap_or(1)),
        };
        Ok(RunPlan {
            kind,
            n: args.n,
            k: args.k,
            m,
            n2: args.n2,
        })
    }

    /// Arc count of the composite, computed without building it.
    fn arc_count(&self) -> Result<u128, String> {
        let stray = |e: pulsar_core::Error| e.to_string();
        Ok(match self.kind {
            GraphKind::JohnsonStar => {
                let (n, k) = (self.n, self.k.unwrap());
                if k < 1 || k >= n {
                    return Err(format!("johnson-star needs 1 <= k <= n-1, got n={n} k={k}"));
                }
                let vertices = binomial(n as u64, k as u64).map_err(stray)? as u128;
                let degree = (k * (n - k)) as u128;
                vertices * degree + 2 * self.m.unwrap() as u128
            }
            GraphKind::HypercubeStar => {
                let dim = self.n;
                if dim < 1 || dim >= 20 {
                    return Err(format!("hypercube dimension must be in 1..20, got {dim}"));
                }
                (1u128 << dim) * dim as u128 + 2 * self.m.unwrap() as u128
            }
            GraphKind::CompleteComplete => {
                let (n, n2) = (self.n as u128, self.n2.unwrap() as u128);
                if n < 2 || n2 < 2 {
                    return Err("complete-complete needs n, n2 >= 2".into());
                }
                n * (n - 1) + n2 * (n2 - 1)
            }
        })
    }

    fn build(&self) -> Result<WedgeGraph, String> {
        match self.kind {
            GraphKind::JohnsonStar => {
                WedgeGraph::johnson_star(self.n, self.k.unwrap(), self.m.unwrap())
            }
            GraphKind::HypercubeStar => {
                WedgeGraph::hypercube_star(self.n, self.m.unwrap())
            }
            GraphKind::CompleteComplete => {
                WedgeGraph::complete_wedge(self.n, self.n2.unwrap())
            }
        }
        .map_err(|e| e.to_string())
    }

    /// The lumped-spectrum prediction, available only for Johnson bases
    /// with every distance shell nonempty.
    fn theory(&self) -> Option<(ClassDecomposition, PulsationPrediction)> {
        if self.kind != GraphKind::JohnsonStar {
            return None;
        }
        let dec = ClassDecomposition::new(self.n, self.k.unwrap(), self.m.unwrap()).ok()?;
        let prediction = predict(&dec).ok()?;
        Some((dec, prediction))
    }
}

fn run(args: RunArgs) -> Result<ExitCode, String> {
    if args.t_max < 1 {
        return Err("--tmax must be at least 1".into());
    }
    let plan = RunPlan::validate(&args)?;

    let needs_full = matches!(args.engine, Engine::Full | Engine::Compare);
    let needs_reduced = !matches!(args.engine, Engine::Full);
    if needs_reduced && plan.kind != GraphKind::JohnsonStar {
        return Err(format!(
            "engine {} needs a johnson-star composite; use --engine full",
            args.engine.name()
        ));
    }

    if needs_full {
        let arcs = plan.arc_count()?;
        if arcs > FULL_ARC_CAP {
            return Err(format!(
                "full simulation of {arcs} arcs exceeds the cap of {FULL_ARC_CAP}"
            ));
        }
    }

    let theory = plan.theory();
    let reduced = if needs_reduced {
        let (dec, _) = theory
            .as_ref()
            .ok_or_else(|| format!("J({}, {}) has empty distance shells; the reduced walk needs n > 2k", plan.n, plan.k.unwrap()))?;
        Some(reduced_curve(dec, args.t_max))
    } else {
        None
    };
    let full = if needs_full {
        Some(walk::curve(&plan.build()?, args.t_max))
    } else {
        None
    };

    // The curve reported as p_star, and the optional envelope column.
    let p_star = full.as_ref().or(reduced.as_ref()).expect("one curve was run");
    let p_theory = match args.engine {
        Engine::Theory | Engine::Compare => {
            theory.as_ref().map(|(_, p)| p.curve(args.t_max))
        }
        _ => None,
    };

    let agreement = match (&full, &reduced) {
        (Some(full), Some(reduced)) => {
            let (at_step, max_abs_deviation) = full
                .values()
                .iter()
                .zip(reduced.values())
                .map(|(a, b)| (a - b).abs())
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("curves are nonempty");
            eprintln!(
                "max |p_full - p_reduced| = {} at t = {at_step}",
                sig(max_abs_deviation)
            );
            Some(Agreement {
                max_abs_deviation,
                at_step,
            })
        }
        _ => None,
    };

    let mut out = sink(&args.out)?;
    write_curve(&mut out, p_star, p_theory.as_ref())
        .map_err(|e| format!("cannot write curve: {e}"))?;
    finish(out, "curve")?;

    if let Some(path) = &args.summary {
        let (tau_sim, peak_prob) = p_star.first_peak();
        let (_, trough_prob) = p_star
            .min_on(tau_sim..p_star.len())
            .expect("curve is nonempty");
        let spectral = theory.as_ref();
        let summary = RunSummary {
            schema: 1,
            graph: plan.kind.name(),
            engine: args.engine.name(),
            n: plan.n,
            k: plan.k,
            m: plan.m,
            n2: plan.n2,
            t_max: args.t_max,
            lambda_exact: spectral.map(|(_, p)| p.lambda),
            lambda_series: spectral
                .map(|(dec, _)| lambda_series(dec.k(), dec.m(), dec.eps())),
            theta: spectral.map(|(_, p)| p.theta),
            tau_hat: spectral.map(|(_, p)| p.tau),
            tau_asym: spectral
                .map(|(dec, _)| asymptotic_tau(dec.vertex_count() as f64, dec.k(), dec.m())),
            tau_sim,
            peak_prob,
            trough_prob,
            agreement,
        };
        write_json(path, &summary)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn write_curve(
    out: &mut impl Write,
    p_star: &ProbabilityCurve,
    p_theory: Option<&ProbabilityCurve>,
) -> io::Result<()> {
    match p_theory {
        None => {
            writeln!(out, "t,p_star")?;
            for (t, &p) in p_star.values().iter().enumerate() {
                writeln!(out, "{t},{}", sig(p))?;
            }
        }
        Some(envelope) => {
            writeln!(out, "t,p_star,p_theory")?;
            for (t, (&p, &q)) in p_star.values().iter().zip(envelope.values()).enumerate() {
                writeln!(out, "{t},{},{}", sig(p), sig(q))?;
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ScanPoint {
    n: usize,
    vertices: u64,
    theta: f64,
    tau_hat: f64,
}

#[derive(Serialize)]
struct ScanSummary {
    schema: u32,
    graph: &'static str,
    k: usize,
    m: usize,
    points: Vec<ScanPoint>,
    slope: f64,
    predicted_slope: f64,
}

fn scan(args: ScanArgs) -> Result<ExitCode, String> {
    if args.n.len() < 3 {
        return Err(format!(
            "scan needs at least 3 values of n, got {}",
            args.n.len()
        ));
    }

    let mut points = Vec::with_capacity(args.n.len());
    for &n in &args.n {
        let dec = ClassDecomposition::new(n, args.k, args.m).map_err(|e| e.to_string())?;
        let prediction = predict(&dec).map_err(|e| e.to_string())?;
        points.push(ScanPoint {
            n,
            vertices: dec.vertex_count(),
            theta: prediction.theta,
            // Continuous peak time; flooring would bias the fit at small n.
            tau_hat: std::f64::consts::FRAC_PI_2 / prediction.theta,
        });
    }

    let samples: Vec<(f64, f64)> = points
        .iter()
        .map(|p| ((p.vertices as f64).ln(), p.tau_hat.ln()))
        .collect();
    let slope = fit_slope(&samples);
    let predicted_slope = 0.5 * (1.0 + 1.0 / args.k as f64);
    eprintln!(
        "log-log slope = {slope:.4} over {} points (asymptotic prediction {predicted_slope:.4})",
        points.len()
    );

    let mut out = sink(&args.out)?;
    (|| -> io::Result<()> {
        writeln!(out, "n,vertices,theta,tau_hat")?;
        for p in &points {
            writeln!(out, "{},{},{},{}", p.n, p.vertices, sig(p.theta), sig(p.tau_hat))?;
        }
        Ok(())
    })()
    .map_err(|e| format!("cannot write scan table: {e}"))?;
    finish(out, "scan table")?;

    if let Some(path) = &args.summary {
        let summary = ScanSummary {
            schema: 1,
            graph: "johnson-star",
            k: args.k,
            m: args.m,
            points,
            slope,
            predicted_slope,
        };
        write_json(path, &summary)?;
    }
    Ok(ExitCode::SUCCESS)
}

/// Least-squares slope of `y` against `x`.
fn fit_slope(samples: &[(f64, f64)]) -> f64 {
    let len = samples.len() as f64;
    let mean_x = samples.iter().map(|s| s.0).sum::<f64>() / len;
    let mean_y = samples.iter().map(|s| s.1).sum::<f64>() / len;
    let cov: f64 = samples
        .iter()
        .map(|s| (s.0 - mean_x) * (s.1 - mean_y))
        .sum();
    let var: f64 = samples.iter().map(|s| (s.0 - mean_x).powi(2)).sum();
    cov / var
}

#[derive(Serialize)]
struct CheckReport {
    passed: bool,
    detail: String,
}

#[derive(Serialize)]
struct CriterionReport {
    id: usize,
    name: &'static str,
    passed: bool,
    checks: Vec<CheckReport>,
}

#[derive(Serialize)]
struct VerifySummary {
    schema: u32,
    passed: bool,
    criteria: Vec<CriterionReport>,
}

fn verify(args: VerifyArgs) -> Result<ExitCode, String> {
    let outcomes = acceptance::run_all();
    let mut all_passed = true;
    for outcome in &outcomes {
        println!("{}", outcome.summary_line());
        if !outcome.passed() {
            all_passed = false;
            for check in outcome.checks.iter().filter(|c| !c.passed) {
                eprintln!("  failed: {}", check.detail);
            }
        }
    }

    if let Some(path) = &args.summary {
        let criteria = outcomes
            .iter()
            .map(|o| CriterionReport {
                id: o.id,
                name: o.name,
                passed: o.passed(),
                checks: o
                    .checks
                    .iter()
                    .map(|c| CheckReport {
                        passed: c.passed,
                        detail: c.detail.clone(),
                    })
                    .collect(),
            })
            .collect();
        write_json(
            path,
            &VerifySummary {
                schema: 1,
                passed: all_passed,
                criteria,
            },
        )?;
    }

    Ok(if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}
