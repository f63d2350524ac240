//! `subdiff`: weights, single solves, convergence tables, fast-history
//! checks and timings, all written as CSV.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use subdiff_core::experiments::{
    run_example1, run_example2, run_example3, run_example4, run_fast_accuracy, run_stability, time_run,
    timing_problem, Example, ExperimentSpec, ModelProblem, RateTable, DEFAULT_H,
};
use subdiff_core::stepping::{run, HistoryMode, Scheme};
use subdiff_core::weights::{weights_of_kind, SchemeParams, WeightKind};
use subdiff_core::{Error, FastAlgorithm, FastConfig};

#[derive(Parser)]
#[command(name = "subdiff", version, about = "Time-fractional subdiffusion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Sftr,
    Fbdf2,
    Cnfbdf2,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Plain,
    Corrected,
    Cn,
    Cnfbdf2,
}

#[derive(Clone, Copy, ValueEnum)]
enum HistoryArg {
    Standard,
    Fast1,
    Fast2,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemArg {
    Ex1,
    Ex2i,
    Ex2ii,
    Ex3,
    Scalar,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExampleArg {
    Ex1,
    Ex2i,
    Ex2ii,
    Ex3,
    Ex4,
}

#[derive(Subcommand)]
enum Command {
    /// Convolution weights ω_0..ω_K.
    Weights {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        /// Number of weights K + 1.
        #[arg(long)]
        count: usize,
        #[arg(long, value_enum, default_value = "sftr")]
        kind: KindArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One run; writes the error (or sup-norm) at every step.
    Solve {
        #[arg(long, value_enum)]
        problem: ProblemArg,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        nsteps: usize,
        /// Cells of the spatial mesh (default: h ≈ 1e-3).
        #[arg(long)]
        ncells: Option<usize>,
        #[arg(long, value_enum, default_value = "corrected")]
        scheme: SchemeArg,
        #[arg(long, default_value_t = 1.0)]
        tfinal: f64,
        #[arg(long, value_enum, default_value = "standard")]
        history: HistoryArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error and rate table at a fixed time.
    Convergence {
        #[arg(long, value_enum)]
        example: ExampleArg,
        /// Comma-separated list.
        #[arg(long, default_value = "0.1,0.5,0.9")]
        alphas: String,
        /// Comma-separated list (default depends on the example).
        #[arg(long)]
        thetas: Option<String>,
        /// `2^-a..2^-b` or a comma-separated list of steps.
        #[arg(long, default_value = "2^-5..2^-9")]
        taus: String,
        #[arg(long)]
        ncells: Option<usize>,
        /// Scheme (default: corrected, cnfbdf2 for ex4).
        #[arg(long, value_enum)]
        scheme: Option<SchemeArg>,
        #[arg(long, value_enum, default_value = "standard")]
        history: HistoryArg,
        #[arg(long, default_value_t = 0.5)]
        t_eval: f64,
        /// Time step of the ex2ii reference run.
        #[arg(long, default_value = "2^-12")]
        reference_tau: String,
        /// Spatial refinement of the ex2ii reference mesh.
        #[arg(long, default_value_t = 1)]
        reference_refinement: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Long-time run on sin x data reporting u(π/2, t), sup-norm and the
    /// part of the solution off the initial mode.
    Stability {
        #[arg(long, default_value_t = 0.8)]
        alpha: f64,
        #[arg(long)]
        theta: f64,
        #[arg(long, default_value = "5*2^-9")]
        tau: String,
        #[arg(long, default_value_t = 10.0)]
        tfinal: f64,
        #[arg(long, default_value_t = 100)]
        ncells: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact versus fast (Talbot quadrature) weights.
    Fastcheck {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        theta: f64,
        #[arg(long, default_value_t = 1)]
        alg: u8,
        #[arg(long, default_value_t = 30)]
        kc: usize,
        #[arg(long, default_value_t = 5)]
        b: usize,
        #[arg(long, default_value_t = 250)]
        nmax: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Wall time and peak history size of one run.
    Bench {
        #[arg(long, value_enum, default_value = "standard")]
        history: HistoryArg,
        #[arg(long)]
        nsteps: usize,
        #[arg(long, default_value_t = 0.3)]
        alpha: f64,
        #[arg(long, default_value_t = 0.1)]
        theta: f64,
        #[arg(long, default_value_t = 16)]
        ncells: usize,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl From<KindArg> for WeightKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Sftr => WeightKind::Sftr,
            KindArg::Fbdf2 => WeightKind::Fbdf2,
            KindArg::Cnfbdf2 => WeightKind::CnFbdf2,
        }
    }
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Plain => Scheme::NoCorrection,
            SchemeArg::Corrected => Scheme::Corrected,
            SchemeArg::Cn => Scheme::CrankNicolson,
            SchemeArg::Cnfbdf2 => Scheme::CnFbdf2,
        }
    }
}

impl From<HistoryArg> for HistoryMode {
    fn from(h: HistoryArg) -> Self {
        match h {
            HistoryArg::Standard => HistoryMode::Standard,
            HistoryArg::Fast1 => HistoryMode::Fast(FastConfig::with_algorithm(FastAlgorithm::I)),
            HistoryArg::Fast2 => HistoryMode::Fast(FastConfig::with_algorithm(FastAlgorithm::II)),
        }
    }
}

impl From<ProblemArg> for ModelProblem {
    fn from(p: ProblemArg) -> Self {
        match p {
            ProblemArg::Ex1 => ModelProblem::Ex1,
            ProblemArg::Ex2i => ModelProblem::Ex2i,
            ProblemArg::Ex2ii => ModelProblem::Ex2ii,
            ProblemArg::Ex3 => ModelProblem::Ex3,
            ProblemArg::Scalar => ModelProblem::Scalar,
        }
    }
}

impl From<ExampleArg> for Example {
    fn from(e: ExampleArg) -> Self {
        match e {
            ExampleArg::Ex1 => Example::Ex1,
            ExampleArg::Ex2i => Example::Ex2i,
            ExampleArg::Ex2ii => Example::Ex2ii,
            ExampleArg::Ex3 => Example::Ex3,
            ExampleArg::Ex4 => Example::Ex4,
        }
    }
}

/// Full double precision (17 significant digits).
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer(out: &Option<PathBuf>) -> anyhow::Result<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = match out {
        Some(path) => Box::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?),
        None => Box::new(io::stdout().lock()),
    };
    Ok(csv::Writer::from_writer(sink))
}

/// Parses `2^-k`, `c*2^-k` or a plain number.
fn parse_step(s: &str) -> anyhow::Result<f64> {
    let s = s.trim();
    let (factor, rest) = match s.split_once('*') {
        Some((c, r)) => (c.trim().parse::<f64>().with_context(|| format!("bad factor in '{s}'"))?, r.trim()),
        None => (1.0, s),
    };
    let value = match rest.strip_prefix("2^") {
        Some(exp) => 2f64.powi(exp.parse::<i32>().with_context(|| format!("bad exponent in '{s}'"))?),
        None => rest.parse::<f64>().with_context(|| format!("bad number '{s}'"))?,
    };
    Ok(factor * value)
}

/// `2^-a..2^-b` (inclusive) or a comma-separated list.
fn parse_taus(s: &str) -> anyhow::Result<Vec<f64>> {
    if let Some((lo, hi)) = s.split_once("..") {
        let exp = |t: &str| -> anyhow::Result<i32> {
            t.trim()
                .strip_prefix("2^")
                .ok_or_else(|| anyhow!("range bounds must look like 2^-k, got '{t}'"))?
                .parse::<i32>()
                .with_context(|| format!("bad exponent in '{t}'"))
        };
        let (a, b) = (exp(lo)?, exp(hi)?);
        if b > a {
            bail!("tau range must decrease, got {s}");
        }
        return Ok((b..=a).rev().map(|k| 2f64.powi(k)).collect());
    }
    s.split(',').map(parse_step).collect()
}

fn parse_list(s: &str) -> anyhow::Result<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().with_context(|| format!("bad number '{x}'")))
        .collect()
}

fn write_table(table: &RateTable, out: &Option<PathBuf>) -> anyhow::Result<()> {
    let mut w = writer(out)?;
    w.write_record(["alpha", "theta", "tau", "error", "rate"])?;
    for (alpha, theta, tau, err, rate) in table.long_rows() {
        let rate = rate.map(num).unwrap_or_default();
        w.write_record([num(alpha), num(theta), num(tau), num(err), rate])?;
    }
    w.flush()?;
    Ok(())
}

fn weights_cmd(alpha: f64, theta: f64, count: usize, kind: KindArg, out: &Option<PathBuf>) -> anyhow::Result<()> {
    if count == 0 {
        bail!(Error::InvalidInput("count must be at least 1".into()));
    }
    let table = weights_of_kind(kind.into(), alpha, theta, count - 1)?;
    let mut w = writer(out)?;
    w.write_record(["k", "omega"])?;
    for (k, x) in table.as_slice().iter().enumerate() {
        w.write_record([k.to_string(), num(*x)])?;
    }
    w.flush()?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn solve_cmd(
    problem: ProblemArg,
    alpha: f64,
    theta: f64,
    nsteps: usize,
    ncells: Option<usize>,
    scheme: SchemeArg,
    tfinal: f64,
    history: HistoryArg,
    out: &Option<PathBuf>,
) -> anyhow::Result<()> {
    let model: ModelProblem = problem.into();
    let n_cells = ncells.unwrap_or_else(|| model.cells_for_h(DEFAULT_H));
    let params = SchemeParams::with_horizon(alpha, theta, tfinal, nsteps)?;
    let discrete = model.build(params, n_cells, scheme.into())?;
    let with_error = model.has_exact();

    let mut rows: Vec<(f64, f64)> = Vec::with_capacity(nsteps + 1);
    let mut failure: Option<Error> = None;
    let outcome = run(&discrete, history.into(), |_, t, u| {
        if failure.is_some() {
            return;
        }
        let value = if with_error {
            model.exact(&discrete.system, discrete.params.alpha, t).and_then(|ex| {
                let diff: Vec<f64> = u.iter().zip(&ex).map(|(a, b)| a - b).collect();
                discrete.system.norm(&diff)
            })
        } else {
            Ok(u.iter().fold(0.0f64, |m, x| m.max(x.abs())))
        };
        match value {
            Ok(v) => rows.push((t, v)),
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e.into());
    }
    let unstable = match outcome {
        Ok(_) => None,
        // divergence is an outcome of the stability study, not a failure
        Err(e @ Error::Instability { .. }) if model == ModelProblem::Ex3 => Some(e),
        Err(e) => return Err(e.into()),
    };

    let mut w = writer(out)?;
    w.write_record(["t", if with_error { "error" } else { "linf_norm" }])?;
    for (t, v) in &rows {
        w.write_record([num(*t), num(*v)])?;
    }
    w.flush()?;
    if let Some(e) = unstable {
        eprintln!("warning: kind={} msg={e}", e.kind());
    }
    Ok(())
}

fn convergence_cmd(spec: ExperimentSpec, out: &Option<PathBuf>) -> anyhow::Result<()> {
    let table = match spec.example {
        Example::Ex1 => run_example1(&spec)?,
        Example::Ex2i | Example::Ex2ii => run_example2(&spec)?,
        Example::Ex3 => run_example3(&spec)?,
        Example::Ex4 => run_example4(&spec)?,
        Example::FastAccuracy | Example::FastTiming => bail!("use the fastcheck or bench subcommands"),
    };
    write_table(&table, out)
}

fn run_cli(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Weights {
            alpha,
            theta,
            count,
            kind,
            out,
        } => weights_cmd(alpha, theta, count, kind, &out),
        Command::Solve {
            problem,
            alpha,
            theta,
            nsteps,
            ncells,
            scheme,
            tfinal,
            history,
            out,
        } => solve_cmd(problem, alpha, theta, nsteps, ncells, scheme, tfinal, history, &out),
        Command::Convergence {
            example,
            alphas,
            thetas,
            taus,
            ncells,
            scheme,
            history,
            t_eval,
            reference_tau,
            reference_refinement,
            out,
        } => {
            let example: Example = example.into();
            let mut spec = ExperimentSpec::new(example);
            spec.alphas = parse_list(&alphas)?;
            if let Some(t) = thetas {
                spec.thetas = parse_list(&t)?;
            }
            spec.taus = parse_taus(&taus)?;
            if let Some(n) = ncells {
                spec.n_cells = n;
            }
            if let Some(s) = scheme {
                spec.scheme = s.into();
            }
            spec.history = history.into();
            spec.t_eval = t_eval;
            spec.reference_tau = parse_step(&reference_tau)?;
            spec.reference_refinement = reference_refinement;
            convergence_cmd(spec, &out)
        }
        Command::Stability {
            alpha,
            theta,
            tau,
            tfinal,
            ncells,
            out,
        } => {
            let report = run_stability(alpha, theta, parse_step(&tau)?, tfinal, ncells)?;
            let mut w = writer(&out)?;
            w.write_record(["t", "u_mid", "linf_norm", "transverse"])?;
            for ((m, s), r) in report.midpoint.iter().zip(&report.sup_norm).zip(&report.transverse) {
                w.write_record([num(m.0), num(m.1), num(s.1), num(r.1)])?;
            }
            w.flush()?;
            eprintln!(
                "theta={} unstable={} bounded={} peak={:e} transverse_growth={}",
                theta,
                report.unstable(),
                report.bounded(),
                report.peak,
                report.transverse_growth().map_or("nan".to_string(), |g| format!("{g:.6}"))
            );
            Ok(())
        }
        Command::Fastcheck {
            alpha,
            theta,
            alg,
            kc,
            b,
            nmax,
            out,
        } => {
            let algorithm: FastAlgorithm = alg.to_string().parse()?;
            let config = FastConfig {
                algorithm,
                base: b,
                kc,
                ..FastConfig::default()
            };
            let rows = run_fast_accuracy(alpha, theta, algorithm, config, nmax)?;
            let mut w = writer(&out)?;
            w.write_record(["n", "exact", "fast", "abs_error"])?;
            for r in rows {
                w.write_record([r.n.to_string(), num(r.exact), num(r.fast), num(r.abs_error)])?;
            }
            w.flush()?;
            Ok(())
        }
        Command::Bench {
            history,
            nsteps,
            alpha,
            theta,
            ncells,
            repeats,
            out,
        } => {
            let problem = timing_problem(alpha, theta, nsteps, ncells)?;
            let row = time_run(&problem, history.into(), repeats)?;
            let mut w = writer(&out)?;
            w.write_record(["n_steps", "wall_seconds", "history_entries_peak"])?;
            w.write_record([
                row.n_steps.to_string(),
                format!("{:.6}", row.wall_seconds),
                row.history_entries_peak.to_string(),
            ])?;
            w.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_cli(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = err.downcast_ref::<Error>().map_or("cli", Error::kind);
            let msg = format!("{err:#}").replace('\n', " ");
            eprintln!("error: kind={kind} msg={msg}");
            ExitCode::FAILURE
        }
    }
}
