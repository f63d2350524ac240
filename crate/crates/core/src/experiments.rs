//! Drivers for the numerical examples: model problems, convergence tables,
//! the stability study, fast-weight accuracy and timing sweeps.
//!
//! Sweeps run their `(α, θ, τ)` cells in parallel and return rows sorted by
//! `(α, θ, τ)` so output does not depend on scheduling.

use std::f64::consts::PI;
use std::time::Instant;

use rayon::prelude::*;
use statrs::function::gamma::gamma;

use crate::error::{invalid, Error, Result};
use crate::fast::{fast_weight, FastAlgorithm, FastConfig, TalbotLevel};
use crate::fem::{Datum, Fem1dSystem, Mesh1D};
use crate::special::mittag_leffler;
use crate::stepping::{run, separable_source, DiscreteProblem, HistoryMode, Scheme, SpatialSystem};
use crate::weights::{sftr_weights, SchemeParams};

/// Default spatial step.
pub const DEFAULT_H: f64 = 1e-3;
/// Default evaluation time for error tables.
pub const DEFAULT_T_EVAL: f64 = 0.5;
/// Default time step of the Example 2(ii) reference run.
pub const DEFAULT_REFERENCE_TAU: f64 = 1.0 / 4096.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Example {
    Ex1,
    Ex2i,
    Ex2ii,
    Ex3,
    Ex4,
    FastAccuracy,
    FastTiming,
}

impl std::str::FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ex1" => Ok(Example::Ex1),
            "ex2i" => Ok(Example::Ex2i),
            "ex2ii" => Ok(Example::Ex2ii),
            "ex3" => Ok(Example::Ex3),
            "ex4" => Ok(Example::Ex4),
            "fast-accuracy" => Ok(Example::FastAccuracy),
            "fast-timing" => Ok(Example::FastTiming),
            other => Err(invalid(format!("unknown example '{other}'"))),
        }
    }
}

/// Model problems available to single solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelProblem {
    /// `Ω = (0, π)`, `v = sin x`, manufactured source.
    Ex1,
    /// `Ω = (0, π)`, `v = sin x`, `f = 0`.
    Ex2i,
    /// `Ω = (0, 1)`, `v = χ_(0,½)`, `f = 0`.
    Ex2ii,
    /// Same data as [`ModelProblem::Ex2i`]; reported as a sup-norm series.
    Ex3,
    /// Scalar `D^α u = 1`, `u(0) = 0`, exact `t^α / Γ(1+α)`.
    Scalar,
}

impl std::str::FromStr for ModelProblem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ex1" => Ok(ModelProblem::Ex1),
            "ex2i" => Ok(ModelProblem::Ex2i),
            "ex2ii" => Ok(ModelProblem::Ex2ii),
            "ex3" => Ok(ModelProblem::Ex3),
            "scalar" => Ok(ModelProblem::Scalar),
            other => Err(invalid(format!("unknown problem '{other}'"))),
        }
    }
}

impl ModelProblem {
    /// Spatial domain length.
    pub fn domain_length(self) -> f64 {
        match self {
            ModelProblem::Ex2ii => 1.0,
            _ => PI,
        }
    }

    /// Cells giving a mesh width close to `h`.
    pub fn cells_for_h(self, h: f64) -> usize {
        (self.domain_length() / h).round().max(2.0) as usize
    }

    /// Whether [`ModelProblem::exact`] is available.
    pub fn has_exact(self) -> bool {
        matches!(self, ModelProblem::Ex1 | ModelProblem::Ex2i | ModelProblem::Scalar)
    }

    pub fn system(self, n_cells: usize) -> Result<SpatialSystem> {
        match self {
            ModelProblem::Scalar => SpatialSystem::scalar(0.0),
            _ => {
                let mesh = Mesh1D::new(0.0, self.domain_length(), n_cells)?;
                Ok(SpatialSystem::Fem(Fem1dSystem::new(mesh)?))
            }
        }
    }

    /// Builds the discrete problem.
    pub fn build(self, params: SchemeParams, n_cells: usize, scheme: Scheme) -> Result<DiscreteProblem> {
        let system = self.system(n_cells)?;
        let alpha = params.alpha;
        let (initial, source) = match (&system, self) {
            (SpatialSystem::Scalar { .. }, _) => (vec![0.0], Some(separable_source(|_| 1.0, vec![1.0]))),
            (SpatialSystem::Fem(sys), ModelProblem::Ex2ii) => {
                let v = sys.l2_project(Datum::Indicator { lo: 0.0, hi: 0.5 })?;
                (v.coeffs, None)
            }
            (SpatialSystem::Fem(sys), _) => {
                // smooth datum in D(Δ): Ritz projection
                let v = sys.ritz_project(&|x: f64| -x.sin())?;
                let source = if self == ModelProblem::Ex1 {
                    let profile = sys.l2_project(Datum::Smooth(&|x: f64| x.sin()))?.coeffs;
                    let c = 6.0 / gamma(4.0 - alpha);
                    Some(separable_source(move |t| c * t.powf(3.0 - alpha) + t.powi(3), profile))
                } else {
                    None
                };
                (v.coeffs, source)
            }
        };
        DiscreteProblem::new(system, initial, source, params, scheme)
    }

    /// Nodal interpolant of the exact solution at time `t`.
    pub fn exact(self, system: &SpatialSystem, alpha: f64, t: f64) -> Result<Vec<f64>> {
        let amplitude = match self {
            ModelProblem::Scalar => return Ok(vec![t.powf(alpha) / gamma(1.0 + alpha)]),
            ModelProblem::Ex1 => mittag_leffler(alpha, -t.powf(alpha))? + t.powi(3),
            ModelProblem::Ex2i => mittag_leffler(alpha, -t.powf(alpha))?,
            ModelProblem::Ex2ii | ModelProblem::Ex3 => {
                return Err(invalid("no closed-form solution for this problem"));
            }
        };
        match system {
            SpatialSystem::Fem(sys) => Ok(sys.mesh.interior_nodes().map(|x| amplitude * x.sin()).collect()),
            SpatialSystem::Scalar { .. } => Err(invalid("problem is not scalar")),
        }
    }
}

/// Parameters of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub example: Example,
    pub alphas: Vec<f64>,
    pub thetas: Vec<f64>,
    /// Strictly decreasing time steps.
    pub taus: Vec<f64>,
    pub n_cells: usize,
    pub scheme: Scheme,
    pub history: HistoryMode,
    pub t_eval: f64,
    /// Time step of the Example 2(ii) reference run.
    pub reference_tau: f64,
    /// Spatial refinement factor of the Example 2(ii) reference mesh.
    pub reference_refinement: usize,
}

/// `[2^-lo, …, 2^-hi]`.
pub fn dyadic_taus(lo: u32, hi: u32) -> Vec<f64> {
    (lo..=hi).map(|k| 0.5f64.powi(k as i32)).collect()
}

impl ExperimentSpec {
    /// Table defaults: `α ∈ {0.1, 0.5, 0.9}`, `θ ∈ {0.1, …, 0.5}`,
    /// `τ = 2^-5 … 2^-9`, `h ≈ 10^-3`, `t = 0.5`.
    pub fn new(example: Example) -> Self {
        let problem = match example {
            Example::Ex2ii => ModelProblem::Ex2ii,
            _ => ModelProblem::Ex1,
        };
        let scheme = match example {
            Example::Ex4 => Scheme::CnFbdf2,
            _ => Scheme::Corrected,
        };
        let thetas = match example {
            Example::Ex3 => vec![0.0, 0.001, 0.01, 0.1],
            _ => vec![0.1, 0.2, 0.3, 0.4, 0.5],
        };
        Self {
            example,
            alphas: vec![0.1, 0.5, 0.9],
            thetas,
            taus: dyadic_taus(5, 9),
            n_cells: problem.cells_for_h(DEFAULT_H),
            scheme,
            history: HistoryMode::Standard,
            t_eval: DEFAULT_T_EVAL,
            reference_tau: DEFAULT_REFERENCE_TAU,
            reference_refinement: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() || self.thetas.is_empty() || self.taus.is_empty() {
            return Err(invalid("alpha, theta and tau lists must be non-empty"));
        }
        if self.taus.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("tau list must be strictly decreasing"));
        }
        for &tau in &self.taus {
            steps_to(self.t_eval, tau)?;
        }
        if self.example == Example::Ex2ii {
            let finest = *self.taus.last().expect("non-empty");
            if self.reference_tau > finest / 8.0 * (1.0 + 1e-12) {
                return Err(invalid(format!(
                    "reference tau {} must be at least 8x finer than {finest}",
                    self.reference_tau
                )));
            }
            steps_to(self.t_eval, self.reference_tau)?;
            if self.reference_refinement == 0 {
                return Err(invalid("reference refinement must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Number of steps of size `tau` reaching `t`; errors if `t` is off-grid.
pub fn steps_to(t: f64, tau: f64) -> Result<usize> {
    let n = t / tau;
    let rounded = n.round();
    if !(tau > 0.0) || rounded < 1.0 || (n - rounded).abs() > 1e-9 * rounded.max(1.0) {
        return Err(invalid(format!("t = {t} is not a positive multiple of tau = {tau}")));
    }
    Ok(rounded as usize)
}

/// Errors of one `(α, θ)` pair across the τ list.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTableRow {
    pub alpha: f64,
    pub theta: f64,
    pub taus: Vec<f64>,
    pub errors: Vec<f64>,
    /// `log2(e_i / e_{i+1})`; `NaN` where undefined.
    pub rates: Vec<f64>,
}

impl RateTableRow {
    pub fn new(alpha: f64, theta: f64, taus: Vec<f64>, errors: Vec<f64>) -> Self {
        let rates = errors
            .windows(2)
            .map(|w| {
                let r = w[0] / w[1];
                if r > 0.0 && r.is_finite() {
                    r.log2()
                } else {
                    f64::NAN
                }
            })
            .collect();
        Self {
            alpha,
            theta,
            taus,
            errors,
            rates,
        }
    }

    /// Rate between the two finest steps.
    pub fn finest_rate(&self) -> Option<f64> {
        self.rates.last().copied()
    }

    pub fn finest_error(&self) -> Option<f64> {
        self.errors.last().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateTable {
    pub rows: Vec<RateTableRow>,
}

impl RateTable {
    pub fn row(&self, alpha: f64, theta: f64) -> Option<&RateTableRow> {
        self.rows
            .iter()
            .find(|r| (r.alpha - alpha).abs() < 1e-12 && (r.theta - theta).abs() < 1e-12)
    }

    /// Long format `(α, θ, τ, error, rate)`; the rate belongs to the pair
    /// ending at that τ and is `None` for the coarsest step.
    pub fn long_rows(&self) -> Vec<(f64, f64, f64, f64, Option<f64>)> {
        let mut out = Vec::new();
        for row in &self.rows {
            for (i, (&tau, &err)) in row.taus.iter().zip(&row.errors).enumerate() {
                let rate = if i == 0 { None } else { Some(row.rates[i - 1]) };
                out.push((row.alpha, row.theta, tau, err, rate));
            }
        }
        out
    }
}

/// Runs `problem` and returns the level at step `n_eval`.
fn level_at(problem: &DiscreteProblem, mode: HistoryMode, n_eval: usize) -> Result<Vec<f64>> {
    let mut level = None;
    run(problem, mode, |n, _, u| {
        if n == n_eval {
            level = Some(u.to_vec());
        }
    })?;
    level.ok_or_else(|| invalid(format!("step {n_eval} was not reached")))
}

fn error_at(
    model: ModelProblem,
    alpha: f64,
    theta: f64,
    tau: f64,
    spec: &ExperimentSpec,
) -> Result<f64> {
    let n = steps_to(spec.t_eval, tau)?;
    let params = SchemeParams::new(alpha, theta, tau, n)?;
    let problem = model.build(params, spec.n_cells, spec.scheme)?;
    let u = level_at(&problem, spec.history, n)?;
    let exact = model.exact(&problem.system, alpha, spec.t_eval)?;
    let diff: Vec<f64> = u.iter().zip(&exact).map(|(a, b)| a - b).collect();
    problem.system.norm(&diff)
}

fn grid(spec: &ExperimentSpec) -> Vec<(usize, usize)> {
    (0..spec.alphas.len())
        .flat_map(|a| (0..spec.thetas.len()).map(move |t| (a, t)))
        .collect()
}

fn sort_rows(rows: &mut [RateTableRow]) {
    rows.sort_by(|a, b| a.alpha.total_cmp(&b.alpha).then(a.theta.total_cmp(&b.theta)));
}

/// Error table of a problem with a closed-form solution.
fn exact_error_table(model: ModelProblem, spec: &ExperimentSpec) -> Result<RateTable> {
    spec.validate()?;
    let cells: Vec<(usize, usize, usize)> = grid(spec)
        .into_iter()
        .flat_map(|(a, t)| (0..spec.taus.len()).map(move |k| (a, t, k)))
        .collect();
    let errors: Vec<((usize, usize, usize), f64)> = cells
        .par_iter()
        .map(|&(a, t, k)| {
            error_at(model, spec.alphas[a], spec.thetas[t], spec.taus[k], spec).map(|e| ((a, t, k), e))
        })
        .collect::<Result<_>>()?;
    Ok(assemble_table(spec, errors))
}

fn assemble_table(spec: &ExperimentSpec, errors: Vec<((usize, usize, usize), f64)>) -> RateTable {
    let mut rows: Vec<RateTableRow> = grid(spec)
        .into_iter()
        .map(|(a, t)| {
            let mut errs: Vec<(usize, f64)> = errors
                .iter()
                .filter(|((ea, et, _), _)| *ea == a && *et == t)
                .map(|((_, _, k), e)| (*k, *e))
                .collect();
            errs.sort_by_key(|(k, _)| *k);
            RateTableRow::new(
                spec.alphas[a],
                spec.thetas[t],
                spec.taus.clone(),
                errs.into_iter().map(|(_, e)| e).collect(),
            )
        })
        .collect();
    sort_rows(&mut rows);
    RateTable { rows }
}

/// Smooth problem with a polynomial-in-time exact solution (also run with cnfbdf2).
pub fn run_example1(spec: &ExperimentSpec) -> Result<RateTable> {
    exact_error_table(ModelProblem::Ex1, spec)
}

/// Example 4: Example 1 data under CN + fractional BDF2.
pub fn run_example4(spec: &ExperimentSpec) -> Result<RateTable> {
    let mut spec = spec.clone();
    spec.scheme = Scheme::CnFbdf2;
    exact_error_table(ModelProblem::Ex1, &spec)
}

/// Example 2: case (i) against the exact solution, case (ii) against a
/// fine-τ reference run (selected by `spec.example`).
pub fn run_example2(spec: &ExperimentSpec) -> Result<RateTable> {
    match spec.example {
        Example::Ex2ii => nonsmooth_table(spec),
        _ => exact_error_table(ModelProblem::Ex2i, spec),
    }
}

/// Example 3 robustness table (small θ) on the Example 2(i) data.
pub fn run_example3(spec: &ExperimentSpec) -> Result<RateTable> {
    exact_error_table(ModelProblem::Ex2i, spec)
}

/// Reference run for Example 2(ii), restricted to the measured mesh.
pub fn nonsmooth_reference(alpha: f64, theta: f64, spec: &ExperimentSpec) -> Result<Vec<f64>> {
    let n = steps_to(spec.t_eval, spec.reference_tau)?;
    let params = SchemeParams::new(alpha, theta, spec.reference_tau, n)?;
    let fine_cells = spec.n_cells * spec.reference_refinement;
    let problem = ModelProblem::Ex2ii.build(params, fine_cells, spec.scheme)?;
    let u = level_at(&problem, spec.history, n)?;
    // interior coarse node i sits at fine interior index (i + 1) r − 1
    let r = spec.reference_refinement;
    Ok((1..spec.n_cells).map(|i| u[i * r - 1]).collect())
}

fn nonsmooth_table(spec: &ExperimentSpec) -> Result<RateTable> {
    spec.validate()?;
    let pairs = grid(spec);
    let references: Vec<Vec<f64>> = pairs
        .par_iter()
        .map(|&(a, t)| nonsmooth_reference(spec.alphas[a], spec.thetas[t], spec))
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, usize, usize, usize)> = pairs
        .iter()
        .enumerate()
        .flat_map(|(p, &(a, t))| (0..spec.taus.len()).map(move |k| (p, a, t, k)))
        .collect();
    let errors: Vec<((usize, usize, usize), f64)> = cells
        .par_iter()
        .map(|&(p, a, t, k)| {
            let tau = spec.taus[k];
            let n = steps_to(spec.t_eval, tau)?;
            let params = SchemeParams::new(spec.alphas[a], spec.thetas[t], tau, n)?;
            let problem = ModelProblem::Ex2ii.build(params, spec.n_cells, spec.scheme)?;
            let u = level_at(&problem, spec.history, n)?;
            let diff: Vec<f64> = u.iter().zip(&references[p]).map(|(x, y)| x - y).collect();
            Ok(((a, t, k), problem.system.norm(&diff)?))
        })
        .collect::<Result<_>>()?;
    Ok(assemble_table(spec, errors))
}

/// `(t_n, ‖U^n − u(t_n)‖)` for `n = 1..=N` on a problem with exact solution.
pub fn error_time_series(
    model: ModelProblem,
    params: SchemeParams,
    n_cells: usize,
    scheme: Scheme,
    mode: HistoryMode,
) -> Result<Vec<(f64, f64)>> {
    let problem = model.build(params, n_cells, scheme)?;
    let mut out = Vec::with_capacity(params.n_steps);
    let mut failure = None;
    run(&problem, mode, |n, t, u| {
        if n == 0 || failure.is_some() {
            return;
        }
        let e = model.exact(&problem.system, params.alpha, t).and_then(|ex| {
            let diff: Vec<f64> = u.iter().zip(&ex).map(|(a, b)| a - b).collect();
            problem.system.norm(&diff)
        });
        match e {
            Ok(e) => out.push((t, e)),
            Err(err) => failure = Some(err),
        }
    })?;
    match failure {
        Some(err) => Err(err),
        None => Ok(out),
    }
}

/// Least-squares slope of `log e` against `log t` over `t ∈ [t_lo, t_hi]`.
pub fn loglog_slope(series: &[(f64, f64)], t_lo: f64, t_hi: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, e)| *t >= t_lo && *t <= t_hi && *e > 0.0)
        .map(|(t, e)| (t.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(invalid(format!("fewer than two points in [{t_lo}, {t_hi}]")));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Outcome of one long-time run of the stability study.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub alpha: f64,
    pub theta: f64,
    pub tau: f64,
    /// `(t_n, U^n(π/2))` (nodal value closest to `π/2`).
    pub midpoint: Vec<(f64, f64)>,
    /// `(t_n, ‖U^n‖_∞)`.
    pub sup_norm: Vec<(f64, f64)>,
    /// `(t_n, ‖U^n − c_n v_h‖_∞)` with `c_n v_h` the component along the
    /// initial datum. Errors in the other discrete modes live here.
    pub transverse: Vec<(f64, f64)>,
    pub initial_max: f64,
    pub peak: f64,
    /// Step at which the solver aborted on a non-finite or huge solution.
    pub blowup_step: Option<usize>,
}

impl StabilityReport {
    /// Non-finite values or growth past ten times the initial maximum.
    pub fn unstable(&self) -> bool {
        self.blowup_step.is_some() || !self.peak.is_finite() || self.peak > 10.0 * self.initial_max
    }

    /// Sup-norm never exceeds the initial maximum (up to rounding).
    pub fn bounded(&self) -> bool {
        !self.unstable() && self.peak <= self.initial_max * (1.0 + 1e-12)
    }

    /// Per-step growth factor of the transverse part, fitted on the second
    /// half of the run. Values above one mean the scheme amplifies
    /// perturbations even when they start at rounding level.
    pub fn transverse_growth(&self) -> Option<f64> {
        let half = self.transverse.len() / 2;
        let pts: Vec<(f64, f64)> = self.transverse[half..]
            .iter()
            .filter(|(_, r)| *r > 0.0 && r.is_finite())
            .map(|(t, r)| (*t / self.tau, r.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
        Some((sxy / sxx).exp())
    }
}

/// Long-time run on the Example 3 data (`f = 0`, `v = sin x`).
pub fn run_stability(alpha: f64, theta: f64, tau: f64, t_final: f64, n_cells: usize) -> Result<StabilityReport> {
    let n = steps_to(t_final, tau)?;
    let params = SchemeParams::new(alpha, theta, tau, n)?;
    let problem = ModelProblem::Ex3.build(params, n_cells, Scheme::Corrected)?;
    let mid = match &problem.system {
        SpatialSystem::Fem(sys) => {
            let i = ((PI / 2.0) / sys.mesh.h()).round() as usize;
            i.clamp(1, problem.dof()) - 1
        }
        SpatialSystem::Scalar { .. } => 0,
    };
    let v = &problem.initial;
    let initial_max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let mut midpoint = Vec::with_capacity(n + 1);
    let mut sup_norm = Vec::with_capacity(n + 1);
    let mut transverse = Vec::with_capacity(n + 1);
    let outcome = run(&problem, HistoryMode::Standard, |_, t, u| {
        midpoint.push((t, u[mid]));
        sup_norm.push((t, u.iter().fold(0.0f64, |m, x| m.max(x.abs()))));
        let c = u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / vv;
        let r = u.iter().zip(v).fold(0.0f64, |m, (a, b)| m.max((a - c * b).abs()));
        transverse.push((t, r));
    });
    let blowup_step = match outcome {
        Ok(_) => None,
        Err(Error::Instability { step, .. }) => Some(step),
        Err(e) => return Err(e),
    };
    let peak = sup_norm
        .iter()
        .map(|p| p.1)
        .fold(0.0f64, |m, x| if x.is_nan() { f64::NAN } else { m.max(x) });
    Ok(StabilityReport {
        alpha,
        theta,
        tau,
        midpoint,
        sup_norm,
        transverse,
        initial_max,
        peak,
        blowup_step,
    })
}

/// One entry of a fast-weight accuracy sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastWeightRow {
    pub n: usize,
    pub level: usize,
    pub exact: f64,
    pub fast: f64,
    pub abs_error: f64,
}

/// Lowest Talbot level whose lag window contains `n`.
pub fn level_for_lag(n: usize, base: usize) -> usize {
    let mut level = 1;
    let mut span = base;
    while 2 * span - 2 < n {
        level += 1;
        span *= base;
    }
    level
}

/// Exact versus quadrature weights for `n = 1..=n_max`.
pub fn run_fast_accuracy(
    alpha: f64,
    theta: f64,
    algorithm: FastAlgorithm,
    config: FastConfig,
    n_max: usize,
) -> Result<Vec<FastWeightRow>> {
    if n_max == 0 {
        return Err(invalid("n_max must be positive"));
    }
    // the quadrature is invariant under τ; any positive step works
    let params = SchemeParams::new(alpha, theta, 1.0 / n_max as f64, n_max)?;
    let exact = sftr_weights(alpha, theta, n_max)?;
    let mut levels: Vec<Option<TalbotLevel>> = Vec::new();
    let mut rows = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let l = level_for_lag(n, config.base);
        if levels.len() < l {
            levels.resize(l, None);
        }
        if levels[l - 1].is_none() {
            levels[l - 1] = Some(TalbotLevel::new(l, config.base, config.kc, params.tau)?);
        }
        let level = levels[l - 1].as_ref().expect("just built");
        let fast = fast_weight(n, level, algorithm, &params)?;
        rows.push(FastWeightRow {
            n,
            level: l,
            exact: exact[n],
            fast,
            abs_error: (fast - exact[n]).abs(),
        });
    }
    Ok(rows)
}

/// One timing measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingRow {
    pub n_steps: usize,
    pub wall_seconds: f64,
    pub history_entries_peak: usize,
    pub accumulator_updates: u64,
}

/// Problem used for timing sweeps: Example 2(i) data, `T = 1`.
pub fn timing_problem(alpha: f64, theta: f64, n_steps: usize, n_cells: usize) -> Result<DiscreteProblem> {
    let params = SchemeParams::with_horizon(alpha, theta, 1.0, n_steps)?;
    ModelProblem::Ex2i.build(params, n_cells, Scheme::Corrected)
}

/// Times a full run; reports the best of `repeats` wall-clock measurements.
pub fn time_run(problem: &DiscreteProblem, mode: HistoryMode, repeats: usize) -> Result<TimingRow> {
    let mut best = f64::INFINITY;
    let mut stats = None;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        let s = run(problem, mode, |_, _, _| {})?;
        best = best.min(start.elapsed().as_secs_f64());
        stats = Some(s);
    }
    let stats = stats.expect("at least one repeat");
    Ok(TimingRow {
        n_steps: problem.params.n_steps,
        wall_seconds: best,
        history_entries_peak: stats.peak_history_entries,
        accumulator_updates: stats.accumulator_updates,
    })
}

/// Timing rows for each `N` in `n_list`, run sequentially.
pub fn run_fast_timing(
    alpha: f64,
    theta: f64,
    n_list: &[usize],
    n_cells: usize,
    mode: HistoryMode,
    repeats: usize,
) -> Result<Vec<TimingRow>> {
    n_list
        .iter()
        .map(|&n| time_run(&timing_problem(alpha, theta, n, n_cells)?, mode, repeats))
        .collect()
}

/// `max_n ‖U_fast^n − U_std^n‖_∞ / max_n ‖U_std^n‖_∞`.
pub fn fast_deviation(problem: &DiscreteProblem, config: FastConfig) -> Result<f64> {
    let mut reference = Vec::with_capacity(problem.params.n_steps + 1);
    run(problem, HistoryMode::Standard, |_, _, u| reference.push(u.to_vec()))?;
    let scale = reference
        .iter()
        .flat_map(|u| u.iter())
        .fold(0.0f64, |m, x| m.max(x.abs()));
    let mut dev = 0.0f64;
    run(problem, HistoryMode::Fast(config), |n, _, u| {
        for (a, b) in u.iter().zip(&reference[n]) {
            dev = dev.max((a - b).abs());
        }
    })?;
    Ok(dev / scale.max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_follow_error_ratios() {
        let row = RateTableRow::new(0.5, 0.1, dyadic_taus(5, 7), vec![4e-4, 1e-4, 2.5e-5]);
        assert_eq!(row.rates.len(), 2);
        assert_eq!(row.rates[0], (4e-4f64 / 1e-4).log2());
        let row = RateTableRow::new(0.5, 0.1, dyadic_taus(5, 6), vec![0.0, 0.0]);
        assert!(row.rates[0].is_nan());
    }

    #[test]
    fn spec_validation() {
        let mut spec = ExperimentSpec::new(Example::Ex1);
        assert!(spec.validate().is_ok());
        spec.taus = vec![0.25, 0.5];
        assert!(spec.validate().is_err());
        spec.taus = vec![0.3];
        assert!(spec.validate().is_err());
        let mut spec = ExperimentSpec::new(Example::Ex2ii);
        spec.reference_tau = 1.0 / 1024.0;
        assert!(spec.validate().is_err());
        assert!(steps_to(0.5, 1.0 / 32.0).unwrap() == 16);
    }

    #[test]
    fn lag_levels() {
        assert_eq!(level_for_lag(1, 5), 1);
        assert_eq!(level_for_lag(8, 5), 1);
        assert_eq!(level_for_lag(9, 5), 2);
        assert_eq!(level_for_lag(48, 5), 2);
        assert_eq!(level_for_lag(50, 5), 3);
        assert_eq!(level_for_lag(248, 5), 3);
    }

    #[test]
    fn slope_of_power_law() {
        let s: Vec<(f64, f64)> = (1..100).map(|i| (i as f64 * 0.01, 3.0 * (i as f64 * 0.01).powf(-1.5))).collect();
        assert!((loglog_slope(&s, 0.01, 0.1).unwrap() + 1.5).abs() < 1e-12);
    }

    #[test]
    fn scalar_problem_tracks_exact() {
        let params = SchemeParams::new(0.5, 0.25, 1.0 / 64.0, 64).unwrap();
        let s = error_time_series(ModelProblem::Scalar, params, 0, Scheme::Corrected, HistoryMode::Standard)
            .unwrap();
        assert!(s.last().unwrap().1 < 1e-3);
    }

    #[test]
    fn transverse_growth_separates_theta() {
        let tau = 5.0 / 512.0;
        let bad = run_stability(0.8, 0.509, tau, 5.0, 100).unwrap();
        let good = run_stability(0.8, 0.499, tau, 5.0, 100).unwrap();
        assert!(bad.transverse_growth().unwrap() > 1.01);
        assert!(good.bounded());
        assert!(good.transverse.last().unwrap().1 < 1e-12);
    }

    #[test]
    fn coarse_example1_converges() {
        let mut spec = ExperimentSpec::new(Example::Ex1);
        spec.alphas = vec![0.5];
        spec.thetas = vec![0.3];
        spec.taus = dyadic_taus(4, 6);
        spec.n_cells = 400;
        let t = run_example1(&spec).unwrap();
        let r = t.row(0.5, 0.3).unwrap().finest_rate().unwrap();
        assert!((r - 2.0).abs() < 0.15, "rate {r}");
    }
}
