//! Fully discrete schemes for `D_t^α w − Δ_h w = f_h + Δ_h v_h`:
//! uncorrected SFTR, SFTR with the first-step correction, the Crank–Nicolson
//! limit `θ = ½`, and the Crank–Nicolson + fractional BDF2 variant.
//!
//! Every step solves
//!
//! ```text
//! [τ^{−α} ω_0 M + (1−θ) A] W^n = −M H_n − θ A W^{n−1} + L_n
//! ```
//!
//! where `H_n = τ^{−α} Σ_{k<n} ω_{n−k} W^k` is supplied by a
//! [`HistorySum`] implementation and `L_n` is the load of step `n`.

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::fast::{FastConfig, FastHistoryState};
use crate::fem::{Fem1dSystem, TriDiag, TriDiagFactor};
use crate::weights::{weights_of_kind, SchemeParams, WeightKind, WeightTable};

/// Sup-norm above which a run is declared unstable.
pub const BLOWUP_THRESHOLD: f64 = 1e12;

/// Spatial operator: a finite element system or the scalar test operator
/// `Δ_h = −λ`.
#[derive(Debug, Clone)]
pub enum SpatialSystem {
    Fem(Fem1dSystem),
    Scalar { lambda: f64 },
}

impl SpatialSystem {
    pub fn scalar(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(invalid(format!("scalar operator needs lambda >= 0, got {lambda}")));
        }
        Ok(SpatialSystem::Scalar { lambda })
    }

    pub fn dof(&self) -> usize {
        match self {
            SpatialSystem::Fem(sys) => sys.dof(),
            SpatialSystem::Scalar { .. } => 1,
        }
    }

    pub fn mass(&self) -> TriDiag {
        match self {
            SpatialSystem::Fem(sys) => sys.mass.clone(),
            SpatialSystem::Scalar { .. } => TriDiag::scalar(1.0),
        }
    }

    pub fn stiffness(&self) -> TriDiag {
        match self {
            SpatialSystem::Fem(sys) => sys.stiffness.clone(),
            SpatialSystem::Scalar { lambda } => TriDiag::scalar(*lambda),
        }
    }

    /// Discrete L² norm (`|x|` in scalar mode).
    pub fn norm(&self, coeffs: &[f64]) -> Result<f64> {
        match self {
            SpatialSystem::Fem(sys) => sys.l2_norm(coeffs),
            SpatialSystem::Scalar { .. } => {
                if coeffs.len() != 1 {
                    return Err(invalid("scalar system has exactly one unknown"));
                }
                Ok(coeffs[0].abs())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// SFTR without initial correction.
    NoCorrection,
    /// SFTR with the corrected first step.
    Corrected,
    /// SFTR at `θ = ½`; the correction terms vanish there.
    CrankNicolson,
    /// `θ`-interpolated fractional BDF2 with the SFTR first-step correction.
    CnFbdf2,
}

impl Scheme {
    pub fn weight_kind(self) -> WeightKind {
        match self {
            Scheme::CnFbdf2 => WeightKind::CnFbdf2,
            _ => WeightKind::Sftr,
        }
    }

    fn corrects_first_step(self) -> bool {
        matches!(self, Scheme::Corrected | Scheme::CnFbdf2)
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Scheme::NoCorrection),
            "corrected" => Ok(Scheme::Corrected),
            "cn" => Ok(Scheme::CrankNicolson),
            "cnfbdf2" => Ok(Scheme::CnFbdf2),
            other => Err(invalid(format!("unknown scheme '{other}'"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::NoCorrection => "plain",
            Scheme::Corrected => "corrected",
            Scheme::CrankNicolson => "cn",
            Scheme::CnFbdf2 => "cnfbdf2",
        })
    }
}

/// Time-dependent source `t ↦ f_h(t)` in coefficient form.
pub type Source = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// Source `g(t) · profile` for a fixed coefficient vector.
pub fn separable_source(g: impl Fn(f64) -> f64 + Send + Sync + 'static, profile: Vec<f64>) -> Source {
    Arc::new(move |t| {
        let s = g(t);
        profile.iter().map(|p| s * p).collect()
    })
}

#[derive(Clone)]
pub struct DiscreteProblem {
    pub system: SpatialSystem,
    /// Initial datum `v_h` (projected).
    pub initial: Vec<f64>,
    /// `f_h = P_h f`; `None` means `f ≡ 0`.
    pub source: Option<Source>,
    pub params: SchemeParams,
    pub scheme: Scheme,
}

impl std::fmt::Debug for DiscreteProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscreteProblem")
            .field("system", &self.system)
            .field("dof", &self.initial.len())
            .field("has_source", &self.source.is_some())
            .field("params", &self.params)
            .field("scheme", &self.scheme)
            .finish()
    }
}

impl DiscreteProblem {
    /// Validates the problem. `CrankNicolson` overrides `θ` with `½`.
    pub fn new(
        system: SpatialSystem,
        initial: Vec<f64>,
        source: Option<Source>,
        mut params: SchemeParams,
        scheme: Scheme,
    ) -> Result<Self> {
        if initial.len() != system.dof() {
            return Err(invalid(format!(
                "initial datum has {} entries, system has {} unknowns",
                initial.len(),
                system.dof()
            )));
        }
        if scheme == Scheme::CrankNicolson {
            params.theta = 0.5;
        }
        Ok(Self {
            system,
            initial,
            source,
            params,
            scheme,
        })
    }

    pub fn dof(&self) -> usize {
        self.system.dof()
    }

    pub fn weights(&self) -> Result<WeightTable> {
        weights_of_kind(
            self.scheme.weight_kind(),
            self.params.alpha,
            self.params.theta,
            self.params.n_steps,
        )
    }

    fn sample_source(&self, t: f64) -> Result<Vec<f64>> {
        match &self.source {
            Some(f) => {
                let v = f(t);
                if v.len() != self.dof() {
                    return Err(invalid(format!(
                        "source returned {} entries, expected {}",
                        v.len(),
                        self.dof()
                    )));
                }
                Ok(v)
            }
            None => Ok(vec![0.0; self.dof()]),
        }
    }
}

/// Supplies `H_n = τ^{−α} Σ_{k=0}^{n−1} ω_{n−k} W^k` to the stepping loop.
pub trait HistorySum {
    /// Hands over `W^k`; called once per level, in order, starting at `k = 0`.
    fn record(&mut self, k: usize, level: &[f64]) -> Result<()>;

    /// Writes `H_n` into `out`. Requires levels `0..n` to have been recorded.
    fn history(&mut self, n: usize, out: &mut [f64]) -> Result<()>;

    /// Number of dof-length vectors currently retained.
    fn retained_entries(&self) -> usize;

    /// Elementary accumulator updates performed so far (zero for the direct
    /// sum).
    fn accumulator_updates(&self) -> u64 {
        0
    }
}

/// `out += Σ_{k=from}^{n−1} ω_{n−k} W^k`, summed from the newest level down.
pub(crate) fn exact_window_sum<'a>(
    weights: &[f64],
    n: usize,
    levels: impl DoubleEndedIterator<Item = (usize, &'a [f64])>,
    out: &mut [f64],
) {
    for (k, w) in levels.rev() {
        let c = weights[n - k];
        for (o, x) in out.iter_mut().zip(w) {
            *o += c * x;
        }
    }
}

/// Direct O(n) summation over the full stored history.
#[derive(Debug, Clone)]
pub struct StandardHistory {
    weights: Vec<f64>,
    scale: f64,
    levels: Vec<Vec<f64>>,
}

impl StandardHistory {
    pub fn new(weights: &WeightTable, tau: f64) -> Self {
        Self {
            weights: weights.as_slice().to_vec(),
            scale: tau.powf(-weights.alpha()),
            levels: Vec::new(),
        }
    }
}

impl HistorySum for StandardHistory {
    fn record(&mut self, k: usize, level: &[f64]) -> Result<()> {
        if k != self.levels.len() {
            return Err(Error::StaleHistory {
                expected: self.levels.len(),
                have: k,
            });
        }
        self.levels.push(level.to_vec());
        Ok(())
    }

    fn history(&mut self, n: usize, out: &mut [f64]) -> Result<()> {
        if self.levels.len() < n || n >= self.weights.len() + 1 {
            return Err(Error::StaleHistory {
                expected: n,
                have: self.levels.len(),
            });
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        exact_window_sum(
            &self.weights,
            n,
            self.levels[..n].iter().enumerate().map(|(k, v)| (k, v.as_slice())),
            out,
        );
        out.iter_mut().for_each(|o| *o *= self.scale);
        Ok(())
    }

    fn retained_entries(&self) -> usize {
        self.levels.len()
    }
}

/// How the convolution history is summed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HistoryMode {
    Standard,
    Fast(FastConfig),
}

/// Left-hand operator `τ^{−α} ω_0 M + (1−θ) A`, constant across steps.
pub fn step_system_matrix(problem: &DiscreteProblem, weights: &WeightTable) -> Result<TriDiag> {
    if weights.kind() != problem.scheme.weight_kind() {
        return Err(invalid(format!(
            "weight table of kind {} does not match scheme {}",
            weights.kind(),
            problem.scheme
        )));
    }
    let p = &problem.params;
    let lead = p.tau.powf(-p.alpha) * weights[0];
    problem
        .system
        .mass()
        .combine(lead, &problem.system.stiffness(), 1.0 - p.theta)
}

/// Coefficients `(c_prev, c_cur, c_v)` of the step-`n` load
/// `M (c_prev f^{n−1} + c_cur f^n) − c_v A v_h`.
pub fn load_coefficients(scheme: Scheme, theta: f64, n: usize) -> (f64, f64, f64) {
    if n == 1 && scheme.corrects_first_step() {
        (0.5, 1.0 - theta, 1.5 - theta)
    } else {
        (theta, 1.0 - theta, 1.0)
    }
}

/// Assembled load vector of step `n` given `f^{n−1}`, `f^n` and `A v_h`.
pub fn assemble_load(
    mass: &TriDiag,
    scheme: Scheme,
    theta: f64,
    n: usize,
    f_prev: &[f64],
    f_cur: &[f64],
    stiff_v: &[f64],
) -> Vec<f64> {
    let (c_prev, c_cur, c_v) = load_coefficients(scheme, theta, n);
    let mixed: Vec<f64> = f_prev
        .iter()
        .zip(f_cur)
        .map(|(a, b)| c_prev * a + c_cur * b)
        .collect();
    let mut load = mass.mul_vec(&mixed);
    for (l, av) in load.iter_mut().zip(stiff_v) {
        *l -= c_v * av;
    }
    load
}

/// Counters collected over one run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunStats {
    pub steps: usize,
    pub peak_history_entries: usize,
    pub accumulator_updates: u64,
}

/// Numerical solution `U^n = W^n + v_h` at `t_n = nτ`, `n = 0..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionHistory {
    pub times: Vec<f64>,
    pub levels: Vec<Vec<f64>>,
}

impl SolutionHistory {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn last(&self) -> &[f64] {
        self.levels.last().expect("history holds U^0")
    }
}

fn history_backend(
    problem: &DiscreteProblem,
    weights: &WeightTable,
    mode: HistoryMode,
) -> Result<Box<dyn HistorySum>> {
    match mode {
        HistoryMode::Standard => Ok(Box::new(StandardHistory::new(weights, problem.params.tau))),
        HistoryMode::Fast(cfg) => {
            if weights.kind() != WeightKind::Sftr {
                return Err(invalid("fast history summation is only available for SFTR weights"));
            }
            Ok(Box::new(FastHistoryState::new(
                cfg,
                problem.params,
                weights,
                problem.dof(),
            )?))
        }
    }
}

/// Runs the scheme, handing `(n, t_n, U^n)` to `observer` for `n = 0..=N`.
///
/// Stops with [`Error::Instability`] at the first step whose solution is
/// non-finite or exceeds [`BLOWUP_THRESHOLD`] in sup-norm; the observer has
/// seen every level before that step.
pub fn run(
    problem: &DiscreteProblem,
    mode: HistoryMode,
    mut observer: impl FnMut(usize, f64, &[f64]),
) -> Result<RunStats> {
    let p = problem.params;
    let dof = problem.dof();
    let weights = problem.weights()?;
    let lhs = step_system_matrix(problem, &weights)?;
    let factor: TriDiagFactor = lhs.factorize()?;
    let mass = problem.system.mass();
    let stiffness = problem.system.stiffness();
    let stiff_v = stiffness.mul_vec(&problem.initial);

    let mut hist = history_backend(problem, &weights, mode)?;
    let mut stats = RunStats::default();

    let mut w_prev = vec![0.0; dof];
    hist.record(0, &w_prev)?;
    stats.peak_history_entries = hist.retained_entries();
    observer(0, 0.0, &problem.initial);

    let mut f_prev = problem.sample_source(0.0)?;
    let mut h = vec![0.0; dof];
    let mut mh = vec![0.0; dof];
    let mut aw = vec![0.0; dof];
    let mut u = vec![0.0; dof];

    for n in 1..=p.n_steps {
        let t = n as f64 * p.tau;
        let f_cur = problem.sample_source(t)?;
        let mut rhs = assemble_load(&mass, problem.scheme, p.theta, n, &f_prev, &f_cur, &stiff_v);

        hist.history(n, &mut h)?;
        mass.apply(&h, &mut mh);
        stiffness.apply(&w_prev, &mut aw);
        for i in 0..dof {
            rhs[i] -= mh[i] + p.theta * aw[i];
        }
        factor.solve_in_place(&mut rhs);
        let w = rhs;

        let sup = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if !sup.is_finite() || sup > BLOWUP_THRESHOLD {
            return Err(Error::Instability {
                step: n,
                time: t,
                norm: sup,
            });
        }

        hist.record(n, &w)?;
        stats.peak_history_entries = stats.peak_history_entries.max(hist.retained_entries());
        for i in 0..dof {
            u[i] = w[i] + problem.initial[i];
        }
        observer(n, t, &u);
        w_prev = w;
        f_prev = f_cur;
    }
    stats.steps = p.n_steps;
    stats.accumulator_updates = hist.accumulator_updates();
    Ok(stats)
}

/// Runs the scheme and keeps every level.
pub fn solve_with(problem: &DiscreteProblem, mode: HistoryMode) -> Result<(SolutionHistory, RunStats)> {
    let mut times = Vec::with_capacity(problem.params.n_steps + 1);
    let mut levels = Vec::with_capacity(problem.params.n_steps + 1);
    let stats = run(problem, mode, |_, t, u| {
        times.push(t);
        levels.push(u.to_vec());
    })?;
    Ok((SolutionHistory { times, levels }, stats))
}

/// Standard-history solve of an SFTR-type problem.
pub fn solve(problem: &DiscreteProblem) -> Result<SolutionHistory> {
    solve_with(problem, HistoryMode::Standard).map(|(h, _)| h)
}

/// Standard-history solve of the CN + fractional BDF2 scheme.
pub fn solve_cn_fbdf2(problem: &DiscreteProblem) -> Result<SolutionHistory> {
    if problem.scheme != Scheme::CnFbdf2 {
        return Err(invalid(format!(
            "solve_cn_fbdf2 needs the cnfbdf2 scheme, got {}",
            problem.scheme
        )));
    }
    solve(problem)
}

/// `(t_n, ‖U^n − exact(t_n)‖)` for every level.
pub fn error_series(
    system: &SpatialSystem,
    history: &SolutionHistory,
    exact: impl Fn(f64) -> Vec<f64>,
) -> Result<Vec<(f64, f64)>> {
    history
        .times
        .iter()
        .zip(&history.levels)
        .map(|(&t, u)| {
            let e = exact(t);
            if e.len() != u.len() {
                return Err(invalid("exact solution has the wrong length"));
            }
            let diff: Vec<f64> = u.iter().zip(&e).map(|(a, b)| a - b).collect();
            Ok((t, system.norm(&diff)?))
        })
        .collect()
}

/// Observed order `log2(e_τ / e_{τ/2})`.
pub fn observed_rate(coarse: f64, fine: f64) -> Result<f64> {
    if !(coarse > 0.0 && fine > 0.0) || !coarse.is_finite() || !fine.is_finite() {
        return Err(Error::UndefinedRate { coarse, fine });
    }
    Ok((coarse / fine).log2())
}
