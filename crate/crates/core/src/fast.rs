//! Fast summation of the SFTR convolution history.
//!
//! Each weight is written as a contour integral
//! `ω_n = τ^{α+1}/(2πi) ∫_C e_n(τλ) F(λ) dλ` over a Talbot contour and the
//! integral is discretized with the trapezoidal rule on `2K_C + 1` nodes.
//! Two factorizations are supported:
//!
//! * algorithm I: `F(λ) = λ^α`, `e_n = r^n q` with
//!   `r = (1 + z(½−θ/α)) / (1 − z(½+θ/α))`,
//!   `q = 1 / ([1 − z(½+θ/α)][1 + z(½−θ/α)])`;
//! * algorithm II: `F(λ) = [1/λ + (θ/α − ½)τ]^{−α}`, `r = q = 1/(1 − z)`.
//!
//! The history `0..n−1` is split into geometrically growing blocks. The
//! `M` most recent blocks (the near field) use exact weights. Block `ℓ > M`
//! only sees lags in `[B^{ℓ−1}, 2B^ℓ − 2]` and uses the quadrature of Talbot
//! level `ℓ`, whose contour is scaled to `T_ℓ = (2B^ℓ − 2)τ`. Its
//! contribution is carried by per-node accumulators obeying
//! `y ← r y + τ q W`, so each step costs O(K_C log_B n) vector updates and
//! memory stays at O(B^M + K_C log_B N) vectors.

use std::collections::VecDeque;

use num_complex::Complex64;

use crate::error::{domain, invalid, Error, Result};
use crate::stepping::{exact_window_sum, HistorySum};
use crate::weights::{SchemeParams, WeightKind, WeightTable};

/// Talbot contour shape constants.
pub const TALBOT_KAPPA: f64 = 0.5653;
pub const TALBOT_NU: f64 = 0.6443;
pub const TALBOT_IOTA: f64 = -0.4814;

/// Smallest lag whose fast weight is trusted at the default settings.
pub const FAST_WEIGHT_MIN_LAG: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FastAlgorithm {
    I,
    II,
}

impl std::str::FromStr for FastAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "I" | "i" => Ok(FastAlgorithm::I),
            "2" | "II" | "ii" => Ok(FastAlgorithm::II),
            other => Err(invalid(format!("unknown fast algorithm '{other}'"))),
        }
    }
}

impl std::fmt::Display for FastAlgorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FastAlgorithm::I => "1",
            FastAlgorithm::II => "2",
        })
    }
}

impl FastAlgorithm {
    /// Whether `θ` lies in the range where the weight quadrature is known to
    /// be accurate at `B = 5, K_C = 30`: `θ/α ∈ (1/7, 2)` for I and
    /// `θ ∈ [α/2, ½]` for II.
    pub fn theta_in_window(self, alpha: f64, theta: f64) -> bool {
        match self {
            FastAlgorithm::I => {
                let ratio = theta / alpha;
                ratio > 1.0 / 7.0 && ratio < 2.0
            }
            FastAlgorithm::II => theta >= 0.5 * alpha && theta <= 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FastConfig {
    pub algorithm: FastAlgorithm,
    /// Block growth factor `B`.
    pub base: usize,
    /// Quadrature half-width `K_C` (the rule has `2K_C + 1` nodes).
    pub kc: usize,
    /// Number of near-field blocks `M` summed with exact weights.
    pub near_levels: usize,
}

impl Default for FastConfig {
    fn default() -> Self {
        Self {
            algorithm: FastAlgorithm::I,
            base: 5,
            kc: 30,
            near_levels: 2,
        }
    }
}

impl FastConfig {
    pub fn with_algorithm(algorithm: FastAlgorithm) -> Self {
        Self {
            algorithm,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.base < 2 {
            return Err(domain(format!("block base B must be at least 2, got {}", self.base)));
        }
        if self.kc == 0 {
            return Err(domain("K_C must be positive"));
        }
        if self.near_levels == 0 {
            return Err(domain("at least one near-field level is required"));
        }
        Ok(())
    }
}

/// Talbot contour `λ(ϑ, ς) = ς((ϑ cot ϑ + iκϑ)ν + ι)` for `|ϑ| < π`.
pub fn talbot_point(angle: f64, scale: f64) -> Result<Complex64> {
    check_angle(angle)?;
    let cot_term = if angle == 0.0 { 1.0 } else { angle / angle.tan() };
    Ok(scale * Complex64::new(cot_term * TALBOT_NU + TALBOT_IOTA, TALBOT_KAPPA * angle * TALBOT_NU))
}

/// `∂_ϑ λ(ϑ, ς) = ςν(cot ϑ − ϑ/sin²ϑ + iκ)`.
pub fn talbot_derivative(angle: f64, scale: f64) -> Result<Complex64> {
    check_angle(angle)?;
    // cot ϑ − ϑ/sin²ϑ = −2ϑ/3 − 4ϑ³/45 − … near 0
    let real = if angle.abs() < 1e-4 {
        -2.0 * angle / 3.0 - 4.0 * angle.powi(3) / 45.0
    } else {
        let s = angle.sin();
        angle.cos() / s - angle / (s * s)
    };
    Ok(scale * TALBOT_NU * Complex64::new(real, TALBOT_KAPPA))
}

fn check_angle(angle: f64) -> Result<()> {
    if angle.is_finite() && angle.abs() < std::f64::consts::PI {
        Ok(())
    } else {
        Err(domain(format!("Talbot angle must satisfy |theta| < pi, got {angle}")))
    }
}

const POLE_TOL: f64 = 1e-14;

/// `F^{(i)}(λ)` on the principal branch.
pub fn kernel_f(algorithm: FastAlgorithm, lambda: Complex64, params: &SchemeParams) -> Result<Complex64> {
    if lambda.norm() < POLE_TOL {
        return Err(Error::Pole(format!("F evaluated at lambda = {lambda}")));
    }
    match algorithm {
        FastAlgorithm::I => Ok(lambda.powf(params.alpha)),
        FastAlgorithm::II => {
            let shift = (params.theta / params.alpha - 0.5) * params.tau;
            let base = lambda.inv() + shift;
            if base.norm() < POLE_TOL {
                return Err(Error::Pole(format!(
                    "F^(2) singular at lambda = {lambda}: theta violates the sector condition"
                )));
            }
            Ok(base.powf(-params.alpha))
        }
    }
}

/// `(r(z), q(z))` of the chosen factorization.
pub fn kernel_rq(algorithm: FastAlgorithm, z: Complex64, params: &SchemeParams) -> Result<(Complex64, Complex64)> {
    match algorithm {
        FastAlgorithm::I => {
            let a = params.theta / params.alpha;
            let den = 1.0 - z * (0.5 + a);
            let num = 1.0 + z * (0.5 - a);
            if den.norm() < POLE_TOL || num.norm() < POLE_TOL {
                return Err(Error::Pole(format!("e^(1) has a pole at z = {z}")));
            }
            Ok((num / den, (den * num).inv()))
        }
        FastAlgorithm::II => {
            let den = 1.0 - z;
            if den.norm() < POLE_TOL {
                return Err(Error::Pole(format!("e^(2) has a pole at z = {z}")));
            }
            let r = den.inv();
            Ok((r, r))
        }
    }
}

/// Coefficient `e_n(z)` of the kernel's generating function, by repeated
/// multiplication. For algorithm I the `n = 0` coefficient is
/// `(½+θ/α)/(1 − z(½+θ/α))` rather than `q`.
pub fn kernel_e(algorithm: FastAlgorithm, n: usize, z: Complex64, params: &SchemeParams) -> Result<Complex64> {
    let (r, q) = kernel_rq(algorithm, z, params)?;
    if n == 0 && algorithm == FastAlgorithm::I {
        let c = 0.5 + params.theta / params.alpha;
        return Ok(c / (1.0 - z * c));
    }
    let mut e = q;
    for _ in 0..n {
        e *= r;
    }
    Ok(e)
}

/// Quadrature nodes and weights of one Talbot level, indexed `j = −K_C..K_C`.
#[derive(Debug, Clone)]
pub struct TalbotLevel {
    pub level: usize,
    pub base: usize,
    pub kc: usize,
    /// Right end `T_ℓ = (2B^ℓ − 2)τ` of the level's time window.
    pub t_end: f64,
    pub nodes: Vec<Complex64>,
    pub quad_weights: Vec<Complex64>,
}

impl TalbotLevel {
    pub fn new(level: usize, base: usize, kc: usize, tau: f64) -> Result<Self> {
        if level == 0 {
            return Err(domain("Talbot levels start at 1"));
        }
        let span = checked_pow(base, level)
            .ok_or_else(|| domain(format!("level {level} overflows for base {base}")))?;
        let t_end = (2 * span - 2) as f64 * tau;
        let scale = kc as f64 / t_end;
        let count = 2 * kc + 1;
        let mut nodes = Vec::with_capacity(count);
        let mut quad_weights = Vec::with_capacity(count);
        let denom = Complex64::new(0.0, 2.0 * (kc as f64 + 1.0));
        for idx in 0..count {
            let j = idx as f64 - kc as f64;
            let angle = j * std::f64::consts::PI / (kc as f64 + 1.0);
            nodes.push(talbot_point(angle, scale)?);
            quad_weights.push(talbot_derivative(angle, scale)? / denom);
        }
        Ok(Self {
            level,
            base,
            kc,
            t_end,
            nodes,
            quad_weights,
        })
    }

    /// Lags `[B^{ℓ−1}, 2B^ℓ − 2]` the level is built for.
    pub fn lag_window(&self) -> (usize, usize) {
        let lo = checked_pow(self.base, self.level - 1).unwrap_or(usize::MAX);
        let hi = checked_pow(self.base, self.level).map_or(usize::MAX, |s| 2 * s - 2);
        (lo, hi)
    }

    /// Node `λ_j`, `j ∈ [−K_C, K_C]`.
    pub fn node(&self, j: isize) -> Complex64 {
        self.nodes[(j + self.kc as isize) as usize]
    }

    pub fn weight(&self, j: isize) -> Complex64 {
        self.quad_weights[(j + self.kc as isize) as usize]
    }

    /// Largest real part of `τλ_j` over the nodes.
    pub fn max_scaled_real(&self, tau: f64) -> f64 {
        self.nodes
            .iter()
            .map(|l| (l * tau).re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    u32::try_from(exp).ok().and_then(|e| base.checked_pow(e))
}

/// Full complex quadrature sum `τ^{α+1} Σ_j w_j e_n(τλ_j) F(λ_j)`.
pub fn fast_weight_sum(
    n: usize,
    level: &TalbotLevel,
    algorithm: FastAlgorithm,
    params: &SchemeParams,
) -> Result<Complex64> {
    let (lo, hi) = level.lag_window();
    if n < lo || n > hi {
        return Err(Error::LevelMismatch {
            lag: n,
            level: level.level,
            lo,
            hi,
        });
    }
    let tau = params.tau;
    let mut sum = Complex64::new(0.0, 0.0);
    for (lambda, w) in level.nodes.iter().zip(&level.quad_weights) {
        let e = kernel_e(algorithm, n, lambda * tau, params)?;
        sum += w * e * kernel_f(algorithm, *lambda, params)?;
    }
    Ok(sum * tau.powf(params.alpha + 1.0))
}

/// Quadrature approximation of `ω_n` on the given level (real part of
/// [`fast_weight_sum`]).
pub fn fast_weight(n: usize, level: &TalbotLevel, algorithm: FastAlgorithm, params: &SchemeParams) -> Result<f64> {
    fast_weight_sum(n, level, algorithm, params).map(|z| z.re)
}

/// `b_ℓ = max(0, B^ℓ(⌊(n+1)/B^ℓ⌋ − 1))`, the start of block `ℓ` at step `n`.
/// Block `ℓ` is `[b_ℓ, b_{ℓ−1})`; its lags `n − k` lie in
/// `[B^{ℓ−1} + 1, 2B^ℓ − 2]`.
pub fn block_start(n: usize, base: usize, level: usize) -> usize {
    if level == 0 {
        return n;
    }
    match checked_pow(base, level) {
        Some(span) => {
            let q = (n + 1) / span;
            if q <= 1 {
                0
            } else {
                span * (q - 1)
            }
        }
        None => 0,
    }
}

/// Block boundaries `n = b_0 > b_1 > … > b_L = 0` at step `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockDecomposition {
    pub boundaries: Vec<usize>,
    pub near_levels: usize,
}

impl BlockDecomposition {
    /// `L`, the number of blocks.
    pub fn len(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// History indices of block `ℓ ∈ 1..=L`.
    pub fn block(&self, level: usize) -> std::ops::Range<usize> {
        self.boundaries[level]..self.boundaries[level - 1]
    }

    /// True when every block is in the near field and the sum is exact.
    pub fn near_only(&self) -> bool {
        self.len() <= self.near_levels
    }
}

pub fn block_decomposition(n: usize, base: usize, near_levels: usize) -> Result<BlockDecomposition> {
    if n == 0 {
        return Err(domain("block decomposition needs n >= 1"));
    }
    if base < 2 {
        return Err(domain(format!("block base must be at least 2, got {base}")));
    }
    let mut boundaries = vec![n];
    let mut level = 1;
    loop {
        let b = block_start(n, base, level);
        boundaries.push(b);
        if b == 0 {
            break;
        }
        level += 1;
    }
    Ok(BlockDecomposition {
        boundaries,
        near_levels,
    })
}

/// `y ← r y + τ q W` for one quadrature node; `y` and `w` have length `dof`.
pub fn update_accumulator(y: &mut [Complex64], w: &[f64], r: Complex64, q: Complex64, tau: f64) {
    let tq = q * tau;
    for (yi, &wi) in y.iter_mut().zip(w) {
        *yi = r * *yi + tq * wi;
    }
}

#[derive(Debug, Clone)]
struct Accumulator {
    start: usize,
    /// Node-major: `values[j * dof + i]`, `j = 0..=K_C`.
    values: Vec<Complex64>,
    /// `(end, values)`: the accumulator frozen after absorbing `end − 1`.
    snapshots: Vec<(usize, Vec<Complex64>)>,
}

#[derive(Debug, Clone)]
struct LevelState {
    level: usize,
    span: usize,
    sub_span: usize,
    /// Indices `k ≥ b_{ℓ−1}(N)` never enter this level's block.
    absorb_until: usize,
    /// Accumulators starting after `b_ℓ(N)` are never read.
    last_start: usize,
    r: Vec<Complex64>,
    tq: Vec<Complex64>,
    /// `w_j F(λ_j)`, doubled for `j ≥ 1` to account for the conjugate node.
    coef: Vec<Complex64>,
    accumulators: Vec<Accumulator>,
    power_end: usize,
    power_step: usize,
    powers: Vec<Complex64>,
}

/// Fast replacement for [`crate::stepping::StandardHistory`].
#[derive(Debug, Clone)]
pub struct FastHistoryState {
    config: FastConfig,
    dof: usize,
    scale: f64,
    near_weights: Vec<f64>,
    near: VecDeque<(usize, Vec<f64>)>,
    levels: Vec<LevelState>,
    horizon: usize,
    recorded: usize,
    updates: u64,
}

impl FastHistoryState {
    /// Sets up every Talbot level a run of `params.n_steps` steps will use.
    ///
    /// Levels are created upfront because a block's accumulators must absorb
    /// history from index 0 on, long before the block first becomes active.
    /// Knowing `N` also lets each level skip indices it will never read.
    pub fn new(config: FastConfig, params: SchemeParams, weights: &WeightTable, dof: usize) -> Result<Self> {
        config.validate()?;
        if weights.kind() != WeightKind::Sftr {
            return Err(invalid("fast history summation requires SFTR weights"));
        }
        if dof == 0 {
            return Err(invalid("dof must be positive"));
        }
        let near_span = checked_pow(config.base, config.near_levels)
            .ok_or_else(|| domain("near field too large"))?;
        let near_len = (2 * near_span).min(weights.len());
        let near_weights = weights.as_slice()[..near_len].to_vec();

        let n_total = params.n_steps;
        let mut levels = Vec::new();
        let mut level = config.near_levels + 1;
        // level ℓ is first used once b_{ℓ−1} > 0, i.e. n + 1 ≥ 2 B^{ℓ−1}
        while let Some(sub_span) = checked_pow(config.base, level - 1) {
            if n_total + 1 < 2 * sub_span {
                break;
            }
            let mut lv = Self::build_level(&config, &params, level, sub_span, dof)?;
            lv.absorb_until = block_start(n_total, config.base, level - 1);
            lv.last_start = block_start(n_total, config.base, level);
            levels.push(lv);
            level += 1;
        }

        Ok(Self {
            config,
            dof,
            scale: params.tau.powf(-params.alpha),
            near_weights,
            near: VecDeque::new(),
            levels,
            horizon: n_total,
            recorded: 0,
            updates: 0,
        })
    }

    fn build_level(
        config: &FastConfig,
        params: &SchemeParams,
        level: usize,
        sub_span: usize,
        dof: usize,
    ) -> Result<LevelState> {
        let talbot = TalbotLevel::new(level, config.base, config.kc, params.tau)?;
        let pole = match config.algorithm {
            FastAlgorithm::I => 1.0 / (0.5 + params.theta / params.alpha),
            FastAlgorithm::II => 1.0,
        };
        let reach = talbot.max_scaled_real(params.tau);
        if reach >= pole {
            return Err(Error::Pole(format!(
                "kernel pole z = {pole} is not to the right of Talbot level {level} (max Re = {reach})"
            )));
        }
        let kc = config.kc as isize;
        let mut r = Vec::with_capacity(config.kc + 1);
        let mut tq = Vec::with_capacity(config.kc + 1);
        let mut coef = Vec::with_capacity(config.kc + 1);
        for j in 0..=kc {
            let lambda = talbot.node(j);
            let (rj, qj) = kernel_rq(config.algorithm, lambda * params.tau, params)?;
            let c = talbot.weight(j) * kernel_f(config.algorithm, lambda, params)?;
            r.push(rj);
            tq.push(qj * params.tau);
            coef.push(if j == 0 { c } else { 2.0 * c });
        }
        let _ = dof;
        Ok(LevelState {
            level,
            span: sub_span * config.base,
            sub_span,
            absorb_until: usize::MAX,
            last_start: usize::MAX,
            r,
            tq,
            coef,
            accumulators: Vec::new(),
            power_end: usize::MAX,
            power_step: 0,
            powers: vec![Complex64::new(0.0, 0.0); config.kc + 1],
        })
    }

    pub fn config(&self) -> &FastConfig {
        &self.config
    }

    /// Talbot levels currently allocated.
    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    fn prune(&mut self, next_n: usize) {
        let base = self.config.base;
        let near_start = block_start(next_n, base, self.config.near_levels);
        while self.near.front().is_some_and(|(k, _)| *k < near_start) {
            self.near.pop_front();
        }
        for lv in &mut self.levels {
            let start = block_start(next_n, base, lv.level);
            let end = block_start(next_n, base, lv.level - 1);
            lv.accumulators.retain(|a| a.start >= start);
            for acc in &mut lv.accumulators {
                acc.snapshots.retain(|(e, _)| *e >= end);
            }
        }
    }
}

impl HistorySum for FastHistoryState {
    fn record(&mut self, k: usize, level: &[f64]) -> Result<()> {
        if k != self.recorded {
            return Err(Error::StaleHistory {
                expected: self.recorded,
                have: k,
            });
        }
        if level.len() != self.dof {
            return Err(invalid(format!(
                "history entry has {} entries, expected {}",
                level.len(),
                self.dof
            )));
        }
        let dof = self.dof;
        let nodes = self.config.kc + 1;
        for lv in &mut self.levels {
            if k >= lv.absorb_until {
                continue;
            }
            if k % lv.span == 0 && k <= lv.last_start {
                lv.accumulators.push(Accumulator {
                    start: k,
                    values: vec![Complex64::new(0.0, 0.0); nodes * dof],
                    snapshots: Vec::new(),
                });
            }
            for acc in &mut lv.accumulators {
                for j in 0..nodes {
                    let y = &mut acc.values[j * dof..(j + 1) * dof];
                    let (r, tq) = (lv.r[j], lv.tq[j]);
                    for (yi, &wi) in y.iter_mut().zip(level) {
                        *yi = r * *yi + tq * wi;
                    }
                }
                self.updates += nodes as u64;
            }
            if (k + 1) % lv.sub_span == 0 {
                for acc in &mut lv.accumulators {
                    acc.snapshots.push((k + 1, acc.values.clone()));
                }
            }
        }
        self.near.push_back((k, level.to_vec()));
        self.recorded = k + 1;
        self.prune(k + 1);
        Ok(())
    }

    fn history(&mut self, n: usize, out: &mut [f64]) -> Result<()> {
        if n > self.horizon {
            return Err(domain(format!("step {n} is past the horizon N = {}", self.horizon)));
        }
        if self.recorded != n {
            return Err(Error::StaleHistory {
                expected: n,
                have: self.recorded,
            });
        }
        let base = self.config.base;
        let near_start = block_start(n, base, self.config.near_levels);
        out.iter_mut().for_each(|o| *o = 0.0);
        exact_window_sum(
            &self.near_weights,
            n,
            self.near
                .iter()
                .filter(|(k, _)| *k >= near_start && *k < n)
                .map(|(k, v)| (*k, v.as_slice())),
            out,
        );
        out.iter_mut().for_each(|o| *o *= self.scale);

        let dof = self.dof;
        for lv in &mut self.levels {
            let lo = block_start(n, base, lv.level);
            let hi = block_start(n, base, lv.level - 1);
            if hi == 0 {
                break;
            }
            if hi == lo {
                continue;
            }
            let y = lv
                .accumulators
                .iter()
                .find(|a| a.start == lo)
                .and_then(|a| a.snapshots.iter().find(|(e, _)| *e == hi))
                .map(|(_, v)| v)
                .ok_or(Error::StaleHistory {
                    expected: hi,
                    have: lo,
                })?;

            // r_j^{n − (b_{ℓ−1} − 1)}, advanced by one factor per step while
            // the block end stays put
            if lv.power_end == hi && lv.power_step + 1 == n {
                for (p, r) in lv.powers.iter_mut().zip(&lv.r) {
                    *p *= r;
                }
            } else {
                let m = (n - (hi - 1)) as i32;
                for (p, r) in lv.powers.iter_mut().zip(&lv.r) {
                    *p = r.powi(m);
                }
                lv.power_end = hi;
            }
            lv.power_step = n;

            for (j, (c, p)) in lv.coef.iter().zip(&lv.powers).enumerate() {
                let cp = c * p;
                for (o, yi) in out.iter_mut().zip(&y[j * dof..(j + 1) * dof]) {
                    *o += (cp * yi).re;
                }
            }
        }
        Ok(())
    }

    fn retained_entries(&self) -> usize {
        let nodes = self.config.kc + 1;
        let far: usize = self
            .levels
            .iter()
            .flat_map(|lv| &lv.accumulators)
            .map(|a| (1 + a.snapshots.len()) * nodes)
            .sum();
        self.near.len() + far
    }

    fn accumulator_updates(&self) -> u64 {
        self.updates
    }
}

/// Computes `H_n` from an advanced state.
pub fn fast_history_sum(state: &mut FastHistoryState, n: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; state.dof];
    state.history(n, &mut out)?;
    Ok(out)
}
