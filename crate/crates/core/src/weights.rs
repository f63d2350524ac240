//! Convolution weights of the shifted fractional trapezoidal rule (SFTR) and
//! of the fractional BDF2 family.
//!
//! The SFTR weights are the Taylor coefficients of
//!
//! ```text
//! ω(ξ) = [ (1 − ξ) / ( ½(1 + ξ) + (θ/α)(1 − ξ) ) ]^α
//! ```
//!
//! and are produced by a three-term recursion in O(K). The fractional BDF2
//! weights are the coefficients of `(3/2 − 2ξ + ξ²/2)^α`, obtained with the
//! power-of-a-series recurrence. [`weights_series_oracle`] computes the SFTR
//! coefficients along that second route and exists to cross-check the
//! recursion.

use crate::error::{domain, invalid, Result};

/// Fractional order, shift, step size and step count of one discretization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    pub alpha: f64,
    pub theta: f64,
    pub tau: f64,
    pub n_steps: usize,
}

impl SchemeParams {
    /// `theta` is accepted on `[0, 1)`: values above one half are unstable but
    /// the instability experiment needs to run them.
    pub fn new(alpha: f64, theta: f64, tau: f64, n_steps: usize) -> Result<Self> {
        check_alpha_open(alpha)?;
        check_theta(theta)?;
        if !(tau.is_finite() && tau > 0.0) {
            return Err(domain(format!("tau must be positive and finite, got {tau}")));
        }
        if n_steps == 0 {
            return Err(domain("n_steps must be at least 1"));
        }
        Ok(Self {
            alpha,
            theta,
            tau,
            n_steps,
        })
    }

    /// Uniform grid on `[0, t_final]` with `n_steps` steps.
    pub fn with_horizon(alpha: f64, theta: f64, t_final: f64, n_steps: usize) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(domain(format!("t_final must be positive, got {t_final}")));
        }
        if n_steps == 0 {
            return Err(domain("n_steps must be at least 1"));
        }
        Self::new(alpha, theta, t_final / n_steps as f64, n_steps)
    }

    pub fn t_final(&self) -> f64 {
        self.tau * self.n_steps as f64
    }

    /// `μ0 = (2α/(α+2θ))^α`, which is also `ω_0`.
    pub fn mu0(&self) -> f64 {
        (2.0 * self.alpha / (self.alpha + 2.0 * self.theta)).powf(self.alpha)
    }

    /// `μ1 = (α−2θ)/(α+2θ)`.
    pub fn mu1(&self) -> f64 {
        (self.alpha - 2.0 * self.theta) / (self.alpha + 2.0 * self.theta)
    }
}

fn check_alpha_open(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

// The generators also accept α = 1, where the weights reduce to polynomials.
fn check_alpha_closed(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(domain(format!("alpha must lie in (0, 1], got {alpha}")))
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if (0.0..1.0).contains(&theta) {
        Ok(())
    } else {
        Err(domain(format!("theta must lie in [0, 1), got {theta}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightKind {
    /// Shifted fractional trapezoidal rule.
    Sftr,
    /// Fractional BDF2.
    Fbdf2,
    /// `(1 − θ + θξ)` times the fractional BDF2 generating function.
    CnFbdf2,
}

impl std::fmt::Display for WeightKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WeightKind::Sftr => "sftr",
            WeightKind::Fbdf2 => "fbdf2",
            WeightKind::CnFbdf2 => "cnfbdf2",
        })
    }
}

impl std::str::FromStr for WeightKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sftr" => Ok(WeightKind::Sftr),
            "fbdf2" => Ok(WeightKind::Fbdf2),
            "cnfbdf2" => Ok(WeightKind::CnFbdf2),
            other => Err(invalid(format!("unknown weight kind '{other}'"))),
        }
    }
}

/// Immutable table `ω_0..ω_K` of one generating function.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    kind: WeightKind,
    alpha: f64,
    theta: f64,
    weights: Vec<f64>,
}

impl WeightTable {
    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Shift parameter; zero for plain fBDF2 tables.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Largest index `K` held by the table.
    pub fn k_max(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn get(&self, k: usize) -> Option<f64> {
        self.weights.get(k).copied()
    }

    /// `Σ_{k=0}^{K} ω_k`.
    pub fn partial_sum(&self, upto: usize) -> f64 {
        self.weights[..=upto.min(self.k_max())].iter().sum()
    }
}

impl std::ops::Index<usize> for WeightTable {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.weights[k]
    }
}

/// SFTR weights `ω_0..ω_{k_max}` by the three-term recursion.
///
/// `theta = 0` recovers the fractional trapezoidal rule of convolution
/// quadrature.
pub fn sftr_weights(alpha: f64, theta: f64, k_max: usize) -> Result<WeightTable> {
    check_alpha_closed(alpha)?;
    check_theta(theta)?;

    let ratio = 2.0 * alpha / (alpha + 2.0 * theta);
    let lead = 2.0 * theta / alpha;
    let tail = (alpha - 2.0 * theta) / (2.0 * alpha);

    let mut w = Vec::with_capacity(k_max + 1);
    w.push(ratio.powf(alpha));
    if k_max >= 1 {
        w.push(-alpha * ratio.powf(alpha + 1.0));
    }
    for k in 2..=k_max {
        let kf = k as f64;
        let next = ratio / kf
            * ((lead * (kf - 1.0) - alpha) * w[k - 1] + tail * (kf - 2.0) * w[k - 2]);
        w.push(next);
    }

    Ok(WeightTable {
        kind: WeightKind::Sftr,
        alpha,
        theta,
        weights: w,
    })
}

/// Taylor coefficients of `p(ξ)^exponent` for a polynomial `p` with
/// `p(0) > 0`, by the recurrence
/// `k p_0 g_k = Σ_{j≥1} ((e+1) j − k) p_j g_{k−j}`.
pub fn power_series_pow(poly: &[f64], exponent: f64, k_max: usize) -> Result<Vec<f64>> {
    let p0 = *poly
        .first()
        .ok_or_else(|| invalid("polynomial must have at least one coefficient"))?;
    if !(p0 > 0.0) {
        return Err(domain(format!(
            "constant term must be positive for a real power, got {p0}"
        )));
    }
    let mut g = Vec::with_capacity(k_max + 1);
    g.push(p0.powf(exponent));
    for k in 1..=k_max {
        let kf = k as f64;
        let mut acc = 0.0;
        for (j, &pj) in poly.iter().enumerate().skip(1).take(k) {
            acc += ((exponent + 1.0) * j as f64 - kf) * pj * g[k - j];
        }
        g.push(acc / (kf * p0));
    }
    Ok(g)
}

/// SFTR weights computed independently of the recursion: the series of
/// `(1 − ξ)^α` and of `(½(1+ξ) + (θ/α)(1−ξ))^{−α}` are built with
/// [`power_series_pow`] and multiplied. O(K²); intended for verification.
pub fn weights_series_oracle(alpha: f64, theta: f64, k_max: usize) -> Result<WeightTable> {
    check_alpha_closed(alpha)?;
    check_theta(theta)?;
    let shift = theta / alpha;
    let numer = power_series_pow(&[1.0, -1.0], alpha, k_max)?;
    let denom = power_series_pow(&[0.5 + shift, 0.5 - shift], -alpha, k_max)?;
    let weights = (0..=k_max)
        .map(|k| (0..=k).map(|j| numer[j] * denom[k - j]).sum())
        .collect();
    Ok(WeightTable {
        kind: WeightKind::Sftr,
        alpha,
        theta,
        weights,
    })
}

/// Fractional BDF2 weights: coefficients of `(3/2 − 2ξ + ξ²/2)^α`.
pub fn fbdf2_weights(alpha: f64, k_max: usize) -> Result<WeightTable> {
    check_alpha_closed(alpha)?;
    let weights = power_series_pow(&[1.5, -2.0, 0.5], alpha, k_max)?;
    Ok(WeightTable {
        kind: WeightKind::Fbdf2,
        alpha,
        theta: 0.0,
        weights,
    })
}

/// Weights of `(1 − θ + θξ)(3/2 − 2ξ + ξ²/2)^α`, which shifts the fBDF2
/// approximation to `t_{n−θ}` by linear interpolation.
pub fn combined_cn_fbdf2_weights(alpha: f64, theta: f64, k_max: usize) -> Result<WeightTable> {
    check_theta(theta)?;
    let base = fbdf2_weights(alpha, k_max)?.weights;
    let weights = (0..=k_max)
        .map(|k| {
            let prev = if k > 0 { base[k - 1] } else { 0.0 };
            (1.0 - theta) * base[k] + theta * prev
        })
        .collect();
    Ok(WeightTable {
        kind: WeightKind::CnFbdf2,
        alpha,
        theta,
        weights,
    })
}

/// Builds the table of the requested family. `theta` is ignored for plain
/// fBDF2.
pub fn weights_of_kind(kind: WeightKind, alpha: f64, theta: f64, k_max: usize) -> Result<WeightTable> {
    match kind {
        WeightKind::Sftr => sftr_weights(alpha, theta, k_max),
        WeightKind::Fbdf2 => fbdf2_weights(alpha, k_max),
        WeightKind::CnFbdf2 => combined_cn_fbdf2_weights(alpha, theta, k_max),
    }
}
