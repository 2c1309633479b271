//! Parameters, scaling and coefficient functions of the load-balancing network.
//!
//! The network has `d` parallel infinite-server stations. Station `i` receives
//! its own Poisson stream of intensity `lambda_i` and a share of a free stream
//! of intensity `lambda0`, each free arrival joining the station minimizing
//! `alpha_i * Q_i`. Below the threshold `N_i` customers leave one at a time at
//! unit rate each; at or above it they are served in pairs.
//!
//! Station indices are 0-based throughout the crate.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Model parameters for one value of the scale parameter `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<S> {
    pub d: usize,
    /// Station costs, all strictly positive.
    pub alpha: Vec<S>,
    /// Free-stream intensity coefficient.
    pub mu0: S,
    /// Dedicated-stream excess intensity coefficients.
    pub mu: Vec<S>,
    /// Threshold offsets. `+inf` switches pairing off for good.
    pub nu: Vec<S>,
    /// Scale parameter.
    pub n: u64,
}

/// Rates and thresholds induced by [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedRates<S> {
    /// Free-stream intensity `mu0 * sqrt(n)`.
    pub lambda0: S,
    /// Dedicated intensities `n / alpha_i + mu_i * sqrt(n)`.
    pub lambda: Vec<S>,
    /// Integer pairing thresholds, `round(n / alpha_i + nu_i * sqrt(n))` clamped
    /// below at 1 (saturating at `u64::MAX` for infinite offsets).
    pub thresholds: Vec<u64>,
    /// Centering `n / alpha_i`.
    pub centering: Vec<S>,
}

impl<S: Scalar> ModelParams<S> {
    /// Builds and validates a parameter set.
    pub fn new(alpha: Vec<S>, mu0: S, mu: Vec<S>, nu: Vec<S>, n: u64) -> Result<Self> {
        let params = Self {
            d: alpha.len(),
            alpha,
            mu0,
            mu,
            nu,
            n,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::config("d must be at least 1"));
        }
        for (name, len) in [
            ("alpha", self.alpha.len()),
            ("mu", self.mu.len()),
            ("nu", self.nu.len()),
        ] {
            if len != self.d {
                return Err(Error::config(format!(
                    "{name} has length {len}, expected d = {}",
                    self.d
                )));
            }
        }
        for (i, &a) in self.alpha.iter().enumerate() {
            if !(a > S::zero() && a.is_finite()) {
                return Err(Error::config(format!(
                    "alpha[{i}] must be positive and finite, got {a}"
                )));
            }
        }
        if !(self.mu0 >= S::zero() && self.mu0.is_finite()) {
            return Err(Error::config(format!(
                "mu0 must be nonnegative, got {}",
                self.mu0
            )));
        }
        for (i, &m) in self.mu.iter().enumerate() {
            if !(m >= S::zero() && m.is_finite()) {
                return Err(Error::config(format!(
                    "mu[{i}] must be nonnegative, got {m}"
                )));
            }
        }
        for (i, &v) in self.nu.iter().enumerate() {
            if v.is_nan() || v == S::neg_infinity() {
                return Err(Error::config(format!(
                    "nu[{i}] must be a real number or +inf, got {v}"
                )));
            }
        }
        if self.n == 0 {
            return Err(Error::config("n must be at least 1"));
        }
        Ok(())
    }

    /// Same parameters at a different scale `n`.
    pub fn with_n(&self, n: u64) -> Self {
        Self { n, ..self.clone() }
    }

    pub fn sqrt_n(&self) -> S {
        S::of_u64(self.n).sqrt()
    }

    pub fn derived_rates(&self) -> DerivedRates<S> {
        let n = S::of_u64(self.n);
        let sqrt_n = n.sqrt();
        let centering: Vec<S> = self.alpha.iter().map(|&a| n / a).collect();
        let lambda = centering
            .iter()
            .zip(&self.mu)
            .map(|(&c, &m)| c + m * sqrt_n)
            .collect();
        let thresholds = centering
            .iter()
            .zip(&self.nu)
            .map(|(&c, &v)| round_threshold((c + v * sqrt_n).as_f64()))
            .collect();
        DerivedRates {
            lambda0: self.mu0 * sqrt_n,
            lambda,
            thresholds,
            centering,
        }
    }

    /// Drift of the limit diffusion, `mu0 * delta_i(x) + mu_i - x_i`.
    pub fn limit_drift(&self, x: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.d];
        self.limit_drift_into(x, &mut out);
        out
    }

    pub fn limit_drift_into(&self, x: &[S], out: &mut [S]) {
        let routed = argmin_weighted(x, &self.alpha);
        for i in 0..self.d {
            let free = if i == routed { self.mu0 } else { S::zero() };
            out[i] = free + self.mu[i] - x[i];
        }
    }

    /// Diagonal standard deviations of the limit diffusion,
    /// `alpha_i^{-1/2} * sqrt(2 + 1{x_i >= nu_i})`.
    pub fn limit_diffusion(&self, x: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.d];
        self.limit_diffusion_into(x, &mut out);
        out
    }

    pub fn limit_diffusion_into(&self, x: &[S], out: &mut [S]) {
        self.limit_qv_density_into(x, out);
        for v in out.iter_mut() {
            *v = v.sqrt();
        }
    }

    /// Diagonal of the limit quadratic-variation density,
    /// `a_ii(x) = (1 + 1{x_i < nu_i} + 2 * 1{x_i >= nu_i}) / alpha_i`.
    pub fn limit_qv_density(&self, x: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.d];
        self.limit_qv_density_into(x, &mut out);
        out
    }

    pub fn limit_qv_density_into(&self, x: &[S], out: &mut [S]) {
        let one = S::one();
        let two = S::of(2.0);
        for i in 0..self.d {
            let departures = if x[i] >= self.nu[i] { two } else { one };
            out[i] = (one + departures) / self.alpha[i];
        }
    }

    /// Exact finite-`n` drift and diagonal quadratic-variation density of the
    /// scaled queue at state `x`.
    pub fn prelimit_coeffs(&self, x: &[S]) -> (Vec<S>, Vec<S>) {
        let mut drift = vec![S::zero(); self.d];
        let mut qv = vec![S::zero(); self.d];
        self.prelimit_coeffs_into(x, &mut drift, &mut qv);
        (drift, qv)
    }

    pub fn prelimit_coeffs_into(&self, x: &[S], drift: &mut [S], qv: &mut [S]) {
        self.limit_drift_into(x, drift);
        let n = S::of_u64(self.n);
        let inv_sqrt_n = n.sqrt().recip();
        let routed = argmin_weighted(x, &self.alpha);
        for i in 0..self.d {
            let inv_alpha = self.alpha[i].recip();
            let free = if i == routed { self.mu0 } else { S::zero() };
            let arrivals = (free + self.mu[i]) * inv_sqrt_n + inv_alpha;
            let occupancy = (x[i] * inv_sqrt_n + inv_alpha).positive_part();
            let departures = if x[i] < self.nu[i] {
                S::one()
            } else {
                pair_factor(x[i] * n.sqrt() + n * inv_alpha)
            };
            qv[i] = arrivals + occupancy * departures;
        }
    }

    /// Distance-like gauge of `x` to the discontinuity set: the smallest of
    /// `|x_i - nu_i|` and `|alpha_i x_i - alpha_j x_j|` over `i < j`.
    ///
    /// Zero exactly on the set; `+inf` when every factor is vacuous.
    pub fn distance_to_g(&self, x: &[S]) -> S {
        let mut best = S::infinity();
        for i in 0..self.d {
            best = best.min((x[i] - self.nu[i]).abs());
            let wi = self.alpha[i] * x[i];
            for j in i + 1..self.d {
                best = best.min((wi - self.alpha[j] * x[j]).abs());
            }
        }
        best
    }

    /// Uniform bounds `[2 min 1/alpha_i, 3 max 1/alpha_i]` on the limit
    /// quadratic-variation density.
    pub fn ellipticity_bounds(&self) -> (S, S) {
        let inv: Vec<S> = self.alpha.iter().map(|a| a.recip()).collect();
        let lo = inv.iter().copied().fold(S::infinity(), S::min);
        let hi = inv.iter().copied().fold(S::neg_infinity(), S::max);
        (S::of(2.0) * lo, S::of(3.0) * hi)
    }

    /// Initial queue `round(n / alpha_i + x0_i * sqrt(n))`, clamped at 0.
    pub fn initial_queue(&self, x0: &[S]) -> Result<Vec<u64>> {
        check_len("x0", x0.len(), self.d)?;
        let n = S::of_u64(self.n);
        let sqrt_n = n.sqrt();
        x0.iter()
            .zip(&self.alpha)
            .enumerate()
            .map(|(i, (&x, &a))| {
                let q = (n / a + x * sqrt_n).round();
                if !q.is_finite() {
                    return Err(Error::config(format!(
                        "x0[{i}] gives a non-finite initial queue"
                    )));
                }
                Ok(q.max(S::zero()).to_u64().unwrap_or(u64::MAX))
            })
            .collect()
    }
}

fn round_threshold(value: f64) -> u64 {
    if value >= u64::MAX as f64 {
        u64::MAX
    } else if value < 1.0 {
        1
    } else {
        // `as` saturates; value is finite and in range here
        (value.round() as u64).max(1)
    }
}

pub(crate) fn check_len(name: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::config(format!(
            "{name} has length {got}, expected {want}"
        )))
    }
}

/// Index minimizing `alpha_i * x_i`, smallest index on ties. Unchecked.
#[inline]
pub(crate) fn argmin_weighted<S: Scalar>(x: &[S], alpha: &[S]) -> usize {
    let mut best = 0;
    let mut best_val = alpha[0] * x[0];
    for i in 1..x.len() {
        let v = alpha[i] * x[i];
        if v < best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

/// Station receiving a free arrival at state `x`: the least index minimizing
/// `alpha_i * x_i`.
pub fn route<S: Scalar>(x: &[S], alpha: &[S]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::config("route needs d >= 1"));
    }
    check_len("x", x.len(), alpha.len())?;
    Ok(argmin_weighted(x, alpha))
}

/// Routing indicator vector: 1 at [`route`], 0 elsewhere.
pub fn delta<S: Scalar>(x: &[S], alpha: &[S]) -> Result<Vec<S>> {
    let r = route(x, alpha)?;
    let mut out = vec![S::zero(); x.len()];
    out[r] = S::one();
    Ok(out)
}

/// Pairing variance factor `f(q) = (3 floor(q/2) + floor((q+1)/2)) / q` for
/// `q > 0` and `0` otherwise.
///
/// For integer `q`, `q * f(q)` is the sum of squared jump sizes when `q`
/// customers are served in pairs with one singleton left over if `q` is odd.
pub fn pair_factor<S: Scalar>(q: S) -> S {
    if !(q > S::zero()) {
        return S::zero();
    }
    let two = S::of(2.0);
    let pairs = (q / two).floor();
    let tail = ((q + S::one()) / two).floor();
    (S::of(3.0) * pairs + tail) / q
}
