//! Diagonal-noise SDEs, Euler–Maruyama integration and the fluid ODE.
//!
//! Coefficients follow one convention everywhere: `diffusion` returns the
//! diagonal standard deviations `sigma_i`, and `sigma_i^2` is the
//! quadratic-variation density `a_ii`, so the generator's second-order part
//! is `0.5 * a_ii * d^2/dx_i^2`.

use std::fmt;
use std::sync::Arc;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::model::{check_len, ModelParams};
use crate::path::{SamplePath, TimeGrid};
use crate::rng::fill_standard_normal;
use crate::scalar::Scalar;

/// Coefficient function `(t, x, out)`.
pub type CoeffFn<S> = Arc<dyn Fn(S, &[S], &mut [S]) + Send + Sync>;

/// `dx = drift(t, x) dt + diag(diffusion(t, x)) dw`.
#[derive(Clone)]
pub struct SdeSpec<S> {
    pub dim: usize,
    pub drift: CoeffFn<S>,
    pub diffusion: CoeffFn<S>,
    pub label: String,
}

impl<S> fmt::Debug for SdeSpec<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeSpec")
            .field("dim", &self.dim)
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

impl<S: Scalar> SdeSpec<S> {
    pub fn new(
        dim: usize,
        label: impl Into<String>,
        drift: impl Fn(S, &[S], &mut [S]) + Send + Sync + 'static,
        diffusion: impl Fn(S, &[S], &mut [S]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            label: label.into(),
        }
    }

    pub fn drift_at(&self, t: S, x: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.dim];
        (self.drift)(t, x, &mut out);
        out
    }

    pub fn diffusion_at(&self, t: S, x: &[S]) -> Vec<S> {
        let mut out = vec![S::zero(); self.dim];
        (self.diffusion)(t, x, &mut out);
        out
    }
}

/// Limit diffusion of the scaled queue: drift `mu0 delta_i(x) + mu_i - x_i`,
/// diffusion `alpha_i^{-1/2} sqrt(2 + 1{x_i >= nu_i})`.
pub fn limit_sde<S: Scalar>(params: &ModelParams<S>) -> SdeSpec<S> {
    let drift_params = params.clone();
    let diff_params = params.clone();
    SdeSpec::new(
        params.d,
        "limit",
        move |_, x, out| drift_params.limit_drift_into(x, out),
        move |_, x, out| diff_params.limit_diffusion_into(x, out),
    )
}

/// Centering profile `q_t = 1 + (gamma - 1) e^{-t}` of the alternative scaling.
pub fn alt_scaling_q<S: Scalar>(gamma: S, t: S) -> S {
    S::one() + (gamma - S::one()) * (-t).exp()
}

/// Limit of the queue rescaled around `n q_t / alpha_i` when the initial
/// queue is of order `n gamma / alpha_i`.
///
/// Same drift as [`limit_sde`]. The squared diffusion is `(1 + q_t) / alpha_i`
/// for `gamma < 1`, where the queue stays below its threshold, and
/// `(1 + 2 q_t) / alpha_i` for `gamma > 1`, where it is served in pairs.
pub fn alt_scaling_sde<S: Scalar>(params: &ModelParams<S>, gamma: S) -> Result<SdeSpec<S>> {
    params.validate()?;
    if !(gamma >= S::zero() && gamma.is_finite()) {
        return Err(Error::config(format!(
            "gamma must be finite and nonnegative, got {gamma}"
        )));
    }
    if gamma == S::one() {
        return Err(Error::config(
            "gamma = 1 is the standard scaling; the alternative scaling only covers \
             gamma in [0, 1) and gamma > 1, use the limit SDE instead",
        ));
    }
    let departure_weight = if gamma < S::one() {
        S::one()
    } else {
        S::of(2.0)
    };
    let drift_params = params.clone();
    let inv_alpha: Vec<S> = params.alpha.iter().map(|a| a.recip()).collect();
    Ok(SdeSpec::new(
        params.d,
        format!("alt-scaling(gamma={gamma})"),
        move |_, x, out| drift_params.limit_drift_into(x, out),
        move |t, _, out| {
            let q = alt_scaling_q(gamma, t);
            let level = S::one() + departure_weight * q;
            for (o, &inv) in out.iter_mut().zip(&inv_alpha) {
                *o = (level * inv).sqrt();
            }
        },
    ))
}

/// Number of Euler steps covering `[0, t_end]` with step `h`: `ceil(T / h)`,
/// treating ratios within rounding of an integer as exact.
pub fn step_count<S: Scalar>(t_end: S, h: S) -> usize {
    let ratio = (t_end / h).as_f64();
    let nearest = ratio.round();
    let k = if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        ratio.ceil()
    };
    (k as usize).max(1)
}

fn em_times<S: Scalar>(t_end: S, h: S, steps: usize) -> Vec<S> {
    let ratio = (t_end / h).as_f64();
    if (ratio - steps as f64).abs() <= 1e-9 * (steps as f64) {
        // uniform grid ending exactly at T
        (0..=steps)
            .map(|k| {
                if k == steps {
                    t_end
                } else {
                    t_end * S::of_usize(k) / S::of_usize(steps)
                }
            })
            .collect()
    } else {
        (0..=steps)
            .map(|k| {
                if k == steps {
                    t_end
                } else {
                    h * S::of_usize(k)
                }
            })
            .collect()
    }
}

/// Euler–Maruyama with left-endpoint (Itô) coefficients, recording every step.
pub fn euler_maruyama<S: Scalar, R: RngCore + ?Sized>(
    spec: &SdeSpec<S>,
    x0: &[S],
    t_end: S,
    h: S,
    rng: &mut R,
) -> Result<SamplePath<S>> {
    euler_maruyama_strided(spec, x0, t_end, h, 1, rng)
}

/// Euler–Maruyama recording the state every `stride` steps and at `t_end`.
///
/// The random stream consumption is independent of `stride`, so paths with
/// different strides from the same seed agree at the common times.
pub fn euler_maruyama_strided<S: Scalar, R: RngCore + ?Sized>(
    spec: &SdeSpec<S>,
    x0: &[S],
    t_end: S,
    h: S,
    stride: usize,
    rng: &mut R,
) -> Result<SamplePath<S>> {
    check_len("x0", x0.len(), spec.dim)?;
    if !(t_end > S::zero() && t_end.is_finite()) {
        return Err(Error::config(format!(
            "horizon must be positive and finite, got {t_end}"
        )));
    }
    if !(h > S::zero()) || h > t_end {
        return Err(Error::config(format!("step must be in (0, T], got {h}")));
    }
    if stride == 0 {
        return Err(Error::config("record stride must be at least 1"));
    }
    let d = spec.dim;
    let steps = step_count(t_end, h);
    let all_times = em_times(t_end, h, steps);
    let mut times = Vec::with_capacity(steps / stride + 2);
    let mut values = Vec::with_capacity((steps / stride + 2) * d);
    let mut x = x0.to_vec();
    let mut drift = vec![S::zero(); d];
    let mut sigma = vec![S::zero(); d];
    let mut z = vec![0.0f64; d];
    times.push(all_times[0]);
    values.extend_from_slice(&x);
    for k in 0..steps {
        let t = all_times[k];
        let dt = all_times[k + 1] - t;
        let sqrt_dt = dt.sqrt();
        (spec.drift)(t, &x, &mut drift);
        (spec.diffusion)(t, &x, &mut sigma);
        fill_standard_normal(rng, &mut z);
        for i in 0..d {
            x[i] = x[i] + drift[i] * dt + sigma[i] * sqrt_dt * S::of(z[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(format!(
                "state became non-finite at step {} (t = {})",
                k + 1,
                all_times[k + 1]
            )));
        }
        if (k + 1) % stride == 0 || k + 1 == steps {
            times.push(all_times[k + 1]);
            values.extend_from_slice(&x);
        }
    }
    Ok(SamplePath::from_parts_unchecked(times, d, values))
}

/// Parameters of the fluid ODE `dq_i = (beta_i - q_i) dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidParams<S> {
    pub beta: Vec<S>,
    pub q0: Vec<S>,
}

impl<S: Scalar> FluidParams<S> {
    /// Exact solution `beta_i + (q0_i - beta_i) e^{-t}`.
    pub fn exact(&self, t: S) -> Vec<S> {
        let decay = (-t).exp();
        self.beta
            .iter()
            .zip(&self.q0)
            .map(|(&b, &q)| b + (q - b) * decay)
            .collect()
    }
}

/// One classical Runge–Kutta step of `dx/dt = f(t, x)`.
pub fn rk4_step<S: Scalar>(f: &impl Fn(S, &[S], &mut [S]), t: S, x: &mut [S], h: S) {
    let d = x.len();
    let half = h / S::of(2.0);
    let mut k1 = vec![S::zero(); d];
    let mut k2 = vec![S::zero(); d];
    let mut k3 = vec![S::zero(); d];
    let mut k4 = vec![S::zero(); d];
    let mut tmp = vec![S::zero(); d];
    f(t, x, &mut k1);
    for i in 0..d {
        tmp[i] = x[i] + half * k1[i];
    }
    f(t + half, &tmp, &mut k2);
    for i in 0..d {
        tmp[i] = x[i] + half * k2[i];
    }
    f(t + half, &tmp, &mut k3);
    for i in 0..d {
        tmp[i] = x[i] + h * k3[i];
    }
    f(t + h, &tmp, &mut k4);
    let sixth = h / S::of(6.0);
    for i in 0..d {
        x[i] = x[i] + sixth * (k1[i] + S::of(2.0) * (k2[i] + k3[i]) + k4[i]);
    }
}

/// Fluid path by RK4 on a uniform grid of `ceil(T / h)` steps ending at `T`.
pub fn fluid_ode<S: Scalar>(fp: &FluidParams<S>, t_end: S, h: S) -> Result<SamplePath<S>> {
    check_len("fluid q0", fp.q0.len(), fp.beta.len())?;
    if fp.beta.is_empty() {
        return Err(Error::config("fluid ODE needs dimension >= 1"));
    }
    if !(t_end > S::zero() && t_end.is_finite()) {
        return Err(Error::config(format!(
            "horizon must be positive and finite, got {t_end}"
        )));
    }
    if !(h > S::zero()) || h > t_end {
        return Err(Error::config(format!("step must be in (0, T], got {h}")));
    }
    let grid = TimeGrid::new(t_end, step_count(t_end, h))?;
    let beta = fp.beta.clone();
    let rhs = move |_: S, q: &[S], out: &mut [S]| {
        for i in 0..q.len() {
            out[i] = beta[i] - q[i];
        }
    };
    let times = grid.times();
    let d = fp.beta.len();
    let mut q = fp.q0.clone();
    let mut values = Vec::with_capacity(times.len() * d);
    values.extend_from_slice(&q);
    for k in 0..grid.steps() {
        rk4_step(&rhs, times[k], &mut q, times[k + 1] - times[k]);
        values.extend_from_slice(&q);
    }
    Ok(SamplePath::from_parts_unchecked(times, d, values))
}
