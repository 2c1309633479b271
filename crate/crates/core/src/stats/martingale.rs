//! Monte Carlo residuals of the martingale problem.
//!
//! For a test function `u` the process
//! `u(t, x_t) - u(s, x_s) - int_s^t (u_p + b_i u_{x_i} + 0.5 a_ii u_{x_i x_i})(p, x_p) dp`
//! has zero mean increments when `b` and `a` are the coefficients of the
//! process that produced the paths. The residual is its weighted ensemble
//! mean, with the time integral done by the trapezoid rule on the path grid.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::path::SamplePath;
use crate::scalar::Scalar;
use crate::sde::SdeSpec;

use super::summary::mean_and_std_error;

/// Default inner radius of the plateau cutoff.
pub const DEFAULT_PLATEAU_RADIUS: f64 = 6.0;

/// A smooth test function with the derivatives the generator needs.
pub trait TestFunction<S>: Send + Sync {
    fn id(&self) -> String;

    /// Returns `(u, u_t)` at `(t, x)` and writes the gradient and the diagonal
    /// of the Hessian in `x`.
    fn eval(&self, t: S, x: &[S], grad: &mut [S], hess_diag: &mut [S]) -> (S, S);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TimeFactor {
    /// `psi(t) = 1`
    One,
    /// `psi(t) = t`
    Linear,
}

/// `u(t, x) = psi(t) * x^e * beta(|x|)` where `x^e` is a monomial of degree at
/// most 2 and `beta` is a C^2 plateau: 1 on `|x| <= R`, 0 on `|x| >= 2R`, and
/// `1 - (10 z^3 - 15 z^4 + 6 z^5)` with `z = |x|/R - 1` in between.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauMonomial<S> {
    pub exponents: Vec<u32>,
    pub time: TimeFactor,
    pub radius: S,
}

impl<S: Scalar> PlateauMonomial<S> {
    pub fn new(exponents: Vec<u32>, time: TimeFactor, radius: S) -> Result<Self> {
        if exponents.iter().sum::<u32>() > 2 {
            return Err(Error::config("test monomials have degree at most 2"));
        }
        if !(radius > S::zero()) {
            return Err(Error::config("plateau radius must be positive"));
        }
        Ok(Self {
            exponents,
            time,
            radius,
        })
    }

    /// Plateau value and its first two radial derivatives.
    fn plateau(&self, r: S) -> (S, S, S) {
        let big = self.radius;
        if r <= big {
            return (S::one(), S::zero(), S::zero());
        }
        if r >= big + big {
            return (S::zero(), S::zero(), S::zero());
        }
        let z = r / big - S::one();
        let (z2, z3) = (z * z, z * z * z);
        let c = |v: f64| S::of(v);
        let value = S::one() - (c(10.0) * z3 - c(15.0) * z2 * z2 + c(6.0) * z2 * z3);
        let d1 = -(c(30.0) * z2 - c(60.0) * z3 + c(30.0) * z2 * z2) / big;
        let d2 = -(c(60.0) * z - c(180.0) * z2 + c(120.0) * z3) / (big * big);
        (value, d1, d2)
    }
}

fn powu<S: Scalar>(x: S, e: u32) -> S {
    match e {
        0 => S::one(),
        1 => x,
        _ => x.powi(e as i32),
    }
}

impl<S: Scalar> TestFunction<S> for PlateauMonomial<S> {
    fn id(&self) -> String {
        let mut parts = Vec::new();
        for (i, &e) in self.exponents.iter().enumerate() {
            match e {
                0 => {}
                1 => parts.push(format!("x{}", i + 1)),
                _ => parts.push(format!("x{}^{e}", i + 1)),
            }
        }
        let mono = if parts.is_empty() {
            "1".to_string()
        } else {
            parts.join("*")
        };
        match self.time {
            TimeFactor::One => mono,
            TimeFactor::Linear => format!("t*{mono}"),
        }
    }

    fn eval(&self, t: S, x: &[S], grad: &mut [S], hess_diag: &mut [S]) -> (S, S) {
        let d = x.len();
        let r = x.iter().map(|&v| v * v).sum::<S>().sqrt();
        let (beta, b1, b2) = self.plateau(r);
        let (psi, dpsi) = match self.time {
            TimeFactor::One => (S::one(), S::zero()),
            TimeFactor::Linear => (t, S::one()),
        };
        let p: S = (0..d)
            .map(|i| powu(x[i], self.exponents[i]))
            .fold(S::one(), |a, b| a * b);
        for i in 0..d {
            let e = self.exponents[i];
            let others: S = (0..d)
                .filter(|&j| j != i)
                .map(|j| powu(x[j], self.exponents[j]))
                .fold(S::one(), |a, b| a * b);
            let (p_i, p_ii) = match e {
                0 => (S::zero(), S::zero()),
                1 => (others, S::zero()),
                _ => (S::of(2.0) * x[i] * others, S::of(2.0) * others),
            };
            // radial derivatives of the plateau are nonzero only for r > R > 0
            let (beta_i, beta_ii) = if b1 == S::zero() && b2 == S::zero() {
                (S::zero(), S::zero())
            } else {
                let u = x[i] / r;
                (b1 * u, b2 * u * u + b1 * (S::one() - u * u) / r)
            };
            grad[i] = psi * (p_i * beta + p * beta_i);
            hess_diag[i] = psi * (p_ii * beta + S::of(2.0) * p_i * beta_i + p * beta_ii);
        }
        (psi * p * beta, dpsi * p * beta)
    }
}

/// The built-in family: every monomial of degree 0, 1 and 2 in `d` variables
/// times the plateau, each with `psi = 1` and `psi = t`.
pub fn test_family<S: Scalar>(d: usize, radius: S) -> Vec<PlateauMonomial<S>> {
    let mut exps = vec![vec![0; d]];
    for i in 0..d {
        let mut e = vec![0; d];
        e[i] = 1;
        exps.push(e);
    }
    for i in 0..d {
        for j in i..d {
            let mut e = vec![0; d];
            e[i] += 1;
            e[j] += 1;
            exps.push(e);
        }
    }
    let mut out = Vec::with_capacity(2 * exps.len());
    for time in [TimeFactor::One, TimeFactor::Linear] {
        for e in &exps {
            out.push(PlateauMonomial {
                exponents: e.clone(),
                time,
                radius,
            });
        }
    }
    out
}

/// Weight on an earlier marginal multiplying each replica's residual.
#[derive(Debug, Clone, PartialEq)]
pub enum Weight<S> {
    One,
    /// Logistic-smoothed indicator `1 / (1 + exp(-(x_coord(time) - level) / width))`.
    Smoothed {
        time: S,
        coord: usize,
        level: S,
        width: S,
    },
}

/// Where the drift and quadratic-variation density come from.
#[derive(Debug, Clone, Copy)]
pub enum CoeffSource<'a, S> {
    /// Coefficients of the limit diffusion.
    Limit(&'a ModelParams<S>),
    /// Exact finite-`n` coefficients at the parameters' `n`.
    Prelimit(&'a ModelParams<S>),
    /// Any diagonal SDE; `a_ii = sigma_i^2`.
    Sde(&'a SdeSpec<S>),
}

impl<S: Scalar> CoeffSource<'_, S> {
    fn dim(&self) -> usize {
        match self {
            CoeffSource::Limit(p) | CoeffSource::Prelimit(p) => p.d,
            CoeffSource::Sde(s) => s.dim,
        }
    }

    fn eval(&self, t: S, x: &[S], b: &mut [S], a: &mut [S]) {
        match self {
            CoeffSource::Limit(p) => {
                p.limit_drift_into(x, b);
                p.limit_qv_density_into(x, a);
            }
            CoeffSource::Prelimit(p) => p.prelimit_coeffs_into(x, b, a),
            CoeffSource::Sde(s) => {
                (s.drift)(t, x, b);
                (s.diffusion)(t, x, a);
                for v in a.iter_mut() {
                    *v = *v * *v;
                }
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            CoeffSource::Limit(_) => "limit".to_string(),
            CoeffSource::Prelimit(p) => format!("prelimit(n={})", p.n),
            CoeffSource::Sde(s) => s.label.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport<S> {
    pub estimate: S,
    /// Sample standard deviation over `sqrt(M)`; zero when `M = 1`.
    pub std_error: S,
    pub m: usize,
    pub test_function_id: String,
    /// Notes on times that were snapped to the path grid.
    pub warnings: Vec<String>,
}

impl<S: Scalar> ResidualReport<S> {
    /// `|estimate| <= k * std_error + slack`.
    pub fn within(&self, k: S, slack: S) -> bool {
        self.estimate.abs() <= k * self.std_error + slack
    }
}

/// Ensemble residual of the martingale problem for `u` between times `s`
/// and `t`. Times are snapped to the nearest recorded path times.
pub fn martingale_residual<S: Scalar>(
    paths: &[SamplePath<S>],
    u: &dyn TestFunction<S>,
    s: S,
    t: S,
    weight: &Weight<S>,
    coeffs: &CoeffSource<'_, S>,
) -> Result<ResidualReport<S>> {
    let first = paths
        .first()
        .ok_or_else(|| Error::config("martingale residual needs at least one path"))?;
    let d = coeffs.dim();
    if !(S::zero() <= s && s <= t) {
        return Err(Error::config(format!(
            "need 0 <= s <= t, got s = {s}, t = {t}"
        )));
    }
    if let Weight::Smoothed {
        time, coord, width, ..
    } = weight
    {
        if *time > s || *time < S::zero() {
            return Err(Error::config("weight time must lie in [0, s]"));
        }
        if *coord >= d || !(*width > S::zero()) {
            return Err(Error::config(
                "weight needs a valid coordinate and positive width",
            ));
        }
    }
    for p in paths {
        if p.dim() != d {
            return Err(Error::config(
                "path dimension differs from the coefficients'",
            ));
        }
        if t > p.end_time() {
            return Err(Error::config(format!(
                "t = {t} beyond the path horizon {}",
                p.end_time()
            )));
        }
    }

    let mut warnings = Vec::new();
    let tol = S::of(1e-9) * (S::one() + t.abs());
    for (name, target) in [("s", s), ("t", t)] {
        let k = first.nearest_index(target);
        let got = first.times()[k];
        if (got - target).abs() > tol {
            warnings.push(format!("{name} = {target} snapped to grid time {got}"));
        }
    }

    let per_path: Vec<S> = paths
        .par_iter()
        .map(|path| residual_one(path, u, s, t, weight, coeffs))
        .collect();
    let (estimate, std_error) = mean_and_std_error(&per_path)?;
    if !estimate.is_finite() {
        return Err(Error::numeric(format!(
            "residual of {} is not finite",
            u.id()
        )));
    }
    Ok(ResidualReport {
        estimate,
        std_error,
        m: paths.len(),
        test_function_id: u.id(),
        warnings,
    })
}

fn residual_one<S: Scalar>(
    path: &SamplePath<S>,
    u: &dyn TestFunction<S>,
    s: S,
    t: S,
    weight: &Weight<S>,
    coeffs: &CoeffSource<'_, S>,
) -> S {
    let d = path.dim();
    let times = path.times();
    let (is, it) = (path.nearest_index(s), path.nearest_index(t));
    let w = match weight {
        Weight::One => S::one(),
        Weight::Smoothed {
            time,
            coord,
            level,
            width,
        } => {
            let x = path.row(path.nearest_index(*time))[*coord];
            S::one() / (S::one() + (-(x - *level) / *width).exp())
        }
    };
    let mut grad = vec![S::zero(); d];
    let mut hess = vec![S::zero(); d];
    let mut b = vec![S::zero(); d];
    let mut a = vec![S::zero(); d];
    let mut generator = |k: usize| -> (S, S) {
        let x = path.row(k);
        let (value, u_t) = u.eval(times[k], x, &mut grad, &mut hess);
        coeffs.eval(times[k], x, &mut b, &mut a);
        let half = S::of(0.5);
        let mut lu = u_t;
        for i in 0..d {
            lu = lu + b[i] * grad[i] + half * a[i] * hess[i];
        }
        (value, lu)
    };
    let (u_start, mut l_prev) = generator(is);
    let mut u_end = u_start;
    let mut integral = S::zero();
    for k in is + 1..=it {
        let (value, l_cur) = generator(k);
        integral = integral + S::of(0.5) * (times[k] - times[k - 1]) * (l_prev + l_cur);
        l_prev = l_cur;
        u_end = value;
    }
    w * (u_end - u_start - integral)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    struct Constant;

    impl TestFunction<f64> for Constant {
        fn id(&self) -> String {
            "const".into()
        }
        fn eval(&self, _: f64, _: &[f64], grad: &mut [f64], hess: &mut [f64]) -> (f64, f64) {
            grad.fill(0.0);
            hess.fill(0.0);
            (4.2, 0.0)
        }
    }

    fn wiggly_path(d: usize) -> SamplePath<f64> {
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).collect();
        let values = (0..times.len() * d)
            .map(|k| ((k * 37) % 11) as f64 * 0.3 - 1.5)
            .collect();
        SamplePath::new(times, d, values).unwrap()
    }

    #[test]
    fn constant_u_has_zero_residual() {
        let p = ModelParams::new(vec![1.0, 2.0], 1.0, vec![0.5, 0.5], vec![0.0, 0.0], 100).unwrap();
        let paths = vec![wiggly_path(2), wiggly_path(2)];
        for src in [CoeffSource::Limit(&p), CoeffSource::Prelimit(&p)] {
            let rep = martingale_residual(&paths, &Constant, 0.1, 0.9, &Weight::One, &src).unwrap();
            assert_eq!(rep.estimate, 0.0);
            assert_eq!(rep.std_error, 0.0);
            assert!(rep.warnings.is_empty());
        }
    }

    #[test]
    fn linear_u_on_frozen_path_at_drift_zero() {
        // b(x) = mu - x = 0 at x = mu; u linear inside the plateau, so a never enters
        let p = ModelParams::new(vec![1.0], 0.0, vec![0.8], vec![0.0], 1).unwrap();
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.1).collect();
        let path = SamplePath::new(times, 1, vec![0.8; 11]).unwrap();
        let u = PlateauMonomial::new(vec![1], TimeFactor::One, 6.0).unwrap();
        let rep = martingale_residual(&[path], &u, 0.0, 1.0, &Weight::One, &CoeffSource::Limit(&p))
            .unwrap();
        assert_eq!(rep.estimate, 0.0);
    }

    #[test]
    fn snapping_is_recorded() {
        let p = ModelParams::new(vec![1.0], 0.0, vec![0.0], vec![0.0], 1).unwrap();
        let u = PlateauMonomial::new(vec![2], TimeFactor::One, 6.0).unwrap();
        let rep = martingale_residual(
            &[wiggly_path(1)],
            &u,
            0.12,
            0.5,
            &Weight::One,
            &CoeffSource::Limit(&p),
        )
        .unwrap();
        assert_eq!(rep.warnings.len(), 1);
        assert!(rep.warnings[0].starts_with("s = 0.12"));
        assert!(martingale_residual(
            &[wiggly_path(1)],
            &u,
            0.5,
            0.2,
            &Weight::One,
            &CoeffSource::Limit(&p)
        )
        .is_err());
        assert!(martingale_residual(
            &[wiggly_path(1)],
            &u,
            0.0,
            2.0,
            &Weight::One,
            &CoeffSource::Limit(&p)
        )
        .is_err());
    }

    #[test]
    fn family_size_and_ids() {
        let fam = test_family::<f64>(2, 6.0);
        // (1 + 2 + 3) monomials, two time factors
        assert_eq!(fam.len(), 12);
        let ids: Vec<String> = fam.iter().map(|f| f.id()).collect();
        assert!(ids.contains(&"x1*x2".to_string()));
        assert!(ids.contains(&"t*x2^2".to_string()));
        assert!(ids.contains(&"1".to_string()));
        assert!(PlateauMonomial::new(vec![2, 1], TimeFactor::One, 1.0f64).is_err());
    }

    #[test]
    fn plateau_is_c2_at_the_seams() {
        let u = PlateauMonomial::new(vec![0], TimeFactor::One, 2.0f64).unwrap();
        let (v, d1, d2) = u.plateau(2.0 + 1e-9);
        assert_relative_eq!(v, 1.0, epsilon = 1e-9);
        assert!(d1.abs() < 1e-6 && d2.abs() < 1e-6);
        let (v, d1, d2) = u.plateau(4.0 - 1e-9);
        assert!(v.abs() < 1e-9 && d1.abs() < 1e-6 && d2.abs() < 1e-6);
    }

    fn finite_difference(u: &PlateauMonomial<f64>, t: f64, x: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let h = 1e-4;
        let mut grad = vec![0.0; x.len()];
        let mut hess = vec![0.0; x.len()];
        let mut g = vec![0.0; x.len()];
        let mut hd = vec![0.0; x.len()];
        let value = |t: f64, x: &[f64], g: &mut [f64], hd: &mut [f64]| u.eval(t, x, g, hd).0;
        let f0 = value(t, x, &mut g, &mut hd);
        for i in 0..x.len() {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            let fp = value(t, &xp, &mut g, &mut hd);
            let fm = value(t, &xm, &mut g, &mut hd);
            grad[i] = (fp - fm) / (2.0 * h);
            hess[i] = (fp - 2.0 * f0 + fm) / (h * h);
        }
        let ut = (value(t + h, x, &mut g, &mut hd) - value(t - h, x, &mut g, &mut hd)) / (2.0 * h);
        (ut, grad, hess)
    }

    proptest! {
        #[test]
        fn derivatives_match_finite_differences(
            which in 0usize..12,
            t in 0.1f64..2.0,
            x in prop::collection::vec(-7.0f64..7.0, 2),
        ) {
            let u = &test_family::<f64>(2, 3.0)[which];
            let (ut_fd, grad_fd, hess_fd) = finite_difference(u, t, &x);
            let mut grad = vec![0.0; 2];
            let mut hess = vec![0.0; 2];
            let (_, ut) = u.eval(t, &x, &mut grad, &mut hess);
            prop_assert!((ut - ut_fd).abs() < 1e-5 * (1.0 + ut.abs()));
            for i in 0..2 {
                prop_assert!((grad[i] - grad_fd[i]).abs() < 1e-5 * (1.0 + grad[i].abs()), "grad {i}");
                prop_assert!((hess[i] - hess_fd[i]).abs() < 2e-3 * (1.0 + hess[i].abs()), "hess {i}");
            }
        }
    }
}
