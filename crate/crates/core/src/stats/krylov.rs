use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::path::SamplePath;
use crate::scalar::Scalar;

use super::summary::mean_and_std_error;

/// Left and right sides of the Krylov-type occupation bound on a slab.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovReport<S> {
    pub eps: S,
    /// Ensemble estimate of `E int_0^{T ^ tau_r} delta^{d/(d+1)} 1{|x_0 - nu_0| < eps} dt`.
    pub lhs: S,
    pub lhs_std_error: S,
    /// `(T * |slab ∩ B_r|)^{1/(d+1)}`.
    pub rhs: S,
}

impl<S: Scalar> KrylovReport<S> {
    /// `lhs / rhs`, zero when both vanish.
    pub fn ratio(&self) -> S {
        if self.rhs > S::zero() {
            self.lhs / self.rhs
        } else {
            S::zero()
        }
    }

    pub fn ratio_std_error(&self) -> S {
        if self.rhs > S::zero() {
            self.lhs_std_error / self.rhs
        } else {
            S::zero()
        }
    }
}

/// Volume of the unit ball in `R^k`.
pub fn unit_ball_volume<S: Scalar>(k: usize) -> S {
    let (mut even, mut odd) = (S::one(), S::of(2.0));
    let tau = S::of(std::f64::consts::TAU);
    if k == 0 {
        return even;
    }
    for j in 2..=k {
        if j % 2 == 0 {
            even = even * tau / S::of_usize(j);
        } else {
            odd = odd * tau / S::of_usize(j);
        }
    }
    if k.is_multiple_of(2) {
        even
    } else {
        odd
    }
}

/// Volume of `{|x_0 - center| < eps} ∩ {|x| < r}` in `R^d`.
///
/// Sections of the ball orthogonal to the first axis are `(d-1)`-balls;
/// substituting `s = r sin(theta)` turns the section integral into the
/// smooth integrand `c r^d cos^d(theta)`, integrated by composite Simpson.
pub fn slab_ball_volume<S: Scalar>(d: usize, center: S, eps: S, r: S) -> S {
    let lo = (center - eps).max(-r);
    let hi = (center + eps).min(r);
    if !(hi > lo) {
        return S::zero();
    }
    if d == 1 {
        return hi - lo;
    }
    let a = (lo / r).max(-S::one()).min(S::one()).asin();
    let b = (hi / r).max(-S::one()).min(S::one()).asin();
    let panels = 2048usize;
    let h = (b - a) / S::of_usize(panels);
    let weight = |theta: S| theta.cos().powi(d as i32);
    let mut sum = weight(a) + weight(b);
    for k in 1..panels {
        let w = if k % 2 == 1 { S::of(4.0) } else { S::of(2.0) };
        sum = sum + w * weight(a + h * S::of_usize(k));
    }
    unit_ball_volume::<S>(d - 1) * r.powi(d as i32) * sum * h / S::of(3.0)
}

/// Krylov diagnostic on the slab `{|x_0 - nu_0| < eps}` for an ensemble of
/// sampled paths, stopping each path at the first sample with `|x| >= r`.
///
/// The weight `delta(x)` is the smallest eigenvalue of the limit
/// quadratic-variation density at `x`; the density is diagonal, so this is
/// `min_i a_ii(x)`.
pub fn krylov_ratio<S: Scalar>(
    paths: &[SamplePath<S>],
    params: &ModelParams<S>,
    eps: S,
    r: S,
    t_end: S,
) -> Result<KrylovReport<S>> {
    if !(eps > S::zero() && r > S::zero()) {
        return Err(Error::config("eps and r must be positive"));
    }
    if !(t_end > S::zero()) {
        return Err(Error::config("T must be positive"));
    }
    if paths.is_empty() {
        return Err(Error::config("Krylov diagnostic needs at least one path"));
    }
    let d = params.d;
    let power = S::of_usize(d) / S::of_usize(d + 1);
    let mut a = vec![S::zero(); d];
    let mut per_path = Vec::with_capacity(paths.len());
    for path in paths {
        if path.dim() != d {
            return Err(Error::config("path dimension differs from the model's"));
        }
        if path.end_time() < t_end {
            return Err(Error::config("a path ends before T"));
        }
        let times = path.times();
        let mut acc = S::zero();
        for k in 0..path.len() - 1 {
            if times[k] >= t_end {
                break;
            }
            let x = path.row(k);
            let norm = x.iter().map(|&v| v * v).sum::<S>().sqrt();
            if norm >= r {
                break;
            }
            if (x[0] - params.nu[0]).abs() < eps {
                params.limit_qv_density_into(x, &mut a);
                let floor = a.iter().copied().fold(S::infinity(), S::min);
                acc = acc + floor.powf(power) * (times[k + 1].min(t_end) - times[k]);
            }
        }
        per_path.push(acc);
    }
    let (lhs, lhs_std_error) = mean_and_std_error(&per_path)?;
    let volume = slab_ball_volume(d, params.nu[0], eps, r);
    let rhs = (t_end * volume).powf(S::one() / S::of_usize(d + 1));
    Ok(KrylovReport {
        eps,
        lhs,
        lhs_std_error,
        rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ball_volumes() {
        assert_eq!(unit_ball_volume::<f64>(0), 1.0);
        assert_eq!(unit_ball_volume::<f64>(1), 2.0);
        assert_relative_eq!(unit_ball_volume::<f64>(2), std::f64::consts::PI);
        assert_relative_eq!(unit_ball_volume::<f64>(3), 4.0 * std::f64::consts::PI / 3.0);
    }

    #[test]
    fn slab_volumes_against_closed_forms() {
        let r: f64 = 2.0;
        // d = 2: int 2 sqrt(r^2 - s^2) ds = [s sqrt(r^2-s^2) + r^2 asin(s/r)]
        let prim = |s: f64| s * (r * r - s * s).sqrt() + r * r * (s / r).asin();
        assert_relative_eq!(
            slab_ball_volume(2, 0.5, 0.3, r),
            prim(0.8) - prim(0.2),
            epsilon = 1e-10
        );
        assert_relative_eq!(
            slab_ball_volume(2, 0.0, 5.0, r),
            std::f64::consts::PI * 4.0,
            epsilon = 1e-10
        );
        // d = 3: pi (r^2 s - s^3 / 3)
        let prim3 = |s: f64| std::f64::consts::PI * (r * r * s - s * s * s / 3.0);
        assert_relative_eq!(
            slab_ball_volume(3, 1.5, 1.0, r),
            prim3(2.0) - prim3(0.5),
            epsilon = 1e-10
        );
        assert_eq!(slab_ball_volume(1, 0.0, 0.25, r), 0.5);
        assert_eq!(slab_ball_volume(2, 10.0, 1.0, r), 0.0);
    }

    #[test]
    fn slab_missing_ball_gives_zero_zero() {
        let p = ModelParams::new(vec![1.0], 0.0, vec![0.0], vec![10.0], 1).unwrap();
        let path = SamplePath::new(vec![0.0, 0.5, 1.0], 1, vec![0.0, 1.0, -1.0]).unwrap();
        let rep = krylov_ratio(&[path], &p, 1.0, 3.0, 1.0).unwrap();
        assert_eq!((rep.lhs, rep.rhs, rep.ratio()), (0.0, 0.0, 0.0));
    }

    #[test]
    fn lhs_counts_slab_time_until_exit() {
        let p = ModelParams::new(vec![2.0], 0.0, vec![0.0], vec![0.0], 1).unwrap();
        // in slab on [0, 0.25) below threshold (a = 1), then above threshold (a = 1.5),
        // then exits the ball at t = 0.75
        let path = SamplePath::new(
            vec![0.0, 0.25, 0.5, 0.75, 1.0],
            1,
            vec![-0.05, 0.05, 0.5, 4.0, 0.0],
        )
        .unwrap();
        let rep = krylov_ratio(&[path], &p, 0.1, 3.0, 1.0).unwrap();
        let expected = 0.25 * 1.0f64.sqrt() + 0.25 * 1.5f64.sqrt();
        assert_relative_eq!(rep.lhs, expected);
        assert_relative_eq!(rep.rhs, (1.0f64 * 0.2).sqrt());
    }
}
