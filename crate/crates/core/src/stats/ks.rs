use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Two-sample Kolmogorov–Smirnov statistic `sup_x |F_a(x) - F_b(x)|`.
pub fn ks_distance<S: Scalar>(a: &[S], b: &[S]) -> Result<S> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::config(
            "Kolmogorov–Smirnov distance needs two nonempty samples",
        ));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::numeric("NaN in Kolmogorov–Smirnov sample"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).expect("no NaN"));
    b.sort_by(|x, y| x.partial_cmp(y).expect("no NaN"));
    let (na, nb) = (a.len(), b.len());
    let (fa, fb) = (S::of_usize(na), S::of_usize(nb));
    let (mut i, mut j) = (0, 0);
    let mut sup = S::zero();
    while i < na && j < nb {
        // step past every copy of the smallest remaining value in both samples
        let v = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < na && a[i] == v {
            i += 1;
        }
        while j < nb && b[j] == v {
            j += 1;
        }
        let gap = (S::of_usize(i) / fa - S::of_usize(j) / fb).abs();
        sup = sup.max(gap);
    }
    Ok(sup)
}

/// Per-coordinate Kolmogorov–Smirnov distances between two vector samples.
#[derive(Debug, Clone, PartialEq)]
pub struct KsReport<S> {
    pub per_coordinate: Vec<S>,
    pub max: S,
}

pub fn ks_per_coordinate<S: Scalar, V: AsRef<[S]>>(a: &[V], b: &[V]) -> Result<KsReport<S>> {
    let first = a
        .first()
        .or(b.first())
        .ok_or_else(|| Error::config("Kolmogorov–Smirnov distance needs two nonempty samples"))?;
    let d = first.as_ref().len();
    if a.iter().chain(b).any(|v| v.as_ref().len() != d) {
        return Err(Error::config("sample vectors have different dimensions"));
    }
    let per_coordinate = (0..d)
        .map(|i| {
            let ca: Vec<S> = a.iter().map(|v| v.as_ref()[i]).collect();
            let cb: Vec<S> = b.iter().map(|v| v.as_ref()[i]).collect();
            ks_distance(&ca, &cb)
        })
        .collect::<Result<Vec<_>>>()?;
    let max = per_coordinate.iter().copied().fold(S::zero(), S::max);
    Ok(KsReport {
        per_coordinate,
        max,
    })
}

/// Asymptotic 95% quantile `1.36 * sqrt(2 / m)` of the statistic between two
/// independent same-law samples of size `m`.
pub fn ks_noise_floor<S: Scalar>(m: usize) -> S {
    S::of(1.36) * (S::of(2.0) / S::of_usize(m)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{replica_rng, uniform_open01};
    use proptest::prelude::*;

    /// Brute force: evaluate both ECDFs at every sample point.
    fn ks_brute(a: &[f64], b: &[f64]) -> f64 {
        let ecdf =
            |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
        a.iter()
            .chain(b)
            .map(|&x| (ecdf(a, x) - ecdf(b, x)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn examples() {
        assert_eq!(
            ks_distance(&[0.3, 0.1, 0.3], &[0.1, 0.3, 0.3]).unwrap(),
            0.0
        );
        assert_eq!(ks_distance(&[0.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(ks_distance(&[0.0, 1.0], &[0.5]).unwrap(), 0.5);
        assert!(ks_distance::<f64>(&[], &[1.0]).unwrap_err().is_config());
    }

    #[test]
    fn per_coordinate_report() {
        let a = vec![vec![0.0, 5.0], vec![1.0, 5.0]];
        let b = vec![vec![0.5, 5.0]];
        let r = ks_per_coordinate(&a, &b).unwrap();
        assert_eq!(r.per_coordinate, vec![0.5, 0.0]);
        assert_eq!(r.max, 0.5);
        assert!(ks_per_coordinate(&a, &[vec![1.0]]).is_err());
    }

    #[test]
    fn triangle_spot_check() {
        let mut rng = replica_rng(11, 0);
        for _ in 0..50 {
            let mut draw = |shift: f64| -> Vec<f64> {
                (0..40).map(|_| uniform_open01(&mut rng) + shift).collect()
            };
            let (a, b, c) = (draw(0.0), draw(0.2), draw(0.1));
            let ab = ks_distance(&a, &b).unwrap();
            let bc = ks_distance(&b, &c).unwrap();
            let ac = ks_distance(&a, &c).unwrap();
            assert!(ac <= ab + bc + 1e-12);
        }
    }

    #[test]
    fn noise_floor_value() {
        assert!((ks_noise_floor::<f64>(20_000) - 0.0136).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            a in prop::collection::vec(-5i32..5, 1..30),
            b in prop::collection::vec(-5i32..5, 1..30),
        ) {
            // small integer support exercises ties
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let fast = ks_distance(&a, &b).unwrap();
            prop_assert!((fast - ks_brute(&a, &b)).abs() < 1e-12);
            prop_assert_eq!(fast, ks_distance(&b, &a).unwrap());
            prop_assert_eq!(ks_distance(&a, &a).unwrap(), 0.0);
            prop_assert!((0.0..=1.0).contains(&fast));
        }
    }
}
