use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Mean and standard error `s / sqrt(M)` of a scalar sample.
///
/// The standard error is zero for a single value.
pub fn mean_and_std_error<S: Scalar>(values: &[S]) -> Result<(S, S)> {
    if values.is_empty() {
        return Err(Error::config("mean of an empty sample"));
    }
    let m = S::of_usize(values.len());
    let mean = values.iter().copied().sum::<S>() / m;
    if values.len() < 2 {
        return Ok((mean, S::zero()));
    }
    let ss: S = values.iter().map(|&v| (v - mean) * (v - mean)).sum();
    let var = ss / (m - S::one());
    Ok((mean, (var / m).sqrt()))
}

/// Per-coordinate moments and order statistics of an ensemble of vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary<S> {
    pub count: usize,
    pub mean: Vec<S>,
    /// Unbiased sample variance.
    pub variance: Vec<S>,
    /// Standard error of the mean.
    pub std_error: Vec<S>,
    /// Standard error of the sample variance, `sqrt((m4 - s^4) / M)` with `m4`
    /// the fourth central sample moment.
    pub variance_std_error: Vec<S>,
    sorted: Vec<Vec<S>>,
}

impl<S: Scalar> Summary<S> {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Nearest-rank quantile: the `ceil(p M)`-th smallest value (the minimum
    /// for `p = 0`).
    pub fn quantile(&self, coord: usize, p: S) -> Result<S> {
        if !(p >= S::zero() && p <= S::one()) {
            return Err(Error::config(format!(
                "quantile level must lie in [0, 1], got {p}"
            )));
        }
        let col = self
            .sorted
            .get(coord)
            .ok_or_else(|| Error::config(format!("coordinate {coord} out of range")))?;
        let rank = (p * S::of_usize(col.len()))
            .ceil()
            .to_usize()
            .unwrap_or(1)
            .max(1);
        Ok(col[rank.min(col.len()) - 1])
    }
}

/// Summary of `M >= 2` replicas of equal dimension.
pub fn summarize<S: Scalar, V: AsRef<[S]>>(samples: &[V]) -> Result<Summary<S>> {
    if samples.len() < 2 {
        return Err(Error::config(format!(
            "variance needs at least 2 replicas, got {}",
            samples.len()
        )));
    }
    let d = samples[0].as_ref().len();
    if samples.iter().any(|v| v.as_ref().len() != d) {
        return Err(Error::config("replicas have different dimensions"));
    }
    let m = S::of_usize(samples.len());
    let mut summary = Summary {
        count: samples.len(),
        mean: Vec::with_capacity(d),
        variance: Vec::with_capacity(d),
        std_error: Vec::with_capacity(d),
        variance_std_error: Vec::with_capacity(d),
        sorted: Vec::with_capacity(d),
    };
    for i in 0..d {
        let mut col: Vec<S> = samples.iter().map(|v| v.as_ref()[i]).collect();
        if col.iter().any(|v| v.is_nan()) {
            return Err(Error::numeric(format!("NaN in coordinate {i}")));
        }
        let mean = col.iter().copied().sum::<S>() / m;
        let (mut m2, mut m4) = (S::zero(), S::zero());
        for &v in &col {
            let dv = (v - mean) * (v - mean);
            m2 = m2 + dv;
            m4 = m4 + dv * dv;
        }
        let var = m2 / (m - S::one());
        let fourth = m4 / m;
        let biased = m2 / m;
        summary.mean.push(mean);
        summary.variance.push(var);
        summary.std_error.push((var / m).sqrt());
        summary
            .variance_std_error
            .push(((fourth - biased * biased).positive_part() / m).sqrt());
        col.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
        summary.sorted.push(col);
    }
    Ok(summary)
}
