//! Time grids and grid-sampled real-valued paths.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Uniform grid `t_k = k * T / K`, `k = 0..=K`. With `K = 0` the grid is `{0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<S> {
    end: S,
    steps: usize,
}

impl<S: Scalar> TimeGrid<S> {
    pub fn new(end: S, steps: usize) -> Result<Self> {
        if !(end.is_finite() && end >= S::zero()) {
            return Err(Error::config(format!(
                "grid end must be finite and nonnegative, got {end}"
            )));
        }
        if steps > 0 && end == S::zero() {
            return Err(Error::config("a grid with steps needs a positive end time"));
        }
        Ok(Self { end, steps })
    }

    /// The one-point grid `{0}`.
    pub fn origin() -> Self {
        Self {
            end: S::zero(),
            steps: 0,
        }
    }

    pub fn end(&self) -> S {
        self.end
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> S {
        if k == self.steps {
            self.end
        } else {
            self.end * S::of_usize(k) / S::of_usize(self.steps)
        }
    }

    pub fn times(&self) -> Vec<S> {
        (0..=self.steps).map(|k| self.time(k)).collect()
    }

    /// Index of the grid point nearest to `t` (clamped to the grid).
    pub fn nearest_index(&self, t: S) -> usize {
        if self.steps == 0 || t <= S::zero() {
            return 0;
        }
        let k = (t / self.end * S::of_usize(self.steps)).round();
        k.to_usize().unwrap_or(self.steps).min(self.steps)
    }
}

/// A `dim`-dimensional path recorded at increasing times.
///
/// Values are stored row-major: row `k` holds the state at `times[k]`.
/// Paths built from a [`TimeGrid`] are uniform; Euler–Maruyama paths whose
/// horizon is not a multiple of the step have a shorter last cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath<S> {
    times: Vec<S>,
    dim: usize,
    values: Vec<S>,
}

impl<S: Scalar> SamplePath<S> {
    pub fn new(times: Vec<S>, dim: usize, values: Vec<S>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::config("a sample path needs at least one time"));
        }
        if dim == 0 {
            return Err(Error::config("a sample path needs dim >= 1"));
        }
        if values.len() != times.len() * dim {
            return Err(Error::config(format!(
                "expected {} values for {} times in dimension {dim}, got {}",
                times.len() * dim,
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config("sample times must be strictly increasing"));
        }
        Ok(Self { times, dim, values })
    }

    pub(crate) fn from_parts_unchecked(times: Vec<S>, dim: usize, values: Vec<S>) -> Self {
        debug_assert_eq!(values.len(), times.len() * dim);
        Self { times, dim, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[S] {
        &self.times
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn row(&self, k: usize) -> &[S] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[S]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn end_time(&self) -> S {
        *self.times.last().expect("nonempty")
    }

    pub fn terminal(&self) -> &[S] {
        self.row(self.len() - 1)
    }

    /// Index of the recorded time nearest to `t`.
    pub fn nearest_index(&self, t: S) -> usize {
        let upper = self.times.partition_point(|&s| s < t);
        if upper == 0 {
            0
        } else if upper == self.times.len() {
            upper - 1
        } else if (self.times[upper] - t) < (t - self.times[upper - 1]) {
            upper
        } else {
            upper - 1
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Applies `f` to every row, producing a path of dimension `out_dim`.
    pub fn map_rows(&self, out_dim: usize, mut f: impl FnMut(S, &[S], &mut [S])) -> Self {
        let mut values = vec![S::zero(); self.len() * out_dim];
        for (k, out) in values.chunks_exact_mut(out_dim).enumerate() {
            f(self.times[k], self.row(k), out);
        }
        Self::from_parts_unchecked(self.times.clone(), out_dim, values)
    }
}
