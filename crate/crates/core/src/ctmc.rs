//! Exact event-driven simulation of the queue-length chain.
//!
//! The chain is simulated with the direct stochastic simulation algorithm:
//! all channel rates are recomputed after every event, the holding time is
//! exponential with the total rate, and the firing channel is chosen in
//! proportion to its rate. Each event consumes exactly two uniforms.

use rand::RngCore;

use crate::error::{Error, Result};
use crate::model::{check_len, DerivedRates, ModelParams};
use crate::path::{SamplePath, TimeGrid};
use crate::rng::{exponential, uniform_open01};
use crate::scalar::Scalar;

/// Default cap on the number of stored events in a [`QueuePath`].
pub const DEFAULT_MAX_EVENTS: usize = 100_000_000;

/// Queue lengths at the `d` stations.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QueueState {
    pub q: Vec<u64>,
}

impl QueueState {
    pub fn new(q: Vec<u64>) -> Self {
        Self { q }
    }

    pub fn zeros(d: usize) -> Self {
        Self { q: vec![0; d] }
    }

    pub fn total(&self) -> u64 {
        self.q.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    /// Free-stream arrival, routed to the cheapest station.
    RoutedArrival,
    /// Arrival on a station's own stream.
    DedicatedArrival,
    /// One customer leaves (below threshold).
    SingleDeparture,
    /// Two customers leave together (at or above threshold).
    PairDeparture,
    /// The unpaired customer of an odd queue leaves (at or above threshold).
    OddSingleton,
}

/// One transition channel of the chain at a given state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channel<S> {
    pub rate: S,
    pub station: usize,
    pub jump: i8,
    pub kind: ChannelKind,
}

/// Departure rate of a single-departure channel, or the pair/singleton rates.
#[derive(Debug, Clone, Copy)]
enum Departures {
    Single(u64),
    Paired { pairs: u64, odd: bool },
}

#[inline]
fn departures(q: u64, threshold: u64) -> Departures {
    if q < threshold {
        Departures::Single(q)
    } else {
        Departures::Paired {
            pairs: q / 2,
            odd: q % 2 == 1,
        }
    }
}

#[inline]
fn route_queue<S: Scalar>(q: &[u64], alpha: &[S]) -> usize {
    let mut best = 0;
    let mut best_val = alpha[0] * S::of_u64(q[0]);
    for i in 1..q.len() {
        let v = alpha[i] * S::of_u64(q[i]);
        if v < best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

/// Nonzero transition channels at `state`, in the canonical order used by the
/// simulator: routed arrival, dedicated arrivals by station, then the
/// departure channels of each station.
pub fn event_rates<S: Scalar>(
    state: &QueueState,
    params: &ModelParams<S>,
    rates: &DerivedRates<S>,
) -> Vec<Channel<S>> {
    let q = &state.q;
    let mut out = Vec::with_capacity(3 * q.len() + 1);
    if rates.lambda0 > S::zero() {
        out.push(Channel {
            rate: rates.lambda0,
            station: route_queue(q, &params.alpha),
            jump: 1,
            kind: ChannelKind::RoutedArrival,
        });
    }
    for (i, &l) in rates.lambda.iter().enumerate() {
        if l > S::zero() {
            out.push(Channel {
                rate: l,
                station: i,
                jump: 1,
                kind: ChannelKind::DedicatedArrival,
            });
        }
    }
    for (i, (&qi, &threshold)) in q.iter().zip(&rates.thresholds).enumerate() {
        match departures(qi, threshold) {
            Departures::Single(0) => {}
            Departures::Single(r) => out.push(Channel {
                rate: S::of_u64(r),
                station: i,
                jump: -1,
                kind: ChannelKind::SingleDeparture,
            }),
            Departures::Paired { pairs, odd } => {
                if pairs > 0 {
                    out.push(Channel {
                        rate: S::of_u64(pairs),
                        station: i,
                        jump: -2,
                        kind: ChannelKind::PairDeparture,
                    });
                }
                if odd {
                    out.push(Channel {
                        rate: S::one(),
                        station: i,
                        jump: -1,
                        kind: ChannelKind::OddSingleton,
                    });
                }
            }
        }
    }
    out
}

/// Recorded trajectory of the chain: the state after each event, with the
/// initial state at time 0 first. Constant between events, right-continuous.
#[derive(Debug, Clone, PartialEq)]
pub struct QueuePath<S> {
    dim: usize,
    times: Vec<S>,
    states: Vec<u64>,
    horizon: S,
}

impl<S: Scalar> QueuePath<S> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Event times, starting with 0.
    pub fn times(&self) -> &[S] {
        &self.times
    }

    pub fn horizon(&self) -> S {
        self.horizon
    }

    /// Number of recorded states (events + 1).
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn events(&self) -> usize {
        self.times.len() - 1
    }

    pub fn state(&self, k: usize) -> &[u64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[u64]> + '_ {
        self.states.chunks_exact(self.dim)
    }

    /// State in force at time `t` (the last event at or before `t`).
    pub fn state_at(&self, t: S) -> &[u64] {
        let k = self.times.partition_point(|&s| s <= t);
        self.state(k.saturating_sub(1))
    }

    /// Sojourn intervals `(start, end, state)` covering `[0, horizon]`.
    pub fn segments(&self) -> impl Iterator<Item = (S, S, &[u64])> + '_ {
        (0..self.len()).map(move |k| {
            let end = if k + 1 < self.len() {
                self.times[k + 1]
            } else {
                self.horizon
            };
            (self.times[k], end, self.state(k))
        })
    }
}

/// Direct-method simulator for one parameter set.
#[derive(Debug, Clone)]
pub struct QueueSimulator<'a, S> {
    params: &'a ModelParams<S>,
    rates: &'a DerivedRates<S>,
}

impl<'a, S: Scalar> QueueSimulator<'a, S> {
    pub fn new(params: &'a ModelParams<S>, rates: &'a DerivedRates<S>) -> Result<Self> {
        params.validate()?;
        let d = params.d;
        check_len("lambda", rates.lambda.len(), d)?;
        check_len("thresholds", rates.thresholds.len(), d)?;
        if !(rates.lambda0 >= S::zero()) || rates.lambda.iter().any(|l| !(*l >= S::zero())) {
            return Err(Error::config("arrival rates must be nonnegative"));
        }
        Ok(Self { params, rates })
    }

    /// Runs the chain from `q` (updated in place) until the first event at or
    /// after `t_end`, which is not applied. `on_event(t, station, q)` sees the
    /// post-jump state of every applied event. Returns the number of events.
    pub fn run<R, F>(&self, q: &mut [u64], t_end: S, rng: &mut R, mut on_event: F) -> Result<usize>
    where
        R: RngCore + ?Sized,
        F: FnMut(S, usize, &[u64]) -> Result<()>,
    {
        check_len("initial state", q.len(), self.params.d)?;
        if !(t_end > S::zero() && t_end.is_finite()) {
            return Err(Error::config(format!(
                "horizon must be positive and finite, got {t_end}"
            )));
        }
        let lambda0 = self.rates.lambda0;
        let arrivals: S = lambda0 + self.rates.lambda.iter().copied().sum::<S>();
        let thresholds = &self.rates.thresholds;
        let mut t = S::zero();
        let mut events = 0usize;
        loop {
            let mut total = arrivals;
            for (&qi, &n) in q.iter().zip(thresholds) {
                total = total
                    + match departures(qi, n) {
                        Departures::Single(r) => S::of_u64(r),
                        Departures::Paired { pairs, odd } => S::of_u64(pairs + odd as u64),
                    };
            }
            if !total.is_finite() {
                return Err(Error::numeric(format!(
                    "total event rate is {total} at t = {t}"
                )));
            }
            if total <= S::zero() {
                break;
            }
            let wait = S::of(exponential(rng, total.as_f64()));
            t = t + wait;
            if t >= t_end {
                break;
            }
            let target = S::of(uniform_open01(rng)) * total;
            let (station, jump) = self.select(q, target);
            apply_jump(q, station, jump)?;
            events += 1;
            on_event(t, station, q)?;
        }
        Ok(events)
    }

    fn select(&self, q: &[u64], target: S) -> (usize, i8) {
        let mut acc = self.rates.lambda0;
        if target < acc {
            return (route_queue(q, &self.params.alpha), 1);
        }
        for (i, &l) in self.rates.lambda.iter().enumerate() {
            acc = acc + l;
            if target < acc {
                return (i, 1);
            }
        }
        let mut fallback = None;
        for (i, (&qi, &n)) in q.iter().zip(&self.rates.thresholds).enumerate() {
            match departures(qi, n) {
                Departures::Single(0) => {}
                Departures::Single(r) => {
                    acc = acc + S::of_u64(r);
                    fallback = Some((i, -1));
                    if target < acc {
                        return (i, -1);
                    }
                }
                Departures::Paired { pairs, odd } => {
                    if pairs > 0 {
                        acc = acc + S::of_u64(pairs);
                        fallback = Some((i, -2));
                        if target < acc {
                            return (i, -2);
                        }
                    }
                    if odd {
                        acc = acc + S::one();
                        fallback = Some((i, -1));
                        if target < acc {
                            return (i, -1);
                        }
                    }
                }
            }
        }
        // Rounding pushed the target past the last partial sum.
        fallback.unwrap_or_else(|| {
            let last = self.rates.lambda.iter().rposition(|&l| l > S::zero());
            match last {
                Some(i) => (i, 1),
                None => (route_queue(q, &self.params.alpha), 1),
            }
        })
    }
}

#[inline]
fn apply_jump(q: &mut [u64], station: usize, jump: i8) -> Result<()> {
    let qi = &mut q[station];
    *qi = if jump > 0 {
        qi.checked_add(jump as u64)
            .ok_or_else(|| Error::numeric("queue length overflow"))?
    } else {
        qi.checked_sub(u64::from(jump.unsigned_abs()))
            .ok_or_else(|| Error::numeric("departure from an empty station"))?
    };
    Ok(())
}

/// Simulates one trajectory on `[0, t_end]` and stores every event.
pub fn simulate_queue<S: Scalar, R: RngCore + ?Sized>(
    params: &ModelParams<S>,
    rates: &DerivedRates<S>,
    q0: &QueueState,
    t_end: S,
    rng: &mut R,
) -> Result<QueuePath<S>> {
    simulate_queue_capped(params, rates, q0, t_end, rng, DEFAULT_MAX_EVENTS)
}

/// [`simulate_queue`] with an explicit cap on the number of stored events.
pub fn simulate_queue_capped<S: Scalar, R: RngCore + ?Sized>(
    params: &ModelParams<S>,
    rates: &DerivedRates<S>,
    q0: &QueueState,
    t_end: S,
    rng: &mut R,
    max_events: usize,
) -> Result<QueuePath<S>> {
    let sim = QueueSimulator::new(params, rates)?;
    let d = params.d;
    let mut q = q0.q.clone();
    let mut times = vec![S::zero()];
    let mut states = q.clone();
    sim.run(&mut q, t_end, rng, |t, _, state| {
        if times.len() > max_events {
            return Err(Error::numeric(format!(
                "more than {max_events} events; use grid-sampled simulation instead"
            )));
        }
        times.push(t);
        states.extend_from_slice(state);
        Ok(())
    })?;
    Ok(QueuePath {
        dim: d,
        times,
        states,
        horizon: t_end,
    })
}

/// Simulates one trajectory and records only the right-continuous state at
/// the points of `grid`. No event list is kept, so there is no event cap.
pub fn simulate_queue_on_grid<S: Scalar, R: RngCore + ?Sized>(
    params: &ModelParams<S>,
    rates: &DerivedRates<S>,
    q0: &QueueState,
    grid: &TimeGrid<S>,
    rng: &mut R,
) -> Result<SamplePath<S>> {
    let sim = QueueSimulator::new(params, rates)?;
    let d = params.d;
    check_len("initial state", q0.q.len(), d)?;
    let times = grid.times();
    let mut values = Vec::with_capacity(times.len() * d);
    let mut q = q0.q.clone();
    let mut next = 0usize;
    let mut record_until = |limit: Option<S>, state: &[u64], values: &mut Vec<S>| {
        while next < times.len() && limit.is_none_or(|l| times[next] < l) {
            values.extend(state.iter().map(|&v| S::of_u64(v)));
            next += 1;
        }
    };
    if grid.steps() > 0 {
        let mut before = q.clone();
        sim.run(&mut q, grid.end(), rng, |t, _, state| {
            record_until(Some(t), &before, &mut values);
            before.copy_from_slice(state);
            Ok(())
        })?;
    }
    record_until(None, &q, &mut values);
    Ok(SamplePath::from_parts_unchecked(times, d, values))
}

/// Right-continuous values of `path` at the points of `grid`, as reals.
pub fn sample_on_grid<S: Scalar>(path: &QueuePath<S>, grid: &TimeGrid<S>) -> Result<SamplePath<S>> {
    if grid.end() > path.horizon() {
        return Err(Error::config(format!(
            "grid ends at {} beyond the path horizon {}",
            grid.end(),
            path.horizon()
        )));
    }
    let times = grid.times();
    let mut values = Vec::with_capacity(times.len() * path.dim());
    for &t in &times {
        values.extend(path.state_at(t).iter().map(|&v| S::of_u64(v)));
    }
    Ok(SamplePath::from_parts_unchecked(times, path.dim(), values))
}

/// Diffusion scaling `x_i = (Q_i - n / alpha_i) / sqrt(n)`.
pub fn scale<S: Scalar>(samples: &SamplePath<S>, params: &ModelParams<S>) -> SamplePath<S> {
    scale_with(samples, params, |_| S::one())
}

/// Scaling with time-dependent centering `x_i = (Q_i - n q(t) / alpha_i) / sqrt(n)`.
pub fn scale_with<S: Scalar>(
    samples: &SamplePath<S>,
    params: &ModelParams<S>,
    centering: impl Fn(S) -> S,
) -> SamplePath<S> {
    let n = S::of_u64(params.n);
    let inv_sqrt_n = n.sqrt().recip();
    samples.map_rows(params.d, |t, q, out| {
        let c = centering(t);
        for i in 0..q.len() {
            out[i] = (q[i] - n * c / params.alpha[i]) * inv_sqrt_n;
        }
    })
}

/// Scaled state of an integer queue vector.
pub fn scale_state<S: Scalar>(q: &[u64], params: &ModelParams<S>, out: &mut [S]) {
    let n = S::of_u64(params.n);
    let inv_sqrt_n = n.sqrt().recip();
    for i in 0..q.len() {
        out[i] = (S::of_u64(q[i]) - n / params.alpha[i]) * inv_sqrt_n;
    }
}

/// `y_t = int_0^t f(x_s) ds` along the scaled queue path, integrated exactly
/// over each sojourn interval and reported at the points of `grid`.
///
/// `f` maps a scaled state to an `out_dim`-vector.
pub fn functional_integral_queue<S: Scalar>(
    path: &QueuePath<S>,
    params: &ModelParams<S>,
    grid: &TimeGrid<S>,
    out_dim: usize,
    mut f: impl FnMut(&[S], &mut [S]),
) -> Result<SamplePath<S>> {
    if grid.end() > path.horizon() {
        return Err(Error::config("grid exceeds the path horizon"));
    }
    let d = path.dim();
    let times = grid.times();
    let mut x = vec![S::zero(); d];
    let mut fx = vec![S::zero(); out_dim];
    let mut acc = vec![S::zero(); out_dim];
    let mut values = Vec::with_capacity(times.len() * out_dim);
    let mut next = 0usize;
    for (start, end, state) in path.segments() {
        if next == times.len() {
            break;
        }
        scale_state(state, params, &mut x);
        f(&x, &mut fx);
        if fx.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(format!(
                "functional is not finite at t = {start}"
            )));
        }
        let mut from = start;
        // grid points inside this sojourn interval get a partial contribution
        while next < times.len() && times[next] <= end {
            let upto = times[next];
            for (a, &v) in acc.iter_mut().zip(&fx) {
                *a = *a + v * (upto - from);
            }
            from = upto;
            values.extend_from_slice(&acc);
            next += 1;
        }
        for (a, &v) in acc.iter_mut().zip(&fx) {
            *a = *a + v * (end - from);
        }
    }
    Ok(SamplePath::from_parts_unchecked(times, out_dim, values))
}

/// Left-endpoint Riemann sum of `f` along a sampled path.
pub fn functional_integral_grid<S: Scalar>(
    samples: &SamplePath<S>,
    out_dim: usize,
    mut f: impl FnMut(&[S], &mut [S]),
) -> Result<SamplePath<S>> {
    let mut fx = vec![S::zero(); out_dim];
    let mut acc = vec![S::zero(); out_dim];
    let mut values = Vec::with_capacity(samples.len() * out_dim);
    values.extend_from_slice(&acc);
    let times = samples.times();
    for k in 0..samples.len() - 1 {
        f(samples.row(k), &mut fx);
        if fx.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(format!(
                "functional is not finite at t = {}",
                times[k]
            )));
        }
        let dt = times[k + 1] - times[k];
        for (a, &v) in acc.iter_mut().zip(&fx) {
            *a = *a + v * dt;
        }
        values.extend_from_slice(&acc);
    }
    Ok(SamplePath::from_parts_unchecked(
        times.to_vec(),
        out_dim,
        values,
    ))
}
