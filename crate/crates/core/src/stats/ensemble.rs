use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{replica_rng, ReplicaRng};

/// Results of `M` replicas, in replica order.
///
/// Replica `k` was produced from [`replica_rng`]`(master_seed, k)`, so the
/// contents depend only on the generator, `M` and the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<T> {
    pub replicas: Vec<T>,
    pub master_seed: u64,
    /// Digest of the configuration that produced the ensemble.
    pub meta: String,
}

impl<T> Ensemble<T> {
    pub fn len(&self) -> usize {
        self.replicas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replicas.is_empty()
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Ensemble<U> {
        Ensemble {
            replicas: self.replicas.iter().map(f).collect(),
            master_seed: self.master_seed,
            meta: self.meta.clone(),
        }
    }
}

fn check_count(m: usize) -> Result<()> {
    if m == 0 {
        Err(Error::config("an ensemble needs at least one replica"))
    } else {
        Ok(())
    }
}

fn first_failure<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(results.len());
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => out.push(v),
            Err(e) => {
                return Err(Error::Replica {
                    index,
                    source: Box::new(e),
                })
            }
        }
    }
    Ok(out)
}

/// Runs `m` replicas on the current rayon pool.
///
/// On failure the error names the lowest failing replica index.
pub fn run_ensemble<T, F>(
    m: usize,
    master_seed: u64,
    meta: impl Into<String>,
    generator: F,
) -> Result<Ensemble<T>>
where
    T: Send,
    F: Fn(usize, &mut ReplicaRng) -> Result<T> + Sync,
{
    check_count(m)?;
    let results: Vec<Result<T>> = (0..m)
        .into_par_iter()
        .map(|k| generator(k, &mut replica_rng(master_seed, k as u64)))
        .collect();
    Ok(Ensemble {
        replicas: first_failure(results)?,
        master_seed,
        meta: meta.into(),
    })
}

/// Sequential variant executing replicas in the given `order` (a permutation
/// of `0..m`). The result is identical to [`run_ensemble`].
pub fn run_ensemble_in_order<T, F>(
    order: &[usize],
    master_seed: u64,
    meta: impl Into<String>,
    mut generator: F,
) -> Result<Ensemble<T>>
where
    F: FnMut(usize, &mut ReplicaRng) -> Result<T>,
{
    let m = order.len();
    check_count(m)?;
    let mut slots: Vec<Option<Result<T>>> = (0..m).map(|_| None).collect();
    for &k in order {
        let slot = slots
            .get_mut(k)
            .ok_or_else(|| Error::config(format!("replica index {k} out of range")))?;
        if slot.is_some() {
            return Err(Error::config(format!("replica index {k} scheduled twice")));
        }
        *slot = Some(generator(k, &mut replica_rng(master_seed, k as u64)));
    }
    let results = slots
        .into_iter()
        .map(|s| s.expect("a permutation fills every slot"))
        .collect();
    Ok(Ensemble {
        replicas: first_failure(results)?,
        master_seed,
        meta: meta.into(),
    })
}
