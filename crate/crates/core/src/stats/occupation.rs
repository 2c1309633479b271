use crate::ctmc::{scale_state, QueuePath};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::path::SamplePath;
use crate::scalar::Scalar;

fn check_eps<S: Scalar>(eps: S) -> Result<()> {
    if eps > S::zero() {
        Ok(())
    } else {
        Err(Error::config(format!("eps must be positive, got {eps}")))
    }
}

/// Fraction of `[0, T]` the sampled path spends within `eps` of the
/// discontinuity set, by the left-endpoint rule over the path's cells.
pub fn occupation_near_g<S: Scalar>(
    path: &SamplePath<S>,
    params: &ModelParams<S>,
    eps: S,
) -> Result<S> {
    check_eps(eps)?;
    if path.dim() != params.d {
        return Err(Error::config("path dimension differs from the model's"));
    }
    let times = path.times();
    let horizon = path.end_time() - times[0];
    if !(horizon > S::zero()) {
        return Err(Error::config(
            "occupation needs a path spanning positive time",
        ));
    }
    let mut near = S::zero();
    for k in 0..path.len() - 1 {
        if params.distance_to_g(path.row(k)) < eps {
            near = near + (times[k + 1] - times[k]);
        }
    }
    Ok(near / horizon)
}

/// Exact sojourn fraction of the scaled queue path within `eps` of the
/// discontinuity set over `[0, horizon]`.
pub fn occupation_near_g_queue<S: Scalar>(
    path: &QueuePath<S>,
    params: &ModelParams<S>,
    eps: S,
) -> Result<S> {
    check_eps(eps)?;
    if path.dim() != params.d {
        return Err(Error::config("path dimension differs from the model's"));
    }
    let mut x = vec![S::zero(); params.d];
    let mut near = S::zero();
    for (start, end, state) in path.segments() {
        scale_state(state, params, &mut x);
        if params.distance_to_g(&x) < eps {
            near = near + (end - start);
        }
    }
    Ok(near / path.horizon())
}
