//! Ensembles and the statistical checks run against them.

mod ensemble;
mod krylov;
mod ks;
mod martingale;
mod occupation;
mod summary;

pub use ensemble::{run_ensemble, run_ensemble_in_order, Ensemble};
pub use krylov::{krylov_ratio, slab_ball_volume, unit_ball_volume, KrylovReport};
pub use ks::{ks_distance, ks_noise_floor, ks_per_coordinate, KsReport};
pub use martingale::{
    martingale_residual, test_family, CoeffSource, PlateauMonomial, ResidualReport, TestFunction,
    TimeFactor, Weight, DEFAULT_PLATEAU_RADIUS,
};
pub use occupation::{occupation_near_g, occupation_near_g_queue};
pub use summary::{mean_and_std_error, summarize, Summary};
