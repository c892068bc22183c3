//! Trajectory ensembles from Deep Ensembles, Monte Carlo dropout and SWAG.

mod ensemble;
mod sample;
mod swag;
mod synthetic;

use std::path::Path;

pub use ensemble::{member_average, MeanMode, TrajectoryEnsemble, UqMethod};
pub use sample::{deep_ensemble_sample, mc_dropout_sample};
pub use swag::{swag_draw, swag_fit, swag_sample_trajectories, SwagConfig, SwagPosterior};
pub use synthetic::random_walk_ensembles;

/// Loads and validates ensembles from a JSON or binary ensemble file.
pub fn load_external_ensemble(path: impl AsRef<Path>) -> crate::Result<Vec<TrajectoryEnsemble>> {
    crate::io::load_ensembles(path)
}
