//! Uncertainty tubes for neural flow-map trajectories.
//!
//! The crate is organised as a pipeline:
//!
//! * [`vecfield`]: analytic time-varying fields, particle advection, Sobol seeding and
//!   flow-map training data.
//! * [`flowmap`]: the encoder/decoder sine MLP surrogate with manual backpropagation.
//! * [`uq`]: Deep Ensembles, MC Dropout and SWAG trajectory ensembles.
//! * [`tube`]: projection, planar covariance, superellipse rings, ring alignment and
//!   the swept tube mesh.
//! * [`color`]: value-suppressing uncertainty coloring.
//! * [`io`]: binary and JSON file formats, OBJ export.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod color;
pub mod error;
pub mod flowmap;
pub mod geom;
pub mod io;
pub mod rng;
pub mod tube;
pub mod uq;
pub mod vecfield;

pub use color::{ColorSample, ColormapConfig, Palette};
pub use error::{Error, Result};
pub use flowmap::{FlowMapModel, ModelConfig, TrainConfig, TrainReport};
pub use geom::Aabb;
pub use tube::{RadiusConvention, TubeMesh, TubeParams, UncertaintyStats};
pub use uq::{TrajectoryEnsemble, UqMethod};
pub use vecfield::{FlowMapDataset, SeedSet, VectorField};

pub use glam::DVec3;
