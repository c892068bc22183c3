//! Analytic fields, particle advection, quasirandom seeding and flow-map training data.

mod advect;
mod dataset;
mod field;
mod sobol;

pub use advect::{trace_pathline, trace_pathlines, Integrator, Pathline};
pub use dataset::{build_dataset, FlowMapDataset, Rescale, RescaleMode, Sample};
pub use field::{FieldKind, SynthParams, TornadoParams, VectorField};
pub use sobol::{
    pseudo_random_seeds, sobol_seeds, uniform_grid_seeds, SeedGenerator, SeedSet, Sobol,
};
