//! File formats.
//!
//! Binary files start with a 4-byte magic and a little-endian `u32` version:
//!
//! | magic  | content                                   |
//! |--------|-------------------------------------------|
//! | `UTFM` | flow-map training dataset                 |
//! | `UTNN` | flow-map model                            |
//! | `UTEN` | trajectory ensembles (`f32` coordinates)  |
//! | `UTSW` | SWAG weight posterior                     |
//!
//! Ensembles and meshes also have JSON forms; meshes export to vertex-colored OBJ.

mod binary;
mod dataset;
mod ensemble;
mod mesh;
mod model;
mod posterior;

pub use dataset::{decode_dataset, encode_dataset, load_dataset, save_dataset};
pub use ensemble::{
    decode_ensembles, encode_ensembles, ensembles_from_json, ensembles_to_json, load_ensembles,
    save_ensembles_binary, save_ensembles_json, EnsembleFile,
};
pub use mesh::{
    export_mesh_json, export_obj, load_mesh_json, obj_string, MeshDocument, MeshMeta, MeshRecord,
    MeshStats, MESH_VERSION,
};
pub use model::{decode_model, encode_model, load_model, save_model};
pub use posterior::{decode_posterior, encode_posterior, load_posterior, save_posterior};
