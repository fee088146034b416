//! Line-oriented file formats and run manifests.

pub mod angles;
pub mod density_file;
pub mod manifest;
pub mod model;
pub mod results;

pub use angles::{format_angles, parse_angle, parse_angles, read_angles};
pub use density_file::{
    format_density_matrix, parse_density_matrix, read_density_matrix, write_density_matrix, DensityMatrixFile,
    ReadOptions,
};
pub use manifest::{load_manifest, parse_manifest, ManifestEntry, RunManifest};
pub use model::{format_model, parse_model, read_model, ModelFile};
pub use results::{
    format_results, format_visibility, parse_results, read_results, write_atomic, write_csv, write_results, ResultRecord, StateFields, SummaryRow,
};
