//! Automatic labelling of automotive LiDAR point clouds for 4D radar
//! semantic segmentation.
//!
//! The crate covers the whole data path around a radar segmentation
//! network:
//!
//! - [`labelling`] turns a LiDAR frame, detector boxes and an image
//!   segmentation mask into per-point class labels;
//! - [`voxel`] rasterizes labeled points into the polar label cube;
//! - [`radar`] reduces RAED radar tensors to the spatial RAE cube;
//! - [`segmath`] holds the fusion, decoding and loss kernels;
//! - [`eval`] computes detection probability, false-alarm rate, Chamfer
//!   distance and precision/recall/F1;
//! - [`io`] reads and writes every file the tools exchange;
//! - [`synth`] generates deterministic synthetic scenes with ground truth.
//!
//! Data-parallel kernels run on rayon when the `parallel` feature is on
//! (the default) and on plain iterators otherwise. Results are identical
//! either way.
// Negated float comparisons are used on purpose so NaN fails the guard.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eval;
pub mod geometry;
pub mod io;
pub mod labelling;
pub mod labels;
pub mod par;
pub mod radar;
pub mod render;
pub mod segmath;
pub mod spatial;
pub mod synth;
pub mod voxel;

pub use geometry::{OrientedBox, Point3, PolarCoord, RigidTransform};
pub use labelling::{LabeledPointCloud, PipelineConfig};
pub use labels::ClassLabel;
pub use voxel::{GridSpec, LabelCube};

/// Serde adapter storing radians as degrees.
pub(crate) mod degrees {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(rad: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(rad.to_degrees())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        f64::deserialize(d).map(f64::to_radians)
    }
}
