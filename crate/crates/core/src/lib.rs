//! Optimized linear transcoding between spatial audio formats.
//!
//! A transcoder `T` maps `M` input channels to `N` output channels. It is
//! found by minimizing a perceptual cost evaluated on a cloud of virtual
//! source directions, through the chain `S = G · Tᵀ · D_spkᵀ` from an encoding
//! matrix `G` to loudspeaker gains `S`.

pub mod analysis;
pub mod cost;
pub mod error;
pub mod formats;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod optimizer;
pub mod real;

pub use error::{Error, Result};
pub use real::Real;
pub use io::config::{load_config, JobConfig};
pub use io::matrix_file::{export_matrix, import_matrix, MatrixFile, MatrixKind};

/// Double-precision instantiations.
pub type Direction64 = geometry::Direction<f64>;
pub type PointCloud64 = geometry::PointCloud<f64>;
pub type SpeakerLayout64 = geometry::SpeakerLayout<f64>;
pub type Matrix64 = linalg::Matrix<f64>;
pub type TranscodingMatrix64 = analysis::TranscodingMatrix<f64>;
pub type Problem64 = cost::Problem<f64>;

/// Single-precision instantiations.
pub type Direction32 = geometry::Direction<f32>;
pub type PointCloud32 = geometry::PointCloud<f32>;
pub type SpeakerLayout32 = geometry::SpeakerLayout<f32>;
pub type Matrix32 = linalg::Matrix<f32>;
pub type TranscodingMatrix32 = analysis::TranscodingMatrix<f32>;
pub type Problem32 = cost::Problem<f32>;
