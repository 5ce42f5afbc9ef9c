//! Directions, sampling clouds, loudspeaker layouts and hull triangulation.

mod cloud;
mod direction;
mod hull;
mod layout;
pub mod tdesign;

pub use cloud::{fibonacci_sphere, sample_cloud, CloudSpec, PointCloud, WeightedCloud};
pub use direction::{azimuth_difference, normalize_azimuth, Direction};
pub use hull::{solid_angle, triangulate_hull, Hull};
pub use layout::{
    detect_symmetry_pairs, named_layout, LayoutSpec, Speaker, SpeakerLayout, SpeakerSpec, DEFAULT_SYMMETRY_TOL_DEG,
    NAMED_LAYOUTS,
};
