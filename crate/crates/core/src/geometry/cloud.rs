//! Weighted sets of sampling directions.

use serde::{Deserialize, Serialize};

use super::direction::{azimuth_difference, Direction};
use super::layout::LayoutSpec;
use super::tdesign;
use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::real::Real;

/// Sampled virtual-source directions with per-direction weights.
///
/// Weights are always normalized so that their mean is one.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud<T> {
    directions: Vec<Direction<T>>,
    vectors: Vec<Vec3<T>>,
    weights: Vec<T>,
}

impl<T: Real> PointCloud<T> {
    pub fn new(directions: Vec<Direction<T>>, weights: Vec<T>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::Invalid("point cloud has no directions".into()));
        }
        if directions.len() != weights.len() {
            return Err(Error::Dimension(format!(
                "{} directions but {} weights",
                directions.len(),
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > T::zero()) || !w.is_finite()) {
            return Err(Error::Invalid(format!("cloud weight {w} is not a positive finite number")));
        }
        let total: T = weights.iter().copied().sum();
        let scale = T::from_usize_lossy(weights.len()) / total;
        let weights = weights.into_iter().map(|w| w * scale).collect();
        let vectors = directions.iter().map(Direction::to_unit_vector).collect();
        Ok(Self { directions, vectors, weights })
    }

    pub fn uniform(directions: Vec<Direction<T>>) -> Result<Self> {
        let n = directions.len();
        Self::new(directions, vec![T::one(); n])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    #[inline]
    pub fn directions(&self) -> &[Direction<T>] {
        &self.directions
    }

    #[inline]
    pub fn vectors(&self) -> &[Vec3<T>] {
        &self.vectors
    }

    #[inline]
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Keeps the directions with elevation ≥ 0 (a hair of tolerance keeps
    /// points that sit on the horizontal plane up to rounding).
    pub fn upper_hemisphere(&self) -> Result<Self> {
        let eps = T::lit(1e-9);
        let (dirs, weights): (Vec<_>, Vec<_>) = self
            .directions
            .iter()
            .zip(&self.weights)
            .filter(|(d, _)| d.elevation() >= -eps)
            .map(|(d, w)| (*d, *w))
            .unzip();
        Self::new(dirs, weights)
    }

    /// Concatenates clouds, giving every point of part `k` the relative weight `w_k`.
    pub fn merge(parts: &[(PointCloud<T>, T)]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::EmptyMerge);
        }
        let mut dirs = Vec::new();
        let mut weights = Vec::new();
        for (cloud, rel) in parts {
            if !(*rel > T::zero()) {
                return Err(Error::Invalid(format!("relative weight {rel} must be positive")));
            }
            dirs.extend_from_slice(&cloud.directions);
            weights.extend(cloud.weights.iter().map(|&w| w * *rel));
        }
        Self::new(dirs, weights)
    }

    /// Index of the left-right mirror image of every direction, when the cloud
    /// contains it within `tol_deg`. Points on the median plane map to themselves.
    ///
    /// The map is an involution: if `m[i] = Some(j)` then `m[j] = Some(i)`.
    /// Among several candidates the one with the closest weight wins, then the
    /// lowest index.
    pub fn mirror_map(&self, tol_deg: T) -> Vec<Option<usize>> {
        let n = self.len();
        let mut map = vec![None; n];
        for i in 0..n {
            if map[i].is_some() {
                continue;
            }
            let d = self.directions[i];
            if self_mirrored(&d, tol_deg) {
                map[i] = Some(i);
                continue;
            }
            let target = d.mirrored();
            let mut best: Option<(T, usize)> = None;
            for j in (i + 1)..n {
                if map[j].is_some() || target.angle_to(&self.directions[j]) > tol_deg {
                    continue;
                }
                let dw = (self.weights[j] - self.weights[i]).abs();
                if best.map_or(true, |(bw, _)| dw < bw) {
                    best = Some((dw, j));
                }
            }
            if let Some((_, j)) = best {
                map[i] = Some(j);
                map[j] = Some(i);
            }
        }
        map
    }

    pub fn cast<U: Real>(&self) -> PointCloud<U> {
        PointCloud::new(
            self.directions.iter().map(Direction::cast).collect(),
            self.weights.iter().map(|w| U::lit(w.to_f64_lossy())).collect(),
        )
        .expect("casting keeps weights positive")
    }
}

fn self_mirrored<T: Real>(d: &Direction<T>, tol: T) -> bool {
    let az = d.azimuth();
    d.elevation().abs() >= T::lit(90.0) - tol
        || az.abs() <= tol
        || azimuth_difference(az, T::lit(180.0)).abs() <= tol
}

/// Declarative description of a sampling cloud, as found in job configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CloudSpec {
    /// Embedded spherical t-design selected by its point count.
    TDesign { points: usize },
    /// `points` equally spaced directions on the horizontal plane starting at `offset` degrees.
    Ring {
        points: usize,
        #[serde(default)]
        offset: f64,
    },
    /// Quasi-uniform Fibonacci lattice with uniform weights, for arbitrary counts.
    Fibonacci { points: usize },
    /// Explicit `[azimuth, elevation]` pairs in degrees.
    Directions { directions: Vec<[f64; 2]> },
    /// The loudspeaker positions of a layout.
    Layout { layout: Box<LayoutSpec> },
    /// Directions of `of` with elevation ≥ 0.
    Hemisphere { of: Box<CloudSpec> },
    /// Concatenation of weighted sub-clouds.
    Merge { parts: Vec<WeightedCloud> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedCloud {
    pub weight: f64,
    pub cloud: CloudSpec,
}

/// Builds the point cloud described by `spec`.
pub fn sample_cloud<T: Real>(spec: &CloudSpec) -> Result<PointCloud<T>> {
    match spec {
        CloudSpec::TDesign { points } => {
            let table = tdesign::table(*points).ok_or(Error::UnknownTDesign(*points))?;
            let dirs = table
                .iter()
                .map(|v| Direction::from_vector(Vec3::new(T::lit(v[0]), T::lit(v[1]), T::lit(v[2]))))
                .collect::<Result<Vec<_>>>()?;
            PointCloud::uniform(dirs)
        }
        CloudSpec::Ring { points, offset } => {
            if *points == 0 {
                return Err(Error::Invalid("ring needs at least one point".into()));
            }
            let step = 360.0 / *points as f64;
            let dirs = (0..*points)
                .map(|k| Direction::new(T::lit(offset + step * k as f64), T::zero()))
                .collect::<Result<Vec<_>>>()?;
            PointCloud::uniform(dirs)
        }
        CloudSpec::Fibonacci { points } => PointCloud::uniform(fibonacci_sphere(*points)?),
        CloudSpec::Directions { directions } => {
            let dirs = directions
                .iter()
                .map(|[az, el]| Direction::new(T::lit(*az), T::lit(*el)))
                .collect::<Result<Vec<_>>>()?;
            PointCloud::uniform(dirs)
        }
        CloudSpec::Layout { layout } => {
            let layout = layout.build::<T>()?;
            PointCloud::uniform(layout.directions().to_vec())
        }
        CloudSpec::Hemisphere { of } => sample_cloud::<T>(of)?.upper_hemisphere(),
        CloudSpec::Merge { parts } => {
            let built = parts
                .iter()
                .map(|p| Ok((sample_cloud::<T>(&p.cloud)?, T::lit(p.weight))))
                .collect::<Result<Vec<_>>>()?;
            PointCloud::merge(&built)
        }
    }
}

/// Fibonacci lattice: `z_i = 1 − (2i + 1)/n`, longitude advancing by the golden angle.
pub fn fibonacci_sphere<T: Real>(n: usize) -> Result<Vec<Direction<T>>> {
    if n == 0 {
        return Err(Error::Invalid("Fibonacci sphere needs at least one point".into()));
    }
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let el = z.asin().to_degrees();
            let az = (golden * i as f64).to_degrees();
            Direction::new(T::lit(az), T::lit(el))
        })
        .collect()
}
