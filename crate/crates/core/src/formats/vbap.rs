//! Vector-base amplitude panning over a triangulated layout.

use crate::error::{Error, Result};
use crate::geometry::{triangulate_hull, Direction, Hull, SpeakerLayout};
use crate::linalg::Vec3;
use crate::real::Real;

/// Gains below this (before normalization) still count as inside a triangle.
const INSIDE_TOL: f64 = 1e-9;

/// How the gains of the active speaker set are normalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PanningLaw {
    /// Amplitude panning with `Σ g² = 1`.
    Vbap,
    /// Intensity panning: squared gains solve the base system, `Σ g² = 1`.
    Vbip,
}

#[derive(Clone, Debug)]
enum Region<T> {
    /// Rows of the inverse base matrix `[u_a u_b u_c]⁻¹`.
    Triangle { speakers: [usize; 3], inverse: [Vec3<T>; 3] },
    /// 2×2 inverse acting on horizontal projections.
    Pair { speakers: [usize; 2], inverse: [[T; 2]; 2] },
}

/// Precomputed panning regions of a layout.
#[derive(Clone, Debug)]
pub struct Panner<T> {
    speakers: usize,
    vectors: Vec<Vec3<T>>,
    regions: Vec<Region<T>>,
}

impl<T: Real> Panner<T> {
    pub fn new(layout: &SpeakerLayout<T>) -> Result<Self> {
        let vectors = layout.vectors();
        let regions = match triangulate_hull(layout)? {
            Hull::Spatial { triangles, active } => active
                .iter()
                .filter_map(|&t| {
                    let [a, b, c] = triangles[t];
                    let (ua, ub, uc) = (vectors[a], vectors[b], vectors[c]);
                    let det = Vec3::triple(ua, ub, uc);
                    (det.abs() > T::lit(1e-9)).then(|| {
                        let inv = T::one() / det;
                        Region::Triangle {
                            speakers: [a, b, c],
                            inverse: [ub.cross(uc).scale(inv), uc.cross(ua).scale(inv), ua.cross(ub).scale(inv)],
                        }
                    })
                })
                .collect::<Vec<_>>(),
            Hull::Planar { pairs } => pairs
                .iter()
                .filter_map(|&[a, b]| {
                    let (ua, ub) = (planar(&layout.speakers()[a].direction), planar(&layout.speakers()[b].direction));
                    let det = ua[0] * ub[1] - ua[1] * ub[0];
                    (det.abs() > T::lit(1e-9)).then(|| Region::Pair {
                        speakers: [a, b],
                        inverse: [[ub[1] / det, -ub[0] / det], [-ua[1] / det, ua[0] / det]],
                    })
                })
                .collect(),
        };
        if regions.is_empty() {
            return Err(Error::DegenerateLayout("no pannable speaker set".into()));
        }
        Ok(Self { speakers: layout.len(), vectors, regions })
    }

    pub fn speaker_count(&self) -> usize {
        self.speakers
    }

    /// Unnormalized gains of the first region containing `d`.
    fn solve(&self, d: &Direction<T>) -> Option<(Vec<usize>, Vec<T>)> {
        let v = d.to_unit_vector();
        let p = planar(d);
        let tol = -T::lit(INSIDE_TOL);
        for region in &self.regions {
            match region {
                Region::Triangle { speakers, inverse } => {
                    let g: Vec<T> = inverse.iter().map(|row| row.dot(v)).collect();
                    if g.iter().all(|&x| x >= tol) {
                        return Some((speakers.to_vec(), g));
                    }
                }
                Region::Pair { speakers, inverse } => {
                    let g: Vec<T> = inverse.iter().map(|row| row[0] * p[0] + row[1] * p[1]).collect();
                    if g.iter().all(|&x| x >= tol) {
                        return Some((speakers.to_vec(), g));
                    }
                }
            }
        }
        None
    }

    /// Energy-normalized gains (`Σ g² = 1`) for a source at `d`.
    pub fn gains(&self, d: &Direction<T>) -> Result<Vec<T>> {
        self.gains_with(d, PanningLaw::Vbap)
    }

    pub fn gains_with(&self, d: &Direction<T>, law: PanningLaw) -> Result<Vec<T>> {
        let (idx, raw) = self.solve(d).ok_or_else(|| self.coverage_error(d))?;
        let raw: Vec<T> = raw.into_iter().map(|g| g.max(T::zero())).collect();
        let mut out = vec![T::zero(); self.speakers];
        match law {
            PanningLaw::Vbap => {
                let norm = raw.iter().map(|&g| g * g).sum::<T>().sqrt();
                for (&i, &g) in idx.iter().zip(&raw) {
                    out[i] += g / norm;
                }
            }
            PanningLaw::Vbip => {
                let total: T = raw.iter().copied().sum();
                for (&i, &g) in idx.iter().zip(&raw) {
                    out[i] += (g / total).sqrt();
                }
            }
        }
        Ok(out)
    }

    fn coverage_error(&self, d: &Direction<T>) -> Error {
        let v = d.to_unit_vector();
        let p = planar(d);
        let mut best: Option<(T, Vec3<T>)> = None;
        for region in &self.regions {
            let covered = match region {
                Region::Triangle { speakers, inverse } => speakers
                    .iter()
                    .zip(inverse)
                    .fold(Vec3::zero(), |acc, (&s, row)| acc + self.vectors[s].scale(row.dot(v).max(T::zero()))),
                Region::Pair { speakers, inverse } => speakers.iter().zip(inverse).fold(Vec3::zero(), |acc, (&s, row)| {
                    let g = (row[0] * p[0] + row[1] * p[1]).max(T::zero());
                    let u = &self.vectors[s];
                    acc + Vec3::new(u.x, u.y, T::zero()).scale(g)
                }),
            };
            // a region entirely behind the source falls back to its first speaker
            let covered = covered.normalized().unwrap_or_else(|| match region {
                Region::Triangle { speakers, .. } => self.vectors[speakers[0]],
                Region::Pair { speakers, .. } => self.vectors[speakers[0]],
            });
            let score = covered.dot(v);
            if best.map_or(true, |(s, _)| score > s) {
                best = Some((score, covered));
            }
        }
        let nearest = best
            .and_then(|(_, u)| Direction::from_vector(u).ok())
            .unwrap_or(*d);
        Error::OutsideCoverage {
            azimuth: d.azimuth().to_f64_lossy(),
            elevation: d.elevation().to_f64_lossy(),
            nearest_azimuth: nearest.azimuth().to_f64_lossy(),
            nearest_elevation: nearest.elevation().to_f64_lossy(),
        }
    }
}

fn planar<T: Real>(d: &Direction<T>) -> [T; 2] {
    let (s, c) = d.azimuth().to_radians().sin_cos();
    [c, s]
}

/// Convenience wrapper: VBAP gains of `layout` for a source at `d`.
pub fn vbap_gains<T: Real>(layout: &SpeakerLayout<T>, d: &Direction<T>) -> Result<Vec<T>> {
    Panner::new(layout)?.gains(d)
}
