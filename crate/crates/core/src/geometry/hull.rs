//! Convex hull triangulation of loudspeaker directions, used by amplitude panning.

use std::collections::HashSet;

use super::layout::SpeakerLayout;
use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::real::Real;

/// Panning topology of a layout.
#[derive(Clone, Debug, PartialEq)]
pub enum Hull {
    /// Outward-oriented faces of the 3D convex hull of the unit vectors.
    ///
    /// `triangles` covers every hull face exactly once; hull faces whose
    /// plane passes through the listener (for a layout confined to a closed
    /// hemisphere, e.g. the floor of a 7.0.4 dome) are kept here but have no
    /// panning region, so `active` lists the indices usable for panning.
    Spatial { triangles: Vec<[usize; 3]>, active: Vec<usize> },
    /// Horizontal layout: adjacent speaker pairs in increasing azimuth.
    Planar { pairs: Vec<[usize; 2]> },
}

impl Hull {
    pub fn triangles(&self) -> &[[usize; 3]] {
        match self {
            Hull::Spatial { triangles, .. } => triangles,
            Hull::Planar { .. } => &[],
        }
    }
}

const PLANE_EPS: f64 = 1e-9;

/// Triangulates the convex hull of the speaker directions.
///
/// Horizontal layouts (all elevations within 0.5° of zero) produce adjacent
/// azimuth pairs instead; a pair spanning 180° or more is not pannable and is
/// omitted.
pub fn triangulate_hull<T: Real>(layout: &SpeakerLayout<T>) -> Result<Hull> {
    if layout.is_horizontal() {
        return planar_pairs(layout);
    }
    let pts = layout.vectors();
    let n = pts.len();
    if n < 4 {
        return Err(Error::DegenerateLayout(format!("{n} speakers cannot enclose a volume")));
    }
    let eps = T::lit(PLANE_EPS);
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut triangles = Vec::new();
    let mut active = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let Some(mut normal) = (pts[j] - pts[i]).cross(pts[k] - pts[i]).normalized() else {
                    continue;
                };
                let mut above = false;
                let mut below = false;
                for (m, p) in pts.iter().enumerate() {
                    if m == i || m == j || m == k {
                        continue;
                    }
                    let side = normal.dot(*p - pts[i]);
                    above |= side > eps;
                    below |= side < -eps;
                }
                if above && below {
                    continue;
                }
                if above {
                    normal = -normal;
                }
                if !above && !below {
                    return Err(Error::DegenerateLayout("all speakers lie in one plane".into()));
                }
                let mut face: Vec<usize> =
                    (0..n).filter(|&m| normal.dot(pts[m] - pts[i]).abs() <= eps).collect();
                face.sort_unstable();
                if !seen.insert(face.clone()) {
                    continue;
                }
                let offset = normal.dot(pts[i]);
                for tri in fan(&face, &pts, normal) {
                    if offset > eps {
                        active.push(triangles.len());
                    }
                    triangles.push(tri);
                }
            }
        }
    }
    if active.is_empty() {
        return Err(Error::DegenerateLayout("no hull face faces the listener".into()));
    }
    Ok(Hull::Spatial { triangles, active })
}

/// Fan triangulation of a planar convex face, counter-clockwise about `normal`.
fn fan<T: Real>(face: &[usize], pts: &[Vec3<T>], normal: Vec3<T>) -> Vec<[usize; 3]> {
    let inv = T::one() / T::from_usize_lossy(face.len());
    let centroid = face.iter().fold(Vec3::zero(), |acc, &m| acc + pts[m]).scale(inv);
    let e1 = (pts[face[0]] - centroid).normalized().unwrap_or(Vec3::new(T::one(), T::zero(), T::zero()));
    let e2 = normal.cross(e1);
    let mut ordered: Vec<(T, usize)> = face
        .iter()
        .map(|&m| {
            let d = pts[m] - centroid;
            (d.dot(e2).atan2(d.dot(e1)), m)
        })
        .collect();
    ordered.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    let ids: Vec<usize> = ordered.into_iter().map(|(_, m)| m).collect();
    (1..ids.len() - 1).map(|t| [ids[0], ids[t], ids[t + 1]]).collect()
}

fn planar_pairs<T: Real>(layout: &SpeakerLayout<T>) -> Result<Hull> {
    let n = layout.len();
    if n < 2 {
        return Err(Error::DegenerateLayout("a horizontal layout needs at least two speakers".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let az: Vec<T> = layout.speakers().iter().map(|s| s.direction.azimuth()).collect();
    order.sort_by(|&a, &b| az[a].partial_cmp(&az[b]).unwrap_or(std::cmp::Ordering::Equal));
    let full = T::lit(360.0);
    let limit = T::lit(180.0 - 1e-9);
    let mut pairs = Vec::new();
    let count = if n == 2 { 1 } else { n };
    for t in 0..count {
        let (a, b) = (order[t], order[(t + 1) % n]);
        let mut gap = az[b] - az[a];
        if gap <= T::zero() {
            gap += full;
        }
        if gap < limit {
            pairs.push([a, b]);
        } else if n == 2 && full - gap < limit {
            pairs.push([b, a]);
        }
    }
    if pairs.is_empty() {
        return Err(Error::DegenerateLayout("no adjacent speakers closer than 180°".into()));
    }
    Ok(Hull::Planar { pairs })
}

/// Solid angle of the spherical triangle spanned by three unit vectors.
pub fn solid_angle<T: Real>(a: Vec3<T>, b: Vec3<T>, c: Vec3<T>) -> T {
    let num = Vec3::triple(a, b, c).abs();
    let den = T::one() + a.dot(b) + b.dot(c) + c.dot(a);
    T::lit(2.0) * num.atan2(den)
}
