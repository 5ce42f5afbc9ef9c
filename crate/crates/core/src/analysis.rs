//! Speaker matrix and per-direction localization metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{DecoderToSpeaker, EncodingMatrix};
use crate::geometry::{Direction, PointCloud, SpeakerLayout};
use crate::linalg::{Matrix, Vec3};
use crate::real::Real;

/// Smallest pressure magnitude used as a normalizer.
pub const PRESSURE_GUARD: f64 = 1e-9;
/// Smallest energy used as a normalizer.
pub const ENERGY_GUARD: f64 = 1e-18;

/// `sign(P)·max(|P|, 1e−9)`, with zero treated as positive.
#[inline]
pub fn guard_pressure<T: Real>(p: T) -> T {
    let g = p.abs().max(T::lit(PRESSURE_GUARD));
    if p < T::zero() {
        -g
    } else {
        g
    }
}

#[inline]
pub fn guard_energy<T: Real>(e: T) -> T {
    e.max(T::lit(ENERGY_GUARD))
}

/// `T`: the N×M transcoding matrix from M input channels to N output channels.
#[derive(Clone, Debug, PartialEq)]
pub struct TranscodingMatrix<T> {
    pub entries: Matrix<T>,
    pub input_labels: Vec<String>,
    pub output_labels: Vec<String>,
}

impl<T: Real> TranscodingMatrix<T> {
    pub fn new(entries: Matrix<T>, input_labels: Vec<String>, output_labels: Vec<String>) -> Result<Self> {
        if entries.rows() != output_labels.len() || entries.cols() != input_labels.len() {
            return Err(Error::Dimension(format!(
                "transcoding matrix is {}x{} for {} outputs and {} inputs",
                entries.rows(),
                entries.cols(),
                output_labels.len(),
                input_labels.len()
            )));
        }
        if !entries.is_finite() {
            return Err(Error::Numeric("non-finite transcoding gain".into()));
        }
        Ok(Self { entries, input_labels, output_labels })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.entries.shape()
    }
}

/// `S`: the gain of every loudspeaker for a source at every cloud direction.
#[derive(Clone, Debug)]
pub struct SpeakerMatrix<T> {
    pub entries: Matrix<T>,
    pub cloud: PointCloud<T>,
    pub layout: SpeakerLayout<T>,
}

impl<T: Real> SpeakerMatrix<T> {
    pub fn new(entries: Matrix<T>, cloud: PointCloud<T>, layout: SpeakerLayout<T>) -> Result<Self> {
        if entries.shape() != (cloud.len(), layout.len()) {
            return Err(Error::Dimension(format!(
                "speaker matrix is {}x{} for {} directions and {} speakers",
                entries.rows(),
                entries.cols(),
                cloud.len(),
                layout.len()
            )));
        }
        Ok(Self { entries, cloud, layout })
    }
}

/// `S = G · Tᵀ · D_spkᵀ`.
pub fn speaker_matrix<T: Real>(
    g: &EncodingMatrix<T>,
    t: &TranscodingMatrix<T>,
    d_spk: &DecoderToSpeaker<T>,
) -> Result<SpeakerMatrix<T>> {
    let s = speaker_entries(&g.entries, &t.entries, &d_spk.entries)?;
    SpeakerMatrix::new(s, g.cloud.clone(), d_spk.layout.clone())
}

/// Raw product `G · Tᵀ · D_spkᵀ`, computed as `G · (D_spk · T)ᵀ`.
pub fn speaker_entries<T: Real>(g: &Matrix<T>, t: &Matrix<T>, d_spk: &Matrix<T>) -> Result<Matrix<T>> {
    if g.cols() != t.cols() || d_spk.cols() != t.rows() {
        return Err(Error::Dimension(format!(
            "cannot chain G {}x{}, T {}x{}, D_spk {}x{}",
            g.rows(),
            g.cols(),
            t.rows(),
            t.cols(),
            d_spk.rows(),
            d_spk.cols()
        )));
    }
    let d = d_spk.matmul(t)?;
    g.matmul_transposed(&d)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnalysisMode {
    /// Low-frequency regime: pressure and velocity vector.
    Coherent,
    /// Mid/high-frequency regime: energy and energy vector.
    #[default]
    Incoherent,
}

/// Physical quantities of one direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RowMetrics<T> {
    pub pressure: T,
    pub velocity_radial: T,
    pub velocity_transverse: T,
    pub energy: T,
    pub intensity_radial: T,
    pub intensity_transverse: T,
}

/// Radial and transverse parts of `x` relative to the unit vector `v`.
#[inline]
pub fn project<T: Real>(x: Vec3<T>, v: Vec3<T>) -> (T, T) {
    (x.dot(v), x.cross(v).norm())
}

/// Pressure and velocity vector of one row of `S`.
pub fn coherent_row<T: Real>(s: &[T], u: &[Vec3<T>], v: Vec3<T>) -> (T, T, T) {
    let mut p = T::zero();
    let mut a = Vec3::zero();
    for (&g, &up) in s.iter().zip(u) {
        p += g;
        a = a + up.scale(g);
    }
    let (r, t) = project(a.scale(T::one() / guard_pressure(p)), v);
    (p, r, t)
}

/// Energy and energy vector of one row of `S`.
pub fn incoherent_row<T: Real>(s: &[T], u: &[Vec3<T>], v: Vec3<T>) -> (T, T, T) {
    let mut e = T::zero();
    let mut b = Vec3::zero();
    for (&g, &up) in s.iter().zip(u) {
        let g2 = g * g;
        e += g2;
        b = b + up.scale(g2);
    }
    let (r, t) = project(b.scale(T::one() / guard_energy(e)), v);
    (e, r, t)
}

pub fn row_metrics<T: Real>(s: &[T], u: &[Vec3<T>], v: Vec3<T>) -> RowMetrics<T> {
    let (pressure, velocity_radial, velocity_transverse) = coherent_row(s, u, v);
    let (energy, intensity_radial, intensity_transverse) = incoherent_row(s, u, v);
    RowMetrics { pressure, velocity_radial, velocity_transverse, energy, intensity_radial, intensity_transverse }
}

pub fn coherent_metrics<T: Real>(s: &SpeakerMatrix<T>) -> Vec<(T, T, T)> {
    let u = s.layout.vectors();
    s.cloud.vectors().iter().enumerate().map(|(l, &v)| coherent_row(s.entries.row(l), &u, v)).collect()
}

pub fn incoherent_metrics<T: Real>(s: &SpeakerMatrix<T>) -> Vec<(T, T, T)> {
    let u = s.layout.vectors();
    s.cloud.vectors().iter().enumerate().map(|(l, &v)| incoherent_row(s.entries.row(l), &u, v)).collect()
}

/// Apparent source width in degrees from the localization vector magnitude.
pub fn apparent_source_width<T: Real>(radial: T, transverse: T) -> T {
    let norm = radial.hypot(transverse).min(T::one()).max(-T::one());
    T::lit(0.75) * norm.acos().to_degrees()
}

/// Angular error in degrees, in `[0, 180]`.
pub fn angular_error<T: Real>(radial: T, transverse: T) -> T {
    transverse.atan2(radial).to_degrees()
}

/// `(ASW, δ, level_dB)` for the selected regime.
pub fn perceptual_metrics<T: Real>(m: &RowMetrics<T>, mode: AnalysisMode) -> (T, T, T) {
    let (r, t, level) = match mode {
        AnalysisMode::Coherent => {
            (m.velocity_radial, m.velocity_transverse, T::lit(20.0) * m.pressure.abs().log10())
        }
        AnalysisMode::Incoherent => {
            (m.intensity_radial, m.intensity_transverse, T::lit(10.0) * m.energy.log10())
        }
    };
    (apparent_source_width(r, t), angular_error(r, t), level)
}

/// Every metric of one evaluation direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectionMetrics<T> {
    pub direction: Direction<T>,
    pub weight: T,
    pub physical: RowMetrics<T>,
    pub asw: T,
    pub delta: T,
    pub level_db: T,
}

pub fn analyze<T: Real>(s: &SpeakerMatrix<T>, mode: AnalysisMode) -> Vec<DirectionMetrics<T>> {
    let u = s.layout.vectors();
    (0..s.cloud.len())
        .map(|l| {
            let physical = row_metrics(s.entries.row(l), &u, s.cloud.vectors()[l]);
            let (asw, delta, level_db) = perceptual_metrics(&physical, mode);
            DirectionMetrics {
                direction: s.cloud.directions()[l],
                weight: s.cloud.weights()[l],
                physical,
                asw,
                delta,
                level_db,
            }
        })
        .collect()
}

/// Box-plot statistics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary<T> {
    pub median: T,
    pub q1: T,
    pub q3: T,
    pub whisker_low: T,
    pub whisker_high: T,
}

/// Quantile with linear interpolation between order statistics
/// (`h = (n − 1)·p`) of an already sorted slice.
pub fn quantile_sorted<T: Real>(sorted: &[T], p: T) -> T {
    let h = T::from_usize_lossy(sorted.len() - 1) * p;
    let lo = h.floor();
    let i = lo.to_usize().unwrap_or(0).min(sorted.len() - 1);
    let j = (i + 1).min(sorted.len() - 1);
    let frac = h - lo;
    if frac == T::zero() {
        sorted[i]
    } else {
        sorted[i] + frac * (sorted[j] - sorted[i])
    }
}

/// Median, quartiles and Tukey whiskers (most extreme points within 1.5·IQR
/// of the quartiles). Directions are not weighted.
pub fn summarize<T: Real>(values: &[T]) -> Result<Summary<T>> {
    if values.is_empty() {
        return Err(Error::Invalid("cannot summarize an empty series".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let q1 = quantile_sorted(&v, T::lit(0.25));
    let median = quantile_sorted(&v, T::lit(0.5));
    let q3 = quantile_sorted(&v, T::lit(0.75));
    let fence = T::lit(1.5) * (q3 - q1);
    let whisker_low = v.iter().copied().find(|&x| x >= q1 - fence).unwrap_or(q1);
    let whisker_high = v.iter().rev().copied().find(|&x| x <= q3 + fence).unwrap_or(q3);
    Ok(Summary { median, q1, q3, whisker_low, whisker_high })
}
