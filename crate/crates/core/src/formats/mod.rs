//! Input and output audio formats: encoding matrices `G`, decoders `D_spk`
//! and channel-remapping baselines.

mod sh;
mod vbap;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use sh::{acn, channel_count, channel_labels, max_re_weights, sh_row, sh_row_into, ChannelOrdering, Normalization, MAX_ORDER};
pub use vbap::{vbap_gains, Panner, PanningLaw};

use crate::analysis::TranscodingMatrix;
use crate::error::{Error, Result};
use crate::geometry::{sample_cloud, CloudSpec, Direction, LayoutSpec, PointCloud, SpeakerLayout};
use crate::io::matrix_file::{import_matrix, MatrixFile};
use crate::linalg::Matrix;
use crate::real::Real;

/// Relative singular value cutoff of the mode-matching decoder.
pub const PINV_REL_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FormatSpec {
    Ambisonics {
        order: usize,
        #[serde(default)]
        normalization: Normalization,
        #[serde(default)]
        ordering: ChannelOrdering,
    },
    /// Channel-based format; sources are panned onto `layout` with VBAP.
    #[serde(alias = "speakers")]
    Vbap { layout: LayoutSpec },
    /// One channel per cloud direction.
    Objects {},
    External { path: PathBuf },
}

impl FormatSpec {
    pub fn ambisonics(order: usize) -> Self {
        FormatSpec::Ambisonics { order, normalization: Normalization::Sn3d, ordering: ChannelOrdering::Acn }
    }

    pub fn vbap(layout: &str) -> Self {
        FormatSpec::Vbap { layout: LayoutSpec::Named(layout.to_string()) }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FormatSpec::Ambisonics { order, .. } if *order > MAX_ORDER => {
                Err(Error::Invalid(format!("ambisonics order {order} exceeds {MAX_ORDER}")))
            }
            FormatSpec::Vbap { layout } => layout.build::<f64>().map(|_| ()),
            _ => Ok(()),
        }
    }

    /// Layout carried by a channel-based spec.
    pub fn layout<T: Real>(&self) -> Result<Option<SpeakerLayout<T>>> {
        match self {
            FormatSpec::Vbap { layout } => layout.build().map(Some),
            _ => Ok(None),
        }
    }

    /// Nominal direction of every channel, where the format has one.
    pub fn channel_directions<T: Real>(&self) -> Result<Option<Vec<Direction<T>>>> {
        Ok(self.layout::<T>()?.map(|l| l.directions()))
    }
}

/// `G`: gains of every input channel for a source at each cloud direction.
#[derive(Clone, Debug)]
pub struct EncodingMatrix<T> {
    pub entries: Matrix<T>,
    pub cloud: PointCloud<T>,
    pub channel_labels: Vec<String>,
}

impl<T: Real> EncodingMatrix<T> {
    pub fn new(entries: Matrix<T>, cloud: PointCloud<T>, channel_labels: Vec<String>) -> Result<Self> {
        if entries.rows() != cloud.len() {
            return Err(Error::Dimension(format!(
                "encoding matrix has {} rows for {} cloud directions",
                entries.rows(),
                cloud.len()
            )));
        }
        if entries.cols() != channel_labels.len() {
            return Err(Error::Dimension(format!(
                "encoding matrix has {} columns but {} channel labels",
                entries.cols(),
                channel_labels.len()
            )));
        }
        if !entries.is_finite() {
            return Err(Error::Numeric("non-finite encoding gain".into()));
        }
        Ok(Self { entries, cloud, channel_labels })
    }

    pub fn channels(&self) -> usize {
        self.entries.cols()
    }
}

/// `D_spk`: maps output-format channels to loudspeaker feeds.
#[derive(Clone, Debug)]
pub struct DecoderToSpeaker<T> {
    pub entries: Matrix<T>,
    pub layout: SpeakerLayout<T>,
    pub channel_labels: Vec<String>,
}

impl<T: Real> DecoderToSpeaker<T> {
    pub fn new(entries: Matrix<T>, layout: SpeakerLayout<T>, channel_labels: Vec<String>) -> Result<Self> {
        if entries.rows() != layout.len() || entries.cols() != channel_labels.len() {
            return Err(Error::Dimension(format!(
                "decoder is {}x{} for {} speakers and {} channels",
                entries.rows(),
                entries.cols(),
                layout.len(),
                channel_labels.len()
            )));
        }
        Ok(Self { entries, layout, channel_labels })
    }

    /// Plain decoding: every output channel drives one speaker.
    pub fn identity(layout: SpeakerLayout<T>) -> Self {
        let labels = layout.labels();
        Self { entries: Matrix::identity(layout.len()), layout, channel_labels: labels }
    }

    pub fn channels(&self) -> usize {
        self.entries.cols()
    }

    pub fn is_identity(&self) -> bool {
        self.entries.is_identity()
    }
}

/// Real spherical harmonics of every cloud direction, one row per direction.
pub fn ambisonics_encode<T: Real>(cloud: &PointCloud<T>, order: usize, normalization: Normalization) -> EncodingMatrix<T> {
    let entries = sh_matrix(cloud.directions(), order, normalization);
    EncodingMatrix { entries, cloud: cloud.clone(), channel_labels: channel_labels(order) }
}

fn sh_matrix<T: Real>(dirs: &[Direction<T>], order: usize, normalization: Normalization) -> Matrix<T> {
    let n = channel_count(order);
    let mut m = Matrix::zeros(dirs.len(), n);
    for (r, d) in dirs.iter().enumerate() {
        sh_row_into(order, normalization, d, m.row_mut(r));
    }
    m
}

fn object_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("OBJ{i}")).collect()
}

fn load_external<T: Real>(path: &PathBuf, rows: usize, what: &str) -> Result<(Matrix<T>, MatrixFile)> {
    let file = import_matrix(path)?;
    if file.rows() != rows {
        return Err(Error::Dimension(format!(
            "{}: {} rows, expected {rows} ({what})",
            path.display(),
            file.rows()
        )));
    }
    Ok((file.to_matrix(), file))
}

pub fn build_encoding_matrix<T: Real>(spec: &FormatSpec, cloud: &PointCloud<T>) -> Result<EncodingMatrix<T>> {
    spec.validate()?;
    match spec {
        FormatSpec::Ambisonics { order, normalization, .. } => Ok(ambisonics_encode(cloud, *order, *normalization)),
        FormatSpec::Vbap { layout } => {
            let layout: SpeakerLayout<T> = layout.build()?;
            let panner = Panner::new(&layout)?;
            let mut m = Matrix::zeros(cloud.len(), layout.len());
            for (r, d) in cloud.directions().iter().enumerate() {
                m.row_mut(r).copy_from_slice(&panner.gains(d)?);
            }
            EncodingMatrix::new(m, cloud.clone(), layout.labels())
        }
        FormatSpec::Objects {} => EncodingMatrix::new(Matrix::identity(cloud.len()), cloud.clone(), object_labels(cloud.len())),
        FormatSpec::External { path } => {
            let (m, file) = load_external(path, cloud.len(), "one row per cloud direction")?;
            EncodingMatrix::new(m, cloud.clone(), file.col_labels)
        }
    }
}

/// Mode-matching decoder `pinv(Yᵀ)` of shape `P × N`, where `Y` holds the
/// spherical harmonics sampled at the layout directions.
pub fn ambisonics_decoder<T: Real>(layout: &SpeakerLayout<T>, order: usize, normalization: Normalization) -> Matrix<T> {
    let y = sh_matrix(&layout.directions(), order, normalization);
    let n = y.cols();
    if layout.len() < n {
        log::warn!(
            "{} speakers cannot resolve {n} ambisonic channels; the decoder is rank deficient",
            layout.len()
        );
    }
    let pinv = y.transpose().pseudo_inverse(T::lit(PINV_REL_TOL));
    if pinv.rank < n {
        log::warn!("ambisonics decoder rank {} < {n}", pinv.rank);
    }
    pinv.matrix
}

pub fn build_decoder_to_speaker<T: Real>(spec: &FormatSpec, layout: &SpeakerLayout<T>) -> Result<DecoderToSpeaker<T>> {
    spec.validate()?;
    match spec {
        FormatSpec::Ambisonics { order, normalization, .. } => {
            let m = ambisonics_decoder(layout, *order, *normalization);
            DecoderToSpeaker::new(m, layout.clone(), channel_labels(*order))
        }
        FormatSpec::Vbap { .. } | FormatSpec::Objects {} => Ok(DecoderToSpeaker::identity(layout.clone())),
        FormatSpec::External { path } => {
            let (m, file) = load_external(path, layout.len(), "one row per speaker")?;
            DecoderToSpeaker::new(m, layout.clone(), file.col_labels)
        }
    }
}

/// Direct remapping: each input channel is treated as a point source at its
/// nominal direction and encoded into the output format.
pub fn remap_baseline<T: Real>(
    input_channel_directions: &[Direction<T>],
    input_labels: Vec<String>,
    output: &FormatSpec,
    layout: &SpeakerLayout<T>,
) -> Result<TranscodingMatrix<T>> {
    let m = input_channel_directions.len();
    match output {
        FormatSpec::Ambisonics { order, normalization, .. } => {
            let rows = sh_matrix(input_channel_directions, *order, *normalization);
            TranscodingMatrix::new(rows.transpose(), input_labels, channel_labels(*order))
        }
        FormatSpec::Vbap { .. } | FormatSpec::Objects {} => {
            let panner = Panner::new(layout)?;
            let mut t = Matrix::zeros(layout.len(), m);
            for (c, d) in input_channel_directions.iter().enumerate() {
                t.set_column(c, &panner.gains(d)?);
            }
            TranscodingMatrix::new(t, input_labels, layout.labels())
        }
        FormatSpec::External { .. } => {
            Err(Error::Invalid("no remapping baseline for an external output format".into()))
        }
    }
}

/// Reference ambisonics decoder in the AllRAD style: mode-matching decode to
/// a uniform virtual layout, then VBAP of every virtual speaker onto the real
/// layout. Layouts without floor coverage get an imaginary nadir speaker whose
/// feed is discarded. Degrees are weighted with [`max_re_weights`] and the
/// result is scaled to unit mean energy over the virtual directions.
pub fn allrad_decoder<T: Real>(
    layout: &SpeakerLayout<T>,
    order: usize,
    normalization: Normalization,
    virtual_cloud: &CloudSpec,
) -> Result<Matrix<T>> {
    let virt = sample_cloud::<T>(virtual_cloud)?;
    let virt_layout = SpeakerLayout::new(
        virt.directions()
            .iter()
            .enumerate()
            .map(|(i, d)| crate::geometry::Speaker { label: format!("V{i}"), direction: *d })
            .collect(),
    )?;
    let d_virt = ambisonics_decoder(&virt_layout, order, normalization);
    let nadir = Direction::new(T::zero(), T::lit(-90.0))?;
    let (panner, extra) = match Panner::new(layout) {
        Ok(p) if p.gains(&nadir).is_ok() => (p, false),
        _ => (Panner::new(&layout.with_extra_speaker("IMAGINARY_NADIR", nadir)?)?, true),
    };
    let p = layout.len();
    let mut g = Matrix::zeros(p, virt.len());
    for (k, d) in virt.directions().iter().enumerate() {
        let gains = panner.gains(d)?;
        let col = if extra { &gains[..p] } else { &gains[..] };
        g.set_column(k, col);
    }
    let mut d = g.matmul(&d_virt)?;
    let w = max_re_weights(order);
    for r in 0..d.rows() {
        for (c, x) in d.row_mut(r).iter_mut().enumerate() {
            *x *= T::lit(w[(c as f64).sqrt().floor() as usize]);
        }
    }
    let y = sh_matrix(virt.directions(), order, normalization);
    let s = y.matmul_transposed(&d)?;
    let mean: T = s.as_slice().iter().map(|&v| v * v).sum::<T>() / T::from_usize_lossy(virt.len());
    Ok(d.scale(T::one() / mean.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{fibonacci_sphere, named_layout};

    #[test]
    fn n3d_harmonics_are_orthonormal() {
        let dirs = fibonacci_sphere::<f64>(10_000).unwrap();
        let y = sh_matrix(&dirs, 5, Normalization::N3d);
        let gram = y.transpose().matmul(&y).unwrap().scale(1.0 / dirs.len() as f64);
        let err = gram.max_abs_diff(&Matrix::identity(36));
        assert!(err < 1e-3, "Gram error {err}");
    }

    #[test]
    fn encoding_shapes() {
        let td = sample_cloud::<f64>(&CloudSpec::TDesign { points: 56 }).unwrap();
        let g = build_encoding_matrix(&FormatSpec::ambisonics(5), &td).unwrap();
        assert_eq!(g.entries.shape(), (56, 36));
        let zeroth = build_encoding_matrix(&FormatSpec::ambisonics(0), &td).unwrap();
        assert!(zeroth.entries.as_slice().iter().all(|&x| x == 1.0));

        let ring = sample_cloud::<f64>(&CloudSpec::Ring { points: 72, offset: 0.0 }).unwrap();
        let g = build_encoding_matrix(&FormatSpec::Objects {}, &ring).unwrap();
        assert!(g.entries.is_identity() && g.entries.rows() == 72);

        let g = build_encoding_matrix(&FormatSpec::vbap("7.0.4"), &td.upper_hemisphere().unwrap()).unwrap();
        assert_eq!(g.entries.shape(), (28, 11));
        assert!(FormatSpec::ambisonics(10).validate().is_err());
    }

    #[test]
    fn real_layout_decodes_with_identity() {
        let l: SpeakerLayout<f64> = named_layout("3.0.1-irregular").unwrap();
        let d = build_decoder_to_speaker(&FormatSpec::vbap("3.0.1-irregular"), &l).unwrap();
        assert!(d.is_identity() && d.entries.rows() == 4);
    }

    #[test]
    fn mode_matching_decoder_inverts_the_layout_harmonics() {
        let spec = CloudSpec::Merge {
            parts: vec![
                crate::geometry::WeightedCloud {
                    weight: 1.0,
                    cloud: CloudSpec::Hemisphere { of: Box::new(CloudSpec::TDesign { points: 60 }) },
                },
                crate::geometry::WeightedCloud { weight: 1.0, cloud: CloudSpec::Ring { points: 36, offset: 0.0 } },
            ],
        };
        let cloud = sample_cloud::<f64>(&spec).unwrap();
        let layout = SpeakerLayout::new(
            cloud
                .directions()
                .iter()
                .enumerate()
                .map(|(i, d)| crate::geometry::Speaker { label: format!("V{i}"), direction: *d })
                .collect(),
        )
        .unwrap();
        let d = build_decoder_to_speaker(&FormatSpec::ambisonics(5), &layout).unwrap();
        assert_eq!(d.entries.shape(), (66, 36));
        let y = sh_matrix(&layout.directions(), 5, Normalization::Sn3d);
        // D·Yᵀ is the orthogonal projector onto the resolved subspace
        let proj = d.entries.matmul(&y.transpose()).unwrap();
        let sq = proj.matmul(&proj).unwrap();
        assert!(sq.max_abs_diff(&proj) < 1e-8);
        assert!(proj.max_abs_diff(&proj.transpose()) < 1e-8);
        let pinv = y.transpose().pseudo_inverse(PINV_REL_TOL);
        let yt_d = y.transpose().matmul(&d.entries).unwrap();
        if pinv.rank == 36 {
            assert!(yt_d.max_abs_diff(&Matrix::identity(36)) < 1e-8);
        }
    }

    #[test]
    fn square_decoder_is_the_exact_inverse() {
        let l = SpeakerLayout::<f64>::from_directions([
            ("A", 0.0, 0.0),
            ("B", 120.0, 0.0),
            ("C", -120.0, 0.0),
            ("D", 0.0, 90.0),
        ])
        .unwrap();
        let d = ambisonics_decoder(&l, 1, Normalization::Sn3d);
        let y = sh_matrix(&l.directions(), 1, Normalization::Sn3d);
        let prod = d.matmul(&y.transpose()).unwrap();
        assert!(prod.max_abs_diff(&Matrix::identity(4)) < 1e-9);
    }

    #[test]
    fn remap_shapes_and_one_hot_columns() {
        let l704: SpeakerLayout<f64> = named_layout("7.0.4").unwrap();
        let t = remap_baseline(&l704.directions(), l704.labels(), &FormatSpec::ambisonics(5), &l704).unwrap();
        assert_eq!(t.entries.shape(), (36, 11));
        let row = sh_row(5, Normalization::Sn3d, &l704.directions()[3]);
        assert_eq!(t.entries.column(3), row);

        let l502: SpeakerLayout<f64> = named_layout("5.0.2").unwrap();
        let out: SpeakerLayout<f64> = named_layout("3.0.1-irregular").unwrap();
        let t = remap_baseline(&l502.directions(), l502.labels(), &FormatSpec::vbap("3.0.1-irregular"), &out).unwrap();
        assert_eq!(t.entries.shape(), (4, 7));

        // objects placed on the output speakers remap to a permutation
        let mut dirs = out.directions();
        dirs.reverse();
        let t = remap_baseline(&dirs, object_labels(4), &FormatSpec::Objects {}, &out).unwrap();
        for c in 0..4 {
            let col = t.entries.column(c);
            assert!((col[3 - c] - 1.0).abs() < 1e-12);
            assert!((col.iter().map(|x| x.abs()).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn allrad_reference_shape_and_front_response() {
        let l: SpeakerLayout<f64> = named_layout("7.0.4").unwrap();
        let d = allrad_decoder(&l, 5, Normalization::Sn3d, &CloudSpec::TDesign { points: 60 }).unwrap();
        assert_eq!(d.shape(), (11, 36));
        let feeds = d.mul_vec(&sh_row(5, Normalization::Sn3d, &Direction::deg(0.0, 0.0)));
        let loudest = feeds.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
        assert_eq!(l.speakers()[loudest].label, "C");
    }

    #[test]
    fn format_spec_parses_from_toml() {
        let spec: FormatSpec = toml::from_str("kind = \"ambisonics\"\norder = 5\nnormalization = \"n3d\"").unwrap();
        assert_eq!(
            spec,
            FormatSpec::Ambisonics { order: 5, normalization: Normalization::N3d, ordering: ChannelOrdering::Acn }
        );
        let spec: FormatSpec = toml::from_str("kind = \"speakers\"\nlayout = \"5.0\"").unwrap();
        assert_eq!(spec, FormatSpec::vbap("5.0"));
        assert!(toml::from_str::<FormatSpec>("kind = \"objects\"\nextra = 1").is_err());
    }
}
