//! End-to-end jobs: generate, evaluate and compare transcoders.

use std::path::Path;

use crate::analysis::{analyze, speaker_matrix, AnalysisMode, DirectionMetrics, TranscodingMatrix};
use crate::cost::Problem;
use crate::error::{Error, Result};
use crate::formats::{
    allrad_decoder, build_decoder_to_speaker, build_encoding_matrix, remap_baseline, DecoderToSpeaker,
    EncodingMatrix, FormatSpec,
};
use crate::geometry::{sample_cloud, CloudSpec, Direction, PointCloud, SpeakerLayout};
use crate::io::config::{Baseline, JobConfig};
use crate::io::matrix_file::{export_matrix, MatrixFile, MatrixKind};
use crate::io::report::{self, Evaluation};
use crate::io::write_atomic;
use crate::optimizer::{optimize_with_restarts, OptimizationReport};
use crate::real::Real;

/// Virtual layout used by the allrad baseline.
pub const ALLRAD_VIRTUAL_POINTS: usize = 60;

/// Nominal direction of every input channel. Object inputs have one channel
/// per cloud direction.
pub fn input_channel_directions<T: Real>(input: &FormatSpec, cloud: &PointCloud<T>) -> Result<Option<Vec<Direction<T>>>> {
    match input {
        FormatSpec::Objects {} => Ok(Some(cloud.directions().to_vec())),
        other => other.channel_directions(),
    }
}

pub fn decoder_layout<T: Real>(cfg: &JobConfig) -> Result<SpeakerLayout<T>> {
    cfg.decoder_layout_spec().build()
}

/// Encoding and decoding matrices over `cloud`.
pub fn build_chain<T: Real>(cfg: &JobConfig, cloud: &PointCloud<T>) -> Result<(EncodingMatrix<T>, DecoderToSpeaker<T>)> {
    let layout = decoder_layout::<T>(cfg)?;
    let encoding = build_encoding_matrix(&cfg.input, cloud)?;
    let decoder = build_decoder_to_speaker(&cfg.output.format, &layout)?;
    Ok((encoding, decoder))
}

/// The optimization problem of a job, with its remapping baseline when the
/// input channels have nominal directions.
pub fn build_problem<T: Real>(cfg: &JobConfig) -> Result<Problem<T>> {
    let cloud = sample_cloud::<T>(&cfg.cloud)?;
    let (encoding, decoder) = build_chain(cfg, &cloud)?;
    let input_labels = encoding.channel_labels.clone();
    let problem = Problem::new(encoding, decoder, cfg.coefficients.clone())?;
    match remap(cfg, &cloud, input_labels) {
        Ok(Some(b)) => problem.with_baseline(b),
        Ok(None) => Ok(problem),
        Err(e) => {
            log::warn!("no remapping baseline: {e}");
            Ok(problem)
        }
    }
}

fn remap<T: Real>(cfg: &JobConfig, cloud: &PointCloud<T>, input_labels: Vec<String>) -> Result<Option<TranscodingMatrix<T>>> {
    let Some(dirs) = input_channel_directions(&cfg.input, cloud)? else {
        return Ok(None);
    };
    let layout = decoder_layout::<T>(cfg)?;
    remap_baseline(&dirs, input_labels, &cfg.output.format, &layout).map(Some)
}

/// A built-in reference transcoder for the job's formats.
pub fn baseline<T: Real>(cfg: &JobConfig, which: Baseline) -> Result<TranscodingMatrix<T>> {
    let cloud = sample_cloud::<T>(&cfg.cloud)?;
    let (encoding, decoder) = build_chain(cfg, &cloud)?;
    match which {
        Baseline::Remap => remap(cfg, &cloud, encoding.channel_labels)?
            .ok_or_else(|| Error::config("evaluation.baselines", "remap needs input channel directions")),
        Baseline::Allrad => {
            let FormatSpec::Ambisonics { order, normalization, .. } = cfg.input else {
                return Err(Error::config("evaluation.baselines", "allrad needs an ambisonics input"));
            };
            let m = allrad_decoder(
                &decoder.layout,
                order,
                normalization,
                &CloudSpec::TDesign { points: ALLRAD_VIRTUAL_POINTS },
            )?;
            TranscodingMatrix::new(m, encoding.channel_labels, decoder.layout.labels())
        }
    }
}

/// Output of [`run_generate`].
#[derive(Clone, Debug)]
pub struct Generated<T> {
    pub report: OptimizationReport<T>,
    pub matrix: MatrixFile,
}

/// Optimizes the job's transcoder. With `out_dir`, writes `transcoder.txt`,
/// `cost.txt` (initial and final breakdowns), `progress.tsv` and `run.txt`.
pub fn run_generate<T: Real>(cfg: &JobConfig, out_dir: Option<&Path>) -> Result<Generated<T>> {
    let problem = build_problem::<T>(cfg)?;
    let report = optimize_with_restarts(&problem, &cfg.optimizer)?;
    let note = format!(
        "{} seed {} iterations {} stop {}",
        cfg.name.as_deref().unwrap_or("job"),
        report.seed,
        report.iterations,
        report.stop_reason.as_str()
    );
    let t = &report.final_t;
    let matrix = MatrixFile::from_matrix(
        MatrixKind::Transcoding,
        &t.entries,
        t.output_labels.clone(),
        t.input_labels.clone(),
        note,
    )?;
    if let Some(dir) = out_dir {
        create_dir(dir)?;
        export_matrix(&matrix, &dir.join("transcoder.txt"))?;
        let cost = format!(
            "# initial\n{}# final\n{}",
            report.initial.to_text(),
            report.final_cost.to_text()
        );
        write_atomic(&dir.join("cost.txt"), cost.as_bytes())?;
        write_atomic(&dir.join("progress.tsv"), report.progress_log().as_bytes())?;
        let run = format!(
            "converged {}\nstop_reason {}\niterations {}\nevaluations {}\nseed {}\ngradient_norm {:.16e}\n",
            report.converged,
            report.stop_reason.as_str(),
            report.iterations,
            report.evaluations,
            report.seed,
            report.gradient_norm_final.to_f64_lossy()
        );
        write_atomic(&dir.join("run.txt"), run.as_bytes())?;
    }
    Ok(Generated { report, matrix })
}

/// Evaluates transcoders of one job on its evaluation cloud.
#[derive(Clone, Debug)]
pub struct Evaluator<T> {
    pub encoding: EncodingMatrix<T>,
    pub decoder: DecoderToSpeaker<T>,
    pub mode: AnalysisMode,
}

impl<T: Real> Evaluator<T> {
    pub fn new(cfg: &JobConfig, mode: Option<AnalysisMode>) -> Result<Self> {
        let cloud = sample_cloud::<T>(cfg.evaluation_cloud())?;
        let (encoding, decoder) = build_chain(cfg, &cloud)?;
        Ok(Self { encoding, decoder, mode: mode.unwrap_or(cfg.evaluation.mode) })
    }

    /// `(N, M)` shape expected of a transcoder.
    pub fn shape(&self) -> (usize, usize) {
        (self.decoder.channels(), self.encoding.channels())
    }

    pub fn transcoder(&self, file: &MatrixFile) -> Result<TranscodingMatrix<T>> {
        if file.kind != MatrixKind::Transcoding {
            return Err(Error::MatrixFile(format!("expected a transcoding matrix, found {}", file.kind.as_str())));
        }
        if file.matrix.shape() != self.shape() {
            return Err(Error::Dimension(format!(
                "matrix is {}x{}, the job needs {}x{}",
                file.rows(),
                file.cols(),
                self.shape().0,
                self.shape().1
            )));
        }
        TranscodingMatrix::new(file.to_matrix(), file.col_labels.clone(), file.row_labels.clone())
    }

    pub fn metrics(&self, t: &TranscodingMatrix<T>) -> Result<Vec<DirectionMetrics<T>>> {
        if t.shape() != self.shape() {
            return Err(Error::Dimension(format!("transcoder is {:?}, the job needs {:?}", t.shape(), self.shape())));
        }
        let s = speaker_matrix(&self.encoding, t, &self.decoder)?;
        Ok(analyze(&s, self.mode))
    }

    pub fn evaluate(&self, name: &str, t: &TranscodingMatrix<T>) -> Result<Evaluation> {
        let metrics = self.metrics(t)?;
        Evaluation::new(name, self.mode, &metrics)
    }
}

/// Metrics and summaries of one matrix. With `out_dir`, writes the report
/// files described in [`report::write_evaluation`].
pub fn run_evaluate<T: Real>(
    cfg: &JobConfig,
    matrix: &MatrixFile,
    mode: Option<AnalysisMode>,
    out_dir: Option<&Path>,
) -> Result<Evaluation> {
    let ev = Evaluator::<T>::new(cfg, mode)?;
    let evaluation = ev.evaluate("matrix", &ev.transcoder(matrix)?)?;
    if let Some(dir) = out_dir {
        create_dir(dir)?;
        report::write_evaluation(dir, std::slice::from_ref(&evaluation))?;
    }
    Ok(evaluation)
}

/// Evaluates every named matrix and every requested baseline on the same
/// cloud. The first entry is the reference of the per-direction deltas.
pub fn run_compare<T: Real>(
    cfg: &JobConfig,
    matrices: &[(String, MatrixFile)],
    mode: Option<AnalysisMode>,
    out_dir: Option<&Path>,
) -> Result<Vec<Evaluation>> {
    let ev = Evaluator::<T>::new(cfg, mode)?;
    let mut named: Vec<(String, TranscodingMatrix<T>)> = Vec::new();
    for (name, file) in matrices {
        named.push((name.clone(), ev.transcoder(file)?));
    }
    for &b in &cfg.evaluation.baselines {
        named.push((b.name().to_string(), baseline::<T>(cfg, b)?));
    }
    if named.len() < 2 {
        return Err(Error::config("paths.matrices", "comparison needs at least two matrices"));
    }
    let mut seen = std::collections::HashSet::new();
    for (name, _) in &named {
        if !seen.insert(name.as_str()) {
            return Err(Error::Invalid(format!("duplicate matrix name `{name}`")));
        }
    }
    let evaluations = std::thread::scope(|s| {
        let handles: Vec<_> = named.iter().map(|(name, t)| s.spawn(|| ev.evaluate(name, t))).collect();
        handles.into_iter().map(|h| h.join().expect("evaluation thread panicked")).collect::<Result<Vec<_>>>()
    })?;
    if let Some(dir) = out_dir {
        create_dir(dir)?;
        report::write_evaluation(dir, &evaluations)?;
    }
    Ok(evaluations)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}
