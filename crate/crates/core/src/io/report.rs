//! Tabular evaluation reports and gnuplot data bundles.
//!
//! All output is a pure function of the evaluated metrics, so reruns produce
//! identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::{summarize, AnalysisMode, DirectionMetrics, Summary};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Pressure,
    VelocityRadial,
    VelocityTransverse,
    Energy,
    IntensityRadial,
    IntensityTransverse,
    Asw,
    Delta,
    LevelDb,
}

impl Metric {
    pub const ALL: [Metric; 9] = [
        Metric::Pressure,
        Metric::VelocityRadial,
        Metric::VelocityTransverse,
        Metric::Energy,
        Metric::IntensityRadial,
        Metric::IntensityTransverse,
        Metric::Asw,
        Metric::Delta,
        Metric::LevelDb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Pressure => "P",
            Metric::VelocityRadial => "VR",
            Metric::VelocityTransverse => "VT",
            Metric::Energy => "E",
            Metric::IntensityRadial => "IR",
            Metric::IntensityTransverse => "IT",
            Metric::Asw => "ASW",
            Metric::Delta => "delta",
            Metric::LevelDb => "level_dB",
        }
    }

    fn index(self) -> usize {
        Metric::ALL.iter().position(|&m| m == self).unwrap_or(0)
    }

    fn of<T: Real>(self, d: &DirectionMetrics<T>) -> f64 {
        let p = &d.physical;
        match self {
            Metric::Pressure => p.pressure,
            Metric::VelocityRadial => p.velocity_radial,
            Metric::VelocityTransverse => p.velocity_transverse,
            Metric::Energy => p.energy,
            Metric::IntensityRadial => p.intensity_radial,
            Metric::IntensityTransverse => p.intensity_transverse,
            Metric::Asw => d.asw,
            Metric::Delta => d.delta,
            Metric::LevelDb => d.level_db,
        }
        .to_f64_lossy()
    }
}

/// Metrics shown as box plots.
pub const PERCEPTUAL: [Metric; 3] = [Metric::LevelDb, Metric::Asw, Metric::Delta];

#[derive(Clone, Debug, PartialEq)]
pub struct DirectionRow {
    pub azimuth: f64,
    pub elevation: f64,
    pub weight: f64,
    pub values: [f64; 9],
}

/// Per-direction metrics of one matrix plus a summary of every metric.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub name: String,
    pub mode: AnalysisMode,
    pub rows: Vec<DirectionRow>,
    pub summaries: [Summary<f64>; 9],
}

impl Evaluation {
    pub fn new<T: Real>(name: &str, mode: AnalysisMode, metrics: &[DirectionMetrics<T>]) -> Result<Self> {
        let rows: Vec<DirectionRow> = metrics
            .iter()
            .map(|d| DirectionRow {
                azimuth: d.direction.azimuth().to_f64_lossy(),
                elevation: d.direction.elevation().to_f64_lossy(),
                weight: d.weight.to_f64_lossy(),
                values: Metric::ALL.map(|m| m.of(d)),
            })
            .collect();
        let mut summaries = Vec::with_capacity(9);
        for m in Metric::ALL {
            let v: Vec<f64> = rows.iter().map(|r| r.values[m.index()]).collect();
            summaries.push(summarize(&v)?);
        }
        let summaries = summaries.try_into().map_err(|_| Error::Invalid("summary count".into()))?;
        Ok(Self { name: name.to_string(), mode, rows, summaries })
    }

    pub fn values(&self, metric: Metric) -> Vec<f64> {
        self.rows.iter().map(|r| r.values[metric.index()]).collect()
    }

    pub fn summary(&self, metric: Metric) -> &Summary<f64> {
        &self.summaries[metric.index()]
    }

    pub fn median(&self, metric: Metric) -> f64 {
        self.summary(metric).median
    }
}

fn num(x: f64) -> String {
    format!("{x:.9}")
}

fn mode_name(mode: AnalysisMode) -> &'static str {
    match mode {
        AnalysisMode::Coherent => "coherent",
        AnalysisMode::Incoherent => "incoherent",
    }
}

/// `az el weight P VR VT E IR IT ASW delta level_dB`, one line per direction.
pub fn metrics_table(e: &Evaluation) -> String {
    let mut out = format!("# {} ({})\naz\tel\tweight", e.name, mode_name(e.mode));
    for m in Metric::ALL {
        out.push('\t');
        out.push_str(m.name());
    }
    out.push('\n');
    for r in &e.rows {
        let _ = write!(out, "{}\t{}\t{}", num(r.azimuth), num(r.elevation), num(r.weight));
        for v in r.values {
            let _ = write!(out, "\t{}", num(v));
        }
        out.push('\n');
    }
    out
}

/// Box-plot statistics of every metric of every matrix.
pub fn summary_table(evals: &[Evaluation]) -> String {
    let mut out = String::from("matrix\tmetric\tmedian\tq1\tq3\twhisker_low\twhisker_high\n");
    for e in evals {
        for m in Metric::ALL {
            let s = e.summary(m);
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                e.name,
                m.name(),
                num(s.median),
                num(s.q1),
                num(s.q3),
                num(s.whisker_low),
                num(s.whisker_high)
            );
        }
    }
    out
}

/// Per-direction differences `other − reference` of the perceptual metrics.
pub fn delta_table(reference: &Evaluation, other: &Evaluation) -> Result<String> {
    if reference.rows.len() != other.rows.len() {
        return Err(Error::Dimension(format!(
            "{} has {} directions, {} has {}",
            reference.name,
            reference.rows.len(),
            other.name,
            other.rows.len()
        )));
    }
    let mut out = format!("# {} minus {}\naz\tel", other.name, reference.name);
    for m in PERCEPTUAL {
        let _ = write!(out, "\td_{}", m.name());
    }
    out.push('\n');
    for (a, b) in reference.rows.iter().zip(&other.rows) {
        let _ = write!(out, "{}\t{}", num(a.azimuth), num(a.elevation));
        for m in PERCEPTUAL {
            let _ = write!(out, "\t{}", num(b.values[m.index()] - a.values[m.index()]));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Per-direction series of one metric, one column per matrix.
pub fn series_data(evals: &[Evaluation], metric: Metric) -> String {
    let mut out = String::from("# az el");
    for e in evals {
        let _ = write!(out, " {}", e.name);
    }
    out.push('\n');
    if let Some(first) = evals.first() {
        for (i, r) in first.rows.iter().enumerate() {
            let _ = write!(out, "{} {}", num(r.azimuth), num(r.elevation));
            for e in evals {
                let _ = write!(out, " {}", num(e.rows[i].values[metric.index()]));
            }
            out.push('\n');
        }
    }
    out
}

/// Box-plot columns of one metric, one line per matrix.
pub fn box_data(evals: &[Evaluation], metric: Metric) -> String {
    let mut out = String::from("# index name median q1 q3 whisker_low whisker_high\n");
    for (i, e) in evals.iter().enumerate() {
        let s = e.summary(metric);
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {}",
            i + 1,
            e.name,
            num(s.median),
            num(s.q1),
            num(s.q3),
            num(s.whisker_low),
            num(s.whisker_high)
        );
    }
    out
}

/// Reference gnuplot script for the bundle written by [`write_evaluation`].
pub fn plot_script(evals: &[Evaluation]) -> String {
    let mut out = String::from("set terminal pngcairo size 1200,400\nset output 'summary.png'\nset multiplot layout 1,3\n");
    out.push_str("set style fill solid 0.4\nset boxwidth 0.5\nset xtics rotate by -30\n");
    for m in PERCEPTUAL {
        let _ = writeln!(
            out,
            "set title '{0}'\nplot [0:{1}] 'box_{0}.dat' using 1:4:6:7:5:xticlabels(2) with candlesticks whiskerbars notitle, \\\n     '' using 1:3:3:3:3 with candlesticks lw 2 notitle",
            m.name(),
            evals.len() + 1
        );
    }
    out.push_str("unset multiplot\n");
    out
}

/// File name fragment for a matrix name.
pub fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Writes `metrics_<name>.tsv` per matrix, `summary.tsv`, `deltas_<name>.tsv`
/// for every matrix after the first, and `plot/` with one `.dat` series and
/// one box-plot file per metric plus `plot.gp`.
pub fn write_evaluation(dir: &Path, evals: &[Evaluation]) -> Result<()> {
    let plot = dir.join("plot");
    std::fs::create_dir_all(&plot).map_err(|e| Error::io(&plot, e))?;
    for e in evals {
        write_atomic(&dir.join(format!("metrics_{}.tsv", file_stem(&e.name))), metrics_table(e).as_bytes())?;
    }
    write_atomic(&dir.join("summary.tsv"), summary_table(evals).as_bytes())?;
    if let Some((first, rest)) = evals.split_first() {
        for e in rest {
            write_atomic(&dir.join(format!("deltas_{}.tsv", file_stem(&e.name))), delta_table(first, e)?.as_bytes())?;
        }
    }
    for m in Metric::ALL {
        write_atomic(&plot.join(format!("{}.dat", m.name())), series_data(evals, m).as_bytes())?;
        write_atomic(&plot.join(format!("box_{}.dat", m.name())), box_data(evals, m).as_bytes())?;
    }
    write_atomic(&plot.join("plot.gp"), plot_script(evals).as_bytes())
}
