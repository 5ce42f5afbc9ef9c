use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use spatial_transcoder::analysis::AnalysisMode;
use spatial_transcoder::io::audio::apply_to_audio;
use spatial_transcoder::io::config::{load_config, JobConfig, Mode};
use spatial_transcoder::io::matrix_file::import_matrix;
use spatial_transcoder::io::pipeline::{run_compare, run_evaluate, run_generate};
use spatial_transcoder::io::presets::{preset, preset_text, PRESET_NAMES};
use spatial_transcoder::io::report::{summary_table, Evaluation};
use spatial_transcoder::{Error, Result};

#[derive(Parser)]
#[command(name = "spatial-transcoder", version, about = "Optimized linear transcoders between spatial audio formats")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a transcoder and write it with its cost breakdown.
    Generate(JobArgs),
    /// Per-direction metrics and summaries of one matrix.
    Evaluate(JobArgs),
    /// Side-by-side metrics of several matrices and configured baselines.
    Compare(JobArgs),
    /// Apply a matrix to a WAV file.
    Apply {
        #[command(flatten)]
        job: JobArgs,
        /// Input WAV file.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output WAV file (32-bit float).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print a built-in configuration, or list them.
    Preset {
        name: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Coherent,
    Incoherent,
}

#[derive(Args)]
struct JobArgs {
    /// Job configuration file (TOML).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: example1 … example4.
    #[arg(long)]
    preset: Option<String>,
    /// Matrix file; repeat for comparisons.
    #[arg(long)]
    matrix: Vec<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optimizer seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Analysis mode for evaluation.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

impl JobArgs {
    fn config(&self, mode: Mode, required: bool) -> Result<Option<JobConfig>> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => load_config(path)?,
            (None, Some(name)) => preset(name)?,
            (None, None) if !required => return Ok(None),
            (None, None) => return Err(Error::Config { key: "--config".into(), message: "give --config or --preset".into() }),
        };
        if let Some(seed) = self.seed {
            cfg.optimizer.seed = seed;
        }
        if !self.matrix.is_empty() {
            cfg.paths.matrices = self.matrix.clone();
        }
        if let Some(out) = &self.out {
            cfg.paths.out_dir = Some(out.clone());
        }
        cfg.mode = mode;
        Ok(Some(cfg))
    }

    fn analysis_mode(&self) -> Option<AnalysisMode> {
        self.mode.map(|m| match m {
            ModeArg::Coherent => AnalysisMode::Coherent,
            ModeArg::Incoherent => AnalysisMode::Incoherent,
        })
    }
}

fn out_dir(cfg: &JobConfig) -> PathBuf {
    cfg.paths.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn matrix_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "matrix".into())
}

fn print_medians(evals: &[Evaluation]) {
    print!("{}", summary_table(evals));
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => {
            let cfg = args.config(Mode::Generate, true)?.expect("required");
            cfg.check_ready(Mode::Generate)?;
            let dir = out_dir(&cfg);
            let g = run_generate::<f64>(&cfg, Some(&dir))?;
            let r = &g.report;
            println!(
                "{}x{} transcoder written to {}",
                g.matrix.rows(),
                g.matrix.cols(),
                dir.join("transcoder.txt").display()
            );
            println!(
                "cost {:.6e} -> {:.6e}, {} iterations, {} ({:.2} s)",
                r.initial.total,
                r.final_cost.total,
                r.iterations,
                r.stop_reason.as_str(),
                r.wall_time_seconds
            );
            if !r.converged {
                eprintln!("warning: optimization stopped before convergence; the best iterate was written");
            }
        }
        Command::Evaluate(args) => {
            let cfg = args.config(Mode::Evaluate, true)?.expect("required");
            cfg.check_ready(Mode::Evaluate)?;
            let matrix = import_matrix(&cfg.paths.matrices[0])?;
            let dir = out_dir(&cfg);
            let e = run_evaluate::<f64>(&cfg, &matrix, args.analysis_mode(), Some(&dir))?;
            print_medians(std::slice::from_ref(&e));
        }
        Command::Compare(args) => {
            let cfg = args.config(Mode::Compare, true)?.expect("required");
            cfg.check_ready(Mode::Compare)?;
            let matrices = cfg
                .paths
                .matrices
                .iter()
                .map(|p| Ok((matrix_name(p), import_matrix(p)?)))
                .collect::<Result<Vec<_>>>()?;
            let dir = out_dir(&cfg);
            let evals = run_compare::<f64>(&cfg, &matrices, args.analysis_mode(), Some(&dir))?;
            print_medians(&evals);
        }
        Command::Apply { job, input, output } => {
            let cfg = job.config(Mode::Apply, false)?;
            let matrix_path = job
                .matrix
                .first()
                .cloned()
                .or_else(|| cfg.as_ref().and_then(|c| c.paths.matrices.first().cloned()))
                .ok_or_else(|| Error::Config { key: "--matrix".into(), message: "required".into() })?;
            let input = input
                .or_else(|| cfg.as_ref().and_then(|c| c.paths.audio_input.clone()))
                .ok_or_else(|| Error::Config { key: "--input".into(), message: "required".into() })?;
            let output = output
                .or_else(|| cfg.as_ref().and_then(|c| c.paths.audio_output.clone()))
                .ok_or_else(|| Error::Config { key: "--output".into(), message: "required".into() })?;
            let matrix = import_matrix(&matrix_path)?;
            let stats = apply_to_audio(&matrix, &input, &output)?;
            println!(
                "{} frames, {} -> {} channels at {} Hz; {} samples above full scale",
                stats.frames, stats.input_channels, stats.output_channels, stats.sample_rate, stats.clipped
            );
        }
        Command::Preset { name } => match name {
            Some(name) => print!("{}", preset_text(&name)?),
            None => PRESET_NAMES.iter().for_each(|n| println!("{n}")),
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
