//! Applying a matrix to multichannel WAV files.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};
use crate::io::matrix_file::MatrixFile;

/// Frames processed per block.
pub const BLOCK_FRAMES: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AudioStats {
    pub frames: u64,
    pub input_channels: usize,
    pub output_channels: usize,
    pub sample_rate: u32,
    /// Output samples with magnitude above 1. They are written unclipped.
    pub clipped: u64,
}

fn audio_err(path: &Path, e: hound::Error) -> Error {
    Error::Audio(format!("{}: {e}", path.display()))
}

/// Reads every sample as `f32`: integers are divided by `2^(bits−1)`.
fn samples<R: std::io::Read>(reader: WavReader<R>, path: &Path) -> Result<Box<dyn Iterator<Item = Result<f32>>>>
where
    R: 'static,
{
    let spec = reader.spec();
    let p = path.to_path_buf();
    match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => {
            Ok(Box::new(reader.into_samples::<f32>().map(move |s| s.map_err(|e| audio_err(&p, e)))))
        }
        (SampleFormat::Int, bits @ (16 | 24)) => {
            let scale = 1.0 / (1u32 << (bits - 1)) as f32;
            Ok(Box::new(reader.into_samples::<i32>().map(move |s| s.map(|v| v as f32 * scale).map_err(|e| audio_err(&p, e)))))
        }
        (fmt, bits) => Err(Error::Audio(format!(
            "{}: unsupported sample format {fmt:?} with {bits} bits (expected PCM 16/24 or float 32)",
            path.display()
        ))),
    }
}

/// `out[n][t] = Σ_m T[n][m]·in[m][t]`, accumulated in `f64` and written as
/// 32-bit float WAV. Zero coefficients are skipped, so an identity matrix
/// reproduces its input exactly.
pub fn apply_to_audio(matrix: &MatrixFile, input: &Path, output: &Path) -> Result<AudioStats> {
    let file = std::fs::File::open(input).map_err(|e| Error::io(input, e))?;
    let reader = WavReader::new(std::io::BufReader::new(file)).map_err(|e| audio_err(input, e))?;
    let spec = reader.spec();
    let m = spec.channels as usize;
    let (rows, cols) = matrix.matrix.shape();
    if m != cols {
        return Err(Error::Dimension(format!("{} has {m} channels, the matrix expects {cols}", input.display())));
    }
    if rows > u16::MAX as usize {
        return Err(Error::Audio(format!("{rows} output channels exceed the WAV limit")));
    }
    let taps: Vec<Vec<(usize, f64)>> = (0..rows)
        .map(|r| matrix.matrix.row(r).iter().copied().enumerate().filter(|&(_, g)| g != 0.0).collect())
        .collect();
    let out_spec = WavSpec {
        channels: rows as u16,
        sample_rate: spec.sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let dir = output.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = output.file_name().ok_or_else(|| Error::Invalid(format!("{} is not a file path", output.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut writer = WavWriter::create(&tmp, out_spec).map_err(|e| audio_err(output, e))?;
        let mut it = samples(reader, input)?;
        let mut block: Vec<f32> = Vec::with_capacity(BLOCK_FRAMES * m);
        let mut stats = AudioStats {
            frames: 0,
            input_channels: m,
            output_channels: rows,
            sample_rate: spec.sample_rate,
            clipped: 0,
        };
        loop {
            block.clear();
            for s in it.by_ref().take(BLOCK_FRAMES * m) {
                block.push(s?);
            }
            if block.is_empty() {
                break;
            }
            if m == 0 || block.len() % m != 0 {
                return Err(Error::Audio(format!("{}: truncated final frame", input.display())));
            }
            for frame in block.chunks_exact(m) {
                for row in &taps {
                    let mut acc = -0.0f64;
                    for &(c, g) in row {
                        acc += g * frame[c] as f64;
                    }
                    let y = acc as f32;
                    if y.abs() > 1.0 {
                        stats.clipped += 1;
                    }
                    writer.write_sample(y).map_err(|e| audio_err(output, e))?;
                }
                stats.frames += 1;
            }
        }
        writer.finalize().map_err(|e| audio_err(output, e))?;
        std::fs::rename(&tmp, output).map_err(|e| Error::io(output, e))?;
        Ok(stats)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}

/// Every sample of a WAV file as `f32`, interleaved, using the same
/// conversion as [`apply_to_audio`].
pub fn read_samples(path: &Path) -> Result<(WavSpec, Vec<f32>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = WavReader::new(std::io::BufReader::new(file)).map_err(|e| audio_err(path, e))?;
    let spec = reader.spec();
    let v = samples(reader, path)?.collect::<Result<Vec<_>>>()?;
    Ok((spec, v))
}
