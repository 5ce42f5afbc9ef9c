//! Plain-text matrix files.
//!
//! ```text
//! # spatial-transcoder matrix
//! kind transcoding
//! rows 2
//! cols 3
//! row_labels L R
//! col_labels ACN0 ACN1 ACN2
//! note optimized on td56
//! data
//! 1.0000000000000000e0 0.0000000000000000e0 5.0000000000000000e-1
//! 0.0000000000000000e0 1.0000000000000000e0 5.0000000000000000e-1
//! ```
//!
//! Entries are written with 17 significant digits, which round-trips every
//! `f64` exactly.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::real::Real;

const MAGIC: &str = "# spatial-transcoder matrix";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixKind {
    Encoding,
    Transcoding,
    DecoderToSpeaker,
}

impl MatrixKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MatrixKind::Encoding => "encoding",
            MatrixKind::Transcoding => "transcoding",
            MatrixKind::DecoderToSpeaker => "decoder_to_speaker",
        }
    }
}

impl FromStr for MatrixKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "encoding" => Ok(MatrixKind::Encoding),
            "transcoding" => Ok(MatrixKind::Transcoding),
            "decoder_to_speaker" => Ok(MatrixKind::DecoderToSpeaker),
            other => Err(Error::MatrixFile(format!("unknown kind `{other}`"))),
        }
    }
}

/// A labelled matrix as stored on disk. Entries are kept in `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixFile {
    pub kind: MatrixKind,
    pub matrix: Matrix<f64>,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub note: String,
}

impl MatrixFile {
    pub fn new(
        kind: MatrixKind,
        matrix: Matrix<f64>,
        row_labels: Vec<String>,
        col_labels: Vec<String>,
        note: impl Into<String>,
    ) -> Result<Self> {
        let file = Self { kind, matrix, row_labels, col_labels, note: note.into() };
        file.validate()?;
        Ok(file)
    }

    pub fn from_matrix<T: Real>(
        kind: MatrixKind,
        matrix: &Matrix<T>,
        row_labels: Vec<String>,
        col_labels: Vec<String>,
        note: impl Into<String>,
    ) -> Result<Self> {
        Self::new(kind, matrix.cast(), row_labels, col_labels, note)
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn to_matrix<T: Real>(&self) -> Matrix<T> {
        self.matrix.cast()
    }

    fn validate(&self) -> Result<()> {
        check_labels("row", &self.row_labels, self.matrix.rows())?;
        check_labels("column", &self.col_labels, self.matrix.cols())?;
        if self.note.contains('\n') {
            return Err(Error::MatrixFile("note must be a single line".into()));
        }
        if !self.matrix.is_finite() {
            return Err(Error::MatrixFile("non-finite entry".into()));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "kind {}", self.kind.as_str());
        let _ = writeln!(out, "rows {}", self.rows());
        let _ = writeln!(out, "cols {}", self.cols());
        let _ = writeln!(out, "row_labels {}", self.row_labels.join(" "));
        let _ = writeln!(out, "col_labels {}", self.col_labels.join(" "));
        let _ = writeln!(out, "note {}", self.note);
        out.push_str("data\n");
        for r in 0..self.rows() {
            let line: Vec<String> = self.matrix.row(r).iter().map(|x| format!("{x:.16e}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim_end) != Some(MAGIC) {
            return Err(Error::MatrixFile("missing header line".into()));
        }
        let mut field = |name: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| Error::MatrixFile(format!("missing `{name}` line")))?;
            let rest = line
                .strip_prefix(name)
                .filter(|r| r.is_empty() || r.starts_with(' '))
                .ok_or_else(|| Error::MatrixFile(format!("expected `{name}`, found `{line}`")))?;
            Ok(rest.trim_start_matches(' ').to_string())
        };
        let kind: MatrixKind = field("kind")?.trim().parse()?;
        let rows = parse_dim(&field("rows")?)?;
        let cols = parse_dim(&field("cols")?)?;
        let row_labels: Vec<String> = field("row_labels")?.split_whitespace().map(String::from).collect();
        let col_labels: Vec<String> = field("col_labels")?.split_whitespace().map(String::from).collect();
        let note = field("note")?;
        if !field("data")?.is_empty() {
            return Err(Error::MatrixFile("unexpected text after `data`".into()));
        }
        let mut values = Vec::with_capacity(rows * cols);
        for tok in lines.flat_map(str::split_whitespace) {
            let v: f64 = tok.parse().map_err(|_| Error::MatrixFile(format!("bad number `{tok}`")))?;
            values.push(v);
        }
        if values.len() != rows * cols {
            return Err(Error::MatrixFile(format!(
                "{} entries for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        let matrix = Matrix::from_row_major(rows, cols, values)?;
        Self::new(kind, matrix, row_labels, col_labels, note)
    }
}

fn parse_dim(s: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| Error::MatrixFile(format!("bad dimension `{s}`")))
}

fn check_labels(what: &str, labels: &[String], n: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::MatrixFile(format!("{} {what} labels for {n} {what}s", labels.len())));
    }
    let mut seen = HashSet::new();
    for l in labels {
        if l.is_empty() || l.chars().any(char::is_whitespace) {
            return Err(Error::MatrixFile(format!("{what} label `{l}` is empty or contains whitespace")));
        }
        if !seen.insert(l) {
            return Err(Error::MatrixFile(format!("duplicate {what} label `{l}`")));
        }
    }
    Ok(())
}

pub fn export_matrix(file: &MatrixFile, path: &Path) -> Result<()> {
    super::write_atomic(path, file.to_text().as_bytes())
}

pub fn import_matrix(path: &Path) -> Result<MatrixFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    MatrixFile::parse(&text).map_err(|e| match e {
        Error::MatrixFile(msg) => Error::MatrixFile(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    proptest! {
        #[test]
        fn text_round_trip_is_bit_exact(bits in proptest::collection::vec(any::<u64>(), 6)) {
            let vals: Vec<f64> = bits.iter().map(|&b| f64::from_bits(b)).map(|x| if x.is_finite() { x } else { 0.5 }).collect();
            let m = Matrix::from_row_major(2, 3, vals).unwrap();
            let f = MatrixFile::new(MatrixKind::Transcoding, m, labels("r", 2), labels("c", 3), "n").unwrap();
            let back = MatrixFile::parse(&f.to_text()).unwrap();
            for (a, b) in back.matrix.as_slice().iter().zip(f.matrix.as_slice()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn entry_count_mismatch_is_rejected() {
        let m = Matrix::from_row_major(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let f = MatrixFile::new(MatrixKind::Encoding, m, labels("a", 2), labels("b", 2), "").unwrap();
        let text = f.to_text();
        let truncated = text.trim_end().rsplit_once(' ').unwrap().0.to_string();
        assert!(matches!(MatrixFile::parse(&truncated), Err(Error::MatrixFile(_))));
        assert!(MatrixFile::parse(&text.replace("kind encoding", "kind other")).is_err());
        assert!(MatrixFile::parse(&text.replace("b0 b1", "b0 b0")).is_err());
    }

    #[test]
    fn empty_note_survives() {
        let f = MatrixFile::new(MatrixKind::DecoderToSpeaker, Matrix::identity(1), labels("x", 1), labels("y", 1), "")
            .unwrap();
        assert_eq!(MatrixFile::parse(&f.to_text()).unwrap(), f);
    }
}
