//! Loudspeaker layouts and their left-right symmetry.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::cloud::{sample_cloud, CloudSpec};
use super::direction::{azimuth_difference, Direction};
use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::real::Real;

/// Minimum angular separation between two speakers of one layout, degrees.
const MIN_SEPARATION_DEG: f64 = 0.1;

/// Default tolerance for automatic symmetry detection, degrees.
pub const DEFAULT_SYMMETRY_TOL_DEG: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Speaker<T> {
    pub label: String,
    pub direction: Direction<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpeakerLayout<T> {
    speakers: Vec<Speaker<T>>,
    symmetry_pairs: Vec<(usize, usize)>,
}

impl<T: Real> SpeakerLayout<T> {
    /// Builds a layout and detects its symmetry pairs with the default tolerance.
    pub fn new(speakers: Vec<Speaker<T>>) -> Result<Self> {
        let mut layout = Self { speakers, symmetry_pairs: Vec::new() };
        layout.validate()?;
        layout.symmetry_pairs = detect_symmetry_pairs(&layout, T::lit(DEFAULT_SYMMETRY_TOL_DEG));
        Ok(layout)
    }

    pub fn from_directions<'a>(items: impl IntoIterator<Item = (&'a str, f64, f64)>) -> Result<Self> {
        let speakers = items
            .into_iter()
            .map(|(label, az, el)| {
                Ok(Speaker { label: label.to_string(), direction: Direction::new(T::lit(az), T::lit(el))? })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(speakers)
    }

    fn validate(&self) -> Result<()> {
        if self.speakers.is_empty() {
            return Err(Error::Invalid("layout has no speakers".into()));
        }
        let mut seen = HashSet::new();
        for s in &self.speakers {
            if s.label.is_empty() || s.label.chars().any(char::is_whitespace) {
                return Err(Error::Invalid(format!("speaker label {:?} must be non-empty without whitespace", s.label)));
            }
            if !seen.insert(s.label.as_str()) {
                return Err(Error::Invalid(format!("duplicate speaker label {}", s.label)));
            }
        }
        let min_sep = T::lit(MIN_SEPARATION_DEG);
        for (i, a) in self.speakers.iter().enumerate() {
            for b in &self.speakers[i + 1..] {
                if a.direction.angle_to(&b.direction) <= min_sep {
                    return Err(Error::Invalid(format!("speakers {} and {} are collocated", a.label, b.label)));
                }
            }
        }
        Ok(())
    }

    /// Replaces the symmetry pairs; each speaker may appear in at most one pair.
    pub fn with_symmetry_pairs(mut self, pairs: Vec<(usize, usize)>) -> Result<Self> {
        let mut used = HashSet::new();
        for &(p, q) in &pairs {
            if p >= self.len() || q >= self.len() || p == q {
                return Err(Error::Invalid(format!("invalid symmetry pair ({p}, {q})")));
            }
            if !used.insert(p) || !used.insert(q) {
                return Err(Error::Invalid(format!("speaker appears in more than one symmetry pair ({p}, {q})")));
            }
        }
        self.symmetry_pairs = pairs;
        Ok(self)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.speakers.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.speakers.is_empty()
    }

    pub fn speakers(&self) -> &[Speaker<T>] {
        &self.speakers
    }

    pub fn symmetry_pairs(&self) -> &[(usize, usize)] {
        &self.symmetry_pairs
    }

    pub fn labels(&self) -> Vec<String> {
        self.speakers.iter().map(|s| s.label.clone()).collect()
    }

    pub fn directions(&self) -> Vec<Direction<T>> {
        self.speakers.iter().map(|s| s.direction).collect()
    }

    pub fn vectors(&self) -> Vec<Vec3<T>> {
        self.speakers.iter().map(|s| s.direction.to_unit_vector()).collect()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.speakers.iter().position(|s| s.label == label)
    }

    /// True when every speaker sits on the horizontal plane within 0.5°.
    pub fn is_horizontal(&self) -> bool {
        let tol = T::lit(0.5);
        self.speakers.iter().all(|s| s.direction.elevation().abs() < tol)
    }

    /// Returns a copy with one extra speaker appended (symmetry pairs kept).
    pub fn with_extra_speaker(&self, label: &str, direction: Direction<T>) -> Result<Self> {
        let mut speakers = self.speakers.clone();
        speakers.push(Speaker { label: label.to_string(), direction });
        let out = Self { speakers, symmetry_pairs: self.symmetry_pairs.clone() };
        out.validate()?;
        Ok(out)
    }
}

/// Pairs `(p, p′)` with `az_p ≈ −az_p′` and `el_p ≈ el_p′` within `tol` degrees.
///
/// Speakers on the median plane stay unpaired. Candidates are accepted from
/// the best match down, ties broken by label, so the resulting set of label
/// pairs does not depend on speaker order. Each pair is reported with the
/// left (positive azimuth) speaker first.
pub fn detect_symmetry_pairs<T: Real>(layout: &SpeakerLayout<T>, tol: T) -> Vec<(usize, usize)> {
    let sp = layout.speakers();
    let on_median = |d: &Direction<T>| {
        d.azimuth().abs() <= tol || azimuth_difference(d.azimuth(), T::lit(180.0)).abs() <= tol
    };
    let mut candidates = Vec::new();
    for i in 0..sp.len() {
        for j in (i + 1)..sp.len() {
            let (a, b) = (&sp[i].direction, &sp[j].direction);
            if on_median(a) || on_median(b) {
                continue;
            }
            let daz = azimuth_difference(a.azimuth(), -b.azimuth()).abs();
            let del = (a.elevation() - b.elevation()).abs();
            if daz <= tol && del <= tol {
                let (l, r) = if a.azimuth() > T::zero() { (i, j) } else { (j, i) };
                candidates.push((daz.max(del), l, r));
            }
        }
    }
    let key = |l: usize, r: usize| (sp[l].label.clone(), sp[r].label.clone());
    candidates.sort_by(|x, y| {
        x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal).then_with(|| key(x.1, x.2).cmp(&key(y.1, y.2)))
    });
    let mut used = HashSet::new();
    let mut pairs = Vec::new();
    for (_, l, r) in candidates {
        if used.contains(&l) || used.contains(&r) {
            continue;
        }
        used.insert(l);
        used.insert(r);
        pairs.push((l, r));
    }
    pairs.sort_unstable();
    pairs
}

/// One speaker entry of an explicit layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeakerSpec {
    pub label: String,
    pub azimuth: f64,
    #[serde(default)]
    pub elevation: f64,
}

/// How a job configuration names a layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LayoutSpec {
    /// A built-in layout such as `"7.0.4"`; see [`named_layout`].
    Named(String),
    /// Explicit speakers, with optional explicit symmetry pairs (by label).
    Explicit {
        speakers: Vec<SpeakerSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        symmetry_pairs: Option<Vec<[String; 2]>>,
    },
    /// Virtual speakers at the points of a cloud, labelled `V0`, `V1`, ….
    Virtual {
        #[serde(rename = "virtual")]
        cloud: CloudSpec,
    },
}

impl LayoutSpec {
    pub fn build<T: Real>(&self) -> Result<SpeakerLayout<T>> {
        match self {
            LayoutSpec::Named(name) => named_layout(name),
            LayoutSpec::Explicit { speakers, symmetry_pairs } => {
                let layout = SpeakerLayout::from_directions(
                    speakers.iter().map(|s| (s.label.as_str(), s.azimuth, s.elevation)),
                )?;
                match symmetry_pairs {
                    None => Ok(layout),
                    Some(pairs) => {
                        let idx = pairs
                            .iter()
                            .map(|[a, b]| {
                                let find = |l: &str| {
                                    layout
                                        .index_of(l)
                                        .ok_or_else(|| Error::Invalid(format!("symmetry pair names unknown speaker {l}")))
                                };
                                Ok((find(a)?, find(b)?))
                            })
                            .collect::<Result<Vec<_>>>()?;
                        layout.with_symmetry_pairs(idx)
                    }
                }
            }
            LayoutSpec::Virtual { cloud } => {
                let c = sample_cloud::<T>(cloud)?;
                let speakers = c
                    .directions()
                    .iter()
                    .enumerate()
                    .map(|(i, d)| Speaker { label: format!("V{i}"), direction: *d })
                    .collect();
                SpeakerLayout::new(speakers)
            }
        }
    }
}

pub const NAMED_LAYOUTS: [&str; 7] = ["stereo", "5.0", "5.0.2", "7.0", "7.0.4", "3.0.1-irregular", "octahedron"];

/// Built-in layouts. Channel order is the order listed here.
///
/// | name | speakers (azimuth, elevation) |
/// |---|---|
/// | `stereo` | L 30, R −30 |
/// | `5.0` | L 30, R −30, C 0, Ls 110, Rs −110 |
/// | `5.0.2` | 5.0 + Ltm (90, 45), Rtm (−90, 45) |
/// | `7.0` | L 30, R −30, C 0, Ls 90, Rs −90, Lb 135, Rb −135 |
/// | `7.0.4` | 7.0 + Ltf (45, 45), Rtf (−45, 45), Ltb (135, 45), Rtb (−135, 45) |
/// | `3.0.1-irregular` | L 10, R −45, S 180, T (0, 80) |
/// | `octahedron` | ±x, ±y, ±z |
pub fn named_layout<T: Real>(name: &str) -> Result<SpeakerLayout<T>> {
    const FIVE: [(&str, f64, f64); 5] = [("L", 30.0, 0.0), ("R", -30.0, 0.0), ("C", 0.0, 0.0), ("Ls", 110.0, 0.0), ("Rs", -110.0, 0.0)];
    const SEVEN: [(&str, f64, f64); 7] = [
        ("L", 30.0, 0.0),
        ("R", -30.0, 0.0),
        ("C", 0.0, 0.0),
        ("Ls", 90.0, 0.0),
        ("Rs", -90.0, 0.0),
        ("Lb", 135.0, 0.0),
        ("Rb", -135.0, 0.0),
    ];
    let items: Vec<(&str, f64, f64)> = match name {
        "stereo" => vec![("L", 30.0, 0.0), ("R", -30.0, 0.0)],
        "5.0" => FIVE.to_vec(),
        "5.0.2" => FIVE.iter().copied().chain([("Ltm", 90.0, 45.0), ("Rtm", -90.0, 45.0)]).collect(),
        "7.0" => SEVEN.to_vec(),
        "7.0.4" => SEVEN
            .iter()
            .copied()
            .chain([("Ltf", 45.0, 45.0), ("Rtf", -45.0, 45.0), ("Ltb", 135.0, 45.0), ("Rtb", -135.0, 45.0)])
            .collect(),
        "3.0.1-irregular" => vec![("L", 10.0, 0.0), ("R", -45.0, 0.0), ("S", 180.0, 0.0), ("T", 0.0, 80.0)],
        "octahedron" => vec![
            ("F", 0.0, 0.0),
            ("B", 180.0, 0.0),
            ("Lt", 90.0, 0.0),
            ("Rt", -90.0, 0.0),
            ("U", 0.0, 90.0),
            ("D", 0.0, -90.0),
        ],
        other => {
            return Err(Error::Invalid(format!(
                "unknown layout {other:?}; built-in layouts are {}",
                NAMED_LAYOUTS.join(", ")
            )))
        }
    };
    SpeakerLayout::from_directions(items)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label_pairs(l: &SpeakerLayout<f64>) -> Vec<(String, String)> {
        let mut v: Vec<_> = l
            .symmetry_pairs()
            .iter()
            .map(|&(a, b)| (l.speakers()[a].label.clone(), l.speakers()[b].label.clone()))
            .collect();
        v.sort();
        v
    }

    #[test]
    fn seven_four_pairs() {
        let l: SpeakerLayout<f64> = named_layout("7.0.4").unwrap();
        let want: Vec<(String, String)> = [("L", "R"), ("Lb", "Rb"), ("Ls", "Rs"), ("Ltb", "Rtb"), ("Ltf", "Rtf")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert_eq!(label_pairs(&l), want);
        let c = l.index_of("C").unwrap();
        assert!(l.symmetry_pairs().iter().all(|&(a, b)| a != c && b != c));
    }

    #[test]
    fn irregular_layout_has_no_pairs() {
        let l: SpeakerLayout<f64> = named_layout("3.0.1-irregular").unwrap();
        assert!(detect_symmetry_pairs(&l, 1.0).is_empty());
        let single = SpeakerLayout::<f64>::from_directions([("C", 0.0, 0.0)]).unwrap();
        assert!(single.symmetry_pairs().is_empty());
    }

    #[test]
    fn pairs_invariant_under_reordering() {
        let base: SpeakerLayout<f64> = named_layout("7.0.4").unwrap();
        let mut speakers = base.speakers().to_vec();
        speakers.reverse();
        speakers.swap(2, 7);
        let shuffled = SpeakerLayout::new(speakers).unwrap();
        assert_eq!(label_pairs(&base), label_pairs(&shuffled));
    }

    #[test]
    fn invalid_layouts() {
        assert!(SpeakerLayout::<f64>::from_directions([("A", 0.0, 0.0), ("A", 10.0, 0.0)]).is_err());
        assert!(SpeakerLayout::<f64>::from_directions([("A", 0.0, 0.0), ("B", 0.05, 0.0)]).is_err());
        assert!(named_layout::<f64>("9.1.6").is_err());
        let l: SpeakerLayout<f64> = named_layout("5.0").unwrap();
        assert!(l.clone().with_symmetry_pairs(vec![(0, 1), (1, 3)]).is_err());
    }

    #[test]
    fn explicit_spec_with_pairs() {
        let spec: LayoutSpec = toml::from_str::<toml::Value>(
            r#"speakers = [{label = "A", azimuth = 20}, {label = "B", azimuth = -25}]
symmetry_pairs = [["A", "B"]]"#,
        )
        .unwrap()
        .try_into()
        .unwrap();
        let l = spec.build::<f64>().unwrap();
        assert_eq!(l.symmetry_pairs(), &[(0, 1)]);
    }
}
