//! Job configuration files.
//!
//! A job is described in TOML. Every table rejects unknown keys.
//!
//! ```toml
//! mode = "generate"            # generate | evaluate | compare | apply
//!
//! [input]                      # any FormatSpec
//! kind = "ambisonics"
//! order = 5
//!
//! [output.format]              # any FormatSpec
//! kind = "vbap"
//! layout = "7.0.4"
//! # [output.layout]            # decoding layout; defaults to the format's own layout
//!
//! [cloud]                      # any CloudSpec
//! kind = "t-design"
//! points = 56
//!
//! [coefficients]
//! c_e = 5.0
//! c_ir = 2.0
//!
//! [optimizer]                  # optional, every key has a default
//! seed = 0
//!
//! [evaluation]                 # optional
//! mode = "incoherent"
//! baselines = ["remap"]        # remap | allrad
//! # [evaluation.cloud]         # defaults to the optimization cloud
//!
//! [paths]                      # optional; relative to the config file
//! out_dir = "out"
//! matrices = ["a.txt", "b.txt"]
//! audio_input = "in.wav"
//! audio_output = "out.wav"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisMode;
use crate::cost::CostCoefficients;
use crate::error::{Error, Result};
use crate::formats::FormatSpec;
use crate::geometry::{CloudSpec, LayoutSpec};
use crate::optimizer::{Init, OptimizationConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Generate,
    Evaluate,
    Compare,
    Apply,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub format: FormatSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<LayoutSpec>,
}

/// Built-in reference transcoders available to comparisons.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    /// Input channels panned or encoded at their nominal directions.
    Remap,
    /// Ambisonics decoder through a 60-point virtual layout.
    Allrad,
}

impl Baseline {
    pub fn name(self) -> &'static str {
        match self {
            Baseline::Remap => "remap",
            Baseline::Allrad => "allrad",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cloud: Option<CloudSpec>,
    pub mode: AnalysisMode,
    pub baselines: Vec<Baseline>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub matrices: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audio_input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audio_output: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub mode: Mode,
    pub input: FormatSpec,
    pub output: OutputSpec,
    pub cloud: CloudSpec,
    pub coefficients: CostCoefficients,
    #[serde(default)]
    pub optimizer: OptimizationConfig,
    #[serde(default)]
    pub evaluation: EvaluationSpec,
    #[serde(default)]
    pub paths: Paths,
}

impl JobConfig {
    /// Parses and validates TOML text. Relative paths are left untouched.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let cfg: JobConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            let message = e.inner().message().to_string();
            Error::config(if key == "." { String::new() } else { key }, message)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Invalid(format!("cannot serialize configuration: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        let scoped = |prefix: &'static str| {
            move |e: Error| match e {
                Error::Config { key, message } => Error::config(format!("{prefix}.{key}"), message),
                other => Error::config(prefix, other.to_string()),
            }
        };
        self.coefficients.validate().map_err(scoped("coefficients"))?;
        self.optimizer.validate().map_err(scoped("optimizer"))?;
        self.input.validate().map_err(scoped("input"))?;
        self.output.format.validate().map_err(scoped("output.format"))?;
        if let Some(layout) = &self.output.layout {
            layout.build::<f64>().map_err(scoped("output.layout"))?;
        }
        if self.output.layout.is_none() && !matches!(self.output.format, FormatSpec::Vbap { .. }) {
            return Err(Error::config("output.layout", "required unless the output format is a speaker layout"));
        }
        if matches!(self.output.format, FormatSpec::Vbap { .. }) && self.output.layout.is_some() {
            return Err(Error::config("output.layout", "a speaker output format already names its layout"));
        }
        if matches!(self.input, FormatSpec::Objects {}) && self.evaluation.cloud.as_ref().is_some_and(|c| *c != self.cloud) {
            return Err(Error::config("evaluation.cloud", "object inputs are evaluated on the optimization cloud"));
        }
        if matches!(self.output.format, FormatSpec::Objects {}) {
            return Err(Error::config("output.format", "objects are an input-only format"));
        }
        if self.evaluation.baselines.contains(&Baseline::Allrad)
            && !matches!(self.input, FormatSpec::Ambisonics { .. })
        {
            return Err(Error::config("evaluation.baselines", "allrad needs an ambisonics input"));
        }
        if self.evaluation.baselines.contains(&Baseline::Allrad) && !matches!(self.output.format, FormatSpec::Vbap { .. }) {
            return Err(Error::config("evaluation.baselines", "allrad needs a speaker output format"));
        }
        Ok(())
    }

    /// Layout that the decoder feeds.
    pub fn decoder_layout_spec(&self) -> &LayoutSpec {
        match (&self.output.layout, &self.output.format) {
            (Some(l), _) => l,
            (None, FormatSpec::Vbap { layout }) => layout,
            _ => unreachable!("validated configuration"),
        }
    }

    pub fn evaluation_cloud(&self) -> &CloudSpec {
        self.evaluation.cloud.as_ref().unwrap_or(&self.cloud)
    }

    /// Makes every relative path absolute with respect to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for spec in [&mut self.input, &mut self.output.format] {
            if let FormatSpec::External { path } = spec {
                fix(path);
            }
        }
        if let Init::Given { path } = &mut self.optimizer.init {
            fix(path);
        }
        self.paths.out_dir.as_mut().map(fix);
        self.paths.matrices.iter_mut().for_each(fix);
        self.paths.audio_input.as_mut().map(fix);
        self.paths.audio_output.as_mut().map(fix);
    }

    /// Fails unless the fields that `mode` needs are present and the files exist.
    pub fn check_ready(&self, mode: Mode) -> Result<()> {
        let exists = |key: &str, p: &Path| {
            if p.exists() {
                Ok(())
            } else {
                Err(Error::config(key, format!("{} does not exist", p.display())))
            }
        };
        for (key, spec) in [("input.path", &self.input), ("output.format.path", &self.output.format)] {
            if let FormatSpec::External { path } = spec {
                exists(key, path)?;
            }
        }
        if let Init::Given { path } = &self.optimizer.init {
            exists("optimizer.init.path", path)?;
        }
        let need_matrices = match mode {
            Mode::Generate => 0,
            Mode::Evaluate | Mode::Apply => 1,
            Mode::Compare => 2usize.saturating_sub(self.evaluation.baselines.len()).max(1),
        };
        if self.paths.matrices.len() < need_matrices {
            return Err(Error::config(
                "paths.matrices",
                format!("{mode:?} mode needs at least {need_matrices} matrix file(s)").to_lowercase(),
            ));
        }
        for p in &self.paths.matrices {
            exists("paths.matrices", p)?;
        }
        if mode == Mode::Apply {
            let input = self.paths.audio_input.as_deref().ok_or_else(|| Error::config("paths.audio_input", "required"))?;
            exists("paths.audio_input", input)?;
            if self.paths.audio_output.is_none() {
                return Err(Error::config("paths.audio_output", "required"));
            }
        }
        Ok(())
    }
}

/// Reads, validates and path-resolves a configuration file.
pub fn load_config(path: &Path) -> Result<JobConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = JobConfig::from_toml(&text)?;
    cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [input]
        kind = "ambisonics"
        order = 1
        [output.format]
        kind = "vbap"
        layout = "5.0"
        [cloud]
        kind = "t-design"
        points = 56
        [coefficients]
        c_e = 1.0
    "#;

    fn config_key(text: &str) -> String {
        match JobConfig::from_toml(text) {
            Err(Error::Config { key, .. }) => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn omitted_blocks_take_defaults() {
        let cfg = JobConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.mode, Mode::Generate);
        assert_eq!(cfg.optimizer, OptimizationConfig::default());
        assert_eq!(cfg.evaluation, EvaluationSpec::default());
        assert_eq!(cfg.coefficients.l_max_db, 3.0);
    }

    #[test]
    fn negative_coefficient_names_its_key() {
        assert_eq!(config_key(&MINIMAL.replace("c_e = 1.0", "c_e = 1.0\nc_it = -1.0")), "coefficients.c_it");
    }

    #[test]
    fn unknown_keys_carry_their_path() {
        let key = config_key(&MINIMAL.replace("c_e = 1.0", "c_e = 1.0\n[optimizer]\nsede = 3"));
        assert_eq!(key, "optimizer.sede");
        assert!(JobConfig::from_toml(&format!("{MINIMAL}\nbogus = 1")).is_err());
    }

    #[test]
    fn missing_layout_for_ambisonics_output_is_rejected() {
        let text = MINIMAL.replace("kind = \"vbap\"\n        layout = \"5.0\"", "kind = \"ambisonics\"\n        order = 1");
        assert_eq!(config_key(&text), "output.layout");
    }

    #[test]
    fn paths_resolve_against_the_config_directory() {
        let mut cfg = JobConfig::from_toml(&format!("{MINIMAL}\n[paths]\nmatrices = [\"m.txt\", \"/abs.txt\"]")).unwrap();
        cfg.resolve_paths(Path::new("/jobs"));
        assert_eq!(cfg.paths.matrices, vec![PathBuf::from("/jobs/m.txt"), PathBuf::from("/abs.txt")]);
    }

    #[test]
    fn evaluate_without_matrix_is_not_ready() {
        let cfg = JobConfig::from_toml(MINIMAL).unwrap();
        assert!(cfg.check_ready(Mode::Generate).is_ok());
        assert!(matches!(cfg.check_ready(Mode::Evaluate), Err(Error::Config { .. })));
    }
}
