//! Built-in job configurations reproducing the four reference transcoding setups.

use crate::error::{Error, Result};
use crate::io::config::JobConfig;

pub const PRESET_NAMES: [&str; 4] = ["example1", "example2", "example3", "example4"];

/// TOML source of a preset.
pub fn preset_text(name: &str) -> Result<&'static str> {
    Ok(match name {
        "example1" => include_str!("../../presets/example1.toml"),
        "example2" => include_str!("../../presets/example2.toml"),
        "example3" => include_str!("../../presets/example3.toml"),
        "example4" => include_str!("../../presets/example4.toml"),
        other => {
            return Err(Error::config(
                "preset",
                format!("unknown preset `{other}`; available: {}", PRESET_NAMES.join(", ")),
            ))
        }
    })
}

pub fn preset(name: &str) -> Result<JobConfig> {
    JobConfig::from_toml(preset_text(name)?)
}
