//! Bundled experiment configurations, one per reproduced figure panel.

use crate::config::ExperimentConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Preset {
    pub name: &'static str,
    pub toml: &'static str,
}

macro_rules! presets {
    ($($name:literal),* $(,)?) => {
        &[$(Preset { name: $name, toml: include_str!(concat!("../presets/", $name, ".toml")) }),*]
    };
}

pub const PRESETS: &[Preset] = presets!(
    "fig1c", "fig1d", "fig2a", "fig2b", "fig2c", "fig2d", "fig3d", "fig4a", "fig4b", "fig5", "fig6a", "fig6b", "fig9a",
    "fig9b", "fig9c", "fig9d", "table1",
);

impl Preset {
    pub fn config(&self) -> Result<ExperimentConfig, CliError> {
        ExperimentConfig::parse(self.toml)
    }

    /// The config title, which doubles as the citation string.
    pub fn citation(&self) -> String {
        self.config().map(|c| c.title).unwrap_or_default()
    }
}

pub fn preset(name: &str) -> Result<&'static Preset, CliError> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .ok_or_else(|| CliError::Usage(format!("unknown preset `{name}`; run `stirap presets list`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for p in PRESETS {
            let config = p.config().unwrap_or_else(|e| panic!("{}: {e}", p.name));
            assert!(config.title.starts_with(p.name), "{}", p.name);
        }
    }
}
