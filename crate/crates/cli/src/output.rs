//! Writes campaign artifacts, the checksum manifest and the plot recipe.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::campaigns::{Artifact, CampaignOutput, Panel};
use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PLOT_RECIPE_FILE: &str = "plot_recipe.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub campaign: String,
    pub title: String,
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
    pub wall_clock_s: f64,
    pub files: Vec<ManifestEntry>,
}

#[derive(Serialize)]
struct PlotRecipe<'a> {
    title: &'a str,
    panels: &'a [Panel],
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Run metadata that is not derived from the artifacts themselves.
#[derive(Debug, Clone)]
pub struct RunInfo {
    pub campaign: String,
    pub title: String,
    pub config_text: String,
    pub seed: u64,
    pub threads: usize,
    pub wall_clock_s: f64,
    pub emit_plot_recipe: bool,
}

fn write(dir: &Path, artifact: &Artifact) -> Result<ManifestEntry, CliError> {
    let path = dir.join(&artifact.file);
    fs::write(&path, &artifact.contents).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    Ok(ManifestEntry {
        file: artifact.file.clone(),
        sha256: sha256_hex(artifact.contents.as_bytes()),
        bytes: artifact.contents.len(),
    })
}

/// Writes every artifact into `dir` and returns the manifest path.
pub fn write_outputs(dir: &Path, output: &CampaignOutput, info: &RunInfo) -> Result<(PathBuf, Manifest), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
    let mut files = output.artifacts.iter().map(|a| write(dir, a)).collect::<Result<Vec<_>, _>>()?;
    if info.emit_plot_recipe {
        let recipe = PlotRecipe { title: &info.title, panels: &output.panels };
        let mut contents = serde_json::to_string_pretty(&recipe).expect("recipe serializes");
        contents.push('\n');
        files.push(write(dir, &Artifact { file: PLOT_RECIPE_FILE.into(), contents })?);
    }
    let manifest = Manifest {
        tool: "stirap",
        version: env!("CARGO_PKG_VERSION"),
        campaign: info.campaign.clone(),
        title: info.title.clone(),
        config_sha256: sha256_hex(info.config_text.as_bytes()),
        seed: info.seed,
        threads: info.threads,
        wall_clock_s: info.wall_clock_s,
        files,
    };
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    Ok((path, manifest))
}
