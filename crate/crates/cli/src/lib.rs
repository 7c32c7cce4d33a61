//! Configuration-driven experiment campaigns for the `stirap` binary.

pub mod campaigns;
pub mod config;
pub mod error;
pub mod output;
pub mod presets;

pub use campaigns::{run, Artifact, CampaignOutput, Panel, Series};
pub use config::{Campaign, ExperimentConfig};
pub use error::{CliError, ErrorRecord};
pub use output::{write_outputs, Manifest, ManifestEntry};
pub use presets::{preset, Preset, PRESETS};
