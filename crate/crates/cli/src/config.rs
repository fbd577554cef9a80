//! TOML configuration: one table per module, every key optional.
//!
//! ```toml
//! seed = 7
//!
//! [loss]
//! alpha = 0.6
//! lambda = 0.375
//!
//! [loss.betti]
//! filtration_type = "sublevel"
//!
//! [fusion]
//! patch_size = 512
//!
//! [[defects]]
//! kind = "bridge"
//! count = 2
//! ```

use std::path::Path;

use metalseg::fusion::FusionConfig;
use metalseg::loss::LossConfig;
use metalseg::prompts::PromptConfig;
use metalseg::report::EvaluationConfig;
use metalseg::synth::{AugmentConfig, DefectSpec, SynthConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    /// Provider request timeout in seconds.
    pub provider_timeout_secs: Option<u64>,
    pub loss: LossConfig,
    pub fusion: FusionConfig,
    pub prompts: PromptConfig,
    pub evaluation: EvaluationConfig,
    pub synth: SynthConfig,
    pub augment: AugmentConfig,
    pub defects: Vec<DefectSpec>,
}

impl Config {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
            }
        }
    }
}
