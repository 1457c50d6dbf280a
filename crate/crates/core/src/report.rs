//! Versioned JSON envelope shared by every emitted report.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema_version: u32,
    pub code_version: String,
    pub command: String,
    /// The fully resolved configuration of the run.
    pub config: RunConfig,
    pub pass: bool,
    pub result: T,
}

impl<T: Serialize> Envelope<T> {
    pub fn new(command: &str, config: &RunConfig, pass: bool, result: T) -> Self {
        Envelope {
            schema_version: SCHEMA_VERSION,
            code_version: CODE_VERSION.to_string(),
            command: command.to_string(),
            config: config.clone(),
            pass,
            result,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}
