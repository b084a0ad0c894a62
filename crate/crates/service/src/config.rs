use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use acgrade_core::GraderId;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

fn default_listen() -> String {
    "127.0.0.1:8080".to_string()
}

fn default_lease() -> u64 {
    600
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenEntry {
    pub token: String,
    /// May upload exams and change the lifecycle state.
    #[serde(default)]
    pub lead: bool,
}

/// Service configuration file (TOML).
///
/// ```toml
/// listen = "127.0.0.1:8080"
/// data_dir = "/var/lib/acgrade"
/// lease_seconds = 600
///
/// [tokens.alice]
/// token = "s3cret"
/// lead = true
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen: String,
    pub data_dir: PathBuf,
    #[serde(default = "default_lease")]
    pub lease_seconds: u64,
    /// Grader id to bearer token.
    #[serde(default)]
    pub tokens: BTreeMap<String, TokenEntry>,
    /// CSV `booklet_id,student_ref`; defaults to `registry.csv` in the data
    /// directory when that file exists.
    #[serde(default)]
    pub registry: Option<PathBuf>,
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ServiceError> {
        let config: ServiceConfig = toml::from_str(text).map_err(|e| ServiceError::Config(e.to_string()))?;
        let mut seen = std::collections::BTreeSet::new();
        for (grader, entry) in &config.tokens {
            if entry.token.is_empty() {
                return Err(ServiceError::Config(format!("empty token for {grader}")));
            }
            if !seen.insert(entry.token.as_str()) {
                return Err(ServiceError::Config(format!("token of {grader} is shared with another grader")));
            }
        }
        Ok(config)
    }

    pub fn authenticate(&self, token: &str) -> Option<Actor> {
        self.tokens
            .iter()
            .find(|(_, e)| e.token == token)
            .map(|(grader, e)| Actor { grader_id: GraderId::new(grader.as_str()), lead: e.lead })
    }
}

/// The authenticated caller of an operation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Actor {
    pub grader_id: GraderId,
    pub lead: bool,
}

impl Actor {
    pub fn grader(id: &str) -> Self {
        Actor { grader_id: GraderId::new(id), lead: false }
    }

    pub fn lead(id: &str) -> Self {
        Actor { grader_id: GraderId::new(id), lead: true }
    }
}
