//! Optional TOML defaults. Command-line flags win.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub store: Option<PathBuf>,
    pub listen: Option<String>,
    pub server: Option<String>,
    pub alphabet: Option<String>,
    pub cipher: Option<String>,
    pub seed: Option<u64>,
    pub clock: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_known_keys() {
        let c = FileConfig::parse("store = \"s.json\"\nlisten = \"127.0.0.1:7070\"\nseed = 4\n").unwrap();
        assert_eq!(c.store.unwrap(), PathBuf::from("s.json"));
        assert_eq!(c.seed, Some(4));
        assert!(c.cipher.is_none());
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(FileConfig::parse("password = \"hunter2\"\n").is_err());
    }
}
