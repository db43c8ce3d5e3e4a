//! Optional TOML configuration: any long flag may be set under its flag
//! name (`steps = 2000`, `warmup-steps = 100`), and explicit command-line
//! values always win. One file can serve several subcommands because keys
//! a subcommand does not use are ignored.

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::errors::CliError;

/// Parsed `--config` file; empty when no file was given.
#[derive(Debug)]
pub struct FileConfig {
    table: toml::Table,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self {
                table: toml::Table::new(),
            });
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let table = text
            .parse::<toml::Table>()
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        Ok(Self { table })
    }

    /// Look up `key`, converting the TOML value to `T`.
    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.table.get(key) {
            None => Ok(None),
            Some(v) => v
                .clone()
                .try_into()
                .map(Some)
                .map_err(|e| CliError::Usage(format!("config key `{key}`: {e}"))),
        }
    }

    /// Command line, then config file, then the built-in default.
    pub fn resolve<T: DeserializeOwned>(
        &self,
        cli: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T, CliError> {
        match cli {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    /// Command line, then config file; `None` when neither sets the key.
    pub fn resolve_opt<T: DeserializeOwned>(
        &self,
        cli: Option<T>,
        key: &str,
    ) -> Result<Option<T>, CliError> {
        match cli {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    /// Command line, then config file; error when the flag is missing.
    pub fn require<T: DeserializeOwned>(&self, cli: Option<T>, key: &str) -> Result<T, CliError> {
        self.resolve_opt(cli, key)?
            .ok_or_else(|| CliError::Usage(format!("missing required flag --{key}")))
    }

    /// Boolean flags: present on the command line means true; otherwise
    /// the config file may turn the flag on.
    pub fn resolve_flag(&self, cli: bool, key: &str) -> Result<bool, CliError> {
        if cli {
            return Ok(true);
        }
        Ok(self.get(key)?.unwrap_or(false))
    }
}
