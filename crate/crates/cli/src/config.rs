//! Experiment configs: TOML with `[sim]`, `[radio]`, `[devices]`, `[fl]`,
//! `[scheduler]`, `[data]` and `[diversity]` sections.

use std::path::Path;

use feel_core::simulator::SimConfig;

use crate::CliError;

/// Reads `path`, applies the `--seed` override and fills in defaults.
pub fn load_config(path: &Path, seed: Option<u64>) -> Result<SimConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text, seed).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_config(text: &str, seed: Option<u64>) -> Result<SimConfig, CliError> {
    let mut table: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_owned()))?;
    let sim = table
        .entry("sim")
        .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        .as_table_mut()
        .ok_or_else(|| CliError::Config("`sim` must be a section".into()))?;
    if let Some(seed) = seed {
        let seed = i64::try_from(seed).map_err(|_| CliError::Config(format!("seed {seed} does not fit in TOML")))?;
        sim.insert("seed".into(), toml::Value::Integer(seed));
    }
    if !sim.contains_key("seed") {
        return Err(CliError::Config("missing required key `sim.seed` (or pass --seed)".into()));
    }
    let config: SimConfig = table.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string().trim_end().to_owned()))?;
    config.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(config)
}

/// The config with every default written out. Loading it back gives the
/// same config.
pub fn resolved_toml(config: &SimConfig) -> String {
    toml::to_string(config).expect("configs serialize to TOML")
}
