//! Scenario files shipped with the binary.

use crate::config::ScenarioConfig;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Preset {
    pub name: &'static str,
    pub source: &'static str,
}

impl Preset {
    pub fn config(&self) -> Result<ScenarioConfig, CliError> {
        ScenarioConfig::from_toml(self.source).map_err(|e| CliError::Config(format!("preset {}: {e}", self.name)))
    }
}

pub const PRESETS: &[Preset] = &[
    Preset { name: "delay-nonosc", source: include_str!("../configs/delay_nonosc.toml") },
    Preset { name: "step-forced", source: include_str!("../configs/step_forced.toml") },
    Preset { name: "step-forced-strong", source: include_str!("../configs/step_forced_strong.toml") },
    Preset { name: "harmonic", source: include_str!("../configs/harmonic.toml") },
    Preset { name: "wong-sine", source: include_str!("../configs/wong_sine.toml") },
];

/// Ids accepted by `reproduce`, each with its preset.
pub const EXAMPLES: &[(&str, &str)] = &[("3.1", "delay-nonosc"), ("3.2", "step-forced")];

pub const EXAMPLE_IDS: &[&str] = &["3.1", "3.2", "delay-nonosc", "step-forced", "step-forced-strong"];

pub fn by_name(name: &str) -> Option<Preset> {
    PRESETS.iter().copied().find(|p| p.name == name)
}

pub fn for_example(id: &str) -> Option<Preset> {
    let name = EXAMPLES.iter().find(|(k, _)| *k == id).map_or(id, |(_, n)| *n);
    if !EXAMPLE_IDS.contains(&id) {
        return None;
    }
    by_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_validate() {
        for p in PRESETS {
            p.config().unwrap().validate().unwrap_or_else(|e| panic!("{}: {e}", p.name));
        }
    }

    #[test]
    fn example_ids_resolve() {
        assert_eq!(for_example("3.1").unwrap().name, "delay-nonosc");
        assert_eq!(for_example("3.2").unwrap().name, "step-forced");
        assert!(for_example("3.3").is_none());
        assert!(for_example("harmonic").is_none());
    }
}
