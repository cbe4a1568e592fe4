//! Bundled reference scenarios.

use crate::cli::config::parse_config;
use crate::error::{Error, Result};
use crate::simulator::ScenarioConfig;

/// Zero uncertainty: exact model following.
pub const G1_ZERO_UNCERTAINTY: &str = include_str!("../scenarios/g1_zero_uncertainty.toml");
/// Constant parameter with an exciting reference.
pub const G2_CONSTANT_IE: &str = include_str!("../scenarios/g2_constant_ie.toml");
/// Slow sinusoidal parameter variation.
pub const G3_SLOW_VARIATION: &str = include_str!("../scenarios/g3_slow_variation.toml");
/// Non-exciting constant reference.
pub const G4_NON_EXCITING: &str = include_str!("../scenarios/g4_non_exciting.toml");

/// `(name, toml)` for every bundled scenario.
pub const ALL: [(&str, &str); 4] = [
    ("g1_zero_uncertainty", G1_ZERO_UNCERTAINTY),
    ("g2_constant_ie", G2_CONSTANT_IE),
    ("g3_slow_variation", G3_SLOW_VARIATION),
    ("g4_non_exciting", G4_NON_EXCITING),
];

pub fn text(name: &str) -> Result<&'static str> {
    ALL.iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| Error::invalid("scenario", format!("no bundled scenario named {name:?}")))
}

pub fn load(name: &str) -> Result<ScenarioConfig> {
    parse_config(text(name)?)
}
