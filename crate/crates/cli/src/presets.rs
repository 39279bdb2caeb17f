//! Bundled configurations, one per reproduced figure.

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const PRESETS: &[(&str, &str)] = &[
    ("fig1", include_str!("../presets/fig1.json")),
    ("fig1-detuned", include_str!("../presets/fig1-detuned.json")),
    ("fig3", include_str!("../presets/fig3.json")),
    ("fig4-top", include_str!("../presets/fig4-top.json")),
    ("fig4-bottom", include_str!("../presets/fig4-bottom.json")),
    ("fig5-full", include_str!("../presets/fig5-full.json")),
    ("fig5-half", include_str!("../presets/fig5-half.json")),
    ("mesh-m3", include_str!("../presets/mesh-m3.json")),
    ("verify", include_str!("../presets/verify.json")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset(name: &str) -> CliResult<RunConfig> {
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        CliError::Config(format!("unknown preset `{name}` (available: {})", names().collect::<Vec<_>>().join(", ")))
    })?;
    RunConfig::from_json(text)
}
