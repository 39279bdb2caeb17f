//! Run configuration as read from JSON.
//!
//! Sites are given as lattice labels (`index + site_origin`).

use std::path::{Path, PathBuf};

use binlattice::lattice::{bare_resonance_epsilon, bs_correction, shifted_resonance_epsilon};
use binlattice::spectrum::{default_search_halfwidth, locate_anticrossing};
use binlattice::LatticeParams;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Scan,
    Cascade,
    Floquet,
    MeshCompile,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Scan => "scan",
            Command::Cascade => "cascade",
            Command::Floquet => "floquet",
            Command::MeshCompile => "mesh-compile",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoKeyword {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOr<T> {
    Auto(AutoKeyword),
    Value(T),
}

impl<T> Default for AutoOr<T> {
    fn default() -> Self {
        AutoOr::Auto(AutoKeyword::Auto)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpsilonRule {
    /// Numerically located pair anticrossing.
    Anticrossing,
    /// `(2m+1)F − δ`.
    Shifted,
    /// `(2m+1)F`.
    Bare,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsilonSpec {
    Value(f64),
    Rule(EpsilonRule),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub n_sites: usize,
    #[serde(rename = "V")]
    pub v: f64,
    #[serde(rename = "F")]
    pub f: f64,
    pub epsilon: EpsilonSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_m: Option<u32>,
    #[serde(default)]
    pub site_origin: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshSource {
    Propagator,
    Random,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Extras {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_multiplier: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_per_stage: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_blocks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub substeps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternate_sign: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_orders: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orders: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forces: Option<Vec<f64>>,
    /// V/F per entry of `orders`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling_ratios: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh_source: Option<MeshSource>,
    /// Propagation time for a propagator mesh source, in units of the period `T`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh_time_periods: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_random: Option<usize>,
    /// Phase quantization step in units of π.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantization_step_pi: Option<f64>,
    /// Integrator comparison time for `verify`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    pub lattice: LatticeConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_site: Option<i64>,
    #[serde(default)]
    pub t_max: AutoOr<f64>,
    #[serde(default)]
    pub n_steps: AutoOr<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub emit_heatmap: bool,
    #[serde(default)]
    pub extras: Extras,
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> CliResult<()> {
        self.base_params()?;
        if let Some(site) = self.input_site {
            self.index_of(site)?;
        }
        if let Some(chain) = &self.extras.chain {
            for &s in chain {
                self.index_of(s)?;
            }
        }
        if let AutoOr::Value(t) = self.t_max {
            if !(t > 0.0) || !t.is_finite() {
                return Err(CliError::Config(format!("t_max must be positive, got {t}")));
            }
        }
        if let AutoOr::Value(n) = self.n_steps {
            if n == 0 {
                return Err(CliError::Config("n_steps must be positive".into()));
            }
        }
        Ok(())
    }

    /// Lattice parameters with ε = 0 when ε is a rule.
    pub fn base_params(&self) -> CliResult<LatticeParams> {
        let l = &self.lattice;
        let eps = match l.epsilon {
            EpsilonSpec::Value(e) => e,
            EpsilonSpec::Rule(_) => 0.0,
        };
        let mut p = LatticeParams::new(l.n_sites, l.v, l.f, eps)?.with_origin(l.site_origin);
        if let Some(m) = l.order_m {
            p = p.with_order(m);
        }
        Ok(p)
    }

    pub fn order(&self) -> CliResult<u32> {
        self.lattice.order_m.ok_or_else(|| CliError::Config("lattice.order_m is required for this command".into()))
    }

    /// Array index of a site label.
    pub fn index_of(&self, label: i64) -> CliResult<usize> {
        let idx = label - self.lattice.site_origin as i64;
        if idx < 0 || idx >= self.lattice.n_sites as i64 {
            return Err(CliError::Config(format!(
                "site {label} outside [{}, {})",
                self.lattice.site_origin,
                self.lattice.site_origin as usize + self.lattice.n_sites
            )));
        }
        Ok(idx as usize)
    }

    pub fn label_of(&self, index: usize) -> i64 {
        index as i64 + self.lattice.site_origin as i64
    }

    pub fn input_index(&self) -> CliResult<usize> {
        let site = self.input_site.ok_or_else(|| CliError::Config("input_site is required for this command".into()))?;
        self.index_of(site)
    }

    /// Resolves ε (applying any detuning) with `(source, partner)` as the
    /// resonant pair for the anticrossing rule.
    pub fn resolve_params(&self, source: usize, partner: usize) -> CliResult<LatticeParams> {
        let base = self.base_params()?;
        let l = &self.lattice;
        let eps = match l.epsilon {
            EpsilonSpec::Value(e) => e,
            EpsilonSpec::Rule(rule) => {
                let m = self.order()?;
                match rule {
                    EpsilonRule::Bare => bare_resonance_epsilon(m, l.f),
                    EpsilonRule::Shifted => shifted_resonance_epsilon(m, l.v, l.f),
                    EpsilonRule::Anticrossing => {
                        locate_anticrossing(&base, m, source, partner, default_search_halfwidth(m, l.v, l.f))?
                            .epsilon_star
                    }
                }
            }
        };
        let detune = match self.extras.detuning_multiplier {
            Some(k) => k * bs_correction(self.order()?, l.v, l.f),
            None => 0.0,
        };
        Ok(base.with_epsilon(eps + detune))
    }

    /// Resonant partner of `source`: rightward from sites whose on-site energy
    /// is raised by ε (positive unless given as a negative number), leftward
    /// otherwise.
    pub fn partner_of(&self, source: usize) -> CliResult<usize> {
        let m = self.order()? as i64;
        let sign = match self.lattice.epsilon {
            EpsilonSpec::Value(e) if e < 0.0 => -1.0,
            _ => 1.0,
        };
        let probe = self.base_params()?.with_epsilon(sign);
        let step = if probe.is_raised(source) { 2 * m + 1 } else { -(2 * m + 1) };
        let target = source as i64 + step;
        if target < 0 || target >= self.lattice.n_sites as i64 {
            return Err(CliError::Config(format!(
                "resonant partner of site {} lies outside the lattice",
                self.label_of(source)
            )));
        }
        Ok(target as usize)
    }

    /// [`Self::resolve_params`] using the input site and its partner as the pair.
    pub fn resolve_for_input(&self) -> CliResult<LatticeParams> {
        match self.lattice.epsilon {
            EpsilonSpec::Rule(EpsilonRule::Anticrossing) => {
                let input = self.input_index()?;
                self.resolve_params(input, self.partner_of(input)?)
            }
            _ => self.resolve_params(0, 0),
        }
    }

    /// The configuration with every automatic value replaced.
    pub fn resolved(&self, params: &LatticeParams, t_max: f64, n_steps: usize) -> RunConfig {
        let mut out = self.clone();
        out.lattice.epsilon = EpsilonSpec::Value(params.epsilon);
        out.extras.detuning_multiplier = None;
        out.t_max = AutoOr::Value(t_max);
        out.n_steps = AutoOr::Value(n_steps);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "lattice": {"n_sites": 12, "V": 0.9, "F": 0.9, "epsilon": "anticrossing", "order_m": 2, "site_origin": 1},
        "input_site": 4
    }"#;

    #[test]
    fn parses_rules_and_autos() {
        let cfg = RunConfig::from_json(BASE).unwrap();
        assert_eq!(cfg.lattice.epsilon, EpsilonSpec::Rule(EpsilonRule::Anticrossing));
        assert_eq!(cfg.t_max, AutoOr::Auto(AutoKeyword::Auto));
        assert_eq!(cfg.input_index().unwrap(), 3);
        let explicit = BASE.replace("\"input_site\": 4", "\"input_site\": 4, \"t_max\": 12.5, \"n_steps\": 100");
        let cfg = RunConfig::from_json(&explicit).unwrap();
        assert_eq!(cfg.t_max, AutoOr::Value(12.5));
        assert_eq!(cfg.n_steps, AutoOr::Value(100));
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            BASE.replace("\"input_site\": 4", "\"input_site\": 0"),
            BASE.replace("\"input_site\": 4", "\"input_site\": 13"),
            BASE.replace("\"input_site\": 4", "\"input_site\": 4, \"t_max\": -1"),
            BASE.replace("\"input_site\": 4", "\"input_site\": 4, \"bogus\": 1"),
            BASE.replace("\"V\": 0.9", "\"V\": -0.9"),
            BASE.replace("\"anticrossing\"", "\"sideways\""),
        ] {
            assert!(matches!(RunConfig::from_json(&bad), Err(CliError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn partner_follows_raised_site() {
        let cfg = RunConfig::from_json(BASE).unwrap();
        assert_eq!(cfg.label_of(cfg.partner_of(cfg.input_index().unwrap()).unwrap()), 9);
    }

    #[test]
    fn detuning_adds_multiples_of_the_correction() {
        let mut cfg = RunConfig::from_json(&BASE.replace("\"anticrossing\"", "\"shifted\"")).unwrap();
        let on = cfg.resolve_params(3, 8).unwrap().epsilon;
        cfg.extras.detuning_multiplier = Some(5.0);
        let off = cfg.resolve_params(3, 8).unwrap().epsilon;
        assert!((off - on - 5.0 * bs_correction(2, 0.9, 0.9)).abs() < 1e-12);
    }
}
