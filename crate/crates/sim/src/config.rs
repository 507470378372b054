//! Strict TOML scenario files.
//!
//! ```toml
//! model = "free"
//!
//! [grid]
//! L = 6.283185307179586
//! N = 256
//!
//! [time]
//! T = 6.283185307179586
//! output_every = 16
//!
//! [initial]
//! preset = "chiral_pulse"
//! center_u = 2.0
//! center_v = 4.0
//! width = 0.4
//! amplitude = 1.0
//!
//! [monitors]
//! names = ["all"]
//!
//! [output]
//! dir = "free_chiral"
//! ```
//!
//! Unknown keys anywhere are errors. `[params]` and `[refinement]` are
//! optional; every other section is required.

use std::path::{Path, PathBuf};

use dirac_core::clifford::Spinor;
use dirac_core::monitors;
use dirac_core::scenario::{ConnectionSpec, InitialData, Model, Scenario, TargetSpec};
use dirac_core::thirring::Potential;
use dirac_core::Complex64;
use serde::Deserialize;
use toml::{Table, Value};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("{0}")]
    Syntax(String),
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: String,
    pub grid: GridSection,
    pub time: TimeSection,
    #[serde(default)]
    pub params: ParamsSection,
    pub initial: InitialSection,
    pub monitors: MonitorsSection,
    pub output: OutputSection,
    #[serde(default)]
    pub refinement: RefinementSection,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "N")]
    pub cells: usize,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub output_every: usize,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsSection {
    pub lambda: f64,
    pub kappa: f64,
    /// Name of a built-in Thirring potential.
    pub potential: Option<String>,
    /// `flat`, `abelian_wave` or `swirl`.
    pub connection: String,
    pub rank: usize,
    pub connection_mode: u32,
    pub connection_a: f64,
    pub connection_b: f64,
    pub connection_omega: f64,
    /// `sphere` or `flat`.
    pub target: String,
    pub q: usize,
}

impl Default for ParamsSection {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            kappa: 0.0,
            potential: None,
            connection: "flat".into(),
            rank: 1,
            connection_mode: 1,
            connection_a: 0.0,
            connection_b: 0.0,
            connection_omega: 0.0,
            target: "sphere".into(),
            q: 3,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub preset: String,
    pub seed: Option<u64>,
    pub modes: Option<usize>,
    pub amplitude: Option<f64>,
    pub center_u: Option<f64>,
    pub center_v: Option<f64>,
    pub width: Option<f64>,
    pub mode: Option<i64>,
    pub branch: Option<i8>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// `[Re u, Im u, Re v, Im v]`.
    pub chi: Option<[f64; 4]>,
    pub map_amplitude: Option<f64>,
    pub velocity_amplitude: Option<f64>,
    pub spinor_amplitude: Option<f64>,
    pub perturbation: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MonitorsSection {
    /// Registry names, or the single entry `all`.
    pub names: Vec<String>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Relative paths are resolved against the output root.
    pub dir: PathBuf,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RefinementSection {
    /// Grids in the sequence `N, 2N, 4N, ...`.
    pub levels: usize,
}

impl Default for RefinementSection {
    fn default() -> Self {
        Self { levels: 1 }
    }
}

/// Parses `text` after applying `key=value` overrides (dotted keys, TOML values).
pub fn parse(text: &str, overrides: &[String]) -> Result<ScenarioConfig, ConfigError> {
    let mut table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    for item in overrides {
        apply_override(&mut table, item)?;
    }
    let config: ScenarioConfig = table
        .try_into()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    config.validate_monitor_names()?;
    Ok(config)
}

pub fn read(path: &Path, overrides: &[String]) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse(&text, overrides)
}

fn apply_override(table: &mut Table, item: &str) -> Result<(), ConfigError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| invalid(item, "override must look like section.key=value"))?;
    let key = key.trim();
    let value: Value = {
        let doc: Table = format!("v = {}", raw.trim()).parse().unwrap_or_else(|_| {
            Table::from_iter([("v".to_string(), Value::String(raw.trim().to_string()))])
        });
        doc["v"].clone()
    };
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| invalid(key, "empty override key"))?;
    let mut node = table;
    for p in parts {
        node = node
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(|| invalid(key, format!("{p} is not a section")))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

impl ScenarioConfig {
    fn validate_monitor_names(&self) -> Result<(), ConfigError> {
        if self.monitors.names.is_empty() {
            return Err(invalid(
                "monitors.names",
                "at least one monitor is required",
            ));
        }
        for name in &self.monitors.names {
            if name != "all" && monitors::lookup(name).is_none() {
                return Err(invalid(
                    "monitors.names",
                    format!("unknown monitor `{name}`"),
                ));
            }
        }
        if self.monitors.names.len() > 1 && self.monitors.names.iter().any(|n| n == "all") {
            return Err(invalid(
                "monitors.names",
                "`all` cannot be combined with other names",
            ));
        }
        Ok(())
    }

    /// Builds the scenario, naming the first offending key on failure.
    pub fn to_scenario(&self) -> Result<Scenario, ConfigError> {
        let model = Model::from_name(&self.model)
            .ok_or_else(|| invalid("model", format!("unknown model `{}`", self.model)))?;
        if self.grid.cells == 0 || !self.grid.cells.is_multiple_of(2) {
            return Err(invalid("grid.N", "must be even and positive"));
        }
        if !(self.grid.length.is_finite() && self.grid.length > 0.0) {
            return Err(invalid("grid.L", "must be positive"));
        }
        if !(self.time.t_final.is_finite() && self.time.t_final > 0.0) {
            return Err(invalid("time.T", "must be positive"));
        }
        if self.time.output_every == 0 {
            return Err(invalid("time.output_every", "must be at least 1"));
        }
        if self.refinement.levels == 0 {
            return Err(invalid("refinement.levels", "must be at least 1"));
        }
        let p = &self.params;
        let potential = match &p.potential {
            None => None,
            Some(name) => Some(Potential::by_name(name).ok_or_else(|| {
                let known: Vec<&str> = Potential::BUILTIN.iter().map(|p| p.name).collect();
                invalid(
                    "params.potential",
                    format!("unknown potential `{name}` (known: {})", known.join(", ")),
                )
            })?),
        };
        let connection = match p.connection.as_str() {
            "flat" => ConnectionSpec::Flat { rank: p.rank },
            "abelian_wave" => ConnectionSpec::AbelianWave {
                mode: p.connection_mode,
                a: p.connection_a,
                b: p.connection_b,
            },
            "swirl" => ConnectionSpec::Swirl {
                mode: p.connection_mode,
                a: p.connection_a,
                b: p.connection_b,
                omega: p.connection_omega,
            },
            other => {
                return Err(invalid(
                    "params.connection",
                    format!("unknown connection `{other}`"),
                ))
            }
        };
        let target = match p.target.as_str() {
            "sphere" => TargetSpec::Sphere,
            "flat" => TargetSpec::Flat,
            other => {
                return Err(invalid(
                    "params.target",
                    format!("unknown target `{other}`"),
                ))
            }
        };
        let initial = self.initial.resolve()?;
        let monitors = if self.monitors.names.iter().any(|n| n == "all") {
            model.monitors()
        } else {
            let mut out = Vec::new();
            for name in &self.monitors.names {
                if !model.supports(name) {
                    return Err(invalid(
                        "monitors.names",
                        format!("`{name}` does not apply to model {}", model.name()),
                    ));
                }
                out.push(monitors::lookup(name).expect("validated at parse time"));
            }
            out
        };
        let scenario = Scenario {
            model,
            length: self.grid.length,
            cells: self.grid.cells,
            t_final: self.time.t_final,
            output_every: self.time.output_every,
            lambda: p.lambda,
            kappa: p.kappa,
            potential,
            connection,
            target,
            q: p.q,
            initial,
            perturbation: self.initial.perturbation.unwrap_or(1e-6),
            monitors,
            refinement_levels: self.refinement.levels,
        };
        scenario
            .validate()
            .map_err(|e| invalid("scenario", e.to_string()))?;
        Ok(scenario)
    }
}

/// Collects required keys and rejects keys the preset does not use.
struct Keys<'a> {
    section: &'a InitialSection,
    used: Vec<&'static str>,
}

impl<'a> Keys<'a> {
    fn req<T: Copy>(&mut self, key: &'static str, v: Option<T>) -> Result<T, ConfigError> {
        self.used.push(key);
        v.ok_or_else(|| {
            invalid(
                &format!("initial.{key}"),
                format!("required by preset `{}`", self.section.preset),
            )
        })
    }

    fn opt<T: Copy>(&mut self, key: &'static str, v: Option<T>, default: T) -> T {
        self.used.push(key);
        v.unwrap_or(default)
    }

    fn finish(self) -> Result<(), ConfigError> {
        let s = self.section;
        let present = [
            ("seed", s.seed.is_some()),
            ("modes", s.modes.is_some()),
            ("amplitude", s.amplitude.is_some()),
            ("center_u", s.center_u.is_some()),
            ("center_v", s.center_v.is_some()),
            ("width", s.width.is_some()),
            ("mode", s.mode.is_some()),
            ("branch", s.branch.is_some()),
            ("a", s.a.is_some()),
            ("b", s.b.is_some()),
            ("chi", s.chi.is_some()),
            ("map_amplitude", s.map_amplitude.is_some()),
            ("velocity_amplitude", s.velocity_amplitude.is_some()),
            ("spinor_amplitude", s.spinor_amplitude.is_some()),
        ];
        for (key, set) in present {
            if set && !self.used.contains(&key) {
                return Err(invalid(
                    &format!("initial.{key}"),
                    format!("not used by preset `{}`", s.preset),
                ));
            }
        }
        Ok(())
    }
}

impl InitialSection {
    fn resolve(&self) -> Result<InitialData, ConfigError> {
        let mut k = Keys {
            section: self,
            used: Vec::new(),
        };
        let data = match self.preset.as_str() {
            "random_spinor" => InitialData::RandomSpinor {
                seed: k.req("seed", self.seed)?,
                modes: k.opt("modes", self.modes, 4),
                amplitude: k.opt("amplitude", self.amplitude, 0.5),
            },
            "chiral_pulse" => InitialData::ChiralPulse {
                center_u: k.req("center_u", self.center_u)?,
                center_v: k.req("center_v", self.center_v)?,
                width: k.req("width", self.width)?,
                amplitude: k.opt("amplitude", self.amplitude, 1.0),
            },
            "plane_wave" => InitialData::PlaneWave {
                mode: k.req("mode", self.mode)?,
                branch: k.opt("branch", self.branch, 1),
            },
            "geodesic" => InitialData::Geodesic {
                a: k.req("a", self.a)?,
                b: k.req("b", self.b)?,
            },
            "uncoupled" => {
                let c = k.req("chi", self.chi)?;
                InitialData::Uncoupled {
                    a: k.req("a", self.a)?,
                    b: k.req("b", self.b)?,
                    chi: Spinor::new(Complex64::new(c[0], c[1]), Complex64::new(c[2], c[3])),
                }
            }
            "random_map" => InitialData::RandomMap {
                seed: k.req("seed", self.seed)?,
                modes: k.opt("modes", self.modes, 3),
                map_amplitude: k.opt("map_amplitude", self.map_amplitude, 0.5),
                velocity_amplitude: k.opt("velocity_amplitude", self.velocity_amplitude, 0.5),
                spinor_amplitude: k.opt("spinor_amplitude", self.spinor_amplitude, 0.3),
            },
            other => {
                return Err(invalid(
                    "initial.preset",
                    format!("unknown initial preset `{other}`"),
                ))
            }
        };
        if let InitialData::PlaneWave { branch, .. } = data {
            if branch != 1 && branch != -1 {
                return Err(invalid("initial.branch", "must be 1 or -1"));
            }
        }
        k.finish()?;
        Ok(data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
model = "free"
[grid]
L = 6.0
N = 32
[time]
T = 1.5
output_every = 2
[initial]
preset = "chiral_pulse"
center_u = 2.0
center_v = 4.0
width = 0.5
[monitors]
names = ["all"]
[output]
dir = "x"
"#;

    #[test]
    fn minimal_config_resolves() {
        let s = parse(MINIMAL, &[]).unwrap().to_scenario().unwrap();
        assert_eq!(s.cells, 32);
        assert_eq!(s.monitors.len(), 6);
        assert_eq!(s.refinement_levels, 1);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = MINIMAL.replace("[time]", "[params]\nlamda = 1.0\n[time]");
        let err = parse(&text, &[]).unwrap_err().to_string();
        assert!(err.contains("lamda"), "{err}");
    }

    #[test]
    fn odd_grid_is_rejected() {
        let err = parse(MINIMAL, &["grid.N=33".into()])
            .unwrap()
            .to_scenario()
            .unwrap_err();
        assert!(err.to_string().contains("grid.N"));
    }

    #[test]
    fn unknown_monitor_is_rejected_at_parse_time() {
        let err = parse(MINIMAL, &[r#"monitors.names=["E7"]"#.into()]).unwrap_err();
        assert!(err.to_string().contains("E7"));
    }

    #[test]
    fn unused_initial_key_is_rejected() {
        let err = parse(MINIMAL, &["initial.seed=3".into()])
            .unwrap()
            .to_scenario()
            .unwrap_err();
        assert!(err.to_string().contains("initial.seed"));
    }

    #[test]
    fn missing_required_key_is_named() {
        let text = MINIMAL.replace("width = 0.5\n", "");
        let err = parse(&text, &[]).unwrap().to_scenario().unwrap_err();
        assert!(err.to_string().contains("initial.width"));
    }

    #[test]
    fn overrides_create_sections() {
        let c = parse(
            MINIMAL,
            &["refinement.levels=3".into(), "params.target=flat".into()],
        )
        .unwrap();
        assert_eq!(c.refinement.levels, 3);
        assert_eq!(c.params.target, "flat");
    }
}
