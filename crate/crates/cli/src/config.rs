//! Scenario files and command-line overrides.
//!
//! A scenario is a TOML file with one section per model component —
//! `[source]`, `[channel]`, `[detector]`, `[error_correction]`, `[eve]`,
//! `[security]` — plus optional `[sweep]` and `[optimizer]` sections
//! consumed by the corresponding subcommands. Keys are flat and dotted
//! when spoken about (`source.mu`, `detector.r_d`), matching the sweep
//! axis names. Unknown keys are rejected rather than ignored, and every
//! value is checked against the engine's domain invariants before any
//! computation runs.
//!
//! Any key can also be overridden on the command line with
//! `--section.key=value`; flags win over the file.

use std::path::Path;

use qkdbudget_core::budget::{
    ChannelModel, DetectorModel, ErrorCorrectionModel, EveCapability, EveClass, Medium,
    SourceModel,
};
use qkdbudget_core::optimizer::ParamAxis;
use qkdbudget_core::{LinkParameters64, SecurityParameters64, SweepSpec64};
use serde::Deserialize;

/// What went wrong, sorted by process exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Malformed or invalid configuration (exit 2).
    Config(String),
    /// Unreadable input or unwritable output (exit 4).
    Io(String),
}

impl CliError {
    /// Stable exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) | CliError::Io(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for CliError {}

/// Maps an engine error to a configuration error: every error the
/// engine can raise from CLI-supplied inputs is a bad parameter.
pub fn config_err(e: qkdbudget_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// One `--section.key=value` command-line override.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyOverride {
    /// Dotted key path, e.g. `source.mu`.
    pub key: String,
    /// Raw value text; parsed as a TOML value, or taken as a string.
    pub value: String,
}

impl KeyOverride {
    /// Recognizes `--a.b=c` and splits it; the dotted key is what
    /// separates an override from an ordinary flag, so plain flags like
    /// `--json` or `--target=mu` pass through untouched.
    pub fn parse(arg: &str) -> Option<KeyOverride> {
        let body = arg.strip_prefix("--")?;
        let (key, value) = body.split_once('=')?;
        let well_formed = key.contains('.')
            && key.split('.').all(|segment| {
                !segment.is_empty()
                    && segment
                        .chars()
                        .all(|c| c.is_ascii_alphanumeric() || c == '_')
            });
        if !well_formed {
            return None;
        }
        Some(KeyOverride {
            key: key.to_string(),
            value: value.to_string(),
        })
    }

    /// Merges this override into the parsed configuration table,
    /// creating intermediate tables as needed.
    fn apply(&self, table: &mut toml::Table) -> Result<(), CliError> {
        let mut segments: Vec<&str> = self.key.split('.').collect();
        let last = segments.pop().expect("a dotted key has segments");
        let mut node = table;
        for segment in segments {
            node = node
                .entry(segment)
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| {
                    CliError::Config(format!(
                        "--{}: `{segment}` is not a table in the configuration",
                        self.key
                    ))
                })?;
        }
        node.insert(last.to_string(), parse_value(&self.value));
        Ok(())
    }
}

/// Parses raw override text as a TOML value (numbers, booleans, arrays,
/// quoted strings); bare words fall back to strings so
/// `--channel.medium=fiber` works without shell-quoted quotes.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// `[source]` — the weak-coherent pulse source.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    /// Mean photon number per pulse (dimensionless).
    pub mu: f64,
    /// Pulse period in seconds.
    pub tau: f64,
}

/// `[channel]` — the quantum channel.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    /// Transmission probability, `0 < alpha <= 1`.
    pub alpha: f64,
    /// Intrinsic channel error rate.
    pub r_c: f64,
    /// Medium tag: `fiber` or `free_space`.
    #[serde(default = "default_medium")]
    pub medium: Medium,
}

fn default_medium() -> Medium {
    Medium::Fiber
}

/// `[detector]` — the receiver detector package.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    /// Quantum efficiency, `0 < eta <= 1`.
    pub eta: f64,
    /// Dark-count probability per detection slot.
    pub r_d: f64,
}

/// `[error_correction]` — reconciliation performance.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorCorrectionSection {
    /// Leakage multiplier over the Shannon limit, `x >= 1`.
    pub x: f64,
}

/// `[eve]` — interceptor capability. The whole section is optional and
/// defaults to a technology-limited interceptor.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EveSection {
    /// Capability class: `technology_limited`, `lossless_replacement`,
    /// or `entanglement_assisted`.
    #[serde(default = "default_eve_class")]
    pub class: EveClass,
    /// Explicit per-photon delivery yield in `[0, 1]`; wins over `class`.
    #[serde(default)]
    pub y_override: Option<f64>,
}

fn default_eve_class() -> EveClass {
    EveClass::TechnologyLimited
}

impl Default for EveSection {
    fn default() -> Self {
        EveSection {
            class: default_eve_class(),
            y_override: None,
        }
    }
}

/// `[security]` — per-block security accounting.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecuritySection {
    /// Block length in transmitted pulses.
    pub m: f64,
    /// Failure probability of the single-photon confidence margin.
    pub epsilon: f64,
    /// Privacy-amplification compression margin in bits.
    pub g_pa: f64,
    /// Authentication security parameter in bits.
    pub g_auth: f64,
    /// Error-correction authentication parameter in bits.
    pub g_ec: f64,
    /// Verification authentication parameter in bits.
    pub g_tilde_ec: f64,
}

/// `[sweep]` — grid specification for the `sweep` subcommand. Give the
/// grid either explicitly (`grid = [...]`) or generated (`lo`, `hi`,
/// `points`, optionally `log = true`), but not both.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Dotted parameter name to sweep, e.g. `channel.alpha`.
    pub axis: String,
    /// Explicit grid values, in output order.
    #[serde(default)]
    pub grid: Option<Vec<f64>>,
    /// Generated-grid first value.
    #[serde(default)]
    pub lo: Option<f64>,
    /// Generated-grid last value.
    #[serde(default)]
    pub hi: Option<f64>,
    /// Generated-grid point count.
    #[serde(default)]
    pub points: Option<u32>,
    /// Space the generated grid logarithmically.
    #[serde(default)]
    pub log: bool,
    /// Re-optimize the pulse intensity at every grid point.
    #[serde(default)]
    pub optimize_mu_per_point: bool,
}

impl SweepSection {
    /// Resolves the grid values, whichever way they were given.
    fn resolve_grid(&self) -> Result<Vec<f64>, CliError> {
        match (&self.grid, self.lo, self.hi, self.points) {
            (Some(grid), None, None, None) => {
                if self.log {
                    return Err(CliError::Config(
                        "sweep.log applies only to generated grids, not explicit sweep.grid"
                            .into(),
                    ));
                }
                if grid.is_empty() {
                    return Err(CliError::Config(
                        "sweep.grid must hold at least one value".into(),
                    ));
                }
                Ok(grid.clone())
            }
            (None, Some(lo), Some(hi), Some(points)) => {
                if points == 0 {
                    return Err(CliError::Config("sweep.points must be at least 1".into()));
                }
                if self.log && !(lo > 0.0 && hi > 0.0) {
                    return Err(CliError::Config(
                        "a logarithmic sweep needs positive lo and hi".into(),
                    ));
                }
                if points == 1 {
                    return Ok(vec![lo]);
                }
                let steps = f64::from(points - 1);
                Ok((0..points)
                    .map(|i| {
                        let u = f64::from(i) / steps;
                        if self.log {
                            (lo.ln() + (hi.ln() - lo.ln()) * u).exp()
                        } else {
                            lo + (hi - lo) * u
                        }
                    })
                    .collect())
            }
            _ => Err(CliError::Config(
                "give [sweep] either grid = [...] or all of lo, hi, points".into(),
            )),
        }
    }
}

/// `[optimizer]` — intensity search interval for `optimize --target mu`
/// and for per-point sweep optimization.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    /// Lower intensity bound.
    #[serde(default = "default_mu_lo")]
    pub mu_lo: f64,
    /// Upper intensity bound.
    #[serde(default = "default_mu_hi")]
    pub mu_hi: f64,
}

fn default_mu_lo() -> f64 {
    1e-4
}

fn default_mu_hi() -> f64 {
    10.0
}

impl Default for OptimizerSection {
    fn default() -> Self {
        OptimizerSection {
            mu_lo: default_mu_lo(),
            mu_hi: default_mu_hi(),
        }
    }
}

/// Complete scenario: link model, security accounting, and the optional
/// subcommand sections.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Pulse source.
    pub source: SourceSection,
    /// Quantum channel.
    pub channel: ChannelSection,
    /// Receiver detectors.
    pub detector: DetectorSection,
    /// Reconciliation performance.
    pub error_correction: ErrorCorrectionSection,
    /// Interceptor capability (optional).
    #[serde(default)]
    pub eve: EveSection,
    /// Security accounting.
    pub security: SecuritySection,
    /// Sweep specification (only the `sweep` subcommand reads it).
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    /// Intensity search bounds (optional).
    #[serde(default)]
    pub optimizer: Option<OptimizerSection>,
}

impl ScenarioConfig {
    /// Reads and parses `path`, then merges the command-line overrides
    /// on top. Unreadable files are I/O errors; syntax errors carry the
    /// parser's line-referenced message; unknown keys are rejected.
    pub fn load(path: &Path, overrides: &[KeyOverride]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        ScenarioConfig::from_text(&text, overrides)
            .map_err(|e| match e {
                CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
                io => io,
            })
    }

    /// Parses configuration text and merges overrides; split out of
    /// [`ScenarioConfig::load`] so it can be exercised without files.
    pub fn from_text(text: &str, overrides: &[KeyOverride]) -> Result<Self, CliError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        for o in overrides {
            o.apply(&mut table)?;
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
    }

    /// Builds the validated link model.
    pub fn link(&self) -> Result<LinkParameters64, CliError> {
        let link = LinkParameters64 {
            source: SourceModel {
                mu: self.source.mu,
                tau: self.source.tau,
            },
            channel: ChannelModel {
                alpha: self.channel.alpha,
                r_c: self.channel.r_c,
                medium: self.channel.medium,
            },
            detector: DetectorModel {
                eta: self.detector.eta,
                r_d: self.detector.r_d,
            },
            error_correction: ErrorCorrectionModel {
                x: self.error_correction.x,
            },
            eve: EveCapability {
                class: self.eve.class,
                y_override: self.eve.y_override,
            },
        };
        link.validate().map_err(config_err)?;
        Ok(link)
    }

    /// Builds the validated security parameters.
    pub fn security(&self) -> Result<SecurityParameters64, CliError> {
        SecurityParameters64::new(
            self.security.m,
            self.security.epsilon,
            self.security.g_pa,
            self.security.g_auth,
            self.security.g_ec,
            self.security.g_tilde_ec,
        )
        .map_err(config_err)
    }

    /// Intensity search bounds, from `[optimizer]` or the defaults.
    pub fn mu_bounds(&self) -> (f64, f64) {
        let o = self.optimizer.unwrap_or_default();
        (o.mu_lo, o.mu_hi)
    }

    /// Builds the sweep specification; requires a `[sweep]` section.
    pub fn sweep_spec(&self) -> Result<SweepSpec64, CliError> {
        let section = self.sweep.as_ref().ok_or_else(|| {
            CliError::Config("the sweep subcommand needs a [sweep] section".into())
        })?;
        let axis: ParamAxis = section.axis.parse().map_err(config_err)?;
        Ok(SweepSpec64 {
            axis,
            grid: section.resolve_grid()?,
            optimize_mu_per_point: section.optimize_mu_per_point,
            mu_bounds: Some(self.mu_bounds()),
        })
    }
}
