//! Run configuration: JSON with nested sections, plus `key=value`
//! overrides on dotted paths.

use std::fmt;
use std::path::{Path, PathBuf};

use fracmax::convergence::SequenceSpec;
use fracmax::{ProfileSpec, VariantKind};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Maximal,
    DerivativeCheck,
    Inequalities,
    Converge,
    Tail,
    Uniform,
    #[serde(rename = "probe-1d")]
    Probe1d,
    OracleCompare,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Maximal => "maximal",
            Experiment::DerivativeCheck => "derivative-check",
            Experiment::Inequalities => "inequalities",
            Experiment::Converge => "converge",
            Experiment::Tail => "tail",
            Experiment::Uniform => "uniform",
            Experiment::Probe1d => "probe-1d",
            Experiment::OracleCompare => "oracle-compare",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub h: f64,
    pub t_max: f64,
    /// `[start, end]` of the evaluation grid; defaults to `[0, t_max]`.
    #[serde(default)]
    pub eval: Option<[f64; 2]>,
    /// Evaluation step; defaults to `h`.
    #[serde(default)]
    pub eval_step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub luiro_median: f64,
    pub kinnunen_bound: f64,
    pub drift: f64,
    pub majorant: f64,
    pub convergence_final: f64,
    pub oracle_gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            luiro_median: 0.05,
            kinnunen_bound: 1.05,
            drift: 0.10,
            majorant: 0.01,
            convergence_final: 0.05,
            oracle_gap: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailConfig {
    pub k_radii: Vec<f64>,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    #[serde(default = "default_probe_count")]
    pub count: usize,
    #[serde(default = "default_probe_range")]
    pub range: [f64; 2],
    /// Line spacing; defaults to `grid.h`.
    #[serde(default)]
    pub h: Option<f64>,
}

fn default_probe_count() -> usize {
    20
}

fn default_probe_range() -> [f64; 2] {
    [-3.0, 3.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub h2: f64,
    pub half_width: f64,
    #[serde(default = "default_stride")]
    pub stride: usize,
    /// Radii are `h2/2` and `k·h2` up to this value.
    pub r_max: f64,
}

fn default_stride() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub experiment: Option<Experiment>,
    pub d: usize,
    pub beta: f64,
    pub grid: GridConfig,
    pub function: ProfileSpec,
    #[serde(default = "default_variant")]
    pub variant: VariantKind,
    #[serde(default)]
    pub sequence: Option<SequenceSpec>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub tail: Option<TailConfig>,
    #[serde(default)]
    pub probe: Option<ProbeConfig>,
    #[serde(default)]
    pub oracle: Option<OracleConfig>,
}

fn default_variant() -> VariantKind {
    VariantKind::Noncentered
}

/// A configuration problem located in its source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub origin: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.origin, line, self.message),
            None => write!(f, "{}: {}", self.origin, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Raw configuration text with its origin, kept for locating fields.
pub struct ConfigSource {
    origin: String,
    text: String,
    overridden: Vec<String>,
}

impl ConfigSource {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            origin: path.display().to_string(),
            line: None,
            message: format!("cannot read config: {e}"),
        })?;
        Ok(Self::from_text(path.display().to_string(), text))
    }

    pub fn from_text(origin: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            origin: origin.into(),
            text: text.into(),
            overridden: Vec::new(),
        }
    }

    fn error(&self, key: Option<&str>, message: String) -> ConfigError {
        if let Some(key) = key {
            if self.overridden.iter().any(|o| o == key || key.starts_with(&format!("{o}."))) {
                return ConfigError {
                    origin: format!("--override {key}"),
                    line: None,
                    message,
                };
            }
        }
        ConfigError {
            origin: self.origin.clone(),
            line: key.and_then(|k| self.locate(k)),
            message,
        }
    }

    /// Line of the last path segment's first `"key":` occurrence.
    fn locate(&self, key: &str) -> Option<usize> {
        let leaf = key.rsplit('.').next()?;
        let needle = format!("\"{leaf}\"");
        self.text
            .lines()
            .position(|l| l.contains(&needle))
            .map(|i| i + 1)
    }

    /// Parse, apply overrides, then deserialize and validate.
    pub fn resolve(self, overrides: &[String]) -> Result<RunConfig, ConfigError> {
        self.resolve_inner(overrides, None)
    }

    /// As [`resolve`](Self::resolve), for the experiment named on the
    /// command line; a different `experiment` in the config is an error.
    pub fn resolve_for(self, experiment: Experiment, overrides: &[String]) -> Result<RunConfig, ConfigError> {
        self.resolve_inner(overrides, Some(experiment))
    }

    fn resolve_inner(mut self, overrides: &[String], requested: Option<Experiment>) -> Result<RunConfig, ConfigError> {
        let mut value: Value = if self.text.trim().is_empty() {
            Value::Object(Default::default())
        } else {
            serde_json::from_str(&self.text).map_err(|e| ConfigError {
                origin: self.origin.clone(),
                line: Some(e.line()),
                message: format!("invalid JSON: {e}"),
            })?
        };
        for item in overrides {
            let (key, raw) = item.split_once('=').ok_or_else(|| ConfigError {
                origin: format!("--override {item}"),
                line: None,
                message: "expected key=value".into(),
            })?;
            let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut value, key, parsed).map_err(|message| ConfigError {
                origin: format!("--override {key}"),
                line: None,
                message,
            })?;
            self.overridden.push(key.to_string());
        }
        let mut config: RunConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            let message = e.inner().to_string();
            let key = field_in_message(&message).map(|f| if path == "." { f } else { format!("{path}.{f}") });
            let key = key.unwrap_or(path);
            self.error(Some(&key), format!("{key}: {message}"))
        })?;
        match (config.experiment, requested) {
            (Some(have), Some(want)) if have != want => {
                return Err(self.error(
                    Some("experiment"),
                    format!("config is for experiment {have}, but {want} was requested"),
                ));
            }
            (None, Some(want)) => config.experiment = Some(want),
            _ => {}
        }
        self.validate(&config)?;
        Ok(config)
    }

    fn validate(&self, c: &RunConfig) -> Result<(), ConfigError> {
        let fail = |key: &str, msg: String| Err(self.error(Some(key), msg));
        if c.d == 0 {
            return fail("d", "d must be at least 1".into());
        }
        if !(c.beta >= 0.0) {
            return fail("beta", format!("beta = {} violates the bound beta >= 0", c.beta));
        }
        if !(c.beta < c.d as f64) {
            return fail("beta", format!("beta = {} violates the bound beta < d = {}", c.beta, c.d));
        }
        if !(c.grid.h > 0.0 && c.grid.h.is_finite()) {
            return fail("grid.h", format!("h = {} must be positive", c.grid.h));
        }
        if !(c.grid.t_max > c.grid.h) {
            return fail("grid.t_max", format!("t_max = {} must exceed h = {}", c.grid.t_max, c.grid.h));
        }
        if let Some([a, b]) = c.grid.eval {
            if !(a >= 0.0 && b > a) {
                return fail("grid.eval", format!("eval range [{a}, {b}] must satisfy 0 <= start < end"));
            }
        }
        if let Some(step) = c.grid.eval_step {
            if !(step > 0.0) {
                return fail("grid.eval_step", format!("eval_step = {step} must be positive"));
            }
        }
        let randomized = matches!(c.function, ProfileSpec::RandomPl { .. })
            || matches!(
                &c.sequence,
                Some(SequenceSpec {
                    kind: fracmax::convergence::SequenceKind::NodeJitter { .. },
                    ..
                })
            )
            || matches!(
                &c.sequence,
                Some(SequenceSpec {
                    kind: fracmax::convergence::SequenceKind::Amplitude { g: ProfileSpec::RandomPl { .. } },
                    ..
                })
            );
        if randomized && c.seed.is_none() {
            return fail("function", "a randomized spec needs an explicit top-level seed".into());
        }
        let Some(exp) = c.experiment else {
            return fail("experiment", "no experiment given".into());
        };
        match exp {
            Experiment::Converge | Experiment::Tail | Experiment::Uniform if c.sequence.is_none() => {
                fail("sequence", format!("experiment {exp} needs a sequence section"))
            }
            Experiment::Tail if c.tail.is_none() => fail("tail", "experiment tail needs a tail section".into()),
            Experiment::Probe1d if !(c.beta > 0.0 && c.beta < 1.0) => {
                fail("beta", format!("probe-1d needs 0 < beta < 1, got {}", c.beta))
            }
            Experiment::Probe1d if c.seed.is_none() => {
                fail("seed", "probe-1d draws a random corpus and needs a seed".into())
            }
            Experiment::OracleCompare if c.d != 2 => fail("d", format!("oracle-compare needs d = 2, got {}", c.d)),
            Experiment::OracleCompare if c.oracle.is_none() => {
                fail("oracle", "experiment oracle-compare needs an oracle section".into())
            }
            _ => Ok(()),
        }
    }
}

/// Pulls a field name out of a serde message such as
/// "missing field `beta`" or "unknown field `bta`".
fn field_in_message(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let end = start + message[start..].find('`')?;
    Some(message[start..end].to_string())
}

fn set_path(root: &mut Value, key: &str, value: Value) -> Result<(), String> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(format!("empty segment in key {key}"));
        }
        let obj = match cur {
            Value::Object(m) => m,
            _ => return Err(format!("{} is not a section", parts[..i].join("."))),
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

impl RunConfig {
    pub fn eval_range(&self) -> [f64; 2] {
        self.grid.eval.unwrap_or([0.0, self.grid.t_max])
    }

    pub fn eval_step(&self) -> f64 {
        self.grid.eval_step.unwrap_or(self.grid.h)
    }

    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
  "experiment": "maximal",
  "d": 2,
  "beta": 0.5,
  "grid": { "h": 0.05, "t_max": 2.0 },
  "function": "tent(1)"
}"#;

    #[test]
    fn parses_and_defaults() {
        let c = ConfigSource::from_text("c.json", BASE).resolve(&[]).unwrap();
        assert_eq!(c.variant, VariantKind::Noncentered);
        assert_eq!(c.eval_range(), [0.0, 2.0]);
        assert_eq!(c.tolerances, Tolerances::default());
    }

    #[test]
    fn beta_at_dimension_names_the_bound() {
        let text = BASE.replace("\"beta\": 0.5", "\"beta\": 2");
        let err = ConfigSource::from_text("c.json", text).resolve(&[]).unwrap_err();
        assert_eq!(err.line, Some(4));
        assert!(err.message.contains("beta < d"), "{err}");
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let c = ConfigSource::from_text("c.json", BASE)
            .resolve(&["grid.h=0.1".into(), "variant=centered".into()])
            .unwrap();
        assert_eq!(c.grid.h, 0.1);
        assert_eq!(c.variant, VariantKind::Centered);
        let err = ConfigSource::from_text("c.json", BASE)
            .resolve(&["beta=7".into()])
            .unwrap_err();
        assert_eq!(err.origin, "--override beta");
    }

    #[test]
    fn subcommand_must_match_config() {
        let c = ConfigSource::from_text("c.json", BASE).resolve_for(Experiment::Maximal, &[]).unwrap();
        assert_eq!(c.experiment, Some(Experiment::Maximal));
        let err = ConfigSource::from_text("c.json", BASE)
            .resolve_for(Experiment::Converge, &[])
            .unwrap_err();
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn syntax_errors_carry_the_line() {
        let text = BASE.replace("\"d\": 2,", "\"d\": 2,,");
        let err = ConfigSource::from_text("c.json", text).resolve(&[]).unwrap_err();
        assert_eq!(err.line, Some(3));
    }

    #[test]
    fn type_errors_name_the_field() {
        let text = BASE.replace("\"h\": 0.05", "\"h\": \"fine\"");
        let err = ConfigSource::from_text("c.json", text).resolve(&[]).unwrap_err();
        assert_eq!(err.line, Some(5));
        assert!(err.message.starts_with("grid.h"), "{err}");
    }

    #[test]
    fn random_specs_need_a_seed() {
        let text = BASE.replace("tent(1)", "random_pl(3, 5)");
        assert!(ConfigSource::from_text("c.json", text).resolve(&[]).is_err());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = BASE.replace("\"d\": 2,", "\"d\": 2,\n  \"bta\": 1,");
        let err = ConfigSource::from_text("c.json", text).resolve(&[]).unwrap_err();
        assert_eq!(err.line, Some(4));
    }
}
