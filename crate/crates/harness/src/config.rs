//! Scenario files: TOML with fixed sections. Every key is optional except
//! where noted; unknown sections and keys are rejected with their line.

use std::fmt;
use std::path::Path;

use serde::Deserialize;

/// A configuration problem tied to a source line (1-based) and key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, &self.field) {
            (Some(l), Some(k)) => write!(f, "line {l}, field `{k}`: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, Some(k)) => write!(f, "field `{k}`: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Smd,
    FastSmd,
    JlOgd,
    SchattenSmd,
    Centralized,
    Truncation,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Smd => "smd",
            Algorithm::FastSmd => "fast_smd",
            Algorithm::JlOgd => "jl_ogd",
            Algorithm::SchattenSmd => "schatten_smd",
            Algorithm::Centralized => "centralized",
            Algorithm::Truncation => "truncation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    L1lq,
    L2l2,
    SparseRegression,
    Matrix,
    HideAndSeek,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputChoice {
    Random,
    Averaged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireChoice {
    Rank,
    List,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub algorithm: Algorithm,
    #[serde(default = "one")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    pub output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSection {
    pub kind: InstanceKind,
    pub d: usize,
    pub q: Option<f64>,
    pub b1: Option<f64>,
    pub r_q: Option<f64>,
    pub link: Option<String>,
    pub noise: Option<f64>,
    pub active_dims: Option<usize>,
    /// Support size `k` of a sparse-regression optimum.
    pub sparsity: Option<usize>,
    pub gamma: Option<f64>,
    pub block: Option<usize>,
    pub rank: Option<usize>,
    pub rho: Option<f64>,
    pub planted: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    /// Total sample size `N`.
    pub n: usize,
    #[serde(default = "one_usize")]
    pub machines: usize,
    /// Dual exponent; defaults to the instance's.
    pub q: Option<f64>,
    pub eta: Option<f64>,
    /// Gradient `ℓq` bound; defaults to the link's Lipschitz constant times
    /// the feature bound.
    pub grad_bound: Option<f64>,
    pub s: Option<u64>,
    pub s0: Option<u64>,
    #[serde(default = "one_f64")]
    pub kappa_s: f64,
    #[serde(default = "one_f64")]
    pub kappa_s0: f64,
    #[serde(default)]
    pub linear_model: bool,
    /// Ship dense iterates instead of Maurey messages.
    #[serde(default)]
    pub dense: bool,
    pub output: Option<OutputChoice>,
    pub wire: Option<WireChoice>,
    /// Use the small-loss step size and `s₀` with this `L*` estimate.
    pub l_star: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FastSection {
    #[serde(default = "one_f64")]
    pub c: f64,
    /// RSC constant; defaults to `γ/(4k)` on sparse-regression instances.
    pub gamma_q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JlSection {
    pub k: Option<usize>,
    #[serde(default)]
    pub identity: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSection {
    #[serde(default = "one_f64")]
    pub kappa: f64,
}

/// Grid axes; an absent axis keeps the `[protocol]` value.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub machines: Vec<usize>,
    #[serde(default)]
    pub q: Vec<f64>,
    #[serde(default)]
    pub s: Vec<u64>,
    #[serde(default)]
    pub s0: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HideAndSeekSection {
    pub rho: Vec<f64>,
    /// Per-machine bit budgets; 0 means unlimited.
    pub budgets: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    pub instance: InstanceSection,
    pub protocol: ProtocolSection,
    pub fast: Option<FastSection>,
    pub jl: Option<JlSection>,
    pub truncation: Option<TruncationSection>,
    pub sweep: Option<SweepSection>,
    pub hide_and_seek: Option<HideAndSeekSection>,
}

fn one() -> u64 {
    1
}
fn one_usize() -> usize {
    1
}
fn one_f64() -> f64 {
    1.0
}

/// 1-based line of byte offset `at`.
fn line_of(src: &str, at: usize) -> usize {
    src[..at.min(src.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Key assigned on a line, if the line is an assignment.
fn key_on_line(src: &str, line: usize) -> Option<String> {
    let text = src.lines().nth(line - 1)?;
    let (key, _) = text.split_once('=')?;
    let key = key.trim();
    (!key.is_empty() && !key.starts_with('#')).then(|| key.to_string())
}

/// Line of `key = …` inside `[section]`.
pub fn locate(src: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in src.lines().enumerate() {
        let t = raw.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = name.trim().to_string();
        } else if current == section {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

impl ScenarioConfig {
    pub fn parse(src: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(src).map_err(|e| {
            let line = e.span().map(|s| line_of(src, s.start));
            ConfigError {
                line,
                field: line.and_then(|l| key_on_line(src, l)),
                message: e.message().to_string(),
            }
        })?;
        cfg.validate(src)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            field: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&src)
    }

    fn validate(&self, src: &str) -> Result<(), ConfigError> {
        let fail = |section: &str, key: &str, message: String| ConfigError {
            line: locate(src, section, key),
            field: Some(format!("{section}.{key}")),
            message,
        };
        if self.scenario.trials == 0 {
            return Err(fail("scenario", "trials", "must be at least 1".into()));
        }
        let matrix = self.instance.kind == InstanceKind::Matrix;
        let schatten = self.scenario.algorithm == Algorithm::SchattenSmd;
        if matrix != schatten {
            return Err(fail(
                "scenario",
                "algorithm",
                format!(
                    "{} is incompatible with a {} instance",
                    self.scenario.algorithm.name(),
                    if matrix { "matrix" } else { "vector" }
                ),
            ));
        }
        if self.instance.d == 0 {
            return Err(fail("instance", "d", "must be positive".into()));
        }
        if let Some(link) = &self.instance.link {
            if link.parse::<sublinear::losses::LinkFunction>().is_err() {
                return Err(fail("instance", "link", format!("unknown link `{link}`")));
            }
        }
        let p = &self.protocol;
        if p.n == 0 {
            return Err(fail("protocol", "n", "must be positive".into()));
        }
        if p.machines == 0 || p.machines > p.n || p.n % p.machines != 0 {
            return Err(fail("protocol", "machines", format!("must divide n = {} and be at least 1", p.n)));
        }
        if let Some(q) = p.q.or(self.instance.q) {
            if !(q >= 2.0) || !q.is_finite() {
                return Err(fail("protocol", "q", format!("must be finite and at least 2, got {q}")));
            }
        }
        if p.s == Some(0) || p.s0 == Some(0) {
            let key = if p.s == Some(0) { "s" } else { "s0" };
            return Err(fail("protocol", key, "sample counts must be positive".into()));
        }
        if let Some(eta) = p.eta {
            if !(eta > 0.0) || !eta.is_finite() {
                return Err(fail("protocol", "eta", format!("must be positive, got {eta}")));
            }
        }
        if let Some(h) = &self.hide_and_seek {
            if h.rho.is_empty() || h.budgets.is_empty() {
                return Err(fail("hide_and_seek", "rho", "rho and budgets must be non-empty".into()));
            }
            if let Some(&r) = h.rho.iter().find(|r| !(0.0..=0.5).contains(*r)) {
                return Err(fail("hide_and_seek", "rho", format!("{r} lies outside [0, 1/2]")));
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.s.contains(&0) || sw.s0.contains(&0) {
                return Err(fail("sweep", if sw.s.contains(&0) { "s" } else { "s0" }, "must be positive".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "\
[scenario]
algorithm = \"smd\"
trials = 3
seed = 9

[instance]
kind = \"l1lq\"
d = 100

[protocol]
n = 64
machines = 4
";

    #[test]
    fn parses_minimal_file() {
        let cfg = ScenarioConfig::parse(BASE).unwrap();
        assert_eq!(cfg.scenario.algorithm, Algorithm::Smd);
        assert_eq!(cfg.scenario.trials, 3);
        assert_eq!(cfg.protocol.machines, 4);
        assert_eq!(cfg.protocol.kappa_s, 1.0);
        assert!(cfg.sweep.is_none());
    }

    #[test]
    fn unknown_key_reports_line_and_field() {
        let src = BASE.replace("machines = 4", "machines = 4\nbogus = 1");
        let err = ScenarioConfig::parse(&src).unwrap_err();
        assert_eq!(err.line, Some(13));
        assert_eq!(err.field.as_deref(), Some("bogus"));
        assert!(err.message.contains("unknown field"), "{err}");
    }

    #[test]
    fn type_error_reports_line() {
        let src = BASE.replace("d = 100", "d = \"many\"");
        let err = ScenarioConfig::parse(&src).unwrap_err();
        assert_eq!(err.line, Some(8));
        assert_eq!(err.field.as_deref(), Some("d"));
    }

    #[test]
    fn semantic_errors_point_at_the_key() {
        let err = ScenarioConfig::parse(&BASE.replace("trials = 3", "trials = 0")).unwrap_err();
        assert_eq!((err.line, err.field.as_deref()), (Some(3), Some("scenario.trials")));
        let err = ScenarioConfig::parse(&BASE.replace("machines = 4", "machines = 5")).unwrap_err();
        assert_eq!((err.line, err.field.as_deref()), (Some(12), Some("protocol.machines")));
        let err = ScenarioConfig::parse(&BASE.replace("\"smd\"", "\"schatten_smd\"")).unwrap_err();
        assert_eq!(err.field.as_deref(), Some("scenario.algorithm"));
    }

    #[test]
    fn unknown_algorithm_is_rejected() {
        let err = ScenarioConfig::parse(&BASE.replace("\"smd\"", "\"sgd\"")).unwrap_err();
        assert_eq!(err.line, Some(2));
        assert!(err.message.contains("unknown variant"), "{err}");
    }
}
