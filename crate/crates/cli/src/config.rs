use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use dei_core::econometrics::{Criterion, InnovationKind, MeanForm};
use dei_core::ingest::PanelFormat;
use dei_core::transform::{TransformScope, DEFAULT_EPS_MIN};
use dei_core::GdpPolicy;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::MissingInput;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PositivityMode {
    #[default]
    Reject,
    Floor,
}

/// Everything a run needs. Every field has a default, so `{}` is a valid
/// config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub panel: PathBuf,
    pub panel_format: PanelFormat,
    /// Indicator dictionary; the bundled one when absent.
    pub dictionary: Option<PathBuf>,
    /// Subset of panel countries, in output order; all when absent.
    pub countries: Option<Vec<String>>,
    pub start_year: Option<i32>,
    pub end_year: Option<i32>,
    pub positivity: PositivityMode,
    pub floor_epsilon: f64,
    pub gdp_policy: GdpPolicy,
    pub transform_scope: TransformScope,
    pub eps_min: f64,
    pub criterion: Criterion,
    /// Innovation law of the models passed downstream. Both laws are always
    /// fitted and tabulated.
    pub innovation: InnovationKind,
    pub mean_form: MeanForm,
    pub fit_restarts: usize,
    pub scenarios: usize,
    pub seed: u64,
    /// Per-period risk-free rate.
    pub rf: f64,
    /// Per-step option rates; overrides `rf` for pricing when present.
    pub rf_curve: Option<Vec<f64>>,
    pub tail_level: f64,
    pub rachev_alpha: f64,
    pub rachev_beta: f64,
    /// The equally spaced 100-point grid on [0, 0.99] when absent.
    pub gamma_grid: Option<Vec<f64>>,
    pub long_only: bool,
    pub cvar_level: f64,
    pub paths: usize,
    pub maturities: Vec<usize>,
    /// `S₀/K` values; strikes are `S₀/M`.
    pub moneyness: Vec<f64>,
    pub lambda0: f64,
    pub antithetic: bool,
    /// Largest admissible count up to 3 when absent.
    pub factor_count: Option<usize>,
    pub factor_restarts: usize,
    pub factor_covariance: bool,
    pub varimax: bool,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            panel: PathBuf::from("fixtures/panel.csv"),
            panel_format: PanelFormat::LongCsv,
            dictionary: None,
            countries: None,
            start_year: None,
            end_year: None,
            positivity: PositivityMode::Reject,
            floor_epsilon: 1e-6,
            gdp_policy: GdpPolicy::default(),
            transform_scope: TransformScope::default(),
            eps_min: DEFAULT_EPS_MIN,
            criterion: Criterion::Bic,
            innovation: InnovationKind::Nig,
            mean_form: MeanForm::Ma1,
            fit_restarts: 5,
            scenarios: 10_000,
            seed: 1,
            rf: 0.0,
            rf_curve: None,
            tail_level: 0.05,
            rachev_alpha: 0.5,
            rachev_beta: 0.5,
            gamma_grid: None,
            long_only: true,
            cvar_level: 0.05,
            paths: 10_000,
            maturities: vec![1, 2, 3, 4, 5],
            moneyness: vec![0.8, 0.9, 0.95, 1.0, 1.05, 1.1, 1.2],
            lambda0: 0.0,
            antithetic: false,
            factor_count: None,
            factor_restarts: 10,
            factor_covariance: false,
            varimax: false,
            out: PathBuf::from("out"),
        }
    }
}

/// Which slice of the config determines a stage's outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Index,
    Transform,
    Fit,
    Simulate,
    Regress,
    Metrics,
    Frontier,
    Options,
    Factors,
}

const INDEX_KEYS: &[&str] = &[
    "panel",
    "panel_format",
    "dictionary",
    "countries",
    "start_year",
    "end_year",
    "positivity",
    "floor_epsilon",
    "gdp_policy",
];
const TRANSFORM_KEYS: &[&str] = &["transform_scope", "eps_min"];
const FIT_KEYS: &[&str] = &["criterion", "innovation", "mean_form", "fit_restarts", "seed"];

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Index => "build-index",
            Stage::Transform => "transform",
            Stage::Fit => "fit",
            Stage::Simulate => "simulate",
            Stage::Regress => "regress",
            Stage::Metrics => "metrics",
            Stage::Frontier => "frontier",
            Stage::Options => "price-options",
            Stage::Factors => "factors",
        }
    }

    /// Config keys that can change this stage's outputs, upstream included.
    pub fn keys(self) -> Vec<&'static str> {
        let mut k = INDEX_KEYS.to_vec();
        if self == Stage::Index {
            return k;
        }
        k.extend_from_slice(TRANSFORM_KEYS);
        let own: &[&str] = match self {
            Stage::Index | Stage::Transform | Stage::Regress => &[],
            Stage::Fit => FIT_KEYS,
            Stage::Simulate => &["scenarios"],
            Stage::Metrics => &["rf", "tail_level", "rachev_alpha", "rachev_beta"],
            Stage::Frontier => &["scenarios", "gamma_grid", "long_only", "cvar_level"],
            Stage::Options => &["rf", "rf_curve", "paths", "maturities", "moneyness", "lambda0", "antithetic"],
            Stage::Factors => &["factor_count", "factor_restarts", "factor_covariance", "varimax", "seed"],
        };
        if matches!(self, Stage::Simulate | Stage::Frontier | Stage::Options) {
            k.extend_from_slice(FIT_KEYS);
        }
        k.extend_from_slice(own);
        k
    }
}

impl RunConfig {
    /// Defaults, then the file, then `overrides` (key, JSON value) in order.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, Value)]) -> anyhow::Result<Self> {
        let mut doc = match file {
            Some(path) => {
                if !path.exists() {
                    return Err(MissingInput(path.to_path_buf()).into());
                }
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let v: Value =
                    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
                match v {
                    Value::Object(m) => m,
                    _ => bail!("config {} must be a JSON object", path.display()),
                }
            }
            None => Map::new(),
        };
        let known = match serde_json::to_value(RunConfig::default())? {
            Value::Object(m) => m,
            _ => unreachable!("RunConfig serializes to an object"),
        };
        for (key, value) in overrides {
            if !known.contains_key(key) {
                bail!("unknown config field `{key}`");
            }
            doc.insert(key.clone(), value.clone());
        }
        let cfg: RunConfig = serde_json::from_value(Value::Object(doc)).context("invalid config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let unit = |name: &str, v: f64| -> anyhow::Result<()> {
            if !(v > 0.0 && v < 1.0) {
                bail!("{name} must lie in (0, 1), got {v}");
            }
            Ok(())
        };
        unit("eps_min", self.eps_min)?;
        unit("tail_level", self.tail_level)?;
        unit("cvar_level", self.cvar_level)?;
        unit("rachev_alpha", self.rachev_alpha)?;
        unit("rachev_beta", self.rachev_beta)?;
        if !(self.floor_epsilon > 0.0) {
            bail!("floor_epsilon must be > 0");
        }
        if self.scenarios == 0 || self.paths == 0 {
            bail!("scenarios and paths must be >= 1");
        }
        if self.maturities.is_empty() || self.maturities.contains(&0) {
            bail!("maturities must be a non-empty list of positive step counts");
        }
        if self.moneyness.is_empty() || self.moneyness.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            bail!("moneyness values must be positive");
        }
        if self.factor_count == Some(0) {
            bail!("factor_count must be >= 1");
        }
        Ok(())
    }

    /// The resolved config as written next to outputs. The output directory
    /// is left out so that identical runs into different directories agree
    /// byte for byte.
    pub fn to_document(&self) -> Map<String, Value> {
        match serde_json::to_value(self).expect("config serializes") {
            Value::Object(mut m) => {
                m.remove("out");
                m
            }
            _ => unreachable!(),
        }
    }

    /// SHA-256 of the compact JSON of the given keys (all keys when `None`).
    pub fn hash(&self, keys: Option<&[&str]>) -> String {
        let doc = self.to_document();
        let picked: Map<String, Value> = match keys {
            Some(keys) => doc.into_iter().filter(|(k, _)| keys.contains(&k.as_str())).collect(),
            None => doc,
        };
        let bytes = serde_json::to_vec(&Value::Object(picked)).expect("json");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn stage_hash(&self, stage: Stage) -> String {
        self.hash(Some(&stage.keys()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default() {
        let cfg = RunConfig::resolve(None, &[]).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn overrides_apply_and_unknown_keys_fail() {
        let cfg = RunConfig::resolve(None, &[("seed".into(), Value::from(9))]).unwrap();
        assert_eq!(cfg.seed, 9);
        assert!(RunConfig::resolve(None, &[("sede".into(), Value::from(9))]).is_err());
    }

    #[test]
    fn seed_does_not_touch_index_hash() {
        let a = RunConfig::default();
        let b = RunConfig { seed: 2, ..RunConfig::default() };
        assert_eq!(a.stage_hash(Stage::Index), b.stage_hash(Stage::Index));
        assert_eq!(a.stage_hash(Stage::Transform), b.stage_hash(Stage::Transform));
        assert_ne!(a.stage_hash(Stage::Simulate), b.stage_hash(Stage::Simulate));
        assert_ne!(a.hash(None), b.hash(None));
    }

    #[test]
    fn output_directory_is_not_hashed() {
        let a = RunConfig::default();
        let b = RunConfig { out: "elsewhere".into(), ..RunConfig::default() };
        assert_eq!(a.hash(None), b.hash(None));
    }
}
