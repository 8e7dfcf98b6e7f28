//! TOML configuration for the whole toolkit.
//!
//! Every section is optional and overlays the shipped defaults, so an empty
//! file reproduces them exactly. Membership sets merge by name; a `rules`
//! list replaces the whole rule table and must be complete.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::clustering::{ClusteringError, DbscanParams};
use crate::eval::{EvalSpec, RecallPoints};
use crate::fuzzy::{defaults, FuzzyError, FuzzySet, FuzzySystem, FuzzyVariable, Rule, TriangularMf, DEFAULT_RESOLUTION};
use crate::geometry::IouMode;
use crate::kitti::{CategoryMap, ParseOptions, UnknownCategory};
use crate::nms::{CategoryThresholds, NmsConfig, NmsError, SoftNmsParams, SoftPenalty};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config syntax: {0}")]
    Parse(String),
    #[error("unsupported config version {0} (this build reads version {CONFIG_VERSION})")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
    #[error(transparent)]
    Nms(#[from] NmsError),
    #[error(transparent)]
    Dbscan(#[from] ClusteringError),
    #[error("eval: {0}")]
    Eval(String),
}

/// Fully resolved, validated settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolkitConfig {
    pub version: u32,
    pub density: FuzzyVariable,
    pub volume: FuzzyVariable,
    pub class: FuzzyVariable,
    pub rules: Vec<Rule>,
    pub resolution: usize,
    pub nms: NmsConfig,
    pub dbscan: DbscanParams,
    pub soft: SoftNmsParams,
    pub categories: CategoryMap,
    pub unknown_category: UnknownCategory,
    pub recall: RecallPoints,
}

impl Default for ToolkitConfig {
    fn default() -> Self {
        ToolkitConfig::from_raw(RawConfig::default()).expect("shipped defaults are valid")
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVariable {
    domain: Option<[f64; 2]>,
    sets: Option<BTreeMap<String, [f64; 3]>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFuzzy {
    resolution: Option<usize>,
    density: Option<RawVariable>,
    volume: Option<RawVariable>,
    class: Option<RawVariable>,
    rules: Option<Vec<Rule>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawThresholds {
    #[serde(rename = "LD")]
    ld: Option<f64>,
    #[serde(rename = "LVHD")]
    lvhd: Option<f64>,
    #[serde(rename = "SVHD")]
    svhd: Option<f64>,
}

impl RawThresholds {
    fn overlay(self, mut base: CategoryThresholds) -> CategoryThresholds {
        base.ld = self.ld.unwrap_or(base.ld);
        base.lvhd = self.lvhd.unwrap_or(base.lvhd);
        base.svhd = self.svhd.unwrap_or(base.svhd);
        base
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNms {
    iou_threshold: Option<RawThresholds>,
    score_threshold: Option<RawThresholds>,
    pre_filter_score: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDbscan {
    eps: Option<f64>,
    min_pts: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSoft {
    sigma: Option<f64>,
    /// When set, the linear penalty replaces the Gaussian one.
    linear_iou_threshold: Option<f64>,
    final_threshold: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEval {
    recall: Option<RecallPoints>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    version: Option<u32>,
    iou_mode: Option<IouMode>,
    unknown_category: Option<UnknownCategory>,
    fuzzy: Option<RawFuzzy>,
    nms: Option<RawNms>,
    dbscan: Option<RawDbscan>,
    soft: Option<RawSoft>,
    eval: Option<RawEval>,
    categories: Option<BTreeMap<String, u32>>,
}

fn resolve_variable(
    name: &str,
    domain: [f64; 2],
    table: &[(&str, [f64; 3])],
    raw: Option<RawVariable>,
) -> Result<FuzzyVariable, FuzzyError> {
    let raw = raw.unwrap_or_default();
    let mut sets: Vec<FuzzySet> = table.iter().map(|(n, p)| FuzzySet::new(*n, TriangularMf::from_array(*p))).collect();
    for (set, params) in raw.sets.unwrap_or_default() {
        let mf = TriangularMf::from_array(params);
        match sets.iter_mut().find(|s| s.name == set) {
            Some(existing) => existing.mf = mf,
            None => sets.push(FuzzySet::new(set, mf)),
        }
    }
    sets.sort_by(|a, b| a.mf.b.total_cmp(&b.mf.b));
    FuzzyVariable::new(name, raw.domain.unwrap_or(domain), sets)
}

impl ToolkitConfig {
    fn from_raw(raw: RawConfig) -> Result<Self, ConfigError> {
        let version = raw.version.unwrap_or(CONFIG_VERSION);
        if version != CONFIG_VERSION {
            return Err(ConfigError::UnsupportedVersion(version));
        }
        let iou_mode = raw.iou_mode.unwrap_or_default();
        let fuzzy = raw.fuzzy.unwrap_or_default();
        let density = resolve_variable("density", defaults::DENSITY_DOMAIN, &defaults::DENSITY_SETS, fuzzy.density)?;
        let volume = resolve_variable("volume", defaults::VOLUME_DOMAIN, &defaults::VOLUME_SETS, fuzzy.volume)?;
        let class = resolve_variable("class", defaults::CLASS_DOMAIN, &defaults::CLASS_SETS, fuzzy.class)?;
        let rules = fuzzy
            .rules
            .unwrap_or_else(|| defaults::RULES.iter().map(|(d, v, c)| Rule::new(d, v, c)).collect());

        let raw_nms = raw.nms.unwrap_or_default();
        let base = NmsConfig::default();
        let nms = NmsConfig {
            iou_threshold: raw_nms.iou_threshold.unwrap_or_default().overlay(base.iou_threshold),
            score_threshold: raw_nms.score_threshold.unwrap_or_default().overlay(base.score_threshold),
            iou_mode,
            pre_filter_score: raw_nms.pre_filter_score,
        };
        nms.validate()?;

        let raw_db = raw.dbscan.unwrap_or_default();
        let base_db = DbscanParams::default();
        let dbscan = DbscanParams::new(raw_db.eps.unwrap_or(base_db.eps), raw_db.min_pts.unwrap_or(base_db.min_pts))?;

        let raw_soft = raw.soft.unwrap_or_default();
        let base_soft = SoftNmsParams::default();
        let penalty = match (raw_soft.linear_iou_threshold, raw_soft.sigma) {
            (Some(iou_threshold), _) => SoftPenalty::Linear { iou_threshold },
            (None, Some(sigma)) => SoftPenalty::Gaussian { sigma },
            (None, None) => base_soft.penalty,
        };
        let soft = SoftNmsParams {
            penalty,
            final_threshold: raw_soft.final_threshold.unwrap_or(base_soft.final_threshold),
            iou_mode,
        };
        soft.validate()?;

        let cfg = Self {
            version,
            density,
            volume,
            class,
            rules,
            resolution: fuzzy.resolution.unwrap_or(DEFAULT_RESOLUTION),
            nms,
            dbscan,
            soft,
            categories: raw.categories.map(CategoryMap).unwrap_or_default(),
            unknown_category: raw.unknown_category.unwrap_or_default(),
            recall: raw.eval.and_then(|e| e.recall).unwrap_or_default(),
        };
        cfg.fuzzy_system()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        Self::from_raw(raw)
    }

    pub fn fuzzy_system(&self) -> Result<FuzzySystem, FuzzyError> {
        FuzzySystem::new(
            self.density.clone(),
            self.volume.clone(),
            self.class.clone(),
            self.rules.clone(),
            self.resolution,
        )
    }

    pub fn parse_options(&self) -> ParseOptions {
        ParseOptions { categories: self.categories.clone(), unknown: self.unknown_category }
    }

    pub fn eval_spec(&self) -> EvalSpec {
        EvalSpec { recall: self.recall, ..EvalSpec::default() }
    }

    /// Hex SHA-256 of the canonical JSON form of the resolved settings.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn with_iou_mode(mut self, mode: IouMode) -> Self {
        self.nms.iou_mode = mode;
        self.soft.iou_mode = mode;
        self
    }
}

/// Reads and validates a TOML config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ToolkitConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    ToolkitConfig::from_toml(&text)
}
