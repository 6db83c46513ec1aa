//! JSON configuration schema and conversion into library types.
//!
//! One config file drives every subcommand; each subcommand reads the
//! fields it needs and rejects the run if they are missing. Set members
//! are canonical embedding labels `p{k}.t{j}.i{i}`.

use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;

use jlstrata::embeddings::{Embedding, FieldShape, InfinityType, Lift, PrimeShape};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub shape: Option<ShapeCfg>,
    pub sigma: Option<SigmaCfg>,
    #[serde(rename = "I")]
    pub i: Option<Vec<String>>,
    #[serde(rename = "J")]
    pub j: Option<Vec<String>>,
    #[serde(rename = "T")]
    pub t: Option<Vec<String>>,
    #[serde(rename = "R")]
    pub r: Option<Vec<String>>,
    pub raynaud: Option<RaynaudCfg>,
    pub dmod: Option<DmodCfg>,
    pub localmodel: Option<LocalModelCfg>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeCfg {
    pub primes: Vec<PrimeCfg>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimeCfg {
    pub e: usize,
    pub f: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaCfg {
    #[serde(default)]
    pub members: Vec<SigmaMemberCfg>,
    #[serde(default)]
    pub finite_count: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaMemberCfg {
    pub embedding: String,
    pub lift: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaynaudCfg {
    pub p: u64,
    pub f: usize,
    /// extension degree of the scalar field F_{p^scalar_m}
    #[serde(default = "one")]
    pub scalar_m: u32,
    #[serde(default)]
    pub support: Vec<usize>,
    #[serde(default)]
    pub s: Vec<u16>,
    #[serde(default)]
    pub t: Vec<u16>,
    pub action: RaynaudAction,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RaynaudAction {
    Validate,
    Dual,
    Order,
    Dieudonne,
    Basis,
    Sub { support: Vec<usize> },
    Expand { residue: u64 },
    Multiply { a: Vec<u8>, b: Vec<u8> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DmodCfg {
    pub constructor: DmodConstructor,
    #[serde(default)]
    pub emit_dump: bool,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DmodConstructor {
    Ordinary { p: u32, m: u32, e: usize, f: usize },
    Supersingular { p: u32, m: u32 },
    Dump { path: String },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalModelCfg {
    pub p: u32,
    #[serde(default = "one")]
    pub m: u32,
    pub action: LocalModelAction,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LocalModelAction {
    Obstruction { d: usize, i: usize, j: usize },
    /// matrix entries are coefficient vectors, low degree first
    Snf { n: usize, matrix: Vec<Vec<Vec<u16>>> },
    Pair { d: usize, basis: Vec<Vec<u16>> },
}

/// A config failure: reported on exit code 2 with field context.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

pub fn parse_shape(cfg: &Config) -> Result<FieldShape, ConfigError> {
    let shape_cfg = cfg
        .shape
        .as_ref()
        .ok_or_else(|| ConfigError("missing field `shape`".into()))?;
    let primes = shape_cfg
        .primes
        .iter()
        .map(|p| PrimeShape::new(p.e, p.f).map_err(|e| ConfigError(format!("shape: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    FieldShape::new(primes).map_err(|e| ConfigError(format!("shape: {e}")))
}

pub fn parse_sigma(cfg: &Config, shape: &FieldShape) -> Result<InfinityType, ConfigError> {
    let Some(sigma_cfg) = cfg.sigma.as_ref() else {
        return Ok(InfinityType::empty());
    };
    let mut members = BTreeMap::new();
    for m in &sigma_cfg.members {
        let b: Embedding = m
            .embedding
            .parse()
            .map_err(|e| ConfigError(format!("sigma member `{}`: {e}", m.embedding)))?;
        let lift = match m.lift.as_str() {
            "plain" => Lift::Plain,
            "conjugate" => Lift::Conjugate,
            other => {
                return Err(ConfigError(format!(
                    "sigma lift `{other}` must be plain or conjugate"
                )))
            }
        };
        if members.insert(b, lift).is_some() {
            return Err(ConfigError(format!("duplicate sigma member {b}")));
        }
    }
    InfinityType::new(shape, members, sigma_cfg.finite_count)
        .map_err(|e| ConfigError(format!("sigma: {e}")))
}

pub fn parse_set(
    field: &str,
    labels: &Option<Vec<String>>,
    shape: &FieldShape,
) -> Result<BTreeSet<Embedding>, ConfigError> {
    let Some(labels) = labels else {
        return Err(ConfigError(format!("missing field `{field}`")));
    };
    let mut out = BTreeSet::new();
    for label in labels {
        let b: Embedding = label
            .parse()
            .map_err(|e| ConfigError(format!("{field} member `{label}`: {e}")))?;
        shape
            .check(b)
            .map_err(|e| ConfigError(format!("{field} member `{label}`: {e}")))?;
        if !out.insert(b) {
            return Err(ConfigError(format!("duplicate {field} member {label}")));
        }
    }
    Ok(out)
}
