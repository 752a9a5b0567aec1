//! Two-tier resource pools, the edge/backend link, and the pool sweep used by
//! the configuration experiment.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Frontend,
    Backend,
}

impl FromStr for Tier {
    type Err = PlatformError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "frontend" => Ok(Tier::Frontend),
            "backend" => Ok(Tier::Backend),
            other => Err(PlatformError::UnknownTier(other.to_string())),
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::Frontend => "frontend",
            Tier::Backend => "backend",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PeKind {
    pub name: String,
    pub tier: Tier,
}

impl PeKind {
    pub fn new(name: impl Into<String>, tier: Tier) -> Self {
        Self { name: name.into(), tier }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PeId(pub u32);

impl fmt::Display for PeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeInstance {
    pub id: PeId,
    pub kind: PeKind,
}

impl PeInstance {
    pub fn tier(&self) -> Tier {
        self.kind.tier
    }
}

/// Processing elements available to one run. Instance `i` has id `i`.
///
/// A pool may hold backend PEs only; sensor data lives on the frontend tier
/// whether or not it has PEs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourcePool {
    pub label: String,
    pub instances: Vec<PeInstance>,
}

impl ResourcePool {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Distinct kind names in pool order.
    pub fn kind_names(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.instances
            .iter()
            .map(|pe| pe.kind.name.as_str())
            .filter(|n| seen.insert(*n))
            .collect()
    }

    pub fn count_of(&self, kind: &str) -> usize {
        self.instances.iter().filter(|pe| pe.kind.name == kind).count()
    }

    pub fn all_in_tier(&self, tier: Tier) -> bool {
        self.instances.iter().all(|pe| pe.tier() == tier)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Contention {
    /// Every transfer sees the full link rate.
    #[default]
    None,
    /// One boundary transfer at a time.
    #[serde(alias = "serial")]
    Serialized,
}

impl FromStr for Contention {
    type Err = PlatformError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Contention::None),
            "serial" | "serialized" => Ok(Contention::Serialized),
            other => Err(PlatformError::UnknownContention(other.to_string())),
        }
    }
}

/// The symmetric edge/backend channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkModel {
    #[serde(rename = "mbps")]
    pub rate: f64,
    #[serde(default)]
    pub contention: Contention,
}

pub const DEFAULT_LINK_MBPS: f64 = 12.0;

impl Default for LinkModel {
    fn default() -> Self {
        Self { rate: DEFAULT_LINK_MBPS, contention: Contention::None }
    }
}

impl LinkModel {
    pub fn new(rate: f64, contention: Contention) -> Result<Self, PlatformError> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(PlatformError::BadLinkRate(rate));
        }
        Ok(Self { rate, contention })
    }
}

/// Seconds needed to move `volume` megabits over `link`.
pub fn transfer_time(volume: f64, link: &LinkModel) -> f64 {
    volume / link.rate
}

/// Megabits that cross the tier boundary when data produced on `producer`
/// is consumed on `consumer`. Same-tier movement is free.
pub fn crossing_volume(producer: Tier, consumer: Tier, volume: f64) -> f64 {
    if producer == consumer {
        0.0
    } else {
        volume
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PlatformError {
    #[error("pool has no instances")]
    EmptyPool,
    #[error("unknown tier '{0}' (expected frontend or backend)")]
    UnknownTier(String),
    #[error("unknown contention mode '{0}' (expected none or serial)")]
    UnknownContention(String),
    #[error("duplicate kind '{0}' in pool definition")]
    DuplicateKind(String),
    #[error("count given for undeclared kind '{0}'")]
    UndeclaredKind(String),
    #[error("link rate must be positive, got {0}")]
    BadLinkRate(f64),
    #[error("malformed pool document: {0}")]
    Malformed(String),
    #[error("invalid sweep: {0}")]
    BadSweep(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindDecl {
    pub name: String,
    pub tier: String,
}

/// Pool file contents: kinds with tiers, a count per kind, and the link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolConfig {
    #[serde(default)]
    pub label: Option<String>,
    pub kinds: Vec<KindDecl>,
    pub counts: BTreeMap<String, u32>,
    #[serde(default)]
    pub link: LinkModel,
}

impl PoolConfig {
    pub fn from_json(text: &str) -> Result<Self, PlatformError> {
        serde_json::from_str(text).map_err(|e| PlatformError::Malformed(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pool serialization cannot fail")
    }
}

/// The five kinds used throughout the experiments.
pub mod kinds {
    pub const ARM: &str = "arm-cpu";
    pub const VOLTA: &str = "volta-gpu";
    pub const XEON: &str = "xeon-cpu";
    pub const TESLA: &str = "tesla-gpu";
    pub const ALVEO: &str = "alveo-fpga";
}

pub fn default_kinds() -> Vec<KindDecl> {
    [
        (kinds::ARM, "frontend"),
        (kinds::VOLTA, "frontend"),
        (kinds::XEON, "backend"),
        (kinds::TESLA, "backend"),
        (kinds::ALVEO, "backend"),
    ]
    .into_iter()
    .map(|(name, tier)| KindDecl { name: name.into(), tier: tier.into() })
    .collect()
}

/// Pool config over [`default_kinds`] with the given counts, in kind order
/// arm, volta, xeon, tesla, alveo.
pub fn standard_config(label: &str, counts: [u32; 5]) -> PoolConfig {
    let names = [kinds::ARM, kinds::VOLTA, kinds::XEON, kinds::TESLA, kinds::ALVEO];
    PoolConfig {
        label: Some(label.to_string()),
        kinds: default_kinds(),
        counts: names.iter().zip(counts).filter(|(_, c)| *c > 0).map(|(n, c)| (n.to_string(), c)).collect(),
        link: LinkModel::default(),
    }
}

/// Builds a pool with sequential ids: frontend kinds first, then backend,
/// each tier in declaration order, instances of a kind contiguous.
pub fn build_pool(config: &PoolConfig) -> Result<ResourcePool, PlatformError> {
    let mut declared: Vec<PeKind> = Vec::with_capacity(config.kinds.len());
    for decl in &config.kinds {
        if declared.iter().any(|k| k.name == decl.name) {
            return Err(PlatformError::DuplicateKind(decl.name.clone()));
        }
        declared.push(PeKind::new(decl.name.clone(), decl.tier.parse()?));
    }
    if let Some(name) = config.counts.keys().find(|n| !declared.iter().any(|k| &k.name == *n)) {
        return Err(PlatformError::UndeclaredKind(name.clone()));
    }

    let mut instances = Vec::new();
    for tier in [Tier::Frontend, Tier::Backend] {
        for kind in declared.iter().filter(|k| k.tier == tier) {
            let count = config.counts.get(&kind.name).copied().unwrap_or(0);
            for _ in 0..count {
                instances.push(PeInstance { id: PeId(instances.len() as u32), kind: kind.clone() });
            }
        }
    }
    if instances.is_empty() {
        return Err(PlatformError::EmptyPool);
    }
    let label = config.label.clone().unwrap_or_else(|| default_label(config));
    Ok(ResourcePool { label, instances })
}

fn default_label(config: &PoolConfig) -> String {
    config
        .kinds
        .iter()
        .filter_map(|k| config.counts.get(&k.name).filter(|c| **c > 0).map(|c| format!("{c}x{}", k.name)))
        .collect::<Vec<_>>()
        .join("+")
}

/// Grid over ARM and Xeon counts with fixed accelerator counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolSweepSpec {
    pub arm_range: RangeInclusive<u32>,
    pub xeon_range: RangeInclusive<u32>,
    pub volta: u32,
    pub tesla: u32,
    pub alveo: u32,
}

impl Default for PoolSweepSpec {
    fn default() -> Self {
        Self { arm_range: 1..=3, xeon_range: 1..=3, volta: 1, tesla: 1, alveo: 1 }
    }
}

impl PoolSweepSpec {
    pub fn validate(&self) -> Result<(), PlatformError> {
        for (name, r) in [("arm", &self.arm_range), ("xeon", &self.xeon_range)] {
            if r.is_empty() {
                return Err(PlatformError::BadSweep(format!("{name} range is empty")));
            }
            if *r.start() < 1 {
                return Err(PlatformError::BadSweep(format!("{name} range must start at 1 or more")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.arm_range.clone().count() * self.xeon_range.clone().count() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

pub const EDGE_ONLY_LABEL: &str = "edge-only";
pub const SERVER_ONLY_LABEL: &str = "server-only";

pub fn grid_label(arm: u32, xeon: u32) -> String {
    format!("{arm}arm-{xeon}xeon")
}

/// Pool configs of a sweep: the grid (ARM outer, Xeon inner), then edge-only,
/// then server-only.
pub fn sweep_configs(spec: &PoolSweepSpec) -> Result<Vec<PoolConfig>, PlatformError> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.len());
    for arm in spec.arm_range.clone() {
        for xeon in spec.xeon_range.clone() {
            out.push(standard_config(&grid_label(arm, xeon), [arm, spec.volta, xeon, spec.tesla, spec.alveo]));
        }
    }
    let max_arm = *spec.arm_range.end();
    let max_xeon = *spec.xeon_range.end();
    out.push(standard_config(EDGE_ONLY_LABEL, [max_arm, spec.volta, 0, 0, 0]));
    // No frontend PEs: raw input still originates on the frontend tier.
    out.push(standard_config(SERVER_ONLY_LABEL, [0, 0, max_xeon, spec.tesla, spec.alveo]));
    Ok(out)
}

/// Pools of a sweep, in [`sweep_configs`] order.
pub fn enumerate_sweep(spec: &PoolSweepSpec) -> Result<Vec<ResourcePool>, PlatformError> {
    sweep_configs(spec)?.iter().map(build_pool).collect()
}
