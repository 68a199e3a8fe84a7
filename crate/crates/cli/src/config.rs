//! Run configuration: a single JSON document selecting a system and
//! providing per-command parameter blocks. Unknown keys are rejected with
//! the offending key path; omitted keys fall back to per-system defaults.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use cascade_core::geometry::Factor;

pub const SCHEMA_VERSION: u32 = 1;

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    pub system: SystemSelector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibria: Option<EquilibriaCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chainrec: Option<ChainrecCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basin: Option<BasinCfg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certify: Option<CertifyCfg>,
}

impl RunConfig {
    /// Minimal config selecting a built-in system.
    pub fn builtin(name: &str) -> Self {
        Self {
            version: SCHEMA_VERSION,
            seed: default_seed(),
            out_dir: None,
            system: SystemSelector::Builtin(name.to_string()),
            simulate: None,
            equilibria: None,
            chainrec: None,
            basin: None,
            certify: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemSelector {
    Builtin(String),
    Inline(InlineSystem),
    InlineCascade(InlineCascade),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceCfg {
    pub factors: Vec<Factor>,
    /// Row-major metric matrix; identity when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Vec<Vec<f64>>>,
}

/// Region bound for one factor: the string "full" (circle factors) or an
/// interval `[lo, hi]` (line factors).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundCfg {
    Interval([f64; 2]),
    Full(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineSystem {
    pub space: SpaceCfg,
    /// State variable names, one per factor.
    pub state: Vec<String>,
    /// Field component expressions over the state variables.
    pub field: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Vec<BoundCfg>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineCascade {
    pub outer_space: SpaceCfg,
    pub inner_space: SpaceCfg,
    pub outer_state: Vec<String>,
    pub inner_state: Vec<String>,
    /// Outer field components over `outer_state ++ inner_state`.
    pub f: Vec<String>,
    /// Inner field components over `inner_state`.
    pub g: Vec<String>,
    pub inner_equilibrium: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_outer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_x: Option<Vec<BoundCfg>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region_y: Option<Vec<BoundCfg>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateCfg {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axes: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriaCfg {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_per_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub newton_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyp_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Vec<BoundCfg>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainrecCfg {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_flow: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine_rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Vec<BoundCfg>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasinCfg {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conv_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Vec<BoundCfg>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyCfg {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basin_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cascade_basin_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cascade_horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope_horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_basin: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_cascade_basin: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_x: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_y: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_envelope_trajectories: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_gradlike_trajectories: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradlike_horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_flow: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine_rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_per_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub newton_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyp_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fail_fast: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateCfg>,
}

/// Growth certificate expressions: `w` over the outer state, `alpha` and
/// `beta` over the inner state, and the level `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateCfg {
    pub w: String,
    pub alpha: String,
    pub beta: String,
    pub c: f64,
}

/// Parses and schema-validates a config document, reporting the first error
/// with its JSON key path.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = match serde_path_to_error::deserialize(de) {
        Ok(cfg) => cfg,
        Err(e) => {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path.is_empty() || path == "." {
                bail!("config error: {inner}");
            }
            bail!("config error at $.{path}: {inner}");
        }
    };
    if cfg.version != SCHEMA_VERSION {
        bail!(
            "config error at $.version: unsupported schema version {} (expected {})",
            cfg.version,
            SCHEMA_VERSION
        );
    }
    // Surface malformed inline definitions now rather than mid-run.
    crate::systems::resolve_system(&cfg).context("config validation")?;
    Ok(cfg)
}

pub fn serialize_config(cfg: &RunConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serializes")
}
