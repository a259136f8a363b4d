//! Job specifications: everything a run needs, in one JSON document.

use std::path::PathBuf;

use mshift_core::product::ProductSpec;
use mshift_core::shift::DualMode;
use mshift_core::weights::WeightSystem;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub product: ProductSpec,
    pub weights: WeightSystem,
    /// Optional command pin: when set, the job only runs under this
    /// subcommand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default)]
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// Command-specific knobs. Every field has a per-command default, so a
/// spec only names what it changes.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Difference box and Gram generation window (classify).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<u32>,
    /// Self-commutator scan depth (classify).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<u32>,
    /// Radius window lengths (radii, classify).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<u32>,
    /// Polynomial or exponent degree cap (moments, shimorin, rkhs).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<u32>,
    /// Wandering truncation level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    /// Cauchy dual flavor where one is needed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<DualMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

impl Params {
    pub fn window(&self) -> u32 {
        self.window.unwrap_or(6)
    }
    pub fn t_max(&self) -> u32 {
        self.t_max.unwrap_or(12)
    }
    pub fn n_max(&self) -> u32 {
        self.n_max.unwrap_or(64)
    }
    pub fn k_max(&self) -> u32 {
        self.k_max.unwrap_or(512)
    }
    pub fn n(&self) -> u32 {
        self.n.unwrap_or(5)
    }
    pub fn tol(&self) -> f64 {
        self.tol.unwrap_or(1e-9)
    }
}
