//! Weight systems assigning a positive number to every (axis, vertex) pair
//! with a non-root coordinate on that axis.
//!
//! Four families are supported. `Explicit` enumerates weights one by one and
//! may omit entries that no requested operation ever reads; the omission is
//! reported only when such a weight is actually needed. The two balanced
//! families spread a per-generation budget `c` uniformly over children
//! counts (per axis for the toral family, with an additional coordinate
//! ratio for the spherical family). `Power` is the one-parameter spherical
//! family whose generation budget is `(t + d) / (t + a)`; its weights reduce
//! to a closed form that needs no table.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::tree::VertexId;
use crate::Result;

/// One explicit weight: `axis` is 0-based in memory, 1-based on the wire.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitEntry {
    pub axis: usize,
    pub vertex: Vec<VertexId>,
    pub value: f64,
}

#[derive(Serialize, Deserialize)]
struct WireEntry {
    axis: usize,
    vertex: Vec<VertexId>,
    value: f64,
}

impl Serialize for ExplicitEntry {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        WireEntry {
            axis: self.axis + 1,
            vertex: self.vertex.clone(),
            value: self.value,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ExplicitEntry {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = WireEntry::deserialize(d)?;
        if w.axis == 0 {
            return Err(serde::de::Error::custom("axes are 1-based on the wire"));
        }
        Ok(ExplicitEntry {
            axis: w.axis - 1,
            vertex: w.vertex,
            value: w.value,
        })
    }
}

/// Generation budget for the torally balanced family: either a table
/// `c[t][j]`, a separable form `c(t, j) = rho[j] * gamma[t]`, or a named
/// preset ("ones").
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ToralBudget {
    Table(Vec<Vec<f64>>),
    Separable { rho: Vec<f64>, gamma: Vec<f64> },
    Named(String),
}

impl ToralBudget {
    /// Budget for generation `t` on axis `j` (0-based).
    pub fn value(&self, t: u32, j: usize, d: usize) -> Result<f64> {
        match self {
            ToralBudget::Table(rows) => {
                let row = rows.get(t as usize).ok_or(Error::WeightTableTooShort {
                    needed: t,
                    len: rows.len(),
                })?;
                row.get(j)
                    .copied()
                    .ok_or(Error::AxisOutOfRange { axis: j, d })
            }
            ToralBudget::Separable { rho, gamma } => {
                let g = gamma.get(t as usize).ok_or(Error::WeightTableTooShort {
                    needed: t,
                    len: gamma.len(),
                })?;
                let r = rho.get(j).ok_or(Error::AxisOutOfRange { axis: j, d })?;
                Ok(r * g)
            }
            ToralBudget::Named(name) => match name.as_str() {
                "ones" => Ok(1.0),
                other => Err(Error::InvalidWeights(format!(
                    "unknown toral budget preset '{other}'"
                ))),
            },
        }
    }

    /// Largest generation index the budget can answer for, if finite.
    pub fn horizon(&self) -> Option<u32> {
        match self {
            ToralBudget::Table(rows) => Some(rows.len().saturating_sub(1) as u32),
            ToralBudget::Separable { gamma, .. } => Some(gamma.len().saturating_sub(1) as u32),
            ToralBudget::Named(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum WeightSystem {
    Explicit { entries: Vec<ExplicitEntry> },
    TorallyBalanced { c: ToralBudget },
    SphericallyBalanced { c: Vec<f64> },
    Power { a: f64 },
}

impl WeightSystem {
    pub fn power(a: f64) -> Self {
        WeightSystem::Power { a }
    }

    pub fn explicit(entries: Vec<ExplicitEntry>) -> Self {
        WeightSystem::Explicit { entries }
    }

    pub fn from_map(map: HashMap<(usize, Vec<VertexId>), f64>) -> Self {
        let mut entries: Vec<ExplicitEntry> = map
            .into_iter()
            .map(|((axis, vertex), value)| ExplicitEntry {
                axis,
                vertex,
                value,
            })
            .collect();
        entries.sort_by(|a, b| (a.axis, &a.vertex).cmp(&(b.axis, &b.vertex)));
        WeightSystem::Explicit { entries }
    }

    /// Structural validation that does not need a product: positivity and,
    /// for the toral table, the cross-axis compatibility
    /// c(t, i) c(t-1, j) = c(t, j) c(t-1, i) required for the family to be
    /// consistent in every axis order.
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            WeightSystem::Explicit { entries } => {
                for e in entries {
                    if e.value <= 0.0 || !e.value.is_finite() {
                        return Err(Error::InvalidWeights(format!(
                            "weight at axis {} vertex {:?} must be positive, got {}",
                            e.axis + 1,
                            e.vertex,
                            e.value
                        )));
                    }
                    if e.axis >= d {
                        return Err(Error::AxisOutOfRange { axis: e.axis, d });
                    }
                    if e.vertex.len() != d {
                        return Err(Error::IndexLengthMismatch {
                            got: e.vertex.len(),
                            d,
                        });
                    }
                }
                Ok(())
            }
            WeightSystem::TorallyBalanced { c } => {
                if let ToralBudget::Table(rows) = c {
                    for (t, row) in rows.iter().enumerate() {
                        if row.len() != d {
                            return Err(Error::InvalidWeights(format!(
                                "toral budget row {t} has {} entries, product has {d} axes",
                                row.len()
                            )));
                        }
                        for (j, &x) in row.iter().enumerate() {
                            if x <= 0.0 || !x.is_finite() {
                                return Err(Error::InvalidWeights(format!(
                                    "toral budget c({t}, {}) must be positive",
                                    j + 1
                                )));
                            }
                        }
                    }
                    for t in 1..rows.len() {
                        for i in 0..d {
                            for j in 0..d {
                                let lhs = rows[t][i] * rows[t - 1][j];
                                let rhs = rows[t][j] * rows[t - 1][i];
                                if (lhs - rhs).abs() > 1e-12 * lhs.abs().max(rhs.abs()) {
                                    return Err(Error::InvalidWeights(format!(
                                        "toral budget rows {t}-{} are not cross-axis \
                                         compatible at axes ({}, {})",
                                        t - 1,
                                        i + 1,
                                        j + 1
                                    )));
                                }
                            }
                        }
                    }
                }
                if let ToralBudget::Separable { rho, gamma } = c {
                    if rho.len() != d {
                        return Err(Error::InvalidWeights(format!(
                            "separable toral budget has {} axis factors, product has {d}",
                            rho.len()
                        )));
                    }
                    if rho
                        .iter()
                        .chain(gamma)
                        .any(|&x| x <= 0.0 || !x.is_finite())
                    {
                        return Err(Error::InvalidWeights(
                            "separable toral budget factors must be positive".into(),
                        ));
                    }
                }
                Ok(())
            }
            WeightSystem::SphericallyBalanced { c } => {
                if c.iter().any(|&x| x <= 0.0 || !x.is_finite()) {
                    return Err(Error::InvalidWeights(
                        "spherical budget entries must be positive".into(),
                    ));
                }
                Ok(())
            }
            WeightSystem::Power { a } => {
                if *a <= 0.0 || !a.is_finite() {
                    return Err(Error::InvalidWeights(format!(
                        "power family parameter must be positive, got {a}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Generation budget sequence `C_t = sum_j ||S_j e_v||^2`, which the two
    /// spherical families fix independently of `v`. `None` for families that
    /// do not carry one structurally.
    pub fn spherical_budget(&self, t: u32, d: usize) -> Option<f64> {
        match self {
            WeightSystem::SphericallyBalanced { c } => c.get(t as usize).copied(),
            WeightSystem::Power { a } => Some((t as f64 + d as f64) / (t as f64 + a)),
            _ => None,
        }
    }
}
