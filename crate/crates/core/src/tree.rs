//! Rooted directed trees, materialized breadth-first up to a depth budget.
//!
//! Trees here are leafless (every vertex has at least one child) and locally
//! finite. Two generators are supported: the chain-then-branches family
//! `Tnk { n0, k0 }`, which is a unary chain of length `k0` whose end vertex
//! has `n0` children each continuing as an infinite unary chain, and an
//! explicit finite children map whose unlisted vertices continue as unary
//! tails. Both generators certify that no branching occurs outside the
//! region they describe, which is what makes branching-index queries and the
//! downstream kernel enumerations finite.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

pub type VertexId = u32;

/// Continuation rule for vertices an explicit children map does not list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tail {
    Unary,
}

/// Generator for a rooted directed tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeSpec {
    /// Unary chain of length `k0` from the root; the depth-`k0` vertex has
    /// `n0` children, each of which continues as an infinite unary chain.
    Tnk { n0: u32, k0: u32 },
    /// Explicit children lists for a finite prefix, everything else unary.
    /// Vertex ids must be dense in breadth-first order with the root at 0.
    Explicit {
        #[serde(deserialize_with = "children_from_wire")]
        children: BTreeMap<VertexId, Vec<VertexId>>,
        tail: Tail,
    },
}

/// JSON object keys are strings; parse them back into vertex ids.
fn children_from_wire<'de, D>(
    d: D,
) -> std::result::Result<BTreeMap<VertexId, Vec<VertexId>>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let raw = BTreeMap::<String, Vec<VertexId>>::deserialize(d)?;
    raw.into_iter()
        .map(|(k, v)| {
            k.parse::<VertexId>()
                .map(|k| (k, v))
                .map_err(|_| serde::de::Error::custom(format!("bad vertex id key '{k}'")))
        })
        .collect()
}

impl TreeSpec {
    pub fn tnk(n0: u32, k0: u32) -> Self {
        TreeSpec::Tnk { n0, k0 }
    }

    pub fn explicit(children: BTreeMap<VertexId, Vec<VertexId>>) -> Self {
        TreeSpec::Explicit {
            children,
            tail: Tail::Unary,
        }
    }
}

/// Result of a branching-index query. The index is `1 + max depth of a
/// branching vertex` (0 when the tree is a chain); it is only reported when
/// every branching vertex provably lies within the queried depth budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchingIndex {
    Known(u32),
    ExceedsBudget,
}

impl BranchingIndex {
    pub fn known(self) -> Option<u32> {
        match self {
            BranchingIndex::Known(k) => Some(k),
            BranchingIndex::ExceedsBudget => None,
        }
    }
}

/// A rooted directed tree materialized to a fixed depth. Immutable once
/// built: every accessor either answers from the materialized region or
/// reports that the budget is too small.
#[derive(Clone, Debug)]
pub struct RootedTree {
    spec: TreeSpec,
    depth_budget: u32,
    parent: Vec<Option<VertexId>>,
    /// Children per vertex; empty and unknown for depth == budget.
    children: Vec<Vec<VertexId>>,
    depth: Vec<u32>,
    generations: Vec<Vec<VertexId>>,
}

impl RootedTree {
    pub fn materialize(spec: TreeSpec, depth_budget: u32) -> Result<Self> {
        match &spec {
            TreeSpec::Tnk { n0, k0 } => {
                let (n0, k0) = (*n0, *k0);
                if n0 == 0 {
                    return Err(Error::InvalidTree("n0 must be at least 1".into()));
                }
                let mut tree = RootedTree {
                    spec,
                    depth_budget,
                    parent: vec![None],
                    children: vec![Vec::new()],
                    depth: vec![0],
                    generations: vec![vec![0]],
                };
                for t in 0..depth_budget {
                    let parents = tree.generations[t as usize].clone();
                    let mut next_gen = Vec::new();
                    for p in parents {
                        let fanout = if t == k0 { n0 } else { 1 };
                        for _ in 0..fanout {
                            let id = tree.parent.len() as VertexId;
                            tree.parent.push(Some(p));
                            tree.children.push(Vec::new());
                            tree.depth.push(t + 1);
                            tree.children[p as usize].push(id);
                            next_gen.push(id);
                        }
                    }
                    tree.generations.push(next_gen);
                }
                Ok(tree)
            }
            TreeSpec::Explicit {
                children: map,
                tail: Tail::Unary,
            } => {
                for (&v, kids) in map {
                    if kids.is_empty() {
                        return Err(Error::InvalidTree(format!(
                            "vertex {v} has an empty children list; trees are leafless"
                        )));
                    }
                }
                let map = map.clone();
                let mut tree = RootedTree {
                    spec,
                    depth_budget,
                    parent: vec![None],
                    children: vec![Vec::new()],
                    depth: vec![0],
                    generations: vec![vec![0]],
                };
                let mut next_id: VertexId = 1;
                for t in 0..depth_budget {
                    let parents = tree.generations[t as usize].clone();
                    let mut next_gen = Vec::new();
                    for p in parents {
                        let kids: Vec<VertexId> = match map.get(&p) {
                            Some(listed) => {
                                for &k in listed {
                                    if k != next_id {
                                        return Err(Error::InvalidTree(format!(
                                            "children of vertex {p} must continue the \
                                             breadth-first numbering: expected {next_id}, got {k}"
                                        )));
                                    }
                                    next_id += 1;
                                }
                                listed.clone()
                            }
                            None => {
                                let id = next_id;
                                next_id += 1;
                                vec![id]
                            }
                        };
                        for &k in &kids {
                            tree.parent.push(Some(p));
                            tree.children.push(Vec::new());
                            tree.depth.push(t + 1);
                            next_gen.push(k);
                        }
                        tree.children[p as usize] = kids;
                    }
                    tree.generations.push(next_gen);
                }
                Ok(tree)
            }
        }
    }

    pub fn spec(&self) -> &TreeSpec {
        &self.spec
    }

    pub fn depth_budget(&self) -> u32 {
        self.depth_budget
    }

    pub fn vertex_count(&self) -> usize {
        self.parent.len()
    }

    fn check(&self, v: VertexId) -> Result<()> {
        if (v as usize) < self.parent.len() {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange {
                id: v,
                count: self.parent.len(),
            })
        }
    }

    pub fn depth(&self, v: VertexId) -> Result<u32> {
        self.check(v)?;
        Ok(self.depth[v as usize])
    }

    pub fn parent(&self, v: VertexId) -> Result<Option<VertexId>> {
        self.check(v)?;
        Ok(self.parent[v as usize])
    }

    /// Children of `v`. Vertices on the budget boundary have unknown
    /// children, which is reported as a budget error rather than an empty
    /// list.
    pub fn children(&self, v: VertexId) -> Result<&[VertexId]> {
        self.check(v)?;
        let d = self.depth[v as usize];
        if d >= self.depth_budget {
            return Err(Error::DepthBudgetExceeded {
                needed: d + 1,
                budget: self.depth_budget,
            });
        }
        Ok(&self.children[v as usize])
    }

    /// Siblings of `v`: all children of its parent, `v` included.
    pub fn siblings(&self, v: VertexId) -> Result<&[VertexId]> {
        self.check(v)?;
        match self.parent[v as usize] {
            None => Err(Error::RootHasNoSiblings),
            Some(p) => Ok(&self.children[p as usize]),
        }
    }

    /// Vertices at depth `t`, in id order.
    pub fn generation(&self, t: u32) -> Result<&[VertexId]> {
        if t > self.depth_budget {
            return Err(Error::DepthBudgetExceeded {
                needed: t,
                budget: self.depth_budget,
            });
        }
        Ok(&self.generations[t as usize])
    }

    /// Materialized vertices with at least two children. Complete for the
    /// whole tree whenever `branching_index` reports `Known`.
    pub fn branch_vertices(&self) -> Vec<VertexId> {
        (0..self.parent.len() as VertexId)
            .filter(|&v| {
                self.depth[v as usize] < self.depth_budget && self.children[v as usize].len() >= 2
            })
            .collect()
    }

    /// Branching index: 0 for chains, otherwise one more than the greatest
    /// depth at which a vertex branches. `Known` only when every branching
    /// vertex provably lies at depth <= `depth_budget`; the generators
    /// certify that nothing branches beyond what they describe.
    pub fn branching_index(&self, depth_budget: u32) -> BranchingIndex {
        match &self.spec {
            TreeSpec::Tnk { n0, k0 } => {
                if *n0 <= 1 {
                    BranchingIndex::Known(0)
                } else if *k0 <= depth_budget {
                    BranchingIndex::Known(k0 + 1)
                } else {
                    BranchingIndex::ExceedsBudget
                }
            }
            TreeSpec::Explicit { children: map, .. } => {
                // Keys never reached by the materialization are beyond the
                // horizon; if any of them branches we cannot certify.
                let horizon: VertexId = self.parent.len() as VertexId;
                let mut max_branch_depth: Option<u32> = None;
                for (&v, kids) in map {
                    if kids.len() < 2 {
                        continue;
                    }
                    if v >= horizon {
                        return BranchingIndex::ExceedsBudget;
                    }
                    let d = self.depth[v as usize];
                    max_branch_depth = Some(max_branch_depth.map_or(d, |m| m.max(d)));
                }
                match max_branch_depth {
                    None => BranchingIndex::Known(0),
                    Some(d) if d <= depth_budget => BranchingIndex::Known(d + 1),
                    Some(_) => BranchingIndex::ExceedsBudget,
                }
            }
        }
    }
}
