//! Built-in job specs for the named example systems. Every fixture is a
//! commuting multishift, runnable by name through `--fixture`.

use std::collections::BTreeMap;

use mshift_core::product::{PVertexId, ProductSpec};
use mshift_core::tree::TreeSpec;
use mshift_core::weights::{ExplicitEntry, ToralBudget, WeightSystem};

use crate::job::{JobSpec, Params};

pub struct Fixture {
    pub name: &'static str,
    pub description: &'static str,
    pub job: JobSpec,
}

/// One vertex per depth splits in two while every other vertex continues as
/// a chain; splitting stops below `split_depths`. Spine vertices through
/// depth `split_depths` sit in sibling classes of cardinality 2, exactly as
/// in the full binary tree, but generation t holds only t + 1 vertices
/// instead of 2^t. The spine vertex at depth k is id k(k+1)/2.
fn binary_spine(split_depths: u32) -> TreeSpec {
    let mut children = BTreeMap::new();
    for k in 0..split_depths {
        let first = (k + 1) * (k + 2) / 2;
        children.insert(k * (k + 1) / 2, vec![first, first + 1]);
    }
    TreeSpec::explicit(children)
}

fn power_job(factors: Vec<TreeSpec>, budget: u32, a: f64) -> JobSpec {
    JobSpec {
        product: ProductSpec {
            factors,
            depth_budget: budget,
        },
        weights: WeightSystem::power(a),
        command: None,
        params: Params::default(),
        out: None,
    }
}

/// Chain weights on the branched-times-unary product: the two depth-1
/// branches carry distinct weights and distinct chain continuations, the
/// unary axis is the identity shift. The axis-1 weight depends only on the
/// axis-1 coordinate, so the tuple is doubly commuting and its coefficient
/// matrices are banded.
fn shimorin_mixed() -> JobSpec {
    let product = ProductSpec {
        factors: vec![TreeSpec::tnk(2, 0), TreeSpec::tnk(1, 0)],
        depth_budget: 8,
    };
    let p = product.build().expect("fixture product");
    let f = p.factor(0).expect("first factor");
    let mut entries = Vec::new();
    for v in 0..p.vertex_count() as PVertexId {
        let pv = p.vertex(v).expect("materialized vertex");
        let (x, y) = (pv.coords[0], pv.coords[1]);
        if x != 0 {
            let value = match (f.depth(x).expect("factor depth"), x % 2) {
                (1, 1) => 0.6,
                (1, 0) => 0.8,
                (_, 1) => 0.9,
                _ => 1.0,
            };
            entries.push(ExplicitEntry {
                axis: 0,
                vertex: vec![x, y],
                value,
            });
        }
        if y != 0 {
            entries.push(ExplicitEntry {
                axis: 1,
                vertex: vec![x, y],
                value: 1.0,
            });
        }
    }
    JobSpec {
        product: ProductSpec {
            factors: vec![TreeSpec::tnk(2, 0), TreeSpec::tnk(1, 0)],
            depth_budget: 8,
        },
        weights: WeightSystem::explicit(entries),
        command: None,
        params: Params {
            degree: Some(3),
            ..Params::default()
        },
        out: None,
    }
}

pub fn all() -> Vec<Fixture> {
    vec![
        Fixture {
            name: "classical_d2",
            description: "classical 2-shift: unary square, power weights a = 1",
            job: power_job(vec![TreeSpec::tnk(1, 0), TreeSpec::tnk(1, 0)], 12, 1.0),
        },
        Fixture {
            name: "mixed_2x1",
            description: "branched-times-unary product, power weights a = 2",
            job: power_job(vec![TreeSpec::tnk(2, 0), TreeSpec::tnk(1, 0)], 12, 2.0),
        },
        Fixture {
            name: "power_family_a1_d2",
            description: "Drury-Arveson analog on the doubly branched square (a = 1)",
            job: power_job(vec![TreeSpec::tnk(2, 0), TreeSpec::tnk(2, 0)], 20, 1.0),
        },
        Fixture {
            name: "power_family_a2_d2",
            description: "Hardy/Szego analog on the doubly branched square (a = 2)",
            job: power_job(vec![TreeSpec::tnk(2, 0), TreeSpec::tnk(2, 0)], 20, 2.0),
        },
        Fixture {
            name: "power_family_a3_d2",
            description: "Bergman analog on the doubly branched square (a = 3)",
            job: power_job(vec![TreeSpec::tnk(2, 0), TreeSpec::tnk(2, 0)], 20, 3.0),
        },
        Fixture {
            name: "nary_essential_counterexample",
            description: "binary-spine square: diagonal self-commutator entries settle near 1/4 instead of decaying",
            job: power_job(vec![binary_spine(12), binary_spine(12)], 25, 3.0),
        },
        Fixture {
            name: "onevar_t20_a2",
            description: "single branched tree, power weights a = 2",
            job: power_job(vec![TreeSpec::tnk(2, 0)], 12, 2.0),
        },
        Fixture {
            name: "shimorin_mixed",
            description: "explicit banded-coefficient weights on the branched-times-unary product",
            job: shimorin_mixed(),
        },
        Fixture {
            name: "isometry_mixed",
            description: "joint isometry: unit toral budget on the branched-times-unary product",
            job: JobSpec {
                product: ProductSpec {
                    factors: vec![TreeSpec::tnk(2, 0), TreeSpec::tnk(1, 0)],
                    depth_budget: 8,
                },
                weights: WeightSystem::TorallyBalanced {
                    c: ToralBudget::Named("ones".into()),
                },
                command: None,
                params: Params::default(),
                out: None,
            },
        },
    ]
}

pub fn by_name(name: &str) -> Option<JobSpec> {
    all().into_iter().find(|f| f.name == name).map(|f| f.job)
}
