//! Joint kernel of the adjoint tuple and what it generates.
//!
//! A function `f` lies in the joint kernel E exactly when every axis adjoint
//! kills it. Away from the root this reduces to independent finite linear
//! systems, one per sibling class of the interior slices: the class of a
//! representative `u` over an axis set `F` contributes the solutions of
//! "every axis-`i` weight sum over each sibling row vanishes". Classes in
//! which some axis has a single sibling only admit the zero solution and are
//! skipped outright; the rest are solved by SVD. The module also checks the
//! generating property of E (the span of its shifted copies has full rank on
//! a truncation), the adjoint-compatibility condition under which the tuple
//! acts like a classical shift on E, and produces the model coefficient
//! tables of the associated analytic kernel.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::Error;
use crate::numeric::{svd_nullspace, svd_rank};
use crate::product::{PVertexId, ProductTree};
use crate::shift::{DualMode, Multishift, VertexFunction};
use crate::Result;

/// Singular values at or below this fraction of the largest one count as
/// zero when solving an individual class system.
pub const BLOCK_SVD_TOL: f64 = 1e-10;

/// One class system: the unknowns are the values of `f` on the sibling
/// class of `rep` over `axes`; each row states that one axis-weighted
/// sibling sum vanishes.
#[derive(Clone, Debug)]
pub struct ClassSystem {
    pub axes: Vec<usize>,
    pub rep: PVertexId,
    /// Class member ids, in id order; columns of `matrix`.
    pub members: Vec<PVertexId>,
    /// Row labels: (axis, anchor coordinates on the other axes).
    pub rows: Vec<(usize, Vec<u32>)>,
    pub matrix: DMatrix<f64>,
}

/// Assemble the class system for the representative `u` over `axes`.
/// `u` must lie in the interior slice for `axes`.
pub fn class_system(shift: &Multishift, axes: &[usize], u: PVertexId) -> Result<ClassSystem> {
    let p = shift.product();
    let members = p.sibling_class(u, axes)?;
    let col_of = |v: PVertexId| members.binary_search(&v).expect("member of its own class");
    let mut rows = Vec::new();
    let mut entries: Vec<Vec<f64>> = Vec::new();
    for &i in axes {
        // group the class members by their coordinates on the other axes:
        // each group is the sibling row of one anchor
        let mut groups: std::collections::BTreeMap<Vec<u32>, Vec<PVertexId>> = Default::default();
        for &w in &members {
            let pw = p.vertex(w)?;
            let key: Vec<u32> = axes
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| pw.coords[j])
                .collect();
            groups.entry(key).or_default().push(w);
        }
        for (key, group) in groups {
            let mut row = vec![0.0; members.len()];
            for w in group {
                row[col_of(w)] = shift.weight(i, w)?;
            }
            rows.push((i, key));
            entries.push(row);
        }
    }
    let matrix = DMatrix::from_fn(rows.len(), members.len(), |r, c| entries[r][c]);
    Ok(ClassSystem {
        axes: axes.to_vec(),
        rep: u,
        members,
        rows,
        matrix,
    })
}

/// One direct summand of the joint kernel.
#[derive(Clone, Debug)]
pub struct KernelBlock {
    /// Axes of the interior slice; empty for the root block.
    pub axes: Vec<usize>,
    pub rep: PVertexId,
    /// Orthonormal solutions, as functions supported on the class.
    pub basis: Vec<VertexFunction>,
}

#[derive(Clone, Debug)]
pub struct KernelBasis {
    pub blocks: Vec<KernelBlock>,
    pub dim: usize,
    /// A priori dimension bounds from the branching data.
    pub bounds: (usize, usize),
    /// Largest `||S_j^* f||` over all basis functions and axes.
    pub max_adjoint_residual: f64,
}

impl KernelBasis {
    /// All basis functions with their block index, in block order.
    pub fn functions(&self) -> impl Iterator<Item = (usize, &VertexFunction)> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(i, b)| b.basis.iter().map(move |f| (i, f)))
    }
}

/// Compute the joint kernel of the adjoint tuple. Needs the branching of
/// every factor certified within the budget and enough depth to see every
/// candidate class (the sum of the factor branching indices).
pub fn joint_kernel(shift: &Multishift, residual_tol: f64) -> Result<KernelBasis> {
    let p = shift.product();
    let branching = p.certified_branching()?;
    let needed: u32 = branching.iter().sum();
    if p.depth_budget() < needed {
        return Err(Error::KernelBudget {
            needed,
            budget: p.depth_budget(),
        });
    }
    let d = p.dim();
    let mut blocks = vec![KernelBlock {
        axes: Vec::new(),
        rep: p.root(),
        basis: vec![VertexFunction::delta(p.root())],
    }];
    // every nonempty axis subset, then every representative whose class is
    // at least two wide on each of its axes
    for mask in 1u32..(1 << d) {
        let axes: Vec<usize> = (0..d).filter(|j| mask & (1 << j) != 0).collect();
        for u in p.class_representatives(&axes)? {
            let pu = p.vertex(u)?;
            let wide = axes.iter().all(|&j| {
                p.factor(j)
                    .map(|f| {
                        f.siblings(pu.coords[j])
                            .map(|s| s.len() >= 2)
                            .unwrap_or(false)
                    })
                    .unwrap_or(false)
            });
            if !wide {
                continue;
            }
            let system = class_system(shift, &axes, u)?;
            let (_, null) = svd_nullspace(&system.matrix, BLOCK_SVD_TOL);
            if null.is_empty() {
                continue;
            }
            let basis = null
                .iter()
                .map(|vec| {
                    VertexFunction::from_entries(
                        system.members.iter().zip(vec.iter()).map(|(&m, &x)| (m, x)),
                    )
                })
                .collect();
            blocks.push(KernelBlock {
                axes: axes.clone(),
                rep: u,
                basis,
            });
        }
    }
    let dim = blocks.iter().map(|b| b.basis.len()).sum();
    let mut max_residual = 0.0f64;
    for b in &blocks {
        for f in &b.basis {
            for j in 0..d {
                let r = shift.apply_adjoint(j, f)?.norm();
                max_residual = max_residual.max(r);
                if r > residual_tol * f.norm().max(1.0) {
                    return Err(Error::ModelPrecondition(format!(
                        "kernel basis function on class of {:?} has adjoint residual {r} \
                         on axis {}",
                        p.vertex(b.rep)?.coords,
                        j + 1
                    )));
                }
            }
        }
    }
    // branching-data bounds: every branch vertex contributes its surplus to
    // the lower bound; the upper bound multiplies the child-front sizes
    let mut lo = 1usize;
    let mut hi = 1usize;
    for j in 0..d {
        let f = p.factor(j)?;
        let mut front = 0usize;
        for b in f.branch_vertices() {
            let c = f.children(b)?.len();
            lo += c - 1;
            front += c;
        }
        hi *= front + 1;
    }
    debug_assert!(
        lo <= dim && dim <= hi,
        "kernel dimension {dim} outside [{lo}, {hi}]"
    );
    Ok(KernelBasis {
        blocks,
        dim,
        bounds: (lo, hi),
        // + 0.0 folds a possible negative zero from the norm chain
        max_adjoint_residual: max_residual + 0.0,
    })
}

/// Joint kernel of a one-variable shift (a single-factor product).
pub fn onevar_kernel(shift: &Multishift, residual_tol: f64) -> Result<KernelBasis> {
    if shift.dim() != 1 {
        return Err(Error::Unsupported(format!(
            "one-variable kernel called on a {}-fold product",
            shift.dim()
        )));
    }
    joint_kernel(shift, residual_tol)
}

#[derive(Clone, Debug, Serialize)]
pub struct WanderingReport {
    /// Vertices of the truncation, i.e. the rank a generating kernel attains.
    pub expected: usize,
    pub rank: usize,
    pub columns: usize,
    pub depth: u32,
}

/// Span test for the kernel: collect `S^alpha f` for every kernel basis
/// function and every exponent that stays within depth `n`, and compare the
/// numerical rank of the column family with the vertex count of the
/// truncation.
pub fn wandering_rank_check(
    shift: &Multishift,
    basis: &KernelBasis,
    n: u32,
    rank_tol: f64,
) -> Result<WanderingReport> {
    let p = shift.product();
    let verts = p.vertices_up_to(n)?;
    let row_of: std::collections::HashMap<PVertexId, usize> =
        verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut columns: Vec<VertexFunction> = Vec::new();
    let d = p.dim();
    for (_, f) in basis.functions() {
        let gen = f
            .support()
            .first()
            .map(|&v| p.vertex(v).map(|pv| pv.total))
            .transpose()?
            .unwrap_or(0);
        if gen > n {
            // shifts only push deeper, so this function cannot meet V_{<=n}
            continue;
        }
        let max_extra = n - gen;
        for alpha in exponents_up_to(d, max_extra) {
            let mut g = VertexFunction::new();
            for (v, x) in f.iter() {
                g.add_scaled(&shift.power_apply(&alpha, v)?, x);
            }
            columns.push(g);
        }
    }
    let mut mat = DMatrix::zeros(verts.len(), columns.len());
    for (c, g) in columns.iter().enumerate() {
        for (v, x) in g.iter() {
            mat[(row_of[&v], c)] = x;
        }
    }
    Ok(WanderingReport {
        expected: verts.len(),
        rank: svd_rank(&mat, rank_tol),
        columns: columns.len(),
        depth: n,
    })
}

/// All multi-indices of the given length with total degree at most `n`,
/// graded lexicographic.
pub fn exponents_up_to(d: usize, n: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for total in 0..=n {
        append_exponents_of_degree(d, total, &mut Vec::new(), &mut out);
    }
    out
}

/// All multi-indices of the given length with total degree exactly `n`.
pub fn exponents_of_degree(d: usize, n: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    append_exponents_of_degree(d, n, &mut Vec::new(), &mut out);
    out
}

fn append_exponents_of_degree(d: usize, rest: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if d == 1 {
        prefix.push(rest);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for first in (0..=rest).rev() {
        prefix.push(first);
        append_exponents_of_degree(d - 1, rest - first, prefix, out);
        prefix.pop();
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelConditionWitness {
    /// 1-based axis of the failing adjoint.
    pub axis: usize,
    pub alpha: Vec<u32>,
    pub block: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelConditionReport {
    pub holds: bool,
    pub alpha_budget: u32,
    pub witnesses: Vec<KernelConditionWitness>,
}

/// Check that the kernel stays inside `ker S_j^*` after applying powers of
/// the toral Cauchy dual that avoid axis `j`. This is the compatibility
/// condition under which the tuple admits the classical analytic model on
/// its kernel.
pub fn kernel_condition_check(
    shift: &Multishift,
    basis: &KernelBasis,
    alpha_budget: u32,
    tol: f64,
) -> Result<KernelConditionReport> {
    let dual_system = shift.cauchy_dual(DualMode::Toral)?;
    let dual = Multishift::new(shift.product(), dual_system)?;
    let d = shift.dim();
    let mut witnesses = Vec::new();
    for alpha in exponents_up_to(d, alpha_budget) {
        let total: u32 = alpha.iter().sum();
        if total == 0 {
            continue;
        }
        for j in 0..d {
            if alpha[j] != 0 {
                continue;
            }
            for (block, f) in basis.functions() {
                let mut g = VertexFunction::new();
                for (v, x) in f.iter() {
                    g.add_scaled(&dual.power_apply(&alpha, v)?, x);
                }
                let r = shift.apply_adjoint(j, &g)?.norm();
                if r > tol * g.norm().max(1.0) {
                    witnesses.push(KernelConditionWitness {
                        axis: j + 1,
                        alpha: alpha.clone(),
                        block,
                        residual: r,
                    });
                }
            }
        }
    }
    Ok(KernelConditionReport {
        holds: witnesses.is_empty(),
        alpha_budget,
        witnesses,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelCoefficient {
    pub alpha: Vec<u32>,
    pub beta: Vec<u32>,
    /// Gram block between the dual powers of the kernel basis functions.
    pub matrix: Vec<Vec<f64>>,
    pub in_band: bool,
    pub norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelCoefficients {
    /// Per-axis band widths (the factor branching indices).
    pub band: Vec<u32>,
    pub dim: usize,
    pub entries: Vec<ModelCoefficient>,
    pub max_off_band_norm: f64,
}

/// Coefficient table of the analytic model kernel: for every exponent pair
/// within the budget, the Gram matrix of the corresponding dual powers of
/// the kernel basis. Entries vanish outside the band `|alpha_j - beta_j| <=
/// branching index of factor j` on every axis; the attained off-band mass is
/// reported so the caller can see the prediction hold.
pub fn model_coefficients(
    shift: &Multishift,
    basis: &KernelBasis,
    alpha_budget: u32,
    condition_tol: f64,
) -> Result<ModelCoefficients> {
    let p = shift.product();
    let band = p.certified_branching()?;
    let infima = shift.invertibility_infima(p.depth_budget().saturating_sub(1).min(
        // deep enough to be meaningful, shallow enough to be cheap
        p.depth_budget().saturating_sub(1),
    ))?;
    if infima.per_axis.iter().any(|&x| x <= 0.0) {
        return Err(Error::NotLeftInvertible(
            "an axis child-sum infimum vanishes on the materialized window".into(),
        ));
    }
    let dual_system = shift.cauchy_dual(DualMode::Toral)?;
    let dual = Multishift::new(p, dual_system)?;
    let dual_check = dual.commuting_check(p.depth_budget(), 1e-10)?;
    if let Some(v) = dual_check.violation {
        return Err(Error::ModelPrecondition(format!(
            "toral Cauchy dual is not commuting at {:?} on axes {:?}",
            v.vertex, v.axes
        )));
    }
    let condition = kernel_condition_check(shift, basis, alpha_budget, condition_tol)?;
    if !condition.holds {
        let w = &condition.witnesses[0];
        return Err(Error::ModelPrecondition(format!(
            "kernel is not adjoint-compatible: axis {} residual {} at exponent {:?}",
            w.axis, w.residual, w.alpha
        )));
    }
    let funcs: Vec<&VertexFunction> = basis.functions().map(|(_, f)| f).collect();
    let m = funcs.len();
    let exps = exponents_up_to(p.dim(), alpha_budget);
    let mut powered: Vec<Vec<VertexFunction>> = Vec::with_capacity(exps.len());
    for alpha in &exps {
        let mut row = Vec::with_capacity(m);
        for f in &funcs {
            let mut g = VertexFunction::new();
            for (v, x) in f.iter() {
                g.add_scaled(&dual.power_apply(alpha, v)?, x);
            }
            row.push(g);
        }
        powered.push(row);
    }
    let mut entries = Vec::new();
    let mut max_off_band = 0.0f64;
    for (ai, alpha) in exps.iter().enumerate() {
        for (bi, beta) in exps.iter().enumerate() {
            let mut matrix = vec![vec![0.0; m]; m];
            let mut norm = 0.0f64;
            for k in 0..m {
                for l in 0..m {
                    let x = powered[bi][l].inner(&powered[ai][k]);
                    matrix[k][l] = x;
                    norm += x * x;
                }
            }
            let norm = norm.sqrt();
            let in_band = alpha
                .iter()
                .zip(beta)
                .zip(&band)
                .all(|((&a, &b), &k)| a.abs_diff(b) <= k);
            if !in_band {
                max_off_band = max_off_band.max(norm);
            }
            entries.push(ModelCoefficient {
                alpha: alpha.clone(),
                beta: beta.clone(),
                matrix,
                in_band,
                norm,
            });
        }
    }
    Ok(ModelCoefficients {
        band,
        dim: m,
        entries,
        max_off_band_norm: max_off_band,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockCoefficients {
    /// 1-based axes of the block's slice.
    pub axes: Vec<usize>,
    pub rep: Vec<u32>,
    pub entries: Vec<(Vec<u32>, f64)>,
}

/// Reproducing-kernel coefficients of the power-family model: within each
/// kernel block the coefficient at exponent `alpha` is the reciprocal of the
/// block moment `||S^alpha e_rep||^2`, which the power family keeps constant
/// across the block's class.
pub fn power_family_coefficients(
    shift: &Multishift,
    basis: &KernelBasis,
    alpha_budget: u32,
) -> Result<Vec<BlockCoefficients>> {
    use crate::weights::WeightSystem;
    if !matches!(shift.system(), WeightSystem::Power { .. }) {
        return Err(Error::Unsupported(
            "closed-form model coefficients are specific to the power family".into(),
        ));
    }
    let p = shift.product();
    let mut out = Vec::new();
    for b in &basis.blocks {
        let mut entries = Vec::new();
        for alpha in exponents_up_to(p.dim(), alpha_budget) {
            let m = shift
                .moment_closed(&alpha, b.rep)?
                .expect("power family has closed moments");
            entries.push((alpha, 1.0 / m));
        }
        out.push(BlockCoefficients {
            axes: b.axes.iter().map(|&j| j + 1).collect(),
            rep: p.vertex(b.rep)?.coords.clone(),
            entries,
        });
    }
    Ok(out)
}

/// Serializable summary of a kernel basis.
#[derive(Clone, Debug, Serialize)]
pub struct KernelReport {
    #[serde(rename = "dimE")]
    pub dim_e: usize,
    pub bounds: (usize, usize),
    pub max_adjoint_residual: f64,
    pub blocks: Vec<KernelBlockReport>,
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelBlockReport {
    /// 1-based axes.
    #[serde(rename = "F")]
    pub axes: Vec<usize>,
    #[serde(rename = "u")]
    pub rep: Vec<u32>,
    pub dim: usize,
    pub basis: Vec<Vec<BasisEntry>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BasisEntry {
    pub vertex: Vec<u32>,
    pub value: f64,
}

pub fn kernel_report(p: &ProductTree, basis: &KernelBasis) -> Result<KernelReport> {
    let mut blocks = Vec::new();
    for b in &basis.blocks {
        let mut vecs = Vec::new();
        for f in &b.basis {
            let mut entries: Vec<BasisEntry> = f
                .iter()
                .map(|(v, x)| {
                    Ok(BasisEntry {
                        vertex: p.vertex(v)?.coords.clone(),
                        value: x,
                    })
                })
                .collect::<Result<_>>()?;
            entries.sort_by(|a, b| a.vertex.cmp(&b.vertex));
            vecs.push(entries);
        }
        blocks.push(KernelBlockReport {
            axes: b.axes.iter().map(|&j| j + 1).collect(),
            rep: p.vertex(b.rep)?.coords.clone(),
            dim: b.basis.len(),
            basis: vecs,
        });
    }
    Ok(KernelReport {
        dim_e: basis.dim,
        bounds: basis.bounds,
        max_adjoint_residual: basis.max_adjoint_residual,
        blocks,
    })
}
