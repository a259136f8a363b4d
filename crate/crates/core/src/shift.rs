//! The multishift tuple itself: the coordinate operators acting on sparse
//! vertex functions, their powers and moments, commuting diagnostics, Cauchy
//! duals, balance detection, and polar factorizations.
//!
//! Weights are real and positive. That loses no generality for the
//! quantities computed here: a diagonal unitary conjugation moves any
//! complex weight system to its modulus without changing moments, kernels,
//! or commutators, so every invariant this module reports is blind to the
//! phases.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::numeric::{product_stable, rel_close_tight, rising};
use crate::product::{PVertexId, ProductTree};
use crate::weights::{ExplicitEntry, WeightSystem};
use crate::Result;

/// Finitely supported function on the product vertices.
#[derive(Clone, Debug, Default)]
pub struct VertexFunction(HashMap<PVertexId, f64>);

impl VertexFunction {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn delta(v: PVertexId) -> Self {
        VertexFunction(HashMap::from([(v, 1.0)]))
    }

    pub fn from_entries<I: IntoIterator<Item = (PVertexId, f64)>>(entries: I) -> Self {
        let mut f = Self::new();
        for (v, x) in entries {
            f.add(v, x);
        }
        f
    }

    pub fn get(&self, v: PVertexId) -> f64 {
        self.0.get(&v).copied().unwrap_or(0.0)
    }

    pub fn add(&mut self, v: PVertexId, x: f64) {
        if x != 0.0 {
            *self.0.entry(v).or_insert(0.0) += x;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for x in self.0.values_mut() {
            *x *= s;
        }
    }

    pub fn add_scaled(&mut self, other: &VertexFunction, s: f64) {
        for (&v, &x) in &other.0 {
            self.add(v, s * x);
        }
    }

    pub fn inner(&self, other: &VertexFunction) -> f64 {
        let (small, large) = if self.0.len() <= other.0.len() {
            (&self.0, &other.0)
        } else {
            (&other.0, &self.0)
        };
        small
            .iter()
            .map(|(v, x)| x * large.get(v).copied().unwrap_or(0.0))
            .sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.values().map(|x| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.values().all(|&x| x == 0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (PVertexId, f64)> + '_ {
        self.0.iter().map(|(&v, &x)| (v, x))
    }

    /// Support in id order, zero entries dropped.
    pub fn support(&self) -> Vec<PVertexId> {
        let mut s: Vec<PVertexId> = self
            .0
            .iter()
            .filter(|(_, &x)| x != 0.0)
            .map(|(&v, _)| v)
            .collect();
        s.sort_unstable();
        s
    }
}

/// Which Cauchy dual / polar factorization to take: per-axis or joint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualMode {
    Toral,
    Spherical,
}

#[derive(Clone, Debug, Serialize)]
pub struct CommutingViolation {
    /// Coordinates of the offending vertex.
    pub vertex: Vec<u32>,
    /// Axis pair, 1-based.
    pub axes: (usize, usize),
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CommutingReport {
    pub commuting: bool,
    pub violation: Option<CommutingViolation>,
}

/// Window infima of the per-axis and joint left-invertibility sums. These
/// are estimates over the materialized region: a finite window can witness
/// failure of left invertibility but can only suggest success.
#[derive(Clone, Debug, Serialize)]
pub struct Infima {
    pub per_axis: Vec<f64>,
    pub joint: f64,
    pub depth: u32,
}

#[derive(Clone, Debug, Serialize)]
pub struct BalanceViolation {
    pub generation: u32,
    /// 1-based axis for toral violations, absent for spherical ones.
    pub axis: Option<usize>,
    pub vertex: Vec<u32>,
    pub value: f64,
    pub expected: f64,
}

/// Outcome of scanning the per-generation child-weight sums for constancy.
#[derive(Clone, Debug, Serialize)]
pub struct BalanceReport {
    pub torally_balanced: bool,
    pub spherically_balanced: bool,
    /// `c[t][j]` when torally balanced: the constant value of the axis-`j`
    /// sum on generation `t`.
    pub toral_budget: Option<Vec<Vec<f64>>>,
    /// `C[t]` when spherically balanced.
    pub spherical_budget: Option<Vec<f64>>,
    pub toral_violation: Option<BalanceViolation>,
    pub spherical_violation: Option<BalanceViolation>,
    pub depth: u32,
}

/// Diagonal part of a polar factorization.
#[derive(Clone, Debug)]
pub enum PolarDiagonal {
    /// One diagonal per axis: entry `[j][v]` is the axis-`j` child-weight
    /// norm at `v` (NaN where the budget hides the children).
    PerAxis(Vec<Vec<f64>>),
    /// A single diagonal: the square root of the joint child-weight sum.
    Joint(Vec<f64>),
}

/// `S_j = (isometry_j) . D`: the isometric part is itself a weight system
/// on the same product.
#[derive(Clone, Debug)]
pub struct PolarFactorization {
    pub isometry: WeightSystem,
    pub diagonal: PolarDiagonal,
    pub mode: DualMode,
}

/// A weight system resolved against a concrete product: per-axis rows of
/// weights, one slot per materialized vertex. This is the object all
/// operator computations run on.
pub struct Multishift<'a> {
    product: &'a ProductTree,
    system: WeightSystem,
    /// `rows[j][v]` = axis-`j` weight at vertex `v`; NaN when the coordinate
    /// is at the factor root or an explicit entry is missing.
    rows: Vec<Vec<f64>>,
    commuting_cache: OnceLock<bool>,
}

impl<'a> Multishift<'a> {
    pub fn new(product: &'a ProductTree, system: WeightSystem) -> Result<Self> {
        let d = product.dim();
        system.validate(d)?;
        let n = product.vertex_count();
        let explicit: Option<HashMap<(usize, &[u32]), f64>> = match &system {
            WeightSystem::Explicit { entries } => {
                let mut map = HashMap::with_capacity(entries.len());
                for e in entries {
                    if map.insert((e.axis, e.vertex.as_slice()), e.value).is_some() {
                        return Err(Error::InvalidWeights(format!(
                            "duplicate explicit weight for axis {} at vertex {:?}",
                            e.axis + 1,
                            e.vertex
                        )));
                    }
                }
                Some(map)
            }
            _ => None,
        };
        let mut rows = vec![vec![f64::NAN; n]; d];
        for v in 0..n as PVertexId {
            let pv = product.vertex(v)?;
            let t = pv.total.wrapping_sub(1);
            for (j, row) in rows.iter_mut().enumerate() {
                if pv.coords[j] == 0 {
                    continue;
                }
                let sib = product.factor(j)?.siblings(pv.coords[j])?.len() as f64;
                row[v as usize] = match &system {
                    WeightSystem::Explicit { .. } => explicit
                        .as_ref()
                        .unwrap()
                        .get(&(j, pv.coords.as_slice()))
                        .copied()
                        .unwrap_or(f64::NAN),
                    WeightSystem::TorallyBalanced { c } => (c.value(t, j, d)? / sib).sqrt(),
                    WeightSystem::SphericallyBalanced { c } => {
                        let ct = *c.get(t as usize).ok_or(Error::WeightTableTooShort {
                            needed: t,
                            len: c.len(),
                        })?;
                        (ct / sib * pv.alpha[j] as f64 / (t as f64 + d as f64)).sqrt()
                    }
                    WeightSystem::Power { a } => {
                        (pv.alpha[j] as f64 / ((t as f64 + a) * sib)).sqrt()
                    }
                };
            }
        }
        Ok(Multishift {
            product,
            system,
            rows,
            commuting_cache: OnceLock::new(),
        })
    }

    pub fn product(&self) -> &ProductTree {
        self.product
    }

    pub fn system(&self) -> &WeightSystem {
        &self.system
    }

    pub fn dim(&self) -> usize {
        self.product.dim()
    }

    /// Axis-`j` weight at `v` (the coefficient the shift attaches when it
    /// lands on `v` coming up axis `j`).
    pub fn weight(&self, j: usize, v: PVertexId) -> Result<f64> {
        let pv = self.product.vertex(v)?;
        let row = self.rows.get(j).ok_or(Error::AxisOutOfRange {
            axis: j,
            d: self.dim(),
        })?;
        if pv.coords[j] == 0 {
            return Err(Error::InvalidWeights(format!(
                "axis {} carries no weight at {:?}: coordinate is at the factor root",
                j + 1,
                pv.coords
            )));
        }
        let w = row[v as usize];
        if w.is_nan() {
            return Err(Error::MissingWeight {
                axis: j + 1,
                vertex: format!("{:?}", pv.coords),
            });
        }
        Ok(w)
    }

    /// `||S_j e_v||^2`: sum of squared axis-`j` weights over the children.
    pub fn child_sum(&self, j: usize, v: PVertexId) -> Result<f64> {
        let mut out = 0.0;
        for w in self.product.children_along(v, j)? {
            let x = self.weight(j, w)?;
            out += x * x;
        }
        Ok(out)
    }

    /// Joint child-weight sum at `v`: sum of `child_sum` over all axes.
    pub fn joint_sum(&self, v: PVertexId) -> Result<f64> {
        let mut out = 0.0;
        for j in 0..self.dim() {
            out += self.child_sum(j, v)?;
        }
        Ok(out)
    }

    /// Apply the axis-`j` shift to a vertex function.
    pub fn apply(&self, j: usize, f: &VertexFunction) -> Result<VertexFunction> {
        let mut out = VertexFunction::new();
        for (v, x) in f.iter() {
            for w in self.product.children_along(v, j)? {
                out.add(w, x * self.weight(j, w)?);
            }
        }
        Ok(out)
    }

    /// Apply the adjoint of the axis-`j` shift: each vertex moves to its
    /// axis-`j` parent scaled by its own weight, and vanishes at a root
    /// coordinate.
    pub fn apply_adjoint(&self, j: usize, f: &VertexFunction) -> Result<VertexFunction> {
        let mut out = VertexFunction::new();
        for (v, x) in f.iter() {
            if let Some(p) = self.product.parent_along(v, j)? {
                out.add(p, x * self.weight(j, v)?);
            }
        }
        Ok(out)
    }

    /// Weight product along `n` steps up axis `j` starting at `y`.
    fn beta(&self, j: usize, mut y: PVertexId, n: u32) -> Result<f64> {
        let mut out = 1.0;
        for _ in 0..n {
            out *= self.weight(j, y)?;
            y = self
                .product
                .parent_along(y, j)?
                .expect("beta path stays below the starting depth");
        }
        Ok(out)
    }

    fn ensure_commuting(&self) -> Result<()> {
        if let Some(&ok) = self.commuting_cache.get() {
            if ok {
                return Ok(());
            }
        } else {
            let report = self.commuting_check(self.product.depth_budget(), 1e-12)?;
            let _ = self.commuting_cache.set(report.commuting);
            if report.commuting {
                return Ok(());
            }
        }
        Err(Error::NotCommuting(
            "power application is only defined for commuting weights".into(),
        ))
    }

    /// `S^alpha e_v` in closed form: one term per target vertex, with
    /// coefficient the product over axes of the weight run connecting the
    /// target back to `v`. Exponents touching more than one axis require
    /// commuting weights, otherwise the result would depend on the
    /// application order; powers of a single coordinate never do.
    pub fn power_apply(&self, alpha: &[u32], v: PVertexId) -> Result<VertexFunction> {
        if alpha.iter().filter(|&&n| n > 0).count() > 1 {
            self.ensure_commuting()?;
        }
        let mut out = VertexFunction::new();
        for w in self.product.children_multi(v, alpha)? {
            let mut coeff = 1.0;
            let mut y = w;
            for (j, &steps) in alpha.iter().enumerate() {
                coeff *= self.beta(j, y, steps)?;
                for _ in 0..steps {
                    y = self
                        .product
                        .parent_along(y, j)?
                        .expect("pullback stays on the path to v");
                }
            }
            debug_assert_eq!(y, v);
            out.add(w, coeff);
        }
        Ok(out)
    }

    /// `S^alpha f` by iterated single-axis applications in the given axis
    /// order (used to cross-check the closed form).
    pub fn power_apply_iterated(
        &self,
        alpha: &[u32],
        f: &VertexFunction,
        order: &[usize],
    ) -> Result<VertexFunction> {
        let mut g = f.clone();
        for &j in order {
            let steps = *alpha.get(j).ok_or(Error::AxisOutOfRange {
                axis: j,
                d: self.dim(),
            })?;
            for _ in 0..steps {
                g = self.apply(j, &g)?;
            }
        }
        Ok(g)
    }

    /// Moment `||S^alpha e_v||^2` by brute force.
    pub fn moment_brute(&self, alpha: &[u32], v: PVertexId) -> Result<f64> {
        Ok(self.power_apply(alpha, v)?.norm_sq())
    }

    /// Moment in closed form, available for the table-driven families.
    /// The closed forms depend only on depths and the budget tables, so they
    /// remain valid beyond the materialized region.
    pub fn moment_closed(&self, alpha: &[u32], v: PVertexId) -> Result<Option<f64>> {
        let pv = self.product.vertex(v)?;
        if alpha.len() != self.dim() {
            return Err(Error::IndexLengthMismatch {
                got: alpha.len(),
                d: self.dim(),
            });
        }
        let t = pv.total;
        let n: u32 = alpha.iter().sum();
        let d = self.dim();
        match &self.system {
            WeightSystem::Power { a } => {
                let num: f64 = alpha
                    .iter()
                    .zip(&pv.alpha)
                    .map(|(&aj, &vj)| rising(vj as f64 + 1.0, aj))
                    .product();
                Ok(Some(num / rising(t as f64 + a, n)))
            }
            WeightSystem::SphericallyBalanced { c } => {
                if (t + n) as usize > c.len() {
                    return Err(Error::WeightTableTooShort {
                        needed: t + n - 1,
                        len: c.len(),
                    });
                }
                let num: f64 = alpha
                    .iter()
                    .zip(&pv.alpha)
                    .map(|(&aj, &vj)| rising(vj as f64 + 1.0, aj))
                    .product();
                let budget =
                    product_stable((0..n).map(|p| c[(t + p) as usize] / (t + p + d as u32) as f64));
                Ok(Some(num * budget))
            }
            WeightSystem::TorallyBalanced { c } => {
                let mut factors = Vec::new();
                let mut offset = 0;
                for (j, &aj) in alpha.iter().enumerate() {
                    for k in 0..aj {
                        factors.push(c.value(t + offset + k, j, d)?);
                    }
                    offset += aj;
                }
                Ok(Some(product_stable(factors)))
            }
            WeightSystem::Explicit { .. } => Ok(None),
        }
    }

    /// Moment `||S^alpha e_v||^2`, closed form when the family has one,
    /// brute force otherwise.
    pub fn moment(&self, alpha: &[u32], v: PVertexId) -> Result<f64> {
        match self.moment_closed(alpha, v)? {
            Some(m) => Ok(m),
            None => self.moment_brute(alpha, v),
        }
    }

    /// Check the pairwise commuting identity over all materialized vertices
    /// of total depth at most `depth`: for every vertex with two non-root
    /// coordinates `i != j`, the two-step weight products agree.
    pub fn commuting_check(&self, depth: u32, tol: f64) -> Result<CommutingReport> {
        let d = self.dim();
        for u in 0..self.product.vertex_count() as PVertexId {
            let pu = self.product.vertex(u)?;
            if pu.total > depth {
                continue;
            }
            for i in 0..d {
                for j in (i + 1)..d {
                    if pu.coords[i] == 0 || pu.coords[j] == 0 {
                        continue;
                    }
                    let pi = self.product.parent_along(u, i)?.unwrap();
                    let pj = self.product.parent_along(u, j)?.unwrap();
                    let lhs = self.weight(j, u)? * self.weight(i, pj)?;
                    let rhs = self.weight(i, u)? * self.weight(j, pi)?;
                    if !rel_close_tight(lhs, rhs, tol) {
                        return Ok(CommutingReport {
                            commuting: false,
                            violation: Some(CommutingViolation {
                                vertex: pu.coords.clone(),
                                axes: (i + 1, j + 1),
                                lhs,
                                rhs,
                            }),
                        });
                    }
                }
            }
        }
        Ok(CommutingReport {
            commuting: true,
            violation: None,
        })
    }

    /// Check the stronger condition under which the tuple commutes with all
    /// the adjoints of the other axes: pairwise commuting plus, for every
    /// vertex `u` with a non-root coordinate on axis `i` whose axis-`i`
    /// parent `v` has a non-root coordinate on axis `j != i`,
    /// `w_j(v) w_i(par_j(u)) = w_i(u) w_j(u)`.
    pub fn doubly_commuting_check(&self, depth: u32, tol: f64) -> Result<CommutingReport> {
        let base = self.commuting_check(depth, tol)?;
        if !base.commuting {
            return Ok(base);
        }
        let d = self.dim();
        for u in 0..self.product.vertex_count() as PVertexId {
            let pu = self.product.vertex(u)?;
            if pu.total > depth {
                continue;
            }
            for i in 0..d {
                if pu.coords[i] == 0 {
                    continue;
                }
                let v = self.product.parent_along(u, i)?.unwrap();
                for j in 0..d {
                    if j == i || self.product.vertex(v)?.coords[j] == 0 {
                        continue;
                    }
                    let pj = self.product.parent_along(u, j)?.unwrap();
                    let lhs = self.weight(j, v)? * self.weight(i, pj)?;
                    let rhs = self.weight(i, u)? * self.weight(j, u)?;
                    if !rel_close_tight(lhs, rhs, tol) {
                        return Ok(CommutingReport {
                            commuting: false,
                            violation: Some(CommutingViolation {
                                vertex: pu.coords.clone(),
                                axes: (i + 1, j + 1),
                                lhs,
                                rhs,
                            }),
                        });
                    }
                }
            }
        }
        Ok(CommutingReport {
            commuting: true,
            violation: None,
        })
    }

    /// Window infima of the left-invertibility sums over all vertices of
    /// total depth at most `depth` (which must leave the children visible).
    pub fn invertibility_infima(&self, depth: u32) -> Result<Infima> {
        if depth >= self.product.depth_budget() {
            return Err(Error::DepthBudgetExceeded {
                needed: depth + 1,
                budget: self.product.depth_budget(),
            });
        }
        let d = self.dim();
        let mut per_axis = vec![f64::INFINITY; d];
        let mut joint = f64::INFINITY;
        for v in self.product.vertices_up_to(depth)? {
            let mut total = 0.0;
            for (j, inf) in per_axis.iter_mut().enumerate() {
                let s = self.child_sum(j, v)?;
                *inf = inf.min(s);
                total += s;
            }
            joint = joint.min(total);
        }
        Ok(Infima {
            per_axis,
            joint,
            depth,
        })
    }

    /// The Cauchy dual weight system: each weight is divided by the child
    /// sum of its parent, per axis in toral mode and jointly in spherical
    /// mode. The dual of the dual restores the original system.
    pub fn cauchy_dual(&self, mode: DualMode) -> Result<WeightSystem> {
        let d = self.dim();
        let mut entries = Vec::new();
        for w in 0..self.product.vertex_count() as PVertexId {
            let pw = self.product.vertex(w)?;
            for j in 0..d {
                if pw.coords[j] == 0 {
                    continue;
                }
                let v = self.product.parent_along(w, j)?.unwrap();
                let denom = match mode {
                    DualMode::Toral => self.child_sum(j, v)?,
                    DualMode::Spherical => self.joint_sum(v)?,
                };
                if denom <= 0.0 {
                    return Err(Error::NotLeftInvertible(format!(
                        "child sum vanishes at {:?}",
                        self.product.vertex(v)?.coords
                    )));
                }
                entries.push(ExplicitEntry {
                    axis: j,
                    vertex: pw.coords.clone(),
                    value: self.weight(j, w)? / denom,
                });
            }
        }
        entries.sort_by(|a, b| (a.axis, &a.vertex).cmp(&(b.axis, &b.vertex)));
        Ok(WeightSystem::Explicit { entries })
    }

    /// Scan generations `0..=depth` for constancy of the child sums: per
    /// axis (toral balance) and joint (spherical balance).
    pub fn balance_detect(&self, depth: u32, tol: f64) -> Result<BalanceReport> {
        if depth >= self.product.depth_budget() {
            return Err(Error::DepthBudgetExceeded {
                needed: depth + 1,
                budget: self.product.depth_budget(),
            });
        }
        let d = self.dim();
        let mut toral_budget: Vec<Vec<f64>> = Vec::new();
        let mut spherical_budget: Vec<f64> = Vec::new();
        let mut toral_violation = None;
        let mut spherical_violation = None;
        'toral: for t in 0..=depth {
            let gen = self.product.generation(t)?;
            let mut row = Vec::with_capacity(d);
            for j in 0..d {
                row.push(self.child_sum(j, gen[0])?);
            }
            for &v in gen {
                for (j, &expected) in row.iter().enumerate() {
                    let s = self.child_sum(j, v)?;
                    if !rel_close_tight(s, expected, tol) {
                        toral_violation = Some(BalanceViolation {
                            generation: t,
                            axis: Some(j + 1),
                            vertex: self.product.vertex(v)?.coords.clone(),
                            value: s,
                            expected,
                        });
                        break 'toral;
                    }
                }
            }
            toral_budget.push(row);
        }
        'spherical: for t in 0..=depth {
            let gen = self.product.generation(t)?;
            let expected = self.joint_sum(gen[0])?;
            for &v in gen {
                let s = self.joint_sum(v)?;
                if !rel_close_tight(s, expected, tol) {
                    spherical_violation = Some(BalanceViolation {
                        generation: t,
                        axis: None,
                        vertex: self.product.vertex(v)?.coords.clone(),
                        value: s,
                        expected,
                    });
                    break 'spherical;
                }
            }
            spherical_budget.push(expected);
        }
        Ok(BalanceReport {
            torally_balanced: toral_violation.is_none(),
            spherically_balanced: spherical_violation.is_none(),
            toral_budget: toral_violation.is_none().then_some(toral_budget),
            spherical_budget: spherical_violation.is_none().then_some(spherical_budget),
            toral_violation,
            spherical_violation,
            depth,
        })
    }

    /// Polar factorization `S_j = U_j D_j` (toral mode: `D_j` diagonal with
    /// the axis child norms, requires the toral Cauchy dual to commute) or
    /// `S_j = T_j D` (spherical mode: one diagonal with the joint child
    /// norms, requires the joint sum to be constant across each vertex's
    /// parents).
    pub fn polar_decompose(&self, mode: DualMode) -> Result<PolarFactorization> {
        let d = self.dim();
        let n = self.product.vertex_count();
        match mode {
            DualMode::Toral => {
                let dual = self.cauchy_dual(DualMode::Toral)?;
                let dual_shift = Multishift::new(self.product, dual)?;
                let check = dual_shift.commuting_check(self.product.depth_budget(), 1e-10)?;
                if let Some(v) = check.violation {
                    return Err(Error::PolarPrecondition(format!(
                        "toral Cauchy dual is not commuting at {:?} on axes {:?}",
                        v.vertex, v.axes
                    )));
                }
            }
            DualMode::Spherical => {
                // the joint sum must look the same from every parent of a vertex
                for v in 0..n as PVertexId {
                    let pv = self.product.vertex(v)?;
                    let mut seen: Option<(f64, usize)> = None;
                    for j in 0..d {
                        if pv.coords[j] == 0 {
                            continue;
                        }
                        let p = self.product.parent_along(v, j)?.unwrap();
                        let s = self.joint_sum(p)?;
                        if let Some((s0, j0)) = seen {
                            if !rel_close_tight(s, s0, 1e-10) {
                                return Err(Error::PolarPrecondition(format!(
                                    "joint child sum differs across the parents of {:?}: \
                                     {s0} via axis {}, {s} via axis {}",
                                    pv.coords,
                                    j0 + 1,
                                    j + 1
                                )));
                            }
                        } else {
                            seen = Some((s, j + 1));
                        }
                    }
                }
            }
        }
        let mut entries = Vec::new();
        for w in 0..n as PVertexId {
            let pw = self.product.vertex(w)?;
            for j in 0..d {
                if pw.coords[j] == 0 {
                    continue;
                }
                let v = self.product.parent_along(w, j)?.unwrap();
                let denom = match mode {
                    DualMode::Toral => self.child_sum(j, v)?.sqrt(),
                    DualMode::Spherical => self.joint_sum(v)?.sqrt(),
                };
                entries.push(ExplicitEntry {
                    axis: j,
                    vertex: pw.coords.clone(),
                    value: self.weight(j, w)? / denom,
                });
            }
        }
        entries.sort_by(|a, b| (a.axis, &a.vertex).cmp(&(b.axis, &b.vertex)));
        let isometry = WeightSystem::Explicit { entries };
        let diagonal = match mode {
            DualMode::Toral => {
                let mut diags = vec![vec![f64::NAN; n]; d];
                for v in 0..n as PVertexId {
                    if self.product.vertex(v)?.total < self.product.depth_budget() {
                        for (j, diag) in diags.iter_mut().enumerate() {
                            diag[v as usize] = self.child_sum(j, v)?.sqrt();
                        }
                    }
                }
                PolarDiagonal::PerAxis(diags)
            }
            DualMode::Spherical => {
                let mut diag = vec![f64::NAN; n];
                for v in 0..n as PVertexId {
                    if self.product.vertex(v)?.total < self.product.depth_budget() {
                        diag[v as usize] = self.joint_sum(v)?.sqrt();
                    }
                }
                PolarDiagonal::Joint(diag)
            }
        };
        Ok(PolarFactorization {
            isometry,
            diagonal,
            mode,
        })
    }
}

fn coordinate_hash(salt: u64, tag: u64, coords: &[crate::tree::VertexId]) -> f64 {
    let mut x = 0xcbf29ce484222325u64 ^ salt.wrapping_mul(0x9e3779b97f4a7c15);
    x ^= tag;
    x = x.wrapping_mul(0x100000001b3);
    for &coord in coords {
        x ^= coord as u64 + 0x5851f42d4c957f2d;
        x = x.wrapping_mul(0x100000001b3);
    }
    // splitmix64 finalizer: the fold alone does not avalanche the small
    // coordinate differences into the high bits
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58476d1ce4e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d049bb133111eb);
    x ^= x >> 31;
    1.0 + (x >> 11) as f64 / (1u64 << 53) as f64
}

/// Deterministic explicit weights in `[1, 2)` for every materialized edge,
/// derived from an FNV-style hash of the axis, the child coordinates and the
/// salt. Useful as a reproducible "generic position" fixture: the values
/// satisfy no algebraic relation one would not force by hand; in particular
/// they are not commuting.
pub fn generic_explicit_weights(p: &ProductTree, salt: u64) -> WeightSystem {
    let mut entries = Vec::new();
    for v in 0..p.vertex_count() as PVertexId {
        let pv = p.vertex(v).expect("materialized vertex");
        for (j, &c) in pv.coords.iter().enumerate() {
            if c == 0 {
                continue;
            }
            entries.push(ExplicitEntry {
                axis: j,
                vertex: pv.coords.clone(),
                value: coordinate_hash(salt, j as u64 + 1, &pv.coords),
            });
        }
    }
    WeightSystem::explicit(entries)
}

/// Deterministic commuting explicit weights: each edge weight is the ratio
/// of a positive vertex potential to the potential of the axis parent. Any
/// weight system of this form commutes exactly, because weight products
/// along paths telescope to a ratio of endpoint potentials; the potential
/// here is a hash in `[1, 2)`, so no further relation (double commutativity,
/// balance) survives.
pub fn gradient_explicit_weights(p: &ProductTree, salt: u64) -> WeightSystem {
    let potential = |coords: &[crate::tree::VertexId]| coordinate_hash(salt, 0, coords);
    let mut entries = Vec::new();
    for v in 0..p.vertex_count() as PVertexId {
        let pv = p.vertex(v).expect("materialized vertex");
        for j in 0..p.dim() {
            if pv.coords[j] == 0 {
                continue;
            }
            let parent = p
                .parent_along(v, j)
                .expect("non-root coordinate")
                .expect("has an axis parent");
            let pc = &p.vertex(parent).expect("materialized vertex").coords;
            entries.push(ExplicitEntry {
                axis: j,
                vertex: pv.coords.clone(),
                value: potential(&pv.coords) / potential(pc),
            });
        }
    }
    WeightSystem::explicit(entries)
}
