//! Directed Cartesian products of rooted directed trees.
//!
//! A product vertex is a tuple of factor vertices, one per axis; its edges
//! move exactly one coordinate to a child in that coordinate's factor. The
//! product is materialized breadth-first by total depth up to a budget, with
//! a dense id per coordinate tuple. On top of the raw adjacency this module
//! provides the slice/class combinatorics used by the joint-kernel
//! computation (interior slices, sibling classes and their minimal
//! representatives), the diagonal root component used by the classification
//! pass, and the three-part decomposition available for 2-fold products.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::tree::{BranchingIndex, RootedTree, Tail, TreeSpec, VertexId};
use crate::Result;

/// Dense id of a product vertex.
pub type PVertexId = u32;

#[derive(Clone, Debug)]
pub struct ProductVertex {
    /// Factor vertex ids, one per axis.
    pub coords: Vec<VertexId>,
    /// Depth of each coordinate in its factor.
    pub alpha: Vec<u32>,
    /// Total depth: sum of `alpha`.
    pub total: u32,
}

/// Serializable description of a product: factor generators plus the depth
/// budget to materialize to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductSpec {
    pub factors: Vec<TreeSpec>,
    pub depth_budget: u32,
}

impl ProductSpec {
    pub fn build(&self) -> Result<ProductTree> {
        let factors = self
            .factors
            .iter()
            .map(|s| RootedTree::materialize(s.clone(), self.depth_budget))
            .collect::<Result<Vec<_>>>()?;
        ProductTree::materialize(factors, self.depth_budget)
    }
}

#[derive(Clone, Debug)]
pub struct ProductTree {
    factors: Vec<RootedTree>,
    verts: Vec<ProductVertex>,
    index: HashMap<Vec<VertexId>, PVertexId>,
    generations: Vec<Vec<PVertexId>>,
    depth_budget: u32,
}

impl ProductTree {
    /// Materialize the product of the given factors up to total depth
    /// `depth_budget`. Each factor must itself be materialized at least that
    /// deep, since a single coordinate can absorb the whole total depth.
    pub fn materialize(factors: Vec<RootedTree>, depth_budget: u32) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidTree(
                "a product needs at least one factor".into(),
            ));
        }
        for (j, f) in factors.iter().enumerate() {
            if f.depth_budget() < depth_budget {
                return Err(Error::InvalidTree(format!(
                    "factor {j} is materialized to depth {}, product budget is {depth_budget}",
                    f.depth_budget()
                )));
            }
        }
        let d = factors.len();
        let root = ProductVertex {
            coords: vec![0; d],
            alpha: vec![0; d],
            total: 0,
        };
        let mut tree = ProductTree {
            factors,
            index: HashMap::from([(root.coords.clone(), 0)]),
            verts: vec![root],
            generations: vec![vec![0]],
            depth_budget,
        };
        for t in 0..depth_budget {
            let current = tree.generations[t as usize].clone();
            let mut next = Vec::new();
            for v in current {
                let coords = tree.verts[v as usize].coords.clone();
                for j in 0..d {
                    // children(coord) is materialized: coord depth <= t < factor budget
                    let kids: Vec<VertexId> = tree.factors[j].children(coords[j])?.to_vec();
                    for k in kids {
                        let mut c = coords.clone();
                        c[j] = k;
                        if tree.index.contains_key(&c) {
                            continue;
                        }
                        let id = tree.verts.len() as PVertexId;
                        let mut alpha = tree.verts[v as usize].alpha.clone();
                        alpha[j] += 1;
                        tree.index.insert(c.clone(), id);
                        tree.verts.push(ProductVertex {
                            coords: c,
                            alpha,
                            total: t + 1,
                        });
                        next.push(id);
                    }
                }
            }
            tree.generations.push(next);
        }
        Ok(tree)
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn factor(&self, j: usize) -> Result<&RootedTree> {
        self.factors.get(j).ok_or(Error::AxisOutOfRange {
            axis: j,
            d: self.factors.len(),
        })
    }

    pub fn depth_budget(&self) -> u32 {
        self.depth_budget
    }

    pub fn vertex_count(&self) -> usize {
        self.verts.len()
    }

    pub fn vertex(&self, v: PVertexId) -> Result<&ProductVertex> {
        self.verts.get(v as usize).ok_or(Error::VertexOutOfRange {
            id: v,
            count: self.verts.len(),
        })
    }

    pub fn id_of(&self, coords: &[VertexId]) -> Option<PVertexId> {
        self.index.get(coords).copied()
    }

    pub fn root(&self) -> PVertexId {
        0
    }

    /// Vertices of total depth `t`, in id order.
    pub fn generation(&self, t: u32) -> Result<&[PVertexId]> {
        if t > self.depth_budget {
            return Err(Error::DepthBudgetExceeded {
                needed: t,
                budget: self.depth_budget,
            });
        }
        Ok(&self.generations[t as usize])
    }

    /// All materialized vertices with total depth at most `t`.
    pub fn vertices_up_to(&self, t: u32) -> Result<Vec<PVertexId>> {
        if t > self.depth_budget {
            return Err(Error::DepthBudgetExceeded {
                needed: t,
                budget: self.depth_budget,
            });
        }
        Ok((0..self.verts.len() as PVertexId)
            .filter(|&v| self.verts[v as usize].total <= t)
            .collect())
    }

    fn check_axis(&self, j: usize) -> Result<()> {
        if j < self.factors.len() {
            Ok(())
        } else {
            Err(Error::AxisOutOfRange {
                axis: j,
                d: self.factors.len(),
            })
        }
    }

    /// Children along axis `j`.
    pub fn children_along(&self, v: PVertexId, j: usize) -> Result<Vec<PVertexId>> {
        self.check_axis(j)?;
        let pv = self.vertex(v)?;
        if pv.total >= self.depth_budget {
            return Err(Error::DepthBudgetExceeded {
                needed: pv.total + 1,
                budget: self.depth_budget,
            });
        }
        let mut out = Vec::new();
        let mut coords = pv.coords.clone();
        for &k in self.factors[j].children(pv.coords[j])? {
            coords[j] = k;
            out.push(self.index[&coords]);
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Parent along axis `j`; `None` when the coordinate is already at its
    /// factor root.
    pub fn parent_along(&self, v: PVertexId, j: usize) -> Result<Option<PVertexId>> {
        self.check_axis(j)?;
        let pv = self.vertex(v)?;
        Ok(self.factors[j].parent(pv.coords[j])?.map(|p| {
            let mut coords = pv.coords.clone();
            coords[j] = p;
            self.index[&coords]
        }))
    }

    fn check_index(&self, alpha: &[u32]) -> Result<()> {
        if alpha.len() == self.factors.len() {
            Ok(())
        } else {
            Err(Error::IndexLengthMismatch {
                got: alpha.len(),
                d: self.factors.len(),
            })
        }
    }

    /// Iterated children: all vertices reached from `v` by moving `alpha_j`
    /// steps down axis `j` for every axis.
    pub fn children_multi(&self, v: PVertexId, alpha: &[u32]) -> Result<Vec<PVertexId>> {
        self.check_index(alpha)?;
        let pv = self.vertex(v)?;
        let needed = pv.total + alpha.iter().sum::<u32>();
        if needed > self.depth_budget {
            return Err(Error::DepthBudgetExceeded {
                needed,
                budget: self.depth_budget,
            });
        }
        let mut frontier = vec![v];
        for (j, &steps) in alpha.iter().enumerate() {
            for _ in 0..steps {
                let mut next = Vec::new();
                for u in frontier {
                    next.extend(self.children_along(u, j)?);
                }
                frontier = next;
            }
        }
        frontier.sort_unstable();
        Ok(frontier)
    }

    /// Iterated parent: pull each coordinate up `alpha_j` steps. `None` when
    /// some coordinate is too shallow.
    pub fn parent_multi(&self, v: PVertexId, alpha: &[u32]) -> Result<Option<PVertexId>> {
        self.check_index(alpha)?;
        let pv = self.vertex(v)?;
        let mut coords = pv.coords.clone();
        for (j, &steps) in alpha.iter().enumerate() {
            for _ in 0..steps {
                match self.factors[j].parent(coords[j])? {
                    Some(p) => coords[j] = p,
                    None => return Ok(None),
                }
            }
        }
        Ok(Some(self.index[&coords]))
    }

    fn check_axes_subset(&self, axes: &[usize]) -> Result<()> {
        for w in axes.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidTree(format!(
                    "axis set {axes:?} must be strictly increasing"
                )));
            }
        }
        if let Some(&last) = axes.last() {
            self.check_axis(last)?;
        }
        Ok(())
    }

    /// The interior slice for an axis set: vertices whose coordinate is away
    /// from the factor root exactly on the given axes.
    pub fn interior_slice(&self, axes: &[usize]) -> Result<Vec<PVertexId>> {
        self.check_axes_subset(axes)?;
        Ok((0..self.verts.len() as PVertexId)
            .filter(|&v| {
                let pv = &self.verts[v as usize];
                (0..self.factors.len()).all(|j| (pv.coords[j] != 0) == axes.contains(&j))
            })
            .collect())
    }

    /// Sibling class of `u` over an axis set: replace each coordinate on the
    /// listed axes by any of its siblings. `u` must lie in the interior
    /// slice for those axes.
    pub fn sibling_class(&self, u: PVertexId, axes: &[usize]) -> Result<Vec<PVertexId>> {
        self.check_axes_subset(axes)?;
        let pu = self.vertex(u)?;
        for j in 0..self.factors.len() {
            if (pu.coords[j] != 0) != axes.contains(&j) {
                return Err(Error::NotInInteriorSlice {
                    vertex: format!("{:?}", pu.coords),
                    axes: axes.to_vec(),
                });
            }
        }
        let mut class: Vec<Vec<VertexId>> = vec![pu.coords.clone()];
        for &j in axes {
            let mut next = Vec::new();
            for coords in &class {
                for &s in self.factors[j].siblings(coords[j])? {
                    let mut c = coords.clone();
                    c[j] = s;
                    next.push(c);
                }
            }
            class = next;
        }
        let mut ids: Vec<PVertexId> = class.iter().map(|c| self.index[c]).collect();
        ids.sort_unstable();
        ids.dedup();
        Ok(ids)
    }

    /// Minimal representatives of the sibling classes partitioning the
    /// interior slice of an axis set: the member whose coordinate tuple is
    /// lexicographically smallest, which is the member with the smallest
    /// sibling id on every listed axis.
    pub fn class_representatives(&self, axes: &[usize]) -> Result<Vec<PVertexId>> {
        let slice = self.interior_slice(axes)?;
        let mut reps = Vec::new();
        'outer: for v in slice {
            let pv = &self.verts[v as usize];
            for &j in axes {
                let min_sib = *self.factors[j]
                    .siblings(pv.coords[j])?
                    .iter()
                    .min()
                    .expect("sibling sets are nonempty");
                if pv.coords[j] != min_sib {
                    continue 'outer;
                }
            }
            reps.push(v);
        }
        Ok(reps)
    }

    /// Branching index per factor, queried at the product depth budget.
    pub fn branching_profile(&self) -> Vec<BranchingIndex> {
        self.factors
            .iter()
            .map(|f| f.branching_index(self.depth_budget))
            .collect()
    }

    /// Branching index per factor as plain numbers; errors on the first axis
    /// whose branching cannot be certified within the budget.
    pub fn certified_branching(&self) -> Result<Vec<u32>> {
        self.branching_profile()
            .into_iter()
            .enumerate()
            .map(|(axis, b)| b.known().ok_or(Error::BranchingUncertified { axis }))
            .collect()
    }

    /// The component of the induced diagonal graph containing the root:
    /// vertices reachable by repeatedly moving one step down every axis at
    /// once. Returned as a rooted tree of its own, with a map back to
    /// product vertex ids.
    pub fn tensor_root_component(&self) -> Result<TensorRootComponent> {
        let d = self.factors.len();
        let step = vec![1u32; d];
        let max_depth = self.depth_budget / d as u32;
        let mut product_vertex: Vec<PVertexId> = vec![self.root()];
        let mut component_of: HashMap<PVertexId, VertexId> = HashMap::from([(self.root(), 0)]);
        let mut map = std::collections::BTreeMap::new();
        let mut frontier = vec![self.root()];
        for _ in 0..max_depth {
            let mut next = Vec::new();
            for &v in &frontier {
                let comp_id = component_of[&v];
                let mut kids = Vec::new();
                for w in self.children_multi(v, &step)? {
                    let id = product_vertex.len() as VertexId;
                    product_vertex.push(w);
                    component_of.insert(w, id);
                    kids.push(id);
                    next.push(w);
                }
                map.insert(comp_id, kids);
            }
            frontier = next;
        }
        let tree = RootedTree::materialize(
            TreeSpec::Explicit {
                children: map,
                tail: Tail::Unary,
            },
            max_depth,
        )?;
        debug_assert_eq!(tree.vertex_count(), product_vertex.len());
        Ok(TensorRootComponent {
            tree,
            product_vertex,
            component_of,
        })
    }

    /// Three-part decomposition of a 2-fold product. Each axis contributes a
    /// set `G` of factor vertices below which the factor is a chain (the
    /// factor root when the factor never branches) and the set `W` of their
    /// proper ancestors; the product splits into the slice over `W_1`, the
    /// slice over `W_2` away from `W_1`, and a disjoint union of full
    /// product subtrees rooted at `G_1 x G_2`.
    pub fn two_fold_decomposition(&self) -> Result<TwoFoldDecomposition> {
        if self.factors.len() != 2 {
            return Err(Error::NotTwoFold {
                d: self.factors.len(),
            });
        }
        self.certified_branching()?;
        let mut g: [Vec<VertexId>; 2] = [Vec::new(), Vec::new()];
        let mut w: [Vec<VertexId>; 2] = [Vec::new(), Vec::new()];
        for j in 0..2 {
            let f = &self.factors[j];
            let branches = f.branch_vertices();
            if branches.is_empty() {
                g[j] = vec![0];
            } else {
                let mut cands = Vec::new();
                for &b in &branches {
                    cands.extend_from_slice(f.children(b)?);
                }
                // keep the candidates with no branching vertex weakly below
                cands.retain(|&c| {
                    !branches.iter().any(|&b| {
                        let mut x = b;
                        loop {
                            if x == c {
                                return true;
                            }
                            match f.parent(x).unwrap() {
                                Some(p) => x = p,
                                None => return false,
                            }
                        }
                    })
                });
                cands.sort_unstable();
                g[j] = cands;
            }
            let mut anc = Vec::new();
            for &v in &g[j] {
                let mut x = v;
                while let Some(p) = f.parent(x)? {
                    anc.push(p);
                    x = p;
                }
            }
            anc.sort_unstable();
            anc.dedup();
            w[j] = anc;
        }
        let in_w = |j: usize, c: VertexId| w[j].binary_search(&c).is_ok();
        let mut f1 = Vec::new();
        let mut f2 = Vec::new();
        let mut f3 = Vec::new();
        for v in 0..self.verts.len() as PVertexId {
            let c = &self.verts[v as usize].coords;
            if in_w(0, c[0]) {
                f1.push(v);
            } else if in_w(1, c[1]) {
                f2.push(v);
            } else {
                f3.push(v);
            }
        }
        // attach each remaining vertex to the product subtree it belongs to
        let locate = |f: &RootedTree, gset: &[VertexId], mut x: VertexId| -> Option<VertexId> {
            loop {
                if gset.binary_search(&x).is_ok() {
                    return Some(x);
                }
                x = f.parent(x).unwrap()?;
            }
        };
        let mut blocks: HashMap<(VertexId, VertexId), Vec<PVertexId>> = HashMap::new();
        for &v in &f3 {
            let c = &self.verts[v as usize].coords;
            let g1 = locate(&self.factors[0], &g[0], c[0]);
            let g2 = locate(&self.factors[1], &g[1], c[1]);
            match (g1, g2) {
                (Some(a), Some(b)) => blocks.entry((a, b)).or_default().push(v),
                _ => {
                    return Err(Error::InvalidTree(format!(
                        "vertex {c:?} escapes the two-fold decomposition"
                    )))
                }
            }
        }
        let mut blocks: Vec<SubtreeBlock> = blocks
            .into_iter()
            .map(|(root_coords, mut members)| {
                members.sort_unstable();
                SubtreeBlock {
                    root_coords,
                    members,
                }
            })
            .collect();
        blocks.sort_by_key(|b| b.root_coords);
        Ok(TwoFoldDecomposition {
            g,
            w,
            f1,
            f2,
            f3,
            blocks,
        })
    }
}

/// Diagonal root component of a product: its own rooted tree plus the
/// correspondence with product vertices.
#[derive(Clone, Debug)]
pub struct TensorRootComponent {
    pub tree: RootedTree,
    /// Component vertex id -> product vertex id.
    pub product_vertex: Vec<PVertexId>,
    /// Product vertex id -> component vertex id, for members only.
    pub component_of: HashMap<PVertexId, VertexId>,
}

/// A full product subtree rooted at a pair from `G_1 x G_2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubtreeBlock {
    pub root_coords: (VertexId, VertexId),
    pub members: Vec<PVertexId>,
}

#[derive(Clone, Debug)]
pub struct TwoFoldDecomposition {
    /// Factor-level chain starts per axis.
    pub g: [Vec<VertexId>; 2],
    /// Factor-level proper ancestors of `g` per axis.
    pub w: [Vec<VertexId>; 2],
    pub f1: Vec<PVertexId>,
    pub f2: Vec<PVertexId>,
    pub f3: Vec<PVertexId>,
    pub blocks: Vec<SubtreeBlock>,
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn product(specs: &[(u32, u32)], budget: u32) -> ProductTree {
        let factors = specs
            .iter()
            .map(|&(n0, k0)| RootedTree::materialize(TreeSpec::tnk(n0, k0), budget).unwrap())
            .collect();
        ProductTree::materialize(factors, budget).unwrap()
    }

    #[test]
    fn generation_sizes_of_standard_products() {
        // unary x unary: t+1 vertices at depth t
        let p = product(&[(1, 0), (1, 0)], 6);
        for t in 0..=6u32 {
            assert_eq!(p.generation(t).unwrap().len(), (t + 1) as usize);
        }
        // binary-branch x unary: 2t + 1
        let p = product(&[(2, 0), (1, 0)], 6);
        for t in 0..=6u32 {
            assert_eq!(p.generation(t).unwrap().len(), (2 * t + 1) as usize);
        }
        // binary-branch squared: 1, then 4t
        let p = product(&[(2, 0), (2, 0)], 6);
        assert_eq!(p.generation(0).unwrap().len(), 1);
        for t in 1..=6u32 {
            assert_eq!(p.generation(t).unwrap().len(), (4 * t) as usize);
        }
    }

    #[test]
    fn counts_up_to_depth_five() {
        assert_eq!(product(&[(1, 0), (1, 0)], 5).vertex_count(), 21);
        assert_eq!(product(&[(2, 0), (1, 0)], 5).vertex_count(), 36);
        assert_eq!(product(&[(2, 0), (2, 0)], 5).vertex_count(), 61);
    }

    #[test]
    fn axis_moves_are_inverse() {
        let p = product(&[(2, 0), (1, 0)], 5);
        for v in 0..p.vertex_count() as PVertexId {
            for j in 0..2 {
                if p.vertex(v).unwrap().total < 5 {
                    for w in p.children_along(v, j).unwrap() {
                        assert_eq!(p.parent_along(w, j).unwrap(), Some(v));
                    }
                }
            }
        }
    }

    #[test]
    fn unique_shared_child_of_distinct_vertices() {
        // any two distinct vertices share at most one common child
        let p = product(&[(2, 0), (2, 0)], 5);
        let n = p.vertex_count() as PVertexId;
        let mut children: Vec<Vec<PVertexId>> = Vec::new();
        for v in 0..n {
            let mut all = Vec::new();
            if p.vertex(v).unwrap().total < 5 {
                for j in 0..2 {
                    all.extend(p.children_along(v, j).unwrap());
                }
            }
            all.sort_unstable();
            children.push(all);
        }
        for v in 0..n {
            for w in (v + 1)..n {
                let shared = children[v as usize]
                    .iter()
                    .filter(|x| children[w as usize].binary_search(x).is_ok())
                    .count();
                assert!(shared <= 1, "vertices {v} and {w} share {shared} children");
            }
        }
    }

    #[test]
    fn sibling_product_identity() {
        // card sib_i(v) * card sib_j(par_i(v)) = card sib_j(v) * card sib_i(par_j(v))
        let p = product(&[(2, 0), (2, 1)], 6);
        for v in 0..p.vertex_count() as PVertexId {
            let pv = p.vertex(v).unwrap();
            if pv.coords[0] == 0 || pv.coords[1] == 0 {
                continue;
            }
            let card_sib = |u: PVertexId, j: usize| -> usize {
                let c = p.vertex(u).unwrap().coords[j];
                if c == 0 {
                    return usize::MAX; // unused in this test
                }
                p.factor(j).unwrap().siblings(c).unwrap().len()
            };
            let pi = p.parent_along(v, 0).unwrap().unwrap();
            let pj = p.parent_along(v, 1).unwrap().unwrap();
            assert_eq!(
                card_sib(v, 0) * card_sib(pi, 1),
                card_sib(v, 1) * card_sib(pj, 0)
            );
        }
    }

    #[test]
    fn interior_slices_partition_by_support() {
        let p = product(&[(2, 0), (1, 0)], 4);
        let all: usize = [vec![], vec![0], vec![1], vec![0, 1]]
            .iter()
            .map(|axes| p.interior_slice(axes).unwrap().len())
            .sum();
        assert_eq!(all, p.vertex_count());
        assert_eq!(p.interior_slice(&[]).unwrap(), vec![0]);
    }

    #[test]
    fn sibling_classes_and_representatives() {
        let p = product(&[(2, 0), (2, 0)], 4);
        // the four depth-(1,1) vertices form one class over both axes
        let u = p.id_of(&[1, 1]).unwrap();
        let class = p.sibling_class(u, &[0, 1]).unwrap();
        let mut coords: Vec<Vec<VertexId>> = class
            .iter()
            .map(|&v| p.vertex(v).unwrap().coords.clone())
            .collect();
        coords.sort();
        assert_eq!(coords, vec![vec![1, 1], vec![1, 2], vec![2, 1], vec![2, 2]]);

        let reps = p.class_representatives(&[0, 1]).unwrap();
        // every member of the slice is in exactly one representative's class
        let slice = p.interior_slice(&[0, 1]).unwrap();
        let mut covered = Vec::new();
        for &r in &reps {
            let c = &p.vertex(r).unwrap().coords;
            let min0 = *p
                .factor(0)
                .unwrap()
                .siblings(c[0])
                .unwrap()
                .iter()
                .min()
                .unwrap();
            let min1 = *p
                .factor(1)
                .unwrap()
                .siblings(c[1])
                .unwrap()
                .iter()
                .min()
                .unwrap();
            assert_eq!(c[0], min0);
            assert_eq!(c[1], min1);
            covered.extend(p.sibling_class(r, &[0, 1]).unwrap());
        }
        covered.sort_unstable();
        assert_eq!(covered, slice);

        // wrong slice is rejected
        let off = p.id_of(&[1, 0]).unwrap();
        assert!(p.sibling_class(off, &[0, 1]).is_err());
    }

    #[test]
    fn diagonal_component_of_unary_square_is_a_chain() {
        let p = product(&[(1, 0), (1, 0)], 8);
        let comp = p.tensor_root_component().unwrap();
        assert_eq!(comp.tree.branching_index(4), BranchingIndex::Known(0));
        assert_eq!(comp.tree.vertex_count(), 5);
        for (cid, &pid) in comp.product_vertex.iter().enumerate() {
            let pv = p.vertex(pid).unwrap();
            assert_eq!(pv.alpha[0], pv.alpha[1]);
            assert_eq!(pv.total, 2 * comp.tree.depth(cid as VertexId).unwrap());
        }
    }

    #[test]
    fn diagonal_component_of_branch_square_quadruples_once() {
        // branching-by-2 in each axis at the root: the component branches by
        // 4 at its root and is a chain afterwards, level sizes 1, 4, 4, ...
        let p = product(&[(2, 0), (2, 0)], 8);
        let comp = p.tensor_root_component().unwrap();
        assert_eq!(comp.tree.branching_index(4), BranchingIndex::Known(1));
        assert_eq!(comp.tree.generation(0).unwrap().len(), 1);
        for t in 1..=4u32 {
            assert_eq!(comp.tree.generation(t).unwrap().len(), 4);
        }

        // mixed case: branches by 2 once
        let p = product(&[(2, 0), (1, 0)], 8);
        let comp = p.tensor_root_component().unwrap();
        assert_eq!(comp.tree.generation(1).unwrap().len(), 2);
        assert_eq!(comp.tree.generation(4).unwrap().len(), 2);
        assert_eq!(comp.tree.branching_index(4), BranchingIndex::Known(1));
    }

    #[test]
    fn two_fold_decomposition_of_mixed_product() {
        let p = product(&[(2, 0), (1, 0)], 6);
        let d = p.two_fold_decomposition().unwrap();
        assert_eq!(d.g[0], vec![1, 2]);
        assert_eq!(d.g[1], vec![0]);
        assert_eq!(d.w[0], vec![0]);
        assert!(d.w[1].is_empty());
        assert!(d.f2.is_empty());
        // f1 = root coordinate on axis 1: one vertex per depth
        assert_eq!(d.f1.len(), 7);
        assert_eq!(d.blocks.len(), 2);
        let total: usize = d.f1.len() + d.f2.len() + d.f3.len();
        assert_eq!(total, p.vertex_count());
        let sum_blocks: usize = d.blocks.iter().map(|b| b.members.len()).sum();
        assert_eq!(sum_blocks, d.f3.len());
    }

    #[test]
    fn two_fold_decomposition_of_unary_square_is_one_block() {
        let p = product(&[(1, 0), (1, 0)], 6);
        let d = p.two_fold_decomposition().unwrap();
        assert_eq!(d.g[0], vec![0]);
        assert_eq!(d.g[1], vec![0]);
        assert!(d.f1.is_empty() && d.f2.is_empty());
        assert_eq!(d.f3.len(), p.vertex_count());
        assert_eq!(d.blocks.len(), 1);
    }

    #[test]
    fn two_fold_decomposition_of_branch_square() {
        let p = product(&[(2, 0), (2, 0)], 6);
        let d = p.two_fold_decomposition().unwrap();
        assert_eq!(d.g[0], vec![1, 2]);
        assert_eq!(d.g[1], vec![1, 2]);
        assert_eq!(d.w[0], vec![0]);
        assert_eq!(d.w[1], vec![0]);
        assert_eq!(d.blocks.len(), 4);
        assert_eq!(d.f1.len() + d.f2.len() + d.f3.len(), p.vertex_count());
        // f1: axis-0 coordinate at root; f2: axis-1 root, axis-0 not
        for &v in &d.f1 {
            assert_eq!(p.vertex(v).unwrap().coords[0], 0);
        }
        for &v in &d.f2 {
            let c = &p.vertex(v).unwrap().coords;
            assert!(c[0] != 0 && c[1] == 0);
        }
    }

    #[test]
    fn product_spec_wire_format() {
        let js = r#"{"factors":[{"kind":"tnk","n0":2,"k0":0},{"kind":"tnk","n0":1,"k0":0}],"depth_budget":4}"#;
        let spec: ProductSpec = serde_json::from_str(js).unwrap();
        let p = spec.build().unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(p.vertex_count(), 1 + 3 + 5 + 7 + 9);
        let back = serde_json::to_string(&spec).unwrap();
        assert_eq!(back, js);
    }
}
