//! Acceptance gate: ten end-to-end checks of the analyses this workspace
//! promises, each with its stated tolerance and time budget. Everything
//! runs in process against the same fixtures the CLI ships.

use std::time::{Duration, Instant};

use mshift_cli::fixtures;
use mshift_core::classify::{
    associated_shift, classification_report, essential_normality_scan, log_log_slope, q_diagonal,
    radii_estimates, self_commutator_diagonal, CSeq, Verdict,
};
use mshift_core::kernel::{
    exponents_up_to, joint_kernel, model_coefficients, power_family_coefficients,
    wandering_rank_check,
};
use mshift_core::product::{ProductSpec, ProductTree};
use mshift_core::shift::{generic_explicit_weights, Multishift};
use mshift_core::tree::{RootedTree, TreeSpec};
use mshift_core::weights::{ExplicitEntry, WeightSystem};

fn build(specs: &[(u32, u32)], budget: u32) -> ProductTree {
    ProductSpec {
        factors: specs.iter().map(|&(n, k)| TreeSpec::tnk(n, k)).collect(),
        depth_budget: budget,
    }
    .build()
    .unwrap()
}

fn fixture(name: &str) -> (ProductTree, WeightSystem) {
    let job = fixtures::by_name(name).expect("fixture name");
    (job.product.build().unwrap(), job.weights)
}

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs().max(f64::MIN_POSITIVE)
}

#[test]
fn criterion_01_joint_kernel_dimensions() {
    // unary square: only the root function survives
    let t0 = Instant::now();
    let p = build(&[(1, 0), (1, 0)], 6);
    let s = Multishift::new(&p, WeightSystem::power(1.0)).unwrap();
    assert_eq!(joint_kernel(&s, 1e-9).unwrap().dim, 1);
    assert!(t0.elapsed() < Duration::from_secs(1));

    // branched times unary: one extra function on the depth-1 sibling pair,
    // proportional to w(2,0) e_(1,0) - w(1,0) e_(2,0)
    let t0 = Instant::now();
    let p = build(&[(2, 0), (1, 0)], 6);
    let s = Multishift::new(&p, WeightSystem::power(2.0)).unwrap();
    let basis = joint_kernel(&s, 1e-9).unwrap();
    assert_eq!(basis.dim, 2);
    let block = basis
        .blocks
        .iter()
        .find(|b| b.axes == vec![0])
        .expect("sibling block");
    let f = &block.basis[0];
    let va = p.id_of(&[1, 0]).unwrap();
    let vb = p.id_of(&[2, 0]).unwrap();
    let (wa, wb) = (s.weight(0, va).unwrap(), s.weight(0, vb).unwrap());
    let scale = f.get(va) / wb;
    assert!(rel(f.get(vb), -scale * wa) <= 1e-9, "not proportional");
    assert!(t0.elapsed() < Duration::from_secs(1));

    // doubly branched square, generic non-commuting weights: the joint
    // class contributes nothing
    let t0 = Instant::now();
    let p = build(&[(2, 0), (2, 0)], 4);
    let s = Multishift::new(&p, generic_explicit_weights(&p, 7)).unwrap();
    assert_eq!(joint_kernel(&s, 1e-9).unwrap().dim, 3);
    assert!(t0.elapsed() < Duration::from_secs(1));

    // tuned weights making the joint-class determinant vanish: dimension 4
    let t0 = Instant::now();
    let p = build(&[(2, 0), (2, 0)], 2);
    let tuned: Vec<(usize, [u32; 2], f64)> = vec![
        (0, [1, 0], 1.1),
        (0, [2, 0], 1.3),
        (1, [0, 1], 1.7),
        (1, [0, 2], 1.9),
        (0, [1, 1], 2.0),
        (0, [2, 1], 3.0),
        (0, [1, 2], 5.0),
        (0, [2, 2], 7.0),
        (1, [1, 1], 11.0),
        (1, [2, 1], 13.0),
        (1, [1, 2], 17.0),
        // balances 2*7*13*17 against 3*5*11 * this entry
        (1, [2, 2], 2.0 * 7.0 * 13.0 * 17.0 / (3.0 * 5.0 * 11.0)),
        (0, [3, 0], 1.0),
        (0, [4, 0], 1.0),
        (1, [0, 3], 1.0),
        (1, [0, 4], 1.0),
    ];
    let entries = tuned
        .into_iter()
        .map(|(axis, vertex, value)| ExplicitEntry {
            axis,
            vertex: vertex.to_vec(),
            value,
        })
        .collect();
    let s = Multishift::new(&p, WeightSystem::explicit(entries)).unwrap();
    assert_eq!(joint_kernel(&s, 1e-9).unwrap().dim, 4);
    assert!(t0.elapsed() < Duration::from_secs(1));
}

#[test]
fn criterion_02_moment_closed_form_matches_brute_force() {
    let t0 = Instant::now();
    let shapes: [&[(u32, u32)]; 3] = [&[(2, 0), (1, 0)], &[(2, 0), (2, 0)], &[(2, 0)]];
    for shape in shapes {
        let p = build(shape, 8);
        for a in [1.0, 2.0, 3.0] {
            let s = Multishift::new(&p, WeightSystem::power(a)).unwrap();
            for v in 0..p.vertex_count() as u32 {
                let t = p.vertex(v).unwrap().total;
                for alpha in exponents_up_to(p.dim(), 8 - t) {
                    let closed = s.moment_closed(&alpha, v).unwrap().expect("closed form");
                    let brute = s.moment_brute(&alpha, v).unwrap();
                    assert!(
                        rel(closed, brute) <= 1e-10,
                        "a {a} v {v} alpha {alpha:?}: {closed} vs {brute}"
                    );
                }
            }
        }
    }
    assert!(t0.elapsed() < Duration::from_secs(10));
}

#[test]
fn criterion_03_wandering_rank_attains_the_truncation() {
    let t0 = Instant::now();
    let all = fixtures::all();
    assert_eq!(all.len(), 9);
    for f in all {
        let p = f.job.product.build().unwrap();
        let s = Multishift::new(&p, f.job.weights).unwrap();
        let basis = joint_kernel(&s, 1e-9).unwrap();
        let report = wandering_rank_check(&s, &basis, 5, 1e-8).unwrap();
        assert_eq!(report.expected, p.vertices_up_to(5).unwrap().len());
        assert_eq!(
            report.rank, report.expected,
            "{}: rank {} of {} columns",
            f.name, report.rank, report.columns
        );
    }
    assert!(t0.elapsed() < Duration::from_secs(10));
}

#[test]
fn criterion_04_q_diagonal_matches_associated_shift_norms() {
    let t0 = Instant::now();
    let balanced = [
        "classical_d2",
        "mixed_2x1",
        "power_family_a1_d2",
        "power_family_a2_d2",
        "power_family_a3_d2",
        "nary_essential_counterexample",
        "onevar_t20_a2",
        "isometry_mixed",
    ];
    for name in balanced {
        let mut job = fixtures::by_name(name).unwrap();
        // the walk descends n more levels from depth-4 component vertices
        job.product.depth_budget = job.product.depth_budget.max(20);
        let p = job.product.build().unwrap();
        let s = Multishift::new(&p, job.weights).unwrap();
        let assoc = associated_shift(&p, CSeq::from_shift(&s).unwrap()).unwrap();
        for t in 0..=4u32 {
            for n in 0..=6u32 {
                let mut reference = None;
                for &w in assoc.component.tree.generation(t).unwrap() {
                    let m = assoc.moment_brute(n, w).unwrap();
                    let r = *reference.get_or_insert(m);
                    assert!(rel(m, r) <= 1e-10, "{name}: component split at depth {t}");
                }
                let r = reference.unwrap();
                for &v in p.generation(t).unwrap() {
                    let q = q_diagonal(&s, n, v).unwrap();
                    assert!(rel(q, r) <= 1e-10, "{name} t {t} n {n} v {v}: {q} vs {r}");
                }
            }
        }
    }
    assert!(t0.elapsed() < Duration::from_secs(5));
}

#[test]
fn criterion_05_radii_window_estimates() {
    let t0 = Instant::now();
    let (n_max, k_max) = (64u32, 512u32);

    let (p2, w2) = fixture("power_family_a2_d2");
    let s2 = Multishift::new(&p2, w2).unwrap();
    let r2 = radii_estimates(&CSeq::from_shift(&s2).unwrap(), n_max, k_max).unwrap();
    assert_eq!(r2.r_est, 1.0);
    assert_eq!(r2.m_inf_est, 1.0);

    let (p3, w3) = fixture("power_family_a3_d2");
    let s3 = Multishift::new(&p3, w3).unwrap();
    let r3 = radii_estimates(&CSeq::from_shift(&s3).unwrap(), n_max, k_max).unwrap();
    for x in [r3.r_est, r3.m_inf_est, r2.r_est, r2.m_inf_est] {
        assert!((0.95..=1.0).contains(&x), "estimate {x} left the window");
    }
    // telescoping C_t = (t+2)/(t+3): the estimator windows have closed forms
    assert!(rel(r3.r_est, (514.0f64 / 578.0).powf(1.0 / 128.0)) <= 1e-12);
    assert!(rel(r3.m_inf_est, (2.0f64 / 66.0).powf(1.0 / 128.0)) <= 1e-12);

    // a = 1 is excluded deliberately: its window estimates sit above 1
    // because C_t = (t+2)/(t+1) approaches 1 from above
    let (p1, w1) = fixture("power_family_a1_d2");
    let s1 = Multishift::new(&p1, w1).unwrap();
    let r1 = radii_estimates(&CSeq::from_shift(&s1).unwrap(), n_max, k_max).unwrap();
    assert!(rel(r1.r_est, 65.0f64.powf(1.0 / 128.0)) <= 1e-12);
    assert!(rel(r1.m_inf_est, (514.0f64 / 513.0).sqrt()) <= 1e-12);
    assert!(r1.r_est > 1.0 && r1.m_inf_est > 1.0);

    assert!(t0.elapsed() < Duration::from_secs(5));
}

#[test]
fn criterion_06_classification_matrix() {
    let t0 = Instant::now();

    let (p1, w1) = fixture("power_family_a1_d2");
    let s1 = Multishift::new(&p1, w1).unwrap();
    let r1 = classification_report(&s1, 10, 12, 64, 512).unwrap();
    assert_eq!(r1.subnormal.verdict, Verdict::No);
    let w = r1.subnormal.witness.expect("difference witness");
    assert_eq!(w.vertex, vec![0, 0]);
    assert_eq!(w.gamma, vec![1, 1]);
    assert_eq!(w.beta, vec![0, 0]);
    assert!((w.value + 0.5).abs() <= 1e-9, "witness value {}", w.value);
    assert_eq!(r1.hyponormal.verdict, Verdict::No);
    let g = r1.hyponormal.witness.expect("Gram witness");
    assert_eq!(g.generation, 1);
    assert!((g.min_eigenvalue + 0.5).abs() <= 1e-9);

    for name in ["power_family_a2_d2", "power_family_a3_d2"] {
        let (p, w) = fixture(name);
        let s = Multishift::new(&p, w).unwrap();
        let r = classification_report(&s, 10, 12, 64, 512).unwrap();
        assert_eq!(r.hyponormal.verdict, Verdict::Yes, "{name}");
        assert_eq!(r.subnormal.verdict, Verdict::YesAtWindow, "{name}");
        assert_eq!(r.subnormal.window, 10);
        assert!(r.subnormal.witness.is_none());
        assert!(r.spherically_balanced);
        assert!(r.qn_identity_max_relerr.unwrap() <= 1e-10);
    }

    assert!(t0.elapsed() < Duration::from_secs(30));
}

#[test]
fn criterion_07_onevar_rkhs_coefficients() {
    let t0 = Instant::now();
    let (p, w) = fixture("onevar_t20_a2");
    let s = Multishift::new(&p, w).unwrap();
    let basis = joint_kernel(&s, 1e-9).unwrap();
    let blocks = power_family_coefficients(&s, &basis, 8).unwrap();
    assert_eq!(blocks.len(), 2);
    for block in &blocks {
        assert_eq!(block.entries.len(), 9);
        for (alpha, c) in &block.entries {
            let n = alpha[0] as f64;
            let expect = if block.axes.is_empty() {
                n + 1.0 // root block
            } else {
                (n + 2.0) / 2.0 // branching block
            };
            assert!(
                (c - expect).abs() <= 1e-12,
                "axes {:?} n {n}: {c} vs {expect}",
                block.axes
            );
        }
    }
    assert!(t0.elapsed() < Duration::from_secs(1));
}

#[test]
fn criterion_08_model_coefficients_are_banded() {
    let t0 = Instant::now();
    let (p, w) = fixture("shimorin_mixed");
    let s = Multishift::new(&p, w).unwrap();
    let basis = joint_kernel(&s, 1e-9).unwrap();
    let model = model_coefficients(&s, &basis, 3, 1e-9).unwrap();
    let mut in_band_mass = 0.0f64;
    for e in &model.entries {
        let off_band = e.alpha[0].abs_diff(e.beta[0]) > 1 || e.alpha[1] != e.beta[1];
        assert_eq!(
            off_band, !e.in_band,
            "band flag at {:?}/{:?}",
            e.alpha, e.beta
        );
        if off_band {
            assert!(
                e.norm <= 1e-9,
                "off-band mass {} at {:?}/{:?}",
                e.norm,
                e.alpha,
                e.beta
            );
        } else {
            in_band_mass = in_band_mass.max(e.norm);
        }
    }
    assert!(model.max_off_band_norm <= 1e-9);
    assert!(in_band_mass > 0.1, "band content should not be vacuous");
    assert!(t0.elapsed() < Duration::from_secs(5));
}

/// `sum over depth-k descendants of the inverse sibling-count path products
/// equals 1`: the weight of each child is 1/card(sib(child)).
fn normalization_sum(f: &RootedTree, v: u32, k: u32) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for &c in f.children(v).unwrap() {
        sum += normalization_sum(f, c, k - 1) / f.siblings(c).unwrap().len() as f64;
    }
    sum
}

#[test]
fn criterion_09_combinatorial_identities() {
    let t0 = Instant::now();
    for fx in fixtures::all() {
        let mut job = fx.job;
        job.product.depth_budget = 6;
        let p = job.product.build().unwrap();
        let s = Multishift::new(&p, job.weights).unwrap();
        let d = p.dim();

        // images of distinct basis vectors under distinct powers never meet
        let low: Vec<u32> = p.vertices_up_to(2).unwrap();
        let exps = exponents_up_to(d, 3);
        for (i, &v) in low.iter().enumerate() {
            let images: Vec<_> = exps.iter().map(|a| s.power_apply(a, v).unwrap()).collect();
            for a in 0..images.len() {
                for b in a + 1..images.len() {
                    assert_eq!(images[a].inner(&images[b]), 0.0, "{}", fx.name);
                }
            }
            for &w in &low[i + 1..] {
                for (a, img) in exps.iter().zip(&images) {
                    let other = s.power_apply(a, w).unwrap();
                    assert_eq!(img.inner(&other), 0.0, "{}", fx.name);
                }
            }
        }

        // sib(u) along one axis is exactly the children of the axis parent,
        // and on interior slices the class accessor agrees with the
        // parent-then-children route
        for v in 0..p.vertex_count() as u32 {
            let coords = p.vertex(v).unwrap().coords.clone();
            let supp: Vec<usize> = (0..d).filter(|&j| coords[j] != 0).collect();
            for &j in &supp {
                let parent = p.parent_along(v, j).unwrap().unwrap();
                let mut kids = p.children_along(parent, j).unwrap();
                let mut via_factor: Vec<u32> = p
                    .factor(j)
                    .unwrap()
                    .siblings(coords[j])
                    .unwrap()
                    .iter()
                    .map(|&s| {
                        let mut c = coords.clone();
                        c[j] = s;
                        p.id_of(&c).unwrap()
                    })
                    .collect();
                kids.sort_unstable();
                via_factor.sort_unstable();
                assert_eq!(kids, via_factor, "{} axis {j}", fx.name);
            }
            if supp.is_empty() {
                continue;
            }
            let ind: Vec<u32> = (0..d).map(|j| u32::from(supp.contains(&j))).collect();
            let par = p.parent_multi(v, &ind).unwrap().unwrap();
            let mut class = p.sibling_class(v, &supp).unwrap();
            let mut kids = p.children_multi(par, &ind).unwrap();
            class.sort_unstable();
            kids.sort_unstable();
            assert_eq!(class, kids, "{} axes {supp:?}", fx.name);
        }

        // inverse sibling-count path products sum to one, per factor
        for j in 0..d {
            let f = p.factor(j).unwrap();
            for v in 0..f.vertex_count() as u32 {
                let depth = f.depth(v).unwrap();
                for k in 1..=(6 - depth) {
                    let sum = normalization_sum(f, v, k);
                    assert!(
                        (sum - 1.0).abs() <= 1e-12,
                        "{} axis {j} v {v} k {k}: {sum}",
                        fx.name
                    );
                }
            }
        }
    }

    // the tensor root component of the doubly branched square is the
    // four-fold branched tree: same level sizes, same branching profile
    let square = build(&[(2, 0), (2, 0)], 6);
    let component = square.tensor_root_component().unwrap().tree;
    let quad = RootedTree::materialize(TreeSpec::tnk(4, 0), 3).unwrap();
    assert_eq!(component.depth_budget(), 3);
    for t in 0..=3u32 {
        assert_eq!(
            component.generation(t).unwrap().len(),
            quad.generation(t).unwrap().len(),
            "level size at depth {t}"
        );
    }
    for t in 0..3u32 {
        let profile = |tree: &RootedTree| -> Vec<usize> {
            let mut counts: Vec<usize> = tree
                .generation(t)
                .unwrap()
                .iter()
                .map(|&v| tree.children(v).unwrap().len())
                .collect();
            counts.sort_unstable();
            counts
        };
        assert_eq!(
            profile(&component),
            profile(&quad),
            "branching at depth {t}"
        );
    }

    assert!(t0.elapsed() < Duration::from_secs(10));
}

#[test]
fn criterion_10_essential_normality_decay_and_counterexample() {
    let t0 = Instant::now();

    // finite branching: block norms are exactly 2/(t+a), a C/t decay
    let p = build(&[(2, 0), (2, 0)], 13);
    for a in [1.0, 2.0, 3.0] {
        let s = Multishift::new(&p, WeightSystem::power(a)).unwrap();
        let scan = essential_normality_scan(&s, 12).unwrap();
        for g in scan.per_generation.iter().filter(|g| g.t >= 1) {
            let expect = 2.0 / (g.t as f64 + a);
            assert!(rel(g.max, expect) <= 1e-10, "a {a} t {}: {}", g.t, g.max);
        }
        if a == 1.0 {
            let slope = log_log_slope(&scan, 4, 12).unwrap();
            assert!(
                (-1.2..=-0.8).contains(&slope),
                "log-log slope {slope} is not within 20% of -1"
            );
        }
    }

    // unbounded branching: the diagonal entries settle into [0.24, 0.26]
    // on the spine diagonal instead of decaying, approaching 1/4
    let (p, w) = fixture("nary_essential_counterexample");
    let s = Multishift::new(&p, w).unwrap();
    let mut prev = f64::INFINITY;
    let mut last = f64::NAN;
    for k in 1..=12u32 {
        let spine = k * (k + 1) / 2;
        let v = p.id_of(&[spine, spine]).unwrap();
        let kf = k as f64;
        let expect = (kf + 1.0) / (2.0 * kf + 3.0) - kf / (4.0 * kf + 4.0);
        for axis in 0..2 {
            let x = self_commutator_diagonal(&s, v, axis).unwrap();
            assert!((x - expect).abs() <= 1e-12, "k {k} axis {axis}: {x}");
            if k >= 3 {
                assert!((0.24..=0.26).contains(&x), "k {k}: {x} left the band");
            }
        }
        let x = self_commutator_diagonal(&s, v, 0).unwrap();
        assert!(x < prev, "diagonal should decrease toward 1/4");
        prev = x;
        last = x;
    }
    assert!(
        (last - 0.25).abs() < 1e-3,
        "terminal entry {last} is far from 1/4"
    );

    assert!(t0.elapsed() < Duration::from_secs(30));
}
