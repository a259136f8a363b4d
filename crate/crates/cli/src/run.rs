//! Command implementations: each produces a JSON report and, where the
//! command has a natural data series, a CSV rendering of it.

use mshift_core::classify::{classification_report, radii_estimates, CSeq};
use mshift_core::kernel::{
    joint_kernel, kernel_report, model_coefficients, power_family_coefficients,
    wandering_rank_check,
};
use mshift_core::product::ProductTree;
use mshift_core::shift::Multishift;
use mshift_core::{Error, Result};
use serde_json::{json, Value};

use crate::job::JobSpec;

pub fn run(command: &str, p: &ProductTree, job: &JobSpec) -> Result<(Value, Option<String>)> {
    match command {
        "build" => build(p, job),
        "kernel" => kernel(p, job),
        "moments" => moments(p, job),
        "classify" => classify(p, job),
        "radii" => radii(p, job),
        "rkhs" => rkhs(p, job),
        "shimorin" => shimorin(p, job),
        "decompose2" => decompose2(p, job),
        "wandering" => wandering(p, job),
        other => Err(Error::Unsupported(format!("unknown command {other}"))),
    }
}

fn shift<'a>(p: &'a ProductTree, job: &JobSpec) -> Result<Multishift<'a>> {
    Multishift::new(p, job.weights.clone())
}

fn tag(mut report: Value, command: &str) -> Value {
    report["command"] = command.into();
    report
}

fn build(p: &ProductTree, job: &JobSpec) -> Result<(Value, Option<String>)> {
    let s = shift(p, job)?;
    let budget = p.depth_budget();
    let mut generation_sizes = Vec::new();
    for t in 0..=budget {
        generation_sizes.push(p.generation(t)?.len());
    }
    let mut csv = String::from("t,generation_size\n");
    for (t, n) in generation_sizes.iter().enumerate() {
        csv.push_str(&format!("{t},{n}\n"));
    }
    let branching: Vec<Value> = p
        .branching_profile()
        .iter()
        .enumerate()
        .map(|(j, b)| json!({"axis": j + 1, "bound": b.known()}))
        .collect();
    let commuting = s.commuting_check(budget, job.params.tol())?;
    let balance = s.balance_detect(budget.saturating_sub(1), job.params.tol())?;
    let report = json!({
        "command": "build",
        "d": p.dim(),
        "depth_budget": budget,
        "vertex_count": p.vertex_count(),
        "generation_sizes": generation_sizes,
        "branching": branching,
        "commuting": commuting.commuting,
        "torally_balanced": balance.torally_balanced,
        "spherically_balanced": balance.spherically_balanced,
    });
    Ok((report, Some(csv)))
}

fn kernel(p: &ProductTree, job: &JobSpec) -> Result<(Value, Option<String>)> {
    let s = shift(p, job)?;
    let basis = joint_kernel(&s, job.params.tol())?;
    let report = kernel_report(p, &basis)?;
    Ok((
        tag(
            serde_json::to_value(&report).expect("report serialization"),
            "kernel",
        ),
        None,
    ))
}

fn moments(p: &ProductTree, job: &JobSpec) -> Result<(Value, Option<String>)> {
    let s = shift(p, job)?;
    let budget = p.depth_budget();
    let degree = job.params.degree.unwrap_or(4);
    let depth_cap = 4u32.min(budget);
    let mut checked = 0usize;
    let mut closed_checked = 0usize;
    let mut max_rel_err = 0.0f64;
    let mut worst: Option<Value> = None;
    let mut csv = String::from("vertex,alpha,brute,closed,rel_err\n");
    for v in p.vertices_up_to(depth_cap)? {
        let t = p.vertex(v)?.total;
        for alpha in mshift_core::kernel::exponents_up_to(p.dim(), degree.min(budget - t)) {
            if alpha.iter().all(|&a| a == 0) {
                continue;
            }
            let brute = s.moment_brute(&alpha, v)?;
            let closed = s.moment_closed(&alpha, v)?;
            checked += 1;
            let coords = p.vertex(v)?.coords.clone();
            let (closed_cell, err_cell) = match closed {
                Some(c) => {
                    closed_checked += 1;
                    let err = (brute - c).abs() / c.abs().max(f64::MIN_POSITIVE);
                    if err > max_rel_err {
                        max_rel_err = err;
                        worst = Some(json!({
                            "vertex": coords,
                            "alpha": alpha,
                            "brute": brute,
                            "closed": c,
                            "rel_err": err,
                        }));
                    }
                    (format!("{c}"), format!("{err}"))
                }
                None => (String::new(), String::new()),
            };
            csv.push_str(&format!(
                "{},{},{brute},{closed_cell},{err_cell}\n",
                join(&coords),
                join(&alpha)
            ));
        }
    }
    let report = json!({
        "command": "moments",
        "degree": degree,
        "vertex_depth": depth_cap,
        "checked": checked,
        "closed_checked": closed_checked,
        "max_rel_err": if closed_checked > 0 { Value::from(max_rel_err) } else { Value::Null },
        "worst": worst.unwrap_or(Value::Null),
    });
    Ok((report, Some(csv)))
}

fn join(xs: &[u32]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

fn classify(p: &ProductTree, job: &JobSpec) -> Result<(Value, Option<String>)> {
    let s = shift(p, job)?;
    let report = classification_report(
        &s,
        job.params.window(),
        job.params.t_max(),
        job.params.n_max(),
        job.params.k_max(),
    )?;
    let mut csv = String::from("t,C_t,essential_max_norm\n");
    let scan = report
        .essential_normality
        .as_ref()
        .map(|e| &e.per_generation[..])
        .unwrap_or(&[]);
    let rows = report.c_t.len().max(scan.len());
    for t in 0..rows {
        let c = report.c_t.get(t).map(|x| x.to_string()).unwrap_or_default();
        let e = scan
            .iter()
            .find(|g| g.t as usize == t)
            .map(|g| g.max.to_string())
            .unwrap_or_default();
        csv.push_str(&format!("{t},{c},{e}\n"));
    }
    Ok((
        tag(
            serde_json::to_value(&report).expect("report serialization"),
            "classify",
        ),
        Some(csv),
    ))
}

fn radii(p: &ProductTree, job: &JobSpec) -> Result<(Value, Option<String>)> {
    let s = shift(p, job)?;
    let c = CSeq::from_shift(&s)?;
    let (n_max, k_max) = match c.horizon() {
        None => (job.params.n_max(), job.params.k_max()),
        Some(l) => {
            let n = job.params.n_max().min((l / 2).max(1));
            (n, job.params.k_max().min(l.saturating_sub(n)))
        }
    };
    let est = radii_estimates(&c, n_max, k_max)?;
    let preview_len = c.horizon().unwrap_or(64).min(64);
    let preview = (0..preview_len)
        .map(|t| c.value(t))
        .collect::<Result<Vec<_>>>()?;
    let report = json!({
        "command": "radii",
        "r_est": est.r_est,
        "m_inf_est": est.m_inf_est,
        "n_max": est.n_max,
        "k_max": est.k_max,
        "C_t_preview": preview,
    });
    let mut csv = String::from("t,C_t\n");
    for (t, x) in preview.iter().enumerate() {
        csv.push_str(&format!("{t},{x}\n"));
    }
    Ok((report, Some(csv)))
}

fn rkhs(p: &ProductTree, job: &JobSpec) -> Result<(Value, Option<String>)> {
    let s = shift(p, job)?;
    let basis = joint_kernel(&s, job.params.tol())?;
    let blocks = power_family_coefficients(&s, &basis, job.params.degree.unwrap_or(8))?;
    let mut csv = String::from("block,rep,alpha,coefficient\n");
    for (i, b) in blocks.iter().enumerate() {
        for (alpha, value) in &b.entries {
            csv.push_str(&format!("{i},{},{},{value}\n", join(&b.rep), join(alpha)));
        }
    }
    let report = json!({
        "command": "rkhs",
        "dimE": basis.dim,
        "blocks": serde_json::to_value(&blocks).expect("report serialization"),
    });
    Ok((report, Some(csv)))
}

fn shimorin(p: &ProductTree, job: &JobSpec) -> Result<(Value, Option<String>)> {
    let s = shift(p, job)?;
    let basis = joint_kernel(&s, job.params.tol())?;
    let coeffs = model_coefficients(&s, &basis, job.params.degree.unwrap_or(3), 1e-9)?;
    let mut csv = String::from("alpha,beta,in_band,norm\n");
    for e in &coeffs.entries {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            join(&e.alpha),
            join(&e.beta),
            e.in_band,
            e.norm
        ));
    }
    Ok((
        tag(
            serde_json::to_value(&coeffs).expect("report serialization"),
            "shimorin",
        ),
        Some(csv),
    ))
}

fn decompose2(p: &ProductTree, _job: &JobSpec) -> Result<(Value, Option<String>)> {
    let dec = p.two_fold_decomposition()?;
    let blocks: Vec<Value> = dec
        .blocks
        .iter()
        .map(|b| {
            json!({
                "root": [b.root_coords.0, b.root_coords.1],
                "count": b.members.len(),
            })
        })
        .collect();
    let total = dec.f1.len() + dec.f2.len() + dec.f3.len();
    let report = json!({
        "command": "decompose2",
        "g": dec.g,
        "w": dec.w,
        "f1_count": dec.f1.len(),
        "f2_count": dec.f2.len(),
        "f3_count": dec.f3.len(),
        "covers_all_vertices": total == p.vertex_count(),
        "blocks": blocks,
    });
    Ok((report, None))
}

fn wandering(p: &ProductTree, job: &JobSpec) -> Result<(Value, Option<String>)> {
    let s = shift(p, job)?;
    let basis = joint_kernel(&s, 1e-9)?;
    let n = job.params.n();
    let report = wandering_rank_check(&s, &basis, n, job.params.tol.unwrap_or(1e-8))?;
    let expected = report.expected;
    let rank = report.rank;
    let mut value = serde_json::to_value(&report).expect("report serialization");
    value["dimE"] = basis.dim.into();
    value["matches"] = (expected == rank).into();
    Ok((tag(value, "wandering"), None))
}
