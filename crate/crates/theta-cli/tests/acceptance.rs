//! Acceptance run: one PASS/FAIL line per criterion. Exits non-zero when any
//! criterion fails.

use std::process::Command;

use nalgebra::DVector;
use rand::RngExt;
use theta_selftest::bell::{
    as4_theta, evaluate_witness, exclusivity_graph, reference_realization, witness, BellWitness, Realization,
    ScenarioName,
};
use theta_selftest::graph::{circulant, fractional_packing, independence_number, mobius_ladder, WeightedGraph};
use theta_selftest::linalg::circulant_eigenvalues;
use theta_selftest::selftest::candidates::{padded, perturbed, rotated, seeded_rng, with_ancilla};
use theta_selftest::selftest::gram::mermin_seven_dim_check;
use theta_selftest::selftest::{gram_decompose, self_test, verify_selftest_claim};
use theta_selftest::theta::{
    chained_circulant_row, chained_dual_certificate, chained_dual_parameters, chsh_dual_certificate, chsh_primal,
    dual_nondegenerate, lovasz_theta, mermin_primal, verify_dual_certificate,
};

type Check = Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn criterion_1() -> Check {
    let g = circulant(8, &[1, 4]).map_err(err)?;
    let (t, x) = lovasz_theta(&g).map_err(err)?;
    let want = 2.0 + 2f64.sqrt();
    ensure((t - want).abs() <= 1e-6, || format!("theta {t}"))?;
    let d = gram_decompose(&x, 1e-8).map_err(err)?.with_handle_gauge();
    let chi = (2.0 + 2f64.sqrt()) / 8.0;
    ensure(d.vectors[1..].iter().all(|v| (v[0] - chi).abs() <= 1e-5), || {
        "handle coordinates differ from chi".into()
    })?;
    let dev = d.gram().max_abs_diff(&chsh_primal());
    ensure(dev <= 1e-5, || format!("primal deviation {dev:.3e}"))
}

fn criterion_2() -> Check {
    let g = circulant(8, &[1, 4]).map_err(err)?;
    let cert = chsh_dual_certificate();
    let bound = verify_dual_certificate(&g, &cert).map_err(err)?;
    let min = cert.matrix.min_eigenvalue();
    ensure((-1e-9..=1e-9).contains(&min), || format!("min eigenvalue {min}"))?;
    ensure((bound - (2.0 + 2f64.sqrt())).abs() <= 1e-12, || {
        format!("bound {bound}")
    })?;
    let v = dual_nondegenerate(&g, &cert.matrix).map_err(err)?;
    ensure(v.nondegenerate && v.nullspace_dim == 0, || format!("{v:?}"))
}

fn criterion_3() -> Check {
    for n in 2..=8 {
        let (value, _) = lovasz_theta(&mobius_ladder(n).map_err(err)?).map_err(|e| format!("N={n}: {e}"))?;
        let want = n as f64 * (1.0 + (std::f64::consts::PI / (2.0 * n as f64)).cos());
        ensure((value - want).abs() <= 1e-6, || format!("N={n}: {value} vs {want}"))?;
    }
    for n in 2..=16 {
        let cert = chained_dual_certificate(n).map_err(err)?;
        let min = cert.matrix.min_eigenvalue();
        ensure(min >= -1e-9, || format!("N={n}: min eigenvalue {min}"))?;
        verify_dual_certificate(&mobius_ladder(n).map_err(err)?, &cert).map_err(|e| format!("N={n}: {e}"))?;
        let (l, _) = chained_dual_parameters(n);
        // read λ and μ back off the matrix itself
        let lambda = -2.0 * cert.matrix.get(0, 1);
        let t = cert.matrix.get(0, 0);
        ensure(
            (lambda - 2.0).abs() <= 1e-12 && (2.0 * cert.matrix.get(1, 2) - 2.0 * l).abs() <= 1e-12,
            || format!("N={n}: structure read-off"),
        )?;
        ensure((t - n as f64 / l).abs() <= 1e-12, || {
            format!("N={n}: t {t} vs N/l {}", n as f64 / l)
        })?;
        let ev = circulant_eigenvalues(&chained_circulant_row(n)).map_err(err)?;
        ensure(ev[2 * n].abs() <= 1e-12 && ev[2 * n - 1].abs() <= 1e-12, || {
            format!("N={n}: circulant kernel")
        })?;
    }
    Ok(())
}

fn criterion_4() -> Check {
    let w = witness(ScenarioName::Mermin).map_err(err)?;
    let g = exclusivity_graph(&w);
    let (a, _) = independence_number(&g).map_err(err)?;
    ensure(a == 3.0, || format!("alpha {a}"))?;
    let (t, x) = lovasz_theta(&g).map_err(err)?;
    ensure((t - 4.0).abs() <= 1e-6, || format!("theta {t}"))?;
    let f = fractional_packing(&g).map_err(err)?;
    ensure((f - 4.0).abs() <= 1e-9, || format!("alpha* {f}"))?;
    ensure(mermin_primal().rank(1e-8) == 7, || "P_Mermin rank".into())?;
    ensure(x.max_abs_diff(&mermin_primal()) <= 1e-5, || {
        "solver primal differs from P_Mermin".into()
    })?;
    let r = reference_realization(ScenarioName::Mermin).map_err(err)?;
    let v = evaluate_witness(&w, &r).map_err(err)?.value;
    ensure((v - 4.0).abs() <= 1e-10, || format!("reference value {v}"))?;
    let dev = mermin_seven_dim_check();
    ensure(dev <= 5e-3, || format!("seven-dimensional deviation {dev}"))
}

fn criterion_5() -> Check {
    let w = witness(ScenarioName::As4).map_err(err)?;
    let g = exclusivity_graph(&w);
    let (a, _) = independence_number(&g).map_err(err)?;
    ensure(a == 10.0, || format!("alpha {a}"))?;
    let (t, _) = lovasz_theta(&g).map_err(err)?;
    ensure((t - as4_theta()).abs() <= 1e-5, || format!("theta {t}"))?;
    let f = fractional_packing(&g).map_err(err)?;
    ensure((f - 14.0).abs() <= 1e-9, || format!("alpha* {f}"))?;
    let r = reference_realization(ScenarioName::As4).map_err(err)?;
    let v = evaluate_witness(&w, &r).map_err(err)?.value;
    ensure((v - as4_theta()).abs() <= 1e-4, || format!("reference value {v}"))
}

fn accepted(w: &BellWitness, r: &Realization, cand: &Realization, what: &str) -> Check {
    let rep = self_test(w, r, cand).map_err(|e| format!("{what}: {e}"))?;
    ensure(rep.state_residual <= 1e-7 && rep.max_vector_residual() <= 1e-7, || {
        format!("{what}: residuals")
    })?;
    ensure(verify_selftest_claim(r, cand, w, &rep, 1e-7), || {
        format!("{what}: claim does not verify")
    })
}

fn criterion_6() -> Check {
    let names = [
        ScenarioName::Chsh,
        ScenarioName::Chained(2),
        ScenarioName::Chained(3),
        ScenarioName::Chained(4),
        ScenarioName::Mermin,
        ScenarioName::As4,
    ];
    for name in names {
        let w = witness(name).map_err(err)?;
        let r = reference_realization(name).map_err(err)?;
        let theta = evaluate_witness(&w, &r).map_err(err)?.value;
        for seed in 0..10 {
            let (cand, _) = rotated(&r, &mut seeded_rng(seed)).map_err(err)?;
            accepted(&w, &r, &cand, &format!("{name} rotated seed {seed}"))?;
        }
        let big: Vec<usize> = r.dims().iter().map(|d| d + 2).collect();
        let (cand, _) = padded(&r, &big, &mut seeded_rng(99)).map_err(err)?;
        accepted(&w, &r, &cand, &format!("{name} padded"))?;
        // smallest rotation in a geometric sweep that costs at least 1e-3
        let mut angle = 1e-3;
        let cand = loop {
            let c = perturbed(&r, 0, 1, angle).map_err(err)?;
            if evaluate_witness(&w, &c).map_err(err)?.value <= theta - 1e-3 {
                break c;
            }
            angle *= 1.5;
            if angle > 1.0 {
                return Err(format!("{name}: no perturbation lowers the value by 1e-3"));
            }
        };
        ensure(self_test(&w, &r, &cand).is_err(), || {
            format!("{name}: perturbed candidate accepted")
        })?;
    }
    for (name, dims, junk) in [
        (
            ScenarioName::Chsh,
            vec![2, 2],
            DVector::from_vec(vec![0.6, 0.0, 0.0, 0.8]),
        ),
        (
            ScenarioName::Mermin,
            vec![2, 2, 2],
            DVector::from_vec(vec![0.6, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.8]),
        ),
    ] {
        let w = witness(name).map_err(err)?;
        let r = reference_realization(name).map_err(err)?;
        let cand = with_ancilla(&r, &dims, &junk).map_err(err)?;
        let rep = self_test(&w, &r, &cand).map_err(|e| format!("{name} ancilla: {e}"))?;
        ensure((&rep.junk - &junk).amax() <= 1e-7, || {
            format!("{name}: junk {}", rep.junk)
        })?;
        ensure(verify_selftest_claim(&r, &cand, &w, &rep, 1e-7), || {
            format!("{name} ancilla: claim")
        })?;
    }
    Ok(())
}

fn brute_alpha(g: &WeightedGraph) -> f64 {
    let n = g.n();
    (0u32..1 << n)
        .map(|m| (0..n).filter(|&i| m >> i & 1 == 1).collect::<Vec<_>>())
        .filter(|s| g.is_stable(s))
        .map(|s| s.iter().map(|&i| g.weights()[i]).sum::<f64>())
        .fold(0.0, f64::max)
}

fn criterion_7() -> Check {
    let mut rng = seeded_rng(2024);
    let mut corpus = Vec::new();
    for _ in 0..50 {
        let n = rng.random_range(1..=12usize);
        let p: f64 = rng.random_range(0.1..0.9);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_range(0.0..1.0) < p {
                    edges.push((i, j));
                }
            }
        }
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=2.0)).collect();
        corpus.push(WeightedGraph::new(n, &edges, w).map_err(err)?);
    }
    for (k, g) in corpus.iter().enumerate() {
        let (a, _) = independence_number(g).map_err(err)?;
        let b = brute_alpha(g);
        ensure((a - b).abs() <= 1e-9, || {
            format!("graph {k}: alpha {a} vs brute force {b}")
        })?;
        let (t, _) = lovasz_theta(g).map_err(err)?;
        let f = fractional_packing(g).map_err(err)?;
        ensure(a <= t + 1e-6 && t <= f + 1e-6, || {
            format!("graph {k}: {a} <= {t} <= {f} fails")
        })?;
    }
    Ok(())
}

fn run(args: &[&str]) -> Result<(Vec<u8>, i32), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_theta-selftest"))
        .args(args)
        .output()
        .map_err(err)?;
    Ok((out.stdout, out.status.code().unwrap_or(-1)))
}

fn criterion_8() -> Check {
    let dir = std::env::temp_dir().join(format!("theta-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(err)?;
    let cand_path = dir.join("cand.json");
    let (scen, _) = run(&[
        "--json",
        "scenario",
        "--name",
        "chsh",
        "--candidate",
        "rotated",
        "--seed",
        "3",
    ])?;
    let v: serde_json::Value = serde_json::from_slice(&scen).map_err(err)?;
    std::fs::write(&cand_path, serde_json::to_vec(&v["realization"]).map_err(err)?).map_err(err)?;
    let cand = cand_path.to_str().expect("utf-8 path");
    let dot1 = dir.join("a.dot");
    let dot2 = dir.join("b.dot");
    let cmds: Vec<Vec<&str>> = vec![
        vec!["--json", "theta", "--scenario", "chsh"],
        vec!["--json", "theta", "--scenario", "mermin"],
        vec!["--json", "certify", "--scenario", "chained:5"],
        vec!["--json", "uniqueness", "--scenario", "chsh"],
        vec!["--json", "uniqueness", "--scenario", "mermin"],
        vec!["--json", "selftest", "--scenario", "chsh", "--candidate", cand],
        vec!["--json", "selftest", "--scenario", "mermin"],
        vec![
            "--json",
            "scenario",
            "--name",
            "as4",
            "--candidate",
            "padded",
            "--seed",
            "1",
        ],
        vec!["--json", "export", "--scenario", "as4", "--format", "json"],
    ];
    for c in &cmds {
        let (a, code_a) = run(c)?;
        let (b, code_b) = run(c)?;
        ensure(code_a == 0 && code_b == 0, || {
            format!("{c:?} exited with {code_a}/{code_b}")
        })?;
        ensure(a == b, || format!("{c:?} output differs between runs"))?;
        serde_json::from_slice::<serde_json::Value>(&a).map_err(|e| format!("{c:?}: {e}"))?;
    }
    for p in [&dot1, &dot2] {
        let (_, code) = run(&[
            "export",
            "--scenario",
            "mermin",
            "--format",
            "dot",
            "--output",
            p.to_str().unwrap(),
        ])?;
        ensure(code == 0, || "dot export failed".into())?;
    }
    let (a, b) = (std::fs::read(&dot1).map_err(err)?, std::fs::read(&dot2).map_err(err)?);
    std::fs::remove_dir_all(&dir).ok();
    ensure(a == b, || "DOT export differs between runs".into())
}

fn main() {
    let criteria: [(&str, fn() -> Check); 8] = [
        ("CHSH theta and primal", criterion_1),
        ("CHSH certificate", criterion_2),
        ("chained family", criterion_3),
        ("Mermin values", criterion_4),
        ("AS4 values", criterion_5),
        ("self-testing round trips", criterion_6),
        ("oracle equivalence and sandwich", criterion_7),
        ("CLI determinism", criterion_8),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(()) => println!("PASS {} {name}", k + 1),
            Err(e) => {
                failed += 1;
                println!("FAIL {} {name}: {e}", k + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
