use nalgebra::DMatrix;
use proptest::prelude::*;
use theta_selftest::bell::{evaluate_witness, reference_realization, witness, ScenarioName};
use theta_selftest::graph::{circulant, complement, fractional_packing, independence_number, WeightedGraph};
use theta_selftest::linalg::{circulant_eigenvalues, circulant_matrix, eigh, SymMatrix};
use theta_selftest::selftest::candidates::{rotated, seeded_rng};
use theta_selftest::selftest::{gram_decompose, self_test, verify_selftest_claim};
use theta_selftest::theta::lovasz_theta;

/// Max-weight stable set by enumerating all 2^n subsets.
fn brute_alpha(g: &WeightedGraph) -> f64 {
    let n = g.n();
    let mut best: f64 = 0.0;
    for mask in 0u32..(1 << n) {
        let set: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        if g.is_stable(&set) {
            best = best.max(set.iter().map(|&i| g.weights()[i]).sum());
        }
    }
    best
}

fn graph_strategy(max_n: usize) -> impl Strategy<Value = WeightedGraph> {
    (2..=max_n).prop_flat_map(|n| {
        let pairs = n * (n - 1) / 2;
        (
            proptest::collection::vec(any::<bool>(), pairs),
            proptest::collection::vec(0.0..2.0f64, n),
        )
            .prop_map(move |(mask, w)| {
                let all: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
                let edges: Vec<(usize, usize)> =
                    all.into_iter().zip(mask).filter(|(_, m)| *m).map(|(e, _)| e).collect();
                WeightedGraph::new(n, &edges, w).unwrap()
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn independence_matches_brute_force(g in graph_strategy(12)) {
        let (a, set) = independence_number(&g).unwrap();
        prop_assert!((a - brute_alpha(&g)).abs() < 1e-9);
        prop_assert!(g.is_stable(&set));
    }

    #[test]
    fn complement_is_an_involution(g in graph_strategy(10)) {
        let back = complement(&complement(&g));
        prop_assert_eq!(back.edges(), g.edges());
        prop_assert_eq!(back.weights(), g.weights());
    }

    #[test]
    fn circulant_spectrum_matches_dense(row in proptest::collection::vec(-1.0..1.0f64, 3..12)) {
        // symmetrize the first row so the dense matrix is symmetric
        let n = row.len();
        let sym: Vec<f64> = (0..n).map(|k| if k == 0 { row[0] } else { (row[k] + row[n - k]) / 2.0 }).collect();
        let mut fast = circulant_eigenvalues(&sym).unwrap();
        fast.sort_by(f64::total_cmp);
        let (dense, _) = eigh(&circulant_matrix(&sym));
        for (a, b) in fast.iter().zip(&dense) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn gram_round_trip(rows in 2..7usize, cols in 1..5usize, seed in any::<u64>()) {
        let mut s = seed;
        let b = DMatrix::from_fn(rows, cols, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        });
        let x = SymMatrix::from_matrix(&b * b.transpose()).unwrap();
        let d = gram_decompose(&x, 1e-10).unwrap();
        prop_assert!(d.rank <= cols);
        prop_assert!(d.gram().max_abs_diff(&x) < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sandwich(g in graph_strategy(8)) {
        let (a, _) = independence_number(&g).unwrap();
        let (t, _) = lovasz_theta(&g).unwrap();
        let f = fractional_packing(&g).unwrap();
        prop_assert!(a <= t + 1e-6, "alpha {} theta {}", a, t);
        prop_assert!(t <= f + 1e-6, "theta {} alpha* {}", t, f);
    }

    #[test]
    fn rotated_chsh_passes_self_test(seed in any::<u64>()) {
        let w = witness(ScenarioName::Chsh).unwrap();
        let r = reference_realization(ScenarioName::Chsh).unwrap();
        let (cand, _) = rotated(&r, &mut seeded_rng(seed)).unwrap();
        let value = evaluate_witness(&w, &cand).unwrap().value;
        prop_assert!((value - (2.0 + 2f64.sqrt())).abs() < 1e-9);
        let rep = self_test(&w, &r, &cand).unwrap();
        prop_assert!(verify_selftest_claim(&r, &cand, &w, &rep, 1e-8));
    }
}

#[test]
fn circulant_graph_spectrum_has_expected_size() {
    let g = circulant(8, &[1, 4]).unwrap();
    assert_eq!(g.regular_degree(), Some(3));
    let row: Vec<f64> = (0..8).map(|j| if g.adjacent(0, j) { 1.0 } else { 0.0 }).collect();
    let ev = circulant_eigenvalues(&row).unwrap();
    assert_eq!(ev.len(), 8);
    assert!(ev.iter().any(|&x| (x - 3.0).abs() < 1e-12));
}
