//! Gram decomposition of a PSD matrix and the seven-dimensional Mermin
//! configuration.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::bell::{exclusivity_graph, mermin_witness};
use crate::error::{Error, Result};
use crate::graph::{complement, find_isomorphism, WeightedGraph};
use crate::linalg::{gauge_vector, SymMatrix};
use crate::theta::mermin_primal;

use super::structure::gram_of;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramDecomposition {
    /// Row i of the factor; index 0 is the handle.
    pub vectors: Vec<DVector<f64>>,
    pub rank: usize,
    /// Largest entry of |VVᵀ − X|.
    pub truncation_error: f64,
}

/// Spectral factorization keeping eigenvalues above `tol`, largest first.
/// Each eigenvector has its first significant coordinate positive.
pub fn gram_decompose(x: &SymMatrix, tol: f64) -> Result<GramDecomposition> {
    if !(tol > 0.0) {
        return Err(Error::Input("tolerance must be positive".into()));
    }
    let (vals, vecs) = x.eigh();
    let min = vals.first().copied().unwrap_or(0.0);
    if min < -10.0 * tol {
        return Err(Error::Input(format!("matrix is not PSD: eigenvalue {min:.3e}")));
    }
    let keep: Vec<usize> = (0..vals.len()).rev().filter(|&k| vals[k] > tol).collect();
    let n = x.dim();
    let mut cols = Vec::with_capacity(keep.len());
    for &k in &keep {
        let mut u = vecs.column(k).into_owned();
        gauge_vector(&mut u, 1e-12);
        cols.push(u * vals[k].sqrt());
    }
    let vectors: Vec<DVector<f64>> = (0..n)
        .map(|i| DVector::from_iterator(cols.len(), cols.iter().map(|c| c[i])))
        .collect();
    let truncation_error = gram_of(&vectors).max_abs_diff(x);
    Ok(GramDecomposition {
        vectors,
        rank: keep.len(),
        truncation_error,
    })
}

impl GramDecomposition {
    pub fn gram(&self) -> SymMatrix {
        gram_of(&self.vectors)
    }

    /// Rotates every vector by the Householder reflection taking the handle
    /// to a positive multiple of e_0. Inner products are unchanged.
    pub fn with_handle_gauge(&self) -> GramDecomposition {
        let Some(h) = self.vectors.first() else {
            return self.clone();
        };
        let norm = h.norm();
        if self.rank == 0 || norm == 0.0 {
            return self.clone();
        }
        let mut u = h.clone();
        u[0] -= norm;
        let un = u.norm();
        if un < 1e-14 * norm.max(1.0) {
            return self.clone();
        }
        u /= un;
        let vectors = self.vectors.iter().map(|v| v - &u * (2.0 * u.dot(v))).collect();
        GramDecomposition {
            vectors,
            rank: self.rank,
            truncation_error: self.truncation_error,
        }
    }
}

/// The 17 seven-dimensional vectors (handle first), printed to three decimals.
pub const SEVEN_DIM_MERMIN: [[f64; 7]; 17] = [
    [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.25, -0.113, -0.241, 0.284, 0.088, 0.166, -0.029],
    [0.25, -0.110, -0.251, -0.120, 0.247, -0.021, -0.191],
    [0.25, -0.292, 0.079, 0.151, 0.075, -0.051, -0.255],
    [0.25, 0.182, -0.087, 0.003, 0.311, 0.215, 0.059],
    [0.25, -0.226, 0.069, 0.104, -0.227, 0.262, -0.021],
    [0.25, 0.223, -0.059, 0.300, 0.068, -0.075, 0.184],
    [0.25, -0.004, -0.232, 0.130, -0.298, 0.001, 0.167],
    [0.25, -0.247, 0.049, -0.152, 0.140, -0.278, 0.059],
    [0.25, 0.251, -0.059, -0.252, 0.019, 0.091, -0.222],
    [0.25, 0.0, -0.242, -0.274, -0.139, -0.186, 0.004],
    [0.25, 0.069, 0.271, 0.019, -0.154, 0.062, -0.285],
    [0.25, 0.044, 0.261, 0.167, 0.054, -0.291, -0.042],
    [0.25, 0.069, 0.223, -0.178, -0.004, 0.312, 0.067],
    [0.25, 0.045, 0.212, -0.030, 0.204, -0.042, 0.310],
    [0.25, -0.182, 0.039, -0.200, -0.161, 0.035, 0.293],
    [0.25, 0.291, -0.031, 0.046, -0.225, -0.199, -0.097],
];

pub fn seven_dim_mermin_gram() -> SymMatrix {
    let vs: Vec<DVector<f64>> = SEVEN_DIM_MERMIN.iter().map(|r| DVector::from_row_slice(r)).collect();
    gram_of(&vs)
}

/// Max deviation of the seven-dimensional configuration's Gram matrix from
/// P_Mermin. The printed vectors use their own vertex order, so the pattern
/// of non-orthogonal pairs is first matched to the complement of G_M.
pub fn mermin_seven_dim_check() -> f64 {
    let g = seven_dim_mermin_gram();
    let n = 16;
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| g.get(i + 1, j + 1) > 0.0625)
        .collect();
    let pattern = WeightedGraph::unweighted(n, &edges).expect("valid pattern graph");
    let target = complement(&exclusivity_graph(&mermin_witness()));
    let Some(perm) = find_isomorphism(&pattern, &target) else {
        return f64::INFINITY;
    };
    let p = mermin_primal();
    let idx = |i: usize| if i == 0 { 0 } else { perm[i - 1] + 1 };
    let mut dev: f64 = 0.0;
    for i in 0..=n {
        for j in 0..=n {
            dev = dev.max((g.get(i, j) - p.get(idx(i), idx(j))).abs());
        }
    }
    dev
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theta::chsh_primal;

    #[test]
    fn identity_decomposes_to_orthonormal() {
        let d = gram_decompose(&SymMatrix::identity(5), 1e-9).unwrap();
        assert_eq!(d.rank, 5);
        assert!(d.truncation_error < 1e-12);
        for v in &d.vectors {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn reference_ranks() {
        let d = gram_decompose(&chsh_primal(), 1e-8).unwrap();
        assert_eq!(d.rank, 4);
        let chi = (2.0 + 2f64.sqrt()) / 8.0;
        for v in &d.vectors[1..] {
            assert!((v.norm_squared() - chi).abs() < 1e-12);
        }
        assert_eq!(gram_decompose(&mermin_primal(), 1e-8).unwrap().rank, 7);
    }

    #[test]
    fn handle_gauge_puts_handle_on_e0() {
        let d = gram_decompose(&chsh_primal(), 1e-8).unwrap().with_handle_gauge();
        let h = &d.vectors[0];
        assert!((h[0] - 1.0).abs() < 1e-12);
        assert!(h.rows(1, h.len() - 1).amax() < 1e-12);
        assert!(d.gram().max_abs_diff(&chsh_primal()) < 1e-12);
        for v in &d.vectors[1..] {
            assert!((v[0] - (2.0 + 2f64.sqrt()) / 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let m = SymMatrix::diag(&[1.0, -1e-3]);
        assert!(gram_decompose(&m, 1e-9).is_err());
        let m = SymMatrix::diag(&[1.0, -1e-10]);
        assert_eq!(gram_decompose(&m, 1e-9).unwrap().rank, 1);
    }

    #[test]
    fn seven_dim_configuration() {
        assert!(mermin_seven_dim_check() <= 5e-3);
        let g = seven_dim_mermin_gram();
        for i in 1..17 {
            assert!((g.get(0, i) - 0.25).abs() < 1e-12);
        }
        assert_eq!(g.rank(1e-2), 7);
    }
}
