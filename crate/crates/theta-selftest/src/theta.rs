//! Weighted Lovász theta: SDP assembly, closed-form dual certificates and
//! the dual-nondegeneracy test for uniqueness of the primal optimizer.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{circulant, mobius_ladder, WeightedGraph};
use crate::linalg::{self, SymMatrix, PSD_TOL};
use crate::sdp::{solve_sdp_with, SdpProblem, SdpSolution, SolverOptions, StartPoint};

/// Singular-value threshold for the nondegeneracy system.
pub const NULLSPACE_TOL: f64 = 1e-8;
/// Tolerance for the structural read-off of a certificate.
pub const STRUCTURE_TOL: f64 = 1e-9;
/// Eigenvalues of a numerically recovered dual below this are treated as zero.
pub const KERNEL_CLEAN_TOL: f64 = 1e-7;
/// Singular-value threshold when Z comes from the solver rather than a
/// closed form. Solver noise puts true kernel directions near 1e-8, while
/// genuinely nondegenerate systems in the corpus sit above 1e-2.
pub const NUMERIC_NULLSPACE_TOL: f64 = 1e-6;

/// Symmetric unit matrix E_ij = (e_i e_jᵀ + e_j e_iᵀ)/2.
fn unit(dim: usize, i: usize, j: usize) -> SymMatrix {
    let mut m = SymMatrix::zeros(dim);
    if i == j {
        m.set(i, i, 1.0);
    } else {
        m.set(i, j, 0.5);
    }
    m
}

/// Theta primal in solver form. Constraint order: X_00 = 1, then
/// X_ii − X_0i = 0 for each vertex, then X_ij = 0 for each edge.
pub fn theta_problem(g: &WeightedGraph) -> Result<SdpProblem> {
    let n = g.n();
    if n == 0 {
        return Err(Error::Input("graph has no vertices".into()));
    }
    let d = n + 1;
    let mut c = SymMatrix::zeros(d);
    for (i, w) in g.weights().iter().enumerate() {
        c.set(i + 1, i + 1, *w);
    }
    let mut cons = Vec::with_capacity(1 + n + g.edges().len());
    cons.push((unit(d, 0, 0), 1.0));
    for i in 1..=n {
        let mut a = SymMatrix::zeros(d);
        a.set(i, i, 1.0);
        a.set(0, i, -0.5);
        cons.push((a, 0.0));
    }
    for &(i, j) in g.edges() {
        cons.push((unit(d, i + 1, j + 1), 0.0));
    }
    SdpProblem::new(c, cons)
}

/// Strictly feasible start for the theta SDP. Different `variant`s give
/// distinct interior points, used to probe uniqueness of the optimizer.
pub fn theta_start(g: &WeightedGraph, variant: usize) -> StartPoint {
    let n = g.n();
    let d = n + 1;
    let k = variant as f64;
    let eps = 1.0 / ((2.0 + k) * n as f64);
    let x = SymMatrix::from_fn(d, |i, j| match (i, j) {
        (0, 0) => 1.0,
        (0, _) => eps,
        (a, b) if a == b => eps,
        _ => 0.0,
    });
    let lambdas: Vec<f64> = g.weights().iter().map(|w| w + 1.0 + 0.5 * k).collect();
    let t = lambdas.iter().map(|l| l * l).sum::<f64>() / 4.0 + 1.0 + k;
    let mut y = vec![t];
    y.extend(&lambdas);
    y.extend(std::iter::repeat_n(0.0, g.edges().len()));
    let z = dual_matrix(g, t, &lambdas, &vec![0.0; g.edges().len()]);
    StartPoint { x, y, z }
}

/// Solves the theta SDP from the feasible start.
pub fn lovasz_theta(g: &WeightedGraph) -> Result<(f64, SymMatrix)> {
    let s = lovasz_theta_solution(g, &SolverOptions::default(), 0)?;
    Ok((s.value, s.primal))
}

/// Full solver output for the theta SDP; `variant` selects the start point
/// unless `opts.start` is already set.
pub fn lovasz_theta_solution(g: &WeightedGraph, opts: &SolverOptions, variant: usize) -> Result<SdpSolution> {
    let p = theta_problem(g)?;
    let mut o = opts.clone();
    if o.start.is_none() {
        o.start = Some(theta_start(g, variant));
    }
    solve_sdp_with(&p, &o)
}

/// N(1 + cos(π/2N)).
pub fn mobius_theta_closed_form(big_n: usize) -> Result<f64> {
    if big_n < 2 {
        return Err(Error::Input(format!("N must be at least 2, got {big_n}")));
    }
    let n = big_n as f64;
    Ok(n * (1.0 + (PI / (2.0 * n)).cos()))
}

fn dual_matrix(g: &WeightedGraph, t: f64, lambdas: &[f64], mus: &[f64]) -> SymMatrix {
    let d = g.n() + 1;
    let mut z = SymMatrix::zeros(d);
    z.set(0, 0, t);
    for (i, (&l, &w)) in lambdas.iter().zip(g.weights()).enumerate() {
        z.set(i + 1, i + 1, l - w);
        z.set(0, i + 1, -l / 2.0);
    }
    for (&(i, j), &mu) in g.edges().iter().zip(mus) {
        z.set(i + 1, j + 1, mu / 2.0);
    }
    z
}

/// Dual point of the theta SDP: parameters plus the materialized slack
/// Z = t·E00 + Σ(λ_i − w_i)E_ii − Σλ_i E_0i + Σ μ_ij E_ij.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaDualCertificate {
    pub t: f64,
    pub lambdas: Vec<f64>,
    /// Edge multipliers keyed by (i, j), i < j.
    pub mus: BTreeMap<(usize, usize), f64>,
    pub matrix: SymMatrix,
}

#[derive(Serialize, Deserialize)]
struct CertificateJson {
    t: f64,
    lambda: Vec<f64>,
    mu: BTreeMap<String, f64>,
    matrix: SymMatrix,
}

impl ThetaDualCertificate {
    /// Materializes the certificate; `mus` follows the graph's edge order.
    pub fn new(g: &WeightedGraph, t: f64, lambdas: Vec<f64>, mus: Vec<f64>) -> Result<Self> {
        if lambdas.len() != g.n() || mus.len() != g.edges().len() {
            return Err(Error::Dimension(format!(
                "expected {} lambdas and {} mus, got {} and {}",
                g.n(),
                g.edges().len(),
                lambdas.len(),
                mus.len()
            )));
        }
        let matrix = dual_matrix(g, t, &lambdas, &mus);
        let mus = g.edges().iter().cloned().zip(mus).collect();
        Ok(ThetaDualCertificate {
            t,
            lambdas,
            mus,
            matrix,
        })
    }

    /// Reads the parameters back out of the solver's dual multipliers.
    pub fn from_solution(g: &WeightedGraph, s: &SdpSolution) -> Result<Self> {
        let y = &s.dual_multipliers;
        let n = g.n();
        if y.len() != 1 + n + g.edges().len() {
            return Err(Error::Dimension(
                "solution does not belong to this theta problem".into(),
            ));
        }
        Self::new(g, y[0], y[1..=n].to_vec(), y[n + 1..].to_vec())
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let j = CertificateJson {
            t: self.t,
            lambda: self.lambdas.clone(),
            mu: self.mus.iter().map(|((i, j), v)| (format!("{i}-{j}"), *v)).collect(),
            matrix: self.matrix.clone(),
        };
        serde_json::to_value(j).expect("certificate serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let j: CertificateJson = serde_json::from_value(v.clone()).map_err(|e| Error::Input(e.to_string()))?;
        let mut mus = BTreeMap::new();
        for (k, v) in j.mu {
            let parsed = k
                .split_once('-')
                .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)));
            match parsed {
                Some((a, b)) if a < b => {
                    mus.insert((a, b), v);
                }
                _ => return Err(Error::Input(format!("bad edge key {k:?}"))),
            }
        }
        Ok(ThetaDualCertificate {
            t: j.t,
            lambdas: j.lambda,
            mus,
            matrix: j.matrix,
        })
    }
}

/// Checks the structural form of the certificate against `g`, then PSD,
/// and returns the certified upper bound t.
pub fn verify_dual_certificate(g: &WeightedGraph, cert: &ThetaDualCertificate) -> Result<f64> {
    verify_dual_certificate_tol(g, cert, STRUCTURE_TOL, PSD_TOL)
}

pub fn verify_dual_certificate_tol(
    g: &WeightedGraph,
    cert: &ThetaDualCertificate,
    structure_tol: f64,
    psd_tol: f64,
) -> Result<f64> {
    let n = g.n();
    let z = &cert.matrix;
    if z.dim() != n + 1 {
        return Err(Error::Dimension(format!(
            "certificate has dimension {}, graph needs {}",
            z.dim(),
            n + 1
        )));
    }
    if cert.lambdas.len() != n {
        return Err(Error::Dimension(format!(
            "certificate has {} lambdas, graph has {n} vertices",
            cert.lambdas.len()
        )));
    }
    let bad = |row, col, reason: String| Error::CertificateMalformed { row, col, reason };
    let close = |a: f64, b: f64| (a - b).abs() <= structure_tol * (1.0 + a.abs().max(b.abs()));
    if !close(z.get(0, 0), cert.t) {
        return Err(bad(0, 0, format!("Z_00 = {} but t = {}", z.get(0, 0), cert.t)));
    }
    for i in 0..n {
        let l = cert.lambdas[i];
        if !close(z.get(0, i + 1), -l / 2.0) {
            return Err(bad(
                0,
                i + 1,
                format!("border entry {} != -λ/2 = {}", z.get(0, i + 1), -l / 2.0),
            ));
        }
        let expect = l - g.weights()[i];
        if !close(z.get(i + 1, i + 1), expect) {
            return Err(bad(
                i + 1,
                i + 1,
                format!("diagonal entry {} != λ - w = {expect}", z.get(i + 1, i + 1)),
            ));
        }
    }
    for &(i, j) in cert.mus.keys() {
        if j >= n || !g.adjacent(i, j) {
            return Err(bad(i + 1, j + 1, "multiplier on a non-edge".into()));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let v = z.get(i + 1, j + 1);
            if g.adjacent(i, j) {
                let mu = cert.mus.get(&(i, j)).copied().unwrap_or(0.0);
                if !close(v, mu / 2.0) {
                    return Err(bad(i + 1, j + 1, format!("edge entry {v} != μ/2 = {}", mu / 2.0)));
                }
            } else if v.abs() > structure_tol {
                return Err(bad(i + 1, j + 1, format!("non-edge entry {v} is not zero")));
            }
        }
    }
    let min = z.min_eigenvalue();
    if min < -psd_tol {
        return Err(Error::NotPsd(min));
    }
    Ok(cert.t)
}

/// The closed-form dual for the CHSH graph Ci_8(1,4).
pub fn chsh_dual_certificate() -> ThetaDualCertificate {
    let g = circulant(8, &[1, 4]).expect("valid circulant");
    let s2 = 2f64.sqrt();
    let h = 2.0 - s2;
    let k = 3.0 - 2.0 * s2;
    let mus = g
        .edges()
        .iter()
        .map(|&(i, j)| if j - i == 4 { 2.0 * k } else { 2.0 * h })
        .collect();
    ThetaDualCertificate::new(&g, 2.0 + s2, vec![2.0; 8], mus).expect("shapes match")
}

/// Z_N* for the Möbius ladder Ci_4N(1, 2N).
pub fn chained_dual_certificate(big_n: usize) -> Result<ThetaDualCertificate> {
    let g = mobius_ladder(big_n)?;
    let (l, f) = chained_dual_parameters(big_n);
    let mus = g
        .edges()
        .iter()
        .map(|&(i, j)| if j - i == 2 * big_n { 2.0 * f } else { 2.0 * l })
        .collect();
    ThetaDualCertificate::new(&g, big_n as f64 / l, vec![2.0; 4 * big_n], mus)
}

/// (l, f) = (1/(1+k), (1−k)/(1+k)) with k = cos(π/2N).
pub fn chained_dual_parameters(big_n: usize) -> (f64, f64) {
    let k = (PI / (2.0 * big_n as f64)).cos();
    (1.0 / (1.0 + k), (1.0 - k) / (1.0 + k))
}

/// First row of the circulant block l·A_C4N + [[I, fI],[fI, I]].
pub fn chained_circulant_row(big_n: usize) -> Vec<f64> {
    let (l, f) = chained_dual_parameters(big_n);
    let n = 4 * big_n;
    let mut row = vec![0.0; n];
    row[0] = 1.0;
    row[1] = l;
    row[n - 1] = l;
    row[2 * big_n] = f;
    row
}

/// Primal optimum P_CHSH on Ci_8(1,4).
pub fn chsh_primal() -> SymMatrix {
    let s2 = 2f64.sqrt();
    let chi = (2.0 + s2) / 8.0;
    let xi = (1.0 + s2) / 8.0;
    SymMatrix::from_fn(9, |i, j| {
        if i == 0 && j == 0 {
            return 1.0;
        }
        if i == 0 || j == 0 || i == j {
            return chi;
        }
        match (j as i64 - i as i64).rem_euclid(8) {
            1 | 7 | 4 => 0.0,
            2 | 6 => chi / 2.0,
            _ => xi,
        }
    })
}

/// Primal optimum P_Mermin in witness event order: a = 1/4 on the border
/// and diagonal, b = 1/8 on non-exclusive pairs.
pub fn mermin_primal() -> SymMatrix {
    let g = crate::graph::shrikhande_complement();
    let (a, b) = (0.25, 0.125);
    SymMatrix::from_fn(17, |i, j| {
        if i == 0 && j == 0 {
            1.0
        } else if i == 0 || j == 0 || i == j {
            a
        } else if g.adjacent(i - 1, j - 1) {
            0.0
        } else {
            b
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniquenessVerdict {
    pub nondegenerate: bool,
    pub nullspace_dim: usize,
    /// Smallest singular value of the stacked linear system.
    pub residual: f64,
}

/// Dual nondegeneracy: the only symmetric M with M_00 = 0, M_0i = M_ii,
/// M_ij = 0 on edges and M·Z = 0 is M = 0.
pub fn dual_nondegenerate(g: &WeightedGraph, z: &SymMatrix) -> Result<UniquenessVerdict> {
    dual_nondegenerate_tol(g, z, NULLSPACE_TOL)
}

pub fn dual_nondegenerate_tol(g: &WeightedGraph, z: &SymMatrix, tol: f64) -> Result<UniquenessVerdict> {
    let n = g.n();
    let d = n + 1;
    if z.dim() != d {
        return Err(Error::Dimension(format!(
            "Z has dimension {}, graph needs {d}",
            z.dim()
        )));
    }
    // Unknown index of the upper-triangle entry (i, j).
    let idx = |i: usize, j: usize| {
        let (a, b) = (i.min(j), i.max(j));
        a * d - a * (a + 1) / 2 + b
    };
    let cols = d * (d + 1) / 2;
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    rows.push(vec![(idx(0, 0), 1.0)]);
    for i in 1..d {
        rows.push(vec![(idx(0, i), 1.0), (idx(i, i), -1.0)]);
    }
    for &(i, j) in g.edges() {
        rows.push(vec![(idx(i + 1, j + 1), 1.0)]);
    }
    for r in 0..d {
        for c in 0..d {
            // (MZ)_rc = Σ_k M_rk Z_kc
            let mut row: BTreeMap<usize, f64> = BTreeMap::new();
            for k in 0..d {
                let v = z.get(k, c);
                if v != 0.0 {
                    *row.entry(idx(r, k)).or_insert(0.0) += v;
                }
            }
            rows.push(row.into_iter().collect());
        }
    }
    let mut a = DMatrix::zeros(rows.len(), cols);
    for (ri, row) in rows.iter().enumerate() {
        for &(ci, v) in row {
            a[(ri, ci)] += v;
        }
    }
    let (nullity, smallest) = linalg::nullspace_dim(&a, tol);
    Ok(UniquenessVerdict {
        nondegenerate: nullity == 0,
        nullspace_dim: nullity,
        residual: smallest,
    })
}

/// Sets eigenvalues of `z` below `tol` to zero, removing solver noise from
/// the kernel of a numerically recovered dual.
pub fn clean_kernel(z: &SymMatrix, tol: f64) -> SymMatrix {
    let (vals, vecs) = z.eigh();
    let mut out = DMatrix::zeros(z.dim(), z.dim());
    for (k, &v) in vals.iter().enumerate() {
        if v > tol {
            let c = vecs.column(k);
            out += c * c.transpose() * v;
        }
    }
    SymMatrix::from_matrix(out).expect("square")
}

/// Uniqueness evidence for a graph without a closed-form dual: solve, read
/// off the structural dual, clean its kernel and test nondegeneracy.
pub fn numeric_uniqueness(g: &WeightedGraph) -> Result<(ThetaDualCertificate, UniquenessVerdict)> {
    let s = lovasz_theta_solution(g, &SolverOptions::default(), 0)?;
    let cert = ThetaDualCertificate::from_solution(g, &s)?;
    let z = clean_kernel(&cert.matrix, KERNEL_CLEAN_TOL);
    let v = dual_nondegenerate_tol(g, &z, NUMERIC_NULLSPACE_TOL)?;
    Ok((cert, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete, empty};

    #[test]
    fn constraint_count() {
        let g = circulant(8, &[1, 4]).unwrap();
        let p = theta_problem(&g).unwrap();
        assert_eq!(p.constraints.len(), 1 + 8 + 12);
    }

    #[test]
    fn start_is_strictly_feasible() {
        let g = circulant(8, &[1, 4]).unwrap();
        let p = theta_problem(&g).unwrap();
        for v in 0..5 {
            let s = theta_start(&g, v);
            assert!(s.x.min_eigenvalue() > 0.0);
            assert!(s.z.min_eigenvalue() > 0.0);
            for (c, _) in p.constraints.iter().zip(0..) {
                assert!((c.a.dot(&s.x) - c.b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn theta_chsh() {
        let g = circulant(8, &[1, 4]).unwrap();
        let (v, x) = lovasz_theta(&g).unwrap();
        assert!((v - (2.0 + 2f64.sqrt())).abs() < 1e-6, "{v}");
        assert!(x.max_abs_diff(&chsh_primal()) < 1e-5);
    }

    #[test]
    fn theta_trivial_graphs() {
        let g = WeightedGraph::new(1, &[], vec![2.5]).unwrap();
        assert!((lovasz_theta(&g).unwrap().0 - 2.5).abs() < 1e-6);
        assert!((lovasz_theta(&empty(4)).unwrap().0 - 4.0).abs() < 1e-6);
        assert!((lovasz_theta(&complete(5)).unwrap().0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn c5_theta_is_sqrt5() {
        let g = circulant(5, &[1]).unwrap();
        assert!((lovasz_theta(&g).unwrap().0 - 5f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn chsh_certificate_verifies() {
        let g = circulant(8, &[1, 4]).unwrap();
        let c = chsh_dual_certificate();
        let t = verify_dual_certificate(&g, &c).unwrap();
        assert!((t - (2.0 + 2f64.sqrt())).abs() < 1e-12);
        assert!(c.matrix.min_eigenvalue().abs() < 1e-9);
        let v = dual_nondegenerate(&g, &c.matrix).unwrap();
        assert!(v.nondegenerate);
        assert_eq!(v.nullspace_dim, 0);
    }

    #[test]
    fn zeroed_mu_fails() {
        let g = circulant(8, &[1, 4]).unwrap();
        let mut c = chsh_dual_certificate();
        c.matrix.set(1, 2, 0.0);
        assert!(verify_dual_certificate(&g, &c).is_err());
        let mut c = chsh_dual_certificate();
        c.mus.insert((0, 1), 0.0);
        c.matrix.set(1, 2, 0.0);
        assert!(matches!(verify_dual_certificate(&g, &c), Err(Error::NotPsd(_))));
    }

    #[test]
    fn non_edge_entry_is_malformed() {
        let g = circulant(8, &[1, 4]).unwrap();
        let mut c = chsh_dual_certificate();
        c.matrix.set(1, 3, 0.1);
        assert!(matches!(
            verify_dual_certificate(&g, &c),
            Err(Error::CertificateMalformed { row: 1, col: 3, .. })
        ));
    }

    #[test]
    fn chained_certificates() {
        for n in 2..=16 {
            let c = chained_dual_certificate(n).unwrap();
            let g = mobius_ladder(n).unwrap();
            let t = verify_dual_certificate(&g, &c).unwrap();
            assert!((t - mobius_theta_closed_form(n).unwrap()).abs() < 1e-12);
        }
        assert!(chained_dual_certificate(1).is_err());
    }

    #[test]
    fn closed_form_values() {
        assert!((mobius_theta_closed_form(2).unwrap() - (2.0 + 2f64.sqrt())).abs() < 1e-12);
        assert!((mobius_theta_closed_form(4).unwrap() - 7.695518).abs() < 1e-5);
        assert!((mobius_theta_closed_form(64).unwrap() / 128.0 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn chained_circulant_kernel() {
        let ev = linalg::circulant_eigenvalues(&chained_circulant_row(2)).unwrap();
        assert!(ev[4].abs() < 1e-12 && ev[3].abs() < 1e-12);
    }

    #[test]
    fn single_vertex_nondegenerate() {
        let g = WeightedGraph::unweighted(1, &[]).unwrap();
        let z = SymMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        assert!(dual_nondegenerate(&g, &z).unwrap().nondegenerate);
    }

    #[test]
    fn zero_dual_is_degenerate() {
        let g = circulant(8, &[1, 4]).unwrap();
        let v = dual_nondegenerate(&g, &SymMatrix::zeros(9)).unwrap();
        assert_eq!(v.nullspace_dim, 24);
        // M·I = 0 already forces M = 0.
        assert!(dual_nondegenerate(&g, &SymMatrix::identity(9)).unwrap().nondegenerate);
    }

    #[test]
    fn certificate_json_round_trip() {
        let c = chsh_dual_certificate();
        let back = ThetaDualCertificate::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn structural_dual_from_solver_reproduces_value() {
        let g = circulant(5, &[1]).unwrap();
        let s = lovasz_theta_solution(&g, &SolverOptions::default(), 0).unwrap();
        let c = ThetaDualCertificate::from_solution(&g, &s).unwrap();
        let t = verify_dual_certificate_tol(&g, &c, 1e-8, 1e-8).unwrap();
        assert!((t - s.value).abs() < 1e-8);
    }
}
