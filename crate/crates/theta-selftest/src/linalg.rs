//! Dense symmetric matrices and the spectral helpers built on them.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// PSD acceptance threshold for minimum eigenvalues.
pub const PSD_TOL: f64 = 1e-9;

/// Dense real symmetric matrix. Every constructor symmetrizes, so
/// `get(i, j) == get(j, i)` holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            m: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix {
            m: DMatrix::identity(dim, dim),
        }
    }

    /// Builds from a square matrix, replacing it with (M + Mᵀ)/2.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension(format!(
                "expected square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let t = m.transpose();
        Ok(SymMatrix { m: (m + t) * 0.5 })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut s = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                s.set(i, j, f(i, j));
            }
        }
        s
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("rows must form a square matrix".into()));
        }
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut s = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            s.set(i, i, *v);
        }
        s
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    /// Sets both (i,j) and (j,i).
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.m[(i, j)] = v;
        self.m[(j, i)] = v;
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.m[(i, j)]).collect())
            .collect()
    }

    /// Frobenius inner product ⟨A, B⟩ = tr(AB).
    pub fn dot(&self, other: &SymMatrix) -> f64 {
        self.m.dot(&other.m)
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        (&self.m - &other.m).amax()
    }

    /// Ascending eigenvalues and matching eigenvector columns.
    pub fn eigh(&self) -> (Vec<f64>, DMatrix<f64>) {
        eigh(&self.m)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(self)
    }

    /// Number of eigenvalues strictly above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        self.eigh().0.iter().filter(|&&v| v > tol).count()
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        SymMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn eigh(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let sym = (m + m.transpose()) * 0.5;
    let e = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    let values = order.iter().map(|&k| e.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| e.eigenvectors[(i, order[j])]);
    (values, vectors)
}

pub fn min_eigenvalue(m: &SymMatrix) -> f64 {
    if m.dim() == 0 {
        return 0.0;
    }
    let e = SymmetricEigen::new(m.as_matrix().clone());
    e.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Eigenvalues of the symmetric circulant matrix with the given first row,
/// λ_j = Σ_k c_k cos(2πjk/n), in index order.
pub fn circulant_eigenvalues(first_row: &[f64]) -> Result<Vec<f64>> {
    let n = first_row.len();
    if n == 0 {
        return Err(Error::Input("circulant row must be nonempty".into()));
    }
    for k in 1..n {
        let a = first_row[k];
        let b = first_row[n - k];
        if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
            return Err(Error::Input(format!(
                "circulant row is not symmetric: c[{k}] = {a} but c[{}] = {b}",
                n - k
            )));
        }
    }
    Ok((0..n)
        .map(|j| {
            first_row
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let phase = ((j * k) % n) as f64 / n as f64;
                    c * (2.0 * std::f64::consts::PI * phase).cos()
                })
                .sum()
        })
        .collect())
}

/// The circulant matrix whose row i is the first row shifted right by i.
pub fn circulant_matrix(first_row: &[f64]) -> DMatrix<f64> {
    let n = first_row.len();
    DMatrix::from_fn(n, n, |i, j| first_row[(j + n - i) % n])
}

/// PSD test of [[pivot, −borderᵀ], [−border, M]] through the Schur
/// complement M − border·borderᵀ/pivot.
pub fn schur_psd_check(m: &SymMatrix, pivot: f64, border: &[f64]) -> Result<bool> {
    if !(pivot > 0.0) {
        return Err(Error::Input(format!("pivot must be positive, got {pivot}")));
    }
    if border.len() != m.dim() {
        return Err(Error::Dimension(format!(
            "border length {} does not match matrix dimension {}",
            border.len(),
            m.dim()
        )));
    }
    let b = DVector::from_column_slice(border);
    let schur = m.as_matrix() - (&b * b.transpose()) / pivot;
    let s = SymMatrix::from_matrix(schur)?;
    Ok(s.min_eigenvalue() >= -PSD_TOL)
}

/// Number of columns minus numerical rank, using singular values above `tol`.
pub fn nullspace_dim(a: &DMatrix<f64>, tol: f64) -> (usize, f64) {
    let cols = a.ncols();
    if a.nrows() == 0 {
        return (cols, 0.0);
    }
    let svd = a.clone().svd(false, false);
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let smallest = if a.nrows() >= cols {
        svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min)
    } else {
        0.0
    };
    (cols - rank, smallest)
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

pub fn kron_vec(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.len() * b.len());
    for i in 0..a.len() {
        for j in 0..b.len() {
            out[i * b.len() + j] = a[i] * b[j];
        }
    }
    out
}

pub fn kron_all_vec(parts: &[DVector<f64>]) -> DVector<f64> {
    parts.iter().skip(1).fold(parts[0].clone(), |acc, p| kron_vec(&acc, p))
}

pub fn kron_all(parts: &[DMatrix<f64>]) -> DMatrix<f64> {
    parts.iter().skip(1).fold(parts[0].clone(), |acc, p| acc.kronecker(p))
}

/// Index of the first entry with magnitude above `tol`, scanning row-major.
pub fn first_significant(m: &DMatrix<f64>, tol: f64) -> Option<(usize, usize)> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if m[(i, j)].abs() > tol {
                return Some((i, j));
            }
        }
    }
    None
}

/// Flips the sign of `v` so its first significant entry is positive.
/// Returns the applied sign.
pub fn gauge_vector(v: &mut DVector<f64>, tol: f64) -> f64 {
    match v.iter().find(|x| x.abs() > tol) {
        Some(&x) if x < 0.0 => {
            v.neg_mut();
            -1.0
        }
        _ => 1.0,
    }
}

/// Flips the sign of `m` so its first significant entry (row-major) is
/// positive. Returns the applied sign.
pub fn gauge_matrix(m: &mut DMatrix<f64>, tol: f64) -> f64 {
    match first_significant(m, tol) {
        Some(ij) if m[ij] < 0.0 => {
            m.neg_mut();
            -1.0
        }
        _ => 1.0,
    }
}

/// Orthonormal basis for the column span of `m`, built by Gram–Schmidt over
/// the columns in order; columns whose residual norm falls below `tol` are
/// skipped.
pub fn span_basis(m: &DMatrix<f64>, tol: f64) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for j in 0..m.ncols() {
        let mut v = m.column(j).into_owned();
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v -= b * c;
            }
        }
        let n = v.norm();
        if n > tol {
            basis.push(v / n);
        }
    }
    basis
}

pub fn columns(vectors: &[DVector<f64>]) -> DMatrix<f64> {
    if vectors.is_empty() {
        return DMatrix::zeros(0, 0);
    }
    DMatrix::from_columns(vectors)
}

/// Numerical rank of the matrix whose columns are the given vectors.
pub fn rank_of(vectors: &[DVector<f64>], tol: f64) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let m = columns(vectors);
    m.svd(false, false).singular_values.iter().filter(|&&s| s > tol).count()
}

/// Largest |MᵀM − I| entry.
pub fn isometry_defect(v: &DMatrix<f64>) -> f64 {
    let g = v.transpose() * v;
    (g - DMatrix::identity(v.ncols(), v.ncols())).amax()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_eigenvalue_examples() {
        assert!((SymMatrix::identity(5).min_eigenvalue() - 1.0).abs() < 1e-14);
        assert!((SymMatrix::diag(&[1.0, -2.0]).min_eigenvalue() + 2.0).abs() < 1e-14);
    }

    #[test]
    fn symmetrizes_on_construction() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let s = SymMatrix::from_matrix(m).unwrap();
        assert_eq!(s.get(0, 1), 1.0);
        assert_eq!(s.get(1, 0), 1.0);
    }

    #[test]
    fn circulant_c4() {
        let ev = circulant_eigenvalues(&[0.0, 1.0, 0.0, 1.0]).unwrap();
        let want = [2.0, 0.0, -2.0, 0.0];
        for (a, b) in ev.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn circulant_zero_row() {
        let ev = circulant_eigenvalues(&[0.0; 6]).unwrap();
        assert!(ev.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn circulant_rejects_asymmetric() {
        assert!(circulant_eigenvalues(&[0.0, 1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn schur_examples() {
        let one = SymMatrix::identity(1);
        assert!(!schur_psd_check(&one, 1.0, &[2.0]).unwrap());
        assert!(schur_psd_check(&SymMatrix::identity(3), 1.0, &[0.0; 3]).unwrap());
        assert!(schur_psd_check(&one, 0.0, &[1.0]).is_err());
    }

    #[test]
    fn nullspace_counts_columns() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        assert_eq!(nullspace_dim(&a, 1e-8).0, 2);
    }

    #[test]
    fn gauge_flips_negative_lead() {
        let mut v = DVector::from_vec(vec![0.0, -2.0, 1.0]);
        assert_eq!(gauge_vector(&mut v, 1e-12), -1.0);
        assert_eq!(v[1], 2.0);
    }

    #[test]
    fn span_basis_skips_dependent_columns() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(span_basis(&m, 1e-10).len(), 2);
    }
}
