//! Primal-dual interior-point solver for small dense SDPs.
//!
//! Primal: max ⟨C, X⟩ s.t. ⟨A_i, X⟩ = b_i, X ⪰ 0.
//! Dual:   min bᵀy   s.t. Σ y_i A_i − C = Z ⪰ 0.
//!
//! Search direction is HKM with a Mehrotra predictor-corrector step.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 200;
/// Fraction of the distance to the cone boundary taken per step. Staying
/// a little further from the boundary keeps the last iterations well
/// conditioned enough to reach a 1e-9 gap.
const STEP_FRACTION: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub a: SymMatrix,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub objective: SymMatrix,
    pub constraints: Vec<Constraint>,
}

impl SdpProblem {
    pub fn new(objective: SymMatrix, constraints: Vec<(SymMatrix, f64)>) -> Result<Self> {
        let p = SdpProblem {
            objective,
            constraints: constraints.into_iter().map(|(a, b)| Constraint { a, b }).collect(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.constraints.is_empty() {
            return Err(Error::Input("SDP needs at least one constraint".into()));
        }
        let n = self.dim();
        for (k, c) in self.constraints.iter().enumerate() {
            if c.a.dim() != n {
                return Err(Error::Dimension(format!(
                    "constraint {k} has dimension {}, objective has {n}",
                    c.a.dim()
                )));
            }
        }
        Ok(())
    }
}

/// Starting iterate. X and Z must be positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct StartPoint {
    pub x: SymMatrix,
    pub y: Vec<f64>,
    pub z: SymMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub start: Option<StartPoint>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    pub primal: SymMatrix,
    pub dual_multipliers: Vec<f64>,
    pub dual_slack: SymMatrix,
    pub value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    /// (primal objective, dual objective) at every iterate, start included.
    #[serde(skip)]
    pub history: Vec<(f64, f64)>,
}

/// Constraint matrix as its nonzero entries (both triangles).
struct SparseSym {
    entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    fn from_sym(a: &SymMatrix) -> Self {
        let n = a.dim();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = a.get(i, j);
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        SparseSym { entries }
    }

    fn inner(&self, x: &DMatrix<f64>) -> f64 {
        self.entries.iter().map(|&(i, j, v)| v * x[(i, j)]).sum()
    }

    fn add_scaled_to(&self, out: &mut DMatrix<f64>, s: f64) {
        for &(i, j, v) in &self.entries {
            out[(i, j)] += s * v;
        }
    }
}

struct Ops {
    a: Vec<SparseSym>,
    b: DVector<f64>,
    c: DMatrix<f64>,
    n: usize,
}

impl Ops {
    fn apply(&self, x: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(self.a.len(), self.a.iter().map(|a| a.inner(x)))
    }

    fn adjoint(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.n);
        for (a, &yi) in self.a.iter().zip(y.iter()) {
            a.add_scaled_to(&mut out, yi);
        }
        out
    }

    /// M_ij = tr(A_i X A_j W).
    fn schur(&self, x: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.a.len();
        let mut out = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                let mut s = 0.0;
                for &(p, q, av) in &self.a[i].entries {
                    for &(r, t, bv) in &self.a[j].entries {
                        s += av * bv * x[(q, r)] * w[(t, p)];
                    }
                }
                out[(i, j)] = s;
            }
        }
        out
    }
}

enum SchurSolve {
    Chol(Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl SchurSolve {
    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            SchurSolve::Chol(c) => Some(c.solve(rhs)),
            SchurSolve::Lu(l) => l.solve(rhs),
        }
    }
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Largest α with X + α·dX ⪰ 0 (infinite when dX is PSD in the X metric).
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> Result<f64> {
    let chol = Cholesky::new(x.clone()).ok_or_else(|| Error::Input("iterate lost positive definiteness".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Input("singular Cholesky factor".into()))?;
    let s = sym(&linv * dx * linv.transpose());
    let min = crate::linalg::eigh(&s).0[0];
    Ok(if min >= 0.0 { f64::INFINITY } else { -1.0 / min })
}

pub fn solve_sdp(p: &SdpProblem, tol: f64) -> Result<SdpSolution> {
    solve_sdp_with(
        p,
        &SolverOptions {
            tol,
            ..SolverOptions::default()
        },
    )
}

pub fn solve_sdp_with(p: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    p.validate()?;
    if !(opts.tol > 0.0) {
        return Err(Error::Input("tolerance must be positive".into()));
    }
    let n = p.dim();
    let ops = Ops {
        a: p.constraints.iter().map(|c| SparseSym::from_sym(&c.a)).collect(),
        b: DVector::from_iterator(p.constraints.len(), p.constraints.iter().map(|c| c.b)),
        c: p.objective.as_matrix().clone(),
        n,
    };
    let m = ops.a.len();
    let (mut x, mut y, mut z) = match &opts.start {
        Some(s) => {
            if s.x.dim() != n || s.z.dim() != n || s.y.len() != m {
                return Err(Error::Dimension("start point does not match problem".into()));
            }
            (
                s.x.as_matrix().clone(),
                DVector::from_column_slice(&s.y),
                s.z.as_matrix().clone(),
            )
        }
        None => (DMatrix::identity(n, n), DVector::zeros(m), DMatrix::identity(n, n)),
    };

    let mut history = Vec::new();
    let mut iter = 0usize;
    loop {
        let rp = &ops.b - ops.apply(&x);
        let rd = &ops.c + &z - ops.adjoint(&y);
        let pobj = ops.c.dot(&x);
        let dobj = ops.b.dot(&y);
        history.push((pobj, dobj));
        let pres = rp.amax();
        let dres = rd.amax();
        let gap = (dobj - pobj).abs();
        let compl = x.dot(&z);
        if pres <= opts.tol && dres <= opts.tol && gap <= opts.tol && compl <= opts.tol {
            return Ok(SdpSolution {
                primal: SymMatrix::from_matrix(x)?,
                dual_multipliers: y.iter().cloned().collect(),
                dual_slack: SymMatrix::from_matrix(z)?,
                value: pobj,
                dual_value: dobj,
                gap,
                primal_residual: pres,
                dual_residual: dres,
                iterations: iter,
                history,
            });
        }
        let fail = move || Error::NoConvergence {
            iterations: iter,
            primal_residual: pres,
            dual_residual: dres,
            gap,
        };
        if iter >= opts.max_iter {
            return Err(fail());
        }
        iter += 1;

        let mu = compl / n as f64;
        let w = match Cholesky::new(z.clone()) {
            Some(ch) => sym(ch.inverse()),
            None => return Err(fail()),
        };
        // The HKM Schur matrix is SPD in exact arithmetic; Cholesky is the
        // more accurate solve, LU covers the loss of definiteness near the end.
        let schur = sym(ops.schur(&x, &w));
        let solver = match Cholesky::new(schur.clone()) {
            Some(c) => SchurSolve::Chol(c),
            None => SchurSolve::Lu(schur.lu()),
        };

        let direction =
            |sigma: f64, corr: Option<&DMatrix<f64>>| -> Option<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
                let mut r = &w * (sigma * mu) - &x + &x * &rd * &w;
                if let Some(c) = corr {
                    r -= c;
                }
                let rhs = ops.apply(&r) - &rp;
                let dy = solver.solve(&rhs)?;
                let dz = ops.adjoint(&dy) - &rd;
                let mut dx = &w * (sigma * mu) - &x - &x * &dz * &w;
                if let Some(c) = corr {
                    dx -= c;
                }
                Some((sym(dx), dy, dz))
            };

        let Some((dxa, _dya, dza)) = direction(0.0, None) else {
            return Err(fail());
        };
        let ap = max_step(&x, &dxa)?.min(1.0);
        let ad = max_step(&z, &dza)?.min(1.0);
        let mu_aff = (&x + &dxa * ap).dot(&(&z + &dza * ad)) / n as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
        let corr = &dxa * &dza * &w;
        let Some((dx, dy, dz)) = direction(sigma, Some(&corr)) else {
            return Err(fail());
        };
        let mut ap = (STEP_FRACTION * max_step(&x, &dx)?).min(1.0);
        let mut ad = (STEP_FRACTION * max_step(&z, &dz)?).min(1.0);
        // Rounding can push a near-boundary step outside the cone; back off
        // until both iterates keep a Cholesky factor.
        let mut tries = 0;
        let (xn, zn) = loop {
            let xn = sym(&x + &dx * ap);
            let zn = sym(&z + &dz * ad);
            let okx = Cholesky::new(xn.clone()).is_some();
            let okz = Cholesky::new(zn.clone()).is_some();
            if okx && okz {
                break (xn, zn);
            }
            tries += 1;
            if tries > 30 {
                return Err(fail());
            }
            if !okx {
                ap *= 0.8;
            }
            if !okz {
                ad *= 0.8;
            }
        };
        x = xn;
        z = zn;
        y += &dy * ad;
    }
}
