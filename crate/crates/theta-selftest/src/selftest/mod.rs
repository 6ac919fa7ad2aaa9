//! Constructive self-testing: from a candidate realization that reaches the
//! reference Gram matrix, build local isometries and a junk state mapping
//! the reference onto the candidate.

pub mod candidates;
pub mod conditions;
pub mod extract;
pub mod gram;
pub mod structure;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bell::{BellWitness, Realization};
use crate::error::{Error, Result};
use crate::linalg::{isometry_defect, kron_all};

pub use conditions::{check_conditions, check_projector_condition_c1, ConditionReport, Verdict};
pub use extract::{
    extract_bipartite_isometries_general, extract_bipartite_isometries_rank1, extract_tripartite_isometries_general,
    extract_tripartite_isometries_rank1, gram_deviation, EXTRACT_TOL, GRAM_TOL,
};
pub use gram::{gram_decompose, GramDecomposition};
pub use structure::ProductStructure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    BipartiteRankOne,
    TripartiteRankOne,
    BipartiteGeneral,
    TripartiteGeneral,
}

impl std::fmt::Display for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Pipeline::BipartiteRankOne => "bipartite-rank-one",
            Pipeline::TripartiteRankOne => "tripartite-rank-one",
            Pipeline::BipartiteGeneral => "bipartite-general",
            Pipeline::TripartiteGeneral => "tripartite-general",
        };
        f.write_str(s)
    }
}

/// Output of a successful extraction. Isometry V_X maps H_X ⊗ K_X into the
/// candidate space; column h·k_X + j carries reference basis vector h and
/// junk basis vector j.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfTestReport {
    pub pipeline: Pipeline,
    pub labels: Vec<Vec<(i32, i32)>>,
    pub isometries: Vec<DMatrix<f64>>,
    pub junk_dims: Vec<usize>,
    pub junk: DVector<f64>,
    pub state_residual: f64,
    pub vector_residuals: Vec<f64>,
    /// Signs assigned to the spanning A indices (tripartite only).
    pub alpha: Vec<(usize, f64)>,
    /// Consistency constants on the outer spanning indices.
    pub gamma: Vec<(usize, f64)>,
    /// Per party, the state weight left outside the blocks.
    pub sector_weights: Vec<f64>,
    pub conditions: ConditionReport,
}

#[derive(Serialize, Deserialize)]
struct ReportJson {
    pipeline: Pipeline,
    labels: Vec<Vec<(i32, i32)>>,
    isometries: Vec<Vec<Vec<f64>>>,
    junk_dims: Vec<usize>,
    junk: Vec<f64>,
    state_residual: f64,
    vector_residuals: Vec<f64>,
    alpha: Vec<(usize, f64)>,
    gamma: Vec<(usize, f64)>,
    sector_weights: Vec<f64>,
    conditions: ConditionReport,
}

impl SelfTestReport {
    pub fn to_json(&self) -> serde_json::Value {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
        };
        let j = ReportJson {
            pipeline: self.pipeline,
            labels: self.labels.clone(),
            isometries: self.isometries.iter().map(rows).collect(),
            junk_dims: self.junk_dims.clone(),
            junk: self.junk.iter().copied().collect(),
            state_residual: self.state_residual,
            vector_residuals: self.vector_residuals.clone(),
            alpha: self.alpha.clone(),
            gamma: self.gamma.clone(),
            sector_weights: self.sector_weights.clone(),
            conditions: self.conditions.clone(),
        };
        serde_json::to_value(j).expect("report serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let j: ReportJson = serde_json::from_value(v.clone()).map_err(|e| Error::Input(format!("bad report: {e}")))?;
        let mut isometries = Vec::new();
        for rows in &j.isometries {
            let c = rows.first().map_or(0, |r| r.len());
            if rows.iter().any(|r| r.len() != c) {
                return Err(Error::Input("ragged isometry rows".into()));
            }
            isometries.push(DMatrix::from_fn(rows.len(), c, |i, k| rows[i][k]));
        }
        Ok(SelfTestReport {
            pipeline: j.pipeline,
            labels: j.labels,
            isometries,
            junk_dims: j.junk_dims,
            junk: DVector::from_vec(j.junk),
            state_residual: j.state_residual,
            vector_residuals: j.vector_residuals,
            alpha: j.alpha,
            gamma: j.gamma,
            sector_weights: j.sector_weights,
            conditions: j.conditions,
        })
    }

    pub fn max_vector_residual(&self) -> f64 {
        self.vector_residuals.iter().copied().fold(0.0, f64::max)
    }
}

fn digits(mut n: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for x in (0..dims.len()).rev() {
        out[x] = n % dims[x];
        n /= dims[x];
    }
    out
}

/// (⊗_X V_X)(ψ ⊗ junk), with ψ ⊗ junk reordered to ⊗_X (H_X ⊗ K_X).
pub fn embed(
    isometries: &[DMatrix<f64>],
    ref_dims: &[usize],
    junk_dims: &[usize],
    psi: &DVector<f64>,
    junk: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = isometries.len();
    if ref_dims.len() != n || junk_dims.len() != n {
        return Err(Error::Dimension("embed: party counts differ".into()));
    }
    let local: Vec<usize> = ref_dims.iter().zip(junk_dims).map(|(d, k)| d * k).collect();
    for (x, v) in isometries.iter().enumerate() {
        if v.ncols() != local[x] {
            return Err(Error::Dimension(format!(
                "isometry {x} has {} columns, expected {}",
                v.ncols(),
                local[x]
            )));
        }
    }
    if psi.len() != ref_dims.iter().product::<usize>() || junk.len() != junk_dims.iter().product::<usize>() {
        return Err(Error::Dimension("embed: vector lengths do not match dims".into()));
    }
    let mut phi = DVector::zeros(local.iter().product());
    for h in 0..psi.len() {
        if psi[h] == 0.0 {
            continue;
        }
        let hd = digits(h, ref_dims);
        for j in 0..junk.len() {
            let jd = digits(j, junk_dims);
            let mut pos = 0;
            for x in 0..n {
                pos = pos * local[x] + hd[x] * junk_dims[x] + jd[x];
            }
            phi[pos] += psi[h] * junk[j];
        }
    }
    Ok(kron_all(isometries) * phi)
}

/// Runs the extraction pipeline that fits the candidate: rank-one when every
/// projector used by the witness is rank one, the block pipeline otherwise.
pub fn self_test(wit: &BellWitness, reference: &Realization, cand: &Realization) -> Result<SelfTestReport> {
    let ps = ProductStructure::from_realization(wit, reference)?;
    let rank_one = {
        if cand.parties.len() != ps.party_count() {
            return Err(Error::Dimension(format!(
                "candidate has {} parties, reference has {}",
                cand.parties.len(),
                ps.party_count()
            )));
        }
        cand.validate()?;
        extract::candidate_is_rank_one(&ps, cand)?
    };
    match (ps.party_count(), rank_one) {
        (2, true) => extract_bipartite_isometries_rank1(&ps, cand),
        (2, false) => extract_bipartite_isometries_general(&ps, cand),
        (3, true) => extract_tripartite_isometries_rank1(&ps, cand),
        (3, false) => extract_tripartite_isometries_general(&ps, cand),
        (n, _) => Err(Error::Precondition(format!(
            "self-testing supports 2 or 3 parties, got {n}"
        ))),
    }
}

/// Independent check of a claimed extraction: isometries, dimensions, the
/// state and every event action, all within `tol`.
pub fn verify_selftest_claim(
    reference: &Realization,
    cand: &Realization,
    wit: &BellWitness,
    report: &SelfTestReport,
    tol: f64,
) -> bool {
    let Ok(ps) = ProductStructure::from_realization(wit, reference) else {
        return false;
    };
    let n = ps.party_count();
    if report.isometries.len() != n || report.junk_dims.len() != n || cand.parties.len() != n {
        return false;
    }
    let cd = cand.dims();
    for x in 0..n {
        let v = &report.isometries[x];
        if v.nrows() != cd[x] || v.ncols() != ps.dims[x] * report.junk_dims[x] || isometry_defect(v) > tol {
            return false;
        }
    }
    if (report.junk.norm() - 1.0).abs() > tol {
        return false;
    }
    let image = |psi: &DVector<f64>| embed(&report.isometries, &ps.dims, &report.junk_dims, psi, &report.junk);
    match image(&ps.state) {
        Ok(v) if (&v - &cand.state).norm() <= tol => {}
        _ => return false,
    }
    let Ok(targets) = extract::candidate_event_vectors(&ps, cand) else {
        return false;
    };
    (0..ps.events.len()).all(|i| matches!(image(&ps.event_vector(i)), Ok(v) if (&v - &targets[i]).norm() <= tol))
}
