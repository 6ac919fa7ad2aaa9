//! Candidate realizations derived from a reference: local rotations,
//! isometric padding, ancillas and perturbations.

use nalgebra::{DMatrix, DVector};
use rand::rngs::ChaCha8Rng;
use rand::{Rng, RngExt, SeedableRng};

use crate::bell::{LocalProjector, PartyMeasurements, Realization};
use crate::error::{Error, Result};
use crate::linalg::{kron, kron_all};

use super::embed;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Haar-like orthogonal matrix: QR of a uniform [-1, 1] matrix with R's
/// diagonal made positive.
pub fn random_orthogonal(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0));
    let qr = a.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for k in 0..n {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    q
}

/// Random isometry from dimension `d` into dimension `big_d`.
pub fn random_isometry(big_d: usize, d: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    random_orthogonal(big_d, rng).columns(0, d).into_owned()
}

/// Pushes a realization through local isometries: ψ ↦ (⊗V)ψ, Π ↦ VΠVᵀ.
pub fn apply_isometries(r: &Realization, vs: &[DMatrix<f64>]) -> Result<Realization> {
    if vs.len() != r.parties.len() {
        return Err(Error::Dimension("one isometry per party is required".into()));
    }
    let mut parties = Vec::new();
    for (p, v) in r.parties.iter().zip(vs) {
        if v.ncols() != p.dim {
            return Err(Error::Dimension(format!(
                "isometry has {} columns, party has dimension {}",
                v.ncols(),
                p.dim
            )));
        }
        parties.push(PartyMeasurements {
            dim: v.nrows(),
            projectors: p
                .projectors
                .iter()
                .map(|q| LocalProjector {
                    setting: q.setting,
                    outcome: q.outcome,
                    matrix: v * &q.matrix * v.transpose(),
                    vector: q.vector.as_ref().map(|u| v * u),
                })
                .collect(),
        });
    }
    Realization::new(kron_all(vs) * &r.state, parties)
}

/// Random local rotations of every party.
pub fn rotated(r: &Realization, rng: &mut impl Rng) -> Result<(Realization, Vec<DMatrix<f64>>)> {
    let us: Vec<DMatrix<f64>> = r.dims().iter().map(|&d| random_orthogonal(d, rng)).collect();
    Ok((apply_isometries(r, &us)?, us))
}

/// Random isometric padding into the given larger dimensions.
pub fn padded(r: &Realization, big_dims: &[usize], rng: &mut impl Rng) -> Result<(Realization, Vec<DMatrix<f64>>)> {
    if big_dims.len() != r.parties.len() {
        return Err(Error::Dimension("one target dimension per party is required".into()));
    }
    let mut vs = Vec::new();
    for (&big, d) in big_dims.iter().zip(r.dims()) {
        if big < d {
            return Err(Error::Dimension(format!("cannot pad dimension {d} into {big}")));
        }
        vs.push(random_isometry(big, d, rng));
    }
    Ok((apply_isometries(r, &vs)?, vs))
}

/// Tensors each party with an ancilla K_X: projectors become Π ⊗ I and the
/// state becomes ψ ⊗ junk, ordered as ⊗_X (H_X ⊗ K_X).
pub fn with_ancilla(r: &Realization, junk_dims: &[usize], junk: &DVector<f64>) -> Result<Realization> {
    let dims = r.dims();
    if junk_dims.len() != dims.len() {
        return Err(Error::Dimension("one ancilla dimension per party is required".into()));
    }
    let ids: Vec<DMatrix<f64>> = dims
        .iter()
        .zip(junk_dims)
        .map(|(d, k)| DMatrix::identity(d * k, d * k))
        .collect();
    let state = embed(&ids, &dims, junk_dims, &r.state, junk)?;
    let parties = r
        .parties
        .iter()
        .zip(junk_dims)
        .map(|(p, &k)| PartyMeasurements {
            dim: p.dim * k,
            projectors: p
                .projectors
                .iter()
                .map(|q| LocalProjector {
                    setting: q.setting,
                    outcome: q.outcome,
                    matrix: kron(&q.matrix, &DMatrix::identity(k, k)),
                    vector: None,
                })
                .collect(),
        })
        .collect();
    Realization::new(state, parties)
}

/// Block-diagonal rotation Σ_j U_j ⊗ |j⟩⟨j| on H ⊗ K.
pub fn block_rotation(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let k = blocks.len();
    let d = blocks.first().map_or(0, |b| b.nrows());
    let mut w = DMatrix::zeros(d * k, d * k);
    for (j, u) in blocks.iter().enumerate() {
        for a in 0..d {
            for b in 0..d {
                w[(a * k + j, b * k + j)] = u[(a, b)];
            }
        }
    }
    w
}

/// Rotates the projectors of one setting of one party by `angle` in the
/// plane of the first two coordinates. The state is left alone, so for a
/// non-zero angle the result is generally not optimal.
pub fn perturbed(r: &Realization, party: usize, setting: i32, angle: f64) -> Result<Realization> {
    let p = r
        .parties
        .get(party)
        .ok_or_else(|| Error::Input(format!("no party {party}")))?;
    if p.dim < 2 {
        return Err(Error::Dimension("perturbation needs dimension at least 2".into()));
    }
    let mut g = DMatrix::identity(p.dim, p.dim);
    let (c, s) = (angle.cos(), angle.sin());
    g[(0, 0)] = c;
    g[(0, 1)] = -s;
    g[(1, 0)] = s;
    g[(1, 1)] = c;
    let mut out = r.clone();
    for q in &mut out.parties[party].projectors {
        if q.setting == setting {
            q.matrix = &g * &q.matrix * g.transpose();
            q.vector = q.vector.as_ref().map(|u| &g * u);
        }
    }
    out.validate()?;
    Ok(out)
}
