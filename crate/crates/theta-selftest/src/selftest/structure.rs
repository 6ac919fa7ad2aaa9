//! Product form of the reference optimizer: every event vector is a signed,
//! positively scaled tensor product of unit local vectors.

use nalgebra::{DMatrix, DVector};

use crate::bell::{BellWitness, Event, LocalProjector, Realization};
use crate::error::{Error, Result};
use crate::linalg::{gauge_vector, kron_all_vec, SymMatrix};

/// Events whose amplitude falls below this are treated as degenerate.
pub const ETA_TOL: f64 = 1e-10;
const UNIT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ProductStructure {
    pub dims: Vec<usize>,
    /// Per party, the (setting, outcome) label of each local vector.
    pub labels: Vec<Vec<(i32, i32)>>,
    pub local: Vec<Vec<DVector<f64>>>,
    /// Per event, the local index used by each party.
    pub events: Vec<Vec<usize>>,
    pub etas: Vec<f64>,
    /// v_i = signs[i] · etas[i] · ⊗ local vectors.
    pub signs: Vec<f64>,
    /// The handle.
    pub state: DVector<f64>,
}

/// Unit vector of a rank-one projector: the stored vector when present,
/// otherwise the top eigenvector with its first significant entry positive.
pub fn rank_one_vector(p: &LocalProjector) -> Option<DVector<f64>> {
    if (p.matrix.trace() - 1.0).abs() > 1e-8 {
        return None;
    }
    if let Some(v) = &p.vector {
        let n = v.norm();
        return (n > UNIT_TOL).then(|| v / n);
    }
    let (vals, vecs) = crate::linalg::eigh(&p.matrix);
    let k = vals.len() - 1;
    let mut v = vecs.column(k).into_owned();
    gauge_vector(&mut v, 1e-12);
    Some(v)
}

/// Local index of `label` in a party's sorted label list.
fn position(labels: &[(i32, i32)], label: (i32, i32)) -> Option<usize> {
    labels.iter().position(|&l| l == label)
}

impl ProductStructure {
    pub fn new(
        dims: Vec<usize>,
        labels: Vec<Vec<(i32, i32)>>,
        local: Vec<Vec<DVector<f64>>>,
        events: Vec<Vec<usize>>,
        etas: Vec<f64>,
        signs: Vec<f64>,
        state: DVector<f64>,
    ) -> Result<Self> {
        let n = dims.len();
        if !(2..=3).contains(&n) || labels.len() != n || local.len() != n {
            return Err(Error::Input(format!("product structure needs 2 or 3 parties, got {n}")));
        }
        for x in 0..n {
            if labels[x].len() != local[x].len() {
                return Err(Error::Dimension(format!(
                    "party {x}: labels and vectors differ in count"
                )));
            }
            for v in &local[x] {
                if v.len() != dims[x] || (v.norm() - 1.0).abs() > UNIT_TOL {
                    return Err(Error::Input(format!(
                        "party {x}: local vectors must be unit vectors in dimension {}",
                        dims[x]
                    )));
                }
            }
        }
        if events.len() != etas.len() || events.len() != signs.len() {
            return Err(Error::Dimension("events, etas and signs differ in length".into()));
        }
        for (i, e) in events.iter().enumerate() {
            if e.len() != n || e.iter().zip(&local).any(|(&k, l)| k >= l.len()) {
                return Err(Error::Input(format!("event {i} has out-of-range local indices")));
            }
            if !(etas[i] > 0.0) || signs[i].abs() != 1.0 {
                return Err(Error::Input(format!("event {i}: eta must be positive and sign ±1")));
            }
        }
        if state.len() != dims.iter().product::<usize>() {
            return Err(Error::Dimension("state does not live on the product space".into()));
        }
        Ok(ProductStructure {
            dims,
            labels,
            local,
            events,
            etas,
            signs,
            state,
        })
    }

    /// Reads the structure off a realization with rank-one projectors.
    /// Local indices follow the sorted (setting, outcome) labels.
    pub fn from_realization(wit: &BellWitness, r: &Realization) -> Result<Self> {
        r.validate()?;
        if wit.scenario.parties() != r.parties.len() {
            return Err(Error::Dimension(
                "witness and realization disagree on party count".into(),
            ));
        }
        let mut labels = Vec::new();
        let mut local = Vec::new();
        for (x, party) in r.parties.iter().enumerate() {
            let mut ps: Vec<&LocalProjector> = party.projectors.iter().collect();
            ps.sort_by_key(|p| (p.setting, p.outcome));
            let mut l = Vec::new();
            let mut v = Vec::new();
            for p in ps {
                let u = rank_one_vector(p).ok_or_else(|| {
                    Error::Precondition(format!(
                        "reference projector ({}|{}) of party {x} is not rank one",
                        p.outcome, p.setting
                    ))
                })?;
                l.push((p.setting, p.outcome));
                v.push(u);
            }
            labels.push(l);
            local.push(v);
        }
        let mut events = Vec::new();
        let mut etas = Vec::new();
        let mut signs = Vec::new();
        for e in wit.events() {
            let idx = event_indices(&labels, &e)?;
            let parts: Vec<DVector<f64>> = idx.iter().enumerate().map(|(x, &k)| local[x][k].clone()).collect();
            let eta = kron_all_vec(&parts).dot(&r.state);
            if eta.abs() < ETA_TOL {
                return Err(Error::Precondition(format!(
                    "event {e} has zero amplitude in the reference"
                )));
            }
            events.push(idx);
            etas.push(eta.abs());
            signs.push(eta.signum());
        }
        ProductStructure::new(r.dims(), labels, local, events, etas, signs, r.state.clone())
    }

    pub fn party_count(&self) -> usize {
        self.dims.len()
    }

    pub fn local_vector(&self, party: usize, idx: usize) -> &DVector<f64> {
        &self.local[party][idx]
    }

    /// Unscaled product ⊗ local vectors of event i.
    pub fn product(&self, i: usize) -> DVector<f64> {
        let parts: Vec<DVector<f64>> = self.events[i]
            .iter()
            .enumerate()
            .map(|(x, &k)| self.local[x][k].clone())
            .collect();
        kron_all_vec(&parts)
    }

    /// v_i = Π_i ψ.
    pub fn event_vector(&self, i: usize) -> DVector<f64> {
        self.product(i) * (self.signs[i] * self.etas[i])
    }

    /// Gram matrix of the handle followed by the event vectors.
    pub fn gram(&self) -> SymMatrix {
        let mut vs = vec![self.state.clone()];
        vs.extend((0..self.events.len()).map(|i| self.event_vector(i)));
        gram_of(&vs)
    }

    /// Event index with the given local indices.
    pub fn find_event(&self, idx: &[usize]) -> Option<usize> {
        self.events.iter().position(|e| e == idx)
    }
}

pub(crate) fn event_indices(labels: &[Vec<(i32, i32)>], e: &Event) -> Result<Vec<usize>> {
    e.settings
        .iter()
        .zip(&e.outcomes)
        .enumerate()
        .map(|(x, (&s, &o))| {
            position(&labels[x], (s, o))
                .ok_or_else(|| Error::Input(format!("no local vector for ({o}|{s}) of party {x}")))
        })
        .collect()
}

pub(crate) fn gram_of(vs: &[DVector<f64>]) -> SymMatrix {
    let m = DMatrix::from_fn(vs.len(), vs.len(), |i, j| vs[i].dot(&vs[j]));
    SymMatrix::from_matrix(m).expect("gram matrix is square")
}
