//! Bell witnesses as weighted event sums, their exclusivity graphs, and
//! reference quantum realizations.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::linalg::kron_all;

/// Local label sets per party.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BellScenario {
    pub settings: Vec<Vec<i32>>,
    pub outcomes: Vec<Vec<i32>>,
}

impl BellScenario {
    pub fn new(settings: Vec<Vec<i32>>, outcomes: Vec<Vec<i32>>) -> Result<Self> {
        if settings.is_empty() || settings.len() != outcomes.len() {
            return Err(Error::Input("need matching, nonempty per-party label lists".into()));
        }
        if settings.iter().chain(&outcomes).any(|l| l.is_empty()) {
            return Err(Error::Input(
                "every party needs at least one setting and outcome".into(),
            ));
        }
        Ok(BellScenario { settings, outcomes })
    }

    /// Same settings and outcomes for every party.
    pub fn uniform(parties: usize, settings: &[i32], outcomes: &[i32]) -> Self {
        BellScenario {
            settings: vec![settings.to_vec(); parties],
            outcomes: vec![outcomes.to_vec(); parties],
        }
    }

    pub fn parties(&self) -> usize {
        self.settings.len()
    }

    pub fn setting_count(&self, party: usize) -> usize {
        self.settings[party].len()
    }

    pub fn outcome_count(&self, party: usize) -> usize {
        self.outcomes[party].len()
    }

    pub fn contains(&self, e: &Event) -> bool {
        e.outcomes.len() == self.parties()
            && e.settings.len() == self.parties()
            && (0..self.parties())
                .all(|j| self.settings[j].contains(&e.settings[j]) && self.outcomes[j].contains(&e.outcomes[j]))
    }
}

/// Product event (a⃗ | x⃗).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Event {
    pub outcomes: Vec<i32>,
    pub settings: Vec<i32>,
}

impl Event {
    pub fn new(outcomes: &[i32], settings: &[i32]) -> Self {
        Event {
            outcomes: outcomes.to_vec(),
            settings: settings.to_vec(),
        }
    }

    /// Exclusive iff some party uses the same setting with different outcomes.
    pub fn exclusive_with(&self, other: &Event) -> bool {
        self.settings
            .iter()
            .zip(&other.settings)
            .zip(self.outcomes.iter().zip(&other.outcomes))
            .any(|((x, y), (a, b))| x == y && a != b)
    }
}

impl std::fmt::Display for Event {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let j = |v: &[i32]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "({}|{})", j(&self.outcomes), j(&self.settings))
    }
}

/// value = scale·Σ w_i p_i + offset, for witnesses usually quoted in
/// operator form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineForm {
    pub scale: f64,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BellWitness {
    pub name: String,
    pub scenario: BellScenario,
    pub terms: Vec<(Event, f64)>,
    pub classical_bound: f64,
    pub affine: Option<AffineForm>,
}

#[derive(Serialize, Deserialize)]
struct TermJson {
    a: Vec<i32>,
    x: Vec<i32>,
    w: f64,
}

#[derive(Serialize, Deserialize)]
struct WitnessJson {
    name: String,
    scenario: BellScenario,
    terms: Vec<TermJson>,
    classical_bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    affine: Option<AffineForm>,
}

impl BellWitness {
    pub fn new(name: &str, scenario: BellScenario, terms: Vec<(Event, f64)>, classical_bound: f64) -> Result<Self> {
        let w = BellWitness {
            name: name.to_string(),
            scenario,
            terms,
            classical_bound,
            affine: None,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for (e, w) in &self.terms {
            if !(*w > 0.0) || !w.is_finite() {
                return Err(Error::Input(format!("weight of {e} must be positive, got {w}")));
            }
            if !self.scenario.contains(e) {
                return Err(Error::Input(format!("event {e} is outside the scenario")));
            }
            if !seen.insert(e.clone()) {
                return Err(Error::Input(format!("duplicate event {e}")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn events(&self) -> Vec<Event> {
        self.terms.iter().map(|(e, _)| e.clone()).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.terms.iter().map(|(_, w)| *w).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let j = WitnessJson {
            name: self.name.clone(),
            scenario: self.scenario.clone(),
            terms: self
                .terms
                .iter()
                .map(|(e, w)| TermJson {
                    a: e.outcomes.clone(),
                    x: e.settings.clone(),
                    w: *w,
                })
                .collect(),
            classical_bound: self.classical_bound,
            affine: self.affine,
        };
        serde_json::to_value(j).expect("witness serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let j: WitnessJson = serde_json::from_value(v.clone()).map_err(|e| Error::Input(e.to_string()))?;
        let mut w = BellWitness::new(
            &j.name,
            j.scenario,
            j.terms
                .into_iter()
                .map(|t| {
                    (
                        Event {
                            outcomes: t.a,
                            settings: t.x,
                        },
                        t.w,
                    )
                })
                .collect(),
            j.classical_bound,
        )?;
        w.affine = j.affine;
        Ok(w)
    }
}

pub fn exclusivity_graph(wit: &BellWitness) -> WeightedGraph {
    let ev = wit.events();
    let mut edges = Vec::new();
    for i in 0..ev.len() {
        for j in i + 1..ev.len() {
            if ev[i].exclusive_with(&ev[j]) {
                edges.push((i, j));
            }
        }
    }
    WeightedGraph::new(ev.len(), &edges, wit.weights()).expect("witness weights are positive")
}

/// ±⟨A_i B_j⟩ for ±1-valued observables, written as 2P(..) + 2P(..) − 1.
pub fn correlator_to_probability_terms(sign: i32, settings: (i32, i32)) -> Result<(Vec<(Event, f64)>, f64)> {
    let (i, j) = settings;
    let pairs: [(i32, i32); 2] = match sign {
        1 => [(1, 1), (-1, -1)],
        -1 => [(1, -1), (-1, 1)],
        _ => return Err(Error::Input(format!("correlator sign must be ±1, got {sign}"))),
    };
    Ok((
        pairs
            .iter()
            .map(|&(a, b)| (Event::new(&[a, b], &[i, j]), 2.0))
            .collect(),
        -1.0,
    ))
}

/// Expands Σ_k s_k⟨A_{i_k} B_{j_k}⟩ into probability terms and a constant.
/// Repeated events have their weights merged.
pub fn expand_correlators(correlators: &[(i32, (i32, i32))]) -> Result<(Vec<(Event, f64)>, f64)> {
    let mut terms: Vec<(Event, f64)> = Vec::new();
    let mut offset = 0.0;
    for &(s, xy) in correlators {
        let (t, o) = correlator_to_probability_terms(s, xy)?;
        offset += o;
        for (e, w) in t {
            match terms.iter_mut().find(|(f, _)| *f == e) {
                Some(slot) => slot.1 += w,
                None => terms.push((e, w)),
            }
        }
    }
    Ok((terms, offset))
}

/// Correlators of the chained inequality: (1,2), (3,2), (3,4), …,
/// (2N−1, 2N) with sign +, and (1, 2N) with sign −.
pub fn chained_correlators(big_n: usize) -> Vec<(i32, (i32, i32))> {
    let n = big_n as i32;
    let mut out = Vec::new();
    for k in 1..=n {
        let a = 2 * k - 1;
        if k > 1 {
            out.push((1, (a, 2 * k - 2)));
        }
        out.push((1, (a, 2 * k)));
    }
    out.push((-1, (1, 2 * n)));
    out
}

pub fn chsh_witness() -> BellWitness {
    let ev: [([i32; 2], [i32; 2]); 8] = [
        ([0, 0], [0, 0]),
        ([1, 1], [0, 1]),
        ([1, 0], [1, 1]),
        ([0, 0], [1, 0]),
        ([1, 1], [0, 0]),
        ([0, 0], [0, 1]),
        ([0, 1], [1, 1]),
        ([1, 1], [1, 0]),
    ];
    BellWitness::new(
        "chsh",
        BellScenario::uniform(2, &[0, 1], &[0, 1]),
        ev.iter().map(|(a, x)| (Event::new(a, x), 1.0)).collect(),
        3.0,
    )
    .expect("valid witness")
}

/// Chained witness with unit weights: the correlator form divided by two.
/// Classical bound (2N − 2 + 2N)/2 = 2N − 1.
pub fn chained_witness(big_n: usize) -> Result<BellWitness> {
    if big_n < 2 {
        return Err(Error::Input(format!("chained witness needs N >= 2, got {big_n}")));
    }
    let n = big_n as i32;
    let (terms, offset) = expand_correlators(&chained_correlators(big_n))?;
    let correlator_bound = 2.0 * big_n as f64 - 2.0;
    let scenario = BellScenario::new(
        vec![(1..=n).map(|k| 2 * k - 1).collect(), (1..=n).map(|k| 2 * k).collect()],
        vec![vec![1, -1], vec![1, -1]],
    )?;
    let mut w = BellWitness::new(
        &format!("chained:{big_n}"),
        scenario,
        terms.into_iter().map(|(e, w)| (e, w / 2.0)).collect(),
        (correlator_bound - offset) / 2.0,
    )?;
    // ⟨I_N⟩ = 2Σp − 2N
    w.affine = Some(AffineForm { scale: 2.0, offset });
    Ok(w)
}

/// Mermin event words over {Z, O, P, M}: Z/O are the ±1 outcomes of the
/// Z setting, P/M the ±1 outcomes of the X setting.
pub const MERMIN_WORDS: [&str; 16] = [
    "ZPP", "OMP", "OPM", "ZMM", "PZP", "MOP", "MZM", "POM", "PPZ", "MMZ", "MPO", "PMO", "OOO", "ZZO", "ZOZ", "OZZ",
];

pub const MERMIN_Z: i32 = 0;
pub const MERMIN_X: i32 = 1;

fn mermin_letter(c: char) -> (i32, i32) {
    match c {
        'Z' => (1, MERMIN_Z),
        'O' => (-1, MERMIN_Z),
        'P' => (1, MERMIN_X),
        'M' => (-1, MERMIN_X),
        _ => unreachable!("mermin words use Z, O, P, M"),
    }
}

pub fn mermin_event(word: &str) -> Event {
    let (a, x): (Vec<i32>, Vec<i32>) = word.chars().map(mermin_letter).unzip();
    Event {
        outcomes: a,
        settings: x,
    }
}

/// Mermin witness as a sum of 16 event probabilities; the operator
/// expectation is 2Σp − 4.
pub fn mermin_witness() -> BellWitness {
    let mut w = BellWitness::new(
        "mermin",
        BellScenario::uniform(3, &[MERMIN_Z, MERMIN_X], &[1, -1]),
        MERMIN_WORDS.iter().map(|s| (mermin_event(s), 1.0)).collect(),
        3.0,
    )
    .expect("valid witness");
    w.affine = Some(AffineForm {
        scale: 2.0,
        offset: -4.0,
    });
    w
}

/// AS4 witness: correlated events for pairs with i + j < 4, anti-correlated
/// events for i + j = 4, with weight 2 on the (2,2) pair.
pub fn as4_witness() -> BellWitness {
    let mut terms = Vec::new();
    for i in 0..4 {
        for j in 0..4 - i {
            for a in 0..2 {
                terms.push((Event::new(&[a, a], &[i, j]), 1.0));
            }
        }
    }
    for (i, j, w) in [(1, 3, 1.0), (2, 2, 2.0), (3, 1, 1.0)] {
        for a in 0..2 {
            terms.push((Event::new(&[a, 1 - a], &[i, j]), w));
        }
    }
    BellWitness::new("as4", BellScenario::uniform(2, &[0, 1, 2, 3], &[0, 1]), terms, 10.0).expect("valid witness")
}

/// One local projector, optionally with the unit vector it projects onto.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalProjector {
    pub setting: i32,
    pub outcome: i32,
    pub matrix: DMatrix<f64>,
    pub vector: Option<DVector<f64>>,
}

impl LocalProjector {
    pub fn rank_one(setting: i32, outcome: i32, v: DVector<f64>) -> Self {
        let v = v.normalize();
        LocalProjector {
            setting,
            outcome,
            matrix: &v * v.transpose(),
            vector: Some(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartyMeasurements {
    pub dim: usize,
    pub projectors: Vec<LocalProjector>,
}

impl PartyMeasurements {
    pub fn projector(&self, setting: i32, outcome: i32) -> Option<&LocalProjector> {
        self.projectors
            .iter()
            .find(|p| p.setting == setting && p.outcome == outcome)
    }

    pub fn settings(&self) -> Vec<i32> {
        let mut s: Vec<i32> = self.projectors.iter().map(|p| p.setting).collect();
        s.sort();
        s.dedup();
        s
    }

    pub fn outcomes_of(&self, setting: i32) -> Vec<&LocalProjector> {
        self.projectors.iter().filter(|p| p.setting == setting).collect()
    }
}

/// Pure state on ⊗_j H_j plus projective measurements for every party.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub state: DVector<f64>,
    pub parties: Vec<PartyMeasurements>,
}

#[derive(Serialize, Deserialize)]
struct ProjectorJson {
    setting: i32,
    outcome: i32,
    matrix: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vector: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct PartyJson {
    dim: usize,
    projectors: Vec<ProjectorJson>,
}

#[derive(Serialize, Deserialize)]
struct RealizationJson {
    state: Vec<f64>,
    parties: Vec<PartyJson>,
}

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn matrix_of(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, |x| x.len());
    if rows.iter().any(|x| x.len() != c) {
        return Err(Error::Input("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub const STATE_NORM_TOL: f64 = 1e-12;
pub const PROJECTOR_TOL: f64 = 1e-10;

impl Realization {
    pub fn new(state: DVector<f64>, parties: Vec<PartyMeasurements>) -> Result<Self> {
        let r = Realization { state, parties };
        r.validate()?;
        Ok(r)
    }

    pub fn dims(&self) -> Vec<usize> {
        self.parties.iter().map(|p| p.dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.parties.is_empty() {
            return Err(Error::Input("realization has no parties".into()));
        }
        if self.state.len() != self.total_dim() {
            return Err(Error::Dimension(format!(
                "state has length {}, local dimensions {:?}",
                self.state.len(),
                self.dims()
            )));
        }
        if (self.state.norm() - 1.0).abs() > STATE_NORM_TOL {
            return Err(Error::Input(format!("state norm {} is not 1", self.state.norm())));
        }
        for (j, party) in self.parties.iter().enumerate() {
            for p in &party.projectors {
                let m = &p.matrix;
                if m.nrows() != party.dim || m.ncols() != party.dim {
                    return Err(Error::Dimension(format!(
                        "party {j} projector ({}|{}) has shape {}x{}, expected {}",
                        p.outcome,
                        p.setting,
                        m.nrows(),
                        m.ncols(),
                        party.dim
                    )));
                }
                if (m - m.transpose()).amax() > PROJECTOR_TOL || (m * m - m).amax() > PROJECTOR_TOL {
                    return Err(Error::Input(format!(
                        "party {j} operator ({}|{}) is not an orthogonal projector",
                        p.outcome, p.setting
                    )));
                }
            }
            for s in party.settings() {
                let outs = party.outcomes_of(s);
                for a in 0..outs.len() {
                    for b in a + 1..outs.len() {
                        if (&outs[a].matrix * &outs[b].matrix).amax() > PROJECTOR_TOL {
                            return Err(Error::Input(format!(
                                "party {j} setting {s}: outcomes {} and {} are not orthogonal",
                                outs[a].outcome, outs[b].outcome
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn local(&self, e: &Event) -> Result<Vec<&LocalProjector>> {
        if e.settings.len() != self.parties.len() {
            return Err(Error::Dimension(format!(
                "event {e} has {} parties, realization has {}",
                e.settings.len(),
                self.parties.len()
            )));
        }
        e.settings
            .iter()
            .zip(&e.outcomes)
            .zip(&self.parties)
            .map(|((&x, &a), p)| {
                p.projector(x, a)
                    .ok_or_else(|| Error::Input(format!("no projector for ({a}|{x}) in event {e}")))
            })
            .collect()
    }

    /// ⊗_j M_{a_j|x_j}.
    pub fn event_projector(&self, e: &Event) -> Result<DMatrix<f64>> {
        let parts: Vec<DMatrix<f64>> = self.local(e)?.into_iter().map(|p| p.matrix.clone()).collect();
        Ok(kron_all(&parts))
    }

    /// Π_e ψ.
    pub fn event_vector(&self, e: &Event) -> Result<DVector<f64>> {
        Ok(self.event_projector(e)? * &self.state)
    }

    /// Defining local unit vectors of a rank-one event.
    pub fn event_local_vectors(&self, e: &Event) -> Result<Vec<DVector<f64>>> {
        self.local(e)?
            .into_iter()
            .map(|p| {
                p.vector
                    .clone()
                    .ok_or_else(|| Error::Precondition(format!("projector in {e} carries no vector")))
            })
            .collect()
    }

    /// tr(Π_e Π_f) as a product of local traces.
    pub fn overlap_trace(&self, e: &Event, f: &Event) -> Result<f64> {
        let a = self.local(e)?;
        let b = self.local(f)?;
        Ok(a.iter().zip(&b).map(|(p, q)| (&p.matrix * &q.matrix).trace()).product())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let j = RealizationJson {
            state: self.state.iter().cloned().collect(),
            parties: self
                .parties
                .iter()
                .map(|p| PartyJson {
                    dim: p.dim,
                    projectors: p
                        .projectors
                        .iter()
                        .map(|q| ProjectorJson {
                            setting: q.setting,
                            outcome: q.outcome,
                            matrix: rows_of(&q.matrix),
                            vector: q.vector.as_ref().map(|v| v.iter().cloned().collect()),
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_value(j).expect("realization serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let j: RealizationJson = serde_json::from_value(v.clone()).map_err(|e| Error::Input(e.to_string()))?;
        let mut parties = Vec::new();
        for p in j.parties {
            let mut projectors = Vec::new();
            for q in p.projectors {
                projectors.push(LocalProjector {
                    setting: q.setting,
                    outcome: q.outcome,
                    matrix: matrix_of(&q.matrix)?,
                    vector: q.vector.map(DVector::from_vec),
                });
            }
            parties.push(PartyMeasurements { dim: p.dim, projectors });
        }
        Realization::new(DVector::from_vec(j.state), parties)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Σ w_i p_i.
    pub value: f64,
    pub behavior: Vec<f64>,
    /// Value in the witness's operator form, when it has one.
    pub affine_value: Option<f64>,
    /// Graph edges (i, j) with tr(Π_i Π_j) above tolerance.
    pub exclusivity_violations: Vec<(usize, usize, f64)>,
}

pub fn evaluate_witness(wit: &BellWitness, r: &Realization) -> Result<Evaluation> {
    r.validate()?;
    if wit.scenario.parties() != r.parties.len() {
        return Err(Error::Dimension(format!(
            "witness has {} parties, realization has {}",
            wit.scenario.parties(),
            r.parties.len()
        )));
    }
    let mut behavior = Vec::with_capacity(wit.len());
    for (e, _) in &wit.terms {
        behavior.push(r.state.dot(&r.event_vector(e)?));
    }
    let value: f64 = behavior.iter().zip(wit.weights()).map(|(p, w)| p * w).sum();
    let g = exclusivity_graph(wit);
    let ev = wit.events();
    let mut violations = Vec::new();
    for &(i, j) in g.edges() {
        let t = r.overlap_trace(&ev[i], &ev[j])?;
        if t.abs() > PROJECTOR_TOL {
            violations.push((i, j, t));
        }
    }
    Ok(Evaluation {
        value,
        behavior,
        affine_value: wit.affine.map(|a| a.scale * value + a.offset),
        exclusivity_violations: violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioName {
    Chsh,
    Chained(usize),
    Mermin,
    As4,
}

impl std::str::FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        match lower.as_str() {
            "chsh" => Ok(ScenarioName::Chsh),
            "mermin" => Ok(ScenarioName::Mermin),
            "as4" => Ok(ScenarioName::As4),
            _ => match lower.strip_prefix("chained:") {
                Some(n) => n
                    .parse::<usize>()
                    .map(ScenarioName::Chained)
                    .map_err(|_| Error::Input(format!("bad chained size in {s:?}"))),
                None => Err(Error::Input(format!("unknown scenario {s:?}"))),
            },
        }
    }
}

impl std::fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScenarioName::Chsh => write!(f, "chsh"),
            ScenarioName::Chained(n) => write!(f, "chained:{n}"),
            ScenarioName::Mermin => write!(f, "mermin"),
            ScenarioName::As4 => write!(f, "as4"),
        }
    }
}

pub fn witness(name: ScenarioName) -> Result<BellWitness> {
    match name {
        ScenarioName::Chsh => Ok(chsh_witness()),
        ScenarioName::Chained(n) => chained_witness(n),
        ScenarioName::Mermin => Ok(mermin_witness()),
        ScenarioName::As4 => Ok(as4_witness()),
    }
}

fn m(x: f64) -> DVector<f64> {
    DVector::from_vec(vec![x.cos(), x.sin()])
}

fn v2(a: f64, b: f64) -> DVector<f64> {
    DVector::from_vec(vec![a, b])
}

fn party(dim: usize, projectors: Vec<LocalProjector>) -> PartyMeasurements {
    PartyMeasurements { dim, projectors }
}

fn phi_plus() -> DVector<f64> {
    DVector::from_vec(vec![1.0, 0.0, 0.0, 1.0]) / 2f64.sqrt()
}

pub fn reference_realization(name: ScenarioName) -> Result<Realization> {
    match name {
        ScenarioName::Chsh => {
            let a = 1.0 / 2f64.sqrt();
            let (c, d) = ((PI / 8.0).cos(), (PI / 8.0).sin());
            let alice = vec![
                LocalProjector::rank_one(0, 0, v2(1.0, 0.0)),
                LocalProjector::rank_one(0, 1, v2(0.0, -1.0)),
                LocalProjector::rank_one(1, 0, v2(a, a)),
                LocalProjector::rank_one(1, 1, v2(a, -a)),
            ];
            let bob = vec![
                LocalProjector::rank_one(0, 0, v2(c, d)),
                LocalProjector::rank_one(0, 1, v2(d, -c)),
                LocalProjector::rank_one(1, 0, v2(c, -d)),
                LocalProjector::rank_one(1, 1, v2(-d, -c)),
            ];
            Realization::new(phi_plus(), vec![party(2, alice), party(2, bob)])
        }
        ScenarioName::Chained(big_n) => {
            if big_n < 2 {
                return Err(Error::Input(format!("chained needs N >= 2, got {big_n}")));
            }
            let local = |labels: Vec<i32>| {
                let mut ps = Vec::new();
                for k in labels {
                    let phi = (k - 1) as f64 * PI / (2.0 * big_n as f64);
                    ps.push(LocalProjector::rank_one(k, 1, m(phi / 2.0)));
                    ps.push(LocalProjector::rank_one(k, -1, m(phi / 2.0 + PI / 2.0)));
                }
                party(2, ps)
            };
            let n = big_n as i32;
            Realization::new(
                phi_plus(),
                vec![
                    local((1..=n).map(|k| 2 * k - 1).collect()),
                    local((1..=n).map(|k| 2 * k).collect()),
                ],
            )
        }
        ScenarioName::Mermin => {
            let s = 1.0 / 2f64.sqrt();
            let local = || {
                party(
                    2,
                    vec![
                        LocalProjector::rank_one(MERMIN_Z, 1, v2(1.0, 0.0)),
                        LocalProjector::rank_one(MERMIN_Z, -1, v2(0.0, 1.0)),
                        LocalProjector::rank_one(MERMIN_X, 1, v2(s, s)),
                        LocalProjector::rank_one(MERMIN_X, -1, v2(s, -s)),
                    ],
                )
            };
            let state = DVector::from_vec(vec![0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, -1.0]) * 0.5;
            Realization::new(state, vec![local(), local(), local()])
        }
        ScenarioName::As4 => {
            let al = as4_angles();
            let t = (al[1] + 2.0 * al[3] - 1.5 * PI) / 2.0;
            let state = DVector::from_vec(vec![t.cos(), t.sin(), t.sin(), -t.cos()]) / 2f64.sqrt();
            let mut alice = Vec::new();
            let mut bob = Vec::new();
            for (i, &a) in al.iter().enumerate() {
                for o in 0..2 {
                    let shift = o as f64 * PI / 2.0;
                    alice.push(LocalProjector::rank_one(i as i32, o, m(a + shift)));
                    bob.push(LocalProjector::rank_one(i as i32, o, m(PI / 2.0 + a + shift)));
                }
            }
            Realization::new(state, vec![party(2, alice), party(2, bob)])
        }
    }
}

/// Measurement angles α_0..α_3 of the AS4 realization, from their closed forms.
pub fn as4_angles() -> [f64; 4] {
    let r145 = 145f64.sqrt();
    [
        0.0,
        (1.0 / 6f64.sqrt()).asin(),
        0.5 * (PI - (5.0 * r145 / 8.0 + 77.0 / 8.0).sqrt().atan()),
        0.5 * (PI - (48.0 * (2.0 / (275.0 * r145 + 3317.0)).sqrt()).atan()),
    ]
}

/// 7 + 5√6/3.
pub fn as4_theta() -> f64 {
    7.0 + 5.0 * 6f64.sqrt() / 3.0
}
