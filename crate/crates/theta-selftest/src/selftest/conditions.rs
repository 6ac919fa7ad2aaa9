//! Structural conditions on the product form of the optimizer, with the
//! index sets and connectivity graphs that certify them.

use std::collections::{BTreeSet, VecDeque};

use itertools::Itertools;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::bell::Realization;
use crate::error::{Error, Result};
use crate::linalg::{kron_vec, rank_of};

use super::structure::ProductStructure;

/// Threshold for "nonzero overlap".
pub const OVERLAP_TOL: f64 = 1e-8;
/// Singular-value threshold for spanning checks.
pub const SPAN_TOL: f64 = 1e-8;
/// Tolerance for Π + Π' = I.
pub const COMPLETENESS_TOL: f64 = 1e-10;
/// Cap on index-set combinations tried per search.
const SEARCH_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub holds: bool,
    pub reason: String,
}

/// Index sets for a two-party spanning condition. `outer` plays the role of
/// I_B and `inner_sets[k]` the set I_{A, outer[k]}; `edges` is the B4 graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanEvidence {
    pub outer_party: usize,
    pub inner_party: usize,
    pub outer: Vec<usize>,
    pub inner_sets: Vec<Vec<usize>>,
    pub edges: Vec<(usize, usize)>,
}

/// Three events whose first components are `pair`, pairwise overlapping and
/// sharing exactly one local index per pair, one pair per party.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkedTriple {
    pub events: [usize; 3],
    pub pair: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripartiteEvidence {
    pub i_a: Vec<usize>,
    /// Per element of `i_a`, the (i_B, i_C) pairs of I_{BC, i_A}.
    pub i_bc: Vec<Vec<(usize, usize)>>,
    /// One certifying triple per edge of G_A.
    pub linked: Vec<LinkedTriple>,
    /// Joint form: each I_{BC, i_A} holds every partner of i_A and only
    /// their union has to span H_B⊗H_C.
    #[serde(default)]
    pub joint: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub verdicts: Vec<Verdict>,
    pub a2: Option<SpanEvidence>,
    pub a6: Option<TripartiteEvidence>,
    pub a7: Option<SpanEvidence>,
    /// Per party, orthogonal local pairs (A4/A9).
    pub pairings: Vec<Vec<(usize, usize)>>,
}

impl ConditionReport {
    pub fn holds(&self, name: &str) -> bool {
        self.verdicts.iter().any(|v| v.name == name && v.holds)
    }

    pub fn first_failure(&self, names: &[&str]) -> Option<&Verdict> {
        names
            .iter()
            .find_map(|n| self.verdicts.iter().find(|v| v.name == *n).filter(|v| !v.holds))
    }

    /// Re-derives each verdict from the recorded evidence alone.
    pub fn recheck(&self, ps: &ProductStructure) -> bool {
        self.verdicts.iter().all(|v| {
            let again = match v.name.as_str() {
                "A1" | "A5" => span_all(ps),
                "A2" => self
                    .a2
                    .as_ref()
                    .is_some_and(|e| verify_span_evidence(ps, &pairs_of(ps, e.inner_party, e.outer_party), e)),
                "A3" | "A8" => ps.dims.iter().all(|&d| d == 2),
                "A4" | "A9" => pairings_valid(ps, &self.pairings),
                "A6" => self
                    .a6
                    .as_ref()
                    .is_some_and(|e| !e.joint && verify_tripartite_evidence(ps, e)),
                "A6j" => self
                    .a6
                    .as_ref()
                    .is_some_and(|e| e.joint && verify_tripartite_evidence(ps, e)),
                "A7" => match (&self.a6, &self.a7) {
                    (Some(t), Some(e)) => verify_span_evidence(ps, &bc_pairs(t), e),
                    _ => false,
                },
                _ => return false,
            };
            again == v.holds
        })
    }
}

fn verdict(name: &str, holds: bool, reason: impl Into<String>) -> Verdict {
    Verdict {
        name: name.into(),
        holds,
        reason: reason.into(),
    }
}

fn spans(vs: &[DVector<f64>], dim: usize) -> bool {
    !vs.is_empty() && rank_of(vs, SPAN_TOL) == dim
}

fn span_all(ps: &ProductStructure) -> bool {
    let vs: Vec<DVector<f64>> = (0..ps.events.len()).map(|i| ps.product(i)).collect();
    spans(&vs, ps.dims.iter().product())
}

fn connected(nodes: &[usize], edges: &[(usize, usize)]) -> bool {
    let Some(&start) = nodes.first() else {
        return false;
    };
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        for &(a, b) in edges {
            let next = if a == u {
                b
            } else if b == u {
                a
            } else {
                continue;
            };
            if seen.insert(next) {
                queue.push_back(next);
            }
        }
    }
    nodes.iter().all(|n| seen.contains(n))
}

/// (inner, outer) local index pairs occurring in some event.
fn pairs_of(ps: &ProductStructure, inner: usize, outer: usize) -> BTreeSet<(usize, usize)> {
    ps.events.iter().map(|e| (e[inner], e[outer])).collect()
}

/// (i_C, i_B) pairs appearing in the chosen I_{BC, i_A} sets.
fn bc_pairs(t: &TripartiteEvidence) -> BTreeSet<(usize, usize)> {
    t.i_bc.iter().flatten().map(|&(b, c)| (c, b)).collect()
}

fn b4_edges(ps: &ProductStructure, outer_party: usize, outer: &[usize], sets: &[Vec<usize>]) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for p in 0..outer.len() {
        for q in p + 1..outer.len() {
            let ov = ps
                .local_vector(outer_party, outer[p])
                .dot(ps.local_vector(outer_party, outer[q]));
            let shared = sets[p].iter().any(|a| sets[q].contains(a));
            if ov.abs() > OVERLAP_TOL && shared {
                edges.push((outer[p], outer[q]));
            }
        }
    }
    edges
}

/// Exhaustive search for B1–B4 in lexicographic order.
fn span_search(
    ps: &ProductStructure,
    inner_party: usize,
    outer_party: usize,
    pairs: &BTreeSet<(usize, usize)>,
) -> std::result::Result<SpanEvidence, String> {
    let d_in = ps.dims[inner_party];
    let d_out = ps.dims[outer_party];
    let outer_ids: BTreeSet<usize> = pairs.iter().map(|p| p.1).collect();
    let mut tried = 0usize;
    for outer in outer_ids.iter().copied().combinations(d_out) {
        let bs: Vec<DVector<f64>> = outer.iter().map(|&b| ps.local_vector(outer_party, b).clone()).collect();
        if !spans(&bs, d_out) {
            continue;
        }
        let mut options = Vec::new();
        for &b in &outer {
            let partners: Vec<usize> = pairs.iter().filter(|p| p.1 == b).map(|p| p.0).collect();
            let opts: Vec<Vec<usize>> = partners
                .into_iter()
                .combinations(d_in)
                .filter(|s| {
                    let vs: Vec<DVector<f64>> = s.iter().map(|&a| ps.local_vector(inner_party, a).clone()).collect();
                    spans(&vs, d_in)
                })
                .collect();
            options.push(opts);
        }
        if options.iter().any(|o| o.is_empty()) {
            continue;
        }
        for sets in options.into_iter().multi_cartesian_product() {
            tried += 1;
            if tried > SEARCH_LIMIT {
                return Err("index-set search limit reached".into());
            }
            let edges = b4_edges(ps, outer_party, &outer, &sets);
            if connected(&outer, &edges) {
                return Ok(SpanEvidence {
                    outer_party,
                    inner_party,
                    outer,
                    inner_sets: sets,
                    edges,
                });
            }
        }
    }
    Err("no index sets satisfy B1-B4".into())
}

/// Checks B1–B4 for supplied index sets.
pub fn verify_span_evidence(ps: &ProductStructure, pairs: &BTreeSet<(usize, usize)>, e: &SpanEvidence) -> bool {
    let (ip, op) = (e.inner_party, e.outer_party);
    if e.outer.len() != ps.dims[op] || e.inner_sets.len() != e.outer.len() {
        return false;
    }
    let bs: Vec<DVector<f64>> = e.outer.iter().map(|&b| ps.local_vector(op, b).clone()).collect();
    if !spans(&bs, ps.dims[op]) {
        return false;
    }
    for (b, set) in e.outer.iter().zip(&e.inner_sets) {
        if set.len() != ps.dims[ip] || set.iter().any(|&a| !pairs.contains(&(a, *b))) {
            return false;
        }
        let vs: Vec<DVector<f64>> = set.iter().map(|&a| ps.local_vector(ip, a).clone()).collect();
        if !spans(&vs, ps.dims[ip]) {
            return false;
        }
    }
    let edges = b4_edges(ps, op, &e.outer, &e.inner_sets);
    edges == e.edges && connected(&e.outer, &edges)
}

fn orthogonal_pairings(ps: &ProductStructure, party: usize) -> Vec<(usize, usize)> {
    let n = ps.local[party].len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if ps.local_vector(party, i).dot(ps.local_vector(party, j)).abs() <= OVERLAP_TOL {
                out.push((i, j));
            }
        }
    }
    out
}

fn two_measurements(ps: &ProductStructure, party: usize, pairs: &[(usize, usize)]) -> bool {
    let n = ps.local[party].len();
    n == 4 && (0..n).all(|i| pairs.iter().any(|&(a, b)| a == i || b == i))
}

fn pairings_valid(ps: &ProductStructure, pairings: &[Vec<(usize, usize)>]) -> bool {
    pairings.len() == ps.party_count()
        && pairings
            .iter()
            .enumerate()
            .all(|(x, p)| *p == orthogonal_pairings(ps, x) && two_measurements(ps, x, p))
}

fn pairing_verdict(ps: &ProductStructure, name: &str) -> (Verdict, Vec<Vec<(usize, usize)>>) {
    let pairings: Vec<Vec<(usize, usize)>> = (0..ps.party_count()).map(|x| orthogonal_pairings(ps, x)).collect();
    let bad: Vec<usize> = (0..ps.party_count())
        .filter(|&x| !two_measurements(ps, x, &pairings[x]))
        .collect();
    let reason = if bad.is_empty() {
        "every party has two two-outcome measurements".to_string()
    } else {
        format!("parties {bad:?} do not have exactly four local vectors in orthogonal pairs")
    };
    (verdict(name, bad.is_empty(), reason), pairings)
}

fn require_parties(ps: &ProductStructure, n: usize) -> Result<()> {
    if ps.party_count() != n {
        return Err(Error::Precondition(format!(
            "expected {n} parties, structure has {}",
            ps.party_count()
        )));
    }
    Ok(())
}

/// A1–A4 for a two-party structure.
pub fn check_bipartite_conditions(ps: &ProductStructure) -> Result<ConditionReport> {
    require_parties(ps, 2)?;
    let mut verdicts = Vec::new();
    let a1 = span_all(ps);
    verdicts.push(verdict(
        "A1",
        a1,
        if a1 {
            "event vectors span H_A⊗H_B"
        } else {
            "event vectors span a proper subspace"
        },
    ));
    let a2 = span_search(ps, 0, 1, &pairs_of(ps, 0, 1));
    verdicts.push(match &a2 {
        Ok(e) => verdict("A2", true, format!("I_B = {:?}", e.outer)),
        Err(r) => verdict("A2", false, r.clone()),
    });
    let a3 = ps.dims == [2, 2];
    verdicts.push(verdict("A3", a3, format!("local dimensions {:?}", ps.dims)));
    let (a4, pairings) = pairing_verdict(ps, "A4");
    verdicts.push(a4);
    Ok(ConditionReport {
        verdicts,
        a2: a2.ok(),
        a6: None,
        a7: None,
        pairings,
    })
}

/// Linked-triple test for three events.
pub fn linked(ps: &ProductStructure, ev: [usize; 3]) -> bool {
    let [i, j, k] = ev;
    if i == j || j == k || i == k {
        return false;
    }
    let v: Vec<DVector<f64>> = ev.iter().map(|&e| ps.event_vector(e)).collect();
    if [(0, 1), (0, 2), (1, 2)]
        .iter()
        .any(|&(a, b)| v[a].dot(&v[b]).abs() <= OVERLAP_TOL)
    {
        return false;
    }
    let shared = |a: usize, b: usize| -> Option<usize> {
        let s: Vec<usize> = (0..3).filter(|&x| ps.events[a][x] == ps.events[b][x]).collect();
        (s.len() == 1).then(|| s[0])
    };
    match (shared(i, j), shared(i, k), shared(j, k)) {
        (Some(a), Some(b), Some(c)) => a != b && b != c && a != c,
        _ => false,
    }
}

fn first_linked(ps: &ProductStructure, i0: &[usize], x: usize, y: usize) -> Option<LinkedTriple> {
    let cands: Vec<usize> = i0
        .iter()
        .copied()
        .filter(|&e| ps.events[e][0] == x || ps.events[e][0] == y)
        .collect();
    for t in cands.iter().copied().combinations(3) {
        let firsts: BTreeSet<usize> = t.iter().map(|&e| ps.events[e][0]).collect();
        if firsts.len() == 2 && linked(ps, [t[0], t[1], t[2]]) {
            return Some(LinkedTriple {
                events: [t[0], t[1], t[2]],
                pair: (x, y),
            });
        }
    }
    None
}

fn i0_events(ps: &ProductStructure, i_a: &[usize], i_bc: &[Vec<(usize, usize)>]) -> Vec<usize> {
    let mut out = Vec::new();
    for (&a, set) in i_a.iter().zip(i_bc) {
        for &(b, c) in set {
            if let Some(e) = ps.find_event(&[a, b, c]) {
                out.push(e);
            }
        }
    }
    out.sort_unstable();
    out
}

fn bc_vector(ps: &ProductStructure, b: usize, c: usize) -> DVector<f64> {
    kron_vec(ps.local_vector(1, b), ps.local_vector(2, c))
}

fn g_a(ps: &ProductStructure, i_a: &[usize], i_bc: &[Vec<(usize, usize)>]) -> Vec<LinkedTriple> {
    let i0 = i0_events(ps, i_a, i_bc);
    let mut out = Vec::new();
    for p in 0..i_a.len() {
        for q in p + 1..i_a.len() {
            if let Some(t) = first_linked(ps, &i0, i_a[p], i_a[q]) {
                out.push(t);
            }
        }
    }
    out
}

fn tripartite_search(ps: &ProductStructure) -> std::result::Result<TripartiteEvidence, String> {
    let (da, dbc) = (ps.dims[0], ps.dims[1] * ps.dims[2]);
    let a_ids: BTreeSet<usize> = ps.events.iter().map(|e| e[0]).collect();
    let mut tried = 0usize;
    for i_a in a_ids.iter().copied().combinations(da) {
        let avs: Vec<DVector<f64>> = i_a.iter().map(|&a| ps.local_vector(0, a).clone()).collect();
        if !spans(&avs, da) {
            continue;
        }
        let mut options = Vec::new();
        for &a in &i_a {
            let partners: Vec<(usize, usize)> = ps.events.iter().filter(|e| e[0] == a).map(|e| (e[1], e[2])).collect();
            let opts: Vec<Vec<(usize, usize)>> = partners
                .into_iter()
                .combinations(dbc)
                .filter(|s| {
                    let vs: Vec<DVector<f64>> = s.iter().map(|&(b, c)| bc_vector(ps, b, c)).collect();
                    spans(&vs, dbc)
                })
                .collect();
            options.push(opts);
        }
        if options.iter().any(|o| o.is_empty()) {
            continue;
        }
        for i_bc in options.into_iter().multi_cartesian_product() {
            tried += 1;
            if tried > SEARCH_LIMIT {
                return Err("index-set search limit reached".into());
            }
            let linked = g_a(ps, &i_a, &i_bc);
            let edges: Vec<(usize, usize)> = linked.iter().map(|t| t.pair).collect();
            if connected(&i_a, &edges) {
                return Ok(TripartiteEvidence {
                    i_a,
                    i_bc,
                    linked,
                    joint: false,
                });
            }
        }
    }
    Err("no I_A and I_BC sets give a connected G_A".into())
}

/// Joint variant of the A6 search: I_{BC, i_A} is every partner of i_A and
/// only the union of the b⊗c vectors has to span H_B⊗H_C.
fn joint_search(ps: &ProductStructure) -> std::result::Result<TripartiteEvidence, String> {
    let da = ps.dims[0];
    let a_ids: BTreeSet<usize> = ps.events.iter().map(|e| e[0]).collect();
    for i_a in a_ids.iter().copied().combinations(da) {
        let avs: Vec<DVector<f64>> = i_a.iter().map(|&a| ps.local_vector(0, a).clone()).collect();
        if !spans(&avs, da) {
            continue;
        }
        let i_bc: Vec<Vec<(usize, usize)>> = i_a
            .iter()
            .map(|&a| ps.events.iter().filter(|e| e[0] == a).map(|e| (e[1], e[2])).collect())
            .collect();
        let e = TripartiteEvidence {
            linked: g_a(ps, &i_a, &i_bc),
            i_a,
            i_bc,
            joint: true,
        };
        if verify_tripartite_evidence(ps, &e) {
            return Ok(e);
        }
    }
    Err("no I_A whose partners jointly span H_B⊗H_C with a connected G_A".into())
}

/// Checks the A6 requirements for supplied index sets and linked triples.
pub fn verify_tripartite_evidence(ps: &ProductStructure, e: &TripartiteEvidence) -> bool {
    let (da, dbc) = (ps.dims[0], ps.dims[1] * ps.dims[2]);
    if e.i_a.len() != da || e.i_bc.len() != da {
        return false;
    }
    let avs: Vec<DVector<f64>> = e.i_a.iter().map(|&a| ps.local_vector(0, a).clone()).collect();
    if !spans(&avs, da) {
        return false;
    }
    for (&a, set) in e.i_a.iter().zip(&e.i_bc) {
        if (!e.joint && set.len() != dbc) || set.iter().any(|&(b, c)| ps.find_event(&[a, b, c]).is_none()) {
            return false;
        }
        let vs: Vec<DVector<f64>> = set.iter().map(|&(b, c)| bc_vector(ps, b, c)).collect();
        if !e.joint && !spans(&vs, dbc) {
            return false;
        }
    }
    if e.joint {
        let vs: Vec<DVector<f64>> = e.i_bc.iter().flatten().map(|&(b, c)| bc_vector(ps, b, c)).collect();
        if !spans(&vs, dbc) {
            return false;
        }
    }
    let i0 = i0_events(ps, &e.i_a, &e.i_bc);
    for t in &e.linked {
        let firsts: BTreeSet<usize> = t.events.iter().map(|&k| ps.events[k][0]).collect();
        let expect: BTreeSet<usize> = [t.pair.0, t.pair.1].into();
        if !t.events.iter().all(|k| i0.contains(k)) || firsts != expect || !linked(ps, t.events) {
            return false;
        }
    }
    let edges: Vec<(usize, usize)> = e.linked.iter().map(|t| t.pair).collect();
    connected(&e.i_a, &edges)
}

/// A5–A9 for a three-party structure.
pub fn check_tripartite_conditions(ps: &ProductStructure) -> Result<ConditionReport> {
    require_parties(ps, 3)?;
    let mut verdicts = Vec::new();
    let a5 = span_all(ps);
    verdicts.push(verdict(
        "A5",
        a5,
        if a5 {
            "event vectors span H_A⊗H_B⊗H_C"
        } else {
            "event vectors span a proper subspace"
        },
    ));
    let mut a6 = tripartite_search(ps);
    verdicts.push(match &a6 {
        Ok(e) => verdict("A6", true, format!("I_A = {:?}", e.i_a)),
        Err(r) => verdict("A6", false, r.clone()),
    });
    if a6.is_err() {
        a6 = joint_search(ps);
        verdicts.push(match &a6 {
            Ok(e) => verdict("A6j", true, format!("I_A = {:?}, partners span jointly", e.i_a)),
            Err(r) => verdict("A6j", false, r.clone()),
        });
    }
    let a7 = match &a6 {
        Ok(t) => span_search(ps, 2, 1, &bc_pairs(t)),
        Err(_) => Err("neither A6 nor its joint form holds, so there are no I_BC sets".into()),
    };
    verdicts.push(match &a7 {
        Ok(e) => verdict("A7", true, format!("I_B = {:?}", e.outer)),
        Err(r) => verdict("A7", false, r.clone()),
    });
    let a8 = ps.dims.iter().all(|&d| d == 2);
    verdicts.push(verdict("A8", a8, format!("local dimensions {:?}", ps.dims)));
    let (a9, pairings) = pairing_verdict(ps, "A9");
    verdicts.push(a9);
    Ok(ConditionReport {
        verdicts,
        a2: None,
        a6: a6.ok(),
        a7: a7.ok(),
        pairings,
    })
}

pub fn check_conditions(ps: &ProductStructure) -> Result<ConditionReport> {
    match ps.party_count() {
        2 => check_bipartite_conditions(ps),
        _ => check_tripartite_conditions(ps),
    }
}

/// C1: candidate projectors of every orthogonal reference pair sum to I.
pub fn check_projector_condition_c1(r: &Realization, ps: &ProductStructure) -> Result<bool> {
    if r.parties.len() != ps.party_count() {
        return Err(Error::Dimension(format!(
            "candidate has {} parties, structure has {}",
            r.parties.len(),
            ps.party_count()
        )));
    }
    for (x, party) in r.parties.iter().enumerate() {
        let find = |k: usize| {
            let (s, o) = ps.labels[x][k];
            party
                .projector(s, o)
                .ok_or_else(|| Error::Input(format!("candidate lacks projector ({o}|{s}) for party {x}")))
        };
        for (i, j) in orthogonal_pairings(ps, x) {
            let sum = &find(i)?.matrix + &find(j)?.matrix;
            let id = nalgebra::DMatrix::<f64>::identity(party.dim, party.dim);
            if (sum - id).amax() > COMPLETENESS_TOL {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::{chained_witness, chsh_witness, reference_realization, LocalProjector, ScenarioName};

    fn structure(name: ScenarioName) -> ProductStructure {
        let w = crate::bell::witness(name).unwrap();
        ProductStructure::from_realization(&w, &reference_realization(name).unwrap()).unwrap()
    }

    #[test]
    fn chsh_satisfies_a1_to_a4() {
        let ps = structure(ScenarioName::Chsh);
        let r = check_bipartite_conditions(&ps).unwrap();
        for c in ["A1", "A2", "A3", "A4"] {
            assert!(r.holds(c), "{c}: {:?}", r.verdicts);
        }
        assert!(r.recheck(&ps));
        let _ = chsh_witness();
    }

    #[test]
    fn chained_three_fails_a4() {
        let ps = structure(ScenarioName::Chained(3));
        let r = check_bipartite_conditions(&ps).unwrap();
        assert!(r.holds("A1") && r.holds("A2") && r.holds("A3"));
        assert!(!r.holds("A4"));
        assert!(r.recheck(&ps));
        let _ = chained_witness(3);
    }

    #[test]
    fn proper_subspace_fails_a1() {
        // every event uses the same Bob vector, so nothing spans H_B
        let e0 = DVector::from_vec(vec![1.0, 0.0]);
        let e1 = DVector::from_vec(vec![0.0, 1.0]);
        let state = DVector::from_vec(vec![1.0, 0.0, 1.0, 0.0]) / 2f64.sqrt();
        let ps = ProductStructure::new(
            vec![2, 2],
            vec![vec![(0, 0), (0, 1)], vec![(0, 0)]],
            vec![vec![e0.clone(), e1], vec![e0]],
            vec![vec![0, 0], vec![1, 0]],
            vec![0.5f64.sqrt(); 2],
            vec![1.0; 2],
            state,
        )
        .unwrap();
        let r = check_bipartite_conditions(&ps).unwrap();
        assert!(!r.holds("A1"));
        assert!(!r.holds("A2"));
        assert!(r.recheck(&ps));
    }

    fn mermin_index(ps: &ProductStructure, c: char) -> usize {
        let label = match c {
            'Z' => (0, 1),
            'O' => (0, -1),
            'P' => (1, 1),
            _ => (1, -1),
        };
        ps.labels[0].iter().position(|&l| l == label).unwrap()
    }

    #[test]
    fn mermin_conditions() {
        let ps = structure(ScenarioName::Mermin);
        let r = check_tripartite_conditions(&ps).unwrap();
        // the 16 event vectors span only the rank-7 optimizer's space
        let vs: Vec<DVector<f64>> = (0..ps.events.len()).map(|i| ps.product(i)).collect();
        assert_eq!(rank_of(&vs, SPAN_TOL), 7);
        assert!(!r.holds("A5"));
        assert!(!r.holds("A6"));
        for c in ["A6j", "A7", "A8", "A9"] {
            assert!(r.holds(c), "{c}: {:?}", r.verdicts);
        }
        assert!(r.a6.as_ref().unwrap().joint);
        assert!(r.recheck(&ps));
    }

    #[test]
    fn mermin_sets_from_the_construction() {
        let ps = structure(ScenarioName::Mermin);
        let ix = |c| mermin_index(&ps, c);
        let pair = |s: &str| {
            let c: Vec<char> = s.chars().collect();
            (ix(c[0]), ix(c[1]))
        };
        let i_a = vec![ix('O'), ix('P')];
        let i_bc = vec![
            ["OO", "ZZ", "MP", "PM"].map(pair).to_vec(),
            ["ZP", "PZ", "OM", "MO"].map(pair).to_vec(),
        ];
        let ev = |w: &str| {
            let c: Vec<usize> = w.chars().map(ix).collect();
            ps.find_event(&c).unwrap()
        };
        let t = LinkedTriple {
            events: [ev("PZP"), ev("OZZ"), ev("OMP")],
            pair: (ix('O'), ix('P')),
        };
        assert!(linked(&ps, t.events));
        // each set alone spans only three dimensions of H_B⊗H_C
        for set in &i_bc {
            let vs: Vec<DVector<f64>> = set.iter().map(|&(b, c)| bc_vector(&ps, b, c)).collect();
            assert_eq!(rank_of(&vs, SPAN_TOL), 3);
        }
        let mut e = TripartiteEvidence {
            i_a,
            i_bc,
            linked: vec![t],
            joint: false,
        };
        assert!(!verify_tripartite_evidence(&ps, &e));
        e.joint = true;
        assert!(verify_tripartite_evidence(&ps, &e));
        assert!(span_search(&ps, 2, 1, &bc_pairs(&e)).is_ok());
        let split = SpanEvidence {
            outer_party: 1,
            inner_party: 2,
            outer: vec![ix('Z'), ix('P')],
            inner_sets: vec![vec![ix('Z'), ix('P')], vec![ix('Z'), ix('M')]],
            edges: vec![(ix('Z'), ix('P'))],
        };
        assert!(verify_span_evidence(&ps, &bc_pairs(&e), &split));
    }

    #[test]
    fn disconnected_g_a_fails() {
        let ps = structure(ScenarioName::Mermin);
        let r = check_tripartite_conditions(&ps).unwrap();
        let mut e = r.a6.unwrap();
        e.linked.clear();
        assert!(!verify_tripartite_evidence(&ps, &e));
    }

    #[test]
    fn c1_examples() {
        let ps = structure(ScenarioName::Chsh);
        let r = reference_realization(ScenarioName::Chsh).unwrap();
        assert!(check_projector_condition_c1(&r, &ps).unwrap());
        let mut leaky = r.clone();
        // embed in dimension 3: the pair no longer resolves the identity
        for p in &mut leaky.parties {
            p.dim = 3;
            for q in &mut p.projectors {
                let mut m = nalgebra::DMatrix::zeros(3, 3);
                m.view_mut((0, 0), (2, 2)).copy_from(&q.matrix);
                q.matrix = m;
            }
        }
        assert!(!check_projector_condition_c1(&leaky, &ps).unwrap());
        let mut missing = r;
        missing.parties[0].projectors.pop();
        assert!(check_projector_condition_c1(&missing, &ps).is_err());
    }

    #[test]
    fn qubit_resolution_of_identity() {
        let u = DVector::from_vec(vec![0.6, 0.8]);
        let w = DVector::from_vec(vec![0.8, -0.6]);
        let a = LocalProjector::rank_one(0, 0, u);
        let b = LocalProjector::rank_one(0, 1, w);
        let sum = &a.matrix + &b.matrix;
        assert!((sum - nalgebra::DMatrix::<f64>::identity(2, 2)).amax() < COMPLETENESS_TOL);
    }
}
