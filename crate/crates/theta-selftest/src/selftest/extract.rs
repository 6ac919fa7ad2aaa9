//! Constructive isometry extraction. The rank-one routines follow the
//! spanning-set arguments; the general routines split each candidate party
//! into two-dimensional blocks and run the rank-one routine per block.

use std::collections::{BTreeMap, VecDeque};

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use crate::bell::{Event, LocalProjector, PartyMeasurements, Realization};
use crate::error::{Error, Result};
use crate::linalg::{eigh, gauge_matrix, isometry_defect, kron, kron_all, kron_all_vec, kron_vec, span_basis};

use super::conditions::{
    check_bipartite_conditions, check_projector_condition_c1, check_tripartite_conditions, ConditionReport,
    LinkedTriple, SpanEvidence, TripartiteEvidence, OVERLAP_TOL,
};
use super::structure::{rank_one_vector, ProductStructure, ETA_TOL};
use super::{embed, Pipeline, SelfTestReport};

/// Entrywise tolerance when comparing candidate and reference Gram matrices.
pub const GRAM_TOL: f64 = 1e-8;
/// Tolerance for the consistency checks made during extraction.
pub const EXTRACT_TOL: f64 = 1e-7;
/// Largest state weight allowed outside the two-dimensional blocks.
pub const SECTOR_TOL: f64 = 1e-8;
const BLOCK_WEIGHT_TOL: f64 = 1e-9;
const EIG_TOL: f64 = 1e-9;
const GAUGE_TOL: f64 = 1e-8;

/// Ungauged output of a rank-one extraction.
struct Parts {
    isometries: Vec<DMatrix<f64>>,
    alpha: Vec<(usize, f64)>,
    gamma: Vec<(usize, f64)>,
}

fn projector_for<'a>(ps: &ProductStructure, cand: &'a Realization, x: usize, k: usize) -> Result<&'a LocalProjector> {
    let (s, o) = ps.labels[x][k];
    cand.parties[x]
        .projector(s, o)
        .ok_or_else(|| Error::Input(format!("candidate lacks projector ({o}|{s}) for party {x}")))
}

fn event_of(ps: &ProductStructure, i: usize) -> Event {
    let (settings, outcomes): (Vec<i32>, Vec<i32>) =
        ps.events[i].iter().enumerate().map(|(x, &k)| ps.labels[x][k]).unzip();
    Event::new(&outcomes, &settings)
}

fn check_shape(ps: &ProductStructure, cand: &Realization) -> Result<()> {
    cand.validate()?;
    if cand.parties.len() != ps.party_count() {
        return Err(Error::Dimension(format!(
            "candidate has {} parties, reference has {}",
            cand.parties.len(),
            ps.party_count()
        )));
    }
    Ok(())
}

/// Π'_i ψ' for every event.
pub fn candidate_event_vectors(ps: &ProductStructure, cand: &Realization) -> Result<Vec<DVector<f64>>> {
    (0..ps.events.len())
        .map(|i| cand.event_vector(&event_of(ps, i)))
        .collect()
}

/// Max entrywise deviation between the candidate's Gram matrix (handle plus
/// Π'_i ψ') and the reference's.
pub fn gram_deviation(ps: &ProductStructure, cand: &Realization) -> Result<f64> {
    check_shape(ps, cand)?;
    let mut vs = vec![cand.state.clone()];
    vs.extend(candidate_event_vectors(ps, cand)?);
    Ok(super::structure::gram_of(&vs).max_abs_diff(&ps.gram()))
}

pub fn require_optimizer(ps: &ProductStructure, cand: &Realization) -> Result<()> {
    let dev = gram_deviation(ps, cand)?;
    if dev > GRAM_TOL {
        return Err(Error::NotAnOptimizer(format!("Gram mismatch: max deviation {dev:.3e}")));
    }
    Ok(())
}

/// Unit vectors of the candidate's projectors, per party and local index;
/// `None` where the projector is not rank one.
pub fn candidate_vectors(ps: &ProductStructure, cand: &Realization) -> Result<Vec<Vec<Option<DVector<f64>>>>> {
    (0..ps.party_count())
        .map(|x| {
            (0..ps.labels[x].len())
                .map(|k| Ok(rank_one_vector(projector_for(ps, cand, x, k)?)))
                .collect()
        })
        .collect()
}

/// True when every projector used by an event is rank one.
pub fn candidate_is_rank_one(ps: &ProductStructure, cand: &Realization) -> Result<bool> {
    let vecs = candidate_vectors(ps, cand)?;
    Ok(ps
        .events
        .iter()
        .all(|e| e.iter().enumerate().all(|(x, &k)| vecs[x][k].is_some())))
}

fn rank_one_locals(ps: &ProductStructure, cand: &Realization) -> Result<Vec<Vec<Option<DVector<f64>>>>> {
    let vecs = candidate_vectors(ps, cand)?;
    for e in &ps.events {
        for (x, &k) in e.iter().enumerate() {
            if vecs[x][k].is_none() {
                let (s, o) = ps.labels[x][k];
                return Err(Error::Precondition(format!(
                    "candidate projector ({o}|{s}) of party {x} is not rank one"
                )));
            }
        }
    }
    Ok(vecs)
}

fn cand_vec(vecs: &[Vec<Option<DVector<f64>>>], x: usize, k: usize) -> &DVector<f64> {
    vecs[x][k].as_ref().expect("rank-one vector checked")
}

/// τ_i = η'_i / (s_i η_i), which is ±1 for an optimal candidate.
fn event_signs(ps: &ProductStructure, cand: &Realization, vecs: &[Vec<Option<DVector<f64>>>]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(ps.events.len());
    for (i, e) in ps.events.iter().enumerate() {
        let parts: Vec<DVector<f64>> = e
            .iter()
            .enumerate()
            .map(|(x, &k)| cand_vec(vecs, x, k).clone())
            .collect();
        let eta = kron_all_vec(&parts).dot(&cand.state);
        if eta.abs() < ETA_TOL {
            return Err(Error::NotAnOptimizer(format!(
                "event {} has zero amplitude in the candidate",
                event_of(ps, i)
            )));
        }
        let tau = eta / (ps.signs[i] * ps.etas[i]);
        if (tau.abs() - 1.0).abs() > EXTRACT_TOL {
            return Err(Error::NotAnOptimizer(format!(
                "event {} has amplitude ratio {tau:.6}",
                event_of(ps, i)
            )));
        }
        out.push(tau.signum());
    }
    Ok(out)
}

/// The linear map sending each reference vector to its target; the
/// references form a basis.
fn map_basis(refs: &[DVector<f64>], targets: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    let r = DMatrix::from_columns(refs);
    let inv = r
        .try_inverse()
        .ok_or_else(|| Error::Precondition("reference spanning set is singular".into()))?;
    Ok(DMatrix::from_columns(targets) * inv)
}

fn require_isometry(v: &DMatrix<f64>, what: &str) -> Result<()> {
    let d = isometry_defect(v);
    if d > EXTRACT_TOL {
        return Err(Error::NotAnOptimizer(format!(
            "{what} is not an isometry (defect {d:.3e})"
        )));
    }
    Ok(())
}

/// Two-party step shared by the bipartite extraction and the B/C split.
/// `tau` maps (inner, outer) local indices to the sign carried by the pair.
/// Returns (V_inner, V_outer, consistency constants per outer index).
fn bipartite_core(
    ps: &ProductStructure,
    vecs: &[Vec<Option<DVector<f64>>>],
    tau: &BTreeMap<(usize, usize), f64>,
    ev: &SpanEvidence,
) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<(usize, f64)>)> {
    let (ip, op) = (ev.inner_party, ev.outer_party);
    let sign = |a: usize, b: usize| -> Result<f64> {
        tau.get(&(a, b))
            .copied()
            .ok_or_else(|| Error::Precondition(format!("index pair ({a}, {b}) is not an event")))
    };
    let mut maps = Vec::new();
    for (&b, set) in ev.outer.iter().zip(&ev.inner_sets) {
        let refs: Vec<DVector<f64>> = set.iter().map(|&a| ps.local_vector(ip, a).clone()).collect();
        let mut targets = Vec::new();
        for &a in set {
            targets.push(cand_vec(vecs, ip, a) * sign(a, b)?);
        }
        maps.push(map_basis(&refs, &targets)?);
    }
    let n = ev.outer.len();
    let mut c = vec![0.0; n];
    c[0] = 1.0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for &(p, q) in &ev.edges {
            let other = if p == ev.outer[u] {
                q
            } else if q == ev.outer[u] {
                p
            } else {
                continue;
            };
            let w = ev.outer.iter().position(|&b| b == other).expect("edge inside I_B");
            if c[w] != 0.0 {
                continue;
            }
            let a = *ev.inner_sets[u]
                .iter()
                .find(|a| ev.inner_sets[w].contains(a))
                .ok_or_else(|| Error::Precondition("B4 edge without a shared index".into()))?;
            c[w] = c[u] * sign(a, ev.outer[u])? * sign(a, ev.outer[w])?;
            let diff = (&maps[w] * c[w] - &maps[u] * c[u]).amax();
            if diff > EXTRACT_TOL {
                return Err(Error::NotAnOptimizer(format!(
                    "isometries built on indices {} and {} of party {op} disagree by {diff:.3e}",
                    ev.outer[u], ev.outer[w]
                )));
            }
            queue.push_back(w);
        }
    }
    if c.contains(&0.0) {
        return Err(Error::Precondition("B4 graph is disconnected".into()));
    }
    let v_in = maps.swap_remove(0);
    let refs: Vec<DVector<f64>> = ev.outer.iter().map(|&b| ps.local_vector(op, b).clone()).collect();
    let targets: Vec<DVector<f64>> = ev
        .outer
        .iter()
        .zip(&c)
        .map(|(&b, &ck)| cand_vec(vecs, op, b) * ck)
        .collect();
    let v_out = map_basis(&refs, &targets)?;
    require_isometry(&v_in, &format!("V for party {ip}"))?;
    require_isometry(&v_out, &format!("V for party {op}"))?;
    Ok((v_in, v_out, ev.outer.iter().copied().zip(c).collect()))
}

fn bipartite_parts(ps: &ProductStructure, cand: &Realization, report: &ConditionReport) -> Result<Parts> {
    let ev = report
        .a2
        .as_ref()
        .ok_or_else(|| Error::Precondition("A2 evidence missing".into()))?;
    let vecs = rank_one_locals(ps, cand)?;
    let taus = event_signs(ps, cand, &vecs)?;
    let tau: BTreeMap<(usize, usize), f64> = ps.events.iter().zip(&taus).map(|(e, &t)| ((e[0], e[1]), t)).collect();
    let (va, vb, gamma) = bipartite_core(ps, &vecs, &tau, ev)?;
    Ok(Parts {
        isometries: vec![va, vb],
        alpha: Vec::new(),
        gamma,
    })
}

/// Overlap ratio ⟨a_x, a_y⟩ / ⟨a'_x, a'_y⟩ for party `p`.
fn overlap_ratio(
    ps: &ProductStructure,
    vecs: &[Vec<Option<DVector<f64>>>],
    p: usize,
    x: usize,
    y: usize,
) -> Result<f64> {
    let num = ps.local_vector(p, x).dot(ps.local_vector(p, y));
    let den = cand_vec(vecs, p, x).dot(cand_vec(vecs, p, y));
    if den.abs() <= OVERLAP_TOL {
        return Err(Error::NotAnOptimizer(format!(
            "candidate vectors {x} and {y} of party {p} are orthogonal but the reference ones are not"
        )));
    }
    Ok(num / den)
}

/// Sign dichotomy on a linked triple: after absorbing each event's τ into
/// the component it does not share, the three overlap ratios are all +1 or
/// all −1.
fn check_sign_dichotomy(
    ps: &ProductStructure,
    vecs: &[Vec<Option<DVector<f64>>>],
    taus: &[f64],
    t: &LinkedTriple,
) -> Result<()> {
    let mut rhos = Vec::new();
    for p in 0..3 {
        let ev = t.events;
        let (s1, s2, u) = if ps.events[ev[0]][p] == ps.events[ev[1]][p] {
            (ev[0], ev[1], ev[2])
        } else if ps.events[ev[0]][p] == ps.events[ev[2]][p] {
            (ev[0], ev[2], ev[1])
        } else {
            (ev[1], ev[2], ev[0])
        };
        debug_assert_eq!(ps.events[s1][p], ps.events[s2][p]);
        rhos.push(taus[u] * overlap_ratio(ps, vecs, p, ps.events[s1][p], ps.events[u][p])?);
    }
    let ok = rhos.iter().all(|r| (r.abs() - 1.0).abs() <= EXTRACT_TOL)
        && (rhos.iter().all(|&r| r > 0.0) || rhos.iter().all(|&r| r < 0.0));
    if !ok {
        return Err(Error::NotAnOptimizer(format!(
            "linked triple {:?} violates the sign dichotomy (ratios {rhos:?})",
            t.events
        )));
    }
    Ok(())
}

/// Least-squares V_BC over every (i_A, b, c) in the evidence, with targets
/// α(i_A) τ b'⊗c'. The fit has to be exact.
fn joint_bc_map(
    ps: &ProductStructure,
    vecs: &[Vec<Option<DVector<f64>>>],
    taus: &[f64],
    t: &TripartiteEvidence,
    alpha: &BTreeMap<usize, f64>,
) -> Result<DMatrix<f64>> {
    let mut refs = Vec::new();
    let mut targets = Vec::new();
    for (&a, set) in t.i_a.iter().zip(&t.i_bc) {
        for &(b, c) in set {
            let i = ps.find_event(&[a, b, c]).expect("I_BC pairs are events");
            refs.push(kron_vec(ps.local_vector(1, b), ps.local_vector(2, c)));
            targets.push(kron_vec(cand_vec(vecs, 1, b), cand_vec(vecs, 2, c)) * (alpha[&a] * taus[i]));
        }
    }
    let s = DMatrix::from_columns(&refs);
    let tm = DMatrix::from_columns(&targets);
    let inv = (&s * s.transpose())
        .try_inverse()
        .ok_or_else(|| Error::Precondition("b⊗c vectors do not span H_B⊗H_C".into()))?;
    let v = &tm * s.transpose() * inv;
    let misfit = (&v * &s - &tm).amax();
    if misfit > EXTRACT_TOL {
        return Err(Error::NotAnOptimizer(format!(
            "no linear V_BC fits the B⊗C targets (misfit {misfit:.3e})"
        )));
    }
    Ok(v)
}

fn tripartite_parts(ps: &ProductStructure, cand: &Realization, report: &ConditionReport) -> Result<Parts> {
    let (t, e7) = match (&report.a6, &report.a7) {
        (Some(t), Some(e)) => (t, e),
        _ => return Err(Error::Precondition("A6/A7 evidence missing".into())),
    };
    let vecs = rank_one_locals(ps, cand)?;
    let taus = event_signs(ps, cand, &vecs)?;
    let event = |a: usize, b: usize, c: usize| ps.find_event(&[a, b, c]).expect("I_BC pairs are events");

    let mut w = BTreeMap::new();
    for (&a, set) in t.i_a.iter().zip(&t.i_bc).filter(|_| !t.joint) {
        let refs: Vec<DVector<f64>> = set
            .iter()
            .map(|&(b, c)| kron_vec(ps.local_vector(1, b), ps.local_vector(2, c)))
            .collect();
        let targets: Vec<DVector<f64>> = set
            .iter()
            .map(|&(b, c)| kron_vec(cand_vec(&vecs, 1, b), cand_vec(&vecs, 2, c)) * taus[event(a, b, c)])
            .collect();
        w.insert(a, map_basis(&refs, &targets)?);
    }

    // spanning tree of G_A by breadth-first search from the lowest index
    let root = *t.i_a.iter().min().expect("I_A is non-empty");
    let mut alpha = BTreeMap::from([(root, 1.0)]);
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        for triple in &t.linked {
            let (p, q) = triple.pair;
            let v = if p == u {
                q
            } else if q == u {
                p
            } else {
                continue;
            };
            if alpha.contains_key(&v) {
                continue;
            }
            check_sign_dichotomy(ps, &vecs, &taus, triple)?;
            let r = overlap_ratio(ps, &vecs, 0, u, v)?;
            if (r.abs() - 1.0).abs() > EXTRACT_TOL {
                return Err(Error::NotAnOptimizer(format!(
                    "overlap ratio {r:.6} between A indices {u} and {v} is not ±1"
                )));
            }
            let rho = r.signum();
            if !t.joint {
                let diff = (&w[&v] - &w[&u] * rho).amax();
                if diff > EXTRACT_TOL {
                    return Err(Error::NotAnOptimizer(format!(
                        "V_BC for A indices {u} and {v} disagree by {diff:.3e}"
                    )));
                }
            }
            alpha.insert(v, alpha[&u] * rho);
            queue.push_back(v);
        }
    }
    if alpha.len() != t.i_a.len() {
        return Err(Error::Precondition("G_A is disconnected".into()));
    }
    let v_bc = if t.joint {
        joint_bc_map(ps, &vecs, &taus, t, &alpha)?
    } else {
        w.remove(&root).expect("root has a map")
    };
    let refs: Vec<DVector<f64>> = t.i_a.iter().map(|&a| ps.local_vector(0, a).clone()).collect();
    let targets: Vec<DVector<f64>> = t.i_a.iter().map(|&a| cand_vec(&vecs, 0, a) * alpha[&a]).collect();
    let v_a = map_basis(&refs, &targets)?;
    require_isometry(&v_a, "V for party 0")?;

    let mut s: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (&a, set) in t.i_a.iter().zip(&t.i_bc) {
        for &(b, c) in set {
            let val = alpha[&a] * taus[event(a, b, c)];
            if let Some(&old) = s.get(&(c, b)) {
                if old != val {
                    return Err(Error::NotAnOptimizer(format!(
                        "pair ({b}, {c}) carries inconsistent signs"
                    )));
                }
            }
            s.insert((c, b), val);
        }
    }
    let (v_c, v_b, gamma) = bipartite_core(ps, &vecs, &s, e7)?;
    let diff = (kron(&v_b, &v_c) - &v_bc).amax();
    if diff > EXTRACT_TOL {
        return Err(Error::NotAnOptimizer(format!(
            "V_B ⊗ V_C differs from V_BC by {diff:.3e}"
        )));
    }
    Ok(Parts {
        isometries: vec![v_a, v_b, v_c],
        alpha: alpha.into_iter().collect(),
        gamma,
    })
}

fn residuals(ps: &ProductStructure, cand: &Realization, report: &mut SelfTestReport) -> Result<()> {
    let image = embed(&report.isometries, &ps.dims, &report.junk_dims, &ps.state, &report.junk)?;
    report.state_residual = (image - &cand.state).norm();
    let targets = candidate_event_vectors(ps, cand)?;
    report.vector_residuals = (0..ps.events.len())
        .map(|i| {
            let img = embed(
                &report.isometries,
                &ps.dims,
                &report.junk_dims,
                &ps.event_vector(i),
                &report.junk,
            )?;
            Ok((img - &targets[i]).norm())
        })
        .collect::<Result<_>>()?;
    Ok(())
}

fn finish_rank_one(
    ps: &ProductStructure,
    cand: &Realization,
    parts: Parts,
    pipeline: Pipeline,
    conditions: ConditionReport,
) -> Result<SelfTestReport> {
    let mut sign = 1.0;
    let mut isometries = parts.isometries;
    for v in &mut isometries {
        sign *= gauge_matrix(v, GAUGE_TOL);
    }
    let n = isometries.len();
    let mut report = SelfTestReport {
        pipeline,
        labels: ps.labels.clone(),
        isometries,
        junk_dims: vec![1; n],
        junk: DVector::from_element(1, sign),
        state_residual: f64::NAN,
        vector_residuals: Vec::new(),
        alpha: parts.alpha,
        gamma: parts.gamma,
        sector_weights: vec![0.0; n],
        conditions,
    };
    residuals(ps, cand, &mut report)?;
    Ok(report)
}

fn require(report: &ConditionReport, names: &[&str]) -> Result<()> {
    match report.first_failure(names) {
        Some(v) => Err(Error::Precondition(format!("condition {} fails: {}", v.name, v.reason))),
        None => Ok(()),
    }
}

/// A6 in either its per-index or its joint form, then `rest`. A5 is not
/// demanded: the extracted maps are checked against every event instead.
fn require_tripartite(report: &ConditionReport, rest: &[&str]) -> Result<()> {
    if !report.holds("A6") && !report.holds("A6j") {
        let v = report.first_failure(&["A6j", "A6"]).expect("A6 verdict present");
        return Err(Error::Precondition(format!("condition {} fails: {}", v.name, v.reason)));
    }
    require(report, rest)
}

fn require_parties(ps: &ProductStructure, n: usize) -> Result<()> {
    if ps.party_count() != n {
        return Err(Error::Precondition(format!(
            "expected {n} parties, got {}",
            ps.party_count()
        )));
    }
    Ok(())
}

pub fn extract_bipartite_isometries_rank1(ps: &ProductStructure, cand: &Realization) -> Result<SelfTestReport> {
    require_parties(ps, 2)?;
    let cond = check_bipartite_conditions(ps)?;
    require(&cond, &["A1", "A2"])?;
    require_optimizer(ps, cand)?;
    let parts = bipartite_parts(ps, cand, &cond)?;
    finish_rank_one(ps, cand, parts, Pipeline::BipartiteRankOne, cond)
}

pub fn extract_tripartite_isometries_rank1(ps: &ProductStructure, cand: &Realization) -> Result<SelfTestReport> {
    require_parties(ps, 3)?;
    let cond = check_tripartite_conditions(ps)?;
    require_tripartite(&cond, &["A7"])?;
    require_optimizer(ps, cand)?;
    let parts = tripartite_parts(ps, cand, &cond)?;
    finish_rank_one(ps, cand, parts, Pipeline::TripartiteRankOne, cond)
}

/// Applies `op` to party `x` of a state on ⊗ dims.
fn apply_local(op: &DMatrix<f64>, x: usize, dims: &[usize], psi: &DVector<f64>) -> DVector<f64> {
    let parts: Vec<DMatrix<f64>> = dims
        .iter()
        .enumerate()
        .map(|(y, &d)| if y == x { op.clone() } else { DMatrix::identity(d, d) })
        .collect();
    kron_all(&parts) * psi
}

/// Two-dimensional invariant blocks of the pair (P, Q): eigenvectors e of
/// PQP on the range of P with eigenvalue strictly inside (0, 1), each with
/// partner g ∝ (1 − |e⟩⟨e|)Qe.
fn jordan_blocks(p: &DMatrix<f64>, q: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let (pv, pvec) = eigh(p);
    let cols: Vec<DVector<f64>> = (0..pv.len())
        .filter(|&k| pv[k] > 0.5)
        .map(|k| pvec.column(k).into_owned())
        .collect();
    if cols.is_empty() {
        return Vec::new();
    }
    let r = DMatrix::from_columns(&cols);
    let (mu, u) = eigh(&(r.transpose() * q * &r));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for k in 0..mu.len() {
        if mu[k] <= EIG_TOL || mu[k] >= 1.0 - EIG_TOL {
            continue;
        }
        match groups.last_mut() {
            Some(g) if (mu[k] - mu[g[0]]).abs() <= 1e-7 => g.push(k),
            _ => groups.push(vec![k]),
        }
    }
    let mut blocks = Vec::new();
    for g in groups {
        let f = &r * DMatrix::from_columns(&g.iter().map(|&k| u.column(k).into_owned()).collect::<Vec<_>>());
        let proj = &f * f.transpose();
        for e in span_basis(&proj, 1e-6).into_iter().take(g.len()) {
            let mut fq = q * &e;
            fq /= fq.norm();
            let mut gv = &fq - &e * e.dot(&fq);
            gv /= gv.norm();
            blocks.push(DMatrix::from_columns(&[e, gv]));
        }
    }
    blocks
}

fn restrict(cand: &Realization, blocks: &[&DMatrix<f64>], state: DVector<f64>) -> Result<Realization> {
    let parties = cand
        .parties
        .iter()
        .zip(blocks)
        .map(|(party, e)| PartyMeasurements {
            dim: e.ncols(),
            projectors: party
                .projectors
                .iter()
                .map(|p| LocalProjector {
                    setting: p.setting,
                    outcome: p.outcome,
                    matrix: e.transpose() * &p.matrix * *e,
                    vector: None,
                })
                .collect(),
        })
        .collect();
    Realization::new(state, parties)
}

fn extract_general(
    ps: &ProductStructure,
    cand: &Realization,
    cond: ConditionReport,
    pipeline: Pipeline,
) -> Result<SelfTestReport> {
    require_optimizer(ps, cand)?;
    if !check_projector_condition_c1(cand, ps)? {
        return Err(Error::Precondition(
            "condition C1 fails: orthogonal projector pairs do not sum to I".into(),
        ));
    }
    let n = ps.party_count();
    let dims = cand.dims();
    let mut blocks = Vec::with_capacity(n);
    let mut sector_weights = Vec::with_capacity(n);
    for x in 0..n {
        let labels = &ps.labels[x];
        let q_idx = labels
            .iter()
            .position(|l| l.0 != labels[0].0)
            .ok_or_else(|| Error::Precondition(format!("party {x} has a single setting")))?;
        let p = &projector_for(ps, cand, x, 0)?.matrix;
        let q = &projector_for(ps, cand, x, q_idx)?.matrix;
        let bl = jordan_blocks(p, q);
        let mut covered = DMatrix::<f64>::identity(dims[x], dims[x]);
        for e in &bl {
            covered -= e * e.transpose();
        }
        let w = apply_local(&covered, x, &dims, &cand.state).norm();
        if w > SECTOR_TOL {
            return Err(Error::NotAnOptimizer(format!(
                "party {x}: state weight {w:.3e} outside the two-dimensional blocks"
            )));
        }
        sector_weights.push(w);
        blocks.push(bl);
    }

    let mut maps: Vec<BTreeMap<usize, DMatrix<f64>>> = vec![BTreeMap::new(); n];
    let mut amps: Vec<(Vec<usize>, f64)> = Vec::new();
    let mut first_parts: Option<(Vec<(usize, f64)>, Vec<(usize, f64)>)> = None;
    for tuple in blocks.iter().map(|b| 0..b.len()).multi_cartesian_product() {
        let es: Vec<&DMatrix<f64>> = tuple.iter().enumerate().map(|(x, &j)| &blocks[x][j]).collect();
        let down: Vec<DMatrix<f64>> = es.iter().map(|e| e.transpose()).collect();
        let phi = kron_all(&down) * &cand.state;
        let beta = phi.norm();
        if beta <= BLOCK_WEIGHT_TOL {
            continue;
        }
        let sub = restrict(cand, &es, phi / beta)
            .map_err(|e| Error::NotAnOptimizer(format!("block {tuple:?} is not invariant: {e}")))?;
        require_optimizer(ps, &sub)?;
        let parts = match n {
            2 => bipartite_parts(ps, &sub, &cond)?,
            _ => tripartite_parts(ps, &sub, &cond)?,
        };
        let mut sign = 1.0;
        for (x, v) in parts.isometries.iter().enumerate() {
            let mut m = es[x] * v;
            sign *= gauge_matrix(&mut m, GAUGE_TOL);
            match maps[x].get(&tuple[x]) {
                Some(old) => {
                    let diff = (old - &m).amax();
                    if diff > EXTRACT_TOL {
                        return Err(Error::NotAnOptimizer(format!(
                            "party {x} block {} gets isometries differing by {diff:.3e}",
                            tuple[x]
                        )));
                    }
                }
                None => {
                    maps[x].insert(tuple[x], m);
                }
            }
        }
        // the rank-one pieces here are ungauged, so their product carries no extra sign
        amps.push((tuple, beta * sign));
        if first_parts.is_none() {
            first_parts = Some((parts.alpha, parts.gamma));
        }
    }
    if amps.is_empty() {
        return Err(Error::NotAnOptimizer("state has no weight on any block".into()));
    }

    let mut isometries = Vec::with_capacity(n);
    let mut junk_dims = Vec::with_capacity(n);
    let mut slot: Vec<BTreeMap<usize, usize>> = Vec::with_capacity(n);
    for x in 0..n {
        let k = maps[x].len();
        let d = ps.dims[x];
        let mut v = DMatrix::zeros(dims[x], d * k);
        let mut s = BTreeMap::new();
        for (pos, (&j, m)) in maps[x].iter().enumerate() {
            s.insert(j, pos);
            for h in 0..d {
                v.set_column(h * k + pos, &m.column(h));
            }
        }
        isometries.push(v);
        junk_dims.push(k);
        slot.push(s);
    }
    let mut junk = DVector::zeros(junk_dims.iter().product());
    for (tuple, a) in amps {
        let mut idx = 0;
        for x in 0..n {
            idx = idx * junk_dims[x] + slot[x][&tuple[x]];
        }
        junk[idx] = a;
    }
    let (alpha, gamma) = first_parts.unwrap_or_default();
    let mut report = SelfTestReport {
        pipeline,
        labels: ps.labels.clone(),
        isometries,
        junk_dims,
        junk,
        state_residual: f64::NAN,
        vector_residuals: Vec::new(),
        alpha,
        gamma,
        sector_weights,
        conditions: cond,
    };
    residuals(ps, cand, &mut report)?;
    Ok(report)
}

pub fn extract_bipartite_isometries_general(ps: &ProductStructure, cand: &Realization) -> Result<SelfTestReport> {
    require_parties(ps, 2)?;
    let cond = check_bipartite_conditions(ps)?;
    require(&cond, &["A1", "A2", "A3", "A4"])?;
    extract_general(ps, cand, cond, Pipeline::BipartiteGeneral)
}

pub fn extract_tripartite_isometries_general(ps: &ProductStructure, cand: &Realization) -> Result<SelfTestReport> {
    require_parties(ps, 3)?;
    let cond = check_tripartite_conditions(ps)?;
    require_tripartite(&cond, &["A7", "A8", "A9"])?;
    extract_general(ps, cand, cond, Pipeline::TripartiteGeneral)
}
