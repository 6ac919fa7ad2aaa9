//! Vertex-weighted exclusivity graphs and their combinatorial invariants.

use std::collections::BTreeSet;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest graph handled by the bitset-based exact algorithms.
pub const MAX_EXACT_VERTICES: usize = 64;
/// Largest graph handled by the automorphism search.
pub const MAX_AUTOMORPHISM_VERTICES: usize = 32;
/// Default cap on the number of maximal cliques enumerated for α*.
pub const DEFAULT_CLIQUE_LIMIT: usize = 200_000;

/// Simple undirected graph with nonnegative vertex weights. Edges are stored
/// as sorted pairs `(i, j)` with `i < j`, in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    weights: Vec<f64>,
    adj: Vec<Vec<bool>>,
}

impl WeightedGraph {
    pub fn new(n: usize, edges: &[(usize, usize)], weights: Vec<f64>) -> Result<Self> {
        if weights.len() != n {
            return Err(Error::Input(format!("expected {n} weights, got {}", weights.len())));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::Input(format!("weights must be finite and nonnegative, got {w}")));
        }
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Input(format!("edge ({a},{b}) out of range for n = {n}")));
            }
            if a == b {
                return Err(Error::Input(format!("self-loop at vertex {a}")));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(Error::Input(format!("duplicate edge ({a},{b})")));
            }
        }
        Ok(Self::from_set(n, set, weights))
    }

    pub fn unweighted(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::new(n, edges, vec![1.0; n])
    }

    fn from_set(n: usize, set: BTreeSet<(usize, usize)>, weights: Vec<f64>) -> Self {
        let mut adj = vec![vec![false; n]; n];
        for &(a, b) in &set {
            adj[a][b] = true;
            adj[b][a] = true;
        }
        WeightedGraph {
            n,
            edges: set.into_iter().collect(),
            weights,
            adj,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.n, &self.edges, weights)
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.adj[i][j]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].iter().filter(|&&b| b).count()
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.adj[i][j])
    }

    /// Returns the degree if every vertex has the same degree.
    pub fn regular_degree(&self) -> Option<usize> {
        let d = if self.n == 0 { 0 } else { self.degree(0) };
        (0..self.n).all(|i| self.degree(i) == d).then_some(d)
    }

    pub fn is_stable(&self, set: &[usize]) -> bool {
        set.iter()
            .enumerate()
            .all(|(k, &a)| set[k + 1..].iter().all(|&b| a != b && !self.adj[a][b]))
    }

    pub fn is_clique(&self, set: &[usize]) -> bool {
        set.iter()
            .enumerate()
            .all(|(k, &a)| set[k + 1..].iter().all(|&b| self.adj[a][b]))
    }

    /// Applies `perm` (old vertex i becomes new vertex perm[i]).
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n || perm.iter().collect::<BTreeSet<_>>().len() != self.n {
            return Err(Error::Input("relabeling must be a permutation".into()));
        }
        let edges: Vec<_> = self.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        let mut w = vec![0.0; self.n];
        for (i, &p) in perm.iter().enumerate() {
            w[p] = self.weights[i];
        }
        Self::new(self.n, &edges, w)
    }

    fn masks(&self) -> Result<Vec<u64>> {
        if self.n > MAX_EXACT_VERTICES {
            return Err(Error::Resource(format!(
                "exact algorithms support at most {MAX_EXACT_VERTICES} vertices, got {}",
                self.n
            )));
        }
        Ok((0..self.n)
            .map(|i| {
                (0..self.n)
                    .filter(|&j| self.adj[i][j])
                    .fold(0u64, |m, j| m | (1u64 << j))
            })
            .collect())
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            n: self.n,
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
            weights: self.weights.clone(),
        }
    }

    pub fn from_json(j: &GraphJson) -> Result<Self> {
        let edges: Vec<_> = j.edges.iter().map(|e| (e[0], e[1])).collect();
        Self::new(j.n, &edges, j.weights.clone())
    }

    /// Graphviz rendering; weight-1 vertices are drawn white, others filled.
    pub fn to_dot(&self, name: &str) -> String {
        let mut s = format!("graph {name} {{\n");
        for i in 0..self.n {
            let w = self.weights[i];
            if (w - 1.0).abs() < 1e-12 {
                s.push_str(&format!("  {i} [label=\"{i}\"];\n"));
            } else {
                s.push_str(&format!(
                    "  {i} [label=\"{i}\", weight=\"{w}\", style=filled, fillcolor=black, fontcolor=white];\n"
                ));
            }
        }
        for &(a, b) in &self.edges {
            s.push_str(&format!("  {a} -- {b};\n"));
        }
        s.push_str("}\n");
        s
    }
}

/// Graph JSON schema: `{"n": int, "edges": [[i,j],...], "weights": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    pub weights: Vec<f64>,
}

/// A list of cliques of some graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliqueCover {
    pub cliques: Vec<Vec<usize>>,
}

impl CliqueCover {
    pub fn is_valid_for(&self, g: &WeightedGraph) -> bool {
        self.cliques
            .iter()
            .all(|c| c.iter().all(|&v| v < g.n()) && g.is_clique(c))
    }
}

/// Circulant graph Ci_n[L]: vertex i is joined to i ± l (mod n) for l in L.
pub fn circulant(n: usize, offsets: &[usize]) -> Result<WeightedGraph> {
    if n < 3 {
        return Err(Error::Input(format!("circulant graphs need n >= 3, got {n}")));
    }
    if offsets.is_empty() {
        return Err(Error::Input("offset list is empty".into()));
    }
    let mut seen = BTreeSet::new();
    for &l in offsets {
        if l < 1 || l > n / 2 {
            return Err(Error::Input(format!("offset {l} outside [1, {}]", n / 2)));
        }
        if !seen.insert(l) {
            return Err(Error::Input(format!("duplicate offset {l}")));
        }
    }
    let mut set = BTreeSet::new();
    for i in 0..n {
        for &l in offsets {
            let j = (i + l) % n;
            set.insert((i.min(j), i.max(j)));
        }
    }
    Ok(WeightedGraph::from_set(n, set, vec![1.0; n]))
}

/// Möbius ladder Ci_4N(1, 2N).
pub fn mobius_ladder(big_n: usize) -> Result<WeightedGraph> {
    if big_n < 2 {
        return Err(Error::Input(format!("Möbius ladder needs N >= 2, got {big_n}")));
    }
    circulant(4 * big_n, &[1, 2 * big_n])
}

pub fn complement(g: &WeightedGraph) -> WeightedGraph {
    let mut set = BTreeSet::new();
    for i in 0..g.n() {
        for j in i + 1..g.n() {
            if !g.adjacent(i, j) {
                set.insert((i, j));
            }
        }
    }
    WeightedGraph::from_set(g.n(), set, g.weights().to_vec())
}

pub fn complete(n: usize) -> WeightedGraph {
    let set = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    WeightedGraph::from_set(n, set, vec![1.0; n])
}

pub fn empty(n: usize) -> WeightedGraph {
    WeightedGraph::from_set(n, BTreeSet::new(), vec![1.0; n])
}

pub fn path(n: usize) -> WeightedGraph {
    let set = (1..n).map(|i| (i - 1, i)).collect();
    WeightedGraph::from_set(n, set, vec![1.0; n])
}

/// Shrikhande graph as the Cayley graph of Z4×Z4 with connection set
/// ±(1,0), ±(0,1), ±(1,1). Vertex (a,b) has index 4a + b.
pub fn shrikhande() -> WeightedGraph {
    let mut set = BTreeSet::new();
    for a in 0..4 {
        for b in 0..4 {
            for (da, db) in [(1, 0), (0, 1), (1, 1), (3, 0), (0, 3), (3, 3)] {
                let u = 4 * a + b;
                let v = 4 * ((a + da) % 4) + (b + db) % 4;
                set.insert((u.min(v), u.max(v)));
            }
        }
    }
    WeightedGraph::from_set(16, set, vec![1.0; 16])
}

/// G_M: the exclusivity graph of the 16 Mermin events, in witness order.
pub fn shrikhande_complement() -> WeightedGraph {
    crate::bell::exclusivity_graph(&crate::bell::mermin_witness())
}

/// Exact weighted independence number with a stable-set witness. Among all
/// optimal sets the lexicographically smallest sorted vertex list is returned.
pub fn independence_number(g: &WeightedGraph) -> Result<(f64, Vec<usize>)> {
    let adj = g.masks()?;
    let n = g.n();
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut search = MwisSearch {
        adj: &adj,
        w: g.weights(),
        best: -1.0,
        best_set: Vec::new(),
    };
    let mut chosen = Vec::new();
    search.branch(&mut chosen, all, 0.0);
    Ok((search.best, search.best_set))
}

const TIE_EPS: f64 = 1e-12;

struct MwisSearch<'a> {
    adj: &'a [u64],
    w: &'a [f64],
    best: f64,
    best_set: Vec<usize>,
}

impl MwisSearch<'_> {
    fn branch(&mut self, chosen: &mut Vec<usize>, cand: u64, value: f64) {
        if cand == 0 {
            if value > self.best + TIE_EPS
                || ((value - self.best).abs() <= TIE_EPS && chosen.as_slice() < self.best_set.as_slice())
            {
                self.best = value;
                self.best_set = chosen.clone();
            }
            return;
        }
        if value + self.clique_cover_bound(cand) < self.best - TIE_EPS {
            return;
        }
        let v = cand.trailing_zeros() as usize;
        let bit = 1u64 << v;
        chosen.push(v);
        self.branch(chosen, cand & !bit & !self.adj[v], value + self.w[v]);
        chosen.pop();
        self.branch(chosen, cand & !bit, value);
    }

    /// Greedy partition of the candidates into cliques; a stable set meets
    /// each clique at most once, so the sum of clique maxima bounds it.
    fn clique_cover_bound(&self, cand: u64) -> f64 {
        let mut cliques: Vec<(u64, f64)> = Vec::new();
        let mut rest = cand;
        while rest != 0 {
            let v = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let bit = 1u64 << v;
            match cliques.iter_mut().find(|(m, _)| m & !self.adj[v] == 0) {
                Some((m, wmax)) => {
                    *m |= bit;
                    *wmax = wmax.max(self.w[v]);
                }
                None => cliques.push((bit, self.w[v])),
            }
        }
        cliques.iter().map(|(_, w)| w).sum()
    }
}

/// All maximal cliques (Bron–Kerbosch with Tomita pivoting), each sorted,
/// listed in lexicographic order.
pub fn maximal_cliques(g: &WeightedGraph, limit: usize) -> Result<CliqueCover> {
    let adj = g.masks()?;
    let n = g.n();
    let mut out: Vec<u64> = Vec::new();
    if n == 0 {
        return Ok(CliqueCover { cliques: Vec::new() });
    }
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    bron_kerbosch(&adj, 0, all, 0, &mut out, limit)?;
    let mut cliques: Vec<Vec<usize>> = out
        .into_iter()
        .map(|m| (0..n).filter(|&i| m >> i & 1 == 1).collect())
        .collect();
    cliques.sort();
    Ok(CliqueCover { cliques })
}

fn bron_kerbosch(adj: &[u64], r: u64, mut p: u64, mut x: u64, out: &mut Vec<u64>, limit: usize) -> Result<()> {
    if p == 0 && x == 0 {
        if out.len() >= limit {
            return Err(Error::Resource(format!("more than {limit} maximal cliques")));
        }
        out.push(r);
        return Ok(());
    }
    let mut best_pivot = 0usize;
    let mut best_count = -1i64;
    let mut px = p | x;
    while px != 0 {
        let u = px.trailing_zeros() as usize;
        px &= px - 1;
        let c = (p & adj[u]).count_ones() as i64;
        if c > best_count {
            best_count = c;
            best_pivot = u;
        }
    }
    let mut todo = p & !adj[best_pivot];
    while todo != 0 {
        let v = todo.trailing_zeros() as usize;
        todo &= todo - 1;
        let bit = 1u64 << v;
        bron_kerbosch(adj, r | bit, p & adj[v], x & adj[v], out, limit)?;
        p &= !bit;
        x |= bit;
    }
    Ok(())
}

/// Fractional packing number α*: max Σ w_i x_i subject to Σ_{i∈C} x_i ≤ 1
/// for every maximal clique C and x ≥ 0.
pub fn fractional_packing(g: &WeightedGraph) -> Result<f64> {
    fractional_packing_with_limit(g, DEFAULT_CLIQUE_LIMIT)
}

pub fn fractional_packing_with_limit(g: &WeightedGraph, limit: usize) -> Result<f64> {
    if g.n() == 0 {
        return Ok(0.0);
    }
    let cover = maximal_cliques(g, limit)?;
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = g
        .weights()
        .iter()
        .map(|&w| lp.add_var(w, (0.0, f64::INFINITY)))
        .collect();
    for c in &cover.cliques {
        let terms: Vec<_> = c.iter().map(|&i| (vars[i], 1.0)).collect();
        lp.add_constraint(terms.as_slice(), ComparisonOp::Le, 1.0);
    }
    let sol = lp
        .solve()
        .map_err(|e| Error::Input(format!("fractional packing LP failed: {e}")))?;
    Ok(sol.objective())
}

/// Finds a vertex bijection `perm` with g ~ h under i ↦ perm[i], ignoring
/// weights. Backtracking over degree-compatible candidates.
pub fn find_isomorphism(g: &WeightedGraph, h: &WeightedGraph) -> Option<Vec<usize>> {
    if g.n() != h.n() || g.edges().len() != h.edges().len() {
        return None;
    }
    let mut gd: Vec<usize> = (0..g.n()).map(|i| g.degree(i)).collect();
    let mut hd: Vec<usize> = (0..h.n()).map(|i| h.degree(i)).collect();
    let gd_orig = gd.clone();
    let hd_orig = hd.clone();
    gd.sort_unstable();
    hd.sort_unstable();
    if gd != hd {
        return None;
    }
    let order = search_order(g);
    let mut map = vec![usize::MAX; g.n()];
    let mut used = vec![false; h.n()];
    extend_map(g, h, &order, 0, &gd_orig, &hd_orig, &mut map, &mut used, None).then_some(map)
}

pub fn are_isomorphic(g: &WeightedGraph, h: &WeightedGraph) -> bool {
    find_isomorphism(g, h).is_some()
}

/// Breadth-first vertex order, so each new vertex tends to have mapped
/// neighbors that constrain it.
fn search_order(g: &WeightedGraph) -> Vec<usize> {
    let mut order = Vec::with_capacity(g.n());
    let mut seen = vec![false; g.n()];
    for s in 0..g.n() {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for v in g.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    order
}

#[allow(clippy::too_many_arguments)]
fn extend_map(
    g: &WeightedGraph,
    h: &WeightedGraph,
    order: &[usize],
    depth: usize,
    gd: &[usize],
    hd: &[usize],
    map: &mut [usize],
    used: &mut [bool],
    fixed_first: Option<usize>,
) -> bool {
    if depth == order.len() {
        return true;
    }
    let u = order[depth];
    let targets: Vec<usize> = match (depth, fixed_first) {
        (0, Some(t)) => vec![t],
        _ => (0..h.n()).collect(),
    };
    for t in targets {
        if used[t] || gd[u] != hd[t] {
            continue;
        }
        let consistent = order[..depth]
            .iter()
            .all(|&p| g.adjacent(u, p) == h.adjacent(t, map[p]));
        if !consistent {
            continue;
        }
        map[u] = t;
        used[t] = true;
        if extend_map(g, h, order, depth + 1, gd, hd, map, used, None) {
            return true;
        }
        used[t] = false;
        map[u] = usize::MAX;
    }
    false
}

/// True iff the automorphism group acts transitively on vertices. Weights
/// are ignored. Checks that vertex 0 can be sent to every other vertex.
pub fn is_vertex_transitive(g: &WeightedGraph) -> Result<bool> {
    if g.n() > MAX_AUTOMORPHISM_VERTICES {
        return Err(Error::Resource(format!(
            "automorphism search supports at most {MAX_AUTOMORPHISM_VERTICES} vertices, got {}",
            g.n()
        )));
    }
    if g.n() <= 1 {
        return Ok(true);
    }
    let deg: Vec<usize> = (0..g.n()).map(|i| g.degree(i)).collect();
    let mut order = search_order(g);
    // the search order must start at vertex 0 so the first image is fixed
    let pos = order.iter().position(|&v| v == 0).unwrap();
    order.remove(pos);
    order.insert(0, 0);
    for target in 0..g.n() {
        let mut map = vec![usize::MAX; g.n()];
        let mut used = vec![false; g.n()];
        if !extend_map(g, g, &order, 0, &deg, &deg, &mut map, &mut used, Some(target)) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circulant_fig1() {
        let g = circulant(8, &[1, 4]).unwrap();
        assert_eq!(g.edges().len(), 12);
        assert_eq!(g.regular_degree(), Some(3));
    }

    #[test]
    fn circulant_cycle_and_ladder() {
        assert_eq!(circulant(5, &[1]).unwrap().edges().len(), 5);
        assert_eq!(circulant(12, &[1, 6]).unwrap().edges().len(), 18);
    }

    #[test]
    fn circulant_rejects_bad_offsets() {
        assert!(circulant(8, &[5]).is_err());
        assert!(circulant(8, &[0]).is_err());
        assert!(circulant(8, &[1, 1]).is_err());
        assert!(circulant(2, &[1]).is_err());
    }

    #[test]
    fn mobius_examples() {
        let m2 = mobius_ladder(2).unwrap();
        assert!(are_isomorphic(&m2, &circulant(8, &[1, 4]).unwrap()));
        let m3 = mobius_ladder(3).unwrap();
        assert_eq!((m3.n(), m3.edges().len()), (12, 18));
        assert!(mobius_ladder(1).is_err());
    }

    #[test]
    fn complement_examples() {
        let k4 = complete(4);
        assert!(complement(&k4).edges().is_empty());
        let s = shrikhande();
        assert_eq!(s.regular_degree(), Some(6));
        assert_eq!(complement(&s).regular_degree(), Some(9));
    }

    #[test]
    fn independence_examples() {
        let (a, set) = independence_number(&circulant(8, &[1, 4]).unwrap()).unwrap();
        assert_eq!(a, 3.0);
        assert_eq!(set, vec![0, 2, 5]);
        assert_eq!(independence_number(&complete(6)).unwrap().0, 1.0);
    }

    #[test]
    fn independence_prefers_lexicographically_smallest() {
        // path 0-1-2: {0,2} beats {1} and is the only optimum
        let (a, set) = independence_number(&path(3)).unwrap();
        assert_eq!((a, set), (2.0, vec![0, 2]));
        // zero-weight vertex 0 is compatible with the optimum {2}
        let g = WeightedGraph::new(3, &[(1, 2)], vec![0.0, 1.0, 1.0]).unwrap();
        assert_eq!(independence_number(&g).unwrap().1, vec![0, 1]);
    }

    #[test]
    fn fractional_examples() {
        assert!((fractional_packing(&empty(5)).unwrap() - 5.0).abs() < 1e-9);
        assert!((fractional_packing(&circulant(5, &[1]).unwrap()).unwrap() - 2.5).abs() < 1e-9);
        assert!((fractional_packing(&complete(4)).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn clique_limit_is_enforced() {
        let g = complement(&complete(6));
        assert!(matches!(fractional_packing_with_limit(&g, 3), Err(Error::Resource(_))));
    }

    #[test]
    fn maximal_cliques_are_cliques() {
        let g = circulant(8, &[1, 4]).unwrap();
        let cover = maximal_cliques(&g, 1000).unwrap();
        assert_eq!(cover.cliques.len(), 12);
        assert!(cover.is_valid_for(&g));
    }

    #[test]
    fn transitivity_examples() {
        assert!(!is_vertex_transitive(&path(3)).unwrap());
        assert!(is_vertex_transitive(&circulant(10, &[1, 3]).unwrap()).unwrap());
        assert!(is_vertex_transitive(&shrikhande()).unwrap());
        assert!(is_vertex_transitive(&circulant(40, &[1]).unwrap()).is_err());
    }

    #[test]
    fn new_validates() {
        assert!(WeightedGraph::unweighted(3, &[(0, 0)]).is_err());
        assert!(WeightedGraph::unweighted(3, &[(0, 1), (1, 0)]).is_err());
        assert!(WeightedGraph::unweighted(3, &[(0, 3)]).is_err());
        assert!(WeightedGraph::new(2, &[], vec![1.0, -1.0]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let g = circulant(8, &[1, 4]).unwrap();
        let s = serde_json::to_string(&g.to_json()).unwrap();
        let back = WeightedGraph::from_json(&serde_json::from_str(&s).unwrap()).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn dot_lists_nodes_and_edges() {
        let dot = circulant(5, &[1]).unwrap().to_dot("c5");
        assert_eq!(dot.matches(" -- ").count(), 5);
        assert!(dot.starts_with("graph c5 {"));
    }
}
