use std::collections::HashSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::functions::DemandSpec;
use crate::probability::{decode_into, encode, entropy_of, JointPmf, Pmf, MODEL_TOL, SUPPORT_EPS};
use crate::topology::Placement;

pub const MAX_POWER_VERTICES: usize = 100_000;
pub const MAX_POWER_EDGES: u128 = 20_000_000;

/// An undirected graph on positive-probability local symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct CharGraph {
    labels: Vec<Vec<u32>>,
    pmf: Vec<f64>,
    adj: Vec<Vec<usize>>,
}

impl CharGraph {
    /// Builds a graph from vertex labels, masses and an edge list.
    ///
    /// Vertices with zero mass are dropped together with their edges; the
    /// remaining masses are renormalized. Duplicate edges are merged.
    pub fn new(labels: Vec<Vec<u32>>, mass: Vec<f64>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = labels.len();
        if mass.len() != n {
            return Err(Error::GraphMismatch(format!(
                "{n} labels but {} masses",
                mass.len()
            )));
        }
        if mass.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidPmf(
                "negative or non-finite vertex mass".into(),
            ));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MODEL_TOL {
            return Err(Error::ModelIntegrity {
                sum: total,
                tol: MODEL_TOL,
            });
        }
        let mut keep = vec![usize::MAX; n];
        let mut kept_labels = Vec::new();
        let mut kept_mass = Vec::new();
        for v in 0..n {
            if mass[v] > SUPPORT_EPS {
                keep[v] = kept_labels.len();
                kept_labels.push(labels[v].clone());
                kept_mass.push(mass[v]);
            }
        }
        if kept_labels.is_empty() {
            return Err(Error::EmptySupport(
                "graph has no positive-mass vertex".into(),
            ));
        }
        let s: f64 = kept_mass.iter().sum();
        kept_mass.iter_mut().for_each(|p| *p /= s);
        let mut adj = vec![Vec::new(); kept_labels.len()];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::GraphMismatch(format!("edge ({a},{b}) out of range")));
            }
            if a == b {
                return Err(Error::GraphMismatch(format!("self-loop at vertex {a}")));
            }
            let (a, b) = (keep[a], keep[b]);
            if a == usize::MAX || b == usize::MAX {
                continue;
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self {
            labels: kept_labels,
            pmf: kept_mass,
            adj,
        })
    }

    /// Complete graph on `pmf.len()` vertices labelled by index.
    pub fn complete(pmf: &Pmf) -> Result<Self> {
        let n = pmf.alphabet_size();
        let edges: Vec<_> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .collect();
        Self::new(
            (0..n as u32).map(|v| vec![v]).collect(),
            pmf.mass().to_vec(),
            &edges,
        )
    }

    /// Edgeless graph on `pmf.len()` vertices labelled by index.
    pub fn edgeless(pmf: &Pmf) -> Result<Self> {
        let n = pmf.alphabet_size();
        Self::new(
            (0..n as u32).map(|v| vec![v]).collect(),
            pmf.mass().to_vec(),
            &[],
        )
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Vec<u32>] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> &[u32] {
        &self.labels[v]
    }

    /// Vertex index carrying `label`, if present.
    pub fn vertex_of(&self, label: &[u32]) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn vertex_pmf(&self) -> Pmf {
        Pmf::from_model(self.pmf.clone()).expect("vertex masses are normalized")
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&b).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges `(a, b)` with `a < b`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(a, list)| list.iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
    }

    pub fn is_complete(&self) -> bool {
        self.adj.iter().all(|l| l.len() + 1 == self.len())
    }

    pub fn is_edgeless(&self) -> bool {
        self.adj.iter().all(Vec::is_empty)
    }

    /// Entropy of the vertex distribution.
    pub fn source_entropy(&self) -> f64 {
        entropy_of(self.pmf.iter().copied())
    }

    /// Same vertices and edges under new vertex masses (zero masses prune).
    pub fn with_pmf(&self, mass: Vec<f64>) -> Result<Self> {
        let edges: Vec<_> = self.edges().collect();
        Self::new(self.labels.clone(), mass, &edges)
    }

    /// Adjacency rows as bit masks; requires at most 64 vertices.
    pub(crate) fn masks(&self) -> Option<Vec<u64>> {
        if self.len() > 64 {
            return None;
        }
        Some(
            self.adj
                .iter()
                .map(|l| l.iter().fold(0u64, |m, &b| m | (1u64 << b)))
                .collect(),
        )
    }

    /// Graphviz rendering with vertices labelled by their local tuples.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("graph G {\n");
        for (v, (label, p)) in self.labels.iter().zip(&self.pmf).enumerate() {
            let text: Vec<String> = label.iter().map(u32::to_string).collect();
            let _ = writeln!(s, "  {v} [label=\"{}\", p=\"{p:.6}\"];", text.join(","));
        }
        for (a, b) in self.edges() {
            let _ = writeln!(s, "  {a} -- {b};");
        }
        s.push_str("}\n");
        s
    }
}

/// Output key of the selected demands, as a mixed-radix integer.
fn output_key(d: &DemandSpec, subset: &[usize], w: &[u32], buf: &mut [u32]) -> u64 {
    d.eval_into(w, buf);
    let q = d.q() as u64;
    subset.iter().fold(0u64, |k, &j| k * q + buf[j] as u64)
}

/// Characteristic graph of server `i` for the demands in `demand_subset`
/// (0-based), under `joint` over `(W_1, .., W_K)`.
///
/// Two local realizations are adjacent when some assignment of the
/// datasets the server does not hold has positive probability with both
/// and some selected demand differs on the two merged tuples.
pub fn build_char_graph(
    d: &DemandSpec,
    p: &Placement,
    joint: &JointPmf,
    i: usize,
    demand_subset: &[usize],
) -> Result<CharGraph> {
    let k = p.n_datasets();
    d.check_arity(k)?;
    if joint.arity() != k {
        return Err(Error::Arity {
            expected: k,
            got: joint.arity(),
        });
    }
    let q = d.q() as usize;
    if joint.radices().iter().any(|&r| r != q) {
        return Err(Error::GraphMismatch(format!(
            "joint alphabet sizes {:?} do not match field size {q}",
            joint.radices()
        )));
    }
    if i >= p.n_servers() {
        return Err(Error::InvalidTopology(format!("no server {}", i + 1)));
    }
    if demand_subset.is_empty() || demand_subset.iter().any(|&j| j >= d.kc()) {
        return Err(Error::InvalidDemand(format!(
            "bad demand subset {demand_subset:?}"
        )));
    }
    if (demand_subset.len() as f64) * (q as f64).log2() >= 63.0 {
        return Err(Error::desk(
            "demand output key",
            demand_subset.len() as u128,
            63,
        ));
    }
    let local = p.coords(i);
    let mut held = vec![false; k];
    local.iter().for_each(|&c| held[c] = true);
    let rest: Vec<usize> = (0..k).filter(|&c| !held[c]).collect();
    let local_radices = vec![q; local.len()];
    let rest_radices = vec![q; rest.len()];

    let mut w = vec![0u32; k];
    let mut buf = vec![0u32; d.kc()];
    let mut lt = vec![0u32; local.len()];
    let mut rt = vec![0u32; rest.len()];
    let mut cells = Vec::new();
    for (idx, prob) in joint.support() {
        decode_into(joint.radices(), idx, &mut w);
        local
            .iter()
            .zip(lt.iter_mut())
            .for_each(|(&c, s)| *s = w[c]);
        rest.iter().zip(rt.iter_mut()).for_each(|(&c, s)| *s = w[c]);
        cells.push(Cell {
            vertex: encode(&local_radices, &lt),
            context: encode(&rest_radices, &rt),
            key: output_key(d, demand_subset, &w, &mut buf),
            mass: prob,
        });
    }
    graph_from_cells(cells, |x| {
        let mut t = vec![0u32; local.len()];
        decode_into(&local_radices, x, &mut t);
        t
    })
}

/// One positive-probability joint outcome seen by a server: its local
/// symbol, the unseen completion, and the demanded outputs.
pub(crate) struct Cell {
    pub vertex: usize,
    pub context: usize,
    pub key: u64,
    pub mass: f64,
}

/// Edge rule over an explicit list of outcomes: local symbols are adjacent
/// when they share a completion and the outputs differ.
pub(crate) fn graph_from_cells(
    mut cells: Vec<Cell>,
    label_of: impl Fn(usize) -> Vec<u32>,
) -> Result<CharGraph> {
    if cells.is_empty() {
        return Err(Error::EmptySupport(
            "no positive-probability outcome".into(),
        ));
    }
    let mut symbols: Vec<usize> = cells.iter().map(|c| c.vertex).collect();
    symbols.sort_unstable();
    symbols.dedup();
    let id = |x: usize| symbols.binary_search(&x).expect("symbol present");
    let mut mass = vec![0.0; symbols.len()];
    for c in &cells {
        mass[id(c.vertex)] += c.mass;
    }
    let total: f64 = mass.iter().sum();
    mass.iter_mut().for_each(|m| *m /= total);

    cells.sort_unstable_by_key(|c| (c.context, c.vertex));
    let mut edges = HashSet::new();
    let mut start = 0;
    while start < cells.len() {
        let mut end = start;
        while end < cells.len() && cells[end].context == cells[start].context {
            end += 1;
        }
        let group = &cells[start..end];
        for (a, ca) in group.iter().enumerate() {
            for cb in &group[a + 1..] {
                if ca.vertex != cb.vertex && ca.key != cb.key {
                    let (x, y) = (id(ca.vertex), id(cb.vertex));
                    edges.insert((x.min(y), x.max(y)));
                }
            }
        }
        start = end;
    }
    let mut edges: Vec<_> = edges.into_iter().collect();
    edges.sort_unstable();
    let labels = symbols.iter().map(|&x| label_of(x)).collect();
    CharGraph::new(labels, mass, &edges)
}

/// Union of graphs on the same vertex set and distribution.
pub fn union_graph(gs: &[CharGraph]) -> Result<CharGraph> {
    let first = gs
        .first()
        .ok_or_else(|| Error::GraphMismatch("no graphs to unite".into()))?;
    for g in &gs[1..] {
        if g.labels != first.labels {
            return Err(Error::GraphMismatch("vertex sets differ".into()));
        }
        if g.pmf
            .iter()
            .zip(&first.pmf)
            .any(|(a, b)| (a - b).abs() > 1e-12)
        {
            return Err(Error::GraphMismatch("vertex distributions differ".into()));
        }
    }
    let mut adj = first.adj.clone();
    for g in &gs[1..] {
        for (list, other) in adj.iter_mut().zip(&g.adj) {
            list.extend_from_slice(other);
            list.sort_unstable();
            list.dedup();
        }
    }
    Ok(CharGraph {
        labels: first.labels.clone(),
        pmf: first.pmf.clone(),
        adj,
    })
}

/// `n`-th OR power: vertices are `n`-tuples with product masses, adjacent
/// when some coordinate pair is an edge of `g`.
pub fn or_power(g: &CharGraph, n: usize) -> Result<CharGraph> {
    if n == 0 {
        return Err(Error::Domain("OR power needs n >= 1".into()));
    }
    if n == 1 {
        return Ok(g.clone());
    }
    let v = g.len();
    let size = (v as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size > MAX_POWER_VERTICES as u128 {
        return Err(Error::desk(
            "OR power vertices",
            size,
            MAX_POWER_VERTICES as u128,
        ));
    }
    let size = size as usize;
    // Each tuple is non-adjacent to the product of its coordinates' closed
    // non-neighbourhoods.
    let closed_non: u128 = (0..v).map(|x| (v - g.degree(x)) as u128).sum();
    let ordered_pairs = (size as u128) * (size as u128) - closed_non.pow(n as u32);
    if ordered_pairs / 2 > MAX_POWER_EDGES {
        return Err(Error::desk(
            "OR power edges",
            ordered_pairs / 2,
            MAX_POWER_EDGES,
        ));
    }

    let mut dense = vec![false; v * v];
    for (a, b) in g.edges() {
        dense[a * v + b] = true;
        dense[b * v + a] = true;
    }
    let radices = vec![v; n];
    let mut labels = Vec::with_capacity(size);
    let mut pmf = Vec::with_capacity(size);
    let mut adj = Vec::with_capacity(size);
    let mut tuple = vec![0u32; n];
    for a in 0..size {
        decode_into(&radices, a, &mut tuple);
        labels.push(
            tuple
                .iter()
                .flat_map(|&x| g.labels[x as usize].iter().copied())
                .collect(),
        );
        pmf.push(tuple.iter().map(|&x| g.pmf[x as usize]).product());
        let mut out = Vec::new();
        power_neighbors(g, &dense, &tuple, 0, 0, false, &mut out);
        adj.push(out);
    }
    Ok(CharGraph { labels, pmf, adj })
}

fn power_neighbors(
    g: &CharGraph,
    dense: &[bool],
    a: &[u32],
    t: usize,
    prefix: usize,
    hit: bool,
    out: &mut Vec<usize>,
) {
    let v = g.len();
    let n = a.len();
    let x = a[t] as usize;
    if t + 1 == n {
        if hit {
            out.extend((0..v).map(|b| prefix * v + b));
        } else {
            out.extend(g.adj[x].iter().map(|&b| prefix * v + b));
        }
        return;
    }
    for b in 0..v {
        power_neighbors(
            g,
            dense,
            a,
            t + 1,
            prefix * v + b,
            hit || dense[x * v + b],
            out,
        );
    }
}

/// Graph on the image of `map` (vertex -> symbol) with pushforward masses;
/// two symbols are adjacent when some preimages are adjacent.
pub fn quotient_graph(g: &CharGraph, map: &[usize]) -> Result<CharGraph> {
    if map.len() != g.len() {
        return Err(Error::Arity {
            expected: g.len(),
            got: map.len(),
        });
    }
    let mut image: Vec<usize> = map.to_vec();
    image.sort_unstable();
    image.dedup();
    let id = |s: usize| image.binary_search(&s).expect("image symbol");
    let mut mass = vec![0.0; image.len()];
    for (v, &s) in map.iter().enumerate() {
        mass[id(s)] += g.pmf[v];
    }
    let edges: Vec<_> = g
        .edges()
        .map(|(a, b)| (id(map[a]), id(map[b])))
        .filter(|(a, b)| a != b)
        .collect();
    CharGraph::new(
        image.iter().map(|&s| vec![s as u32]).collect(),
        mass,
        &edges,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{cyclic_placement, Topology};

    pub(crate) fn ternary() -> CharGraph {
        CharGraph::new(
            vec![vec![1], vec![2], vec![3]],
            vec![1.0 / 3.0; 3],
            &[(0, 2)],
        )
        .unwrap()
    }

    fn scenario_two() -> (DemandSpec, Placement, JointPmf) {
        let d = DemandSpec::linear(2, vec![vec![0, 1, 0], vec![0, 1, 1]]).unwrap();
        let p = cyclic_placement(&Topology::cyclic(3, 3, 2, 2).unwrap()).unwrap();
        let j = JointPmf::iid(&Pmf::uniform(2).unwrap(), 3).unwrap();
        (d, p, j)
    }

    #[test]
    fn scenario_two_server_one_splits_on_w2() {
        let (d, p, j) = scenario_two();
        let g = build_char_graph(&d, &p, &j, 0, &[0, 1]).unwrap();
        assert_eq!(g.len(), 4);
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    assert_eq!(g.has_edge(a, b), g.label(a)[1] != g.label(b)[1]);
                }
            }
        }
    }

    #[test]
    fn scenario_two_server_two_is_complete() {
        let (d, p, j) = scenario_two();
        let g = build_char_graph(&d, &p, &j, 1, &[0, 1]).unwrap();
        assert!(g.is_complete());
        assert_eq!(g.len(), 4);
        let g1 = build_char_graph(&d, &p, &j, 1, &[0]).unwrap();
        let g2 = build_char_graph(&d, &p, &j, 1, &[1]).unwrap();
        assert!(!g1.is_complete() && !g2.is_complete());
        assert_eq!(union_graph(&[g1, g2]).unwrap(), g);
    }

    #[test]
    fn constant_demand_is_edgeless() {
        let (_, p, j) = scenario_two();
        let d = DemandSpec::linear(2, vec![vec![0, 0, 0]]).unwrap();
        assert!(build_char_graph(&d, &p, &j, 2, &[0]).unwrap().is_edgeless());
    }

    #[test]
    fn zero_mass_vertices_pruned() {
        let g = CharGraph::new(
            vec![vec![0], vec![1], vec![2]],
            vec![0.5, 0.0, 0.5],
            &[(0, 1), (1, 2)],
        )
        .unwrap();
        assert_eq!(g.len(), 2);
        assert!(g.is_edgeless());
    }

    #[test]
    fn rejects_self_loops_and_bad_masses() {
        assert!(CharGraph::new(vec![vec![0], vec![1]], vec![0.5, 0.5], &[(1, 1)]).is_err());
        assert!(CharGraph::new(vec![vec![0], vec![1]], vec![0.5, 0.4], &[]).is_err());
        assert!(CharGraph::new(vec![vec![0]], vec![0.0], &[]).is_err());
    }

    #[test]
    fn union_with_edgeless_is_identity() {
        let g = ternary();
        let e = g.with_pmf(g.pmf().to_vec()).unwrap();
        let empty = CharGraph::new(e.labels.clone(), e.pmf.clone(), &[]).unwrap();
        assert_eq!(union_graph(&[g.clone(), empty]).unwrap(), g);
        let other =
            CharGraph::new(vec![vec![1], vec![2], vec![4]], vec![1.0 / 3.0; 3], &[]).unwrap();
        assert!(union_graph(&[g, other]).is_err());
    }

    #[test]
    fn or_power_identity_and_complete() {
        let g = ternary();
        assert_eq!(or_power(&g, 1).unwrap(), g);
        let k3 = CharGraph::complete(&Pmf::uniform(3).unwrap()).unwrap();
        let p = or_power(&k3, 2).unwrap();
        assert_eq!(p.len(), 9);
        assert!(p.is_complete());
        assert!((p.pmf().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn or_power_ternary_pairs() {
        let g = ternary();
        let p = or_power(&g, 2).unwrap();
        for a in 0..9 {
            for b in 0..9 {
                let (la, lb) = (p.label(a), p.label(b));
                let want = (0..2).any(|t| {
                    let pair = (la[t], lb[t]);
                    pair == (1, 3) || pair == (3, 1)
                });
                assert_eq!(a != b && p.has_edge(a, b), want, "{la:?} {lb:?}");
            }
        }
    }

    #[test]
    fn or_power_guard() {
        let g = CharGraph::edgeless(&Pmf::uniform(10).unwrap()).unwrap();
        assert!(matches!(or_power(&g, 6), Err(Error::DeskScale { .. })));
    }

    #[test]
    fn quotient_merges_masses() {
        let g = ternary();
        let q = quotient_graph(&g, &[0, 0, 1]).unwrap();
        assert_eq!(q.len(), 2);
        assert!(q.has_edge(0, 1));
        assert!((q.pmf()[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn dot_export() {
        let dot = ternary().to_dot();
        assert!(dot.starts_with("graph G {"));
        assert!(dot.contains("0 -- 2;"));
        assert_eq!(dot.matches("--").count(), 1);
    }
}
