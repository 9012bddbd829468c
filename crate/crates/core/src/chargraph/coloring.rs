use serde::Serialize;

use super::CharGraph;
use crate::error::{Error, Result};
use crate::probability::entropy_of;

/// Largest graph for which minimum-entropy colorings are searched exactly.
pub const MAX_EXACT_COLORING: usize = 12;

const TIE: f64 = 1e-12;

/// A vertex coloring with colors `0..n_colors`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Coloring {
    colors: Vec<usize>,
    n_colors: usize,
}

impl Coloring {
    /// Validates that adjacent vertices get distinct colors and relabels
    /// colors by first appearance.
    pub fn new(g: &CharGraph, colors: Vec<usize>) -> Result<Self> {
        if colors.len() != g.len() {
            return Err(Error::Arity {
                expected: g.len(),
                got: colors.len(),
            });
        }
        if let Some((a, b)) = g.edges().find(|&(a, b)| colors[a] == colors[b]) {
            return Err(Error::GraphMismatch(format!(
                "vertices {a} and {b} are adjacent but share a color"
            )));
        }
        Ok(Self::relabel(colors))
    }

    fn relabel(colors: Vec<usize>) -> Self {
        let mut map = std::collections::HashMap::new();
        let colors: Vec<usize> = colors
            .into_iter()
            .map(|c| {
                let next = map.len();
                *map.entry(c).or_insert(next)
            })
            .collect();
        Self {
            n_colors: map.len(),
            colors,
        }
    }

    pub fn colors(&self) -> &[usize] {
        &self.colors
    }

    pub fn color(&self, v: usize) -> usize {
        self.colors[v]
    }

    pub fn n_colors(&self) -> usize {
        self.n_colors
    }

    /// Distribution of the color of a random vertex.
    pub fn color_pmf(&self, g: &CharGraph) -> Vec<f64> {
        let mut m = vec![0.0; self.n_colors];
        for (v, &c) in self.colors.iter().enumerate() {
            m[c] += g.pmf()[v];
        }
        m
    }

    pub fn entropy(&self, g: &CharGraph) -> f64 {
        entropy_of(self.color_pmf(g))
    }
}

/// First-fit coloring in order of decreasing degree, ties by vertex id.
pub fn greedy_coloring(g: &CharGraph) -> Coloring {
    let n = g.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(g.degree(v)), v));
    let mut colors = vec![usize::MAX; n];
    let mut used = Vec::new();
    for v in order {
        used.clear();
        used.extend(
            g.neighbors(v)
                .iter()
                .map(|&u| colors[u])
                .filter(|&c| c != usize::MAX),
        );
        used.sort_unstable();
        used.dedup();
        let c = used
            .iter()
            .enumerate()
            .find(|(i, &c)| *i != c)
            .map_or(used.len(), |(i, _)| i);
        colors[v] = c;
    }
    Coloring::relabel(colors)
}

/// Coloring of minimum color entropy, ties broken by fewest colors, found
/// by branch and bound over partitions into independent sets.
pub fn min_entropy_coloring(g: &CharGraph) -> Result<Coloring> {
    let n = g.len();
    if n > MAX_EXACT_COLORING {
        return Err(Error::desk(
            "exact coloring vertices",
            n as u128,
            MAX_EXACT_COLORING as u128,
        ));
    }
    let adj = g.masks().expect("small graph");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| g.pmf()[b].total_cmp(&g.pmf()[a]).then(a.cmp(&b)));

    let seed = greedy_coloring(g);
    let mut search = Search {
        g,
        adj: &adj,
        order: &order,
        best_h: seed.entropy(g),
        best_count: seed.n_colors(),
        best: seed.colors().to_vec(),
        blocks: Vec::new(),
        colors: vec![usize::MAX; n],
    };
    search.run(0, 1.0);
    Ok(Coloring::relabel(search.best))
}

struct Search<'a> {
    g: &'a CharGraph,
    adj: &'a [u64],
    order: &'a [usize],
    best_h: f64,
    best_count: usize,
    best: Vec<usize>,
    blocks: Vec<(u64, f64)>,
    colors: Vec<usize>,
}

impl Search<'_> {
    /// Lower bound on any completion: the remaining mass joining the
    /// heaviest block majorizes every other completion.
    fn bound(&self, remaining: f64) -> f64 {
        let heaviest = self
            .blocks
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .map(|(i, _)| i);
        let masses = self.blocks.iter().enumerate().map(|(i, b)| {
            if Some(i) == heaviest {
                b.1 + remaining
            } else {
                b.1
            }
        });
        if heaviest.is_none() {
            return 0.0;
        }
        entropy_of(masses)
    }

    fn run(&mut self, depth: usize, remaining: f64) {
        let lb = self.bound(remaining);
        if lb > self.best_h + TIE
            || (lb > self.best_h - TIE && self.blocks.len() >= self.best_count)
        {
            return;
        }
        if depth == self.order.len() {
            let h = entropy_of(self.blocks.iter().map(|b| b.1));
            let k = self.blocks.len();
            if h < self.best_h - TIE || (h <= self.best_h + TIE && k < self.best_count) {
                self.best_h = h;
                self.best_count = k;
                self.best = self.colors.clone();
            }
            return;
        }
        let v = self.order[depth];
        let p = self.g.pmf()[v];
        for c in 0..self.blocks.len() {
            if self.blocks[c].0 & self.adj[v] == 0 {
                self.blocks[c].0 |= 1 << v;
                self.blocks[c].1 += p;
                self.colors[v] = c;
                self.run(depth + 1, remaining - p);
                self.blocks[c].0 &= !(1 << v);
                self.blocks[c].1 -= p;
            }
        }
        self.blocks.push((1 << v, p));
        self.colors[v] = self.blocks.len() - 1;
        self.run(depth + 1, remaining - p);
        self.blocks.pop();
        self.colors[v] = usize::MAX;
    }
}

/// Minimum entropy of a random vertex's color over all valid colorings.
pub fn chromatic_entropy(g: &CharGraph) -> Result<f64> {
    Ok(min_entropy_coloring(g)?.entropy(g))
}

/// Exact minimum-entropy coloring when small enough, greedy otherwise.
pub fn encoder_coloring(g: &CharGraph) -> Coloring {
    if g.len() <= MAX_EXACT_COLORING {
        min_entropy_coloring(g).expect("within exact limit")
    } else {
        greedy_coloring(g)
    }
}
