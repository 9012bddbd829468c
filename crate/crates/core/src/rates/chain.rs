use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{outcomes, Method, Outcomes, RateReport, RateUnit};
use crate::chargraph::graph::{graph_from_cells, Cell};
use crate::chargraph::{
    conditional_graph_entropy, encoder_coloring, graph_entropy, CharGraph, Coloring, SolverOptions,
};
use crate::error::{Error, Result};
use crate::functions::DemandSpec;
use crate::probability::{decode_into, encode, JointPmf};
use crate::topology::{derived_params, Placement, Topology};

/// What a server in the chain knows about earlier transmissions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideInfo {
    /// Earlier transmissions are known to the encoder as well as the
    /// decoder: each server pays `Σ_z P(z) H_{G_z}(X | Z = z)` where `G_z`
    /// is its characteristic graph under the law conditioned on `z`.
    #[default]
    Shared,
    /// Earlier transmissions are known to the decoder only: each server
    /// pays the conditional graph entropy of its unconditioned union graph
    /// given them, with the encoder blind to them.
    DecoderOnly,
}

/// Schedule of disjoint servers `1, 1 + (N - Nr + 1), ..` followed by the
/// extra server when `Δ_N > 0` (0-based indices).
pub fn canonical_ordering(t: &Topology) -> Result<Vec<usize>> {
    let dp = derived_params(t)?;
    let rep = t.replication();
    let mut out: Vec<usize> = (0..dp.n_star).map(|l| l * rep).collect();
    if dp.delta_n > 0 {
        out.push(dp.n_star * rep);
    }
    Ok(out)
}

pub const MAX_ORDERING_SERVERS: usize = 8;

/// Every permutation of `0..n` in lexicographic order.
pub fn all_orderings(n: usize) -> Result<Vec<Vec<usize>>> {
    if n > MAX_ORDERING_SERVERS {
        return Err(Error::desk(
            "orderings of servers",
            n as u128,
            MAX_ORDERING_SERVERS as u128,
        ));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut out = vec![perm.clone()];
    loop {
        let Some(i) = (1..n).rev().find(|&i| perm[i - 1] < perm[i]) else {
            return Ok(out);
        };
        let j = (i..n)
            .rev()
            .find(|&j| perm[j] > perm[i - 1])
            .expect("successor exists");
        perm.swap(i - 1, j);
        perm[i..].reverse();
        out.push(perm.clone());
    }
}

/// Smallest sum over the supplied orderings of the successive rates, each
/// server seeing every earlier transmission as side information.
///
/// Transmissions are minimum-entropy colorings of the graph a server
/// prices. Orderings whose transmissions do not determine the demands are
/// skipped; if none does, the error names the first one.
pub fn chain_rate(
    t: &Topology,
    p: &Placement,
    d: &DemandSpec,
    joint: &JointPmf,
    orderings: &[Vec<usize>],
    mode: SideInfo,
    opts: &SolverOptions,
) -> Result<RateReport> {
    if t.n_servers != p.n_servers() || t.n_datasets != p.n_datasets() {
        return Err(Error::InvalidTopology(
            "topology and placement disagree".into(),
        ));
    }
    if orderings.is_empty() {
        return Err(Error::InsufficientOrdering {
            ordering: Vec::new(),
        });
    }
    let oc = outcomes(d, p, joint)?;
    let keys = key_ids(&oc);
    let mut best: Option<(Vec<f64>, Vec<usize>, bool)> = None;
    let mut first_err = None;
    for ord in orderings {
        if ord.is_empty() || ord.iter().any(|&i| i >= p.n_servers()) {
            return Err(Error::InvalidTopology(format!("bad ordering {ord:?}")));
        }
        match run_chain(&oc, &keys, p, d.q(), ord, mode, opts)? {
            Some((rates, converged)) => {
                let total: f64 = rates.iter().sum();
                if best
                    .as_ref()
                    .is_none_or(|b| total < b.0.iter().sum::<f64>() - 1e-12)
                {
                    best = Some((rates, ord.clone(), converged));
                }
            }
            None => {
                first_err.get_or_insert_with(|| ord.clone());
            }
        }
    }
    let (rates, ord, converged) = best.ok_or_else(|| Error::InsufficientOrdering {
        ordering: first_err
            .unwrap_or_default()
            .iter()
            .map(|i| i + 1)
            .collect(),
    })?;
    let servers: Vec<usize> = ord.iter().map(|i| i + 1).collect();
    let mut r = RateReport::new(Method::Chain, RateUnit::Bits, d.q(), servers.clone(), rates)?;
    r.ordering = Some(servers);
    r.converged = converged;
    Ok(r)
}

fn key_ids(oc: &Outcomes) -> Vec<u64> {
    let mut ids: HashMap<&[u32], u64> = HashMap::new();
    oc.key
        .iter()
        .map(|k| {
            let next = ids.len() as u64;
            *ids.entry(k.as_slice()).or_insert(next)
        })
        .collect()
}

/// Renumbers `(old context, color)` pairs densely.
fn refine(ctx: &[usize], color: &[usize]) -> (Vec<usize>, usize) {
    let mut ids = HashMap::new();
    let out = ctx
        .iter()
        .zip(color)
        .map(|pair| {
            let next = ids.len();
            *ids.entry(pair).or_insert(next)
        })
        .collect();
    (out, ids.len())
}

struct ServerCells {
    local_radices: Vec<usize>,
    /// Index of the unseen datasets' values, per outcome.
    rest: Vec<usize>,
}

fn server_cells(oc: &Outcomes, p: &Placement, q: u32, i: usize) -> ServerCells {
    let k = p.n_datasets();
    let local = p.coords(i);
    let mut held = vec![false; k];
    local.iter().for_each(|&c| held[c] = true);
    let rest_coords: Vec<usize> = (0..k).filter(|&c| !held[c]).collect();
    let rest_radices = vec![q as usize; rest_coords.len()];
    let rest = oc
        .tuple
        .iter()
        .map(|w| {
            let t: Vec<u32> = rest_coords.iter().map(|&c| w[c]).collect();
            encode(&rest_radices, &t)
        })
        .collect();
    ServerCells {
        local_radices: vec![q as usize; local.len()],
        rest,
    }
}

fn label(radices: &[usize], x: usize) -> Vec<u32> {
    let mut t = vec![0u32; radices.len()];
    decode_into(radices, x, &mut t);
    t
}

/// Color of each outcome's local symbol under `c` on `g`.
fn colors_of(
    g: &CharGraph,
    c: &Coloring,
    radices: &[usize],
    symbols: impl Iterator<Item = usize>,
) -> Vec<usize> {
    let index: HashMap<&[u32], usize> = g
        .labels()
        .iter()
        .enumerate()
        .map(|(v, l)| (l.as_slice(), v))
        .collect();
    symbols
        .map(|x| {
            let l = label(radices, x);
            // Vertices pruned as numerically negligible get a fresh color.
            index
                .get(l.as_slice())
                .map_or(c.n_colors(), |&v| c.color(v))
        })
        .collect()
}

/// Per-server rates of one ordering, or `None` when its transmissions do
/// not determine the demands.
fn run_chain(
    oc: &Outcomes,
    keys: &[u64],
    p: &Placement,
    q: u32,
    ord: &[usize],
    mode: SideInfo,
    opts: &SolverOptions,
) -> Result<Option<(Vec<f64>, bool)>> {
    let n = oc.mass.len();
    let mut ctx = vec![0usize; n];
    let mut n_ctx = 1;
    let mut rates = Vec::with_capacity(ord.len());
    let mut converged = true;
    for &i in ord {
        let sc = server_cells(oc, p, q, i);
        let cell = |c: usize| Cell {
            vertex: oc.local[c][i],
            context: sc.rest[c],
            key: keys[c],
            mass: oc.mass[c],
        };
        let mut color = vec![0usize; n];
        match mode {
            SideInfo::Shared => {
                let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n_ctx];
                (0..n).for_each(|c| groups[ctx[c]].push(c));
                let mut rate = 0.0;
                for members in groups.iter().filter(|m| !m.is_empty()) {
                    let pz: f64 = members.iter().map(|&c| oc.mass[c]).sum();
                    let g = graph_from_cells(members.iter().map(|&c| cell(c)).collect(), |x| {
                        label(&sc.local_radices, x)
                    })?;
                    let r = graph_entropy(&g, opts)?;
                    converged &= r.converged;
                    rate += pz * r.value;
                    let col = encoder_coloring(&g);
                    let cs = colors_of(
                        &g,
                        &col,
                        &sc.local_radices,
                        members.iter().map(|&c| oc.local[c][i]),
                    );
                    for (&c, k) in members.iter().zip(cs) {
                        color[c] = k;
                    }
                }
                rates.push(rate);
            }
            SideInfo::DecoderOnly => {
                let g =
                    graph_from_cells((0..n).map(cell).collect(), |x| label(&sc.local_radices, x))?;
                let index: HashMap<Vec<u32>, usize> = g
                    .labels()
                    .iter()
                    .enumerate()
                    .map(|(v, l)| (l.clone(), v))
                    .collect();
                let r = if n_ctx == 1 {
                    graph_entropy(&g, opts)?
                } else {
                    let mut mass = vec![0.0; g.len() * n_ctx];
                    for c in 0..n {
                        if let Some(&v) = index.get(&label(&sc.local_radices, oc.local[c][i])) {
                            mass[v * n_ctx + ctx[c]] += oc.mass[c];
                        }
                    }
                    let s: f64 = mass.iter().sum();
                    mass.iter_mut().for_each(|m| *m /= s);
                    let side = JointPmf::from_model(vec![g.len(), n_ctx], mass)?;
                    conditional_graph_entropy(&g, &side, opts)?
                };
                converged &= r.converged;
                rates.push(r.value);
                let col = encoder_coloring(&g);
                color = colors_of(&g, &col, &sc.local_radices, (0..n).map(|c| oc.local[c][i]));
            }
        }
        (ctx, n_ctx) = refine(&ctx, &color);
    }
    let mut seen: Vec<Option<u64>> = vec![None; n_ctx];
    for c in 0..n {
        match seen[ctx[c]] {
            Some(k) if k != keys[c] => return Ok(None),
            _ => seen[ctx[c]] = Some(keys[c]),
        }
    }
    Ok(Some((rates, converged)))
}
