//! Zero-error coloring simulator: block encoders on OR powers of the union
//! characteristic graphs, an exhaustive decode table, and Monte-Carlo rate
//! estimation.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chargraph::{
    build_char_graph, encoder_coloring, graph_entropy, or_power, CharGraph, SolverOptions,
};
use crate::error::{Error, Result};
use crate::functions::DemandSpec;
use crate::probability::{entropy_of, JointPmf};
use crate::topology::{subsets, Placement, Topology};

/// Largest number of length-`n` support sequences swept by a decode table.
pub const MAX_SWEEP: usize = 1 << 22;

/// Fixed number of sampling workers, so results do not depend on the
/// thread count.
const WORKERS: u64 = 16;

/// Color encoder of one server over blocks of `n` symbols.
#[derive(Debug, Clone)]
pub struct Encoder {
    server: usize,
    n: usize,
    local: Vec<usize>,
    graph: CharGraph,
    colors: Vec<usize>,
    n_colors: usize,
    index: HashMap<Vec<u32>, usize>,
    theoretical: f64,
}

impl Encoder {
    /// 0-based server index.
    pub fn server(&self) -> usize {
        self.server
    }

    pub fn blocklength(&self) -> usize {
        self.n
    }

    /// The OR-power union graph being colored.
    pub fn graph(&self) -> &CharGraph {
        &self.graph
    }

    /// Color of each vertex of [`Encoder::graph`].
    pub fn colors(&self) -> &[usize] {
        &self.colors
    }

    pub fn n_colors(&self) -> usize {
        self.n_colors
    }

    /// Graph entropy of the single-letter union graph, in bits per symbol.
    pub fn theoretical_rate(&self) -> f64 {
        self.theoretical
    }

    /// Exact entropy of the transmitted color divided by `n`.
    pub fn color_rate(&self) -> f64 {
        let mut m = vec![0.0; self.n_colors];
        for (v, &c) in self.colors.iter().enumerate() {
            m[c] += self.graph.pmf()[v];
        }
        entropy_of(m) / self.n as f64
    }

    /// True when no edge joins two vertices of the same color.
    pub fn is_valid(&self) -> bool {
        self.graph
            .edges()
            .all(|(a, b)| self.colors[a] != self.colors[b])
    }

    /// Color sent for a block of `n` full dataset tuples, or `None` when the
    /// local block has zero probability.
    pub fn encode(&self, block: &[Vec<u32>]) -> Option<usize> {
        let mut key = Vec::with_capacity(self.n * self.local.len());
        for w in block {
            key.extend(self.local.iter().map(|&c| w[c]));
        }
        self.index.get(&key).map(|&v| self.colors[v])
    }

    /// Copy in which every vertex colored like `b` takes the color of `a`.
    /// Merging the endpoints of an edge yields an invalid encoder.
    pub fn with_merged_colors(&self, a: usize, b: usize) -> Encoder {
        let (ca, cb) = (self.colors[a], self.colors[b]);
        let mut e = self.clone();
        e.colors
            .iter_mut()
            .filter(|c| **c == cb)
            .for_each(|c| *c = ca);
        e
    }
}

/// One encoder per server, coloring the `n`-th OR power of the server's
/// union characteristic graph over all demands.
pub fn build_encoders(
    t: &Topology,
    p: &Placement,
    d: &DemandSpec,
    joint: &JointPmf,
    n: usize,
) -> Result<Vec<Encoder>> {
    if p.n_servers() != t.n_servers || p.n_datasets() != t.n_datasets {
        return Err(Error::InvalidTopology(
            "placement does not match the topology".into(),
        ));
    }
    if n == 0 {
        return Err(Error::Domain("blocklength must be at least 1".into()));
    }
    let all: Vec<usize> = (0..d.kc()).collect();
    (0..p.n_servers())
        .map(|i| {
            let base = build_char_graph(d, p, joint, i, &all)?;
            let theoretical = graph_entropy(&base, &SolverOptions::default())?.value;
            let graph = or_power(&base, n)?;
            let coloring = encoder_coloring(&graph);
            let index = graph
                .labels()
                .iter()
                .enumerate()
                .map(|(v, l)| (l.clone(), v))
                .collect();
            Ok(Encoder {
                server: i,
                n,
                local: p.coords(i),
                colors: coloring.colors().to_vec(),
                n_colors: coloring.n_colors(),
                graph,
                index,
                theoretical,
            })
        })
        .collect()
}

/// Map from the color profile of a server subset to the `Kc` demanded
/// output sequences of length `n`.
#[derive(Debug, Clone)]
pub struct DecodeTable {
    subset: Vec<usize>,
    n: usize,
    entries: HashMap<Vec<usize>, Vec<Vec<u32>>>,
}

impl DecodeTable {
    /// 0-based servers whose colors form the profile.
    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn blocklength(&self) -> usize {
        self.n
    }

    /// Number of distinct color profiles.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Demanded outputs, indexed `[demand][time]`.
    pub fn decode(&self, profile: &[usize]) -> Option<&[Vec<u32>]> {
        self.entries.get(profile).map(|v| v.as_slice())
    }
}

fn pick<'a>(encoders: &'a [Encoder], subset: &[usize], n: usize) -> Result<Vec<&'a Encoder>> {
    subset
        .iter()
        .map(|&i| {
            let e = encoders.iter().find(|e| e.server == i).ok_or_else(|| {
                Error::InvalidTopology(format!("no encoder for server {}", i + 1))
            })?;
            if e.n != n {
                return Err(Error::Domain(format!(
                    "encoder blocklength {} differs from {n}",
                    e.n
                )));
            }
            Ok(e)
        })
        .collect()
}

/// Demanded outputs of a block, indexed `[demand][time]`.
fn outputs(d: &DemandSpec, block: &[Vec<u32>], buf: &mut [u32]) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::with_capacity(block.len()); d.kc()];
    for w in block {
        d.eval_into(w, buf);
        out.iter_mut().zip(buf.iter()).for_each(|(o, &y)| o.push(y));
    }
    out
}

/// Sweeps every positive-probability length-`n` sequence and records the
/// outputs under each color profile of `subset` (0-based servers).
///
/// Fails with a collision when one profile is reached by sequences with
/// different demanded outputs, and with a coverage error when a dataset the
/// demands depend on is held by no server of the subset.
pub fn build_decode_table(
    encoders: &[Encoder],
    t: &Topology,
    p: &Placement,
    d: &DemandSpec,
    joint: &JointPmf,
    subset: &[usize],
) -> Result<DecodeTable> {
    let k = t.n_datasets;
    d.check_arity(k)?;
    if joint.arity() != k || p.n_datasets() != k {
        return Err(Error::Arity {
            expected: k,
            got: joint.arity(),
        });
    }
    let n = encoders
        .first()
        .map(|e| e.n)
        .ok_or_else(|| Error::Domain("no encoders".into()))?;
    let chosen = pick(encoders, subset, n)?;
    let named: Vec<usize> = subset.iter().map(|i| i + 1).collect();
    let covered = p.covered(subset);
    if let Some(c) = d
        .dependencies(k)?
        .iter()
        .zip(&covered)
        .position(|(&dep, &cov)| dep && !cov)
    {
        return Err(Error::Coverage {
            subset: named,
            dataset: c + 1,
        });
    }

    let support: Vec<Vec<u32>> = joint.support().map(|(idx, _)| joint.decode(idx)).collect();
    let s = support.len();
    let total = (s as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if total > MAX_SWEEP as u128 {
        return Err(Error::desk("decode sweep", total, MAX_SWEEP as u128));
    }
    let mut entries: HashMap<Vec<usize>, Vec<Vec<u32>>> = HashMap::new();
    let mut buf = vec![0u32; d.kc()];
    let mut digits = vec![0usize; n];
    let mut block: Vec<Vec<u32>> = vec![support[0].clone(); n];
    for _ in 0..total as usize {
        for (slot, &j) in block.iter_mut().zip(&digits) {
            slot.clone_from(&support[j]);
        }
        let profile: Vec<usize> = chosen
            .iter()
            .map(|e| e.encode(&block).expect("support block is a vertex"))
            .collect();
        let out = outputs(d, &block, &mut buf);
        match entries.get(&profile) {
            Some(prev) if *prev != out => return Err(Error::Collision { subset: named }),
            Some(_) => {}
            None => {
                entries.insert(profile, out);
            }
        }
        for digit in digits.iter_mut().rev() {
            *digit += 1;
            if *digit < s {
                break;
            }
            *digit = 0;
        }
    }
    Ok(DecodeTable {
        subset: subset.to_vec(),
        n,
        entries,
    })
}

/// Builds the decode table of every `Nr`-subset of servers; returns the
/// number of subsets verified.
pub fn verify_all_subsets(
    encoders: &[Encoder],
    t: &Topology,
    p: &Placement,
    d: &DemandSpec,
    joint: &JointPmf,
) -> Result<usize> {
    let all = subsets(t.n_servers, t.recovery_threshold)?;
    for s in &all {
        build_decode_table(encoders, t, p, d, joint, s)?;
    }
    Ok(all.len())
}

/// Outcome of a Monte-Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub trials: u64,
    /// Blocks whose decoded outputs differ from direct evaluation.
    pub errors: u64,
    /// Empirical color entropy per server divided by `n`, in bits.
    pub empirical: Vec<f64>,
    /// Single-letter graph entropy per server, in bits.
    pub theoretical: Vec<f64>,
    pub seed: u64,
}

impl SimResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }
}

struct Tally {
    errors: u64,
    counts: Vec<HashMap<usize, u64>>,
}

/// Samples `trials` i.i.d. blocks of length `n` from `joint`, encodes them
/// with every encoder and decodes through `table`.
///
/// Trials are split over a fixed number of workers; worker `w` draws from
/// ChaCha8 seeded with `seed + w`.
pub fn run_simulation(
    encoders: &[Encoder],
    table: &DecodeTable,
    d: &DemandSpec,
    joint: &JointPmf,
    n: usize,
    trials: u64,
    seed: u64,
) -> Result<SimResult> {
    if table.n != n {
        return Err(Error::Domain(format!(
            "decode table blocklength {} differs from {n}",
            table.n
        )));
    }
    if let Some(e) = encoders.iter().find(|e| e.n != n) {
        return Err(Error::Domain(format!(
            "encoder blocklength {} differs from {n}",
            e.n
        )));
    }
    let chosen = pick(encoders, &table.subset, n)?;
    let support: Vec<(Vec<u32>, f64)> = joint
        .support()
        .map(|(idx, p)| (joint.decode(idx), p))
        .collect();
    let mut cdf = Vec::with_capacity(support.len());
    let mut acc = 0.0;
    for (_, p) in &support {
        acc += p;
        cdf.push(acc);
    }

    let run_worker = |w: u64| -> Tally {
        let share = trials / WORKERS + u64::from(w < trials % WORKERS);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(w));
        let mut tally = Tally {
            errors: 0,
            counts: vec![HashMap::new(); encoders.len()],
        };
        let mut buf = vec![0u32; d.kc()];
        let mut block = vec![Vec::new(); n];
        for _ in 0..share {
            for slot in block.iter_mut() {
                let u: f64 = rng.random::<f64>() * acc;
                let j = cdf.partition_point(|&c| c <= u).min(support.len() - 1);
                slot.clone_from(&support[j].0);
            }
            for (e, counts) in encoders.iter().zip(tally.counts.iter_mut()) {
                let c = e.encode(&block).unwrap_or(usize::MAX);
                *counts.entry(c).or_default() += 1;
            }
            let profile: Option<Vec<usize>> = chosen.iter().map(|e| e.encode(&block)).collect();
            let ok = profile
                .and_then(|pr| table.decode(&pr))
                .is_some_and(|dec| dec == outputs(d, &block, &mut buf).as_slice());
            tally.errors += u64::from(!ok);
        }
        tally
    };

    let parts: Vec<Tally> = (0..WORKERS).into_par_iter().map(run_worker).collect();
    let mut errors = 0;
    let mut counts = vec![HashMap::<usize, u64>::new(); encoders.len()];
    for part in parts {
        errors += part.errors;
        for (into, from) in counts.iter_mut().zip(part.counts) {
            for (c, m) in from {
                *into.entry(c).or_default() += m;
            }
        }
    }
    let empirical = counts
        .iter()
        .map(|cs| {
            if trials == 0 {
                return 0.0;
            }
            let mut masses: Vec<u64> = cs.values().copied().collect();
            masses.sort_unstable();
            entropy_of(masses.into_iter().map(|m| m as f64 / trials as f64)) / n as f64
        })
        .collect();
    Ok(SimResult {
        trials,
        errors,
        empirical,
        theoretical: encoders.iter().map(|e| e.theoretical).collect(),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probability::{h2, parity_param, Pmf};
    use crate::topology::cyclic_placement;

    fn scenario2(eps: f64) -> (Topology, Placement, DemandSpec, JointPmf) {
        let t = Topology::cyclic(3, 3, 2, 2).unwrap();
        let p = cyclic_placement(&t).unwrap();
        let d = DemandSpec::linear(2, vec![vec![0, 1, 0], vec![0, 1, 1]]).unwrap();
        let j = JointPmf::iid(&Pmf::bernoulli(eps).unwrap(), 3).unwrap();
        (t, p, d, j)
    }

    #[test]
    fn scenario2_encoders() {
        let (t, p, d, j) = scenario2(0.3);
        let enc = build_encoders(&t, &p, &d, &j, 1).unwrap();
        assert_eq!(
            enc.iter().map(Encoder::n_colors).collect::<Vec<_>>(),
            vec![2, 4, 2]
        );
        // Server 1 holds (W1, W2) and its color is W2.
        let e = &enc[0];
        let c = |w: [u32; 3]| e.encode(&[w.to_vec()]).unwrap();
        assert_eq!(c([0, 0, 1]), c([1, 0, 0]));
        assert_ne!(c([0, 0, 0]), c([0, 1, 0]));
        assert!(enc.iter().all(Encoder::is_valid));
        assert!((e.theoretical_rate() - h2(0.3)).abs() < 1e-8);
    }

    #[test]
    fn edgeless_single_color() {
        let t = Topology::cyclic(2, 2, 1, 2).unwrap();
        let p = cyclic_placement(&t).unwrap();
        let d = DemandSpec::linear(2, vec![vec![1, 0]]).unwrap();
        let j = JointPmf::iid(&Pmf::bernoulli(0.4).unwrap(), 2).unwrap();
        for n in 1..=3 {
            let enc = build_encoders(&t, &p, &d, &j, n).unwrap();
            assert_eq!(enc[1].n_colors(), 1);
            assert_eq!(enc[1].color_rate(), 0.0);
        }
    }

    #[test]
    fn exhaustive_all_subsets() {
        let (t, p, d, j) = scenario2(0.2);
        for n in 1..=2 {
            let enc = build_encoders(&t, &p, &d, &j, n).unwrap();
            assert_eq!(verify_all_subsets(&enc, &t, &p, &d, &j).unwrap(), 3);
        }
    }

    #[test]
    fn merged_pair_collides() {
        let (t, p, d, j) = scenario2(0.2);
        let mut enc = build_encoders(&t, &p, &d, &j, 1).unwrap();
        let (a, b) = enc[0].graph().edges().next().unwrap();
        enc[0] = enc[0].with_merged_colors(a, b);
        assert!(!enc[0].is_valid());
        let err = build_decode_table(&enc, &t, &p, &d, &j, &[0, 2]).unwrap_err();
        assert_eq!(err, Error::Collision { subset: vec![1, 3] });
    }

    #[test]
    fn server2_alone_decodes() {
        let (t, p, d, j) = scenario2(0.2);
        let enc = build_encoders(&t, &p, &d, &j, 1).unwrap();
        assert!(enc[1].graph().is_complete());
        let table = build_decode_table(&enc, &t, &p, &d, &j, &[1]).unwrap();
        assert_eq!(table.len(), 4);
        assert!(matches!(
            build_decode_table(&enc, &t, &p, &d, &j, &[0]),
            Err(Error::Coverage { dataset: 3, .. })
        ));
    }

    #[test]
    fn monte_carlo_uniform() {
        let (t, p, d, j) = scenario2(0.5);
        let enc = build_encoders(&t, &p, &d, &j, 1).unwrap();
        let table = build_decode_table(&enc, &t, &p, &d, &j, &[0, 2]).unwrap();
        let r = run_simulation(&enc, &table, &d, &j, 1, 100_000, 7).unwrap();
        assert_eq!(r.errors, 0);
        for (e, want) in r.empirical.iter().zip([1.0, 2.0, 1.0]) {
            assert!((e - want).abs() < 0.02, "{e} vs {want}");
        }
        for (e, th) in r.empirical.iter().zip(&r.theoretical) {
            assert!((e - th).abs() < 0.02);
        }
        assert_eq!(
            r,
            run_simulation(&enc, &table, &d, &j, 1, 100_000, 7).unwrap()
        );
    }

    #[test]
    fn parity_rate() {
        let t = Topology::cyclic(2, 2, 1, 1).unwrap();
        let p = cyclic_placement(&t).unwrap();
        let d = DemandSpec::linear(2, vec![vec![1, 1]]).unwrap();
        let j = JointPmf::iid(&Pmf::bernoulli(0.1).unwrap(), 2).unwrap();
        let enc = build_encoders(&t, &p, &d, &j, 1).unwrap();
        let table = build_decode_table(&enc, &t, &p, &d, &j, &[0]).unwrap();
        let r = run_simulation(&enc, &table, &d, &j, 1, 100_000, 1).unwrap();
        let want = h2(parity_param(2, 0.1));
        assert!((want - h2(0.18)).abs() < 1e-12);
        assert_eq!(r.errors, 0);
        assert!((r.empirical[0] - want).abs() < 0.02);
        assert!((r.theoretical[0] - want).abs() < 1e-8);
    }

    #[test]
    fn block_coding_never_hurts() {
        let t = Topology::cyclic(3, 3, 1, 2).unwrap();
        let p = cyclic_placement(&t).unwrap();
        let d = DemandSpec::multilinear(2).unwrap();
        let j = JointPmf::iid(&Pmf::bernoulli(0.3).unwrap(), 3).unwrap();
        let one = build_encoders(&t, &p, &d, &j, 1).unwrap();
        let two = build_encoders(&t, &p, &d, &j, 2).unwrap();
        for (a, b) in one.iter().zip(&two) {
            assert!(b.color_rate() <= a.color_rate() + 1e-9);
            assert!(a.color_rate() >= a.theoretical_rate() - 1e-9);
        }
        assert_eq!(verify_all_subsets(&two, &t, &p, &d, &j).unwrap(), 3);
    }

    #[test]
    fn json_keys() {
        let r = SimResult {
            trials: 3,
            errors: 0,
            empirical: vec![0.5],
            theoretical: vec![0.5],
            seed: 9,
        };
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            ["empirical", "errors", "seed", "theoretical", "trials"]
        );
    }
}
