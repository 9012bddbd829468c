//! Server/dataset topology, cyclic placement, and the combinatorial
//! quantities shared by the rate formulas.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of recovery subsets enumerated exhaustively.
pub const MAX_SUBSETS: u128 = 1_000_000;

/// `T(N, K, Kc, M, Nr)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub n_servers: usize,
    pub n_datasets: usize,
    pub n_demands: usize,
    pub storage: usize,
    pub recovery_threshold: usize,
}

/// Quantities derived from a topology under cyclic placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// `K / N`.
    pub delta: usize,
    /// `floor(N / (N - Nr + 1))`: servers with pairwise disjoint storage.
    pub n_star: usize,
    /// `N - N* (N - Nr + 1)`; nonzero when an extra server is needed.
    pub delta_n: usize,
    /// `delta * delta_n`: datasets left for the extra server.
    pub xi_n: usize,
}

impl Topology {
    /// A topology with explicit storage `M`. Placement need not be cyclic.
    pub fn new(n: usize, k: usize, kc: usize, m: usize, nr: usize) -> Result<Self> {
        if n == 0 || k == 0 || kc == 0 || m == 0 || nr == 0 {
            return Err(Error::InvalidTopology(
                "all parameters must be positive".into(),
            ));
        }
        if nr > n {
            return Err(Error::InvalidTopology(format!("Nr = {nr} exceeds N = {n}")));
        }
        if m > k {
            return Err(Error::InvalidTopology(format!("M = {m} exceeds K = {k}")));
        }
        Ok(Self {
            n_servers: n,
            n_datasets: k,
            n_demands: kc,
            storage: m,
            recovery_threshold: nr,
        })
    }

    /// A topology whose storage is fixed by cyclic placement,
    /// `M = (K/N)(N - Nr + 1)`.
    pub fn cyclic(n: usize, k: usize, kc: usize, nr: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidTopology("N must be positive".into()));
        }
        if !k.is_multiple_of(n) {
            return Err(Error::Divisibility { k, n });
        }
        if nr == 0 || nr > n {
            return Err(Error::InvalidTopology(format!(
                "Nr = {nr} must lie in [1, {n}]"
            )));
        }
        Self::new(n, k, kc, (k / n) * (n - nr + 1), nr)
    }

    pub fn delta(&self) -> Result<usize> {
        if !self.n_datasets.is_multiple_of(self.n_servers) {
            return Err(Error::Divisibility {
                k: self.n_datasets,
                n: self.n_servers,
            });
        }
        Ok(self.n_datasets / self.n_servers)
    }

    /// Whether `M` equals the cyclic storage `delta (N - Nr + 1)`.
    pub fn is_cyclic(&self) -> bool {
        self.delta()
            .map(|d| self.storage == d * (self.n_servers - self.recovery_threshold + 1))
            .unwrap_or(false)
    }

    pub fn replication(&self) -> usize {
        self.n_servers - self.recovery_threshold + 1
    }
}

/// `Δ`, `N*`, `Δ_N`, `ξ_N`.
pub fn derived_params(t: &Topology) -> Result<DerivedParams> {
    let delta = t.delta()?;
    let rep = t.replication();
    let n_star = t.n_servers / rep;
    let delta_n = t.n_servers - n_star * rep;
    Ok(DerivedParams {
        delta,
        n_star,
        delta_n,
        xi_n: delta * delta_n,
    })
}

/// Per-server dataset index sets. Dataset indices are 1-based; each
/// server's list order is the coordinate order of its local tuple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "Z")]
    z: Vec<Vec<usize>>,
}

impl Placement {
    pub fn new(n: usize, k: usize, z: Vec<Vec<usize>>) -> Result<Self> {
        let p = Self { n, k, z };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.z.len() != self.n {
            return Err(Error::InvalidTopology(format!(
                "placement lists {} servers, expected {}",
                self.z.len(),
                self.n
            )));
        }
        for (i, zi) in self.z.iter().enumerate() {
            let mut seen = vec![false; self.k + 1];
            for &d in zi {
                if d == 0 || d > self.k {
                    return Err(Error::InvalidTopology(format!(
                        "server {} stores dataset {d} outside 1..={}",
                        i + 1,
                        self.k
                    )));
                }
                if seen[d] {
                    return Err(Error::InvalidTopology(format!(
                        "server {} stores dataset {d} twice",
                        i + 1
                    )));
                }
                seen[d] = true;
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Placement =
            serde_json::from_str(s).map_err(|e| Error::InvalidTopology(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("placement serializes")
    }

    pub fn n_servers(&self) -> usize {
        self.n
    }

    pub fn n_datasets(&self) -> usize {
        self.k
    }

    /// 1-based dataset indices of server `i` (0-based server index).
    pub fn server(&self, i: usize) -> &[usize] {
        &self.z[i]
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.z
    }

    /// 0-based coordinates of server `i`'s datasets.
    pub fn coords(&self, i: usize) -> Vec<usize> {
        self.z[i].iter().map(|d| d - 1).collect()
    }

    /// Membership mask over 0-based dataset coordinates covered by `servers`.
    pub fn covered(&self, servers: &[usize]) -> Vec<bool> {
        let mut mask = vec![false; self.k];
        for &i in servers {
            for &d in &self.z[i] {
                mask[d - 1] = true;
            }
        }
        mask
    }

    /// How many servers store each dataset (index 0 is dataset 1).
    pub fn multiplicity(&self) -> Vec<usize> {
        let mut m = vec![0; self.k];
        for zi in &self.z {
            for &d in zi {
                m[d - 1] += 1;
            }
        }
        m
    }
}

/// Modulo with range `1..=a`: `mod(b, a) = a` when `a | b`.
fn mod1(b: usize, a: usize) -> usize {
    match b % a {
        0 => a,
        r => r,
    }
}

/// Cyclic placement: server `i` stores, for each `r < Δ`, the `N - Nr + 1`
/// consecutive (cyclically) indices starting at `i`, shifted by `rN`.
pub fn cyclic_placement(t: &Topology) -> Result<Placement> {
    let delta = t.delta()?;
    let n = t.n_servers;
    let span = t.replication();
    let z: Vec<Vec<usize>> = (1..=n)
        .map(|i| {
            (0..delta)
                .flat_map(|r| (0..span).map(move |j| mod1(i + j, n) + r * n))
                .collect()
        })
        .collect();
    debug_assert!(z.iter().all(|zi| zi.len() == delta * span));
    Placement::new(n, t.n_datasets, z)
}

fn n_choose_r(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// All `r`-subsets of `0..n` in lexicographic order, guarded by
/// [`MAX_SUBSETS`].
pub fn subsets(n: usize, r: usize) -> Result<Vec<Vec<usize>>> {
    let count = n_choose_r(n, r);
    if count > MAX_SUBSETS {
        return Err(Error::desk("recovery subsets C(N, Nr)", count, MAX_SUBSETS));
    }
    let mut out = Vec::with_capacity(count as usize);
    if r > n {
        return Ok(out);
    }
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        out.push(idx.clone());
        let mut i = r;
        while i > 0 && idx[i - 1] == i - 1 + n - r {
            i -= 1;
        }
        if i == 0 {
            return Ok(out);
        }
        idx[i - 1] += 1;
        for j in i..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// True iff every `Nr`-subset of servers jointly stores all `K` datasets.
pub fn coverage_check(p: &Placement, t: &Topology) -> Result<bool> {
    if p.n_servers() != t.n_servers || p.n_datasets() != t.n_datasets {
        return Ok(false);
    }
    for s in subsets(t.n_servers, t.recovery_threshold)? {
        if p.covered(&s).iter().any(|c| !c) {
            return Ok(false);
        }
    }
    Ok(true)
}
