//! Demanded functions over the subfunction vector `W = (W_1, .., W_K)`.
//!
//! Symbols live in `F_q` for prime `q`. Tables are dense arrays indexed by
//! the mixed-radix encoding of the input tuple (coordinate 0 most
//! significant), matching [`crate::probability::JointPmf`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probability::{decode_into, encode, MAX_JOINT_CELLS};
use crate::topology::Placement;

/// Field size of each subfunction value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub q: u32,
}

fn is_prime(q: u32) -> bool {
    q >= 2
        && (2..)
            .take_while(|d| d * d <= q)
            .all(|d| !q.is_multiple_of(d))
}

impl FieldSpec {
    pub fn new(q: u32) -> Result<Self> {
        if !is_prime(q) {
            return Err(Error::InvalidDemand(format!(
                "field size {q} is not a prime"
            )));
        }
        Ok(Self { q })
    }
}

/// The user's `Kc` demanded functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", try_from = "DemandJson", into = "DemandJson")]
pub enum DemandSpec {
    /// `f = Γ W` over `F_q`, `Γ` is `Kc x K`.
    LinearlySeparable { q: u32, gamma: Vec<Vec<u32>> },
    /// `f = Π_k W_k` over `F_q` (one demand).
    MultiLinear { q: u32 },
    /// One dense output table per demanded function, each of length `q^K`.
    /// With `q = 2` this is the Boolean-table class.
    Table {
        q: u32,
        k: usize,
        tables: Vec<Vec<u32>>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind")]
enum DemandJson {
    #[serde(rename = "linsep")]
    LinSep { q: u32, gamma: Vec<Vec<u32>> },
    #[serde(rename = "multilinear")]
    MultiLinear {
        #[serde(default = "default_q")]
        q: u32,
    },
    #[serde(rename = "table")]
    Table { q: u32, tables: Vec<Vec<u32>> },
}

fn default_q() -> u32 {
    2
}

impl TryFrom<DemandJson> for DemandSpec {
    type Error = Error;

    fn try_from(j: DemandJson) -> Result<Self> {
        match j {
            DemandJson::LinSep { q, gamma } => DemandSpec::linear(q, gamma),
            DemandJson::MultiLinear { q } => DemandSpec::multilinear(q),
            DemandJson::Table { q, tables } => DemandSpec::table(q, tables),
        }
    }
}

impl From<DemandSpec> for DemandJson {
    fn from(d: DemandSpec) -> Self {
        match d {
            DemandSpec::LinearlySeparable { q, gamma } => DemandJson::LinSep { q, gamma },
            DemandSpec::MultiLinear { q } => DemandJson::MultiLinear { q },
            DemandSpec::Table { q, tables, .. } => DemandJson::Table { q, tables },
        }
    }
}

impl DemandSpec {
    pub fn linear(q: u32, gamma: Vec<Vec<u32>>) -> Result<Self> {
        FieldSpec::new(q)?;
        let k = gamma.first().map(Vec::len).unwrap_or(0);
        if gamma.is_empty() || k == 0 {
            return Err(Error::InvalidDemand("empty coefficient matrix".into()));
        }
        if gamma.iter().any(|row| row.len() != k) {
            return Err(Error::InvalidDemand("ragged coefficient matrix".into()));
        }
        if let Some(&c) = gamma.iter().flatten().find(|&&c| c >= q) {
            return Err(Error::Alphabet {
                symbol: c,
                q: q as usize,
            });
        }
        Ok(DemandSpec::LinearlySeparable { q, gamma })
    }

    pub fn multilinear(q: u32) -> Result<Self> {
        FieldSpec::new(q)?;
        Ok(DemandSpec::MultiLinear { q })
    }

    pub fn table(q: u32, tables: Vec<Vec<u32>>) -> Result<Self> {
        FieldSpec::new(q)?;
        let len = tables.first().map(Vec::len).unwrap_or(0);
        if tables.is_empty() || len == 0 {
            return Err(Error::InvalidDemand("no demand tables".into()));
        }
        if tables.iter().any(|t| t.len() != len) {
            return Err(Error::InvalidDemand(
                "demand tables differ in length".into(),
            ));
        }
        let mut k = 0usize;
        let mut size = 1usize;
        while size < len {
            size *= q as usize;
            k += 1;
        }
        if size != len {
            return Err(Error::InvalidDemand(format!(
                "table length {len} is not a power of q = {q}"
            )));
        }
        if let Some(&v) = tables.iter().flatten().find(|&&v| v >= q) {
            return Err(Error::Alphabet {
                symbol: v,
                q: q as usize,
            });
        }
        Ok(DemandSpec::Table { q, k, tables })
    }

    /// Tabulates `kc` functions of `k` inputs over `F_q`.
    pub fn from_fn(
        q: u32,
        k: usize,
        kc: usize,
        mut f: impl FnMut(&[u32]) -> Vec<u32>,
    ) -> Result<Self> {
        let radices = vec![q as usize; k];
        let size = (q as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
        if size > MAX_JOINT_CELLS as u128 {
            return Err(Error::desk("demand table", size, MAX_JOINT_CELLS as u128));
        }
        let mut tables = vec![Vec::with_capacity(size as usize); kc];
        let mut w = vec![0u32; k];
        for idx in 0..size as usize {
            decode_into(&radices, idx, &mut w);
            let out = f(&w);
            if out.len() != kc {
                return Err(Error::Arity {
                    expected: kc,
                    got: out.len(),
                });
            }
            for (t, v) in tables.iter_mut().zip(out) {
                t.push(v % q);
            }
        }
        Self::table(q, tables)
    }

    pub fn q(&self) -> u32 {
        match self {
            DemandSpec::LinearlySeparable { q, .. }
            | DemandSpec::MultiLinear { q }
            | DemandSpec::Table { q, .. } => *q,
        }
    }

    /// Number of demanded functions `Kc`.
    pub fn kc(&self) -> usize {
        match self {
            DemandSpec::LinearlySeparable { gamma, .. } => gamma.len(),
            DemandSpec::MultiLinear { .. } => 1,
            DemandSpec::Table { tables, .. } => tables.len(),
        }
    }

    /// Number of inputs fixed by the demand itself, if any.
    pub fn arity(&self) -> Option<usize> {
        match self {
            DemandSpec::LinearlySeparable { gamma, .. } => Some(gamma[0].len()),
            DemandSpec::MultiLinear { .. } => None,
            DemandSpec::Table { k, .. } => Some(*k),
        }
    }

    pub fn is_boolean(&self) -> bool {
        self.q() == 2
    }

    /// Checks that the demand can be evaluated on `k`-tuples.
    pub fn check_arity(&self, k: usize) -> Result<()> {
        match self.arity() {
            Some(a) if a != k => Err(Error::Arity {
                expected: a,
                got: k,
            }),
            _ => Ok(()),
        }
    }

    /// Writes `(f_1(w), .., f_Kc(w))` into `out` without validating `w`.
    pub(crate) fn eval_into(&self, w: &[u32], out: &mut [u32]) {
        match self {
            DemandSpec::LinearlySeparable { q, gamma } => {
                let q = *q as u64;
                for (o, row) in out.iter_mut().zip(gamma) {
                    let s: u64 = row.iter().zip(w).map(|(&g, &x)| g as u64 * x as u64).sum();
                    *o = (s % q) as u32;
                }
            }
            DemandSpec::MultiLinear { q } => {
                let q = *q as u64;
                out[0] = w.iter().fold(1u64, |acc, &x| acc * x as u64 % q) as u32;
            }
            DemandSpec::Table { q, tables, .. } => {
                let radices = vec![*q as usize; w.len()];
                let idx = encode(&radices, w);
                for (o, t) in out.iter_mut().zip(tables) {
                    *o = t[idx];
                }
            }
        }
    }

    /// `(f_1(w), .., f_Kc(w))`.
    pub fn evaluate(&self, w: &[u32]) -> Result<Vec<u32>> {
        self.check_arity(w.len())?;
        let q = self.q();
        if let Some(&s) = w.iter().find(|&&s| s >= q) {
            return Err(Error::Alphabet {
                symbol: s,
                q: q as usize,
            });
        }
        let mut out = vec![0; self.kc()];
        self.eval_into(w, &mut out);
        Ok(out)
    }

    /// Restriction to a subset of the demanded functions (0-based indices).
    pub fn select(&self, which: &[usize], k: usize) -> Result<DemandSpec> {
        if which.is_empty() || which.iter().any(|&j| j >= self.kc()) {
            return Err(Error::InvalidDemand(format!("bad demand subset {which:?}")));
        }
        match self {
            DemandSpec::LinearlySeparable { q, gamma } => {
                DemandSpec::linear(*q, which.iter().map(|&j| gamma[j].clone()).collect())
            }
            DemandSpec::MultiLinear { .. } => Ok(self.clone()),
            DemandSpec::Table { q, tables, .. } => {
                self.check_arity(k)?;
                DemandSpec::table(*q, which.iter().map(|&j| tables[j].clone()).collect())
            }
        }
    }

    /// 0-based input coordinates each demanded function actually depends on
    /// over the full domain `F_q^k`.
    pub fn dependencies(&self, k: usize) -> Result<Vec<bool>> {
        self.check_arity(k)?;
        let q = self.q() as usize;
        let radices = vec![q; k];
        let size = (q as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
        if size > MAX_JOINT_CELLS as u128 {
            return Err(Error::desk("demand domain", size, MAX_JOINT_CELLS as u128));
        }
        let kc = self.kc();
        let mut deps = vec![false; k];
        let mut w = vec![0u32; k];
        let (mut a, mut b) = (vec![0; kc], vec![0; kc]);
        for idx in 0..size as usize {
            decode_into(&radices, idx, &mut w);
            self.eval_into(&w, &mut a);
            for c in 0..k {
                if deps[c] || w[c] != 0 {
                    continue;
                }
                for v in 1..q as u32 {
                    w[c] = v;
                    self.eval_into(&w, &mut b);
                    if a != b {
                        deps[c] = true;
                    }
                }
                w[c] = 0;
            }
        }
        Ok(deps)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidDemand(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("demand serializes")
    }
}

/// Server `i`'s local view: which datasets it holds and the size of its
/// local alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerView {
    pub server: usize,
    /// 1-based dataset indices, in local coordinate order.
    pub datasets: Vec<usize>,
    pub q: u32,
}

impl ServerView {
    pub fn new(p: &Placement, server: usize, q: u32) -> Self {
        Self {
            server,
            datasets: p.server(server).to_vec(),
            q,
        }
    }

    pub fn alphabet_size(&self) -> usize {
        (self.q as usize).pow(self.datasets.len() as u32)
    }
}

/// A demand seen from one server: evaluates on (local tuple, assignment of
/// the datasets the server does not hold).
#[derive(Debug, Clone)]
pub struct ServerRestriction<'a> {
    demand: &'a DemandSpec,
    k: usize,
    local: Vec<usize>,
    complement: Vec<usize>,
}

/// Splits the demand at server `i` of placement `p`.
pub fn restrict_to_server<'a>(
    d: &'a DemandSpec,
    p: &Placement,
    i: usize,
) -> Result<ServerRestriction<'a>> {
    let k = p.n_datasets();
    d.check_arity(k)?;
    if i >= p.n_servers() {
        return Err(Error::InvalidTopology(format!("no server {}", i + 1)));
    }
    let local = p.coords(i);
    let mut held = vec![false; k];
    for &c in &local {
        held[c] = true;
    }
    let complement = (0..k).filter(|&c| !held[c]).collect();
    Ok(ServerRestriction {
        demand: d,
        k,
        local,
        complement,
    })
}

impl ServerRestriction<'_> {
    /// 0-based coordinates held by the server.
    pub fn local_coords(&self) -> &[usize] {
        &self.local
    }

    /// 0-based coordinates not held by the server, increasing.
    pub fn complement_coords(&self) -> &[usize] {
        &self.complement
    }

    /// Evaluates on the local tuple and a complement assignment
    /// (ordered as [`Self::complement_coords`]).
    pub fn eval(&self, local: &[u32], rest: &[u32]) -> Result<Vec<u32>> {
        if local.len() != self.local.len() {
            return Err(Error::Arity {
                expected: self.local.len(),
                got: local.len(),
            });
        }
        if rest.len() != self.complement.len() {
            return Err(Error::Arity {
                expected: self.complement.len(),
                got: rest.len(),
            });
        }
        let mut w = vec![0u32; self.k];
        for (&c, &v) in self.local.iter().zip(local) {
            w[c] = v;
        }
        for (&c, &v) in self.complement.iter().zip(rest) {
            w[c] = v;
        }
        self.demand.evaluate(&w)
    }

    /// Merges the local tuple with other servers' tuples into a full `W`,
    /// rejecting disagreeing overlaps and uncovered datasets.
    pub fn merge(
        &self,
        p: &Placement,
        local: &[u32],
        others: &[(usize, Vec<u32>)],
    ) -> Result<Vec<u32>> {
        let mut w: Vec<Option<u32>> = vec![None; self.k];
        for (&c, &v) in self.local.iter().zip(local) {
            w[c] = Some(v);
        }
        for (srv, tuple) in others {
            let coords = p.coords(*srv);
            if coords.len() != tuple.len() {
                return Err(Error::Arity {
                    expected: coords.len(),
                    got: tuple.len(),
                });
            }
            for (&c, &v) in coords.iter().zip(tuple) {
                match w[c] {
                    Some(old) if old != v => {
                        return Err(Error::InconsistentOverlap { dataset: c + 1 })
                    }
                    _ => w[c] = Some(v),
                }
            }
        }
        w.iter()
            .enumerate()
            .map(|(c, v)| {
                v.ok_or(Error::Coverage {
                    subset: others.iter().map(|(s, _)| s + 1).collect(),
                    dataset: c + 1,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{cyclic_placement, Topology};
    use rand::{Rng, SeedableRng};

    fn scenario_two() -> DemandSpec {
        DemandSpec::linear(2, vec![vec![0, 1, 0], vec![0, 1, 1]]).unwrap()
    }

    #[test]
    fn identity_demand_returns_input() {
        let id: Vec<Vec<u32>> = (0..4)
            .map(|j| (0..4).map(|k| (j == k) as u32).collect())
            .collect();
        let d = DemandSpec::linear(3, id).unwrap();
        for w in [[0, 1, 2, 1], [2, 2, 0, 0]] {
            assert_eq!(d.evaluate(&w).unwrap(), w.to_vec());
        }
    }

    #[test]
    fn scenario_two_demand() {
        assert_eq!(scenario_two().evaluate(&[1, 1, 0]).unwrap(), vec![1, 1]);
    }

    #[test]
    fn multilinear_zero_factor() {
        let d = DemandSpec::multilinear(2).unwrap();
        assert_eq!(d.evaluate(&[1, 1, 0, 1]).unwrap(), vec![0]);
        assert_eq!(d.evaluate(&[1, 1, 1, 1]).unwrap(), vec![1]);
    }

    #[test]
    fn validation_errors() {
        assert!(DemandSpec::linear(4, vec![vec![1]]).is_err());
        assert!(DemandSpec::linear(2, vec![vec![1, 0], vec![1]]).is_err());
        assert!(DemandSpec::table(2, vec![vec![0, 1, 1]]).is_err());
        assert!(scenario_two().evaluate(&[1, 2, 0]).is_err());
        assert!(scenario_two().evaluate(&[1, 0]).is_err());
    }

    #[test]
    fn json_schema() {
        let d =
            DemandSpec::from_json(r#"{"kind":"linsep","q":2,"gamma":[[0,1,0],[0,1,1]]}"#).unwrap();
        assert_eq!(d, scenario_two());
        let m = DemandSpec::from_json(r#"{"kind":"multilinear"}"#).unwrap();
        assert_eq!(m, DemandSpec::MultiLinear { q: 2 });
        let t = DemandSpec::from_json(r#"{"kind":"table","q":2,"tables":[[0,0,0,1]]}"#).unwrap();
        assert_eq!(t.arity(), Some(2));
        assert_eq!(DemandSpec::from_json(&t.to_json()).unwrap(), t);
        assert!(DemandSpec::from_json(r#"{"kind":"table","q":2,"tables":[[0,3]]}"#).is_err());
    }

    #[test]
    fn linear_demands_are_additive() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for &(q, k) in &[(2u32, 6usize), (3, 5), (5, 4), (2, 12)] {
            let gamma: Vec<Vec<u32>> = (0..3)
                .map(|_| (0..k).map(|_| rng.random_range(0..q)).collect())
                .collect();
            let d = DemandSpec::linear(q, gamma).unwrap();
            let n = (q as usize).pow(k as u32);
            let radices = vec![q as usize; k];
            let mut a = vec![0; k];
            let mut b = vec![0; k];
            for _ in 0..2000.min(n * n) {
                decode_into(&radices, rng.random_range(0..n), &mut a);
                decode_into(&radices, rng.random_range(0..n), &mut b);
                let s: Vec<u32> = a.iter().zip(&b).map(|(x, y)| (x + y) % q).collect();
                let fa = d.evaluate(&a).unwrap();
                let fb = d.evaluate(&b).unwrap();
                let fs = d.evaluate(&s).unwrap();
                let sum: Vec<u32> = fa.iter().zip(&fb).map(|(x, y)| (x + y) % q).collect();
                assert_eq!(fs, sum);
            }
        }
    }

    #[test]
    fn linear_additivity_exhaustive_small() {
        let d = DemandSpec::linear(3, vec![vec![1, 2, 0], vec![2, 2, 1]]).unwrap();
        let radices = [3usize; 3];
        let (mut a, mut b) = ([0u32; 3], [0u32; 3]);
        for i in 0..27 {
            for j in 0..27 {
                decode_into(&radices, i, &mut a);
                decode_into(&radices, j, &mut b);
                let s: Vec<u32> = a.iter().zip(&b).map(|(x, y)| (x + y) % 3).collect();
                let lhs = d.evaluate(&s).unwrap();
                let rhs: Vec<u32> = d
                    .evaluate(&a)
                    .unwrap()
                    .iter()
                    .zip(d.evaluate(&b).unwrap())
                    .map(|(x, y)| (x + y) % 3)
                    .collect();
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn multilinear_is_and_over_f2() {
        let d = DemandSpec::multilinear(2).unwrap();
        for idx in 0..64 {
            let mut w = [0u32; 6];
            decode_into(&[2; 6], idx, &mut w);
            assert_eq!(d.evaluate(&w).unwrap()[0] == 1, w.iter().all(|&b| b == 1));
        }
    }

    #[test]
    fn scenario_two_server_one_depends_on_w2_only() {
        let p = cyclic_placement(&Topology::cyclic(3, 3, 2, 2).unwrap()).unwrap();
        let d = scenario_two();
        let r = restrict_to_server(&d, &p, 0).unwrap();
        assert_eq!(r.local_coords(), &[0, 1]);
        assert_eq!(r.complement_coords(), &[2]);
        for w3 in 0..2 {
            for w2 in 0..2 {
                let a = r.eval(&[0, w2], &[w3]).unwrap();
                let b = r.eval(&[1, w2], &[w3]).unwrap();
                assert_eq!(a[0], b[0]);
                assert_eq!(a[0], w2);
            }
        }
    }

    #[test]
    fn multilinear_restriction_factorizes() {
        let p = cyclic_placement(&Topology::cyclic(4, 4, 1, 3).unwrap()).unwrap();
        let d = DemandSpec::multilinear(2).unwrap();
        let r = restrict_to_server(&d, &p, 1).unwrap();
        for li in 0..4 {
            for ri in 0..4 {
                let mut local = [0u32; 2];
                let mut rest = [0u32; 2];
                decode_into(&[2, 2], li, &mut local);
                decode_into(&[2, 2], ri, &mut rest);
                let want = local.iter().product::<u32>() * rest.iter().product::<u32>();
                assert_eq!(r.eval(&local, &rest).unwrap(), vec![want]);
            }
        }
    }

    #[test]
    fn restriction_merge_matches_evaluate() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let q = 3u32;
        let d = DemandSpec::from_fn(q, 3, 2, |_| {
            vec![rng.random_range(0..q), rng.random_range(0..q)]
        })
        .unwrap();
        let p = cyclic_placement(&Topology::cyclic(3, 3, 2, 2).unwrap()).unwrap();
        let radices = [3usize; 3];
        let mut w = [0u32; 3];
        for i in 0..3 {
            let r = restrict_to_server(&d, &p, i).unwrap();
            for idx in 0..27 {
                decode_into(&radices, idx, &mut w);
                let local: Vec<u32> = r.local_coords().iter().map(|&c| w[c]).collect();
                let rest: Vec<u32> = r.complement_coords().iter().map(|&c| w[c]).collect();
                assert_eq!(r.eval(&local, &rest).unwrap(), d.evaluate(&w).unwrap());
                let others: Vec<(usize, Vec<u32>)> = (0..3)
                    .filter(|&j| j != i)
                    .map(|j| (j, p.coords(j).iter().map(|&c| w[c]).collect()))
                    .collect();
                let merged = r.merge(&p, &local, &others).unwrap();
                assert_eq!(merged, w.to_vec());
                assert_eq!(d.evaluate(&merged).unwrap(), d.evaluate(&w).unwrap());
            }
        }
    }

    #[test]
    fn merge_rejects_inconsistent_overlap() {
        let p = cyclic_placement(&Topology::cyclic(3, 3, 2, 2).unwrap()).unwrap();
        let d = scenario_two();
        let r = restrict_to_server(&d, &p, 0).unwrap();
        // Server 2 holds (W2, W3); W2 disagrees with server 1's local value.
        let err = r.merge(&p, &[0, 1], &[(1, vec![0, 1])]).unwrap_err();
        assert_eq!(err, Error::InconsistentOverlap { dataset: 2 });
    }

    #[test]
    fn dependencies() {
        assert_eq!(
            scenario_two().dependencies(3).unwrap(),
            vec![false, true, true]
        );
        assert_eq!(
            DemandSpec::multilinear(2).unwrap().dependencies(3).unwrap(),
            vec![true; 3]
        );
    }
}
