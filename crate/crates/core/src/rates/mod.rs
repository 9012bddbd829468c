//! Sum-rate bounds, the ordered conditional chain, the Slepian-Wolf
//! baseline, and gains.

mod bounds;
mod chain;
mod scenarios;

use std::collections::HashMap;

use serde::{Deserialize, Serialize, Serializer};

pub use bounds::{
    multishot_rate, prop1_rate, prop2_rate, prop3_rate, theorem1_sum_rate, ShotParam,
};
pub use chain::{all_orderings, canonical_ordering, chain_rate, SideInfo};
pub use scenarios::{
    multilinear_rates, scenario1_rates, scenario2_diniz, scenario2_rho0, scenario2_table2,
    scenario3_rates,
};

use crate::chargraph::{build_char_graph, encoder_coloring};
use crate::error::{Error, Result};
use crate::functions::DemandSpec;
use crate::probability::{decode_into, encode, JointPmf};
use crate::topology::{subsets, Placement, Topology};

/// Which bound produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Theorem1,
    Prop1,
    Prop2,
    Prop3,
    Chain,
    SlepianWolf,
    Linear,
}

/// Unit of the rates in a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateUnit {
    Bits,
    /// `q`-ary symbols; one symbol is `log2 q` bits.
    Symbols,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub method: Method,
    pub unit: RateUnit,
    pub q: u32,
    /// 1-based server indices the per-server rates belong to. Empty when
    /// the terms are not attributed to servers (Slepian-Wolf chain-rule
    /// terms are per dataset).
    pub servers: Vec<usize>,
    pub per_server_rates: Vec<f64>,
    pub sum_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordering: Option<Vec<usize>>,
    /// Index of the chosen codebook candidate per server.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub codebook_choice: Option<Vec<usize>>,
    pub converged: bool,
}

impl RateReport {
    pub fn new(
        method: Method,
        unit: RateUnit,
        q: u32,
        servers: Vec<usize>,
        rates: Vec<f64>,
    ) -> Result<Self> {
        if let Some(r) = rates.iter().find(|r| !r.is_finite() || **r < -1e-9) {
            return Err(Error::Domain(format!("invalid rate {r}")));
        }
        let rates: Vec<f64> = rates.into_iter().map(|r| r.max(0.0)).collect();
        Ok(Self {
            method,
            unit,
            q,
            servers,
            sum_rate: rates.iter().sum(),
            per_server_rates: rates,
            ordering: None,
            codebook_choice: None,
            converged: true,
        })
    }

    pub(crate) fn bits(method: Method, servers: Vec<usize>, rates: Vec<f64>) -> Result<Self> {
        Self::new(method, RateUnit::Bits, 2, servers, rates)
    }

    pub fn sum_bits(&self) -> f64 {
        match self.unit {
            RateUnit::Bits => self.sum_rate,
            RateUnit::Symbols => self.sum_rate * (self.q as f64).log2(),
        }
    }

    pub fn sum_symbols(&self) -> f64 {
        match self.unit {
            RateUnit::Bits => self.sum_rate / (self.q as f64).log2(),
            RateUnit::Symbols => self.sum_rate,
        }
    }

    /// Every rate multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut r = self.clone();
        r.per_server_rates.iter_mut().for_each(|x| *x *= c);
        r.sum_rate *= c;
        r
    }
}

fn ser_gain<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*x)
    }
}

fn ser_opt_gain<S: Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => ser_gain(v, s),
        None => s.serialize_none(),
    }
}

/// Ratios of baseline rates to the characteristic-graph rate. An infinite
/// value flags a zero graph rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainReport {
    #[serde(serialize_with = "ser_opt_gain")]
    pub eta_lin: Option<f64>,
    #[serde(serialize_with = "ser_gain")]
    pub eta_sw: f64,
    pub graph: RateReport,
    pub lin: Option<RateReport>,
    pub sw: RateReport,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den <= 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// `η_lin = R_lin / R_graph` and `η_SW = R_SW / R_graph`, in bits.
pub fn gains(graph: RateReport, lin: Option<RateReport>, sw: RateReport) -> Result<GainReport> {
    let g = graph.sum_bits();
    Ok(GainReport {
        eta_lin: lin.as_ref().map(|l| ratio(l.sum_bits(), g)),
        eta_sw: ratio(sw.sum_bits(), g),
        graph,
        lin,
        sw,
    })
}

/// Joint entropy `H(W_1, .., W_K)`, split into chain-rule terms
/// `H(W_k | W_1, .., W_{k-1})`.
pub fn slepian_wolf_rate(joint: &JointPmf) -> Result<RateReport> {
    let k = joint.arity();
    let mut prev = 0.0;
    let mut terms = Vec::with_capacity(k);
    for j in 1..=k {
        let coords: Vec<usize> = (0..j).collect();
        let h = joint.marginal(&coords)?.entropy();
        terms.push(h - prev);
        prev = h;
    }
    let q = joint.radices().first().copied().unwrap_or(2) as u32;
    RateReport::new(Method::SlepianWolf, RateUnit::Bits, q, Vec::new(), terms)
}

/// Candidate encoding maps per server, each defined on the whole local
/// alphabet (indexed by the mixed-radix encoding of the local tuple).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    q: u32,
    candidates: Vec<Vec<Vec<usize>>>,
}

impl Codebook {
    /// Empty candidate lists for every server of `p`.
    pub fn empty(p: &Placement, q: u32) -> Self {
        Self {
            q,
            candidates: vec![Vec::new(); p.n_servers()],
        }
    }

    /// One candidate per server given by `f(server, local_tuple)`.
    pub fn from_fn(p: &Placement, q: u32, mut f: impl FnMut(usize, &[u32]) -> usize) -> Self {
        let mut cb = Self::empty(p, q);
        for i in 0..p.n_servers() {
            let m = p.server(i).len();
            let radices = vec![q as usize; m];
            let size = (q as usize).pow(m as u32);
            let mut t = vec![0u32; m];
            let map = (0..size)
                .map(|x| {
                    decode_into(&radices, x, &mut t);
                    f(i, &t)
                })
                .collect();
            cb.candidates[i].push(map);
        }
        cb
    }

    /// Each server sends its whole local tuple.
    pub fn identity(p: &Placement, q: u32) -> Self {
        let mut cb = Self::empty(p, q);
        for i in 0..p.n_servers() {
            let size = (q as usize).pow(p.server(i).len() as u32);
            cb.candidates[i].push((0..size).collect());
        }
        cb
    }

    /// Each server sends a minimum-entropy coloring of its union graph;
    /// zero-probability local symbols get color 0.
    pub fn coloring(d: &DemandSpec, p: &Placement, joint: &JointPmf) -> Result<Self> {
        let q = d.q();
        let all: Vec<usize> = (0..d.kc()).collect();
        let mut cb = Self::empty(p, q);
        for i in 0..p.n_servers() {
            let g = build_char_graph(d, p, joint, i, &all)?;
            let c = encoder_coloring(&g);
            let m = p.server(i).len();
            let radices = vec![q as usize; m];
            let mut map = vec![0usize; (q as usize).pow(m as u32)];
            for v in 0..g.len() {
                map[encode(&radices, g.label(v))] = c.color(v);
            }
            cb.candidates[i].push(map);
        }
        Ok(cb)
    }

    pub fn push(&mut self, server: usize, map: Vec<usize>) -> Result<()> {
        let list = self
            .candidates
            .get_mut(server)
            .ok_or_else(|| Error::InvalidTopology(format!("no server {}", server + 1)))?;
        list.push(map);
        Ok(())
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn candidates(&self, server: usize) -> &[Vec<usize>] {
        &self.candidates[server]
    }

    fn check_shape(&self, p: &Placement) -> Result<()> {
        if self.candidates.len() != p.n_servers() {
            return Err(Error::Arity {
                expected: p.n_servers(),
                got: self.candidates.len(),
            });
        }
        for (i, list) in self.candidates.iter().enumerate() {
            if list.is_empty() {
                return Err(Error::InvalidDemand(format!(
                    "server {} has no codebook candidate",
                    i + 1
                )));
            }
            let size = (self.q as usize).pow(p.server(i).len() as u32);
            if let Some(bad) = list.iter().find(|m| m.len() != size) {
                return Err(Error::Arity {
                    expected: size,
                    got: bad.len(),
                });
            }
        }
        Ok(())
    }
}

const MAX_CANDIDATE_COMBINATIONS: u128 = 10_000;

/// Support cells of `joint` with the local symbol of every server and the
/// output key of all demands.
pub(crate) struct Outcomes {
    pub local: Vec<Vec<usize>>,
    pub key: Vec<Vec<u32>>,
    pub mass: Vec<f64>,
    pub tuple: Vec<Vec<u32>>,
}

pub(crate) fn outcomes(d: &DemandSpec, p: &Placement, joint: &JointPmf) -> Result<Outcomes> {
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
    let coords: Vec<Vec<usize>> = (0..p.n_servers()).map(|i| p.coords(i)).collect();
    let mut out = Outcomes {
        local: Vec::new(),
        key: Vec::new(),
        mass: Vec::new(),
        tuple: Vec::new(),
    };
    let mut w = vec![0u32; k];
    for (idx, prob) in joint.support() {
        decode_into(joint.radices(), idx, &mut w);
        let local = coords
            .iter()
            .map(|c| {
                let t: Vec<u32> = c.iter().map(|&j| w[j]).collect();
                encode(&vec![q; c.len()], &t)
            })
            .collect();
        let mut key = vec![0u32; d.kc()];
        d.eval_into(&w, &mut key);
        out.local.push(local);
        out.key.push(key);
        out.mass.push(prob);
        out.tuple.push(w.clone());
    }
    Ok(out)
}

/// Checks that every combination of candidates, joined over every
/// `Nr`-subset of servers, determines all demanded outputs on the support.
pub fn check_decodable(
    t: &Topology,
    p: &Placement,
    d: &DemandSpec,
    joint: &JointPmf,
    cb: &Codebook,
) -> Result<()> {
    cb.check_shape(p)?;
    let combos: u128 = (0..p.n_servers())
        .map(|i| cb.candidates(i).len() as u128)
        .product();
    if combos > MAX_CANDIDATE_COMBINATIONS {
        return Err(Error::desk(
            "codebook candidate combinations",
            combos,
            MAX_CANDIDATE_COMBINATIONS,
        ));
    }
    let oc = outcomes(d, p, joint)?;
    let subsets = subsets(t.n_servers, t.recovery_threshold)?;
    let counts: Vec<usize> = (0..p.n_servers()).map(|i| cb.candidates(i).len()).collect();
    let mut choice = vec![0usize; p.n_servers()];
    loop {
        for s in &subsets {
            let mut seen: HashMap<Vec<usize>, usize> = HashMap::new();
            for (c, local) in oc.local.iter().enumerate() {
                let profile: Vec<usize> = s
                    .iter()
                    .map(|&i| cb.candidates(i)[choice[i]][local[i]])
                    .collect();
                match seen.get(&profile) {
                    Some(&other) if oc.key[other] != oc.key[c] => {
                        return Err(Error::Undecodable {
                            subset: s.iter().map(|i| i + 1).collect(),
                            reason: format!(
                                "inputs {:?} and {:?} share transmissions but differ in demanded outputs",
                                oc.tuple[other], oc.tuple[c]
                            ),
                        });
                    }
                    Some(_) => {}
                    None => {
                        seen.insert(profile, c);
                    }
                }
            }
        }
        // Next combination of candidates, odometer style.
        let mut i = 0;
        while i < choice.len() {
            choice[i] += 1;
            if choice[i] < counts[i] {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
        if i == choice.len() {
            return Ok(());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probability::{h2, Pmf};
    use crate::topology::cyclic_placement;

    #[test]
    fn slepian_wolf_iid_and_correlated() {
        let j = JointPmf::iid(&Pmf::bernoulli(0.2).unwrap(), 4).unwrap();
        let r = slepian_wolf_rate(&j).unwrap();
        assert!((r.sum_rate - 4.0 * h2(0.2)).abs() < 1e-12);
        let same = JointPmf::from_fn(vec![2, 2, 2], |t| {
            if t.iter().all(|&b| b == t[0]) {
                if t[0] == 1 {
                    0.3
                } else {
                    0.7
                }
            } else {
                0.0
            }
        })
        .unwrap();
        assert!((slepian_wolf_rate(&same).unwrap().sum_rate - h2(0.3)).abs() < 1e-12);
    }

    #[test]
    fn slepian_wolf_table_pair() {
        let (e, pc) = (0.3, 0.4);
        let j = crate::probability::crossover_joint(e, pc).unwrap();
        let want = h2(e) + (1.0 - e) * h2(e * pc / (1.0 - e)) + e * h2(pc);
        assert!((slepian_wolf_rate(&j).unwrap().sum_rate - want).abs() < 1e-12);
    }

    #[test]
    fn gains_ratio_and_sentinel() {
        let g = RateReport::bits(Method::Chain, vec![1], vec![2.0]).unwrap();
        let l = RateReport::bits(Method::Linear, vec![1], vec![3.0]).unwrap();
        let s = RateReport::bits(Method::SlepianWolf, vec![], vec![4.0]).unwrap();
        let r = gains(g.clone(), Some(l.clone()), s.clone()).unwrap();
        assert_eq!(r.eta_lin, Some(1.5));
        assert_eq!(r.eta_sw, 2.0);
        let scaled = gains(g.scaled(7.0), Some(l.scaled(7.0)), s.scaled(7.0)).unwrap();
        assert!((scaled.eta_lin.unwrap() - 1.5).abs() < 1e-15);
        let zero = RateReport::bits(Method::Chain, vec![1], vec![0.0]).unwrap();
        let r = gains(zero, Some(l), s).unwrap();
        assert!(r.eta_sw.is_infinite());
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"eta_sw\":\"inf\""));
    }

    #[test]
    fn report_units() {
        let r = RateReport::new(
            Method::Prop1,
            RateUnit::Symbols,
            4,
            vec![1, 2],
            vec![1.0, 2.0],
        )
        .unwrap();
        assert_eq!(r.sum_rate, 3.0);
        assert!((r.sum_bits() - 6.0).abs() < 1e-12);
        assert!(RateReport::bits(Method::Chain, vec![1], vec![-1.0]).is_err());
    }

    #[test]
    fn scenario_two_coloring_codebook_is_decodable() {
        let t = Topology::cyclic(3, 3, 2, 2).unwrap();
        let p = cyclic_placement(&t).unwrap();
        let d = DemandSpec::linear(2, vec![vec![0, 1, 0], vec![0, 1, 1]]).unwrap();
        let j = JointPmf::iid(&Pmf::bernoulli(0.2).unwrap(), 3).unwrap();
        let cb = Codebook::coloring(&d, &p, &j).unwrap();
        check_decodable(&t, &p, &d, &j, &cb).unwrap();
        assert!(check_decodable(&t, &p, &d, &j, &Codebook::identity(&p, 2)).is_ok());
        // Sending only the first local bit loses W3 on the subset {1, 2}.
        let lossy = Codebook::from_fn(&p, 2, |_, x| x[0] as usize);
        assert!(matches!(
            check_decodable(&t, &p, &d, &j, &lossy),
            Err(Error::Undecodable { .. })
        ));
    }
}
