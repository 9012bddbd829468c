use super::{check_decodable, Codebook, Method, RateReport, RateUnit};
use crate::chargraph::{
    build_char_graph, enumerate_mis, graph_entropy, quotient_graph, SolverOptions,
};
use crate::error::{Error, Result};
use crate::functions::DemandSpec;
use crate::probability::{encode, h2, product_param, DinizModel, JointPmf};
use crate::rates::chain::canonical_ordering;
use crate::topology::{coverage_check, derived_params, Placement, Topology};

fn require_coverage(p: &Placement, t: &Topology) -> Result<()> {
    if !coverage_check(p, t)? {
        return Err(Error::InvalidTopology(format!(
            "some {} servers do not jointly store all datasets",
            t.recovery_threshold
        )));
    }
    Ok(())
}

fn local_symbol(q: u32, label: &[u32]) -> usize {
    encode(&vec![q as usize; label.len()], label)
}

/// Sum over the first `Nr` servers of the smallest graph entropy of the
/// union graph seen through a codebook candidate.
///
/// A candidate map merges local symbols; the induced graph lives on its
/// image with pushforward masses, and two images are adjacent when some
/// preimages are.
pub fn theorem1_sum_rate(
    t: &Topology,
    p: &Placement,
    d: &DemandSpec,
    joint: &JointPmf,
    cb: &Codebook,
    opts: &SolverOptions,
) -> Result<RateReport> {
    require_coverage(p, t)?;
    check_decodable(t, p, d, joint, cb)?;
    let q = d.q();
    let all: Vec<usize> = (0..d.kc()).collect();
    let mut rates = Vec::new();
    let mut choice = Vec::new();
    let mut converged = true;
    for i in 0..t.recovery_threshold {
        let g = build_char_graph(d, p, joint, i, &all)?;
        let mut best = (f64::INFINITY, 0);
        for (k, map) in cb.candidates(i).iter().enumerate() {
            let image: Vec<usize> = (0..g.len())
                .map(|v| map[local_symbol(q, g.label(v))])
                .collect();
            let r = graph_entropy(&quotient_graph(&g, &image)?, opts)?;
            converged &= r.converged;
            if r.value < best.0 {
                best = (r.value, k);
            }
        }
        rates.push(best.0);
        choice.push(best.1);
    }
    let mut report = RateReport::new(
        Method::Theorem1,
        RateUnit::Bits,
        q,
        (1..=t.recovery_threshold).collect(),
        rates,
    )?;
    report.codebook_choice = Some(choice);
    report.converged = converged;
    Ok(report)
}

/// Linearly separable demands, cyclic placement, i.i.d. uniform inputs, in
/// `q`-ary symbols: `Kc Nr` if `Kc < Δ`, `Δ Nr` if `Δ <= Kc <= Δ Nr`, `Kc` if
/// `Δ Nr < Kc <= K`, and `K` beyond. The total is split evenly over the
/// `Nr` transmitting servers.
pub fn prop1_rate(t: &Topology, kc: usize, q: u32) -> Result<RateReport> {
    let delta = t.delta()?;
    if !t.is_cyclic() {
        return Err(Error::Premise(
            "closed form assumes cyclic placement".into(),
        ));
    }
    if kc == 0 {
        return Err(Error::InvalidDemand("Kc must be positive".into()));
    }
    let nr = t.recovery_threshold;
    let total = if kc < delta {
        kc * nr
    } else if kc <= delta * nr {
        delta * nr
    } else if kc <= t.n_datasets {
        kc
    } else {
        t.n_datasets
    };
    let share = total as f64 / nr as f64;
    RateReport::new(
        Method::Prop1,
        RateUnit::Symbols,
        q,
        (1..=nr).collect(),
        vec![share; nr],
    )
}

/// Binary inputs with identical marginals and Boolean transmissions: each
/// of the first `Nr` servers pays `h(P(g_i = 1))` for its best candidate.
///
/// The union graph of every transmitting server must have at most two
/// maximal independent sets, and each candidate must be a valid 2-coloring
/// of it; violations are reported as premise errors.
pub fn prop2_rate(
    t: &Topology,
    p: &Placement,
    d: &DemandSpec,
    joint: &JointPmf,
    cb: &Codebook,
) -> Result<RateReport> {
    if d.q() != 2 || cb.q() != 2 {
        return Err(Error::Premise("binary subfunctions required".into()));
    }
    let first = joint.marginal_pmf(0)?;
    for k in 1..joint.arity() {
        let m = joint.marginal_pmf(k)?;
        if (m.get(1) - first.get(1)).abs() > 1e-9 {
            return Err(Error::Premise(format!(
                "W_{} ~ Bern({}) differs from W_1 ~ Bern({})",
                k + 1,
                m.get(1),
                first.get(1)
            )));
        }
    }
    let all: Vec<usize> = (0..d.kc()).collect();
    let mut rates = Vec::new();
    let mut choice = Vec::new();
    for i in 0..t.recovery_threshold {
        let g = build_char_graph(d, p, joint, i, &all)?;
        let mis = enumerate_mis(&g)?;
        if mis.len() > 2 {
            return Err(Error::Premise(format!(
                "union graph of server {} has {} maximal independent sets",
                i + 1,
                mis.len()
            )));
        }
        let mut best = (f64::INFINITY, 0);
        for (k, map) in cb.candidates(i).iter().enumerate() {
            if map.iter().any(|&c| c > 1) {
                return Err(Error::Premise(format!(
                    "candidate {k} of server {} is not Boolean",
                    i + 1
                )));
            }
            let color: Vec<usize> = (0..g.len())
                .map(|v| map[local_symbol(2, g.label(v))])
                .collect();
            if let Some((a, b)) = g.edges().find(|&(a, b)| color[a] == color[b]) {
                return Err(Error::Premise(format!(
                    "candidate {k} of server {} merges adjacent {:?} and {:?}",
                    i + 1,
                    g.label(a),
                    g.label(b)
                )));
            }
            let one: f64 = (0..g.len())
                .filter(|&v| color[v] == 1)
                .map(|v| g.pmf()[v])
                .sum();
            let r = h2(one);
            if r < best.0 {
                best = (r, k);
            }
        }
        rates.push(best.0);
        choice.push(best.1);
    }
    let mut report = RateReport::bits(Method::Prop2, (1..=t.recovery_threshold).collect(), rates)?;
    report.codebook_choice = Some(choice);
    Ok(report)
}

/// How the per-stage Bernoulli parameter of a multi-shot scheme depends on
/// the number of bits it combines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShotParam {
    /// Product of i.i.d. Bern(eps) bits. A stage is only needed when every
    /// earlier product was 1.
    Product(f64),
    /// Modulo-2 sum of correlated bits. Every stage transmits.
    Parity(DinizModel),
}

/// Rate of the canonical disjoint-server schedule: `N*` stages over `M`
/// bits each plus, when `Δ_N > 0`, one stage over `ξ_N` bits.
pub fn multishot_rate(t: &Topology, param: ShotParam) -> Result<RateReport> {
    if !t.is_cyclic() {
        return Err(Error::Premise(
            "closed form assumes cyclic placement".into(),
        ));
    }
    let dp = derived_params(t)?;
    let m = t.storage as u32;
    let (stage, weight, tail): (f64, Box<dyn Fn(usize) -> f64>, f64) = match param {
        ShotParam::Product(eps) => {
            if !(0.0..=1.0).contains(&eps) {
                return Err(Error::Domain(format!("epsilon {eps} outside [0,1]")));
            }
            let em = product_param(m, eps);
            (
                em,
                Box::new(move |l| em.powi(l as i32)),
                product_param(dp.xi_n as u32, eps),
            )
        }
        ShotParam::Parity(model) => (
            model.parity_prob(m),
            Box::new(|_| 1.0),
            model.parity_prob(dp.xi_n as u32),
        ),
    };
    let mut rates: Vec<f64> = (0..dp.n_star).map(|l| weight(l) * h2(stage)).collect();
    if dp.delta_n > 0 {
        rates.push(weight(dp.n_star) * h2(tail));
    }
    let servers = canonical_ordering(t)?.into_iter().map(|i| i + 1).collect();
    let method = match param {
        ShotParam::Product(_) => Method::Prop3,
        ShotParam::Parity(_) => Method::Chain,
    };
    let mut r = RateReport::bits(method, servers, rates)?;
    r.ordering = Some(r.servers.clone());
    Ok(r)
}

/// Multilinear demand over i.i.d. Bern(eps) inputs under cyclic placement.
pub fn prop3_rate(t: &Topology, eps: f64) -> Result<RateReport> {
    multishot_rate(t, ShotParam::Product(eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probability::{parity_param, Pmf};
    use crate::topology::cyclic_placement;

    fn prop1_oracle(t: &Topology, kc: usize) -> usize {
        let delta = t.delta().unwrap();
        let nr = t.recovery_threshold;
        if kc <= delta * nr {
            kc.min(delta) * nr
        } else {
            kc.min(t.n_datasets)
        }
    }

    #[test]
    fn prop1_cases() {
        let t = Topology::cyclic(4, 4, 1, 3).unwrap();
        assert_eq!(prop1_rate(&t, 1, 2).unwrap().sum_rate, 3.0);
        assert_eq!(prop1_rate(&t, 9, 2).unwrap().sum_rate, 4.0);
        let t = Topology::cyclic(4, 8, 5, 3).unwrap();
        assert_eq!(prop1_rate(&t, 5, 2).unwrap().sum_rate, 6.0);
        assert!(prop1_rate(&Topology::new(4, 8, 1, 3, 3).unwrap(), 1, 2).is_err());
    }

    #[test]
    fn prop1_grid_and_monotone() {
        for n in 1..=6 {
            for delta in 1..=3 {
                for nr in 1..=n {
                    let t = Topology::cyclic(n, n * delta, 1, nr).unwrap();
                    let mut prev = 0.0;
                    for kc in 1..=(n * delta + 3) {
                        let r = prop1_rate(&t, kc, 2).unwrap();
                        assert_eq!(r.sum_rate, prop1_oracle(&t, kc) as f64);
                        assert!(r.sum_rate >= prev && r.sum_rate <= (n * delta) as f64);
                        assert!((r.per_server_rates.iter().sum::<f64>() - r.sum_rate).abs() < 1e-9);
                        prev = r.sum_rate;
                    }
                }
            }
        }
    }

    #[test]
    fn prop3_worked_value() {
        let t = Topology::cyclic(5, 5, 1, 4).unwrap();
        let r = prop3_rate(&t, 0.5).unwrap();
        assert!((r.sum_rate - 1.076598).abs() < 1e-6);
        assert_eq!(r.servers, vec![1, 3, 5]);
    }

    #[test]
    fn prop3_closed_form() {
        for &(n, k, nr) in &[(6, 6, 4), (4, 8, 3), (7, 7, 5), (6, 12, 6), (9, 9, 7)] {
            let t = Topology::cyclic(n, k, 1, nr).unwrap();
            let dp = derived_params(&t).unwrap();
            for &e in &[0.05f64, 0.3, 0.5, 0.9] {
                let em: f64 = e.powi(t.storage as i32);
                let mut want = (1.0 - em.powi(dp.n_star as i32)) / (1.0 - em) * h2(em);
                if dp.delta_n > 0 {
                    want += em.powi(dp.n_star as i32) * h2(e.powi(dp.xi_n as i32));
                }
                assert!((prop3_rate(&t, e).unwrap().sum_rate - want).abs() < 1e-12);
            }
        }
        let t = Topology::cyclic(6, 6, 1, 4).unwrap();
        assert!(prop3_rate(&t, 1e-9).unwrap().sum_rate < 1e-6);
        assert_eq!(prop3_rate(&t, 1.0).unwrap().sum_rate, 0.0);
    }

    fn and_codebook(p: &Placement) -> Codebook {
        Codebook::from_fn(p, 2, |_, x| x.iter().all(|&b| b == 1) as usize)
    }

    #[test]
    fn prop2_and_and_parity() {
        let t = Topology::cyclic(4, 4, 1, 3).unwrap();
        let p = cyclic_placement(&t).unwrap();
        let e = 0.2;
        let j = JointPmf::iid(&Pmf::bernoulli(e).unwrap(), 4).unwrap();
        let ml = DemandSpec::multilinear(2).unwrap();
        let r = prop2_rate(&t, &p, &ml, &j, &and_codebook(&p)).unwrap();
        assert!((r.sum_rate - 3.0 * h2(e * e)).abs() < 1e-12);

        let sum = DemandSpec::linear(2, vec![vec![1; 4]]).unwrap();
        let parity = Codebook::from_fn(&p, 2, |_, x| (x.iter().sum::<u32>() % 2) as usize);
        let r = prop2_rate(&t, &p, &sum, &j, &parity).unwrap();
        assert!((r.sum_rate - 3.0 * h2(parity_param(2, e))).abs() < 1e-12);

        let half = JointPmf::iid(&Pmf::bernoulli(0.5).unwrap(), 4).unwrap();
        let r = prop2_rate(&t, &p, &sum, &half, &parity).unwrap();
        assert!(r.per_server_rates.iter().all(|&x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn prop2_rejects_premise_violations() {
        let t = Topology::cyclic(3, 3, 2, 2).unwrap();
        let p = cyclic_placement(&t).unwrap();
        let d = DemandSpec::linear(2, vec![vec![0, 1, 0], vec![0, 1, 1]]).unwrap();
        let j = JointPmf::iid(&Pmf::bernoulli(0.3).unwrap(), 3).unwrap();
        // Server 2's union graph is complete on four vertices.
        let cb = Codebook::from_fn(&p, 2, |_, x| x[0] as usize);
        assert!(matches!(
            prop2_rate(&t, &p, &d, &j, &cb),
            Err(Error::Premise(_))
        ));

        let t = Topology::cyclic(4, 4, 1, 3).unwrap();
        let p = cyclic_placement(&t).unwrap();
        let ml = DemandSpec::multilinear(2).unwrap();
        let j = JointPmf::iid(&Pmf::bernoulli(0.3).unwrap(), 4).unwrap();
        let or = Codebook::from_fn(&p, 2, |_, x| x.contains(&1) as usize);
        assert!(matches!(
            prop2_rate(&t, &p, &ml, &j, &or),
            Err(Error::Premise(_))
        ));
        let skew = JointPmf::product(&[
            Pmf::bernoulli(0.3).unwrap(),
            Pmf::bernoulli(0.4).unwrap(),
            Pmf::bernoulli(0.3).unwrap(),
            Pmf::bernoulli(0.3).unwrap(),
        ])
        .unwrap();
        assert!(matches!(
            prop2_rate(&t, &p, &ml, &skew, &and_codebook(&p)),
            Err(Error::Premise(_))
        ));
    }

    #[test]
    fn theorem1_identity_on_complete_graphs() {
        let t = Topology::cyclic(3, 3, 3, 2).unwrap();
        let p = cyclic_placement(&t).unwrap();
        let id: Vec<Vec<u32>> = (0..3)
            .map(|j| (0..3).map(|k| (j == k) as u32).collect())
            .collect();
        let d = DemandSpec::linear(2, id).unwrap();
        let j = JointPmf::iid(&Pmf::bernoulli(0.2).unwrap(), 3).unwrap();
        let r = theorem1_sum_rate(
            &t,
            &p,
            &d,
            &j,
            &Codebook::identity(&p, 2),
            &SolverOptions::default(),
        )
        .unwrap();
        assert!((r.sum_rate - 4.0 * h2(0.2)).abs() < 1e-8);
    }

    #[test]
    fn theorem1_multilinear_pair() {
        let t = Topology::new(2, 2, 1, 1, 2).unwrap();
        let p = Placement::new(2, 2, vec![vec![1], vec![2]]).unwrap();
        let d = DemandSpec::multilinear(2).unwrap();
        let e = 0.3;
        let j = JointPmf::iid(&Pmf::bernoulli(e).unwrap(), 2).unwrap();
        let cb = Codebook::from_fn(&p, 2, |_, x| x.iter().product::<u32>() as usize);
        let r = theorem1_sum_rate(&t, &p, &d, &j, &cb, &SolverOptions::default()).unwrap();
        assert!((r.sum_rate - 2.0 * h2(e)).abs() < 1e-8);
    }

    #[test]
    fn theorem1_scenario_two_codebooks() {
        let t = Topology::cyclic(3, 3, 2, 2).unwrap();
        let p = cyclic_placement(&t).unwrap();
        let d = DemandSpec::linear(2, vec![vec![0, 1, 0], vec![0, 1, 1]]).unwrap();
        let e = 0.1;
        let j = JointPmf::iid(&Pmf::bernoulli(e).unwrap(), 3).unwrap();
        let opts = SolverOptions::default();
        // Coloring codebook: server 2 must separate all four local pairs.
        let col = theorem1_sum_rate(
            &t,
            &p,
            &d,
            &j,
            &Codebook::coloring(&d, &p, &j).unwrap(),
            &opts,
        )
        .unwrap();
        assert!((col.sum_rate - 3.0 * h2(e)).abs() < 1e-8);
        // Transmitting W2 and W2 + W3 realizes the linear scheme's cost.
        let mut cb = Codebook::coloring(&d, &p, &j).unwrap();
        cb.push(1, vec![0, 1, 1, 0]).unwrap();
        let r = theorem1_sum_rate(&t, &p, &d, &j, &cb, &opts).unwrap();
        assert!((r.sum_rate - (h2(e) + h2(2.0 * e * (1.0 - e)))).abs() < 1e-8);
        assert_eq!(r.codebook_choice, Some(vec![0, 1]));
        let lin = Codebook::from_fn(&p, 2, |i, x| match i {
            0 => x[1] as usize,
            1 => ((x[0] + x[1]) % 2) as usize,
            _ => x[0] as usize,
        });
        let r = theorem1_sum_rate(&t, &p, &d, &j, &lin, &opts).unwrap();
        assert!((r.sum_rate - (h2(e) + h2(2.0 * e * (1.0 - e)))).abs() < 1e-8);
    }
}
