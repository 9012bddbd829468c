//! Closed-form rate comparisons for the worked scenarios.

use super::{
    gains, multishot_rate, prop3_rate, slepian_wolf_rate, GainReport, Method, RateReport, ShotParam,
};
use crate::error::{Error, Result};
use crate::probability::{h2, parity_param, DinizModel, SkewParams};
use crate::rates::chain::canonical_ordering;
use crate::topology::{derived_params, Topology};

fn require_cyclic(t: &Topology) -> Result<()> {
    if !t.is_cyclic() {
        return Err(Error::Premise(
            "closed form assumes cyclic placement".into(),
        ));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::Domain(format!("epsilon {eps} outside [0,1]")));
    }
    Ok(())
}

fn linear_report(rates: Vec<f64>) -> Result<RateReport> {
    let servers = (1..=rates.len()).collect();
    RateReport::bits(Method::Linear, servers, rates)
}

/// Modulo-2 sum of all `K` datasets with exchangeable correlated inputs.
///
/// Graph: every one of the `N*` disjoint servers sends the parity of its
/// `M` bits, plus the extra server's parity of `ξ_N` bits. Linear: each of
/// `Nr` servers sends the parity of its `M` bits. Slepian-Wolf: the joint
/// entropy of all `K` bits.
pub fn scenario1_rates(t: &Topology, model: DinizModel) -> Result<GainReport> {
    require_cyclic(t)?;
    if t.n_demands != 1 {
        return Err(Error::Premise("a single demanded sum is assumed".into()));
    }
    let graph = multishot_rate(t, ShotParam::Parity(model))?;
    let lin = linear_report(vec![
        h2(model.parity_prob(t.storage as u32));
        t.recovery_threshold
    ])?;
    let sw = RateReport::bits(
        Method::SlepianWolf,
        Vec::new(),
        vec![model.joint_entropy(t.n_datasets as u32)],
    )?;
    gains(graph, Some(lin), sw)
}

/// Three servers storing `{1,2}, {2,3}, {3,1}` and demands `W2`, `W2 + W3`.
///
/// `h23` is `H(W3 | W2)`, `sum` the entropy of the transmitted sum and
/// `w1` the entropy of `W1` given `(W2, W3)`.
fn scenario2(eps: f64, h23: f64, sum: f64, w1: f64) -> Result<GainReport> {
    let mut graph = RateReport::bits(Method::Chain, vec![1, 2], vec![h2(eps), h23])?;
    graph.ordering = Some(vec![1, 2]);
    let lin = linear_report(vec![h2(eps), sum])?;
    let sw = RateReport::bits(Method::SlepianWolf, Vec::new(), vec![w1, h2(eps), h23])?;
    gains(graph, Some(lin), sw)
}

/// Independent Bern(eps) datasets.
pub fn scenario2_rho0(eps: f64) -> Result<GainReport> {
    check_eps(eps)?;
    scenario2(eps, h2(eps), h2(2.0 * eps * (1.0 - eps)), h2(eps))
}

/// `(W2, W3)` from the crossover table with parameter `p`; `W1` is an
/// independent Bern(eps).
pub fn scenario2_table2(eps: f64, p: f64) -> Result<GainReport> {
    SkewParams::new(eps, 0.0, Some(p))?;
    let h23 = (1.0 - eps)
        * h2(if eps < 1.0 {
            eps * p / (1.0 - eps)
        } else {
            0.0
        })
        + eps * h2(p);
    scenario2(eps, h23, h2(2.0 * eps * p), h2(eps))
}

/// All three datasets from the exchangeable correlated model. The linear
/// scheme sends `W2 + W3` as an integer in `{0, 1, 2}`.
pub fn scenario2_diniz(model: DinizModel) -> Result<GainReport> {
    let (e, r) = (model.epsilon, model.rho);
    let zeta1 = (1.0 - e) * (1.0 - r) + r;
    let zeta2 = (1.0 - e) * (1.0 - r);
    let h23 = (1.0 - e) * h2(zeta1) + e * h2(zeta2);
    let sum = model.sum_pmf(2)?.entropy();
    let sw = slepian_wolf_rate(&model.joint(3)?)?;
    let mut graph = RateReport::bits(Method::Chain, vec![1, 2], vec![h2(e), h23])?;
    graph.ordering = Some(vec![1, 2]);
    let lin = linear_report(vec![h2(e), sum])?;
    gains(graph, Some(lin), sw)
}

/// `Kc` independent demands with `K = N` and i.i.d. Bern(eps) inputs.
///
/// Linear: `Nr` parities of `M` bits. Graph: `Kc` bits from each of the
/// `N*` disjoint servers. Slepian-Wolf: `K h(eps)`.
pub fn scenario3_rates(t: &Topology, eps: f64, kc: usize) -> Result<GainReport> {
    require_cyclic(t)?;
    check_eps(eps)?;
    if t.n_datasets != t.n_servers {
        return Err(Error::Premise("K = N is assumed".into()));
    }
    if kc == 0 || kc > t.recovery_threshold {
        return Err(Error::Premise(format!("Kc = {kc} must lie in [1, Nr]")));
    }
    let dp = derived_params(t)?;
    let lin = linear_report(vec![
        h2(parity_param(t.storage as u32, eps));
        t.recovery_threshold
    ])?;
    let servers: Vec<usize> = canonical_ordering(t)?
        .into_iter()
        .take(dp.n_star)
        .map(|i| i + 1)
        .collect();
    let graph = RateReport::bits(Method::Chain, servers, vec![kc as f64 * h2(eps); dp.n_star])?;
    let sw = RateReport::bits(Method::SlepianWolf, Vec::new(), vec![h2(eps); t.n_datasets])?;
    gains(graph, Some(lin), sw)
}

/// Product of all `K` i.i.d. Bern(eps) datasets; no linear baseline.
pub fn multilinear_rates(t: &Topology, eps: f64) -> Result<GainReport> {
    check_eps(eps)?;
    let graph = prop3_rate(t, eps)?;
    let sw = RateReport::bits(Method::SlepianWolf, Vec::new(), vec![h2(eps); t.n_datasets])?;
    gains(graph, None, sw)
}
