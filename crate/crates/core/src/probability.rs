//! Finite-alphabet probability: PMFs, joint PMFs, entropies, and the
//! dataset-statistics models used by the scenario evaluations.
//!
//! All entropies are in bits and use the convention `0 log 0 = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalization tolerance for user-constructed distributions.
pub const NORMALIZATION_TOL: f64 = 1e-12;
/// Normalization tolerance for closed-form model outputs.
pub const MODEL_TOL: f64 = 1e-9;
/// Masses at or below this are treated as zero when extracting supports.
pub const SUPPORT_EPS: f64 = 1e-15;
/// Largest dense joint table we are willing to allocate.
pub const MAX_JOINT_CELLS: usize = 1 << 24;

#[inline]
pub(crate) fn plogp(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p * p.log2()
    }
}

/// Shannon entropy of a raw mass vector. Masses need not be normalized
/// exactly; no validation is performed.
pub(crate) fn entropy_of(masses: impl IntoIterator<Item = f64>) -> f64 {
    let h: f64 = masses.into_iter().map(|p| -plogp(p)).sum();
    h.max(0.0)
}

/// Binary entropy, assuming `p` is a probability (tiny round-off outside
/// `[0, 1]` is clamped).
#[inline]
pub(crate) fn h2(p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    -plogp(p) - plogp(1.0 - p)
}

/// `-p log2 p - (1-p) log2 (1-p)`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!(
            "binary entropy needs p in [0,1], got {p}"
        )));
    }
    Ok(h2(p))
}

fn check_masses(mass: &[f64], tol: f64) -> Result<()> {
    if mass.is_empty() {
        return Err(Error::InvalidPmf("empty mass vector".into()));
    }
    if let Some((i, p)) = mass
        .iter()
        .enumerate()
        .find(|(_, p)| !p.is_finite() || **p < 0.0)
    {
        return Err(Error::InvalidPmf(format!(
            "mass[{i}] = {p} is not a probability"
        )));
    }
    let sum: f64 = mass.iter().sum();
    if (sum - 1.0).abs() > tol {
        if tol >= MODEL_TOL {
            return Err(Error::ModelIntegrity { sum, tol });
        }
        return Err(Error::InvalidPmf(format!("masses sum to {sum}")));
    }
    Ok(())
}

/// A probability mass function over `{0, .., alphabet_size - 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    mass: Vec<f64>,
}

impl Pmf {
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        check_masses(&mass, NORMALIZATION_TOL)?;
        Ok(Self { mass })
    }

    /// Constructor for closed-form model outputs, which accumulate more
    /// round-off than hand-entered tables.
    pub fn from_model(mass: Vec<f64>) -> Result<Self> {
        check_masses(&mass, MODEL_TOL)?;
        Ok(Self { mass })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPmf("empty alphabet".into()));
        }
        Ok(Self {
            mass: vec![1.0 / n as f64; n],
        })
    }

    pub fn bernoulli(eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::Domain(format!(
                "Bernoulli parameter {eps} outside [0,1]"
            )));
        }
        Ok(Self {
            mass: vec![1.0 - eps, eps],
        })
    }

    pub fn alphabet_size(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn get(&self, i: usize) -> f64 {
        self.mass.get(i).copied().unwrap_or(0.0)
    }

    /// Symbols with mass above [`SUPPORT_EPS`].
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > SUPPORT_EPS)
            .map(|(i, _)| i)
    }

    pub fn entropy(&self) -> f64 {
        entropy_of(self.mass.iter().copied())
    }
}

/// Entropy in bits of a validated PMF.
pub fn entropy(p: &Pmf) -> f64 {
    p.entropy()
}

/// A dense joint PMF over tuples in `[0, r_0) x .. x [0, r_{d-1})`.
///
/// Tuples are stored in mixed-radix order with coordinate 0 most
/// significant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPmf {
    radices: Vec<usize>,
    mass: Vec<f64>,
}

fn table_size(radices: &[usize]) -> Result<usize> {
    let mut size: u128 = 1;
    for &r in radices {
        if r == 0 {
            return Err(Error::InvalidPmf("zero-size coordinate alphabet".into()));
        }
        size = size.saturating_mul(r as u128);
    }
    if size > MAX_JOINT_CELLS as u128 {
        return Err(Error::desk(
            "joint pmf table",
            size,
            MAX_JOINT_CELLS as u128,
        ));
    }
    Ok(size as usize)
}

impl JointPmf {
    pub fn new(radices: Vec<usize>, mass: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(radices, mass, NORMALIZATION_TOL)
    }

    pub fn from_model(radices: Vec<usize>, mass: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(radices, mass, MODEL_TOL)
    }

    fn with_tolerance(radices: Vec<usize>, mass: Vec<f64>, tol: f64) -> Result<Self> {
        if radices.is_empty() {
            return Err(Error::InvalidPmf(
                "joint pmf needs at least one coordinate".into(),
            ));
        }
        let size = table_size(&radices)?;
        if mass.len() != size {
            return Err(Error::InvalidPmf(format!(
                "expected {size} cells for radices {radices:?}, got {}",
                mass.len()
            )));
        }
        check_masses(&mass, tol)?;
        Ok(Self { radices, mass })
    }

    /// Builds a joint table by evaluating `f` on every tuple.
    pub fn from_fn(radices: Vec<usize>, mut f: impl FnMut(&[u32]) -> f64) -> Result<Self> {
        let size = table_size(&radices)?;
        let mut mass = Vec::with_capacity(size);
        let mut tuple = vec![0u32; radices.len()];
        for idx in 0..size {
            decode_into(&radices, idx, &mut tuple);
            mass.push(f(&tuple));
        }
        Self::from_model(radices, mass)
    }

    /// Product of independent marginals.
    pub fn product(marginals: &[Pmf]) -> Result<Self> {
        let radices = marginals.iter().map(Pmf::alphabet_size).collect();
        Self::from_fn(radices, |t| {
            t.iter()
                .zip(marginals)
                .map(|(&s, p)| p.get(s as usize))
                .product()
        })
    }

    /// `k` i.i.d. copies of `marginal`.
    pub fn iid(marginal: &Pmf, k: usize) -> Result<Self> {
        Self::product(&vec![marginal.clone(); k])
    }

    pub fn arity(&self) -> usize {
        self.radices.len()
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn encode(&self, tuple: &[u32]) -> usize {
        encode(&self.radices, tuple)
    }

    pub fn decode(&self, idx: usize) -> Vec<u32> {
        let mut t = vec![0; self.radices.len()];
        decode_into(&self.radices, idx, &mut t);
        t
    }

    pub fn prob(&self, tuple: &[u32]) -> f64 {
        if tuple.len() != self.arity()
            || tuple
                .iter()
                .zip(&self.radices)
                .any(|(&s, &r)| s as usize >= r)
        {
            return 0.0;
        }
        self.mass[self.encode(tuple)]
    }

    /// Positive-probability cells as `(index, mass)`.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.mass
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, p)| *p > SUPPORT_EPS)
    }

    /// Marginal over the listed coordinates, in the listed order.
    pub fn marginal(&self, coords: &[usize]) -> Result<JointPmf> {
        if coords.is_empty() {
            return Err(Error::InvalidPmf("marginal over no coordinates".into()));
        }
        let mut seen = vec![false; self.arity()];
        for &c in coords {
            if c >= self.arity() || seen[c] {
                return Err(Error::InvalidPmf(format!("bad marginal coordinate {c}")));
            }
            seen[c] = true;
        }
        let radices: Vec<usize> = coords.iter().map(|&c| self.radices[c]).collect();
        let size = table_size(&radices)?;
        let mut mass = vec![0.0; size];
        let mut tuple = vec![0u32; self.arity()];
        let mut sub = vec![0u32; coords.len()];
        for (idx, p) in self.support() {
            decode_into(&self.radices, idx, &mut tuple);
            for (s, &c) in sub.iter_mut().zip(coords) {
                *s = tuple[c];
            }
            mass[encode(&radices, &sub)] += p;
        }
        JointPmf::from_model(radices, mass)
    }

    /// Single-coordinate marginal as a [`Pmf`].
    pub fn marginal_pmf(&self, coord: usize) -> Result<Pmf> {
        let m = self.marginal(&[coord])?;
        Pmf::from_model(m.mass)
    }

    /// Flattens an arity-1 joint into a [`Pmf`]; for higher arity the
    /// mixed-radix cells become the symbols.
    pub fn flatten(&self) -> Pmf {
        Pmf {
            mass: self.mass.clone(),
        }
    }

    pub fn entropy(&self) -> f64 {
        entropy_of(self.mass.iter().copied())
    }
}

pub(crate) fn encode(radices: &[usize], tuple: &[u32]) -> usize {
    let mut idx = 0usize;
    for (&s, &r) in tuple.iter().zip(radices) {
        idx = idx * r + s as usize;
    }
    idx
}

pub(crate) fn decode_into(radices: &[usize], mut idx: usize, out: &mut [u32]) {
    for (slot, &r) in out.iter_mut().zip(radices).rev() {
        *slot = (idx % r) as u32;
        idx /= r;
    }
}

/// `I(X;Y) = H(X) + H(Y) - H(X,Y)` for an arity-2 joint, clamped at zero.
pub fn mutual_information(joint: &JointPmf) -> Result<f64> {
    if joint.arity() != 2 {
        return Err(Error::Arity {
            expected: 2,
            got: joint.arity(),
        });
    }
    let hx = joint.marginal(&[0])?.entropy();
    let hy = joint.marginal(&[1])?.entropy();
    let mi = hx + hy - joint.entropy();
    Ok(if mi < 0.0 { 0.0 } else { mi })
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {x} outside [0,1]")))
    }
}

/// Probability that the modulo-2 sum of `l` i.i.d. Bern(`eps`) bits is 1.
///
/// Evaluated by the one-step recursion `e_l = (1 - e_{l-1}) eps + e_{l-1} (1 - eps)`
/// starting from `e_1 = eps`. `l = 0` gives 0 (empty sum).
pub fn parity_param(l: u32, eps: f64) -> f64 {
    let mut e = 0.0;
    for _ in 0..l {
        e = (1.0 - e) * eps + e * (1.0 - eps);
    }
    e
}

/// Probability that the product of `l` i.i.d. Bern(`eps`) bits is 1.
pub fn product_param(l: u32, eps: f64) -> f64 {
    eps.powi(l as i32)
}

/// Parameters of the skewed/correlated binary dataset models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewParams {
    pub epsilon: f64,
    pub rho: f64,
    pub crossover_p: Option<f64>,
}

impl SkewParams {
    pub fn new(epsilon: f64, rho: f64, crossover_p: Option<f64>) -> Result<Self> {
        check_unit("epsilon", epsilon)?;
        check_unit("rho", rho)?;
        if let Some(p) = crossover_p {
            check_unit("p", p)?;
            if epsilon < 1.0 && epsilon * p / (1.0 - epsilon) > 1.0 {
                return Err(Error::Domain(format!(
                    "crossover p' = eps p / (1 - eps) = {} exceeds 1",
                    epsilon * p / (1.0 - epsilon)
                )));
            }
        }
        Ok(Self {
            epsilon,
            rho,
            crossover_p,
        })
    }
}

/// Exchangeable correlated Bernoulli model: with probability `1 - rho` the
/// bits are i.i.d. Bern(`epsilon`), with probability `rho` they all equal a
/// single Bern(`epsilon`) draw. Any `l`-subset follows the same model with
/// `l` in place of `K`, and the pairwise correlation coefficient is `rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DinizModel {
    pub epsilon: f64,
    pub rho: f64,
}

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl DinizModel {
    pub fn new(epsilon: f64, rho: f64) -> Result<Self> {
        check_unit("epsilon", epsilon)?;
        check_unit("rho", rho)?;
        Ok(Self { epsilon, rho })
    }

    /// Distribution of the number of ones among `k` bits.
    pub fn sum_pmf(&self, k: u32) -> Result<Pmf> {
        let (e, r) = (self.epsilon, self.rho);
        let kf = k as f64;
        let mass = (0..=k)
            .map(|y| {
                let yf = y as f64;
                let mut p =
                    binomial(k, y) * e.powi(y as i32) * (1.0 - e).powi((k - y) as i32) * (1.0 - r);
                if y == 0 || y == k {
                    p += e.powf(yf / kf) * (1.0 - e).powf((kf - yf) / kf) * r;
                }
                p
            })
            .collect();
        Pmf::from_model(mass)
    }

    /// Probability that one specific length-`k` bit pattern with `ones`
    /// ones occurs.
    pub fn pattern_prob(&self, k: u32, ones: u32) -> f64 {
        let (e, r) = (self.epsilon, self.rho);
        let mut p = (1.0 - r) * e.powi(ones as i32) * (1.0 - e).powi((k - ones) as i32);
        if ones == 0 {
            p += r * (1.0 - e);
        }
        if ones == k {
            p += r * e;
        }
        p
    }

    /// Probability that the modulo-2 sum of `l` bits is 1.
    pub fn parity_prob(&self, l: u32) -> f64 {
        let shared = if l % 2 == 1 { self.epsilon } else { 0.0 };
        (1.0 - self.rho) * parity_param(l, self.epsilon) + self.rho * shared
    }

    /// Joint entropy `H(W_1, .., W_k)`.
    pub fn joint_entropy(&self, k: u32) -> f64 {
        (0..=k)
            .map(|y| -binomial(k, y) * plogp(self.pattern_prob(k, y)))
            .sum::<f64>()
            .max(0.0)
    }

    /// Dense joint table over `{0,1}^k`.
    pub fn joint(&self, k: u32) -> Result<JointPmf> {
        JointPmf::from_fn(vec![2; k as usize], |t| {
            let ones = t.iter().filter(|&&b| b == 1).count() as u32;
            self.pattern_prob(k, ones)
        })
    }
}

/// PMF of the number of ones among `k` correlated Bern(`eps`) bits.
pub fn diniz_joint(k: u32, eps: f64, rho: f64) -> Result<Pmf> {
    DinizModel::new(eps, rho)?.sum_pmf(k)
}

/// Two-bit joint PMF with Bern(`eps`) marginals and crossover parameter `p`:
/// `P(0,0) = (1-eps)(1-p')`, `P(0,1) = P(1,0) = eps p`, `P(1,1) = eps (1-p)`
/// with `p' = eps p / (1 - eps)`.
pub fn crossover_joint(eps: f64, p: f64) -> Result<JointPmf> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!(
            "crossover model needs eps in (0,1), got {eps}"
        )));
    }
    check_unit("p", p)?;
    let p_prime = eps * p / (1.0 - eps);
    if p_prime > 1.0 {
        return Err(Error::Domain(format!("p' = {p_prime} exceeds 1")));
    }
    JointPmf::from_model(
        vec![2, 2],
        vec![
            (1.0 - eps) * (1.0 - p_prime),
            eps * p,
            eps * p,
            eps * (1.0 - p),
        ],
    )
}

/// Pearson correlation of a two-bit joint PMF.
pub fn pearson_rho(joint: &JointPmf) -> Result<f64> {
    if joint.radices() != [2, 2] {
        return Err(Error::Domain("pearson_rho needs a 2x2 joint".into()));
    }
    let m = joint.mass();
    let px = m[2] + m[3];
    let py = m[1] + m[3];
    let cov = m[3] - px * py;
    let denom = (px * (1.0 - px) * py * (1.0 - py)).sqrt();
    if denom == 0.0 {
        return Err(Error::Domain("degenerate marginal".into()));
    }
    Ok(cov / denom)
}
