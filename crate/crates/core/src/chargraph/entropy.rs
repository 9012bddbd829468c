use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{enumerate_mis, CharGraph, MisFamily};
use crate::error::{Error, Result};
use crate::probability::{JointPmf, SUPPORT_EPS};

/// Controls for the alternating-minimization solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stopping tolerance in bits.
    pub tol: f64,
    pub max_iters: usize,
    /// Total starts: one uniform, the rest random.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iters: 100_000,
            restarts: 8,
            seed: 0,
        }
    }
}

/// Minimum found by the solver together with the minimizing test channel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphEntropyResult {
    /// Bits.
    pub value: f64,
    pub converged: bool,
    /// Iterations of the best start.
    pub iterations: usize,
    /// Largest minus smallest value over all starts.
    pub restart_spread: f64,
    /// Maximal independent sets, by vertex index.
    pub mis: Vec<Vec<usize>>,
    /// `conditional_pmf[x][u] = P(U = u | X = x)`.
    pub conditional_pmf: Vec<Vec<f64>>,
}

struct Run {
    value: f64,
    converged: bool,
    iterations: usize,
    channel: Vec<Vec<f64>>,
}

fn trivial(g: &CharGraph, mis: &MisFamily, value: f64) -> GraphEntropyResult {
    let conditional_pmf = (0..g.len())
        .map(|x| {
            let mut row = vec![0.0; mis.len()];
            row[mis.containing(x)[0]] = 1.0;
            row
        })
        .collect();
    GraphEntropyResult {
        value,
        converged: true,
        iterations: 0,
        restart_spread: 0.0,
        mis: mis.sets().to_vec(),
        conditional_pmf,
    }
}

/// Random point of the simplex over `k` entries, bounded away from zero.
fn random_simplex(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k)
        .map(|_| -rng.random::<f64>().max(1e-12).ln() + 1e-3)
        .collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

fn combine(g: &CharGraph, mis: &MisFamily, runs: Vec<Run>) -> GraphEntropyResult {
    let lo = runs.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
    let hi = runs
        .iter()
        .map(|r| r.value)
        .fold(f64::NEG_INFINITY, f64::max);
    let converged = runs.iter().all(|r| r.converged);
    let best = runs
        .into_iter()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one start");
    let value = best.value.clamp(0.0, g.source_entropy());
    GraphEntropyResult {
        value,
        converged,
        iterations: best.iterations,
        restart_spread: hi - lo,
        mis: mis.sets().to_vec(),
        conditional_pmf: best.channel,
    }
}

/// Graph entropy `min I(X;U)` over test channels supported on maximal
/// independent sets containing `x`.
///
/// Works on the equivalent weights `λ` over independent sets with the
/// multiplicative update `λ_u <- λ_u g_u`; a start stops once the duality
/// bound `log2 max_u g_u` on its suboptimality drops below `tol`.
pub fn graph_entropy(g: &CharGraph, opts: &SolverOptions) -> Result<GraphEntropyResult> {
    let mis = enumerate_mis(g)?;
    if mis.len() == 1 {
        return Ok(trivial(g, &mis, 0.0));
    }
    if g.is_complete() {
        return Ok(trivial(g, &mis, g.source_entropy()));
    }
    let p = g.pmf();
    let n = g.len();
    let m = mis.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut runs = Vec::with_capacity(opts.restarts.max(1));
    for start in 0..opts.restarts.max(1) {
        let mut lambda = vec![0.0; m];
        for x in 0..n {
            let cont = mis.containing(x);
            let w = if start == 0 {
                vec![1.0 / cont.len() as f64; cont.len()]
            } else {
                random_simplex(&mut rng, cont.len())
            };
            for (&u, wu) in cont.iter().zip(w) {
                lambda[u] += p[x] * wu;
            }
        }
        runs.push(solve_weights(&mis, p, lambda, opts));
    }
    Ok(combine(g, &mis, runs))
}

fn solve_weights(mis: &MisFamily, p: &[f64], mut lambda: Vec<f64>, opts: &SolverOptions) -> Run {
    let n = p.len();
    let m = lambda.len();
    let mut a = vec![0.0; n];
    let mut grad = vec![0.0; m];
    let mut iterations = 0;
    let mut converged = false;
    let mut value = f64::INFINITY;
    while iterations < opts.max_iters {
        iterations += 1;
        for x in 0..n {
            a[x] = mis.containing(x).iter().map(|&u| lambda[u]).sum();
        }
        value = -(0..n).map(|x| p[x] * a[x].log2()).sum::<f64>();
        grad.iter_mut().for_each(|v| *v = 0.0);
        for x in 0..n {
            let r = p[x] / a[x];
            for &u in mis.containing(x) {
                grad[u] += r;
            }
        }
        let gap = grad.iter().copied().fold(0.0, f64::max).log2();
        if gap <= opts.tol {
            converged = true;
            break;
        }
        let mut s = 0.0;
        for u in 0..m {
            lambda[u] *= grad[u];
            s += lambda[u];
        }
        lambda.iter_mut().for_each(|l| *l /= s);
    }
    let channel = (0..n)
        .map(|x| {
            let mut row = vec![0.0; m];
            let ax: f64 = mis.containing(x).iter().map(|&u| lambda[u]).sum();
            for &u in mis.containing(x) {
                row[u] = lambda[u] / ax;
            }
            row
        })
        .collect();
    Run {
        value,
        converged,
        iterations,
        channel,
    }
}

/// Conditional graph entropy `min I(X;U|Y)` with `U - X - Y`, where the
/// first coordinate of `joint` indexes the vertices of `g`.
pub fn conditional_graph_entropy(
    g: &CharGraph,
    joint: &JointPmf,
    opts: &SolverOptions,
) -> Result<GraphEntropyResult> {
    if joint.arity() != 2 || joint.radices()[0] != g.len() {
        return Err(Error::GraphMismatch(format!(
            "side information joint has shape {:?}, expected [{}, _]",
            joint.radices(),
            g.len()
        )));
    }
    let nx = g.len();
    let ny = joint.radices()[1];
    let pxy: Vec<Vec<f64>> = (0..nx)
        .map(|x| (0..ny).map(|y| joint.mass()[x * ny + y]).collect())
        .collect();
    let dev = (0..nx)
        .map(|x| (pxy[x].iter().sum::<f64>() - g.pmf()[x]).abs())
        .fold(0.0, f64::max);
    if dev > 1e-9 {
        return Err(Error::MarginalMismatch(dev));
    }
    let mis = enumerate_mis(g)?;
    if mis.len() == 1 {
        return Ok(trivial(g, &mis, 0.0));
    }
    let solver = Conditional::new(&mis, pxy, ny);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut runs = Vec::with_capacity(opts.restarts.max(1));
    for start in 0..opts.restarts.max(1) {
        let init: Vec<Vec<f64>> = (0..nx)
            .map(|x| {
                let k = mis.containing(x).len();
                if start == 0 {
                    vec![1.0 / k as f64; k]
                } else {
                    random_simplex(&mut rng, k)
                }
            })
            .collect();
        runs.push(solver.solve(init, opts));
    }
    Ok(combine(g, &mis, runs))
}

struct Conditional<'a> {
    mis: &'a MisFamily,
    /// Joint masses with zero-probability side symbols dropped.
    pxy: Vec<Vec<f64>>,
    /// `p(y | x)`.
    py_x: Vec<Vec<f64>>,
    /// `p(x | y)`.
    px_y: Vec<Vec<f64>>,
}

impl<'a> Conditional<'a> {
    fn new(mis: &'a MisFamily, pxy: Vec<Vec<f64>>, ny: usize) -> Self {
        let nx = pxy.len();
        let keep: Vec<usize> = (0..ny)
            .filter(|&y| (0..nx).map(|x| pxy[x][y]).sum::<f64>() > SUPPORT_EPS)
            .collect();
        let pxy: Vec<Vec<f64>> = pxy
            .iter()
            .map(|row| keep.iter().map(|&y| row[y]).collect())
            .collect();
        let ny = keep.len();
        let px: Vec<f64> = pxy.iter().map(|r| r.iter().sum()).collect();
        let py: Vec<f64> = (0..ny).map(|y| (0..nx).map(|x| pxy[x][y]).sum()).collect();
        let py_x = (0..nx)
            .map(|x| (0..ny).map(|y| pxy[x][y] / px[x]).collect())
            .collect();
        let px_y = (0..ny)
            .map(|y| (0..nx).map(|x| pxy[x][y] / py[y]).collect())
            .collect();
        Self {
            mis,
            pxy,
            py_x,
            px_y,
        }
    }

    /// `Q(u | y)` induced by the channel.
    fn marginals(&self, channel: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let ny = self.px_y.len();
        let mut q = vec![vec![0.0; self.mis.len()]; ny];
        for (y, qy) in q.iter_mut().enumerate() {
            for (x, row) in channel.iter().enumerate() {
                let w = self.px_y[y][x];
                if w > 0.0 {
                    for (k, &u) in self.mis.containing(x).iter().enumerate() {
                        qy[u] += w * row[k];
                    }
                }
            }
        }
        q
    }

    fn objective(&self, channel: &[Vec<f64>], q: &[Vec<f64>]) -> f64 {
        let mut total = 0.0;
        for (x, row) in channel.iter().enumerate() {
            for (k, &u) in self.mis.containing(x).iter().enumerate() {
                let c = row[k];
                if c <= 0.0 {
                    continue;
                }
                for (y, &pxy) in self.pxy[x].iter().enumerate() {
                    if pxy > 0.0 {
                        total += pxy * c * (c / q[y][u]).log2();
                    }
                }
            }
        }
        total
    }

    fn solve(&self, mut channel: Vec<Vec<f64>>, opts: &SolverOptions) -> Run {
        let mut q = self.marginals(&channel);
        let mut value = self.objective(&channel, &q);
        let mut iterations = 0;
        let mut converged = false;
        while iterations < opts.max_iters {
            iterations += 1;
            for (x, row) in channel.iter_mut().enumerate() {
                let cont = self.mis.containing(x);
                let logs: Vec<f64> = cont
                    .iter()
                    .map(|&u| {
                        self.py_x[x]
                            .iter()
                            .enumerate()
                            .filter(|(_, &w)| w > 0.0)
                            .map(|(y, &w)| w * q[y][u].max(f64::MIN_POSITIVE).ln())
                            .sum::<f64>()
                    })
                    .collect();
                let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut s = 0.0;
                for (r, l) in row.iter_mut().zip(&logs) {
                    *r = (l - top).exp();
                    s += *r;
                }
                row.iter_mut().for_each(|r| *r /= s);
            }
            q = self.marginals(&channel);
            let next = self.objective(&channel, &q);
            let delta = (value - next).abs();
            value = next;
            if delta < opts.tol * 1e-3 {
                converged = true;
                break;
            }
        }
        let m = self.mis.len();
        let channel = channel
            .iter()
            .enumerate()
            .map(|(x, row)| {
                let mut full = vec![0.0; m];
                for (k, &u) in self.mis.containing(x).iter().enumerate() {
                    full[u] = row[k];
                }
                full
            })
            .collect();
        Run {
            value: value.max(0.0),
            converged,
            iterations,
            channel,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probability::{h2, Pmf};

    fn ternary() -> CharGraph {
        CharGraph::new(
            vec![vec![1], vec![2], vec![3]],
            vec![1.0 / 3.0; 3],
            &[(0, 2)],
        )
        .unwrap()
    }

    #[test]
    fn ternary_graph_entropy() {
        let r = graph_entropy(&ternary(), &SolverOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.value - 2.0 / 3.0).abs() < 1e-8, "{}", r.value);
        assert!(r.restart_spread < 1e-6);
        for (x, row) in r.conditional_pmf.iter().enumerate() {
            for (u, &c) in row.iter().enumerate() {
                if c > 0.0 {
                    assert!(r.mis[u].contains(&x));
                }
            }
        }
    }

    #[test]
    fn ternary_conditional() {
        let joint =
            JointPmf::from_fn(vec![3, 3], |t| if t[0] == t[1] { 0.0 } else { 1.0 / 6.0 }).unwrap();
        let r = conditional_graph_entropy(&ternary(), &joint, &SolverOptions::default()).unwrap();
        let want = 2.0 / 3.0 * h2(0.25);
        assert!((r.value - want).abs() < 1e-6, "{} vs {want}", r.value);
        assert!((want - 0.540852).abs() < 1e-6);
    }

    #[test]
    fn independent_side_information_is_vacuous() {
        let g = ternary();
        let joint =
            JointPmf::product(&[g.vertex_pmf(), Pmf::new(vec![0.3, 0.7]).unwrap()]).unwrap();
        let c = conditional_graph_entropy(&g, &joint, &SolverOptions::default()).unwrap();
        let u = graph_entropy(&g, &SolverOptions::default()).unwrap();
        assert!((c.value - u.value).abs() < 1e-6);
    }

    #[test]
    fn full_side_information_gives_zero() {
        let g = ternary();
        let joint =
            JointPmf::from_fn(vec![3, 3], |t| if t[0] == t[1] { 1.0 / 3.0 } else { 0.0 }).unwrap();
        let c = conditional_graph_entropy(&g, &joint, &SolverOptions::default()).unwrap();
        assert!(c.value.abs() < 1e-6);
    }

    #[test]
    fn marginal_mismatch() {
        let joint =
            JointPmf::from_fn(vec![3, 2], |t| if t[0] == 0 { 0.25 } else { 0.125 }).unwrap();
        assert!(matches!(
            conditional_graph_entropy(&ternary(), &joint, &SolverOptions::default()),
            Err(Error::MarginalMismatch(_))
        ));
    }

    #[test]
    fn complete_and_empty() {
        let pmf = Pmf::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let opts = SolverOptions::default();
        let k = graph_entropy(&CharGraph::complete(&pmf).unwrap(), &opts).unwrap();
        assert!((k.value - pmf.entropy()).abs() < 1e-9);
        let e = graph_entropy(&CharGraph::edgeless(&pmf).unwrap(), &opts).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn json_fields() {
        let r = graph_entropy(&ternary(), &SolverOptions::default()).unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert!(v["value"].is_f64());
        assert!(v["converged"].is_boolean());
        assert!(v["iterations"].is_u64());
    }
}
