use serde::Serialize;

use super::CharGraph;
use crate::error::{Error, Result};

pub const MAX_MIS_VERTICES: usize = 64;
pub const MAX_MIS_COUNT: usize = 200_000;

/// All maximal independent sets of a graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MisFamily {
    sets: Vec<Vec<usize>>,
    #[serde(skip)]
    masks: Vec<u64>,
    #[serde(skip)]
    membership: Vec<Vec<usize>>,
}

impl MisFamily {
    fn from_masks(mut masks: Vec<u64>, n: usize) -> Self {
        let bits = |m: u64| (0..n).filter(move |&v| m >> v & 1 == 1);
        masks.sort_unstable_by_key(|&m| bits(m).collect::<Vec<_>>());
        let sets: Vec<Vec<usize>> = masks.iter().map(|&m| bits(m).collect()).collect();
        let mut membership = vec![Vec::new(); n];
        for (u, s) in sets.iter().enumerate() {
            for &v in s {
                membership[v].push(u);
            }
        }
        Self {
            sets,
            masks,
            membership,
        }
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    pub fn masks(&self) -> &[u64] {
        &self.masks
    }

    /// Indices of the sets containing vertex `v`.
    pub fn containing(&self, v: usize) -> &[usize] {
        &self.membership[v]
    }
}

/// Maximal independent sets, found as maximal cliques of the complement
/// with pivoting Bron-Kerbosch.
pub fn enumerate_mis(g: &CharGraph) -> Result<MisFamily> {
    let n = g.len();
    let adj = g.masks().ok_or(Error::desk(
        "maximal independent set enumeration vertices",
        n as u128,
        MAX_MIS_VERTICES as u128,
    ))?;
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let comp: Vec<u64> = (0..n).map(|v| all & !adj[v] & !(1u64 << v)).collect();
    let mut out = Vec::new();
    bron_kerbosch(&comp, 0, all, 0, &mut out)?;
    Ok(MisFamily::from_masks(out, n))
}

fn bron_kerbosch(comp: &[u64], r: u64, mut p: u64, mut x: u64, out: &mut Vec<u64>) -> Result<()> {
    if p == 0 {
        if x == 0 {
            if out.len() >= MAX_MIS_COUNT {
                return Err(Error::desk(
                    "maximal independent sets",
                    out.len() as u128 + 1,
                    MAX_MIS_COUNT as u128,
                ));
            }
            out.push(r);
        }
        return Ok(());
    }
    let pivot = iter_bits(p | x)
        .max_by_key(|&u| (p & comp[u]).count_ones())
        .expect("p is non-empty");
    for v in iter_bits(p & !comp[pivot]) {
        bron_kerbosch(comp, r | 1 << v, p & comp[v], x & comp[v], out)?;
        p &= !(1 << v);
        x |= 1 << v;
    }
    Ok(())
}

fn iter_bits(mut m: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if m == 0 {
            return None;
        }
        let v = m.trailing_zeros() as usize;
        m &= m - 1;
        Some(v)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probability::Pmf;
    use proptest::prelude::*;

    fn random_graph(n: usize, edges: &[bool]) -> CharGraph {
        let mut list = Vec::new();
        let mut k = 0;
        for a in 0..n {
            for b in a + 1..n {
                if edges[k] {
                    list.push((a, b));
                }
                k += 1;
            }
        }
        CharGraph::new(
            (0..n as u32).map(|v| vec![v]).collect(),
            vec![1.0 / n as f64; n],
            &list,
        )
        .unwrap()
    }

    fn brute_force(g: &CharGraph) -> Vec<u64> {
        let n = g.len();
        let adj = g.masks().unwrap();
        let independent = |s: u64| (0..n).all(|v| s >> v & 1 == 0 || adj[v] & s == 0);
        let mut out: Vec<u64> = (1u64..1 << n)
            .filter(|&s| independent(s))
            .filter(|&s| (0..n).all(|v| s >> v & 1 == 1 || !independent(s | 1 << v)))
            .collect();
        out.sort_unstable();
        out
    }

    #[test]
    fn ternary_example() {
        let g = CharGraph::new(
            vec![vec![1], vec![2], vec![3]],
            vec![1.0 / 3.0; 3],
            &[(0, 2)],
        )
        .unwrap();
        let m = enumerate_mis(&g).unwrap();
        assert_eq!(m.sets(), &[vec![0, 1], vec![1, 2]]);
        assert_eq!(m.containing(1), &[0, 1]);
    }

    #[test]
    fn complete_and_empty() {
        let pmf = Pmf::uniform(5).unwrap();
        let k = enumerate_mis(&CharGraph::complete(&pmf).unwrap()).unwrap();
        assert_eq!(k.sets(), (0..5).map(|v| vec![v]).collect::<Vec<_>>());
        let e = enumerate_mis(&CharGraph::edgeless(&pmf).unwrap()).unwrap();
        assert_eq!(e.sets(), &[vec![0, 1, 2, 3, 4]]);
    }

    #[test]
    fn size_guard() {
        let g = CharGraph::edgeless(&Pmf::uniform(65).unwrap()).unwrap();
        assert!(matches!(enumerate_mis(&g), Err(Error::DeskScale { .. })));
    }

    proptest! {
        #[test]
        fn matches_brute_force(n in 1usize..=12, seed in proptest::collection::vec(any::<bool>(), 66)) {
            let g = random_graph(n, &seed);
            let mut got = enumerate_mis(&g).unwrap().masks().to_vec();
            got.sort_unstable();
            prop_assert_eq!(got, brute_force(&g));
        }

        #[test]
        fn family_invariants(n in 1usize..=12, seed in proptest::collection::vec(any::<bool>(), 66)) {
            let g = random_graph(n, &seed);
            let m = enumerate_mis(&g).unwrap();
            for s in m.sets() {
                for (i, &a) in s.iter().enumerate() {
                    for &b in &s[i + 1..] {
                        prop_assert!(!g.has_edge(a, b));
                    }
                }
            }
            for v in 0..n {
                prop_assert!(!m.containing(v).is_empty());
            }
        }
    }
}
