//! Pairing two eigenvalue lists, and grouping eigenvalues into clusters.

use serde::{Deserialize, Serialize};

use crate::C64;

/// One-to-one pairing between two lists; indices refer to the inputs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_left: Vec<usize>,
    pub unmatched_right: Vec<usize>,
    /// True when the optimal-assignment fallback was used.
    pub optimal: bool,
}

impl Matching {
    pub fn max_distance(&self) -> f64 {
        self.pairs.iter().map(|p| p.2).fold(0.0, f64::max)
    }
}

/// Largest list size for which collisions fall back to optimal assignment.
pub const OPTIMAL_FALLBACK_MAX: usize = 50;

/// Matches `left` to `right` by nearest neighbour. When two left entries
/// share a nearest neighbour and both lists have at most 50 entries, the
/// minimum-total-distance assignment is used instead; otherwise pairs are
/// taken greedily in order of distance. Ties go to the smaller real part.
pub fn match_spectra(left: &[C64], right: &[C64]) -> Matching {
    let (nl, nr) = (left.len(), right.len());
    if nl == 0 || nr == 0 {
        return Matching { pairs: vec![], unmatched_left: (0..nl).collect(), unmatched_right: (0..nr).collect(), optimal: false };
    }
    let nearest: Vec<usize> = left
        .iter()
        .map(|a| {
            (0..nr)
                .min_by(|&i, &j| {
                    (a - right[i]).norm().total_cmp(&(a - right[j]).norm()).then(right[i].re.total_cmp(&right[j].re))
                })
                .unwrap()
        })
        .collect();
    let mut seen = vec![false; nr];
    let collision = nearest.iter().any(|&j| std::mem::replace(&mut seen[j], true));
    let mut pairs: Vec<(usize, usize, f64)>;
    let mut optimal = false;
    if !collision && nl <= nr {
        pairs = nearest.iter().enumerate().map(|(i, &j)| (i, j, (left[i] - right[j]).norm())).collect();
    } else if nl.max(nr) <= OPTIMAL_FALLBACK_MAX {
        optimal = true;
        pairs = if nl <= nr {
            let cost: Vec<Vec<f64>> = left.iter().map(|a| right.iter().map(|b| (a - b).norm()).collect()).collect();
            hungarian(&cost).into_iter().enumerate().map(|(i, j)| (i, j, cost[i][j])).collect()
        } else {
            let cost: Vec<Vec<f64>> = right.iter().map(|b| left.iter().map(|a| (a - b).norm()).collect()).collect();
            hungarian(&cost).into_iter().enumerate().map(|(j, i)| (i, j, cost[j][i])).collect()
        };
    } else {
        let mut all: Vec<(usize, usize, f64)> = Vec::with_capacity(nl * nr);
        for (i, a) in left.iter().enumerate() {
            for (j, b) in right.iter().enumerate() {
                all.push((i, j, (a - b).norm()));
            }
        }
        all.sort_by(|p, q| p.2.total_cmp(&q.2).then(left[p.0].re.total_cmp(&left[q.0].re)));
        let (mut ul, mut ur) = (vec![false; nl], vec![false; nr]);
        pairs = Vec::new();
        for (i, j, d) in all {
            if !ul[i] && !ur[j] {
                ul[i] = true;
                ur[j] = true;
                pairs.push((i, j, d));
            }
        }
    }
    pairs.sort_by(|p, q| left[p.0].re.total_cmp(&left[q.0].re).then(p.0.cmp(&q.0)));
    let (mut ul, mut ur) = (vec![false; nl], vec![false; nr]);
    for &(i, j, _) in &pairs {
        ul[i] = true;
        ur[j] = true;
    }
    Matching {
        pairs,
        unmatched_left: (0..nl).filter(|&i| !ul[i]).collect(),
        unmatched_right: (0..nr).filter(|&j| !ur[j]).collect(),
        optimal,
    }
}

/// Minimum-cost assignment of every row to a distinct column (`rows <= cols`).
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return vec![];
    }
    let m = cost[0].len();
    assert!(n <= m);
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut ans = vec![0usize; n];
    for j in 1..=m {
        if p[j] != 0 {
            ans[p[j] - 1] = j - 1;
        }
    }
    ans
}

/// A maximal run of eigenvalues whose consecutive real parts differ by at most the gap.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub lo: f64,
    pub hi: f64,
    pub members: Vec<usize>,
}

/// Splits `values` into clusters wherever consecutive real parts are more
/// than `gap` apart.
pub fn cluster_by_real_part(values: &[C64], gap: f64) -> Vec<Cluster> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].re.total_cmp(&values[b].re).then(a.cmp(&b)));
    let mut out: Vec<Cluster> = Vec::new();
    for i in idx {
        let re = values[i].re;
        match out.last_mut() {
            Some(c) if re - c.hi <= gap => {
                c.hi = re;
                c.members.push(i);
            }
            _ => out.push(Cluster { lo: re, hi: re, members: vec![i] }),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn nearest_without_collision() {
        let m = match_spectra(&[r(1.0), r(2.0)], &[r(2.1), r(0.9), r(5.0)]);
        assert_eq!(m.pairs.iter().map(|p| (p.0, p.1)).collect::<Vec<_>>(), vec![(0, 1), (1, 0)]);
        assert_eq!(m.unmatched_right, vec![2]);
        assert!(!m.optimal);
    }

    #[test]
    fn collision_uses_optimal_assignment() {
        // both prefer index 0; greedy would pair 1.0 with 1.05 for a total of 1.25
        let m = match_spectra(&[r(1.0), r(1.2)], &[r(1.05), r(0.0)]);
        assert!(m.optimal);
        let total: f64 = m.pairs.iter().map(|p| p.2).sum();
        assert!((total - (1.0 + 0.15)).abs() < 1e-12, "{m:?}");
    }

    #[test]
    fn hungarian_small_brute_force() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = hungarian(&cost);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn clusters_split_on_gaps() {
        let v = [r(0.1), r(0.5), r(0.12), C64::new(0.52, -1e-9), r(2.0)];
        let c = cluster_by_real_part(&v, 0.05);
        assert_eq!(c.len(), 3);
        assert_eq!(c[0].members, vec![0, 2]);
        assert_eq!(c[1].members, vec![1, 3]);
        assert!(c.windows(2).all(|w| w[1].lo - w[0].hi > 0.05));
    }

    proptest! {
        #[test]
        fn optimal_assignment_beats_permutations(vals in proptest::collection::vec(-5.0..5.0f64, 1..6),
                                                 shifts in proptest::collection::vec(-0.5..0.5f64, 6)) {
            let left: Vec<C64> = vals.iter().map(|&x| r(x)).collect();
            let right: Vec<C64> = vals.iter().zip(&shifts).map(|(&x, &s)| C64::new(x + s, s)).rev().collect();
            let cost: Vec<Vec<f64>> = left.iter().map(|a| right.iter().map(|b| (a - b).norm()).collect()).collect();
            let best = hungarian(&cost).iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>();
            // brute force over all permutations
            let n = left.len();
            let mut perm: Vec<usize> = (0..n).collect();
            let mut brute = f64::INFINITY;
            fn heap(k: usize, p: &mut Vec<usize>, cost: &[Vec<f64>], best: &mut f64) {
                if k == 1 {
                    let s: f64 = p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
                    *best = best.min(s);
                    return;
                }
                for i in 0..k {
                    heap(k - 1, p, cost, best);
                    if k % 2 == 0 { p.swap(i, k - 1) } else { p.swap(0, k - 1) }
                }
            }
            heap(n, &mut perm, &cost, &mut brute);
            prop_assert!((best - brute).abs() < 1e-9);
        }

        #[test]
        fn matching_is_one_to_one(a in proptest::collection::vec(-3.0..3.0f64, 0..12),
                                  b in proptest::collection::vec(-3.0..3.0f64, 0..12)) {
            let l: Vec<C64> = a.iter().map(|&x| r(x)).collect();
            let rr: Vec<C64> = b.iter().map(|&x| r(x)).collect();
            let m = match_spectra(&l, &rr);
            prop_assert_eq!(m.pairs.len(), l.len().min(rr.len()));
            let mut used = std::collections::HashSet::new();
            for p in &m.pairs { prop_assert!(used.insert(p.1)); }
            prop_assert_eq!(m.pairs.len() + m.unmatched_left.len(), l.len());
            prop_assert_eq!(m.pairs.len() + m.unmatched_right.len(), rr.len());
        }
    }
}
