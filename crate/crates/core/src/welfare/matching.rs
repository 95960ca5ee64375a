use serde::{Deserialize, Serialize};

/// A set of (agent, item) edges with its total weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// Edges sorted by agent.
    pub edges: Vec<(usize, usize)>,
    pub value: f64,
}

impl Matching {
    fn from_edges(w: &[Vec<f64>], mut edges: Vec<(usize, usize)>) -> Self {
        edges.sort_unstable();
        let value = edges.iter().map(|&(i, j)| w[i][j]).sum();
        Matching { edges, value }
    }

    /// Item matched to agent `i`.
    pub fn item_of(&self, i: usize) -> Option<usize> {
        self.edges.iter().find(|e| e.0 == i).map(|e| e.1)
    }
}

fn cols(w: &[Vec<f64>]) -> usize {
    w.first().map_or(0, |r| r.len())
}

fn tie_tol(v: f64) -> f64 {
    1e-10 * v.abs().max(1.0)
}

/// Hungarian algorithm on the zero-padded square matrix. Returns the column
/// assigned to each row; padding and zero-weight edges are dropped.
fn assign(w: &[Vec<f64>], allowed: &dyn Fn(usize, usize) -> bool) -> Vec<(usize, usize)> {
    let (n, m) = (w.len(), cols(w));
    let k = n.max(m);
    if k == 0 {
        return Vec::new();
    }
    let weight = |i: usize, j: usize| -> f64 {
        if i < n && j < m && allowed(i, j) {
            w[i][j].max(0.0)
        } else {
            0.0
        }
    };
    let top = (0..n)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| weight(i, j))
        .fold(0.0, f64::max);
    let cost = |i: usize, j: usize| top - weight(i, j);

    // 1-based potentials, e-maxx formulation.
    let mut u = vec![0.0; k + 1];
    let mut v = vec![0.0; k + 1];
    let mut p = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for i in 1..=k {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=k {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=k {
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
    (1..=k)
        .filter(|&j| p[j] >= 1)
        .map(|j| (p[j] - 1, j - 1))
        .filter(|&(i, j)| i < n && j < m && allowed(i, j) && w[i][j] > 0.0)
        .collect()
}

/// Value of a maximum-weight matching, without canonical tie-breaking.
pub fn max_weight_value(w: &[Vec<f64>]) -> f64 {
    Matching::from_edges(w, assign(w, &|_, _| true)).value
}

/// Maximum-weight matching of a non-negative `n x m` matrix.
///
/// Among maximum matchings (ties within a relative `1e-10`) the one whose
/// sorted edge list is lexicographically smallest is returned. Zero-weight
/// edges are never part of the matching.
pub fn max_weight_matching(w: &[Vec<f64>]) -> Matching {
    let (n, m) = (w.len(), cols(w));
    let best = max_weight_value(w);
    let tol = tie_tol(best);
    let mut row_of_col: Vec<Option<usize>> = vec![None; m];
    let mut fixed: Vec<Option<Option<usize>>> = vec![None; n];
    let mut acc = 0.0;
    // Row by row, fix the smallest column (or no column) that still allows
    // an optimal completion.
    for i in 0..n {
        let mut choice = None;
        for j in 0..m {
            if row_of_col[j].is_some() || !(w[i][j] > 0.0) {
                continue;
            }
            let rest = completion(w, &fixed, &row_of_col, i, Some(j));
            if acc + w[i][j] + rest >= best - tol {
                choice = Some(j);
                break;
            }
        }
        fixed[i] = Some(choice);
        if let Some(j) = choice {
            row_of_col[j] = Some(i);
            acc += w[i][j];
        }
    }
    let edges = fixed
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.flatten().map(|j| (i, j)))
        .collect();
    Matching::from_edges(w, edges)
}

/// Best value of rows after `i` once rows up to `i` are fixed (row `i` to `col`).
fn completion(
    w: &[Vec<f64>],
    fixed: &[Option<Option<usize>>],
    row_of_col: &[Option<usize>],
    i: usize,
    col: Option<usize>,
) -> f64 {
    let allowed = |r: usize, c: usize| {
        r > i && fixed[r].is_none() && row_of_col[c].is_none() && Some(c) != col
    };
    let edges = assign(w, &allowed);
    edges.iter().map(|&(r, c)| w[r][c]).sum()
}

/// Exhaustive matching search for small matrices, used as an oracle.
///
/// Enumerates matchings in lexicographic order of their sorted edge lists and
/// returns the first one within the tie tolerance of the maximum.
pub fn brute_force_matching(w: &[Vec<f64>]) -> Matching {
    fn walk(
        w: &[Vec<f64>],
        i: usize,
        used: &mut Vec<bool>,
        cur: &mut Vec<(usize, usize)>,
        out: &mut Vec<(f64, Vec<(usize, usize)>)>,
    ) {
        if i == w.len() {
            let v = cur.iter().map(|&(r, c)| w[r][c]).sum();
            out.push((v, cur.clone()));
            return;
        }
        for j in 0..used.len() {
            if used[j] || !(w[i][j] > 0.0) {
                continue;
            }
            used[j] = true;
            cur.push((i, j));
            walk(w, i + 1, used, cur, out);
            cur.pop();
            used[j] = false;
        }
        walk(w, i + 1, used, cur, out);
    }
    let mut all = Vec::new();
    walk(w, 0, &mut vec![false; cols(w)], &mut Vec::new(), &mut all);
    let best = all.iter().map(|a| a.0).fold(0.0, f64::max);
    let tol = tie_tol(best);
    let (_, edges) = all
        .into_iter()
        .find(|a| a.0 >= best - tol)
        .expect("the empty matching always exists");
    Matching::from_edges(w, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity() {
        let m = max_weight_matching(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(m.edges, vec![(0, 0), (1, 1)]);
        assert_eq!(m.value, 2.0);
    }

    #[test]
    fn shared_column() {
        let m = max_weight_matching(&[vec![2.0, 1.0], vec![2.0, 1.0]]);
        assert_eq!(m.value, 3.0);
        assert_eq!(m.edges, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn rectangular_and_empty() {
        assert_eq!(max_weight_matching(&[]).value, 0.0);
        let m = max_weight_matching(&[vec![0.0, 0.0, 0.0]]);
        assert!(m.edges.is_empty());
        let m = max_weight_matching(&[vec![1.0], vec![3.0], vec![2.0]]);
        assert_eq!(m.edges, vec![(1, 0)]);
    }

    #[test]
    fn ties_go_to_smallest_edges() {
        let w = vec![vec![1.0; 3]; 3];
        assert_eq!(max_weight_matching(&w).edges, vec![(0, 0), (1, 1), (2, 2)]);
    }

    fn matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..=6, 1usize..=6).prop_flat_map(|(n, m)| {
            proptest::collection::vec(
                proptest::collection::vec(prop_oneof![Just(0.0), Just(1.0), 0.0..10.0f64], m),
                n,
            )
        })
    }

    proptest! {
        #[test]
        fn agrees_with_brute_force(w in matrix()) {
            let fast = max_weight_matching(&w);
            let slow = brute_force_matching(&w);
            prop_assert!((fast.value - slow.value).abs() <= 1e-9);
            prop_assert_eq!(fast.edges, slow.edges);
        }

        #[test]
        fn edges_are_a_matching(w in matrix()) {
            let mm = max_weight_matching(&w);
            let mut rows: Vec<_> = mm.edges.iter().map(|e| e.0).collect();
            let mut cs: Vec<_> = mm.edges.iter().map(|e| e.1).collect();
            rows.dedup();
            cs.sort_unstable();
            cs.dedup();
            prop_assert_eq!(rows.len(), mm.edges.len());
            prop_assert_eq!(cs.len(), mm.edges.len());
            let total: f64 = mm.edges.iter().map(|&(i, j)| w[i][j]).sum();
            prop_assert!((total - mm.value).abs() <= 1e-9);
        }
    }
}
