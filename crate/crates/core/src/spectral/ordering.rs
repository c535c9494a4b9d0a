//! Minimum-degree fill-reducing ordering on the graph of a symmetric matrix.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::sparse::SparseSymmetric;

/// Eliminates, at every step, a node of smallest current degree in the
/// elimination graph (ties to the lower index). Returns `perm` with
/// `perm[k]` = original index eliminated k-th.
pub fn minimum_degree(a: &SparseSymmetric) -> Vec<usize> {
    let n = a.n();
    let mut adj: Vec<Vec<usize>> = (0..n).map(|i| a.row(i).0.iter().copied().filter(|&j| j != i).collect()).collect();
    let mut eliminated = vec![false; n];
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> = (0..n).map(|i| Reverse((adj[i].len(), i))).collect();
    let mut perm = Vec::with_capacity(n);
    let mut merged = Vec::new();
    while let Some(Reverse((deg, v))) = heap.pop() {
        if eliminated[v] || deg != adj[v].len() {
            continue;
        }
        eliminated[v] = true;
        perm.push(v);
        let nbrs = std::mem::take(&mut adj[v]);
        // Neighbors of v become a clique; v leaves every list.
        for &u in &nbrs {
            merged.clear();
            let (mut p, mut q) = (0, 0);
            let au = &adj[u];
            while p < au.len() || q < nbrs.len() {
                let next = match (au.get(p), nbrs.get(q)) {
                    (Some(&x), Some(&y)) if x == y => {
                        p += 1;
                        q += 1;
                        x
                    }
                    (Some(&x), Some(&y)) if x < y => {
                        p += 1;
                        x
                    }
                    (Some(_), Some(&y)) => {
                        q += 1;
                        y
                    }
                    (Some(&x), None) => {
                        p += 1;
                        x
                    }
                    (None, Some(&y)) => {
                        q += 1;
                        y
                    }
                    (None, None) => unreachable!(),
                };
                if next != u && next != v {
                    merged.push(next);
                }
            }
            let old = adj[u].len();
            adj[u].clear();
            adj[u].extend_from_slice(&merged);
            if adj[u].len() != old {
                heap.push(Reverse((adj[u].len(), u)));
            }
        }
    }
    perm
}
