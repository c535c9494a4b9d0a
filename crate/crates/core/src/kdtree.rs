//! Static kd-tree over row-major points, used for radius and k-nearest queries.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const LEAF_SIZE: usize = 16;

enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

pub(crate) struct KdTree<'a> {
    pts: &'a [f64],
    d: usize,
    perm: Vec<usize>,
    nodes: Vec<Node>,
}

/// Heap entry ordered by (squared distance, index) so ties resolve to the lower index.
#[derive(Clone, Copy)]
struct Cand {
    d2: f64,
    idx: usize,
}

impl PartialEq for Cand {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Cand {}
impl PartialOrd for Cand {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Cand {
    fn cmp(&self, o: &Self) -> Ordering {
        self.d2.total_cmp(&o.d2).then(self.idx.cmp(&o.idx))
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl<'a> KdTree<'a> {
    pub fn build(pts: &'a [f64], d: usize) -> Self {
        let n = pts.len() / d;
        let mut tree = KdTree { pts, d, perm: (0..n).collect(), nodes: Vec::new() };
        if n > 0 {
            tree.build_node(0, n);
        }
        tree
    }

    fn coord(&self, i: usize, k: usize) -> f64 {
        self.pts[i * self.d + k]
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut best = (0, -1.0);
        for k in 0..self.d {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.perm[start..end] {
                let c = self.coord(i, k);
                lo = lo.min(c);
                hi = hi.max(c);
            }
            if hi - lo > best.1 {
                best = (k, hi - lo);
            }
        }
        let dim = best.0;
        let mid = start + (end - start) / 2;
        let (pts, d) = (self.pts, self.d);
        self.perm[start..end]
            .select_nth_unstable_by(mid - start, |&a, &b| pts[a * d + dim].total_cmp(&pts[b * d + dim]));
        let value = self.coord(self.perm[mid], dim);
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split { dim, value, left, right };
        id
    }

    /// All points j with |q - x_j| < h, as (index, distance).
    pub fn within(&self, q: &[f64], h: f64, out: &mut Vec<(usize, f64)>) {
        if !self.nodes.is_empty() {
            self.within_node(0, q, h, out);
        }
    }

    fn within_node(&self, node: usize, q: &[f64], h: f64, out: &mut Vec<(usize, f64)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &j in &self.perm[start..end] {
                    let dist = sq_dist(q, &self.pts[j * self.d..(j + 1) * self.d]).sqrt();
                    if dist < h {
                        out.push((j, dist));
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                if diff <= h {
                    self.within_node(left, q, h, out);
                }
                if diff >= -h {
                    self.within_node(right, q, h, out);
                }
            }
        }
    }

    /// The k nearest points to `q` other than `skip`, sorted by (distance, index).
    pub fn nearest(&self, q: &[f64], k: usize, skip: Option<usize>) -> Vec<(usize, f64)> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 && !self.nodes.is_empty() {
            self.nearest_node(0, q, k, skip, &mut heap);
        }
        heap.into_sorted_vec().into_iter().map(|c| (c.idx, c.d2.sqrt())).collect()
    }

    fn nearest_node(&self, node: usize, q: &[f64], k: usize, skip: Option<usize>, heap: &mut BinaryHeap<Cand>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &j in &self.perm[start..end] {
                    if Some(j) == skip {
                        continue;
                    }
                    let c = Cand { d2: sq_dist(q, &self.pts[j * self.d..(j + 1) * self.d]), idx: j };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split { dim, value, left, right } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.nearest_node(near, q, k, skip, heap);
                if heap.len() < k || diff * diff <= heap.peek().unwrap().d2 {
                    self.nearest_node(far, q, k, skip, heap);
                }
            }
        }
    }
}
