//! HDBSCAN* for one-dimensional data.
//!
//! Core distance to the `min_samples`-th nearest neighbor, mutual
//! reachability `max(core(a), core(b), |a-b|)`, a minimum spanning tree over
//! the full mutual-reachability graph, a single-linkage hierarchy, a tree
//! condensed at `min_cluster_size`, and excess-of-mass cluster selection
//! with stability ties broken toward the finer clusters.
//!
//! Labels are canonical: clusters are numbered by ascending minimum member
//! value, so identical inputs in any order produce identical labels.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Scalar;

pub const NOISE: i32 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HdbscanParams {
    pub min_cluster_size: usize,
    pub min_samples: usize,
}

impl HdbscanParams {
    /// `min_samples` defaults to `min_cluster_size`.
    pub fn new(min_cluster_size: usize) -> Self {
        HdbscanParams { min_cluster_size, min_samples: min_cluster_size }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    /// Cluster id per input point, `NOISE` (-1) for outliers.
    pub labels: Vec<i32>,
    pub n_clusters: usize,
    pub params: HdbscanParams,
}

impl Clustering {
    pub fn members_of(&self, cluster: i32) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == cluster)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }
}

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("{got} points but min_cluster_size is {need}")]
    TooFewPoints { got: usize, need: usize },
    #[error("min_cluster_size must be at least 2")]
    BadMinClusterSize,
    #[error("min_samples must be at least 1")]
    BadMinSamples,
    #[error("point {index} is not finite")]
    NonFinitePoint { index: usize },
}

struct MstEdge<F> {
    a: usize,
    b: usize,
    distance: F,
}

struct SltNode<F> {
    left: usize,
    right: usize,
    distance: F,
    size: usize,
}

struct CondensedNode<F> {
    id: usize,
    parent: usize,
    lambda_birth: F,
    size: usize,
}

/// Cluster 1-D points with HDBSCAN* semantics.
pub fn hdbscan_1d<F: Scalar>(
    points: &[F],
    params: HdbscanParams,
) -> Result<Clustering, ClusterError> {
    if params.min_cluster_size < 2 {
        return Err(ClusterError::BadMinClusterSize);
    }
    if params.min_samples < 1 {
        return Err(ClusterError::BadMinSamples);
    }
    let n = points.len();
    if n < params.min_cluster_size {
        return Err(ClusterError::TooFewPoints { got: n, need: params.min_cluster_size });
    }
    for (i, p) in points.iter().enumerate() {
        if !p.is_finite() {
            return Err(ClusterError::NonFinitePoint { index: i });
        }
    }

    // Work in sorted order so the result depends only on the value multiset.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        points[a].partial_cmp(&points[b]).expect("finite points").then(a.cmp(&b))
    });
    let values: Vec<F> = order.iter().map(|&i| points[i]).collect();

    let min_samples = params.min_samples.min(n - 1).max(1);
    let core = core_distances(&values, min_samples);
    let mst = prim_mst(&values, &core);
    let slt = single_linkage(&mst, n);
    let sorted_labels = extract_labels(&values, &slt, n, params.min_cluster_size);

    let mut labels = vec![NOISE; n];
    for (sorted_pos, &original) in order.iter().enumerate() {
        labels[original] = sorted_labels.0[sorted_pos];
    }
    Ok(Clustering { labels, n_clusters: sorted_labels.1, params })
}

/// Distance to the k-th nearest other point, for values sorted ascending.
fn core_distances<F: Scalar>(values: &[F], k: usize) -> Vec<F> {
    let n = values.len();
    let mut core = vec![F::zero(); n];
    for i in 0..n {
        let mut left = i;
        let mut right = i + 1;
        let mut dist = F::zero();
        for _ in 0..k {
            let left_d = if left > 0 { Some(values[i] - values[left - 1]) } else { None };
            let right_d = if right < n { Some(values[right] - values[i]) } else { None };
            dist = match (left_d, right_d) {
                (Some(l), Some(r)) if l <= r => {
                    left -= 1;
                    l
                }
                (Some(_), Some(r)) => {
                    right += 1;
                    r
                }
                (Some(l), None) => {
                    left -= 1;
                    l
                }
                (None, Some(r)) => {
                    right += 1;
                    r
                }
                (None, None) => break,
            };
        }
        core[i] = dist;
    }
    core
}

fn mutual_reachability<F: Scalar>(values: &[F], core: &[F], a: usize, b: usize) -> F {
    let d = (values[a] - values[b]).abs();
    core[a].max(core[b]).max(d)
}

/// Prim's algorithm over the implicit complete mutual-reachability graph.
fn prim_mst<F: Scalar>(values: &[F], core: &[F]) -> Vec<MstEdge<F>> {
    let n = values.len();
    let mut in_tree = vec![false; n];
    let mut best_dist = vec![F::infinity(); n];
    let mut best_from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));

    let mut current = 0usize;
    for _ in 1..n {
        in_tree[current] = true;
        let mut next = usize::MAX;
        let mut next_dist = F::infinity();
        for i in 0..n {
            if in_tree[i] {
                continue;
            }
            let mrd = mutual_reachability(values, core, current, i);
            if mrd < best_dist[i] {
                best_dist[i] = mrd;
                best_from[i] = current;
            }
            if best_dist[i] < next_dist {
                next_dist = best_dist[i];
                next = i;
            }
        }
        edges.push(MstEdge { a: best_from[next], b: next, distance: next_dist });
        current = next;
    }
    edges.sort_by(|x, y| {
        x.distance
            .partial_cmp(&y.distance)
            .expect("finite distances")
            .then(x.a.min(x.b).cmp(&y.a.min(y.b)))
            .then(x.a.max(x.b).cmp(&y.a.max(y.b)))
    });
    edges
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
    /// Latest hierarchy node id representing each set.
    root_node: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
            root_node: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Merge MST edges ascending into a dendrogram; node ids `0..n` are points,
/// `n + i` is the i-th merge.
fn single_linkage<F: Scalar>(edges: &[MstEdge<F>], n: usize) -> Vec<SltNode<F>> {
    let mut uf = UnionFind::new(n);
    let mut nodes: Vec<SltNode<F>> = Vec::with_capacity(n.saturating_sub(1));
    for edge in edges {
        let ra = uf.find(edge.a);
        let rb = uf.find(edge.b);
        debug_assert_ne!(ra, rb);
        let (left, right) = (uf.root_node[ra], uf.root_node[rb]);
        let size = uf.size[ra] + uf.size[rb];
        nodes.push(SltNode { left, right, distance: edge.distance, size });
        // Union by attaching rb under ra and renaming the set's node id.
        uf.parent[rb] = ra;
        uf.size[ra] = size;
        uf.root_node[ra] = n + nodes.len() - 1;
    }
    nodes
}

fn subtree_size<F: Scalar>(slt: &[SltNode<F>], n: usize, node: usize) -> usize {
    if node < n {
        1
    } else {
        slt[node - n].size
    }
}

/// Leaf point ids under `node` in the single-linkage tree.
fn subtree_leaves<F: Scalar>(slt: &[SltNode<F>], n: usize, node: usize) -> Vec<usize> {
    let mut queue = VecDeque::from([node]);
    let mut leaves = Vec::new();
    while let Some(id) = queue.pop_front() {
        if id < n {
            leaves.push(id);
        } else {
            let nd = &slt[id - n];
            queue.push_back(nd.left);
            queue.push_back(nd.right);
        }
    }
    leaves
}

/// Condense the hierarchy, extract clusters by excess-of-mass stability, and
/// label points in sorted order. Returns (labels, n_clusters).
fn extract_labels<F: Scalar>(
    values: &[F],
    slt: &[SltNode<F>],
    n: usize,
    min_cluster_size: usize,
) -> (Vec<i32>, usize) {
    if n == 1 {
        return (vec![0], 1);
    }

    // Finite substitute for the infinite lambda of zero-distance merges.
    let tiny = slt
        .iter()
        .map(|s| s.distance)
        .filter(|d| *d > F::zero())
        .fold(F::infinity(), |a, b| a.min(b))
        .min(F::one())
        * F::from_f64_lossy(1e-9);
    let lambda = |d: F| F::one() / d.max(tiny);

    let root_slt = n + slt.len() - 1;
    let root_cluster = n; // condensed ids: leaves 0..n, clusters n, n+1, ...
    let mut next_id = n + 1;
    let mut condensed: Vec<CondensedNode<F>> = Vec::new();

    // Queue items: (slt node, condensed cluster id it belongs to).
    let mut queue: VecDeque<(usize, usize)> = VecDeque::from([(root_slt, root_cluster)]);
    while let Some((node_id, cluster_id)) = queue.pop_front() {
        if node_id < n {
            continue;
        }
        let node = &slt[node_id - n];
        let lam = lambda(node.distance);
        let left_size = subtree_size(slt, n, node.left);
        let right_size = subtree_size(slt, n, node.right);
        let left_big = left_size >= min_cluster_size;
        let right_big = right_size >= min_cluster_size;

        match (left_big, right_big) {
            (true, true) => {
                for (child, size) in [(node.left, left_size), (node.right, right_size)] {
                    let id = next_id;
                    next_id += 1;
                    condensed.push(CondensedNode { id, parent: cluster_id, lambda_birth: lam, size });
                    queue.push_back((child, id));
                }
            }
            (false, false) => {
                for child in [node.left, node.right] {
                    for leaf in subtree_leaves(slt, n, child) {
                        condensed.push(CondensedNode {
                            id: leaf,
                            parent: cluster_id,
                            lambda_birth: lam,
                            size: 1,
                        });
                    }
                }
            }
            (true, false) | (false, true) => {
                let (big, small) = if left_big { (node.left, node.right) } else { (node.right, node.left) };
                for leaf in subtree_leaves(slt, n, small) {
                    condensed.push(CondensedNode { id: leaf, parent: cluster_id, lambda_birth: lam, size: 1 });
                }
                queue.push_back((big, cluster_id));
            }
        }
    }

    let candidate_ids: Vec<usize> = (n + 1..next_id).collect();
    if candidate_ids.is_empty() {
        // No split ever produced two viable clusters; the root is the one
        // cluster and holds every point.
        return (vec![0; n], 1);
    }

    // Birth lambda of each cluster node (root is born at lambda 0).
    let birth = |id: usize| -> F {
        if id == root_cluster {
            F::zero()
        } else {
            condensed
                .iter()
                .find(|c| c.id == id)
                .map(|c| c.lambda_birth)
                .unwrap_or_else(F::zero)
        }
    };

    // Stability: sum over children of (lambda_birth(child) - lambda_birth(C)) * size.
    let mut stability: std::collections::HashMap<usize, F> = candidate_ids
        .iter()
        .map(|&id| {
            let b = birth(id);
            let s = condensed
                .iter()
                .filter(|c| c.parent == id)
                .map(|c| (c.lambda_birth - b) * F::from_usize_lossy(c.size))
                .sum::<F>();
            (id, s)
        })
        .collect();

    let child_clusters = |id: usize| -> Vec<usize> {
        condensed
            .iter()
            .filter(|c| c.parent == id && c.id > n)
            .map(|c| c.id)
            .collect::<Vec<_>>()
    };

    let mut selected: std::collections::HashMap<usize, bool> =
        candidate_ids.iter().map(|&id| (id, false)).collect();
    for &id in candidate_ids.iter().rev() {
        let own = stability[&id];
        let child_sum: F = child_clusters(id).iter().map(|c| stability[c]).sum();
        if own > child_sum {
            selected.insert(id, true);
            // Deselect every descendant cluster.
            let mut stack = child_clusters(id);
            while let Some(d) = stack.pop() {
                selected.insert(d, false);
                stack.extend(child_clusters(d));
            }
        } else {
            stability.insert(id, child_sum);
        }
    }

    let mut winners: Vec<usize> = selected
        .iter()
        .filter(|(_, &keep)| keep)
        .map(|(&id, _)| id)
        .collect();
    if winners.is_empty() {
        return (vec![NOISE; n], 0);
    }

    // Collect member points per winner.
    let mut labels = vec![NOISE; n];
    let mut members: Vec<(usize, Vec<usize>)> = winners
        .iter()
        .map(|&w| {
            let mut pts = Vec::new();
            let mut stack = vec![w];
            while let Some(c) = stack.pop() {
                for node in condensed.iter().filter(|x| x.parent == c) {
                    if node.id < n {
                        pts.push(node.id);
                    } else {
                        stack.push(node.id);
                    }
                }
            }
            pts.sort_unstable();
            (w, pts)
        })
        .collect();

    // Canonical order: by minimum member value (= lowest sorted index).
    members.sort_by_key(|(_, pts)| pts.first().copied().unwrap_or(usize::MAX));
    winners = members.iter().map(|(w, _)| *w).collect();
    let _ = winners;
    for (cluster_idx, (_, pts)) in members.iter().enumerate() {
        for &p in pts {
            labels[p] = cluster_idx as i32;
        }
    }
    let n_clusters = members.len();
    debug_assert!(values.len() == n);
    (labels, n_clusters)
}
