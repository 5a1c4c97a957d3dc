//! Density-based clustering: mutual-reachability MST, condensed cluster
//! tree, and excess-of-mass cluster extraction. Components smaller than
//! `min_cluster_size` fall out as outliers.

use crate::error::{Error, Result};

use super::{ClusterAssignment, ClusterParams};

pub const DEFAULT_MIN_CLUSTER_SIZE: usize = 5;
pub const DEFAULT_MIN_SAMPLES: usize = 5;

/// Density beyond which points are treated as never separating (distance 0).
const LAMBDA_CAP: f64 = 1e12;
const ZERO_DISTANCE: f64 = 1e-12;

fn lambda(distance: f64) -> f64 {
    if distance <= ZERO_DISTANCE {
        LAMBDA_CAP
    } else {
        1.0 / distance
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Distance to the `min_samples`-th nearest neighbor (excluding self),
/// clamped to the farthest neighbor for tiny inputs.
fn core_distances(points: &[Vec<f64>], min_samples: usize) -> Vec<f64> {
    let n = points.len();
    let k = min_samples.min(n.saturating_sub(1)).max(1);
    (0..n)
        .map(|i| {
            let mut dists: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| euclidean(&points[i], &points[j]))
                .collect();
            if dists.is_empty() {
                return 0.0;
            }
            dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
            dists[k - 1]
        })
        .collect()
}

struct MstEdge {
    a: usize,
    b: usize,
    weight: f64,
}

/// Prim's MST over the complete mutual-reachability graph.
fn mutual_reachability_mst(points: &[Vec<f64>], core: &[f64]) -> Vec<MstEdge> {
    let n = points.len();
    let mut in_tree = vec![false; n];
    let mut best_dist = vec![f64::INFINITY; n];
    let mut best_from = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));

    let mut current = 0usize;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        let mut next_dist = f64::INFINITY;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let d = euclidean(&points[current], &points[j])
                .max(core[current])
                .max(core[j]);
            if d < best_dist[j] {
                best_dist[j] = d;
                best_from[j] = current;
            }
            if best_dist[j] < next_dist {
                next_dist = best_dist[j];
                next = j;
            }
        }
        edges.push(MstEdge {
            a: best_from[next],
            b: next,
            weight: next_dist,
        });
        in_tree[next] = true;
        current = next;
    }
    edges
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
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

/// Binary merge-tree node. Leaves are points 0..n-1; internal nodes get ids
/// n..2n-2 in merge order (ascending weight).
struct MergeNode {
    left: usize,
    right: usize,
    weight: f64,
    size: usize,
}

struct CondensedCluster {
    birth_lambda: f64,
    /// (point, leave lambda) noise fall-outs.
    points_out: Vec<(usize, f64)>,
    /// (child cluster id, child size, split lambda).
    children: Vec<(usize, usize, f64)>,
}

/// Clusters the points. Returns labels with -1 for outliers.
pub fn density_cluster(
    points: &[Vec<f64>],
    min_cluster_size: usize,
    min_samples: usize,
) -> Result<ClusterAssignment> {
    let n = points.len();
    if min_cluster_size < 1 {
        return Err(Error::argument("min_cluster_size must be >= 1"));
    }
    if n < min_cluster_size {
        return Err(Error::argument(format!(
            "need at least min_cluster_size={min_cluster_size} points, got {n}"
        )));
    }

    let params = ClusterParams::Density {
        min_cluster_size,
        min_samples,
    };

    let core = core_distances(points, min_samples);
    let mut edges = mutual_reachability_mst(points, &core);
    edges.sort_by(|a, b| a.weight.partial_cmp(&b.weight).unwrap());
    let max_weight = edges.last().map(|e| e.weight).unwrap_or(0.0);

    // All mutual-reachability distances are zero: one cluster of everything.
    if max_weight <= ZERO_DISTANCE {
        return Ok(finish(points, vec![0i64; n], 1, params));
    }

    // Merge tree by ascending edge weight. A component's union-find root is
    // its current tree node id (leaf id or latest merge node).
    let mut nodes: Vec<MergeNode> = Vec::with_capacity(n.saturating_sub(1));
    let mut uf = UnionFind::new(2 * n - 1);
    for (i, e) in edges.iter().enumerate() {
        let left = uf.find(e.a);
        let right = uf.find(e.b);
        let size = subtree_size(&nodes, left, n) + subtree_size(&nodes, right, n);
        let node_id = n + i;
        nodes.push(MergeNode {
            left,
            right,
            weight: e.weight,
            size,
        });
        uf.parent[left] = node_id;
        uf.parent[right] = node_id;
    }
    let root = 2 * n - 2;

    // Condense the hierarchy.
    let mut clusters: Vec<CondensedCluster> = vec![CondensedCluster {
        birth_lambda: 0.0,
        points_out: Vec::new(),
        children: Vec::new(),
    }];
    let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
    while let Some((node_id, cid)) = stack.pop() {
        if node_id < n {
            // lone point persisting at infinite density
            clusters[cid].points_out.push((node_id, LAMBDA_CAP));
            continue;
        }
        let node = &nodes[node_id - n];
        let lam = lambda(node.weight);
        let (left, right) = (node.left, node.right);
        let size_l = subtree_size(&nodes, left, n);
        let size_r = subtree_size(&nodes, right, n);
        let big_l = size_l >= min_cluster_size;
        let big_r = size_r >= min_cluster_size;
        match (big_l, big_r) {
            (true, true) => {
                for &(child, child_size) in &[(left, size_l), (right, size_r)] {
                    let new_cid = clusters.len();
                    clusters.push(CondensedCluster {
                        birth_lambda: lam,
                        points_out: Vec::new(),
                        children: Vec::new(),
                    });
                    clusters[cid].children.push((new_cid, child_size, lam));
                    stack.push((child, new_cid));
                }
            }
            (true, false) => {
                drop_points(&nodes, right, n, lam, &mut clusters[cid].points_out);
                stack.push((left, cid));
            }
            (false, true) => {
                drop_points(&nodes, left, n, lam, &mut clusters[cid].points_out);
                stack.push((right, cid));
            }
            (false, false) => {
                drop_points(&nodes, left, n, lam, &mut clusters[cid].points_out);
                drop_points(&nodes, right, n, lam, &mut clusters[cid].points_out);
            }
        }
    }

    // Excess-of-mass selection, bottom-up; the root is never a candidate.
    let num_clusters = clusters.len();
    let mut stability = vec![0.0; num_clusters];
    for (c, cluster) in clusters.iter().enumerate() {
        let mut s = 0.0;
        for &(_, lam) in &cluster.points_out {
            s += lam - cluster.birth_lambda;
        }
        for &(_, child_size, split_lam) in &cluster.children {
            s += child_size as f64 * (split_lam - cluster.birth_lambda);
        }
        stability[c] = s;
    }
    let mut selected_stability = vec![0.0; num_clusters];
    let mut selection: Vec<Vec<usize>> = vec![Vec::new(); num_clusters];
    for c in (1..num_clusters).rev() {
        let child_sum: f64 = clusters[c]
            .children
            .iter()
            .map(|&(child, _, _)| selected_stability[child])
            .sum();
        if stability[c] >= child_sum || clusters[c].children.is_empty() {
            selected_stability[c] = stability[c];
            selection[c] = vec![c];
        } else {
            selected_stability[c] = child_sum;
            let merged: Vec<usize> = clusters[c]
                .children
                .iter()
                .flat_map(|&(child, _, _)| selection[child].clone())
                .collect();
            selection[c] = merged;
        }
    }
    let selected: Vec<usize> = clusters[0]
        .children
        .iter()
        .flat_map(|&(child, _, _)| selection[child].clone())
        .collect();

    // Map each point's leave event to its selected ancestor, if any.
    let mut parent_of = vec![usize::MAX; num_clusters];
    for (c, cluster) in clusters.iter().enumerate() {
        for &(child, _, _) in &cluster.children {
            parent_of[child] = c;
        }
    }
    let is_selected = {
        let mut v = vec![false; num_clusters];
        for &c in &selected {
            v[c] = true;
        }
        v
    };
    let owner = |mut c: usize| -> Option<usize> {
        loop {
            if is_selected[c] {
                return Some(c);
            }
            if c == 0 {
                return None;
            }
            c = parent_of[c];
        }
    };

    let mut cluster_points: Vec<(usize, Vec<usize>)> =
        selected.iter().map(|&c| (c, Vec::new())).collect();
    let mut labels = vec![-1i64; n];
    for (c, cluster) in clusters.iter().enumerate() {
        if let Some(sel) = owner(c) {
            let slot = cluster_points.iter_mut().find(|(id, _)| *id == sel).unwrap();
            for &(p, _) in &cluster.points_out {
                slot.1.push(p);
            }
        }
    }
    // Stable labels: clusters ordered by their smallest member.
    cluster_points.retain(|(_, pts)| !pts.is_empty());
    cluster_points.sort_by_key(|(_, pts)| *pts.iter().min().unwrap());
    for (label, (_, pts)) in cluster_points.iter().enumerate() {
        for &p in pts {
            labels[p] = label as i64;
        }
    }
    let count = cluster_points.len();
    Ok(finish(points, labels, count, params))
}

fn subtree_size(nodes: &[MergeNode], id: usize, n: usize) -> usize {
    if id < n {
        1
    } else {
        nodes[id - n].size
    }
}

/// Collects every leaf under `id` as a noise fall-out at `lam`.
fn drop_points(
    nodes: &[MergeNode],
    id: usize,
    n: usize,
    lam: f64,
    out: &mut Vec<(usize, f64)>,
) {
    let mut stack = vec![id];
    while let Some(x) = stack.pop() {
        if x < n {
            out.push((x, lam));
        } else {
            stack.push(nodes[x - n].left);
            stack.push(nodes[x - n].right);
        }
    }
}

fn finish(
    points: &[Vec<f64>],
    labels: Vec<i64>,
    num_clusters: usize,
    params: ClusterParams,
) -> ClusterAssignment {
    let dim = points.first().map(|p| p.len()).unwrap_or(0);
    let mut sums = vec![vec![0.0; dim]; num_clusters];
    let mut counts = vec![0usize; num_clusters];
    for (p, &l) in points.iter().zip(&labels) {
        if l >= 0 {
            counts[l as usize] += 1;
            for (j, v) in p.iter().enumerate() {
                sums[l as usize][j] += v;
            }
        }
    }
    for (c, sum) in sums.iter_mut().enumerate() {
        if counts[c] > 0 {
            for v in sum.iter_mut() {
                *v /= counts[c] as f64;
            }
        }
    }
    ClusterAssignment {
        labels,
        num_clusters,
        centroids: sums,
        params,
        inertia: None,
        inertia_history: Vec::new(),
    }
}
