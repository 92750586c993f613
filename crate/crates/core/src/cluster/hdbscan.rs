use std::collections::{HashMap, VecDeque};

use rayon::prelude::*;

use super::HdbscanParams;
use crate::distance::{check_metric_input, knn};
use crate::embedspace::{ClusterAssignment, EmbeddingMatrix, NOISE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HdbscanResult {
    pub assignment: ClusterAssignment,
    /// Excess-of-mass stability of each selected cluster, in label order.
    pub stabilities: Vec<f64>,
}

/// One row of the condensed tree: `child` (a sample below N, else a
/// cluster id) leaves `parent` at density `lambda`.
#[derive(Debug, Clone, Copy)]
struct CondensedRow {
    parent: usize,
    child: usize,
    lambda: f64,
    size: usize,
}

/// HDBSCAN with excess-of-mass selection and a maximum cluster size.
pub fn hdbscan(x: &EmbeddingMatrix, params: &HdbscanParams) -> Result<HdbscanResult> {
    let n = x.n_samples();
    let mcs = params.min_cluster_size;
    if mcs < 2 {
        return Err(Error::Config(format!(
            "min_cluster_size must be >= 2, got {mcs}"
        )));
    }
    if n < mcs {
        return Err(Error::Degenerate(format!(
            "HDBSCAN needs at least min_cluster_size={mcs} samples, got {n}"
        )));
    }
    check_metric_input(x, params.metric)?;
    let min_samples = params.min_samples().min(n);
    // the sample itself counts as its first neighbour
    let core: Vec<f64> = if min_samples <= 1 {
        vec![0.0; n]
    } else {
        knn(x, min_samples - 1, params.metric)
            .into_iter()
            .map(|row| row.last().map_or(0.0, |p| p.1))
            .collect()
    };
    let edges = mst(x, params, &core);
    let tree = condense(n, &single_linkage(n, edges), mcs);
    let max_size = params.max_cluster_size(n);
    let (labels, stabilities) = select_eom(n, &tree, max_size);
    Ok(HdbscanResult {
        assignment: ClusterAssignment::from_labels(&labels),
        stabilities,
    })
}

/// Prim's algorithm on the dense mutual-reachability graph; edges sorted by
/// weight. Equal weights are ordered by the raw distance, so the tree does
/// not depend on the sample order.
fn mst(x: &EmbeddingMatrix, params: &HdbscanParams, core: &[f64]) -> Vec<(usize, usize, f64)> {
    let n = x.n_samples();
    let key = |a: (f64, f64), b: (f64, f64)| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1));
    let mut in_tree = vec![false; n];
    let mut best = vec![((f64::INFINITY, f64::INFINITY), usize::MAX); n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let row = x.row(current);
        let cc = core[current];
        best.par_iter_mut().enumerate().for_each(|(j, slot)| {
            if in_tree[j] {
                return;
            }
            let raw = params.metric.distance(row, x.row(j));
            let w = (raw.max(cc).max(core[j]), raw);
            if key(w, slot.0).is_lt() {
                *slot = (w, current);
            }
        });
        let mut next = usize::MAX;
        for j in 0..n {
            if !in_tree[j] && (next == usize::MAX || key(best[j].0, best[next].0).is_lt()) {
                next = j;
            }
        }
        edges.push((best[next].1, next, best[next].0));
        in_tree[next] = true;
        current = next;
    }
    edges.sort_by(|p, q| key(p.2, q.2));
    edges.into_iter().map(|(a, b, w)| (a, b, w.0)).collect()
}

/// Single-linkage hierarchy in linkage-matrix form: `(left, right, height,
/// size)` with new cluster ids starting at N.
fn single_linkage(n: usize, edges: Vec<(usize, usize, f64)>) -> Vec<(usize, usize, f64, usize)> {
    let mut parent: Vec<usize> = (0..2 * n).collect();
    let mut size = vec![1usize; 2 * n];
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    edges
        .into_iter()
        .enumerate()
        .map(|(step, (a, b, d))| {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            let id = n + step;
            parent[ra] = id;
            parent[rb] = id;
            size[id] = size[ra] + size[rb];
            (ra, rb, d, size[id])
        })
        .collect()
}

/// Leaves below `node` of the single-linkage hierarchy.
fn leaves(n: usize, hierarchy: &[(usize, usize, f64, usize)], node: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack = vec![node];
    while let Some(v) = stack.pop() {
        if v < n {
            out.push(v);
        } else {
            let (l, r, _, _) = hierarchy[v - n];
            stack.push(r);
            stack.push(l);
        }
    }
    out
}

/// Condenses the hierarchy: splits where both sides have at least
/// `mcs` samples create new clusters; smaller sides fall out as points.
fn condense(n: usize, hierarchy: &[(usize, usize, f64, usize)], mcs: usize) -> Vec<CondensedRow> {
    let size_of = |v: usize| if v < n { 1 } else { hierarchy[v - n].3 };
    let root = 2 * n - 2;
    let mut label = HashMap::new();
    label.insert(root, n);
    let mut next_label = n + 1;
    let mut rows = Vec::new();
    let mut queue = VecDeque::from([root]);
    if n == 1 {
        rows.push(CondensedRow {
            parent: n,
            child: 0,
            lambda: f64::INFINITY,
            size: 1,
        });
        return rows;
    }
    while let Some(node) = queue.pop_front() {
        if node < n {
            continue;
        }
        let (l, r, d, _) = hierarchy[node - n];
        let lambda = if d > 0.0 { 1.0 / d } else { f64::INFINITY };
        let here = label[&node];
        let (ls, rs) = (size_of(l), size_of(r));
        let fall_out = |side: usize, rows: &mut Vec<CondensedRow>| {
            for p in leaves(n, hierarchy, side) {
                rows.push(CondensedRow {
                    parent: here,
                    child: p,
                    lambda,
                    size: 1,
                });
            }
        };
        match (ls >= mcs, rs >= mcs) {
            (true, true) => {
                for (side, sz) in [(l, ls), (r, rs)] {
                    label.insert(side, next_label);
                    rows.push(CondensedRow {
                        parent: here,
                        child: next_label,
                        lambda,
                        size: sz,
                    });
                    next_label += 1;
                    queue.push_back(side);
                }
            }
            (false, false) => {
                fall_out(l, &mut rows);
                fall_out(r, &mut rows);
            }
            (true, false) => {
                label.insert(l, here);
                fall_out(r, &mut rows);
                queue.push_back(l);
            }
            (false, true) => {
                label.insert(r, here);
                fall_out(l, &mut rows);
                queue.push_back(r);
            }
        }
    }
    rows
}

fn lambda_gap(lambda: f64, birth: f64) -> f64 {
    if lambda == birth {
        0.0
    } else {
        lambda - birth
    }
}

/// Excess-of-mass selection without the root; clusters larger than
/// `max_size` are never selected. Returns per-sample labels (noise -1) and
/// the selected stabilities in label order.
fn select_eom(n: usize, tree: &[CondensedRow], max_size: usize) -> (Vec<i64>, Vec<f64>) {
    let root = n;
    let mut birth: HashMap<usize, f64> = HashMap::from([(root, 0.0)]);
    let mut size: HashMap<usize, usize> = HashMap::from([(root, n)]);
    let mut children: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut parent_of = vec![usize::MAX; n];
    let mut cluster_parent: HashMap<usize, usize> = HashMap::new();
    for row in tree {
        if row.child >= n {
            birth.insert(row.child, row.lambda);
            size.insert(row.child, row.size);
            children.entry(row.parent).or_default().push(row.child);
            cluster_parent.insert(row.child, row.parent);
        } else {
            parent_of[row.child] = row.parent;
        }
    }
    let mut stability: HashMap<usize, f64> = birth.keys().map(|&c| (c, 0.0)).collect();
    for row in tree {
        let b = birth[&row.parent];
        *stability.get_mut(&row.parent).expect("known cluster") +=
            lambda_gap(row.lambda, b) * row.size as f64;
    }
    let mut nodes: Vec<usize> = stability.keys().copied().filter(|&c| c != root).collect();
    nodes.sort_unstable_by(|a, b| b.cmp(a));
    let mut selected: HashMap<usize, bool> = nodes.iter().map(|&c| (c, true)).collect();
    let mut subtree_best = stability.clone();
    for &node in &nodes {
        let child_total: f64 = children
            .get(&node)
            .map_or(0.0, |cs| cs.iter().map(|c| subtree_best[c]).sum());
        if child_total > stability[&node] || size[&node] > max_size {
            selected.insert(node, false);
            subtree_best.insert(node, child_total);
        } else {
            let mut stack: Vec<usize> = children.get(&node).cloned().unwrap_or_default();
            while let Some(c) = stack.pop() {
                selected.insert(c, false);
                if let Some(cs) = children.get(&c) {
                    stack.extend(cs);
                }
            }
        }
    }
    let mut chosen: Vec<usize> = nodes.iter().copied().filter(|c| selected[c]).collect();
    chosen.sort_unstable();
    let index: HashMap<usize, i64> = chosen
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, i as i64))
        .collect();
    let labels = (0..n)
        .map(|p| {
            let mut c = parent_of[p];
            while c != root {
                if let Some(&l) = index.get(&c) {
                    return l;
                }
                c = cluster_parent[&c];
            }
            NOISE
        })
        .collect();
    let stabilities = chosen.iter().map(|c| stability[c]).collect();
    (labels, stabilities)
}
