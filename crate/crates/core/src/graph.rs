//! Proximity graphs, hop distances and their metric scaling.

use std::collections::VecDeque;
use std::f64::consts::PI;

use rayon::prelude::*;

use crate::deploy::Deployment;
use crate::error::{Error, Result};
use crate::estimation::CumulantMatrix;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphKind {
    /// Each node selected its `k` partners with the largest cumulants.
    CumulantTopK { k: usize },
    /// Nodes closer than `radius` are joined.
    GeometricRadius { radius: f64 },
    /// Loaded from an edge list.
    EdgeList,
}

/// Undirected simple graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityGraph {
    n: usize,
    kind: GraphKind,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    /// Per-node choices before symmetrization, for top-k graphs.
    selections: Option<Vec<Vec<usize>>>,
}

impl ProximityGraph {
    /// Builds from an edge list; edges are normalized to `i < j`, sorted and
    /// deduplicated. Self-loops and out-of-range ends are errors.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>, kind: GraphKind) -> Result<Self> {
        let mut list = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::invalid(format!("self-loop at node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::invalid(format!("edge ({a}, {b}) out of range for {n} nodes")));
            }
            list.push((a.min(b), a.max(b)));
        }
        list.sort_unstable();
        list.dedup();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &list {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Ok(Self {
            n,
            kind,
            edges: list,
            adjacency,
            selections: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    /// Edges with `i < j` in lexicographic order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn selections(&self) -> Option<&[Vec<usize>]> {
        self.selections.as_deref()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].binary_search(&b).is_ok()
    }
}

/// The `k` indices with the largest scores, ties going to the smaller index.
/// `score(j)` is consulted for every `j` in `candidates`.
fn top_k(candidates: impl Iterator<Item = usize>, score: impl Fn(usize) -> f64, k: usize) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = candidates.map(|j| (score(j), j)).collect();
    let order = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if k < scored.len() {
        scored.select_nth_unstable_by(k, order);
        scored.truncate(k);
    }
    scored.sort_unstable_by(order);
    scored.into_iter().map(|(_, j)| j).collect()
}

/// Joins each node to the `k` partners with the largest cumulants (lagged
/// ones if `use_lagged`); an edge exists when either end selected the other.
pub fn build_proximity_graph(cm: &CumulantMatrix, k: usize, use_lagged: bool) -> Result<ProximityGraph> {
    if use_lagged && !cm.has_lagged() {
        return Err(Error::invalid("lagged cumulants requested but not computed"));
    }
    build_topk_graph(cm.n(), k, |i, j| {
        if use_lagged {
            cm.c2_lagged(i, j).expect("lagged present")
        } else {
            cm.c2(i, j)
        }
    })
}

/// Top-`k` graph for an arbitrary symmetric pair score, ties going to the
/// smaller index.
pub fn build_topk_graph(
    n: usize,
    k: usize,
    score: impl Fn(usize, usize) -> f64 + Sync,
) -> Result<ProximityGraph> {
    if k == 0 || k >= n {
        return Err(Error::invalid(format!(
            "k must satisfy 1 <= k < n (k = {k}, n = {n})"
        )));
    }
    let selections: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| top_k((0..n).filter(|&j| j != i), |j| score(i, j), k))
        .collect();
    let edges = selections
        .iter()
        .enumerate()
        .flat_map(|(i, sel)| sel.iter().map(move |&j| (i, j)));
    let mut g = ProximityGraph::from_edges(n, edges, GraphKind::CumulantTopK { k })?;
    g.selections = Some(selections);
    Ok(g)
}

/// Joins every pair of sensors closer than `radius`.
pub fn build_geometric_graph(d: &Deployment, radius: f64) -> Result<ProximityGraph> {
    if !(radius > 0.0) {
        return Err(Error::invalid(format!("radius must be positive, got {radius}")));
    }
    let pts = d.sensors();
    let r2 = radius * radius;
    let edges: Vec<(usize, usize)> = (0..pts.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            (i + 1..pts.len())
                .filter(move |&j| pts[i].dist_sq(pts[j]) < r2)
                .map(move |j| (i, j))
        })
        .collect();
    ProximityGraph::from_edges(pts.len(), edges, GraphKind::GeometricRadius { radius })
}

/// Connectivity radius `sqrt((ln n)^c / (π n))`.
pub fn geometric_radius(n: usize, c: f64) -> f64 {
    let nf = n as f64;
    (nf.ln().powf(c) / (PI * nf)).sqrt()
}

/// Length of one hop in a `k`-nearest-neighbor graph on `n` uniform points:
/// `sqrt(k / (π n))`.
pub fn hop_scale(n: usize, k: usize) -> f64 {
    (k as f64 / (PI * n as f64)).sqrt()
}

/// Hop counts from each source; `None` marks unreachable nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct HopDistanceTable {
    pub sources: Vec<usize>,
    pub hops: Vec<Vec<Option<u32>>>,
}

impl HopDistanceTable {
    pub fn get(&self, source_index: usize, node: usize) -> Option<u32> {
        self.hops[source_index][node]
    }
}

fn bfs(g: &ProximityGraph, source: usize) -> Vec<Option<u32>> {
    let mut dist = vec![None; g.n()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let next = dist[u].expect("queued nodes are labeled") + 1;
        for &v in g.neighbors(u) {
            if dist[v].is_none() {
                dist[v] = Some(next);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Unweighted shortest-path hop counts (breadth-first) from every source.
pub fn hop_distances(g: &ProximityGraph, sources: &[usize]) -> Result<HopDistanceTable> {
    if sources.is_empty() {
        return Err(Error::invalid("hop distances need at least one source"));
    }
    if let Some(&s) = sources.iter().find(|&&s| s >= g.n()) {
        return Err(Error::invalid(format!("source {s} out of range")));
    }
    let hops = sources.par_iter().map(|&s| bfs(g, s)).collect();
    Ok(HopDistanceTable {
        sources: sources.to_vec(),
        hops,
    })
}

/// Distance estimates `hops * sqrt(k / (π n))`; unreachable stays `None`.
pub fn scale_hops(h: &HopDistanceTable, n: usize, k: usize) -> Vec<Vec<Option<f64>>> {
    let scale = hop_scale(n, k);
    h.hops
        .iter()
        .map(|row| row.iter().map(|o| o.map(|x| x as f64 * scale)).collect())
        .collect()
}

/// True `k`-nearest neighbors of every sensor (ties to the smaller index).
pub fn true_knn(d: &Deployment, k: usize) -> Vec<Vec<usize>> {
    let pts = d.sensors();
    (0..pts.len())
        .into_par_iter()
        .map(|i| top_k((0..pts.len()).filter(|&j| j != i), |j| -pts[i].dist(pts[j]), k))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnQuality {
    /// Share of true k-NN edges present in the graph.
    pub recall: f64,
    /// Median position (1 = nearest) of chosen partners in each node's true
    /// distance order.
    pub median_rank: Option<f64>,
    pub true_edges: usize,
    pub matched_edges: usize,
}

/// Compares `g` with the symmetrized true `k`-NN graph of `d`. Partner
/// ranks use the per-node selections when `g` has them, else adjacency.
pub fn knn_quality(g: &ProximityGraph, d: &Deployment, k: usize) -> Result<KnnQuality> {
    if g.n() != d.len() {
        return Err(Error::invalid("graph and deployment sizes differ"));
    }
    if k == 0 || k >= d.len() {
        return Err(Error::invalid(format!("k must satisfy 1 <= k < n (k = {k})")));
    }
    let truth = true_knn(d, k);
    let truth_graph = ProximityGraph::from_edges(
        d.len(),
        truth.iter().enumerate().flat_map(|(i, s)| s.iter().map(move |&j| (i, j))),
        GraphKind::EdgeList,
    )?;
    let matched = truth_graph
        .edges()
        .iter()
        .filter(|&&(a, b)| g.has_edge(a, b))
        .count();

    let pts = d.sensors();
    let partners = |i: usize| -> &[usize] {
        match g.selections() {
            Some(sel) => &sel[i],
            None => g.neighbors(i),
        }
    };
    let ranks: Vec<f64> = (0..d.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            partners(i).iter().map(move |&j| {
                let dij = pts[i].dist(pts[j]);
                let closer = (0..pts.len())
                    .filter(|&m| {
                        m != i && {
                            let dm = pts[i].dist(pts[m]);
                            dm < dij || (dm == dij && m < j)
                        }
                    })
                    .count();
                (closer + 1) as f64
            })
        })
        .collect();

    let true_edges = truth_graph.edges().len();
    Ok(KnnQuality {
        recall: if true_edges == 0 { 0.0 } else { matched as f64 / true_edges as f64 },
        median_rank: stats::median(&ranks),
        true_edges,
        matched_edges: matched,
    })
}
