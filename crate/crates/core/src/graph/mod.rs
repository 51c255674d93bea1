//! Undirected, unweighted connectivity graphs and hop-distance queries.

mod doubling;
mod sinr;

pub use doubling::{estimate_doubling_dimension, estimate_doubling_at, greedy_cover, verify_cover, DoublingEstimate};
pub use sinr::{build_sinr_graph, sinr, SinrParams};

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::Position;
use crate::NodeId;

/// Hop distance, `None` when the target is unreachable.
pub type Hops = Option<u32>;

/// Exact diameters are computed up to this many nodes; above it a
/// double-sweep lower bound is returned and flagged.
pub const EXACT_DIAMETER_LIMIT: usize = 5000;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConnectivityGraph {
    adj: Vec<Vec<NodeId>>,
}

impl ConnectivityGraph {
    pub fn empty(n: usize) -> Self {
        Self { adj: vec![Vec::new(); n] }
    }

    /// Build from an edge list. Self-loops are rejected, duplicates merged.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (NodeId, NodeId)>) -> Result<Self> {
        let mut adj = vec![Vec::new(); n];
        for (u, v) in edges {
            if u == v {
                return Err(Error::InvalidParameter(format!("self-loop on node {u}")));
            }
            if u as usize >= n || v as usize >= n {
                return Err(Error::InvalidParameter(format!("edge ({u}, {v}) out of range for n={n}")));
            }
            adj[u as usize].push(v);
            adj[v as usize].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { adj })
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        &self.adj[u as usize]
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.adj[u as usize].len()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.adj[u as usize].binary_search(&v).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adj.iter().enumerate().flat_map(|(u, list)| {
            list.iter()
                .filter(move |&&v| (u as NodeId) < v)
                .map(move |&v| (u as NodeId, v))
        })
    }

    /// Drop every edge for which `blocked(u, v)` holds.
    pub fn without_edges(&self, blocked: impl Fn(NodeId, NodeId) -> bool) -> Self {
        let adj = self
            .adj
            .iter()
            .enumerate()
            .map(|(u, list)| list.iter().copied().filter(|&v| !blocked(u as NodeId, v)).collect())
            .collect();
        Self { adj }
    }

    /// Symmetric and loop-free.
    pub fn is_well_formed(&self) -> bool {
        self.adj.iter().enumerate().all(|(u, list)| {
            list.windows(2).all(|w| w[0] < w[1])
                && list.iter().all(|&v| v as usize != u && self.has_edge(v, u as NodeId))
        })
    }

    /// Connected components, each sorted ascending, largest first.
    pub fn components(&self) -> Vec<Vec<NodeId>> {
        let mut seen = vec![false; self.n()];
        let mut comps = Vec::new();
        for s in 0..self.n() {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s as NodeId];
            let mut queue = VecDeque::from([s as NodeId]);
            while let Some(u) = queue.pop_front() {
                for &v in self.neighbors(u) {
                    if !seen[v as usize] {
                        seen[v as usize] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.n() <= 1 || self.components().len() == 1
    }

    /// Subgraph induced by `nodes` (relabelled `0..nodes.len()` in the given
    /// order) together with the map back to the original ids.
    pub fn induced(&self, nodes: &[NodeId]) -> (Self, Vec<NodeId>) {
        let mut relabel = vec![NodeId::MAX; self.n()];
        for (i, &u) in nodes.iter().enumerate() {
            relabel[u as usize] = i as NodeId;
        }
        let adj = nodes
            .iter()
            .map(|&u| {
                let mut list: Vec<NodeId> = self
                    .neighbors(u)
                    .iter()
                    .filter_map(|&v| (relabel[v as usize] != NodeId::MAX).then_some(relabel[v as usize]))
                    .collect();
                list.sort_unstable();
                list
            })
            .collect();
        (Self { adj }, nodes.to_vec())
    }

    /// Plain-text dump: header `n m`, then one `u v` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{} {}\n", self.n(), self.edge_count());
        for (u, v) in self.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Config("empty edge list".into()))?;
        let (n, m) = parse_pair(header)?;
        let edges = lines.map(parse_pair).collect::<Result<Vec<_>>>()?;
        if edges.len() != m as usize {
            return Err(Error::Config(format!("header declares {m} edges, found {}", edges.len())));
        }
        Self::from_edges(n as usize, edges)
    }
}

fn parse_pair(line: &str) -> Result<(NodeId, NodeId)> {
    let mut it = line.split_whitespace().map(str::parse::<NodeId>);
    match (it.next(), it.next(), it.next()) {
        (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
        _ => Err(Error::Config(format!("malformed edge-list line `{line}`"))),
    }
}

/// Edge between `u` and `v` iff their Euclidean distance is strictly below
/// `r_n`. Uses a cell list of side `r_n`, so cost is linear in the number of
/// candidate pairs.
pub fn build_geometric_graph(positions: &[Position], r_n: f64) -> Result<ConnectivityGraph> {
    if !(r_n > 0.0) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r_n}")));
    }
    let n = positions.len();
    if n == 0 {
        return Ok(ConnectivityGraph::empty(0));
    }
    let (min_x, min_y) = positions
        .iter()
        .fold((f64::INFINITY, f64::INFINITY), |(a, b), p| (a.min(p.x), b.min(p.y)));
    let (max_x, max_y) = positions
        .iter()
        .fold((f64::NEG_INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.max(p.x), b.max(p.y)));
    let cols = (((max_x - min_x) / r_n).floor() as usize + 1).max(1);
    let rows = (((max_y - min_y) / r_n).floor() as usize + 1).max(1);
    let cell_of = |p: &Position| {
        let i = (((p.x - min_x) / r_n) as usize).min(cols - 1);
        let j = (((p.y - min_y) / r_n) as usize).min(rows - 1);
        (i, j)
    };
    let mut cells: Vec<Vec<NodeId>> = vec![Vec::new(); cols * rows];
    for (u, p) in positions.iter().enumerate() {
        let (i, j) = cell_of(p);
        cells[j * cols + i].push(u as NodeId);
    }
    let r2 = r_n * r_n;
    let mut adj: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for (u, p) in positions.iter().enumerate() {
        let (i, j) = cell_of(p);
        for jj in j.saturating_sub(1)..=(j + 1).min(rows - 1) {
            for ii in i.saturating_sub(1)..=(i + 1).min(cols - 1) {
                for &v in &cells[jj * cols + ii] {
                    if v as usize == u {
                        continue;
                    }
                    let q = positions[v as usize];
                    let (dx, dy) = (p.x - q.x, p.y - q.y);
                    if dx * dx + dy * dy < r2 {
                        adj[u].push(v);
                    }
                }
            }
        }
        adj[u].sort_unstable();
    }
    Ok(ConnectivityGraph { adj })
}

/// Exact hop distances from `source`.
pub fn bfs_distances(g: &ConnectivityGraph, source: NodeId) -> Vec<Hops> {
    let mut dist: Vec<Hops> = vec![None; g.n()];
    dist[source as usize] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u as usize].unwrap_or(0);
        for &v in g.neighbors(u) {
            if dist[v as usize].is_none() {
                dist[v as usize] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Nodes within `radius` hops of `source` with their distances, in BFS order.
pub fn bfs_within(g: &ConnectivityGraph, source: NodeId, radius: u32) -> Vec<(NodeId, u32)> {
    let mut seen = vec![false; g.n()];
    seen[source as usize] = true;
    let mut order = vec![(source, 0u32)];
    let mut head = 0;
    while head < order.len() {
        let (u, du) = order[head];
        head += 1;
        if du == radius {
            continue;
        }
        for &v in g.neighbors(u) {
            if !seen[v as usize] {
                seen[v as usize] = true;
                order.push((v, du + 1));
            }
        }
    }
    order
}

/// Shortest path from `source` to `target` (inclusive), BFS with lowest-id
/// tie breaking.
pub fn shortest_path(g: &ConnectivityGraph, source: NodeId, target: NodeId) -> Option<Vec<NodeId>> {
    let mut parent = vec![NodeId::MAX; g.n()];
    parent[source as usize] = source;
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        if u == target {
            break;
        }
        for &v in g.neighbors(u) {
            if parent[v as usize] == NodeId::MAX {
                parent[v as usize] = u;
                queue.push_back(v);
            }
        }
    }
    if parent[target as usize] == NodeId::MAX {
        return None;
    }
    let mut path = vec![target];
    let mut cur = target;
    while cur != source {
        cur = parent[cur as usize];
        path.push(cur);
    }
    path.reverse();
    Some(path)
}

/// `{v : d(u, v) <= radius}`, ascending.
pub fn ball(g: &ConnectivityGraph, u: NodeId, radius: u32) -> Vec<NodeId> {
    let mut nodes: Vec<NodeId> = bfs_within(g, u, radius).into_iter().map(|(v, _)| v).collect();
    nodes.sort_unstable();
    nodes
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Diameter {
    pub hops: u32,
    /// False when the value is a double-sweep lower bound.
    pub exact: bool,
}

pub fn diameter(g: &ConnectivityGraph) -> Result<Diameter> {
    if g.n() == 0 {
        return Ok(Diameter { hops: 0, exact: true });
    }
    let eccentricity = |s: NodeId| -> Result<(NodeId, u32)> {
        let d = bfs_distances(g, s);
        let mut best = (s, 0);
        for (v, dv) in d.iter().enumerate() {
            match dv {
                None => return Err(Error::Disconnected),
                Some(h) if *h > best.1 => best = (v as NodeId, *h),
                _ => {}
            }
        }
        Ok(best)
    };
    if g.n() <= EXACT_DIAMETER_LIMIT {
        let mut hops = 0;
        for s in 0..g.n() as NodeId {
            hops = hops.max(eccentricity(s)?.1);
        }
        Ok(Diameter { hops, exact: true })
    } else {
        let (far, _) = eccentricity(0)?;
        let (_, hops) = eccentricity(far)?;
        Ok(Diameter { hops, exact: false })
    }
}

#[cfg(test)]
pub(crate) mod test_graphs {
    use super::*;

    pub fn path(m: usize) -> ConnectivityGraph {
        ConnectivityGraph::from_edges(m, (1..m as NodeId).map(|v| (v - 1, v))).unwrap()
    }

    pub fn clique(m: usize) -> ConnectivityGraph {
        let edges = (0..m as NodeId).flat_map(|u| (u + 1..m as NodeId).map(move |v| (u, v)));
        ConnectivityGraph::from_edges(m, edges).unwrap()
    }

    pub fn star(leaves: usize) -> ConnectivityGraph {
        ConnectivityGraph::from_edges(leaves + 1, (1..=leaves as NodeId).map(|v| (0, v))).unwrap()
    }

    pub fn grid(w: usize, h: usize) -> ConnectivityGraph {
        let id = |x: usize, y: usize| (y * w + x) as NodeId;
        let mut edges = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if x + 1 < w {
                    edges.push((id(x, y), id(x + 1, y)));
                }
                if y + 1 < h {
                    edges.push((id(x, y), id(x, y + 1)));
                }
            }
        }
        ConnectivityGraph::from_edges(w * h, edges).unwrap()
    }
}
