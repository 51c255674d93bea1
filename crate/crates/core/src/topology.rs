//! Adversarial and inhomogeneous placements: a wall with a gap, emptied
//! squarelets and their holes, the comb unit-disk graph, and radii below the
//! connectivity threshold.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::geometry::{sample_uniform_positions, squarelet_of, DomainSpec, OccupancyReport, Position, SquareletGrid};
use crate::graph::{build_geometric_graph, ConnectivityGraph, Hops};
use crate::NodeId;

/// A horizontal band `[x_start, x_end] x [y_low, y_high]` that blocks
/// links, except through the listed gap intervals in x.
#[derive(Debug, Clone, PartialEq)]
pub struct WallSegment {
    pub x_start: f64,
    pub x_end: f64,
    pub y_low: f64,
    pub y_high: f64,
    pub gaps: Vec<(f64, f64)>,
}

impl WallSegment {
    pub fn contains(&self, p: Position) -> bool {
        p.x >= self.x_start && p.x <= self.x_end && p.y >= self.y_low && p.y <= self.y_high
    }

    /// True iff the segment `a-b` passes through the band anywhere outside a
    /// single gap. A segment that runs through the band stays inside one gap
    /// for its whole traversal or it hits the wall.
    pub fn blocks(&self, a: Position, b: Position) -> bool {
        let Some((t0, t1)) = clip(a, b, self.x_start, self.x_end, self.y_low, self.y_high) else {
            return false;
        };
        let x0 = a.x + t0 * (b.x - a.x);
        let x1 = a.x + t1 * (b.x - a.x);
        let (lo, hi) = (x0.min(x1), x0.max(x1));
        !self.gaps.iter().any(|&(g0, g1)| lo >= g0 && hi <= g1)
    }
}

/// Liang-Barsky: parameter range of `a + t (b - a)`, `t` in `[0, 1]`, inside
/// the closed rectangle.
fn clip(a: Position, b: Position, x0: f64, x1: f64, y0: f64, y1: f64) -> Option<(f64, f64)> {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let mut lo: f64 = 0.0;
    let mut hi: f64 = 1.0;
    for (p, q) in [(-dx, a.x - x0), (dx, x1 - a.x), (-dy, a.y - y0), (dy, y1 - a.y)] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let t = q / p;
            if p < 0.0 {
                lo = lo.max(t);
            } else {
                hi = hi.min(t);
            }
        }
    }
    (lo <= hi).then_some((lo, hi))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Obstruction {
    pub segments: Vec<WallSegment>,
}

impl Obstruction {
    pub fn edge_blocked(&self, a: Position, b: Position) -> bool {
        self.segments.iter().any(|s| s.blocks(a, b))
    }

    pub fn inside(&self, p: Position) -> bool {
        self.segments.iter().any(|s| s.contains(p))
    }

    /// Geometric graph over `positions` with blocked links removed.
    pub fn build_graph(&self, positions: &[Position], r_n: f64) -> Result<ConnectivityGraph> {
        let g = build_geometric_graph(positions, r_n)?;
        Ok(g.without_edges(|u, v| self.edge_blocked(positions[u as usize], positions[v as usize])))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WallTopology {
    pub positions: Vec<Position>,
    pub obstruction: Obstruction,
    /// Number of sampled nodes dropped because they fell inside the wall.
    pub removed: usize,
}

impl WallTopology {
    pub fn build_graph(&self, r_n: f64) -> Result<ConnectivityGraph> {
        self.obstruction.build_graph(&self.positions, r_n)
    }

    /// Which side of the wall a node is on: false below, true above.
    pub fn above(&self, u: NodeId) -> bool {
        let mid = self.obstruction.segments.first().map_or(0.0, |s| (s.y_low + s.y_high) / 2.0);
        self.positions[u as usize].y > mid
    }
}

/// `n` uniform nodes with a full-width horizontal wall of width `r_n / c`
/// through the middle of the domain and one gap of `gap_width` at its
/// center. Nodes sampled inside the wall are dropped.
pub fn wall_topology(n: usize, r_n: f64, c: f64, gap_width: f64, seed: u64) -> Result<WallTopology> {
    if !(r_n > (n as f64).ln().sqrt()) {
        return Err(Error::InvalidParameter(format!(
            "wall topology needs r_n above sqrt(ln n), got {r_n}"
        )));
    }
    let domain = DomainSpec::for_nodes(n, crate::geometry::BoundaryMode::Reflect)?;
    let side = domain.side;
    let width = r_n / c;
    let mid = side / 2.0;
    let wall = WallSegment {
        x_start: 0.0,
        x_end: side,
        y_low: mid - width / 2.0,
        y_high: mid + width / 2.0,
        gaps: vec![(mid - gap_width / 2.0, mid + gap_width / 2.0)],
    };
    let obstruction = Obstruction { segments: vec![wall] };
    let sampled = sample_uniform_positions(n, &domain, seed);
    let positions: Vec<Position> = sampled.iter().copied().filter(|&p| !obstruction.inside(p)).collect();
    Ok(WallTopology {
        removed: n - positions.len(),
        positions,
        obstruction,
    })
}

/// Drop every node lying in one of `cells`. Returns the survivors and their
/// original ids.
pub fn remove_squarelets(
    positions: &[Position],
    grid: &SquareletGrid,
    domain: &DomainSpec,
    cells: &[(usize, usize)],
) -> Result<(Vec<Position>, Vec<NodeId>)> {
    let cps = grid.cells_per_side;
    if let Some(&(i, j)) = cells.iter().find(|&&(i, j)| i >= cps || j >= cps) {
        return Err(Error::InvalidParameter(format!("cell ({i}, {j}) outside a {cps}x{cps} grid")));
    }
    let mut drop = vec![false; grid.cell_count()];
    for &(i, j) in cells {
        drop[grid.index(i, j)] = true;
    }
    let mut kept = Vec::new();
    let mut ids = Vec::new();
    for (u, &p) in positions.iter().enumerate() {
        let (i, j) = squarelet_of(p, grid, domain)?;
        if !drop[grid.index(i, j)] {
            kept.push(p);
            ids.push(u as NodeId);
        }
    }
    Ok((kept, ids))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hole {
    /// Empty cells `(i, j)` of the hole, ascending by row-major index.
    pub cells: Vec<(usize, usize)>,
    /// Twice the largest grid distance between border cells; `None` when two
    /// border cells are disconnected without the hole.
    pub perimeter: Hops,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoleReport {
    pub holes: Vec<Hole>,
    /// `None` when some perimeter is infinite.
    pub p_max: Hops,
    /// `p_max^2`, 1 when there are no holes, infinite when `p_max` is.
    pub doubling_bound: f64,
}

/// Find the topological holes of an occupancy map.
///
/// The grid graph joins 4-adjacent non-empty cells. Empty cells are grouped
/// into 8-connected components; a component is a hole iff adding its cells
/// to the grid graph shortens the distance between two non-empty cells.
/// Any shortened pair implies a shortened pair of border cells (non-empty
/// cells 4-adjacent to the component), so only those are compared.
pub fn hole_report(occ: &OccupancyReport) -> HoleReport {
    let cps = occ.cells_per_side;
    let occupied: Vec<bool> = occ.counts.iter().map(|&c| c > 0).collect();
    let mut holes = Vec::new();
    for comp in empty_components(&occupied, cps) {
        let mut in_comp = vec![false; occupied.len()];
        for &c in &comp {
            in_comp[c] = true;
        }
        let border: BTreeSet<usize> = comp
            .iter()
            .flat_map(|&c| neighbors4(c, cps))
            .filter(|&b| occupied[b])
            .collect();
        let filled: Vec<bool> = (0..occupied.len()).map(|c| occupied[c] || in_comp[c]).collect();
        let mut shortened = false;
        let mut perimeter_half: Option<u32> = Some(0);
        for &b in &border {
            let before = grid_bfs(&occupied, cps, b);
            let after = grid_bfs(&filled, cps, b);
            for &other in &border {
                match (before[other], after[other]) {
                    (Some(x), Some(y)) => {
                        shortened |= y < x;
                        perimeter_half = perimeter_half.map(|m| m.max(x));
                    }
                    (None, Some(_)) => {
                        shortened = true;
                        perimeter_half = None;
                    }
                    (_, None) => perimeter_half = None,
                }
            }
        }
        if shortened {
            holes.push(Hole {
                cells: comp.iter().map(|&c| (c % cps, c / cps)).collect(),
                perimeter: perimeter_half.map(|h| 2 * h),
            });
        }
    }
    let p_max = holes
        .iter()
        .try_fold(0u32, |acc, h| h.perimeter.map(|p| acc.max(p)));
    let doubling_bound = match (holes.is_empty(), p_max) {
        (true, _) => 1.0,
        (false, Some(p)) => (p as f64).powi(2),
        (false, None) => f64::INFINITY,
    };
    HoleReport {
        holes,
        p_max,
        doubling_bound,
    }
}

fn neighbors4(c: usize, cps: usize) -> impl Iterator<Item = usize> {
    let (i, j) = ((c % cps) as i64, (c / cps) as i64);
    [(1, 0), (-1, 0), (0, 1), (0, -1)].into_iter().filter_map(move |(di, dj)| {
        let (a, b) = (i + di, j + dj);
        (a >= 0 && b >= 0 && a < cps as i64 && b < cps as i64).then(|| b as usize * cps + a as usize)
    })
}

fn empty_components(occupied: &[bool], cps: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; occupied.len()];
    let mut comps = Vec::new();
    for s in 0..occupied.len() {
        if occupied[s] || seen[s] {
            continue;
        }
        seen[s] = true;
        let mut comp = vec![s];
        let mut queue = VecDeque::from([s]);
        while let Some(c) = queue.pop_front() {
            let (i, j) = ((c % cps) as i64, (c / cps) as i64);
            for dj in -1..=1i64 {
                for di in -1..=1i64 {
                    let (a, b) = (i + di, j + dj);
                    if a < 0 || b < 0 || a >= cps as i64 || b >= cps as i64 {
                        continue;
                    }
                    let d = b as usize * cps + a as usize;
                    if !occupied[d] && !seen[d] {
                        seen[d] = true;
                        comp.push(d);
                        queue.push_back(d);
                    }
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

fn grid_bfs(open: &[bool], cps: usize, source: usize) -> Vec<Hops> {
    let mut dist: Vec<Hops> = vec![None; open.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(c) = queue.pop_front() {
        let dc = dist[c].unwrap_or(0);
        for d in neighbors4(c, cps) {
            if open[d] && dist[d].is_none() {
                dist[d] = Some(dc + 1);
                queue.push_back(d);
            }
        }
    }
    dist
}

/// Node spacing along the comb; adjacent columns are linked, columns two
/// apart are not.
pub const COMB_SPACING: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub struct Comb {
    pub positions: Vec<Position>,
    pub graph: ConnectivityGraph,
    /// Node at the middle of the spine.
    pub center: NodeId,
    /// Spine node at the base of each branch, with the branch's nodes
    /// ordered outward (upper and lower arms listed separately).
    pub branches: Vec<(NodeId, Vec<NodeId>)>,
}

/// Unit-disk comb: a spine of `4R + 1` nodes with a vertical arm of `2R`
/// nodes going up and another going down from every second spine node.
pub fn comb_udg(r: u32) -> Result<Comb> {
    if r < 4 || !r.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("comb needs even R >= 4, got {r}")));
    }
    let spine = 4 * r as usize + 1;
    let arm = 2 * r as usize;
    let mut positions: Vec<Position> = (0..spine).map(|i| Position::new(i as f64 * COMB_SPACING, 0.0)).collect();
    let mut branches = Vec::new();
    for i in (0..spine).step_by(2) {
        for sign in [1.0, -1.0] {
            let nodes: Vec<NodeId> = (1..=arm)
                .map(|k| {
                    positions.push(Position::new(i as f64 * COMB_SPACING, sign * k as f64 * COMB_SPACING));
                    (positions.len() - 1) as NodeId
                })
                .collect();
            branches.push((i as NodeId, nodes));
        }
    }
    let graph = build_geometric_graph(&positions, 1.0)?;
    Ok(Comb {
        positions,
        graph,
        center: 2 * r,
        branches,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Natural,
    Binary,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Binary => x.log2(),
        }
    }
}

impl std::str::FromStr for LogBase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "e" | "natural" => Ok(LogBase::Natural),
            "2" | "binary" => Ok(LogBase::Binary),
            other => Err(Error::Config(format!("unknown log base `{other}`"))),
        }
    }
}

/// `(log n)^((1 - theta) / 2)`.
pub fn subcritical_radius(n: usize, theta: f64, base: LogBase) -> Result<f64> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::InvalidParameter(format!("theta must lie in (0, 1], got {theta}")));
    }
    Ok(base.log(n as f64).powf((1.0 - theta) / 2.0))
}

pub fn subcritical_positions(
    n: usize,
    theta: f64,
    base: LogBase,
    seed: u64,
) -> Result<(Vec<Position>, f64)> {
    let r = subcritical_radius(n, theta, base)?;
    let domain = DomainSpec::for_nodes(n, crate::geometry::BoundaryMode::Torus)?;
    Ok((sample_uniform_positions(n, &domain, seed), r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{occupancy_report, BoundaryMode, DEFAULT_SQUARELET_C};
    use crate::graph::{ball, bfs_distances, greedy_cover};

    fn wall() -> WallSegment {
        WallSegment {
            x_start: 0.0,
            x_end: 20.0,
            y_low: 9.5,
            y_high: 10.5,
            gaps: vec![(9.0, 11.0)],
        }
    }

    #[test]
    fn same_side_links_survive() {
        let w = wall();
        assert!(!w.blocks(Position::new(2.0, 8.0), Position::new(4.0, 9.0)));
        assert!(!w.blocks(Position::new(2.0, 12.0), Position::new(3.0, 11.0)));
    }

    #[test]
    fn crossing_outside_gap_is_blocked() {
        let w = wall();
        assert!(w.blocks(Position::new(3.0, 9.0), Position::new(3.5, 11.0)));
        assert!(w.blocks(Position::new(3.5, 11.0), Position::new(3.0, 9.0)));
    }

    #[test]
    fn crossing_through_gap_passes() {
        let w = wall();
        assert!(!w.blocks(Position::new(10.0, 9.0), Position::new(10.5, 11.0)));
        // Enters the band inside the gap but leaves it through the wall.
        assert!(w.blocks(Position::new(10.0, 9.4), Position::new(13.0, 10.6)));
    }

    #[test]
    fn wall_graph_is_connected_and_split() {
        let n = 2000;
        let r = (2.0 * (n as f64).ln()).sqrt();
        let t = wall_topology(n, r, DEFAULT_SQUARELET_C, r, 5).unwrap();
        assert!(t.removed > 0);
        assert!(t.positions.iter().all(|&p| !t.obstruction.inside(p)));
        let g = t.build_graph(r).unwrap();
        assert!(g.is_well_formed());
        assert!(g.is_connected());
        let gap = t.obstruction.segments[0].gaps[0];
        for (u, v) in g.edges() {
            if t.above(u) != t.above(v) {
                let (a, b) = (t.positions[u as usize], t.positions[v as usize]);
                assert!(a.x.min(b.x) >= gap.0 && a.x.max(b.x) <= gap.1 || !t.obstruction.edge_blocked(a, b));
            }
        }
    }

    #[test]
    fn remove_squarelets_examples() {
        let d = DomainSpec::for_nodes(4096, BoundaryMode::Torus).unwrap();
        let r = (2.0 * 4096f64.ln()).sqrt();
        let grid = SquareletGrid::with_default_c(d.side, r).unwrap();
        let pos = sample_uniform_positions(4096, &d, 9);
        let (same, ids) = remove_squarelets(&pos, &grid, &d, &[]).unwrap();
        assert_eq!(same, pos);
        assert_eq!(ids.len(), 4096);
        let all: Vec<(usize, usize)> = (0..grid.cells_per_side)
            .flat_map(|j| (0..grid.cells_per_side).map(move |i| (i, j)))
            .collect();
        assert!(remove_squarelets(&pos, &grid, &d, &all).unwrap().0.is_empty());
        let checker: Vec<(usize, usize)> = all.iter().copied().filter(|(i, j)| (i + j) % 2 == 0).collect();
        let (kept, _) = remove_squarelets(&pos, &grid, &d, &checker).unwrap();
        // Recount oracle from cell boundaries.
        let recount = pos
            .iter()
            .filter(|p| {
                let i = (p.x / grid.cell_side) as usize;
                let j = (p.y / grid.cell_side) as usize;
                (i + j) % 2 == 1
            })
            .count();
        assert_eq!(kept.len(), recount);
    }

    fn occupancy(cps: usize, empty: &[(usize, usize)]) -> OccupancyReport {
        let mut counts = vec![1u32; cps * cps];
        for &(i, j) in empty {
            counts[j * cps + i] = 0;
        }
        OccupancyReport {
            cells_per_side: cps,
            all_nonempty: empty.is_empty(),
            counts,
        }
    }

    /// Oracle: compare all-pairs grid distances among non-empty cells before
    /// and after filling every empty cell.
    fn shortens_any(occ: &OccupancyReport) -> bool {
        let cps = occ.cells_per_side;
        let open: Vec<bool> = occ.counts.iter().map(|&c| c > 0).collect();
        let full = vec![true; open.len()];
        (0..open.len()).filter(|&s| open[s]).any(|s| {
            let a = grid_bfs(&open, cps, s);
            let b = grid_bfs(&full, cps, s);
            (0..open.len()).filter(|&t| open[t]).any(|t| a[t] != b[t])
        })
    }

    #[test]
    fn no_empty_cells_no_holes() {
        let rep = hole_report(&occupancy(6, &[]));
        assert!(rep.holes.is_empty());
        assert_eq!(rep.doubling_bound, 1.0);
    }

    #[test]
    fn single_empty_cells_follow_fill_oracle() {
        // Interior cell: its north and south neighbours are 2 apart through
        // it and 4 around it, so it qualifies. A corner cell never does.
        for (cell, expect) in [((3, 3), true), ((0, 0), false), ((0, 3), true)] {
            let occ = occupancy(7, &[cell]);
            assert_eq!(shortens_any(&occ), expect, "{cell:?}");
            assert_eq!(hole_report(&occ).holes.len(), expect as usize, "{cell:?}");
        }
        assert_eq!(hole_report(&occupancy(7, &[(3, 3)])).holes[0].perimeter, Some(8));
    }

    #[test]
    fn strip_perimeter_grows_linearly() {
        // Horizontal strip of k cells in row 5 of an 16x16 grid: the border
        // pair above/below the strip's ends is k + 3 apart around it.
        let mut last = 0;
        for k in 1..=8usize {
            let cells: Vec<(usize, usize)> = (4..4 + k).map(|i| (i, 5)).collect();
            let occ = occupancy(16, &cells);
            let rep = hole_report(&occ);
            assert_eq!(rep.holes.len(), 1);
            // Oracle: max pairwise distance among border cells by plain BFS.
            let open: Vec<bool> = occ.counts.iter().map(|&c| c > 0).collect();
            let border: Vec<usize> = cells
                .iter()
                .flat_map(|&(i, j)| neighbors4(j * 16 + i, 16))
                .filter(|&b| open[b])
                .collect();
            let far = border
                .iter()
                .flat_map(|&b| {
                    let d = grid_bfs(&open, 16, b);
                    border.iter().map(move |&o| d[o].unwrap())
                })
                .max()
                .unwrap();
            assert_eq!(rep.holes[0].perimeter, Some(2 * far));
            assert_eq!(far as usize, k + 3);
            assert!(2 * far > last);
            last = 2 * far;
            assert_eq!(rep.doubling_bound, (2.0 * far as f64).powi(2));
        }
    }

    #[test]
    fn random_occupancy_holes_shorten_distances() {
        let d = DomainSpec::for_nodes(600, BoundaryMode::Torus).unwrap();
        let r = 3.0;
        let grid = SquareletGrid::with_default_c(d.side, r).unwrap();
        let occ = occupancy_report(&sample_uniform_positions(300, &d, 4), &grid, &d).unwrap();
        let rep = hole_report(&occ);
        for h in &rep.holes {
            let mut single = occ.clone();
            single.counts.iter_mut().for_each(|c| *c = (*c).max(1));
            for &(i, j) in &h.cells {
                single.counts[j * occ.cells_per_side + i] = 0;
            }
            // Isolating the hole keeps it a hole.
            assert!(shortens_any(&single));
        }
    }

    #[test]
    fn comb_structure() {
        let c = comb_udg(8).unwrap();
        assert_eq!(c.positions.len(), 33 + 17 * 2 * 16);
        assert!(c.graph.is_connected());
        // The comb is a tree: spine plus arms.
        assert_eq!(c.graph.edge_count(), c.positions.len() - 1);
        assert!(comb_udg(6).is_ok());
        assert!(comb_udg(7).is_err());
        assert!(comb_udg(2).is_err());
    }

    #[test]
    fn comb_endpoints_are_separated() {
        for r in [8u32, 16] {
            let c = comb_udg(r).unwrap();
            let big = ball(&c.graph, c.center, 2 * r);
            let from_center = bfs_distances(&c.graph, c.center);
            // Farthest in-ball node of each arm whose base lies closer than R to
            // the center.
            let ends: Vec<NodeId> = c
                .branches
                .iter()
                .filter(|(base, _)| from_center[*base as usize].unwrap() < r)
                .map(|(_, arm)| *arm.iter().rev().find(|v| big.binary_search(v).is_ok()).unwrap())
                .collect();
            for (k, &e) in ends.iter().enumerate() {
                let d = bfs_distances(&c.graph, e);
                for (base, _) in &c.branches {
                    let own = c.branches.iter().any(|(b2, arm)| b2 == base && arm.contains(&e));
                    if !own {
                        assert!(d[*base as usize].unwrap() > r);
                    }
                }
                for &other in &ends[k + 1..] {
                    assert!(d[other as usize].unwrap() > 2 * r);
                }
            }
            let cover = greedy_cover(&c.graph, c.center, r).unwrap();
            assert!(cover.len() >= ends.len());
        }
    }

    #[test]
    fn subcritical_radius_examples() {
        assert_eq!(subcritical_radius(4096, 1.0, LogBase::Natural).unwrap(), 1.0);
        let near = subcritical_radius(4096, 1e-9, LogBase::Natural).unwrap();
        assert!((near - 4096f64.ln().sqrt()).abs() < 1e-6);
        let half = subcritical_radius(4096, 0.5, LogBase::Natural).unwrap();
        assert!((half - 4096f64.ln().powf(0.25)).abs() < 1e-12);
        assert!((subcritical_radius(4096, 0.5, LogBase::Binary).unwrap() - 12f64.powf(0.25)).abs() < 1e-12);
        assert!(subcritical_radius(10, 0.0, LogBase::Natural).is_err());
        let (pos, r) = subcritical_positions(500, 0.8, LogBase::Natural, 1).unwrap();
        assert_eq!(pos.len(), 500);
        assert!(r < 500f64.ln().sqrt());
    }
}
