//! Node placement on the square domain `[0, side)^2` and the squarelet grid
//! laid over it.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::seeded;

/// Default squarelet constant: cells of side `r_n / sqrt(5)` guarantee that
/// nodes in horizontally or vertically adjacent cells are within `r_n`.
pub const DEFAULT_SQUARELET_C: f64 = 2.236_067_977_499_79;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    Torus,
    Reflect,
}

impl std::str::FromStr for BoundaryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "torus" => Ok(BoundaryMode::Torus),
            "reflect" => Ok(BoundaryMode::Reflect),
            other => Err(Error::Config(format!("unknown boundary mode `{other}`"))),
        }
    }
}

/// The network area: a square of side `sqrt(n)` holding `n` nodes at unit
/// density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    pub side: f64,
    pub boundary: BoundaryMode,
    pub n: usize,
}

impl DomainSpec {
    pub fn for_nodes(n: usize, boundary: BoundaryMode) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("domain needs n >= 1".into()));
        }
        Ok(Self {
            side: (n as f64).sqrt(),
            boundary,
            n,
        })
    }

    pub fn contains(&self, p: Position) -> bool {
        p.x >= 0.0 && p.x < self.side && p.y >= 0.0 && p.y < self.side
    }

    /// Shortest displacement between two points, wrapping around the edges
    /// when the domain is a torus.
    pub fn distance(&self, a: Position, b: Position) -> f64 {
        match self.boundary {
            BoundaryMode::Torus => {
                let dx = wrap_delta(a.x - b.x, self.side);
                let dy = wrap_delta(a.y - b.y, self.side);
                dx.hypot(dy)
            }
            BoundaryMode::Reflect => a.dist(b),
        }
    }
}

fn wrap_delta(d: f64, side: f64) -> f64 {
    let d = d.abs() % side;
    d.min(side - d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Square grid of cells ("squarelets") of side `r_n / c`.
///
/// When `side / cell_side` is not an integer the last row and column
/// overhang the domain and are clipped to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareletGrid {
    pub cell_side: f64,
    pub c: f64,
    pub cells_per_side: usize,
}

impl SquareletGrid {
    pub fn new(side: f64, r_n: f64, c: f64) -> Result<Self> {
        if !(r_n > 0.0) || !(side > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid needs positive side and radius, got side={side}, r_n={r_n}"
            )));
        }
        if c < DEFAULT_SQUARELET_C - 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "squarelet constant c={c} is below sqrt(5)"
            )));
        }
        let cell_side = r_n / c;
        let ratio = side / cell_side;
        // 1e-9 keeps an exact fit from gaining a sliver column through rounding.
        let cells_per_side = ((ratio - 1e-9).ceil() as usize).max(1);
        Ok(Self {
            cell_side,
            c,
            cells_per_side,
        })
    }

    pub fn with_default_c(side: f64, r_n: f64) -> Result<Self> {
        Self::new(side, r_n, DEFAULT_SQUARELET_C)
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_side * self.cells_per_side
    }

    /// Row-major index of cell `(i, j)`, `i` along x.
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.cells_per_side + i
    }
}

/// `n` positions drawn i.i.d. uniformly from the domain.
pub fn sample_uniform_positions(n: usize, domain: &DomainSpec, seed: u64) -> Vec<Position> {
    let mut rng = seeded(seed);
    (0..n)
        .map(|_| Position::new(rng.gen_range(0.0..domain.side), rng.gen_range(0.0..domain.side)))
        .collect()
}

/// Cell `(i, j)` containing `p`.
pub fn squarelet_of(p: Position, grid: &SquareletGrid, domain: &DomainSpec) -> Result<(usize, usize)> {
    if !domain.contains(p) {
        return Err(Error::OutsideDomain {
            x: p.x,
            y: p.y,
            side: domain.side,
        });
    }
    let last = grid.cells_per_side - 1;
    let i = ((p.x / grid.cell_side).floor() as usize).min(last);
    let j = ((p.y / grid.cell_side).floor() as usize).min(last);
    Ok((i, j))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyReport {
    pub cells_per_side: usize,
    /// Row-major node counts, see [`SquareletGrid::index`].
    pub counts: Vec<u32>,
    pub all_nonempty: bool,
}

impl OccupancyReport {
    pub fn count(&self, i: usize, j: usize) -> u32 {
        self.counts[j * self.cells_per_side + i]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    pub fn empty_cells(&self) -> usize {
        self.counts.iter().filter(|&&c| c == 0).count()
    }
}

pub fn occupancy_report(
    positions: &[Position],
    grid: &SquareletGrid,
    domain: &DomainSpec,
) -> Result<OccupancyReport> {
    let mut counts = vec![0u32; grid.cell_count()];
    for &p in positions {
        let (i, j) = squarelet_of(p, grid, domain)?;
        counts[grid.index(i, j)] += 1;
    }
    let all_nonempty = counts.iter().all(|&c| c >= 1);
    Ok(OccupancyReport {
        cells_per_side: grid.cells_per_side,
        counts,
        all_nonempty,
    })
}

/// Communication radius `sqrt((1 + eps) ln n)`, above the connectivity
/// threshold for any `eps > 0`.
pub fn supercritical_radius(n: usize, eps: f64) -> f64 {
    ((1.0 + eps) * (n as f64).ln()).sqrt()
}
