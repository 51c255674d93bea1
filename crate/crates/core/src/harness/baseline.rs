//! Greedy geographic forwarding, used as a foil on obstructed topologies.

use rand::Rng;

use super::config::SimConfig;
use super::run::validate_route;
use crate::error::{Error, Result};
use crate::geometry::{Position, DEFAULT_SQUARELET_C};
use crate::graph::{bfs_distances, ConnectivityGraph};
use crate::protocol::{Protocol, ProtocolParams};
use crate::rng::seeded;
use crate::topology::wall_topology;
use crate::NodeId;

use super::run::component_diameter;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeoRoute {
    pub delivered: bool,
    pub hops: u32,
    /// Visited nodes; ends at the destination or at the local minimum.
    pub path: Vec<NodeId>,
}

/// Forward to the neighbor closest to `dest` in the plane until `dest` is
/// reached or no neighbor is strictly closer than the current node. Ties go
/// to the lower id.
pub fn greedy_georoute_baseline(g: &ConnectivityGraph, positions: &[Position], source: NodeId, dest: NodeId) -> GeoRoute {
    let target = positions[dest as usize];
    let mut cur = source;
    let mut path = vec![source];
    while cur != dest {
        let here = positions[cur as usize].dist(target);
        let best = g
            .neighbors(cur)
            .iter()
            .map(|&v| (positions[v as usize].dist(target), v))
            .filter(|&(d, _)| d < here)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        match best {
            Some((_, v)) => {
                cur = v;
                path.push(v);
            }
            None => break,
        }
    }
    GeoRoute {
        delivered: cur == dest,
        hops: (path.len() - 1) as u32,
        path,
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WallReport {
    pub nodes: usize,
    pub r_n: f64,
    /// Cross-wall pairs in the same component.
    pub pairs: usize,
    pub protocol_delivered: usize,
    pub greedy_delivered: usize,
    pub stretch_violations: usize,
    pub max_stretch: f64,
}

impl WallReport {
    pub fn greedy_failure_fraction(&self) -> f64 {
        if self.pairs == 0 {
            0.0
        } else {
            1.0 - self.greedy_delivered as f64 / self.pairs as f64
        }
    }
}

/// Static wall topology from `config` (n, radius, gap width, seeds, kappa,
/// mode): one converged beaconing round, then `pairs` random cross-wall
/// pairs routed by the protocol and by greedy forwarding.
pub fn wall_demo(config: &SimConfig, pairs: usize) -> Result<WallReport> {
    let r_n = config.radius.radius(config.n)?;
    let gap = match config.topology {
        super::config::TopologyKind::Wall { gap_width } => gap_width.unwrap_or(r_n),
        _ => r_n,
    };
    let wall = wall_topology(config.n, r_n, DEFAULT_SQUARELET_C, gap, config.seeds.placement)?;
    let g = wall.build_graph(r_n)?;
    let n = g.n();
    let levels = match config.levels {
        Some(l) => l,
        None => ProtocolParams::levels_for_diameter(component_diameter(&g)?),
    };
    let params = ProtocolParams::new(config.kappa_value(), config.nu, levels, config.mode)?;
    let mut protocol = Protocol::new(n, params);
    let perm: Vec<NodeId> = (0..n as NodeId).collect();
    let stats = protocol.beaconing_round(&g, 0, &perm)?;
    protocol.check_cover_completeness()?;
    protocol.check_single_membership()?;
    protocol.check_beacon_separation(&g, &stats)?;
    let below: Vec<NodeId> = (0..n as NodeId).filter(|&u| !wall.above(u)).collect();
    let above: Vec<NodeId> = (0..n as NodeId).filter(|&u| wall.above(u)).collect();
    if below.is_empty() || above.is_empty() {
        return Err(Error::InvalidParameter("wall leaves one side empty".into()));
    }
    let mut rng = seeded(config.seeds.sampling);
    let mut report = WallReport {
        nodes: n,
        r_n,
        ..Default::default()
    };
    let bound = params.stretch_bound();
    let mut attempts = 0;
    while report.pairs < pairs {
        attempts += 1;
        if attempts > 100 * pairs.max(1) {
            return Err(Error::Disconnected);
        }
        let (s, d) = if rng.gen_bool(0.5) {
            (below[rng.gen_range(0..below.len())], above[rng.gen_range(0..above.len())])
        } else {
            (above[rng.gen_range(0..above.len())], below[rng.gen_range(0..below.len())])
        };
        let Some(opt) = bfs_distances(&g, s)[d as usize] else {
            continue;
        };
        report.pairs += 1;
        if greedy_georoute_baseline(&g, &wall.positions, s, d).delivered {
            report.greedy_delivered += 1;
        }
        if let Ok(out) = protocol.forward(&g, s, d) {
            validate_route(&g, &out.route, s, d)?;
            report.protocol_delivered += 1;
            let stretch = out.route_hops as f64 / opt as f64;
            report.max_stretch = report.max_stretch.max(stretch);
            if stretch > bound {
                report.stretch_violations += 1;
            }
        }
    }
    Ok(report)
}
