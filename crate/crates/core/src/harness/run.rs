//! Step-by-step simulation driver.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use super::config::{SimConfig, TopologyKind};
use crate::error::{Error, Result};
use crate::geometry::{sample_uniform_positions, DomainSpec, Position, SquareletGrid, DEFAULT_SQUARELET_C};
use crate::graph::{bfs_distances, diameter, ConnectivityGraph};
use crate::mobility::Mobility;
use crate::protocol::{Protocol, ProtocolParams, RoundStats};
use crate::rng::{seeded, SimRng};
use crate::topology::{comb_udg, remove_squarelets, wall_topology, Obstruction};
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    pub step: usize,
    pub gamma: Option<u32>,
    pub control_packets: u64,
    pub control_packets_per_node: f64,
    pub control_bits_total: u64,
    pub membership_bits: u64,
    pub probe_transmissions: u64,
    pub attempted: usize,
    pub delivered: usize,
    /// Sampled pairs in different components.
    pub skipped_disconnected: usize,
    pub stretch_violations: usize,
    pub probe_bound_violations: usize,
    pub max_load: u32,
    pub components: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StretchSample {
    pub step: usize,
    pub source: NodeId,
    pub dest: NodeId,
    pub route_hops: u32,
    pub bfs_hops: u32,
}

impl StretchSample {
    pub fn stretch(&self) -> f64 {
        self.route_hops as f64 / self.bfs_hops as f64
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsSeries {
    pub n: usize,
    pub levels: u32,
    pub kappa: f64,
    pub stretch_bound: f64,
    /// Probe factor `mu` for the configured doubling estimate.
    pub mu: f64,
    /// Leading steps run but left out of the series.
    pub warmup: usize,
    pub steps: Vec<StepMetrics>,
    pub samples: Vec<StretchSample>,
}

/// Nearest-rank quantile of an ascending slice; `None` when empty.
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (q.clamp(0.0, 1.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.saturating_sub(1).min(sorted.len() - 1)])
}

impl MetricsSeries {
    pub fn mean_packets_per_node(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().map(|s| s.control_packets_per_node).sum::<f64>() / self.steps.len() as f64
    }

    pub fn stretches(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.samples.iter().map(StretchSample::stretch).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn stretch_quantile(&self, q: f64) -> Option<f64> {
        quantile(&self.stretches(), q)
    }

    pub fn max_stretch(&self) -> Option<f64> {
        self.stretches().last().copied()
    }

    pub fn attempted(&self) -> usize {
        self.steps.iter().map(|s| s.attempted).sum()
    }

    pub fn delivered(&self) -> usize {
        self.steps.iter().map(|s| s.delivered).sum()
    }

    pub fn stretch_violations(&self) -> usize {
        self.steps.iter().map(|s| s.stretch_violations).sum()
    }

    pub fn skipped_disconnected(&self) -> usize {
        self.steps.iter().map(|s| s.skipped_disconnected).sum()
    }
}

/// Largest hop diameter over the components of `g`.
pub fn component_diameter(g: &ConnectivityGraph) -> Result<u32> {
    let mut best = 0;
    for comp in g.components() {
        if comp.len() <= best as usize {
            break;
        }
        let (sub, _) = g.induced(&comp);
        best = best.max(diameter(&sub)?.hops);
    }
    Ok(best)
}

/// Placement, mobility and protocol state for one run.
pub struct Simulation {
    config: SimConfig,
    positions: Vec<Position>,
    r_n: f64,
    obstruction: Option<Obstruction>,
    /// Fixed graph for topologies that do not move.
    fixed: Option<ConnectivityGraph>,
    mobility: Mobility,
    protocol: Protocol,
    graph: ConnectivityGraph,
    perm_rng: SimRng,
    pair_rng: SimRng,
    warmup: usize,
    mu: f64,
    t: usize,
    last_stats: Option<RoundStats>,
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self> {
        config.validate()?;
        let model = config.mobility_model()?;
        let mut obstruction = None;
        let mut fixed = None;
        let (positions, r_n, domain) = match &config.topology {
            TopologyKind::Comb(r) => {
                let comb = comb_udg(*r)?;
                let domain = DomainSpec::for_nodes(comb.positions.len(), config.boundary)?;
                fixed = Some(comb.graph);
                (comb.positions, 1.0, domain)
            }
            TopologyKind::Wall { gap_width } => {
                let r_n = config.radius.radius(config.n)?;
                let wall = wall_topology(
                    config.n,
                    r_n,
                    DEFAULT_SQUARELET_C,
                    gap_width.unwrap_or(r_n),
                    config.seeds.placement,
                )?;
                let domain = DomainSpec::for_nodes(config.n, crate::geometry::BoundaryMode::Reflect)?;
                obstruction = Some(wall.obstruction);
                (wall.positions, r_n, domain)
            }
            TopologyKind::Holes(cells) => {
                let r_n = config.radius.radius(config.n)?;
                let domain = DomainSpec::for_nodes(config.n, config.boundary)?;
                let grid = SquareletGrid::with_default_c(domain.side, r_n)?;
                let all = sample_uniform_positions(config.n, &domain, config.seeds.placement);
                let (kept, _) = remove_squarelets(&all, &grid, &domain, cells)?;
                (kept, r_n, domain)
            }
            TopologyKind::Plain => {
                let r_n = config.radius.radius(config.n)?;
                let domain = DomainSpec::for_nodes(config.n, config.boundary)?;
                (sample_uniform_positions(config.n, &domain, config.seeds.placement), r_n, domain)
            }
        };
        if positions.is_empty() {
            return Err(Error::InvalidParameter("no nodes left after placement".into()));
        }
        let mut positions = positions;
        let mut mobility = Mobility::new(model, domain, config.seeds.mobility);
        mobility.warm_up(&mut positions);
        let graph = build(&positions, r_n, obstruction.as_ref(), fixed.as_ref())?;
        let levels = match config.levels {
            Some(l) => l,
            None => ProtocolParams::levels_for_diameter(component_diameter(&graph)?),
        };
        let params = ProtocolParams::new(config.kappa_value(), config.nu, levels, config.mode)?;
        let warmup = config.warmup.unwrap_or(if model.is_static() {
            0
        } else {
            ((config.nu * (1u64 << levels) as f64).ceil() as usize).max(10)
        });
        let mu = params.probe_factor(config.alpha_hat);
        Ok(Self {
            protocol: Protocol::new(positions.len(), params),
            perm_rng: seeded(config.seeds.permutation),
            pair_rng: seeded(config.seeds.sampling),
            config,
            positions,
            r_n,
            obstruction,
            fixed,
            mobility,
            graph,
            warmup,
            mu,
            t: 0,
            last_stats: None,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn graph(&self) -> &ConnectivityGraph {
        &self.graph
    }

    pub fn protocol(&self) -> &Protocol {
        &self.protocol
    }

    pub fn radius(&self) -> f64 {
        self.r_n
    }

    pub fn warmup(&self) -> usize {
        self.warmup
    }

    /// Steps completed so far.
    pub fn time(&self) -> usize {
        self.t
    }

    pub fn last_round(&self) -> Option<&RoundStats> {
        self.last_stats.as_ref()
    }

    /// Advance one step: move (after the first step), rebuild the graph, run
    /// a beaconing round and check its invariants, then route sampled pairs
    /// once past warmup. Returns `None` for warmup steps.
    pub fn step(&mut self) -> Result<Option<(StepMetrics, Vec<StretchSample>)>> {
        let t = self.t;
        if t > 0 && self.fixed.is_none() {
            self.mobility.step(&mut self.positions);
            self.graph = build(&self.positions, self.r_n, self.obstruction.as_ref(), None)?;
        }
        let g = &self.graph;
        let n = g.n();
        let mut perm: Vec<NodeId> = (0..n as NodeId).collect();
        perm.shuffle(&mut self.perm_rng);
        let stats = self.protocol.beaconing_round(g, t as u64, &perm).map_err(|e| self.fail(t, e))?;
        let checks = self
            .protocol
            .check_cover_completeness()
            .and_then(|_| self.protocol.check_single_membership())
            .and_then(|_| self.protocol.check_beacon_separation(g, &stats))
            .and_then(|_| self.protocol.check_lb_store());
        if let Err(e) = checks {
            return Err(self.fail(t, e));
        }
        self.t += 1;
        let mut m = StepMetrics {
            step: t,
            gamma: stats.gamma,
            control_packets: stats.control_packets,
            control_packets_per_node: stats.packets_per_node(),
            control_bits_total: stats.control_bits,
            membership_bits: stats.membership_bits,
            probe_transmissions: 0,
            attempted: 0,
            delivered: 0,
            skipped_disconnected: 0,
            stretch_violations: 0,
            probe_bound_violations: 0,
            max_load: stats.max_load(),
            components: g.components().len(),
        };
        self.last_stats = Some(stats);
        if t < self.warmup {
            return Ok(None);
        }
        let mut samples = Vec::new();
        if n >= 2 {
            let bound = self.protocol.params().stretch_bound();
            let probe_bound = self.mu * 6.0 * self.protocol.params().kappa;
            for _ in 0..self.config.pair_samples {
                let s = self.pair_rng.gen_range(0..n) as NodeId;
                let mut d = self.pair_rng.gen_range(0..n - 1) as NodeId;
                if d >= s {
                    d += 1;
                }
                let Some(opt) = bfs_distances(g, s)[d as usize] else {
                    m.skipped_disconnected += 1;
                    continue;
                };
                m.attempted += 1;
                let out = self.protocol.forward(g, s, d).map_err(|e| self.fail(t, e))?;
                validate_route(g, &out.route, s, d).map_err(|e| self.fail(t, e))?;
                if out.route_hops < opt {
                    return Err(self.fail(t, Error::InvariantViolation(format!("route {s}->{d} shorter than BFS"))));
                }
                m.delivered += 1;
                m.probe_transmissions += out.probe_transmissions;
                if out.route_hops as f64 > bound * opt as f64 {
                    m.stretch_violations += 1;
                }
                if out.probe_transmissions as f64 > probe_bound * opt as f64 {
                    m.probe_bound_violations += 1;
                }
                samples.push(StretchSample {
                    step: t,
                    source: s,
                    dest: d,
                    route_hops: out.route_hops,
                    bfs_hops: opt,
                });
            }
        }
        Ok(Some((m, samples)))
    }

    /// Run the remaining steps and collect the series.
    pub fn run(&mut self) -> Result<MetricsSeries> {
        let params = *self.protocol.params();
        let mut series = MetricsSeries {
            n: self.positions.len(),
            levels: params.levels,
            kappa: params.kappa,
            stretch_bound: params.stretch_bound(),
            mu: self.mu,
            warmup: self.warmup.min(self.config.steps),
            ..Default::default()
        };
        while self.t < self.config.steps {
            if let Some((m, samples)) = self.step()? {
                series.steps.push(m);
                series.samples.extend(samples);
            }
        }
        Ok(series)
    }

    /// Attach the step to an error and dump the protocol state if a dump
    /// directory is configured.
    fn fail(&self, t: usize, e: Error) -> Error {
        if let Some(dir) = &self.config.dump_dir {
            let _ = write_dump(dir, t, &self.protocol);
        }
        match e {
            Error::InvariantViolation(msg) => Error::InvariantViolation(format!("step {t}: {msg}")),
            other => other,
        }
    }
}

fn write_dump(dir: &Path, t: usize, p: &Protocol) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(format!("snapshot_step{t}.csv")), p.snapshot_csv())
}

fn build(
    positions: &[Position],
    r_n: f64,
    obstruction: Option<&Obstruction>,
    fixed: Option<&ConnectivityGraph>,
) -> Result<ConnectivityGraph> {
    if let Some(g) = fixed {
        return Ok(g.clone());
    }
    match obstruction {
        Some(o) => o.build_graph(positions, r_n),
        None => crate::graph::build_geometric_graph(positions, r_n),
    }
}

/// A route must run from `s` to `d` over edges of `g`.
pub fn validate_route(g: &ConnectivityGraph, route: &[NodeId], s: NodeId, d: NodeId) -> Result<()> {
    if s == d {
        return if route.is_empty() {
            Ok(())
        } else {
            Err(Error::InvariantViolation(format!("non-empty route from {s} to itself")))
        };
    }
    if route.first() != Some(&s) || route.last() != Some(&d) {
        return Err(Error::InvariantViolation(format!("route does not join {s} and {d}")));
    }
    if let Some(w) = route.windows(2).find(|w| !g.has_edge(w[0], w[1])) {
        return Err(Error::InvariantViolation(format!("route uses missing edge {} - {}", w[0], w[1])));
    }
    Ok(())
}

pub fn run_simulation(config: &SimConfig) -> Result<MetricsSeries> {
    Simulation::new(config.clone())?.run()
}
