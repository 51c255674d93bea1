//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed; exits non-zero if any fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use doubling_routing::geometry::{
    occupancy_report, sample_uniform_positions, supercritical_radius, BoundaryMode, DomainSpec, Position,
    SquareletGrid,
};
use doubling_routing::graph::{bfs_distances, build_geometric_graph, greedy_cover, verify_cover, ConnectivityGraph};
use doubling_routing::harness::experiments::{overhead_log_fit, regime_means};
use doubling_routing::harness::{
    experiment_doubling_regimes, experiment_overhead_scaling, run_simulation, wall_demo, MetricsSeries, Regime,
    SimConfig, TopologyKind,
};
use doubling_routing::mobility::{theoretical_kappa, Mobility, MobilityKind, MobilityModel};
use doubling_routing::protocol::Mode;
use doubling_routing::topology::{comb_udg, wall_topology};
use doubling_routing::{Error, NodeId};

fn preset(name: &str) -> SimConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("presets").join(name);
    SimConfig::from_file(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Totals for the criteria that hold across every run of the suite.
#[derive(Default)]
struct Pooled {
    runs: usize,
    rounds: usize,
    attempted: usize,
    delivered: usize,
    stretch_checked: usize,
    stretch_violations: usize,
    invariant_failures: Vec<String>,
    other_failures: Vec<String>,
}

impl Pooled {
    fn add(&mut self, label: &str, r: &Result<MetricsSeries, Error>, steps: usize) {
        self.runs += 1;
        match r {
            Ok(s) => {
                self.rounds += steps;
                self.attempted += s.attempted();
                self.delivered += s.delivered();
                self.stretch_checked += s.samples.len();
                self.stretch_violations += s.stretch_violations();
            }
            Err(Error::InvariantViolation(msg)) => self.invariant_failures.push(format!("{label}: {msg}")),
            Err(e) => self.other_failures.push(format!("{label}: {e}")),
        }
    }
}

struct Line {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(lines: &mut Vec<Line>, id: u32, name: &'static str, pass: bool, detail: String) {
    println!("{} criterion {id} ({name}): {detail}", if pass { "PASS" } else { "FAIL" });
    lines.push(Line { id, name, pass, detail });
}

fn stretch_reproduction(lines: &mut Vec<Line>, pooled: &mut Pooled) {
    let cfg = preset("stretch.cfg");
    let r = run_simulation(&cfg);
    pooled.add("stretch preset", &r, cfg.steps);
    let (pass, detail) = match &r {
        Ok(s) => {
            let p95 = s.stretch_quantile(0.95).unwrap_or(f64::NAN);
            let max = s.max_stretch().unwrap_or(f64::NAN);
            let bound = 6.0 * s.kappa * s.kappa;
            (
                s.samples.len() >= 2000 && p95 <= 1.5 && max <= bound,
                format!(
                    "samples {} (need >= 2000), p95 {p95:.3} (need <= 1.5), max {max:.3} (need <= {bound})",
                    s.samples.len()
                ),
            )
        }
        Err(e) => (false, format!("run aborted: {e}")),
    };
    report(lines, 1, "stretch reproduction", pass, detail);
}

fn overhead_envelope(lines: &mut Vec<Line>, pooled: &mut Pooled) {
    let cfg = preset("overhead.cfg");
    let (pass, detail) = match experiment_overhead_scaling(&cfg.n_list, cfg.trials, &cfg) {
        Ok(rows) => {
            pooled.runs += rows.len() * cfg.trials;
            pooled.rounds += rows.len() * cfg.trials * cfg.steps;
            let fit = overhead_log_fit(&rows);
            let r2 = fit.map_or(f64::NAN, |f| f.r_squared);
            let all_within = rows.iter().all(|r| r.within_benchmark());
            let cells: Vec<String> = rows
                .iter()
                .map(|r| format!("n={} {:.1}/{:.1}", r.n, r.mean, r.benchmark))
                .collect();
            (
                all_within && r2 >= 0.9 && rows.len() == cfg.n_list.len(),
                format!("{}; R^2 {r2:.4} (need >= 0.9)", cells.join(", ")),
            )
        }
        Err(e) => {
            let msg = format!("sweep aborted: {e}");
            if let Error::InvariantViolation(_) = e {
                pooled.invariant_failures.push(msg.clone());
            }
            (false, msg)
        }
    };
    report(lines, 2, "overhead envelope", pass, detail);
}

/// Mobile runs in both modes and several seeds, feeding criteria 3 to 5.
fn property_batch(pooled: &mut Pooled) {
    for mode in [Mode::Plain, Mode::LoadBalanced] {
        for seed in 1..=3 {
            let mut cfg = preset("stretch.cfg").with_seed(seed);
            cfg.n = 300;
            cfg.steps = 30;
            cfg.pair_samples = 40;
            cfg.mode = mode;
            let r = run_simulation(&cfg);
            pooled.add(&format!("{mode:?} seed {seed}"), &r, cfg.steps);
        }
    }
    let mut waypoint = preset("stretch.cfg");
    waypoint.n = 300;
    waypoint.steps = 30;
    waypoint.mobility = MobilityKind::RandomWaypoint;
    let r = run_simulation(&waypoint);
    pooled.add("random waypoint", &r, waypoint.steps);
}

fn regimes(lines: &mut Vec<Line>) {
    let cfg = preset("regimes.cfg");
    let (pass, detail) = match experiment_doubling_regimes(&cfg.n_list, cfg.theta, cfg.eps, cfg.trials, cfg.seed) {
        Ok(rows) => {
            let means = regime_means(&rows);
            let get = |n: usize, g: Regime| means.iter().find(|m| m.0 == n && m.1 == g).map(|m| m.2);
            let (lo, hi) = (cfg.n_list[0], cfg.n_list[cfg.n_list.len() - 1]);
            let sup = (get(lo, Regime::Supercritical), get(hi, Regime::Supercritical));
            let sub = (get(lo, Regime::Subcritical), get(hi, Regime::Subcritical));
            match (sup, sub) {
                ((Some(a), Some(b)), (Some(c), Some(d))) => (
                    b / a <= 1.5 && d > c,
                    format!(
                        "supercritical {a:.2} -> {b:.2} ratio {:.3} (need <= 1.5); subcritical {c:.2} -> {d:.2} (need increase)",
                        b / a
                    ),
                ),
                _ => (false, "missing rows".into()),
            }
        }
        Err(e) => (false, format!("aborted: {e}")),
    };
    report(lines, 6, "doubling regimes", pass, detail);
}

fn comb(lines: &mut Vec<Line>) {
    let mut pass = true;
    let mut cells = Vec::new();
    for r in [8u32, 16, 32] {
        match comb_udg(r).and_then(|c| greedy_cover(&c.graph, c.center, r).map(|cover| (c, cover))) {
            Ok((c, cover)) => {
                let ok = verify_cover(&c.graph, c.center, r, &cover) && cover.len() as f64 >= r as f64 / 4.0;
                pass &= ok;
                cells.push(format!("R={r}: {} centers (need >= {})", cover.len(), r as f64 / 4.0));
            }
            Err(e) => {
                pass = false;
                cells.push(format!("R={r}: {e}"));
            }
        }
    }
    report(lines, 7, "comb UDG", pass, cells.join(", "));
}

fn smoothness(lines: &mut Vec<Line>) {
    let n = 1000;
    let speed = 1.0;
    let nu = 0.01;
    let steps = 40;
    let pairs = 100;
    let domain = DomainSpec::for_nodes(n, BoundaryMode::Reflect).unwrap();
    let r_n = supercritical_radius(n, 1.0);
    let mut positions = sample_uniform_positions(n, &domain, 801);
    let mut mobility = Mobility::new(MobilityModel::new(MobilityKind::RandomWalk, speed).unwrap(), domain, 802);
    let mut graphs = Vec::new();
    for _ in 0..steps {
        graphs.push(build_geometric_graph(&positions, r_n).unwrap());
        mobility.step(&mut positions);
    }
    let tau_for = |d: u32| ((nu * d as f64).ceil() as usize).max(1);
    let rep = doubling_routing::mobility::measure_smoothness_with(&graphs, tau_for, pairs, 803).unwrap();
    let (mut ok, mut bad, mut vacuous) = (0usize, 0usize, 0usize);
    for s in &rep.samples {
        match theoretical_kappa(r_n, speed, s.tau as f64, s.d_before as f64) {
            Ok(bound) if s.ratio <= bound => ok += 1,
            Ok(_) => bad += 1,
            Err(_) => vacuous += 1,
        }
    }
    let checked = ok + bad;
    let frac = if checked == 0 { 0.0 } else { ok as f64 / checked as f64 };
    report(
        lines,
        8,
        "smoothness",
        checked > 0 && frac >= 0.99,
        format!(
            "{ok}/{checked} within bound ({:.2}%, need >= 99%); {vacuous} samples past the horizon, {} skipped",
            100.0 * frac,
            rep.skipped
        ),
    );
}

/// Cell index computed directly, independent of the grid helpers.
fn oracle_empty_cells(positions: &[Position], side: f64, cell: f64) -> usize {
    let per_side = (side / cell - 1e-9).ceil() as usize;
    let mut hit = vec![false; per_side * per_side];
    for p in positions {
        let i = ((p.x / cell) as usize).min(per_side - 1);
        let j = ((p.y / cell) as usize).min(per_side - 1);
        hit[j * per_side + i] = true;
    }
    hit.iter().filter(|h| !**h).count()
}

fn occupancy(lines: &mut Vec<Line>) {
    let n = 4096;
    let trials = 100;
    let domain = DomainSpec::for_nodes(n, BoundaryMode::Reflect).unwrap();
    let r_n = supercritical_radius(n, 1.0);
    let grid = SquareletGrid::with_default_c(domain.side, r_n).unwrap();
    let mut full = 0;
    let mut empty_total = 0;
    let mut mismatch = 0;
    for t in 0..trials {
        let pos = sample_uniform_positions(n, &domain, 9000 + t);
        let rep = occupancy_report(&pos, &grid, &domain).unwrap();
        if rep.empty_cells() != oracle_empty_cells(&pos, domain.side, grid.cell_side) {
            mismatch += 1;
        }
        empty_total += rep.empty_cells();
        if rep.all_nonempty {
            full += 1;
        }
    }
    report(
        lines,
        9,
        "squarelet occupancy",
        full >= 99 && mismatch == 0,
        format!(
            "{full}/{trials} trials with every squarelet occupied (need >= 99); mean empty cells {:.1} of {}; oracle mismatches {mismatch}",
            empty_total as f64 / trials as f64,
            grid.cell_count()
        ),
    );
}

/// Independent greedy forwarding over every cross-wall pair.
fn oracle_wall_failure(g: &ConnectivityGraph, pos: &[Position], above: &[bool]) -> f64 {
    let n = g.n();
    let (mut pairs, mut fail) = (0usize, 0usize);
    for s in 0..n {
        let reach = bfs_distances(g, s as NodeId);
        for d in 0..n {
            if above[s] == above[d] || reach[d].is_none() {
                continue;
            }
            pairs += 1;
            let t = pos[d];
            let mut cur = s;
            loop {
                if cur == d {
                    break;
                }
                let here = (pos[cur].x - t.x).hypot(pos[cur].y - t.y);
                let mut best = (here, usize::MAX);
                for &v in g.neighbors(cur as NodeId) {
                    let dv = (pos[v as usize].x - t.x).hypot(pos[v as usize].y - t.y);
                    if dv < best.0 || (dv == best.0 && best.1 != usize::MAX && (v as usize) < best.1) {
                        best = (dv, v as usize);
                    }
                }
                if best.1 == usize::MAX {
                    fail += 1;
                    break;
                }
                cur = best.1;
            }
        }
    }
    fail as f64 / pairs as f64
}

/// Greedy failure floor, confirmed against `oracle_wall_failure` on the
/// preset topology before freezing.
const WALL_GREEDY_FAILURE_FLOOR: f64 = 0.20;

fn wall(lines: &mut Vec<Line>, pooled: &mut Pooled) {
    let cfg = preset("wall.cfg");
    let gap = match cfg.topology {
        TopologyKind::Wall { gap_width } => gap_width,
        _ => None,
    };
    let r_n = cfg.radius.radius(cfg.n).unwrap();
    let topo = wall_topology(cfg.n, r_n, doubling_routing::geometry::DEFAULT_SQUARELET_C, gap.unwrap_or(r_n), cfg.seeds.placement)
        .unwrap();
    let g = topo.build_graph(r_n).unwrap();
    let above: Vec<bool> = (0..g.n() as NodeId).map(|u| topo.above(u)).collect();
    let oracle = oracle_wall_failure(&g, &topo.positions, &above);
    let (pass, detail) = match wall_demo(&cfg, cfg.pair_samples) {
        Ok(w) => {
            pooled.runs += 1;
            pooled.rounds += 1;
            pooled.attempted += w.pairs;
            pooled.delivered += w.protocol_delivered;
            pooled.stretch_checked += w.protocol_delivered;
            pooled.stretch_violations += w.stretch_violations;
            let frac = w.greedy_failure_fraction();
            (
                w.protocol_delivered == w.pairs && frac >= WALL_GREEDY_FAILURE_FLOOR && w.stretch_violations == 0,
                format!(
                    "protocol {}/{} delivered, greedy fails {:.3} of sampled pairs (need >= {WALL_GREEDY_FAILURE_FLOOR}; all-pairs oracle {oracle:.3}), max stretch {:.3}",
                    w.protocol_delivered, w.pairs, frac, w.max_stretch
                ),
            )
        }
        Err(e) => (false, format!("aborted: {e}")),
    };
    report(lines, 10, "wall demonstration", pass, detail);
}

fn main() -> ExitCode {
    // `cargo test` passes libtest flags such as --nocapture; ignore them,
    // but honour `--list` so test discovery does not run the suite.
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut pooled = Pooled::default();

    stretch_reproduction(&mut lines, &mut pooled);
    overhead_envelope(&mut lines, &mut pooled);
    property_batch(&mut pooled);
    wall(&mut lines, &mut pooled);

    let detail = format!(
        "{} violations over {} delivered routes in {} runs",
        pooled.stretch_violations, pooled.stretch_checked, pooled.runs
    );
    report(&mut lines, 3, "stretch hard bound", pooled.stretch_violations == 0 && pooled.stretch_checked > 0, detail);
    let detail = format!(
        "{}/{} delivered; {} aborted runs{}",
        pooled.delivered,
        pooled.attempted,
        pooled.invariant_failures.len() + pooled.other_failures.len(),
        pooled
            .other_failures
            .iter()
            .chain(&pooled.invariant_failures)
            .map(|f| format!(" [{f}]"))
            .collect::<String>()
    );
    let delivered_all = pooled.delivered == pooled.attempted && pooled.other_failures.is_empty();
    report(&mut lines, 4, "delivery", delivered_all && pooled.invariant_failures.is_empty(), detail);
    let detail = format!(
        "{} rounds checked, {} violations",
        pooled.rounds,
        pooled.invariant_failures.len()
    );
    report(&mut lines, 5, "cover invariants", pooled.invariant_failures.is_empty(), detail);

    regimes(&mut lines);
    comb(&mut lines);
    smoothness(&mut lines);
    occupancy(&mut lines);

    lines.sort_by_key(|l| l.id);
    let failed: Vec<String> = lines.iter().filter(|l| !l.pass).map(|l| format!("{} ({})", l.id, l.name)).collect();
    println!(
        "acceptance: {}/{} criteria pass in {:.1}s",
        lines.len() - failed.len(),
        lines.len(),
        start.elapsed().as_secs_f64()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {}", failed.join(", "));
        for l in lines.iter().filter(|l| !l.pass) {
            println!("  {}: {}", l.id, l.detail);
        }
        ExitCode::FAILURE
    }
}
