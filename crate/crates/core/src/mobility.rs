//! Mobility models with bounded per-step displacement, and measurement of
//! how fast hop distances drift under them.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryMode, DomainSpec, Position};
use crate::graph::{bfs_distances, ConnectivityGraph};
use crate::rng::{seeded, SimRng};
use crate::NodeId;

const SQRT_10: f64 = 3.162_277_660_168_379_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MobilityKind {
    /// Uniform direction, step length uniform on `[0, S)`.
    RandomWalk,
    /// Straight legs toward uniform waypoints at a per-leg speed in `[S/2, S)`.
    RandomWaypoint,
    /// Every node copies the displacement of one virtual node following the
    /// base model, so the configuration moves rigidly.
    Lockstep(LockstepBase),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LockstepBase {
    RandomWalk,
    RandomWaypoint,
}

impl std::str::FromStr for MobilityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random_walk" => Ok(Self::RandomWalk),
            "random_waypoint" => Ok(Self::RandomWaypoint),
            "lockstep" | "lockstep_random_walk" => Ok(Self::Lockstep(LockstepBase::RandomWalk)),
            "lockstep_random_waypoint" => Ok(Self::Lockstep(LockstepBase::RandomWaypoint)),
            other => Err(Error::Config(format!("unknown mobility model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobilityModel {
    pub kind: MobilityKind,
    pub max_speed: f64,
}

impl MobilityModel {
    pub fn new(kind: MobilityKind, max_speed: f64) -> Result<Self> {
        if !(max_speed >= 0.0) || !max_speed.is_finite() {
            return Err(Error::InvalidParameter(format!("max speed must be finite and >= 0, got {max_speed}")));
        }
        Ok(Self { kind, max_speed })
    }

    pub fn is_static(&self) -> bool {
        self.max_speed == 0.0
    }
}

#[derive(Debug, Clone, Copy)]
struct Leg {
    target: Position,
    speed: f64,
}

/// Stateful mover: owns the RNG stream and any per-node waypoint state.
#[derive(Debug, Clone)]
pub struct Mobility {
    model: MobilityModel,
    domain: DomainSpec,
    rng: SimRng,
    legs: Vec<Option<Leg>>,
    leader: Position,
}

impl Mobility {
    pub fn new(model: MobilityModel, domain: DomainSpec, seed: u64) -> Self {
        Self {
            model,
            domain,
            rng: seeded(seed),
            legs: Vec::new(),
            leader: Position::new(domain.side / 2.0, domain.side / 2.0),
        }
    }

    pub fn model(&self) -> MobilityModel {
        self.model
    }

    /// Steps to discard before waypoint motion is close to stationary:
    /// `10 * side / S`, zero for the other models.
    pub fn warmup_steps(&self) -> usize {
        let waypoint = matches!(
            self.model.kind,
            MobilityKind::RandomWaypoint | MobilityKind::Lockstep(LockstepBase::RandomWaypoint)
        );
        if waypoint && !self.model.is_static() {
            (10.0 * self.domain.side / self.model.max_speed).ceil() as usize
        } else {
            0
        }
    }

    pub fn warm_up(&mut self, positions: &mut [Position]) {
        for _ in 0..self.warmup_steps() {
            self.step(positions);
        }
    }

    /// Advance every node by one time step.
    pub fn step(&mut self, positions: &mut [Position]) {
        if self.model.is_static() {
            return;
        }
        match self.model.kind {
            MobilityKind::RandomWalk => {
                for p in positions.iter_mut() {
                    let (dx, dy) = walk_step(&mut self.rng, self.model.max_speed);
                    *p = self.place(p.x + dx, p.y + dy);
                }
            }
            MobilityKind::RandomWaypoint => {
                self.legs.resize(positions.len(), None);
                for (u, p) in positions.iter_mut().enumerate() {
                    let mut leg = self.legs[u];
                    *p = waypoint_step(&mut self.rng, &self.domain, self.model.max_speed, *p, &mut leg);
                    self.legs[u] = leg;
                }
            }
            MobilityKind::Lockstep(base) => {
                let (dx, dy) = match base {
                    LockstepBase::RandomWalk => walk_step(&mut self.rng, self.model.max_speed),
                    LockstepBase::RandomWaypoint => {
                        self.legs.resize(1, None);
                        let mut leg = self.legs[0];
                        let before = self.leader;
                        self.leader =
                            waypoint_step(&mut self.rng, &self.domain, self.model.max_speed, before, &mut leg);
                        self.legs[0] = leg;
                        (self.leader.x - before.x, self.leader.y - before.y)
                    }
                };
                for p in positions.iter_mut() {
                    *p = self.place(p.x + dx, p.y + dy);
                }
            }
        }
    }

    fn place(&self, x: f64, y: f64) -> Position {
        let side = self.domain.side;
        match self.domain.boundary {
            BoundaryMode::Torus => Position::new(wrap(x, side), wrap(y, side)),
            BoundaryMode::Reflect => Position::new(reflect(x, side), reflect(y, side)),
        }
    }
}

fn walk_step(rng: &mut SimRng, s: f64) -> (f64, f64) {
    let angle = rng.gen_range(0.0..TAU);
    let len = rng.gen_range(0.0..s);
    (len * angle.cos(), len * angle.sin())
}

fn waypoint_step(rng: &mut SimRng, domain: &DomainSpec, s: f64, p: Position, leg: &mut Option<Leg>) -> Position {
    let current = match *leg {
        Some(l) if p.dist(l.target) > 0.0 => l,
        _ => {
            let l = Leg {
                target: Position::new(rng.gen_range(0.0..domain.side), rng.gen_range(0.0..domain.side)),
                speed: rng.gen_range(s / 2.0..s),
            };
            *leg = Some(l);
            l
        }
    };
    let remaining = p.dist(current.target);
    if remaining <= current.speed {
        *leg = None;
        return current.target;
    }
    let f = current.speed / remaining;
    Position::new(p.x + f * (current.target.x - p.x), p.y + f * (current.target.y - p.y))
}

fn wrap(v: f64, side: f64) -> f64 {
    let w = v.rem_euclid(side);
    // rem_euclid can round up to `side` for tiny negative inputs
    if w >= side {
        0.0
    } else {
        w
    }
}

fn reflect(v: f64, side: f64) -> f64 {
    let period = 2.0 * side;
    let w = v.rem_euclid(period);
    let r = if w < side { w } else { period - w };
    if r >= side {
        side.next_down()
    } else {
        r
    }
}

/// Closed-form smoothness bound for nodes with radius `r_n`, speed `S`, gap
/// `tau` and initial hop distance `d`:
///
/// `max{ r d / (r d / sqrt10 - 2 sqrt10 tau S), sqrt10 (1 + 2 sqrt10 tau S / (r d)) }`.
pub fn theoretical_kappa(r_n: f64, s: f64, tau: f64, d: f64) -> Result<f64> {
    let rd = r_n * d;
    let denominator = rd / SQRT_10 - 2.0 * SQRT_10 * tau * s;
    if !(denominator > 0.0) {
        return Err(Error::Horizon { denominator });
    }
    let first = rd / denominator;
    let second = SQRT_10 * (1.0 + 2.0 * SQRT_10 * tau * s / rd);
    Ok(first.max(second))
}

/// The constant smoothness factor obtained by evaluating the bound at
/// `r_n = d = 1`, `tau = nu`. When that point lies past the horizon only the
/// second branch is finite and it is used alone.
pub fn corollary_kappa(nu: f64, s: f64) -> f64 {
    theoretical_kappa(1.0, s, nu, 1.0).unwrap_or(SQRT_10 * (1.0 + 2.0 * SQRT_10 * nu * s))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessSample {
    pub d_before: u32,
    pub d_after: u32,
    pub tau: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SmoothnessReport {
    pub samples: Vec<SmoothnessSample>,
    /// Max ratio per `(tau, bucket)`, bucket = smallest power of two >= d_before.
    pub kappa_hat: BTreeMap<(usize, u32), f64>,
    /// Pairs skipped because they were disconnected at either end of the gap.
    pub skipped: usize,
}

impl SmoothnessReport {
    fn push(&mut self, s: SmoothnessSample) {
        let key = (s.tau, s.d_before.next_power_of_two());
        let e = self.kappa_hat.entry(key).or_insert(1.0);
        *e = e.max(s.ratio);
        self.samples.push(s);
    }
}

/// Hop-distance ratios over a fixed gap `tau` for `pairs_per_step` random
/// pairs at each start step.
pub fn measure_smoothness(
    graphs: &[ConnectivityGraph],
    tau: usize,
    pairs_per_step: usize,
    seed: u64,
) -> Result<SmoothnessReport> {
    measure_smoothness_with(graphs, |_| tau, pairs_per_step, seed)
}

/// As [`measure_smoothness`] with the gap chosen from the starting distance,
/// e.g. `tau = ceil(nu * d)`.
pub fn measure_smoothness_with(
    graphs: &[ConnectivityGraph],
    tau_for: impl Fn(u32) -> usize,
    pairs_per_step: usize,
    seed: u64,
) -> Result<SmoothnessReport> {
    let Some(first) = graphs.first() else {
        return Err(Error::InvalidParameter("empty graph sequence".into()));
    };
    let n = first.n();
    if n < 2 {
        return Err(Error::InvalidParameter("smoothness needs at least two nodes".into()));
    }
    let mut rng = seeded(seed);
    let mut report = SmoothnessReport::default();
    for t in 0..graphs.len() {
        for _ in 0..pairs_per_step {
            let u = rng.gen_range(0..n) as NodeId;
            let mut v = rng.gen_range(0..n - 1) as NodeId;
            if v >= u {
                v += 1;
            }
            let Some(before) = bfs_distances(&graphs[t], u)[v as usize] else {
                report.skipped += 1;
                continue;
            };
            let tau = tau_for(before);
            if t + tau >= graphs.len() {
                continue;
            }
            let Some(after) = bfs_distances(&graphs[t + tau], u)[v as usize] else {
                report.skipped += 1;
                continue;
            };
            let (a, b) = (before as f64, after as f64);
            report.push(SmoothnessSample {
                d_before: before,
                d_after: after,
                tau,
                ratio: (a / b).max(b / a),
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sample_uniform_positions;

    fn torus(n: usize) -> DomainSpec {
        DomainSpec::for_nodes(n, BoundaryMode::Torus).unwrap()
    }

    fn run(kind: MobilityKind, s: f64, domain: DomainSpec, steps: usize) -> (Vec<Position>, Vec<Position>, f64) {
        let start = sample_uniform_positions(domain.n, &domain, 1);
        let mut pos = start.clone();
        let mut m = Mobility::new(MobilityModel::new(kind, s).unwrap(), domain, 2);
        let mut max_disp: f64 = 0.0;
        for _ in 0..steps {
            let before = pos.clone();
            m.step(&mut pos);
            for (a, b) in before.iter().zip(&pos) {
                assert!(domain.contains(*b));
                max_disp = max_disp.max(domain.distance(*a, *b));
            }
        }
        (start, pos, max_disp)
    }

    #[test]
    fn displacement_below_speed() {
        for kind in [
            MobilityKind::RandomWalk,
            MobilityKind::RandomWaypoint,
            MobilityKind::Lockstep(LockstepBase::RandomWalk),
            MobilityKind::Lockstep(LockstepBase::RandomWaypoint),
        ] {
            for boundary in [BoundaryMode::Torus, BoundaryMode::Reflect] {
                let d = DomainSpec::for_nodes(200, boundary).unwrap();
                let (_, _, max_disp) = run(kind, 1.0, d, 300);
                assert!(max_disp < 1.0, "{kind:?} {boundary:?}: {max_disp}");
            }
        }
    }

    #[test]
    fn tiny_speed_leaves_positions_in_place() {
        let (start, end, _) = run(MobilityKind::RandomWalk, 1e-9, torus(100), 10);
        for (a, b) in start.iter().zip(&end) {
            assert!(a.dist(*b) < 1e-7 || torus(100).distance(*a, *b) < 1e-7);
        }
    }

    #[test]
    fn zero_speed_is_static() {
        let (start, end, _) = run(MobilityKind::RandomWaypoint, 0.0, torus(50), 5);
        assert_eq!(start, end);
    }

    #[test]
    fn lockstep_is_an_isometry() {
        let d = torus(150);
        let (start, end, _) = run(MobilityKind::Lockstep(LockstepBase::RandomWalk), 1.0, d, 500);
        for i in 0..start.len() {
            for j in i + 1..start.len() {
                let before = d.distance(start[i], start[j]);
                let after = d.distance(end[i], end[j]);
                assert!((before - after).abs() < 1e-9, "{i},{j}: {before} vs {after}");
            }
        }
    }

    #[test]
    fn random_walk_stays_uniform() {
        let d = torus(500);
        let (_, end, _) = run(MobilityKind::RandomWalk, 1.0, d, 10_000);
        let cells = 10;
        let mut counts = vec![0f64; cells * cells];
        for p in &end {
            let i = (p.x / d.side * cells as f64) as usize;
            let j = (p.y / d.side * cells as f64) as usize;
            counts[j * cells + i] += 1.0;
        }
        let expected = end.len() as f64 / counts.len() as f64;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        // Upper 0.1% point of chi-square with 99 degrees of freedom.
        assert!(chi2 < 148.23, "chi2 = {chi2}");
    }

    #[test]
    fn reflect_folds_back() {
        assert!((reflect(-0.5, 10.0) - 0.5).abs() < 1e-12);
        assert!((reflect(10.5, 10.0) - 9.5).abs() < 1e-12);
        assert!(reflect(10.0, 10.0) < 10.0);
        assert_eq!(wrap(-1e-18, 10.0), 0.0);
    }

    #[test]
    fn kappa_at_zero_gap_is_sqrt10() {
        for (r, d) in [(1.0, 1.0), (3.0, 5.0), (0.5, 40.0)] {
            let k = theoretical_kappa(r, 1.0, 0.0, d).unwrap();
            assert!((k - SQRT_10).abs() < 1e-12);
            assert_eq!(theoretical_kappa(r, 0.0, 7.0, d).unwrap(), k);
        }
    }

    #[test]
    fn kappa_horizon() {
        assert!(matches!(theoretical_kappa(1.0, 1.0, 1.0, 1.0), Err(Error::Horizon { .. })));
    }

    #[test]
    fn corollary_constant() {
        // 1 / (1/sqrt10 - 0.02 sqrt10) against sqrt10 (1 + 0.02 sqrt10).
        let first = 1.0 / (1.0 / SQRT_10 - 0.02 * SQRT_10);
        let second = SQRT_10 * (1.0 + 0.02 * SQRT_10);
        let k = corollary_kappa(0.01, 1.0);
        assert!((k - first.max(second)).abs() < 1e-12);
        assert!((k - 3.952_847).abs() < 1e-5);
        assert!((corollary_kappa(1.0, 1.0) - (SQRT_10 + 20.0)).abs() < 1e-12);
    }

    #[test]
    fn static_sequence_has_unit_ratios() {
        let g = crate::graph::build_geometric_graph(&sample_uniform_positions(100, &torus(100), 3), 3.0).unwrap();
        let seq = vec![g; 5];
        let rep = measure_smoothness(&seq, 2, 20, 0).unwrap();
        assert!(!rep.samples.is_empty() || rep.skipped > 0);
        assert!(rep.samples.iter().all(|s| s.ratio == 1.0));
    }
}
