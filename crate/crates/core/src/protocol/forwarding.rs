use std::collections::{BTreeMap, BTreeSet};

use super::beaconing::chain_with;
use super::{Mode, Protocol};
use crate::error::{Error, Result};
use crate::graph::{bfs_distances, ConnectivityGraph};
use crate::NodeId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProbeOutcome {
    /// The relay answered; a negative answer travelled back on the reverse
    /// path.
    Answered {
        success: bool,
        path: Vec<NodeId>,
        transmissions: u64,
    },
    /// The packet hit a node with no usable next hop toward the relay.
    Broken {
        at: NodeId,
        path: Vec<NodeId>,
        transmissions: u64,
    },
}

impl ProbeOutcome {
    pub fn transmissions(&self) -> u64 {
        match self {
            ProbeOutcome::Answered { transmissions, .. } | ProbeOutcome::Broken { transmissions, .. } => *transmissions,
        }
    }

    pub fn path(&self) -> &[NodeId] {
        match self {
            ProbeOutcome::Answered { path, .. } | ProbeOutcome::Broken { path, .. } => path,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ForwardOutcome {
    /// Source to destination inclusive; empty when they coincide.
    pub route: Vec<NodeId>,
    pub route_hops: u32,
    pub probe_transmissions: u64,
    pub probes: u32,
    pub broken_probes: u32,
    /// Level at which the upstream phase found the destination.
    pub found_level: Option<u32>,
}

/// Reverse pointers toward the searching source, first writer wins.
#[derive(Debug, Default)]
struct Trail {
    source: NodeId,
    back: BTreeMap<NodeId, NodeId>,
}

impl Trail {
    fn record(&mut self, path: &[NodeId]) {
        for w in path.windows(2) {
            if w[1] != self.source {
                self.back.entry(w[1]).or_insert(w[0]);
            }
        }
    }

    /// Walk the pointers back from `dest`. Each pointer leads to a node
    /// reached strictly earlier, so the walk ends at the source.
    fn route_to(&self, dest: NodeId) -> Result<Vec<NodeId>> {
        let mut route = vec![dest];
        let mut w = dest;
        while w != self.source {
            w = *self
                .back
                .get(&w)
                .ok_or_else(|| Error::InvariantViolation(format!("no reverse pointer at {w}")))?;
            route.push(w);
            if route.len() > self.back.len() + 1 {
                return Err(Error::InvariantViolation("reverse pointers form a loop".into()));
            }
        }
        route.reverse();
        Ok(route)
    }
}

struct Search {
    trail: Trail,
    out: ForwardOutcome,
}

impl Search {
    fn new(source: NodeId) -> Self {
        Self {
            trail: Trail {
                source,
                back: BTreeMap::new(),
            },
            out: ForwardOutcome::default(),
        }
    }

    /// Account for one probe; returns the path when it reached its target.
    fn charge(&mut self, walk: std::result::Result<Vec<NodeId>, (Vec<NodeId>, NodeId)>, positive: bool) -> Option<Vec<NodeId>> {
        self.out.probes += 1;
        match walk {
            Ok(path) => {
                self.trail.record(&path);
                let hops = (path.len() - 1) as u64;
                self.out.probe_transmissions += if positive { hops } else { 2 * hops };
                Some(path)
            }
            Err((path, _)) => {
                self.trail.record(&path);
                self.out.probe_transmissions += 2 * (path.len() - 1) as u64;
                self.out.broken_probes += 1;
                None
            }
        }
    }
}

impl Protocol {
    /// Follow routing entries from `start`, heading for the furthest of
    /// `targets` the current node knows a route to, until the last target is
    /// reached. On failure returns the partial path and the stuck node.
    fn walk(
        &self,
        g: &ConnectivityGraph,
        start: NodeId,
        targets: &[NodeId],
    ) -> std::result::Result<Vec<NodeId>, (Vec<NodeId>, NodeId)> {
        let last = *targets.last().expect("walk needs a target");
        let mut path = vec![start];
        let mut cur = start;
        let mut idx = 0;
        while cur != last {
            if let Some(k) = targets[idx..].iter().rposition(|&x| x == cur) {
                idx += k + 1;
            }
            let table = &self.nodes[cur as usize].routing_table;
            let Some(entry) = (idx..targets.len()).rev().find_map(|k| table.get(&targets[k])) else {
                return Err((path, cur));
            };
            if !g.has_edge(cur, entry.next_hop) || path.len() > g.n() {
                return Err((path, cur));
            }
            cur = entry.next_hop;
            path.push(cur);
        }
        Ok(path)
    }

    /// Send a probe for `dest` from `source` to `relay`. Success means the
    /// relay is `dest` or keeps `dest`'s identifier (in a member list, or in
    /// its load-balanced store).
    pub fn probe(&self, g: &ConnectivityGraph, source: NodeId, relay: NodeId, dest: NodeId) -> ProbeOutcome {
        if source == relay {
            return ProbeOutcome::Answered {
                success: self.keeps(relay, dest),
                path: vec![source],
                transmissions: 0,
            };
        }
        match self.walk(g, source, &[relay]) {
            Ok(path) => {
                let success = self.keeps(relay, dest);
                let hops = (path.len() - 1) as u64;
                ProbeOutcome::Answered {
                    success,
                    transmissions: if success { hops } else { 2 * hops },
                    path,
                }
            }
            Err((path, at)) => ProbeOutcome::Broken {
                at,
                transmissions: 2 * (path.len() - 1) as u64,
                path,
            },
        }
    }

    fn keeps(&self, relay: NodeId, dest: NodeId) -> bool {
        let s = &self.nodes[relay as usize];
        if relay == dest {
            return true;
        }
        match self.params.mode {
            Mode::Plain => s.holds(dest).is_some(),
            Mode::LoadBalanced => s.lb_store.iter().any(|l| l.iter().any(|&(v, _)| v == dest)),
        }
    }

    /// Relays known to `u` at `level` or above within the level's flood
    /// radius, nearest first.
    fn known_relays(&self, u: NodeId, level: u32) -> Vec<NodeId> {
        let radius = self.params.flood_radius(level);
        let mut relays: Vec<(u32, NodeId)> = self.nodes[u as usize]
            .routing_table
            .values()
            .filter(|e| e.level >= level && e.distance <= radius)
            .map(|e| (e.distance, e.node_id))
            .collect();
        relays.sort_unstable();
        relays.into_iter().map(|(_, r)| r).collect()
    }

    fn missing(&self, g: &ConnectivityGraph, source: NodeId, dest: NodeId, what: &str) -> Error {
        if bfs_distances(g, source)[dest as usize].is_none() {
            Error::Unreachable { from: source, dest }
        } else {
            Error::InvariantViolation(format!("{what} while routing {source} -> {dest}"))
        }
    }

    /// Route from `source` to `dest` using the current tables: probe known
    /// beacons level by level until one keeps `dest`, then descend through
    /// lower-level beacons to `dest`. Dispatches on the protocol mode.
    pub fn forward(&self, g: &ConnectivityGraph, source: NodeId, dest: NodeId) -> Result<ForwardOutcome> {
        if self.params.mode == Mode::LoadBalanced {
            return self.lb_forward(g, source, dest);
        }
        if source == dest {
            return Ok(ForwardOutcome::default());
        }
        let mut search = Search::new(source);
        let mut holder = self.nodes[source as usize].holds(dest).map(|l| (l, 0, source));
        let mut probed = BTreeSet::new();
        for j in 0..=self.params.levels {
            if holder.is_some() {
                break;
            }
            for r in self.known_relays(source, j) {
                if !probed.insert(r) {
                    continue;
                }
                // The destination answers a probe for itself.
                let kept = if r == dest { Some(0) } else { self.nodes[r as usize].holds(dest) };
                if let Some(path) = search.charge(self.walk(g, source, &[r]), kept.is_some()) {
                    if let Some(l) = kept {
                        let cand = (l, if r == dest { 0 } else { (path.len() - 1) as u32 }, r);
                        holder = Some(holder.map_or(cand, |h: (u32, u32, NodeId)| h.min(cand)));
                    }
                }
            }
            if holder.is_some() {
                search.out.found_level = Some(j);
            }
        }
        let Some((mut m, _, mut h)) = holder else {
            return Err(self.missing(g, source, dest, "no beacon keeps the destination"));
        };
        while m > 0 {
            let mut best: Option<(u32, u32, NodeId)> = None;
            for r in self.known_relays(h, m - 1) {
                let kept = self.nodes[r as usize].holds(dest).filter(|&l| l < m);
                if let Some(path) = search.charge(self.walk(g, h, &[r]), kept.is_some()) {
                    if let Some(l) = kept {
                        let cand = (l, (path.len() - 1) as u32, r);
                        best = Some(best.map_or(cand, |b| b.min(cand)));
                    }
                }
            }
            let Some((l, _, r)) = best else {
                return Err(self.missing(g, source, dest, &format!("no level-{} beacon below {h} keeps the destination", m - 1)));
            };
            m = l;
            h = r;
        }
        self.final_leg(g, &mut search, h, dest)?;
        search.finish(dest)
    }

    /// Last leg from the level-0 beacon to the destination: the
    /// destination's own flood entry, or forward state left by its
    /// membership packet.
    fn final_leg(&self, g: &ConnectivityGraph, search: &mut Search, h: NodeId, dest: NodeId) -> Result<()> {
        if h == dest {
            return Ok(());
        }
        let path = match self.walk(g, h, &[dest]) {
            Ok(p) => p,
            Err(_) => {
                let mut path = vec![h];
                let mut w = h;
                while w != dest {
                    let next = self.nodes[w as usize].forward_state.get(&dest).copied();
                    match next {
                        Some(x) if g.has_edge(w, x) && path.len() <= g.n() => {
                            w = x;
                            path.push(x);
                        }
                        _ => return Err(self.missing(g, search.trail.source, dest, "final leg broken")),
                    }
                }
                path
            }
        };
        search.trail.record(&path);
        search.out.probe_transmissions += (path.len() - 1) as u64;
        Ok(())
    }

    /// Load-balanced forwarding: instead of a beacon, each probe goes to the
    /// node of the beacon's cluster that should hold the destination's
    /// identifier, found by the same identifier-closest descent used for
    /// registration.
    pub fn lb_forward(&self, g: &ConnectivityGraph, source: NodeId, dest: NodeId) -> Result<ForwardOutcome> {
        if self.params.mode != Mode::LoadBalanced {
            return Err(Error::InvalidParameter("lb_forward needs load-balanced mode".into()));
        }
        if source == dest {
            return Ok(ForwardOutcome::default());
        }
        let heads = self.sub_heads();
        let stores = |t: NodeId, l: u32, b: NodeId| self.nodes[t as usize].lb_store[l as usize].contains(&(dest, b));
        let chain = |b: NodeId, l: u32| -> Vec<NodeId> { chain_with(&heads, self.n(), dest, b, l) };
        let mut search = Search::new(source);
        let mut found: Option<(u32, NodeId)> = None;
        let mut probed = BTreeSet::new();
        for j in 0..=self.params.levels {
            let mut beacons = self.known_relays(source, j);
            if self.nodes[source as usize].beacon_level >= j {
                beacons.insert(0, source);
            }
            for b in beacons {
                if !probed.insert((b, j)) {
                    continue;
                }
                let c = chain(b, j);
                let terminus = *c.last().unwrap_or(&b);
                let hit = stores(terminus, j, b);
                if search.charge(self.walk_or_stay(g, source, &c), hit).is_some() && hit && found.is_none() {
                    found = Some((j, terminus));
                }
            }
            if found.is_some() {
                search.out.found_level = Some(j);
                break;
            }
        }
        let Some((mut m, mut h)) = found else {
            return Err(self.missing(g, source, dest, "no chain terminus keeps the destination"));
        };
        while m > 0 {
            let mut next = None;
            let mut beacons = self.known_relays(h, m - 1);
            if self.nodes[h as usize].beacon_level >= m - 1 {
                beacons.insert(0, h);
            }
            for b in beacons {
                let c = chain(b, m - 1);
                let terminus = *c.last().unwrap_or(&b);
                let hit = stores(terminus, m - 1, b);
                if search.charge(self.walk_or_stay(g, h, &c), hit).is_some() && hit && next.is_none() {
                    next = Some(terminus);
                }
            }
            let Some(t) = next else {
                return Err(self.missing(g, source, dest, &format!("no level-{} holder below {h}", m - 1)));
            };
            h = t;
            m -= 1;
        }
        self.final_leg(g, &mut search, h, dest)?;
        search.finish(dest)
    }

    fn walk_or_stay(
        &self,
        g: &ConnectivityGraph,
        start: NodeId,
        targets: &[NodeId],
    ) -> std::result::Result<Vec<NodeId>, (Vec<NodeId>, NodeId)> {
        if targets.last() == Some(&start) {
            Ok(vec![start])
        } else {
            self.walk(g, start, targets)
        }
    }
}

impl Search {
    fn finish(self, dest: NodeId) -> Result<ForwardOutcome> {
        let route = self.trail.route_to(dest)?;
        Ok(ForwardOutcome {
            route_hops: (route.len() - 1) as u32,
            route,
            ..self.out
        })
    }
}
