use std::collections::{BTreeMap, VecDeque};

use super::{FloodPacket, Membership, MembershipPacket, Mode, Protocol, RoutingEntry};
use crate::error::{Error, Result};
use crate::graph::{bfs_distances, ConnectivityGraph, Hops};
use crate::NodeId;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FloodOutcome {
    /// Every node that received the packet, with its hop count, in order of
    /// reception. The origin is not included.
    pub reached: Vec<(NodeId, u32)>,
    /// Nodes whose routing table changed.
    pub updated: usize,
    /// Broadcasts, the origin's included.
    pub transmissions: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoundStats {
    pub t: u64,
    pub gamma: Option<u32>,
    /// Nodes that took a new beacon level this round, by level, in the order
    /// they flooded.
    pub elected: Vec<Vec<NodeId>>,
    /// Number of nodes whose beacon level equals each level.
    pub beacons_per_level: Vec<usize>,
    pub membership_updates: u64,
    pub flood_transmissions: u64,
    /// Sum over membership packets of the hops they travelled.
    pub membership_hops: u64,
    pub control_packets: u64,
    pub control_bits: u64,
    pub membership_bits: u64,
    /// Membership packets received per node.
    pub load: Vec<u32>,
}

impl RoundStats {
    pub fn packets_per_node(&self) -> f64 {
        if self.load.is_empty() {
            0.0
        } else {
            self.control_packets as f64 / self.load.len() as f64
        }
    }

    pub fn max_load(&self) -> u32 {
        self.load.iter().copied().max().unwrap_or(0)
    }
}

impl Protocol {
    /// Broadcast a flood packet from `origin` that travels at most `radius`
    /// hops. A receiver writes an entry for the origin unless it already has
    /// one from this round that is at least as short, and only receivers
    /// that wrote an entry pass the packet on.
    pub fn flood(&mut self, g: &ConnectivityGraph, origin: NodeId, radius: u32, level: u32, t: u64) -> FloodOutcome {
        let parent = match self.params.mode {
            Mode::Plain => None,
            Mode::LoadBalanced => self.nodes[origin as usize]
                .memberships
                .get(level as usize + 1)
                .copied()
                .flatten()
                .map(|m| m.beacon),
        };
        let mut out = FloodOutcome::default();
        if radius == 0 {
            return out;
        }
        let mut received = vec![false; g.n()];
        received[origin as usize] = true;
        let mut queue = VecDeque::from([(origin, 0u32)]);
        while let Some((w, dw)) = queue.pop_front() {
            out.transmissions += 1;
            for &v in g.neighbors(w) {
                if received[v as usize] {
                    continue;
                }
                received[v as usize] = true;
                let d = dw + 1;
                out.reached.push((v, d));
                let table = &mut self.nodes[v as usize].routing_table;
                let keep = matches!(table.get(&origin), Some(e) if e.step == t && e.level == level && e.distance <= d);
                if keep {
                    continue;
                }
                table.insert(
                    origin,
                    RoutingEntry {
                        node_id: origin,
                        distance: d,
                        level,
                        next_hop: w,
                        step: t,
                        parent,
                    },
                );
                out.updated += 1;
                if d < radius {
                    queue.push_back((v, d));
                }
            }
        }
        out
    }

    /// One time step of beaconing on graph `g`, with nodes taking turns in
    /// the order `perm`.
    pub fn beaconing_round(&mut self, g: &ConnectivityGraph, t: u64, perm: &[NodeId]) -> Result<RoundStats> {
        let n = self.n();
        if g.n() != n || perm.len() != n {
            return Err(Error::InvalidParameter(format!(
                "round needs a graph and permutation over {n} nodes, got {} and {}",
                g.n(),
                perm.len()
            )));
        }
        let levels = self.params.levels as usize + 1;
        let gamma = self.params.gamma(t);
        if let Some(cut) = gamma {
            let cut = cut as usize;
            for s in &mut self.nodes {
                s.routing_table.retain(|_, e| e.level as usize > cut);
                for l in 0..=cut {
                    s.memberships[l] = None;
                    s.member_lists[l].clear();
                    s.lb_store[l].clear();
                }
            }
            for h in &mut self.lb_holder {
                h[..=cut].iter_mut().for_each(|x| *x = None);
            }
        }
        let mut stats = RoundStats {
            t,
            gamma,
            elected: vec![Vec::new(); levels],
            load: vec![0; n],
            ..Default::default()
        };
        let mem_bits = MembershipPacket::bits(&self.bits);
        for &u in perm {
            if let Some(cut) = gamma {
                if self.nodes[u as usize].beacon_level <= cut {
                    let h = self.nodes[u as usize].highest_uncovered();
                    if let Some(h) = h {
                        stats.elected[h as usize].push(u);
                    }
                    self.nodes[u as usize].beacon_level = h.unwrap_or(0);
                }
            }
            let beta = self.nodes[u as usize].beacon_level;
            let radius = self.params.flood_radius(beta);
            let packet = FloodPacket {
                origin: u,
                hop_count: 0,
                level: beta,
                parent: None,
            };
            let outcome = self.flood(g, u, radius, beta, t);
            let flood_bits = match self.params.mode {
                Mode::Plain => packet.bits(&self.bits),
                Mode::LoadBalanced => FloodPacket { parent: Some(u), ..packet }.bits(&self.bits),
            };
            stats.flood_transmissions += outcome.transmissions;
            stats.control_bits += outcome.transmissions * flood_bits;
            for (v, d) in std::iter::once((u, 0)).chain(outcome.reached.iter().copied()) {
                let lowest = lowest_level_within(d);
                for l in lowest..=beta {
                    if self.nodes[v as usize].memberships[l as usize].is_some() {
                        continue;
                    }
                    self.join(v, u, l, d, t)?;
                    stats.membership_updates += 1;
                    if d > 0 && (self.params.mode == Mode::Plain || l == 0) {
                        stats.membership_hops += d as u64;
                        stats.membership_bits += d as u64 * mem_bits;
                        stats.load[u as usize] += 1;
                    }
                }
            }
        }
        if self.params.mode == Mode::LoadBalanced {
            self.place_lb_identifiers(g, t, &mut stats)?;
        }
        stats.control_bits += stats.membership_bits;
        stats.control_packets = stats.flood_transmissions + stats.membership_hops;
        stats.beacons_per_level = vec![0; levels];
        for s in &self.nodes {
            stats.beacons_per_level[s.beacon_level as usize] += 1;
        }
        self.rounds += 1;
        Ok(stats)
    }

    /// Register `v` with beacon `u` at `level`. The membership packet walks
    /// the reverse flood path and leaves forward state toward `v` behind.
    fn join(&mut self, v: NodeId, u: NodeId, level: u32, d: u32, t: u64) -> Result<()> {
        self.nodes[v as usize].memberships[level as usize] = Some(Membership {
            beacon: u,
            registered_distance: d,
            registration_time: t,
        });
        self.nodes[u as usize].member_lists[level as usize].insert(v);
        if self.params.mode == Mode::LoadBalanced && level > 0 {
            return Ok(());
        }
        if self.params.mode == Mode::LoadBalanced {
            self.nodes[u as usize].lb_store[0].insert((v, u));
            self.lb_holder[v as usize][0] = Some(u);
        }
        let mut w = v;
        let mut hops = 0;
        while w != u {
            let Some(entry) = self.nodes[w as usize].routing_table.get(&u) else {
                return Err(Error::InvariantViolation(format!("membership of {v} stuck at {w}: no route to beacon {u}")));
            };
            let next = entry.next_hop;
            self.nodes[next as usize].forward_state.insert(v, w);
            w = next;
            hops += 1;
            if hops > d {
                return Err(Error::InvariantViolation(format!("membership path {v} -> {u} longer than {d}")));
            }
        }
        Ok(())
    }

    /// Identifier-closest descent from beacon `b` at `level`: at each level
    /// below, move to the sub-beacon of the current head that is closest to
    /// `v` on the identifier ring. Returns the heads visited, `b` first.
    pub fn lb_chain(&self, v: NodeId, b: NodeId, level: u32) -> Vec<NodeId> {
        let heads = self.sub_heads();
        chain_with(&heads, self.n(), v, b, level)
    }

    pub(super) fn sub_heads(&self) -> Vec<BTreeMap<NodeId, Vec<NodeId>>> {
        let levels = self.params.levels as usize;
        let mut heads = vec![BTreeMap::<NodeId, Vec<NodeId>>::new(); levels];
        for (c, s) in self.nodes.iter().enumerate() {
            for (l, map) in heads.iter_mut().enumerate() {
                if (s.beacon_level as usize) < l {
                    continue;
                }
                if let Some(m) = s.memberships[l + 1] {
                    map.entry(m.beacon).or_default().push(c as NodeId);
                }
            }
        }
        heads
    }

    /// Place every identifier at the terminus of its chain, charging new
    /// registrations from the member and moved identifiers from their old
    /// holder.
    fn place_lb_identifiers(&mut self, g: &ConnectivityGraph, t: u64, stats: &mut RoundStats) -> Result<()> {
        let n = self.n();
        let heads = self.sub_heads();
        let mem_bits = MembershipPacket::bits(&self.bits);
        let mut bfs_cache: BTreeMap<NodeId, Vec<Hops>> = BTreeMap::new();
        for s in &mut self.nodes {
            s.lb_store.iter_mut().skip(1).for_each(|x| x.clear());
        }
        for v in 0..n as NodeId {
            for l in 1..=self.params.levels {
                let m = self.nodes[v as usize].memberships[l as usize]
                    .ok_or_else(|| Error::InvariantViolation(format!("node {v} uncovered at level {l}")))?;
                let chain = chain_with(&heads, n, v, m.beacon, l);
                let holder = *chain.last().unwrap_or(&m.beacon);
                let previous = self.lb_holder[v as usize][l as usize];
                let hops = if m.registration_time == t && previous.is_none() {
                    let mut legs = vec![v];
                    legs.extend(chain.iter().skip(if chain.len() > 1 { 1 } else { 0 }));
                    Some(self.path_cost(g, &legs, t, &mut bfs_cache)?)
                } else {
                    match previous {
                        Some(p) if p != holder => Some(self.path_cost(g, &[p, holder], t, &mut bfs_cache)?),
                        _ => None,
                    }
                };
                if let Some(h) = hops {
                    stats.membership_hops += h as u64;
                    stats.membership_bits += h as u64 * mem_bits;
                    stats.load[holder as usize] += 1;
                }
                self.lb_holder[v as usize][l as usize] = Some(holder);
                self.nodes[holder as usize].lb_store[l as usize].insert((v, m.beacon));
            }
        }
        Ok(())
    }

    /// Hops along consecutive legs, each measured by the routing table when
    /// it has a fresh entry and by BFS otherwise.
    fn path_cost(
        &self,
        g: &ConnectivityGraph,
        legs: &[NodeId],
        t: u64,
        cache: &mut BTreeMap<NodeId, Vec<Hops>>,
    ) -> Result<u32> {
        let mut total = 0;
        for w in legs.windows(2) {
            let (a, b) = (w[0], w[1]);
            if a == b {
                continue;
            }
            let fresh = self.nodes[a as usize].routing_table.get(&b).filter(|e| e.step == t);
            total += match fresh {
                Some(e) => e.distance,
                None => cache.entry(a).or_insert_with(|| bfs_distances(g, a))[b as usize]
                    .ok_or(Error::Unreachable { from: a, dest: b })?,
            };
        }
        Ok(total)
    }

    /// Beacons elected at level `i` in one round are more than `2^i` apart.
    pub fn check_beacon_separation(&self, g: &ConnectivityGraph, stats: &RoundStats) -> Result<()> {
        for (l, beacons) in stats.elected.iter().enumerate() {
            let r = 1u32 << l;
            for (k, &a) in beacons.iter().enumerate() {
                if k + 1 == beacons.len() {
                    break;
                }
                let d = bfs_distances(g, a);
                for &b in &beacons[k + 1..] {
                    if matches!(d[b as usize], Some(x) if x <= r) {
                        return Err(Error::InvariantViolation(format!(
                            "level-{l} beacons {a} and {b} are within {r} hops"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Smallest `j` with `d <= 2^j`.
fn lowest_level_within(d: u32) -> u32 {
    if d <= 1 {
        0
    } else {
        32 - (d - 1).leading_zeros()
    }
}

/// Distance on the identifier ring `[0, n)`.
fn ring_distance(a: NodeId, b: NodeId, n: usize) -> u64 {
    let d = (a as i64 - b as i64).unsigned_abs();
    d.min(n as u64 - d)
}

fn closest_id(candidates: &[NodeId], v: NodeId, n: usize) -> Option<NodeId> {
    candidates.iter().copied().min_by_key(|&c| (ring_distance(c, v, n), c))
}

pub(super) fn chain_with(heads: &[BTreeMap<NodeId, Vec<NodeId>>], n: usize, v: NodeId, b: NodeId, level: u32) -> Vec<NodeId> {
    let mut chain = vec![b];
    let mut head = b;
    for l in (0..level as usize).rev() {
        let Some(next) = heads[l].get(&head).and_then(|c| closest_id(c, v, n)) else {
            break;
        };
        chain.push(next);
        head = next;
    }
    chain
}
