//! Hierarchical beacon routing: flood and probe procedures, beaconing rounds
//! that elect beacons and register memberships, and forwarding by
//! upstream/downstream probing. A load-balanced variant stores member
//! identifiers along identifier-closest chains instead of at the beacon.

mod beaconing;
mod forwarding;

pub use beaconing::{FloodOutcome, RoundStats};
pub use forwarding::{ForwardOutcome, ProbeOutcome};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Plain,
    LoadBalanced,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Mode::Plain),
            "load_balanced" | "lb" => Ok(Mode::LoadBalanced),
            other => Err(Error::Config(format!("unknown protocol mode `{other}`"))),
        }
    }
}

/// Field widths in bits, fixed per run from `n` and `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketBits {
    pub pkt_type: u32,
    pub id: u32,
    pub hop_count: u32,
    pub level: u32,
    pub success: u32,
}

impl PacketBits {
    pub fn new(n: usize, levels: u32) -> Self {
        let bits = |x: usize| (usize::BITS - x.saturating_sub(1).leading_zeros()).max(1);
        Self {
            pkt_type: 4,
            id: bits(n),
            hop_count: bits(n),
            level: bits(levels as usize + 1),
            success: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FloodPacket {
    pub origin: NodeId,
    pub hop_count: u32,
    pub level: u32,
    /// Load-balanced mode: the origin's beacon one level up.
    pub parent: Option<NodeId>,
}

impl FloodPacket {
    pub fn bits(&self, b: &PacketBits) -> u64 {
        let parent = if self.parent.is_some() { b.id } else { 0 };
        (b.pkt_type + b.id + b.hop_count + b.level + parent) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbePacket {
    pub relay: NodeId,
    pub dest: NodeId,
    pub success: bool,
}

impl ProbePacket {
    pub fn bits(b: &PacketBits) -> u64 {
        (b.pkt_type + 2 * b.id + b.success) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MembershipPacket {
    pub node: NodeId,
    pub beacon: NodeId,
    pub level: u32,
}

impl MembershipPacket {
    pub fn bits(b: &PacketBits) -> u64 {
        (b.pkt_type + 2 * b.id + b.level) as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    pub kappa: f64,
    /// Level `j` memberships are renewed every `nu * 2^j` steps.
    pub nu: f64,
    /// Highest level `L`; levels run `0..=L`.
    pub levels: u32,
    pub mode: Mode,
}

impl ProtocolParams {
    pub fn new(kappa: f64, nu: f64, levels: u32, mode: Mode) -> Result<Self> {
        if !(kappa >= 1.0) || !kappa.is_finite() {
            return Err(Error::InvalidParameter(format!("kappa must be finite and >= 1, got {kappa}")));
        }
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(Error::InvalidParameter(format!("nu must be finite and > 0, got {nu}")));
        }
        if levels > 30 {
            return Err(Error::InvalidParameter(format!("level count {levels} too large")));
        }
        Ok(Self { kappa, nu, levels, mode })
    }

    /// `L = ceil(log2(diameter))`, at least 0.
    pub fn levels_for_diameter(diameter: u32) -> u32 {
        if diameter <= 1 {
            0
        } else {
            32 - (diameter - 1).leading_zeros()
        }
    }

    pub fn cover_radius(&self, level: u32) -> u32 {
        1 << level
    }

    /// `kappa * (r_{i+1} + r_i)`, or `kappa * (2 r_{i+1} + r_i)` when load
    /// balancing.
    pub fn flood_radius(&self, level: u32) -> u32 {
        let factor = match self.mode {
            Mode::Plain => 3.0,
            Mode::LoadBalanced => 5.0,
        };
        (self.kappa * factor * (1u64 << level) as f64).floor() as u32
    }

    /// Highest level renewed at step `t`: `max{j <= L : t mod nu 2^j = 0}`.
    pub fn gamma(&self, t: u64) -> Option<u32> {
        (0..=self.levels).rev().find(|&j| {
            let period = self.nu * (1u64 << j) as f64;
            let r = (t as f64) % period;
            r.min(period - r) < 1e-9 * period.max(1.0)
        })
    }

    /// Worst-case route length over shortest-path length.
    pub fn stretch_bound(&self) -> f64 {
        let plain = 6.0 * self.kappa * self.kappa;
        match self.mode {
            Mode::Plain => plain,
            Mode::LoadBalanced => 2.0 * plain,
        }
    }

    /// `mu = (3 kappa^2)^(2 log2 alpha)`.
    pub fn probe_factor(&self, alpha_hat: f64) -> f64 {
        (3.0 * self.kappa * self.kappa).powf(2.0 * alpha_hat.max(1.0).log2())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoutingEntry {
    pub node_id: NodeId,
    pub distance: u32,
    pub level: u32,
    pub next_hop: NodeId,
    /// Round in which the entry was written.
    pub step: u64,
    pub parent: Option<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Membership {
    pub beacon: NodeId,
    pub registered_distance: u32,
    pub registration_time: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeProtocolState {
    pub beacon_level: u32,
    /// Indexed by level.
    pub memberships: Vec<Option<Membership>>,
    /// Nodes registered with this node as their beacon, per level.
    pub member_lists: Vec<BTreeSet<NodeId>>,
    pub routing_table: BTreeMap<NodeId, RoutingEntry>,
    /// Next hop toward a member, installed by membership packets.
    pub forward_state: BTreeMap<NodeId, NodeId>,
    /// Load-balanced mode: `(member, beacon)` pairs held per level.
    pub lb_store: Vec<BTreeSet<(NodeId, NodeId)>>,
}

impl NodeProtocolState {
    fn new(levels: u32) -> Self {
        let k = levels as usize + 1;
        Self {
            beacon_level: 0,
            memberships: vec![None; k],
            member_lists: vec![BTreeSet::new(); k],
            routing_table: BTreeMap::new(),
            forward_state: BTreeMap::new(),
            lb_store: vec![BTreeSet::new(); k],
        }
    }

    /// Highest level without a membership.
    pub fn highest_uncovered(&self) -> Option<u32> {
        self.memberships.iter().rposition(Option::is_none).map(|l| l as u32)
    }

    /// Lowest level at which this node keeps `dest` in a member list.
    fn holds(&self, dest: NodeId) -> Option<u32> {
        self.member_lists.iter().position(|m| m.contains(&dest)).map(|l| l as u32)
    }
}

/// Global protocol state of all nodes.
#[derive(Debug, Clone)]
pub struct Protocol {
    params: ProtocolParams,
    bits: PacketBits,
    nodes: Vec<NodeProtocolState>,
    /// Load-balanced mode: current holder of each node's identifier, per level.
    lb_holder: Vec<Vec<Option<NodeId>>>,
    rounds: u64,
}

impl Protocol {
    pub fn new(n: usize, params: ProtocolParams) -> Self {
        Self {
            bits: PacketBits::new(n, params.levels),
            nodes: (0..n).map(|_| NodeProtocolState::new(params.levels)).collect(),
            lb_holder: vec![vec![None; params.levels as usize + 1]; n],
            params,
            rounds: 0,
        }
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn bits(&self) -> &PacketBits {
        &self.bits
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, u: NodeId) -> &NodeProtocolState {
        &self.nodes[u as usize]
    }

    pub fn nodes(&self) -> &[NodeProtocolState] {
        &self.nodes
    }

    /// Holder of `u`'s identifier at `level` (load-balanced mode).
    pub fn lb_holder(&self, u: NodeId, level: u32) -> Option<NodeId> {
        self.lb_holder[u as usize][level as usize]
    }

    /// Every node has a membership at every level.
    pub fn check_cover_completeness(&self) -> Result<()> {
        for (u, s) in self.nodes.iter().enumerate() {
            if let Some(l) = s.memberships.iter().position(Option::is_none) {
                return Err(Error::InvariantViolation(format!("node {u} has no membership at level {l}")));
            }
        }
        Ok(())
    }

    /// Member lists and memberships describe the same relation, so each
    /// node sits in exactly one cluster per level.
    pub fn check_single_membership(&self) -> Result<()> {
        let levels = self.params.levels as usize + 1;
        let mut seen = vec![vec![0u32; levels]; self.n()];
        for (b, s) in self.nodes.iter().enumerate() {
            for (l, members) in s.member_lists.iter().enumerate() {
                for &v in members {
                    seen[v as usize][l] += 1;
                    let m = self.nodes[v as usize].memberships[l];
                    if m.map(|m| m.beacon) != Some(b as NodeId) {
                        return Err(Error::InvariantViolation(format!(
                            "beacon {b} lists {v} at level {l} but its membership is {m:?}"
                        )));
                    }
                }
            }
        }
        for (v, counts) in seen.iter().enumerate() {
            for (l, &c) in counts.iter().enumerate() {
                if self.nodes[v].memberships[l].is_some() && c != 1 {
                    return Err(Error::InvariantViolation(format!("node {v} listed {c} times at level {l}")));
                }
            }
        }
        Ok(())
    }

    /// Load-balanced mode: every identifier is stored exactly once per level,
    /// at its recorded holder.
    pub fn check_lb_store(&self) -> Result<()> {
        if self.params.mode != Mode::LoadBalanced {
            return Ok(());
        }
        let levels = self.params.levels as usize + 1;
        let mut count = vec![vec![0u32; levels]; self.n()];
        for (h, s) in self.nodes.iter().enumerate() {
            for (l, held) in s.lb_store.iter().enumerate() {
                for &(v, b) in held {
                    count[v as usize][l] += 1;
                    if self.lb_holder[v as usize][l] != Some(h as NodeId) {
                        return Err(Error::InvariantViolation(format!("node {h} holds {v} at level {l} unexpectedly")));
                    }
                    if self.nodes[v as usize].memberships[l].map(|m| m.beacon) != Some(b) {
                        return Err(Error::InvariantViolation(format!("stale beacon {b} for {v} at level {l}")));
                    }
                }
            }
        }
        for (v, c) in count.iter().enumerate() {
            if let Some(l) = c.iter().position(|&c| c != 1) {
                return Err(Error::InvariantViolation(format!("identifier {v} held {} times at level {l}", c[l])));
            }
        }
        Ok(())
    }

    /// Per-node audit dump: `node_id,beta,memberships,table_size`, with
    /// memberships as `level:beacon` pairs joined by `;`.
    pub fn snapshot_csv(&self) -> String {
        let mut out = String::from("node_id,beta,memberships,table_size\n");
        for (u, s) in self.nodes.iter().enumerate() {
            let ms: Vec<String> = s
                .memberships
                .iter()
                .enumerate()
                .filter_map(|(l, m)| m.map(|m| format!("{l}:{}", m.beacon)))
                .collect();
            let _ = writeln!(out, "{u},{},{},{}", s.beacon_level, ms.join(";"), s.routing_table.len());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radii() {
        let p = ProtocolParams::new(1.0, 1.0, 5, Mode::Plain).unwrap();
        assert_eq!(p.cover_radius(3), 8);
        assert_eq!(p.flood_radius(0), 3);
        assert_eq!(p.flood_radius(3), 24);
        let lb = ProtocolParams::new(1.5, 1.0, 5, Mode::LoadBalanced).unwrap();
        assert_eq!(lb.flood_radius(2), 30);
        for l in 0..=5 {
            assert!(p.flood_radius(l) > p.cover_radius(l));
        }
        assert!(ProtocolParams::new(0.5, 1.0, 3, Mode::Plain).is_err());
        assert!(ProtocolParams::new(1.0, 0.0, 3, Mode::Plain).is_err());
    }

    #[test]
    fn levels_from_diameter() {
        assert_eq!(ProtocolParams::levels_for_diameter(0), 0);
        assert_eq!(ProtocolParams::levels_for_diameter(1), 0);
        assert_eq!(ProtocolParams::levels_for_diameter(2), 1);
        assert_eq!(ProtocolParams::levels_for_diameter(17), 5);
        assert_eq!(ProtocolParams::levels_for_diameter(32), 5);
        assert_eq!(ProtocolParams::levels_for_diameter(33), 6);
    }

    #[test]
    fn gamma_schedule() {
        let p = ProtocolParams::new(1.0, 1.0, 4, Mode::Plain).unwrap();
        assert_eq!(p.gamma(0), Some(4));
        assert_eq!(p.gamma(1), Some(0));
        assert_eq!(p.gamma(2), Some(1));
        assert_eq!(p.gamma(12), Some(2));
        assert_eq!(p.gamma(48), Some(4));
        let slow = ProtocolParams::new(1.0, 3.0, 2, Mode::Plain).unwrap();
        assert_eq!(slow.gamma(1), None);
        assert_eq!(slow.gamma(6), Some(1));
        let fast = ProtocolParams::new(1.0, 0.25, 3, Mode::Plain).unwrap();
        assert_eq!(fast.gamma(1), Some(2));
        assert_eq!(fast.gamma(2), Some(3));
    }

    #[test]
    fn packet_widths() {
        let b = PacketBits::new(1000, 5);
        assert_eq!((b.id, b.hop_count, b.level), (10, 10, 3));
        assert_eq!(PacketBits::new(1024, 0).id, 10);
        assert_eq!(PacketBits::new(1025, 0).id, 11);
        assert_eq!(PacketBits::new(1, 0).id, 1);
        assert_eq!(MembershipPacket::bits(&b), 4 + 20 + 3);
        assert_eq!(ProbePacket::bits(&b), 4 + 20 + 1);
        let f = FloodPacket { origin: 0, hop_count: 0, level: 1, parent: None };
        assert_eq!(f.bits(&b), 4 + 10 + 10 + 3);
    }

    #[test]
    fn stretch_and_probe_bounds() {
        let p = ProtocolParams::new(2.0, 1.0, 3, Mode::Plain).unwrap();
        assert_eq!(p.stretch_bound(), 24.0);
        assert_eq!(p.probe_factor(1.0), 1.0);
        assert!((p.probe_factor(2.0) - 144.0).abs() < 1e-9);
    }
}
