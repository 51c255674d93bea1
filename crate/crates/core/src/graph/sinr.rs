use super::{build_geometric_graph, ConnectivityGraph};
use crate::error::{Error, Result};
use crate::geometry::{Position, DEFAULT_SQUARELET_C};
use crate::NodeId;

/// Physical-layer parameters for SINR connectivity under the `k^2`-slot
/// squarelet TDMA schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrParams {
    pub transmit_power: f64,
    pub noise: f64,
    /// Distance decay exponent; must exceed 2 for the interference sum to
    /// converge.
    pub path_loss_exponent: f64,
    pub threshold: f64,
    pub tdma_k: usize,
    pub squarelet_c: f64,
}

impl SinrParams {
    /// Power chosen so that an interference-free link closes exactly at
    /// distance `r_n`.
    pub fn for_range(r_n: f64, noise: f64, threshold: f64, path_loss_exponent: f64) -> Self {
        Self {
            transmit_power: noise * threshold * r_n.powf(path_loss_exponent),
            noise,
            path_loss_exponent,
            threshold,
            tdma_k: 4,
            squarelet_c: DEFAULT_SQUARELET_C,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.path_loss_exponent > 2.0) {
            return Err(Error::InvalidParameter(format!(
                "path loss exponent {} must exceed 2",
                self.path_loss_exponent
            )));
        }
        if !(self.threshold > 0.0) || !(self.transmit_power > 0.0) || self.noise < 0.0 || self.tdma_k == 0 {
            return Err(Error::InvalidParameter(format!("invalid SINR parameters {self:?}")));
        }
        Ok(())
    }

    /// Interference-free range `(P / (N0 * threshold))^(1/beta)`.
    pub fn nominal_range(&self) -> f64 {
        (self.transmit_power / (self.noise * self.threshold)).powf(1.0 / self.path_loss_exponent)
    }

    fn cell_side(&self) -> f64 {
        self.nominal_range() / self.squarelet_c
    }
}

/// SINR at `v` for a transmission from `u`, with the given concurrent
/// transmitters.
pub fn sinr(params: &SinrParams, u: Position, v: Position, interferers: &[Position]) -> f64 {
    let gain = |a: Position| params.transmit_power * a.dist(v).powf(-params.path_loss_exponent);
    let interference: f64 = interferers.iter().map(|&w| gain(w)).sum();
    gain(u) / (params.noise + interference)
}

/// Connectivity graph where `{u, v}` is an edge iff the link closes in both
/// directions during the transmitter's TDMA slot.
///
/// In the slot of the transmitter's squarelet, every other squarelet with the
/// same coordinates mod `k` holds one active transmitter, placed worst-case
/// at the node of that squarelet nearest the receiver.
pub fn build_sinr_graph(positions: &[Position], params: &SinrParams) -> Result<ConnectivityGraph> {
    params.validate()?;
    let n = positions.len();
    if n == 0 {
        return Ok(ConnectivityGraph::empty(0));
    }
    let side = params.cell_side();
    let cell = |p: Position| ((p.x / side).floor() as i64, (p.y / side).floor() as i64);
    let mut by_cell: std::collections::BTreeMap<(i64, i64), Vec<NodeId>> = Default::default();
    for (u, &p) in positions.iter().enumerate() {
        by_cell.entry(cell(p)).or_default().push(u as NodeId);
    }
    let k = params.tdma_k as i64;
    let closes = |u: NodeId, v: NodeId| -> bool {
        let (pu, pv) = (positions[u as usize], positions[v as usize]);
        let cu = cell(pu);
        let slot = (cu.0.rem_euclid(k), cu.1.rem_euclid(k));
        let interferers: Vec<Position> = by_cell
            .iter()
            .filter(|(c, _)| **c != cu && (c.0.rem_euclid(k), c.1.rem_euclid(k)) == slot)
            .filter_map(|(_, members)| {
                members
                    .iter()
                    .filter(|&&w| w != v && w != u)
                    .map(|&w| positions[w as usize])
                    .min_by(|a, b| a.dist(pv).total_cmp(&b.dist(pv)))
            })
            .collect();
        sinr(params, pu, pv, &interferers) >= params.threshold
    };
    // Without interference the link closes only inside the nominal range.
    let candidates = build_geometric_graph(positions, params.nominal_range() * (1.0 + 1e-9))?;
    let edges: Vec<(NodeId, NodeId)> = candidates
        .edges()
        .filter(|&(u, v)| closes(u, v) && closes(v, u))
        .collect();
    ConnectivityGraph::from_edges(n, edges)
}
