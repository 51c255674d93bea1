//! CSV and text outputs. Column orders are fixed.

use std::fmt::Write as _;

use super::experiments::{OverheadRow, RegimeRow};
use super::run::MetricsSeries;
use crate::geometry::Position;

/// Long format `step,metric,value`, metrics in a fixed order per step.
pub fn metrics_csv(series: &MetricsSeries) -> String {
    let mut out = String::from("step,metric,value\n");
    for m in &series.steps {
        let rows: [(&str, String); 13] = [
            ("gamma", m.gamma.map_or("none".into(), |g| g.to_string())),
            ("control_packets", m.control_packets.to_string()),
            ("control_packets_per_node", format!("{:.6}", m.control_packets_per_node)),
            ("control_bits_total", m.control_bits_total.to_string()),
            ("membership_bits", m.membership_bits.to_string()),
            ("probe_transmissions", m.probe_transmissions.to_string()),
            ("attempted", m.attempted.to_string()),
            ("delivery_count", m.delivered.to_string()),
            ("skipped_disconnected", m.skipped_disconnected.to_string()),
            ("stretch_violations", m.stretch_violations.to_string()),
            ("probe_bound_violations", m.probe_bound_violations.to_string()),
            ("max_load", m.max_load.to_string()),
            ("components", m.components.to_string()),
        ];
        for (name, value) in rows {
            let _ = writeln!(out, "{},{name},{value}", m.step);
        }
    }
    out
}

/// Raw stretch samples, one route per line.
pub fn samples_csv(series: &MetricsSeries) -> String {
    let mut out = String::from("step,source,dest,route_hops,bfs_hops\n");
    for s in &series.samples {
        let _ = writeln!(out, "{},{},{},{},{}", s.step, s.source, s.dest, s.route_hops, s.bfs_hops);
    }
    out
}

pub fn cdf_csv(cdf: &[(f64, f64)]) -> String {
    let mut out = String::from("stretch,fraction\n");
    for (v, f) in cdf {
        let _ = writeln!(out, "{v:.6},{f:.6}");
    }
    out
}

pub fn overhead_csv(rows: &[OverheadRow]) -> String {
    let mut out = String::from("n,mean,p5,p95,benchmark\n");
    for r in rows {
        let _ = writeln!(out, "{},{:.6},{:.6},{:.6},{:.6}", r.n, r.mean, r.p5, r.p95, r.benchmark);
    }
    out
}

pub fn regimes_csv(rows: &[RegimeRow]) -> String {
    let mut out = String::from("n,regime,trial,r_n,alpha_hat,restricted,component_size\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{},{},{}",
            r.n, r.regime, r.trial, r.r_n, r.alpha_hat, r.restricted, r.component_size
        );
    }
    out
}

pub fn positions_csv(positions: &[Position]) -> String {
    let mut out = String::from("node_id,x,y\n");
    for (u, p) in positions.iter().enumerate() {
        let _ = writeln!(out, "{u},{:.9},{:.9}", p.x, p.y);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub bound: String,
    pub observed: String,
    pub pass: bool,
}

/// Checked bounds for `summary.txt`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub title: String,
    pub notes: Vec<String>,
    pub checks: Vec<Check>,
}

impl Summary {
    pub fn new(title: impl Into<String>) -> Self {
        Self {
            title: title.into(),
            ..Default::default()
        }
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }

    pub fn check(&mut self, name: &str, bound: impl Into<String>, observed: impl Into<String>, pass: bool) {
        self.checks.push(Check {
            name: name.into(),
            bound: bound.into(),
            observed: observed.into(),
            pass,
        });
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn render(&self) -> String {
        let mut out = format!("{}\n", self.title);
        for n in &self.notes {
            let _ = writeln!(out, "  {n}");
        }
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{} {}: bound {} observed {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.bound,
                c.observed
            );
        }
        out
    }
}

/// Standard checks over one run's series.
pub fn run_summary(series: &MetricsSeries) -> Summary {
    let mut s = Summary::new("run");
    s.note(format!(
        "n={} levels={} kappa={} mu={:.3e} warmup={} measured_steps={}",
        series.n,
        series.levels,
        series.kappa,
        series.mu,
        series.warmup,
        series.steps.len()
    ));
    s.note(format!(
        "samples={} skipped_disconnected={} mean_packets_per_node={:.3}",
        series.samples.len(),
        series.skipped_disconnected(),
        series.mean_packets_per_node()
    ));
    let (att, del) = (series.attempted(), series.delivered());
    s.check("delivery", "100%", format!("{del}/{att}"), del == att);
    if series.steps.is_empty() {
        s.note("no measured steps: warmup covers the whole run");
    }
    let max = series.max_stretch().map_or("n/a".to_string(), |m| format!("{m:.3}"));
    s.check(
        "stretch_bound",
        format!("route_hops <= {} d", series.stretch_bound),
        format!("max {max}, {} violations", series.stretch_violations()),
        series.stretch_violations() == 0,
    );
    let bench = 100.0 * (series.n.max(2) as f64).log2();
    let mean = series.mean_packets_per_node();
    s.check(
        "overhead_envelope",
        format!("mean packets/node/step <= {bench:.1}"),
        format!("{mean:.3}"),
        mean <= bench,
    );
    s
}
