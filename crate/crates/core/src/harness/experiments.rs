//! Parameter sweeps built on [`run_simulation`].

use super::config::{RadiusMode, SimConfig};
use super::run::{quantile, run_simulation};
use crate::error::{Error, Result};
use crate::geometry::{sample_uniform_positions, BoundaryMode, DomainSpec};
use crate::graph::{build_geometric_graph, diameter, estimate_doubling_dimension};
use crate::rng::derive;
use crate::topology::LogBase;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverheadRow {
    pub n: usize,
    /// Mean control packets per node per step.
    pub mean: f64,
    pub p5: f64,
    pub p95: f64,
    /// `100 log2 n`.
    pub benchmark: f64,
}

impl OverheadRow {
    pub fn within_benchmark(&self) -> bool {
        self.mean <= self.benchmark
    }
}

/// Per-step packets per node pooled over `trials` runs at each size. Trial
/// `k` uses master seed `derive(base.seed, k)`.
pub fn experiment_overhead_scaling(n_list: &[usize], trials: usize, base: &SimConfig) -> Result<Vec<OverheadRow>> {
    if n_list.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("n_list must be ascending".into()));
    }
    let mut rows = Vec::new();
    for &n in n_list {
        let mut values = Vec::new();
        for k in 0..trials {
            let cfg = SimConfig { n, ..base.clone() }.with_seed(derive(base.seed, k as u64));
            let s = run_simulation(&cfg)?;
            values.extend(s.steps.iter().map(|m| m.control_packets_per_node));
        }
        if values.is_empty() {
            continue;
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        values.sort_by(f64::total_cmp);
        rows.push(OverheadRow {
            n,
            mean,
            p5: quantile(&values, 0.05).unwrap_or(mean),
            p95: quantile(&values, 0.95).unwrap_or(mean),
            benchmark: 100.0 * (n as f64).log2(),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least squares `y = slope * x + intercept`.
pub fn linear_fit(points: &[(f64, f64)]) -> Option<LinearFit> {
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Fit of mean overhead against `log2 n`.
pub fn overhead_log_fit(rows: &[OverheadRow]) -> Option<LinearFit> {
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| ((r.n as f64).log2(), r.mean)).collect();
    linear_fit(&pts)
}

/// Empirical CDF of the pooled stretch samples: one `(value, fraction <=
/// value)` row per distinct value.
pub fn experiment_stretch_cdf(config: &SimConfig) -> Result<Vec<(f64, f64)>> {
    if config.n < 2 {
        return Err(Error::InvalidParameter("stretch CDF needs n >= 2".into()));
    }
    Ok(cdf(&run_simulation(config)?.stretches()))
}

pub fn cdf(sorted: &[f64]) -> Vec<(f64, f64)> {
    let total = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let frac = (i + 1) as f64 / total;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = frac,
            _ => out.push((v, frac)),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Regime {
    Supercritical,
    Subcritical,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Supercritical => "supercritical",
            Regime::Subcritical => "subcritical",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeRow {
    pub n: usize,
    pub regime: Regime,
    pub trial: usize,
    pub r_n: f64,
    pub alpha_hat: usize,
    /// The estimate covers only the largest component.
    pub restricted: bool,
    pub component_size: usize,
}

/// Ball radii used by the regime study: powers of two up to half the
/// diameter.
pub fn regime_radii(diam: u32) -> Vec<u32> {
    let mut radii = vec![1];
    while radii.last().unwrap() * 4 <= diam {
        radii.push(radii.last().unwrap() * 2);
    }
    radii
}

pub const REGIME_CENTERS: usize = 100;

/// Doubling estimates of `G(n, r)` at the supercritical radius for `eps`
/// and the subcritical radius for `theta`, on the largest component.
pub fn experiment_doubling_regimes(
    n_list: &[usize],
    theta: f64,
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<RegimeRow>> {
    if !(theta > 0.0 && theta <= 1.0) || !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("need 0 < theta <= 1 and eps > 0, got {theta}, {eps}")));
    }
    let mut rows = Vec::new();
    for &n in n_list {
        let domain = DomainSpec::for_nodes(n, BoundaryMode::Reflect)?;
        for trial in 0..trials {
            let placement = derive(seed, (n as u64) << 16 | trial as u64);
            let positions = sample_uniform_positions(n, &domain, placement);
            for (regime, mode) in [
                (Regime::Supercritical, RadiusMode::Supercritical { eps }),
                (Regime::Subcritical, RadiusMode::Subcritical { theta, base: LogBase::Natural }),
            ] {
                let r_n = mode.radius(n)?;
                let g = build_geometric_graph(&positions, r_n)?;
                let comps = g.components();
                let (sub, _) = g.induced(&comps[0]);
                let diam = diameter(&sub)?.hops;
                let est = estimate_doubling_dimension(&sub, &regime_radii(diam), REGIME_CENTERS, derive(placement, 7))?;
                rows.push(RegimeRow {
                    n,
                    regime,
                    trial,
                    r_n,
                    alpha_hat: est.alpha_hat,
                    restricted: comps.len() > 1,
                    component_size: sub.n(),
                });
            }
        }
    }
    Ok(rows)
}

/// Mean `alpha_hat` per `(n, regime)`.
pub fn regime_means(rows: &[RegimeRow]) -> Vec<(usize, Regime, f64)> {
    let mut acc: std::collections::BTreeMap<(usize, Regime), (f64, usize)> = Default::default();
    for r in rows {
        let e = acc.entry((r.n, r.regime)).or_default();
        e.0 += r.alpha_hat as f64;
        e.1 += 1;
    }
    acc.into_iter().map(|((n, g), (s, k))| (n, g, s / k as f64)).collect()
}
