//! Simulation driver, sweeps, the greedy geographic baseline and file
//! outputs.

pub mod baseline;
pub mod config;
pub mod experiments;
pub mod output;
pub mod run;

pub use baseline::{greedy_georoute_baseline, wall_demo, GeoRoute, WallReport};
pub use config::{KappaChoice, RadiusMode, Seeds, SimConfig, TopologyKind};
pub use experiments::{
    experiment_doubling_regimes, experiment_overhead_scaling, experiment_stretch_cdf, overhead_log_fit, OverheadRow,
    Regime, RegimeRow,
};
pub use output::Summary;
pub use run::{run_simulation, MetricsSeries, Simulation, StepMetrics, StretchSample};
