//! Python bindings: configs and runs, graphs, the protocol, and the
//! experiment sweeps.

#![allow(clippy::type_complexity)]

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use doubling_routing::geometry::Position;
use doubling_routing::graph::{self, ConnectivityGraph};
use doubling_routing::harness::{self, experiments, output, run};
use doubling_routing::protocol::{self, Mode, ProtocolParams};
use doubling_routing::{mobility, Error, NodeId};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(m) => PyIOError::new_err(m),
        Error::InvariantViolation(_) | Error::Unreachable { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_positions(points: Vec<(f64, f64)>) -> Vec<Position> {
    points.into_iter().map(|(x, y)| Position::new(x, y)).collect()
}

fn from_positions(points: &[Position]) -> Vec<(f64, f64)> {
    points.iter().map(|p| (p.x, p.y)).collect()
}

/// Run configuration. Built from flat `key = value` text or set key by key.
#[pyclass(name = "SimConfig", from_py_object)]
#[derive(Clone, Default)]
struct PySimConfig {
    inner: harness::SimConfig,
}

#[pymethods]
impl PySimConfig {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut inner = harness::SimConfig::default();
        if let Some(kw) = kwargs {
            for (k, v) in kw.iter() {
                inner.set(&k.extract::<String>()?, &v.str()?.to_string()).map_err(py_err)?;
            }
        }
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: text.parse().map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: harness::SimConfig::from_file(&path).map_err(py_err)?,
        })
    }

    fn set(&mut self, key: &str, value: &Bound<'_, PyAny>) -> PyResult<()> {
        self.inner.set(key, &value.str()?.to_string()).map_err(py_err)
    }

    fn with_seed(&self, seed: u64) -> Self {
        Self {
            inner: self.inner.clone().with_seed(seed),
        }
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(py_err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn steps(&self) -> usize {
        self.inner.steps
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa_value()
    }

    #[getter]
    fn n_list(&self) -> Vec<usize> {
        self.inner.n_list.clone()
    }

    fn radius(&self) -> PyResult<f64> {
        self.inner.radius.radius(self.inner.n).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("SimConfig(n={}, steps={}, seed={})", self.inner.n, self.inner.steps, self.inner.seed)
    }
}

/// Per-step metrics and stretch samples of a finished run.
#[pyclass(name = "MetricsSeries")]
struct PyMetricsSeries {
    inner: run::MetricsSeries,
}

#[pymethods]
impl PyMetricsSeries {
    #[getter]
    fn n(&self) -> usize {
        self.inner.n
    }

    #[getter]
    fn levels(&self) -> u32 {
        self.inner.levels
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    #[getter]
    fn stretch_bound(&self) -> f64 {
        self.inner.stretch_bound
    }

    #[getter]
    fn warmup(&self) -> usize {
        self.inner.warmup
    }

    fn steps<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner.steps.iter().map(|m| step_dict(py, m)).collect()
    }

    /// `(step, source, dest, route_hops, bfs_hops)` per routed pair.
    fn samples(&self) -> Vec<(usize, NodeId, NodeId, u32, u32)> {
        self.inner
            .samples
            .iter()
            .map(|s| (s.step, s.source, s.dest, s.route_hops, s.bfs_hops))
            .collect()
    }

    fn stretches(&self) -> Vec<f64> {
        self.inner.stretches()
    }

    fn stretch_quantile(&self, q: f64) -> Option<f64> {
        self.inner.stretch_quantile(q)
    }

    fn max_stretch(&self) -> Option<f64> {
        self.inner.max_stretch()
    }

    fn mean_packets_per_node(&self) -> f64 {
        self.inner.mean_packets_per_node()
    }

    fn attempted(&self) -> usize {
        self.inner.attempted()
    }

    fn delivered(&self) -> usize {
        self.inner.delivered()
    }

    fn stretch_violations(&self) -> usize {
        self.inner.stretch_violations()
    }

    fn metrics_csv(&self) -> String {
        output::metrics_csv(&self.inner)
    }

    fn cdf(&self) -> Vec<(f64, f64)> {
        experiments::cdf(&self.inner.stretches())
    }

    fn summary(&self) -> String {
        output::run_summary(&self.inner).render()
    }
}

fn step_dict<'py>(py: Python<'py>, m: &run::StepMetrics) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("step", m.step)?;
    d.set_item("gamma", m.gamma)?;
    d.set_item("control_packets", m.control_packets)?;
    d.set_item("control_packets_per_node", m.control_packets_per_node)?;
    d.set_item("control_bits_total", m.control_bits_total)?;
    d.set_item("membership_bits", m.membership_bits)?;
    d.set_item("probe_transmissions", m.probe_transmissions)?;
    d.set_item("attempted", m.attempted)?;
    d.set_item("delivered", m.delivered)?;
    d.set_item("skipped_disconnected", m.skipped_disconnected)?;
    d.set_item("stretch_violations", m.stretch_violations)?;
    d.set_item("probe_bound_violations", m.probe_bound_violations)?;
    d.set_item("max_load", m.max_load)?;
    d.set_item("components", m.components)?;
    Ok(d)
}

/// Stepwise simulation driver.
#[pyclass(name = "Simulation")]
struct PySimulation {
    inner: run::Simulation,
}

#[pymethods]
impl PySimulation {
    #[new]
    fn new(config: PySimConfig) -> PyResult<Self> {
        Ok(Self {
            inner: run::Simulation::new(config.inner).map_err(py_err)?,
        })
    }

    /// Advance one step, ignoring the configured step count. Returns the
    /// step's metrics, or `None` during warmup.
    fn step<'py>(&mut self, py: Python<'py>) -> PyResult<Option<Bound<'py, PyDict>>> {
        match self.inner.step().map_err(py_err)? {
            Some((m, samples)) => {
                let d = step_dict(py, &m)?;
                let s: Vec<f64> = samples.iter().map(|s| s.stretch()).collect();
                d.set_item("stretches", s)?;
                Ok(Some(d))
            }
            None => Ok(None),
        }
    }

    fn run(&mut self) -> PyResult<PyMetricsSeries> {
        Ok(PyMetricsSeries {
            inner: self.inner.run().map_err(py_err)?,
        })
    }

    #[getter]
    fn time(&self) -> usize {
        self.inner.time()
    }

    #[getter]
    fn warmup(&self) -> usize {
        self.inner.warmup()
    }

    #[getter]
    fn radius(&self) -> f64 {
        self.inner.radius()
    }

    fn positions(&self) -> Vec<(f64, f64)> {
        from_positions(self.inner.positions())
    }

    fn graph(&self) -> PyGraph {
        PyGraph {
            inner: self.inner.graph().clone(),
        }
    }

    fn snapshot_csv(&self) -> String {
        self.inner.protocol().snapshot_csv()
    }
}

/// Undirected connectivity graph on nodes `0..n`.
#[pyclass(name = "Graph", from_py_object)]
#[derive(Clone)]
struct PyGraph {
    inner: ConnectivityGraph,
}

#[pymethods]
impl PyGraph {
    #[new]
    fn new(n: usize, edges: Vec<(NodeId, NodeId)>) -> PyResult<Self> {
        Ok(Self {
            inner: ConnectivityGraph::from_edges(n, edges).map_err(py_err)?,
        })
    }

    /// Unit-disk graph: edge iff Euclidean distance `< r`.
    #[staticmethod]
    fn geometric(positions: Vec<(f64, f64)>, r: f64) -> PyResult<Self> {
        Ok(Self {
            inner: graph::build_geometric_graph(&to_positions(positions), r).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn from_edge_list(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ConnectivityGraph::from_edge_list(text).map_err(py_err)?,
        })
    }

    fn to_edge_list(&self) -> String {
        self.inner.to_edge_list()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn edges(&self) -> Vec<(NodeId, NodeId)> {
        self.inner.edges().collect()
    }

    fn neighbors(&self, u: NodeId) -> PyResult<Vec<NodeId>> {
        self.check(u)?;
        Ok(self.inner.neighbors(u).to_vec())
    }

    fn bfs_distances(&self, source: NodeId) -> PyResult<Vec<Option<u32>>> {
        self.check(source)?;
        Ok(graph::bfs_distances(&self.inner, source))
    }

    fn shortest_path(&self, source: NodeId, target: NodeId) -> PyResult<Option<Vec<NodeId>>> {
        self.check(source)?;
        self.check(target)?;
        Ok(graph::shortest_path(&self.inner, source, target))
    }

    fn components(&self) -> Vec<Vec<NodeId>> {
        self.inner.components()
    }

    fn is_connected(&self) -> bool {
        self.inner.is_connected()
    }

    /// Largest component diameter in hops.
    fn diameter(&self) -> PyResult<u32> {
        run::component_diameter(&self.inner).map_err(py_err)
    }

    fn greedy_cover(&self, u: NodeId, radius: u32) -> PyResult<Vec<NodeId>> {
        self.check(u)?;
        graph::greedy_cover(&self.inner, u, radius).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, m={})", self.inner.n(), self.inner.edge_count())
    }
}

impl PyGraph {
    fn check(&self, u: NodeId) -> PyResult<()> {
        if (u as usize) < self.inner.n() {
            Ok(())
        } else {
            Err(PyValueError::new_err(format!("node {u} out of range for n={}", self.inner.n())))
        }
    }
}

/// Beacon hierarchy and forwarding state on a fixed node set.
#[pyclass(name = "Protocol")]
struct PyProtocol {
    inner: protocol::Protocol,
}

#[pymethods]
impl PyProtocol {
    /// `levels=None` sizes the hierarchy from the graph's diameter.
    #[new]
    #[pyo3(signature = (graph, kappa, nu=1.0, levels=None, mode="plain"))]
    fn new(graph: &PyGraph, kappa: f64, nu: f64, levels: Option<u32>, mode: &str) -> PyResult<Self> {
        let mode: Mode = mode.parse().map_err(py_err)?;
        let levels = match levels {
            Some(l) => l,
            None => ProtocolParams::levels_for_diameter(run::component_diameter(&graph.inner).map_err(py_err)?),
        };
        let params = ProtocolParams::new(kappa, nu, levels, mode).map_err(py_err)?;
        Ok(Self {
            inner: protocol::Protocol::new(graph.inner.n(), params),
        })
    }

    /// One beaconing step at time `t`; nodes act in `order` (default by id).
    /// Returns the control packet count.
    #[pyo3(signature = (graph, t, order=None))]
    fn round(&mut self, graph: &PyGraph, t: u64, order: Option<Vec<NodeId>>) -> PyResult<u64> {
        let order = order.unwrap_or_else(|| (0..graph.inner.n() as NodeId).collect());
        let stats = self.inner.beaconing_round(&graph.inner, t, &order).map_err(py_err)?;
        self.inner.check_beacon_separation(&graph.inner, &stats).map_err(py_err)?;
        Ok(stats.control_packets)
    }

    /// Route from `source` to `dest`; returns `(route, probe_transmissions)`.
    fn forward(&self, graph: &PyGraph, source: NodeId, dest: NodeId) -> PyResult<(Vec<NodeId>, u64)> {
        graph.check(source)?;
        graph.check(dest)?;
        let out = self.inner.forward(&graph.inner, source, dest).map_err(py_err)?;
        Ok((out.route, out.probe_transmissions))
    }

    fn check_invariants(&self) -> PyResult<()> {
        self.inner.check_cover_completeness().map_err(py_err)?;
        self.inner.check_single_membership().map_err(py_err)?;
        if self.inner.params().mode == Mode::LoadBalanced {
            self.inner.check_lb_store().map_err(py_err)?;
        }
        Ok(())
    }

    fn beacon_levels(&self) -> Vec<u32> {
        self.inner.nodes().iter().map(|s| s.beacon_level).collect()
    }

    #[getter]
    fn levels(&self) -> u32 {
        self.inner.params().levels
    }

    #[getter]
    fn stretch_bound(&self) -> f64 {
        self.inner.params().stretch_bound()
    }

    fn flood_radius(&self, level: u32) -> u32 {
        self.inner.params().flood_radius(level)
    }

    fn snapshot_csv(&self) -> String {
        self.inner.snapshot_csv()
    }
}

#[pyfunction]
fn run_simulation(config: &PySimConfig) -> PyResult<PyMetricsSeries> {
    Ok(PyMetricsSeries {
        inner: harness::run_simulation(&config.inner).map_err(py_err)?,
    })
}

/// Rows `(n, mean, p5, p95, benchmark)` over the config's `n_list`.
#[pyfunction]
fn overhead_scaling(config: &PySimConfig) -> PyResult<Vec<(usize, f64, f64, f64, f64)>> {
    let c = &config.inner;
    let rows = harness::experiment_overhead_scaling(&c.n_list, c.trials, c).map_err(py_err)?;
    Ok(rows.iter().map(|r| (r.n, r.mean, r.p5, r.p95, r.benchmark)).collect())
}

#[pyfunction]
fn stretch_cdf(config: &PySimConfig) -> PyResult<Vec<(f64, f64)>> {
    experiments::experiment_stretch_cdf(&config.inner).map_err(py_err)
}

/// Rows `(n, regime, trial, r_n, alpha_hat, restricted, component_size)`.
#[pyfunction]
fn doubling_regimes(config: &PySimConfig) -> PyResult<Vec<(usize, String, usize, f64, usize, bool, usize)>> {
    let c = &config.inner;
    let rows = harness::experiment_doubling_regimes(&c.n_list, c.theta, c.eps, c.trials, c.seed).map_err(py_err)?;
    Ok(rows
        .iter()
        .map(|r| (r.n, r.regime.to_string(), r.trial, r.r_n, r.alpha_hat, r.restricted, r.component_size))
        .collect())
}

#[pyfunction]
fn wall_demo<'py>(py: Python<'py>, config: &PySimConfig, pairs: usize) -> PyResult<Bound<'py, PyDict>> {
    let w = harness::wall_demo(&config.inner, pairs).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("nodes", w.nodes)?;
    d.set_item("r_n", w.r_n)?;
    d.set_item("pairs", w.pairs)?;
    d.set_item("protocol_delivered", w.protocol_delivered)?;
    d.set_item("greedy_delivered", w.greedy_delivered)?;
    d.set_item("greedy_failure_fraction", w.greedy_failure_fraction())?;
    d.set_item("stretch_violations", w.stretch_violations)?;
    d.set_item("max_stretch", w.max_stretch)?;
    Ok(d)
}

/// Greedy geographic forwarding; returns `(delivered, path)`.
#[pyfunction]
fn greedy_georoute(graph: &PyGraph, positions: Vec<(f64, f64)>, source: NodeId, dest: NodeId) -> PyResult<(bool, Vec<NodeId>)> {
    graph.check(source)?;
    graph.check(dest)?;
    if positions.len() != graph.inner.n() {
        return Err(PyValueError::new_err("one position per node is required"));
    }
    let r = harness::greedy_georoute_baseline(&graph.inner, &to_positions(positions), source, dest);
    Ok((r.delivered, r.path))
}

#[pyfunction]
fn theoretical_kappa(r_n: f64, s: f64, tau: f64, d: f64) -> PyResult<f64> {
    mobility::theoretical_kappa(r_n, s, tau, d).map_err(py_err)
}

#[pyfunction]
fn supercritical_radius(n: usize, eps: f64) -> f64 {
    doubling_routing::geometry::supercritical_radius(n, eps)
}

#[pymodule]
fn doubling_routing_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySimConfig>()?;
    m.add_class::<PyMetricsSeries>()?;
    m.add_class::<PySimulation>()?;
    m.add_class::<PyGraph>()?;
    m.add_class::<PyProtocol>()?;
    m.add_function(wrap_pyfunction!(run_simulation, m)?)?;
    m.add_function(wrap_pyfunction!(overhead_scaling, m)?)?;
    m.add_function(wrap_pyfunction!(stretch_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(doubling_regimes, m)?)?;
    m.add_function(wrap_pyfunction!(wall_demo, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_georoute, m)?)?;
    m.add_function(wrap_pyfunction!(theoretical_kappa, m)?)?;
    m.add_function(wrap_pyfunction!(supercritical_radius, m)?)?;
    Ok(())
}
