//! Python bindings for the ponfab fabric simulator.
//!
//! Exposes topology building, failure injection, the routing optimizer and
//! the power/delay metrics as a `ponfab` extension module, plus a one-call
//! `sweep` mirroring the CLI's default experiment.

use std::collections::BTreeSet;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use ponfab_core::experiment as exp;
use ponfab_core::failure as fail;
use ponfab_core::metrics;
use ponfab_core::optimizer as opt;
use ponfab_core::topology as topo;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn parse_arch(s: &str) -> PyResult<topo::Architecture> {
    s.parse().map_err(value_err)
}

fn parse_mode(s: &str) -> PyResult<opt::RoutingMode> {
    s.parse().map_err(value_err)
}

fn parse_delay_model(s: &str) -> PyResult<metrics::DelayModel> {
    match s {
        "endpoints" => Ok(metrics::DelayModel::Endpoints),
        "per-link" | "per_link" => Ok(metrics::DelayModel::PerLink),
        other => Err(value_err(format!("unknown delay model `{other}`"))),
    }
}

/// One source->destination traffic volume in Gbps.
#[pyclass(name = "Demand", from_py_object)]
#[derive(Clone)]
struct PyDemand {
    inner: opt::Demand,
}

#[pymethods]
impl PyDemand {
    #[new]
    fn new(id: &str, src: &str, dst: &str, volume_gbps: f64) -> Self {
        PyDemand { inner: opt::Demand::new(id, src, dst, volume_gbps) }
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id.0.clone()
    }

    #[getter]
    fn src(&self) -> String {
        self.inner.src.0.clone()
    }

    #[getter]
    fn dst(&self) -> String {
        self.inner.dst.0.clone()
    }

    #[getter]
    fn volume_gbps(&self) -> f64 {
        self.inner.volume_gbps
    }

    fn __repr__(&self) -> String {
        format!(
            "Demand(id='{}', src='{}', dst='{}', volume_gbps={})",
            self.inner.id.0, self.inner.src.0, self.inner.dst.0, self.inner.volume_gbps
        )
    }
}

/// A set of failed links with a label.
#[pyclass(name = "Scenario", from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: fail::FailureScenario,
}

#[pymethods]
impl PyScenario {
    /// The no-failure baseline.
    #[staticmethod]
    fn nf() -> Self {
        PyScenario { inner: fail::FailureScenario::nf() }
    }

    /// A labelled scenario failing the given link ids.
    #[staticmethod]
    fn custom(label: &str, links: Vec<String>) -> Self {
        PyScenario {
            inner: fail::FailureScenario::custom(
                label,
                links.into_iter().map(topo::LinkId).collect(),
            ),
        }
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label.to_string()
    }

    #[getter]
    fn failed_links(&self) -> Vec<String> {
        self.inner.failed_links.iter().map(|l| l.0.clone()).collect()
    }

    fn name(&self) -> String {
        self.inner.name()
    }

    fn __repr__(&self) -> String {
        format!("Scenario({})", self.inner.name())
    }
}

/// Immutable device/link graph of one fabric.
#[pyclass(name = "Topology", from_py_object)]
#[derive(Clone)]
struct PyTopology {
    inner: topo::Topology,
}

#[pymethods]
impl PyTopology {
    /// Build the single-tier two-AWGR fabric.
    #[staticmethod]
    #[pyo3(signature = (servers_per_rack = 4))]
    fn build_pon3(servers_per_rack: u32) -> PyResult<Self> {
        if servers_per_rack < 1 {
            return Err(value_err("servers_per_rack must be >= 1"));
        }
        Ok(PyTopology { inner: topo::build_pon3(servers_per_rack) })
    }

    /// Build the two-tier cascaded-AWGR fabric.
    #[staticmethod]
    #[pyo3(signature = (servers_per_rack = 4))]
    fn build_two_tier(servers_per_rack: u32) -> PyResult<Self> {
        if servers_per_rack < 1 {
            return Err(value_err("servers_per_rack must be >= 1"));
        }
        Ok(PyTopology { inner: topo::build_two_tier(servers_per_rack) })
    }

    /// Parse a topology document.
    #[staticmethod]
    fn loads(text: &str) -> PyResult<Self> {
        Ok(PyTopology { inner: topo::load_topology_str(text).map_err(value_err)? })
    }

    /// Read a topology document from a file.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyTopology {
            inner: topo::load_topology(std::path::Path::new(path)).map_err(value_err)?,
        })
    }

    /// Serialize to the topology document form.
    fn dumps(&self) -> String {
        topo::save_topology_str(&self.inner)
    }

    /// Write the topology document to a file.
    fn save(&self, path: &str) -> PyResult<()> {
        topo::save_topology(&self.inner, std::path::Path::new(path)).map_err(runtime_err)
    }

    #[getter]
    fn architecture(&self) -> String {
        self.inner.params().architecture.to_string()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn link_count(&self) -> usize {
        self.inner.link_count()
    }

    #[getter]
    fn servers(&self) -> Vec<String> {
        self.inner.servers().into_iter().map(|n| n.0).collect()
    }

    fn link_ids(&self) -> Vec<String> {
        self.inner.links().map(|l| l.id.0.clone()).collect()
    }

    fn node_kind(&self, id: &str) -> PyResult<String> {
        self.inner
            .node(&id.into())
            .map(|n| n.kind.to_string())
            .ok_or_else(|| value_err(format!("unknown node `{id}`")))
    }

    /// Failure class of a link: "F1".."F5" or "olt-attach".
    fn classify_link(&self, id: &str) -> PyResult<String> {
        fail::classify_link(&self.inner, &id.into())
            .map(|c| c.to_string())
            .map_err(value_err)
    }

    /// Simple layered paths from src to dst, best first.
    #[pyo3(signature = (src, dst, max_paths = 16))]
    fn candidate_paths<'py>(
        &self,
        py: Python<'py>,
        src: &str,
        dst: &str,
        max_paths: usize,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let paths = topo::candidate_paths(&self.inner, &src.into(), &dst.into(), max_paths)
            .map_err(value_err)?;
        paths
            .iter()
            .map(|p| {
                let d = PyDict::new(py);
                d.set_item("nodes", p.nodes.iter().map(|n| n.0.clone()).collect::<Vec<_>>())?;
                d.set_item("links", p.links.iter().map(|l| l.0.clone()).collect::<Vec<_>>())?;
                d.set_item("olt_relay", p.olt_relay)?;
                Ok(d)
            })
            .collect()
    }

    /// Whether any layered path connects src to dst.
    fn reachable(&self, src: &str, dst: &str) -> PyResult<bool> {
        topo::reachable(&self.inner, &src.into(), &dst.into()).map_err(value_err)
    }

    /// One scenario per link of the given kind ("F1".."F5").
    fn enumerate_single_failures(&self, kind: &str) -> PyResult<Vec<PyScenario>> {
        let kind: fail::FailureKind = kind.parse().map_err(value_err)?;
        Ok(fail::enumerate_single_failures(&self.inner, kind)
            .into_iter()
            .map(|inner| PyScenario { inner })
            .collect())
    }

    /// Copy of this topology with the scenario's links removed.
    fn apply_failure(&self, scenario: &PyScenario) -> PyResult<Self> {
        scenario.inner.validate(&self.inner).map_err(value_err)?;
        Ok(PyTopology {
            inner: fail::apply_failure(&self.inner, &scenario.inner).map_err(value_err)?,
        })
    }

    /// Dead demands and down servers under a scenario.
    fn down_analysis<'py>(
        &self,
        py: Python<'py>,
        scenario: &PyScenario,
        demands: Vec<PyDemand>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let demands: Vec<opt::Demand> = demands.into_iter().map(|d| d.inner).collect();
        let report =
            fail::down_analysis(&self.inner, &scenario.inner, &demands).map_err(value_err)?;
        let d = PyDict::new(py);
        d.set_item(
            "down_servers",
            report.down_servers.iter().map(|n| n.0.clone()).collect::<Vec<_>>(),
        )?;
        d.set_item(
            "dead_demands",
            report.dead_demands.iter().map(|n| n.0.clone()).collect::<Vec<_>>(),
        )?;
        d.set_item("survivable", report.survivable)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "Topology(architecture={}, nodes={}, links={})",
            self.inner.params().architecture,
            self.inner.node_count(),
            self.inner.link_count()
        )
    }
}

/// A solved routing assignment.
#[pyclass(name = "Solution", from_py_object)]
#[derive(Clone)]
struct PySolution {
    inner: opt::RoutingSolution,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn status(&self) -> String {
        self.inner.status.to_string()
    }

    #[getter]
    fn objective_w(&self) -> f64 {
        self.inner.objective_w
    }

    #[getter]
    fn active_servers(&self) -> Vec<String> {
        self.inner.active_servers.iter().map(|n| n.0.clone()).collect()
    }

    #[getter]
    fn active_olts(&self) -> Vec<String> {
        self.inner.active_olts.iter().map(|n| n.0.clone()).collect()
    }

    #[getter]
    fn unroutable(&self) -> Vec<String> {
        self.inner.unroutable.iter().map(|d| d.0.clone()).collect()
    }

    #[getter]
    fn olt_forwarded_gbps(&self) -> std::collections::BTreeMap<String, f64> {
        self.inner.olt_forwarded_gbps.iter().map(|(k, v)| (k.0.clone(), *v)).collect()
    }

    #[getter]
    fn link_loads_gbps(&self) -> std::collections::BTreeMap<String, f64> {
        self.inner.link_loads_gbps.iter().map(|(k, v)| (k.0.clone(), *v)).collect()
    }

    fn total_olt_forwarded_gbps(&self) -> f64 {
        self.inner.total_olt_forwarded_gbps()
    }

    /// Chosen paths per demand: {demand_id: [{path_index, volume_gbps, links, olt_relay}]}.
    fn assignment<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let out = PyDict::new(py);
        for (id, flows) in &self.inner.assignment {
            let list = PyList::empty(py);
            for f in flows {
                let d = PyDict::new(py);
                d.set_item("path_index", f.path_index)?;
                d.set_item("volume_gbps", f.volume_gbps)?;
                d.set_item("links", f.links.iter().map(|l| l.0.clone()).collect::<Vec<_>>())?;
                d.set_item("olt_relay", f.olt_relay)?;
                list.append(d)?;
            }
            out.set_item(id.0.clone(), list)?;
        }
        Ok(out)
    }

    /// Serialize the solution dump document.
    fn dumps(&self) -> String {
        opt::save_solution_str(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(status={}, objective_w={:.3}, active_olts={})",
            self.inner.status,
            self.inner.objective_w,
            self.inner.active_olts.len()
        )
    }
}

/// A formulated routing problem bound to one (post-failure) topology.
#[pyclass(name = "Problem")]
struct PyProblem {
    inner: opt::RoutingProblem,
}

#[pymethods]
impl PyProblem {
    /// Candidate-path counts per demand id.
    fn candidate_counts(&self) -> std::collections::BTreeMap<String, usize> {
        self.inner.candidates.iter().map(|(k, v)| (k.0.clone(), v.len())).collect()
    }

    #[getter]
    fn unroutable(&self) -> Vec<String> {
        self.inner.unroutable.iter().map(|d| d.0.clone()).collect()
    }

    /// Minimize total power by exact branch-and-bound (or split refinement).
    fn solve(&self) -> PyResult<PySolution> {
        let cfg = opt::SolverConfig::default();
        Ok(PySolution { inner: opt::solve(&self.inner, &cfg).map_err(runtime_err)? })
    }

    /// Exhaustive single-path oracle.
    fn brute_force(&self) -> PyResult<PySolution> {
        Ok(PySolution { inner: opt::brute_force(&self.inner).map_err(runtime_err)? })
    }

    /// Re-check every solution invariant; returns violation strings.
    fn verify(&self, solution: &PySolution) -> Vec<String> {
        opt::verify(&self.inner, &solution.inner, &opt::SolverConfig::default())
            .iter()
            .map(|v| v.to_string())
            .collect()
    }

    /// Power decomposition of a solution.
    fn power<'py>(&self, py: Python<'py>, solution: &PySolution) -> PyResult<Bound<'py, PyDict>> {
        let report = metrics::total_power(&solution.inner, self.inner.topology.device_params());
        let d = PyDict::new(py);
        d.set_item("total_w", report.total_w)?;
        d.set_item("idle_w", report.idle_w)?;
        d.set_item("proportional_w", report.proportional_w)?;
        d.set_item("onu_w", report.onu_w)?;
        d.set_item(
            "per_server_w",
            report
                .per_server_w
                .iter()
                .map(|(k, v)| (k.0.clone(), *v))
                .collect::<std::collections::BTreeMap<_, _>>(),
        )?;
        d.set_item(
            "per_olt_w",
            report
                .per_olt_w
                .iter()
                .map(|(k, v)| (k.0.clone(), *v))
                .collect::<std::collections::BTreeMap<_, _>>(),
        )?;
        Ok(d)
    }

    /// Queuing delay of a solution under "endpoints" or "per-link" accounting.
    #[pyo3(signature = (solution, model = "endpoints"))]
    fn delay<'py>(
        &self,
        py: Python<'py>,
        solution: &PySolution,
        model: &str,
    ) -> PyResult<Bound<'py, PyDict>> {
        let model = parse_delay_model(model)?;
        let report = metrics::solution_delay(
            &self.inner,
            &solution.inner,
            self.inner.topology.device_params(),
            model,
        );
        let d = PyDict::new(py);
        d.set_item("mean_us", report.mean_us)?;
        d.set_item("max_us", report.max_us)?;
        d.set_item(
            "per_demand_us",
            report
                .per_demand_us
                .iter()
                .map(|(k, v)| (k.0.clone(), *v))
                .collect::<std::collections::BTreeMap<_, _>>(),
        )?;
        d.set_item("unstable_points", report.unstable_points.clone())?;
        Ok(d)
    }
}

/// Formulate a routing problem over a (post-failure) topology.
#[pyfunction]
#[pyo3(signature = (topology, demands, mode = "single-path", max_paths = 16))]
fn formulate(
    topology: &PyTopology,
    demands: Vec<PyDemand>,
    mode: &str,
    max_paths: usize,
) -> PyResult<PyProblem> {
    let demands: Vec<opt::Demand> = demands.into_iter().map(|d| d.inner).collect();
    Ok(PyProblem {
        inner: opt::formulate(&topology.inner, demands, parse_mode(mode)?, max_paths)
            .map_err(value_err)?,
    })
}

/// M/M/1 sojourn time in microseconds per packet; inf when unstable.
#[pyfunction]
#[pyo3(signature = (load_gbps, rate_gbps, packet_bits = 12000.0))]
fn mm1_delay(load_gbps: f64, rate_gbps: f64, packet_bits: f64) -> PyResult<f64> {
    match metrics::mm1_delay(load_gbps, rate_gbps, packet_bits) {
        Ok(us) => Ok(us),
        Err(metrics::MetricsError::UnstableQueue { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(value_err(e)),
    }
}

/// Power of one server given its traffic (defaults match the device table).
#[pyfunction]
#[pyo3(signature = (active, tx_gbps, rx_gbps, proc_gbps = 0.0))]
fn server_power(active: bool, tx_gbps: f64, rx_gbps: f64, proc_gbps: f64) -> PyResult<f64> {
    metrics::server_power(active, tx_gbps, rx_gbps, proc_gbps, &metrics::DeviceParams::default())
        .map_err(value_err)
}

/// Power of one OLT switch forwarding the given traffic.
#[pyfunction]
fn olt_power(active: bool, forwarded_gbps: f64) -> PyResult<f64> {
    metrics::olt_power(active, forwarded_gbps, &metrics::DeviceParams::default())
        .map_err(value_err)
}

/// Seeded demand generation over the canonical 4-rack grid.
#[pyfunction]
#[pyo3(signature = (
    seed = 42,
    servers_per_rack = 4,
    arch = "pon3",
    count = None,
    all_pairs = false,
    volume_lo = 0.2,
    volume_hi = 0.8,
))]
fn generate_demands(
    seed: u64,
    servers_per_rack: u32,
    arch: &str,
    count: Option<usize>,
    all_pairs: bool,
    volume_lo: f64,
    volume_hi: f64,
) -> PyResult<Vec<PyDemand>> {
    let pattern = if all_pairs {
        exp::DemandPattern::AllPairs
    } else if let Some(count) = count {
        exp::DemandPattern::RandomPairs { count }
    } else {
        exp::DemandPattern::OneToOne
    };
    let spec = exp::ExperimentSpec {
        seed,
        servers_per_rack,
        pattern,
        volume_range_gbps: (volume_lo, volume_hi),
        ..exp::ExperimentSpec::default()
    };
    let canonical = exp::generate_demands(&spec).map_err(value_err)?;
    let demands = exp::map_demands(parse_arch(arch)?, &canonical);
    Ok(demands.into_iter().map(|inner| PyDemand { inner }).collect())
}

/// Run the failure sweep; returns the aggregated rows as dicts and, when
/// `out_dir` is given, writes results.csv / summary.csv / manifest.toml.
#[pyfunction]
#[pyo3(signature = (
    out_dir = None,
    arch = "both",
    servers_per_rack = 4,
    seed = 42,
    failures = "F1,F2,F3,F4,F5",
    mode = "single-path",
    delay_model = "endpoints",
    jobs = 0,
    timing = false,
))]
#[allow(clippy::too_many_arguments)]
fn sweep<'py>(
    py: Python<'py>,
    out_dir: Option<&str>,
    arch: &str,
    servers_per_rack: u32,
    seed: u64,
    failures: &str,
    mode: &str,
    delay_model: &str,
    jobs: usize,
    timing: bool,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let architectures = match arch {
        "both" => vec![topo::Architecture::Pon3, topo::Architecture::TwoTier],
        other => vec![parse_arch(other)?],
    };
    let failure_kinds: Vec<fail::FailureKind> = failures
        .split(',')
        .map(|k| k.trim().parse().map_err(value_err))
        .collect::<PyResult<_>>()?;
    let spec = exp::ExperimentSpec {
        architectures,
        servers_per_rack,
        seed,
        failure_kinds,
        mode: parse_mode(mode)?,
        delay_model: parse_delay_model(delay_model)?,
        jobs,
        timing,
        ..exp::ExperimentSpec::default()
    };
    let result = exp::run_sweep(&spec).map_err(runtime_err)?;
    if let Some(dir) = out_dir {
        exp::emit_report(&result, std::path::Path::new(dir)).map_err(runtime_err)?;
    }
    result
        .rows
        .iter()
        .map(|row| {
            let d = PyDict::new(py);
            d.set_item("architecture", row.architecture.to_string())?;
            d.set_item("label", row.label.clone())?;
            d.set_item("status", row.status.clone())?;
            d.set_item("total_w", row.total_w)?;
            d.set_item("mean_delay_us", row.mean_delay_us)?;
            d.set_item("max_delay_us", row.max_delay_us)?;
            d.set_item("olt_forwarded_gbps", row.olt_forwarded_gbps)?;
            d.set_item("dead_demands", row.dead_demands)?;
            d.set_item("down_servers", row.down_servers)?;
            Ok(d)
        })
        .collect()
}

/// Every failable link id of a kind, for building custom scenarios.
#[pyfunction]
fn links_of_kind(topology: &PyTopology, kind: &str) -> PyResult<Vec<String>> {
    let kind: fail::FailureKind = kind.parse().map_err(value_err)?;
    let mut out = Vec::new();
    for link in topology.inner.links().map(|l| l.id.clone()).collect::<BTreeSet<_>>() {
        if let Ok(fail::LinkClass::Failure(k)) = fail::classify_link(&topology.inner, &link) {
            if k == kind {
                out.push(link.0.clone());
            }
        }
    }
    Ok(out)
}

#[pymodule]
fn ponfab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyTopology>()?;
    m.add_class::<PyDemand>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyProblem>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(formulate, m)?)?;
    m.add_function(wrap_pyfunction!(mm1_delay, m)?)?;
    m.add_function(wrap_pyfunction!(server_power, m)?)?;
    m.add_function(wrap_pyfunction!(olt_power, m)?)?;
    m.add_function(wrap_pyfunction!(generate_demands, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(links_of_kind, m)?)?;
    Ok(())
}
