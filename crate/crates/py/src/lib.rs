use std::collections::BTreeMap;

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use gridbn_core::optimizer::default_candidates;
use gridbn_core::{
    assemble_network, capacity_table, divorce, scenario_summary, AggregationPolicy, CostTable, Evidence, Layout,
    NoisyOrParams, Survey, Target, Weighting, Weights,
};

create_exception!(gridbn, GridbnError, PyValueError);

fn err(e: gridbn_core::Error) -> PyErr {
    GridbnError::new_err(e.to_string())
}

fn evidence(map: Option<BTreeMap<String, String>>) -> Evidence {
    map.unwrap_or_default().into_iter().collect()
}

fn to_python<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| GridbnError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[pyclass(frozen, name = "Network", module = "gridbn")]
struct PyNetwork {
    inner: gridbn_core::Network,
}

#[pymethods]
impl PyNetwork {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = gridbn_core::Network::from_json(text).map_err(err)?;
        Ok(PyNetwork { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let inner = gridbn_core::Network::load(path).map_err(err)?;
        Ok(PyNetwork { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    /// Violations as `"node: reason"` strings; empty when valid.
    fn validate(&self) -> Vec<String> {
        self.inner
            .validate()
            .violations
            .into_iter()
            .map(|v| format!("{}: {}", v.node, v.reason))
            .collect()
    }

    fn topological_order(&self) -> PyResult<Vec<String>> {
        self.inner.topological_order().map_err(err)
    }

    fn node_ids(&self) -> Vec<String> {
        self.inner.nodes().map(|n| n.id.clone()).collect()
    }

    fn states(&self, node: &str) -> PyResult<Vec<String>> {
        Ok(self.inner.node(node).map_err(err)?.states.clone())
    }

    /// Posterior per node; every non-auxiliary node when `query` is omitted.
    #[pyo3(signature = (evidence=None, query=None))]
    fn posterior(
        &self,
        py: Python<'_>,
        evidence: Option<BTreeMap<String, String>>,
        query: Option<Vec<String>>,
    ) -> PyResult<BTreeMap<String, Vec<f64>>> {
        let ev = self::evidence(evidence);
        let query = query.unwrap_or_else(|| {
            self.inner.nodes().filter(|n| !n.auxiliary).map(|n| n.id.clone()).collect()
        });
        py.detach(|| gridbn_core::posterior(&self.inner, &ev, &query))
            .map(|p| p.marginals)
            .map_err(err)
    }

    fn joint_probability(&self, evidence: BTreeMap<String, String>) -> PyResult<f64> {
        gridbn_core::joint_probability(&self.inner, &self::evidence(Some(evidence))).map_err(err)
    }

    /// Expected GW of a thresholded node for the given posterior.
    fn state_value(&self, node: &str, posterior: Vec<f64>) -> PyResult<f64> {
        let node = self.inner.node(node).map_err(err)?;
        gridbn_core::state_value(node, &posterior).map_err(err)
    }

    #[pyo3(signature = (evidence=None))]
    fn capacities(&self, py: Python<'_>, evidence: Option<BTreeMap<String, String>>) -> PyResult<BTreeMap<String, f64>> {
        let ev = self::evidence(evidence);
        let rows = py.detach(|| capacity_table(&self.inner, &ev)).map_err(err)?;
        Ok(rows.into_iter().map(|r| (r.component, r.gw)).collect())
    }

    #[pyo3(signature = (evidence=None))]
    fn scenario_summary(&self, py: Python<'_>, evidence: Option<BTreeMap<String, String>>) -> PyResult<Py<PyAny>> {
        let ev = self::evidence(evidence);
        let summary = py.detach(|| scenario_summary(&self.inner, &ev)).map_err(err)?;
        to_python(py, &summary)
    }

    fn divorce(&self, max_parents: usize) -> PyResult<PyNetwork> {
        let (inner, _) = divorce(&self.inner, max_parents).map_err(err)?;
        Ok(PyNetwork { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        let name = self.inner.metadata.name.as_deref().unwrap_or("unnamed");
        format!("Network({name:?}, {} nodes)", self.inner.len())
    }
}

/// Builds a network from survey and layout files.
#[pyfunction]
#[pyo3(signature = (survey, layout, weighting="confidence_linear"))]
fn compile_survey(py: Python<'_>, survey: &str, layout: &str, weighting: &str) -> PyResult<PyNetwork> {
    let weighting: Weighting = weighting.parse().map_err(err)?;
    let survey = Survey::load(survey).map_err(err)?;
    let layout = Layout::load(layout).map_err(err)?;
    let inner = py
        .detach(|| assemble_network(&survey, &layout, AggregationPolicy { weighting }))
        .map_err(err)?;
    Ok(PyNetwork { inner })
}

/// Greedy plan towards `target` ("Node=state"), returned as a dict.
#[pyfunction]
#[pyo3(signature = (network, target, costs, w1=1.0, w2=1.0, w3=1.0))]
fn optimize(
    py: Python<'_>,
    network: &PyNetwork,
    target: &str,
    costs: BTreeMap<String, f64>,
    w1: f64,
    w2: f64,
    w3: f64,
) -> PyResult<Py<PyAny>> {
    let target: Target = target.parse().map_err(err)?;
    let costs = CostTable::new(costs).map_err(err)?;
    let weights = Weights { w1, w2, w3 };
    let net = &network.inner;
    let plan = py
        .detach(|| gridbn_core::optimize(net, &target, &costs, weights, &default_candidates(net)))
        .map_err(err)?;
    to_python(py, &plan)
}

/// `P(child present)` for a Noisy-OR with the given strengths, leak and active parents.
#[pyfunction]
fn noisy_or_probability(thetas: Vec<f64>, leak: f64, present: Vec<bool>) -> PyResult<f64> {
    let triggering = vec!["present".to_string(); thetas.len()];
    let params = NoisyOrParams::new(thetas, leak, "present", triggering);
    gridbn_core::noisy_or_probability(&params, &present).map_err(err)
}

#[pymodule]
fn gridbn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("GridbnError", m.py().get_type::<GridbnError>())?;
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(compile_survey, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(noisy_or_probability, m)?)?;
    Ok(())
}
