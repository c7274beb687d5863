//! Network graph, node distributions and the binary-state to capacity mapping.
//!
//! A [`Network`] is a DAG of discrete [`Node`]s tagged with one of four layers
//! (external factors, capacity components, bulk/balancing totals, grid
//! management scenarios). Each node carries either an explicit CPT or a
//! Noisy-OR parameterization; thresholded capacity nodes also carry a
//! [`ValueMap`] that turns a binary posterior into a GW figure.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::compiler::DivorcePlan;
use crate::error::{read_file, Error, Result};

/// Tolerance used for every "sums to one" check.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Layer {
    L1,
    L2,
    L3,
    L4,
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Layer::L1 => "L1",
            Layer::L2 => "L2",
            Layer::L3 => "L3",
            Layer::L4 => "L4",
        };
        f.write_str(s)
    }
}

/// One probability vector over the child's states per parent configuration,
/// first parent varying slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExplicitCpt {
    pub rows: Vec<Vec<f64>>,
}

impl ExplicitCpt {
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        ExplicitCpt { rows }
    }
}

/// Noisy-OR parameters for a binary child.
///
/// `thetas[i]` is the probability that parent `i`, when in its `triggering[i]`
/// state, alone produces the child's `true_state`. `leak` covers every cause
/// not modelled as a parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyOrParams {
    pub thetas: Vec<f64>,
    pub leak: f64,
    pub true_state: String,
    pub triggering: Vec<String>,
}

impl NoisyOrParams {
    pub fn new(
        thetas: Vec<f64>,
        leak: f64,
        true_state: impl Into<String>,
        triggering: Vec<String>,
    ) -> Self {
        NoisyOrParams {
            thetas,
            leak,
            true_state: true_state.into(),
            triggering,
        }
    }

    /// Free parameters an expert has to supply: one strength per parent plus the leak.
    pub fn free_parameter_count(&self) -> usize {
        self.thetas.len() + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Cpt(ExplicitCpt),
    NoisyOr(NoisyOrParams),
}

/// Physical threshold and the bucket means on either side of it, in GW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueMap {
    pub threshold: f64,
    pub low_submean: f64,
    pub high_submean: f64,
}

impl ValueMap {
    pub fn new(threshold: f64, low_submean: f64, high_submean: f64) -> Self {
        ValueMap {
            threshold,
            low_submean,
            high_submean,
        }
    }

    /// All three values equal: the panel was unanimous, so there is no low bucket.
    pub fn is_degenerate(&self) -> bool {
        self.low_submean == self.threshold && self.high_submean == self.threshold
    }

    fn check(&self) -> Option<String> {
        let finite = self.threshold.is_finite()
            && self.low_submean.is_finite()
            && self.high_submean.is_finite();
        if !finite {
            return Some("value map contains a non-finite number".into());
        }
        if self.is_degenerate() {
            return None;
        }
        if !(self.low_submean < self.threshold && self.threshold <= self.high_submean) {
            return Some(format!(
                "value map must satisfy low_submean < threshold <= high_submean (got {} / {} / {})",
                self.low_submean, self.threshold, self.high_submean
            ));
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub layer: Layer,
    pub states: Vec<String>,
    pub parents: Vec<String>,
    pub distribution: Distribution,
    pub value_map: Option<ValueMap>,
    /// Inserted by divorcing; hidden from reports and closed to evidence.
    pub auxiliary: bool,
}

impl Node {
    pub fn with_cpt(
        id: impl Into<String>,
        layer: Layer,
        states: &[&str],
        parents: &[&str],
        rows: Vec<Vec<f64>>,
    ) -> Self {
        Node {
            id: id.into(),
            layer,
            states: states.iter().map(|s| s.to_string()).collect(),
            parents: parents.iter().map(|s| s.to_string()).collect(),
            distribution: Distribution::Cpt(ExplicitCpt::new(rows)),
            value_map: None,
            auxiliary: false,
        }
    }

    pub fn with_noisy_or(
        id: impl Into<String>,
        layer: Layer,
        states: &[&str],
        parents: &[&str],
        params: NoisyOrParams,
    ) -> Self {
        Node {
            id: id.into(),
            layer,
            states: states.iter().map(|s| s.to_string()).collect(),
            parents: parents.iter().map(|s| s.to_string()).collect(),
            distribution: Distribution::NoisyOr(params),
            value_map: None,
            auxiliary: false,
        }
    }

    pub fn value_map(mut self, value_map: ValueMap) -> Self {
        self.value_map = Some(value_map);
        self
    }

    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, state: &str) -> Result<usize> {
        self.states
            .iter()
            .position(|s| s == state)
            .ok_or_else(|| Error::UnknownState {
                node: self.id.clone(),
                state: state.to_string(),
                valid: self.states.clone(),
            })
    }

    pub fn is_noisy_or(&self) -> bool {
        matches!(self.distribution, Distribution::NoisyOr(_))
    }
}

/// Node ids of the scenario-relevant nodes, recorded by network assembly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioRoles {
    pub grid: String,
    pub bulk: String,
    pub balance: String,
}

impl Default for ScenarioRoles {
    fn default() -> Self {
        ScenarioRoles {
            grid: "GridManagement".into(),
            bulk: "Bulk".into(),
            balance: "Balance".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roles: Option<ScenarioRoles>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divorce_plan: Option<DivorcePlan>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl Metadata {
    pub fn named(name: impl Into<String>) -> Self {
        Metadata {
            name: Some(name.into()),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkRecord", into = "NetworkRecord")]
pub struct Network {
    pub metadata: Metadata,
    nodes: BTreeMap<String, Node>,
}

impl Network {
    pub fn new(metadata: Metadata) -> Self {
        Network {
            metadata,
            nodes: BTreeMap::new(),
        }
    }

    pub fn from_nodes(metadata: Metadata, nodes: impl IntoIterator<Item = Node>) -> Result<Self> {
        let mut network = Network::new(metadata);
        for node in nodes {
            if network.nodes.contains_key(&node.id) {
                return Err(Error::Parameter(format!("duplicate node id `{}`", node.id)));
            }
            network.insert(node);
        }
        Ok(network)
    }

    /// Inserts or replaces a node.
    pub fn insert(&mut self, node: Node) {
        self.nodes.insert(node.id.clone(), node);
    }

    pub fn remove(&mut self, id: &str) -> Option<Node> {
        self.nodes.remove(id)
    }

    pub fn get(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut Node> {
        self.nodes.get_mut(id)
    }

    pub fn node(&self, id: &str) -> Result<&Node> {
        self.nodes
            .get(id)
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    /// Nodes in lexicographic id order.
    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn roles(&self) -> ScenarioRoles {
        self.metadata.roles.clone().unwrap_or_default()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Network::from_json(&read_file(path.as_ref())?)
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }

    pub fn topological_order(&self) -> Result<Vec<String>> {
        topological_order(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub node: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, node: &str, reason: impl Into<String>) {
        self.violations.push(Violation {
            node: node.to_string(),
            reason: reason.into(),
        });
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidNetwork(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("no violations");
        }
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| format!("{}: {}", v.node, v.reason))
            .collect();
        f.write_str(&parts.join("; "))
    }
}

fn is_probability(p: f64) -> bool {
    p.is_finite() && (0.0..=1.0).contains(&p)
}

/// Checks every structural and numeric invariant; never fails, only reports.
pub fn validate(network: &Network) -> ValidationReport {
    let mut report = ValidationReport::default();

    for node in network.nodes() {
        let id = node.id.as_str();

        if node.states.len() < 2 {
            report.push(id, "needs at least two states");
        }
        let unique: BTreeSet<&String> = node.states.iter().collect();
        if unique.len() != node.states.len() {
            report.push(id, "duplicate state labels");
        }

        let mut seen = BTreeSet::new();
        let mut parents_ok = true;
        for parent in &node.parents {
            if parent == id {
                report.push(id, "node lists itself as a parent");
                parents_ok = false;
            } else if !network.contains(parent) {
                report.push(id, format!("missing parent {parent}"));
                parents_ok = false;
            }
            if !seen.insert(parent) {
                report.push(id, format!("duplicate parent {parent}"));
                parents_ok = false;
            }
        }

        match &node.distribution {
            Distribution::Cpt(cpt) if parents_ok => {
                let expected: usize = node
                    .parents
                    .iter()
                    .filter_map(|p| network.get(p))
                    .map(Node::cardinality)
                    .product();
                if cpt.rows.len() != expected {
                    report.push(
                        id,
                        format!("cpt has {} rows, expected {expected}", cpt.rows.len()),
                    );
                }
                for (r, row) in cpt.rows.iter().enumerate() {
                    if row.len() != node.states.len() {
                        report.push(
                            id,
                            format!(
                                "cpt row {r} has {} entries, expected {}",
                                row.len(),
                                node.states.len()
                            ),
                        );
                        continue;
                    }
                    if !row.iter().all(|&p| is_probability(p)) {
                        report.push(id, format!("cpt row {r} has an entry outside [0, 1]"));
                        continue;
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                        report.push(id, format!("row not normalized (row {r} sums to {sum})"));
                    }
                }
            }
            Distribution::Cpt(_) => {}
            Distribution::NoisyOr(params) => {
                if node.states.len() != 2 {
                    report.push(id, "noisy-or child must be binary");
                }
                if !node.states.contains(&params.true_state) {
                    report.push(
                        id,
                        format!("true_state `{}` is not a state of the node", params.true_state),
                    );
                }
                if params.thetas.len() != node.parents.len() {
                    report.push(
                        id,
                        format!(
                            "{} thetas for {} parents",
                            params.thetas.len(),
                            node.parents.len()
                        ),
                    );
                }
                if params.triggering.len() != node.parents.len() {
                    report.push(
                        id,
                        format!(
                            "{} triggering states for {} parents",
                            params.triggering.len(),
                            node.parents.len()
                        ),
                    );
                }
                if !is_probability(params.leak) {
                    report.push(id, format!("leak {} outside [0, 1]", params.leak));
                }
                for (parent, &theta) in node.parents.iter().zip(&params.thetas) {
                    if !is_probability(theta) {
                        report.push(id, format!("theta for {parent} ({theta}) outside [0, 1]"));
                    }
                }
                for (parent, trigger) in node.parents.iter().zip(&params.triggering) {
                    if let Some(p) = network.get(parent) {
                        if p.states.len() != 2 {
                            report.push(id, format!("noisy-or parent {parent} is not binary"));
                        }
                        if !p.states.contains(trigger) {
                            report.push(
                                id,
                                format!("triggering state `{trigger}` is not a state of {parent}"),
                            );
                        }
                    }
                }
            }
        }

        if let Some(vm) = &node.value_map {
            if node.states.len() != 2 {
                report.push(id, "value map on a non-binary node");
            }
            if let Some(reason) = vm.check() {
                report.push(id, reason);
            }
        }
    }

    if let Err(Error::Cycle(node)) = order_nodes(network, true) {
        report.push(&node, "directed cycle");
    }
    report
}

/// Parents before children; among ready nodes the lexicographically smallest id goes first.
pub fn topological_order(network: &Network) -> Result<Vec<String>> {
    order_nodes(network, false)
}

fn order_nodes(network: &Network, skip_missing: bool) -> Result<Vec<String>> {
    let mut pending: BTreeMap<&str, usize> = BTreeMap::new();
    let mut children: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for node in network.nodes() {
        let mut count = 0;
        for parent in &node.parents {
            if !network.contains(parent) {
                if skip_missing {
                    continue;
                }
                return Err(Error::UnknownNode(parent.clone()));
            }
            count += 1;
            children.entry(parent.as_str()).or_default().push(&node.id);
        }
        pending.insert(&node.id, count);
    }

    let mut ready: BTreeSet<&str> = pending
        .iter()
        .filter(|(_, &n)| n == 0)
        .map(|(&id, _)| id)
        .collect();
    let mut order = Vec::with_capacity(network.len());
    while let Some(id) = ready.pop_first() {
        order.push(id.to_string());
        for &child in children.get(id).map(Vec::as_slice).unwrap_or(&[]) {
            let n = pending.get_mut(child).expect("child registered");
            *n -= 1;
            if *n == 0 {
                ready.insert(child);
            }
        }
    }

    if order.len() < network.len() {
        let stuck = pending
            .iter()
            .find(|(_, &n)| n > 0)
            .map(|(&id, _)| id)
            .expect("unordered node exists");
        return Err(Error::Cycle(stuck.to_string()));
    }
    Ok(order)
}

/// Expected capacity of a thresholded node: `P(low)·low_submean + P(high)·high_submean`.
pub fn state_value(node: &Node, posterior: &[f64]) -> Result<f64> {
    let vm = node
        .value_map
        .as_ref()
        .ok_or_else(|| Error::NoValueMap(node.id.clone()))?;
    if posterior.len() != 2 {
        return Err(Error::Parameter(format!(
            "posterior for `{}` has {} entries, expected 2",
            node.id,
            posterior.len()
        )));
    }
    let sum: f64 = posterior.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE || !posterior.iter().all(|&p| is_probability(p))
    {
        return Err(Error::Parameter(format!(
            "posterior for `{}` is not a distribution",
            node.id
        )));
    }
    Ok(posterior[0] * vm.low_submean + posterior[1] * vm.high_submean)
}

// Wire format.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    layer: Layer,
    states: Vec<String>,
    #[serde(default)]
    parents: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cpt: Option<ExplicitCpt>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    noisy_or: Option<NoisyOrParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value_map: Option<ValueMap>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    auxiliary: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkRecord {
    #[serde(default)]
    metadata: Metadata,
    nodes: BTreeMap<String, NodeRecord>,
}

impl TryFrom<NetworkRecord> for Network {
    type Error = String;

    fn try_from(record: NetworkRecord) -> std::result::Result<Self, String> {
        let mut network = Network::new(record.metadata);
        for (id, r) in record.nodes {
            let distribution = match (r.cpt, r.noisy_or) {
                (Some(cpt), None) => Distribution::Cpt(cpt),
                (None, Some(params)) => Distribution::NoisyOr(params),
                (Some(_), Some(_)) => {
                    return Err(format!("node `{id}` has both \"cpt\" and \"noisy_or\""))
                }
                (None, None) => {
                    return Err(format!("node `{id}` needs one of \"cpt\" or \"noisy_or\""))
                }
            };
            network.insert(Node {
                id,
                layer: r.layer,
                states: r.states,
                parents: r.parents,
                distribution,
                value_map: r.value_map,
                auxiliary: r.auxiliary,
            });
        }
        Ok(network)
    }
}

impl From<Network> for NetworkRecord {
    fn from(network: Network) -> Self {
        let nodes = network
            .nodes
            .into_iter()
            .map(|(id, node)| {
                let (cpt, noisy_or) = match node.distribution {
                    Distribution::Cpt(c) => (Some(c), None),
                    Distribution::NoisyOr(p) => (None, Some(p)),
                };
                let record = NodeRecord {
                    layer: node.layer,
                    states: node.states,
                    parents: node.parents,
                    cpt,
                    noisy_or,
                    value_map: node.value_map,
                    auxiliary: node.auxiliary,
                };
                (id, record)
            })
            .collect();
        NetworkRecord {
            metadata: network.metadata,
            nodes,
        }
    }
}
