//! Request and response types shared by the command line and the HTTP service.
//!
//! Every operation here is a pure function of the loaded model and the
//! request, so `gridbn <cmd> --json` and the matching endpoint produce the
//! same document.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use gridbn_core::model::{state_value, Layer, ValueMap};
use gridbn_core::optimizer::{default_candidates, PlanRow};
use gridbn_core::scenario::{capacity_table_with, scenario_summary_with, AvailabilityReport, ScenarioSummary};
use gridbn_core::{
    availability, bucket_sums, optimize, plan_report, AvailabilityProfile, Bucket, CapacityRow,
    ClassificationPresets, CostTable, Evidence, InferenceEngine, Network, OptimizationPlan, Target,
    Weights,
};

use crate::error::{ApiError, Result};

pub const DEFAULT_PROFILE: &str = include_str!("../assets/availability_default.json");
pub const DEFAULT_CLASSIFICATION: &str = include_str!("../assets/classification.json");

pub fn default_profile() -> AvailabilityProfile {
    AvailabilityProfile::from_json(DEFAULT_PROFILE).expect("embedded availability profile")
}

pub fn default_classification() -> ClassificationPresets {
    ClassificationPresets::from_json(DEFAULT_CLASSIFICATION).expect("embedded classification")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeView {
    pub id: String,
    pub layer: Layer,
    pub states: Vec<String>,
    /// Parents with auxiliary nodes replaced by what they aggregate.
    pub parents: Vec<String>,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_map: Option<ValueMap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkView {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub grid: String,
    pub bulk: String,
    pub balance: String,
    pub nodes: Vec<NodeView>,
}

fn visible_parents(network: &Network, id: &str, out: &mut Vec<String>, seen: &mut BTreeSet<String>) {
    let Some(node) = network.get(id) else {
        return;
    };
    for p in &node.parents {
        match network.get(p) {
            Some(parent) if parent.auxiliary => visible_parents(network, p, out, seen),
            _ => {
                if seen.insert(p.clone()) {
                    out.push(p.clone());
                }
            }
        }
    }
}

pub fn network_view(network: &Network) -> NetworkView {
    let roles = network.roles();
    let mut nodes: Vec<NodeView> = network
        .nodes()
        .filter(|n| !n.auxiliary)
        .map(|n| {
            let mut parents = Vec::new();
            visible_parents(network, &n.id, &mut parents, &mut BTreeSet::new());
            NodeView {
                id: n.id.clone(),
                layer: n.layer,
                states: n.states.clone(),
                parents,
                kind: if n.is_noisy_or() { "noisy_or" } else { "cpt" }.to_string(),
                value_map: n.value_map,
            }
        })
        .collect();
    nodes.sort_by(|a, b| a.layer.cmp(&b.layer).then_with(|| a.id.cmp(&b.id)));
    NetworkView {
        name: network.metadata.name.clone(),
        grid: roles.grid,
        bulk: roles.bulk,
        balance: roles.balance,
        nodes,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosteriorRequest {
    #[serde(default)]
    pub evidence: Evidence,
    /// Nodes to report; every visible node when empty.
    #[serde(default)]
    pub query: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePosterior {
    pub node: String,
    pub layer: Layer,
    pub states: Vec<String>,
    pub distribution: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorResponse {
    pub evidence: Evidence,
    pub evidence_probability: f64,
    /// Present when the network has grid, bulk and balancing nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<ScenarioSummary>,
    pub nodes: Vec<NodePosterior>,
}

pub fn posteriors(network: &Network, request: &PosteriorRequest) -> Result<PosteriorResponse> {
    let engine = InferenceEngine::new(network)?;
    request.evidence.validate(network)?;
    let ids: Vec<String> = if request.query.is_empty() {
        network_view(network).nodes.into_iter().map(|n| n.id).collect()
    } else {
        request.query.clone()
    };
    let set = engine.posterior(&request.evidence, &ids)?;
    let roles = network.roles();
    let scenarios = if [&roles.grid, &roles.bulk, &roles.balance].iter().all(|id| network.contains(id)) {
        Some(scenario_summary_with(&engine, &request.evidence)?)
    } else {
        None
    };
    let mut nodes = Vec::with_capacity(ids.len());
    for id in ids {
        let node = network.node(&id)?;
        let distribution = set.marginals[&id].clone();
        let gw = match node.value_map {
            Some(_) => Some(state_value(node, &distribution)?),
            None => None,
        };
        nodes.push(NodePosterior {
            node: id,
            layer: node.layer,
            states: node.states.clone(),
            distribution,
            gw,
        });
    }
    Ok(PosteriorResponse {
        evidence: request.evidence.clone(),
        evidence_probability: set.evidence_probability(),
        scenarios,
        nodes,
    })
}

/// `"Node=state"` or `{"node": ..., "state": ...}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetSpec {
    Text(String),
    Pair(Target),
}

impl TargetSpec {
    pub fn resolve(&self) -> Result<Target> {
        match self {
            TargetSpec::Text(s) => Ok(s.parse()?),
            TargetSpec::Pair(t) => Ok(t.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeRequest {
    pub target: TargetSpec,
    #[serde(default)]
    pub weights: Weights,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs: Option<CostTable>,
    /// Name of a cost table held by the service; only `"default"` exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub costs_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResponse {
    pub plan: OptimizationPlan,
    pub rows: Vec<PlanRow>,
}

pub fn optimize_plan(
    network: &Network,
    target: &Target,
    weights: Weights,
    costs: &CostTable,
) -> Result<OptimizeResponse> {
    weights.validate()?;
    let plan = optimize(network, target, costs, weights, &default_candidates(network))?;
    let rows = plan_report(&plan);
    Ok(OptimizeResponse { plan, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportResponse {
    pub evidence: Evidence,
    pub preset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    pub capacities: Vec<CapacityRow>,
    pub buckets: BTreeMap<Bucket, f64>,
    pub availability: AvailabilityReport,
}

pub struct ReportOptions<'a> {
    pub presets: &'a ClassificationPresets,
    pub preset: Option<&'a str>,
    pub profile: &'a AvailabilityProfile,
    pub import_gw: Option<f64>,
}

pub fn report(network: &Network, evidence: &Evidence, options: &ReportOptions<'_>) -> Result<ReportResponse> {
    let engine = InferenceEngine::new(network)?;
    evidence.validate(network)?;
    let rules = options.presets.get(options.preset)?;
    let capacities = capacity_table_with(&engine, evidence)?;
    let mut classified = capacities.clone();
    if let Some(gw) = options.import_gw {
        classified.push(CapacityRow::new("Import", gw));
    }
    let buckets = bucket_sums(&classified, rules)?;
    let availability = availability(&capacities, options.profile, options.import_gw)?;
    Ok(ReportResponse {
        evidence: evidence.clone(),
        preset: options.preset.unwrap_or(&options.presets.default).to_string(),
        profile: options.profile.name.clone(),
        capacities,
        buckets,
        availability,
    })
}

/// Parses `Node=state` pairs; a repeated node is a usage error.
pub fn parse_evidence<S: AsRef<str>>(pairs: &[S]) -> Result<Evidence> {
    let mut evidence = Evidence::new();
    for pair in pairs {
        let pair = pair.as_ref();
        let (node, state) = pair
            .split_once('=')
            .filter(|(n, s)| !n.trim().is_empty() && !s.trim().is_empty())
            .ok_or_else(|| ApiError::usage("invalid_evidence", format!("`{pair}` must have the form Node=state")))?;
        if evidence.contains(node.trim()) {
            return Err(ApiError::usage(
                "invalid_evidence",
                format!("node `{}` is set more than once", node.trim()),
            ));
        }
        evidence.insert(node.trim(), state.trim());
    }
    Ok(evidence)
}
