//! Greedy target optimization over capacity components.
//!
//! Each round scores every remaining `(component, state)` pair as
//! `w1·I · w2·E · w3 / C`, where `I` is the change in target probability from
//! fixing the pair, `E` the joint probability of all fixed evidence including
//! the pair and `C` the cost per GW. The best pair is fixed and the search
//! continues until every candidate is assigned.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{read_file, Error, Result};
use crate::inference::{Evidence, InferenceEngine};
use crate::model::{state_value, Layer, Network};

/// Relative tolerance under which two scores count as tied.
pub const SCORE_TIE_TOLERANCE: f64 = 1e-9;
/// Absolute floor for score ties, so rounding noise around zero never decides a pick.
pub const SCORE_TIE_FLOOR: f64 = 1e-15;
/// Absolute tolerance under which two impacts count as tied.
pub const IMPACT_TIE_TOLERANCE: f64 = 1e-12;

/// Construction cost per GW, by component id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CostTable {
    costs: BTreeMap<String, f64>,
}

impl CostTable {
    pub fn new(costs: BTreeMap<String, f64>) -> Result<Self> {
        let table = CostTable { costs };
        table.validate()?;
        Ok(table)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let table: CostTable = serde_json::from_str(text)?;
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        CostTable::from_json(&read_file(path.as_ref())?)
    }

    pub fn validate(&self) -> Result<()> {
        for (id, &c) in &self.costs {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Parameter(format!(
                    "cost for `{id}` must be positive, got {c}"
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, component: &str) -> Option<f64> {
        self.costs.get(component).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.costs.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    /// Every cost multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        CostTable::new(self.costs.iter().map(|(id, c)| (id.clone(), c * k)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            w1: 1.0,
            w2: 1.0,
            w3: 1.0,
        }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("w1", self.w1), ("w2", self.w2), ("w3", self.w3)] {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Parameter(format!("{name} must be positive, got {w}")));
            }
        }
        Ok(())
    }
}

pub fn score(weights: &Weights, impact: f64, joint: f64, cost: f64) -> f64 {
    weights.w1 * impact * weights.w2 * joint * weights.w3 / cost
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub node: String,
    pub state: String,
}

impl Target {
    pub fn new(node: impl Into<String>, state: impl Into<String>) -> Self {
        Target {
            node: node.into(),
            state: state.into(),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.node, self.state)
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('=') {
            Some((node, state)) if !node.is_empty() && !state.is_empty() => {
                Ok(Target::new(node.trim(), state.trim()))
            }
            _ => Err(Error::Parameter(format!(
                "target `{s}` must have the form Node=state"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationStep {
    pub component: String,
    pub state: String,
    /// Value of the component under the evidence fixed before this step.
    pub prior_gw: f64,
    pub proposed_gw: f64,
    pub impact: f64,
    pub joint: f64,
    pub cost: f64,
    pub score: f64,
    /// Target probability once this step's evidence is fixed.
    pub cumulative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationPlan {
    pub target: Target,
    pub weights: Weights,
    pub initial_probability: f64,
    pub final_probability: f64,
    pub steps: Vec<OptimizationStep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminated: Option<String>,
}

impl OptimizationPlan {
    /// Evidence fixed by the first `k` steps.
    pub fn evidence_after(&self, k: usize) -> Evidence {
        self.steps[..k.min(self.steps.len())]
            .iter()
            .map(|s| (s.component.clone(), s.state.clone()))
            .collect()
    }

    pub fn evidence(&self) -> Evidence {
        self.evidence_after(self.steps.len())
    }
}

/// Change in target probability from adding `candidate` to `fixed`.
///
/// `None` when the combined evidence is impossible.
pub fn impact(
    engine: &InferenceEngine<'_>,
    fixed: &Evidence,
    candidate: (&str, &str),
    target: &Target,
) -> Result<Option<f64>> {
    let t = engine.network().node(&target.node)?.state_index(&target.state)?;
    let base = match engine.marginal(fixed, &target.node) {
        Ok(m) => m.distribution[t],
        Err(Error::ImpossibleEvidence(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    Ok(evaluate(engine, fixed, candidate, &target.node, t)?.map(|(p, _)| p - base))
}

/// `(P(target | fixed ∪ candidate), P(fixed ∪ candidate))`, or `None` if impossible.
fn evaluate(
    engine: &InferenceEngine<'_>,
    fixed: &Evidence,
    (component, state): (&str, &str),
    target: &str,
    target_index: usize,
) -> Result<Option<(f64, f64)>> {
    if fixed.contains(component) {
        return Err(Error::Parameter(format!(
            "`{component}` is already fixed"
        )));
    }
    let evidence = fixed.clone().with(component, state);
    match engine.marginal(&evidence, target) {
        Ok(m) => {
            let joint = m.evidence_probability();
            if joint > 0.0 {
                Ok(Some((m.distribution[target_index], joint)))
            } else {
                Ok(None)
            }
        }
        Err(Error::ImpossibleEvidence(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// L2 components carrying a value map, in id order.
pub fn default_candidates(network: &Network) -> Vec<String> {
    network
        .nodes()
        .filter(|n| n.layer == Layer::L2 && !n.auxiliary && n.value_map.is_some())
        .map(|n| n.id.clone())
        .collect()
}

#[derive(Debug, Clone)]
struct Evaluation {
    component: String,
    state_index: usize,
    state: String,
    probability: f64,
    joint: f64,
    impact: f64,
    cost: f64,
    score: f64,
}

/// Ordering of two evaluated candidates: `Less` means `a` is preferred.
pub fn prefer(
    (a_score, a_impact, a_id, a_state): (f64, f64, &str, usize),
    (b_score, b_impact, b_id, b_state): (f64, f64, &str, usize),
) -> Ordering {
    let scale = a_score.abs().max(b_score.abs());
    if (a_score - b_score).abs() > SCORE_TIE_TOLERANCE * scale + SCORE_TIE_FLOOR {
        return b_score.total_cmp(&a_score);
    }
    if (a_impact - b_impact).abs() > IMPACT_TIE_TOLERANCE {
        return b_impact.total_cmp(&a_impact);
    }
    a_id.cmp(b_id).then(a_state.cmp(&b_state))
}

fn ranking(e: &Evaluation) -> (f64, f64, &str, usize) {
    (e.score, e.impact, &e.component, e.state_index)
}

pub fn optimize<S: AsRef<str> + Sync>(
    network: &Network,
    target: &Target,
    costs: &CostTable,
    weights: Weights,
    candidates: &[S],
) -> Result<OptimizationPlan> {
    weights.validate()?;
    costs.validate()?;
    let engine = InferenceEngine::new(network)?;
    let target_index = network.node(&target.node)?.state_index(&target.state)?;

    let mut remaining = Vec::with_capacity(candidates.len());
    for c in candidates {
        let id = c.as_ref();
        let node = network.node(id)?;
        if id == target.node {
            return Err(Error::Parameter(format!("target `{id}` cannot be a candidate")));
        }
        if node.auxiliary {
            return Err(Error::Parameter(format!("`{id}` is an auxiliary node")));
        }
        if node.value_map.is_none() {
            return Err(Error::NoValueMap(id.to_string()));
        }
        let cost = costs
            .get(id)
            .ok_or_else(|| Error::MissingCost(id.to_string()))?;
        if remaining.iter().any(|(r, _)| r == id) {
            return Err(Error::Parameter(format!("duplicate candidate `{id}`")));
        }
        remaining.push((id.to_string(), cost));
    }

    let initial = engine.marginal(&Evidence::new(), &target.node)?.distribution[target_index];
    let mut fixed = Evidence::new();
    let mut current = initial;
    let mut steps = Vec::new();
    let mut terminated = None;

    while !remaining.is_empty() {
        let pairs: Vec<(String, usize, String, f64)> = remaining
            .iter()
            .flat_map(|(id, cost)| {
                let states = network.node(id).map(|n| n.states.clone()).unwrap_or_default();
                states
                    .into_iter()
                    .enumerate()
                    .map(move |(i, s)| (id.clone(), i, s, *cost))
            })
            .collect();
        let evaluations = pairs
            .into_par_iter()
            .map(|(component, state_index, state, cost)| {
                let evaluated = evaluate(&engine, &fixed, (&component, &state), &target.node, target_index)?;
                Ok(evaluated.map(|(probability, joint)| {
                    let impact = probability - current;
                    Evaluation {
                        score: score(&weights, impact, joint, cost),
                        component,
                        state_index,
                        state,
                        probability,
                        joint,
                        impact,
                        cost,
                    }
                }))
            })
            .collect::<Result<Vec<Option<Evaluation>>>>()?;

        let Some(best) = evaluations
            .into_iter()
            .flatten()
            .min_by(|a, b| prefer(ranking(a), ranking(b)))
        else {
            terminated = Some(format!(
                "every remaining candidate is impossible given {fixed}"
            ));
            break;
        };

        let node = network.node(&best.component)?;
        let prior = engine.marginal(&fixed, &best.component)?.distribution;
        let prior_gw = state_value(node, &prior)?;
        let mut point = vec![0.0; node.cardinality()];
        point[best.state_index] = 1.0;
        let proposed_gw = state_value(node, &point)?;

        fixed.insert(best.component.clone(), best.state.clone());
        remaining.retain(|(id, _)| *id != best.component);
        current = best.probability;
        steps.push(OptimizationStep {
            component: best.component,
            state: best.state,
            prior_gw,
            proposed_gw,
            impact: best.impact,
            joint: best.joint,
            cost: best.cost,
            score: best.score,
            cumulative: best.probability,
        });
    }

    Ok(OptimizationPlan {
        target: target.clone(),
        weights,
        initial_probability: initial,
        final_probability: current,
        steps,
        terminated,
    })
}

/// One row of the plan table; the starting row carries only probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRow {
    pub component: String,
    pub prior_gw: Option<f64>,
    pub proposed_gw: Option<f64>,
    pub delta_gw: Option<f64>,
    pub cost: Option<f64>,
    pub joint: f64,
    pub effect: Option<f64>,
    pub cumulative: f64,
}

pub const STARTING_POINT: &str = "Starting point";

/// Tabular view of a plan: a starting row then one row per step. Empty plans
/// yield no rows.
pub fn plan_report(plan: &OptimizationPlan) -> Vec<PlanRow> {
    if plan.steps.is_empty() {
        return Vec::new();
    }
    let mut rows = vec![PlanRow {
        component: STARTING_POINT.to_string(),
        prior_gw: None,
        proposed_gw: None,
        delta_gw: None,
        cost: None,
        joint: 1.0,
        effect: None,
        cumulative: plan.initial_probability,
    }];
    rows.extend(plan.steps.iter().map(|s| PlanRow {
        component: s.component.clone(),
        prior_gw: Some(s.prior_gw),
        proposed_gw: Some(s.proposed_gw),
        delta_gw: Some(s.proposed_gw - s.prior_gw),
        cost: Some(s.cost),
        joint: s.joint,
        effect: Some(s.impact),
        cumulative: s.cumulative,
    }));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Metadata, Node, NoisyOrParams, ValueMap};

    fn vm() -> ValueMap {
        ValueMap::new(1.0, 0.5, 1.5)
    }

    /// Two independent components feeding a Noisy-OR target.
    fn pair_network(theta_a: f64, theta_b: f64) -> Network {
        let comp = |id: &str, p: f64| {
            Node::with_cpt(id, Layer::L2, &["lo", "hi"], &[], vec![vec![1.0 - p, p]]).value_map(vm())
        };
        Network::from_nodes(
            Metadata::default(),
            [
                comp("A", 0.3),
                comp("B", 0.9),
                Node::with_noisy_or(
                    "T",
                    Layer::L3,
                    &["no", "yes"],
                    &["A", "B"],
                    NoisyOrParams::new(vec![theta_a, theta_b], 0.1, "yes", vec!["hi".into(), "hi".into()]),
                ),
            ],
        )
        .unwrap()
    }

    #[test]
    fn score_arithmetic() {
        let w = Weights::default();
        assert!((score(&w, 0.02, 0.3, 1.0) - 0.006).abs() < 1e-15);
        assert!((score(&w, 0.01, 0.9, 1.0) - 0.009).abs() < 1e-15);
        let w = Weights { w1: 2.0, w2: 3.0, w3: 0.5 };
        assert!((score(&w, 0.1, 0.5, 4.0) - 0.0375).abs() < 1e-15);
    }

    #[test]
    fn higher_score_preferred_over_higher_impact() {
        assert_eq!(
            prefer((0.006, 0.02, "A", 1), (0.009, 0.01, "B", 1)),
            Ordering::Greater
        );
        assert_eq!(prefer((0.5, 0.2, "B", 0), (0.5, 0.1, "A", 0)), Ordering::Less);
        assert_eq!(prefer((0.5, 0.1, "B", 0), (0.5, 0.1, "A", 0)), Ordering::Greater);
        assert_eq!(prefer((0.5, 0.1, "A", 1), (0.5, 0.1, "A", 0)), Ordering::Greater);
    }

    #[test]
    fn single_candidate_plan() {
        let net = pair_network(0.8, 0.4);
        let target = Target::new("T", "yes");
        let costs = CostTable::new([("A".to_string(), 1.0)].into()).unwrap();
        let plan = optimize(&net, &target, &costs, Weights::default(), &["A"]).unwrap();
        assert_eq!(plan.steps.len(), 1);
        let step = &plan.steps[0];
        assert_eq!((step.component.as_str(), step.state.as_str()), ("A", "hi"));
        let ev = Evidence::new().with("A", "hi");
        let expected = crate::inference::posterior(&net, &ev, &["T"]).unwrap().marginals["T"][1];
        assert!((step.cumulative - expected).abs() < 1e-12);
        assert!((step.joint - 0.3).abs() < 1e-12);
        assert_eq!(step.proposed_gw, 1.5);
        assert!((step.prior_gw - (0.7 * 0.5 + 0.3 * 1.5)).abs() < 1e-12);
    }

    #[test]
    fn joint_probability_can_outweigh_impact() {
        // Fixing A moves T further, but A=hi is far less likely than B=hi.
        let net = pair_network(0.9, 0.9);
        let target = Target::new("T", "yes");
        let costs = CostTable::new([("A".to_string(), 1.0), ("B".to_string(), 1.0)].into()).unwrap();
        let plan = optimize(&net, &target, &costs, Weights::default(), &["A", "B"]).unwrap();
        assert_eq!(plan.steps.len(), 2);
        assert_eq!(plan.steps[0].component, "B");
        let expensive_b = CostTable::new([("A".to_string(), 1.0), ("B".to_string(), 100.0)].into()).unwrap();
        let plan = optimize(&net, &target, &expensive_b, Weights::default(), &["A", "B"]).unwrap();
        assert_eq!(plan.steps[0].component, "A");
    }

    #[test]
    fn d_separated_candidate_has_no_impact() {
        let mut net = pair_network(0.8, 0.4);
        net.insert(
            Node::with_cpt("C", Layer::L2, &["lo", "hi"], &[], vec![vec![0.5, 0.5]]).value_map(vm()),
        );
        let engine = InferenceEngine::new(&net).unwrap();
        let target = Target::new("T", "yes");
        let d = impact(&engine, &Evidence::new(), ("C", "hi"), &target).unwrap().unwrap();
        assert!(d.abs() < 1e-9);
        let d = impact(&engine, &Evidence::new(), ("A", "hi"), &target).unwrap().unwrap();
        assert!(d > 0.0);
    }

    #[test]
    fn impossible_candidate_is_disqualified() {
        let mut net = pair_network(0.8, 0.4);
        net.insert(
            Node::with_cpt("Z", Layer::L2, &["lo", "hi"], &[], vec![vec![1.0, 0.0]]).value_map(vm()),
        );
        let engine = InferenceEngine::new(&net).unwrap();
        let target = Target::new("T", "yes");
        assert_eq!(impact(&engine, &Evidence::new(), ("Z", "hi"), &target).unwrap(), None);
        let costs = CostTable::new([("Z".to_string(), 1.0)].into()).unwrap();
        let plan = optimize(&net, &target, &costs, Weights::default(), &["Z"]).unwrap();
        assert_eq!(plan.steps[0].state, "lo");
    }

    #[test]
    fn preconditions() {
        let net = pair_network(0.8, 0.4);
        let target = Target::new("T", "yes");
        let costs = CostTable::new([("A".to_string(), 1.0)].into()).unwrap();
        let bad = Weights { w1: 0.0, ..Weights::default() };
        assert!(matches!(optimize(&net, &target, &costs, bad, &["A"]), Err(Error::Parameter(_))));
        assert!(matches!(
            optimize(&net, &target, &costs, Weights::default(), &["B"]),
            Err(Error::MissingCost(_))
        ));
        assert!(matches!(
            optimize(&net, &Target::new("T", "maybe"), &costs, Weights::default(), &["A"]),
            Err(Error::UnknownState { .. })
        ));
        assert!(CostTable::from_json(r#"{"A": 0}"#).is_err());
        assert!("T".parse::<Target>().is_err());
        assert_eq!("T=yes".parse::<Target>().unwrap(), target);
    }

    #[test]
    fn report_rows() {
        let net = pair_network(0.8, 0.4);
        let target = Target::new("T", "yes");
        let costs = CostTable::new([("A".to_string(), 2.0), ("B".to_string(), 3.0)].into()).unwrap();
        let plan = optimize(&net, &target, &costs, Weights::default(), &["A", "B"]).unwrap();
        let rows = plan_report(&plan);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].component, STARTING_POINT);
        assert_eq!(rows[0].joint, 1.0);
        assert_eq!(rows[0].cumulative, plan.initial_probability);
        assert!(rows.windows(2).all(|w| w[1].cumulative >= w[0].cumulative - 1e-12));

        let empty = OptimizationPlan { steps: vec![], ..plan };
        assert!(plan_report(&empty).is_empty());
    }
}
