//! Noisy-OR expansion and parent-friendly divorcing.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Distribution, ExplicitCpt, Network, Node, NoisyOrParams};

/// `P(Y = 1 | X) = 1 - (1 - leak) * prod_{i present} (1 - theta_i)`.
pub fn noisy_or_probability(params: &NoisyOrParams, present: &[bool]) -> Result<f64> {
    if present.len() != params.thetas.len() {
        return Err(Error::Parameter(format!(
            "{} presence flags for {} thetas",
            present.len(),
            params.thetas.len()
        )));
    }
    let untriggered: f64 = params
        .thetas
        .iter()
        .zip(present)
        .filter(|(_, &on)| on)
        .map(|(theta, _)| 1.0 - theta)
        .product();
    Ok(1.0 - (1.0 - params.leak) * untriggered)
}

/// Expands a Noisy-OR node into its full `2^n`-row table.
pub fn compile_noisy_or(network: &Network, node: &Node) -> Result<ExplicitCpt> {
    let params = match &node.distribution {
        Distribution::NoisyOr(p) => p,
        Distribution::Cpt(_) => {
            return Err(Error::Parameter(format!(
                "node `{}` has an explicit cpt, not noisy-or parameters",
                node.id
            )))
        }
    };
    let unsupported = |reason: String| Error::UnsupportedStructure {
        node: node.id.clone(),
        reason,
    };
    if node.states.len() != 2 {
        return Err(unsupported("noisy-or child must be binary".into()));
    }
    if params.thetas.len() != node.parents.len() || params.triggering.len() != node.parents.len()
    {
        return Err(Error::Parameter(format!(
            "node `{}`: parameter count does not match {} parents",
            node.id,
            node.parents.len()
        )));
    }
    let true_index = node.state_index(&params.true_state)?;

    let mut trigger_index = Vec::with_capacity(node.parents.len());
    for (parent_id, trigger) in node.parents.iter().zip(&params.triggering) {
        let parent = network.node(parent_id)?;
        if parent.states.len() != 2 {
            return Err(unsupported(format!("parent `{parent_id}` is not binary")));
        }
        trigger_index.push(parent.state_index(trigger)?);
    }

    let n = node.parents.len();
    let mut rows = Vec::with_capacity(1 << n);
    let mut present = vec![false; n];
    for combo in 0..(1usize << n) {
        // first parent varies slowest
        for (i, flag) in present.iter_mut().enumerate() {
            let state = (combo >> (n - 1 - i)) & 1;
            *flag = state == trigger_index[i];
        }
        let p_true = noisy_or_probability(params, &present)?;
        let mut row = vec![0.0; 2];
        row[true_index] = p_true;
        row[1 - true_index] = 1.0 - p_true;
        rows.push(row);
    }
    Ok(ExplicitCpt::new(rows))
}

/// Table for any node: explicit CPTs are cloned, Noisy-OR nodes are expanded.
pub fn node_table(network: &Network, node: &Node) -> Result<ExplicitCpt> {
    match &node.distribution {
        Distribution::Cpt(cpt) => Ok(cpt.clone()),
        Distribution::NoisyOr(_) => compile_noisy_or(network, node),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntroducedNode {
    pub id: String,
    /// Original child this aggregator feeds (possibly through other aggregators).
    pub child: String,
    pub grouped_parents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivorcePlan {
    pub max_parents_per_child: usize,
    pub introduced_nodes: Vec<IntroducedNode>,
}

/// State labels of every auxiliary aggregator.
pub const AUX_STATES: [&str; 2] = ["absent", "present"];

/// Bounds the parent count of every Noisy-OR child by inserting OR aggregators.
///
/// Parents are grouped left to right into chunks of `max_parents_per_child`.
/// Each chunk becomes a leak-free Noisy-OR node carrying the chunk's thetas;
/// the child keeps its leak and sees the aggregators as deterministic causes.
/// If there are still too many aggregators the grouping repeats on them.
pub fn divorce(network: &Network, max_parents_per_child: usize) -> Result<(Network, DivorcePlan)> {
    if max_parents_per_child < 2 {
        return Err(Error::Parameter(format!(
            "max_parents_per_child must be at least 2 (got {max_parents_per_child})"
        )));
    }
    network.validate().into_result()?;

    let mut out = network.clone();
    let mut taken: BTreeSet<String> = network.nodes().map(|n| n.id.clone()).collect();
    let mut plan = DivorcePlan {
        max_parents_per_child,
        introduced_nodes: Vec::new(),
    };

    let wide: Vec<Node> = network
        .nodes()
        .filter(|n| n.is_noisy_or() && n.parents.len() > max_parents_per_child)
        .cloned()
        .collect();

    for node in wide {
        let Distribution::NoisyOr(params) = &node.distribution else {
            unreachable!("filtered to noisy-or nodes");
        };
        // (parent id, theta, triggering state)
        let mut inputs: Vec<(String, f64, String)> = node
            .parents
            .iter()
            .zip(&params.thetas)
            .zip(&params.triggering)
            .map(|((p, &t), s)| (p.clone(), t, s.clone()))
            .collect();
        let mut counter = 0usize;

        while inputs.len() > max_parents_per_child {
            let mut next = Vec::new();
            for chunk in inputs.chunks(max_parents_per_child) {
                let id = fresh_id(&node.id, &mut counter, &taken);
                taken.insert(id.clone());
                let parents: Vec<String> = chunk.iter().map(|(p, _, _)| p.clone()).collect();
                let aux = Node {
                    id: id.clone(),
                    layer: node.layer,
                    states: AUX_STATES.iter().map(|s| s.to_string()).collect(),
                    parents: parents.clone(),
                    distribution: Distribution::NoisyOr(NoisyOrParams {
                        thetas: chunk.iter().map(|(_, t, _)| *t).collect(),
                        leak: 0.0,
                        true_state: AUX_STATES[1].into(),
                        triggering: chunk.iter().map(|(_, _, s)| s.clone()).collect(),
                    }),
                    value_map: None,
                    auxiliary: true,
                };
                out.insert(aux);
                plan.introduced_nodes.push(IntroducedNode {
                    id: id.clone(),
                    child: node.id.clone(),
                    grouped_parents: parents,
                });
                next.push((id, 1.0, AUX_STATES[1].to_string()));
            }
            inputs = next;
        }

        let mut rewired = node.clone();
        rewired.parents = inputs.iter().map(|(p, _, _)| p.clone()).collect();
        rewired.distribution = Distribution::NoisyOr(NoisyOrParams {
            thetas: inputs.iter().map(|(_, t, _)| *t).collect(),
            leak: params.leak,
            true_state: params.true_state.clone(),
            triggering: inputs.iter().map(|(_, _, s)| s.clone()).collect(),
        });
        out.insert(rewired);
    }

    if !plan.introduced_nodes.is_empty() {
        out.metadata.divorce_plan = Some(plan.clone());
    }
    Ok((out, plan))
}

fn fresh_id(child: &str, counter: &mut usize, taken: &BTreeSet<String>) -> String {
    loop {
        *counter += 1;
        let id = format!("{child}__ici_{counter}");
        if !taken.contains(&id) {
            return id;
        }
    }
}
