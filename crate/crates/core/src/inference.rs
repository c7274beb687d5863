//! Exact inference by variable elimination, plus a full-enumeration oracle.
//!
//! Elimination is restricted to the ancestors of the query and evidence nodes
//! (everything else sums to one). The order is greedy min-fill with ties
//! broken by node id. After every elimination step the new factor is scaled
//! to a maximum of one and the scale is accumulated in log space, so the
//! evidence probability survives long products without underflow.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::compiler::node_table;
use crate::error::{Error, Result};
use crate::model::Network;

/// Observed states keyed by node id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Evidence {
    assignments: BTreeMap<String, String>,
}

impl Evidence {
    pub fn new() -> Self {
        Evidence::default()
    }

    pub fn with(mut self, node: impl Into<String>, state: impl Into<String>) -> Self {
        self.insert(node, state);
        self
    }

    pub fn insert(&mut self, node: impl Into<String>, state: impl Into<String>) {
        self.assignments.insert(node.into(), state.into());
    }

    pub fn remove(&mut self, node: &str) -> Option<String> {
        self.assignments.remove(node)
    }

    pub fn get(&self, node: &str) -> Option<&str> {
        self.assignments.get(node).map(String::as_str)
    }

    pub fn contains(&self, node: &str) -> bool {
        self.assignments.contains_key(node)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.assignments
            .iter()
            .map(|(n, s)| (n.as_str(), s.as_str()))
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Union of two evidence sets; conflicting assignments are an error.
    pub fn union(&self, other: &Evidence) -> Result<Evidence> {
        let mut out = self.clone();
        for (node, state) in other.iter() {
            match out.get(node) {
                Some(existing) if existing != state => {
                    return Err(Error::InvalidEvidence(format!(
                        "conflicting states for {node}: {existing} vs {state}"
                    )))
                }
                _ => out.insert(node, state),
            }
        }
        Ok(out)
    }

    /// Every node exists, is not an auxiliary aggregator, and has the given state.
    pub fn validate(&self, network: &Network) -> Result<()> {
        for (node, state) in self.iter() {
            let n = network
                .get(node)
                .ok_or_else(|| Error::InvalidEvidence(format!("unknown node `{node}`")))?;
            if n.auxiliary {
                return Err(Error::InvalidEvidence(format!(
                    "`{node}` is an auxiliary node and cannot be observed"
                )));
            }
            if !n.states.iter().any(|s| s == state) {
                return Err(Error::InvalidEvidence(format!(
                    "node `{node}` has no state `{state}` (valid states: {})",
                    n.states.join(", ")
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Evidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("{}");
        }
        let parts: Vec<String> = self.iter().map(|(n, s)| format!("{n}={s}")).collect();
        f.write_str(&parts.join(", "))
    }
}

impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for Evidence {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        let mut e = Evidence::new();
        for (k, v) in iter {
            e.insert(k, v);
        }
        e
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSet {
    pub marginals: BTreeMap<String, Vec<f64>>,
    /// Natural log of `P(evidence)`.
    pub log_evidence: f64,
}

impl PosteriorSet {
    pub fn get(&self, node: &str) -> Option<&[f64]> {
        self.marginals.get(node).map(Vec::as_slice)
    }

    pub fn evidence_probability(&self) -> f64 {
        self.log_evidence.exp()
    }
}

/// Posterior of one node together with the evidence probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    pub distribution: Vec<f64>,
    pub log_evidence: f64,
}

impl Marginal {
    pub fn evidence_probability(&self) -> f64 {
        self.log_evidence.exp()
    }
}

#[derive(Debug, Clone)]
struct Factor {
    vars: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    fn scalar(value: f64) -> Self {
        Factor {
            vars: Vec::new(),
            cards: Vec::new(),
            values: vec![value],
        }
    }

    /// Strides of this factor's variables, laid out along `vars` (0 when absent).
    fn strides_along(&self, vars: &[usize]) -> Vec<usize> {
        let mut own = vec![0; self.vars.len()];
        let mut s = 1;
        for k in (0..self.vars.len()).rev() {
            own[k] = s;
            s *= self.cards[k];
        }
        vars.iter()
            .map(|v| {
                self.vars
                    .iter()
                    .position(|x| x == v)
                    .map_or(0, |k| own[k])
            })
            .collect()
    }

    fn product(&self, other: &Factor) -> Factor {
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        for (k, &v) in other.vars.iter().enumerate() {
            if !vars.contains(&v) {
                vars.push(v);
                cards.push(other.cards[k]);
            }
        }
        let size: usize = cards.iter().product();
        let sa = self.strides_along(&vars);
        let sb = other.strides_along(&vars);
        let mut values = Vec::with_capacity(size);
        let mut assignment = vec![0usize; vars.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        for _ in 0..size {
            values.push(self.values[ia] * other.values[ib]);
            for j in (0..vars.len()).rev() {
                assignment[j] += 1;
                ia += sa[j];
                ib += sb[j];
                if assignment[j] < cards[j] {
                    break;
                }
                ia -= sa[j] * cards[j];
                ib -= sb[j] * cards[j];
                assignment[j] = 0;
            }
        }
        Factor {
            vars,
            cards,
            values,
        }
    }

    fn sum_out(&self, var: usize) -> Factor {
        let p = self
            .vars
            .iter()
            .position(|&v| v == var)
            .expect("variable in scope");
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(p);
        cards.remove(p);
        let size: usize = cards.iter().product();
        let mut out_strides = vec![0usize; self.vars.len()];
        let mut s = 1;
        for k in (0..self.vars.len()).rev() {
            if k != p {
                out_strides[k] = s;
                s *= self.cards[k];
            }
        }
        let mut values = vec![0.0; size];
        let mut assignment = vec![0usize; self.vars.len()];
        let mut out = 0usize;
        for &x in &self.values {
            values[out] += x;
            for j in (0..self.vars.len()).rev() {
                assignment[j] += 1;
                out += out_strides[j];
                if assignment[j] < self.cards[j] {
                    break;
                }
                out -= out_strides[j] * self.cards[j];
                assignment[j] = 0;
            }
        }
        Factor {
            vars,
            cards,
            values,
        }
    }

    fn reduce(&self, var: usize, state: usize) -> Factor {
        let Some(p) = self.vars.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let inner: usize = self.cards[p + 1..].iter().product();
        let block = inner * self.cards[p];
        let mut values = Vec::with_capacity(self.values.len() / self.cards[p]);
        for chunk in self.values.chunks(block) {
            values.extend_from_slice(&chunk[state * inner..(state + 1) * inner]);
        }
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(p);
        cards.remove(p);
        Factor {
            vars,
            cards,
            values,
        }
    }

    /// Scales to a maximum of one; returns the log of the removed scale.
    fn rescale(&mut self) -> Option<f64> {
        let max = self.values.iter().cloned().fold(0.0, f64::max);
        if max <= 0.0 {
            return None;
        }
        for v in &mut self.values {
            *v /= max;
        }
        Some(max.ln())
    }
}

/// A network prepared for repeated queries: Noisy-OR nodes are expanded once.
#[derive(Debug, Clone)]
pub struct InferenceEngine<'a> {
    network: &'a Network,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    cards: Vec<usize>,
    parents: Vec<Vec<usize>>,
    tables: Vec<Vec<f64>>,
}

impl<'a> InferenceEngine<'a> {
    pub fn new(network: &'a Network) -> Result<Self> {
        network.validate().into_result()?;
        let ids = network.topological_order()?;
        let index: HashMap<String, usize> = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        let mut cards = Vec::with_capacity(ids.len());
        let mut parents = Vec::with_capacity(ids.len());
        let mut tables = Vec::with_capacity(ids.len());
        for id in &ids {
            let node = network.node(id)?;
            cards.push(node.cardinality());
            parents.push(node.parents.iter().map(|p| index[p]).collect());
            tables.push(node_table(network, node)?.rows.concat());
        }
        Ok(InferenceEngine {
            network,
            ids,
            index,
            cards,
            parents,
            tables,
        })
    }

    pub fn network(&self) -> &Network {
        self.network
    }

    fn resolve(&self, evidence: &Evidence) -> Result<Vec<(usize, usize)>> {
        evidence.validate(self.network)?;
        evidence
            .iter()
            .map(|(node, state)| {
                let i = self.index[node];
                Ok((i, self.network.node(node)?.state_index(state)?))
            })
            .collect()
    }

    /// Unnormalized factor over `query` (or a scalar) plus accumulated log scale.
    fn eliminate(&self, evidence: &[(usize, usize)], query: Option<usize>) -> (f64, Vec<f64>) {
        let observed: BTreeMap<usize, usize> = evidence.iter().cloned().collect();

        // ancestors of everything touched by the query
        let mut relevant = BTreeSet::new();
        let mut stack: Vec<usize> = observed.keys().cloned().chain(query).collect();
        while let Some(v) = stack.pop() {
            if relevant.insert(v) {
                stack.extend(self.parents[v].iter().cloned());
            }
        }

        let mut factors: Vec<Factor> = relevant
            .iter()
            .map(|&v| {
                let mut vars = self.parents[v].clone();
                vars.push(v);
                let cards = vars.iter().map(|&u| self.cards[u]).collect();
                let mut f = Factor {
                    vars,
                    cards,
                    values: self.tables[v].clone(),
                };
                for (&var, &state) in &observed {
                    if f.vars.contains(&var) {
                        f = f.reduce(var, state);
                    }
                }
                f
            })
            .collect();

        let hidden: Vec<usize> = relevant
            .iter()
            .cloned()
            .filter(|v| !observed.contains_key(v) && Some(*v) != query)
            .collect();
        let order = self.min_fill_order(&factors, &hidden);

        let mut log_scale = 0.0;
        for var in order {
            let (touching, rest): (Vec<Factor>, Vec<Factor>) =
                factors.into_iter().partition(|f| f.vars.contains(&var));
            factors = rest;
            let mut merged = touching
                .iter()
                .fold(Factor::scalar(1.0), |acc, f| acc.product(f))
                .sum_out(var);
            match merged.rescale() {
                Some(ln) => log_scale += ln,
                None => return (f64::NEG_INFINITY, vec![0.0; self.query_card(query)]),
            }
            factors.push(merged);
        }

        let mut result = factors
            .iter()
            .fold(Factor::scalar(1.0), |acc, f| acc.product(f));
        match result.rescale() {
            Some(ln) => log_scale += ln,
            None => return (f64::NEG_INFINITY, vec![0.0; self.query_card(query)]),
        }
        if let Some(q) = query {
            if result.vars.is_empty() {
                // query had no factor of its own (cannot happen: it is relevant)
                return (log_scale, vec![result.values[0]; self.cards[q]]);
            }
            debug_assert_eq!(result.vars, vec![q]);
        }
        (log_scale, result.values)
    }

    fn query_card(&self, query: Option<usize>) -> usize {
        query.map_or(1, |q| self.cards[q])
    }

    fn min_fill_order(&self, factors: &[Factor], hidden: &[usize]) -> Vec<usize> {
        let mut adjacency: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for f in factors {
            for &a in &f.vars {
                let entry = adjacency.entry(a).or_default();
                for &b in &f.vars {
                    if a != b {
                        entry.insert(b);
                    }
                }
            }
        }
        let mut remaining: BTreeSet<usize> = hidden.iter().cloned().collect();
        let mut order = Vec::with_capacity(remaining.len());
        while !remaining.is_empty() {
            let best = remaining
                .iter()
                .cloned()
                .min_by(|&a, &b| {
                    let fa = fill_in(&adjacency, a);
                    let fb = fill_in(&adjacency, b);
                    fa.cmp(&fb).then_with(|| self.ids[a].cmp(&self.ids[b]))
                })
                .expect("non-empty");
            let neighbours: Vec<usize> = adjacency
                .get(&best)
                .map(|s| s.iter().cloned().collect())
                .unwrap_or_default();
            for &a in &neighbours {
                for &b in &neighbours {
                    if a != b {
                        adjacency.entry(a).or_default().insert(b);
                    }
                }
                if let Some(s) = adjacency.get_mut(&a) {
                    s.remove(&best);
                }
            }
            adjacency.remove(&best);
            remaining.remove(&best);
            order.push(best);
        }
        order
    }

    /// `P(evidence)`; 1 for empty evidence.
    pub fn joint_probability(&self, evidence: &Evidence) -> Result<f64> {
        let resolved = self.resolve(evidence)?;
        if resolved.is_empty() {
            return Ok(1.0);
        }
        let (log_scale, values) = self.eliminate(&resolved, None);
        Ok(log_scale.exp() * values[0])
    }

    /// `P(node | evidence)` and `ln P(evidence)` in one elimination pass.
    pub fn marginal(&self, evidence: &Evidence, node: &str) -> Result<Marginal> {
        let resolved = self.resolve(evidence)?;
        let q = *self
            .index
            .get(node)
            .ok_or_else(|| Error::UnknownNode(node.to_string()))?;
        if let Some(observed) = evidence.get(node) {
            let state = self.network.node(node)?.state_index(observed)?;
            let (log_scale, values) = self.eliminate(&resolved, None);
            let log_evidence = log_scale + values[0].ln();
            if !log_evidence.is_finite() {
                return Err(Error::ImpossibleEvidence(evidence.to_string()));
            }
            let mut distribution = vec![0.0; self.cards[q]];
            distribution[state] = 1.0;
            return Ok(Marginal {
                distribution,
                log_evidence,
            });
        }
        let (log_scale, values) = self.eliminate(&resolved, Some(q));
        let total: f64 = values.iter().sum();
        if total <= 0.0 || !log_scale.is_finite() {
            return Err(Error::ImpossibleEvidence(evidence.to_string()));
        }
        Ok(Marginal {
            distribution: values.iter().map(|v| v / total).collect(),
            log_evidence: log_scale + total.ln(),
        })
    }

    pub fn posterior<S: AsRef<str>>(&self, evidence: &Evidence, query: &[S]) -> Result<PosteriorSet> {
        let resolved = self.resolve(evidence)?;
        let log_evidence = if resolved.is_empty() {
            0.0
        } else {
            let (log_scale, values) = self.eliminate(&resolved, None);
            log_scale + values[0].ln()
        };
        if !log_evidence.is_finite() {
            return Err(Error::ImpossibleEvidence(evidence.to_string()));
        }
        let mut marginals = BTreeMap::new();
        for id in query {
            let id = id.as_ref();
            let m = self.marginal(evidence, id)?;
            marginals.insert(id.to_string(), m.distribution);
        }
        Ok(PosteriorSet {
            marginals,
            log_evidence,
        })
    }
}

fn fill_in(adjacency: &BTreeMap<usize, BTreeSet<usize>>, v: usize) -> usize {
    let Some(neighbours) = adjacency.get(&v) else {
        return 0;
    };
    let n: Vec<usize> = neighbours.iter().cloned().collect();
    let mut missing = 0;
    for (i, &a) in n.iter().enumerate() {
        for &b in &n[i + 1..] {
            if !adjacency.get(&a).is_some_and(|s| s.contains(&b)) {
                missing += 1;
            }
        }
    }
    missing
}

/// Exact posteriors by variable elimination.
pub fn posterior<S: AsRef<str>>(
    network: &Network,
    evidence: &Evidence,
    query: &[S],
) -> Result<PosteriorSet> {
    InferenceEngine::new(network)?.posterior(evidence, query)
}

pub fn joint_probability(network: &Network, evidence: &Evidence) -> Result<f64> {
    InferenceEngine::new(network)?.joint_probability(evidence)
}

/// Largest joint state space [`enumerate_joint`] will walk.
pub const ENUMERATION_LIMIT: u128 = 1 << 24;

/// Posteriors by summing the full joint distribution. Exponential; meant as a
/// reference for small networks.
pub fn enumerate_joint<S: AsRef<str>>(
    network: &Network,
    evidence: &Evidence,
    query: &[S],
) -> Result<PosteriorSet> {
    network.validate().into_result()?;
    evidence.validate(network)?;
    let order = network.topological_order()?;
    let size = order
        .iter()
        .map(|id| network.get(id).map_or(1, |n| n.cardinality() as u128))
        .product::<u128>();
    if size > ENUMERATION_LIMIT {
        return Err(Error::StateSpaceTooLarge {
            size,
            limit: ENUMERATION_LIMIT,
        });
    }

    let pos: HashMap<&str, usize> = order
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut cards = Vec::new();
    let mut parent_pos = Vec::new();
    let mut tables = Vec::new();
    let mut fixed: Vec<Option<usize>> = Vec::new();
    for id in &order {
        let node = network.node(id)?;
        cards.push(node.cardinality());
        parent_pos.push(node.parents.iter().map(|p| pos[p.as_str()]).collect::<Vec<_>>());
        tables.push(node_table(network, node)?);
        fixed.push(match evidence.get(id) {
            Some(s) => Some(node.state_index(s)?),
            None => None,
        });
    }

    let query_pos: Vec<(String, usize)> = query
        .iter()
        .map(|q| {
            let q = q.as_ref();
            pos.get(q)
                .map(|&i| (q.to_string(), i))
                .ok_or_else(|| Error::UnknownNode(q.to_string()))
        })
        .collect::<Result<_>>()?;
    let mut sums: Vec<Vec<f64>> = query_pos.iter().map(|(_, i)| vec![0.0; cards[*i]]).collect();
    let mut total = 0.0;

    let mut assignment = vec![0usize; order.len()];
    'outer: for _ in 0..size {
        let consistent = fixed
            .iter()
            .zip(&assignment)
            .all(|(f, &a)| f.is_none_or(|s| s == a));
        if consistent {
            let mut p = 1.0;
            for v in 0..order.len() {
                let row = parent_pos[v]
                    .iter()
                    .fold(0usize, |acc, &u| acc * cards[u] + assignment[u]);
                p *= tables[v].rows[row][assignment[v]];
            }
            total += p;
            for (k, (_, i)) in query_pos.iter().enumerate() {
                sums[k][assignment[*i]] += p;
            }
        }
        for v in (0..order.len()).rev() {
            assignment[v] += 1;
            if assignment[v] < cards[v] {
                continue 'outer;
            }
            assignment[v] = 0;
        }
    }

    if total <= 0.0 {
        return Err(Error::ImpossibleEvidence(evidence.to_string()));
    }
    let marginals = query_pos
        .into_iter()
        .zip(sums)
        .map(|((id, _), s)| (id, s.into_iter().map(|x| x / total).collect()))
        .collect();
    Ok(PosteriorSet {
        marginals,
        log_evidence: total.ln(),
    })
}
