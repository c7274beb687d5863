//! Survey ingestion, expert aggregation and network assembly.
//!
//! A survey holds one [`ExpertResponse`] per panellist, covering the four
//! question sets: capacity estimates and influencing factors per component
//! (`qs1a`..`qs1c`), the wind/solar usage split (`qs2`), causal effects of
//! components on the balancing and bulk totals (`qs3a`, `qs3b`) and the grid
//! scenario table (`qs4`). All percentages are stored raw (0 to 100).
//!
//! Aggregation is a linear opinion pool. Under [`Weighting::ConfidenceLinear`]
//! each expert's weight for a question is their stated confidence divided by
//! the sum of confidences of everyone who answered that question.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_file, Error, Result};
use crate::model::{
    ExplicitCpt, Layer, Metadata, Network, Node, NoisyOrParams, ScenarioRoles, ValueMap,
};

/// Allowed deviation from 100 for a row of scenario percentages.
pub const ROW_SUM_TOLERANCE: f64 = 0.5;
/// Rows and columns of the `qs2` and `qs4` tables.
pub const TABLE_SIZE: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityEstimate {
    pub capacity_gw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

/// A causal effect in percent with optional confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatedEffect {
    pub effect: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CausalAnswers {
    #[serde(default)]
    pub effects: BTreeMap<String, RatedEffect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leak: Option<RatedEffect>,
}

/// Four rows of four percentages, parent combinations ordered with the first
/// parent varying slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableAnswer {
    pub rows: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertResponse {
    pub id: String,
    pub confidence_default: f64,
    #[serde(default)]
    pub qs1a: BTreeMap<String, CapacityEstimate>,
    #[serde(default)]
    pub qs1b: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub qs1c: BTreeMap<String, CausalAnswers>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qs2: Option<TableAnswer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qs3a: Option<CausalAnswers>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qs3b: Option<CausalAnswers>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qs4: Option<TableAnswer>,
}

impl ExpertResponse {
    fn confidence(&self, stated: Option<f64>) -> f64 {
        stated.unwrap_or(self.confidence_default)
    }

    fn causal(&self, question: &CausalQuestion) -> Option<&CausalAnswers> {
        match question {
            CausalQuestion::Component(c) => self.qs1c.get(c),
            CausalQuestion::Balancing => self.qs3a.as_ref(),
            CausalQuestion::Bulk => self.qs3b.as_ref(),
        }
    }

    fn table(&self, question: TableQuestion) -> Option<&TableAnswer> {
        match question {
            TableQuestion::StorageUse => self.qs2.as_ref(),
            TableQuestion::GridScenarios => self.qs4.as_ref(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Survey {
    pub experts: Vec<ExpertResponse>,
}

fn check_percent(expert: &str, field: &str, value: f64) -> Result<()> {
    if value.is_finite() && (0.0..=100.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Survey(format!(
            "expert {expert}: {field} = {value} is outside [0, 100]"
        )))
    }
}

fn check_table(expert: &ExpertResponse, name: &str, table: &TableAnswer) -> Result<()> {
    if let Some(c) = table.confidence {
        check_percent(&expert.id, &format!("{name}.confidence"), c)?;
    }
    for (r, row) in table.rows.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            check_percent(&expert.id, &format!("{name}.rows[{r}][{k}]"), v)?;
        }
        let sum: f64 = row.iter().sum();
        if (sum - 100.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::Survey(format!(
                "expert {}: {name} row {} sums to {sum}, expected 100 ± {ROW_SUM_TOLERANCE}",
                expert.id,
                r + 1
            )));
        }
    }
    Ok(())
}

fn check_causal(expert: &ExpertResponse, name: &str, answers: &CausalAnswers) -> Result<()> {
    let rated = answers
        .effects
        .iter()
        .map(|(k, v)| (format!("{name}.{k}"), v))
        .chain(answers.leak.iter().map(|v| (format!("{name}.Leak"), v)));
    for (field, r) in rated {
        check_percent(&expert.id, &format!("{field}.effect"), r.effect)?;
        if let Some(c) = r.confidence {
            check_percent(&expert.id, &format!("{field}.confidence"), c)?;
        }
    }
    Ok(())
}

impl Survey {
    pub fn from_json(text: &str) -> Result<Self> {
        let survey: Survey = serde_json::from_str(text)?;
        survey.validate()?;
        Ok(survey)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Survey::from_json(&read_file(path.as_ref())?)
    }

    /// Range checks on every percentage and capacity, row sums on the tables.
    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for e in &self.experts {
            if !ids.insert(&e.id) {
                return Err(Error::Survey(format!("duplicate expert id `{}`", e.id)));
            }
            check_percent(&e.id, "confidence_default", e.confidence_default)?;
            for (component, est) in &e.qs1a {
                if !(est.capacity_gw.is_finite() && est.capacity_gw >= 0.0) {
                    return Err(Error::Survey(format!(
                        "expert {}: qs1a.{component}.capacity_gw = {} must be a non-negative number",
                        e.id, est.capacity_gw
                    )));
                }
                if let Some(c) = est.confidence {
                    check_percent(&e.id, &format!("qs1a.{component}.confidence"), c)?;
                }
            }
            for (component, factors) in &e.qs1b {
                if factors.len() > 3 {
                    return Err(Error::Survey(format!(
                        "expert {}: qs1b.{component} names {} factors, at most 3 allowed",
                        e.id,
                        factors.len()
                    )));
                }
            }
            for (component, answers) in &e.qs1c {
                check_causal(e, &format!("qs1c.{component}"), answers)?;
            }
            if let Some(a) = &e.qs3a {
                check_causal(e, "qs3a", a)?;
            }
            if let Some(a) = &e.qs3b {
                check_causal(e, "qs3b", a)?;
            }
            if let Some(t) = &e.qs2 {
                check_table(e, "qs2", t)?;
            }
            if let Some(t) = &e.qs4 {
                check_table(e, "qs4", t)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Uniform,
    #[default]
    ConfidenceLinear,
}

impl fmt::Display for Weighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Weighting::Uniform => "uniform",
            Weighting::ConfidenceLinear => "confidence_linear",
        })
    }
}

impl std::str::FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Weighting::Uniform),
            "confidence_linear" => Ok(Weighting::ConfidenceLinear),
            other => Err(Error::Parameter(format!(
                "unknown weighting `{other}` (expected uniform or confidence_linear)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregationPolicy {
    pub weighting: Weighting,
}

impl AggregationPolicy {
    pub fn uniform() -> Self {
        AggregationPolicy {
            weighting: Weighting::Uniform,
        }
    }

    pub fn confidence_linear() -> Self {
        AggregationPolicy {
            weighting: Weighting::ConfidenceLinear,
        }
    }

    /// Normalized weights for one question. All-zero confidences fall back to uniform.
    pub fn weights(&self, confidences: &[f64]) -> Vec<f64> {
        let n = confidences.len() as f64;
        let total: f64 = confidences.iter().sum();
        match self.weighting {
            Weighting::ConfidenceLinear if total > 0.0 => {
                confidences.iter().map(|c| c / total).collect()
            }
            _ => vec![1.0 / n; confidences.len()],
        }
    }

    /// Pooled value of `(value, confidence)` answers.
    pub fn pool(&self, answers: &[(f64, f64)]) -> f64 {
        let total: f64 = answers.iter().map(|(_, c)| c).sum();
        match self.weighting {
            Weighting::ConfidenceLinear if total > 0.0 => {
                answers.iter().map(|(v, c)| v * c).sum::<f64>() / total
            }
            _ => answers.iter().map(|(v, _)| v).sum::<f64>() / answers.len() as f64,
        }
    }
}

/// Panel summary for one capacity component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityAggregate {
    pub component: String,
    pub mean_gw: f64,
    /// Absent when no estimate falls below the mean.
    pub low_submean_gw: Option<f64>,
    /// Absent when no estimate has positive weight at or above the mean.
    pub high_submean_gw: Option<f64>,
    pub mean_confidence: f64,
    pub responses: usize,
}

impl CapacityAggregate {
    /// Value map thresholded at the panel mean; an empty bucket collapses onto the mean.
    pub fn value_map(&self) -> ValueMap {
        let (low, high) = match (self.low_submean_gw, self.high_submean_gw) {
            (Some(l), Some(h)) => (l, h),
            _ => {
                log::warn!(
                    "component {}: empty capacity bucket, value map degenerates to the mean {}",
                    self.component,
                    self.mean_gw
                );
                (self.mean_gw, self.mean_gw)
            }
        };
        ValueMap::new(self.mean_gw, low, high)
    }
}

pub fn aggregate_capacity(
    responses: &[ExpertResponse],
    component: &str,
    policy: AggregationPolicy,
) -> Result<CapacityAggregate> {
    let answers: Vec<(f64, f64)> = responses
        .iter()
        .filter_map(|e| {
            e.qs1a
                .get(component)
                .map(|est| (est.capacity_gw, e.confidence(est.confidence)))
        })
        .collect();
    if answers.is_empty() {
        return Err(Error::Survey(format!(
            "no qs1a capacity estimates for `{component}`"
        )));
    }
    let mean = policy.pool(&answers);
    let eps = 1e-9 * mean.abs().max(1.0);
    let (high, low): (Vec<_>, Vec<_>) = answers.iter().copied().partition(|(v, _)| *v >= mean - eps);
    let bucket = |b: &[(f64, f64)]| -> Option<f64> {
        if b.is_empty() {
            return None;
        }
        if policy.weighting == Weighting::ConfidenceLinear
            && b.iter().all(|(_, c)| *c <= 0.0)
            && answers.iter().any(|(_, c)| *c > 0.0)
        {
            return None;
        }
        Some(policy.pool(b))
    };
    let mean_confidence =
        answers.iter().map(|(_, c)| c).sum::<f64>() / answers.len() as f64;
    Ok(CapacityAggregate {
        component: component.to_string(),
        mean_gw: mean,
        low_submean_gw: bucket(&low),
        high_submean_gw: bucket(&high),
        mean_confidence,
        responses: answers.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CausalQuestion {
    /// `qs1c`: external factors acting on one capacity component.
    Component(String),
    /// `qs3a`: balancing solutions acting on total balancing capacity.
    Balancing,
    /// `qs3b`: bulk sources acting on total bulk capacity.
    Bulk,
}

impl fmt::Display for CausalQuestion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CausalQuestion::Component(c) => write!(f, "qs1c.{c}"),
            CausalQuestion::Balancing => f.write_str("qs3a"),
            CausalQuestion::Bulk => f.write_str("qs3b"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableQuestion {
    /// `qs2`: use of wind and solar output.
    StorageUse,
    /// `qs4`: grid management scenarios given bulk and balancing capacity.
    GridScenarios,
}

impl fmt::Display for TableQuestion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TableQuestion::StorageUse => "qs2",
            TableQuestion::GridScenarios => "qs4",
        })
    }
}

/// Pooled causal strengths in [0, 1], one per factor in the order given, plus the leak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IciParams {
    pub thetas: Vec<f64>,
    pub leak: f64,
}

impl IciParams {
    pub fn into_noisy_or(
        self,
        true_state: impl Into<String>,
        triggering: Vec<String>,
    ) -> NoisyOrParams {
        NoisyOrParams::new(self.thetas, self.leak, true_state, triggering)
    }
}

pub fn build_ici_params<S: AsRef<str>>(
    responses: &[ExpertResponse],
    question: &CausalQuestion,
    factors: &[S],
    policy: AggregationPolicy,
) -> Result<IciParams> {
    let pooled = |label: &str, pick: &dyn Fn(&CausalAnswers) -> Option<&RatedEffect>| {
        let answers: Vec<(f64, f64)> = responses
            .iter()
            .filter_map(|e| {
                e.causal(question)
                    .and_then(pick)
                    .map(|r| (r.effect, e.confidence(r.confidence)))
            })
            .collect();
        if answers.is_empty() {
            return Err(Error::Survey(format!(
                "{question}: no responses for `{label}`"
            )));
        }
        Ok((policy.pool(&answers) / 100.0).clamp(0.0, 1.0))
    };

    let thetas = factors
        .iter()
        .map(|f| {
            let f = f.as_ref();
            pooled(f, &|a: &CausalAnswers| a.effects.get(f))
        })
        .collect::<Result<Vec<f64>>>()?;
    let leak = pooled("Leak", &|a: &CausalAnswers| a.leak.as_ref())?;
    Ok(IciParams { thetas, leak })
}

/// Element-wise pooled table, divided by 100 and renormalized per row.
pub fn build_cpt(
    responses: &[ExpertResponse],
    question: TableQuestion,
    policy: AggregationPolicy,
) -> Result<ExplicitCpt> {
    if responses.is_empty() {
        return Err(Error::Survey(format!("{question}: no responses")));
    }
    let mut tables = Vec::with_capacity(responses.len());
    for e in responses {
        let t = e
            .table(question)
            .ok_or_else(|| Error::Survey(format!("expert {}: missing {question}", e.id)))?;
        for r in 0..TABLE_SIZE {
            match t.rows.get(r) {
                Some(row) if row.len() == TABLE_SIZE => {}
                Some(row) => {
                    return Err(Error::Survey(format!(
                        "expert {}: {question} row {} has {} entries, expected {TABLE_SIZE}",
                        e.id,
                        r + 1,
                        row.len()
                    )))
                }
                None => {
                    return Err(Error::Survey(format!(
                        "expert {}: {question} is missing row {}",
                        e.id,
                        r + 1
                    )))
                }
            }
        }
        tables.push((t, e.confidence(t.confidence)));
    }

    let mut rows = Vec::with_capacity(TABLE_SIZE);
    for r in 0..TABLE_SIZE {
        let mut row: Vec<f64> = (0..TABLE_SIZE)
            .map(|k| {
                let answers: Vec<(f64, f64)> =
                    tables.iter().map(|(t, c)| (t.rows[r][k], *c)).collect();
                policy.pool(&answers) / 100.0
            })
            .collect();
        let sum: f64 = row.iter().sum();
        for v in &mut row {
            *v /= sum;
        }
        rows.push(row);
    }
    Ok(ExplicitCpt::new(rows))
}

/// Factors named in `qs1b` for `component`, by mention count then name; at most `k`.
pub fn top_factors(responses: &[ExpertResponse], component: &str, k: usize) -> Vec<(String, usize)> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for e in responses {
        if let Some(named) = e.qs1b.get(component) {
            let distinct: BTreeSet<&str> = named.iter().map(String::as_str).collect();
            for f in distinct {
                *counts.entry(f).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(String, usize)> =
        counts.into_iter().map(|(f, n)| (f.to_string(), n)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    ranked
}

/// Causal-strength bands used as an interview aid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Band {
    pub label: &'static str,
    pub low: f64,
    pub high: f64,
}

/// The five-level causal impact scale and the nine-level likelihood scale.
///
/// Bands are closed on the right: the first covers `[low, high]`, every
/// following band `(low, high]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactScale {
    pub causal: Vec<Band>,
    pub likelihood: Vec<Band>,
}

impl Default for ImpactScale {
    fn default() -> Self {
        let band = |label, low, high| Band { label, low, high };
        ImpactScale {
            causal: vec![
                band("non-existent or very weak", 0.0, 20.0),
                band("weak", 20.0, 40.0),
                band("moderate", 40.0, 60.0),
                band("strong", 60.0, 80.0),
                band("very strong", 80.0, 100.0),
            ],
            likelihood: vec![
                band("impossible", 0.0, 0.0),
                band("almost no chance", 0.0, 5.0),
                band("very unlikely", 5.0, 20.0),
                band("unlikely", 20.0, 45.0),
                band("roughly even chance", 45.0, 55.0),
                band("likely", 55.0, 80.0),
                band("very likely", 80.0, 95.0),
                band("almost certain", 95.0, 99.0),
                band("certain", 99.0, 100.0),
            ],
        }
    }
}

impl ImpactScale {
    fn lookup(bands: &[Band], percent: f64) -> Option<&Band> {
        bands.iter().enumerate().find_map(|(i, b)| {
            let above = if i == 0 { percent >= b.low } else { percent > b.low };
            (above && percent <= b.high).then_some(b)
        })
    }

    pub fn causal_band(&self, percent: f64) -> Option<&Band> {
        Self::lookup(&self.causal, percent)
    }

    pub fn likelihood_band(&self, percent: f64) -> Option<&Band> {
        Self::lookup(&self.likelihood, percent)
    }
}

// Layout

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// `[absent, present]`; defaults to `["false", "true"]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<[String; 2]>,
}

impl FactorSpec {
    fn states(&self) -> [String; 2] {
        self.states
            .clone()
            .unwrap_or_else(|| ["false".to_string(), "true".to_string()])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubMeans {
    pub low_submean: f64,
    pub high_submean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TotalSpec {
    pub id: String,
    pub threshold: f64,
    pub members: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_map: Option<SubMeans>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub id: String,
    pub states: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageSpec {
    pub id: String,
    pub wind: String,
    pub solar: String,
    pub states: Vec<String>,
}

fn default_parents() -> usize {
    3
}

/// Which nodes exist in each layer and how the totals are thresholded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layout {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub factors: Vec<FactorSpec>,
    pub components: Vec<ComponentSpec>,
    #[serde(default = "default_parents")]
    pub parents_per_component: usize,
    /// Total domestic controllable bulk generation; parameterized by `qs3b`.
    pub bulk: TotalSpec,
    /// Total new balancing capacity; parameterized by `qs3a`.
    pub balance: TotalSpec,
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub storage: Option<StorageSpec>,
}

impl Layout {
    pub fn from_json(text: &str) -> Result<Self> {
        let layout: Layout = serde_json::from_str(text)?;
        layout.validate()?;
        Ok(layout)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Layout::from_json(&read_file(path.as_ref())?)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        let all = self
            .factors
            .iter()
            .map(|f| &f.id)
            .chain(self.components.iter().map(|c| &c.id))
            .chain([&self.bulk.id, &self.balance.id, &self.grid.id])
            .chain(self.storage.iter().map(|s| &s.id));
        for id in all {
            if !ids.insert(id.as_str()) {
                return Err(Error::Layout(format!("duplicate node id `{id}`")));
            }
        }
        let components: BTreeSet<&str> = self.components.iter().map(|c| c.id.as_str()).collect();
        for total in [&self.bulk, &self.balance] {
            if !(total.threshold.is_finite() && total.threshold >= 0.0) {
                return Err(Error::Layout(format!("{}: invalid threshold", total.id)));
            }
            for m in &total.members {
                if !components.contains(m.as_str()) {
                    return Err(Error::Layout(format!(
                        "{}: member `{m}` is not a component",
                        total.id
                    )));
                }
            }
        }
        if self.grid.states.len() != TABLE_SIZE {
            return Err(Error::Layout(format!(
                "{}: expected {TABLE_SIZE} scenario states",
                self.grid.id
            )));
        }
        if let Some(s) = &self.storage {
            for parent in [&s.wind, &s.solar] {
                if !components.contains(parent.as_str()) {
                    return Err(Error::Layout(format!(
                        "{}: parent `{parent}` is not a component",
                        s.id
                    )));
                }
            }
            if s.states.len() != TABLE_SIZE {
                return Err(Error::Layout(format!(
                    "{}: expected {TABLE_SIZE} usage states",
                    s.id
                )));
            }
        }
        if self.parents_per_component == 0 {
            return Err(Error::Layout("parents_per_component must be at least 1".into()));
        }
        Ok(())
    }

    /// Every component, factor and member referenced by the survey is declared here.
    pub fn check_survey(&self, survey: &Survey) -> Result<()> {
        let components: BTreeSet<&str> = self.components.iter().map(|c| c.id.as_str()).collect();
        let factors: BTreeSet<&str> = self.factors.iter().map(|f| f.id.as_str()).collect();
        let unknown = |expert: &str, field: String| {
            Err(Error::Survey(format!("expert {expert}: unknown {field}")))
        };
        for e in &survey.experts {
            for c in e.qs1a.keys().chain(e.qs1b.keys()).chain(e.qs1c.keys()) {
                if !components.contains(c.as_str()) {
                    return unknown(&e.id, format!("component `{c}`"));
                }
            }
            for (c, named) in &e.qs1b {
                for f in named {
                    if !factors.contains(f.as_str()) {
                        return unknown(&e.id, format!("factor `{f}` in qs1b.{c}"));
                    }
                }
            }
            for (c, answers) in &e.qs1c {
                for f in answers.effects.keys() {
                    if !factors.contains(f.as_str()) {
                        return unknown(&e.id, format!("factor `{f}` in qs1c.{c}"));
                    }
                }
            }
            for (name, answers, total) in [
                ("qs3a", &e.qs3a, &self.balance),
                ("qs3b", &e.qs3b, &self.bulk),
            ] {
                if let Some(a) = answers {
                    for m in a.effects.keys() {
                        if !total.members.contains(m) {
                            return unknown(&e.id, format!("{} member `{m}` in {name}", total.id));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Label fragment for a threshold: at most two decimals, trailing zeros dropped.
pub fn threshold_label(threshold: f64) -> String {
    let s = format!("{threshold:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn threshold_states(threshold: f64) -> [String; 2] {
    let t = threshold_label(threshold);
    [format!("lt{t}"), format!("ge{t}")]
}

/// Builds the four-layer network from a survey.
///
/// L1 factors are uniform roots. Each L2 component is a Noisy-OR child of its
/// top-ranked factors, thresholded at the panel mean with sub-mean value maps.
/// The bulk and balancing totals are Noisy-OR children of their member
/// components, and the grid node takes the pooled `qs4` table. The optional
/// storage-use node takes the pooled `qs2` table over wind and solar.
pub fn assemble_network(
    survey: &Survey,
    layout: &Layout,
    policy: AggregationPolicy,
) -> Result<Network> {
    survey.validate()?;
    layout.validate()?;
    layout.check_survey(survey)?;
    let responses = &survey.experts;

    let mut metadata = Metadata {
        name: layout.name.clone(),
        version: Some("1".into()),
        roles: Some(ScenarioRoles {
            grid: layout.grid.id.clone(),
            bulk: layout.bulk.id.clone(),
            balance: layout.balance.id.clone(),
        }),
        ..Default::default()
    };
    metadata
        .extra
        .insert("weighting".into(), serde_json::json!(policy.weighting.to_string()));
    metadata
        .extra
        .insert("experts".into(), serde_json::json!(responses.len()));
    let mut network = Network::new(metadata);

    let mut present_state = BTreeMap::new();
    for f in &layout.factors {
        let states = f.states();
        present_state.insert(f.id.as_str(), states[1].clone());
        network.insert(Node::with_cpt(
            f.id.as_str(),
            Layer::L1,
            &[&states[0], &states[1]],
            &[],
            vec![vec![0.5, 0.5]],
        ));
    }

    let mut high_state = BTreeMap::new();
    for c in &layout.components {
        let aggregate = aggregate_capacity(responses, &c.id, policy)?;
        let value_map = aggregate.value_map();
        let states = threshold_states(value_map.threshold);
        let parents: Vec<String> = top_factors(responses, &c.id, layout.parents_per_component)
            .into_iter()
            .map(|(f, _)| f)
            .collect();
        let ici = build_ici_params(
            responses,
            &CausalQuestion::Component(c.id.clone()),
            &parents,
            policy,
        )?;
        let triggering = parents
            .iter()
            .map(|p| present_state[p.as_str()].clone())
            .collect();
        let refs: Vec<&str> = parents.iter().map(String::as_str).collect();
        network.insert(
            Node::with_noisy_or(
                c.id.as_str(),
                Layer::L2,
                &[&states[0], &states[1]],
                &refs,
                ici.into_noisy_or(states[1].clone(), triggering),
            )
            .value_map(value_map),
        );
        high_state.insert(c.id.as_str(), states[1].clone());
    }

    for (total, question) in [
        (&layout.bulk, CausalQuestion::Bulk),
        (&layout.balance, CausalQuestion::Balancing),
    ] {
        let states = threshold_states(total.threshold);
        let ici = build_ici_params(responses, &question, &total.members, policy)?;
        let triggering = total
            .members
            .iter()
            .map(|m| high_state[m.as_str()].clone())
            .collect();
        let refs: Vec<&str> = total.members.iter().map(String::as_str).collect();
        let mut node = Node::with_noisy_or(
            total.id.as_str(),
            Layer::L3,
            &[&states[0], &states[1]],
            &refs,
            ici.into_noisy_or(states[1].clone(), triggering),
        );
        if let Some(sub) = total.value_map {
            node = node.value_map(ValueMap::new(total.threshold, sub.low_submean, sub.high_submean));
        }
        network.insert(node);
    }

    let grid_states: Vec<&str> = layout.grid.states.iter().map(String::as_str).collect();
    network.insert(Node::with_cpt(
        layout.grid.id.as_str(),
        Layer::L4,
        &grid_states,
        &[&layout.bulk.id, &layout.balance.id],
        build_cpt(responses, TableQuestion::GridScenarios, policy)?.rows,
    ));

    if let Some(s) = &layout.storage {
        let states: Vec<&str> = s.states.iter().map(String::as_str).collect();
        network.insert(Node::with_cpt(
            s.id.as_str(),
            Layer::L2,
            &states,
            &[&s.wind, &s.solar],
            build_cpt(responses, TableQuestion::StorageUse, policy)?.rows,
        ));
    }

    network.validate().into_result()?;
    Ok(network)
}
