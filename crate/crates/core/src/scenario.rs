//! Capacity tables, bucket totals, peak availability and grid scenario summaries.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_file, Error, Result};
use crate::inference::{Evidence, InferenceEngine};
use crate::model::{state_value, Layer, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bucket {
    Bulk,
    Balancing,
    Variable,
    Import,
    Other,
}

impl Bucket {
    pub const ALL: [Bucket; 5] = [
        Bucket::Bulk,
        Bucket::Balancing,
        Bucket::Variable,
        Bucket::Import,
        Bucket::Other,
    ];
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bucket::Bulk => "bulk",
            Bucket::Balancing => "balancing",
            Bucket::Variable => "variable",
            Bucket::Import => "import",
            Bucket::Other => "other",
        })
    }
}

/// Component id to bucket.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassificationRules {
    pub buckets: BTreeMap<String, Bucket>,
}

impl ClassificationRules {
    pub fn bucket(&self, component: &str) -> Option<Bucket> {
        self.buckets.get(component).copied()
    }

    pub fn members(&self, bucket: Bucket) -> Vec<&str> {
        self.buckets
            .iter()
            .filter(|(_, b)| **b == bucket)
            .map(|(id, _)| id.as_str())
            .collect()
    }
}

/// Named classification variants.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassificationPresets {
    pub default: String,
    pub presets: BTreeMap<String, ClassificationRules>,
}

impl ClassificationPresets {
    pub fn from_json(text: &str) -> Result<Self> {
        let presets: ClassificationPresets = serde_json::from_str(text)?;
        presets.get(None)?;
        Ok(presets)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        ClassificationPresets::from_json(&read_file(path.as_ref())?)
    }

    /// The named preset, or the default one.
    pub fn get(&self, name: Option<&str>) -> Result<&ClassificationRules> {
        let name = name.unwrap_or(&self.default);
        self.presets.get(name).ok_or_else(|| {
            Error::Parameter(format!(
                "unknown classification preset `{name}` (available: {})",
                self.presets.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvailabilityFactor {
    pub peak_hour: f64,
    pub peak_season: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvailabilityProfile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub components: BTreeMap<String, AvailabilityFactor>,
}

impl AvailabilityProfile {
    pub fn from_json(text: &str) -> Result<Self> {
        let profile: AvailabilityProfile = serde_json::from_str(text)?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        AvailabilityProfile::from_json(&read_file(path.as_ref())?)
    }

    pub fn validate(&self) -> Result<()> {
        for (id, f) in &self.components {
            for (name, v) in [("peak_hour", f.peak_hour), ("peak_season", f.peak_season)] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Parameter(format!(
                        "availability {name} factor for `{id}` is {v}, expected [0, 1]"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Capacity of one component; `posterior` is empty for rows not taken from a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityRow {
    pub component: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub posterior: Vec<f64>,
    pub gw: f64,
}

impl CapacityRow {
    pub fn new(component: impl Into<String>, gw: f64) -> Self {
        CapacityRow {
            component: component.into(),
            posterior: Vec::new(),
            gw,
        }
    }
}

/// Value of every L2 node that has a value map, under `evidence`.
pub fn capacity_table(network: &Network, evidence: &Evidence) -> Result<Vec<CapacityRow>> {
    let engine = InferenceEngine::new(network)?;
    capacity_table_with(&engine, evidence)
}

pub fn capacity_table_with(engine: &InferenceEngine<'_>, evidence: &Evidence) -> Result<Vec<CapacityRow>> {
    engine
        .network()
        .nodes()
        .filter(|n| n.layer == Layer::L2 && !n.auxiliary && n.value_map.is_some())
        .map(|node| {
            let posterior = engine.marginal(evidence, &node.id)?.distribution;
            let gw = state_value(node, &posterior)?;
            Ok(CapacityRow {
                component: node.id.clone(),
                posterior,
                gw,
            })
        })
        .collect()
}

/// GW totals for every bucket, zero for empty ones.
pub fn bucket_sums(rows: &[CapacityRow], rules: &ClassificationRules) -> Result<BTreeMap<Bucket, f64>> {
    let mut sums: BTreeMap<Bucket, f64> = Bucket::ALL.iter().map(|&b| (b, 0.0)).collect();
    for row in rows {
        let bucket = rules
            .bucket(&row.component)
            .ok_or_else(|| Error::Unclassified(row.component.clone()))?;
        *sums.entry(bucket).or_default() += row.gw;
    }
    Ok(sums)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityRow {
    pub component: String,
    pub capacity_gw: f64,
    pub peak_hour_gw: f64,
    pub peak_season_gw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityReport {
    pub rows: Vec<AvailabilityRow>,
    pub capacity_gw: f64,
    pub peak_hour_gw: f64,
    pub peak_season_gw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub import_gw: Option<f64>,
    /// Peak-hour availability plus import, when import is given.
    pub total_peak_hour_gw: f64,
    pub total_peak_season_gw: f64,
}

pub fn availability(
    rows: &[CapacityRow],
    profile: &AvailabilityProfile,
    import_gw: Option<f64>,
) -> Result<AvailabilityReport> {
    profile.validate()?;
    if let Some(i) = import_gw {
        if !(i.is_finite() && i >= 0.0) {
            return Err(Error::Parameter(format!("import capacity must be non-negative, got {i}")));
        }
    }
    let rows = rows
        .iter()
        .map(|r| {
            let f = profile
                .components
                .get(&r.component)
                .ok_or_else(|| Error::MissingFactor(r.component.clone()))?;
            Ok(AvailabilityRow {
                component: r.component.clone(),
                capacity_gw: r.gw,
                peak_hour_gw: r.gw * f.peak_hour,
                peak_season_gw: r.gw * f.peak_season,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let capacity_gw = rows.iter().map(|r| r.capacity_gw).sum();
    let peak_hour_gw: f64 = rows.iter().map(|r| r.peak_hour_gw).sum();
    let peak_season_gw: f64 = rows.iter().map(|r| r.peak_season_gw).sum();
    let extra = import_gw.unwrap_or(0.0);
    Ok(AvailabilityReport {
        rows,
        capacity_gw,
        peak_hour_gw,
        peak_season_gw,
        import_gw,
        total_peak_hour_gw: peak_hour_gw + extra,
        total_peak_season_gw: peak_season_gw + extra,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSummary {
    pub node: String,
    pub states: Vec<String>,
    pub distribution: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub grid: NodeSummary,
    pub bulk: NodeSummary,
    pub balance: NodeSummary,
    pub log_evidence: f64,
}

/// Grid scenario probabilities with the bulk and balancing context.
pub fn scenario_summary(network: &Network, evidence: &Evidence) -> Result<ScenarioSummary> {
    let engine = InferenceEngine::new(network)?;
    scenario_summary_with(&engine, evidence)
}

pub fn scenario_summary_with(engine: &InferenceEngine<'_>, evidence: &Evidence) -> Result<ScenarioSummary> {
    let network = engine.network();
    let roles = network.roles();
    let summarize = |id: &str| -> Result<(NodeSummary, f64)> {
        let node = network.node(id)?;
        let m = engine.marginal(evidence, id)?;
        let gw = match node.value_map {
            Some(_) => Some(state_value(node, &m.distribution)?),
            None => None,
        };
        Ok((
            NodeSummary {
                node: id.to_string(),
                states: node.states.clone(),
                distribution: m.distribution,
                gw,
            },
            m.log_evidence,
        ))
    };
    let (grid, log_evidence) = summarize(&roles.grid)?;
    let (bulk, _) = summarize(&roles.bulk)?;
    let (balance, _) = summarize(&roles.balance)?;
    Ok(ScenarioSummary {
        grid,
        bulk,
        balance,
        log_evidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Metadata, Node, ValueMap};

    fn rules(pairs: &[(&str, Bucket)]) -> ClassificationRules {
        ClassificationRules {
            buckets: pairs.iter().map(|(k, b)| (k.to_string(), *b)).collect(),
        }
    }

    #[test]
    fn value_of_large_scale_nuclear() {
        let node = Node::with_cpt("LSN", Layer::L2, &["lt5", "ge5"], &[], vec![vec![0.192, 0.808]])
            .value_map(ValueMap::new(5.0, 2.5, 7.5));
        let net = Network::from_nodes(Metadata::default(), [node]).unwrap();
        let rows = capacity_table(&net, &Evidence::new()).unwrap();
        assert!((rows[0].gw - 6.54).abs() < 1e-12);
        let rows = capacity_table(&net, &Evidence::new().with("LSN", "ge5")).unwrap();
        assert_eq!(rows[0].gw, 7.5);
    }

    #[test]
    fn uniform_posterior_gives_midpoint() {
        let node = |id: &str, vm| {
            Node::with_cpt(id, Layer::L2, &["lo", "hi"], &[], vec![vec![0.5, 0.5]]).value_map(vm)
        };
        let net = Network::from_nodes(
            Metadata::default(),
            [node("A", ValueMap::new(5.0, 2.5, 7.5)), node("B", ValueMap::new(1.0, 0.2, 1.4))],
        )
        .unwrap();
        let rows = capacity_table(&net, &Evidence::new()).unwrap();
        assert!((rows[0].gw - 5.0).abs() < 1e-12);
        assert!((rows[1].gw - 0.8).abs() < 1e-12);
    }

    #[test]
    fn sums_and_unclassified() {
        let rows = vec![CapacityRow::new("A", 1.5), CapacityRow::new("B", 2.0)];
        let r = rules(&[("A", Bucket::Bulk), ("B", Bucket::Bulk)]);
        let sums = bucket_sums(&rows, &r).unwrap();
        assert_eq!(sums[&Bucket::Bulk], 3.5);
        assert_eq!(sums[&Bucket::Balancing], 0.0);
        let err = bucket_sums(&rows, &rules(&[("A", Bucket::Bulk)])).unwrap_err();
        assert!(err.to_string().contains('B'));
    }

    #[test]
    fn availability_factors() {
        let profile = AvailabilityProfile {
            name: None,
            components: [(
                "Wind".to_string(),
                AvailabilityFactor {
                    peak_hour: 0.06,
                    peak_season: 0.06,
                },
            )]
            .into(),
        };
        let report = availability(&[CapacityRow::new("Wind", 21.4)], &profile, None).unwrap();
        assert!((report.peak_hour_gw - 1.284).abs() < 1e-12);
        assert_eq!(report.total_peak_hour_gw, report.peak_hour_gw);
        let report = availability(&[CapacityRow::new("Wind", 21.4)], &profile, Some(5.8)).unwrap();
        assert!((report.total_peak_hour_gw - 7.084).abs() < 1e-12);
        let err = availability(&[CapacityRow::new("Solar", 1.0)], &profile, None).unwrap_err();
        assert!(matches!(err, Error::MissingFactor(c) if c == "Solar"));
    }

    #[test]
    fn profile_rejects_out_of_range() {
        let err = AvailabilityProfile::from_json(
            r#"{"components": {"Wind": {"peak_hour": 1.2, "peak_season": 0.0}}}"#,
        );
        assert!(err.is_err());
    }
}
