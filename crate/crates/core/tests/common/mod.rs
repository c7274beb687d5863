#![allow(dead_code)]

use std::path::PathBuf;

use gridbn_core::{assemble_network, AggregationPolicy, Layout, Network, Survey};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture_network() -> Network {
    let survey = Survey::load(fixture("survey.json")).unwrap();
    let layout = Layout::load(fixture("layout.json")).unwrap();
    assemble_network(&survey, &layout, AggregationPolicy::confidence_linear()).unwrap()
}

pub const SCENARIO_TABLE: [[f64; 4]; 4] = [
    [22.9, 16.5, 29.4, 31.2],
    [24.9, 20.8, 39.5, 14.8],
    [31.0, 26.2, 30.3, 12.5],
    [53.2, 11.9, 26.7, 8.2],
];

pub const BASELINE: [f64; 4] = [0.409, 0.170, 0.300, 0.121];

use std::collections::BTreeMap;

use gridbn_core::{enumerate_joint, Error, Evidence, Layer, Metadata, Node, NoisyOrParams};
use rand::seq::SliceRandom;
use rand::Rng;

/// Noisy-OR evaluated straight from its definition.
pub fn noisy_or_direct(thetas: &[f64], leak: f64, present: &[bool]) -> f64 {
    let mut untriggered = 1.0 - leak;
    for (t, &on) in thetas.iter().zip(present) {
        if on {
            untriggered *= 1.0 - t;
        }
    }
    1.0 - untriggered
}

pub fn random_row<R: Rng>(rng: &mut R, k: usize, allow_zero: bool) -> Vec<f64> {
    let mut row: Vec<f64> = (0..k)
        .map(|_| {
            if allow_zero && rng.gen_bool(0.1) {
                0.0
            } else {
                rng.gen_range(0.01..1.0)
            }
        })
        .collect();
    if row.iter().all(|&v| v == 0.0) {
        row[0] = 1.0;
    }
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= s);
    row
}

pub fn random_noisy_or<R: Rng>(rng: &mut R, parents: usize) -> NoisyOrParams {
    NoisyOrParams::new(
        (0..parents).map(|_| rng.gen_range(0.0..=1.0)).collect(),
        rng.gen_range(0.0..0.5),
        if rng.gen_bool(0.5) { "s1" } else { "s0" },
        (0..parents)
            .map(|_| if rng.gen_bool(0.7) { "s1" } else { "s0" }.to_string())
            .collect(),
    )
}

/// Random DAG of binary nodes `N00..`; each node draws up to `max_parents` earlier parents.
pub fn random_network<R: Rng>(rng: &mut R, nodes: usize, max_parents: usize) -> Network {
    let mut out = Vec::with_capacity(nodes);
    for i in 0..nodes {
        let id = format!("N{i:02}");
        let mut earlier: Vec<usize> = (0..i).collect();
        earlier.shuffle(rng);
        let k = rng.gen_range(0..=max_parents.min(i));
        let parents: Vec<String> = earlier[..k].iter().map(|j| format!("N{j:02}")).collect();
        let refs: Vec<&str> = parents.iter().map(String::as_str).collect();
        let layer = if k == 0 { Layer::L1 } else { Layer::L2 };
        let node = if k > 0 && rng.gen_bool(0.4) {
            Node::with_noisy_or(id, layer, &["s0", "s1"], &refs, random_noisy_or(rng, k))
        } else {
            let rows = (0..1usize << k).map(|_| random_row(rng, 2, true)).collect();
            Node::with_cpt(id, layer, &["s0", "s1"], &refs, rows)
        };
        out.push(node);
    }
    Network::from_nodes(Metadata::default(), out).unwrap()
}

pub fn random_evidence<R: Rng>(rng: &mut R, network: &Network, max: usize) -> Evidence {
    let mut ids: Vec<&str> = network.nodes().map(|n| n.id.as_str()).collect();
    ids.shuffle(rng);
    let k = rng.gen_range(0..=max.min(ids.len()));
    ids[..k]
        .iter()
        .map(|id| (id.to_string(), if rng.gen_bool(0.5) { "s1" } else { "s0" }.to_string()))
        .collect()
}

/// One greedy pick, recomputed by full enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct OraclePick {
    pub component: String,
    pub state: String,
    pub cumulative: f64,
}

/// Greedy plan with unit weights, every probability taken from the full joint.
pub fn greedy_oracle(
    network: &Network,
    target: (&str, usize),
    costs: &BTreeMap<String, f64>,
    candidates: &[String],
) -> Vec<OraclePick> {
    let prob = |ev: &Evidence| -> Option<(f64, f64)> {
        match enumerate_joint(network, ev, &[target.0]) {
            Ok(p) => Some((p.marginals[target.0][target.1], p.log_evidence.exp())),
            Err(Error::ImpossibleEvidence(_)) => None,
            Err(e) => panic!("{e}"),
        }
    };
    let mut fixed = Evidence::new();
    let mut current = prob(&fixed).unwrap().0;
    let mut remaining: Vec<String> = candidates.to_vec();
    let mut picks = Vec::new();
    while !remaining.is_empty() {
        // (score, impact, id, state index, state, probability)
        let mut best: Option<(f64, f64, String, usize, String, f64)> = None;
        for c in &remaining {
            for (si, s) in network.node(c).unwrap().states.iter().enumerate() {
                let Some((p, joint)) = prob(&fixed.clone().with(c.clone(), s.clone())) else {
                    continue;
                };
                let impact = p - current;
                let score = impact * joint / costs[c];
                let better = match &best {
                    None => true,
                    Some((bs, bi, bid, bsi, _, _)) => {
                        let scale = score.abs().max(bs.abs());
                        if (score - bs).abs() > 1e-9 * scale + 1e-15 {
                            score > *bs
                        } else if (impact - bi).abs() > 1e-12 {
                            impact > *bi
                        } else {
                            (c.as_str(), si) < (bid.as_str(), *bsi)
                        }
                    }
                };
                if better {
                    best = Some((score, impact, c.clone(), si, s.clone(), p));
                }
            }
        }
        let Some((_, _, c, _, s, p)) = best else { break };
        fixed.insert(c.clone(), s.clone());
        remaining.retain(|r| *r != c);
        current = p;
        picks.push(OraclePick {
            component: c,
            state: s,
            cumulative: p,
        });
    }
    picks
}

/// Small optimization problem: roots, up to five valued candidates, one target.
pub fn random_optimization_problem<R: Rng>(
    rng: &mut R,
) -> (Network, String, usize, BTreeMap<String, f64>, Vec<String>) {
    use gridbn_core::ValueMap;
    let roots = rng.gen_range(1..=3);
    let candidates = rng.gen_range(1..=5);
    let mut nodes = Vec::new();
    for r in 0..roots {
        nodes.push(Node::with_cpt(
            format!("F{r}"),
            Layer::L1,
            &["s0", "s1"],
            &[],
            vec![random_row(rng, 2, false)],
        ));
    }
    let mut ids = Vec::new();
    for c in 0..candidates {
        let id = format!("C{c}");
        let k = rng.gen_range(0..=roots.min(2));
        let mut pool: Vec<String> = (0..roots).map(|r| format!("F{r}")).collect();
        pool.shuffle(rng);
        let refs: Vec<&str> = pool[..k].iter().map(String::as_str).collect();
        let low = rng.gen_range(0.0..5.0);
        let vm = ValueMap::new(low + 1.0, low, low + rng.gen_range(1.0..5.0));
        let node = if k > 0 && rng.gen_bool(0.5) {
            Node::with_noisy_or(id.clone(), Layer::L2, &["s0", "s1"], &refs, random_noisy_or(rng, k))
        } else {
            let rows = (0..1usize << k).map(|_| random_row(rng, 2, false)).collect();
            Node::with_cpt(id.clone(), Layer::L2, &["s0", "s1"], &refs, rows)
        };
        nodes.push(node.value_map(vm));
        ids.push(id);
    }
    let k = candidates.min(3);
    let mut parents = ids.clone();
    parents.shuffle(rng);
    parents.truncate(k);
    let refs: Vec<&str> = parents.iter().map(String::as_str).collect();
    let card = rng.gen_range(2..=4);
    let states: Vec<String> = (0..card).map(|s| format!("T{s}")).collect();
    let srefs: Vec<&str> = states.iter().map(String::as_str).collect();
    let rows = (0..1usize << k).map(|_| random_row(rng, card, false)).collect();
    nodes.push(Node::with_cpt("Target", Layer::L4, &srefs, &refs, rows));
    let costs = ids.iter().map(|id| (id.clone(), rng.gen_range(1.0..10.0))).collect();
    let net = Network::from_nodes(Metadata::default(), nodes).unwrap();
    (net, "Target".to_string(), rng.gen_range(0..card), costs, ids)
}
