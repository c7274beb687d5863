mod common;

use std::collections::BTreeMap;

use common::*;
use gridbn_core::elicitation::{CapacityEstimate, ExpertResponse};
use gridbn_core::{
    aggregate_capacity, availability, bucket_sums, compile_noisy_or, divorce, enumerate_joint,
    joint_probability, noisy_or_probability, optimize, posterior, scenario_summary, state_value,
    top_factors, AggregationPolicy, AvailabilityProfile, Bucket, CapacityRow, ClassificationRules,
    CostTable, Evidence, Layer, Metadata, Network, Node, NoisyOrParams, Survey, Target, ValueMap,
    Weights,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn params(thetas: Vec<f64>, leak: f64) -> NoisyOrParams {
    let n = thetas.len();
    NoisyOrParams::new(thetas, leak, "s1", vec!["s1".to_string(); n])
}

fn star(thetas: &[f64], leak: f64, priors: &[f64]) -> Network {
    let mut nodes: Vec<Node> = priors
        .iter()
        .enumerate()
        .map(|(i, &p)| Node::with_cpt(format!("X{i}"), Layer::L1, &["s0", "s1"], &[], vec![vec![1.0 - p, p]]))
        .collect();
    let parents: Vec<String> = (0..thetas.len()).map(|i| format!("X{i}")).collect();
    let refs: Vec<&str> = parents.iter().map(String::as_str).collect();
    nodes.push(Node::with_noisy_or("Y", Layer::L2, &["s0", "s1"], &refs, params(thetas.to_vec(), leak)));
    Network::from_nodes(Metadata::default(), nodes).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noisy_or_is_monotone(
        thetas in prop::collection::vec(0.0..=1.0f64, 1..6),
        leak in 0.0..=1.0f64,
        flags in prop::collection::vec(any::<bool>(), 6),
        bump in 0.0..=1.0f64,
        which in 0usize..6,
    ) {
        let n = thetas.len();
        let flags = &flags[..n];
        let i = which % n;
        let p = params(thetas.clone(), leak);
        let base = noisy_or_probability(&p, flags).unwrap();

        let mut on = flags.to_vec();
        on[i] = true;
        prop_assert!(noisy_or_probability(&p, &on).unwrap() >= base - 1e-15);

        let more_leak = params(thetas.clone(), leak + (1.0 - leak) * bump);
        prop_assert!(noisy_or_probability(&more_leak, flags).unwrap() >= base - 1e-15);

        let mut t = thetas.clone();
        t[i] += (1.0 - t[i]) * bump;
        prop_assert!(noisy_or_probability(&params(t, leak), flags).unwrap() >= base - 1e-15);
    }

    #[test]
    fn compiled_table_shape(thetas in prop::collection::vec(0.0..=1.0f64, 1..7), leak in 0.0..=1.0f64) {
        let net = star(&thetas, leak, &vec![0.5; thetas.len()]);
        let node = net.node("Y").unwrap();
        let cpt = compile_noisy_or(&net, node).unwrap();
        prop_assert_eq!(cpt.rows.len(), 1 << thetas.len());
        for row in &cpt.rows {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
        let gridbn_core::Distribution::NoisyOr(p) = &node.distribution else { unreachable!() };
        prop_assert_eq!(p.free_parameter_count(), thetas.len() + 1);
    }

    #[test]
    fn divorce_preserves_child(
        thetas in prop::collection::vec(0.0..=1.0f64, 1..7),
        leak in 0.0..0.9f64,
        max in 2usize..5,
        combo in any::<u8>(),
    ) {
        let n = thetas.len();
        let net = star(&thetas, leak, &vec![0.3; n]);
        let (out, _) = divorce(&net, max).unwrap();
        let mut ev = Evidence::new();
        let mut present = Vec::new();
        for i in 0..n {
            let on = (combo >> i) & 1 == 1;
            present.push(on);
            ev.insert(format!("X{i}"), if on { "s1" } else { "s0" });
        }
        let got = posterior(&out, &ev, &["Y"]).unwrap().marginals["Y"][1];
        prop_assert!((got - noisy_or_direct(&thetas, leak, &present)).abs() <= 1e-9);
    }

    #[test]
    fn elimination_matches_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_network(&mut rng, 10, 3);
        let ev = random_evidence(&mut rng, &net, 3);
        let ids: Vec<String> = net.nodes().map(|n| n.id.clone()).collect();
        match (posterior(&net, &ev, &ids), enumerate_joint(&net, &ev, &ids)) {
            (Ok(a), Ok(b)) => {
                for id in &ids {
                    for (x, y) in a.marginals[id].iter().zip(&b.marginals[id]) {
                        prop_assert!((x - y).abs() <= 1e-9);
                    }
                }
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "{:?} vs {:?}", a.err(), b.err()),
        }
    }

    #[test]
    fn null_causes_leave_only_the_leak(
        n in 1usize..5,
        leak in 0.0..=1.0f64,
        states in prop::collection::vec(any::<bool>(), 5),
    ) {
        let net = star(&vec![0.0; n], leak, &vec![0.4; n]);
        let ev: Evidence = (0..n)
            .filter(|i| i % 2 == 0)
            .map(|i| (format!("X{i}"), if states[i] { "s1" } else { "s0" }.to_string()))
            .collect();
        let p = posterior(&net, &ev, &["Y"]).unwrap();
        prop_assert!((p.marginals["Y"][1] - leak).abs() <= 1e-12);
    }

    #[test]
    fn observed_node_is_a_point_mass(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_network(&mut rng, 8, 2);
        let ev = random_evidence(&mut rng, &net, 3);
        let observed: Vec<String> = ev.iter().map(|(n, _)| n.to_string()).collect();
        if let Ok(p) = posterior(&net, &ev, &observed) {
            for (node, state) in ev.iter() {
                let idx = if state == "s1" { 1 } else { 0 };
                prop_assert_eq!(p.marginals[node][idx], 1.0);
            }
        }
    }

    #[test]
    fn joint_probability_shrinks_with_more_evidence(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_network(&mut rng, 9, 3);
        let e1 = random_evidence(&mut rng, &net, 3);
        let e2 = random_evidence(&mut rng, &net, 3);
        if let Ok(both) = e1.union(&e2) {
            let p12 = joint_probability(&net, &both).unwrap();
            let p1 = joint_probability(&net, &e1).unwrap();
            let p2 = joint_probability(&net, &e2).unwrap();
            prop_assert!(p12 <= p1.min(p2) + 1e-12);
        }
    }

    #[test]
    fn divorcing_one_node_leaves_others_unchanged(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_network(&mut rng, 12, 4);
        let (out, _) = divorce(&net, 2).unwrap();
        let ev = random_evidence(&mut rng, &net, 2);
        let ids: Vec<String> = net.nodes().map(|n| n.id.clone()).collect();
        if let (Ok(a), Ok(b)) = (posterior(&net, &ev, &ids), posterior(&out, &ev, &ids)) {
            for id in &ids {
                for (x, y) in a.marginals[id].iter().zip(&b.marginals[id]) {
                    prop_assert!((x - y).abs() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn unanimous_panel_is_idempotent(gw in 0.0..50.0f64, n in 1usize..20, conf in 1.0..100.0f64) {
        let panel: Vec<ExpertResponse> = (0..n).map(|i| expert(&format!("E{i}"), conf, gw)).collect();
        for policy in [AggregationPolicy::uniform(), AggregationPolicy::confidence_linear()] {
            let agg = aggregate_capacity(&panel, "X", policy).unwrap();
            prop_assert!((agg.mean_gw - gw).abs() <= 1e-9 * gw.max(1.0));
            let vm = agg.value_map();
            prop_assert!((vm.low_submean - gw).abs() <= 1e-9 * gw.max(1.0));
            prop_assert!((vm.high_submean - gw).abs() <= 1e-9 * gw.max(1.0));
        }
    }

    #[test]
    fn equal_confidences_match_uniform(gws in prop::collection::vec(0.0..30.0f64, 1..15), conf in 1.0..100.0f64) {
        let panel: Vec<ExpertResponse> =
            gws.iter().enumerate().map(|(i, &g)| expert(&format!("E{i}"), conf, g)).collect();
        let u = aggregate_capacity(&panel, "X", AggregationPolicy::uniform()).unwrap();
        let c = aggregate_capacity(&panel, "X", AggregationPolicy::confidence_linear()).unwrap();
        prop_assert!((u.mean_gw - c.mean_gw).abs() <= 1e-9);
        prop_assert_eq!(u.low_submean_gw.is_some(), c.low_submean_gw.is_some());
        if let (Some(a), Some(b)) = (u.low_submean_gw, c.low_submean_gw) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn top_factors_ignore_response_order(seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let factors = ["A", "B", "C", "D", "E"];
        let mut panel: Vec<ExpertResponse> = (0..10)
            .map(|i| {
                let mut e = expert(&format!("E{i}"), 50.0, 1.0);
                let k = rng.gen_range(0..=3);
                let named = factors.choose_multiple(&mut rng, k).map(|f| f.to_string()).collect();
                e.qs1b.insert("X".into(), named);
                e
            })
            .collect();
        let before = top_factors(&panel, "X", 3);
        panel.shuffle(&mut rng);
        prop_assert_eq!(top_factors(&panel, "X", 3), before);
    }

    #[test]
    fn perturbed_fixture_survey_stays_valid(seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut survey = Survey::load(fixture("survey.json")).unwrap();
        for e in &mut survey.experts {
            e.confidence_default = rng.gen_range(0.0..=100.0);
            for est in e.qs1a.values_mut() {
                est.capacity_gw *= rng.gen_range(0.5..1.5);
            }
            for answers in e.qs1c.values_mut() {
                for r in answers.effects.values_mut() {
                    r.effect = rng.gen_range(0.0..=100.0);
                }
            }
        }
        let layout = gridbn_core::Layout::load(fixture("layout.json")).unwrap();
        for policy in [AggregationPolicy::uniform(), AggregationPolicy::confidence_linear()] {
            let net = gridbn_core::assemble_network(&survey, &layout, policy).unwrap();
            prop_assert!(net.validate().is_valid());
            for node in net.nodes() {
                if let gridbn_core::Distribution::NoisyOr(p) = &node.distribution {
                    prop_assert!(p.thetas.iter().chain([&p.leak]).all(|v| (0.0..=1.0).contains(v)));
                }
            }
        }
    }

    #[test]
    fn score_is_homogeneous_in_cost(seed in any::<u64>(), k in 0.01..100.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (net, target, t, costs, candidates) = random_optimization_problem(&mut rng);
        let target = Target::new(target, format!("T{t}"));
        let table = CostTable::new(costs).unwrap();
        let a = optimize(&net, &target, &table, Weights::default(), &candidates).unwrap();
        let b = optimize(&net, &target, &table.scaled(k).unwrap(), Weights::default(), &candidates).unwrap();
        prop_assert_eq!(a.steps.len(), b.steps.len());
        for (x, y) in a.steps.iter().zip(&b.steps) {
            prop_assert_eq!(&x.component, &y.component);
            prop_assert!((x.score / k - y.score).abs() <= 1e-12 * x.score.abs().max(1e-300) + 1e-18);
            prop_assert_eq!(x.score, x.impact * x.joint / x.cost);
        }
    }

    #[test]
    fn bucket_sums_partition_rows(gws in prop::collection::vec(0.0..20.0f64, 0..12), picks in prop::collection::vec(0usize..5, 12)) {
        let rows: Vec<CapacityRow> = gws.iter().enumerate().map(|(i, &g)| CapacityRow::new(format!("C{i}"), g)).collect();
        let rules = ClassificationRules {
            buckets: (0..gws.len()).map(|i| (format!("C{i}"), Bucket::ALL[picks[i]])).collect(),
        };
        let sums = bucket_sums(&rows, &rules).unwrap();
        let total: f64 = gws.iter().sum();
        prop_assert!((sums.values().sum::<f64>() - total).abs() <= 1e-9);
    }

    #[test]
    fn season_never_exceeds_peak_hour(gws in prop::collection::vec(0.0..20.0f64, 1..10), hour in prop::collection::vec(0.0..=1.0f64, 10), frac in prop::collection::vec(0.0..=1.0f64, 10)) {
        let rows: Vec<CapacityRow> = gws.iter().enumerate().map(|(i, &g)| CapacityRow::new(format!("C{i}"), g)).collect();
        let profile = AvailabilityProfile {
            name: None,
            components: (0..gws.len())
                .map(|i| (format!("C{i}"), gridbn_core::scenario::AvailabilityFactor { peak_hour: hour[i], peak_season: hour[i] * frac[i] }))
                .collect(),
        };
        let r = availability(&rows, &profile, None).unwrap();
        prop_assert!(r.peak_season_gw <= r.peak_hour_gw + 1e-12);
    }

    #[test]
    fn value_rises_with_high_posterior(low in 0.0..10.0f64, span in 0.01..10.0f64, p in 0.0..1.0f64, dp in 0.001..1.0f64) {
        let node = Node::with_cpt("X", Layer::L2, &["lo", "hi"], &[], vec![vec![0.5, 0.5]])
            .value_map(ValueMap::new(low + span / 2.0, low, low + span));
        let q = (p + dp).min(1.0);
        prop_assume!(q > p);
        let a = state_value(&node, &[1.0 - p, p]).unwrap();
        let b = state_value(&node, &[1.0 - q, q]).unwrap();
        prop_assert!(b > a);
    }
}

fn expert(id: &str, confidence: f64, gw: f64) -> ExpertResponse {
    ExpertResponse {
        id: id.into(),
        confidence_default: confidence,
        qs1a: BTreeMap::from([(
            "X".to_string(),
            CapacityEstimate {
                capacity_gw: gw,
                confidence: None,
            },
        )]),
        qs1b: BTreeMap::new(),
        qs1c: BTreeMap::new(),
        qs2: None,
        qs3a: None,
        qs3b: None,
        qs4: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fixture_scenarios_sum_to_one(seed in any::<u64>()) {
        use rand::Rng;
        let net = fixture_network();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ev = Evidence::new();
        for node in net.nodes().filter(|n| n.layer != Layer::L4) {
            if rng.gen_bool(0.2) {
                let s = rng.gen_range(0..node.cardinality());
                ev.insert(node.id.clone(), node.states[s].clone());
            }
        }
        if let Ok(s) = scenario_summary(&net, &ev) {
            prop_assert!((s.grid.distribution.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }
}
