use num_bigint::BigUint;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use semibp::fixtures::{self, Shape};
use semibp::format::{parse_native, parse_uai, write_uai, NativeDocument};
use semibp::scheme::{tree_info, validate_graph};
use semibp::{oracle, Dual, DualNum, FactorGraph, FactorNode, NatCount, Prob, Semiring, VariableNode};

// two binary variables, one unary and one pairwise factor
const SMALL_UAI: &str = "MARKOV
2
2 2
2
1 0
2 0 1

2
0.25 0.75

4
1.0 2.0
3.0 4.0
";

#[test]
fn uai_contraction_matches_hand_sum() {
    let g = parse_uai(SMALL_UAI).unwrap().graph;
    // 0.25·(1+2) + 0.75·(3+4)
    let expected = 0.25 * 3.0 + 0.75 * 7.0;
    let z = oracle::exact_contraction::<Prob>(&g).unwrap();
    assert!((z - expected).abs() <= 1e-12 * expected);
}

#[test]
fn uai_three_variable_chain() {
    let text = "MARKOV\n3\n2 3 2\n2\n2 0 1\n2 1 2\n6\n1 0 2 1 1 1\n6\n0.5 0.5 1 0 2 2\n";
    let g = parse_uai(text).unwrap().graph;
    let f = [[1.0, 0.0, 2.0], [1.0, 1.0, 1.0]];
    let h = [[0.5, 0.5], [1.0, 0.0], [2.0, 2.0]];
    let mut expected = 0.0;
    for a in 0..2 {
        for b in 0..3 {
            for c in 0..2 {
                expected += f[a][b] * h[b][c];
            }
        }
    }
    let z = oracle::exact_contraction::<Prob>(&g).unwrap();
    assert!((z - expected).abs() <= 1e-12 * expected);
}

fn relabel(g: &FactorGraph<f64>, var_perm: &[usize], factor_order: &[usize]) -> FactorGraph<f64> {
    let mut vars: Vec<VariableNode<f64>> = Vec::new();
    for new in 0..var_perm.len() {
        let old = var_perm.iter().position(|&p| p == new).unwrap();
        vars.push(VariableNode::new(new, format!("y{new}"), g.variables()[old].dim()));
    }
    let factors = factor_order
        .iter()
        .enumerate()
        .map(|(id, &old)| {
            let f = &g.factors()[old];
            FactorNode::new(id, f.neighbors.iter().map(|&v| var_perm[v]).collect(), f.tensor.clone())
        })
        .collect();
    FactorGraph::spider(vars, factors)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn native_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = fixtures::random_loopy(&mut rng, &Shape { max_vars: 6, ..Shape::default() }, fixtures::nonnegative);
        let doc = NativeDocument::from_graph::<Prob>(&g, Some("prob".into()));
        let text = doc.to_json_string();
        let back = parse_native(&text).unwrap();
        prop_assert_eq!(&back, &doc);
        let g2 = back.to_graph::<Prob>().unwrap();
        prop_assert_eq!(&g2, &g);
        prop_assert_eq!(validate_graph(&g2), validate_graph(&g));
        prop_assert_eq!(tree_info(&g2), tree_info(&g));
        prop_assert_eq!(back.to_json_string(), text);

        let gc = g.map_values(|&x| BigUint::from((x * 1e6) as u64) * BigUint::from(u64::MAX));
        let text = NativeDocument::from_graph::<NatCount>(&gc, None).to_json_string();
        prop_assert_eq!(parse_native(&text).unwrap().to_graph::<NatCount>().unwrap(), gc);

        let gd = g.map_values(|&x| Dual::new(x, -x / 3.0));
        let text = NativeDocument::from_graph::<DualNum>(&gd, None).to_json_string();
        prop_assert_eq!(parse_native(&text).unwrap().to_graph::<DualNum>().unwrap(), gd);
    }

    #[test]
    fn native_uai_native_keeps_z(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = fixtures::random_loopy(&mut rng, &Shape::default(), fixtures::positive);
        let uai = write_uai(&g).unwrap();
        let back = parse_uai(&uai).unwrap().graph;
        let text = NativeDocument::from_graph::<Prob>(&back, None).to_json_string();
        let again = parse_native(&text).unwrap().to_graph::<Prob>().unwrap();
        prop_assert_eq!(validate_graph(&again), validate_graph(&g));
        let z = oracle::exact_contraction::<Prob>(&g).unwrap();
        let z2 = oracle::exact_contraction::<Prob>(&again).unwrap();
        prop_assert!((z - z2).abs() <= 1e-12 * z);
    }

    #[test]
    fn oracle_invariant_under_relabeling(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = fixtures::random_loopy(&mut rng, &Shape::default(), fixtures::positive);
        let mut var_perm: Vec<usize> = (0..g.variables().len()).collect();
        var_perm.shuffle(&mut rng);
        let mut order: Vec<usize> = (0..g.factors().len()).collect();
        order.shuffle(&mut rng);
        let h = relabel(&g, &var_perm, &order);
        let z = oracle::exact_contraction::<Prob>(&g).unwrap();
        let zh = oracle::exact_contraction::<Prob>(&h).unwrap();
        prop_assert!((z - zh).abs() <= 1e-12 * z);
        let m = oracle::exact_marginals::<Prob>(&g).unwrap();
        let mh = oracle::exact_marginals::<Prob>(&h).unwrap();
        for (v, &p) in var_perm.iter().enumerate() {
            for (a, b) in m[v].iter().zip(&mh[p]) {
                prop_assert!((a - b).abs() <= 1e-12 * z);
            }
        }

        let gc = g.map_values(|&x| BigUint::from((x * 10.0) as u32));
        let hc = relabel(&g, &var_perm, &order).map_values(|&x| BigUint::from((x * 10.0) as u32));
        prop_assert_eq!(oracle::exact_contraction::<NatCount>(&gc).unwrap(), oracle::exact_contraction::<NatCount>(&hc).unwrap());
    }

    #[test]
    fn disconnected_contraction_is_a_product(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = Shape { max_vars: 5, ..Shape::default() };
        let a = fixtures::random_loopy(&mut rng, &shape, fixtures::positive);
        let b = fixtures::random_tree(&mut rng, &shape, fixtures::positive);
        let n = a.variables().len();
        let mut vars = a.variables().to_vec();
        vars.extend(b.variables().iter().map(|v| VariableNode::new(v.id + n, v.object.name.clone(), v.dim())));
        let mut factors = a.factors().to_vec();
        let m = factors.len();
        factors.extend(b.factors().iter().map(|f| {
            FactorNode::new(f.id + m, f.neighbors.iter().map(|v| v + n).collect(), f.tensor.clone())
        }));
        let g = FactorGraph::spider(vars, factors);
        let za = oracle::exact_contraction::<Prob>(&a).unwrap();
        let zb = oracle::exact_contraction::<Prob>(&b).unwrap();
        let z = oracle::exact_contraction::<Prob>(&g).unwrap();
        prop_assert!((z - za * zb).abs() <= 1e-12 * z);

        let count = |g: &FactorGraph<f64>| oracle::exact_contraction::<NatCount>(&g.map_values(|&x| NatCount::from_f64((x * 5.0).floor()).unwrap())).unwrap();
        prop_assert_eq!(count(&g), count(&a) * count(&b));
    }

    #[test]
    fn validation_is_stable(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = fixtures::random_tree(&mut rng, &Shape::default(), fixtures::positive);
        let first = validate_graph(&g);
        prop_assert_eq!(validate_graph(&g), first);
        let info = tree_info(&g);
        let nodes = g.variables().len() + g.factors().len();
        prop_assert!(info.diameter.unwrap() <= 2 * (nodes - 1));
    }
}

#[test]
fn argmax_matches_decoded_assignment() {
    use semibp::engine::decode_map;
    use semibp::{run_bp, MaxTimes, RunConfig};
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let shape = Shape { max_vars: 8, ..Shape::default() };
    let mut seen = 0;
    while seen < 30 {
        let g = fixtures::random_tree(&mut rng, &shape, fixtures::positive);
        if g.variables().len() != 8 {
            continue;
        }
        seen += 1;
        let (_, best) = oracle::exact_argmax(&g).unwrap();
        let out = run_bp::<MaxTimes>(&g, &RunConfig::default()).unwrap();
        let decoded = decode_map::<MaxTimes>(&g, &out.state).unwrap();
        let w = oracle::assignment_weight::<MaxTimes>(&g, &decoded);
        assert!((w - best).abs() <= 1e-12 * best);
    }
}
