use num_bigint::BigUint;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::algebra::{Boolean, Dual, DualNum, MaxTimes, NatCount, Prob};
use crate::fixtures::{self, Shape};
use crate::oracle;
use crate::scheme::{FactorNode, VariableNode};

fn vars<T>(dims: &[usize]) -> Vec<VariableNode<T>> {
    dims.iter()
        .enumerate()
        .map(|(i, &d)| VariableNode::new(i, format!("x{i}"), d))
        .collect()
}

fn t<T>(shape: &[usize], data: Vec<T>) -> DenseTensor<T> {
    DenseTensor::new(shape.to_vec(), data).unwrap()
}

fn single(values: Vec<f64>) -> FactorGraph<f64> {
    let d = values.len();
    FactorGraph::spider(vars(&[d]), vec![FactorNode::new(0, vec![0], t(&[d], values))])
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let z: f64 = v.iter().sum();
    v.iter().map(|x| x / z).collect()
}

#[test]
fn init_is_unit_scaled() {
    let g = single(vec![0.25, 0.75]);
    let s = init_messages::<Prob>(&g, &RunConfig::default());
    assert_eq!(s.var_to_factor[0].values, vec![0.5, 0.5]);
    let s = init_messages::<Prob>(&g, &RunConfig::default().unnormalized());
    assert_eq!(s.factor_to_var[0].values, vec![1.0, 1.0]);
    let gb = g.map_values(|_| true);
    let s = init_messages::<Boolean>(&gb, &RunConfig::default());
    assert_eq!(s.var_to_factor[0].values, vec![true, true]);
}

#[test]
fn variable_update_examples() {
    // v0 with three factors; out on the third wire multiplies the other two
    let g = FactorGraph::spider(
        vars(&[2]),
        (0..3)
            .map(|u| FactorNode::new(u, vec![0], t(&[2], vec![1.0, 1.0])))
            .collect(),
    );
    let cfg = RunConfig::default().unnormalized();
    let mut s = init_messages::<Prob>(&g, &cfg);
    s.factor_to_var[0].values = vec![0.2, 0.8];
    s.factor_to_var[1].values = vec![0.5, 0.5];
    let out = update_variable_message::<Prob>(&g, &s, 0, 2, &cfg).unwrap();
    assert!(close(&out.message.values, &[0.1, 0.4], 1e-15));
    let out = update_variable_message::<Prob>(&g, &s, 0, 2, &RunConfig::default()).unwrap();
    assert!(close(&out.message.values, &[0.2, 0.8], 1e-15));

    // a leaf sends the unit
    let g1 = single(vec![0.3, 0.7]);
    let s1 = init_messages::<Prob>(&g1, &cfg);
    let out = update_variable_message::<Prob>(&g1, &s1, 0, 0, &cfg).unwrap();
    assert_eq!(out.message.values, vec![1.0, 1.0]);

    // disjoint Boolean supports give an empty message
    let gb = g.map_values(|_| true);
    let mut sb = init_messages::<Boolean>(&gb, &RunConfig::default());
    sb.factor_to_var[0].values = vec![true, false];
    sb.factor_to_var[1].values = vec![false, true];
    let out = update_variable_message::<Boolean>(&gb, &sb, 0, 2, &RunConfig::default()).unwrap();
    assert_eq!(out.message.values, vec![false, false]);
    assert!(out.zero);

    assert!(matches!(
        update_variable_message::<Prob>(&g1, &s1, 0, 7, &cfg),
        Err(EngineError::NotIncident { .. })
    ));
}

#[test]
fn factor_update_examples() {
    let g = FactorGraph::spider(
        vars(&[2, 2]),
        vec![FactorNode::new(0, vec![0, 1], t(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]))],
    );
    let cfg = RunConfig::default().unnormalized();
    let mut s = init_messages::<Prob>(&g, &cfg);
    s.var_to_factor[1].values = vec![1.0, 0.0];
    // out on axis 0 picks column 0
    let out = update_factor_message::<Prob>(&g, &s, 0, 0, &cfg).unwrap();
    assert_eq!(out.message.values, vec![1.0, 3.0]);
    s.var_to_factor[0].values = vec![0.5, 0.5];
    let out = update_factor_message::<Prob>(&g, &s, 0, 1, &cfg).unwrap();
    assert_eq!(out.message.values, vec![2.0, 3.0]);

    // a unary factor sends its table
    let g1 = single(vec![0.25, 0.75]);
    let s1 = init_messages::<Prob>(&g1, &cfg);
    let out = update_factor_message::<Prob>(&g1, &s1, 0, 0, &cfg).unwrap();
    assert_eq!(out.message.values, vec![0.25, 0.75]);

    // max-times takes the best row entry
    let out = update_factor_message::<MaxTimes>(&g, &init_messages::<MaxTimes>(&g, &cfg), 0, 0, &cfg).unwrap();
    assert_eq!(out.message.values, vec![2.0, 4.0]);
}

#[test]
fn sweep_reaches_fixed_point_on_tree() {
    let g = FactorGraph::spider(
        vars(&[2, 2]),
        vec![
            FactorNode::new(0, vec![0, 1], t(&[2, 2], vec![0.9, 0.1, 0.2, 0.8])),
            FactorNode::new(1, vec![0], t(&[2], vec![0.3, 0.7])),
        ],
    );
    let cfg = RunConfig::default();
    let mut s = init_messages::<Prob>(&g, &cfg);
    let mut sweeps = 0;
    loop {
        let (next, r) = sweep_synchronous::<Prob>(&g, &s, &cfg).unwrap();
        sweeps += 1;
        s = next;
        if r.within(0.0) {
            break;
        }
        assert!(sweeps < 10);
    }
    let (again, r) = sweep_synchronous::<Prob>(&g, &s, &cfg).unwrap();
    assert_eq!(r, Residual::Numeric(0.0));
    assert_eq!(again.var_to_factor, s.var_to_factor);
}

#[test]
fn damping_blends_and_is_prob_only() {
    let g = single(vec![0.2, 0.8]);
    let cfg = RunConfig {
        damping: 0.5,
        ..RunConfig::default()
    };
    let s = init_messages::<Prob>(&g, &cfg);
    let (next, _) = sweep_synchronous::<Prob>(&g, &s, &cfg).unwrap();
    assert!(close(&next.factor_to_var[0].values, &[0.35, 0.65], 1e-15));
    let out = run_bp::<Prob>(&g, &cfg).unwrap();
    assert!(out.converged);
    assert!(close(&out.beliefs.variables[0].values, &[0.2, 0.8], 1e-8));

    let gm = g.clone();
    assert!(matches!(run_bp::<MaxTimes>(&gm, &cfg), Err(EngineError::InvalidConfig(_))));
    let bad = RunConfig {
        damping: 1.0,
        ..RunConfig::default()
    };
    assert!(matches!(run_bp::<Prob>(&g, &bad), Err(EngineError::InvalidConfig(_))));
}

#[test]
fn run_bp_examples() {
    let out = run_bp::<Prob>(&single(vec![0.25, 0.75]), &RunConfig::default()).unwrap();
    assert!(out.converged);
    assert_eq!(out.beliefs.variables[0].values, vec![0.25, 0.75]);

    let out = run_bp::<Prob>(&single(vec![0.25, 0.75]), &RunConfig::two_pass()).unwrap();
    assert!(out.converged);
    assert_eq!(out.iterations, 1);
    assert_eq!(out.beliefs.variables[0].values, vec![0.25, 0.75]);

    // loopy graphs are rejected by the tree schedule only
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let loopy = fixtures::four_cycle(&mut rng, fixtures::positive);
    assert!(matches!(run_bp::<Prob>(&loopy, &RunConfig::two_pass()), Err(EngineError::NotATree)));
    let capped = RunConfig {
        max_iters: 1,
        ..RunConfig::default()
    };
    let out = run_bp::<Prob>(&loopy, &capped).unwrap();
    assert!(!out.converged);
    assert_eq!(out.iterations, 1);
}

#[test]
fn synchronous_iterations_bounded_by_diameter() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let g = fixtures::random_tree(&mut rng, &Shape::default(), fixtures::positive);
        let d = tree_info(&g).diameter.unwrap();
        let gc = g.map_values(|&x| BigUint::from((x * 4.0) as u32 + 1));
        let out = run_bp::<NatCount>(&gc, &RunConfig::default()).unwrap();
        assert!(out.converged);
        assert!(out.iterations <= d, "{} > {}", out.iterations, d);
    }
}

#[test]
fn boolean_contradiction_halts() {
    // x must be 0 and must be 1
    let g = FactorGraph::spider(
        vars(&[2]),
        vec![
            FactorNode::new(0, vec![0], t(&[2], vec![true, false])),
            FactorNode::new(1, vec![0], t(&[2], vec![false, true])),
        ],
    );
    for cfg in [RunConfig::default(), RunConfig::two_pass()] {
        match run_bp::<Boolean>(&g, &cfg) {
            Err(EngineError::Contradiction { at }) => assert!(at.contains("v0"), "{at}"),
            other => panic!("{other:?}"),
        }
    }
    assert_eq!(
        contraction_value::<Boolean>(&g, &RunConfig::default().unnormalized()).unwrap(),
        false
    );
}

#[test]
fn zero_message_in_floats() {
    let g = FactorGraph::spider(
        vars(&[2]),
        vec![
            FactorNode::new(0, vec![0], t(&[2], vec![1.0, 0.0])),
            FactorNode::new(1, vec![0], t(&[2], vec![0.0, 1.0])),
        ],
    );
    assert!(matches!(run_bp::<Prob>(&g, &RunConfig::default()), Err(EngineError::ZeroMessage { .. })));
}

#[test]
fn beliefs_examples() {
    let g = FactorGraph::<f64>::spider(vars(&[3]), vec![]);
    let s = init_messages::<Prob>(&g, &RunConfig::default());
    let b = beliefs::<Prob>(&g, &s, &RunConfig::default()).unwrap();
    assert!(close(&b.variables[0].values, &[1.0 / 3.0; 3], 1e-15));

    let g = FactorGraph::spider(
        vars(&[2, 2]),
        vec![
            FactorNode::new(0, vec![0, 1], t(&[2, 2], vec![0.9, 0.1, 0.2, 0.8])),
            FactorNode::new(1, vec![1], t(&[2], vec![0.3, 0.7])),
        ],
    );
    let out = run_bp::<Prob>(&g, &RunConfig::default().unnormalized()).unwrap();
    let fb = &out.beliefs.factors[0];
    // factor belief sums to Z
    let z = oracle::exact_contraction::<Prob>(&g).unwrap();
    assert!((fb.data().iter().sum::<f64>() - z).abs() < 1e-12);
}

#[test]
fn boolean_tree_support_matches_solutions() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    while checked < 40 {
        let g = fixtures::random_tree(&mut rng, &Shape::default(), fixtures::indicator);
        let gb = g.map_values(|&x| x > 0.5);
        let count = oracle::exact_marginals::<Prob>(&g).unwrap();
        let satisfiable = count[0].iter().any(|&c| c > 0.0);
        match run_bp::<Boolean>(&gb, &RunConfig::default()) {
            Ok(out) => {
                assert!(satisfiable);
                for (b, m) in out.beliefs.variables.iter().zip(&count) {
                    let support: Vec<bool> = m.iter().map(|&c| c > 0.0).collect();
                    assert_eq!(b.values, support);
                }
                checked += 1;
            }
            Err(EngineError::Contradiction { .. }) => assert!(!satisfiable),
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn contraction_examples() {
    let one = FactorGraph::spider(
        vars(&[2]),
        vec![FactorNode::new(0, vec![0], t(&[2], vec![BigUint::from(1u8); 2]))],
    );
    let cfg = RunConfig::default().unnormalized();
    assert_eq!(contraction_value::<NatCount>(&one, &cfg).unwrap(), BigUint::from(2u8));

    let eq = |one: f64| t(&[2, 2], vec![one, 0.0, 0.0, one]);
    let pair = FactorGraph::spider(vars(&[2, 2]), vec![FactorNode::new(0, vec![0, 1], eq(1.0))]);
    let pair_count = pair.map_values(|&x| BigUint::from(x as u8));
    assert_eq!(contraction_value::<NatCount>(&pair_count, &cfg).unwrap(), BigUint::from(2u8));
    let half = FactorGraph::spider(vars(&[2, 2]), vec![FactorNode::new(0, vec![0, 1], eq(0.5))]);
    assert_eq!(contraction_value::<Prob>(&half, &cfg).unwrap(), 1.0);

    // Z is the same from any root
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let g = fixtures::random_tree(&mut rng, &Shape::default(), fixtures::positive);
        let z0 = contraction_value::<Prob>(&g, &cfg).unwrap();
        for r in 0..g.variables().len() {
            let zr = contraction_value_rooted::<Prob>(&g, &cfg, r).unwrap();
            assert!((zr - z0).abs() <= 1e-12 * z0);
        }
    }

    assert!(matches!(
        contraction_value::<Prob>(&half, &RunConfig::default()),
        Err(EngineError::InvalidConfig(_))
    ));
}

#[test]
fn contraction_with_scalar_factor_and_forest() {
    let g = FactorGraph::spider(
        vars(&[2, 3]),
        vec![
            FactorNode::new(0, vec![0], t(&[2], vec![1.0, 2.0])),
            FactorNode::new(1, vec![], DenseTensor::scalar(0.5)),
            FactorNode::new(2, vec![1], t(&[3], vec![1.0, 1.0, 2.0])),
        ],
    );
    let z = contraction_value::<Prob>(&g, &RunConfig::default().unnormalized()).unwrap();
    assert_eq!(z, 3.0 * 0.5 * 4.0);
}

#[test]
fn decode_examples() {
    assert_eq!(argmax::<MaxTimes>(&[0.1, 0.9]).unwrap(), 1);
    assert_eq!(argmax::<MaxTimes>(&[0.5, 0.5]).unwrap(), 0);
    assert!(matches!(argmax::<NatCount>(&[]), Err(EngineError::SemiringNoOrder(_))));

    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..30 {
        let g = fixtures::random_tree(&mut rng, &Shape::default(), fixtures::positive);
        let out = run_bp::<MaxTimes>(&g, &RunConfig::two_pass()).unwrap();
        let decoded = decode_map::<MaxTimes>(&g, &out.state).unwrap();
        let (_, best) = oracle::exact_argmax(&g).unwrap();
        let w = oracle::assignment_weight::<Prob>(&g, &decoded);
        assert!((w - best).abs() <= 1e-12 * best);
    }
}

#[test]
fn dual_run_matches_prob_and_derivative() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let cfg = RunConfig::default().unnormalized();
    for _ in 0..20 {
        let g = fixtures::random_tree(&mut rng, &Shape::default(), fixtures::positive);
        let z = contraction_value::<Prob>(&g, &cfg).unwrap();
        let gd = g.map_values(|&x| Dual::constant(x));
        let theta = g.factors()[0].tensor.data()[0];
        let gd = gd.with_factor_entry(0, 0, Dual::variable(theta));
        let zd = contraction_value::<DualNum>(&gd, &cfg).unwrap();
        assert!((zd.re - z).abs() <= 1e-12 * z);
        // Z is linear in each entry: the derivative is the cofactor
        let h = 1e-5;
        let up = contraction_value::<Prob>(&g.with_factor_entry(0, 0, theta + h), &cfg).unwrap();
        let down = contraction_value::<Prob>(&g.with_factor_entry(0, 0, theta - h), &cfg).unwrap();
        let fd = (up - down) / (2.0 * h);
        assert!((zd.eps - fd).abs() <= 1e-6 * fd.abs().max(1e-12));
    }
}

#[test]
fn bipartite_mode_matches_spider_expansion() {
    // v0 carries a copy tensor over two wires; v1 a soft agreement tensor
    let vars2 = |tensors: [DenseTensor<f64>; 2]| -> Vec<VariableNode<f64>> {
        tensors
            .into_iter()
            .enumerate()
            .map(|(i, tt)| VariableNode {
                tensor: Some(tt),
                ..VariableNode::new(i, format!("x{i}"), 2)
            })
            .collect()
    };
    let g = FactorGraph::new(
        vars2([
            t(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]),
            t(&[2, 2], vec![0.7, 0.3, 0.3, 0.7]),
        ]),
        vec![
            FactorNode::new(0, vec![0, 1], t(&[2, 2], vec![0.9, 0.1, 0.2, 0.8])),
            FactorNode::new(1, vec![0], t(&[2], vec![0.4, 0.6])),
            FactorNode::new(2, vec![1], t(&[2], vec![0.5, 0.5])),
        ],
        GraphMode::GeneralBipartite,
    );
    assert!(validate_graph(&g).is_valid());
    assert!(tree_info(&g).is_tree);
    let out = run_bp::<Prob>(&g, &RunConfig::default()).unwrap();
    let exact = oracle::exact_marginals::<Prob>(&g).unwrap();
    for (b, m) in out.beliefs.variables.iter().zip(&exact) {
        assert!(close(&b.values, &normalized(m), 1e-9));
    }
    let z = contraction_value::<Prob>(&g, &RunConfig::default().unnormalized()).unwrap();
    let ze = oracle::exact_contraction::<Prob>(&g).unwrap();
    assert!((z - ze).abs() <= 1e-12 * ze);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tree_beliefs_are_exact(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = fixtures::random_tree(&mut rng, &Shape::default(), fixtures::positive);
        let out = run_bp::<Prob>(&g, &RunConfig::default()).unwrap();
        prop_assert!(out.converged);
        let exact = oracle::exact_marginals::<Prob>(&g).unwrap();
        for (b, m) in out.beliefs.variables.iter().zip(&exact) {
            prop_assert!(close(&b.values, &normalized(m), 1e-9));
        }
        let gc = g.map_values(|&x| BigUint::from((x * 3.0) as u32));
        let out = run_bp::<NatCount>(&gc, &RunConfig::default()).unwrap();
        let exact = oracle::exact_marginals::<NatCount>(&gc).unwrap();
        for (b, m) in out.beliefs.variables.iter().zip(&exact) {
            prop_assert_eq!(&b.values, m);
        }
    }

    #[test]
    fn schedules_agree_on_trees(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = fixtures::random_tree(&mut rng, &Shape::default(), fixtures::positive);
        let a = run_bp::<Prob>(&g, &RunConfig::default()).unwrap();
        let b = run_bp::<Prob>(&g, &RunConfig::two_pass()).unwrap();
        for (x, y) in a.beliefs.variables.iter().zip(&b.beliefs.variables) {
            prop_assert!(close(&x.values, &y.values, 1e-9));
        }
    }

    #[test]
    fn converged_means_fixed_point(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = fixtures::random_loopy(&mut rng, &Shape::default(), fixtures::positive);
        let cfg = RunConfig { max_iters: 200, tol: 1e-7, ..RunConfig::default() };
        let out = run_bp::<Prob>(&g, &cfg).unwrap();
        if out.converged {
            let (_, r) = sweep_synchronous::<Prob>(&g, &out.state, &cfg).unwrap();
            prop_assert!(r.within(cfg.tol));
        }
    }

    #[test]
    fn dual_real_part_is_prob(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = fixtures::random_tree(&mut rng, &Shape::default(), fixtures::positive);
        let gd = g.map_values(|&x| Dual::constant(x));
        let a = run_bp::<Prob>(&g, &RunConfig::default()).unwrap();
        let b = run_bp::<DualNum>(&gd, &RunConfig::default()).unwrap();
        for (x, y) in a.beliefs.variables.iter().zip(&b.beliefs.variables) {
            let re: Vec<f64> = y.values.iter().map(|d| d.re).collect();
            prop_assert!(close(&x.values, &re, 1e-12));
        }
    }

    #[test]
    fn rescaling_a_factor_scales_z_and_keeps_map(seed in any::<u64>(), c in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = fixtures::random_tree(&mut rng, &Shape::default(), fixtures::positive);
        let cfg = RunConfig::default().unnormalized();
        let z = contraction_value::<Prob>(&g, &cfg).unwrap();
        let scaled = FactorGraph::new(
            g.variables().to_vec(),
            g.factors()
                .iter()
                .enumerate()
                .map(|(u, f)| if u == 0 { FactorNode::new(0, f.neighbors.clone(), f.tensor.map(|x| x * c)) } else { f.clone() })
                .collect(),
            g.mode(),
        );
        let zs = contraction_value::<Prob>(&scaled, &cfg).unwrap();
        prop_assert!((zs - c * z).abs() <= 1e-9 * c * z);
        let a = run_bp::<MaxTimes>(&g, &RunConfig::two_pass()).unwrap();
        let b = run_bp::<MaxTimes>(&scaled, &RunConfig::two_pass()).unwrap();
        prop_assert_eq!(decode_map::<MaxTimes>(&g, &a.state).unwrap(), decode_map::<MaxTimes>(&scaled, &b.state).unwrap());
    }
}
