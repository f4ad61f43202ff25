use num_bigint::BigUint;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use semibp::fixtures::{self, Shape};
use semibp::jtree::{build_junction_tree, clique_marginal, cliques_containing, run_junction_tree};
use semibp::{oracle, run_bp, Boolean, NatCount, Prob, RunConfig};

fn normalized(v: &[f64]) -> Vec<f64> {
    let z: f64 = v.iter().sum();
    v.iter().map(|x| x / z).collect()
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loopy_marginals_match_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = fixtures::random_loopy(&mut rng, &Shape::default(), fixtures::positive);
        let run = run_junction_tree::<Prob>(&g, &RunConfig::default()).unwrap();
        prop_assert!(run.tree.running_intersection_holds());
        let exact = oracle::exact_marginals::<Prob>(&g).unwrap();
        for (b, m) in run.beliefs.iter().zip(&exact) {
            prop_assert!(linf(&b.values, &normalized(m)) <= 1e-9);
        }
        let z = oracle::exact_contraction::<Prob>(&g).unwrap();
        prop_assert!((run.contraction_value - z).abs() <= 1e-9 * z);
    }

    #[test]
    fn exact_semirings_are_exact(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = fixtures::random_loopy(&mut rng, &Shape::default(), |r: &mut ChaCha8Rng| {
            BigUint::from(fixtures::indicator(r) as u8 + fixtures::indicator(r) as u8)
        });
        let run = run_junction_tree::<NatCount>(&g, &RunConfig::default()).unwrap();
        prop_assert_eq!(&run.contraction_value, &oracle::exact_contraction::<NatCount>(&g).unwrap());
        let exact = oracle::exact_marginals::<NatCount>(&g).unwrap();
        for (b, m) in run.beliefs.iter().zip(&exact) {
            prop_assert_eq!(&b.values, m);
        }

        let gb = g.map_values(|x| *x != BigUint::from(0u8));
        let satisfiable = run.contraction_value != BigUint::from(0u8);
        match run_junction_tree::<Boolean>(&gb, &RunConfig::default()) {
            Ok(run) => {
                prop_assert!(satisfiable);
                for (b, m) in run.beliefs.iter().zip(&exact) {
                    let support: Vec<bool> = m.iter().map(|c| *c != BigUint::from(0u8)).collect();
                    prop_assert_eq!(&b.values, &support);
                }
            }
            Err(_) => prop_assert!(!satisfiable),
        }
    }

    #[test]
    fn covering_cliques_agree(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = fixtures::random_loopy(&mut rng, &Shape::default(), fixtures::positive);
        let run = run_junction_tree::<Prob>(&g, &RunConfig::default()).unwrap();
        for v in 0..g.variables().len() {
            let holders = cliques_containing(&run.tree, v);
            let first = normalized(&clique_marginal::<Prob>(&g, &run.tree.cliques[holders[0]], &run.clique_beliefs[holders[0]], v));
            for &c in &holders[1..] {
                let other = normalized(&clique_marginal::<Prob>(&g, &run.tree.cliques[c], &run.clique_beliefs[c], v));
                prop_assert!(linf(&first, &other) <= 1e-9);
            }
        }
    }

    #[test]
    fn trees_match_direct_bp(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = fixtures::random_tree(&mut rng, &Shape::default(), fixtures::positive);
        let jt = build_junction_tree(&g).unwrap();
        // no fill-in: each clique is a single variable or lies inside one factor scope
        for c in &jt.cliques {
            prop_assert!(c.members.len() == 1 || g.factors().iter().any(|f| c.members.iter().all(|v| f.neighbors.contains(v))));
        }
        prop_assert!(jt.separators.iter().all(|s| s.variables.len() <= 1));
        let run = run_junction_tree::<Prob>(&g, &RunConfig::default()).unwrap();
        let direct = run_bp::<Prob>(&g, &RunConfig::two_pass()).unwrap();
        for (a, b) in run.beliefs.iter().zip(&direct.beliefs.variables) {
            prop_assert!(linf(&a.values, &b.values) <= 1e-12);
        }
    }
}

#[test]
fn disconnected_input_gives_a_forest() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = fixtures::four_cycle(&mut rng, fixtures::positive);
    // two copies side by side
    let n = a.variables().len();
    let mut vars = a.variables().to_vec();
    let mut factors = a.factors().to_vec();
    for v in a.variables() {
        let mut w = v.clone();
        w.id += n;
        vars.push(w);
    }
    for f in a.factors() {
        let mut h = f.clone();
        h.id += a.factors().len();
        h.neighbors = h.neighbors.iter().map(|v| v + n).collect();
        factors.push(h);
    }
    let g = semibp::FactorGraph::spider(vars, factors);
    let run = run_junction_tree::<Prob>(&g, &RunConfig::default()).unwrap();
    assert!(run.tree.running_intersection_holds());
    assert_eq!(run.tree.separators.len(), run.tree.cliques.len() - 2);
    let z = oracle::exact_contraction::<Prob>(&a).unwrap();
    assert!((run.contraction_value - z * z).abs() <= 1e-12 * z * z);
}
