//! Seeded random diagram generators used by tests, the acceptance suite and
//! the `check` command.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::scheme::{FactorGraph, FactorNode, VariableNode};
use crate::tensor::DenseTensor;

/// Bounds for random diagrams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shape {
    pub max_vars: usize,
    pub min_dim: usize,
    pub max_dim: usize,
    pub max_factors: usize,
    /// Largest joint state space, so the brute-force oracle stays quick.
    pub max_states: usize,
}

impl Default for Shape {
    fn default() -> Self {
        Self {
            max_vars: 12,
            min_dim: 2,
            max_dim: 4,
            max_factors: 12,
            max_states: 1 << 14,
        }
    }
}

fn random_dims<R: Rng>(rng: &mut R, n: usize, shape: &Shape) -> Vec<usize> {
    let mut dims: Vec<usize> = (0..n).map(|_| rng.gen_range(shape.min_dim..=shape.max_dim)).collect();
    while dims.iter().product::<usize>() > shape.max_states {
        let big: Vec<usize> = (0..n).filter(|&i| dims[i] > shape.min_dim).collect();
        match big.choose(rng) {
            Some(&i) => dims[i] -= 1,
            None => break,
        }
    }
    dims
}

fn variables<T>(dims: &[usize]) -> Vec<VariableNode<T>> {
    dims.iter()
        .enumerate()
        .map(|(i, &d)| VariableNode::new(i, format!("x{i}"), d))
        .collect()
}

fn factor<T, R: Rng>(
    rng: &mut R,
    id: usize,
    neighbors: Vec<usize>,
    dims: &[usize],
    entry: &mut impl FnMut(&mut R) -> T,
) -> FactorNode<T> {
    let shape: Vec<usize> = neighbors.iter().map(|&v| dims[v]).collect();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| entry(rng)).collect();
    FactorNode::new(id, neighbors, DenseTensor::new(shape, data).expect("sized"))
}

/// Scopes of a random tree: each structural factor joins one placed
/// variable to one or two new ones; leftover budget goes to unary factors.
fn tree_scopes<R: Rng>(rng: &mut R, n: usize, max_factors: usize) -> Vec<Vec<usize>> {
    let mut scopes = Vec::new();
    let mut placed = 1;
    while placed < n {
        let anchor = rng.gen_range(0..placed);
        let fresh = rng.gen_range(1..=2).min(n - placed);
        let mut scope = vec![anchor];
        scope.extend(placed..placed + fresh);
        scope.shuffle(rng);
        scopes.push(scope);
        placed += fresh;
    }
    let budget = max_factors.saturating_sub(scopes.len());
    // at least one factor, so a lone variable is not left bare
    let floor = usize::from(scopes.is_empty() && max_factors > 0);
    let unary = rng.gen_range(floor..=budget.min(n).max(floor));
    for _ in 0..unary {
        scopes.push(vec![rng.gen_range(0..n)]);
    }
    scopes.shuffle(rng);
    scopes
}

/// A random connected tree diagram with entries drawn from `entry`.
pub fn random_tree<T, R: Rng>(rng: &mut R, shape: &Shape, mut entry: impl FnMut(&mut R) -> T) -> FactorGraph<T> {
    let n = rng.gen_range(1..=shape.max_vars);
    let dims = random_dims(rng, n, shape);
    let scopes = tree_scopes(rng, n, shape.max_factors);
    let factors = scopes
        .into_iter()
        .enumerate()
        .map(|(id, s)| factor(rng, id, s, &dims, &mut entry))
        .collect();
    FactorGraph::spider(variables(&dims), factors)
}

/// A random connected diagram with one to three cycles: a random tree plus
/// extra pairwise factors between distinct variables.
pub fn random_loopy<T, R: Rng>(rng: &mut R, shape: &Shape, mut entry: impl FnMut(&mut R) -> T) -> FactorGraph<T> {
    let n = rng.gen_range(3..=shape.max_vars.max(3));
    let dims = random_dims(rng, n, shape);
    let mut scopes = tree_scopes(rng, n, shape.max_factors.saturating_sub(3));
    let extra = rng.gen_range(1..=3);
    for _ in 0..extra {
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        scopes.push(vec![a, b]);
    }
    let factors = scopes
        .into_iter()
        .enumerate()
        .map(|(id, s)| factor(rng, id, s, &dims, &mut entry))
        .collect();
    FactorGraph::spider(variables(&dims), factors)
}

/// v0-f0-v1-f1-v2-f2-v3-f3-v0 over binary variables.
pub fn four_cycle<T, R: Rng>(rng: &mut R, mut entry: impl FnMut(&mut R) -> T) -> FactorGraph<T> {
    let dims = [2; 4];
    let factors = (0..4)
        .map(|i| factor(rng, i, vec![i, (i + 1) % 4], &dims, &mut entry))
        .collect();
    FactorGraph::spider(variables(&dims), factors)
}

/// A path v0-f0-v1-...-v(n-1) with uniform dimension `dim`.
pub fn chain<T, R: Rng>(rng: &mut R, n: usize, dim: usize, mut entry: impl FnMut(&mut R) -> T) -> FactorGraph<T> {
    let dims = vec![dim; n];
    let factors = (0..n.saturating_sub(1))
        .map(|i| factor(rng, i, vec![i, i + 1], &dims, &mut entry))
        .collect();
    FactorGraph::spider(variables(&dims), factors)
}

/// Random positive real entries.
pub fn positive<R: Rng>(rng: &mut R) -> f64 {
    rng.gen_range(0.05..2.0)
}

/// Random nonnegative entries with occasional exact zeros.
pub fn nonnegative<R: Rng>(rng: &mut R) -> f64 {
    if rng.gen_bool(0.1) {
        0.0
    } else {
        rng.gen_range(0.0..2.0)
    }
}

/// 0/1 constraint entries, mostly allowed.
pub fn indicator<R: Rng>(rng: &mut R) -> f64 {
    if rng.gen_bool(0.7) {
        1.0
    } else {
        0.0
    }
}
