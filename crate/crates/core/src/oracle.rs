//! Exhaustive enumeration: exact contraction values, marginals and MAP
//! assignments by visiting every joint assignment.
//!
//! Deliberately independent of the message passing code and the tensor
//! kernels; only raw entry lookups are shared.

use thiserror::Error;

use crate::algebra::Semiring;
use crate::scheme::{validate_graph, FactorGraph, ValidationReport};
use crate::tensor::strides;

/// Largest joint state space the oracle will enumerate.
pub const ORACLE_CAP: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("{assignments} joint assignments exceed the oracle cap of {cap}")]
    TooLarge { assignments: u128, cap: usize },
    #[error("invalid graph: {0}")]
    InvalidGraph(ValidationReport),
}

/// Mixed-radix counter over variable dimensions, ascending row-major (last
/// variable fastest).
#[derive(Debug, Clone)]
pub struct AssignmentIterator {
    dims: Vec<usize>,
    current: Vec<usize>,
    done: bool,
}

impl AssignmentIterator {
    pub fn new(dims: Vec<usize>) -> Self {
        let done = dims.contains(&0);
        Self {
            current: vec![0; dims.len()],
            dims,
            done,
        }
    }
}

impl Iterator for AssignmentIterator {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        self.done = !crate::tensor::advance(&mut self.current, &self.dims);
        Some(out)
    }
}

struct Plan {
    /// For each factor: per-axis stride into its data and the variable read.
    factors: Vec<Vec<(usize, usize)>>,
}

fn prepare<T>(g: &FactorGraph<T>) -> Result<(Plan, Vec<usize>), OracleError> {
    let report = validate_graph(g);
    if !report.is_valid() {
        return Err(OracleError::InvalidGraph(report));
    }
    let dims = g.dims();
    let assignments = dims.iter().fold(1u128, |acc, &d| acc.saturating_mul(d as u128));
    if assignments > ORACLE_CAP as u128 {
        return Err(OracleError::TooLarge {
            assignments,
            cap: ORACLE_CAP,
        });
    }
    let factors = g
        .factors()
        .iter()
        .map(|f| {
            let st = strides(f.tensor.shape());
            f.neighbors.iter().copied().zip(st).map(|(v, s)| (s, v)).collect()
        })
        .collect();
    Ok((Plan { factors }, dims))
}

/// Visit every assignment with its weight (product of factor entries in
/// factor order).
fn enumerate<S: Semiring>(
    g: &FactorGraph<S::Value>,
    mut visit: impl FnMut(&[usize], S::Value),
) -> Result<(), OracleError> {
    let (plan, dims) = prepare(g)?;
    let mut assignment = vec![0usize; dims.len()];
    loop {
        let mut weight = S::one();
        for (f, axes) in g.factors().iter().zip(&plan.factors) {
            let flat: usize = axes.iter().map(|&(s, v)| s * assignment[v]).sum();
            weight = S::mul(&weight, &f.tensor.data()[flat]);
        }
        visit(&assignment, weight);
        if !crate::tensor::advance(&mut assignment, &dims) {
            break;
        }
    }
    Ok(())
}

/// Product of factor entries at one full assignment.
pub fn assignment_weight<S: Semiring>(g: &FactorGraph<S::Value>, assignment: &[usize]) -> S::Value {
    let (g, _) = g.to_spider_form();
    g.factors().iter().fold(S::one(), |acc, f| {
        let index: Vec<usize> = f.neighbors.iter().map(|&v| assignment[v]).collect();
        S::mul(&acc, f.tensor.get(&index))
    })
}

/// Semiring sum over all assignments of the product of factor entries.
pub fn exact_contraction<S: Semiring>(g: &FactorGraph<S::Value>) -> Result<S::Value, OracleError> {
    let (g, _) = g.to_spider_form();
    let mut z = S::zero();
    enumerate::<S>(&g, |_, w| z = S::add(&z, &w))?;
    Ok(z)
}

/// Unnormalized marginals of every variable, in one enumeration pass.
///
/// In bipartite graphs a variable's marginal is taken on its first wire;
/// a variable with no wires gets the unit vector.
pub fn exact_marginals<S: Semiring>(g: &FactorGraph<S::Value>) -> Result<Vec<Vec<S::Value>>, OracleError> {
    let (spider, representative) = g.to_spider_form();
    let mut marginals: Vec<Vec<S::Value>> = spider
        .variables()
        .iter()
        .map(|v| vec![S::zero(); v.dim()])
        .collect();
    enumerate::<S>(&spider, |a, w| {
        for (v, m) in marginals.iter_mut().enumerate() {
            m[a[v]] = S::add(&m[a[v]], &w);
        }
    })?;
    Ok(representative
        .iter()
        .zip(g.variables())
        .map(|(rep, node)| match rep {
            Some(r) => marginals[*r].clone(),
            None => vec![S::one(); node.dim()],
        })
        .collect())
}

pub fn exact_marginal<S: Semiring>(g: &FactorGraph<S::Value>, v: usize) -> Result<Vec<S::Value>, OracleError> {
    let mut all = exact_marginals::<S>(g)?;
    Ok(all.swap_remove(v))
}

/// Lexicographically least assignment of maximum weight over nonnegative
/// real factors, with that weight.
pub fn exact_argmax(g: &FactorGraph<f64>) -> Result<(Vec<usize>, f64), OracleError> {
    let (spider, _) = g.to_spider_form();
    let mut best: Option<(Vec<usize>, f64)> = None;
    enumerate::<crate::algebra::Prob>(&spider, |a, w| match &best {
        Some((_, b)) if w <= *b => {}
        _ => best = Some((a.to_vec(), w)),
    })?;
    Ok(best.unwrap_or((Vec::new(), 1.0)))
}
