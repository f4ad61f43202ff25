//! Tree decompositions of loopy diagrams, and junction tree inference as
//! ordinary two-pass message passing on a derived tree diagram.
//!
//! The derived diagram has one factor per clique. Each clique factor has a
//! private axis over the clique's joint states plus one axis per separator;
//! separators become (composite) variables shared by exactly two cliques.
//! The private axis makes the clique belief an ordinary variable belief.

use std::collections::{BTreeSet, HashSet};

use thiserror::Error;

use crate::algebra::Semiring;
use crate::engine::{self, run_bp, EngineError, RunConfig, Schedule};
use crate::scheme::{FactorGraph, FactorNode, GraphMode, ObjectType, VariableNode};
use crate::tensor::{advance, checked_size, DenseTensor, Message, TENSOR_ENTRY_CAP};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JtreeError {
    #[error("clique {members:?} has {entries} joint states, above the cap of {cap}")]
    CliqueTooLarge {
        members: Vec<usize>,
        entries: u128,
        cap: usize,
    },
    #[error("junction trees are built on spider graphs; expand bipartite graphs first")]
    UnsupportedMode,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clique {
    pub id: usize,
    /// Sorted variable ids.
    pub members: Vec<usize>,
    /// Factors whose potentials live on this clique.
    pub factors: Vec<usize>,
    /// Product of member dimensions.
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Separator {
    pub cliques: (usize, usize),
    /// Sorted shared variables.
    pub variables: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JunctionTree {
    pub cliques: Vec<Clique>,
    pub separators: Vec<Separator>,
    /// Lowest-id clique containing each original variable.
    pub cover: Vec<usize>,
    /// Rank-0 factors, which belong to no clique.
    pub scalar_factors: Vec<usize>,
}

impl JunctionTree {
    /// Every variable's cliques induce a connected subtree, and the
    /// separator edges form a forest.
    pub fn running_intersection_holds(&self) -> bool {
        let n = self.cliques.len();
        // forest check
        let mut uf = UnionFind::new(n);
        for s in &self.separators {
            if !uf.union(s.cliques.0, s.cliques.1) {
                return false;
            }
        }
        let nv = self.cover.len();
        for v in 0..nv {
            let holding: Vec<usize> = self
                .cliques
                .iter()
                .filter(|c| c.members.binary_search(&v).is_ok())
                .map(|c| c.id)
                .collect();
            if holding.is_empty() {
                return false;
            }
            let mut sub = UnionFind::new(n);
            let mut merges = 0;
            for s in &self.separators {
                let (a, b) = s.cliques;
                if s.variables.binary_search(&v).is_ok()
                    && holding.contains(&a)
                    && holding.contains(&b)
                    && sub.union(a, b)
                {
                    merges += 1;
                }
            }
            if merges + 1 != holding.len() {
                return false;
            }
        }
        true
    }

    /// Largest clique size minus one.
    pub fn width(&self) -> usize {
        self.cliques
            .iter()
            .map(|c| c.members.len())
            .max()
            .unwrap_or(1)
            .saturating_sub(1)
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// `false` when already joined.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

fn fill_in(adj: &[BTreeSet<usize>], alive: &[bool], v: usize) -> usize {
    let nbrs: Vec<usize> = adj[v].iter().copied().filter(|&u| alive[u]).collect();
    let mut fill = 0;
    for (i, &a) in nbrs.iter().enumerate() {
        for &b in &nbrs[i + 1..] {
            if !adj[a].contains(&b) {
                fill += 1;
            }
        }
    }
    fill
}

/// Min-fill elimination (ties to the lowest id), maximal elimination
/// cliques, and a maximum-weight spanning forest over separator sizes
/// (ties to the lexicographically smallest clique pair).
pub fn build_junction_tree<T>(g: &FactorGraph<T>) -> Result<JunctionTree, JtreeError> {
    if g.mode() == GraphMode::GeneralBipartite {
        return Err(JtreeError::UnsupportedMode);
    }
    let nv = g.variables().len();
    let mut adj = vec![BTreeSet::new(); nv];
    for f in g.factors() {
        for &a in &f.neighbors {
            for &b in &f.neighbors {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
    }

    let mut alive = vec![true; nv];
    let mut elimination_cliques: Vec<Vec<usize>> = Vec::with_capacity(nv);
    for _ in 0..nv {
        let v = (0..nv)
            .filter(|&v| alive[v])
            .min_by_key(|&v| (fill_in(&adj, &alive, v), v))
            .expect("a live variable remains");
        let nbrs: Vec<usize> = adj[v].iter().copied().filter(|&u| alive[u]).collect();
        for &a in &nbrs {
            for &b in &nbrs {
                if a != b {
                    adj[a].insert(b);
                }
            }
        }
        let mut clique = nbrs;
        clique.push(v);
        clique.sort_unstable();
        elimination_cliques.push(clique);
        alive[v] = false;
    }

    let mut maximal: Vec<Vec<usize>> = Vec::new();
    for (i, c) in elimination_cliques.iter().enumerate() {
        let contained = elimination_cliques.iter().enumerate().any(|(j, d)| {
            j != i && is_subset(c, d) && (c.len() < d.len() || j < i)
        });
        if !contained {
            maximal.push(c.clone());
        }
    }
    maximal.sort();

    let dims = g.dims();
    let mut cliques = Vec::with_capacity(maximal.len());
    for (id, members) in maximal.into_iter().enumerate() {
        let shape: Vec<usize> = members.iter().map(|&v| dims[v]).collect();
        let dim = checked_size(&shape).map_err(|_| JtreeError::CliqueTooLarge {
            entries: shape.iter().fold(1u128, |a, &d| a.saturating_mul(d as u128)),
            members: members.clone(),
            cap: TENSOR_ENTRY_CAP,
        })?;
        cliques.push(Clique {
            id,
            members,
            factors: Vec::new(),
            dim,
        });
    }

    let mut scalar_factors = Vec::new();
    for (u, f) in g.factors().iter().enumerate() {
        if f.neighbors.is_empty() {
            scalar_factors.push(u);
            continue;
        }
        let scope: BTreeSet<usize> = f.neighbors.iter().copied().collect();
        let home = cliques
            .iter_mut()
            .find(|c| scope.iter().all(|v| c.members.binary_search(v).is_ok()))
            .expect("every factor scope is covered by an elimination clique");
        home.factors.push(u);
    }

    let mut candidates = Vec::new();
    for i in 0..cliques.len() {
        for j in i + 1..cliques.len() {
            let shared = intersect(&cliques[i].members, &cliques[j].members);
            if !shared.is_empty() {
                candidates.push((std::cmp::Reverse(shared.len()), i, j, shared));
            }
        }
    }
    candidates.sort();
    let mut uf = UnionFind::new(cliques.len());
    let mut separators = Vec::new();
    for (_, i, j, shared) in candidates {
        if uf.union(i, j) {
            separators.push(Separator {
                cliques: (i, j),
                variables: shared,
            });
        }
    }

    let cover = (0..nv)
        .map(|v| {
            cliques
                .iter()
                .position(|c| c.members.binary_search(&v).is_ok())
                .expect("every variable is in its own elimination clique")
        })
        .collect();

    Ok(JunctionTree {
        cliques,
        separators,
        cover,
        scalar_factors,
    })
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.binary_search(x).is_ok())
}

fn intersect(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().copied().filter(|x| b.binary_search(x).is_ok()).collect()
}

/// Position of each of `vars` inside the sorted `members` list.
fn positions(members: &[usize], vars: &[usize]) -> Vec<usize> {
    vars.iter()
        .map(|v| members.binary_search(v).expect("variable in clique"))
        .collect()
}

fn clique_potential<S: Semiring>(g: &FactorGraph<S::Value>, clique: &Clique) -> Vec<S::Value> {
    let shape: Vec<usize> = clique
        .members
        .iter()
        .map(|&v| g.variables()[v].dim())
        .collect();
    let lookups: Vec<(usize, Vec<usize>)> = clique
        .factors
        .iter()
        .map(|&u| (u, positions(&clique.members, &g.factors()[u].neighbors)))
        .collect();
    let mut out = Vec::with_capacity(clique.dim);
    let mut state = vec![0; shape.len()];
    let mut index = Vec::new();
    for _ in 0..clique.dim {
        let mut psi = S::one();
        for (u, pos) in &lookups {
            index.clear();
            index.extend(pos.iter().map(|&p| state[p]));
            psi = S::mul(&psi, g.factors()[*u].tensor.get(&index));
        }
        out.push(psi);
        advance(&mut state, &shape);
    }
    out
}

/// The tree diagram equivalent to `g` under `tree`: variables `0..C` are
/// the private clique-state axes, followed by one composite variable per
/// separator; factors are clique potentials, then the rank-0 factors.
pub fn derived_graph<S: Semiring>(
    g: &FactorGraph<S::Value>,
    tree: &JunctionTree,
) -> Result<FactorGraph<S::Value>, JtreeError> {
    let dims = g.dims();
    let nc = tree.cliques.len();
    let mut variables: Vec<VariableNode<S::Value>> = tree
        .cliques
        .iter()
        .map(|c| VariableNode::new(c.id, format!("clique{}", c.id), c.dim))
        .collect();
    for (e, s) in tree.separators.iter().enumerate() {
        let parts: Vec<ObjectType> = s
            .variables
            .iter()
            .map(|&v| g.variables()[v].object.clone())
            .collect();
        let object = ObjectType::product(&parts).expect("separator fits in its cliques");
        variables.push(VariableNode {
            id: nc + e,
            object,
            tensor: None,
        });
    }

    let mut factors = Vec::with_capacity(nc + tree.scalar_factors.len());
    for c in &tree.cliques {
        let incident: Vec<usize> = tree
            .separators
            .iter()
            .enumerate()
            .filter(|(_, s)| s.cliques.0 == c.id || s.cliques.1 == c.id)
            .map(|(e, _)| e)
            .collect();
        let mut shape = vec![c.dim];
        shape.extend(incident.iter().map(|&e| variables[nc + e].dim()));
        let size = checked_size(&shape).map_err(|_| JtreeError::CliqueTooLarge {
            members: c.members.clone(),
            entries: shape.iter().fold(1u128, |a, &d| a.saturating_mul(d as u128)),
            cap: TENSOR_ENTRY_CAP,
        })?;
        let block = size / c.dim;
        let member_shape: Vec<usize> = c.members.iter().map(|&v| dims[v]).collect();
        // (position in clique, dim) per separator variable
        let projections: Vec<Vec<(usize, usize)>> = incident
            .iter()
            .map(|&e| {
                let vars = &tree.separators[e].variables;
                positions(&c.members, vars)
                    .into_iter()
                    .zip(vars.iter().map(|&v| dims[v]))
                    .collect()
            })
            .collect();
        let potential = clique_potential::<S>(g, c);
        let mut data = vec![S::zero(); size];
        let mut state = vec![0; member_shape.len()];
        for (x, psi) in potential.into_iter().enumerate() {
            let mut offset = 0;
            for (k, proj) in projections.iter().enumerate() {
                let sep_index = proj.iter().fold(0, |acc, &(p, d)| acc * d + state[p]);
                offset = offset * shape[k + 1] + sep_index;
            }
            data[x * block + offset] = psi;
            advance(&mut state, &member_shape);
        }
        let mut neighbors = vec![c.id];
        neighbors.extend(incident.iter().map(|&e| nc + e));
        factors.push(FactorNode::new(
            c.id,
            neighbors,
            DenseTensor::new(shape, data).expect("sized above"),
        ));
    }
    for &u in &tree.scalar_factors {
        let id = factors.len();
        factors.push(FactorNode::new(id, Vec::new(), g.factors()[u].tensor.clone()));
    }
    Ok(FactorGraph::spider(variables, factors))
}

/// Marginal of `variable` obtained by summing a clique belief over the
/// clique's other members.
pub fn clique_marginal<S: Semiring>(
    g: &FactorGraph<S::Value>,
    clique: &Clique,
    belief: &[S::Value],
    variable: usize,
) -> Vec<S::Value> {
    let shape: Vec<usize> = clique
        .members
        .iter()
        .map(|&v| g.variables()[v].dim())
        .collect();
    let p = positions(&clique.members, &[variable])[0];
    let mut out = vec![S::zero(); shape[p]];
    let mut state = vec![0; shape.len()];
    for b in belief {
        out[state[p]] = S::add(&out[state[p]], b);
        advance(&mut state, &shape);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct JunctionTreeRun<V> {
    pub tree: JunctionTree,
    /// Belief per original variable, normalized per the run config.
    pub beliefs: Vec<Message<V>>,
    /// Belief over each clique's joint states.
    pub clique_beliefs: Vec<Vec<V>>,
    pub contraction_value: V,
}

fn normalized<S: Semiring>(values: Vec<S::Value>, cfg: &RunConfig) -> Vec<S::Value> {
    if cfg.normalize {
        if let Some(Ok(v)) = S::normalize(&values) {
            return v;
        }
    }
    values
}

/// Junction tree inference: decompose, build the derived tree diagram, run
/// two-pass message passing on it, and read original marginals off the
/// covering cliques. The contraction value comes from an unnormalized run.
pub fn run_junction_tree<S: Semiring>(
    g: &FactorGraph<S::Value>,
    cfg: &RunConfig,
) -> Result<JunctionTreeRun<S::Value>, JtreeError> {
    let report = crate::scheme::validate_graph(g);
    if !report.is_valid() {
        return Err(EngineError::InvalidGraph(report).into());
    }
    let (spider, representative) = g.to_spider_form();
    let tree = build_junction_tree(&spider)?;
    let derived = derived_graph::<S>(&spider, &tree)?;

    let tree_cfg = RunConfig {
        schedule: Schedule::TwoPassTree,
        damping: 0.0,
        ..cfg.clone()
    };
    let outcome = run_bp::<S>(&derived, &tree_cfg)?;
    let clique_beliefs: Vec<Vec<S::Value>> = outcome.beliefs.variables[..tree.cliques.len()]
        .iter()
        .map(|m| m.values.clone())
        .collect();

    let mut beliefs = Vec::with_capacity(g.variables().len());
    for (node, rep) in g.variables().iter().zip(&representative) {
        let values = match rep {
            Some(r) => {
                let c = &tree.cliques[tree.cover[*r]];
                clique_marginal::<S>(&spider, c, &clique_beliefs[c.id], *r)
            }
            None => vec![S::one(); node.dim()],
        };
        beliefs.push(Message {
            object: node.object.clone(),
            values: normalized::<S>(values, cfg),
        });
    }

    let contraction_value = engine::contraction_value::<S>(&derived, &tree_cfg.clone().unnormalized())?;
    Ok(JunctionTreeRun {
        tree,
        beliefs,
        clique_beliefs,
        contraction_value,
    })
}

/// Cliques that contain each variable, for consistency checks.
pub fn cliques_containing(tree: &JunctionTree, variable: usize) -> Vec<usize> {
    let found: HashSet<usize> = tree
        .cliques
        .iter()
        .filter(|c| c.members.binary_search(&variable).is_ok())
        .map(|c| c.id)
        .collect();
    let mut out: Vec<usize> = found.into_iter().collect();
    out.sort_unstable();
    out
}
