//! Objects, bipartite diagrams and the structural queries on them.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use crate::tensor::DenseTensor;

/// A wire type with a finite dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObjectType {
    pub name: Arc<str>,
    pub dim: usize,
}

impl ObjectType {
    pub fn new(name: impl Into<Arc<str>>, dim: usize) -> Self {
        Self {
            name: name.into(),
            dim,
        }
    }

    /// Monoidal product of objects; its dimension is the product of dims.
    /// `None` on overflow.
    pub fn product<'a>(parts: impl IntoIterator<Item = &'a ObjectType>) -> Option<ObjectType> {
        let mut names = Vec::new();
        let mut dim: usize = 1;
        for p in parts {
            names.push(p.name.to_string());
            dim = dim.checked_mul(p.dim)?;
        }
        let name = if names.is_empty() {
            "I".to_string()
        } else {
            names.join("⊗")
        };
        Some(ObjectType::new(name, dim))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableNode<T> {
    pub id: usize,
    pub object: ObjectType,
    /// Only present in [`GraphMode::GeneralBipartite`]: the node's own tensor,
    /// one axis per incident wire in ascending wire order.
    pub tensor: Option<DenseTensor<T>>,
}

impl<T> VariableNode<T> {
    pub fn new(id: usize, name: impl Into<Arc<str>>, dim: usize) -> Self {
        Self {
            id,
            object: ObjectType::new(name, dim),
            tensor: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.object.dim
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorNode<T> {
    pub id: usize,
    pub tensor: DenseTensor<T>,
    /// One variable id per tensor axis. Repeats are separate wires.
    pub neighbors: Vec<usize>,
}

impl<T> FactorNode<T> {
    pub fn new(id: usize, neighbors: Vec<usize>, tensor: DenseTensor<T>) -> Self {
        Self {
            id,
            tensor,
            neighbors,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GraphMode {
    /// Variable nodes are spiders; their tensors are implicit.
    #[default]
    SpiderVariables,
    /// Variable-side nodes carry arbitrary tensors of their own.
    GeneralBipartite,
}

/// One wire of the diagram: axis `axis` of factor `factor`, bound to
/// variable `variable`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Wire {
    pub factor: usize,
    pub axis: usize,
    pub variable: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeId {
    Variable(usize),
    Factor(usize),
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Variable(v) => write!(f, "v{v}"),
            NodeId::Factor(u) => write!(f, "f{u}"),
        }
    }
}

/// A bipartite diagram of variable nodes and factor nodes.
///
/// The wire index is derived at construction; the graph is immutable
/// afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorGraph<T> {
    variables: Vec<VariableNode<T>>,
    factors: Vec<FactorNode<T>>,
    mode: GraphMode,
    wires: Vec<Wire>,
    factor_wire_start: Vec<usize>,
    variable_wires: Vec<Vec<usize>>,
}

impl<T> FactorGraph<T> {
    pub fn new(
        variables: Vec<VariableNode<T>>,
        factors: Vec<FactorNode<T>>,
        mode: GraphMode,
    ) -> Self {
        let mut wires = Vec::new();
        let mut factor_wire_start = Vec::with_capacity(factors.len());
        let mut variable_wires = vec![Vec::new(); variables.len()];
        for (u, factor) in factors.iter().enumerate() {
            factor_wire_start.push(wires.len());
            for (axis, &variable) in factor.neighbors.iter().enumerate() {
                if let Some(list) = variable_wires.get_mut(variable) {
                    list.push(wires.len());
                }
                wires.push(Wire {
                    factor: u,
                    axis,
                    variable,
                });
            }
        }
        Self {
            variables,
            factors,
            mode,
            wires,
            factor_wire_start,
            variable_wires,
        }
    }

    pub fn spider(variables: Vec<VariableNode<T>>, factors: Vec<FactorNode<T>>) -> Self {
        Self::new(variables, factors, GraphMode::SpiderVariables)
    }

    pub fn variables(&self) -> &[VariableNode<T>] {
        &self.variables
    }

    pub fn factors(&self) -> &[FactorNode<T>] {
        &self.factors
    }

    pub fn mode(&self) -> GraphMode {
        self.mode
    }

    pub fn wires(&self) -> &[Wire] {
        &self.wires
    }

    /// Wire id of axis `axis` on factor `factor`.
    pub fn wire_id(&self, factor: usize, axis: usize) -> usize {
        self.factor_wire_start[factor] + axis
    }

    /// Wire ids of a factor, in axis order.
    pub fn factor_wires(&self, factor: usize) -> std::ops::Range<usize> {
        let start = self.factor_wire_start[factor];
        start..start + self.factors[factor].neighbors.len()
    }

    /// Wire ids incident on a variable, ascending.
    pub fn variable_wires(&self, variable: usize) -> &[usize] {
        &self.variable_wires[variable]
    }

    pub fn dims(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.dim()).collect()
    }

    /// Apply `f` to every tensor entry, keeping the structure.
    pub fn map_values<U>(&self, mut f: impl FnMut(&T) -> U) -> FactorGraph<U> {
        let variables = self
            .variables
            .iter()
            .map(|v| VariableNode {
                id: v.id,
                object: v.object.clone(),
                tensor: v.tensor.as_ref().map(|t| t.map(&mut f)),
            })
            .collect();
        let factors = self
            .factors
            .iter()
            .map(|u| FactorNode::new(u.id, u.neighbors.clone(), u.tensor.map(&mut f)))
            .collect();
        FactorGraph::new(variables, factors, self.mode)
    }

    /// Fallible variant of [`FactorGraph::map_values`].
    pub fn try_map_values<U, E>(
        &self,
        mut f: impl FnMut(&T) -> Result<U, E>,
    ) -> Result<FactorGraph<U>, E> {
        let mut variables = Vec::with_capacity(self.variables.len());
        for v in &self.variables {
            let tensor = match &v.tensor {
                Some(t) => Some(t.try_map(&mut f)?),
                None => None,
            };
            variables.push(VariableNode {
                id: v.id,
                object: v.object.clone(),
                tensor,
            });
        }
        let mut factors = Vec::with_capacity(self.factors.len());
        for u in &self.factors {
            factors.push(FactorNode::new(
                u.id,
                u.neighbors.clone(),
                u.tensor.try_map(&mut f)?,
            ));
        }
        Ok(FactorGraph::new(variables, factors, self.mode))
    }

    /// Replace one factor's tensor entry (used to seed derivative runs).
    pub fn with_factor_entry(&self, factor: usize, flat: usize, value: T) -> FactorGraph<T>
    where
        T: Clone,
    {
        let mut g = self.clone();
        g.factors[factor].tensor.data_mut()[flat] = value;
        g
    }

    /// Rewrite a general bipartite graph as a spider graph with one
    /// variable per wire; variable-side tensors become factors appended
    /// after the original ones. Also returns, per original variable, the
    /// new variable standing for its first wire (`None` at degree 0).
    ///
    /// Spider graphs are returned unchanged with the identity mapping.
    pub fn to_spider_form(&self) -> (FactorGraph<T>, Vec<Option<usize>>)
    where
        T: Clone,
    {
        if self.mode == GraphMode::SpiderVariables {
            return (self.clone(), (0..self.variables.len()).map(Some).collect());
        }
        let variables: Vec<VariableNode<T>> = self
            .wires
            .iter()
            .enumerate()
            .map(|(i, w)| VariableNode {
                id: i,
                object: self.variables[w.variable].object.clone(),
                tensor: None,
            })
            .collect();
        let mut factors: Vec<FactorNode<T>> = self
            .factors
            .iter()
            .enumerate()
            .map(|(u, f)| FactorNode::new(u, self.factor_wires(u).collect(), f.tensor.clone()))
            .collect();
        for (v, node) in self.variables.iter().enumerate() {
            if let Some(t) = &node.tensor {
                let id = factors.len();
                factors.push(FactorNode::new(id, self.variable_wires[v].clone(), t.clone()));
            }
        }
        let representative = self
            .variable_wires
            .iter()
            .map(|ws| ws.first().copied())
            .collect();
        (FactorGraph::spider(variables, factors), representative)
    }

    /// Adjacency over nodes; one entry per wire, so multi-edges repeat.
    fn adjacency(&self) -> Vec<Vec<NodeId>> {
        let nv = self.variables.len();
        let mut adj = vec![Vec::new(); nv + self.factors.len()];
        for w in &self.wires {
            if w.variable < nv {
                adj[w.variable].push(NodeId::Factor(w.factor));
                adj[nv + w.factor].push(NodeId::Variable(w.variable));
            }
        }
        adj
    }

    pub(crate) fn node_index(&self, node: NodeId) -> usize {
        match node {
            NodeId::Variable(v) => v,
            NodeId::Factor(u) => self.variables.len() + u,
        }
    }

    pub(crate) fn node_at(&self, index: usize) -> NodeId {
        if index < self.variables.len() {
            NodeId::Variable(index)
        } else {
            NodeId::Factor(index - self.variables.len())
        }
    }

    /// Connected components as sorted node lists, ordered by smallest node.
    pub fn components(&self) -> Vec<Vec<NodeId>> {
        let adj = self.adjacency();
        let n = adj.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            let mut members = Vec::new();
            while let Some(i) = queue.pop_front() {
                members.push(self.node_at(i));
                for &nb in &adj[i] {
                    let j = self.node_index(nb);
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            members.sort();
            out.push(members);
        }
        out
    }

    /// BFS distances (in edges) from `start`; unreachable nodes are `None`.
    pub(crate) fn distances_from(&self, start: NodeId) -> Vec<Option<usize>> {
        let adj = self.adjacency();
        let mut dist = vec![None; adj.len()];
        let s = self.node_index(start);
        dist[s] = Some(0);
        let mut queue = VecDeque::from([s]);
        while let Some(i) = queue.pop_front() {
            let d = dist[i].unwrap();
            for &nb in &adj[i] {
                let j = self.node_index(nb);
                if dist[j].is_none() {
                    dist[j] = Some(d + 1);
                    queue.push_back(j);
                }
            }
        }
        dist
    }
}

/// One violated structural invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    ZeroDimension { variable: usize },
    VariableIdMismatch { index: usize, id: usize },
    FactorIdMismatch { index: usize, id: usize },
    RankMismatch { factor: usize, rank: usize, neighbors: usize },
    UnknownVariable { factor: usize, axis: usize, variable: usize },
    AxisDimension { factor: usize, axis: usize, expected: usize, found: usize },
    MissingVariableTensor { variable: usize },
    UnexpectedVariableTensor { variable: usize },
    VariableTensorShape { variable: usize, expected: Vec<usize>, found: Vec<usize> },
    /// A serialized table whose length does not match its scope.
    EntryCount { factor: usize, expected: usize, found: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ZeroDimension { variable } => {
                write!(f, "variable {variable} has dimension 0")
            }
            Violation::VariableIdMismatch { index, id } => {
                write!(f, "variable at position {index} has id {id}")
            }
            Violation::FactorIdMismatch { index, id } => {
                write!(f, "factor at position {index} has id {id}")
            }
            Violation::RankMismatch {
                factor,
                rank,
                neighbors,
            } => write!(
                f,
                "factor {factor} has a rank-{rank} tensor but {neighbors} neighbors"
            ),
            Violation::UnknownVariable {
                factor,
                axis,
                variable,
            } => write!(f, "factor {factor} axis {axis} names unknown variable {variable}"),
            Violation::AxisDimension {
                factor,
                axis,
                expected,
                found,
            } => write!(
                f,
                "factor {factor} axis {axis} has length {found}, variable dimension is {expected}"
            ),
            Violation::MissingVariableTensor { variable } => {
                write!(f, "variable {variable} has no tensor in bipartite mode")
            }
            Violation::UnexpectedVariableTensor { variable } => {
                write!(f, "variable {variable} carries a tensor in spider mode")
            }
            Violation::VariableTensorShape {
                variable,
                expected,
                found,
            } => write!(
                f,
                "variable {variable} tensor has shape {found:?}, expected {expected:?}"
            ),
            Violation::EntryCount {
                factor,
                expected,
                found,
            } => write!(f, "factor {factor} has {found} values, its scope has {expected} entries"),
        }
    }
}

/// Every violated invariant; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

pub fn validate_graph<T>(g: &FactorGraph<T>) -> ValidationReport {
    let mut violations = Vec::new();
    let nv = g.variables.len();
    for (index, v) in g.variables.iter().enumerate() {
        if v.id != index {
            violations.push(Violation::VariableIdMismatch { index, id: v.id });
        }
        if v.dim() == 0 {
            violations.push(Violation::ZeroDimension { variable: index });
        }
        match (g.mode, &v.tensor) {
            (GraphMode::SpiderVariables, Some(_)) => {
                violations.push(Violation::UnexpectedVariableTensor { variable: index })
            }
            (GraphMode::GeneralBipartite, None) => {
                violations.push(Violation::MissingVariableTensor { variable: index })
            }
            (GraphMode::GeneralBipartite, Some(t)) => {
                let expected = vec![v.dim(); g.variable_wires[index].len()];
                if t.shape() != expected.as_slice() {
                    violations.push(Violation::VariableTensorShape {
                        variable: index,
                        expected,
                        found: t.shape().to_vec(),
                    });
                }
            }
            (GraphMode::SpiderVariables, None) => {}
        }
    }
    for (index, u) in g.factors.iter().enumerate() {
        if u.id != index {
            violations.push(Violation::FactorIdMismatch { index, id: u.id });
        }
        let shape = u.tensor.shape();
        if shape.len() != u.neighbors.len() {
            violations.push(Violation::RankMismatch {
                factor: index,
                rank: shape.len(),
                neighbors: u.neighbors.len(),
            });
        }
        for (axis, &variable) in u.neighbors.iter().enumerate() {
            if variable >= nv {
                violations.push(Violation::UnknownVariable {
                    factor: index,
                    axis,
                    variable,
                });
                continue;
            }
            let expected = g.variables[variable].dim();
            if let Some(&found) = shape.get(axis) {
                if found != expected {
                    violations.push(Violation::AxisDimension {
                        factor: index,
                        axis,
                        expected,
                        found,
                    });
                }
            }
        }
    }
    ValidationReport { violations }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeInfo {
    /// The graph is a forest without multi-edges.
    pub is_tree: bool,
    /// Longest shortest path in edges over all components; trees only.
    pub diameter: Option<usize>,
    pub components: usize,
}

/// Forest detection, component count and diameter of the bipartite graph.
pub fn tree_info<T>(g: &FactorGraph<T>) -> TreeInfo {
    let components = g.components();
    let nodes = g.variables.len() + g.factors.len();
    // a forest has exactly nodes - components edges; multi-edges count twice
    let is_tree = g.wires.len() + components.len() == nodes;
    let diameter = is_tree.then(|| {
        components
            .iter()
            .map(|comp| {
                // double sweep is exact on trees
                let far = farthest(g, comp[0]).0;
                farthest(g, far).1
            })
            .max()
            .unwrap_or(0)
    });
    TreeInfo {
        is_tree,
        diameter,
        components: components.len(),
    }
}

fn farthest<T>(g: &FactorGraph<T>, start: NodeId) -> (NodeId, usize) {
    let dist = g.distances_from(start);
    let mut best = (start, 0);
    for (i, d) in dist.iter().enumerate() {
        if let Some(d) = *d {
            if d > best.1 {
                best = (g.node_at(i), d);
            }
        }
    }
    best
}
