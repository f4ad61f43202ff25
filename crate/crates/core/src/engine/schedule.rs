use std::collections::VecDeque;
use std::fmt;

use crate::scheme::{tree_info, FactorGraph, NodeId};

use super::EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    ToFactor,
    ToVariable,
}

/// One orientation of a wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DirectedWire {
    pub wire: usize,
    pub direction: Direction,
}

impl DirectedWire {
    pub fn to_factor(wire: usize) -> Self {
        Self {
            wire,
            direction: Direction::ToFactor,
        }
    }

    pub fn to_variable(wire: usize) -> Self {
        Self {
            wire,
            direction: Direction::ToVariable,
        }
    }

    /// Render as `v0→f1` / `f1→v0` against a graph.
    pub fn describe<T>(&self, g: &FactorGraph<T>) -> String {
        let w = g.wires()[self.wire];
        match self.direction {
            Direction::ToFactor => format!("v{}→f{}[{}]", w.variable, w.factor, w.axis),
            Direction::ToVariable => format!("f{}[{}]→v{}", w.factor, w.axis, w.variable),
        }
    }
}

impl fmt::Display for DirectedWire {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.direction {
            Direction::ToFactor => write!(f, "wire {} (to factor)", self.wire),
            Direction::ToVariable => write!(f, "wire {} (to variable)", self.wire),
        }
    }
}

/// Leaves-to-root then root-to-leaves ordering of every directed wire of a
/// forest.
///
/// `root` roots its own component; every other component is rooted at its
/// lowest variable (or its lone factor). The upward pass is ordered by the
/// sender's height above the leaves, the downward pass by the receiver's
/// depth; ties go to the lower node id, variables before factors.
pub fn two_pass_schedule<T>(g: &FactorGraph<T>, root: NodeId) -> Result<Vec<DirectedWire>, EngineError> {
    if !tree_info(g).is_tree {
        return Err(EngineError::NotATree);
    }
    let nv = g.variables().len();
    let n = nv + g.factors().len();
    let root_index = g.node_index(root);
    if root_index >= n {
        return Err(EngineError::InvalidConfig(format!("root {root} is not a node")));
    }

    let mut order = Vec::with_capacity(n);
    let mut parent: Vec<Option<usize>> = vec![None; n]; // wire to parent
    let mut depth = vec![0usize; n];
    let mut seen = vec![false; n];
    let mut roots: Vec<usize> = vec![root_index];
    roots.extend(g.components().iter().map(|c| g.node_index(c[0])));
    for r in roots {
        if seen[r] {
            continue;
        }
        seen[r] = true;
        let mut queue = VecDeque::from([r]);
        while let Some(i) = queue.pop_front() {
            order.push(i);
            for (w, j) in neighbors(g, i) {
                if !seen[j] {
                    seen[j] = true;
                    parent[j] = Some(w);
                    depth[j] = depth[i] + 1;
                    queue.push_back(j);
                }
            }
        }
    }

    let mut height = vec![0usize; n];
    for &i in order.iter().rev() {
        if let Some(w) = parent[i] {
            let p = other_end(g, w, i);
            height[p] = height[p].max(height[i] + 1);
        }
    }

    let mut up = Vec::new();
    let mut down = Vec::new();
    for i in 0..n {
        let Some(w) = parent[i] else { continue };
        let node = g.node_at(i);
        let (towards_parent, towards_child) = match node {
            NodeId::Variable(_) => (DirectedWire::to_factor(w), DirectedWire::to_variable(w)),
            NodeId::Factor(_) => (DirectedWire::to_variable(w), DirectedWire::to_factor(w)),
        };
        up.push(((height[i], node), towards_parent));
        down.push(((depth[i], node), towards_child));
    }
    up.sort();
    down.sort();
    Ok(up.into_iter().chain(down).map(|(_, dw)| dw).collect())
}

fn neighbors<T>(g: &FactorGraph<T>, i: usize) -> Vec<(usize, usize)> {
    match g.node_at(i) {
        NodeId::Variable(v) => g
            .variable_wires(v)
            .iter()
            .map(|&w| (w, g.node_index(NodeId::Factor(g.wires()[w].factor))))
            .collect(),
        NodeId::Factor(u) => g
            .factor_wires(u)
            .map(|w| (w, g.wires()[w].variable))
            .collect(),
    }
}

fn other_end<T>(g: &FactorGraph<T>, wire: usize, i: usize) -> usize {
    let w = g.wires()[wire];
    match g.node_at(i) {
        NodeId::Variable(_) => g.node_index(NodeId::Factor(w.factor)),
        NodeId::Factor(_) => w.variable,
    }
}
