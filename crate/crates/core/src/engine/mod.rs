//! The message passing loop: spider and factor updates, schedules,
//! convergence, beliefs, contraction values and MAP decoding.
//!
//! Every directed wire carries one message. A variable (spider) sends the
//! Hadamard product of the messages arriving on its other wires; a factor
//! sends its tensor contracted against the messages arriving on its other
//! axes. In [`GraphMode::GeneralBipartite`] the variable side runs the factor
//! procedure on its own tensor instead.

mod schedule;

use std::cmp::Ordering;

use thiserror::Error;

use crate::algebra::Semiring;
use crate::scheme::{tree_info, validate_graph, FactorGraph, GraphMode, NodeId, ValidationReport};
use crate::tensor::{contract_to_axis, hadamard_values, scale_by_outer, DenseTensor, Message, TensorError};

pub use schedule::{two_pass_schedule, DirectedWire, Direction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid graph: {0}")]
    InvalidGraph(ValidationReport),
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("the graph is not a tree")]
    NotATree,
    #[error("contradiction: message on {at} has empty support")]
    Contradiction { at: String },
    #[error("zero message on {at} cannot be normalized")]
    ZeroMessage { at: String },
    #[error("semiring {0} has no order; MAP decoding is undefined")]
    SemiringNoOrder(&'static str),
    #[error("wire {wire} is not incident on {node}")]
    NotIncident { wire: usize, node: NodeId },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    #[default]
    Synchronous,
    TwoPassTree,
}

/// Run parameters. The semiring itself is the type parameter of each call.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub schedule: Schedule,
    pub max_iters: usize,
    pub tol: f64,
    /// Weight on the previous message; `prob` only.
    pub damping: f64,
    pub normalize: bool,
    /// Reserved for randomized schedules.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schedule: Schedule::Synchronous,
            max_iters: 1000,
            tol: 1e-9,
            damping: 0.0,
            normalize: true,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn two_pass() -> Self {
        Self {
            schedule: Schedule::TwoPassTree,
            ..Self::default()
        }
    }

    pub fn unnormalized(mut self) -> Self {
        self.normalize = false;
        self
    }

    fn check<S: Semiring>(&self) -> Result<(), EngineError> {
        if !(0.0..1.0).contains(&self.damping) {
            return Err(EngineError::InvalidConfig(format!(
                "damping {} outside [0, 1)",
                self.damping
            )));
        }
        if self.damping > 0.0 && S::blend(&S::one(), &S::one(), self.damping).is_none() {
            return Err(EngineError::InvalidConfig(format!(
                "damping is not defined for semiring {}",
                S::NAME
            )));
        }
        if !(self.tol >= 0.0) {
            return Err(EngineError::InvalidConfig(format!("tolerance {} is negative", self.tol)));
        }
        Ok(())
    }
}

/// Change between consecutive message states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Residual {
    /// Largest componentwise absolute difference.
    Numeric(f64),
    /// Exact semirings only record whether anything changed.
    Exact { changed: bool },
}

impl Residual {
    pub fn initial<S: Semiring>() -> Self {
        if S::EXACT {
            Residual::Exact { changed: true }
        } else {
            Residual::Numeric(f64::INFINITY)
        }
    }

    pub fn within(&self, tol: f64) -> bool {
        match *self {
            Residual::Numeric(r) => r <= tol,
            Residual::Exact { changed } => !changed,
        }
    }
}

/// Every directed message, indexed by wire id.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageState<V> {
    pub var_to_factor: Vec<Message<V>>,
    pub factor_to_var: Vec<Message<V>>,
    pub iteration: usize,
    pub residual: Residual,
}

impl<V> MessageState<V> {
    pub fn get(&self, dw: DirectedWire) -> &Message<V> {
        match dw.direction {
            Direction::ToFactor => &self.var_to_factor[dw.wire],
            Direction::ToVariable => &self.factor_to_var[dw.wire],
        }
    }

    fn set(&mut self, dw: DirectedWire, m: Message<V>) {
        match dw.direction {
            Direction::ToFactor => self.var_to_factor[dw.wire] = m,
            Direction::ToVariable => self.factor_to_var[dw.wire] = m,
        }
    }

    /// Message from variable to factor on `(factor, axis)`.
    pub fn to_factor_at<T>(&self, g: &FactorGraph<T>, factor: usize, axis: usize) -> &Message<V> {
        &self.var_to_factor[g.wire_id(factor, axis)]
    }

    /// Message from factor to variable on `(factor, axis)`.
    pub fn to_variable_at<T>(&self, g: &FactorGraph<T>, factor: usize, axis: usize) -> &Message<V> {
        &self.factor_to_var[g.wire_id(factor, axis)]
    }

    /// Largest change between two states over every directed wire.
    pub fn residual_against<S: Semiring<Value = V>>(&self, other: &Self) -> Residual {
        let pairs = self
            .var_to_factor
            .iter()
            .zip(&other.var_to_factor)
            .chain(self.factor_to_var.iter().zip(&other.factor_to_var));
        if S::EXACT {
            Residual::Exact {
                changed: pairs
                    .into_iter()
                    .any(|(a, b)| a.values.iter().zip(&b.values).any(|(x, y)| !S::approx_eq(x, y, 0.0))),
            }
        } else {
            let mut worst: f64 = 0.0;
            for (a, b) in pairs {
                for (x, y) in a.values.iter().zip(&b.values) {
                    let d = S::distance(x, y);
                    // NaN propagates as non-convergence
                    worst = if d.is_nan() { f64::NAN } else { worst.max(d) };
                }
            }
            Residual::Numeric(worst)
        }
    }
}

/// A freshly computed message and whether it has empty support (a zero
/// aggregate under normalization, or an all-zero Boolean message).
#[derive(Debug, Clone, PartialEq)]
pub struct Outgoing<V> {
    pub message: Message<V>,
    pub zero: bool,
}

fn finish<S: Semiring>(message: Message<S::Value>, cfg: &RunConfig) -> Outgoing<S::Value> {
    if cfg.normalize {
        if let Some(res) = S::normalize(&message.values) {
            return match res {
                Ok(values) => Outgoing {
                    message: Message {
                        object: message.object,
                        values,
                    },
                    zero: false,
                },
                Err(_) => Outgoing {
                    message,
                    zero: true,
                },
            };
        }
    }
    let zero = S::ZERO_IS_CONTRADICTION && message.values.iter().all(S::is_zero);
    Outgoing { message, zero }
}

fn check_graph<T>(g: &FactorGraph<T>) -> Result<(), EngineError> {
    let report = validate_graph(g);
    if report.is_valid() {
        Ok(())
    } else {
        Err(EngineError::InvalidGraph(report))
    }
}

/// Every directed message set to the Frobenius unit (all ones), rescaled
/// when normalization is on.
pub fn init_messages<S: Semiring>(g: &FactorGraph<S::Value>, cfg: &RunConfig) -> MessageState<S::Value> {
    let messages: Vec<Message<S::Value>> = g
        .wires()
        .iter()
        .map(|w| {
            let unit = Message::unit::<S>(g.variables()[w.variable].object.clone());
            finish::<S>(unit, cfg).message
        })
        .collect();
    MessageState {
        var_to_factor: messages.clone(),
        factor_to_var: messages,
        iteration: 0,
        residual: Residual::initial::<S>(),
    }
}

/// Message from variable `v` out along `out_wire`.
pub fn update_variable_message<S: Semiring>(
    g: &FactorGraph<S::Value>,
    state: &MessageState<S::Value>,
    v: usize,
    out_wire: usize,
    cfg: &RunConfig,
) -> Result<Outgoing<S::Value>, EngineError> {
    let wires = g.variable_wires(v);
    let Some(pos) = wires.iter().position(|&w| w == out_wire) else {
        return Err(EngineError::NotIncident {
            wire: out_wire,
            node: NodeId::Variable(v),
        });
    };
    let object = g.variables()[v].object.clone();
    let incoming: Vec<&[S::Value]> = wires
        .iter()
        .filter(|&&w| w != out_wire)
        .map(|&w| state.factor_to_var[w].values.as_slice())
        .collect();
    let values = match (g.mode(), &g.variables()[v].tensor) {
        (GraphMode::GeneralBipartite, Some(t)) => contract_to_axis::<S>(t, pos, &incoming)?,
        _ => hadamard_values::<S>(&incoming, object.dim),
    };
    Ok(finish::<S>(Message { object, values }, cfg))
}

/// Message from factor `u` out along axis `out_axis`.
pub fn update_factor_message<S: Semiring>(
    g: &FactorGraph<S::Value>,
    state: &MessageState<S::Value>,
    u: usize,
    out_axis: usize,
    cfg: &RunConfig,
) -> Result<Outgoing<S::Value>, EngineError> {
    let factor = &g.factors()[u];
    if out_axis >= factor.neighbors.len() {
        return Err(EngineError::NotIncident {
            wire: out_axis,
            node: NodeId::Factor(u),
        });
    }
    let out_wire = g.wire_id(u, out_axis);
    let incoming: Vec<&[S::Value]> = g
        .factor_wires(u)
        .filter(|&w| w != out_wire)
        .map(|w| state.var_to_factor[w].values.as_slice())
        .collect();
    let values = contract_to_axis::<S>(&factor.tensor, out_axis, &incoming)?;
    let object = g.variables()[factor.neighbors[out_axis]].object.clone();
    Ok(finish::<S>(Message { object, values }, cfg))
}

fn update<S: Semiring>(
    g: &FactorGraph<S::Value>,
    state: &MessageState<S::Value>,
    dw: DirectedWire,
    cfg: &RunConfig,
) -> Result<Outgoing<S::Value>, EngineError> {
    let w = g.wires()[dw.wire];
    match dw.direction {
        Direction::ToFactor => update_variable_message::<S>(g, state, w.variable, dw.wire, cfg),
        Direction::ToVariable => update_factor_message::<S>(g, state, w.factor, w.axis, cfg),
    }
}

fn zero_error<S: Semiring>(g: &FactorGraph<S::Value>, dw: DirectedWire) -> EngineError {
    let at = dw.describe(g);
    if S::ZERO_IS_CONTRADICTION {
        EngineError::Contradiction { at }
    } else {
        EngineError::ZeroMessage { at }
    }
}

fn sweep<S: Semiring>(
    g: &FactorGraph<S::Value>,
    state: &MessageState<S::Value>,
    cfg: &RunConfig,
    halt_on_zero: bool,
) -> Result<MessageState<S::Value>, EngineError> {
    let mut next = state.clone();
    for wire in 0..g.wires().len() {
        for dw in [DirectedWire::to_factor(wire), DirectedWire::to_variable(wire)] {
            let out = update::<S>(g, state, dw, cfg)?;
            if out.zero && halt_on_zero {
                return Err(zero_error::<S>(g, dw));
            }
            let mut message = out.message;
            if cfg.damping > 0.0 {
                let old = state.get(dw);
                for (new, prev) in message.values.iter_mut().zip(&old.values) {
                    if let Some(b) = S::blend(new, prev, cfg.damping) {
                        *new = b;
                    }
                }
            }
            next.set(dw, message);
        }
    }
    next.iteration = state.iteration + 1;
    next.residual = next.residual_against::<S>(state);
    Ok(next)
}

/// Recompute every message from the previous snapshot (Jacobi style).
pub fn sweep_synchronous<S: Semiring>(
    g: &FactorGraph<S::Value>,
    state: &MessageState<S::Value>,
    cfg: &RunConfig,
) -> Result<(MessageState<S::Value>, Residual), EngineError> {
    cfg.check::<S>()?;
    let next = sweep::<S>(g, state, cfg, true)?;
    let residual = next.residual;
    Ok((next, residual))
}

fn run_two_pass<S: Semiring>(
    g: &FactorGraph<S::Value>,
    cfg: &RunConfig,
    halt_on_zero: bool,
) -> Result<MessageState<S::Value>, EngineError> {
    let root = if g.variables().is_empty() {
        NodeId::Factor(0)
    } else {
        NodeId::Variable(0)
    };
    let mut state = init_messages::<S>(g, cfg);
    if g.variables().is_empty() && g.factors().is_empty() {
        return Ok(state);
    }
    for dw in two_pass_schedule(g, root)? {
        let out = update::<S>(g, &state, dw, cfg)?;
        if out.zero && halt_on_zero {
            return Err(zero_error::<S>(g, dw));
        }
        state.set(dw, out.message);
    }
    state.iteration = 1;
    Ok(state)
}

/// Per-variable beliefs and per-factor beliefs.
#[derive(Debug, Clone, PartialEq)]
pub struct Beliefs<V> {
    pub variables: Vec<Message<V>>,
    pub factors: Vec<DenseTensor<V>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpOutcome<V> {
    pub state: MessageState<V>,
    pub converged: bool,
    pub iterations: usize,
    pub beliefs: Beliefs<V>,
}

/// Run belief propagation to convergence (or `max_iters`).
///
/// `TwoPassTree` executes the schedule once; its reported residual comes
/// from one confirming synchronous sweep that is not kept.
/// `Synchronous` stops at the first state whose next sweep moves no message
/// by more than `tol` and reports that state, so `iterations` is the number
/// of sweeps needed to reach it and one further sweep is a no-op within
/// tolerance. On `max_iters` the last state is reported unconverged.
pub fn run_bp<S: Semiring>(
    g: &FactorGraph<S::Value>,
    cfg: &RunConfig,
) -> Result<BpOutcome<S::Value>, EngineError> {
    check_graph(g)?;
    cfg.check::<S>()?;
    let (state, converged) = match cfg.schedule {
        Schedule::TwoPassTree => {
            let mut state = run_two_pass::<S>(g, cfg, true)?;
            let confirm = sweep::<S>(g, &state, cfg, true)?;
            state.residual = confirm.residual;
            (state, true)
        }
        Schedule::Synchronous => {
            let mut state = init_messages::<S>(g, cfg);
            let mut converged = false;
            while state.iteration < cfg.max_iters {
                let next = sweep::<S>(g, &state, cfg, true)?;
                if next.residual.within(cfg.tol) {
                    // keep the state the sweep confirmed
                    state.residual = next.residual;
                    converged = true;
                    break;
                }
                state = next;
            }
            (state, converged)
        }
    };
    let beliefs = beliefs::<S>(g, &state, cfg)?;
    Ok(BpOutcome {
        iterations: state.iteration,
        state,
        converged,
        beliefs,
    })
}

fn variable_belief_values<S: Semiring>(
    g: &FactorGraph<S::Value>,
    state: &MessageState<S::Value>,
    v: usize,
) -> Vec<S::Value> {
    let dim = g.variables()[v].dim();
    let wires = g.variable_wires(v);
    match g.mode() {
        GraphMode::SpiderVariables => {
            let incoming: Vec<&[S::Value]> = wires
                .iter()
                .map(|&w| state.factor_to_var[w].values.as_slice())
                .collect();
            hadamard_values::<S>(&incoming, dim)
        }
        // the belief of a general node is read off its first wire
        GraphMode::GeneralBipartite => match wires.first() {
            Some(&w) => hadamard_values::<S>(
                &[&state.factor_to_var[w].values, &state.var_to_factor[w].values],
                dim,
            ),
            None => vec![S::one(); dim],
        },
    }
}

/// Variable beliefs (normalized per `cfg`) and factor beliefs (the factor
/// tensor scaled by the outer product of its incoming messages).
pub fn beliefs<S: Semiring>(
    g: &FactorGraph<S::Value>,
    state: &MessageState<S::Value>,
    cfg: &RunConfig,
) -> Result<Beliefs<S::Value>, EngineError> {
    let mut variables = Vec::with_capacity(g.variables().len());
    for (v, node) in g.variables().iter().enumerate() {
        let values = variable_belief_values::<S>(g, state, v);
        let out = finish::<S>(
            Message {
                object: node.object.clone(),
                values,
            },
            cfg,
        );
        if out.zero {
            let at = format!("belief of v{v}");
            if S::ZERO_IS_CONTRADICTION {
                return Err(EngineError::Contradiction { at });
            }
            if cfg.normalize && S::has_normalize() {
                return Err(EngineError::ZeroMessage { at });
            }
        }
        variables.push(out.message);
    }
    let mut factors = Vec::with_capacity(g.factors().len());
    for (u, factor) in g.factors().iter().enumerate() {
        let incoming: Vec<&[S::Value]> = g
            .factor_wires(u)
            .map(|w| state.var_to_factor[w].values.as_slice())
            .collect();
        factors.push(scale_by_outer::<S>(&factor.tensor, &incoming)?);
    }
    Ok(Beliefs { variables, factors })
}

fn contraction_from_state<S: Semiring>(
    g: &FactorGraph<S::Value>,
    state: &MessageState<S::Value>,
    root: Option<usize>,
) -> S::Value {
    let mut z = S::one();
    for comp in g.components() {
        let local = match comp[0] {
            NodeId::Variable(lowest) => {
                let r = match root {
                    Some(r) if comp.contains(&NodeId::Variable(r)) => r,
                    _ => lowest,
                };
                root_value::<S>(g, state, r)
            }
            // a variable-free component is a lone rank-0 factor
            NodeId::Factor(u) => g.factors()[u].tensor.data()[0].clone(),
        };
        z = S::mul(&z, &local);
    }
    z
}

fn root_value<S: Semiring>(g: &FactorGraph<S::Value>, state: &MessageState<S::Value>, r: usize) -> S::Value {
    let node = &g.variables()[r];
    match (g.mode(), &node.tensor) {
        (GraphMode::GeneralBipartite, Some(t)) if g.variable_wires(r).is_empty() => t.data()[0].clone(),
        _ => S::sum(&variable_belief_values::<S>(g, state, r)),
    }
}

fn check_contraction<S: Semiring>(g: &FactorGraph<S::Value>, cfg: &RunConfig) -> Result<(), EngineError> {
    check_graph(g)?;
    if cfg.normalize {
        return Err(EngineError::InvalidConfig(
            "contraction value needs unnormalized messages".into(),
        ));
    }
    if !tree_info(g).is_tree {
        return Err(EngineError::NotATree);
    }
    Ok(())
}

/// The full contraction of a tree (or forest) diagram: partition function,
/// model count, or maximum weight depending on the semiring.
///
/// Each component is closed at its lowest variable; components multiply.
pub fn contraction_value<S: Semiring>(g: &FactorGraph<S::Value>, cfg: &RunConfig) -> Result<S::Value, EngineError> {
    check_contraction::<S>(g, cfg)?;
    let state = run_two_pass::<S>(g, cfg, false)?;
    Ok(contraction_from_state::<S>(g, &state, None))
}

/// [`contraction_value`] with the component containing `root` closed at
/// `root` instead of its lowest variable.
pub fn contraction_value_rooted<S: Semiring>(
    g: &FactorGraph<S::Value>,
    cfg: &RunConfig,
    root: usize,
) -> Result<S::Value, EngineError> {
    check_contraction::<S>(g, cfg)?;
    let state = run_two_pass::<S>(g, cfg, false)?;
    Ok(contraction_from_state::<S>(g, &state, Some(root)))
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax<S: Semiring>(values: &[S::Value]) -> Result<usize, EngineError> {
    if !S::has_order() {
        return Err(EngineError::SemiringNoOrder(S::NAME));
    }
    let mut best = 0;
    for (j, x) in values.iter().enumerate().skip(1) {
        if S::compare(x, &values[best]) == Some(Ordering::Greater) {
            best = j;
        }
    }
    Ok(best)
}

/// Per-variable argmax of the beliefs held in `state`.
pub fn decode_map<S: Semiring>(
    g: &FactorGraph<S::Value>,
    state: &MessageState<S::Value>,
) -> Result<Vec<usize>, EngineError> {
    if !S::has_order() {
        return Err(EngineError::SemiringNoOrder(S::NAME));
    }
    (0..g.variables().len())
        .map(|v| argmax::<S>(&variable_belief_values::<S>(g, state, v)))
        .collect()
}

#[cfg(test)]
mod tests;
