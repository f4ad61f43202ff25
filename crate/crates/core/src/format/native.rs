use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use super::FormatError;
use crate::algebra::Semiring;
use crate::scheme::{validate_graph, FactorGraph, FactorNode, GraphMode, ValidationReport, VariableNode, Violation};
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NativeMode {
    #[default]
    Spider,
    Bipartite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NativeVariable {
    pub id: usize,
    pub name: String,
    pub dim: usize,
    /// Bipartite mode only: the node's own table, one axis per incident
    /// wire in ascending wire order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<Json>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NativeFactor {
    pub id: usize,
    pub neighbors: Vec<usize>,
    /// Flat row-major table, entries in the semiring's JSON encoding.
    pub values: Vec<Json>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NativeDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semiring_hint: Option<String>,
    pub variables: Vec<NativeVariable>,
    pub factors: Vec<NativeFactor>,
    #[serde(default)]
    pub mode: NativeMode,
}

/// Parse the document syntax only; entries stay raw until a semiring is
/// chosen.
pub fn parse_native(text: &str) -> Result<NativeDocument, FormatError> {
    serde_json::from_str(text).map_err(|e| FormatError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Parse and convert in one step.
pub fn parse_native_graph<S: Semiring>(text: &str) -> Result<FactorGraph<S::Value>, FormatError> {
    parse_native(text)?.to_graph::<S>()
}

fn convert<S: Semiring>(values: &[Json], at: impl Fn(usize) -> String) -> Result<Vec<S::Value>, FormatError> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            S::from_json(v).map_err(|message| FormatError::Value { at: at(i), message })
        })
        .collect()
}

impl NativeDocument {
    /// Structural checks that must pass before tables can be shaped, then
    /// entry conversion and full graph validation.
    pub fn to_graph<S: Semiring>(&self) -> Result<FactorGraph<S::Value>, FormatError> {
        let nv = self.variables.len();
        let mut violations = Vec::new();
        let mut degree = vec![0usize; nv];
        // violations cite the ids written in the document
        for (index, v) in self.variables.iter().enumerate() {
            if v.id != index {
                violations.push(Violation::VariableIdMismatch { index, id: v.id });
            }
        }
        for (index, f) in self.factors.iter().enumerate() {
            if f.id != index {
                violations.push(Violation::FactorIdMismatch { index, id: f.id });
            }
            let mut expected = Some(1usize);
            for (axis, &v) in f.neighbors.iter().enumerate() {
                match self.variables.get(v) {
                    Some(var) => {
                        degree[v] += 1;
                        expected = expected.and_then(|e| e.checked_mul(var.dim));
                    }
                    None => {
                        violations.push(Violation::UnknownVariable {
                            factor: f.id,
                            axis,
                            variable: v,
                        });
                        expected = None;
                    }
                }
            }
            if let Some(expected) = expected {
                if expected != f.values.len() {
                    violations.push(Violation::EntryCount {
                        factor: f.id,
                        expected,
                        found: f.values.len(),
                    });
                }
            }
        }
        let mode = match self.mode {
            NativeMode::Spider => GraphMode::SpiderVariables,
            NativeMode::Bipartite => GraphMode::GeneralBipartite,
        };
        for (index, v) in self.variables.iter().enumerate() {
            match (mode, &v.values) {
                (GraphMode::SpiderVariables, Some(_)) => {
                    violations.push(Violation::UnexpectedVariableTensor { variable: v.id })
                }
                (GraphMode::GeneralBipartite, None) => {
                    violations.push(Violation::MissingVariableTensor { variable: v.id })
                }
                (GraphMode::GeneralBipartite, Some(values)) => {
                    let expected = vec![v.dim; degree[index]];
                    let entries = expected.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
                    if entries != Some(values.len()) {
                        violations.push(Violation::VariableTensorShape {
                            variable: v.id,
                            expected,
                            found: vec![values.len()],
                        });
                    }
                }
                (GraphMode::SpiderVariables, None) => {}
            }
        }
        if !violations.is_empty() {
            return Err(FormatError::Validation(ValidationReport { violations }));
        }

        let mut variables = Vec::with_capacity(nv);
        for (index, v) in self.variables.iter().enumerate() {
            let mut node = VariableNode::new(v.id, v.name.as_str(), v.dim);
            if let Some(values) = &v.values {
                let data = convert::<S>(values, |i| format!("variable {index} entry {i}"))?;
                let tensor = DenseTensor::new(vec![v.dim; degree[index]], data).expect("count checked");
                node.tensor = Some(tensor);
            }
            variables.push(node);
        }
        let mut factors = Vec::with_capacity(self.factors.len());
        for (index, f) in self.factors.iter().enumerate() {
            let shape = f.neighbors.iter().map(|&v| self.variables[v].dim).collect();
            let data = convert::<S>(&f.values, |i| format!("factor {index} entry {i}"))?;
            let tensor = DenseTensor::new(shape, data).expect("count checked");
            factors.push(FactorNode::new(f.id, f.neighbors.clone(), tensor));
        }
        let g = FactorGraph::new(variables, factors, mode);
        let report = validate_graph(&g);
        if report.is_valid() {
            Ok(g)
        } else {
            Err(FormatError::Validation(report))
        }
    }

    pub fn from_graph<S: Semiring>(g: &FactorGraph<S::Value>, semiring_hint: Option<String>) -> Self {
        let encode = |data: &[S::Value]| data.iter().map(S::to_json).collect::<Vec<Json>>();
        NativeDocument {
            semiring_hint,
            variables: g
                .variables()
                .iter()
                .map(|v| NativeVariable {
                    id: v.id,
                    name: v.object.name.to_string(),
                    dim: v.dim(),
                    values: v.tensor.as_ref().map(|t| encode(t.data())),
                })
                .collect(),
            factors: g
                .factors()
                .iter()
                .map(|f| NativeFactor {
                    id: f.id,
                    neighbors: f.neighbors.clone(),
                    values: encode(f.tensor.data()),
                })
                .collect(),
            mode: match g.mode() {
                GraphMode::SpiderVariables => NativeMode::Spider,
                GraphMode::GeneralBipartite => NativeMode::Bipartite,
            },
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialize")
    }
}
