use std::fmt::Write as _;

use super::FormatError;
use crate::scheme::{validate_graph, FactorGraph, FactorNode, GraphMode, VariableNode};
use crate::tensor::DenseTensor;

/// A parsed UAI model and any conversion warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct UaiGraph {
    pub graph: FactorGraph<f64>,
    pub warnings: Vec<String>,
}

struct Tokens<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        Self { text, pos: 0 }
    }

    /// Next whitespace-separated token and its byte offset.
    fn next(&mut self, what: &str) -> Result<(&'a str, usize), FormatError> {
        let rest = &self.text[self.pos..];
        let skipped = rest.len() - rest.trim_start().len();
        let start = self.pos + skipped;
        let tail = &self.text[start..];
        let len = tail.find(char::is_whitespace).unwrap_or(tail.len());
        if len == 0 {
            return Err(FormatError::Truncated {
                offset: start,
                message: format!("expected {what}, found end of input"),
            });
        }
        self.pos = start + len;
        Ok((&tail[..len], start))
    }

    fn usize(&mut self, what: &str) -> Result<(usize, usize), FormatError> {
        let (tok, at) = self.next(what)?;
        tok.parse()
            .map(|n| (n, at))
            .map_err(|_| FormatError::Truncated {
                offset: at,
                message: format!("expected {what}, found {tok:?}"),
            })
    }

    fn real(&mut self, what: &str) -> Result<f64, FormatError> {
        let (tok, at) = self.next(what)?;
        match tok.parse::<f64>() {
            Ok(x) if x.is_finite() && x >= 0.0 => Ok(x),
            _ => Err(FormatError::Truncated {
                offset: at,
                message: format!("expected {what} (a nonnegative real), found {tok:?}"),
            }),
        }
    }

    fn at_end(&self) -> Option<usize> {
        let rest = &self.text[self.pos..];
        let trimmed = rest.trim_start();
        (!trimmed.is_empty()).then(|| self.pos + rest.len() - trimmed.len())
    }
}

/// Parse UAI `MARKOV` text. `BAYES` files are accepted with a warning and
/// their conditional tables read as plain factors.
pub fn parse_uai(text: &str) -> Result<UaiGraph, FormatError> {
    let mut t = Tokens::new(text);
    let mut warnings = Vec::new();
    let (preamble, _) = t.next("preamble")?;
    match preamble {
        "MARKOV" => {}
        "BAYES" => warnings.push("BAYES network read as plain factors; tables are not checked for normalization".into()),
        other => return Err(FormatError::UnsupportedPreamble(other.to_string())),
    }
    let (n, _) = t.usize("variable count")?;
    let mut dims = Vec::with_capacity(n);
    for i in 0..n {
        dims.push(t.usize(&format!("cardinality of variable {i}"))?.0);
    }
    let (m, _) = t.usize("factor count")?;
    let mut scopes = Vec::with_capacity(m);
    for u in 0..m {
        let (k, _) = t.usize(&format!("scope size of factor {u}"))?;
        let mut scope = Vec::with_capacity(k);
        for _ in 0..k {
            let (v, at) = t.usize(&format!("scope variable of factor {u}"))?;
            if v >= n {
                return Err(FormatError::Truncated {
                    offset: at,
                    message: format!("factor {u} names variable {v}, only {n} declared"),
                });
            }
            scope.push(v);
        }
        scopes.push(scope);
    }
    let mut factors = Vec::with_capacity(m);
    for (u, scope) in scopes.into_iter().enumerate() {
        let shape: Vec<usize> = scope.iter().map(|&v| dims[v]).collect();
        let expected: usize = shape.iter().product();
        let (count, at) = t.usize(&format!("entry count of factor {u}"))?;
        if count != expected {
            return Err(FormatError::Truncated {
                offset: at,
                message: format!("factor {u} declares {count} entries, its scope has {expected}"),
            });
        }
        let mut data = Vec::with_capacity(count);
        for i in 0..count {
            data.push(t.real(&format!("entry {i} of factor {u}"))?);
        }
        let tensor = DenseTensor::new(shape, data).expect("count checked");
        factors.push(FactorNode::new(u, scope, tensor));
    }
    if let Some(offset) = t.at_end() {
        return Err(FormatError::Truncated {
            offset,
            message: "unexpected trailing content".into(),
        });
    }
    let variables = dims
        .iter()
        .enumerate()
        .map(|(i, &d)| VariableNode::new(i, format!("x{i}"), d))
        .collect();
    let graph = FactorGraph::spider(variables, factors);
    let report = validate_graph(&graph);
    if !report.is_valid() {
        return Err(FormatError::Validation(report));
    }
    Ok(UaiGraph { graph, warnings })
}

/// Render a spider graph over reals as UAI `MARKOV` text. Variable names
/// are not representable and are dropped.
pub fn write_uai(g: &FactorGraph<f64>) -> Result<String, FormatError> {
    if g.mode() != GraphMode::SpiderVariables {
        return Err(FormatError::NotRepresentable(
            "bipartite variable tables; expand to spider form first".into(),
        ));
    }
    let mut out = String::from("MARKOV\n");
    let dims: Vec<String> = g.dims().iter().map(|d| d.to_string()).collect();
    let _ = writeln!(out, "{}", g.variables().len());
    let _ = writeln!(out, "{}", dims.join(" "));
    let _ = writeln!(out, "{}", g.factors().len());
    for f in g.factors() {
        let mut line = f.neighbors.len().to_string();
        for v in &f.neighbors {
            let _ = write!(line, " {v}");
        }
        let _ = writeln!(out, "{line}");
    }
    for f in g.factors() {
        let _ = writeln!(out, "\n{}", f.tensor.len());
        let entries: Vec<String> = f.tensor.data().iter().map(|x| format!("{x:?}")).collect();
        let _ = writeln!(out, "{}", entries.join(" "));
    }
    Ok(out)
}
