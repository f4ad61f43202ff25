use std::fs;
use std::io::Write;

use clap::ValueEnum;
use semibp::algebra::{check_semiring_axioms, check_semiring_axioms_exhaustive, AxiomReport};
use semibp::checks::{reshape_route_suite, spider_fusion_suite, SuiteReport};
use semibp::engine::{contraction_value, decode_map, run_bp, Residual};
use semibp::format::{parse_native, parse_uai, write_uai, FormatError, NativeDocument, UaiGraph};
use semibp::jtree::run_junction_tree;
use semibp::oracle;
use semibp::scheme::tree_info;
use semibp::tensor::Message;
use semibp::{Boolean, Dual, DualNum, FactorGraph, MaxTimes, NatCount, Prob, Semiring};
use serde::Serialize;

use crate::error::{CliError, EXIT_NOT_CONVERGED, EXIT_OK};
use crate::output::{diagnostic, emit, to_text, BeliefsDocument};
use crate::{infer_format, CheckArgs, ConvertArgs, FormatArg, GradArgs, InferArgs, InputArgs, SemiringArg};

type Out<'a> = &'a mut dyn Write;

enum Source {
    Native(NativeDocument),
    Uai(UaiGraph),
}

impl Source {
    fn load(input: &InputArgs, stderr: Out) -> Result<Self, CliError> {
        let text = fs::read_to_string(&input.input).map_err(|e| CliError::Io {
            path: input.input.display().to_string(),
            message: e.to_string(),
        })?;
        Ok(match infer_format(&input.input, input.format) {
            FormatArg::Native => Source::Native(parse_native(&text)?),
            FormatArg::Uai => {
                let parsed = parse_uai(&text)?;
                for w in &parsed.warnings {
                    diagnostic(stderr, "warning", EXIT_OK, "format", w);
                }
                Source::Uai(parsed)
            }
        })
    }

    fn semiring(&self, flag: Option<SemiringArg>) -> Result<SemiringArg, CliError> {
        if let Some(s) = flag {
            return Ok(s);
        }
        match self {
            Source::Native(NativeDocument {
                semiring_hint: Some(hint),
                ..
            }) => SemiringArg::from_str(hint, true)
                .map_err(|_| CliError::Usage(format!("unknown semiring hint {hint:?}"))),
            _ => Ok(SemiringArg::Prob),
        }
    }

    fn graph<S: Semiring>(&self) -> Result<FactorGraph<S::Value>, CliError> {
        match self {
            Source::Native(doc) => Ok(doc.to_graph::<S>()?),
            Source::Uai(u) => u
                .graph
                .try_map_values(|&x| S::from_f64(x))
                .map_err(|message| {
                    FormatError::Value {
                        at: "uai table".into(),
                        message,
                    }
                    .into()
                }),
        }
    }
}

macro_rules! by_semiring {
    ($sr:expr, $func:ident ( $($arg:expr),* )) => {
        match $sr {
            SemiringArg::Prob => $func::<Prob>($($arg),*),
            SemiringArg::Maxtimes => $func::<MaxTimes>($($arg),*),
            SemiringArg::Bool => $func::<Boolean>($($arg),*),
            SemiringArg::Count => $func::<NatCount>($($arg),*),
            SemiringArg::Dual => $func::<DualNum>($($arg),*),
        }
    };
}

fn settled<S: Semiring>() -> Residual {
    if S::EXACT {
        Residual::Exact { changed: false }
    } else {
        Residual::Numeric(0.0)
    }
}

fn finish_run(converged: bool, stderr: Out) -> u8 {
    if converged {
        EXIT_OK
    } else {
        diagnostic(
            stderr,
            "warning",
            EXIT_NOT_CONVERGED,
            "not_converged",
            "iteration limit reached; partial beliefs emitted",
        );
        EXIT_NOT_CONVERGED
    }
}

pub fn run(args: &InferArgs, stdout: Out, stderr: Out) -> Result<u8, CliError> {
    let src = Source::load(&args.input, stderr)?;
    by_semiring!(src.semiring(args.semiring)?, run_with(&src, args, stdout, stderr))
}

fn run_with<S: Semiring>(src: &Source, args: &InferArgs, stdout: Out, stderr: Out) -> Result<u8, CliError> {
    let g = src.graph::<S>()?;
    let cfg = args.config();
    let out = run_bp::<S>(&g, &cfg)?;
    let mut doc = BeliefsDocument::new::<S>(out.converged, out.iterations, out.state.residual, &out.beliefs.variables);
    if tree_info(&g).is_tree {
        let z = contraction_value::<S>(&g, &cfg.clone().unnormalized())?;
        doc.contraction_value = Some(S::to_json(&z));
    }
    emit(&args.output.output, stdout, &to_text(&doc))?;
    Ok(finish_run(out.converged, stderr))
}

pub fn exact(args: &InferArgs, stdout: Out, stderr: Out) -> Result<u8, CliError> {
    let src = Source::load(&args.input, stderr)?;
    by_semiring!(src.semiring(args.semiring)?, exact_with(&src, args, stdout))
}

fn exact_with<S: Semiring>(src: &Source, args: &InferArgs, stdout: Out) -> Result<u8, CliError> {
    let g = src.graph::<S>()?;
    let z = oracle::exact_contraction::<S>(&g)?;
    let normalize = !args.no_normalize;
    let beliefs: Vec<Message<S::Value>> = oracle::exact_marginals::<S>(&g)?
        .into_iter()
        .zip(g.variables())
        .map(|(m, v)| {
            let values = match S::normalize(&m) {
                Some(Ok(n)) if normalize => n,
                _ => m,
            };
            Message {
                object: v.object.clone(),
                values,
            }
        })
        .collect();
    let mut doc = BeliefsDocument::new::<S>(true, 0, settled::<S>(), &beliefs);
    doc.contraction_value = Some(S::to_json(&z));
    emit(&args.output.output, stdout, &to_text(&doc))?;
    Ok(EXIT_OK)
}

pub fn jtree(args: &InferArgs, stdout: Out, stderr: Out) -> Result<u8, CliError> {
    let src = Source::load(&args.input, stderr)?;
    by_semiring!(src.semiring(args.semiring)?, jtree_with(&src, args, stdout))
}

fn jtree_with<S: Semiring>(src: &Source, args: &InferArgs, stdout: Out) -> Result<u8, CliError> {
    let g = src.graph::<S>()?;
    let result = run_junction_tree::<S>(&g, &args.config())?;
    let mut doc = BeliefsDocument::new::<S>(true, 1, settled::<S>(), &result.beliefs);
    doc.contraction_value = Some(S::to_json(&result.contraction_value));
    emit(&args.output.output, stdout, &to_text(&doc))?;
    Ok(EXIT_OK)
}

pub fn map(args: &InferArgs, stdout: Out, stderr: Out) -> Result<u8, CliError> {
    if let Some(s) = args.semiring {
        if s != SemiringArg::Maxtimes {
            return Err(CliError::Usage("map decoding runs in the maxtimes semiring".into()));
        }
    }
    let src = Source::load(&args.input, stderr)?;
    let g = src.graph::<MaxTimes>()?;
    let out = run_bp::<MaxTimes>(&g, &args.config())?;
    let assignment = decode_map::<MaxTimes>(&g, &out.state)?;
    let weight = oracle::assignment_weight::<MaxTimes>(&g, &assignment);
    let mut doc =
        BeliefsDocument::new::<MaxTimes>(out.converged, out.iterations, out.state.residual, &out.beliefs.variables);
    doc.contraction_value = Some(MaxTimes::to_json(&weight));
    doc.assignment = Some(assignment);
    emit(&args.output.output, stdout, &to_text(&doc))?;
    Ok(finish_run(out.converged, stderr))
}

#[derive(Debug, Serialize)]
struct GradDocument {
    semiring: &'static str,
    factor: usize,
    entry: usize,
    value: f64,
    derivative: f64,
}

pub fn grad(args: &GradArgs, stdout: Out, stderr: Out) -> Result<u8, CliError> {
    let src = Source::load(&args.infer.input, stderr)?;
    let g = src.graph::<DualNum>()?.map_values(|d| Dual::constant(d.re));
    let Some(factor) = g.factors().get(args.factor) else {
        return Err(CliError::Usage(format!("no factor {}", args.factor)));
    };
    let Some(theta) = factor.tensor.data().get(args.entry) else {
        return Err(CliError::Usage(format!(
            "factor {} has {} entries, no entry {}",
            args.factor,
            factor.tensor.len(),
            args.entry
        )));
    };
    let seeded = g.with_factor_entry(args.factor, args.entry, Dual::variable(theta.re));
    let cfg = args.infer.config().unnormalized();
    let z = if tree_info(&seeded).is_tree {
        contraction_value::<DualNum>(&seeded, &cfg)?
    } else {
        run_junction_tree::<DualNum>(&seeded, &cfg)?.contraction_value
    };
    let doc = GradDocument {
        semiring: DualNum::NAME,
        factor: args.factor,
        entry: args.entry,
        value: z.re,
        derivative: z.eps,
    };
    emit(&args.infer.output.output, stdout, &to_text(&doc))?;
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct SuiteLine {
    suite: String,
    checks: usize,
    passed: usize,
    failed: usize,
}

#[derive(Debug, Serialize)]
struct CheckDocument {
    passed: bool,
    suites: Vec<SuiteLine>,
}

fn axiom_line(r: AxiomReport) -> SuiteLine {
    SuiteLine {
        suite: format!("semiring axioms ({})", r.semiring),
        checks: r.checks,
        passed: r.checks - r.failures.len(),
        failed: r.failures.len(),
    }
}

fn suite_line(r: SuiteReport, semiring: &str) -> SuiteLine {
    SuiteLine {
        suite: if semiring.is_empty() {
            r.name.to_string()
        } else {
            format!("{} ({semiring})", r.name)
        },
        checks: r.checks,
        passed: r.checks - r.failures.len(),
        failed: r.failures.len(),
    }
}

pub fn check(args: &CheckArgs, stdout: Out) -> Result<u8, CliError> {
    let suites = vec![
        axiom_line(check_semiring_axioms::<Prob>(args.samples, args.seed)),
        axiom_line(check_semiring_axioms::<MaxTimes>(args.samples, args.seed)),
        axiom_line(check_semiring_axioms_exhaustive::<Boolean>(&[false, true])),
        axiom_line(check_semiring_axioms::<NatCount>(args.samples, args.seed)),
        axiom_line(check_semiring_axioms::<DualNum>(args.samples, args.seed)),
        suite_line(spider_fusion_suite::<Prob>(4, 4), Prob::NAME),
        suite_line(spider_fusion_suite::<NatCount>(4, 4), NatCount::NAME),
        suite_line(spider_fusion_suite::<Boolean>(4, 4), Boolean::NAME),
        suite_line(reshape_route_suite(args.routes, args.seed), ""),
    ];
    let failed: usize = suites.iter().map(|s| s.failed).sum();
    let doc = CheckDocument {
        passed: failed == 0,
        suites,
    };
    emit(&args.output.output, stdout, &to_text(&doc))?;
    if failed == 0 {
        Ok(EXIT_OK)
    } else {
        Err(CliError::ChecksFailed(failed))
    }
}

pub fn convert(args: &ConvertArgs, stdout: Out, stderr: Out) -> Result<u8, CliError> {
    let src = Source::load(&args.input, stderr)?;
    let from = infer_format(&args.input.input, args.input.format);
    let to = args.to.unwrap_or(match from {
        FormatArg::Native => FormatArg::Uai,
        FormatArg::Uai => FormatArg::Native,
    });
    let text = match to {
        FormatArg::Uai => {
            let g = src.graph::<Prob>()?;
            let (spider, _) = g.to_spider_form();
            write_uai(&spider)?
        }
        FormatArg::Native => match &src {
            Source::Native(doc) => {
                // validate under the document's own semiring before echoing
                by_semiring!(src.semiring(None)?, validate_with(&src))?;
                doc.to_json_string() + "\n"
            }
            Source::Uai(u) => {
                NativeDocument::from_graph::<Prob>(&u.graph, Some(Prob::NAME.into())).to_json_string() + "\n"
            }
        },
    };
    emit(&args.output.output, stdout, &text)?;
    Ok(EXIT_OK)
}

fn validate_with<S: Semiring>(src: &Source) -> Result<(), CliError> {
    src.graph::<S>().map(|_| ())
}
