//! Commutative semirings that select which inference problem the message
//! passing engine solves.
//!
//! Every instance is a zero-sized marker type implementing [`Semiring`]; the
//! element type lives in the associated `Value`. The same factor graph driven
//! through [`Prob`] computes marginals, through [`MaxTimes`] computes
//! max-marginals for MAP decoding, through [`Boolean`] propagates supports of a
//! constraint problem, through [`NatCount`] counts weighted solutions and
//! through [`DualNum`] carries a first-order derivative alongside the value.

use std::cmp::Ordering;
use std::fmt::{self, Debug};

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value as Json;
use thiserror::Error;

/// Raised when a vector cannot be rescaled because its aggregate is zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("message has zero aggregate and cannot be normalized")]
pub struct ZeroMessage;

/// A commutative semiring together with the optional structure the engine
/// can exploit (rescaling, ordering, convex blending).
pub trait Semiring: Copy + Debug + Default + Send + Sync + 'static {
    type Value: Clone + Debug + PartialEq + Send + Sync;

    /// Selection name used on the command line and in documents.
    const NAME: &'static str;
    /// Exact semirings compare messages by literal equality.
    const EXACT: bool;
    /// An all-zero message means the constraint problem has no solution.
    const ZERO_IS_CONTRADICTION: bool = false;

    fn zero() -> Self::Value;
    fn one() -> Self::Value;
    fn add(a: &Self::Value, b: &Self::Value) -> Self::Value;
    fn mul(a: &Self::Value, b: &Self::Value) -> Self::Value;

    fn is_zero(a: &Self::Value) -> bool {
        *a == Self::zero()
    }

    /// Largest absolute componentwise difference. Exact semirings return
    /// `0.0` for equal values and `f64::INFINITY` otherwise.
    fn distance(a: &Self::Value, b: &Self::Value) -> f64;

    fn approx_eq(a: &Self::Value, b: &Self::Value, tol: f64) -> bool {
        if Self::EXACT {
            a == b
        } else {
            Self::distance(a, b) <= tol
        }
    }

    /// `None` when the instance has no rescaling.
    fn normalize(_values: &[Self::Value]) -> Option<Result<Vec<Self::Value>, ZeroMessage>> {
        None
    }

    /// `None` when the instance has no total order.
    fn compare(_a: &Self::Value, _b: &Self::Value) -> Option<Ordering> {
        None
    }

    /// `(1 - lambda) * new + lambda * old`; `None` without convex structure.
    fn blend(_new: &Self::Value, _old: &Self::Value, _lambda: f64) -> Option<Self::Value> {
        None
    }

    fn render(a: &Self::Value) -> String;
    fn to_json(a: &Self::Value) -> Json;
    fn from_json(v: &Json) -> Result<Self::Value, String>;
    /// Lift a plain real table entry (UAI tables, shared fixtures).
    fn from_f64(x: f64) -> Result<Self::Value, String>;
    /// Instance-specific random element for the axiom checks.
    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self::Value;

    fn has_normalize() -> bool {
        Self::normalize(&[Self::one()]).is_some()
    }

    fn has_order() -> bool {
        Self::compare(&Self::one(), &Self::one()).is_some()
    }

    fn sum<'a, I: IntoIterator<Item = &'a Self::Value>>(items: I) -> Self::Value {
        items
            .into_iter()
            .fold(Self::zero(), |acc, x| Self::add(&acc, x))
    }

    fn product<'a, I: IntoIterator<Item = &'a Self::Value>>(items: I) -> Self::Value {
        items
            .into_iter()
            .fold(Self::one(), |acc, x| Self::mul(&acc, x))
    }
}

fn json_f64(v: &Json) -> Result<f64, String> {
    v.as_f64()
        .ok_or_else(|| format!("expected a number, found {v}"))
}

fn nonneg(x: f64) -> Result<f64, String> {
    if x.is_finite() && x >= 0.0 {
        Ok(x)
    } else {
        Err(format!("expected a finite nonnegative number, found {x}"))
    }
}

fn float_json(x: f64) -> Json {
    serde_json::Number::from_f64(x)
        .map(Json::Number)
        .unwrap_or(Json::Null)
}

fn sample_real<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    match rng.gen_range(0..10) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.gen_range(0.0..10.0),
    }
}

/// Sum-product over nonnegative reals.
#[derive(Debug, Clone, Copy, Default)]
pub struct Prob;

impl Semiring for Prob {
    type Value = f64;
    const NAME: &'static str = "prob";
    const EXACT: bool = false;

    fn zero() -> f64 {
        0.0
    }
    fn one() -> f64 {
        1.0
    }
    fn add(a: &f64, b: &f64) -> f64 {
        a + b
    }
    fn mul(a: &f64, b: &f64) -> f64 {
        a * b
    }
    fn distance(a: &f64, b: &f64) -> f64 {
        (a - b).abs()
    }
    fn normalize(values: &[f64]) -> Option<Result<Vec<f64>, ZeroMessage>> {
        let total: f64 = values.iter().sum();
        Some(if total == 0.0 {
            Err(ZeroMessage)
        } else {
            Ok(values.iter().map(|x| x / total).collect())
        })
    }
    fn compare(a: &f64, b: &f64) -> Option<Ordering> {
        Some(a.total_cmp(b))
    }
    fn blend(new: &f64, old: &f64, lambda: f64) -> Option<f64> {
        Some((1.0 - lambda) * new + lambda * old)
    }
    fn render(a: &f64) -> String {
        format!("{a}")
    }
    fn to_json(a: &f64) -> Json {
        float_json(*a)
    }
    fn from_json(v: &Json) -> Result<f64, String> {
        json_f64(v).and_then(nonneg)
    }
    fn from_f64(x: f64) -> Result<f64, String> {
        nonneg(x)
    }
    fn sample<R: Rng + ?Sized>(rng: &mut R) -> f64 {
        sample_real(rng)
    }
}

/// Max-product over nonnegative reals (the tropical semiring in
/// multiplicative form), used for MAP decoding.
#[derive(Debug, Clone, Copy, Default)]
pub struct MaxTimes;

impl Semiring for MaxTimes {
    type Value = f64;
    const NAME: &'static str = "maxtimes";
    const EXACT: bool = false;

    fn zero() -> f64 {
        0.0
    }
    fn one() -> f64 {
        1.0
    }
    fn add(a: &f64, b: &f64) -> f64 {
        a.max(*b)
    }
    fn mul(a: &f64, b: &f64) -> f64 {
        a * b
    }
    fn distance(a: &f64, b: &f64) -> f64 {
        (a - b).abs()
    }
    fn normalize(values: &[f64]) -> Option<Result<Vec<f64>, ZeroMessage>> {
        let top = values.iter().copied().fold(0.0, f64::max);
        Some(if top == 0.0 {
            Err(ZeroMessage)
        } else {
            Ok(values.iter().map(|x| x / top).collect())
        })
    }
    fn compare(a: &f64, b: &f64) -> Option<Ordering> {
        Some(a.total_cmp(b))
    }
    fn render(a: &f64) -> String {
        format!("{a}")
    }
    fn to_json(a: &f64) -> Json {
        float_json(*a)
    }
    fn from_json(v: &Json) -> Result<f64, String> {
        json_f64(v).and_then(nonneg)
    }
    fn from_f64(x: f64) -> Result<f64, String> {
        nonneg(x)
    }
    fn sample<R: Rng + ?Sized>(rng: &mut R) -> f64 {
        sample_real(rng)
    }
}

/// OR/AND over `{false, true}`: support propagation for constraint problems.
#[derive(Debug, Clone, Copy, Default)]
pub struct Boolean;

impl Semiring for Boolean {
    type Value = bool;
    const NAME: &'static str = "bool";
    const EXACT: bool = true;
    const ZERO_IS_CONTRADICTION: bool = true;

    fn zero() -> bool {
        false
    }
    fn one() -> bool {
        true
    }
    fn add(a: &bool, b: &bool) -> bool {
        *a || *b
    }
    fn mul(a: &bool, b: &bool) -> bool {
        *a && *b
    }
    fn distance(a: &bool, b: &bool) -> f64 {
        if a == b {
            0.0
        } else {
            f64::INFINITY
        }
    }
    fn compare(a: &bool, b: &bool) -> Option<Ordering> {
        Some(a.cmp(b))
    }
    fn render(a: &bool) -> String {
        a.to_string()
    }
    fn to_json(a: &bool) -> Json {
        Json::Bool(*a)
    }
    fn from_json(v: &Json) -> Result<bool, String> {
        match v {
            Json::Bool(b) => Ok(*b),
            Json::Number(_) => Self::from_f64(json_f64(v)?),
            other => Err(format!("expected a boolean, found {other}")),
        }
    }
    fn from_f64(x: f64) -> Result<bool, String> {
        nonneg(x).map(|x| x != 0.0)
    }
    fn sample<R: Rng + ?Sized>(rng: &mut R) -> bool {
        rng.gen()
    }
}

/// Counting over arbitrary-precision naturals.
#[derive(Debug, Clone, Copy, Default)]
pub struct NatCount;

impl Semiring for NatCount {
    type Value = BigUint;
    const NAME: &'static str = "count";
    const EXACT: bool = true;

    fn zero() -> BigUint {
        BigUint::zero()
    }
    fn one() -> BigUint {
        BigUint::from(1u32)
    }
    fn add(a: &BigUint, b: &BigUint) -> BigUint {
        a + b
    }
    fn mul(a: &BigUint, b: &BigUint) -> BigUint {
        a * b
    }
    fn is_zero(a: &BigUint) -> bool {
        a.is_zero()
    }
    fn distance(a: &BigUint, b: &BigUint) -> f64 {
        if a == b {
            0.0
        } else {
            f64::INFINITY
        }
    }
    fn render(a: &BigUint) -> String {
        a.to_str_radix(10)
    }
    fn to_json(a: &BigUint) -> Json {
        Json::String(a.to_str_radix(10))
    }
    fn from_json(v: &Json) -> Result<BigUint, String> {
        match v {
            Json::String(s) => s
                .parse::<BigUint>()
                .map_err(|_| format!("expected a decimal natural number, found {s:?}")),
            Json::Number(n) => match n.as_u64() {
                Some(k) => Ok(BigUint::from(k)),
                None => Self::from_f64(json_f64(v)?),
            },
            other => Err(format!("expected a natural number, found {other}")),
        }
    }
    fn from_f64(x: f64) -> Result<BigUint, String> {
        let x = nonneg(x)?;
        if x.fract() != 0.0 || x > u64::MAX as f64 {
            return Err(format!("expected a natural number, found {x}"));
        }
        Ok(BigUint::from(x as u64))
    }
    fn sample<R: Rng + ?Sized>(rng: &mut R) -> BigUint {
        // occasionally large enough to exercise multi-limb arithmetic
        if rng.gen_range(0..4) == 0 {
            BigUint::from(rng.gen::<u64>()) * BigUint::from(rng.gen::<u64>())
        } else {
            BigUint::from(rng.gen_range(0u32..20))
        }
    }
}

impl NatCount {
    /// Lossy conversion used when comparing counts against real-valued runs.
    pub fn to_f64(a: &BigUint) -> f64 {
        a.to_f64().unwrap_or(f64::INFINITY)
    }
}

/// A dual number `re + eps * ε` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dual {
    pub re: f64,
    pub eps: f64,
}

impl Dual {
    pub const fn new(re: f64, eps: f64) -> Self {
        Self { re, eps }
    }

    pub const fn constant(re: f64) -> Self {
        Self { re, eps: 0.0 }
    }

    pub const fn variable(re: f64) -> Self {
        Self { re, eps: 1.0 }
    }
}

impl fmt::Display for Dual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}ε", self.re, self.eps)
    }
}

/// Dual numbers over the reals; the ε-part of a contraction is its
/// derivative with respect to whichever entry was seeded with `eps = 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DualNum;

impl Semiring for DualNum {
    type Value = Dual;
    const NAME: &'static str = "dual";
    const EXACT: bool = false;

    fn zero() -> Dual {
        Dual::new(0.0, 0.0)
    }
    fn one() -> Dual {
        Dual::new(1.0, 0.0)
    }
    fn add(a: &Dual, b: &Dual) -> Dual {
        Dual::new(a.re + b.re, a.eps + b.eps)
    }
    fn mul(a: &Dual, b: &Dual) -> Dual {
        Dual::new(a.re * b.re, a.re * b.eps + a.eps * b.re)
    }
    fn distance(a: &Dual, b: &Dual) -> f64 {
        (a.re - b.re).abs().max((a.eps - b.eps).abs())
    }
    fn normalize(values: &[Dual]) -> Option<Result<Vec<Dual>, ZeroMessage>> {
        let total: f64 = values.iter().map(|d| d.re).sum();
        Some(if total == 0.0 {
            Err(ZeroMessage)
        } else {
            Ok(values
                .iter()
                .map(|d| Dual::new(d.re / total, d.eps / total))
                .collect())
        })
    }
    fn render(a: &Dual) -> String {
        format!("({}, {})", a.re, a.eps)
    }
    fn to_json(a: &Dual) -> Json {
        Json::Array(vec![float_json(a.re), float_json(a.eps)])
    }
    fn from_json(v: &Json) -> Result<Dual, String> {
        match v {
            Json::Array(pair) if pair.len() == 2 => {
                let re = json_f64(&pair[0])?;
                let eps = json_f64(&pair[1])?;
                if re.is_finite() && eps.is_finite() {
                    Ok(Dual::new(re, eps))
                } else {
                    Err("dual components must be finite".into())
                }
            }
            Json::Number(_) => Self::from_f64(json_f64(v)?),
            other => Err(format!("expected a [re, eps] pair, found {other}")),
        }
    }
    fn from_f64(x: f64) -> Result<Dual, String> {
        if x.is_finite() {
            Ok(Dual::constant(x))
        } else {
            Err(format!("expected a finite number, found {x}"))
        }
    }
    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Dual {
        Dual::new(sample_real(rng), rng.gen_range(-10.0..10.0))
    }
}

/// Rescale a message by the instance's aggregate.
///
/// Returns the input unchanged together with `Err(ZeroMessage)` when the
/// aggregate is zero, and `None` when the instance has no rescaling.
pub fn normalize_message<S: Semiring>(
    values: &[S::Value],
) -> Option<(Vec<S::Value>, Result<(), ZeroMessage>)> {
    S::normalize(values).map(|res| match res {
        Ok(v) => (v, Ok(())),
        Err(e) => (values.to_vec(), Err(e)),
    })
}

/// One failed law together with the rendered witnesses.
#[derive(Debug, Clone, PartialEq)]
pub struct AxiomFailure {
    pub law: &'static str,
    pub witness: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomReport {
    pub semiring: &'static str,
    pub checks: usize,
    pub failures: Vec<AxiomFailure>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Tolerance used by the axiom checks for floating instances.
pub const AXIOM_TOL: f64 = 1e-9;

fn check_triple<S: Semiring>(
    a: &S::Value,
    b: &S::Value,
    c: &S::Value,
    checks: &mut usize,
    failures: &mut Vec<AxiomFailure>,
) {
    let eq = |x: &S::Value, y: &S::Value| S::approx_eq(x, y, AXIOM_TOL);
    let zero = S::zero();
    let one = S::one();
    let laws: [(&'static str, bool); 10] = [
        (
            "add associative",
            eq(&S::add(&S::add(a, b), c), &S::add(a, &S::add(b, c))),
        ),
        (
            "mul associative",
            eq(&S::mul(&S::mul(a, b), c), &S::mul(a, &S::mul(b, c))),
        ),
        ("add commutative", eq(&S::add(a, b), &S::add(b, a))),
        ("mul commutative", eq(&S::mul(a, b), &S::mul(b, a))),
        ("add identity", eq(&S::add(a, &zero), a)),
        ("mul identity", eq(&S::mul(a, &one), a)),
        (
            "left distributive",
            eq(
                &S::mul(a, &S::add(b, c)),
                &S::add(&S::mul(a, b), &S::mul(a, c)),
            ),
        ),
        (
            "right distributive",
            eq(
                &S::mul(&S::add(a, b), c),
                &S::add(&S::mul(a, c), &S::mul(b, c)),
            ),
        ),
        ("annihilation", eq(&S::mul(a, &zero), &zero)),
        ("zero is zero", S::is_zero(&zero)),
    ];
    for (law, ok) in laws {
        *checks += 1;
        if !ok {
            failures.push(AxiomFailure {
                law,
                witness: vec![S::render(a), S::render(b), S::render(c)],
            });
        }
    }
}

/// Check the commutative semiring laws on `samples` random triples.
pub fn check_semiring_axioms<S: Semiring>(samples: usize, seed: u64) -> AxiomReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = 0;
    let mut failures = Vec::new();
    for _ in 0..samples.max(1) {
        let a = S::sample(&mut rng);
        let b = S::sample(&mut rng);
        let c = S::sample(&mut rng);
        check_triple::<S>(&a, &b, &c, &mut checks, &mut failures);
    }
    AxiomReport {
        semiring: S::NAME,
        checks,
        failures,
    }
}

/// Check the laws on every triple drawn from an explicit finite carrier.
pub fn check_semiring_axioms_exhaustive<S: Semiring>(carrier: &[S::Value]) -> AxiomReport {
    let mut checks = 0;
    let mut failures = Vec::new();
    for a in carrier {
        for b in carrier {
            for c in carrier {
                check_triple::<S>(a, b, c, &mut checks, &mut failures);
            }
        }
    }
    AxiomReport {
        semiring: S::NAME,
        checks,
        failures,
    }
}
