//! Structural property suites shared by the `check` command and the
//! acceptance tests: spider fusion and reshaping route-independence.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::Semiring;
use crate::tensor::{advance, matricize, permute_axes, spider_tensor, DenseTensor};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteReport {
    pub name: &'static str,
    pub checks: usize,
    pub failures: Vec<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Contract the last `k` axes of `a` with the first `k` axes of `b` by
/// enumerating every index combination.
fn contract_legs<S: Semiring>(a: &DenseTensor<S::Value>, b: &DenseTensor<S::Value>, k: usize) -> DenseTensor<S::Value> {
    let ra = a.rank();
    let free_a = &a.shape()[..ra - k];
    let shared = &a.shape()[ra - k..];
    let free_b = &b.shape()[k..];
    let out_shape: Vec<usize> = free_a.iter().chain(free_b).copied().collect();
    DenseTensor::from_fn(out_shape, |out| {
        let (ia, ib) = out.split_at(free_a.len());
        let mut total = S::zero();
        let mut s = vec![0; k];
        let nonempty = shared.iter().all(|&d| d > 0);
        if nonempty {
            loop {
                let full_a: Vec<usize> = ia.iter().chain(&s).copied().collect();
                let full_b: Vec<usize> = s.iter().chain(ib).copied().collect();
                total = S::add(&total, &S::mul(a.get(&full_a), b.get(&full_b)));
                if !advance(&mut s, shared) {
                    break;
                }
            }
        }
        total
    })
    .expect("small shapes")
}

/// Every pair of spiders on a `d`-dimensional object (`d ≤ max_dim`, legs
/// `≤ max_legs`) joined along `k ≥ 1` wires equals the spider with the
/// remaining legs. A closed result (no legs left) equals the loop value `d`.
pub fn spider_fusion_suite<S: Semiring>(max_dim: usize, max_legs: usize) -> SuiteReport {
    let mut checks = 0;
    let mut failures = Vec::new();
    for d in 1..=max_dim {
        for a in 1..=max_legs {
            for b in 1..=max_legs {
                for k in 1..=a.min(b) {
                    let sa = spider_tensor::<S>(d, a).expect("small");
                    let sb = spider_tensor::<S>(d, b).expect("small");
                    let fused = contract_legs::<S>(&sa, &sb, k);
                    let legs = a + b - 2 * k;
                    let expected = if legs == 0 {
                        let dim = (0..d).fold(S::zero(), |acc, _| S::add(&acc, &S::one()));
                        DenseTensor::scalar(dim)
                    } else {
                        spider_tensor::<S>(d, legs).expect("small")
                    };
                    checks += 1;
                    if fused != expected {
                        failures.push(format!("d={d} legs=({a},{b}) joined on {k}"));
                    }
                }
            }
        }
    }
    SuiteReport {
        name: "spider fusion",
        checks,
        failures,
    }
}

/// A random composition of axis moves, ending in a fixed target layout.
#[derive(Debug, Clone)]
enum Step {
    Permute(Vec<usize>),
    /// Matricize with a split point, transpose the matrix, and unfold.
    TransposeBlocks(usize),
    /// Matricize with a split point and unfold again.
    Fold(usize),
}

fn random_perm<R: Rng>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// Follow `steps` from `t`, tracking which source axis sits where, then
/// permute into `target` (output axis k is source axis target[k]).
fn run_route<T: Clone>(t: &DenseTensor<T>, steps: &[Step], target: &[usize]) -> DenseTensor<T> {
    let rank = t.rank();
    let mut cur = t.clone();
    // layout[k] = source axis currently at position k
    let mut layout: Vec<usize> = (0..rank).collect();
    for step in steps {
        match step {
            Step::Permute(p) => {
                cur = permute_axes(&cur, p).expect("valid permutation");
                layout = p.iter().map(|&i| layout[i]).collect();
            }
            Step::Fold(split) => {
                let all: Vec<usize> = (0..rank).collect();
                let shape = cur.shape().to_vec();
                cur = matricize(&cur, &all[..*split], &all[*split..])
                    .expect("valid split")
                    .reshape(shape)
                    .expect("same size");
            }
            Step::TransposeBlocks(split) => {
                let all: Vec<usize> = (0..rank).collect();
                let shape = cur.shape().to_vec();
                let m = matricize(&cur, &all[..*split], &all[*split..]).expect("valid split");
                let mt = permute_axes(&m, &[1, 0]).expect("matrix");
                let new_shape: Vec<usize> = shape[*split..].iter().chain(&shape[..*split]).copied().collect();
                cur = mt.reshape(new_shape).expect("same size");
                layout = layout[*split..].iter().chain(&layout[..*split]).copied().collect();
            }
        }
    }
    // finish: output axis k must hold source axis target[k]
    let finish: Vec<usize> = target
        .iter()
        .map(|s| layout.iter().position(|l| l == s).expect("tracked axis"))
        .collect();
    permute_axes(&cur, &finish).expect("valid permutation")
}

fn random_route<R: Rng>(rng: &mut R, rank: usize) -> Vec<Step> {
    let len = rng.gen_range(0..=5);
    (0..len)
        .map(|_| match rng.gen_range(0..3) {
            0 => Step::Permute(random_perm(rng, rank)),
            1 => Step::Fold(rng.gen_range(0..=rank)),
            _ => Step::TransposeBlocks(rng.gen_range(0..=rank)),
        })
        .collect()
}

/// Random pairs of reshaping routes between the same source and target
/// layouts must produce identical tensors, entry for entry; both must also
/// agree with the direct permutation.
pub fn reshape_route_suite(pairs: usize, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = 0;
    let mut failures = Vec::new();
    for case in 0..pairs {
        let rank = rng.gen_range(0..=4);
        let shape: Vec<usize> = (0..rank).map(|_| rng.gen_range(1..=4)).collect();
        let t = DenseTensor::from_fn(shape, |_| rng.gen::<u32>()).expect("small");
        let target = random_perm(&mut rng, rank);
        let first = random_route(&mut rng, rank);
        let second = random_route(&mut rng, rank);
        let a = run_route(&t, &first, &target);
        let b = run_route(&t, &second, &target);
        let direct = permute_axes(&t, &target).expect("valid permutation");
        checks += 1;
        if a != b || a != direct {
            failures.push(format!("case {case}: routes {first:?} and {second:?} disagree"));
        }
    }
    SuiteReport {
        name: "reshape route independence",
        checks,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{Boolean, NatCount, Prob};

    #[test]
    fn fusion_holds_exactly() {
        let r = spider_fusion_suite::<Prob>(4, 4);
        assert!(r.passed(), "{:?}", r.failures);
        assert_eq!(r.checks, 4 * 30);
        assert!(spider_fusion_suite::<NatCount>(4, 4).passed());
    }

    #[test]
    fn boolean_loops_are_idempotent() {
        // d copies of true sum to true, so the loop value is one
        assert!(spider_fusion_suite::<Boolean>(4, 4).passed());
    }

    #[test]
    fn routes_agree() {
        let r = reshape_route_suite(200, 3);
        assert!(r.passed(), "{:?}", r.failures);
    }

    #[test]
    fn transpose_blocks_tracks_layout() {
        let t = DenseTensor::from_fn(vec![2, 3, 4], |i| i[0] * 100 + i[1] * 10 + i[2]).unwrap();
        let out = run_route(&t, &[Step::TransposeBlocks(1)], &[0, 1, 2]);
        assert_eq!(out, t);
    }
}
