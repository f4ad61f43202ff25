//! Dense semiring tensors, reshaping, spiders and the two message kernels.

use thiserror::Error;

use crate::algebra::Semiring;
use crate::scheme::ObjectType;

/// Largest number of entries any dense tensor may hold.
pub const TENSOR_ENTRY_CAP: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TensorError {
    #[error("{perm:?} is not a permutation of {rank} axes")]
    BadPermutation { perm: Vec<usize>, rank: usize },
    #[error("axis split {rows:?} / {cols:?} is not a partition of {rank} axes")]
    BadSplit {
        rows: Vec<usize>,
        cols: Vec<usize>,
        rank: usize,
    },
    #[error("messages live on different objects ({expected} vs {found})")]
    ObjectMismatch { expected: String, found: String },
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("data has {found} entries, shape needs {expected}")]
    DataLength { expected: usize, found: usize },
    #[error("tensor with {entries} entries exceeds the cap of {cap}")]
    TooLarge { entries: u128, cap: usize },
    #[error("cannot reshape {from:?} into {to:?}")]
    BadReshape { from: Vec<usize>, to: Vec<usize> },
    #[error("axis {axis} out of range for rank {rank}")]
    BadAxis { axis: usize, rank: usize },
}

/// Number of entries a shape describes, checked against the cap.
pub fn checked_size(shape: &[usize]) -> Result<usize, TensorError> {
    let entries = shape.iter().fold(1u128, |acc, &d| acc.saturating_mul(d as u128));
    if entries > TENSOR_ENTRY_CAP as u128 {
        Err(TensorError::TooLarge {
            entries,
            cap: TENSOR_ENTRY_CAP,
        })
    } else {
        Ok(entries as usize)
    }
}

/// Row-major strides (last axis fastest).
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut out = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        out[k] = out[k + 1] * shape[k + 1];
    }
    out
}

/// Advance a mixed-radix counter; returns `false` after the last index.
pub(crate) fn advance(index: &mut [usize], shape: &[usize]) -> bool {
    for k in (0..index.len()).rev() {
        index[k] += 1;
        if index[k] < shape[k] {
            return true;
        }
        index[k] = 0;
    }
    false
}

/// A dense row-major tensor. Rank 0 holds exactly one entry.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor<T> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T> DenseTensor<T> {
    pub fn new(shape: Vec<usize>, data: Vec<T>) -> Result<Self, TensorError> {
        let expected = checked_size(&shape)?;
        if data.len() != expected {
            return Err(TensorError::DataLength {
                expected,
                found: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn scalar(value: T) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn from_fn(
        shape: Vec<usize>,
        mut f: impl FnMut(&[usize]) -> T,
    ) -> Result<Self, TensorError> {
        let len = checked_size(&shape)?;
        let mut data = Vec::with_capacity(len);
        if len > 0 {
            let mut index = vec![0; shape.len()];
            loop {
                data.push(f(&index));
                if !advance(&mut index, &shape) {
                    break;
                }
            }
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn flat_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        index
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn get(&self, index: &[usize]) -> &T {
        &self.data[self.flat_index(index)]
    }

    /// Reinterpret the data under a new shape with the same entry count.
    pub fn reshape(self, shape: Vec<usize>) -> Result<Self, TensorError> {
        let from = self.shape.clone();
        match checked_size(&shape) {
            Ok(n) if n == self.data.len() => Ok(Self {
                shape,
                data: self.data,
            }),
            _ => Err(TensorError::BadReshape { from, to: shape }),
        }
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> DenseTensor<U> {
        DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn try_map<U, E>(&self, f: impl FnMut(&T) -> Result<U, E>) -> Result<DenseTensor<U>, E> {
        Ok(DenseTensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(f).collect::<Result<_, _>>()?,
        })
    }
}

impl<T: Clone> DenseTensor<T> {
    pub fn filled(shape: Vec<usize>, value: T) -> Result<Self, TensorError> {
        let len = checked_size(&shape)?;
        Ok(Self {
            shape,
            data: vec![value; len],
        })
    }
}

/// An I-valued point on an object: one semiring value per basis state.
#[derive(Debug, Clone, PartialEq)]
pub struct Message<T> {
    pub object: ObjectType,
    pub values: Vec<T>,
}

impl<T> Message<T> {
    pub fn new(object: ObjectType, values: Vec<T>) -> Result<Self, TensorError> {
        if values.len() != object.dim {
            return Err(TensorError::ShapeMismatch {
                expected: vec![object.dim],
                found: vec![values.len()],
            });
        }
        Ok(Self { object, values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

impl<T: Clone> Message<T> {
    /// The Frobenius unit on `object`: all ones.
    pub fn unit<S: Semiring<Value = T>>(object: ObjectType) -> Self {
        let values = vec![S::one(); object.dim];
        Self { object, values }
    }
}

fn check_permutation(perm: &[usize], rank: usize) -> Result<(), TensorError> {
    let mut seen = vec![false; rank];
    let ok = perm.len() == rank
        && perm.iter().all(|&p| {
            if p < rank && !seen[p] {
                seen[p] = true;
                true
            } else {
                false
            }
        });
    if ok {
        Ok(())
    } else {
        Err(TensorError::BadPermutation {
            perm: perm.to_vec(),
            rank,
        })
    }
}

/// Reorder axes: output axis `k` is source axis `perm[k]`.
pub fn permute_axes<T: Clone>(t: &DenseTensor<T>, perm: &[usize]) -> Result<DenseTensor<T>, TensorError> {
    check_permutation(perm, t.rank())?;
    let shape: Vec<usize> = perm.iter().map(|&p| t.shape[p]).collect();
    let src_strides = strides(&t.shape);
    let walk: Vec<usize> = perm.iter().map(|&p| src_strides[p]).collect();
    let mut data = Vec::with_capacity(t.len());
    if !t.is_empty() {
        let mut index = vec![0; shape.len()];
        loop {
            let src: usize = index.iter().zip(&walk).map(|(i, s)| i * s).sum();
            data.push(t.data[src].clone());
            if !advance(&mut index, &shape) {
                break;
            }
        }
    }
    Ok(DenseTensor { shape, data })
}

/// View a tensor as a matrix whose rows are indexed by the axes in `rows`
/// and columns by the axes in `cols`, each in the given order.
pub fn matricize<T: Clone>(
    t: &DenseTensor<T>,
    rows: &[usize],
    cols: &[usize],
) -> Result<DenseTensor<T>, TensorError> {
    let perm: Vec<usize> = rows.iter().chain(cols).copied().collect();
    if check_permutation(&perm, t.rank()).is_err() {
        return Err(TensorError::BadSplit {
            rows: rows.to_vec(),
            cols: cols.to_vec(),
            rank: t.rank(),
        });
    }
    let r: usize = rows.iter().map(|&a| t.shape[a]).product();
    let c: usize = cols.iter().map(|&a| t.shape[a]).product();
    permute_axes(t, &perm)?.reshape(vec![r, c])
}

/// The spider on a `d`-dimensional object with `k` legs: one where all
/// indices agree, zero elsewhere. `k = 1` is the Frobenius unit.
pub fn spider_tensor<S: Semiring>(d: usize, k: usize) -> Result<DenseTensor<S::Value>, TensorError> {
    DenseTensor::from_fn(vec![d; k], |idx| {
        if idx.iter().all(|&i| i == idx[0]) {
            S::one()
        } else {
            S::zero()
        }
    })
}

/// Pointwise product of messages on one object (a spider applied to its
/// incoming wires).
pub fn hadamard<S: Semiring>(msgs: &[Message<S::Value>]) -> Result<Message<S::Value>, TensorError> {
    let first = msgs.first().ok_or(TensorError::ShapeMismatch {
        expected: vec![1],
        found: vec![0],
    })?;
    for m in &msgs[1..] {
        if m.object != first.object {
            return Err(TensorError::ObjectMismatch {
                expected: first.object.name.to_string(),
                found: m.object.name.to_string(),
            });
        }
    }
    let refs: Vec<&[S::Value]> = msgs.iter().map(|m| m.values.as_slice()).collect();
    Ok(Message {
        object: first.object.clone(),
        values: hadamard_values::<S>(&refs, first.dim()),
    })
}

/// Hadamard product over raw vectors; an empty list yields the unit.
pub fn hadamard_values<S: Semiring>(msgs: &[&[S::Value]], dim: usize) -> Vec<S::Value> {
    (0..dim)
        .map(|j| {
            msgs.iter()
                .fold(S::one(), |acc, m| S::mul(&acc, &m[j]))
        })
        .collect()
}

fn check_messages<T>(
    shape: &[usize],
    skip: Option<usize>,
    msgs: &[&[T]],
) -> Result<(), TensorError> {
    let expected: Vec<usize> = shape
        .iter()
        .enumerate()
        .filter(|(a, _)| Some(*a) != skip)
        .map(|(_, &d)| d)
        .collect();
    let found: Vec<usize> = msgs.iter().map(|m| m.len()).collect();
    if expected != found {
        return Err(TensorError::ShapeMismatch { expected, found });
    }
    Ok(())
}

/// Apply a factor, reshaped to map all other axes onto `target`, to one
/// incoming message per non-target axis (given in axis order).
///
/// `out[j] = ⊕ f[.., j, ..] ⊗ ∏ msgs[a][i_a]`, with terms for each `j`
/// summed in ascending row-major order of the non-target indices.
pub fn contract_to_axis<S: Semiring>(
    f: &DenseTensor<S::Value>,
    target: usize,
    msgs: &[&[S::Value]],
) -> Result<Vec<S::Value>, TensorError> {
    let rank = f.rank();
    if target >= rank {
        return Err(TensorError::BadAxis { axis: target, rank });
    }
    check_messages(&f.shape, Some(target), msgs)?;
    // message slot for each axis
    let slot: Vec<Option<usize>> = (0..rank)
        .map(|a| match a.cmp(&target) {
            std::cmp::Ordering::Less => Some(a),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(a - 1),
        })
        .collect();
    let mut out = vec![S::zero(); f.shape[target]];
    let mut index = vec![0; rank];
    for entry in &f.data {
        let mut term = entry.clone();
        for (a, s) in slot.iter().enumerate() {
            if let Some(s) = s {
                term = S::mul(&term, &msgs[*s][index[a]]);
            }
        }
        let j = index[target];
        out[j] = S::add(&out[j], &term);
        advance(&mut index, &f.shape);
    }
    Ok(out)
}

/// Entrywise product of a tensor with the outer product of one message
/// per axis.
pub fn scale_by_outer<S: Semiring>(
    f: &DenseTensor<S::Value>,
    msgs: &[&[S::Value]],
) -> Result<DenseTensor<S::Value>, TensorError> {
    check_messages(&f.shape, None, msgs)?;
    let mut data = Vec::with_capacity(f.len());
    let mut index = vec![0; f.rank()];
    for entry in &f.data {
        let term = msgs
            .iter()
            .enumerate()
            .fold(entry.clone(), |acc, (a, m)| S::mul(&acc, &m[index[a]]));
        data.push(term);
        advance(&mut index, &f.shape);
    }
    Ok(DenseTensor {
        shape: f.shape.clone(),
        data,
    })
}
