//! Dense row-major tensors.
//!
//! A tensor is a dimension tuple paired with a flat element vector; element
//! `(i₀,…,iₙ₋₁)` lives at `flatten(i, dims)` with axis 0 varying slowest.
//! Order-0 tensors are scalars with exactly one element, and any dimension
//! may be zero.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimension tuple of a tensor.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Self {
        Shape(dims.into())
    }

    pub fn scalar() -> Self {
        Shape(Vec::new())
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn order(&self) -> usize {
        self.0.len()
    }

    /// Number of elements; the empty product is 1.
    pub fn capacity(&self) -> usize {
        self.0.iter().product()
    }

    /// Row-major strides.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.0.len()];
        for k in (0..self.0.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.0[k + 1];
        }
        strides
    }

    /// The shape left after fixing the first `m` axes.
    pub fn suffix(&self, m: usize) -> Shape {
        Shape(self.0[m.min(self.0.len())..].to_vec())
    }

    /// `idx ◁ dims` restricted to the first `idx.len()` axes.
    pub fn admits_prefix(&self, idx: &[usize]) -> bool {
        idx.len() <= self.0.len() && idx.iter().zip(&self.0).all(|(i, d)| i < d)
    }

    /// `idx ◁ dims`: equal length and elementwise strictly less.
    pub fn admits(&self, idx: &[usize]) -> bool {
        idx.len() == self.0.len() && self.admits_prefix(idx)
    }
}

impl From<Vec<usize>> for Shape {
    fn from(dims: Vec<usize>) -> Self {
        Shape(dims)
    }
}

impl From<&[usize]> for Shape {
    fn from(dims: &[usize]) -> Self {
        Shape(dims.to_vec())
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Linear position of a full dimensional index.
pub fn flatten(idx: &[usize], shape: &Shape) -> Result<usize> {
    if !shape.admits(idx) {
        return Err(Error::bounds(idx, shape.dims()));
    }
    Ok(flatten_prefix(idx, shape))
}

// Offset of the first element selected by a (valid) prefix.
fn flatten_prefix(idx: &[usize], shape: &Shape) -> usize {
    idx.iter()
        .zip(shape.strides())
        .map(|(i, stride)| i * stride)
        .sum()
}

/// Dimensional index of linear position `m`.
pub fn unflatten(m: usize, shape: &Shape) -> Result<Vec<usize>> {
    if m >= shape.capacity() {
        return Err(Error::bounds(&[m], &[shape.capacity()]));
    }
    let mut rest = m;
    let mut out = Vec::with_capacity(shape.order());
    for stride in shape.strides() {
        out.push(rest / stride);
        rest %= stride;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTensor<S>")]
#[serde(bound(deserialize = "S: Deserialize<'de>"))]
pub struct Tensor<S> {
    dims: Shape,
    elems: Vec<S>,
}

#[derive(Deserialize)]
struct RawTensor<S> {
    dims: Vec<usize>,
    elems: Vec<S>,
}

impl<S> TryFrom<RawTensor<S>> for Tensor<S> {
    type Error = Error;

    fn try_from(raw: RawTensor<S>) -> Result<Self> {
        Tensor::new(raw.dims, raw.elems)
    }
}

pub type RealTensor = Tensor<f64>;
pub type BoolTensor = Tensor<bool>;

impl<S> Tensor<S> {
    pub fn new(dims: impl Into<Shape>, elems: Vec<S>) -> Result<Self> {
        let dims = dims.into();
        if elems.len() != dims.capacity() {
            return Err(Error::Shape(format!(
                "{} elements supplied for dims {} (capacity {})",
                elems.len(),
                dims,
                dims.capacity()
            )));
        }
        Ok(Tensor { dims, elems })
    }

    pub fn scalar(value: S) -> Self {
        Tensor {
            dims: Shape::scalar(),
            elems: vec![value],
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.dims
    }

    pub fn dims(&self) -> &[usize] {
        self.dims.dims()
    }

    pub fn order(&self) -> usize {
        self.dims.order()
    }

    pub fn elems(&self) -> &[S] {
        &self.elems
    }

    pub fn into_elems(self) -> Vec<S> {
        self.elems
    }

    pub fn lookup(&self, idx: &[usize]) -> Result<&S> {
        let k = flatten(idx, &self.dims)?;
        Ok(&self.elems[k])
    }

    pub fn unop<T>(&self, f: impl Fn(&S) -> T) -> Tensor<T> {
        Tensor {
            dims: self.dims.clone(),
            elems: self.elems.iter().map(f).collect(),
        }
    }

    /// `self ∘_f other`.
    pub fn binop<U, T>(&self, other: &Tensor<U>, f: impl Fn(&S, &U) -> T) -> Result<Tensor<T>> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!(
                "binop on mismatched dims {} and {}",
                self.dims, other.dims
            )));
        }
        Ok(Tensor {
            dims: self.dims.clone(),
            elems: self
                .elems
                .iter()
                .zip(&other.elems)
                .map(|(a, b)| f(a, b))
                .collect(),
        })
    }
}

impl<S: Clone> Tensor<S> {
    pub fn replicate(dims: impl Into<Shape>, value: S) -> Self {
        let dims = dims.into();
        let elems = vec![value; dims.capacity()];
        Tensor { dims, elems }
    }

    /// Subtensor obtained by fixing the leading axes to `prefix`, taken as
    /// one contiguous section of the element vector.
    pub fn subt(&self, prefix: &[usize]) -> Result<Tensor<S>> {
        if !self.dims.admits_prefix(prefix) {
            return Err(Error::bounds(prefix, self.dims()));
        }
        let dims = self.dims.suffix(prefix.len());
        let start = flatten_prefix(prefix, &self.dims);
        let len = dims.capacity();
        Ok(Tensor {
            dims,
            elems: self.elems[start..start + len].to_vec(),
        })
    }

    /// Subtensor by peeling one leading axis at a time.
    pub fn subt_recursive(&self, prefix: &[usize]) -> Result<Tensor<S>> {
        let Some((&head, rest)) = prefix.split_first() else {
            return Ok(self.clone());
        };
        if self.order() == 0 || head >= self.dims()[0] {
            return Err(Error::bounds(prefix, self.dims()));
        }
        let inner = self.dims.suffix(1);
        let block = inner.capacity();
        let peeled = Tensor {
            elems: self.elems[head * block..(head + 1) * block].to_vec(),
            dims: inner,
        };
        peeled.subt_recursive(rest)
    }
}

impl Tensor<f64> {
    pub fn zeros(dims: impl Into<Shape>) -> Self {
        Tensor::replicate(dims, 0.0)
    }

    /// Indicator tensor of `prefix` over this tensor's shape.
    pub fn backsubt(&self, prefix: &[usize]) -> Result<Tensor<f64>> {
        backsubt(prefix, &self.dims)
    }

    pub fn sub(&self, other: &Tensor<f64>) -> Result<Tensor<f64>> {
        self.binop(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Tensor<f64>) -> Result<Tensor<f64>> {
        self.binop(other, |a, b| a + b)
    }

    pub fn neg(&self) -> Tensor<f64> {
        self.unop(|a| -a)
    }
}

/// Derivative tensor of [`Tensor::subt`]: 1 where the full index starts
/// with `prefix`, 0 elsewhere.
pub fn backsubt(prefix: &[usize], shape: &Shape) -> Result<Tensor<f64>> {
    if !shape.admits_prefix(prefix) {
        return Err(Error::bounds(prefix, shape.dims()));
    }
    let mut out = Tensor::zeros(shape.clone());
    let start = flatten_prefix(prefix, shape);
    let len = shape.suffix(prefix.len()).capacity();
    out.elems[start..start + len].fill(1.0);
    Ok(out)
}
