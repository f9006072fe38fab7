//! Dense f64 tensors with reverse-mode automatic differentiation.
//!
//! Every tensor is a cheap handle (`Rc`) onto shared storage. Operations
//! record the producing node so that [`Tensor::backward`] can replay the
//! graph in reverse and accumulate gradients into every reachable tensor
//! with `requires_grad`. Gradients accumulate across backward calls until
//! explicitly zeroed, which is what lets a detached memory cell feed a
//! live scalar parameter later in training.
//!
//! Broadcasting is deliberately limited to scalar-with-tensor and
//! equal-shape; anything else (bias rows, head splits) is an explicit op.

mod ops;

pub use ops::{concat_cols, concat_rows};

use std::cell::RefCell;
use std::collections::HashSet;
use std::fmt;
use std::rc::Rc;

use thiserror::Error;

/// Errors from tensor construction, shape checks, and backward passes.
#[derive(Debug, Error)]
pub enum TensorError {
    #[error("invalid shape {shape:?}: dimensions must be positive and match {len} data values")]
    InvalidShape { shape: Vec<usize>, len: usize },
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: axis {axis} out of range for shape {shape:?}")]
    InvalidAxis {
        op: &'static str,
        axis: usize,
        shape: Vec<usize>,
    },
    #[error("{op} expects a matrix, got shape {shape:?}")]
    NotAMatrix { op: &'static str, shape: Vec<usize> },
    #[error("{op}: range {start}..{} out of bounds for {dim} {which}", start + len)]
    RangeOutOfBounds {
        op: &'static str,
        start: usize,
        len: usize,
        dim: usize,
        which: &'static str,
    },
    #[error("label {label} out of range [0, {num_classes}) at sample {index}")]
    LabelOutOfRange {
        label: usize,
        num_classes: usize,
        index: usize,
    },
    #[error("layer_norm over a single feature with eps = 0 would divide by zero")]
    DegenerateNorm,
    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: String },
    #[error("token id {id} out of range for table with {rows} rows")]
    IdOutOfRange { id: usize, rows: usize },
    #[error("{op} requires at least one input")]
    EmptyInput { op: &'static str },
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// Backward rule: given the output gradient, accumulate into each input.
pub(crate) type BackwardFn = Box<dyn Fn(&[f64], &[Tensor])>;

pub(crate) struct OpNode {
    pub(crate) inputs: Vec<Tensor>,
    pub(crate) backward: BackwardFn,
}

pub(crate) struct TensorInner {
    shape: Vec<usize>,
    data: Vec<f64>,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
    op: Option<OpNode>,
}

/// Shared handle to a dense f64 array participating in an autodiff graph.
#[derive(Clone)]
pub struct Tensor {
    inner: Rc<RefCell<TensorInner>>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inner = self.inner.borrow();
        f.debug_struct("Tensor")
            .field("shape", &inner.shape)
            .field("data", &inner.data)
            .field("requires_grad", &inner.requires_grad)
            .finish()
    }
}

fn check_shape(shape: &[usize], len: usize) -> Result<()> {
    let numel: usize = shape.iter().product();
    if shape.iter().any(|&d| d == 0) || numel != len || shape.is_empty() {
        return Err(TensorError::InvalidShape {
            shape: shape.to_vec(),
            len,
        });
    }
    Ok(())
}

impl Tensor {
    fn from_parts(shape: Vec<usize>, data: Vec<f64>, requires_grad: bool, op: Option<OpNode>) -> Tensor {
        Tensor {
            inner: Rc::new(RefCell::new(TensorInner {
                shape,
                data,
                grad: None,
                requires_grad,
                op,
            })),
        }
    }

    /// A constant (non-trainable) tensor.
    pub fn constant(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        check_shape(shape, data.len())?;
        Ok(Tensor::from_parts(shape.to_vec(), data, false, None))
    }

    /// A trainable leaf tensor.
    pub fn param(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        check_shape(shape, data.len())?;
        Ok(Tensor::from_parts(shape.to_vec(), data, true, None))
    }

    pub fn scalar(value: f64) -> Tensor {
        Tensor::from_parts(vec![1], vec![value], false, None)
    }

    pub fn zeros(shape: &[usize]) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        Tensor::constant(shape, vec![0.0; numel])
    }

    pub(crate) fn from_op(shape: Vec<usize>, data: Vec<f64>, inputs: Vec<Tensor>, backward: BackwardFn) -> Tensor {
        Tensor::from_parts(shape, data, false, Some(OpNode { inputs, backward }))
    }

    pub fn shape(&self) -> Vec<usize> {
        self.inner.borrow().shape.clone()
    }

    pub fn numel(&self) -> usize {
        self.inner.borrow().data.len()
    }

    /// Copy of the current values.
    pub fn data(&self) -> Vec<f64> {
        self.inner.borrow().data.clone()
    }

    /// Copy of the accumulated gradient, if any backward pass reached this tensor.
    pub fn grad(&self) -> Option<Vec<f64>> {
        self.inner.borrow().grad.clone()
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.borrow().requires_grad
    }

    /// The single value of a 1-element tensor.
    pub fn item(&self) -> f64 {
        let inner = self.inner.borrow();
        debug_assert_eq!(inner.data.len(), 1, "item() on non-scalar tensor");
        inner.data[0]
    }

    /// Overwrite values in place (shapes must agree). Used by the optimizer
    /// and by finite-difference probes.
    pub fn set_data(&self, values: &[f64]) {
        let mut inner = self.inner.borrow_mut();
        assert_eq!(inner.data.len(), values.len(), "set_data length mismatch");
        inner.data.copy_from_slice(values);
    }

    /// Reset the accumulated gradient to zeros (allocating if absent).
    pub fn zero_grad(&self) {
        let mut inner = self.inner.borrow_mut();
        let n = inner.data.len();
        match inner.grad.as_mut() {
            Some(g) => g.iter_mut().for_each(|v| *v = 0.0),
            None => inner.grad = Some(vec![0.0; n]),
        }
    }

    /// Drop the gradient buffer entirely.
    pub fn clear_grad(&self) {
        self.inner.borrow_mut().grad = None;
    }

    /// A fresh constant tensor sharing no graph history with `self`.
    pub fn detach(&self) -> Tensor {
        let inner = self.inner.borrow();
        Tensor::from_parts(inner.shape.clone(), inner.data.clone(), false, None)
    }

    pub fn is_finite(&self) -> bool {
        self.inner.borrow().data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn accumulate_grad(&self, delta: &[f64]) {
        let mut inner = self.inner.borrow_mut();
        let n = inner.data.len();
        debug_assert_eq!(n, delta.len());
        let grad = inner.grad.get_or_insert_with(|| vec![0.0; n]);
        for (g, d) in grad.iter_mut().zip(delta) {
            *g += d;
        }
    }

    fn key(&self) -> usize {
        Rc::as_ptr(&self.inner) as usize
    }

    /// Reverse-mode backpropagation from a scalar loss.
    ///
    /// Accumulates `d loss / d t` into every tensor `t` reachable through the
    /// graph. Existing gradients are added to, not overwritten.
    pub fn backward(&self) -> Result<()> {
        {
            let inner = self.inner.borrow();
            if inner.data.len() != 1 {
                return Err(TensorError::NonScalarLoss {
                    shape: inner.shape.clone(),
                });
            }
        }

        let order = self.topo_order();
        self.accumulate_grad(&[1.0]);

        for node in order.iter().rev() {
            let (grad_out, has_op) = {
                let inner = node.inner.borrow();
                match (&inner.grad, &inner.op) {
                    (Some(g), Some(_)) => (g.clone(), true),
                    _ => (Vec::new(), false),
                }
            };
            if !has_op || grad_out.is_empty() {
                continue;
            }
            // Borrowing the op immutably while the rule mutates *input*
            // cells is fine: a node is never its own input.
            let inner = node.inner.borrow();
            let op = inner.op.as_ref().unwrap();
            (op.backward)(&grad_out, &op.inputs);
        }
        Ok(())
    }

    /// Postorder over the graph (inputs before consumers), iterative to keep
    /// deep per-batch graphs off the call stack.
    fn topo_order(&self) -> Vec<Tensor> {
        let mut order = Vec::new();
        let mut visited: HashSet<usize> = HashSet::new();
        let mut stack: Vec<(Tensor, bool)> = vec![(self.clone(), false)];

        while let Some((node, expanded)) = stack.pop() {
            if expanded {
                order.push(node);
                continue;
            }
            if !visited.insert(node.key()) {
                continue;
            }
            stack.push((node.clone(), true));
            let inner = node.inner.borrow();
            if let Some(op) = &inner.op {
                for input in &op.inputs {
                    if !visited.contains(&input.key()) {
                        stack.push((input.clone(), false));
                    }
                }
            }
        }
        order
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_rejects_zero_dims_and_length_mismatch() {
        assert!(Tensor::constant(&[2, 0], vec![]).is_err());
        assert!(Tensor::constant(&[2, 2], vec![1.0, 2.0]).is_err());
        assert!(Tensor::constant(&[], vec![]).is_err());
        assert!(Tensor::constant(&[3], vec![1.0, 2.0, 3.0]).is_ok());
    }

    #[test]
    fn grad_of_sum_is_ones() {
        let p = Tensor::param(&[2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let loss = p.sum_all();
        loss.backward().unwrap();
        assert_eq!(p.grad().unwrap(), vec![1.0; 6]);
    }

    #[test]
    fn grad_of_half_square_sum_is_identity() {
        let p = Tensor::param(&[2], vec![1.0, -2.0]).unwrap();
        let loss = p.mul(&p).unwrap().sum_all().scale(0.5);
        loss.backward().unwrap();
        assert_eq!(p.grad().unwrap(), vec![1.0, -2.0]);
    }

    #[test]
    fn gradients_accumulate_until_zeroed() {
        let p = Tensor::param(&[2], vec![3.0, 4.0]).unwrap();
        p.sum_all().backward().unwrap();
        p.sum_all().backward().unwrap();
        assert_eq!(p.grad().unwrap(), vec![2.0, 2.0]);
        p.zero_grad();
        assert_eq!(p.grad().unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let p = Tensor::param(&[2], vec![1.0, 2.0]).unwrap();
        let err = p.backward().unwrap_err();
        assert!(matches!(err, TensorError::NonScalarLoss { .. }));
    }

    #[test]
    fn forward_is_bitwise_deterministic() {
        let a = Tensor::param(&[2, 2], vec![0.3, -1.7, 2.9, 0.01]).unwrap();
        let b = Tensor::param(&[2, 2], vec![1.1, 0.2, -0.4, 5.0]).unwrap();
        let run = || {
            a.matmul(&b)
                .unwrap()
                .gelu()
                .softmax(1)
                .unwrap()
                .sum_all()
                .item()
        };
        let x = run();
        let y = run();
        assert_eq!(x.to_bits(), y.to_bits());
    }

    #[test]
    fn shared_subexpression_accumulates_through_both_paths() {
        // loss = sum(x + x) => grad 2
        let x = Tensor::param(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        let loss = x.add(&x).unwrap().sum_all();
        loss.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![2.0, 2.0, 2.0]);
    }
}
