//! Reverse-mode automatic differentiation on a Wengert tape.
//!
//! A [`Tape`] records every operation of a forward pass in topological
//! order; [`Var::backward`] replays the recorded rules in reverse and
//! accumulates gradients into every reachable tensor that requires them.
//! Tapes are single-threaded and live for one forward/backward pass;
//! parameters persist outside the tape as plain [`Tensor`]s and are
//! re-registered each step.

mod kernels;
mod ops;

pub use kernels::ConvDims;
pub use ops::concat;

use std::cell::RefCell;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub type NodeId = usize;

/// Recorded operation: inputs plus whatever the backward rule needs.
#[derive(Debug)]
pub(crate) enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    AddScalar(NodeId),
    MulScalar(NodeId, f64),
    Matmul(NodeId, NodeId),
    Exp(NodeId),
    Log(NodeId),
    Sqrt(NodeId),
    Powf(NodeId, f64),
    Logistic(NodeId),
    Sum(NodeId),
    Mean(NodeId),
    Max(NodeId, usize),
    SelectRows(NodeId, Vec<usize>),
    PairwiseSqDist(NodeId, NodeId),
    BroadcastTo(NodeId),
    Reshape(NodeId),
    Concat(Vec<NodeId>),
    Conv2d { x: NodeId, w: NodeId, b: NodeId, dims: ConvDims },
    MaxPool2x2 { x: NodeId, argmax: Vec<usize> },
    Prelu { x: NodeId, slope: NodeId },
    SoftmaxXent { logits: NodeId, labels: Vec<usize>, softmax: Vec<f64> },
}

pub(crate) struct Node {
    pub value: Rc<Tensor>,
    pub grad: Option<Tensor>,
    pub requires_grad: bool,
    pub op: Op,
}

pub(crate) struct TapeInner {
    pub nodes: Vec<Node>,
    pub consumed: bool,
}

/// Shared recording tape. Cloning is cheap (reference count only).
#[derive(Clone)]
pub struct Tape {
    inner: Rc<RefCell<TapeInner>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            inner: Rc::new(RefCell::new(TapeInner { nodes: Vec::new(), consumed: false })),
        }
    }

    /// Register a tensor that does not need gradients.
    pub fn constant(&self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    /// Register a tensor that accumulates gradients during backward.
    pub fn variable(&self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    fn leaf(&self, value: Tensor, requires_grad: bool) -> Var {
        let id = self.push(Node {
            value: Rc::new(value),
            grad: None,
            requires_grad,
            op: Op::Leaf,
        });
        Var { tape: self.clone(), id }
    }

    pub(crate) fn push(&self, node: Node) -> NodeId {
        let mut inner = self.inner.borrow_mut();
        inner.nodes.push(node);
        inner.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub(crate) fn same_tape(&self, other: &Tape) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }

    pub(crate) fn value(&self, id: NodeId) -> Rc<Tensor> {
        Rc::clone(&self.inner.borrow().nodes[id].value)
    }

    pub(crate) fn requires_grad(&self, id: NodeId) -> bool {
        self.inner.borrow().nodes[id].requires_grad
    }

    /// Run reverse-mode accumulation from a scalar root.
    fn backward_from(&self, root: NodeId) -> Result<()> {
        {
            let inner = self.inner.borrow();
            if inner.consumed {
                return Err(Error::BackwardConsumed);
            }
            let node = &inner.nodes[root];
            if node.value.numel() != 1 {
                return Err(Error::NonScalarRoot(node.value.shape().to_vec()));
            }
            if !node.requires_grad {
                return Err(Error::Domain {
                    op: "backward",
                    msg: "root does not require gradients".into(),
                });
            }
        }
        let mut inner = self.inner.borrow_mut();
        inner.consumed = true;
        inner.nodes[root].grad = Some(Tensor::full(vec![1], 1.0));

        for i in (0..=root).rev() {
            if !inner.nodes[i].requires_grad {
                continue;
            }
            // Take the upstream gradient out while accumulating into inputs
            // (inputs always have smaller ids), then put it back.
            let Some(g) = inner.nodes[i].grad.take() else { continue };
            ops::accumulate_input_grads(&mut inner, i, &g);
            inner.nodes[i].grad = Some(g);
        }
        Ok(())
    }
}

/// Handle to a tensor recorded on a tape.
#[derive(Clone)]
pub struct Var {
    pub(crate) tape: Tape,
    pub(crate) id: NodeId,
}

impl std::fmt::Debug for Var {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .field("requires_grad", &self.requires_grad())
            .finish()
    }
}

impl Var {
    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.value(self.id).shape().to_vec()
    }

    pub fn numel(&self) -> usize {
        self.tape.value(self.id).numel()
    }

    /// Copy of the forward value.
    pub fn value(&self) -> Tensor {
        (*self.tape.value(self.id)).clone()
    }

    /// Scalar forward value.
    pub fn item(&self) -> f64 {
        self.tape.value(self.id).item()
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.requires_grad(self.id)
    }

    /// Accumulated gradient, if backward reached this tensor.
    pub fn grad(&self) -> Option<Tensor> {
        self.tape.inner.borrow().nodes[self.id].grad.clone()
    }

    /// Reverse-mode pass from this scalar. A tape supports exactly one
    /// backward; rebuild the forward pass to differentiate again.
    pub fn backward(&self) -> Result<()> {
        self.tape.backward_from(self.id)
    }
}
