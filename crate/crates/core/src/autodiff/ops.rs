//! Forward builders and backward rules for every tape operation.

use std::rc::Rc;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::kernels::{self, ConvDims};
use super::{Node, NodeId, Op, TapeInner, Var};

impl Var {
    fn push_result(&self, value: Tensor, requires_grad: bool, op: Op) -> Var {
        let id = self.tape.push(Node {
            value: Rc::new(value),
            grad: None,
            requires_grad,
            op,
        });
        Var { tape: self.tape.clone(), id }
    }

    fn check_same_tape(&self, other: &Var) {
        assert!(
            self.tape.same_tape(&other.tape),
            "operands were recorded on different tapes"
        );
    }

    fn check_same_shape(&self, other: &Var, op: &'static str) -> Result<()> {
        let (l, r) = (self.tape.value(self.id), self.tape.value(other.id));
        if l.shape() != r.shape() {
            return Err(Error::ShapeMismatch {
                op,
                lhs: l.shape().to_vec(),
                rhs: r.shape().to_vec(),
            });
        }
        Ok(())
    }

    fn binary(
        &self,
        other: &Var,
        op_name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: impl Fn(NodeId, NodeId) -> Op,
    ) -> Result<Var> {
        self.check_same_tape(other);
        self.check_same_shape(other, op_name)?;
        let (l, r) = (self.tape.value(self.id), self.tape.value(other.id));
        let data = l.data().iter().zip(r.data()).map(|(&a, &b)| f(a, b)).collect();
        let value = Tensor::from_parts(l.shape().to_vec(), data);
        let rg = self.requires_grad() || other.requires_grad();
        Ok(self.push_result(value, rg, op(self.id, other.id)))
    }

    fn unary(&self, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let v = self.tape.value(self.id);
        let data = v.data().iter().map(|&x| f(x)).collect();
        let value = Tensor::from_parts(v.shape().to_vec(), data);
        self.push_result(value, self.requires_grad(), op)
    }

    pub fn add(&self, other: &Var) -> Result<Var> {
        self.binary(other, "add", |a, b| a + b, Op::Add)
    }

    pub fn sub(&self, other: &Var) -> Result<Var> {
        self.binary(other, "sub", |a, b| a - b, Op::Sub)
    }

    pub fn mul(&self, other: &Var) -> Result<Var> {
        self.binary(other, "mul", |a, b| a * b, Op::Mul)
    }

    pub fn div(&self, other: &Var) -> Result<Var> {
        self.binary(other, "div", |a, b| a / b, Op::Div)
    }

    pub fn add_scalar(&self, c: f64) -> Var {
        self.unary(|x| x + c, Op::AddScalar(self.id))
    }

    pub fn mul_scalar(&self, c: f64) -> Var {
        self.unary(|x| x * c, Op::MulScalar(self.id, c))
    }

    pub fn neg(&self) -> Var {
        self.mul_scalar(-1.0)
    }

    pub fn exp(&self) -> Var {
        self.unary(f64::exp, Op::Exp(self.id))
    }

    pub fn log(&self) -> Var {
        self.unary(f64::ln, Op::Log(self.id))
    }

    pub fn sqrt(&self) -> Var {
        self.unary(f64::sqrt, Op::Sqrt(self.id))
    }

    pub fn powf(&self, p: f64) -> Var {
        self.unary(|x| x.powf(p), Op::Powf(self.id, p))
    }

    /// Logistic sigmoid `1 / (1 + e^-x)`, evaluated as
    /// `0.5 * (1 + tanh(x / 2))` so large negative inputs underflow to 0
    /// instead of overflowing an intermediate exponential.
    pub fn logistic(&self) -> Var {
        self.unary(|x| 0.5 * (1.0 + (0.5 * x).tanh()), Op::Logistic(self.id))
    }

    /// Sum of every element, as a `[1]` scalar.
    pub fn sum(&self) -> Var {
        let v = self.tape.value(self.id);
        let value = Tensor::scalar(v.data().iter().sum());
        self.push_result(value, self.requires_grad(), Op::Sum(self.id))
    }

    /// Arithmetic mean of every element, as a `[1]` scalar.
    pub fn mean(&self) -> Result<Var> {
        let v = self.tape.value(self.id);
        if v.numel() == 0 {
            return Err(Error::Domain { op: "mean", msg: "input is empty".into() });
        }
        let value = Tensor::scalar(v.data().iter().sum::<f64>() / v.numel() as f64);
        Ok(self.push_result(value, self.requires_grad(), Op::Mean(self.id)))
    }

    /// Maximum element, as a `[1]` scalar. The gradient flows to the first
    /// occurrence of the maximum.
    pub fn max(&self) -> Result<Var> {
        let v = self.tape.value(self.id);
        if v.numel() == 0 {
            return Err(Error::Domain { op: "max", msg: "input is empty".into() });
        }
        let mut best = 0;
        for (i, &x) in v.data().iter().enumerate() {
            if x > v.data()[best] {
                best = i;
            }
        }
        let value = Tensor::scalar(v.data()[best]);
        Ok(self.push_result(value, self.requires_grad(), Op::Max(self.id, best)))
    }

    /// Gather rows along the first axis. Duplicate indices are allowed and
    /// their gradients accumulate. Indexing itself is not differentiated.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Var> {
        let v = self.tape.value(self.id);
        if v.shape().is_empty() {
            return Err(Error::Domain { op: "select_rows", msg: "input has no rows".into() });
        }
        let rows = v.shape()[0];
        let row_size = if rows == 0 { 0 } else { v.numel() / rows };
        let mut data = Vec::with_capacity(indices.len() * row_size);
        for &idx in indices {
            if idx >= rows {
                return Err(Error::Domain {
                    op: "select_rows",
                    msg: format!("row index {idx} out of range for {rows} rows"),
                });
            }
            data.extend_from_slice(&v.data()[idx * row_size..(idx + 1) * row_size]);
        }
        let mut shape = v.shape().to_vec();
        shape[0] = indices.len();
        let value = Tensor::from_parts(shape, data);
        Ok(self.push_result(value, self.requires_grad(), Op::SelectRows(self.id, indices.to_vec())))
    }

    /// All pairwise squared Euclidean distances between the rows of `self`
    /// (`[p, d]`) and the rows of `other` (`[q, d]`), producing `[p, q]`.
    /// Computed termwise so the diagonal of a self-distance is exactly zero.
    pub fn pairwise_sq_dist(&self, other: &Var) -> Result<Var> {
        self.check_same_tape(other);
        let (a, b) = (self.tape.value(self.id), self.tape.value(other.id));
        if a.shape().len() != 2 || b.shape().len() != 2 || a.shape()[1] != b.shape()[1] {
            return Err(Error::ShapeMismatch {
                op: "pairwise_sq_dist",
                lhs: a.shape().to_vec(),
                rhs: b.shape().to_vec(),
            });
        }
        let (p, q, d) = (a.shape()[0], b.shape()[0], a.shape()[1]);
        let mut out = vec![0.0; p * q];
        kernels::pairwise_sq_dist(a.data(), b.data(), &mut out, p, q, d);
        let value = Tensor::from_parts(vec![p, q], out);
        let rg = self.requires_grad() || other.requires_grad();
        Ok(self.push_result(value, rg, Op::PairwiseSqDist(self.id, other.id)))
    }

    /// Repeat a `[1, rest..]` tensor `n` times along the first axis.
    pub fn broadcast_to(&self, n: usize) -> Result<Var> {
        let v = self.tape.value(self.id);
        if v.shape().first() != Some(&1) {
            return Err(Error::Domain {
                op: "broadcast_to",
                msg: format!("first axis must be 1, got shape {:?}", v.shape()),
            });
        }
        let mut data = Vec::with_capacity(n * v.numel());
        for _ in 0..n {
            data.extend_from_slice(v.data());
        }
        let mut shape = v.shape().to_vec();
        shape[0] = n;
        let value = Tensor::from_parts(shape, data);
        Ok(self.push_result(value, self.requires_grad(), Op::BroadcastTo(self.id)))
    }

    /// Reinterpret the element buffer under a new shape of equal size.
    pub fn reshape(&self, shape: Vec<usize>) -> Result<Var> {
        let v = self.tape.value(self.id);
        let new_numel: usize = shape.iter().product();
        if new_numel != v.numel() {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                lhs: v.shape().to_vec(),
                rhs: shape,
            });
        }
        let value = Tensor::from_parts(shape, v.data().to_vec());
        Ok(self.push_result(value, self.requires_grad(), Op::Reshape(self.id)))
    }

    /// Copy of the value registered as a fresh constant: gradients do not
    /// flow through the result.
    pub fn detach(&self) -> Var {
        let id = self.tape.push(Node {
            value: self.tape.value(self.id),
            grad: None,
            requires_grad: false,
            op: Op::Leaf,
        });
        Var { tape: self.tape.clone(), id }
    }

    /// 2-d cross-correlation with stride 1 and symmetric zero padding.
    /// `self` is `[n, c_in, h, w]`, `weight` is `[c_out, c_in, k, k]`,
    /// `bias` is `[c_out]` and is added per output channel.
    pub fn conv2d(&self, weight: &Var, bias: &Var, pad: usize) -> Result<Var> {
        self.check_same_tape(weight);
        self.check_same_tape(bias);
        let x = self.tape.value(self.id);
        let w = self.tape.value(weight.id);
        let b = self.tape.value(bias.id);
        let (xs, ws) = (x.shape(), w.shape());
        if xs.len() != 4 || ws.len() != 4 || xs[1] != ws[1] || ws[2] != ws[3] {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                lhs: xs.to_vec(),
                rhs: ws.to_vec(),
            });
        }
        if b.shape() != [ws[0]] {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                lhs: b.shape().to_vec(),
                rhs: vec![ws[0]],
            });
        }
        let dims = ConvDims {
            batch: xs[0],
            in_ch: xs[1],
            in_h: xs[2],
            in_w: xs[3],
            out_ch: ws[0],
            kernel: ws[2],
            pad,
        };
        if dims.kernel > dims.in_h + 2 * pad || dims.kernel > dims.in_w + 2 * pad {
            return Err(Error::Domain {
                op: "conv2d",
                msg: format!(
                    "kernel {} exceeds padded input {}x{}",
                    dims.kernel,
                    dims.in_h + 2 * pad,
                    dims.in_w + 2 * pad
                ),
            });
        }
        let mut out = vec![0.0; dims.batch * dims.out_ch * dims.out_h() * dims.out_w()];
        kernels::conv2d(x.data(), w.data(), b.data(), &mut out, dims);
        let value = Tensor::from_parts(
            vec![dims.batch, dims.out_ch, dims.out_h(), dims.out_w()],
            out,
        );
        let rg = self.requires_grad() || weight.requires_grad() || bias.requires_grad();
        Ok(self.push_result(value, rg, Op::Conv2d { x: self.id, w: weight.id, b: bias.id, dims }))
    }

    /// 2x2 max pooling with stride 2 on `[n, c, h, w]`; `h` and `w` must be
    /// even. Ties route the gradient to the earliest element in scan order.
    pub fn maxpool2x2(&self) -> Result<Var> {
        let x = self.tape.value(self.id);
        let xs = x.shape();
        if xs.len() != 4 || xs[2] % 2 != 0 || xs[3] % 2 != 0 {
            return Err(Error::Domain {
                op: "maxpool2x2",
                msg: format!("expected [n, c, even, even], got {xs:?}"),
            });
        }
        let planes = xs[0] * xs[1];
        let (in_h, in_w) = (xs[2], xs[3]);
        let mut out = vec![0.0; planes * (in_h / 2) * (in_w / 2)];
        let mut argmax = vec![0usize; out.len()];
        kernels::maxpool2x2(x.data(), &mut out, &mut argmax, planes, in_h, in_w);
        let value = Tensor::from_parts(vec![xs[0], xs[1], in_h / 2, in_w / 2], out);
        Ok(self.push_result(value, self.requires_grad(), Op::MaxPool2x2 { x: self.id, argmax }))
    }

    /// Parametric ReLU with a single learnable slope shared across all
    /// elements: `x` when positive, `slope * x` otherwise.
    pub fn prelu(&self, slope: &Var) -> Result<Var> {
        self.check_same_tape(slope);
        let s = self.tape.value(slope.id);
        if s.numel() != 1 {
            return Err(Error::ShapeMismatch {
                op: "prelu",
                lhs: s.shape().to_vec(),
                rhs: vec![1],
            });
        }
        let a = s.item();
        let x = self.tape.value(self.id);
        let data = x.data().iter().map(|&v| if v > 0.0 { v } else { a * v }).collect();
        let value = Tensor::from_parts(x.shape().to_vec(), data);
        let rg = self.requires_grad() || slope.requires_grad();
        Ok(self.push_result(value, rg, Op::Prelu { x: self.id, slope: slope.id }))
    }

    /// Fused softmax plus cross-entropy over logits `[m, k]`, averaged over
    /// the batch. Row maxima are subtracted before exponentiation, so large
    /// logits cannot overflow. Backward is `(softmax - onehot) / m`.
    pub fn softmax_xent(&self, labels: &[usize]) -> Result<Var> {
        let z = self.tape.value(self.id);
        let zs = z.shape();
        if zs.len() != 2 {
            return Err(Error::Domain {
                op: "softmax_xent",
                msg: format!("expected [m, k] logits, got {zs:?}"),
            });
        }
        let (m, k) = (zs[0], zs[1]);
        if m == 0 {
            return Err(Error::EmptyBatch);
        }
        if labels.len() != m {
            return Err(Error::ShapeMismatch {
                op: "softmax_xent",
                lhs: vec![m, k],
                rhs: vec![labels.len()],
            });
        }
        let mut softmax = vec![0.0; m * k];
        let mut loss = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            if y >= k {
                return Err(Error::LabelOutOfRange { label: y, classes: k });
            }
            let row = &z.data()[r * k..(r + 1) * k];
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for (c, &v) in row.iter().enumerate() {
                let e = (v - mx).exp();
                softmax[r * k + c] = e;
                denom += e;
            }
            for v in &mut softmax[r * k..(r + 1) * k] {
                *v /= denom;
            }
            loss += denom.ln() + mx - row[y];
        }
        let value = Tensor::scalar(loss / m as f64);
        Ok(self.push_result(
            value,
            self.requires_grad(),
            Op::SoftmaxXent { logits: self.id, labels: labels.to_vec(), softmax },
        ))
    }

    /// Matrix product of `[m, k]` by `[k, n]`.
    pub fn matmul(&self, other: &Var) -> Result<Var> {
        self.check_same_tape(other);
        let (a, b) = (self.tape.value(self.id), self.tape.value(other.id));
        if a.shape().len() != 2 || b.shape().len() != 2 || a.shape()[1] != b.shape()[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: a.shape().to_vec(),
                rhs: b.shape().to_vec(),
            });
        }
        let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
        let mut out = vec![0.0; m * n];
        kernels::matmul(a.data(), b.data(), &mut out, m, k, n);
        let value = Tensor::from_parts(vec![m, n], out);
        let rg = self.requires_grad() || other.requires_grad();
        Ok(self.push_result(value, rg, Op::Matmul(self.id, other.id)))
    }
}

/// Concatenate along the first axis. All inputs must share trailing
/// dimensions and live on the same tape.
pub fn concat(vars: &[Var]) -> Result<Var> {
    let Some(first) = vars.first() else {
        return Err(Error::Domain { op: "concat", msg: "no inputs".into() });
    };
    let head = first.tape.value(first.id);
    let rest_dims = &head.shape()[1..];
    let mut rows = 0;
    let mut data = Vec::new();
    let mut ids = Vec::with_capacity(vars.len());
    let mut rg = false;
    for v in vars {
        first.check_same_tape(v);
        let t = v.tape.value(v.id);
        if t.shape().is_empty() || &t.shape()[1..] != rest_dims {
            return Err(Error::ShapeMismatch {
                op: "concat",
                lhs: head.shape().to_vec(),
                rhs: t.shape().to_vec(),
            });
        }
        rows += t.shape()[0];
        data.extend_from_slice(t.data());
        ids.push(v.id);
        rg |= v.requires_grad();
    }
    let mut shape = vec![rows];
    shape.extend_from_slice(rest_dims);
    let value = Tensor::from_parts(shape, data);
    Ok(first.push_result(value, rg, Op::Concat(ids)))
}

fn wants(inner: &TapeInner, id: NodeId) -> bool {
    inner.nodes[id].requires_grad
}

fn val(inner: &TapeInner, id: NodeId) -> Rc<Tensor> {
    Rc::clone(&inner.nodes[id].value)
}

fn grad_buf(inner: &mut TapeInner, id: NodeId) -> &mut [f64] {
    let node = &mut inner.nodes[id];
    let shape = node.value.shape().to_vec();
    node.grad.get_or_insert_with(|| Tensor::zeros(shape)).data_mut()
}

fn add_into(inner: &mut TapeInner, id: NodeId, contrib: &[f64]) {
    for (d, &c) in grad_buf(inner, id).iter_mut().zip(contrib) {
        *d += c;
    }
}

/// Apply the backward rule of node `i`, accumulating into its inputs.
pub(crate) fn accumulate_input_grads(inner: &mut TapeInner, i: NodeId, g: &Tensor) {
    let op = std::mem::replace(&mut inner.nodes[i].op, Op::Leaf);
    let gd = g.data();
    match &op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            if wants(inner, *a) {
                add_into(inner, *a, gd);
            }
            if wants(inner, *b) {
                add_into(inner, *b, gd);
            }
        }
        Op::Sub(a, b) => {
            if wants(inner, *a) {
                add_into(inner, *a, gd);
            }
            if wants(inner, *b) {
                for (d, &gv) in grad_buf(inner, *b).iter_mut().zip(gd) {
                    *d -= gv;
                }
            }
        }
        Op::Mul(a, b) => {
            let (av, bv) = (val(inner, *a), val(inner, *b));
            if wants(inner, *a) {
                for ((d, &gv), &x) in grad_buf(inner, *a).iter_mut().zip(gd).zip(bv.data()) {
                    *d += gv * x;
                }
            }
            if wants(inner, *b) {
                for ((d, &gv), &x) in grad_buf(inner, *b).iter_mut().zip(gd).zip(av.data()) {
                    *d += gv * x;
                }
            }
        }
        Op::Div(a, b) => {
            let (av, bv) = (val(inner, *a), val(inner, *b));
            if wants(inner, *a) {
                for ((d, &gv), &den) in grad_buf(inner, *a).iter_mut().zip(gd).zip(bv.data()) {
                    *d += gv / den;
                }
            }
            if wants(inner, *b) {
                let dst = grad_buf(inner, *b);
                for t in 0..dst.len() {
                    dst[t] -= gd[t] * av.data()[t] / (bv.data()[t] * bv.data()[t]);
                }
            }
        }
        Op::AddScalar(a) => {
            if wants(inner, *a) {
                add_into(inner, *a, gd);
            }
        }
        Op::MulScalar(a, c) => {
            if wants(inner, *a) {
                for (d, &gv) in grad_buf(inner, *a).iter_mut().zip(gd) {
                    *d += c * gv;
                }
            }
        }
        Op::Matmul(a, b) => {
            let (av, bv) = (val(inner, *a), val(inner, *b));
            let (m, k) = (av.shape()[0], av.shape()[1]);
            let n = bv.shape()[1];
            if wants(inner, *a) {
                kernels::matmul_grad_lhs(gd, bv.data(), grad_buf(inner, *a), m, k, n);
            }
            if wants(inner, *b) {
                kernels::matmul_grad_rhs(av.data(), gd, grad_buf(inner, *b), m, k, n);
            }
        }
        Op::Exp(a) => {
            if wants(inner, *a) {
                let out = val(inner, i);
                for ((d, &gv), &y) in grad_buf(inner, *a).iter_mut().zip(gd).zip(out.data()) {
                    *d += gv * y;
                }
            }
        }
        Op::Log(a) => {
            if wants(inner, *a) {
                let av = val(inner, *a);
                for ((d, &gv), &x) in grad_buf(inner, *a).iter_mut().zip(gd).zip(av.data()) {
                    *d += gv / x;
                }
            }
        }
        Op::Sqrt(a) => {
            if wants(inner, *a) {
                let out = val(inner, i);
                for ((d, &gv), &y) in grad_buf(inner, *a).iter_mut().zip(gd).zip(out.data()) {
                    *d += gv * 0.5 / y;
                }
            }
        }
        Op::Powf(a, p) => {
            if wants(inner, *a) {
                let av = val(inner, *a);
                for ((d, &gv), &x) in grad_buf(inner, *a).iter_mut().zip(gd).zip(av.data()) {
                    *d += gv * p * x.powf(p - 1.0);
                }
            }
        }
        Op::Logistic(a) => {
            if wants(inner, *a) {
                let out = val(inner, i);
                for ((d, &gv), &y) in grad_buf(inner, *a).iter_mut().zip(gd).zip(out.data()) {
                    *d += gv * y * (1.0 - y);
                }
            }
        }
        Op::Sum(a) => {
            if wants(inner, *a) {
                let gv = gd[0];
                for d in grad_buf(inner, *a) {
                    *d += gv;
                }
            }
        }
        Op::Mean(a) => {
            if wants(inner, *a) {
                let n = val(inner, *a).numel() as f64;
                let gv = gd[0] / n;
                for d in grad_buf(inner, *a) {
                    *d += gv;
                }
            }
        }
        Op::Max(a, argmax) => {
            if wants(inner, *a) {
                grad_buf(inner, *a)[*argmax] += gd[0];
            }
        }
        Op::SelectRows(a, indices) => {
            if wants(inner, *a) {
                let rows = val(inner, *a).shape()[0];
                let row_size = val(inner, *a).numel() / rows;
                let dst = grad_buf(inner, *a);
                for (r, &src) in indices.iter().enumerate() {
                    for t in 0..row_size {
                        dst[src * row_size + t] += gd[r * row_size + t];
                    }
                }
            }
        }
        Op::PairwiseSqDist(a, b) => {
            let (av, bv) = (val(inner, *a), val(inner, *b));
            let (p, d) = (av.shape()[0], av.shape()[1]);
            let q = bv.shape()[0];
            let mut ga = vec![0.0; av.numel()];
            let mut gb = vec![0.0; bv.numel()];
            kernels::pairwise_sq_dist_grad(av.data(), bv.data(), gd, &mut ga, &mut gb, p, q, d);
            if wants(inner, *a) {
                add_into(inner, *a, &ga);
            }
            if wants(inner, *b) {
                add_into(inner, *b, &gb);
            }
        }
        Op::BroadcastTo(a) => {
            if wants(inner, *a) {
                let row_size = val(inner, *a).numel();
                let rows = gd.len() / row_size;
                let dst = grad_buf(inner, *a);
                for r in 0..rows {
                    for t in 0..row_size {
                        dst[t] += gd[r * row_size + t];
                    }
                }
            }
        }
        Op::Reshape(a) => {
            if wants(inner, *a) {
                add_into(inner, *a, gd);
            }
        }
        Op::Concat(ids) => {
            let mut offset = 0;
            for &id in ids {
                let n = val(inner, id).numel();
                if wants(inner, id) {
                    add_into(inner, id, &gd[offset..offset + n]);
                }
                offset += n;
            }
        }
        Op::Conv2d { x, w, b, dims } => {
            let (xv, wv) = (val(inner, *x), val(inner, *w));
            let mut gx = vec![0.0; xv.numel()];
            let mut gw = vec![0.0; wv.numel()];
            let mut gb = vec![0.0; dims.out_ch];
            kernels::conv2d_grad(xv.data(), wv.data(), gd, &mut gx, &mut gw, &mut gb, *dims);
            if wants(inner, *x) {
                add_into(inner, *x, &gx);
            }
            if wants(inner, *w) {
                add_into(inner, *w, &gw);
            }
            if wants(inner, *b) {
                add_into(inner, *b, &gb);
            }
        }
        Op::MaxPool2x2 { x, argmax } => {
            if wants(inner, *x) {
                let dst = grad_buf(inner, *x);
                for (o, &src) in argmax.iter().enumerate() {
                    dst[src] += gd[o];
                }
            }
        }
        Op::Prelu { x, slope } => {
            let xv = val(inner, *x);
            let s = val(inner, *slope).item();
            if wants(inner, *x) {
                for ((d, &gv), &v) in grad_buf(inner, *x).iter_mut().zip(gd).zip(xv.data()) {
                    *d += gv * if v > 0.0 { 1.0 } else { s };
                }
            }
            if wants(inner, *slope) {
                let mut acc = 0.0;
                for (&gv, &v) in gd.iter().zip(xv.data()) {
                    if v <= 0.0 {
                        acc += gv * v;
                    }
                }
                grad_buf(inner, *slope)[0] += acc;
            }
        }
        Op::SoftmaxXent { logits, labels, softmax } => {
            if wants(inner, *logits) {
                let m = labels.len();
                let k = softmax.len() / m;
                let scale = gd[0] / m as f64;
                let dst = grad_buf(inner, *logits);
                for (r, &y) in labels.iter().enumerate() {
                    for c in 0..k {
                        let onehot = if c == y { 1.0 } else { 0.0 };
                        dst[r * k + c] += scale * (softmax[r * k + c] - onehot);
                    }
                }
            }
        }
    }
    inner.nodes[i].op = op;
}
