//! Dynamic reverse-mode tape.
//!
//! A [`Graph`] is rebuilt for every forward pass. Nodes are appended in
//! evaluation order, so the node vector is already a topological order and
//! the backward sweep simply walks it in reverse.

use std::cell::{Ref, RefCell};
use std::sync::atomic::{AtomicU64, Ordering};

use super::tensor::{gemm, Tensor};
use crate::error::{Error, Result};

static NEXT_PARAM_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(u64);

/// A named trainable tensor with its gradient accumulator.
#[derive(Clone, Debug)]
pub struct Parameter {
    id: ParamId,
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Parameter {
            id: ParamId(NEXT_PARAM_ID.fetch_add(1, Ordering::Relaxed)),
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn id(&self) -> ParamId {
        self.id
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().iter_mut().for_each(|g| *g = 0.0);
    }
}

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Exp,
    Log,
    Sigmoid,
    Tanh,
    Softplus,
    Neg,
    Square,
    Sqrt,
    Relu,
    /// `log σ(x)`, evaluated as `-softplus(-x)`.
    LogSigmoid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Mean,
    LogSumExp,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Binary(BinaryOp, Var, Var),
    Unary(UnaryOp, Var),
    Scale(Var, f64),
    Offset(Var),
    ClampMin(Var, f64),
    ClampMax(Var, f64),
    Reduce(ReduceOp, Var, Option<usize>),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize, usize),
    GatherRows(Var, Vec<usize>),
    LogSoftmaxPick(Var, Vec<usize>),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    param: Option<ParamId>,
}

#[derive(Default)]
pub struct Graph {
    nodes: RefCell<Vec<Node>>,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

fn broadcast_dims(op: &'static str, a: (usize, usize), b: (usize, usize)) -> Result<(usize, usize)> {
    let dim = |x: usize, y: usize| -> Option<usize> {
        if x == y {
            Some(x)
        } else if x == 1 {
            Some(y)
        } else if y == 1 {
            Some(x)
        } else {
            None
        }
    };
    match (dim(a.0, b.0), dim(a.1, b.1)) {
        (Some(r), Some(c)) => Ok((r, c)),
        _ => Err(Error::shape(
            op,
            format!("cannot broadcast [{}x{}] with [{}x{}]", a.0, a.1, b.0, b.1),
        )),
    }
}

/// Sums a broadcast gradient back to the operand extent `(r, c)`.
fn unbroadcast(grad: &[f64], out: (usize, usize), to: (usize, usize)) -> Vec<f64> {
    if out == to {
        return grad.to_vec();
    }
    let mut acc = vec![0.0; to.0 * to.1];
    for i in 0..out.0 {
        let ti = if to.0 == 1 { 0 } else { i };
        for j in 0..out.1 {
            let tj = if to.1 == 1 { 0 } else { j };
            acc[ti * to.1 + tj] += grad[i * out.1 + j];
        }
    }
    acc
}

fn reduce_extent(op: &'static str, dims: (usize, usize), axis: Option<usize>) -> Result<(usize, usize)> {
    match axis {
        None if dims.0 * dims.1 == 0 => Err(Error::InvalidInput(format!("{op} over an empty tensor"))),
        None => Ok((1, 1)),
        Some(0) if dims.0 == 0 => Err(Error::InvalidInput(format!("{op} over an empty axis 0"))),
        Some(0) => Ok((1, dims.1)),
        Some(1) if dims.1 == 0 => Err(Error::InvalidInput(format!("{op} over an empty axis 1"))),
        Some(1) => Ok((dims.0, 1)),
        Some(a) => Err(Error::InvalidInput(format!("{op}: axis {a} out of range for a matrix"))),
    }
}

/// Index of the output cell that element `(i, j)` reduces into.
fn reduce_target(axis: Option<usize>, i: usize, j: usize, cols: usize) -> usize {
    match axis {
        None => 0,
        Some(0) => j,
        _ => {
            let _ = cols;
            i
        }
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
            param: None,
        });
        Var(nodes.len() - 1)
    }

    fn needs_grad(&self, vars: &[Var]) -> bool {
        let nodes = self.nodes.borrow();
        vars.iter().any(|v| nodes[v.0].requires_grad)
    }

    /// A differentiable input that is not a [`Parameter`].
    pub fn variable(&self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// A non-differentiable input.
    pub fn constant(&self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Binds a parameter's current value as a differentiable leaf.
    pub fn param(&self, p: &Parameter) -> Var {
        let v = self.push(p.value.clone(), Op::Leaf, true);
        self.nodes.borrow_mut()[v.0].param = Some(p.id());
        v
    }

    pub fn value(&self, v: Var) -> Ref<'_, Tensor> {
        Ref::map(self.nodes.borrow(), |n| &n[v.0].value)
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes.borrow()[v.0].value.dims2()
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        self.nodes.borrow()[v.0].value.data()[0]
    }

    pub fn matmul(&self, a: Var, b: Var) -> Result<Var> {
        let out = {
            let nodes = self.nodes.borrow();
            nodes[a.0].value.matmul(&nodes[b.0].value)?
        };
        let rg = self.needs_grad(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    pub fn binary(&self, op: BinaryOp, a: Var, b: Var) -> Result<Var> {
        let out = {
            let nodes = self.nodes.borrow();
            let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
            let (da, db) = (ta.dims2(), tb.dims2());
            let name = match op {
                BinaryOp::Add => "add",
                BinaryOp::Sub => "sub",
                BinaryOp::Mul => "mul",
                BinaryOp::Div => "div",
            };
            let (r, c) = broadcast_dims(name, da, db)?;
            let f = |x: f64, y: f64| match op {
                BinaryOp::Add => x + y,
                BinaryOp::Sub => x - y,
                BinaryOp::Mul => x * y,
                BinaryOp::Div => x / y,
            };
            if op == BinaryOp::Div && tb.data().iter().any(|&y| y == 0.0) {
                return Err(Error::domain("div", "division by zero"));
            }
            let data = if da == db {
                ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect()
            } else {
                let mut data = Vec::with_capacity(r * c);
                for i in 0..r {
                    let ia = if da.0 == 1 { 0 } else { i };
                    let ib = if db.0 == 1 { 0 } else { i };
                    for j in 0..c {
                        let ja = if da.1 == 1 { 0 } else { j };
                        let jb = if db.1 == 1 { 0 } else { j };
                        data.push(f(ta.data()[ia * da.1 + ja], tb.data()[ib * db.1 + jb]));
                    }
                }
                data
            };
            Tensor::matrix(r, c, data)
        };
        let rg = self.needs_grad(&[a, b]);
        Ok(self.push(out, Op::Binary(op, a, b), rg))
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Add, a, b)
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Sub, a, b)
    }

    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Mul, a, b)
    }

    pub fn div(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Div, a, b)
    }

    pub fn unary(&self, op: UnaryOp, a: Var) -> Result<Var> {
        let out = {
            let nodes = self.nodes.borrow();
            let x = &nodes[a.0].value;
            match op {
                UnaryOp::Log if x.data().iter().any(|&v| v <= 0.0) => {
                    return Err(Error::domain("log", "argument must be positive"));
                }
                UnaryOp::Sqrt if x.data().iter().any(|&v| v < 0.0) => {
                    return Err(Error::domain("sqrt", "argument must be non-negative"));
                }
                _ => {}
            }
            x.map(|v| match op {
                UnaryOp::Exp => v.exp(),
                UnaryOp::Log => v.ln(),
                UnaryOp::Sigmoid => sigmoid(v),
                UnaryOp::Tanh => v.tanh(),
                UnaryOp::Softplus => softplus(v),
                UnaryOp::Neg => -v,
                UnaryOp::Square => v * v,
                UnaryOp::Sqrt => v.sqrt(),
                UnaryOp::Relu => v.max(0.0),
                UnaryOp::LogSigmoid => -softplus(-v),
            })
        };
        let rg = self.needs_grad(&[a]);
        Ok(self.push(out, Op::Unary(op, a), rg))
    }

    pub fn exp(&self, a: Var) -> Var {
        self.unary(UnaryOp::Exp, a).expect("exp is total")
    }

    pub fn log(&self, a: Var) -> Result<Var> {
        self.unary(UnaryOp::Log, a)
    }

    pub fn sigmoid(&self, a: Var) -> Var {
        self.unary(UnaryOp::Sigmoid, a).expect("sigmoid is total")
    }

    pub fn tanh(&self, a: Var) -> Var {
        self.unary(UnaryOp::Tanh, a).expect("tanh is total")
    }

    pub fn softplus(&self, a: Var) -> Var {
        self.unary(UnaryOp::Softplus, a).expect("softplus is total")
    }

    pub fn neg(&self, a: Var) -> Var {
        self.unary(UnaryOp::Neg, a).expect("neg is total")
    }

    pub fn square(&self, a: Var) -> Var {
        self.unary(UnaryOp::Square, a).expect("square is total")
    }

    pub fn sqrt(&self, a: Var) -> Result<Var> {
        self.unary(UnaryOp::Sqrt, a)
    }

    pub fn relu(&self, a: Var) -> Var {
        self.unary(UnaryOp::Relu, a).expect("relu is total")
    }

    pub fn log_sigmoid(&self, a: Var) -> Var {
        self.unary(UnaryOp::LogSigmoid, a).expect("log-sigmoid is total")
    }

    pub fn scale(&self, a: Var, k: f64) -> Var {
        let out = self.nodes.borrow()[a.0].value.map(|v| v * k);
        let rg = self.needs_grad(&[a]);
        self.push(out, Op::Scale(a, k), rg)
    }

    pub fn add_scalar(&self, a: Var, k: f64) -> Var {
        let out = self.nodes.borrow()[a.0].value.map(|v| v + k);
        let rg = self.needs_grad(&[a]);
        self.push(out, Op::Offset(a), rg)
    }

    /// `max(a, floor)` elementwise; the gradient passes only where `a > floor`.
    pub fn clamp_min(&self, a: Var, floor: f64) -> Var {
        let out = self.nodes.borrow()[a.0].value.map(|v| v.max(floor));
        let rg = self.needs_grad(&[a]);
        self.push(out, Op::ClampMin(a, floor), rg)
    }

    /// `min(a, ceil)` elementwise; the gradient passes only where `a < ceil`.
    pub fn clamp_max(&self, a: Var, ceil: f64) -> Var {
        let out = self.nodes.borrow()[a.0].value.map(|v| v.min(ceil));
        let rg = self.needs_grad(&[a]);
        self.push(out, Op::ClampMax(a, ceil), rg)
    }

    /// Reduction over all entries (`axis = None`), rows (`Some(0)`, giving
    /// `1 × cols`) or columns (`Some(1)`, giving `rows × 1`).
    pub fn reduce(&self, op: ReduceOp, a: Var, axis: Option<usize>) -> Result<Var> {
        let out = {
            let nodes = self.nodes.borrow();
            let x = &nodes[a.0].value;
            let (r, c) = x.dims2();
            let name = match op {
                ReduceOp::Sum => "sum",
                ReduceOp::Mean => "mean",
                ReduceOp::LogSumExp => "logsumexp",
            };
            let (orr, oc) = reduce_extent(name, (r, c), axis)?;
            let count = (r * c) / (orr * oc);
            let xs = x.data();
            let mut acc = vec![0.0; orr * oc];
            match op {
                ReduceOp::Sum | ReduceOp::Mean => {
                    for i in 0..r {
                        for j in 0..c {
                            acc[reduce_target(axis, i, j, c)] += xs[i * c + j];
                        }
                    }
                    if op == ReduceOp::Mean {
                        acc.iter_mut().for_each(|v| *v /= count as f64);
                    }
                }
                ReduceOp::LogSumExp => {
                    let mut mx = vec![f64::NEG_INFINITY; orr * oc];
                    for i in 0..r {
                        for j in 0..c {
                            let t = reduce_target(axis, i, j, c);
                            mx[t] = mx[t].max(xs[i * c + j]);
                        }
                    }
                    for i in 0..r {
                        for j in 0..c {
                            let t = reduce_target(axis, i, j, c);
                            acc[t] += (xs[i * c + j] - mx[t]).exp();
                        }
                    }
                    for (a, m) in acc.iter_mut().zip(&mx) {
                        *a = m + a.ln();
                    }
                }
            }
            Tensor::matrix(orr, oc, acc)
        };
        let rg = self.needs_grad(&[a]);
        Ok(self.push(out, Op::Reduce(op, a, axis), rg))
    }

    pub fn sum(&self, a: Var) -> Var {
        self.reduce(ReduceOp::Sum, a, None)
            .expect("sum over a non-empty tensor")
    }

    pub fn mean(&self, a: Var) -> Var {
        self.reduce(ReduceOp::Mean, a, None)
            .expect("mean over a non-empty tensor")
    }

    pub fn sum_axis(&self, a: Var, axis: usize) -> Result<Var> {
        self.reduce(ReduceOp::Sum, a, Some(axis))
    }

    pub fn mean_axis(&self, a: Var, axis: usize) -> Result<Var> {
        self.reduce(ReduceOp::Mean, a, Some(axis))
    }

    pub fn logsumexp(&self, a: Var, axis: Option<usize>) -> Result<Var> {
        self.reduce(ReduceOp::LogSumExp, a, axis)
    }

    pub fn concat_cols(&self, parts: &[Var]) -> Result<Var> {
        let out = {
            let nodes = self.nodes.borrow();
            let rows = nodes[parts[0].0].value.rows();
            let mut total = 0;
            for p in parts {
                let (r, c) = nodes[p.0].value.dims2();
                if r != rows {
                    return Err(Error::shape("concat_cols", format!("row counts {rows} vs {r}")));
                }
                total += c;
            }
            let mut data = Vec::with_capacity(rows * total);
            for i in 0..rows {
                for p in parts {
                    data.extend_from_slice(nodes[p.0].value.row_slice(i));
                }
            }
            Tensor::matrix(rows, total, data)
        };
        let rg = self.needs_grad(parts);
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), rg))
    }

    /// Columns `start..end` of `a`.
    pub fn slice_cols(&self, a: Var, start: usize, end: usize) -> Result<Var> {
        let out = {
            let nodes = self.nodes.borrow();
            let x = &nodes[a.0].value;
            let (r, c) = x.dims2();
            if start > end || end > c {
                return Err(Error::shape("slice_cols", format!("{start}..{end} of {c} columns")));
            }
            let mut data = Vec::with_capacity(r * (end - start));
            for i in 0..r {
                data.extend_from_slice(&x.row_slice(i)[start..end]);
            }
            Tensor::matrix(r, end - start, data)
        };
        let rg = self.needs_grad(&[a]);
        Ok(self.push(out, Op::SliceCols(a, start, end), rg))
    }

    /// Row lookup (embedding): output row `k` is `table[idx[k]]`.
    pub fn gather_rows(&self, table: Var, idx: &[usize]) -> Result<Var> {
        let out = {
            let nodes = self.nodes.borrow();
            let t = &nodes[table.0].value;
            let (r, c) = t.dims2();
            let mut data = Vec::with_capacity(idx.len() * c);
            for &k in idx {
                if k >= r {
                    return Err(Error::InvalidInput(format!("gather index {k} out of {r} rows")));
                }
                data.extend_from_slice(t.row_slice(k));
            }
            Tensor::matrix(idx.len(), c, data)
        };
        let rg = self.needs_grad(&[table]);
        Ok(self.push(out, Op::GatherRows(table, idx.to_vec()), rg))
    }

    /// Row-wise `log softmax(logits)[target]`, shape `rows × 1`.
    pub fn log_softmax_pick(&self, logits: Var, targets: &[usize]) -> Result<Var> {
        let out = {
            let nodes = self.nodes.borrow();
            let x = &nodes[logits.0].value;
            let (r, c) = x.dims2();
            if targets.len() != r {
                return Err(Error::shape(
                    "log_softmax_pick",
                    format!("{} targets for {r} rows", targets.len()),
                ));
            }
            let mut data = Vec::with_capacity(r);
            for (i, &t) in targets.iter().enumerate() {
                if t >= c {
                    return Err(Error::InvalidInput(format!("target {t} out of {c} classes")));
                }
                let row = x.row_slice(i);
                data.push(row[t] - log_sum_exp(row));
            }
            Tensor::matrix(r, 1, data)
        };
        let rg = self.needs_grad(&[logits]);
        Ok(self.push(out, Op::LogSoftmaxPick(logits, targets.to_vec()), rg))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        if nodes[loss.0].value.len() != 1 {
            return Err(Error::InvalidInput(format!(
                "backward needs a scalar loss, got shape {:?}",
                nodes[loss.0].value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        fn acc(slot: &mut Option<Vec<f64>>, g: Vec<f64>) {
            match slot {
                Some(existing) => existing.iter_mut().zip(g).for_each(|(e, v)| *e += v),
                None => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(gout) = grads[i].take() else { continue };
            let node = &nodes[i];
            if !node.requires_grad {
                grads[i] = Some(gout);
                continue;
            }
            let wants = |v: &Var| nodes[v.0].requires_grad;
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
                    let (m, k) = ta.dims2();
                    let n = tb.cols();
                    if wants(a) {
                        let mut ga = vec![0.0; m * k];
                        gemm(m, n, k, 1.0, &gout, false, tb.data(), true, 0.0, &mut ga);
                        acc(&mut grads[a.0], ga);
                    }
                    if wants(b) {
                        let mut gb = vec![0.0; k * n];
                        gemm(k, m, n, 1.0, ta.data(), true, &gout, false, 0.0, &mut gb);
                        acc(&mut grads[b.0], gb);
                    }
                }
                Op::Binary(op, a, b) => {
                    let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
                    let (da, db) = (ta.dims2(), tb.dims2());
                    let out = node.value.dims2();
                    let at = |t: &Tensor, d: (usize, usize), i: usize, j: usize| {
                        let ii = if d.0 == 1 { 0 } else { i };
                        let jj = if d.1 == 1 { 0 } else { j };
                        t.data()[ii * d.1 + jj]
                    };
                    if wants(a) {
                        let ga: Vec<f64> = match op {
                            BinaryOp::Add | BinaryOp::Sub => gout.clone(),
                            BinaryOp::Mul | BinaryOp::Div => {
                                let mut g = Vec::with_capacity(gout.len());
                                for r in 0..out.0 {
                                    for c in 0..out.1 {
                                        let y = at(tb, db, r, c);
                                        let go = gout[r * out.1 + c];
                                        g.push(if *op == BinaryOp::Mul { go * y } else { go / y });
                                    }
                                }
                                g
                            }
                        };
                        acc(&mut grads[a.0], unbroadcast(&ga, out, da));
                    }
                    if wants(b) {
                        let mut gb = Vec::with_capacity(gout.len());
                        for r in 0..out.0 {
                            for c in 0..out.1 {
                                let go = gout[r * out.1 + c];
                                gb.push(match op {
                                    BinaryOp::Add => go,
                                    BinaryOp::Sub => -go,
                                    BinaryOp::Mul => go * at(ta, da, r, c),
                                    BinaryOp::Div => {
                                        let y = at(tb, db, r, c);
                                        -go * at(ta, da, r, c) / (y * y)
                                    }
                                });
                            }
                        }
                        acc(&mut grads[b.0], unbroadcast(&gb, out, db));
                    }
                }
                Op::Unary(op, a) => {
                    if wants(a) {
                        let x = nodes[a.0].value.data();
                        let y = node.value.data();
                        let g: Vec<f64> = (0..x.len())
                            .map(|k| {
                                let d = match op {
                                    UnaryOp::Exp => y[k],
                                    UnaryOp::Log => 1.0 / x[k],
                                    UnaryOp::Sigmoid => y[k] * (1.0 - y[k]),
                                    UnaryOp::Tanh => 1.0 - y[k] * y[k],
                                    UnaryOp::Softplus => sigmoid(x[k]),
                                    UnaryOp::Neg => -1.0,
                                    UnaryOp::Square => 2.0 * x[k],
                                    UnaryOp::Sqrt => 0.5 / y[k],
                                    UnaryOp::Relu => {
                                        if x[k] > 0.0 {
                                            1.0
                                        } else {
                                            0.0
                                        }
                                    }
                                    UnaryOp::LogSigmoid => sigmoid(-x[k]),
                                };
                                gout[k] * d
                            })
                            .collect();
                        acc(&mut grads[a.0], g);
                    }
                }
                Op::Scale(a, k) => {
                    if wants(a) {
                        acc(&mut grads[a.0], gout.iter().map(|g| g * k).collect());
                    }
                }
                Op::Offset(a) => {
                    if wants(a) {
                        acc(&mut grads[a.0], gout.clone());
                    }
                }
                Op::ClampMin(a, f) | Op::ClampMax(a, f) => {
                    if wants(a) {
                        let lower = matches!(node.op, Op::ClampMin(..));
                        let x = nodes[a.0].value.data();
                        let g = x
                            .iter()
                            .zip(&gout)
                            .map(|(&xv, &g)| {
                                let pass = if lower { xv > *f } else { xv < *f };
                                if pass {
                                    g
                                } else {
                                    0.0
                                }
                            })
                            .collect();
                        acc(&mut grads[a.0], g);
                    }
                }
                Op::Reduce(op, a, axis) => {
                    if wants(a) {
                        let x = &nodes[a.0].value;
                        let (r, c) = x.dims2();
                        let (orr, oc) = node.value.dims2();
                        let count = ((r * c) / (orr * oc)) as f64;
                        let y = node.value.data();
                        let mut g = vec![0.0; r * c];
                        for i in 0..r {
                            for j in 0..c {
                                let t = reduce_target(*axis, i, j, c);
                                g[i * c + j] = match op {
                                    ReduceOp::Sum => gout[t],
                                    ReduceOp::Mean => gout[t] / count,
                                    ReduceOp::LogSumExp => gout[t] * (x.data()[i * c + j] - y[t]).exp(),
                                };
                            }
                        }
                        acc(&mut grads[a.0], g);
                    }
                }
                Op::ConcatCols(parts) => {
                    let rows = node.value.rows();
                    let total = node.value.cols();
                    let mut offset = 0;
                    for p in parts {
                        let c = nodes[p.0].value.cols();
                        if wants(p) {
                            let mut g = Vec::with_capacity(rows * c);
                            for i in 0..rows {
                                g.extend_from_slice(&gout[i * total + offset..i * total + offset + c]);
                            }
                            acc(&mut grads[p.0], g);
                        }
                        offset += c;
                    }
                }
                Op::SliceCols(a, start, end) => {
                    if wants(a) {
                        let (r, c) = nodes[a.0].value.dims2();
                        let w = end - start;
                        let mut g = vec![0.0; r * c];
                        for i in 0..r {
                            g[i * c + start..i * c + end].copy_from_slice(&gout[i * w..(i + 1) * w]);
                        }
                        acc(&mut grads[a.0], g);
                    }
                }
                Op::GatherRows(table, idx) => {
                    if wants(table) {
                        let (r, c) = nodes[table.0].value.dims2();
                        let mut g = vec![0.0; r * c];
                        for (k, &row) in idx.iter().enumerate() {
                            for j in 0..c {
                                g[row * c + j] += gout[k * c + j];
                            }
                        }
                        acc(&mut grads[table.0], g);
                    }
                }
                Op::LogSoftmaxPick(logits, targets) => {
                    if wants(logits) {
                        let x = &nodes[logits.0].value;
                        let (r, c) = x.dims2();
                        let mut g = vec![0.0; r * c];
                        for i in 0..r {
                            let row = x.row_slice(i);
                            let lse = log_sum_exp(row);
                            for j in 0..c {
                                g[i * c + j] = -gout[i] * (row[j] - lse).exp();
                            }
                            g[i * c + targets[i]] += gout[i];
                        }
                        acc(&mut grads[logits.0], g);
                    }
                }
            }
            grads[i] = Some(gout);
        }

        let shapes: Vec<Vec<usize>> = nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        let params = nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| n.param.map(|p| (p, i)))
            .collect();
        Ok(Gradients {
            grads,
            shapes,
            params,
        })
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// Result of a backward sweep.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
    params: Vec<(ParamId, usize)>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; zero if `v` did not
    /// contribute to the loss.
    pub fn wrt(&self, v: Var) -> Tensor {
        let shape = self.shapes[v.0].clone();
        match &self.grads[v.0] {
            Some(g) => Tensor::new(shape, g.clone()).expect("gradient extent matches value"),
            None => Tensor::zeros(&shape),
        }
    }

    /// Adds this sweep's gradient for `p` into `p.grad`.
    pub fn accumulate_into(&self, p: &mut Parameter) {
        for &(id, node) in &self.params {
            if id == p.id() {
                if let Some(g) = &self.grads[node] {
                    p.grad.data_mut().iter_mut().zip(g).for_each(|(a, b)| *a += b);
                }
            }
        }
    }
}
