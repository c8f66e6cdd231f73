//! Reverse-mode differentiation over a small fixed op set.
//!
//! A [`Tape`] evaluates eagerly and records every operation in topological
//! order. [`Tape::backward`] sweeps the record once in reverse and returns the
//! gradient of a scalar with respect to every node that depends on a
//! `requires_grad` leaf. Values are 2-D for matrix ops; reductions produce a
//! one-element tensor of shape `[1]`, which binary ops broadcast.

use super::tensor::{check_shape, numel, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unary {
    Tanh,
    Relu,
    Square,
    Cos,
    Sqrt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binary {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduce {
    Sum,
    Mean,
    Max,
    SqNorm,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Binary(Binary, Var, Var),
    Scale(Var, f64),
    Unary(Unary, Var),
    Reduce(Reduce, Var, usize),
    Transpose(Var),
    Reshape(Var),
    ConcatRows(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    SumAxis(Var, usize),
    MaxAxis(Var, Vec<usize>),
    Scatter(Var, Vec<(usize, f64)>),
    /// Scalar node whose partial derivatives were computed by the caller.
    ScalarFn(Vec<Var>, Vec<Vec<f64>>),
}

#[derive(Debug, Clone)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    op: Op,
    requires_grad: bool,
}

/// The computation record. One tape per forward pass; tapes are `Send` and
/// share nothing, so distinct workers can each drive their own.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Result of one backward sweep.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Adds the gradient of `v` into `target.grad`. A leaf the loss does not
    /// reach contributes zeros, so every bound parameter ends up with a grad.
    pub fn accumulate(&self, v: Var, target: &mut Tensor) -> Result<()> {
        match self.get(v) {
            Some(g) => target.accumulate_grad(g),
            None => {
                let zeros = vec![0.0; target.len()];
                target.accumulate_grad(&zeros)
            }
        }
    }
}

fn matmul_into(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for (o, bv) in row.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
}

fn dims2(shape: &[usize], op: &'static str) -> Result<(usize, usize)> {
    match shape {
        [r, c] => Ok((*r, *c)),
        _ => Err(Error::Contract(format!(
            "{op} requires a 2-D operand, got shape {shape:?}"
        ))),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op, requires_grad: bool) -> Var {
        debug_assert_eq!(numel(&shape), value.len());
        self.nodes.push(Node {
            shape,
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.node(v).value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.node(v).shape
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.node(v).requires_grad
    }

    /// Value of a one-element node.
    pub fn scalar(&self, v: Var) -> f64 {
        let n = self.node(v);
        debug_assert_eq!(n.value.len(), 1);
        n.value[0]
    }

    pub fn to_tensor(&self, v: Var) -> Tensor {
        let n = self.node(v);
        Tensor::from_vec(n.shape.clone(), n.value.clone()).expect("node shapes are valid")
    }

    /// Records a copy of `t`. It is differentiable iff `t.requires_grad()`.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        self.push(
            t.shape().to_vec(),
            t.values().to_vec(),
            Op::Leaf,
            t.requires_grad(),
        )
    }

    pub fn constant(&mut self, shape: Vec<usize>, values: Vec<f64>) -> Result<Var> {
        if values.is_empty() {
            return Err(Error::Domain("empty tensor".into()));
        }
        check_shape(&shape)?;
        if numel(&shape) != values.len() {
            return Err(Error::Dimension {
                op: "constant",
                left: shape,
                right: vec![values.len()],
            });
        }
        Ok(self.push(shape, values, Op::Leaf, false))
    }

    pub fn constant_scalar(&mut self, value: f64) -> Var {
        self.push(vec![1], vec![value], Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = dims2(self.shape(a), "matmul")?;
        let (k2, n) = dims2(self.shape(b), "matmul")?;
        if k != k2 {
            return Err(Error::Dimension {
                op: "matmul",
                left: self.shape(a).to_vec(),
                right: self.shape(b).to_vec(),
            });
        }
        let mut out = vec![0.0; m * n];
        matmul_into(self.value(a), self.value(b), m, k, n, &mut out);
        let rg = self.requires_grad(a) || self.requires_grad(b);
        Ok(self.push(vec![m, n], out, Op::MatMul(a, b), rg))
    }

    pub fn binary(&mut self, op: Binary, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let shape = if sa == sb || numel(sb) == 1 {
            sa.to_vec()
        } else if numel(sa) == 1 {
            sb.to_vec()
        } else {
            return Err(Error::Dimension {
                op: "elementwise",
                left: sa.to_vec(),
                right: sb.to_vec(),
            });
        };
        let (va, vb) = (self.value(a), self.value(b));
        let n = numel(&shape);
        let f = |x: f64, y: f64| match op {
            Binary::Add => x + y,
            Binary::Sub => x - y,
            Binary::Mul => x * y,
            Binary::Div => x / y,
        };
        let out: Vec<f64> = (0..n)
            .map(|i| {
                let x = if va.len() == 1 { va[0] } else { va[i] };
                let y = if vb.len() == 1 { vb[0] } else { vb[i] };
                f(x, y)
            })
            .collect();
        let rg = self.requires_grad(a) || self.requires_grad(b);
        Ok(self.push(shape, out, Op::Binary(op, a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Mul, a, b)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Div, a, b)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.value(a).iter().map(|x| x * c).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.requires_grad(a);
        self.push(shape, out, Op::Scale(a, c), rg)
    }

    pub fn unary(&mut self, op: Unary, a: Var) -> Var {
        let f = |x: f64| match op {
            Unary::Tanh => x.tanh(),
            Unary::Relu => x.max(0.0),
            Unary::Square => x * x,
            Unary::Cos => x.cos(),
            Unary::Sqrt => x.sqrt(),
        };
        let out = self.value(a).iter().map(|&x| f(x)).collect();
        let shape = self.shape(a).to_vec();
        let rg = self.requires_grad(a);
        self.push(shape, out, Op::Unary(op, a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(Unary::Tanh, a)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(Unary::Relu, a)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(Unary::Square, a)
    }

    pub fn cos(&mut self, a: Var) -> Var {
        self.unary(Unary::Cos, a)
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        self.unary(Unary::Sqrt, a)
    }

    pub fn reduce(&mut self, op: Reduce, a: Var) -> Result<Var> {
        let v = self.value(a);
        if v.is_empty() {
            return Err(Error::Domain("reduction of an empty tensor".into()));
        }
        let mut arg = 0;
        let out = match op {
            Reduce::Sum => v.iter().sum(),
            Reduce::Mean => v.iter().sum::<f64>() / v.len() as f64,
            Reduce::SqNorm => v.iter().map(|x| x * x).sum(),
            Reduce::Max => {
                for (i, &x) in v.iter().enumerate() {
                    if x > v[arg] {
                        arg = i;
                    }
                }
                v[arg]
            }
        };
        let rg = self.requires_grad(a);
        Ok(self.push(vec![1], vec![out], Op::Reduce(op, a, arg), rg))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.reduce(Reduce::Sum, a)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.reduce(Reduce::Mean, a)
    }

    pub fn max(&mut self, a: Var) -> Result<Var> {
        self.reduce(Reduce::Max, a)
    }

    pub fn sq_norm(&mut self, a: Var) -> Result<Var> {
        self.reduce(Reduce::SqNorm, a)
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (r, c) = dims2(self.shape(a), "transpose")?;
        let v = self.value(a);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = v[i * c + j];
            }
        }
        let rg = self.requires_grad(a);
        Ok(self.push(vec![c, r], out, Op::Transpose(a), rg))
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        check_shape(&shape)?;
        if numel(&shape) != self.value(a).len() {
            return Err(Error::Dimension {
                op: "reshape",
                left: self.shape(a).to_vec(),
                right: shape,
            });
        }
        let out = self.value(a).to_vec();
        let rg = self.requires_grad(a);
        Ok(self.push(shape, out, Op::Reshape(a), rg))
    }

    /// Stacks 2-D operands with equal column counts on top of each other.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Domain("concat of zero tensors".into()))?;
        let (_, cols) = dims2(self.shape(first), "concat_rows")?;
        let mut rows = 0;
        let mut out = Vec::new();
        let mut rg = false;
        for &p in parts {
            let (r, c) = dims2(self.shape(p), "concat_rows")?;
            if c != cols {
                return Err(Error::Dimension {
                    op: "concat_rows",
                    left: self.shape(first).to_vec(),
                    right: self.shape(p).to_vec(),
                });
            }
            rows += r;
            out.extend_from_slice(self.value(p));
            rg |= self.requires_grad(p);
        }
        Ok(self.push(vec![rows, cols], out, Op::ConcatRows(parts.to_vec()), rg))
    }

    /// Picks rows of a 2-D operand by index; indices may repeat.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let (r, c) = dims2(self.shape(a), "gather_rows")?;
        if idx.is_empty() {
            return Err(Error::Domain("gather of zero rows".into()));
        }
        let v = self.value(a);
        let mut out = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            if i >= r {
                return Err(Error::Contract(format!("row {i} out of range for {r} rows")));
            }
            out.extend_from_slice(&v[i * c..(i + 1) * c]);
        }
        let rg = self.requires_grad(a);
        Ok(self.push(vec![idx.len(), c], out, Op::GatherRows(a, idx.to_vec()), rg))
    }

    /// Sums a 2-D operand along `axis` (0: down columns, 1: across rows),
    /// keeping the reduced axis with size 1.
    pub fn sum_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let (r, c) = dims2(self.shape(a), "sum_axis")?;
        let v = self.value(a);
        let (shape, out) = match axis {
            0 => {
                let mut out = vec![0.0; c];
                for i in 0..r {
                    for j in 0..c {
                        out[j] += v[i * c + j];
                    }
                }
                (vec![1, c], out)
            }
            1 => (
                vec![r, 1],
                (0..r).map(|i| v[i * c..(i + 1) * c].iter().sum()).collect(),
            ),
            _ => return Err(Error::Contract(format!("axis {axis} on a 2-D tensor"))),
        };
        let rg = self.requires_grad(a);
        Ok(self.push(shape, out, Op::SumAxis(a, axis), rg))
    }

    /// Maximum along `axis`; ties go to the lowest index.
    pub fn max_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let (r, c) = dims2(self.shape(a), "max_axis")?;
        let v = self.value(a);
        let (shape, arg) = match axis {
            0 => {
                let mut arg: Vec<usize> = (0..c).collect();
                for i in 1..r {
                    for j in 0..c {
                        if v[i * c + j] > v[arg[j]] {
                            arg[j] = i * c + j;
                        }
                    }
                }
                (vec![1, c], arg)
            }
            1 => {
                let arg = (0..r)
                    .map(|i| {
                        let mut best = i * c;
                        for j in 1..c {
                            if v[i * c + j] > v[best] {
                                best = i * c + j;
                            }
                        }
                        best
                    })
                    .collect::<Vec<_>>();
                (vec![r, 1], arg)
            }
            _ => return Err(Error::Contract(format!("axis {axis} on a 2-D tensor"))),
        };
        let out = arg.iter().map(|&k| v[k]).collect();
        let rg = self.requires_grad(a);
        Ok(self.push(shape, out, Op::MaxAxis(a, arg), rg))
    }

    /// Linear placement: `out[t] += w * a[k]` for each `(k, (t, w))`.
    /// `map` has one entry per element of `a`.
    pub fn scatter(&mut self, a: Var, shape: Vec<usize>, map: Vec<(usize, f64)>) -> Result<Var> {
        check_shape(&shape)?;
        let n = numel(&shape);
        let v = self.value(a);
        if map.len() != v.len() {
            return Err(Error::Dimension {
                op: "scatter",
                left: self.shape(a).to_vec(),
                right: vec![map.len()],
            });
        }
        let mut out = vec![0.0; n];
        for (x, &(t, w)) in v.iter().zip(&map) {
            if t >= n {
                return Err(Error::Contract(format!("scatter target {t} out of range {n}")));
            }
            out[t] += w * x;
        }
        let rg = self.requires_grad(a);
        Ok(self.push(shape, out, Op::Scatter(a, map), rg))
    }

    /// Records a scalar function of `inputs` whose value and partial
    /// derivatives (`partials[k][j]` = d value / d inputs[k][j]) were computed
    /// outside the tape.
    pub fn scalar_fn(&mut self, inputs: &[Var], value: f64, partials: Vec<Vec<f64>>) -> Result<Var> {
        if partials.len() != inputs.len() {
            return Err(Error::Contract("one partial vector per input".into()));
        }
        for (&x, p) in inputs.iter().zip(&partials) {
            if self.value(x).len() != p.len() {
                return Err(Error::Dimension {
                    op: "scalar_fn",
                    left: self.shape(x).to_vec(),
                    right: vec![p.len()],
                });
            }
        }
        let rg = inputs.iter().any(|&x| self.requires_grad(x));
        Ok(self.push(vec![1], vec![value], Op::ScalarFn(inputs.to_vec(), partials), rg))
    }

    /// One reverse sweep from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let root = self.node(loss);
        if root.value.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.shape
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if node.requires_grad {
                self.propagate(node, &g, &mut grads);
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let mut send = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            let target = &self.nodes[v.0];
            if !target.requires_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; target.value.len()]);
            f(slot);
        };

        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = (self.shape(*a)[0], self.shape(*a)[1]);
                let n = self.shape(*b)[1];
                let (va, vb) = (self.value(*a), self.value(*b));
                send(*a, &mut |ga| {
                    // ga += g · bᵀ
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let brow = &vb[p * n..(p + 1) * n];
                            ga[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                });
                send(*b, &mut |gb| {
                    // gb += aᵀ · g
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let aip = va[i * k + p];
                            if aip == 0.0 {
                                continue;
                            }
                            let out = &mut gb[p * n..(p + 1) * n];
                            for (o, x) in out.iter_mut().zip(grow) {
                                *o += aip * x;
                            }
                        }
                    }
                });
            }
            Op::Binary(op, a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let at = |v: &[f64], i: usize| if v.len() == 1 { v[0] } else { v[i] };
                let (da, db): (fn(f64, f64) -> f64, fn(f64, f64) -> f64) = match op {
                    Binary::Add => (|_, _| 1.0, |_, _| 1.0),
                    Binary::Sub => (|_, _| 1.0, |_, _| -1.0),
                    Binary::Mul => (|_, y| y, |x, _| x),
                    Binary::Div => (|_, y| 1.0 / y, |x, y| -x / (y * y)),
                };
                for (v, d) in [(*a, da), (*b, db)] {
                    let scalar_operand = self.value(v).len() == 1 && g.len() != 1;
                    send(v, &mut |gv| {
                        for (i, gi) in g.iter().enumerate() {
                            let local = gi * d(at(va, i), at(vb, i));
                            if scalar_operand {
                                gv[0] += local;
                            } else {
                                gv[i] += local;
                            }
                        }
                    });
                }
            }
            Op::Scale(a, c) => send(*a, &mut |ga| {
                ga.iter_mut().zip(g).for_each(|(o, x)| *o += c * x)
            }),
            Op::Unary(op, a) => {
                let x = self.value(*a);
                let y = &node.value;
                send(*a, &mut |ga| {
                    for i in 0..ga.len() {
                        let d = match op {
                            Unary::Tanh => 1.0 - y[i] * y[i],
                            Unary::Relu => {
                                if x[i] > 0.0 {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                            Unary::Square => 2.0 * x[i],
                            Unary::Cos => -x[i].sin(),
                            Unary::Sqrt => 0.5 / y[i],
                        };
                        ga[i] += g[i] * d;
                    }
                });
            }
            Op::Reduce(op, a, arg) => {
                let x = self.value(*a);
                let n = x.len() as f64;
                send(*a, &mut |ga| match op {
                    Reduce::Sum => ga.iter_mut().for_each(|o| *o += g[0]),
                    Reduce::Mean => ga.iter_mut().for_each(|o| *o += g[0] / n),
                    Reduce::SqNorm => ga
                        .iter_mut()
                        .zip(x)
                        .for_each(|(o, xi)| *o += 2.0 * xi * g[0]),
                    Reduce::Max => ga[*arg] += g[0],
                });
            }
            Op::Transpose(a) => {
                let (r, c) = (self.shape(*a)[0], self.shape(*a)[1]);
                send(*a, &mut |ga| {
                    for i in 0..r {
                        for j in 0..c {
                            ga[i * c + j] += g[j * r + i];
                        }
                    }
                });
            }
            Op::Reshape(a) => send(*a, &mut |ga| {
                ga.iter_mut().zip(g).for_each(|(o, x)| *o += x)
            }),
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    let slice = &g[offset..offset + len];
                    send(p, &mut |gp| gp.iter_mut().zip(slice).for_each(|(o, x)| *o += x));
                    offset += len;
                }
            }
            Op::GatherRows(a, idx) => {
                let c = self.shape(*a)[1];
                send(*a, &mut |ga| {
                    for (k, &i) in idx.iter().enumerate() {
                        for j in 0..c {
                            ga[i * c + j] += g[k * c + j];
                        }
                    }
                });
            }
            Op::SumAxis(a, axis) => {
                let (r, c) = (self.shape(*a)[0], self.shape(*a)[1]);
                send(*a, &mut |ga| {
                    for i in 0..r {
                        for j in 0..c {
                            ga[i * c + j] += if *axis == 0 { g[j] } else { g[i] };
                        }
                    }
                });
            }
            Op::MaxAxis(a, arg) => send(*a, &mut |ga| {
                for (k, &src) in arg.iter().enumerate() {
                    ga[src] += g[k];
                }
            }),
            Op::Scatter(a, map) => send(*a, &mut |ga| {
                for (k, &(t, w)) in map.iter().enumerate() {
                    ga[k] += w * g[t];
                }
            }),
            Op::ScalarFn(inputs, partials) => {
                for (&x, p) in inputs.iter().zip(partials) {
                    send(x, &mut |gx| {
                        gx.iter_mut().zip(p).for_each(|(o, d)| *o += g[0] * d)
                    });
                }
            }
        }
    }
}
