//! Minimal reverse-mode automatic differentiation on a flat tape.
//!
//! Tensors are row-major `f64` buffers with an explicit shape. A graph is
//! rebuilt per forward pass (define-by-run); `backward` walks the tape in
//! reverse and accumulates gradients into every node. Only the ops the
//! autoencoders need are implemented.

use std::fmt;

use serde::{Deserialize, Serialize};

pub const BCE_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape/data mismatch");
        Tensor { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor { shape, data: vec![0.0; n] }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor { shape: vec![1], data: vec![v] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

pub type VarId = usize;

enum Op {
    Leaf,
    /// out row i = table row indices[i]
    Gather { table: VarId, indices: Vec<usize> },
    /// (m,k) x (k,n)
    MatMul { a: VarId, b: VarId },
    /// x (m,n) + bias (n), broadcast over rows
    AddRowBias { x: VarId, bias: VarId },
    Add { a: VarId, b: VarId },
    Sub { a: VarId, b: VarId },
    Mul { a: VarId, b: VarId },
    Scale { x: VarId, c: f64 },
    AddScalar { x: VarId },
    Relu { x: VarId },
    Sigmoid { x: VarId },
    Exp { x: VarId },
    Sum { x: VarId },
    Reshape { x: VarId },
    /// x (L,Cin) * w (K,Cin,Cout) + b (Cout) -> (L,Cout), zero 'same' padding
    Conv1dSame { x: VarId, w: VarId, b: VarId },
    /// (L,C) -> (ceil(L/f),C); argmax per output cell recorded for backward
    MaxPool1d { x: VarId, argmax: Vec<usize> },
    /// repeat each row `factor` times, trimmed to out_len rows
    Upsample1d { x: VarId, factor: usize },
    /// summed binary cross-entropy against a constant target, with
    /// predictions clamped to [BCE_CLAMP, 1-BCE_CLAMP] before the logs
    BceSum { pred: VarId, target: Vec<f64> },
}

struct Node {
    value: Tensor,
    grad: Vec<f64>,
    op: Op,
}

#[derive(Debug)]
pub struct NonFiniteError {
    pub layer: &'static str,
}

impl fmt::Display for NonFiniteError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "non-finite value produced by layer {}", self.layer)
    }
}

impl std::error::Error for NonFiniteError {}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, value: Tensor, op: Op) -> VarId {
        let grad = vec![0.0; value.len()];
        self.nodes.push(Node { value, grad, op });
        self.nodes.len() - 1
    }

    pub fn value(&self, id: VarId) -> &Tensor {
        &self.nodes[id].value
    }

    pub fn grad(&self, id: VarId) -> &[f64] {
        &self.nodes[id].grad
    }

    pub fn leaf(&mut self, t: Tensor) -> VarId {
        self.push(t, Op::Leaf)
    }

    pub fn gather(&mut self, table: VarId, indices: &[usize]) -> VarId {
        let tv = self.value(table);
        assert_eq!(tv.shape.len(), 2);
        let (rows, cols) = (tv.shape[0], tv.shape[1]);
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &i in indices {
            assert!(i < rows, "gather index out of range");
            data.extend_from_slice(&tv.data[i * cols..(i + 1) * cols]);
        }
        self.push(
            Tensor::new(vec![indices.len(), cols], data),
            Op::Gather { table, indices: indices.to_vec() },
        )
    }

    pub fn matmul(&mut self, a: VarId, b: VarId) -> VarId {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.shape.len(), 2);
        assert_eq!(bv.shape.len(), 2);
        let (m, k) = (av.shape[0], av.shape[1]);
        let (k2, n) = (bv.shape[0], bv.shape[1]);
        assert_eq!(k, k2, "matmul inner dims");
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let x = av.data[i * k + p];
                if x == 0.0 {
                    continue;
                }
                for j in 0..n {
                    data[i * n + j] += x * bv.data[p * n + j];
                }
            }
        }
        self.push(Tensor::new(vec![m, n], data), Op::MatMul { a, b })
    }

    pub fn add_row_bias(&mut self, x: VarId, bias: VarId) -> VarId {
        let (xv, bv) = (self.value(x), self.value(bias));
        let n = *xv.shape.last().unwrap();
        assert_eq!(bv.len(), n, "bias length");
        let data = xv
            .data
            .iter()
            .enumerate()
            .map(|(i, v)| v + bv.data[i % n])
            .collect();
        let shape = xv.shape.clone();
        self.push(Tensor::new(shape, data), Op::AddRowBias { x, bias })
    }

    fn zip(&mut self, a: VarId, b: VarId, f: impl Fn(f64, f64) -> f64, op: Op) -> VarId {
        let (av, bv) = (self.value(a), self.value(b));
        assert_eq!(av.shape, bv.shape, "elementwise shape mismatch");
        let data = av.data.iter().zip(&bv.data).map(|(&x, &y)| f(x, y)).collect();
        let shape = av.shape.clone();
        self.push(Tensor::new(shape, data), op)
    }

    pub fn add(&mut self, a: VarId, b: VarId) -> VarId {
        self.zip(a, b, |x, y| x + y, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: VarId, b: VarId) -> VarId {
        self.zip(a, b, |x, y| x - y, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: VarId, b: VarId) -> VarId {
        self.zip(a, b, |x, y| x * y, Op::Mul { a, b })
    }

    fn map(&mut self, x: VarId, f: impl Fn(f64) -> f64, op: Op) -> VarId {
        let xv = self.value(x);
        let data = xv.data.iter().map(|&v| f(v)).collect();
        let shape = xv.shape.clone();
        self.push(Tensor::new(shape, data), op)
    }

    pub fn scale(&mut self, x: VarId, c: f64) -> VarId {
        self.map(x, |v| v * c, Op::Scale { x, c })
    }

    pub fn add_scalar(&mut self, x: VarId, c: f64) -> VarId {
        self.map(x, |v| v + c, Op::AddScalar { x })
    }

    pub fn relu(&mut self, x: VarId) -> VarId {
        self.map(x, |v| v.max(0.0), Op::Relu { x })
    }

    pub fn sigmoid(&mut self, x: VarId) -> VarId {
        self.map(x, |v| 1.0 / (1.0 + (-v).exp()), Op::Sigmoid { x })
    }

    pub fn exp(&mut self, x: VarId) -> VarId {
        self.map(x, |v| v.exp(), Op::Exp { x })
    }

    pub fn sum(&mut self, x: VarId) -> VarId {
        let s = self.value(x).data.iter().sum();
        self.push(Tensor::scalar(s), Op::Sum { x })
    }

    pub fn reshape(&mut self, x: VarId, shape: Vec<usize>) -> VarId {
        let xv = self.value(x);
        assert_eq!(shape.iter().product::<usize>(), xv.len(), "reshape size");
        let data = xv.data.clone();
        self.push(Tensor::new(shape, data), Op::Reshape { x })
    }

    pub fn conv1d_same(&mut self, x: VarId, w: VarId, b: VarId) -> VarId {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        assert_eq!(xv.shape.len(), 2);
        assert_eq!(wv.shape.len(), 3);
        let (len, cin) = (xv.shape[0], xv.shape[1]);
        let (k, cin2, cout) = (wv.shape[0], wv.shape[1], wv.shape[2]);
        assert_eq!(cin, cin2, "conv channel mismatch");
        assert_eq!(bv.len(), cout);
        let pad = k / 2;
        let mut data = vec![0.0; len * cout];
        for t in 0..len {
            for co in 0..cout {
                let mut acc = bv.data[co];
                for kk in 0..k {
                    let src = t as isize + kk as isize - pad as isize;
                    if src < 0 || src >= len as isize {
                        continue;
                    }
                    let src = src as usize;
                    for ci in 0..cin {
                        acc += wv.data[(kk * cin + ci) * cout + co] * xv.data[src * cin + ci];
                    }
                }
                data[t * cout + co] = acc;
            }
        }
        self.push(Tensor::new(vec![len, cout], data), Op::Conv1dSame { x, w, b })
    }

    pub fn max_pool1d(&mut self, x: VarId, factor: usize) -> VarId {
        assert!(factor >= 1);
        let xv = self.value(x);
        let (len, c) = (xv.shape[0], xv.shape[1]);
        let out_len = len.div_ceil(factor);
        let mut data = vec![0.0; out_len * c];
        let mut argmax = vec![0usize; out_len * c];
        for j in 0..out_len {
            let start = j * factor;
            let end = (start + factor).min(len);
            for ch in 0..c {
                let mut best = start;
                for t in start + 1..end {
                    if xv.data[t * c + ch] > xv.data[best * c + ch] {
                        best = t;
                    }
                }
                data[j * c + ch] = xv.data[best * c + ch];
                argmax[j * c + ch] = best;
            }
        }
        self.push(
            Tensor::new(vec![out_len, c], data),
            Op::MaxPool1d { x, argmax },
        )
    }

    pub fn upsample1d(&mut self, x: VarId, factor: usize, out_len: usize) -> VarId {
        assert!(factor >= 1);
        let xv = self.value(x);
        let (len, c) = (xv.shape[0], xv.shape[1]);
        assert!(out_len <= len * factor, "upsample output too long");
        let mut data = vec![0.0; out_len * c];
        for t in 0..out_len {
            let src = t / factor;
            data[t * c..(t + 1) * c].copy_from_slice(&xv.data[src * c..(src + 1) * c]);
        }
        self.push(Tensor::new(vec![out_len, c], data), Op::Upsample1d { x, factor })
    }

    pub fn bce_sum(&mut self, pred: VarId, target: &[f64]) -> VarId {
        let pv = self.value(pred);
        assert_eq!(pv.len(), target.len(), "bce target length");
        let mut loss = 0.0;
        for (&p, &t) in pv.data.iter().zip(target) {
            let pc = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
            loss -= t * pc.ln() + (1.0 - t) * (1.0 - pc).ln();
        }
        self.push(
            Tensor::scalar(loss),
            Op::BceSum { pred, target: target.to_vec() },
        )
    }

    /// Check every node value for NaN/Inf; names the offending op.
    pub fn check_finite(&self) -> Result<(), NonFiniteError> {
        for node in &self.nodes {
            if !node.value.is_finite() {
                return Err(NonFiniteError { layer: op_name(&node.op) });
            }
        }
        Ok(())
    }

    /// Reverse pass seeding d(root)/d(root) = 1. Root must be scalar.
    pub fn backward(&mut self, root: VarId) {
        assert_eq!(self.nodes[root].value.len(), 1, "backward root must be scalar");
        for node in &mut self.nodes {
            node.grad.iter_mut().for_each(|g| *g = 0.0);
        }
        self.nodes[root].grad[0] = 1.0;
        for id in (0..=root).rev() {
            // split borrows: take the grad out, write into earlier nodes
            let grad = std::mem::take(&mut self.nodes[id].grad);
            match &self.nodes[id].op {
                Op::Leaf => {}
                Op::Gather { table, indices } => {
                    let (table, indices) = (*table, indices.clone());
                    let cols = self.nodes[table].value.shape[1];
                    for (row, &i) in indices.iter().enumerate() {
                        for c in 0..cols {
                            self.nodes[table].grad[i * cols + c] += grad[row * cols + c];
                        }
                    }
                }
                Op::MatMul { a, b } => {
                    let (a, b) = (*a, *b);
                    let (m, k) = (self.nodes[a].value.shape[0], self.nodes[a].value.shape[1]);
                    let n = self.nodes[b].value.shape[1];
                    for i in 0..m {
                        for p in 0..k {
                            let mut acc = 0.0;
                            for j in 0..n {
                                acc += grad[i * n + j] * self.nodes[b].value.data[p * n + j];
                            }
                            self.nodes[a].grad[i * k + p] += acc;
                        }
                    }
                    for p in 0..k {
                        for j in 0..n {
                            let mut acc = 0.0;
                            for i in 0..m {
                                acc += self.nodes[a].value.data[i * k + p] * grad[i * n + j];
                            }
                            self.nodes[b].grad[p * n + j] += acc;
                        }
                    }
                }
                Op::AddRowBias { x, bias } => {
                    let (x, bias) = (*x, *bias);
                    let n = self.nodes[bias].value.len();
                    for (i, g) in grad.iter().enumerate() {
                        self.nodes[x].grad[i] += g;
                        self.nodes[bias].grad[i % n] += g;
                    }
                }
                Op::Add { a, b } => {
                    let (a, b) = (*a, *b);
                    for (i, g) in grad.iter().enumerate() {
                        self.nodes[a].grad[i] += g;
                        self.nodes[b].grad[i] += g;
                    }
                }
                Op::Sub { a, b } => {
                    let (a, b) = (*a, *b);
                    for (i, g) in grad.iter().enumerate() {
                        self.nodes[a].grad[i] += g;
                        self.nodes[b].grad[i] -= g;
                    }
                }
                Op::Mul { a, b } => {
                    let (a, b) = (*a, *b);
                    for (i, g) in grad.iter().enumerate() {
                        let av = self.nodes[a].value.data[i];
                        let bv = self.nodes[b].value.data[i];
                        self.nodes[a].grad[i] += g * bv;
                        self.nodes[b].grad[i] += g * av;
                    }
                }
                Op::Scale { x, c } => {
                    let (x, c) = (*x, *c);
                    for (i, g) in grad.iter().enumerate() {
                        self.nodes[x].grad[i] += g * c;
                    }
                }
                Op::AddScalar { x, .. } => {
                    let x = *x;
                    for (i, g) in grad.iter().enumerate() {
                        self.nodes[x].grad[i] += g;
                    }
                }
                Op::Relu { x } => {
                    let x = *x;
                    for (i, g) in grad.iter().enumerate() {
                        if self.nodes[x].value.data[i] > 0.0 {
                            self.nodes[x].grad[i] += g;
                        }
                    }
                }
                Op::Sigmoid { x } => {
                    let x = *x;
                    for (i, g) in grad.iter().enumerate() {
                        let s = self.nodes[id].value.data[i];
                        self.nodes[x].grad[i] += g * s * (1.0 - s);
                    }
                }
                Op::Exp { x } => {
                    let x = *x;
                    for (i, g) in grad.iter().enumerate() {
                        self.nodes[x].grad[i] += g * self.nodes[id].value.data[i];
                    }
                }
                Op::Sum { x } => {
                    let x = *x;
                    let g = grad[0];
                    for gx in self.nodes[x].grad.iter_mut() {
                        *gx += g;
                    }
                }
                Op::Reshape { x } => {
                    let x = *x;
                    for (i, g) in grad.iter().enumerate() {
                        self.nodes[x].grad[i] += g;
                    }
                }
                Op::Conv1dSame { x, w, b } => {
                    let (x, w, b) = (*x, *w, *b);
                    let (len, cin) = (self.nodes[x].value.shape[0], self.nodes[x].value.shape[1]);
                    let (k, _, cout) = (
                        self.nodes[w].value.shape[0],
                        self.nodes[w].value.shape[1],
                        self.nodes[w].value.shape[2],
                    );
                    let pad = k / 2;
                    for t in 0..len {
                        for co in 0..cout {
                            let g = grad[t * cout + co];
                            if g == 0.0 {
                                continue;
                            }
                            self.nodes[b].grad[co] += g;
                            for kk in 0..k {
                                let src = t as isize + kk as isize - pad as isize;
                                if src < 0 || src >= len as isize {
                                    continue;
                                }
                                let src = src as usize;
                                for ci in 0..cin {
                                    let wi = (kk * cin + ci) * cout + co;
                                    self.nodes[w].grad[wi] +=
                                        g * self.nodes[x].value.data[src * cin + ci];
                                    self.nodes[x].grad[src * cin + ci] +=
                                        g * self.nodes[w].value.data[wi];
                                }
                            }
                        }
                    }
                }
                Op::MaxPool1d { x, argmax, .. } => {
                    let x = *x;
                    let argmax = argmax.clone();
                    let c = self.nodes[x].value.shape[1];
                    for (cell, g) in grad.iter().enumerate() {
                        let ch = cell % c;
                        self.nodes[x].grad[argmax[cell] * c + ch] += g;
                    }
                }
                Op::Upsample1d { x, factor } => {
                    let (x, factor) = (*x, *factor);
                    let c = self.nodes[x].value.shape[1];
                    let out_len = grad.len() / c;
                    for t in 0..out_len {
                        let src = t / factor;
                        for ch in 0..c {
                            self.nodes[x].grad[src * c + ch] += grad[t * c + ch];
                        }
                    }
                }
                Op::BceSum { pred, target } => {
                    let (pred, target) = (*pred, target.clone());
                    let g = grad[0];
                    for (i, &t) in target.iter().enumerate() {
                        let p = self.nodes[pred].value.data[i];
                        if p <= BCE_CLAMP || p >= 1.0 - BCE_CLAMP {
                            continue; // clamped region is flat
                        }
                        self.nodes[pred].grad[i] += g * (-(t / p) + (1.0 - t) / (1.0 - p));
                    }
                }
            }
            self.nodes[id].grad = grad;
        }
    }
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::Gather { .. } => "embedding-gather",
        Op::MatMul { .. } => "matmul",
        Op::AddRowBias { .. } => "bias",
        Op::Add { .. } => "add",
        Op::Sub { .. } => "sub",
        Op::Mul { .. } => "mul",
        Op::Scale { .. } => "scale",
        Op::AddScalar { .. } => "add-scalar",
        Op::Relu { .. } => "relu",
        Op::Sigmoid { .. } => "sigmoid",
        Op::Exp { .. } => "exp",
        Op::Sum { .. } => "sum",
        Op::Reshape { .. } => "reshape",
        Op::Conv1dSame { .. } => "conv1d",
        Op::MaxPool1d { .. } => "maxpool1d",
        Op::Upsample1d { .. } => "upsample1d",
        Op::BceSum { .. } => "bce",
    }
}

/// Central finite differences of `f` with respect to `params[which]`.
/// `f` must evaluate the scalar loss from scratch at the given parameter
/// values; it never touches the reverse pass, so it serves as an
/// independent oracle for gradients.
pub fn finite_difference(
    params: &[Tensor],
    which: usize,
    step: f64,
    f: &dyn Fn(&[Tensor]) -> f64,
) -> Vec<f64> {
    let mut work: Vec<Tensor> = params.to_vec();
    let n = work[which].len();
    let mut grad = vec![0.0; n];
    for (i, slot) in grad.iter_mut().enumerate() {
        let orig = work[which].data[i];
        work[which].data[i] = orig + step;
        let hi = f(&work);
        work[which].data[i] = orig - step;
        let lo = f(&work);
        work[which].data[i] = orig;
        *slot = (hi - lo) / (2.0 * step);
    }
    grad
}

/// Max relative error between analytic and numeric gradients,
/// `|a-n| / max(1, |a|, |n|)` per component.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1.0))
        .fold(0.0, f64::max)
}
