use super::tensor::Tensor;
use crate::error::{QppError, Result};

pub const LAYER_NORM_EPS: f64 = 1e-5;

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    SoftmaxRows(Var),
    /// Per-row reciprocal standard deviations from the forward pass.
    LayerNormRows(Var, Vec<f64>),
    Gelu(Var),
    Relu(Var),
    Mean(Var),
    Sum(Var),
    MeanRows(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize, usize),
    Transpose(Var),
    GatherRows(Var, Vec<usize>),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Record of executed operations, in execution (hence topological) order.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    backward_done: bool,
}

/// Gradients indexed by [`Var`]; `None` for values that need no gradient.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, v: Var) -> Option<Vec<f64>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

/// How `b` lines up against `a` in a binary elementwise op.
#[derive(Clone, Copy)]
enum Broadcast {
    Same,
    /// `b` is a single row repeated over the rows of `a`.
    Row(usize),
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

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// A trainable input.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A constant input; no gradient flows into it.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn shape_err(&self, op: &'static str, a: Var, b: Var) -> QppError {
        QppError::Shape {
            op,
            left: self.shape(a).to_vec(),
            right: self.shape(b).to_vec(),
        }
    }

    fn broadcast(&self, op: &'static str, a: Var, b: Var) -> Result<Broadcast> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa == sb {
            return Ok(Broadcast::Same);
        }
        if let ([_, c], [1, c2]) = (sa, sb) {
            if c == c2 {
                return Ok(Broadcast::Row(*c));
            }
        }
        Err(self.shape_err(op, a, b))
    }

    fn elementwise(
        &mut self,
        op_name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        let bc = self.broadcast(op_name, a, b)?;
        let va = self.value(a);
        let vb = self.value(b).data();
        let data = match bc {
            Broadcast::Same => va.data().iter().zip(vb).map(|(x, y)| f(*x, *y)).collect(),
            Broadcast::Row(c) => va
                .data()
                .iter()
                .enumerate()
                .map(|(i, x)| f(*x, vb[i % c]))
                .collect(),
        };
        let t = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(t, op, rg))
    }

    /// `a + b`; `b` may be a `[1, cols]` row broadcast over `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product with the same broadcasting rule as [`Tape::add`].
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let va = self.value(a);
        let t = Tensor::new(va.shape().to_vec(), va.data().iter().map(|x| x * c).collect())
            .expect("same shape");
        let rg = self.rg(&[a]);
        self.push(t, Op::Scale(a, c), rg)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2("matmul")?;
        let (k2, n) = self.value(b).dims2("matmul")?;
        if k != k2 {
            return Err(self.shape_err("matmul", a, b));
        }
        let out = matmul_raw(self.value(a).data(), self.value(b).data(), m, k, n);
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.value(a).dims2("transpose")?;
        let out = transpose_raw(self.value(a).data(), m, n);
        let rg = self.rg(&[a]);
        Ok(self.push(Tensor::matrix(n, m, out)?, Op::Transpose(a), rg))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.value(a).dims2("softmax_rows")?;
        let x = self.value(a).data();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &x[i * n..(i + 1) * n];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let o = &mut out[i * n..(i + 1) * n];
            let mut z = 0.0;
            for (oj, xj) in o.iter_mut().zip(row) {
                *oj = (xj - max).exp();
                z += *oj;
            }
            o.iter_mut().for_each(|v| *v /= z);
        }
        let rg = self.rg(&[a]);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::SoftmaxRows(a), rg))
    }

    /// Normalise each row to zero mean, unit (population) variance; no affine part.
    pub fn layer_norm_rows(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.value(a).dims2("layer_norm")?;
        let x = self.value(a).data();
        let mut out = vec![0.0; m * n];
        let mut rstd = Vec::with_capacity(m);
        for i in 0..m {
            let row = &x[i * n..(i + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            let r = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for (o, v) in out[i * n..(i + 1) * n].iter_mut().zip(row) {
                *o = (v - mean) * r;
            }
            rstd.push(r);
        }
        let rg = self.rg(&[a]);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::LayerNormRows(a, rstd), rg))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let data = va
            .data()
            .iter()
            .map(|&x| 0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh()))
            .collect();
        let t = Tensor::new(va.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(&[a]);
        self.push(t, Op::Gelu(a), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let t = Tensor::new(va.shape().to_vec(), va.data().iter().map(|x| x.max(0.0)).collect())
            .expect("same shape");
        let rg = self.rg(&[a]);
        self.push(t, Op::Relu(a), rg)
    }

    /// Mean of all elements, as a scalar.
    pub fn mean(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let m = va.data().iter().sum::<f64>() / va.len() as f64;
        let rg = self.rg(&[a]);
        self.push(Tensor::scalar(m), Op::Mean(a), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum::<f64>();
        let rg = self.rg(&[a]);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    /// Column means: `[m, n] -> [1, n]`.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.value(a).dims2("mean_rows")?;
        let x = self.value(a).data();
        let mut out = vec![0.0; n];
        for i in 0..m {
            for (o, v) in out.iter_mut().zip(&x[i * n..(i + 1) * n]) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|v| *v /= m as f64);
        let rg = self.rg(&[a]);
        Ok(self.push(Tensor::matrix(1, n, out)?, Op::MeanRows(a), rg))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| QppError::Contract("concat of nothing".into()))?;
        let (m, _) = self.value(first).dims2("concat_cols")?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.value(p).dims2("concat_cols")?;
            if r != m {
                return Err(self.shape_err("concat_cols", first, p));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(m * total);
        for i in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        let rg = self.rg(parts);
        Ok(self.push(Tensor::matrix(m, total, out)?, Op::ConcatCols(parts.to_vec()), rg))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| QppError::Contract("concat of nothing".into()))?;
        let (_, n) = self.value(first).dims2("concat_rows")?;
        let mut rows = 0;
        let mut out = Vec::new();
        for &p in parts {
            let (r, c) = self.value(p).dims2("concat_rows")?;
            if c != n {
                return Err(self.shape_err("concat_rows", first, p));
            }
            rows += r;
            out.extend_from_slice(self.value(p).data());
        }
        let rg = self.rg(parts);
        Ok(self.push(Tensor::matrix(rows, n, out)?, Op::ConcatRows(parts.to_vec()), rg))
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (m, n) = self.value(a).dims2("slice_cols")?;
        if start >= end || end > n {
            return Err(QppError::Shape {
                op: "slice_cols",
                left: vec![m, n],
                right: vec![start, end],
            });
        }
        let x = self.value(a).data();
        let out: Vec<f64> = (0..m)
            .flat_map(|i| x[i * n + start..i * n + end].iter().copied())
            .collect();
        let rg = self.rg(&[a]);
        Ok(self.push(
            Tensor::matrix(m, end - start, out)?,
            Op::SliceCols(a, start, end),
            rg,
        ))
    }

    /// Select rows of a table, e.g. an embedding lookup.
    pub fn gather_rows(&mut self, table: Var, idx: &[usize]) -> Result<Var> {
        let (m, n) = self.value(table).dims2("gather_rows")?;
        if idx.is_empty() {
            return Err(QppError::Contract("gather of no rows".into()));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= m) {
            return Err(QppError::Shape {
                op: "gather_rows",
                left: vec![m, n],
                right: vec![bad],
            });
        }
        let x = self.value(table).data();
        let out: Vec<f64> = idx
            .iter()
            .flat_map(|&i| x[i * n..(i + 1) * n].iter().copied())
            .collect();
        let rg = self.rg(&[table]);
        Ok(self.push(
            Tensor::matrix(idx.len(), n, out)?,
            Op::GatherRows(table, idx.to_vec()),
            rg,
        ))
    }

    /// Reverse pass from a scalar. Allowed once per tape.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(QppError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        if self.backward_done {
            return Err(QppError::Contract("backward already ran on this tape".into()));
        }
        self.backward_done = true;

        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        for (g, n) in grads.iter_mut().zip(&self.nodes) {
            if !n.requires_grad {
                *g = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, f: impl FnOnce(&mut [f64])) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
        f(slot);
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let out = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                self.accumulate(grads, *a, |ga| add_into(ga, g));
                let bc = self.broadcast("add", *a, *b).expect("checked in forward");
                self.accumulate(grads, *b, |gb| match bc {
                    Broadcast::Same => gb.iter_mut().zip(g).for_each(|(x, y)| *x += sign * y),
                    Broadcast::Row(c) => g.iter().enumerate().for_each(|(j, y)| gb[j % c] += sign * y),
                });
            }
            Op::Mul(a, b) => {
                let bc = self.broadcast("mul", *a, *b).expect("checked in forward");
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                let c = match bc {
                    Broadcast::Same => va.len(),
                    Broadcast::Row(c) => c,
                };
                self.accumulate(grads, *a, |ga| {
                    for (j, y) in g.iter().enumerate() {
                        ga[j] += y * vb[j % c];
                    }
                });
                self.accumulate(grads, *b, |gb| {
                    for (j, y) in g.iter().enumerate() {
                        gb[j % c] += y * va[j];
                    }
                });
            }
            Op::Scale(a, c) => self.accumulate(grads, *a, |ga| {
                ga.iter_mut().zip(g).for_each(|(x, y)| *x += c * y)
            }),
            Op::MatMul(a, b) => {
                let (m, k) = self.value(*a).dims2("matmul").unwrap();
                let (_, n) = self.value(*b).dims2("matmul").unwrap();
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                // dA = G Bᵀ, dB = Aᵀ G
                self.accumulate(grads, *a, |ga| {
                    let bt = transpose_raw(vb, k, n);
                    add_into(ga, &matmul_raw(g, &bt, m, n, k));
                });
                self.accumulate(grads, *b, |gb| {
                    let at = transpose_raw(va, m, k);
                    add_into(gb, &matmul_raw(&at, g, k, m, n));
                });
            }
            Op::Transpose(a) => {
                let (m, n) = out.dims2("transpose").unwrap();
                self.accumulate(grads, *a, |ga| add_into(ga, &transpose_raw(g, m, n)));
            }
            Op::SoftmaxRows(a) => {
                let (m, n) = out.dims2("softmax").unwrap();
                let y = out.data();
                self.accumulate(grads, *a, |ga| {
                    for r in 0..m {
                        let s = r * n..(r + 1) * n;
                        let dot: f64 = g[s.clone()].iter().zip(&y[s.clone()]).map(|(p, q)| p * q).sum();
                        for j in s {
                            ga[j] += y[j] * (g[j] - dot);
                        }
                    }
                });
            }
            Op::LayerNormRows(a, rstd) => {
                let (m, n) = out.dims2("layer_norm").unwrap();
                let y = out.data();
                self.accumulate(grads, *a, |ga| {
                    for r in 0..m {
                        let s = r * n..(r + 1) * n;
                        let mg = g[s.clone()].iter().sum::<f64>() / n as f64;
                        let mgy = g[s.clone()].iter().zip(&y[s.clone()]).map(|(p, q)| p * q).sum::<f64>()
                            / n as f64;
                        for j in s {
                            ga[j] += rstd[r] * (g[j] - mg - y[j] * mgy);
                        }
                    }
                });
            }
            Op::Gelu(a) => {
                let x = self.value(*a).data();
                self.accumulate(grads, *a, |ga| {
                    for (j, &xj) in x.iter().enumerate() {
                        let t = (GELU_C * (xj + GELU_A * xj * xj * xj)).tanh();
                        let d = 0.5 * (1.0 + t)
                            + 0.5 * xj * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * xj * xj);
                        ga[j] += g[j] * d;
                    }
                });
            }
            Op::Relu(a) => {
                let x = self.value(*a).data();
                self.accumulate(grads, *a, |ga| {
                    for (j, &xj) in x.iter().enumerate() {
                        if xj > 0.0 {
                            ga[j] += g[j];
                        }
                    }
                });
            }
            Op::Mean(a) => {
                let n = self.value(*a).len() as f64;
                self.accumulate(grads, *a, |ga| ga.iter_mut().for_each(|x| *x += g[0] / n));
            }
            Op::Sum(a) => self.accumulate(grads, *a, |ga| ga.iter_mut().for_each(|x| *x += g[0])),
            Op::MeanRows(a) => {
                let (m, n) = self.value(*a).dims2("mean_rows").unwrap();
                self.accumulate(grads, *a, |ga| {
                    for (j, x) in ga.iter_mut().enumerate() {
                        *x += g[j % n] / m as f64;
                    }
                });
            }
            Op::ConcatCols(parts) => {
                let (m, total) = out.dims2("concat_cols").unwrap();
                let mut offset = 0;
                for p in parts {
                    let (_, w) = self.value(*p).dims2("concat_cols").unwrap();
                    self.accumulate(grads, *p, |gp| {
                        for r in 0..m {
                            add_into(
                                &mut gp[r * w..(r + 1) * w],
                                &g[r * total + offset..r * total + offset + w],
                            );
                        }
                    });
                    offset += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let len = self.value(*p).len();
                    self.accumulate(grads, *p, |gp| add_into(gp, &g[offset..offset + len]));
                    offset += len;
                }
            }
            Op::SliceCols(a, start, end) => {
                let (m, n) = self.value(*a).dims2("slice_cols").unwrap();
                let w = end - start;
                self.accumulate(grads, *a, |ga| {
                    for r in 0..m {
                        add_into(&mut ga[r * n + start..r * n + end], &g[r * w..(r + 1) * w]);
                    }
                });
            }
            Op::GatherRows(table, idx) => {
                let (_, n) = self.value(*table).dims2("gather_rows").unwrap();
                self.accumulate(grads, *table, |gt| {
                    for (r, &src) in idx.iter().enumerate() {
                        add_into(&mut gt[src * n..(src + 1) * n], &g[r * n..(r + 1) * n]);
                    }
                });
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

pub(crate) fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            for (o, bv) in orow.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += aip * bv;
            }
        }
    }
    out
}

fn transpose_raw(a: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j];
        }
    }
    out
}
