//! Define-by-run reverse-mode differentiation over dense `f64` matrices.
//!
//! Operations are recorded on a [`Tape`] in execution order; [`Tape::backward`]
//! walks the tape in exact reverse order and accumulates gradients with `+=`,
//! so a value used twice receives the sum of both paths.

mod kernels;
mod tensor;

use std::sync::Arc;

use thiserror::Error;

pub use kernels::{gemm_nn, gemm_nt, gemm_tn};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{op}: index {index} out of range for {len} rows")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        len: usize,
    },
    #[error("mean over empty segment {0}")]
    EmptySegment(usize),
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss((usize, usize)),
    #[error("{0} produced a non-finite value")]
    NonFinite(&'static str),
}

type Result<T> = std::result::Result<T, AutodiffError>;

/// Handle to a value recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduce {
    Sum,
    Mean,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Concat(Vec<Var>),
    ShiftedSoftplus(Var),
    Gather {
        table: Var,
        indices: Arc<Vec<usize>>,
    },
    Segment {
        input: Var,
        segments: Arc<Vec<usize>>,
        counts: Vec<usize>,
        mode: Reduce,
    },
    SumAll(Var),
    MeanAll(Var),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// `ln(1 + e^x) - ln 2`, stable for large |x|.
#[inline]
pub fn shifted_softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p() - std::f64::consts::LN_2
}

/// Logistic function, the derivative of [`shifted_softplus`].
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    check_finite: bool,
}

/// Gradients of a scalar loss with respect to every recorded value.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient for `var`; zeros when the loss does not depend on it.
    pub fn get(&self, var: Var) -> Tensor {
        match &self.grads[var.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[var.0];
                Tensor::zeros(r, c)
            }
        }
    }

    pub fn take(&mut self, var: Var) -> Tensor {
        let (r, c) = self.shapes[var.0];
        self.grads[var.0].take().unwrap_or_else(|| Tensor::zeros(r, c))
    }
}

fn accumulate(slot: &mut Option<Tensor>, delta: Tensor) {
    match slot {
        Some(g) => g.add_assign(&delta),
        None => *slot = Some(delta),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Tape that rejects any operation producing NaN or infinity.
    pub fn with_finite_checks() -> Self {
        Self {
            nodes: Vec::new(),
            check_finite: true,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op, name: &'static str) -> Result<Var> {
        if self.check_finite && !value.is_finite() {
            return Err(AutodiffError::NonFinite(name));
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Input or parameter.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(AutodiffError::ShapeMismatch {
                op,
                left: sa,
                right: sb,
            });
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        if k != k2 {
            return Err(AutodiffError::ShapeMismatch {
                op: "matmul",
                left: (m, k),
                right: (k2, n),
            });
        }
        let mut out = Tensor::zeros(m, n);
        gemm_nn(self.value(a).data(), self.value(b).data(), out.data_mut(), m, k, n);
        self.push(out, Op::MatMul(a, b), "matmul")
    }

    fn zip_with(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (r, c) = self.shape(a);
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Tensor::new(r, c, data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.zip_with(a, b, |x, y| x + y);
        self.push(out, Op::Add(a, b), "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.zip_with(a, b, |x, y| x - y);
        self.push(out, Op::Sub(a, b), "sub")
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.zip_with(a, b, |x, y| x * y);
        self.push(out, Op::Mul(a, b), "mul")
    }

    /// `x (m x n) + bias (1 x n)` broadcast over rows; the only broadcast supported.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (m, n) = self.shape(x);
        let sb = self.shape(bias);
        if sb != (1, n) {
            return Err(AutodiffError::ShapeMismatch {
                op: "add_bias",
                left: (m, n),
                right: sb,
            });
        }
        let mut out = self.value(x).clone();
        let b = self.value(bias).data();
        for row in out.data_mut().chunks_mut(n.max(1)) {
            for (o, bj) in row.iter_mut().zip(b) {
                *o += bj;
            }
        }
        self.push(out, Op::AddBias(x, bias), "add_bias")
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Result<Var> {
        let (r, c) = self.shape(x);
        let data = self.value(x).data().iter().map(|v| v * factor).collect();
        self.push(Tensor::new(r, c, data), Op::Scale(x, factor), "scale")
    }

    /// Concatenate along columns.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(AutodiffError::ShapeMismatch {
                op: "concat",
                left: (0, 0),
                right: (0, 0),
            });
        };
        let rows = self.shape(first).0;
        for &p in parts {
            if self.shape(p).0 != rows {
                return Err(AutodiffError::ShapeMismatch {
                    op: "concat",
                    left: self.shape(first),
                    right: self.shape(p),
                });
            }
        }
        let cols: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(i));
            }
        }
        self.push(Tensor::new(rows, cols, data), Op::Concat(parts.to_vec()), "concat")
    }

    pub fn shifted_softplus(&mut self, x: Var) -> Result<Var> {
        let (r, c) = self.shape(x);
        let data = self.value(x).data().iter().map(|&v| shifted_softplus(v)).collect();
        self.push(Tensor::new(r, c, data), Op::ShiftedSoftplus(x), "shifted_softplus")
    }

    /// Rows `table[indices[i]]`.
    pub fn gather_rows(&mut self, table: Var, indices: Arc<Vec<usize>>) -> Result<Var> {
        let (v, c) = self.shape(table);
        if let Some(&bad) = indices.iter().find(|&&i| i >= v) {
            return Err(AutodiffError::IndexOutOfRange {
                op: "gather_rows",
                index: bad,
                len: v,
            });
        }
        let t = self.value(table);
        let mut data = Vec::with_capacity(indices.len() * c);
        for &i in indices.iter() {
            data.extend_from_slice(t.row(i));
        }
        let out = Tensor::new(indices.len(), c, data);
        self.push(out, Op::Gather { table, indices }, "gather_rows")
    }

    /// Sum or average the rows of `x` sharing a segment id; output has
    /// `n_segments` rows. Empty segments sum to zero and are an error under `Mean`.
    pub fn segment_reduce(
        &mut self,
        x: Var,
        segments: Arc<Vec<usize>>,
        n_segments: usize,
        mode: Reduce,
    ) -> Result<Var> {
        let (n, c) = self.shape(x);
        if segments.len() != n {
            return Err(AutodiffError::ShapeMismatch {
                op: "segment_reduce",
                left: (n, c),
                right: (segments.len(), 1),
            });
        }
        let mut counts = vec![0usize; n_segments];
        for &s in segments.iter() {
            if s >= n_segments {
                return Err(AutodiffError::IndexOutOfRange {
                    op: "segment_reduce",
                    index: s,
                    len: n_segments,
                });
            }
            counts[s] += 1;
        }
        if mode == Reduce::Mean {
            if let Some(empty) = counts.iter().position(|&k| k == 0) {
                return Err(AutodiffError::EmptySegment(empty));
            }
        }
        let mut out = Tensor::zeros(n_segments, c);
        {
            let xv = &self.nodes[x.0].value;
            let o = out.data_mut();
            for (i, &s) in segments.iter().enumerate() {
                let dst = &mut o[s * c..(s + 1) * c];
                for (d, v) in dst.iter_mut().zip(xv.row(i)) {
                    *d += v;
                }
            }
            if mode == Reduce::Mean {
                for (s, &k) in counts.iter().enumerate() {
                    let inv = 1.0 / k as f64;
                    for d in &mut o[s * c..(s + 1) * c] {
                        *d *= inv;
                    }
                }
            }
        }
        self.push(
            out,
            Op::Segment {
                input: x,
                segments,
                counts,
                mode,
            },
            "segment_reduce",
        )
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::SumAll(x), "sum")
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push(Tensor::scalar(s), Op::MeanAll(x), "mean")
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(AutodiffError::NonScalarLoss(shape));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else {
                continue;
            };
            let node = &self.nodes[id];
            match &node.op {
                Op::Leaf => {
                    grads[id] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let (m, k) = self.shape(*a);
                    let n = self.shape(*b).1;
                    let mut ga = Tensor::zeros(m, k);
                    gemm_nt(g.data(), self.value(*b).data(), ga.data_mut(), m, n, k);
                    let mut gb = Tensor::zeros(k, n);
                    gemm_tn(self.value(*a).data(), g.data(), gb.data_mut(), m, k, n);
                    accumulate(&mut grads[a.0], ga);
                    accumulate(&mut grads[b.0], gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], g.clone());
                    accumulate(&mut grads[b.0], g);
                }
                Op::Sub(a, b) => {
                    let (r, c) = g.shape();
                    let neg = Tensor::new(r, c, g.data().iter().map(|x| -x).collect());
                    accumulate(&mut grads[a.0], g);
                    accumulate(&mut grads[b.0], neg);
                }
                Op::Mul(a, b) => {
                    let (r, c) = g.shape();
                    let ga = g
                        .data()
                        .iter()
                        .zip(self.value(*b).data())
                        .map(|(x, y)| x * y)
                        .collect();
                    let gb = g
                        .data()
                        .iter()
                        .zip(self.value(*a).data())
                        .map(|(x, y)| x * y)
                        .collect();
                    accumulate(&mut grads[a.0], Tensor::new(r, c, ga));
                    accumulate(&mut grads[b.0], Tensor::new(r, c, gb));
                }
                Op::AddBias(x, bias) => {
                    let (_, n) = g.shape();
                    let mut gb = vec![0.0; n];
                    for row in g.data().chunks(n.max(1)) {
                        for (acc, v) in gb.iter_mut().zip(row) {
                            *acc += v;
                        }
                    }
                    accumulate(&mut grads[bias.0], Tensor::new(1, n, gb));
                    accumulate(&mut grads[x.0], g);
                }
                Op::Scale(x, factor) => {
                    let (r, c) = g.shape();
                    let gx = g.data().iter().map(|v| v * factor).collect();
                    accumulate(&mut grads[x.0], Tensor::new(r, c, gx));
                }
                Op::Concat(parts) => {
                    let rows = g.rows();
                    let total = g.cols();
                    let mut start = 0;
                    for p in parts {
                        let w = self.shape(*p).1;
                        let mut gp = Vec::with_capacity(rows * w);
                        for i in 0..rows {
                            gp.extend_from_slice(&g.data()[i * total + start..i * total + start + w]);
                        }
                        accumulate(&mut grads[p.0], Tensor::new(rows, w, gp));
                        start += w;
                    }
                }
                Op::ShiftedSoftplus(x) => {
                    let (r, c) = g.shape();
                    let gx = g
                        .data()
                        .iter()
                        .zip(self.value(*x).data())
                        .map(|(gv, &xv)| gv * logistic(xv))
                        .collect();
                    accumulate(&mut grads[x.0], Tensor::new(r, c, gx));
                }
                Op::Gather { table, indices } => {
                    let (v, c) = self.shape(*table);
                    let mut gt = Tensor::zeros(v, c);
                    {
                        let d = gt.data_mut();
                        for (i, &row) in indices.iter().enumerate() {
                            for (acc, x) in d[row * c..(row + 1) * c].iter_mut().zip(g.row(i)) {
                                *acc += x;
                            }
                        }
                    }
                    accumulate(&mut grads[table.0], gt);
                }
                Op::Segment {
                    input,
                    segments,
                    counts,
                    mode,
                } => {
                    let (n, c) = self.shape(*input);
                    let mut gx = Vec::with_capacity(n * c);
                    for &s in segments.iter() {
                        let scale = match mode {
                            Reduce::Sum => 1.0,
                            Reduce::Mean => 1.0 / counts[s] as f64,
                        };
                        gx.extend(g.row(s).iter().map(|v| v * scale));
                    }
                    accumulate(&mut grads[input.0], Tensor::new(n, c, gx));
                }
                Op::SumAll(x) => {
                    let (r, c) = self.shape(*x);
                    accumulate(&mut grads[x.0], Tensor::filled(r, c, g.data()[0]));
                }
                Op::MeanAll(x) => {
                    let (r, c) = self.shape(*x);
                    let v = g.data()[0] / (r * c) as f64;
                    accumulate(&mut grads[x.0], Tensor::filled(r, c, v));
                }
            }
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape()).collect(),
        })
    }
}
