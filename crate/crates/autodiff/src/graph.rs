use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{AutodiffError, Result};
use crate::params::{BatchStatUpdate, Gradients, ParamId, ParamStore};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Whether stochastic layers sample (`Train`) or use their expectation (`Eval`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bcast {
    Same,
    Row,
    Col,
    Scalar,
}

impl Bcast {
    #[inline]
    fn index(self, i: usize, j: usize, cols: usize) -> usize {
        match self {
            Bcast::Same => i * cols + j,
            Bcast::Row => j,
            Bcast::Col => i,
            Bcast::Scalar => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinaryKind {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum UnaryKind {
    Tanh,
    Sigmoid,
    Relu,
    Softplus,
}

/// Geometry of a 2-D convolution over a channels-last `[h * w, channels]`
/// feature map with TensorFlow-style "same" padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dGeometry {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl Conv2dGeometry {
    pub fn out_height(&self) -> usize {
        self.height.div_ceil(self.stride)
    }

    pub fn out_width(&self) -> usize {
        self.width.div_ceil(self.stride)
    }

    fn pad(out: usize, input: usize, kernel: usize, stride: usize) -> usize {
        ((out - 1) * stride + kernel).saturating_sub(input) / 2
    }

    pub fn pad_top(&self) -> usize {
        Self::pad(self.out_height(), self.height, self.kernel, self.stride)
    }

    pub fn pad_left(&self) -> usize {
        Self::pad(self.out_width(), self.width, self.kernel, self.stride)
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    Binary { kind: BinaryKind, a: Var, b: Var, bcast: Bcast },
    Affine { x: Var, scale: f64 },
    MatMul { a: Var, b: Var, trans_b: bool },
    Transpose(Var),
    Unary { kind: UnaryKind, x: Var },
    Powf { x: Var, p: f64 },
    ClampMin { x: Var, min: f64 },
    SoftmaxRows(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols { x: Var, start: usize },
    SliceRows { x: Var, start: usize },
    GatherRows { table: Var, ids: Vec<usize> },
    Reshape(Var),
    SumAll(Var),
    SumSquares(Var),
    MeanRows(Var),
    ShiftCols(Var),
    Im2Col1d { x: Var, kernel: usize },
    Im2Col2d { x: Var, geom: Conv2dGeometry },
}

#[derive(Debug, Clone)]
struct Node {
    value: Vec<f64>,
    rows: usize,
    cols: usize,
    op: Op,
    needs_grad: bool,
}

/// A single forward pass recorded for reverse-mode differentiation.
///
/// Every value is a row-major matrix. Parameters are copied in from a
/// [`ParamStore`] once per graph; [`Graph::backward`] hands their gradients
/// back as a [`Gradients`] set so that several graphs (one per utterance)
/// can be evaluated independently and merged in a fixed order.
pub struct Graph {
    nodes: Vec<Node>,
    param_leaves: HashMap<ParamId, Var>,
    mode: Mode,
    rng: ChaCha8Rng,
    batch_stats: Vec<BatchStatUpdate>,
}

impl Graph {
    pub fn new(mode: Mode, seed: u64) -> Self {
        Self {
            nodes: Vec::new(),
            param_leaves: HashMap::new(),
            mode,
            rng: ChaCha8Rng::seed_from_u64(seed),
            batch_stats: Vec::new(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_training(&self) -> bool {
        self.mode == Mode::Train
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn rows(&self, v: Var) -> usize {
        self.nodes[v.0].rows
    }

    pub fn cols(&self, v: Var) -> usize {
        self.nodes[v.0].cols
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    pub fn record_batch_stats(&mut self, update: BatchStatUpdate) {
        self.batch_stats.push(update);
    }

    pub fn take_batch_stats(&mut self) -> Vec<BatchStatUpdate> {
        std::mem::take(&mut self.batch_stats)
    }

    fn push(&mut self, value: Vec<f64>, rows: usize, cols: usize, op: Op, needs_grad: bool) -> Var {
        debug_assert_eq!(value.len(), rows * cols);
        self.nodes.push(Node {
            value,
            rows,
            cols,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn mismatch(&self, op: &'static str, a: Var, b: Var) -> AutodiffError {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        AutodiffError::ShapeMismatch {
            op,
            lhs: vec![ar, ac],
            rhs: vec![br, bc],
        }
    }

    // ---- leaves -------------------------------------------------------

    pub fn constant(&mut self, values: Vec<f64>, rows: usize, cols: usize) -> Result<Var> {
        if values.len() != rows * cols {
            return Err(AutodiffError::BadLength {
                shape: vec![rows, cols],
                expected: rows * cols,
                actual: values.len(),
            });
        }
        Ok(self.push(values, rows, cols, Op::Leaf, false))
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Var {
        self.push(vec![0.0; rows * cols], rows, cols, Op::Leaf, false)
    }

    pub fn full(&mut self, rows: usize, cols: usize, value: f64) -> Var {
        self.push(vec![value; rows * cols], rows, cols, Op::Leaf, false)
    }

    /// Binds a stored parameter. Repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(v) = self.param_leaves.get(&id) {
            return *v;
        }
        let t = store.get(id);
        let (rows, cols) = t.matrix_dims();
        let v = self.push(t.values().to_vec(), rows, cols, Op::Param(id), t.requires_grad());
        self.param_leaves.insert(id, v);
        v
    }

    // ---- elementwise --------------------------------------------------

    fn bcast(&self, op: &'static str, a: Var, b: Var) -> Result<Bcast> {
        let (ar, ac) = self.shape(a);
        let (br, bc) = self.shape(b);
        Ok(if (ar, ac) == (br, bc) {
            Bcast::Same
        } else if (br, bc) == (1, 1) {
            Bcast::Scalar
        } else if br == 1 && bc == ac {
            Bcast::Row
        } else if bc == 1 && br == ar {
            Bcast::Col
        } else {
            return Err(self.mismatch(op, a, b));
        })
    }

    fn binary(&mut self, kind: BinaryKind, name: &'static str, a: Var, b: Var) -> Result<Var> {
        let bcast = self.bcast(name, a, b)?;
        let (rows, cols) = self.shape(a);
        let av = &self.nodes[a.0].value;
        let bv = &self.nodes[b.0].value;
        let mut out = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let x = av[i * cols + j];
                let y = bv[bcast.index(i, j, cols)];
                out.push(match kind {
                    BinaryKind::Add => x + y,
                    BinaryKind::Sub => x - y,
                    BinaryKind::Mul => x * y,
                    BinaryKind::Div => x / y,
                });
            }
        }
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, rows, cols, Op::Binary { kind, a, b, bcast }, ng))
    }

    /// `a + b`; `b` may broadcast as a row, a column or a scalar.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Add, "add", a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Sub, "sub", a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Mul, "mul", a, b)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryKind::Div, "div", a, b)
    }

    /// `scale * x + shift`.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let (rows, cols) = self.shape(x);
        let out = self.nodes[x.0].value.iter().map(|v| scale * v + shift).collect();
        let ng = self.ng(x);
        self.push(out, rows, cols, Op::Affine { x, scale }, ng)
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Var {
        self.affine(x, k, 0.0)
    }

    /// `1 - x`.
    pub fn one_minus(&mut self, x: Var) -> Var {
        self.affine(x, -1.0, 1.0)
    }

    fn unary(&mut self, kind: UnaryKind, x: Var) -> Var {
        let (rows, cols) = self.shape(x);
        let out = self.nodes[x.0]
            .value
            .iter()
            .map(|&v| match kind {
                UnaryKind::Tanh => v.tanh(),
                UnaryKind::Sigmoid => sigmoid(v),
                UnaryKind::Relu => v.max(0.0),
                UnaryKind::Softplus => v.max(0.0) + (-v.abs()).exp().ln_1p(),
            })
            .collect();
        let ng = self.ng(x);
        self.push(out, rows, cols, Op::Unary { kind, x }, ng)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(UnaryKind::Tanh, x)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(UnaryKind::Sigmoid, x)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(UnaryKind::Relu, x)
    }

    /// `ln(1 + e^x)`, computed without overflow.
    pub fn softplus(&mut self, x: Var) -> Var {
        self.unary(UnaryKind::Softplus, x)
    }

    pub fn powf(&mut self, x: Var, p: f64) -> Var {
        let (rows, cols) = self.shape(x);
        let out = self.nodes[x.0].value.iter().map(|v| v.powf(p)).collect();
        let ng = self.ng(x);
        self.push(out, rows, cols, Op::Powf { x, p }, ng)
    }

    /// `max(x, min)`; the gradient is zero where the floor is active.
    pub fn clamp_min(&mut self, x: Var, min: f64) -> Var {
        let (rows, cols) = self.shape(x);
        let out = self.nodes[x.0].value.iter().map(|v| v.max(min)).collect();
        let ng = self.ng(x);
        self.push(out, rows, cols, Op::ClampMin { x, min }, ng)
    }

    // ---- linear algebra ----------------------------------------------

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.shape(a);
        let (k2, n) = self.shape(b);
        if k != k2 {
            return Err(self.mismatch("matmul", a, b));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, &self.nodes[a.0].value, k, 1, &self.nodes[b.0].value, n, 1, &mut out);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, m, n, Op::MatMul { a, b, trans_b: false }, ng))
    }

    /// `a · bᵀ` without materialising the transpose.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.shape(a);
        let (n, k2) = self.shape(b);
        if k != k2 {
            return Err(self.mismatch("matmul_t", a, b));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, &self.nodes[a.0].value, k, 1, &self.nodes[b.0].value, 1, k, &mut out);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, m, n, Op::MatMul { a, b, trans_b: true }, ng))
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let (rows, cols) = self.shape(x);
        let xv = &self.nodes[x.0].value;
        let mut out = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 0..cols {
                out[j * rows + i] = xv[i * cols + j];
            }
        }
        let ng = self.ng(x);
        self.push(out, cols, rows, Op::Transpose(x), ng)
    }

    /// Row-wise softmax. Entries at `-inf`-like values (e.g. `-1e30` masks)
    /// receive exactly zero probability.
    pub fn softmax_rows(&mut self, x: Var) -> Var {
        let (rows, cols) = self.shape(x);
        let xv = &self.nodes[x.0].value;
        let mut out = vec![0.0; rows * cols];
        for i in 0..rows {
            let row = &xv[i * cols..(i + 1) * cols];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let dst = &mut out[i * cols..(i + 1) * cols];
            let mut sum = 0.0;
            for (d, &v) in dst.iter_mut().zip(row) {
                *d = (v - max).exp();
                sum += *d;
            }
            dst.iter_mut().for_each(|d| *d /= sum);
        }
        let ng = self.ng(x);
        self.push(out, rows, cols, Op::SoftmaxRows(x), ng)
    }

    // ---- structure ----------------------------------------------------

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.rows(parts[0]);
        if let Some(bad) = parts.iter().find(|p| self.rows(**p) != rows) {
            return Err(self.mismatch("concat_cols", parts[0], *bad));
        }
        let cols: usize = parts.iter().map(|p| self.cols(*p)).sum();
        let mut out = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for p in parts {
                let n = &self.nodes[p.0];
                out.extend_from_slice(&n.value[i * n.cols..(i + 1) * n.cols]);
            }
        }
        let ng = parts.iter().any(|p| self.ng(*p));
        Ok(self.push(out, rows, cols, Op::ConcatCols(parts.to_vec()), ng))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = self.cols(parts[0]);
        if let Some(bad) = parts.iter().find(|p| self.cols(**p) != cols) {
            return Err(self.mismatch("concat_rows", parts[0], *bad));
        }
        let rows: usize = parts.iter().map(|p| self.rows(*p)).sum();
        let mut out = Vec::with_capacity(rows * cols);
        for p in parts {
            out.extend_from_slice(&self.nodes[p.0].value);
        }
        let ng = parts.iter().any(|p| self.ng(*p));
        Ok(self.push(out, rows, cols, Op::ConcatRows(parts.to_vec()), ng))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (rows, cols) = self.shape(x);
        if start + len > cols {
            return Err(AutodiffError::IndexOutOfRange {
                index: start + len,
                len: cols,
            });
        }
        let xv = &self.nodes[x.0].value;
        let mut out = Vec::with_capacity(rows * len);
        for i in 0..rows {
            out.extend_from_slice(&xv[i * cols + start..i * cols + start + len]);
        }
        let ng = self.ng(x);
        Ok(self.push(out, rows, len, Op::SliceCols { x, start }, ng))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (rows, cols) = self.shape(x);
        if start + len > rows {
            return Err(AutodiffError::IndexOutOfRange {
                index: start + len,
                len: rows,
            });
        }
        let out = self.nodes[x.0].value[start * cols..(start + len) * cols].to_vec();
        let ng = self.ng(x);
        Ok(self.push(out, len, cols, Op::SliceRows { x, start }, ng))
    }

    pub fn row(&mut self, x: Var, i: usize) -> Result<Var> {
        self.slice_rows(x, i, 1)
    }

    /// Embedding lookup: rows of `table` selected by `ids`.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (rows, cols) = self.shape(table);
        let tv = &self.nodes[table.0].value;
        let mut out = Vec::with_capacity(ids.len() * cols);
        for &id in ids {
            if id >= rows {
                return Err(AutodiffError::IndexOutOfRange { index: id, len: rows });
            }
            out.extend_from_slice(&tv[id * cols..(id + 1) * cols]);
        }
        let ng = self.ng(table);
        Ok(self.push(
            out,
            ids.len(),
            cols,
            Op::GatherRows {
                table,
                ids: ids.to_vec(),
            },
            ng,
        ))
    }

    /// Reinterprets the row-major buffer with a new matrix shape.
    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Result<Var> {
        let (r, c) = self.shape(x);
        if r * c != rows * cols {
            return Err(AutodiffError::ShapeMismatch {
                op: "reshape",
                lhs: vec![r, c],
                rhs: vec![rows, cols],
            });
        }
        let out = self.nodes[x.0].value.clone();
        let ng = self.ng(x);
        Ok(self.push(out, rows, cols, Op::Reshape(x), ng))
    }

    /// Moves every column one step right, filling column 0 with zeros.
    pub fn shift_cols(&mut self, x: Var) -> Var {
        let (rows, cols) = self.shape(x);
        let xv = &self.nodes[x.0].value;
        let mut out = vec![0.0; rows * cols];
        for i in 0..rows {
            for j in 1..cols {
                out[i * cols + j] = xv[i * cols + j - 1];
            }
        }
        let ng = self.ng(x);
        self.push(out, rows, cols, Op::ShiftCols(x), ng)
    }

    // ---- reductions ---------------------------------------------------

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.nodes[x.0].value.iter().sum();
        let ng = self.ng(x);
        self.push(vec![s], 1, 1, Op::SumAll(x), ng)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.nodes[x.0].value.len().max(1) as f64;
        let s = self.sum(x);
        self.scale(s, 1.0 / n)
    }

    pub fn sum_squares(&mut self, x: Var) -> Var {
        let s = self.nodes[x.0].value.iter().map(|v| v * v).sum();
        let ng = self.ng(x);
        self.push(vec![s], 1, 1, Op::SumSquares(x), ng)
    }

    /// Column means over rows, shape `[1, cols]`.
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let (rows, cols) = self.shape(x);
        let xv = &self.nodes[x.0].value;
        let mut out = vec![0.0; cols];
        for i in 0..rows {
            for j in 0..cols {
                out[j] += xv[i * cols + j];
            }
        }
        out.iter_mut().for_each(|v| *v /= rows.max(1) as f64);
        let ng = self.ng(x);
        self.push(out, 1, cols, Op::MeanRows(x), ng)
    }

    // ---- convolution helpers ----------------------------------------

    /// Unfolds `[time, channels]` into `[time, kernel * channels]` windows
    /// centred on each step with zero ("same") padding. `kernel` must be odd.
    pub fn im2col_1d(&mut self, x: Var, kernel: usize) -> Result<Var> {
        if kernel % 2 == 0 {
            return Err(AutodiffError::InvalidArgument(format!(
                "same-padded 1-D convolution needs an odd kernel, got {kernel}"
            )));
        }
        let (t, c) = self.shape(x);
        let pad = kernel / 2;
        let xv = &self.nodes[x.0].value;
        let width = kernel * c;
        let mut out = vec![0.0; t * width];
        for step in 0..t {
            for k in 0..kernel {
                let src = step as isize + k as isize - pad as isize;
                if src < 0 || src >= t as isize {
                    continue;
                }
                let src = src as usize;
                out[step * width + k * c..step * width + (k + 1) * c]
                    .copy_from_slice(&xv[src * c..(src + 1) * c]);
            }
        }
        let ng = self.ng(x);
        Ok(self.push(out, t, width, Op::Im2Col1d { x, kernel }, ng))
    }

    /// Unfolds a channels-last `[h * w, c]` map into
    /// `[out_h * out_w, kernel * kernel * c]` patches.
    pub fn im2col_2d(&mut self, x: Var, geom: Conv2dGeometry) -> Result<Var> {
        let (rows, cols) = self.shape(x);
        if rows != geom.height * geom.width || cols != geom.channels {
            return Err(AutodiffError::ShapeMismatch {
                op: "im2col_2d",
                lhs: vec![rows, cols],
                rhs: vec![geom.height, geom.width, geom.channels],
            });
        }
        let (oh, ow) = (geom.out_height(), geom.out_width());
        let (pt, pl) = (geom.pad_top() as isize, geom.pad_left() as isize);
        let c = geom.channels;
        let k = geom.kernel;
        let width = k * k * c;
        let xv = &self.nodes[x.0].value;
        let mut out = vec![0.0; oh * ow * width];
        for_each_patch(geom, oh, ow, pt, pl, |dst_row, kidx, src| {
            let d = dst_row * width + kidx * c;
            out[d..d + c].copy_from_slice(&xv[src * c..(src + 1) * c]);
        });
        let ng = self.ng(x);
        Ok(self.push(out, oh * ow, width, Op::Im2Col2d { x, geom }, ng))
    }

    // ---- stochastic ---------------------------------------------------

    /// Inverted dropout; identity in eval mode.
    pub fn dropout(&mut self, x: Var, p: f64) -> Result<Var> {
        if !(0.0..=1.0).contains(&p) {
            return Err(AutodiffError::InvalidProbability(p));
        }
        if self.mode == Mode::Eval || p == 0.0 {
            return Ok(x);
        }
        let (rows, cols) = self.shape(x);
        let keep = 1.0 - p;
        let mask: Vec<f64> = (0..rows * cols)
            .map(|_| {
                if keep > 0.0 && self.rng.random::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            })
            .collect();
        let m = self.constant(mask, rows, cols)?;
        self.mul(x, m)
    }

    /// Bernoulli(`p`) mask as a constant node.
    pub fn bernoulli_mask(&mut self, rows: usize, cols: usize, p: f64) -> Result<Var> {
        if !(0.0..=1.0).contains(&p) {
            return Err(AutodiffError::InvalidProbability(p));
        }
        let mask = (0..rows * cols)
            .map(|_| if self.rng.random::<f64>() < p { 1.0 } else { 0.0 })
            .collect();
        self.constant(mask, rows, cols)
    }

    // ---- backward -----------------------------------------------------

    /// Reverse sweep from a scalar `loss`. Returns the gradient of every
    /// trainable parameter bound into this graph that the loss depends on.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let (r, c) = self.shape(loss);
        if (r, c) != (1, 1) {
            return Err(AutodiffError::NonScalarLoss(vec![r, c]));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Gradients::default();

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            self.backprop_node(node, &g, &mut grads);
            if let Op::Param(id) = node.op {
                out.by_param.insert(id, g);
            }
        }
        Ok(out)
    }

    /// Convenience wrapper: backward pass accumulated straight into `store`.
    pub fn backward_into(&self, loss: Var, store: &mut ParamStore) -> Result<()> {
        let g = self.backward(loss)?;
        store.accumulate(&g)
    }

    fn backprop_node(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let rows = node.rows;
        let cols = node.cols;
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::Binary { kind, a, b, bcast } => {
                let av = &self.nodes[a.0].value;
                let bv = &self.nodes[b.0].value;
                if self.ng(*a) {
                    let ga = acc(grads, self, *a);
                    for i in 0..rows {
                        for j in 0..cols {
                            let k = i * cols + j;
                            let y = bv[bcast.index(i, j, cols)];
                            ga[k] += match kind {
                                BinaryKind::Add | BinaryKind::Sub => g[k],
                                BinaryKind::Mul => g[k] * y,
                                BinaryKind::Div => g[k] / y,
                            };
                        }
                    }
                }
                if self.ng(*b) {
                    let gb = acc(grads, self, *b);
                    for i in 0..rows {
                        for j in 0..cols {
                            let k = i * cols + j;
                            let bi = bcast.index(i, j, cols);
                            gb[bi] += match kind {
                                BinaryKind::Add => g[k],
                                BinaryKind::Sub => -g[k],
                                BinaryKind::Mul => g[k] * av[k],
                                BinaryKind::Div => -g[k] * av[k] / (bv[bi] * bv[bi]),
                            };
                        }
                    }
                }
            }
            Op::Affine { x, scale } => {
                let gx = acc(grads, self, *x);
                gx.iter_mut().zip(g).for_each(|(d, g)| *d += scale * g);
            }
            Op::MatMul { a, b, trans_b } => {
                let (m, k) = self.shape(*a);
                let n = cols;
                let av = &self.nodes[a.0].value;
                let bv = &self.nodes[b.0].value;
                if self.ng(*a) {
                    let ga = acc(grads, self, *a);
                    if *trans_b {
                        // dA = dC · B, B is [n, k]
                        gemm(m, n, k, g, n, 1, bv, k, 1, ga);
                    } else {
                        // dA = dC · Bᵀ, B is [k, n]
                        gemm(m, n, k, g, n, 1, bv, 1, n, ga);
                    }
                }
                if self.ng(*b) {
                    let gb = acc(grads, self, *b);
                    if *trans_b {
                        // dB = dCᵀ · A  -> [n, k]
                        gemm(n, m, k, g, 1, n, av, k, 1, gb);
                    } else {
                        // dB = Aᵀ · dC  -> [k, n]
                        gemm(k, m, n, av, 1, k, g, n, 1, gb);
                    }
                }
            }
            Op::Transpose(x) => {
                let gx = acc(grads, self, *x);
                // node is [rows, cols] = transpose of x [cols, rows]
                for i in 0..rows {
                    for j in 0..cols {
                        gx[j * rows + i] += g[i * cols + j];
                    }
                }
            }
            Op::Unary { kind, x } => {
                let y = &node.value;
                let xv = &self.nodes[x.0].value;
                let gx = acc(grads, self, *x);
                for k in 0..g.len() {
                    gx[k] += g[k]
                        * match kind {
                            UnaryKind::Tanh => 1.0 - y[k] * y[k],
                            UnaryKind::Sigmoid => y[k] * (1.0 - y[k]),
                            UnaryKind::Relu => {
                                if xv[k] > 0.0 {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                            UnaryKind::Softplus => sigmoid(xv[k]),
                        };
                }
            }
            Op::Powf { x, p } => {
                let xv = &self.nodes[x.0].value;
                let gx = acc(grads, self, *x);
                for k in 0..g.len() {
                    gx[k] += g[k] * p * xv[k].powf(p - 1.0);
                }
            }
            Op::ClampMin { x, min } => {
                let xv = &self.nodes[x.0].value;
                let gx = acc(grads, self, *x);
                for k in 0..g.len() {
                    if xv[k] > *min {
                        gx[k] += g[k];
                    }
                }
            }
            Op::SoftmaxRows(x) => {
                let y = &node.value;
                let gx = acc(grads, self, *x);
                for i in 0..rows {
                    let r = i * cols..(i + 1) * cols;
                    let dot: f64 = y[r.clone()].iter().zip(&g[r.clone()]).map(|(a, b)| a * b).sum();
                    for k in r {
                        gx[k] += y[k] * (g[k] - dot);
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for p in parts {
                    let pc = self.cols(*p);
                    if self.ng(*p) {
                        let gp = acc(grads, self, *p);
                        for i in 0..rows {
                            for j in 0..pc {
                                gp[i * pc + j] += g[i * cols + offset + j];
                            }
                        }
                    }
                    offset += pc;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let n = self.nodes[p.0].value.len();
                    if self.ng(*p) {
                        let gp = acc(grads, self, *p);
                        gp.iter_mut().zip(&g[offset..offset + n]).for_each(|(d, s)| *d += s);
                    }
                    offset += n;
                }
            }
            Op::SliceCols { x, start } => {
                let xc = self.cols(*x);
                let gx = acc(grads, self, *x);
                for i in 0..rows {
                    for j in 0..cols {
                        gx[i * xc + start + j] += g[i * cols + j];
                    }
                }
            }
            Op::SliceRows { x, start } => {
                let gx = acc(grads, self, *x);
                let off = start * cols;
                gx[off..off + g.len()].iter_mut().zip(g).for_each(|(d, s)| *d += s);
            }
            Op::GatherRows { table, ids } => {
                let gt = acc(grads, self, *table);
                for (r, &id) in ids.iter().enumerate() {
                    for j in 0..cols {
                        gt[id * cols + j] += g[r * cols + j];
                    }
                }
            }
            Op::Reshape(x) => {
                let gx = acc(grads, self, *x);
                gx.iter_mut().zip(g).for_each(|(d, s)| *d += s);
            }
            Op::SumAll(x) => {
                let gx = acc(grads, self, *x);
                gx.iter_mut().for_each(|d| *d += g[0]);
            }
            Op::SumSquares(x) => {
                let xv = &self.nodes[x.0].value;
                let gx = acc(grads, self, *x);
                gx.iter_mut().zip(xv).for_each(|(d, v)| *d += 2.0 * v * g[0]);
            }
            Op::MeanRows(x) => {
                let xr = self.rows(*x);
                let gx = acc(grads, self, *x);
                let inv = 1.0 / xr.max(1) as f64;
                for i in 0..xr {
                    for j in 0..cols {
                        gx[i * cols + j] += g[j] * inv;
                    }
                }
            }
            Op::ShiftCols(x) => {
                let gx = acc(grads, self, *x);
                for i in 0..rows {
                    for j in 1..cols {
                        gx[i * cols + j - 1] += g[i * cols + j];
                    }
                }
            }
            Op::Im2Col1d { x, kernel } => {
                let (t, c) = self.shape(*x);
                let pad = kernel / 2;
                let gx = acc(grads, self, *x);
                for step in 0..t {
                    for k in 0..*kernel {
                        let src = step as isize + k as isize - pad as isize;
                        if src < 0 || src >= t as isize {
                            continue;
                        }
                        let src = src as usize;
                        for ch in 0..c {
                            gx[src * c + ch] += g[step * cols + k * c + ch];
                        }
                    }
                }
            }
            Op::Im2Col2d { x, geom } => {
                let (oh, ow) = (geom.out_height(), geom.out_width());
                let (pt, pl) = (geom.pad_top() as isize, geom.pad_left() as isize);
                let c = geom.channels;
                let gx = acc(grads, self, *x);
                for_each_patch(*geom, oh, ow, pt, pl, |dst_row, kidx, src| {
                    let d = dst_row * cols + kidx * c;
                    for ch in 0..c {
                        gx[src * c + ch] += g[d + ch];
                    }
                });
            }
        }
    }
}

fn for_each_patch(
    geom: Conv2dGeometry,
    oh: usize,
    ow: usize,
    pt: isize,
    pl: isize,
    mut f: impl FnMut(usize, usize, usize),
) {
    let k = geom.kernel;
    for oy in 0..oh {
        for ox in 0..ow {
            let dst_row = oy * ow + ox;
            for ky in 0..k {
                let sy = (oy * geom.stride + ky) as isize - pt;
                if sy < 0 || sy >= geom.height as isize {
                    continue;
                }
                for kx in 0..k {
                    let sx = (ox * geom.stride + kx) as isize - pl;
                    if sx < 0 || sx >= geom.width as isize {
                        continue;
                    }
                    f(dst_row, ky * k + kx, sy as usize * geom.width + sx as usize);
                }
            }
        }
    }
}

fn acc<'a>(grads: &'a mut [Option<Vec<f64>>], graph: &Graph, v: Var) -> &'a mut Vec<f64> {
    grads[v.0].get_or_insert_with(|| vec![0.0; graph.nodes[v.0].value.len()])
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `c += a · b` for an `m×k` by `k×n` product with arbitrary strides on the
/// inputs and a dense row-major output.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], rsa: usize, csa: usize, b: &[f64], rsb: usize, csb: usize, c: &mut [f64]) {
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    assert!(a.len() > (m - 1) * rsa + (k - 1) * csa);
    assert!(b.len() > (k - 1) * rsb + (n - 1) * csb);
    assert!(c.len() >= m * n);
    // SAFETY: the asserts above bound every index dgemm touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
