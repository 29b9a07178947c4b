//! Dense matrices and a reverse-mode differentiation tape.
//!
//! Values are `f64` row-major matrices. A [`Tape`] records operations as
//! they are applied; node indices are a topological order, so
//! [`Tape::backward`] is a single reverse sweep. Tapes are single-use:
//! build a fresh one per forward pass.
//!
//! ```
//! use mu2x_core::tensor::{Tape, Tensor};
//!
//! let x = Tensor::from_vec(1, 2, vec![1.0, 2.0]);
//! let w = Tensor::from_vec(2, 1, vec![3.0, -1.0]);
//! let mut tape = Tape::new();
//! let xv = tape.constant(x);
//! let wv = tape.leaf(w);
//! let y = tape.matmul(xv, wv).unwrap();
//! let loss = tape.reduce_sum(y);
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(wv).unwrap().as_slice(), &[1.0, 2.0]);
//! ```

use alloc::borrow::Cow;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TensorError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("masked softmax: row {row} has an empty mask")]
    EmptyMask { row: usize },
    #[error("{op}: index {index} out of range for length {len}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        len: usize,
    },
    #[error("{op}: argument outside the domain")]
    Domain { op: &'static str },
    #[error("loss must be a 1x1 tensor, got {0:?}")]
    NotScalarLoss((usize, usize)),
    #[error("backward already ran on this tape")]
    TapeReused,
    #[error("variable is not a differentiable input of this tape")]
    InputNotOnTape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "tensor data length");
        Tensor { rows, cols, data }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor::from_vec(1, 1, vec![v])
    }

    pub fn row_vector(v: &[f64]) -> Self {
        Tensor::from_vec(1, v.len(), v.to_vec())
    }

    pub fn from_f32(rows: usize, cols: usize, data: &[f32]) -> Self {
        Tensor::from_vec(rows, cols, data.iter().map(|&v| v as f64).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// The single entry of a 1x1 tensor.
    pub fn item(&self) -> f64 {
        self.data[0]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn transpose(&self) -> Tensor {
        let mut t = Tensor::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        if self.cols != other.rows {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut out = Tensor::zeros(self.rows, other.cols);
        matmul_acc(self, other, &mut out);
        Ok(out)
    }

    /// Copy of the rows listed in `idx`, in that order.
    pub fn select_rows(&self, idx: &[usize]) -> Tensor {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Tensor::from_vec(idx.len(), self.cols, data)
    }

    fn add_assign(&mut self, other: &Tensor) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// `out += op(a) · op(b)` through `dgemm`; operands are described by
/// `(rows, cols, row stride, col stride)` so transposes need no copy.
fn gemm_acc(a: &Tensor, at: bool, b: &Tensor, bt: bool, out: &mut Tensor) {
    let view = |t: &Tensor, tr: bool| {
        let (r, c, rs, cs) = (t.rows, t.cols, t.cols as isize, 1isize);
        if tr { (c, r, cs, rs) } else { (r, c, rs, cs) }
    };
    let (m, k, rsa, csa) = view(a, at);
    let (_, n, rsb, csb) = view(b, bt);
    debug_assert_eq!((out.rows, out.cols), (m, n));
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    // SAFETY: the strides describe in-bounds row-major views of `a`, `b`
    // and `out`, and `out` does not alias either input.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            1.0,
            out.data.as_mut_ptr(),
            out.cols as isize,
            1,
        );
    }
}

/// `out += a · b`.
fn matmul_acc(a: &Tensor, b: &Tensor, out: &mut Tensor) {
    gemm_acc(a, false, b, false, out);
}

/// `out += aᵀ · b`.
fn matmul_tn_acc(a: &Tensor, b: &Tensor, out: &mut Tensor) {
    gemm_acc(a, true, b, false, out);
}

/// `out += a · bᵀ`.
fn matmul_nt_acc(a: &Tensor, b: &Tensor, out: &mut Tensor) {
    gemm_acc(a, false, b, true, out);
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Input,
    MatMul(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    ScaleRows(Var, Var),
    ScalarMul(Var, f64),
    LeakyRelu(Var, f64),
    Elu(Var),
    Exp(Var),
    Log(Var),
    RowSoftmax(Var),
    LogRowSoftmax(Var),
    ReduceSum(Var),
    GatherRows(Var, Vec<usize>),
    ScatterAddRows(Var, Vec<usize>),
    SegmentSoftmax(Var, Vec<usize>),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
}

struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// `None` when no gradient reached `v` (constants, unused inputs).
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

/// Operation recorder. `'a` lets large constant inputs be borrowed instead
/// of copied onto the tape.
#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
    used: bool,
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            used: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'a, Tensor>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn derived(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let rg = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push(Cow::Owned(value), op, rg)
    }

    /// A differentiable input (parameter or attributed input).
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(Cow::Owned(t), Op::Input, true)
    }

    pub fn leaf_ref(&mut self, t: &'a Tensor) -> Var {
        self.push(Cow::Borrowed(t), Op::Input, true)
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(Cow::Owned(t), Op::Input, false)
    }

    pub fn constant_ref(&mut self, t: &'a Tensor) -> Var {
        self.push(Cow::Borrowed(t), Op::Input, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.derived(out, Op::MatMul(a, b), &[a, b]))
    }

    fn broadcast_ok(&self, a: Var, b: Var) -> bool {
        let (sa, sb) = (self.shape(a), self.shape(b));
        sa == sb || (sb.0 == 1 && sb.1 == sa.1)
    }

    /// Elementwise sum; `b` may be a `1 × cols` row added to every row of `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        if !self.broadcast_ok(a, b) {
            return Err(TensorError::ShapeMismatch {
                op: "add",
                left: self.shape(a),
                right: self.shape(b),
            });
        }
        let av = self.value(a);
        let bv = self.value(b);
        let mut out = av.clone();
        let cols = av.cols.max(1);
        for (i, o) in out.data.iter_mut().enumerate() {
            *o += if bv.rows == av.rows { bv.data[i] } else { bv.data[i % cols] };
        }
        Ok(self.derived(out, Op::Add(a, b), &[a, b]))
    }

    /// Elementwise product with the same broadcasting rule as [`Tape::add`].
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        if !self.broadcast_ok(a, b) {
            return Err(TensorError::ShapeMismatch {
                op: "mul",
                left: self.shape(a),
                right: self.shape(b),
            });
        }
        let av = self.value(a);
        let bv = self.value(b);
        let mut out = av.clone();
        let cols = av.cols.max(1);
        for (i, o) in out.data.iter_mut().enumerate() {
            *o *= if bv.rows == av.rows { bv.data[i] } else { bv.data[i % cols] };
        }
        Ok(self.derived(out, Op::Mul(a, b), &[a, b]))
    }

    /// Multiplies row `i` of `a` by `scale[i]`; `scale` is `rows × 1`.
    pub fn scale_rows(&mut self, a: Var, scale: Var) -> Result<Var, TensorError> {
        let (sa, ss) = (self.shape(a), self.shape(scale));
        if ss != (sa.0, 1) {
            return Err(TensorError::ShapeMismatch {
                op: "scale_rows",
                left: sa,
                right: ss,
            });
        }
        let mut out = self.value(a).clone();
        let s = self.value(scale);
        for r in 0..sa.0 {
            let f = s.data[r];
            for v in out.row_mut(r) {
                *v *= f;
            }
        }
        Ok(self.derived(out, Op::ScaleRows(a, scale), &[a, scale]))
    }

    pub fn scalar_mul(&mut self, a: Var, s: f64) -> Var {
        let mut out = self.value(a).clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        self.derived(out, Op::ScalarMul(a, s), &[a])
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let mut out = self.value(a).clone();
        out.data.iter_mut().for_each(|v| {
            if *v <= 0.0 {
                *v *= slope
            }
        });
        self.derived(out, Op::LeakyRelu(a, slope), &[a])
    }

    pub fn elu(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        out.data.iter_mut().for_each(|v| {
            if *v <= 0.0 {
                *v = math::expm1(*v)
            }
        });
        self.derived(out, Op::Elu(a), &[a])
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        out.data.iter_mut().for_each(|v| *v = math::exp(*v));
        self.derived(out, Op::Exp(a), &[a])
    }

    /// Natural log; every entry must be positive.
    pub fn log(&mut self, a: Var) -> Result<Var, TensorError> {
        let mut out = self.value(a).clone();
        if out.data.iter().any(|v| !(*v > 0.0)) {
            return Err(TensorError::Domain { op: "log" });
        }
        out.data.iter_mut().for_each(|v| *v = math::ln(*v));
        Ok(self.derived(out, Op::Log(a), &[a]))
    }

    pub fn row_softmax(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for r in 0..out.rows {
            softmax_in_place(out.row_mut(r));
        }
        self.derived(out, Op::RowSoftmax(a), &[a])
    }

    /// Row softmax restricted to `mask` (row-major, same shape as `a`):
    /// entries outside the mask get probability zero.
    pub fn masked_row_softmax(&mut self, a: Var, mask: &[bool]) -> Result<Var, TensorError> {
        let (rows, cols) = self.shape(a);
        if mask.len() != rows * cols {
            return Err(TensorError::ShapeMismatch {
                op: "masked_row_softmax",
                left: (rows, cols),
                right: (1, mask.len()),
            });
        }
        let mut out = self.value(a).clone();
        for r in 0..rows {
            let m = &mask[r * cols..(r + 1) * cols];
            if !m.iter().any(|&b| b) {
                return Err(TensorError::EmptyMask { row: r });
            }
            let row = out.row_mut(r);
            let max = row
                .iter()
                .zip(m)
                .filter(|(_, &b)| b)
                .map(|(v, _)| *v)
                .fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (v, &b) in row.iter_mut().zip(m) {
                *v = if b { math::exp(*v - max) } else { 0.0 };
                z += *v;
            }
            row.iter_mut().for_each(|v| *v /= z);
        }
        // Masked entries have zero output, so the plain softmax backward
        // rule applies unchanged.
        Ok(self.derived(out, Op::RowSoftmax(a), &[a]))
    }

    pub fn log_row_softmax(&mut self, a: Var) -> Var {
        let mut out = self.value(a).clone();
        for r in 0..out.rows {
            let row = out.row_mut(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + math::ln(row.iter().map(|v| math::exp(v - max)).sum::<f64>());
            row.iter_mut().for_each(|v| *v -= lse);
        }
        self.derived(out, Op::LogRowSoftmax(a), &[a])
    }

    /// Sum of all entries, as a 1x1 tensor.
    pub fn reduce_sum(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.derived(Tensor::scalar(s), Op::ReduceSum(a), &[a])
    }

    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var, TensorError> {
        let av = self.value(a);
        if let Some(&bad) = idx.iter().find(|&&i| i >= av.rows) {
            return Err(TensorError::IndexOutOfRange {
                op: "gather_rows",
                index: bad,
                len: av.rows,
            });
        }
        let out = av.select_rows(idx);
        Ok(self.derived(out, Op::GatherRows(a, idx.to_vec()), &[a]))
    }

    /// Row `r` of `a` is added into output row `idx[r]`; the output has
    /// `out_rows` rows.
    pub fn scatter_add_rows(&mut self, a: Var, idx: &[usize], out_rows: usize) -> Result<Var, TensorError> {
        let av = self.value(a);
        if idx.len() != av.rows {
            return Err(TensorError::ShapeMismatch {
                op: "scatter_add_rows",
                left: av.shape(),
                right: (idx.len(), 1),
            });
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= out_rows) {
            return Err(TensorError::IndexOutOfRange {
                op: "scatter_add_rows",
                index: bad,
                len: out_rows,
            });
        }
        let mut out = Tensor::zeros(out_rows, av.cols);
        for (r, &t) in idx.iter().enumerate() {
            for (o, v) in out.row_mut(t).iter_mut().zip(av.row(r)) {
                *o += v;
            }
        }
        Ok(self.derived(out, Op::ScatterAddRows(a, idx.to_vec()), &[a]))
    }

    /// Softmax down each column within row segments. `offsets` has one
    /// entry per segment plus a final `rows` entry; segments must be
    /// non-empty.
    pub fn segment_softmax(&mut self, a: Var, offsets: &[usize]) -> Result<Var, TensorError> {
        let av = self.value(a);
        let valid = offsets.first() == Some(&0)
            && offsets.last() == Some(&av.rows)
            && offsets.windows(2).all(|w| w[0] <= w[1]);
        if !valid {
            return Err(TensorError::ShapeMismatch {
                op: "segment_softmax",
                left: av.shape(),
                right: (offsets.len(), 1),
            });
        }
        if let Some(seg) = offsets.windows(2).position(|w| w[0] == w[1]) {
            return Err(TensorError::EmptyMask { row: seg });
        }
        let mut out = av.clone();
        segment_softmax_in_place(&mut out, offsets);
        Ok(self.derived(out, Op::SegmentSoftmax(a, offsets.to_vec()), &[a]))
    }

    /// Stacks the inputs vertically.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let cols = parts.first().map(|&p| self.shape(p).1).unwrap_or(0);
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let v = self.value(p);
            if v.cols != cols {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_rows",
                    left: (rows, cols),
                    right: v.shape(),
                });
            }
            rows += v.rows;
            data.extend_from_slice(&v.data);
        }
        let out = Tensor::from_vec(rows, cols, data);
        Ok(self.derived(out, Op::ConcatRows(parts.to_vec()), parts))
    }

    /// Places the inputs side by side.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let rows = parts.first().map(|&p| self.shape(p).0).unwrap_or(0);
        let mut cols = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.0 != rows {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_cols",
                    left: (rows, cols),
                    right: s,
                });
            }
            cols += s.1;
        }
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut c0 = 0;
            for &p in parts {
                let v = self.value(p);
                out.data[r * cols + c0..r * cols + c0 + v.cols].copy_from_slice(v.row(r));
                c0 += v.cols;
            }
        }
        Ok(self.derived(out, Op::ConcatCols(parts.to_vec()), parts))
    }

    /// Propagates `d loss` back to every differentiable node.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients, TensorError> {
        if self.used {
            return Err(TensorError::TapeReused);
        }
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(TensorError::NotScalarLoss(shape));
        }
        self.used = true;
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// `∂output/∂input` for a differentiable input of this tape.
    pub fn grad_wrt_input(&mut self, output: Var, input: Var) -> Result<Tensor, TensorError> {
        let node = self.nodes.get(input.0).ok_or(TensorError::InputNotOnTape)?;
        if !node.requires_grad || !matches!(node.op, Op::Input) {
            return Err(TensorError::InputNotOnTape);
        }
        let (r, c) = node.value.shape();
        let mut grads = self.backward(output)?;
        Ok(grads.take(input).unwrap_or_else(|| Tensor::zeros(r, c)))
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let acc = |grads: &mut [Option<Tensor>], v: Var, t: Tensor| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&t),
            slot @ None => *slot = Some(t),
        };
        let y = &*self.nodes[i].value;
        match &self.nodes[i].op {
            Op::Input => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.needs(*a) {
                    let mut da = Tensor::zeros(av.rows, av.cols);
                    matmul_nt_acc(g, bv, &mut da);
                    acc(grads, *a, da);
                }
                if self.needs(*b) {
                    let mut db = Tensor::zeros(bv.rows, bv.cols);
                    matmul_tn_acc(av, g, &mut db);
                    acc(grads, *b, db);
                }
            }
            Op::Add(a, b) => {
                if self.needs(*a) {
                    acc(grads, *a, g.clone());
                }
                if self.needs(*b) {
                    acc(grads, *b, reduce_to(g, self.shape(*b)));
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let cols = av.cols.max(1);
                let bat = |i: usize| if bv.rows == av.rows { bv.data[i] } else { bv.data[i % cols] };
                if self.needs(*a) {
                    let mut da = g.clone();
                    da.data.iter_mut().enumerate().for_each(|(i, v)| *v *= bat(i));
                    acc(grads, *a, da);
                }
                if self.needs(*b) {
                    let mut prod = g.clone();
                    prod.data.iter_mut().zip(&av.data).for_each(|(v, x)| *v *= x);
                    acc(grads, *b, reduce_to(&prod, bv.shape()));
                }
            }
            Op::ScaleRows(a, s) => {
                let (av, sv) = (self.value(*a), self.value(*s));
                if self.needs(*a) {
                    let mut da = g.clone();
                    for r in 0..da.rows {
                        let f = sv.data[r];
                        da.row_mut(r).iter_mut().for_each(|v| *v *= f);
                    }
                    acc(grads, *a, da);
                }
                if self.needs(*s) {
                    let mut ds = Tensor::zeros(sv.rows, 1);
                    for r in 0..av.rows {
                        ds.data[r] = g.row(r).iter().zip(av.row(r)).map(|(x, y)| x * y).sum();
                    }
                    acc(grads, *s, ds);
                }
            }
            Op::ScalarMul(a, s) => {
                let mut da = g.clone();
                da.data.iter_mut().for_each(|v| *v *= s);
                acc(grads, *a, da);
            }
            Op::LeakyRelu(a, slope) => {
                let x = self.value(*a);
                let mut da = g.clone();
                da.data.iter_mut().zip(&x.data).for_each(|(v, x)| {
                    if *x <= 0.0 {
                        *v *= slope
                    }
                });
                acc(grads, *a, da);
            }
            Op::Elu(a) => {
                let x = self.value(*a);
                let mut da = g.clone();
                for ((v, x), y) in da.data.iter_mut().zip(&x.data).zip(&y.data) {
                    if *x <= 0.0 {
                        *v *= y + 1.0;
                    }
                }
                acc(grads, *a, da);
            }
            Op::Exp(a) => {
                let mut da = g.clone();
                da.data.iter_mut().zip(&y.data).for_each(|(v, y)| *v *= y);
                acc(grads, *a, da);
            }
            Op::Log(a) => {
                let x = self.value(*a);
                let mut da = g.clone();
                da.data.iter_mut().zip(&x.data).for_each(|(v, x)| *v /= x);
                acc(grads, *a, da);
            }
            Op::RowSoftmax(a) => {
                let mut da = g.clone();
                for r in 0..y.rows {
                    let yr = y.row(r);
                    let dot: f64 = g.row(r).iter().zip(yr).map(|(a, b)| a * b).sum();
                    for (v, yv) in da.row_mut(r).iter_mut().zip(yr) {
                        *v = yv * (*v - dot);
                    }
                }
                acc(grads, *a, da);
            }
            Op::LogRowSoftmax(a) => {
                let mut da = g.clone();
                for r in 0..y.rows {
                    let gs: f64 = g.row(r).iter().sum();
                    for (v, ly) in da.row_mut(r).iter_mut().zip(y.row(r)) {
                        *v -= math::exp(*ly) * gs;
                    }
                }
                acc(grads, *a, da);
            }
            Op::ReduceSum(a) => {
                let (r, c) = self.shape(*a);
                acc(grads, *a, Tensor::from_vec(r, c, vec![g.item(); r * c]));
            }
            Op::GatherRows(a, idx) => {
                let (r, c) = self.shape(*a);
                let mut da = Tensor::zeros(r, c);
                for (k, &src) in idx.iter().enumerate() {
                    for (o, v) in da.row_mut(src).iter_mut().zip(g.row(k)) {
                        *o += v;
                    }
                }
                acc(grads, *a, da);
            }
            Op::ScatterAddRows(a, idx) => {
                acc(grads, *a, g.select_rows(idx));
            }
            Op::SegmentSoftmax(a, offsets) => {
                let mut da = g.clone();
                let cols = y.cols;
                for w in offsets.windows(2) {
                    for c in 0..cols {
                        let dot: f64 = (w[0]..w[1]).map(|r| g.get(r, c) * y.get(r, c)).sum();
                        for r in w[0]..w[1] {
                            da.set(r, c, y.get(r, c) * (g.get(r, c) - dot));
                        }
                    }
                }
                acc(grads, *a, da);
            }
            Op::ConcatRows(parts) => {
                let mut r0 = 0;
                for &p in parts {
                    let (r, c) = self.shape(p);
                    if self.needs(p) {
                        let part = Tensor::from_vec(r, c, g.data[r0 * c..(r0 + r) * c].to_vec());
                        acc(grads, p, part);
                    }
                    r0 += r;
                }
            }
            Op::ConcatCols(parts) => {
                let mut c0 = 0;
                for &p in parts {
                    let (r, c) = self.shape(p);
                    if self.needs(p) {
                        let mut part = Tensor::zeros(r, c);
                        for row in 0..r {
                            part.row_mut(row).copy_from_slice(&g.row(row)[c0..c0 + c]);
                        }
                        acc(grads, p, part);
                    }
                    c0 += c;
                }
            }
        }
    }
}

/// Sums `g` down to `shape` (identity or a row-broadcast reduction).
fn reduce_to(g: &Tensor, shape: (usize, usize)) -> Tensor {
    if g.shape() == shape {
        return g.clone();
    }
    let mut out = Tensor::zeros(1, g.cols);
    for r in 0..g.rows {
        for (o, v) in out.data.iter_mut().zip(g.row(r)) {
            *o += v;
        }
    }
    out
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for v in row.iter_mut() {
        *v = math::exp(*v - max);
        z += *v;
    }
    row.iter_mut().for_each(|v| *v /= z);
}

fn segment_softmax_in_place(t: &mut Tensor, offsets: &[usize]) {
    let cols = t.cols;
    for w in offsets.windows(2) {
        for c in 0..cols {
            let max = (w[0]..w[1]).map(|r| t.get(r, c)).fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for r in w[0]..w[1] {
                let e = math::exp(t.get(r, c) - max);
                t.set(r, c, e);
                z += e;
            }
            for r in w[0]..w[1] {
                let v = t.get(r, c) / z;
                t.set(r, c, v);
            }
        }
    }
}
