//! Define-by-run tape of 2-D tensor operations with reverse-mode backward.
//!
//! Values are row-major matrices. Neighborhood-structured data (M points ×
//! k neighbors × C channels) is laid out as an (M·k)×C matrix of k-row
//! groups; the `group_*` operations reduce or normalize over those groups.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TensorId(pub(crate) usize);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapeError {
    pub op: &'static str,
    pub detail: String,
}

impl fmt::Display for ShapeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.op, self.detail)
    }
}

fn shape_err(op: &'static str, detail: String) -> ShapeError {
    ShapeError { op, detail }
}

/// Batch-normalization statistics source.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnMode {
    /// Normalize by the statistics of the rows being processed (training).
    Batch,
    /// Normalize by frozen running statistics (inference).
    Running,
}

/// Neighbor-reduction flavor used by perception blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduction {
    Mean,
    Max,
    MeanMax,
    Attentive,
}

impl Reduction {
    pub fn parse(s: &str) -> Option<Reduction> {
        match s {
            "mean" => Some(Reduction::Mean),
            "max" => Some(Reduction::Max),
            "mean_max" => Some(Reduction::MeanMax),
            "attentive" => Some(Reduction::Attentive),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Reduction::Mean => "mean",
            Reduction::Max => "max",
            Reduction::MeanMax => "mean_max",
            Reduction::Attentive => "attentive",
        }
    }
}

enum Op<T> {
    Leaf,
    MatMul {
        a: TensorId,
        b: TensorId,
    },
    AddBias {
        x: TensorId,
        b: TensorId,
    },
    Relu {
        x: TensorId,
    },
    BatchNorm {
        x: TensorId,
        gamma: TensorId,
        beta: TensorId,
        mode: BnMode,
        xhat: Vec<T>,
        inv_std: Vec<T>,
        batch_mean: Vec<T>,
        batch_var: Vec<T>,
    },
    ConcatCols {
        xs: Vec<TensorId>,
    },
    GatherRows {
        x: TensorId,
        idx: Vec<u32>,
    },
    GroupMax {
        x: TensorId,
        k: usize,
        argmax: Vec<u32>,
    },
    GroupMean {
        x: TensorId,
        k: usize,
    },
    GroupSum {
        x: TensorId,
        k: usize,
    },
    GroupSoftmax {
        x: TensorId,
        k: usize,
    },
    RowSoftmax {
        x: TensorId,
    },
    ScaleRows {
        x: TensorId,
        s: TensorId,
    },
    Add {
        a: TensorId,
        b: TensorId,
    },
    Mul {
        a: TensorId,
        b: TensorId,
    },
    Interp {
        x: TensorId,
        stencils: Vec<Vec<(u32, T)>>,
    },
    CrossEntropy {
        logits: TensorId,
        labels: Vec<u8>,
        probs: Vec<T>,
    },
    DotConst {
        x: TensorId,
        w: Vec<T>,
    },
}

struct Node<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
    needs_grad: bool,
    op: Op<T>,
}

/// Operation tape. One forward pass builds one graph; [`Graph::backward`]
/// runs once, after which gradients are read out and the graph is dropped.
pub struct Graph<T: Scalar> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Vec<T>>>,
    backward_done: bool,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            grads: Vec::new(),
            backward_done: false,
        }
    }

    fn push(&mut self, rows: usize, cols: usize, data: Vec<T>, needs_grad: bool, op: Op<T>) -> TensorId {
        debug_assert_eq!(data.len(), rows * cols);
        self.nodes.push(Node {
            rows,
            cols,
            data,
            needs_grad,
            op,
        });
        self.grads.push(None);
        TensorId(self.nodes.len() - 1)
    }

    pub fn rows(&self, id: TensorId) -> usize {
        self.nodes[id.0].rows
    }

    pub fn cols(&self, id: TensorId) -> usize {
        self.nodes[id.0].cols
    }

    pub fn data(&self, id: TensorId) -> &[T] {
        &self.nodes[id.0].data
    }

    /// Gradient of the last backward pass, if this node tracked one.
    pub fn grad(&self, id: TensorId) -> Option<&[T]> {
        self.grads[id.0].as_deref()
    }

    /// Batch statistics observed by a `Batch`-mode normalization node,
    /// as (mean, variance) per column.
    pub fn batch_stats(&self, id: TensorId) -> Option<(&[T], &[T])> {
        match &self.nodes[id.0].op {
            Op::BatchNorm {
                mode: BnMode::Batch,
                batch_mean,
                batch_var,
                ..
            } => Some((batch_mean, batch_var)),
            _ => None,
        }
    }

    /// Constant input; never receives a gradient.
    pub fn constant(&mut self, rows: usize, cols: usize, data: Vec<T>) -> TensorId {
        self.push(rows, cols, data, false, Op::Leaf)
    }

    /// Differentiable input (a parameter lease or a tracked activation).
    pub fn variable(&mut self, rows: usize, cols: usize, data: Vec<T>) -> TensorId {
        self.push(rows, cols, data, true, Op::Leaf)
    }

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, ShapeError> {
        let (m, ka) = (self.rows(a), self.cols(a));
        let (kb, n) = (self.rows(b), self.cols(b));
        if ka != kb {
            return Err(shape_err("matmul", format!("inner dims {ka} vs {kb}")));
        }
        let mut out = vec![T::ZERO; m * n];
        let (ad, bd) = (&self.nodes[a.0].data, &self.nodes[b.0].data);
        for i in 0..m {
            let arow = &ad[i * ka..(i + 1) * ka];
            let orow = &mut out[i * n..(i + 1) * n];
            for (p, &av) in arow.iter().enumerate() {
                let brow = &bd[p * n..(p + 1) * n];
                orow.iter_mut().zip(brow).for_each(|(o, &bv)| *o += av * bv);
            }
        }
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(m, n, out, needs, Op::MatMul { a, b }))
    }

    pub fn add_bias(&mut self, x: TensorId, b: TensorId) -> Result<TensorId, ShapeError> {
        let (m, c) = (self.rows(x), self.cols(x));
        if self.rows(b) != 1 || self.cols(b) != c {
            return Err(shape_err(
                "add_bias",
                format!("bias is {}×{}, expected 1×{c}", self.rows(b), self.cols(b)),
            ));
        }
        let (xd, bd) = (&self.nodes[x.0].data, &self.nodes[b.0].data);
        let mut out = Vec::with_capacity(m * c);
        for i in 0..m {
            let row = &xd[i * c..(i + 1) * c];
            out.extend(row.iter().zip(bd.iter()).map(|(&v, &bv)| v + bv));
        }
        let needs = self.needs(x) || self.needs(b);
        Ok(self.push(m, c, out, needs, Op::AddBias { x, b }))
    }

    pub fn relu(&mut self, x: TensorId) -> TensorId {
        let (m, c) = (self.rows(x), self.cols(x));
        let out: Vec<T> = self.nodes[x.0]
            .data
            .iter()
            .map(|&v| if v > T::ZERO { v } else { T::ZERO })
            .collect();
        let needs = self.needs(x);
        self.push(m, c, out, needs, Op::Relu { x })
    }

    /// Column-wise normalization: in `Batch` mode by the statistics of the
    /// input rows, in `Running` mode by caller-supplied frozen statistics.
    pub fn batch_norm(
        &mut self,
        x: TensorId,
        gamma: TensorId,
        beta: TensorId,
        mode: BnMode,
        running: Option<(&[T], &[T])>,
        eps: T,
    ) -> Result<TensorId, ShapeError> {
        let (m, c) = (self.rows(x), self.cols(x));
        for (name, id) in [("gamma", gamma), ("beta", beta)] {
            if self.rows(id) != 1 || self.cols(id) != c {
                return Err(shape_err(
                    "batch_norm",
                    format!("{name} is {}×{}, expected 1×{c}", self.rows(id), self.cols(id)),
                ));
            }
        }
        let (mean, var) = match (mode, running) {
            (BnMode::Running, Some((rm, rv))) => (rm.to_vec(), rv.to_vec()),
            (BnMode::Running, None) => {
                return Err(shape_err("batch_norm", String::from("running stats missing")))
            }
            (BnMode::Batch, _) => {
                let xd = &self.nodes[x.0].data;
                let mut mean = vec![T::ZERO; c];
                for i in 0..m {
                    for (j, mv) in mean.iter_mut().enumerate() {
                        *mv += xd[i * c + j];
                    }
                }
                let inv_m = T::ONE / T::from_f64(m as f64);
                for mv in mean.iter_mut() {
                    *mv *= inv_m;
                }
                let mut var = vec![T::ZERO; c];
                for i in 0..m {
                    for (j, vv) in var.iter_mut().enumerate() {
                        let d = xd[i * c + j] - mean[j];
                        *vv += d * d;
                    }
                }
                for vv in var.iter_mut() {
                    *vv *= inv_m;
                }
                (mean, var)
            }
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::ONE / (v + eps).sqrt()).collect();
        let xd = &self.nodes[x.0].data;
        let gd = &self.nodes[gamma.0].data;
        let bd = &self.nodes[beta.0].data;
        let mut xhat = Vec::with_capacity(m * c);
        let mut out = Vec::with_capacity(m * c);
        for i in 0..m {
            for j in 0..c {
                let h = (xd[i * c + j] - mean[j]) * inv_std[j];
                xhat.push(h);
                out.push(gd[j] * h + bd[j]);
            }
        }
        let needs = self.needs(x) || self.needs(gamma) || self.needs(beta);
        Ok(self.push(
            m,
            c,
            out,
            needs,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                mode,
                xhat,
                inv_std,
                batch_mean: mean,
                batch_var: var,
            },
        ))
    }

    pub fn concat_cols(&mut self, xs: &[TensorId]) -> Result<TensorId, ShapeError> {
        if xs.is_empty() {
            return Err(shape_err("concat", String::from("no inputs")));
        }
        let m = self.rows(xs[0]);
        for &x in xs {
            if self.rows(x) != m {
                return Err(shape_err(
                    "concat",
                    format!("leading dims differ: {} vs {m}", self.rows(x)),
                ));
            }
        }
        let total: usize = xs.iter().map(|&x| self.cols(x)).sum();
        let mut out = Vec::with_capacity(m * total);
        for i in 0..m {
            for &x in xs {
                let c = self.cols(x);
                out.extend_from_slice(&self.nodes[x.0].data[i * c..(i + 1) * c]);
            }
        }
        let needs = xs.iter().any(|&x| self.needs(x));
        Ok(self.push(m, total, out, needs, Op::ConcatCols { xs: xs.to_vec() }))
    }

    /// Rows of `x` at `idx` (duplicates allowed); the backward pass
    /// scatter-adds, so this doubles as a broadcast.
    pub fn gather_rows(&mut self, x: TensorId, idx: &[u32]) -> TensorId {
        let c = self.cols(x);
        let xd = &self.nodes[x.0].data;
        let mut out = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            out.extend_from_slice(&xd[i as usize * c..(i as usize + 1) * c]);
        }
        let needs = self.needs(x);
        self.push(idx.len(), c, out, needs, Op::GatherRows { x, idx: idx.to_vec() })
    }

    pub fn group_max(&mut self, x: TensorId, k: usize) -> Result<TensorId, ShapeError> {
        let (rows, c) = self.group_check("group_max", x, k)?;
        let m = rows / k;
        let xd = &self.nodes[x.0].data;
        let mut out = Vec::with_capacity(m * c);
        let mut argmax = Vec::with_capacity(m * c);
        for g in 0..m {
            let base = g * k;
            for j in 0..c {
                let mut best = xd[base * c + j];
                let mut best_r = 0u32;
                for r in 1..k {
                    let v = xd[(base + r) * c + j];
                    if v > best {
                        best = v;
                        best_r = r as u32;
                    }
                }
                out.push(best);
                argmax.push(best_r);
            }
        }
        let needs = self.needs(x);
        Ok(self.push(m, c, out, needs, Op::GroupMax { x, k, argmax }))
    }

    pub fn group_mean(&mut self, x: TensorId, k: usize) -> Result<TensorId, ShapeError> {
        let (rows, c) = self.group_check("group_mean", x, k)?;
        let m = rows / k;
        let xd = &self.nodes[x.0].data;
        let inv_k = T::ONE / T::from_f64(k as f64);
        let mut out = vec![T::ZERO; m * c];
        for g in 0..m {
            let orow = &mut out[g * c..(g + 1) * c];
            for r in 0..k {
                let xrow = &xd[(g * k + r) * c..(g * k + r + 1) * c];
                orow.iter_mut().zip(xrow).for_each(|(o, &v)| *o += v);
            }
            orow.iter_mut().for_each(|o| *o *= inv_k);
        }
        let needs = self.needs(x);
        Ok(self.push(m, c, out, needs, Op::GroupMean { x, k }))
    }

    pub fn group_sum(&mut self, x: TensorId, k: usize) -> Result<TensorId, ShapeError> {
        let (rows, c) = self.group_check("group_sum", x, k)?;
        let m = rows / k;
        let xd = &self.nodes[x.0].data;
        let mut out = vec![T::ZERO; m * c];
        for g in 0..m {
            let orow = &mut out[g * c..(g + 1) * c];
            for r in 0..k {
                let xrow = &xd[(g * k + r) * c..(g * k + r + 1) * c];
                orow.iter_mut().zip(xrow).for_each(|(o, &v)| *o += v);
            }
        }
        let needs = self.needs(x);
        Ok(self.push(m, c, out, needs, Op::GroupSum { x, k }))
    }

    /// Softmax over the k rows of each group, per column (max-subtracted).
    pub fn group_softmax(&mut self, x: TensorId, k: usize) -> Result<TensorId, ShapeError> {
        let (rows, c) = self.group_check("group_softmax", x, k)?;
        let m = rows / k;
        let xd = &self.nodes[x.0].data;
        let mut out = vec![T::ZERO; rows * c];
        for g in 0..m {
            let base = g * k;
            for j in 0..c {
                let mut hi = xd[base * c + j];
                for r in 1..k {
                    hi = hi.max(xd[(base + r) * c + j]);
                }
                let mut total = T::ZERO;
                for r in 0..k {
                    let e = (xd[(base + r) * c + j] - hi).exp();
                    out[(base + r) * c + j] = e;
                    total += e;
                }
                for r in 0..k {
                    out[(base + r) * c + j] /= total;
                }
            }
        }
        let needs = self.needs(x);
        Ok(self.push(rows, c, out, needs, Op::GroupSoftmax { x, k }))
    }

    /// Softmax along the channel axis of each row (max-subtracted).
    pub fn row_softmax(&mut self, x: TensorId) -> TensorId {
        let (m, c) = (self.rows(x), self.cols(x));
        let xd = &self.nodes[x.0].data;
        let mut out = Vec::with_capacity(m * c);
        for i in 0..m {
            let row = &xd[i * c..(i + 1) * c];
            let hi = row.iter().fold(row[0], |acc, &v| acc.max(v));
            let exps: Vec<T> = row.iter().map(|&v| (v - hi).exp()).collect();
            let total: T = exps.iter().copied().sum();
            out.extend(exps.into_iter().map(|e| e / total));
        }
        let needs = self.needs(x);
        self.push(m, c, out, needs, Op::RowSoftmax { x })
    }

    pub fn scale_rows(&mut self, x: TensorId, s: TensorId) -> Result<TensorId, ShapeError> {
        let (m, c) = (self.rows(x), self.cols(x));
        if self.rows(s) != m || self.cols(s) != 1 {
            return Err(shape_err(
                "scale_rows",
                format!("scale is {}×{}, expected {m}×1", self.rows(s), self.cols(s)),
            ));
        }
        let (xd, sd) = (&self.nodes[x.0].data, &self.nodes[s.0].data);
        let mut out = Vec::with_capacity(m * c);
        for i in 0..m {
            let sv = sd[i];
            out.extend(xd[i * c..(i + 1) * c].iter().map(|&v| v * sv));
        }
        let needs = self.needs(x) || self.needs(s);
        Ok(self.push(m, c, out, needs, Op::ScaleRows { x, s }))
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, ShapeError> {
        let (m, c) = (self.rows(a), self.cols(a));
        if self.rows(b) != m || self.cols(b) != c {
            return Err(shape_err(
                "add",
                format!("{m}×{c} vs {}×{}", self.rows(b), self.cols(b)),
            ));
        }
        let (ad, bd) = (&self.nodes[a.0].data, &self.nodes[b.0].data);
        let out: Vec<T> = ad.iter().zip(bd).map(|(&x, &y)| x + y).collect();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(m, c, out, needs, Op::Add { a, b }))
    }

    /// Pointwise product of two same-shape tensors.
    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, ShapeError> {
        let (m, c) = (self.rows(a), self.cols(a));
        if self.rows(b) != m || self.cols(b) != c {
            return Err(shape_err(
                "mul",
                format!("{m}×{c} vs {}×{}", self.rows(b), self.cols(b)),
            ));
        }
        let (ad, bd) = (&self.nodes[a.0].data, &self.nodes[b.0].data);
        let out: Vec<T> = ad.iter().zip(bd).map(|(&x, &y)| x * y).collect();
        let needs = self.needs(a) || self.needs(b);
        Ok(self.push(m, c, out, needs, Op::Mul { a, b }))
    }

    /// Applies fixed interpolation stencils: out[i] = Σ w·x[src]. Weights are
    /// position-derived constants and receive no gradient.
    pub fn interpolate(&mut self, x: TensorId, stencils: &[Vec<(u32, f64)>]) -> TensorId {
        let c = self.cols(x);
        let xd = &self.nodes[x.0].data;
        let mut out = vec![T::ZERO; stencils.len() * c];
        let mut cast: Vec<Vec<(u32, T)>> = Vec::with_capacity(stencils.len());
        for (i, stencil) in stencils.iter().enumerate() {
            let orow = &mut out[i * c..(i + 1) * c];
            let mut row = Vec::with_capacity(stencil.len());
            for &(src, w) in stencil {
                let wt = T::from_f64(w);
                row.push((src, wt));
                let xrow = &xd[src as usize * c..(src as usize + 1) * c];
                orow.iter_mut().zip(xrow).for_each(|(o, &v)| *o += wt * v);
            }
            cast.push(row);
        }
        let needs = self.needs(x);
        self.push(stencils.len(), c, out, needs, Op::Interp { x, stencils: cast })
    }

    /// Mean cross-entropy of row-wise class logits against integer labels.
    pub fn cross_entropy(&mut self, logits: TensorId, labels: &[u8]) -> Result<TensorId, ShapeError> {
        let (m, c) = (self.rows(logits), self.cols(logits));
        if labels.len() != m {
            return Err(shape_err(
                "cross_entropy",
                format!("{m} logit rows vs {} labels", labels.len()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| (l as usize) >= c) {
            return Err(shape_err("cross_entropy", format!("label {bad} out of range")));
        }
        let xd = &self.nodes[logits.0].data;
        let mut probs = Vec::with_capacity(m * c);
        let mut total = T::ZERO;
        for i in 0..m {
            let row = &xd[i * c..(i + 1) * c];
            let hi = row.iter().fold(row[0], |acc, &v| acc.max(v));
            let exps: Vec<T> = row.iter().map(|&v| (v - hi).exp()).collect();
            let z: T = exps.iter().copied().sum();
            total += -(exps[labels[i] as usize] / z).ln();
            probs.extend(exps.into_iter().map(|e| e / z));
        }
        let loss = total / T::from_f64(m as f64);
        let needs = self.needs(logits);
        Ok(self.push(
            1,
            1,
            vec![loss],
            needs,
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
        ))
    }

    /// Scalar Σᵢ wᵢ·xᵢ against fixed weights; the gradcheck scalarizer.
    pub fn dot_const(&mut self, x: TensorId, w: &[T]) -> Result<TensorId, ShapeError> {
        let n = self.nodes[x.0].data.len();
        if w.len() != n {
            return Err(shape_err("dot_const", format!("{n} values vs {} weights", w.len())));
        }
        let total: T = self.nodes[x.0].data.iter().zip(w).map(|(&a, &b)| a * b).sum();
        let needs = self.needs(x);
        Ok(self.push(1, 1, vec![total], needs, Op::DotConst { x, w: w.to_vec() }))
    }

    /// Neighbor reduction over k-row groups. `mean_max` concatenates the
    /// channel-wise max and mean (doubling the width); `attentive` scores
    /// each neighbor with the supplied linear map, softmax-normalizes the
    /// scores over the group, and takes the weighted sum.
    pub fn reduce(
        &mut self,
        x: TensorId,
        k: usize,
        mode: Reduction,
        attn: Option<(TensorId, TensorId)>,
    ) -> Result<TensorId, ShapeError> {
        match mode {
            Reduction::Mean => self.group_mean(x, k),
            Reduction::Max => self.group_max(x, k),
            Reduction::MeanMax => {
                let mx = self.group_max(x, k)?;
                let mn = self.group_mean(x, k)?;
                self.concat_cols(&[mx, mn])
            }
            Reduction::Attentive => {
                let (w, b) = attn.ok_or_else(|| {
                    shape_err("reduce", String::from("attentive mode needs score parameters"))
                })?;
                let scores = self.matmul(x, w)?;
                let scores = self.add_bias(scores, b)?;
                let weights = self.group_softmax(scores, k)?;
                let weighted = self.scale_rows(x, weights)?;
                self.group_sum(weighted, k)
            }
        }
    }

    fn group_check(&self, op: &'static str, x: TensorId, k: usize) -> Result<(usize, usize), ShapeError> {
        let (rows, c) = (self.rows(x), self.cols(x));
        if k == 0 {
            return Err(shape_err(op, String::from("group size k must be ≥ 1")));
        }
        if rows % k != 0 {
            return Err(shape_err(op, format!("{rows} rows not divisible by k = {k}")));
        }
        Ok((rows, c))
    }

    fn needs(&self, id: TensorId) -> bool {
        self.nodes[id.0].needs_grad
    }

    /// Reverse pass from a scalar node. Populates gradients for every node
    /// on a differentiable path; a graph can run backward only once.
    pub fn backward(&mut self, loss: TensorId) -> Result<(), ShapeError> {
        if self.backward_done {
            return Err(shape_err("backward", String::from("graph already consumed")));
        }
        let node = &self.nodes[loss.0];
        if node.rows * node.cols != 1 {
            return Err(shape_err(
                "backward",
                format!("loss must be scalar, got {}×{}", node.rows, node.cols),
            ));
        }
        self.backward_done = true;
        self.grads[loss.0] = Some(vec![T::ONE]);

        for i in (0..=loss.0).rev() {
            let Some(gout) = self.grads[i].take() else {
                continue;
            };
            let nodes = &self.nodes;
            let grads = &mut self.grads;
            fn ensure_buf<'g, T: Scalar>(
                grads: &'g mut [Option<Vec<T>>],
                len: usize,
                id: TensorId,
            ) -> &'g mut Vec<T> {
                grads[id.0].get_or_insert_with(|| vec![T::ZERO; len])
            }
            macro_rules! ensure {
                ($grads:expr, $id:expr) => {
                    ensure_buf($grads, nodes[$id.0].data.len(), $id)
                };
            }
            match &nodes[i].op {
                Op::Leaf => {}
                Op::MatMul { a, b } => {
                    let (m, kk) = (nodes[a.0].rows, nodes[a.0].cols);
                    let n = nodes[b.0].cols;
                    if nodes[a.0].needs_grad {
                        let bd = &nodes[b.0].data;
                        let ga = ensure!(grads, *a);
                        for r in 0..m {
                            let grow = &gout[r * n..(r + 1) * n];
                            let garow = &mut ga[r * kk..(r + 1) * kk];
                            for (p, gav) in garow.iter_mut().enumerate() {
                                let brow = &bd[p * n..(p + 1) * n];
                                let mut acc = T::ZERO;
                                for (gv, bv) in grow.iter().zip(brow) {
                                    acc += *gv * *bv;
                                }
                                *gav += acc;
                            }
                        }
                    }
                    if nodes[b.0].needs_grad {
                        let ad = &nodes[a.0].data;
                        let gb = ensure!(grads, *b);
                        for r in 0..m {
                            let grow = &gout[r * n..(r + 1) * n];
                            let arow = &ad[r * kk..(r + 1) * kk];
                            for (p, &av) in arow.iter().enumerate() {
                                let gbrow = &mut gb[p * n..(p + 1) * n];
                                gbrow.iter_mut().zip(grow).for_each(|(g, &gv)| *g += av * gv);
                            }
                        }
                    }
                }
                Op::AddBias { x, b } => {
                    let c = nodes[i].cols;
                    if nodes[x.0].needs_grad {
                        let gx = ensure!(grads, *x);
                        gx.iter_mut().zip(&gout).for_each(|(g, &gv)| *g += gv);
                    }
                    if nodes[b.0].needs_grad {
                        let gb = ensure!(grads, *b);
                        for row in gout.chunks_exact(c) {
                            gb.iter_mut().zip(row).for_each(|(g, &gv)| *g += gv);
                        }
                    }
                }
                Op::Relu { x } => {
                    if nodes[x.0].needs_grad {
                        let xd = &nodes[x.0].data;
                        let gx = ensure!(grads, *x);
                        for ((g, &gv), &xv) in gx.iter_mut().zip(&gout).zip(xd) {
                            if xv > T::ZERO {
                                *g += gv;
                            }
                        }
                    }
                }
                Op::BatchNorm {
                    x,
                    gamma,
                    beta,
                    mode,
                    xhat,
                    inv_std,
                    ..
                } => {
                    let (m, c) = (nodes[i].rows, nodes[i].cols);
                    let gd = &nodes[gamma.0].data;
                    if nodes[gamma.0].needs_grad {
                        let gg = ensure!(grads, *gamma);
                        for r in 0..m {
                            for j in 0..c {
                                gg[j] += gout[r * c + j] * xhat[r * c + j];
                            }
                        }
                    }
                    if nodes[beta.0].needs_grad {
                        let gb = ensure!(grads, *beta);
                        for row in gout.chunks_exact(c) {
                            gb.iter_mut().zip(row).for_each(|(g, &gv)| *g += gv);
                        }
                    }
                    if nodes[x.0].needs_grad {
                        match mode {
                            BnMode::Running => {
                                let gx = ensure!(grads, *x);
                                for r in 0..m {
                                    for j in 0..c {
                                        gx[r * c + j] += gout[r * c + j] * gd[j] * inv_std[j];
                                    }
                                }
                            }
                            BnMode::Batch => {
                                // full backward through the batch statistics
                                let inv_m = T::ONE / T::from_f64(m as f64);
                                let mut sum_dh = vec![T::ZERO; c];
                                let mut sum_dh_h = vec![T::ZERO; c];
                                for r in 0..m {
                                    for j in 0..c {
                                        let dh = gout[r * c + j] * gd[j];
                                        sum_dh[j] += dh;
                                        sum_dh_h[j] += dh * xhat[r * c + j];
                                    }
                                }
                                let gx = ensure!(grads, *x);
                                for r in 0..m {
                                    for j in 0..c {
                                        let dh = gout[r * c + j] * gd[j];
                                        gx[r * c + j] += inv_std[j]
                                            * (dh - inv_m * (sum_dh[j] + xhat[r * c + j] * sum_dh_h[j]));
                                    }
                                }
                            }
                        }
                    }
                }
                Op::ConcatCols { xs } => {
                    let c_total = nodes[i].cols;
                    let m = nodes[i].rows;
                    let mut offset = 0;
                    for &xid in xs {
                        let c = nodes[xid.0].cols;
                        if nodes[xid.0].needs_grad {
                            let gx = ensure!(grads, xid);
                            for r in 0..m {
                                let src = &gout[r * c_total + offset..r * c_total + offset + c];
                                gx[r * c..(r + 1) * c]
                                    .iter_mut()
                                    .zip(src)
                                    .for_each(|(g, &gv)| *g += gv);
                            }
                        }
                        offset += c;
                    }
                }
                Op::GatherRows { x, idx } => {
                    if nodes[x.0].needs_grad {
                        let c = nodes[i].cols;
                        let gx = ensure!(grads, *x);
                        for (r, &src) in idx.iter().enumerate() {
                            let grow = &gout[r * c..(r + 1) * c];
                            gx[src as usize * c..(src as usize + 1) * c]
                                .iter_mut()
                                .zip(grow)
                                .for_each(|(g, &gv)| *g += gv);
                        }
                    }
                }
                Op::GroupMax { x, k, argmax } => {
                    if nodes[x.0].needs_grad {
                        let (m, c) = (nodes[i].rows, nodes[i].cols);
                        let gx = ensure!(grads, *x);
                        for g in 0..m {
                            for j in 0..c {
                                let r = argmax[g * c + j] as usize;
                                gx[(g * k + r) * c + j] += gout[g * c + j];
                            }
                        }
                    }
                }
                Op::GroupMean { x, k } => {
                    if nodes[x.0].needs_grad {
                        let (m, c) = (nodes[i].rows, nodes[i].cols);
                        let inv_k = T::ONE / T::from_f64(*k as f64);
                        let gx = ensure!(grads, *x);
                        for g in 0..m {
                            let grow = &gout[g * c..(g + 1) * c];
                            for r in 0..*k {
                                gx[(g * k + r) * c..(g * k + r + 1) * c]
                                    .iter_mut()
                                    .zip(grow)
                                    .for_each(|(gx, &gv)| *gx += gv * inv_k);
                            }
                        }
                    }
                }
                Op::GroupSum { x, k } => {
                    if nodes[x.0].needs_grad {
                        let (m, c) = (nodes[i].rows, nodes[i].cols);
                        let gx = ensure!(grads, *x);
                        for g in 0..m {
                            let grow = &gout[g * c..(g + 1) * c];
                            for r in 0..*k {
                                gx[(g * k + r) * c..(g * k + r + 1) * c]
                                    .iter_mut()
                                    .zip(grow)
                                    .for_each(|(gx, &gv)| *gx += gv);
                            }
                        }
                    }
                }
                Op::GroupSoftmax { x, k } => {
                    if nodes[x.0].needs_grad {
                        let c = nodes[i].cols;
                        let m = nodes[i].rows / k;
                        let yd = &nodes[i].data;
                        let gx = ensure!(grads, *x);
                        for g in 0..m {
                            let base = g * k;
                            for j in 0..c {
                                let mut dot = T::ZERO;
                                for r in 0..*k {
                                    dot += yd[(base + r) * c + j] * gout[(base + r) * c + j];
                                }
                                for r in 0..*k {
                                    let y = yd[(base + r) * c + j];
                                    gx[(base + r) * c + j] += y * (gout[(base + r) * c + j] - dot);
                                }
                            }
                        }
                    }
                }
                Op::RowSoftmax { x } => {
                    if nodes[x.0].needs_grad {
                        let (m, c) = (nodes[i].rows, nodes[i].cols);
                        let yd = &nodes[i].data;
                        let gx = ensure!(grads, *x);
                        for r in 0..m {
                            let yrow = &yd[r * c..(r + 1) * c];
                            let grow = &gout[r * c..(r + 1) * c];
                            let dot: T = yrow.iter().zip(grow).map(|(&y, &g)| y * g).sum();
                            gx[r * c..(r + 1) * c]
                                .iter_mut()
                                .zip(yrow.iter().zip(grow))
                                .for_each(|(gx, (&y, &g))| *gx += y * (g - dot));
                        }
                    }
                }
                Op::ScaleRows { x, s } => {
                    let (m, c) = (nodes[i].rows, nodes[i].cols);
                    if nodes[x.0].needs_grad {
                        let sd = &nodes[s.0].data;
                        let gx = ensure!(grads, *x);
                        for r in 0..m {
                            let sv = sd[r];
                            gx[r * c..(r + 1) * c]
                                .iter_mut()
                                .zip(&gout[r * c..(r + 1) * c])
                                .for_each(|(g, &gv)| *g += gv * sv);
                        }
                    }
                    if nodes[s.0].needs_grad {
                        let xd = &nodes[x.0].data;
                        let gs = ensure!(grads, *s);
                        for r in 0..m {
                            let mut acc = T::ZERO;
                            for j in 0..c {
                                acc += gout[r * c + j] * xd[r * c + j];
                            }
                            gs[r] += acc;
                        }
                    }
                }
                Op::Add { a, b } => {
                    for id in [*a, *b] {
                        if nodes[id.0].needs_grad {
                            let g = ensure!(grads, id);
                            g.iter_mut().zip(&gout).for_each(|(g, &gv)| *g += gv);
                        }
                    }
                }
                Op::Mul { a, b } => {
                    if nodes[a.0].needs_grad {
                        let bd = &nodes[b.0].data;
                        let ga = ensure!(grads, *a);
                        ga.iter_mut()
                            .zip(gout.iter().zip(bd))
                            .for_each(|(g, (&gv, &bv))| *g += gv * bv);
                    }
                    if nodes[b.0].needs_grad {
                        let ad = &nodes[a.0].data;
                        let gb = ensure!(grads, *b);
                        gb.iter_mut()
                            .zip(gout.iter().zip(ad))
                            .for_each(|(g, (&gv, &av))| *g += gv * av);
                    }
                }
                Op::Interp { x, stencils } => {
                    if nodes[x.0].needs_grad {
                        let c = nodes[i].cols;
                        let gx = ensure!(grads, *x);
                        for (r, stencil) in stencils.iter().enumerate() {
                            let grow = &gout[r * c..(r + 1) * c];
                            for &(src, w) in stencil {
                                gx[src as usize * c..(src as usize + 1) * c]
                                    .iter_mut()
                                    .zip(grow)
                                    .for_each(|(g, &gv)| *g += w * gv);
                            }
                        }
                    }
                }
                Op::CrossEntropy { logits, labels, probs } => {
                    if nodes[logits.0].needs_grad {
                        let c = nodes[logits.0].cols;
                        let m = labels.len();
                        let scale = gout[0] / T::from_f64(m as f64);
                        let gx = ensure!(grads, *logits);
                        for (r, &label) in labels.iter().enumerate() {
                            for j in 0..c {
                                let indicator = if j == label as usize { T::ONE } else { T::ZERO };
                                gx[r * c + j] += scale * (probs[r * c + j] - indicator);
                            }
                        }
                    }
                }
                Op::DotConst { x, w } => {
                    if nodes[x.0].needs_grad {
                        let gx = ensure!(grads, *x);
                        gx.iter_mut()
                            .zip(w)
                            .for_each(|(g, &wv)| *g += gout[0] * wv);
                    }
                }
            }
            // put the output gradient back so callers can inspect any node
            self.grads[i] = Some(gout);
        }
        Ok(())
    }
}
