//! Reverse-mode gradient tape.
//!
//! Every operation appends a node holding its forward value and the inputs
//! needed for its vector-Jacobian product. [`Tape::backward`] walks the nodes
//! in reverse creation order, which is a valid topological order because a
//! node can only reference earlier nodes.

use std::sync::Arc;

use ndarray::{s, Axis, Zip};
use rand::Rng;

use crate::params::{ParamId, ParamStore};
use crate::{NumError, Result, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    MulCol(Var, Var),
    Scale(Var, f64),
    ScaleVar(Var, Var),
    ScaleRows(Var, Arc<[f64]>),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    LeakyRelu(Var, f64),
    Dropout(Var, Tensor),
    RowSoftmax(Var),
    GatherRows(Var, Arc<[usize]>),
    Propagate {
        input: Var,
        src: Arc<[usize]>,
        dst: Arc<[usize]>,
        coef: Option<Arc<[f64]>>,
    },
    PropagateWeighted {
        input: Var,
        weights: Var,
        src: Arc<[usize]>,
        dst: Arc<[usize]>,
    },
    SegmentSoftmax(Var, Arc<[usize]>),
    Sum(Var),
    CrossEntropy {
        logits: Var,
        targets: Arc<[usize]>,
        row_weight: Vec<f64>,
        probs: Tensor,
    },
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf | Op::Param => vec![],
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::AddRow(a, b)
            | Op::Mul(a, b)
            | Op::MulCol(a, b)
            | Op::ScaleVar(a, b) => vec![*a, *b],
            Op::Scale(a, _)
            | Op::ScaleRows(a, _)
            | Op::LeakyRelu(a, _)
            | Op::Dropout(a, _)
            | Op::RowSoftmax(a)
            | Op::GatherRows(a, _)
            | Op::SegmentSoftmax(a, _)
            | Op::Sum(a) => vec![*a],
            Op::ConcatCols(v) | Op::ConcatRows(v) => v.clone(),
            Op::Propagate { input, .. } => vec![*input],
            Op::PropagateWeighted { input, weights, .. } => vec![*input, *weights],
            Op::CrossEntropy { logits, .. } => vec![*logits],
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Records a differentiable computation over parameters from one store.
pub struct Tape<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    bound: Vec<Option<Var>>,
}

/// Result of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    nodes: Vec<Option<Tensor>>,
    params: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for a recorded value, `None` if the loss does not depend on it
    /// or it was recorded as a constant.
    pub fn of(&self, v: Var) -> Option<&Tensor> {
        self.nodes.get(v.0).and_then(|g| g.as_ref())
    }

    /// Gradient for a parameter; `None` if the parameter never reached the loss.
    pub fn param(&self, id: ParamId) -> Option<&Tensor> {
        self.params.get(id.index()).and_then(|g| g.as_ref())
    }

    /// Per-parameter gradients indexed by [`ParamId`].
    pub fn params(&self) -> &[Option<Tensor>] {
        &self.params
    }

    pub fn into_params(self) -> Vec<Option<Tensor>> {
        self.params
    }
}

fn check_finite(t: &Tensor, op: &'static str) -> Result<()> {
    if t.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(NumError::NonFinite(op))
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(acc) => *acc += &g,
        None => *slot = Some(g),
    }
}

impl<'p> Tape<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Self {
            store,
            nodes: Vec::new(),
            bound: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &ParamStore {
        self.store
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
        self.nodes[v.0].value.dim()
    }

    /// Scalar value of a `1 × 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    fn push(&mut self, value: Tensor, op: Op, name: &'static str) -> Result<Var> {
        check_finite(&value, name)?;
        let needs_grad = match &op {
            Op::Leaf => false,
            Op::Param => true,
            other => other.inputs().iter().any(|v| self.nodes[v.0].needs_grad),
        };
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Records a value that does not receive a gradient.
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.push(value, Op::Leaf, "constant")
    }

    /// Binds a parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.bound[id.index()] {
            return v;
        }
        self.nodes.push(Node {
            value: self.store.get(id).clone(),
            op: Op::Param,
            needs_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.bound[id.index()] = Some(v);
        v
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(NumError::Shape { op, lhs: sa, rhs: sb });
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(NumError::Shape {
                op: "matmul",
                lhs: sa,
                rhs: sb,
            });
        }
        let out = self.value(a).dot(self.value(b));
        self.push(out, Op::MatMul(a, b), "matmul")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.value(a) + self.value(b);
        self.push(out, Op::Add(a, b), "add")
    }

    /// `a [n × c] + b [1 × c]`, broadcasting `b` over rows.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sb.0 != 1 || sa.1 != sb.1 {
            return Err(NumError::Shape {
                op: "add_row",
                lhs: sa,
                rhs: sb,
            });
        }
        let out = self.value(a) + self.value(b);
        self.push(out, Op::AddRow(a, b), "add_row")
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.value(a) * self.value(b);
        self.push(out, Op::Mul(a, b), "mul")
    }

    /// `a [n × c] * s [n × 1]`, scaling each row of `a` by the matching entry of `s`.
    pub fn mul_col(&mut self, a: Var, s: Var) -> Result<Var> {
        let (sa, ss) = (self.shape(a), self.shape(s));
        if ss.1 != 1 || sa.0 != ss.0 {
            return Err(NumError::Shape {
                op: "mul_col",
                lhs: sa,
                rhs: ss,
            });
        }
        let out = self.value(a) * self.value(s);
        self.push(out, Op::MulCol(a, s), "mul_col")
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Result<Var> {
        let out = self.value(a) * k;
        self.push(out, Op::Scale(a, k), "scale")
    }

    /// Multiplies every entry of `a` by the `1 × 1` value `s`.
    pub fn scale_var(&mut self, a: Var, s: Var) -> Result<Var> {
        let ss = self.shape(s);
        if ss != (1, 1) {
            return Err(NumError::Shape {
                op: "scale_var",
                lhs: self.shape(a),
                rhs: ss,
            });
        }
        let k = self.scalar(s);
        let out = self.value(a) * k;
        self.push(out, Op::ScaleVar(a, s), "scale_var")
    }

    /// Scales row `i` of `a` by the constant `coef[i]`.
    pub fn scale_rows(&mut self, a: Var, coef: Arc<[f64]>) -> Result<Var> {
        let sa = self.shape(a);
        if coef.len() != sa.0 {
            return Err(NumError::Shape {
                op: "scale_rows",
                lhs: sa,
                rhs: (coef.len(), 1),
            });
        }
        let mut out = self.value(a).clone();
        for (mut r, c) in out.rows_mut().into_iter().zip(coef.iter()) {
            r *= *c;
        }
        self.push(out, Op::ScaleRows(a, coef), "scale_rows")
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| NumError::Invalid("concat of nothing".into()))?;
        let rows = self.shape(*first).0;
        for p in parts {
            if self.shape(*p).0 != rows {
                return Err(NumError::Shape {
                    op: "concat_cols",
                    lhs: self.shape(*first),
                    rhs: self.shape(*p),
                });
            }
        }
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let out = ndarray::concatenate(Axis(1), &views).expect("checked shapes");
        self.push(out, Op::ConcatCols(parts.to_vec()), "concat_cols")
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| NumError::Invalid("concat of nothing".into()))?;
        let cols = self.shape(*first).1;
        for p in parts {
            if self.shape(*p).1 != cols {
                return Err(NumError::Shape {
                    op: "concat_rows",
                    lhs: self.shape(*first),
                    rhs: self.shape(*p),
                });
            }
        }
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let out = ndarray::concatenate(Axis(0), &views).expect("checked shapes");
        self.push(out, Op::ConcatRows(parts.to_vec()), "concat_rows")
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        let out = self.value(a).mapv(|x| if x > 0.0 { x } else { slope * x });
        self.push(out, Op::LeakyRelu(a, slope), "leaky_relu")
    }

    /// Inverted dropout: kept entries are divided by `1 - p`. With `train`
    /// false this returns `a` unchanged and records nothing.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        a: Var,
        p: f64,
        train: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if !train || p == 0.0 {
            return Ok(a);
        }
        if !(0.0..1.0).contains(&p) {
            return Err(NumError::Invalid(format!("dropout probability {p}")));
        }
        let keep = 1.0 / (1.0 - p);
        let mask = Tensor::from_shape_simple_fn(self.shape(a), || {
            if rng.gen::<f64>() < p {
                0.0
            } else {
                keep
            }
        });
        let out = self.value(a) * &mask;
        self.push(out, Op::Dropout(a, mask), "dropout")
    }

    pub fn row_softmax(&mut self, a: Var) -> Result<Var> {
        let out = softmax_rows(self.value(a));
        self.push(out, Op::RowSoftmax(a), "row_softmax")
    }

    /// Row `i` of the result is row `idx[i]` of `a`.
    pub fn gather_rows(&mut self, a: Var, idx: Arc<[usize]>) -> Result<Var> {
        let sa = self.shape(a);
        if let Some(&bad) = idx.iter().find(|&&i| i >= sa.0) {
            return Err(NumError::Shape {
                op: "gather_rows",
                lhs: sa,
                rhs: (bad, 0),
            });
        }
        let out = self.value(a).select(Axis(0), &idx);
        self.push(out, Op::GatherRows(a, idx), "gather_rows")
    }

    /// Sparse message passing: `out[dst[e]] += coef[e] * a[src[e]]` over all
    /// edges `e`, with `num_out` output rows. Parallel edges each contribute.
    pub fn propagate(
        &mut self,
        a: Var,
        src: Arc<[usize]>,
        dst: Arc<[usize]>,
        coef: Option<Arc<[f64]>>,
        num_out: usize,
    ) -> Result<Var> {
        let sa = self.shape(a);
        check_edges("propagate", sa, &src, &dst, num_out)?;
        if let Some(c) = &coef {
            if c.len() != src.len() {
                return Err(NumError::Shape {
                    op: "propagate",
                    lhs: (src.len(), 1),
                    rhs: (c.len(), 1),
                });
            }
        }
        let input = self.value(a);
        let mut out = Tensor::zeros((num_out, sa.1));
        for e in 0..src.len() {
            let k = coef.as_ref().map_or(1.0, |c| c[e]);
            let mut row = out.row_mut(dst[e]);
            row.scaled_add(k, &input.row(src[e]));
        }
        self.push(
            out,
            Op::Propagate {
                input: a,
                src,
                dst,
                coef,
            },
            "propagate",
        )
    }

    /// Like [`Tape::propagate`] but the per-edge coefficients are a
    /// differentiable `m × 1` value.
    pub fn propagate_weighted(
        &mut self,
        a: Var,
        weights: Var,
        src: Arc<[usize]>,
        dst: Arc<[usize]>,
        num_out: usize,
    ) -> Result<Var> {
        let sa = self.shape(a);
        check_edges("propagate_weighted", sa, &src, &dst, num_out)?;
        let sw = self.shape(weights);
        if sw != (src.len(), 1) {
            return Err(NumError::Shape {
                op: "propagate_weighted",
                lhs: (src.len(), 1),
                rhs: sw,
            });
        }
        let input = self.value(a);
        let w = self.value(weights);
        let mut out = Tensor::zeros((num_out, sa.1));
        for e in 0..src.len() {
            out.row_mut(dst[e]).scaled_add(w[[e, 0]], &input.row(src[e]));
        }
        self.push(
            out,
            Op::PropagateWeighted {
                input: a,
                weights,
                src,
                dst,
            },
            "propagate_weighted",
        )
    }

    /// Column-wise softmax of an `m × k` value within groups: entries of a
    /// column sharing the same `segment[e]` are normalized together.
    pub fn segment_softmax(&mut self, a: Var, segment: Arc<[usize]>) -> Result<Var> {
        let sa = self.shape(a);
        if sa.0 != segment.len() {
            return Err(NumError::Shape {
                op: "segment_softmax",
                lhs: sa,
                rhs: (segment.len(), 1),
            });
        }
        let groups = segment.iter().max().map_or(0, |m| m + 1);
        let x = self.value(a);
        let mut out = Tensor::zeros(sa);
        for c in 0..sa.1 {
            let mut max = vec![f64::NEG_INFINITY; groups];
            for (e, &g) in segment.iter().enumerate() {
                max[g] = max[g].max(x[[e, c]]);
            }
            let mut denom = vec![0.0; groups];
            for (e, &g) in segment.iter().enumerate() {
                let v = (x[[e, c]] - max[g]).exp();
                out[[e, c]] = v;
                denom[g] += v;
            }
            for (e, &g) in segment.iter().enumerate() {
                out[[e, c]] /= denom[g];
            }
        }
        self.push(out, Op::SegmentSoftmax(a, segment), "segment_softmax")
    }

    /// Sum of all entries as a `1 × 1` value.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let out = Tensor::from_elem((1, 1), self.value(a).sum());
        self.push(out, Op::Sum(a), "sum")
    }

    /// `Σ_i row_weight[i] · (−log softmax(logits_i)[targets[i]])` as a `1 × 1`
    /// value. The caller folds class weights and any averaging into
    /// `row_weight`.
    pub fn cross_entropy(
        &mut self,
        logits: Var,
        targets: Arc<[usize]>,
        row_weight: Vec<f64>,
    ) -> Result<Var> {
        let (n, c) = self.shape(logits);
        if targets.len() != n || row_weight.len() != n {
            return Err(NumError::Shape {
                op: "cross_entropy",
                lhs: (n, c),
                rhs: (targets.len(), row_weight.len()),
            });
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= c) {
            return Err(NumError::Label {
                label: bad,
                classes: c,
            });
        }
        let x = self.value(logits);
        let probs = softmax_rows(x);
        let mut loss = 0.0;
        for i in 0..n {
            let row = x.row(i);
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += row_weight[i] * (lse - row[targets[i]]);
        }
        self.push(
            Tensor::from_elem((1, 1), loss),
            Op::CrossEntropy {
                logits,
                targets,
                row_weight,
                probs,
            },
            "cross_entropy",
        )
    }

    /// Reverse pass from a `1 × 1` loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(NumError::Shape {
                op: "backward",
                lhs: shape,
                rhs: (1, 1),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::ones((1, 1)));
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.vjp(&node.op, &node.value, &g, &mut grads);
            grads[i] = Some(g);
        }
        let mut params = vec![None; self.store.len()];
        for (pid, bound) in self.bound.iter().enumerate() {
            if let Some(v) = bound {
                params[pid] = grads[v.0].clone();
            }
        }
        for (pid, g) in params.iter().enumerate() {
            if let Some(g) = g {
                check_finite(g, "backward")?;
                debug_assert_eq!(g.dim(), self.store.get(ParamId(pid)).dim());
            }
        }
        Ok(Gradients {
            nodes: grads,
            params,
        })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn vjp(&self, op: &Op, out: &Tensor, g: &Tensor, grads: &mut [Option<Tensor>]) {
        match op {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b) => {
                if self.wants(*a) {
                    accumulate(&mut grads[a.0], g.dot(&self.value(*b).t()));
                }
                if self.wants(*b) {
                    accumulate(&mut grads[b.0], self.value(*a).t().dot(g));
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if self.wants(*v) {
                        accumulate(&mut grads[v.0], g.clone());
                    }
                }
            }
            Op::AddRow(a, b) => {
                if self.wants(*a) {
                    accumulate(&mut grads[a.0], g.clone());
                }
                if self.wants(*b) {
                    accumulate(&mut grads[b.0], g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
            }
            Op::Mul(a, b) => {
                if self.wants(*a) {
                    accumulate(&mut grads[a.0], g * self.value(*b));
                }
                if self.wants(*b) {
                    accumulate(&mut grads[b.0], g * self.value(*a));
                }
            }
            Op::MulCol(a, s) => {
                if self.wants(*a) {
                    accumulate(&mut grads[a.0], g * self.value(*s));
                }
                if self.wants(*s) {
                    let gs = (g * self.value(*a)).sum_axis(Axis(1)).insert_axis(Axis(1));
                    accumulate(&mut grads[s.0], gs);
                }
            }
            Op::Scale(a, k) => {
                if self.wants(*a) {
                    accumulate(&mut grads[a.0], g * *k);
                }
            }
            Op::ScaleVar(a, s) => {
                if self.wants(*a) {
                    accumulate(&mut grads[a.0], g * self.scalar(*s));
                }
                if self.wants(*s) {
                    let gs = (g * self.value(*a)).sum();
                    accumulate(&mut grads[s.0], Tensor::from_elem((1, 1), gs));
                }
            }
            Op::ScaleRows(a, coef) => {
                if self.wants(*a) {
                    let mut ga = g.clone();
                    for (mut r, c) in ga.rows_mut().into_iter().zip(coef.iter()) {
                        r *= *c;
                    }
                    accumulate(&mut grads[a.0], ga);
                }
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for p in parts {
                    let w = self.shape(*p).1;
                    if self.wants(*p) {
                        accumulate(&mut grads[p.0], g.slice(s![.., start..start + w]).to_owned());
                    }
                    start += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut start = 0;
                for p in parts {
                    let h = self.shape(*p).0;
                    if self.wants(*p) {
                        accumulate(&mut grads[p.0], g.slice(s![start..start + h, ..]).to_owned());
                    }
                    start += h;
                }
            }
            Op::LeakyRelu(a, slope) => {
                if self.wants(*a) {
                    let mut ga = g.clone();
                    Zip::from(&mut ga).and(self.value(*a)).for_each(|d, &x| {
                        if x <= 0.0 {
                            *d *= *slope;
                        }
                    });
                    accumulate(&mut grads[a.0], ga);
                }
            }
            Op::Dropout(a, mask) => {
                if self.wants(*a) {
                    accumulate(&mut grads[a.0], g * mask);
                }
            }
            Op::RowSoftmax(a) => {
                if self.wants(*a) {
                    let dot = (g * out).sum_axis(Axis(1)).insert_axis(Axis(1));
                    accumulate(&mut grads[a.0], out * &(g - &dot));
                }
            }
            Op::GatherRows(a, idx) => {
                if self.wants(*a) {
                    let mut ga = Tensor::zeros(self.shape(*a));
                    for (i, &j) in idx.iter().enumerate() {
                        ga.row_mut(j).scaled_add(1.0, &g.row(i));
                    }
                    accumulate(&mut grads[a.0], ga);
                }
            }
            Op::Propagate {
                input,
                src,
                dst,
                coef,
            } => {
                if self.wants(*input) {
                    let mut ga = Tensor::zeros(self.shape(*input));
                    for e in 0..src.len() {
                        let k = coef.as_ref().map_or(1.0, |c| c[e]);
                        ga.row_mut(src[e]).scaled_add(k, &g.row(dst[e]));
                    }
                    accumulate(&mut grads[input.0], ga);
                }
            }
            Op::PropagateWeighted {
                input,
                weights,
                src,
                dst,
            } => {
                let x = self.value(*input);
                let w = self.value(*weights);
                if self.wants(*input) {
                    let mut ga = Tensor::zeros(x.dim());
                    for e in 0..src.len() {
                        ga.row_mut(src[e]).scaled_add(w[[e, 0]], &g.row(dst[e]));
                    }
                    accumulate(&mut grads[input.0], ga);
                }
                if self.wants(*weights) {
                    let mut gw = Tensor::zeros(w.dim());
                    for e in 0..src.len() {
                        gw[[e, 0]] = g.row(dst[e]).dot(&x.row(src[e]));
                    }
                    accumulate(&mut grads[weights.0], gw);
                }
            }
            Op::SegmentSoftmax(a, segment) => {
                if self.wants(*a) {
                    let groups = segment.iter().max().map_or(0, |m| m + 1);
                    let mut ga = Tensor::zeros(out.dim());
                    for c in 0..out.ncols() {
                        let mut dot = vec![0.0; groups];
                        for (e, &s) in segment.iter().enumerate() {
                            dot[s] += g[[e, c]] * out[[e, c]];
                        }
                        for (e, &s) in segment.iter().enumerate() {
                            ga[[e, c]] = out[[e, c]] * (g[[e, c]] - dot[s]);
                        }
                    }
                    accumulate(&mut grads[a.0], ga);
                }
            }
            Op::Sum(a) => {
                if self.wants(*a) {
                    accumulate(&mut grads[a.0], Tensor::from_elem(self.shape(*a), g[[0, 0]]));
                }
            }
            Op::CrossEntropy {
                logits,
                targets,
                row_weight,
                probs,
            } => {
                if self.wants(*logits) {
                    let scale = g[[0, 0]];
                    let mut gl = probs.clone();
                    for (i, mut r) in gl.rows_mut().into_iter().enumerate() {
                        r[targets[i]] -= 1.0;
                        r *= scale * row_weight[i];
                    }
                    accumulate(&mut grads[logits.0], gl);
                }
            }
        }
    }
}

fn check_edges(
    op: &'static str,
    input: (usize, usize),
    src: &[usize],
    dst: &[usize],
    num_out: usize,
) -> Result<()> {
    if src.len() != dst.len() {
        return Err(NumError::Shape {
            op,
            lhs: (src.len(), 1),
            rhs: (dst.len(), 1),
        });
    }
    if src.iter().any(|&u| u >= input.0) || dst.iter().any(|&v| v >= num_out) {
        return Err(NumError::Shape {
            op,
            lhs: input,
            rhs: (num_out, input.1),
        });
    }
    Ok(())
}

/// Numerically stable softmax of each row.
pub fn softmax_rows(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for mut r in out.rows_mut() {
        let max = r.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        r.mapv_inplace(|v| (v - max).exp());
        let sum = r.sum();
        r /= sum;
    }
    out
}
