//! Reverse-mode differentiation over scalars and dense vectors/matrices.
//!
//! A [`Tape`] records a computation as an append-only list of primitive
//! operations in topological order. Named parameter arrays enter as leaves;
//! [`Tape::evaluate`] then returns the forward value of a scalar root together
//! with exact reverse-mode gradients for every registered parameter, and
//! [`Tape::grad_check`] compares those gradients against central finite
//! differences by replaying the recorded graph with perturbed leaf values.
//!
//! The primitive set is intentionally small: elementwise arithmetic (with
//! scalar broadcast only), power, exp/log/sin/cos/abs, the overflow-safe
//! softplus and sigmoid, matrix-vector product, dot, concatenation, row
//! lookup, sum, softmax, and categorical cross-entropy.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use smallvec::{smallvec, SmallVec};

/// Inline storage: most nodes are scalars.
pub type Data = SmallVec<[f64; 2]>;

/// Shape of a tensor value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Scalar,
    Vector(usize),
    Matrix(usize, usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Scalar => 1,
            Shape::Vector(n) => n,
            Shape::Matrix(r, c) => r * c,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, Shape::Scalar)
    }
}

impl core::fmt::Display for Shape {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match *self {
            Shape::Scalar => write!(f, "scalar"),
            Shape::Vector(n) => write!(f, "vector[{n}]"),
            Shape::Matrix(r, c) => write!(f, "matrix[{r}x{c}]"),
        }
    }
}

/// A dense value: a scalar, vector, or row-major matrix of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Shape,
    data: Data,
}

impl Tensor {
    pub fn scalar(x: f64) -> Self {
        Tensor {
            shape: Shape::Scalar,
            data: smallvec![x],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: Shape::Vector(data.len()),
            data: Data::from_vec(data),
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Tensor {
            shape: Shape::Matrix(rows, cols),
            data: Data::from_vec(data),
        }
    }

    pub fn zeros(shape: Shape) -> Self {
        Tensor {
            shape,
            data: smallvec![0.0; shape.len()],
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn as_scalar(&self) -> Option<f64> {
        if self.shape.is_scalar() {
            Some(self.data[0])
        } else {
            None
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Handle to a node on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(pub usize);

#[derive(Clone, Debug)]
enum Op {
    /// Differentiable leaf backed by parameter slot `usize`.
    Leaf(usize),
    Constant,
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    /// Scalar `a^b` for `a > 0`.
    Pow(NodeId, NodeId),
    Neg(NodeId),
    Exp(NodeId),
    Log(NodeId),
    Sin(NodeId),
    Cos(NodeId),
    Abs(NodeId),
    Softplus(NodeId),
    Sigmoid(NodeId),
    /// `Matrix(r, c) * Vector(c) -> Vector(r)`.
    MatVec(NodeId, NodeId),
    Dot(NodeId, NodeId),
    Concat(NodeId, NodeId),
    /// Row `k` of a matrix.
    Row(NodeId, usize),
    Sum(NodeId),
    Softmax(NodeId),
    /// `-log(p[target])` for a probability vector `p`.
    CrossEntropy(NodeId, usize),
}

/// Errors surfaced by evaluation; domain errors carry the offending node index.
#[derive(Clone, Debug, PartialEq)]
pub enum TapeError {
    NonScalarRoot { shape: Shape },
    Domain { node: usize, reason: &'static str },
    NonFinite { node: usize },
}

impl core::fmt::Display for TapeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TapeError::NonScalarRoot { shape } => {
                write!(f, "evaluation root must be a scalar, got {shape}")
            }
            TapeError::Domain { node, reason } => write!(f, "node {node}: {reason}"),
            TapeError::NonFinite { node } => write!(f, "node {node}: non-finite value"),
        }
    }
}

impl core::error::Error for TapeError {}

/// Overflow-safe softplus: for large `x` returns `x + log1p(exp(-x))`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + libm::log1p(libm::exp(-x))
    } else {
        libm::log1p(libm::exp(x))
    }
}

/// Symmetric-safe logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

fn softmax_data(x: &[f64]) -> Data {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Data = x.iter().map(|&v| libm::exp(v - max)).collect();
    let total: f64 = out.iter().sum();
    for v in out.iter_mut() {
        *v /= total;
    }
    out
}

/// Named parameter arrays: the trainable state of a model.
///
/// Entries keep insertion order, which fixes initialization, gradient, and
/// serialization order everywhere.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet {
            entries: Vec::new(),
        }
    }

    pub fn insert(&mut self, name: &str, value: Tensor) {
        assert!(
            self.get(name).is_none(),
            "duplicate parameter name: {name}"
        );
        self.entries.push((name.to_string(), value));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries
            .iter_mut()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    /// Number of named arrays.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters across all arrays.
    pub fn total_len(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|(_, t)| t.all_finite())
    }
}

impl Default for ParamSet {
    fn default() -> Self {
        ParamSet::new()
    }
}

/// Gradients of a scalar root with respect to every registered parameter,
/// aligned by name with the tape's leaf order.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl Gradients {
    pub fn zeros_like(params: &ParamSet) -> Self {
        Gradients {
            names: params.iter().map(|(n, _)| n.to_string()).collect(),
            tensors: params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names
            .iter()
            .map(|n| n.as_str())
            .zip(self.tensors.iter())
    }

    /// Adds `other` into `self`; layouts must agree.
    pub fn accumulate(&mut self, other: &Gradients) {
        assert_eq!(self.names, other.names, "gradient layout mismatch");
        for (mine, theirs) in self.tensors.iter_mut().zip(other.tensors.iter()) {
            for (a, b) in mine.data.iter_mut().zip(theirs.data.iter()) {
                *a += b;
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for t in self.tensors.iter_mut() {
            for v in t.data.iter_mut() {
                *v *= c;
            }
        }
    }

    pub fn global_norm(&self) -> f64 {
        let ss: f64 = self
            .tensors
            .iter()
            .flat_map(|t| t.data.iter())
            .map(|v| v * v)
            .sum();
        libm::sqrt(ss)
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.all_finite())
    }
}

/// Recorded computation graph with cached forward values.
pub struct Tape {
    ops: Vec<Op>,
    values: Vec<Tensor>,
    params: Vec<(String, Tensor)>,
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            ops: Vec::new(),
            values: Vec::new(),
            params: Vec::new(),
        }
    }

    pub fn with_capacity(nodes: usize) -> Self {
        Tape {
            ops: Vec::with_capacity(nodes),
            values: Vec::with_capacity(nodes),
            params: Vec::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.ops.len()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.ops.push(op);
        self.values.push(value);
        NodeId(self.ops.len() - 1)
    }

    fn val(&self, id: NodeId) -> &Tensor {
        &self.values[id.0]
    }

    /// Forward value of a node (as recorded at build time).
    pub fn value(&self, id: NodeId) -> &Tensor {
        self.val(id)
    }

    /// Forward value of a scalar node.
    pub fn scalar_value(&self, id: NodeId) -> f64 {
        self.val(id).as_scalar().expect("node is not a scalar")
    }

    /// Registers a named differentiable leaf. Names must be unique per tape.
    pub fn leaf(&mut self, name: &str, value: Tensor) -> NodeId {
        assert!(
            self.params.iter().all(|(n, _)| n != name),
            "duplicate leaf name: {name}"
        );
        let slot = self.params.len();
        self.params.push((name.to_string(), value.clone()));
        self.push(Op::Leaf(slot), value)
    }

    /// Binds every array of a [`ParamSet`] as a leaf, in order.
    pub fn bind(&mut self, params: &ParamSet) -> Vec<NodeId> {
        params
            .iter()
            .map(|(name, value)| self.leaf(name, value.clone()))
            .collect()
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Constant, value)
    }

    pub fn scalar(&mut self, x: f64) -> NodeId {
        self.constant(Tensor::scalar(x))
    }

    fn binary(&mut self, op: fn(NodeId, NodeId) -> Op, a: NodeId, b: NodeId) -> NodeId {
        let value = eval_op_plain(&op(a, b), &self.values);
        self.push(op(a, b), value)
    }

    /// Elementwise addition; one side may be a scalar.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(Op::Add, a, b)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(Op::Sub, a, b)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(Op::Mul, a, b)
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(Op::Div, a, b)
    }

    /// Scalar power `a^b`; requires `a > 0` at evaluation time.
    pub fn pow(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert!(self.val(a).shape().is_scalar() && self.val(b).shape().is_scalar());
        self.binary(Op::Pow, a, b)
    }

    fn unary(&mut self, op: fn(NodeId) -> Op, x: NodeId) -> NodeId {
        let value = eval_op_plain(&op(x), &self.values);
        self.push(op(x), value)
    }

    pub fn neg(&mut self, x: NodeId) -> NodeId {
        self.unary(Op::Neg, x)
    }

    pub fn exp(&mut self, x: NodeId) -> NodeId {
        self.unary(Op::Exp, x)
    }

    pub fn log(&mut self, x: NodeId) -> NodeId {
        self.unary(Op::Log, x)
    }

    pub fn sin(&mut self, x: NodeId) -> NodeId {
        self.unary(Op::Sin, x)
    }

    pub fn cos(&mut self, x: NodeId) -> NodeId {
        self.unary(Op::Cos, x)
    }

    pub fn abs(&mut self, x: NodeId) -> NodeId {
        self.unary(Op::Abs, x)
    }

    pub fn softplus(&mut self, x: NodeId) -> NodeId {
        self.unary(Op::Softplus, x)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> NodeId {
        self.unary(Op::Sigmoid, x)
    }

    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> NodeId {
        match (self.val(w).shape(), self.val(x).shape()) {
            (Shape::Matrix(_, c), Shape::Vector(n)) if c == n => {}
            (a, b) => panic!("matvec shape mismatch: {a} * {b}"),
        }
        self.binary(Op::MatVec, w, x)
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> NodeId {
        match (self.val(a).shape(), self.val(b).shape()) {
            (Shape::Vector(n), Shape::Vector(m)) if n == m => {}
            (a, b) => panic!("dot shape mismatch: {a} . {b}"),
        }
        self.binary(Op::Dot, a, b)
    }

    pub fn concat(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert!(
            matches!(self.val(a).shape(), Shape::Vector(_))
                && matches!(self.val(b).shape(), Shape::Vector(_)),
            "concat expects vectors"
        );
        self.binary(Op::Concat, a, b)
    }

    pub fn row(&mut self, w: NodeId, k: usize) -> NodeId {
        match self.val(w).shape() {
            Shape::Matrix(r, _) if k < r => {}
            shape => panic!("row {k} out of range for {shape}"),
        }
        let value = eval_op_plain(&Op::Row(w, k), &self.values);
        self.push(Op::Row(w, k), value)
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        self.unary(Op::Sum, x)
    }

    pub fn softmax(&mut self, x: NodeId) -> NodeId {
        assert!(
            matches!(self.val(x).shape(), Shape::Vector(_)),
            "softmax expects a vector"
        );
        self.unary(Op::Softmax, x)
    }

    /// Categorical cross-entropy of a one-hot target against probabilities.
    pub fn cross_entropy(&mut self, probs: NodeId, target: usize) -> NodeId {
        match self.val(probs).shape() {
            Shape::Vector(n) if target < n => {}
            shape => panic!("cross-entropy target {target} out of range for {shape}"),
        }
        let value = eval_op_plain(&Op::CrossEntropy(probs, target), &self.values);
        self.push(Op::CrossEntropy(probs, target), value)
    }

    /// Domain-checked forward value of a scalar root, without gradients.
    pub fn root_value(&self, root: NodeId) -> Result<f64, TapeError> {
        self.check_through(root)?;
        self.val(root)
            .as_scalar()
            .ok_or(TapeError::NonScalarRoot {
                shape: self.val(root).shape(),
            })
    }

    /// Forward value and reverse-mode gradients of a scalar root.
    pub fn evaluate(&self, root: NodeId) -> Result<(f64, Gradients), TapeError> {
        let value = self.root_value(root)?;

        let mut adjoints: Vec<Option<Tensor>> = alloc::vec![None; root.0 + 1];
        adjoints[root.0] = Some(Tensor::scalar(1.0));
        let mut grads: Vec<Tensor> = self
            .params
            .iter()
            .map(|(_, t)| Tensor::zeros(t.shape()))
            .collect();

        for i in (0..=root.0).rev() {
            let Some(g) = adjoints[i].take() else {
                continue;
            };
            self.backward_step(i, &g, &mut adjoints, &mut grads);
        }

        Ok((
            value,
            Gradients {
                names: self.params.iter().map(|(n, _)| n.clone()).collect(),
                tensors: grads,
            },
        ))
    }

    /// Maximum relative error between reverse-mode gradients and central
    /// finite differences over every parameter element. Perturbations replay
    /// the recorded graph; stored parameters are untouched.
    pub fn grad_check(&self, root: NodeId, step: f64) -> Result<f64, TapeError> {
        assert!(step > 0.0, "grad_check step must be positive");
        let (_, grads) = self.evaluate(root)?;
        let mut values: Vec<Tensor> = self.params.iter().map(|(_, t)| t.clone()).collect();
        let mut max_rel = 0.0f64;
        for s in 0..values.len() {
            for e in 0..values[s].data.len() {
                let orig = values[s].data[e];
                values[s].data[e] = orig + step;
                let plus = self.forward_with(root, &values)?;
                values[s].data[e] = orig - step;
                let minus = self.forward_with(root, &values)?;
                values[s].data[e] = orig;
                let numeric = (plus - minus) / (2.0 * step);
                let analytic = grads.tensors[s].data[e];
                let rel = (analytic - numeric).abs() / numeric.abs().max(1.0);
                max_rel = max_rel.max(rel);
            }
        }
        Ok(max_rel)
    }

    /// Replays the forward pass with substituted leaf values.
    fn forward_with(&self, root: NodeId, params: &[Tensor]) -> Result<f64, TapeError> {
        debug_assert_eq!(params.len(), self.params.len());
        let mut values: Vec<Tensor> = Vec::with_capacity(root.0 + 1);
        for i in 0..=root.0 {
            let value = match &self.ops[i] {
                Op::Leaf(slot) => params[*slot].clone(),
                Op::Constant => self.values[i].clone(),
                op => eval_op_plain(op, &values),
            };
            check_op(i, &self.ops[i], &values, &value)?;
            values.push(value);
        }
        values[root.0]
            .as_scalar()
            .ok_or(TapeError::NonScalarRoot {
                shape: values[root.0].shape(),
            })
    }

    /// Domain/finiteness scan over the cached forward values.
    fn check_through(&self, root: NodeId) -> Result<(), TapeError> {
        for i in 0..=root.0 {
            check_op(i, &self.ops[i], &self.values, &self.values[i])?;
        }
        Ok(())
    }

    fn backward_step(
        &self,
        i: usize,
        g: &Tensor,
        adjoints: &mut [Option<Tensor>],
        grads: &mut [Tensor],
    ) {
        // Accumulates into an input's adjoint buffer.
        macro_rules! adj {
            ($id:expr) => {{
                let id: NodeId = $id;
                adjoints[id.0]
                    .get_or_insert_with(|| Tensor::zeros(self.values[id.0].shape()))
            }};
        }

        match &self.ops[i] {
            Op::Leaf(slot) => {
                for (dst, src) in grads[*slot].data.iter_mut().zip(g.data.iter()) {
                    *dst += src;
                }
            }
            Op::Constant => {}
            Op::Add(a, b) => {
                let (a, b) = (*a, *b);
                elementwise_backward(self.val(a).len(), g, adj!(a), |_, gi| gi);
                elementwise_backward(self.val(b).len(), g, adj!(b), |_, gi| gi);
            }
            Op::Sub(a, b) => {
                let (a, b) = (*a, *b);
                elementwise_backward(self.val(a).len(), g, adj!(a), |_, gi| gi);
                elementwise_backward(self.val(b).len(), g, adj!(b), |_, gi| -gi);
            }
            Op::Mul(a, b) => {
                let (a, b) = (*a, *b);
                let (va, vb) = (self.val(a), self.val(b));
                {
                    let adj_a = adj!(a);
                    for (idx, gi) in g.data.iter().enumerate() {
                        let ib = if vb.len() == 1 { 0 } else { idx };
                        let ia = if va.len() == 1 { 0 } else { idx };
                        adj_a.data[ia] += gi * vb.data[ib];
                    }
                }
                let adj_b = adj!(b);
                for (idx, gi) in g.data.iter().enumerate() {
                    let ib = if vb.len() == 1 { 0 } else { idx };
                    let ia = if va.len() == 1 { 0 } else { idx };
                    adj_b.data[ib] += gi * va.data[ia];
                }
            }
            Op::Div(a, b) => {
                let (a, b) = (*a, *b);
                let (va, vb) = (self.val(a), self.val(b));
                {
                    let adj_a = adj!(a);
                    for (idx, gi) in g.data.iter().enumerate() {
                        let ib = if vb.len() == 1 { 0 } else { idx };
                        let ia = if va.len() == 1 { 0 } else { idx };
                        adj_a.data[ia] += gi / vb.data[ib];
                    }
                }
                let adj_b = adj!(b);
                for (idx, gi) in g.data.iter().enumerate() {
                    let ib = if vb.len() == 1 { 0 } else { idx };
                    let ia = if va.len() == 1 { 0 } else { idx };
                    let d = vb.data[ib];
                    adj_b.data[ib] -= gi * va.data[ia] / (d * d);
                }
            }
            Op::Pow(a, b) => {
                let (a, b) = (*a, *b);
                let base = self.val(a).data[0];
                let expo = self.val(b).data[0];
                let out = self.values[i].data[0];
                let gi = g.data[0];
                adj!(a).data[0] += gi * expo * libm::pow(base, expo - 1.0);
                adj!(b).data[0] += gi * out * libm::log(base);
            }
            Op::Neg(x) => {
                let x = *x;
                elementwise_backward(self.val(x).len(), g, adj!(x), |_, gi| -gi);
            }
            Op::Exp(x) => {
                let x = *x;
                let out = &self.values[i];
                let adj_x = adj!(x);
                for (idx, gi) in g.data.iter().enumerate() {
                    adj_x.data[idx] += gi * out.data[idx];
                }
            }
            Op::Log(x) => {
                let x = *x;
                let vx = self.val(x);
                let adj_x = adj!(x);
                for (idx, gi) in g.data.iter().enumerate() {
                    adj_x.data[idx] += gi / vx.data[idx];
                }
            }
            Op::Sin(x) => {
                let x = *x;
                let vx = self.val(x);
                let adj_x = adj!(x);
                for (idx, gi) in g.data.iter().enumerate() {
                    adj_x.data[idx] += gi * libm::cos(vx.data[idx]);
                }
            }
            Op::Cos(x) => {
                let x = *x;
                let vx = self.val(x);
                let adj_x = adj!(x);
                for (idx, gi) in g.data.iter().enumerate() {
                    adj_x.data[idx] -= gi * libm::sin(vx.data[idx]);
                }
            }
            Op::Abs(x) => {
                let x = *x;
                let vx = self.val(x);
                let adj_x = adj!(x);
                for (idx, gi) in g.data.iter().enumerate() {
                    // Subgradient 0 at exactly 0.
                    let s = if vx.data[idx] > 0.0 {
                        1.0
                    } else if vx.data[idx] < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    adj_x.data[idx] += gi * s;
                }
            }
            Op::Softplus(x) => {
                let x = *x;
                let vx = self.val(x);
                let adj_x = adj!(x);
                for (idx, gi) in g.data.iter().enumerate() {
                    adj_x.data[idx] += gi * sigmoid(vx.data[idx]);
                }
            }
            Op::Sigmoid(x) => {
                let x = *x;
                let out = &self.values[i];
                let adj_x = adj!(x);
                for (idx, gi) in g.data.iter().enumerate() {
                    let s = out.data[idx];
                    adj_x.data[idx] += gi * s * (1.0 - s);
                }
            }
            Op::MatVec(w, x) => {
                let (w, x) = (*w, *x);
                let (rows, cols) = match self.val(w).shape() {
                    Shape::Matrix(r, c) => (r, c),
                    _ => unreachable!(),
                };
                let vw = self.val(w);
                let vx = self.val(x);
                {
                    let adj_w = adj!(w);
                    for r in 0..rows {
                        let gr = g.data[r];
                        if gr == 0.0 {
                            continue;
                        }
                        for c in 0..cols {
                            adj_w.data[r * cols + c] += gr * vx.data[c];
                        }
                    }
                }
                let adj_x = adj!(x);
                for r in 0..rows {
                    let gr = g.data[r];
                    if gr == 0.0 {
                        continue;
                    }
                    for c in 0..cols {
                        adj_x.data[c] += gr * vw.data[r * cols + c];
                    }
                }
            }
            Op::Dot(a, b) => {
                let (a, b) = (*a, *b);
                let gi = g.data[0];
                let va = self.val(a);
                let vb = self.val(b);
                {
                    let adj_a = adj!(a);
                    for (dst, src) in adj_a.data.iter_mut().zip(vb.data.iter()) {
                        *dst += gi * src;
                    }
                }
                let adj_b = adj!(b);
                for (dst, src) in adj_b.data.iter_mut().zip(va.data.iter()) {
                    *dst += gi * src;
                }
            }
            Op::Concat(a, b) => {
                let (a, b) = (*a, *b);
                let na = self.val(a).len();
                {
                    let adj_a = adj!(a);
                    for idx in 0..na {
                        adj_a.data[idx] += g.data[idx];
                    }
                }
                let nb = self.val(b).len();
                let adj_b = adj!(b);
                for idx in 0..nb {
                    adj_b.data[idx] += g.data[na + idx];
                }
            }
            Op::Row(w, k) => {
                let (w, k) = (*w, *k);
                let cols = match self.val(w).shape() {
                    Shape::Matrix(_, c) => c,
                    _ => unreachable!(),
                };
                let adj_w = adj!(w);
                for c in 0..cols {
                    adj_w.data[k * cols + c] += g.data[c];
                }
            }
            Op::Sum(x) => {
                let x = *x;
                let gi = g.data[0];
                let adj_x = adj!(x);
                for dst in adj_x.data.iter_mut() {
                    *dst += gi;
                }
            }
            Op::Softmax(x) => {
                let x = *x;
                let y = &self.values[i];
                let weighted: f64 = g.data.iter().zip(y.data.iter()).map(|(a, b)| a * b).sum();
                let adj_x = adj!(x);
                for (idx, gi) in g.data.iter().enumerate() {
                    adj_x.data[idx] += y.data[idx] * (gi - weighted);
                }
            }
            Op::CrossEntropy(p, target) => {
                let (p, target) = (*p, *target);
                let pt = self.val(p).data[target];
                adj!(p).data[target] -= g.data[0] / pt;
            }
        }
    }
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

fn elementwise_backward(
    input_len: usize,
    g: &Tensor,
    adj: &mut Tensor,
    f: impl Fn(usize, f64) -> f64,
) {
    if input_len == 1 && g.len() > 1 {
        // Broadcast scalar: adjoint is the sum over output elements.
        let mut total = 0.0;
        for (idx, gi) in g.data.iter().enumerate() {
            total += f(idx, *gi);
        }
        adj.data[0] += total;
    } else {
        for (idx, gi) in g.data.iter().enumerate() {
            adj.data[idx] += f(idx, *gi);
        }
    }
}

fn eval_op_plain(op: &Op, values: &[Tensor]) -> Tensor {
    let v = |id: &NodeId| &values[id.0];
    match op {
        Op::Leaf(_) | Op::Constant => unreachable!("leaves and constants carry their value"),
        Op::Add(a, b) => elementwise_binary(v(a), v(b), |x, y| x + y),
        Op::Sub(a, b) => elementwise_binary(v(a), v(b), |x, y| x - y),
        Op::Mul(a, b) => elementwise_binary(v(a), v(b), |x, y| x * y),
        Op::Div(a, b) => elementwise_binary(v(a), v(b), |x, y| x / y),
        Op::Pow(a, b) => Tensor::scalar(libm::pow(v(a).data[0], v(b).data[0])),
        Op::Neg(x) => elementwise_unary(v(x), |a| -a),
        Op::Exp(x) => elementwise_unary(v(x), libm::exp),
        Op::Log(x) => elementwise_unary(v(x), libm::log),
        Op::Sin(x) => elementwise_unary(v(x), libm::sin),
        Op::Cos(x) => elementwise_unary(v(x), libm::cos),
        Op::Abs(x) => elementwise_unary(v(x), f64::abs),
        Op::Softplus(x) => elementwise_unary(v(x), softplus),
        Op::Sigmoid(x) => elementwise_unary(v(x), sigmoid),
        Op::MatVec(w, x) => {
            let (rows, cols) = match v(w).shape() {
                Shape::Matrix(r, c) => (r, c),
                _ => unreachable!(),
            };
            let wd = &v(w).data;
            let xd = &v(x).data;
            let mut out: Data = smallvec![0.0; rows];
            for r in 0..rows {
                let mut acc = 0.0;
                for c in 0..cols {
                    acc += wd[r * cols + c] * xd[c];
                }
                out[r] = acc;
            }
            Tensor {
                shape: Shape::Vector(rows),
                data: out,
            }
        }
        Op::Dot(a, b) => {
            let acc: f64 = v(a)
                .data
                .iter()
                .zip(v(b).data.iter())
                .map(|(x, y)| x * y)
                .sum();
            Tensor::scalar(acc)
        }
        Op::Concat(a, b) => {
            let mut data: Data = v(a).data.clone();
            data.extend_from_slice(&v(b).data);
            let n = data.len();
            Tensor {
                shape: Shape::Vector(n),
                data,
            }
        }
        Op::Row(w, k) => {
            let cols = match v(w).shape() {
                Shape::Matrix(_, c) => c,
                _ => unreachable!(),
            };
            let data: Data = v(w).data[k * cols..(k + 1) * cols].iter().copied().collect();
            Tensor {
                shape: Shape::Vector(cols),
                data,
            }
        }
        Op::Sum(x) => Tensor::scalar(v(x).data.iter().sum()),
        Op::Softmax(x) => {
            let data = softmax_data(&v(x).data);
            Tensor {
                shape: v(x).shape(),
                data,
            }
        }
        Op::CrossEntropy(p, target) => Tensor::scalar(-libm::log(v(p).data[*target])),
    }
}

fn elementwise_binary(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let shape = match (a.shape(), b.shape()) {
        (sa, sb) if sa == sb => sa,
        (Shape::Scalar, sb) => sb,
        (sa, Shape::Scalar) => sa,
        (sa, sb) => panic!("elementwise shape mismatch: {sa} vs {sb}"),
    };
    let n = shape.len();
    let mut data: Data = smallvec![0.0; n];
    for (i, out) in data.iter_mut().enumerate() {
        let x = a.data[if a.len() == 1 { 0 } else { i }];
        let y = b.data[if b.len() == 1 { 0 } else { i }];
        *out = f(x, y);
    }
    Tensor { shape, data }
}

fn elementwise_unary(x: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor {
        shape: x.shape(),
        data: x.data.iter().map(|&v| f(v)).collect(),
    }
}

fn check_op(i: usize, op: &Op, inputs: &[Tensor], out: &Tensor) -> Result<(), TapeError> {
    match op {
        Op::Div(_, b) => {
            if inputs[b.0].data.iter().any(|&v| v == 0.0) {
                return Err(TapeError::Domain {
                    node: i,
                    reason: "division by zero",
                });
            }
        }
        Op::Log(x) => {
            if inputs[x.0].data.iter().any(|&v| v <= 0.0) {
                return Err(TapeError::Domain {
                    node: i,
                    reason: "log of non-positive value",
                });
            }
        }
        Op::Pow(a, _) => {
            if inputs[a.0].data[0] <= 0.0 {
                return Err(TapeError::Domain {
                    node: i,
                    reason: "power with non-positive base",
                });
            }
        }
        Op::CrossEntropy(p, target) => {
            if inputs[p.0].data[*target] <= 0.0 {
                return Err(TapeError::Domain {
                    node: i,
                    reason: "cross-entropy of non-positive probability",
                });
            }
        }
        _ => {}
    }
    if !out.all_finite() {
        return Err(TapeError::NonFinite { node: i });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let mut tape = Tape::new();
        let x = tape.leaf("x", Tensor::scalar(2.0));
        let y = tape.leaf("y", Tensor::scalar(3.0));
        let root = tape.mul(x, y);
        let (value, grads) = tape.evaluate(root).unwrap();
        assert_eq!(value, 6.0);
        assert_eq!(grads.get("x").unwrap().data()[0], 3.0);
        assert_eq!(grads.get("y").unwrap().data()[0], 2.0);
    }

    #[test]
    fn softplus_at_zero() {
        let mut tape = Tape::new();
        let x = tape.leaf("x", Tensor::scalar(0.0));
        let root = tape.softplus(x);
        let (value, grads) = tape.evaluate(root).unwrap();
        assert!((value - core::f64::consts::LN_2).abs() < 1e-15);
        assert!((grads.get("x").unwrap().data()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn softplus_overflow_safe() {
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
        assert!(sigmoid(800.0) <= 1.0);
        assert!(sigmoid(-800.0) >= 0.0);
    }

    #[test]
    fn abs_gradient_is_sign() {
        let mut tape = Tape::new();
        let x = tape.leaf("x", Tensor::scalar(-1.5));
        let root = tape.abs(x);
        let (value, grads) = tape.evaluate(root).unwrap();
        assert_eq!(value, 1.5);
        assert_eq!(grads.get("x").unwrap().data()[0], -1.0);
    }

    #[test]
    fn abs_gradient_zero_at_zero() {
        let mut tape = Tape::new();
        let x = tape.leaf("x", Tensor::scalar(0.0));
        let root = tape.abs(x);
        let (_, grads) = tape.evaluate(root).unwrap();
        assert_eq!(grads.get("x").unwrap().data()[0], 0.0);
    }

    #[test]
    fn polynomial_grad_check_tight() {
        // f(x, y) = x^3 y + sin(x) - y / x
        let mut tape = Tape::new();
        let x = tape.leaf("x", Tensor::scalar(1.3));
        let y = tape.leaf("y", Tensor::scalar(-0.7));
        let three = tape.scalar(3.0);
        let x3 = tape.pow(x, three);
        let t1 = tape.mul(x3, y);
        let sx = tape.sin(x);
        let t2 = tape.add(t1, sx);
        let q = tape.div(y, x);
        let root = tape.sub(t2, q);
        let err = tape.grad_check(root, 1e-5).unwrap();
        assert!(err <= 1e-6, "grad check error {err}");
    }

    #[test]
    fn grad_check_without_params_is_zero() {
        let mut tape = Tape::new();
        let a = tape.scalar(2.0);
        let b = tape.scalar(5.0);
        let root = tape.mul(a, b);
        assert_eq!(tape.grad_check(root, 1e-5).unwrap(), 0.0);
    }

    #[test]
    fn softmax_normalizes() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![1.0, -2.0, 0.5, 30.0]));
        let y = tape.softmax(x);
        let out = tape.value(y);
        assert!(out.data().iter().all(|&p| p > 0.0));
        let total: f64 = out.data().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_shift_invariant() {
        let logits = vec![0.3, -1.2, 2.0];
        let shifted: Vec<f64> = logits.iter().map(|v| v + 17.5).collect();
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::vector(logits));
        let b = tape.constant(Tensor::vector(shifted));
        let pa = tape.softmax(a);
        let pb = tape.softmax(b);
        for (x, y) in tape.value(pa).data().iter().zip(tape.value(pb).data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_nonnegative_and_zero_only_when_degenerate() {
        let mut tape = Tape::new();
        let p = tape.constant(Tensor::vector(vec![0.2, 0.7, 0.1]));
        let ce = tape.cross_entropy(p, 1);
        assert!(tape.scalar_value(ce) > 0.0);
        let q = tape.constant(Tensor::vector(vec![0.0, 1.0, 0.0]));
        let ce2 = tape.cross_entropy(q, 1);
        assert_eq!(tape.scalar_value(ce2), 0.0);
    }

    #[test]
    fn matvec_and_concat_values() {
        let mut tape = Tape::new();
        let w = tape.constant(Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let x = tape.constant(Tensor::vector(vec![1.0, 0.0, -1.0]));
        let y = tape.matvec(w, x);
        assert_eq!(tape.value(y).data(), &[-2.0, -2.0]);
        let z = tape.concat(y, x);
        assert_eq!(tape.value(z).data(), &[-2.0, -2.0, 1.0, 0.0, -1.0]);
    }

    #[test]
    fn domain_error_reports_node_index() {
        let mut tape = Tape::new();
        let x = tape.leaf("x", Tensor::scalar(-1.0));
        let l = tape.log(x);
        match tape.evaluate(l) {
            Err(TapeError::Domain { node, .. }) => assert_eq!(node, l.0),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn division_by_zero_is_a_domain_error() {
        let mut tape = Tape::new();
        let x = tape.leaf("x", Tensor::scalar(1.0));
        let z = tape.scalar(0.0);
        let q = tape.div(x, z);
        assert!(matches!(
            tape.evaluate(q),
            Err(TapeError::Domain { reason: "division by zero", .. })
        ));
    }

    #[test]
    fn non_scalar_root_rejected() {
        let mut tape = Tape::new();
        let x = tape.leaf("x", Tensor::vector(vec![1.0, 2.0]));
        assert!(matches!(
            tape.evaluate(x),
            Err(TapeError::NonScalarRoot { .. })
        ));
    }

    #[test]
    fn evaluate_is_deterministic_bitwise() {
        let build = || {
            let mut tape = Tape::new();
            let x = tape.leaf("x", Tensor::vector(vec![0.3, -1.1, 2.2]));
            let w = tape.leaf("w", Tensor::matrix(3, 3, (0..9).map(|i| 0.1 * i as f64).collect()));
            let y = tape.matvec(w, x);
            let s = tape.softmax(y);
            let ce = tape.cross_entropy(s, 2);
            let d = tape.dot(y, x);
            let a = tape.abs(d);
            let root = tape.add(ce, a);
            tape.evaluate(root).unwrap()
        };
        let (v1, g1) = build();
        let (v2, g2) = build();
        assert_eq!(v1.to_bits(), v2.to_bits());
        for ((_, a), (_, b)) in g1.iter().zip(g2.iter()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    fn mixed_graph(tape: &mut Tape) -> NodeId {
        // Exercises every primitive with vector/matrix parameters.
        let x = tape.leaf("x", Tensor::vector(vec![0.8, -0.4, 1.6]));
        let w = tape.leaf(
            "w",
            Tensor::matrix(3, 3, vec![0.5, -0.2, 0.1, 0.3, 0.9, -0.6, 0.2, 0.1, 0.4]),
        );
        let b = tape.leaf("b", Tensor::scalar(0.35));
        let y = tape.matvec(w, x);
        let yb = tape.add(y, b);
        let sp = tape.softplus(yb);
        let sg = tape.sigmoid(y);
        let mixed = tape.mul(sp, sg);
        let c = tape.concat(mixed, x);
        let s = tape.softmax(c);
        let ce = tape.cross_entropy(s, 1);
        let d = tape.dot(mixed, x);
        let sinv = tape.sin(d);
        let cosv = tape.cos(d);
        let ratio = tape.div(sinv, cosv);
        let r = tape.row(w, 1);
        let rx = tape.dot(r, x);
        let e = tape.exp(rx);
        let sum = tape.sum(c);
        let a = tape.abs(ratio);
        let t1 = tape.add(ce, a);
        let t2 = tape.add(e, sum);
        let neg = tape.neg(t2);
        let total = tape.sub(t1, neg);
        let lg = tape.log(e);
        tape.add(total, lg)
    }

    #[test]
    fn mixed_graph_grad_check() {
        let mut tape = Tape::new();
        let root = mixed_graph(&mut tape);
        let err = tape.grad_check(root, 1e-6).unwrap();
        assert!(err <= 1e-7, "grad check error {err}");
    }

    proptest::proptest! {
        #[test]
        fn primitives_match_finite_differences(
            xs in proptest::collection::vec(-3.0f64..3.0, 3),
            ws in proptest::collection::vec(-3.0f64..3.0, 9),
            bias in -3.0f64..3.0,
        ) {
            let mut tape = Tape::new();
            let x = tape.leaf("x", Tensor::vector(xs));
            let w = tape.leaf("w", Tensor::matrix(3, 3, ws));
            let b = tape.leaf("b", Tensor::scalar(bias));
            let y = tape.matvec(w, x);
            let yb = tape.add(y, b);
            let sp = tape.softplus(yb);
            let sg = tape.sigmoid(yb);
            let m = tape.mul(sp, sg);
            let sm = tape.softmax(m);
            let ce = tape.cross_entropy(sm, 0);
            let d = tape.dot(m, x);
            let sd = tape.sin(d);
            let cd = tape.cos(d);
            let mix = tape.mul(sd, cd);
            let a = tape.abs(mix);
            let e = tape.exp(a);
            let root0 = tape.add(ce, e);
            let s = tape.sum(sp);
            let root = tape.add(root0, s);
            let err = tape.grad_check(root, 1e-5).unwrap();
            proptest::prop_assert!(err <= 1e-4, "grad check error {}", err);
        }
    }
}
