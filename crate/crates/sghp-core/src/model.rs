//! The sigmoid-gated Hawkes process model.
//!
//! Events are embedded as the concatenation of a learned type embedding and a
//! sinusoidal temporal encoding (plus a linear covariate embedding when
//! covariates are present). Histories are summarized without attention: the
//! encoder weighs past embeddings with a learned triggering kernel
//!
//! ```text
//! h_j = sum_{i <= j} q_{k_i k_j}(|t_i - t_j|) x_i
//! q(d) = sigma^2 (1 + dist / (2 alpha ell^2))^{-alpha} (1 + e^{p - d})^{-s}
//! ```
//!
//! where `q` multiplies a rational-quadratic decay with a generalized logistic
//! gate, so a pair can express both monotone decay and a local-in-time bump.
//! The five kernel parameters per ordered type pair come from softplus heads
//! over concatenated type embeddings, keeping the head parameter count
//! independent of the number of type pairs.
//!
//! Decoding is direct: a stochastic softplus layer predicts the next
//! inter-arrival gap (mean over `M` uniform-noise samples) and a softmax head
//! predicts the next type. The training loss is l1 on gaps plus categorical
//! cross-entropy, built on [`Tape`] so it differentiates through every
//! parameter.

use alloc::string::String;
use alloc::vec::Vec;

use crate::data::{Event, EventSequence};
use crate::rng::Stream;
use crate::tape::{self, Gradients, NodeId, ParamSet, Shape, Tape, TapeError, Tensor};

/// Model shape and behavior switches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    /// Number of event types `K`.
    pub num_types: usize,
    /// Embedding dimension `D`; must be even so sin/cos pair up.
    pub embedding_dim: usize,
    /// Covariate dimension `C`; 0 when the data carries no covariates.
    pub covariate_dim: usize,
    /// Noise samples `M` for the stochastic arrival decoder.
    pub noise_samples: usize,
    /// Use `d^2` in the rational-quadratic factor (the RQ definition) rather
    /// than the plain `d` printed in the gated form.
    pub use_squared_distance: bool,
    /// Include the `i = j` term of the history sum, so a first event still
    /// produces a nonzero history vector.
    pub include_self_term: bool,
    /// Average the l1 loss over all `M` samples instead of taking the l1 of
    /// the sample mean.
    pub per_sample_l1: bool,
}

impl ModelConfig {
    pub fn new(num_types: usize, embedding_dim: usize, covariate_dim: usize) -> Self {
        ModelConfig {
            num_types,
            embedding_dim,
            covariate_dim,
            noise_samples: 10,
            use_squared_distance: true,
            include_self_term: true,
            per_sample_l1: false,
        }
    }

    /// History dimension: `2D` without covariates, `3D` with.
    pub fn history_dim(&self) -> usize {
        if self.covariate_dim > 0 {
            3 * self.embedding_dim
        } else {
            2 * self.embedding_dim
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.num_types == 0 {
            return Err(ModelError::NoTypes);
        }
        if self.embedding_dim == 0 || self.embedding_dim % 2 != 0 {
            return Err(ModelError::OddEmbeddingDim {
                dim: self.embedding_dim,
            });
        }
        if self.noise_samples == 0 {
            return Err(ModelError::NoNoiseSamples);
        }
        Ok(())
    }
}

/// The five positive parameters of the gated triggering kernel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GateKernelParams {
    /// Scale; the kernel value is bounded by `sigma^2`.
    pub sigma: f64,
    /// Rational-quadratic shape.
    pub alpha: f64,
    /// Rational-quadratic length scale.
    pub ell: f64,
    /// Gate location: where the sigmoid turns on.
    pub p: f64,
    /// Gate rate: how sharply it turns on.
    pub s: f64,
}

/// Rational-quadratic kernel `sigma^2 (1 + d^2 / (2 alpha ell^2))^{-alpha}`.
pub fn rq_kernel(d: f64, sigma: f64, alpha: f64, ell: f64) -> f64 {
    let ratio = d * d / (2.0 * alpha * ell * ell);
    sigma * sigma * libm::exp(-alpha * libm::log1p(ratio))
}

/// Gated kernel value, computed in exponent-of-log form so large `p` or `d`
/// cannot overflow: both factors are `exp` of a non-positive quantity.
pub fn gated_kernel(d: f64, theta: &GateKernelParams, use_squared_distance: bool) -> f64 {
    let dist = if use_squared_distance { d * d } else { d };
    let ratio = dist / (2.0 * theta.alpha * theta.ell * theta.ell);
    let rq = libm::exp(-theta.alpha * libm::log1p(ratio));
    let gate = libm::exp(-theta.s * tape::softplus(theta.p - d));
    theta.sigma * theta.sigma * (rq * gate)
}

/// Model errors; tape-level failures bubble up with node context.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelError {
    NoTypes,
    OddEmbeddingDim { dim: usize },
    NoNoiseSamples,
    TypeOutOfRange { type_index: usize, num_types: usize },
    CovariateMismatch { expected: usize, found: usize },
    UnorderedSequence,
    SequenceTooShort { len: usize },
    EmptyPrefix,
    BadParams(String),
    Tape(TapeError),
}

impl core::fmt::Display for ModelError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ModelError::NoTypes => write!(f, "model needs at least one event type"),
            ModelError::OddEmbeddingDim { dim } => {
                write!(f, "embedding dimension must be even and positive, got {dim}")
            }
            ModelError::NoNoiseSamples => write!(f, "noise sample count must be at least 1"),
            ModelError::TypeOutOfRange {
                type_index,
                num_types,
            } => write!(f, "type index {type_index} out of range (K = {num_types})"),
            ModelError::CovariateMismatch { expected, found } => {
                write!(f, "covariate length mismatch: expected {expected}, found {found}")
            }
            ModelError::UnorderedSequence => write!(f, "sequence timestamps are not increasing"),
            ModelError::SequenceTooShort { len } => {
                write!(f, "sequence too short: length {len}, need at least 2")
            }
            ModelError::EmptyPrefix => write!(f, "history prefix is empty"),
            ModelError::BadParams(what) => write!(f, "bad parameter set: {what}"),
            ModelError::Tape(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for ModelError {}

impl From<TapeError> for ModelError {
    fn from(e: TapeError) -> Self {
        ModelError::Tape(e)
    }
}

/// Kernel parameter heads, in fixed order.
const HEADS: [&str; 5] = ["sigma", "alpha", "ell", "p", "s"];

fn head_weight_name(r: &str) -> String {
    let mut s = String::from("head_");
    s.push_str(r);
    s.push_str("_weight");
    s
}

fn head_bias_name(r: &str) -> String {
    let mut s = String::from("head_");
    s.push_str(r);
    s.push_str("_bias");
    s
}

/// Expected parameter layout for a configuration, in canonical order.
fn expected_layout(cfg: &ModelConfig) -> Vec<(String, Shape)> {
    let (k, d, c, h) = (
        cfg.num_types,
        cfg.embedding_dim,
        cfg.covariate_dim,
        cfg.history_dim(),
    );
    let mut layout = Vec::new();
    layout.push((String::from("type_embeddings"), Shape::Matrix(k, d)));
    layout.push((String::from("temporal_scales"), Shape::Vector(d)));
    for r in HEADS {
        layout.push((head_weight_name(r), Shape::Vector(2 * d)));
        layout.push((head_bias_name(r), Shape::Scalar));
    }
    if c > 0 {
        layout.push((String::from("covariate_weight"), Shape::Matrix(d, c)));
        layout.push((String::from("covariate_bias"), Shape::Vector(d)));
    }
    layout.push((String::from("mix_history"), Shape::Matrix(h, h)));
    layout.push((String::from("mix_noise"), Shape::Matrix(h, h)));
    layout.push((String::from("time_weight"), Shape::Vector(h)));
    layout.push((String::from("time_bias"), Shape::Scalar));
    layout.push((String::from("type_weight"), Shape::Matrix(k, h)));
    layout.push((String::from("type_bias"), Shape::Vector(k)));
    layout
}

/// Total trainable scalar count for a configuration.
pub fn expected_param_count(cfg: &ModelConfig) -> usize {
    expected_layout(cfg).iter().map(|(_, s)| s.len()).sum()
}

/// Samples and type probabilities for the next event after a prefix.
#[derive(Clone, Debug, PartialEq)]
pub struct NextPrediction {
    /// The `M` sampled inter-arrival gaps, all strictly positive.
    pub gap_samples: Vec<f64>,
    /// Sample mean, the point prediction for the next gap.
    pub mean_gap: f64,
    /// Next-type probabilities; positive, summing to 1.
    pub type_probs: Vec<f64>,
}

impl NextPrediction {
    pub fn predicted_type(&self) -> usize {
        let mut best = 0;
        for (k, p) in self.type_probs.iter().enumerate() {
            if *p > self.type_probs[best] {
                best = k;
            }
        }
        best
    }
}

/// Configuration plus trainable parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SghpModel {
    cfg: ModelConfig,
    params: ParamSet,
}

impl SghpModel {
    /// Initializes parameters from a seed: weights uniform in
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, temporal scales at 1, biases at 0.
    pub fn init(cfg: ModelConfig, seed: u64) -> Result<Self, ModelError> {
        cfg.validate()?;
        let mut stream = Stream::derived(seed, &[crate::rng::tag::INIT]);
        let (d, c, h) = (cfg.embedding_dim, cfg.covariate_dim, cfg.history_dim());
        let mut params = ParamSet::new();
        for (name, shape) in expected_layout(&cfg) {
            let fan_in = match name.as_str() {
                "type_embeddings" => d,
                "temporal_scales" => 0, // initialized to ones below
                "covariate_weight" => c,
                "mix_history" | "mix_noise" | "time_weight" | "type_weight" => h,
                n if n.starts_with("head_") && n.ends_with("_weight") => 2 * d,
                _ => 0, // biases start at zero
            };
            let tensor = if name == "temporal_scales" {
                Tensor::vector(alloc::vec![1.0; d])
            } else if fan_in == 0 {
                Tensor::zeros(shape)
            } else {
                let bound = 1.0 / libm::sqrt(fan_in as f64);
                let mut data = Vec::with_capacity(shape.len());
                for _ in 0..shape.len() {
                    data.push(stream.next_range(-bound, bound));
                }
                match shape {
                    Shape::Scalar => Tensor::scalar(data[0]),
                    Shape::Vector(_) => Tensor::vector(data),
                    Shape::Matrix(r, cc) => Tensor::matrix(r, cc, data),
                }
            };
            params.insert(&name, tensor);
        }
        Ok(SghpModel { cfg, params })
    }

    /// Rebuilds a model from a configuration and parameter set, checking the
    /// exact canonical layout.
    pub fn from_parts(cfg: ModelConfig, params: ParamSet) -> Result<Self, ModelError> {
        cfg.validate()?;
        let expected = expected_layout(&cfg);
        if params.len() != expected.len() {
            return Err(ModelError::BadParams(String::from(
                "wrong number of parameter arrays",
            )));
        }
        for ((name, shape), (got_name, got)) in expected.iter().zip(params.iter()) {
            if name != got_name || *shape != got.shape() {
                return Err(ModelError::BadParams(got_name.into()));
            }
        }
        Ok(SghpModel { cfg, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.params.total_len()
    }

    fn check_events(&self, events: &[Event]) -> Result<(), ModelError> {
        let mut prev = f64::NEG_INFINITY;
        for ev in events {
            if ev.type_index >= self.cfg.num_types {
                return Err(ModelError::TypeOutOfRange {
                    type_index: ev.type_index,
                    num_types: self.cfg.num_types,
                });
            }
            let found = ev.covariates.as_ref().map(|z| z.len()).unwrap_or(0);
            if found != self.cfg.covariate_dim {
                return Err(ModelError::CovariateMismatch {
                    expected: self.cfg.covariate_dim,
                    found,
                });
            }
            if !(ev.timestamp > prev) {
                return Err(ModelError::UnorderedSequence);
            }
            prev = ev.timestamp;
        }
        Ok(())
    }

    /// Temporal encoding of a (1-based) position and absolute time.
    pub fn temporal_encoding(&self, position: usize, t: f64) -> Vec<f64> {
        let mut b = GraphBuilder::new(self);
        let node = b.temporal_encoding(position, t);
        b.tape.value(node).data().to_vec()
    }

    /// Embedding row for an event type.
    pub fn type_embedding(&self, k: usize) -> Result<Vec<f64>, ModelError> {
        if k >= self.cfg.num_types {
            return Err(ModelError::TypeOutOfRange {
                type_index: k,
                num_types: self.cfg.num_types,
            });
        }
        let mut b = GraphBuilder::new(self);
        let node = b.type_embedding(k);
        Ok(b.tape.value(node).data().to_vec())
    }

    /// Full event embedding `[type | temporal (| covariate)]` at a position.
    pub fn event_embedding(&self, event: &Event, position: usize) -> Result<Vec<f64>, ModelError> {
        self.check_events(core::slice::from_ref(event))?;
        let mut b = GraphBuilder::new(self);
        let node = b.event_embedding(event, position)?;
        Ok(b.tape.value(node).data().to_vec())
    }

    /// Gated-kernel parameters for the ordered pair (source `u`, target `v`),
    /// computed from the softplus heads over `[e_v | e_u]`.
    pub fn kernel_params(&self, u: usize, v: usize) -> Result<GateKernelParams, ModelError> {
        for k in [u, v] {
            if k >= self.cfg.num_types {
                return Err(ModelError::TypeOutOfRange {
                    type_index: k,
                    num_types: self.cfg.num_types,
                });
            }
        }
        let d = self.cfg.embedding_dim;
        let w = self.params.get("type_embeddings").unwrap().data();
        let mut cat = Vec::with_capacity(2 * d);
        cat.extend_from_slice(&w[v * d..(v + 1) * d]);
        cat.extend_from_slice(&w[u * d..(u + 1) * d]);
        let mut out = [0.0f64; 5];
        for (slot, r) in HEADS.iter().enumerate() {
            let weight = self.params.get(&head_weight_name(r)).unwrap().data();
            let bias = self.params.get(&head_bias_name(r)).unwrap().data()[0];
            let lin: f64 = weight.iter().zip(cat.iter()).map(|(a, b)| a * b).sum();
            out[slot] = tape::softplus(lin + bias);
        }
        Ok(GateKernelParams {
            sigma: out[0],
            alpha: out[1],
            ell: out[2],
            p: out[3],
            s: out[4],
        })
    }

    /// Learned kernel value `q_{uv}(d)`.
    pub fn kernel_value(&self, u: usize, v: usize, d: f64) -> Result<f64, ModelError> {
        let theta = self.kernel_params(u, v)?;
        Ok(gated_kernel(d, &theta, self.cfg.use_squared_distance))
    }

    /// History vector over a full prefix (positions `1..=len`).
    pub fn encode_history(&self, prefix: &[Event]) -> Result<Vec<f64>, ModelError> {
        if prefix.is_empty() {
            return Err(ModelError::EmptyPrefix);
        }
        self.check_events(prefix)?;
        let mut b = GraphBuilder::new(self);
        let xs = b.embed_all(prefix)?;
        let h = b.history(&xs, prefix, prefix.len() - 1);
        Ok(b.tape.value(h).data().to_vec())
    }

    /// Stochastic next-event prediction from a nonempty prefix.
    pub fn predict_next(
        &self,
        prefix: &[Event],
        noise: &mut Stream,
    ) -> Result<NextPrediction, ModelError> {
        if prefix.is_empty() {
            return Err(ModelError::EmptyPrefix);
        }
        self.check_events(prefix)?;
        let mut b = GraphBuilder::new(self);
        let xs = b.embed_all(prefix)?;
        let h = b.history(&xs, prefix, prefix.len() - 1);
        let noise_vecs = b.draw_noise(noise);
        let (samples, mean) = b.predict_arrival(h, &noise_vecs);
        let probs = b.predict_type(h);
        Ok(NextPrediction {
            gap_samples: samples.iter().map(|&id| b.tape.scalar_value(id)).collect(),
            mean_gap: b.tape.scalar_value(mean),
            type_probs: b.tape.value(probs).data().to_vec(),
        })
    }

    /// Builds the differentiable loss for one sequence:
    /// `sum_j |gap_pred(j+1) - gap(j+1)| + ce(type(j+1))`.
    ///
    /// Returns the tape and the scalar root; evaluate the root for the value
    /// and gradients. Targets follow the gap convention: the decoder predicts
    /// `t_{j+1} - t_j`.
    pub fn sequence_loss(
        &self,
        seq: &EventSequence,
        noise: &mut Stream,
    ) -> Result<(Tape, NodeId), ModelError> {
        if seq.len() < 2 {
            return Err(ModelError::SequenceTooShort { len: seq.len() });
        }
        self.check_events(&seq.events)?;

        let mut b = GraphBuilder::new(self);
        let xs = b.embed_all(&seq.events)?;
        let inv_m = b.tape.scalar(1.0 / self.cfg.noise_samples as f64);
        let mut total: Option<NodeId> = None;
        for j in 0..seq.len() - 1 {
            let h = b.history(&xs, &seq.events, j);
            let noise_vecs = b.draw_noise(noise);
            let (samples, mean) = b.predict_arrival(h, &noise_vecs);
            let gap = seq.events[j + 1].timestamp - seq.events[j].timestamp;
            let gap_node = b.tape.scalar(gap);
            let l1 = if self.cfg.per_sample_l1 {
                let mut acc: Option<NodeId> = None;
                for &t_m in &samples {
                    let diff = b.tape.sub(t_m, gap_node);
                    let a = b.tape.abs(diff);
                    acc = Some(match acc {
                        None => a,
                        Some(prev) => b.tape.add(prev, a),
                    });
                }
                let sum = acc.unwrap();
                b.tape.mul(sum, inv_m)
            } else {
                let diff = b.tape.sub(mean, gap_node);
                b.tape.abs(diff)
            };
            let probs = b.predict_type(h);
            let ce = b.tape.cross_entropy(probs, seq.events[j + 1].type_index);
            let term = b.tape.add(l1, ce);
            total = Some(match total {
                None => term,
                Some(prev) => b.tape.add(prev, term),
            });
        }
        Ok((b.tape, total.unwrap()))
    }

    /// Loss value and gradients for one sequence.
    pub fn loss_and_grads(
        &self,
        seq: &EventSequence,
        noise: &mut Stream,
    ) -> Result<(f64, Gradients), ModelError> {
        let (tape, root) = self.sequence_loss(seq, noise)?;
        Ok(tape.evaluate(root)?)
    }

    /// Loss value only (no backward pass).
    pub fn loss_value(&self, seq: &EventSequence, noise: &mut Stream) -> Result<f64, ModelError> {
        let (tape, root) = self.sequence_loss(seq, noise)?;
        Ok(tape.root_value(root)?)
    }
}

/// Per-pair kernel parameter nodes with shared derived factors.
struct GateNodes {
    alpha: NodeId,
    p: NodeId,
    s: NodeId,
    sigma_sq: NodeId,
    /// `2 alpha ell^2`, the rational-quadratic denominator.
    denom: NodeId,
}

/// Incrementally builds the computation graph for one sequence.
struct GraphBuilder<'m> {
    tape: Tape,
    cfg: &'m ModelConfig,
    // Bound parameter leaves.
    embeddings: NodeId,
    scales: NodeId,
    heads: [(NodeId, NodeId); 5],
    covariate: Option<(NodeId, NodeId)>,
    mix_history: NodeId,
    mix_noise: NodeId,
    time_weight: NodeId,
    time_bias: NodeId,
    type_weight: NodeId,
    type_bias: NodeId,
    // Shared constants and caches.
    one: NodeId,
    mask_even: NodeId,
    mask_odd: NodeId,
    freqs: Vec<f64>,
    type_rows: Vec<Option<NodeId>>,
    gates: Vec<Option<GateNodes>>,
}

impl<'m> GraphBuilder<'m> {
    fn new(model: &'m SghpModel) -> Self {
        let cfg = &model.cfg;
        let d = cfg.embedding_dim;
        let mut tape = Tape::with_capacity(256);
        let leaf =
            |tape: &mut Tape, name: &str| tape.leaf(name, model.params.get(name).unwrap().clone());
        let embeddings = leaf(&mut tape, "type_embeddings");
        let scales = leaf(&mut tape, "temporal_scales");
        let heads = [
            (
                leaf(&mut tape, "head_sigma_weight"),
                leaf(&mut tape, "head_sigma_bias"),
            ),
            (
                leaf(&mut tape, "head_alpha_weight"),
                leaf(&mut tape, "head_alpha_bias"),
            ),
            (
                leaf(&mut tape, "head_ell_weight"),
                leaf(&mut tape, "head_ell_bias"),
            ),
            (
                leaf(&mut tape, "head_p_weight"),
                leaf(&mut tape, "head_p_bias"),
            ),
            (
                leaf(&mut tape, "head_s_weight"),
                leaf(&mut tape, "head_s_bias"),
            ),
        ];
        let covariate = if cfg.covariate_dim > 0 {
            Some((
                leaf(&mut tape, "covariate_weight"),
                leaf(&mut tape, "covariate_bias"),
            ))
        } else {
            None
        };
        let mix_history = leaf(&mut tape, "mix_history");
        let mix_noise = leaf(&mut tape, "mix_noise");
        let time_weight = leaf(&mut tape, "time_weight");
        let time_bias = leaf(&mut tape, "time_bias");
        let type_weight = leaf(&mut tape, "type_weight");
        let type_bias = leaf(&mut tape, "type_bias");

        let one = tape.scalar(1.0);
        let mask_even = tape.constant(Tensor::vector(
            (0..d).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect(),
        ));
        let mask_odd = tape.constant(Tensor::vector(
            (0..d).map(|i| if i % 2 == 1 { 1.0 } else { 0.0 }).collect(),
        ));
        // w_d = 1 / 10000^{2d/D}
        let freqs = (0..d)
            .map(|i| libm::exp(-(2.0 * i as f64 / d as f64) * libm::log(10_000.0)))
            .collect();

        GraphBuilder {
            tape,
            cfg,
            embeddings,
            scales,
            heads,
            covariate,
            mix_history,
            mix_noise,
            time_weight,
            time_bias,
            type_weight,
            type_bias,
            one,
            mask_even,
            mask_odd,
            freqs,
            type_rows: alloc::vec![None; cfg.num_types],
            gates: core::iter::repeat_with(|| None)
                .take(cfg.num_types * cfg.num_types)
                .collect(),
        }
    }

    fn type_embedding(&mut self, k: usize) -> NodeId {
        if let Some(id) = self.type_rows[k] {
            return id;
        }
        let id = self.tape.row(self.embeddings, k);
        self.type_rows[k] = Some(id);
        id
    }

    /// `enc_d = sin(w_d i + omega_d t)` for even `d`, `cos` for odd.
    fn temporal_encoding(&mut self, position: usize, t: f64) -> NodeId {
        let base: Vec<f64> = self.freqs.iter().map(|w| w * position as f64).collect();
        let base = self.tape.constant(Tensor::vector(base));
        let t_node = self.tape.scalar(t);
        let shift = self.tape.mul(self.scales, t_node);
        let phase = self.tape.add(base, shift);
        let sin = self.tape.sin(phase);
        let cos = self.tape.cos(phase);
        let sin_even = self.tape.mul(sin, self.mask_even);
        let cos_odd = self.tape.mul(cos, self.mask_odd);
        self.tape.add(sin_even, cos_odd)
    }

    fn event_embedding(&mut self, ev: &Event, position: usize) -> Result<NodeId, ModelError> {
        let e = self.type_embedding(ev.type_index);
        let enc = self.temporal_encoding(position, ev.timestamp);
        let mut x = self.tape.concat(e, enc);
        if let Some((w, b)) = self.covariate {
            let z = ev.covariates.as_deref().unwrap_or(&[]);
            if z.len() != self.cfg.covariate_dim {
                return Err(ModelError::CovariateMismatch {
                    expected: self.cfg.covariate_dim,
                    found: z.len(),
                });
            }
            let z = self.tape.constant(Tensor::vector(z.to_vec()));
            let mapped = self.tape.matvec(w, z);
            let u = self.tape.add(mapped, b);
            x = self.tape.concat(x, u);
        }
        Ok(x)
    }

    /// Embeddings for every event, 1-based positions.
    fn embed_all(&mut self, events: &[Event]) -> Result<Vec<NodeId>, ModelError> {
        events
            .iter()
            .enumerate()
            .map(|(i, ev)| self.event_embedding(ev, i + 1))
            .collect()
    }

    /// Kernel parameter nodes for the ordered pair (source `u`, target `v`),
    /// built once per pair: `theta_r = softplus(W_r . [e_v | e_u] + b_r)`.
    fn kernel_param_nodes(&mut self, u: usize, v: usize) -> usize {
        let slot = u * self.cfg.num_types + v;
        if self.gates[slot].is_some() {
            return slot;
        }
        let e_u = self.type_embedding(u);
        let e_v = self.type_embedding(v);
        let cat = self.tape.concat(e_v, e_u);
        let mut theta = [NodeId(0); 5];
        for (i, (w, b)) in self.heads.iter().enumerate() {
            let lin = self.tape.dot(*w, cat);
            let pre = self.tape.add(lin, *b);
            theta[i] = self.tape.softplus(pre);
        }
        let [sigma, alpha, ell, p, s] = theta;
        let sigma_sq = self.tape.mul(sigma, sigma);
        let ell_sq = self.tape.mul(ell, ell);
        let two = self.tape.scalar(2.0);
        let two_alpha = self.tape.mul(two, alpha);
        let denom = self.tape.mul(two_alpha, ell_sq);
        self.gates[slot] = Some(GateNodes {
            alpha,
            p,
            s,
            sigma_sq,
            denom,
        });
        slot
    }

    /// `q(d) = sigma^2 exp(-alpha log(1 + dist/denom)) exp(-s softplus(p - d))`.
    fn gated_kernel(&mut self, d: f64, gate_slot: usize) -> NodeId {
        let dist = if self.cfg.use_squared_distance { d * d } else { d };
        let (alpha, p, s, sigma_sq, denom) = {
            let g = self.gates[gate_slot].as_ref().unwrap();
            (g.alpha, g.p, g.s, g.sigma_sq, g.denom)
        };
        let dist_node = self.tape.scalar(dist);
        let ratio = self.tape.div(dist_node, denom);
        let inner = self.tape.add(self.one, ratio);
        let lg = self.tape.log(inner);
        let decay = self.tape.mul(alpha, lg);
        let neg_decay = self.tape.neg(decay);
        let rq = self.tape.exp(neg_decay);
        let d_node = self.tape.scalar(d);
        let p_minus_d = self.tape.sub(p, d_node);
        let sp = self.tape.softplus(p_minus_d);
        let s_sp = self.tape.mul(s, sp);
        let neg_gate = self.tape.neg(s_sp);
        let gate = self.tape.exp(neg_gate);
        let rq_gate = self.tape.mul(rq, gate);
        self.tape.mul(sigma_sq, rq_gate)
    }

    /// History vector `h_j` over events `0..=j` (0-based), using the kernel
    /// weight `q_{k_i k_j}(t_j - t_i)`. Without the self-term and with an
    /// empty remaining prefix this degenerates to the zero vector.
    fn history(&mut self, xs: &[NodeId], events: &[Event], j: usize) -> NodeId {
        let t_j = events[j].timestamp;
        let k_j = events[j].type_index;
        let upper = if self.cfg.include_self_term { j + 1 } else { j };
        let mut acc: Option<NodeId> = None;
        for i in 0..upper {
            let gate_slot = self.kernel_param_nodes(events[i].type_index, k_j);
            let q = self.gated_kernel(t_j - events[i].timestamp, gate_slot);
            let term = self.tape.mul(q, xs[i]);
            acc = Some(match acc {
                None => term,
                Some(prev) => self.tape.add(prev, term),
            });
        }
        match acc {
            Some(h) => h,
            None => self
                .tape
                .constant(Tensor::zeros(Shape::Vector(self.cfg.history_dim()))),
        }
    }

    /// Draws the `M x H` uniform noise block for one prediction step.
    fn draw_noise(&mut self, noise: &mut Stream) -> Vec<Vec<f64>> {
        let h = self.cfg.history_dim();
        (0..self.cfg.noise_samples)
            .map(|_| (0..h).map(|_| noise.next_f64()).collect())
            .collect()
    }

    /// Stochastic arrival decoder:
    /// `t_m = softplus(W_t . (W_h h + W_n n_m) + b_t)`; returns all samples
    /// and their mean.
    fn predict_arrival(&mut self, h: NodeId, noise_vecs: &[Vec<f64>]) -> (Vec<NodeId>, NodeId) {
        let mixed = self.tape.matvec(self.mix_history, h);
        let mut samples = Vec::with_capacity(noise_vecs.len());
        for n in noise_vecs {
            let n_node = self.tape.constant(Tensor::vector(n.clone()));
            let wn = self.tape.matvec(self.mix_noise, n_node);
            let z = self.tape.add(mixed, wn);
            let lin = self.tape.dot(self.time_weight, z);
            let pre = self.tape.add(lin, self.time_bias);
            samples.push(self.tape.softplus(pre));
        }
        let mut sum = samples[0];
        for &t_m in &samples[1..] {
            sum = self.tape.add(sum, t_m);
        }
        let inv_m = self.tape.scalar(1.0 / noise_vecs.len() as f64);
        let mean = self.tape.mul(sum, inv_m);
        (samples, mean)
    }

    /// Type decoder: `softmax(W_e h + b_e)`.
    fn predict_type(&mut self, h: NodeId) -> NodeId {
        let logits = self.tape.matvec(self.type_weight, h);
        let shifted = self.tape.add(logits, self.type_bias);
        self.tape.softmax(shifted)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn small_cfg() -> ModelConfig {
        let mut cfg = ModelConfig::new(2, 4, 0);
        cfg.noise_samples = 3;
        cfg
    }

    fn model() -> SghpModel {
        SghpModel::init(small_cfg(), 42).unwrap()
    }

    fn set_all(m: &mut SghpModel, name: &str, value: f64) {
        for v in m.params_mut().get_mut(name).unwrap().data_mut() {
            *v = value;
        }
    }

    fn seq(pairs: &[(usize, f64)]) -> EventSequence {
        EventSequence::new(pairs.iter().map(|&(k, t)| Event::new(k, t)).collect())
    }

    #[test]
    fn config_validation() {
        assert!(ModelConfig::new(2, 3, 0).validate().is_err());
        assert!(ModelConfig::new(0, 4, 0).validate().is_err());
        assert!(ModelConfig::new(2, 4, 0).validate().is_ok());
    }

    #[test]
    fn temporal_encoding_at_origin() {
        let m = model();
        let enc = m.temporal_encoding(0, 0.0);
        for (i, v) in enc.iter().enumerate() {
            let expected = if i % 2 == 0 { 0.0 } else { 1.0 };
            assert_eq!(*v, expected, "entry {i}");
        }
    }

    #[test]
    fn temporal_encoding_first_position() {
        // D = 2, i = 1, t = 0, omega = 0: entry 0 is sin(w_0 * 1) = sin(1).
        let mut cfg = ModelConfig::new(2, 2, 0);
        cfg.noise_samples = 1;
        let mut m = SghpModel::init(cfg, 1).unwrap();
        set_all(&mut m, "temporal_scales", 0.0);
        let enc = m.temporal_encoding(1, 0.0);
        assert!((enc[0] - libm::sin(1.0)).abs() < 1e-15);
        assert!((enc[0] - 0.8415).abs() < 1e-4);
    }

    #[test]
    fn temporal_encoding_bounded() {
        let m = model();
        let mut stream = Stream::new(3);
        for _ in 0..200 {
            let pos = stream.next_below(50);
            let t = stream.next_range(0.0, 100.0);
            for v in m.temporal_encoding(pos, t) {
                assert!((-1.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn type_embedding_is_matrix_row() {
        let mut m = model();
        {
            let w = m.params_mut().get_mut("type_embeddings").unwrap().data_mut();
            w.copy_from_slice(&[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        }
        assert_eq!(m.type_embedding(1).unwrap(), alloc::vec![0.0, 1.0, 0.0, 0.0]);
        assert_eq!(m.type_embedding(1).unwrap(), m.type_embedding(1).unwrap());
        assert!(m.type_embedding(2).is_err());
    }

    #[test]
    fn event_embedding_lengths() {
        let m = model();
        let x = m.event_embedding(&Event::new(0, 1.5), 1).unwrap();
        assert_eq!(x.len(), 8); // 2D

        let mut cfg = ModelConfig::new(2, 4, 5);
        cfg.noise_samples = 2;
        let m = SghpModel::init(cfg, 7).unwrap();
        let ev = Event::with_covariates(0, 1.5, alloc::vec![0.1, -0.2, 0.3, 0.0, 1.0]);
        let x = m.event_embedding(&ev, 1).unwrap();
        assert_eq!(x.len(), 12); // 3D
    }

    #[test]
    fn zero_covariates_reduce_to_bias() {
        let mut cfg = ModelConfig::new(2, 4, 3);
        cfg.noise_samples = 2;
        let mut m = SghpModel::init(cfg, 7).unwrap();
        for (i, v) in m
            .params_mut()
            .get_mut("covariate_bias")
            .unwrap()
            .data_mut()
            .iter_mut()
            .enumerate()
        {
            *v = i as f64 + 0.5;
        }
        let ev = Event::with_covariates(0, 1.0, alloc::vec![0.0, 0.0, 0.0]);
        let x = m.event_embedding(&ev, 1).unwrap();
        assert_eq!(&x[8..], &[0.5, 1.5, 2.5, 3.5]);
    }

    #[test]
    fn kernel_params_zero_heads_give_ln2() {
        let mut m = model();
        for r in HEADS {
            set_all(&mut m, &head_weight_name(r), 0.0);
            set_all(&mut m, &head_bias_name(r), 0.0);
        }
        let theta = m.kernel_params(0, 1).unwrap();
        for v in [theta.sigma, theta.alpha, theta.ell, theta.p, theta.s] {
            assert!((v - core::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn kernel_params_directional() {
        let m = model();
        let a = m.kernel_params(0, 1).unwrap();
        let b = m.kernel_params(1, 0).unwrap();
        assert_ne!(a, b);
        // Deterministic in (u, v).
        assert_eq!(a, m.kernel_params(0, 1).unwrap());
    }

    #[test]
    fn kernel_params_match_hand_computation() {
        let mut cfg = ModelConfig::new(2, 2, 0);
        cfg.noise_samples = 1;
        let mut m = SghpModel::init(cfg, 5).unwrap();
        {
            let w = m.params_mut().get_mut("type_embeddings").unwrap().data_mut();
            w.copy_from_slice(&[0.5, -1.0, 2.0, 0.25]);
        }
        {
            let w = m.params_mut().get_mut("head_sigma_weight").unwrap().data_mut();
            w.copy_from_slice(&[1.0, 2.0, -0.5, 0.25]);
        }
        {
            let b = m.params_mut().get_mut("head_sigma_bias").unwrap().data_mut();
            b[0] = 0.75;
        }
        // Pair (u = 0, v = 1): concatenation [e_1 | e_0] = [2, 0.25, 0.5, -1].
        let lin = 1.0 * 2.0 + 2.0 * 0.25 + (-0.5) * 0.5 + 0.25 * (-1.0) + 0.75;
        let expected = tape::softplus(lin);
        let theta = m.kernel_params(0, 1).unwrap();
        assert!((theta.sigma - expected).abs() < 1e-15);
    }

    #[test]
    fn kernel_params_always_positive() {
        let m = model();
        for u in 0..2 {
            for v in 0..2 {
                let t = m.kernel_params(u, v).unwrap();
                assert!(t.sigma > 0.0 && t.alpha > 0.0 && t.ell > 0.0 && t.p > 0.0 && t.s > 0.0);
            }
        }
    }

    #[test]
    fn gated_kernel_reference_point() {
        let theta = GateKernelParams {
            sigma: 1.0,
            alpha: 1.0,
            ell: 1.0,
            p: 0.0,
            s: 1.0,
        };
        // (1 + 0)^{-1} * (1 + e^0)^{-1} = 0.5.
        assert!((gated_kernel(0.0, &theta, true) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gated_kernel_vanishes_at_large_distance() {
        let theta = GateKernelParams {
            sigma: 1.5,
            alpha: 0.8,
            ell: 1.2,
            p: 2.0,
            s: 1.1,
        };
        assert!(gated_kernel(1e6, &theta, true) < 1e-6);
    }

    #[test]
    fn gated_kernel_suppressed_near_zero_for_large_p() {
        let theta = GateKernelParams {
            sigma: 2.0,
            alpha: 1.0,
            ell: 1.0,
            p: 40.0,
            s: 1.0,
        };
        // Local-effect regime: the gate suppresses the kernel near zero.
        assert!(gated_kernel(0.0, &theta, true) < 1e-10);
        // Squared distance also kills the far tail; check the gate alone rose.
        let gate_at = |d: f64| libm::exp(-theta.s * tape::softplus(theta.p - d));
        assert!(gate_at(41.0) > 0.4);
    }

    #[test]
    fn gated_kernel_no_overflow_for_extreme_parameters() {
        let theta = GateKernelParams {
            sigma: 3.0,
            alpha: 900.0,
            ell: 1e-3,
            p: 1e4,
            s: 5.0,
        };
        for d in [0.0, 1.0, 1e3, 1e7] {
            let q = gated_kernel(d, &theta, true);
            assert!(q.is_finite() && q >= 0.0);
        }
    }

    #[test]
    fn gate_factor_increasing_rq_decreasing() {
        let theta = GateKernelParams {
            sigma: 1.3,
            alpha: 0.7,
            ell: 0.9,
            p: 3.0,
            s: 2.0,
        };
        let gate = |d: f64| libm::exp(-theta.s * tape::softplus(theta.p - d));
        let mut prev_gate = gate(0.0);
        let mut prev_rq = rq_kernel(0.0, theta.sigma, theta.alpha, theta.ell);
        for i in 1..100 {
            let d = 0.1 * i as f64;
            let g = gate(d);
            let r = rq_kernel(d, theta.sigma, theta.alpha, theta.ell);
            assert!(g > prev_gate, "gate must increase");
            assert!(r < prev_rq, "rq must decrease");
            prev_gate = g;
            prev_rq = r;
        }
    }

    #[test]
    fn rq_kernel_reference_points() {
        assert_eq!(rq_kernel(0.0, 1.7, 1.0, 1.0), 1.7 * 1.7);
        let v = rq_kernel(core::f64::consts::SQRT_2, 1.0, 1.0, 1.0);
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn tape_kernel_matches_plain_kernel() {
        let m = model();
        let mut b = GraphBuilder::new(&m);
        let mut stream = Stream::new(8);
        for _ in 0..50 {
            let u = stream.next_below(2);
            let v = stream.next_below(2);
            let d = stream.next_range(0.0, 10.0);
            let slot = b.kernel_param_nodes(u, v);
            let node = b.gated_kernel(d, slot);
            let from_tape = b.tape.scalar_value(node);
            let plain = m.kernel_value(u, v, d).unwrap();
            assert!(
                (from_tape - plain).abs() <= 1e-12 * plain.max(1.0),
                "{from_tape} vs {plain}"
            );
        }
    }

    #[test]
    fn single_event_history_with_self_term() {
        let m = model();
        let ev = Event::new(1, 2.0);
        let h = m.encode_history(core::slice::from_ref(&ev)).unwrap();
        let q = m.kernel_value(1, 1, 0.0).unwrap();
        let x = m.event_embedding(&ev, 1).unwrap();
        for (hv, xv) in h.iter().zip(x.iter()) {
            assert!((hv - q * xv).abs() < 1e-12);
        }
    }

    #[test]
    fn single_event_history_without_self_term_is_zero() {
        let mut cfg = small_cfg();
        cfg.include_self_term = false;
        let m = SghpModel::init(cfg, 42).unwrap();
        let h = m.encode_history(&[Event::new(1, 2.0)]).unwrap();
        assert!(h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn history_matches_bruteforce_double_loop() {
        let m = model();
        let mut stream = Stream::new(21);
        for _ in 0..20 {
            let len = 1 + stream.next_below(20);
            let mut t = 0.0;
            let events: Vec<Event> = (0..len)
                .map(|_| {
                    t += stream.next_exp(1.0);
                    Event::new(stream.next_below(2), t)
                })
                .collect();
            let h = m.encode_history(&events).unwrap();
            // Independent oracle: plain kernels and embeddings, explicit loop.
            let j = len - 1;
            let mut expected = alloc::vec![0.0; m.config().history_dim()];
            for i in 0..=j {
                let d = events[j].timestamp - events[i].timestamp;
                let q = m
                    .kernel_value(events[i].type_index, events[j].type_index, d)
                    .unwrap();
                let x = m.event_embedding(&events[i], i + 1).unwrap();
                for (slot, xv) in expected.iter_mut().zip(x.iter()) {
                    *slot += q * xv;
                }
            }
            for (got, want) in h.iter().zip(expected.iter()) {
                assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0));
            }
        }
    }

    #[test]
    fn causality_of_history_and_predictions() {
        let m = model();
        let a = seq(&[(0, 1.0), (1, 2.0), (0, 3.5), (1, 10.0)]);
        let b = seq(&[(0, 1.0), (1, 2.0), (0, 3.5), (0, 99.0)]);
        // h_2 depends only on the first three events.
        let ha = m.encode_history(&a.events[..3]).unwrap();
        let hb = m.encode_history(&b.events[..3]).unwrap();
        for (x, y) in ha.iter().zip(hb.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        let pa = m.predict_next(&a.events[..3], &mut Stream::new(1)).unwrap();
        let pb = m.predict_next(&b.events[..3], &mut Stream::new(1)).unwrap();
        assert_eq!(pa, pb);
    }

    #[test]
    fn predictions_positive_and_normalized() {
        let m = model();
        let mut stream = Stream::new(2);
        let prefix = [Event::new(0, 0.5), Event::new(1, 1.25)];
        for _ in 0..20 {
            let p = m.predict_next(&prefix, &mut stream).unwrap();
            assert!(p.gap_samples.iter().all(|&t| t > 0.0));
            assert!(p.mean_gap > 0.0);
            assert!(p.type_probs.iter().all(|&q| q > 0.0));
            let total: f64 = p.type_probs.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_noise_mixing_removes_stochasticity() {
        let mut m = model();
        set_all(&mut m, "mix_noise", 0.0);
        let prefix = [Event::new(0, 0.5), Event::new(1, 1.25)];
        let a = m.predict_next(&prefix, &mut Stream::new(1)).unwrap();
        let b = m.predict_next(&prefix, &mut Stream::new(999)).unwrap();
        assert_eq!(a, b);
        // All samples collapse to the deterministic decoder output.
        for t in &a.gap_samples {
            assert_eq!(t.to_bits(), a.gap_samples[0].to_bits());
        }
        assert!((a.mean_gap - a.gap_samples[0]).abs() < 1e-15);
    }

    #[test]
    fn identical_noise_vectors_identical_predictions() {
        let m = model();
        let mut b = GraphBuilder::new(&m);
        let prefix = [Event::new(0, 0.5), Event::new(1, 1.25)];
        let xs = b.embed_all(&prefix).unwrap();
        let h = b.history(&xs, &prefix, 1);
        let noise = alloc::vec![alloc::vec![0.3; m.config().history_dim()]; 3];
        let (samples, mean) = b.predict_arrival(h, &noise);
        let first = b.tape.scalar_value(samples[0]);
        for s in &samples {
            assert_eq!(b.tape.scalar_value(*s).to_bits(), first.to_bits());
        }
        assert!((b.tape.scalar_value(mean) - first).abs() < 1e-15);
    }

    #[test]
    fn uniform_type_probabilities_for_zero_head() {
        let mut m = model();
        set_all(&mut m, "type_weight", 0.0);
        set_all(&mut m, "type_bias", 0.0);
        let p = m
            .predict_next(&[Event::new(0, 1.0)], &mut Stream::new(3))
            .unwrap();
        for q in &p.type_probs {
            assert!((q - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn two_class_logit_reference() {
        let mut m = model();
        set_all(&mut m, "type_weight", 0.0);
        {
            let b = m.params_mut().get_mut("type_bias").unwrap().data_mut();
            b.copy_from_slice(&[1.0, 0.0]);
        }
        let p = m
            .predict_next(&[Event::new(0, 1.0)], &mut Stream::new(3))
            .unwrap();
        let e = core::f64::consts::E;
        assert!((p.type_probs[0] - e / (e + 1.0)).abs() < 1e-12);
        assert!((p.type_probs[1] - 1.0 / (e + 1.0)).abs() < 1e-12);
        assert_eq!(p.predicted_type(), 0);
    }

    #[test]
    fn logit_shift_leaves_probabilities_unchanged() {
        let mut m = model();
        let p1 = m
            .predict_next(&[Event::new(0, 1.0)], &mut Stream::new(3))
            .unwrap();
        for v in m.params_mut().get_mut("type_bias").unwrap().data_mut() {
            *v += 13.25;
        }
        let p2 = m
            .predict_next(&[Event::new(0, 1.0)], &mut Stream::new(3))
            .unwrap();
        for (a, b) in p1.type_probs.iter().zip(p2.type_probs.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_rejects_short_sequences() {
        let m = model();
        let err = m
            .loss_value(&seq(&[(0, 1.0)]), &mut Stream::new(1))
            .unwrap_err();
        assert!(matches!(err, ModelError::SequenceTooShort { len: 1 }));
    }

    #[test]
    fn loss_is_nonnegative() {
        let m = model();
        let mut stream = Stream::new(9);
        for s in 0..10u64 {
            let mut t = 0.0;
            let events: Vec<Event> = (0..5)
                .map(|_| {
                    t += stream.next_exp(0.8);
                    Event::new(stream.next_below(2), t)
                })
                .collect();
            let loss = m
                .loss_value(&EventSequence::new(events), &mut Stream::new(s))
                .unwrap();
            assert!(loss >= 0.0, "loss {loss}");
        }
    }

    #[test]
    fn loss_near_zero_at_ideal_configuration() {
        // Equal gaps, deterministic decoder tuned to hit them exactly, and a
        // saturated correct type head: both loss terms collapse.
        let mut m = model();
        set_all(&mut m, "mix_history", 0.0);
        set_all(&mut m, "mix_noise", 0.0);
        let gap = 1.5f64;
        // softplus(b) = gap  =>  b = log(e^gap - 1).
        let b = libm::log(libm::expm1(gap));
        m.params_mut().get_mut("time_bias").unwrap().data_mut()[0] = b;
        set_all(&mut m, "type_weight", 0.0);
        {
            let bias = m.params_mut().get_mut("type_bias").unwrap().data_mut();
            bias.copy_from_slice(&[200.0, -200.0]); // always predict type 0
        }
        let s = seq(&[(0, 1.0), (0, 2.5), (0, 4.0), (0, 5.5)]);
        let loss = m.loss_value(&s, &mut Stream::new(4)).unwrap();
        assert!(loss.abs() < 1e-9, "loss {loss}");
    }

    #[test]
    fn per_sample_l1_dominates_mean_form() {
        // By convexity of |.|, averaging l1 over samples upper-bounds the
        // l1 of the sample mean.
        let s = seq(&[(0, 1.0), (1, 2.0), (0, 2.7)]);
        let mean_form = model().loss_value(&s, &mut Stream::new(5)).unwrap();
        let mut cfg = small_cfg();
        cfg.per_sample_l1 = true;
        let m2 = SghpModel::init(cfg, 42).unwrap();
        let per_sample = m2.loss_value(&s, &mut Stream::new(5)).unwrap();
        assert!(per_sample >= mean_form - 1e-12, "{per_sample} < {mean_form}");
    }

    #[test]
    fn toy_sequence_loss_grad_check() {
        let m = model();
        let s = seq(&[(0, 0.5), (1, 1.7), (0, 2.1)]);
        let (tape, root) = m.sequence_loss(&s, &mut Stream::new(11)).unwrap();
        let err = tape.grad_check(root, 1e-5).unwrap();
        assert!(err <= 1e-4, "grad check error {err}");
    }

    #[test]
    fn covariate_model_loss_grad_check() {
        let mut cfg = ModelConfig::new(2, 4, 3);
        cfg.noise_samples = 2;
        let m = SghpModel::init(cfg, 13).unwrap();
        let events = alloc::vec![
            Event::with_covariates(0, 0.5, alloc::vec![0.2, -0.4, 1.0]),
            Event::with_covariates(1, 1.3, alloc::vec![0.0, 0.3, -0.2]),
            Event::with_covariates(1, 2.0, alloc::vec![0.5, 0.5, 0.5]),
        ];
        let (tape, root) = m
            .sequence_loss(&EventSequence::new(events), &mut Stream::new(2))
            .unwrap();
        let err = tape.grad_check(root, 1e-5).unwrap();
        assert!(err <= 1e-4, "grad check error {err}");
    }

    #[test]
    fn parameter_count_formula() {
        // K*D + D + 5*(2D+1) + (C*D + D if C>0) + 2*H^2 + H + 1 + K*H + K
        let cfg = ModelConfig::new(2, 16, 0);
        let m = SghpModel::init(cfg, 1).unwrap();
        let h = 32;
        let expected = 2 * 16 + 16 + 5 * 33 + 2 * h * h + h + 1 + 2 * h + 2;
        assert_eq!(expected_param_count(&cfg), expected);
        assert_eq!(m.param_count(), expected);
        // The reference configuration lands within a factor of two of 2.7k.
        assert!(expected as f64 >= 2700.0 / 2.0 && expected as f64 <= 2700.0 * 2.0);

        let cfg_cov = ModelConfig::new(5, 16, 5);
        let m = SghpModel::init(cfg_cov, 1).unwrap();
        let h = 48;
        let expected = 5 * 16 + 16 + 5 * 33 + (16 * 5 + 16) + 2 * h * h + h + 1 + 5 * h + 5;
        assert_eq!(m.param_count(), expected);
        assert_eq!(expected_param_count(&cfg_cov), expected);
    }

    #[test]
    fn init_is_deterministic_and_finite() {
        let a = SghpModel::init(small_cfg(), 7).unwrap();
        let b = SghpModel::init(small_cfg(), 7).unwrap();
        assert_eq!(a.params(), b.params());
        assert!(a.params().all_finite());
        let c = SghpModel::init(small_cfg(), 8).unwrap();
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn from_parts_round_trip_and_validation() {
        let m = model();
        let rebuilt = SghpModel::from_parts(*m.config(), m.params().clone()).unwrap();
        assert_eq!(&rebuilt, &m);
        let mut bad = ParamSet::new();
        for (name, t) in m.params().iter() {
            if name == "time_weight" {
                bad.insert(name, Tensor::vector(alloc::vec![0.0; 3]));
            } else {
                bad.insert(name, t.clone());
            }
        }
        assert!(SghpModel::from_parts(*m.config(), bad).is_err());
    }
}
