//! The decision network: text/visual fusion, operator probabilities,
//! per-operator parameter heads, ε-greedy selection and learning updates.

mod checkpoint;
mod matrix;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use matrix::Matrix;

use crate::enhance::{arities, NUM_OPERATORS};
use crate::error::{Error, Result};
use crate::perception::Embedding;

/// Pre-activations are clamped to this magnitude before the logistic.
pub const LOGIT_CLAMP: f64 = 30.0;

#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `x * Φ(x)`
#[inline]
pub fn gelu(x: f64) -> f64 {
    x * normal_cdf(x)
}

#[inline]
pub fn gelu_prime(x: f64) -> f64 {
    normal_cdf(x) + x * normal_pdf(x)
}

#[inline]
pub fn logistic(x: f64) -> f64 {
    let x = x.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
    1.0 / (1.0 + (-x).exp())
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// First index of the maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamHead {
    pub w: Matrix,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub w_h: Matrix,
    pub b_h: Vec<f64>,
    pub w_a: Matrix,
    pub heads: Vec<ParamHead>,
}

impl PolicyParams {
    pub fn zeros(embed_dim: usize, hidden_dim: usize) -> Self {
        Self {
            w_h: Matrix::zeros(hidden_dim, 2 * embed_dim),
            b_h: vec![0.0; hidden_dim],
            w_a: Matrix::zeros(NUM_OPERATORS, hidden_dim),
            heads: arities()
                .iter()
                .map(|&k| ParamHead {
                    w: Matrix::zeros(k, hidden_dim),
                    b: vec![0.0; k],
                })
                .collect(),
        }
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn init(embed_dim: usize, hidden_dim: usize, seed: u64) -> Result<Self> {
        if embed_dim == 0 || hidden_dim == 0 {
            return Err(Error::Shape("embed_dim and hidden_dim must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |m: &mut Matrix| {
            let r = 1.0 / (m.cols() as f64).sqrt();
            for v in m.data_mut() {
                *v = rng.random_range(-r..r);
            }
        };
        let mut p = Self::zeros(embed_dim, hidden_dim);
        uniform(&mut p.w_h);
        uniform(&mut p.w_a);
        for h in &mut p.heads {
            uniform(&mut h.w);
        }
        Ok(p)
    }

    pub fn embed_dim(&self) -> usize {
        self.w_h.cols() / 2
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_h.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let (e, h) = (self.embed_dim(), self.hidden_dim());
        let shape_ok = e > 0
            && h > 0
            && self.w_h.cols() == 2 * e
            && self.b_h.len() == h
            && self.w_a.rows() == NUM_OPERATORS
            && self.w_a.cols() == h
            && self.heads.len() == NUM_OPERATORS
            && self
                .heads
                .iter()
                .zip(arities())
                .all(|(hd, k)| hd.w.rows() == k && hd.w.cols() == h && hd.b.len() == k);
        if !shape_ok {
            return Err(Error::Shape("policy parameter shapes are inconsistent".into()));
        }
        let finite = self.w_h.all_finite()
            && self.w_a.all_finite()
            && self.b_h.iter().all(|v| v.is_finite())
            && self
                .heads
                .iter()
                .all(|hd| hd.w.all_finite() && hd.b.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(Error::NonFinite("policy parameters".into()));
        }
        Ok(())
    }
}

/// Hidden pre-activation and activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Fused {
    pub input: Vec<f64>,
    pub pre: Vec<f64>,
    pub h: Vec<f64>,
}

pub fn fuse_detailed(text: &Embedding, image: &Embedding, params: &PolicyParams) -> Result<Fused> {
    let e = params.embed_dim();
    for dim in [text.dim(), image.dim()] {
        if dim != e {
            return Err(Error::EmbeddingDim {
                expected: e,
                actual: dim,
            });
        }
    }
    let input: Vec<f64> = text.values().iter().chain(image.values()).copied().collect();
    Ok(fuse_input(input, params))
}

pub(crate) fn fuse_input(input: Vec<f64>, params: &PolicyParams) -> Fused {
    let pre: Vec<f64> = params
        .w_h
        .matvec(&input)
        .into_iter()
        .zip(&params.b_h)
        .map(|(z, b)| z + b)
        .collect();
    let h = pre.iter().map(|&z| gelu(z)).collect();
    Fused { input, pre, h }
}

/// `H = GELU(W_h [text; image] + b_h)`
pub fn fuse(text: &Embedding, image: &Embedding, params: &PolicyParams) -> Result<Vec<f64>> {
    Ok(fuse_detailed(text, image, params)?.h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDistribution {
    pub probs: Vec<f64>,
    pub logits: Vec<f64>,
    pub temperature: f64,
}

impl ActionDistribution {
    pub fn from_logits(logits: Vec<f64>, temperature: f64) -> Self {
        Self {
            probs: softmax(&logits),
            logits,
            temperature,
        }
    }
}

/// Returns the unperturbed distribution and the Gumbel-Softmax relaxed sample.
pub fn action_probs(
    h: &[f64],
    params: &PolicyParams,
    temperature: f64,
    noise: &[f64; NUM_OPERATORS],
) -> Result<(ActionDistribution, Vec<f64>)> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::Temperature(temperature));
    }
    if h.len() != params.hidden_dim() {
        return Err(Error::Shape(format!(
            "hidden vector has {} entries, expected {}",
            h.len(),
            params.hidden_dim()
        )));
    }
    if let Some(&u) = noise.iter().find(|&&u| !(u > 0.0 && u < 1.0)) {
        return Err(Error::NoiseDraw(u));
    }
    let logits = params.w_a.matvec(h);
    let perturbed: Vec<f64> = logits
        .iter()
        .zip(noise)
        .map(|(&l, &u)| (l + gumbel(u)) / temperature)
        .collect();
    Ok((ActionDistribution::from_logits(logits, temperature), softmax(&perturbed)))
}

#[inline]
pub fn gumbel(u: f64) -> f64 {
    -(-u.ln()).ln()
}

/// Draws seven uniforms strictly inside (0,1).
pub fn gumbel_noise(rng: &mut impl Rng) -> [f64; NUM_OPERATORS] {
    std::array::from_fn(|_| loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    })
}

/// `θ = logistic(W_θa H + b_θa)`
pub fn gen_params(h: &[f64], action: usize, params: &PolicyParams) -> Result<Vec<f64>> {
    Ok(head_preactivation(h, action, params)?
        .into_iter()
        .map(logistic)
        .collect())
}

fn head_preactivation(h: &[f64], action: usize, params: &PolicyParams) -> Result<Vec<f64>> {
    let head = params.heads.get(action).ok_or(Error::InvalidAction(action))?;
    Ok(head.w.matvec(h).into_iter().zip(&head.b).map(|(z, b)| z + b).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnhanceDecision {
    /// Zero-based operator index.
    pub action: usize,
    pub theta: Vec<f64>,
    pub log_prob: f64,
    pub explored: bool,
}

/// ε-greedy: uniform action with probability ε, otherwise the argmax of `probs`.
pub fn select_action(dist: &ActionDistribution, epsilon: f64, rng: &mut impl Rng) -> EnhanceDecision {
    let u: f64 = rng.random();
    let explored = u < epsilon;
    let action = if explored {
        rng.random_range(0..dist.probs.len())
    } else {
        argmax(&dist.probs)
    };
    EnhanceDecision {
        action,
        theta: Vec::new(),
        log_prob: dist.probs[action].ln(),
        explored,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub total_steps: u64,
}

impl EpsilonSchedule {
    pub fn new(total_steps: u64) -> Self {
        Self {
            start: 0.98,
            end: 0.2,
            total_steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.start)
            && (0.0..=1.0).contains(&self.end)
            && self.start >= self.end
            && self.total_steps > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid epsilon schedule {self:?}")))
        }
    }
}

/// Linear decay clamped at `end`. Evaluated as `start - (start - end) * f` so the
/// sequence is nonincreasing under rounding.
pub fn epsilon_at(s: &EpsilonSchedule, step: u64) -> f64 {
    if step >= s.total_steps {
        return s.end;
    }
    let f = step as f64 / s.total_steps as f64;
    (s.start - (s.start - s.end) * f).max(s.end)
}

/// Gradient of `log softmax(W_a H)[action]` through the fusion layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LogProbGrad {
    pub d_logits: Vec<f64>,
    pub w_a: Matrix,
    pub h: Vec<f64>,
    pub w_h: Matrix,
    pub b_h: Vec<f64>,
}

pub fn grad_log_prob(fused: &Fused, params: &PolicyParams, action: usize) -> Result<LogProbGrad> {
    if action >= NUM_OPERATORS {
        return Err(Error::InvalidAction(action));
    }
    let probs = softmax(&params.w_a.matvec(&fused.h));
    let d_logits: Vec<f64> = probs
        .iter()
        .enumerate()
        .map(|(j, &p)| if j == action { 1.0 - p } else { -p })
        .collect();
    let mut w_a = Matrix::zeros(NUM_OPERATORS, params.hidden_dim());
    w_a.add_outer(1.0, &d_logits, &fused.h);
    let h = params.w_a.matvec_t(&d_logits);
    let b_h: Vec<f64> = h.iter().zip(&fused.pre).map(|(g, &z)| g * gelu_prime(z)).collect();
    let mut w_h = Matrix::zeros(params.hidden_dim(), 2 * params.embed_dim());
    w_h.add_outer(1.0, &b_h, &fused.input);
    Ok(LogProbGrad {
        d_logits,
        w_a,
        h,
        w_h,
        b_h,
    })
}

/// Reward pair from evaluating `θ + cΔ` and `θ - cΔ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpsaProbe {
    pub delta: Vec<f64>,
    pub c: f64,
    pub reward_plus: f64,
    pub reward_minus: f64,
}

impl SpsaProbe {
    /// `(R₊ - R₋) / (2c) · Δ⁻¹`
    pub fn gradient(&self) -> Vec<f64> {
        let s = (self.reward_plus - self.reward_minus) / (2.0 * self.c);
        self.delta.iter().map(|d| s / d).collect()
    }
}

/// Rademacher perturbation of length `k`.
pub fn rademacher(k: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..k).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

/// One episode's contribution to an update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    /// `[text; image]` embedding concatenation.
    pub input: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub spsa: Option<SpsaProbe>,
}

/// REINFORCE on `W_a, W_h, b_h` and SPSA on the taken action's parameter head,
/// both averaged over the batch.
pub fn update(
    params: &PolicyParams,
    batch: &[Transition],
    learning_rate: f64,
    baseline: f64,
) -> Result<PolicyParams> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if !baseline.is_finite() || !learning_rate.is_finite() {
        return Err(Error::NonFinite("baseline or learning rate".into()));
    }
    let n = batch.len() as f64;
    let mut next = params.clone();
    let mut acc = PolicyParams::zeros(params.embed_dim(), params.hidden_dim());
    for t in batch {
        if !t.reward.is_finite() {
            return Err(Error::NonFinite(format!("reward {}", t.reward)));
        }
        if t.input.len() != 2 * params.embed_dim() {
            return Err(Error::Shape(format!(
                "transition input has {} entries, expected {}",
                t.input.len(),
                2 * params.embed_dim()
            )));
        }
        let fused = fuse_input(t.input.clone(), params);
        let adv = t.reward - baseline;
        if adv != 0.0 {
            let g = grad_log_prob(&fused, params, t.action)?;
            acc.w_a.add_scaled(adv, &g.w_a);
            acc.w_h.add_scaled(adv, &g.w_h);
            for (a, gb) in acc.b_h.iter_mut().zip(&g.b_h) {
                *a += adv * gb;
            }
        }
        if let Some(probe) = &t.spsa {
            let k = params.heads[t.action].b.len();
            if probe.delta.len() != k || !(probe.c > 0.0) {
                return Err(Error::Shape("SPSA probe does not match the parameter head".into()));
            }
            if !probe.reward_plus.is_finite() || !probe.reward_minus.is_finite() {
                return Err(Error::NonFinite("SPSA reward".into()));
            }
            let theta = gen_params(&fused.h, t.action, params)?;
            let dz: Vec<f64> = probe
                .gradient()
                .iter()
                .zip(&theta)
                .map(|(g, th)| g * th * (1.0 - th))
                .collect();
            let head = &mut acc.heads[t.action];
            head.w.add_outer(1.0, &dz, &fused.h);
            for (b, d) in head.b.iter_mut().zip(&dz) {
                *b += d;
            }
        }
    }
    let s = learning_rate / n;
    next.w_a.add_scaled(s, &acc.w_a);
    next.w_h.add_scaled(s, &acc.w_h);
    for (b, g) in next.b_h.iter_mut().zip(&acc.b_h) {
        *b += s * g;
    }
    for (head, g) in next.heads.iter_mut().zip(&acc.heads) {
        head.w.add_scaled(s, &g.w);
        for (b, gb) in head.b.iter_mut().zip(&g.b) {
            *b += s * gb;
        }
    }
    next.validate()?;
    Ok(next)
}

/// Exponential moving average baseline; the first observation initializes it.
pub fn ema(baseline: Option<f64>, value: f64, decay: f64) -> f64 {
    match baseline {
        Some(b) => decay * b + (1.0 - decay) * value,
        None => value,
    }
}
