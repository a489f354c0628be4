//! The analyze-enhance-validate cycle: perceive, decide, enhance, segment,
//! score, and update the policy from batches of episodes.

mod log;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use log::{EpisodeLog, FileObserver, NullObserver, TrainObserver};

use crate::dataset::Sample;
use crate::enhance::{apply, spec, OperatorId, NUM_OPERATORS};
use crate::error::{Error, Result};
use crate::eval::{dice, miou, quality, reward, QualityConfig, RewardWeights, Segmenter};
use crate::image::{BinaryMask, ImageTensor};
use crate::perception::{select_description, Embedding, PerceptionBackend, Selection};
use crate::policy::{
    action_probs, ema, epsilon_at, fuse_detailed, gen_params, gumbel_noise, rademacher,
    select_action, update, Checkpoint, EpsilonSchedule, PolicyParams, SpsaProbe, Transition,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub episodes: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub gumbel_temperature: f64,
    /// Linear anneal target for the Gumbel temperature; `None` keeps it fixed.
    pub gumbel_temperature_end: Option<f64>,
    pub spsa_c: f64,
    pub baseline_decay: f64,
    pub hidden_dim: usize,
    pub seed: u64,
    /// Write a checkpoint whenever this many episodes have completed.
    pub checkpoint_every: Option<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            episodes: 2000,
            batch_size: 16,
            learning_rate: 1e-3,
            epsilon_start: 0.98,
            epsilon_end: 0.2,
            gumbel_temperature: 1.0,
            gumbel_temperature_end: None,
            spsa_c: 0.05,
            baseline_decay: 0.9,
            hidden_dim: 32,
            seed: 0,
            checkpoint_every: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.gumbel_temperature > 0.0)
            || self.gumbel_temperature_end.is_some_and(|t| !(t > 0.0))
        {
            return bad("gumbel temperatures must be positive");
        }
        if !(self.spsa_c > 0.0 && self.spsa_c < 0.5) {
            return bad("spsa_c must lie in (0, 0.5)");
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return bad("baseline_decay must lie in [0, 1)");
        }
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be positive");
        }
        if self.checkpoint_every == Some(0) {
            return bad("checkpoint_every must be positive");
        }
        self.schedule().validate()
    }

    pub fn schedule(&self) -> EpsilonSchedule {
        EpsilonSchedule {
            start: self.epsilon_start,
            end: self.epsilon_end,
            total_steps: self.episodes.max(1),
        }
    }

    pub fn temperature_at(&self, step: u64) -> f64 {
        match self.gumbel_temperature_end {
            None => self.gumbel_temperature,
            Some(end) => {
                let f = (step as f64 / self.episodes.max(1) as f64).min(1.0);
                self.gumbel_temperature + (end - self.gumbel_temperature) * f
            }
        }
    }
}

/// Fixed backends and scoring used by every episode.
#[derive(Clone, Copy)]
pub struct Agent<'a> {
    pub perception: &'a dyn PerceptionBackend,
    pub segmenter: &'a dyn Segmenter,
    pub quality: &'a QualityConfig,
    pub weights: RewardWeights,
    pub perception_temperature: f64,
}

/// A sample with its perception result, computed once.
#[derive(Debug, Clone)]
pub struct Perceived<'s> {
    pub sample: &'s Sample,
    pub image_embedding: Embedding,
    pub selection: Selection,
    pub text_embedding: Embedding,
}

impl<'a> Agent<'a> {
    pub fn perceive<'s>(&self, sample: &'s Sample) -> Result<Perceived<'s>> {
        let image_embedding = self.perception.embed(&sample.id, &sample.image)?;
        let bank = self.perception.bank();
        let selection = select_description(&image_embedding, bank, self.perception_temperature)?;
        let text_embedding = bank.templates()[selection.index].embedding.clone();
        Ok(Perceived {
            sample,
            image_embedding,
            selection,
            text_embedding,
        })
    }

    pub fn perceive_all<'s>(&self, samples: &'s [Sample]) -> Result<Vec<Perceived<'s>>> {
        samples.par_iter().map(|s| self.perceive(s)).collect()
    }

    /// Enhances, segments and scores one image.
    pub fn score(&self, sample: &Sample, image: &ImageTensor, variant: &str) -> Result<Scored> {
        let pred = self.segmenter.segment(image, &sample.id, variant)?;
        score_mask(&pred, &sample.mask, image, self.quality, &self.weights)
    }

    fn score_action(&self, sample: &Sample, op: OperatorId, theta: &[f64]) -> Result<Scored> {
        let enhanced = apply(op, &sample.image, theta)?;
        self.score(sample, &enhanced, op.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub dice: f64,
    pub iou: f64,
    pub q: f64,
    pub reward: f64,
}

fn score_mask(
    pred: &BinaryMask,
    truth: &BinaryMask,
    image: &ImageTensor,
    qcfg: &QualityConfig,
    weights: &RewardWeights,
) -> Result<Scored> {
    let d = dice(pred, truth)?;
    let iou = miou(pred, truth)?;
    let q = quality(image, qcfg);
    Ok(Scored {
        dice: d,
        iou,
        q: q.value,
        reward: reward(d, &q, weights)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub step: u64,
    pub sample_id: String,
    pub template_index: usize,
    pub template_text: String,
    pub action: usize,
    pub operator: String,
    pub theta: Vec<f64>,
    pub theta_physical: Vec<f64>,
    pub explored: bool,
    pub epsilon: f64,
    pub probs: Vec<f64>,
    pub relaxed: Vec<f64>,
    pub dice: f64,
    pub q: f64,
    pub reward: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spsa_rewards: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub record: EpisodeRecord,
    pub transition: Transition,
}

/// Episode rng: independent stream per episode index.
pub fn episode_rng(seed: u64, step: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step);
    rng
}

#[derive(Debug, Clone, Copy)]
pub struct EpisodeSettings {
    pub step: u64,
    pub epsilon: f64,
    pub temperature: f64,
    /// Perturbation scale for the parameter-head probe; `None` skips it.
    pub spsa_c: Option<f64>,
}

pub fn run_episode(
    agent: &Agent,
    p: &Perceived,
    params: &PolicyParams,
    settings: EpisodeSettings,
    rng: &mut impl Rng,
) -> Result<EpisodeOutcome> {
    let fused = fuse_detailed(&p.text_embedding, &p.image_embedding, params)?;
    let noise = gumbel_noise(rng);
    let (dist, relaxed) = action_probs(&fused.h, params, settings.temperature, &noise)?;
    let mut decision = select_action(&dist, settings.epsilon, rng);
    decision.theta = gen_params(&fused.h, decision.action, params)?;
    let op = OperatorId::from_index(decision.action)?;
    let scored = agent.score_action(p.sample, op, &decision.theta)?;

    let probe = match settings.spsa_c {
        Some(c) => {
            let delta = rademacher(decision.theta.len(), rng);
            let shifted = |sign: f64| -> Vec<f64> {
                decision
                    .theta
                    .iter()
                    .zip(&delta)
                    .map(|(t, d)| (t + sign * c * d).clamp(0.0, 1.0))
                    .collect()
            };
            let plus = agent.score_action(p.sample, op, &shifted(1.0))?.reward;
            let minus = agent.score_action(p.sample, op, &shifted(-1.0))?.reward;
            Some(SpsaProbe {
                delta,
                c,
                reward_plus: plus,
                reward_minus: minus,
            })
        }
        None => None,
    };

    let record = EpisodeRecord {
        step: settings.step,
        sample_id: p.sample.id.clone(),
        template_index: p.selection.index,
        template_text: p.selection.text.clone(),
        action: decision.action,
        operator: op.name().to_string(),
        theta_physical: spec(op).denormalize(&decision.theta),
        theta: decision.theta,
        explored: decision.explored,
        epsilon: settings.epsilon,
        probs: dist.probs,
        relaxed,
        dice: scored.dice,
        q: scored.q,
        reward: scored.reward,
        spsa_rewards: probe.as_ref().map(|s| (s.reward_plus, s.reward_minus)),
    };
    let transition = Transition {
        input: fused.input,
        action: decision.action,
        reward: scored.reward,
        spsa: probe,
    };
    Ok(EpisodeOutcome { record, transition })
}

/// Resumable training state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: PolicyParams,
    pub episode: u64,
    pub baseline: Option<f64>,
}

impl TrainState {
    pub fn fresh(embed_dim: usize, cfg: &TrainConfig) -> Result<Self> {
        Ok(Self {
            params: PolicyParams::init(embed_dim, cfg.hidden_dim, cfg.seed)?,
            episode: 0,
            baseline: None,
        })
    }

    pub fn checkpoint(&self, cfg: &TrainConfig) -> Checkpoint {
        Checkpoint::new(
            self.params.clone(),
            cfg.seed,
            self.episode,
            cfg.schedule(),
            self.baseline,
        )
    }

    pub fn from_checkpoint(ck: Checkpoint, cfg: &TrainConfig) -> Result<Self> {
        if ck.seed != cfg.seed || ck.epsilon != cfg.schedule() {
            return Err(Error::Config(
                "checkpoint seed or epsilon schedule differs from the run configuration".into(),
            ));
        }
        if ck.hidden_dim != cfg.hidden_dim {
            return Err(Error::Config(format!(
                "checkpoint hidden_dim {} differs from configured {}",
                ck.hidden_dim, cfg.hidden_dim
            )));
        }
        Ok(Self {
            params: ck.params,
            episode: ck.episode,
            baseline: ck.baseline,
        })
    }
}

/// Sample index for episode `step`: a fresh seeded permutation per pass over the data.
pub fn sample_order(seed: u64, n: usize, step: u64) -> usize {
    use rand::seq::SliceRandom;
    let pass = step / n as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f5a_3b1e);
    rng.set_stream(pass);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    perm[(step % n as u64) as usize]
}

/// Trains from `state` up to `until` episodes (capped at `cfg.episodes`).
///
/// `until` must fall on a batch boundary or equal the configured total, so that
/// stopping and resuming reproduces the uninterrupted run.
pub fn train_until(
    samples: &[Sample],
    agent: &Agent,
    cfg: &TrainConfig,
    mut state: TrainState,
    until: u64,
    observer: &mut dyn TrainObserver,
) -> Result<TrainState> {
    cfg.validate()?;
    let until = until.min(cfg.episodes);
    if !until.is_multiple_of(cfg.batch_size as u64) && until != cfg.episodes {
        return Err(Error::Config(format!(
            "stop point {until} is not a multiple of batch size {}",
            cfg.batch_size
        )));
    }
    if state.episode >= until {
        return Ok(state);
    }
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    state.params.validate()?;
    let perceived = agent.perceive_all(samples)?;
    let schedule = cfg.schedule();
    let bs = cfg.batch_size as u64;

    while state.episode < until {
        let start = state.episode;
        let end = ((start / bs + 1) * bs).min(until);
        let snapshot = &state.params;
        let outcomes: Vec<EpisodeOutcome> = (start..end)
            .into_par_iter()
            .map(|step| {
                let p = &perceived[sample_order(cfg.seed, samples.len(), step)];
                let settings = EpisodeSettings {
                    step,
                    epsilon: epsilon_at(&schedule, step),
                    temperature: cfg.temperature_at(step),
                    spsa_c: Some(cfg.spsa_c),
                };
                run_episode(agent, p, snapshot, settings, &mut episode_rng(cfg.seed, step))
            })
            .collect::<Result<_>>()?;

        let rewards: Vec<f64> = outcomes.iter().map(|o| o.record.reward).collect();
        let baseline = state
            .baseline
            .unwrap_or_else(|| rewards.iter().sum::<f64>() / rewards.len() as f64);
        let batch: Vec<Transition> = outcomes.iter().map(|o| o.transition.clone()).collect();
        state.params = update(&state.params, &batch, cfg.learning_rate, baseline)?;
        let mut b = state.baseline;
        for r in &rewards {
            b = Some(ema(b, *r, cfg.baseline_decay));
        }
        state.baseline = b;
        state.episode = end;

        for o in &outcomes {
            observer.episode(&o.record)?;
        }
        if cfg.checkpoint_every.is_some_and(|k| end / k > start / k) {
            observer.checkpoint(&state.checkpoint(cfg))?;
        }
    }
    Ok(state)
}

pub fn train(
    samples: &[Sample],
    agent: &Agent,
    cfg: &TrainConfig,
    state: TrainState,
    observer: &mut dyn TrainObserver,
) -> Result<TrainState> {
    train_until(samples, agent, cfg, state, cfg.episodes, observer)
}

/// How actions are chosen at evaluation time.
#[derive(Debug, Clone, Copy)]
pub enum EvalPolicy<'p> {
    /// ε = 0: argmax operator, parameters from its head.
    Learned(&'p PolicyParams),
    /// Input passed to the segmenter unchanged.
    Identity,
    /// Uniform operator and uniform normalized parameters from a seeded stream.
    Random { seed: u64 },
    /// One fixed operator and parameter vector for every sample.
    Fixed(OperatorId, &'p [f64]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub id: String,
    pub variant: String,
    pub template_index: usize,
    pub theta: Vec<f64>,
    pub dice: f64,
    pub iou: f64,
    pub q: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub mean_dice: f64,
    pub mean_iou: f64,
    pub mean_q: f64,
    pub mean_reward: f64,
}

impl EvalReport {
    fn from_rows(rows: Vec<EvalRow>) -> Self {
        let n = rows.len().max(1) as f64;
        let mean = |f: fn(&EvalRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
        Self {
            mean_dice: mean(|r| r.dice),
            mean_iou: mean(|r| r.iou),
            mean_q: mean(|r| r.q),
            mean_reward: mean(|r| r.reward),
            rows,
        }
    }

    /// Columns `id,variant,dice,iou,q,reward`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("id,variant,dice,iou,q,reward\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.id, r.variant, r.dice, r.iou, r.q, r.reward
            ));
        }
        s
    }

    /// Rows whose id contains `needle`.
    pub fn subset(&self, needle: &str) -> EvalReport {
        Self::from_rows(self.rows.iter().filter(|r| r.id.contains(needle)).cloned().collect())
    }
}

/// Decides the operator (or none) and normalized parameters for a sample.
pub fn decide(p: &Perceived, policy: EvalPolicy, index: usize) -> Result<Option<(OperatorId, Vec<f64>)>> {
    match policy {
        EvalPolicy::Identity => Ok(None),
        EvalPolicy::Fixed(op, theta) => Ok(Some((op, theta.to_vec()))),
        EvalPolicy::Random { seed } => {
            let mut rng = episode_rng(seed, index as u64);
            let op = OperatorId::from_index(rng.random_range(0..NUM_OPERATORS))?;
            let theta = (0..op.arity()).map(|_| rng.random::<f64>()).collect();
            Ok(Some((op, theta)))
        }
        EvalPolicy::Learned(params) => {
            let fused = fuse_detailed(&p.text_embedding, &p.image_embedding, params)?;
            let probs = crate::policy::softmax(&params.w_a.matvec(&fused.h));
            let action = crate::policy::argmax(&probs);
            let theta = gen_params(&fused.h, action, params)?;
            Ok(Some((OperatorId::from_index(action)?, theta)))
        }
    }
}

/// Scores every sample under `policy`. Deterministic.
pub fn evaluate(samples: &[Sample], agent: &Agent, policy: EvalPolicy) -> Result<EvalReport> {
    let perceived = agent.perceive_all(samples)?;
    let rows = perceived
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let decision = decide(p, policy, i)?;
            let (variant, theta, scored) = match decision {
                None => ("none".to_string(), Vec::new(), agent.score(p.sample, &p.sample.image, "none")?),
                Some((op, theta)) => {
                    let s = agent.score_action(p.sample, op, &theta)?;
                    (op.name().to_string(), theta, s)
                }
            };
            Ok(EvalRow {
                id: p.sample.id.clone(),
                variant,
                template_index: p.selection.index,
                theta,
                dice: scored.dice,
                iou: scored.iou,
                q: scored.q,
                reward: scored.reward,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_rows(rows))
}
