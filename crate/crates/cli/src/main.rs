// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adaptive_enhance::agent::{
    evaluate, train_until, Agent, EvalPolicy, EvalReport, FileObserver, Perceived, TrainState,
};
use adaptive_enhance::bench::run_bench;
use adaptive_enhance::dataset::{load_dataset, Sample};
use adaptive_enhance::degrade::{build_benchmark, disc_scene, write_synthetic_corpus, SceneParams};
use adaptive_enhance::enhance::{apply, spec, OperatorId};
use adaptive_enhance::eval::{ClassicalSegmenter, ExternalMasks, QualityConfig, Segmenter};
use adaptive_enhance::image::{load_image, overlay, save_png, side_by_side, ImageTensor};
use adaptive_enhance::perception::{BuiltinPerception, ExternalPerception, PerceptionBackend};
use adaptive_enhance::policy::{argmax, fuse_detailed, gen_params, softmax, Checkpoint, PolicyParams};
use adaptive_enhance::{Error, ErrorClass, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use config::{parse_degradation, parse_theta, PerceptionChoice, RunConfig, SegmenterChoice};

const OVERLAY_ALPHA: f32 = 0.45;

#[derive(Parser)]
#[command(name = "enhance-agent", version, about = "Perceive, enhance and segment degraded images")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    backend_perception: Option<PerceptionChoice>,
    #[arg(long, global = true, value_enum)]
    backend_segmenter: Option<SegmenterChoice>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Dataset root with `images/` and `masks/`.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// Embedding file for the external perception backend.
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
    /// Mask directory for the external segmenter backend.
    #[arg(long, global = true)]
    masks: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the matched degradation description and its scores.
    Perceive {
        image: PathBuf,
        /// Also write the result as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Enhance one image with a named operator or the learned policy.
    Enhance {
        image: PathBuf,
        #[arg(long, conflicts_with = "auto", requires = "theta")]
        op: Option<String>,
        /// Normalized parameters in [0,1], comma separated.
        #[arg(long)]
        theta: Option<String>,
        #[arg(long, requires = "checkpoint")]
        auto: bool,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Build a degraded benchmark from a clean dataset.
    Degrade {
        /// `kind:strength`, repeatable. Defaults to the config or every kind at 0.6.
        #[arg(long = "spec")]
        specs: Vec<String>,
    },
    /// Train the policy and write logs and checkpoints.
    Train {
        #[arg(long)]
        episodes: Option<u64>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Continue from a checkpoint written by an earlier run with the same config.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Score a policy on a dataset and write per-image metrics.
    Eval {
        #[arg(long, value_enum, default_value_t = PolicyChoice::Learned)]
        policy: PolicyChoice,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        op: Option<String>,
        #[arg(long)]
        theta: Option<String>,
        /// Skip writing overlay images.
        #[arg(long)]
        no_overlays: bool,
    },
    /// Time every operator and the full cycle.
    Bench {
        #[arg(long, default_value_t = 50)]
        runs: usize,
        #[arg(long, default_value_t = 352)]
        size: usize,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Write a synthetic dataset of red discs on textured backgrounds.
    Synth {
        #[arg(long, default_value_t = 30)]
        count: usize,
        #[arg(long, default_value_t = 176)]
        size: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyChoice {
    Learned,
    Identity,
    Random,
    Fixed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()).map(Error::class) {
        Some(ErrorClass::Config) => 2,
        Some(ErrorClass::Io) => 3,
        Some(ErrorClass::Validation) => 4,
        None => 1,
    }
}

fn resolve(g: &Global) -> Result<RunConfig> {
    let mut c = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = g.seed {
        c.train.seed = s;
    }
    if let Some(p) = g.backend_perception {
        c.perception = p;
    }
    if let Some(s) = g.backend_segmenter {
        c.segmenter = s;
    }
    for (flag, field) in [
        (&g.out, &mut c.out),
        (&g.dataset, &mut c.dataset),
        (&g.embeddings, &mut c.embeddings),
        (&g.masks, &mut c.masks),
    ] {
        if flag.is_some() {
            field.clone_from(flag);
        }
    }
    Ok(c)
}

struct Backends {
    perception: Box<dyn PerceptionBackend>,
    segmenter: Box<dyn Segmenter>,
    quality: QualityConfig,
}

impl Backends {
    fn new(c: &RunConfig) -> Result<Self> {
        let perception: Box<dyn PerceptionBackend> = match c.perception {
            PerceptionChoice::Builtin => Box::new(BuiltinPerception::new(c.calibration.unwrap_or_default())?),
            PerceptionChoice::External => Box::new(ExternalPerception::load(c.embeddings.as_ref().expect("validated"))?),
        };
        let segmenter: Box<dyn Segmenter> = match c.segmenter {
            SegmenterChoice::Oracle => Box::new(ClassicalSegmenter::default()),
            SegmenterChoice::External => Box::new(ExternalMasks::new(c.masks.clone().expect("validated"))),
        };
        let quality = match (&c.quality, &c.quality_reference) {
            (Some(q), _) => *q,
            (None, Some(root)) => {
                let index = load_dataset(root)?;
                let images = index
                    .iter()
                    .map(|e| load_image(&e.image))
                    .collect::<Result<Vec<_>>>()?;
                QualityConfig::calibrate(&images)
            }
            (None, None) => QualityConfig::default(),
        };
        Ok(Self {
            perception,
            segmenter,
            quality,
        })
    }

    fn agent<'a>(&'a self, c: &RunConfig) -> Agent<'a> {
        Agent {
            perception: self.perception.as_ref(),
            segmenter: self.segmenter.as_ref(),
            quality: &self.quality,
            weights: c.reward,
            perception_temperature: c.perception_temperature,
        }
    }
}

fn create_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn write_text(p: &Path, text: &str) -> Result<()> {
    std::fs::write(p, text).map_err(|e| Error::io(p, e))
}

fn to_json(v: &impl Serialize) -> String {
    serde_json::to_string_pretty(v).expect("plain data serializes")
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn load_samples(c: &RunConfig) -> Result<Vec<Sample>> {
    let index = load_dataset(c.dataset()?)?;
    let samples = index.load_samples(c.size())?;
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(samples)
}

/// Image without ground truth, for single-image commands.
fn unlabeled(path: &Path) -> Result<Sample> {
    let image = load_image(path)?;
    let mask = adaptive_enhance::image::BinaryMask::new(image.width(), image.height(), vec![false; image.width() * image.height()])?;
    Ok(Sample {
        id: stem(path),
        image,
        mask,
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut c = resolve(&cli.global)?;
    match cli.command {
        Command::Perceive { image, json } => {
            c.validate()?;
            let b = Backends::new(&c)?;
            let sample = unlabeled(&image)?;
            let p = b.agent(&c).perceive(&sample)?;
            println!("{}", p.selection.text);
            for (t, s) in b.perception.bank().templates().iter().zip(&p.selection.scores) {
                println!("  {s:.4}  {}", t.text);
            }
            if let Some(path) = json {
                write_text(&path, &to_json(&p.selection))?;
            }
        }
        Command::Enhance {
            image,
            op,
            theta,
            auto,
            checkpoint,
        } => {
            c.validate()?;
            let b = Backends::new(&c)?;
            let sample = unlabeled(&image)?;
            let (op, theta) = if auto {
                let ck = Checkpoint::load(checkpoint.expect("required by clap"))?;
                let agent = b.agent(&c);
                let p = agent.perceive(&sample)?;
                let d = auto_decision(&p, &ck.params)?;
                println!("{}", to_json(&d));
                (d.operator.parse()?, d.theta)
            } else {
                let op: OperatorId = op
                    .ok_or_else(|| Error::Config("give --op with --theta, or --auto".into()))?
                    .parse()?;
                (op, parse_theta(theta.as_deref().unwrap_or_default())?)
            };
            let enhanced = apply(op, &sample.image, &theta)?;
            let out = c.out_dir();
            create_dir(&out)?;
            let name = stem(&image);
            save_png(&enhanced, out.join(format!("{name}_enhanced.png")))?;
            let before = b.segmenter.segment(&sample.image, &sample.id, "none")?;
            let after = b.segmenter.segment(&enhanced, &sample.id, op.name())?;
            let pair = side_by_side(
                &overlay(&sample.image, &before, OVERLAY_ALPHA)?,
                &overlay(&enhanced, &after, OVERLAY_ALPHA)?,
            )?;
            save_png(&pair, out.join(format!("{name}_compare.png")))?;
            eprintln!("wrote {}", out.display());
        }
        Command::Degrade { specs } => {
            if !specs.is_empty() {
                c.degradations = specs
                    .iter()
                    .map(|s| parse_degradation(s, c.train.seed))
                    .collect::<Result<_>>()?;
            }
            c.validate()?;
            let index = load_dataset(c.dataset()?)?;
            let (built, manifest) = build_benchmark(&index, &c.degradation_specs()?, c.out_dir())?;
            println!("{} images from {} sources in {}", built.len(), index.len(), c.out_dir().display());
            debug_assert_eq!(built.len(), manifest.len());
        }
        Command::Train {
            episodes,
            learning_rate,
            batch_size,
            resume,
        } => {
            if let Some(v) = episodes {
                c.train.episodes = v;
            }
            if let Some(v) = learning_rate {
                c.train.learning_rate = v;
            }
            if let Some(v) = batch_size {
                c.train.batch_size = v;
            }
            c.validate()?;
            let b = Backends::new(&c)?;
            let samples = load_samples(&c)?;
            let out = c.out_dir();
            create_dir(&out)?;
            write_text(&out.join("config.json"), &to_json(&c))?;
            let state = match &resume {
                Some(p) => TrainState::from_checkpoint(Checkpoint::load(p)?, &c.train)?,
                None => TrainState::fresh(b.perception.dim(), &c.train)?,
            };
            let mut observer = FileObserver::new(out.join("episodes.jsonl"), out.join("checkpoints"), resume.is_some())?;
            let done = train_until(&samples, &b.agent(&c), &c.train, state, c.train.episodes, &mut observer)?;
            observer.flush()?;
            let path = out.join("checkpoint.json");
            done.checkpoint(&c.train).save(&path)?;
            println!(
                "trained {} episodes; baseline {:.4}; checkpoint {}",
                done.episode,
                done.baseline.unwrap_or(f64::NAN),
                path.display()
            );
        }
        Command::Eval {
            policy,
            checkpoint,
            op,
            theta,
            no_overlays,
        } => {
            c.validate()?;
            let b = Backends::new(&c)?;
            let agent = b.agent(&c);
            let samples = load_samples(&c)?;
            let params = match &checkpoint {
                Some(p) => Some(Checkpoint::load(p)?.params),
                None => None,
            };
            let fixed = match (&op, &theta) {
                (Some(o), Some(t)) => Some((o.parse::<OperatorId>()?, parse_theta(t)?)),
                _ => None,
            };
            let chosen = match policy {
                PolicyChoice::Learned => EvalPolicy::Learned(
                    params
                        .as_ref()
                        .ok_or_else(|| Error::Config("learned policy needs --checkpoint".into()))?,
                ),
                PolicyChoice::Identity => EvalPolicy::Identity,
                PolicyChoice::Random => EvalPolicy::Random { seed: c.train.seed },
                PolicyChoice::Fixed => {
                    let (o, t) = fixed
                        .as_ref()
                        .ok_or_else(|| Error::Config("fixed policy needs --op and --theta".into()))?;
                    EvalPolicy::Fixed(*o, t)
                }
            };
            let baseline = evaluate(&samples, &agent, EvalPolicy::Identity)?;
            let report = evaluate(&samples, &agent, chosen)?;
            let out = c.out_dir();
            create_dir(&out)?;
            write_text(&out.join("eval.csv"), &report.to_csv())?;
            let label = format!("{policy:?}").to_lowercase();
            print_table(&[("none", &baseline), (&label, &report)]);
            if !no_overlays {
                write_overlays(&samples, &report, &agent, &out.join("overlays"))?;
            }
        }
        Command::Bench {
            runs,
            size,
            checkpoint,
        } => {
            c.validate()?;
            let b = Backends::new(&c)?;
            let sample = match &c.dataset {
                Some(root) => load_dataset(root)?
                    .load_samples(Some((size, size)))?
                    .into_iter()
                    .next()
                    .ok_or(Error::EmptyDataset)?,
                None => {
                    let (image, mask) = disc_scene(c.train.seed, size, size, &SceneParams::default());
                    Sample {
                        id: "bench".into(),
                        image,
                        mask,
                    }
                }
            };
            let params = match &checkpoint {
                Some(p) => Checkpoint::load(p)?.params,
                None => PolicyParams::init(b.perception.dim(), c.train.hidden_dim, c.train.seed)?,
            };
            let report = run_bench(&sample, &b.agent(&c), &params, runs)?;
            print!("{report}");
            if let Some(out) = &c.out {
                create_dir(out)?;
                write_text(&out.join("bench.json"), &to_json(&report))?;
            }
        }
        Command::Synth { count, size } => {
            let out = c.out_dir();
            let index = write_synthetic_corpus(&out, count, size, c.train.seed)?;
            println!("{} synthetic samples in {}", index.len(), out.display());
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct AutoDecision {
    template_index: usize,
    template_text: String,
    scores: Vec<f64>,
    probs: Vec<f64>,
    operator: String,
    theta: Vec<f64>,
    theta_physical: Vec<f64>,
}

/// Exploit-only decision (ε = 0) with the quantities an episode record carries.
fn auto_decision(p: &Perceived, params: &PolicyParams) -> Result<AutoDecision> {
    let fused = fuse_detailed(&p.text_embedding, &p.image_embedding, params)?;
    let probs = softmax(&params.w_a.matvec(&fused.h));
    let action = argmax(&probs);
    let theta = gen_params(&fused.h, action, params)?;
    let op = OperatorId::from_index(action)?;
    Ok(AutoDecision {
        template_index: p.selection.index,
        template_text: p.selection.text.clone(),
        scores: p.selection.scores.clone(),
        probs,
        operator: op.name().to_string(),
        theta_physical: spec(op).denormalize(&theta),
        theta,
    })
}

fn print_table(rows: &[(&str, &EvalReport)]) {
    println!("{:<12} {:>8} {:>8} {:>8}", "method", "mDice", "mIoU", "reward");
    for (name, r) in rows {
        println!(
            "{:<12} {:>8.4} {:>8.4} {:>8.4}",
            name, r.mean_dice, r.mean_iou, r.mean_reward
        );
    }
}

/// Original and enhanced images side by side, each tinted with its predicted mask.
fn write_overlays(samples: &[Sample], report: &EvalReport, agent: &Agent, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    for (s, row) in samples.iter().zip(&report.rows) {
        let enhanced: ImageTensor = match row.variant.as_str() {
            "none" => s.image.clone(),
            name => apply(name.parse()?, &s.image, &row.theta)?,
        };
        let before = agent.segmenter.segment(&s.image, &s.id, "none")?;
        let after = agent.segmenter.segment(&enhanced, &s.id, &row.variant)?;
        let pair = side_by_side(
            &overlay(&s.image, &before, OVERLAY_ALPHA)?,
            &overlay(&enhanced, &after, OVERLAY_ALPHA)?,
        )?;
        save_png(&pair, dir.join(format!("{}.png", s.id)))?;
    }
    Ok(())
}
