//! Single-threaded latency of each operator and of the full agent cycle.

use std::fmt;
use std::time::Instant;

use serde::Serialize;

use crate::agent::{decide, Agent, EvalPolicy};
use crate::dataset::Sample;
use crate::enhance::{apply, OperatorId};
use crate::error::{Error, Result};
use crate::policy::PolicyParams;

/// Frame rate quoted for real-time endoscopy, shown next to measurements.
pub const REFERENCE_FPS: f64 = 33.0;

#[derive(Debug, Clone, Serialize)]
pub struct OperatorTiming {
    pub operator: String,
    pub median_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub width: usize,
    pub height: usize,
    pub runs: usize,
    pub operators: Vec<OperatorTiming>,
    /// Perceive, decide, enhance and segment.
    pub cycle_median_ms: f64,
    pub cycle_fps: f64,
    pub reference_fps: f64,
}

fn median_ms(runs: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let mut times = Vec::with_capacity(runs);
    for _ in 0..runs {
        let t = Instant::now();
        f()?;
        times.push(t.elapsed().as_secs_f64() * 1e3);
    }
    times.sort_by(f64::total_cmp);
    let n = times.len();
    Ok(if n % 2 == 1 {
        times[n / 2]
    } else {
        0.5 * (times[n / 2 - 1] + times[n / 2])
    })
}

/// Times every operator at mid-range parameters and the whole cycle on `sample`.
pub fn run_bench(sample: &Sample, agent: &Agent, params: &PolicyParams, runs: usize) -> Result<BenchReport> {
    if runs == 0 {
        return Err(Error::Config("bench needs at least one run".into()));
    }
    let img = &sample.image;
    let mut operators = Vec::new();
    for op in OperatorId::ALL {
        let theta = vec![0.5; op.arity()];
        let ms = median_ms(runs, || apply(op, img, &theta).map(drop))?;
        operators.push(OperatorTiming {
            operator: op.name().to_string(),
            median_ms: ms,
        });
    }
    let cycle = median_ms(runs, || {
        let p = agent.perceive(sample)?;
        let image = match decide(&p, EvalPolicy::Learned(params), 0)? {
            Some((op, theta)) => apply(op, img, &theta)?,
            None => img.clone(),
        };
        agent.segmenter.segment(&image, &sample.id, "bench").map(drop)
    })?;
    Ok(BenchReport {
        width: img.width(),
        height: img.height(),
        runs,
        operators,
        cycle_median_ms: cycle,
        cycle_fps: 1e3 / cycle,
        reference_fps: REFERENCE_FPS,
    })
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}x{}, median of {} runs", self.width, self.height, self.runs)?;
        writeln!(f, "{:<22} {:>10}", "stage", "ms/image")?;
        for t in &self.operators {
            writeln!(f, "{:<22} {:>10.2}", t.operator, t.median_ms)?;
        }
        writeln!(
            f,
            "{:<22} {:>10.2}  ({:.1} FPS; reference {} FPS)",
            "full_cycle", self.cycle_median_ms, self.cycle_fps, self.reference_fps
        )
    }
}
