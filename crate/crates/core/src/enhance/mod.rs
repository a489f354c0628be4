//! The enhancement operator bank.
//!
//! Every operator takes normalized parameters `theta` in `[0,1]^k` and
//! denormalizes them affinely into its physical range before running.

mod bilateral;
mod clahe;
mod retinex;
mod sharpen;
mod tone;
mod wavelet;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageTensor;

pub use bilateral::bilateral_denoise;
pub use clahe::{clahe, clahe_plane};
pub use retinex::multi_scale_retinex;
pub use sharpen::unsharp_mask;
pub use tone::{gamma_correction, white_balance_gain};
pub use wavelet::wavelet_denoise;

pub const NUM_OPERATORS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorId {
    MultiScaleRetinex,
    WaveletDenoise,
    Clahe,
    GammaCorrection,
    UnsharpMask,
    BilateralDenoise,
    WhiteBalanceGain,
}

impl OperatorId {
    pub const ALL: [OperatorId; NUM_OPERATORS] = [
        OperatorId::MultiScaleRetinex,
        OperatorId::WaveletDenoise,
        OperatorId::Clahe,
        OperatorId::GammaCorrection,
        OperatorId::UnsharpMask,
        OperatorId::BilateralDenoise,
        OperatorId::WhiteBalanceGain,
    ];

    /// Zero-based action index.
    pub fn index(self) -> usize {
        self as usize
    }

    /// One-based stable id.
    pub fn id(self) -> usize {
        self.index() + 1
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL.get(i).copied().ok_or(Error::InvalidAction(i))
    }

    pub fn name(self) -> &'static str {
        spec(self).name
    }

    pub fn arity(self) -> usize {
        spec(self).params.len()
    }
}

impl fmt::Display for OperatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OperatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        OperatorId::ALL
            .into_iter()
            .find(|op| op.name() == s)
            .ok_or_else(|| Error::UnknownOperator(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    pub lo: f64,
    pub hi: f64,
}

impl ParamSpec {
    pub fn denormalize(&self, theta: f64) -> f64 {
        self.lo + theta * (self.hi - self.lo)
    }

    pub fn normalize(&self, physical: f64) -> f64 {
        (physical - self.lo) / (self.hi - self.lo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatorSpec {
    pub op: OperatorId,
    pub id: usize,
    pub name: &'static str,
    pub params: &'static [ParamSpec],
}

impl OperatorSpec {
    pub fn denormalize(&self, theta: &[f64]) -> Vec<f64> {
        self.params
            .iter()
            .zip(theta)
            .map(|(p, &t)| p.denormalize(t))
            .collect()
    }
}

const fn p(name: &'static str, lo: f64, hi: f64) -> ParamSpec {
    ParamSpec { name, lo, hi }
}

static TABLE: [OperatorSpec; NUM_OPERATORS] = [
    OperatorSpec {
        op: OperatorId::MultiScaleRetinex,
        id: 1,
        name: "multi_scale_retinex",
        params: &[p("blend_weight", 0.0, 1.0), p("gain", 0.5, 2.0)],
    },
    OperatorSpec {
        op: OperatorId::WaveletDenoise,
        id: 2,
        name: "wavelet_denoise",
        params: &[p("threshold", 0.0, 0.25)],
    },
    OperatorSpec {
        op: OperatorId::Clahe,
        id: 3,
        name: "clahe",
        params: &[p("clip_limit", 1.0, 8.0), p("tile_grid", 4.0, 16.0)],
    },
    OperatorSpec {
        op: OperatorId::GammaCorrection,
        id: 4,
        name: "gamma_correction",
        params: &[p("gamma", 0.4, 2.5)],
    },
    OperatorSpec {
        op: OperatorId::UnsharpMask,
        id: 5,
        name: "unsharp_mask",
        params: &[p("amount", 0.0, 2.0), p("sigma", 0.5, 5.0)],
    },
    OperatorSpec {
        op: OperatorId::BilateralDenoise,
        id: 6,
        name: "bilateral_denoise",
        params: &[p("sigma_spatial", 1.0, 8.0), p("sigma_range", 0.02, 0.3)],
    },
    OperatorSpec {
        op: OperatorId::WhiteBalanceGain,
        id: 7,
        name: "white_balance_gain",
        params: &[
            p("gain_r", 0.6, 1.6),
            p("gain_g", 0.6, 1.6),
            p("gain_b", 0.6, 1.6),
        ],
    },
];

pub fn spec(op: OperatorId) -> &'static OperatorSpec {
    &TABLE[op.index()]
}

pub fn operator_table() -> &'static [OperatorSpec] {
    &TABLE
}

/// Parameter counts per action, in action order.
pub fn arities() -> [usize; NUM_OPERATORS] {
    let mut out = [0; NUM_OPERATORS];
    for (o, s) in out.iter_mut().zip(&TABLE) {
        *o = s.params.len();
    }
    out
}

fn check_theta(op: OperatorId, theta: &[f64]) -> Result<()> {
    let s = spec(op);
    if theta.len() != s.params.len() {
        return Err(Error::ThetaArity {
            op: s.name,
            expected: s.params.len(),
            actual: theta.len(),
        });
    }
    if let Some(&value) = theta.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::ThetaRange { value });
    }
    Ok(())
}

/// Applies operator `op` with normalized parameters.
pub fn apply(op: OperatorId, img: &ImageTensor, theta: &[f64]) -> Result<ImageTensor> {
    check_theta(op, theta)?;
    let phys = spec(op).denormalize(theta);
    Ok(match op {
        OperatorId::MultiScaleRetinex => multi_scale_retinex(img, phys[0], phys[1]),
        OperatorId::WaveletDenoise => wavelet_denoise(img, phys[0]),
        OperatorId::Clahe => clahe(img, phys[0], phys[1].round() as usize),
        OperatorId::GammaCorrection => gamma_correction(img, phys[0]),
        OperatorId::UnsharpMask => unsharp_mask(img, phys[0], phys[1]),
        OperatorId::BilateralDenoise => bilateral_denoise(img, phys[0], phys[1]),
        OperatorId::WhiteBalanceGain => white_balance_gain(img, [phys[0], phys[1], phys[2]]),
    })
}

/// Looks an operator up by its external name and applies it.
pub fn apply_named(name: &str, img: &ImageTensor, theta: &[f64]) -> Result<ImageTensor> {
    apply(name.parse()?, img, theta)
}
