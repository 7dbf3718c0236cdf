//! Listener acceptance rules.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::category_given_sign;

/// How a listener turns the MH quantities into an acceptance probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AcceptanceModelKind {
    /// Accept with a fixed probability.
    Constant { b_bar: f64 },
    /// The MH ratio itself.
    Mh,
    /// `P(c | theta, s*)`.
    Numerator,
    /// `(P(c | theta, s*) - P(c | theta, s_own)) / 2 + 1/2`.
    Subtraction,
    /// 0.1 when `r_mh <= 0.5`, 0.9 otherwise.
    Binary,
    /// `a * r_mh + b`.
    AffineMh { a: f64, b: f64 },
}

impl AcceptanceModelKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AcceptanceModelKind::Constant { b_bar } if !(0.0..=1.0).contains(&b_bar) => Err(
                invalid(format!("constant acceptance {b_bar} outside [0, 1]")),
            ),
            AcceptanceModelKind::AffineMh { a, b } if !(b >= 0.0 && a + b <= 1.0 + 1e-12) => {
                Err(invalid(format!(
                    "affine acceptance (a={a}, b={b}) violates 0 <= b, a + b <= 1"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AcceptanceModelKind::Constant { .. } => "constant",
            AcceptanceModelKind::Mh => "mh",
            AcceptanceModelKind::Numerator => "numerator",
            AcceptanceModelKind::Subtraction => "subtraction",
            AcceptanceModelKind::Binary => "binary",
            AcceptanceModelKind::AffineMh { .. } => "affine_mh",
        }
    }
}

/// The five comparison models. `Constant` takes its rate from the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonModel {
    Constant,
    Mh,
    Numerator,
    Subtraction,
    Binary,
}

impl ComparisonModel {
    pub const ALL: [ComparisonModel; 5] = [
        ComparisonModel::Constant,
        ComparisonModel::Mh,
        ComparisonModel::Numerator,
        ComparisonModel::Subtraction,
        ComparisonModel::Binary,
    ];

    pub fn with_rate(self, b_bar: f64) -> AcceptanceModelKind {
        match self {
            ComparisonModel::Constant => AcceptanceModelKind::Constant { b_bar },
            ComparisonModel::Mh => AcceptanceModelKind::Mh,
            ComparisonModel::Numerator => AcceptanceModelKind::Numerator,
            ComparisonModel::Subtraction => AcceptanceModelKind::Subtraction,
            ComparisonModel::Binary => AcceptanceModelKind::Binary,
        }
    }

    pub fn name(self) -> &'static str {
        self.with_rate(0.0).name()
    }
}

impl std::str::FromStr for ComparisonModel {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(ComparisonModel::Constant),
            "mh" => Ok(ComparisonModel::Mh),
            "numerator" => Ok(ComparisonModel::Numerator),
            "subtraction" => Ok(ComparisonModel::Subtraction),
            "binary" => Ok(ComparisonModel::Binary),
            other => Err(invalid(format!("unknown model `{other}`"))),
        }
    }
}

/// `min(1, num / den)` with `x / 0 = 1` for any `x >= 0`.
pub fn mh_ratio(numerator: f64, denominator: f64) -> f64 {
    if denominator <= 0.0 {
        1.0
    } else {
        (numerator / denominator).min(1.0)
    }
}

/// The MH quantities for one listener judgement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MhTerms {
    /// `P(c_li | theta_li, s*)`
    pub numerator: f64,
    /// `P(c_li | theta_li, s_li)`
    pub denominator: f64,
    pub r_mh: f64,
}

pub fn mh_terms(c_li: usize, theta_li: &[Vec<f64>], s_star: usize, s_li: usize) -> Result<MhTerms> {
    let numerator = category_given_sign(c_li, s_star, theta_li)?;
    let denominator = category_given_sign(c_li, s_li, theta_li)?;
    let r_mh = if s_star == s_li {
        1.0
    } else {
        mh_ratio(numerator, denominator)
    };
    Ok(MhTerms {
        numerator,
        denominator,
        r_mh,
    })
}

/// Listener acceptance probability `min(1, theta[s*][c] / theta[s_li][c])`.
pub fn mh_acceptance(
    c_li: usize,
    theta_li: &[Vec<f64>],
    s_star: usize,
    s_li: usize,
) -> Result<f64> {
    Ok(mh_terms(c_li, theta_li, s_star, s_li)?.r_mh)
}

/// Acceptance probability under `kind`. The five comparison models stay in
/// `[0, 1]` by construction; an affine model that leaves it is clamped and
/// `clamped` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelAcceptance {
    pub probability: f64,
    pub clamped: bool,
}

pub fn model_acceptance(
    kind: &AcceptanceModelKind,
    r_mh: f64,
    numerator: f64,
    denominator: f64,
) -> ModelAcceptance {
    let raw = match *kind {
        AcceptanceModelKind::Constant { b_bar } => b_bar,
        AcceptanceModelKind::Mh => r_mh,
        AcceptanceModelKind::Numerator => numerator,
        AcceptanceModelKind::Subtraction => (numerator - denominator) / 2.0 + 0.5,
        AcceptanceModelKind::Binary => {
            if r_mh <= 0.5 {
                0.1
            } else {
                0.9
            }
        }
        AcceptanceModelKind::AffineMh { a, b } => a * r_mh + b,
    };
    let probability = raw.clamp(0.0, 1.0);
    ModelAcceptance {
        probability,
        clamped: probability != raw,
    }
}
