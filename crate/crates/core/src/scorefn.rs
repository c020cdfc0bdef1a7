//! Score functions for the exponential mechanism and the matching
//! distribution they induce over workers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{BidProfile, B_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    /// Score `-b`.
    #[serde(rename = "lin")]
    Linear,
    /// Score `-ln b`.
    #[serde(rename = "log")]
    Logarithmic,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 2] = [ScoreKind::Linear, ScoreKind::Logarithmic];

    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::Linear => "lin",
            ScoreKind::Logarithmic => "log",
        }
    }

    /// Exponent of the unnormalised matching weight for a single bid.
    fn exponent(self, bid: f64, epsilon: f64, b_max: f64) -> f64 {
        match self {
            ScoreKind::Linear => -epsilon * bid / (2.0 * (b_max - B_MIN)),
            ScoreKind::Logarithmic => -epsilon * (bid / b_max).ln() / (2.0 * b_max.ln()),
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lin" | "linear" => Ok(ScoreKind::Linear),
            "log" | "ln" | "logarithmic" => Ok(ScoreKind::Logarithmic),
            other => Err(Error::Domain(format!("unknown score function `{other}`"))),
        }
    }
}

/// Sensitivity of the score function over bids in `[1, b_max]`.
pub fn sensitivity(kind: ScoreKind, b_max: f64) -> Result<f64> {
    if b_max.is_nan() || b_max <= B_MIN {
        return Err(Error::Domain(format!("b_max must exceed 1, got {b_max}")));
    }
    Ok(match kind {
        ScoreKind::Linear => (b_max - B_MIN) / b_max,
        ScoreKind::Logarithmic => b_max.ln(),
    })
}

/// Probability of each worker being matched to any one subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingDistribution {
    pub probs: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub epsilon: f64,
    pub kind: ScoreKind,
}

impl MatchingDistribution {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

pub fn matching_probabilities(
    bids: &BidProfile,
    kind: ScoreKind,
    epsilon: f64,
    b_max: f64,
) -> Result<MatchingDistribution> {
    sensitivity(kind, b_max)?;
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    if bids.is_empty() {
        return Err(Error::Domain("empty bid profile".into()));
    }
    bids.check_range(b_max)?;

    let exponents: Vec<f64> = bids
        .bids()
        .iter()
        .map(|&b| kind.exponent(b, epsilon, b_max))
        .collect();
    // log-sum-exp shifted by the largest exponent
    let top = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = top + exponents.iter().map(|e| (e - top).exp()).sum::<f64>().ln();
    let log_probs: Vec<f64> = exponents.iter().map(|e| e - log_z).collect();
    let probs = log_probs.iter().map(|lp| lp.exp()).collect();

    Ok(MatchingDistribution {
        probs,
        log_probs,
        epsilon,
        kind,
    })
}
