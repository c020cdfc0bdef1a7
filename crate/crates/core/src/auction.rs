//! End-to-end runs of one mechanism on a fixed matching.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{cone_select, cosy_select};
use crate::error::{Error, Result};
use crate::instance::{BidProfile, Instance};
use crate::matching::MatchingSet;
use crate::payment::{determine_payments, utilities, PaymentProfile, UtilityProfile};
use crate::selection::{select_winners, selection_threshold, ThresholdConfig, WinningSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Herald,
    Cone,
    Cosy,
}

impl Mechanism {
    pub const ALL: [Mechanism; 3] = [Mechanism::Herald, Mechanism::Cone, Mechanism::Cosy];

    pub fn as_str(self) -> &'static str {
        match self {
            Mechanism::Herald => "herald",
            Mechanism::Cone => "cone",
            Mechanism::Cosy => "cosy",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "herald" => Ok(Mechanism::Herald),
            "cone" => Ok(Mechanism::Cone),
            "cosy" => Ok(Mechanism::Cosy),
            other => Err(Error::Domain(format!("unknown mechanism `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionOutcome {
    pub mechanism: Mechanism,
    pub threshold: Option<f64>,
    pub winners: WinningSet,
    pub payments: PaymentProfile,
    pub utilities: UtilityProfile,
}

/// The winner-selection phase of `mechanism` alone.
pub fn select(
    inst: &Instance,
    p: &MatchingSet,
    mechanism: Mechanism,
    threshold: &ThresholdConfig,
) -> Result<WinningSet> {
    match mechanism {
        Mechanism::Herald => {
            let t = selection_threshold(inst, p, threshold)?;
            select_winners(inst, p, t)
        }
        Mechanism::Cone => cone_select(inst, p),
        Mechanism::Cosy => cosy_select(inst, p),
    }
}

/// The payment phase for winners chosen on `p`.
pub fn settle(inst: &Instance, p: &MatchingSet, mechanism: Mechanism, winners: WinningSet) -> Result<AuctionOutcome> {
    let bids = bids_of(inst, p);
    let payments = determine_payments(inst, p, &winners, &bids)?;
    let utilities = utilities(&payments, inst, &winners);
    Ok(AuctionOutcome {
        mechanism,
        threshold: winners.threshold,
        winners,
        payments,
        utilities,
    })
}

/// Selection and payment on an already sampled matching. The bids used are
/// the ones snapshotted in `p`.
pub fn run_auction(
    inst: &Instance,
    p: &MatchingSet,
    mechanism: Mechanism,
    threshold: &ThresholdConfig,
) -> Result<AuctionOutcome> {
    let winners = select(inst, p, mechanism, threshold)?;
    settle(inst, p, mechanism, winners)
}

/// Rebuilds a bid profile from the matching's snapshot, filling unmatched
/// workers with their true cost.
fn bids_of(inst: &Instance, p: &MatchingSet) -> BidProfile {
    let mut bids = inst.costs();
    for pair in p.pairs() {
        bids[pair.worker] = pair.bid;
    }
    BidProfile::new(bids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_abs_diff_eq;

    #[test]
    fn golden_cases() {
        for name in fixtures::CASES {
            let case = fixtures::load_golden(name).unwrap();
            let bids = case.instance.truthful_bids();
            let p = MatchingSet::fixed(&case.instance, &bids).unwrap().unwrap();
            let out = run_auction(&case.instance, &p, Mechanism::Herald, &ThresholdConfig::exact(case.k))
                .unwrap();
            assert_abs_diff_eq!(out.threshold.unwrap(), case.threshold, epsilon = 1e-9);
            let got: Vec<_> = out.winners.pairs.iter().map(|w| (w.subset, w.worker)).collect();
            let want: Vec<_> = case.winners.iter().map(|w| (w.subset, w.worker)).collect();
            assert_eq!(got, want);
            for (a, b) in out.payments.payments.iter().zip(&case.payments) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn mechanism_names() {
        for m in Mechanism::ALL {
            assert_eq!(m.to_string().parse::<Mechanism>().unwrap(), m);
        }
        assert!("vcg".parse::<Mechanism>().is_err());
    }

    #[test]
    fn baselines_pay_through_the_same_rule() {
        let case = fixtures::load_golden("example2-k1").unwrap();
        let bids = case.instance.truthful_bids();
        let p = MatchingSet::fixed(&case.instance, &bids).unwrap().unwrap();
        let cone = run_auction(&case.instance, &p, Mechanism::Cone, &ThresholdConfig::exact(1)).unwrap();
        assert_eq!(cone.threshold, None);
        assert_abs_diff_eq!(cone.payments.total(), 12.4, epsilon = 1e-9);
    }
}
