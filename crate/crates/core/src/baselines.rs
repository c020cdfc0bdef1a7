//! Greedy comparison mechanisms. Both run the same selection loop as the
//! main mechanism with a fixed rule and share its payment rule.

use crate::error::Result;
use crate::instance::Instance;
use crate::matching::MatchingSet;
use crate::selection::{greedy, Rule, WinningSet};

/// Always picks the most cost-effective pair.
pub fn cone_select(inst: &Instance, p: &MatchingSet) -> Result<WinningSet> {
    greedy(inst, p, Rule::MinCostEffectiveness)
}

/// Always picks the lowest bid among pairs that still cover something.
pub fn cosy_select(inst: &Instance, p: &MatchingSet) -> Result<WinningSet> {
    greedy(inst, p, Rule::MinBid)
}
