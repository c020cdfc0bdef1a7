//! Privacy-preserving reverse auctions for crowd sensing under uncertain task
//! arrivals.
//!
//! An auction runs in three phases over an [`Instance`]:
//!
//! 1. [`matching`]: every task subset is assigned a worker sampled from an
//!    exponential-mechanism distribution over bids ([`scorefn`]).
//! 2. [`selection`]: winners are picked greedily, switching between a
//!    cost-effectiveness rule and a lowest-bid rule depending on a threshold
//!    derived from the expected optimal cover cost ([`oracle`]).
//! 3. [`payment`]: every winning pair is paid the larger of its bid and the
//!    bid total of a greedy replacement cover built from other workers.
//!
//! [`baselines`] holds the two greedy comparison mechanisms, [`audit`] checks
//! the mechanism's guarantees mechanically, [`experiment`] drives seeded
//! simulation sweeps and [`fixtures`] carries worked reference cases.

pub mod audit;
pub mod auction;
pub mod baselines;
pub mod error;
pub mod experiment;
pub mod fixtures;
pub mod instance;
pub mod matching;
pub mod oracle;
pub mod payment;
pub mod rng;
pub mod scorefn;
pub mod selection;
pub mod stats;
pub mod taskset;

pub use auction::{run_auction, AuctionOutcome, Mechanism};
pub use error::{Error, Result};
pub use instance::{BidProfile, Instance, InstanceParams, ValidationReport, Violation, Worker};
pub use matching::{MatchMode, MatchingPair, MatchingSet};
pub use oracle::{ArrivalModel, ExpectationMode, OracleResult};
pub use payment::{PaymentProfile, UtilityProfile};
pub use scorefn::{MatchingDistribution, ScoreKind};
pub use selection::{SelectionType, ThresholdConfig, WinningPair, WinningSet};
pub use taskset::TaskSet;
