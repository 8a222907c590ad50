//! Simulation engine for repeated karma auctions.
//!
//! Agents repeatedly bid an artificial currency for one of `capacity` slots.
//! Payments are redistributed uniformly so the total amount of karma is
//! preserved. The crate provides the auction clearing rule, the pacing
//! strategies, hindsight benchmarks, the simulation engines and the
//! statistics used to evaluate them.

pub mod auction;
pub mod distributions;
pub mod error;
pub mod hindsight;
pub mod matching;
pub mod metrics;
pub mod params;
pub mod rng;
pub mod sim;
pub mod strategy;

pub use auction::{clear_auction, residual_gain, Clearing, PeriodOutcome, ResidualGain, RoundBids};
pub use distributions::{CompetingBidModel, CompetingBids, ValuationModel};
pub use error::{Error, Result};
pub use hindsight::{solve_dual, solve_exact_01, solve_fractional, DualSolution, HindsightInstance, HindsightSolution};
pub use matching::{matching_probabilities, MatchingModel};
pub use params::{AgentParams, MechanismParams, StationaryMarket, StepSchedule};
pub use rng::{RngContract, RngStream, StreamPurpose};
pub use strategy::{AgentState, HittingTimes, StrategyKind};
