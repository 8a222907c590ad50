//! Simulation engines.
//!
//! Engines advance agent states round by round and report every round to an
//! [`Observer`]. Observers decide what to keep: a full [`Trace`], running
//! totals, or a handful of diagnostics. This keeps long horizons cheap when
//! only summary statistics are needed.

mod deviation;
mod observers;
mod population;
mod stationary;
mod trace;

pub use deviation::{hindsight_replay_plan, run_deviation, run_deviation_family, DeviationOutcome};
pub use observers::{
    AgentSummary, ConservationMonitor, DistanceAccumulator, PathPoint, PathRecorder, SamplePathCollector,
    SummaryObserver,
};
pub use population::{run_parallel, run_population, run_simultaneous, AgentSpec, PopulationSetup};
pub use stationary::{run_stationary, StationaryAgent};
pub use trace::{Trace, TraceRecorder};

use crate::strategy::AgentState;

/// Everything that happened in one round, indexed by agent.
#[derive(Debug, Clone, Copy)]
pub struct RoundView<'a> {
    /// 1-based round index.
    pub t: usize,
    pub horizon: usize,
    /// State at the start of the round.
    pub before: &'a [AgentState],
    pub valuations: &'a [f64],
    pub bids: &'a [f64],
    pub winners: &'a [bool],
    pub payments: &'a [f64],
    pub gains: &'a [f64],
    pub competing_hi: &'a [f64],
    pub competing_lo: &'a [f64],
    pub costs: &'a [f64],
    pub saved: &'a [f64],
    /// State after the update.
    pub after: &'a [AgentState],
}

/// Receives each round as it is simulated.
pub trait Observer {
    fn on_round(&mut self, view: &RoundView<'_>);

    fn on_finish(&mut self, _final_states: &[AgentState]) {}
}

impl Observer for () {
    fn on_round(&mut self, _view: &RoundView<'_>) {}
}

impl<O: Observer + ?Sized> Observer for &mut O {
    fn on_round(&mut self, view: &RoundView<'_>) {
        (**self).on_round(view);
    }

    fn on_finish(&mut self, final_states: &[AgentState]) {
        (**self).on_finish(final_states);
    }
}

impl<A: Observer, B: Observer> Observer for (A, B) {
    fn on_round(&mut self, view: &RoundView<'_>) {
        self.0.on_round(view);
        self.1.on_round(view);
    }

    fn on_finish(&mut self, final_states: &[AgentState]) {
        self.0.on_finish(final_states);
        self.1.on_finish(final_states);
    }
}

impl<A: Observer, B: Observer, C: Observer> Observer for (A, B, C) {
    fn on_round(&mut self, view: &RoundView<'_>) {
        self.0.on_round(view);
        self.1.on_round(view);
        self.2.on_round(view);
    }

    fn on_finish(&mut self, final_states: &[AgentState]) {
        self.0.on_finish(final_states);
        self.1.on_finish(final_states);
        self.2.on_finish(final_states);
    }
}

impl<O: Observer> Observer for Vec<O> {
    fn on_round(&mut self, view: &RoundView<'_>) {
        for o in self.iter_mut() {
            o.on_round(view);
        }
    }

    fn on_finish(&mut self, final_states: &[AgentState]) {
        for o in self.iter_mut() {
            o.on_finish(final_states);
        }
    }
}
