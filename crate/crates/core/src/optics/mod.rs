//! Channel loss, the relay's Bell-state measurement and the resulting
//! yields and gains.

pub mod bsm;
pub mod channel;
pub mod gains;
pub mod yields;

use std::sync::Arc;

pub use bsm::{
    bsm_outcome_distribution, Announcement, OccupationPatterns, Polarization, PolarizationPrep,
    RelayResponse,
};
pub use channel::{apply_loss, ChannelParams, DetectorParams};
pub use gains::{
    compute_gain_table, fill_basis_gains, gains_from_yields, pair_gain, GainEntry, GainTable,
};
pub use yields::{yields_for_pair, YieldTable};

use crate::error::Result;
use crate::source::{PhotonNumberDistribution, SourceDistributions, SourceSet};

/// Relay response computed once for a detector configuration and cutoff,
/// shared across loss points and intensity choices.
#[derive(Debug, Clone)]
pub struct Simulator {
    relay: Arc<RelayResponse>,
    tail_epsilon: f64,
}

impl Simulator {
    pub fn new(detector: DetectorParams, cutoff: usize, tail_epsilon: f64) -> Result<Self> {
        detector.validate()?;
        Ok(Self {
            relay: Arc::new(RelayResponse::new(detector, cutoff)),
            tail_epsilon,
        })
    }

    /// Picks the cutoff that covers Poisson sources up to `max_intensity`.
    pub fn for_max_intensity(
        detector: DetectorParams,
        max_intensity: f64,
        tail_epsilon: f64,
    ) -> Result<Self> {
        let cutoff = PhotonNumberDistribution::poisson(max_intensity, tail_epsilon)?.cutoff();
        Self::new(detector, cutoff, tail_epsilon)
    }

    pub fn cutoff(&self) -> usize {
        self.relay.cutoff()
    }

    pub fn tail_epsilon(&self) -> f64 {
        self.tail_epsilon
    }

    pub fn detector(&self) -> &DetectorParams {
        self.relay.detector()
    }

    pub fn relay(&self) -> &RelayResponse {
        &self.relay
    }

    pub fn yields(&self, channel: &ChannelParams) -> YieldTable {
        YieldTable::new(&self.relay, channel)
    }

    pub fn distributions(&self, sources: &SourceSet) -> Result<SourceDistributions> {
        sources.validate()?;
        SourceDistributions::poisson(sources, self.tail_epsilon)
    }

    pub fn gains(&self, yields: &YieldTable, sources: &SourceSet) -> Result<GainTable> {
        gains_from_yields(yields, &self.distributions(sources)?)
    }
}
