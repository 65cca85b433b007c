//! Asymptotic key rates per signal pulse pair.
//!
//! All three finite-decoy rates share the error-correction cost
//! `f * S_yy^Z * H(E_yy^Z)` and differ in which yield bound and which phase
//! error bound enter the privacy-amplification credit.

use crate::decoy::{estimate_bounds, BoundEstimates};
use crate::error::{Error, Result};
use crate::optics::{pair_gain, GainEntry, GainTable, Simulator, YieldTable};
use crate::source::{
    Basis, Party, PhotonNumberDistribution, SourceDistributions, SourceKind, SourceSet,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    /// Error-correction inefficiency `f >= 1`.
    pub ec_inefficiency: f64,
}

impl ProtocolParams {
    pub fn new(ec_inefficiency: f64) -> Result<Self> {
        if !(ec_inefficiency >= 1.0 && ec_inefficiency.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "error-correction inefficiency must be >= 1, got {ec_inefficiency}"
            )));
        }
        Ok(Self { ec_inefficiency })
    }
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            ec_inefficiency: 1.16,
        }
    }
}

/// Binary Shannon entropy in bits.
pub fn binary_entropy(e: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&e) {
        return Err(Error::InvalidArgument(format!(
            "entropy argument must lie in [0, 1], got {e}"
        )));
    }
    if e == 0.0 || e == 1.0 {
        return Ok(0.0);
    }
    Ok(-e * e.log2() - (1.0 - e) * (1.0 - e).log2())
}

/// Worst-case `1 - H(e)` over every phase error rate up to `e_upper`.
/// Past 1/2 the minimum sits at 1/2, so the credit is zero.
fn privacy_factor(e_upper: f64) -> Result<f64> {
    Ok(1.0 - binary_entropy(e_upper.min(0.5))?)
}

/// Signal-pair quantities shared by every rate formula.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SignalTerms {
    /// `a'_1 * b'_1` for the Z-basis signal sources.
    single_pair_weight: f64,
    s_yy: f64,
    e_yy: f64,
    correction: f64,
}

impl SignalTerms {
    fn new(
        gains: &GainTable,
        dists: &SourceDistributions,
        protocol: &ProtocolParams,
    ) -> Result<Self> {
        let signal = |party| {
            dists
                .get(party, Basis::Z, SourceKind::Signal)
                .ok_or_else(|| Error::IncompleteData("Z-basis signal source".into()))
        };
        let signal_a = signal(Party::Alice)?;
        let signal_b = signal(Party::Bob)?;
        let entry = gains
            .entry(Basis::Z, SourceKind::Signal, SourceKind::Signal)
            .ok_or_else(|| Error::IncompleteData("Z-basis entry yy".into()))?;
        Self::from_signal(signal_a, signal_b, entry, protocol)
    }

    fn from_signal(
        signal_a: &PhotonNumberDistribution,
        signal_b: &PhotonNumberDistribution,
        yy: GainEntry,
        protocol: &ProtocolParams,
    ) -> Result<Self> {
        let single_pair_weight = signal_a.prob(1) * signal_b.prob(1);
        let s_yy = yy.s;
        let e_yy = yy.error_rate();
        let correction = protocol.ec_inefficiency * s_yy * binary_entropy(e_yy)?;
        Ok(Self {
            single_pair_weight,
            s_yy,
            e_yy,
            correction,
        })
    }

    /// A missing error bound (zero yield bound) earns no credit.
    fn rate(&self, s11: f64, e11: Option<f64>) -> Result<f64> {
        let credit = match e11 {
            Some(e) if s11 > 0.0 => self.single_pair_weight * s11 * privacy_factor(e)?,
            _ => 0.0,
        };
        Ok(credit - self.correction)
    }
}

fn require_x_bound(bounds: &BoundEstimates) -> Result<f64> {
    bounds
        .s11_lower_x
        .ok_or_else(|| Error::IncompleteData("X-basis signal source".into()))
}

/// Both bases estimated separately: Z-basis yield bound, X-basis error bound.
pub fn key_rate_standard(
    bounds: &BoundEstimates,
    gains: &GainTable,
    dists: &SourceDistributions,
    protocol: &ProtocolParams,
) -> Result<f64> {
    require_x_bound(bounds)?;
    SignalTerms::new(gains, dists, protocol)?.rate(bounds.s11_lower_z, bounds.e11_upper_x)
}

/// Z-basis yield bound reused in the X-basis error bound; X needs only the decoy.
pub fn key_rate_z_anchored(
    bounds: &BoundEstimates,
    gains: &GainTable,
    dists: &SourceDistributions,
    protocol: &ProtocolParams,
) -> Result<f64> {
    SignalTerms::new(gains, dists, protocol)?.rate(bounds.s11_lower_z, bounds.e11_upper_x_via_z)
}

/// X-basis yield bound used for both bases; Z needs only the signal.
pub fn key_rate_x_anchored(
    bounds: &BoundEstimates,
    gains: &GainTable,
    dists: &SourceDistributions,
    protocol: &ProtocolParams,
) -> Result<f64> {
    let s11_x = require_x_bound(bounds)?;
    SignalTerms::new(gains, dists, protocol)?.rate(s11_x, bounds.e11_upper_x)
}

/// Rate with the true single-photon-pair yield and error (infinitely many decoys).
pub fn key_rate_infinite(
    yields: &YieldTable,
    dists: &SourceDistributions,
    gains: &GainTable,
    protocol: &ProtocolParams,
) -> Result<f64> {
    let terms = SignalTerms::new(gains, dists, protocol)?;
    if yields.s11(Basis::X) <= 0.0 {
        return Ok(0.0);
    }
    terms.rate(yields.s11(Basis::Z), Some(yields.e11(Basis::X)))
}

/// Infinite-decoy rate from the Z-basis signal distributions alone, for
/// callers that have no decoy sources at hand.
pub fn key_rate_infinite_for_signal(
    yields: &YieldTable,
    signal_a: &PhotonNumberDistribution,
    signal_b: &PhotonNumberDistribution,
    protocol: &ProtocolParams,
) -> Result<f64> {
    let yy = pair_gain(yields, Basis::Z, signal_a, signal_b);
    let terms = SignalTerms::from_signal(signal_a, signal_b, yy, protocol)?;
    if yields.s11(Basis::X) <= 0.0 {
        return Ok(0.0);
    }
    terms.rate(yields.s11(Basis::Z), Some(yields.e11(Basis::X)))
}

/// Finite-decoy rate from a yield bound, an optional phase error bound and
/// the Z-basis signal distributions.
pub fn key_rate_from_bounds(
    yields: &YieldTable,
    signal_a: &PhotonNumberDistribution,
    signal_b: &PhotonNumberDistribution,
    s11_lower: f64,
    e11_upper: Option<f64>,
    protocol: &ProtocolParams,
) -> Result<f64> {
    let yy = pair_gain(yields, Basis::Z, signal_a, signal_b);
    SignalTerms::from_signal(signal_a, signal_b, yy, protocol)?.rate(s11_lower, e11_upper)
}

/// Every rate and the quantities behind them at one loss point.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub loss_db: f64,
    /// Absent when the X basis has no signal intensity.
    pub r_standard: Option<f64>,
    pub r_z: f64,
    pub r_x: Option<f64>,
    pub r_infinite: f64,
    pub bounds: BoundEstimates,
    /// True single-photon-pair yield and X-basis error from the simulator.
    pub s11_true: f64,
    pub e11_x_true: f64,
    pub s_yy_z: f64,
    pub e_yy_z: f64,
}

impl RateReport {
    /// Largest finite-decoy rate available.
    pub fn best_finite(&self) -> f64 {
        [self.r_standard, Some(self.r_z), self.r_x]
            .into_iter()
            .flatten()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Clamped `rate` as a fraction of the clamped infinite-decoy rate;
    /// undefined when either is missing or the infinite-decoy rate is zero.
    pub fn relative_to_infinite(&self, rate: Option<f64>) -> Option<f64> {
        let reference = clamp_rate(self.r_infinite);
        rate.filter(|_| reference > 0.0)
            .map(|r| clamp_rate(r) / reference)
    }
}

/// Rate floored at zero: a negative rate means no key.
pub fn clamp_rate(rate: f64) -> f64 {
    rate.max(0.0)
}

/// Evaluates all four rates from a yield table for the given sources.
pub fn rate_report(
    yields: &YieldTable,
    dists: &SourceDistributions,
    gains: &GainTable,
    protocol: &ProtocolParams,
) -> Result<RateReport> {
    let bounds = estimate_bounds(gains, dists)?;
    let terms = SignalTerms::new(gains, dists, protocol)?;
    let has_x_signal = bounds.s11_lower_x.is_some();
    Ok(RateReport {
        loss_db: yields.loss_db(),
        r_standard: has_x_signal
            .then(|| key_rate_standard(&bounds, gains, dists, protocol))
            .transpose()?,
        r_z: key_rate_z_anchored(&bounds, gains, dists, protocol)?,
        r_x: has_x_signal
            .then(|| key_rate_x_anchored(&bounds, gains, dists, protocol))
            .transpose()?,
        r_infinite: key_rate_infinite(yields, dists, gains, protocol)?,
        bounds,
        s11_true: yields.s11(Basis::Z),
        e11_x_true: yields.e11(Basis::X),
        s_yy_z: terms.s_yy,
        e_yy_z: terms.e_yy,
    })
}

/// Convenience wrapper: simulate gains and evaluate every rate.
pub fn evaluate(
    sim: &Simulator,
    yields: &YieldTable,
    sources: &SourceSet,
    protocol: &ProtocolParams,
) -> Result<RateReport> {
    let dists = sim.distributions(sources)?;
    let gains = crate::optics::gains_from_yields(yields, &dists)?;
    rate_report(yields, &dists, &gains, protocol)
}
