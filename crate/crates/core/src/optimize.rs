//! Intensity optimization and channel-loss sweeps.
//!
//! Parties are symmetric: every free intensity is applied to Alice and Bob
//! alike. Each protocol has the Z-basis signal free; the decoy of the basis
//! that anchors its yield bound can be freed as well.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::decoy::{e11_upper_bound, s11_lower_bound, tilde_quantities, DecoyPair};
use crate::error::{Error, Result};
use crate::keyrate::{
    evaluate, key_rate_from_bounds, key_rate_infinite_for_signal, ProtocolParams, RateReport,
};
use crate::optics::{
    fill_basis_gains, ChannelParams, DetectorParams, GainTable, Simulator, YieldTable,
};
use crate::source::{Basis, BasisDistributions, PhotonNumberDistribution, SourceSet};

/// Log-spaced coarse grid size per free dimension.
pub const GRID_POINTS: usize = 48;
/// Coordinate-descent rounds after the coarse grid.
pub const REFINE_ROUNDS: usize = 2;
/// Golden-section stops once the bracket is narrower than this fraction of its midpoint.
pub const REFINE_TOLERANCE: f64 = 1e-4;
/// Smallest signal-to-decoy ratio searched; closer intensities make the
/// yield bound numerically meaningless.
pub const MIN_SIGNAL_DECOY_RATIO: f64 = 1.01;
/// Largest intensity the search may reach.
pub const MAX_SEARCH_INTENSITY: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    Standard,
    ZAnchored,
    XAnchored,
    Infinite,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [
        Protocol::Standard,
        Protocol::ZAnchored,
        Protocol::XAnchored,
        Protocol::Infinite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Standard => "standard",
            Protocol::ZAnchored => "z_anchored",
            Protocol::XAnchored => "x_anchored",
            Protocol::Infinite => "infinite",
        }
    }

    /// Reads the matching rate out of a full report.
    pub fn rate_in(self, report: &RateReport) -> Option<f64> {
        match self {
            Protocol::Standard => report.r_standard,
            Protocol::ZAnchored => Some(report.r_z),
            Protocol::XAnchored => report.r_x,
            Protocol::Infinite => Some(report.r_infinite),
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown protocol `{s}`")))
    }
}

/// Inclusive loss range in dB. `stop < start` is an empty sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl LossRange {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        let range = Self { start, stop, step };
        range.validate()?;
        Ok(range)
    }

    pub fn single(loss_db: f64) -> Self {
        Self {
            start: loss_db,
            stop: loss_db,
            step: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "loss step must be positive, got {}",
                self.step
            )));
        }
        if !(self.start >= 0.0 && self.start.is_finite() && self.stop.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "loss range must be finite and non-negative, got {}..{}",
                self.start, self.stop
            )));
        }
        Ok(())
    }

    /// Loss points `start + i * step` up to `stop`, without accumulated drift.
    pub fn points(&self) -> Vec<f64> {
        if self.stop < self.start {
            return Vec::new();
        }
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| self.start + i as f64 * self.step)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreeIntensities {
    Signal,
    SignalAndDecoy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBounds {
    pub min: f64,
    pub max: f64,
}

impl SearchBounds {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min > 0.0 && min < max && max <= MAX_SEARCH_INTENSITY) {
            return Err(Error::InvalidArgument(format!(
                "search bounds must satisfy 0 < min < max <= {MAX_SEARCH_INTENSITY}, got [{min}, {max}]"
            )));
        }
        Ok(Self { min, max })
    }
}

impl Default for SearchBounds {
    fn default() -> Self {
        Self {
            min: 0.01,
            max: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub loss: LossRange,
    /// Protocols to optimize at each loss point; empty skips optimization.
    pub protocols: Vec<Protocol>,
    pub free: FreeIntensities,
    pub bounds: SearchBounds,
    /// Fixed intensities, and the starting point for free ones.
    pub sources: SourceSet,
    pub detector: DetectorParams,
    pub protocol: ProtocolParams,
    pub tail_epsilon: f64,
    /// Photon-number cutoff of the relay model; derived from the largest
    /// intensity when absent.
    pub cutoff: Option<usize>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.sources.validate()?;
        self.detector.validate()?;
        SearchBounds::new(self.bounds.min, self.bounds.max)?;
        if self.protocols.contains(&Protocol::XAnchored) && !self.sources.has_signal(Basis::X) {
            return Err(Error::InvalidArgument(
                "x_anchored needs an X-basis signal intensity".into(),
            ));
        }
        Ok(())
    }

    /// Relay model covering every intensity the sweep can touch.
    pub fn simulator(&self) -> Result<Simulator> {
        let mut max_intensity = self.sources.max_intensity();
        if !self.protocols.is_empty() {
            max_intensity = max_intensity.max(self.bounds.max);
        }
        match self.cutoff {
            Some(cutoff) => Simulator::new(self.detector, cutoff, self.tail_epsilon),
            None => Simulator::for_max_intensity(self.detector, max_intensity, self.tail_epsilon),
        }
    }
}

/// Free intensities at an optimum. `decoy` is the decoy in effect for the
/// anchoring basis, whether free or fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intensities {
    pub signal: f64,
    pub decoy: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum {
    pub loss_db: f64,
    pub protocol: Protocol,
    /// `None` when no searched intensity gives a positive rate.
    pub intensities: Option<Intensities>,
    /// Best raw rate, or 0 when no positive rate exists.
    pub rate: f64,
}

/// Key rate of one protocol as a function of its free intensities at a
/// fixed loss point.
pub struct Objective<'a> {
    protocol: Protocol,
    base: SourceSet,
    sim: &'a Simulator,
    yields: &'a YieldTable,
    params: ProtocolParams,
}

impl<'a> Objective<'a> {
    pub fn new(
        protocol: Protocol,
        base: SourceSet,
        sim: &'a Simulator,
        yields: &'a YieldTable,
        params: ProtocolParams,
    ) -> Self {
        Self {
            protocol,
            base,
            sim,
            yields,
            params,
        }
    }

    /// Basis whose decoy anchors the yield bound, if any.
    pub fn decoy_basis(&self) -> Option<Basis> {
        match self.protocol {
            Protocol::Standard | Protocol::ZAnchored => Some(Basis::Z),
            Protocol::XAnchored => Some(Basis::X),
            Protocol::Infinite => None,
        }
    }

    /// Configured decoy of the anchoring basis.
    pub fn base_decoy(&self) -> Option<f64> {
        self.decoy_basis().map(|b| self.base.alice.basis(b).decoy)
    }

    /// Configured Z-basis signal.
    pub fn base_signal(&self) -> f64 {
        self.base
            .alice
            .z
            .signal
            .expect("validated source set has a Z signal")
    }

    /// Rate at the given intensities; `None` when the combination is not a
    /// valid decoy setting.
    pub fn rate(&self, signal: f64, decoy: Option<f64>) -> Option<f64> {
        self.try_rate(signal, decoy).ok()
    }

    fn try_rate(&self, signal: f64, decoy: Option<f64>) -> Result<f64> {
        let eps = self.sim.tail_epsilon();
        match self.protocol {
            Protocol::Infinite => {
                let d = PhotonNumberDistribution::poisson(signal, eps)?;
                key_rate_infinite_for_signal(self.yields, &d, &d, &self.params)
            }
            Protocol::Standard | Protocol::ZAnchored => {
                let mut z = self.base.alice.z;
                let mut x = self.base.alice.x;
                z.signal = Some(signal);
                if let Some(d) = decoy {
                    z.decoy = d;
                }
                if self.protocol == Protocol::Standard {
                    x = z;
                }
                let sources = SourceSet::symmetric_per_basis(z, x)?;
                let report = evaluate(self.sim, self.yields, &sources, &self.params)?;
                self.protocol
                    .rate_in(&report)
                    .ok_or_else(|| Error::IncompleteData("X-basis signal source".into()))
            }
            Protocol::XAnchored => {
                // The Z basis only carries the signal here, so the Z-basis
                // decoy constraint does not apply.
                let mut x = self.base.alice.x;
                if let Some(d) = decoy {
                    x.decoy = d;
                }
                let x_signal = x
                    .signal
                    .ok_or_else(|| Error::IncompleteData("X-basis signal source".into()))?;
                if !(x.decoy > 0.0 && x_signal > x.decoy) {
                    return Err(Error::InvalidArgument(
                        "X-basis decoy must stay below its signal".into(),
                    ));
                }
                let dists = BasisDistributions::poisson(&x, eps)?;
                let mut gains = GainTable::new();
                fill_basis_gains(&mut gains, self.yields, Basis::X, &dists, &dists);
                let pair = DecoyPair::new(
                    &dists.decoy,
                    dists.signal.as_ref().expect("signal set above"),
                );
                let tq = tilde_quantities(&gains, Basis::X, pair, pair)?;
                let s11 = s11_lower_bound(&tq, pair, pair)?;
                let a1 = dists.decoy.prob(1);
                let e11 = match e11_upper_bound(tq.t_xx, a1, a1, s11) {
                    Ok(e) => Some(e),
                    Err(Error::UndefinedBound) => None,
                    Err(e) => return Err(e),
                };
                let z_signal = PhotonNumberDistribution::poisson(signal, eps)?;
                key_rate_from_bounds(self.yields, &z_signal, &z_signal, s11, e11, &self.params)
            }
        }
    }

    /// Search interval for the signal given a decoy.
    pub fn signal_interval(&self, bounds: &SearchBounds, decoy: Option<f64>) -> Option<(f64, f64)> {
        let lo = match self.protocol {
            Protocol::Standard | Protocol::ZAnchored => {
                bounds.min.max(decoy? * MIN_SIGNAL_DECOY_RATIO)
            }
            Protocol::XAnchored | Protocol::Infinite => bounds.min,
        };
        (lo < bounds.max).then_some((lo, bounds.max))
    }

    /// Search interval for the decoy given a signal.
    pub fn decoy_interval(&self, bounds: &SearchBounds, signal: f64) -> Option<(f64, f64)> {
        let hi = match self.protocol {
            Protocol::Standard | Protocol::ZAnchored => signal / MIN_SIGNAL_DECOY_RATIO,
            Protocol::XAnchored => self.base.alice.x.signal? / MIN_SIGNAL_DECOY_RATIO,
            Protocol::Infinite => return None,
        };
        let hi = hi.min(bounds.max);
        (bounds.min < hi).then_some((bounds.min, hi))
    }
}

/// `count` log-spaced points covering `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let ratio = (hi / lo).ln() / (count - 1) as f64;
    (0..count)
        .map(|i| {
            if i + 1 == count {
                hi
            } else {
                lo * (ratio * i as f64).exp()
            }
        })
        .collect()
}

/// Maximizes a unimodal `f` on `[lo, hi]` by golden-section search.
/// Returns the best point found and its value.
pub fn golden_section_max<F>(mut f: F, mut lo: f64, mut hi: f64, rel_tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > rel_tol * 0.5 * (hi + lo) {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn score(rate: Option<f64>) -> f64 {
    rate.unwrap_or(f64::NEG_INFINITY)
}

/// Grid neighbours of `x`, used as the golden-section bracket.
fn bracket(grid: &[f64], x: f64) -> (f64, f64) {
    let i = grid.partition_point(|&g| g < x);
    let lo = grid[i.saturating_sub(1).min(grid.len() - 1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    (lo.min(x), hi.max(x))
}

/// Coarse log grid then golden-section coordinate descent.
pub fn optimize_objective(
    objective: &Objective<'_>,
    free: FreeIntensities,
    bounds: &SearchBounds,
) -> Option<(Intensities, f64)> {
    let decoy_free = free == FreeIntensities::SignalAndDecoy && objective.decoy_basis().is_some();
    let fixed_decoy = objective.base_decoy();

    // Coarse scan, ascending so that the first maximum is the smallest intensity.
    let mut best: Option<(Intensities, f64)> = None;
    let consider = |signal: f64, decoy: Option<f64>, best: &mut Option<(Intensities, f64)>| {
        let r = score(objective.rate(signal, decoy));
        if r > best.map_or(f64::NEG_INFINITY, |b| b.1) {
            *best = Some((Intensities { signal, decoy }, r));
        }
    };
    if decoy_free {
        let grid = log_grid(bounds.min, bounds.max, GRID_POINTS);
        for &decoy in &grid {
            let Some((lo, hi)) = objective.signal_interval(bounds, Some(decoy)) else {
                continue;
            };
            for &signal in grid.iter().filter(|&&s| (lo..=hi).contains(&s)) {
                consider(signal, Some(decoy), &mut best);
            }
        }
    } else {
        let (lo, hi) = objective.signal_interval(bounds, fixed_decoy)?;
        for signal in log_grid(lo, hi, GRID_POINTS) {
            consider(signal, fixed_decoy, &mut best);
        }
        let start = objective.base_signal();
        if (lo..=hi).contains(&start) {
            consider(start, fixed_decoy, &mut best);
        }
    }
    let (mut point, mut rate) = best?;
    if rate.is_nan() || rate <= 0.0 {
        return None;
    }

    for _ in 0..REFINE_ROUNDS {
        if let Some((lo, hi)) = objective.signal_interval(bounds, point.decoy) {
            let grid = log_grid(lo, hi, GRID_POINTS);
            let (a, b) = bracket(&grid, point.signal.clamp(lo, hi));
            let (x, r) = golden_section_max(
                |s| score(objective.rate(s, point.decoy)),
                a,
                b,
                REFINE_TOLERANCE,
            );
            if r > rate {
                point.signal = x;
                rate = r;
            }
        }
        if decoy_free {
            if let Some((lo, hi)) = objective.decoy_interval(bounds, point.signal) {
                let grid = log_grid(lo, hi, GRID_POINTS);
                let current = point.decoy.expect("decoy is free");
                let (a, b) = bracket(&grid, current.clamp(lo, hi));
                let (x, r) = golden_section_max(
                    |d| score(objective.rate(point.signal, Some(d))),
                    a,
                    b,
                    REFINE_TOLERANCE,
                );
                if r > rate {
                    point.decoy = Some(x);
                    rate = r;
                }
            }
        }
    }
    Some((point, rate))
}

/// Optimizes one protocol at one loss point with a prepared yield table.
pub fn optimize_with(
    sim: &Simulator,
    yields: &YieldTable,
    config: &SweepConfig,
    protocol: Protocol,
) -> Optimum {
    let objective = Objective::new(protocol, config.sources, sim, yields, config.protocol);
    let found = optimize_objective(&objective, config.free, &config.bounds);
    Optimum {
        loss_db: yields.loss_db(),
        protocol,
        intensities: found.map(|(p, _)| p),
        rate: found.map_or(0.0, |(_, r)| r),
    }
}

/// Optimizes one protocol at a single loss point.
pub fn optimize_point(loss_db: f64, config: &SweepConfig, protocol: Protocol) -> Result<Optimum> {
    config.validate()?;
    let sim = config.simulator()?;
    let yields = sim.yields(&ChannelParams::new(loss_db)?);
    Ok(optimize_with(&sim, &yields, config, protocol))
}

/// Fixed-intensity rates and per-protocol optima at one loss point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub report: RateReport,
    pub optima: Vec<Optimum>,
}

/// Evaluates every loss point, in parallel on the current rayon pool.
/// Output is ordered by loss and does not depend on the thread count.
pub fn sweep(config: &SweepConfig) -> Result<Vec<SweepPoint>> {
    config.validate()?;
    let sim = config.simulator()?;
    config
        .loss
        .points()
        .into_par_iter()
        .map(|loss_db| {
            let yields = sim.yields(&ChannelParams::new(loss_db)?);
            let report = evaluate(&sim, &yields, &config.sources, &config.protocol)?;
            let optima = config
                .protocols
                .iter()
                .map(|&p| optimize_with(&sim, &yields, config, p))
                .collect();
            Ok(SweepPoint { report, optima })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::DEFAULT_TAIL_EPSILON;

    fn config(protocols: Vec<Protocol>) -> SweepConfig {
        SweepConfig {
            loss: LossRange::new(0.0, 40.0, 10.0).unwrap(),
            protocols,
            free: FreeIntensities::Signal,
            bounds: SearchBounds::default(),
            sources: SourceSet::symmetric(0.1, 0.15).unwrap(),
            detector: DetectorParams::default(),
            protocol: ProtocolParams::default(),
            tail_epsilon: DEFAULT_TAIL_EPSILON,
            cutoff: None,
        }
    }

    #[test]
    fn loss_points() {
        assert_eq!(
            LossRange::new(0.0, 1.0, 0.25).unwrap().points(),
            vec![0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert!(LossRange::new(5.0, 1.0, 1.0).unwrap().points().is_empty());
        assert_eq!(LossRange::new(0.0, 40.0, 0.1).unwrap().points().len(), 401);
        assert!(LossRange::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(0.01, 1.0, 3);
        assert_eq!(g[0], 0.01);
        assert!((g[1] - 0.1).abs() < 1e-15);
        assert_eq!(g[2], 1.0);
    }

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, fx) = golden_section_max(|x| -(x - 0.37) * (x - 0.37), 0.1, 1.0, 1e-6);
        assert!((x - 0.37).abs() < 1e-6);
        assert!(fx <= 0.0 && fx > -1e-12);
    }

    #[test]
    fn protocol_names_round_trip() {
        for p in Protocol::ALL {
            assert_eq!(p.name().parse::<Protocol>().unwrap(), p);
        }
        assert!("bogus".parse::<Protocol>().is_err());
    }

    #[test]
    fn x_anchored_objective_matches_full_report() {
        let cfg = config(vec![]);
        let sim = cfg.simulator().unwrap();
        let yields = sim.yields(&ChannelParams::new(20.0).unwrap());
        let report = evaluate(&sim, &yields, &cfg.sources, &cfg.protocol).unwrap();
        let objective = Objective::new(
            Protocol::XAnchored,
            cfg.sources,
            &sim,
            &yields,
            cfg.protocol,
        );
        let r = objective.rate(0.15, None).unwrap();
        assert!((r - report.r_x.unwrap()).abs() <= 1e-15 * r.abs());
        for p in [Protocol::Standard, Protocol::ZAnchored, Protocol::Infinite] {
            let objective = Objective::new(p, cfg.sources, &sim, &yields, cfg.protocol);
            assert_eq!(objective.rate(0.15, Some(0.1)), p.rate_in(&report));
        }
    }

    #[test]
    fn optimized_signal_interior_and_not_worse() {
        let cfg = config(vec![Protocol::ZAnchored]);
        let opt = optimize_point(20.0, &cfg, Protocol::ZAnchored).unwrap();
        let signal = opt.intensities.unwrap().signal;
        assert!(signal > 0.1 * MIN_SIGNAL_DECOY_RATIO + 1e-3 && signal < cfg.bounds.max - 1e-3);
        let sim = cfg.simulator().unwrap();
        let yields = sim.yields(&ChannelParams::new(20.0).unwrap());
        let fixed = evaluate(&sim, &yields, &cfg.sources, &cfg.protocol).unwrap();
        assert!(opt.rate >= fixed.r_z);
    }

    #[test]
    fn hopeless_loss_gives_sentinel() {
        let cfg = config(vec![Protocol::Standard]);
        let opt = optimize_point(90.0, &cfg, Protocol::Standard).unwrap();
        assert_eq!(opt.intensities, None);
        assert_eq!(opt.rate, 0.0);
    }

    #[test]
    fn empty_sweep() {
        let mut cfg = config(Protocol::ALL.to_vec());
        cfg.loss = LossRange::new(10.0, 0.0, 1.0).unwrap();
        assert!(sweep(&cfg).unwrap().is_empty());
    }

    #[test]
    fn decoy_free_search_not_worse() {
        let mut cfg = config(vec![Protocol::ZAnchored]);
        let signal_only = optimize_point(20.0, &cfg, Protocol::ZAnchored).unwrap();
        cfg.free = FreeIntensities::SignalAndDecoy;
        let both = optimize_point(20.0, &cfg, Protocol::ZAnchored).unwrap();
        let i = both.intensities.unwrap();
        assert!(i.decoy.unwrap() < i.signal);
        assert!(both.rate >= signal_only.rate * (1.0 - 1e-9));
    }
}
