mod common;

use mdi_decoy::keyrate::{evaluate, ProtocolParams};
use mdi_decoy::optics::{ChannelParams, DetectorParams};
use mdi_decoy::optimize::{
    optimize_with, FreeIntensities, LossRange, Objective, Protocol, SearchBounds, SweepConfig,
};
use mdi_decoy::source::{SourceSet, DEFAULT_TAIL_EPSILON};

use common::geometric_grid;

fn config(free: FreeIntensities) -> SweepConfig {
    SweepConfig {
        loss: LossRange::single(20.0),
        protocols: Protocol::ALL.to_vec(),
        free,
        bounds: SearchBounds::default(),
        sources: SourceSet::symmetric(0.1, 0.15).unwrap(),
        detector: DetectorParams::default(),
        protocol: ProtocolParams::default(),
        tail_epsilon: DEFAULT_TAIL_EPSILON,
        cutoff: None,
    }
}

/// Best signal on a grid with 0.1% relative spacing.
fn grid_optimum(objective: &Objective<'_>, bounds: &SearchBounds) -> (f64, f64) {
    let decoy = objective.base_decoy();
    let (lo, hi) = objective.signal_interval(bounds, decoy).unwrap();
    geometric_grid(lo, hi, 1.001)
        .into_iter()
        .filter_map(|s| objective.rate(s, decoy).map(|r| (s, r)))
        .fold((f64::NAN, f64::NEG_INFINITY), |best, (s, r)| {
            if r > best.1 {
                (s, r)
            } else {
                best
            }
        })
}

#[test]
fn signal_optimum_matches_fine_grid() {
    let config = config(FreeIntensities::Signal);
    let sim = config.simulator().unwrap();
    for loss in [10.0, 20.0, 30.0] {
        let yields = sim.yields(&ChannelParams::new(loss).unwrap());
        for protocol in Protocol::ALL {
            let objective =
                Objective::new(protocol, config.sources, &sim, &yields, config.protocol);
            let (grid_signal, grid_rate) = grid_optimum(&objective, &config.bounds);
            let opt = optimize_with(&sim, &yields, &config, protocol);
            let found = opt.intensities.expect("positive rate at moderate loss");
            let rel = (found.signal - grid_signal).abs() / grid_signal;
            assert!(
                rel < 1e-3,
                "{protocol} at {loss} dB: {} vs grid {grid_signal}",
                found.signal
            );
            assert!(
                opt.rate >= grid_rate * (1.0 - 1e-9),
                "{protocol} at {loss} dB: {} < {grid_rate}",
                opt.rate
            );
        }
    }
}

#[test]
fn decoy_free_search_beats_coarse_two_dimensional_grid() {
    let config = config(FreeIntensities::SignalAndDecoy);
    let sim = config.simulator().unwrap();
    let yields = sim.yields(&ChannelParams::new(20.0).unwrap());
    for protocol in [Protocol::ZAnchored, Protocol::XAnchored] {
        let objective = Objective::new(protocol, config.sources, &sim, &yields, config.protocol);
        let mut best = f64::NEG_INFINITY;
        for decoy in geometric_grid(0.01, 0.5, 1.05) {
            let Some((lo, hi)) = objective.signal_interval(&config.bounds, Some(decoy)) else {
                continue;
            };
            for signal in geometric_grid(lo, hi, 1.05) {
                if let Some(r) = objective.rate(signal, Some(decoy)) {
                    best = best.max(r);
                }
            }
        }
        let opt = optimize_with(&sim, &yields, &config, protocol);
        assert!(
            opt.rate >= best * (1.0 - 1e-6),
            "{protocol}: {} < {best}",
            opt.rate
        );
        let fixed = optimize_with(
            &sim,
            &yields,
            &self::config(FreeIntensities::Signal),
            protocol,
        );
        assert!(opt.rate >= fixed.rate);
    }
}

#[test]
fn optimized_rates_never_below_fixed_intensities() {
    let config = SweepConfig {
        loss: LossRange::new(0.0, 60.0, 5.0).unwrap(),
        ..config(FreeIntensities::Signal)
    };
    let sim = config.simulator().unwrap();
    for loss in config.loss.points() {
        let yields = sim.yields(&ChannelParams::new(loss).unwrap());
        let report = evaluate(&sim, &yields, &config.sources, &config.protocol).unwrap();
        for protocol in Protocol::ALL {
            let fixed = protocol.rate_in(&report).unwrap();
            let opt = optimize_with(&sim, &yields, &config, protocol);
            assert!(
                opt.rate >= fixed,
                "{protocol} at {loss} dB: {} < {fixed}",
                opt.rate
            );
            assert!(opt.rate >= 0.0);
            assert_eq!(opt.intensities.is_none(), opt.rate == 0.0);
        }
    }
}
