//! Photon-number-resolved model of the relay's Bell-state measurement.
//!
//! Alice's pulse enters spatial mode `a`, Bob's enters `b`. A balanced beam
//! splitter maps each polarization component as `a -> (c + d)/sqrt2` and
//! `b -> (c - d)/sqrt2`. The four output modes `cH, cV, dH, dV` (detectors
//! 1H, 1V, 2H, 2V) feed threshold detectors with independent dark counts.

use std::f64::consts::FRAC_1_SQRT_2;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use crate::optics::channel::DetectorParams;
use crate::source::Basis;

/// Number of output modes: two spatial modes times two polarizations.
pub const OUTPUT_MODES: usize = 4;

/// Detector bit masks over the output modes `[1H, 1V, 2H, 2V]`.
const PSI_MINUS_PATTERNS: [u8; 2] = [0b1001, 0b0110];
const PSI_PLUS_PATTERNS: [u8; 2] = [0b0011, 0b1100];

/// One party's prepared polarization state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolarizationPrep {
    pub basis: Basis,
    pub bit: u8,
}

impl PolarizationPrep {
    pub fn new(basis: Basis, bit: u8) -> Self {
        assert!(bit < 2, "bit must be 0 or 1");
        Self { basis, bit }
    }

    /// All four `(alice, bob)` preparations of one basis.
    pub fn pairs(basis: Basis) -> [(PolarizationPrep, PolarizationPrep); 4] {
        let p = |bit| PolarizationPrep::new(basis, bit);
        [(p(0), p(0)), (p(0), p(1)), (p(1), p(0)), (p(1), p(1))]
    }

    /// Linear polarization angle: H = 0, V = pi/2, +45 and -45 degrees.
    pub fn angle(&self) -> f64 {
        match (self.basis, self.bit) {
            (Basis::Z, 0) => 0.0,
            (Basis::Z, _) => FRAC_PI_2,
            (Basis::X, 0) => FRAC_PI_4,
            (Basis::X, _) => -FRAC_PI_4,
        }
    }

    /// Exact `(H, V)` amplitudes, free of rounding in `cos(pi/2)`.
    pub fn components(&self) -> Polarization {
        match (self.basis, self.bit) {
            (Basis::Z, 0) => Polarization { h: 1.0, v: 0.0 },
            (Basis::Z, _) => Polarization { h: 0.0, v: 1.0 },
            (Basis::X, 0) => Polarization {
                h: FRAC_1_SQRT_2,
                v: FRAC_1_SQRT_2,
            },
            (Basis::X, _) => Polarization {
                h: FRAC_1_SQRT_2,
                v: -FRAC_1_SQRT_2,
            },
        }
    }
}

/// Real linear polarization `h |H> + v |V>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Polarization {
    pub h: f64,
    pub v: f64,
}

impl Polarization {
    pub fn from_angle(angle: f64) -> Self {
        let (v, h) = angle.sin_cos();
        Self { h, v }
    }

    /// Rotates by `angle`, leaving the state untouched for a zero angle.
    pub fn rotated(self, angle: f64) -> Self {
        if angle == 0.0 {
            return self;
        }
        let (s, c) = angle.sin_cos();
        Self {
            h: c * self.h - s * self.v,
            v: s * self.h + c * self.v,
        }
    }
}

/// Relay announcement probabilities for one input.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Announcement {
    pub psi_minus: f64,
    pub psi_plus: f64,
    pub fail: f64,
}

impl Announcement {
    pub fn success(&self) -> f64 {
        self.psi_minus + self.psi_plus
    }

    pub fn total(&self) -> f64 {
        self.psi_minus + self.psi_plus + self.fail
    }

    /// Probability that a success carries the wrong bit relation.
    ///
    /// Z basis: either Bell state means anti-correlated bits, so equal bits
    /// are always wrong. X basis: psi+ expects equal bits, psi- unequal.
    pub fn wrong_bit(&self, basis: Basis, bit_a: u8, bit_b: u8) -> f64 {
        let equal = bit_a == bit_b;
        match basis {
            Basis::Z if equal => self.success(),
            Basis::Z => 0.0,
            Basis::X if equal => self.psi_minus,
            Basis::X => self.psi_plus,
        }
    }
}

/// Probability of each set of occupied output modes, indexed by bit mask
/// over `[cH, cV, dH, dV]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OccupationPatterns(pub [f64; 1 << OUTPUT_MODES]);

impl OccupationPatterns {
    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Applies threshold detection with dark counts and classifies the clicks.
    pub fn announce(&self, dark_count: f64) -> Announcement {
        let mut clicks = [0.0; 1 << OUTPUT_MODES];
        for (occupied, &p) in self.0.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            // Every occupied detector clicks; each silent one fires with p_d.
            for (clicked, slot) in clicks.iter_mut().enumerate() {
                if clicked & occupied != occupied {
                    continue;
                }
                let dark = (clicked & !occupied).count_ones() as i32;
                let silent = OUTPUT_MODES as i32 - (clicked as u32).count_ones() as i32;
                *slot += p * dark_count.powi(dark) * (1.0 - dark_count).powi(silent);
            }
        }
        classify(&clicks)
    }
}

fn classify(clicks: &[f64; 1 << OUTPUT_MODES]) -> Announcement {
    let psi_minus: f64 = PSI_MINUS_PATTERNS.iter().map(|&m| clicks[m as usize]).sum();
    let psi_plus: f64 = PSI_PLUS_PATTERNS.iter().map(|&m| clicks[m as usize]).sum();
    let fail = clicks
        .iter()
        .enumerate()
        .filter(|(m, _)| {
            let m = *m as u8;
            !PSI_MINUS_PATTERNS.contains(&m) && !PSI_PLUS_PATTERNS.contains(&m)
        })
        .map(|(_, p)| p)
        .sum();
    Announcement {
        psi_minus,
        psi_plus,
        fail,
    }
}

/// Normalized Fock state over the four output modes with a fixed total
/// photon number. Amplitudes are real since every optical element is.
#[derive(Debug, Clone)]
struct FockState {
    photons: usize,
    /// Side length of the dense `(n_cH, n_cV, n_dH)` index cube.
    dim: usize,
    amps: Vec<f64>,
}

impl FockState {
    fn vacuum(max_photons: usize) -> Self {
        let dim = max_photons + 1;
        let mut amps = vec![0.0; dim * dim * dim];
        amps[0] = 1.0;
        Self {
            photons: 0,
            dim,
            amps,
        }
    }

    fn index(&self, n0: usize, n1: usize, n2: usize) -> usize {
        (n0 * self.dim + n1) * self.dim + n2
    }

    /// Applies `(sum_j w_j c_j^dagger) / sqrt(norm)`.
    fn create(&self, weights: &[f64; OUTPUT_MODES], norm: f64) -> Self {
        assert!(self.photons + 1 < self.dim, "Fock state capacity exceeded");
        let scale = 1.0 / norm.sqrt();
        let mut amps = vec![0.0; self.amps.len()];
        let total = self.photons;
        for n0 in 0..=total {
            for n1 in 0..=total - n0 {
                for n2 in 0..=total - n0 - n1 {
                    let a = self.amps[self.index(n0, n1, n2)];
                    if a == 0.0 {
                        continue;
                    }
                    let n3 = total - n0 - n1 - n2;
                    let a = a * scale;
                    amps[self.index(n0 + 1, n1, n2)] += weights[0] * ((n0 + 1) as f64).sqrt() * a;
                    amps[self.index(n0, n1 + 1, n2)] += weights[1] * ((n1 + 1) as f64).sqrt() * a;
                    amps[self.index(n0, n1, n2 + 1)] += weights[2] * ((n2 + 1) as f64).sqrt() * a;
                    amps[self.index(n0, n1, n2)] += weights[3] * ((n3 + 1) as f64).sqrt() * a;
                }
            }
        }
        Self {
            photons: total + 1,
            dim: self.dim,
            amps,
        }
    }

    fn patterns(&self) -> OccupationPatterns {
        let mut out = [0.0; 1 << OUTPUT_MODES];
        let total = self.photons;
        for n0 in 0..=total {
            for n1 in 0..=total - n0 {
                for n2 in 0..=total - n0 - n1 {
                    let a = self.amps[self.index(n0, n1, n2)];
                    if a == 0.0 {
                        continue;
                    }
                    let n3 = total - n0 - n1 - n2;
                    let mask = (n0 > 0) as usize
                        | ((n1 > 0) as usize) << 1
                        | ((n2 > 0) as usize) << 2
                        | ((n3 > 0) as usize) << 3;
                    out[mask] += a * a;
                }
            }
        }
        OccupationPatterns(out)
    }
}

/// Output-mode weights of one photon entering from Alice's side.
fn alice_weights(pol: Polarization) -> [f64; OUTPUT_MODES] {
    let h = pol.h * FRAC_1_SQRT_2;
    let v = pol.v * FRAC_1_SQRT_2;
    [h, v, h, v]
}

/// Output-mode weights of one photon entering from Bob's side.
fn bob_weights(pol: Polarization) -> [f64; OUTPUT_MODES] {
    let h = pol.h * FRAC_1_SQRT_2;
    let v = pol.v * FRAC_1_SQRT_2;
    [h, v, -h, -v]
}

/// Occupation patterns for every `(k, l)` with `k, l <= cutoff`, indexed
/// `[k * (cutoff + 1) + l]`. Polarizations are those arriving at the
/// beam splitter, misalignment already applied.
pub fn occupation_table(
    pol_a: Polarization,
    pol_b: Polarization,
    cutoff: usize,
) -> Vec<OccupationPatterns> {
    let side = cutoff + 1;
    let wa = alice_weights(pol_a);
    let wb = bob_weights(pol_b);
    let mut table = Vec::with_capacity(side * side);
    let mut alice = FockState::vacuum(2 * cutoff + 1);
    for k in 0..=cutoff {
        if k > 0 {
            alice = alice.create(&wa, k as f64);
        }
        let mut state = alice.clone();
        table.push(state.patterns());
        for l in 1..=cutoff {
            state = state.create(&wb, l as f64);
            table.push(state.patterns());
        }
    }
    table
}

/// Occupation patterns for `k` photons from Alice and `l` from Bob.
pub fn occupation_patterns(
    k: usize,
    pol_a: Polarization,
    l: usize,
    pol_b: Polarization,
) -> OccupationPatterns {
    let mut state = FockState::vacuum(k + l + 1);
    let wa = alice_weights(pol_a);
    let wb = bob_weights(pol_b);
    for i in 1..=k {
        state = state.create(&wa, i as f64);
    }
    for j in 1..=l {
        state = state.create(&wb, j as f64);
    }
    state.patterns()
}

/// Announcement probabilities for `k` photons polarized at `pol_a` from
/// Alice and `l` photons prepared at `pol_b` by Bob. Bob's polarization is
/// rotated by the misalignment angle before the beam splitter.
pub fn bsm_outcome_distribution(
    k: usize,
    pol_a: f64,
    l: usize,
    pol_b: f64,
    det: &DetectorParams,
) -> Announcement {
    let alice = Polarization::from_angle(pol_a);
    let bob = Polarization::from_angle(pol_b).rotated(det.misalignment_angle());
    occupation_patterns(k, alice, l, bob).announce(det.dark_count)
}

/// Loss-independent relay response per basis: success and wrong-bit
/// probabilities for `(k, l)` photons arriving at the relay, averaged
/// uniformly over the four bit preparations.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayResponse {
    cutoff: usize,
    detector: DetectorParams,
    /// `[basis][k * side + l]`
    success: [Vec<f64>; 2],
    wrong: [Vec<f64>; 2],
}

impl RelayResponse {
    pub fn new(detector: DetectorParams, cutoff: usize) -> Self {
        use rayon::prelude::*;

        let side = cutoff + 1;
        let rotation = detector.misalignment_angle();
        let per_prep: Vec<(Basis, u8, u8, Vec<Announcement>)> = Basis::ALL
            .iter()
            .flat_map(|&basis| {
                PolarizationPrep::pairs(basis)
                    .into_iter()
                    .map(move |p| (basis, p))
            })
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|(basis, (a, b))| {
                let table =
                    occupation_table(a.components(), b.components().rotated(rotation), cutoff);
                let announcements = table
                    .iter()
                    .map(|patterns| patterns.announce(detector.dark_count))
                    .collect();
                (basis, a.bit, b.bit, announcements)
            })
            .collect();

        let mut success = [vec![0.0; side * side], vec![0.0; side * side]];
        let mut wrong = [vec![0.0; side * side], vec![0.0; side * side]];
        for (basis, bit_a, bit_b, announcements) in &per_prep {
            let b = basis.index();
            for (i, ann) in announcements.iter().enumerate() {
                success[b][i] += 0.25 * ann.success();
                wrong[b][i] += 0.25 * ann.wrong_bit(*basis, *bit_a, *bit_b);
            }
        }
        Self {
            cutoff,
            detector,
            success,
            wrong,
        }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn detector(&self) -> &DetectorParams {
        &self.detector
    }

    /// Mean success probability for `(k, l)` photons at the relay.
    pub fn success(&self, basis: Basis, k: usize, l: usize) -> f64 {
        self.success[basis.index()][k * (self.cutoff + 1) + l]
    }

    /// Mean wrong-bit probability for `(k, l)` photons at the relay.
    pub fn wrong(&self, basis: Basis, k: usize, l: usize) -> f64 {
        self.wrong[basis.index()][k * (self.cutoff + 1) + l]
    }

    pub(crate) fn success_row_major(&self, basis: Basis) -> &[f64] {
        &self.success[basis.index()]
    }

    pub(crate) fn wrong_row_major(&self, basis: Basis) -> &[f64] {
        &self.wrong[basis.index()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn ideal() -> DetectorParams {
        DetectorParams::new(0.0, 0.0).unwrap()
    }

    #[test]
    fn vacuum_pair_only_dark_counts() {
        let pd: f64 = 3e-6;
        let det = DetectorParams::new(pd, 0.015).unwrap();
        let ann = bsm_outcome_distribution(0, 0.0, 0, 0.0, &det);
        let expected = 4.0 * pd * pd * (1.0 - pd) * (1.0 - pd);
        assert!((ann.success() - expected).abs() <= 1e-15 * expected);
        assert!((ann.psi_minus - ann.psi_plus).abs() < 1e-24);
    }

    #[test]
    fn identical_photons_bunch() {
        let ann = bsm_outcome_distribution(1, 0.0, 1, 0.0, &ideal());
        assert!(ann.psi_minus.abs() < 1e-15);
        assert!(ann.success().abs() < 1e-15);
    }

    #[test]
    fn orthogonal_photons_always_announce() {
        // |HV> is an equal superposition of psi+ and psi-, both detectable.
        let ann = bsm_outcome_distribution(1, 0.0, 1, FRAC_PI_2, &ideal());
        assert!((ann.psi_minus - 0.5).abs() < 1e-14);
        assert!((ann.psi_plus - 0.5).abs() < 1e-14);
    }

    #[test]
    fn diagonal_pairs_split_between_bell_states() {
        // |+->: half psi-, half undetectable phi-. |++>: half psi+.
        let ann = bsm_outcome_distribution(1, FRAC_PI_4, 1, -FRAC_PI_4, &ideal());
        assert!((ann.psi_minus - 0.5).abs() < 1e-14);
        assert!(ann.psi_plus.abs() < 1e-14);
        let ann = bsm_outcome_distribution(1, FRAC_PI_4, 1, FRAC_PI_4, &ideal());
        assert!((ann.psi_plus - 0.5).abs() < 1e-14);
        assert!(ann.psi_minus.abs() < 1e-14);
    }

    #[test]
    fn misalignment_flips_z_pairs_at_rate_ed() {
        // Same-bit Z pairs only succeed through Bob's rotation: P = sin^2 = e_d.
        let det = DetectorParams::new(0.0, 0.015).unwrap();
        let ann = bsm_outcome_distribution(1, 0.0, 1, 0.0, &det);
        assert!((ann.success() - 0.015).abs() < 1e-14);
        let relay = RelayResponse::new(det, 1);
        let e11 = relay.wrong(Basis::Z, 1, 1) / relay.success(Basis::Z, 1, 1);
        assert!((e11 - 0.015).abs() < 1e-14);
    }

    #[test]
    fn single_photon_pair_yield_is_half_in_both_bases() {
        let relay = RelayResponse::new(ideal(), 2);
        assert!((relay.success(Basis::Z, 1, 1) - 0.5).abs() < 1e-14);
        assert!((relay.success(Basis::X, 1, 1) - 0.5).abs() < 1e-14);
        assert!(relay.wrong(Basis::Z, 1, 1).abs() < 1e-15);
        assert!(relay.wrong(Basis::X, 1, 1).abs() < 1e-15);
    }

    #[test]
    fn patterns_normalized() {
        for k in 0..6 {
            for l in 0..6 {
                let p = occupation_patterns(
                    k,
                    Polarization::from_angle(0.3),
                    l,
                    Polarization::from_angle(1.1),
                );
                assert!((p.total() - 1.0).abs() < 1e-12, "k={k} l={l}");
            }
        }
    }

    #[test]
    fn table_matches_direct_expansion() {
        let (a, b) = (Polarization::from_angle(0.2), Polarization::from_angle(0.9));
        let table = occupation_table(a, b, 4);
        for k in 0..=4 {
            for l in 0..=4 {
                let direct = occupation_patterns(k, a, l, b);
                for (a, b) in table[k * 5 + l].0.iter().zip(direct.0.iter()) {
                    assert!((a - b).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn announcements_sum_to_one() {
        let det = DetectorParams::new(1e-3, 0.05).unwrap();
        for k in 0..5 {
            for l in 0..5 {
                let ann = bsm_outcome_distribution(k, FRAC_PI_4, l, -FRAC_PI_4, &det);
                assert!((ann.total() - 1.0).abs() < 1e-12);
            }
        }
    }
}
