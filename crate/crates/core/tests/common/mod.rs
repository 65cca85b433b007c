//! Reference computations shared by the integration tests. Each one takes a
//! different route from the library so agreement is meaningful.

#![allow(dead_code)]

use std::collections::HashMap;

use mdi_decoy::optics::{bsm_outcome_distribution, DetectorParams, PolarizationPrep};
use mdi_decoy::source::Basis;

/// Output modes in the order `[cH, cV, dH, dV]`.
const MODES: usize = 4;

/// Announcement probabilities `(psi_minus, psi_plus, fail)`.
pub type Outcome = (f64, f64, f64);

/// Output-mode amplitudes of one photon from Alice (`c + d`) or Bob (`c - d`)
/// with linear polarization `(h, v)`.
fn output_amplitudes(h: f64, v: f64, from_alice: bool) -> [f64; MODES] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let sign = if from_alice { 1.0 } else { -1.0 };
    [r * h, r * v, sign * r * h, sign * r * v]
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Occupation-number amplitudes by expanding every photon's creation
/// operator over the four output modes, one term per sequence of choices.
pub fn exhaustive_occupations(
    k: usize,
    alice: (f64, f64),
    l: usize,
    bob: (f64, f64),
) -> HashMap<[usize; MODES], f64> {
    let a = output_amplitudes(alice.0, alice.1, true);
    let b = output_amplitudes(bob.0, bob.1, false);
    let photons: Vec<[f64; MODES]> = std::iter::repeat_n(a, k)
        .chain(std::iter::repeat_n(b, l))
        .collect();
    let total = photons.len();
    // Coefficient of the monomial prod_j (c_j^dagger)^{n_j}.
    let mut coefficients: HashMap<[usize; MODES], f64> = HashMap::new();
    for choice in 0..MODES.pow(total as u32) {
        let mut occupation = [0usize; MODES];
        let mut weight = 1.0;
        let mut rest = choice;
        for photon in &photons {
            let mode = rest % MODES;
            rest /= MODES;
            occupation[mode] += 1;
            weight *= photon[mode];
        }
        *coefficients.entry(occupation).or_insert(0.0) += weight;
    }
    // (c^dagger)^n |0> = sqrt(n!) |n>, and the input state carries 1/sqrt(k! l!).
    let norm = (factorial(k) * factorial(l)).sqrt();
    coefficients
        .into_iter()
        .map(|(n, c)| {
            let amp = c * n.iter().map(|&x| factorial(x).sqrt()).product::<f64>() / norm;
            (n, amp)
        })
        .collect()
}

/// Threshold detection with dark counts and Bell-state classification.
pub fn exhaustive_outcome(
    k: usize,
    alice: (f64, f64),
    l: usize,
    bob: (f64, f64),
    dark_count: f64,
) -> Outcome {
    let (mut psi_minus, mut psi_plus, mut fail) = (0.0, 0.0, 0.0);
    for (n, amp) in exhaustive_occupations(k, alice, l, bob) {
        let p = amp * amp;
        if p == 0.0 {
            continue;
        }
        for clicks in 0..(1u32 << MODES) {
            let mut q = p;
            for (mode, &count) in n.iter().enumerate() {
                let fired = clicks & (1 << mode) != 0;
                q *= match (count > 0, fired) {
                    (true, true) => 1.0,
                    (true, false) => 0.0,
                    (false, true) => dark_count,
                    (false, false) => 1.0 - dark_count,
                };
            }
            let on = |m: usize| clicks & (1 << m) != 0;
            let pattern: Vec<usize> = (0..MODES).filter(|&m| on(m)).collect();
            match pattern.as_slice() {
                [0, 3] | [1, 2] => psi_minus += q,
                [0, 1] | [2, 3] => psi_plus += q,
                _ => fail += q,
            }
        }
    }
    (psi_minus, psi_plus, fail)
}

/// Polarization `(h, v)` of a preparation, with Bob's misalignment applied.
pub fn prepared(angle: f64, rotation: f64) -> (f64, f64) {
    let t = angle + rotation;
    (t.cos(), t.sin())
}

pub fn poisson_pmf(mu: f64, k: usize) -> f64 {
    if mu == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (-mu + k as f64 * mu.ln() - (1..=k).map(|i| (i as f64).ln()).sum::<f64>()).exp()
}

/// Per-basis relay success and wrong-bit probabilities for `(k, l)` photons
/// at the relay, averaged over the four preparations, up to `max_photons`.
pub struct RelayOracle {
    pub max_photons: usize,
    /// `[basis][k][l] -> (success, wrong)`
    table: Vec<Vec<Vec<(f64, f64)>>>,
}

impl RelayOracle {
    pub fn new(det: &DetectorParams, max_photons: usize) -> Self {
        let table = Basis::ALL
            .iter()
            .map(|&basis| {
                (0..=max_photons)
                    .map(|k| {
                        (0..=max_photons)
                            .map(|l| {
                                let mut success = 0.0;
                                let mut wrong = 0.0;
                                for (pa, pb) in PolarizationPrep::pairs(basis) {
                                    let o =
                                        bsm_outcome_distribution(k, pa.angle(), l, pb.angle(), det);
                                    success += (o.psi_minus + o.psi_plus) / 4.0;
                                    let equal = pa.bit == pb.bit;
                                    wrong += match (basis, equal) {
                                        (Basis::Z, true) => o.psi_minus + o.psi_plus,
                                        (Basis::Z, false) => 0.0,
                                        (Basis::X, true) => o.psi_minus,
                                        (Basis::X, false) => o.psi_plus,
                                    } / 4.0;
                                }
                                (success, wrong)
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self { max_photons, table }
    }

    /// Gain `(S, T)` for Poisson sources through symmetric arms with
    /// transmittance `xi`: a lossy Poisson source is again Poisson with
    /// intensity `mu * xi`, so no binomial fold is needed.
    pub fn gain(&self, basis: Basis, mu_a: f64, mu_b: f64, xi: f64) -> (f64, f64) {
        let table = &self.table[basis.index()];
        let mut s = 0.0;
        let mut t = 0.0;
        for (k, row) in table.iter().enumerate() {
            let pk = poisson_pmf(mu_a * xi, k);
            for (l, &(success, wrong)) in row.iter().enumerate() {
                let w = pk * poisson_pmf(mu_b * xi, l);
                s += w * success;
                t += w * wrong;
            }
        }
        (s, t)
    }
}

pub fn arm_transmittance(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0).sqrt()
}

/// Points from `lo` to `hi` with a constant ratio between neighbours.
pub fn geometric_grid(lo: f64, hi: f64, ratio: f64) -> Vec<f64> {
    let n = ((hi / lo).ln() / ratio.ln()).ceil() as usize;
    (0..=n)
        .map(|i| (lo * ratio.powi(i as i32)).min(hi))
        .collect()
}

pub fn binary_entropy(e: f64) -> f64 {
    if e <= 0.0 || e >= 1.0 {
        0.0
    } else {
        -e * e.log2() - (1.0 - e) * (1.0 - e).log2()
    }
}
