use crate::error::{Error, Result};
use crate::source::PhotonNumberDistribution;

/// Symmetric two-arm channel with the relay in the middle.
///
/// `total_loss_db` covers both arms and the detector efficiency, so each arm
/// sees transmittance `sqrt(10^(-loss/10))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    total_loss_db: f64,
}

impl ChannelParams {
    pub fn new(total_loss_db: f64) -> Result<Self> {
        if !total_loss_db.is_finite() || total_loss_db < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "total loss must be finite and non-negative, got {total_loss_db} dB"
            )));
        }
        Ok(Self { total_loss_db })
    }

    pub fn total_loss_db(&self) -> f64 {
        self.total_loss_db
    }

    /// Overall transmittance of both arms including detection efficiency.
    pub fn total_transmittance(&self) -> f64 {
        10f64.powf(-self.total_loss_db / 10.0)
    }

    /// Per-arm effective transmittance.
    pub fn arm_transmittance(&self) -> f64 {
        self.total_transmittance().sqrt()
    }
}

/// Relay detector imperfections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams {
    /// Dark count probability per detector per window.
    pub dark_count: f64,
    /// Misalignment error probability, realized as a rotation of Bob's
    /// polarization by `asin(sqrt(e_d))`.
    pub misalignment: f64,
    /// Error rate of background counts. Always 0.5; the relay model
    /// reproduces it from symmetry and it is kept only for cross-checks.
    pub background_error: f64,
}

impl DetectorParams {
    pub const BACKGROUND_ERROR: f64 = 0.5;

    pub fn new(dark_count: f64, misalignment: f64) -> Result<Self> {
        let params = Self {
            dark_count,
            misalignment,
            background_error: Self::BACKGROUND_ERROR,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1e-2).contains(&self.dark_count) {
            return Err(Error::InvalidArgument(format!(
                "dark count rate must lie in [0, 1e-2], got {}",
                self.dark_count
            )));
        }
        if !(0.0..=0.5).contains(&self.misalignment) {
            return Err(Error::InvalidArgument(format!(
                "misalignment must lie in [0, 0.5], got {}",
                self.misalignment
            )));
        }
        if self.background_error != Self::BACKGROUND_ERROR {
            return Err(Error::InvalidArgument(format!(
                "background error rate must be 0.5, got {}",
                self.background_error
            )));
        }
        Ok(())
    }

    /// Rotation angle applied to Bob's polarization.
    pub fn misalignment_angle(&self) -> f64 {
        self.misalignment.sqrt().asin()
    }
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            dark_count: 3.0e-6,
            misalignment: 0.015,
            background_error: Self::BACKGROUND_ERROR,
        }
    }
}

/// `P(k survivors | n photons)` for `k = 0..=n`.
pub(crate) fn binomial_row(n: usize, xi: f64) -> Vec<f64> {
    let mut row = Vec::with_capacity(n + 1);
    let mut choose = 1.0f64;
    for k in 0..=n {
        if k > 0 {
            choose = choose * (n - k + 1) as f64 / k as f64;
        }
        row.push(choose * xi.powi(k as i32) * (1.0 - xi).powi((n - k) as i32));
    }
    row
}

/// Passes a photon-number distribution through a pure-loss channel.
pub fn apply_loss(dist: &PhotonNumberDistribution, xi: f64) -> Result<PhotonNumberDistribution> {
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::InvalidArgument(format!(
            "transmittance must lie in [0, 1], got {xi}"
        )));
    }
    let mut out = vec![0.0; dist.cutoff() + 1];
    for (n, &p) in dist.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (k, b) in binomial_row(n, xi).into_iter().enumerate() {
            out[k] += p * b;
        }
    }
    Ok(dist.with_probs(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn arm_transmittance_from_loss() {
        let c = ChannelParams::new(20.0).unwrap();
        assert!((c.total_transmittance() - 0.01).abs() < 1e-15);
        assert!((c.arm_transmittance() - 0.1).abs() < 1e-15);
        assert_eq!(ChannelParams::new(0.0).unwrap().arm_transmittance(), 1.0);
        assert!(ChannelParams::new(-1.0).is_err());
    }

    #[test]
    fn detector_defaults_and_ranges() {
        let d = DetectorParams::default();
        assert_eq!(d.dark_count, 3e-6);
        assert_eq!(d.misalignment, 0.015);
        assert!(d.validate().is_ok());
        assert!(DetectorParams::new(0.1, 0.0).is_err());
        assert!(DetectorParams::new(0.0, 0.6).is_err());
        let angle = DetectorParams::new(0.0, 0.25).unwrap().misalignment_angle();
        assert!((angle - std::f64::consts::FRAC_PI_6).abs() < 1e-15);
    }

    #[test]
    fn loss_identity_and_total() {
        let d = PhotonNumberDistribution::poisson(0.4, 1e-12).unwrap();
        let same = apply_loss(&d, 1.0).unwrap();
        assert_eq!(same.probs(), d.probs());
        let lost = apply_loss(&d, 0.0).unwrap();
        assert!((lost.probs()[0] - d.total_mass()).abs() < 1e-15);
        assert!(lost.probs()[1..].iter().all(|&p| p == 0.0));
    }

    #[test]
    fn loss_on_two_photons() {
        let d = PhotonNumberDistribution::from_probs(vec![0.0, 0.0, 1.0]).unwrap();
        let out = apply_loss(&d, 0.5).unwrap();
        assert_eq!(out.probs(), &[0.25, 0.5, 0.25]);
        assert!(apply_loss(&d, 1.5).is_err());
    }

    proptest! {
        #[test]
        fn loss_preserves_mass(mu in 0.0f64..2.0, xi in 0.0f64..=1.0) {
            let d = PhotonNumberDistribution::poisson(mu, 1e-12).unwrap();
            let out = apply_loss(&d, xi).unwrap();
            prop_assert!((out.total_mass() - d.total_mass()).abs() < 1e-14);
        }

        #[test]
        fn loss_keeps_poisson_shape(mu in 0.0f64..2.0, xi in 0.0f64..=1.0) {
            let d = PhotonNumberDistribution::poisson_truncated(mu, 40).unwrap();
            let out = apply_loss(&d, xi).unwrap();
            let expected = PhotonNumberDistribution::poisson_truncated(mu * xi, 40).unwrap();
            for k in 0..=10 {
                prop_assert!((out.prob(k) - expected.prob(k)).abs() < 1e-13);
            }
        }
    }
}
