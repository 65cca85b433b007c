//! Photon-number-diagonal source states and the decoy ordering condition.

use std::fmt;

use crate::error::{Error, Result};

/// Default truncation: removed Poisson tail mass stays below this.
pub const DEFAULT_TAIL_EPSILON: f64 = 1e-12;

/// Tolerance on total probability mass of an explicit distribution.
const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Party {
    Alice,
    Bob,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::Alice => f.write_str("A"),
            Party::Bob => f.write_str("B"),
        }
    }
}

/// Polarization encoding basis: Z is horizontal/vertical, X is +45/-45 degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    pub const ALL: [Basis; 2] = [Basis::Z, Basis::X];

    pub fn index(self) -> usize {
        match self {
            Basis::Z => 0,
            Basis::X => 1,
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::Z => f.write_str("Z"),
            Basis::X => f.write_str("X"),
        }
    }
}

impl std::str::FromStr for Basis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "Z" | "z" => Ok(Basis::Z),
            "X" | "x" => Ok(Basis::X),
            other => Err(Error::InvalidArgument(format!("unknown basis `{other}`"))),
        }
    }
}

/// The three sources each party holds: vacuum `o`, decoy `x` and signal `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SourceKind {
    Vacuum,
    Decoy,
    Signal,
}

impl SourceKind {
    pub const ALL: [SourceKind; 3] = [SourceKind::Vacuum, SourceKind::Decoy, SourceKind::Signal];

    pub fn index(self) -> usize {
        match self {
            SourceKind::Vacuum => 0,
            SourceKind::Decoy => 1,
            SourceKind::Signal => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SourceKind::Vacuum => "o",
            SourceKind::Decoy => "x",
            SourceKind::Signal => "y",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for SourceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "o" | "0" => Ok(SourceKind::Vacuum),
            "x" => Ok(SourceKind::Decoy),
            "y" => Ok(SourceKind::Signal),
            other => Err(Error::InvalidArgument(format!("unknown source `{other}`"))),
        }
    }
}

/// Truncated photon-number distribution of a phase-randomized source.
///
/// `probs[k]` is the probability of emitting exactly `k` photons, for
/// `k = 0..=cutoff`. Truncation only ever removes mass.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonNumberDistribution {
    probs: Vec<f64>,
    intensity: Option<f64>,
}

impl PhotonNumberDistribution {
    /// Zero-photon point mass.
    pub fn vacuum() -> Self {
        Self {
            probs: vec![1.0],
            intensity: Some(0.0),
        }
    }

    /// Poisson distribution with mean `mu`, truncated at the smallest cutoff
    /// whose removed tail mass is below `tail_epsilon`.
    pub fn poisson(mu: f64, tail_epsilon: f64) -> Result<Self> {
        check_intensity(mu)?;
        if !(tail_epsilon > 0.0 && tail_epsilon < 1e-6) {
            return Err(Error::InvalidArgument(format!(
                "tail epsilon must lie in (0, 1e-6), got {tail_epsilon}"
            )));
        }
        if mu == 0.0 {
            return Ok(Self::vacuum());
        }

        // Generate terms well past the point where the remaining tail is
        // negligible, then pick the cutoff from exact suffix sums.
        let mut terms = vec![(-mu).exp()];
        loop {
            let k = terms.len();
            let next = terms[k - 1] * mu / k as f64;
            terms.push(next);
            // For k > 2 mu the tail after `next` is bounded by 2 * next.
            if k as f64 > 2.0 * mu && next < tail_epsilon * 1e-6 {
                break;
            }
        }
        let mut suffix = vec![0.0; terms.len() + 1];
        for k in (0..terms.len()).rev() {
            suffix[k] = suffix[k + 1] + terms[k];
        }
        let cutoff = (0..terms.len())
            .find(|&k| suffix[k + 1] < tail_epsilon)
            .expect("tail sums decrease to zero");
        terms.truncate(cutoff + 1);
        Ok(Self {
            probs: terms,
            intensity: Some(mu),
        })
    }

    /// Poisson distribution with mean `mu` truncated at an explicit cutoff.
    pub fn poisson_truncated(mu: f64, cutoff: usize) -> Result<Self> {
        check_intensity(mu)?;
        let mut probs = Vec::with_capacity(cutoff + 1);
        probs.push((-mu).exp());
        for k in 1..=cutoff {
            probs.push(probs[k - 1] * mu / k as f64);
        }
        Ok(Self {
            probs,
            intensity: Some(mu),
        })
    }

    /// Explicit probability vector, e.g. for non-Poissonian sources.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidArgument("empty probability vector".into()));
        }
        if let Some((k, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(Error::InvalidArgument(format!(
                "probability for {k} photons out of range: {p}"
            )));
        }
        let total: f64 = probs.iter().sum();
        if total > 1.0 + MASS_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "probabilities sum to {total} > 1"
            )));
        }
        Ok(Self {
            probs,
            intensity: None,
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn cutoff(&self) -> usize {
        self.probs.len() - 1
    }

    /// Mean photon number the distribution was built from, if any.
    pub fn intensity(&self) -> Option<f64> {
        self.intensity
    }

    /// Probability of `k` photons; zero beyond the cutoff.
    pub fn prob(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Zero-padded copy with the given cutoff. Never truncates.
    pub fn padded(&self, cutoff: usize) -> Self {
        let mut probs = self.probs.clone();
        if probs.len() < cutoff + 1 {
            probs.resize(cutoff + 1, 0.0);
        }
        Self {
            probs,
            intensity: self.intensity,
        }
    }

    pub(crate) fn with_probs(&self, probs: Vec<f64>) -> Self {
        Self {
            probs,
            intensity: None,
        }
    }
}

fn check_intensity(mu: f64) -> Result<()> {
    if !mu.is_finite() || mu < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "intensity must be finite and non-negative, got {mu}"
        )));
    }
    Ok(())
}

/// Outcome of [`check_decoy_condition`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoyCheck {
    pub holds: bool,
    /// Smallest photon number at which the ordering fails. `Some(2)` also
    /// covers a failure of the middle inequality `a'_2/a_2 >= a'_1/a_1`.
    pub first_violation: Option<usize>,
}

/// Checks `y_k/x_k >= y_2/x_2 >= y_1/x_1` for every `k >= 2` up to the joint cutoff.
///
/// A ratio with a zero denominator counts as `+inf` and so satisfies the
/// lower-bound side of the ordering.
pub fn check_decoy_condition(
    x: &PhotonNumberDistribution,
    y: &PhotonNumberDistribution,
) -> Result<DecoyCheck> {
    if x.prob(1) == 0.0 {
        return Err(Error::DegenerateSource { photons: 1 });
    }
    if y.prob(1) == 0.0 {
        return Err(Error::DegenerateSource { photons: 1 });
    }
    if x.prob(2) == 0.0 && y.prob(2) == 0.0 {
        return Err(Error::DegenerateSource { photons: 2 });
    }

    let ratio = |k: usize| {
        let denominator = x.prob(k);
        if denominator == 0.0 {
            f64::INFINITY
        } else {
            y.prob(k) / denominator
        }
    };
    let ratio_one = ratio(1);
    let ratio_two = ratio(2);
    if ratio_two < ratio_one {
        return Ok(DecoyCheck {
            holds: false,
            first_violation: Some(2),
        });
    }

    let cutoff = x.cutoff().max(y.cutoff());
    let first_violation = (3..=cutoff).find(|&k| ratio(k) < ratio_two);
    Ok(DecoyCheck {
        holds: first_violation.is_none(),
        first_violation,
    })
}

/// Intensities one party uses in one basis. Vacuum is implicit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisIntensities {
    pub decoy: f64,
    /// Absent when the basis only carries the weak decoy (one-basis protocol).
    pub signal: Option<f64>,
}

impl BasisIntensities {
    pub fn new(decoy: f64, signal: Option<f64>) -> Self {
        Self { decoy, signal }
    }

    pub fn intensity(&self, kind: SourceKind) -> Option<f64> {
        match kind {
            SourceKind::Vacuum => Some(0.0),
            SourceKind::Decoy => Some(self.decoy),
            SourceKind::Signal => self.signal,
        }
    }

    fn validate(&self, party: Party, basis: Basis) -> Result<()> {
        let label = format!("party {party}, basis {basis}");
        if !(self.decoy.is_finite() && self.decoy > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "{label}: decoy intensity must be positive, got {}",
                self.decoy
            )));
        }
        if let Some(signal) = self.signal {
            if !(signal.is_finite() && signal > self.decoy) {
                return Err(Error::InvalidArgument(format!(
                    "{label}: signal intensity {signal} must exceed decoy intensity {}",
                    self.decoy
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartySources {
    pub z: BasisIntensities,
    pub x: BasisIntensities,
}

impl PartySources {
    pub fn basis(&self, basis: Basis) -> &BasisIntensities {
        match basis {
            Basis::Z => &self.z,
            Basis::X => &self.x,
        }
    }
}

/// All source intensities of both parties in both bases.
///
/// The Z basis always carries decoy and signal; the X basis may carry only
/// the decoy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceSet {
    pub alice: PartySources,
    pub bob: PartySources,
}

impl SourceSet {
    pub fn new(alice: PartySources, bob: PartySources) -> Result<Self> {
        let set = Self { alice, bob };
        set.validate()?;
        Ok(set)
    }

    /// Equal intensities for both parties and both bases.
    pub fn symmetric(decoy: f64, signal: f64) -> Result<Self> {
        let basis = BasisIntensities::new(decoy, Some(signal));
        let party = PartySources { z: basis, x: basis };
        Self::new(party, party)
    }

    /// Symmetric parties with independent Z and X intensities.
    pub fn symmetric_per_basis(z: BasisIntensities, x: BasisIntensities) -> Result<Self> {
        let party = PartySources { z, x };
        Self::new(party, party)
    }

    pub fn party(&self, party: Party) -> &PartySources {
        match party {
            Party::Alice => &self.alice,
            Party::Bob => &self.bob,
        }
    }

    pub fn intensity(&self, party: Party, basis: Basis, kind: SourceKind) -> Option<f64> {
        self.party(party).basis(basis).intensity(kind)
    }

    /// True when the basis defines a signal source for both parties.
    pub fn has_signal(&self, basis: Basis) -> bool {
        self.alice.basis(basis).signal.is_some() && self.bob.basis(basis).signal.is_some()
    }

    /// Largest intensity in use, which fixes the photon-number cutoff needed.
    pub fn max_intensity(&self) -> f64 {
        [Party::Alice, Party::Bob]
            .iter()
            .flat_map(|&p| Basis::ALL.iter().map(move |&b| (p, b)))
            .flat_map(|(p, b)| {
                SourceKind::ALL
                    .iter()
                    .filter_map(move |&k| self.intensity(p, b, k))
            })
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        for party in [Party::Alice, Party::Bob] {
            let sources = self.party(party);
            sources.z.validate(party, Basis::Z)?;
            sources.x.validate(party, Basis::X)?;
            if sources.z.signal.is_none() {
                return Err(Error::InvalidArgument(format!(
                    "party {party}: the Z basis needs a signal intensity"
                )));
            }
        }
        Ok(())
    }
}

/// Photon-number distributions for all sources of one party in one basis.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisDistributions {
    pub vacuum: PhotonNumberDistribution,
    pub decoy: PhotonNumberDistribution,
    pub signal: Option<PhotonNumberDistribution>,
}

impl BasisDistributions {
    pub fn poisson(intensities: &BasisIntensities, tail_epsilon: f64) -> Result<Self> {
        Ok(Self {
            vacuum: PhotonNumberDistribution::vacuum(),
            decoy: PhotonNumberDistribution::poisson(intensities.decoy, tail_epsilon)?,
            signal: intensities
                .signal
                .map(|mu| PhotonNumberDistribution::poisson(mu, tail_epsilon))
                .transpose()?,
        })
    }

    pub fn get(&self, kind: SourceKind) -> Option<&PhotonNumberDistribution> {
        match kind {
            SourceKind::Vacuum => Some(&self.vacuum),
            SourceKind::Decoy => Some(&self.decoy),
            SourceKind::Signal => self.signal.as_ref(),
        }
    }
}

/// Poisson distributions for every source in a [`SourceSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct SourceDistributions {
    /// Indexed `[party][basis]` with Alice first and Z first.
    per_party: [[BasisDistributions; 2]; 2],
}

impl SourceDistributions {
    pub fn poisson(sources: &SourceSet, tail_epsilon: f64) -> Result<Self> {
        let build = |p: &PartySources| -> Result<[BasisDistributions; 2]> {
            Ok([
                BasisDistributions::poisson(&p.z, tail_epsilon)?,
                BasisDistributions::poisson(&p.x, tail_epsilon)?,
            ])
        };
        Ok(Self {
            per_party: [build(&sources.alice)?, build(&sources.bob)?],
        })
    }

    pub fn basis(&self, party: Party, basis: Basis) -> &BasisDistributions {
        let p = match party {
            Party::Alice => 0,
            Party::Bob => 1,
        };
        &self.per_party[p][basis.index()]
    }

    pub fn get(
        &self,
        party: Party,
        basis: Basis,
        kind: SourceKind,
    ) -> Option<&PhotonNumberDistribution> {
        self.basis(party, basis).get(kind)
    }

    /// Largest cutoff over every distribution.
    pub fn max_cutoff(&self) -> usize {
        self.per_party
            .iter()
            .flatten()
            .flat_map(|b| SourceKind::ALL.iter().filter_map(move |&k| b.get(k)))
            .map(PhotonNumberDistribution::cutoff)
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn vacuum_is_point_mass() {
        let d = PhotonNumberDistribution::poisson(0.0, DEFAULT_TAIL_EPSILON).unwrap();
        assert_eq!(d.probs(), &[1.0]);
        assert_eq!(d.cutoff(), 0);
    }

    #[test]
    fn poisson_zero_photon_term() {
        let d = PhotonNumberDistribution::poisson(0.1, DEFAULT_TAIL_EPSILON).unwrap();
        assert!((d.probs()[0] - 0.904_837_418_035_959_6).abs() < 1e-15);
    }

    #[test]
    fn poisson_cutoff_is_minimal() {
        let mu: f64 = 0.15;
        let eps = 1e-12;
        let d = PhotonNumberDistribution::poisson(mu, eps).unwrap();
        // Tail from the closed form, summed term by term far past the cutoff.
        let term = |k: usize| (-mu).exp() * mu.powi(k as i32) / factorial(k);
        let tail = |after: usize| (after + 1..60).map(term).sum::<f64>();
        let cutoff = d.cutoff();
        assert!(tail(cutoff) < eps);
        assert!(tail(cutoff - 1) >= eps);
        assert_eq!(cutoff, 8);
    }

    #[test]
    fn negative_intensity_rejected() {
        assert!(matches!(
            PhotonNumberDistribution::poisson(-0.1, 1e-12),
            Err(Error::InvalidArgument(_))
        ));
        assert!(PhotonNumberDistribution::poisson(0.1, 1e-3).is_err());
    }

    #[test]
    fn decoy_condition_poisson() {
        let x = PhotonNumberDistribution::poisson(0.1, 1e-12).unwrap();
        let y = PhotonNumberDistribution::poisson(0.15, 1e-12).unwrap();
        assert!(check_decoy_condition(&x, &y).unwrap().holds);
        let swapped = check_decoy_condition(&y, &x).unwrap();
        assert!(!swapped.holds);
        assert_eq!(swapped.first_violation, Some(2));
    }

    #[test]
    fn decoy_condition_zero_denominator_counts_as_satisfied() {
        let x = PhotonNumberDistribution::from_probs(vec![0.5, 0.5]).unwrap();
        let y = PhotonNumberDistribution::from_probs(vec![0.25, 0.25, 0.5]).unwrap();
        let check = check_decoy_condition(&x, &y).unwrap();
        assert!(check.holds);
        assert_eq!(check.first_violation, None);
    }

    #[test]
    fn decoy_condition_late_violation() {
        // Ratios 1, 2, 3, then 1 at k = 3.
        let x = PhotonNumberDistribution::from_probs(vec![0.4, 0.3, 0.1, 0.2]).unwrap();
        let y = PhotonNumberDistribution::from_probs(vec![0.0, 0.3, 0.2, 0.2]).unwrap();
        let check = check_decoy_condition(&x, &y).unwrap();
        assert_eq!(check.first_violation, Some(3));
    }

    #[test]
    fn decoy_condition_degenerate() {
        let x = PhotonNumberDistribution::from_probs(vec![0.5, 0.0, 0.5]).unwrap();
        let y = PhotonNumberDistribution::poisson(0.15, 1e-12).unwrap();
        assert_eq!(
            check_decoy_condition(&x, &y),
            Err(Error::DegenerateSource { photons: 1 })
        );
    }

    #[test]
    fn explicit_distribution_validation() {
        assert!(PhotonNumberDistribution::from_probs(vec![]).is_err());
        assert!(PhotonNumberDistribution::from_probs(vec![0.7, 0.7]).is_err());
        assert!(PhotonNumberDistribution::from_probs(vec![1.2]).is_err());
    }

    #[test]
    fn source_set_validation() {
        assert!(SourceSet::symmetric(0.1, 0.15).is_ok());
        assert!(SourceSet::symmetric(0.15, 0.1).is_err());
        assert!(SourceSet::symmetric(0.0, 0.1).is_err());
        let z = BasisIntensities::new(0.1, Some(0.15));
        let x = BasisIntensities::new(0.1, None);
        let set = SourceSet::symmetric_per_basis(z, x).unwrap();
        assert!(!set.has_signal(Basis::X));
        assert_eq!(
            set.intensity(Party::Bob, Basis::X, SourceKind::Vacuum),
            Some(0.0)
        );
        assert!(SourceSet::symmetric_per_basis(x, z).is_err());
    }

    proptest! {
        #[test]
        fn poisson_normalization(mu in 0.0f64..2.0) {
            let eps = DEFAULT_TAIL_EPSILON;
            let d = PhotonNumberDistribution::poisson(mu, eps).unwrap();
            let total = d.total_mass();
            prop_assert!(total >= 1.0 - eps && total <= 1.0 + 1e-15, "total {}", total);
        }

        #[test]
        fn mass_grows_with_cutoff(mu in 0.0f64..2.0, cutoff in 0usize..30) {
            let a = PhotonNumberDistribution::poisson_truncated(mu, cutoff).unwrap();
            let b = PhotonNumberDistribution::poisson_truncated(mu, cutoff + 1).unwrap();
            prop_assert!(b.total_mass() >= a.total_mass());
        }

        #[test]
        fn poisson_ordering_satisfies_decoy_condition(mu1 in 0.001f64..1.0, gap in 0.001f64..1.0) {
            let x = PhotonNumberDistribution::poisson(mu1, 1e-12).unwrap();
            let y = PhotonNumberDistribution::poisson(mu1 + gap, 1e-12).unwrap();
            prop_assert!(check_decoy_condition(&x, &y).unwrap().holds);
        }
    }
}
