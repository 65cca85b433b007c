//! Three-intensity decoy estimation of the single-photon-pair yield and
//! phase error rate.
//!
//! Each party has a vacuum source, a decoy `x` with photon-number
//! distribution `a_k` (Alice) or `b_k` (Bob), and a signal `y` with `a'_k`
//! or `b'_k`. The bounds consume those coefficients directly, so any
//! photon-number-diagonal source satisfying the decoy ordering works.

use std::io::Read;

use crate::error::{Error, Result};
use crate::optics::GainTable;
use crate::source::{
    check_decoy_condition, Basis, Party, PhotonNumberDistribution, SourceDistributions, SourceKind,
};

/// Largest negative raw bound accepted as floating-point cancellation.
pub const CLAMP_TOLERANCE: f64 = 1e-12;

/// Decoy and signal distributions of one party in one basis.
#[derive(Debug, Clone, Copy)]
pub struct DecoyPair<'a> {
    pub decoy: &'a PhotonNumberDistribution,
    pub signal: &'a PhotonNumberDistribution,
}

impl<'a> DecoyPair<'a> {
    pub fn new(decoy: &'a PhotonNumberDistribution, signal: &'a PhotonNumberDistribution) -> Self {
        Self { decoy, signal }
    }

    /// Both parties' pairs for `basis`, if the basis carries a signal.
    pub fn from_distributions(
        dists: &'a SourceDistributions,
        basis: Basis,
    ) -> Option<(Self, Self)> {
        let pair = |party| {
            let b = dists.basis(party, basis);
            b.signal
                .as_ref()
                .map(|signal| DecoyPair::new(&b.decoy, signal))
        };
        Some((pair(Party::Alice)?, pair(Party::Bob)?))
    }
}

/// Vacuum-subtracted gains of one basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TildeQuantities {
    pub s_xx: f64,
    pub s_xy: f64,
    pub s_yx: f64,
    pub s_yy: f64,
    pub t_xx: f64,
}

fn subtract_vacuum(
    gains: &GainTable,
    basis: Basis,
    field: Field,
    alpha: SourceKind,
    beta: SourceKind,
    a0: f64,
    b0: f64,
) -> Result<f64> {
    use SourceKind::Vacuum;
    let get = |a, b| match field {
        Field::S => gains.s(basis, a, b),
        Field::T => gains.t(basis, a, b),
    };
    Ok(
        get(alpha, beta)? - a0 * get(Vacuum, beta)? - b0 * get(alpha, Vacuum)?
            + a0 * b0 * get(Vacuum, Vacuum)?,
    )
}

#[derive(Clone, Copy)]
enum Field {
    S,
    T,
}

/// Vacuum-subtracted decoy-pair wrong-bit probability. Needs only the
/// vacuum and decoy sources of the basis.
pub fn tilde_t_xx(
    gains: &GainTable,
    basis: Basis,
    alice_decoy: &PhotonNumberDistribution,
    bob_decoy: &PhotonNumberDistribution,
) -> Result<f64> {
    subtract_vacuum(
        gains,
        basis,
        Field::T,
        SourceKind::Decoy,
        SourceKind::Decoy,
        alice_decoy.prob(0),
        bob_decoy.prob(0),
    )
}

pub fn tilde_quantities(
    gains: &GainTable,
    basis: Basis,
    alice: DecoyPair<'_>,
    bob: DecoyPair<'_>,
) -> Result<TildeQuantities> {
    use SourceKind::{Decoy, Signal};
    let (a0, a0p) = (alice.decoy.prob(0), alice.signal.prob(0));
    let (b0, b0p) = (bob.decoy.prob(0), bob.signal.prob(0));
    Ok(TildeQuantities {
        s_xx: subtract_vacuum(gains, basis, Field::S, Decoy, Decoy, a0, b0)?,
        s_xy: subtract_vacuum(gains, basis, Field::S, Decoy, Signal, a0, b0p)?,
        s_yx: subtract_vacuum(gains, basis, Field::S, Signal, Decoy, a0p, b0)?,
        s_yy: subtract_vacuum(gains, basis, Field::S, Signal, Signal, a0p, b0p)?,
        t_xx: tilde_t_xx(gains, basis, alice.decoy, bob.decoy)?,
    })
}

fn require_decoy_condition(party: Party, pair: DecoyPair<'_>) -> Result<()> {
    let check = check_decoy_condition(pair.decoy, pair.signal)?;
    match check.first_violation {
        Some(k) => Err(Error::DecoyCondition { party, k }),
        None => Ok(()),
    }
}

/// Single-photon-pair yield lower bound before clamping at zero.
pub fn s11_lower_bound_raw(
    tq: &TildeQuantities,
    alice: DecoyPair<'_>,
    bob: DecoyPair<'_>,
) -> Result<f64> {
    require_decoy_condition(Party::Alice, alice)?;
    require_decoy_condition(Party::Bob, bob)?;

    let (a1, a2) = (alice.decoy.prob(1), alice.decoy.prob(2));
    let (a1p, a2p) = (alice.signal.prob(1), alice.signal.prob(2));
    let (b1, b2) = (bob.decoy.prob(1), bob.decoy.prob(2));
    let (b1p, b2p) = (bob.signal.prob(1), bob.signal.prob(2));

    let alice_gap = a1 * a2p - a1p * a2;
    let bob_gap = b1 * b2p - b1p * b2;
    let denominator = a1 * b1 * alice_gap * bob_gap;
    if denominator.is_nan() || denominator <= 0.0 {
        return Err(Error::DegenerateDecoy { denominator });
    }
    let numerator = (a1 * a2p * b1 * b2p - a1p * a2 * b1p * b2) * tq.s_xx
        - b1 * b2 * alice_gap * tq.s_xy
        - a1 * a2 * bob_gap * tq.s_yx;
    Ok(numerator / denominator)
}

/// Single-photon-pair yield lower bound, clamped to be non-negative.
pub fn s11_lower_bound(
    tq: &TildeQuantities,
    alice: DecoyPair<'_>,
    bob: DecoyPair<'_>,
) -> Result<f64> {
    s11_lower_bound_raw(tq, alice, bob).map(|v| v.max(0.0))
}

/// Upper bound on the single-photon-pair error rate, capped at 1.
///
/// Pass the yield bound from the same basis for the plain estimate, or the
/// larger bound from the other basis for the tighter cross-basis estimate.
pub fn e11_upper_bound(t_tilde_xx: f64, a1: f64, b1: f64, s11_lower: f64) -> Result<f64> {
    if !(a1 > 0.0 && b1 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "single-photon probabilities must be positive, got a1={a1} b1={b1}"
        )));
    }
    if s11_lower.is_nan() || s11_lower <= 0.0 {
        return Err(Error::UndefinedBound);
    }
    Ok((t_tilde_xx / (a1 * b1 * s11_lower)).clamp(0.0, 1.0))
}

/// Yield and error bounds from one gain table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundEstimates {
    pub s11_lower_z: f64,
    /// Absent when the X basis carries only the decoy intensity.
    pub s11_lower_x: Option<f64>,
    /// Plain X-basis estimate; absent without X-basis yield bound or when it is zero.
    pub e11_upper_x: Option<f64>,
    /// Cross-basis estimate using the Z-basis yield bound.
    pub e11_upper_x_via_z: Option<f64>,
    /// Basis whose yield bound is larger.
    pub basis_used: Basis,
}

impl BoundEstimates {
    /// Largest available yield lower bound.
    pub fn best_s11_lower(&self) -> f64 {
        self.s11_lower_x
            .map_or(self.s11_lower_z, |x| x.max(self.s11_lower_z))
    }

    /// Whether the Z-basis bound is at least the X-basis one.
    pub fn z_dominates(&self) -> Option<bool> {
        self.s11_lower_x.map(|x| self.s11_lower_z >= x)
    }
}

/// Z-basis and (when available) X-basis decoy estimates.
pub fn estimate_bounds(gains: &GainTable, dists: &SourceDistributions) -> Result<BoundEstimates> {
    let (za, zb) = DecoyPair::from_distributions(dists, Basis::Z)
        .ok_or_else(|| Error::IncompleteData("Z-basis signal source".into()))?;
    let tq_z = tilde_quantities(gains, Basis::Z, za, zb)?;
    let s11_lower_z = s11_lower_bound(&tq_z, za, zb)?;

    let x_alice = &dists.basis(Party::Alice, Basis::X).decoy;
    let x_bob = &dists.basis(Party::Bob, Basis::X).decoy;
    let t_xx = tilde_t_xx(gains, Basis::X, x_alice, x_bob)?;
    let (a1, b1) = (x_alice.prob(1), x_bob.prob(1));

    let s11_lower_x = match DecoyPair::from_distributions(dists, Basis::X) {
        Some((xa, xb)) => {
            let tq_x = tilde_quantities(gains, Basis::X, xa, xb)?;
            Some(s11_lower_bound(&tq_x, xa, xb)?)
        }
        None => None,
    };

    let optional_bound = |s11: f64| match e11_upper_bound(t_xx, a1, b1, s11) {
        Ok(e) => Ok(Some(e)),
        Err(Error::UndefinedBound) => Ok(None),
        Err(e) => Err(e),
    };
    let e11_upper_x = match s11_lower_x {
        Some(s) => optional_bound(s)?,
        None => None,
    };
    let e11_upper_x_via_z = optional_bound(s11_lower_z)?;
    let basis_used = match s11_lower_x {
        Some(x) if x > s11_lower_z => Basis::X,
        _ => Basis::Z,
    };

    Ok(BoundEstimates {
        s11_lower_z,
        s11_lower_x,
        e11_upper_x,
        e11_upper_x_via_z,
        basis_used,
    })
}

/// Reads measured gains from CSV with header columns `basis, alpha, beta,
/// S, T` (any order; extra columns ignored). `alpha`/`beta` are `o`, `x` or `y`.
pub fn read_gain_table<R: Read>(reader: R) -> Result<GainTable> {
    let mut csv = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("missing column `{name}`"),
            })
    };
    let (ci_basis, ci_alpha, ci_beta, ci_s, ci_t) = (
        column("basis")?,
        column("alpha")?,
        column("beta")?,
        column("S")?,
        column("T")?,
    );

    let mut table = GainTable::new();
    for record in csv.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let parse_err = |message: String| Error::Parse { line, message };
        let field = |i: usize| record.get(i).unwrap_or("");
        let basis: Basis = field(ci_basis)
            .parse()
            .map_err(|e: Error| parse_err(e.to_string()))?;
        let alpha: SourceKind = field(ci_alpha)
            .parse()
            .map_err(|e: Error| parse_err(e.to_string()))?;
        let beta: SourceKind = field(ci_beta)
            .parse()
            .map_err(|e: Error| parse_err(e.to_string()))?;
        let number = |i: usize, name: &str| {
            field(i)
                .parse::<f64>()
                .map_err(|e| parse_err(format!("column {name}: {e}")))
        };
        let s = number(ci_s, "S")?;
        let t = number(ci_t, "T")?;
        if table.entry(basis, alpha, beta).is_some() {
            return Err(parse_err(format!("duplicate entry {basis} {alpha}{beta}")));
        }
        table
            .insert(basis, alpha, beta, s, t)
            .map_err(|e| parse_err(e.to_string()))?;
    }
    Ok(table)
}
