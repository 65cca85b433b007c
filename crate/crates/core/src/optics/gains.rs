use crate::error::{Error, Result};
use crate::optics::bsm::RelayResponse;
use crate::optics::channel::{ChannelParams, DetectorParams};
use crate::optics::yields::YieldTable;
use crate::source::{
    Basis, BasisDistributions, Party, PhotonNumberDistribution, SourceDistributions, SourceKind,
    SourceSet, DEFAULT_TAIL_EPSILON,
};

/// Observed gain `S` and wrong-bit probability `T` for one source pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainEntry {
    pub s: f64,
    pub t: f64,
}

impl GainEntry {
    /// Error rate `E = T / S`, zero when nothing was detected.
    pub fn error_rate(&self) -> f64 {
        if self.s > 0.0 {
            self.t / self.s
        } else {
            0.0
        }
    }
}

/// Gains for every source pair `(alpha, beta)` in each basis. Entries are
/// absent when a basis does not define one of the sources.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GainTable {
    /// `[basis][alpha][beta]`
    entries: [[[Option<GainEntry>; 3]; 3]; 2],
}

impl GainTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        basis: Basis,
        alpha: SourceKind,
        beta: SourceKind,
        s: f64,
        t: f64,
    ) -> Result<()> {
        if !(0.0..=1.0).contains(&s) || !(0.0..=s).contains(&t) {
            return Err(Error::InvalidArgument(format!(
                "gain entry {basis} {alpha}{beta}: need 0 <= T <= S <= 1, got S={s} T={t}"
            )));
        }
        self.entries[basis.index()][alpha.index()][beta.index()] = Some(GainEntry { s, t });
        Ok(())
    }

    pub fn entry(&self, basis: Basis, alpha: SourceKind, beta: SourceKind) -> Option<GainEntry> {
        self.entries[basis.index()][alpha.index()][beta.index()]
    }

    fn require(&self, basis: Basis, alpha: SourceKind, beta: SourceKind) -> Result<GainEntry> {
        self.entry(basis, alpha, beta)
            .ok_or_else(|| Error::IncompleteData(format!("{basis}-basis entry {alpha}{beta}")))
    }

    pub fn s(&self, basis: Basis, alpha: SourceKind, beta: SourceKind) -> Result<f64> {
        self.require(basis, alpha, beta).map(|e| e.s)
    }

    pub fn t(&self, basis: Basis, alpha: SourceKind, beta: SourceKind) -> Result<f64> {
        self.require(basis, alpha, beta).map(|e| e.t)
    }

    pub fn e(&self, basis: Basis, alpha: SourceKind, beta: SourceKind) -> Result<f64> {
        self.require(basis, alpha, beta).map(|e| e.error_rate())
    }

    /// Present entries in `(basis, alpha, beta)` order.
    pub fn iter(&self) -> impl Iterator<Item = (Basis, SourceKind, SourceKind, GainEntry)> + '_ {
        Basis::ALL.into_iter().flat_map(move |basis| {
            SourceKind::ALL.into_iter().flat_map(move |alpha| {
                SourceKind::ALL.into_iter().filter_map(move |beta| {
                    self.entry(basis, alpha, beta)
                        .map(|e| (basis, alpha, beta, e))
                })
            })
        })
    }
}

/// Gain of one source pair: the yield table averaged over both photon-number distributions.
pub fn pair_gain(
    table: &YieldTable,
    basis: Basis,
    a: &PhotonNumberDistribution,
    b: &PhotonNumberDistribution,
) -> GainEntry {
    let mut s = 0.0;
    let mut t = 0.0;
    for (n, &pa) in a.probs().iter().enumerate() {
        if pa == 0.0 {
            continue;
        }
        let mut row_s = 0.0;
        let mut row_t = 0.0;
        for (m, &pb) in b.probs().iter().enumerate() {
            row_s += pb * table.success(basis, n, m);
            row_t += pb * table.wrong(basis, n, m);
        }
        s += pa * row_s;
        t += pa * row_t;
    }
    GainEntry { s, t }
}

/// Averages the yield table over the source photon-number distributions.
pub fn gains_from_yields(table: &YieldTable, dists: &SourceDistributions) -> Result<GainTable> {
    if dists.max_cutoff() > table.cutoff() {
        return Err(Error::InvalidArgument(format!(
            "yield table cutoff {} is below the source cutoff {}",
            table.cutoff(),
            dists.max_cutoff()
        )));
    }
    let mut gains = GainTable::new();
    for basis in Basis::ALL {
        fill_basis_gains(
            &mut gains,
            table,
            basis,
            dists.basis(Party::Alice, basis),
            dists.basis(Party::Bob, basis),
        );
    }
    Ok(gains)
}

/// Fills every source pair of one basis from per-party distributions.
pub fn fill_basis_gains(
    gains: &mut GainTable,
    table: &YieldTable,
    basis: Basis,
    alice: &BasisDistributions,
    bob: &BasisDistributions,
) {
    for alpha in SourceKind::ALL {
        for beta in SourceKind::ALL {
            if let (Some(a), Some(b)) = (alice.get(alpha), bob.get(beta)) {
                gains.entries[basis.index()][alpha.index()][beta.index()] =
                    Some(pair_gain(table, basis, a, b));
            }
        }
    }
}

/// Simulates every observable gain for Poisson sources at the default truncation.
pub fn compute_gain_table(
    sources: &SourceSet,
    channel: &ChannelParams,
    det: &DetectorParams,
) -> Result<GainTable> {
    sources.validate()?;
    det.validate()?;
    let dists = SourceDistributions::poisson(sources, DEFAULT_TAIL_EPSILON)?;
    let relay = RelayResponse::new(*det, dists.max_cutoff());
    let table = YieldTable::new(&relay, channel);
    gains_from_yields(&table, &dists)
}
