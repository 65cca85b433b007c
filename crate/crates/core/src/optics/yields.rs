use crate::optics::bsm::RelayResponse;
use crate::optics::channel::{binomial_row, ChannelParams, DetectorParams};
use crate::source::Basis;

/// Success probability `Y[n][m]` and wrong-bit probability `T[n][m]` for
/// `n` photons sent by Alice and `m` by Bob, per basis.
#[derive(Debug, Clone, PartialEq)]
pub struct YieldTable {
    cutoff: usize,
    loss_db: f64,
    /// `[basis][n * side + m]`
    success: [Vec<f64>; 2],
    wrong: [Vec<f64>; 2],
}

impl YieldTable {
    /// Folds the binomial survival of each arm into the relay response.
    pub fn new(relay: &RelayResponse, channel: &ChannelParams) -> Self {
        let cutoff = relay.cutoff();
        let side = cutoff + 1;
        let xi = channel.arm_transmittance();

        // loss[n * side + k] = P(k survive | n sent)
        let mut loss = vec![0.0; side * side];
        for n in 0..side {
            for (k, p) in binomial_row(n, xi).into_iter().enumerate() {
                loss[n * side + k] = p;
            }
        }

        let fold = |response: &[f64]| -> Vec<f64> {
            // Y = L R L^T, done as two passes so each entry keeps a fixed
            // summation order.
            let mut half = vec![0.0; side * side];
            for n in 0..side {
                for l in 0..side {
                    let mut acc = 0.0;
                    for k in 0..=n {
                        acc += loss[n * side + k] * response[k * side + l];
                    }
                    half[n * side + l] = acc;
                }
            }
            let mut out = vec![0.0; side * side];
            for n in 0..side {
                for m in 0..side {
                    let mut acc = 0.0;
                    for l in 0..=m {
                        acc += half[n * side + l] * loss[m * side + l];
                    }
                    out[n * side + m] = acc;
                }
            }
            out
        };

        let success = [
            fold(relay.success_row_major(Basis::Z)),
            fold(relay.success_row_major(Basis::X)),
        ];
        let wrong = [
            fold(relay.wrong_row_major(Basis::Z)),
            fold(relay.wrong_row_major(Basis::X)),
        ];
        Self {
            cutoff,
            loss_db: channel.total_loss_db(),
            success,
            wrong,
        }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn loss_db(&self) -> f64 {
        self.loss_db
    }

    pub fn success(&self, basis: Basis, n: usize, m: usize) -> f64 {
        self.success[basis.index()][n * (self.cutoff + 1) + m]
    }

    pub fn wrong(&self, basis: Basis, n: usize, m: usize) -> f64 {
        self.wrong[basis.index()][n * (self.cutoff + 1) + m]
    }

    /// True single-photon-pair yield.
    pub fn s11(&self, basis: Basis) -> f64 {
        self.success(basis, 1, 1)
    }

    /// True single-photon-pair error rate, zero when the yield vanishes.
    pub fn e11(&self, basis: Basis) -> f64 {
        let s = self.s11(basis);
        if s > 0.0 {
            self.wrong(basis, 1, 1) / s
        } else {
            0.0
        }
    }
}

/// `(Y, T_y)` for `n` photons from Alice and `m` from Bob in one basis.
pub fn yields_for_pair(
    n: usize,
    m: usize,
    basis: Basis,
    channel: &ChannelParams,
    det: &DetectorParams,
) -> (f64, f64) {
    let relay = RelayResponse::new(*det, n.max(m));
    let table = YieldTable::new(&relay, channel);
    (table.success(basis, n, m), table.wrong(basis, n, m))
}
