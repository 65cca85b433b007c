//! Plain-text `key = value` run configuration.

use std::path::{Path, PathBuf};

use crate::error::Error;
use crate::keyrate::ProtocolParams;
use crate::optics::DetectorParams;
use crate::optimize::{FreeIntensities, LossRange, Protocol, SearchBounds, SweepConfig};
use crate::source::{
    check_decoy_condition, Basis, BasisIntensities, Party, PartySources, PhotonNumberDistribution,
    SourceSet, DEFAULT_TAIL_EPSILON,
};

use super::CliError;

/// Every key a configuration may set.
pub const KEYS: &[&str] = &[
    "e_0",
    "e_d",
    "p_d",
    "f",
    "mu1",
    "mu2",
    "nu1",
    "nu2",
    "mu1_x",
    "mu2_x",
    "nu1_x",
    "nu2_x",
    "loss_db",
    "loss_start",
    "loss_stop",
    "loss_step",
    "protocol",
    "optimize_decoy",
    "search_min",
    "search_max",
    "tail_epsilon",
    "cutoff",
    "gains_file",
    "out",
];

/// Resolved configuration. Defaults follow the usual simulation parameters:
/// `e_0 = 0.5`, `e_d = 1.5%`, `p_d = 3e-6`, `f = 1.16`, decoy 0.1 and
/// signal 0.15 for both parties in both bases.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub background_error: f64,
    pub misalignment: f64,
    pub dark_count: f64,
    pub ec_inefficiency: f64,
    pub mu1: f64,
    pub mu2: f64,
    /// Bob's intensities follow Alice's unless set.
    pub nu1: Option<f64>,
    pub nu2: Option<f64>,
    /// X-basis intensities follow the Z basis unless set. A signal of
    /// `none` drops the X-basis signal source.
    pub mu1_x: Option<f64>,
    pub mu2_x: Option<Option<f64>>,
    pub nu1_x: Option<f64>,
    pub nu2_x: Option<Option<f64>>,
    pub loss_db: f64,
    pub loss_start: f64,
    pub loss_stop: f64,
    pub loss_step: f64,
    pub protocols: Vec<Protocol>,
    pub optimize_decoy: bool,
    pub search_min: f64,
    pub search_max: f64,
    pub tail_epsilon: f64,
    pub cutoff: Option<usize>,
    pub gains_file: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let detector = DetectorParams::default();
        let bounds = SearchBounds::default();
        Self {
            background_error: DetectorParams::BACKGROUND_ERROR,
            misalignment: detector.misalignment,
            dark_count: detector.dark_count,
            ec_inefficiency: ProtocolParams::default().ec_inefficiency,
            mu1: 0.1,
            mu2: 0.15,
            nu1: None,
            nu2: None,
            mu1_x: None,
            mu2_x: None,
            nu1_x: None,
            nu2_x: None,
            loss_db: 20.0,
            loss_start: 0.0,
            loss_stop: 40.0,
            loss_step: 1.0,
            protocols: Protocol::ALL.to_vec(),
            optimize_decoy: false,
            search_min: bounds.min,
            search_max: bounds.max,
            tail_epsilon: DEFAULT_TAIL_EPSILON,
            cutoff: None,
            gains_file: None,
            out: None,
        }
    }
}

fn bad_value(key: &str, value: &str, reason: impl Into<String>) -> CliError {
    CliError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.into(),
    }
}

fn number(key: &str, value: &str) -> Result<f64, CliError> {
    let v: f64 = value
        .parse()
        .map_err(|_| bad_value(key, value, "expected a number"))?;
    if !v.is_finite() {
        return Err(bad_value(key, value, "expected a finite number"));
    }
    Ok(v)
}

fn optional_number(key: &str, value: &str) -> Result<Option<f64>, CliError> {
    match value {
        "none" => Ok(None),
        _ => number(key, value).map(Some),
    }
}

fn boolean(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad_value(key, value, "expected true or false")),
    }
}

fn protocols(key: &str, value: &str) -> Result<Vec<Protocol>, CliError> {
    if value == "all" {
        return Ok(Protocol::ALL.to_vec());
    }
    let mut list = Vec::new();
    for name in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let p: Protocol = name
            .parse()
            .map_err(|e: Error| bad_value(key, value, e.to_string()))?;
        if !list.contains(&p) {
            list.push(p);
        }
    }
    if list.is_empty() {
        return Err(bad_value(key, value, "expected at least one protocol"));
    }
    Ok(list)
}

/// Splits `key=value`, trimming both sides.
pub fn split_assignment(text: &str) -> Result<(&str, &str), CliError> {
    let (key, value) = text
        .split_once('=')
        .ok_or_else(|| CliError::Malformed(format!("expected key=value, got `{text}`")))?;
    Ok((key.trim(), value.trim()))
}

impl RunConfig {
    /// Applies one assignment. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "e_0" => self.background_error = number(key, value)?,
            "e_d" => self.misalignment = number(key, value)?,
            "p_d" => self.dark_count = number(key, value)?,
            "f" => self.ec_inefficiency = number(key, value)?,
            "mu1" => self.mu1 = number(key, value)?,
            "mu2" => self.mu2 = number(key, value)?,
            "nu1" => self.nu1 = Some(number(key, value)?),
            "nu2" => self.nu2 = Some(number(key, value)?),
            "mu1_x" => self.mu1_x = Some(number(key, value)?),
            "mu2_x" => self.mu2_x = Some(optional_number(key, value)?),
            "nu1_x" => self.nu1_x = Some(number(key, value)?),
            "nu2_x" => self.nu2_x = Some(optional_number(key, value)?),
            "loss_db" => self.loss_db = number(key, value)?,
            "loss_start" => self.loss_start = number(key, value)?,
            "loss_stop" => self.loss_stop = number(key, value)?,
            "loss_step" => self.loss_step = number(key, value)?,
            "protocol" => self.protocols = protocols(key, value)?,
            "optimize_decoy" => self.optimize_decoy = boolean(key, value)?,
            "search_min" => self.search_min = number(key, value)?,
            "search_max" => self.search_max = number(key, value)?,
            "tail_epsilon" => self.tail_epsilon = number(key, value)?,
            "cutoff" => {
                self.cutoff = Some(
                    value
                        .parse()
                        .map_err(|_| bad_value(key, value, "expected a non-negative integer"))?,
                )
            }
            "gains_file" => self.gains_file = Some(PathBuf::from(value)),
            "out" => self.out = Some(PathBuf::from(value)),
            _ => return Err(CliError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Parses configuration text: one `key = value` per line, `#` comments.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut config = Self::default();
        config.apply_text(text)?;
        Ok(config)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = split_assignment(line).map_err(|_| {
                CliError::Malformed(format!(
                    "line {}: expected key = value, got `{}`",
                    i + 1,
                    raw.trim()
                ))
            })?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn detector(&self) -> Result<DetectorParams, CliError> {
        let det = DetectorParams {
            dark_count: self.dark_count,
            misalignment: self.misalignment,
            background_error: self.background_error,
        };
        det.validate()?;
        Ok(det)
    }

    pub fn protocol_params(&self) -> Result<ProtocolParams, CliError> {
        Ok(ProtocolParams::new(self.ec_inefficiency)?)
    }

    fn party(&self, party: Party) -> PartySources {
        let (z_decoy, z_signal) = match party {
            Party::Alice => (self.mu1, self.mu2),
            Party::Bob => (self.nu1.unwrap_or(self.mu1), self.nu2.unwrap_or(self.mu2)),
        };
        let (x_decoy, x_signal) = match party {
            Party::Alice => (
                self.mu1_x.unwrap_or(z_decoy),
                self.mu2_x.unwrap_or(Some(z_signal)),
            ),
            Party::Bob => (
                self.nu1_x.or(self.mu1_x).unwrap_or(z_decoy),
                self.nu2_x.or(self.mu2_x).unwrap_or(Some(z_signal)),
            ),
        };
        PartySources {
            z: BasisIntensities::new(z_decoy, Some(z_signal)),
            x: BasisIntensities::new(x_decoy, x_signal),
        }
    }

    /// Source intensities, with the decoy ordering checked before anything else.
    pub fn sources(&self) -> Result<SourceSet, CliError> {
        let alice = self.party(Party::Alice);
        let bob = self.party(Party::Bob);
        for (party, sources) in [(Party::Alice, &alice), (Party::Bob, &bob)] {
            for basis in Basis::ALL {
                let b = sources.basis(basis);
                let Some(signal) = b.signal else { continue };
                if !(b.decoy > 0.0 && signal > 0.0) {
                    continue;
                }
                let decoy = PhotonNumberDistribution::poisson(b.decoy, self.tail_epsilon)?;
                let signal = PhotonNumberDistribution::poisson(signal, self.tail_epsilon)?;
                if let Some(k) = check_decoy_condition(&decoy, &signal)?.first_violation {
                    return Err(Error::DecoyCondition { party, k }.into());
                }
            }
        }
        Ok(SourceSet::new(alice, bob)?)
    }

    pub fn is_symmetric(&self) -> bool {
        let sources = (self.party(Party::Alice), self.party(Party::Bob));
        sources.0 == sources.1
    }

    pub fn loss_range(&self) -> Result<LossRange, CliError> {
        Ok(LossRange::new(
            self.loss_start,
            self.loss_stop,
            self.loss_step,
        )?)
    }

    /// Sweep configuration; `optimize` selects whether protocols are optimized.
    pub fn sweep_config(&self, loss: LossRange, optimize: bool) -> Result<SweepConfig, CliError> {
        if !(self.tail_epsilon > 0.0 && self.tail_epsilon < 1e-6) {
            return Err(bad_value(
                "tail_epsilon",
                &self.tail_epsilon.to_string(),
                "must lie in (0, 1e-6)",
            ));
        }
        Ok(SweepConfig {
            loss,
            protocols: if optimize {
                self.protocols.clone()
            } else {
                Vec::new()
            },
            free: if self.optimize_decoy {
                FreeIntensities::SignalAndDecoy
            } else {
                FreeIntensities::Signal
            },
            bounds: SearchBounds::new(self.search_min, self.search_max)?,
            sources: self.sources()?,
            detector: self.detector()?,
            protocol: self.protocol_params()?,
            tail_epsilon: self.tail_epsilon,
            cutoff: self.cutoff,
        })
    }
}
