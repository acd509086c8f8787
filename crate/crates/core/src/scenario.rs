//! System configuration, unit conversion and large-scale path loss.
//!
//! A scenario file is plain text with one `key = value` pair per line and `#`
//! comments. Values are SI units. The keys `w`, `noise_power`, `rho` and
//! `p_ce` also accept a `_dbm` suffix, in which case the value is in dBm.
//! List-valued keys (`delta`, `distances`) are comma separated; a single value
//! is broadcast to all `K` tags.
//!
//! | key            | meaning                                    | unit    |
//! |----------------|--------------------------------------------|---------|
//! | `M`            | transmit antennas                          | count   |
//! | `R`            | receive antennas                           | count   |
//! | `K`            | tags                                       | count   |
//! | `T`            | block duration                             | symbols |
//! | `w`            | average transmit power                     | W       |
//! | `noise_power`  | receiver noise power σ²                    | W       |
//! | `eta`          | rectifier efficiency η                     | –       |
//! | `delta`        | per-tag power reflection coefficient δ_k   | –       |
//! | `rho`          | circuit power consumption ρ                | W       |
//! | `distances`    | per-tag reader distance d_k                | m       |
//! | `carrier_freq` | carrier frequency f                        | Hz      |
//! | `tau`          | truncation floor of \|h\|² (optional)      | –       |
//! | `alpha`        | channel-estimation duration α              | symbols |
//! | `p_ce`         | per-antenna pilot power                    | W       |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

/// Speed of light used by the effective-aperture formula (m/s).
pub const SPEED_OF_LIGHT: f64 = 3e8;

/// Factor applied to `min_k β_k` when `tau` is not given explicitly.
pub const DEFAULT_TAU_FACTOR: f64 = 1e-2;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("cannot read scenario file: {0}")]
    Io(String),
    #[error("line {line}: expected `key = value`, found `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("key `{key}`: cannot parse `{value}`")]
    BadValue { key: String, value: String },
    #[error("{0}")]
    Invalid(String),
    #[error("non-positive distance or frequency (d = {d}, f = {f})")]
    BadGeometry { d: f64, f: f64 },
    #[error("CE duration alpha = {alpha} must be smaller than the block length T = {t}")]
    AlphaTooLong { alpha: usize, t: usize },
    #[error("energy budget exhausted: carrier power {p} W is not positive")]
    BudgetExhausted { p: f64 },
}

/// All physical and protocol parameters of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemConfig {
    pub m: usize,
    pub r: usize,
    pub k: usize,
    pub t: usize,
    /// Average transmit power `w` (W).
    pub w: f64,
    /// Receiver noise power σ² (W).
    pub noise_power: f64,
    pub eta: f64,
    pub delta: Vec<f64>,
    /// Circuit power consumption ρ (W).
    pub rho: f64,
    /// Tag distances (m).
    pub distances: Vec<f64>,
    /// Carrier frequency (Hz).
    pub carrier_freq: f64,
    /// Explicit truncation floor; `None` selects the default.
    pub tau: Option<f64>,
    /// Pinned channel-estimation duration α (symbols).
    pub alpha: usize,
    /// Pinned pilot power p_ce (W).
    pub p_ce: f64,
}

/// Large-scale fading of every tag link.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TagLinkStats {
    pub beta: Vec<f64>,
    /// Effective aperture A_e (m²).
    pub aperture: f64,
}

/// One entry of [`TagLinkStats`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkEntry {
    pub beta: f64,
    pub aperture: f64,
}

const KEYS: [&str; 14] = [
    "M",
    "R",
    "K",
    "T",
    "w",
    "noise_power",
    "eta",
    "delta",
    "rho",
    "distances",
    "carrier_freq",
    "tau",
    "alpha",
    "p_ce",
];
const DBM_KEYS: [&str; 4] = ["w", "noise_power", "rho", "p_ce"];

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            m: 4,
            r: 4,
            k: 2,
            t: 200,
            w: 2.0,
            noise_power: 1e-13,
            eta: 0.65,
            delta: vec![0.25, 0.25],
            rho: 8.9e-6,
            distances: vec![4.0, 6.0],
            carrier_freq: 915e6,
            tau: None,
            alpha: 100,
            p_ce: 2.0,
        }
    }
}

impl SystemConfig {
    /// Checks every invariant, naming the offending key on failure.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |msg: String| Err(ScenarioError::Invalid(msg));
        if self.m == 0 || self.r == 0 || self.k == 0 {
            return bad("M, R and K must be at least 1".into());
        }
        if self.t == 0 {
            return bad("T must be positive".into());
        }
        if self.delta.len() != self.k {
            return bad(format!("delta has {} entries, K = {}", self.delta.len(), self.k));
        }
        if self.distances.len() != self.k {
            return bad(format!(
                "distances has {} entries, K = {}",
                self.distances.len(),
                self.k
            ));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad(format!("eta out of range (0, 1]: {}", self.eta));
        }
        if let Some(d) = self.delta.iter().find(|d| !(0.0..=1.0).contains(*d)) {
            return bad(format!("delta out of range [0, 1]: {d}"));
        }
        for (name, v) in [
            ("w", self.w),
            ("noise_power", self.noise_power),
            ("rho", self.rho),
            ("p_ce", self.p_ce),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be a non-negative power: {v}"));
            }
        }
        if let Some(d) = self.distances.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return bad(format!("distances must be positive: {d}"));
        }
        if !(self.carrier_freq.is_finite() && self.carrier_freq > 0.0) {
            return bad(format!("carrier_freq must be positive: {}", self.carrier_freq));
        }
        if let Some(tau) = self.tau {
            if !(tau.is_finite() && tau > 0.0) {
                return bad(format!("tau must be positive: {tau}"));
            }
        }
        if self.alpha >= self.t {
            return Err(ScenarioError::AlphaTooLong { alpha: self.alpha, t: self.t });
        }
        Ok(())
    }

    /// Large-scale fading of every tag.
    pub fn link_stats(&self) -> Result<TagLinkStats, ScenarioError> {
        let mut beta = Vec::with_capacity(self.k);
        let mut aperture = 0.0;
        for &d in &self.distances {
            let e = path_loss(d, self.carrier_freq)?;
            beta.push(e.beta);
            aperture = e.aperture;
        }
        Ok(TagLinkStats { beta, aperture })
    }

    /// Resolved truncation floor τ.
    pub fn tau_value(&self, stats: &TagLinkStats) -> f64 {
        self.tau.unwrap_or_else(|| {
            DEFAULT_TAU_FACTOR * stats.beta.iter().cloned().fold(f64::INFINITY, f64::min)
        })
    }

    /// Carrier power during the information phase at the pinned CE setting.
    pub fn carrier_power(&self) -> Result<f64, ScenarioError> {
        carrier_power(self.w, self.t, self.alpha, self.p_ce)
    }

    /// Parses the scenario text format.
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut raw: BTreeMap<String, String> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ScenarioError::Syntax {
                line: i + 1,
                text: line.to_string(),
            })?;
            let key = key.trim();
            let base = key.strip_suffix("_dbm").unwrap_or(key);
            let known = KEYS.contains(&key) || (key != base && DBM_KEYS.contains(&base));
            if !known {
                return Err(ScenarioError::UnknownKey(key.to_string()));
            }
            if raw.contains_key(base) {
                return Err(ScenarioError::DuplicateKey(base.to_string()));
            }
            let value = value.trim();
            let stored = if key != base {
                let dbm = parse_f64(key, value)?;
                format!("{:?}", dbm_to_watts(dbm))
            } else {
                value.to_string()
            };
            raw.insert(base.to_string(), stored);
        }
        let mut cfg = Self::default();
        for key in KEYS {
            match raw.get(key) {
                Some(v) => cfg.set_raw(key, v)?,
                None if key == "tau" => cfg.tau = None,
                None => return Err(ScenarioError::MissingKey(key.to_string())),
            }
        }
        cfg.resolve_lists()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies a `KEY=VALUE` override (same key set and units as the file).
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ScenarioError> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| ScenarioError::Syntax {
            line: 0,
            text: assignment.to_string(),
        })?;
        let key = key.trim();
        let value = value.trim();
        let base = key.strip_suffix("_dbm").unwrap_or(key);
        if key != base && DBM_KEYS.contains(&base) {
            let w = dbm_to_watts(parse_f64(key, value)?);
            self.set_raw(base, &format!("{w:?}"))?;
        } else if KEYS.contains(&key) {
            self.set_raw(key, value)?;
        } else {
            return Err(ScenarioError::UnknownKey(key.to_string()));
        }
        self.resolve_lists()?;
        self.validate()
    }

    fn set_raw(&mut self, key: &str, value: &str) -> Result<(), ScenarioError> {
        match key {
            "M" => self.m = parse_usize(key, value)?,
            "R" => self.r = parse_usize(key, value)?,
            "K" => self.k = parse_usize(key, value)?,
            "T" => self.t = parse_usize(key, value)?,
            "w" => self.w = parse_f64(key, value)?,
            "noise_power" => self.noise_power = parse_f64(key, value)?,
            "eta" => self.eta = parse_f64(key, value)?,
            "delta" => self.delta = parse_list(key, value)?,
            "rho" => self.rho = parse_f64(key, value)?,
            "distances" => self.distances = parse_list(key, value)?,
            "carrier_freq" => self.carrier_freq = parse_f64(key, value)?,
            "tau" => self.tau = Some(parse_f64(key, value)?),
            "alpha" => self.alpha = parse_usize(key, value)?,
            "p_ce" => self.p_ce = parse_f64(key, value)?,
            _ => return Err(ScenarioError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    fn resolve_lists(&mut self) -> Result<(), ScenarioError> {
        for list in [&mut self.delta, &mut self.distances] {
            if list.len() == 1 && self.k > 1 {
                let v = list[0];
                *list = vec![v; self.k];
            }
        }
        Ok(())
    }

    /// Serializes to the scenario text format; `parse` inverts it exactly.
    pub fn to_scenario_string(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        let _ = writeln!(s, "M = {}", self.m);
        let _ = writeln!(s, "R = {}", self.r);
        let _ = writeln!(s, "K = {}", self.k);
        let _ = writeln!(s, "T = {}", self.t);
        let _ = writeln!(s, "w = {:?}", self.w);
        let _ = writeln!(s, "noise_power = {:?}", self.noise_power);
        let _ = writeln!(s, "eta = {:?}", self.eta);
        let _ = writeln!(s, "delta = {}", list(&self.delta));
        let _ = writeln!(s, "rho = {:?}", self.rho);
        let _ = writeln!(s, "distances = {}", list(&self.distances));
        let _ = writeln!(s, "carrier_freq = {:?}", self.carrier_freq);
        if let Some(tau) = self.tau {
            let _ = writeln!(s, "tau = {tau:?}");
        }
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "p_ce = {:?}", self.p_ce);
        s
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ScenarioError> {
    value.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| ScenarioError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

fn parse_usize(key: &str, value: &str) -> Result<usize, ScenarioError> {
    value.parse::<usize>().map_err(|_| ScenarioError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, ScenarioError> {
    value.split(',').map(|v| parse_f64(key, v.trim())).collect()
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<SystemConfig, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
    SystemConfig::parse(&text)
}

/// Converts dBm to watts.
pub fn dbm_to_watts(x: f64) -> f64 {
    10f64.powf((x - 30.0) / 10.0)
}

/// Effective isotropic aperture and large-scale gain `β = A_e / (4π d²)`.
pub fn path_loss(d: f64, f: f64) -> Result<LinkEntry, ScenarioError> {
    if !(d > 0.0 && f > 0.0) {
        return Err(ScenarioError::BadGeometry { d, f });
    }
    let four_pi = 4.0 * std::f64::consts::PI;
    let aperture = SPEED_OF_LIGHT * SPEED_OF_LIGHT / (four_pi * f * f);
    Ok(LinkEntry { beta: aperture / (four_pi * d * d), aperture })
}

/// Carrier power `p = (wT − α p_ce) / (T − α)` left for the information phase.
pub fn carrier_power(w: f64, t: usize, alpha: usize, p_ce: f64) -> Result<f64, ScenarioError> {
    if alpha >= t {
        return Err(ScenarioError::AlphaTooLong { alpha, t });
    }
    let (tf, af) = (t as f64, alpha as f64);
    let p = (w * tf - af * p_ce) / (tf - af);
    if !(p > 0.0) {
        return Err(ScenarioError::BudgetExhausted { p });
    }
    Ok(p)
}
