//! Closed-form energy and rate expressions.
//!
//! The estimation quality of tag `k` enters every expression through
//! `c_k = σ_ẽ,k² / β_k²` and the penalty `φ(c) = c e^c E1(c)`, the mean of
//! `1 / (X/c + 1)` for a unit exponential `X`. The lower rate bounds replace
//! the special functions by the elementary sandwich
//! `½ e^{-t} ln(1 + 2/t) < E1(t) < e^{-t} ln(1 + 1/t)`.

use serde::Serialize;
use thiserror::Error;

use crate::estimation::{error_var, Estimator};
use crate::scenario::{carrier_power, ScenarioError, SystemConfig, TagLinkStats};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("argument must be positive, got {0}")]
    NonPositive(f64),
    #[error("{receiver:?} needs R >= {need}, got R = {r}")]
    TooFewReceiveAntennas { receiver: Receiver, need: usize, r: usize },
    #[error("energy weights must lie on the simplex (sum = {sum})")]
    NotOnSimplex { sum: f64 },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Linear detector at the reader.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Receiver {
    Mrc,
    Zf,
}

impl Receiver {
    pub const ALL: [Receiver; 2] = [Receiver::Mrc, Receiver::Zf];

    pub fn name(self) -> &'static str {
        match self {
            Receiver::Mrc => "mrc",
            Receiver::Zf => "zf",
        }
    }

    /// Smallest receive-antenna count for which the detector is defined.
    pub fn min_antennas(self, k: usize) -> usize {
        match self {
            Receiver::Mrc => 2,
            Receiver::Zf => k + 1,
        }
    }

    pub fn check(self, r: usize, k: usize) -> Result<(), AnalyticsError> {
        let need = self.min_antennas(k);
        if r < need {
            return Err(AnalyticsError::TooFewReceiveAntennas { receiver: self, need, r });
        }
        Ok(())
    }
}

/// `e^t E1(t)`, finite for every `t > 0`.
fn e1_scaled_cf(t: f64) -> f64 {
    // Modified Lentz evaluation of the continued fraction for t >= 1.
    let tiny = 1e-300;
    let mut b = t + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..1000 {
        let a = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

fn e1_series(t: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for n in 1..200 {
        term *= -t / n as f64;
        let add = term / n as f64;
        sum += add;
        if add.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    -EULER_GAMMA - t.ln() - sum
}

/// Exponential integral `E1(t) = ∫_t^∞ e^{-u}/u du`.
pub fn exp_integral_e1(t: f64) -> Result<f64, AnalyticsError> {
    if !(t > 0.0) {
        return Err(AnalyticsError::NonPositive(t));
    }
    Ok(e1(t))
}

pub(crate) fn e1(t: f64) -> f64 {
    if t < 1.0 {
        e1_series(t)
    } else if t > 745.0 {
        0.0
    } else {
        (-t).exp() * e1_scaled_cf(t)
    }
}

/// `φ(c) = c e^c E1(c)`; `c = ∞` maps to 1.
pub fn phi(c: f64) -> Result<f64, AnalyticsError> {
    if !(c > 0.0) {
        return Err(AnalyticsError::NonPositive(c));
    }
    Ok(phi_unchecked(c))
}

fn phi_unchecked(c: f64) -> f64 {
    if c.is_infinite() {
        1.0
    } else if c < 1.0 {
        c * c.exp() * e1_series(c)
    } else {
        c * e1_scaled_cf(c)
    }
}

/// Lower and upper bounds of `1 − φ(x)`.
pub fn bound_factors(x: f64) -> (f64, f64) {
    if x.is_infinite() {
        return (0.0, 0.0);
    }
    if x > 1e6 {
        let inv = 1.0 / x;
        return (0.5 * inv - inv * inv / 3.0, inv - 4.0 * inv * inv / 3.0);
    }
    let l1 = 1.0 - x * (1.0 / x).ln_1p();
    let l2 = 1.0 - 0.5 * x * (2.0 / x).ln_1p();
    (l1, l2)
}

/// Argument `c` of `φ` for one tag.
pub fn phi_argument(
    method: Estimator,
    k: usize,
    sigma2: f64,
    beta: f64,
    alpha: usize,
    p_ce: f64,
    delta: f64,
) -> f64 {
    let ks2 = k as f64 * sigma2;
    let energy = beta * beta * alpha as f64 * p_ce * delta;
    match method {
        Estimator::Ls => ks2 / energy,
        Estimator::Mmse => ks2 / (ks2 + energy),
    }
}

/// Bounds `(P_L, P_U)` of the incident power of one tag.
#[allow(clippy::too_many_arguments)]
pub fn incident_power_bounds(
    p: f64,
    beta: f64,
    zeta: f64,
    m: usize,
    method: Estimator,
    alpha: usize,
    p_ce: f64,
    delta: f64,
    sigma2: f64,
    k: usize,
) -> (f64, f64) {
    let x = phi_argument(method, k, sigma2, beta, alpha, p_ce, delta);
    let (l1, l2) = bound_factors(x);
    let gain = zeta * (m as f64 - 1.0);
    (p * beta * (gain * l1 + 1.0), p * beta * (gain * l2 + 1.0))
}

/// Harvested power `η (1 − δ) P_I` applied to both bounds.
pub fn harvest_rate_bounds(bounds: (f64, f64), eta: f64, delta: f64) -> (f64, f64) {
    let f = eta * (1.0 - delta);
    (f * bounds.0, f * bounds.1)
}

/// Incident power `p β [ζ (M − 1)(1 − φ) + 1]`.
pub fn exact_incident_power(p: f64, beta: f64, zeta: f64, m: usize, phi_value: f64) -> f64 {
    p * beta * (zeta * (m as f64 - 1.0) * (1.0 - phi_value) + 1.0)
}

/// Per-tag inputs of the SINR expressions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TagTerms {
    /// Reflected power `p_k = δ_k P_Ik` (W).
    pub p: f64,
    pub beta: f64,
    /// Backscatter error variance `σ_ẽ,k²`.
    pub err_var: f64,
    pub phi: f64,
}

/// `E{1/|h|²}` truncated at `τ`, in units of `1/β`: `E1(τ/β)/β`.
fn inverse_power_mean(tau: f64, beta: f64) -> f64 {
    e1(tau / beta) / beta
}

/// MRC SINR of every tag with imperfect CSI.
pub fn sinr_mrc(tags: &[TagTerms], sigma2: f64, tau: f64, r: usize) -> Result<Vec<f64>, AnalyticsError> {
    Receiver::Mrc.check(r, tags.len())?;
    Ok((0..tags.len())
        .map(|k| {
            let s = &tags[k];
            let (mut interf, mut cross) = (0.0, 0.0);
            for (i, o) in tags.iter().enumerate() {
                if i != k {
                    interf += o.p * o.beta;
                    cross += o.p * o.err_var * inverse_power_mean(tau, o.beta);
                }
            }
            let den = (1.0 - s.phi) * (interf + 2.0 * cross + sigma2) + s.p * s.beta * s.phi;
            s.p * (r as f64 - 1.0) * s.beta / den
        })
        .collect())
}

/// ZF SINR of every tag with imperfect CSI.
pub fn sinr_zf(tags: &[TagTerms], sigma2: f64, tau: f64, r: usize) -> Result<Vec<f64>, AnalyticsError> {
    let k_tags = tags.len();
    Receiver::Zf.check(r, k_tags)?;
    Ok((0..k_tags)
        .map(|k| {
            let s = &tags[k];
            let residual: f64 = tags
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != k)
                .map(|(_, o)| o.p * o.err_var * inverse_power_mean(tau, o.beta))
                .sum();
            let den = (1.0 - s.phi) * (residual + sigma2) + s.p * s.beta * s.phi;
            s.p * (r - k_tags) as f64 * s.beta / den
        })
        .collect())
}

/// `log2(1 + γ)`.
pub fn rate(sinr: f64) -> f64 {
    sinr.ln_1p() / std::f64::consts::LN_2
}

/// Energy weights, CE duration and pilot power.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignVariables {
    pub zeta: Vec<f64>,
    pub alpha: usize,
    pub p_ce: f64,
}

impl DesignVariables {
    pub fn uniform(k: usize, alpha: usize, p_ce: f64) -> Self {
        Self { zeta: vec![1.0 / k as f64; k], alpha, p_ce }
    }
}

/// Everything the closed forms need, resolved from a scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Model {
    pub m: usize,
    pub r: usize,
    pub k: usize,
    pub t: usize,
    pub w: f64,
    pub sigma2: f64,
    pub eta: f64,
    pub rho: f64,
    pub tau: f64,
    pub beta: Vec<f64>,
    pub delta: Vec<f64>,
}

impl Model {
    pub fn new(cfg: &SystemConfig, stats: &TagLinkStats) -> Self {
        Self {
            m: cfg.m,
            r: cfg.r,
            k: cfg.k,
            t: cfg.t,
            w: cfg.w,
            sigma2: cfg.noise_power,
            eta: cfg.eta,
            rho: cfg.rho,
            tau: cfg.tau_value(stats),
            beta: stats.beta.clone(),
            delta: cfg.delta.clone(),
        }
    }

    pub fn from_config(cfg: &SystemConfig) -> Result<Self, ScenarioError> {
        Ok(Self::new(cfg, &cfg.link_stats()?))
    }

    /// Per-tag CE statistics at `(alpha, p_ce)`.
    pub fn ce_stats(&self, method: Estimator, alpha: usize, p_ce: f64) -> Vec<CeStats> {
        (0..self.k)
            .map(|k| {
                let (beta, delta) = (self.beta[k], self.delta[k]);
                let c = phi_argument(method, self.k, self.sigma2, beta, alpha, p_ce, delta);
                let d = alpha as f64 / self.k as f64;
                let err_var = match method {
                    Estimator::Ls => self.sigma2 / (d * p_ce * delta),
                    Estimator::Mmse => beta * beta / (1.0 + delta * beta * beta * d * p_ce / self.sigma2),
                };
                let (l1, l2) = bound_factors(c);
                CeStats { err_var, c, phi: phi_unchecked(c), l1, l2 }
            })
            .collect()
    }

    /// Backscatter error variance for an integer pilot length.
    pub fn err_var(&self, method: Estimator, k: usize, d: usize, p_ce: f64) -> f64 {
        error_var(method, self.beta[k], self.sigma2, d, p_ce, self.delta[k])
    }
}

/// Per-tag CE quality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CeStats {
    pub err_var: f64,
    pub c: f64,
    pub phi: f64,
    pub l1: f64,
    pub l2: f64,
}

/// Closed-form quantities of one tag.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TagReport {
    pub p_i_lower: f64,
    pub p_i_exact: f64,
    pub p_i_upper: f64,
    pub p_e_lower: f64,
    pub p_e_upper: f64,
    /// Exact-form SINR with `p_k = δ_k P_Ik`.
    pub sinr_exact: f64,
    /// Tractable lower bound.
    pub sinr_lower: f64,
    /// `R̃_k = log2(1 + sinr_exact)`.
    pub rate_exact: f64,
    pub rate_lower: f64,
}

/// Per-tag closed forms at one design.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFormReport {
    pub carrier_power: f64,
    pub tags: Vec<TagReport>,
}

fn check_simplex(zeta: &[f64]) -> Result<(), AnalyticsError> {
    let sum: f64 = zeta.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || zeta.iter().any(|z| !(-1e-12..=1.0 + 1e-12).contains(z)) {
        return Err(AnalyticsError::NotOnSimplex { sum });
    }
    Ok(())
}

/// Tractable lower-bound SINR of every tag and the per-tag `P_E^L`.
pub fn sinr_lower_bounds(
    model: &Model,
    design: &DesignVariables,
    method: Estimator,
    receiver: Receiver,
) -> Result<(Vec<f64>, Vec<f64>), AnalyticsError> {
    receiver.check(model.r, model.k)?;
    check_simplex(&design.zeta)?;
    let p = carrier_power(model.w, model.t, design.alpha, design.p_ce)?;
    let ce = model.ce_stats(method, design.alpha, design.p_ce);
    Ok(lower_bound_core(model, design, p, &ce, receiver))
}

pub(crate) fn lower_bound_core(
    model: &Model,
    design: &DesignVariables,
    p: f64,
    ce: &[CeStats],
    receiver: Receiver,
) -> (Vec<f64>, Vec<f64>) {
    let gain = model.m as f64 - 1.0;
    let k_tags = model.k;
    let pl: Vec<f64> =
        (0..k_tags).map(|k| p * model.beta[k] * (design.zeta[k] * gain * ce[k].l1 + 1.0)).collect();
    let pu: Vec<f64> =
        (0..k_tags).map(|k| p * model.beta[k] * (design.zeta[k] * gain * ce[k].l2 + 1.0)).collect();
    let tau = model.tau;
    let sinr = (0..k_tags)
        .map(|k| {
            let beta = model.beta[k];
            let (mut interf, mut resid) = (0.0, 0.0);
            for i in (0..k_tags).filter(|&i| i != k) {
                let bi = model.beta[i];
                let pi = model.delta[i] * pu[i];
                interf += pi * bi;
                resid += pi * ce[i].err_var / bi * (-tau / bi).exp() * (bi / tau).ln_1p();
            }
            let ev = ce[k].err_var;
            let self_term = model.delta[k] * pu[k] * ev / beta * (beta * beta / ev).ln_1p();
            let num = model.delta[k] * pl[k] * beta;
            match receiver {
                Receiver::Mrc => {
                    num * (model.r as f64 - 1.0)
                        / (ce[k].l2 * (interf + 2.0 * resid + model.sigma2) + self_term)
                }
                Receiver::Zf => {
                    num * (model.r - k_tags) as f64 / (ce[k].l2 * (resid + model.sigma2) + self_term)
                }
            }
        })
        .collect();
    let pe = (0..k_tags).map(|k| model.eta * (1.0 - model.delta[k]) * pl[k]).collect();
    (sinr, pe)
}

/// Every closed form at one design.
pub fn closed_form_report(
    model: &Model,
    design: &DesignVariables,
    method: Estimator,
    receiver: Receiver,
) -> Result<ClosedFormReport, AnalyticsError> {
    receiver.check(model.r, model.k)?;
    check_simplex(&design.zeta)?;
    let p = carrier_power(model.w, model.t, design.alpha, design.p_ce)?;
    let ce = model.ce_stats(method, design.alpha, design.p_ce);
    let (sinr_low, _) = lower_bound_core(model, design, p, &ce, receiver);
    let gain = model.m as f64 - 1.0;
    let mut terms = Vec::with_capacity(model.k);
    let mut partial = Vec::with_capacity(model.k);
    for k in 0..model.k {
        let beta = model.beta[k];
        let z = design.zeta[k];
        let p_i = exact_incident_power(p, beta, z, model.m, ce[k].phi);
        let pl = p * beta * (z * gain * ce[k].l1 + 1.0);
        let pu = p * beta * (z * gain * ce[k].l2 + 1.0);
        let (pel, peu) = harvest_rate_bounds((pl, pu), model.eta, model.delta[k]);
        terms.push(TagTerms { p: model.delta[k] * p_i, beta, err_var: ce[k].err_var, phi: ce[k].phi });
        partial.push((pl, p_i, pu, pel, peu));
    }
    let sinr = match receiver {
        Receiver::Mrc => sinr_mrc(&terms, model.sigma2, model.tau, model.r)?,
        Receiver::Zf => sinr_zf(&terms, model.sigma2, model.tau, model.r)?,
    };
    let tags = partial
        .into_iter()
        .enumerate()
        .map(|(k, (pl, pi, pu, pel, peu))| TagReport {
            p_i_lower: pl,
            p_i_exact: pi,
            p_i_upper: pu,
            p_e_lower: pel,
            p_e_upper: peu,
            sinr_exact: sinr[k],
            sinr_lower: sinr_low[k],
            rate_exact: rate(sinr[k]),
            rate_lower: rate(sinr_low[k]),
        })
        .collect();
    Ok(ClosedFormReport { carrier_power: p, tags })
}

/// Rates and harvested power of a benchmark scheme.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub incident_power: Vec<f64>,
    pub harvested_power: Vec<f64>,
    pub sinr: Vec<f64>,
    pub rates: Vec<f64>,
}

impl BenchmarkReport {
    pub fn min_rate(&self) -> f64 {
        self.rates.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Energy beamforming with perfect forward CSI and carrier power `p`.
pub fn benchmark_perfect_csi(
    model: &Model,
    zeta: &[f64],
    receiver: Receiver,
    p: f64,
) -> Result<BenchmarkReport, AnalyticsError> {
    receiver.check(model.r, model.k)?;
    check_simplex(zeta)?;
    let m = model.m as f64;
    let gain: Vec<f64> = zeta.iter().map(|z| z * m + 1.0 - z).collect();
    let incident: Vec<f64> = (0..model.k).map(|k| p * model.beta[k] * gain[k]).collect();
    let rx_power: Vec<f64> =
        (0..model.k).map(|k| model.delta[k] * incident[k] * model.beta[k]).collect();
    let sinr: Vec<f64> = (0..model.k)
        .map(|k| match receiver {
            Receiver::Mrc => {
                let interf: f64 = (0..model.k).filter(|&i| i != k).map(|i| rx_power[i]).sum();
                rx_power[k] * (model.r as f64 - 1.0) / (interf + model.sigma2)
            }
            Receiver::Zf => rx_power[k] * (model.r - model.k) as f64 / model.sigma2,
        })
        .collect();
    Ok(BenchmarkReport {
        harvested_power: (0..model.k)
            .map(|k| model.eta * (1.0 - model.delta[k]) * incident[k])
            .collect(),
        rates: sinr.iter().map(|&g| rate(g)).collect(),
        incident_power: incident,
        sinr,
    })
}

/// Omnidirectional transmission with estimated-CSI detection.
pub fn benchmark_omni(
    model: &Model,
    method: Estimator,
    receiver: Receiver,
    alpha: usize,
    p_ce: f64,
) -> Result<BenchmarkReport, AnalyticsError> {
    receiver.check(model.r, model.k)?;
    let p = carrier_power(model.w, model.t, alpha, p_ce)?;
    let ce = model.ce_stats(method, alpha, p_ce);
    let m = model.m as f64;
    let incident: Vec<f64> = (0..model.k)
        .map(|k| p * model.beta[k] * (1.0 - (m - 1.0) / m * ce[k].phi))
        .collect();
    let terms: Vec<TagTerms> = (0..model.k)
        .map(|k| TagTerms {
            p: model.delta[k] * incident[k],
            beta: model.beta[k],
            err_var: ce[k].err_var,
            phi: ce[k].phi,
        })
        .collect();
    let sinr = match receiver {
        Receiver::Mrc => sinr_mrc(&terms, model.sigma2, model.tau, model.r)?,
        Receiver::Zf => sinr_zf(&terms, model.sigma2, model.tau, model.r)?,
    };
    Ok(BenchmarkReport {
        harvested_power: (0..model.k)
            .map(|k| model.eta * (1.0 - model.delta[k]) * incident[k])
            .collect(),
        rates: sinr.iter().map(|&g| rate(g)).collect(),
        incident_power: incident,
        sinr,
    })
}
