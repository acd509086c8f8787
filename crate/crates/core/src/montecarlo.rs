//! End-to-end Monte Carlo oracle for incident power and achievable rates.
//!
//! Each draw generates fresh channels, runs the CE slot through the chosen
//! estimator, forms the energy beam and the detector from the estimates, and
//! evaluates the instantaneous SINR against the true backward channels. Draws
//! are addressed by `(seed, index)` and reduced in index order with pairwise
//! summation, so results do not depend on the rayon schedule.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::analytics::{closed_form_report, AnalyticsError, DesignVariables, Model, Receiver};
use crate::channel::{backscatter_matrix, draw_channels, draw_rng, Stream};
use crate::estimation::{
    build_pilots, estimate_ls, estimate_mmse, pilot_length, simulate_ce_rx, EstimationError,
    Estimator,
};
use crate::scenario::{carrier_power, ScenarioError, SystemConfig, TagLinkStats};

/// Condition-number cap of `Ĥ_m^H Ĥ_m` beyond which a ZF draw is discarded.
pub const ZF_CONDITION_CAP: f64 = 1e10;
/// Largest tolerated fraction of discarded ZF draws.
pub const MAX_DISCARD_FRACTION: f64 = 1e-3;

#[derive(Debug, Error, PartialEq)]
pub enum McError {
    #[error("at least 2 draws are required, got {0}")]
    TooFewDraws(usize),
    #[error("{discarded} of {n} ZF draws were ill-conditioned")]
    TooManyDiscarded { discarded: usize, n: usize },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_draws: usize,
}

/// Pairwise sum; the summation tree depends only on the slice length.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 16 {
        return x.iter().sum();
    }
    let mid = x.len() / 2;
    pairwise_sum(&x[..mid]) + pairwise_sum(&x[mid..])
}

impl McEstimate {
    pub fn from_samples(x: &[f64]) -> Self {
        let n = x.len();
        let mean = pairwise_sum(x) / n as f64;
        let dev: Vec<f64> = x.iter().map(|v| (v - mean) * (v - mean)).collect();
        let var = if n > 1 { pairwise_sum(&dev) / (n - 1) as f64 } else { f64::NAN };
        Self { mean, std_error: (var / n as f64).sqrt(), n_draws: n }
    }
}

/// How each draw's reflected power `p_k` is set inside the SINR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ReflectPower {
    /// `p_k = δ_k E{P_Ik}`, with the expectation taken over the same draws.
    Expected,
    /// `p_k = δ_k p |Φ^T h_k^f|²` of the current draw.
    PerRealization,
}

/// Monte Carlo controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McSettings {
    pub n: usize,
    pub seed: u64,
    pub reflect: ReflectPower,
    /// Removes receiver noise from the CE slot only.
    pub perfect_ce: bool,
}

impl McSettings {
    pub fn new(n: usize, seed: u64) -> Self {
        Self { n, seed, reflect: ReflectPower::Expected, perfect_ce: false }
    }
}

/// Everything kept from one draw.
#[derive(Debug, Clone, PartialEq)]
struct DrawOutcome {
    incident: Vec<f64>,
    /// `|q_k^H h_i^b|²`, row-major in `(k, i)`; empty when the draw was discarded.
    gains: Vec<f64>,
    q_norm: Vec<f64>,
    below_tau: usize,
}

/// Energy beam `Φ = Σ_k √ζ_k ĥ_kr^* / ‖ĥ_kr‖` from the reference receive row.
pub fn energy_beam(h_hat: &[DMatrix<Complex64>], zeta: &[f64]) -> Vec<Complex64> {
    let m = h_hat[0].ncols();
    let mut phi = vec![Complex64::new(0.0, 0.0); m];
    for (h, &z) in h_hat.iter().zip(zeta) {
        let row = h.row(0);
        let norm = row.norm();
        if norm == 0.0 || z == 0.0 {
            continue;
        }
        let w = z.sqrt() / norm;
        for (p, v) in phi.iter_mut().zip(row.iter()) {
            *p += v.conj() * w;
        }
    }
    phi
}

/// Detector `Q`: `Ĥ_m` for MRC, `Ĥ_m (Ĥ_m^H Ĥ_m)^{-1}` for ZF. `None` when the
/// ZF Gram matrix exceeds the condition-number cap.
pub fn detector(h_m: &DMatrix<Complex64>, receiver: Receiver) -> Option<DMatrix<Complex64>> {
    match receiver {
        Receiver::Mrc => Some(h_m.clone()),
        Receiver::Zf => {
            let gram = h_m.adjoint() * h_m;
            let sv = gram.singular_values();
            let (lo, hi) = (sv.min(), sv.max());
            if !(lo > 0.0) || hi / lo > ZF_CONDITION_CAP {
                return None;
            }
            gram.try_inverse().map(|inv| h_m * inv)
        }
    }
}

struct Prepared {
    model: Model,
    stats: TagLinkStats,
    cfg: SystemConfig,
    p: f64,
    pilots: crate::estimation::PilotDesign,
    ce_sigma2: f64,
}

fn prepare(cfg: &SystemConfig, design: &DesignVariables, settings: &McSettings) -> Result<Prepared, McError> {
    if settings.n < 2 {
        return Err(McError::TooFewDraws(settings.n));
    }
    let stats = cfg.link_stats()?;
    let model = Model::new(cfg, &stats);
    let d = pilot_length(design.alpha, cfg.k, cfg.m)?;
    let pilots = build_pilots(cfg.m, d, design.p_ce)?;
    let p = carrier_power(cfg.w, cfg.t, design.alpha, design.p_ce)?;
    let ce_sigma2 = if settings.perfect_ce { 0.0 } else { cfg.noise_power };
    Ok(Prepared { model, stats, cfg: cfg.clone(), p, pilots, ce_sigma2 })
}

fn simulate_draw(
    prep: &Prepared,
    design: &DesignVariables,
    method: Estimator,
    receiver: Option<Receiver>,
    seed: u64,
    index: u64,
) -> Result<DrawOutcome, EstimationError> {
    let cfg = &prep.cfg;
    let real = draw_channels(cfg, &prep.stats, seed, index);
    let mut noise = draw_rng(seed, Stream::PilotNoise, index);
    let mut h_hat = Vec::with_capacity(cfg.k);
    for k in 0..cfg.k {
        let h = backscatter_matrix(&real, k).expect("tag index within K");
        let y = simulate_ce_rx(&h, &prep.pilots, cfg.delta[k], prep.ce_sigma2, &mut noise);
        let est = match method {
            Estimator::Ls => estimate_ls(&y, &prep.pilots, cfg.delta[k])?,
            Estimator::Mmse => {
                estimate_mmse(&y, &prep.pilots, cfg.delta[k], prep.stats.beta[k], prep.ce_sigma2.max(f64::MIN_POSITIVE))?
            }
        };
        h_hat.push(est);
    }
    let beam = energy_beam(&h_hat, &design.zeta);
    let incident: Vec<f64> = real
        .forward
        .iter()
        .map(|hf| {
            let s: Complex64 = beam.iter().zip(hf.iter()).map(|(a, b)| a * b).sum();
            prep.p * s.norm_sqr()
        })
        .collect();
    let below_tau = real.forward.iter().filter(|hf| hf[0].norm_sqr() < prep.model.tau).count();
    let (mut gains, mut q_norm) = (Vec::new(), Vec::new());
    if let Some(rx) = receiver {
        let h_m = DMatrix::from_fn(cfg.r, cfg.k, |r, k| h_hat[k][(r, 0)]);
        if let Some(q) = detector(&h_m, rx) {
            gains.reserve(cfg.k * cfg.k);
            for k in 0..cfg.k {
                let qk = q.column(k);
                q_norm.push(qk.norm_squared());
                for hb in &real.backward {
                    gains.push(qk.dotc(hb).norm_sqr());
                }
            }
        }
    }
    Ok(DrawOutcome { incident, gains, q_norm, below_tau })
}

fn run_draws(
    prep: &Prepared,
    design: &DesignVariables,
    method: Estimator,
    receiver: Option<Receiver>,
    settings: &McSettings,
) -> Result<Vec<DrawOutcome>, McError> {
    let out: Result<Vec<_>, EstimationError> = (0..settings.n as u64)
        .into_par_iter()
        .map(|i| simulate_draw(prep, design, method, receiver, settings.seed, i))
        .collect();
    Ok(out?)
}

fn incident_estimates(draws: &[DrawOutcome], k: usize) -> Vec<McEstimate> {
    (0..k)
        .map(|j| McEstimate::from_samples(&draws.iter().map(|d| d.incident[j]).collect::<Vec<_>>()))
        .collect()
}

/// Per-tag incident power `p E{|Φ^T h_k^f|²}`.
pub fn mc_incident_power(
    cfg: &SystemConfig,
    design: &DesignVariables,
    method: Estimator,
    settings: &McSettings,
) -> Result<Vec<McEstimate>, McError> {
    let prep = prepare(cfg, design, settings)?;
    let draws = run_draws(&prep, design, method, None, settings)?;
    Ok(incident_estimates(&draws, cfg.k))
}

/// Monte Carlo rates together with the incident power of the same draws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McRateReport {
    pub rates: Vec<McEstimate>,
    /// Per-draw sum over tags of the rates.
    pub sum_rate: McEstimate,
    pub incident: Vec<McEstimate>,
    /// ZF draws dropped for ill-conditioning.
    pub discarded: usize,
    /// Fraction of reference forward coefficients with `|h|² < τ`.
    pub below_tau_fraction: f64,
}

/// Per-tag ergodic rate `E{log2(1 + γ_k)}`.
pub fn mc_rate(
    cfg: &SystemConfig,
    design: &DesignVariables,
    method: Estimator,
    receiver: Receiver,
    settings: &McSettings,
) -> Result<McRateReport, McError> {
    receiver.check(cfg.r, cfg.k)?;
    let prep = prepare(cfg, design, settings)?;
    let draws = run_draws(&prep, design, method, Some(receiver), settings)?;
    let k_tags = cfg.k;
    let incident = incident_estimates(&draws, k_tags);
    let kept: Vec<&DrawOutcome> = draws.iter().filter(|d| !d.gains.is_empty()).collect();
    let discarded = draws.len() - kept.len();
    if discarded as f64 > MAX_DISCARD_FRACTION * draws.len() as f64 || kept.len() < 2 {
        return Err(McError::TooManyDiscarded { discarded, n: draws.len() });
    }
    let expected: Vec<f64> = (0..k_tags).map(|k| cfg.delta[k] * incident[k].mean).collect();
    let sigma2 = cfg.noise_power;
    let per_draw: Vec<Vec<f64>> = kept
        .iter()
        .map(|d| {
            let p: Vec<f64> = match settings.reflect {
                ReflectPower::Expected => expected.clone(),
                ReflectPower::PerRealization => {
                    (0..k_tags).map(|k| cfg.delta[k] * d.incident[k]).collect()
                }
            };
            (0..k_tags)
                .map(|k| {
                    let row = &d.gains[k * k_tags..(k + 1) * k_tags];
                    let signal = p[k] * row[k];
                    let interf: f64 =
                        (0..k_tags).filter(|&i| i != k).map(|i| p[i] * row[i]).sum();
                    (signal / (interf + d.q_norm[k] * sigma2)).ln_1p() / std::f64::consts::LN_2
                })
                .collect()
        })
        .collect();
    let rates = (0..k_tags)
        .map(|k| McEstimate::from_samples(&per_draw.iter().map(|r| r[k]).collect::<Vec<_>>()))
        .collect();
    let sums: Vec<f64> = per_draw.iter().map(|r| r.iter().sum()).collect();
    let below: usize = draws.iter().map(|d| d.below_tau).sum();
    Ok(McRateReport {
        rates,
        sum_rate: McEstimate::from_samples(&sums),
        incident,
        discarded,
        below_tau_fraction: below as f64 / (draws.len() * k_tags) as f64,
    })
}

/// Swept quantity of a gap study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepAxis {
    M,
    R,
    /// CE SNR `β̄² α p_ce δ̄ / (K σ²)` in dB, set through `p_ce`.
    Snr,
    /// Effective SNR `β̄² / σ²` in dB, set through `σ²`.
    EffectiveSnr,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::M => "M",
            SweepAxis::R => "R",
            SweepAxis::Snr => "snr_dB",
            SweepAxis::EffectiveSnr => "effective_snr_dB",
        }
    }
}

/// One sweep point of a gap study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapPoint {
    pub x: f64,
    /// `P_U / P_L` per tag.
    pub delta_p: Vec<f64>,
    pub p_lower: Vec<f64>,
    pub p_upper: Vec<f64>,
    pub p_mc: Vec<McEstimate>,
    /// Closed-form `R̃_k`; empty without a receiver.
    pub r_tilde: Vec<f64>,
    pub r_sim: Vec<McEstimate>,
    /// `Σ_k R_sim / Σ_k R̃`.
    pub delta_r: f64,
    pub delta_r_se: f64,
    pub below_tau_fraction: f64,
}

/// Bound and rate gaps along one axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub axis: SweepAxis,
    pub estimator: Estimator,
    pub receiver: Option<Receiver>,
    pub points: Vec<GapPoint>,
}

/// Mean of the large-scale gains.
pub fn mean_beta(stats: &TagLinkStats) -> f64 {
    stats.beta.iter().sum::<f64>() / stats.beta.len() as f64
}

/// Scenario and design at one sweep coordinate.
pub fn sweep_point(
    template: &SystemConfig,
    design: &DesignVariables,
    axis: SweepAxis,
    x: f64,
) -> Result<(SystemConfig, DesignVariables), McError> {
    let mut cfg = template.clone();
    let mut design = design.clone();
    let stats = cfg.link_stats()?;
    let bbar = mean_beta(&stats);
    let lin = 10f64.powf(x / 10.0);
    match axis {
        SweepAxis::M => cfg.m = x.round() as usize,
        SweepAxis::R => cfg.r = x.round() as usize,
        SweepAxis::Snr => {
            let dbar = cfg.delta.iter().sum::<f64>() / cfg.k as f64;
            design.p_ce = lin * cfg.k as f64 * cfg.noise_power / (bbar * bbar * design.alpha as f64 * dbar);
        }
        SweepAxis::EffectiveSnr => cfg.noise_power = bbar * bbar / lin,
    }
    cfg.validate()?;
    Ok((cfg, design))
}

/// Bound gap `P_U/P_L` and, with a receiver, rate gap `R_sim/R̃` along `axis`.
pub fn gap_sweep(
    template: &SystemConfig,
    design: &DesignVariables,
    axis: SweepAxis,
    values: &[f64],
    method: Estimator,
    receiver: Option<Receiver>,
    settings: &McSettings,
) -> Result<GapReport, McError> {
    let points = values
        .iter()
        .map(|&x| {
            let (cfg, design) = sweep_point(template, design, axis, x)?;
            let model = Model::from_config(&cfg)?;
            let rx_for_bounds = receiver.unwrap_or(Receiver::Mrc);
            let mut bound_model = model.clone();
            bound_model.r = bound_model.r.max(rx_for_bounds.min_antennas(cfg.k));
            let closed = closed_form_report(&bound_model, &design, method, rx_for_bounds)?;
            let p_lower: Vec<f64> = closed.tags.iter().map(|t| t.p_i_lower).collect();
            let p_upper: Vec<f64> = closed.tags.iter().map(|t| t.p_i_upper).collect();
            let delta_p = p_lower.iter().zip(&p_upper).map(|(l, u)| u / l).collect();
            let mut point = GapPoint {
                x,
                delta_p,
                p_lower,
                p_upper,
                p_mc: Vec::new(),
                r_tilde: Vec::new(),
                r_sim: Vec::new(),
                delta_r: f64::NAN,
                delta_r_se: f64::NAN,
                below_tau_fraction: f64::NAN,
            };
            match receiver {
                Some(rx) => {
                    let mc = mc_rate(&cfg, &design, method, rx, settings)?;
                    let r_tilde: Vec<f64> = closed.tags.iter().map(|t| t.rate_exact).collect();
                    let total: f64 = r_tilde.iter().sum();
                    point.delta_r = mc.sum_rate.mean / total;
                    point.delta_r_se = mc.sum_rate.std_error / total;
                    point.r_tilde = r_tilde;
                    point.r_sim = mc.rates;
                    point.p_mc = mc.incident;
                    point.below_tau_fraction = mc.below_tau_fraction;
                }
                None => point.p_mc = mc_incident_power(&cfg, &design, method, settings)?,
            }
            Ok(point)
        })
        .collect::<Result<Vec<_>, McError>>()?;
    Ok(GapReport { axis, estimator: method, receiver, points })
}
