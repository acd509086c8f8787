//! Pilot design, the channel-estimation slot and the LS / MMSE estimators.
//!
//! Tags reflect the pilot block one at a time, so each tag owns `D = α/K`
//! symbols. The reader sends `G B^{1/2}` with `G` the first `M` columns of the
//! normalized size-`D` DFT basis and `B = D p_ce I`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::channel::complex_gaussian;

#[derive(Debug, Error, PartialEq)]
pub enum EstimationError {
    #[error("pilot length D = {d} is shorter than the antenna count M = {m}")]
    PilotTooShort { d: usize, m: usize },
    #[error("pilot power must be positive, got {0}")]
    BadPilotPower(f64),
    #[error("CE duration alpha = {alpha} is not a positive multiple of K = {k}")]
    AlphaNotMultiple { alpha: usize, k: usize },
    #[error("reflection coefficient is zero: channel unobservable")]
    SilentTag,
    #[error("non-positive large-scale gain {0}")]
    BadBeta(f64),
    #[error("zero backward coefficient")]
    ZeroBackward,
}

/// Channel estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Estimator {
    Ls,
    Mmse,
}

impl Estimator {
    pub const ALL: [Estimator; 2] = [Estimator::Ls, Estimator::Mmse];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Ls => "ls",
            Estimator::Mmse => "mmse",
        }
    }
}

/// Orthogonal pilot block.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotDesign {
    /// D×M with orthonormal columns.
    pub g: DMatrix<Complex64>,
    /// Common diagonal entry of `B`, equal to `D p_ce`.
    pub b: f64,
    pub d: usize,
    pub p_ce: f64,
}

/// Per-tag pilot length for a CE slot of `alpha` symbols shared by `k` tags.
pub fn pilot_length(alpha: usize, k: usize, m: usize) -> Result<usize, EstimationError> {
    if alpha == 0 || alpha % k != 0 {
        return Err(EstimationError::AlphaNotMultiple { alpha, k });
    }
    let d = alpha / k;
    if d < m {
        return Err(EstimationError::PilotTooShort { d, m });
    }
    Ok(d)
}

/// Builds the DFT pilot design.
pub fn build_pilots(m: usize, d: usize, p_ce: f64) -> Result<PilotDesign, EstimationError> {
    if d < m {
        return Err(EstimationError::PilotTooShort { d, m });
    }
    if !(p_ce > 0.0) {
        return Err(EstimationError::BadPilotPower(p_ce));
    }
    let norm = 1.0 / (d as f64).sqrt();
    let g = DMatrix::from_fn(d, m, |t, j| {
        let phase = -2.0 * PI * ((t * j) % d) as f64 / d as f64;
        Complex64::from_polar(norm, phase)
    });
    Ok(PilotDesign { g, b: d as f64 * p_ce, d, p_ce })
}

/// Received CE block `Y = √δ H (G B^{1/2})^T + N` of one tag, R×D.
pub fn simulate_ce_rx<R: Rng + ?Sized>(
    h: &DMatrix<Complex64>,
    pilots: &PilotDesign,
    delta: f64,
    sigma2: f64,
    rng: &mut R,
) -> DMatrix<Complex64> {
    let scale = Complex64::new((delta * pilots.b).sqrt(), 0.0);
    let mut y = h * pilots.g.transpose() * scale;
    if sigma2 > 0.0 {
        for v in y.iter_mut() {
            *v += complex_gaussian(rng, sigma2);
        }
    }
    y
}

/// LS estimate `Ĥ = Y δ^{-1/2} G* B^{-1/2}`.
pub fn estimate_ls(
    y: &DMatrix<Complex64>,
    pilots: &PilotDesign,
    delta: f64,
) -> Result<DMatrix<Complex64>, EstimationError> {
    if !(delta > 0.0) {
        return Err(EstimationError::SilentTag);
    }
    let scale = Complex64::new(1.0 / (delta * pilots.b).sqrt(), 0.0);
    Ok(y * pilots.g.map(|z| z.conj()) * scale)
}

/// Linear MMSE estimate under the prior `E|[H]_rm|² = β²`: a per-entry shrink of LS.
pub fn estimate_mmse(
    y: &DMatrix<Complex64>,
    pilots: &PilotDesign,
    delta: f64,
    beta: f64,
    sigma2: f64,
) -> Result<DMatrix<Complex64>, EstimationError> {
    if !(beta > 0.0) {
        return Err(EstimationError::BadBeta(beta));
    }
    let ls = estimate_ls(y, pilots, delta)?;
    let shrink = mmse_shrink(beta, ls_error_var(sigma2, pilots.d, pilots.p_ce, delta));
    Ok(ls * Complex64::new(shrink, 0.0))
}

/// `β² / (β² + σ_LS²)`.
pub fn mmse_shrink(beta: f64, ls_var: f64) -> f64 {
    let b2 = beta * beta;
    b2 / (b2 + ls_var)
}

/// Per-entry LS error variance `σ² / (D p_ce δ)`.
pub fn ls_error_var(sigma2: f64, d: usize, p_ce: f64, delta: f64) -> f64 {
    sigma2 / (d as f64 * p_ce * delta)
}

/// Per-entry MMSE error variance `β² / (1 + δ β² D p_ce / σ²)`.
pub fn mmse_error_var(beta: f64, sigma2: f64, d: usize, p_ce: f64, delta: f64) -> f64 {
    let b2 = beta * beta;
    b2 / (1.0 + delta * b2 * d as f64 * p_ce / sigma2)
}

/// Backscatter error variance of either estimator.
pub fn error_var(method: Estimator, beta: f64, sigma2: f64, d: usize, p_ce: f64, delta: f64) -> f64 {
    match method {
        Estimator::Ls => ls_error_var(sigma2, d, p_ce, delta),
        Estimator::Mmse => mmse_error_var(beta, sigma2, d, p_ce, delta),
    }
}

/// Estimated backscatter matrices of all tags.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSet {
    pub method: Estimator,
    pub h_hat: Vec<DMatrix<Complex64>>,
    pub err_var: Vec<f64>,
}

/// Quantities shared by the forward-error-variance formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CeParams {
    pub k: usize,
    pub sigma2: f64,
    pub alpha: usize,
    pub p_ce: f64,
    pub delta: f64,
    pub beta: f64,
}

/// Variance of the forward-channel estimate `ĥ_kr / h_kr^b` around `h_k^f`.
pub fn forward_error_var(
    method: Estimator,
    h_kr_b: Complex64,
    params: &CeParams,
) -> Result<f64, EstimationError> {
    let h2 = h_kr_b.norm_sqr();
    if h2 == 0.0 {
        return Err(EstimationError::ZeroBackward);
    }
    let energy = params.alpha as f64 * params.p_ce * params.delta;
    let ks2 = params.k as f64 * params.sigma2;
    Ok(match method {
        Estimator::Ls => ks2 / (h2 * energy),
        Estimator::Mmse => {
            let b2 = params.beta * params.beta;
            b2 / (h2 * (1.0 + b2 * energy / ks2))
        }
    })
}

/// Gaussian posterior of `h_k^f` given its estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPosterior {
    pub mean: DVector<Complex64>,
    /// Common diagonal of the (scaled identity) covariance.
    pub cov: f64,
}

/// Posterior of `h_k^f` given `ĥ_k^f`, the backward coefficient and the
/// backscatter error variance.
pub fn forward_posterior(
    h_hat_f: &DVector<Complex64>,
    h_kr_b: Complex64,
    beta: f64,
    err_var: f64,
) -> ForwardPosterior {
    let g = h_kr_b.norm_sqr() * beta;
    let denom = g + err_var;
    ForwardPosterior {
        mean: h_hat_f * Complex64::new(g / denom, 0.0),
        cov: beta * err_var / denom,
    }
}
