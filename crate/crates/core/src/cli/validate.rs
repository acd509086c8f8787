//! Invariant battery behind `--figure validate`.
//!
//! Each check records what it measured and the limit it was held to. Failed
//! checks are reported, never hidden.

use rayon::prelude::*;
use serde::Serialize;

use super::CliError;
use crate::analytics::{
    bound_factors, closed_form_report, exp_integral_e1, phi, phi_argument, DesignVariables, Model,
    Receiver,
};
use crate::channel::{backscatter_matrix, draw_channels, draw_rng, Stream};
use crate::estimation::{
    build_pilots, error_var, estimate_ls, estimate_mmse, pilot_length, simulate_ce_rx, Estimator,
};
use crate::montecarlo::{mc_incident_power, mc_rate, pairwise_sum, McSettings};
use crate::optimizer::{solve_maxmin_rate, SolverParams};
use crate::scenario::SystemConfig;

/// One invariant check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub module: String,
    pub passed: bool,
    pub measured: f64,
    pub limit: f64,
}

/// All checks of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub draws: usize,
    pub seed: u64,
    pub passed: usize,
    pub failed: usize,
    pub checks: Vec<Check>,
}

/// Relative tolerance of a Monte Carlo mean over `n` draws.
pub fn mc_limit(n: usize) -> f64 {
    (4.0 / (n as f64).sqrt()).max(0.02)
}

fn check(module: &str, name: &str, measured: f64, limit: f64) -> Check {
    Check {
        name: name.to_string(),
        module: module.to_string(),
        passed: measured <= limit,
        measured,
        limit,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

struct CeDraw {
    ls_err: f64,
    mmse_err: f64,
    mmse_cross: num_complex::Complex64,
}

fn ce_draws(cfg: &SystemConfig, n: usize, seed: u64) -> Result<Vec<CeDraw>, CliError> {
    let stats = cfg.link_stats()?;
    let d = pilot_length(cfg.alpha, cfg.k, cfg.m).map_err(crate::montecarlo::McError::from)?;
    let pilots = build_pilots(cfg.m, d, cfg.p_ce).map_err(crate::montecarlo::McError::from)?;
    let (beta, delta, s2) = (stats.beta[0], cfg.delta[0], cfg.noise_power);
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let real = draw_channels(cfg, &stats, seed, i);
            let h = backscatter_matrix(&real, 0).expect("tag 0 exists");
            let mut rng = draw_rng(seed, Stream::PilotNoise, i);
            let y = simulate_ce_rx(&h, &pilots, delta, s2, &mut rng);
            let ls = estimate_ls(&y, &pilots, delta).map_err(crate::montecarlo::McError::from)?;
            let mmse = estimate_mmse(&y, &pilots, delta, beta, s2).map_err(crate::montecarlo::McError::from)?;
            let e = mmse[(0, 0)] - h[(0, 0)];
            Ok(CeDraw {
                ls_err: (ls[(0, 0)] - h[(0, 0)]).norm_sqr(),
                mmse_err: e.norm_sqr(),
                mmse_cross: e * mmse[(0, 0)].conj(),
            })
        })
        .collect()
}

/// Runs every check on `cfg` with `n` Monte Carlo draws.
pub fn validate_suite(cfg: &SystemConfig, n: usize, seed: u64) -> Result<ValidationReport, CliError> {
    cfg.validate()?;
    let lim = mc_limit(n);
    let stats = cfg.link_stats()?;
    let model = Model::from_config(cfg)?;
    let mut checks = Vec::new();

    let p = cfg.carrier_power()?;
    let spent = (cfg.alpha as f64 * cfg.p_ce + (cfg.t - cfg.alpha) as f64 * p) / (cfg.w * cfg.t as f64);
    checks.push(check("scenario", "energy_budget_met", (spent - 1.0).abs(), 1e-12));

    for k in 0..cfg.k {
        let samples: Vec<f64> = (0..n as u64)
            .into_par_iter()
            .map(|i| draw_channels(cfg, &stats, seed, i).forward[k][0].norm_sqr())
            .collect();
        let mean = pairwise_sum(&samples) / n as f64;
        checks.push(check("channel", &format!("forward_power_t{}", k + 1), rel(mean, stats.beta[k]), lim));
    }

    let ce = ce_draws(cfg, n, seed)?;
    let d = cfg.alpha / cfg.k;
    let b0 = stats.beta[0];
    for (method, field) in [(Estimator::Ls, 0), (Estimator::Mmse, 1)] {
        let v: Vec<f64> = ce.iter().map(|c| if field == 0 { c.ls_err } else { c.mmse_err }).collect();
        let want = error_var(method, b0, cfg.noise_power, d, cfg.p_ce, cfg.delta[0]);
        checks.push(check(
            "estimation",
            &format!("{}_error_variance", method.name()),
            rel(pairwise_sum(&v) / n as f64, want),
            lim,
        ));
    }
    let re: Vec<f64> = ce.iter().map(|c| c.mmse_cross.re).collect();
    let im: Vec<f64> = ce.iter().map(|c| c.mmse_cross.im).collect();
    let cross = (pairwise_sum(&re).powi(2) + pairwise_sum(&im).powi(2)).sqrt() / n as f64;
    checks.push(check("estimation", "mmse_error_orthogonal_to_estimate", cross / (b0 * b0), lim));

    let e1_ref = 0.596_347_362_323_194_1;
    let e1 = exp_integral_e1(1.0)? * std::f64::consts::E;
    checks.push(check("analytics", "e1_at_one", (e1 - e1_ref).abs(), 1e-13));
    let mut phi_excursion: f64 = 0.0;
    let mut sandwich: f64 = 0.0;
    for i in 0..=80 {
        let p_ce = 10f64.powf(-6.0 + 0.1 * i as f64);
        for method in Estimator::ALL {
            for k in 0..cfg.k {
                let x = phi_argument(method, cfg.k, cfg.noise_power, stats.beta[k], cfg.alpha, p_ce, cfg.delta[k]);
                let f = phi(x)?;
                phi_excursion = phi_excursion.max((-f).max(f - 1.0));
                let (l1, l2) = bound_factors(x);
                sandwich = sandwich.max((l1 - (1.0 - f)).max((1.0 - f) - l2));
            }
        }
    }
    checks.push(check("analytics", "phi_in_unit_interval", phi_excursion, 0.0));
    checks.push(check("analytics", "bound_factor_sandwich", sandwich, 1e-12));

    let params = SolverParams::default();
    let pinned = (cfg.alpha, cfg.p_ce);
    let first = solve_maxmin_rate(&model, Receiver::Mrc, Estimator::Ls, pinned, &params);
    let second = solve_maxmin_rate(&model, Receiver::Mrc, Estimator::Ls, pinned, &params);
    let feasible = first.as_ref().map(|r| r.feasible).unwrap_or(false);
    checks.push(check("optimizer", "default_design_feasible", if feasible { 0.0 } else { 1.0 }, 0.0));
    let same = match (&first, &second) {
        (Ok(a), Ok(b)) => a == b,
        (Err(a), Err(b)) => a.to_string() == b.to_string(),
        _ => false,
    };
    checks.push(check("optimizer", "deterministic", if same { 0.0 } else { 1.0 }, 0.0));

    let design = DesignVariables::uniform(cfg.k, cfg.alpha, cfg.p_ce);
    let settings = McSettings::new(n, seed);
    let a = mc_incident_power(cfg, &design, Estimator::Ls, &settings)?;
    let b = mc_incident_power(cfg, &design, Estimator::Ls, &settings)?;
    checks.push(check("montecarlo", "deterministic", if a == b { 0.0 } else { 1.0 }, 0.0));
    let big = mc_incident_power(cfg, &design, Estimator::Ls, &McSettings::new(4 * n, seed))?;
    checks.push(check("montecarlo", "std_error_halves_at_4n", rel(a[0].std_error / big[0].std_error, 2.0), 0.2));

    for method in Estimator::ALL {
        let closed = closed_form_report(&model, &design, method, Receiver::Mrc)?;
        let mc = mc_incident_power(cfg, &design, method, &settings)?;
        let mut excursion: f64 = 0.0;
        for (t, e) in closed.tags.iter().zip(&mc) {
            let slack = 3.0 * e.std_error;
            excursion = excursion
                .max((t.p_i_lower - slack - e.mean) / t.p_i_lower)
                .max((e.mean - t.p_i_upper - slack) / t.p_i_upper);
        }
        checks.push(check("montecarlo", &format!("{}_incident_power_sandwich", method.name()), excursion, 0.0));
    }
    for rx in Receiver::ALL {
        if rx.check(cfg.r, cfg.k).is_err() {
            continue;
        }
        let closed = closed_form_report(&model, &design, Estimator::Ls, rx)?;
        let mc = mc_rate(cfg, &design, Estimator::Ls, rx, &settings)?;
        let excess = closed
            .tags
            .iter()
            .zip(&mc.rates)
            .map(|(t, r)| (t.rate_exact - r.mean - 3.0 * r.std_error) / t.rate_exact)
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(check("montecarlo", &format!("{}_jensen_rate_above_closed_form", rx.name()), excess, 0.0));
    }

    let failed = checks.iter().filter(|c| !c.passed).count();
    Ok(ValidationReport { draws: n, seed, passed: checks.len() - failed, failed, checks })
}
