//! Figure and sweep jobs, one table each.

use rayon::prelude::*;

use super::table::{flag, num, Table};
use super::CliError;
use crate::analytics::{
    benchmark_omni, incident_power_bounds, DesignVariables, Model, Receiver,
};
use crate::estimation::Estimator;
use crate::montecarlo::{gap_sweep, mc_incident_power, GapReport, McSettings, SweepAxis};
use crate::optimizer::{
    solve_maxmin_energy, solve_maxmin_rate, solve_perfect_csi, OptimizationResult,
    OptimizerError, SolverParams,
};
use crate::scenario::SystemConfig;

/// Figure identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
pub enum FigureId {
    F2,
    F3,
    F4,
    F5,
    F6,
    F7,
    F8,
    F9,
    F10,
    /// Custom gap sweep along `--axis` over `--values`.
    Sweep,
    /// Invariant battery with a JSON report.
    Validate,
}

impl FigureId {
    pub fn name(self) -> &'static str {
        match self {
            FigureId::F2 => "F2",
            FigureId::F3 => "F3",
            FigureId::F4 => "F4",
            FigureId::F5 => "F5",
            FigureId::F6 => "F6",
            FigureId::F7 => "F7",
            FigureId::F8 => "F8",
            FigureId::F9 => "F9",
            FigureId::F10 => "F10",
            FigureId::Sweep => "sweep",
            FigureId::Validate => "validate",
        }
    }

    /// Figures whose columns come from Monte Carlo draws.
    pub fn uses_monte_carlo(self) -> bool {
        matches!(self, FigureId::F2 | FigureId::F3 | FigureId::F4 | FigureId::F5 | FigureId::Sweep | FigureId::Validate)
    }
}

/// Inputs shared by every job.
#[derive(Debug, Clone, PartialEq)]
pub struct RunContext {
    pub cfg: SystemConfig,
    pub draws: usize,
    pub seed: u64,
    pub estimator: Estimator,
    pub receiver: Receiver,
    pub solver: SolverParams,
}

impl RunContext {
    pub fn mc(&self) -> McSettings {
        McSettings::new(self.draws, self.seed)
    }

    fn pinned(&self) -> (usize, f64) {
        (self.cfg.alpha, self.cfg.p_ce)
    }

    fn uniform(&self, k: usize) -> DesignVariables {
        DesignVariables::uniform(k, self.cfg.alpha, self.cfg.p_ce)
    }
}

/// Antenna counts used by the antenna sweeps.
pub const ANTENNA_SWEEP: [usize; 9] = [4, 6, 8, 10, 12, 14, 16, 18, 20];
/// Transmit-antenna counts of the bound-tightness figure.
pub const BOUND_SWEEP: [usize; 5] = [4, 8, 12, 16, 20];

/// Single-tag version of a scenario (the first tag).
pub fn single_tag(cfg: &SystemConfig) -> SystemConfig {
    SystemConfig {
        k: 1,
        delta: vec![cfg.delta[0]],
        distances: vec![cfg.distances[0]],
        ..cfg.clone()
    }
}

/// Max-min rate outcome; infeasible points keep the best design with rate 0.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub feasible: bool,
    pub result: OptimizationResult,
}

impl Outcome {
    pub fn min_rate(&self) -> f64 {
        if self.feasible {
            self.result.min_rate()
        } else {
            0.0
        }
    }
}

fn outcome(r: Result<OptimizationResult, OptimizerError>) -> Result<Outcome, CliError> {
    match r {
        Ok(result) => Ok(Outcome { feasible: true, result }),
        Err(OptimizerError::Infeasible(result)) => Ok(Outcome { feasible: false, result: *result }),
        Err(e) => Err(e.into()),
    }
}

pub fn rate_design(model: &Model, rx: Receiver, est: Estimator, ctx: &RunContext) -> Result<Outcome, CliError> {
    outcome(solve_maxmin_rate(model, rx, est, ctx.pinned(), &ctx.solver))
}

pub fn energy_design(model: &Model, rx: Receiver, est: Estimator, ctx: &RunContext) -> Result<Outcome, CliError> {
    outcome(solve_maxmin_energy(model, rx, est, ctx.pinned(), &ctx.solver))
}

pub fn perfect_design(model: &Model, rx: Receiver, ctx: &RunContext) -> Result<Outcome, CliError> {
    outcome(solve_perfect_csi(model, rx, &ctx.solver))
}

fn min(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn names(parts: &[&str]) -> Vec<String> {
    parts.iter().map(|s| s.to_string()).collect()
}

fn par_rows<T: Sync>(
    points: &[T],
    f: impl Fn(&T) -> Result<Vec<String>, CliError> + Sync + Send,
) -> Result<Vec<Vec<String>>, CliError> {
    points.par_iter().map(f).collect()
}

/// Incident-power bounds and their MC estimate against the transmit-antenna count.
pub fn figure2(ctx: &RunContext) -> Result<Table, CliError> {
    let mut header = vec!["M".to_string()];
    for e in Estimator::ALL {
        let n = e.name();
        for col in ["p_lower_W", "p_upper_W", "bound_gap_pct", "p_mc_W", "p_mc_se_W"] {
            header.push(format!("{n}_{col}"));
        }
    }
    let mut table = Table::new("F2", header);
    let base = single_tag(&ctx.cfg);
    table.rows = par_rows(&BOUND_SWEEP, |&m| {
        let cfg = SystemConfig { m, ..base.clone() };
        cfg.validate()?;
        let model = Model::from_config(&cfg)?;
        let p = cfg.carrier_power()?;
        let design = DesignVariables { zeta: vec![1.0], alpha: cfg.alpha, p_ce: cfg.p_ce };
        let mut row = vec![m.to_string()];
        for e in Estimator::ALL {
            let (pl, pu) = incident_power_bounds(
                p, model.beta[0], 1.0, m, e, cfg.alpha, cfg.p_ce, cfg.delta[0], cfg.noise_power, 1,
            );
            let mc = mc_incident_power(&cfg, &design, e, &ctx.mc())?;
            row.extend([num(pl), num(pu), num(100.0 * (pu / pl - 1.0)), num(mc[0].mean), num(mc[0].std_error)]);
        }
        Ok(row)
    })?;
    Ok(table)
}

/// CE SNR grid of the bound-gap figure (dB).
pub fn snr_grid() -> Vec<f64> {
    (0..=40).map(|x| x as f64).collect()
}

/// Bound ratio `P_U/P_L` against the CE SNR.
pub fn figure3(ctx: &RunContext) -> Result<Table, CliError> {
    let cfg = single_tag(&ctx.cfg);
    let design = DesignVariables { zeta: vec![1.0], alpha: cfg.alpha, p_ce: cfg.p_ce };
    let grid = snr_grid();
    let reports: Vec<GapReport> = Estimator::ALL
        .iter()
        .map(|&e| gap_sweep(&cfg, &design, SweepAxis::Snr, &grid, e, None, &ctx.mc()))
        .collect::<Result<_, _>>()?;
    let mut header = names(&["snr_dB", "p_ce_W"]);
    for e in Estimator::ALL {
        for col in ["delta_p", "p_lower_W", "p_upper_W", "p_mc_W", "p_mc_se_W"] {
            header.push(format!("{}_{col}", e.name()));
        }
    }
    let mut table = Table::new("F3", header);
    for (i, &x) in grid.iter().enumerate() {
        let (_, d) = crate::montecarlo::sweep_point(&cfg, &design, SweepAxis::Snr, x)?;
        let mut row = vec![num(x), num(d.p_ce)];
        for rep in &reports {
            let p = &rep.points[i];
            row.extend([num(p.delta_p[0]), num(p.p_lower[0]), num(p.p_upper[0]), num(p.p_mc[0].mean), num(p.p_mc[0].std_error)]);
        }
        table.push(row);
    }
    Ok(table)
}

fn gap_table(name: &str, axis: SweepAxis, values: &[f64], ctx: &RunContext, receivers: &[Receiver]) -> Result<Table, CliError> {
    let k = ctx.cfg.k;
    let design = ctx.uniform(k);
    let reports: Vec<GapReport> = receivers
        .iter()
        .map(|&rx| gap_sweep(&ctx.cfg, &design, axis, values, ctx.estimator, Some(rx), &ctx.mc()))
        .collect::<Result<_, _>>()?;
    let mut header = vec![axis.name().to_string()];
    for rx in receivers {
        let r = rx.name();
        for col in ["rtilde_sum_bit_per_sym", "rsim_sum_bit_per_sym", "delta_r", "delta_r_se"] {
            header.push(format!("{r}_{col}"));
        }
        for t in 1..=k {
            header.push(format!("{r}_rtilde_t{t}_bit_per_sym"));
            header.push(format!("{r}_rsim_t{t}_bit_per_sym"));
            header.push(format!("{r}_rsim_t{t}_se_bit_per_sym"));
        }
        header.push(format!("{r}_below_tau_frac"));
    }
    let mut table = Table::new(name, header);
    for (i, &x) in values.iter().enumerate() {
        let mut row = vec![num(x)];
        for rep in &reports {
            let p = &rep.points[i];
            let total: f64 = p.r_tilde.iter().sum();
            row.extend([num(total), num(p.delta_r * total), num(p.delta_r), num(p.delta_r_se)]);
            for t in 0..k {
                row.extend([num(p.r_tilde[t]), num(p.r_sim[t].mean), num(p.r_sim[t].std_error)]);
            }
            row.push(num(p.below_tau_fraction));
        }
        table.push(row);
    }
    Ok(table)
}

/// Receive-antenna grid of the rate-gap and benchmark figures.
pub fn r_grid() -> Vec<f64> {
    ANTENNA_SWEEP.iter().map(|&r| r as f64).collect()
}

/// Effective-SNR grid (dB).
pub fn effective_snr_grid() -> Vec<f64> {
    (0..=8).map(|i| 5.0 * i as f64).collect()
}

/// Rate gap `R_sim/R̃` against the receive-antenna count.
pub fn figure4(ctx: &RunContext) -> Result<Table, CliError> {
    gap_table("F4", SweepAxis::R, &r_grid(), ctx, &Receiver::ALL)
}

/// Rate gap against the effective SNR.
pub fn figure5(ctx: &RunContext) -> Result<Table, CliError> {
    gap_table("F5", SweepAxis::EffectiveSnr, &effective_snr_grid(), ctx, &Receiver::ALL)
}

/// Custom gap sweep for the chosen receiver and estimator.
pub fn custom_sweep(ctx: &RunContext, axis: SweepAxis, values: &[f64]) -> Result<Table, CliError> {
    gap_table("sweep", axis, values, ctx, &[ctx.receiver])
}

/// Max-min rate of the proposed design and both benchmarks against `R`.
pub fn figure6(ctx: &RunContext) -> Result<Table, CliError> {
    let mut header = vec!["R".to_string()];
    for rx in Receiver::ALL {
        let r = rx.name();
        for e in Estimator::ALL {
            header.push(format!("{r}_proposed_{}_bit_per_sym", e.name()));
            header.push(format!("{r}_proposed_{}_feasible", e.name()));
        }
        header.push(format!("{r}_perfect_csi_bit_per_sym"));
        for e in Estimator::ALL {
            header.push(format!("{r}_omni_{}_bit_per_sym", e.name()));
        }
    }
    let mut table = Table::new("F6", header);
    table.rows = par_rows(&ANTENNA_SWEEP, |&r| {
        let cfg = SystemConfig { r, ..ctx.cfg.clone() };
        let model = Model::from_config(&cfg)?;
        let mut row = vec![r.to_string()];
        for rx in Receiver::ALL {
            for e in Estimator::ALL {
                let o = rate_design(&model, rx, e, ctx)?;
                row.extend([num(o.min_rate()), flag(o.feasible)]);
            }
            row.push(num(perfect_design(&model, rx, ctx)?.min_rate()));
            for e in Estimator::ALL {
                row.push(num(benchmark_omni(&model, e, rx, cfg.alpha, cfg.p_ce)?.min_rate()));
            }
        }
        Ok(row)
    })?;
    Ok(table)
}

/// Smallest harvested power of every scheme against `M`.
pub fn figure7(ctx: &RunContext) -> Result<Table, CliError> {
    let rx = ctx.receiver;
    let mut header = vec!["M".to_string()];
    for e in Estimator::ALL {
        header.push(format!("proposed_{}_pe_min_W", e.name()));
        header.push(format!("maxmin_energy_{}_pe_min_W", e.name()));
        header.push(format!("omni_{}_pe_min_W", e.name()));
    }
    header.push("perfect_csi_pe_min_W".into());
    let mut table = Table::new("F7", header);
    table.rows = par_rows(&ANTENNA_SWEEP, |&m| {
        let cfg = SystemConfig { m, ..ctx.cfg.clone() };
        let model = Model::from_config(&cfg)?;
        let mut row = vec![m.to_string()];
        for e in Estimator::ALL {
            let rate = rate_design(&model, rx, e, ctx)?;
            let energy = energy_design(&model, rx, e, ctx)?;
            let omni = benchmark_omni(&model, e, rx, cfg.alpha, cfg.p_ce)?;
            row.extend([
                num(min(&rate.result.per_tag_pe_lower)),
                num(min(&energy.result.per_tag_pe_lower)),
                num(min(&omni.harvested_power)),
            ]);
        }
        row.push(num(min(&perfect_design(&model, rx, ctx)?.result.per_tag_pe_lower)));
        Ok(row)
    })?;
    Ok(table)
}

/// Per-tag rates of the max-min-rate and max-min-energy designs against `R`.
pub fn figure8(ctx: &RunContext) -> Result<Table, CliError> {
    let k = ctx.cfg.k;
    let mut header = vec!["R".to_string()];
    for rx in Receiver::ALL {
        for design in ["maxmin_rate", "maxmin_energy"] {
            for e in Estimator::ALL {
                for t in 1..=k {
                    header.push(format!("{}_{design}_{}_t{t}_bit_per_sym", rx.name(), e.name()));
                }
            }
        }
    }
    let mut table = Table::new("F8", header);
    table.rows = par_rows(&ANTENNA_SWEEP, |&r| {
        let model = Model::from_config(&SystemConfig { r, ..ctx.cfg.clone() })?;
        let mut row = vec![r.to_string()];
        for rx in Receiver::ALL {
            for energy in [false, true] {
                for e in Estimator::ALL {
                    let o = if energy { energy_design(&model, rx, e, ctx)? } else { rate_design(&model, rx, e, ctx)? };
                    row.extend(o.result.per_tag_rates.iter().map(|&v| num(v)));
                }
            }
        }
        Ok(row)
    })?;
    Ok(table)
}

/// Per-tag harvested power of both designs against `M`.
pub fn figure9(ctx: &RunContext) -> Result<Table, CliError> {
    let k = ctx.cfg.k;
    let mut header = vec!["M".to_string()];
    for design in ["maxmin_rate", "maxmin_energy"] {
        for e in Estimator::ALL {
            for t in 1..=k {
                header.push(format!("{design}_{}_t{t}_pe_W", e.name()));
            }
        }
    }
    let mut table = Table::new("F9", header);
    table.rows = par_rows(&ANTENNA_SWEEP, |&m| {
        let model = Model::from_config(&SystemConfig { m, ..ctx.cfg.clone() })?;
        let mut row = vec![m.to_string()];
        for energy in [false, true] {
            for e in Estimator::ALL {
                let o = if energy {
                    energy_design(&model, ctx.receiver, e, ctx)?
                } else {
                    rate_design(&model, ctx.receiver, e, ctx)?
                };
                row.extend(o.result.per_tag_pe_lower.iter().map(|&v| num(v)));
            }
        }
        Ok(row)
    })?;
    Ok(table)
}

/// Rectifier-efficiency grid.
pub fn eta_grid() -> Vec<f64> {
    (1..=50).map(|i| i as f64 * 0.02).collect()
}

/// Reflection-coefficient grid.
pub fn delta_grid() -> Vec<f64> {
    (1..=49).map(|i| i as f64 * 0.02).collect()
}

/// Max-min rate against η and against δ (δ applied to every tag).
pub fn figure10(ctx: &RunContext) -> Result<Table, CliError> {
    let mut header = names(&["parameter", "value"]);
    for rx in Receiver::ALL {
        header.push(format!("{}_maxmin_{}_bit_per_sym", rx.name(), ctx.estimator.name()));
        header.push(format!("{}_feasible", rx.name()));
    }
    let mut table = Table::new("F10", header);
    let mut points: Vec<(&str, f64)> = eta_grid().into_iter().map(|v| ("eta", v)).collect();
    points.extend(delta_grid().into_iter().map(|v| ("delta", v)));
    table.rows = par_rows(&points, |&(param, v)| {
        let mut cfg = ctx.cfg.clone();
        match param {
            "eta" => cfg.eta = v,
            _ => cfg.delta = vec![v; cfg.k],
        }
        cfg.validate()?;
        let model = Model::from_config(&cfg)?;
        let mut row = vec![param.to_string(), num(v)];
        for rx in Receiver::ALL {
            let o = rate_design(&model, rx, ctx.estimator, ctx)?;
            row.extend([num(o.min_rate()), flag(o.feasible)]);
        }
        Ok(row)
    })?;
    Ok(table)
}
