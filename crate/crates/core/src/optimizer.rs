//! Max-min rate and max-min energy beamforming design.
//!
//! Both problems are solved in epigraph form: the merit of a design is the
//! smallest per-tag objective when every tag meets its harvested-power
//! constraint `P_E^L ≥ ρ`, and minus the relative constraint violation
//! otherwise, so any feasible design outranks every infeasible one. Local
//! refinement is coordinate descent from several starts: pairwise weight
//! transfers on the simplex and a log-scale search on `p_ce`, each a coarse
//! scan followed by golden-section refinement, and a full scan over the
//! discrete CE durations.

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::analytics::{benchmark_perfect_csi, lower_bound_core, rate, AnalyticsError, DesignVariables, Model, Receiver};
use crate::channel::{draw_rng, Stream};
use crate::estimation::Estimator;
use crate::scenario::carrier_power;

const GOLDEN: f64 = 0.618_033_988_749_894_9;
const SCAN_POINTS: usize = 24;
/// Share of the budget cap `wT/α` that `p_ce` may use.
pub const P_CE_CAP_FRACTION: f64 = 0.99;
/// Smallest `p_ce` searched, relative to the cap.
const P_CE_FLOOR_FRACTION: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("no feasible design found; best violation report: {0:?}")]
    Infeasible(Box<OptimizationResult>),
    #[error("no CE duration satisfies alpha = K*D with D >= M and alpha < T")]
    NoCeDuration,
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

/// Solver controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverParams {
    pub starts: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Optimize `(α, p_ce)` as well; otherwise they stay at the scenario values.
    pub optimize_ce: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self { starts: 16, tol: 1e-6, max_iter: 200, seed: 0, optimize_ce: false }
    }
}

/// Design goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Goal {
    MaxMinRate,
    MaxMinEnergy,
    /// Max-min rate of the perfect-CSI benchmark at carrier power `w`.
    PerfectCsiRate,
}

/// One accepted iterate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub start: usize,
    pub iteration: usize,
    pub merit: f64,
}

/// Solver output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub variables: DesignVariables,
    /// Min rate (bits/symbol) or min `P_E^L` (W), depending on the goal.
    pub objective: f64,
    pub per_tag_rates: Vec<f64>,
    pub per_tag_pe_lower: Vec<f64>,
    pub feasible: bool,
    pub solver_trace: Vec<TraceEntry>,
}

impl OptimizationResult {
    pub fn min_rate(&self) -> f64 {
        self.per_tag_rates.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Constraint that a design breaks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    Simplex { sum: f64 },
    NegativeWeight { tag: usize, value: f64 },
    CeDuration { alpha: usize },
    PilotPower { p_ce: f64 },
    EnergyBudget { alpha: usize, p_ce: f64 },
    Harvest { tag: usize, p_e_lower: f64, rho: f64 },
}

/// Result of [`is_feasible`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    pub violations: Vec<Violation>,
}

/// CE durations `α = K D` with `D ≥ M` and `α < T`.
pub fn ce_durations(model: &Model) -> Vec<usize> {
    (model.m..).map(|d| d * model.k).take_while(|&a| a < model.t).collect()
}

/// Largest admissible pilot power at `alpha`.
pub fn p_ce_cap(model: &Model, alpha: usize) -> f64 {
    P_CE_CAP_FRACTION * model.w * model.t as f64 / alpha as f64
}

/// Checks every constraint of the design problem.
pub fn is_feasible(model: &Model, design: &DesignVariables, method: Estimator) -> FeasibilityReport {
    let mut violations = Vec::new();
    let sum: f64 = design.zeta.iter().sum();
    if design.zeta.len() != model.k || (sum - 1.0).abs() > 1e-9 {
        violations.push(Violation::Simplex { sum });
    }
    for (tag, &value) in design.zeta.iter().enumerate() {
        if value < 0.0 {
            violations.push(Violation::NegativeWeight { tag, value });
        }
    }
    if !ce_durations(model).contains(&design.alpha) {
        violations.push(Violation::CeDuration { alpha: design.alpha });
    }
    if !(design.p_ce > 0.0) {
        violations.push(Violation::PilotPower { p_ce: design.p_ce });
    }
    let budget_ok = design.alpha < model.t
        && design.alpha as f64 * design.p_ce < model.w * model.t as f64;
    if !budget_ok {
        violations.push(Violation::EnergyBudget { alpha: design.alpha, p_ce: design.p_ce });
    }
    if violations.is_empty() {
        let (_, pe) = evaluate_raw(model, design, method, Receiver::Mrc);
        for (tag, &p_e_lower) in pe.iter().enumerate() {
            if p_e_lower < model.rho {
                violations.push(Violation::Harvest { tag, p_e_lower, rho: model.rho });
            }
        }
    }
    FeasibilityReport { feasible: violations.is_empty(), violations }
}

/// Lower-bound rates and `P_E^L` of a design that respects the budget.
fn evaluate_raw(
    model: &Model,
    design: &DesignVariables,
    method: Estimator,
    receiver: Receiver,
) -> (Vec<f64>, Vec<f64>) {
    let p = carrier_power(model.w, model.t, design.alpha, design.p_ce).unwrap_or(0.0);
    let ce = model.ce_stats(method, design.alpha, design.p_ce);
    let (sinr, pe) = lower_bound_core(model, design, p, &ce, receiver);
    (sinr.into_iter().map(rate).collect(), pe)
}

fn evaluate_perfect(model: &Model, zeta: &[f64], receiver: Receiver) -> (Vec<f64>, Vec<f64>) {
    match benchmark_perfect_csi(model, zeta, receiver, model.w) {
        Ok(b) => (b.rates, b.harvested_power),
        Err(_) => (vec![0.0; model.k], vec![0.0; model.k]),
    }
}

#[derive(Debug, Clone)]
struct Problem<'a> {
    model: &'a Model,
    method: Estimator,
    receiver: Receiver,
    goal: Goal,
}

#[derive(Debug, Clone, PartialEq)]
struct Point {
    design: DesignVariables,
    merit: f64,
}

impl Problem<'_> {
    fn evaluate(&self, design: &DesignVariables) -> (Vec<f64>, Vec<f64>) {
        match self.goal {
            Goal::PerfectCsiRate => evaluate_perfect(self.model, &design.zeta, self.receiver),
            _ => evaluate_raw(self.model, design, self.method, self.receiver),
        }
    }

    fn merit(&self, design: &DesignVariables) -> f64 {
        let (rates, pe) = self.evaluate(design);
        let rho = self.model.rho;
        match self.goal {
            Goal::MaxMinEnergy => pe.iter().cloned().fold(f64::INFINITY, f64::min),
            Goal::MaxMinRate | Goal::PerfectCsiRate => {
                let violation: f64 = pe.iter().map(|&v| ((rho - v) / rho).max(0.0)).sum();
                if violation > 0.0 {
                    -violation
                } else {
                    rates.iter().cloned().fold(f64::INFINITY, f64::min)
                }
            }
        }
    }

    fn point(&self, design: DesignVariables) -> Point {
        let merit = self.merit(&design);
        Point { design, merit }
    }

    /// Maximizes `f` on `[lo, hi]`: coarse scan, then golden section around the best cell.
    fn line_max(&self, lo: f64, hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
        let mut best = (lo, f(lo));
        let step = (hi - lo) / SCAN_POINTS as f64;
        for i in 1..=SCAN_POINTS {
            let x = lo + step * i as f64;
            let v = f(x);
            if v > best.1 {
                best = (x, v);
            }
        }
        let (mut a, mut b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
        let mut x1 = b - GOLDEN * (b - a);
        let mut x2 = a + GOLDEN * (b - a);
        let (mut f1, mut f2) = (f(x1), f(x2));
        while b - a > tol {
            if f1 >= f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - GOLDEN * (b - a);
                f1 = f(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + GOLDEN * (b - a);
                f2 = f(x2);
            }
        }
        for (x, v) in [(x1, f1), (x2, f2)] {
            if v > best.1 {
                best = (x, v);
            }
        }
        best
    }

    fn improve_zeta(&self, cur: &mut Point) {
        let k = self.model.k;
        for i in 0..k {
            for j in (i + 1)..k {
                let total = cur.design.zeta[i] + cur.design.zeta[j];
                let base = cur.design.clone();
                let with = |x: f64| {
                    let mut d = base.clone();
                    d.zeta[i] = x;
                    d.zeta[j] = total - x;
                    d
                };
                let (x, v) = self.line_max(0.0, total, 1e-10, |x| self.merit(&with(x)));
                if v > cur.merit {
                    *cur = Point { design: with(x), merit: v };
                }
            }
        }
    }

    fn improve_p_ce(&self, cur: &mut Point) {
        let cap = p_ce_cap(self.model, cur.design.alpha);
        let (lo, hi) = ((cap * P_CE_FLOOR_FRACTION).ln(), cap.ln());
        let base = cur.design.clone();
        let with = |x: f64| DesignVariables { p_ce: x.exp().min(cap), ..base.clone() };
        let (x, v) = self.line_max(lo, hi, 1e-9, |x| self.merit(&with(x)));
        if v > cur.merit {
            *cur = Point { design: with(x), merit: v };
        }
    }

    fn improve_alpha(&self, cur: &mut Point, durations: &[usize]) {
        for &alpha in durations {
            let p_ce = cur.design.p_ce.min(p_ce_cap(self.model, alpha));
            let cand = self.point(DesignVariables { alpha, p_ce, ..cur.design.clone() });
            if cand.merit > cur.merit {
                *cur = cand;
            }
        }
    }

    fn polish_zeta_grid(&self, cur: &mut Point) {
        let k = self.model.k;
        for i in 0..k {
            for j in (i + 1)..k {
                let total = cur.design.zeta[i] + cur.design.zeta[j];
                let centre = cur.design.zeta[i];
                for s in -20i32..=20 {
                    let x = (centre + s as f64 * 1e-3).clamp(0.0, total);
                    let mut d = cur.design.clone();
                    d.zeta[i] = x;
                    d.zeta[j] = total - x;
                    let cand = self.point(d);
                    if cand.merit > cur.merit {
                        *cur = cand;
                    }
                }
            }
        }
    }

    fn descend(&self, start: usize, init: DesignVariables, params: &SolverParams, durations: &[usize]) -> (Point, Vec<TraceEntry>) {
        let mut cur = self.point(init);
        let mut trace = vec![TraceEntry { start, iteration: 0, merit: cur.merit }];
        for iteration in 1..=params.max_iter {
            let prev = cur.merit;
            if params.optimize_ce && self.goal != Goal::PerfectCsiRate {
                self.improve_alpha(&mut cur, durations);
                self.improve_p_ce(&mut cur);
            }
            self.improve_zeta(&mut cur);
            trace.push(TraceEntry { start, iteration, merit: cur.merit });
            if cur.merit - prev <= params.tol {
                break;
            }
        }
        self.polish_zeta_grid(&mut cur);
        (cur, trace)
    }
}

fn starting_points(model: &Model, pinned: (usize, f64), params: &SolverParams, durations: &[usize]) -> Vec<DesignVariables> {
    let k = model.k;
    let n = params.starts.max(k + 1);
    let mut starts = vec![DesignVariables::uniform(k, pinned.0, pinned.1)];
    for tag in 0..k {
        let mut zeta = vec![0.0; k];
        zeta[tag] = 1.0;
        starts.push(DesignVariables { zeta, alpha: pinned.0, p_ce: pinned.1 });
    }
    let mut idx = 0u64;
    while starts.len() < n {
        let mut rng = draw_rng(params.seed, Stream::Auxiliary, idx);
        idx += 1;
        let raw: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let sum: f64 = raw.iter().sum();
        let zeta = raw.iter().map(|v| v / sum).collect();
        let (alpha, p_ce) = if params.optimize_ce {
            let alpha = durations[rng.random_range(0..durations.len())];
            let cap = p_ce_cap(model, alpha);
            let u: f64 = rng.random();
            (alpha, cap * P_CE_FLOOR_FRACTION.powf(1.0 - u))
        } else {
            pinned
        };
        starts.push(DesignVariables { zeta, alpha, p_ce });
    }
    starts
}

/// Multi-start solve of either design problem at the pinned or optimized CE setting.
pub fn solve(
    model: &Model,
    goal: Goal,
    receiver: Receiver,
    method: Estimator,
    pinned: (usize, f64),
    params: &SolverParams,
) -> Result<OptimizationResult, OptimizerError> {
    receiver.check(model.r, model.k)?;
    let durations = ce_durations(model);
    if durations.is_empty() {
        return Err(OptimizerError::NoCeDuration);
    }
    let pinned = if params.optimize_ce {
        let alpha = if durations.contains(&pinned.0) { pinned.0 } else { durations[0] };
        (alpha, pinned.1.min(p_ce_cap(model, alpha)))
    } else {
        carrier_power(model.w, model.t, pinned.0, pinned.1).map_err(AnalyticsError::from)?;
        pinned
    };
    let problem = Problem { model, method, receiver, goal };
    let starts = starting_points(model, pinned, params, &durations);
    let runs: Vec<(Point, Vec<TraceEntry>)> = starts
        .into_par_iter()
        .enumerate()
        .map(|(i, s)| problem.descend(i, s, params, &durations))
        .collect();
    let mut best_idx = 0;
    for (i, (p, _)) in runs.iter().enumerate() {
        if p.merit > runs[best_idx].0.merit {
            best_idx = i;
        }
    }
    let solver_trace = runs.iter().flat_map(|(_, t)| t.iter().cloned()).collect();
    let best = runs[best_idx].0.clone();
    let (per_tag_rates, per_tag_pe_lower) = problem.evaluate(&best.design);
    let feasible = match goal {
        Goal::PerfectCsiRate => per_tag_pe_lower.iter().all(|&v| v >= model.rho),
        _ => is_feasible(model, &best.design, method).feasible,
    };
    let objective = match goal {
        Goal::MaxMinRate | Goal::PerfectCsiRate => per_tag_rates.iter().cloned().fold(f64::INFINITY, f64::min),
        Goal::MaxMinEnergy => per_tag_pe_lower.iter().cloned().fold(f64::INFINITY, f64::min),
    };
    let result = OptimizationResult {
        variables: best.design,
        objective,
        per_tag_rates,
        per_tag_pe_lower,
        feasible,
        solver_trace,
    };
    if feasible {
        Ok(result)
    } else {
        Err(OptimizerError::Infeasible(Box::new(result)))
    }
}

/// Max-min lower-bound rate subject to `P_E^L ≥ ρ` for every tag.
pub fn solve_maxmin_rate(
    model: &Model,
    receiver: Receiver,
    method: Estimator,
    pinned: (usize, f64),
    params: &SolverParams,
) -> Result<OptimizationResult, OptimizerError> {
    solve(model, Goal::MaxMinRate, receiver, method, pinned, params)
}

/// Max-min rate of the perfect-CSI benchmark subject to its harvested-power constraint.
/// Only `zeta` of the returned design is meaningful.
pub fn solve_perfect_csi(
    model: &Model,
    receiver: Receiver,
    params: &SolverParams,
) -> Result<OptimizationResult, OptimizerError> {
    let fixed = SolverParams { optimize_ce: false, ..*params };
    let alpha = ce_durations(model).first().copied().ok_or(OptimizerError::NoCeDuration)?;
    solve(model, Goal::PerfectCsiRate, receiver, Estimator::Ls, (alpha, 0.0), &fixed)
}

/// Max-min `P_E^L`, reporting the rates that `receiver` achieves at that design.
pub fn solve_maxmin_energy(
    model: &Model,
    receiver: Receiver,
    method: Estimator,
    pinned: (usize, f64),
    params: &SolverParams,
) -> Result<OptimizationResult, OptimizerError> {
    solve(model, Goal::MaxMinEnergy, receiver, method, pinned, params)
}
