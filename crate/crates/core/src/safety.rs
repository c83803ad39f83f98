//! Safety step: a linear program choosing the least relaxation of the
//! tightening schedule for which a nominal trajectory from `x(0)` exists.
//!
//! Variables are stacked as `z(0..=N)`, `v(0..N)`, `α(0..N)` and, when the
//! input is constrained, `β(0..N)`. The relaxation enters the right-hand side
//! affinely, `A_x z(k) − α(k)·h_x <= b_x − h_x`, which keeps the problem an LP.

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::model::ProblemInstance;
use crate::reachability::TighteningSchedule;
use crate::solver::{Bound, LinearProgram, LpBackend, LpOutcome};
use crate::synthesis::{build_context, SynthesisContext, TighteningOptions};

/// Index map of the stacked LP variable vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LpLayout {
    pub n: usize,
    pub m: usize,
    pub horizon: usize,
    pub has_alpha: bool,
    pub has_beta: bool,
}

impl LpLayout {
    pub fn z(&self, k: usize, i: usize) -> usize {
        k * self.n + i
    }

    pub fn v(&self, k: usize, j: usize) -> usize {
        (self.horizon + 1) * self.n + k * self.m + j
    }

    pub fn alpha(&self, k: usize) -> usize {
        debug_assert!(self.has_alpha);
        (self.horizon + 1) * self.n + self.horizon * self.m + k
    }

    pub fn beta(&self, k: usize) -> usize {
        debug_assert!(self.has_beta);
        self.alpha(0) + self.horizon + k
    }

    pub fn num_vars(&self) -> usize {
        let relax = (self.has_alpha as usize + self.has_beta as usize) * self.horizon;
        (self.horizon + 1) * self.n + self.horizon * self.m + relax
    }
}

#[derive(Debug, Clone)]
pub struct SafetyLp {
    pub lp: LinearProgram,
    pub layout: LpLayout,
}

/// Assembles the safety LP. With `relax = false` the relaxation variables are
/// dropped, leaving the static feasibility problem at full tightening.
fn assemble(ctx: &SynthesisContext, instance: &ProblemInstance, relax: bool) -> SafetyLp {
    let sys = &instance.system;
    let (n, m, horizon) = (sys.n(), sys.m(), instance.horizon);
    let input = ctx.input_set.as_ref().zip(ctx.offsets_u.as_ref());
    let layout = LpLayout {
        n,
        m,
        horizon,
        has_alpha: relax,
        has_beta: relax && input.is_some(),
    };
    let nv = layout.num_vars();

    let mut cost = Vector::zeros(nv);
    if relax {
        for k in 0..horizon {
            cost[layout.alpha(k)] = 1.0;
            if layout.has_beta {
                cost[layout.beta(k)] = 1.0;
            }
        }
    }
    let mut lp = LinearProgram::new(cost);

    // z(0) = x(0) as a fixed bound; relaxations in [0, 1]
    for i in 0..n {
        lp.bounds[layout.z(0, i)] = Bound::between(instance.x0[i], instance.x0[i]);
    }
    if relax {
        for k in 0..horizon {
            lp.bounds[layout.alpha(k)] = Bound::between(0.0, 1.0);
            if layout.has_beta {
                lp.bounds[layout.beta(k)] = Bound::between(0.0, 1.0);
            }
        }
    }

    // dynamics: z(k+1) − A z(k) − B v(k) = 0
    let mut eq_a = Mat::zeros(n * horizon, nv);
    for k in 0..horizon {
        for i in 0..n {
            let row = k * n + i;
            eq_a[(row, layout.z(k + 1, i))] = 1.0;
            for j in 0..n {
                eq_a[(row, layout.z(k, j))] -= sys.a[(i, j)];
            }
            for j in 0..m {
                eq_a[(row, layout.v(k, j))] -= sys.b[(i, j)];
            }
        }
    }
    lp.eq_a = eq_a;
    lp.eq_b = Vector::zeros(n * horizon);

    let x_set = &ctx.state_set;
    let qx = x_set.num_rows();
    let (qu, u_rows) = match input {
        Some((u, h)) => (u.num_rows(), Some((u, h))),
        None => (0, None),
    };
    let qf = ctx.terminal_set.num_rows();
    let rows = (qx + qu) * horizon + qf;
    let mut ineq_a = Mat::zeros(rows, nv);
    let mut ineq_b = Vector::zeros(rows);
    let mut r = 0;
    for k in 0..horizon {
        for i in 0..qx {
            for j in 0..n {
                ineq_a[(r, layout.z(k, j))] = x_set.a[(i, j)];
            }
            if relax {
                ineq_a[(r, layout.alpha(k))] = -ctx.offsets_x[i];
            }
            ineq_b[r] = x_set.b[i] - ctx.offsets_x[i];
            r += 1;
        }
        if let Some((u, h)) = u_rows {
            for i in 0..qu {
                for j in 0..m {
                    ineq_a[(r, layout.v(k, j))] = u.a[(i, j)];
                }
                if relax {
                    ineq_a[(r, layout.beta(k))] = -h[i];
                }
                ineq_b[r] = u.b[i] - h[i];
                r += 1;
            }
        }
    }
    for i in 0..qf {
        for j in 0..n {
            ineq_a[(r, layout.z(horizon, j))] = ctx.terminal_set.a[(i, j)];
        }
        ineq_b[r] = ctx.terminal_set.b[i];
        r += 1;
    }
    lp.ineq_a = ineq_a;
    lp.ineq_b = ineq_b;
    SafetyLp { lp, layout }
}

pub fn build_safety_lp(ctx: &SynthesisContext, instance: &ProblemInstance) -> SafetyLp {
    assemble(ctx, instance, true)
}

#[derive(Debug, Clone)]
pub struct SafetyResult {
    pub schedule: TighteningSchedule,
    pub nominal_z: Vec<Vector>,
    pub nominal_v: Vec<Vector>,
    /// `Σ α(k) + β(k)`
    pub objective: f64,
    /// `Σ |p̄_x − p_x(k)| + |p̄_u − p_u(k)|`, the probability-space cost the LP stands in for.
    pub probability_deviation: f64,
    /// Raw LP solution, in [`LpLayout`] order.
    pub solution: Vector,
}

pub fn solve_safety(
    ctx: &SynthesisContext,
    instance: &ProblemInstance,
    backend: &dyn LpBackend,
) -> Result<SafetyResult> {
    let SafetyLp { lp, layout } = build_safety_lp(ctx, instance);
    let x = match backend.solve(&lp)? {
        LpOutcome::Optimal { x, .. } => x,
        LpOutcome::Infeasible => return Err(Error::SafetyInfeasible),
        LpOutcome::Unbounded => return Err(Error::Solver("safety LP unbounded".into())),
    };
    let violation = lp.max_violation(&x);
    if violation > 1e-7 {
        return Err(Error::Solver(format!(
            "safety LP solution violates rows by {violation:.3e}"
        )));
    }
    let horizon = layout.horizon;
    // clamp solver noise into the box so probabilities stay well defined
    let alpha: Vec<f64> = (0..horizon)
        .map(|k| x[layout.alpha(k)].clamp(0.0, 1.0))
        .collect();
    let beta = layout.has_beta.then(|| {
        (0..horizon)
            .map(|k| x[layout.beta(k)].clamp(0.0, 1.0))
            .collect::<Vec<_>>()
    });
    let c = &instance.constraints;
    let schedule = TighteningSchedule::from_relaxations(
        alpha, beta, c.p_bar_x, c.p_bar_u, layout.n, layout.m, ctx.family,
    )?;
    let nominal_z = (0..=horizon)
        .map(|k| Vector::from_fn(layout.n, |i, _| x[layout.z(k, i)]))
        .collect();
    let nominal_v = (0..horizon)
        .map(|k| Vector::from_fn(layout.m, |j, _| x[layout.v(k, j)]))
        .collect();
    let objective = schedule.alpha.iter().sum::<f64>()
        + schedule
            .beta
            .as_ref()
            .map_or(0.0, |b| b.iter().sum::<f64>());
    let mut probability_deviation: f64 = schedule
        .relaxed_px
        .iter()
        .map(|p| (c.p_bar_x - p).abs())
        .sum();
    if let (Some(pu), Some(rel)) = (c.p_bar_u, &schedule.relaxed_pu) {
        probability_deviation += rel.iter().map(|p| (pu - p).abs()).sum::<f64>();
    }
    Ok(SafetyResult {
        schedule,
        nominal_z,
        nominal_v,
        objective,
        probability_deviation,
        solution: x,
    })
}

/// Whether the unrelaxed (static) problem at full tightening is feasible.
pub fn static_feasible(
    ctx: &SynthesisContext,
    instance: &ProblemInstance,
    backend: &dyn LpBackend,
) -> Result<bool> {
    let SafetyLp { lp, .. } = assemble(ctx, instance, false);
    Ok(backend.solve(&lp)?.is_optimal())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticBound {
    /// Largest target `p̄_x` (capped at the instance's) for which static chance
    /// constraints admit a solution from `x(0)`.
    pub probability: f64,
    /// Set when the problem is infeasible even at `p̄_x = 0`.
    pub infeasible_at_zero: bool,
}

pub const STATIC_BISECTION_TOL: f64 = 1e-3;

/// Bisection over the state target level with tightening, terminal set and
/// static LP rebuilt for every candidate.
pub fn min_static_probability(
    instance: &ProblemInstance,
    options: &TighteningOptions,
    backend: &dyn LpBackend,
) -> Result<StaticBound> {
    let feasible_at = |p: f64| -> Result<bool> {
        let mut inst = instance.clone();
        inst.constraints.p_bar_x = p;
        match build_context(&inst, options, backend) {
            Ok(ctx) => static_feasible(&ctx, &inst, backend),
            Err(Error::TerminalSetEmpty) => Ok(false),
            Err(e) => Err(e),
        }
    };
    let target = instance.constraints.p_bar_x;
    if feasible_at(target)? {
        return Ok(StaticBound {
            probability: target,
            infeasible_at_zero: false,
        });
    }
    if !feasible_at(0.0)? {
        return Ok(StaticBound {
            probability: 0.0,
            infeasible_at_zero: true,
        });
    }
    let (mut lo, mut hi) = (0.0, target);
    while hi - lo > STATIC_BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if feasible_at(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(StaticBound {
        probability: lo,
        infeasible_at_zero: false,
    })
}
