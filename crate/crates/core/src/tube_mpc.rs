//! Performance step: receding-horizon tube MPC with schedule-indexed
//! tightening and binary re-initialization of the nominal state.
//!
//! At step `k` prediction `i` uses the state rows tightened by
//! `1 − α*(k+i)` (zero relaxation past the horizon). The nominal initial
//! state is `z₀ = (1 − ξ)·x(k) + ξ·z₁(k−1)`; both values of `ξ` are solved as
//! separate convex QPs and the cheaper feasible one is applied through
//! `u = v₀ + K(x − z₀)`.
//!
//! Internally the QP is condensed in `c_i = v_i − K z_i`, so the stage cost
//! `‖v_i − K z_i‖²_S` becomes the block-diagonal `Σ c_iᵀ S c_i`.

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::model::LtiSystem;
use crate::reachability::TighteningSchedule;
use crate::setops::Polytope;
use crate::solver::{DualActiveSet, QpOutcome, QuadraticProgram};
use crate::synthesis::SynthesisContext;

/// Nominal states, nominal inputs and cost of one solved branch.
type Plan = (Vec<Vector>, Vec<Vector>, f64);

/// Default linear penalty `l(ξ) = λ·ξ`.
pub const DEFAULT_XI_PENALTY: f64 = 1e-3;

/// Offline data of the tube MPC, shared read-only by every controller run.
#[derive(Debug, Clone)]
pub struct MpcProblem {
    pub system: LtiSystem,
    pub schedule: TighteningSchedule,
    pub horizon: usize,
    pub xi_penalty: f64,
    k: Mat,
    s: Mat,
    a_k: Mat,
    state_set: Polytope,
    offsets_x: Vector,
    input: Option<(Polytope, Vector)>,
    terminal_set: Polytope,
    // condensed constraint data: G c <= rhs(k) − F z0
    g: Mat,
    f: Mat,
    hessian: Mat,
    h_inv: Mat,
    solver: DualActiveSet,
}

/// Per-run mutable controller state.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    /// `z₁(k−1)`, initialized to `x(0)`.
    pub prev_z1: Vector,
    pub step: usize,
}

impl ControllerState {
    pub fn new(x0: &Vector) -> Self {
        ControllerState {
            prev_z1: x0.clone(),
            step: 0,
        }
    }
}

/// One branch QP in `(z̄, v̄)` form plus its condensed counterpart.
#[derive(Debug, Clone)]
pub struct MpcQp {
    pub step: usize,
    pub xi: bool,
    pub z0: Vector,
    /// Tightened state rows for predictions `i = 0..N`.
    pub state_rows: Vec<Polytope>,
    pub input_rows: Option<Vec<Polytope>>,
    pub terminal: Polytope,
    pub condensed: QuadraticProgram,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcSolution {
    pub step: usize,
    pub v_bar: Vec<Vector>,
    pub z_bar: Vec<Vector>,
    pub xi: bool,
    /// `J̄_f + l(ξ)` of the applied branch.
    pub objective: f64,
    /// `J̄_f` alone.
    pub cost: f64,
    pub applied_input: Vector,
    /// Feasibility of the `ξ = 0` and `ξ = 1` branches.
    pub branch_feasible: [bool; 2],
    pub branch_objectives: [Option<f64>; 2],
}

impl MpcProblem {
    pub fn new(
        system: &LtiSystem,
        ctx: &SynthesisContext,
        schedule: &TighteningSchedule,
        horizon: usize,
        xi_penalty: f64,
    ) -> Self {
        let (n, m) = (system.n(), system.m());
        let nc = horizon * m;
        let a_k = ctx.gains.a_k.clone();
        let k = ctx.gains.k.clone();

        // z_i = Φ_i z0 + Γ_i c
        let mut phi = vec![Mat::identity(n, n)];
        let mut gamma = vec![Mat::zeros(n, nc)];
        for i in 0..horizon {
            let mut next = &a_k * &gamma[i];
            let mut blk = next.view_mut((0, i * m), (n, m));
            blk += &system.b;
            gamma.push(next);
            phi.push(&a_k * &phi[i]);
        }

        let input = ctx.input_set.clone().zip(ctx.offsets_u.clone());
        let qx = ctx.state_set.num_rows();
        let qu = input.as_ref().map_or(0, |(u, _)| u.num_rows());
        let qf = ctx.terminal_set.num_rows();
        let rows = (qx + qu) * horizon + qf;
        let mut g = Mat::zeros(rows, nc);
        let mut f = Mat::zeros(rows, n);
        let mut r = 0;
        for i in 0..horizon {
            g.rows_mut(r, qx).copy_from(&(&ctx.state_set.a * &gamma[i]));
            f.rows_mut(r, qx).copy_from(&(&ctx.state_set.a * &phi[i]));
            r += qx;
            if let Some((u, _)) = &input {
                // v_i = K z_i + c_i
                let mut v_map = &k * &gamma[i];
                let mut blk = v_map.view_mut((0, i * m), (m, m));
                blk += Mat::identity(m, m);
                g.rows_mut(r, qu).copy_from(&(&u.a * v_map));
                f.rows_mut(r, qu).copy_from(&(&u.a * &k * &phi[i]));
                r += qu;
            }
        }
        g.rows_mut(r, qf)
            .copy_from(&(&ctx.terminal_set.a * &gamma[horizon]));
        f.rows_mut(r, qf)
            .copy_from(&(&ctx.terminal_set.a * &phi[horizon]));

        let s = ctx.gains.s.clone();
        let mut hessian = Mat::zeros(nc, nc);
        for i in 0..horizon {
            hessian
                .view_mut((i * m, i * m), (m, m))
                .copy_from(&(&s * 2.0));
        }
        let h_inv = hessian
            .clone()
            .cholesky()
            .expect("S is positive definite")
            .inverse();

        MpcProblem {
            system: system.clone(),
            schedule: schedule.clone(),
            horizon,
            xi_penalty,
            k,
            s,
            a_k,
            state_set: ctx.state_set.clone(),
            offsets_x: ctx.offsets_x.clone(),
            input,
            terminal_set: ctx.terminal_set.clone(),
            g,
            f,
            hessian,
            h_inv,
            solver: DualActiveSet::default(),
        }
    }

    pub fn gain(&self) -> &Mat {
        &self.k
    }

    pub fn closed_loop(&self) -> &Mat {
        &self.a_k
    }

    pub fn terminal_set(&self) -> &Polytope {
        &self.terminal_set
    }

    /// State rows at absolute time `t`.
    pub fn state_rows_at(&self, t: usize) -> Polytope {
        let scale = 1.0 - self.schedule.alpha_at(t);
        Polytope {
            a: self.state_set.a.clone(),
            b: &self.state_set.b - &self.offsets_x * scale,
        }
    }

    pub fn input_rows_at(&self, t: usize) -> Option<Polytope> {
        self.input.as_ref().map(|(u, h)| {
            let scale = 1.0 - self.schedule.beta_at(t);
            Polytope {
                a: u.a.clone(),
                b: &u.b - h * scale,
            }
        })
    }

    /// Builds the branch QP for time `state.step` and measured state `x_k`.
    pub fn build_qp(&self, state: &ControllerState, x_k: &Vector, xi: bool) -> MpcQp {
        let step = state.step;
        let z0 = if xi {
            state.prev_z1.clone()
        } else {
            x_k.clone()
        };
        let state_rows: Vec<Polytope> = (0..self.horizon)
            .map(|i| self.state_rows_at(step + i))
            .collect();
        let input_rows: Option<Vec<Polytope>> = self.input.as_ref().map(|_| {
            (0..self.horizon)
                .map(|i| self.input_rows_at(step + i).expect("input constrained"))
                .collect()
        });

        let mut rhs = Vector::zeros(self.g.nrows());
        let mut r = 0;
        for i in 0..self.horizon {
            let sr = &state_rows[i];
            rhs.rows_mut(r, sr.num_rows()).copy_from(&sr.b);
            r += sr.num_rows();
            if let Some(ir) = &input_rows {
                rhs.rows_mut(r, ir[i].num_rows()).copy_from(&ir[i].b);
                r += ir[i].num_rows();
            }
        }
        rhs.rows_mut(r, self.terminal_set.num_rows())
            .copy_from(&self.terminal_set.b);
        let condensed = QuadraticProgram {
            hessian: self.hessian.clone(),
            linear: Vector::zeros(self.hessian.nrows()),
            ineq_a: self.g.clone(),
            ineq_b: rhs - &self.f * &z0,
        };
        MpcQp {
            step,
            xi,
            z0,
            state_rows,
            input_rows,
            terminal: self.terminal_set.clone(),
            condensed,
        }
    }

    /// Nominal rollout from `z0` with perturbations `c`.
    fn rollout(&self, z0: &Vector, c: &Vector) -> (Vec<Vector>, Vec<Vector>) {
        let m = self.system.m();
        let mut z = vec![z0.clone()];
        let mut v = Vec::with_capacity(self.horizon);
        for i in 0..self.horizon {
            let ci = c.rows(i * m, m).into_owned();
            let vi = &self.k * &z[i] + ci;
            z.push(self.system.step(&z[i], &vi));
            v.push(vi);
        }
        (z, v)
    }

    /// `Σ ‖v_i − K z_i‖²_S`.
    pub fn cost(&self, z: &[Vector], v: &[Vector]) -> f64 {
        v.iter()
            .zip(z)
            .map(|(vi, zi)| {
                let c = vi - &self.k * zi;
                c.dot(&(&self.s * &c))
            })
            .sum()
    }

    fn solve_branch(&self, qp: &MpcQp) -> Result<Option<Plan>> {
        match self.solver.solve_with_inverse(&qp.condensed, &self.h_inv)? {
            QpOutcome::Infeasible => Ok(None),
            QpOutcome::Optimal { x, .. } => {
                let (z, v) = self.rollout(&qp.z0, &x);
                if qp.max_violation(&self.system, &z, &v) > 1e-6 {
                    return Ok(None);
                }
                let cost = self.cost(&z, &v);
                Ok(Some((z, v, cost)))
            }
        }
    }

    /// Solves both `ξ` branches at `state.step`, applies the winner and
    /// advances `state`.
    pub fn solve_step(&self, state: &mut ControllerState, x_k: &Vector) -> Result<MpcSolution> {
        let qp0 = self.build_qp(state, x_k, false);
        let qp1 = self.build_qp(state, x_k, true);
        let b0 = self.solve_branch(&qp0)?;
        let b1 = self.solve_branch(&qp1)?;
        let obj0 = b0.as_ref().map(|b| b.2);
        let obj1 = b1.as_ref().map(|b| b.2 + self.xi_penalty);
        let pick_one = match (obj0, obj1) {
            (None, None) => return Err(Error::RecursiveFeasibilityViolated(state.step)),
            (Some(_), None) => false,
            (None, Some(_)) => true,
            (Some(a), Some(b)) => b < a,
        };
        let (z, v, cost) = if pick_one { b1 } else { b0 }.expect("picked branch is feasible");
        let z0 = &z[0];
        let applied_input = &v[0] + &self.k * (x_k - z0);
        let sol = MpcSolution {
            step: state.step,
            xi: pick_one,
            objective: cost + if pick_one { self.xi_penalty } else { 0.0 },
            cost,
            applied_input,
            branch_feasible: [obj0.is_some(), obj1.is_some()],
            branch_objectives: [obj0, obj1],
            v_bar: v,
            z_bar: z,
        };
        state.prev_z1 = sol.z_bar[1].clone();
        state.step += 1;
        Ok(sol)
    }
}

impl MpcQp {
    /// Largest violation of any row of this QP by `(z̄, v̄)`: dynamics,
    /// initial-state equality, tightened state/input rows and terminal rows.
    pub fn max_violation(&self, system: &LtiSystem, z: &[Vector], v: &[Vector]) -> f64 {
        let horizon = self.state_rows.len();
        if z.len() != horizon + 1 || v.len() != horizon {
            return f64::INFINITY;
        }
        let mut worst = (&z[0] - &self.z0).amax();
        for i in 0..horizon {
            worst = worst.max((system.step(&z[i], &v[i]) - &z[i + 1]).amax());
            worst = worst.max(self.state_rows[i].residual(&z[i]).max());
            if let Some(ir) = &self.input_rows {
                worst = worst.max(ir[i].residual(&v[i]).max());
            }
        }
        worst.max(self.terminal.residual(&z[horizon]).max())
    }
}

/// Shifted certificate for step `k+1`: inputs `{v₁, …, v_{N−1}, K z_N}` with
/// `ξ = 1`, giving nominal states `{z₁, …, z_N, A_K z_N}`.
pub fn candidate_shift(prev: &MpcSolution, ctx: &SynthesisContext) -> (Vec<Vector>, Vec<Vector>) {
    let z_n = prev.z_bar.last().expect("nonempty plan");
    let mut v: Vec<Vector> = prev.v_bar[1..].to_vec();
    v.push(&ctx.gains.k * z_n);
    let mut z: Vec<Vector> = prev.z_bar[1..].to_vec();
    z.push(&ctx.gains.a_k * z_n);
    (v, z)
}
