//! Closed-loop simulation and Monte Carlo estimation of per-step constraint
//! satisfaction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::model::{GaussianSampler, NoiseModel};
use crate::par::{map_indices, Execution};
use crate::reachability::Ellipsoid;
use crate::setops::Polytope;
use crate::tube_mpc::{ControllerState, MpcProblem, MpcSolution};

/// Source of the additive disturbance `w(k)`.
#[derive(Debug, Clone)]
pub enum Disturbance {
    Gaussian(GaussianSampler),
    /// `w ≡ 0`, for noise-free rollouts.
    Zero(usize),
}

impl Disturbance {
    pub fn from_noise(noise: &NoiseModel) -> Result<Self> {
        Ok(Disturbance::Gaussian(GaussianSampler::new(noise)?))
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vector {
        match self {
            Disturbance::Gaussian(s) => s.sample(rng),
            Disturbance::Zero(n) => Vector::zeros(*n),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub seed: u64,
    /// `x(0..=T)`
    pub states: Vec<Vector>,
    /// `u(0..T)`
    pub inputs: Vec<Vector>,
    /// `z₀(0..T)` followed by the last plan's `z₁`.
    pub nominal_states: Vec<Vector>,
    pub xi_flags: Vec<bool>,
    pub noise: Vec<Vector>,
    pub objectives: Vec<f64>,
    pub branch_feasible: Vec<[bool; 2]>,
    /// Full per-step plans, when requested.
    pub plans: Vec<MpcSolution>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.inputs.len()
    }
}

/// Runs `steps` closed-loop steps from `x0`; deterministic given `seed`.
pub fn run_closed_loop(
    problem: &MpcProblem,
    x0: &Vector,
    disturbance: &Disturbance,
    steps: usize,
    seed: u64,
    keep_plans: bool,
) -> Result<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = ControllerState::new(x0);
    let mut x = x0.clone();
    let mut traj = Trajectory {
        seed,
        states: vec![x.clone()],
        inputs: Vec::with_capacity(steps),
        nominal_states: Vec::with_capacity(steps + 1),
        xi_flags: Vec::with_capacity(steps),
        noise: Vec::with_capacity(steps),
        objectives: Vec::with_capacity(steps),
        branch_feasible: Vec::with_capacity(steps),
        plans: Vec::new(),
    };
    for _ in 0..steps {
        let sol = problem.solve_step(&mut state, &x)?;
        let w = disturbance.draw(&mut rng);
        x = problem.system.step(&x, &sol.applied_input) + &w;
        traj.inputs.push(sol.applied_input.clone());
        traj.nominal_states.push(sol.z_bar[0].clone());
        traj.xi_flags.push(sol.xi);
        traj.noise.push(w);
        traj.objectives.push(sol.objective);
        traj.branch_feasible.push(sol.branch_feasible);
        traj.states.push(x.clone());
        if keep_plans {
            traj.plans.push(sol);
        }
    }
    traj.nominal_states.push(state.prev_z1.clone());
    Ok(traj)
}

/// Order-independent per-trial seed (splitmix64 of the pair).
pub fn derive_seed(base_seed: u64, trial: u64) -> u64 {
    let mut z = base_seed ^ trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub trials: usize,
    pub steps: usize,
    /// Fraction of trials with `x(k) ∈ X`, `k = 0..=T`.
    pub rates: Vec<f64>,
    /// Required bound `min(p̄_x, p_x*(k))`.
    pub bounds: Vec<f64>,
    /// Binomial standard deviation `√(p(1−p)/M)` at the bound.
    pub sigma: Vec<f64>,
    /// Steps where `rate < bound − 3σ`.
    pub flagged: Vec<usize>,
    /// Fraction of trials with `x(k) − z₀(k)` inside the target-level state PRS, `k = 0..T`.
    pub prs_rates: Vec<f64>,
    pub infeasible_trials: usize,
    pub mean_stage_cost: f64,
}

struct TrialOutcome {
    inside: Vec<bool>,
    error_inside: Vec<bool>,
    stage_cost: f64,
    feasible: bool,
}

/// Monte Carlo over `trials` independent runs sharing `x0`.
#[allow(clippy::too_many_arguments)]
pub fn monte_carlo(
    problem: &MpcProblem,
    x0: &Vector,
    noise: &NoiseModel,
    state_set: &Polytope,
    state_prs: &Ellipsoid,
    cost_weights: (&Mat, &Mat),
    steps: usize,
    trials: usize,
    base_seed: u64,
    exec: Execution,
) -> Result<SimulationReport> {
    if trials == 0 {
        return Err(Error::Domain("Monte Carlo needs at least one trial".into()));
    }
    let disturbance = Disturbance::from_noise(noise)?;
    let (q, r) = cost_weights;
    let outcomes = map_indices(trials, exec, |i| {
        let seed = derive_seed(base_seed, i as u64);
        match run_closed_loop(problem, x0, &disturbance, steps, seed, false) {
            Ok(t) => {
                let inside = t.states.iter().map(|x| state_set.contains(x)).collect();
                let error_inside = t
                    .states
                    .iter()
                    .zip(&t.nominal_states)
                    .take(steps)
                    .map(|(x, z)| state_prs.contains(&(x - z)))
                    .collect();
                let stage_cost = t
                    .states
                    .iter()
                    .zip(&t.inputs)
                    .map(|(x, u)| x.dot(&(q * x)) + u.dot(&(r * u)))
                    .sum::<f64>();
                TrialOutcome {
                    inside,
                    error_inside,
                    stage_cost,
                    feasible: true,
                }
            }
            Err(Error::RecursiveFeasibilityViolated(_)) => TrialOutcome {
                inside: vec![false; steps + 1],
                error_inside: vec![false; steps],
                stage_cost: 0.0,
                feasible: false,
            },
            Err(e) => panic!("closed loop failed: {e}"),
        }
    });

    let m = trials as f64;
    let mut rates = vec![0.0; steps + 1];
    let mut prs_rates = vec![0.0; steps];
    let mut cost_sum = 0.0;
    let mut infeasible_trials = 0;
    for o in &outcomes {
        for (acc, &ok) in rates.iter_mut().zip(&o.inside) {
            *acc += ok as u8 as f64;
        }
        for (acc, &ok) in prs_rates.iter_mut().zip(&o.error_inside) {
            *acc += ok as u8 as f64;
        }
        cost_sum += o.stage_cost;
        infeasible_trials += (!o.feasible) as usize;
    }
    rates.iter_mut().for_each(|r| *r /= m);
    prs_rates.iter_mut().for_each(|r| *r /= m);
    let bounds: Vec<f64> = (0..=steps)
        .map(|k| problem.schedule.state_bound_at(k))
        .collect();
    let sigma: Vec<f64> = bounds.iter().map(|p| (p * (1.0 - p) / m).sqrt()).collect();
    let flagged = (0..=steps)
        .filter(|&k| rates[k] < bounds[k] - 3.0 * sigma[k])
        .collect();
    let feasible = (trials - infeasible_trials).max(1) as f64;
    Ok(SimulationReport {
        trials,
        steps,
        rates,
        bounds,
        sigma,
        flagged,
        prs_rates,
        infeasible_trials,
        mean_stage_cost: cost_sum / (feasible * steps.max(1) as f64),
    })
}
