//! Two-state DC-DC converter regulation example with a single unconstrained
//! input, and an end-to-end driver that writes its artifacts.

use std::path::{Path, PathBuf};

use crate::error::{Result, StageContext};
use crate::export::{write_file, write_schedule, write_trajectory, write_vertices};
use crate::linalg::{from_rows, Mat, Vector};
use crate::model::{ConstraintSpec, LtiSystem, NoiseModel, ProblemInstance};
use crate::safety::{min_static_probability, solve_safety, SafetyResult, StaticBound};
use crate::setops::Polytope;
use crate::simulator::{run_closed_loop, Disturbance, Trajectory};
use crate::solver::DenseSimplex;
use crate::synthesis::{build_context, SynthesisContext, TighteningOptions};
use crate::tube_mpc::{MpcProblem, DEFAULT_XI_PENALTY};

/// Support tolerance used when reporting which steps are relaxed.
pub const SUPPORT_TOL: f64 = 1e-6;

pub fn case_study_instance() -> ProblemInstance {
    let a = from_rows(&[vec![1.0, 0.0075], vec![-0.143, 0.996]]).expect("static data");
    let b = from_rows(&[vec![4.798], vec![0.115]]).expect("static data");
    ProblemInstance {
        system: LtiSystem::new(a, b).expect("static data"),
        noise: NoiseModel::gaussian(Mat::identity(2, 2) * 0.1),
        constraints: ConstraintSpec {
            state_set: Polytope::from_box(&[(-2.0, 2.0), (-2.0, 2.0)]).expect("static data"),
            input_set: None,
            p_bar_x: 0.6,
            p_bar_u: None,
        },
        q: Mat::from_diagonal(&Vector::from_vec(vec![1.0, 10.0])),
        r: Mat::from_element(1, 1, 10.0),
        horizon: 15,
        x0: Vector::from_vec(vec![1.0, 1.0]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaseStudyOptions {
    pub tightening: TighteningOptions,
    pub steps: usize,
    pub seed: u64,
}

impl Default for CaseStudyOptions {
    fn default() -> Self {
        CaseStudyOptions {
            tightening: TighteningOptions::default(),
            steps: 100,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CaseStudyReport {
    pub instance: ProblemInstance,
    pub context: SynthesisContext,
    pub safety: SafetyResult,
    pub static_bound: StaticBound,
    pub trajectory: Trajectory,
    /// Steps with `α(k) > SUPPORT_TOL`.
    pub support: Vec<usize>,
    pub shape: NominalShape,
    pub files: Vec<PathBuf>,
}

/// Extremum locations of the first coordinate of the nominal plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NominalShape {
    pub argmax: usize,
    pub argmin: usize,
    /// Interior steps where the trace changes direction.
    pub turning_points: Vec<usize>,
}

impl NominalShape {
    pub fn of(z: &[Vector]) -> Self {
        let z1: Vec<f64> = z.iter().map(|v| v[0]).collect();
        let arg = |better: fn(f64, f64) -> bool| {
            (1..z1.len()).fold(0, |best, k| if better(z1[k], z1[best]) { k } else { best })
        };
        let tol = 1e-9;
        let turning_points = (1..z1.len().saturating_sub(1))
            .filter(|&k| {
                let (l, r) = (z1[k] - z1[k - 1], z1[k + 1] - z1[k]);
                (l > tol && r < -tol) || (l < -tol && r > tol)
            })
            .collect();
        NominalShape {
            argmax: arg(|a, b| a > b),
            argmin: arg(|a, b| a < b),
            turning_points,
        }
    }
}

/// Runs synthesis, the safety LP, the static bound and one closed-loop
/// trajectory. Writes CSV artifacts when `out_dir` is given.
pub fn reproduce_case_study(
    options: &CaseStudyOptions,
    out_dir: Option<&Path>,
) -> Result<CaseStudyReport> {
    let instance = case_study_instance();
    let lp = DenseSimplex::default();
    let context = build_context(&instance, &options.tightening, &lp).stage("synthesis")?;
    let safety = solve_safety(&context, &instance, &lp).stage("safety")?;
    let static_bound =
        min_static_probability(&instance, &options.tightening, &lp).stage("static bound")?;
    let problem = MpcProblem::new(
        &instance.system,
        &context,
        &safety.schedule,
        instance.horizon,
        DEFAULT_XI_PENALTY,
    );
    let disturbance = Disturbance::from_noise(&instance.noise).stage("simulation")?;
    let trajectory = run_closed_loop(
        &problem,
        &instance.x0,
        &disturbance,
        options.steps,
        options.seed,
        false,
    )
    .stage("simulation")?;
    let support = safety.schedule.support(SUPPORT_TOL);
    let shape = NominalShape::of(&safety.nominal_z);

    let mut files = Vec::new();
    if let Some(dir) = out_dir {
        write_artifacts(
            dir,
            &instance,
            &context,
            &safety,
            &static_bound,
            &trajectory,
            &mut files,
        )
        .stage("export")?;
    }

    Ok(CaseStudyReport {
        instance,
        context,
        safety,
        static_bound,
        trajectory,
        support,
        shape,
        files,
    })
}

fn write_artifacts(
    dir: &Path,
    instance: &ProblemInstance,
    context: &SynthesisContext,
    safety: &SafetyResult,
    static_bound: &StaticBound,
    trajectory: &Trajectory,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("schedule.csv");
    write_file(&path, |w| write_schedule(w, safety))?;
    files.push(path);

    let path = dir.join("trajectory.csv");
    write_file(&path, |w| write_trajectory(w, trajectory))?;
    files.push(path);

    let sections = (0..=instance.horizon)
        .map(|k| {
            let z = context.tube_section(safety.schedule.alpha_at(k));
            Ok((k, z.vertices()?.vertices))
        })
        .collect::<Result<Vec<_>>>()?;
    let path = dir.join("tube_sections.csv");
    write_file(&path, |w| write_vertices(w, &sections))?;
    files.push(path);

    let path = dir.join("static_bound.csv");
    write_file(&path, |w| {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["target", "static_probability", "infeasible_at_zero"])?;
        w.write_record([
            instance.constraints.p_bar_x.to_string(),
            static_bound.probability.to_string(),
            static_bound.infeasible_at_zero.to_string(),
        ])?;
        w.flush()?;
        Ok(())
    })?;
    files.push(path);
    Ok(())
}
