//! Problem instance: plant, noise, constraint sets, probability targets, cost
//! weights and horizon.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, is_spd, sym_sqrt, Mat, Vector};
use crate::setops::Polytope;

/// `x⁺ = A x + B u + w`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    pub a: Mat,
    pub b: Mat,
}

impl LtiSystem {
    pub fn new(a: Mat, b: Mat) -> Result<Self> {
        let sys = LtiSystem { a, b };
        let problems = sys.violations();
        if problems.is_empty() {
            Ok(sys)
        } else {
            Err(Error::InvalidInstance(problems.join("; ")))
        }
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// Deterministic part of one step.
    pub fn step(&self, x: &Vector, u: &Vector) -> Vector {
        &self.a * x + &self.b * u
    }

    fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.a.is_square() {
            out.push(format!(
                "A is {}×{}, not square",
                self.a.nrows(),
                self.a.ncols()
            ));
        }
        if self.b.nrows() != self.a.nrows() {
            out.push(format!(
                "B has {} rows, A has {}",
                self.b.nrows(),
                self.a.nrows()
            ));
        }
        if self.a.nrows() == 0 || self.b.ncols() == 0 {
            out.push("state and input dimensions must be at least 1".into());
        }
        if !all_finite(&self.a) || !all_finite(&self.b) {
            out.push("system matrices contain non-finite entries".into());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseFamily {
    /// Gaussian disturbance: chi-squared PRS scale, can be sampled.
    Gaussian,
    /// Only mean and covariance known: Chebyshev PRS scale, cannot be sampled.
    MomentOnly,
}

/// Zero-mean i.i.d. disturbance.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub covariance: Mat,
    pub family: NoiseFamily,
}

impl NoiseModel {
    pub fn gaussian(covariance: Mat) -> Self {
        NoiseModel {
            covariance,
            family: NoiseFamily::Gaussian,
        }
    }

    pub fn moment_only(covariance: Mat) -> Self {
        NoiseModel {
            covariance,
            family: NoiseFamily::MomentOnly,
        }
    }
}

/// Precomputed symmetric factor for repeated Gaussian draws.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    factor: Mat,
}

impl GaussianSampler {
    pub fn new(noise: &NoiseModel) -> Result<Self> {
        if noise.family != NoiseFamily::Gaussian {
            return Err(Error::NoSamplingDistribution);
        }
        Ok(GaussianSampler {
            factor: sym_sqrt(&noise.covariance),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let n = self.factor.nrows();
        let std = Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.factor * std
    }
}

/// One draw from `N(0, covariance)`.
pub fn sample_noise<R: Rng + ?Sized>(noise: &NoiseModel, rng: &mut R) -> Result<Vector> {
    Ok(GaussianSampler::new(noise)?.sample(rng))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec {
    pub state_set: Polytope,
    /// `None` means the input is unconstrained.
    pub input_set: Option<Polytope>,
    pub p_bar_x: f64,
    pub p_bar_u: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub system: LtiSystem,
    pub noise: NoiseModel,
    pub constraints: ConstraintSpec,
    pub q: Mat,
    pub r: Mat,
    pub horizon: usize,
    pub x0: Vector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    /// Detected by a downstream computation (e.g. the Riccati solve) rather
    /// than a direct structural check.
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub severity: Severity,
    pub message: String,
}

impl Violation {
    fn error(message: impl Into<String>) -> Self {
        Violation {
            severity: Severity::Error,
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.severity {
            Severity::Error => write!(f, "{}", self.message),
            Severity::Warning => write!(f, "warning: {}", self.message),
        }
    }
}

fn check_probability(name: &str, p: f64, out: &mut Vec<Violation>) {
    if !(0.0..=1.0).contains(&p) {
        out.push(Violation::error(format!("{name} = {p} outside [0, 1]")));
    }
}

fn check_origin_interior(name: &str, set: &Polytope, dim: usize, out: &mut Vec<Violation>) {
    if set.dim() != dim {
        out.push(Violation::error(format!(
            "{name} has dimension {}, expected {dim}",
            set.dim()
        )));
        return;
    }
    if set.a.nrows() != set.b.len() {
        out.push(Violation::error(format!(
            "{name} row/offset count mismatch"
        )));
        return;
    }
    if (0..set.a.nrows()).any(|i| set.a.row(i).amax() == 0.0) {
        out.push(Violation::error(format!("{name} has a zero row")));
    }
    if set.b.iter().any(|&b| !(b > 0.0)) {
        out.push(Violation::error(format!("origin not interior to {name}")));
    }
}

/// Every invariant violation of `instance`; empty means valid.
pub fn validate_instance(instance: &ProblemInstance) -> Vec<Violation> {
    let mut out: Vec<Violation> = instance
        .system
        .violations()
        .into_iter()
        .map(Violation::error)
        .collect();
    let n = instance.system.a.nrows();
    let m = instance.system.b.ncols();

    let cov = &instance.noise.covariance;
    if cov.shape() != (n, n) {
        out.push(Violation::error(format!("covariance must be {n}×{n}")));
    } else if !is_spd(cov) {
        out.push(Violation::error(
            "covariance not strictly positive definite",
        ));
    }

    let c = &instance.constraints;
    check_origin_interior("X", &c.state_set, n, &mut out);
    check_probability("p_bar_x", c.p_bar_x, &mut out);
    match (&c.input_set, c.p_bar_u) {
        (Some(u), Some(pu)) => {
            check_origin_interior("U", u, m, &mut out);
            check_probability("p_bar_u", pu, &mut out);
        }
        (None, None) => {}
        _ => out.push(Violation::error(
            "p_bar_u must be given exactly when an input set is given",
        )),
    }

    if instance.q.shape() != (n, n) || !is_spd(&instance.q) {
        out.push(Violation::error(
            "Q not symmetric strictly positive definite",
        ));
    }
    if instance.r.shape() != (m, m) || !is_spd(&instance.r) {
        out.push(Violation::error(
            "R not symmetric strictly positive definite",
        ));
    }
    if instance.horizon < 1 {
        out.push(Violation::error("horizon N must be at least 1"));
    }
    if instance.x0.len() != n {
        out.push(Violation::error(format!(
            "initial state must have length {n}"
        )));
    } else if instance.x0.iter().any(|v| !v.is_finite()) {
        out.push(Violation::error("initial state not finite"));
    }

    if out.is_empty() {
        if let Err(e) = crate::synthesis::solve_dare(
            &instance.system.a,
            &instance.system.b,
            &instance.q,
            &instance.r,
        ) {
            out.push(Violation {
                severity: Severity::Warning,
                message: format!("(A, B) may not be stabilizable: {e}"),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case_study::case_study_instance;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn case_study_is_valid() {
        assert!(validate_instance(&case_study_instance()).is_empty());
    }

    #[test]
    fn zero_covariance_flagged() {
        let mut inst = case_study_instance();
        inst.noise.covariance = Mat::zeros(2, 2);
        let v = validate_instance(&inst);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].message, "covariance not strictly positive definite");
    }

    #[test]
    fn origin_outside_state_set() {
        let mut inst = case_study_instance();
        // -2 <= x1 <= -1, |x2| <= 1
        inst.constraints.state_set = Polytope::from_box(&[(-2.0, -1.0), (-1.0, 1.0)]).unwrap();
        let v = validate_instance(&inst);
        assert!(
            v.iter().any(|v| v.message == "origin not interior to X"),
            "{v:?}"
        );
    }

    #[test]
    fn input_probability_pairing() {
        let mut inst = case_study_instance();
        inst.constraints.p_bar_u = Some(0.5);
        assert!(!validate_instance(&inst).is_empty());
    }

    #[test]
    fn unstabilizable_pair_is_warning() {
        let mut inst = case_study_instance();
        inst.system.a = Mat::identity(2, 2) * 1.5;
        inst.system.b = crate::linalg::from_rows(&[vec![1.0], vec![0.0]]).unwrap();
        let v = validate_instance(&inst);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].severity, Severity::Warning);
    }

    #[test]
    fn validation_idempotent() {
        let mut inst = case_study_instance();
        inst.horizon = 0;
        assert_eq!(validate_instance(&inst), validate_instance(&inst));
    }

    #[test]
    fn sampling_reproducible() {
        let noise = NoiseModel::gaussian(Mat::identity(2, 2));
        let a = sample_noise(&noise, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = sample_noise(&noise, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn moment_only_cannot_sample() {
        let noise = NoiseModel::moment_only(Mat::identity(2, 2));
        let r = sample_noise(&noise, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(r, Err(Error::NoSamplingDistribution));
    }
}
