//! Stationary error covariance, probability scale factors and ellipsoidal
//! probabilistic reachable sets (PRS) of the stabilized error dynamics
//! `e⁺ = A_K e + w`.
//!
//! A PRS of level `p` is `{e : eᵀΣ⁻¹e <= p̃}`, where `Σ` solves
//! `A_K Σ A_Kᵀ − Σ + W = 0` and `p̃` is either the chi-squared quantile
//! (Gaussian noise) or the Chebyshev bound `d / (1 − p)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{is_spd, spectral_radius, symmetrize, Mat, Vector};
use crate::model::{LtiSystem, NoiseFamily, NoiseModel};
use crate::stats::{chi2_cdf, chi2_inv};

/// Ellipsoid `{x : (x − c)ᵀE⁻¹(x − c) <= 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    pub shape: Mat,
    pub center: Vector,
}

impl Ellipsoid {
    /// Origin-centred ellipsoid. `shape` must be symmetric positive definite.
    pub fn new(shape: Mat) -> Result<Self> {
        if !is_spd(&shape) {
            return Err(Error::Domain(
                "ellipsoid shape not positive definite".into(),
            ));
        }
        let d = shape.nrows();
        Ok(Ellipsoid {
            shape,
            center: Vector::zeros(d),
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &Vector) -> bool {
        let dx = x - &self.center;
        match self.shape.clone().cholesky() {
            Some(ch) => dx.dot(&ch.solve(&dx)) <= 1.0 + 1e-12,
            None => false,
        }
    }

    /// `sup_{x ∈ E} aᵀx = aᵀc + √(aᵀEa)`.
    pub fn support(&self, a: &Vector) -> f64 {
        a.dot(&self.center) + a.dot(&(&self.shape * a)).max(0.0).sqrt()
    }
}

/// State and input PRS at the target probability levels.
#[derive(Debug, Clone)]
pub struct PrsPair {
    /// Stationary error covariance `Σ∞`.
    pub sigma: Mat,
    pub state_prs: Ellipsoid,
    pub input_prs: Option<Ellipsoid>,
    pub p_tilde_x: f64,
    pub p_tilde_u: Option<f64>,
    /// Non-fatal notes, e.g. regularization of a rank-deficient input covariance.
    pub warnings: Vec<String>,
}

/// Per-step relaxations and the probability levels they induce.
///
/// `alpha[k]` relaxes the state tightening: the tightening at step `k` uses
/// the PRS scaled by `1 − alpha[k]`. Indices past the horizon read as zero
/// relaxation, i.e. full tightening at the target level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TighteningSchedule {
    pub alpha: Vec<f64>,
    pub beta: Option<Vec<f64>>,
    pub relaxed_px: Vec<f64>,
    pub relaxed_pu: Option<Vec<f64>>,
    pub p_bar_x: f64,
    pub p_bar_u: Option<f64>,
}

impl TighteningSchedule {
    /// Builds the schedule from LP relaxations; `state_dim`/`input_dim` select
    /// the degrees of freedom of the probability scale.
    pub fn from_relaxations(
        alpha: Vec<f64>,
        beta: Option<Vec<f64>>,
        p_bar_x: f64,
        p_bar_u: Option<f64>,
        state_dim: usize,
        input_dim: usize,
        family: NoiseFamily,
    ) -> Result<Self> {
        let relaxed_px = alpha
            .iter()
            .map(|&a| probability_for_alpha(1.0 - a, p_bar_x, state_dim, family))
            .collect::<Result<Vec<_>>>()?;
        let relaxed_pu = match (&beta, p_bar_u) {
            (Some(b), Some(pu)) => Some(
                b.iter()
                    .map(|&bk| probability_for_alpha(1.0 - bk, pu, input_dim, family))
                    .collect::<Result<Vec<_>>>()?,
            ),
            _ => None,
        };
        Ok(TighteningSchedule {
            alpha,
            beta,
            relaxed_px,
            relaxed_pu,
            p_bar_x,
            p_bar_u,
        })
    }

    /// A schedule with no relaxation at all.
    pub fn unrelaxed(horizon: usize, p_bar_x: f64, p_bar_u: Option<f64>) -> Self {
        TighteningSchedule {
            alpha: vec![0.0; horizon],
            beta: p_bar_u.map(|_| vec![0.0; horizon]),
            relaxed_px: vec![p_bar_x; horizon],
            relaxed_pu: p_bar_u.map(|p| vec![p; horizon]),
            p_bar_x,
            p_bar_u,
        }
    }

    pub fn horizon(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha_at(&self, k: usize) -> f64 {
        self.alpha.get(k).copied().unwrap_or(0.0)
    }

    pub fn beta_at(&self, k: usize) -> f64 {
        self.beta
            .as_ref()
            .and_then(|b| b.get(k).copied())
            .unwrap_or(0.0)
    }

    pub fn relaxed_px_at(&self, k: usize) -> f64 {
        self.relaxed_px.get(k).copied().unwrap_or(self.p_bar_x)
    }

    /// Lower bound `min(p̄_x, p_x(k))` the closed loop must respect at step `k`.
    pub fn state_bound_at(&self, k: usize) -> f64 {
        self.p_bar_x.min(self.relaxed_px_at(k))
    }

    /// Steps with a relaxation above `tol`.
    pub fn support(&self, tol: f64) -> Vec<usize> {
        (0..self.horizon())
            .filter(|&k| self.alpha[k] > tol)
            .collect()
    }
}

/// Solves `A_K Σ A_Kᵀ − Σ + W = 0`.
///
/// Dimensions up to 20 use the Kronecker linear system; larger ones use Smith
/// doubling.
pub fn solve_lyapunov(a_k: &Mat, w: &Mat) -> Result<Mat> {
    let n = a_k.nrows();
    if !a_k.is_square() || w.shape() != (n, n) {
        return Err(Error::Dimension("Lyapunov operands must be n×n".into()));
    }
    let rho = spectral_radius(a_k);
    if !(rho < 1.0) {
        return Err(Error::UnstableClosedLoop(rho));
    }
    let sigma = if n <= 20 {
        let kron = a_k.kronecker(a_k);
        let lhs = Mat::identity(n * n, n * n) - kron;
        let rhs = Vector::from_column_slice(w.as_slice());
        let vec = lhs.lu().solve(&rhs).ok_or(Error::LyapunovFailed)?;
        Mat::from_column_slice(n, n, vec.as_slice())
    } else {
        let mut sigma = w.clone();
        let mut a = a_k.clone();
        for _ in 0..64 {
            let next = &sigma + &a * &sigma * a.transpose();
            let done = (&next - &sigma).norm() <= 1e-15 * next.norm();
            sigma = next;
            a = &a * &a;
            if done {
                break;
            }
        }
        sigma
    };
    let sigma = symmetrize(&sigma);
    let residual = (a_k * &sigma * a_k.transpose() - &sigma + w).norm();
    if !residual.is_finite() || residual > 1e-10 * w.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::LyapunovFailed);
    }
    Ok(sigma)
}

/// Scale `p̃` of the level-`p` PRS in dimension `d`.
pub fn probability_scale(p: f64, d: usize, family: NoiseFamily) -> Result<f64> {
    if d == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    if p == 1.0 && family == NoiseFamily::MomentOnly {
        return Err(Error::UnboundedScale);
    }
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Domain(format!("probability {p} outside [0, 1)")));
    }
    Ok(match family {
        NoiseFamily::MomentOnly => d as f64 / (1.0 - p),
        NoiseFamily::Gaussian => chi2_inv(p, d),
    })
}

/// Probability reached by a scale `p̃` (inverse of [`probability_scale`]).
fn probability_of_scale(scale: f64, d: usize, family: NoiseFamily) -> f64 {
    match family {
        NoiseFamily::MomentOnly => {
            if scale <= 0.0 {
                0.0
            } else {
                (1.0 - d as f64 / scale).max(0.0)
            }
        }
        NoiseFamily::Gaussian => chi2_cdf(scale, d),
    }
}

/// Radial factor `α = √(p̃(p_k) / p̃(p̄))` mapping the level-`p̄` PRS onto the level-`p_k` one.
pub fn alpha_for_probability(p_k: f64, p_bar: f64, d: usize, family: NoiseFamily) -> Result<f64> {
    if p_k > p_bar {
        return Err(Error::Domain(format!(
            "relaxed level {p_k} exceeds target {p_bar}"
        )));
    }
    let full = probability_scale(p_bar, d, family)?;
    let part = probability_scale(p_k, d, family)?;
    if full == 0.0 {
        return Ok(1.0);
    }
    Ok((part / full).sqrt().clamp(0.0, 1.0))
}

/// Probability level of the PRS `α·R(p̄)`.
pub fn probability_for_alpha(alpha: f64, p_bar: f64, d: usize, family: NoiseFamily) -> Result<f64> {
    let alpha = alpha.clamp(0.0, 1.0);
    if alpha == 1.0 {
        return Ok(p_bar);
    }
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let full = probability_scale(p_bar, d, family)?;
    Ok(probability_of_scale(alpha * alpha * full, d, family).min(p_bar))
}

/// Builds the state PRS (and input PRS when `p_bar_u` is given) for gain `K`.
pub fn build_prs(
    system: &LtiSystem,
    noise: &NoiseModel,
    k: &Mat,
    p_bar_x: f64,
    p_bar_u: Option<f64>,
    family: NoiseFamily,
) -> Result<PrsPair> {
    let n = system.n();
    let m = system.m();
    if k.shape() != (m, n) {
        return Err(Error::Dimension(format!("gain must be {m}×{n}")));
    }
    let a_k = &system.a + &system.b * k;
    let sigma = solve_lyapunov(&a_k, &noise.covariance)?;
    let p_tilde_x = probability_scale(p_bar_x, n, family)?;
    let state_prs = Ellipsoid {
        shape: &sigma * p_tilde_x,
        center: Vector::zeros(n),
    };
    let mut warnings = Vec::new();
    let (input_prs, p_tilde_u) = match p_bar_u {
        None => (None, None),
        Some(pu) => {
            let cov_u = symmetrize(&(k * &sigma * k.transpose()));
            let tr = cov_u.trace();
            if tr <= 0.0 {
                return Err(Error::DegenerateInputPrs);
            }
            let cov_u = if is_spd(&cov_u) {
                cov_u
            } else {
                warnings.push(format!(
                    "input error covariance rank-deficient; regularized with {:.3e}·I",
                    1e-12 * tr
                ));
                cov_u + Mat::identity(m, m) * (1e-12 * tr)
            };
            let p_tilde_u = probability_scale(pu, m, family)?;
            (
                Some(Ellipsoid {
                    shape: cov_u * p_tilde_u,
                    center: Vector::zeros(m),
                }),
                Some(p_tilde_u),
            )
        }
    };
    Ok(PrsPair {
        sigma,
        state_prs,
        input_prs,
        p_tilde_x,
        p_tilde_u,
        warnings,
    })
}
