//! Feedback gain from the discrete algebraic Riccati equation and the offline
//! synthesis pipeline: PRS, zonotopic over-approximations, fully tightened
//! constraint sets and the terminal set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{is_spd, spectral_radius, symmetrize, Mat, Vector};
use crate::model::{validate_instance, NoiseFamily, ProblemInstance, Severity};
use crate::reachability::{build_prs, Ellipsoid, PrsPair};
use crate::setops::{
    ellipsoid_to_zonotope, mpi_terminal_set, support_offsets, tighten, Polytope, Zonotope,
};
use crate::solver::LpBackend;

/// Default number of zonotope generators for the case study: the
/// circumscribed parallelotope of the PRS.
pub const DEFAULT_GENERATORS: usize = 2;
pub const DARE_TOL: f64 = 1e-12;
pub const DARE_MAX_ITER: usize = 10_000;
pub const DEFAULT_MPI_MAX_ITER: usize = 200;

#[derive(Debug, Clone)]
pub struct GainPack {
    /// `K = −(R + BᵀPB)⁻¹BᵀPA`
    pub k: Mat,
    pub p: Mat,
    /// `S = R + BᵀPB`
    pub s: Mat,
    pub a_k: Mat,
    pub iterations: usize,
    /// Trace of every Riccati iterate, starting with `P₀ = Q`.
    pub trace_history: Vec<f64>,
}

/// Stabilizing DARE solution by fixed-point Riccati iteration from `P₀ = Q`.
pub fn solve_dare(a: &Mat, b: &Mat, q: &Mat, r: &Mat) -> Result<GainPack> {
    let n = a.nrows();
    let m = b.ncols();
    if !a.is_square() || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::Dimension("DARE operand shapes".into()));
    }
    let gain = |p: &Mat| -> Result<Mat> {
        let s = r + b.transpose() * p * b;
        let rhs = b.transpose() * p * a;
        s.cholesky()
            .map(|ch| -ch.solve(&rhs))
            .ok_or_else(|| Error::DareFailed("R + BᵀPB not positive definite".into()))
    };
    let mut p = q.clone();
    let mut trace_history = vec![p.trace()];
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=DARE_MAX_ITER {
        let k = gain(&p)?;
        let next = symmetrize(&(a.transpose() * &p * a + a.transpose() * &p * b * &k + q));
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::DareFailed("iteration diverged".into()));
        }
        let delta = (&next - &p).norm();
        p = next;
        trace_history.push(p.trace());
        iterations = it;
        if delta <= DARE_TOL * p.norm() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::DareFailed(format!(
            "no convergence in {DARE_MAX_ITER} iterations"
        )));
    }
    let k = gain(&p)?;
    let a_k = a + b * &k;
    let rho = spectral_radius(&a_k);
    if !(rho < 1.0) {
        return Err(Error::DareFailed(format!(
            "closed loop not stable (spectral radius {rho:.6})"
        )));
    }
    let residual = (a.transpose() * &p * a + a.transpose() * &p * b * &k + q - &p).norm();
    if residual > 1e-9 * p.norm() {
        return Err(Error::DareFailed(format!(
            "residual {residual:.3e} too large"
        )));
    }
    let s = symmetrize(&(r + b.transpose() * &p * b));
    Ok(GainPack {
        k,
        p,
        s,
        a_k,
        iterations,
        trace_history,
    })
}

/// Knobs of the tightening pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TighteningOptions {
    pub generators: usize,
    /// Overrides the noise family when choosing the PRS scale (chi-squared vs Chebyshev).
    pub scale_family: Option<NoiseFamily>,
    pub mpi_max_iter: usize,
}

impl Default for TighteningOptions {
    fn default() -> Self {
        TighteningOptions {
            generators: DEFAULT_GENERATORS,
            scale_family: None,
            mpi_max_iter: DEFAULT_MPI_MAX_ITER,
        }
    }
}

/// Everything the safety LP and the tube MPC share.
#[derive(Debug, Clone)]
pub struct SynthesisContext {
    pub gains: GainPack,
    pub prs: PrsPair,
    pub family: NoiseFamily,
    pub zono_x: Zonotope,
    pub zono_u: Option<Zonotope>,
    /// `h_x,i = h_{Z_x}(a_x,i)`: how far row `i` of `X` moves under full tightening.
    pub offsets_x: Vector,
    pub offsets_u: Option<Vector>,
    pub state_set: Polytope,
    pub input_set: Option<Polytope>,
    pub fully_tightened_z: Polytope,
    pub fully_tightened_v: Option<Polytope>,
    pub terminal_set: Polytope,
    pub options: TighteningOptions,
}

impl SynthesisContext {
    /// State rows `A_x z <= b_x − (1 − α)·h_x`.
    pub fn state_rows(&self, alpha: f64) -> Polytope {
        tighten(&self.state_set, &self.zono_x, 1.0 - alpha)
    }

    pub fn input_rows(&self, beta: f64) -> Option<Polytope> {
        match (&self.input_set, &self.zono_u) {
            (Some(u), Some(z)) => Some(tighten(u, z, 1.0 - beta)),
            _ => None,
        }
    }

    /// Zonotopic cross-section of the tube for relaxation `α`.
    pub fn tube_section(&self, alpha: f64) -> Zonotope {
        self.zono_x.scaled(1.0 - alpha)
    }
}

/// Zonotope over-approximating the ellipsoid `{e : eᵀC⁻¹e <= scale}`.
fn scaled_zonotope(cov: &Mat, scale: f64, g: usize) -> Result<Zonotope> {
    let base = ellipsoid_to_zonotope(&Ellipsoid::new(cov.clone())?, g)?;
    Ok(base.scaled(scale.sqrt()))
}

/// Runs the offline pipeline: DARE gain, PRS, zonotopes, fully tightened sets
/// and MPI terminal set.
pub fn build_context(
    instance: &ProblemInstance,
    options: &TighteningOptions,
    lp: &dyn LpBackend,
) -> Result<SynthesisContext> {
    let errors: Vec<String> = validate_instance(instance)
        .into_iter()
        .filter(|v| v.severity == Severity::Error)
        .map(|v| v.message)
        .collect();
    if !errors.is_empty() {
        return Err(Error::InvalidInstance(errors.join("; ")));
    }
    let sys = &instance.system;
    let c = &instance.constraints;
    let gains = solve_dare(&sys.a, &sys.b, &instance.q, &instance.r)?;
    let family = options.scale_family.unwrap_or(instance.noise.family);
    let prs = build_prs(sys, &instance.noise, &gains.k, c.p_bar_x, c.p_bar_u, family)?;

    let zono_x = scaled_zonotope(&prs.sigma, prs.p_tilde_x, options.generators)?;
    let zono_u = match (&prs.input_prs, prs.p_tilde_u) {
        (Some(e), Some(pt)) => {
            // e.shape = p̃_u · (K Σ Kᵀ, possibly regularized)
            let cov_u = &e.shape / pt;
            Some(scaled_zonotope(&cov_u, pt, options.generators)?)
        }
        _ => None,
    };

    let offsets_x = support_offsets(&c.state_set, &zono_x);
    let fully_tightened_z = tighten(&c.state_set, &zono_x, 1.0);
    let (offsets_u, fully_tightened_v) = match (&c.input_set, &zono_u) {
        (Some(u), Some(z)) => (Some(support_offsets(u, z)), Some(tighten(u, z, 1.0))),
        _ => (None, None),
    };

    let terminal_set = mpi_terminal_set(
        &gains.a_k,
        &gains.k,
        &fully_tightened_z,
        fully_tightened_v.as_ref(),
        options.mpi_max_iter,
        lp,
    )?;

    debug_assert!(is_spd(&gains.p));
    Ok(SynthesisContext {
        gains,
        prs,
        family,
        zono_x,
        zono_u,
        offsets_x,
        offsets_u,
        state_set: c.state_set.clone(),
        input_set: c.input_set.clone(),
        fully_tightened_z,
        fully_tightened_v,
        terminal_set,
        options: *options,
    })
}
