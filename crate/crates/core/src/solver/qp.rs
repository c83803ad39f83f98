//! Strictly convex inequality-constrained QP via the Goldfarb–Idnani dual
//! active-set method.

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};

/// `min ½xᵀHx + fᵀx  s.t.  C x <= d`, with `H` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct QuadraticProgram {
    pub hessian: Mat,
    pub linear: Vector,
    pub ineq_a: Mat,
    pub ineq_b: Vector,
}

impl QuadraticProgram {
    pub fn objective(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.linear.dot(x)
    }

    pub fn max_violation(&self, x: &Vector) -> f64 {
        if self.ineq_a.nrows() == 0 {
            return 0.0;
        }
        (&self.ineq_a * x - &self.ineq_b).max().max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QpOutcome {
    Optimal { x: Vector, objective: f64 },
    Infeasible,
}

/// Solver backend for strictly convex QPs.
pub trait QpBackend: Sync {
    fn solve(&self, qp: &QuadraticProgram) -> Result<QpOutcome>;
}

#[derive(Debug, Clone, Copy)]
pub struct DualActiveSet {
    pub feas_tol: f64,
    pub max_iter: usize,
}

impl Default for DualActiveSet {
    fn default() -> Self {
        DualActiveSet {
            feas_tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

impl QpBackend for DualActiveSet {
    fn solve(&self, qp: &QuadraticProgram) -> Result<QpOutcome> {
        let h_inv = qp
            .hessian
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Solver("Hessian not positive definite".into()))?
            .inverse();
        self.solve_with_inverse(qp, &h_inv)
    }
}

impl DualActiveSet {
    /// Same as [`QpBackend::solve`] with a precomputed `H⁻¹`, for repeated solves
    /// that share the Hessian.
    pub fn solve_with_inverse(&self, qp: &QuadraticProgram, h_inv: &Mat) -> Result<QpOutcome> {
        let c = &qp.ineq_a;
        let d = &qp.ineq_b;
        let rows = c.nrows();
        let norms: Vec<f64> = (0..rows).map(|j| c.row(j).norm().max(1e-300)).collect();

        // constraints in GI form n_jᵀx >= b_j with n_j = -C_j, b_j = -d_j
        let normal = |j: usize| -> Vector { -c.row(j).transpose() };
        // slack s_j(x) = d_j - C_j x >= 0
        let slack = |x: &Vector, j: usize| d[j] - c.row(j).dot(&x.transpose());

        let mut x = -(h_inv * &qp.linear);
        let mut active: Vec<usize> = Vec::new();
        let mut u: Vec<f64> = Vec::new();

        for _ in 0..self.max_iter {
            // most violated constraint (scaled)
            let mut pick = None;
            let mut worst = 0.0;
            for j in 0..rows {
                if active.contains(&j) {
                    continue;
                }
                let s = slack(&x, j);
                let tol = self.feas_tol * (1.0 + d[j].abs());
                if s < -tol && -s / norms[j] > worst {
                    worst = -s / norms[j];
                    pick = Some(j);
                }
            }
            let Some(p) = pick else {
                let objective = qp.objective(&x);
                return Ok(QpOutcome::Optimal { x, objective });
            };
            let n_plus = normal(p);
            let mut u_plus = 0.0;

            loop {
                let q = active.len();
                let hn = h_inv * &n_plus;
                let (z, r) = if q == 0 {
                    (hn, Vector::zeros(0))
                } else {
                    let nmat =
                        Mat::from_columns(&active.iter().map(|&j| normal(j)).collect::<Vec<_>>());
                    let m = nmat.transpose() * h_inv * &nmat;
                    let rhs = nmat.transpose() * &hn;
                    let r = m
                        .lu()
                        .solve(&rhs)
                        .ok_or_else(|| Error::Solver("singular active-set system".into()))?;
                    (h_inv * (&n_plus - &nmat * &r), r)
                };

                // partial (dual) step length
                let mut t1 = f64::INFINITY;
                let mut drop = None;
                for (idx, &rj) in r.iter().enumerate() {
                    if rj > 1e-12 {
                        let ratio = u[idx] / rj;
                        if ratio < t1 {
                            t1 = ratio;
                            drop = Some(idx);
                        }
                    }
                }
                // full (primal) step length
                let zn = z.dot(&n_plus);
                let t2 = if z.amax() <= 1e-14 || zn <= 1e-14 {
                    f64::INFINITY
                } else {
                    -slack(&x, p) / zn
                };

                if t1.is_infinite() && t2.is_infinite() {
                    return Ok(QpOutcome::Infeasible);
                }
                if t2.is_infinite() {
                    for (ui, ri) in u.iter_mut().zip(r.iter()) {
                        *ui -= t1 * ri;
                    }
                    u_plus += t1;
                    let l = drop.expect("finite t1 has a drop index");
                    active.remove(l);
                    u.remove(l);
                    continue;
                }
                let t = t1.min(t2);
                x += &z * t;
                for (ui, ri) in u.iter_mut().zip(r.iter()) {
                    *ui -= t * ri;
                }
                u_plus += t;
                if t2 <= t1 {
                    active.push(p);
                    u.push(u_plus);
                    break;
                }
                let l = drop.expect("finite t1 has a drop index");
                active.remove(l);
                u.remove(l);
            }
        }
        Err(Error::Solver("QP iteration limit reached".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_rows;

    fn solve(qp: &QuadraticProgram) -> QpOutcome {
        DualActiveSet::default().solve(qp).unwrap()
    }

    #[test]
    fn unconstrained_minimum() {
        let qp = QuadraticProgram {
            hessian: Mat::identity(2, 2) * 2.0,
            linear: Vector::from_vec(vec![-2.0, 4.0]),
            ineq_a: Mat::zeros(0, 2),
            ineq_b: Vector::zeros(0),
        };
        match solve(&qp) {
            QpOutcome::Optimal { x, objective } => {
                assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] + 2.0).abs() < 1e-12);
                assert!((objective + 5.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn projection_onto_halfplanes() {
        // project (2, 2) onto {x <= 1, y <= 0.5}: min ½|x - p|²
        let qp = QuadraticProgram {
            hessian: Mat::identity(2, 2),
            linear: Vector::from_vec(vec![-2.0, -2.0]),
            ineq_a: from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap(),
            ineq_b: Vector::from_vec(vec![1.0, 0.5, 10.0]),
        };
        match solve(&qp) {
            QpOutcome::Optimal { x, .. } => {
                assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 0.5).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constraint_dropped_after_entering() {
        // projection of (0, 0) onto {x + y >= 2, x <= 0.5}: answer (0.5, 1.5)
        let qp = QuadraticProgram {
            hessian: Mat::identity(2, 2),
            linear: Vector::zeros(2),
            ineq_a: from_rows(&[vec![-1.0, -1.0], vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap(),
            ineq_b: Vector::from_vec(vec![-2.0, 0.5, 5.0]),
        };
        match solve(&qp) {
            QpOutcome::Optimal { x, .. } => {
                assert!(
                    (x[0] - 0.5).abs() < 1e-10 && (x[1] - 1.5).abs() < 1e-10,
                    "{x}"
                );
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_detected() {
        let qp = QuadraticProgram {
            hessian: Mat::identity(1, 1),
            linear: Vector::zeros(1),
            ineq_a: from_rows(&[vec![1.0], vec![-1.0]]).unwrap(),
            ineq_b: Vector::from_vec(vec![-1.0, -1.0]),
        };
        assert_eq!(solve(&qp), QpOutcome::Infeasible);
    }
}
