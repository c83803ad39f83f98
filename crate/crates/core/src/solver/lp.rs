//! Dense two-phase tableau simplex.

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};

/// Box bound on one decision variable. `None` means unbounded on that side.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Bound {
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Bound {
    pub const FREE: Bound = Bound {
        lower: None,
        upper: None,
    };

    pub fn between(lower: f64, upper: f64) -> Self {
        Bound {
            lower: Some(lower),
            upper: Some(upper),
        }
    }
}

/// `min costᵀx  s.t.  eq_a x = eq_b,  ineq_a x <= ineq_b,  bounds`.
///
/// Either constraint block may have zero rows.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub cost: Vector,
    pub eq_a: Mat,
    pub eq_b: Vector,
    pub ineq_a: Mat,
    pub ineq_b: Vector,
    pub bounds: Vec<Bound>,
}

impl LinearProgram {
    /// An LP over `n` free variables with no constraints yet.
    pub fn new(cost: Vector) -> Self {
        let n = cost.len();
        LinearProgram {
            cost,
            eq_a: Mat::zeros(0, n),
            eq_b: Vector::zeros(0),
            ineq_a: Mat::zeros(0, n),
            ineq_b: Vector::zeros(0),
            bounds: vec![Bound::FREE; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    /// Largest violation of any constraint or bound at `x` (0 when feasible).
    pub fn max_violation(&self, x: &Vector) -> f64 {
        let mut worst = 0.0f64;
        if self.eq_a.nrows() > 0 {
            let r = &self.eq_a * x - &self.eq_b;
            worst = worst.max(r.amax());
        }
        if self.ineq_a.nrows() > 0 {
            let r = &self.ineq_a * x - &self.ineq_b;
            worst = worst.max(r.max().max(0.0));
        }
        for (xi, b) in x.iter().zip(&self.bounds) {
            if let Some(l) = b.lower {
                worst = worst.max(l - xi);
            }
            if let Some(u) = b.upper {
                worst = worst.max(xi - u);
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vector, objective: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn is_optimal(&self) -> bool {
        matches!(self, LpOutcome::Optimal { .. })
    }
}

/// Solver backend for linear programs.
pub trait LpBackend: Sync {
    fn solve(&self, lp: &LinearProgram) -> Result<LpOutcome>;
}

/// Reference backend: dense tableau simplex with Dantzig pricing and a Bland
/// fallback after a run of degenerate pivots.
#[derive(Debug, Clone, Copy)]
pub struct DenseSimplex {
    pub pivot_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
}

impl Default for DenseSimplex {
    fn default() -> Self {
        DenseSimplex {
            pivot_tol: 1e-10,
            feas_tol: 1e-8,
            max_iter: 50_000,
        }
    }
}

/// Original variable `x_j = offset + Σ coef·y_col` in terms of nonnegative columns.
struct VarMap {
    offset: f64,
    terms: Vec<(usize, f64)>,
}

struct Tableau {
    rows: usize,
    cols: usize,
    // row-major, `cols + 1` entries per row, rhs last
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize, obj: &mut [f64]) {
        let w = self.cols + 1;
        let p = self.data[pr * w + pc];
        for c in 0..w {
            self.data[pr * w + c] /= p;
        }
        let (before, rest) = self.data.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_mut(w).chain(after.chunks_mut(w)) {
            let f = row[pc];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
                row[pc] = 0.0;
            }
        }
        let f = obj[pc];
        if f != 0.0 {
            for (v, pv) in obj.iter_mut().zip(prow.iter()) {
                *v -= f * pv;
            }
            obj[pc] = 0.0;
        }
        self.basis[pr] = pc;
    }
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl DenseSimplex {
    /// Runs primal simplex on `obj` (reduced costs, last entry = −objective).
    fn iterate(&self, t: &mut Tableau, obj: &mut [f64], allowed: usize) -> Result<PhaseEnd> {
        let mut degenerate_run = 0usize;
        for _ in 0..self.max_iter {
            let bland = degenerate_run > 50;
            let mut enter = None;
            let mut best = -1e-9;
            for (c, &rc) in obj.iter().enumerate().take(allowed) {
                if rc < -1e-9 {
                    if bland {
                        enter = Some(c);
                        break;
                    }
                    if rc < best {
                        best = rc;
                        enter = Some(c);
                    }
                }
            }
            let Some(pc) = enter else {
                return Ok(PhaseEnd::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..t.rows {
                let a = t.at(r, pc);
                if a > self.pivot_tol {
                    let ratio = t.rhs(r).max(0.0) / a;
                    match leave {
                        None => leave = Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio - 1e-12
                                || (ratio <= lratio + 1e-12 && t.basis[r] < t.basis[lr])
                            {
                                leave = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let Some((pr, ratio)) = leave else {
                return Ok(PhaseEnd::Unbounded);
            };
            if ratio <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            t.pivot(pr, pc, obj);
        }
        Err(Error::Solver("simplex iteration limit reached".into()))
    }
}

impl LpBackend for DenseSimplex {
    fn solve(&self, lp: &LinearProgram) -> Result<LpOutcome> {
        let n = lp.num_vars();
        if lp.bounds.len() != n || lp.eq_a.ncols() != n || lp.ineq_a.ncols() != n {
            return Err(Error::Dimension(
                "LP data inconsistent with cost length".into(),
            ));
        }

        // variable substitution into nonnegative columns
        let mut maps = Vec::with_capacity(n);
        let mut ncols = 0usize;
        let mut bound_rows: Vec<(usize, f64)> = Vec::new();
        for b in &lp.bounds {
            match (b.lower, b.upper) {
                (Some(l), u) => {
                    if let Some(u) = u {
                        if u < l {
                            return Ok(LpOutcome::Infeasible);
                        }
                        bound_rows.push((ncols, u - l));
                    }
                    maps.push(VarMap {
                        offset: l,
                        terms: vec![(ncols, 1.0)],
                    });
                    ncols += 1;
                }
                (None, Some(u)) => {
                    maps.push(VarMap {
                        offset: u,
                        terms: vec![(ncols, -1.0)],
                    });
                    ncols += 1;
                }
                (None, None) => {
                    maps.push(VarMap {
                        offset: 0.0,
                        terms: vec![(ncols, 1.0), (ncols + 1, -1.0)],
                    });
                    ncols += 2;
                }
            }
        }

        // rows in y-space: (coeffs, rhs, has_slack)
        let mut rows: Vec<(Vec<f64>, f64, bool)> = Vec::new();
        let push_row = |a: &[f64], b: f64, slack: bool, rows: &mut Vec<(Vec<f64>, f64, bool)>| {
            let mut coeffs = vec![0.0; ncols];
            let mut rhs = b;
            for (j, &aj) in a.iter().enumerate() {
                if aj == 0.0 {
                    continue;
                }
                rhs -= aj * maps[j].offset;
                for &(c, s) in &maps[j].terms {
                    coeffs[c] += aj * s;
                }
            }
            rows.push((coeffs, rhs, slack));
        };
        for i in 0..lp.eq_a.nrows() {
            let a: Vec<f64> = lp.eq_a.row(i).iter().copied().collect();
            push_row(&a, lp.eq_b[i], false, &mut rows);
        }
        for i in 0..lp.ineq_a.nrows() {
            let a: Vec<f64> = lp.ineq_a.row(i).iter().copied().collect();
            push_row(&a, lp.ineq_b[i], true, &mut rows);
        }
        for &(c, width) in &bound_rows {
            let mut coeffs = vec![0.0; ncols];
            coeffs[c] = 1.0;
            rows.push((coeffs, width, true));
        }

        let m = rows.len();
        let nslack = rows.iter().filter(|r| r.2).count();
        let art0 = ncols + nslack;
        let total = art0 + m;
        let w = total + 1;
        let mut t = Tableau {
            rows: m,
            cols: total,
            data: vec![0.0; m * w],
            basis: vec![0; m],
        };
        let mut slack_col = ncols;
        for (r, (coeffs, rhs, slack)) in rows.into_iter().enumerate() {
            let sign = if rhs < 0.0 { -1.0 } else { 1.0 };
            let row = &mut t.data[r * w..(r + 1) * w];
            for (c, v) in coeffs.into_iter().enumerate() {
                row[c] = sign * v;
            }
            if slack {
                row[slack_col] = sign;
                slack_col += 1;
            }
            row[art0 + r] = 1.0;
            row[total] = sign * rhs;
            t.basis[r] = art0 + r;
        }

        // phase I: minimize the sum of artificials
        let mut obj = vec![0.0; w];
        for r in 0..m {
            let row = &t.data[r * w..(r + 1) * w];
            for (c, o) in obj.iter_mut().enumerate() {
                if c < art0 || c == total {
                    *o -= row[c];
                }
            }
        }
        self.iterate(&mut t, &mut obj, art0)?;
        let infeas = -obj[total];
        let rhs_scale = 1.0 + (0..m).map(|r| t.rhs(r).abs()).fold(0.0, f64::max);
        if infeas > self.feas_tol * rhs_scale {
            return Ok(LpOutcome::Infeasible);
        }
        // pivot zero-level artificials out where possible
        for r in 0..m {
            if t.basis[r] >= art0 {
                let pc = (0..art0)
                    .max_by(|&a, &b| t.at(r, a).abs().partial_cmp(&t.at(r, b).abs()).unwrap());
                if let Some(pc) = pc {
                    if t.at(r, pc).abs() > self.pivot_tol {
                        t.pivot(r, pc, &mut obj);
                    }
                }
            }
        }

        // phase II
        let mut cost_y = vec![0.0; total];
        let mut const_obj = 0.0;
        for (j, map) in maps.iter().enumerate() {
            const_obj += lp.cost[j] * map.offset;
            for &(c, s) in &map.terms {
                cost_y[c] += lp.cost[j] * s;
            }
        }
        let mut obj = vec![0.0; w];
        obj[..total].copy_from_slice(&cost_y);
        for r in 0..m {
            let cb = if t.basis[r] < total {
                cost_y[t.basis[r]]
            } else {
                0.0
            };
            if cb != 0.0 {
                for (o, v) in obj.iter_mut().zip(&t.data[r * w..(r + 1) * w]) {
                    *o -= cb * v;
                }
            }
        }
        if let PhaseEnd::Unbounded = self.iterate(&mut t, &mut obj, art0)? {
            return Ok(LpOutcome::Unbounded);
        }

        let mut y = vec![0.0; total];
        for r in 0..m {
            y[t.basis[r]] = t.rhs(r);
        }
        let x = Vector::from_iterator(
            n,
            maps.iter()
                .map(|map| map.offset + map.terms.iter().map(|&(c, s)| s * y[c]).sum::<f64>()),
        );
        let objective = lp.cost.dot(&x);
        debug_assert!(
            (objective - (const_obj - obj[total])).abs() < 1e-6 * (1.0 + objective.abs())
        );
        Ok(LpOutcome::Optimal { x, objective })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_rows;

    fn solve(lp: &LinearProgram) -> LpOutcome {
        DenseSimplex::default().solve(lp).unwrap()
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18, x,y >= 0 -> (2, 6), 36
        let mut lp = LinearProgram::new(Vector::from_vec(vec![-3.0, -5.0]));
        lp.ineq_a = from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]]).unwrap();
        lp.ineq_b = Vector::from_vec(vec![4.0, 12.0, 18.0]);
        lp.bounds = vec![
            Bound {
                lower: Some(0.0),
                upper: None
            };
            2
        ];
        match solve(&lp) {
            LpOutcome::Optimal { x, objective } => {
                assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
                assert!((objective + 36.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn free_variables_and_equalities() {
        // min x + y s.t. x - y = -3, x >= -10, y <= 2 (free otherwise) -> x=-1? check: y = x+3 <= 2 -> x <= -1
        // objective 2x + 3 minimized at x = -10 -> y = -7
        let mut lp = LinearProgram::new(Vector::from_vec(vec![1.0, 1.0]));
        lp.eq_a = from_rows(&[vec![1.0, -1.0]]).unwrap();
        lp.eq_b = Vector::from_vec(vec![-3.0]);
        lp.bounds = vec![
            Bound {
                lower: Some(-10.0),
                upper: None,
            },
            Bound {
                lower: None,
                upper: Some(2.0),
            },
        ];
        match solve(&lp) {
            LpOutcome::Optimal { x, objective } => {
                assert!(
                    (x[0] + 10.0).abs() < 1e-9 && (x[1] + 7.0).abs() < 1e-9,
                    "{x}"
                );
                assert!((objective + 17.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(Vector::from_vec(vec![1.0]));
        lp.ineq_a = from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        lp.ineq_b = Vector::from_vec(vec![-1.0, -1.0]);
        assert_eq!(solve(&lp), LpOutcome::Infeasible);

        let mut lp = LinearProgram::new(Vector::from_vec(vec![-1.0, 0.0]));
        lp.ineq_a = from_rows(&[vec![0.0, 1.0]]).unwrap();
        lp.ineq_b = Vector::from_vec(vec![1.0]);
        assert_eq!(solve(&lp), LpOutcome::Unbounded);
    }

    #[test]
    fn degenerate_redundant_equalities() {
        // duplicated equality row leaves an artificial at zero level
        let mut lp = LinearProgram::new(Vector::from_vec(vec![1.0, 2.0]));
        lp.eq_a = from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        lp.eq_b = Vector::from_vec(vec![1.0, 2.0]);
        lp.bounds = vec![
            Bound {
                lower: Some(0.0),
                upper: None
            };
            2
        ];
        match solve(&lp) {
            LpOutcome::Optimal { x, objective } => {
                assert!((x[0] - 1.0).abs() < 1e-9 && x[1].abs() < 1e-9);
                assert!((objective - 1.0).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bounded_box_variable() {
        let mut lp = LinearProgram::new(Vector::from_vec(vec![-1.0]));
        lp.bounds = vec![Bound::between(0.25, 0.75)];
        match solve(&lp) {
            LpOutcome::Optimal { x, .. } => assert!((x[0] - 0.75).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        lp.bounds = vec![Bound::between(1.0, 0.0)];
        assert_eq!(solve(&lp), LpOutcome::Infeasible);
    }
}
