//! Polytope / zonotope set algebra used for analytic constraint tightening.
//!
//! Tightening `X ⊖ s·Z` of a halfspace polytope by a centrally symmetric
//! zonotope is computed row by row with the zonotope support function
//! `h_Z(a) = aᵀc + Σ_j |aᵀg_j|`. The vertex-intersection construction
//! ([`pontryagin_by_vertices`]) yields the same set and is kept for
//! cross-checking.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{sym_sqrt, Mat, Vector};
use crate::reachability::Ellipsoid;
use crate::solver::{LinearProgram, LpBackend, LpOutcome};

/// Containment tolerance for [`Polytope::contains`].
pub const CONTAINS_TOL: f64 = 1e-9;
/// Largest generator count accepted by vertex enumeration.
pub const MAX_ENUM_GENERATORS: usize = 16;

/// Halfspace polytope `{x : A x <= b}`. Need not be bounded.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    pub a: Mat,
    pub b: Vector,
}

impl Polytope {
    pub fn new(a: Mat, b: Vector) -> Result<Self> {
        if a.nrows() == 0 {
            return Err(Error::Dimension(
                "polytope needs at least one halfspace".into(),
            ));
        }
        if a.nrows() != b.len() {
            return Err(Error::Dimension(format!(
                "polytope has {} rows but {} offsets",
                a.nrows(),
                b.len()
            )));
        }
        if let Some(i) = (0..a.nrows()).find(|&i| a.row(i).amax() == 0.0) {
            return Err(Error::Dimension(format!("polytope row {i} is zero")));
        }
        Ok(Polytope { a, b })
    }

    /// Axis-aligned box `lo_i <= x_i <= hi_i`, rows ordered `+e_1, …, +e_d, −e_1, …, −e_d`.
    pub fn from_box(bounds: &[(f64, f64)]) -> Result<Self> {
        let d = bounds.len();
        if d == 0 {
            return Err(Error::Dimension("empty box".into()));
        }
        let mut a = Mat::zeros(2 * d, d);
        let mut b = Vector::zeros(2 * d);
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo <= hi) {
                return Err(Error::Domain(format!("box bound {i}: lo {lo} > hi {hi}")));
            }
            a[(i, i)] = 1.0;
            b[i] = hi;
            a[(d + i, i)] = -1.0;
            b[d + i] = -lo;
        }
        Ok(Polytope { a, b })
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn contains(&self, x: &Vector) -> bool {
        (&self.a * x - &self.b).iter().all(|&r| r <= CONTAINS_TOL)
    }

    /// `A x − b`, positive entries are violations.
    pub fn residual(&self, x: &Vector) -> Vector {
        &self.a * x - &self.b
    }

    /// Rows scaled to unit Euclidean norm (same set).
    pub fn normalized(&self) -> Polytope {
        let mut a = self.a.clone();
        let mut b = self.b.clone();
        for i in 0..a.nrows() {
            let nrm = a.row(i).norm();
            if nrm > 0.0 {
                a.row_mut(i).unscale_mut(nrm);
                b[i] /= nrm;
            }
        }
        Polytope { a, b }
    }

    pub fn intersect(&self, other: &Polytope) -> Polytope {
        let mut a = Mat::zeros(self.num_rows() + other.num_rows(), self.dim());
        a.rows_mut(0, self.num_rows()).copy_from(&self.a);
        a.rows_mut(self.num_rows(), other.num_rows())
            .copy_from(&other.a);
        let b = Vector::from_iterator(
            self.num_rows() + other.num_rows(),
            self.b.iter().chain(other.b.iter()).copied(),
        );
        Polytope { a, b }
    }

    /// `{x : M x ∈ self}` for a linear map `M`.
    pub fn preimage(&self, m: &Mat) -> Polytope {
        Polytope {
            a: &self.a * m,
            b: self.b.clone(),
        }
    }

    /// `sup_{x ∈ P} dᵀx`: `Ok(None)` when unbounded, error when `P` is empty.
    pub fn support(&self, direction: &Vector, lp: &dyn LpBackend) -> Result<Option<f64>> {
        let mut prog = LinearProgram::new(-direction.clone());
        prog.ineq_a = self.a.clone();
        prog.ineq_b = self.b.clone();
        match lp.solve(&prog)? {
            LpOutcome::Optimal { objective, .. } => Ok(Some(-objective)),
            LpOutcome::Unbounded => Ok(None),
            LpOutcome::Infeasible => Err(Error::Domain("support of an empty polytope".into())),
        }
    }

    pub fn is_empty(&self, lp: &dyn LpBackend) -> Result<bool> {
        let mut prog = LinearProgram::new(Vector::zeros(self.dim()));
        prog.ineq_a = self.a.clone();
        prog.ineq_b = self.b.clone();
        Ok(matches!(lp.solve(&prog)?, LpOutcome::Infeasible))
    }

    /// Drops rows implied by the remaining ones.
    pub fn remove_redundant(&self, lp: &dyn LpBackend) -> Result<Polytope> {
        let mut keep: Vec<bool> = vec![true; self.num_rows()];
        for i in 0..self.num_rows() {
            let others: Vec<usize> = (0..self.num_rows())
                .filter(|&j| j != i && keep[j])
                .collect();
            if others.is_empty() {
                continue;
            }
            let sub = self.select_rows(&others);
            let dir = self.a.row(i).transpose();
            if let Some(h) = sub.support(&dir, lp)? {
                if h <= self.b[i] + CONTAINS_TOL * (1.0 + self.b[i].abs()) {
                    keep[i] = false;
                }
            }
        }
        let rows: Vec<usize> = (0..self.num_rows()).filter(|&i| keep[i]).collect();
        Ok(self.select_rows(&rows))
    }

    fn select_rows(&self, rows: &[usize]) -> Polytope {
        Polytope {
            a: self.a.select_rows(rows),
            b: self.b.select_rows(rows),
        }
    }

    /// Row-wise inclusion `self ⊆ other`: every row of `other` is satisfied by all of `self`.
    pub fn is_subset_of(&self, other: &Polytope, lp: &dyn LpBackend) -> Result<bool> {
        for i in 0..other.num_rows() {
            let dir = other.a.row(i).transpose();
            match self.support(&dir, lp)? {
                Some(h) if h <= other.b[i] + 1e-7 * (1.0 + other.b[i].abs()) => {}
                _ => return Ok(false),
            }
        }
        Ok(true)
    }

    /// Vertices of a bounded 2-D polytope in counter-clockwise order.
    pub fn vertices_2d(&self) -> Result<Vec<Vector>> {
        if self.dim() != 2 {
            return Err(Error::Dimension(
                "vertices_2d needs a planar polytope".into(),
            ));
        }
        let mut pts = Vec::new();
        let q = self.num_rows();
        for i in 0..q {
            for j in (i + 1)..q {
                let (a1, a2) = (self.a.row(i), self.a.row(j));
                let det = a1[0] * a2[1] - a1[1] * a2[0];
                if det.abs() < 1e-12 {
                    continue;
                }
                let x = (self.b[i] * a2[1] - self.b[j] * a1[1]) / det;
                let y = (a1[0] * self.b[j] - a2[0] * self.b[i]) / det;
                let p = Vector::from_vec(vec![x, y]);
                if self.residual(&p).iter().all(|&r| r <= 1e-8) {
                    pts.push(p);
                }
            }
        }
        Ok(convex_hull_2d(pts))
    }
}

/// Zonotope `{c + G ξ : ‖ξ‖_∞ <= 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Zonotope {
    pub center: Vector,
    pub generators: Mat,
}

impl Zonotope {
    pub fn new(center: Vector, generators: Mat) -> Result<Self> {
        if center.len() != generators.nrows() {
            return Err(Error::Dimension(
                "zonotope center/generator mismatch".into(),
            ));
        }
        Ok(Zonotope { center, generators })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn num_generators(&self) -> usize {
        self.generators.ncols()
    }

    pub fn scaled(&self, s: f64) -> Zonotope {
        Zonotope {
            center: &self.center * s,
            generators: &self.generators * s,
        }
    }

    /// Exact support function `aᵀc + Σ_j |aᵀg_j|`.
    pub fn support(&self, a: &Vector) -> f64 {
        let proj = self.generators.transpose() * a;
        a.dot(&self.center) + proj.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Extreme points, by sign-pattern enumeration filtered to the convex hull.
    pub fn vertices(&self) -> Result<VertexSet> {
        let g_all = self.num_generators();
        if g_all > MAX_ENUM_GENERATORS {
            return Err(Error::GeneratorBudgetExceeded(g_all));
        }
        let gens: Vec<Vector> = (0..g_all)
            .map(|j| self.generators.column(j).into_owned())
            .filter(|g| g.amax() > 0.0)
            .collect();
        let g = gens.len();
        let d = self.dim();
        let candidate = |mask: usize| -> Vector {
            let mut p = self.center.clone();
            for (j, gj) in gens.iter().enumerate() {
                let s = if mask >> j & 1 == 1 { 1.0 } else { -1.0 };
                p.axpy(s, gj, 1.0);
            }
            p
        };
        let verts = match d {
            1 => {
                let r: f64 = gens.iter().map(|v| v[0].abs()).sum();
                vec![
                    Vector::from_element(1, self.center[0] - r),
                    Vector::from_element(1, self.center[0] + r),
                ]
            }
            2 => convex_hull_2d((0..1usize << g).map(candidate).collect()),
            _ => {
                // σ is extreme iff some direction a has σ_j aᵀg_j >= 1 for all j
                let lp = crate::solver::DenseSimplex::default();
                let mut out = Vec::new();
                for mask in 0..1usize << g {
                    let mut prog = LinearProgram::new(Vector::zeros(d));
                    prog.ineq_a = Mat::from_fn(g, d, |j, i| {
                        let s = if mask >> j & 1 == 1 { 1.0 } else { -1.0 };
                        -s * gens[j][i]
                    });
                    prog.ineq_b = Vector::from_element(g, -1.0);
                    if lp.solve(&prog)?.is_optimal() {
                        out.push(candidate(mask));
                    }
                }
                out
            }
        };
        Ok(VertexSet::new(verts))
    }

    /// Halfspace form; facet normals come from `(d−1)`-subsets of generators.
    pub fn to_halfspace(&self) -> Result<Polytope> {
        let d = self.dim();
        let gens: Vec<Vector> = (0..self.num_generators())
            .map(|j| self.generators.column(j).into_owned())
            .filter(|g| g.amax() > 1e-14)
            .collect();
        if self.generators.rank(1e-10 * (1.0 + self.generators.amax())) < d {
            return Err(Error::NotFullDimensional);
        }
        let mut normals: Vec<Vector> = Vec::new();
        if d == 1 {
            normals.push(Vector::from_element(1, 1.0));
        } else {
            for subset in combinations(gens.len(), d - 1) {
                let cols: Vec<&Vector> = subset.iter().map(|&j| &gens[j]).collect();
                let nrm = generalized_cross(&cols);
                let len = nrm.norm();
                if len < 1e-12 {
                    continue;
                }
                let unit = nrm / len;
                if !normals
                    .iter()
                    .any(|m| (m.dot(&unit).abs() - 1.0).abs() < 1e-10)
                {
                    normals.push(unit);
                }
            }
        }
        let q = 2 * normals.len();
        let mut a = Mat::zeros(q, d);
        let mut b = Vector::zeros(q);
        for (i, nrm) in normals.iter().enumerate() {
            for (row, dir) in [(2 * i, nrm.clone()), (2 * i + 1, -nrm)] {
                a.row_mut(row).copy_from(&dir.transpose());
                b[row] = self.support(&dir);
            }
        }
        Polytope::new(a, b)
    }
}

/// Distinct extreme points of a convex body.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexSet {
    pub vertices: Vec<Vector>,
}

impl VertexSet {
    /// Deduplicates points closer than 1e-9.
    pub fn new(points: Vec<Vector>) -> Self {
        let mut vertices: Vec<Vector> = Vec::with_capacity(points.len());
        for p in points {
            if !vertices.iter().any(|v| (v - &p).amax() < 1e-9) {
                vertices.push(p);
            }
        }
        VertexSet { vertices }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

/// Over-approximates an ellipsoid by a zonotope `L·Z_ball` where `L` is the
/// symmetric square root of the shape matrix.
///
/// In 2-D the unit-ball template has `g` generators at angles `kπ/g` with
/// length `tan(π/(2g))` (a circumscribed regular `2g`-gon, so `g = 2` is the
/// circumscribed square). In other dimensions the template is the unit box
/// and `g` only has to be at least `d`.
pub fn ellipsoid_to_zonotope(e: &Ellipsoid, g: usize) -> Result<Zonotope> {
    let d = e.dim();
    if g < d {
        return Err(Error::InsufficientGenerators {
            generators: g,
            dim: d,
        });
    }
    let l = sym_sqrt(&e.shape);
    let template = if d == 2 {
        let len = (std::f64::consts::PI / (2.0 * g as f64)).tan();
        Mat::from_fn(2, g, |i, k| {
            let ang = k as f64 * std::f64::consts::PI / g as f64;
            len * if i == 0 { ang.cos() } else { ang.sin() }
        })
    } else {
        Mat::identity(d, d)
    };
    Zonotope::new(e.center.clone(), l * template)
}

/// `P ⊖ s·Z` for a zonotope centred at the origin: `b_i − s·h_Z(a_i)`.
///
/// The offsets may become negative (an empty set is a valid result).
pub fn tighten(p: &Polytope, z: &Zonotope, s: f64) -> Polytope {
    let h = support_offsets(p, z);
    Polytope {
        a: p.a.clone(),
        b: &p.b - h * s,
    }
}

/// Per-row support values `h_Z(a_i)` for every row `a_i` of `P`.
pub fn support_offsets(p: &Polytope, z: &Zonotope) -> Vector {
    Vector::from_iterator(
        p.num_rows(),
        (0..p.num_rows()).map(|i| z.support(&p.a.row(i).transpose())),
    )
}

/// `⋂_{v ∈ V} (P − s·v)`, one copy of the rows of `P` per vertex.
pub fn pontryagin_by_vertices(p: &Polytope, vertices: &VertexSet, s: f64) -> Polytope {
    let q = p.num_rows();
    let r = vertices.len();
    let mut a = Mat::zeros(q * r, p.dim());
    let mut b = Vector::zeros(q * r);
    for (k, v) in vertices.vertices.iter().enumerate() {
        let shift = &p.a * v;
        for i in 0..q {
            a.row_mut(k * q + i).copy_from(&p.a.row(i));
            b[k * q + i] = p.b[i] - s * shift[i];
        }
    }
    Polytope { a, b }
}

/// Maximal positively invariant set of `z⁺ = A_K z` inside
/// `Zf ∩ {z : K z ∈ Vf}`.
///
/// Rows `H A_Kᵗ z <= h` are appended while any of them cuts the current set;
/// the first stage that adds nothing certifies invariance. Redundant rows are
/// pruned from the result.
pub fn mpi_terminal_set(
    a_k: &Mat,
    k: &Mat,
    zf_state: &Polytope,
    vf_input: Option<&Polytope>,
    max_iter: usize,
    lp: &dyn LpBackend,
) -> Result<Polytope> {
    let mut base = zf_state.clone();
    if let Some(v) = vf_input {
        base = base.intersect(&v.preimage(k));
    }
    let base = base.normalized();
    if base.is_empty(lp)? {
        return Err(Error::TerminalSetEmpty);
    }
    let mut current = base.clone();
    let mut power = a_k.clone();
    for _ in 0..max_iter {
        let stage = base.preimage(&power);
        let mut new_rows = Vec::new();
        for i in 0..stage.num_rows() {
            let row = stage.a.row(i).transpose();
            let nrm = row.norm();
            if nrm < 1e-14 {
                if stage.b[i] < -CONTAINS_TOL {
                    return Err(Error::TerminalSetEmpty);
                }
                continue;
            }
            let redundant = match current.support(&row, lp)? {
                Some(h) => h <= stage.b[i] + CONTAINS_TOL * (1.0 + stage.b[i].abs()),
                None => false,
            };
            if !redundant {
                new_rows.push(i);
            }
        }
        if new_rows.is_empty() {
            return current.remove_redundant(lp);
        }
        let added = Polytope {
            a: stage.a.select_rows(&new_rows),
            b: stage.b.select_rows(&new_rows),
        }
        .normalized();
        current = current.intersect(&added);
        if current.is_empty(lp)? {
            return Err(Error::TerminalSetEmpty);
        }
        power = &power * a_k;
    }
    Err(Error::MpiNotConverged(max_iter))
}

/// Points of a bounded polytope: LP extreme points in random directions and
/// random convex combinations of them.
pub fn sample_points(
    p: &Polytope,
    count: usize,
    seed: u64,
    lp: &dyn LpBackend,
) -> Result<Vec<Vector>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = p.dim();
    let mut extremes = Vec::new();
    for _ in 0..(2 * d + 8) {
        let dir = Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let mut prog = LinearProgram::new(-dir);
        prog.ineq_a = p.a.clone();
        prog.ineq_b = p.b.clone();
        if let LpOutcome::Optimal { x, .. } = lp.solve(&prog)? {
            extremes.push(x);
        }
    }
    if extremes.is_empty() {
        return Err(Error::Domain(
            "cannot sample an empty or unbounded polytope".into(),
        ));
    }
    let mut out = extremes.clone();
    while out.len() < count {
        let w: Vec<f64> = extremes.iter().map(|_| rng.random::<f64>()).collect();
        let total: f64 = w.iter().sum();
        let mut p = Vector::zeros(d);
        for (wi, e) in w.iter().zip(&extremes) {
            p.axpy(wi / total, e, 1.0);
        }
        out.push(p);
    }
    out.truncate(count);
    Ok(out)
}

/// Counter-clockwise convex hull (Andrew's monotone chain), collinear points dropped.
pub fn convex_hull_2d(mut pts: Vec<Vector>) -> Vec<Vector> {
    pts.sort_by(|a, b| {
        a[0].partial_cmp(&b[0])
            .unwrap()
            .then(a[1].partial_cmp(&b[1]).unwrap())
    });
    pts.dedup_by(|a, b| (&*a - &*b).amax() < 1e-9);
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &Vector, a: &Vector, b: &Vector| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<Vector> = Vec::with_capacity(2 * pts.len());
    for (pass, floor) in [
        (pts.iter().collect::<Vec<_>>(), 2),
        (pts.iter().rev().skip(1).collect(), 0),
    ] {
        // the upper chain must not eat into the lower one
        let floor = if floor == 0 { hull.len() + 1 } else { floor };
        for p in pass {
            while hull.len() >= floor
                && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], p) <= 1e-12
            {
                hull.pop();
            }
            hull.push(p.clone());
        }
    }
    hull.pop();
    hull
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Vector orthogonal to `d − 1` vectors in `ℝᵈ` (cofactor expansion).
fn generalized_cross(cols: &[&Vector]) -> Vector {
    let d = cols.len() + 1;
    let m = Mat::from_fn(d - 1, d, |i, j| cols[i][j]);
    Vector::from_fn(d, |i, _| {
        let minor = m.clone().remove_column(i);
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        sign * minor.determinant()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_rows;
    use crate::solver::DenseSimplex;
    use std::f64::consts::PI;

    fn square(half: f64) -> Zonotope {
        Zonotope::new(Vector::zeros(2), Mat::identity(2, 2) * half).unwrap()
    }

    fn unit_disk() -> Ellipsoid {
        Ellipsoid::new(Mat::identity(2, 2)).unwrap()
    }

    #[test]
    fn disk_to_square_and_hexagon() {
        let z = ellipsoid_to_zonotope(&unit_disk(), 2).unwrap();
        assert!((&z.generators - Mat::identity(2, 2)).amax() < 1e-12);

        let hex = ellipsoid_to_zonotope(&unit_disk(), 3).unwrap();
        let len = (PI / 6.0).tan();
        for k in 0..3 {
            let g = hex.generators.column(k);
            assert!((g.norm() - len).abs() < 1e-12);
            let ang = g[1].atan2(g[0]);
            assert!((ang - k as f64 * PI / 3.0).abs() < 1e-12);
        }
        for i in 0..360 {
            let t = i as f64 * PI / 180.0;
            let a = Vector::from_vec(vec![t.cos(), t.sin()]);
            assert!(hex.support(&a) >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn axis_scaled_ellipsoid() {
        let e = Ellipsoid::new(from_rows(&[vec![4.0, 0.0], vec![0.0, 1.0]]).unwrap()).unwrap();
        let z = ellipsoid_to_zonotope(&e, 2).unwrap();
        let expected = from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((&z.generators - expected).amax() < 1e-12);
    }

    #[test]
    fn too_few_generators() {
        assert_eq!(
            ellipsoid_to_zonotope(&unit_disk(), 1),
            Err(Error::InsufficientGenerators {
                generators: 1,
                dim: 2
            })
        );
    }

    #[test]
    fn support_values() {
        let z = square(1.0);
        assert_eq!(z.support(&Vector::from_vec(vec![1.0, 1.0])), 2.0);
        assert_eq!(z.support(&Vector::from_vec(vec![1.0, 0.0])), 1.0);
        assert_eq!(z.support(&Vector::zeros(2)), 0.0);
    }

    #[test]
    fn square_and_segment_vertices() {
        let v = square(1.0).vertices().unwrap();
        assert_eq!(v.len(), 4);
        for corner in [[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]] {
            let c = Vector::from_vec(corner.to_vec());
            assert!(v.vertices.iter().any(|p| (p - &c).amax() < 1e-12));
        }
        let seg = Zonotope::new(Vector::zeros(1), Mat::from_element(1, 1, 1.0)).unwrap();
        let v = seg.vertices().unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v.vertices[0][0], -1.0);
        assert_eq!(v.vertices[1][0], 1.0);
    }

    #[test]
    fn cube_vertices_via_lp_filter() {
        // 3-D box with a redundant parallel generator: still 8 corners
        let mut g = Mat::identity(3, 4);
        g[(0, 3)] = 0.5;
        let z = Zonotope::new(Vector::zeros(3), g).unwrap();
        let v = z.vertices().unwrap();
        assert_eq!(v.len(), 8);
        for p in &v.vertices {
            assert!((p[0].abs() - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn generator_budget() {
        let z = Zonotope::new(Vector::zeros(2), Mat::from_element(2, 17, 0.1)).unwrap();
        assert_eq!(z.vertices(), Err(Error::GeneratorBudgetExceeded(17)));
    }

    #[test]
    fn square_halfspaces() {
        let p = square(1.0).to_halfspace().unwrap();
        assert_eq!(p.num_rows(), 4);
        for (n, off) in [
            ([1.0, 0.0], 1.0),
            ([-1.0, 0.0], 1.0),
            ([0.0, 1.0], 1.0),
            ([0.0, -1.0], 1.0),
        ] {
            let found = (0..4).any(|i| {
                (p.a[(i, 0)] - n[0]).abs() < 1e-12
                    && (p.a[(i, 1)] - n[1]).abs() < 1e-12
                    && (p.b[i] - off).abs() < 1e-12
            });
            assert!(found, "missing facet {n:?}");
        }
    }

    #[test]
    fn flat_zonotope_rejected() {
        let z = Zonotope::new(
            Vector::zeros(2),
            from_rows(&[vec![1.0, 2.0], vec![0.0, 0.0]]).unwrap(),
        )
        .unwrap();
        assert_eq!(z.to_halfspace(), Err(Error::NotFullDimensional));
    }

    #[test]
    fn tighten_box_by_box() {
        let x = Polytope::from_box(&[(-2.0, 2.0), (-2.0, 2.0)]).unwrap();
        let t = tighten(&x, &square(0.5), 1.0);
        assert!(t.b.iter().all(|&b| (b - 1.5).abs() < 1e-12));
        assert_eq!(tighten(&x, &square(0.5), 0.0), x);
    }

    #[test]
    fn contains_tolerance() {
        let x = Polytope::from_box(&[(-2.0, 2.0), (-2.0, 2.0)]).unwrap();
        assert!(x.contains(&Vector::zeros(2)));
        assert!(!x.contains(&Vector::from_vec(vec![2.0 + 1e-3, 0.0])));
        assert!(x.contains(&Vector::from_vec(vec![2.0, 0.0])));
    }

    #[test]
    fn polytope_rejects_zero_rows() {
        assert!(Polytope::new(Mat::zeros(1, 2), Vector::from_element(1, 1.0)).is_err());
    }

    #[test]
    fn mpi_of_contracting_box_is_the_box() {
        let lp = DenseSimplex::default();
        let x = Polytope::from_box(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let a_k = Mat::identity(2, 2) * 0.5;
        let k = Mat::zeros(1, 2);
        let zf = mpi_terminal_set(&a_k, &k, &x, None, 50, &lp).unwrap();
        assert_eq!(zf.num_rows(), 4);
        assert!(zf.is_subset_of(&x, &lp).unwrap() && x.is_subset_of(&zf, &lp).unwrap());
    }

    #[test]
    fn mpi_empty_start() {
        let lp = DenseSimplex::default();
        let x = Polytope::from_box(&[(-1.0, 1.0)]).unwrap();
        let x = Polytope {
            a: x.a,
            b: Vector::from_vec(vec![-0.5, -0.5]),
        };
        let r = mpi_terminal_set(&Mat::identity(1, 1), &Mat::zeros(1, 1), &x, None, 5, &lp);
        assert_eq!(r, Err(Error::TerminalSetEmpty));
    }

    #[test]
    fn mpi_nonconvergence_reported() {
        // marginally stable rotation never finishes adding rows within 2 steps
        let lp = DenseSimplex::default();
        let x = Polytope::from_box(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let t: f64 = 0.3;
        let rot = from_rows(&[vec![t.cos(), -t.sin()], vec![t.sin(), t.cos()]]).unwrap();
        let r = mpi_terminal_set(&rot, &Mat::zeros(1, 2), &x, None, 2, &lp);
        assert_eq!(r, Err(Error::MpiNotConverged(2)));
    }

    #[test]
    fn hull_drops_interior_and_collinear() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [1.0, 1.0], [0.5, 0.2]]
            .iter()
            .map(|p| Vector::from_vec(p.to_vec()))
            .collect();
        let h = convex_hull_2d(pts);
        assert_eq!(h.len(), 3);
    }

    #[test]
    fn polygon_vertices_of_box() {
        let x = Polytope::from_box(&[(-2.0, 2.0), (-1.0, 1.0)]).unwrap();
        let v = x.vertices_2d().unwrap();
        assert_eq!(v.len(), 4);
    }
}
