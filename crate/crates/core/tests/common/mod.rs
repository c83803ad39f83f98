#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smpc::case_study::case_study_instance;
use smpc::model::ProblemInstance;
use smpc::safety::{solve_safety, SafetyResult};
use smpc::setops::{Polytope, Zonotope};
use smpc::solver::DenseSimplex;
use smpc::synthesis::{build_context, SynthesisContext, TighteningOptions};
use smpc::tube_mpc::{MpcProblem, DEFAULT_XI_PENALTY};
use smpc::{Mat, Vector};

pub struct Setup {
    pub instance: ProblemInstance,
    pub ctx: SynthesisContext,
    pub safety: SafetyResult,
    pub problem: MpcProblem,
}

pub fn case_setup(generators: usize) -> Setup {
    let instance = case_study_instance();
    let lp = DenseSimplex::default();
    let options = TighteningOptions {
        generators,
        ..TighteningOptions::default()
    };
    let ctx = build_context(&instance, &options, &lp).expect("synthesis");
    let safety = solve_safety(&ctx, &instance, &lp).expect("safety LP");
    let problem = MpcProblem::new(
        &instance.system,
        &ctx,
        &safety.schedule,
        instance.horizon,
        DEFAULT_XI_PENALTY,
    );
    Setup {
        instance,
        ctx,
        safety,
        problem,
    }
}

pub fn v2(x: f64, y: f64) -> Vector {
    Vector::from_vec(vec![x, y])
}

pub fn random_zonotope(rng: &mut ChaCha8Rng, max_gens: usize) -> Zonotope {
    let g = rng.random_range(2..=max_gens);
    let gens = Mat::from_fn(2, g, |_, _| rng.random_range(-0.5..0.5));
    let center = v2(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
    Zonotope::new(center, gens).unwrap()
}

/// Random bounded polygon: a box cut by a few extra halfspaces through points
/// near the boundary, all containing the origin in their interior.
pub fn random_polygon(rng: &mut ChaCha8Rng) -> Polytope {
    let w = rng.random_range(2.0..4.0);
    let h = rng.random_range(2.0..4.0);
    let mut p = Polytope::from_box(&[(-w, w), (-h, h)]).unwrap();
    for _ in 0..rng.random_range(0..4) {
        let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let a = Mat::from_row_slice(1, 2, &[t.cos(), t.sin()]);
        let b = Vector::from_element(1, rng.random_range(1.5..3.0));
        p = p.intersect(&Polytope::new(a, b).unwrap());
    }
    p
}

/// Slack of `x` to the nearest facet of `p`, in Euclidean distance.
pub fn boundary_distance(p: &Polytope, x: &Vector) -> f64 {
    (0..p.num_rows())
        .map(|i| {
            let row = p.a.row(i);
            (p.b[i] - row.dot(&x.transpose())).abs() / row.norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Grid oracle for `P ⊖ sZ`: a grid point is inside iff every generator
/// sign combination, shifted by it, lies in `P`. Returns the largest
/// distance from the tightened set's boundary among misclassified points,
/// and the cell diagonal.
pub fn grid_pontryagin_mismatch(p: &Polytope, z: &Zonotope, s: f64, cells: usize) -> (f64, f64) {
    let tightened = smpc::setops::tighten(p, z, s);
    let g = z.num_generators();
    let mut corners = Vec::with_capacity(1 << g);
    for mask in 0..(1usize << g) {
        let mut c = &z.center * s;
        for j in 0..g {
            let sign = if mask >> j & 1 == 1 { 1.0 } else { -1.0 };
            c += z.generators.column(j) * (sign * s);
        }
        corners.push(c);
    }
    let lim = 5.0;
    let step = 2.0 * lim / cells as f64;
    let mut worst: f64 = 0.0;
    for i in 0..=cells {
        for j in 0..=cells {
            let x = v2(-lim + i as f64 * step, -lim + j as f64 * step);
            let oracle = corners.iter().all(|c| p.contains(&(&x + c)));
            if oracle != tightened.contains(&x) {
                worst = worst.max(boundary_distance(&tightened, &x));
            }
        }
    }
    (worst, step * std::f64::consts::SQRT_2)
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
