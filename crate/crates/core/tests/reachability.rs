mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use smpc::model::{GaussianSampler, NoiseModel};
use smpc::reachability::{
    alpha_for_probability, build_prs, probability_for_alpha, probability_scale, solve_lyapunov,
};
use smpc::stats::{chi2_cdf, chi2_inv};
use smpc::{Mat, NoiseFamily};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn lyapunov_matches_fixed_point_iteration() {
    let s = common::case_setup(2);
    let a_k = &s.ctx.gains.a_k;
    let w = &s.instance.noise.covariance;
    let mut sigma = Mat::zeros(2, 2);
    for _ in 0..2000 {
        sigma = a_k * &sigma * a_k.transpose() + w;
    }
    assert!((&sigma - &s.ctx.prs.sigma).amax() < 1e-12);
    let direct = solve_lyapunov(a_k, w).unwrap();
    assert!((&sigma - direct).amax() < 1e-12);
}

#[test]
fn chi_squared_agrees_with_statrs() {
    for d in 1..=6 {
        let dist = ChiSquared::new(d as f64).unwrap();
        for i in 1..200 {
            let p = i as f64 / 200.0;
            let ours = chi2_inv(p, d);
            let theirs = dist.inverse_cdf(p);
            assert!(
                (ours - theirs).abs() <= 1e-7 * theirs.max(1.0),
                "d={d} p={p}"
            );
            let x = i as f64 * 0.1;
            assert!((chi2_cdf(x, d) - dist.cdf(x)).abs() < 1e-12, "d={d} x={x}");
        }
    }
}

#[test]
fn chebyshev_scale_is_conservative() {
    for d in 1..=4 {
        for i in 1..20 {
            let p = i as f64 / 20.0;
            let cheb = probability_scale(p, d, NoiseFamily::MomentOnly).unwrap();
            let gauss = probability_scale(p, d, NoiseFamily::Gaussian).unwrap();
            assert!(cheb >= gauss);
        }
    }
}

/// Monte Carlo of the error recursion `e⁺ = A_K e + w` from `e = 0`.
#[test]
fn empirical_prs_containment() {
    let s = common::case_setup(2);
    let prs = &s.ctx.prs.state_prs;
    let a_k = &s.ctx.gains.a_k;
    let sampler = GaussianSampler::new(&s.instance.noise).unwrap();
    let m = 10_000;
    let p = s.instance.constraints.p_bar_x;
    let sigma = (p * (1.0 - p) / m as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut errors = vec![smpc::Vector::zeros(2); m];
    for k in 1..=30 {
        let mut inside = 0;
        for e in errors.iter_mut() {
            *e = a_k * &*e + sampler.sample(&mut rng);
            inside += prs.contains(e) as usize;
        }
        let rate = inside as f64 / m as f64;
        assert!(rate >= p - 3.0 * sigma, "k={k} rate={rate}");
    }
}

#[test]
fn input_prs_built_when_input_constrained() {
    let s = common::case_setup(2);
    let inst = &s.instance;
    let prs = build_prs(
        &inst.system,
        &NoiseModel::gaussian(inst.noise.covariance.clone()),
        &s.ctx.gains.k,
        0.6,
        Some(0.8),
        NoiseFamily::Gaussian,
    )
    .unwrap();
    let e = prs.input_prs.unwrap();
    let k = &s.ctx.gains.k;
    let expected = k * &prs.sigma * k.transpose() * chi2_inv(0.8, 1);
    assert!((e.shape - expected).amax() < 1e-12);
}

proptest! {
    #[test]
    fn alpha_and_probability_are_inverse(alpha in 0.0f64..1.0, p_bar in 0.05f64..0.95, d in 1usize..5) {
        for family in [NoiseFamily::Gaussian, NoiseFamily::MomentOnly] {
            let p = probability_for_alpha(alpha, p_bar, d, family).unwrap();
            prop_assert!((0.0..=p_bar + 1e-12).contains(&p));
            if p > 1e-6 {
                let back = alpha_for_probability(p, p_bar, d, family).unwrap();
                prop_assert!((back - alpha).abs() < 1e-6, "{family:?} {alpha} -> {p} -> {back}");
            }
        }
    }

    #[test]
    fn probability_is_monotone_in_alpha(a in 0.0f64..1.0, b in 0.0f64..1.0, p_bar in 0.05f64..0.95) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let g = NoiseFamily::Gaussian;
        prop_assert!(probability_for_alpha(lo, p_bar, 2, g).unwrap() <= probability_for_alpha(hi, p_bar, 2, g).unwrap() + 1e-15);
    }
}
