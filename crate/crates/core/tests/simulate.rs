use std::f64::consts::PI;

use levy_parametrix::exponent::{Amplitude, DensityShape, LevyMeasureSpec, PerturbationSpec, Profile};
use levy_parametrix::parametrix::ModelSpec;
use levy_parametrix::simulate::{compare_density, sample_base, sample_perturbed, Scheme, SimulationPlan};
use levy_parametrix::Error;

fn cauchy_cdf(x: f64) -> f64 {
    0.5 + x.atan() / PI
}

/// KS distance of samples against a closed-form CDF.
fn ks(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0f64, |m, (i, &x)| {
        let f = cdf(x);
        m.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    })
}

fn plan(measure: &LevyMeasureSpec, n: usize, t: f64, scheme: Scheme, seed: u64) -> SimulationPlan {
    SimulationPlan::new(measure, n, t, 0.0, scheme, seed).unwrap()
}

#[test]
fn two_atoms_give_a_poisson_difference() {
    let m = LevyMeasureSpec::Atoms { atoms: vec![(1.0, 1.0)] };
    let p = SimulationPlan { n_paths: 100_000, t_end: 1.0, x0: 0.0, scheme: Scheme::Exact, small_jump_cutoff: 0.5, rng_seed: 4 };
    let x = sample_base(&m, &p).unwrap();
    assert!(x.iter().all(|v| (v - v.round()).abs() < 1e-12));
    // P(N₊ = N₋) with N± ~ Poisson(1): e^{-2} Σ 1/(k!)²
    let mut s = 0.0;
    let mut term = 1.0;
    for k in 0..30 {
        if k > 0 {
            term /= (k * k) as f64;
        }
        s += term;
    }
    let exact = (-2.0f64).exp() * s;
    let freq = x.iter().filter(|v| v.abs() < 0.5).count() as f64 / x.len() as f64;
    let se = (exact * (1.0 - exact) / x.len() as f64).sqrt();
    assert!((freq - exact).abs() < 4.0 * se, "{freq} vs {exact}");
}

#[test]
fn stable_cauchy_matches_closed_form_cdf() {
    let m = LevyMeasureSpec::cauchy();
    let x = sample_base(&m, &plan(&m, 100_000, 1.0, Scheme::Exact, 1)).unwrap();
    let d = ks(&x, cauchy_cdf);
    assert!(d <= 0.01, "ks {d}");
}

#[test]
fn compound_construction_of_the_cauchy_law() {
    // the Cauchy measure as a plain density goes through compound Poisson + Gaussian
    let m = LevyMeasureSpec::Density { density: DensityShape::Power { coef: 1.0 / PI, index: 1.0 } };
    let p = plan(&m, 40_000, 1.0, Scheme::Exact, 2);
    let x = sample_base(&m, &p).unwrap();
    let d = ks(&x, cauchy_cdf);
    assert!(d <= 1.36 / 200.0 * 1.5, "ks {d}");
    // halving the cutoff moves the statistic by less than the Monte Carlo radius
    let half = SimulationPlan { small_jump_cutoff: 0.5 * p.small_jump_cutoff, ..p.clone() };
    let d2 = ks(&sample_base(&m, &half).unwrap(), cauchy_cdf);
    assert!((d - d2).abs() < 1.36 / 200.0, "{d} vs {d2}");
}

#[test]
fn tiny_cutoff_is_refused_with_a_suggestion() {
    let m = LevyMeasureSpec::Density { density: DensityShape::Power { coef: 1.0 / PI, index: 1.0 } };
    let p = SimulationPlan { n_paths: 10, t_end: 1.0, x0: 0.0, scheme: Scheme::Exact, small_jump_cutoff: 1e-7, rng_seed: 0 };
    match sample_base(&m, &p) {
        Err(Error::CutoffTooSmall { suggested, .. }) => {
            // μ{|u| > r} = 2/(π r) equals the budget 1e4 at r ≈ 6.4e-5
            assert!((suggested - 2.0 / (PI * 1e4)).abs() < 1e-6 * suggested.max(1.0) + 1e-9, "{suggested}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn stable_quartiles_are_symmetric() {
    let m = LevyMeasureSpec::Stable { alpha: 0.7, scale: 1.0 };
    let mut x = sample_base(&m, &plan(&m, 100_000, 1.0, Scheme::Exact, 5)).unwrap();
    x.sort_by(|a, b| a.total_cmp(b));
    let n = x.len();
    let (q1, med, q3) = (x[n / 4], x[n / 2], x[3 * n / 4]);
    // density at the median is about 0.2, so its standard error is ~0.008
    assert!(med.abs() < 0.04, "median {med}");
    assert!((q1 + q3).abs() < 0.08, "quartiles {q1} {q3}");
}

#[test]
fn seeds_determine_samples() {
    let m = LevyMeasureSpec::cauchy();
    let p = plan(&m, 1000, 0.5, Scheme::Exact, 77);
    let a = sample_base(&m, &p).unwrap();
    let b = sample_base(&m, &p).unwrap();
    assert!(a.iter().zip(&b).all(|(u, v)| u.to_bits() == v.to_bits()));
    let other = sample_base(&m, &SimulationPlan { rng_seed: 78, ..p }).unwrap();
    assert!(a.iter().zip(&other).any(|(u, v)| u != v));
}

#[test]
fn zero_perturbation_reuses_the_base_streams() {
    let m = LevyMeasureSpec::cauchy();
    let model = ModelSpec::new(m.clone(), PerturbationSpec::zero()).unwrap();
    let p = plan(&m, 500, 0.25, Scheme::Thinning, 11);
    let a = sample_base(&m, &p).unwrap();
    let b = sample_perturbed(&model, &p).unwrap();
    assert!(a.iter().zip(&b.values).all(|(u, v)| u.to_bits() == v.to_bits()));
}

#[test]
fn thinning_acceptance_rate_matches_the_intensity_ratio() {
    let m = LevyMeasureSpec::cauchy();
    let pert = PerturbationSpec::separable(Amplitude::Constant { value: 0.5 }, Profile::PowerCap { c: 1.0, eps: 2.0 }, 1.0, 1.5);
    let model = ModelSpec::new(m.clone(), pert).unwrap();
    let p = plan(&m, 50_000, 1.0, Scheme::Thinning, 3);
    let s = sample_perturbed(&model, &p).unwrap();
    // proposals above lo: ∫0.5(1∧u²)u⁻²du / ∫(1∧u^{1.5})u⁻²du over u > lo
    let lo = 1e-3 * p.small_jump_cutoff;
    let num = 0.5 * (1.0 - lo) + 0.5;
    let den = 2.0 * (1.0 - lo.sqrt()) + 1.0;
    let rate = s.accepted as f64 / s.proposed as f64;
    let expect = num / den;
    let se = (expect * (1.0 - expect) / s.proposed as f64).sqrt();
    assert!((rate - expect).abs() < 4.0 * se, "{rate} vs {expect} ({} proposals)", s.proposed);
}

#[test]
fn thinning_is_refused_in_the_divergent_regime() {
    let m = LevyMeasureSpec::cauchy();
    let pert = PerturbationSpec::separable(Amplitude::Constant { value: 0.5 }, Profile::PowerCap { c: 0.5, eps: 0.5 }, 0.5, 0.5);
    let model = ModelSpec::new(m.clone(), pert).unwrap();
    let p = plan(&m, 10, 0.25, Scheme::Thinning, 3);
    assert!(matches!(sample_perturbed(&model, &p), Err(Error::Regime(_))));
    let exact = plan(&m, 10, 0.25, Scheme::Exact, 3);
    assert!(matches!(sample_perturbed(&model, &exact), Err(Error::Regime(_))));
}

#[test]
fn euler_step_must_be_small() {
    let m = LevyMeasureSpec::cauchy();
    assert!(SimulationPlan::new(&m, 10, 0.5, 0.0, Scheme::EulerChain { dt: 0.02 }, 0).is_err());
    assert!(SimulationPlan::new(&m, 10, 0.5, 0.0, Scheme::EulerChain { dt: 0.01 }, 0).is_ok());
}

#[test]
fn x_independent_perturbation_keeps_the_law_symmetric() {
    let m = LevyMeasureSpec::cauchy();
    let pert = PerturbationSpec::separable(Amplitude::Constant { value: 0.5 }, Profile::PowerCap { c: 0.5, eps: 0.5 }, 0.5, 0.5);
    let model = ModelSpec::new(m.clone(), pert).unwrap();
    let p = plan(&m, 40_000, 0.25, Scheme::EulerChain { dt: 0.005 }, 8);
    let x = sample_perturbed(&model, &p).unwrap().values;
    // sign-flip statistic: sup_r |P(X > r) - P(X < -r)|
    let mut pos: Vec<f64> = x.iter().filter(|v| **v > 0.0).cloned().collect();
    let mut neg: Vec<f64> = x.iter().filter(|v| **v < 0.0).map(|v| -v).collect();
    pos.sort_by(|a, b| a.total_cmp(b));
    neg.sort_by(|a, b| a.total_cmp(b));
    let n = x.len() as f64;
    let mut worst: f64 = 0.0;
    for r in pos.iter().step_by(97) {
        let a = (pos.len() - pos.partition_point(|v| v <= r)) as f64 / n;
        let b = (neg.len() - neg.partition_point(|v| v <= r)) as f64 / n;
        worst = worst.max((a - b).abs());
    }
    assert!(worst < 1.36 * (2.0 / n).sqrt(), "{worst}");
}

#[test]
fn mismatched_time_is_detected() {
    let m = LevyMeasureSpec::cauchy();
    let x = sample_base(&m, &plan(&m, 20_000, 1.0, Scheme::Exact, 6)).unwrap();
    let nodes: Vec<f64> = (0..4001).map(|i| -200.0 + 0.1 * i as f64).collect();
    let right: Vec<f64> = nodes.iter().map(|y| 1.0 / (PI * (1.0 + y * y))).collect();
    let wrong: Vec<f64> = nodes.iter().map(|y| 0.25 / (PI * (0.0625 + y * y))).collect();
    let good = compare_density(&x, &nodes, &right, None).unwrap();
    let bad = compare_density(&x, &nodes, &wrong, None).unwrap();
    assert!(good.ks_distance < 2.0 * good.ks_radius, "{good:?}");
    assert!(bad.ks_distance > 10.0 * bad.ks_radius, "{bad:?}");
}
