use std::f64::consts::PI;

use levy_parametrix::exponent::{Amplitude, LevyMeasureSpec, PerturbationSpec, Profile};
use levy_parametrix::parametrix::*;
use levy_parametrix::quadrature::integrate_pieces;
use levy_parametrix::spectral::CircleGrid;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn cauchy() -> LevyMeasureSpec {
    LevyMeasureSpec::Stable { alpha: 1.0, scale: 1.0 }
}

fn trig_model() -> ModelSpec {
    let pert = PerturbationSpec::separable(
        Amplitude::Trig { c0: 0.5, c1: 0.5, freq: 1.0 },
        Profile::PowerCap { c: 0.5, eps: 0.5 },
        0.5,
        0.5,
    );
    ModelSpec::new(cauchy(), pert).unwrap()
}

fn flat_model() -> ModelSpec {
    let pert = PerturbationSpec::separable(Amplitude::Constant { value: 1.0 }, Profile::PowerCap { c: 0.5, eps: 0.5 }, 0.5, 0.5);
    ModelSpec::new(cauchy(), pert).unwrap()
}

fn solver(model: &ModelSpec, n: usize) -> Solver {
    Solver::new(model, CircleGrid::new(n, default_length(model)).unwrap()).unwrap()
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[test]
fn zero_perturbation_collapses_to_free_kernel() {
    let model = ModelSpec::new(cauchy(), PerturbationSpec::zero()).unwrap();
    let s = solver(&model, 512);
    let grids = Grids::square(s.grid, 4).unwrap();
    let (p, diag, _) = assemble_p(&s, 0.25, &grids).unwrap();
    assert_eq!(diag.truncation_index, 1);
    let (psi, _) = psi_series(&s, 0.25, &grids).unwrap();
    assert_eq!(max_abs(psi.values.iter().copied()), 0.0);
    let mut err: f64 = 0.0;
    for (c, &j) in grids.y_idx.iter().enumerate() {
        let free = s.free_column(0.25, j);
        for r in 0..p.values.nrows() {
            err = err.max((p.values[(r, c)] - free[r * 4]).abs());
        }
    }
    assert!(err <= 1e-10 * max_abs(p.values.iter().copied()), "err {err}");
    assert_eq!(max_abs(phi_grid(&s, 0.25, &grids).unwrap().values.iter().copied()), 0.0);
    assert_eq!(eval_phi(&model, 0.25, 0.3, -0.2).unwrap(), 0.0);
}

#[test]
fn x_independent_perturbation_is_translation_covariant() {
    let model = flat_model();
    let s = solver(&model, 256);
    assert_eq!(s.cell(), 1);
    let grids = Grids::square(s.grid, 1).unwrap();
    let (p, _, _) = assemble_p(&s, 0.25, &grids).unwrap();
    let n = s.grid.n;
    let scale = max_abs(p.values.iter().copied());
    let mut err: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            // p(x_i, y_j) = p(x_0, y_{j-i}) on the circle
            err = err.max((p.values[(i, j)] - p.values[(0, (j + n - i) % n)]).abs());
        }
    }
    assert!(err <= 1e-8 * scale, "err {err}");
    let phi = phi_grid(&s, 0.25, &grids).unwrap();
    for i in 0..n {
        assert!((phi.values[(i, (i + 3) % n)] - phi.values[(0, 3)]).abs() < 1e-10 * max_abs(phi.values.iter().copied()));
    }
}

/// The discrete generator as a dense matrix, then `exp(tA)`.
#[test]
fn kernel_columns_match_dense_matrix_exponential() {
    let model = trig_model();
    let grid = CircleGrid::new(64, default_length(&model)).unwrap();
    let s = Solver::new(&model, grid).unwrap().with_options(SolverOptions { per_octave: 16, octaves: 24 });
    let n = grid.n;
    let mut a = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = s.generator(&e);
        for i in 0..n {
            a[(i, j)] = col[i];
        }
    }
    let t = 0.25;
    let expm = (a * t).exp();
    let grids = Grids::square(grid, 1).unwrap();
    let (p, _, _) = assemble_p(&s, t, &grids).unwrap();
    let dx = grid.dx();
    let scale = max_abs(p.values.iter().copied());
    let mut err: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            // T_t f(x_i) = Σ_j p(x_i, y_j) f(y_j) dx and T_t = exp(tA)
            let dense = expm[(i, j)] / dx;
            err = err.max((p.values[(i, j)] - dense).abs());
        }
    }
    assert!(err < 5e-5 * scale, "rel err {}", err / scale);
}

#[test]
fn line_phi_matches_closed_form_quadrature() {
    // Cauchy free kernel p_t(z) = t / (π (t² + z²)), m(u) = 0.5 (1 ∧ |u|^0.5)
    let pert = PerturbationSpec::separable(Amplitude::Constant { value: 1.0 }, Profile::PowerCap { c: 0.5, eps: 0.5 }, 0.5, 0.5);
    let model = ModelSpec::new(cauchy(), pert).unwrap();
    let t = 0.5;
    let line = PhiLine::new(&model, t).unwrap();
    let p = |z: f64| t / (PI * (t * t + z * z));
    let dens = |u: f64| 1.0 / (PI * u * u);
    let m = |u: f64| 0.5 * u.abs().sqrt().min(1.0);
    for &(x, y) in &[(0.0, 0.0), (0.0, 0.7), (0.4, -2.0)] {
        let z = y - x;
        let g = |u: f64| (p(z - u) + p(z + u) - 2.0 * p(z)) * m(u) * dens(u);
        let mut pts = vec![1e-12, 0.05, 0.5, 1.0, 2.0];
        pts.push(z.abs().max(1e-3));
        pts.push(z.abs() + 1.0);
        pts.push(50.0);
        pts.push(1e4);
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        let body = integrate_pieces(g, &pts, 1e-12, 1e-10).unwrap().value;
        // beyond 1e4 only -2 p(z) m π(u) is left
        let tail = -2.0 * p(z) * 0.5 / (PI * 1e4);
        let oracle = body + tail;
        let v = line.eval(x, y).unwrap().value;
        assert!((v - oracle).abs() < 1e-6 * oracle.abs().max(0.1), "({x},{y}) {v} vs {oracle}");
    }
}

#[test]
fn circle_phi_is_the_periodized_line_phi() {
    let model = trig_model();
    let s = solver(&model, 2048);
    let t = 0.25;
    let line = PhiLine::new(&model, t).unwrap();
    let j = s.grid.n / 2 + 17;
    let col = s.phi_column(t, j);
    let y = s.grid.node(j);
    let l = s.grid.length;
    let sup = max_abs(col.iter().copied());
    let k_max = 40;
    for i in [j, j + 20, j + 500, 10] {
        let x = s.grid.node(i);
        let mut v = line.eval(x, y).unwrap().value;
        for k in 1..=k_max {
            v += line.eval(x + k as f64 * l, y).unwrap().value + line.eval(x - k as f64 * l, y).unwrap().value;
        }
        // images beyond k_max decay like k^-2, so their sum is about (k_max/2) times the edge pair
        let edge = line.eval(x + k_max as f64 * l, y).unwrap().value + line.eval(x - k_max as f64 * l, y).unwrap().value;
        v += 0.5 * edge * k_max as f64;
        assert!((col[i] - v).abs() < 1e-5 * sup, "x {x}: {} vs {v}", col[i]);
    }
}

#[test]
fn engine_second_term_matches_gauss_jacobi_convolution() {
    let model = trig_model();
    let s = solver(&model, 128);
    let grids = Grids::square(s.grid, 1).unwrap();
    let t = 0.25;
    let (terms, _) = series_terms(&s, t, &grids).unwrap();
    let phi = |tau: f64| phi_grid(&s, tau, &grids);
    let quad = QuadratureSpec { nodes: 32, delta: model.series_params.delta_hint, tol: 1e-7, max_nodes: 512 };
    let gj = convolve_timespace(&phi, &phi, t, &quad).unwrap();
    let scale = max_abs(terms[1].values.iter().copied());
    let err = max_abs(terms[1].values.iter().zip(gj.values.iter()).map(|(a, b)| a - b));
    assert!(err < 2e-3 * scale, "rel err {}", err / scale);
}

#[test]
fn second_order_correction_is_small_at_moderate_time() {
    let model = trig_model();
    let s = solver(&model, 1024);
    let grids = Grids::new(s.grid, 1, vec![512, 540]).unwrap();
    let (_, diag) = series_terms(&s, 0.25, &grids).unwrap();
    assert!(diag.ratios[0][0] < 1.0 && diag.ratios[0][0] > 0.0);
    assert!(diag.converged);
    // Ψ ≈ Φ (1 + O(ratio))
    let (psi, _) = psi_series(&s, 0.25, &grids).unwrap();
    let phi = phi_grid(&s, 0.25, &grids).unwrap();
    let rel = max_abs(psi.values.iter().zip(phi.values.iter()).map(|(a, b)| a - b)) / max_abs(phi.values.iter().copied());
    assert!(rel < 1.5 * diag.ratios[0][0], "rel {rel} vs ratio {}", diag.ratios[0][0]);
}

#[test]
fn smoothed_kernel_matches_its_defining_time_integral() {
    let model = trig_model();
    let s = solver(&model, 256);
    let (t, eps) = (0.25, 0.05);
    let j = 128;
    let grids = Grids::new(s.grid, 1, vec![j]).unwrap();
    let direct = approx_kernel_p_eps(&s, t, eps, &grids).unwrap();
    // p⁰_{t+ε} + ∫₀^t P_{t-s+ε} Ψ_s ds, Gauss-Legendre on geometric panels in s
    let rule = levy_parametrix::quadrature::gauss_legendre(8);
    let mut edges = vec![0.0];
    for k in (0..30).rev() {
        edges.push(t * 0.5f64.powi(k));
    }
    let mut times = Vec::new();
    let mut weights = Vec::new();
    for w in edges.windows(2) {
        for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
            times.push(0.5 * (w[0] + w[1]) + 0.5 * (w[1] - w[0]) * x);
            weights.push(0.5 * (w[1] - w[0]) * wt);
        }
    }
    let mut acc = s.free_column(t + eps, j);
    for (tau, w) in times.iter().zip(&weights) {
        let (psi, _) = psi_series(&s, *tau, &grids).unwrap();
        let col: Vec<f64> = psi.values.column(0).to_vec();
        let moved = s.free_semigroup(t - tau + eps, &col);
        for (a, m) in acc.iter_mut().zip(&moved) {
            *a += w * m;
        }
    }
    let scale = max_abs(acc.iter().copied());
    let err = max_abs(direct.values.column(0).iter().zip(&acc).map(|(a, b)| a - b));
    assert!(err < 1e-4 * scale, "rel err {}", err / scale);
}

fn bump(grid: &CircleGrid, c: f64, w: f64) -> Vec<f64> {
    grid.nodes().iter().map(|x| (-(x - c).powi(2) / (2.0 * w * w)).exp()).collect()
}

#[test]
fn residual_by_differences_matches_commutator_form() {
    let model = trig_model();
    let s = solver(&model, 1024);
    let f = bump(&s.grid, 0.3, 0.5);
    let eps = [0.1, 0.05, 0.025];
    let fd = residual_q_eps_multi(&s, 0.25, &eps, &f).unwrap();
    for (e, r) in eps.iter().zip(&fd) {
        let c = residual_commutator(&s, 0.25, *e, &f).unwrap();
        assert!((r - c).abs() < 1e-2 * c + 1e-6, "eps {e}: {r} vs {c}");
    }
    assert!(fd[0] > fd[1] && fd[1] > fd[2], "{fd:?}");
    let zero = ModelSpec::new(cauchy(), PerturbationSpec::zero()).unwrap();
    let s0 = solver(&zero, 1024);
    let r0 = residual_q_eps(&s0, 0.25, 0.05, &f).unwrap();
    assert!(r0 < 1e-4, "free residual {r0}");
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn kernel_rows_integrate_to_one(c0 in 0.1f64..0.8, c1 in 0.0f64..0.8, c in 0.1f64..0.9, eps in 0.3f64..0.9) {
        let pert = PerturbationSpec::separable(
            Amplitude::Trig { c0, c1, freq: 1.0 },
            Profile::PowerCap { c, eps },
            (c0 + c1) * c,
            eps,
        );
        let model = ModelSpec::new(cauchy(), pert).unwrap();
        let s = solver(&model, 256);
        let grids = Grids::square(s.grid, 1).unwrap();
        let (p, _, _) = assemble_p(&s, 0.2, &grids).unwrap();
        let dx = s.grid.dx();
        for r in 0..p.values.nrows() {
            let sum: f64 = p.values.row(r).sum() * dx;
            prop_assert!((sum - 1.0).abs() < 1e-9, "row {} sums to {}", r, sum);
        }
    }
}
