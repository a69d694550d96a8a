//! The identity `T_t f - f = ∫₀^t T_s L f ds` for smooth test functions.

use serde::{Deserialize, Serialize};

use super::kernel::apply_semigroup;
use super::{Coverage, Outcome, ValidationReport, Witness};
use crate::error::{Error, Result};
use crate::parametrix::{compensated_jump_integral, Grids, JumpTarget, ModelSpec, Solver};
use crate::quadrature::gauss_legendre;

/// Image sums stop once the Gaussian factor is below this.
const IMAGE_CUTOFF: f64 = 40.0;
/// Periods on each side over which jump targets are resolved exactly.
const NEAR_PERIODS: usize = 40;

/// Test functions on the circle of length `period`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Constant { value: f64 },
    /// Periodized `e^{-(x-center)²/(2 width²)}`.
    Bump { center: f64, width: f64, period: f64 },
}

impl TestFunction {
    /// Offsets `(x - center - kL)/width` of the images that matter at `x`.
    fn images(&self, x: f64) -> Vec<f64> {
        let TestFunction::Bump { center, width, period } = *self else {
            return Vec::new();
        };
        let base = x - center - period * ((x - center) / period).round();
        let reach = ((2.0 * IMAGE_CUTOFF).sqrt() * width / period).ceil() as i64;
        (-reach..=reach).map(|k| (base + k as f64 * period) / width).collect()
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Constant { value } => value,
            TestFunction::Bump { .. } => self.images(x).into_iter().map(|s| (-0.5 * s * s).exp()).sum(),
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Constant { .. } => 0.0,
            TestFunction::Bump { width, .. } => {
                self.images(x).into_iter().map(|s| (s * s - 1.0) * (-0.5 * s * s).exp()).sum::<f64>() / (width * width)
            }
        }
    }

    fn sup(&self) -> f64 {
        match *self {
            TestFunction::Constant { value } => value.abs(),
            TestFunction::Bump { width, period, .. } => 1.0 + 2.0 * (-0.125 * (period / width).powi(2)).exp(),
        }
    }

    fn sup2(&self) -> f64 {
        match *self {
            TestFunction::Constant { .. } => 0.0,
            TestFunction::Bump { width, .. } => 1.1 / (width * width),
        }
    }
}

/// `Lf(x) = ∫(f(x+u) - f(x))(1 + m(x,u)) μ(du)` by compensated quadrature.
pub fn jump_generator(model: &ModelSpec, f: &TestFunction, x: f64) -> Result<f64> {
    let (center, width, period) = match *f {
        TestFunction::Constant { .. } => return Ok(0.0),
        TestFunction::Bump { center, width, period } => (center, width, period),
    };
    let pert = &model.pert;
    let w = |u: f64| 1.0 + pert.eval(x, u);
    // beyond `near` the bump is replaced by its mean over a period; the error
    // is of order width · μ-density at `near`
    let near = (NEAR_PERIODS as f64 + 0.5) * period;
    let mean = width * (2.0 * std::f64::consts::PI).sqrt() / period;
    let fv = |s: f64| if (s - x).abs() <= near { f.eval(s) } else { mean };
    let target = JumpTarget { f: &fv, f2_at_x: f.second_derivative(x), f_sup: f.sup(), f2_sup: f.sup2() };
    let mut breaks = pert.breakpoints();
    breaks.extend([width, near]);
    // the bump seen from x sits at |c - x + kL|
    let d = x - center;
    let reach = NEAR_PERIODS as i64 + 1;
    for k in -reach..=reach {
        let u = (d + k as f64 * period).abs();
        breaks.extend([u - 3.0 * width, u, u + 3.0 * width].iter().filter(|v| **v > 0.0));
    }
    let r = compensated_jump_integral(&model.base, &w, 1.0 + pert.sup(), &target, x, 1e-3 * width, &breaks, 1e-10)?;
    Ok(r.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    /// Gauss–Legendre nodes of the time integral.
    pub time_nodes: usize,
    /// Row stride of the kernel grids.
    pub x_stride: usize,
    pub tolerance: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self { time_nodes: 12, x_stride: 1, tolerance: 2e-2 }
    }
}

/// `max_x |T_t f - f - ∫₀^t T_s Lf ds| ≤ tol (1 + sup|Lf|)`, with `T` applied
/// through kernel rows at the time nodes and at `t`.
pub fn check_generator_identity(
    solver: &Solver,
    f: &TestFunction,
    t: f64,
    params: &GeneratorParams,
) -> Result<ValidationReport> {
    if !(t > 0.0) || params.time_nodes == 0 {
        return Err(Error::InvalidSpec("need a positive time and at least one time node".into()));
    }
    let grid = solver.grid;
    if let TestFunction::Bump { width, period, .. } = *f {
        if (period - grid.length).abs() > 1e-9 * grid.length {
            return Err(Error::Precondition("test function period differs from the circle".into()));
        }
        if width < 4.0 * grid.dx() {
            return Err(Error::Precondition(format!("bump width {width} is not resolved by spacing {}", grid.dx())));
        }
    }
    let nodes = grid.nodes();
    let lf: Vec<f64> = nodes.iter().map(|&x| jump_generator(&solver.model, f, x)).collect::<Result<_>>()?;
    let sup_lf = lf.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rule = gauss_legendre(params.time_nodes);
    let mut times: Vec<f64> = rule.nodes.iter().map(|r| 0.5 * t * (1.0 + r)).collect();
    times.push(t);
    let grids = Grids::new(grid, params.x_stride, (0..grid.n).collect())?;
    let (kernels, _) = solver.kernel_grids(&times, &grids)?;
    let lf_at = |y: f64| lf[grid.index_of(y)];
    let tf = apply_semigroup(&kernels[times.len() - 1], &|y| f.eval(y))?;
    let mut integral = vec![0.0; tf.len()];
    for (k, w) in rule.weights.iter().enumerate() {
        let ts = apply_semigroup(&kernels[k], &lf_at)?;
        for (acc, v) in integral.iter_mut().zip(ts) {
            *acc += 0.5 * t * w * v;
        }
    }
    let xs = grids.x_nodes();
    let tolerance = params.tolerance * (1.0 + sup_lf);
    let mut rep = ValidationReport::new(
        "generator_identity",
        Coverage { t: vec![t], points: xs.len(), x_range: (xs[0], xs[xs.len() - 1]) },
        tolerance,
    );
    for (i, &x) in xs.iter().enumerate() {
        let r = (tf[i] - f.eval(x) - integral[i]).abs();
        if r > rep.worst_residual {
            rep.worst_residual = r;
            rep.witness = Some(Witness { t, x, y: f64::NAN, value: r });
        }
    }
    rep.constants.insert("sup_Lf".into(), sup_lf);
    rep.set_verdict(if rep.worst_residual <= tolerance { Outcome::Pass } else { Outcome::Fail });
    if rep.pass {
        rep.witness = None;
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::{LevyMeasureSpec, PerturbationSpec};
    use std::f64::consts::PI;

    #[test]
    fn cauchy_generator_of_a_gaussian_matches_its_fourier_form() {
        // on the line, Lf(x) = -(1/2π)∫|ξ| f̂(ξ) e^{iξx} dξ with f̂(ξ) = w√(2π) e^{-w²ξ²/2}
        let model = ModelSpec::new(LevyMeasureSpec::cauchy(), PerturbationSpec::zero()).unwrap();
        let w = 0.4;
        let f = TestFunction::Bump { center: 0.0, width: w, period: 1e6 };
        for &x in &[0.0, 0.3, 1.0, 2.5] {
            let exact = crate::quadrature::integrate(
                |xi: f64| -xi * w * (2.0 * PI).sqrt() * (-0.5 * w * w * xi * xi).exp() * (xi * x).cos() / PI,
                0.0,
                40.0 / w,
                1e-13,
                1e-12,
            )
            .unwrap()
            .value;
            let got = jump_generator(&model, &f, x).unwrap();
            assert!((got - exact).abs() < 1e-7, "x={x}: {got} vs {exact}");
        }
    }

    #[test]
    fn constants_are_harmonic() {
        let model = ModelSpec::new(LevyMeasureSpec::cauchy(), PerturbationSpec::zero()).unwrap();
        assert_eq!(jump_generator(&model, &TestFunction::Constant { value: 3.0 }, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn periodized_bump_and_its_curvature() {
        let f = TestFunction::Bump { center: 1.0, width: 0.5, period: 8.0 };
        assert!((f.eval(1.0) - 1.0).abs() < 1e-12);
        assert!((f.eval(9.0) - f.eval(1.0)).abs() < 1e-12);
        let h = 1e-4;
        let fd = (f.eval(1.3 + h) + f.eval(1.3 - h) - 2.0 * f.eval(1.3)) / (h * h);
        assert!((fd - f.second_derivative(1.3)).abs() < 1e-5);
    }
}
