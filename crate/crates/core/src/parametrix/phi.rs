//! `Φ_t(x,y) = ∫(p⁰_t(x+u,y) - p⁰_t(x,y)) m(·,u) μ(du)` on the line and on circle grids.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::model::{Freeze, ModelSpec};
use super::solver::{Grids, Solver};
use crate::error::{Error, Result};
use crate::exponent::{ls_slope, EvenIntegrand, LevyMeasureSpec, PerturbationSpec};
use crate::freekernel::{FreeKernel, GridMeta, KernelGrid, Provenance};
use crate::quadrature::Integral;
use crate::spectral::{plan, CircleGrid};

const PHI_REL_TOL: f64 = 1e-8;
const ALIAS_IMAGES: usize = 16;

/// `p_t` and `p_t''` on a uniform line grid `z_j = j d`, `j = 0..=half`
/// (both even), from one large FFT.
#[derive(Debug, Clone)]
pub struct LineKernel {
    pub t: f64,
    pub d: f64,
    p: Vec<f64>,
    p2: Vec<f64>,
    measure: LevyMeasureSpec,
}

impl LineKernel {
    /// Spacing `min(π/Ξ, 1/(128ρ_t))`; values are used up to `|z| <= 400/ρ_t` at least.
    pub fn new(fk: &FreeKernel, t: f64) -> Result<Self> {
        let rho = crate::exponent::scaling_rho(&fk.measure, t)?;
        let big = fk.cutoff(t, &|xi: f64| 2.0 * xi.max(1.0).ln())?;
        let d = (PI / big).min(1.0 / (128.0 * rho));
        let width = 400.0 / rho;
        let mut n: usize = 1 << 14;
        while (n as f64) * d < 4.0 * width && n < (1 << 22) {
            n *= 2;
        }
        // frequencies 2πk/(n d); values e^{-tq} and -ξ² e^{-tq}
        let dxi = 2.0 * PI / (n as f64 * d);
        let mut a = vec![Complex64::new(0.0, 0.0); n];
        let mut b = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..n {
            let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
            let xi = kk * dxi;
            let e = (-t * fk.q(xi.abs())).exp();
            a[k] = Complex64::new(e, 0.0);
            b[k] = Complex64::new(-xi * xi * e, 0.0);
        }
        let inv = plan(n, true);
        inv.process(&mut a);
        inv.process(&mut b);
        let scale = dxi / (2.0 * PI);
        let half = n / 2;
        let mut p: Vec<f64> = a[..=half].iter().map(|c| c.re * scale).collect();
        // the transform returns the periodization over n d; far images are in the
        // first-jump regime p ≈ t π, which is removed here
        let period = n as f64 * d;
        if fk.measure.density(1.0).is_some() {
            for (j, v) in p.iter_mut().enumerate() {
                let z = j as f64 * d;
                let mut images = 0.0;
                for m in 1..=ALIAS_IMAGES {
                    let shift = m as f64 * period;
                    images += fk.measure.density(z + shift).unwrap_or(0.0) + fk.measure.density(z - shift).unwrap_or(0.0);
                }
                *v -= t * images;
            }
        }
        let p2 = b[..=half].iter().map(|c| c.re * scale).collect();
        Ok(Self { t, d, p, p2, measure: fk.measure.clone() })
    }

    /// Largest `|z|` served from the table.
    pub fn half_width(&self) -> f64 {
        0.5 * self.d * self.p.len() as f64
    }

    fn interp(table: &[f64], d: f64, z: f64) -> Option<f64> {
        let s = z.abs() / d;
        // the outer half of the table carries the aliasing of the periodic transform
        if !(s < 0.5 * table.len() as f64) {
            return None;
        }
        let i = s.floor() as usize;
        let f = s - i as f64;
        let at = |j: i64| table[j.unsigned_abs() as usize];
        let i = i as i64;
        let (y0, y1, y2, y3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        let l0 = -f * (f - 1.0) * (f - 2.0) / 6.0;
        let l1 = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0;
        let l2 = -(f + 1.0) * f * (f - 2.0) / 2.0;
        let l3 = (f + 1.0) * f * (f - 1.0) / 6.0;
        Some(l0 * y0 + l1 * y1 + l2 * y2 + l3 * y3)
    }

    /// `p_t(z)`; beyond the table the first-jump term `t π(z)` (zero for atomic measures).
    pub fn p(&self, z: f64) -> f64 {
        Self::interp(&self.p, self.d, z).unwrap_or_else(|| self.t * self.measure.density(z).unwrap_or(0.0))
    }

    pub fn p2(&self, z: f64) -> f64 {
        Self::interp(&self.p2, self.d, z).unwrap_or(0.0)
    }

    pub fn sup(&self) -> f64 {
        self.p[0]
    }

    pub fn sup2(&self) -> f64 {
        self.p2.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Smooth even test function data for [`compensated_jump_integral`].
pub struct JumpTarget<'a> {
    pub f: &'a dyn Fn(f64) -> f64,
    /// `f''` at the evaluation point.
    pub f2_at_x: f64,
    pub f_sup: f64,
    pub f2_sup: f64,
}

/// `∫(f(x+u) - f(x)) w(u) μ(du)` for even `w`, symmetrized so the first-order
/// term cancels; below `taylor_below` the second difference is replaced by
/// `u² f''(x)`.  `breaks` should contain the small/large jump split and any
/// point where the integrand has a narrow feature.
#[allow(clippy::too_many_arguments)]
pub fn compensated_jump_integral(
    measure: &LevyMeasureSpec,
    w: &dyn Fn(f64) -> f64,
    w_sup: f64,
    target: &JumpTarget<'_>,
    x: f64,
    taylor_below: f64,
    breaks: &[f64],
    abs_tol: f64,
) -> Result<Integral> {
    let f = target.f;
    let fx = f(x);
    let f2 = target.f2_at_x;
    let g = |u: f64| {
        let second = if u < taylor_below { u * u * f2 } else { f(x + u) + f(x - u) - 2.0 * fx };
        0.5 * second * w(u)
    };
    let mut all = breaks.to_vec();
    all.push(taylor_below);
    let integrand = EvenIntegrand::new(&g, 0.5 * target.f2_sup * w_sup, 2.0 * target.f_sup * w_sup)
        .with_breakpoints(&all)
        .with_abs_tol(abs_tol);
    measure.integrate_even(&integrand, PHI_REL_TOL)
}

/// Evaluates `Φ_t` on the line with the small/large jump split at `|ρ_t u| = 1`.
#[derive(Debug, Clone)]
pub struct PhiLine {
    pub t: f64,
    pub rho: f64,
    kernel: LineKernel,
    pert: PerturbationSpec,
    base: LevyMeasureSpec,
    freeze: Freeze,
    abs_tol: f64,
}

impl PhiLine {
    pub fn new(model: &ModelSpec, t: f64) -> Result<Self> {
        let fk = FreeKernel::new(&model.base)?;
        let kernel = LineKernel::new(&fk, t)?;
        let mut line = Self {
            t,
            rho: model.rho(t)?,
            kernel,
            pert: model.pert.clone(),
            base: model.base.clone(),
            freeze: model.freeze,
            abs_tol: 0.0,
        };
        // absolute accuracy tied to the size of Φ near the diagonal
        let x0 = 0.0;
        let near = line.eval(x0, x0)?.value.abs().max(line.eval(x0, x0 + 1.0 / line.rho)?.value.abs());
        line.abs_tol = PHI_REL_TOL * near;
        Ok(line)
    }

    pub fn kernel(&self) -> &LineKernel {
        &self.kernel
    }

    /// `Φ_t(x, y)` with its quadrature error estimate.
    pub fn eval(&self, x: f64, y: f64) -> Result<Integral> {
        if self.pert.is_zero() {
            return Ok(Integral { value: 0.0, abs_err: 0.0 });
        }
        let at = match self.freeze {
            Freeze::Source => x,
            Freeze::Target => y,
        };
        let pert = &self.pert;
        let w = |u: f64| pert.eval(at, u);
        let k = &self.kernel;
        // p⁰_t(x+u, y) = p_t(y - x - u); the second difference is symmetric in u
        let z = y - x;
        let f = |s: f64| k.p(s);
        let target = JumpTarget { f: &f, f2_at_x: k.p2(z), f_sup: k.sup(), f2_sup: k.sup2() };
        let mut breaks = pert.breakpoints();
        // jumps landing near the target form a bump of width 1/ρ around |u| = |z|
        let r = 1.0 / self.rho;
        breaks.extend([r, z.abs()]);
        breaks.extend([-8.0, -1.0, 1.0, 8.0].iter().map(|k| z.abs() + k * r).filter(|u| *u > 0.0));
        compensated_jump_integral(&self.base, &w, pert.sup(), &target, z, 2.0 * k.d, &breaks, self.abs_tol)
    }
}

/// One evaluation of `Φ_t(x, y)` on the line.
pub fn eval_phi(model: &ModelSpec, t: f64, x: f64, y: f64) -> Result<f64> {
    Ok(PhiLine::new(model, t)?.eval(x, y)?.value)
}

/// `Φ_t` on circle grid nodes (rows `x` at the grid stride, columns `y_idx`).
pub fn phi_grid(solver: &Solver, t: f64, grids: &Grids) -> Result<KernelGrid> {
    if grids.circle != solver.grid {
        return Err(Error::GridMismatch("output grid differs from the solver grid".into()));
    }
    let n = solver.grid.n;
    let cell = solver.cell();
    let nx = n / grids.x_stride;
    let mut values = Array2::zeros((nx, grids.y_idx.len()));
    let mut cache: Vec<(usize, Vec<f64>)> = Vec::new();
    for (c, &j) in grids.y_idx.iter().enumerate() {
        let b = j % cell;
        let col = match cache.iter().find(|e| e.0 == b) {
            Some(e) => e.1.clone(),
            None => {
                let v = solver.phi_column(t, b);
                cache.push((b, v.clone()));
                v
            }
        };
        let shift = j - b;
        for r in 0..nx {
            values[(r, c)] = col[(r * grids.x_stride + n - shift) % n];
        }
    }
    let g = KernelGrid::new(
        t,
        grids.x_nodes(),
        grids.y_nodes(),
        values,
        GridMeta {
            provenance: Provenance::Phi,
            err_est: 0.0,
            spacing: solver.grid.dx(),
            half_width: 0.5 * solver.grid.length,
            flags: Vec::new(),
        },
    )?;
    Ok(g)
}

/// Small-time growth of `Φ_t`, fitted as `t^{-1+η̂}` for `sup|Φ_t|/ρ_t` and for
/// the largest column `L¹` norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiGrowth {
    pub t: Vec<f64>,
    pub sup_over_rho: Vec<f64>,
    pub l1: Vec<f64>,
    pub eta_sup: f64,
    pub eta_l1: f64,
    pub eta_theory: f64,
}

/// Fits the blow-up of `Φ_t` across `t_nodes` on circle grids fine enough for
/// the smallest time. Columns are sampled at 8 points of one amplitude period.
pub fn phi_growth(model: &ModelSpec, t_nodes: &[f64]) -> Result<PhiGrowth> {
    if t_nodes.len() < 2 {
        return Err(Error::InsufficientData("need two time nodes".into()));
    }
    let t_min = t_nodes.iter().cloned().fold(f64::INFINITY, f64::min);
    let grid = Grids::auto_large(model, t_min)?;
    let solver = Solver::new(model, grid)?;
    let cell = solver.cell().min(grid.n);
    let cols: Vec<usize> = (0..8).map(|i| i * cell / 8).collect();
    let mut sup_over_rho = Vec::new();
    let mut l1 = Vec::new();
    for &t in t_nodes {
        let mut s: f64 = 0.0;
        let mut l: f64 = 0.0;
        for &j in &cols {
            let c = solver.phi_column(t, j);
            s = s.max(c.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            l = l.max(c.iter().map(|v| v.abs()).sum::<f64>() * grid.dx());
        }
        sup_over_rho.push(s / model.rho(t)?);
        l1.push(l);
    }
    let lt: Vec<f64> = t_nodes.iter().map(|t| t.ln()).collect();
    let fit = |v: &[f64]| {
        if v.iter().any(|x| *x <= 0.0) {
            return 0.0;
        }
        let lv: Vec<f64> = v.iter().map(|x| x.ln()).collect();
        ls_slope(&lt, &lv).0 + 1.0
    };
    Ok(PhiGrowth {
        t: t_nodes.to_vec(),
        eta_sup: fit(&sup_over_rho),
        eta_l1: fit(&l1),
        sup_over_rho,
        l1,
        eta_theory: model.eta(),
    })
}

impl Grids {
    /// Power-of-two circle grid with `t_min q(ξ_max) >= 25`, up to `2^20` nodes.
    pub fn auto_large(model: &ModelSpec, t_min: f64) -> Result<CircleGrid> {
        let length = super::solver::default_length(model);
        let symbol = crate::exponent::Symbol::of_measure(&model.base)?;
        let mut n = 1024;
        while n < (1 << 20) {
            let g = CircleGrid::new(n, length)?;
            if t_min * symbol.eval(g.max_freq()) >= 25.0 {
                break;
            }
            n *= 2;
        }
        CircleGrid::new(n, length)
    }
}
