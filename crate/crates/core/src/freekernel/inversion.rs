//! Fourier inversion of `e^{-t q(ξ)}` on the real line.

use std::f64::consts::PI;

use ndarray::Array2;
use rayon::prelude::*;

use super::grid::{GridMeta, KernelGrid, Provenance};
use crate::error::{Error, Result};
use crate::exponent::{check_a1, default_probes, A1Report, LevyMeasureSpec, Symbol};
use crate::quadrature::panel_rule;

/// Level of `t q(Ξ)` at which the spectrum is truncated.
pub const CUTOFF_LEVEL: f64 = 46.0;
const GL_ORDER: usize = 16;

/// The free (unperturbed) kernel of a Lévy measure that passed the power-ratio check.
#[derive(Debug, Clone)]
pub struct FreeKernel {
    pub measure: LevyMeasureSpec,
    pub symbol: Symbol,
    pub a1: A1Report,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Target {
    Space(u32),
    Time,
}

/// Spectral quadrature for one time: nodes `ξ_j` and weights that already include
/// `e^{-t q(ξ_j)}` and the derivative factor.
struct SpectralSum {
    xi: Vec<f64>,
    w: Vec<f64>,
    phase: f64,
    err: f64,
}

impl FreeKernel {
    pub fn new(measure: &LevyMeasureSpec) -> Result<Self> {
        measure.validate()?;
        let a1 = check_a1(measure, &default_probes())?;
        if !a1.pass {
            return Err(Error::ConditionA1(format!(
                "running sup of q^U/q^L still moving by {:.1}% over the top decade",
                100.0 * a1.top_decade_variation
            )));
        }
        let symbol = Symbol::of_measure(measure)?;
        Ok(Self { measure: measure.clone(), symbol, a1 })
    }

    pub fn q(&self, xi: f64) -> f64 {
        self.symbol.eval(xi)
    }

    /// Smallest `Ξ` (by doubling) with `t q(Ξ) >= 46 + extra(Ξ)`.
    pub fn cutoff(&self, t: f64, extra: &dyn Fn(f64) -> f64) -> Result<f64> {
        let mut xi: f64 = 1.0;
        loop {
            let level = t * self.q(xi);
            if level >= CUTOFF_LEVEL + extra(xi) {
                return Ok(xi);
            }
            if xi > 1e12 || !level.is_finite() {
                return Err(Error::CutoffUnreachable { xi, reached: level });
            }
            xi *= 1.5;
        }
    }

    fn spectral_sum(&self, t: f64, target: Target, x_max: f64) -> Result<SpectralSum> {
        if !(t > 0.0) {
            return Err(Error::InvalidSpec(format!("time {t} must be positive")));
        }
        let k = match target {
            Target::Space(k) => k,
            Target::Time => 0,
        };
        let extra = move |xi: f64| {
            let mut e = k as f64 * xi.max(1.0).ln();
            if target == Target::Time {
                e += (self.q(xi) + 1.0).ln();
            }
            e
        };
        let big = self.cutoff(t, &extra)?;
        let h = (4.0 / x_max.max(1e-9)).min(big / 200.0);
        let mut edges = Vec::new();
        // geometric grading toward ξ = 0 resolves the non-smooth symbol at the origin
        let first = h.min(big);
        for j in (0..=52).rev() {
            edges.push(first * 2f64.powi(-j));
        }
        let n = ((big - first) / h).ceil().max(1.0) as usize;
        let step = (big - first) / n as f64;
        for i in 1..=n {
            edges.push(first + step * i as f64);
        }
        edges.insert(0, 0.0);
        let rule = panel_rule(&edges, GL_ORDER);
        let mut w = Vec::with_capacity(rule.len());
        for (&xi, &wt) in rule.nodes.iter().zip(&rule.weights) {
            let q = self.q(xi);
            let f = match target {
                Target::Space(k) => xi.powi(k as i32),
                Target::Time => -q,
            };
            w.push(wt * f * (-t * q).exp() / PI);
        }
        let qb = self.q(big);
        let slope = ((self.q(big * 1.01) / qb).ln() / 1.01f64.ln()).max(0.1);
        let trunc = (extra(big)).exp() * (-t * qb).exp() * big / (PI * slope * t * qb);
        let grading = first * 2f64.powi(-52) / PI;
        let roundoff = 1e-16 * w.iter().map(|v| v.abs()).sum::<f64>();
        let phase = k as f64 * PI / 2.0;
        Ok(SpectralSum { xi: rule.nodes, w, phase, err: trunc + grading + roundoff })
    }

    fn invert(&self, t: f64, xs: &[f64], target: Target) -> Result<(Vec<f64>, f64)> {
        let x_max = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let s = self.spectral_sum(t, target, x_max)?;
        let vals = xs
            .par_iter()
            .map(|&x| s.xi.iter().zip(&s.w).map(|(xi, w)| w * (x * xi + s.phase).cos()).sum::<f64>())
            .collect();
        Ok((vals, s.err))
    }

    fn slice(&self, t: f64, xs: &[f64], values: Vec<f64>, err: f64, prov: Provenance, flags: Vec<String>) -> KernelGrid {
        let spacing = if xs.len() > 1 { (xs[1] - xs[0]).abs() } else { 0.0 };
        let half_width = xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let values = Array2::from_shape_vec((1, xs.len()), values).expect("shape");
        KernelGrid {
            t,
            x_nodes: vec![0.0],
            y_nodes: xs.to_vec(),
            values,
            meta: GridMeta { provenance: prov, err_est: err, spacing, half_width, flags },
        }
    }

    /// `p_t(x)` on the given points, as a single-row grid with `x_nodes = [0]`.
    pub fn density(&self, t: f64, xs: &[f64]) -> Result<KernelGrid> {
        let (mut v, err) = self.invert(t, xs, Target::Space(0))?;
        let mut flags = Vec::new();
        // far tail: below the inversion error the first-jump term t π(x) is the better estimate
        if matches!(self.measure, LevyMeasureSpec::Density { .. }) {
            for (val, &x) in v.iter_mut().zip(xs) {
                if *val < 10.0 * err && x != 0.0 {
                    let jump = t * self.measure.density(x).unwrap_or(0.0);
                    if jump > *val {
                        *val = jump;
                        if flags.is_empty() {
                            flags.push("heavy_tail_correction".to_string());
                        }
                    }
                }
            }
        }
        Ok(self.slice(t, xs, v, err, Provenance::P0, flags))
    }

    /// `∂_x^k p_t(x)` for `k <= 3`.
    pub fn derivative(&self, t: f64, k: u32, xs: &[f64]) -> Result<KernelGrid> {
        if k > 3 {
            return Err(Error::InvalidSpec(format!("derivative order {k} > 3")));
        }
        let (v, err) = self.invert(t, xs, Target::Space(k))?;
        Ok(self.slice(t, xs, v, err, Provenance::P0Derivative, Vec::new()))
    }

    /// `∂_t p_t(x)`.
    pub fn time_derivative(&self, t: f64, xs: &[f64]) -> Result<KernelGrid> {
        let (v, err) = self.invert(t, xs, Target::Time)?;
        Ok(self.slice(t, xs, v, err, Provenance::P0TimeDerivative, Vec::new()))
    }
}

pub fn fourier_invert_p0(measure: &LevyMeasureSpec, t: f64, xs: &[f64]) -> Result<KernelGrid> {
    FreeKernel::new(measure)?.density(t, xs)
}

pub fn p0_derivative(measure: &LevyMeasureSpec, t: f64, k: u32, xs: &[f64]) -> Result<KernelGrid> {
    FreeKernel::new(measure)?.derivative(t, k, xs)
}

pub fn p0_time_derivative(measure: &LevyMeasureSpec, t: f64, xs: &[f64]) -> Result<KernelGrid> {
    FreeKernel::new(measure)?.time_derivative(t, xs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cauchy_closed_form() {
        let fk = FreeKernel::new(&LevyMeasureSpec::cauchy()).unwrap();
        let xs: Vec<f64> = (0..=40).map(|i| -10.0 + 0.5 * i as f64).collect();
        for t in [0.1, 1.0] {
            let g = fk.density(t, &xs).unwrap();
            for (j, &x) in xs.iter().enumerate() {
                let exact = t / (PI * (t * t + x * x));
                assert!((g.values[(0, j)] - exact).abs() < 1e-9, "t={t} x={x}");
            }
        }
        let d = fk.derivative(1.0, 1, &[1.0]).unwrap();
        assert!((d.values[(0, 0)] + 1.0 / (2.0 * PI)).abs() < 1e-9);
        let dt = fk.time_derivative(1.0, &[0.0]).unwrap();
        assert!((dt.values[(0, 0)] + 1.0 / PI).abs() < 1e-9);
    }
}
