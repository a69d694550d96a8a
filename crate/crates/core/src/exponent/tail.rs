//! Tail functions controlling the large jumps, and the hypotheses placed on them.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::measure::LevyMeasureSpec;
use super::scaling::ScalingTable;
use crate::error::{Error, Result};
use crate::quadrature::integrate;

/// How the tail function enters: as a survival function `1 - G` of a
/// distribution, or as a probability density `g` (up to normalization).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailForm {
    Survival,
    Density,
}

#[derive(Clone)]
pub struct CustomTail {
    pub h: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for CustomTail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomTail")
    }
}

impl PartialEq for CustomTail {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.h, &other.h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum TailShape {
    /// `1 ∧ x^(-index)`.
    PowerCap { index: f64 },
    /// `e^(-rate x)`.
    Exponential { rate: f64 },
    #[serde(skip)]
    Custom(CustomTail),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFunctionSpec {
    pub shape: TailShape,
    pub form: TailForm,
    pub eps: f64,
}

impl TailFunctionSpec {
    pub fn power(index: f64, form: TailForm, eps: f64) -> Self {
        Self { shape: TailShape::PowerCap { index }, form, eps }
    }

    pub fn h(&self, x: f64) -> f64 {
        let x = x.abs();
        match &self.shape {
            TailShape::PowerCap { index } => x.powf(-index).min(1.0),
            TailShape::Exponential { rate } => (-rate * x).exp(),
            TailShape::Custom(c) => (c.h)(x),
        }
    }

    /// `h_ε(x) = x^ε h(x)` for `x >= 1`, extended by `h(1)` on `[0, 1)`.
    pub fn h_eps(&self, x: f64) -> f64 {
        let x = x.abs();
        if x < 1.0 {
            self.h(1.0)
        } else {
            x.powf(self.eps) * self.h(x)
        }
    }

    /// Density of the underlying distribution on `[0, ∞)`.
    fn law_density(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match self.form {
            TailForm::Density => self.h(x) / self.h_mass(),
            TailForm::Survival => match &self.shape {
                TailShape::PowerCap { index } => {
                    if x < 1.0 {
                        0.0
                    } else {
                        index * x.powf(-index - 1.0)
                    }
                }
                TailShape::Exponential { rate } => rate * (-rate * x).exp(),
                TailShape::Custom(_) => {
                    let d = 1e-6 * x.max(1.0);
                    ((self.h(x - d) - self.h(x + d)) / (2.0 * d)).max(0.0)
                }
            },
        }
    }

    fn h_mass(&self) -> f64 {
        match &self.shape {
            TailShape::PowerCap { index } if *index > 1.0 => 1.0 + 1.0 / (index - 1.0),
            TailShape::Exponential { rate } => 1.0 / rate,
            _ => integrate(|x| self.h(x), 0.0, 1.0, 1e-12, 1e-10).map(|r| r.value).unwrap_or(1.0)
                + integrate(|s: f64| self.h(s.exp()) * s.exp(), 0.0, 60.0, 1e-12, 1e-10)
                    .map(|r| r.value)
                    .unwrap_or(f64::INFINITY),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub pass: bool,
    /// Fitted constant of the dominance condition.
    pub fitted_c: f64,
    pub long_tailed: bool,
    pub monotone_weighted: bool,
    pub scaling_a: bool,
    pub doubling_c: f64,
    pub doubling_ok: bool,
    pub failures: Vec<String>,
    pub witness: Option<(f64, f64)>,
}

fn growing_x() -> Vec<f64> {
    (0..=40).map(|i| 10f64.powf(i as f64 / 10.0)).collect()
}

/// Checks the large-jump domination and the regularity hypotheses on `h`.
pub fn check_tail_hypotheses(
    measure: &LevyMeasureSpec,
    tail: &TailFunctionSpec,
    scaling: &ScalingTable,
) -> Result<TailReport> {
    let mut failures = Vec::new();
    let mut witness = None;
    let vs = growing_x();

    // domination: fitted constant must not keep growing along v
    let mut ratios_by_v = vec![0.0f64; vs.len()];
    for (&t, &rho) in scaling.t_nodes.iter().zip(&scaling.rho) {
        for (j, &v) in vs.iter().enumerate() {
            let lhs = match tail.form {
                TailForm::Survival => t * measure.mass_beyond(v / rho)?,
                TailForm::Density => {
                    let pi = measure.density(v / rho).ok_or_else(|| {
                        Error::Precondition("density form requires an absolutely continuous measure".into())
                    })?;
                    t / rho * pi
                }
            };
            let r = lhs / tail.h(v);
            if !r.is_finite() {
                failures.push("domination ratio not finite".into());
                witness = Some((t, v));
            }
            ratios_by_v[j] = ratios_by_v[j].max(r);
        }
    }
    let fitted_c = ratios_by_v.iter().copied().fold(0.0, f64::max);
    let n = ratios_by_v.len();
    let head_max = ratios_by_v[..n / 2].iter().copied().fold(0.0, f64::max);
    let tail_max = ratios_by_v[n / 2..].iter().copied().fold(0.0, f64::max);
    if !(fitted_c.is_finite()) || tail_max > 2.0 * head_max.max(f64::MIN_POSITIVE) {
        failures.push("domination constant grows with v".into());
        witness = witness.or(Some((scaling.t_nodes[0], *vs.last().unwrap())));
    }

    // long-tailedness: h(x - y)/h(x) -> 1
    let mut long_tailed = true;
    for y in [1.0, 5.0] {
        let dev: Vec<f64> = [1e3, 1e4, 1e5].iter().map(|&x| (tail.h(x - y) / tail.h(x) - 1.0).abs()).collect();
        if !(dev[2] < 0.05 && dev[2] <= dev[0] + 1e-15) {
            long_tailed = false;
        }
    }
    if !long_tailed {
        failures.push("h is not long-tailed".into());
    }

    let mut monotone_weighted = true;
    let mut prev = f64::INFINITY;
    for &x in &vs {
        let v = x.powf(2.0 * tail.eps) * tail.h(x);
        if v > prev * (1.0 + 1e-12) {
            monotone_weighted = false;
            witness = witness.or(Some((x, v)));
        }
        prev = v;
    }
    if !monotone_weighted {
        failures.push("x^(2 eps) h(x) is not decreasing".into());
    }

    let mut scaling_a = true;
    for &x in &vs {
        for c in [1.5, 2.0, 10.0, 100.0] {
            if tail.h(c * x) > tail.h(x) / c * (1.0 + 1e-12) {
                scaling_a = false;
                witness = witness.or(Some((c, x)));
            }
        }
    }
    if !scaling_a {
        failures.push("h(cx) <= h(x)/c violated".into());
    }

    let doubling: Vec<f64> = vs.iter().map(|&x| tail.h(x) / tail.h(2.0 * x)).collect();
    let doubling_c = doubling.iter().copied().fold(0.0, f64::max);
    let m = doubling.len();
    let doubling_ok = doubling_c.is_finite()
        && doubling[m - 1] <= 1.01 * doubling[..m - 1].iter().copied().fold(0.0, f64::max);
    if !doubling_ok {
        failures.push("h(x) <= c h(2x) has no uniform constant".into());
    }

    Ok(TailReport {
        pass: failures.is_empty(),
        fitted_c,
        long_tailed,
        monotone_weighted,
        scaling_a,
        doubling_c,
        doubling_ok,
        failures,
        witness,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubexpReport {
    pub verdict: Verdict,
    /// `(x, ratio)` along the growing sequence.
    pub ratios: Vec<(f64, f64)>,
}

/// Estimates `lim (1 - G*G)/(1 - G)` (or `g*g / g`) along a growing sequence.
pub fn check_subexponential(tail: &TailFunctionSpec) -> Result<SubexpReport> {
    let xs: Vec<f64> = (0..=8).map(|j| 10.0 * 2f64.powi(j)).collect();
    let mut ratios = Vec::with_capacity(xs.len());
    for &x in &xs {
        let r = match tail.form {
            TailForm::Density => {
                let g = |y: f64| tail.law_density(y);
                // g*g(x) = 2 ∫_0^{x/2} g(y) g(x - y) dy
                let conv = 2.0 * integrate_split(&|y| g(y) * g(x - y), 0.0, x / 2.0)?;
                conv / g(x)
            }
            TailForm::Survival => {
                let s = |z: f64| if z <= 0.0 { 1.0 } else { tail.h(z) };
                // P(X1 + X2 > x) = ∫ S(x - y) dG(y) over y < x, plus S(x)
                let conv = integrate_split(&|y| s(x - y) * tail.law_density(y), 0.0, x)? + s(x);
                conv / s(x)
            }
        };
        ratios.push((x, r));
    }
    let n = ratios.len();
    let last = ratios[n - 1].1;
    let prev = ratios[n - 2].1;
    let verdict = if !last.is_finite() || last > 4.0 && last > prev * 1.2 {
        Verdict::Fail
    } else if (last - 2.0).abs() < 0.1 && (last - prev).abs() < 0.05 {
        Verdict::Pass
    } else if last > 3.0 && last > prev {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    };
    Ok(SubexpReport { verdict, ratios })
}

fn integrate_split(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    let mut pts = vec![a];
    let mut p = 1.0;
    while p < b {
        if p > a {
            pts.push(p);
        }
        p *= 2.0;
    }
    // refine near the upper end where shifted kernels concentrate
    let mut q = 1.0;
    while b - q > a {
        pts.push(b - q);
        q *= 2.0;
    }
    pts.push(b);
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    pts.dedup();
    let mut s = 0.0;
    for w in pts.windows(2) {
        s += integrate(f, w[0], w[1], 1e-14, 1e-10)?.value;
    }
    Ok(s)
}
