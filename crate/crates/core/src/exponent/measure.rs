//! Symmetric Lévy measures and integrals of even functions against them.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, gk15, integrate_with_limit, Integral, Rule};

/// Power-law envelope `coef * u^(-1-index)` for a density on one side of `u = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub coef: f64,
    pub index: f64,
}

/// User-supplied even density with declared envelopes.
#[derive(Clone)]
pub struct CustomDensity {
    pub pi: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Valid on `0 < u <= 1`.
    pub small: Envelope,
    /// Valid on `u >= 1`.
    pub tail: Envelope,
}

impl fmt::Debug for CustomDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDensity")
            .field("small", &self.small)
            .field("tail", &self.tail)
            .finish_non_exhaustive()
    }
}

impl PartialEq for CustomDensity {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.pi, &other.pi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum DensityShape {
    /// `coef * |u|^(-1-index)`.
    Power { coef: f64, index: f64 },
    /// `coef * |u|^(-1-a(ln(1 + 1/|u|)))` with
    /// `a(v) = base + amplitude * sin(2 ln(1 + ln(1 + v)))`.
    ///
    /// The local index drifts between `base - amplitude` and `base + amplitude`
    /// while `v a'(v) -> 0`, so the exponent oscillates on a log-log scale.
    LogOscillating { coef: f64, base: f64, amplitude: f64 },
    #[serde(skip)]
    Custom(CustomDensity),
}

impl DensityShape {
    pub fn eval(&self, u: f64) -> f64 {
        let u = u.abs();
        if u == 0.0 {
            return f64::INFINITY;
        }
        match self {
            DensityShape::Power { coef, index } => coef * u.powf(-1.0 - index),
            DensityShape::LogOscillating { coef, .. } => {
                let a = self.local_index((1.0 / u).ln_1p()).expect("oscillating shape");
                coef * u.powf(-1.0 - a)
            }
            DensityShape::Custom(c) => (c.pi)(u),
        }
    }

    /// The index `a(v)` of a log-oscillating density; `None` for other shapes.
    pub fn local_index(&self, v: f64) -> Option<f64> {
        match self {
            DensityShape::LogOscillating { base, amplitude, .. } => {
                Some(base + amplitude * (2.0 * v.ln_1p().ln_1p()).sin())
            }
            _ => None,
        }
    }

    pub fn small_envelope(&self) -> Envelope {
        match self {
            DensityShape::Power { coef, index } => Envelope { coef: *coef, index: *index },
            DensityShape::LogOscillating { coef, base, amplitude } => {
                Envelope { coef: *coef, index: base + amplitude.abs() }
            }
            DensityShape::Custom(c) => c.small,
        }
    }

    pub fn tail_envelope(&self) -> Envelope {
        match self {
            DensityShape::Power { coef, index } => Envelope { coef: *coef, index: *index },
            DensityShape::LogOscillating { coef, base, amplitude } => {
                Envelope { coef: *coef, index: base - amplitude.abs() }
            }
            DensityShape::Custom(c) => c.tail,
        }
    }
}

/// Symmetric Lévy measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevyMeasureSpec {
    /// `q(xi) = scale * |xi|^alpha`.
    Stable { alpha: f64, scale: f64 },
    Density { density: DensityShape },
    /// Atoms at `±u` with the given masses.
    Atoms { atoms: Vec<(f64, f64)> },
    /// Atoms at `±2^(-k upsilon)` with mass `2^(k theta)`, `k` over all integers.
    DyadicDiscrete { theta: f64, upsilon: f64 },
}

/// Even integrand with the envelope data needed to bound truncated tails.
///
/// `g` is evaluated on `u > 0` only; the integral over the real line is twice
/// the one-sided value.  Bounds: `|g(u)| <= small_coef * u^2` near the origin
/// and `|g(u)| <= large_bound` everywhere.
pub struct EvenIntegrand<'a> {
    pub g: &'a dyn Fn(f64) -> f64,
    pub small_coef: f64,
    pub large_bound: f64,
    /// Points where `g` may fail to be smooth.
    pub breakpoints: Vec<f64>,
    /// Integration window on `u > 0`; outside it `g` is zero.
    pub support: (f64, f64),
    /// Absolute error that is acceptable regardless of the size of the result.
    pub abs_tol: f64,
}

impl<'a> EvenIntegrand<'a> {
    pub fn new(g: &'a dyn Fn(f64) -> f64, small_coef: f64, large_bound: f64) -> Self {
        Self { g, small_coef, large_bound, breakpoints: Vec::new(), support: (0.0, f64::INFINITY), abs_tol: 0.0 }
    }

    pub fn with_breakpoints(mut self, points: &[f64]) -> Self {
        self.breakpoints.extend(points.iter().copied().filter(|p| p.is_finite() && *p > 0.0));
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol.max(0.0);
        self
    }

    pub fn with_support(mut self, lo: f64, hi: f64) -> Self {
        self.support = (lo.max(0.0), hi);
        self
    }
}

pub const DEFAULT_REL_TOL: f64 = 1e-9;
const DYADIC_STOP: f64 = 1e-12;

/// Normalizing constant of the symmetric stable density, `q(xi) = |xi|^alpha`.
pub fn stable_density_constant(alpha: f64) -> f64 {
    if (alpha - 1.0).abs() < 1e-15 {
        return 1.0 / PI;
    }
    gamma(1.0 + alpha) * (PI * alpha / 2.0).sin() / PI
}

impl LevyMeasureSpec {
    pub fn cauchy() -> Self {
        LevyMeasureSpec::Stable { alpha: 1.0, scale: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LevyMeasureSpec::Stable { alpha, scale } => {
                if !(*alpha > 0.0 && *alpha < 2.0) {
                    return Err(Error::InvalidSpec(format!("stable index {alpha} outside (0, 2)")));
                }
                if !(*scale > 0.0 && scale.is_finite()) {
                    return Err(Error::InvalidSpec(format!("stable scale {scale} must be positive")));
                }
            }
            LevyMeasureSpec::Density { density } => {
                let s = density.small_envelope();
                let t = density.tail_envelope();
                if !(s.coef > 0.0 && s.index < 2.0) {
                    return Err(Error::InvalidSpec(format!(
                        "density envelope near 0 has index {} (needs < 2)",
                        s.index
                    )));
                }
                if !(t.coef > 0.0 && t.index > 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "density tail envelope index {} must be positive",
                        t.index
                    )));
                }
                if let DensityShape::Power { index, .. } = density {
                    if !(*index > 0.0 && *index < 2.0) {
                        return Err(Error::InvalidSpec(format!("power index {index} outside (0, 2)")));
                    }
                }
                for u in [1e-3, 0.1, 1.0, 10.0] {
                    let v = density.eval(u);
                    if !(v.is_finite() && v >= 0.0) {
                        return Err(Error::InvalidSpec(format!("density not finite/nonnegative at u = {u}")));
                    }
                    if (density.eval(-u) - v).abs() > 1e-14 * v.abs() {
                        return Err(Error::InvalidSpec(format!("density not even at u = {u}")));
                    }
                }
            }
            LevyMeasureSpec::Atoms { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::InvalidSpec("atomic measure without atoms".into()));
                }
                for &(u, m) in atoms {
                    if !(u > 0.0 && u.is_finite() && m > 0.0 && m.is_finite()) {
                        return Err(Error::InvalidSpec(format!("atom ({u}, {m}) needs u > 0, mass > 0")));
                    }
                }
            }
            LevyMeasureSpec::DyadicDiscrete { theta, upsilon } => {
                if !(*upsilon > 0.0 && *theta > 0.0 && *theta < 2.0 * upsilon) {
                    return Err(Error::InvalidSpec(format!(
                        "dyadic measure needs 0 < theta < 2 upsilon (theta = {theta}, upsilon = {upsilon})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Density `π(u)` for absolutely continuous kinds.
    pub fn density(&self, u: f64) -> Option<f64> {
        match self {
            LevyMeasureSpec::Stable { alpha, scale } => {
                Some(scale * stable_density_constant(*alpha) * u.abs().powf(-1.0 - alpha))
            }
            LevyMeasureSpec::Density { density } => Some(density.eval(u)),
            _ => None,
        }
    }

    pub fn is_finite_measure(&self) -> bool {
        matches!(self, LevyMeasureSpec::Atoms { .. })
    }

    /// Envelopes `(small, tail)` for absolutely continuous kinds.
    fn envelopes(&self) -> Option<(Envelope, Envelope)> {
        match self {
            LevyMeasureSpec::Stable { alpha, scale } => {
                let e = Envelope { coef: scale * stable_density_constant(*alpha), index: *alpha };
                Some((e, e))
            }
            LevyMeasureSpec::Density { density } => {
                Some((density.small_envelope(), density.tail_envelope()))
            }
            _ => None,
        }
    }

    /// Upper bound for `∫_{0<u<=u0} u² μ(du)` (one side).
    pub fn small_moment_bound(&self, u0: f64) -> f64 {
        match self {
            LevyMeasureSpec::Atoms { atoms } => {
                atoms.iter().filter(|a| a.0 <= u0).map(|a| a.1 * a.0 * a.0).sum()
            }
            LevyMeasureSpec::DyadicDiscrete { theta, upsilon } => {
                // k >= k0 where 2^(-k upsilon) <= u0
                let k0 = (-(u0.log2()) / upsilon).ceil();
                let r = 2f64.powf(theta - 2.0 * upsilon);
                2f64.powf(k0 * (theta - 2.0 * upsilon)) / (1.0 - r)
            }
            _ => {
                let (s, t) = self.envelopes().expect("continuous kind");
                if u0 <= 1.0 {
                    s.coef * u0.powf(2.0 - s.index) / (2.0 - s.index)
                } else {
                    let inner = s.coef / (2.0 - s.index);
                    let outer = if (2.0 - t.index).abs() < 1e-12 {
                        t.coef * u0.ln()
                    } else {
                        t.coef * (u0.powf(2.0 - t.index) - 1.0) / (2.0 - t.index)
                    };
                    inner + outer
                }
            }
        }
    }

    /// Upper bound for `μ((r, ∞))` (one side).
    pub fn tail_mass_bound(&self, r: f64) -> f64 {
        match self {
            LevyMeasureSpec::Atoms { atoms } => atoms.iter().filter(|a| a.0 > r).map(|a| a.1).sum(),
            LevyMeasureSpec::DyadicDiscrete { theta, upsilon } => {
                // k <= k1 where 2^(-k upsilon) > r
                let k1 = (-(r.log2()) / upsilon).floor();
                let k1 = if 2f64.powf(-k1 * upsilon) > r { k1 } else { k1 - 1.0 };
                2f64.powf(k1 * theta) / (1.0 - 2f64.powf(-theta))
            }
            _ => {
                let (s, t) = self.envelopes().expect("continuous kind");
                if r >= 1.0 {
                    t.coef * r.powf(-t.index) / t.index
                } else {
                    let outer = t.coef / t.index;
                    let inner = if s.index.abs() < 1e-12 {
                        -s.coef * r.ln()
                    } else {
                        s.coef * (r.powf(-s.index) - 1.0) / s.index
                    };
                    outer + inner
                }
            }
        }
    }

    /// `∫_ℝ g dμ` for even `g`, i.e. twice the one-sided integral.
    pub fn integrate_even(&self, f: &EvenIntegrand<'_>, rel_tol: f64) -> Result<Integral> {
        let one = match self {
            LevyMeasureSpec::Atoms { atoms } => {
                let (lo, hi) = f.support;
                let v = atoms
                    .iter()
                    .filter(|a| a.0 >= lo && a.0 <= hi)
                    .map(|&(u, m)| m * (f.g)(u))
                    .sum();
                Integral { value: v, abs_err: 0.0 }
            }
            LevyMeasureSpec::DyadicDiscrete { theta, upsilon } => dyadic_sum(*theta, *upsilon, f),
            _ => {
                let pi = |u: f64| self.density(u).expect("continuous kind");
                continuous_one_sided(self, &pi, f, rel_tol)?
            }
        };
        Ok(Integral { value: 2.0 * one.value, abs_err: 2.0 * one.abs_err })
    }

    /// Characteristic exponent `q(ξ) = ∫(1 - cos ξu) μ(du)`.
    pub fn q(&self, xi: f64) -> Result<f64> {
        let xi = xi.abs();
        if xi == 0.0 {
            return Ok(0.0);
        }
        match self {
            LevyMeasureSpec::Stable { alpha, scale } => Ok(scale * xi.powf(*alpha)),
            _ => Ok(self.q_weighted(xi, &|_| 1.0, 1.0, &[])?.value),
        }
    }

    /// `∫(1 - cos ξu) w(u) μ(du)` for an even weight `0 <= w <= w_sup`
    /// smooth away from `w_breaks`.
    pub fn q_weighted(
        &self,
        xi: f64,
        w: &dyn Fn(f64) -> f64,
        w_sup: f64,
        w_breaks: &[f64],
    ) -> Result<Integral> {
        let xi = xi.abs();
        if xi == 0.0 || w_sup == 0.0 {
            return Ok(Integral { value: 0.0, abs_err: 0.0 });
        }
        match self {
            LevyMeasureSpec::Atoms { .. } | LevyMeasureSpec::DyadicDiscrete { .. } => {
                let g = |u: f64| (2.0 * (0.5 * xi * u).sin().powi(2)) * w(u);
                let f = EvenIntegrand::new(&g, 0.5 * xi * xi * w_sup, 2.0 * w_sup);
                self.integrate_even(&f, DEFAULT_REL_TOL)
            }
            _ => {
                let pi = |u: f64| self.density(u).expect("continuous kind");
                oscillatory_q(self, &pi, xi, w, w_sup, w_breaks)
            }
        }
    }

    /// `q^U(ξ) = ∫((ξu)² ∧ 1) μ(du)`.
    pub fn q_upper(&self, xi: f64) -> Result<f64> {
        let xi = xi.abs();
        if xi == 0.0 {
            return Ok(0.0);
        }
        if let LevyMeasureSpec::Stable { alpha, scale } = self {
            let c = scale * stable_density_constant(*alpha);
            return Ok(2.0 * c * xi.powf(*alpha) * 2.0 / (alpha * (2.0 - alpha)));
        }
        let g = |u: f64| (xi * u).powi(2).min(1.0);
        let f = EvenIntegrand::new(&g, xi * xi, 1.0).with_breakpoints(&[1.0 / xi]);
        Ok(self.integrate_even(&f, DEFAULT_REL_TOL)?.value)
    }

    /// `q^L(ξ) = ∫_{|uξ| <= 1} (ξu)² μ(du)`.
    pub fn q_lower(&self, xi: f64) -> Result<f64> {
        let xi = xi.abs();
        if xi == 0.0 {
            return Ok(0.0);
        }
        if let LevyMeasureSpec::Stable { alpha, scale } = self {
            let c = scale * stable_density_constant(*alpha);
            return Ok(2.0 * c * xi.powf(*alpha) / (2.0 - alpha));
        }
        let g = |u: f64| (xi * u).powi(2);
        let f = EvenIntegrand::new(&g, xi * xi, 1.0).with_support(0.0, 1.0 / xi);
        Ok(self.integrate_even(&f, DEFAULT_REL_TOL)?.value)
    }

    /// Two-sided mass `μ{|u| > r}`.
    pub fn mass_beyond(&self, r: f64) -> Result<f64> {
        if let LevyMeasureSpec::Stable { alpha, scale } = self {
            return Ok(2.0 * scale * stable_density_constant(*alpha) * r.powf(-alpha) / alpha);
        }
        let g = |_u: f64| 1.0;
        let f = EvenIntegrand::new(&g, 0.0, 1.0).with_support(r, f64::INFINITY);
        Ok(self.integrate_even(&f, DEFAULT_REL_TOL)?.value)
    }

    /// Characteristic atoms, if the measure is purely atomic and finite.
    pub fn finite_atoms(&self) -> Option<&[(f64, f64)]> {
        match self {
            LevyMeasureSpec::Atoms { atoms } => Some(atoms),
            _ => None,
        }
    }

    /// Enumerates atoms `(u, mass)` with `u` in `[lo, hi]` (one side).
    pub fn atoms_in(&self, lo: f64, hi: f64) -> Option<Vec<(f64, f64)>> {
        match self {
            LevyMeasureSpec::Atoms { atoms } => {
                Some(atoms.iter().copied().filter(|a| a.0 >= lo && a.0 <= hi).collect())
            }
            LevyMeasureSpec::DyadicDiscrete { theta, upsilon } => {
                let kmin = (-(hi.log2()) / upsilon).ceil() as i64;
                let kmax = (-(lo.max(1e-300).log2()) / upsilon).floor() as i64;
                Some(
                    (kmin..=kmax.min(kmin + 4000))
                        .map(|k| {
                            let k = k as f64;
                            (2f64.powf(-k * upsilon), 2f64.powf(k * theta))
                        })
                        .filter(|a| a.0 >= lo && a.0 <= hi)
                        .collect(),
                )
            }
            _ => None,
        }
    }
}

fn dyadic_sum(theta: f64, upsilon: f64, f: &EvenIntegrand<'_>) -> Integral {
    let (lo, hi) = f.support;
    let atom = |k: i64| {
        let kf = k as f64;
        (2f64.powf(-kf * upsilon), 2f64.powf(kf * theta))
    };
    let term = |k: i64| {
        let (u, m) = atom(k);
        if u < lo || u > hi {
            0.0
        } else {
            m * (f.g)(u)
        }
    };
    let mut acc = term(0);
    let r_small = 2f64.powf(theta - 2.0 * upsilon);
    let r_large = 2f64.powf(-theta);
    let mut err = 0.0;
    // toward the origin
    let mut k = 1;
    loop {
        acc += term(k);
        let (u, m) = atom(k);
        let bound = if u < lo { 0.0 } else { f.small_coef * m * u * u * r_small / (1.0 - r_small) };
        if bound <= DYADIC_STOP * acc.abs() || k > 20_000 || u < 1e-300 {
            err += bound;
            break;
        }
        k += 1;
    }
    // toward infinity
    let mut k = -1;
    loop {
        acc += term(k);
        let (u, m) = atom(k);
        let bound = if u > hi { 0.0 } else { f.large_bound * m * r_large / (1.0 - r_large) };
        if bound <= DYADIC_STOP * acc.abs() || k < -20_000 || u > 1e300 {
            err += bound;
            break;
        }
        k -= 1;
    }
    Integral { value: acc, abs_err: err }
}

/// One-sided integral against a density, in the variable `s = ln u`.
fn continuous_one_sided(
    measure: &LevyMeasureSpec,
    pi: &dyn Fn(f64) -> f64,
    f: &EvenIntegrand<'_>,
    rel_tol: f64,
) -> Result<Integral> {
    let (lo, hi) = f.support;
    let mut pts: Vec<f64> = f.breakpoints.iter().copied().filter(|&p| p > lo && p < hi).collect();
    pts.push(1.0);
    pts.retain(|&p| p > lo && p < hi);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let anchor = pts.first().copied().unwrap_or(if hi.is_finite() { hi } else { 1.0 });
    let top_anchor = pts.last().copied().unwrap_or(anchor).max(lo);

    // Inner cut: lower support or small enough that the u² tail is negligible.
    let mut a = if lo > 0.0 { lo } else { anchor.min(1.0) * 1e-3 };
    let mut b = if hi.is_finite() { hi } else { top_anchor.max(1.0) * 1e3 };

    let h = |s: f64| {
        let u = s.exp();
        (f.g)(u) * pi(u) * u
    };
    let mut grid: Vec<f64> = Vec::new();
    grid.push(a.ln());
    for p in &pts {
        grid.push(p.ln());
    }
    grid.push(b.ln());
    grid.sort_by(|x, y| x.partial_cmp(y).unwrap());
    grid.dedup();
    // crude magnitude fixes an absolute target shared by all pieces
    let mut crude = 0.0;
    for w in grid.windows(2) {
        if w[1] > w[0] {
            let step = (w[1] - w[0]) / 8.0;
            for j in 0..8 {
                let a0 = w[0] + j as f64 * step;
                crude += gk15(&h, a0, a0 + step).0.abs();
            }
        }
    }
    let abs_tol = (0.1 * rel_tol * crude).max(0.1 * f.abs_tol);
    let mut total = Integral { value: 0.0, abs_err: 0.0 };
    for w in grid.windows(2) {
        if w[1] > w[0] {
            let r = integrate_with_limit(&h, w[0], w[1], abs_tol, rel_tol * 0.1, 4000)?;
            total.value += r.value;
            total.abs_err += r.abs_err;
        }
    }
    // Extend toward the origin until the analytic remainder is negligible.
    if lo == 0.0 {
        let mut guard = 0;
        loop {
            let rem = f.small_coef * measure.small_moment_bound(a);
            if rem <= (0.1 * rel_tol * total.value.abs()).max(0.1 * f.abs_tol) || rem == 0.0 {
                total.abs_err += rem;
                break;
            }
            guard += 1;
            if guard > 60 {
                return Err(Error::Quadrature { achieved: rem, requested: rel_tol * total.value.abs() });
            }
            let a_new = a * 1e-3;
            let r = integrate_with_limit(&h, a_new.ln(), a.ln(), abs_tol, rel_tol * 0.1, 4000)?;
            total.value += r.value;
            total.abs_err += r.abs_err;
            a = a_new;
        }
    }
    if !hi.is_finite() {
        let mut guard = 0;
        loop {
            let rem = f.large_bound * measure.tail_mass_bound(b);
            if rem <= (0.1 * rel_tol * total.value.abs()).max(0.1 * f.abs_tol) || rem == 0.0 {
                total.abs_err += rem;
                break;
            }
            guard += 1;
            if guard > 60 {
                return Err(Error::Quadrature { achieved: rem, requested: rel_tol * total.value.abs() });
            }
            let b_new = b * 1e3;
            let r = integrate_with_limit(&h, b.ln(), b_new.ln(), abs_tol, rel_tol * 0.1, 4000)?;
            total.value += r.value;
            total.abs_err += r.abs_err;
            b = b_new;
        }
    }
    Ok(total)
}

thread_local! {
    static GL16: Rule = gauss_legendre(16);
}

fn gl_panel(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    GL16.with(|rule| {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * f(c + h * x)).sum::<f64>() * h
    })
}

/// `∫_0^∞ (1 - cos ξu) w(u) π(u) du`, one side, with an oscillatory tail.
///
/// Split at `S = 1/ξ`: the inner part is smooth on a log scale; beyond `S` the
/// integrand is written as `wπ - cos(ξu) wπ`, the cosine part integrated over
/// half periods and summed with repeated averaging.
fn oscillatory_q(
    measure: &LevyMeasureSpec,
    pi: &dyn Fn(f64) -> f64,
    xi: f64,
    w: &dyn Fn(f64) -> f64,
    w_sup: f64,
    w_breaks: &[f64],
) -> Result<Integral> {
    let s_cut = 1.0 / xi;
    let inner_g = |u: f64| (2.0 * (0.5 * xi * u).sin().powi(2)) * w(u);
    let inner = EvenIntegrand::new(&inner_g, 0.5 * xi * xi * w_sup, 2.0 * w_sup)
        .with_breakpoints(w_breaks)
        .with_support(0.0, s_cut);
    let inner_v = continuous_one_sided(measure, pi, &inner, DEFAULT_REL_TOL)?;

    let mass_g = |u: f64| w(u);
    let mass = EvenIntegrand::new(&mass_g, 0.0, w_sup)
        .with_breakpoints(w_breaks)
        .with_support(s_cut, f64::INFINITY);
    let mass_v = continuous_one_sided(measure, pi, &mass, DEFAULT_REL_TOL)?;

    let wp = |u: f64| w(u) * pi(u);
    let cos_f = |u: f64| (xi * u).cos() * wp(u);
    let half = PI / xi;
    // finite stretch up to the last breakpoint, panels no longer than half a period
    let mut pts: Vec<f64> = w_breaks.iter().copied().filter(|&p| p > s_cut).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let mut start = s_cut;
    let mut finite = 0.0;
    for &p in &pts {
        let n = ((p - start) / half).ceil().max(1.0) as usize;
        let h = (p - start) / n as f64;
        for j in 0..n {
            finite += gl_panel(&cos_f, start + j as f64 * h, start + (j + 1) as f64 * h);
        }
        start = p;
    }
    // align the tail to zeros of cos(ξu) to get alternating half-period terms
    let k0 = (start / half - 0.5).ceil();
    let z0 = (k0 + 0.5) * half;
    if z0 > start {
        finite += gl_panel(&cos_f, start, z0);
    }
    let (tail, tail_err) = alternating_tail(&cos_f, z0, half);
    let value = inner_v.value + mass_v.value - finite - tail;
    let abs_err = inner_v.abs_err + mass_v.abs_err + tail_err + 1e-15 * value.abs();
    Ok(Integral { value: 2.0 * value, abs_err: 2.0 * abs_err })
}

/// Sum of half-period integrals of a decaying oscillatory integrand starting at a zero.
fn alternating_tail(f: &dyn Fn(f64) -> f64, z0: f64, half: f64) -> (f64, f64) {
    const M: usize = 48;
    let mut partial = Vec::with_capacity(M);
    let mut s = 0.0;
    for k in 0..M {
        let a = z0 + k as f64 * half;
        s += gl_panel(f, a, a + half);
        partial.push(s);
    }
    // repeated averaging of the last partial sums
    let mut level: Vec<f64> = partial[M / 2..].to_vec();
    let mut prev = *level.last().unwrap();
    let mut err = f64::INFINITY;
    while level.len() > 1 {
        level = level.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let cur = *level.last().unwrap();
        err = (cur - prev).abs();
        prev = cur;
    }
    (prev, err)
}
