//! Fast repeated evaluation of characteristic exponents.

use rayon::prelude::*;

use super::measure::LevyMeasureSpec;
use super::perturbation::Profile;
use crate::error::Result;

/// Log-log table of a positive, nondecreasing symbol, interpolated with
/// four-point Lagrange polynomials in `ln ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolTable {
    ln_lo: f64,
    step: f64,
    ln_q: Vec<f64>,
}

impl SymbolTable {
    pub fn build<F>(f: F, lo: f64, hi: f64, per_decade: usize) -> Result<Self>
    where
        F: Fn(f64) -> Result<f64> + Sync,
    {
        let ln_lo = lo.ln();
        let n = ((hi / lo).log10() * per_decade as f64).ceil() as usize + 1;
        let step = (hi.ln() - ln_lo) / (n - 1) as f64;
        let ln_q = (0..n)
            .into_par_iter()
            .map(|i| f((ln_lo + step * i as f64).exp()).map(|q| q.max(f64::MIN_POSITIVE).ln()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { ln_lo, step, ln_q })
    }

    pub fn eval(&self, xi: f64) -> f64 {
        let xi = xi.abs();
        if xi == 0.0 {
            return 0.0;
        }
        let n = self.ln_q.len();
        let s = (xi.ln() - self.ln_lo) / self.step;
        if s <= 0.0 {
            let slope = self.ln_q[1] - self.ln_q[0];
            return (self.ln_q[0] + slope * s).exp();
        }
        if s >= (n - 1) as f64 {
            let slope = self.ln_q[n - 1] - self.ln_q[n - 2];
            return (self.ln_q[n - 1] + slope * (s - (n - 1) as f64)).exp();
        }
        let i = (s.floor() as usize).clamp(1, n - 3);
        let x = s - i as f64;
        let (y0, y1, y2, y3) = (self.ln_q[i - 1], self.ln_q[i], self.ln_q[i + 1], self.ln_q[i + 2]);
        // nodes at -1, 0, 1, 2
        let l0 = -x * (x - 1.0) * (x - 2.0) / 6.0;
        let l1 = (x + 1.0) * (x - 1.0) * (x - 2.0) / 2.0;
        let l2 = -(x + 1.0) * x * (x - 2.0) / 2.0;
        let l3 = (x + 1.0) * x * (x - 1.0) / 6.0;
        (l0 * y0 + l1 * y1 + l2 * y2 + l3 * y3).exp()
    }
}

/// A characteristic exponent that can be evaluated cheaply many times.
#[derive(Debug, Clone, PartialEq)]
pub enum Symbol {
    Zero,
    Power { scale: f64, alpha: f64 },
    Table(SymbolTable),
    /// Direct summation, used for atomic measures whose symbols are not smooth
    /// on a log scale.
    Direct { measure: LevyMeasureSpec, profile: Option<Profile> },
}

pub const TABLE_LO: f64 = 1e-4;
pub const TABLE_HI: f64 = 1e7;
/// Weighted symbols are tabulated to a lower top and extrapolated as a power
/// beyond it; the quadrature cost grows linearly in `ξ` past the profile's kink.
pub const PROFILE_TABLE_HI: f64 = 1e5;
const PER_DECADE: usize = 48;

impl Symbol {
    pub fn eval(&self, xi: f64) -> f64 {
        match self {
            Symbol::Zero => 0.0,
            Symbol::Power { scale, alpha } => scale * xi.abs().powf(*alpha),
            Symbol::Table(t) => t.eval(xi),
            Symbol::Direct { measure, profile } => match profile {
                None => measure.q(xi).unwrap_or(f64::NAN),
                Some(p) => measure
                    .q_weighted(xi, &|u| p.eval(u), p.sup(), &p.breakpoints())
                    .map(|r| r.value)
                    .unwrap_or(f64::NAN),
            },
        }
    }

    /// `q` of the base measure.
    pub fn of_measure(measure: &LevyMeasureSpec) -> Result<Self> {
        match measure {
            LevyMeasureSpec::Stable { alpha, scale } => Ok(Symbol::Power { scale: *scale, alpha: *alpha }),
            LevyMeasureSpec::Atoms { .. } | LevyMeasureSpec::DyadicDiscrete { .. } => {
                Ok(Symbol::Direct { measure: measure.clone(), profile: None })
            }
            _ => Ok(Symbol::Table(SymbolTable::build(|xi| measure.q(xi), TABLE_LO, TABLE_HI, PER_DECADE)?)),
        }
    }

    /// `∫(1 - cos ξu) profile(u) μ(du)`.
    pub fn of_profile(measure: &LevyMeasureSpec, profile: &Profile) -> Result<Self> {
        let w = |u: f64| profile.eval(u);
        let sup = profile.sup();
        if sup == 0.0 {
            return Ok(Symbol::Zero);
        }
        if matches!(measure, LevyMeasureSpec::Atoms { .. } | LevyMeasureSpec::DyadicDiscrete { .. }) {
            return Ok(Symbol::Direct { measure: measure.clone(), profile: Some(profile.clone()) });
        }
        let breaks = profile.breakpoints();
        let f = |xi: f64| measure.q_weighted(xi, &w, sup, &breaks).map(|r| r.value);
        Ok(Symbol::Table(SymbolTable::build(f, TABLE_LO, PROFILE_TABLE_HI, PER_DECADE)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::measure::DensityShape;

    #[test]
    fn table_reproduces_oscillating_symbol() {
        let m = LevyMeasureSpec::Density {
            density: DensityShape::LogOscillating { coef: 0.3, base: 1.0, amplitude: 0.4 },
        };
        let s = Symbol::of_measure(&m).unwrap();
        for xi in [0.37, 3.3, 77.0, 2500.0] {
            let exact = m.q(xi).unwrap();
            assert!((s.eval(xi) - exact).abs() < 1e-6 * exact, "xi={xi} {} {exact}", s.eval(xi));
        }
    }
}
