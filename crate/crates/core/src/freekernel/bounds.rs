//! Bound templates and the fitted two-sided bounds for the free kernel.

use serde::{Deserialize, Serialize};

use super::compound::build_compound_measures;
use super::inversion::FreeKernel;
use crate::error::{Error, Result};
use crate::exponent::{scaling_rho, LevyMeasureSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundTemplate {
    Upper { d1: f64, d2: f64 },
    Lower { d3: f64, d4: f64 },
    Gt { c: f64, theta: f64 },
}

impl BoundTemplate {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            BoundTemplate::Upper { d1, d2 } => d1 > 0.0 && d2 > 0.0,
            BoundTemplate::Lower { d3, d4 } => d3 > 0.0 && d4 > 0.0,
            BoundTemplate::Gt { c, theta } => c > 0.0 && theta > 0.0 && theta <= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("bad template constants {self:?}")))
        }
    }

    /// The template in the scaled variable: `f_up`, `f_low`, or `g_{t,θ}/ρ_t`
    /// (so that `g_{t,θ}(x) = ρ_t · eval(ρ_t x)`).
    pub fn eval(&self, z: f64) -> f64 {
        let z = z.abs();
        match *self {
            BoundTemplate::Upper { d1, d2 } => d1 * f_up_shape(d2, z),
            BoundTemplate::Lower { d3, d4 } => d3 * (1.0 - d4 * z).max(0.0),
            BoundTemplate::Gt { c, theta } => f_up_shape(theta * c, z),
        }
    }

    /// `ρ · eval(ρ x)`.
    pub fn eval_scaled(&self, rho: f64, x: f64) -> f64 {
        rho * self.eval(rho * x)
    }
}

/// `e^{-d|z| ln(1+|z|)}`.
pub fn f_up_shape(d: f64, z: f64) -> f64 {
    let z = z.abs();
    (-d * z * z.ln_1p()).exp()
}

/// `g_{t,θ}(x) = ρ_t e^{-θ c ρ_t|x| ln(1+ρ_t|x|)}`.
pub fn g_t(rho: f64, c: f64, theta: f64, x: f64) -> f64 {
    rho * f_up_shape(theta * c, rho * x)
}

/// `h_{t,ε}(x) = ρ_t h_ε(ρ_t |x|)`.
pub fn h_t_eps(rho: f64, h_eps: &dyn Fn(f64) -> f64, x: f64) -> f64 {
    rho * h_eps(rho * x.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperFit {
    pub order: u32,
    pub d2: f64,
    /// `A_k(t)` for each time node.
    pub constants: Vec<f64>,
    pub drift: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerFit {
    pub d3: f64,
    pub d4: f64,
    pub per_t: Vec<f64>,
    pub drift: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct P0BoundsReport {
    pub t_nodes: Vec<f64>,
    pub upper: Vec<UpperFit>,
    pub lower: LowerFit,
    pub pass: bool,
    pub witness: Option<String>,
}

const D2_CANDIDATES: [f64; 8] = [2.0, 1.0, 0.5, 0.25, 0.1, 0.05, 0.02, 0.01];
const D4_CANDIDATES: [f64; 7] = [4.0, 2.0, 1.0, 0.75, 0.5, 0.25, 0.125];

fn drift(v: &[f64]) -> f64 {
    let hi = v.iter().cloned().fold(f64::MIN, f64::max);
    let lo = v.iter().cloned().fold(f64::MAX, f64::min);
    if lo > 0.0 && hi.is_finite() {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Fits `|∂^k p_t(x)| ≤ A_k ρ_t^{k+1} (f_up(ρ_t·) * P_t)(x)` for `k = 0, 1, 2` and
/// `p_t(x) ≥ ρ_t d3 (1 - d4 ρ_t |x|)_+`.
///
/// `z_grid` holds points in the natural scale: the kernel is evaluated at
/// `x = z / ρ_t`. Constants pass when their drift across `t_nodes` is below 2.
pub fn verify_p0_bounds(measure: &LevyMeasureSpec, t_nodes: &[f64], z_grid: &[f64]) -> Result<P0BoundsReport> {
    if t_nodes.len() < 2 || z_grid.is_empty() {
        return Err(Error::InsufficientData("need two time nodes and a nonempty grid".into()));
    }
    let fk = FreeKernel::new(measure)?;
    // ratio[k][d2 index][t index]
    let mut ratios = vec![vec![vec![0.0; t_nodes.len()]; D2_CANDIDATES.len()]; 3];
    let mut lower = vec![vec![f64::INFINITY; t_nodes.len()]; D4_CANDIDATES.len()];
    for (ti, &t) in t_nodes.iter().enumerate() {
        let rho = scaling_rho(measure, t)?;
        let xs: Vec<f64> = z_grid.iter().map(|z| z / rho).collect();
        let fam = build_compound_measures(measure, t, 0.5)?;
        for k in 0..3u32 {
            let d = fk.derivative(t, k, &xs)?;
            for (di, &d2) in D2_CANDIDATES.iter().enumerate() {
                let f = |x: f64| f_up_shape(d2, rho * x);
                let mut worst: f64 = 0.0;
                for (j, &x) in xs.iter().enumerate() {
                    let rhs = rho.powi(k as i32 + 1) * fam.poisson.convolve_fn(&f, x);
                    let v = d.values[(0, j)].abs();
                    // entries below the inversion error carry no information
                    if v > 10.0 * d.meta.err_est {
                        worst = worst.max(if rhs > 0.0 { v / rhs } else { f64::INFINITY });
                    }
                }
                ratios[k as usize][di][ti] = worst;
            }
        }
        let p = fk.density(t, &xs)?;
        for (di, &d4) in D4_CANDIDATES.iter().enumerate() {
            for (j, &z) in z_grid.iter().enumerate() {
                let shape = 1.0 - d4 * z.abs();
                if shape > 0.0 {
                    lower[di][ti] = lower[di][ti].min(p.values[(0, j)] / (rho * shape));
                }
            }
        }
    }
    let mut witness = None;
    let mut upper = Vec::new();
    for k in 0..3u32 {
        // largest decay rate whose fitted constant is stable across t
        let mut fit = None;
        for (di, &d2) in D2_CANDIDATES.iter().enumerate() {
            let c = &ratios[k as usize][di];
            let dr = drift(c);
            if dr < 2.0 {
                fit = Some(UpperFit { order: k, d2, constants: c.clone(), drift: dr, pass: true });
                break;
            }
        }
        let fit = fit.unwrap_or_else(|| {
            let c = ratios[k as usize][D2_CANDIDATES.len() - 1].clone();
            let dr = drift(&c);
            witness.get_or_insert_with(|| format!("order {k}: no decay rate with stable constant (drift {dr:.3})"));
            UpperFit { order: k, d2: D2_CANDIDATES[D2_CANDIDATES.len() - 1], constants: c, drift: dr, pass: false }
        });
        upper.push(fit);
    }
    let mut best: Option<LowerFit> = None;
    for (di, &d4) in D4_CANDIDATES.iter().enumerate() {
        let per_t = lower[di].clone();
        let d3 = per_t.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(d3 > 0.0 && d3.is_finite()) {
            continue;
        }
        let dr = drift(&per_t);
        let cand = LowerFit { d3, d4, per_t, drift: dr, pass: dr < 2.0 };
        // first stable fit, scanning from the narrowest support
        if cand.pass {
            best = Some(cand);
            break;
        }
        if best.as_ref().is_none_or(|b| cand.drift < b.drift) {
            best = Some(cand);
        }
    }
    let lower = match best {
        Some(b) => b,
        None => {
            witness.get_or_insert_with(|| "no positive lower constant on the grid".into());
            LowerFit { d3: 0.0, d4: D4_CANDIDATES[0], per_t: vec![0.0; t_nodes.len()], drift: f64::INFINITY, pass: false }
        }
    };
    if !lower.pass {
        witness.get_or_insert_with(|| format!("lower constant drifts by {:.3}", lower.drift));
    }
    let pass = upper.iter().all(|u| u.pass) && lower.pass;
    Ok(P0BoundsReport { t_nodes: t_nodes.to_vec(), upper, lower, pass, witness })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates() {
        let lo = BoundTemplate::Lower { d3: 0.3, d4: 2.0 };
        assert_eq!(lo.eval(0.5), 0.0);
        assert!((lo.eval(0.25) - 0.15).abs() < 1e-15);
        assert!(BoundTemplate::Gt { c: 1.0, theta: 1.5 }.validate().is_err());
        assert!((g_t(2.0, 1.0, 1.0, 0.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn cauchy_bounds_stable() {
        let z: Vec<f64> = (0..=60).map(|i| -6.0 + 0.2 * i as f64).collect();
        let r = verify_p0_bounds(&LevyMeasureSpec::cauchy(), &[0.01, 0.1, 1.0], &z).unwrap();
        assert!(r.pass, "{r:?}");
    }
}
