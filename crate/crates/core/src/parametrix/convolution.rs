//! Time-space convolution `(A⋆B)_t(x,y) = ∫₀^t ∫ A_{t-τ}(x,z) B_τ(z,y) dz dτ`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freekernel::{GridMeta, KernelGrid, Provenance};
use crate::quadrature::gauss_jacobi_unit;

/// Gauss-Jacobi time rule for weights `r^{-1+δ}(1-r)^{-1+δ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub nodes: usize,
    pub delta: f64,
    /// Relative change (at the scale of the largest entry) below which node doubling stops.
    pub tol: f64,
    pub max_nodes: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { nodes: 16, delta: 0.25, tol: 1e-6, max_nodes: 256 }
    }
}

impl QuadratureSpec {
    fn validate(&self) -> Result<()> {
        if self.nodes < 2 {
            return Err(Error::InvalidSpec(format!("time quadrature needs at least 2 nodes, got {}", self.nodes)));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) || !(self.tol > 0.0) {
            return Err(Error::InvalidSpec(format!("bad time quadrature {self:?}")));
        }
        Ok(())
    }
}

/// Spacing of a uniform node list.
fn uniform_spacing(nodes: &[f64]) -> Result<f64> {
    if nodes.len() < 2 {
        return Err(Error::GridMismatch("inner grid needs at least two nodes".into()));
    }
    let h = nodes[1] - nodes[0];
    let uniform = nodes.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs());
    if !uniform || !(h > 0.0) {
        return Err(Error::GridMismatch("inner grid is not uniform".into()));
    }
    Ok(h)
}

fn same_nodes(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(u, v)| (u - v).abs() <= 1e-12 * (1.0 + u.abs()))
}

/// One Gauss-Jacobi evaluation with `n` nodes.
fn gj_pass(
    a: &dyn Fn(f64) -> Result<KernelGrid>,
    b: &dyn Fn(f64) -> Result<KernelGrid>,
    t: f64,
    n: usize,
    delta: f64,
) -> Result<(Array2<f64>, Vec<f64>, Vec<f64>)> {
    let rule = gauss_jacobi_unit(n, delta - 1.0, delta - 1.0);
    let mut acc: Option<Array2<f64>> = None;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (r, w) in rule.nodes.iter().zip(&rule.weights) {
        let ga = a(t * (1.0 - r))?;
        let gb = b(t * r)?;
        if !same_nodes(&ga.y_nodes, &gb.x_nodes) {
            return Err(Error::GridMismatch("inner nodes of the two factors differ".into()));
        }
        let dz = uniform_spacing(&ga.y_nodes)?;
        // remove the weight built into the rule
        let scale = t * w * dz * (r * (1.0 - r)).powf(1.0 - delta);
        let prod = ga.values.dot(&gb.values) * scale;
        match &mut acc {
            Some(m) => {
                if m.dim() != prod.dim() {
                    return Err(Error::GridMismatch("factor shapes change with time".into()));
                }
                *m += &prod;
            }
            None => {
                xs = ga.x_nodes.clone();
                ys = gb.y_nodes.clone();
                acc = Some(prod);
            }
        }
    }
    Ok((acc.expect("at least one node"), xs, ys))
}

/// Convolves two time-indexed kernel families at time `t`, doubling the number
/// of time nodes until successive results agree to `quad.tol`.
pub fn convolve_timespace(
    a: &dyn Fn(f64) -> Result<KernelGrid>,
    b: &dyn Fn(f64) -> Result<KernelGrid>,
    t: f64,
    quad: &QuadratureSpec,
) -> Result<KernelGrid> {
    quad.validate()?;
    if !(t > 0.0) {
        return Err(Error::InvalidSpec(format!("time {t} must be positive")));
    }
    let mut n = quad.nodes;
    let (mut prev, xs, ys) = gj_pass(a, b, t, n, quad.delta)?;
    let mut change = f64::INFINITY;
    while n * 2 <= quad.max_nodes {
        n *= 2;
        let (next, _, _) = gj_pass(a, b, t, n, quad.delta)?;
        let scale = next.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        change = (&next - &prev).iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale;
        prev = next;
        if change < quad.tol {
            break;
        }
    }
    let mut flags = vec![format!("time_nodes={n}")];
    if change >= quad.tol {
        flags.push(format!("time_rule_unconverged={change:.2e}"));
    }
    let spacing = uniform_spacing(&xs).unwrap_or(0.0);
    let scale = prev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    KernelGrid::new(
        t,
        xs.clone(),
        ys,
        prev,
        GridMeta {
            provenance: Provenance::Other,
            err_est: if change.is_finite() { change * scale } else { scale },
            spacing,
            half_width: xs.last().copied().unwrap_or(0.0).abs().max(xs.first().copied().unwrap_or(0.0).abs()),
            flags,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::beta_fn;
    use std::f64::consts::PI;

    fn nodes() -> Vec<f64> {
        (0..161).map(|i| -8.0 + 0.1 * i as f64).collect()
    }

    fn gauss(var: f64, z: f64) -> f64 {
        (-z * z / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
    }

    fn family(f: impl Fn(f64, f64, f64) -> f64 + 'static) -> impl Fn(f64) -> Result<KernelGrid> {
        move |t: f64| {
            let xs = nodes();
            let v = Array2::from_shape_fn((xs.len(), xs.len()), |(i, j)| f(t, xs[i], xs[j]));
            KernelGrid::new(
                t,
                xs.clone(),
                xs.clone(),
                v,
                GridMeta { provenance: Provenance::Other, err_est: 0.0, spacing: 0.1, half_width: 8.0, flags: vec![] },
            )
        }
    }

    fn max_err_center(g: &KernelGrid, exact: impl Fn(f64, f64) -> f64) -> f64 {
        let mut e: f64 = 0.0;
        for (i, x) in g.x_nodes.iter().enumerate() {
            for (j, y) in g.y_nodes.iter().enumerate() {
                if x.abs() <= 2.0 && y.abs() <= 2.0 {
                    e = e.max((g.values[(i, j)] - exact(*x, *y)).abs());
                }
            }
        }
        e
    }

    #[test]
    fn constant_in_time_gives_t_times_gaussian_of_variance_two() {
        let a = family(|_, x, y| gauss(1.0, y - x));
        let t = 0.7;
        // smooth in time: unweighted Gauss-Legendre is exact
        let quad = QuadratureSpec { delta: 1.0, ..QuadratureSpec::default() };
        let g = convolve_timespace(&a, &a, t, &quad).unwrap();
        let err = max_err_center(&g, |x, y| t * gauss(2.0, y - x));
        assert!(err < 1e-6, "err {err}");
    }

    #[test]
    fn singular_weights_give_beta_integral() {
        let d = 0.3;
        let a = family(move |t, x, y| t.powf(d - 1.0) * gauss(1.0, y - x));
        let t = 0.4;
        let quad = QuadratureSpec { delta: d, ..QuadratureSpec::default() };
        let g = convolve_timespace(&a, &a, t, &quad).unwrap();
        let err = max_err_center(&g, |x, y| beta_fn(d, d) * t.powf(2.0 * d - 1.0) * gauss(2.0, y - x));
        assert!(err < 1e-6 * beta_fn(d, d) * t.powf(2.0 * d - 1.0), "err {err}");
    }

    #[test]
    fn agrees_with_nested_riemann_sums() {
        // smooth kernels with nontrivial time dependence
        let a = family(|t, x, y| (1.0 + t * t) * (-(y - x - 0.3 * t).powi(2)).exp() * (1.0 + 0.2 * (x).cos()));
        let b = family(|t, x, y| (2.0 - t).sqrt() * (-0.5 * (y - x).powi(2) * (1.0 + t)).exp() * (1.0 + 0.1 * (y).sin()));
        let t = 0.9;
        let quad = QuadratureSpec { delta: 1.0, ..QuadratureSpec::default() };
        let g = convolve_timespace(&a, &b, t, &quad).unwrap();
        let m = 4000;
        let h = t / m as f64;
        let xs = nodes();
        for &(x, y) in &[(0.0, 0.0), (-1.0, 0.5), (1.5, -0.7)] {
            // midpoint rule in time, trapezoid in space on a fine z grid
            let mut s = 0.0;
            for k in 0..m {
                let tau = (k as f64 + 0.5) * h;
                let zs: Vec<f64> = (0..1601).map(|i| -8.0 + 0.01 * i as f64).collect();
                let inner: f64 = zs
                    .iter()
                    .enumerate()
                    .map(|(i, &z)| {
                        let w = if i == 0 || i == zs.len() - 1 { 0.5 } else { 1.0 };
                        w * (1.0 + (t - tau).powi(2))
                            * (-(z - x - 0.3 * (t - tau)).powi(2)).exp()
                            * (1.0 + 0.2 * x.cos())
                            * (2.0 - tau).sqrt()
                            * (-0.5 * (y - z).powi(2) * (1.0 + tau)).exp()
                            * (1.0 + 0.1 * y.sin())
                    })
                    .sum::<f64>()
                    * 0.01;
                s += inner * h;
            }
            let i = xs.iter().position(|v| (v - x).abs() < 1e-9).unwrap();
            let j = xs.iter().position(|v| (v - y).abs() < 1e-9).unwrap();
            assert!((g.values[(i, j)] - s).abs() < 1e-6 * s.abs().max(1.0), "{} vs {s}", g.values[(i, j)]);
        }
    }

    #[test]
    fn rejects_a_single_node_rule() {
        let a = family(|_, x, y| gauss(1.0, y - x));
        let quad = QuadratureSpec { nodes: 1, ..QuadratureSpec::default() };
        assert!(convolve_timespace(&a, &a, 0.5, &quad).is_err());
    }
}
