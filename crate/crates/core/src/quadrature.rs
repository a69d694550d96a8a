//! Quadrature rules: adaptive Gauss-Kronrod for scalar integrals, Gauss-Legendre
//! panels, and Gauss-Jacobi rules for the endpoint-singular time integrals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Value and absolute error estimate of a definite integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_err: f64,
}

/// Single 15-point Kronrod estimate with the embedded Gauss error.
pub fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let kron = kron * h;
    let gauss = gauss * h;
    (kron, (kron - gauss).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.partial_cmp(&other.err).unwrap_or(Ordering::Equal)
    }
}

/// Globally adaptive Gauss-Kronrod (7/15) integration of `f` over `[a, b]`.
///
/// Stops when the summed error estimate falls below `max(abs_tol, rel_tol*|I|)`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Integral> {
    integrate_with_limit(&f, a, b, abs_tol, rel_tol, 2000)
}

pub fn integrate_with_limit<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> Result<Integral> {
    if a == b {
        return Ok(Integral { value: 0.0, abs_err: 0.0 });
    }
    let (v, e) = gk15(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v, err: e });
    let mut total = v;
    let mut total_err = e;
    let mut n = 1;
    loop {
        let target = abs_tol.max(rel_tol * total.abs());
        if total_err <= target {
            break;
        }
        if n >= max_segments {
            // roundoff floor: accept when the error is at machine level
            if total_err <= 1e3 * f64::EPSILON * heap.iter().map(|s| s.value.abs()).sum::<f64>() {
                break;
            }
            return Err(Error::Quadrature { achieved: total_err, requested: target });
        }
        let seg = heap.pop().expect("heap never empty");
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            heap.push(seg);
            break;
        }
        let (v1, e1) = gk15(f, seg.a, mid);
        let (v2, e2) = gk15(f, mid, seg.b);
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.err;
        heap.push(Segment { a: seg.a, b: mid, value: v1, err: e1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, err: e2 });
        n += 1;
    }
    // resum to limit drift from incremental updates
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let abs_err: f64 = heap.iter().map(|s| s.err).sum();
    Ok(Integral { value, abs_err })
}

/// Integrates over consecutive intervals delimited by `points` (sorted ascending).
pub fn integrate_pieces<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Integral> {
    let mut out = Integral { value: 0.0, abs_err: 0.0 };
    let pieces = points.len().saturating_sub(1).max(1);
    for w in points.windows(2) {
        let r = integrate_with_limit(&f, w[0], w[1], abs_tol / pieces as f64, rel_tol, 2000)?;
        out.value += r.value;
        out.abs_err += r.abs_err;
    }
    Ok(out)
}

/// Quadrature nodes and weights on a reference interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Golub-Welsch for a symmetric tridiagonal Jacobi matrix with zeroth moment `mu0`.
fn golub_welsch(diag: &[f64], off: &[f64], mu0: f64) -> Rule {
    let n = diag.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = diag[i];
        if i + 1 < n {
            m[(i, i + 1)] = off[i];
            m[(i + 1, i)] = off[i];
        }
    }
    let eig = SymmetricEigen::new(m);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1);
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    golub_welsch(&diag, &off, 2.0)
}

/// `n`-point Gauss-Jacobi rule for the weight `r^(a) (1-r)^(b)` on `[0, 1]`.
///
/// Both exponents must exceed -1.
pub fn gauss_jacobi_unit(n: usize, a: f64, b: f64) -> Rule {
    assert!(n >= 1 && a > -1.0 && b > -1.0);
    // Jacobi weight (1-x)^alpha (1+x)^beta on [-1,1]; x = 2r-1 so r^a <-> (1+x)^a.
    let (alpha, beta) = (b, a);
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    for k in 0..n {
        let kf = k as f64;
        let s = 2.0 * kf + alpha + beta;
        let d = if k == 0 {
            (beta - alpha) / (alpha + beta + 2.0)
        } else {
            (beta * beta - alpha * alpha) / (s * (s + 2.0))
        };
        diag.push(d);
        if k + 1 < n {
            let k1 = kf + 1.0;
            let s1 = 2.0 * k1 + alpha + beta;
            let ratio = if k == 0 {
                // closed form avoids 0/0 when alpha + beta = -1
                4.0 * (1.0 + alpha) * (1.0 + beta) / (s1 * s1 * (s1 + 1.0))
            } else {
                4.0 * k1 * (k1 + alpha) * (k1 + beta) * (k1 + alpha + beta)
                    / (s1 * s1 * (s1 + 1.0) * (s1 - 1.0))
            };
            off.push(ratio.sqrt());
        }
    }
    let ln_mu0 = (alpha + beta + 1.0) * std::f64::consts::LN_2 + ln_gamma(alpha + 1.0)
        + ln_gamma(beta + 1.0)
        - ln_gamma(alpha + beta + 2.0);
    let rule = golub_welsch(&diag, &off, ln_mu0.exp());
    let scale = 2f64.powf(-(alpha + beta + 1.0));
    Rule {
        nodes: rule.nodes.iter().map(|x| 0.5 * (x + 1.0)).collect(),
        weights: rule.weights.iter().map(|w| w * scale).collect(),
    }
}

/// Beta function B(a, b).
pub fn beta_fn(a: f64, b: f64) -> f64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

/// Composite Gauss-Legendre over explicit panel boundaries.
pub fn panel_rule(edges: &[f64], order: usize) -> Rule {
    let base = gauss_legendre(order);
    let mut nodes = Vec::with_capacity(edges.len() * order);
    let mut weights = Vec::with_capacity(edges.len() * order);
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        for (x, wt) in base.nodes.iter().zip(&base.weights) {
            nodes.push(c + h * x);
            weights.push(h * wt);
        }
    }
    Rule { nodes, weights }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk_polynomial_exact() {
        let r = integrate(|x| x.powi(5) - 3.0 * x * x, -1.0, 2.0, 1e-13, 1e-13).unwrap();
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0);
        assert!((r.value - exact).abs() < 1e-12);
    }

    #[test]
    fn gk_endpoint_singularity() {
        let r = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, 1e-10, 1e-10).unwrap();
        assert!((r.value - 2.0).abs() < 1e-8, "{}", r.value);
    }

    #[test]
    fn gauss_legendre_moments() {
        let rule = gauss_legendre(10);
        for k in 0..20 {
            let s: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(k)).sum();
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert!((s - exact).abs() < 1e-13, "k={k} {s}");
        }
    }

    #[test]
    fn gauss_jacobi_beta_moments() {
        let (a, b) = (-0.75, -0.6);
        let rule = gauss_jacobi_unit(12, a, b);
        for k in 0..20 {
            let s: f64 = rule.nodes.iter().zip(&rule.weights).map(|(r, w)| w * r.powi(k)).sum();
            let exact = beta_fn(a + 1.0 + k as f64, b + 1.0);
            assert!(((s - exact) / exact).abs() < 1e-11, "k={k} {s} {exact}");
        }
    }
}
