use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freekernel::KernelGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityComparison {
    /// Kolmogorov–Smirnov distance between the empirical and kernel CDFs.
    pub ks_distance: f64,
    /// `Σ |empirical bin mass - kernel bin mass|` over bins of one grid spacing.
    pub l1_distance: f64,
    /// `1.36/√n`, the 95% radius of the KS statistic.
    pub ks_radius: f64,
    pub n: usize,
    /// Mass of the kernel row before normalization.
    pub kernel_mass: f64,
}

/// Compares samples with a density given on uniform nodes.
///
/// With `period`, nodes cover one turn `[y_0, y_0 + period)` of a circle and
/// samples are wrapped onto it; the density is linear between nodes (wrapping
/// from the last node to the first).  Without, the density is linear between
/// nodes and zero outside.
pub fn compare_density(samples: &[f64], nodes: &[f64], density: &[f64], period: Option<f64>) -> Result<DensityComparison> {
    let m = nodes.len();
    if m < 2 || density.len() != m || samples.is_empty() {
        return Err(Error::InvalidSpec("need at least two nodes, matching values and one sample".into()));
    }
    let h = nodes[1] - nodes[0];
    if !(h > 0.0) || nodes.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
        return Err(Error::GridMismatch("density nodes are not uniform".into()));
    }
    let y0 = nodes[0];
    // segment k runs from node k to node k+1 (node m wraps to node 0 on a circle)
    let segs = if period.is_some() { m } else { m - 1 };
    let right = |k: usize| if k + 1 < m { density[k + 1] } else { density[0] };
    let mut cdf = vec![0.0; segs + 1];
    for k in 0..segs {
        cdf[k + 1] = cdf[k] + 0.5 * h * (density[k] + right(k));
    }
    let mass = cdf[segs];
    if !(mass > 0.0) {
        return Err(Error::InvalidSpec("density has no mass".into()));
    }
    let cdf_at = |y: f64| -> f64 {
        let s = (y - y0) / h;
        if s <= 0.0 {
            return 0.0;
        }
        let k = s.floor() as usize;
        if k >= segs {
            return 1.0;
        }
        let d = (s - k as f64) * h;
        let slope = (right(k) - density[k]) / h;
        (cdf[k] + density[k] * d + 0.5 * slope * d * d) / mass
    };
    let mut xs: Vec<f64> = match period {
        Some(p) => samples.iter().map(|x| y0 + (x - y0).rem_euclid(p)).collect(),
        None => samples.to_vec(),
    };
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    let nf = n as f64;
    let mut ks: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf_at(x);
        ks = ks.max((f - i as f64 / nf).abs()).max(((i + 1) as f64 / nf - f).abs());
    }
    // bins [y_k - h/2, y_k + h/2)
    let mut counts = vec![0usize; m];
    let mut outside = 0usize;
    for &x in &xs {
        let k = ((x - y0) / h + 0.5).floor() as i64;
        let k = match period {
            Some(_) => k.rem_euclid(m as i64) as usize,
            None if k < 0 || k >= m as i64 => {
                outside += 1;
                continue;
            }
            None => k as usize,
        };
        counts[k] += 1;
    }
    let mut l1 = outside as f64 / nf;
    for k in 0..m {
        let lo = cdf_at(nodes[k] - 0.5 * h);
        let hi = if period.is_some() && k == m - 1 { 1.0 } else { cdf_at(nodes[k] + 0.5 * h) };
        let mut bin = hi - lo;
        if period.is_some() && k == 0 {
            // the half cell left of y_0 is the end of the last segment
            bin += 1.0 - cdf_at(y0 + (m as f64 - 0.5) * h);
        }
        l1 += (counts[k] as f64 / nf - bin).abs();
    }
    Ok(DensityComparison { ks_distance: ks, l1_distance: l1, ks_radius: 1.36 / nf.sqrt(), n, kernel_mass: mass })
}

/// Compares samples with row `i` of a kernel grid, treating the `y` nodes as a
/// full circle when they cover one.
pub fn compare_to_row(samples: &[f64], grid: &KernelGrid, i: usize) -> Result<DensityComparison> {
    if i >= grid.x_nodes.len() {
        return Err(Error::GridMismatch(format!("row {i} out of range")));
    }
    let period = 2.0 * grid.meta.half_width;
    let h = grid.y_nodes.get(1).map(|y| y - grid.y_nodes[0]).unwrap_or(0.0);
    let full = (grid.y_nodes.len() as f64 * h - period).abs() <= 1e-9 * period;
    compare_density(samples, &grid.y_nodes, &grid.row(i), full.then_some(period))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn cdf_of_a_linear_density_is_exact() {
        // triangle density on [0, 2] sampled at its quantiles
        let nodes = [0.0, 1.0, 2.0];
        let dens = [0.0, 1.0, 0.0];
        let n = 1000;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let u = (i as f64 + 0.5) / n as f64;
                if u < 0.5 {
                    (2.0 * u).sqrt()
                } else {
                    2.0 - (2.0 * (1.0 - u)).sqrt()
                }
            })
            .collect();
        let c = compare_density(&samples, &nodes, &dens, None).unwrap();
        assert!(c.ks_distance <= 0.5 / n as f64 + 1e-12, "{c:?}");
    }

    #[test]
    fn wrapped_samples_match_a_wrapped_density() {
        let l = 2.0 * PI;
        let m = 512;
        let h = l / m as f64;
        let nodes: Vec<f64> = (0..m).map(|j| -PI + j as f64 * h).collect();
        // uniform on the circle, samples spread over several turns
        let dens = vec![1.0 / l; m];
        let samples: Vec<f64> = (0..4000).map(|i| -3.0 * l + 6.0 * l * (i as f64 + 0.5) / 4000.0).collect();
        let c = compare_density(&samples, &nodes, &dens, Some(l)).unwrap();
        assert!(c.ks_distance < 1e-3, "{c:?}");
        assert!((c.kernel_mass - 1.0).abs() < 1e-12);
    }
}
