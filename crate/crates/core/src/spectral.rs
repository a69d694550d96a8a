//! Uniform periodic grids and cached FFT plans.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Circle of length `length` sampled at `x_j = -length/2 + j * dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleGrid {
    pub n: usize,
    pub length: f64,
}

impl CircleGrid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 8 || !n.is_multiple_of(2) || !(length > 0.0) {
            return Err(Error::InvalidSpec(format!("circle grid needs even n >= 8 and positive length (n={n}, L={length})")));
        }
        Ok(Self { n, length })
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        -0.5 * self.length + j as f64 * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Signed angular frequency of FFT bin `k`.
    pub fn freq(&self, k: usize) -> f64 {
        let kk = if k <= self.n / 2 { k as f64 } else { k as f64 - self.n as f64 };
        2.0 * PI * kk / self.length
    }

    pub fn max_freq(&self) -> f64 {
        PI / self.dx()
    }

    /// Index of the node nearest to `x` (with wrap-around).
    pub fn index_of(&self, x: f64) -> usize {
        let s = ((x + 0.5 * self.length) / self.dx()).round() as i64;
        s.rem_euclid(self.n as i64) as usize
    }

    /// `x` reduced to the fundamental cell `[-L/2, L/2)`.
    pub fn wrap(&self, x: f64) -> f64 {
        (x + 0.5 * self.length).rem_euclid(self.length) - 0.5 * self.length
    }
}

type PlanKey = (usize, bool);

fn plans() -> &'static Mutex<HashMap<PlanKey, Arc<dyn Fft<f64>>>> {
    static PLANS: OnceLock<Mutex<HashMap<PlanKey, Arc<dyn Fft<f64>>>>> = OnceLock::new();
    PLANS.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Shared plan for a transform length; plans are created once under the lock.
pub fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut map = plans().lock().expect("fft plan cache poisoned");
    map.entry((n, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

/// `v̂_k = Σ_j v_j e^{-2πi jk/n}`.
pub fn forward(values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan(buf.len(), false).process(&mut buf);
    buf
}

/// Real part of the normalized inverse transform.
pub fn inverse(hat: &[Complex64]) -> Vec<f64> {
    let mut buf = hat.to_vec();
    let n = buf.len();
    plan(n, true).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Transform of the grid delta `e_j / dx`.
pub fn delta_hat(grid: &CircleGrid, j: usize) -> Vec<Complex64> {
    let n = grid.n;
    let inv_dx = 1.0 / grid.dx();
    (0..n)
        .map(|k| {
            let phase = -2.0 * PI * ((j * k) % n) as f64 / n as f64;
            Complex64::from_polar(inv_dx, phase)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_delta() {
        let g = CircleGrid::new(64, 8.0 * PI).unwrap();
        let v: Vec<f64> = g.nodes().iter().map(|x| (-x * x).exp()).collect();
        let back = inverse(&forward(&v));
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).abs() < 1e-14);
        }
        let d = inverse(&delta_hat(&g, 5));
        assert!((d[5] * g.dx() - 1.0).abs() < 1e-12);
        assert!(d[6].abs() < 1e-12);
        assert_eq!(g.index_of(g.node(63) + 0.6 * g.dx()), 0);
        assert!((g.wrap(4.5 * PI) + 3.5 * PI).abs() < 1e-12);
    }
}
