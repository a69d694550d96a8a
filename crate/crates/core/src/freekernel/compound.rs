//! Finite measures made of atoms plus a tabulated density, and the family
//! `Λ_t, P_t, χ_{t,ε}, G_t, 𝒫_t` built from the large jumps of the base measure.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::{scaling_rho, LevyMeasureSpec};
use crate::quadrature::integrate;

/// Cell masses on the uniform grid `x_i = (i - half) * h`, `i = 0..2 half`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tabulated {
    pub h: f64,
    pub half: usize,
    pub mass: Vec<f64>,
}

impl Tabulated {
    pub fn zeros(h: f64, half: usize) -> Self {
        Self { h, half, mass: vec![0.0; 2 * half + 1] }
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.half as f64) * self.h
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Adds mass at `x` split linearly between neighbouring nodes; returns the
    /// part that falls outside the window.
    fn deposit(&mut self, x: f64, m: f64) -> f64 {
        let s = x / self.h + self.half as f64;
        let n = self.mass.len();
        if s < 0.0 || s > (n - 1) as f64 {
            return m;
        }
        let i = s.floor() as usize;
        let f = s - i as f64;
        if i + 1 < n {
            self.mass[i] += m * (1.0 - f);
            self.mass[i + 1] += m * f;
        } else {
            self.mass[i] += m;
        }
        0.0
    }
}

/// Finite measure: atoms, a tabulated part and mass known to lie outside the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompoundMeasure {
    pub atoms: Vec<(f64, f64)>,
    pub density: Tabulated,
    pub outside_mass: f64,
    pub total_mass: f64,
}

const MAX_ATOMS: usize = 4096;

impl CompoundMeasure {
    pub fn zero(h: f64, half: usize) -> Self {
        Self { atoms: Vec::new(), density: Tabulated::zeros(h, half), outside_mass: 0.0, total_mass: 0.0 }
    }

    pub fn dirac(h: f64, half: usize) -> Self {
        Self { atoms: vec![(0.0, 1.0)], density: Tabulated::zeros(h, half), outside_mass: 0.0, total_mass: 1.0 }
    }

    fn recount(&mut self) {
        self.total_mass = self.atoms.iter().map(|a| a.1).sum::<f64>() + self.density.total() + self.outside_mass;
    }

    /// `Σ atoms + Σ cells + outside - total_mass`.
    pub fn bookkeeping_gap(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum::<f64>() + self.density.total() + self.outside_mass - self.total_mass
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            atoms: self.atoms.iter().map(|&(x, m)| (x, c * m)).collect(),
            density: Tabulated { mass: self.density.mass.iter().map(|m| c * m).collect(), ..self.density.clone() },
            outside_mass: c * self.outside_mass,
            total_mass: c * self.total_mass,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().copied());
        let mut density = self.density.clone();
        for (a, b) in density.mass.iter_mut().zip(&other.density.mass) {
            *a += b;
        }
        let mut out = Self { atoms, density, outside_mass: self.outside_mass + other.outside_mass, total_mass: 0.0 };
        out.compact_atoms();
        out.recount();
        out
    }

    fn compact_atoms(&mut self) {
        self.atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(self.atoms.len());
        for &(x, m) in &self.atoms {
            match merged.last_mut() {
                Some(last) if (last.0 - x).abs() <= 1e-12 * x.abs().max(1.0) => last.1 += m,
                _ => merged.push((x, m)),
            }
        }
        self.atoms = merged;
        if self.atoms.len() > MAX_ATOMS {
            // too many atoms: move them into the tabulated part
            let atoms = std::mem::take(&mut self.atoms);
            for (x, m) in atoms {
                self.outside_mass += self.density.deposit(x, m);
            }
        }
    }

    /// Convolution; both operands must share the tabulation grid.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        if self.density.h != other.density.h || self.density.half != other.density.half {
            return Err(Error::GridMismatch("compound measures on different grids".into()));
        }
        let h = self.density.h;
        let half = self.density.half;
        let mut out = Self::zero(h, half);
        let mut outside = self.outside_mass * (other.total_mass) + other.outside_mass * (self.total_mass - self.outside_mass);
        for &(a, ma) in &self.atoms {
            for &(b, mb) in &other.atoms {
                out.atoms.push((a + b, ma * mb));
            }
        }
        // atom * density: shift with linear interpolation
        for (atoms, dens) in [(&self.atoms, &other.density), (&other.atoms, &self.density)] {
            for &(a, ma) in atoms.iter() {
                for (i, &m) in dens.mass.iter().enumerate() {
                    if m != 0.0 {
                        outside += out.density.deposit(dens.x(i) + a, ma * m);
                    }
                }
            }
        }
        // density * density via zero-padded FFT
        let n = self.density.mass.len();
        if self.density.total() != 0.0 && other.density.total() != 0.0 {
            let len = (2 * n).next_power_of_two();
            let mut planner = FftPlanner::<f64>::new();
            let fwd = planner.plan_fft_forward(len);
            let inv = planner.plan_fft_inverse(len);
            let mut a: Vec<Complex64> = (0..len).map(|i| Complex64::new(*self.density.mass.get(i).unwrap_or(&0.0), 0.0)).collect();
            let mut b: Vec<Complex64> = (0..len).map(|i| Complex64::new(*other.density.mass.get(i).unwrap_or(&0.0), 0.0)).collect();
            fwd.process(&mut a);
            fwd.process(&mut b);
            for (x, y) in a.iter_mut().zip(&b) {
                *x *= y;
            }
            inv.process(&mut a);
            // index k of the full convolution sits at (k - 2 half) h
            for (k, v) in a.iter().enumerate().take(2 * n - 1) {
                let m = v.re / len as f64;
                let idx = k as i64 - half as i64;
                if idx >= 0 && (idx as usize) < n {
                    out.density.mass[idx as usize] += m;
                } else {
                    outside += m;
                }
            }
        }
        out.outside_mass = outside;
        out.compact_atoms();
        out.recount();
        Ok(out)
    }

    /// `∫ f(x - u) M(du)` over the atoms and cells (outside mass ignored).
    pub fn convolve_fn(&self, f: &dyn Fn(f64) -> f64, x: f64) -> f64 {
        let mut s: f64 = self.atoms.iter().map(|&(u, m)| m * f(x - u)).sum();
        for (i, &m) in self.density.mass.iter().enumerate() {
            if m != 0.0 {
                s += m * f(x - self.density.x(i));
            }
        }
        s
    }
}

/// The five measures attached to one time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompoundFamily {
    pub t: f64,
    pub rho: f64,
    pub eps: f64,
    pub lambda: CompoundMeasure,
    pub poisson: CompoundMeasure,
    pub chi: CompoundMeasure,
    pub g: CompoundMeasure,
    pub script_p: CompoundMeasure,
    /// Number of convolution powers kept in `P_t`.
    pub k_terms: usize,
    /// Poisson mass beyond `k_terms`.
    pub truncation_mass: f64,
    pub normalizer: f64,
}

/// Poisson tail `P(N > k)` for mean `lambda`.
fn poisson_tail(lambda: f64, k: usize) -> f64 {
    let mut term = (-lambda).exp();
    let mut cdf = term;
    for j in 1..=k {
        term *= lambda / j as f64;
        cdf += term;
    }
    (1.0 - cdf).max(0.0)
}

/// Builds `Λ_t = t μ|_{|ρ_t u| > 1}` and the derived measures.
///
/// The tabulation window is `[-40/ρ_t, 40/ρ_t]` with spacing `1/(8ρ_t)`.
pub fn build_compound_measures(measure: &LevyMeasureSpec, t: f64, eps: f64) -> Result<CompoundFamily> {
    let rho = scaling_rho(measure, t)?;
    let h = 1.0 / (8.0 * rho);
    let half = 320;
    let window = h * half as f64;
    let r = 1.0 / rho;
    let mut lambda = CompoundMeasure::zero(h, half);
    match measure.atoms_in(r * (1.0 + 1e-15), window) {
        Some(atoms) => {
            for (u, m) in atoms.into_iter().filter(|a| a.0 > r) {
                lambda.atoms.push((u, t * m));
                lambda.atoms.push((-u, t * m));
            }
            lambda.outside_mass = t * measure.mass_beyond(window)?;
            if let LevyMeasureSpec::DyadicDiscrete { .. } = measure {
                // atoms exactly at the window edge are already listed
                let listed: f64 = lambda.atoms.iter().map(|a| a.1).sum();
                lambda.outside_mass = (t * measure.mass_beyond(r)? - listed).max(0.0);
            }
        }
        None => {
            let pi = |u: f64| measure.density(u).expect("continuous kind");
            let n = lambda.density.mass.len();
            for i in 0..n {
                let x = lambda.density.x(i);
                let (a, b) = (x - h / 2.0, x + h / 2.0);
                let (a, b) = if x >= 0.0 { (a.max(r), b) } else { (a, b.min(-r)) };
                if b > a {
                    let m = integrate(pi, a, b, 0.0, 1e-10)?.value;
                    lambda.density.mass[i] = t * m;
                }
            }
            lambda.outside_mass = t * measure.mass_beyond(window + h / 2.0)?;
        }
    }
    lambda.compact_atoms();
    lambda.recount();
    let total = lambda.total_mass;

    // Poisson exponential
    let mut k_terms = 1;
    while poisson_tail(total, k_terms) >= 1e-10 && k_terms < 30 {
        k_terms += 1;
    }
    let truncation_mass = poisson_tail(total, k_terms);
    let mut poisson = CompoundMeasure::dirac(h, half);
    let mut power = CompoundMeasure::dirac(h, half);
    let mut fact = 1.0;
    for k in 1..=k_terms {
        power = power.convolve(&lambda)?;
        fact *= k as f64;
        poisson = poisson.add(&power.scaled(1.0 / fact));
    }
    poisson = poisson.scaled((-total).exp());
    poisson.outside_mass += truncation_mass;
    poisson.recount();

    // χ = ρ^ε (|u|^ε ∧ 1) Λ
    let weight = |u: f64| rho.powf(eps) * u.abs().powf(eps).min(1.0);
    let mut chi = lambda.clone();
    for a in chi.atoms.iter_mut() {
        a.1 *= weight(a.0);
    }
    for i in 0..chi.density.mass.len() {
        let x = chi.density.x(i);
        chi.density.mass[i] *= weight(x);
    }
    chi.outside_mass *= rho.powf(eps);
    chi.recount();

    let pc = poisson.convolve(&chi)?;
    let unnormalized = poisson.add(&pc);
    let normalizer = 1.0 / unnormalized.total_mass;
    let g = unnormalized.scaled(normalizer);
    let script_p = poisson.add(&poisson.convolve(&lambda)?);
    Ok(CompoundFamily { t, rho, eps, lambda, poisson, chi, g, script_p, k_terms, truncation_mass, normalizer })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cauchy_family_masses() {
        let f = build_compound_measures(&LevyMeasureSpec::cauchy(), 0.25, 0.5).unwrap();
        assert!(f.lambda.total_mass <= 1.0 + 1e-12);
        // Λ(ℝ) = t · 2/(π r) with r = 1/ρ = 4t/π: exactly 1/2
        assert!((f.lambda.total_mass - 0.5).abs() < 1e-8, "{}", f.lambda.total_mass);
        assert!((f.poisson.total_mass - 1.0).abs() < 1e-9);
        assert!((f.g.total_mass - 1.0).abs() < 1e-12);
        assert!(f.truncation_mass < 1e-10);
        for m in [&f.lambda, &f.poisson, &f.chi, &f.g, &f.script_p] {
            assert!(m.bookkeeping_gap().abs() < 1e-8);
        }
    }
}
