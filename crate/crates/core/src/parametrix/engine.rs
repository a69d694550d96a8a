//! Fourier-space recursion for the series terms on a circle grid.
//!
//! With `G` the perturbation operator and `P_s` the free semigroup, a seed `v`
//! generates `I_0(τ) = P_τ v`, `C_k(τ) = G I_{k-1}(τ)` and
//! `I_k(τ) = ∫_0^τ P_{τ-s} C_k(s) ds`.  For a delta seed at `y`, `C_k(t)` is the
//! column `Φ^{⋆k}_t(·, y)` and `Σ_k I_k(t)` is the column of `p_t`.  The time
//! integrals are taken with exact exponential weights per Fourier mode and
//! `C_k` linear between nodes.

use num_complex::Complex64;

use super::model::{Freeze, ModelSpec};
use crate::error::{Error, Result};
use crate::exponent::{PerturbationKernel, Symbol};
use crate::exponent::Amplitude;
use crate::spectral::{inverse, CircleGrid};

/// Multiplication by the amplitude `a(x)`, carried out on Fourier coefficients.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum AmpOp {
    Zero,
    Scalar(f64),
    /// `(a v)^_k = mean v̂_k + coef (v̂_{k-s} + v̂_{k+s})`.
    Trig { mean: f64, coef: f64, shift: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Operators {
    pub grid: CircleGrid,
    pub q: Vec<f64>,
    /// Symbol of the jump part weighted by the profile.
    pub qb: Vec<f64>,
    pub amp: AmpOp,
    /// Amplitude applied after the jump operator (`m(x,u)` frozen at the source).
    pub amp_after: bool,
    /// Number of grid nodes per period of the amplitude; `1` when translation invariant.
    pub cell: usize,
}

impl Operators {
    pub fn new(model: &ModelSpec, grid: CircleGrid) -> Result<Self> {
        let n = grid.n;
        let symbol = Symbol::of_measure(&model.base)?;
        let q: Vec<f64> = (0..n).map(|k| symbol.eval(grid.freq(k).abs())).collect();
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("characteristic exponent not finite on the grid".into()));
        }
        let (qb, amp) = match &model.pert.kernel {
            PerturbationKernel::Zero => (vec![0.0; n], AmpOp::Zero),
            PerturbationKernel::Separable { amplitude, profile } => {
                let sb = Symbol::of_profile(&model.base, profile)?;
                let qb: Vec<f64> = (0..n).map(|k| sb.eval(grid.freq(k).abs())).collect();
                let amp = match *amplitude {
                    Amplitude::Constant { value } => AmpOp::Scalar(value),
                    Amplitude::Trig { c0, c1, .. } if c1 == 0.0 => AmpOp::Scalar(c0),
                    Amplitude::Trig { c0, c1, freq } => {
                        let s = freq.abs() * grid.length / std::f64::consts::PI;
                        let shift = s.round();
                        if (s - shift).abs() > 1e-9 * s.max(1.0) || shift as usize >= n / 2 {
                            return Err(Error::GridMismatch(format!(
                                "circle length {} is not a multiple of the amplitude period",
                                grid.length
                            )));
                        }
                        let sign = if (shift as usize).is_multiple_of(2) { 1.0 } else { -1.0 };
                        AmpOp::Trig { mean: c0 + 0.5 * c1, coef: -0.25 * c1 * sign, shift: shift as usize }
                    }
                };
                (qb, amp)
            }
            PerturbationKernel::Custom(_) => {
                return Err(Error::Precondition("the spectral solver needs a separable perturbation kernel".into()))
            }
        };
        let cell = match (&amp, model.pert.period()) {
            // `shift` is the number of amplitude periods in the circle
            (AmpOp::Trig { shift, .. }, Some(_)) if n.is_multiple_of(*shift) => n / shift,
            (AmpOp::Trig { .. }, Some(_)) => n,
            _ => 1,
        };
        Ok(Self { grid, q, qb, amp, amp_after: model.freeze == Freeze::Source, cell })
    }

    fn apply_amp(&self, v: &[Complex64], out: &mut [Complex64]) {
        let n = v.len();
        match self.amp {
            AmpOp::Zero => out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0)),
            AmpOp::Scalar(c) => out.iter_mut().zip(v).for_each(|(o, x)| *o = c * x),
            AmpOp::Trig { mean, coef, shift } => {
                for k in 0..n {
                    let lo = v[(k + n - shift) % n];
                    let hi = v[(k + shift) % n];
                    out[k] = mean * v[k] + coef * (lo + hi);
                }
            }
        }
    }

    /// `G v` with `G = a · B` (source freeze) or `B · a` (target freeze),
    /// `B` the jump operator with symbol `-q_b`.
    pub fn apply_g(&self, v: &[Complex64], out: &mut [Complex64]) {
        if self.amp == AmpOp::Zero {
            out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
            return;
        }
        if self.amp_after {
            let w: Vec<Complex64> = v.iter().zip(&self.qb).map(|(x, b)| -b * x).collect();
            self.apply_amp(&w, out);
        } else {
            self.apply_amp(v, out);
            out.iter_mut().zip(&self.qb).for_each(|(o, b)| *o *= -b);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.amp == AmpOp::Zero || self.qb.iter().all(|&b| b == 0.0)
    }

    /// Multiplies by `e^{-τ q}`.
    pub fn propagate(&self, tau: f64, v: &[Complex64]) -> Vec<Complex64> {
        v.iter().zip(&self.q).map(|(x, q)| x * (-tau * q).exp()).collect()
    }
}

/// Time nodes starting at 0: geometric toward 0 with the requested outputs inserted.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub nodes: Vec<f64>,
    /// Index in `nodes` of each requested output time.
    pub outputs: Vec<usize>,
}

impl TimeGrid {
    pub fn new(outputs: &[f64], per_octave: usize, octaves: usize) -> Result<Self> {
        if outputs.is_empty() || outputs.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(Error::InvalidSpec("output times must be positive".into()));
        }
        let big = outputs.iter().cloned().fold(0.0, f64::max);
        let ratio = 2f64.powf(1.0 / per_octave as f64);
        let mut geo: Vec<f64> = (0..=octaves * per_octave)
            .map(|i| big * 2f64.powf(-(octaves as f64) + i as f64 / per_octave as f64))
            .collect();
        geo.retain(|&g| outputs.iter().all(|&o| (g - o).abs() > 0.25 * (ratio - 1.0) * o));
        let mut nodes = vec![0.0];
        nodes.extend(geo);
        nodes.extend_from_slice(outputs);
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        nodes.dedup();
        let outputs = outputs.iter().map(|o| nodes.iter().position(|n| n == o).unwrap()).collect();
        Ok(Self { nodes, outputs })
    }

    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }
}

/// `∫_0^1 e^{-zv} dv` and `∫_0^1 v e^{-zv} dv`.
fn phi_weights(z: f64) -> (f64, f64) {
    if z < 1e-3 {
        let a = 1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0;
        let b = 0.5 - z / 3.0 + z * z / 8.0 - z * z * z / 30.0;
        (a, b)
    } else {
        let e = (-z).exp();
        ((1.0 - e) / z, (1.0 - e * (1.0 + z)) / (z * z))
    }
}

/// Per-step, per-mode weights: `I(τ+h) = E I(τ) + w_old C(τ) + w_new C(τ+h)`.
pub(crate) struct StepWeights {
    n: usize,
    e: Vec<f64>,
    w_old: Vec<f64>,
    w_new: Vec<f64>,
}

impl StepWeights {
    pub fn new(ops: &Operators, tg: &TimeGrid) -> Self {
        let n = ops.grid.n;
        let steps = tg.steps();
        let mut e = Vec::with_capacity(steps * n);
        let mut w_old = Vec::with_capacity(steps * n);
        let mut w_new = Vec::with_capacity(steps * n);
        for m in 0..steps {
            let h = tg.nodes[m + 1] - tg.nodes[m];
            for &q in &ops.q {
                let z = h * q;
                let (a, b) = phi_weights(z);
                // the old node carries weight (h - s)/h in s, i.e. v = r/h in r = h - s
                e.push((-z).exp());
                w_old.push(h * b);
                w_new.push(h * (a - b));
            }
        }
        Self { n, e, w_old, w_new }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub k_max: usize,
    pub tol: f64,
    /// Keep `Σ_k C_k` at the outputs.
    pub want_psi: bool,
    /// Keep each `C_k` at the outputs.
    pub want_terms: bool,
}

/// Per-level norms of `C_k` at each output time.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelNorms {
    pub sup: Vec<f64>,
    pub l1: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// `Σ_k I_k` at each output, Fourier side.
    pub p_hat: Vec<Vec<Complex64>>,
    pub psi_hat: Option<Vec<Vec<Complex64>>>,
    /// `terms[k-1][o]` is `C_k` at output `o`.
    pub terms: Vec<Vec<Vec<Complex64>>>,
    pub levels: Vec<LevelNorms>,
}

fn norms(grid: &CircleGrid, hat: &[Complex64]) -> (f64, f64) {
    let v = inverse(hat);
    let sup = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let l1 = v.iter().map(|x| x.abs()).sum::<f64>() * grid.dx();
    (sup, l1)
}

/// Runs the recursion for one seed. Levels stop once `sup|C_k| < tol · sup|C_1|`
/// at every output, or at `k_max`.
pub(crate) fn run(ops: &Operators, tg: &TimeGrid, w: &StepWeights, seed: &[Complex64], opts: &RunOptions) -> RunOutput {
    let n = ops.grid.n;
    let nt = tg.nodes.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut prev: Vec<Complex64> = Vec::with_capacity(nt * n);
    for &tau in &tg.nodes {
        prev.extend(ops.propagate(tau, seed));
    }
    let mut p_hat: Vec<Vec<Complex64>> = tg.outputs.iter().map(|&o| prev[o * n..(o + 1) * n].to_vec()).collect();
    let mut psi_hat = opts.want_psi.then(|| vec![vec![zero; n]; tg.outputs.len()]);
    let mut terms = Vec::new();
    let mut levels = Vec::new();
    let mut c = vec![zero; nt * n];
    let mut cur = vec![zero; nt * n];
    let mut first_sup: Option<Vec<f64>> = None;
    for _k in 1..=opts.k_max {
        for m in 0..nt {
            ops.apply_g(&prev[m * n..(m + 1) * n], &mut c[m * n..(m + 1) * n]);
        }
        let mut lv = LevelNorms { sup: Vec::new(), l1: Vec::new() };
        let mut kept = Vec::new();
        for (oi, &o) in tg.outputs.iter().enumerate() {
            let slice = &c[o * n..(o + 1) * n];
            let (s, l) = norms(&ops.grid, slice);
            lv.sup.push(s);
            lv.l1.push(l);
            if let Some(psi) = psi_hat.as_mut() {
                psi[oi].iter_mut().zip(slice).for_each(|(a, b)| *a += b);
            }
            if opts.want_terms {
                kept.push(slice.to_vec());
            }
        }
        if opts.want_terms {
            terms.push(kept);
        }
        let sup_now = lv.sup.clone();
        levels.push(lv);
        let base = first_sup.get_or_insert_with(|| sup_now.clone()).clone();
        if sup_now.iter().all(|&s| s == 0.0) {
            break;
        }
        // time integration of this level
        cur[..n].iter_mut().for_each(|x| *x = zero);
        for m in 0..nt - 1 {
            let (head, tail) = cur.split_at_mut((m + 1) * n);
            let old = &head[m * n..];
            let new = &mut tail[..n];
            let off = m * w.n;
            for j in 0..n {
                new[j] = w.e[off + j] * old[j] + w.w_old[off + j] * c[m * n + j] + w.w_new[off + j] * c[(m + 1) * n + j];
            }
        }
        for (oi, &o) in tg.outputs.iter().enumerate() {
            p_hat[oi].iter_mut().zip(&cur[o * n..(o + 1) * n]).for_each(|(a, b)| *a += b);
        }
        std::mem::swap(&mut prev, &mut cur);
        if sup_now.iter().zip(&base).all(|(s, b)| *s < opts.tol * b) {
            break;
        }
    }
    RunOutput { p_hat, psi_hat, terms, levels }
}
