//! Perturbation kernels `m(x, u)` that modulate the base Lévy measure.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Space-dependent factor of a separable kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Amplitude {
    Constant { value: f64 },
    /// `c0 + c1 * sin²(freq * x)`.
    Trig { c0: f64, c1: f64, freq: f64 },
}

impl Amplitude {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Amplitude::Constant { value } => *value,
            Amplitude::Trig { c0, c1, freq } => c0 + c1 * (freq * x).sin().powi(2),
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            Amplitude::Constant { value } => value.abs(),
            Amplitude::Trig { c0, c1, .. } => c0.abs().max((c0 + c1).abs()),
        }
    }

    pub fn inf(&self) -> f64 {
        match self {
            Amplitude::Constant { value } => *value,
            Amplitude::Trig { c0, c1, .. } => c0.min(c0 + c1),
        }
    }

    /// Smallest positive period, `None` for constants.
    pub fn period(&self) -> Option<f64> {
        match self {
            Amplitude::Constant { .. } => None,
            Amplitude::Trig { c1, freq, .. } => {
                if *c1 == 0.0 || *freq == 0.0 {
                    None
                } else {
                    Some(std::f64::consts::PI / freq.abs())
                }
            }
        }
    }
}

/// Jump-size factor of a separable kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Profile {
    /// `c * (1 ∧ |u|^eps)`.
    PowerCap { c: f64, eps: f64 },
}

impl Profile {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Profile::PowerCap { c, eps } => c * u.abs().powf(*eps).min(1.0),
        }
    }

    pub fn sup(&self) -> f64 {
        match self {
            Profile::PowerCap { c, .. } => c.abs(),
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Profile::PowerCap { .. } => vec![1.0],
        }
    }
}

/// Arbitrary kernel given as a closure.
#[derive(Clone)]
pub struct CustomKernel {
    pub m: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    /// Period in `x`, if any.
    pub period: Option<f64>,
    /// Non-smooth points of `u ↦ m(x, u)` on `u > 0`.
    pub breakpoints: Vec<f64>,
}

impl fmt::Debug for CustomKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomKernel").field("period", &self.period).finish_non_exhaustive()
    }
}

impl PartialEq for CustomKernel {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.m, &other.m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationKernel {
    Zero,
    /// `m(x, u) = amplitude(x) * profile(u)`.
    Separable { amplitude: Amplitude, profile: Profile },
    #[serde(skip)]
    Custom(CustomKernel),
}

/// Perturbation kernel with its declared envelope `c (1 ∧ |u|^eps)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub kernel: PerturbationKernel,
    pub envelope_c: f64,
    pub envelope_eps: f64,
}

impl PerturbationSpec {
    pub fn zero() -> Self {
        Self { kernel: PerturbationKernel::Zero, envelope_c: 1.0, envelope_eps: 1.0 }
    }

    pub fn separable(amplitude: Amplitude, profile: Profile, envelope_c: f64, envelope_eps: f64) -> Self {
        Self { kernel: PerturbationKernel::Separable { amplitude, profile }, envelope_c, envelope_eps }
    }

    pub fn eval(&self, x: f64, u: f64) -> f64 {
        match &self.kernel {
            PerturbationKernel::Zero => 0.0,
            PerturbationKernel::Separable { amplitude, profile } => amplitude.eval(x) * profile.eval(u),
            PerturbationKernel::Custom(c) => (c.m)(x, u),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kernel, PerturbationKernel::Zero)
    }

    /// True when `m` does not depend on `x`.
    pub fn is_translation_invariant(&self) -> bool {
        match &self.kernel {
            PerturbationKernel::Zero => true,
            PerturbationKernel::Separable { amplitude, .. } => amplitude.period().is_none(),
            PerturbationKernel::Custom(_) => false,
        }
    }

    pub fn period(&self) -> Option<f64> {
        match &self.kernel {
            PerturbationKernel::Zero => None,
            PerturbationKernel::Separable { amplitude, .. } => amplitude.period(),
            PerturbationKernel::Custom(c) => c.period,
        }
    }

    /// Upper bound for `sup_{x,u} m(x,u)`.
    pub fn sup(&self) -> f64 {
        match &self.kernel {
            PerturbationKernel::Zero => 0.0,
            PerturbationKernel::Separable { amplitude, profile } => amplitude.sup() * profile.sup(),
            PerturbationKernel::Custom(_) => self.envelope_c,
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.kernel {
            PerturbationKernel::Zero => Vec::new(),
            PerturbationKernel::Separable { profile, .. } => profile.breakpoints(),
            PerturbationKernel::Custom(c) => c.breakpoints.clone(),
        }
    }

    pub fn envelope(&self, u: f64) -> f64 {
        self.envelope_c * u.abs().powf(self.envelope_eps).min(1.0)
    }
}
