//! The shipped example models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::{Amplitude, DensityShape, LevyMeasureSpec, PerturbationSpec, Profile};
use crate::parametrix::ModelSpec;
use crate::validate::ExampleBound;

pub const PRESET_NAMES: [&str; 4] = ["exa1", "exa2", "exa3", "appendixB"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: String,
    pub base: LevyMeasureSpec,
    pub pert: PerturbationSpec,
    /// Right-hand side used by the example-bound check, when the model has one.
    pub example_bound: Option<ExampleBound>,
    /// Bound templates do not apply literally to an oscillating exponent.
    pub oscillatory: bool,
    /// Parameter constraints the model must satisfy, in readable form.
    pub constraints: Vec<String>,
    /// Numerical values that are choices of this implementation.
    pub artifact_choices: Vec<String>,
}

impl Preset {
    pub fn model(&self) -> Result<ModelSpec> {
        ModelSpec::new(self.base.clone(), self.pert.clone())
    }
}

/// `m(x,u) = 0.5 (1 ∧ |u|^{1/2}) (1 + sin²x)/2`.
fn trig_perturbation() -> PerturbationSpec {
    PerturbationSpec::separable(
        Amplitude::Trig { c0: 0.5, c1: 0.5, freq: 1.0 },
        Profile::PowerCap { c: 0.5, eps: 0.5 },
        0.5,
        0.5,
    )
}

const TRIG_CHOICE: &str = "perturbation scale 0.5 and eps = 0.5 in m(x,u) = 0.5 (1 ∧ |u|^eps)(1 + sin²x)/2";

pub fn preset(name: &str) -> Result<Preset> {
    let p = match name {
        "exa1" => Preset {
            name: name.into(),
            base: LevyMeasureSpec::Stable { alpha: 1.0, scale: 1.0 },
            pert: trig_perturbation(),
            example_bound: Some(ExampleBound::stable(1.0, 0.5)),
            oscillatory: false,
            constraints: vec!["0 < alpha < 2".into(), "0 < eps < alpha".into()],
            artifact_choices: vec!["alpha = 1 with unit scale (Cauchy)".into(), TRIG_CHOICE.into()],
        },
        "exa2" => Preset {
            name: name.into(),
            base: LevyMeasureSpec::DyadicDiscrete { theta: 1.2, upsilon: 1.0 },
            pert: trig_perturbation(),
            example_bound: Some(ExampleBound::dyadic(1.2, 0.5)),
            oscillatory: false,
            constraints: vec!["0 < theta < 2 upsilon".into(), "0 < eps < theta".into()],
            artifact_choices: vec!["theta = 1.2, upsilon = 1".into(), TRIG_CHOICE.into()],
        },
        "exa3" => Preset {
            name: name.into(),
            base: LevyMeasureSpec::Density { density: DensityShape::LogOscillating { coef: 0.3, base: 1.0, amplitude: 0.4 } },
            pert: trig_perturbation(),
            example_bound: None,
            oscillatory: true,
            constraints: vec!["alpha(v) in [0.6, 1.4]".into(), "v alpha'(v) -> 0".into(), "0 < eps < 0.6".into()],
            artifact_choices: vec![
                "density 0.3 |u|^{-1-a(ln(1+1/|u|))} with a(v) = 1 + 0.4 sin(2 ln(1 + ln(1 + v)))".into(),
                TRIG_CHOICE.into(),
            ],
        },
        "appendixB" => Preset {
            name: name.into(),
            base: LevyMeasureSpec::Stable { alpha: 1.0, scale: 1.0 },
            pert: PerturbationSpec::separable(Amplitude::Constant { value: 1.0 }, Profile::PowerCap { c: 1.0, eps: 2.0 }, 1.0, 2.0),
            example_bound: None,
            oscillatory: false,
            constraints: vec!["m bounded with finite intensity".into()],
            artifact_choices: vec!["Cauchy base with unit scale".into()],
        },
        other => return Err(Error::InvalidSpec(format!("unknown preset {other:?} (known: {})", PRESET_NAMES.join(", ")))),
    };
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::Regime;

    #[test]
    fn presets_build_models() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap();
            let m = p.model().unwrap();
            assert!(m.eta() > 0.0 && m.eta() <= 1.0, "{name}");
        }
        assert_eq!(preset("appendixB").unwrap().model().unwrap().pert_report.regime, Regime::Bounded);
        assert!(preset("exa4").is_err());
    }
}
