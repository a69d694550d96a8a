//! Batch driver: configs, presets and the staged pipeline.

pub mod config;
pub mod pipeline;

use levy_parametrix::Error;
use serde::Serialize;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NON_CONVERGENCE: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

/// Failure with its exit code, written out as JSON.
#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub exit_code: i32,
    pub kind: String,
    pub message: String,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { exit_code: EXIT_CONFIG, kind: "config".into(), message: message.into(), details: serde_json::Value::Null }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Self {
            exit_code: EXIT_INTERNAL,
            kind: "io".into(),
            message: format!("{}: {e}", path.display()),
            details: serde_json::Value::Null,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("error serializes")
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        let (exit_code, kind, details) = match &e {
            Error::NonConvergence { k, ratio, diagnostics } => (
                EXIT_NON_CONVERGENCE,
                "non_convergence",
                serde_json::json!({
                    "k": k,
                    "ratio": ratio,
                    "diagnostics": serde_json::from_str::<serde_json::Value>(diagnostics).unwrap_or_default(),
                }),
            ),
            Error::CutoffTooSmall { rate, suggested } => {
                (EXIT_CONFIG, "cutoff_too_small", serde_json::json!({ "rate": rate, "suggested": suggested }))
            }
            Error::InvalidSpec(_) => (EXIT_CONFIG, "invalid_spec", serde_json::Value::Null),
            Error::ConditionA1(_) => (EXIT_CONFIG, "condition_a1", serde_json::Value::Null),
            Error::Precondition(_) => (EXIT_CONFIG, "precondition", serde_json::Value::Null),
            Error::Regime(_) => (EXIT_CONFIG, "regime", serde_json::Value::Null),
            Error::GridMismatch(_) => (EXIT_CONFIG, "grid_mismatch", serde_json::Value::Null),
            Error::Parse(_) => (EXIT_CONFIG, "parse", serde_json::Value::Null),
            Error::ScalingUndefined { .. } => (EXIT_CONFIG, "scaling_undefined", serde_json::Value::Null),
            Error::Quadrature { .. } => (EXIT_INTERNAL, "quadrature", serde_json::Value::Null),
            Error::InsufficientData(_) => (EXIT_INTERNAL, "insufficient_data", serde_json::Value::Null),
            Error::CutoffUnreachable { .. } => (EXIT_INTERNAL, "cutoff_unreachable", serde_json::Value::Null),
            Error::Io(_) => (EXIT_INTERNAL, "io", serde_json::Value::Null),
        };
        Self { exit_code, kind: kind.into(), message, details }
    }
}
