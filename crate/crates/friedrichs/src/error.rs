use friedrichs_core::Error;

use crate::output::{Record, NO_HASH};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {message}{}", location(*line, *column, field.as_deref()))]
    Parse { path: String, line: Option<usize>, column: Option<usize>, field: Option<String>, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("model failed validation: {0}")]
    Validation(String),
    #[error("{0} invariant check(s) failed")]
    Verify(usize),
    #[error(transparent)]
    Numerical(#[from] Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn location(line: Option<usize>, column: Option<usize>, field: Option<&str>) -> String {
    match (line, column, field) {
        (_, _, Some(f)) => format!(" (field {f})"),
        (Some(l), Some(c), None) => format!(" (line {l}, column {c})"),
        _ => String::new(),
    }
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse { .. } => "ParseError",
            CliError::Usage(_) => "UsageError",
            CliError::Validation(_) => "ValidationFailure",
            CliError::Verify(_) => "IdentityViolation",
            CliError::Io(_) => "IoError",
            CliError::Numerical(e) => match e {
                Error::PoleHit { .. } => "PoleHit",
                Error::DegenerateConfluence { .. } => "DegenerateConfluence",
                Error::NonConvergent { .. } => "NonConvergent",
                Error::OnBranchCut { .. } => "OnBranchCut",
                Error::NearSingular { .. } => "NearSingular",
                Error::IdentityViolation { .. } => "IdentityViolation",
                Error::BoundaryZero => "BoundaryZero",
                Error::MaxDepthExceeded { .. } => "MaxDepthExceeded",
                Error::ContinuationLost { .. } => "ContinuationLost",
                Error::HigherOrderPole { .. } => "HigherOrderPole",
                Error::NoPole { .. } => "NoPole",
                Error::TailTooFat { .. } => "TailTooFat",
                Error::ExtensionIllposed { .. } => "ExtensionIllposed",
                Error::NoConvergence { .. } => "NoConvergence",
                Error::InvalidInput(_) => "InvalidInput",
            },
        }
    }

    /// 2 parse/usage, 3 validation, 4 numerical breakdown, 5 identity
    /// violation; other library errors get codes from 10 up.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } | CliError::Usage(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Verify(_) => 5,
            CliError::Io(_) => 6,
            CliError::Numerical(e) => match e {
                Error::NearSingular { .. } | Error::NoConvergence { .. } => 4,
                Error::IdentityViolation { .. } => 5,
                Error::PoleHit { .. } => 10,
                Error::DegenerateConfluence { .. } => 11,
                Error::NonConvergent { .. } => 12,
                Error::OnBranchCut { .. } => 13,
                Error::BoundaryZero => 14,
                Error::MaxDepthExceeded { .. } => 15,
                Error::ContinuationLost { .. } => 16,
                Error::HigherOrderPole { .. } => 17,
                Error::NoPole { .. } => 18,
                Error::TailTooFat { .. } => 19,
                Error::ExtensionIllposed { .. } => 20,
                Error::InvalidInput(_) => 21,
            },
        }
    }

    pub fn record(&self, hash: Option<&str>) -> String {
        let mut r = Record::new("error", hash.unwrap_or(NO_HASH))
            .str("kind", self.kind())
            .int("exit_code", self.exit_code() as i64)
            .str("message", &self.to_string());
        if let CliError::Parse { line, column, field, .. } = self {
            if let (Some(l), Some(c)) = (line, column) {
                r = r.int("line", *l as i64).int("column", *c as i64);
            }
            if let Some(f) = field {
                r = r.str("field", f);
            }
        }
        r.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_are_distinct_per_library_error() {
        let errs = [
            Error::PoleHit { z: Default::default(), pole: Default::default(), distance: 0.0 },
            Error::DegenerateConfluence { separation: 0.0 },
            Error::NonConvergent { order: 1 },
            Error::OnBranchCut { z: Default::default() },
            Error::IdentityViolation { what: "x", defect: 1.0, tolerance: 0.0 },
            Error::BoundaryZero,
            Error::MaxDepthExceeded { unresolved: vec![] },
            Error::ContinuationLost { eps: 0.1, reason: "x", last_good: vec![] },
            Error::HigherOrderPole { zeta: Default::default(), ratio: 1.0 },
            Error::NoPole { zeta: Default::default(), norm: 0.0 },
            Error::TailTooFat { ratio: 1.0 },
            Error::ExtensionIllposed { residual: 1.0 },
            Error::InvalidInput("x".into()),
        ];
        let mut codes: Vec<i32> = errs.into_iter().map(|e| CliError::Numerical(e).exit_code()).collect();
        codes.push(CliError::Numerical(Error::NearSingular { sigma_min: 0.0 }).exit_code());
        assert_eq!(codes.last(), Some(&4));
        assert_eq!(CliError::Numerical(Error::NoConvergence { what: "x" }).exit_code(), 4);
        codes.sort();
        codes.dedup();
        assert_eq!(codes.len(), 14);
    }

    #[test]
    fn record_is_json() {
        let e = CliError::Parse {
            path: "m.json".into(),
            line: Some(3),
            column: Some(7),
            field: None,
            message: "bad".into(),
        };
        let v: serde_json::Value = serde_json::from_str(&e.record(None)).unwrap();
        assert_eq!(v["kind"], "ParseError");
        assert_eq!(v["line"], 3);
        assert_eq!(v["exit_code"], 2);
    }
}
