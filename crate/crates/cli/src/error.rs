use std::fmt;

use etdist_core::Error;
use serde::Serialize;

/// Failure classes, one exit code each.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad input: exit code 1.
    Validation(String),
    /// A solver failed or gave an inconsistent answer: exit code 2.
    Solver(String),
    /// A check suite reported failures: exit code 3.
    Check(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Check(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Solver(_) => "solver",
            CliError::Check(_) => "check",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Solver(m) | CliError::Check(m) => m,
        }
    }

    pub fn context(self, what: &str) -> Self {
        let wrap = |m: String| format!("{what}: {m}");
        match self {
            CliError::Validation(m) => CliError::Validation(wrap(m)),
            CliError::Solver(m) => CliError::Solver(wrap(m)),
            CliError::Check(m) => CliError::Check(wrap(m)),
        }
    }

    /// The structured form written to stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            code: u8,
            message: &'a str,
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            error: Body<'a>,
        }
        serde_json::to_string(&Doc { error: Body { kind: self.kind(), code: self.code(), message: self.message() } })
            .expect("error JSON")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {}", self.kind(), self.message())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Dimension(_) | Error::Domain(_) | Error::NegativeEntry { .. } | Error::Preset(_) | Error::Unsupported(_) => {
                CliError::Validation(e.to_string())
            }
            Error::SizeGuard(_) | Error::Lp(_) | Error::Internal(_) => CliError::Solver(e.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_follow_the_error_class() {
        assert_eq!(CliError::from(Error::Preset("x".into())).code(), 1);
        assert_eq!(CliError::from(Error::Lp("x".into())).code(), 2);
        assert_eq!(CliError::Check("x".into()).code(), 3);
        let v: serde_json::Value = serde_json::from_str(&CliError::Solver("boom".into()).to_json()).unwrap();
        assert_eq!(v["error"]["kind"], "solver");
        assert_eq!(v["error"]["code"], 2);
        assert_eq!(v["error"]["message"], "boom");
    }
}
