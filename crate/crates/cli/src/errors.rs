//! Exit-code classification: validation problems (bad config, missing
//! inputs, malformed files) exit 2; runtime failures exit 1.

use std::fmt;

#[derive(Debug)]
pub struct ValidationError(pub String);

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ValidationError {}

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(ValidationError(msg.into()))
}

/// Exit code for an error chain: 2 when any link is a validation-class
/// problem, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<ValidationError>() {
            return 2;
        }
        if let Some(core) = cause.downcast_ref::<slant_core::Error>() {
            match core {
                slant_core::Error::Validation(_)
                | slant_core::Error::DanglingReference { .. }
                | slant_core::Error::DuplicateKey { .. }
                | slant_core::Error::SelectorMismatch { .. }
                | slant_core::Error::Csv { .. } => return 2,
                _ => return 1,
            }
        }
    }
    1
}
