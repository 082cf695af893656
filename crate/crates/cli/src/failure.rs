//! Exit-code contract: 0 ok, 1 property failure, 2 validation, 3 domain
//! precondition, 4 solver stall.

use std::fmt;
use std::process::ExitCode;

use pgap_core::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Property = 1,
    Validation = 2,
    Domain = 3,
    Stall = 4,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub message: String,
}

impl Failure {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(Kind::Validation, message)
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.kind as u8)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = match e {
            Error::FixedVectorPresent => Kind::Domain,
            _ => Kind::Validation,
        };
        Self::new(kind, e.to_string())
    }
}
