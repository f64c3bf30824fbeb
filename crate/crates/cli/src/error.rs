use std::fmt;

use tracecorpus::codec::CodecError;
use tracecorpus::dataset::DatasetError;
use tracecorpus::downstream::DownstreamError;
use tracecorpus::harness::HarnessError;
use tracecorpus::metrics::MetricsError;
use tracecorpus::program::ProgramError;

/// Failure classes, one per exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Usage,
    Data,
    Harness,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Usage => 1,
            Kind::Data => 2,
            Kind::Harness => 3,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Kind::Usage => "usage",
            Kind::Data => "data",
            Kind::Harness => "harness",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn usage(m: impl Into<String>) -> Self {
        CliError { kind: Kind::Usage, message: m.into() }
    }

    pub fn data(m: impl Into<String>) -> Self {
        CliError { kind: Kind::Data, message: m.into() }
    }

    /// Single-line JSON record written to stderr.
    pub fn record(&self) -> String {
        serde_json::json!({
            "error": self.kind.name(),
            "exit_code": self.kind.exit_code(),
            "message": self.message,
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.name(), self.message)
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::data(e.to_string())
            }
        }
    )*};
}

data_error!(DatasetError, CodecError, DownstreamError, MetricsError, ProgramError, serde_json::Error, std::io::Error);

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        let kind = match e {
            HarnessError::Program { .. } => Kind::Data,
            _ => Kind::Harness,
        };
        CliError { kind, message: e.to_string() }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
