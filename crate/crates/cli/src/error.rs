use serde_json::{json, Value};

/// Error object printed on standard output with exit status 2.
#[derive(Debug)]
pub struct CliError {
    pub kind: String,
    pub message: String,
    pub location: Option<String>,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { kind: "usage".into(), message: message.into(), location: None }
    }

    pub fn at(mut self, location: impl Into<String>) -> Self {
        self.location.get_or_insert_with(|| location.into());
        self
    }

    pub fn to_json(&self) -> Value {
        json!({ "error": { "kind": self.kind, "message": self.message, "location": self.location } })
    }
}

impl From<gpi_core::Error> for CliError {
    fn from(e: gpi_core::Error) -> Self {
        CliError { kind: e.kind().into(), message: e.to_string(), location: None }
    }
}

/// Attach the offending flag or file to core errors.
pub trait Locate<T> {
    fn at(self, location: &str) -> Result<T, CliError>;
}

impl<T, E: Into<CliError>> Locate<T> for Result<T, E> {
    fn at(self, location: &str) -> Result<T, CliError> {
        self.map_err(|e| e.into().at(location))
    }
}
