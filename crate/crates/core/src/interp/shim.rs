//! The boundary between generated stubs and wherever the units actually run.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DispatchError {
    #[error("unknown function {0:?}")]
    UnknownFunction(String),
    #[error("deployment of {unit:?} failed: {message}")]
    Deployment { unit: String, message: String },
    #[error("transport: {0}")]
    Transport(String),
}

/// Delivers one serialized event to a named unit and returns the serialized
/// response. Stubs reach this through `faas_runtime.invoke`.
///
/// Both legs are JSON text in every implementation, so local execution pays
/// the same encoding cost and coercions as a remote call.
pub trait Dispatcher {
    fn dispatch(&self, unit: &str, event: &str) -> Result<String, DispatchError>;
}
