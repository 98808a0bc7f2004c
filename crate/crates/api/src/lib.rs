//! Service boundary over a deployment: the v1 HTTP and WebSocket API, the
//! merged event stream and the operator CLI.

pub mod cli;
pub mod client;
pub mod config;
pub mod deployment;
pub mod error;
pub mod events;
pub mod routes;

pub use config::DeploymentConfig;
pub use deployment::Deployment;
pub use error::{ApiError, ErrorBody, ServiceError};
pub use events::{ApiEvent, EventHub, EventPayload};
pub use routes::router;
