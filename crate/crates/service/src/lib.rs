//! HTTP decision service for VNFC-to-VM mapping.
//!
//! - [`api`]: request and response documents and the pure [`api::handle_map`].
//! - [`http`]: axum routes `POST /map` and `GET /health`.
//! - [`descriptor`]: the deployment descriptor validated at startup.

pub mod api;
pub mod descriptor;
pub mod http;

pub use api::{
    handle_map, parse_request, DecisionPolicy, MappedPair, MappingRequest, MappingResponse, MappingStatus, ServiceContext,
    ServiceError, VmInventoryDocument, VnfcDocument,
};
pub use descriptor::ServiceDescriptor;
pub use http::{router, serve};
