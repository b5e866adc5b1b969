pub mod classify;
pub mod filter;
pub mod gateway;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod reflect;
pub mod routing;
pub mod stats;
pub mod store;
pub mod summarize;
