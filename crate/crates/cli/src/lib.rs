//! Command line pipeline and HTTP session service.
//!
//! The `imt` binary trains engines, modernizes files, runs the simulated
//! user and evaluation reports, and serves interactive sessions over a
//! JSON API.

pub mod cli;
pub mod registry;
pub mod server;
pub mod store;

pub use cli::{run, run_with};
pub use registry::{Engine, EngineKind, EngineRegistry};
pub use server::{router, AppState};
pub use store::SessionStore;
