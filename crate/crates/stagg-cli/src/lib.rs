//! Library surface of the pipeline binary: configuration, stage
//! implementations, and the synthetic-instance generator. The `stagg`
//! binary is a thin wrapper over these modules.

pub mod config;
pub mod pipeline;
pub mod synth;
