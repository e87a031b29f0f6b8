//! Learning spatial and temporal aggregations of planning networks.
//!
//! The pipeline: build a Gaussian affinity graph over heterogeneous nodes
//! ([`graph`]), assemble block-diagonal per-period feature matrices
//! ([`features`]), train a graph-convolutional autoencoder with min-cut
//! pooling ([`autoencoder`]) on a small reverse-mode tape ([`tensor`]),
//! then read off node groupings and representative periods ([`aggregate`]).

pub mod aggregate;
pub mod autoencoder;
pub mod features;
pub mod gradcheck;
pub mod graph;
pub mod matrix;
pub mod tensor;
