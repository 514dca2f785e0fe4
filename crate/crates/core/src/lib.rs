//! Context-aware image retrieval over personal photo histories.
//!
//! The crate provides a tool-using retrieval agent (search, metadata
//! filtering, visual inspection, web search, memory compression) together
//! with the benchmark machinery around it: a memory-graph pipeline for
//! synthesizing queries, and set- and ranking-level evaluation.

pub mod agent;
pub mod chat;
pub mod client;
pub mod corpus;
pub mod evalkit;
pub mod filterdsl;
pub mod geocode;
pub mod memgraph;
pub mod memory;
pub mod synth;
pub mod toolkit;
pub mod vecindex;
