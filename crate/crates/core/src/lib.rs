//! Cross-team collusion detection for team-based match telemetry.
//!
//! The pipeline reads match logs ([`ingest`]), computes pairwise behavioral
//! features for every pair of opponents ([`features`]), builds the players'
//! social graph ([`graph`]) and ranks opponent pairs with an isolation forest
//! ([`iforest`], [`detect`]). A small HTTP service ([`service`]) exposes the
//! ranked queue to reviewers and persists their verdicts. [`simulate`]
//! generates synthetic datasets with planted colluders for evaluation.

pub mod cli;
pub mod detect;
pub mod features;
pub mod graph;
pub mod iforest;
pub mod ingest;
pub mod model;
pub mod probability;
pub mod service;
pub mod simulate;
