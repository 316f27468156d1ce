//! Benchmark toolkit for pricing European options with Black-Scholes,
//! gradient-boosted regression trees and feed-forward networks.

pub mod blackscholes;
pub mod dataset;
pub mod eval;
pub mod gbdt;
pub mod ingest;
pub mod mlp;
pub mod simgen;
