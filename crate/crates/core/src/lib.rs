//! Debiased matrix factorization for recommender feedback logs: data
//! handling, MF/IPS/DR/meta-weighted trainers, metrics and a benchmark
//! harness.

pub mod data;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod metrics;
pub mod models;
pub mod rng;

pub use error::{Error, Result};
