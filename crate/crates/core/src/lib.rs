//! Career-vault resume tailoring engine.

pub mod ats;
pub mod config;
pub mod engine;
pub mod experiment;
pub mod gateway;
pub mod generation;
pub mod ingest;
pub mod jd;
pub mod matcher;
pub mod pipeline;
pub mod runstore;
pub mod service;
pub mod vault;
