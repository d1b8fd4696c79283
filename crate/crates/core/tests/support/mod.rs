//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

pub mod hier;
pub mod layers;
pub mod metrics;
