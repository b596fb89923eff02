//! Noun-compound relation classification from dependency paths and
//! distributional vectors.

pub mod classify;
pub mod corpus;
pub mod dataset;
pub mod embed;
pub mod evalx;
pub mod manifest;
pub mod neural;
pub mod pathenc;
pub mod synthetic;
pub mod training;
