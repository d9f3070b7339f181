pub mod bls;
pub mod cli;
pub mod data;
pub mod error;
pub mod frontend;
pub mod hypersearch;
pub mod linalg;
pub mod persist;
pub mod pipeline;
pub mod rng;
pub mod synth;
