pub mod error;
pub mod kernel;
pub mod matrix;
pub mod spectral;
pub mod bandwidth;
pub mod connectivity;
pub mod features;
pub mod vad;
pub mod cli;
pub mod manifest;
