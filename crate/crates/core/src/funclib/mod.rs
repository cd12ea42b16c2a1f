//! Sampled continuous functions, oscillation estimates and generators.

pub mod generators;
pub mod oscillation;
pub mod sampled;

pub use generators::{make_test_function, TestFunction};
pub use oscillation::{lip_field, oscillation, scaled_osc_estimate, LipField, OscMode, OscillationRecord};
pub use sampled::{Modulus, SampledFunction};
