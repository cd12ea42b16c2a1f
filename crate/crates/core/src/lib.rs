pub mod construct;
pub mod error;
pub mod gauges;
pub mod funclib;
pub mod partition;
pub mod setlib;

pub use error::{Error, Result};
pub use gauges::{Gauge, GaugeKind, Pseudogauge, ScaleFn};
