//! Grid-sampled sets, distance transforms, perimeter estimation, and the
//! covering-family property checks.

pub mod grid;
pub mod perimeter;
pub mod properties;
