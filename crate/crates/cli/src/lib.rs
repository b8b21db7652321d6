//! Study drivers shared by the `flexenv` binary and its tests.

pub mod sweep;
