//! RaptorQ block codec with per-class precode sizes, an erasure-channel
//! simulator and full-rank probability analysis.

pub mod chansim;
pub mod cli;
pub mod codec;
pub mod codeparams;
pub mod fieldmath;
pub mod interop;
pub mod matrixgen;
pub mod output;
pub mod rankanalysis;
mod tables;
