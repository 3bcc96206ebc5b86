//! Numerical core for turning irregularly sampled cardiorespiratory series
//! into CWT scalogram tensors and classifying them with a small CNN.
//!
//! Everything here is a pure function of its inputs and needs only `alloc`;
//! file formats, the pipeline driver and the CLI live in the `weanscope`
//! crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cwt;
pub mod error;
pub mod eval;
pub mod fft;
pub mod hpo;
pub mod imaging;
pub mod nn;
pub mod occlusion;
pub mod resample;
pub mod rng;
pub mod series;
pub mod synth;

pub use error::{Error, Result};
