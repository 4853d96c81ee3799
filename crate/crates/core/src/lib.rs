//! Measuring how the MLP neurons of a decoder-only transformer react to
//! OCR-style character noise, and what happens to a downstream
//! token-classification task when the most reactive neurons are damped.
//!
//! The crate is organised as a pipeline:
//!
//! - [`nn`] and [`rng`]: dense 64-bit kernels and labeled, seed-stable randomness.
//! - [`noise`]: corpus ingestion and Levenshtein-banded token corruption.
//! - [`model`]: a small pre-norm decoder with a gated SiLU MLP, activation
//!   capture, multiplicative neuron masks and a trainable classification head.
//! - [`analysis`]: linear CKA layer profiles and per-neuron difference statistics.
//! - [`sweep`]: a synthetic noisy NER task, baselines, and
//!   (layer × bin × α) neutralisation sweeps.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iteration otherwise.
//! Results never depend on the worker count.

pub mod analysis;
pub mod error;
pub mod model;
pub mod nn;
pub mod noise;
pub mod par;
pub mod rng;
pub mod sweep;

pub use error::{Error, Result};
