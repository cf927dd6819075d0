//! Adversarial FIR filtering for modulation-classification secrecy.
//!
//! A transmitter (Alice) masks the modulation format of her signal from an
//! eavesdropping classifier (Eve) while a keyed receiver (Bob) undoes the
//! mask and classifies correctly. Attacks are either additive
//! perturbations (FGM, FGSM and their PCA-aggregated universal forms) or
//! FIR filters (gradient ascent filters with three creation functions, and
//! the closed-form fast gradient filter method). Filter attacks preserve
//! transmit power and are reversed at Bob by stable IIR inverse filtering
//! when the filter is minimum phase.
//!
//! The crate ships a CLI (`advfilt`) that generates synthetic modulated
//! datasets, trains a small convolutional classifier, crafts attacks, and
//! sweeps transmit power over an attenuation+AWGN channel, emitting CSV
//! accuracy tables for Eve and Bob.

pub mod attacks;
pub mod classifier;
pub mod config;
pub mod dsp;
pub mod error;
pub mod gradcheck;
pub mod harness;
pub mod link;
pub mod modgen;
pub mod seed;

pub use error::{Error, Result};
