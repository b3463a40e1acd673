//! Toolkit for triple-active-bridge (TAB) multiport DC-DC converters.
//!
//! - [`modulation`]: square PWM, sinusoidal PWM and bridge gate schedules.
//! - [`transformer`]: three-winding transformer as a delta of link inductances.
//! - [`powerflow`]: analytic phase-shift power flow, its inverse and a dispatch solver.
//! - [`simulator`]: fixed-step switched-circuit simulation of full- and half-bridge TABs.
//! - [`analysis`]: single-bin DFT, THD, ripple and line fits.
//! - [`config`]: the converter configuration file and the built-in presets.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod error;
pub mod modulation;
pub mod powerflow;
pub mod reference;
pub mod simulator;
pub mod transformer;

pub use error::{Error, Result};
