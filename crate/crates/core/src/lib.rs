//! Simulation and parameter estimation for optical spin readout of NV centers
//! coupled to a photonic-crystal cavity.
//!
//! * [`levels`] propagates the five-level rate model and produces spin-dependent
//!   fluorescence traces and contrasts.
//! * [`fitkit`] is a damped Gauss-Newton fitter with the curve models used to
//!   reduce spectra, Rabi, ODMR, lifetime, saturation and fluorescence data.
//! * [`cavity`], [`collection`] and [`snr`] turn fitted numbers into Purcell
//!   factors, collection efficiencies and the readout SNR enhancement.
//! * [`shell`] holds file formats, configuration, reports and the pipelines
//!   behind the `nvreadout` command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cavity;
pub mod collection;
pub mod error;
pub mod fitkit;
pub mod levels;
pub mod series;
pub mod shell;
pub mod snr;

pub use error::{Error, Result};
pub use series::{AbscissaUnit, Spectrum, TimeTrace};
