//! Multitone PSK simulator for integrated-receiver SWIPT links.
//!
//! The pipeline runs plan -> constellation -> waveform -> rectifier ->
//! demodulator, with a harness on top for trials and parameter sweeps.

pub mod angle;
pub mod config;
pub mod demod;
pub mod harness;
pub mod error;
pub mod freqplan;
pub mod io;
pub mod modem_tx;
pub mod phase_stats;
pub mod rectifier;
pub mod spectrum;

pub use error::{Error, Result};
pub use freqplan::{plan_frequencies, FrequencyPlan};
pub use modem_tx::{build_constellation, synthesize, Constellation, PhaseVector, Waveform};
pub use rectifier::{rectify, BasebandSignal, RectifierConfig, RectifierModel};
pub use harness::{run_trial, sweep, SweepAxes, SweepReport, TrialConfig, TrialReport};
