//! Receive side: reads the beat-note phases out of the rectified baseband,
//! maps them back to symbols and bits, and scores the result.

use serde::{Deserialize, Serialize};

use crate::angle::{angular_distance_deg, wrap_deg};
use crate::error::{Error, Result};
use crate::freqplan::FrequencyPlan;
use crate::modem_tx::Constellation;
use crate::rectifier::BasebandSignal;
use crate::spectrum;

pub const DEFAULT_AMPLITUDE_FLOOR_V: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractOptions {
    /// Bins with a smaller tone amplitude are flagged as erasures.
    pub amplitude_floor_v: f64,
    /// Deliberate delay of the analysis window relative to the waveform
    /// period origin. Zero is the synchronised receiver.
    pub window_offset_s: f64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            amplitude_floor_v: DEFAULT_AMPLITUDE_FLOOR_V,
            window_offset_s: 0.0,
        }
    }
}

/// Phase and amplitude of each neighbouring-pair beat note, in plan order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneReadout {
    pub phases_deg: Vec<f64>,
    pub amplitudes_v: Vec<f64>,
    pub erased: Vec<bool>,
}

/// Reads the cosine phase of the baseband at every consecutive spacing
/// `k_n * gcd` from a transform of the whole buffer.
pub fn extract_tone_phases(b: &BasebandSignal, plan: &FrequencyPlan, opts: &ExtractOptions) -> Result<ToneReadout> {
    let len = b.samples.len();
    let spec = spectrum::forward(&b.samples);
    let mut out = ToneReadout {
        phases_deg: Vec::with_capacity(plan.spacings().len()),
        amplitudes_v: Vec::with_capacity(plan.spacings().len()),
        erased: Vec::with_capacity(plan.spacings().len()),
    };
    for f in plan.spacings_hz() {
        let f = f as f64;
        let k = spectrum::exact_bin(f, len, b.sample_rate_hz).ok_or_else(|| {
            Error::Sampling(format!("{f} Hz does not fall on a bin of the {len}-sample baseband"))
        })?;
        let c = spec[k];
        let amplitude = 2.0 * c.norm() / len as f64;
        let phase = c.arg().to_degrees() + 360.0 * f * opts.window_offset_s;
        out.phases_deg.push(wrap_deg(phase));
        out.amplitudes_v.push(amplitude);
        out.erased.push(!(amplitude >= opts.amplitude_floor_v));
    }
    Ok(out)
}

/// Index of the constellation point at the smallest wrapped distance; ties go
/// to the lower index.
pub fn nearest_symbol(phase_deg: f64, c: &Constellation) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, &p) in c.phases_deg().iter().enumerate() {
        let d = angular_distance_deg(phase_deg, p);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Lowest index whose `+/- delta/2M` margin contains the phase, if any.
pub fn margin_symbol(phase_deg: f64, c: &Constellation) -> Option<usize> {
    let margin = c.margin_deg() * (1.0 + 1e-12);
    c.phases_deg()
        .iter()
        .position(|&p| angular_distance_deg(phase_deg, p) <= margin)
}

pub fn decide_symbols(phases_deg: &[f64], c: &Constellation) -> Vec<usize> {
    phases_deg.iter().map(|&p| nearest_symbol(p, c)).collect()
}

pub fn decode_bits(symbols: &[usize], c: &Constellation) -> Vec<bool> {
    symbols.iter().flat_map(|&s| c.label_bits(s)).collect()
}

pub fn bit_errors(tx: &[bool], rx: &[bool]) -> Result<usize> {
    if tx.len() != rx.len() {
        return Err(Error::LengthMismatch {
            expected: tx.len(),
            actual: rx.len(),
        });
    }
    Ok(tx.iter().zip(rx).filter(|(a, b)| a != b).count())
}

/// Fraction of differing bits.
pub fn ber(tx: &[bool], rx: &[bool]) -> Result<f64> {
    let e = bit_errors(tx, rx)?;
    if tx.is_empty() {
        return Ok(0.0);
    }
    Ok(e as f64 / tx.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemodReport {
    pub extracted_phases: Vec<f64>,
    pub amplitudes_v: Vec<f64>,
    pub decided_symbols: Vec<usize>,
    pub bits: Vec<bool>,
    /// Extracted phase minus the decided constellation phase (wrapped).
    pub per_symbol_phase_error: Vec<f64>,
    /// Positions whose phase lies outside every decision margin.
    pub out_of_margin: Vec<bool>,
    pub erased: Vec<bool>,
}

impl DemodReport {
    pub fn erasures(&self) -> usize {
        self.erased.iter().filter(|&&e| e).count()
    }

    pub fn out_of_margin_count(&self) -> usize {
        self.out_of_margin.iter().filter(|&&e| e).count()
    }

    /// Bit errors with nearest-point decisions; erased positions decode to
    /// symbol 0 and are scored like any other decision.
    pub fn bit_errors(&self, tx_bits: &[bool]) -> Result<usize> {
        bit_errors(tx_bits, &self.bits)
    }

    /// Bit errors when every bit of an erased or out-of-margin symbol is
    /// counted as wrong.
    pub fn strict_bit_errors(&self, tx_bits: &[bool], bits_per_symbol: usize) -> Result<usize> {
        if tx_bits.len() != self.bits.len() {
            return Err(Error::LengthMismatch {
                expected: self.bits.len(),
                actual: tx_bits.len(),
            });
        }
        let mut errors = 0;
        for (i, (tx, rx)) in tx_bits
            .chunks(bits_per_symbol)
            .zip(self.bits.chunks(bits_per_symbol))
            .enumerate()
        {
            if self.out_of_margin[i] || self.erased[i] {
                errors += bits_per_symbol;
            } else {
                errors += tx.iter().zip(rx).filter(|(a, b)| a != b).count();
            }
        }
        Ok(errors)
    }
}

/// Full receive chain for one baseband buffer.
pub fn demodulate(
    b: &BasebandSignal,
    plan: &FrequencyPlan,
    c: &Constellation,
    opts: &ExtractOptions,
) -> Result<DemodReport> {
    let readout = extract_tone_phases(b, plan, opts)?;
    let decided_symbols: Vec<usize> = readout
        .phases_deg
        .iter()
        .zip(&readout.erased)
        .map(|(&p, &erased)| if erased { 0 } else { nearest_symbol(p, c) })
        .collect();
    let per_symbol_phase_error = readout
        .phases_deg
        .iter()
        .zip(&decided_symbols)
        .map(|(&p, &s)| wrap_deg(p - c.phase_deg(s)))
        .collect();
    let out_of_margin = readout
        .phases_deg
        .iter()
        .map(|&p| margin_symbol(p, c).is_none())
        .collect();
    Ok(DemodReport {
        bits: decode_bits(&decided_symbols, c),
        extracted_phases: readout.phases_deg,
        amplitudes_v: readout.amplitudes_v,
        decided_symbols,
        per_symbol_phase_error,
        out_of_margin,
        erased: readout.erased,
    })
}
