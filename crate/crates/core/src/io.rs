//! File formats.
//!
//! Sample files start with one line of JSON describing the buffer, followed
//! by `n_samples` little-endian `f64` values.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::demod::DemodReport;
use crate::error::{Error, Result};
use crate::modem_tx::{Constellation, Waveform, WaveformMeta};
use crate::phase_stats::{PhaseDensity, PhaseHistogram};
use crate::rectifier::BasebandSignal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleHeader {
    pub kind: SampleKind,
    pub sample_rate_hz: f64,
    pub period_s: f64,
    pub n_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0_ohm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<WaveformMeta>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Waveform,
    Baseband,
}

fn write_samples<W: Write>(mut out: W, header: &SampleHeader, samples: &[f64]) -> Result<()> {
    serde_json::to_writer(&mut out, header)?;
    out.write_all(b"\n")?;
    for v in samples {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn read_samples<R: Read>(input: R) -> Result<(SampleHeader, Vec<f64>)> {
    let mut r = BufReader::new(input);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: SampleHeader = serde_json::from_str(line.trim_end())?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != header.n_samples * 8 {
        return Err(Error::LengthMismatch {
            expected: header.n_samples * 8,
            actual: bytes.len(),
        });
    }
    let samples = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok((header, samples))
}

pub fn write_waveform<W: Write>(out: W, w: &Waveform) -> Result<()> {
    let header = SampleHeader {
        kind: SampleKind::Waveform,
        sample_rate_hz: w.sample_rate_hz,
        period_s: w.period_s,
        n_samples: w.samples.len(),
        z0_ohm: Some(w.z0_ohm),
        meta: w.meta.clone(),
    };
    write_samples(out, &header, &w.samples)
}

pub fn read_waveform<R: Read>(input: R) -> Result<Waveform> {
    let (h, samples) = read_samples(input)?;
    if h.kind != SampleKind::Waveform {
        return Err(Error::invalid("file holds a baseband signal, not a waveform"));
    }
    Ok(Waveform {
        samples,
        sample_rate_hz: h.sample_rate_hz,
        period_s: h.period_s,
        z0_ohm: h.z0_ohm.ok_or_else(|| Error::invalid("waveform header lacks z0_ohm"))?,
        meta: h.meta,
    })
}

pub fn write_baseband<W: Write>(out: W, b: &BasebandSignal) -> Result<()> {
    let header = SampleHeader {
        kind: SampleKind::Baseband,
        sample_rate_hz: b.sample_rate_hz,
        period_s: b.period_s,
        n_samples: b.samples.len(),
        z0_ohm: None,
        meta: None,
    };
    write_samples(out, &header, &b.samples)
}

pub fn read_baseband<R: Read>(input: R) -> Result<BasebandSignal> {
    let (h, samples) = read_samples(input)?;
    if h.kind != SampleKind::Baseband {
        return Err(Error::invalid("file holds a waveform, not a baseband signal"));
    }
    let dc = samples.iter().sum::<f64>() / samples.len().max(1) as f64;
    Ok(BasebandSignal {
        samples,
        sample_rate_hz: h.sample_rate_hz,
        period_s: h.period_s,
        dc,
    })
}

fn csv_err(e: csv::Error) -> Error {
    // keep the io kind (broken pipe and friends) visible to callers
    if e.is_io_error() {
        if let csv::ErrorKind::Io(io) = e.into_kind() {
            return Error::Io(io);
        }
        unreachable!()
    }
    Error::Io(std::io::Error::other(e))
}

/// `phase_deg,density` rows.
pub fn write_density_csv<W: Write>(out: W, d: &PhaseDensity) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["phase_deg", "density"]).map_err(csv_err)?;
    for (x, p) in d.grid_deg.iter().zip(&d.density) {
        w.write_record([x.to_string(), p.to_string()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `bin_lo_deg,bin_hi_deg,count,frequency,analytic` rows; the analytic column
/// is left empty when no probabilities are given.
pub fn write_histogram_csv<W: Write>(out: W, h: &PhaseHistogram, analytic: Option<&[f64]>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_lo_deg", "bin_hi_deg", "count", "frequency", "analytic"])
        .map_err(csv_err)?;
    for (i, (c, f)) in h.counts.iter().zip(h.frequencies()).enumerate() {
        let hi = crate::phase_stats::bin_upper_edge(i);
        let lo = hi - crate::phase_stats::HISTOGRAM_BIN_DEG;
        let a = analytic.map(|a| a[i].to_string()).unwrap_or_default();
        w.write_record([lo.to_string(), hi.to_string(), c.to_string(), f.to_string(), a])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Constellation scatter: one row per symbol position with the transmitted
/// and extracted phases.
pub fn write_scatter_csv<W: Write>(out: W, tx_symbols: &[usize], d: &DemodReport, c: &Constellation) -> Result<()> {
    if tx_symbols.len() != d.extracted_phases.len() {
        return Err(Error::LengthMismatch {
            expected: d.extracted_phases.len(),
            actual: tx_symbols.len(),
        });
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "position",
        "true_phase_deg",
        "extracted_phase_deg",
        "decided_phase_deg",
        "erased",
        "out_of_margin",
    ])
    .map_err(csv_err)?;
    for (i, &s) in tx_symbols.iter().enumerate() {
        w.write_record([
            i.to_string(),
            c.phase_deg(s).to_string(),
            d.extracted_phases[i].to_string(),
            c.phase_deg(d.decided_symbols[i]).to_string(),
            d.erased[i].to_string(),
            d.out_of_margin[i].to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
