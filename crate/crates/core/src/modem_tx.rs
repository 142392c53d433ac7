//! Transmit side: symbol constellation, gray mapping, cumulative tone phases
//! and passband synthesis.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::angle::{dbm_to_watts, wrap_deg};
use crate::error::{Error, Result};
use crate::freqplan::FrequencyPlan;

pub const DEFAULT_Z0_OHM: f64 = 50.0;

pub fn gray(m: u32) -> u32 {
    m ^ (m >> 1)
}

pub fn gray_inverse(mut g: u32) -> u32 {
    let mut m = g;
    while g > 1 {
        g >>= 1;
        m ^= g;
    }
    m
}

/// `M` equidistant phases spread symmetrically over `[-delta/2, delta/2]`,
/// labelled with the binary-reflected gray code in ascending phase order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    m_order: usize,
    delta_deg: f64,
    phases_deg: Vec<f64>,
    labels: Vec<u32>,
}

pub fn build_constellation(m_order: usize, delta_deg: f64) -> Result<Constellation> {
    if m_order < 2 || !m_order.is_power_of_two() {
        return Err(Error::config(format!("modulation order must be a power of two >= 2, got {m_order}")));
    }
    if !(delta_deg > 0.0 && delta_deg <= 360.0) {
        return Err(Error::config(format!("phase range must lie in (0, 360] degrees, got {delta_deg}")));
    }
    let m = m_order as f64;
    let phases_deg = (0..m_order)
        .map(|i| (2.0 * (i as f64 + 1.0) - m - 1.0) * delta_deg / (2.0 * m))
        .collect();
    let labels = (0..m_order as u32).map(gray).collect();
    Ok(Constellation {
        m_order,
        delta_deg,
        phases_deg,
        labels,
    })
}

impl Constellation {
    pub fn m_order(&self) -> usize {
        self.m_order
    }

    pub fn delta_deg(&self) -> f64 {
        self.delta_deg
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.m_order.trailing_zeros() as usize
    }

    /// Symbol phases in ascending order.
    pub fn phases_deg(&self) -> &[f64] {
        &self.phases_deg
    }

    pub fn phase_deg(&self, index: usize) -> f64 {
        self.phases_deg[index]
    }

    /// Half-width of each decision region, `delta / (2M)`.
    pub fn margin_deg(&self) -> f64 {
        self.delta_deg / (2.0 * self.m_order as f64)
    }

    pub fn label(&self, index: usize) -> u32 {
        self.labels[index]
    }

    /// Label of symbol `index` as bits, most significant first.
    pub fn label_bits(&self, index: usize) -> Vec<bool> {
        let b = self.bits_per_symbol();
        let v = self.labels[index];
        (0..b).rev().map(|i| (v >> i) & 1 == 1).collect()
    }

    pub fn label_string(&self, index: usize) -> String {
        self.label_bits(index).iter().map(|&b| if b { '1' } else { '0' }).collect()
    }

    /// Index whose label equals `value`.
    pub fn index_of_label(&self, value: u32) -> usize {
        gray_inverse(value) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolStream {
    pub symbols: Vec<usize>,
    pub source_bits: Vec<bool>,
}

/// Splits `bits` into `log2 M`-bit groups (MSB first) and maps each group to
/// the constellation point carrying that label.
pub fn encode_bits(bits: &[bool], c: &Constellation, n_tones: usize) -> Result<SymbolStream> {
    let b = c.bits_per_symbol();
    let expected = n_tones.saturating_sub(1) * b;
    if bits.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: bits.len(),
        });
    }
    let symbols = bits
        .chunks(b)
        .map(|group| {
            let v = group.iter().fold(0u32, |acc, &bit| (acc << 1) | bit as u32);
            c.index_of_label(v)
        })
        .collect();
    Ok(SymbolStream {
        symbols,
        source_bits: bits.to_vec(),
    })
}

/// Tone phases in degrees, each wrapped into (-180, 180].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhaseVector(pub Vec<f64>);

impl PhaseVector {
    pub fn aligned(n_tones: usize) -> Self {
        PhaseVector(vec![0.0; n_tones])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Adds the same offset to every tone.
    pub fn rotated(&self, offset_deg: f64) -> Self {
        PhaseVector(self.0.iter().map(|p| wrap_deg(p + offset_deg)).collect())
    }
}

/// Accumulates symbol phases into tone phases: the first tone sits at 0 and
/// each following tone advances by the phase of the next symbol.
pub fn phases_from_symbols(s: &SymbolStream, c: &Constellation) -> PhaseVector {
    let steps: Vec<f64> = s.symbols.iter().map(|&i| c.phase_deg(i)).collect();
    cumulative_phases(&steps)
}

pub fn cumulative_phases(step_phases_deg: &[f64]) -> PhaseVector {
    let mut out = Vec::with_capacity(step_phases_deg.len() + 1);
    let mut acc = 0.0;
    out.push(acc);
    for p in step_phases_deg {
        acc = wrap_deg(acc + p);
        out.push(acc);
    }
    PhaseVector(out)
}

/// Provenance of a synthesized waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformMeta {
    pub plan: FrequencyPlan,
    pub phases: PhaseVector,
    /// Per-tone voltage amplitude.
    pub amplitude_v: f64,
    pub p_in_dbm: f64,
}

/// Real passband voltage samples across `z0_ohm`.
///
/// The buffer always holds one full repetition of the signal, which is one
/// or two `period_s` long (see [`FrequencyPlan::repetition_periods`]), so it
/// can be treated as periodic.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
    pub period_s: f64,
    pub z0_ohm: f64,
    pub meta: Option<WaveformMeta>,
}

impl Waveform {
    pub fn samples_per_period(&self) -> usize {
        (self.sample_rate_hz * self.period_s).round() as usize
    }

    pub fn periods(&self) -> usize {
        self.samples.len() / self.samples_per_period().max(1)
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn mean_square(&self) -> f64 {
        self.samples.iter().map(|v| v * v).sum::<f64>() / self.samples.len() as f64
    }

    pub fn average_power_w(&self) -> f64 {
        self.mean_square() / self.z0_ohm
    }

    /// Scales every sample by a voltage gain; metadata follows.
    pub fn scaled(&self, gain: f64) -> Waveform {
        let mut w = self.clone();
        for s in &mut w.samples {
            *s *= gain;
        }
        if let Some(m) = &mut w.meta {
            m.amplitude_v *= gain;
            m.p_in_dbm += 20.0 * gain.abs().log10();
        }
        w
    }
}

/// Smallest `P * gcd` with `P` a power of two and `P * gcd >= 4 (f_c + bw/2)`.
pub fn default_sample_rate(plan: &FrequencyPlan) -> f64 {
    let need = 4.0 * plan.highest_tone_hz();
    let gcd = plan.gcd_hz() as f64;
    let mut p: u64 = 1;
    while (p as f64) * gcd < need {
        p *= 2;
    }
    p as f64 * gcd
}

/// Per-tone amplitude for a total average power `p_in_dbm` across `z0_ohm`.
pub fn tone_amplitude(p_in_dbm: f64, n_tones: usize, z0_ohm: f64) -> f64 {
    (2.0 * z0_ohm * dbm_to_watts(p_in_dbm) / n_tones as f64).sqrt()
}

pub(crate) fn samples_per_period(plan: &FrequencyPlan, sample_rate_hz: f64) -> Result<usize> {
    let spp = sample_rate_hz / plan.gcd_hz() as f64;
    let r = spp.round();
    if r < 1.0 || (spp - r).abs() > 1e-9 * r {
        return Err(Error::Sampling(format!(
            "sample rate {sample_rate_hz} Hz is not an integer multiple of the grid step {} Hz",
            plan.gcd_hz()
        )));
    }
    let need = 4.0 * plan.highest_tone_hz();
    if sample_rate_hz < need {
        return Err(Error::Sampling(format!(
            "sample rate {sample_rate_hz} Hz is below 4 x highest tone ({need} Hz)"
        )));
    }
    Ok(r as usize)
}

/// Equal-amplitude multitone `x(t) = sum A cos(2 pi f_n t + phi_n)`.
pub fn synthesize(
    plan: &FrequencyPlan,
    phases: &PhaseVector,
    p_in_dbm: f64,
    sample_rate_hz: f64,
    z0_ohm: f64,
) -> Result<Waveform> {
    if phases.len() != plan.n_tones() {
        return Err(Error::LengthMismatch {
            expected: plan.n_tones(),
            actual: phases.len(),
        });
    }
    if !p_in_dbm.is_finite() || !(z0_ohm > 0.0) {
        return Err(Error::invalid("input power must be finite and impedance positive"));
    }
    let spp = samples_per_period(plan, sample_rate_hz)?;
    let len = spp * plan.repetition_periods();
    let amplitude = tone_amplitude(p_in_dbm, plan.n_tones(), z0_ohm);

    // Tone n advances h_n / (2 spp) cycles per sample, h_n in half grid units.
    // Reducing the product modulo 2 spp keeps the argument exact.
    let table_len = 2 * spp as u64;
    let (cos_t, sin_t): (Vec<f64>, Vec<f64>) = (0..table_len)
        .map(|j| {
            let a = 2.0 * PI * j as f64 / table_len as f64;
            (a.cos(), a.sin())
        })
        .unzip();

    let mut samples = vec![0.0; len];
    for (&h, &phi) in plan.tones_half_units().iter().zip(phases.as_slice()) {
        let (sp, cp) = phi.to_radians().sin_cos();
        let h = h % table_len;
        let mut j = 0u64;
        for s in samples.iter_mut() {
            *s += amplitude * (cos_t[j as usize] * cp - sin_t[j as usize] * sp);
            j += h;
            if j >= table_len {
                j -= table_len;
            }
        }
    }

    Ok(Waveform {
        samples,
        sample_rate_hz,
        period_s: plan.period_s(),
        z0_ohm,
        meta: Some(WaveformMeta {
            plan: plan.clone(),
            phases: phases.clone(),
            amplitude_v: amplitude,
            p_in_dbm,
        }),
    })
}

/// Peak instantaneous power over the average power, from the samples.
pub fn papr(w: &Waveform) -> Result<f64> {
    if w.samples_per_period() == 0 || w.samples.len() < w.samples_per_period() {
        return Err(Error::invalid("waveform shorter than one period"));
    }
    let mean = w.mean_square();
    if !(mean > 0.0) {
        return Err(Error::invalid("waveform has zero average power"));
    }
    let peak = w.samples.iter().fold(0.0f64, |m, v| m.max(v * v));
    Ok(peak / mean)
}
