//! End-to-end trials and parameter sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angle::{db_to_linear_power, dbm_to_watts, linear_power_to_db};
use crate::demod::{demodulate, DemodReport, ExtractOptions};
use crate::error::{Error, Result};
use crate::freqplan::{plan_frequencies, FrequencyPlan};
use crate::modem_tx::{
    build_constellation, default_sample_rate, encode_bits, papr, phases_from_symbols, synthesize, Constellation,
    PhaseVector, Waveform, DEFAULT_Z0_OHM,
};
use crate::rectifier::{pce, rectify, RectifierConfig, RectifierModel};
use crate::spectrum;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Impairments {
    /// Path loss applied between transmitter and rectifier (dB).
    #[serde(default)]
    pub attenuation_db: f64,
    /// In-band SNR at the rectifier input; no noise when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub awgn_snr_db: Option<f64>,
    /// Deliberate delay of the receiver's analysis window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_offset_s: Option<f64>,
}

/// One experiment scenario. `delta_deg = 0` selects the aligned reference
/// waveform (all tone phases zero, nothing to demodulate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    pub f_c_hz: u64,
    pub n_tones: usize,
    pub gcd_hz: u64,
    /// Spreading factor of the frequency plan.
    pub r: u32,
    pub m_order: usize,
    pub delta_deg: f64,
    /// Transmitted power, before any attenuation.
    pub p_in_dbm: f64,
    pub z0_ohm: f64,
    /// Defaults to the smallest power-of-two multiple of the plan GCD that
    /// keeps four samples per cycle of the highest tone.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_rate_hz: Option<f64>,
    pub rectifier: RectifierConfig,
    pub impairments: Impairments,
    pub streams: usize,
    pub seed: u64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            f_c_hz: 2_450_000_000,
            n_tones: 6,
            gcd_hz: 1_000_000,
            r: 0,
            m_order: 4,
            delta_deg: 360.0,
            p_in_dbm: -10.0,
            z0_ohm: DEFAULT_Z0_OHM,
            sample_rate_hz: None,
            rectifier: RectifierConfig::square_law(),
            impairments: Impairments::default(),
            streams: 100,
            seed: 0,
        }
    }
}

impl TrialConfig {
    pub fn is_aligned(&self) -> bool {
        self.delta_deg == 0.0
    }

    pub fn bits_per_stream(&self) -> usize {
        self.n_tones.saturating_sub(1) * self.m_order.max(1).trailing_zeros() as usize
    }

    /// Input power at the rectifier after attenuation.
    pub fn received_dbm(&self) -> f64 {
        self.p_in_dbm - self.impairments.attenuation_db
    }

    pub fn validate(&self) -> Result<()> {
        if self.streams == 0 {
            return Err(Error::config("streams must be at least 1"));
        }
        if !self.p_in_dbm.is_finite() {
            return Err(Error::config("p_in_dbm must be finite"));
        }
        if !(self.z0_ohm > 0.0) {
            return Err(Error::config("z0_ohm must be positive"));
        }
        let imp = &self.impairments;
        if !(imp.attenuation_db >= 0.0) || !imp.attenuation_db.is_finite() {
            return Err(Error::config("attenuation_db must be finite and >= 0"));
        }
        if imp.awgn_snr_db.is_some_and(|s| !s.is_finite()) {
            return Err(Error::config("awgn_snr_db must be finite"));
        }
        if imp.timing_offset_s.is_some_and(|s| !s.is_finite()) {
            return Err(Error::config("timing_offset_s must be finite"));
        }
        if !(0.0..=360.0).contains(&self.delta_deg) {
            return Err(Error::config("delta_deg must lie in [0, 360]"));
        }
        self.rectifier.validate()
    }
}

/// Everything produced by one stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub stream_index: u64,
    pub bits: Vec<bool>,
    pub phases: PhaseVector,
    pub papr: f64,
    pub papr_db: f64,
    /// Rectifier input power after attenuation.
    pub p_rx_dbm: f64,
    pub dc_v: f64,
    pub pce_pct: f64,
    /// `None` for the aligned reference, which carries no data.
    pub ber: Option<f64>,
    /// Counts every out-of-margin or erased symbol as all bits wrong.
    pub ber_strict: Option<f64>,
    pub bit_errors: usize,
    pub strict_bit_errors: usize,
    pub erasures: usize,
    pub demod: Option<DemodReport>,
}

/// Counter-based stream RNG: the root seed picks the key and the stream
/// index picks the ChaCha stream, so results do not depend on scheduling.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn random_bits(rng: &mut impl Rng, count: usize) -> Vec<bool> {
    (0..count).map(|_| rng.gen::<bool>()).collect()
}

/// Number of transform bins from the lowest to the highest tone inclusive.
fn in_band_bins(w: &Waveform, plan: &FrequencyPlan) -> usize {
    plan.bw_units() as usize * plan.repetition_periods().max(w.periods()) + 1
}

/// Adds Gaussian noise confined to the signal band `[f_1, f_N]`, with power
/// `snr_db` below the waveform's average power. The noise is drawn white and
/// then band-passed, as a front-end filter would; out-of-band noise would
/// otherwise reach the rectifier and swamp its DC output.
pub fn add_awgn_with(w: &Waveform, snr_db: f64, rng: &mut impl Rng) -> Result<Waveform> {
    let plan = w
        .meta
        .as_ref()
        .map(|m| m.plan.clone())
        .ok_or_else(|| Error::invalid("waveform carries no plan, signal band unknown"))?;
    let len = w.samples.len() as f64;
    let nbins = in_band_bins(w, &plan) as f64;
    let noise_ms = w.mean_square() / db_to_linear_power(snr_db);
    let sigma = (noise_ms * len / (2.0 * nbins)).sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let white: Vec<f64> = (0..w.samples.len()).map(|_| normal.sample(rng)).collect();
    let noise = spectrum::band_pass(&white, w.sample_rate_hz, plan.lowest_tone_hz(), plan.highest_tone_hz());
    let mut out = w.clone();
    for (s, n) in out.samples.iter_mut().zip(noise) {
        *s += n;
    }
    Ok(out)
}

pub fn add_awgn(w: &Waveform, snr_db: f64, seed: u64) -> Result<Waveform> {
    add_awgn_with(w, snr_db, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Mean-square value of the part of `x` lying in the bins between the
/// lowest and highest tone of `plan`.
pub fn in_band_mean_square(x: &[f64], sample_rate_hz: f64, plan: &FrequencyPlan) -> f64 {
    let spec = spectrum::forward(x);
    let len = x.len();
    let lo = plan.lowest_tone_hz();
    let hi = plan.highest_tone_hz();
    let tol = 0.5 * sample_rate_hz / len as f64;
    (1..=len / 2)
        .filter(|&k| {
            let f = spectrum::bin_freq(k, len, sample_rate_hz);
            f > lo - tol && f < hi + tol
        })
        .map(|k| 2.0 * (spec[k].norm() / len as f64).powi(2))
        .sum()
}

/// Information rate `(N - 1) log2(M) / T` with symbol period `T = 1/gcd`.
pub fn throughput(plan: &FrequencyPlan, m_order: usize) -> f64 {
    (plan.n_tones() - 1) as f64 * (m_order as f64).log2() * plan.gcd_hz() as f64
}

/// A validated configuration with the plan and constellation built once.
#[derive(Debug, Clone)]
pub struct TrialRunner {
    cfg: TrialConfig,
    plan: FrequencyPlan,
    constellation: Option<Constellation>,
    sample_rate_hz: f64,
}

impl TrialRunner {
    pub fn new(cfg: &TrialConfig) -> Result<Self> {
        let runner = Self::transmitter(cfg)?;
        cfg.rectifier.check_plan(&runner.plan)?;
        Ok(runner)
    }

    /// Like [`TrialRunner::new`] but without checking the rectifier against
    /// the plan. Enough for [`TrialRunner::transmit`]; `run` may still fail.
    pub fn transmitter(cfg: &TrialConfig) -> Result<Self> {
        cfg.validate()?;
        let plan = plan_frequencies(cfg.f_c_hz, cfg.n_tones, cfg.gcd_hz, cfg.r)?;
        let constellation = if cfg.is_aligned() {
            if !cfg.m_order.is_power_of_two() || cfg.m_order < 2 {
                return Err(Error::config(format!("M = {} is not a power of two >= 2", cfg.m_order)));
            }
            None
        } else {
            Some(build_constellation(cfg.m_order, cfg.delta_deg)?)
        };
        let sample_rate_hz = cfg.sample_rate_hz.unwrap_or_else(|| default_sample_rate(&plan));
        Ok(TrialRunner {
            cfg: cfg.clone(),
            plan,
            constellation,
            sample_rate_hz,
        })
    }

    pub fn config(&self) -> &TrialConfig {
        &self.cfg
    }

    pub fn plan(&self) -> &FrequencyPlan {
        &self.plan
    }

    pub fn constellation(&self) -> Option<&Constellation> {
        self.constellation.as_ref()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    /// Transmitted bits and tone phases of a stream.
    pub fn stream_phases(&self, stream_index: u64) -> Result<(Vec<bool>, PhaseVector)> {
        let mut rng = stream_rng(self.cfg.seed, 2 * stream_index);
        let bits = random_bits(&mut rng, self.cfg.bits_per_stream());
        let phases = match &self.constellation {
            None => PhaseVector::aligned(self.plan.n_tones()),
            Some(c) => phases_from_symbols(&encode_bits(&bits, c, self.plan.n_tones())?, c),
        };
        Ok((bits, phases))
    }

    pub fn transmit(&self, stream_index: u64) -> Result<(Vec<bool>, Waveform)> {
        let (bits, phases) = self.stream_phases(stream_index)?;
        let w = synthesize(&self.plan, &phases, self.cfg.p_in_dbm, self.sample_rate_hz, self.cfg.z0_ohm)?;
        Ok((bits, w))
    }

    pub fn run(&self, stream_index: u64) -> Result<TrialReport> {
        self.run_inner(stream_index).map_err(|e| e.in_stream(stream_index))
    }

    fn run_inner(&self, stream_index: u64) -> Result<TrialReport> {
        let cfg = &self.cfg;
        cfg.rectifier.check_plan(&self.plan)?;
        let (bits, phases) = self.stream_phases(stream_index)?;
        let tx = synthesize(&self.plan, &phases, cfg.p_in_dbm, self.sample_rate_hz, cfg.z0_ohm)?;
        let papr_lin = papr(&tx)?;

        let mut rx = if cfg.impairments.attenuation_db > 0.0 {
            tx.scaled(10f64.powf(-cfg.impairments.attenuation_db / 20.0))
        } else {
            tx
        };
        if let Some(snr) = cfg.impairments.awgn_snr_db {
            rx = add_awgn_with(&rx, snr, &mut stream_rng(cfg.seed, 2 * stream_index + 1))?;
        }
        let p_rx_dbm = cfg.received_dbm();
        let baseband = rectify(&rx, &cfg.rectifier)?;
        let pce_pct = pce(&baseband, &cfg.rectifier, p_rx_dbm)?;

        let mut report = TrialReport {
            stream_index,
            bits,
            phases,
            papr: papr_lin,
            papr_db: linear_power_to_db(papr_lin),
            p_rx_dbm,
            dc_v: baseband.dc,
            pce_pct,
            ber: None,
            ber_strict: None,
            bit_errors: 0,
            strict_bit_errors: 0,
            erasures: 0,
            demod: None,
        };
        if let Some(c) = &self.constellation {
            let opts = ExtractOptions {
                window_offset_s: cfg.impairments.timing_offset_s.unwrap_or(0.0),
                ..Default::default()
            };
            let d = demodulate(&baseband, &self.plan, c, &opts)?;
            let n_bits = report.bits.len().max(1) as f64;
            report.bit_errors = d.bit_errors(&report.bits)?;
            report.strict_bit_errors = d.strict_bit_errors(&report.bits, c.bits_per_symbol())?;
            report.ber = Some(report.bit_errors as f64 / n_bits);
            report.ber_strict = Some(report.strict_bit_errors as f64 / n_bits);
            report.erasures = d.erasures();
            report.demod = Some(d);
        }
        Ok(report)
    }

    /// Streams `0..cfg.streams`, in index order.
    pub fn run_all(&self) -> Result<Vec<TrialReport>> {
        (0..self.cfg.streams as u64)
            .into_par_iter()
            .map(|i| self.run(i))
            .collect()
    }
}

pub fn run_trial(cfg: &TrialConfig, stream_index: u64) -> Result<TrialReport> {
    TrialRunner::new(cfg)?.run(stream_index)
}

/// Aggregates over the streams of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub streams: usize,
    /// Mean of the linear PAPR, expressed in dB.
    pub mean_papr_db: f64,
    pub mean_pce_pct: f64,
    pub mean_dc_v: f64,
    pub ber: Option<f64>,
    pub ber_strict: Option<f64>,
    pub bit_errors: usize,
    pub strict_bit_errors: usize,
    pub total_bits: usize,
    pub erasures: usize,
    pub throughput_bps: f64,
}

pub fn summarize(reports: &[TrialReport], plan: &FrequencyPlan, m_order: usize, aligned: bool) -> PointSummary {
    let n = reports.len().max(1) as f64;
    let bit_errors = reports.iter().map(|r| r.bit_errors).sum();
    let strict_bit_errors = reports.iter().map(|r| r.strict_bit_errors).sum();
    let total_bits: usize = reports.iter().map(|r| r.bits.len()).sum();
    let ratio = |e: usize| (!aligned).then(|| if total_bits == 0 { 0.0 } else { e as f64 / total_bits as f64 });
    PointSummary {
        streams: reports.len(),
        mean_papr_db: linear_power_to_db(reports.iter().map(|r| r.papr).sum::<f64>() / n),
        mean_pce_pct: reports.iter().map(|r| r.pce_pct).sum::<f64>() / n,
        mean_dc_v: reports.iter().map(|r| r.dc_v).sum::<f64>() / n,
        ber: ratio(bit_errors),
        ber_strict: ratio(strict_bit_errors),
        bit_errors,
        strict_bit_errors,
        total_bits,
        erasures: reports.iter().map(|r| r.erasures).sum(),
        throughput_bps: throughput(plan, m_order),
    }
}

/// Runs every stream of `cfg` and aggregates.
pub fn run_point(cfg: &TrialConfig) -> Result<PointSummary> {
    let runner = TrialRunner::new(cfg)?;
    let reports = runner.run_all()?;
    Ok(summarize(&reports, runner.plan(), cfg.m_order, cfg.is_aligned()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    SquareLaw,
    DiodeOde,
}

impl ModelKind {
    pub fn of(m: &RectifierModel) -> Self {
        match m {
            RectifierModel::SquareLaw { .. } => ModelKind::SquareLaw,
            RectifierModel::DiodeOde { .. } => ModelKind::DiodeOde,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::SquareLaw => "square_law",
            ModelKind::DiodeOde => "diode_ode",
        }
    }

    /// Keeps the base parameters when the kind already matches.
    fn apply(self, base: &RectifierConfig) -> RectifierConfig {
        if ModelKind::of(&base.model) == self {
            return *base;
        }
        let model = match self {
            ModelKind::SquareLaw => RectifierModel::square_law(),
            ModelKind::DiodeOde => RectifierModel::diode(),
        };
        RectifierConfig { model, ..*base }
    }
}

/// Values to sweep; an empty axis keeps the base configuration's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxes {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n_tones: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub m_order: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub delta_deg: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub p_in_dbm: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub model: Vec<ModelKind>,
}

impl SweepAxes {
    pub fn varied(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if !self.n_tones.is_empty() {
            v.push("n_tones");
        }
        if !self.m_order.is_empty() {
            v.push("m_order");
        }
        if !self.delta_deg.is_empty() {
            v.push("delta_deg");
        }
        if !self.p_in_dbm.is_empty() {
            v.push("p_in_dbm");
        }
        if !self.model.is_empty() {
            v.push("model");
        }
        v
    }

    /// Cartesian product in axis order (n_tones outermost, model innermost).
    pub fn expand(&self, base: &TrialConfig) -> Vec<TrialConfig> {
        fn or_base<T: Clone>(axis: &[T], base: T) -> Vec<T> {
            if axis.is_empty() {
                vec![base]
            } else {
                axis.to_vec()
            }
        }
        let mut out = Vec::new();
        for &n in &or_base(&self.n_tones, base.n_tones) {
            for &m in &or_base(&self.m_order, base.m_order) {
                for &d in &or_base(&self.delta_deg, base.delta_deg) {
                    for &p in &or_base(&self.p_in_dbm, base.p_in_dbm) {
                        for &k in &or_base(&self.model, ModelKind::of(&base.rectifier.model)) {
                            out.push(TrialConfig {
                                n_tones: n,
                                m_order: m,
                                delta_deg: d,
                                p_in_dbm: p,
                                rectifier: k.apply(&base.rectifier),
                                ..base.clone()
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub n_tones: usize,
    pub m_order: usize,
    pub delta_deg: f64,
    pub p_in_dbm: f64,
    pub model: String,
    pub seed: u64,
    #[serde(flatten, skip_serializing_if = "Option::is_none")]
    pub summary: Option<PointSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub axes: Vec<String>,
    pub base: TrialConfig,
    pub records: Vec<SweepRecord>,
}

/// Sweep CSV row; the column set is fixed.
#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    n_tones: usize,
    m_order: usize,
    delta_deg: f64,
    p_in_dbm: f64,
    model: &'a str,
    mean_papr_db: Option<f64>,
    mean_pce_pct: Option<f64>,
    ber: Option<f64>,
    streams: Option<usize>,
    seed: u64,
}

impl SweepReport {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            let s = r.summary.as_ref();
            w.serialize(CsvRow {
                n_tones: r.n_tones,
                m_order: r.m_order,
                delta_deg: r.delta_deg,
                p_in_dbm: r.p_in_dbm,
                model: &r.model,
                mean_papr_db: s.map(|s| s.mean_papr_db),
                mean_pce_pct: s.map(|s| s.mean_pce_pct),
                ber: s.and_then(|s| s.ber),
                streams: s.map(|s| s.streams),
                seed: r.seed,
            })
            .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Consistency(e.to_string()))
    }
}

/// Runs every grid point; a failing point is recorded and the sweep goes on.
/// All points share the base seed, so they see the same bit streams.
pub fn sweep(base: &TrialConfig, axes: &SweepAxes) -> Result<SweepReport> {
    let points = axes.expand(base);
    if points.is_empty() {
        return Err(Error::config("sweep grid is empty"));
    }
    let records = points
        .iter()
        .map(|cfg| {
            let (summary, error) = match run_point(cfg) {
                Ok(s) => (Some(s), None),
                Err(e) => (None, Some(e.to_string())),
            };
            SweepRecord {
                n_tones: cfg.n_tones,
                m_order: cfg.m_order,
                delta_deg: cfg.delta_deg,
                p_in_dbm: cfg.p_in_dbm,
                model: cfg.rectifier.model.name().to_string(),
                seed: cfg.seed,
                summary,
                error,
            }
        })
        .collect();
    Ok(SweepReport {
        axes: axes.varied().into_iter().map(String::from).collect(),
        base: base.clone(),
        records,
    })
}

/// One line of a PAPR-versus-phase-range table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaprRow {
    pub n_tones: usize,
    pub m_order: usize,
    pub delta_deg: f64,
    pub streams: usize,
    pub mean_papr: f64,
    pub mean_papr_db: f64,
    pub max_papr: f64,
}

/// Mean PAPR over seeded random streams for every (N, delta) pair; only the
/// transmitter runs.
pub fn papr_table(base: &TrialConfig, n_tones: &[usize], deltas: &[f64]) -> Result<Vec<PaprRow>> {
    let mut rows = Vec::new();
    for &n in n_tones {
        for &d in deltas {
            let cfg = TrialConfig {
                n_tones: n,
                delta_deg: d,
                ..base.clone()
            };
            let runner = TrialRunner::transmitter(&cfg)?;
            let values: Vec<f64> = (0..cfg.streams as u64)
                .into_par_iter()
                .map(|i| papr(&runner.transmit(i)?.1).map_err(|e| e.in_stream(i)))
                .collect::<Result<_>>()?;
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            rows.push(PaprRow {
                n_tones: n,
                m_order: cfg.m_order,
                delta_deg: d,
                streams: values.len(),
                mean_papr: mean,
                mean_papr_db: linear_power_to_db(mean),
                max_papr: values.iter().cloned().fold(0.0, f64::max),
            });
        }
    }
    Ok(rows)
}

/// Input power in watts implied by a config after attenuation.
pub fn received_watts(cfg: &TrialConfig) -> f64 {
    dbm_to_watts(cfg.received_dbm())
}
