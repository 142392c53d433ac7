//! Behavioural rectifiers turning the passband waveform into a baseband
//! signal holding DC plus the second-order beat notes.
//!
//! Two models share one configuration:
//!
//! * `square_law`: `y = k2 x^2` followed by an ideal low-pass. Its baseband is
//!   exactly DC plus one cosine per tone pair, so it serves as the analytic
//!   reference for the demodulator.
//! * `diode_ode`: a single exponential diode with series resistance charging
//!   an output capacitor that discharges into the load,
//!
//!   ```text
//!   C dV/dt = I_d(v_in(t) - V) - V / R_load
//!   I_d     = i_s (exp((v - I_d r_series) / (n v_t)) - 1)
//!   ```
//!
//!   integrated with fixed-step RK4. The input is interpolated band-limited
//!   (zero-padded FFT) so the midpoint stages see the true signal. The state
//!   is settled for `max(5 R_load C, one period)` (rounded up to whole
//!   repetitions of the input buffer) before one repetition is kept and
//!   low-passed.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::angle::dbm_to_watts;
use crate::error::{Error, Result};
use crate::freqplan::FrequencyPlan;
use crate::modem_tx::Waveform;
use crate::spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiodeParams {
    /// Saturation current (A).
    pub i_s: f64,
    pub n_ideality: f64,
    /// Thermal voltage (V).
    pub v_t: f64,
}

impl Default for DiodeParams {
    /// Zero-bias Schottky detector diode (SMS7630 class).
    fn default() -> Self {
        DiodeParams {
            i_s: 5e-6,
            n_ideality: 1.05,
            v_t: 25.85e-3,
        }
    }
}

impl DiodeParams {
    fn n_vt(&self) -> f64 {
        self.n_ideality * self.v_t
    }

    /// Shockley current at junction voltage `v`.
    pub fn shockley(&self, v: f64) -> f64 {
        self.i_s * (v / self.n_vt()).exp_m1()
    }

    /// Terminal current at voltage `v` across the diode plus `r_series`.
    ///
    /// With `w = (I + i_s) r_s / (n v_t)` the implicit law becomes
    /// `w + ln w = ln(i_s r_s / (n v_t)) + (v + i_s r_s) / (n v_t)`, solved by
    /// Newton iteration on `ln w` so the exponent never overflows.
    pub fn current(&self, v: f64, r_series: f64) -> f64 {
        if r_series <= 0.0 {
            return self.shockley(v);
        }
        let nvt = self.n_vt();
        let target = (self.i_s * r_series / nvt).ln() + (v + self.i_s * r_series) / nvt;
        let mut u = if target > 1.0 { (target - target.ln()).ln() } else { target };
        for _ in 0..64 {
            let eu = u.exp();
            let du = (eu + u - target) / (eu + 1.0);
            u -= du;
            if du.abs() < 1e-14 * (1.0 + u.abs()) {
                break;
            }
        }
        nvt / r_series * u.exp() - self.i_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum RectifierModel {
    SquareLaw {
        /// Square-law coefficient (1/V).
        #[serde(default = "default_k2")]
        k2: f64,
    },
    DiodeOde {
        #[serde(default)]
        diode: DiodeParams,
        /// Diode series resistance (ohm).
        #[serde(default = "default_r_series")]
        r_series: f64,
        /// RK4 steps per input sample.
        #[serde(default = "default_substeps")]
        substeps: usize,
    },
}

/// Small-signal detector coefficient `1 / (2 n v_t)` of the default diode.
pub fn default_k2() -> f64 {
    let d = DiodeParams::default();
    1.0 / (2.0 * d.n_vt())
}

fn default_r_series() -> f64 {
    20.0
}

fn default_substeps() -> usize {
    16
}

fn default_c_out() -> f64 {
    0.1e-12
}

fn default_r_load() -> f64 {
    4.4e3
}

fn default_f_cutoff() -> f64 {
    100e6
}

impl RectifierModel {
    pub fn name(&self) -> &'static str {
        match self {
            RectifierModel::SquareLaw { .. } => "square_law",
            RectifierModel::DiodeOde { .. } => "diode_ode",
        }
    }

    pub fn square_law() -> Self {
        RectifierModel::SquareLaw { k2: default_k2() }
    }

    pub fn diode() -> Self {
        RectifierModel::DiodeOde {
            diode: DiodeParams::default(),
            r_series: default_r_series(),
            substeps: default_substeps(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectifierConfig {
    #[serde(flatten)]
    pub model: RectifierModel,
    /// Output capacitance (F).
    #[serde(default = "default_c_out")]
    pub c_out: f64,
    /// Load resistance (ohm).
    #[serde(default = "default_r_load")]
    pub r_load: f64,
    /// Cutoff of the ideal baseband low-pass (Hz).
    #[serde(default = "default_f_cutoff")]
    pub f_cutoff: f64,
}

impl Default for RectifierConfig {
    fn default() -> Self {
        RectifierConfig::square_law()
    }
}

impl RectifierConfig {
    pub fn square_law() -> Self {
        RectifierConfig {
            model: RectifierModel::square_law(),
            c_out: default_c_out(),
            r_load: default_r_load(),
            f_cutoff: default_f_cutoff(),
        }
    }

    pub fn diode() -> Self {
        RectifierConfig {
            model: RectifierModel::diode(),
            ..RectifierConfig::square_law()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_load > 0.0) || !(self.c_out > 0.0) || !(self.f_cutoff > 0.0) {
            return Err(Error::config("r_load, c_out and f_cutoff must be positive"));
        }
        match self.model {
            RectifierModel::SquareLaw { k2 } if !k2.is_finite() => {
                Err(Error::config("square-law coefficient must be finite"))
            }
            RectifierModel::DiodeOde {
                diode,
                r_series,
                substeps,
            } => {
                if !(diode.i_s > 0.0 && diode.n_ideality > 0.0 && diode.v_t > 0.0) {
                    return Err(Error::config("diode parameters must be positive"));
                }
                if !(r_series >= 0.0) || substeps == 0 {
                    return Err(Error::config("r_series must be >= 0 and substeps >= 1"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// The cutoff must pass every beat note (up to the plan bandwidth) and
    /// stop every RF component (from the lowest tone upwards).
    pub fn check_plan(&self, plan: &FrequencyPlan) -> Result<()> {
        let bw = plan.bw_hz() as f64;
        if self.f_cutoff <= bw {
            return Err(Error::config(format!(
                "cutoff {} Hz does not pass the {} Hz beat notes",
                self.f_cutoff, bw
            )));
        }
        if self.f_cutoff >= plan.lowest_tone_hz() {
            return Err(Error::config(format!(
                "cutoff {} Hz does not reject the lowest RF tone at {} Hz",
                self.f_cutoff,
                plan.lowest_tone_hz()
            )));
        }
        Ok(())
    }
}

/// Rectifier output over one repetition of the input.
#[derive(Debug, Clone, PartialEq)]
pub struct BasebandSignal {
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
    pub period_s: f64,
    /// Mean of `samples` (V).
    pub dc: f64,
}

impl BasebandSignal {
    fn from_samples(samples: Vec<f64>, sample_rate_hz: f64, period_s: f64) -> Self {
        let dc = samples.iter().sum::<f64>() / samples.len() as f64;
        BasebandSignal {
            samples,
            sample_rate_hz,
            period_s,
            dc,
        }
    }
}

fn check_input(w: &Waveform, cfg: &RectifierConfig) -> Result<()> {
    cfg.validate()?;
    let spp = w.samples_per_period();
    if spp == 0 || w.samples.is_empty() || w.samples.len() % spp != 0 {
        return Err(Error::Sampling("waveform does not span whole periods".into()));
    }
    if let Some(meta) = &w.meta {
        cfg.check_plan(&meta.plan)?;
    }
    Ok(())
}

pub fn rectify(w: &Waveform, cfg: &RectifierConfig) -> Result<BasebandSignal> {
    match cfg.model {
        RectifierModel::SquareLaw { .. } => rectify_square_law(w, cfg),
        RectifierModel::DiodeOde { .. } => rectify_diode(w, cfg),
    }
}

pub fn rectify_square_law(w: &Waveform, cfg: &RectifierConfig) -> Result<BasebandSignal> {
    let RectifierModel::SquareLaw { k2 } = cfg.model else {
        return Err(Error::config("rectify_square_law needs the square_law model"));
    };
    check_input(w, cfg)?;
    let y: Vec<f64> = w.samples.iter().map(|x| k2 * x * x).collect();
    let y = spectrum::brick_wall_lowpass(&y, w.sample_rate_hz, cfg.f_cutoff);
    Ok(BasebandSignal::from_samples(y, w.sample_rate_hz, w.period_s))
}

/// Square-law baseband computed from the complex envelope,
/// `k2/2 |sum A exp(j(2 pi (f_n - f_c) t + phi_n))|^2`, sampled like `w`.
///
/// Needs the synthesis metadata; agrees with [`rectify_square_law`] for
/// noise-free waveforms whose plan satisfies the cutoff constraints.
pub fn square_law_from_envelope(w: &Waveform, k2: f64) -> Result<BasebandSignal> {
    let meta = w
        .meta
        .as_ref()
        .ok_or_else(|| Error::invalid("waveform carries no synthesis metadata"))?;
    let plan = &meta.plan;
    let centre = 2 * (plan.carrier_hz() / plan.gcd_hz()) as i64;
    let offsets_hz: Vec<f64> = plan
        .tones_half_units()
        .iter()
        .map(|&h| (h as i64 - centre) as f64 * plan.gcd_hz() as f64 / 2.0)
        .collect();
    let phasors: Vec<Complex64> = meta
        .phases
        .as_slice()
        .iter()
        .map(|p| Complex64::from_polar(meta.amplitude_v, p.to_radians()))
        .collect();
    let samples = (0..w.samples.len())
        .map(|i| {
            let t = i as f64 / w.sample_rate_hz;
            let e: Complex64 = offsets_hz
                .iter()
                .zip(&phasors)
                .map(|(f, a)| a * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * f * t))
                .sum();
            0.5 * k2 * e.norm_sqr()
        })
        .collect();
    Ok(BasebandSignal::from_samples(samples, w.sample_rate_hz, w.period_s))
}

/// Settling time before the analysed repetition.
pub fn settling_time_s(cfg: &RectifierConfig, period_s: f64) -> f64 {
    (5.0 * cfg.r_load * cfg.c_out).max(period_s)
}

pub fn rectify_diode(w: &Waveform, cfg: &RectifierConfig) -> Result<BasebandSignal> {
    let RectifierModel::DiodeOde {
        diode,
        r_series,
        substeps,
    } = cfg.model
    else {
        return Err(Error::config("rectify_diode needs the diode_ode model"));
    };
    check_input(w, cfg)?;

    let len = w.samples.len();
    let buffer_s = w.duration_s();
    let settle_cycles = (settling_time_s(cfg, w.period_s) / buffer_s - 1e-9).ceil().max(1.0) as usize;

    // Two fine samples per RK4 step: step start and midpoint.
    let up = spectrum::upsample_periodic(&w.samples, 2 * substeps);
    let up_len = up.len();
    let h = 1.0 / (w.sample_rate_hz * substeps as f64);
    let inv_c = 1.0 / cfg.c_out;
    let g_load = 1.0 / cfg.r_load;
    let dvdt = |vin: f64, v: f64| (diode.current(vin - v, r_series) - v * g_load) * inv_c;

    let mut v = 0.0f64;
    let mut kept = Vec::with_capacity(len);
    let mut step = 0usize;
    for cycle in 0..=settle_cycles {
        let keep = cycle == settle_cycles;
        for i in 0..len {
            if keep {
                kept.push(v);
            }
            for s in 0..substeps {
                let q = 2 * (i * substeps + s);
                let a = up[q];
                let m = up[q + 1];
                let b = up[(q + 2) % up_len];
                let k1 = dvdt(a, v);
                let k2 = dvdt(m, v + 0.5 * h * k1);
                let k3 = dvdt(m, v + 0.5 * h * k2);
                let k4 = dvdt(b, v + h * k3);
                v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                if !v.is_finite() {
                    return Err(Error::Integration {
                        step,
                        time_s: step as f64 * h,
                        reason: format!("output voltage became {v}; reduce the step (raise substeps)"),
                    });
                }
                step += 1;
            }
        }
    }

    let y = spectrum::brick_wall_lowpass(&kept, w.sample_rate_hz, cfg.f_cutoff);
    Ok(BasebandSignal::from_samples(y, w.sample_rate_hz, w.period_s))
}

/// Power conversion efficiency in percent: `(dc^2 / R_load) / P_in * 100`.
pub fn pce(b: &BasebandSignal, cfg: &RectifierConfig, p_in_dbm: f64) -> Result<f64> {
    pce_watts(b.dc, cfg.r_load, dbm_to_watts(p_in_dbm))
}

pub fn pce_watts(dc_v: f64, r_load: f64, p_in_w: f64) -> Result<f64> {
    if !(p_in_w > 0.0) || !p_in_w.is_finite() {
        return Err(Error::invalid(format!("input power must be positive, got {p_in_w} W")));
    }
    Ok(dc_v * dc_v / r_load / p_in_w * 100.0)
}
