//! Whole-period transforms. Every buffer handled here holds an integer number
//! of signal repetitions, so each tone falls exactly on a bin and no window is
//! applied.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Unnormalised forward DFT of a real buffer.
pub fn forward(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan(buf.len(), false).process(&mut buf);
    buf
}

/// Inverse DFT scaled by `1/len`, keeping the real part.
pub fn inverse_real(mut spec: Vec<Complex64>) -> Vec<f64> {
    let n = spec.len();
    plan(n, true).process(&mut spec);
    let scale = 1.0 / n as f64;
    spec.into_iter().map(|c| c.re * scale).collect()
}

/// Frequency of bin `k` of an `len`-point transform.
pub fn bin_freq(k: usize, len: usize, sample_rate_hz: f64) -> f64 {
    k as f64 * sample_rate_hz / len as f64
}

/// Bin index of `freq_hz`, provided it lands on a bin to within 1e-6 bins.
pub fn exact_bin(freq_hz: f64, len: usize, sample_rate_hz: f64) -> Option<usize> {
    let k = freq_hz * len as f64 / sample_rate_hz;
    let r = k.round();
    if (k - r).abs() < 1e-6 && r >= 0.0 && (r as usize) <= len / 2 {
        Some(r as usize)
    } else {
        None
    }
}

/// Zeroes every bin above `cutoff_hz` (both halves of the spectrum).
pub fn zero_above(spec: &mut [Complex64], sample_rate_hz: f64, cutoff_hz: f64) {
    let n = spec.len();
    for k in 1..=n / 2 {
        if bin_freq(k, n, sample_rate_hz) > cutoff_hz {
            spec[k] = Complex64::new(0.0, 0.0);
            spec[n - k] = Complex64::new(0.0, 0.0);
        }
    }
}

/// Ideal band-pass of a periodic buffer: keeps the bins from `lo_hz` to
/// `hi_hz` inclusive (to within half a bin) and zeroes the rest.
pub fn band_pass(x: &[f64], sample_rate_hz: f64, lo_hz: f64, hi_hz: f64) -> Vec<f64> {
    let mut spec = forward(x);
    let n = spec.len();
    let tol = 0.5 * sample_rate_hz / n as f64;
    for k in 0..=n / 2 {
        let f = bin_freq(k, n, sample_rate_hz);
        if f <= lo_hz - tol || f >= hi_hz + tol {
            spec[k] = Complex64::new(0.0, 0.0);
            spec[(n - k) % n] = Complex64::new(0.0, 0.0);
        }
    }
    inverse_real(spec)
}

/// Ideal low-pass of a periodic buffer.
pub fn brick_wall_lowpass(x: &[f64], sample_rate_hz: f64, cutoff_hz: f64) -> Vec<f64> {
    let mut spec = forward(x);
    zero_above(&mut spec, sample_rate_hz, cutoff_hz);
    inverse_real(spec)
}

/// Band-limited interpolation of a periodic buffer by an integer factor.
pub fn upsample_periodic(x: &[f64], factor: usize) -> Vec<f64> {
    if factor == 1 {
        return x.to_vec();
    }
    let n = x.len();
    let m = n * factor;
    let spec = forward(x);
    let mut big = vec![Complex64::new(0.0, 0.0); m];
    let half = n / 2;
    for k in 0..n {
        if n % 2 == 0 && k == half {
            // split the Nyquist bin between the two mirrored positions
            big[half] = spec[half] * 0.5;
            big[m - half] = spec[half] * 0.5;
        } else if k < half || (n % 2 == 1 && k == half) {
            big[k] = spec[k];
        } else {
            big[m - (n - k)] = spec[k];
        }
    }
    let scale = factor as f64;
    inverse_real(big).into_iter().map(|v| v * scale).collect()
}
