//! Reference computations shared by the integration tests. Each one is
//! written from the textbook formula and avoids the library code it checks.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use num_complex::Complex64;

/// `sum A cos(2 pi f t + phi)` evaluated sample by sample.
pub fn direct_multitone(tones_hz: &[f64], phases_deg: &[f64], amplitude: f64, fs: f64, len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| {
            let t = i as f64 / fs;
            tones_hz
                .iter()
                .zip(phases_deg)
                .map(|(f, p)| amplitude * (2.0 * PI * f * t + p.to_radians()).cos())
                .sum()
        })
        .collect()
}

/// Low-pass part of `k2 x(t)^2` for `x = sum A cos(w_n t + phi_n)`:
/// `k2 N A^2 / 2 + sum_{i<j} k2 A^2 cos((w_j - w_i) t + phi_j - phi_i)`.
/// Returns the DC value and, per difference frequency in Hz, the complex
/// amplitude of the cosine at that frequency.
pub fn square_law_terms(tones_hz: &[f64], phases_deg: &[f64], amplitude: f64, k2: f64) -> (f64, BTreeMap<u64, Complex64>) {
    let n = tones_hz.len();
    let dc = k2 * n as f64 * amplitude * amplitude / 2.0;
    let mut terms: BTreeMap<u64, Complex64> = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            let d = (tones_hz[j] - tones_hz[i]).round() as u64;
            let theta = (phases_deg[j] - phases_deg[i]).to_radians();
            *terms.entry(d).or_default() += Complex64::from_polar(k2 * amplitude * amplitude, theta);
        }
    }
    (dc, terms)
}

/// Plain O(L^2) DFT coefficient `sum x_i exp(-j 2 pi k i / L)`.
pub fn dft_bin(x: &[f64], k: usize) -> Complex64 {
    let l = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| Complex64::from_polar(v, -2.0 * PI * k as f64 * i as f64 / l))
        .sum()
}

/// Wrap into (-180, 180].
pub fn wrap(x: f64) -> f64 {
    let mut y = x % 360.0;
    if y <= -180.0 {
        y += 360.0;
    }
    if y > 180.0 {
        y -= 360.0;
    }
    y
}

/// Every distinct wrapped phase reachable by `n - 1` symbols, by walking all
/// `M^(n-1)` symbol sequences. Phases are returned in units of
/// `delta / 2M` to keep the comparison exact.
pub fn brute_force_support(n: usize, m: usize, delta_deg: f64) -> BTreeSet<i64> {
    let unit = delta_deg / (2.0 * m as f64);
    // one full turn in lattice units, when it is an integer
    let turn = 360.0 / unit;
    assert!((turn - turn.round()).abs() < 1e-9, "lattice does not close");
    let turn = turn.round() as i64;
    let mut out = BTreeSet::new();
    let count = m.pow((n - 1) as u32);
    for mut code in 0..count {
        let mut sum = 0i64;
        for _ in 0..n - 1 {
            let s = (code % m) as i64;
            code /= m;
            sum += 2 * s - m as i64 + 1;
        }
        // wrap into (-turn/2, turn/2]
        let mut w = sum.rem_euclid(turn);
        if w > turn / 2 {
            w -= turn;
        }
        out.insert(w);
    }
    out
}

/// Irwin-Hall density of `m` standard uniforms from the alternating sum
/// `1/(m-1)! sum_k (-1)^k C(m,k) (t-k)^(m-1)`.
pub fn irwin_hall_alternating(m: usize, t: f64) -> f64 {
    if t < 0.0 || t > m as f64 {
        return 0.0;
    }
    let fact: f64 = (1..m).map(|v| v as f64).product();
    let mut s = 0.0;
    let mut binom = 1.0;
    for k in 0..=t.floor() as usize {
        if k > 0 {
            binom *= (m - k + 1) as f64 / k as f64;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s += sign * binom * (t - k as f64).powi(m as i32 - 1);
    }
    s / fact
}

/// Normal approximation of the unwrapped phase density: mean 0 and
/// variance `(n - 1) delta^2 / 12`.
pub fn normal_approx_pdf(n: usize, delta_deg: f64, x: f64) -> f64 {
    let var = (n as f64 - 1.0) * delta_deg * delta_deg / 12.0;
    (-x * x / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// Composite Simpson rule over `[a, b]` with `intervals` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    assert!(intervals % 2 == 0);
    let h = (b - a) / intervals as f64;
    let mut s = f(a) + f(b);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * i as f64);
    }
    s * h / 3.0
}

/// Simpson rule with the endpoints pulled inside by a tiny fraction of a
/// panel, for densities with a jump at a half-open support boundary.
pub fn simpson_open(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let eps = 1e-9 * (b - a) / intervals as f64;
    simpson(f, a + eps, b - eps, intervals)
}

/// Every difference `f_j - f_i`, `i < j`, of a tone list given as
/// cumulative sums of spacings.
pub fn all_differences(spacings: &[u64]) -> Vec<u64> {
    let mut tones = vec![0u64];
    for k in spacings {
        tones.push(tones.last().unwrap() + k);
    }
    let mut d = Vec::new();
    for i in 0..tones.len() {
        for j in i + 1..tones.len() {
            d.push(tones[j] - tones[i]);
        }
    }
    d
}

/// Worst deviations of a square-law baseband from [`square_law_terms`]:
/// relative error of DC and of every beat-note amplitude, and phase error
/// in degrees at every beat note, plus the largest bin up to `top_hz` that
/// the expansion leaves empty (relative to the DC level).
pub struct SquareLawCheck {
    pub dc_rel: f64,
    pub amp_rel: f64,
    pub phase_deg: f64,
    pub stray_rel: f64,
}

pub fn compare_square_law(
    baseband: &[f64],
    fs: f64,
    tones_hz: &[f64],
    phases_deg: &[f64],
    amplitude: f64,
    k2: f64,
    top_hz: f64,
) -> SquareLawCheck {
    let (dc, terms) = square_law_terms(tones_hz, phases_deg, amplitude, k2);
    let len = baseband.len();
    let bin_hz = fs / len as f64;
    let mean = baseband.iter().sum::<f64>() / len as f64;
    let mut out = SquareLawCheck {
        dc_rel: (mean / dc - 1.0).abs(),
        amp_rel: 0.0,
        phase_deg: 0.0,
        stray_rel: 0.0,
    };
    let top = (top_hz / bin_hz).floor() as usize;
    for k in 1..=top {
        let f = (k as f64 * bin_hz).round() as u64;
        let got = dft_bin(baseband, k) * (2.0 / len as f64);
        match terms.get(&f) {
            Some(want) if want.norm() > 1e-9 * dc => {
                out.amp_rel = out.amp_rel.max((got.norm() / want.norm() - 1.0).abs());
                let d = wrap(got.arg().to_degrees() - want.arg().to_degrees()).abs();
                out.phase_deg = out.phase_deg.max(d);
            }
            _ => out.stray_rel = out.stray_rel.max(got.norm() / dc),
        }
    }
    out
}
