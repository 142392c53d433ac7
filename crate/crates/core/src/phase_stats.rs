//! Distribution of the cumulative tone phases.
//!
//! Tone `n` carries the sum of `n - 1` symbol phases, wrapped onto the
//! circle. Idealising the symbols as continuous uniforms on
//! `[-delta/2, delta/2]` makes the unwrapped sum Irwin-Hall distributed; the
//! circular density is that density folded over 360 degree shifts.
//!
//! The Irwin-Hall density of `m` uniforms on `[0, 1)` is the cardinal
//! B-spline of order `m`, evaluated here with the Cox-de Boor recurrence.
//! Every term of that recurrence is non-negative, so it does not suffer the
//! cancellation of the alternating-sum closed form at large `m`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::angle::wrap_deg;
use crate::error::{Error, Result};
use crate::modem_tx::build_constellation;

pub const HISTOGRAM_BINS: usize = 72;
pub const HISTOGRAM_BIN_DEG: f64 = 5.0;

/// Distinct phases tone `n` can take.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSupport {
    pub n: usize,
    pub values: Vec<f64>,
    /// Distinct sums before wrapping onto the circle.
    pub pre_wrap_count: usize,
}

/// Enumerates every reachable sum of `n - 1` symbols on the `delta / 2M`
/// lattice, wraps it into (-180, 180] and returns the distinct values.
pub fn tone_phase_support(n: usize, m_order: usize, delta_deg: f64) -> Result<PhaseSupport> {
    if n < 2 {
        return Err(Error::invalid(format!("tone index must be >= 2, got {n}")));
    }
    build_constellation(m_order, delta_deg)?;
    let unit = delta_deg / (2.0 * m_order as f64);
    let span = (n - 1) * (m_order - 1);
    // reachable[j] <=> lattice sum (j - span) is reachable
    let mut reachable = vec![false; 2 * span + 1];
    reachable[span] = true;
    let offsets: Vec<i64> = (0..m_order as i64).map(|m| 2 * m - m_order as i64 + 1).collect();
    for _ in 0..n - 1 {
        let mut next = vec![false; reachable.len()];
        for (j, _) in reachable.iter().enumerate().filter(|(_, &r)| r) {
            for o in &offsets {
                let k = j as i64 + o;
                if k >= 0 && (k as usize) < next.len() {
                    next[k as usize] = true;
                }
            }
        }
        reachable = next;
    }
    let sums: Vec<i64> = reachable
        .iter()
        .enumerate()
        .filter(|(_, &r)| r)
        .map(|(j, _)| j as i64 - span as i64)
        .collect();
    let pre_wrap_count = sums.len();
    let mut values: Vec<f64> = sums.iter().map(|&j| wrap_deg(j as f64 * unit)).collect();
    values.sort_by(f64::total_cmp);
    values.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    Ok(PhaseSupport {
        n,
        values,
        pre_wrap_count,
    })
}

/// True when the unwrapped phase range of tone `n` reaches around the whole
/// circle, so that distinct symbol sums start landing on the same phase.
pub fn wraps_collide(n: usize, m_order: usize, delta_deg: f64) -> bool {
    (n as f64 - 1.0) * (m_order as f64 - 1.0) * delta_deg / (2.0 * m_order as f64) >= 180.0
}

/// Cardinal B-spline of order `m` (support `[0, m)`), i.e. the Irwin-Hall
/// density of `m` standard uniforms, at `t`.
pub fn cardinal_bspline(m: usize, t: f64) -> f64 {
    if m == 0 || !(t >= 0.0 && t < m as f64) {
        return 0.0;
    }
    // b[i] = N_k(t - i)
    let mut b: Vec<f64> = (0..m)
        .map(|i| {
            let s = t - i as f64;
            if (0.0..1.0).contains(&s) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for k in 2..=m {
        let kf = k as f64;
        for i in 0..=m - k {
            let s = t - i as f64;
            b[i] = (s * b[i] + (kf - s) * b[i + 1]) / (kf - 1.0);
        }
    }
    b[0]
}

/// Irwin-Hall CDF of `m` standard uniforms, via
/// `integral_0^t N_m = sum_{i >= 0} N_{m+1}(t - i)`.
pub fn irwin_hall_cdf_standard(m: usize, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= m as f64 {
        return 1.0;
    }
    let top = t.floor() as usize;
    (0..=top).map(|i| cardinal_bspline(m + 1, t - i as f64)).sum()
}

/// Density (per degree) of the sum of `n - 1` uniforms on `[-delta/2, delta/2]`.
pub fn irwin_hall_pdf(n: usize, delta_deg: f64, x_deg: f64) -> f64 {
    let m = n.saturating_sub(1);
    cardinal_bspline(m, x_deg / delta_deg + m as f64 / 2.0) / delta_deg
}

pub fn irwin_hall_cdf(n: usize, delta_deg: f64, x_deg: f64) -> f64 {
    let m = n.saturating_sub(1);
    irwin_hall_cdf_standard(m, x_deg / delta_deg + m as f64 / 2.0)
}

pub fn irwin_hall_variance(n: usize, delta_deg: f64) -> f64 {
    (n as f64 - 1.0) * delta_deg * delta_deg / 12.0
}

fn fold_range(n: usize, delta_deg: f64) -> i64 {
    ((n as f64 - 1.0) * delta_deg / 720.0).ceil() as i64 + 1
}

/// Circular density of tone `n`'s phase at `x_deg` in (-180, 180].
pub fn wrapped_phase_pdf(n: usize, delta_deg: f64, x_deg: f64) -> f64 {
    let k = fold_range(n, delta_deg);
    (-k..=k)
        .map(|i| irwin_hall_pdf(n, delta_deg, x_deg + 360.0 * i as f64))
        .sum()
}

/// Probability that tone `n`'s wrapped phase is at most `x_deg`.
pub fn wrapped_phase_cdf(n: usize, delta_deg: f64, x_deg: f64) -> f64 {
    let k = fold_range(n, delta_deg);
    (-k..=k)
        .map(|i| {
            let shift = 360.0 * i as f64;
            irwin_hall_cdf(n, delta_deg, x_deg + shift) - irwin_hall_cdf(n, delta_deg, -180.0 + shift)
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDensity {
    pub n: usize,
    pub delta_deg: f64,
    pub grid_deg: Vec<f64>,
    pub density: Vec<f64>,
    pub wrapped: bool,
}

/// Evaluates the density on `points` equally spaced values across
/// (-180, 180] (wrapped) or across the unwrapped support.
pub fn phase_density(n: usize, delta_deg: f64, points: usize, wrapped: bool) -> PhaseDensity {
    let (lo, hi) = if wrapped {
        (-180.0, 180.0)
    } else {
        let half = (n as f64 - 1.0) * delta_deg / 2.0;
        (-half, half)
    };
    let step = (hi - lo) / points as f64;
    let grid_deg: Vec<f64> = (1..=points).map(|i| lo + step * i as f64).collect();
    let density = grid_deg
        .iter()
        .map(|&x| {
            if wrapped {
                wrapped_phase_pdf(n, delta_deg, x)
            } else {
                irwin_hall_pdf(n, delta_deg, x)
            }
        })
        .collect();
    PhaseDensity {
        n,
        delta_deg,
        grid_deg,
        density,
        wrapped,
    }
}

/// Wrapped tone phases of `trials` random symbol sequences.
pub fn sample_tone_phases(n: usize, m_order: usize, delta_deg: f64, trials: usize, seed: u64) -> Result<Vec<f64>> {
    if n < 2 || trials == 0 {
        return Err(Error::invalid("need n >= 2 and at least one trial"));
    }
    let c = build_constellation(m_order, delta_deg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..trials)
        .map(|_| {
            let mut acc = 0.0;
            for _ in 0..n - 1 {
                acc = wrap_deg(acc + c.phase_deg(rng.gen_range(0..m_order)));
            }
            acc
        })
        .collect())
}

/// Bin of `x` in the 72 x 5 degree layout; bins are left-open, right-closed.
pub fn histogram_bin(x_deg: f64) -> usize {
    let i = ((x_deg + 180.0) / HISTOGRAM_BIN_DEG).ceil() as i64 - 1;
    i.clamp(0, HISTOGRAM_BINS as i64 - 1) as usize
}

/// Upper edge of bin `i`.
pub fn bin_upper_edge(i: usize) -> f64 {
    -180.0 + HISTOGRAM_BIN_DEG * (i + 1) as f64
}

pub fn bin_center(i: usize) -> f64 {
    bin_upper_edge(i) - HISTOGRAM_BIN_DEG / 2.0
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseHistogram {
    pub n: usize,
    pub m_order: usize,
    pub trials: usize,
    pub counts: Vec<u64>,
}

impl PhaseHistogram {
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.trials as f64).collect()
    }
}

pub fn empirical_phase_histogram(
    n: usize,
    m_order: usize,
    delta_deg: f64,
    trials: usize,
    seed: u64,
) -> Result<PhaseHistogram> {
    let mut counts = vec![0u64; HISTOGRAM_BINS];
    for x in sample_tone_phases(n, m_order, delta_deg, trials, seed)? {
        counts[histogram_bin(x)] += 1;
    }
    Ok(PhaseHistogram {
        n,
        m_order,
        trials,
        counts,
    })
}

/// Probability mass of each histogram bin under the wrapped continuous model.
pub fn analytic_bin_probabilities(n: usize, delta_deg: f64) -> Vec<f64> {
    let mut prev = 0.0;
    (0..HISTOGRAM_BINS)
        .map(|i| {
            let c = wrapped_phase_cdf(n, delta_deg, bin_upper_edge(i));
            let p = c - prev;
            prev = c;
            p.max(0.0)
        })
        .collect()
}

/// Kolmogorov-Smirnov distance `sup |F_emp - F|` of `samples` against `cdf`.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        let f = cdf(x);
        d = d.max((i as f64 / n - f).abs()).max((j as f64 / n - f).abs());
        i = j;
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness-of-fit of observed counts against bin probabilities.
/// Bins with zero expected mass are skipped when they are also empty.
pub fn chi_square(counts: &[u64], probabilities: &[f64]) -> ChiSquareResult {
    let total: u64 = counts.iter().sum();
    let mut stat = 0.0;
    let mut used = 0usize;
    for (&o, &p) in counts.iter().zip(probabilities) {
        let e = p * total as f64;
        if e <= 0.0 {
            if o > 0 {
                stat = f64::INFINITY;
            }
            continue;
        }
        stat += (o as f64 - e).powi(2) / e;
        used += 1;
    }
    let dof = used.saturating_sub(1).max(1);
    let p_value = if stat.is_finite() {
        1.0 - ChiSquared::new(dof as f64).map(|d| d.cdf(stat)).unwrap_or(f64::NAN)
    } else {
        0.0
    };
    ChiSquareResult {
        statistic: stat,
        dof,
        p_value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_values(got: &[f64], want: &[f64]) {
        assert_eq!(got.len(), want.len(), "{got:?} vs {want:?}");
        for (a, b) in got.iter().zip(want) {
            assert!((a - b).abs() < 1e-9, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn support_examples() {
        let s = tone_phase_support(2, 4, 180.0).unwrap();
        assert_values(&s.values, &[-67.5, -22.5, 22.5, 67.5]);
        assert_eq!(s.pre_wrap_count, 4);

        let s = tone_phase_support(3, 4, 90.0).unwrap();
        assert_eq!(s.values.len(), 7);

        // -180 and 180 are the same point; the wrap interval keeps 180.
        let s = tone_phase_support(3, 4, 360.0).unwrap();
        assert_values(&s.values, &[-90.0, 0.0, 90.0, 180.0]);
        assert_eq!(s.pre_wrap_count, 7);
    }

    #[test]
    fn uniform_and_triangle() {
        let d = 90.0;
        assert!((irwin_hall_pdf(2, d, 10.0) - 1.0 / d).abs() < 1e-15);
        assert_eq!(irwin_hall_pdf(2, d, 50.0), 0.0);
        assert!((irwin_hall_pdf(3, d, 0.0) - 1.0 / d).abs() < 1e-15);
        assert!((irwin_hall_pdf(3, d, 45.0) - 0.5 / d).abs() < 1e-15);
        assert_eq!(irwin_hall_pdf(3, d, 90.0), 0.0);
    }

    #[test]
    fn unfolded_when_support_fits() {
        for x in [-44.0, -10.0, 0.0, 30.0, 45.0] {
            assert_eq!(wrapped_phase_pdf(2, 90.0, x), irwin_hall_pdf(2, 90.0, x));
        }
        assert_eq!(wrapped_phase_pdf(2, 90.0, 120.0), 0.0);
    }

    #[test]
    fn full_circle_is_uniform() {
        for n in 2..=12 {
            for i in 0..=720 {
                let x = -180.0 + 0.5 * i as f64;
                if x <= -180.0 {
                    continue;
                }
                let v = wrapped_phase_pdf(n, 360.0, x);
                assert!((v * 360.0 - 1.0).abs() < 1e-12, "n={n} x={x}: {v}");
            }
        }
    }

    #[test]
    fn cdf_endpoints() {
        for n in [2usize, 5, 16] {
            for d in [45.0, 90.0, 360.0] {
                assert!((wrapped_phase_cdf(n, d, 180.0) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn histogram_bins_are_left_open() {
        assert_eq!(histogram_bin(180.0), 71);
        assert_eq!(histogram_bin(-179.999), 0);
        assert_eq!(histogram_bin(-175.0), 0);
        assert_eq!(histogram_bin(-174.999), 1);
        assert_eq!(histogram_bin(-90.0), 17);
        assert_eq!(histogram_bin(90.0), 53);
    }

    #[test]
    fn two_symbol_histogram() {
        let h = empirical_phase_histogram(2, 2, 360.0, 100_000, 7).unwrap();
        let f = h.frequencies();
        assert!((f[17] - 0.5).abs() < 0.01);
        assert!((f[53] - 0.5).abs() < 0.01);
        assert_eq!(h.counts[17] + h.counts[53], 100_000);
        let again = empirical_phase_histogram(2, 2, 360.0, 100_000, 7).unwrap();
        assert_eq!(h, again);
    }

    #[test]
    fn ks_of_exact_sample_is_small() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let d = ks_distance(&xs, |x| x);
        assert!((d - 0.0005).abs() < 1e-12);
    }
}
