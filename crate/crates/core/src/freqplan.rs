//! Non-uniform tone spacing plans.
//!
//! A plan places `N` tones so that the `N-1` beat notes between neighbouring
//! tones land on frequencies that no other pair of tones produces. The
//! second-order products seen after a square-law device are exactly the
//! pairwise tone differences, i.e. the sums of contiguous runs of spacings,
//! so the plan is collision-free when no run of two or more spacings adds up
//! to a single spacing and no spacing is repeated.
//!
//! Spacings are held as exact integers in units of the grid step (`gcd`);
//! Hz values are derived on demand.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "PlanDocument", try_from = "PlanDocument")]
pub struct FrequencyPlan {
    carrier_hz: u64,
    gcd_hz: u64,
    spread: u32,
    spacings: Vec<u64>,
}

impl FrequencyPlan {
    /// Builds a plan from explicit spacings (in grid units) without checking
    /// collision-freeness; run [`validate_plan`] for that.
    pub fn from_spacings(carrier_hz: u64, gcd_hz: u64, spread: u32, spacings: Vec<u64>) -> Result<Self> {
        if gcd_hz == 0 {
            return Err(Error::config("grid step (gcd) must be positive"));
        }
        if spacings.is_empty() {
            return Err(Error::config("a plan needs at least two tones"));
        }
        if spacings.iter().any(|&k| k == 0) {
            return Err(Error::config("spacings must be positive"));
        }
        if carrier_hz % gcd_hz != 0 {
            return Err(Error::config(format!(
                "carrier {carrier_hz} Hz is not a multiple of the grid step {gcd_hz} Hz"
            )));
        }
        let plan = FrequencyPlan {
            carrier_hz,
            gcd_hz,
            spread,
            spacings,
        };
        if plan.bw_hz() >= carrier_hz {
            return Err(Error::config(format!(
                "bandwidth {} Hz does not fit below the carrier {carrier_hz} Hz",
                plan.bw_hz()
            )));
        }
        Ok(plan)
    }

    pub fn carrier_hz(&self) -> u64 {
        self.carrier_hz
    }

    pub fn gcd_hz(&self) -> u64 {
        self.gcd_hz
    }

    /// Bandwidth spreading factor used to generate the plan.
    pub fn spread(&self) -> u32 {
        self.spread
    }

    pub fn n_tones(&self) -> usize {
        self.spacings.len() + 1
    }

    /// Consecutive spacings in grid units.
    pub fn spacings(&self) -> &[u64] {
        &self.spacings
    }

    pub fn spacings_hz(&self) -> Vec<u64> {
        self.spacings.iter().map(|k| k * self.gcd_hz).collect()
    }

    pub fn bw_units(&self) -> u64 {
        self.spacings.iter().sum()
    }

    pub fn bw_hz(&self) -> u64 {
        self.bw_units() * self.gcd_hz
    }

    /// Waveform period `1/gcd`, which is also the symbol duration.
    pub fn period_s(&self) -> f64 {
        1.0 / self.gcd_hz as f64
    }

    /// Tone frequencies expressed in half grid units (`2 f_n / gcd`), exact.
    ///
    /// Odd values occur when the bandwidth is an odd number of grid steps,
    /// because the tones are centred on the carrier.
    pub fn tones_half_units(&self) -> Vec<u64> {
        let mut f = 2 * (self.carrier_hz / self.gcd_hz) - self.bw_units();
        let mut out = Vec::with_capacity(self.n_tones());
        out.push(f);
        for k in &self.spacings {
            f += 2 * k;
            out.push(f);
        }
        out
    }

    pub fn tones_hz(&self) -> Vec<f64> {
        let half = self.gcd_hz as f64 / 2.0;
        self.tones_half_units().into_iter().map(|h| h as f64 * half).collect()
    }

    pub fn lowest_tone_hz(&self) -> f64 {
        self.carrier_hz as f64 - self.bw_hz() as f64 / 2.0
    }

    pub fn highest_tone_hz(&self) -> f64 {
        self.carrier_hz as f64 + self.bw_hz() as f64 / 2.0
    }

    /// Number of `1/gcd` periods after which the passband signal repeats
    /// exactly: 1 when every tone sits on the grid, 2 when tones sit on
    /// half-grid points (the squared signal still repeats every period).
    pub fn repetition_periods(&self) -> usize {
        if self.bw_units() % 2 == 0 {
            1
        } else {
            2
        }
    }
}

/// Runs the greedy spacing search and returns a verified plan.
///
/// The first spacing is one grid step. Each following spacing starts from a
/// candidate of 1 and advances the candidate by `1 + r` while it equals the
/// sum of any contiguous run of spacings already chosen.
pub fn plan_frequencies(carrier_hz: u64, n_tones: usize, gcd_hz: u64, spread: u32) -> Result<FrequencyPlan> {
    if n_tones < 2 {
        return Err(Error::config(format!("need at least 2 tones, got {n_tones}")));
    }
    if gcd_hz == 0 {
        return Err(Error::config("grid step (gcd) must be positive"));
    }
    if carrier_hz % gcd_hz != 0 {
        return Err(Error::config(format!(
            "carrier {carrier_hz} Hz is not a multiple of the grid step {gcd_hz} Hz"
        )));
    }

    let first = 1u64;
    let step = first + spread as u64;
    let mut spacings = vec![first];
    let mut taken: BTreeSet<u64> = BTreeSet::from([first]);
    for _ in 2..n_tones {
        let mut candidate = 1u64;
        while taken.contains(&candidate) {
            candidate += step;
        }
        spacings.push(candidate);
        // Extend the run-sum set with every run that ends at the new spacing.
        let mut run = 0u64;
        for k in spacings.iter().rev() {
            run += k;
            taken.insert(run);
        }
    }

    let plan = FrequencyPlan::from_spacings(carrier_hz, gcd_hz, spread, spacings)?;
    if let Err(v) = validate_plan(&plan) {
        return Err(Error::Consistency(format!("generated plan failed verification: {v}")));
    }
    Ok(plan)
}

/// All pairwise tone differences in grid units, as a set.
pub fn pair_differences(plan: &FrequencyPlan) -> BTreeSet<u64> {
    run_sums(plan.spacings()).into_iter().map(|r| r.sum).collect()
}

/// Every pairwise tone difference `f_j - f_i` (i < j) in grid units, with
/// multiplicity, ordered by `(i, j)`.
pub fn pair_difference_list(plan: &FrequencyPlan) -> Vec<u64> {
    run_sums(plan.spacings()).into_iter().map(|r| r.sum).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct RunSum {
    first: usize,
    last: usize,
    sum: u64,
}

fn run_sums(k: &[u64]) -> Vec<RunSum> {
    let mut out = Vec::with_capacity(k.len() * (k.len() + 1) / 2);
    for first in 0..k.len() {
        let mut sum = 0;
        for (last, v) in k.iter().enumerate().skip(first) {
            sum += v;
            out.push(RunSum { first, last, sum });
        }
    }
    out
}

/// Why a set of spacings cannot carry one symbol per neighbouring tone pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanViolation {
    /// Two consecutive-pair beat notes share a frequency.
    DuplicateSpacing { first: usize, second: usize, value: u64 },
    /// The tone pair spanning spacings `run_first..=run_last` beats at the
    /// same frequency as the neighbouring pair behind spacing `spacing`.
    RunCollision {
        run_first: usize,
        run_last: usize,
        spacing: usize,
        value: u64,
    },
}

impl fmt::Display for PlanViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlanViolation::DuplicateSpacing { first, second, value } => {
                write!(f, "spacings {first} and {second} are both {value}")
            }
            PlanViolation::RunCollision {
                run_first,
                run_last,
                spacing,
                value,
            } => write!(
                f,
                "sum of spacings {run_first}..={run_last} is {value}, equal to spacing {spacing}"
            ),
        }
    }
}

pub fn validate_plan(plan: &FrequencyPlan) -> std::result::Result<(), PlanViolation> {
    validate_spacings(plan.spacings())
}

/// Checks raw spacings (grid units) for beat-note collisions.
pub fn validate_spacings(k: &[u64]) -> std::result::Result<(), PlanViolation> {
    for i in 0..k.len() {
        for j in i + 1..k.len() {
            if k[i] == k[j] {
                return Err(PlanViolation::DuplicateSpacing {
                    first: i,
                    second: j,
                    value: k[i],
                });
            }
        }
    }
    for run in run_sums(k).into_iter().filter(|r| r.last > r.first) {
        if let Some(spacing) = k.iter().position(|&v| v == run.sum) {
            return Err(PlanViolation::RunCollision {
                run_first: run.first,
                run_last: run.last,
                spacing,
                value: run.sum,
            });
        }
    }
    Ok(())
}

/// JSON form of a plan. Field names are fixed for exchange with other tools.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanDocument {
    pub f_c_hz: u64,
    pub gcd_hz: u64,
    pub r: u32,
    pub n: usize,
    pub spacings_gcd_units: Vec<u64>,
    pub tones_hz: Vec<f64>,
    pub bw_hz: u64,
}

impl From<FrequencyPlan> for PlanDocument {
    fn from(p: FrequencyPlan) -> Self {
        PlanDocument {
            f_c_hz: p.carrier_hz,
            gcd_hz: p.gcd_hz,
            r: p.spread,
            n: p.n_tones(),
            tones_hz: p.tones_hz(),
            bw_hz: p.bw_hz(),
            spacings_gcd_units: p.spacings,
        }
    }
}

impl TryFrom<PlanDocument> for FrequencyPlan {
    type Error = Error;

    fn try_from(d: PlanDocument) -> Result<Self> {
        let plan = FrequencyPlan::from_spacings(d.f_c_hz, d.gcd_hz, d.r, d.spacings_gcd_units)?;
        if plan.n_tones() != d.n || plan.bw_hz() != d.bw_hz {
            return Err(Error::config("plan document: n or bw_hz disagrees with spacings"));
        }
        let tones = plan.tones_hz();
        if tones.len() != d.tones_hz.len() || tones.iter().zip(&d.tones_hz).any(|(a, b)| a != b) {
            return Err(Error::config("plan document: tones_hz disagrees with spacings"));
        }
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FC: u64 = 2_450_000_000;
    const MHZ: u64 = 1_000_000;

    #[test]
    fn five_tone_plan() {
        let p = plan_frequencies(FC, 5, MHZ, 0).unwrap();
        assert_eq!(p.spacings_hz(), vec![MHZ, 2 * MHZ, 4 * MHZ, 5 * MHZ]);
        assert_eq!(p.tones_hz(), vec![2.444e9, 2.445e9, 2.447e9, 2.451e9, 2.456e9]);
        assert_eq!(p.bw_hz(), 12 * MHZ);
    }

    #[test]
    fn six_tone_plan() {
        let p = plan_frequencies(FC, 6, MHZ, 0).unwrap();
        assert_eq!(p.spacings(), &[1, 2, 4, 5, 8]);
        assert_eq!(p.bw_hz(), 20 * MHZ);
        assert_eq!(p.tones_hz(), vec![2.440e9, 2.441e9, 2.443e9, 2.447e9, 2.452e9, 2.460e9]);
    }

    #[test]
    fn two_tone_plan_sits_on_half_grid() {
        let p = plan_frequencies(FC, 2, MHZ, 0).unwrap();
        assert_eq!(p.spacings(), &[1]);
        assert_eq!(p.tones_hz(), vec![2.4495e9, 2.4505e9]);
        assert_eq!(p.bw_hz(), MHZ);
        assert_eq!(p.repetition_periods(), 2);
    }

    #[test]
    fn spread_advances_candidate() {
        // candidates 1 (taken), 3 (free) with a step of k1 + r = 2
        let p = plan_frequencies(FC, 3, MHZ, 1).unwrap();
        assert_eq!(p.spacings(), &[1, 3]);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(plan_frequencies(FC, 5, 3 * MHZ, 0), Err(Error::Config(_))));
        assert!(matches!(plan_frequencies(FC, 1, MHZ, 0), Err(Error::Config(_))));
        assert!(matches!(plan_frequencies(FC, 5, 0, 0), Err(Error::Config(_))));
        // 16 tones on a 100 MHz grid need 23 GHz of bandwidth
        assert!(matches!(plan_frequencies(FC, 16, 100 * MHZ, 0), Err(Error::Config(_))));
    }

    #[test]
    fn pair_difference_examples() {
        let p = FrequencyPlan::from_spacings(FC, MHZ, 0, vec![1]).unwrap();
        assert_eq!(pair_differences(&p), BTreeSet::from([1]));
        let p = FrequencyPlan::from_spacings(FC, MHZ, 0, vec![1, 2]).unwrap();
        assert_eq!(pair_differences(&p), BTreeSet::from([1, 2, 3]));
        let p = FrequencyPlan::from_spacings(FC, MHZ, 0, vec![1, 2, 4, 5]).unwrap();
        assert_eq!(
            pair_differences(&p),
            BTreeSet::from([1, 2, 3, 4, 5, 6, 7, 9, 11, 12])
        );
    }

    #[test]
    fn validation_reports() {
        assert_eq!(validate_spacings(&[1, 2, 4, 5]), Ok(()));
        assert_eq!(
            validate_spacings(&[1, 2, 3]),
            Err(PlanViolation::RunCollision {
                run_first: 0,
                run_last: 1,
                spacing: 2,
                value: 3
            })
        );
        assert_eq!(
            validate_spacings(&[1, 1]),
            Err(PlanViolation::DuplicateSpacing {
                first: 0,
                second: 1,
                value: 1
            })
        );
    }

    #[test]
    fn json_field_names() {
        let p = plan_frequencies(FC, 5, MHZ, 0).unwrap();
        let v = serde_json::to_value(&p).unwrap();
        assert_eq!(v["f_c_hz"], 2_450_000_000u64);
        assert_eq!(v["gcd_hz"], 1_000_000u64);
        assert_eq!(v["r"], 0);
        assert_eq!(v["n"], 5);
        assert_eq!(v["spacings_gcd_units"], serde_json::json!([1, 2, 4, 5]));
        assert_eq!(v["bw_hz"], 12_000_000u64);
        assert_eq!(v["tones_hz"][0], 2.444e9);
        let back: FrequencyPlan = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn tampered_document_is_rejected() {
        let p = plan_frequencies(FC, 5, MHZ, 0).unwrap();
        let mut v = serde_json::to_value(&p).unwrap();
        v["bw_hz"] = serde_json::json!(13_000_000u64);
        assert!(serde_json::from_value::<FrequencyPlan>(v).is_err());
    }
}
