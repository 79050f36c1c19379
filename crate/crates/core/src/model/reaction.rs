use serde::{Deserialize, Serialize};

use super::ValidationReport;
use crate::error::{Error, Result};

/// Number of points of the derivative sign scans.
const SCAN_POINTS: usize = 4000;
/// The ẑ-clause scan covers `2^0 .. 2^20` times this reference level.
const ZHAT_REF: f64 = 1.0;
const ZHAT_OCTAVES: i32 = 20;

/// Reaction terms `H` (source of `u` driven by `v`) and `G` (source of `v`
/// driven by `u`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReactionPair {
    /// `H(v) = p v / (1 + q v)`, `G(u) = r u / (1 + s u)`.
    Monod { p: f64, q: f64, r: f64, s: f64 },
}

#[inline]
fn monod(k: f64, sat: f64, z: f64) -> f64 {
    k * z / (1.0 + sat * z)
}
#[inline]
fn monod_d1(k: f64, sat: f64, z: f64) -> f64 {
    let d = 1.0 + sat * z;
    k / (d * d)
}
#[inline]
fn monod_d2(k: f64, sat: f64, z: f64) -> f64 {
    let d = 1.0 + sat * z;
    -2.0 * k * sat / (d * d * d)
}

impl ReactionPair {
    pub fn check_params(&self) -> Result<()> {
        let ReactionPair::Monod { p, q, r, s } = *self;
        for (name, v) in [("p", p), ("q", q), ("r", r), ("s", s)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::IllegalParams(format!("Monod parameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn h(&self, v: f64) -> f64 {
        let ReactionPair::Monod { p, q, .. } = *self;
        monod(p, q, v)
    }
    pub fn g(&self, u: f64) -> f64 {
        let ReactionPair::Monod { r, s, .. } = *self;
        monod(r, s, u)
    }
    pub fn h_prime(&self, v: f64) -> f64 {
        let ReactionPair::Monod { p, q, .. } = *self;
        monod_d1(p, q, v)
    }
    pub fn g_prime(&self, u: f64) -> f64 {
        let ReactionPair::Monod { r, s, .. } = *self;
        monod_d1(r, s, u)
    }
    pub fn h_second(&self, v: f64) -> f64 {
        let ReactionPair::Monod { p, q, .. } = *self;
        monod_d2(p, q, v)
    }
    pub fn g_second(&self, u: f64) -> f64 {
        let ReactionPair::Monod { r, s, .. } = *self;
        monod_d2(r, s, u)
    }

    /// `sup H` (the saturation level).
    pub fn h_max(&self) -> f64 {
        let ReactionPair::Monod { p, q, .. } = *self;
        p / q
    }
    pub fn g_max(&self) -> f64 {
        let ReactionPair::Monod { r, s, .. } = *self;
        r / s
    }
}

/// Checks the five clauses of hypothesis (H) for the given decay rates.
///
/// Derivative signs are scanned on `[0, z_max]`, where `z_max` is the top of
/// the ẑ scan. Returns `HypothesisViolated` naming the first failing clause.
pub fn validate_reactions(rx: &ReactionPair, a: f64, b: f64) -> Result<ValidationReport> {
    rx.check_params()?;
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::IllegalParams(format!("decay rates must be positive, got a={a}, b={b}")));
    }
    let mut report = ValidationReport::new("reactions:monod");
    let z_max = ZHAT_REF * 2f64.powi(ZHAT_OCTAVES);

    let zero = rx.h(0.0).abs().max(rx.g(0.0).abs());
    report.push("H(0) = G(0) = 0", zero == 0.0, zero);

    let grid: Vec<f64> = (0..=SCAN_POINTS)
        .map(|i| z_max * (i as f64 / SCAN_POINTS as f64).powi(4))
        .collect();
    let min_slope = grid.iter().map(|&z| rx.h_prime(z).min(rx.g_prime(z))).fold(f64::INFINITY, f64::min);
    report.push("H', G' > 0 on [0, z_max]", min_slope > 0.0, (-min_slope).max(0.0));

    let max_curv = grid[1..]
        .iter()
        .map(|&z| rx.h_second(z).max(rx.g_second(z)))
        .fold(f64::NEG_INFINITY, f64::max);
    report.push("H'', G'' < 0 on (0, z_max]", max_curv < 0.0, max_curv.max(0.0));

    let witness = (0..=ZHAT_OCTAVES)
        .map(|k| ZHAT_REF * 2f64.powi(k))
        .find(|&z| rx.g(rx.h(z) / a) < b * z);
    report.push("G(H(z)/a) < b z for some z > 0", witness.is_some(), 0.0);
    report.witness = witness;

    if let Some(fail) = report.first_failure() {
        return Err(Error::HypothesisViolated { clause: fail.clause.clone() });
    }
    Ok(report)
}
