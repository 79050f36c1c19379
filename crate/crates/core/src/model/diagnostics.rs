use serde::{Deserialize, Serialize};

use super::{ModelConfig, ReactionPair};
use crate::error::{Error, Result};

/// First point of the equilibrium bracket scan.
const EQ_SCAN_START: f64 = 1e-6;
/// Absolute bisection tolerance on `v*`.
const EQ_BISECT_TOL: f64 = 1e-13;
const EQ_SCAN_DOUBLINGS: usize = 200;

/// Closed-form scalar quantities of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarDiagnostics {
    pub r0: f64,
    pub rstar: f64,
    /// Principal eigenvalue of the reaction matrix `A` (the large-domain limit).
    pub gamma_a: f64,
    /// Principal eigenvalue of `B` (the small-domain limit).
    pub gamma_b: f64,
    pub theta_a: f64,
    pub theta_b: f64,
    pub ustar: Option<f64>,
    pub vstar: Option<f64>,
}

pub fn scalar_diagnostics(c: &ModelConfig) -> ScalarDiagnostics {
    let (hp, gp) = (c.h_slope(), c.g_slope());
    let (a, b, d1, d2) = (c.a, c.b, c.d1, c.d2);
    let gamma_a = 0.5 * (-a - b + ((a - b).powi(2) + 4.0 * hp * gp).sqrt());
    let gamma_b = 0.5 * (-a - d1 - b - d2 + ((a + d1 - b - d2).powi(2) + 4.0 * hp * gp).sqrt());
    let eq = if c.r0() > 1.0 { solve_equilibrium(c).ok() } else { None };
    ScalarDiagnostics {
        r0: c.r0(),
        rstar: c.rstar(),
        gamma_a,
        gamma_b,
        theta_a: hp / (gamma_a + a),
        theta_b: hp / (gamma_b + d1 + a),
        ustar: eq.map(|e| e.0),
        vstar: eq.map(|e| e.1),
    }
}

/// Positive constant equilibrium `(u*, v*)` with `a u* = H(v*)`,
/// `b v* = G(u*)`.
pub fn solve_equilibrium(c: &ModelConfig) -> Result<(f64, f64)> {
    solve_equilibrium_with(&c.reactions, c.a, c.b, EQ_SCAN_START)
}

/// Root of `F(v) = G(H(v)/a) - b v` by a doubling scan from `scan_start`
/// followed by bisection; `u* = H(v*)/a`.
pub fn solve_equilibrium_with(rx: &ReactionPair, a: f64, b: f64, scan_start: f64) -> Result<(f64, f64)> {
    let r0 = rx.h_prime(0.0) * rx.g_prime(0.0) / (a * b);
    if r0 <= 1.0 {
        return Err(Error::NoPositiveEquilibrium { r0 });
    }
    let f = |v: f64| rx.g(rx.h(v) / a) - b * v;

    // F > 0 just right of 0 when R0 > 1; walk the start down if the root is
    // smaller than the first scan point.
    let mut lo = scan_start;
    while f(lo) <= 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::BracketFailure("F(v) <= 0 arbitrarily close to 0".into()));
        }
    }
    let mut hi = lo;
    let mut found = false;
    for _ in 0..EQ_SCAN_DOUBLINGS {
        hi *= 2.0;
        if f(hi) <= 0.0 {
            found = true;
            break;
        }
        lo = hi;
    }
    if !found {
        return Err(Error::BracketFailure(format!("no sign change of G(H(v)/a) - b v up to v = {hi:e}")));
    }
    while hi - lo > EQ_BISECT_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let v = 0.5 * (lo + hi);
    Ok((rx.h(v) / a, v))
}
