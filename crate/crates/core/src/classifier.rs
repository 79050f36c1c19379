//! Spreading/vanishing decisions with auditable certificates, the explicit
//! bound on the limiting front in the vanishing case, and bisection for the
//! threshold expansion rate.

use serde::{Deserialize, Serialize};

use crate::dynamics::{default_t_max, dt_stab, resolve_dt, run_free_boundary_with_dt, ClassifierHooks, TerminalStatus, Trajectory};
use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::spectral::{critical_length, CriticalLengthOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Spreading,
    Vanishing,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Certificate {
    R0Subcritical,
    RstarSupercritical,
    FrontCrossedCritical,
    InitialDomainSupercritical,
    Stagnated,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationDiagnostics {
    pub r0: f64,
    pub rstar: f64,
    pub ell_star: Option<f64>,
    pub h_final: Option<f64>,
    pub sup_final: Option<f64>,
    pub vanishing_bound: Option<f64>,
    pub t_final: Option<f64>,
    pub steps: Option<usize>,
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub certificate: Certificate,
    pub diagnostics: ClassificationDiagnostics,
}

/// `h0 + ∫_0^{h0} (u0 + H'(0)/b v0) / min(d1/μ1, H'(0) d2/(b μ2))`; a ratio
/// whose `μ` is zero is left out of the minimum.
pub fn vanishing_bound(c: &ModelConfig) -> Result<f64> {
    if c.r0() > 1.0 {
        return Err(Error::PreconditionFailed(format!("vanishing bound needs R0 <= 1, got {}", c.r0())));
    }
    let hp = c.h_slope();
    let mut ratio = f64::INFINITY;
    if c.mu1 > 0.0 {
        ratio = ratio.min(c.d1 / c.mu1);
    }
    if c.mu2 > 0.0 {
        ratio = ratio.min(hp * c.d2 / (c.b * c.mu2));
    }
    let cells = ((c.h0 / c.dx()).ceil() as usize).max(1);
    let step = c.h0 / cells as f64;
    let (pu, pv) = (c.initial_u(), c.initial_v());
    let mass: f64 = (0..=cells)
        .map(|i| {
            let x = i as f64 * step;
            let w = if i == 0 || i == cells { 0.5 } else { 1.0 };
            w * (pu.eval(x, c.h0) + hp / c.b * pv.eval(x, c.h0))
        })
        .sum::<f64>()
        * step;
    Ok(c.h0 + mass / ratio)
}

/// Decision cascade with the horizon `t_max` for the simulation stage.
pub fn classify(c: &ModelConfig, t_max: f64) -> Result<Classification> {
    let ell = critical_length(c)?;
    Ok(classify_run(c, t_max, None, &ell)?.0)
}

/// [`classify`] with an optional fixed step and a precomputed critical
/// length; also returns the simulated trajectory when one was run.
pub fn classify_run(
    c: &ModelConfig,
    t_max: f64,
    dt: Option<f64>,
    ell: &CriticalLengthOutcome,
) -> Result<(Classification, Option<Trajectory>)> {
    c.validate()?;
    let mut diag = ClassificationDiagnostics {
        r0: c.r0(),
        rstar: c.rstar(),
        ell_star: ell.value(),
        h_final: None,
        sup_final: None,
        vanishing_bound: None,
        t_final: None,
        steps: None,
        dt: None,
    };
    let simulate = |ell_star: Option<f64>, diag: &mut ClassificationDiagnostics| -> Result<Trajectory> {
        let mut sim = c.clone();
        if let Some(e) = ell_star {
            let need = 2.0 * e + 4.0 * c.max_support();
            if sim.l_max() < need {
                sim.numerics.l_max = Some(need);
            }
        }
        let step = match dt {
            Some(d) => d,
            None => resolve_dt(&sim)?,
        };
        let mut hooks = ClassifierHooks::new(&sim, ell_star);
        let tr = run_free_boundary_with_dt(&sim, t_max, step, &mut hooks)?;
        diag.h_final = Some(tr.final_state.h);
        diag.sup_final = Some(tr.final_state.sup_sum());
        diag.t_final = Some(tr.final_state.t);
        diag.steps = Some(tr.steps());
        diag.dt = Some(step);
        Ok(tr)
    };

    if c.r0() <= 1.0 {
        diag.vanishing_bound = Some(vanishing_bound(c)?);
        let tr = simulate(None, &mut diag)?;
        let out = Classification { verdict: Verdict::Vanishing, certificate: Certificate::R0Subcritical, diagnostics: diag };
        return Ok((out, Some(tr)));
    }
    if c.rstar() >= 1.0 {
        let out = Classification { verdict: Verdict::Spreading, certificate: Certificate::RstarSupercritical, diagnostics: diag };
        return Ok((out, None));
    }
    let ell_star = ell
        .value()
        .ok_or_else(|| Error::PreconditionFailed("critical length missing for R* < 1 < R0".into()))?;
    if c.h0 >= ell_star {
        let out = Classification {
            verdict: Verdict::Spreading,
            certificate: Certificate::InitialDomainSupercritical,
            diagnostics: diag,
        };
        return Ok((out, None));
    }
    let tr = simulate(Some(ell_star), &mut diag)?;
    let (verdict, certificate) = match tr.status {
        TerminalStatus::FrontCrossedCritical => (Verdict::Spreading, Certificate::FrontCrossedCritical),
        TerminalStatus::Stagnated => (Verdict::Vanishing, Certificate::Stagnated),
        TerminalStatus::ReachedTmax | TerminalStatus::GridExhausted => (Verdict::Undetermined, Certificate::Timeout),
    };
    Ok((Classification { verdict, certificate, diagnostics: diag }, Some(tr)))
}

/// Monotone map `μ1 ↦ μ2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MuMap {
    Identity,
    Linear { k: f64 },
}

impl MuMap {
    pub fn eval(&self, mu1: f64) -> f64 {
        match *self {
            MuMap::Identity => mu1,
            MuMap::Linear { k } => k * mu1,
        }
    }
}

/// Stopping rule on the width of the threshold bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Tolerance {
    Absolute(f64),
    /// Width at most this fraction of the upper end.
    Relative(f64),
}

impl Tolerance {
    fn satisfied(&self, lo: f64, hi: f64) -> bool {
        match *self {
            Tolerance::Absolute(t) => hi - lo <= t,
            Tolerance::Relative(t) => hi - lo <= t * hi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub mu1: f64,
    pub mu2: f64,
    pub dt: f64,
    pub verdict: Verdict,
    pub certificate: Certificate,
    pub h_final: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalMu {
    pub mu_lower: f64,
    pub mu_upper: f64,
    pub verdict_lower: Verdict,
    pub verdict_upper: Verdict,
    /// Step shared by every bisection probe.
    pub dt: f64,
    pub t_max: f64,
    pub probes: Vec<Probe>,
}

const BRACKET_EXPANSIONS: usize = 40;

/// Bracket `[μ1⁻, μ1⁺]` of the threshold with `μ2 = f(μ1)`; undetermined
/// probes count as vanishing.
pub fn critical_mu(c: &ModelConfig, f: MuMap, tol: Tolerance, t_max: Option<f64>) -> Result<CriticalMu> {
    c.validate()?;
    if !(c.rstar() < 1.0 && c.r0() > 1.0) {
        return Err(Error::PreconditionFailed(format!("needs R* < 1 < R0, got R* = {}, R0 = {}", c.rstar(), c.r0())));
    }
    let ell = critical_length(c)?;
    let ell_star = ell.value().unwrap_or(f64::INFINITY);
    if c.h0 >= ell_star {
        return Err(Error::PreconditionFailed(format!("h0 = {} >= ℓ* = {ell_star}", c.h0)));
    }
    let t_max = t_max.unwrap_or_else(|| default_t_max(c));
    let at = |mu1: f64| c.clone().with_mu(mu1, f.eval(mu1));
    let mut probes = Vec::new();
    let probe = |mu1: f64, dt: Option<f64>, probes: &mut Vec<Probe>| -> Result<bool> {
        let cfg = at(mu1);
        let step = dt.unwrap_or_else(|| dt_stab(&cfg));
        let (cl, _) = classify_run(&cfg, t_max, Some(step), &ell)?;
        probes.push(Probe {
            mu1,
            mu2: cfg.mu2,
            dt: step,
            verdict: cl.verdict,
            certificate: cl.certificate,
            h_final: cl.diagnostics.h_final,
        });
        Ok(cl.verdict == Verdict::Spreading)
    };

    let mut lo = 0.1;
    let mut hi = 1.0;
    let mut dt = None;
    for round in 0..4 {
        let mut n = 0;
        while probe(lo, dt, &mut probes)? {
            lo /= 4.0;
            n += 1;
            if n > BRACKET_EXPANSIONS {
                return Err(Error::NoBracket(format!("spreading down to μ1 = {lo:e}")));
            }
        }
        n = 0;
        while !probe(hi, dt, &mut probes)? {
            lo = lo.max(hi);
            hi *= 4.0;
            n += 1;
            if n > BRACKET_EXPANSIONS {
                return Err(Error::NoBracket(format!("no spreading up to μ1 = {hi:e}")));
            }
        }
        let fixed = dt_stab(&at(hi));
        if dt == Some(fixed) {
            break;
        }
        if round == 3 {
            return Err(Error::NoBracket("bracket did not settle under a common step".into()));
        }
        dt = Some(fixed);
    }
    let dt = dt.expect("set in the bracketing loop");

    while !tol.satisfied(lo, hi) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if probe(mid, Some(dt), &mut probes)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let verdict_of = |mu: f64| {
        probes
            .iter()
            .rev()
            .find(|p| p.mu1 == mu && p.dt == dt)
            .map(|p| p.verdict)
            .unwrap_or(Verdict::Undetermined)
    };
    Ok(CriticalMu {
        mu_lower: lo,
        mu_upper: hi,
        verdict_lower: verdict_of(lo),
        verdict_upper: verdict_of(hi),
        dt,
        t_max,
        probes,
    })
}
