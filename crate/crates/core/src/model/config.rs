use serde::{Deserialize, Serialize};

use super::{validate_kernel, validate_reactions, KernelSpec, ReactionPair};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileShape {
    /// `amplitude · (1 - (x/h0)^2)^+`: positive on `[0, h0)`, zero at `h0`.
    ScaledBump,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialProfile {
    pub shape: ProfileShape,
    pub amplitude: f64,
}

impl InitialProfile {
    pub fn bump(amplitude: f64) -> Self {
        Self { shape: ProfileShape::ScaledBump, amplitude }
    }

    pub fn constant(amplitude: f64) -> Self {
        Self { shape: ProfileShape::Constant, amplitude }
    }

    /// Value at `x` for an initial front at `h0`.
    pub fn eval(&self, x: f64, h0: f64) -> f64 {
        match self.shape {
            ProfileShape::ScaledBump => {
                let t = x / h0;
                self.amplitude * (1.0 - t * t).max(0.0)
            }
            ProfileShape::Constant => {
                if x <= h0 {
                    self.amplitude
                } else {
                    0.0
                }
            }
        }
    }

    pub fn sup(&self) -> f64 {
        self.amplitude
    }
}

/// Numerical controls. Fields left unset are derived from the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsConfig {
    /// Grid spacing; default `0.05 ·` the smaller kernel support radius.
    pub dx: Option<f64>,
    /// Right end of the grid; default 40 (enlarged where a critical length
    /// estimate requires it).
    pub l_max: Option<f64>,
    /// Time step; default the stability bound.
    pub dt: Option<f64>,
    /// Simulation horizon; default `50 / |γ_B|`.
    pub t_max: Option<f64>,
    /// Truncation length for half-line problems; default 5 kernel radii.
    pub halfline_trunc: Option<f64>,
    pub eig_tol: f64,
    pub eig_max_iter: usize,
    pub ss_tol: f64,
    pub ss_max_iter: usize,
    pub vanish_tol: f64,
    pub stagnation_hprime: f64,
    pub stagnation_steps: usize,
    /// Steps between persisted snapshots.
    pub snapshot_every: usize,
    /// `n · K` above which the FFT convolution path is used.
    pub fft_threshold: usize,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            dx: None,
            l_max: None,
            dt: None,
            t_max: None,
            halfline_trunc: None,
            eig_tol: 1e-10,
            eig_max_iter: 100_000,
            ss_tol: 1e-10,
            ss_max_iter: 2_000_000,
            vanish_tol: 1e-6,
            stagnation_hprime: 1e-8,
            stagnation_steps: 100,
            snapshot_every: 50,
            fft_threshold: 1_000_000,
        }
    }
}

/// Complete parameter set of the free-boundary system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub d1: f64,
    pub d2: f64,
    pub a: f64,
    pub b: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub h0: f64,
    pub kernel1: KernelSpec,
    pub kernel2: KernelSpec,
    pub reactions: ReactionPair,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_u: Option<InitialProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_v: Option<InitialProfile>,
    #[serde(default)]
    pub numerics: NumericsConfig,
}

impl ModelConfig {
    /// Reference parameter set: `d1 = d2 = 2`, `a = b = 1`, Monod
    /// `p = r = 2`, `q = s = 1`, unit triangle kernels, `μ1 = μ2 = 1`,
    /// `h0 = 1`.
    pub fn reference() -> Self {
        Self {
            d1: 2.0,
            d2: 2.0,
            a: 1.0,
            b: 1.0,
            mu1: 1.0,
            mu2: 1.0,
            h0: 1.0,
            kernel1: KernelSpec::Triangle { width: 1.0 },
            kernel2: KernelSpec::Triangle { width: 1.0 },
            reactions: ReactionPair::Monod { p: 2.0, q: 1.0, r: 2.0, s: 1.0 },
            init_u: None,
            init_v: None,
            numerics: NumericsConfig::default(),
        }
    }

    pub fn with_mu(mut self, mu1: f64, mu2: f64) -> Self {
        self.mu1 = mu1;
        self.mu2 = mu2;
        self
    }

    pub fn with_h0(mut self, h0: f64) -> Self {
        self.h0 = h0;
        self
    }

    pub fn with_dx(mut self, dx: f64) -> Self {
        self.numerics.dx = Some(dx);
        self
    }

    /// Checks parameter ranges and hypotheses (J) and (H).
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("d1", self.d1), ("d2", self.d2), ("a", self.a), ("b", self.b), ("h0", self.h0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::IllegalParams(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("mu1", self.mu1), ("mu2", self.mu2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::IllegalParams(format!("{name} must be nonnegative, got {v}")));
            }
        }
        for k in [&self.kernel1, &self.kernel2] {
            let rep = validate_kernel(k)?;
            if let Some(fail) = rep.first_failure() {
                return Err(Error::HypothesisViolated { clause: format!("(J) {}: {}", rep.subject, fail.clause) });
            }
        }
        validate_reactions(&self.reactions, self.a, self.b)?;
        for p in [self.init_u, self.init_v].into_iter().flatten() {
            if !(p.amplitude.is_finite() && p.amplitude > 0.0) {
                return Err(Error::IllegalParams(format!("initial amplitude must be positive, got {}", p.amplitude)));
            }
        }
        let n = &self.numerics;
        for (name, v) in [("dx", n.dx), ("l_max", n.l_max), ("dt", n.dt), ("t_max", n.t_max), ("halfline_trunc", n.halfline_trunc)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::IllegalParams(format!("numerics.{name} must be positive, got {v}")));
                }
            }
        }
        if !(n.eig_tol > 0.0 && n.ss_tol > 0.0 && n.vanish_tol > 0.0 && n.snapshot_every > 0) {
            return Err(Error::IllegalParams("numerics tolerances and cadence must be positive".into()));
        }
        Ok(())
    }

    /// `H'(0)`.
    pub fn h_slope(&self) -> f64 {
        self.reactions.h_prime(0.0)
    }

    /// `G'(0)`.
    pub fn g_slope(&self) -> f64 {
        self.reactions.g_prime(0.0)
    }

    pub fn r0(&self) -> f64 {
        self.h_slope() * self.g_slope() / (self.a * self.b)
    }

    pub fn rstar(&self) -> f64 {
        self.h_slope() * self.g_slope() / ((self.a + self.d1) * (self.b + self.d2))
    }

    /// Largest kernel support radius.
    pub fn max_support(&self) -> f64 {
        self.kernel1.support_radius().max(self.kernel2.support_radius())
    }

    pub fn dx(&self) -> f64 {
        self.numerics
            .dx
            .unwrap_or_else(|| 0.05 * self.kernel1.support_radius().min(self.kernel2.support_radius()))
    }

    pub fn l_max(&self) -> f64 {
        self.numerics.l_max.unwrap_or(40.0)
    }

    pub fn halfline_trunc(&self) -> f64 {
        self.numerics.halfline_trunc.unwrap_or(5.0 * self.max_support())
    }

    /// Initial `u`; the reference choice is a bump of height `u*/2` when a
    /// positive equilibrium exists and `0.5` otherwise.
    pub fn initial_u(&self) -> InitialProfile {
        self.init_u.unwrap_or_else(|| InitialProfile::bump(self.reference_amplitude().0))
    }

    pub fn initial_v(&self) -> InitialProfile {
        self.init_v.unwrap_or_else(|| InitialProfile::bump(self.reference_amplitude().1))
    }

    fn reference_amplitude(&self) -> (f64, f64) {
        if self.r0() > 1.0 {
            if let Ok((u, v)) = super::solve_equilibrium(self) {
                return (0.5 * u, 0.5 * v);
            }
        }
        (0.5, 0.5)
    }

    /// Explicit ceilings `(M1, M2)` of the solution: the initial sup or the
    /// saturation level of the source term, whichever is larger.
    pub fn ceilings(&self) -> (f64, f64) {
        (
            self.initial_u().sup().max(self.reactions.h_max() / self.a),
            self.initial_v().sup().max(self.reactions.g_max() / self.b),
        )
    }
}
