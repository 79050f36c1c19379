use serde::{Deserialize, Serialize};

use super::ValidationReport;
use crate::error::{Error, Result};

/// Tolerance on the normalisation and tail identities of a kernel.
pub const KERNEL_QTOL: f64 = 1e-8;

/// Cut-off of the truncated Gaussian, in units of sigma.
const GAUSS_CUT: f64 = 4.0;

/// An even probability density with compact support and a closed-form tail.
///
/// All families are normalised analytically, so `∫ eval = 1` holds up to
/// rounding and `tail(s) = ∫_s^∞ eval` is exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `(1/w) max(0, 1 - |x|/w)`.
    Triangle { width: f64 },
    /// Gaussian cut at ±4σ, shifted down by its edge value so the density is
    /// continuous, then renormalised.
    TruncatedGaussian { sigma: f64 },
    /// `(15/16R) (1 - (x/R)^2)^2` on `[-R, R]`.
    CompactBump { radius: f64 },
}

impl KernelSpec {
    pub fn family_name(&self) -> &'static str {
        match self {
            KernelSpec::Triangle { .. } => "triangle",
            KernelSpec::TruncatedGaussian { .. } => "truncated_gaussian",
            KernelSpec::CompactBump { .. } => "compact_bump",
        }
    }

    fn scale(&self) -> f64 {
        match *self {
            KernelSpec::Triangle { width } => width,
            KernelSpec::TruncatedGaussian { sigma } => sigma,
            KernelSpec::CompactBump { radius } => radius,
        }
    }

    /// Rejects nonpositive or non-finite family parameters.
    pub fn check_params(&self) -> Result<()> {
        let s = self.scale();
        if s.is_finite() && s > 0.0 {
            Ok(())
        } else {
            Err(Error::IllegalParams(format!(
                "{} kernel parameter must be positive and finite, got {s}",
                self.family_name()
            )))
        }
    }

    /// Half-width of the support: `eval(x) = 0` for `|x| > support_radius()`.
    pub fn support_radius(&self) -> f64 {
        match *self {
            KernelSpec::Triangle { width } => width,
            KernelSpec::TruncatedGaussian { sigma } => GAUSS_CUT * sigma,
            KernelSpec::CompactBump { radius } => radius,
        }
    }

    /// Density value (1/length).
    pub fn eval(&self, x: f64) -> f64 {
        let ax = x.abs();
        match *self {
            KernelSpec::Triangle { width } => {
                if ax >= width {
                    0.0
                } else {
                    (1.0 - ax / width) / width
                }
            }
            KernelSpec::TruncatedGaussian { sigma } => {
                if ax >= GAUSS_CUT * sigma {
                    0.0
                } else {
                    let t = ax / sigma;
                    ((-0.5 * t * t).exp() - gauss_floor()) / gauss_norm(sigma)
                }
            }
            KernelSpec::CompactBump { radius } => {
                if ax >= radius {
                    0.0
                } else {
                    let t = ax / radius;
                    let w = 1.0 - t * t;
                    15.0 / (16.0 * radius) * w * w
                }
            }
        }
    }

    /// Mass of the kernel in `[s, ∞)`.
    pub fn tail(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 1.0 - self.upper_tail(-s);
        }
        self.upper_tail(s)
    }

    fn upper_tail(&self, s: f64) -> f64 {
        debug_assert!(s >= 0.0);
        let r = self.support_radius();
        if s >= r {
            return 0.0;
        }
        match *self {
            KernelSpec::Triangle { width } => {
                let t = 1.0 - s / width;
                0.5 * t * t
            }
            KernelSpec::TruncatedGaussian { sigma } => {
                let sqrt2 = std::f64::consts::SQRT_2;
                let erf_part = sigma
                    * (std::f64::consts::PI / 2.0).sqrt()
                    * (libm::erf(GAUSS_CUT / sqrt2) - libm::erf(s / (sigma * sqrt2)));
                let floor_part = gauss_floor() * (GAUSS_CUT * sigma - s);
                (erf_part - floor_part) / gauss_norm(sigma)
            }
            KernelSpec::CompactBump { radius } => {
                let t = s / radius;
                let t3 = t * t * t;
                0.5 - 15.0 / 16.0 * (t - 2.0 * t3 / 3.0 + t3 * t * t / 5.0)
            }
        }
    }
}

fn gauss_floor() -> f64 {
    (-0.5 * GAUSS_CUT * GAUSS_CUT).exp()
}

/// Integral over [-4σ, 4σ] of the shifted Gaussian bump.
fn gauss_norm(sigma: f64) -> f64 {
    let sqrt2 = std::f64::consts::SQRT_2;
    sigma * (2.0 * std::f64::consts::PI).sqrt() * libm::erf(GAUSS_CUT / sqrt2)
        - 2.0 * GAUSS_CUT * sigma * gauss_floor()
}

/// Composite Simpson rule on `[lo, hi]` with `panels` (even) subintervals.
pub(crate) fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, panels: usize) -> f64 {
    debug_assert!(panels.is_multiple_of(2));
    let h = (hi - lo) / panels as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

/// Checks every clause of hypothesis (J) on the kernel.
///
/// Evenness, positivity at the origin and nonnegativity are sampled on a
/// dense grid over the support; the unit mass is measured with a Simpson rule
/// whose panel boundaries contain the kinks of every family; the tail is
/// checked against its own identities and against the quadrature.
pub fn validate_kernel(k: &KernelSpec) -> Result<ValidationReport> {
    k.check_params()?;
    let mut report = ValidationReport::new(format!("kernel:{}", k.family_name()));
    let r = k.support_radius();
    let samples: Vec<f64> = (0..=2000).map(|i| -1.5 * r + 3.0 * r * i as f64 / 2000.0).collect();

    let j0 = k.eval(0.0);
    report.push("J(0) > 0", j0 > 0.0, if j0 > 0.0 { 0.0 } else { -j0 });

    let min_val = samples.iter().map(|&x| k.eval(x)).fold(f64::INFINITY, f64::min);
    report.push("J >= 0", min_val >= 0.0, (-min_val).max(0.0));

    let asym = samples.iter().map(|&x| (k.eval(x) - k.eval(-x)).abs()).fold(0.0, f64::max);
    report.push("J even", asym <= KERNEL_QTOL, asym);

    let mass = simpson(|x| k.eval(x), -r, r, 4096);
    let mass_err = (mass - 1.0).abs();
    report.push("integral of J = 1", mass_err <= KERNEL_QTOL, mass_err);

    let t0_err = (k.tail(0.0) - 0.5).abs();
    report.push("tail(0) = 1/2", t0_err <= KERNEL_QTOL, t0_err);

    let mut rise = 0.0_f64;
    let mut sym = 0.0_f64;
    let mut prev = k.tail(samples[0]);
    for &s in &samples[1..] {
        let t = k.tail(s);
        rise = rise.max(t - prev);
        prev = t;
        sym = sym.max((k.tail(s) + k.tail(-s) - 1.0).abs());
    }
    report.push("tail nonincreasing", rise <= KERNEL_QTOL, rise.max(0.0));
    report.push("tail(s) + tail(-s) = 1", sym <= KERNEL_QTOL, sym);

    let quad_err = [0.1, 0.25, 0.5, 0.75, 0.9]
        .iter()
        .map(|&frac| {
            let s = frac * r;
            (simpson(|x| k.eval(x), s, r, 2048) - k.tail(s)).abs()
        })
        .fold(0.0, f64::max);
    report.push("tail matches quadrature of J", quad_err <= KERNEL_QTOL, quad_err);

    Ok(report)
}
