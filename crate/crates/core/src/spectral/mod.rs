//! Principal eigenvalue of the linearised cooperative operator
//! `L[φ] = (d1 P1[φ1], d2 P2[φ2]) + B φ` on `[0, l]`, the critical length
//! `ℓ*` where it changes sign, and the tent-function inequality used to
//! bound large-domain eigenvalues from below.

mod banded;

use serde::{Deserialize, Serialize};

use crate::discretization::{DiscreteOperator, Grid, Window};
use crate::error::{Error, Result};
use crate::model::{KernelSpec, ModelConfig};
use banded::Banded;

/// Target accuracy of the critical length bisection, on `|λ_p(ℓ*)|`.
pub const CRITLEN_TOL: f64 = 1e-6;
const MAX_REFACTORS: usize = 8;
const MAX_LOWER_HALVINGS: usize = 40;
const MAX_SHIFT_REPAIRS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    /// Power iteration on `(sI - L)^{-1}` with a Collatz–Wielandt shift.
    #[default]
    ShiftInvert,
    /// Power iteration on `L + σI`, `σ = max(d1 + a, d2 + b) + 1`.
    ShiftedPower,
}

#[derive(Debug, Clone)]
pub struct EigenSettings {
    pub method: EigenMethod,
    pub tol: f64,
    pub max_iter: usize,
    /// Left end of the interval; only enters through kernel arguments
    /// `x_i - x_j` of the assembled matrix.
    pub origin: f64,
    /// Positive start vector `(φ1, φ2)`; `(1, 1)` when absent.
    pub start: Option<(Vec<f64>, Vec<f64>)>,
}

impl EigenSettings {
    pub fn from_config(c: &ModelConfig) -> Self {
        Self {
            method: EigenMethod::default(),
            tol: c.numerics.eig_tol,
            max_iter: c.numerics.eig_max_iter,
            origin: 0.0,
            start: None,
        }
    }

    pub fn method(mut self, m: EigenMethod) -> Self {
        self.method = m;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    pub l: f64,
    pub lambda_p: f64,
    pub x: Vec<f64>,
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Discrete cooperative operator on one window.
#[derive(Debug, Clone)]
pub struct CooperativeOperator {
    pub window: Window,
    p1: DiscreteOperator,
    p2: DiscreteOperator,
    d1: f64,
    d2: f64,
    /// `B = [[-d1 - a, H'(0)], [G'(0), -d2 - b]]`.
    pub b: [[f64; 2]; 2],
}

/// Operator on `[0, l]` using the grid of `c`, with an exact right end.
pub fn assemble_operator(c: &ModelConfig, l: f64) -> Result<CooperativeOperator> {
    let grid = Grid::for_config(c)?;
    assemble_on_grid(c, &grid, l)
}

pub fn assemble_on_grid(c: &ModelConfig, grid: &Grid, l: f64) -> Result<CooperativeOperator> {
    let window = Window::exact(grid, l)?;
    Ok(CooperativeOperator::new(c, window))
}

impl CooperativeOperator {
    pub fn new(c: &ModelConfig, window: Window) -> Self {
        let t = c.numerics.fft_threshold;
        Self {
            window,
            p1: DiscreteOperator::new(c.kernel1, window.dx).with_fft_threshold(t),
            p2: DiscreteOperator::new(c.kernel2, window.dx).with_fft_threshold(t),
            d1: c.d1,
            d2: c.d2,
            b: [[-c.d1 - c.a, c.h_slope()], [c.g_slope(), -c.d2 - c.b]],
        }
    }

    /// Nodes per component.
    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn apply(&self, phi1: &[f64], phi2: &[f64], out1: &mut [f64], out2: &mut [f64]) {
        self.p1.apply(&self.window, phi1, out1);
        self.p2.apply(&self.window, phi2, out2);
        let b = self.b;
        for i in 0..phi1.len() {
            out1[i] = self.d1 * out1[i] + b[0][0] * phi1[i] + b[0][1] * phi2[i];
            out2[i] = self.d2 * out2[i] + b[1][0] * phi1[i] + b[1][1] * phi2[i];
        }
    }

    fn apply_interleaved(&self, z: &[f64], out: &mut [f64]) {
        let n = self.len();
        let (p1, p2): (Vec<f64>, Vec<f64>) = (0..n).map(|i| (z[2 * i], z[2 * i + 1])).unzip();
        let mut o1 = vec![0.0; n];
        let mut o2 = vec![0.0; n];
        self.apply(&p1, &p2, &mut o1, &mut o2);
        for i in 0..n {
            out[2 * i] = o1[i];
            out[2 * i + 1] = o2[i];
        }
    }

    /// Banded matrix of `L` with unknowns interleaved as `(φ1_i, φ2_i)`;
    /// kernel arguments are the differences of the nodes shifted by `origin`.
    fn assemble_banded(&self, origin: f64) -> Banded {
        let n = self.len();
        let reach = self.p1.half_width().max(self.p2.half_width()) + 2;
        let mut band = Banded::zeros(2 * n, 2 * reach + 1);
        let win = &self.window;
        let pos: Vec<f64> = win.positions().iter().map(|x| origin + x).collect();
        let (k1, k2) = (self.p1.kernel(), self.p2.kernel());
        for i in 0..n {
            let lo = i.saturating_sub(reach);
            let hi = (i + reach).min(n - 1);
            for j in lo..=hi {
                let d = pos[i] - pos[j];
                let q = win.weight(j);
                band.add(2 * i, 2 * j, self.d1 * k1.eval(d) * q);
                band.add(2 * i + 1, 2 * j + 1, self.d2 * k2.eval(d) * q);
            }
            band.add(2 * i, 2 * i, self.b[0][0]);
            band.add(2 * i, 2 * i + 1, self.b[0][1]);
            band.add(2 * i + 1, 2 * i, self.b[1][0]);
            band.add(2 * i + 1, 2 * i + 1, self.b[1][1]);
        }
        band
    }
}

/// Collatz–Wielandt bracket `(min_i (Lz)_i / z_i, max_i (Lz)_i / z_i)` of the
/// principal eigenvalue, valid for any strictly positive `z`.
pub fn collatz_wielandt_bounds(op: &CooperativeOperator, z1: &[f64], z2: &[f64]) -> (f64, f64) {
    let n = op.len();
    let mut o1 = vec![0.0; n];
    let mut o2 = vec![0.0; n];
    op.apply(z1, z2, &mut o1, &mut o2);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        for r in [o1[i] / z1[i], o2[i] / z2[i]] {
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    (lo, hi)
}

fn cw_interleaved(z: &[f64], lz: &[f64]) -> (f64, f64) {
    z.iter().zip(lz).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (a, b)| {
        let r = b / a;
        (lo.min(r), hi.max(r))
    })
}

fn normalise_sup(z: &mut [f64]) {
    let m = z.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for v in z.iter_mut() {
        *v /= m;
    }
}

/// Rayleigh quotient and residual `‖Lz - λz‖∞`.
fn rayleigh(z: &[f64], lz: &[f64]) -> (f64, f64) {
    let num: f64 = z.iter().zip(lz).map(|(a, b)| a * b).sum();
    let den: f64 = z.iter().map(|a| a * a).sum();
    let lam = num / den;
    let res = z.iter().zip(lz).map(|(a, b)| (b - lam * a).abs()).fold(0.0, f64::max);
    (lam, res)
}

/// Principal eigenpair on `[0, l]` with the settings of `c`.
pub fn principal_eigen(c: &ModelConfig, l: f64) -> Result<EigenResult> {
    if !(l > 0.0) {
        return Err(Error::IllegalParams(format!("domain length must be positive, got {l}")));
    }
    let op = assemble_operator(c, l)?;
    principal_eigen_with(&op, &EigenSettings::from_config(c))
}

pub fn principal_eigen_with(op: &CooperativeOperator, s: &EigenSettings) -> Result<EigenResult> {
    let n = op.len();
    let mut z = vec![1.0; 2 * n];
    if let Some((a, b)) = &s.start {
        if a.len() != n || b.len() != n || a.iter().chain(b).any(|v| !(*v > 0.0)) {
            return Err(Error::IllegalParams("start vector must be positive with one entry per node".into()));
        }
        for i in 0..n {
            z[2 * i] = a[i];
            z[2 * i + 1] = b[i];
        }
    }
    normalise_sup(&mut z);
    let (z, iterations) = match s.method {
        EigenMethod::ShiftInvert => shift_invert(op, s, z)?,
        EigenMethod::ShiftedPower => shifted_power(op, s, z)?,
    };
    let mut lz = vec![0.0; 2 * n];
    op.apply_interleaved(&z, &mut lz);
    let (lambda_p, residual) = rayleigh(&z, &lz);
    Ok(EigenResult {
        l: op.window.length(),
        lambda_p,
        x: op.window.positions(),
        phi1: z.iter().step_by(2).copied().collect(),
        phi2: z.iter().skip(1).step_by(2).copied().collect(),
        iterations,
        residual,
    })
}

fn shifted_power(op: &CooperativeOperator, s: &EigenSettings, mut z: Vec<f64>) -> Result<(Vec<f64>, usize)> {
    let sigma = (-op.b[0][0]).max(-op.b[1][1]) + 1.0;
    let mut lz = vec![0.0; z.len()];
    let mut res = f64::INFINITY;
    for it in 1..=s.max_iter {
        op.apply_interleaved(&z, &mut lz);
        for (a, b) in z.iter_mut().zip(&lz) {
            *a = b + sigma * *a;
        }
        normalise_sup(&mut z);
        op.apply_interleaved(&z, &mut lz);
        res = rayleigh(&z, &lz).1;
        if res <= s.tol {
            return Ok((z, it));
        }
    }
    Err(Error::NoConvergence { iterations: s.max_iter, residual: res })
}

fn shift_invert(op: &CooperativeOperator, s: &EigenSettings, mut z: Vec<f64>) -> Result<(Vec<f64>, usize)> {
    let l_band = op.assemble_banded(s.origin);
    let scale = 1.0 + op.b.iter().flatten().map(|v| v.abs()).sum::<f64>() + op.d1 + op.d2;
    let mut delta = 1e-9 * scale;

    let mut lz = vec![0.0; z.len()];
    l_band.matvec(&z, &mut lz);
    let (_, hi) = cw_interleaved(&z, &lz);
    let mut shift = hi + delta;
    let mut lu = factorised(&l_band, shift)?;
    let mut refactors = 0;
    let mut repairs = 0;
    let mut res = f64::INFINITY;

    let mut it = 0;
    while it < s.max_iter {
        it += 1;
        let mut y = z.clone();
        lu.solve(&mut y);
        if y.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            // shift fell onto or below the Perron root through rounding
            repairs += 1;
            if repairs > MAX_SHIFT_REPAIRS {
                return Err(Error::NoConvergence { iterations: it, residual: res });
            }
            delta *= 100.0;
            shift += delta;
            lu = factorised(&l_band, shift)?;
            continue;
        }
        z = y;
        normalise_sup(&mut z);
        l_band.matvec(&z, &mut lz);
        let (lam, r) = rayleigh(&z, &lz);
        res = r;
        if res <= s.tol {
            return Ok((z, it));
        }
        let (_, hi) = cw_interleaved(&z, &lz);
        let candidate = hi + delta;
        if refactors < MAX_REFACTORS && shift - lam > 4.0 * (candidate - lam) {
            refactors += 1;
            shift = candidate;
            lu = factorised(&l_band, shift)?;
        }
    }
    Err(Error::NoConvergence { iterations: s.max_iter, residual: res })
}

fn factorised(l_band: &Banded, shift: f64) -> Result<Banded> {
    let mut m = l_band.shifted_negation(shift);
    m.factor().map_err(|row| Error::NoConvergence { iterations: 0, residual: row as f64 })?;
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub l: f64,
    pub lambda_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalLength {
    pub ell_star: f64,
    /// `λ_p(ℓ*)` at the returned length.
    pub lambda_at: f64,
    /// Right end of the bracket actually used.
    pub l_max: f64,
    pub trace: Vec<BisectionStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CriticalLengthOutcome {
    Found(CriticalLength),
    /// `λ_p` has one sign for every `l` (`R* >= 1` or `R0 <= 1`).
    NotApplicable { r0: f64, rstar: f64 },
}

impl CriticalLengthOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            CriticalLengthOutcome::Found(cl) => Some(cl.ell_star),
            CriticalLengthOutcome::NotApplicable { .. } => None,
        }
    }
}

/// Root of `l ↦ λ_p(l)` by bisection on `[dx, L_max]`; `L_max` is doubled
/// once if the bracket does not change sign, and the lower end is halved
/// (sub-cell windows) while `λ_p` stays nonnegative there.
pub fn critical_length(c: &ModelConfig) -> Result<CriticalLengthOutcome> {
    let (r0, rstar) = (c.r0(), c.rstar());
    if !(rstar < 1.0 && r0 > 1.0) {
        return Ok(CriticalLengthOutcome::NotApplicable { r0, rstar });
    }
    let settings = EigenSettings::from_config(c);
    let dx = c.dx();
    let mut l_max = c.l_max();
    let mut trace = Vec::new();
    let mut grid = Grid::new(dx, l_max)?;
    let eval = |grid: &Grid, l: f64, trace: &mut Vec<BisectionStep>| -> Result<f64> {
        let op = assemble_on_grid(c, grid, l)?;
        let lam = principal_eigen_with(&op, &settings)?.lambda_p;
        trace.push(BisectionStep { l, lambda_p: lam });
        Ok(lam)
    };

    let mut hi = grid.l_max();
    let mut f_hi = eval(&grid, hi, &mut trace)?;
    if f_hi <= 0.0 {
        l_max *= 2.0;
        grid = Grid::new(dx, l_max)?;
        hi = grid.l_max();
        f_hi = eval(&grid, hi, &mut trace)?;
        if f_hi <= 0.0 {
            return Err(Error::BracketFailure(format!("λ_p({hi}) = {f_hi:e} <= 0; enlarge L_max")));
        }
    }
    let mut lo = dx;
    let mut f_lo = eval(&grid, lo, &mut trace)?;
    let mut halvings = 0;
    while f_lo >= 0.0 {
        if halvings == MAX_LOWER_HALVINGS {
            return Err(Error::BracketFailure(format!("λ_p({lo}) = {f_lo:e} >= 0")));
        }
        hi = lo;
        f_hi = f_lo;
        lo *= 0.5;
        f_lo = eval(&grid, lo, &mut trace)?;
        halvings += 1;
    }
    let mut best = if -f_lo < f_hi { (lo, f_lo) } else { (hi, f_hi) };
    for _ in 0..200 {
        if best.1.abs() <= CRITLEN_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = eval(&grid, mid, &mut trace)?;
        if f.abs() < best.1.abs() {
            best = (mid, f);
        }
        if f < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CriticalLengthOutcome::Found(CriticalLength { ell_star: best.0, lambda_at: best.1, l_max: grid.l_max(), trace }))
}

/// Grid spacing used by [`tent_inequality_check`]: 1/20 of the support radius.
pub fn tent_default_dx(k: &KernelSpec) -> f64 {
    0.05 * k.support_radius()
}

/// Whether `∫ J(x - y) ξ(y) dy >= (1 - eps) ξ(x)` with `ξ(x) = l - |x|` holds
/// at every node of `[-l, l]` under trapezoid quadrature.
pub fn tent_inequality_check(k: &KernelSpec, eps: f64, l: f64) -> bool {
    tent_inequality_check_with(k, eps, l, tent_default_dx(k))
}

pub fn tent_inequality_check_with(k: &KernelSpec, eps: f64, l: f64, dx: f64) -> bool {
    tent_margin(k, eps, l, dx) >= 0.0
}

/// Smallest nodal value of `∫ J(x - y) ξ(y) dy - (1 - eps) ξ(x)`.
pub fn tent_margin(k: &KernelSpec, eps: f64, l: f64, dx: f64) -> f64 {
    let cells = ((2.0 * l / dx).ceil() as usize).max(2);
    let h = 2.0 * l / cells as f64;
    let x: Vec<f64> = (0..=cells).map(|i| -l + i as f64 * h).collect();
    let xi: Vec<f64> = x.iter().map(|v| l - v.abs()).collect();
    let reach = (k.support_radius() / h).ceil() as usize + 1;
    let mut margin = f64::INFINITY;
    for i in 0..=cells {
        let lo = i.saturating_sub(reach);
        let hi = (i + reach).min(cells);
        let mut acc = 0.0;
        for j in lo..=hi {
            let q = if j == 0 || j == cells { 0.5 * h } else { h };
            acc += k.eval(x[i] - x[j]) * xi[j] * q;
        }
        margin = margin.min(acc - (1.0 - eps) * xi[i]);
    }
    margin
}
