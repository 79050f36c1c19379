//! Uniform-grid quadrature of the dispersal integrals.
//!
//! Integrals `∫_0^l J(x - y) f(y) dy` are replaced by trapezoid sums over the
//! nodes of a [`Window`]. On a grid-aligned window the sum is a banded
//! Toeplitz product with row weights `w_k = J(k dx) dx`, evaluated either
//! directly or through an FFT convolution. A window whose length is not a
//! multiple of `dx` carries one extra node at `l` that closes a short last
//! cell, which keeps every quantity continuous in `l`.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::model::{KernelSpec, ModelConfig};

/// Relative size below which a partial last cell is dropped.
const TAIL_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub dx: f64,
    pub n_max: usize,
}

impl Grid {
    /// Grid with spacing `dx` whose last node sits at or beyond `l_max`.
    pub fn new(dx: f64, l_max: f64) -> Result<Self> {
        if !(dx.is_finite() && dx > 0.0 && l_max.is_finite() && l_max > 0.0) {
            return Err(Error::IllegalParams(format!("grid needs dx > 0 and L_max > 0, got {dx}, {l_max}")));
        }
        let n_max = (l_max / dx - 1e-9).ceil() as usize + 1;
        Ok(Self { dx, n_max })
    }

    pub fn for_config(c: &ModelConfig) -> Result<Self> {
        Self::new(c.dx(), c.l_max())
    }

    pub fn l_max(&self) -> f64 {
        (self.n_max - 1) as f64 * self.dx
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    /// Active index of a domain `[0, l]`: `round(l / dx)`.
    pub fn index_of(&self, l: f64) -> usize {
        (l / self.dx).round().max(0.0) as usize
    }
}

/// Quadrature nodes and trapezoid weights on `[0, l]`.
///
/// Nodes `0..=m` are the grid nodes `i dx`; when `tail > 0` node `m + 1`
/// sits at `l = m dx + tail`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub dx: f64,
    pub m: usize,
    pub tail: f64,
}

impl Window {
    /// Window whose right end is snapped to the nearest grid node.
    pub fn snapped(grid: &Grid, l: f64) -> Result<Self> {
        let m = grid.index_of(l);
        if m >= grid.n_max {
            return Err(Error::DomainExceedsGrid { needed: m + 1, available: grid.n_max });
        }
        Ok(Self { dx: grid.dx, m, tail: 0.0 })
    }

    /// Window ending exactly at `l`, with a partial last cell if needed.
    pub fn exact(grid: &Grid, l: f64) -> Result<Self> {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::IllegalParams(format!("domain length must be positive, got {l}")));
        }
        let dx = grid.dx;
        let mut m = (l / dx).floor() as usize;
        let mut tail = l - m as f64 * dx;
        if tail > dx * (1.0 - TAIL_SNAP) {
            m += 1;
            tail = 0.0;
        } else if tail < dx * TAIL_SNAP {
            tail = 0.0;
        }
        let needed = m + 1 + usize::from(tail > 0.0);
        if needed > grid.n_max {
            return Err(Error::DomainExceedsGrid { needed, available: grid.n_max });
        }
        Ok(Self { dx, m, tail })
    }

    pub fn has_tail(&self) -> bool {
        self.tail > 0.0
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.m + 1 + usize::from(self.has_tail())
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn length(&self) -> f64 {
        self.m as f64 * self.dx + self.tail
    }

    pub fn position(&self, i: usize) -> f64 {
        if i <= self.m {
            i as f64 * self.dx
        } else {
            self.length()
        }
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.position(i)).collect()
    }

    /// Trapezoid weights (units of length): half the adjacent cell lengths.
    pub fn weight(&self, j: usize) -> f64 {
        let cell = |k: usize| -> f64 {
            // length of cell k = [node k, node k+1]
            if k < self.m {
                self.dx
            } else if k == self.m {
                self.tail
            } else {
                0.0
            }
        };
        let left = if j == 0 { 0.0 } else { cell(j - 1) };
        0.5 * (left + cell(j))
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.weight(j)).collect()
    }
}

/// Quadrature of `f ↦ ∫ J(x - y) f(y) dy` for one kernel on a fixed spacing.
#[derive(Clone)]
pub struct DiscreteOperator {
    kernel: KernelSpec,
    dx: f64,
    /// Largest `k` with `J(k dx)` inside the support.
    half_width: usize,
    /// `w[k + K] = J(k dx) dx` for `|k| <= K`.
    row: Vec<f64>,
    fft_threshold: usize,
}

impl std::fmt::Debug for DiscreteOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscreteOperator")
            .field("kernel", &self.kernel)
            .field("dx", &self.dx)
            .field("half_width", &self.half_width)
            .finish()
    }
}

impl DiscreteOperator {
    pub fn new(kernel: KernelSpec, dx: f64) -> Self {
        let half_width = (kernel.support_radius() / dx + 1e-9).floor() as usize;
        let row = (-(half_width as isize)..=half_width as isize)
            .map(|k| kernel.eval(k as f64 * dx) * dx)
            .collect();
        Self { kernel, dx, half_width, row, fft_threshold: 1_000_000 }
    }

    pub fn with_fft_threshold(mut self, threshold: usize) -> Self {
        self.fft_threshold = threshold;
        self
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Row weights `w_k`, `k = -K..=K`.
    pub fn row_weights(&self) -> &[f64] {
        &self.row
    }

    fn w(&self, k: isize) -> f64 {
        let kk = self.half_width as isize;
        if k.abs() > kk {
            0.0
        } else {
            self.row[(k + kk) as usize]
        }
    }

    /// Matrix entry `J(x_i - x_j) q_j` of the quadrature on `win`.
    pub fn entry(&self, win: &Window, i: usize, j: usize) -> f64 {
        if i <= win.m && j <= win.m {
            self.w(i as isize - j as isize) * win.weight(j) / self.dx
        } else {
            self.kernel.eval(win.position(i) - win.position(j)) * win.weight(j)
        }
    }

    /// Index half-bandwidth of the quadrature matrix on any window.
    pub fn bandwidth(&self) -> usize {
        self.half_width + 1
    }

    /// `g_i = Σ_j J(x_i - x_j) q_j f_j` on the nodes of `win`, choosing the
    /// FFT path when `n · K` exceeds the threshold.
    pub fn apply(&self, win: &Window, f: &[f64], out: &mut [f64]) {
        if (win.m + 1) * self.half_width > self.fft_threshold {
            self.apply_fft(win, f, out)
        } else {
            self.apply_direct(win, f, out)
        }
    }

    /// Reference path: direct banded summation in fixed order.
    pub fn apply_direct(&self, win: &Window, f: &[f64], out: &mut [f64]) {
        assert_eq!(f.len(), win.len());
        assert_eq!(out.len(), win.len());
        let m = win.m;
        let kk = self.half_width;
        let scaled = self.scaled_input(win, f);
        for (i, o) in out.iter_mut().enumerate().take(m + 1) {
            let lo = i.saturating_sub(kk);
            let hi = (i + kk).min(m);
            let mut acc = 0.0;
            for (j, s) in scaled.iter().enumerate().take(hi + 1).skip(lo) {
                acc += self.row[j + kk - i] * s;
            }
            *o = acc;
        }
        self.add_tail_terms(win, f, out);
    }

    /// FFT convolution of the grid-aligned block; agrees with
    /// [`apply_direct`](Self::apply_direct) up to rounding.
    pub fn apply_fft(&self, win: &Window, f: &[f64], out: &mut [f64]) {
        assert_eq!(f.len(), win.len());
        assert_eq!(out.len(), win.len());
        let m = win.m;
        let kk = self.half_width;
        let scaled = self.scaled_input(win, f);
        let n = (m + 1 + 2 * kk + 1).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let fwd: Arc<dyn Fft<f64>> = planner.plan_fft_forward(n);
        let inv: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(n);

        let mut kern = vec![Complex::new(0.0, 0.0); n];
        for (slot, &w) in kern.iter_mut().zip(&self.row) {
            slot.re = w;
        }
        let mut sig = vec![Complex::new(0.0, 0.0); n];
        for (slot, &s) in sig.iter_mut().zip(&scaled) {
            slot.re = s;
        }
        fwd.process(&mut kern);
        fwd.process(&mut sig);
        for (s, k) in sig.iter_mut().zip(&kern) {
            *s *= k;
        }
        inv.process(&mut sig);
        let norm = 1.0 / n as f64;
        for i in 0..=m {
            out[i] = sig[i + kk].re * norm;
        }
        self.add_tail_terms(win, f, out);
    }

    /// `c_j f_j` on the grid-aligned nodes, with `c_j = q_j / dx`.
    fn scaled_input(&self, win: &Window, f: &[f64]) -> Vec<f64> {
        (0..=win.m).map(|j| win.weight(j) / self.dx * f[j]).collect()
    }

    /// Contributions involving the partial end node (row and column).
    fn add_tail_terms(&self, win: &Window, f: &[f64], out: &mut [f64]) {
        if !win.has_tail() {
            return;
        }
        let p = win.m + 1;
        let l = win.length();
        let qp = win.weight(p);
        let reach = self.kernel.support_radius();
        for (i, o) in out.iter_mut().enumerate().take(win.m + 1) {
            let d = l - win.position(i);
            if d < reach {
                *o += self.kernel.eval(d) * qp * f[p];
            }
        }
        let mut acc = 0.0;
        for j in 0..=win.m {
            let d = l - win.position(j);
            if d < reach {
                acc += self.kernel.eval(d) * win.weight(j) * f[j];
            }
        }
        acc += self.kernel.eval(0.0) * qp * f[p];
        out[p] = acc;
    }

    /// Allocating convenience wrapper around [`apply`](Self::apply).
    pub fn apply_vec(&self, win: &Window, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        self.apply(win, f, &mut out);
        out
    }
}

/// Mass of `k` in `[s, ∞)`; collapses `∫_h^∞ J(x - y) dy` to `tail(h - x)`.
pub fn kernel_tail_mass(k: &KernelSpec, s: f64) -> f64 {
    k.tail(s)
}

/// Front velocity `h'` for the profiles `u`, `v` on the snapped window
/// `0..=m` with the front at `h`.
pub fn front_flux(c: &ModelConfig, dx: f64, h: f64, u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    if u.is_empty() || (c.mu1 == 0.0 && c.mu2 == 0.0) {
        return 0.0;
    }
    let m = u.len() - 1;
    let win = Window { dx, m, tail: 0.0 };
    let (r1, r2) = (c.kernel1.support_radius(), c.kernel2.support_radius());
    let mut acc1 = 0.0;
    let mut acc2 = 0.0;
    for i in 0..=m {
        let gap = h - i as f64 * dx;
        let q = win.weight(i);
        if gap < r1 {
            acc1 += u[i] * c.kernel1.tail(gap) * q;
        }
        if gap < r2 {
            acc2 += v[i] * c.kernel2.tail(gap) * q;
        }
    }
    c.mu1 * acc1 + c.mu2 * acc2
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tri(w: f64) -> KernelSpec {
        KernelSpec::Triangle { width: w }
    }

    #[test]
    fn window_weights_integrate_constants() {
        let grid = Grid::new(0.1, 10.0).unwrap();
        for l in [0.05, 0.1, 0.37, 1.0, 2.55, 9.99] {
            let w = Window::exact(&grid, l).unwrap();
            let total: f64 = w.weights().iter().sum();
            assert!((total - l).abs() < 1e-12, "l = {l}: {total}");
            assert!((w.length() - l).abs() < 1e-12);
        }
        let w = Window::snapped(&grid, 0.37).unwrap();
        assert_eq!(w.m, 4);
        assert!((w.weights().iter().sum::<f64>() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn domain_exceeding_grid_is_rejected() {
        let grid = Grid::new(0.5, 2.0).unwrap();
        assert_eq!(grid.n_max, 5);
        assert!(Window::snapped(&grid, 2.0).is_ok());
        assert!(matches!(Window::snapped(&grid, 2.5), Err(Error::DomainExceedsGrid { .. })));
        assert!(matches!(Window::exact(&grid, 2.2), Err(Error::DomainExceedsGrid { .. })));
    }

    #[test]
    fn zero_profile_maps_to_zero() {
        let grid = Grid::new(0.05, 10.0).unwrap();
        let op = DiscreteOperator::new(tri(1.0), 0.05);
        let win = Window::exact(&grid, 3.33).unwrap();
        let g = op.apply_vec(&win, &vec![0.0; win.len()]);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn constant_profile_is_preserved_in_interior() {
        let dx = 0.05;
        let grid = Grid::new(dx, 20.0).unwrap();
        for k in [tri(1.0), KernelSpec::TruncatedGaussian { sigma: 0.25 }, KernelSpec::CompactBump { radius: 1.0 }] {
            let op = DiscreteOperator::new(k, dx);
            let win = Window::snapped(&grid, 10.0).unwrap();
            let g = op.apply_vec(&win, &vec![1.0; win.len()]);
            let mid = g[win.m / 2];
            assert!((mid - 1.0).abs() < 5.0 * dx * dx, "{k:?}: {mid}");
            let sum: f64 = op.row_weights().iter().sum();
            assert!((sum - 1.0).abs() < 5.0 * dx * dx);
            assert!(op.row_weights().iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn triangle_row_by_hand() {
        // dx = 0.25, width 1: w_k = (1 - |k|/4) / 4 for |k| <= 3.
        let dx = 0.25;
        let grid = Grid::new(dx, 2.0).unwrap();
        let op = DiscreteOperator::new(tri(1.0), dx);
        assert_eq!(op.half_width(), 4);
        let win = Window::snapped(&grid, 1.0).unwrap();
        assert_eq!(win.len(), 5);
        let mut f = vec![0.0; 5];
        f[2] = 1.0; // interior unit spike
        let g = op.apply_vec(&win, &f);
        let expected = [0.125, 0.1875, 0.25, 0.1875, 0.125];
        for (gi, ei) in g.iter().zip(expected) {
            assert!((gi - ei).abs() < 1e-15, "{g:?}");
        }
        // a spike on the end node only carries the half trapezoid weight
        let mut f = vec![0.0; 5];
        f[0] = 1.0;
        let g = op.apply_vec(&win, &f);
        let expected = [0.125, 0.09375, 0.0625, 0.03125, 0.0];
        for (gi, ei) in g.iter().zip(expected) {
            assert!((gi - ei).abs() < 1e-15, "{g:?}");
        }
    }

    #[test]
    fn trapezoid_refinement_is_second_order() {
        let k = tri(1.0);
        let l = 4.0;
        let sample = |dx: f64| -> Vec<(f64, f64)> {
            let grid = Grid::new(dx, l).unwrap();
            let win = Window::snapped(&grid, l).unwrap();
            let op = DiscreteOperator::new(k, dx);
            let f: Vec<f64> = win.positions().iter().map(|x| x.cos()).collect();
            let g = op.apply_vec(&win, &f);
            win.positions().into_iter().zip(g).collect()
        };
        let coarse = sample(0.1);
        let mid = sample(0.05);
        let fine = sample(0.025);
        let diff = |a: &[(f64, f64)], b: &[(f64, f64)], stride: usize| -> f64 {
            a.iter().enumerate().map(|(i, (_, ga))| (ga - b[i * stride].1).abs()).fold(0.0, f64::max)
        };
        let e1 = diff(&coarse, &mid, 2);
        let e2 = diff(&mid, &fine, 2);
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio} ({e1:e}, {e2:e})");
    }

    #[test]
    fn fft_path_agrees_with_direct() {
        let dx = 0.01;
        let grid = Grid::new(dx, 60.0).unwrap();
        for k in [tri(1.0), KernelSpec::TruncatedGaussian { sigma: 0.3 }] {
            let op = DiscreteOperator::new(k, dx);
            for l in [50.0, 37.123] {
                let win = Window::exact(&grid, l).unwrap();
                let f: Vec<f64> = win.positions().iter().map(|x| 1.0 + (0.7 * x).sin()).collect();
                let mut a = vec![0.0; win.len()];
                let mut b = vec![0.0; win.len()];
                op.apply_direct(&win, &f, &mut a);
                op.apply_fft(&win, &f, &mut b);
                let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                assert!(err < 1e-12, "{err:e}");
            }
        }
    }

    #[test]
    fn partial_window_is_continuous_in_length() {
        let dx = 0.1;
        let grid = Grid::new(dx, 5.0).unwrap();
        let op = DiscreteOperator::new(tri(1.0), dx);
        let total = |l: f64| -> f64 {
            let win = Window::exact(&grid, l).unwrap();
            let f = vec![1.0; win.len()];
            let g = op.apply_vec(&win, &f);
            g.iter().zip(win.weights()).map(|(g, q)| g * q).sum()
        };
        let on = total(2.0);
        assert!((total(2.0 + 1e-7) - on).abs() < 1e-6);
        assert!((total(2.0 - 1e-7) - on).abs() < 1e-6);
    }

    #[test]
    fn tail_mass_examples() {
        for k in [tri(1.0), KernelSpec::TruncatedGaussian { sigma: 0.3 }, KernelSpec::CompactBump { radius: 2.0 }] {
            assert_eq!(kernel_tail_mass(&k, 0.0), 0.5);
        }
        assert_eq!(kernel_tail_mass(&tri(1.0), 1.0), 0.0);
        assert_eq!(kernel_tail_mass(&tri(1.0), 2.5), 0.0);
        assert!((kernel_tail_mass(&tri(1.0), 0.5) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn front_flux_examples() {
        let c = ModelConfig::reference();
        let dx = 0.05;
        assert_eq!(front_flux(&c, dx, 1.0, &[0.0; 21], &[0.0; 21]), 0.0);
        let still = c.clone().with_mu(0.0, 0.0);
        assert_eq!(front_flux(&still, dx, 1.0, &[1.0; 21], &[1.0; 21]), 0.0);

        // unit value on one node sitting at the front: μ1 tail(0) q_m with the
        // half trapezoid weight of the end node
        let c1 = c.clone().with_mu(3.0, 0.0);
        let mut u = vec![0.0; 21];
        u[20] = 1.0;
        let flux = front_flux(&c1, dx, 1.0, &u, &[0.0; 21]);
        assert!((flux - 3.0 * 0.5 * 0.5 * dx).abs() < 1e-15);
        // the same unit value one node inside carries the full weight
        let mut u = vec![0.0; 21];
        u[19] = 1.0;
        let flux = front_flux(&c1, dx, 1.0, &u, &[0.0; 21]);
        let expected = 3.0 * tri(1.0).tail(dx) * dx;
        assert!((flux - expected).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn operator_is_linear_and_positive(
            f in proptest::collection::vec(0.0..2.0f64, 41),
            g in proptest::collection::vec(-1.0..1.0f64, 41),
            alpha in -3.0..3.0f64,
            beta in -3.0..3.0f64,
        ) {
            let grid = Grid::new(0.05, 4.0).unwrap();
            let win = Window::exact(&grid, 1.97).unwrap();
            let n = win.len();
            let op = DiscreteOperator::new(tri(0.6), 0.05);
            let (f, g) = (&f[..n], &g[..n]);
            let pf = op.apply_vec(&win, f);
            prop_assert!(pf.iter().all(|&x| x >= 0.0));
            let pg = op.apply_vec(&win, g);
            let mix: Vec<f64> = f.iter().zip(g).map(|(a, b)| alpha * a + beta * b).collect();
            let pmix = op.apply_vec(&win, &mix);
            for i in 0..n {
                prop_assert!((pmix[i] - alpha * pf[i] - beta * pg[i]).abs() <= 1e-12);
            }
        }

        #[test]
        fn front_flux_is_monotone(
            u in proptest::collection::vec(0.0..1.0f64, 21),
            bump in proptest::collection::vec(0.0..0.5f64, 21),
            mu1 in 0.0..5.0f64,
            dmu in 0.0..5.0f64,
        ) {
            let c = ModelConfig::reference().with_mu(mu1, 1.0);
            let dx = 0.05;
            let base = front_flux(&c, dx, 1.0, &u, &u);
            let more = c.clone().with_mu(mu1 + dmu, 1.0);
            prop_assert!(front_flux(&more, dx, 1.0, &u, &u) >= base);
            let up: Vec<f64> = u.iter().zip(&bump).map(|(a, b)| a + b).collect();
            prop_assert!(front_flux(&c, dx, 1.0, &up, &u) >= base);
            prop_assert!(front_flux(&c, dx, 1.0, &u, &up) >= base);
        }
    }
}
