//! Positive steady states by monotone Γ-iteration.
//!
//! `Γ(u, v) = ((d1 P1[u] + H(v)) / (d1 + a), (d2 P2[v] + G(u)) / (d2 + b))`
//! is order preserving, so iterating it from an upper solution gives a
//! nonincreasing sequence and from a lower solution a nondecreasing one.
//! Both limits are steady states; their gap is reported.

use serde::{Deserialize, Serialize};

use crate::discretization::{DiscreteOperator, Grid, Window};
use crate::error::{Error, Result};
use crate::model::{solve_equilibrium, ModelConfig, ReactionPair};
use crate::spectral::{assemble_on_grid, principal_eigen_with, EigenSettings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SteadyDomain {
    Bounded { l: f64 },
    /// Restriction to `[0, l_trunc]` of the solution on the last ladder rung.
    HalfLine { l_trunc: f64, rung: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyResult {
    pub domain: SteadyDomain,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub bracket_gap: f64,
}

/// Γ on one window, with the operators built once.
#[derive(Debug, Clone)]
pub struct GammaMap {
    pub window: Window,
    p1: DiscreteOperator,
    p2: DiscreteOperator,
    d1: f64,
    d2: f64,
    a: f64,
    b: f64,
    rx: ReactionPair,
}

impl GammaMap {
    pub fn new(c: &ModelConfig, window: Window) -> Self {
        let t = c.numerics.fft_threshold;
        Self {
            window,
            p1: DiscreteOperator::new(c.kernel1, window.dx).with_fft_threshold(t),
            p2: DiscreteOperator::new(c.kernel2, window.dx).with_fft_threshold(t),
            d1: c.d1,
            d2: c.d2,
            a: c.a,
            b: c.b,
            rx: c.reactions,
        }
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn apply(&self, u: &[f64], v: &[f64], out_u: &mut [f64], out_v: &mut [f64]) {
        self.p1.apply(&self.window, u, out_u);
        self.p2.apply(&self.window, v, out_v);
        for i in 0..u.len() {
            out_u[i] = (self.d1 * out_u[i] + self.rx.h(v[i])) / (self.d1 + self.a);
            out_v[i] = (self.d2 * out_v[i] + self.rx.g(u[i])) / (self.d2 + self.b);
        }
    }

    /// Sup-norm residual of the two steady equations.
    pub fn residual(&self, u: &[f64], v: &[f64]) -> f64 {
        let n = u.len();
        let (mut pu, mut pv) = (vec![0.0; n], vec![0.0; n]);
        self.p1.apply(&self.window, u, &mut pu);
        self.p2.apply(&self.window, v, &mut pv);
        (0..n)
            .map(|i| {
                let r1 = self.d1 * (pu[i] - u[i]) - self.a * u[i] + self.rx.h(v[i]);
                let r2 = self.d2 * (pv[i] - v[i]) - self.b * v[i] + self.rx.g(u[i]);
                r1.abs().max(r2.abs())
            })
            .fold(0.0, f64::max)
    }

    /// Largest row sum of the two quadrature operators.
    fn max_row_sum(&self) -> f64 {
        let ones = vec![1.0; self.len()];
        let mut out = vec![0.0; self.len()];
        let mut m = 0.0_f64;
        for p in [&self.p1, &self.p2] {
            p.apply(&self.window, &ones, &mut out);
            m = out.iter().fold(m, |m, v| m.max(*v));
        }
        m
    }
}

/// One application of Γ on `[0, l]`.
pub fn gamma_map(c: &ModelConfig, l: f64, u: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = Grid::for_config(c)?;
    let g = GammaMap::new(c, Window::exact(&grid, l)?);
    if u.len() != g.len() || v.len() != g.len() {
        return Err(Error::IllegalParams(format!("profiles need {} nodes", g.len())));
    }
    let (mut ou, mut ov) = (vec![0.0; u.len()], vec![0.0; v.len()]);
    g.apply(u, v, &mut ou, &mut ov);
    Ok((ou, ov))
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Iterates Γ from `(u, v)` until the steady residual is at most `tol`.
pub fn iterate_to_fixed_point(
    g: &GammaMap,
    mut u: Vec<f64>,
    mut v: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, Vec<f64>, usize)> {
    let n = g.len();
    let (mut nu, mut nv) = (vec![0.0; n], vec![0.0; n]);
    for it in 0..max_iter {
        if g.residual(&u, &v) <= tol {
            return Ok((u, v, it));
        }
        g.apply(&u, &v, &mut nu, &mut nv);
        std::mem::swap(&mut u, &mut nu);
        std::mem::swap(&mut v, &mut nv);
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: g.residual(&u, &v) })
}

/// Unique positive solution on `[0, l]` (exact right end).
pub fn solve_bounded_steady(c: &ModelConfig, l: f64) -> Result<SteadyResult> {
    let grid = Grid::for_config(c)?;
    solve_bounded_on_grid(c, &grid, l)
}

fn solve_bounded_on_grid(c: &ModelConfig, grid: &Grid, l: f64) -> Result<SteadyResult> {
    let op = assemble_on_grid(c, grid, l)?;
    let eig = principal_eigen_with(&op, &EigenSettings::from_config(c))?;
    if eig.lambda_p <= 0.0 {
        return Err(Error::PreconditionFailed(format!("λ_p({l}) = {:e} <= 0", eig.lambda_p)));
    }
    let (us, vs) = solve_equilibrium(c)?;
    let g = GammaMap::new(c, op.window);
    let n = g.len();
    let tol = c.numerics.ss_tol;
    let max_iter = c.numerics.ss_max_iter;
    let (mut ou, mut ov) = (vec![0.0; n], vec![0.0; n]);

    // upper start: (u*, v*), scaled by powers of two only if quadrature row
    // sums exceed one
    let mut kappa = 1.0;
    if g.max_row_sum() > 1.0 {
        for _ in 0..60 {
            g.apply(&vec![kappa * us; n], &vec![kappa * vs; n], &mut ou, &mut ov);
            if ou.iter().all(|&x| x <= kappa * us) && ov.iter().all(|&x| x <= kappa * vs) {
                break;
            }
            kappa *= 2.0;
        }
    }
    let mut up = (vec![kappa * us; n], vec![kappa * vs; n]);

    // lower start: ε φ with Γ[εφ] >= εφ checked nodewise
    let mut eps = 0.1 * us.min(vs);
    let mut found = false;
    for _ in 0..80 {
        let lu: Vec<f64> = eig.phi1.iter().map(|p| eps * p).collect();
        let lv: Vec<f64> = eig.phi2.iter().map(|p| eps * p).collect();
        g.apply(&lu, &lv, &mut ou, &mut ov);
        if ou.iter().zip(&lu).all(|(a, b)| a >= b) && ov.iter().zip(&lv).all(|(a, b)| a >= b) {
            found = true;
            break;
        }
        eps *= 0.5;
    }
    if !found {
        return Err(Error::PreconditionFailed("no ε with Γ[εφ] >= εφ".into()));
    }
    let mut lo = (
        eig.phi1.iter().map(|p| eps * p).collect::<Vec<_>>(),
        eig.phi2.iter().map(|p| eps * p).collect::<Vec<_>>(),
    );

    let mut it = 0;
    let mut gap = f64::INFINITY;
    let mut res_up = f64::INFINITY;
    while it < max_iter {
        res_up = g.residual(&up.0, &up.1);
        let res_lo = g.residual(&lo.0, &lo.1);
        gap = sup_dist(&up.0, &lo.0).max(sup_dist(&up.1, &lo.1));
        if res_up <= tol && res_lo <= tol && gap <= tol {
            break;
        }
        g.apply(&up.0, &up.1, &mut ou, &mut ov);
        up = (ou.clone(), ov.clone());
        g.apply(&lo.0, &lo.1, &mut ou, &mut ov);
        lo = (ou.clone(), ov.clone());
        it += 1;
    }
    if res_up > tol && it >= max_iter {
        return Err(Error::NoConvergence { iterations: it, residual: res_up });
    }
    if gap > 100.0 * tol {
        return Err(Error::NotUniquelyBracketed { gap });
    }
    Ok(SteadyResult {
        domain: SteadyDomain::Bounded { l: g.window.length() },
        x: g.window.positions(),
        u: up.0,
        v: up.1,
        residual: res_up,
        iterations: it,
        bracket_gap: gap,
    })
}

/// Re-iterates Γ from `(1 + factor)` times a converged solution and returns
/// the sup distance of the new limit to the original.
pub fn perturbation_probe(c: &ModelConfig, s: &SteadyResult, factor: f64) -> Result<f64> {
    let SteadyDomain::Bounded { l } = s.domain else {
        return Err(Error::PreconditionFailed("perturbation probe needs a bounded solution".into()));
    };
    let grid = Grid::for_config(c)?;
    let g = GammaMap::new(c, Window::exact(&grid, l)?);
    let u0 = s.u.iter().map(|x| (1.0 + factor) * x).collect();
    let v0 = s.v.iter().map(|x| (1.0 + factor) * x).collect();
    let (u, v, _) = iterate_to_fixed_point(&g, u0, v0, c.numerics.ss_tol, c.numerics.ss_max_iter)?;
    Ok(sup_dist(&u, &s.u).max(sup_dist(&v, &s.v)))
}

/// Bounded solutions on the ladder `L, 2L, 4L, …` (`L = l_trunc`) until
/// their restrictions to `[0, l_trunc]` stop moving.
pub fn solve_halfline_steady(c: &ModelConfig, l_trunc: f64) -> Result<SteadyResult> {
    Ok(halfline_ladder(c, l_trunc)?.1)
}

/// As [`solve_halfline_steady`], also returning every rung's full solution.
pub fn halfline_ladder(c: &ModelConfig, l_trunc: f64) -> Result<(Vec<SteadyResult>, SteadyResult)> {
    if c.r0() <= 1.0 {
        return Err(Error::PreconditionFailed(format!("R0 = {} <= 1", c.r0())));
    }
    let grid = Grid::for_config(c)?;
    let keep = Window::exact(&grid, l_trunc)?;
    let k = keep.m + 1;
    let tol = 10.0 * c.numerics.ss_tol;
    let mut rungs: Vec<SteadyResult> = Vec::new();
    let mut rung = l_trunc;
    let mut last_total = 0;
    while rung <= grid.l_max() * (1.0 + 1e-12) {
        let eig_positive = principal_eigen_with(&assemble_on_grid(c, &grid, rung)?, &EigenSettings::from_config(c))?
            .lambda_p
            > 0.0;
        if eig_positive {
            let s = solve_bounded_on_grid(c, &grid, rung)?;
            last_total += s.iterations;
            if let Some(prev) = rungs.last() {
                let moved = sup_dist(&prev.u[..k], &s.u[..k]).max(sup_dist(&prev.v[..k], &s.v[..k]));
                if moved <= tol {
                    let out = SteadyResult {
                        domain: SteadyDomain::HalfLine { l_trunc, rung },
                        x: s.x[..k].to_vec(),
                        u: s.u[..k].to_vec(),
                        v: s.v[..k].to_vec(),
                        residual: s.residual,
                        iterations: last_total,
                        bracket_gap: s.bracket_gap,
                    };
                    rungs.push(s);
                    return Ok((rungs, out));
                }
            }
            rungs.push(s);
        }
        rung *= 2.0;
    }
    Err(Error::LadderExhausted { last_rung: rung / 2.0 })
}
