//! Explicit time stepping of the free-boundary system and of the
//! fixed-domain problems.
//!
//! The front `h` evolves continuously; the active window is the snapped
//! index `m = round(h / dx)` with the Dirichlet value `u = v = 0` imposed at
//! node `m`. Nodes entering the window start at zero.

use serde::{Deserialize, Serialize};

use crate::discretization::{front_flux, DiscreteOperator, Grid, Window};
use crate::error::{Error, Result};
use crate::model::{scalar_diagnostics, ModelConfig};

/// Fraction of the stability limits used by the default step.
const DT_SAFETY: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub t: f64,
    pub h: f64,
    pub m: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl StateSnapshot {
    pub fn sup_u(&self) -> f64 {
        self.u.iter().fold(0.0, |m, x| m.max(*x))
    }

    pub fn sup_v(&self) -> f64 {
        self.v.iter().fold(0.0, |m, x| m.max(*x))
    }

    pub fn sup_sum(&self) -> f64 {
        self.u.iter().zip(&self.v).fold(0.0, |m, (a, b)| m.max(a + b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontSample {
    pub t: f64,
    pub h: f64,
    pub hprime: f64,
    pub sup_u: f64,
    pub sup_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub step: usize,
    pub state: StateSnapshot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminalStatus {
    ReachedTmax,
    FrontCrossedCritical,
    Stagnated,
    GridExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dx: f64,
    pub dt: f64,
    /// One entry per step, starting with the initial state.
    pub front: Vec<FrontSample>,
    pub snapshots: Vec<Sample>,
    pub status: TerminalStatus,
    pub final_state: StateSnapshot,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.front.len() - 1
    }
}

/// Largest stable and order-preserving step.
///
/// The reaction part needs `dt (max(d1 + a, d2 + b) + max(H'(0), G'(0))) <= 1`;
/// the front update is monotone in `h` when `dt (μ1 M1 + μ2 M2) <= 1`.
pub fn dt_stab(c: &ModelConfig) -> f64 {
    let reaction = DT_SAFETY / ((c.d1 + c.a).max(c.d2 + c.b) + c.h_slope().max(c.g_slope()));
    let (m1, m2) = c.ceilings();
    let front = c.mu1 * m1 + c.mu2 * m2;
    if front > 0.0 {
        reaction.min(DT_SAFETY / front)
    } else {
        reaction
    }
}

/// Step used for a run: the configured one or [`dt_stab`].
pub fn resolve_dt(c: &ModelConfig) -> Result<f64> {
    let stab = dt_stab(c);
    match c.numerics.dt {
        Some(dt) if dt > stab => Err(Error::StabilityViolation { dt, dt_stab: stab }),
        Some(dt) => Ok(dt),
        None => Ok(stab),
    }
}

/// Horizon used when none is configured: `50 / |γ_B|`.
pub fn default_t_max(c: &ModelConfig) -> f64 {
    c.numerics.t_max.unwrap_or_else(|| 50.0 / scalar_diagnostics(c).gamma_b.abs().max(1e-2))
}

/// Reusable stepper holding the grid and quadrature operators.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub config: ModelConfig,
    pub grid: Grid,
    p1: DiscreteOperator,
    p2: DiscreteOperator,
}

impl Stepper {
    pub fn new(c: &ModelConfig) -> Result<Self> {
        let grid = Grid::for_config(c)?;
        Self::on_grid(c, grid)
    }

    pub fn on_grid(c: &ModelConfig, grid: Grid) -> Result<Self> {
        let t = c.numerics.fft_threshold;
        Ok(Self {
            config: c.clone(),
            grid,
            p1: DiscreteOperator::new(c.kernel1, grid.dx).with_fft_threshold(t),
            p2: DiscreteOperator::new(c.kernel2, grid.dx).with_fft_threshold(t),
        })
    }

    /// Initial data sampled on the snapped window of `h0`.
    pub fn initial_state(&self) -> Result<StateSnapshot> {
        let c = &self.config;
        let win = Window::snapped(&self.grid, c.h0)?;
        let (pu, pv) = (c.initial_u(), c.initial_v());
        let mut u: Vec<f64> = (0..=win.m).map(|i| pu.eval(win.position(i), c.h0)).collect();
        let mut v: Vec<f64> = (0..=win.m).map(|i| pv.eval(win.position(i), c.h0)).collect();
        u[win.m] = 0.0;
        v[win.m] = 0.0;
        Ok(StateSnapshot { t: 0.0, h: c.h0, m: win.m, u, v })
    }

    /// Reaction–dispersal increment on a window.
    fn euler(&self, win: &Window, u: &[f64], v: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>) {
        let c = &self.config;
        let n = u.len();
        let (mut pu, mut pv) = (vec![0.0; n], vec![0.0; n]);
        self.p1.apply(win, u, &mut pu);
        self.p2.apply(win, v, &mut pv);
        let rx = &c.reactions;
        let nu = (0..n).map(|i| u[i] + dt * (c.d1 * pu[i] - (c.d1 + c.a) * u[i] + rx.h(v[i]))).collect();
        let nv = (0..n).map(|i| v[i] + dt * (c.d2 * pv[i] - (c.d2 + c.b) * v[i] + rx.g(u[i]))).collect();
        (nu, nv)
    }

    /// `h'` at a state.
    pub fn front_velocity(&self, s: &StateSnapshot) -> f64 {
        front_flux(&self.config, self.grid.dx, s.h, &s.u, &s.v)
    }

    /// One explicit step of the free-boundary system.
    pub fn step_free_boundary(&self, s: &StateSnapshot, dt: f64) -> Result<StateSnapshot> {
        let stab = dt_stab(&self.config);
        if dt > stab {
            return Err(Error::StabilityViolation { dt, dt_stab: stab });
        }
        let win = Window { dx: self.grid.dx, m: s.m, tail: 0.0 };
        let (mut u, mut v) = self.euler(&win, &s.u, &s.v, dt);
        let h = s.h + dt * self.front_velocity(s);
        let m = self.grid.index_of(h);
        if m >= self.grid.n_max || h > self.grid.l_max() {
            return Err(Error::GridExhausted { h, l_max: self.grid.l_max() });
        }
        u.resize(m + 1, 0.0);
        v.resize(m + 1, 0.0);
        u[m] = 0.0;
        v[m] = 0.0;
        Ok(StateSnapshot { t: s.t + dt, h, m, u, v })
    }
}

/// `step_free_boundary` with a stepper built from `c`.
pub fn step_free_boundary(s: &StateSnapshot, c: &ModelConfig, dt: f64) -> Result<StateSnapshot> {
    Stepper::new(c)?.step_free_boundary(s, dt)
}

/// Per-step observer that may end a run.
pub trait RunHooks {
    fn inspect(&mut self, step: usize, state: &StateSnapshot, hprime: f64) -> Option<TerminalStatus>;
}

/// Observes nothing; runs end at `T_max` or when the grid is exhausted.
pub struct NoHooks;

impl RunHooks for NoHooks {
    fn inspect(&mut self, _: usize, _: &StateSnapshot, _: f64) -> Option<TerminalStatus> {
        None
    }
}

/// Front-crossing and stagnation detection.
#[derive(Debug, Clone)]
pub struct ClassifierHooks {
    /// `ℓ*`; crossing is declared once `(m - 1) dx > ℓ*`, which places every
    /// later active window strictly above the critical length.
    pub ell_star: Option<f64>,
    pub dx: f64,
    pub hprime_tol: f64,
    pub vanish_tol: f64,
    pub window: usize,
    quiet: usize,
}

impl ClassifierHooks {
    pub fn new(c: &ModelConfig, ell_star: Option<f64>) -> Self {
        Self {
            ell_star,
            dx: c.dx(),
            hprime_tol: c.numerics.stagnation_hprime,
            vanish_tol: c.numerics.vanish_tol,
            window: c.numerics.stagnation_steps,
            quiet: 0,
        }
    }
}

impl RunHooks for ClassifierHooks {
    fn inspect(&mut self, _step: usize, s: &StateSnapshot, hprime: f64) -> Option<TerminalStatus> {
        if let Some(ell) = self.ell_star {
            if s.m >= 1 && (s.m - 1) as f64 * self.dx > ell {
                return Some(TerminalStatus::FrontCrossedCritical);
            }
        }
        if hprime < self.hprime_tol && s.sup_sum() < self.vanish_tol {
            self.quiet += 1;
            if self.quiet >= self.window {
                return Some(TerminalStatus::Stagnated);
            }
        } else {
            self.quiet = 0;
        }
        None
    }
}

fn sample(s: &StateSnapshot, hprime: f64) -> FrontSample {
    FrontSample { t: s.t, h: s.h, hprime, sup_u: s.sup_u(), sup_v: s.sup_v() }
}

/// Free-boundary run to `t_max` with a fixed step.
pub fn run_free_boundary(c: &ModelConfig, t_max: f64, hooks: &mut dyn RunHooks) -> Result<Trajectory> {
    let dt = resolve_dt(c)?;
    run_free_boundary_with_dt(c, t_max, dt, hooks)
}

pub fn run_free_boundary_with_dt(c: &ModelConfig, t_max: f64, dt: f64, hooks: &mut dyn RunHooks) -> Result<Trajectory> {
    let stepper = Stepper::new(c)?;
    let every = c.numerics.snapshot_every;
    let mut s = stepper.initial_state()?;
    let mut hp = stepper.front_velocity(&s);
    let mut front = vec![sample(&s, hp)];
    let mut snapshots = vec![Sample { step: 0, state: s.clone() }];
    let n_steps = (t_max / dt).ceil() as usize;
    let mut status = hooks.inspect(0, &s, hp).unwrap_or(TerminalStatus::ReachedTmax);
    let mut step = 0;
    if status == TerminalStatus::ReachedTmax {
        while step < n_steps {
            let next = match stepper.step_free_boundary(&s, dt) {
                Ok(n) => n,
                Err(Error::GridExhausted { .. }) => {
                    status = TerminalStatus::GridExhausted;
                    break;
                }
                Err(e) => return Err(e),
            };
            step += 1;
            s = next;
            s.t = step as f64 * dt;
            hp = stepper.front_velocity(&s);
            front.push(sample(&s, hp));
            if step % every == 0 {
                snapshots.push(Sample { step, state: s.clone() });
            }
            if let Some(st) = hooks.inspect(step, &s, hp) {
                status = st;
                break;
            }
        }
    }
    if snapshots.last().map(|x| x.step) != Some(step) {
        snapshots.push(Sample { step, state: s.clone() });
    }
    Ok(Trajectory { dx: stepper.grid.dx, dt, front, snapshots, status, final_state: s })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FixedDomain {
    Bounded { l: f64 },
    /// Integrated on `[0, l_trunc]`.
    HalfLine { l_trunc: f64 },
}

/// Time integration on a fixed domain (no front update) from the given
/// nodal data; the window ends exactly at `l`.
pub fn run_fixed_domain(c: &ModelConfig, domain: FixedDomain, u0: &[f64], v0: &[f64], t_max: f64) -> Result<Trajectory> {
    let l = match domain {
        FixedDomain::Bounded { l } => l,
        FixedDomain::HalfLine { l_trunc } => l_trunc,
    };
    let stepper = Stepper::new(c)?;
    let win = Window::exact(&stepper.grid, l)?;
    if u0.len() != win.len() || v0.len() != win.len() {
        return Err(Error::IllegalParams(format!("initial profiles need {} nodes", win.len())));
    }
    if u0.iter().chain(v0).any(|x| *x < 0.0) || u0.iter().chain(v0).all(|x| *x == 0.0) {
        return Err(Error::PreconditionFailed("initial data must be nonnegative and nontrivial".into()));
    }
    let dt = resolve_dt(&c.clone().with_mu(0.0, 0.0))?;
    let every = c.numerics.snapshot_every;
    let mut s = StateSnapshot { t: 0.0, h: win.length(), m: win.m, u: u0.to_vec(), v: v0.to_vec() };
    let mut front = vec![sample(&s, 0.0)];
    let mut snapshots = vec![Sample { step: 0, state: s.clone() }];
    let n_steps = (t_max / dt).ceil() as usize;
    for step in 1..=n_steps {
        let (u, v) = stepper.euler(&win, &s.u, &s.v, dt);
        s = StateSnapshot { t: step as f64 * dt, h: s.h, m: s.m, u, v };
        front.push(sample(&s, 0.0));
        if step % every == 0 || step == n_steps {
            snapshots.push(Sample { step, state: s.clone() });
        }
    }
    Ok(Trajectory { dx: stepper.grid.dx, dt, front, snapshots, status: TerminalStatus::ReachedTmax, final_state: s })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderViolation {
    pub step: usize,
    pub t: f64,
    pub quantity: String,
    pub node: Option<usize>,
    /// `second - first` at the violation (negative).
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    pub ordered: bool,
    pub compared_steps: usize,
    pub compared_snapshots: usize,
    /// Smallest `h2 - h1` over shared steps.
    pub min_h_margin: f64,
    /// Smallest nodewise `u2 - u1`, `v2 - v1` over shared snapshots.
    pub min_u_margin: f64,
    pub min_v_margin: f64,
    pub first_violation: Option<OrderViolation>,
}

/// Tolerance on order violations attributed to rounding.
pub const ORDER_TOL: f64 = 1e-10;

/// Checks that the second run dominates the first at every shared step.
pub fn compare_runs(t1: &Trajectory, t2: &Trajectory) -> Result<OrderReport> {
    if t1.dx != t2.dx {
        return Err(Error::IncomparableRuns(format!("dx {} vs {}", t1.dx, t2.dx)));
    }
    if t1.dt != t2.dt {
        return Err(Error::IncomparableRuns(format!("dt {} vs {}", t1.dt, t2.dt)));
    }
    let mut report = OrderReport {
        ordered: true,
        compared_steps: 0,
        compared_snapshots: 0,
        min_h_margin: f64::INFINITY,
        min_u_margin: f64::INFINITY,
        min_v_margin: f64::INFINITY,
        first_violation: None,
    };
    let note = |report: &mut OrderReport, step: usize, t: f64, q: &str, node: Option<usize>, margin: f64| {
        if margin < -ORDER_TOL && report.first_violation.is_none() {
            report.ordered = false;
            report.first_violation = Some(OrderViolation { step, t, quantity: q.into(), node, margin });
        }
    };
    for (k, (a, b)) in t1.front.iter().zip(&t2.front).enumerate() {
        let d = b.h - a.h;
        report.min_h_margin = report.min_h_margin.min(d);
        report.compared_steps += 1;
        note(&mut report, k, a.t, "h", None, d);
    }
    let mut j = 0;
    for s1 in &t1.snapshots {
        while j < t2.snapshots.len() && t2.snapshots[j].step < s1.step {
            j += 1;
        }
        let Some(s2) = t2.snapshots.get(j).filter(|s| s.step == s1.step) else { continue };
        report.compared_snapshots += 1;
        let n = s1.state.u.len().max(s2.state.u.len());
        let at = |x: &[f64], i: usize| x.get(i).copied().unwrap_or(0.0);
        for i in 0..n {
            let du = at(&s2.state.u, i) - at(&s1.state.u, i);
            let dv = at(&s2.state.v, i) - at(&s1.state.v, i);
            report.min_u_margin = report.min_u_margin.min(du);
            report.min_v_margin = report.min_v_margin.min(dv);
            note(&mut report, s1.step, s1.state.t, "u", Some(i), du);
            note(&mut report, s1.step, s1.state.t, "v", Some(i), dv);
        }
    }
    if report.compared_steps == 0 {
        return Err(Error::IncomparableRuns("no shared steps".into()));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InitialProfile;

    #[test]
    fn zero_state_is_invariant() {
        let c = ModelConfig::reference();
        let st = Stepper::new(&c).unwrap();
        let s = StateSnapshot { t: 0.0, h: 1.0, m: 20, u: vec![0.0; 21], v: vec![0.0; 21] };
        let n = st.step_free_boundary(&s, dt_stab(&c)).unwrap();
        assert_eq!(n.h, 1.0);
        assert!(n.u.iter().chain(&n.v).all(|&x| x == 0.0));
    }

    #[test]
    fn equilibrium_interior_is_steady() {
        let mut c = ModelConfig::reference().with_mu(0.0, 0.0);
        c.numerics.l_max = Some(20.0);
        let st = Stepper::new(&c).unwrap();
        let m = 200;
        let s = StateSnapshot { t: 0.0, h: 10.0, m, u: vec![1.0; m + 1], v: vec![1.0; m + 1] };
        let dt = dt_stab(&c);
        let n = st.step_free_boundary(&s, dt).unwrap();
        for i in 40..160 {
            assert!((n.u[i] - 1.0).abs() < 1e-14 && (n.v[i] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn one_step_moves_front_by_flux() {
        let c = ModelConfig::reference();
        let st = Stepper::new(&c).unwrap();
        let s0 = st.initial_state().unwrap();
        let dt = dt_stab(&c);
        let s1 = st.step_free_boundary(&s0, dt).unwrap();
        assert_eq!(s1.h, s0.h + dt * st.front_velocity(&s0));
        assert!(s1.h > s0.h);
    }

    #[test]
    fn oversized_step_is_rejected() {
        let c = ModelConfig::reference();
        let st = Stepper::new(&c).unwrap();
        let s0 = st.initial_state().unwrap();
        assert!(matches!(st.step_free_boundary(&s0, 2.0 * dt_stab(&c)), Err(Error::StabilityViolation { .. })));
    }

    #[test]
    fn zero_expansion_keeps_front() {
        let c = ModelConfig::reference().with_mu(0.0, 0.0);
        let tr = run_free_boundary(&c, 5.0, &mut NoHooks).unwrap();
        assert!(tr.front.iter().all(|f| f.h == c.h0));
    }

    #[test]
    fn subcritical_reproduction_stagnates() {
        let mut c = ModelConfig::reference();
        c.reactions = crate::model::ReactionPair::Monod { p: 1.0, q: 1.0, r: 1.0, s: 1.0 };
        let mut hooks = ClassifierHooks::new(&c, None);
        let tr = run_free_boundary(&c, 2000.0, &mut hooks).unwrap();
        assert_eq!(tr.status, TerminalStatus::Stagnated);
        assert!(tr.final_state.sup_sum() <= c.numerics.vanish_tol);
    }

    #[test]
    fn identical_runs_compare_equal() {
        let c = ModelConfig::reference();
        let a = run_free_boundary(&c, 3.0, &mut NoHooks).unwrap();
        let b = run_free_boundary(&c, 3.0, &mut NoHooks).unwrap();
        let r = compare_runs(&a, &b).unwrap();
        assert!(r.ordered);
        assert_eq!(r.min_h_margin, 0.0);
        assert_eq!(r.min_u_margin, 0.0);
    }

    #[test]
    fn doubled_amplitude_dominates() {
        let mut c = ModelConfig::reference().with_mu(2.0, 2.0);
        c.init_u = Some(InitialProfile::bump(0.25));
        c.init_v = Some(InitialProfile::bump(0.25));
        c.numerics.snapshot_every = 1;
        let mut c2 = c.clone();
        c2.init_u = Some(InitialProfile::bump(0.5));
        c2.init_v = Some(InitialProfile::bump(0.5));
        c2.numerics.dt = Some(dt_stab(&c2).min(dt_stab(&c)));
        c.numerics.dt = c2.numerics.dt;
        let a = run_free_boundary(&c, 4.0, &mut NoHooks).unwrap();
        let b = run_free_boundary(&c2, 4.0, &mut NoHooks).unwrap();
        let r = compare_runs(&a, &b).unwrap();
        assert!(r.ordered, "{:?}", r.first_violation);
        assert!(compare_runs(&b, &a).map(|r| !r.ordered).unwrap());
    }

    #[test]
    fn fixed_domain_dies_out_below_threshold() {
        let c = ModelConfig::reference();
        let l = 0.3;
        let lam = crate::spectral::principal_eigen(&c, l).unwrap().lambda_p;
        assert!(lam < 0.0);
        let n = Window::exact(&Grid::for_config(&c).unwrap(), l).unwrap().len();
        let tr = run_fixed_domain(&c, FixedDomain::Bounded { l }, &vec![1.0; n], &vec![1.0; n], 50.0 / lam.abs()).unwrap();
        assert!(tr.final_state.sup_sum() < 1e-6);
    }
}
