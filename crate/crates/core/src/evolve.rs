//! Time stepping of `i v_t + v_rr + |v/r|²v = 0` on the radial grid.
//!
//! Each step is an implicit midpoint step with the mass-conserving
//! nonlinearity `(|v⁺|² + |v|²)/2 · (v⁺ + v)/(2r²)`. Writing `w = (v⁺ + v)/2 = v + d`,
//! the step solves `(2i/dt + D₂) d = −D₂v − g(w) w` by fixed-point
//! iteration, each iterate one tridiagonal solve with a factorization reused
//! for the whole run.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{InitialData, Mode, RunConfig};
use crate::cutoffs::CutoffFamily;
use crate::error::{NlsError, Result};
use crate::ground_state::{find_ground_state, GroundState};
use crate::grid::{kinetic, norms, sup_norm, RadialField, RadialGrid};
use crate::morawetz::MorawetzContext;
use crate::numerics::linear_fit;
use crate::series::{Termination, TimeSeries};
use crate::tridiag::ToeplitzTridiag;

pub const SOLVER_TOL: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 50;
const ROUNDOFF_TOL: f64 = 1e-15;
/// Relative sup-norm departure from the doubled-domain reference that marks
/// boundary contamination.
const CONTAMINATION_TOL: f64 = 1e-2;
/// Growth factor of `‖u‖_∞` or `‖∇u‖₂` that counts as blowup.
pub const BLOWUP_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub field: RadialField,
    pub step_index: u64,
}

impl SimState {
    pub fn initial(field: RadialField) -> Self {
        Self {
            t: 0.0,
            field,
            step_index: 0,
        }
    }
}

/// Absorbing layer `σ(r) = σ₀x²` on the outer `width` of the domain, with
/// `x` running from 0 to 1 across the layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SpongeProfile {
    width: f64,
    strength: f64,
    sigma: Vec<f64>,
}

impl SpongeProfile {
    /// `fraction` is the share of `[r0, r_max]` covered by the layer.
    pub fn new(grid: &RadialGrid, fraction: f64, strength: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&fraction) || !(strength >= 0.0) || !strength.is_finite() {
            return Err(NlsError::InvalidParameter(format!(
                "sponge fraction {fraction} / strength {strength}"
            )));
        }
        let width = fraction * (grid.r_max() - grid.r0());
        let start = grid.r_max() - width;
        let sigma = grid
            .nodes()
            .map(|r| {
                if width == 0.0 || r <= start {
                    0.0
                } else {
                    let x = (r - start) / width;
                    strength * x * x
                }
            })
            .collect();
        Ok(Self {
            width,
            strength,
            sigma,
        })
    }

    pub fn off(grid: &RadialGrid) -> Self {
        Self {
            width: 0.0,
            strength: 0.0,
            sigma: vec![0.0; grid.len()],
        }
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn is_off(&self) -> bool {
        self.strength == 0.0 || self.width == 0.0
    }
}

/// Reference sizes for the blowup test, fixed at the start of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupGuard {
    pub sup0: f64,
    pub grad0: f64,
}

impl BlowupGuard {
    pub fn from_field(f: &RadialField) -> Self {
        Self {
            sup0: sup_norm(f),
            grad0: kinetic(f).sqrt(),
        }
    }

    /// True iff `‖u‖_∞` or `‖∇u‖₂` exceeds its initial value by [`BLOWUP_FACTOR`].
    pub fn triggered(&self, f: &RadialField) -> bool {
        sup_norm(f) > BLOWUP_FACTOR * self.sup0 || kinetic(f).sqrt() > BLOWUP_FACTOR * self.grad0
    }
}

/// Blowup test against the guard of the state's own run.
pub fn detect_blowup(s: &SimState, guard: &BlowupGuard) -> bool {
    guard.triggered(&s.field)
}

#[derive(Debug, Clone)]
pub struct Stepper {
    grid: RadialGrid,
    dt: f64,
    nonlinear: bool,
    lu: ToeplitzTridiag,
    inv_r2: Vec<f64>,
    inv_h2: f64,
    damping: Option<Vec<f64>>,
}

impl Stepper {
    pub fn new(grid: RadialGrid, dt: f64, mode: Mode, sponge: &SpongeProfile) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(NlsError::InvalidParameter(format!("dt = {dt}")));
        }
        let h2 = grid.h() * grid.h();
        let diag = Complex64::new(-2.0 / h2, 2.0 / dt);
        let off = Complex64::new(1.0 / h2, 0.0);
        let inv_r2 = grid
            .nodes()
            .map(|r| if r > 0.0 { 1.0 / (r * r) } else { 0.0 })
            .collect();
        let damping = (!sponge.is_off()).then(|| sponge.sigma().iter().map(|s| (-s * dt).exp()).collect());
        Ok(Self {
            grid,
            dt,
            nonlinear: mode == Mode::Nonlinear,
            lu: ToeplitzTridiag::new(diag, off, grid.len() - 2),
            inv_r2,
            inv_h2: 1.0 / h2,
            damping,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `s` by one step. `t_origin` is the time of step index 0, so
    /// that `t = t_origin + step_index·dt` is recomputed rather than accumulated.
    pub fn step(&self, s: &SimState, t_origin: f64) -> Result<SimState> {
        let n = self.grid.len();
        let v = s.field.v();
        // The unknown is the increment d = w − v, which is O(dt) small, so the
        // solve's rounding is relative to d rather than to v. The Laplacian is
        // a difference of neighbour differences, each exact for close values.
        let lap: Vec<Complex64> = (1..n - 1)
            .map(|j| ((v[j + 1] - v[j]) - (v[j] - v[j - 1])) * self.inv_h2)
            .collect();
        let mut d = vec![Complex64::new(0.0, 0.0); n - 2];
        let mut next = vec![Complex64::new(0.0, 0.0); n - 2];
        let mut converged = !self.nonlinear;
        let mut last_diff = f64::INFINITY;
        let iterations = if self.nonlinear { MAX_ITERATIONS } else { 1 };
        for _ in 0..iterations {
            for j in 1..n - 1 {
                let mut rhs = -lap[j - 1];
                if self.nonlinear {
                    let w = v[j] + d[j - 1];
                    let vp = v[j] + 2.0 * d[j - 1];
                    let g = 0.5 * (vp.norm_sqr() + v[j].norm_sqr()) * self.inv_r2[j];
                    rhs -= g * w;
                }
                next[j - 1] = rhs;
            }
            self.lu.solve_in_place(&mut next);
            if !self.nonlinear {
                d.copy_from_slice(&next);
                break;
            }
            let (mut diff, mut size) = (0.0f64, 0.0f64);
            for j in 1..n - 1 {
                diff = diff.max((next[j - 1] - d[j - 1]).norm());
                size = size.max((v[j] + next[j - 1]).norm());
            }
            std::mem::swap(&mut d, &mut next);
            if !diff.is_finite() {
                converged = false;
                break;
            }
            // Past the tolerance, keep contracting down to round-off: the
            // soliton is linearly unstable and amplifies any solver residue.
            if converged && (diff <= ROUNDOFF_TOL * size || diff >= last_diff) {
                break;
            }
            if diff <= SOLVER_TOL * size {
                converged = true;
            }
            last_diff = diff;
        }
        let step_index = s.step_index + 1;
        let t = t_origin + step_index as f64 * self.dt;
        if !converged {
            return Err(NlsError::SolverDiverged { step: step_index, t });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for j in 1..n - 1 {
            out[j] = v[j] + 2.0 * d[j - 1];
        }
        if let Some(d) = &self.damping {
            for (o, f) in out.iter_mut().zip(d) {
                *o *= *f;
            }
        }
        if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(NlsError::SolverDiverged { step: step_index, t });
        }
        Ok(SimState {
            t,
            field: RadialField::from_samples(self.grid, out)?,
            step_index,
        })
    }
}

/// One implicit-midpoint step of the nonlinear equation without sponge.
pub fn step(s: &SimState, dt: f64) -> Result<SimState> {
    let grid = *s.field.grid();
    let stepper = Stepper::new(grid, dt, Mode::Nonlinear, &SpongeProfile::off(&grid))?;
    stepper.step(s, s.t - s.step_index as f64 * dt)
}

/// Initial field of `cfg` on its grid. A ground state is computed when the
/// data asks for one and `gs` is `None`; on a free-space grid it is the
/// discrete stationary state (see [`GroundState::discrete`]).
pub fn initial_field(cfg: &RunConfig, gs: Option<&GroundState>) -> Result<RadialField> {
    let grid = cfg.grid()?;
    match cfg.initial {
        InitialData::GroundState { scale } => {
            let owned;
            let gs = match gs {
                Some(gs) => gs,
                None => {
                    owned = ground_state_for(cfg)?;
                    &owned
                }
            };
            if grid.is_euclidean() {
                gs.discrete(grid, scale)
            } else {
                Ok(gs.resample(grid, scale))
            }
        }
        data => Ok(RadialField::from_real_profile(grid, |r| {
            data.profile(r).unwrap_or(0.0)
        })),
    }
}

pub fn ground_state_for(cfg: &RunConfig) -> Result<GroundState> {
    find_ground_state(cfg.gs_tol, &RadialGrid::new(0.0, cfg.gs_r_max, cfg.gs_n)?)
}

pub fn cutoffs_for(cfg: &RunConfig) -> Result<CutoffFamily> {
    CutoffFamily::build(cfg.cutoff_radius, cfg.cutoff_eta, cfg.cutoff_n_tab)
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub series: TimeSeries,
    /// Last state reached; on blowup, the last state that stepped cleanly.
    pub final_state: SimState,
    pub guard: BlowupGuard,
    pub t_origin: f64,
}

/// Runs `cfg` from its initial data to `t_end`.
pub fn evolve(cfg: &RunConfig) -> Result<RunOutput> {
    let f = initial_field(cfg, None)?;
    let guard = BlowupGuard::from_field(&f);
    evolve_from(cfg, SimState::initial(f), guard, 0.0, &cutoffs_for(cfg)?)
}

/// Runs `cfg` from `start` to `t_end`. A row is written for `start` and for
/// every step index divisible by `sample_every`, and for the final step.
pub fn evolve_from(
    cfg: &RunConfig,
    start: SimState,
    guard: BlowupGuard,
    t_origin: f64,
    cf: &CutoffFamily,
) -> Result<RunOutput> {
    cfg.validate()?;
    let grid = *start.field.grid();
    if grid != cfg.grid()? {
        return Err(NlsError::InvalidParameter(
            "start state grid differs from the configured grid".into(),
        ));
    }
    let sponge = SpongeProfile::new(&grid, cfg.sponge_width, cfg.sponge_strength)?;
    let stepper = Stepper::new(grid, cfg.dt, cfg.mode, &sponge)?;
    let ctx = MorawetzContext::new(grid, cf.clone(), cfg.mode == Mode::Nonlinear, cfg.interaction);
    let n_steps = total_steps(cfg);
    let mut rows = vec![ctx.row(start.t, &start.field)];
    let mut state = start;
    let mut termination = Termination::Completed;
    while state.step_index < n_steps {
        match stepper.step(&state, t_origin) {
            Ok(next) => {
                if guard.triggered(&next.field) {
                    termination = Termination::Blowup {
                        t: next.t,
                        step: next.step_index,
                        reason: "growth guard".into(),
                    };
                    break;
                }
                state = next;
            }
            Err(NlsError::SolverDiverged { step, t }) => {
                termination = Termination::Blowup {
                    t,
                    step,
                    reason: "fixed-point solver diverged".into(),
                };
                break;
            }
            Err(e) => return Err(e),
        }
        if state.step_index.is_multiple_of(cfg.sample_every as u64) || state.step_index == n_steps {
            rows.push(ctx.row(state.t, &state.field));
        }
    }
    if termination.is_blowup() && rows.last().map(|r| r.t) != Some(state.t) {
        rows.push(ctx.row(state.t, &state.field));
    }
    Ok(RunOutput {
        series: TimeSeries::new(rows, termination),
        final_state: state,
        guard,
        t_origin,
    })
}

/// Number of steps to reach `t_end`, rounded to the nearest integer.
pub fn total_steps(cfg: &RunConfig) -> u64 {
    (cfg.t_end / cfg.dt).round() as u64
}

/// Least-squares slope of `log‖u(t)‖_∞` against `log t` over
/// `[decay.t_a, decay.t_b]` in linear mode.
///
/// The window must end before boundary effects show: the sup-norm history is
/// compared with a run on a domain twice as long, and the first sample where
/// they differ by more than 1% is the contamination time.
pub fn linear_decay_fit(cfg: &RunConfig) -> Result<f64> {
    let study = linear_decay_study(cfg)?;
    if let Some(tc) = study.contamination {
        if tc <= cfg.decay_t_b {
            return Err(NlsError::InvalidParameter(format!(
                "decay window ends at {} but the outer layer is contaminated from t = {tc}",
                cfg.decay_t_b
            )));
        }
    }
    Ok(study.slope)
}

#[derive(Debug, Clone)]
pub struct DecayStudy {
    pub slope: f64,
    pub times: Vec<f64>,
    pub sup: Vec<f64>,
    /// First sampled time at which the truncation is visible, if any.
    pub contamination: Option<f64>,
}

/// Sup-norm history and fit without the contamination check.
pub fn linear_decay_study(cfg: &RunConfig) -> Result<DecayStudy> {
    if cfg.mode != Mode::Linear {
        return Err(NlsError::InvalidParameter("decay fit needs linear mode".into()));
    }
    let (ta, tb) = (cfg.decay_t_a, cfg.decay_t_b);
    if !(ta > 0.0 && tb > ta) {
        return Err(NlsError::InvalidParameter(format!("decay window [{ta}, {tb}]")));
    }
    let (times, sup) = sup_history(cfg, cfg.n, cfg.r_max)?;
    // Reference on a domain twice as long with the same spacing.
    let wide_n = 2 * (cfg.n - 1) + 1;
    let wide_r_max = cfg.r0 + 2.0 * (cfg.r_max - cfg.r0);
    let (_, wide) = sup_history(cfg, wide_n, wide_r_max)?;
    let contamination = times
        .iter()
        .zip(sup.iter().zip(&wide))
        .find(|(_, (a, b))| (*a - *b).abs() > CONTAMINATION_TOL * b.abs())
        .map(|(t, _)| *t);
    let (lx, ly): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&sup)
        .filter(|(t, _)| **t >= ta - 1e-12 && **t <= tb + 1e-12)
        .map(|(t, s)| (t.ln(), s.ln()))
        .unzip();
    if lx.len() < 2 {
        return Err(NlsError::SeriesTooShort("fewer than two samples in the decay window".into()));
    }
    Ok(DecayStudy {
        slope: linear_fit(&lx, &ly).0,
        times,
        sup,
        contamination,
    })
}

fn sup_history(cfg: &RunConfig, n: usize, r_max: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut c = cfg.clone();
    c.n = n;
    c.r_max = r_max;
    let grid = c.grid()?;
    let sponge = SpongeProfile::new(&grid, c.sponge_width, c.sponge_strength)?;
    let stepper = Stepper::new(grid, c.dt, Mode::Linear, &sponge)?;
    let mut state = SimState::initial(initial_field(&c, None)?);
    let n_steps = (c.decay_t_b / c.dt).ceil() as u64;
    let (mut times, mut sup) = (Vec::new(), Vec::new());
    while state.step_index < n_steps {
        state = stepper.step(&state, 0.0)?;
        if state.step_index.is_multiple_of(c.sample_every as u64) {
            times.push(state.t);
            sup.push(sup_norm(&state.field));
        }
    }
    Ok((times, sup))
}

/// Largest relative deviation of mass and energy from their initial values.
/// Absolute deviations are reported when the initial value vanishes.
pub fn conservation_report(series: &TimeSeries) -> (f64, f64) {
    let Some(first) = series.rows.first() else {
        return (0.0, 0.0);
    };
    let rel = |x: f64, x0: f64| {
        if x0 == 0.0 {
            (x - x0).abs()
        } else {
            ((x - x0) / x0).abs()
        }
    };
    series.rows.iter().fold((0.0f64, 0.0f64), |(m, e), r| {
        (
            m.max(rel(r.norms.mass, first.norms.mass)),
            e.max(rel(r.norms.energy, first.norms.energy)),
        )
    })
}

/// Leading rows over which the mass stays within `tol` (relative) of its
/// initial value: the span on which no mass has been absorbed by the sponge.
pub fn sponge_free_prefix(series: &TimeSeries, tol: f64) -> TimeSeries {
    let m0 = series.rows.first().map_or(0.0, |r| r.norms.mass);
    let k = series
        .rows
        .iter()
        .take_while(|r| (r.norms.mass - m0).abs() <= tol * m0.abs())
        .count();
    TimeSeries::new(series.rows[..k].to_vec(), series.termination.clone())
}

/// Energy of the discrete system the stepper integrates,
/// `4π[½Σ|v_{j+1} − v_j|²/h − ¼Σ h|v_j|⁴/r_j²]`. The midpoint nonlinearity
/// `½(|vⁿ⁺¹|² + |vⁿ|²)` conserves it exactly (up to the solver tolerance),
/// so the drift of the quadrature energy in a series measures spatial, not
/// temporal, error.
pub fn scheme_energy(f: &RadialField) -> f64 {
    let g = f.grid();
    let v = f.v();
    let h = g.h();
    let grad: f64 = v.windows(2).map(|w| (w[1] - w[0]).norm_sqr()).sum::<f64>() / h;
    let quartic: f64 = (1..g.len() - 1)
        .map(|j| {
            let r = g.node(j);
            h * v[j].norm_sqr().powi(2) / (r * r)
        })
        .sum();
    crate::grid::FOUR_PI * (0.5 * grad - 0.25 * quartic)
}

/// Mass and energy of a state, for quick checks.
pub fn mass_energy(f: &RadialField) -> (f64, f64) {
    let n = norms(f);
    (n.mass, n.energy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(grid: RadialGrid) -> RadialField {
        RadialField::from_profile(grid, |r| {
            Complex64::from_polar(1.2 * (-(r - 3.0) * (r - 3.0)).exp(), 0.7 * r)
        })
    }

    #[test]
    fn zero_state_is_fixed() {
        let g = RadialGrid::new(0.0, 10.0, 201).unwrap();
        let s = SimState::initial(RadialField::zeros(g));
        let next = step(&s, 0.01).unwrap();
        assert!(next.field.is_zero());
        assert_eq!(next.step_index, 1);
        assert_eq!(next.t, 0.01);
    }

    #[test]
    fn linear_mass_is_conserved_without_sponge() {
        let g = RadialGrid::new(1.0, 20.0, 761).unwrap();
        let st = Stepper::new(g, 0.01, Mode::Linear, &SpongeProfile::off(&g)).unwrap();
        let mut s = SimState::initial(bump(g));
        let m0 = norms(&s.field).mass;
        for _ in 0..100 {
            let m = norms(&s.field).mass;
            s = st.step(&s, 0.0).unwrap();
            assert!(((norms(&s.field).mass - m) / m0).abs() < 1e-12);
        }
    }

    #[test]
    fn sponge_makes_mass_nonincreasing() {
        let g = RadialGrid::new(1.0, 20.0, 761).unwrap();
        let sp = SpongeProfile::new(&g, 0.3, 2.0).unwrap();
        assert!(sp.sigma().iter().all(|&s| s >= 0.0));
        let st = Stepper::new(g, 0.01, Mode::Linear, &sp).unwrap();
        let mut s = SimState::initial(bump(g));
        for _ in 0..300 {
            let m = norms(&s.field).mass;
            s = st.step(&s, 0.0).unwrap();
            assert!(norms(&s.field).mass <= m * (1.0 + 1e-13));
        }
    }

    #[test]
    fn nonlinear_mass_is_conserved_to_solver_tolerance() {
        let g = RadialGrid::new(0.0, 20.0, 801).unwrap();
        let st = Stepper::new(g, 0.005, Mode::Nonlinear, &SpongeProfile::off(&g)).unwrap();
        let mut s = SimState::initial(bump(g).scale(Complex64::new(2.0, 0.0)));
        let m0 = norms(&s.field).mass;
        for _ in 0..50 {
            s = st.step(&s, 0.0).unwrap();
        }
        assert!(((norms(&s.field).mass - m0) / m0).abs() < 1e-10);
    }

    #[test]
    fn sponge_is_zero_inside() {
        let g = RadialGrid::new(0.0, 100.0, 1001).unwrap();
        let sp = SpongeProfile::new(&g, 0.15, 3.0).unwrap();
        for (r, s) in g.nodes().zip(sp.sigma()) {
            if r <= 85.0 {
                assert_eq!(*s, 0.0);
            }
        }
        assert!((sp.sigma()[1000] - 3.0).abs() < 1e-12);
        assert!(SpongeProfile::new(&g, 1.5, 1.0).is_err());
    }

    #[test]
    fn guard_ignores_zero_and_flags_growth() {
        let g = RadialGrid::new(0.0, 10.0, 201).unwrap();
        let z = RadialField::zeros(g);
        assert!(!BlowupGuard::from_field(&z).triggered(&z));
        let f = bump(g);
        let guard = BlowupGuard::from_field(&f);
        assert!(!detect_blowup(&SimState::initial(f.clone()), &guard));
        assert!(guard.triggered(&f.scale(Complex64::new(2000.0, 0.0))));
    }

    #[test]
    fn t_end_zero_gives_one_row() {
        let mut cfg = RunConfig::default();
        cfg.t_end = 0.0;
        cfg.n = 201;
        cfg.r_max = 10.0;
        cfg.cutoff_n_tab = 256;
        let out = evolve(&cfg).unwrap();
        assert_eq!(out.series.rows.len(), 1);
        assert_eq!(out.series.termination, Termination::Completed);
        assert_eq!(conservation_report(&out.series), (0.0, 0.0));
    }
}
