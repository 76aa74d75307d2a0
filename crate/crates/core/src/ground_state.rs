//! Ground state `Q` of `−ΔQ + Q = Q³` in R³ and the sharp threshold constants.
//!
//! The radial profile is computed on `w = r·Q`, which turns the elliptic
//! equation into `w'' = w − w³/r²` with `w(0) = 0`, `w'(0) = a`. The slope
//! `a = Q(0)` is found by bisection between trajectories that grow without
//! crossing zero and trajectories that cross it. Past the radius where the
//! two bracketing trajectories separate, the profile is continued by the
//! exact linear tail `c·e^{−r}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NlsError, Result};
use crate::grid::{norms, norms_with_derivative, NormSet, RadialField, RadialGrid};
use crate::numerics::HermiteTable;
use crate::tridiag::solve_tridiagonal;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_RHO: f64 = 0.01;
const NEWTON_MAX: usize = 30;

/// Trajectories exceeding `DIVERGENCE_FACTOR·a·r` are classified as growing.
const DIVERGENCE_FACTOR: f64 = 10.0;
/// Relative level (to the peak of `w`) below which a trajectory counts as decayed.
const DECAY_GUARD: f64 = 1e-10;
/// Relative separation of the bracketing trajectories that ends the trusted range.
const MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShootOutcome {
    CrossesZero(f64),
    StaysPositiveGrows,
    Decays,
}

struct Trajectory {
    w: Vec<f64>,
    dw: Vec<f64>,
    outcome: ShootOutcome,
}

#[inline]
fn rhs(r: f64, w: f64, dw: f64) -> (f64, f64) {
    (dw, w - w * w * w / (r * r))
}

/// Fixed-step RK4 from `r = h` with the Taylor start `w = a r + c r³`.
/// When `stop_on_event` is false the whole grid is integrated and only the
/// final classification is recorded.
fn integrate(a: f64, grid: &RadialGrid, stop_on_event: bool) -> Trajectory {
    let n = grid.len();
    let h = grid.h();
    let mut w = vec![0.0; n];
    let mut dw = vec![0.0; n];
    dw[0] = a;
    let c = (a - a * a * a) / 6.0;
    w[1] = a * h + c * h * h * h;
    dw[1] = a + 3.0 * c * h * h;
    let mut peak = w[1];
    let mut outcome = None;
    for j in 1..n - 1 {
        let r = grid.node(j);
        let (y, z) = (w[j], dw[j]);
        let (k1y, k1z) = rhs(r, y, z);
        let (k2y, k2z) = rhs(r + 0.5 * h, y + 0.5 * h * k1y, z + 0.5 * h * k1z);
        let (k3y, k3z) = rhs(r + 0.5 * h, y + 0.5 * h * k2y, z + 0.5 * h * k2z);
        let (k4y, k4z) = rhs(r + h, y + h * k3y, z + h * k3z);
        w[j + 1] = y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y);
        dw[j + 1] = z + h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
        let rn = r + h;
        peak = peak.max(w[j + 1]);
        if outcome.is_none() {
            if !w[j + 1].is_finite() || !dw[j + 1].is_finite() {
                outcome = Some(ShootOutcome::StaysPositiveGrows);
            } else if w[j + 1] < 0.0 {
                let at = r + h * w[j] / (w[j] - w[j + 1]);
                outcome = Some(ShootOutcome::CrossesZero(at));
            } else if w[j + 1] > DIVERGENCE_FACTOR * a * rn {
                outcome = Some(ShootOutcome::StaysPositiveGrows);
            }
            if outcome.is_some() && stop_on_event {
                w.truncate(j + 2);
                dw.truncate(j + 2);
                break;
            }
        }
        if !w[j + 1].is_finite() {
            // nothing more to learn once the trajectory overflowed
            for k in j + 2..n {
                w[k] = f64::INFINITY;
                dw[k] = f64::INFINITY;
            }
            break;
        }
    }
    let outcome = outcome.unwrap_or_else(|| classify_at_end(grid, &w, &dw, peak));
    Trajectory { w, dw, outcome }
}

/// Classifies a trajectory that reached `r_max` without an event by the
/// sign of its growing mode `B e^{r}` in `w ≈ A e^{−r} + B e^{r}`.
fn classify_at_end(grid: &RadialGrid, w: &[f64], dw: &[f64], peak: f64) -> ShootOutcome {
    let r = grid.r_max();
    let (y, z) = (w[w.len() - 1], dw[dw.len() - 1]);
    if y.abs().max(z.abs()) <= DECAY_GUARD * peak {
        return ShootOutcome::Decays;
    }
    let grow = 0.5 * (y + z);
    if grow >= 0.0 {
        ShootOutcome::StaysPositiveGrows
    } else {
        // A e^{−r} + B e^{r} = 0 with A = (y − z)/2·e^{r}, B = grow·e^{−r}
        let decay = 0.5 * (y - z);
        let at = if decay > 0.0 {
            r + 0.5 * (decay / -grow).ln()
        } else {
            r
        };
        ShootOutcome::CrossesZero(at)
    }
}

fn require_free_space(grid: &RadialGrid) -> Result<()> {
    if !grid.is_euclidean() {
        return Err(NlsError::InvalidGrid(
            "shooting requires a free-space grid (r0 = 0)".into(),
        ));
    }
    Ok(())
}

/// Integrates the shooting problem with initial slope `a`.
pub fn shoot(a: f64, grid: &RadialGrid) -> Result<ShootOutcome> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(NlsError::InvalidParameter(format!(
            "shooting slope must be positive, got {a}"
        )));
    }
    require_free_space(grid)?;
    Ok(integrate(a, grid, true).outcome)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundState {
    grid: RadialGrid,
    profile: Vec<f64>,
    slope: Vec<f64>,
    a0: f64,
    matching_radius: f64,
    tail_coefficient: f64,
    norms: NormSet,
    table: HermiteTable,
}

impl GroundState {
    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    /// Samples of `w = r·Q` on the grid.
    pub fn profile(&self) -> &[f64] {
        &self.profile
    }

    /// `Q(0)`, the shooting slope.
    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn matching_radius(&self) -> f64 {
        self.matching_radius
    }

    pub fn norms(&self) -> &NormSet {
        &self.norms
    }

    /// `Q(r)`; beyond the grid the exponential tail is used.
    pub fn q(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return self.a0;
        }
        if r > self.grid.r_max() {
            return self.tail_coefficient * (-r).exp() / r;
        }
        self.table.eval(r) / r
    }

    /// `Q` sampled as a field on the free-space grid it was computed on.
    pub fn field(&self) -> RadialField {
        let v = self
            .profile
            .iter()
            .map(|&w| Complex64::new(w, 0.0))
            .collect();
        RadialField::from_samples(self.grid, v).expect("ground-state profile is a valid field")
    }

    /// `scale·Q` resampled onto another grid.
    pub fn resample(&self, grid: RadialGrid, scale: f64) -> RadialField {
        RadialField::from_real_profile(grid, |r| scale * self.q(r))
    }

    /// Stationary state of the discrete equation on a free-space `grid`:
    /// the resampled `Q` refined by Newton's method on
    /// `D₂v − v + v³/r² = 0` with `v = 0` at both ends, then scaled.
    ///
    /// `Q` is linearly unstable under the flow, so an `O(h²)` mismatch with the
    /// discrete operator grows quickly; runs meant to sit on the soliton start here.
    pub fn discrete(&self, grid: RadialGrid, scale: f64) -> Result<RadialField> {
        if !grid.is_euclidean() {
            return Err(NlsError::InvalidGrid("discrete ground state needs a free-space grid".into()));
        }
        let n = grid.len();
        let h2 = grid.h() * grid.h();
        let mut v: Vec<f64> = grid.nodes().map(|r| r * self.q(r)).collect();
        v[0] = 0.0;
        v[n - 1] = 0.0;
        let m = n - 2;
        let off = vec![1.0 / h2; m];
        let mut converged = false;
        for _ in 0..NEWTON_MAX {
            let mut res = vec![0.0; m];
            let mut diag = vec![0.0; m];
            for j in 1..n - 1 {
                let r = grid.node(j);
                let q2 = v[j] * v[j] / (r * r);
                res[j - 1] = -(((v[j + 1] - v[j]) - (v[j] - v[j - 1])) / h2 - v[j] + q2 * v[j]);
                diag[j - 1] = -2.0 / h2 - 1.0 + 3.0 * q2;
            }
            let size = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            solve_tridiagonal(&off, &diag, &off, &mut res);
            let step = res.iter().fold(0.0f64, |a, x| a.max(x.abs()));
            for j in 1..n - 1 {
                v[j] += res[j - 1];
            }
            if !step.is_finite() {
                break;
            }
            // one more sweep after the tolerance is met lands on round-off
            if converged {
                break;
            }
            converged = step <= 1e-12 * size;
        }
        if !converged {
            return Err(NlsError::InvalidParameter("Newton refinement of Q did not converge".into()));
        }
        RadialField::from_samples(grid, v.into_iter().map(|x| Complex64::new(scale * x, 0.0)).collect())
    }

    /// Profile zeroed beyond `radius` (used for sanity ablations).
    pub fn truncated(&self, radius: f64) -> GroundState {
        let mut out = self.clone();
        for (j, (w, dw)) in out.profile.iter_mut().zip(out.slope.iter_mut()).enumerate() {
            if self.grid.node(j) > radius {
                *w = 0.0;
                *dw = 0.0;
            }
        }
        out.norms = profile_norms(&out.grid, &out.profile, &out.slope);
        out
    }
}

fn profile_norms(grid: &RadialGrid, w: &[f64], dw: &[f64]) -> NormSet {
    let v: Vec<Complex64> = w.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let d: Vec<Complex64> = dw.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    norms_with_derivative(grid, &v, &d)
}

fn is_growing(o: ShootOutcome) -> bool {
    matches!(o, ShootOutcome::StaysPositiveGrows)
}

/// Bisection on the shooting slope to width `tol`, followed by tail grafting.
pub fn find_ground_state(tol: f64, grid: &RadialGrid) -> Result<GroundState> {
    if !(tol > 0.0) {
        return Err(NlsError::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    require_free_space(grid)?;

    let mut bracket = None;
    let mut prev: Option<(f64, ShootOutcome)> = None;
    for k in 0..16 {
        let a = 0.5 * 2f64.powi(k);
        let o = integrate(a, grid, true).outcome;
        if let ShootOutcome::Decays = o {
            bracket = Some((a, a));
            break;
        }
        if let Some((pa, po)) = prev {
            if is_growing(po) != is_growing(o) {
                bracket = Some(if is_growing(po) { (pa, a) } else { (a, pa) });
                break;
            }
        }
        prev = Some((a, o));
    }
    let (mut lo, mut hi) = bracket.ok_or(NlsError::NoBracket)?;

    while (hi - lo).abs() > tol {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        match integrate(mid, grid, true).outcome {
            ShootOutcome::StaysPositiveGrows => lo = mid,
            ShootOutcome::CrossesZero(_) => hi = mid,
            ShootOutcome::Decays => {
                lo = mid;
                hi = mid;
            }
        }
    }
    let a0 = 0.5 * (lo + hi);

    let mid = integrate(a0, grid, false);
    let low = integrate(lo, grid, false);
    let high = integrate(hi, grid, false);

    let n = grid.len();
    let mut peak_idx = 1;
    while peak_idx + 1 < n && mid.w[peak_idx + 1] > mid.w[peak_idx] {
        peak_idx += 1;
    }
    let peak = mid.w[peak_idx];
    let mut m = n - 1;
    for j in peak_idx + 1..n {
        let wj = mid.w[j];
        let spread = (high.w[j] - low.w[j]).abs();
        if !wj.is_finite() || wj <= DECAY_GUARD * peak || spread > MATCH_TOL * wj.abs() {
            m = j - 1;
            break;
        }
    }
    let r_match = grid.node(m);
    let tail = mid.w[m] * r_match.exp();
    let mut w = mid.w;
    let mut dw = mid.dw;
    for j in m + 1..n {
        let r = grid.node(j);
        w[j] = tail * (-r).exp();
        dw[j] = -w[j];
    }

    let norms = profile_norms(grid, &w, &dw);
    let table = HermiteTable::new(0.0, grid.h(), w.clone(), dw.clone());
    Ok(GroundState {
        grid: *grid,
        profile: w,
        slope: dw,
        a0,
        matching_radius: r_match,
        tail_coefficient: tail,
        norms,
        table,
    })
}

/// Relative Pohozaev defects `|K − 3M|/M` and `|L4 − 4M|/M`.
pub fn pohozaev_residuals(gs: &GroundState) -> (f64, f64) {
    let ns = gs.norms();
    (
        (ns.kinetic - 3.0 * ns.mass).abs() / ns.mass,
        (ns.l4_fourth - 4.0 * ns.mass).abs() / ns.mass,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConstants {
    /// `E(Q)·M(Q)`
    pub em_threshold: f64,
    /// `‖∇Q‖₂‖Q‖₂`
    pub k_threshold: f64,
    /// `(4/3)/(‖Q‖₂‖∇Q‖₂)`, the sharp Gagliardo–Nirenberg coefficient.
    pub gn_constant: f64,
    pub delta_prime: f64,
    pub rho: f64,
}

pub fn thresholds(gs: &GroundState, delta_prime: f64) -> Result<ThresholdConstants> {
    thresholds_with_rho(gs, delta_prime, DEFAULT_RHO)
}

pub fn thresholds_with_rho(
    gs: &GroundState,
    delta_prime: f64,
    rho: f64,
) -> Result<ThresholdConstants> {
    if !(delta_prime > 0.0 && delta_prime < 1.0) {
        return Err(NlsError::InvalidParameter(format!(
            "delta_prime must lie in (0, 1), got {delta_prime}"
        )));
    }
    if !(rho > 0.0) {
        return Err(NlsError::InvalidParameter(format!("rho must be positive, got {rho}")));
    }
    Ok(ThresholdConstants::from_norms(gs.norms(), delta_prime, rho))
}

impl ThresholdConstants {
    /// Constants built from the norms of a ground-state profile. Used with the
    /// discrete ground state of a run grid so that classification there is
    /// consistent with the grid's own quadrature.
    pub fn from_norms(ns: &NormSet, delta_prime: f64, rho: f64) -> Self {
        let k = ns.mass.sqrt() * ns.kinetic.sqrt();
        Self {
            em_threshold: ns.energy * ns.mass,
            k_threshold: k,
            gn_constant: (4.0 / 3.0) / k,
            delta_prime,
            rho,
        }
    }
}

/// Ratio of the two sides of the refined Gagliardo–Nirenberg inequality.
/// For radial fields the Galilean infimum is attained at zero boost, so the
/// boosted kinetic energy is the plain one.
pub fn gn_check(f: &RadialField, tc: &ThresholdConstants) -> Result<f64> {
    if f.is_zero() {
        return Err(NlsError::InvalidField("gn_check needs a nonzero field".into()));
    }
    let ns = norms(f);
    let bound = tc.gn_constant * ns.mass.sqrt() * ns.kinetic.sqrt() * ns.kinetic;
    Ok(ns.l4_fourth / bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn gs() -> &'static GroundState {
        static GS: OnceLock<GroundState> = OnceLock::new();
        GS.get_or_init(|| {
            let g = RadialGrid::new(0.0, 30.0, 12001).unwrap();
            find_ground_state(DEFAULT_TOL, &g).unwrap()
        })
    }

    #[test]
    fn shoot_classifies_extremes() {
        let g = RadialGrid::new(0.0, 30.0, 6001).unwrap();
        assert!(matches!(shoot(100.0, &g).unwrap(), ShootOutcome::CrossesZero(_)));
        assert_eq!(shoot(0.01, &g).unwrap(), ShootOutcome::StaysPositiveGrows);
        assert!(shoot(0.0, &g).is_err());
        assert!(shoot(1.0, &RadialGrid::new(1.0, 30.0, 100).unwrap()).is_err());
    }

    #[test]
    fn profile_is_positive_and_decreasing() {
        let gs = gs();
        let q: Vec<f64> = (1..gs.grid().len())
            .map(|j| gs.profile()[j] / gs.grid().node(j))
            .collect();
        assert!(q.iter().all(|&x| x > 0.0));
        assert!(q.windows(2).all(|p| p[1] <= p[0]));
        let last = *gs.profile().last().unwrap();
        let peak = gs.profile().iter().cloned().fold(0.0, f64::max);
        assert!(last < 1e-8 * peak);
    }

    #[test]
    fn pohozaev_and_energy_identities() {
        let gs = gs();
        let (r1, r2) = pohozaev_residuals(gs);
        assert!(r1 < 1e-6 && r2 < 1e-6, "{r1} {r2}");
        let ns = gs.norms();
        assert!((ns.energy - 0.5 * ns.mass).abs() / ns.mass < 1e-6);
    }

    #[test]
    fn truncation_degrades_residuals() {
        let gs = gs();
        let (r1, _) = pohozaev_residuals(gs);
        let (t1, _) = pohozaev_residuals(&gs.truncated(3.0));
        assert!(t1 > 1e3 * r1.max(1e-12));
    }

    #[test]
    fn threshold_constants() {
        let gs = gs();
        let tc = thresholds(gs, 0.5).unwrap();
        let m = gs.norms().mass;
        assert!((tc.em_threshold - 0.5 * m * m).abs() / (0.5 * m * m) < 1e-6);
        assert!((tc.k_threshold - 3f64.sqrt() * m).abs() / m < 1e-6);
        let exact = tc.gn_constant * gs.norms().mass.sqrt() * gs.norms().kinetic.sqrt();
        assert!((exact - 4.0 / 3.0).abs() < 1e-15);
        assert!(thresholds(gs, 1.5).is_err());
    }

    #[test]
    fn gn_ratio_equality_and_homogeneity() {
        let gs = gs();
        let tc = thresholds(gs, 0.5).unwrap();
        let f = gs.field();
        let one = gn_check(&f, &tc).unwrap();
        assert!((one - 1.0).abs() < 1e-4, "{one}");
        let half = gn_check(&f.scale(Complex64::new(0.5, 0.0)), &tc).unwrap();
        assert!((half - 1.0).abs() < 1e-4, "{half}");
        let g = RadialGrid::new(0.0, 12.0, 4001).unwrap();
        let gauss = RadialField::from_real_profile(g, |r| (-r * r).exp());
        assert!(gn_check(&gauss, &tc).unwrap() < 1.0);
        assert!(gn_check(&RadialField::zeros(g), &tc).is_err());
    }

    #[test]
    fn bisection_is_deterministic() {
        let g = RadialGrid::new(0.0, 20.0, 4001).unwrap();
        let a = find_ground_state(DEFAULT_TOL, &g).unwrap().a0();
        let b = find_ground_state(DEFAULT_TOL, &g).unwrap().a0();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn discrete_ground_state_solves_the_grid_equation() {
        let g = RadialGrid::new(0.0, 30.0, 1201).unwrap();
        let q = gs().discrete(g, 1.0).unwrap();
        let v: Vec<f64> = q.v().iter().map(|z| z.re).collect();
        let h2 = g.h() * g.h();
        let worst = (1..g.len() - 1)
            .map(|j| {
                let r = g.node(j);
                ((v[j + 1] - 2.0 * v[j] + v[j - 1]) / h2 - v[j] + v[j].powi(3) / (r * r)).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-9, "residual {worst}");
        // O(h²) away from the continuum profile
        let cont = gs().resample(g, 1.0);
        let gap = q.v().iter().zip(cont.v()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(gap > 0.0 && gap < 1e-2, "gap {gap}");
        let ext = RadialGrid::new(1.0, 30.0, 1201).unwrap();
        assert!(matches!(gs().discrete(ext, 1.0), Err(NlsError::InvalidGrid(_))));
    }
}
