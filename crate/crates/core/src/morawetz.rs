//! Morawetz action, its rate decomposition, the obstacle boundary flux and
//! the interaction Morawetz functional, all in radial form.
//!
//! With `v = r·u` the radial momentum density is `Im(ū u_r) = Im(v̄ v_r)/r²`,
//! so `M = 8π∫ψ(r) r Im(v̄ v_r) dr`. The interaction functional reduces, via
//! `w² = r² + s² − 2rs cos θ`, to
//! `M_R = 8π²∬ m(r) |u(s)|² s K(r, s) dr ds` with
//! `K = (r² − s²)[P₀(r+s) − P₀(|r−s|)] + [P₂(r+s) − P₂(|r−s|)]`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::cutoffs::{CutoffFamily, CutoffSamples};
use crate::error::{NlsError, Result};
use crate::grid::{lp_power, norms_with_derivative, radial_derivative, RadialField, RadialGrid, FOUR_PI};
use crate::series::{window_integral, ActionTerms, DiagnosticRow, TimeSeries};

/// Precomputed cutoff samples and kernel tables for one grid.
#[derive(Debug, Clone)]
pub struct MorawetzContext {
    grid: RadialGrid,
    cf: CutoffFamily,
    samples: CutoffSamples,
    nonlinear: bool,
    with_interaction: bool,
    /// `P₀, P₂` at `2r0 + m h` and at `m h`.
    p0_sum: Vec<f64>,
    p2_sum: Vec<f64>,
    p0_diff: Vec<f64>,
    p2_diff: Vec<f64>,
}

impl MorawetzContext {
    pub fn new(grid: RadialGrid, cf: CutoffFamily, nonlinear: bool, with_interaction: bool) -> Self {
        let samples = cf.sample(&grid);
        let m_max = 2 * grid.len();
        let (mut p0_sum, mut p2_sum, mut p0_diff, mut p2_diff) = (
            Vec::new(),
            Vec::new(),
            Vec::new(),
            Vec::new(),
        );
        if with_interaction {
            let h = grid.h();
            let r0 = grid.r0();
            p0_sum = (0..m_max).map(|m| cf.p0(2.0 * r0 + m as f64 * h)).collect();
            p2_sum = (0..m_max).map(|m| cf.p2(2.0 * r0 + m as f64 * h)).collect();
            p0_diff = (0..m_max).map(|m| cf.p0(m as f64 * h)).collect();
            p2_diff = (0..m_max).map(|m| cf.p2(m as f64 * h)).collect();
        }
        Self {
            grid,
            cf,
            samples,
            nonlinear,
            with_interaction,
            p0_sum,
            p2_sum,
            p0_diff,
            p2_diff,
        }
    }

    pub fn cutoffs(&self) -> &CutoffFamily {
        &self.cf
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    /// Full diagnostic row of `f` at time `t`.
    pub fn row(&self, t: f64, f: &RadialField) -> DiagnosticRow {
        let dv = radial_derivative(f);
        let norms = norms_with_derivative(&self.grid, f.v(), &dv);
        let flux = if self.grid.is_euclidean() {
            0.0
        } else {
            flux_from_derivative(&dv)
        };
        DiagnosticRow {
            t,
            norms,
            action: self.action_with(f, &dv),
            terms: self.terms_with(f, &dv, flux),
            flux,
            interaction: if self.with_interaction {
                self.interaction_with(f, &dv)
            } else {
                0.0
            },
            xi0: xi_with(&self.grid, &self.cf, f, &dv),
            virial: virial_functional(f),
            lp3: lp_power(f, 3.0),
            lp5: lp_power(f, 5.0),
            lp10: lp_power(f, 10.0),
        }
    }

    fn action_with(&self, f: &RadialField, dv: &[Complex64]) -> f64 {
        let g = &self.grid;
        let s: f64 = (0..g.len())
            .map(|j| g.weight(j) * self.samples.psi[j] * g.node(j) * (f.v()[j].conj() * dv[j]).im)
            .sum();
        2.0 * FOUR_PI * s
    }

    fn terms_with(&self, f: &RadialField, dv: &[Complex64], flux: f64) -> ActionTerms {
        let g = &self.grid;
        let cs = &self.samples;
        let quartic = if self.nonlinear { 1.0 } else { 0.0 };
        let (mut bulk, mut qerr, mut gerr) = (0.0, 0.0, 0.0);
        for j in 0..g.len() {
            let r = g.node(j);
            if r <= 0.0 {
                continue;
            }
            let w = g.weight(j);
            let v = f.v()[j];
            let a2 = v.norm_sqr();
            let grad2 = (dv[j] - v / r).norm_sqr();
            let u4r2 = a2 * a2 / (r * r);
            bulk += w * (cs.phi[j] * grad2 - 0.75 * quartic * cs.phi1[j] * u4r2);
            qerr += w * (3.0 * (cs.phi[j] - cs.phi1[j]) + 2.0 * (cs.psi[j] - cs.phi[j])) * u4r2;
            let d_rho = 2.0 * (v.conj() * dv[j]).re - 2.0 * a2 / r;
            gerr += w * (cs.dphi[j] + 2.0 * cs.dpsi[j]) * d_rho;
        }
        let boundary = if g.is_euclidean() {
            0.0
        } else {
            // outward normal of Ω at |x| = r0 points to the origin: x·n = −r0
            -2.0 * cs.psi[0] * (-g.r0()) * flux
        };
        ActionTerms {
            bulk: 4.0 * FOUR_PI * bulk,
            boundary,
            angular: 0.0,
            quartic_err: -quartic * FOUR_PI * qerr,
            gradient_err: FOUR_PI * gerr,
        }
    }

    fn interaction_with(&self, f: &RadialField, dv: &[Complex64]) -> f64 {
        let g = &self.grid;
        let n = g.len();
        let mom: Vec<f64> = (0..n)
            .map(|j| {
                let r = g.node(j);
                if r > 0.0 {
                    g.weight(j) * (f.v()[j].conj() * dv[j]).im / (r * r)
                } else {
                    0.0
                }
            })
            .collect();
        let dens: Vec<f64> = (0..n)
            .map(|k| {
                let s = g.node(k);
                if s > 0.0 {
                    g.weight(k) * f.v()[k].norm_sqr() / s
                } else {
                    0.0
                }
            })
            .collect();
        // per-row sums in parallel, reduced in index order for bitwise determinism
        let per_row: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|j| {
                if mom[j] == 0.0 {
                    return 0.0;
                }
                let r = g.node(j);
                let mut acc = 0.0;
                for (k, &q) in dens.iter().enumerate() {
                    if q == 0.0 {
                        continue;
                    }
                    let s = g.node(k);
                    let d = j.abs_diff(k);
                    let kern = (r * r - s * s) * (self.p0_sum[j + k] - self.p0_diff[d])
                        + (self.p2_sum[j + k] - self.p2_diff[d]);
                    acc += q * kern;
                }
                mom[j] * acc
            })
            .collect();
        8.0 * PI * PI * per_row.iter().sum::<f64>()
    }
}

fn flux_from_derivative(dv: &[Complex64]) -> f64 {
    FOUR_PI * dv[0].norm_sqr()
}

fn xi_with(grid: &RadialGrid, cf: &CutoffFamily, f: &RadialField, dv: &[Complex64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..grid.len() {
        let c = cf.chi(grid.node(j));
        if c == 0.0 {
            continue;
        }
        let w = grid.weight(j) * c * c;
        num += w * (f.v()[j].conj() * dv[j]).im;
        den += w * f.v()[j].norm_sqr();
    }
    if FOUR_PI * den > 1e-12 {
        -num / den
    } else {
        0.0
    }
}

/// `M(t) = 2 Im∫ψ x·ū∇u`.
pub fn action(f: &RadialField, cf: &CutoffFamily) -> f64 {
    let ctx = MorawetzContext::new(*f.grid(), cf.clone(), true, false);
    ctx.action_with(f, &radial_derivative(f))
}

/// Radial forms of the terms of `dM/dt`. In linear mode the quartic
/// contributions are absent.
pub fn action_rate_terms(f: &RadialField, cf: &CutoffFamily, nonlinear: bool) -> ActionTerms {
    let ctx = MorawetzContext::new(*f.grid(), cf.clone(), nonlinear, false);
    let dv = radial_derivative(f);
    let flux = if f.grid().is_euclidean() {
        0.0
    } else {
        flux_from_derivative(&dv)
    };
    ctx.terms_with(f, &dv, flux)
}

/// `∫_{∂Ω}|∂ₙu|² dS = 4π|v_r(r0)|²`.
pub fn boundary_flux(f: &RadialField) -> Result<f64> {
    if f.grid().is_euclidean() {
        return Err(NlsError::NoBoundary);
    }
    Ok(flux_from_derivative(&radial_derivative(f)))
}

/// Interaction Morawetz functional `M_R(t)` with the family radius as `R`.
pub fn interaction(f: &RadialField, cf: &CutoffFamily) -> f64 {
    let ctx = MorawetzContext::new(*f.grid(), cf.clone(), true, true);
    ctx.interaction_with(f, &radial_derivative(f))
}

/// Radial component of the Galilean parameter at center 0:
/// `−∫χ²(r/R) Im(v̄ v_r) dr / ∫χ²(r/R)|v|² dr`, or 0 for negligible localized mass.
pub fn xi(f: &RadialField, cf: &CutoffFamily) -> f64 {
    xi_with(f.grid(), cf, f, &radial_derivative(f))
}

/// Virial functional `V = ∫|x|²|u|² dx = 4π∫r²|v|² dr`.
pub fn virial_functional(f: &RadialField) -> f64 {
    let g = f.grid();
    let s: f64 = (0..g.len())
        .map(|j| {
            let r = g.node(j);
            g.weight(j) * r * r * f.v()[j].norm_sqr()
        })
        .sum();
    FOUR_PI * s
}

/// Largest time average of `column` over windows `[t_k, t_k + length]`
/// starting at sample times.
fn best_window_average(times: &[f64], values: &[f64], length: f64) -> Result<f64> {
    let t_last = times[times.len() - 1];
    let mut best: Option<f64> = None;
    for &t in times {
        if t + length > t_last + 1e-9 * length.max(1.0) {
            break;
        }
        let avg = window_integral(times, values, t, (t + length).min(t_last))? / length;
        best = Some(best.map_or(avg, |b: f64| b.max(avg)));
    }
    best.ok_or_else(|| {
        NlsError::SeriesTooShort(format!(
            "series spans {} time units, window needs {length}",
            t_last - times[0]
        ))
    })
}

/// `(1/T₀)∫_I ∫_{∂Ω}|∂ₙu|² dS dt`, maximized over windows `I` of length `T₀`.
pub fn local_smoothing_average(series: &TimeSeries, t0: f64) -> Result<f64> {
    if series.rows.len() < 2 || !(t0 > 0.0) {
        return Err(NlsError::SeriesTooShort("need at least two rows and T0 > 0".into()));
    }
    best_window_average(&series.times(), &series.column(|r| r.flux), t0)
}

/// Boundary term of the rate identity averaged over `R ∈ [R₀, e^J R₀]` in
/// `dR/R` (trapezoid on `n_radii` log-spaced radii) and over the best time
/// window of length `T₀`: `(1/J)∫(1/T₀)∫_I 2 r0 ψ_R(r0)·flux dt dR/R`.
pub fn dyadic_boundary_average(
    series: &TimeSeries,
    cf: &CutoffFamily,
    r0: f64,
    t0: f64,
    j: f64,
    n_radii: usize,
) -> Result<f64> {
    if !(r0 > 0.0) {
        return Err(NlsError::NoBoundary);
    }
    let flux_avg = local_smoothing_average(series, t0)?;
    let base = cf.radius();
    let weight = if n_radii == 1 || j == 0.0 {
        2.0 * r0 * cf.psi(r0)
    } else {
        let step = j / (n_radii - 1) as f64;
        let mut acc = 0.0;
        for k in 0..n_radii {
            let fam = cf.with_radius(base * (k as f64 * step).exp())?;
            let w = if k == 0 || k + 1 == n_radii { 0.5 } else { 1.0 };
            acc += w * step * 2.0 * r0 * fam.psi(r0);
        }
        acc / j
    };
    Ok(weight * flux_avg)
}

/// Residual of the rate identity along a series: the centered difference of
/// `M` at each interior row against the sum of the terms there, as the
/// largest mismatch over the largest `Σ|terms|` of the series.
pub fn identity_residual(series: &TimeSeries) -> Result<f64> {
    let rows = &series.rows;
    if rows.len() < 3 {
        return Err(NlsError::SeriesTooShort("need three rows for a centered difference".into()));
    }
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for k in 1..rows.len() - 1 {
        let dm = (rows[k + 1].action - rows[k - 1].action) / (rows[k + 1].t - rows[k - 1].t);
        worst = worst.max((dm - rows[k].terms.sum()).abs());
        scale = scale.max(rows[k].terms.abs_sum());
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutoffs::build_cutoffs;

    #[test]
    fn real_fields_have_no_momentum() {
        let cf = build_cutoffs(3.0, 0.2, 256).unwrap();
        let g = RadialGrid::new(1.0, 20.0, 400).unwrap();
        let f = RadialField::from_real_profile(g, |r| (-(r - 4.0) * (r - 4.0)).exp());
        assert_eq!(action(&f, &cf), 0.0);
        assert_eq!(interaction(&f, &cf), 0.0);
        assert_eq!(xi(&f, &cf), 0.0);
        assert_eq!(action_rate_terms(&f, &cf, true).angular, 0.0);
    }

    #[test]
    fn flux_cases() {
        let g = RadialGrid::new(1.0, 10.0, 901).unwrap();
        assert_eq!(boundary_flux(&RadialField::zeros(g)).unwrap(), 0.0);
        let e = RadialGrid::new(0.0, 10.0, 100).unwrap();
        assert!(matches!(boundary_flux(&RadialField::zeros(e)), Err(NlsError::NoBoundary)));
        // v = (r − r0)² vanishes to second order at the obstacle
        let flux = |n: usize| {
            let g = RadialGrid::new(1.0, 3.0, n).unwrap();
            let v: Vec<Complex64> = g
                .nodes()
                .map(|r| Complex64::new((r - 1.0).powi(2) * (3.0 - r), 0.0))
                .collect();
            boundary_flux(&RadialField::from_samples(g, v).unwrap()).unwrap()
        };
        // one-sided error is O(h²), so the flux falls like h⁴
        let (a, b) = (flux(201), flux(401));
        assert!(a < 1e-6 && b < a / 12.0);
    }

    #[test]
    fn outgoing_packet_has_positive_action_and_negative_xi() {
        let cf = build_cutoffs(20.0, 0.1, 512).unwrap();
        let g = RadialGrid::new(0.0, 30.0, 3001).unwrap();
        let k = 2.0;
        let f = RadialField::from_profile(g, |r| {
            Complex64::from_polar((-(r - 6.0).powi(2)).exp(), k * r)
        });
        assert!(action(&f, &cf) > 0.0);
        assert!(xi(&f, &cf) < 0.0);
    }
}
