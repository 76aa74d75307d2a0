//! The cutoff family χ, φ, φ₁, ψ used by the Morawetz functionals.
//!
//! Everything is tabulated in the normalized radius `ρ = r/R`: φ and φ₁ are
//! ball-averaged overlaps of χ² with χ² (resp. χ⁴) and depend on `r/R`
//! only, and `ψ(ρ) = ρ⁻¹∫₀^ρ φ`. Physical-unit queries rescale on the fly, so
//! one set of tables serves every `R`.
//!
//! The 3D convolutions of radial functions reduce to
//! `(F∗G)(ρ) = (2π/ρ)∫ s F(s) [H_G(ρ+s) − H_G(|ρ−s|)] ds` with
//! `H_G(W) = ∫₀^W G(w) w dw`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{NlsError, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::numerics::{cumulative_trapezoid, HermiteTable};

/// Volume of the unit ball in R³.
pub const OMEGA3: f64 = 4.0 * PI / 3.0;

pub const MIN_TABLE: usize = 256;

/// Mollifier ramp: 1 at `τ ≤ 0`, 0 at `τ ≥ 1`, `exp(1 − 1/(1−τ²))` between.
pub fn ramp(tau: f64) -> f64 {
    if tau <= 0.0 {
        1.0
    } else if tau >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - tau * tau)).exp()
    }
}

/// χ on the normalized radius: 1 for `ρ ≤ 1−η`, 0 for `ρ ≥ 1`.
pub fn chi(rho: f64, eta: f64) -> f64 {
    ramp((rho - (1.0 - eta)) / eta)
}

#[derive(Debug)]
struct Tables {
    eta: f64,
    n_tab: usize,
    chi: Vec<f64>,
    phi: HermiteTable,
    phi1: HermiteTable,
    psi: HermiteTable,
    /// ∫₀^2 φ(ρ) dρ, so that ψ = mass/ρ for ρ ≥ 2.
    phi_mass: f64,
    p0: HermiteTable,
    p2: HermiteTable,
}

#[derive(Debug, Clone)]
pub struct CutoffFamily {
    radius: f64,
    tables: Arc<Tables>,
}

fn check_params(radius: f64, eta: f64, n_tab: usize) -> Result<()> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(NlsError::InvalidParameter(format!("R must be positive, got {radius}")));
    }
    if !(eta > 0.0 && eta < 0.5) {
        return Err(NlsError::InvalidParameter(format!("eta must lie in (0, 1/2), got {eta}")));
    }
    if n_tab < MIN_TABLE {
        return Err(NlsError::InvalidParameter(format!(
            "n_tab = {n_tab} is below {MIN_TABLE}"
        )));
    }
    Ok(())
}

/// Tabulated `H_G(W) = ∫₀^W G(w) w dw` for `G` supported in `[0, 1]`.
fn primitive_table(g: impl Fn(f64) -> f64, n: usize) -> HermiteTable {
    let h = 1.0 / (n - 1) as f64;
    let dens: Vec<f64> = (0..n).map(|i| i as f64 * h).map(|w| g(w) * w).collect();
    let vals = cumulative_trapezoid(&dens, h);
    HermiteTable::new(0.0, h, vals, dens)
}

/// Ball-normalized radial convolution `(F∗G)(ρ)/ω₃` on the nodes of `[0, 2]`.
fn convolve(f: &[f64], h_g: &HermiteTable, g_at: impl Fn(f64) -> f64 + Sync, n: usize) -> Vec<f64> {
    let hs = 1.0 / (f.len() - 1) as f64;
    let h_total = h_g.values()[h_g.values().len() - 1];
    let h_of = |w: f64| if w >= 1.0 { h_total } else { h_g.eval(w) };
    let hr = 2.0 / (n - 1) as f64;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let rho = i as f64 * hr;
            let mut acc = 0.0;
            for (k, &fk) in f.iter().enumerate() {
                if fk == 0.0 {
                    continue;
                }
                let s = k as f64 * hs;
                let wk = if k == 0 || k + 1 == f.len() { 0.5 } else { 1.0 };
                let inner = if rho == 0.0 {
                    // limit: (2π/ρ)·2ρ s² G(s) → 4π s² G(s)
                    2.0 * s * s * g_at(s)
                } else {
                    s * (h_of(rho + s) - h_of((rho - s).abs())) / rho
                };
                acc += wk * fk * inner;
            }
            2.0 * PI * hs * acc / OMEGA3
        })
        .collect()
}

fn centered_slopes(values: &[f64], h: f64) -> Vec<f64> {
    crate::grid::derivative_of(
        &RadialGrid::new(0.0, h * (values.len() - 1) as f64, values.len()).expect("table grid"),
        values,
    )
}

impl CutoffFamily {
    pub fn build(radius: f64, eta: f64, n_tab: usize) -> Result<Self> {
        check_params(radius, eta, n_tab)?;
        let chi_at = |s: f64| chi(s, eta);
        let hs = 1.0 / (n_tab - 1) as f64;
        let chi_tab: Vec<f64> = (0..n_tab).map(|k| chi_at(k as f64 * hs)).collect();
        let chi2: Vec<f64> = chi_tab.iter().map(|c| c * c).collect();

        let fine = 4 * n_tab;
        let h_chi2 = primitive_table(|w| chi_at(w).powi(2), fine);
        let h_chi4 = primitive_table(|w| chi_at(w).powi(4), fine);
        let phi = convolve(&chi2, &h_chi2, |s| chi_at(s).powi(2), n_tab);
        let phi1 = convolve(&chi2, &h_chi4, |s| chi_at(s).powi(4), n_tab);

        let hr = 2.0 / (n_tab - 1) as f64;
        let mut phi = phi;
        let mut phi1 = phi1;
        // the overlap of two unit balls vanishes at distance 2
        *phi.last_mut().unwrap() = 0.0;
        *phi1.last_mut().unwrap() = 0.0;

        let cum = cumulative_trapezoid(&phi, hr);
        let psi: Vec<f64> = (0..n_tab)
            .map(|i| if i == 0 { phi[0] } else { cum[i] / (i as f64 * hr) })
            .collect();
        let dpsi: Vec<f64> = (0..n_tab)
            .map(|i| if i == 0 { 0.0 } else { (phi[i] - psi[i]) / (i as f64 * hr) })
            .collect();
        let phi_mass = cum[n_tab - 1];

        let p0_dens: Vec<f64> = (0..n_tab).map(|i| psi[i] * i as f64 * hr).collect();
        let p2_dens: Vec<f64> = (0..n_tab)
            .map(|i| psi[i] * (i as f64 * hr).powi(3))
            .collect();
        let p0 = HermiteTable::new(0.0, hr, cumulative_trapezoid(&p0_dens, hr), p0_dens);
        let p2 = HermiteTable::new(0.0, hr, cumulative_trapezoid(&p2_dens, hr), p2_dens);

        let dphi = centered_slopes(&phi, hr);
        let dphi1 = centered_slopes(&phi1, hr);
        Ok(Self {
            radius,
            tables: Arc::new(Tables {
                eta,
                n_tab,
                chi: chi_tab,
                phi: HermiteTable::new(0.0, hr, phi, dphi),
                phi1: HermiteTable::new(0.0, hr, phi1, dphi1),
                psi: HermiteTable::new(0.0, hr, psi, dpsi),
                phi_mass,
                p0,
                p2,
            }),
        })
    }

    /// Same tables at another scale radius.
    pub fn with_radius(&self, radius: f64) -> Result<Self> {
        check_params(radius, self.tables.eta, self.tables.n_tab)?;
        Ok(Self {
            radius,
            tables: Arc::clone(&self.tables),
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn eta(&self) -> f64 {
        self.tables.eta
    }

    pub fn n_tab(&self) -> usize {
        self.tables.n_tab
    }

    /// χ tabulated on `[0, 1]`.
    pub fn chi_table(&self) -> &[f64] {
        &self.tables.chi
    }

    /// χ(r/R).
    pub fn chi(&self, r: f64) -> f64 {
        chi(r / self.radius, self.tables.eta)
    }

    pub fn phi(&self, r: f64) -> f64 {
        let rho = r / self.radius;
        if rho >= 2.0 {
            0.0
        } else {
            self.tables.phi.eval(rho)
        }
    }

    pub fn phi1(&self, r: f64) -> f64 {
        let rho = r / self.radius;
        if rho >= 2.0 {
            0.0
        } else {
            self.tables.phi1.eval(rho)
        }
    }

    /// dφ/dr.
    pub fn dphi(&self, r: f64) -> f64 {
        let rho = r / self.radius;
        if rho >= 2.0 {
            0.0
        } else {
            self.tables.phi.eval_slope(rho) / self.radius
        }
    }

    pub fn psi(&self, r: f64) -> f64 {
        let rho = r / self.radius;
        if rho >= 2.0 {
            self.tables.phi_mass / rho
        } else {
            self.tables.psi.eval(rho)
        }
    }

    /// dψ/dr = (φ − ψ)/r.
    pub fn dpsi(&self, r: f64) -> f64 {
        if r <= 0.0 {
            0.0
        } else {
            (self.phi(r) - self.psi(r)) / r
        }
    }

    /// `P₀(W) = ∫₀^W ψ(w) w dw`.
    pub fn p0(&self, w: f64) -> f64 {
        let t = &self.tables;
        let rho = w / self.radius;
        let scale = self.radius * self.radius;
        if rho >= 2.0 {
            let end = t.p0.values()[t.n_tab - 1];
            scale * (end + t.phi_mass * (rho - 2.0))
        } else {
            scale * t.p0.eval(rho)
        }
    }

    /// `P₂(W) = ∫₀^W ψ(w) w³ dw`.
    pub fn p2(&self, w: f64) -> f64 {
        let t = &self.tables;
        let rho = w / self.radius;
        let scale = self.radius.powi(4);
        if rho >= 2.0 {
            let end = t.p2.values()[t.n_tab - 1];
            scale * (end + t.phi_mass * (rho.powi(3) - 8.0) / 3.0)
        } else {
            scale * t.p2.eval(rho)
        }
    }

    /// Normalized table nodes `ρ_i` on `[0, 2]`.
    pub fn table_nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let hr = self.tables.phi.spacing();
        (0..self.tables.n_tab).map(move |i| i as f64 * hr)
    }

    pub fn phi_table(&self) -> &[f64] {
        self.tables.phi.values()
    }

    pub fn phi1_table(&self) -> &[f64] {
        self.tables.phi1.values()
    }

    pub fn psi_table(&self) -> &[f64] {
        self.tables.psi.values()
    }

    /// φ, φ₁, φ', ψ, ψ' at the nodes of a simulation grid.
    pub fn sample(&self, grid: &RadialGrid) -> CutoffSamples {
        let nodes: Vec<f64> = grid.nodes().collect();
        CutoffSamples {
            phi: nodes.iter().map(|&r| self.phi(r)).collect(),
            phi1: nodes.iter().map(|&r| self.phi1(r)).collect(),
            dphi: nodes.iter().map(|&r| self.dphi(r)).collect(),
            psi: nodes.iter().map(|&r| self.psi(r)).collect(),
            dpsi: nodes.iter().map(|&r| self.dpsi(r)).collect(),
        }
    }

    /// CSV dump with header `r,chi,phi,phi1,psi` at the table nodes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,chi,phi,phi1,psi\n");
        let t = &self.tables;
        for (i, rho) in self.table_nodes().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                rho * self.radius,
                chi(rho, t.eta),
                t.phi.values()[i],
                t.phi1.values()[i],
                t.psi.values()[i]
            );
        }
        out
    }
}

/// Cutoff functions sampled on a simulation grid.
#[derive(Debug, Clone)]
pub struct CutoffSamples {
    pub phi: Vec<f64>,
    pub phi1: Vec<f64>,
    pub dphi: Vec<f64>,
    pub psi: Vec<f64>,
    pub dpsi: Vec<f64>,
}

pub fn build_cutoffs(radius: f64, eta: f64, n_tab: usize) -> Result<CutoffFamily> {
    CutoffFamily::build(radius, eta, n_tab)
}

/// `sup_ρ |ρψ'(ρ) − (φ − ψ)(ρ)|` over the table, with ψ' by centered differences.
pub fn gradient_identity_residual(cf: &CutoffFamily) -> f64 {
    let psi = cf.psi_table();
    let phi = cf.phi_table();
    let hr = cf.tables.psi.spacing();
    let n = psi.len();
    let dpsi = centered_slopes(psi, hr);
    (0..n)
        .map(|i| {
            let rho = i as f64 * hr;
            (rho * dpsi[i] - (phi[i] - psi[i])).abs()
        })
        .fold(0.0, f64::max)
}

/// Measured constant `C` in `sup|φ − φ₁| ≤ C·η`.
pub fn phi_gap_constant(cf: &CutoffFamily) -> f64 {
    let gap = cf
        .phi_table()
        .iter()
        .zip(cf.phi1_table())
        .fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
    gap / cf.eta()
}

/// The ball cutoff χ_R: 1 for `r ≤ R/4`, 0 for `r ≥ R/2`, mollifier ramp between.
pub fn chi_ball_weight(radius: f64, r: f64) -> f64 {
    ramp((r / radius - 0.25) / 0.25)
}

/// Pointwise product of `f` with χ_R centered at the origin, `R` the family radius.
pub fn chi_ball(cf: &CutoffFamily, f: &RadialField) -> RadialField {
    let g = *f.grid();
    let v = f
        .v()
        .iter()
        .enumerate()
        .map(|(j, z)| z * chi_ball_weight(cf.radius(), g.node(j)))
        .collect();
    RadialField::from_samples(g, v).expect("product with a bounded weight stays valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::norms;
    use num_complex::Complex64;

    #[test]
    fn ramp_and_chi_shape() {
        assert_eq!(ramp(-0.1), 1.0);
        assert_eq!(ramp(0.0), 1.0);
        assert_eq!(ramp(1.0), 0.0);
        assert!(ramp(0.5) > 0.0 && ramp(0.5) < 1.0);
        assert_eq!(chi(0.85, 0.1), 1.0);
        assert_eq!(chi(1.0, 0.1), 0.0);
        assert_eq!(chi(1.3, 0.1), 0.0);
        for k in 0..=100 {
            let c = chi(k as f64 * 0.012, 0.2);
            assert!((0.0..=1.0).contains(&c));
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_cutoffs(0.0, 0.1, 512).is_err());
        assert!(build_cutoffs(1.0, 0.5, 512).is_err());
        assert!(build_cutoffs(1.0, 0.0, 512).is_err());
        assert!(build_cutoffs(1.0, 0.1, 100).is_err());
    }

    #[test]
    fn psi_bounds_and_origin() {
        let cf = build_cutoffs(5.0, 0.1, 1024).unwrap();
        assert_eq!(cf.psi_table()[0], cf.phi_table()[0]);
        for i in 0..400 {
            let r = i as f64 * 0.05;
            let bound = if r > 0.0 { (5.0 / r).min(1.0) } else { 1.0 };
            assert!(cf.psi(r) <= bound + 1e-8, "r = {r}");
            assert!(cf.psi(r) - cf.phi(r) >= -1e-10, "r = {r}");
        }
        assert_eq!(cf.phi(10.0), 0.0);
        assert_eq!(cf.phi(12.0), 0.0);
    }

    #[test]
    fn primitives_are_monotone() {
        let cf = build_cutoffs(2.0, 0.2, 512).unwrap();
        let mut prev = (0.0, 0.0);
        for i in 0..200 {
            let w = i as f64 * 0.05;
            let cur = (cf.p0(w), cf.p2(w));
            assert!(cur.0 >= prev.0 && cur.1 >= prev.1);
            prev = cur;
        }
    }

    #[test]
    fn chi_ball_cases() {
        let cf = build_cutoffs(8.0, 0.1, 256).unwrap();
        let g = RadialGrid::new(0.0, 10.0, 501).unwrap();
        let inner = RadialField::from_real_profile(g, |r| if r <= 1.9 { 1.0 - r / 2.0 } else { 0.0 });
        assert_eq!(chi_ball(&cf, &inner), inner);
        let outer = RadialField::from_real_profile(g, |r| if r >= 4.0 { 1.0 } else { 0.0 });
        assert!(chi_ball(&cf, &outer).is_zero());
        let any = RadialField::from_profile(g, |r| Complex64::new((-r).exp(), 0.3));
        assert!(norms(&chi_ball(&cf, &any)).mass <= norms(&any).mass);
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let cf = build_cutoffs(1.0, 0.2, 256).unwrap();
        let csv = cf.to_csv();
        assert!(csv.starts_with("r,chi,phi,phi1,psi\n"));
        assert_eq!(csv.lines().count(), 257);
    }
}
