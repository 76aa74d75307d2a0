//! Radial discretization of the exterior of a ball (or of all of R³).
//!
//! A radial function `u(r)` is stored through `v(r) = r·u(r)`, sampled on a
//! uniform grid `r_j = r0 + j·h`. The Dirichlet condition at the obstacle
//! (or regularity at the origin when `r0 = 0`) is the constraint `v[0] = 0`.
//! All integrals are composite trapezoid sums on the grid.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NlsError, Result};

pub const FOUR_PI: f64 = 4.0 * PI;

/// Smallest node count accepted by [`RadialGrid::new`].
pub const MIN_NODES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    r0: f64,
    r_max: f64,
    n: usize,
    h: f64,
}

impl RadialGrid {
    pub fn new(r0: f64, r_max: f64, n: usize) -> Result<Self> {
        if !r0.is_finite() || !r_max.is_finite() {
            return Err(NlsError::InvalidGrid(format!(
                "radii must be finite (r0 = {r0}, r_max = {r_max})"
            )));
        }
        if r0 < 0.0 {
            return Err(NlsError::InvalidGrid(format!("r0 = {r0} is negative")));
        }
        if r_max <= r0 {
            return Err(NlsError::InvalidGrid(format!(
                "r_max = {r_max} must exceed r0 = {r0}"
            )));
        }
        if n < MIN_NODES {
            return Err(NlsError::InvalidGrid(format!(
                "n = {n} is below the minimum of {MIN_NODES}"
            )));
        }
        let h = (r_max - r0) / (n - 1) as f64;
        Ok(Self { r0, r_max, n, h })
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Free-space mode: the grid starts at the origin.
    pub fn is_euclidean(&self) -> bool {
        self.r0 == 0.0
    }

    #[inline]
    pub fn node(&self, j: usize) -> f64 {
        self.r0 + j as f64 * self.h
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |j| self.node(j))
    }

    /// Composite trapezoid weight of node `j`.
    #[inline]
    pub fn weight(&self, j: usize) -> f64 {
        if j == 0 || j + 1 == self.n {
            0.5 * self.h
        } else {
            self.h
        }
    }

    /// Trapezoid rule for samples taken at the grid nodes.
    pub fn integrate(&self, samples: &[f64]) -> f64 {
        debug_assert_eq!(samples.len(), self.n);
        samples
            .iter()
            .enumerate()
            .map(|(j, s)| self.weight(j) * s)
            .sum()
    }

    /// Same `r0` and spacing scaled by `factor` (used for scaling checks).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.r0 * factor, self.r_max * factor, self.n)
    }
}

/// Samples `v[j] ≈ r_j·u(r_j)` with `v[0] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: RadialGrid,
    v: Vec<Complex64>,
}

impl RadialField {
    pub fn zeros(grid: RadialGrid) -> Self {
        Self {
            grid,
            v: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    /// Samples `u` at the nodes and stores `r·u(r)`; the first node is pinned to 0.
    pub fn from_profile(grid: RadialGrid, u: impl Fn(f64) -> Complex64) -> Self {
        let mut v: Vec<Complex64> = grid.nodes().map(|r| u(r) * r).collect();
        v[0] = Complex64::new(0.0, 0.0);
        Self { grid, v }
    }

    pub fn from_real_profile(grid: RadialGrid, u: impl Fn(f64) -> f64) -> Self {
        Self::from_profile(grid, |r| Complex64::new(u(r), 0.0))
    }

    /// Wraps raw `v` samples; rejects wrong lengths, non-finite entries and `v[0] != 0`.
    pub fn from_samples(grid: RadialGrid, v: Vec<Complex64>) -> Result<Self> {
        if v.len() != grid.len() {
            return Err(NlsError::InvalidField(format!(
                "expected {} samples, got {}",
                grid.len(),
                v.len()
            )));
        }
        if let Some(j) = v.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(NlsError::InvalidField(format!("non-finite sample at node {j}")));
        }
        if v[0] != Complex64::new(0.0, 0.0) {
            return Err(NlsError::InvalidField(
                "v[0] must vanish (Dirichlet / regularity condition)".into(),
            ));
        }
        Ok(Self { grid, v })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn v(&self) -> &[Complex64] {
        &self.v
    }


    pub fn into_samples(self) -> Vec<Complex64> {
        self.v
    }

    pub fn is_zero(&self) -> bool {
        self.v.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            grid: self.grid,
            v: self.v.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            grid: self.grid,
            v: self.v.iter().map(|z| z.conj()).collect(),
        }
    }

    /// `u(r_j)`; at the origin the value is `v'(0)` from a one-sided stencil.
    pub fn u_values(&self) -> Vec<Complex64> {
        let g = &self.grid;
        (0..g.len())
            .map(|j| {
                let r = g.node(j);
                if r > 0.0 {
                    self.v[j] / r
                } else {
                    (self.v[1] * 4.0 - self.v[2]) / (2.0 * g.h())
                }
            })
            .collect()
    }

    /// `|u|²` at each node.
    pub fn density(&self) -> Vec<f64> {
        self.u_values().iter().map(|z| z.norm_sqr()).collect()
    }
}

/// Conserved quantities and norms of a field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSet {
    pub mass: f64,
    pub kinetic: f64,
    pub l4_fourth: f64,
    pub energy: f64,
    pub sup_abs: f64,
}

impl NormSet {
    pub const ZERO: NormSet = NormSet {
        mass: 0.0,
        kinetic: 0.0,
        l4_fourth: 0.0,
        energy: 0.0,
        sup_abs: 0.0,
    };

    /// `‖u‖₂·‖∇u‖₂`
    pub fn kinetic_mass_product(&self) -> f64 {
        self.mass.sqrt() * self.kinetic.sqrt()
    }
}

/// `v_r`: centered differences inside, second-order one-sided at both ends.
pub fn radial_derivative(f: &RadialField) -> Vec<Complex64> {
    derivative_of(f.grid(), f.v())
}

pub(crate) fn derivative_of<T>(grid: &RadialGrid, v: &[T]) -> Vec<T>
where
    T: Copy
        + std::ops::Sub<Output = T>
        + std::ops::Mul<f64, Output = T>
        + std::ops::Add<Output = T>,
{
    let n = v.len();
    let inv2h = 0.5 / grid.h();
    let mut d = Vec::with_capacity(n);
    d.push((v[1] * 4.0 - v[0] * 3.0 - v[2]) * inv2h);
    for j in 1..n - 1 {
        d.push((v[j + 1] - v[j - 1]) * inv2h);
    }
    d.push((v[n - 1] * 3.0 - v[n - 2] * 4.0 + v[n - 3]) * inv2h);
    d
}

pub fn norms(f: &RadialField) -> NormSet {
    let dv = radial_derivative(f);
    norms_with_derivative(f.grid(), f.v(), &dv)
}

/// Norms from samples of `v` and a supplied `v_r`.
pub(crate) fn norms_with_derivative(
    grid: &RadialGrid,
    v: &[Complex64],
    dv: &[Complex64],
) -> NormSet {
    let n = grid.len();
    let mut mass = 0.0;
    let mut kinetic = 0.0;
    let mut l4 = 0.0;
    for j in 0..n {
        let r = grid.node(j);
        let w = grid.weight(j);
        let a2 = v[j].norm_sqr();
        mass += w * a2;
        if r > 0.0 {
            kinetic += w * (dv[j] - v[j] / r).norm_sqr();
            l4 += w * a2 * a2 / (r * r);
        }
    }
    let mass = FOUR_PI * mass;
    let kinetic = FOUR_PI * kinetic;
    let l4_fourth = FOUR_PI * l4;
    let field = RadialField {
        grid: *grid,
        v: v.to_vec(),
    };
    let sup_abs = sup_norm(&field);
    NormSet {
        mass,
        kinetic,
        l4_fourth,
        energy: 0.5 * kinetic - 0.25 * l4_fourth,
        sup_abs,
    }
}

/// `‖u‖_{L^∞}` over the nodes.
pub fn sup_norm(f: &RadialField) -> f64 {
    f.u_values().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `‖u‖_{L^p}^p = 4π∫|v|^p r^{2−p} dr`.
pub fn lp_power(f: &RadialField, p: f64) -> f64 {
    let g = f.grid();
    let mut acc = 0.0;
    for j in 0..g.len() {
        let r = g.node(j);
        if r > 0.0 {
            let u = f.v()[j].norm() / r;
            acc += g.weight(j) * u.powf(p) * r * r;
        }
    }
    FOUR_PI * acc
}

/// `‖∇u‖₂²` (identical to the kinetic entry of [`norms`]).
pub fn kinetic(f: &RadialField) -> f64 {
    norms(f).kinetic
}
