//! Seeded random radial fields for the property suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{RadialField, RadialGrid};

/// Smooth real radial field: a mixture of one to four Gaussians
/// `c·exp(−((r − a)/w)²)` with random signs, amplitudes, centers and widths.
/// The same `(seed, index)` always gives the same field.
pub fn random_radial_field(grid: RadialGrid, seed: u64, index: u64) -> RadialField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let terms = rng.gen_range(1..=4);
    let span = (grid.r_max() - grid.r0()).min(12.0);
    let bumps: Vec<(f64, f64, f64)> = (0..terms)
        .map(|_| {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let c = sign * rng.gen_range(0.1..2.0);
            let a = grid.r0() + rng.gen_range(0.0..0.5 * span);
            let w = rng.gen_range(0.3..2.0);
            (c, a, w)
        })
        .collect();
    RadialField::from_real_profile(grid, |r| {
        bumps
            .iter()
            .map(|&(c, a, w)| {
                let x = (r - a) / w;
                c * (-x * x).exp()
            })
            .sum()
    })
}

/// Random field rescaled so that `‖f‖₂‖∇f‖₂` equals `target`.
pub fn random_field_with_product(grid: RadialGrid, seed: u64, index: u64, target: f64) -> RadialField {
    let f = random_radial_field(grid, seed, index);
    let p = crate::grid::norms(&f).kinetic_mass_product();
    if p == 0.0 {
        return f;
    }
    // the product scales with the square of the amplitude
    f.scale(num_complex::Complex64::new((target / p).sqrt(), 0.0))
}
