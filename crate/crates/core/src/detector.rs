//! Threshold classification, coercivity tracking, windowed space-time norms,
//! the scattering criterion and the virial diagnostic.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cutoffs::{chi_ball, CutoffFamily};
use crate::error::{NlsError, Result};
use crate::grid::{norms, NormSet, RadialField};
use crate::ground_state::ThresholdConstants;
use crate::series::{window_integral, TimeSeries};

/// Relative band inside which a threshold comparison is undecided.
pub const THRESHOLD_BAND: f64 = 1e-6;

/// Position of initial data relative to the ground-state thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum ThresholdClass {
    Below,
    Above,
    /// Margins are `1 − E·M/(E·M)_Q` and `1 − ‖∇u‖‖u‖/(‖∇Q‖‖Q‖)`.
    NearThreshold { em_margin: f64, k_margin: f64 },
}

impl ThresholdClass {
    pub fn name(&self) -> &'static str {
        match self {
            ThresholdClass::Below => "below",
            ThresholdClass::Above => "above",
            ThresholdClass::NearThreshold { .. } => "near_threshold",
        }
    }
}

/// Both threshold margins of `f`, `(em_margin, k_margin)`.
pub fn threshold_margins(f: &RadialField, tc: &ThresholdConstants) -> Result<(f64, f64)> {
    if f.is_zero() {
        return Err(NlsError::InvalidField("zero field has no threshold class".into()));
    }
    Ok(norm_margins(&norms(f), tc))
}

fn norm_margins(n: &NormSet, tc: &ThresholdConstants) -> (f64, f64) {
    (
        1.0 - n.energy * n.mass / tc.em_threshold,
        1.0 - n.kinetic_mass_product() / tc.k_threshold,
    )
}

fn class_of(em_margin: f64, k_margin: f64) -> ThresholdClass {
    if em_margin > THRESHOLD_BAND && k_margin > THRESHOLD_BAND {
        ThresholdClass::Below
    } else if k_margin < -THRESHOLD_BAND {
        ThresholdClass::Above
    } else {
        ThresholdClass::NearThreshold {
            em_margin,
            k_margin,
        }
    }
}

pub fn classify_initial(f: &RadialField, tc: &ThresholdConstants) -> Result<ThresholdClass> {
    let (em_margin, k_margin) = threshold_margins(f, tc)?;
    Ok(class_of(em_margin, k_margin))
}

/// Classification from precomputed norms, e.g. the first row of a series.
/// `None` for zero mass.
pub fn classify_norms(n: &NormSet, tc: &ThresholdConstants) -> Option<ThresholdClass> {
    if n.mass == 0.0 {
        return None;
    }
    let (em_margin, k_margin) = norm_margins(n, tc);
    Some(class_of(em_margin, k_margin))
}

/// Largest `‖u(t)‖₂‖∇u(t)‖₂` over the rows, and the empirical
/// `δ′ = 1 − max/‖∇Q‖‖Q‖`.
pub fn kinetic_mass_track(series: &TimeSeries, tc: &ThresholdConstants) -> (f64, f64) {
    let max = series
        .rows
        .iter()
        .map(|r| r.norms.kinetic_mass_product())
        .fold(0.0, f64::max);
    (max, 1.0 - max / tc.k_threshold)
}

/// `(‖∇f‖² − ¾‖f‖⁴₄)/(‖∇f‖² + ‖f‖⁴₄)` for `f` with
/// `‖f‖₂‖∇f‖₂ ≤ (1 − δ′)‖Q‖₂‖∇Q‖₂`. The zero field gives 1, its small-amplitude limit.
pub fn coercivity_check(f: &RadialField, tc: &ThresholdConstants) -> Result<f64> {
    let n = norms(f);
    let bound = (1.0 - tc.delta_prime) * tc.k_threshold;
    if n.kinetic_mass_product() > bound {
        return Err(NlsError::HypothesisViolated(format!(
            "‖f‖₂‖∇f‖₂ = {} exceeds (1 − δ′)·threshold = {bound}",
            n.kinetic_mass_product()
        )));
    }
    let den = n.kinetic + n.l4_fourth;
    Ok(if den > 0.0 {
        (n.kinetic - 0.75 * n.l4_fourth) / den
    } else {
        1.0
    })
}

/// Coercivity of `g = χ_R f` on the ball: returns whether
/// `‖∇g‖² − ¾‖g‖⁴₄ ≥ δ′‖∇g‖²` and the ratio `(‖∇g‖² − ¾‖g‖⁴₄)/‖∇g‖²`
/// (1 when `g` vanishes).
pub fn localized_coercivity(
    f: &RadialField,
    cf: &CutoffFamily,
    tc: &ThresholdConstants,
) -> (bool, f64) {
    let n = norms(&chi_ball(cf, f));
    if n.kinetic == 0.0 {
        return (true, 1.0);
    }
    let ratio = (n.kinetic - 0.75 * n.l4_fourth) / n.kinetic;
    (ratio >= tc.delta_prime, ratio)
}

/// Smallest radius in `radii` (scanned in increasing order) from which the
/// localized coercivity holds for every state in `states` and every larger
/// scanned radius.
pub fn scan_coercivity_radius(
    states: &[RadialField],
    cf: &CutoffFamily,
    tc: &ThresholdConstants,
    radii: &[f64],
) -> Result<Option<f64>> {
    let mut sorted = radii.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut holds = Vec::with_capacity(sorted.len());
    for &r in &sorted {
        let fam = cf.with_radius(r)?;
        holds.push(states.iter().all(|f| localized_coercivity(f, &fam, tc).0));
    }
    let mut best = None;
    for (r, ok) in sorted.iter().zip(&holds).rev() {
        if !ok {
            break;
        }
        best = Some(*r);
    }
    Ok(best)
}

/// `(∫_{t1}^{t2} ‖u(t)‖^p_{L^p} dt)^{1/p}` for `p ∈ {3, 4, 5, 10}`.
pub fn windowed_norm(series: &TimeSeries, p: u32, window: (f64, f64)) -> Result<f64> {
    let first = series
        .rows
        .first()
        .ok_or(NlsError::WindowUncovered {
            t1: window.0,
            t2: window.1,
        })?;
    if first.lp_power(p).is_none() {
        return Err(NlsError::InvalidParameter(format!("exponent {p} is not one of 3, 4, 5, 10")));
    }
    let values: Vec<f64> = series
        .rows
        .iter()
        .map(|r| r.lp_power(p).unwrap_or(0.0))
        .collect();
    let integral = window_integral(&series.times(), &values, window.0, window.1)?;
    Ok(integral.max(0.0).powf(1.0 / p as f64))
}

/// `(‖u‖_{L⁵}, ‖u‖_{L³}^{3/7}‖u‖_{L¹⁰}^{4/7})` over the window.
pub fn interpolation_l5(series: &TimeSeries, window: (f64, f64)) -> Result<(f64, f64)> {
    let l5 = windowed_norm(series, 5, window)?;
    let l3 = windowed_norm(series, 3, window)?;
    let l10 = windowed_norm(series, 10, window)?;
    Ok((l5, l3.powf(3.0 / 7.0) * l10.powf(4.0 / 7.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictKind {
    ScatteringConsistent,
    Blowup,
    Inconclusive,
}

impl VerdictKind {
    pub fn name(&self) -> &'static str {
        match self {
            VerdictKind::ScatteringConsistent => "ScatteringConsistent",
            VerdictKind::Blowup => "Blowup",
            VerdictKind::Inconclusive => "Inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictWindow {
    pub t_start: f64,
    pub t_end: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub evidence: BTreeMap<String, f64>,
    pub window: Option<VerdictWindow>,
}

/// Windowed `L⁵` norms over `[t_k, t_k + len]` for every row start `t_k`
/// whose window fits in the series.
pub fn l5_window_scan(series: &TimeSeries, len: f64) -> Vec<(f64, f64)> {
    let times = series.times();
    let Some(&t_last) = times.last() else {
        return Vec::new();
    };
    let slack = 1e-9 * len.max(1.0);
    let starts: Vec<f64> = times
        .iter()
        .copied()
        .take_while(|t| t + len <= t_last + slack)
        .collect();
    starts
        .par_iter()
        .map(|&t| {
            let norm = windowed_norm(series, 5, (t, (t + len).min(t_last))).unwrap_or(f64::INFINITY);
            (t, norm)
        })
        .collect()
}

/// Scattering criterion on a series: the earliest window of length
/// `window_len` with `‖u‖_{L⁵_{t,x}} ≤ eps` gives `ScatteringConsistent`;
/// a run that terminated by blowup gives `Blowup`; otherwise `Inconclusive`.
pub fn scattering_verdict(series: &TimeSeries, eps: f64, window_len: f64) -> Verdict {
    let mut evidence = BTreeMap::new();
    if let Some(last) = series.rows.last() {
        evidence.insert("final_l4".to_string(), last.norms.l4_fourth);
        let span = last.t - series.t_start();
        if span > 0.0 {
            let flux = window_integral(&series.times(), &series.column(|r| r.flux), series.t_start(), last.t)
                .unwrap_or(0.0);
            evidence.insert("flux_average".to_string(), flux / span);
        }
    }
    if let Some(c) = virial_concavity(series) {
        evidence.insert("virial_max_second_difference".to_string(), c);
    }
    evidence.insert("eps".to_string(), eps);
    evidence.insert("window_len".to_string(), window_len);
    if let crate::series::Termination::Blowup { t, .. } = series.termination {
        evidence.insert("blowup_time".to_string(), t);
        return Verdict {
            kind: VerdictKind::Blowup,
            evidence,
            window: None,
        };
    }
    let scan = l5_window_scan(series, window_len);
    if let Some(min) = scan.iter().map(|s| s.1).reduce(f64::min) {
        evidence.insert("min_windowed_l5".to_string(), min);
    }
    match scan.iter().find(|(_, norm)| *norm <= eps) {
        Some(&(t, norm)) => {
            evidence.insert("window_l5".to_string(), norm);
            Verdict {
                kind: VerdictKind::ScatteringConsistent,
                evidence,
                window: Some(VerdictWindow {
                    t_start: t,
                    t_end: t + window_len,
                    eps,
                }),
            }
        }
        None => Verdict {
            kind: VerdictKind::Inconclusive,
            evidence,
            window: None,
        },
    }
}

/// Three-point second difference on a possibly non-uniform sampling.
fn second_difference(t: &[f64], y: &[f64], k: usize) -> f64 {
    let (h0, h1) = (t[k] - t[k - 1], t[k + 1] - t[k]);
    2.0 * (h0 * y[k + 1] - (h0 + h1) * y[k] + h1 * y[k - 1]) / (h0 * h1 * (h0 + h1))
}

fn virial_concavity(series: &TimeSeries) -> Option<f64> {
    let t = series.times();
    let v = series.column(|r| r.virial);
    (1..t.len().saturating_sub(1))
        .map(|k| second_difference(&t, &v, k))
        .reduce(f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VirialReport {
    /// `V(t) = ∫|x|²|u|²`
    pub values: Vec<f64>,
    /// `Δ²V/Δt²` at interior rows (index `k` refers to row `k + 1`).
    pub second_difference: Vec<f64>,
    /// `8‖∇u‖² − 6‖u‖⁴₄` at the same rows.
    pub predicted: Vec<f64>,
    /// `8‖∇u‖² + 6‖u‖⁴₄` at the same rows.
    pub scales: Vec<f64>,
    /// Largest relative mismatch over all interior rows.
    pub residual: f64,
}

impl VirialReport {
    /// Residual over interior rows excluding the last `skip` rows.
    pub fn residual_excluding_last(&self, skip: usize) -> f64 {
        let m = self.second_difference.len().saturating_sub(skip);
        (0..m).map(|k| self.relative(k)).fold(0.0, f64::max)
    }

    fn relative(&self, k: usize) -> f64 {
        let err = (self.second_difference[k] - self.predicted[k]).abs();
        if self.scales[k] > 0.0 {
            err / self.scales[k]
        } else {
            err
        }
    }
}

/// Virial diagnostic, free space only. The residual at a row is
/// `|Δ²V/Δt² − (8‖∇u‖² − 6‖u‖⁴₄)| / (8‖∇u‖² + 6‖u‖⁴₄)`.
pub fn virial(series: &TimeSeries, r0: f64) -> Result<VirialReport> {
    if r0 > 0.0 {
        return Err(NlsError::InvalidParameter(
            "virial identity holds in free space only".into(),
        ));
    }
    let t = series.times();
    let values = series.column(|r| r.virial);
    let mut second = Vec::new();
    let mut predicted = Vec::new();
    let mut scales = Vec::new();
    for k in 1..t.len().saturating_sub(1) {
        let n = &series.rows[k].norms;
        second.push(second_difference(&t, &values, k));
        predicted.push(8.0 * n.kinetic - 6.0 * n.l4_fourth);
        scales.push(8.0 * n.kinetic + 6.0 * n.l4_fourth);
    }
    let mut report = VirialReport {
        values,
        second_difference: second,
        predicted,
        scales,
        residual: 0.0,
    };
    report.residual = report.residual_excluding_last(0);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{lp_power, RadialGrid};
    use crate::ground_state::find_ground_state;
    use crate::random::random_radial_field;
    use crate::series::{DiagnosticRow, Termination};
    use num_complex::Complex64;
    use std::sync::OnceLock;

    fn q_and_constants() -> &'static (RadialField, ThresholdConstants) {
        static CELL: OnceLock<(RadialField, ThresholdConstants)> = OnceLock::new();
        CELL.get_or_init(|| {
            let g = RadialGrid::new(0.0, 20.0, 4001).unwrap();
            let gs = find_ground_state(1e-12, &g).unwrap();
            let q = gs.field();
            let tc = ThresholdConstants::from_norms(&norms(&q), 0.5, 0.25);
            (q, tc)
        })
    }

    fn row(t: f64) -> DiagnosticRow {
        DiagnosticRow {
            t,
            norms: NormSet::ZERO,
            action: 0.0,
            terms: Default::default(),
            flux: 0.0,
            interaction: 0.0,
            xi0: 0.0,
            virial: 0.0,
            lp3: 0.0,
            lp5: 0.0,
            lp10: 0.0,
        }
    }

    fn series_with(times: impl Iterator<Item = f64>, f: impl Fn(&mut DiagnosticRow)) -> TimeSeries {
        let rows = times
            .map(|t| {
                let mut r = row(t);
                f(&mut r);
                r
            })
            .collect();
        TimeSeries::new(rows, Termination::Completed)
    }

    #[test]
    fn classification_of_scaled_ground_states() {
        let (q, tc) = q_and_constants();
        assert!(matches!(classify_initial(q, tc).unwrap(), ThresholdClass::NearThreshold { .. }));
        assert_eq!(classify_initial(&q.scale(0.5.into()), tc).unwrap(), ThresholdClass::Below);
        assert_eq!(classify_initial(&q.scale(2.0.into()), tc).unwrap(), ThresholdClass::Above);
        let zero = RadialField::zeros(*q.grid());
        assert!(classify_initial(&zero, tc).is_err());
    }

    #[test]
    fn classification_ignores_phase() {
        let (q, tc) = q_and_constants();
        for s in [0.4, 0.9, 1.3] {
            let f = q.scale(s.into());
            let g = q.scale(Complex64::from_polar(s, 2.1));
            assert_eq!(classify_initial(&f, tc).unwrap(), classify_initial(&g, tc).unwrap());
            assert_eq!(classify_norms(&norms(&f), tc), Some(classify_initial(&f, tc).unwrap()));
        }
        assert_eq!(classify_norms(&NormSet::ZERO, tc), None);
    }

    #[test]
    fn coercivity_below_and_above_the_bound() {
        let (q, tc) = q_and_constants();
        let c = coercivity_check(&q.scale(0.3.into()), tc).unwrap();
        assert!(c > 0.0 && c <= 1.0);
        assert!(matches!(
            coercivity_check(&q.scale(0.9.into()), tc),
            Err(NlsError::HypothesisViolated(_))
        ));
        assert_eq!(coercivity_check(&RadialField::zeros(*q.grid()), tc).unwrap(), 1.0);
    }

    #[test]
    fn windowed_norm_of_constant_integrand() {
        let s = series_with((0..=100).map(|k| 0.1 * k as f64), |r| r.lp5 = 3.0);
        let n = windowed_norm(&s, 5, (2.0, 4.0)).unwrap();
        assert!((n - 6f64.powf(0.2)).abs() < 1e-12);
        assert!(windowed_norm(&s, 7, (2.0, 4.0)).is_err());
        assert!(matches!(
            windowed_norm(&s, 5, (9.0, 11.0)),
            Err(NlsError::WindowUncovered { .. })
        ));
    }

    #[test]
    fn interpolation_holds_on_real_fields() {
        let g = RadialGrid::new(0.0, 20.0, 801).unwrap();
        let s = series_with((0..40).map(|k| 0.25 * k as f64), |r| {
            let f = random_radial_field(g, 7, (4.0 * r.t) as u64);
            r.lp3 = lp_power(&f, 3.0);
            r.norms.l4_fourth = lp_power(&f, 4.0);
            r.lp5 = lp_power(&f, 5.0);
            r.lp10 = lp_power(&f, 10.0);
        });
        for w in [(0.0, 1.0), (0.5, 9.75), (3.0, 3.5)] {
            let (lhs, rhs) = interpolation_l5(&s, w).unwrap();
            assert!(lhs <= rhs + 1e-10, "{w:?}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn verdict_is_monotone_in_eps() {
        let s = series_with((0..=400).map(|k| 0.05 * k as f64), |r| r.lp5 = (-r.t).exp());
        let mut last_start = f64::INFINITY;
        let mut kinds = Vec::new();
        for eps in [1e-4, 1e-3, 1e-2, 0.1, 1.0] {
            let v = scattering_verdict(&s, eps, 2.0);
            kinds.push(v.kind);
            if let Some(w) = v.window {
                assert!(w.t_start <= last_start);
                last_start = w.t_start;
            }
        }
        assert_eq!(kinds[0], VerdictKind::Inconclusive);
        assert_eq!(kinds[4], VerdictKind::ScatteringConsistent);
        let first_ok = kinds.iter().position(|k| *k == VerdictKind::ScatteringConsistent).unwrap();
        assert!(kinds[first_ok..].iter().all(|k| *k == VerdictKind::ScatteringConsistent));
    }

    #[test]
    fn blowup_termination_gives_blowup() {
        let mut s = series_with((0..10).map(|k| 0.1 * k as f64), |_| {});
        s.termination = Termination::Blowup {
            t: 0.95,
            step: 95,
            reason: "sup".into(),
        };
        let v = scattering_verdict(&s, 1.0, 0.5);
        assert_eq!(v.kind, VerdictKind::Blowup);
        assert_eq!(v.evidence["blowup_time"], 0.95);
    }

    #[test]
    fn virial_matches_quadratic_profile() {
        // V = 4t² + t + 2 has V'' = 8 = 8K − 6L with K = 1.75, L = 1.
        let s = series_with((0..30).map(|k| 0.1 * k as f64 + 0.01 * (k % 3) as f64), |r| {
            r.virial = 4.0 * r.t * r.t + r.t + 2.0;
            r.norms.kinetic = 1.75;
            r.norms.l4_fourth = 1.0;
        });
        assert!(virial(&s, 0.0).unwrap().residual < 1e-9);
        assert!(virial(&s, 1.0).is_err());
    }
}
