//! Sampled diagnostics along a run and their CSV form.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NlsError, Result};
use crate::grid::NormSet;

/// Radial terms of the Morawetz rate decomposition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionTerms {
    /// `4∫[φ|∇u|² − ¾φ₁|u|⁴]`
    pub bulk: f64,
    /// `−2∫_{∂Ω} ψ x·n |∂ₙu|² dS`
    pub boundary: f64,
    /// `4∫(ψ−φ)|∇̸u|²`, identically zero for radial fields.
    pub angular: f64,
    /// `−∫[3(φ−φ₁) + 2(ψ−φ)]|u|⁴`
    pub quartic_err: f64,
    /// `∫∇[3φ + 2(ψ−φ)]·∇|u|²`
    pub gradient_err: f64,
}

impl ActionTerms {
    pub fn sum(&self) -> f64 {
        self.bulk + self.boundary + self.angular + self.quartic_err + self.gradient_err
    }

    pub fn abs_sum(&self) -> f64 {
        self.bulk.abs()
            + self.boundary.abs()
            + self.angular.abs()
            + self.quartic_err.abs()
            + self.gradient_err.abs()
    }

    pub fn named(&self) -> [(&'static str, f64); 5] {
        [
            ("bulk", self.bulk),
            ("boundary", self.boundary),
            ("angular", self.angular),
            ("quartic_err", self.quartic_err),
            ("gradient_err", self.gradient_err),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub t: f64,
    pub norms: NormSet,
    pub action: f64,
    pub terms: ActionTerms,
    pub flux: f64,
    pub interaction: f64,
    pub xi0: f64,
    pub virial: f64,
    /// `‖u‖_{L³}³`
    pub lp3: f64,
    /// `‖u‖_{L⁵}⁵`
    pub lp5: f64,
    /// `‖u‖_{L¹⁰}¹⁰`
    pub lp10: f64,
}

impl DiagnosticRow {
    /// `‖u(t)‖_{L^p}^p` for the exponents carried by a row.
    pub fn lp_power(&self, p: u32) -> Option<f64> {
        match p {
            3 => Some(self.lp3),
            4 => Some(self.norms.l4_fourth),
            5 => Some(self.lp5),
            10 => Some(self.lp10),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Blowup { t: f64, step: u64, reason: String },
}

impl Termination {
    pub fn is_blowup(&self) -> bool {
        matches!(self, Termination::Blowup { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub rows: Vec<DiagnosticRow>,
    pub termination: Termination,
}

pub const CSV_HEADER: &str = "t,mass,energy,kinetic,l4,linf,action,term_bulk,term_boundary,\
term_quartic_err,term_gradient_err,flux,interaction,xi0,virial,lp3,lp5,lp10";

const N_COLUMNS: usize = 18;

impl TimeSeries {
    pub fn new(rows: Vec<DiagnosticRow>, termination: Termination) -> Self {
        Self { rows, termination }
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn column(&self, f: impl Fn(&DiagnosticRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    pub fn t_start(&self) -> f64 {
        self.rows.first().map_or(0.0, |r| r.t)
    }

    pub fn t_end(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.t)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let n = &r.norms;
            let tm = &r.terms;
            let _ = writeln!(
                out,
                "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
                r.t,
                n.mass,
                n.energy,
                n.kinetic,
                n.l4_fourth,
                n.sup_abs,
                r.action,
                tm.bulk,
                tm.boundary,
                tm.quartic_err,
                tm.gradient_err,
                r.flux,
                r.interaction,
                r.xi0,
                r.virial,
                r.lp3,
                r.lp5,
                r.lp10
            );
        }
        out
    }

    /// Parses rows written by [`TimeSeries::to_csv`]. The termination reason
    /// is not part of the CSV and is reported as `Completed`.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(NlsError::Corrupt {
            row: 0,
            msg: "empty file".into(),
        })?;
        if header.trim() != CSV_HEADER {
            return Err(NlsError::Corrupt {
                row: 0,
                msg: "unexpected header".into(),
            });
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| NlsError::Corrupt {
                    row,
                    msg: e.to_string(),
                })?;
            if vals.len() != N_COLUMNS {
                return Err(NlsError::Corrupt {
                    row,
                    msg: format!("expected {N_COLUMNS} fields, found {}", vals.len()),
                });
            }
            rows.push(DiagnosticRow {
                t: vals[0],
                norms: NormSet {
                    mass: vals[1],
                    energy: vals[2],
                    kinetic: vals[3],
                    l4_fourth: vals[4],
                    sup_abs: vals[5],
                },
                action: vals[6],
                terms: ActionTerms {
                    bulk: vals[7],
                    boundary: vals[8],
                    angular: 0.0,
                    quartic_err: vals[9],
                    gradient_err: vals[10],
                },
                flux: vals[11],
                interaction: vals[12],
                xi0: vals[13],
                virial: vals[14],
                lp3: vals[15],
                lp5: vals[16],
                lp10: vals[17],
            });
        }
        Ok(Self::new(rows, Termination::Completed))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

/// `∫_{t1}^{t2}` of the piecewise-linear interpolant through `(times, values)`.
pub fn window_integral(times: &[f64], values: &[f64], t1: f64, t2: f64) -> Result<f64> {
    const SLACK: f64 = 1e-9;
    if times.is_empty() || t2 < t1 {
        return Err(NlsError::WindowUncovered { t1, t2 });
    }
    let span = (times[times.len() - 1] - times[0]).abs().max(1.0);
    if t1 < times[0] - SLACK * span || t2 > times[times.len() - 1] + SLACK * span {
        return Err(NlsError::WindowUncovered { t1, t2 });
    }
    let mut acc = 0.0;
    for k in 0..times.len().saturating_sub(1) {
        let (a, b) = (times[k], times[k + 1]);
        let lo = a.max(t1);
        let hi = b.min(t2);
        if hi <= lo {
            continue;
        }
        let at = |t: f64| values[k] + (values[k + 1] - values[k]) * (t - a) / (b - a);
        acc += 0.5 * (hi - lo) * (at(lo) + at(hi));
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64) -> DiagnosticRow {
        DiagnosticRow {
            t,
            norms: NormSet {
                mass: 1.0 / 3.0,
                kinetic: 2.0,
                l4_fourth: 1e-300,
                energy: -0.5,
                sup_abs: 7.25,
            },
            action: -1.0e-17,
            terms: ActionTerms {
                bulk: 1.0,
                boundary: 2.0,
                angular: 0.0,
                quartic_err: 3.0,
                gradient_err: 4.0,
            },
            flux: 0.1,
            interaction: 123456.789,
            xi0: 0.0,
            virial: 5.5,
            lp3: 1.0,
            lp5: 2.0,
            lp10: 3.0,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let s = TimeSeries::new(vec![row(0.0), row(0.1 + 0.2)], Termination::Completed);
        let back = TimeSeries::from_csv(&s.to_csv()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_csv(), s.to_csv());
    }

    #[test]
    fn truncated_csv_names_row() {
        let s = TimeSeries::new(vec![row(0.0), row(1.0)], Termination::Completed);
        let mut text = s.to_csv();
        text.truncate(text.len() - 10);
        match TimeSeries::from_csv(&text) {
            Err(NlsError::Corrupt { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(TimeSeries::from_csv("a,b\n").is_err());
    }

    #[test]
    fn window_integral_of_linear_data() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let v = [0.0, 1.0, 2.0, 3.0];
        let i = window_integral(&t, &v, 0.5, 2.5).unwrap();
        assert!((i - 3.0).abs() < 1e-14);
        assert!(window_integral(&t, &v, -1.0, 1.0).is_err());
        assert!(window_integral(&t, &v, 1.0, 4.0).is_err());
    }
}
