//! Restorable snapshots of a run.
//!
//! A checkpoint is a JSON object tagged `"format": "nlslab-checkpoint-v1"`
//! holding the grid `(r0, r_max, n)`, the time, step index and time origin,
//! the blowup guard of the run, and the field as a base-16 payload: for each
//! node the IEEE-754 bit patterns of the real and imaginary parts, 16 hex
//! digits each, little end first in node order. The payload restores the
//! field bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{NlsError, Result};
use crate::evolve::{BlowupGuard, SimState};
use crate::grid::{RadialField, RadialGrid};

pub const FORMAT_TAG: &str = "nlslab-checkpoint-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub r0: f64,
    pub r_max: f64,
    pub n: usize,
    pub t: f64,
    pub step: u64,
    pub t_origin: f64,
    pub dt: f64,
    pub guard: BlowupGuard,
    pub payload: String,
}

impl Checkpoint {
    pub fn capture(state: &SimState, guard: BlowupGuard, t_origin: f64, dt: f64) -> Self {
        let g = state.field.grid();
        let mut payload = String::with_capacity(32 * g.len());
        for z in state.field.v() {
            let _ = write!(payload, "{:016x}{:016x}", z.re.to_bits(), z.im.to_bits());
        }
        Self {
            format: FORMAT_TAG.to_string(),
            r0: g.r0(),
            r_max: g.r_max(),
            n: g.len(),
            t: state.t,
            step: state.step_index,
            t_origin,
            dt,
            guard,
            payload,
        }
    }

    pub fn restore(&self) -> Result<SimState> {
        if self.format != FORMAT_TAG {
            return Err(NlsError::Checkpoint(format!("unknown format tag `{}`", self.format)));
        }
        let grid = RadialGrid::new(self.r0, self.r_max, self.n)?;
        if self.payload.len() != 32 * self.n {
            return Err(NlsError::Checkpoint(format!(
                "payload holds {} hex digits, expected {}",
                self.payload.len(),
                32 * self.n
            )));
        }
        let word = |k: usize| -> Result<f64> {
            let s = self
                .payload
                .get(16 * k..16 * k + 16)
                .ok_or_else(|| NlsError::Checkpoint("payload is not ASCII hex".into()))?;
            u64::from_str_radix(s, 16)
                .map(f64::from_bits)
                .map_err(|e| NlsError::Checkpoint(format!("payload word {k}: {e}")))
        };
        let v = (0..self.n)
            .map(|j| Ok(Complex64::new(word(2 * j)?, word(2 * j + 1)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(SimState {
            t: self.t,
            field: RadialField::from_samples(grid, v)?,
            step_index: self.step,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| NlsError::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let g = RadialGrid::new(1.0, 5.0, 33).unwrap();
        let f = RadialField::from_profile(g, |r| Complex64::new((r * 1.7).sin() / 3.0, -1e-300 * r));
        let s = SimState {
            t: 0.1 + 0.2,
            field: f.clone(),
            step_index: 30,
        };
        let guard = BlowupGuard::from_field(&f);
        let c = Checkpoint::capture(&s, guard, 0.0, 0.01);
        let back = Checkpoint::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back.restore().unwrap(), s);
        assert_eq!(back.guard, guard);
    }

    #[test]
    fn bad_payloads_are_rejected() {
        let g = RadialGrid::new(0.0, 5.0, 17).unwrap();
        let s = SimState::initial(RadialField::zeros(g));
        let mut c = Checkpoint::capture(&s, BlowupGuard::from_field(&s.field), 0.0, 0.1);
        c.payload.pop();
        assert!(c.restore().is_err());
        let mut c = Checkpoint::capture(&s, BlowupGuard::from_field(&s.field), 0.0, 0.1);
        c.format = "other".into();
        assert!(c.restore().is_err());
        assert!(Checkpoint::from_json("{").is_err());
    }
}
