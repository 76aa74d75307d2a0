//! Run configuration and its flat `key = value` text format.
//!
//! ```text
//! # free-space soliton
//! name = soliton
//! grid.r0 = 0
//! grid.r_max = 40
//! grid.n = 3201
//! time.dt = 0.005
//! initial = ground_state{scale = 1}
//! ```
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{NlsError, Result};
use crate::grid::RadialGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Nonlinear,
    Linear,
}

/// Real-valued initial data `u(0, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    /// `A·exp(−((r − c)/w)²)`
    Gaussian { amplitude: f64, width: f64, center: f64 },
    /// `scale·Q(r)`
    GroundState { scale: f64 },
    /// `A·cos²(π(r − c)/(2w))` on `|r − c| < w`, zero elsewhere.
    Ring { amplitude: f64, center: f64, width: f64 },
}

impl InitialData {
    /// Value of the profile at `r` for the closed-form kinds; `None` for the ground state.
    pub fn profile(&self, r: f64) -> Option<f64> {
        match *self {
            InitialData::Gaussian {
                amplitude,
                width,
                center,
            } => {
                let x = (r - center) / width;
                Some(amplitude * (-x * x).exp())
            }
            InitialData::Ring {
                amplitude,
                center,
                width,
            } => {
                let x = (r - center) / width;
                if x.abs() < 1.0 {
                    let c = (0.5 * std::f64::consts::PI * x).cos();
                    Some(amplitude * c * c)
                } else {
                    Some(0.0)
                }
            }
            InitialData::GroundState { .. } => None,
        }
    }

    fn set_field(&mut self, field: &str, value: f64) -> std::result::Result<(), String> {
        let slot = match (self, field) {
            (InitialData::Gaussian { amplitude, .. }, "amplitude") => amplitude,
            (InitialData::Gaussian { width, .. }, "width") => width,
            (InitialData::Gaussian { center, .. }, "center") => center,
            (InitialData::Ring { amplitude, .. }, "amplitude") => amplitude,
            (InitialData::Ring { width, .. }, "width") => width,
            (InitialData::Ring { center, .. }, "center") => center,
            (InitialData::GroundState { scale }, "scale" | "amplitude") => scale,
            (data, f) => return Err(format!("`{f}` is not a field of {}", data.kind())),
        };
        *slot = value;
        Ok(())
    }

    pub fn kind(&self) -> &'static str {
        match self {
            InitialData::Gaussian { .. } => "gaussian",
            InitialData::GroundState { .. } => "ground_state",
            InitialData::Ring { .. } => "ring",
        }
    }

    fn parse(text: &str) -> std::result::Result<Self, String> {
        let text = text.trim();
        let (kind, body) = match text.find('{') {
            Some(i) => {
                let body = text[i + 1..]
                    .strip_suffix('}')
                    .ok_or_else(|| "descriptor must end with `}`".to_string())?;
                (text[..i].trim(), body)
            }
            None => (text, ""),
        };
        let mut data = match kind {
            "gaussian" => InitialData::Gaussian {
                amplitude: 1.0,
                width: 1.0,
                center: 0.0,
            },
            "ground_state" => InitialData::GroundState { scale: 1.0 },
            "ring" => InitialData::Ring {
                amplitude: 1.0,
                center: 3.0,
                width: 1.0,
            },
            other => return Err(format!("unknown initial-data kind `{other}`")),
        };
        for item in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| format!("expected `name = value`, got `{item}`"))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| format!("`{}` is not a number", v.trim()))?;
            data.set_field(k.trim(), v)?;
        }
        Ok(data)
    }
}

impl fmt::Display for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            InitialData::Gaussian {
                amplitude,
                width,
                center,
            } => write!(
                f,
                "gaussian{{amplitude = {amplitude:?}, width = {width:?}, center = {center:?}}}"
            ),
            InitialData::GroundState { scale } => write!(f, "ground_state{{scale = {scale:?}}}"),
            InitialData::Ring {
                amplitude,
                center,
                width,
            } => write!(
                f,
                "ring{{amplitude = {amplitude:?}, center = {center:?}, width = {width:?}}}"
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    None,
    Scattering,
    Blowup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub name: String,
    pub mode: Mode,
    pub r0: f64,
    pub r_max: f64,
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub sample_every: usize,
    /// Sponge width as a fraction of `r_max − r0`.
    pub sponge_width: f64,
    /// Peak absorption rate σ₀; zero disables the sponge.
    pub sponge_strength: f64,
    pub initial: InitialData,
    /// Cutoff scale radius R₀ of the Morawetz weights.
    pub cutoff_radius: f64,
    pub cutoff_eta: f64,
    pub cutoff_n_tab: usize,
    /// Number of e-folds J of the radius average over `[R₀, e^J R₀]`.
    pub cutoff_j: f64,
    pub cutoff_n_radii: usize,
    pub detector_eps: f64,
    pub detector_window: f64,
    pub detector_t0: Vec<f64>,
    pub delta_prime: f64,
    pub rho: f64,
    pub gs_r_max: f64,
    pub gs_n: usize,
    pub gs_tol: f64,
    pub decay_t_a: f64,
    pub decay_t_b: f64,
    pub interaction: bool,
    pub expect: Expectation,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            name: "run".into(),
            mode: Mode::Nonlinear,
            r0: 0.0,
            r_max: 40.0,
            n: 1601,
            dt: 0.005,
            t_end: 5.0,
            sample_every: 10,
            sponge_width: 0.15,
            sponge_strength: 0.0,
            initial: InitialData::Gaussian {
                amplitude: 1.0,
                width: 1.0,
                center: 0.0,
            },
            cutoff_radius: 4.0,
            cutoff_eta: 0.1,
            cutoff_n_tab: 1024,
            cutoff_j: 2.0,
            cutoff_n_radii: 8,
            detector_eps: 0.2,
            detector_window: 5.0,
            detector_t0: vec![10.0, 20.0, 40.0, 80.0],
            delta_prime: 0.5,
            rho: crate::ground_state::DEFAULT_RHO,
            gs_r_max: 30.0,
            gs_n: 30001,
            gs_tol: crate::ground_state::DEFAULT_TOL,
            decay_t_a: 1.0,
            decay_t_b: 8.0,
            interaction: true,
            expect: Expectation::None,
        }
    }
}

/// Every key accepted by the text format, in canonical order.
pub const KEYS: &[&str] = &[
    "name",
    "mode",
    "grid.r0",
    "grid.r_max",
    "grid.n",
    "time.dt",
    "time.t_end",
    "time.sample_every",
    "sponge.width",
    "sponge.strength",
    "initial",
    "cutoff.radius",
    "cutoff.eta",
    "cutoff.n_tab",
    "cutoff.j",
    "cutoff.n_radii",
    "detector.eps",
    "detector.window",
    "detector.t0",
    "threshold.delta_prime",
    "threshold.rho",
    "ground_state.r_max",
    "ground_state.n",
    "ground_state.tol",
    "decay.t_a",
    "decay.t_b",
    "diagnostics.interaction",
    "expect",
];

fn parse_f64(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("`{v}` is not a number"))?;
    if !x.is_finite() {
        return Err(format!("`{v}` is not finite"));
    }
    Ok(x)
}

fn parse_usize(v: &str) -> std::result::Result<usize, String> {
    v.parse().map_err(|_| format!("`{v}` is not a nonnegative integer"))
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        _ => Err(format!("`{v}` is not a boolean")),
    }
}

impl RunConfig {
    /// Sets one key from its textual value. Keys of the form
    /// `initial.<field>` edit a field of the current initial-data descriptor.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        match key {
            "name" => self.name = v.to_string(),
            "mode" => {
                self.mode = match v {
                    "nonlinear" => Mode::Nonlinear,
                    "linear" => Mode::Linear,
                    _ => return Err(format!("mode must be `nonlinear` or `linear`, got `{v}`")),
                }
            }
            "grid.r0" => self.r0 = parse_f64(v)?,
            "grid.r_max" => self.r_max = parse_f64(v)?,
            "grid.n" => self.n = parse_usize(v)?,
            "time.dt" => self.dt = parse_f64(v)?,
            "time.t_end" => self.t_end = parse_f64(v)?,
            "time.sample_every" => self.sample_every = parse_usize(v)?,
            "sponge.width" => self.sponge_width = parse_f64(v)?,
            "sponge.strength" => self.sponge_strength = parse_f64(v)?,
            "initial" => self.initial = InitialData::parse(v)?,
            "cutoff.radius" => self.cutoff_radius = parse_f64(v)?,
            "cutoff.eta" => self.cutoff_eta = parse_f64(v)?,
            "cutoff.n_tab" => self.cutoff_n_tab = parse_usize(v)?,
            "cutoff.j" => self.cutoff_j = parse_f64(v)?,
            "cutoff.n_radii" => self.cutoff_n_radii = parse_usize(v)?,
            "detector.eps" => self.detector_eps = parse_f64(v)?,
            "detector.window" => self.detector_window = parse_f64(v)?,
            "detector.t0" => {
                self.detector_t0 = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(parse_f64)
                    .collect::<std::result::Result<_, _>>()?
            }
            "threshold.delta_prime" => self.delta_prime = parse_f64(v)?,
            "threshold.rho" => self.rho = parse_f64(v)?,
            "ground_state.r_max" => self.gs_r_max = parse_f64(v)?,
            "ground_state.n" => self.gs_n = parse_usize(v)?,
            "ground_state.tol" => self.gs_tol = parse_f64(v)?,
            "decay.t_a" => self.decay_t_a = parse_f64(v)?,
            "decay.t_b" => self.decay_t_b = parse_f64(v)?,
            "diagnostics.interaction" => self.interaction = parse_bool(v)?,
            "expect" => {
                self.expect = match v {
                    "none" => Expectation::None,
                    "scattering" => Expectation::Scattering,
                    "blowup" => Expectation::Blowup,
                    _ => return Err(format!("expect must be none, scattering or blowup, got `{v}`")),
                }
            }
            k if k.starts_with("initial.") => {
                let x = parse_f64(v)?;
                self.initial.set_field(&k["initial.".len()..], x)?;
            }
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| NlsError::Config {
                line: idx + 1,
                key: line.to_string(),
                msg: "expected `key = value`".into(),
            })?;
            let key = key.trim();
            cfg.set(key, value).map_err(|msg| NlsError::Config {
                line: idx + 1,
                key: key.to_string(),
                msg,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn invalid(key: &str, msg: impl Into<String>) -> NlsError {
        NlsError::Config {
            line: 0,
            key: key.to_string(),
            msg: msg.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()
            .map_err(|e| Self::invalid("grid", e.to_string()))?;
        if !(self.dt > 0.0) {
            return Err(Self::invalid("time.dt", "must be positive"));
        }
        if !(self.t_end >= 0.0) {
            return Err(Self::invalid("time.t_end", "must be nonnegative"));
        }
        if self.sample_every == 0 {
            return Err(Self::invalid("time.sample_every", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.sponge_width) {
            return Err(Self::invalid("sponge.width", "must lie in [0, 1)"));
        }
        if self.sponge_strength < 0.0 {
            return Err(Self::invalid("sponge.strength", "must be nonnegative"));
        }
        if self.cutoff_n_radii == 0 {
            return Err(Self::invalid("cutoff.n_radii", "must be at least 1"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.r0, self.r_max, self.n)
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let s = match key {
            "name" => self.name.clone(),
            "mode" => match self.mode {
                Mode::Nonlinear => "nonlinear".into(),
                Mode::Linear => "linear".into(),
            },
            "grid.r0" => format!("{:?}", self.r0),
            "grid.r_max" => format!("{:?}", self.r_max),
            "grid.n" => self.n.to_string(),
            "time.dt" => format!("{:?}", self.dt),
            "time.t_end" => format!("{:?}", self.t_end),
            "time.sample_every" => self.sample_every.to_string(),
            "sponge.width" => format!("{:?}", self.sponge_width),
            "sponge.strength" => format!("{:?}", self.sponge_strength),
            "initial" => self.initial.to_string(),
            "cutoff.radius" => format!("{:?}", self.cutoff_radius),
            "cutoff.eta" => format!("{:?}", self.cutoff_eta),
            "cutoff.n_tab" => self.cutoff_n_tab.to_string(),
            "cutoff.j" => format!("{:?}", self.cutoff_j),
            "cutoff.n_radii" => self.cutoff_n_radii.to_string(),
            "detector.eps" => format!("{:?}", self.detector_eps),
            "detector.window" => format!("{:?}", self.detector_window),
            "detector.t0" => self
                .detector_t0
                .iter()
                .map(|t| format!("{t:?}"))
                .collect::<Vec<_>>()
                .join(", "),
            "threshold.delta_prime" => format!("{:?}", self.delta_prime),
            "threshold.rho" => format!("{:?}", self.rho),
            "ground_state.r_max" => format!("{:?}", self.gs_r_max),
            "ground_state.n" => self.gs_n.to_string(),
            "ground_state.tol" => format!("{:?}", self.gs_tol),
            "decay.t_a" => format!("{:?}", self.decay_t_a),
            "decay.t_b" => format!("{:?}", self.decay_t_b),
            "diagnostics.interaction" => self.interaction.to_string(),
            "expect" => match self.expect {
                Expectation::None => "none".into(),
                Expectation::Scattering => "scattering".into(),
                Expectation::Blowup => "blowup".into(),
            },
            _ => return None,
        };
        Some(s)
    }

    /// Canonical text form; `parse(to_text())` reproduces the config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("known key"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_example() {
        let cfg = RunConfig::parse(
            "# comment\nname = soliton\n\ngrid.r0 = 0\ngrid.r_max = 40\ngrid.n = 3201\n\
             time.dt = 0.005 # trailing\ninitial = ground_state{scale = 1}\n",
        )
        .unwrap();
        assert_eq!(cfg.name, "soliton");
        assert_eq!(cfg.n, 3201);
        assert_eq!(cfg.initial, InitialData::GroundState { scale: 1.0 });
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let err = RunConfig::parse("name = x\ngrid.bogus = 3\n").unwrap_err();
        match err {
            NlsError::Config { line, key, .. } => {
                assert_eq!(line, 2);
                assert_eq!(key, "grid.bogus");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn descriptor_fields_and_errors() {
        let mut cfg = RunConfig::default();
        cfg.set("initial", "ring{amplitude = 0.5, center = 4, width = 2}")
            .unwrap();
        assert_eq!(
            cfg.initial,
            InitialData::Ring {
                amplitude: 0.5,
                center: 4.0,
                width: 2.0
            }
        );
        cfg.set("initial.amplitude", "0.25").unwrap();
        assert!(matches!(cfg.initial, InitialData::Ring { amplitude, .. } if amplitude == 0.25));
        assert!(cfg.set("initial", "square{side = 1}").is_err());
        assert!(cfg.set("initial", "gaussian{depth = 1}").is_err());
        assert!(cfg.set("initial.scale", "2").is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.dt = 0.1 + 0.2;
        cfg.detector_t0 = vec![1.5, 3.0];
        cfg.initial = InitialData::Ring {
            amplitude: 1.0 / 3.0,
            center: 4.0,
            width: 1.5,
        };
        assert_eq!(RunConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn validation() {
        assert!(RunConfig::parse("time.dt = 0").is_err());
        assert!(RunConfig::parse("time.sample_every = 0").is_err());
        assert!(RunConfig::parse("grid.n = 4").is_err());
        assert!(RunConfig::parse("grid.r0 = 50").is_err());
        assert!(RunConfig::parse("time.t_end = 0").is_ok());
    }
}
