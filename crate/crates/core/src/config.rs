//! Flat `key = value` run configuration.
//!
//! One assignment per line; `#` starts a comment. Values are numbers,
//! `true`/`false`, lists `[a, b, ...]` or tuple lists `[(a, b, c), ...]`.
//! Keys not given keep the defaults of the base configuration.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use thiserror::Error;

use crate::control::{ControlSchedule, ReadoutPulse, SwitchOff};
use crate::model::{InputPulse, MediumConfig, ModelError, SimulationGrid, REGIME_THRESHOLD};
use crate::propagator::Problem;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

impl From<ModelError> for ConfigError {
    fn from(e: ModelError) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSpec {
    pub center: f64,
    pub width: f64,
}

impl Default for PulseSpec {
    fn default() -> Self {
        Self {
            center: 0.0,
            width: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub medium: MediumConfig,
    pub schedule: ControlSchedule,
    pub pulse: PulseSpec,
    pub grid: SimulationGrid,
    /// Two-photon detunings (times T) for dispersion scans.
    pub dispersion_deltas: Vec<f64>,
    /// ζ steps of the PDE integrator.
    pub oracle_n_zeta: usize,
    /// Use the pumping-damped kernel for area scans.
    pub area_damped: bool,
    pub regime_threshold: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let medium = MediumConfig::ringing();
        Self {
            schedule: ControlSchedule::cw(medium.omega0_over_delta),
            medium,
            pulse: PulseSpec::default(),
            grid: SimulationGrid {
                tau_min: -5.0,
                tau_max: 45.0,
                n_tau: 5001,
                z_fractions: vec![0.25, 0.5, 1.0],
            },
            dispersion_deltas: vec![5.0, 2.0, 1.0],
            oracle_n_zeta: 100,
            area_damped: true,
            regime_threshold: REGIME_THRESHOLD,
        }
    }
}

impl RunConfig {
    pub fn problem(&self) -> Result<Problem, ConfigError> {
        self.grid.validate()?;
        Ok(Problem {
            medium: self.medium,
            schedule: self.schedule.clone(),
            pulse: InputPulse::gaussian(self.pulse.center, self.pulse.width)?,
            grid: self.grid.clone(),
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::default().overlay(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::default().overlay_file(path)
    }

    pub fn overlay_file(self, path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        self.overlay(&text)
    }

    /// Applies the assignments in `text` on top of `self`.
    pub fn overlay(mut self, text: &str) -> Result<Self, ConfigError> {
        let mut seen = HashSet::new();
        let mut cw_line = None;
        let mut omega_line = None;
        let mut switch_tau0: Option<(usize, f64)> = None;
        let mut switch_t0: Option<(usize, f64)> = None;

        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| ConfigError::Parse { line, message };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got {content:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(err(format!("duplicate key {key}")));
            }
            let number = || parse_number(value).map_err(&err);
            let m = &mut self.medium;
            match key {
                "gamma_T" => m.gamma_t = number()?,
                "delta_over_gamma" => m.delta_over_gamma = number()?,
                "omega0_over_delta" => {
                    m.omega0_over_delta = number()?;
                    omega_line = Some(line);
                }
                "alpha_L" => m.alpha_l = number()?,
                "raman_detuning_T" => m.raman_detuning_t = number()?,
                "ct_over_L" => m.ct_over_l = number()?,
                "k_L" => m.k_l = number()?,
                "gamma0_T" => m.gamma0_t = number()?,
                "tau_min" => self.grid.tau_min = number()?,
                "tau_max" => self.grid.tau_max = number()?,
                "n_tau" => self.grid.n_tau = parse_count(value).map_err(&err)?,
                "z_fractions" => self.grid.z_fractions = parse_list(value).map_err(&err)?,
                "control.cw_level" => {
                    self.schedule.cw_level = number()?;
                    cw_line = Some(line);
                }
                "control.switch_tau0" => switch_tau0 = Some((line, number()?)),
                "control.switch_T0" => switch_t0 = Some((line, number()?)),
                "control.readout" => {
                    self.schedule.readout = parse_tuples(value)
                        .map_err(&err)?
                        .into_iter()
                        .map(|[tau, width, amp]| ReadoutPulse { tau, width, amp })
                        .collect()
                }
                "control.absorb_stark" => {
                    self.schedule.absorb_stark = parse_bool(value).map_err(&err)?
                }
                "pulse.center" => self.pulse.center = number()?,
                "pulse.width" => self.pulse.width = number()?,
                "dispersion.delta_T" => self.dispersion_deltas = parse_list(value).map_err(&err)?,
                "oracle.n_zeta" => self.oracle_n_zeta = parse_count(value).map_err(&err)?,
                "area.damped" => self.area_damped = parse_bool(value).map_err(&err)?,
                "regime.threshold" => self.regime_threshold = number()?,
                _ => return Err(err(format!("unknown key {key}"))),
            }
        }

        match (cw_line, omega_line) {
            (None, Some(_)) => self.schedule.cw_level = self.medium.omega0_over_delta,
            (Some(line), _) if self.schedule.cw_level != self.medium.omega0_over_delta => {
                return Err(ConfigError::Parse {
                    line,
                    message: format!(
                        "control.cw_level = {} differs from omega0_over_delta = {}",
                        self.schedule.cw_level, self.medium.omega0_over_delta
                    ),
                })
            }
            _ => {}
        }
        match (switch_tau0, switch_t0) {
            (Some((_, tau0)), Some((_, t0))) => {
                self.schedule.switch_off = Some(SwitchOff { tau0, t0 })
            }
            (Some((line, _)), None) | (None, Some((line, _))) => {
                let (tau0, t0) =
                    match (self.schedule.switch_off, switch_tau0, switch_t0) {
                        (Some(s), Some((_, tau0)), None) => (tau0, s.t0),
                        (Some(s), None, Some((_, t0))) => (s.tau0, t0),
                        _ => return Err(ConfigError::Parse {
                            line,
                            message:
                                "control.switch_tau0 and control.switch_T0 must be given together"
                                    .into(),
                        }),
                    };
                self.schedule.switch_off = Some(SwitchOff { tau0, t0 });
            }
            (None, None) => {}
        }

        self.medium.validate()?;
        self.grid.validate()?;
        self.schedule
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.pulse.width > 0.0
            && self.pulse.width.is_finite()
            && self.pulse.center.is_finite())
        {
            return Err(ConfigError::Invalid(
                "pulse.width must be positive and finite".into(),
            ));
        }
        if self.oracle_n_zeta == 0 {
            return Err(ConfigError::Invalid(
                "oracle.n_zeta must be positive".into(),
            ));
        }
        Ok(self)
    }
}

impl fmt::Display for RunConfig {
    /// Writes the configuration back in the file format.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.medium;
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        writeln!(f, "gamma_T = {}", m.gamma_t)?;
        writeln!(f, "delta_over_gamma = {}", m.delta_over_gamma)?;
        writeln!(f, "omega0_over_delta = {}", m.omega0_over_delta)?;
        writeln!(f, "alpha_L = {}", m.alpha_l)?;
        writeln!(f, "raman_detuning_T = {}", m.raman_detuning_t)?;
        writeln!(f, "ct_over_L = {}", m.ct_over_l)?;
        writeln!(f, "k_L = {}", m.k_l)?;
        writeln!(f, "gamma0_T = {}", m.gamma0_t)?;
        writeln!(f, "tau_min = {}", self.grid.tau_min)?;
        writeln!(f, "tau_max = {}", self.grid.tau_max)?;
        writeln!(f, "n_tau = {}", self.grid.n_tau)?;
        writeln!(f, "z_fractions = [{}]", list(&self.grid.z_fractions))?;
        writeln!(f, "control.cw_level = {}", self.schedule.cw_level)?;
        if let Some(s) = self.schedule.switch_off {
            writeln!(f, "control.switch_tau0 = {}", s.tau0)?;
            writeln!(f, "control.switch_T0 = {}", s.t0)?;
        }
        if !self.schedule.readout.is_empty() {
            let items: Vec<String> = self
                .schedule
                .readout
                .iter()
                .map(|r| format!("({}, {}, {})", r.tau, r.width, r.amp))
                .collect();
            writeln!(f, "control.readout = [{}]", items.join(", "))?;
        }
        writeln!(f, "control.absorb_stark = {}", self.schedule.absorb_stark)?;
        writeln!(f, "pulse.center = {}", self.pulse.center)?;
        writeln!(f, "pulse.width = {}", self.pulse.width)?;
        writeln!(
            f,
            "dispersion.delta_T = [{}]",
            list(&self.dispersion_deltas)
        )?;
        writeln!(f, "oracle.n_zeta = {}", self.oracle_n_zeta)?;
        writeln!(f, "area.damped = {}", self.area_damped)?;
        writeln!(f, "regime.threshold = {}", self.regime_threshold)
    }
}

fn parse_number(value: &str) -> Result<f64, String> {
    let x: f64 = value
        .parse()
        .map_err(|_| format!("expected a number, got {value:?}"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("expected a finite number, got {value:?}"))
    }
}

fn parse_count(value: &str) -> Result<usize, String> {
    value
        .parse()
        .map_err(|_| format!("expected a non-negative integer, got {value:?}"))
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got {value:?}")),
    }
}

fn brackets(value: &str) -> Result<&str, String> {
    value
        .strip_prefix('[')
        .and_then(|v| v.strip_suffix(']'))
        .map(str::trim)
        .ok_or_else(|| format!("expected a bracketed list, got {value:?}"))
}

fn parse_list(value: &str) -> Result<Vec<f64>, String> {
    let inner = brackets(value)?;
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    inner.split(',').map(|x| parse_number(x.trim())).collect()
}

fn parse_tuples(value: &str) -> Result<Vec<[f64; 3]>, String> {
    let mut rest = brackets(value)?;
    let mut out = Vec::new();
    while !rest.is_empty() {
        let body = rest
            .strip_prefix('(')
            .ok_or_else(|| format!("expected '(' in readout list near {rest:?}"))?;
        let close = body.find(')').ok_or("unclosed '(' in readout list")?;
        let fields: Vec<f64> = body[..close]
            .split(',')
            .map(|x| parse_number(x.trim()))
            .collect::<Result<_, _>>()?;
        let tuple: [f64; 3] = fields.try_into().map_err(|v: Vec<f64>| {
            format!("readout entries need (tau, T, amp), got {} values", v.len())
        })?;
        out.push(tuple);
        rest = body[close + 1..].trim_start();
        if let Some(r) = rest.strip_prefix(',') {
            rest = r.trim_start();
        } else if !rest.is_empty() {
            return Err(format!(
                "expected ',' between readout entries near {rest:?}"
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let text = cfg.to_string();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn full_file() {
        let text = "\
# time-bin run
gamma_T = 7.2
omega0_over_delta = 0.05   # cw level follows
alpha_L = 3.5
tau_min = -5
tau_max = 12
n_tau = 1701
z_fractions = [1.0]
control.switch_tau0 = 0
control.switch_T0 = 1.5
control.readout = [(4, 0.7071, 0.05), (7, 0.7071, -0.05)]
control.absorb_stark = true
";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.schedule.cw_level, 0.05);
        assert_eq!(
            cfg.schedule.switch_off,
            Some(SwitchOff { tau0: 0.0, t0: 1.5 })
        );
        assert_eq!(cfg.schedule.readout.len(), 2);
        assert_eq!(cfg.schedule.readout[1].amp, -0.05);
        assert_eq!(cfg.grid.n_tau, 1701);
        let round = RunConfig::parse(&cfg.to_string()).unwrap();
        assert_eq!(round, cfg);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("gamma_T = 1\nbogus = 3\n", 2),
            ("\n\nalpha_L = abc", 3),
            ("alpha_L = 1\nalpha_L = 2", 2),
            ("z_fractions = 0.5", 1),
            ("control.readout = [(1, 2)]", 1),
            ("control.switch_T0 = 1.5", 1),
            ("omega0_over_delta = 0.1\ncontrol.cw_level = 0.2", 2),
            ("just text", 1),
        ];
        for (text, line) in cases {
            match RunConfig::parse(text) {
                Err(ConfigError::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(matches!(
            RunConfig::parse("alpha_L = -1"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            RunConfig::parse("n_tau = 1"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            RunConfig::parse(
                "control.switch_tau0 = 0\ncontrol.switch_T0 = 1\ncontrol.readout = [(-1, 1, 0.1)]"
            ),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn empty_lists() {
        let cfg = RunConfig::parse("control.readout = []\ndispersion.delta_T = []").unwrap();
        assert!(cfg.schedule.readout.is_empty());
        assert!(cfg.dispersion_deltas.is_empty());
    }
}
