//! Control-field envelope and the cumulative integrals the kernel needs:
//! the control energy E(τ) = ∫ (Ω_c/Δ)² and the two-photon phase D(τ) = ∫ δ_tot.

use num_complex::Complex64;
use thiserror::Error;

use crate::model::{MediumConfig, SimulationGrid};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("control parameter {field} must be finite, got {value}")]
    NonFinite { field: &'static str, value: f64 },
    #[error("{field} must be positive, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("readout pulses out of order: pulse {index} at {tau} does not follow {previous}")]
    Ordering {
        index: usize,
        tau: f64,
        previous: f64,
    },
    #[error("phase knots must be strictly increasing in time")]
    PhaseKnots,
    #[error("grid is not increasing")]
    Grid,
}

/// Smooth switch-off `½[tanh(-(τ - tau0)/t0) + 1]` of the cw level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchOff {
    pub tau0: f64,
    pub t0: f64,
}

/// Gaussian readout pulse `amp · exp(-((τ - tau)/width)²)`. A negative
/// amplitude encodes a π readout phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutPulse {
    pub tau: f64,
    pub width: f64,
    pub amp: f64,
}

impl ReadoutPulse {
    pub fn shape(&self, tau: f64) -> f64 {
        let x = (tau - self.tau) / self.width;
        (-x * x).exp()
    }
}

/// Control Rabi frequency over the one-photon detuning, Ω_c(τ)/Δ.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    pub cw_level: f64,
    pub switch_off: Option<SwitchOff>,
    pub readout: Vec<ReadoutPulse>,
    /// Drop the time-dependent Stark shift from δ_tot, as if it had been
    /// absorbed into the control frequency.
    pub absorb_stark: bool,
    /// Global phase φ(τ) as (τ, φ) knots, linearly interpolated and held
    /// constant outside. Empty means φ ≡ 0.
    pub phase: Vec<(f64, f64)>,
}

/// Default minimum spacing between neighbouring readouts, in units of the
/// sum of their widths.
pub const SEPARATION_FACTOR: f64 = 3.0;

impl ControlSchedule {
    pub fn cw(level: f64) -> Self {
        Self {
            cw_level: level,
            switch_off: None,
            readout: Vec::new(),
            absorb_stark: true,
            phase: Vec::new(),
        }
    }

    pub fn is_cw(&self) -> bool {
        self.switch_off.is_none() && self.readout.is_empty() && self.phase.is_empty()
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        finite("cw_level", self.cw_level)?;
        if let Some(s) = self.switch_off {
            finite("switch_tau0", s.tau0)?;
            positive("switch_T0", s.t0)?;
        }
        for r in &self.readout {
            finite("readout.tau", r.tau)?;
            finite("readout.amp", r.amp)?;
            positive("readout.T", r.width)?;
        }
        let mut previous = self.switch_off.map(|s| s.tau0);
        for (index, r) in self.readout.iter().enumerate() {
            if let Some(p) = previous {
                if r.tau <= p {
                    return Err(ControlError::Ordering {
                        index: index + 1,
                        tau: r.tau,
                        previous: p,
                    });
                }
            }
            previous = Some(r.tau);
        }
        for (t, p) in &self.phase {
            finite("phase", *t)?;
            finite("phase", *p)?;
        }
        if self.phase.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(ControlError::PhaseKnots);
        }
        Ok(())
    }

    /// Switch-off factor f₀ at τ (1 without a switch-off).
    pub fn switch_factor(&self, tau: f64) -> f64 {
        match self.switch_off {
            Some(s) => 0.5 * ((-(tau - s.tau0) / s.t0).tanh() + 1.0),
            None => 1.0,
        }
    }

    /// Signed Ω_c(τ)/Δ.
    pub fn omega_at(&self, tau: f64) -> f64 {
        self.cw_level * self.switch_factor(tau)
            + self
                .readout
                .iter()
                .map(|r| r.amp * r.shape(tau))
                .sum::<f64>()
    }

    /// Σ of the squared components (cw part and each readout) at τ: the
    /// control energy density with the interference between separate
    /// pulses dropped.
    pub fn separated_intensity(&self, tau: f64) -> f64 {
        let cw = self.cw_level * self.switch_factor(tau);
        cw * cw
            + self
                .readout
                .iter()
                .map(|r| (r.amp * r.shape(tau)).powi(2))
                .sum::<f64>()
    }

    pub fn phase_at(&self, tau: f64) -> f64 {
        let knots = &self.phase;
        match knots.len() {
            0 => 0.0,
            1 => knots[0].1,
            _ => {
                if tau <= knots[0].0 {
                    return knots[0].1;
                }
                let k = knots.partition_point(|(t, _)| *t <= tau);
                if k >= knots.len() {
                    return knots[knots.len() - 1].1;
                }
                let (t0, p0) = knots[k - 1];
                let (t1, p1) = knots[k];
                p0 + (p1 - p0) * (tau - t0) / (t1 - t0)
            }
        }
    }

    /// Neighbouring readout pairs (1-based indices) closer than
    /// `factor · (T_i + T_{i+1})`.
    pub fn separation_violations(&self, factor: f64) -> Vec<(usize, usize)> {
        self.readout
            .windows(2)
            .enumerate()
            .filter(|(_, w)| (w[1].tau - w[0].tau).abs() < factor * (w[0].width + w[1].width))
            .map(|(i, _)| (i + 1, i + 2))
            .collect()
    }

    /// Two-photon detuning under this schedule.
    pub fn detuning(&self, cfg: &MediumConfig) -> TwoPhotonDetuning {
        TwoPhotonDetuning {
            constant: cfg.raman_detuning_t,
            stark_coeff: if self.absorb_stark {
                0.0
            } else {
                cfg.stark_per_intensity()
            },
        }
    }
}

fn finite(field: &'static str, value: f64) -> Result<(), ControlError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ControlError::NonFinite { field, value })
    }
}

fn positive(field: &'static str, value: f64) -> Result<(), ControlError> {
    finite(field, value)?;
    if value > 0.0 {
        Ok(())
    } else {
        Err(ControlError::NonPositive { field, value })
    }
}

/// δ_tot(τ)·T = constant + stark_coeff · (Ω_c(τ)/Δ)².
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TwoPhotonDetuning {
    pub constant: f64,
    pub stark_coeff: f64,
}

impl TwoPhotonDetuning {
    pub fn at(&self, omega: f64) -> f64 {
        self.constant + self.stark_coeff * omega * omega
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.stark_coeff == 0.0
    }
}

/// Cumulative tables on a uniform grid.
///
/// Each interval is integrated with Simpson's rule using an extra midpoint
/// evaluation of the analytic control envelope, so the tables are fourth
/// order in the step.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeTables {
    pub tau_min: f64,
    pub step: f64,
    /// Control energy E(τ) = ∫ (Ω_c/Δ)² dτ'.
    pub energy: Vec<f64>,
    /// Phase D(τ) = ∫ δ_tot dτ'.
    pub phase: Vec<f64>,
    /// Ω_c/Δ at the nodes.
    pub omega: Vec<f64>,
    /// δ_tot·T at the nodes.
    pub detuning: Vec<f64>,
    cw_level: f64,
}

impl CumulativeTables {
    pub fn build(
        schedule: &ControlSchedule,
        grid: &SimulationGrid,
        detuning: TwoPhotonDetuning,
    ) -> Result<Self, ControlError> {
        schedule.validate()?;
        let h = grid.step();
        if !(h.is_finite() && h > 0.0) {
            return Err(ControlError::Grid);
        }
        let n = grid.n_tau;
        let omega: Vec<f64> = (0..n).map(|i| schedule.omega_at(grid.tau(i))).collect();
        let delta: Vec<f64> = omega.iter().map(|&w| detuning.at(w)).collect();
        let mut energy = vec![0.0; n];
        let mut phase = vec![0.0; n];
        for i in 1..n {
            let mid = schedule.omega_at(grid.tau_min + (i as f64 - 0.5) * h);
            let (a, b) = (omega[i - 1], omega[i]);
            energy[i] = energy[i - 1] + h / 6.0 * (a * a + 4.0 * mid * mid + b * b);
            phase[i] = phase[i - 1] + h / 6.0 * (delta[i - 1] + 4.0 * detuning.at(mid) + delta[i]);
        }
        Ok(Self {
            tau_min: grid.tau_min,
            step: h,
            energy,
            phase,
            omega,
            detuning: delta,
            cw_level: schedule.cw_level,
        })
    }

    /// Replaces the energy table by the cumulative separated intensity, so
    /// that each readout contributes ∫(a_i g_i)² regardless of its sign.
    pub fn separate_components(&mut self, schedule: &ControlSchedule) {
        let h = self.step;
        let at = |k: f64| schedule.separated_intensity(self.tau_min + k * h);
        for i in 1..self.energy.len() {
            let x = i as f64;
            self.energy[i] =
                self.energy[i - 1] + h / 6.0 * (at(x - 1.0) + 4.0 * at(x - 0.5) + at(x));
        }
    }

    pub fn len(&self) -> usize {
        self.energy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energy.is_empty()
    }

    /// Control energy in units of the cw level, W = E / (Ω₀/Δ)². Falls back
    /// to E when there is no cw level.
    pub fn w(&self) -> Vec<f64> {
        let norm = if self.cw_level != 0.0 {
            self.cw_level * self.cw_level
        } else {
            1.0
        };
        self.energy.iter().map(|e| e / norm).collect()
    }

    /// E at arbitrary τ inside the grid by cubic Hermite interpolation with
    /// the known derivative (Ω_c/Δ)².
    pub fn energy_at(&self, tau: f64) -> f64 {
        self.hermite(tau, &self.energy, |k| self.omega[k] * self.omega[k])
    }

    /// D at arbitrary τ inside the grid.
    pub fn phase_at(&self, tau: f64) -> f64 {
        self.hermite(tau, &self.phase, |k| self.detuning[k])
    }

    fn hermite(&self, tau: f64, values: &[f64], slope: impl Fn(usize) -> f64) -> f64 {
        let n = values.len();
        let x = ((tau - self.tau_min) / self.step).clamp(0.0, (n - 1) as f64);
        let k = (x.floor() as usize).min(n - 2);
        let t = x - k as f64;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * values[k]
            + h10 * self.step * slope(k)
            + h01 * values[k + 1]
            + h11 * self.step * slope(k + 1)
    }

    /// e^{iφ} samples for the schedule's global phase.
    pub fn phase_factors(schedule: &ControlSchedule, grid: &SimulationGrid) -> Vec<Complex64> {
        (0..grid.n_tau)
            .map(|i| Complex64::from_polar(1.0, schedule.phase_at(grid.tau(i))))
            .collect()
    }
}
