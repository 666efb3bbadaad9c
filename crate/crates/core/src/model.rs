//! Physical parameters in the dimensionless unit system (time in units of
//! the input pulse duration T, depth in units of the medium length L), the
//! input photon wave packet, and the sampling grid.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::special::integrate_samples;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{field} must be finite, got {value}")]
    NonFinite { field: &'static str, value: f64 },
    #[error("{field} must be non-negative, got {value}")]
    Negative { field: &'static str, value: f64 },
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("invalid input pulse: {0}")]
    Pulse(String),
    #[error(
        "input pulse is not contained in [{tau_min}, {tau_max}]: edge amplitude ratio {ratio:e}"
    )]
    Support {
        tau_min: f64,
        tau_max: f64,
        ratio: f64,
    },
}

/// Dimensionless medium and field parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MediumConfig {
    /// Excited-state decay rate times pulse duration, γT.
    pub gamma_t: f64,
    /// One-photon detuning in units of γ.
    pub delta_over_gamma: f64,
    /// cw control Rabi frequency over the one-photon detuning.
    pub omega0_over_delta: f64,
    /// Resonant optical depth of the full medium.
    pub alpha_l: f64,
    /// Raman detuning times T (any sign).
    pub raman_detuning_t: f64,
    /// Pulse length over medium length; enters only the loss diagnostic.
    pub ct_over_l: f64,
    /// Linear absorption depth; used only by the PDE integrator's loss terms.
    pub k_l: f64,
    /// Raman coherence damping times T.
    pub gamma0_t: f64,
}

impl Default for MediumConfig {
    fn default() -> Self {
        Self::ringing()
    }
}

impl MediumConfig {
    /// Cold-atom parameter set behind the cw ringing runs: Δ = 20γ,
    /// Ω0/Δ = 0.1, T = 200 ns with γ = 2π·5.75 MHz (γT ≈ 7.2), and αL chosen
    /// so that the ringing-duration estimate gives 10T (c1 ≈ 0.126).
    pub fn ringing() -> Self {
        Self {
            gamma_t: 7.2,
            delta_over_gamma: 20.0,
            omega0_over_delta: 0.1,
            alpha_l: 3.5,
            raman_detuning_t: 0.0,
            ct_over_l: 2000.0,
            k_l: 0.0,
            gamma0_t: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("gamma_T", self.gamma_t, true),
            ("delta_over_gamma", self.delta_over_gamma, true),
            ("omega0_over_delta", self.omega0_over_delta, true),
            ("alpha_L", self.alpha_l, true),
            ("raman_detuning_T", self.raman_detuning_t, false),
            ("ct_over_L", self.ct_over_l, true),
            ("k_L", self.k_l, true),
            ("gamma0_T", self.gamma0_t, true),
        ];
        for (field, value, non_negative) in fields {
            if !value.is_finite() {
                return Err(ModelError::NonFinite { field, value });
            }
            if non_negative && value < 0.0 {
                return Err(ModelError::Negative { field, value });
            }
        }
        Ok(())
    }

    /// Kernel coupling per unit (Ω/Δ)²: (αL/2)·γT. Multiplying by the
    /// squared control amplitude gives c1.
    pub fn coupling_per_intensity(&self) -> f64 {
        0.5 * self.alpha_l * self.gamma_t
    }

    /// Stark shift per unit (Ω/Δ)², in units of 1/T: γT·(Δ/γ).
    pub fn stark_per_intensity(&self) -> f64 {
        self.gamma_t * self.delta_over_gamma
    }

    /// Optical pumping rate per unit (Ω/Δ)², in units of 1/T: γT/2.
    pub fn pumping_per_intensity(&self) -> f64 {
        0.5 * self.gamma_t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedCouplings {
    /// Kernel coupling c1 = (αL/2)·γT·(Ω0/Δ)².
    pub c1: f64,
    /// Optical pumping rate ΓT = (γT/2)·(Ω0/Δ)².
    pub gamma_pump_t: f64,
    pub alpha_l: f64,
    /// Stark shift of the cw level times T.
    pub stark_t: f64,
}

pub fn derive_couplings(cfg: &MediumConfig) -> Result<DerivedCouplings, ModelError> {
    cfg.validate()?;
    let intensity = cfg.omega0_over_delta * cfg.omega0_over_delta;
    Ok(DerivedCouplings {
        c1: cfg.coupling_per_intensity() * intensity,
        gamma_pump_t: cfg.pumping_per_intensity() * intensity,
        alpha_l: cfg.alpha_l,
        stark_t: cfg.stark_per_intensity() * intensity,
    })
}

/// Default bound for the "much less than" regime conditions.
pub const REGIME_THRESHOLD: f64 = 0.5;
/// Stricter advisory bound.
pub const REGIME_ADVISORY: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegimeWarning {
    /// Linear absorption over the medium is not small.
    Absorption { k_l: f64 },
    /// Optical pumping during the pulse is not small.
    OpticalPumping { gamma_pump_t: f64 },
    /// Control field is not far detuned from the excited state.
    ControlNotFarDetuned { omega0_over_delta: f64 },
    /// Excited-state linewidth is not small against the detuning.
    LinewidthNotFarDetuned { gamma_over_delta: f64 },
    /// A zero-detuning cw run was requested while |δ_tot·T| is not small.
    TwoPhotonDetuning { delta_tot_t: f64 },
}

impl fmt::Display for RegimeWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Absorption { k_l } => write!(f, "linear absorption kL = {k_l} is not small"),
            Self::OpticalPumping { gamma_pump_t } => {
                write!(f, "optical pumping ΓT = {gamma_pump_t} is not small")
            }
            Self::ControlNotFarDetuned { omega0_over_delta } => {
                write!(f, "control is not far detuned: Ω0/Δ = {omega0_over_delta}")
            }
            Self::LinewidthNotFarDetuned { gamma_over_delta } => {
                write!(
                    f,
                    "detuning is not large against γ: γ/Δ = {gamma_over_delta}"
                )
            }
            Self::TwoPhotonDetuning { delta_tot_t } => {
                write!(
                    f,
                    "two-photon detuning δ_tot·T = {delta_tot_t} is not small"
                )
            }
        }
    }
}

/// Checks the weak-absorption, weak-pumping and far-detuning conditions.
///
/// `zero_detuning_request` carries the effective δ_tot·T when a cw run at
/// two-photon resonance is requested; |δ_tot·T| ≥ 1 is then reported.
pub fn check_regime(
    cfg: &MediumConfig,
    threshold: f64,
    zero_detuning_request: Option<f64>,
) -> Vec<RegimeWarning> {
    let mut warnings = Vec::new();
    if cfg.k_l >= threshold {
        warnings.push(RegimeWarning::Absorption { k_l: cfg.k_l });
    }
    let gamma_pump_t = cfg.pumping_per_intensity() * cfg.omega0_over_delta.powi(2);
    if gamma_pump_t >= threshold {
        warnings.push(RegimeWarning::OpticalPumping { gamma_pump_t });
    }
    if cfg.omega0_over_delta >= threshold {
        warnings.push(RegimeWarning::ControlNotFarDetuned {
            omega0_over_delta: cfg.omega0_over_delta,
        });
    }
    let gamma_over_delta = 1.0 / cfg.delta_over_gamma;
    if gamma_over_delta >= threshold {
        warnings.push(RegimeWarning::LinewidthNotFarDetuned { gamma_over_delta });
    }
    if let Some(delta_tot_t) = zero_detuning_request {
        if delta_tot_t.abs() >= 1.0 {
            warnings.push(RegimeWarning::TwoPhotonDetuning { delta_tot_t });
        }
    }
    warnings
}

/// Uniform τ grid plus the depths at which outputs are requested.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationGrid {
    pub tau_min: f64,
    pub tau_max: f64,
    pub n_tau: usize,
    pub z_fractions: Vec<f64>,
}

impl SimulationGrid {
    pub fn new(
        tau_min: f64,
        tau_max: f64,
        n_tau: usize,
        z_fractions: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let grid = Self {
            tau_min,
            tau_max,
            n_tau,
            z_fractions,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.tau_min.is_finite() && self.tau_max.is_finite()) || self.tau_max <= self.tau_min {
            return Err(ModelError::Grid(format!(
                "need tau_max > tau_min, got [{}, {}]",
                self.tau_min, self.tau_max
            )));
        }
        if self.n_tau < 2 {
            return Err(ModelError::Grid(format!(
                "n_tau must be at least 2, got {}",
                self.n_tau
            )));
        }
        if let Some(z) = self.z_fractions.iter().find(|z| !(0.0..=1.0).contains(*z)) {
            return Err(ModelError::Grid(format!(
                "depth fraction {z} outside [0, 1]"
            )));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.tau_max - self.tau_min) / (self.n_tau - 1) as f64
    }

    pub fn tau(&self, i: usize) -> f64 {
        self.tau_min + i as f64 * self.step()
    }

    pub fn taus(&self) -> Vec<f64> {
        (0..self.n_tau).map(|i| self.tau(i)).collect()
    }

    /// Index of the node nearest to `tau`, clamped to the grid.
    pub fn index_of(&self, tau: f64) -> usize {
        let x = ((tau - self.tau_min) / self.step()).round();
        x.clamp(0.0, (self.n_tau - 1) as f64) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PulseShape {
    /// `exp(-((τ - center)/width)²)`.
    Gaussian { center: f64, width: f64 },
    /// Complex samples on a uniform grid, linearly interpolated, zero outside.
    Sampled {
        start: f64,
        step: f64,
        samples: Vec<Complex64>,
    },
}

/// Single-photon input wave packet at the medium entrance, normalized so
/// that `∫|f(τ)|² dτ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputPulse {
    shape: PulseShape,
    scale: f64,
}

/// Edge amplitude, relative to the peak, below which a pulse counts as
/// contained in the window.
pub const SUPPORT_TOLERANCE: f64 = 1e-8;

impl InputPulse {
    pub fn gaussian(center: f64, width: f64) -> Result<Self, ModelError> {
        if !center.is_finite() || !(width.is_finite() && width > 0.0) {
            return Err(ModelError::Pulse(format!(
                "gaussian needs finite center and positive width, got ({center}, {width})"
            )));
        }
        // ∫ exp(-2x²/w²) dx = w·sqrt(π/2)
        let scale = 1.0 / (width * (0.5 * PI).sqrt()).sqrt();
        Ok(Self {
            shape: PulseShape::Gaussian { center, width },
            scale,
        })
    }

    pub fn sampled(start: f64, step: f64, samples: Vec<Complex64>) -> Result<Self, ModelError> {
        if samples.len() < 2 || !(step.is_finite() && step > 0.0) || !start.is_finite() {
            return Err(ModelError::Pulse(
                "sampled pulse needs ≥ 2 samples and a positive step".into(),
            ));
        }
        if samples
            .iter()
            .any(|s| !(s.re.is_finite() && s.im.is_finite()))
        {
            return Err(ModelError::Pulse(
                "sampled pulse contains non-finite values".into(),
            ));
        }
        // Piecewise-linear interpolant: ∫|f|² over each cell is exact for the
        // quadratic |a + (b-a)t|², i.e. (|a|² + Re(a b*) + |b|²)/3 · step.
        let norm: f64 = samples
            .windows(2)
            .map(|w| (w[0].norm_sqr() + (w[0] * w[1].conj()).re + w[1].norm_sqr()) / 3.0)
            .sum::<f64>()
            * step;
        if norm <= 0.0 {
            return Err(ModelError::Pulse(
                "sampled pulse is identically zero".into(),
            ));
        }
        Ok(Self {
            shape: PulseShape::Sampled {
                start,
                step,
                samples,
            },
            scale: 1.0 / norm.sqrt(),
        })
    }

    pub fn shape(&self) -> &PulseShape {
        &self.shape
    }

    pub fn amplitude(&self, tau: f64) -> Complex64 {
        match &self.shape {
            PulseShape::Gaussian { center, width } => {
                let x = (tau - center) / width;
                Complex64::new(self.scale * (-x * x).exp(), 0.0)
            }
            PulseShape::Sampled {
                start,
                step,
                samples,
            } => {
                let x = (tau - start) / step;
                if x < 0.0 || x > (samples.len() - 1) as f64 {
                    return Complex64::new(0.0, 0.0);
                }
                let k = (x.floor() as usize).min(samples.len() - 2);
                let t = x - k as f64;
                (samples[k] * (1.0 - t) + samples[k + 1] * t) * self.scale
            }
        }
    }

    pub fn sample(&self, grid: &SimulationGrid) -> Vec<Complex64> {
        (0..grid.n_tau)
            .map(|i| self.amplitude(grid.tau(i)))
            .collect()
    }

    /// Intensity-weighted mean time.
    pub fn center(&self) -> f64 {
        match &self.shape {
            PulseShape::Gaussian { center, .. } => *center,
            PulseShape::Sampled {
                start,
                step,
                samples,
            } => {
                let weights: Vec<f64> = samples.iter().map(|s| s.norm_sqr()).collect();
                let total: f64 = weights.iter().sum();
                weights
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * (start + k as f64 * step))
                    .sum::<f64>()
                    / total
            }
        }
    }

    /// Pulse area ∫ f dτ.
    pub fn area(&self) -> Complex64 {
        match &self.shape {
            PulseShape::Gaussian { width, .. } => {
                Complex64::new(self.scale * width * PI.sqrt(), 0.0)
            }
            PulseShape::Sampled { step, samples, .. } => {
                // Trapezoid is exact for the piecewise-linear interpolant.
                let inner: Complex64 = samples.iter().sum();
                (inner - (samples[0] + samples[samples.len() - 1]) * 0.5) * (*step * self.scale)
            }
        }
    }

    /// Verifies that the pulse is negligible at both window edges.
    pub fn check_support(&self, grid: &SimulationGrid) -> Result<(), ModelError> {
        let values = self.sample(grid);
        let peak = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let peak = match &self.shape {
            PulseShape::Gaussian { .. } => peak.max(self.scale),
            PulseShape::Sampled { .. } => peak,
        };
        let edge = values[0].norm().max(values[values.len() - 1].norm());
        let ratio = if peak > 0.0 { edge / peak } else { 0.0 };
        if ratio >= SUPPORT_TOLERANCE || (peak == 0.0) {
            return Err(ModelError::Support {
                tau_min: grid.tau_min,
                tau_max: grid.tau_max,
                ratio,
            });
        }
        Ok(())
    }

    /// ∫|f|² over the grid by composite Simpson.
    pub fn norm_on(&self, grid: &SimulationGrid) -> f64 {
        let samples: Vec<f64> = self.sample(grid).iter().map(|v| v.norm_sqr()).collect();
        integrate_samples(&samples, grid.step()).value
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn couplings_for_ringing_parameters() {
        let d = derive_couplings(&MediumConfig::ringing()).unwrap();
        assert!((d.c1 - 0.126).abs() < 1e-12);
        assert!((d.gamma_pump_t - 0.036).abs() < 1e-12);
        assert!((d.stark_t - 1.44).abs() < 1e-12);
        // Ringing-duration estimate 20·c1^(1/3) ≈ 10.
        assert!((20.0 * d.c1.cbrt() - 10.0).abs() < 0.05);
    }

    #[test]
    fn zero_control_gives_zero_coupling() {
        let cfg = MediumConfig {
            omega0_over_delta: 0.0,
            ..MediumConfig::ringing()
        };
        let d = derive_couplings(&cfg).unwrap();
        assert_eq!(d.c1, 0.0);
        assert_eq!(d.gamma_pump_t, 0.0);
    }

    #[test]
    fn unit_product_coupling() {
        let cfg = MediumConfig {
            alpha_l: 2.0,
            gamma_t: 1.0,
            omega0_over_delta: 1.0,
            ..MediumConfig::ringing()
        };
        assert_eq!(derive_couplings(&cfg).unwrap().c1, 1.0);
    }

    #[test]
    fn pumping_to_coupling_ratio_is_inverse_depth() {
        for (alpha_l, omega) in [(3.5, 0.1), (0.7, 0.05), (12.0, 0.3)] {
            let cfg = MediumConfig {
                alpha_l,
                omega0_over_delta: omega,
                ..MediumConfig::ringing()
            };
            let d = derive_couplings(&cfg).unwrap();
            assert!((d.gamma_pump_t / d.c1 - 1.0 / alpha_l).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_non_finite_and_negative() {
        let cfg = MediumConfig {
            gamma_t: f64::NAN,
            ..MediumConfig::ringing()
        };
        assert!(matches!(
            derive_couplings(&cfg),
            Err(ModelError::NonFinite {
                field: "gamma_T",
                ..
            })
        ));
        let cfg = MediumConfig {
            alpha_l: -1.0,
            ..MediumConfig::ringing()
        };
        assert!(matches!(
            derive_couplings(&cfg),
            Err(ModelError::Negative {
                field: "alpha_L",
                ..
            })
        ));
        let cfg = MediumConfig {
            raman_detuning_t: -3.0,
            ..MediumConfig::ringing()
        };
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn regime_checks() {
        assert!(check_regime(&MediumConfig::ringing(), REGIME_THRESHOLD, Some(0.0)).is_empty());

        let strong = MediumConfig {
            omega0_over_delta: 1.0,
            ..MediumConfig::ringing()
        };
        let warnings = check_regime(&strong, REGIME_THRESHOLD, None);
        assert!(warnings
            .iter()
            .any(|w| matches!(w, RegimeWarning::ControlNotFarDetuned { .. })));

        let lossy = MediumConfig {
            k_l: 1.0,
            ..MediumConfig::ringing()
        };
        assert_eq!(
            check_regime(&lossy, REGIME_THRESHOLD, None),
            vec![RegimeWarning::Absorption { k_l: 1.0 }]
        );

        let w = check_regime(&MediumConfig::ringing(), REGIME_THRESHOLD, Some(1.44));
        assert_eq!(
            w,
            vec![RegimeWarning::TwoPhotonDetuning { delta_tot_t: 1.44 }]
        );
    }

    #[test]
    fn grid_validation() {
        assert!(SimulationGrid::new(0.0, 1.0, 2, vec![0.0, 1.0]).is_ok());
        assert!(SimulationGrid::new(1.0, 1.0, 10, vec![]).is_err());
        assert!(SimulationGrid::new(0.0, 1.0, 1, vec![]).is_err());
        assert!(SimulationGrid::new(0.0, 1.0, 10, vec![1.5]).is_err());
        let g = SimulationGrid::new(-5.0, 5.0, 1001, vec![1.0]).unwrap();
        assert!((g.step() - 0.01).abs() < 1e-15);
        assert_eq!(g.index_of(0.0), 500);
    }

    #[test]
    fn gaussian_is_normalized_with_known_area() {
        let grid = SimulationGrid::new(-8.0, 8.0, 4001, vec![]).unwrap();
        for width in [0.5, 1.0, 2.0] {
            let p = InputPulse::gaussian(0.3, width).unwrap();
            assert!((p.norm_on(&grid) - 1.0).abs() < 1e-12);
            // Unnormalized profile exp(-τ²/w²) has area w·sqrt(π).
            let peak = p.amplitude(0.3).re;
            assert!((p.area().re / peak - width * PI.sqrt()).abs() < 1e-12);
        }
        assert!(p_support(&grid));
    }

    fn p_support(grid: &SimulationGrid) -> bool {
        InputPulse::gaussian(0.0, 1.0)
            .unwrap()
            .check_support(grid)
            .is_ok()
    }

    #[test]
    fn support_violation_detected() {
        let grid = SimulationGrid::new(-2.0, 10.0, 1201, vec![]).unwrap();
        let p = InputPulse::gaussian(0.0, 1.0).unwrap();
        assert!(matches!(
            p.check_support(&grid),
            Err(ModelError::Support { .. })
        ));
    }

    #[test]
    fn sampled_pulse_normalizes_itself() {
        let samples: Vec<Complex64> = (0..401)
            .map(|k| {
                let t = -4.0 + k as f64 * 0.02;
                Complex64::new(3.0 * (-t * t).exp(), 0.0)
            })
            .collect();
        let p = InputPulse::sampled(-4.0, 0.02, samples).unwrap();
        let grid = SimulationGrid::new(-5.0, 5.0, 2001, vec![]).unwrap();
        assert!((p.norm_on(&grid) - 1.0).abs() < 1e-3);
        let g = InputPulse::gaussian(0.0, 1.0).unwrap();
        assert!((p.amplitude(0.31) - g.amplitude(0.31)).norm() < 1e-3);
        assert!(p.center().abs() < 1e-12);
    }
}
