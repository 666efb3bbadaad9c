//! Closed-form propagation of the photon wave function through the medium.
//!
//! With a(τ) = Ω_c(τ)/Δ, E the cumulative control energy and D the
//! cumulative two-photon phase, the field at depth ζ is
//!
//! ```text
//! Φ(ζ,τ) = f(τ) − 2κζ a(τ) e^{iφ(τ)} ∫ f(τ') a(τ') e^{−iφ(τ')} K1(ψ) e^{−i(D(τ)−D(τ'))} dτ'
//! ψ = 2 sqrt(κζ (E(τ) − E(τ')))
//! ```
//!
//! where κ = (αL/2)·γT and K1(x) = J1(x)/x. For a cw control κa² is the
//! usual coupling c1. The coherence uses the same integral with the kernel
//! 2K1 − J2 in place of 2κζ·K1 and no leading term.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::control::{ControlError, ControlSchedule, CumulativeTables, TwoPhotonDetuning};
use crate::model::{InputPulse, MediumConfig, ModelError, SimulationGrid};
use crate::special::{integrate_samples, kernel_k1, kernel_retrieval, simpson_weight, Estimate};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropagationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("depth fraction {0} outside [0, 1]")]
    Depth(f64),
    #[error("quadrature error estimate {error:e} at depth {zeta} exceeds {limit:e}")]
    QuadratureNotConverged { zeta: f64, error: f64, limit: f64 },
}

/// Everything needed to evaluate one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub medium: MediumConfig,
    pub schedule: ControlSchedule,
    pub pulse: InputPulse,
    pub grid: SimulationGrid,
}

impl Problem {
    pub fn detuning(&self) -> TwoPhotonDetuning {
        self.schedule.detuning(&self.medium)
    }
}

/// Complex samples on the uniform τ grid at one depth.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub zeta: f64,
    pub tau_min: f64,
    pub step: f64,
    pub values: Vec<Complex64>,
    /// Largest Richardson error estimate of the underlying integrals.
    pub error: f64,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn tau(&self, i: usize) -> f64 {
        self.tau_min + i as f64 * self.step
    }

    pub fn intensity(&self) -> Vec<f64> {
        intensity(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `tau_over_T,re_phi,im_phi,intensity`, twelve significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "tau_over_T,re_phi,im_phi,intensity")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(
                out,
                "{:.11e},{:.11e},{:.11e},{:.11e}",
                self.tau(i),
                v.re,
                v.im,
                v.norm_sqr()
            )?;
        }
        Ok(())
    }
}

pub fn intensity(values: &[Complex64]) -> Vec<f64> {
    values.iter().map(|v| v.norm_sqr()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldOptions {
    /// Insert e^{−Γ(τ−τ')} with the cw pumping rate Γ.
    pub damped: bool,
    /// Error budget relative to max|f|.
    pub quad_tol: f64,
}

impl Default for FieldOptions {
    fn default() -> Self {
        Self {
            damped: false,
            quad_tol: 1e-6,
        }
    }
}

/// Prepared samples and tables for one problem.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub(crate) problem: Problem,
    pub(crate) tables: CumulativeTables,
    pub(crate) input: Vec<Complex64>,
    /// a(τ)·e^{−iφ(τ)}.
    pub(crate) coupling: Vec<Complex64>,
    pub(crate) kappa: f64,
    pub(crate) gamma_pump: f64,
    detuning: TwoPhotonDetuning,
    toeplitz: bool,
    input_peak: f64,
}

impl Propagator {
    pub fn new(problem: Problem) -> Result<Self, PropagationError> {
        problem.medium.validate()?;
        problem.grid.validate()?;
        problem.pulse.check_support(&problem.grid)?;
        let detuning = problem.detuning();
        let tables = CumulativeTables::build(&problem.schedule, &problem.grid, detuning)?;
        let input = problem.pulse.sample(&problem.grid);
        let phases = CumulativeTables::phase_factors(&problem.schedule, &problem.grid);
        let coupling = tables
            .omega
            .iter()
            .zip(&phases)
            .map(|(&a, p)| p.conj() * a)
            .collect();
        let kappa = problem.medium.coupling_per_intensity();
        let gamma_pump = problem.medium.pumping_per_intensity() * problem.schedule.cw_level.powi(2);
        let toeplitz = problem.schedule.is_cw();
        let input_peak = input.iter().map(|v| v.norm()).fold(0.0, f64::max);
        Ok(Self {
            problem,
            tables,
            input,
            coupling,
            kappa,
            gamma_pump,
            detuning,
            toeplitz,
            input_peak,
        })
    }

    /// Copy whose kernel uses the separated control energy (see
    /// [`CumulativeTables::separate_components`]).
    pub fn with_separated_energy(&self) -> Self {
        let mut copy = self.clone();
        copy.tables.separate_components(&self.problem.schedule);
        copy.toeplitz = false;
        copy
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn grid(&self) -> &SimulationGrid {
        &self.problem.grid
    }

    pub fn tables(&self) -> &CumulativeTables {
        &self.tables
    }

    pub fn input(&self) -> &[Complex64] {
        &self.input
    }

    pub fn input_series(&self) -> TimeSeries {
        self.series(0.0, self.input.clone(), 0.0)
    }

    /// Kernel coupling c1 of the cw level.
    pub fn c1(&self) -> f64 {
        self.kappa * self.problem.schedule.cw_level.powi(2)
    }

    pub fn gamma_pump(&self) -> f64 {
        self.gamma_pump
    }

    fn series(&self, zeta: f64, values: Vec<Complex64>, error: f64) -> TimeSeries {
        TimeSeries {
            zeta,
            tau_min: self.problem.grid.tau_min,
            step: self.problem.grid.step(),
            values,
            error,
        }
    }

    fn check_depth(zeta: f64) -> Result<(), PropagationError> {
        if (0.0..=1.0).contains(&zeta) {
            Ok(())
        } else {
            Err(PropagationError::Depth(zeta))
        }
    }

    fn check_error(
        &self,
        zeta: f64,
        error: f64,
        opts: &FieldOptions,
    ) -> Result<(), PropagationError> {
        let limit = opts.quad_tol * self.input_peak;
        if error > limit || error.is_nan() {
            Err(PropagationError::QuadratureNotConverged { zeta, error, limit })
        } else {
            Ok(())
        }
    }

    /// R_i = ∫_{τmin}^{τ_i} source(τ') K(ψ(τ_i,τ')) e^{−i(D(τ_i)−D(τ'))} [e^{−Γ(τ_i−τ')}] dτ'
    /// with Simpson weights, plus a Richardson estimate at even nodes.
    pub(crate) fn volterra<K>(
        &self,
        zeta: f64,
        source: &[Complex64],
        kernel: K,
        damped: bool,
    ) -> Vec<Estimate<Complex64>>
    where
        K: Fn(f64) -> f64 + Sync,
    {
        let n = source.len();
        let h = self.tables.step;
        let scale = self.kappa * zeta;
        let gamma = if damped { self.gamma_pump } else { 0.0 };

        if self.toeplitz {
            let a2 = self.problem.schedule.cw_level.powi(2);
            let delta = self.detuning.at(self.problem.schedule.cw_level);
            let table: Vec<Complex64> = (0..n)
                .map(|m| {
                    let u = m as f64 * h;
                    let psi = 2.0 * (scale * a2 * u).sqrt();
                    Complex64::from_polar(kernel(psi) * (-gamma * u).exp(), -delta * u)
                })
                .collect();
            return (0..n)
                .into_par_iter()
                .map(|i| sum_with_estimate(i, h, |j| source[j] * table[i - j]))
                .collect();
        }

        let energy = &self.tables.energy;
        let phase = &self.tables.phase;
        let rotated: Vec<Complex64> = source
            .iter()
            .zip(phase)
            .map(|(s, &d)| s * Complex64::from_polar(1.0, d))
            .collect();
        let damping: Vec<f64> = (0..n).map(|m| (-gamma * m as f64 * h).exp()).collect();
        (0..n)
            .into_par_iter()
            .map(|i| {
                let e_i = energy[i];
                let est = sum_with_estimate(i, h, |j| {
                    let psi = 2.0 * (scale * (e_i - energy[j]).max(0.0)).sqrt();
                    rotated[j] * (kernel(psi) * damping[i - j])
                });
                let back = Complex64::from_polar(1.0, -phase[i]);
                Estimate {
                    value: est.value * back,
                    error: est.error,
                }
            })
            .collect()
    }

    /// Photon wave function Φ(ζ, τ) on the grid.
    pub fn propagate_field(
        &self,
        zeta: f64,
        opts: &FieldOptions,
    ) -> Result<TimeSeries, PropagationError> {
        Self::check_depth(zeta)?;
        if zeta == 0.0
            || self.kappa == 0.0
            || self.coupling.iter().all(|c| *c == Complex64::new(0.0, 0.0))
        {
            return Ok(self.series(zeta, self.input.clone(), 0.0));
        }
        let source: Vec<Complex64> = self
            .input
            .iter()
            .zip(&self.coupling)
            .map(|(f, c)| f * c)
            .collect();
        let sums = self.volterra(zeta, &source, kernel_k1, opts.damped);
        let prefactor = 2.0 * self.kappa * zeta;
        let mut error: f64 = 0.0;
        let values = sums
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let outer = self.coupling[i].conj() * prefactor;
                error = error.max(s.error * outer.norm());
                self.input[i] - outer * s.value
            })
            .collect();
        self.check_error(zeta, error, opts)?;
        Ok(self.series(zeta, values, error))
    }

    /// Coherence bracket ∫ f(τ') (a(τ')/a0) e^{−iφ(τ')} [2K1 − J2](ψ) e^{−i(D(τ)−D(τ'))} dτ'.
    ///
    /// The scaled coherence is this bracket times [`Propagator::coherence_scale`].
    /// Without a cw level the amplitude is not divided out.
    pub fn coherence(
        &self,
        zeta: f64,
        opts: &FieldOptions,
    ) -> Result<TimeSeries, PropagationError> {
        Self::check_depth(zeta)?;
        let norm = self.amplitude_norm();
        let source: Vec<Complex64> = self
            .input
            .iter()
            .zip(&self.coupling)
            .map(|(f, c)| f * c / norm)
            .collect();
        let sums = self.volterra(zeta, &source, kernel_retrieval, opts.damped);
        let error = sums.iter().map(|s| s.error).fold(0.0, f64::max);
        self.check_error(zeta, error, opts)?;
        Ok(self.series(zeta, sums.into_iter().map(|s| s.value).collect(), error))
    }

    /// Factor turning the coherence bracket into the scaled coherence s̃
    /// that pairs with Φ in the field equations: i·sqrt(κ)·a0.
    pub fn coherence_scale(&self) -> Complex64 {
        Complex64::new(0.0, self.kappa.sqrt() * self.amplitude_norm())
    }

    fn amplitude_norm(&self) -> f64 {
        let a0 = self.problem.schedule.cw_level;
        if a0 != 0.0 {
            a0
        } else {
            1.0
        }
    }
}

fn sum_with_estimate<F>(i: usize, h: f64, term: F) -> Estimate<Complex64>
where
    F: Fn(usize) -> Complex64,
{
    if i == 0 {
        return Estimate {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
        };
    }
    let mut fine = Complex64::new(0.0, 0.0);
    let mut coarse = Complex64::new(0.0, 0.0);
    let check = i.is_multiple_of(2) && i >= 4;
    for j in 0..=i {
        let t = term(j);
        fine += t * simpson_weight(i, j);
        if check && j % 2 == 0 {
            coarse += t * (2.0 * simpson_weight(i / 2, j / 2));
        }
    }
    let error = if check {
        (fine - coarse).norm() * h / 15.0
    } else {
        0.0
    };
    Estimate {
        value: fine * h,
        error,
    }
}

/// Shape diagnostics of an output relative to the input.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseDiagnostics {
    /// Shift of the intensity-weighted mean time.
    pub centroid_delay: f64,
    /// Local intensity maxima above 5% of the global maximum, as times.
    pub peaks: Vec<f64>,
    /// Relative change of the intensity-weighted variance.
    pub second_moment_change: f64,
}

/// Fraction of the global maximum a local maximum must exceed to count.
pub const PEAK_FRACTION: f64 = 0.05;

pub fn moments(series: &TimeSeries) -> (f64, f64) {
    let i = series.intensity();
    let n = integrate_samples(&i, series.step).value;
    let weighted: Vec<f64> = i
        .iter()
        .enumerate()
        .map(|(k, v)| v * series.tau(k))
        .collect();
    let mean = integrate_samples(&weighted, series.step).value / n;
    let spread: Vec<f64> = i
        .iter()
        .enumerate()
        .map(|(k, v)| v * (series.tau(k) - mean).powi(2))
        .collect();
    (mean, integrate_samples(&spread, series.step).value / n)
}

/// Times of local intensity maxima above `fraction` of the global maximum.
pub fn intensity_peaks(series: &TimeSeries, fraction: f64) -> Vec<f64> {
    let i = series.intensity();
    let max = i.iter().cloned().fold(0.0, f64::max);
    (1..i.len().saturating_sub(1))
        .filter(|&k| i[k] > i[k - 1] && i[k] >= i[k + 1] && i[k] > fraction * max)
        .map(|k| series.tau(k))
        .collect()
}

impl PulseDiagnostics {
    pub fn compare(output: &TimeSeries, input: &TimeSeries) -> Self {
        let (m_out, v_out) = moments(output);
        let (m_in, v_in) = moments(input);
        Self {
            centroid_delay: m_out - m_in,
            peaks: intensity_peaks(output, PEAK_FRACTION),
            second_moment_change: v_out / v_in - 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionResult {
    pub delta_t: f64,
    pub series: TimeSeries,
    pub diagnostics: PulseDiagnostics,
}

/// Output at ζ = 1 under a cw control for each constant two-photon detuning
/// (the Stark shift taken as absorbed).
pub fn dispersion_scan(
    problem: &Problem,
    deltas: &[f64],
    opts: &FieldOptions,
) -> Result<Vec<DispersionResult>, PropagationError> {
    deltas
        .iter()
        .map(|&delta_t| {
            let mut p = problem.clone();
            p.medium.raman_detuning_t = delta_t;
            p.schedule = ControlSchedule {
                absorb_stark: true,
                ..ControlSchedule::cw(problem.schedule.cw_level)
            };
            let prop = Propagator::new(p)?;
            let series = prop.propagate_field(1.0, opts)?;
            let diagnostics = PulseDiagnostics::compare(&series, &prop.input_series());
            Ok(DispersionResult {
                delta_t,
                series,
                diagnostics,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{ReadoutPulse, SwitchOff};
    use crate::special::bessel_j0;

    fn ringing_problem(tau_max: f64, n: usize) -> Problem {
        Problem {
            medium: MediumConfig::ringing(),
            schedule: ControlSchedule::cw(0.1),
            pulse: InputPulse::gaussian(0.0, 1.0).unwrap(),
            grid: SimulationGrid::new(-6.0, tau_max, n, vec![1.0]).unwrap(),
        }
    }

    #[test]
    fn zero_depth_and_zero_coupling_return_input() {
        let prop = Propagator::new(ringing_problem(20.0, 2601)).unwrap();
        let out = prop.propagate_field(0.0, &FieldOptions::default()).unwrap();
        assert_eq!(out.values, prop.input);
        let mut p = ringing_problem(20.0, 2601);
        p.schedule = ControlSchedule::cw(0.0);
        let prop = Propagator::new(p).unwrap();
        let out = prop.propagate_field(1.0, &FieldOptions::default()).unwrap();
        assert_eq!(out.values, prop.input);
        assert_eq!(out.intensity(), intensity(&prop.input));
    }

    #[test]
    fn rejects_depth_outside_medium() {
        let prop = Propagator::new(ringing_problem(20.0, 2601)).unwrap();
        assert!(matches!(
            prop.propagate_field(1.5, &FieldOptions::default()),
            Err(PropagationError::Depth(_))
        ));
    }

    /// Independent evaluation of the cw law with per-point adaptive quadrature.
    #[test]
    fn cw_matches_pointwise_adaptive_quadrature() {
        use crate::special::{integrate, QuadratureOptions};
        let prop = Propagator::new(ringing_problem(20.0, 2601)).unwrap();
        let out = prop.propagate_field(1.0, &FieldOptions::default()).unwrap();
        let c1 = prop.c1();
        let f = |t: f64| prop.problem.pulse.amplitude(t).re;
        let opts = QuadratureOptions {
            tol: 1e-10,
            ..QuadratureOptions::default()
        };
        for tau in [-1.0, 0.5, 2.0, 7.3, 15.0] {
            let k = tau_index(&out, tau);
            let t = out.tau(k);
            let integral = integrate(
                |s| f(s) * kernel_k1(2.0 * (c1 * (t - s)).sqrt()),
                -6.0,
                t,
                &opts,
            )
            .unwrap()
            .value;
            let expected = f(t) - 2.0 * c1 * integral;
            assert!((out.values[k].re - expected).abs() < 1e-8, "τ = {t}");
            assert!(out.values[k].im.abs() < 1e-14);
        }
    }

    fn tau_index(s: &TimeSeries, tau: f64) -> usize {
        ((tau - s.tau_min) / s.step).round() as usize
    }

    #[test]
    fn windowed_area_follows_bessel_law() {
        // ∫^τ Φ = ∫ f(τ') J0(2 sqrt(c1 (τ − τ'))) dτ' for a cw control.
        let prop = Propagator::new(ringing_problem(30.0, 3601)).unwrap();
        let out = prop.propagate_field(1.0, &FieldOptions::default()).unwrap();
        let area = integrate_samples(&out.values, out.step).value;
        let end = out.tau(out.len() - 1);
        let c1 = prop.c1();
        let weighted: Vec<f64> = (0..out.len())
            .map(|i| prop.input[i].re * bessel_j0(2.0 * (c1 * (end - out.tau(i))).sqrt()).unwrap())
            .collect();
        let expected = integrate_samples(&weighted, out.step).value;
        assert!((area.re - expected).abs() < 1e-7);
    }

    #[test]
    fn general_path_agrees_with_toeplitz_path() {
        let p = ringing_problem(20.0, 2601);
        let fast = Propagator::new(p.clone()).unwrap();
        // A phase knot list with constant phase disables the fast path only.
        let mut q = p;
        q.schedule.phase = vec![(0.0, 0.0)];
        let slow = Propagator::new(q).unwrap();
        assert!(!slow.toeplitz);
        let opts = FieldOptions::default();
        let a = fast.propagate_field(0.7, &opts).unwrap();
        let b = slow.propagate_field(0.7, &opts).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_global_phase_drops_out() {
        let mut p = ringing_problem(20.0, 2601);
        let base = Propagator::new(p.clone())
            .unwrap()
            .propagate_field(1.0, &FieldOptions::default())
            .unwrap();
        p.schedule.phase = vec![(0.0, 1.1)];
        let shifted = Propagator::new(p)
            .unwrap()
            .propagate_field(1.0, &FieldOptions::default())
            .unwrap();
        for (x, y) in base.values.iter().zip(&shifted.values) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn scale_invariance() {
        let mut p = ringing_problem(40.0, 4601);
        let a = Propagator::new(p.clone())
            .unwrap()
            .propagate_field(0.25, &FieldOptions::default())
            .unwrap();
        p.schedule = ControlSchedule::cw(0.05);
        let b = Propagator::new(p)
            .unwrap()
            .propagate_field(1.0, &FieldOptions::default())
            .unwrap();
        for (x, y) in a.intensity().iter().zip(b.intensity()) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn coherence_is_real_bracket_for_real_inputs() {
        let prop = Propagator::new(ringing_problem(30.0, 3601)).unwrap();
        let c = prop.coherence(1.0, &FieldOptions::default()).unwrap();
        let max = c.max_abs();
        assert!(c.values.iter().all(|v| v.im.abs() < 1e-12 * max));
        assert_eq!(prop.coherence_scale().re, 0.0);
    }

    #[test]
    fn coherence_at_small_depth_approaches_area() {
        let prop = Propagator::new(ringing_problem(10.0, 1601)).unwrap();
        let c = prop.coherence(1e-9, &FieldOptions::default()).unwrap();
        let last = c.values[c.len() - 1];
        assert!((last.re - prop.problem.pulse.area().re).abs() < 1e-8);
    }

    #[test]
    fn coherence_extrema_sit_at_field_zeros() {
        let prop = Propagator::new(ringing_problem(60.0, 6601)).unwrap();
        let opts = FieldOptions::default();
        let field = prop.propagate_field(1.0, &opts).unwrap();
        let coh = prop.coherence(1.0, &opts).unwrap();
        let mag: Vec<f64> = coh.values.iter().map(|v| v.norm()).collect();
        let zeros: Vec<usize> = (1..field.len())
            .filter(|&k| field.tau(k) > 2.0 && field.values[k - 1].re * field.values[k].re < 0.0)
            .collect();
        assert!(!zeros.is_empty());
        for k in zeros {
            let local_max = (k.saturating_sub(2)..=(k + 1).min(mag.len() - 2))
                .any(|m| m > 0 && mag[m] >= mag[m - 1] && mag[m] >= mag[m + 1]);
            assert!(local_max, "no coherence extremum near τ = {}", field.tau(k));
        }
    }

    #[test]
    fn pulse_outside_window_is_rejected() {
        let mut p = ringing_problem(10.0, 1601);
        p.pulse = InputPulse::sampled(20.0, 0.1, vec![Complex64::new(1.0, 0.0); 3]).unwrap();
        p.grid = SimulationGrid::new(-6.0, 10.0, 1601, vec![]).unwrap();
        assert!(Propagator::new(p).is_err());
    }

    #[test]
    fn large_detuning_suppresses_interaction() {
        let mut p = ringing_problem(6.0, 24001);
        p.medium.raman_detuning_t = 300.0;
        let prop = Propagator::new(p).unwrap();
        let out = prop.propagate_field(1.0, &FieldOptions::default()).unwrap();
        let peak = prop.input_peak;
        let diff = out
            .values
            .iter()
            .zip(&prop.input)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 0.01 * peak, "{diff}");
    }

    #[test]
    fn unresolved_detuning_is_reported() {
        let mut p = ringing_problem(20.0, 651);
        p.medium.raman_detuning_t = 1000.0;
        let prop = Propagator::new(p).unwrap();
        assert!(matches!(
            prop.propagate_field(1.0, &FieldOptions::default()),
            Err(PropagationError::QuadratureNotConverged { .. })
        ));
    }

    #[test]
    fn readout_schedule_runs_through_general_path() {
        let p = Problem {
            medium: MediumConfig {
                omega0_over_delta: 0.05,
                ..MediumConfig::ringing()
            },
            schedule: ControlSchedule {
                cw_level: 0.05,
                switch_off: Some(SwitchOff { tau0: 0.0, t0: 1.5 }),
                readout: vec![ReadoutPulse {
                    tau: 4.0,
                    width: 0.5f64.sqrt(),
                    amp: 0.05,
                }],
                absorb_stark: true,
                phase: Vec::new(),
            },
            pulse: InputPulse::gaussian(0.0, 1.0).unwrap(),
            grid: SimulationGrid::new(-6.0, 10.0, 1601, vec![]).unwrap(),
        };
        let prop = Propagator::new(p).unwrap();
        let out = prop.propagate_field(1.0, &FieldOptions::default()).unwrap();
        let i = out.intensity();
        // Retrieved light appears under the readout pulse.
        let k = tau_index(&out, 4.0);
        assert!(i[k] > 100.0 * i[tau_index(&out, 2.5)]);
    }

    #[test]
    fn csv_has_twelve_significant_digits() {
        let s = TimeSeries {
            zeta: 1.0,
            tau_min: 0.0,
            step: 0.5,
            values: vec![Complex64::new(1.0 / 3.0, -2.0)],
            error: 0.0,
        };
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "tau_over_T,re_phi,im_phi,intensity\n0.00000000000e0,3.33333333333e-1,-2.00000000000e0,4.11111111111e0\n"
        );
    }

    #[test]
    fn peak_detection() {
        let values: Vec<Complex64> = (0..200)
            .map(|k| {
                let t = k as f64 * 0.1;
                Complex64::new(
                    (-(t - 5.0).powi(2)).exp() + 0.5 * (-(t - 12.0).powi(2)).exp(),
                    0.0,
                )
            })
            .collect();
        let s = TimeSeries {
            zeta: 1.0,
            tau_min: 0.0,
            step: 0.1,
            values,
            error: 0.0,
        };
        let peaks = intensity_peaks(&s, 0.05);
        assert_eq!(peaks.len(), 2);
        assert!((peaks[0] - 5.0).abs() < 1e-9 && (peaks[1] - 12.0).abs() < 1e-9);
        let (mean, var) = moments(&s);
        assert!(mean > 5.0 && mean < 12.0 && var > 0.0);
    }
}
