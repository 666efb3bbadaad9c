//! Pulse area, stored population, photon number, loss bookkeeping and
//! ringing diagnostics.

use std::f64::consts::FRAC_PI_4;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::model::{derive_couplings, MediumConfig, ModelError};
use crate::propagator::{FieldOptions, PropagationError, Propagator, TimeSeries};
use crate::special::integrate_samples;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AreaRecord {
    pub zeta: f64,
    /// ∫ Re Φ dτ over the window.
    pub theta_window: f64,
    /// θ(0)·e^{−αLζ}.
    pub theta_theory: f64,
    pub theta_input: f64,
    pub gamma_damped: bool,
    /// Estimated area still outside the window, when above 1% of θ(0).
    pub tail_warning: Option<f64>,
}

impl AreaRecord {
    pub fn ratio(&self) -> f64 {
        self.theta_window / self.theta_input
    }
}

/// Fraction of θ(0) above which the missing tail is reported.
pub const AREA_TAIL_FRACTION: f64 = 0.01;

/// Windowed pulse area at depth ζ.
pub fn pulse_area(
    prop: &Propagator,
    zeta: f64,
    damped: bool,
) -> Result<AreaRecord, PropagationError> {
    let opts = FieldOptions {
        damped,
        ..FieldOptions::default()
    };
    let field = prop.propagate_field(zeta, &opts)?;
    Ok(area_of(prop, &field, damped))
}

pub fn area_of(prop: &Propagator, field: &TimeSeries, damped: bool) -> AreaRecord {
    let re: Vec<f64> = field.values.iter().map(|v| v.re).collect();
    let theta_window = integrate_samples(&re, field.step).value;
    let theta_input = prop.problem().pulse.area().re;
    let alpha_l = prop.problem().medium.alpha_l;
    let last = field.values[field.len() - 1].norm();
    let span = field.tau(field.len() - 1) - prop.problem().pulse.center();
    // The remaining ringing decays at least as fast as e^{−Γτ} when damped;
    // undamped it is bounded only by the elapsed window.
    let reach = if damped && prop.gamma_pump() > 0.0 {
        1.0 / prop.gamma_pump()
    } else {
        span
    };
    let tail = last * reach;
    AreaRecord {
        zeta: field.zeta,
        theta_window,
        theta_theory: theta_input * (-alpha_l * field.zeta).exp(),
        theta_input,
        gamma_damped: damped,
        tail_warning: (tail > AREA_TAIL_FRACTION * theta_input.abs()).then_some(tail),
    }
}

/// Excited-state population ρ22 = (Ω0/Δ)²·θ².
pub fn stored_population(cfg: &MediumConfig, area: &AreaRecord) -> f64 {
    cfg.omega0_over_delta.powi(2) * area.theta_window.powi(2)
}

/// Rate at which photon number leaves the pulse per unit depth:
/// (αL·γT/2)·ρ22 = c1·θ².
pub fn trapped_density(cfg: &MediumConfig, area: &AreaRecord) -> f64 {
    0.5 * cfg.alpha_l * cfg.gamma_t * stored_population(cfg, area)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthSample {
    pub zeta: f64,
    pub area: AreaRecord,
    pub rho22: f64,
    pub n_photons: f64,
}

/// Areas, populations and photon numbers at each requested depth.
pub fn depth_profile(
    prop: &Propagator,
    zetas: &[f64],
    damped: bool,
) -> Result<Vec<DepthSample>, PropagationError> {
    let cfg = prop.problem().medium;
    zetas
        .par_iter()
        .map(|&zeta| {
            let field = prop.propagate_field(
                zeta,
                &FieldOptions {
                    damped,
                    ..FieldOptions::default()
                },
            )?;
            let area = area_of(prop, &field, damped);
            Ok(DepthSample {
                zeta,
                area,
                rho22: stored_population(&cfg, &area),
                n_photons: photon_number(&field).value,
            })
        })
        .collect()
}

/// Depth-integrated trapped fraction ∫_0^ζ c1·θ_window(ζ')² dζ' by Simpson
/// on `intervals` (rounded up to even) equal steps.
pub fn trapped_fraction(
    prop: &Propagator,
    zeta: f64,
    intervals: usize,
) -> Result<f64, PropagationError> {
    let intervals = intervals.max(2) + intervals % 2;
    let zetas: Vec<f64> = (0..=intervals)
        .map(|k| zeta * k as f64 / intervals as f64)
        .collect();
    let cfg = prop.problem().medium;
    let densities: Vec<f64> = depth_profile(prop, &zetas, false)?
        .iter()
        .map(|s| trapped_density(&cfg, &s.area))
        .collect();
    Ok(integrate_samples(&densities, zeta / intervals as f64).value)
}

/// `zeta,theta_window,theta_theory,rho22,n_photons`.
pub fn write_depth_csv<W: Write>(samples: &[DepthSample], mut out: W) -> io::Result<()> {
    writeln!(out, "zeta,theta_window,theta_theory,rho22,n_photons")?;
    for s in samples {
        writeln!(
            out,
            "{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}",
            s.zeta, s.area.theta_window, s.area.theta_theory, s.rho22, s.n_photons
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonNumber {
    pub value: f64,
    /// Final-sample intensity relative to the peak, when above 1e-4.
    pub tail_warning: Option<f64>,
}

/// Intensity ratio at the window end above which the ringing counts as cut.
pub const PHOTON_TAIL_FRACTION: f64 = 1e-4;

/// n = ∫|Φ|² dτ.
pub fn photon_number(series: &TimeSeries) -> PhotonNumber {
    let i = series.intensity();
    let value = integrate_samples(&i, series.step).value;
    let peak = i.iter().cloned().fold(0.0, f64::max);
    let ratio = if peak > 0.0 {
        i[i.len() - 1] / peak
    } else {
        0.0
    };
    PhotonNumber {
        value,
        tail_warning: (ratio > PHOTON_TAIL_FRACTION).then_some(ratio),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossRecord {
    pub n_in: f64,
    pub n_out: f64,
    /// (π/4)·(cT/L)·γT·(Ω0/Δ)²·(1 − e^{−2αL}).
    pub loss_closed_form: f64,
    /// The large-depth form quoted without prefactor: (cT/L)·γT·(Ω0/Δ)².
    pub loss_large_depth: f64,
    /// c1·θ0²·(1 − e^{−2αL})/(2αL): the same integral in the internal
    /// normalization, where no cT/L factor appears.
    pub loss_internal: f64,
    /// The closed form exceeds one photon.
    pub exceeds_unity: bool,
    pub trapped_profile: Vec<(f64, f64)>,
}

/// Closed-form pumping-loss diagnostics. `theta_input` is the input area in
/// the internal normalization.
pub fn loss_diagnostic(cfg: &MediumConfig, theta_input: f64) -> Result<LossRecord, ModelError> {
    let d = derive_couplings(cfg)?;
    let depth = 1.0 - (-2.0 * cfg.alpha_l).exp();
    let base = cfg.ct_over_l * cfg.gamma_t * cfg.omega0_over_delta.powi(2);
    let loss_closed_form = FRAC_PI_4 * base * depth;
    let loss_internal = if cfg.alpha_l > 0.0 {
        d.c1 * theta_input.powi(2) * depth / (2.0 * cfg.alpha_l)
    } else {
        d.c1 * theta_input.powi(2)
    };
    Ok(LossRecord {
        n_in: 1.0,
        n_out: 1.0 - loss_internal,
        loss_closed_form,
        loss_large_depth: base,
        loss_internal,
        exceeds_unity: loss_closed_form > 1.0,
        trapped_profile: Vec::new(),
    })
}

/// Input-free ringing estimate 20·c1^{1/3}.
pub fn estimate_t_out(cfg: &MediumConfig) -> Result<f64, ModelError> {
    Ok(20.0 * derive_couplings(cfg)?.c1.cbrt())
}

/// Default envelope threshold for the ringing duration.
pub const RINGING_THRESHOLD: f64 = 0.05;

/// Last time the intensity envelope exceeds `threshold` of its maximum,
/// measured from `center`.
///
/// Between the first and last local maxima the envelope is the linear
/// interpolation of the peak values; outside it is the intensity itself.
pub fn ringing_duration(series: &TimeSeries, threshold: f64, center: f64) -> f64 {
    let envelope = peak_envelope(&series.intensity());
    let peak = envelope.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    let level = threshold * peak;
    let Some(k) = envelope.iter().rposition(|&e| e >= level) else {
        return 0.0;
    };
    let mut t = series.tau(k);
    if k + 1 < envelope.len() {
        t += series.step * (envelope[k] - level) / (envelope[k] - envelope[k + 1]);
    }
    t - center
}

fn peak_envelope(intensity: &[f64]) -> Vec<f64> {
    let n = intensity.len();
    let maxima: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&k| intensity[k] > intensity[k - 1] && intensity[k] >= intensity[k + 1])
        .collect();
    let mut envelope = intensity.to_vec();
    for w in maxima.windows(2) {
        let (a, b) = (w[0], w[1]);
        for (k, e) in envelope.iter_mut().enumerate().take(b).skip(a + 1) {
            let t = (k - a) as f64 / (b - a) as f64;
            *e = intensity[a] + t * (intensity[b] - intensity[a]);
        }
    }
    envelope
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControlSchedule;
    use crate::model::{InputPulse, SimulationGrid};
    use crate::propagator::Problem;
    use num_complex::Complex64;

    fn propagator(omega: f64, alpha_l: f64, tau_max: f64, n: usize) -> Propagator {
        Propagator::new(Problem {
            medium: MediumConfig {
                omega0_over_delta: omega,
                alpha_l,
                ..MediumConfig::ringing()
            },
            schedule: ControlSchedule::cw(omega),
            pulse: InputPulse::gaussian(0.0, 1.0).unwrap(),
            grid: SimulationGrid::new(-6.0, tau_max, n, vec![]).unwrap(),
        })
        .unwrap()
    }

    #[test]
    fn input_area_and_photon_number() {
        let prop = propagator(0.1, 3.5, 20.0, 2601);
        let a = pulse_area(&prop, 0.0, false).unwrap();
        assert!((a.theta_window - (2.0 * std::f64::consts::PI).powf(0.25)).abs() < 1e-10);
        assert_eq!(a.theta_theory, a.theta_input);
        let n = photon_number(&prop.input_series());
        assert!((n.value - 1.0).abs() < 1e-6);
        assert!(n.tail_warning.is_none());
    }

    #[test]
    fn uncoupled_medium_keeps_photon() {
        let prop = propagator(0.0, 3.5, 20.0, 2601);
        let out = prop.propagate_field(1.0, &FieldOptions::default()).unwrap();
        assert!((photon_number(&out).value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn damped_area_decays_exponentially() {
        let prop = propagator(0.2, 2.0, 320.0, 6521);
        let a = pulse_area(&prop, 0.5, true).unwrap();
        assert!(
            (a.ratio() - (-1.0f64).exp()).abs() < 0.01 * (-1.0f64).exp(),
            "{}",
            a.ratio()
        );
        assert!(a.tail_warning.is_none());
    }

    #[test]
    fn short_window_flags_tail() {
        let prop = propagator(0.1, 3.5, 20.0, 2601);
        let a = pulse_area(&prop, 1.0, false).unwrap();
        assert!(a.tail_warning.is_some());
    }

    #[test]
    fn population_vanishes_with_area() {
        let cfg = MediumConfig::ringing();
        let zero = AreaRecord {
            zeta: 1.0,
            theta_window: 0.0,
            theta_theory: 0.0,
            theta_input: 1.0,
            gamma_damped: true,
            tail_warning: None,
        };
        assert_eq!(stored_population(&cfg, &zero), 0.0);
        let deep = AreaRecord {
            theta_window: (-8.0f64).exp(),
            ..zero
        };
        let shallow = AreaRecord {
            theta_window: 1.0,
            ..zero
        };
        assert!(stored_population(&cfg, &deep) < 1e-6 * stored_population(&cfg, &shallow));
    }

    #[test]
    fn unitarity_in_finite_window() {
        // Whatever has not left the window is held in the coherence at its end.
        let prop = propagator(0.1, 3.5, 44.0, 5001);
        let out = prop.propagate_field(1.0, &FieldOptions::default()).unwrap();
        let n_out = photon_number(&out).value;
        let trapped = trapped_fraction(&prop, 1.0, 40).unwrap();
        assert!((n_out + trapped - 1.0).abs() < 1e-6, "{n_out} + {trapped}");
    }

    #[test]
    fn loss_closed_form() {
        let cfg = MediumConfig {
            omega0_over_delta: 0.0,
            ..MediumConfig::ringing()
        };
        assert_eq!(loss_diagnostic(&cfg, 1.0).unwrap().loss_closed_form, 0.0);

        let deep = MediumConfig {
            alpha_l: 40.0,
            ..MediumConfig::ringing()
        };
        let r = loss_diagnostic(&deep, 1.0).unwrap();
        assert!((r.loss_closed_form / r.loss_large_depth - FRAC_PI_4).abs() < 1e-6);

        let r = loss_diagnostic(&MediumConfig::ringing(), 1.0).unwrap();
        assert!(r.exceeds_unity);
        assert!(r.loss_closed_form > 100.0);
    }

    #[test]
    fn t_out_estimate() {
        let cfg = MediumConfig {
            alpha_l: 0.125 / 0.036,
            ..MediumConfig::ringing()
        };
        assert!((estimate_t_out(&cfg).unwrap() - 10.0).abs() < 1e-9);
    }

    fn synthetic(values: Vec<f64>, step: f64, tau_min: f64) -> TimeSeries {
        TimeSeries {
            zeta: 1.0,
            tau_min,
            step,
            values: values.into_iter().map(|v| Complex64::new(v, 0.0)).collect(),
            error: 0.0,
        }
    }

    #[test]
    fn ringing_duration_of_plain_gaussian_is_its_width() {
        let step = 0.001;
        let values = (0..12001)
            .map(|k| (-(-6.0 + k as f64 * step).powi(2)).exp())
            .collect();
        let s = synthetic(values, step, -6.0);
        let d = ringing_duration(&s, 0.05, 0.0);
        // |f|² = 0.05 at τ = sqrt(ln 20 / 2).
        assert!((d - (20f64.ln() / 2.0).sqrt()).abs() < 1e-3, "{d}");
    }

    #[test]
    fn ringing_duration_follows_peak_envelope() {
        // Peaks of height 1, 0.5, 0.25, ... every 2 time units; the
        // interpolated envelope crosses 5% between the 5th and 6th peak.
        let step = 0.01;
        let values = (0..3001)
            .map(|k| {
                let t = k as f64 * step;
                let env = 0.5f64.powf(t / 2.0).sqrt();
                env * (std::f64::consts::PI * t / 2.0).cos()
            })
            .collect();
        let s = synthetic(values, step, 0.0);
        let d = ringing_duration(&s, 0.05, 0.0);
        // Peaks at 0, 2, 4, 6, 8, 10 with heights 2^{-k}; 0.0625 at 8 and 0.03125 at 10.
        let expected = 8.0 + 2.0 * (0.0625 - 0.05) / (0.0625 - 0.03125);
        assert!((d - expected).abs() < 0.05, "{d} vs {expected}");
    }

    #[test]
    fn depth_csv_layout() {
        let prop = propagator(0.1, 3.5, 20.0, 2601);
        let rows = depth_profile(&prop, &[0.0, 1.0], false).unwrap();
        let mut buf = Vec::new();
        write_depth_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("zeta,theta_window,theta_theory,rho22,n_photons\n"));
        assert_eq!(text.lines().count(), 3);
    }
}
