//! Storage under a switched-off control followed by a train of readout
//! pulses, split into one temporal mode per readout.
//!
//! At the exit, with a(τ) = a0 f0(τ) + Σ a_i g_i(τ) and the storage integral
//! I(τ) = ∫ f(τ') f0(τ') K1(ψ(τ,τ')) dτ',
//!
//! ```text
//! Φ_0 = f − 2κ a0² f0 I        (transmitted part)
//! Φ_i = −2κ a0 a_i g_i I       (i-th readout)
//! ```
//!
//! The decomposition presumes well-separated control components, so ψ is
//! built from the sum of their individual energies. The interference terms
//! this drops are reported by [`decomposition_residual`] against the direct
//! propagation of the full schedule.

use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::control::{ReadoutPulse, SEPARATION_FACTOR};
use crate::model::REGIME_ADVISORY;
use crate::propagator::{FieldOptions, Problem, PropagationError, Propagator, TimeSeries};
use crate::special::{integrate_samples, kernel_k1};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TimeBinError {
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error("time-bin decomposition needs {0}")]
    Unsupported(&'static str),
    #[error("readout pulses {i} and {j} overlap: normalized overlap {value:e}")]
    ReadoutOverlap { i: usize, j: usize, value: f64 },
    #[error("readout pulse {i} overlaps the input pulse: normalized overlap {value:e}")]
    InputOverlap { i: usize, value: f64 },
    #[error("equal-intensity search failed: {0}")]
    Search(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TimeBinWarning {
    /// Neighbouring readouts closer than the separation factor.
    Separation { i: usize, j: usize },
    /// Readout Stark phase (Ω_i/Δ)²(Δ/γ)γT·T_i not small.
    StarkPhase { i: usize, value: f64 },
    /// Mode intensity outside its window relative to its peak.
    Leakage { i: usize, value: f64 },
    /// Σ n_i differs from 1 by more than 5%.
    Normalization { total: f64 },
}

impl std::fmt::Display for TimeBinWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Separation { i, j } => write!(
                f,
                "readout pulses {i} and {j} are closer than the separation factor"
            ),
            Self::StarkPhase { i, value } => {
                write!(f, "readout {i} Stark phase {value} is not small")
            }
            Self::Leakage { i, value } => write!(
                f,
                "mode {i} leaks {value:e} of its intensity outside its window"
            ),
            Self::Normalization { total } => write!(f, "mode occupations sum to {total}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalMode {
    pub index: usize,
    pub profile: Vec<Complex64>,
    pub r: f64,
    pub n: f64,
    pub sign: f64,
    pub window: (f64, f64),
    /// Readout parameters (absent for the transmitted mode).
    pub readout: Option<ReadoutPulse>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputState {
    pub tau_min: f64,
    pub step: f64,
    pub modes: Vec<TemporalMode>,
    pub total: f64,
    pub overlaps: Vec<Vec<f64>>,
    pub warnings: Vec<TimeBinWarning>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeOptions {
    /// Largest tolerated normalized overlap between readout shapes.
    pub overlap_eps: f64,
    pub separation_factor: f64,
    /// Lower edge of each readout window in units of its width.
    pub window_half_width: f64,
}

impl Default for ModeOptions {
    fn default() -> Self {
        Self {
            overlap_eps: ORTHOGONALITY_EPS,
            separation_factor: SEPARATION_FACTOR,
            window_half_width: 3.5,
        }
    }
}

pub const ORTHOGONALITY_EPS: f64 = 1e-3;
/// Allowed deviation of Σ n_i from 1 before warning.
pub const NORMALIZATION_TOLERANCE: f64 = 0.05;
const LEAKAGE_LIMIT: f64 = 1e-4;

fn require_storage_setup(prop: &Propagator) -> Result<(), TimeBinError> {
    let schedule = &prop.problem().schedule;
    if schedule.switch_off.is_none() {
        return Err(TimeBinError::Unsupported("a switch-off of the cw control"));
    }
    if !schedule.phase.is_empty() {
        return Err(TimeBinError::Unsupported(
            "a control without phase modulation",
        ));
    }
    if prop.tables().phase.iter().any(|d| d.abs() > 1e-12) {
        return Err(TimeBinError::Unsupported("zero two-photon detuning"));
    }
    Ok(())
}

/// I(ζ, τ) = ∫ f(τ') f0(τ') K1(ψ(τ,τ')) dτ' with ψ from the separated
/// control energy.
pub fn storage_integral(prop: &Propagator, zeta: f64) -> Result<TimeSeries, TimeBinError> {
    require_storage_setup(prop)?;
    let prop = &prop.with_separated_energy();
    if !(0.0..=1.0).contains(&zeta) {
        return Err(PropagationError::Depth(zeta).into());
    }
    let grid = prop.grid();
    let schedule = &prop.problem().schedule;
    let source: Vec<Complex64> = prop
        .input()
        .iter()
        .enumerate()
        .map(|(i, f)| f * schedule.switch_factor(grid.tau(i)))
        .collect();
    let sums = prop.volterra(zeta, &source, kernel_k1, false);
    let error = sums.iter().map(|s| s.error).fold(0.0, f64::max);
    Ok(TimeSeries {
        zeta,
        tau_min: grid.tau_min,
        step: grid.step(),
        values: sums.into_iter().map(|s| s.value).collect(),
        error,
    })
}

/// Normalized overlap of two Gaussian readout shapes.
fn readout_overlap(a: &ReadoutPulse, b: &ReadoutPulse) -> f64 {
    let s = a.width * a.width + b.width * b.width;
    (2.0 * a.width * b.width / s).sqrt() * (-(a.tau - b.tau).powi(2) / s).exp()
}

fn inner(a: &[Complex64], b: &[Complex64], step: f64) -> Complex64 {
    let products: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x.conj() * y).collect();
    integrate_samples(&products, step).value
}

fn norm(a: &[Complex64], step: f64) -> f64 {
    let i: Vec<f64> = a.iter().map(|v| v.norm_sqr()).collect();
    integrate_samples(&i, step).value.max(0.0).sqrt()
}

/// Mode profiles at the medium exit. Occupations are left at zero; see
/// [`mode_amplitudes`].
pub fn mode_profiles(prop: &Propagator, opts: &ModeOptions) -> Result<OutputState, TimeBinError> {
    let problem = prop.problem();
    let schedule = &problem.schedule;
    let grid = prop.grid();
    let step = grid.step();
    let mut warnings = Vec::new();

    for (k, w) in schedule.readout.windows(2).enumerate() {
        let value = readout_overlap(&w[0], &w[1]);
        if value > opts.overlap_eps {
            return Err(TimeBinError::ReadoutOverlap {
                i: k + 1,
                j: k + 2,
                value,
            });
        }
    }
    let input = prop.input();
    let f_norm = norm(input, step);
    for (k, r) in schedule.readout.iter().enumerate() {
        let shape: Vec<Complex64> = (0..grid.n_tau)
            .map(|i| Complex64::new(r.shape(grid.tau(i)), 0.0))
            .collect();
        let value = inner(input, &shape, step).norm() / (f_norm * norm(&shape, step));
        if value > opts.overlap_eps {
            return Err(TimeBinError::InputOverlap { i: k + 1, value });
        }
    }
    for (i, j) in schedule.separation_violations(opts.separation_factor) {
        warnings.push(TimeBinWarning::Separation { i, j });
    }
    let stark = problem.medium.stark_per_intensity();
    for (k, r) in schedule.readout.iter().enumerate() {
        let value = r.amp * r.amp * stark * r.width;
        if value >= REGIME_ADVISORY {
            warnings.push(TimeBinWarning::StarkPhase { i: k + 1, value });
        }
    }

    let storage = storage_integral(prop, 1.0)?;
    let prefactor = 2.0 * prop.kappa * schedule.cw_level;
    let transmitted: Vec<Complex64> = (0..grid.n_tau)
        .map(|i| {
            input[i]
                - storage.values[i]
                    * (prefactor * schedule.cw_level * schedule.switch_factor(grid.tau(i)))
        })
        .collect();

    let mut bounds = vec![grid.tau_min];
    for (k, r) in schedule.readout.iter().enumerate() {
        let edge = if k == 0 {
            r.tau - opts.window_half_width * r.width
        } else {
            0.5 * (schedule.readout[k - 1].tau + r.tau)
        };
        bounds.push(edge);
    }
    bounds.push(grid.tau_max);

    let mut profiles = vec![(transmitted, None, 1.0)];
    profiles.extend(schedule.readout.iter().map(|r| {
        let p: Vec<Complex64> = (0..grid.n_tau)
            .map(|i| -storage.values[i] * (prefactor * r.amp * r.shape(grid.tau(i))))
            .collect();
        (p, Some(*r), if r.amp < 0.0 { -1.0 } else { 1.0 })
    }));

    let modes: Vec<TemporalMode> = profiles
        .into_iter()
        .enumerate()
        .map(|(index, (profile, readout, sign))| TemporalMode {
            index,
            profile,
            r: 0.0,
            n: 0.0,
            sign,
            window: (bounds[index], bounds[index + 1]),
            readout,
        })
        .collect();

    for m in &modes {
        let intensity: Vec<f64> = m.profile.iter().map(|v| v.norm_sqr()).collect();
        let peak = intensity.iter().cloned().fold(0.0, f64::max);
        let outside = intensity
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let t = grid.tau(*i);
                t < m.window.0 || t > m.window.1
            })
            .map(|(_, v)| *v)
            .fold(0.0, f64::max);
        if peak > 0.0 && outside > LEAKAGE_LIMIT * peak {
            warnings.push(TimeBinWarning::Leakage {
                i: m.index,
                value: outside / peak,
            });
        }
    }

    let profiles: Vec<&[Complex64]> = modes.iter().map(|m| m.profile.as_slice()).collect();
    let overlaps = check_orthogonality(&profiles, step);
    Ok(OutputState {
        tau_min: grid.tau_min,
        step,
        modes,
        total: 0.0,
        overlaps,
        warnings,
    })
}

/// Fills r_i = ‖Φ_i‖, n_i = r_i² and Σ n_i.
pub fn mode_amplitudes(mut state: OutputState) -> OutputState {
    for m in &mut state.modes {
        m.r = norm(&m.profile, state.step);
        m.n = m.r * m.r;
    }
    state.total = state.modes.iter().map(|m| m.n).sum();
    state
        .warnings
        .retain(|w| !matches!(w, TimeBinWarning::Normalization { .. }));
    if (state.total - 1.0).abs() > NORMALIZATION_TOLERANCE {
        state
            .warnings
            .push(TimeBinWarning::Normalization { total: state.total });
    }
    state
}

/// Normalized overlaps |⟨Φ_i, Φ_j⟩| / (‖Φ_i‖‖Φ_j‖); zero norms give zero.
pub fn check_orthogonality(profiles: &[&[Complex64]], step: f64) -> Vec<Vec<f64>> {
    let norms: Vec<f64> = profiles.iter().map(|p| norm(p, step)).collect();
    (0..profiles.len())
        .map(|i| {
            (0..profiles.len())
                .map(|j| {
                    let d = norms[i] * norms[j];
                    if d == 0.0 {
                        0.0
                    } else {
                        inner(profiles[i], profiles[j], step).norm() / d
                    }
                })
                .collect()
        })
        .collect()
}

/// Largest off-diagonal overlap.
pub fn max_overlap(overlaps: &[Vec<f64>]) -> f64 {
    overlaps
        .iter()
        .enumerate()
        .flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter(move |(j, _)| *j != i)
                .map(|(_, v)| *v)
        })
        .fold(0.0, f64::max)
}

/// Relative max-norm gap between Σ Φ_i and the direct propagation.
pub fn decomposition_residual(state: &OutputState, direct: &TimeSeries) -> f64 {
    let peak = direct.max_abs();
    (0..direct.len())
        .map(|k| {
            let sum: Complex64 = state.modes.iter().map(|m| m.profile[k]).sum();
            (sum - direct.values[k]).norm()
        })
        .fold(0.0, f64::max)
        / peak
}

/// Decomposes and normalizes in one call.
pub fn decompose(problem: Problem, opts: &ModeOptions) -> Result<OutputState, TimeBinError> {
    let prop = Propagator::new(problem)?;
    Ok(mode_amplitudes(mode_profiles(&prop, opts)?))
}

/// Same, plus the direct full-schedule field for the decomposition check.
pub fn decompose_with_direct(
    problem: Problem,
    opts: &ModeOptions,
) -> Result<(OutputState, TimeSeries), TimeBinError> {
    let prop = Propagator::new(problem)?;
    let state = mode_amplitudes(mode_profiles(&prop, opts)?);
    let direct = prop.propagate_field(1.0, &FieldOptions::default())?;
    Ok((state, direct))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equalization {
    /// First readout amplitude over the cw level.
    pub ratio: f64,
    pub n1: f64,
    pub n2: f64,
    pub iterations: usize,
}

/// Bisects the first readout amplitude, with the others fixed, until the
/// first two readout modes carry equal occupation to relative `rel_tol`.
pub fn equalize_first_two(
    problem: &Problem,
    rel_tol: f64,
    opts: &ModeOptions,
) -> Result<Equalization, TimeBinError> {
    if problem.schedule.readout.len() < 2 {
        return Err(TimeBinError::Search(
            "needs at least two readout pulses".into(),
        ));
    }
    let occupations = |amp: f64| -> Result<(f64, f64), TimeBinError> {
        let mut p = problem.clone();
        p.schedule.readout[0].amp = amp;
        let state = decompose(p, opts)?;
        Ok((state.modes[1].n, state.modes[2].n))
    };
    let mut lo = 0.0;
    let mut hi = problem.schedule.readout[1]
        .amp
        .abs()
        .max(problem.schedule.cw_level.abs());
    let mut expansions = 0;
    while {
        let (n1, n2) = occupations(hi)?;
        n1 < n2
    } {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 20 {
            return Err(TimeBinError::Search(
                "no amplitude equalizes the modes".into(),
            ));
        }
    }
    for iterations in 1..=200 {
        let mid = 0.5 * (lo + hi);
        let (n1, n2) = occupations(mid)?;
        if (n1 - n2).abs() <= rel_tol * n1.max(n2) {
            return Ok(Equalization {
                ratio: mid / problem.schedule.cw_level,
                n1,
                n2,
                iterations,
            });
        }
        if n1 < n2 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(TimeBinError::Search(
        "bisection did not reach the tolerance".into(),
    ))
}

/// `tau_over_T,re_phi_i,im_phi_i` for one mode.
pub fn write_mode_csv<W: Write>(state: &OutputState, index: usize, mut out: W) -> io::Result<()> {
    writeln!(out, "tau_over_T,re_phi_{index},im_phi_{index}")?;
    for (k, v) in state.modes[index].profile.iter().enumerate() {
        writeln!(
            out,
            "{:.11e},{:.11e},{:.11e}",
            state.tau_min + k as f64 * state.step,
            v.re,
            v.im
        )?;
    }
    Ok(())
}

/// `i,tau_i,T_i,amp_i,r_i,n_i,sign`; the transmitted mode has empty readout fields.
pub fn write_state_csv<W: Write>(state: &OutputState, mut out: W) -> io::Result<()> {
    writeln!(out, "i,tau_i,T_i,amp_i,r_i,n_i,sign")?;
    for m in &state.modes {
        match m.readout {
            Some(r) => writeln!(
                out,
                "{},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{}",
                m.index, r.tau, r.width, r.amp, m.r, m.n, m.sign
            )?,
            None => writeln!(out, "{},,,,{:.11e},{:.11e},{}", m.index, m.r, m.n, m.sign)?,
        }
    }
    Ok(())
}

/// Occupations for several problems in parallel, ordered as given.
pub fn decompose_all(
    problems: Vec<Problem>,
    opts: &ModeOptions,
) -> Result<Vec<OutputState>, TimeBinError> {
    problems
        .into_par_iter()
        .map(|p| decompose(p, opts))
        .collect()
}
