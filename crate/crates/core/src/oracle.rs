//! Brute-force integrator of the linearized field/coherence equations
//!
//! ```text
//! ∂Φ/∂ζ = i c(τ) s − kL Φ
//! ∂s/∂τ = −(i δ(τ) + Γ(τ) + γ0) s + i c*(τ) Φ,      c = sqrt(κ) a e^{iφ}
//! ```
//!
//! marched in ζ with the explicit midpoint rule. Each ζ stage solves the τ
//! equation with classical RK4, taking Φ at half steps from a four-point
//! cubic interpolant. Loss terms are present only with `with_losses`.
//! Nothing here shares code with the closed-form kernel beyond the control
//! envelope itself.

use std::io::{self, Write};

use num_complex::Complex64;
use thiserror::Error;

use crate::control::ControlError;
use crate::model::{ModelError, SimulationGrid};
use crate::propagator::{Problem, TimeSeries};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("{axis} step {step:e} exceeds the resolution limit {limit:e}")]
    Resolution {
        axis: &'static str,
        step: f64,
        limit: f64,
    },
    #[error("non-finite value at zeta index {zeta_index}, tau index {tau_index}")]
    NotFinite { zeta_index: usize, tau_index: usize },
    #[error("convergence study needs at least 3 levels, got {0}")]
    Levels(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleGrid {
    pub tau_min: f64,
    pub tau_max: f64,
    pub n_tau: usize,
    /// Number of ζ steps across the medium.
    pub n_zeta: usize,
}

impl OracleGrid {
    pub fn tau_step(&self) -> f64 {
        (self.tau_max - self.tau_min) / (self.n_tau - 1) as f64
    }

    pub fn zeta_step(&self) -> f64 {
        1.0 / self.n_zeta as f64
    }

    pub fn tau(&self, j: usize) -> f64 {
        self.tau_min + j as f64 * self.tau_step()
    }

    /// The same window with both steps divided by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            n_tau: (self.n_tau - 1) * factor + 1,
            n_zeta: self.n_zeta * factor,
            ..*self
        }
    }

    fn as_simulation_grid(&self) -> Result<SimulationGrid, ModelError> {
        SimulationGrid::new(self.tau_min, self.tau_max, self.n_tau, vec![])
    }
}

/// Largest admissible steps.
pub const MAX_TAU_STEP: f64 = 0.01;
pub const MAX_ZETA_STEP: f64 = 0.01;

/// Full (ζ, τ) solution. Row k holds depth ζ = k/n_zeta.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleField {
    pub grid: OracleGrid,
    pub phi: Vec<Complex64>,
    pub s: Vec<Complex64>,
}

impl OracleField {
    pub fn rows(&self) -> usize {
        self.grid.n_zeta + 1
    }

    pub fn phi_row(&self, k: usize) -> &[Complex64] {
        &self.phi[k * self.grid.n_tau..(k + 1) * self.grid.n_tau]
    }

    pub fn s_row(&self, k: usize) -> &[Complex64] {
        &self.s[k * self.grid.n_tau..(k + 1) * self.grid.n_tau]
    }

    /// Φ at the medium exit as a time series.
    pub fn output(&self) -> TimeSeries {
        TimeSeries {
            zeta: 1.0,
            tau_min: self.grid.tau_min,
            step: self.grid.tau_step(),
            values: self.phi_row(self.grid.n_zeta).to_vec(),
            error: 0.0,
        }
    }

    /// Little-endian dump: u64 row count, u64 n_tau, then Φ row-major as
    /// (re, im) f64 pairs.
    pub fn write_binary<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(&(self.rows() as u64).to_le_bytes())?;
        out.write_all(&(self.grid.n_tau as u64).to_le_bytes())?;
        for v in &self.phi {
            out.write_all(&v.re.to_le_bytes())?;
            out.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }
}

/// Per-node coefficients of the τ equation: s' = decay·s + drive·Φ.
struct Coefficients {
    decay: Vec<Complex64>,
    drive: Vec<Complex64>,
    decay_mid: Vec<Complex64>,
    drive_mid: Vec<Complex64>,
    /// i·c at the nodes, for the ζ equation.
    feed: Vec<Complex64>,
}

fn coefficients(problem: &Problem, grid: &OracleGrid, with_losses: bool) -> Coefficients {
    let cfg = &problem.medium;
    let schedule = &problem.schedule;
    let detuning = problem.detuning();
    let root_kappa = cfg.coupling_per_intensity().sqrt();
    let gamma0 = if with_losses { cfg.gamma0_t } else { 0.0 };
    let pumping = if with_losses {
        cfg.pumping_per_intensity()
    } else {
        0.0
    };
    let i = Complex64::new(0.0, 1.0);
    let at = |tau: f64| {
        let a = schedule.omega_at(tau);
        let c = Complex64::from_polar(root_kappa * a, schedule.phase_at(tau));
        let decay = -(i * detuning.at(a) + pumping * a * a + gamma0);
        (decay, i * c.conj(), i * c)
    };
    let h = grid.tau_step();
    let nodes: Vec<_> = (0..grid.n_tau).map(|j| at(grid.tau(j))).collect();
    let mids: Vec<_> = (0..grid.n_tau - 1)
        .map(|j| at(grid.tau_min + (j as f64 + 0.5) * h))
        .collect();
    Coefficients {
        decay: nodes.iter().map(|x| x.0).collect(),
        drive: nodes.iter().map(|x| x.1).collect(),
        feed: nodes.iter().map(|x| x.2).collect(),
        decay_mid: mids.iter().map(|x| x.0).collect(),
        drive_mid: mids.iter().map(|x| x.1).collect(),
    }
}

/// Φ at τ_j + h/2 from the cubic through the four nearest nodes.
fn half_step(phi: &[Complex64], j: usize) -> Complex64 {
    let n = phi.len();
    if n < 4 {
        return (phi[j] + phi[j + 1]) * 0.5;
    }
    if j == 0 {
        (phi[0] * 3.0 + phi[1] * 6.0 - phi[2]) / 8.0
    } else if j + 2 >= n {
        (-phi[n - 3] + phi[n - 2] * 6.0 + phi[n - 1] * 3.0) / 8.0
    } else {
        (-phi[j - 1] + phi[j] * 9.0 + phi[j + 1] * 9.0 - phi[j + 2]) / 16.0
    }
}

/// Solves the τ equation for s given one Φ row, with s(τmin) = 0.
fn march_tau(phi: &[Complex64], k: &Coefficients, h: f64, s: &mut [Complex64]) {
    s[0] = Complex64::new(0.0, 0.0);
    for j in 0..phi.len() - 1 {
        let mid = half_step(phi, j);
        let rhs_mid = |y: Complex64| k.decay_mid[j] * y + k.drive_mid[j] * mid;
        let y = s[j];
        let k1 = k.decay[j] * y + k.drive[j] * phi[j];
        let k2 = rhs_mid(y + k1 * (0.5 * h));
        let k3 = rhs_mid(y + k2 * (0.5 * h));
        let y4 = y + k3 * h;
        let k4 = k.decay[j + 1] * y4 + k.drive[j + 1] * phi[j + 1];
        s[j + 1] = y + (k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0);
    }
}

pub fn check_resolution(problem: &Problem, grid: &OracleGrid) -> Result<(), OracleError> {
    let h = grid.tau_step();
    let detuning = problem.detuning();
    let max_delta = (0..grid.n_tau)
        .map(|j| detuning.at(problem.schedule.omega_at(grid.tau(j))).abs())
        .fold(0.0, f64::max);
    let mut limit = MAX_TAU_STEP;
    if max_delta > 0.0 {
        limit = limit.min(0.1 / max_delta);
    }
    // Slack for grids whose step is the limit up to rounding.
    if h > limit * (1.0 + 1e-9) {
        return Err(OracleError::Resolution {
            axis: "tau",
            step: h,
            limit,
        });
    }
    let dz = grid.zeta_step();
    if dz > MAX_ZETA_STEP * (1.0 + 1e-9) {
        return Err(OracleError::Resolution {
            axis: "zeta",
            step: dz,
            limit: MAX_ZETA_STEP,
        });
    }
    Ok(())
}

/// Integrates the field equations on `grid`; the problem's own τ grid is
/// not used.
pub fn integrate(
    problem: &Problem,
    grid: &OracleGrid,
    with_losses: bool,
) -> Result<OracleField, OracleError> {
    let n = grid.n_tau;
    let rows = grid.n_zeta + 1;
    let mut phi = Vec::with_capacity(rows * n);
    let mut s = Vec::with_capacity(rows * n);
    march(problem, grid, with_losses, |_, phi_row, s_row| {
        phi.extend_from_slice(phi_row);
        s.extend_from_slice(s_row);
    })?;
    Ok(OracleField {
        grid: *grid,
        phi,
        s,
    })
}

/// Same integration keeping only Φ at the exit.
pub fn integrate_exit(
    problem: &Problem,
    grid: &OracleGrid,
    with_losses: bool,
) -> Result<TimeSeries, OracleError> {
    let mut exit = Vec::new();
    march(problem, grid, with_losses, |row, phi_row, _| {
        if row == grid.n_zeta {
            exit = phi_row.to_vec();
        }
    })?;
    Ok(TimeSeries {
        zeta: 1.0,
        tau_min: grid.tau_min,
        step: grid.tau_step(),
        values: exit,
        error: 0.0,
    })
}

/// Marches in ζ, handing each finished (Φ, s) row to `on_row`.
fn march<F>(
    problem: &Problem,
    grid: &OracleGrid,
    with_losses: bool,
    mut on_row: F,
) -> Result<(), OracleError>
where
    F: FnMut(usize, &[Complex64], &[Complex64]),
{
    problem.medium.validate()?;
    problem.schedule.validate()?;
    let sim = grid.as_simulation_grid()?;
    problem.pulse.check_support(&sim)?;
    check_resolution(problem, grid)?;

    let n = grid.n_tau;
    let h = grid.tau_step();
    let dz = grid.zeta_step();
    let loss = if with_losses { problem.medium.k_l } else { 0.0 };
    let k = coefficients(problem, grid, with_losses);

    let zero = Complex64::new(0.0, 0.0);
    let mut current = problem.pulse.sample(&sim);
    let mut next = vec![zero; n];
    let mut s_row = vec![zero; n];
    let mut half = vec![zero; n];
    let mut s_half = vec![zero; n];
    let finite = |v: &Complex64| v.re.is_finite() && v.im.is_finite();
    for row in 0..=grid.n_zeta {
        march_tau(&current, &k, h, &mut s_row);
        if let Some(j) = (0..n).find(|&j| !(finite(&current[j]) && finite(&s_row[j]))) {
            return Err(OracleError::NotFinite {
                zeta_index: row,
                tau_index: j,
            });
        }
        on_row(row, &current, &s_row);
        if row == grid.n_zeta {
            break;
        }
        for j in 0..n {
            half[j] = current[j] + (k.feed[j] * s_row[j] - current[j] * loss) * (0.5 * dz);
        }
        march_tau(&half, &k, h, &mut s_half);
        for j in 0..n {
            next[j] = current[j] + (k.feed[j] * s_half[j] - half[j] * loss) * dz;
        }
        std::mem::swap(&mut current, &mut next);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelError {
    pub tau_step: f64,
    pub zeta_step: f64,
    /// Max-norm distance of the exit field from the Richardson extrapolant.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub levels: Vec<LevelError>,
    /// Observed order from the three finest levels; `None` when the
    /// differences vanish (nothing to converge).
    pub order: Option<f64>,
    /// Errors decrease from level to level.
    pub monotone: bool,
}

/// Refines τ and ζ together by factors of two starting from `base` and
/// compares the exit fields on the base τ nodes.
pub fn convergence_study(
    problem: &Problem,
    base: &OracleGrid,
    levels: usize,
    with_losses: bool,
) -> Result<ConvergenceReport, OracleError> {
    if levels < 3 {
        return Err(OracleError::Levels(levels));
    }
    let mut samples = Vec::with_capacity(levels);
    let mut grids = Vec::with_capacity(levels);
    for level in 0..levels {
        let factor = 1usize << level;
        let grid = base.refined(factor);
        let exit = integrate_exit(problem, &grid, with_losses)?.values;
        samples.push(
            (0..base.n_tau)
                .map(|j| exit[j * factor])
                .collect::<Vec<_>>(),
        );
        grids.push(grid);
    }
    let distance = |a: &[Complex64], b: &[Complex64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    };
    let l = levels - 1;
    let d_coarse = distance(&samples[l - 2], &samples[l - 1]);
    let d_fine = distance(&samples[l - 1], &samples[l]);
    let order = if d_fine > 0.0 && d_coarse > 0.0 {
        Some((d_coarse / d_fine).log2())
    } else {
        None
    };
    let extrapolant: Vec<Complex64> = match order {
        Some(p) if p > 0.0 => {
            let r = 2f64.powf(p) - 1.0;
            samples[l]
                .iter()
                .zip(&samples[l - 1])
                .map(|(fine, coarse)| fine + (fine - coarse) / r)
                .collect()
        }
        _ => samples[l].clone(),
    };
    let levels: Vec<LevelError> = grids
        .iter()
        .zip(&samples)
        .map(|(g, u)| LevelError {
            tau_step: g.tau_step(),
            zeta_step: g.zeta_step(),
            error: distance(u, &extrapolant),
        })
        .collect();
    let monotone = levels
        .windows(2)
        .all(|w| w[1].error < w[0].error || w[0].error == 0.0);
    Ok(ConvergenceReport {
        levels,
        order,
        monotone,
    })
}
