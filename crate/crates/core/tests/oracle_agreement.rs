use zero_pi::control::{ControlSchedule, ReadoutPulse, SwitchOff};
use zero_pi::model::{InputPulse, MediumConfig, SimulationGrid};
use zero_pi::oracle::{integrate, OracleGrid};
use zero_pi::propagator::{FieldOptions, Problem, Propagator};

fn window(tau_min: f64, tau_max: f64) -> (SimulationGrid, OracleGrid) {
    let n = ((tau_max - tau_min) / 0.01).round() as usize + 1;
    (
        SimulationGrid::new(tau_min, tau_max, n, vec![1.0]).unwrap(),
        OracleGrid {
            tau_min,
            tau_max,
            n_tau: n,
            n_zeta: 100,
        },
    )
}

fn max_gap(problem: Problem, oracle_grid: &OracleGrid, damped: bool) -> f64 {
    let prop = Propagator::new(problem.clone()).unwrap();
    let kernel = prop
        .propagate_field(
            1.0,
            &FieldOptions {
                damped,
                ..FieldOptions::default()
            },
        )
        .unwrap();
    let field = integrate(&problem, oracle_grid, damped).unwrap();
    let peak = prop.input().iter().map(|v| v.norm()).fold(0.0, f64::max);
    kernel
        .values
        .iter()
        .zip(field.output().values)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max)
        / peak
}

#[test]
fn cw_resonant() {
    let (grid, og) = window(-5.0, 45.0);
    let p = Problem {
        medium: MediumConfig::ringing(),
        schedule: ControlSchedule::cw(0.1),
        pulse: InputPulse::gaussian(0.0, 1.0).unwrap(),
        grid,
    };
    let gap = max_gap(p, &og, false);
    println!("cw gap {gap:e}");
    assert!(gap < 1e-3);
}

#[test]
fn cw_detuned() {
    for delta in [1.0, 2.0, 5.0] {
        let (grid, og) = window(-5.0, 25.0);
        let mut medium = MediumConfig::ringing();
        medium.raman_detuning_t = delta;
        let p = Problem {
            medium,
            schedule: ControlSchedule::cw(0.1),
            pulse: InputPulse::gaussian(0.0, 1.0).unwrap(),
            grid,
        };
        let gap = max_gap(p, &og, false);
        println!("δ = {delta}: gap {gap:e}");
        assert!(gap < 1e-3);
    }
}

#[test]
fn readout_train() {
    let (grid, og) = window(-5.0, 12.0);
    let t = 0.5f64.sqrt();
    let p = Problem {
        medium: MediumConfig {
            omega0_over_delta: 0.05,
            ..MediumConfig::ringing()
        },
        schedule: ControlSchedule {
            cw_level: 0.05,
            switch_off: Some(SwitchOff { tau0: 0.0, t0: 1.5 }),
            readout: vec![
                ReadoutPulse {
                    tau: 4.0,
                    width: t,
                    amp: 0.05,
                },
                ReadoutPulse {
                    tau: 7.0,
                    width: t,
                    amp: -0.05,
                },
            ],
            absorb_stark: false,
            phase: Vec::new(),
        },
        pulse: InputPulse::gaussian(0.0, 1.0).unwrap(),
        grid,
    };
    let gap = max_gap(p, &og, false);
    println!("readout gap {gap:e}");
    assert!(gap < 1e-3);
}

#[test]
fn damped_kernel_matches_pumping_loss() {
    let (grid, og) = window(-5.0, 25.0);
    let p = Problem {
        medium: MediumConfig {
            omega0_over_delta: 0.2,
            ..MediumConfig::ringing()
        },
        schedule: ControlSchedule::cw(0.2),
        pulse: InputPulse::gaussian(0.0, 1.0).unwrap(),
        grid,
    };
    let gap = max_gap(p, &og, true);
    println!("damped gap {gap:e}");
    assert!(gap < 1e-3);
}
