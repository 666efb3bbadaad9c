//! Composite Simpson quadrature with Richardson error estimates.
//!
//! Two entry points: [`integrate_samples`] for integrands already tabulated on
//! a uniform grid, and [`integrate`] for closures, which doubles the number
//! of intervals until the Richardson estimate meets the tolerance.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use thiserror::Error;

/// Values that can be summed by the quadrature rules.
pub trait Integrand:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn magnitude(self) -> f64;
}

impl Integrand for f64 {
    #[inline]
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Integrand for Complex64 {
    #[inline]
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    /// Richardson estimate of the absolute error in `value`.
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    /// Relative tolerance on the error estimate.
    pub tol: f64,
    /// Absolute floor below which an estimate is always accepted.
    pub abs_tol: f64,
    /// Number of interval doublings before giving up.
    pub max_depth: u32,
    /// Even number of intervals at the first level.
    pub initial_intervals: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            abs_tol: 1e-15,
            max_depth: 20,
            initial_intervals: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error(
    "quadrature did not converge after {depth} doublings: best {best:e}, error estimate {error:e}"
)]
pub struct NonConvergence {
    pub best: f64,
    pub error: f64,
    pub depth: u32,
}

/// Weight (in units of the step) of node `j` in the composite rule over
/// nodes `0..=last`.
///
/// Even interval counts use plain Simpson; odd counts close the last three
/// intervals with Simpson's 3/8 rule. One interval falls back to the
/// trapezoid rule. Used for the Volterra sums, where the upper node moves.
#[inline]
pub fn simpson_weight(last: usize, j: usize) -> f64 {
    debug_assert!(j <= last);
    match last {
        0 => 0.0,
        1 => 0.5,
        3 => {
            if j == 0 || j == 3 {
                0.375
            } else {
                1.125
            }
        }
        _ => {
            let simpson_end = if last.is_multiple_of(2) {
                last
            } else {
                last - 3
            };
            if j < simpson_end {
                if j == 0 {
                    1.0 / 3.0
                } else if j % 2 == 1 {
                    4.0 / 3.0
                } else {
                    2.0 / 3.0
                }
            } else if j == simpson_end {
                // Shared node between the Simpson block and the 3/8 tail.
                if last.is_multiple_of(2) {
                    1.0 / 3.0
                } else {
                    1.0 / 3.0 + 0.375
                }
            } else if j == last {
                0.375
            } else {
                1.125
            }
        }
    }
}

fn composite<T: Integrand>(samples: &[T], stride: usize, h: f64) -> T {
    let last = (samples.len() - 1) / stride;
    let mut acc = T::default();
    for j in 0..=last {
        acc = acc + samples[j * stride] * simpson_weight(last, j);
    }
    acc * h
}

/// Composite Simpson integral of uniformly spaced samples.
///
/// The error estimate compares against the same rule on every other sample
/// over the longest prefix with an even interval count, scaled by 1/15.
pub fn integrate_samples<T: Integrand>(samples: &[T], h: f64) -> Estimate<T> {
    let n = samples.len();
    if n < 2 {
        return Estimate {
            value: T::default(),
            error: 0.0,
        };
    }
    let value = composite(samples, 1, h);
    let intervals = n - 1;
    let error = if intervals >= 4 {
        let prefix = &samples[..=(intervals & !1)];
        let fine = composite(prefix, 1, h);
        let coarse = composite(prefix, 2, 2.0 * h);
        (fine - coarse).magnitude() / 15.0
    } else {
        let trapezoid = (samples.iter().fold(T::default(), |a, &b| a + b)
            - (samples[0] + samples[n - 1]) * 0.5)
            * h;
        (value - trapezoid).magnitude()
    };
    Estimate { value, error }
}

/// Adaptive composite Simpson integral of `f` over `[a, b]`.
///
/// Doubles the interval count until the Richardson estimate
/// `|S(2n) - S(n)| / 15` falls below `tol · |S(2n)|` (or `abs_tol`).
pub fn integrate<F>(
    f: F,
    a: f64,
    b: f64,
    opts: &QuadratureOptions,
) -> Result<Estimate<f64>, NonConvergence>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let mut intervals = opts.initial_intervals.max(2);
    intervals += intervals % 2;
    let mut h = (b - a) / intervals as f64;

    // Endpoint, even-interior and odd-interior sums, reused across doublings.
    let ends = f(a) + f(b);
    let mut even = 0.0;
    let mut odd = 0.0;
    for j in 1..intervals {
        let v = f(a + j as f64 * h);
        if j % 2 == 0 {
            even += v;
        } else {
            odd += v;
        }
    }
    let mut previous = h / 3.0 * (ends + 2.0 * even + 4.0 * odd);
    let mut error = f64::INFINITY;

    for _ in 0..opts.max_depth {
        even += odd;
        intervals *= 2;
        h *= 0.5;
        odd = (0..intervals / 2)
            .map(|k| f(a + (2 * k + 1) as f64 * h))
            .sum();
        let current = h / 3.0 * (ends + 2.0 * even + 4.0 * odd);
        error = (current - previous).abs() / 15.0;
        if error <= opts.tol * current.abs() || error <= opts.abs_tol {
            return Ok(Estimate {
                value: current,
                error,
            });
        }
        previous = current;
    }
    Err(NonConvergence {
        best: previous,
        error,
        depth: opts.max_depth,
    })
}
