//! Bessel functions of the first kind of orders 0, 1 and 2 for real,
//! non-negative arguments, plus the two regularized kernels used by the
//! propagation law.
//!
//! Evaluation is split into three bands:
//!
//! * `x < 8`: power series. The largest term at `x = 8` is below 10², so
//!   cancellation costs at most two digits.
//! * `8 <= x < 25`: Miller's backward recurrence normalized with
//!   `J0 + 2 Σ J2k = 1`.
//! * `x >= 25`: Hankel asymptotic expansion; its smallest term is of order
//!   `exp(-2x)`, far below double precision in this band.
//!
//! `J2` is obtained from the upward recurrence `J2 = 2 J1 / x - J0` outside
//! the series band, which is stable because the order stays below `x`.

use std::f64::consts::PI;

use thiserror::Error;

const SERIES_LIMIT: f64 = 8.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;
const SMALL_KERNEL_LIMIT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DomainError {
    #[error("Bessel argument must be finite, got {0}")]
    NotFinite(f64),
    #[error("Bessel argument must be non-negative, got {0}")]
    Negative(f64),
}

fn check(x: f64) -> Result<f64, DomainError> {
    if !x.is_finite() {
        Err(DomainError::NotFinite(x))
    } else if x < 0.0 {
        Err(DomainError::Negative(x))
    } else {
        Ok(x)
    }
}

/// Bessel function `J0(x)` for `x >= 0`.
pub fn bessel_j0(x: f64) -> Result<f64, DomainError> {
    check(x).map(|x| j0_j1(x).0)
}

/// Bessel function `J1(x)` for `x >= 0`.
pub fn bessel_j1(x: f64) -> Result<f64, DomainError> {
    check(x).map(j1)
}

/// Bessel function `J2(x)` for `x >= 0`.
pub fn bessel_j2(x: f64) -> Result<f64, DomainError> {
    check(x).map(|x| j012(x)[2])
}

/// `J1(x) / x`, with the removable singularity filled in (`K1(0) = 1/2`).
///
/// Argument must be non-negative; this is the inner-loop kernel and does not
/// validate in release builds.
#[inline]
pub fn kernel_k1(x: f64) -> f64 {
    debug_assert!(x >= 0.0, "kernel_k1 argument {x} is negative");
    if x < SMALL_KERNEL_LIMIT {
        let y = x * x;
        // 1/2 - y/16 + y²/384 - y³/18432
        0.5 + y * (-1.0 / 16.0 + y * (1.0 / 384.0 - y / 18432.0))
    } else {
        j1(x) / x
    }
}

/// The coherence kernel `2 J1(x)/x - J2(x)`, equal to 1 at the origin.
#[inline]
pub fn kernel_retrieval(x: f64) -> f64 {
    debug_assert!(x >= 0.0, "kernel_retrieval argument {x} is negative");
    if x < SMALL_KERNEL_LIMIT {
        let y = x * x;
        // 1 - y/4 + y²/64 - y³/2304
        1.0 + y * (-0.25 + y * (1.0 / 64.0 - y / 2304.0))
    } else {
        let [_, j1, j2] = j012(x);
        2.0 * j1 / x - j2
    }
}

#[inline]
fn j1(x: f64) -> f64 {
    if x < SERIES_LIMIT {
        series(1, x)
    } else {
        j0_j1(x).1
    }
}

fn j0_j1(x: f64) -> (f64, f64) {
    if x < SERIES_LIMIT {
        (series(0, x), series(1, x))
    } else if x < ASYMPTOTIC_LIMIT {
        miller(x)
    } else {
        (hankel(0, x), hankel(1, x))
    }
}

/// `[J0(x), J1(x), J2(x)]`.
pub(crate) fn j012(x: f64) -> [f64; 3] {
    if x < SERIES_LIMIT {
        [series(0, x), series(1, x), series(2, x)]
    } else {
        let (j0, j1) = j0_j1(x);
        [j0, j1, 2.0 * j1 / x - j0]
    }
}

/// `Σ_k (-x²/4)^k (x/2)^n / (k! (k+n)!)`.
fn series(order: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let y = -half * half;
    let mut term = match order {
        0 => 1.0,
        1 => half,
        _ => half * half / 2.0,
    };
    let mut sum = term;
    let n = f64::from(order);
    let mut k = 1.0;
    loop {
        term *= y / (k * (k + n));
        sum += term;
        if k > half && (term.abs() <= 1e-17 * sum.abs() || term.abs() < 1e-25) {
            break;
        }
        k += 1.0;
    }
    sum
}

fn miller(x: f64) -> (f64, f64) {
    // Even start index well beyond the turning point; J_start(x) < 1e-20 for x < 25.
    let start = 2 * ((x + 20.0 + 6.0 * x.cbrt()) as usize / 2);
    let mut above = 0.0;
    let mut current = 1e-30;
    let mut norm = 0.0;
    let mut j1 = 0.0;
    for m in (1..=start).rev() {
        let below = 2.0 * m as f64 / x * current - above;
        above = current;
        current = below;
        let order = m - 1;
        if order == 1 {
            j1 = current;
        }
        if order > 0 && order % 2 == 0 {
            norm += 2.0 * current;
        }
        if current.abs() > 1e250 {
            current *= 1e-250;
            above *= 1e-250;
            norm *= 1e-250;
            j1 *= 1e-250;
        }
    }
    norm += current;
    (current / norm, j1 / norm)
}

fn hankel(order: u32, x: f64) -> f64 {
    let mu = 4.0 * f64::from(order * order);
    let eight_x = 8.0 * x;
    let mut term = 1.0;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut last = f64::INFINITY;
    for k in 1..60u32 {
        let odd = f64::from(2 * k - 1);
        term *= (mu - odd * odd) / (f64::from(k) * eight_x);
        let magnitude = term.abs();
        if magnitude > last || magnitude < 1e-18 {
            break;
        }
        last = magnitude;
        // P takes even k with alternating signs, Q the odd k.
        match k % 4 {
            0 => p += term,
            1 => q += term,
            2 => p -= term,
            _ => q -= term,
        }
    }
    let chi = x - (f64::from(order) * 0.5 + 0.25) * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: `J_n(x) = (1/π) ∫_0^π cos(nt - x sin t) dt`.
    /// The integrand is smooth and periodic, so the trapezoid rule converges
    /// geometrically once the node count exceeds `x`.
    fn bessel_integral(n: u32, x: f64) -> f64 {
        let nodes = 2 * (x as usize + 64);
        let h = PI / nodes as f64;
        let g = |t: f64| (f64::from(n) * t - x * t.sin()).cos();
        let mut sum = 0.5 * (g(0.0) + g(PI));
        for k in 1..nodes {
            sum += g(k as f64 * h);
        }
        sum * h / PI
    }

    #[test]
    fn values_at_origin() {
        assert_eq!(bessel_j0(0.0).unwrap(), 1.0);
        assert_eq!(bessel_j1(0.0).unwrap(), 0.0);
        assert_eq!(bessel_j2(0.0).unwrap(), 0.0);
        assert_eq!(kernel_k1(0.0), 0.5);
        assert_eq!(kernel_retrieval(0.0), 1.0);
    }

    #[test]
    fn j1_at_one_matches_integral_oracle() {
        let oracle = bessel_integral(1, 1.0);
        assert!((oracle - 0.440_050_585_744_933_5).abs() < 1e-15);
        assert!((bessel_j1(1.0).unwrap() - oracle).abs() < 1e-15);
        assert!((bessel_j1(1.0).unwrap() - 0.440_050_585_7).abs() < 1e-9);
    }

    #[test]
    fn first_zero_of_j1() {
        let z = 3.831_705_970_207_512_3;
        assert!(bessel_j1(z).unwrap().abs() < 1e-14);
        assert!(kernel_k1(z).abs() < 1e-9);
        assert!(bessel_j1(3.831_705_970_2).unwrap().abs() < 1e-9);
        // Retrieval kernel reduces to -J2 there.
        let j2 = bessel_j2(z).unwrap();
        assert!((kernel_retrieval(z) + j2).abs() < 1e-9);
    }

    #[test]
    fn k1_small_argument_series() {
        let x = 1e-4;
        let expected = 0.5 * (1.0 - 1e-8 / 8.0);
        assert!((kernel_k1(x) - expected).abs() < 1e-14);
        // Continuity across the series switch.
        let below = kernel_k1(SMALL_KERNEL_LIMIT * (1.0 - 1e-12));
        let above = kernel_k1(SMALL_KERNEL_LIMIT * (1.0 + 1e-12));
        assert!((below - above).abs() < 1e-14);
    }

    #[test]
    fn agrees_with_integral_oracle_over_range() {
        let mut x = 0.0;
        while x <= 200.0 {
            let [j0, j1, j2] = j012(x);
            for (n, value) in [(0, j0), (1, j1), (2, j2)] {
                let oracle = bessel_integral(n, x);
                let err = (value - oracle).abs();
                assert!(
                    err <= 1e-12 * oracle.abs().max(1.0),
                    "J{n}({x}) = {value}, oracle {oracle}, err {err:e}"
                );
            }
            x += 0.173;
        }
    }

    #[test]
    fn bands_join_continuously() {
        for edge in [SERIES_LIMIT, ASYMPTOTIC_LIMIT] {
            let lo = j012(edge - 1e-12);
            let hi = j012(edge);
            for n in 0..3 {
                assert!((lo[n] - hi[n]).abs() < 2e-12, "J{n} jumps at {edge}");
            }
        }
    }

    #[test]
    fn recurrence_residual_sweep() {
        let n = 10_000;
        for k in 0..n {
            let x = 1e-3 + (100.0 - 1e-3) * k as f64 / (n - 1) as f64;
            let [j0, j1, j2] = j012(x);
            let residual = 2.0 * j1 / x - j0 - j2;
            assert!(residual.abs() < 1e-11, "residual {residual:e} at {x}");
        }
    }

    #[test]
    fn retrieval_kernel_is_j0() {
        for x in [0.5, 2.0, 7.0, 13.0, 40.0] {
            let diff = kernel_retrieval(x) - bessel_j0(x).unwrap();
            assert!(diff.abs() < 1e-11, "x = {x}: {diff:e}");
        }
    }

    #[test]
    fn k1_decreases_on_first_lobe() {
        let zero = 3.831_705_970_207_512;
        let mut prev = kernel_k1(0.0);
        for k in 1..=2000 {
            let v = kernel_k1(zero * k as f64 / 2000.0);
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert_eq!(bessel_j1(-1.0), Err(DomainError::Negative(-1.0)));
        assert!(matches!(
            bessel_j2(f64::NAN),
            Err(DomainError::NotFinite(_))
        ));
        assert!(matches!(
            bessel_j0(f64::INFINITY),
            Err(DomainError::NotFinite(_))
        ));
    }
}
