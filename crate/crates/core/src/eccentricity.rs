//! Eccentricity functions of the averaged potential and their quadrature referee.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const MAX_ECC_ORDER: u32 = 8;

/// `-(1 - e^2)^(-3/2)` expanded through `e^8`: coefficients of `e^0, e^2, ..., e^8`.
const H20_COEFFS: [f64; 5] = [-1.0, -3.0 / 2.0, -15.0 / 8.0, -35.0 / 16.0, -315.0 / 128.0];

/// Coefficients of `e^1, e^3, e^5, e^7` in the 3:2 resonant term.
const H22_COEFFS: [f64; 4] = [7.0 / 2.0, -123.0 / 16.0, 489.0 / 128.0, -1763.0 / 2048.0];

fn check(e: f64, order: u32) -> Result<()> {
    if !(0.0..1.0).contains(&e) {
        return Err(Error::InvalidDomain(format!("eccentricity {e} outside [0, 1)")));
    }
    if order > MAX_ECC_ORDER {
        return Err(Error::Unsupported(format!(
            "eccentricity order {order} exceeds {MAX_ECC_ORDER}"
        )));
    }
    Ok(())
}

/// Secular factor of the `C20` term, truncated at `e^order`.
pub fn ecc_h20(e: f64, order: u32) -> Result<f64> {
    check(e, order)?;
    let e2 = e * e;
    Ok(H20_COEFFS
        .iter()
        .enumerate()
        .take_while(|(k, _)| 2 * *k as u32 <= order)
        .map(|(k, c)| c * e2.powi(k as i32))
        .sum())
}

/// Resonant factor of the `C22` term, truncated at `e^order`.
pub fn ecc_h22(e: f64, order: u32) -> Result<f64> {
    check(e, order)?;
    Ok(H22_COEFFS
        .iter()
        .enumerate()
        .take_while(|(k, _)| 2 * (*k as u32) < order)
        .map(|(k, c)| c * e.powi(2 * k as i32 + 1))
        .sum())
}

/// Eccentric anomaly for mean anomaly `m`, Newton iteration to 1e-13.
pub fn solve_kepler(m: f64, e: f64) -> Result<f64> {
    let mut ecc_anom = m + 0.85 * e * m.sin().signum();
    let mut step = f64::INFINITY;
    for _ in 0..60 {
        let f = ecc_anom - e * ecc_anom.sin() - m;
        let fp = 1.0 - e * ecc_anom.cos();
        step = f / fp;
        ecc_anom -= step;
        if step.abs() < 1e-13 {
            return Ok(ecc_anom);
        }
    }
    Err(Error::KeplerNonConvergence {
        mean_anomaly: m,
        eccentricity: e,
        last_step: step,
    })
}

/// True anomaly and `a/r` at mean anomaly `m`.
pub fn orbit_point(m: f64, e: f64) -> Result<(f64, f64)> {
    let ea = solve_kepler(m, e)?;
    let v = 2.0 * ((1.0 + e).sqrt() * (0.5 * ea).sin()).atan2((1.0 - e).sqrt() * (0.5 * ea).cos());
    Ok((v, 1.0 / (1.0 - e * ea.cos())))
}

/// `(1/2pi) int_0^2pi (a/r)^3 cos(p v - q M) dM`, by trapezoid refinement on the
/// periodic integrand until successive estimates agree to 1e-14.
pub fn hansen_quadrature(p: i32, q: i32, e: f64) -> Result<f64> {
    if !(0.0..0.95).contains(&e) {
        return Err(Error::InvalidDomain(format!(
            "quadrature eccentricity {e} outside [0, 0.95)"
        )));
    }
    let integrand = |m: f64| -> Result<f64> {
        let (v, a_over_r) = orbit_point(m, e)?;
        Ok(a_over_r.powi(3) * (p as f64 * v - q as f64 * m).cos())
    };
    let mut n = 32usize;
    let mut sum: f64 = (0..n)
        .map(|k| integrand(2.0 * PI * k as f64 / n as f64))
        .sum::<Result<f64>>()?;
    let mut estimate = sum / n as f64;
    loop {
        // midpoints of the current grid
        let mid: f64 = (0..n)
            .map(|k| integrand(2.0 * PI * (k as f64 + 0.5) / n as f64))
            .sum::<Result<f64>>()?;
        sum += mid;
        n *= 2;
        let next = sum / n as f64;
        if (next - estimate).abs() <= 1e-14 * next.abs().max(1.0) || n >= 1 << 22 {
            return Ok(next);
        }
        estimate = next;
    }
}
