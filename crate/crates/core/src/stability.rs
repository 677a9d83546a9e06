//! Effective stability time from the remainder of a normal form.
//!
//! For actions starting in the polydisk `rho0 R` the time to leave `rho R` is
//! bounded below by
//! `tau_j = (rho - rho0) R_j / (d_j b_j rho^(r/2 + 1))`, with `b_j` the weighted
//! norm of `{U_j, R_(r+1)}` and `d_j` a geometric bound on the rest of the
//! remainder tail. The effective time maximizes `min_j tau_j` over `rho` and `r`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::birkhoff::{remainder_norms, NormalForm};
use crate::cassini::UntangledForm;
use crate::error::{Error, Result};
use crate::params::DAYS_PER_YEAR;

pub const DEFAULT_LIBRATION_BOUND: f64 = 0.1;

/// Action radii for which `rho = 1` corresponds to a libration amplitude of
/// `libration_bound` radians in each angle.
pub fn domain_radii(form: &UntangledForm, libration_bound: f64) -> [f64; 2] {
    let l2 = libration_bound * libration_bound;
    [l2 / (2.0 * form.u_star[0]), l2 / (2.0 * form.u_star[1])]
}

/// Largest ratio `a_(s+1) / a_s` of a norm sequence (0 when the tail vanishes).
pub fn max_ratio(norms: &[f64]) -> f64 {
    norms
        .windows(2)
        .map(|w| match (w[0], w[1]) {
            (_, 0.0) => 0.0,
            (0.0, _) => f64::INFINITY,
            (a, b) => b / a,
        })
        .fold(0.0, f64::max)
}

/// Geometric tail factor `d = 1 / (1 - q)` with `q = max_ratio * sqrt(rho)`.
pub fn tail_factor(norms: &[f64], rho: f64) -> Result<f64> {
    let q = max_ratio(norms) * rho.sqrt();
    if q >= 1.0 {
        return Err(Error::OutsideConvergence { q });
    }
    Ok(1.0 / (1.0 - q))
}

/// Remainder norms of one normal form on a fixed domain, with the data
/// needed to turn them into times.
#[derive(Clone, Debug, PartialEq)]
pub struct RemainderProfile {
    pub r: usize,
    pub radii: [f64; 2],
    /// Mean motion (rad/day); internal time unit is `1/n` days.
    pub n: f64,
    /// Norms `|{U_j, R_s}|_R` for `s = r+1, r+2, ...`, per component.
    pub norms: [Vec<f64>; 2],
}

impl RemainderProfile {
    pub fn new(nf: &NormalForm, radii: [f64; 2], n: f64) -> Result<Self> {
        if nf.remainder.len() < 2 {
            return Err(Error::Config("tail factor needs at least two remainder blocks".into()));
        }
        let rows = remainder_norms(nf, radii)?;
        let norms = [
            rows.iter().map(|(_, b)| b[0]).collect(),
            rows.iter().map(|(_, b)| b[1]).collect(),
        ];
        Ok(RemainderProfile {
            r: nf.r,
            radii,
            n,
            norms,
        })
    }

    /// Upper end of the `rho` range where both tail bounds converge.
    pub fn convergence_limit(&self) -> f64 {
        let m = max_ratio(&self.norms[0]).max(max_ratio(&self.norms[1]));
        if m == 0.0 {
            f64::INFINITY
        } else {
            1.0 / (m * m)
        }
    }

    /// Escape-time bound in years, or infinity when no component drifts.
    pub fn escape_time(&self, rho0: f64, rho: f64) -> Result<f64> {
        if !(rho0 >= 0.0 && rho >= rho0) {
            return Err(Error::InvalidDomain(format!(
                "need 0 <= rho0 <= rho, got rho0 = {rho0}, rho = {rho}"
            )));
        }
        let power = rho.powf(self.r as f64 / 2.0 + 1.0);
        let mut tau = f64::INFINITY;
        for j in 0..2 {
            let b = self.norms[j][0];
            if b == 0.0 {
                continue;
            }
            let d = tail_factor(&self.norms[j], rho)?;
            tau = tau.min((rho - rho0) * self.radii[j] / (d * b * power));
        }
        Ok(tau / self.n / DAYS_PER_YEAR)
    }

    /// Best `(rho, tau)` for this order, or `None` when no admissible `rho` exists.
    pub fn optimize(&self, rho0: f64) -> Option<(f64, f64)> {
        let limit = self.convergence_limit();
        if rho0 >= limit {
            return None;
        }
        if rho0 == 0.0 {
            // (rho - rho0) / rho^(r/2+1) grows without bound as rho -> 0
            return Some((0.0, f64::INFINITY));
        }
        let hi = if limit.is_finite() {
            limit * (1.0 - 1e-9)
        } else {
            rho0 * 1e3
        };
        let f = |rho: f64| self.escape_time(rho0, rho).unwrap_or(0.0);
        let r = self.r.max(1) as f64;
        let analytic = (rho0 * (r + 2.0) / r).min(hi);
        let mut candidates: Vec<f64> = vec![analytic];
        let (la, lb) = (rho0.ln(), hi.ln());
        const GRID: usize = 64;
        candidates.extend((1..=GRID).map(|k| (la + (lb - la) * k as f64 / GRID as f64).exp()));
        let (mut best_rho, mut best) = (analytic, f(analytic));
        for &c in &candidates {
            let v = f(c);
            if v > best {
                best = v;
                best_rho = c;
            }
        }
        // golden-section refinement in log rho around the best candidate
        let width = (lb - la) / GRID as f64;
        let (mut a, mut b) = ((best_rho.ln() - width).max(la), (best_rho.ln() + width).min(lb));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let (mut f1, mut f2) = (f(x1.exp()), f(x2.exp()));
        for _ in 0..80 {
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = f(x2.exp());
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = f(x1.exp());
            }
        }
        for (x, v) in [(x1, f1), (x2, f2)] {
            if v > best {
                best = v;
                best_rho = x.exp();
            }
        }
        (best > 0.0).then_some((best_rho, best))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub r: usize,
    pub rho: f64,
    pub tau_years: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub rho0: f64,
    pub radii: [f64; 2],
    pub t_years: f64,
    pub best_r: usize,
    pub best_rho: f64,
    /// Tail factor (largest component) at the optimum.
    pub d: f64,
    pub per_r_curve: Vec<CurvePoint>,
}

impl StabilityReport {
    pub fn log10_t(&self) -> f64 {
        self.t_years.log10()
    }
}

/// Maximizes the escape-time bound over `rho` and over the supplied orders.
pub fn effective_time(rho0: f64, profiles: &[RemainderProfile]) -> Result<StabilityReport> {
    let found: Vec<(&RemainderProfile, CurvePoint)> = profiles
        .iter()
        .filter_map(|p| {
            p.optimize(rho0).map(|(rho, tau)| {
                let point = CurvePoint {
                    r: p.r,
                    rho,
                    tau_years: tau,
                };
                (p, point)
            })
        })
        .collect();
    let (prof, best) = found
        .iter()
        .max_by(|a, b| a.1.tau_years.total_cmp(&b.1.tau_years))
        .ok_or(Error::NoEstimate { rho0 })?;
    let d = if best.rho > 0.0 {
        tail_factor(&prof.norms[0], best.rho)?.max(tail_factor(&prof.norms[1], best.rho)?)
    } else {
        1.0
    };
    Ok(StabilityReport {
        rho0,
        radii: prof.radii,
        t_years: best.tau_years,
        best_r: best.r,
        best_rho: best.rho,
        d,
        per_r_curve: found.iter().map(|(_, c)| c.clone()).collect(),
    })
}

/// `(rho0, log10 T)` for one order over a grid of starting radii.
pub fn stability_curve(profile: &RemainderProfile, rho0_grid: &[f64]) -> Vec<(f64, f64)> {
    rho0_grid
        .iter()
        .map(|&rho0| {
            let t = profile.optimize(rho0).map_or(f64::NAN, |(_, tau)| tau);
            (rho0, t.log10())
        })
        .collect()
}

/// `start:stop:step` grid, inclusive of `stop` up to rounding.
pub fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Config(format!("range {spec:?} is not start:stop:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (start, stop, step) = (v[0], v[1], v[2]);
    if !(step > 0.0) || stop < start || !start.is_finite() || !stop.is_finite() {
        return Err(bad());
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| start + step * k as f64).collect())
}

/// Two-column text: `rho0 log10(T/yr)`, one row per grid point.
pub fn curve_to_text(r: usize, curve: &[(f64, f64)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# r = {r}");
    let _ = writeln!(s, "# rho0 log10_T_years");
    for (rho0, lt) in curve {
        let _ = writeln!(s, "{rho0:.6} {}", format_log(*lt));
    }
    s
}

fn format_log(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.6}")
    }
}

pub fn write_curve(path: &Path, r: usize, curve: &[(f64, f64)]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(curve_to_text(r, curve).as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(r: usize, b: [f64; 2], ratio: f64) -> RemainderProfile {
        let seq = |b0: f64| (0..4).map(|k| b0 * ratio.powi(k)).collect();
        RemainderProfile {
            r,
            radii: [1.0, 2.0],
            n: 1.0,
            norms: [seq(b[0]), seq(b[1])],
        }
    }

    #[test]
    fn tail_factor_cases() {
        assert_eq!(tail_factor(&[3.0, 0.0], 4.0).unwrap(), 1.0);
        assert!((tail_factor(&[1.0, 0.25, 0.0625], 4.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(tail_factor(&[1.0, 1.0], 1.0), Err(Error::OutsideConvergence { .. })));
    }

    #[test]
    fn escape_time_structure() {
        let p = profile(6, [1e-3, 2e-3], 0.1);
        assert_eq!(p.escape_time(1.0, 1.0).unwrap(), 0.0);
        let a = p.escape_time(1.0, 2.0).unwrap();
        let b = p.escape_time(0.5, 2.0).unwrap();
        // linear in rho - rho0 at fixed rho
        assert!((b / a - 1.5).abs() < 1e-12);
    }

    #[test]
    fn optimum_matches_analytic_point_without_tail() {
        let mut p = profile(8, [1e-3, 1e-3], 0.0);
        p.norms = [vec![1e-3, 0.0], vec![1e-3, 0.0]];
        let (rho, _) = p.optimize(1.3).unwrap();
        assert!((rho - 1.3 * 10.0 / 8.0).abs() < 1e-8);
    }

    #[test]
    fn finer_grid_does_not_improve() {
        let p = profile(10, [1e-6, 3e-6], 0.2);
        for rho0 in [0.3, 1.0, 2.5] {
            let (_, best) = p.optimize(rho0).unwrap();
            let limit = p.convergence_limit();
            let n = 6400;
            let fine = (1..n)
                .map(|k| rho0 + (limit - rho0) * k as f64 / n as f64)
                .map(|rho| p.escape_time(rho0, rho).unwrap_or(0.0))
                .fold(0.0, f64::max);
            assert!(fine <= best * 1.01);
        }
    }

    #[test]
    fn effective_time_is_nonincreasing() {
        let ps = [profile(4, [1e-3, 1e-3], 0.1), profile(8, [1e-5, 1e-4], 0.15)];
        let mut prev = f64::INFINITY;
        for k in 0..=50 {
            let rep = effective_time(0.1 * k as f64, &ps).unwrap();
            assert!(rep.t_years <= prev);
            assert!(rep.d >= 1.0);
            if k > 0 {
                assert!(rep.best_rho > rep.rho0);
            }
            prev = rep.t_years;
        }
    }

    #[test]
    fn zero_start_is_unbounded() {
        let p = profile(4, [1e-3, 1e-3], 0.1);
        assert_eq!(p.optimize(0.0).unwrap().1, f64::INFINITY);
    }

    #[test]
    fn no_estimate_beyond_convergence() {
        let p = profile(4, [1e-3, 1e-3], 0.5);
        assert!(matches!(effective_time(4.5, &[p]), Err(Error::NoEstimate { .. })));
    }

    #[test]
    fn ranges() {
        let g = parse_range("0:5:0.1").unwrap();
        assert_eq!(g.len(), 51);
        assert!((g[50] - 5.0).abs() < 1e-12);
        assert!(parse_range("1:0:0.1").is_err());
        assert!(parse_range("0:1").is_err());
    }
}
