//! Averaged resonant Hamiltonian of the 3:2 spin–orbit problem.
//!
//! Internal units: actions in `C n`, energies in `C n^2`, time in `1/n`.
//! With `G m0 = n^2 a^3` the potential prefactor `G m m0 Re^2 / a^3` becomes
//! `1/c` in these units, which keeps the equilibrium consistent with the
//! closed-form obliquity relation to rounding error.
//!
//! The Hamiltonian is a short sum `sum_k f_k(Sigma1, Sigma3) g_k(sigma1, sigma3)`.
//! Each `f_k` depends on the actions only through the inertial obliquity `K`
//! (`cos K = 1 - Sigma3/Sigma1`) and the kinetic part; each `g_k` is a fixed
//! trigonometric monomial in the resonant angles. Taylor expansions are built
//! from two-variable jets of both factors and an outer product.

use crate::eccentricity::{ecc_h20, ecc_h22, MAX_ECC_ORDER};
use crate::error::{Error, Result};
use crate::jet::{Jet2, Real, TaylorPoly};
use crate::params::PhysicalParams;

/// Angular factor `g_k(sigma1, sigma3)` of a separable term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AngleFactor {
    One,
    Cos3,
    Cos3Sq,
    Cos2PhiCos3Sq,
    Cos2PhiCos3,
    Cos2Phi,
    Cos2PhiSin3Sq,
    Sin2PhiSin3Cos3,
    Sin2PhiSin3,
}

impl AngleFactor {
    pub const ALL: [AngleFactor; 9] = [
        AngleFactor::One,
        AngleFactor::Cos3,
        AngleFactor::Cos3Sq,
        AngleFactor::Cos2PhiCos3Sq,
        AngleFactor::Cos2PhiCos3,
        AngleFactor::Cos2Phi,
        AngleFactor::Cos2PhiSin3Sq,
        AngleFactor::Sin2PhiSin3Cos3,
        AngleFactor::Sin2PhiSin3,
    ];

    /// Value at `(sigma1, sigma3)`; `phi = sigma1 + sigma3`.
    pub fn eval<T: Real>(self, s1: &T, s3: &T) -> T {
        use AngleFactor::*;
        if self == One {
            return s1.lift(1.0);
        }
        let c3 = s3.cos();
        let two_phi = (s1.clone() + s3.clone()) * 2.0;
        match self {
            One => unreachable!(),
            Cos3 => c3,
            Cos3Sq => c3.square(),
            Cos2PhiCos3Sq => two_phi.cos() * c3.square(),
            Cos2PhiCos3 => two_phi.cos() * c3,
            Cos2Phi => two_phi.cos(),
            Cos2PhiSin3Sq => two_phi.cos() * s3.sin().square(),
            Sin2PhiSin3Cos3 => two_phi.sin() * s3.sin() * c3,
            Sin2PhiSin3 => two_phi.sin() * s3.sin(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AveragedHamiltonian {
    params: PhysicalParams,
    ecc_order: u32,
    h20: f64,
    h22: f64,
    /// `omega_dot / n`
    perihelion_rate: f64,
    /// `Omega_dot / n`
    node_rate: f64,
    /// `C20 H20 / c`
    k20: f64,
    /// `C22 H22 / c`
    k22: f64,
    cos_i: f64,
    sin_i: f64,
}

impl AveragedHamiltonian {
    pub fn new(params: PhysicalParams, ecc_order: u32) -> Result<Self> {
        params.validate()?;
        if ecc_order > MAX_ECC_ORDER {
            return Err(Error::Unsupported(format!(
                "eccentricity order {ecc_order} exceeds {MAX_ECC_ORDER}; higher orders need quadrature-fitted coefficients"
            )));
        }
        let h20 = ecc_h20(params.e, ecc_order)?;
        let h22 = ecc_h22(params.e, ecc_order)?;
        Ok(AveragedHamiltonian {
            params,
            ecc_order,
            h20,
            h22,
            perihelion_rate: params.omega_dot / params.n,
            node_rate: params.node_dot / params.n,
            k20: params.c20() * h20 / params.c,
            k22: params.c22 * h22 / params.c,
            cos_i: params.i.cos(),
            sin_i: params.i.sin(),
        })
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn ecc_order(&self) -> u32 {
        self.ecc_order
    }

    pub fn h20(&self) -> f64 {
        self.h20
    }

    pub fn h22(&self) -> f64 {
        self.h22
    }

    /// Internal action unit `C n` in kg km^2 / day.
    pub fn action_unit(&self) -> f64 {
        self.params.polar_moment() * self.params.n
    }

    /// Converts an internal time to years.
    pub fn years(&self, internal_time: f64) -> f64 {
        internal_time / self.params.n / crate::params::DAYS_PER_YEAR
    }

    /// Cosine of the inertial obliquity for given actions.
    pub fn cos_k(sigma1: f64, sigma3: f64) -> f64 {
        1.0 - sigma3 / sigma1
    }

    /// Action-dependent factors `f_k`, paired with their angular factor.
    pub fn action_factors<T: Real>(&self, sig1: &T, sig3: &T) -> [(T, AngleFactor); 9] {
        let (ci, si) = (self.cos_i, self.sin_i);
        let x = sig3.clone() / sig1.clone();
        let ck = (x.clone() * -1.0) + 1.0;
        let sk2 = x.clone() * ((x * -1.0) + 2.0);
        let sk = sk2.sqrt();

        let kinetic = sig1.square() * 0.5 - sig1.clone() * (1.5 + self.perihelion_rate)
            + (sig3.clone() - sig1.clone()) * self.node_rate;

        let (k20, k22) = (self.k20, self.k22);
        let one_ck_ci = ck.clone() * ci + 1.0;
        let ci_ck = ck.clone() + ci;

        let secular = (sk2.clone() + ck.square() * (si * si)) * (0.75 * k20) - 0.5 * k20;
        [
            (kinetic + secular, AngleFactor::One),
            (sk.clone() * ck * (-1.5 * k20 * si * ci), AngleFactor::Cos3),
            (sk2.clone() * (-0.75 * k20 * si * si), AngleFactor::Cos3Sq),
            (one_ck_ci.square() * (-0.75 * k22), AngleFactor::Cos2PhiCos3Sq),
            (one_ck_ci.clone() * sk.clone() * (-1.5 * k22 * si), AngleFactor::Cos2PhiCos3),
            (sk2 * (-0.75 * k22 * si * si), AngleFactor::Cos2Phi),
            (ci_ck.square() * (0.75 * k22), AngleFactor::Cos2PhiSin3Sq),
            (one_ck_ci * ci_ck.clone() * (-1.5 * k22), AngleFactor::Sin2PhiSin3Cos3),
            (sk * ci_ck * (-1.5 * k22 * si), AngleFactor::Sin2PhiSin3),
        ]
    }

    fn check_domain(sig1: f64, sig3: f64) -> Result<()> {
        if !(sig1 > 0.0 && sig3 > 0.0 && sig3 < 2.0 * sig1) {
            return Err(Error::InvalidDomain(format!(
                "actions (Sigma1, Sigma3) = ({sig1}, {sig3}) outside 0 < Sigma3 < 2 Sigma1"
            )));
        }
        Ok(())
    }

    /// `<H>` at `(Sigma1, Sigma3, sigma1, sigma3)` in internal units.
    pub fn evaluate(&self, z: [f64; 4]) -> Result<f64> {
        Self::check_domain(z[0], z[1])?;
        Ok(self
            .action_factors(&z[0], &z[1])
            .iter()
            .map(|(f, g)| f * g.eval(&z[2], &z[3]))
            .sum())
    }

    /// Taylor expansion along an affine map: actions `Sigma = center + M x`,
    /// angles `sigma = angle_center + N y`, as a polynomial in `(x1, x3, y1, y3)`.
    pub fn expand(
        &self,
        center: [f64; 4],
        action_map: [[f64; 2]; 2],
        angle_map: [[f64; 2]; 2],
        degree: usize,
    ) -> Result<TaylorPoly> {
        Self::check_domain(center[0], center[1])?;
        let s1 = Jet2::linear(center[0], action_map[0], degree);
        let s3 = Jet2::linear(center[1], action_map[1], degree);
        let a1 = Jet2::linear(center[2], angle_map[0], degree);
        let a3 = Jet2::linear(center[3], angle_map[1], degree);
        let mut poly = TaylorPoly::new(degree);
        for (f, g) in self.action_factors(&s1, &s3) {
            poly.add_outer(&f, &g.eval(&a1, &a3));
        }
        Ok(poly)
    }

    /// Taylor expansion in the plain deviations `(dSigma1, dSigma3, dsigma1, dsigma3)`.
    pub fn jet(&self, center: [f64; 4], degree: usize) -> Result<TaylorPoly> {
        const ID: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, 1.0]];
        self.expand(center, ID, ID, degree)
    }

    pub fn gradient(&self, z: [f64; 4]) -> Result<[f64; 4]> {
        Ok(self.jet(z, 1)?.gradient())
    }

    /// Hamilton's equations: `dSigma/dt = -dH/dsigma`, `dsigma/dt = dH/dSigma`.
    pub fn vector_field(&self, z: [f64; 4]) -> Result<[f64; 4]> {
        let g = self.gradient(z)?;
        Ok([-g[2], -g[3], g[0], g[1]])
    }
}

/// Signed root `eps = i - K` of the closed-form obliquity relation.
///
/// The Cassini state 1 side (`K > i`, negative `eps`) is searched first, then
/// the opposite side. Bisection on `[1e-15, i - 1e-9]` in `|eps|` followed by a
/// guarded Newton polish.
pub fn obliquity_implicit_signed(params: &PhysicalParams) -> Result<f64> {
    params.validate()?;
    let h20 = ecc_h20(params.e, MAX_ECC_ORDER)?;
    let h22 = ecc_h22(params.e, MAX_ECC_ORDER)?;
    let (n, wd, od, i) = (params.n, params.omega_dot, params.node_dot, params.i);
    let (a20, a22) = (params.c20() * h20, params.c22 * h22);
    let residual = |eps: f64| -> f64 {
        let num = n * eps.sin() * (a20 * eps.cos() + a22 * (eps.cos() + 1.0));
        let den = od
            * (i - eps).sin()
            * (2.0 * od * (i - eps).cos() / (3.0 * n) + 2.0 * wd / (3.0 * n) + 1.0);
        params.c * den - num
    };
    let (lo_abs, hi_abs) = (1e-15, i - 1e-9);
    let mut last = None;
    for sign in [-1.0, 1.0] {
        let (mut a, mut b) = (sign * lo_abs, sign * hi_abs);
        let (mut fa, fb) = (residual(a), residual(b));
        last = Some((a, fa, b, fb));
        if fa == 0.0 {
            return Ok(a);
        }
        if fa.signum() == fb.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid == a || mid == b {
                break;
            }
            let fm = residual(mid);
            if fm.signum() == fa.signum() {
                a = mid;
                fa = fm;
            } else {
                b = mid;
            }
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let mut x = 0.5 * (a + b);
        for _ in 0..3 {
            let h = 1e-7 * x.abs().max(1e-12);
            let d = (residual(x + h) - residual(x - h)) / (2.0 * h);
            if d == 0.0 {
                break;
            }
            let next = x - residual(x) / d;
            if !(lo..=hi).contains(&next) {
                break;
            }
            x = next;
        }
        return Ok(x);
    }
    let (lo_at, lo, hi_at, hi) = last.unwrap();
    Err(Error::NoEquilibrium {
        lo_at,
        lo,
        hi_at,
        hi,
    })
}

/// Obliquity magnitude `|K - i|` (rad) from the closed-form relation.
pub fn obliquity_implicit(params: &PhysicalParams) -> Result<f64> {
    Ok(obliquity_implicit_signed(params)?.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eccentricity::orbit_point;
    use crate::params::ARCMIN_PER_RAD;
    use std::f64::consts::PI;

    fn mercury() -> AveragedHamiltonian {
        AveragedHamiltonian::new(PhysicalParams::mercury(), 8).unwrap()
    }

    type M3 = [[f64; 3]; 3];

    fn rot1(a: f64) -> M3 {
        let (s, c) = a.sin_cos();
        [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
    }

    fn rot3(a: f64) -> M3 {
        let (s, c) = a.sin_cos();
        [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
    }

    fn apply(m: &M3, v: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for r in 0..3 {
            out[r] = m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2];
        }
        out
    }

    /// Potential averaged numerically over the mean anomaly and the perihelion
    /// argument, using the exact Kepler orbit and explicit frame rotations.
    fn potential_by_quadrature(p: &PhysicalParams, big_k: f64, s1: f64, s3: f64) -> f64 {
        let (nm, nw) = (96, 16);
        let mut sum = 0.0;
        for jw in 0..nw {
            let w = 2.0 * PI * jw as f64 / nw as f64;
            for jm in 0..nm {
                let m = 2.0 * PI * jm as f64 / nm as f64;
                let (v, a_over_r) = orbit_point(m, p.e).unwrap();
                let theta = s1 + s3 + w + 1.5 * m;
                let mut b = apply(&rot3(w + v), [1.0, 0.0, 0.0]);
                b = apply(&rot1(p.i), b);
                b = apply(&rot3(s3), b);
                b = apply(&rot1(-big_k), b);
                b = apply(&rot3(-theta), b);
                let (x, y, z) = (b[0], b[1], b[2]);
                sum += -a_over_r.powi(3)
                    * (p.c20() * (3.0 * z * z - 1.0) / 2.0 + 3.0 * p.c22 * (x * x - y * y));
            }
        }
        sum / (nm * nw) as f64 / p.c
    }

    #[test]
    fn potential_matches_direct_double_average() {
        let mut p = PhysicalParams::mercury();
        p.e = 0.05; // e^9 truncation error far below the tolerance
        let h = AveragedHamiltonian::new(p, 8).unwrap();
        let sig1 = 1.4;
        for &(big_k, s1, s3) in &[(0.16, 0.0, 0.0), (0.3, 0.4, -0.7), (0.12, -1.1, 2.0), (0.5, 2.5, 0.3)] {
            let sig3 = sig1 * (1.0 - f64::cos(big_k));
            let kinetic = sig1 * sig1 / 2.0 - sig1 * (1.5 + p.omega_dot / p.n)
                + (sig3 - sig1) * p.node_dot / p.n;
            let v = h.evaluate([sig1, sig3, s1, s3]).unwrap() - kinetic;
            let q = potential_by_quadrature(&p, big_k, s1, s3);
            assert!((v - q).abs() < 1e-10 * p.j2 / p.c, "K={big_k}: {v} vs {q}");
        }
    }

    #[test]
    fn even_under_angle_reversal() {
        let h = mercury();
        for &(a, b, s1, s3) in &[(1.5, 0.017, 0.3, -0.2), (1.49, 0.02, 1.7, 0.9), (1.52, 0.015, -2.2, 0.05)] {
            let f = h.evaluate([a, b, s1, s3]).unwrap();
            let g = h.evaluate([a, b, -s1, -s3]).unwrap();
            assert!((f - g).abs() <= 1e-12 * f.abs());
        }
    }

    #[test]
    fn periodic_in_angles() {
        let h = mercury();
        let z = [1.5, 0.017, 0.4, -0.3];
        let f = h.evaluate(z).unwrap();
        let g = h.evaluate([z[0], z[1], z[2] + 2.0 * PI, z[3] - 2.0 * PI]).unwrap();
        assert!((f - g).abs() <= 1e-13 * f.abs());
    }

    #[test]
    fn jet_matches_finite_differences() {
        // each order is checked against central differences of the exact order below it
        let h = mercury();
        let z = [1.5, 0.0171, 0.05, -0.02];
        let poly = h.jet(z, 3).unwrap();
        let step = 1e-6;
        for i in 0..4 {
            let (mut zp, mut zm) = (z, z);
            zp[i] += step;
            zm[i] -= step;
            let mut k = [0u16; 4];

            let fd1 = (h.evaluate(zp).unwrap() - h.evaluate(zm).unwrap()) / (2.0 * step);
            k[i] = 1;
            let c1 = poly.coeff(k);
            assert!((fd1 - c1).abs() <= 1e-9, "d{i}: {fd1} vs {c1}");

            let fd2 = (h.gradient(zp).unwrap()[i] - h.gradient(zm).unwrap()[i]) / (2.0 * step);
            k[i] = 2;
            let c2 = 2.0 * poly.coeff(k);
            assert!((fd2 - c2).abs() <= 1e-6 * c2.abs().max(1e-3), "d2{i}: {fd2} vs {c2}");

            let hess = |p| h.jet(p, 2).unwrap().hessian()[i][i];
            let fd3 = (hess(zp) - hess(zm)) / (2.0 * step);
            k[i] = 3;
            let c3 = 6.0 * poly.coeff(k);
            assert!((fd3 - c3).abs() <= 1e-5 * c3.abs().max(1e-3), "d3{i}: {fd3} vs {c3}");
        }
    }

    #[test]
    fn circular_orbit_has_no_longitudinal_stiffness() {
        let mut p = PhysicalParams::mercury();
        p.e = 0.0;
        let h = AveragedHamiltonian::new(p, 8).unwrap();
        let hess = h.jet([1.5, 0.017, 0.0, 0.0], 2).unwrap().hessian();
        assert_eq!(hess[2][2], 0.0);
    }

    #[test]
    fn rejects_high_ecc_order() {
        assert!(matches!(
            AveragedHamiltonian::new(PhysicalParams::mercury(), 9),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn implicit_obliquity_for_mercury() {
        let eps = obliquity_implicit(&PhysicalParams::mercury()).unwrap() * ARCMIN_PER_RAD;
        assert!((eps - 2.06).abs() < 0.16, "{eps}");
        // Cassini state 1 lies beyond the orbit normal: K > i
        assert!(obliquity_implicit_signed(&PhysicalParams::mercury()).unwrap() < 0.0);
    }

    #[test]
    fn implicit_obliquity_vanishes_with_node_rate() {
        let mut p = PhysicalParams::mercury();
        let mut prev = f64::INFINITY;
        for od in [-5e-8, -5e-10, -5e-12] {
            p.node_dot = od;
            let eps = obliquity_implicit(&p).unwrap();
            assert!(eps < prev);
            prev = eps;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn implicit_obliquity_grows_with_c() {
        let mut p = PhysicalParams::mercury();
        let base = obliquity_implicit(&p).unwrap();
        p.c *= 1.2;
        assert!(obliquity_implicit(&p).unwrap() > base);
    }
}
