//! Truncated Taylor jets in two variables and dense four-variable Taylor
//! polynomials assembled from them.
//!
//! Every elementary function used by the Hamiltonian is overloaded on
//! [`Jet2`] by composing its one-variable Taylor series with the nilpotent
//! part of the argument, so coefficients are exact up to the truncation degree.

use std::collections::BTreeMap;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar interface shared by `f64` and [`Jet2`].
pub trait Real:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    /// Constant with the same shape as `self`.
    fn lift(&self, value: f64) -> Self;
    fn value(&self) -> f64;
    fn sqrt(&self) -> Self;
    fn cos(&self) -> Self;
    fn sin(&self) -> Self;

    fn square(&self) -> Self {
        self.clone() * self.clone()
    }
}

impl Real for f64 {
    fn lift(&self, value: f64) -> Self {
        value
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
}

#[inline]
fn index2(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + b
}

fn exponents2(degree: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity((degree + 1) * (degree + 2) / 2);
    for d in 0..=degree {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

/// Taylor jet in two variables truncated at total degree `degree`.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2 {
    degree: usize,
    coeffs: Vec<f64>,
}

impl Jet2 {
    pub fn constant(value: f64, degree: usize) -> Self {
        let mut coeffs = vec![0.0; (degree + 1) * (degree + 2) / 2];
        coeffs[0] = value;
        Jet2 { degree, coeffs }
    }

    /// The affine function `value + slope[0] x + slope[1] y`.
    pub fn linear(value: f64, slope: [f64; 2], degree: usize) -> Self {
        let mut j = Self::constant(value, degree);
        if degree >= 1 {
            j.coeffs[index2(1, 0)] = slope[0];
            j.coeffs[index2(0, 1)] = slope[1];
        }
        j
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Coefficient of `x^a y^b`.
    pub fn coeff(&self, a: usize, b: usize) -> f64 {
        if a + b > self.degree {
            0.0
        } else {
            self.coeffs[index2(a, b)]
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        exponents2(self.degree)
            .into_iter()
            .zip(self.coeffs.iter().copied())
    }

    fn nilpotent(&self) -> Jet2 {
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        h
    }

    fn zip(&self, other: &Jet2, f: impl Fn(f64, f64) -> f64) -> Jet2 {
        assert_eq!(self.degree, other.degree, "jet degree mismatch");
        Jet2 {
            degree: self.degree,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    fn mul_jet(&self, other: &Jet2) -> Jet2 {
        assert_eq!(self.degree, other.degree, "jet degree mismatch");
        let n = self.degree;
        let mut out = vec![0.0; self.coeffs.len()];
        for d1 in 0..=n {
            for b1 in 0..=d1 {
                let c1 = self.coeffs[index2(d1 - b1, b1)];
                if c1 == 0.0 {
                    continue;
                }
                for d2 in 0..=(n - d1) {
                    let base = index2(d2, 0);
                    let d = d1 + d2;
                    let out_base = d * (d + 1) / 2 + b1;
                    for b2 in 0..=d2 {
                        out[out_base + b2] += c1 * other.coeffs[base + b2];
                    }
                }
            }
        }
        Jet2 {
            degree: n,
            coeffs: out,
        }
    }

    /// `f(c0 + h)` given `taylor[k] = f^(k)(c0) / k!`, by Horner in the nilpotent part `h`.
    pub fn compose(&self, taylor: &[f64]) -> Jet2 {
        let h = self.nilpotent();
        let top = taylor.len().min(self.degree + 1);
        let mut out = Jet2::constant(taylor[top - 1], self.degree);
        for k in (0..top - 1).rev() {
            out = out.mul_jet(&h);
            out.coeffs[0] += taylor[k];
        }
        out
    }

    fn recip(&self) -> Jet2 {
        let c0 = self.coeffs[0];
        let mut t = Vec::with_capacity(self.degree + 1);
        let mut p = 1.0 / c0;
        for _ in 0..=self.degree {
            t.push(p);
            p *= -1.0 / c0;
        }
        self.compose(&t)
    }
}

impl Real for Jet2 {
    fn lift(&self, value: f64) -> Self {
        Jet2::constant(value, self.degree)
    }

    fn value(&self) -> f64 {
        self.coeffs[0]
    }

    fn sqrt(&self) -> Self {
        let c0 = self.coeffs[0];
        let mut t = Vec::with_capacity(self.degree + 1);
        // binom(1/2, k) c0^(1/2 - k)
        let mut binom = 1.0;
        let mut p = c0.sqrt();
        for k in 0..=self.degree {
            t.push(binom * p);
            binom *= (0.5 - k as f64) / (k as f64 + 1.0);
            p /= c0;
        }
        self.compose(&t)
    }

    fn cos(&self) -> Self {
        let (s, c) = self.coeffs[0].sin_cos();
        let cycle = [c, -s, -c, s];
        let mut fact = 1.0;
        let t: Vec<f64> = (0..=self.degree)
            .map(|k| {
                if k > 0 {
                    fact *= k as f64;
                }
                cycle[k % 4] / fact
            })
            .collect();
        self.compose(&t)
    }

    fn sin(&self) -> Self {
        let (s, c) = self.coeffs[0].sin_cos();
        let cycle = [s, c, -s, -c];
        let mut fact = 1.0;
        let t: Vec<f64> = (0..=self.degree)
            .map(|k| {
                if k > 0 {
                    fact *= k as f64;
                }
                cycle[k % 4] / fact
            })
            .collect();
        self.compose(&t)
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, rhs: Jet2) -> Jet2 {
        self.zip(&rhs, |a, b| a + b)
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, rhs: Jet2) -> Jet2 {
        self.zip(&rhs, |a, b| a - b)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: Jet2) -> Jet2 {
        self.mul_jet(&rhs)
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    fn div(self, rhs: Jet2) -> Jet2 {
        self.mul_jet(&rhs.recip())
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(mut self) -> Jet2 {
        self.coeffs.iter_mut().for_each(|c| *c = -*c);
        self
    }
}

impl Add<f64> for Jet2 {
    type Output = Jet2;
    fn add(mut self, rhs: f64) -> Jet2 {
        self.coeffs[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet2 {
    type Output = Jet2;
    fn sub(mut self, rhs: f64) -> Jet2 {
        self.coeffs[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(mut self, rhs: f64) -> Jet2 {
        self.coeffs.iter_mut().for_each(|c| *c *= rhs);
        self
    }
}

/// Sparse polynomial in four variables `(x1, x3, y1, y3)`: two actions then two angles.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TaylorPoly {
    pub degree: usize,
    pub coeffs: BTreeMap<[u16; 4], f64>,
}

impl TaylorPoly {
    pub fn new(degree: usize) -> Self {
        TaylorPoly {
            degree,
            coeffs: BTreeMap::new(),
        }
    }

    /// Adds `f(x1, x3) * g(y1, y3)`, truncated at the total degree.
    pub fn add_outer(&mut self, f: &Jet2, g: &Jet2) {
        for ((a, b), cf) in f.terms() {
            if cf == 0.0 {
                continue;
            }
            for ((c, d), cg) in g.terms() {
                if a + b + c + d > self.degree {
                    break;
                }
                if cg == 0.0 {
                    continue;
                }
                *self
                    .coeffs
                    .entry([a as u16, b as u16, c as u16, d as u16])
                    .or_insert(0.0) += cf * cg;
            }
        }
    }

    pub fn coeff(&self, e: [u16; 4]) -> f64 {
        self.coeffs.get(&e).copied().unwrap_or(0.0)
    }

    /// Terms of total degree exactly `d`.
    pub fn homogeneous(&self, d: usize) -> impl Iterator<Item = ([u16; 4], f64)> + '_ {
        self.coeffs
            .iter()
            .filter(move |(e, _)| e.iter().map(|&x| x as usize).sum::<usize>() == d)
            .map(|(e, c)| (*e, *c))
    }

    /// Removes terms below total degree `d`.
    pub fn drop_below(&mut self, d: usize) {
        self.coeffs
            .retain(|e, _| e.iter().map(|&x| x as usize).sum::<usize>() >= d);
    }

    pub fn evaluate(&self, x: [f64; 4]) -> f64 {
        self.coeffs
            .iter()
            .map(|(e, c)| {
                c * x[0].powi(e[0] as i32)
                    * x[1].powi(e[1] as i32)
                    * x[2].powi(e[2] as i32)
                    * x[3].powi(e[3] as i32)
            })
            .sum()
    }

    /// Gradient at the expansion point.
    pub fn gradient(&self) -> [f64; 4] {
        let mut g = [0.0; 4];
        for (i, gi) in g.iter_mut().enumerate() {
            let mut e = [0u16; 4];
            e[i] = 1;
            *gi = self.coeff(e);
        }
        g
    }

    /// Hessian at the expansion point.
    pub fn hessian(&self) -> [[f64; 4]; 4] {
        let mut h = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let mut e = [0u16; 4];
                e[i] += 1;
                e[j] += 1;
                let c = self.coeff(e);
                h[i][j] = if i == j { 2.0 * c } else { c };
            }
        }
        h
    }
}
