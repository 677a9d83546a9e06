//! Sparse Taylor–Fourier (Poisson) series in two action–angle pairs.
//!
//! A term is `coeff * U1^(l1/2) * U3^(l3/2) * cos|sin(k1 u1 + k3 u3)`. Action
//! powers are stored doubled so half-integer exponents stay exact integers.
//! The harmonic is kept in a canonical half-plane (`k1 > 0`, or `k1 == 0` and
//! `k3 >= 0`) so that equal series have identical term lists.
//!
//! Series values are immutable once built: every operation allocates a fresh
//! result. Products and brackets are truncated at a caller-supplied bound on
//! the total doubled degree `l1 + l3`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::{Add, Neg, Sub};

use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};

/// Coefficients at or below this magnitude are dropped.
pub const PRUNE_THRESHOLD: f64 = 1e-300;

const CHUNK: usize = 1024;
const FIELD_BITS: u32 = 12;
const FIELD_MASK: u64 = (1 << FIELD_BITS) - 1;
const HARMONIC_OFFSET: i32 = 1 << (FIELD_BITS - 1);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Trig {
    Cos,
    Sin,
}

impl Trig {
    fn letter(self) -> char {
        match self {
            Trig::Cos => 'c',
            Trig::Sin => 's',
        }
    }
}

/// Packed term key, ordered by total degree, then powers, harmonic and parity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Key(u64);

impl Key {
    fn pack(twice_pow: [u32; 2], harmonic: [i32; 2], trig: Trig) -> Key {
        debug_assert!(twice_pow[0] + twice_pow[1] <= FIELD_MASK as u32);
        debug_assert!(harmonic.iter().all(|k| k.abs() < HARMONIC_OFFSET));
        let deg = (twice_pow[0] + twice_pow[1]) as u64;
        let k1 = (harmonic[0] + HARMONIC_OFFSET) as u64;
        let k3 = (harmonic[1] + HARMONIC_OFFSET) as u64;
        let t = matches!(trig, Trig::Sin) as u64;
        Key(deg << 49
            | (twice_pow[0] as u64) << 37
            | (twice_pow[1] as u64) << 25
            | k1 << 13
            | k3 << 1
            | t)
    }

    pub fn twice_degree(self) -> u32 {
        (self.0 >> 49) as u32
    }

    pub fn twice_pow(self) -> [u32; 2] {
        [
            ((self.0 >> 37) & FIELD_MASK) as u32,
            ((self.0 >> 25) & FIELD_MASK) as u32,
        ]
    }

    pub fn harmonic(self) -> [i32; 2] {
        [
            ((self.0 >> 13) & FIELD_MASK) as i32 - HARMONIC_OFFSET,
            ((self.0 >> 1) & FIELD_MASK) as i32 - HARMONIC_OFFSET,
        ]
    }

    pub fn trig(self) -> Trig {
        if self.0 & 1 == 1 {
            Trig::Sin
        } else {
            Trig::Cos
        }
    }

    pub fn is_angle_free(self) -> bool {
        self.harmonic() == [0, 0]
    }
}

/// One term of a series in unpacked form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Monomial {
    pub twice_pow: [u32; 2],
    pub harmonic: [i32; 2],
    pub trig: Trig,
    pub coeff: f64,
}

impl Monomial {
    pub fn new(twice_pow: [u32; 2], harmonic: [i32; 2], trig: Trig, coeff: f64) -> Self {
        Monomial {
            twice_pow,
            harmonic,
            trig,
            coeff,
        }
    }

    /// Canonical key and coefficient, or `None` when the term vanishes
    /// identically (`sin(0)`) or its coefficient is negligible.
    pub fn canonical(&self) -> Option<(Key, f64)> {
        canonical(self.twice_pow, self.harmonic, self.trig, self.coeff)
    }

    fn from_entry(key: Key, coeff: f64) -> Self {
        Monomial {
            twice_pow: key.twice_pow(),
            harmonic: key.harmonic(),
            trig: key.trig(),
            coeff,
        }
    }
}

#[inline]
fn canonical(twice_pow: [u32; 2], mut k: [i32; 2], trig: Trig, mut coeff: f64) -> Option<(Key, f64)> {
    if k[0] < 0 || (k[0] == 0 && k[1] < 0) {
        k = [-k[0], -k[1]];
        if trig == Trig::Sin {
            coeff = -coeff;
        }
    }
    if trig == Trig::Sin && k == [0, 0] {
        return None;
    }
    if coeff.abs() <= PRUNE_THRESHOLD {
        return None;
    }
    Some((Key::pack(twice_pow, k, trig), coeff))
}

/// Hash accumulator used while building a series.
struct Acc {
    map: FxHashMap<Key, f64>,
    bound: u32,
}

impl Acc {
    fn new(bound: u32) -> Self {
        Acc {
            map: FxHashMap::default(),
            bound,
        }
    }

    #[inline]
    fn push(&mut self, twice_pow: [u32; 2], k: [i32; 2], trig: Trig, coeff: f64) {
        if twice_pow[0] + twice_pow[1] > self.bound {
            return;
        }
        if let Some((key, c)) = canonical(twice_pow, k, trig, coeff) {
            *self.map.entry(key).or_insert(0.0) += c;
        }
    }

    fn merge(&mut self, other: Acc) {
        let mut entries: Vec<(Key, f64)> = other.map.into_iter().collect();
        entries.sort_unstable_by_key(|e| e.0);
        for (key, c) in entries {
            *self.map.entry(key).or_insert(0.0) += c;
        }
    }

    fn finish(self) -> PoissonSeries {
        let mut terms: Vec<(Key, f64)> = self
            .map
            .into_iter()
            .filter(|(_, c)| c.abs() > PRUNE_THRESHOLD)
            .collect();
        terms.sort_unstable_by_key(|e| e.0);
        PoissonSeries {
            terms,
            max_twice_degree: self.bound,
        }
    }
}

/// Accumulates terms and scaled products into a single series.
pub struct SeriesBuilder(Acc);

impl SeriesBuilder {
    pub fn new(bound: u32) -> Self {
        SeriesBuilder(Acc::new(bound))
    }

    pub fn push(&mut self, twice_pow: [u32; 2], harmonic: [i32; 2], trig: Trig, coeff: f64) {
        self.0.push(twice_pow, harmonic, trig, coeff);
    }

    pub fn add_scaled(&mut self, f: &PoissonSeries, factor: f64) {
        for &(k, c) in &f.terms {
            self.0.push(k.twice_pow(), k.harmonic(), k.trig(), c * factor);
        }
    }

    /// Adds `factor * f * g`, truncated at the builder's bound.
    pub fn add_product(&mut self, f: &PoissonSeries, g: &PoissonSeries, factor: f64) {
        for &(kf, cf) in &f.terms {
            let (lf, hf, tf) = (kf.twice_pow(), kf.harmonic(), kf.trig());
            for &(kg, cg) in &g.terms {
                let lg = kg.twice_pow();
                let pow = [lf[0] + lg[0], lf[1] + lg[1]];
                for (k, t, fac) in trig_product(tf, hf, kg.trig(), kg.harmonic()) {
                    self.0.push(pow, k, t, fac * factor * cf * cg);
                }
            }
        }
    }

    pub fn finish(self) -> PoissonSeries {
        self.0.finish()
    }
}

/// Products of two harmonics, linearized: `(k, trig, factor)` pairs.
#[inline]
fn trig_product(ta: Trig, ka: [i32; 2], tb: Trig, kb: [i32; 2]) -> [([i32; 2], Trig, f64); 2] {
    let sum = [ka[0] + kb[0], ka[1] + kb[1]];
    let diff = [ka[0] - kb[0], ka[1] - kb[1]];
    match (ta, tb) {
        (Trig::Cos, Trig::Cos) => [(diff, Trig::Cos, 0.5), (sum, Trig::Cos, 0.5)],
        (Trig::Sin, Trig::Sin) => [(diff, Trig::Cos, 0.5), (sum, Trig::Cos, -0.5)],
        (Trig::Sin, Trig::Cos) => [(sum, Trig::Sin, 0.5), (diff, Trig::Sin, 0.5)],
        (Trig::Cos, Trig::Sin) => [(sum, Trig::Sin, 0.5), (diff, Trig::Sin, -0.5)],
    }
}

/// Angle derivative of `cos|sin(k.u)` with respect to `u_j`.
#[inline]
fn trig_derivative(trig: Trig, k: [i32; 2], j: usize) -> (Trig, f64) {
    match trig {
        Trig::Cos => (Trig::Sin, -(k[j] as f64)),
        Trig::Sin => (Trig::Cos, k[j] as f64),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoissonSeries {
    terms: Vec<(Key, f64)>,
    max_twice_degree: u32,
}

impl PoissonSeries {
    pub fn zero(bound: u32) -> Self {
        PoissonSeries {
            terms: Vec::new(),
            max_twice_degree: bound,
        }
    }

    pub fn constant(value: f64, bound: u32) -> Self {
        Self::from_monomials([Monomial::new([0, 0], [0, 0], Trig::Cos, value)], bound)
    }

    /// Single-term series; zero if the term is truncated away.
    pub fn monomial(twice_pow: [u32; 2], harmonic: [i32; 2], trig: Trig, coeff: f64, bound: u32) -> Self {
        Self::from_monomials([Monomial::new(twice_pow, harmonic, trig, coeff)], bound)
    }

    /// Builds a series, canonicalizing harmonics and merging duplicates.
    pub fn from_monomials<I: IntoIterator<Item = Monomial>>(terms: I, bound: u32) -> Self {
        let mut acc = Acc::new(bound);
        for m in terms {
            acc.push(m.twice_pow, m.harmonic, m.trig, m.coeff);
        }
        acc.finish()
    }

    pub fn max_twice_degree(&self) -> u32 {
        self.max_twice_degree
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Monomial> + '_ {
        self.terms.iter().map(|&(k, c)| Monomial::from_entry(k, c))
    }

    pub fn entries(&self) -> &[(Key, f64)] {
        &self.terms
    }

    /// Coefficient of a given term (zero if absent). The harmonic is
    /// canonicalized first, so `coeff([0,0],[-1,0],Sin)` reads `-coeff(.., [1,0], Sin)`.
    pub fn coeff(&self, twice_pow: [u32; 2], harmonic: [i32; 2], trig: Trig) -> f64 {
        match canonical(twice_pow, harmonic, trig, 1.0) {
            Some((key, sign)) => self
                .terms
                .binary_search_by_key(&key, |e| e.0)
                .map(|i| sign * self.terms[i].1)
                .unwrap_or(0.0),
            None => 0.0,
        }
    }

    /// Lowest and highest doubled degree present.
    pub fn degree_range(&self) -> Option<(u32, u32)> {
        Some((
            self.terms.first()?.0.twice_degree(),
            self.terms.last()?.0.twice_degree(),
        ))
    }

    pub fn truncate(&self, bound: u32) -> Self {
        let bound = bound.min(self.max_twice_degree);
        PoissonSeries {
            terms: self
                .terms
                .iter()
                .copied()
                .filter(|(k, _)| k.twice_degree() <= bound)
                .collect(),
            max_twice_degree: bound,
        }
    }

    /// Terms of doubled degree exactly `twice_degree` (the block `f_s` with `s = twice_degree - 2`).
    pub fn homogeneous(&self, twice_degree: u32) -> Self {
        PoissonSeries {
            terms: self
                .terms
                .iter()
                .copied()
                .filter(|(k, _)| k.twice_degree() == twice_degree)
                .collect(),
            max_twice_degree: self.max_twice_degree,
        }
    }

    /// Splits into homogeneous blocks keyed by doubled degree.
    pub fn blocks(&self) -> BTreeMap<u32, PoissonSeries> {
        let mut out: BTreeMap<u32, Vec<(Key, f64)>> = BTreeMap::new();
        for &(k, c) in &self.terms {
            out.entry(k.twice_degree()).or_default().push((k, c));
        }
        out.into_iter()
            .map(|(d, terms)| {
                (
                    d,
                    PoissonSeries {
                        terms,
                        max_twice_degree: self.max_twice_degree,
                    },
                )
            })
            .collect()
    }

    /// Angle-free part (the average over the torus).
    pub fn angle_average(&self) -> Self {
        PoissonSeries {
            terms: self.terms.iter().copied().filter(|(k, _)| k.is_angle_free()).collect(),
            max_twice_degree: self.max_twice_degree,
        }
    }

    pub fn is_angle_free(&self) -> bool {
        self.terms.iter().all(|(k, _)| k.is_angle_free())
    }

    pub fn scale(&self, factor: f64) -> Self {
        let mut acc = Acc::new(self.max_twice_degree);
        for &(k, c) in &self.terms {
            acc.push(k.twice_pow(), k.harmonic(), k.trig(), c * factor);
        }
        acc.finish()
    }

    /// Largest coefficient magnitude.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.iter().fold(0.0, |m, (_, c)| m.max(c.abs()))
    }

    /// Linear combination `a*self + b*other`, valid to the smaller bound.
    pub fn axpby(&self, a: f64, other: &Self, b: f64) -> Self {
        let bound = self.max_twice_degree.min(other.max_twice_degree);
        let mut acc = Acc::new(bound);
        for &(k, c) in &self.terms {
            acc.push(k.twice_pow(), k.harmonic(), k.trig(), a * c);
        }
        for &(k, c) in &other.terms {
            acc.push(k.twice_pow(), k.harmonic(), k.trig(), b * c);
        }
        acc.finish()
    }

    /// Partial derivative with respect to the angle `u_j` (`j` = 0 for u1, 1 for u3).
    pub fn d_angle(&self, j: usize) -> Self {
        let mut acc = Acc::new(self.max_twice_degree);
        for &(key, c) in &self.terms {
            let k = key.harmonic();
            if k[j] == 0 {
                continue;
            }
            let (t, f) = trig_derivative(key.trig(), k, j);
            acc.push(key.twice_pow(), k, t, c * f);
        }
        acc.finish()
    }

    /// `{U_j, f} = -df/du_j`.
    pub fn bracket_with_action(&self, j: usize) -> Self {
        self.d_angle(j).scale(-1.0)
    }

    /// Partial derivative with respect to the action `U_j`.
    pub fn d_action(&self, j: usize) -> Result<Self> {
        let mut acc = Acc::new(self.max_twice_degree);
        for &(key, c) in &self.terms {
            let mut l = key.twice_pow();
            if l[j] == 0 {
                continue;
            }
            if l[j] < 2 {
                return Err(Error::NegativePower {
                    component: j,
                    twice_pow: l[j] as i32 - 2,
                });
            }
            let f = 0.5 * l[j] as f64;
            l[j] -= 2;
            acc.push(l, key.harmonic(), key.trig(), c * f);
        }
        Ok(acc.finish())
    }

    pub fn evaluate(&self, actions: [f64; 2], angles: [f64; 2]) -> Result<f64> {
        if actions.iter().any(|&a| a < 0.0 || !a.is_finite()) {
            return Err(Error::InvalidDomain(format!(
                "actions must be non-negative, got {actions:?}"
            )));
        }
        let mut sum = 0.0;
        for &(key, c) in &self.terms {
            let l = key.twice_pow();
            let k = key.harmonic();
            let phase = k[0] as f64 * angles[0] + k[1] as f64 * angles[1];
            let trig = match key.trig() {
                Trig::Cos => phase.cos(),
                Trig::Sin => phase.sin(),
            };
            sum += c * half_power(actions[0], l[0]) * half_power(actions[1], l[1]) * trig;
        }
        Ok(sum)
    }

    /// Weighted norm `|f_s|_R` of every homogeneous block, keyed by doubled degree.
    pub fn weighted_norms(&self, radii: [f64; 2]) -> Result<BTreeMap<u32, f64>> {
        if radii.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return Err(Error::InvalidDomain(format!(
                "norm radii must be positive, got {radii:?}"
            )));
        }
        let mut out = BTreeMap::new();
        for &(key, c) in &self.terms {
            let l = key.twice_pow();
            let w = half_power(radii[0], l[0]) * half_power(radii[1], l[1]);
            *out.entry(key.twice_degree()).or_insert(0.0) += c.abs() * w;
        }
        Ok(out)
    }

    /// Sum of the block norms.
    pub fn weighted_norm(&self, radii: [f64; 2]) -> Result<f64> {
        Ok(self.weighted_norms(radii)?.values().sum())
    }

    /// Truncated product with trigonometric products linearized.
    pub fn mul(&self, other: &Self, bound: u32) -> Self {
        let g = &other.terms;
        let g_min = match g.first() {
            Some(e) => e.0.twice_degree(),
            None => return PoissonSeries::zero(bound),
        };
        chunked(&self.terms, bound, |acc, &(kf, cf)| {
            let df = kf.twice_degree();
            if df + g_min > bound {
                return Ok(());
            }
            let lf = kf.twice_pow();
            let hf = kf.harmonic();
            let tf = kf.trig();
            for &(kg, cg) in g {
                if df + kg.twice_degree() > bound {
                    break;
                }
                let lg = kg.twice_pow();
                let pow = [lf[0] + lg[0], lf[1] + lg[1]];
                for (k, t, fac) in trig_product(tf, hf, kg.trig(), kg.harmonic()) {
                    acc.push(pow, k, t, fac * cf * cg);
                }
            }
            Ok(())
        })
        .expect("product cannot fail")
    }

    /// Poisson bracket `{f, g} = sum_j (df/du_j dg/dU_j - df/dU_j dg/du_j)`,
    /// truncated at `bound`.
    pub fn poisson_bracket(&self, other: &Self, bound: u32) -> Result<Self> {
        let g = &other.terms;
        let g_min = match g.first() {
            Some(e) => e.0.twice_degree(),
            None => return Ok(PoissonSeries::zero(bound)),
        };
        chunked(&self.terms, bound, |acc, &(kf, cf)| {
            let df = kf.twice_degree();
            if df + g_min > bound + 2 {
                return Ok(());
            }
            let lf = kf.twice_pow();
            let hf = kf.harmonic();
            let tf = kf.trig();
            for &(kg, cg) in g {
                if df + kg.twice_degree() > bound + 2 {
                    break;
                }
                let lg = kg.twice_pow();
                let hg = kg.harmonic();
                let tg = kg.trig();
                for j in 0..2 {
                    let a = hf[j] != 0 && lg[j] != 0;
                    let b = lf[j] != 0 && hg[j] != 0;
                    if !a && !b {
                        continue;
                    }
                    if lf[j] + lg[j] < 2 {
                        return Err(Error::NegativePower {
                            component: j,
                            twice_pow: (lf[j] + lg[j]) as i32 - 2,
                        });
                    }
                    let mut pow = [lf[0] + lg[0], lf[1] + lg[1]];
                    pow[j] -= 2;
                    if a {
                        let (tdf, fdf) = trig_derivative(tf, hf, j);
                        let c = fdf * cf * 0.5 * lg[j] as f64 * cg;
                        for (k, t, fac) in trig_product(tdf, hf, tg, hg) {
                            acc.push(pow, k, t, fac * c);
                        }
                    }
                    if b {
                        let (tdg, fdg) = trig_derivative(tg, hg, j);
                        let c = -0.5 * lf[j] as f64 * cf * fdg * cg;
                        for (k, t, fac) in trig_product(tf, hf, tdg, hg) {
                            acc.push(pow, k, t, fac * c);
                        }
                    }
                }
            }
            Ok(())
        })
    }

    /// Line-oriented text form: one `2l1 2l3 k1 k3 c|s coeff` term per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# max_twice_degree {}", self.max_twice_degree);
        for m in self.iter() {
            let _ = writeln!(
                out,
                "{} {} {} {} {} {:e}",
                m.twice_pow[0],
                m.twice_pow[1],
                m.harmonic[0],
                m.harmonic[1],
                m.trig.letter(),
                m.coeff
            );
        }
        out
    }

    /// Parses [`PoissonSeries::to_text`] output. Blank lines and other `#`
    /// comments are ignored; without a header the bound is the highest degree present.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut bound = None;
        let mut terms = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let mut it = rest.split_whitespace();
                if it.next() == Some("max_twice_degree") {
                    bound = Some(parse_field::<u32>(it.next(), n + 1, "bound")?);
                }
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 6 {
                return Err(Error::Parse {
                    line: n + 1,
                    msg: format!("expected 6 fields, found {}", f.len()),
                });
            }
            let trig = match f[4] {
                "c" => Trig::Cos,
                "s" => Trig::Sin,
                other => {
                    return Err(Error::Parse {
                        line: n + 1,
                        msg: format!("parity must be c or s, found {other:?}"),
                    })
                }
            };
            terms.push(Monomial::new(
                [
                    parse_field(Some(f[0]), n + 1, "2l1")?,
                    parse_field(Some(f[1]), n + 1, "2l3")?,
                ],
                [
                    parse_field(Some(f[2]), n + 1, "k1")?,
                    parse_field(Some(f[3]), n + 1, "k3")?,
                ],
                trig,
                parse_field(Some(f[5]), n + 1, "coeff")?,
            ));
        }
        let bound = bound.unwrap_or_else(|| {
            terms
                .iter()
                .map(|m| m.twice_pow[0] + m.twice_pow[1])
                .max()
                .unwrap_or(0)
        });
        Ok(Self::from_monomials(terms, bound))
    }
}

/// `x^(l/2)` for `x >= 0`.
#[inline]
pub fn half_power(x: f64, twice_pow: u32) -> f64 {
    let whole = x.powi((twice_pow / 2) as i32);
    if twice_pow % 2 == 1 {
        whole * x.sqrt()
    } else {
        whole
    }
}

fn parse_field<T: std::str::FromStr>(s: Option<&str>, line: usize, what: &str) -> Result<T> {
    s.and_then(|s| s.parse().ok()).ok_or_else(|| Error::Parse {
        line,
        msg: format!("bad {what} field"),
    })
}

/// Runs `body` over fixed-size chunks of `terms` and merges the partial
/// accumulators in chunk order, so the result does not depend on scheduling.
fn chunked<F>(terms: &[(Key, f64)], bound: u32, body: F) -> Result<PoissonSeries>
where
    F: Fn(&mut Acc, &(Key, f64)) -> Result<()> + Sync,
{
    let parts: Vec<Result<Acc>> = terms
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = Acc::new(bound);
            for t in chunk {
                body(&mut acc, t)?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = Acc::new(bound);
    for part in parts {
        let part = part?;
        if total.map.is_empty() {
            total = part;
        } else {
            total.merge(part);
        }
    }
    Ok(total.finish())
}

impl Add for &PoissonSeries {
    type Output = PoissonSeries;
    fn add(self, rhs: Self) -> PoissonSeries {
        self.axpby(1.0, rhs, 1.0)
    }
}

impl Sub for &PoissonSeries {
    type Output = PoissonSeries;
    fn sub(self, rhs: Self) -> PoissonSeries {
        self.axpby(1.0, rhs, -1.0)
    }
}

impl Neg for &PoissonSeries {
    type Output = PoissonSeries;
    fn neg(self) -> PoissonSeries {
        self.scale(-1.0)
    }
}
