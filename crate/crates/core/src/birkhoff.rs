//! Birkhoff normal form by Lie series.
//!
//! Block `s` of a series is its homogeneous part of doubled action degree
//! `s + 2`, so the quadratic part `omega . U` is block 0. At order `s` the
//! generator `chi_s` solves `omega . d(chi_s)/du = H_s - Z_s` with `Z_s` the
//! angle average of `H_s`, and the Hamiltonian is replaced by
//! `exp(L_chi_s) H = H + {H, chi_s} + {{H, chi_s}, chi_s}/2 + ...`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::pseries::{PoissonSeries, SeriesBuilder, Trig};

pub const DEFAULT_EXTRA_ORDERS: usize = 4;
pub const DEFAULT_DIVISOR_FLOOR: f64 = 1e-10;
pub const DEFAULT_TERM_BUDGET: usize = 20_000_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizeOptions {
    /// Number of remainder blocks kept beyond order `r`.
    pub extra_orders: usize,
    /// Smallest admissible `|k . omega|`, relative to `|omega|`.
    pub divisor_floor: f64,
    /// Largest admissible number of terms in the working Hamiltonian.
    pub term_budget: usize,
}

impl Default for NormalizeOptions {
    fn default() -> Self {
        NormalizeOptions {
            extra_orders: DEFAULT_EXTRA_ORDERS,
            divisor_floor: DEFAULT_DIVISOR_FLOOR,
            term_budget: DEFAULT_TERM_BUDGET,
        }
    }
}

/// Doubled action degree of block `s`.
pub fn block_degree(s: usize) -> u32 {
    s as u32 + 2
}

/// Smallest divisor met while solving homological equations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmallDivisor {
    pub k: [i32; 2],
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalForm {
    pub r: usize,
    /// Doubled-degree truncation used throughout.
    pub bound: u32,
    pub omega: [f64; 2],
    /// `Z_0 ..= Z_r`.
    pub z: Vec<PoissonSeries>,
    /// `chi_1 ..= chi_r`.
    pub generators: Vec<PoissonSeries>,
    /// Remainder blocks keyed by `s`, for `s = r+1 ..= r+K`.
    pub remainder: BTreeMap<usize, PoissonSeries>,
    pub min_divisor: Option<SmallDivisor>,
}

/// Splits a homogeneous block into its angle average and the generator of
/// the corresponding Lie transform.
pub fn homological_solve(
    block: &PoissonSeries,
    omega: [f64; 2],
    floor: f64,
    order: usize,
) -> Result<(PoissonSeries, PoissonSeries, Option<SmallDivisor>)> {
    let bound = block.max_twice_degree();
    let mut z = SeriesBuilder::new(bound);
    let mut chi = SeriesBuilder::new(bound);
    let mut smallest: Option<SmallDivisor> = None;
    for m in block.iter() {
        if m.harmonic == [0, 0] {
            z.push(m.twice_pow, m.harmonic, m.trig, m.coeff);
            continue;
        }
        let div = m.harmonic[0] as f64 * omega[0] + m.harmonic[1] as f64 * omega[1];
        if div.abs() < floor {
            return Err(Error::ResonantDivisor {
                k: m.harmonic,
                divisor: div.abs(),
                order,
            });
        }
        if smallest.is_none_or(|d| div.abs() < d.value) {
            smallest = Some(SmallDivisor {
                k: m.harmonic,
                value: div.abs(),
            });
        }
        match m.trig {
            Trig::Cos => chi.push(m.twice_pow, m.harmonic, Trig::Sin, m.coeff / div),
            Trig::Sin => chi.push(m.twice_pow, m.harmonic, Trig::Cos, -m.coeff / div),
        }
    }
    Ok((z.finish(), chi.finish(), smallest))
}

/// `exp(L_chi) f` truncated at `bound`.
pub fn lie_transform(f: &PoissonSeries, chi: &PoissonSeries, bound: u32) -> Result<PoissonSeries> {
    let mut result = f.truncate(bound);
    if chi.is_empty() {
        return Ok(result);
    }
    let mut term = result.clone();
    let mut k = 1.0;
    loop {
        term = term.poisson_bracket(chi, bound)?.scale(1.0 / k);
        if term.is_empty() {
            return Ok(result);
        }
        result = &result + &term;
        k += 1.0;
    }
}

/// Applies `exp(L_chi_r) ... exp(L_chi_1)` to `f`.
pub fn apply_transforms(f: &PoissonSeries, generators: &[PoissonSeries], bound: u32) -> Result<PoissonSeries> {
    let mut out = f.truncate(bound);
    for chi in generators {
        out = lie_transform(&out, chi, bound)?;
    }
    Ok(out)
}

/// Normalizes `h0` (whose block 0 must be `omega . U`) through order `r`.
pub fn normalize(h0: &PoissonSeries, omega: [f64; 2], r: usize, opts: NormalizeOptions) -> Result<NormalForm> {
    if opts.extra_orders < 1 {
        return Err(Error::Config("at least one remainder block must be kept".into()));
    }
    let bound = block_degree(r + opts.extra_orders);
    if h0.max_twice_degree() < bound {
        return Err(Error::Config(format!(
            "input series is truncated at doubled degree {} but order {r} needs {bound}",
            h0.max_twice_degree()
        )));
    }
    let floor = opts.divisor_floor * omega[0].hypot(omega[1]);
    let mut h = h0.truncate(bound);
    let mut z = vec![h.homogeneous(block_degree(0))];
    if !z[0].is_angle_free() {
        return Err(Error::Config("block 0 is not in normal form".into()));
    }
    let mut generators = Vec::with_capacity(r);
    let mut min_divisor: Option<SmallDivisor> = None;
    for s in 1..=r {
        let block = h.homogeneous(block_degree(s));
        let (zs, chi, small) = homological_solve(&block, omega, floor, s)?;
        if let Some(d) = small {
            if min_divisor.is_none_or(|m| d.value < m.value) {
                min_divisor = Some(d);
            }
        }
        if !chi.is_empty() {
            h = lie_transform(&h, &chi, bound)?;
            if h.len() > opts.term_budget {
                return Err(Error::TermBudget {
                    budget: opts.term_budget,
                    order: s,
                });
            }
        }
        z.push(zs);
        generators.push(chi);
    }
    let remainder = (r + 1..=r + opts.extra_orders)
        .map(|s| (s, h.homogeneous(block_degree(s))))
        .collect();
    Ok(NormalForm {
        r,
        bound,
        omega,
        z,
        generators,
        remainder,
        min_divisor,
    })
}

/// Weighted norms `|{U_j, R_s}|_R` of each retained remainder block.
pub fn remainder_norms(nf: &NormalForm, radii: [f64; 2]) -> Result<Vec<(usize, [f64; 2])>> {
    nf.remainder
        .iter()
        .map(|(&s, block)| {
            let b1 = block.bracket_with_action(0).weighted_norm(radii)?;
            let b3 = block.bracket_with_action(1).weighted_norm(radii)?;
            Ok((s, [b1, b3]))
        })
        .collect()
}

impl NormalForm {
    /// `Z_0 + ... + Z_r`.
    pub fn z_total(&self) -> PoissonSeries {
        let mut b = SeriesBuilder::new(self.bound);
        for zs in &self.z {
            b.add_scaled(zs, 1.0);
        }
        b.finish()
    }

    /// Frequencies `dZ/dU` at the given actions, from blocks `Z_0 ..= Z_max_block`.
    pub fn frequencies(&self, actions: [f64; 2], max_block: usize) -> Result<[f64; 2]> {
        let mut out = [0.0; 2];
        for zs in self.z.iter().take(max_block + 1) {
            for (j, o) in out.iter_mut().enumerate() {
                *o += zs.d_action(j)?.evaluate(actions, [0.0, 0.0])?;
            }
        }
        Ok(out)
    }

    /// Section-per-block text form; see `FORMATS.md`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# normal_form r {} bound {}", self.r, self.bound);
        let _ = writeln!(s, "# omega {:.17e} {:.17e}", self.omega[0], self.omega[1]);
        if let Some(d) = self.min_divisor {
            let _ = writeln!(s, "# min_divisor {} {} {:.17e}", d.k[0], d.k[1], d.value);
        }
        let mut section = |name: &str, idx: usize, series: &PoissonSeries| {
            let _ = writeln!(s, "[{name} {idx}]");
            s.push_str(&series.to_text());
        };
        for (i, zs) in self.z.iter().enumerate() {
            section("Z", i, zs);
        }
        for (i, chi) in self.generators.iter().enumerate() {
            section("chi", i + 1, chi);
        }
        for (i, rs) in &self.remainder {
            section("R", *i, rs);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let parse_err = |line: usize, msg: &str| Error::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut r = None;
        let mut bound = None;
        let mut omega = None;
        let mut min_divisor = None;
        let mut sections: Vec<(String, usize, String)> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let f: Vec<&str> = line.split_whitespace().collect();
            if let Some(rest) = line.strip_prefix('[') {
                let inner = rest.trim_end_matches(']');
                let (name, idx) = inner
                    .split_once(' ')
                    .ok_or_else(|| parse_err(n + 1, "bad section header"))?;
                let idx = idx.parse().map_err(|_| parse_err(n + 1, "bad section index"))?;
                sections.push((name.to_string(), idx, String::new()));
            } else if f.first() == Some(&"#") && sections.is_empty() {
                match f.get(1).copied() {
                    Some("normal_form") if f.len() == 6 => {
                        r = f[3].parse().ok();
                        bound = f[5].parse().ok();
                    }
                    Some("omega") if f.len() == 4 => {
                        omega = f[2].parse().ok().zip(f[3].parse().ok()).map(|(a, b)| [a, b]);
                    }
                    Some("min_divisor") if f.len() == 5 => {
                        let k0 = f[2].parse().map_err(|_| parse_err(n + 1, "bad divisor"))?;
                        let k1 = f[3].parse().map_err(|_| parse_err(n + 1, "bad divisor"))?;
                        let v = f[4].parse().map_err(|_| parse_err(n + 1, "bad divisor"))?;
                        min_divisor = Some(SmallDivisor { k: [k0, k1], value: v });
                    }
                    _ => return Err(parse_err(n + 1, "unknown header")),
                }
            } else if let Some(sec) = sections.last_mut() {
                sec.2.push_str(line);
                sec.2.push('\n');
            } else if !line.trim().is_empty() {
                return Err(parse_err(n + 1, "content before first section"));
            }
        }
        let r: usize = r.ok_or_else(|| parse_err(0, "missing normal_form header"))?;
        let bound: u32 = bound.ok_or_else(|| parse_err(0, "missing bound"))?;
        let omega = omega.ok_or_else(|| parse_err(0, "missing omega"))?;
        let mut z = Vec::new();
        let mut generators = Vec::new();
        let mut remainder = BTreeMap::new();
        for (name, idx, body) in sections {
            let series = PoissonSeries::from_text(&body)?;
            match name.as_str() {
                "Z" if idx == z.len() => z.push(series),
                "chi" if idx == generators.len() + 1 => generators.push(series),
                "R" => {
                    remainder.insert(idx, series);
                }
                _ => return Err(parse_err(0, &format!("unexpected section [{name} {idx}]"))),
            }
        }
        if z.len() != r + 1 || generators.len() != r {
            return Err(parse_err(0, "section count does not match r"));
        }
        Ok(NormalForm {
            r,
            bound,
            omega,
            z,
            generators,
            remainder,
            min_divisor,
        })
    }
}
