//! Physical parameters of the spin–orbit model.
//!
//! Rates are in rad/day and lengths in km. The shipped Mercury set lives in
//! `data/table1.params` and is also available as [`PhysicalParams::mercury`].

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DAYS_PER_YEAR: f64 = 365.25;
pub const ARCMIN_PER_RAD: f64 = 180.0 * 60.0 / std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Solar mass (kg).
    pub m0: f64,
    /// Planet mass (kg).
    pub m: f64,
    /// Equatorial radius (km).
    pub re: f64,
    pub j2: f64,
    pub c22: f64,
    /// Polar moment of inertia normalized by `m Re^2`.
    pub c: f64,
    /// Semi-major axis (km).
    pub a: f64,
    pub e: f64,
    /// Inclination to the Laplace plane (rad).
    pub i: f64,
    /// Perihelion precession rate (rad/day).
    pub omega_dot: f64,
    /// Node regression rate (rad/day, negative).
    pub node_dot: f64,
    /// Mean motion (rad/day).
    pub n: f64,
}

/// Names accepted in parameter files, in file order.
pub const KEYS: [&str; 12] = [
    "m0", "m", "Re", "J2", "C22", "c", "a", "e", "i", "omega_dot", "Omega_dot", "n",
];

/// The parameters that sweeps may vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepParam {
    C,
    OmegaDot,
    NodeDot,
    E,
    I,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::C => "c",
            SweepParam::OmegaDot => "omega_dot",
            SweepParam::NodeDot => "Omega_dot",
            SweepParam::E => "e",
            SweepParam::I => "i",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "c" => Some(SweepParam::C),
            "omega_dot" => Some(SweepParam::OmegaDot),
            "Omega_dot" => Some(SweepParam::NodeDot),
            "e" => Some(SweepParam::E),
            "i" => Some(SweepParam::I),
            _ => None,
        }
    }

    pub fn get(self, p: &PhysicalParams) -> f64 {
        match self {
            SweepParam::C => p.c,
            SweepParam::OmegaDot => p.omega_dot,
            SweepParam::NodeDot => p.node_dot,
            SweepParam::E => p.e,
            SweepParam::I => p.i,
        }
    }

    pub fn set(self, p: &mut PhysicalParams, value: f64) {
        match self {
            SweepParam::C => p.c = value,
            SweepParam::OmegaDot => p.omega_dot = value,
            SweepParam::NodeDot => p.node_dot = value,
            SweepParam::E => p.e = value,
            SweepParam::I => p.i = value,
        }
    }
}

impl PhysicalParams {
    /// Mercury reference values. Rates are per day.
    pub fn mercury() -> Self {
        PhysicalParams {
            m0: 1.98843e30,
            m: 3.30104e23,
            re: 2439.7,
            j2: 5.031e-5,
            c22: 8.088e-6,
            c: 3.49e-1,
            a: 5.79091e7,
            e: 2.05630e-1,
            i: 1.50098e-1,
            omega_dot: 1.34118e-7,
            node_dot: -5.23390e-8,
            n: 7.1229e-2,
        }
    }

    pub fn c20(&self) -> f64 {
        -self.j2
    }

    /// Polar moment of inertia `C = c m Re^2` (kg km^2).
    pub fn polar_moment(&self) -> f64 {
        self.c * self.m * self.re * self.re
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        let positive = [
            ("m0", self.m0),
            ("m", self.m),
            ("Re", self.re),
            ("a", self.a),
            ("n", self.n),
            ("J2", self.j2),
            ("C22", self.c22),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.e) {
            return bad(format!("e must lie in [0, 1), got {}", self.e));
        }
        if !(self.i > 0.0 && self.i < std::f64::consts::FRAC_PI_2) {
            return bad(format!("i must lie in (0, pi/2), got {}", self.i));
        }
        if !(self.c > 0.0 && self.c <= 2.0 / 3.0) {
            return bad(format!("c must lie in (0, 2/3], got {}", self.c));
        }
        if !self.omega_dot.is_finite() || !self.node_dot.is_finite() {
            return bad("precession rates must be finite".into());
        }
        Ok(())
    }

    /// Parses `key = value` lines (`#` starts a comment). Every key in [`KEYS`] is required.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values: [Option<f64>; 12] = [None; 12];
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Parse {
                    line: n + 1,
                    msg: "expected key = value".into(),
                })?;
            let slot = KEYS.iter().position(|k| *k == key).ok_or_else(|| Error::Parse {
                line: n + 1,
                msg: format!("unknown key {key:?}"),
            })?;
            let v: f64 = value.parse().map_err(|_| Error::Parse {
                line: n + 1,
                msg: format!("bad number {value:?} for {key}"),
            })?;
            values[slot] = Some(v);
        }
        let missing: Vec<&str> = KEYS
            .iter()
            .zip(values.iter())
            .filter(|(_, v)| v.is_none())
            .map(|(k, _)| *k)
            .collect();
        if !missing.is_empty() {
            return Err(Error::Parse {
                line: 0,
                msg: format!("missing keys: {}", missing.join(", ")),
            });
        }
        let v = |i: usize| values[i].unwrap();
        let p = PhysicalParams {
            m0: v(0),
            m: v(1),
            re: v(2),
            j2: v(3),
            c22: v(4),
            c: v(5),
            a: v(6),
            e: v(7),
            i: v(8),
            omega_dot: v(9),
            node_dot: v(10),
            n: v(11),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let vals = [
            self.m0,
            self.m,
            self.re,
            self.j2,
            self.c22,
            self.c,
            self.a,
            self.e,
            self.i,
            self.omega_dot,
            self.node_dot,
            self.n,
        ];
        let mut out = String::new();
        for (k, v) in KEYS.iter().zip(vals) {
            let _ = writeln!(out, "{k} = {v:e}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_fixture_matches_builtin() {
        let text = include_str!("../data/table1.params");
        assert_eq!(PhysicalParams::parse(text).unwrap(), PhysicalParams::mercury());
    }

    #[test]
    fn text_round_trip() {
        let p = PhysicalParams::mercury();
        assert_eq!(PhysicalParams::parse(&p.to_text()).unwrap(), p);
    }

    #[test]
    fn rejects_missing_and_unknown_keys() {
        assert!(PhysicalParams::parse("m0 = 1").is_err());
        let mut text = PhysicalParams::mercury().to_text();
        text.push_str("bogus = 3\n");
        assert!(matches!(PhysicalParams::parse(&text), Err(Error::Parse { .. })));
    }

    #[test]
    fn validation_catches_bad_ranges() {
        let mut p = PhysicalParams::mercury();
        p.e = 1.0;
        assert!(p.validate().is_err());
        let mut p = PhysicalParams::mercury();
        p.c = 0.7;
        assert!(p.validate().is_err());
    }

    #[test]
    fn rates_are_per_day() {
        // an 88 day orbital period
        let p = PhysicalParams::mercury();
        let period = 2.0 * std::f64::consts::PI / p.n;
        assert!((period / 88.0 - 1.0).abs() < 0.005);
        // perihelion precession period ~128 kyr
        let prec = 2.0 * std::f64::consts::PI / p.omega_dot / DAYS_PER_YEAR;
        assert!((prec / 1.28e5 - 1.0).abs() < 0.01);
    }
}
