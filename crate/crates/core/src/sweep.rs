//! Two-parameter sweeps of stability time and equilibrium obliquity.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::cassini::{find_equilibrium, taylor_expand, untangle};
use crate::error::{Error, Result};
use crate::hamiltonian::{obliquity_implicit, AveragedHamiltonian};
use crate::params::{PhysicalParams, SweepParam, ARCMIN_PER_RAD};
use crate::pipeline::{radii_at, run, PipelineOptions};
use crate::stability::effective_time;

pub const GRID_POINTS: usize = 11;
pub const DEFAULT_SWEEP_ORDER: usize = 10;
pub const OBSERVED_OBLIQUITY_ARCMIN: f64 = 2.06;

/// Default range of each sweepable parameter.
pub fn default_range(p: SweepParam) -> (f64, f64) {
    match p {
        SweepParam::C => (0.3, 0.4),
        SweepParam::OmegaDot => (1e-7, 2e-7),
        SweepParam::NodeDot => (-9e-8, -4e-8),
        SweepParam::E => (0.0, 0.4),
        SweepParam::I => (0.05, 0.2),
    }
}

/// The ten `(x, y)` pairs of the standard study.
pub const STANDARD_PAIRS: [(SweepParam, SweepParam); 10] = [
    (SweepParam::NodeDot, SweepParam::I),
    (SweepParam::E, SweepParam::I),
    (SweepParam::C, SweepParam::I),
    (SweepParam::OmegaDot, SweepParam::I),
    (SweepParam::C, SweepParam::NodeDot),
    (SweepParam::C, SweepParam::OmegaDot),
    (SweepParam::NodeDot, SweepParam::OmegaDot),
    (SweepParam::C, SweepParam::E),
    (SweepParam::NodeDot, SweepParam::E),
    (SweepParam::OmegaDot, SweepParam::E),
];

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPlan {
    pub x: SweepParam,
    pub y: SweepParam,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub points: usize,
    pub base: PhysicalParams,
    pub r: usize,
    pub rho0: f64,
    pub options: PipelineOptions,
    pub radii: RadiiMode,
}

/// Where the polydisk radii of each cell come from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RadiiMode {
    /// One polydisk for the whole grid, taken from the base parameters.
    Base,
    /// Each cell uses the radii of its own untangled form.
    PerCell,
}

impl SweepPlan {
    pub fn new(x: SweepParam, y: SweepParam, base: PhysicalParams) -> Result<Self> {
        if x == y {
            return Err(Error::Config("a sweep needs two distinct parameters".into()));
        }
        Ok(SweepPlan {
            x,
            y,
            x_range: default_range(x),
            y_range: default_range(y),
            points: GRID_POINTS,
            base,
            r: DEFAULT_SWEEP_ORDER,
            rho0: 1.0,
            options: PipelineOptions::default(),
            radii: RadiiMode::Base,
        })
    }

    /// Parses `x-y`, e.g. `Omega_dot-i`.
    pub fn from_spec(spec: &str, base: PhysicalParams) -> Result<Self> {
        let (a, b) = spec
            .split_once('-')
            .ok_or_else(|| Error::Config(format!("sweep {spec:?} is not x-y")))?;
        let p = |s: &str| {
            SweepParam::from_name(s).ok_or_else(|| Error::Config(format!("unknown sweep parameter {s:?}")))
        };
        Self::new(p(a)?, p(b)?, base)
    }

    pub fn name(&self) -> String {
        format!("{}-{}", self.x.name(), self.y.name())
    }

    fn axis(range: (f64, f64), n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![range.0];
        }
        (0..n)
            .map(|k| range.0 + (range.1 - range.0) * k as f64 / (n - 1) as f64)
            .collect()
    }

    pub fn x_values(&self) -> Vec<f64> {
        Self::axis(self.x_range, self.points)
    }

    pub fn y_values(&self) -> Vec<f64> {
        Self::axis(self.y_range, self.points)
    }

    pub fn params_at(&self, x: f64, y: f64) -> PhysicalParams {
        let mut p = self.base;
        self.x.set(&mut p, x);
        self.y.set(&mut p, y);
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CellFlag {
    Ok,
    /// Zero eccentricity: no longitudinal restoring torque, so no time estimate.
    Degenerate,
    Failed,
}

impl CellFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            CellFlag::Ok => "ok",
            CellFlag::Degenerate => "degenerate",
            CellFlag::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ok" => Some(CellFlag::Ok),
            "degenerate" => Some(CellFlag::Degenerate),
            "failed" => Some(CellFlag::Failed),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cell {
    pub x: f64,
    pub y: f64,
    pub log10_t: f64,
    pub eps_arcmin: f64,
    pub flag: CellFlag,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsoPoint {
    pub x: f64,
    pub y: f64,
    /// `|eps(x, y) - level| / level` from the closed-form relation.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsoCurve {
    pub level_arcmin: f64,
    /// Line segments from marching squares; consecutive pairs of points.
    pub segments: Vec<[IsoPoint; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub eps_min: f64,
    pub eps_max: f64,
    pub log10_t_min: f64,
    pub log10_t_max: f64,
    pub failed_cells: usize,
    pub degenerate_cells: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub x_name: String,
    pub y_name: String,
    pub nx: usize,
    pub ny: usize,
    pub r: usize,
    pub rho0: f64,
    /// Row-major: `cells[iy * nx + ix]`.
    pub cells: Vec<Cell>,
    pub iso: Vec<IsoCurve>,
    pub summary: Summary,
}

impl SweepResult {
    pub fn cell(&self, ix: usize, iy: usize) -> &Cell {
        &self.cells[iy * self.nx + ix]
    }
}

fn run_cell(plan: &SweepPlan, opts: &PipelineOptions, x: f64, y: f64) -> Cell {
    let params = plan.params_at(x, y);
    let mut cell = Cell {
        x,
        y,
        log10_t: f64::NAN,
        eps_arcmin: f64::NAN,
        flag: CellFlag::Failed,
        error: None,
    };
    let eq = AveragedHamiltonian::new(params, plan.options.ecc_order).and_then(|h| find_equilibrium(&h).map(|e| (h, e)));
    let (h, eq) = match eq {
        Ok(v) => v,
        Err(e) => {
            cell.error = Some(e.to_string());
            return cell;
        }
    };
    cell.eps_arcmin = eq.eps_star * ARCMIN_PER_RAD;
    if params.e == 0.0 {
        cell.flag = CellFlag::Degenerate;
        // the untangling must fail here: the longitudinal stiffness vanishes
        if let Ok(q) = taylor_expand(&h, &eq, 0) {
            if let Err(e) = untangle(q.hessian(), params.n) {
                cell.error = Some(e.to_string());
            }
        }
        return cell;
    }
    let time = run(params, &[plan.r], opts).and_then(|run| effective_time(plan.rho0, &run.profiles));
    match time {
        Ok(rep) => {
            cell.log10_t = rep.log10_t();
            cell.flag = CellFlag::Ok;
        }
        Err(e) => cell.error = Some(e.to_string()),
    }
    cell
}

/// Runs every cell (in parallel) and assembles the result in row-major order.
pub fn run_grid(plan: &SweepPlan) -> Result<SweepResult> {
    if plan.points < 2 {
        return Err(Error::Config("a sweep axis needs at least two points".into()));
    }
    let xs = plan.x_values();
    let ys = plan.y_values();
    let coords: Vec<(f64, f64)> = ys.iter().flat_map(|&y| xs.iter().map(move |&x| (x, y))).collect();
    let mut opts = plan.options;
    if plan.radii == RadiiMode::Base && opts.radii.is_none() {
        opts.radii = Some(radii_at(plan.base, &opts)?);
    }
    let cells: Vec<Cell> = coords.par_iter().map(|&(x, y)| run_cell(plan, &opts, x, y)).collect();
    let failed = cells.iter().filter(|c| c.flag == CellFlag::Failed).count();
    if failed == cells.len() {
        return Err(Error::SweepFailed { cells: failed });
    }
    let mut result = SweepResult {
        x_name: plan.x.name().into(),
        y_name: plan.y.name().into(),
        nx: xs.len(),
        ny: ys.len(),
        r: plan.r,
        rho0: plan.rho0,
        summary: summarize(&cells),
        cells,
        iso: Vec::new(),
    };
    result.iso = iso_obliquity_curves(plan, &result, OBSERVED_OBLIQUITY_ARCMIN, 0.05);
    Ok(result)
}

fn summarize(cells: &[Cell]) -> Summary {
    let (mut emin, mut emax, mut tmin, mut tmax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for c in cells.iter().filter(|c| c.flag != CellFlag::Failed) {
        if c.eps_arcmin.is_finite() {
            emin = emin.min(c.eps_arcmin);
            emax = emax.max(c.eps_arcmin);
        }
        if c.log10_t.is_finite() {
            tmin = tmin.min(c.log10_t);
            tmax = tmax.max(c.log10_t);
        }
    }
    Summary {
        eps_min: emin,
        eps_max: emax,
        log10_t_min: tmin,
        log10_t_max: tmax,
        failed_cells: cells.iter().filter(|c| c.flag == CellFlag::Failed).count(),
        degenerate_cells: cells.iter().filter(|c| c.flag == CellFlag::Degenerate).count(),
    }
}

/// Marching-squares contour of a row-major grid at `level`.
pub fn contour(xs: &[f64], ys: &[f64], values: &[f64], level: f64) -> Vec<[(f64, f64); 2]> {
    let nx = xs.len();
    let v = |ix: usize, iy: usize| values[iy * nx + ix];
    let mut out = Vec::new();
    for iy in 0..ys.len().saturating_sub(1) {
        for ix in 0..nx.saturating_sub(1) {
            // corners counter-clockwise from (ix, iy)
            let corners = [
                (xs[ix], ys[iy], v(ix, iy)),
                (xs[ix + 1], ys[iy], v(ix + 1, iy)),
                (xs[ix + 1], ys[iy + 1], v(ix + 1, iy + 1)),
                (xs[ix], ys[iy + 1], v(ix, iy + 1)),
            ];
            if corners.iter().any(|c| !c.2.is_finite()) {
                continue;
            }
            let mut crossings = Vec::with_capacity(4);
            for e in 0..4 {
                let (a, b) = (corners[e], corners[(e + 1) % 4]);
                let (da, db) = (a.2 - level, b.2 - level);
                if (da < 0.0) != (db < 0.0) {
                    let t = da / (da - db);
                    crossings.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
                }
            }
            match crossings.len() {
                2 => out.push([crossings[0], crossings[1]]),
                4 => {
                    // saddle: resolve with the cell-centre average
                    let centre = corners.iter().map(|c| c.2).sum::<f64>() / 4.0;
                    let first_above = corners[0].2 >= level;
                    if (centre >= level) == first_above {
                        out.push([crossings[0], crossings[3]]);
                        out.push([crossings[1], crossings[2]]);
                    } else {
                        out.push([crossings[0], crossings[1]]);
                        out.push([crossings[2], crossings[3]]);
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// Iso-obliquity curves at `target` and `target (1 +- band)`, each point
/// re-checked against the closed-form relation.
pub fn iso_obliquity_curves(plan: &SweepPlan, result: &SweepResult, target: f64, band: f64) -> Vec<IsoCurve> {
    let xs = plan.x_values();
    let ys = plan.y_values();
    let eps: Vec<f64> = result.cells.iter().map(|c| c.eps_arcmin).collect();
    let mut levels = vec![target];
    if band > 0.0 {
        levels = vec![target * (1.0 - band), target, target * (1.0 + band)];
    }
    levels
        .into_iter()
        .map(|level| {
            let check = |(x, y): (f64, f64)| {
                let residual = obliquity_implicit(&plan.params_at(x, y))
                    .map(|e| (e * ARCMIN_PER_RAD - level).abs() / level)
                    .unwrap_or(f64::INFINITY);
                IsoPoint { x, y, residual }
            };
            let segments = contour(&xs, &ys, &eps, level)
                .into_iter()
                .map(|[a, b]| [check(a), check(b)])
                .collect();
            IsoCurve {
                level_arcmin: level,
                segments,
            }
        })
        .collect()
}

fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.17e}")
    }
}

fn parse_num(s: &str) -> Option<f64> {
    s.parse().ok()
}

pub fn grid_csv(result: &SweepResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{},{},log10_T_years,eps_arcmin,flag", result.x_name, result.y_name);
    for c in &result.cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_num(c.x),
            fmt_num(c.y),
            fmt_num(c.log10_t),
            fmt_num(c.eps_arcmin),
            c.flag.as_str()
        );
    }
    s
}

/// Parses [`grid_csv`] output back into cells (error messages are not stored).
pub fn read_grid_csv(text: &str) -> Result<Vec<Cell>> {
    let mut cells = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::Parse {
            line: n + 1,
            msg: "expected x,y,log10_T,eps,flag".into(),
        };
        if f.len() != 5 {
            return Err(bad());
        }
        cells.push(Cell {
            x: parse_num(f[0]).ok_or_else(bad)?,
            y: parse_num(f[1]).ok_or_else(bad)?,
            log10_t: parse_num(f[2]).ok_or_else(bad)?,
            eps_arcmin: parse_num(f[3]).ok_or_else(bad)?,
            flag: CellFlag::parse(f[4]).ok_or_else(bad)?,
            error: None,
        });
    }
    Ok(cells)
}

pub fn iso_csv(result: &SweepResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "level_arcmin,segment,{},{},residual", result.x_name, result.y_name);
    for curve in &result.iso {
        for (k, seg) in curve.segments.iter().enumerate() {
            for p in seg {
                let _ = writeln!(
                    s,
                    "{},{k},{},{},{}",
                    fmt_num(curve.level_arcmin),
                    fmt_num(p.x),
                    fmt_num(p.y),
                    fmt_num(p.residual)
                );
            }
        }
    }
    s
}

pub fn summary_json(result: &SweepResult) -> String {
    let value = serde_json::json!({
        "x": result.x_name,
        "y": result.y_name,
        "r": result.r,
        "rho0": result.rho0,
        "eps_min_arcmin": result.summary.eps_min,
        "eps_max_arcmin": result.summary.eps_max,
        "log10_T_min": finite_or_null(result.summary.log10_t_min),
        "log10_T_max": finite_or_null(result.summary.log10_t_max),
        "failed_cells": result.summary.failed_cells,
        "degenerate_cells": result.summary.degenerate_cells,
    });
    let mut s = serde_json::to_string_pretty(&value).expect("summary is serializable");
    s.push('\n');
    s
}

fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        serde_json::json!(x)
    } else {
        serde_json::Value::Null
    }
}

/// Writes `<prefix>sweep_<x>-<y>_{grid.csv,iso.csv,summary.json}`.
pub fn export_contours(result: &SweepResult, prefix: &str) -> Result<[PathBuf; 3]> {
    let stem = format!("{prefix}sweep_{}-{}", result.x_name, result.y_name);
    let paths = [
        PathBuf::from(format!("{stem}_grid.csv")),
        PathBuf::from(format!("{stem}_iso.csv")),
        PathBuf::from(format!("{stem}_summary.json")),
    ];
    if let Some(dir) = Path::new(&stem).parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    std::fs::write(&paths[0], grid_csv(result))?;
    std::fs::write(&paths[1], iso_csv(result))?;
    std::fs::write(&paths[2], summary_json(result))?;
    Ok(paths)
}
