use std::path::Path;

use clap::{Args, Parser, ValueEnum};
use serde::Deserialize;

use spinorbit::birkhoff::{DEFAULT_DIVISOR_FLOOR, DEFAULT_EXTRA_ORDERS};
use spinorbit::eccentricity::MAX_ECC_ORDER;
use spinorbit::stability::DEFAULT_LIBRATION_BOUND;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Hamiltonian,
    Equilibrium,
    Normalform,
    Stability,
    Sweep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadiiChoice {
    /// One polydisk for the whole grid, from the base parameters.
    Base,
    /// Each cell uses its own polydisk.
    Cell,
}

#[derive(Debug, Parser)]
#[command(name = "spinorbit", version, about = "Effective stability of the 3:2 spin-orbit resonance")]
pub struct Cli {
    /// Pipeline stage to run; earlier stages run automatically.
    pub stage: Stage,
    #[command(flatten)]
    pub flags: Flags,
}

/// Every flag is optional so that a config file can supply it.
#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Flags {
    /// TOML file with any of the flags below (flags win).
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<String>,
    /// `table1` or a path to a params file.
    #[arg(long)]
    pub params: Option<String>,
    /// Normalization orders, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub r: Option<Vec<usize>>,
    /// Extra orders kept beyond r for the remainder tail.
    #[arg(long)]
    pub k: Option<usize>,
    /// rho0 grid as start:stop:step.
    #[arg(long)]
    pub rho0: Option<String>,
    /// Libration amplitude (rad) reached at rho = 1.
    #[arg(long)]
    pub libration_bound: Option<f64>,
    /// Sweep pair `x-y` (e.g. `Omega_dot-i`) or `all`.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Polydisk used by the sweep cells.
    #[arg(long, value_enum)]
    pub sweep_radii: Option<RadiiChoice>,
    /// Output path prefix.
    #[arg(long)]
    pub out: Option<String>,
    /// Smallest admissible |k.omega| relative to |omega|.
    #[arg(long)]
    pub divisor_floor: Option<f64>,
    /// Truncation order of the eccentricity functions.
    #[arg(long)]
    pub ecc_order: Option<u32>,
    /// Also write the action-angle series (and normal-form series).
    #[arg(long)]
    #[serde(default)]
    pub dump_series: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub stage: Stage,
    pub params: String,
    pub r: Vec<usize>,
    pub k: usize,
    pub rho0: String,
    pub libration_bound: f64,
    pub sweep: String,
    pub sweep_radii: RadiiChoice,
    pub out: String,
    pub divisor_floor: f64,
    pub ecc_order: u32,
    pub dump_series: bool,
}

pub const MAX_ORDER: usize = 60;

impl RunConfig {
    pub fn resolve(stage: Stage, flags: Flags) -> Result<Self, String> {
        let file = match &flags.config {
            Some(path) => load_config(Path::new(path))?,
            None => Flags::default(),
        };
        let default_r = if stage == Stage::Stability { vec![10, 20, 30] } else { vec![10] };
        let cfg = RunConfig {
            stage,
            params: flags.params.or(file.params).unwrap_or_else(|| "table1".into()),
            r: flags.r.or(file.r).unwrap_or(default_r),
            k: flags.k.or(file.k).unwrap_or(DEFAULT_EXTRA_ORDERS),
            rho0: flags.rho0.or(file.rho0).unwrap_or_else(|| "0:5:0.1".into()),
            libration_bound: flags
                .libration_bound
                .or(file.libration_bound)
                .unwrap_or(DEFAULT_LIBRATION_BOUND),
            sweep: flags.sweep.or(file.sweep).unwrap_or_else(|| "all".into()),
            sweep_radii: flags.sweep_radii.or(file.sweep_radii).unwrap_or(RadiiChoice::Base),
            out: flags.out.or(file.out).unwrap_or_default(),
            divisor_floor: flags.divisor_floor.or(file.divisor_floor).unwrap_or(DEFAULT_DIVISOR_FLOOR),
            ecc_order: flags.ecc_order.or(file.ecc_order).unwrap_or(MAX_ECC_ORDER),
            dump_series: flags.dump_series || file.dump_series,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        if self.r.is_empty() || self.r.iter().any(|&r| r == 0 || r > MAX_ORDER) {
            return Err(format!("--r values must lie in 1..={MAX_ORDER}"));
        }
        if self.stage == Stage::Sweep && self.r.len() != 1 {
            return Err("a sweep takes a single order --r".into());
        }
        if !(2..=12).contains(&self.k) {
            return Err("--k must lie in 2..=12".into());
        }
        if !(self.libration_bound > 0.0 && self.libration_bound <= 1.0) {
            return Err("--libration-bound must lie in (0, 1]".into());
        }
        if !(self.divisor_floor > 0.0 && self.divisor_floor < 1.0) {
            return Err("--divisor-floor must lie in (0, 1)".into());
        }
        if self.ecc_order > MAX_ECC_ORDER {
            return Err(format!("--ecc-order must not exceed {MAX_ECC_ORDER}"));
        }
        Ok(())
    }
}

fn load_config(path: &Path) -> Result<Flags, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))
}
