//! End-to-end runs: Hamiltonian, Cassini state, normal forms, stability.

use crate::birkhoff::{block_degree, normalize, NormalForm, NormalizeOptions};
use crate::cassini::{expand_at_cassini_state, Expansion};
use crate::eccentricity::MAX_ECC_ORDER;
use crate::error::Result;
use crate::hamiltonian::AveragedHamiltonian;
use crate::params::PhysicalParams;
use crate::stability::{domain_radii, RemainderProfile, DEFAULT_LIBRATION_BOUND};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PipelineOptions {
    pub ecc_order: u32,
    pub libration_bound: f64,
    pub normalize: NormalizeOptions,
    /// Fixed domain radii; `None` derives them from the run's own untangled form.
    pub radii: Option<[f64; 2]>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            ecc_order: MAX_ECC_ORDER,
            libration_bound: DEFAULT_LIBRATION_BOUND,
            normalize: NormalizeOptions::default(),
            radii: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Run {
    pub hamiltonian: AveragedHamiltonian,
    pub expansion: Expansion,
    pub radii: [f64; 2],
    pub normal_forms: Vec<NormalForm>,
    pub profiles: Vec<RemainderProfile>,
}

/// Expands about Cassini state 1 deep enough for the largest order in `orders`.
pub fn expand(params: PhysicalParams, max_order: usize, opts: &PipelineOptions) -> Result<(AveragedHamiltonian, Expansion)> {
    let h = AveragedHamiltonian::new(params, opts.ecc_order)?;
    let bound = block_degree(max_order + opts.normalize.extra_orders);
    let ex = expand_at_cassini_state(&h, bound)?;
    Ok((h, ex))
}

/// Normalizes at every order in `orders` and builds the remainder profiles.
pub fn run(params: PhysicalParams, orders: &[usize], opts: &PipelineOptions) -> Result<Run> {
    let max_order = orders.iter().copied().max().unwrap_or(0);
    let (h, ex) = expand(params, max_order, opts)?;
    let radii = opts.radii.unwrap_or_else(|| domain_radii(&ex.form, opts.libration_bound));
    let mut normal_forms = Vec::with_capacity(orders.len());
    let mut profiles = Vec::with_capacity(orders.len());
    for &r in orders {
        let nf = normalize(&ex.series, ex.form.omega, r, opts.normalize)?;
        profiles.push(RemainderProfile::new(&nf, radii, params.n)?);
        normal_forms.push(nf);
    }
    Ok(Run {
        hamiltonian: h,
        expansion: ex,
        radii,
        normal_forms,
        profiles,
    })
}

/// Domain radii of the untangled form at `params`.
pub fn radii_at(params: PhysicalParams, opts: &PipelineOptions) -> Result<[f64; 2]> {
    let (_, ex) = expand(params, 0, opts)?;
    Ok(domain_radii(&ex.form, opts.libration_bound))
}
