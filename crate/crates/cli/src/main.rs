mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;

use config::{Cli, RadiiChoice, RunConfig, Stage};
use spinorbit::birkhoff::NormalizeOptions;
use spinorbit::cassini::{expand_at_cassini_state, find_equilibrium};
use spinorbit::hamiltonian::{obliquity_implicit, AveragedHamiltonian};
use spinorbit::params::{PhysicalParams, ARCMIN_PER_RAD};
use spinorbit::pipeline::{self, PipelineOptions};
use spinorbit::stability::{curve_to_text, effective_time, parse_range, stability_curve};
use spinorbit::sweep::{export_contours, run_grid, RadiiMode, SweepPlan, STANDARD_PAIRS};
use spinorbit::Error;

struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            kind: "usage",
            message: message.into(),
        }
    }

    fn compute(e: Error) -> Self {
        let kind = match &e {
            Error::Io(_) => "io",
            Error::NoEquilibrium { .. } | Error::EquilibriumNotFound { .. } | Error::DegenerateEquilibrium { .. } => {
                "equilibrium"
            }
            Error::NotElliptic(_) | Error::ResonantQuadratic(..) => "untangling",
            Error::ResonantDivisor { .. } | Error::TermBudget { .. } | Error::NegativePower { .. } => "normal_form",
            Error::OutsideConvergence { .. } | Error::NoEstimate { .. } => "stability",
            Error::SweepFailed { .. } => "sweep",
            _ => "computation",
        };
        Failure {
            code: 1,
            kind,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report(Failure::usage(e.to_string().trim_end())),
    };
    if let Some(n) = std::env::var("SPINORBIT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let outcome = RunConfig::resolve(cli.stage, cli.flags)
        .map_err(Failure::usage)
        .and_then(|cfg| run(&cfg));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f),
    }
}

fn report(f: Failure) -> ExitCode {
    let json = serde_json::json!({ "error": { "kind": f.kind, "message": f.message, "exit_code": f.code } });
    eprintln!("{json}");
    ExitCode::from(f.code)
}

fn load_params(spec: &str) -> Result<PhysicalParams, Failure> {
    if spec == "table1" {
        return Ok(PhysicalParams::mercury());
    }
    PhysicalParams::load(Path::new(spec)).map_err(|e| Failure::usage(format!("params {spec}: {e}")))
}

fn options(cfg: &RunConfig) -> PipelineOptions {
    PipelineOptions {
        ecc_order: cfg.ecc_order,
        libration_bound: cfg.libration_bound,
        normalize: NormalizeOptions {
            extra_orders: cfg.k,
            divisor_floor: cfg.divisor_floor,
            ..NormalizeOptions::default()
        },
        radii: None,
    }
}

fn output(cfg: &RunConfig, name: &str) -> Result<PathBuf, Failure> {
    let path = PathBuf::from(format!("{}{name}", cfg.out));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::compute(e.into()))?;
    }
    Ok(path)
}

fn write(cfg: &RunConfig, name: &str, text: &str) -> Result<(), Failure> {
    let path = output(cfg, name)?;
    std::fs::write(&path, text).map_err(|e| Failure::compute(e.into()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cfg: &RunConfig) -> Result<(), Failure> {
    let params = load_params(&cfg.params)?;
    let opts = options(cfg);
    match cfg.stage {
        Stage::Hamiltonian => hamiltonian_stage(cfg, params, &opts),
        Stage::Equilibrium => equilibrium_stage(cfg, params, &opts),
        Stage::Normalform => normalform_stage(cfg, params, &opts),
        Stage::Stability => stability_stage(cfg, params, &opts),
        Stage::Sweep => sweep_stage(cfg, params, &opts),
    }
}

fn hamiltonian_stage(cfg: &RunConfig, params: PhysicalParams, opts: &PipelineOptions) -> Result<(), Failure> {
    let h = AveragedHamiltonian::new(params, opts.ecc_order).map_err(Failure::compute)?;
    let eps = obliquity_implicit(&params).map_err(Failure::compute)?;
    let mut s = String::new();
    let _ = writeln!(s, "ecc_order = {}", h.ecc_order());
    let _ = writeln!(s, "H20 = {:.17e}", h.h20());
    let _ = writeln!(s, "H22 = {:.17e}", h.h22());
    let _ = writeln!(s, "C20 = {:.17e}", params.c20());
    let _ = writeln!(s, "eps_implicit = {eps:.17e}");
    let _ = writeln!(s, "eps_implicit_arcmin = {:.12}", eps * ARCMIN_PER_RAD);
    print!("{s}");
    write(cfg, "hamiltonian.txt", &s)?;
    if cfg.dump_series {
        let bound = spinorbit::birkhoff::block_degree(cfg.r[0] + cfg.k);
        let ex = expand_at_cassini_state(&h, bound).map_err(Failure::compute)?;
        write(cfg, "hamiltonian_series.txt", &ex.series.to_text())?;
    }
    Ok(())
}

fn equilibrium_stage(cfg: &RunConfig, params: PhysicalParams, opts: &PipelineOptions) -> Result<(), Failure> {
    let h = AveragedHamiltonian::new(params, opts.ecc_order).map_err(Failure::compute)?;
    let state = find_equilibrium(&h).map_err(Failure::compute)?;
    let ex = expand_at_cassini_state(&h, 4).map_err(Failure::compute)?;
    let implicit = obliquity_implicit(&params).map_err(Failure::compute)?;
    let mut s = state.to_text();
    let _ = writeln!(s, "eps_implicit_arcmin = {:.12}", implicit * ARCMIN_PER_RAD);
    s.push_str(&ex.form.to_text());
    print!("{s}");
    write(cfg, "equilibrium.txt", &s)
}

fn normalform_stage(cfg: &RunConfig, params: PhysicalParams, opts: &PipelineOptions) -> Result<(), Failure> {
    let run = pipeline::run(params, &cfg.r, opts).map_err(Failure::compute)?;
    if cfg.dump_series {
        write(cfg, "hamiltonian_series.txt", &run.expansion.series.to_text())?;
    }
    for (nf, prof) in run.normal_forms.iter().zip(&run.profiles) {
        let mut line = format!("r = {}: {} terms in Z", nf.r, nf.z_total().len());
        if let Some(d) = nf.min_divisor {
            let _ = write!(line, ", smallest divisor {:e} at k = ({}, {})", d.value, d.k[0], d.k[1]);
        }
        let _ = write!(line, ", |{{U, R}}| = [{:e}, {:e}]", prof.norms[0][0], prof.norms[1][0]);
        println!("{line}");
        write(cfg, &format!("normal_form_r{}.txt", nf.r), &nf.to_text())?;
    }
    Ok(())
}

fn stability_stage(cfg: &RunConfig, params: PhysicalParams, opts: &PipelineOptions) -> Result<(), Failure> {
    let grid = parse_range(&cfg.rho0).map_err(|e| Failure::usage(e.to_string()))?;
    let run = pipeline::run(params, &cfg.r, opts).map_err(Failure::compute)?;
    for prof in &run.profiles {
        let curve = stability_curve(prof, &grid);
        write(cfg, &format!("stability_r{}.dat", prof.r), &curve_to_text(prof.r, &curve))?;
    }
    let reports: Vec<_> = grid
        .iter()
        .filter_map(|&rho0| effective_time(rho0, &run.profiles).ok())
        .collect();
    for rep in reports.iter().filter(|r| r.rho0 == 1.0) {
        println!(
            "rho0 = 1: log10 T = {:.3} (r = {}, rho = {:.4}, d = {:.4})",
            rep.log10_t(),
            rep.best_r,
            rep.best_rho,
            rep.d
        );
    }
    let json = serde_json::to_string_pretty(&reports).map_err(|e| Failure::compute(Error::Config(e.to_string())))?;
    write(cfg, "stability_report.json", &(json + "\n"))
}

fn sweep_stage(cfg: &RunConfig, params: PhysicalParams, opts: &PipelineOptions) -> Result<(), Failure> {
    let plans: Vec<SweepPlan> = if cfg.sweep == "all" {
        STANDARD_PAIRS
            .iter()
            .map(|&(x, y)| SweepPlan::new(x, y, params))
            .collect::<Result<_, _>>()
    } else {
        SweepPlan::from_spec(&cfg.sweep, params).map(|p| vec![p])
    }
    .map_err(|e| Failure::usage(e.to_string()))?;
    for mut plan in plans {
        plan.r = cfg.r[0];
        plan.options = *opts;
        plan.radii = match cfg.sweep_radii {
            RadiiChoice::Base => RadiiMode::Base,
            RadiiChoice::Cell => RadiiMode::PerCell,
        };
        let result = run_grid(&plan).map_err(Failure::compute)?;
        let s = &result.summary;
        println!(
            "{}: eps {:.2}'..{:.2}', log10 T {:.2}..{:.2}, {} failed, {} degenerate",
            plan.name(),
            s.eps_min,
            s.eps_max,
            s.log10_t_min,
            s.log10_t_max,
            s.failed_cells,
            s.degenerate_cells
        );
        let prefix = output(cfg, "")?;
        for path in export_contours(&result, &prefix.to_string_lossy()).map_err(Failure::compute)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}
