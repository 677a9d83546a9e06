//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::PI;
use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use spinorbit::birkhoff::{apply_transforms, NormalForm};
use spinorbit::cassini::find_equilibrium;
use spinorbit::eccentricity::{ecc_h20, ecc_h22, hansen_quadrature};
use spinorbit::hamiltonian::{obliquity_implicit, AveragedHamiltonian};
use spinorbit::params::{PhysicalParams, SweepParam, ARCMIN_PER_RAD};
use spinorbit::pipeline::{run, PipelineOptions, Run};
use spinorbit::pseries::{Monomial, PoissonSeries, Trig};
use spinorbit::stability::{effective_time, stability_curve};
use spinorbit::sweep::{run_grid, SweepPlan, SweepResult, STANDARD_PAIRS};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn main() {
    let start = Instant::now();
    let mercury = PhysicalParams::mercury();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();

    results.push((1, "obliquity reproduction", obliquity(mercury)));
    results.push((2, "eccentricity functions", eccentricity()));

    let t = Instant::now();
    let pipeline = run(mercury, &[10, 20, 30], &PipelineOptions::default()).expect("reference pipeline");
    let pipeline_secs = t.elapsed().as_secs_f64();
    results.push((3, "normal-form structure (r = 20)", structure(&pipeline, pipeline_secs)));
    results.push((4, "frequency oracle", frequencies(&pipeline)));
    results.push((5, "stability curve shape", curve_shape(&pipeline)));
    results.push((6, "parameter sweeps (r = 10)", sweeps(mercury)));
    results.push((7, "algebra properties", algebra()));

    let mut failed = 0;
    for (n, name, o) in &results {
        println!("criterion {n} {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} of {} passed in {:.1} s", results.len() - failed, results.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn obliquity(p: PhysicalParams) -> Outcome {
    let t = Instant::now();
    let implicit = obliquity_implicit(&p).unwrap() * ARCMIN_PER_RAD;
    let h = AveragedHamiltonian::new(p, 8).unwrap();
    let state = find_equilibrium(&h).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let cassini = state.eps_star * ARCMIN_PER_RAD;
    let ok = |e: f64| (e - 2.06).abs() <= 0.16;
    outcome(
        ok(implicit) && ok(cassini) && secs < 1.0,
        format!("implicit {implicit:.4}', Cassini state {cassini:.4}', {secs:.3} s"),
    )
}

fn eccentricity() -> Outcome {
    let mut worst = 0.0f64;
    for e in [0.1f64, 0.2, 0.3] {
        let bound = 5.0 * e.powi(9);
        let d20 = (ecc_h20(e, 8).unwrap() + hansen_quadrature(0, 0, e).unwrap()).abs();
        let d22 = (ecc_h22(e, 8).unwrap() - hansen_quadrature(2, 3, e).unwrap()).abs();
        worst = worst.max(d20 / bound).max(d22 / bound);
    }
    // e = 1/2 makes every e^2k coefficient and partial sum exact in binary
    let e = 0.5f64;
    let mut exact = true;
    let mut binom = -1.0;
    for k in 0..=4u32 {
        let below = if k == 0 { 0.0 } else { ecc_h20(e, 2 * k - 2).unwrap() };
        let coeff = (ecc_h20(e, 2 * k).unwrap() - below) / e.powi(2 * k as i32);
        exact &= coeff == binom;
        // -(1 - x)^(-3/2): c_{k+1} = c_k (k + 3/2) / (k + 1)
        binom *= (k as f64 + 1.5) / (k as f64 + 1.0);
    }
    outcome(
        worst < 1.0 && exact,
        format!("max |quadrature difference| / 5e^9 = {worst:.3}, H20 coefficients binomial: {exact}"),
    )
}

fn cartesian(j: usize, sine: bool, bound: u32) -> PoissonSeries {
    let mut pow = [0, 0];
    pow[j] = 1;
    let mut k = [0, 0];
    k[j] = 1;
    let trig = if sine { Trig::Sin } else { Trig::Cos };
    PoissonSeries::monomial(pow, k, trig, 2f64.sqrt(), bound)
}

fn structure(run: &Run, secs: f64) -> Outcome {
    let nf: &NormalForm = &run.normal_forms[1];
    let r = nf.r;
    let radii = run.radii;
    let odd_zero = nf.z.iter().enumerate().filter(|(s, _)| s % 2 == 1).all(|(_, z)| z.is_empty());
    let even_free = nf.z.iter().all(|z| z.is_angle_free());

    // the Lie transforms preserve {x_j, y_k} = -delta_jk
    let b = nf.bound;
    let mapped: Vec<PoissonSeries> = [(0, false), (0, true), (1, false), (1, true)]
        .iter()
        .map(|&(j, s)| apply_transforms(&cartesian(j, s, b), &nf.generators, b).unwrap())
        .collect();
    let mut symplectic = 0.0f64;
    for a in 0..4 {
        for c in a + 1..4 {
            let expect = if c == a + 1 && a % 2 == 0 { -1.0 } else { 0.0 };
            let br = mapped[a].poisson_bracket(&mapped[c], b - 1).unwrap();
            let err = br.axpby(1.0, &PoissonSeries::constant(expect, b - 1), -1.0);
            symplectic = symplectic.max(err.weighted_norm(radii).unwrap());
        }
    }

    // exp(L_chi) H0 = Z_0 + ... + Z_r through block r
    let top = r as u32 + 2;
    let transformed = apply_transforms(&run.expansion.series, &nf.generators, nf.bound).unwrap();
    let diff = transformed.axpby(1.0, &nf.z_total(), -1.0).truncate(top);
    let res = diff.weighted_norms(radii).unwrap();
    let h0 = run.expansion.series.weighted_norms(radii).unwrap();
    let z = nf.z_total().weighted_norms(radii).unwrap();
    let mut identity = 0.0f64;
    for (deg, v) in res {
        let scale = h0.get(&deg).copied().unwrap_or(0.0).max(z.get(&deg).copied().unwrap_or(0.0));
        identity = identity.max(if scale > 0.0 { v / scale } else { v });
    }
    outcome(
        odd_zero && even_free && symplectic < 1e-10 && identity < 1e-10,
        format!(
            "odd Z zero: {odd_zero}, even Z angle-free: {even_free}, bracket defect {symplectic:.1e}, \
             identity residual {identity:.1e}, pipeline r = 10/20/30 in {secs:.1} s"
        ),
    )
}

fn rk4(h: &AveragedHamiltonian, z: [f64; 4], dt: f64) -> [f64; 4] {
    let f = |z: [f64; 4]| h.vector_field(z).unwrap();
    let add = |z: [f64; 4], k: [f64; 4], s: f64| [z[0] + s * k[0], z[1] + s * k[1], z[2] + s * k[2], z[3] + s * k[3]];
    let k1 = f(z);
    let k2 = f(add(z, k1, dt / 2.0));
    let k3 = f(add(z, k2, dt / 2.0));
    let k4 = f(add(z, k3, dt));
    std::array::from_fn(|i| z[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Angular frequency of the strongest spectral line of `x`, sampled at `dt`.
fn measured_frequency(x: &[f64], dt: f64) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let hann = |k: usize| 0.5 - 0.5 * (2.0 * PI * k as f64 / n as f64).cos();
    let mut buf: Vec<Complex<f64>> = x.iter().enumerate().map(|(k, v)| Complex::new((v - mean) * hann(k), 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let bin_w = 2.0 * PI / (n as f64 * dt);
    let bin = (1..n / 2)
        .max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm()))
        .unwrap();
    // refine on the continuous windowed transform
    let power = |w: f64| {
        let (mut re, mut im) = (0.0, 0.0);
        for (k, v) in x.iter().enumerate() {
            let a = (v - mean) * hann(k);
            let ph = w * k as f64 * dt;
            re += a * ph.cos();
            im -= a * ph.sin();
        }
        re * re + im * im
    };
    let (mut a, mut b) = ((bin as f64 - 1.0) * bin_w, (bin as f64 + 1.0) * bin_w);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (power(c), power(d));
    while b - a > 1e-9 * bin_w {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = power(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = power(d);
        }
    }
    0.5 * (a + b)
}

fn frequencies(run: &Run) -> Outcome {
    let form = &run.expansion.form;
    let amp = 0.01;
    let actions = [amp * amp / (2.0 * form.u_star[0]), amp * amp / (2.0 * form.u_star[1])];
    let predicted = run.normal_forms[1].frequencies(actions, 2).unwrap();
    let off = form.to_original(actions, [0.0, 0.0]);
    let s = run.expansion.state.sigma_star;
    let mut z = [s[0] + off[0], s[1] + off[1], off[2], off[3]];
    let h = &run.hamiltonian;
    let n = 1 << 16;
    let dt = 2.0 * PI / form.omega[0] / 64.0;
    let (mut s1, mut s3) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        s1.push(z[2]);
        s3.push(z[3]);
        z = rk4(h, z, dt);
    }
    let measured = [measured_frequency(&s1, dt), measured_frequency(&s3, dt)];
    let rel = [0, 1].map(|j| (measured[j] - predicted[j]).abs() / predicted[j]);
    let shift = [0, 1].map(|j| (predicted[j] - form.omega[j]) / form.omega[j]);
    outcome(
        rel[0] < 1e-4 && rel[1] < 1e-4,
        format!(
            "relative errors {:.1e}, {:.1e} (Z2 shifts {:.1e}, {:.1e})",
            rel[0], rel[1], shift[0], shift[1]
        ),
    )
}

fn curve_shape(run: &Run) -> Outcome {
    let grid: Vec<f64> = (0..=50).map(|k| 0.1 * k as f64).collect();
    let curves: Vec<Vec<(f64, f64)>> = run.profiles.iter().map(|p| stability_curve(p, &grid)).collect();
    let nonincreasing = curves
        .iter()
        .all(|c| c.windows(2).all(|w| w[1].1 <= w[0].1 || w[0].1.is_infinite()) && c.iter().all(|p| !p.1.is_nan()));
    let effective: Vec<f64> = grid
        .iter()
        .map(|&r0| effective_time(r0, &run.profiles).map_or(f64::NAN, |rep| rep.log10_t()))
        .collect();
    let eff_ok = effective.windows(2).all(|w| w[1] <= w[0]);
    let ordered = grid
        .iter()
        .enumerate()
        .filter(|(_, &r0)| r0 > 0.0 && r0 <= 1.0 + 1e-12)
        .all(|(k, _)| curves[0][k].1 < curves[1][k].1 && curves[1][k].1 < curves[2][k].1);
    let at1 = curves[1][10].1;
    outcome(
        nonincreasing && eff_ok && ordered && at1 >= 10.0,
        format!(
            "nonincreasing: {}, ordered r = 10 < 20 < 30 for rho0 <= 1: {ordered}, \
             log10 T(rho0 = 1, r = 20) = {at1:.2} (r = 10: {:.2}, r = 30: {:.2})",
            nonincreasing && eff_ok,
            curves[0][10].1,
            curves[2][10].1
        ),
    )
}

/// `(min, max)` of the finite entries.
fn spread(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.filter(|x| x.is_finite()).collect();
    (v.len() >= 2).then(|| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - v.iter().cloned().fold(f64::INFINITY, f64::min))
}

fn column(res: &SweepResult, ix: usize) -> impl Iterator<Item = f64> + '_ {
    (0..res.ny).map(move |iy| res.cell(ix, iy).log10_t)
}

fn row(res: &SweepResult, iy: usize) -> impl Iterator<Item = f64> + '_ {
    (0..res.nx).map(move |ix| res.cell(ix, iy).log10_t)
}

/// Eccentricity of the peak of the abscissa-averaged profile, refined by a parabola.
fn eccentricity_peak(res: &SweepResult, plan: &SweepPlan) -> f64 {
    let ys = plan.y_values();
    let complete: Vec<usize> = (0..res.nx)
        .filter(|&ix| column(res, ix).skip(1).all(f64::is_finite))
        .collect();
    let profile: Vec<f64> = (1..res.ny)
        .map(|iy| complete.iter().map(|&ix| res.cell(ix, iy).log10_t).sum::<f64>() / complete.len() as f64)
        .collect();
    let k = (0..profile.len()).max_by(|&a, &b| profile[a].total_cmp(&profile[b])).unwrap();
    let e = |k: usize| ys[k + 1];
    if k == 0 || k + 1 == profile.len() {
        return e(k);
    }
    let (a, b, c) = (profile[k - 1], profile[k], profile[k + 1]);
    e(k) + 0.5 * (a - c) / (a - 2.0 * b + c) * (e(k + 1) - e(k))
}

/// Reference obliquity ranges (arcmin) per sweep, in the order of `STANDARD_PAIRS`.
const REFERENCE_EPS: [(f64, f64); 10] = [
    (0.52, 4.72),
    (0.55, 3.49),
    (0.59, 3.13),
    (0.68, 2.73),
    (1.35, 4.07),
    (1.77, 2.36),
    (1.57, 3.55),
    (1.42, 3.02),
    (1.27, 4.54),
    (1.66, 2.63),
];

fn sweeps(base: PhysicalParams) -> Outcome {
    let t = Instant::now();
    let mut dominance = true;
    let mut dominance_worst = 1.0f64;
    let mut omega_spread = 0.0f64;
    let mut peaks = Vec::new();
    let mut eps_err = 0.0f64;
    let mut iso_worst = 0.0f64;
    let mut failed = 0;
    for (k, &(x, y)) in STANDARD_PAIRS.iter().enumerate() {
        let plan = SweepPlan::new(x, y, base).unwrap();
        let res = run_grid(&plan).unwrap();
        failed += res.summary.failed_cells;
        if y == SweepParam::I {
            let widest_x = (0..res.ny).filter_map(|iy| spread(row(&res, iy))).fold(0.0, f64::max);
            let lines: Vec<f64> = (0..res.nx).filter_map(|ix| spread(column(&res, ix))).collect();
            let frac = lines.iter().filter(|&&s| s > widest_x).count() as f64 / lines.len() as f64;
            dominance &= frac >= 0.8;
            dominance_worst = dominance_worst.min(frac);
        }
        if (x, y) == (SweepParam::C, SweepParam::OmegaDot) {
            omega_spread = omega_spread.max((0..res.nx).filter_map(|ix| spread(column(&res, ix))).fold(0.0, f64::max));
        }
        if (x, y) == (SweepParam::OmegaDot, SweepParam::E) {
            omega_spread = omega_spread.max((0..res.ny).filter_map(|iy| spread(row(&res, iy))).fold(0.0, f64::max));
        }
        if y == SweepParam::E {
            peaks.push(eccentricity_peak(&res, &plan));
        }
        let (lo, hi) = REFERENCE_EPS[k];
        eps_err = eps_err.max((res.summary.eps_min - lo).abs()).max((res.summary.eps_max - hi).abs());
        for p in res.iso.iter().flat_map(|c| c.segments.iter().flatten()) {
            iso_worst = iso_worst.max(p.residual);
        }
    }
    let peaks_ok = peaks.iter().all(|&e| (0.085..=0.1).contains(&e));
    let secs = t.elapsed().as_secs_f64();
    let parts = [
        (dominance, format!("(a) i-dominance on >= {:.0}% of lines", 100.0 * dominance_worst)),
        (omega_spread <= 0.3, format!("(b) omega_dot spread {omega_spread:.3}")),
        (peaks_ok, format!("(c) e peaks {:?}", peaks.iter().map(|e| (e * 1e4).round() / 1e4).collect::<Vec<_>>())),
        (eps_err <= 0.3, format!("(d) max eps range error {eps_err:.3}'")),
        (iso_worst <= 0.01, format!("(e) iso residual {iso_worst:.1e}")),
        (secs < 1800.0, format!("{secs:.0} s, {failed} failed cells")),
    ];
    let detail = parts
        .iter()
        .map(|(ok, s)| if *ok { s.clone() } else { format!("{s} [fail]") })
        .collect::<Vec<_>>()
        .join("; ");
    outcome(parts.iter().all(|p| p.0), detail)
}

fn small_series() -> impl Strategy<Value = PoissonSeries> {
    // d'Alembert terms: l_j >= |k_j| with matching parity, so brackets stay regular
    let term = (0u32..3, 0u32..3, -2i32..=2, -2i32..=2, any::<bool>(), -1.0f64..1.0).prop_map(
        |(a1, a3, k1, k3, sine, coeff)| Monomial {
            twice_pow: [k1.unsigned_abs() + 2 * a1, k3.unsigned_abs() + 2 * a3],
            harmonic: [k1, k3],
            trig: if sine { Trig::Sin } else { Trig::Cos },
            coeff,
        },
    );
    proptest::collection::vec(term, 1..5).prop_map(|t| PoissonSeries::from_monomials(t, 64))
}

fn algebra() -> Outcome {
    let t = Instant::now();
    let radii = [0.7, 1.3];
    let tol = 1e-12;
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    let verdict = runner.run(&(small_series(), small_series(), small_series()), |(f, g, h)| {
        let b = 64;
        let br = |a: &PoissonSeries, c: &PoissonSeries| a.poisson_bracket(c, b).unwrap();
        let norm = |a: &PoissonSeries| a.weighted_norm(radii).unwrap();
        let rel = |d: PoissonSeries, scale: f64| if scale > 0.0 { norm(&d) / scale } else { norm(&d) };

        let fg = br(&f, &g);
        let anti = rel(fg.axpby(1.0, &br(&g, &f), 1.0), norm(&fg));
        prop_assert!(anti <= tol, "antisymmetry {anti:e}");

        let j1 = br(&f, &br(&g, &h));
        let j2 = br(&g, &br(&h, &f));
        let j3 = br(&h, &fg);
        let jac = rel(j1.axpby(1.0, &j2, 1.0).axpby(1.0, &j3, 1.0), norm(&j1) + norm(&j2) + norm(&j3));
        prop_assert!(jac <= tol, "Jacobi {jac:e}");

        let lhs = br(&f, &g.mul(&h, b));
        let t1 = fg.mul(&h, b);
        let t2 = g.mul(&br(&f, &h), b);
        let leib = rel(lhs.axpby(1.0, &t1.axpby(1.0, &t2, 1.0), -1.0), norm(&t1) + norm(&t2));
        prop_assert!(leib <= tol, "Leibniz {leib:e}");

        let prod = norm(&f.mul(&g, b));
        prop_assert!(prod <= norm(&f) * norm(&g) * (1.0 + tol), "sub-multiplicativity");
        Ok(())
    });
    let secs = t.elapsed().as_secs_f64();
    match verdict {
        Ok(()) => outcome(secs < 60.0, format!("1000 cases within 1e-12 in {secs:.2} s")),
        Err(e) => outcome(false, format!("{e}")),
    }
}
