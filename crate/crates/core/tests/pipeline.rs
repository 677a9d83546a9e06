use spinorbit::birkhoff::NormalForm;
use spinorbit::pipeline::{radii_at, run, PipelineOptions};
use spinorbit::stability::{effective_time, DEFAULT_LIBRATION_BOUND};
use spinorbit::PhysicalParams;

#[test]
fn report_invariants_hold_over_rho0() {
    let run = run(PhysicalParams::mercury(), &[4, 6, 8], &PipelineOptions::default()).unwrap();
    let mut last = f64::INFINITY;
    for k in 1..=20 {
        let rho0 = 0.25 * k as f64;
        let rep = effective_time(rho0, &run.profiles).unwrap();
        assert!(rep.d >= 1.0);
        assert!(rep.best_rho > rho0);
        let best = rep.per_r_curve.iter().map(|c| c.tau_years).fold(0.0, f64::max);
        assert_eq!(rep.t_years, best);
        assert!(rep.t_years <= last);
        last = rep.t_years;
    }
}

#[test]
fn radii_follow_libration_bound() {
    let m = PhysicalParams::mercury();
    let base = radii_at(m, &PipelineOptions::default()).unwrap();
    let doubled = radii_at(
        m,
        &PipelineOptions {
            libration_bound: 2.0 * DEFAULT_LIBRATION_BOUND,
            ..PipelineOptions::default()
        },
    )
    .unwrap();
    for j in 0..2 {
        assert!((doubled[j] / base[j] - 4.0).abs() < 1e-12);
    }
    let fixed = PipelineOptions {
        radii: Some([1e-5, 2e-5]),
        ..PipelineOptions::default()
    };
    assert_eq!(run(m, &[4], &fixed).unwrap().radii, [1e-5, 2e-5]);
}

#[test]
fn normal_form_text_reloads_exactly() {
    let run = run(PhysicalParams::mercury(), &[6], &PipelineOptions::default()).unwrap();
    let nf = &run.normal_forms[0];
    let back = NormalForm::from_text(&nf.to_text()).unwrap();
    assert_eq!(back.z, nf.z);
    assert_eq!(back.generators, nf.generators);
    assert_eq!(back.remainder, nf.remainder);
    assert_eq!(back.omega, nf.omega);
}

#[test]
fn higher_order_lengthens_time_near_equilibrium() {
    let run = run(PhysicalParams::mercury(), &[4, 8, 12], &PipelineOptions::default()).unwrap();
    let t: Vec<f64> = run
        .profiles
        .iter()
        .map(|p| p.optimize(0.5).unwrap().1)
        .collect();
    assert!(t[0] < t[1] && t[1] < t[2], "{t:?}");
}
