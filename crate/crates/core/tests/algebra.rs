use proptest::prelude::*;

use spinorbit::pseries::{Monomial, PoissonSeries, Trig};

const BOUND: u32 = 64;

fn term() -> impl Strategy<Value = Monomial> {
    (0u32..3, 0u32..3, -3i32..=3, -3i32..=3, any::<bool>(), -2.0f64..2.0).prop_map(|(a1, a3, k1, k3, sine, coeff)| {
        Monomial {
            twice_pow: [k1.unsigned_abs() + 2 * a1, k3.unsigned_abs() + 2 * a3],
            harmonic: [k1, k3],
            trig: if sine { Trig::Sin } else { Trig::Cos },
            coeff,
        }
    })
}

fn series() -> impl Strategy<Value = PoissonSeries> {
    proptest::collection::vec(term(), 0..6).prop_map(|t| PoissonSeries::from_monomials(t, BOUND))
}

fn norm(f: &PoissonSeries) -> f64 {
    f.weighted_norm([0.8, 1.25]).unwrap()
}

fn close(a: &PoissonSeries, b: &PoissonSeries, scale: f64) -> bool {
    norm(&a.axpby(1.0, b, -1.0)) <= 1e-12 * scale.max(1e-300)
}

fn point() -> impl Strategy<Value = ([f64; 2], [f64; 2])> {
    ((0.01f64..2.0, 0.01f64..2.0), (-3.2f64..3.2, -3.2f64..3.2)).prop_map(|(a, u)| ([a.0, a.1], [u.0, u.1]))
}

proptest! {
    #[test]
    fn product_is_commutative_and_evaluates_pointwise(f in series(), g in series(), (a, u) in point()) {
        let fg = f.mul(&g, BOUND);
        prop_assert!(close(&fg, &g.mul(&f, BOUND), norm(&f) * norm(&g)));
        let direct = f.evaluate(a, u).unwrap() * g.evaluate(a, u).unwrap();
        let scale = 1.0 + norm(&f) * norm(&g) * 8.0;
        prop_assert!((fg.evaluate(a, u).unwrap() - direct).abs() <= 1e-12 * scale);
    }

    #[test]
    fn product_distributes_over_sums(f in series(), g in series(), h in series()) {
        let lhs = f.mul(&g.axpby(1.0, &h, 1.0), BOUND);
        let rhs = f.mul(&g, BOUND).axpby(1.0, &f.mul(&h, BOUND), 1.0);
        prop_assert!(close(&lhs, &rhs, norm(&f) * (norm(&g) + norm(&h))));
    }

    #[test]
    fn bracket_is_bilinear_and_antisymmetric(f in series(), g in series(), h in series(), s in -3.0f64..3.0) {
        let lhs = f.poisson_bracket(&g.axpby(s, &h, 1.0), BOUND).unwrap();
        let rhs = f.poisson_bracket(&g, BOUND).unwrap().axpby(s, &f.poisson_bracket(&h, BOUND).unwrap(), 1.0);
        let scale = norm(&f) * (norm(&g) * s.abs() + norm(&h)) * 20.0;
        prop_assert!(close(&lhs, &rhs, scale));
        let fg = f.poisson_bracket(&g, BOUND).unwrap();
        let gf = g.poisson_bracket(&f, BOUND).unwrap();
        prop_assert!(close(&fg, &gf.scale(-1.0), norm(&fg)));
    }

    #[test]
    fn bracket_with_action_is_angle_derivative(f in series()) {
        for j in 0..2 {
            let mut pow = [0, 0];
            pow[j] = 2;
            let u = PoissonSeries::monomial(pow, [0, 0], Trig::Cos, 1.0, BOUND);
            let via_bracket = u.poisson_bracket(&f, BOUND).unwrap();
            prop_assert!(close(&via_bracket, &f.bracket_with_action(j), norm(&f)));
        }
    }

    #[test]
    fn angle_average_commutes_with_bracket_by_action(f in series(), g in series()) {
        // {U_j, f} has no angle-free part
        for j in 0..2 {
            prop_assert!(f.bracket_with_action(j).angle_average().is_empty());
        }
        prop_assert!(f.angle_average().is_angle_free());
        prop_assert!(close(&f.axpby(1.0, &g, 1.0).angle_average(), &f.angle_average().axpby(1.0, &g.angle_average(), 1.0), norm(&f) + norm(&g)));
    }

    #[test]
    fn block_splitting_reassembles(f in series()) {
        let mut total = PoissonSeries::zero(BOUND);
        for (deg, block) in f.blocks() {
            prop_assert_eq!(block.degree_range(), Some((deg, deg)));
            total = total.axpby(1.0, &block, 1.0);
        }
        prop_assert_eq!(total, f);
    }

    #[test]
    fn text_form_round_trips_bitwise(f in series()) {
        prop_assert_eq!(PoissonSeries::from_text(&f.to_text()).unwrap(), f);
    }

    #[test]
    fn norm_is_a_seminorm(f in series(), g in series(), s in -5.0f64..5.0) {
        let n = norm(&f.axpby(1.0, &g, 1.0));
        prop_assert!(n <= (norm(&f) + norm(&g)) * (1.0 + 1e-12));
        prop_assert!((norm(&f.scale(s)) - s.abs() * norm(&f)).abs() <= 1e-12 * norm(&f) * s.abs().max(1.0));
    }
}
