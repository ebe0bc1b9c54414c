use std::f64::consts::PI;

use proptest::prelude::*;
use qsdw::integrator::modal_exact;
use qsdw::nonlinearity::{monotonicity_gap_vec, NonlinearitySpec};
use qsdw::spectral::{Basis, Field};

fn coeffs(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval_on_the_grid(c in coeffs(12)) {
        let b = Basis::new(1, 12, &[PI], 18).unwrap();
        let u = Field::from_coeffs(&b, c).unwrap();
        let g = b.to_grid(&u);
        let quad = b.integrate(&g.map(|x| x * x)).unwrap();
        let spec = u.l2_norm().powi(2);
        prop_assert!((quad - spec).abs() <= 1e-12 * (1.0 + spec));
    }

    #[test]
    fn grid_round_trip(c in coeffs(10), extra in 0usize..8) {
        let b = Basis::new(1, 10, &[2.0], 15 + extra).unwrap();
        let u = Field::from_coeffs(&b, c).unwrap();
        let back = b.to_spectral(&b.to_grid(&u)).unwrap();
        for (x, y) in u.coeffs().iter().zip(back.coeffs()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_in_two_dimensions(c in coeffs(36)) {
        let b = Basis::new(2, 6, &[PI, 1.5], 9).unwrap();
        let u = Field::from_coeffs(&b, c).unwrap();
        let back = b.to_spectral(&b.to_grid(&u)).unwrap();
        for (x, y) in u.coeffs().iter().zip(back.coeffs()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_of_gradient_is_laplacian(c in coeffs(16)) {
        let b = Basis::new(2, 4, &[PI, 2.0], 6).unwrap();
        let u = Field::from_coeffs(&b, c).unwrap();
        let lap = b.div_from_grid(&b.grad_to_grid(&u)).unwrap();
        for (x, y) in lap.coeffs().iter().zip(b.laplacian(&u).coeffs()) {
            prop_assert!((x - y).abs() < 1e-10 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn sobolev_norms_interpolate(c in coeffs(12), s0 in -1.0f64..0.5, gap in 0.5f64..2.0, theta in 0.0f64..1.0) {
        let b = Basis::new(1, 12, &[PI], 18).unwrap();
        let u = Field::from_coeffs(&b, c).unwrap();
        let s1 = s0 + gap;
        let s = (1.0 - theta) * s0 + theta * s1;
        let lhs = b.sobolev_norm(&u, s);
        let rhs = b.sobolev_norm(&u, s0).powf(1.0 - theta) * b.sobolev_norm(&u, s1).powf(theta);
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn modal_solution_is_a_flow(
        u0 in -2.0f64..2.0, v0 in -2.0f64..2.0,
        d in 0.01f64..20.0, s in 0.01f64..50.0,
        t1 in 0.0f64..1.5, t2 in 0.0f64..1.5,
    ) {
        let (a, b) = modal_exact(u0, v0, d, s, t1);
        let (u, v) = modal_exact(a, b, d, s, t2);
        let (ue, ve) = modal_exact(u0, v0, d, s, t1 + t2);
        let scale = 1.0 + u0.abs() + v0.abs() + s.sqrt() * u0.abs();
        prop_assert!((u - ue).abs() < 1e-10 * scale, "u {u} vs {ue}");
        prop_assert!((v - ve).abs() < 1e-9 * scale * (1.0 + d), "v {v} vs {ve}");
    }

    #[test]
    fn potential_derivatives_match(p in 1.0f64..4.9, q in 0.2f64..4.0, c_f in 0.0f64..3.0, x in 0.05f64..3.0, sign in prop::bool::ANY) {
        let nl = NonlinearitySpec::power(p, q, c_f);
        let x = if sign { x } else { -x };
        let h = 1e-6;
        let df = (nl.big_f(x + h) - nl.big_f(x - h)) / (2.0 * h);
        prop_assert!((df - nl.f(x)).abs() < 1e-6 * (1.0 + nl.f(x).abs()));
        let dphi = (nl.phi(x + h) - nl.phi(x - h)) / (2.0 * h);
        prop_assert!((dphi - nl.phi_prime(x)).abs() < 1e-6 * (1.0 + nl.phi_prime(x).abs()));
        let dphi2 = (nl.phi_prime(x + h) - nl.phi_prime(x - h)) / (2.0 * h);
        prop_assert!((dphi2 - nl.phi_second(x)).abs() < 1e-5 * (1.0 + nl.phi_second(x).abs()));
    }

    #[test]
    fn monotonicity_gap_is_positive(
        p in 1.0f64..4.99,
        a in prop::collection::vec(-5.0f64..5.0, 2),
        b in prop::collection::vec(-5.0f64..5.0, 2),
    ) {
        prop_assume!(a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 1e-9));
        let gap = monotonicity_gap_vec(&a, &b, &NonlinearitySpec::power(p, 2.0, 0.0)).unwrap();
        prop_assert!(gap > 0.0);
    }
}
