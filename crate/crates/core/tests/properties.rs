use num_complex::Complex;
use proptest::prelude::*;
use slerev::bessel::{bridge_density, first_passage_density, transition_density_killed, Params};
use slerev::loewner::{atlas_from_driving, evaluate_g_prime, DrivingPath, MapAtlas};
use slerev::sampler::TestSet;
use slerev::Error;

fn driving(us: Vec<f64>, t: f64, a: f64) -> DrivingPath<f64> {
    let n = us.len() - 1;
    let times = (0..=n).map(|k| t * k as f64 / n as f64).collect();
    DrivingPath::new(times, us, a).unwrap()
}

fn walk(steps: &[f64], scale: f64) -> Vec<f64> {
    let mut u = vec![0.0];
    for s in steps {
        u.push(u.last().unwrap() + scale * s);
    }
    u
}

fn kappa() -> impl Strategy<Value = f64> {
    prop_oneof![Just(2.0), Just(8.0 / 3.0), Just(3.0), Just(4.0), 0.5f64..7.5]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn densities_are_nonnegative(k in kappa(), x in 0.01f64..5.0, y in 0.0f64..6.0, t in 0.01f64..3.0, s in 0.05f64..0.95) {
        let p = Params::new(k).unwrap();
        prop_assert!(first_passage_density(&p, x, t, true).unwrap() >= 0.0);
        prop_assert!(transition_density_killed(&p, t, x, y).unwrap() >= 0.0);
        prop_assert!(bridge_density(&p, s * t, x, y, t).unwrap() >= 0.0);
    }

    #[test]
    fn composition_adds_capacity(
        a_steps in proptest::collection::vec(-1.0f64..1.0, 1..30),
        b_steps in proptest::collection::vec(-1.0f64..1.0, 1..30),
        ta in 0.01f64..2.0,
        tb in 0.01f64..2.0,
    ) {
        let a = 0.6;
        let ma = atlas_from_driving(&driving(walk(&a_steps, 0.2), ta, a));
        let mb = atlas_from_driving(&driving(walk(&b_steps, 0.2), tb, a));
        let ab = ma.then(&mb);
        prop_assert!((ab.total_capacity() - a * (ta + tb)).abs() < 1e-12);
        let z = Complex::new(0.3, 5.0);
        let direct = ab.evaluate(z).unwrap();
        let stepwise = mb.evaluate(ma.evaluate(z).unwrap()).unwrap();
        prop_assert!((direct - stepwise).norm() < 1e-12);
    }

    #[test]
    fn test_set_survives_capacity_up_to_a(
        k in kappa(),
        steps in proptest::collection::vec(-1.0f64..1.0, 1..200),
        scale in 0.0f64..3.0,
        t in 0.01f64..1.0,
    ) {
        let p = Params::new(k).unwrap();
        let m = atlas_from_driving(&driving(walk(&steps, scale), t, p.a));
        prop_assert!(m.total_capacity() <= p.a + 1e-12);
        for z in TestSet::new(p.a).points {
            let g = m.evaluate(z);
            prop_assert!(matches!(g, Ok(w) if w.im > 0.0), "{z}: {g:?}");
        }
    }

    #[test]
    fn derivative_matches_finite_differences(
        steps in proptest::collection::vec(-1.0f64..1.0, 1..60),
        re in -2.0f64..2.0,
    ) {
        let m: MapAtlas<f64> = atlas_from_driving(&driving(walk(&steps, 0.3), 0.5, 0.5));
        let z = Complex::new(re, 1.0 + m.total_capacity().sqrt() * 2.0);
        let h = 1e-5;
        let fd = (m.evaluate(z + h).unwrap() - m.evaluate(z - h).unwrap()) / (2.0 * h);
        prop_assert!((evaluate_g_prime(&m, z).unwrap() - fd).norm() < 1e-6);
    }

    #[test]
    fn swallowed_points_lie_below_the_height_bound(
        steps in proptest::collection::vec(-1.0f64..1.0, 1..60),
        re in -1.0f64..1.0,
        im in 1e-3f64..2.0,
    ) {
        let m = atlas_from_driving(&driving(walk(&steps, 0.2), 1.0, 0.5));
        if let Err(e) = m.evaluate(Complex::new(re, im)) {
            let swallowed = matches!(e, Error::Swallowed { .. });
            prop_assert!(swallowed, "{}", e);
            prop_assert!(im * im <= 2.0 * m.total_capacity() + 1e-9);
        }
    }
}
