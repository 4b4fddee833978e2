use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;

use pwkn::analysis::{modulated_mass, Histogram};
use pwkn::io::{histogram_from_csv, histogram_from_json, histogram_to_csv, histogram_to_json, Summary};
use pwkn::models::ModelSpec;
use pwkn::models::{
    ansatz_density, kn_density, naive_phi_density, normalize_azimuth, pw_density_fixed, recommended_density,
    ScatterAngles, TWO_PI,
};
use pwkn::quantum::{expectation_pair, rotated_singlet, scatter_matrix, singlet};
use pwkn::sampling::{
    sample_joint, to_fixed_frame, to_polarization_frame, OrthSign, PairEvent, Photon, PolarizationFrame, RandomStream,
};

fn chi() -> impl Strategy<Value = f64> {
    prop_oneof![Just(-1.0), Just(1.0), -1.0..=1.0f64]
}

fn phi() -> impl Strategy<Value = f64> {
    0.0..TWO_PI
}

fn angles() -> impl Strategy<Value = ScatterAngles> {
    (chi(), phi()).prop_map(|(c, p)| ScatterAngles::new(c, p).unwrap())
}

fn sign() -> impl Strategy<Value = OrthSign> {
    prop_oneof![Just(OrthSign::Plus), Just(OrthSign::Minus)]
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn circular_close(a: f64, b: f64, tol: f64) -> bool {
    let d = (a - b).abs();
    d.min(TWO_PI - d) <= tol
}

proptest! {
    #[test]
    fn densities_have_period_pi(a1 in angles(), a2 in angles(), shift_first in any::<bool>()) {
        let shift = |a: &ScatterAngles| a.with_phi(a.phi + PI);
        let (b1, b2) = if shift_first { (shift(&a1), a2) } else { (a1, shift(&a2)) };
        prop_assert!(close(kn_density(&a1), kn_density(&shift(&a1)), 1e-12));
        prop_assert!(close(pw_density_fixed(&a1, &a2), pw_density_fixed(&b1, &b2), 1e-12));
        prop_assert!(close(naive_phi_density(&a1, &a2), naive_phi_density(&b1, &b2), 1e-12));
        prop_assert!(close(recommended_density(&a1, &a2), recommended_density(&b1, &b2), 1e-12));
        prop_assert!(close(ansatz_density(&a1, &a2, -0.001, 0.01), ansatz_density(&b1, &b2, -0.001, 0.01), 1e-12));
    }

    #[test]
    fn recommended_exchange_symmetry_is_exact(a1 in angles(), a2 in angles()) {
        prop_assert_eq!(recommended_density(&a1, &a2), recommended_density(&a2, &a1));
    }

    #[test]
    fn ansatz_origin_is_recommended(a1 in angles(), a2 in angles()) {
        prop_assert_eq!(ansatz_density(&a1, &a2, 0.0, 0.0), recommended_density(&a1, &a2));
    }

    #[test]
    fn recommended_is_non_negative(a1 in angles(), a2 in angles()) {
        prop_assert!(recommended_density(&a1, &a2) >= -1e-12);
    }

    #[test]
    fn out_of_domain_cosines_are_rejected(c in prop_oneof![1.0000001..10.0f64, -10.0..-1.0000001f64], p in phi()) {
        prop_assert!(ScatterAngles::new(c, p).is_err());
    }

    #[test]
    fn azimuths_normalize_into_period(p in -1e3..1e3f64) {
        let n = normalize_azimuth(p);
        prop_assert!((0.0..TWO_PI).contains(&n));
        prop_assert!(circular_close(n, p.rem_euclid(TWO_PI), 1e-9));
    }

    #[test]
    fn frame_round_trip(p in phi(), big_phi in phi(), s in sign(), second in any::<bool>()) {
        let frame = PolarizationFrame::new(big_phi, s);
        let photon = if second { Photon::Second } else { Photon::First };
        let back = to_polarization_frame(to_fixed_frame(p, &frame, photon), &frame, photon);
        prop_assert!(circular_close(back, p, 1e-12));
        prop_assert!((0.0..TWO_PI).contains(&back));
    }

    #[test]
    fn event_frames_are_consistent(a1 in angles(), a2 in angles(), big_phi in phi(), s in sign()) {
        let frame = PolarizationFrame::new(big_phi, s);
        let e = PairEvent::from_polarization(frame, a1, a2);
        prop_assert!(circular_close(e.fixed1_phi, a1.phi + big_phi, 1e-12));
        prop_assert!(circular_close(e.fixed2_phi, a2.phi + big_phi + s.shift(), 1e-12));
        let f = PairEvent::from_fixed(frame, e.fixed1(), e.fixed2());
        prop_assert!(circular_close(f.photon1.phi, a1.phi, 1e-12));
        prop_assert!(circular_close(f.photon2.phi, a2.phi, 1e-12));
    }

    #[test]
    fn pair_expectation_depends_on_difference_only(
        c1 in chi(), c2 in chi(), p1 in phi(), p2 in phi(), delta in -10.0..10.0f64,
    ) {
        let a = expectation_pair(c1, p1, c2, p2).unwrap();
        let b = expectation_pair(c1, p1 + delta, c2, p2 + delta).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn singlet_is_rotation_invariant(big_phi in -100.0..100.0f64) {
        prop_assert!(rotated_singlet(big_phi).max_abs_diff(&singlet()) < 1e-14);
    }

    #[test]
    fn scatter_matrix_is_positive_semidefinite(c in chi(), p in phi()) {
        let s = scatter_matrix(c, p).unwrap();
        prop_assert!(s.is_symmetric());
        let (lo, _) = s.eigenvalues();
        prop_assert!(lo >= -1e-15);
    }

    #[test]
    fn joint_samples_stay_in_domain(seed in any::<u64>(), stream in 0u64..8) {
        let mut rng = RandomStream::new(seed, stream).rng();
        let e = sample_joint(&mut rng, ModelSpec::new(pwkn::models::ModelKind::Recommended)).unwrap();
        for a in [e.photon1, e.photon2, e.fixed1(), e.fixed2()] {
            prop_assert!((-1.0..=1.0).contains(&a.chi.value()));
            prop_assert!((0.0..TWO_PI).contains(&a.phi));
        }
        prop_assert!((0.0..TWO_PI).contains(&e.frame.big_phi));
    }

    #[test]
    fn histogram_text_round_trip(
        counts in prop::collection::vec(0u64..1_000_000, 2..40),
        k in -0.9..0.9f64,
        with_analytic in any::<bool>(),
        estimate in -1.0..1.0f64,
    ) {
        let bins = counts.len();
        let mut h = Histogram::uniform(0.0, TWO_PI, bins).unwrap();
        h = Histogram::new(h.edges().to_vec(), counts, None).unwrap();
        if with_analytic {
            h.set_analytic(|lo, hi| modulated_mass(k, lo, hi));
        }
        let summary = Summary::new().real("k_hat", estimate).int("seed", 3).text("model", "recommended");
        for (back, s) in [
            histogram_from_csv(&histogram_to_csv(&h, &summary)).unwrap(),
            histogram_from_json(&histogram_to_json(&h, &summary)).unwrap(),
        ] {
            prop_assert_eq!(back.counts(), h.counts());
            prop_assert_eq!(back.edges(), h.edges());
            match (back.analytic(), h.analytic()) {
                (Some(a), Some(b)) => {
                    for (x, y) in a.iter().zip(b) {
                        prop_assert!((x - y).abs() <= 1e-15);
                    }
                }
                (None, None) => {}
                _ => prop_assert!(false, "analytic column lost"),
            }
            prop_assert_eq!(s.get_real("k_hat"), Some(estimate));
        }
    }
}

#[test]
fn orthogonal_shift_sign_is_immaterial_for_cos2() {
    let a = ScatterAngles::new(0.2, 1.0).unwrap();
    let plus = a.with_phi(a.phi + FRAC_PI_2);
    let minus = a.with_phi(a.phi - FRAC_PI_2);
    assert!(((2.0 * plus.phi).cos() - (2.0 * minus.phi).cos()).abs() < 1e-15);
}
