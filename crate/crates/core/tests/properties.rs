use pgap_core::absgrad::random_unit_vector;
use pgap_core::group::{ball, build_group, GroupSpec};
use pgap_core::moduli::{modulus_convexity, modulus_convexity_seeded, ModulusOptions};
use pgap_core::{absgrad_closed, energy, mean_zero_project, AffineAction, Domain, EnergyParams, Representation};
use proptest::prelude::*;

fn rep(spec: &GroupSpec, p: f64, domain: Domain, radius: usize) -> Representation {
    Representation::regular(build_group(spec).unwrap(), p, domain, radius).unwrap()
}

fn finite_group(index: usize) -> GroupSpec {
    match index % 4 {
        0 => GroupSpec::cyclic(7),
        1 => GroupSpec::dihedral(4),
        2 => GroupSpec::symmetric(3),
        _ => GroupSpec::cyclic(10),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linear_energy_is_homogeneous(g in 0usize..4, p in 1.1f64..5.0, t in -4.0f64..4.0, seed in any::<u64>()) {
        let r = rep(&finite_group(g), p, Domain::MeanZero, 0);
        let v = random_unit_vector(&r, seed);
        let alpha = AffineAction::linear(r);
        let params = EnergyParams::matched(p).unwrap();
        let f = energy(&alpha, params, &v).unwrap();
        let ft = energy(&alpha, params, &v.scaled(t)).unwrap();
        prop_assert!((ft - t.abs() * f).abs() <= 1e-12 * f.max(1.0));
    }

    #[test]
    fn gradient_is_at_most_two(g in 0usize..4, p in 1.1f64..5.0, seed in any::<u64>(), affine in any::<bool>()) {
        let r = rep(&finite_group(g), p, Domain::Full, 0);
        let v = random_unit_vector(&r, seed);
        let alpha = if affine {
            AffineAction::coboundary(r.clone(), &random_unit_vector(&r, seed ^ 1)).unwrap()
        } else {
            AffineAction::linear(r)
        };
        match absgrad_closed(&alpha, &v) {
            Ok(grad) => {
                prop_assert!(grad.value <= 2.0 + 1e-12);
                prop_assert!(grad.admissible_value <= grad.value + 1e-12);
            }
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn mean_zero_projection_is_idempotent(values in prop::collection::vec(-10.0f64..10.0, 1..40)) {
        let v = pgap_core::LpVector::new(2.0, values).unwrap();
        let once = mean_zero_project(&v);
        let twice = mean_zero_project(&once);
        prop_assert!(once.values().iter().sum::<f64>().abs() <= 1e-12 * v.norm().max(1.0));
        for (a, b) in once.values().iter().zip(twice.values()) {
            prop_assert!((a - b).abs() <= 1e-12 * v.norm().max(1.0));
        }
    }

    #[test]
    fn vectors_survive_binary_round_trip(values in prop::collection::vec(any::<f64>(), 0..64)) {
        let bytes = pgap_core::io::encode_vector(&values);
        let back = pgap_core::io::decode_vector(&bytes).unwrap();
        prop_assert_eq!(back.len(), values.len());
        for (a, b) in back.iter().zip(&values) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn free_group_balls_have_geometric_spheres() {
    let g = build_group(&GroupSpec::free(2)).unwrap();
    for radius in 0..=6usize {
        let b = ball(&g, radius).unwrap();
        // 1 + 4 + 4·3 + ... + 4·3^{R−1}
        let expected = 1 + 2 * (3usize.pow(radius as u32) - 1);
        assert_eq!(b.len(), expected, "radius {radius}");
    }
}

#[test]
fn convexity_modulus_does_not_grow_with_dimension() {
    // Pairs in a lower dimension embed isometrically, so the infimum can only
    // shrink as the dimension grows.
    let opts = ModulusOptions { starts: 64, ..ModulusOptions::default() };
    let eps = [0.5, 1.0, 1.5];
    for p in [1.5, 3.0] {
        let d2 = modulus_convexity(p, 2, &eps, &opts).unwrap();
        let d4 = modulus_convexity_seeded(p, 4, &eps, &opts, Some(&d2)).unwrap();
        let d8 = modulus_convexity_seeded(p, 8, &eps, &opts, Some(&d4)).unwrap();
        for k in 0..eps.len() {
            assert!(d4.estimates[k] <= d2.estimates[k] + 1e-12, "p = {p}: {:?} vs {:?}", d4.estimates, d2.estimates);
            assert!(d8.estimates[k] <= d4.estimates[k] + 1e-12, "p = {p}: {:?} vs {:?}", d8.estimates, d4.estimates);
        }
    }
}
