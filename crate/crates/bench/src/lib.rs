//! Fixtures shared by the criterion benchmarks.

use pgap_core::absgrad::random_unit_vector;
use pgap_core::group::{build_group, GroupSpec};
use pgap_core::{AffineAction, Domain, LpVector, Representation};

/// Regular representation of `spec` on its domain convention.
pub fn representation(spec: &GroupSpec, p: f64, domain: Domain, radius: usize) -> Representation {
    Representation::regular(build_group(spec).expect("valid spec"), p, domain, radius).expect("valid representation")
}

/// Coboundary action `λ + df₀` with a seeded potential, and a seeded point.
pub fn coboundary_instance(rep: &Representation, seed: u64) -> (AffineAction, LpVector) {
    let potential = random_unit_vector(rep, seed);
    let alpha = AffineAction::coboundary(rep.clone(), &potential).expect("admissible potential");
    (alpha, random_unit_vector(rep, seed.wrapping_add(1)))
}

/// The instances every kernel benchmark runs on.
pub fn instances(p: f64) -> Vec<(&'static str, Representation)> {
    vec![
        ("cyclic(64)", representation(&GroupSpec::cyclic(64), p, Domain::MeanZero, 0)),
        ("symmetric(5)", representation(&GroupSpec::symmetric(5), p, Domain::MeanZero, 0)),
        ("free(2) R5", representation(&GroupSpec::free(2), p, Domain::Dirichlet, 5)),
        ("Z^2 R12", representation(&GroupSpec::integer_lattice(2), p, Domain::Dirichlet, 12)),
    ]
}
