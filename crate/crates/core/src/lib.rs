//! Numerical laboratory for isometric ℓ^p representations of finitely
//! generated groups.
//!
//! Groups enter as element oracles ([`group`]); the left regular
//! representation acts on word-metric balls ([`rep`]); displacement
//! energies and p-Laplacians live in [`energy`]; the absolute gradient and
//! descent to fixed points in [`absgrad`]; gap constants and equivalence
//! reports in [`gap`]; moduli of convexity and smoothness in [`moduli`];
//! invariant suites in [`suite`].

pub mod absgrad;
pub mod energy;
pub mod error;
pub mod gap;
pub mod group;
pub mod io;
pub mod lp;
pub mod moduli;
pub mod rep;
pub mod suite;

pub use absgrad::{absgrad_closed, absgrad_sampled, descend, directional_derivative, DescentOptions, DescentTrace, GradientResult};
pub use energy::{dp_norm, energy, g_field, p_laplacian, z1_norm, EnergyParams};
pub use error::{Error, Result};
pub use gap::{equivalence_report, gap_sweep, GapOptions, GapReport};
pub use group::{ball, build_group, check_symmetry, CayleyBall, Element, GroupHandle, GroupSpec};
pub use lp::{duality_map, norming_vector, DualVector, LpVector};
pub use moduli::{duality_continuity_check, modulus_convexity, modulus_smoothness, ModulusCurve, ModulusOptions};
pub use rep::{mean_zero_project, AffineAction, Cocycle, Domain, Representation};
pub use suite::{run_suites, Suite, SuiteOptions, VerifyReport};

/// Version string embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
