//! Shared fixtures for the engine benchmarks.

use bilinv_core::invariant::GeneratorId;
use bilinv_core::perm::Permutation;
use bilinv_core::relation::ShuffleSpec;

pub fn perm(text: &str, degree: usize) -> Permutation {
    Permutation::from_cycles(text, degree).unwrap()
}

/// The flagship degree-4 generator `v_(23)(67) (x) w^(23)`.
pub fn flagship_generator() -> GeneratorId {
    GeneratorId::new(2, 2, 4, perm("(23)(67)", 8), perm("(23)", 4)).unwrap()
}

/// The identity-based spec whose type B certificate is the three-term
/// alternating relation at k = 2, r = 4.
pub fn flagship_spec() -> ShuffleSpec {
    ShuffleSpec::new(Permutation::identity(4), vec![1, 2, 3]).unwrap()
}
