//! Fixed-seed instances shared by the benchmarks.

use banyan_core::instance::{generate_instance, GeneratorKind, GeneratorSpec, Instance};

/// Uniform planar instance with `n` points and 20 pairs.
pub fn uniform(n: usize) -> Instance {
    generate_instance(&GeneratorSpec::new(GeneratorKind::Uniform, n, 2, 20, 42)).expect("generator accepts fixed spec")
}

/// Clustered planar instance with `n` points and 20 pairs.
pub fn clustered(n: usize) -> Instance {
    generate_instance(&GeneratorSpec::new(GeneratorKind::Clustered, n, 2, 20, 43)).expect("generator accepts fixed spec")
}
