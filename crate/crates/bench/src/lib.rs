//! Fixtures shared by the benchmarks.

use youngfock::systems::lattice_points;
use youngfock::{
    build_system, compute_moments, make_instance, Complex64, RadialWeight, YoungInstance,
};

/// Instance on the default lattice with one extra dimension.
pub fn lattice_instance(weight: &RadialWeight, n: usize, seed: u64) -> YoungInstance {
    let sp = compute_moments(weight, n).expect("moments");
    let ps = build_system(lattice_points(n, 0.8, Complex64::new(0.11, 0.07)), &sp)
        .expect("lattice system");
    make_instance(&ps, 1, seed).expect("instance")
}
