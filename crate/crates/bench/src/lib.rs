//! Deterministic fixtures shared by the benchmarks.

use lqgh_core::matsolve::dense::{eye, zeros};
use lqgh_core::{AffineFamily, Mat, PlantDerivative, PlantInstance};

/// Order-`n` tridiagonal plant with unstable modes and one actuator and one
/// sensor per four states, co-located.
pub fn chain_plant(n: usize) -> PlantInstance {
    let a = Mat::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => 0.9,
        1 => 0.3,
        _ => 0.0,
    });
    let m = (n / 4).max(1);
    let mut b = zeros(n, m);
    for k in 0..m {
        b[(4 * k, k)] = 1.0;
    }
    let c = b.transpose();
    PlantInstance::new(a, b, c, eye(n), eye(m), eye(n), eye(m)).expect("chain plant is well posed")
}

/// Chain plant with the first actuator gain as the unknown parameter.
pub fn chain_family(n: usize) -> AffineFamily {
    let plant = chain_plant(n);
    let mut d = PlantDerivative::zero_like(&plant);
    d.b[(0, 0)] = 1.0;
    AffineFamily::scalar(1.0, plant, d).expect("chain family is well posed")
}
