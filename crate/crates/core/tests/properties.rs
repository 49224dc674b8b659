use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use lqgh_core::derivatives::{directional_derivatives, finite_diff_derivatives};
use lqgh_core::matsolve::dense::{eye, spectral_radius, symmetrize};
use lqgh_core::matsolve::h2_norm_sq;
use lqgh_core::simulate::Simulator;
use lqgh_core::{synthesize, AffineFamily, Mat, PlantDerivative, PlantInstance, PolicySpec, StateSpaceTF};

fn gauss(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn spd(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let m = gauss(rng, n, n);
    symmetrize(&(&m * m.transpose() / n as f64 + eye(n) * 0.2))
}

fn stable(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Mat {
    let a = gauss(rng, n, n);
    let rho = spectral_radius(&a);
    if rho > radius {
        a * (radius / rho)
    } else {
        a
    }
}

/// Random open-loop stable family with every plant matrix perturbed.
fn random_family(seed: u64) -> AffineFamily {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=4);
    let du = rng.random_range(1..=2);
    let dy = rng.random_range(1..=2);
    let plant = PlantInstance::new(
        stable(&mut rng, n, 0.9),
        gauss(&mut rng, n, du),
        gauss(&mut rng, dy, n),
        spd(&mut rng, n),
        spd(&mut rng, dy),
        spd(&mut rng, n),
        spd(&mut rng, du),
    )
    .unwrap();
    let d = PlantDerivative {
        a: gauss(&mut rng, n, n) * 0.3,
        b: gauss(&mut rng, n, du) * 0.3,
        c: gauss(&mut rng, dy, n) * 0.3,
        sigma_w: symmetrize(&gauss(&mut rng, n, n)) * 0.1,
        sigma_v: symmetrize(&gauss(&mut rng, dy, dy)) * 0.1,
    };
    AffineFamily::scalar(0.0, plant, d).unwrap()
}

/// `(1 / 2 pi) int ||G(e^{iw})||_F^2 dw` by the trapezoidal rule, which is
/// spectrally accurate for a periodic analytic integrand.
fn h2_quadrature(sys: &StateSpaceTF, points: usize) -> f64 {
    (0..points)
        .map(|k| {
            let w = 2.0 * std::f64::consts::PI * k as f64 / points as f64;
            sys.freq(w).unwrap().norm_squared()
        })
        .sum::<f64>()
        / points as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn gain_derivatives_match_finite_differences(seed in any::<u64>()) {
        let fam = random_family(seed);
        let exact = directional_derivatives(&fam, &[0.0], &[1.0]).unwrap();
        let fd = finite_diff_derivatives(&fam, &[0.0], &[1.0], None).unwrap();
        let err = exact.max_rel_diff(&fd);
        prop_assert!(err <= 1e-4, "relative error {}", err);
    }

    #[test]
    fn h2_lyapunov_matches_quadrature(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, m, p) = (rng.random_range(1..=5), rng.random_range(1..=3), rng.random_range(1..=3));
        let sys = StateSpaceTF::new(stable(&mut rng, n, 0.85), gauss(&mut rng, n, m), gauss(&mut rng, p, n), gauss(&mut rng, p, m)).unwrap();
        let lyap = h2_norm_sq(&sys).unwrap();
        let quad = h2_quadrature(&sys, 4096);
        prop_assert!((lyap - quad).abs() <= 1e-6 * lyap, "{} vs {}", lyap, quad);
    }

    #[test]
    fn datasets_are_reproducible(seed in any::<u64>(), replicate in 0u64..1000) {
        let fam = random_family(seed);
        let plant = fam.plant0.clone();
        let sol = synthesize(&plant).unwrap();
        let policy = PolicySpec::Optimal { eta: 1.0 }.resolve(&plant, &sol).unwrap();
        let sim = Simulator::new(&plant, &sol, &policy).unwrap();
        let a = sim.dataset(3, 20, seed, replicate).unwrap();
        let b = sim.dataset(3, 20, seed, replicate).unwrap();
        prop_assert_eq!(&a.trajectories, &b.trajectories);
        let c = sim.dataset(3, 20, seed, replicate + 1).unwrap();
        prop_assert_ne!(&a.trajectories, &c.trajectories);
    }
}
