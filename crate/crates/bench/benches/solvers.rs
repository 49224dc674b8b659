use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use lqgh_bench::{chain_family, chain_plant};
use lqgh_core::hardness::{fisher_rate, hessian_form_strict};
use lqgh_core::matsolve::{hinf_norm, solve_dare, solve_dlyap};
use lqgh_core::youla::coprime_factorization;
use lqgh_core::{synthesize, PolicySpec};

const ORDERS: [usize; 3] = [2, 8, 24];

fn riccati(c: &mut Criterion) {
    let mut g = c.benchmark_group("dare");
    for n in ORDERS {
        let p = chain_plant(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &p, |bch, p| {
            bch.iter(|| solve_dare(black_box(&p.a), &p.b, &p.q, &p.r).unwrap())
        });
    }
    g.finish();
}

fn lyapunov(c: &mut Criterion) {
    let mut g = c.benchmark_group("dlyap");
    for n in ORDERS {
        let p = chain_plant(n);
        let sol = synthesize(&p).unwrap();
        let acl = &p.a + &p.b * &sol.f;
        g.bench_with_input(BenchmarkId::from_parameter(n), &acl, |bch, a| {
            bch.iter(|| solve_dlyap(black_box(a), &p.sigma_w).unwrap())
        });
    }
    g.finish();
}

fn hinf(c: &mut Criterion) {
    let mut g = c.benchmark_group("hinf");
    for n in ORDERS {
        let p = chain_plant(n);
        // Stable right factor M of the plant.
        let m = coprime_factorization(&p, &synthesize(&p).unwrap()).m;
        g.bench_with_input(BenchmarkId::from_parameter(n), &m, |bch, sys| {
            bch.iter(|| hinf_norm(black_box(sys), 1e-9).unwrap())
        });
    }
    g.finish();
}

fn hardness(c: &mut Criterion) {
    let mut g = c.benchmark_group("hardness");
    g.sample_size(20);
    for n in ORDERS {
        let fam = chain_family(n);
        g.bench_with_input(BenchmarkId::new("hessian", n), &fam, |bch, f| {
            bch.iter(|| hessian_form_strict(black_box(f), &[1.0], &[1.0]).unwrap())
        });
        let policy = PolicySpec::Optimal { eta: 1.0 };
        g.bench_with_input(BenchmarkId::new("fisher_rate", n), &fam, |bch, f| {
            bch.iter(|| fisher_rate(black_box(f), &[1.0], &policy, &[1.0]).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, riccati, lyapunov, hinf, hardness);
criterion_main!(benches);
