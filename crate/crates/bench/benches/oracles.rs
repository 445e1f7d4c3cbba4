use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use descent_lab::{airy_deformed, build_ensemble, evaluate_psi, rho, tau, BumpProfile};

fn soliton(c: &mut Criterion) {
    let mut g = c.benchmark_group("evaluate_psi");
    for n in [4, 16, 64] {
        let ens = build_ensemble(1.0, n).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &ens, |b, ens| {
            b.iter(|| evaluate_psi(ens, black_box(0.7), black_box(0.1)).unwrap())
        });
    }
    g.finish();
}

fn airy(c: &mut Criterion) {
    c.bench_function("airy_deformed(2)", |b| {
        b.iter(|| airy_deformed(black_box(2.0)).unwrap())
    });
}

fn wkb(c: &mut Criterion) {
    let u = BumpProfile::sech2();
    c.bench_function("tau(0.5)", |b| b.iter(|| tau(black_box(0.5), &u).unwrap()));
    c.bench_function("rho(0.5)", |b| b.iter(|| rho(black_box(0.5), &u).unwrap()));
}

criterion_group!(benches, soliton, airy, wkb);
criterion_main!(benches);
