use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use descent_lab::potential::{kernel_matrix, MeshPlan};
use descent_lab::{maximin_search, solve_equilibrium, SolverOptions};
use descent_lab_bench::{nls, small_search, test_arc};

fn kernel_assembly(c: &mut Criterion) {
    let arc = test_arc(17);
    let mut g = c.benchmark_group("kernel_matrix");
    for n in [100, 200, 400] {
        let mu = arc.mesh(&MeshPlan::proportional(&arc, n)).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &mu, |b, mu| {
            b.iter(|| kernel_matrix(black_box(mu)).unwrap())
        });
    }
    g.finish();
}

fn equilibrium(c: &mut Criterion) {
    let arc = test_arc(17);
    let field = nls(0.2);
    let mut g = c.benchmark_group("solve_equilibrium");
    g.sample_size(20);
    for n in [100, 200, 400] {
        let opts = SolverOptions {
            nodes: n,
            ..Default::default()
        };
        g.bench_with_input(BenchmarkId::from_parameter(n), &opts, |b, opts| {
            b.iter(|| solve_equilibrium(&arc, &field, opts).unwrap())
        });
    }
    g.finish();
}

fn search(c: &mut Criterion) {
    let arc = test_arc(9);
    let field = nls(0.4);
    let opts = small_search(80);
    let mut g = c.benchmark_group("maximin_search");
    g.sample_size(10);
    g.bench_function("two_modes_80_nodes", |b| {
        b.iter(|| maximin_search(&arc, &field, &opts).unwrap())
    });
    g.finish();
}

criterion_group!(benches, kernel_assembly, equilibrium, search);
criterion_main!(benches);
