use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use slp_bench::{bench_instance, N_GRID, N_USERS};
use slp_core::precoders::Scheme;

fn precoders(c: &mut Criterion) {
    for scheme in Scheme::ALL {
        let mut group = c.benchmark_group(scheme.name());
        group.sample_size(10);
        for n in N_GRID {
            let inst = bench_instance(n, N_USERS);
            group.bench_with_input(BenchmarkId::from_parameter(n), &inst, |b, inst| {
                b.iter(|| scheme.precode(&inst.input()).unwrap())
            });
        }
        group.finish();
    }
}

criterion_group!(benches, precoders);
criterion_main!(benches);
