use slp_bench::{bench_instance, N_GRID, N_USERS};
use slp_core::precoders::Scheme;

#[test]
fn instances_are_deterministic() {
    let a = bench_instance(32, N_USERS);
    let b = bench_instance(32, N_USERS);
    assert_eq!(a.h, b.h);
    assert_eq!(a.cir.indices, b.cir.indices);
}

#[test]
fn every_scheme_runs_on_the_smallest_array() {
    let inst = bench_instance(N_GRID[0], N_USERS);
    for s in Scheme::ALL {
        let out = s.precode(&inst.input()).unwrap();
        assert!(out.x.norm_squared() <= inst.p_t * (1.0 + 1e-8), "{s}");
    }
}
