//! Benchmarks for the solver kernels and a full federated run.

use std::hint::black_box;

use criterion::{BenchmarkId, Criterion};
use fedgl::client::{initial_graph, solve_local_to_convergence, ClientState, DEFAULT_MAX_ITER, DEFAULT_TOL};
use fedgl::datagen::{derive_seed, generate_rbf_graph, make_family, sample_smooth_signals};
use fedgl::federation::{run_federation, FederationOptions, Scheduler};
use fedgl::objective::{local_gradient, pairwise_distance};
use fedgl::{ClientUpdateMsg, HyperParams, Matrix, ServerState};

/// Signals of a synthetic benchmark instance with `clients` clients of `n` samples.
pub fn fixture(d: usize, clients: usize, n: usize, seed: u64) -> Vec<Matrix> {
    let g0 = generate_rbf_graph(d, 0.5, 0.7, derive_seed(seed, 0)).expect("valid graph parameters");
    let family = make_family(&g0, clients, 0.5, derive_seed(seed, 1)).expect("nonempty base graph");
    family
        .locals_truth
        .iter()
        .enumerate()
        .map(|(i, g)| sample_smooth_signals(g, n, 0.1, derive_seed(seed, 10 + i as u64)).expect("valid signal parameters"))
        .collect()
}

pub fn benchmarks(c: &mut Criterion) {
    let hp = HyperParams::default();

    let mut group = c.benchmark_group("kernels");
    for d in [20, 50, 100] {
        let x = fixture(d, 1, 100, 1).remove(0);
        let z = pairwise_distance(&x).unwrap();
        let w = initial_graph(d);
        group.bench_with_input(BenchmarkId::new("pairwise_distance", d), &x, |b, x| {
            b.iter(|| pairwise_distance(black_box(x)))
        });
        group.bench_with_input(BenchmarkId::new("local_gradient", d), &d, |b, _| {
            b.iter(|| local_gradient(black_box(w.weights()), &z, &hp))
        });
        let mut client = ClientState::init(0, &x, &w).unwrap();
        client.receive(&w, 0.2).unwrap();
        group.bench_with_input(BenchmarkId::new("inner_step", d), &d, |b, _| b.iter(|| client.inner_step(&hp)));
    }
    group.finish();

    let mut group = c.benchmark_group("server");
    for clients in [5, 20] {
        let xs = fixture(20, clients, 100, 2);
        let w0 = initial_graph(20);
        let updates: Vec<ClientUpdateMsg> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let mut s = ClientState::init(i, x, &w0).unwrap();
                s.local_round(&w0, 1.0 / clients as f64, &hp).unwrap()
            })
            .collect();
        group.bench_with_input(BenchmarkId::new("server_round", clients), &updates, |b, updates| {
            b.iter(|| {
                let mut server = ServerState::new(clients, w0.clone()).unwrap();
                server.server_round(black_box(updates), &hp).unwrap()
            })
        });
    }
    group.finish();

    let mut group = c.benchmark_group("end_to_end");
    group.sample_size(10);
    let xs = fixture(20, 5, 100, 3);
    for scheduler in [Scheduler::Sequential, Scheduler::Parallel] {
        let options = FederationOptions { scheduler, ..Default::default() };
        group.bench_function(BenchmarkId::new("federation_t50", format!("{scheduler:?}")), |b| {
            b.iter(|| run_federation(black_box(&xs), &hp, options.clone()).unwrap())
        });
    }
    let z = pairwise_distance(&xs[0]).unwrap();
    group.bench_function("local_solve_to_convergence", |b| {
        b.iter(|| solve_local_to_convergence(&z, &initial_graph(20), 0.0, &hp, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap())
    });
    group.finish();
}
