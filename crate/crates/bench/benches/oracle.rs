use criterion::{criterion_group, criterion_main, Criterion};
use hexanneal::exact::quadratized_minimum;
use hexanneal::{brute_force, build_lattice, fit_scaling, generate_instance, quadratize, select_best_fit, spin_to_binary, FitFamily};
use hexanneal_bench::scaling_points;

fn oracles(c: &mut Criterion) {
    let graph = build_lattice(1, 2).unwrap();
    let model = generate_instance(&graph, true, 11);
    c.bench_function("brute_force/n21_cubic", |b| b.iter(|| brute_force(&model, false).unwrap()));
    let q = quadratize(&spin_to_binary(&model), model.n as f64).unwrap();
    c.bench_function("quadratized_minimum/n21", |b| b.iter(|| quadratized_minimum(&q).unwrap()));
}

fn fits(c: &mut Criterion) {
    let points = scaling_points();
    c.bench_function("fit/exponential", |b| b.iter(|| fit_scaling(&points, FitFamily::Exponential).unwrap()));
    c.bench_function("fit/select_best", |b| b.iter(|| select_best_fit(&points).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = oracles, fits
}
criterion_main!(benches);
