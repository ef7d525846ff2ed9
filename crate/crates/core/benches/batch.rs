use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use sparse_edge::corrections::compute_z;
use sparse_edge::ensemble::{EnsembleSpec, Family};
use sparse_edge::experiments::{rigidity_run, RunOptions};
use sparse_edge::par::{map_indices, Workers};
use sparse_edge::scm::SelfConsistentModel;
use sparse_edge::spectral::{top_eigenvalues, EigenMethod};

const BATCH: usize = 64;

fn paths() -> [(&'static str, Workers); 2] {
    [("sequential", Workers::SEQUENTIAL), ("parallel", Workers(0))]
}

/// Sample, corrections, model and top eigenvalue for a batch of indices.
fn pipeline(c: &mut Criterion) {
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    for n in [500, 1000] {
        let spec = EnsembleSpec::new(n, 0.2, Family::CenteredBernoulli, 11).unwrap();
        for (name, workers) in paths() {
            group.bench_with_input(BenchmarkId::new(name, n), &spec, |bench, spec| {
                bench.iter(|| {
                    map_indices(BATCH, workers, |i| {
                        let sample = spec.sample(i as u64);
                        let z = compute_z(&sample, 2, None).unwrap();
                        let edge = SelfConsistentModel::build(&z.z, Default::default())
                            .map(|m| m.edge_series())
                            .unwrap_or(f64::NAN);
                        let top = top_eigenvalues(&sample, 1, EigenMethod::Lanczos).unwrap()[0];
                        black_box(top - edge)
                    })
                })
            });
        }
    }
    group.finish();
}

/// Correction terms alone, the cheapest per-sample stage.
fn corrections(c: &mut Criterion) {
    let mut group = c.benchmark_group("corrections");
    let spec = EnsembleSpec::new(2000, 0.2, Family::CenteredBernoulli, 5).unwrap();
    let samples: Vec<_> = (0..BATCH as u64).map(|i| spec.sample(i)).collect();
    for (name, workers) in paths() {
        group.bench_function(name, |bench| {
            bench.iter(|| map_indices(samples.len(), workers, |i| compute_z(&samples[i], 2, None).unwrap().x))
        });
    }
    group.finish();
}

/// A full rigidity report, including aggregation.
fn rigidity(c: &mut Criterion) {
    let mut group = c.benchmark_group("rigidity_run");
    group.sample_size(10);
    let spec = EnsembleSpec::new(500, 0.2, Family::CenteredBernoulli, 3).unwrap();
    for (name, workers) in paths() {
        let options = RunOptions {
            workers,
            ..RunOptions::default()
        };
        group.bench_function(name, |bench| bench.iter(|| rigidity_run(&spec, 50, 1, &options).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, pipeline, corrections, rigidity);
criterion_main!(benches);
