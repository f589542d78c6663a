use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fedimt::estimator::probe_auxiliary;
use fedimt::exp::{parse_config_str, prepare, ExperimentConfig};
use fedimt::nn::LossSpec;
use fedimt::parallel::Execution;
use fedimt::sim::{local_update, Experiment};

fn config() -> ExperimentConfig {
    parse_config_str(
        "synthetic_counts = [600, 540, 480, 420, 360, 300, 240, 180, 120, 60]\nsynthetic_dim = 32\n\
         hidden_layers = [64]\nnum_clients = 50\nselection_rate = 0.3\nlocal_epochs = 2\nlr = 0.01",
        std::path::Path::new("."),
    )
    .unwrap()
}

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn bench_round(c: &mut Criterion) {
    let base = config();
    let mut group = c.benchmark_group("fedimt_round");
    group.sample_size(20);
    for (name, exec) in MODES {
        let mut cfg = base.clone();
        cfg.fl.execution = exec;
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter_batched(
                || {
                    let p = prepare(&cfg, 1).unwrap();
                    Experiment::new(cfg.fl.clone(), p.model, p.clients, p.test, p.aux, 1).unwrap()
                },
                |mut exp| exp.run_round().unwrap(),
                criterion::BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

fn bench_local_updates(c: &mut Criterion) {
    let cfg = config();
    let p = prepare(&cfg, 1).unwrap();
    let ids: Vec<usize> = (0..15).collect();
    let mut group = c.benchmark_group("local_updates");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                exec.map(&ids, |&id| {
                    let client = &p.clients[id];
                    let slice = fedimt::data::TrainingSlice::whole(client);
                    local_update(client, &slice, &p.model, &cfg.fl, &LossSpec::PlainCe, 1, 1)
                        .unwrap()
                })
            })
        });
    }
    group.finish();
}

fn bench_probe(c: &mut Criterion) {
    let cfg = config();
    let p = prepare(&cfg, 1).unwrap();
    let aux = p.aux.unwrap();
    let mut group = c.benchmark_group("class_probes");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| probe_auxiliary(&p.model, &aux, &LossSpec::PlainCe, 1e-3, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_round, bench_local_updates, bench_probe);
criterion_main!(benches);
