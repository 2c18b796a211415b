use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::{DMatrix, DVector};

use driftburst::detector::null_path;
use driftburst::econometrics::ols;
use driftburst::preprocess::log_returns;
use driftburst::simulator::{simulate_day, SimScenario};
use driftburst::{AnalysisConfig, Date, DetectorSettings};

fn statistic(c: &mut Criterion) {
    let settings = DetectorSettings::from(&AnalysisConfig::default());
    let path = null_path(&settings, 1, 0).unwrap();
    c.bench_function("db_statistic_day_sweep", |b| {
        b.iter(|| settings.statistic(black_box(&path)).unwrap())
    });
    c.bench_function("log_returns_day", |b| b.iter(|| log_returns(black_box(&path)).unwrap()));
}

fn estimators(c: &mut Criterion) {
    let (n, k) = (5000, 12);
    let x = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { ((i * 31 + j * 17) % 97) as f64 / 97.0 });
    let y = DVector::from_fn(n, |i, _| ((i * 13) % 89) as f64 / 89.0);
    let names: Vec<String> = (0..k).map(|j| format!("x{j}")).collect();
    c.bench_function("ols_5000x12", |b| b.iter(|| ols(black_box(&x), black_box(&y), &names).unwrap()));
}

fn simulator(c: &mut Criterion) {
    let scn = SimScenario::parse(
        "seed = 3\ndates = 20130102\n\n[stock]\nid = AAA\n\n[burst]\nstock = AAA\ndate = 20130102\ntau = 12:00\nmagnitude = 0.02\nduration_s = 572\n",
    )
    .unwrap();
    let stock = scn.stocks[0].clone();
    let mut g = c.benchmark_group("simulator");
    g.sample_size(10);
    g.bench_function("simulate_day", |b| b.iter(|| simulate_day(&scn, &stock, Date(20130102))));
    g.finish();
}

criterion_group!(benches, statistic, estimators, simulator);
criterion_main!(benches);
