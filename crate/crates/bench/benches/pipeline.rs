use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use drivesense_core::corpus::{train_models, trip_scenario, TripSpec, TRAINING_SEED};
use drivesense_core::features::Dct;
use drivesense_core::localize::{Pocket, Row, Side};
use drivesense_core::orientation::{ekf_step, EkfConfig, OrientationState};
use drivesense_core::pipeline::{run_pipeline, PipelineConfig};
use drivesense_core::scheduler::DEFAULT_BUMP_RATE;
use drivesense_core::simulator::{generate, Placement, EARTH_FIELD};
use drivesense_core::{SensorSample, Vec3, STANDARD_GRAVITY};
use std::hint::black_box;

fn dct(c: &mut Criterion) {
    let plan = Dct::new(90).unwrap();
    let x: Vec<f64> = (0..90).map(|i| (i as f64 * 0.37).sin()).collect();
    c.bench_function("dct_90", |b| b.iter(|| plan.forward(black_box(&x))));
}

fn ekf(c: &mut Criterion) {
    let cfg = EkfConfig::default();
    let state = OrientationState::new(Default::default(), 0, &cfg);
    let sample = SensorSample {
        t_ms: 50,
        accel: Vec3::new(0.1, -0.2, STANDARD_GRAVITY),
        mag: Vec3::from(EARTH_FIELD),
        gyro: Vec3::new(0.01, 0.02, -0.03),
    };
    c.bench_function("ekf_step", |b| b.iter(|| ekf_step(black_box(&state), black_box(&sample), &cfg).unwrap()));
}

fn pipeline(c: &mut Criterion) {
    let config = PipelineConfig::default();
    let models = train_models(TRAINING_SEED, &config).unwrap();
    let spec = TripSpec {
        side: Side::Left,
        seat: Row::Front,
        pocket: Pocket::LeftPocket,
        placement: Placement::Pocket,
        drive_s: 120.0,
        bump_rate: DEFAULT_BUMP_RATE,
    };
    let (trace, _) = generate(&trip_scenario(&spec, 3)).unwrap();

    let fv: Vec<f64> = vec![0.1; 2 * config.coeffs + 3];
    c.bench_function("classify_activity", |b| b.iter(|| models.activity.classify(black_box(&fv)).unwrap()));

    let mut group = c.benchmark_group("pipeline");
    group.throughput(Throughput::Elements(trace.samples.len() as u64));
    group.sample_size(20);
    group.bench_function("trip", |b| {
        b.iter_batched(|| models.clone(), |m| run_pipeline(&trace, None, &m, &config).unwrap(), BatchSize::LargeInput)
    });
    group.finish();
}

criterion_group!(benches, dct, ekf, pipeline);
criterion_main!(benches);
