//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use drivesense_core::activity::{ActivityModel, GaussianNb};
use drivesense_core::corpus::{self, side_set, texting_corpus, trip_scenario, TRAINING_SEED};
use drivesense_core::evaluation::{self, EVAL_SEED};
use drivesense_core::features::Dct;
use drivesense_core::localize::{detect_engine_spike, detect_side, mirror_side_features, SpikeConfig};
use drivesense_core::metrics::compute_metrics;
use drivesense_core::orientation::{ekf_step, from_euler, rotate, EkfConfig, EulerAngles, OrientationState};
use drivesense_core::pipeline::{run_pipeline, Models, PipelineConfig};
use drivesense_core::scheduler::{
    detection_cycle_prob, expected_cost, plan_entry_sampling, poisson_pk, poisson_total_mass, BumpModel,
};
use drivesense_core::simulator::{generate, generate_keystrokes, EARTH_FIELD};
use drivesense_core::texting::{
    classify_texting, compute_stats, TextingClass, TextingConfig, DISTRACTED_MEAN_MS, NORMAL_MEAN_MS,
};
use drivesense_core::{ActivityLabel, SensorSample, Vec3, STANDARD_GRAVITY};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(f64::MIN_POSITIVE)
}

fn metrics_arithmetic() -> Outcome {
    let (tp, fp, fn_, tn) = (38usize, 46usize, 3usize, 250usize);
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for (n, p, t) in [(tp, true, true), (fp, true, false), (fn_, false, true), (tn, false, false)] {
        pred.extend(std::iter::repeat_n(p, n));
        truth.extend(std::iter::repeat_n(t, n));
    }
    let m = compute_metrics(&pred, &truth).map_err(|e| e.to_string())?;
    let precision = 100.0 * m.precision;
    let accuracy = 100.0 * m.accuracy;
    let footnoted = m.text().contains("84.46%");
    check(
        (precision - 45.24).abs() <= 0.01 && (accuracy - 85.46).abs() <= 0.01 && footnoted,
        format!("precision {precision:.4}%, accuracy {accuracy:.4}%, 84.46% footnote present: {footnoted}"),
    )
}

fn formula_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(EVAL_SEED);
    let mut worst: f64 = 0.0;
    let mut mass_err: f64 = 0.0;
    for _ in 0..20 {
        let m = BumpModel {
            lambda: rng.random_range(0.001..1.0),
            w: rng.random_range(0.5..120.0),
            s: rng.random_range(0.5..600.0),
            c: rng.random_range(0.01..10.0),
        };
        let k = rng.random_range(0..30u64);
        let tau = rng.random_range(0.5..100.0);
        let i = rng.random_range(1..50u32);
        let t = rng.random_range(0.0..m.w);
        let mu = m.lambda * tau;
        let factorial: f64 = (1..=k).map(|j| j as f64).product();
        let pk = mu.powi(k as i32) * (-mu).exp() / factorial;
        let cycle = (1.0 - (-m.w * m.lambda).exp()) * m.s / (m.s + m.w);
        let cost = cycle * m.c * ((i as f64 - 1.0) * (m.w + m.s) + t);
        for (got, want) in [
            (poisson_pk(m.lambda, tau, k), pk),
            (detection_cycle_prob(&m), cycle),
            (expected_cost(&m, i, t), cost),
        ] {
            worst = worst.max((got - want).abs() / want.abs());
        }
        mass_err = mass_err.max((poisson_total_mass(m.lambda, tau) - 1.0).abs());
    }
    check(worst <= 1e-12 && mass_err <= 1e-9, format!("max relative error {worst:.2e}, mass error {mass_err:.2e}"))
}

fn sampling_plan() -> Outcome {
    let plan = plan_entry_sampling(100.0, 20.0).map_err(|e| e.to_string())?;
    let prefix_ok = plan.len() >= 5 && plan[..5] == [40.0, 20.0, 10.0, 5.0, 2.5];
    let mut rng = ChaCha8Rng::seed_from_u64(EVAL_SEED + 1);
    let mut geometric = 0;
    for _ in 0..100 {
        let t = rng.random_range(1.0..10_000.0);
        let sigma = t * rng.random_range(0.0..0.99);
        let p = plan_entry_sampling(t, sigma).map_err(|e| e.to_string())?;
        let first_ok = p.first().is_none_or(|f| *f == (t - sigma) * 0.5);
        if first_ok && p.windows(2).all(|w| w[1] == w[0] * 0.5) {
            geometric += 1;
        }
    }
    check(prefix_ok && geometric == 100, format!("plan(100, 20) starts {:?}; geometric {geometric}/100", &plan[..plan.len().min(5)]))
}

fn dct_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(EVAL_SEED + 2);
    let (mut worst, mut parseval, mut signals) = (0.0f64, 0.0f64, 0);
    for n in [16usize, 64, 90, 256] {
        let plan = Dct::new(n).map_err(|e| e.to_string())?;
        for _ in 0..50 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
            let c = plan.forward(&x);
            let nf = n as f64;
            for (k, ck) in c.iter().enumerate() {
                let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
                let direct: f64 = x.iter().enumerate().map(|(i, v)| v * (PI * (i as f64 + 0.5) * k as f64 / nf).cos()).sum();
                worst = worst.max((ck - scale * direct).abs());
            }
            let et: f64 = x.iter().map(|v| v * v).sum();
            let ef: f64 = c.iter().map(|v| v * v).sum();
            parseval = parseval.max((et - ef).abs());
            signals += 1;
        }
    }
    check(
        worst <= 1e-9 && parseval <= 1e-9 && signals == 200,
        format!("{signals} signals, max oracle error {worst:.2e}, max Parseval gap {parseval:.2e}"),
    )
}

fn ekf_properties() -> Outcome {
    let cfg = EkfConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(EVAL_SEED + 3);
    let field = Vec3::from(EARTH_FIELD);
    let mut state = OrientationState::new(from_euler(&EulerAngles { pitch: 0.0, roll: 0.0, yaw: 0.0 }), 0, &cfg);
    let mut drift: f64 = 0.0;
    for i in 1..=100_000i64 {
        let gyro = Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let noise = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
        let truth = state.q.inverse();
        let sample = SensorSample {
            t_ms: i * 50,
            accel: truth * Vec3::new(0.0, 0.0, STANDARD_GRAVITY) + noise,
            mag: truth * field + noise,
            gyro,
        };
        state = ekf_step(&state, &sample, &cfg).map_err(|e| e.to_string())?;
        drift = drift.max((state.q.quaternion().norm() - 1.0).abs());
    }

    let mut settled: f64 = 0.0;
    for (pitch, roll) in [(10.0f64, 0.0f64), (0.0, 10.0), (-10.0, 0.0), (0.0, -10.0), (7.07, 7.07)] {
        let start = from_euler(&EulerAngles { pitch: pitch.to_radians(), roll: roll.to_radians(), yaw: 0.0 });
        let mut s = OrientationState::new(start, 0, &cfg);
        // Five seconds at the nominal rate.
        for i in 1..=100i64 {
            let sample = SensorSample { t_ms: i * 50, accel: Vec3::new(0.0, 0.0, STANDARD_GRAVITY), mag: field, gyro: Vec3::zeros() };
            s = ekf_step(&s, &sample, &cfg).map_err(|e| e.to_string())?;
        }
        let e = s.euler();
        settled = settled.max(e.pitch.to_degrees().abs()).max(e.roll.to_degrees().abs());
    }

    let mut iso: f64 = 0.0;
    for _ in 0..1000 {
        let q = from_euler(&EulerAngles {
            pitch: rng.random_range(-1.5..1.5),
            roll: rng.random_range(-PI..PI),
            yaw: rng.random_range(-PI..PI),
        });
        let v = Vec3::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        iso = iso.max((rotate(&q, &v).norm() - v.norm()).abs());
    }
    check(
        drift < 1e-9 && settled < 0.5 && iso <= 1e-9,
        format!("norm drift {drift:.2e}, tilt after 5 s {settled:.4} deg, isometry error {iso:.2e}"),
    )
}

fn nb_oracle() -> Outcome {
    const LABELS: [ActivityLabel; 4] =
        [ActivityLabel::Walking, ActivityLabel::SittingDown, ActivityLabel::Stairs, ActivityLabel::Other];
    let mut rng = ChaCha8Rng::seed_from_u64(EVAL_SEED + 4);
    let random_data = |rng: &mut ChaCha8Rng| {
        let classes = rng.random_range(2..=4);
        let dims = rng.random_range(1..6);
        let mut out: Vec<(Vec<f64>, ActivityLabel)> = Vec::new();
        for (c, label) in LABELS.iter().take(classes).enumerate() {
            let centre: Vec<f64> = (0..dims).map(|_| rng.random_range(-5.0..5.0) + c as f64).collect();
            for _ in 0..rng.random_range(2..15) {
                out.push((centre.iter().map(|m| m + rng.random_range(-2.0..2.0)).collect(), *label));
            }
        }
        (out, dims)
    };
    let train = |d: &[(Vec<f64>, ActivityLabel)]| -> Result<ActivityModel, String> {
        GaussianNb::train(d.iter().map(|(x, l)| (x.as_slice(), *l))).map_err(|e| e.to_string())
    };

    let mut worst_post: f64 = 0.0;
    for _ in 0..100 {
        let (data, dims) = random_data(&mut rng);
        let model = train(&data)?;
        let x: Vec<f64> = (0..dims).map(|_| rng.random_range(-6.0..8.0)).collect();
        let (_, post) = model.classify(&x).map_err(|e| e.to_string())?;
        let mut labels: Vec<ActivityLabel> = data.iter().map(|(_, l)| *l).collect();
        labels.sort();
        labels.dedup();
        let log_joint: Vec<f64> = labels
            .iter()
            .map(|l| {
                let rows: Vec<&Vec<f64>> = data.iter().filter(|(_, m)| m == l).map(|(x, _)| x).collect();
                let n = rows.len() as f64;
                let mut lp = (n / data.len() as f64).ln();
                for j in 0..dims {
                    let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
                    let var = (rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n).max(1e-6);
                    lp += -0.5 * (2.0 * PI * var).ln() - (x[j] - mean).powi(2) / (2.0 * var);
                }
                lp
            })
            .collect();
        let max = log_joint.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = log_joint.iter().map(|v| (v - max).exp()).sum();
        for (l, lj) in labels.iter().zip(&log_joint) {
            worst_post = worst_post.max((post.get(*l) - (lj - max).exp() / z).abs());
        }
    }

    let mut worst_stream: f64 = 0.0;
    for _ in 0..50 {
        let (data, _) = random_data(&mut rng);
        let mut seed_rows = Vec::new();
        let mut rest = Vec::new();
        for row in &data {
            if seed_rows.iter().filter(|(_, l): &&(Vec<f64>, ActivityLabel)| *l == row.1).count() < 2 {
                seed_rows.push(row.clone());
            } else {
                rest.push(row.clone());
            }
        }
        let mut streaming = train(&seed_rows)?;
        for (x, l) in &rest {
            streaming = streaming.update(x, *l).map_err(|e| e.to_string())?;
        }
        let batch = train(&data)?;
        for (a, b) in streaming.classes.iter().zip(&batch.classes) {
            worst_stream = worst_stream.max((a.prior - b.prior).abs());
            for j in 0..a.mean.len() {
                worst_stream = worst_stream.max((a.mean[j] - b.mean[j]).abs());
                worst_stream = worst_stream.max((a.m2[j] - b.m2[j]).abs() / b.m2[j].max(1.0));
            }
        }
    }
    check(
        worst_post <= 1e-9 && worst_stream <= 1e-9,
        format!("max posterior error {worst_post:.2e}, max streaming-vs-batch gap {worst_stream:.2e}"),
    )
}

fn models(config: &PipelineConfig) -> Result<Models, String> {
    corpus::train_models(TRAINING_SEED, config).map_err(|e| e.to_string())
}

fn activity_recognition() -> Outcome {
    let config = PipelineConfig::default();
    let m = models(&config)?;
    let cases = evaluation::activity_cases(EVAL_SEED, &config).map_err(|e| e.to_string())?;
    let e = evaluation::evaluate_activity(&m.activity, &cases, &config).map_err(|e| e.to_string())?;
    check(
        e.accuracy >= 0.85 && e.ev_fp_confirmed == 0 && e.ev_tp_confirmed == e.ev_tp_raw,
        format!(
            "accuracy {:.4} ({}/{}); entry TP {} -> {} confirmed, FP {} -> {} confirmed",
            e.accuracy, e.correct, e.total, e.ev_tp_raw, e.ev_tp_confirmed, e.ev_fp_raw, e.ev_fp_confirmed
        ),
    )
}

fn side_detection() -> Outcome {
    let config = PipelineConfig::default();
    let m = models(&config)?;
    let examples = side_set(EVAL_SEED + 1, 10, false, &config).map_err(|e| e.to_string())?;
    let e = evaluation::evaluate_side(&m.side, &examples).map_err(|e| e.to_string())?;
    let mut mirror_ok = 0;
    for (x, _) in &examples {
        let v = detect_side(&m.side, x).map_err(|e| e.to_string())?;
        let w = detect_side(&m.side, &mirror_side_features(x, config.coeffs)).map_err(|e| e.to_string())?;
        mirror_ok += usize::from(w.side == v.side.flipped() && w.pocket == v.pocket.flipped() && w.confidence == v.confidence);
    }
    check(
        e.total == 40 && e.accuracy >= 0.85 && mirror_ok == e.total,
        format!(
            "accuracy {:.4} ({}/{}), left precision {:.4}, window {} ms, exact mirror {mirror_ok}/{}",
            e.accuracy, e.correct, e.total, e.left_precision, config.window_ms, e.total
        ),
    )
}

fn row_detection() -> Outcome {
    let config = PipelineConfig::default();
    let rows = evaluation::evaluate_bump_rows(EVAL_SEED + 2, 20, 0.1, 120.0, &config).map_err(|e| e.to_string())?;
    let spike_cfg = SpikeConfig::default();
    let spike = |amp: f64| {
        let stream: Vec<(i64, f64)> = (0..300).map(|i| (i * 50, if (120..126).contains(&i) { 45.0 + amp } else { 45.0 })).collect();
        detect_engine_spike(&stream, &spike_cfg)
    };
    let (s3, s20) = (spike(3.0), spike(20.0));
    let mut rng = ChaCha8Rng::seed_from_u64(EVAL_SEED + 5);
    let mut false_fires = 0;
    for _ in 0..200 {
        let base = rng.random_range(20.0..80.0);
        let range = rng.random_range(0.0..1.99);
        let stream: Vec<(i64, f64)> = (0..400).map(|i| (i * 50, base + range * rng.random::<f64>())).collect();
        false_fires += usize::from(detect_engine_spike(&stream, &spike_cfg).detected);
    }
    let [[ff, fb], [bf, bb]] = rows.confusion;
    check(
        rows.confusion == [[20, 0], [0, 20]] && rows.undecided == 0 && s3.detected && s20.detected && false_fires == 0,
        format!(
            "confusion {ff}/{fb}/{bf}/{bb}, undecided {}; spikes +3 {} (amp {:.3}), +20 {} (amp {:.3}); flat-stream fires {false_fires}/200",
            rows.undecided, s3.detected, s3.amplitude, s20.detected, s20.amplitude
        ),
    )
}

fn texting() -> Outcome {
    let normal = compute_stats(&generate_keystrokes(TextingClass::Normal, 10_000, EVAL_SEED)).map_err(|e| e.to_string())?;
    let distracted =
        compute_stats(&generate_keystrokes(TextingClass::Distracted, 10_000, EVAL_SEED + 1)).map_err(|e| e.to_string())?;
    let cfg = TextingConfig::default();
    let mut errors = 0;
    for (class, log) in texting_corpus(EVAL_SEED + 4, 200) {
        let stats = compute_stats(&log).map_err(|e| e.to_string())?;
        errors += usize::from(classify_texting(&stats, &cfg).map_err(|e| e.to_string())?.class != class);
    }
    let means_ok = rel_close(normal.mean_interval_ms, NORMAL_MEAN_MS, 0.03) && rel_close(distracted.mean_interval_ms, DISTRACTED_MEAN_MS, 0.03);
    check(
        means_ok && errors <= 2 && (normal.frac_under_800ms - 0.9).abs() <= 0.03 && distracted.frac_under_800ms < 0.7,
        format!(
            "means {:.2}/{:.2} ms, under 800 ms {:.3}/{:.3}, corpus errors {errors}/20",
            normal.mean_interval_ms, distracted.mean_interval_ms, normal.frac_under_800ms, distracted.frac_under_800ms
        ),
    )
}

fn end_to_end() -> Outcome {
    let config = PipelineConfig::default();
    let m = models(&config)?;
    let drive_s = 180.0;
    let e = evaluation::evaluate_end_to_end(&m, EVAL_SEED + 3, drive_s, &config).map_err(|e| e.to_string())?;
    let bound = config.window_ms + 2 * config.step_ms;
    let late = e.trips.iter().filter(|t| t.latency_ms.is_none_or(|l| l > bound)).count();
    let peak = e.trips.iter().map(|t| t.max_buffered).max().unwrap_or(0);

    // Same trip, ten times longer.
    let (spec, short) = corpus::trip_corpus(EVAL_SEED + 3, drive_s).swap_remove(0);
    let long_drive = 10.0 * short.duration_s() - (short.duration_s() - drive_s);
    let long = trip_scenario(&corpus::TripSpec { drive_s: long_drive, ..spec }, short.seed);
    let buffered = |s| -> Result<usize, String> {
        let (trace, _) = generate(s).map_err(|e| e.to_string())?;
        Ok(run_pipeline(&trace, None, &m, &config).map_err(|e| e.to_string())?.max_buffered)
    };
    let (b_short, b_long) = (buffered(&short)?, buffered(&long)?);
    let r = &e.metrics;
    check(
        e.trips.len() == 39 && r.precision >= 0.90 && r.accuracy >= 0.85 && late == 0 && b_short == b_long,
        format!(
            "{} trips, tp {} fp {} fn {} tn {}, precision {:.4}, accuracy {:.4}; max latency {} ms (bound {bound}), late {late}; peak buffer {peak}, {} vs {} samples at 1x/10x length",
            e.trips.len(),
            r.tp,
            r.fp,
            r.fn_,
            r.tn,
            r.precision,
            r.accuracy,
            e.max_latency_ms.map_or("n/a".into(), |l| l.to_string()),
            b_short,
            b_long
        ),
    )
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<(Vec<u8>, Option<i32>), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_drivesense"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    Ok((out.stdout, out.status.code()))
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let commands: &[&[&str]] = &[
        &["train", "--model", "model.toml"],
        &["simulate", "--seed", "9", "--drive-s", "60", "--out", "trip.csv", "--keystrokes", "keys.csv", "--typing", "distracted", "--save-scenario", "scenario.toml"],
        &["simulate", "--scenario", "scenario.toml", "--format", "jsonl"],
        &["ingest", "--trace", "trip.csv", "--resample-hz", "25", "--out", "resampled.jsonl", "--report", "json"],
        &["detect", "--trace", "trip.csv", "--model", "model.toml", "--keystrokes", "keys.csv", "--report", "json"],
        &["detect", "--trace", "trip.csv", "--model", "model.toml"],
        &["texting", "--keystrokes", "keys.csv", "--report", "json"],
        &["schedule", "--seed", "4", "--report", "json"],
        &["evaluate", "--counts", "38,46,3,250"],
        &["evaluate", "--suite", "trips", "--drive-s", "30", "--model", "model.toml", "--report", "json"],
        &["evaluate", "--suite", "activity"],
        &["evaluate", "--suite", "side", "--report", "json"],
        &["evaluate", "--suite", "rows"],
    ];
    let files = ["model.toml", "trip.csv", "keys.csv", "scenario.toml", "resampled.jsonl"];
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let dir = root.path().join(name);
        std::fs::create_dir(&dir).map_err(|e| e.to_string())?;
        let mut outputs = Vec::new();
        for args in commands {
            let (stdout, code) = run_cli(&dir, args)?;
            if code != Some(0) {
                return Err(format!("`drivesense {}` exited with {code:?}", args.join(" ")));
            }
            outputs.push(stdout);
        }
        for f in files {
            outputs.push(std::fs::read(dir.join(f)).map_err(|e| format!("{f}: {e}"))?);
        }
        runs.push(outputs);
    }
    let differing: Vec<String> = runs[0]
        .iter()
        .zip(&runs[1])
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(i, _)| commands.get(i).map_or_else(|| files[i - commands.len()].to_string(), |c| c.join(" ")))
        .collect();
    check(
        differing.is_empty(),
        format!("{} commands and {} files compared across two runs; differing: {differing:?}", commands.len(), files.len()),
    )
}

struct Criterion {
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { name: "metrics arithmetic", limit: Duration::from_secs(1), run: metrics_arithmetic },
        Criterion { name: "formula fidelity", limit: Duration::from_secs(1), run: formula_fidelity },
        Criterion { name: "sampling plan", limit: Duration::from_secs(1), run: sampling_plan },
        Criterion { name: "DCT oracle equivalence", limit: Duration::from_secs(10), run: dct_oracle },
        Criterion { name: "EKF properties", limit: Duration::from_secs(30), run: ekf_properties },
        Criterion { name: "naive Bayes oracle", limit: Duration::from_secs(10), run: nb_oracle },
        Criterion { name: "activity recognition", limit: Duration::from_secs(120), run: activity_recognition },
        Criterion { name: "side detection", limit: Duration::from_secs(120), run: side_detection },
        Criterion { name: "row detection", limit: Duration::from_secs(60), run: row_detection },
        Criterion { name: "texting", limit: Duration::from_secs(30), run: texting },
        Criterion { name: "end-to-end", limit: Duration::from_secs(300), run: end_to_end },
        Criterion { name: "determinism", limit: Duration::from_secs(600), run: determinism },
    ];
    let mut failed = 0;
    for (i, c) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(d) if elapsed <= c.limit => (true, d),
            Ok(d) => (false, format!("{d}; took longer than {:?}", c.limit)),
            Err(d) => (false, d),
        };
        failed += usize::from(!pass);
        println!(
            "criterion {:>2} {} {}: {detail} [{:.2} s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            c.name,
            elapsed.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
