use drivesense_core::activity::ActivityModel;
use drivesense_core::model_file::{parse_bundle, parse_model, serialize_bundle, serialize_model, ModelBundle};
use drivesense_core::scheduler::table_chain;
use drivesense_core::simulator::{generate, NoiseConfig, Scenario, Segment, SegmentKind};
use drivesense_core::localize::Pocket;
use drivesense_core::trace_io::{
    parse_keystrokes, parse_trace, resample, serialize_keystrokes, serialize_trace, KeyEvent, KeyKind, KeystrokeLog,
    TraceFormat,
};
use drivesense_core::types::{ActivityLabel, LabelSpan, SensorSample, Trace};
use drivesense_core::Error;
use proptest::prelude::*;

fn channel() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e3..1e3f64,
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        Just(0.0),
        Just(-0.0),
    ]
}

fn trace_strategy(max_len: usize) -> impl Strategy<Value = Trace> {
    (
        prop::collection::vec((1i64..200, prop::array::uniform9(channel())), 1..max_len),
        0i64..10_000,
        prop_oneof![Just(20.0), 1.0..200.0f64],
    )
        .prop_map(|(rows, t0, rate)| {
            let mut t = t0;
            let samples = rows
                .into_iter()
                .map(|(dt, c)| {
                    t += dt;
                    SensorSample::from_channels(t, c)
                })
                .collect::<Vec<_>>();
            let mut trace = Trace::new(samples);
            trace.nominal_rate_hz = rate;
            trace
        })
}

fn bits(t: &Trace) -> Vec<(i64, [u64; 9])> {
    t.samples.iter().map(|s| (s.t_ms, s.channels().map(f64::to_bits))).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip(trace in trace_strategy(300)) {
        let back = parse_trace(&serialize_trace(&trace, TraceFormat::Csv), TraceFormat::Csv).unwrap();
        prop_assert_eq!(bits(&back), bits(&trace));
        prop_assert_eq!(back.nominal_rate_hz, trace.nominal_rate_hz);
    }

    #[test]
    fn jsonl_round_trip(trace in trace_strategy(300)) {
        let back = parse_trace(&serialize_trace(&trace, TraceFormat::Jsonl), TraceFormat::Jsonl).unwrap();
        prop_assert_eq!(bits(&back), bits(&trace));
        prop_assert_eq!(back.nominal_rate_hz, trace.nominal_rate_hz);
    }

    #[test]
    fn keystroke_round_trip(steps in prop::collection::vec((1i64..3000, any::<bool>()), 0..200)) {
        let mut t = 0;
        let events = steps
            .into_iter()
            .map(|(dt, letter)| {
                t += dt;
                KeyEvent { t_ms: t, kind: if letter { KeyKind::Letter } else { KeyKind::Backspace } }
            })
            .collect();
        let log = KeystrokeLog { events };
        prop_assert_eq!(parse_keystrokes(&serialize_keystrokes(&log)).unwrap(), log);
    }

    #[test]
    fn model_round_trip_is_canonical(
        data in prop::collection::vec((prop::collection::vec(-1e6..1e6f64, 3), 0usize..3), 12..40)
    ) {
        let labels = [ActivityLabel::Walking, ActivityLabel::Stairs, ActivityLabel::Other];
        let mut examples: Vec<(Vec<f64>, ActivityLabel)> =
            data.into_iter().map(|(x, l)| (x, labels[l])).collect();
        for (i, l) in labels.iter().enumerate() {
            examples.push((vec![i as f64; 3], *l));
            examples.push((vec![i as f64 + 0.5; 3], *l));
        }
        let m = ActivityModel::train(examples.iter().map(|(x, l)| (x.as_slice(), *l))).unwrap();
        let bytes = serialize_model(&m);
        let back = parse_model(&bytes).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(serialize_model(&back), bytes);
    }

    #[test]
    fn resample_lands_on_grid(jitter in prop::collection::vec(-3i64..=3, 50..300), rate in prop_oneof![Just(20.0), Just(10.0), Just(25.0)]) {
        let mut t = 0;
        let samples: Vec<SensorSample> = jitter
            .iter()
            .map(|j| {
                t += 50 + j;
                SensorSample::from_channels(t, [t as f64; 9])
            })
            .collect();
        let out = resample(&Trace::new(samples.clone()), rate).unwrap();
        let period = (1000.0 / rate) as i64;
        prop_assert_eq!(out.samples[0].t_ms, samples[0].t_ms);
        prop_assert!(out.samples.windows(2).all(|w| w[1].t_ms - w[0].t_ms == period));
        prop_assert!(out.samples.last().unwrap().t_ms <= samples.last().unwrap().t_ms);
        // Channels equal to time interpolate exactly back to time.
        for s in &out.samples {
            prop_assert!((s.accel.x - s.t_ms as f64).abs() < 1e-9);
        }
    }
}

#[test]
fn simulated_trace_with_labels_round_trips() {
    let mut s = Scenario::new(
        3,
        Pocket::LeftPocket,
        vec![Segment::new(SegmentKind::Idle, 5.0), Segment::new(SegmentKind::Walk, 45.0)],
    );
    s.noise = NoiseConfig::default();
    let (trace, _) = generate(&s).unwrap();
    assert_eq!(trace.samples.len(), 1001);
    for format in [TraceFormat::Csv, TraceFormat::Jsonl] {
        let back = parse_trace(&serialize_trace(&trace, format), format).unwrap();
        assert_eq!(back, trace);
    }
}

#[test]
fn labels_survive_csv() {
    let mut trace = Trace::new((0..20).map(|i| SensorSample::from_channels(i * 50, [0.0; 9])).collect());
    trace.labels = vec![
        LabelSpan { start_ms: 0, end_ms: 400, label: ActivityLabel::Walking },
        LabelSpan { start_ms: 450, end_ms: 950, label: ActivityLabel::EnteringVehicle },
    ];
    let back = parse_trace(&serialize_trace(&trace, TraceFormat::Csv), TraceFormat::Csv).unwrap();
    assert_eq!(back.labels, trace.labels);
}

#[test]
fn malformed_row_reports_its_line() {
    let text = "t_ms,ax,ay,az,mx,my,mz,gx,gy,gz\n0,0,0,9.81,30,0,40,0,0,0\n50,0,0,9.81,30,0\n";
    match parse_trace(text.as_bytes(), TraceFormat::Csv) {
        Err(Error::MalformedRecord { line, .. }) => assert_eq!(line, 3),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn bundle_round_trip() {
    let examples: Vec<(Vec<f64>, ActivityLabel)> = (0..6)
        .map(|i| (vec![i as f64, (i * i) as f64], if i < 3 { ActivityLabel::Walking } else { ActivityLabel::Standing }))
        .collect();
    let bundle = ModelBundle {
        activity: Some(ActivityModel::train(examples.iter().map(|(x, l)| (x.as_slice(), *l))).unwrap()),
        side: None,
        transitions: Some(table_chain()),
    };
    let bytes = serialize_bundle(&bundle);
    assert_eq!(parse_bundle(&bytes).unwrap(), bundle);
}
