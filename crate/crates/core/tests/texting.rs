use drivesense_core::corpus::texting_corpus;
use drivesense_core::simulator::generate_keystrokes;
use drivesense_core::texting::{classify_texting, compute_stats, TextingClass, TextingConfig};
use drivesense_core::trace_io::{KeyEvent, KeyKind, KeystrokeLog};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn corpus_has_at_most_two_errors() {
    let cfg = TextingConfig::default();
    let errors = texting_corpus(71, 200)
        .iter()
        .filter(|(class, log)| classify_texting(&compute_stats(log).unwrap(), &cfg).unwrap().class != *class)
        .count();
    assert!(errors <= 2, "{errors} errors");
}

#[test]
fn distracted_typing_is_burstier_than_uniform() {
    let distracted = compute_stats(&generate_keystrokes(TextingClass::Distracted, 2000, 73)).unwrap();
    let mean = distracted.mean_interval_ms;
    let mut rng = ChaCha8Rng::seed_from_u64(79);
    let mut t = 0i64;
    let events = (0..2000)
        .map(|_| {
            t += rng.random_range(0.5 * mean..1.5 * mean).round() as i64;
            KeyEvent { t_ms: t, kind: KeyKind::Letter }
        })
        .collect();
    let uniform = compute_stats(&KeystrokeLog { events }).unwrap();
    assert!((uniform.mean_interval_ms - mean).abs() < 0.05 * mean);
    assert!(distracted.sd_interval_ms > 1.5 * uniform.sd_interval_ms);
}

fn shifted(log: &KeystrokeLog, offset: i64, stretch: i64) -> KeystrokeLog {
    let mut letters = 0i64;
    let events = log
        .events
        .iter()
        .map(|e| {
            let out = KeyEvent { t_ms: e.t_ms + offset + letters * stretch, ..*e };
            if e.kind == KeyKind::Letter {
                letters += 1;
            }
            out
        })
        .collect();
    KeystrokeLog { events }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stats_ignore_time_translation(seed in any::<u64>(), distracted in any::<bool>(), offset in 0i64..10_000_000) {
        let class = if distracted { TextingClass::Distracted } else { TextingClass::Normal };
        let log = generate_keystrokes(class, 60, seed);
        prop_assert_eq!(compute_stats(&log).unwrap(), compute_stats(&shifted(&log, offset, 0)).unwrap());
    }

    #[test]
    fn slower_typing_never_turns_normal(seed in any::<u64>(), distracted in any::<bool>(), extra in 1i64..400) {
        let class = if distracted { TextingClass::Distracted } else { TextingClass::Normal };
        let cfg = TextingConfig::default();
        let log = generate_keystrokes(class, 40, seed);
        let before = classify_texting(&compute_stats(&log).unwrap(), &cfg).unwrap().class;
        let after = classify_texting(&compute_stats(&shifted(&log, 0, extra)).unwrap(), &cfg).unwrap().class;
        if before == TextingClass::Distracted {
            prop_assert_eq!(after, TextingClass::Distracted);
        }
    }
}
