//! Seeded synthetic corpora for training and evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::activity::ActivityModel;
use crate::error::{Error, Result};
use crate::features::{Dct, FeatureExtractor, FeatureVector};
use crate::localize::{side_features, train_side_model, EntryCase, Pocket, Row, Side};
use crate::orientation::{EfcSample, EkfConfig, EulerAngles, OrientationTracker};
use crate::pipeline::{Models, PipelineConfig, Role};
use crate::scheduler::DEFAULT_BUMP_RATE;
use crate::simulator::{generate, generate_keystrokes, Placement, Scenario, Segment, SegmentKind};
use crate::texting::TextingClass;
use crate::trace_io::KeystrokeLog;
use crate::types::{ActivityLabel, Trace};

/// Kinds of short activity clips.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClipKind {
    Walking,
    SittingDown,
    Stairs,
    Standing,
    GettingOnBus,
    Run,
    Jump,
    Entry(Side),
}

impl ClipKind {
    pub fn label(self) -> ActivityLabel {
        match self {
            ClipKind::Walking => ActivityLabel::Walking,
            ClipKind::SittingDown => ActivityLabel::SittingDown,
            ClipKind::Stairs => ActivityLabel::Stairs,
            ClipKind::Standing => ActivityLabel::Standing,
            ClipKind::GettingOnBus => ActivityLabel::GettingOnBus,
            ClipKind::Run | ClipKind::Jump => ActivityLabel::Other,
            ClipKind::Entry(_) => ActivityLabel::EnteringVehicle,
        }
    }
}

fn pocket_for(rng: &mut ChaCha8Rng) -> Pocket {
    if rng.random::<bool>() {
        Pocket::LeftPocket
    } else {
        Pocket::RightPocket
    }
}

fn entry_kind(side: Side) -> SegmentKind {
    match side {
        Side::Left => SegmentKind::EnterVehicleLeft,
        Side::Right => SegmentKind::EnterVehicleRight,
    }
}

/// A clip scenario and the index of its target segment.
pub fn clip_scenario(kind: ClipKind, pocket: Pocket, seed: u64) -> (Scenario, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c11b);
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
    use SegmentKind as K;
    let seg = Segment::new;
    let (segments, target) = match kind {
        ClipKind::Walking => (vec![seg(K::Idle, 1.5), seg(K::Walk, u(6.0, 8.0)), seg(K::Idle, 1.0)], 1),
        ClipKind::Stairs => (vec![seg(K::Idle, 1.5), seg(K::Stairs, u(6.0, 8.0)), seg(K::Idle, 1.0)], 1),
        ClipKind::Run => (vec![seg(K::Idle, 1.5), seg(K::Run, u(6.0, 8.0)), seg(K::Idle, 1.0)], 1),
        ClipKind::Jump => (vec![seg(K::Idle, 1.5), seg(K::Jump, u(6.0, 8.0)), seg(K::Idle, 1.0)], 1),
        ClipKind::Standing => (vec![seg(K::Idle, 1.5), seg(K::Idle, u(6.0, 8.0)), seg(K::Idle, 1.0)], 1),
        ClipKind::SittingDown => (
            vec![seg(K::Idle, 1.5), seg(K::Walk, u(2.0, 3.0)), seg(K::SitDown, u(2.2, 3.0)), seg(K::Idle, 3.0)],
            2,
        ),
        ClipKind::GettingOnBus => (
            vec![seg(K::Idle, 1.5), seg(K::Walk, u(2.0, 3.0)), seg(K::BusBoard, u(4.0, 5.0)), seg(K::Idle, 2.0)],
            2,
        ),
        ClipKind::Entry(side) => (
            vec![seg(K::Idle, 1.5), seg(K::Walk, u(3.0, 4.0)), seg(entry_kind(side), u(5.0, 6.0)), seg(K::Idle, 3.0)],
            2,
        ),
    };
    let mut s = Scenario::new(seed, pocket, segments);
    s.heading_deg = u(-180.0, 180.0);
    (s, target)
}

/// Runs the orientation filter over a trace.
pub fn track(trace: &Trace, ekf: &EkfConfig) -> Result<Vec<(EfcSample, EulerAngles)>> {
    let mut tracker = OrientationTracker::new(*ekf);
    let mut out = Vec::with_capacity(trace.samples.len());
    for s in &trace.samples {
        if let Some(x) = tracker.push(s)? {
            out.push(x);
        }
    }
    Ok(out)
}

/// Start indices of windows whose centre lies within `tol_ms` of `center_ms`,
/// nearest first.
fn windows_near(tracked: &[(EfcSample, EulerAngles)], win_len: usize, center_ms: i64, tol_ms: i64) -> Vec<usize> {
    if tracked.len() < win_len {
        return Vec::new();
    }
    let mut starts: Vec<(i64, usize)> = (0..=tracked.len() - win_len)
        .map(|i| {
            let c = (tracked[i].0.t_ms + tracked[i + win_len - 1].0.t_ms) / 2;
            ((c - center_ms).abs(), i)
        })
        .filter(|(d, _)| *d <= tol_ms)
        .collect();
    starts.sort();
    starts.into_iter().map(|(_, i)| i).collect()
}

/// Features of one analysis window together with its attitude series.
#[derive(Debug, Clone)]
pub struct ClipWindow {
    pub features: FeatureVector,
    pub euler: Vec<EulerAngles>,
    /// Earth-frame samples after the window, for drive-away checks.
    pub after: Vec<EfcSample>,
}

/// Windows around the centre of a clip's target segment.
pub fn clip_windows(kind: ClipKind, pocket: Pocket, seed: u64, config: &PipelineConfig, tol_ms: i64) -> Result<Vec<ClipWindow>> {
    let (scenario, target) = clip_scenario(kind, pocket, seed);
    let (trace, _) = generate(&scenario)?;
    let start: f64 = scenario.segments[..target].iter().map(|s| s.duration_s).sum();
    let center_ms = ((start + scenario.segments[target].duration_s / 2.0) * 1000.0).round() as i64;
    let tracked = track(&trace, &config.ekf)?;
    let win_len = config.window_len();
    let mut extractor = FeatureExtractor::new(win_len, config.coeffs)?;
    let mut out = Vec::new();
    for i in windows_near(&tracked, win_len, center_ms, tol_ms) {
        let w = &tracked[i..i + win_len];
        out.push(ClipWindow {
            features: extractor.extract(w.iter().map(|(e, _)| e))?,
            euler: w.iter().map(|(_, e)| *e).collect(),
            after: tracked[i + win_len..].iter().map(|(e, _)| *e).collect(),
        });
    }
    if out.is_empty() {
        return Err(Error::InsufficientExamples(format!("no window fits clip {kind:?}")));
    }
    Ok(out)
}

/// Labeled clip kinds making up the activity training set.
const TRAINING_KINDS: [ClipKind; 9] = [
    ClipKind::Walking,
    ClipKind::SittingDown,
    ClipKind::Stairs,
    ClipKind::Standing,
    ClipKind::GettingOnBus,
    ClipKind::Run,
    ClipKind::Jump,
    ClipKind::Entry(Side::Left),
    ClipKind::Entry(Side::Right),
];

/// Training tolerance around the clip centre.
const TRAIN_TOL_MS: i64 = 500;

fn seed_for(base: u64, group: u64, i: u64) -> u64 {
    base.wrapping_mul(1_000_003).wrapping_add(group * 10_007 + i)
}

pub fn activity_training_set(seed: u64, per_kind: usize, config: &PipelineConfig) -> Result<Vec<(FeatureVector, ActivityLabel)>> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (g, kind) in TRAINING_KINDS.iter().enumerate() {
        for i in 0..per_kind {
            let pocket = pocket_for(&mut rng);
            let windows = clip_windows(*kind, pocket, seed_for(seed, g as u64, i as u64), config, TRAIN_TOL_MS)?;
            out.extend(windows.into_iter().map(|w| (w.features, kind.label())));
        }
    }
    Ok(out)
}

/// One evaluation case of the activity corpus.
#[derive(Debug, Clone)]
pub struct ActivityCase {
    pub kind: ClipKind,
    pub window: ClipWindow,
}

/// 20 walking, 20 sitting down, 20 stairs and 100 other behaviours, plus
/// `entries` vehicle entries split evenly between the sides.
pub fn activity_test_set(seed: u64, entries: usize, config: &PipelineConfig) -> Result<Vec<ActivityCase>> {
    let mut plan: Vec<(ClipKind, usize)> = vec![
        (ClipKind::Walking, 20),
        (ClipKind::SittingDown, 20),
        (ClipKind::Stairs, 20),
        (ClipKind::Run, 20),
        (ClipKind::Jump, 20),
        (ClipKind::Standing, 30),
        (ClipKind::GettingOnBus, 30),
    ];
    plan.push((ClipKind::Entry(Side::Left), entries / 2));
    plan.push((ClipKind::Entry(Side::Right), entries - entries / 2));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (g, (kind, n)) in plan.into_iter().enumerate() {
        for i in 0..n {
            let pocket = pocket_for(&mut rng);
            let mut w = clip_windows(kind, pocket, seed_for(seed, 100 + g as u64, i as u64), config, 250)?;
            out.push(ActivityCase {
                kind,
                window: w.swap_remove(0),
            });
        }
    }
    Ok(out)
}

/// Side-detection examples: `per_case` entries for each side and pocket.
/// Training sets take every window near the entry centre, test sets only
/// the centred one.
pub fn side_set(seed: u64, per_case: usize, training: bool, config: &PipelineConfig) -> Result<Vec<(Vec<f64>, EntryCase)>> {
    let dct = Dct::new(config.window_len())?;
    let mut out = Vec::new();
    for (g, case) in EntryCase::ALL.iter().enumerate() {
        for i in 0..per_case {
            let tol = if training { TRAIN_TOL_MS } else { 250 };
            let windows = clip_windows(
                ClipKind::Entry(case.side()),
                case.pocket(),
                seed_for(seed, 200 + g as u64, i as u64),
                config,
                tol,
            )?;
            for w in windows.iter().take(if training { usize::MAX } else { 1 }) {
                out.push((side_features(&w.euler, &w.features, &dct, config.coeffs)?, *case));
            }
        }
    }
    Ok(out)
}

pub const TRAINING_SEED: u64 = 20_240_601;

pub fn train_models(seed: u64, config: &PipelineConfig) -> Result<Models> {
    let activity = activity_training_set(seed, 30, config)?;
    let side = side_set(seed.wrapping_add(1), 15, true, config)?;
    Ok(Models {
        activity: ActivityModel::train_features(&activity)?,
        side: train_side_model(&side, config.coeffs)?,
    })
}

/// One vehicle trip of the end-to-end corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripSpec {
    pub side: Side,
    pub seat: Row,
    pub pocket: Pocket,
    pub placement: Placement,
    pub drive_s: f64,
    pub bump_rate: f64,
}

impl TripSpec {
    /// Ground-truth role in a left-hand-drive vehicle.
    pub fn role(&self) -> Role {
        if self.side == Side::Left && self.seat == Row::Front {
            Role::Driver
        } else {
            Role::Passenger
        }
    }
}

pub fn trip_scenario(spec: &TripSpec, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7219);
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
    use SegmentKind as K;
    let mut s = Scenario::new(
        seed,
        spec.pocket,
        vec![
            Segment::new(K::Idle, 2.0),
            Segment::new(K::Walk, u(4.0, 6.0)),
            Segment::new(entry_kind(spec.side), u(5.0, 6.0)),
            Segment::new(K::Idle, u(8.0, 10.0)),
            Segment::new(
                K::EngineStart {
                    placement: spec.placement,
                    amplitude_ut: None,
                },
                2.0,
            ),
            Segment::new(K::Idle, u(2.0, 4.0)),
            Segment::new(
                K::Drive {
                    bump_rate: spec.bump_rate,
                    seat: spec.seat,
                },
                spec.drive_s,
            ),
        ],
    );
    s.heading_deg = u(-180.0, 180.0);
    s
}

/// 15 drivers and 24 passengers (8 front, 8 back-left, 8 back-right).
pub fn trip_corpus(seed: u64, drive_s: f64) -> Vec<(TripSpec, Scenario)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = [
        (Side::Left, Row::Front, 15),
        (Side::Right, Row::Front, 8),
        (Side::Left, Row::Back, 8),
        (Side::Right, Row::Back, 8),
    ];
    let mut out = Vec::new();
    for (g, (side, seat, n)) in groups.into_iter().enumerate() {
        for i in 0..n {
            let spec = TripSpec {
                side,
                seat,
                pocket: pocket_for(&mut rng),
                placement: if seat == Row::Front { Placement::Pocket } else { Placement::BackSeat },
                drive_s,
                bump_rate: DEFAULT_BUMP_RATE,
            };
            out.push((spec, trip_scenario(&spec, seed_for(seed, 300 + g as u64, i as u64))));
        }
    }
    out
}

/// A seated drive used to test row detection from bumps alone.
pub fn bump_run_scenario(seat: Row, bump_rate: f64, drive_s: f64, seed: u64) -> Scenario {
    use SegmentKind as K;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb0b);
    Scenario::new(
        seed,
        pocket_for(&mut rng),
        vec![
            Segment::new(K::Idle, 2.0),
            Segment::new(K::SitDown, 2.5),
            Segment::new(K::Idle, 2.0),
            Segment::new(K::Drive { bump_rate, seat }, drive_s),
        ],
    )
}

/// 8 normal and 12 distracted typing sessions.
pub fn texting_corpus(seed: u64, letters: usize) -> Vec<(TextingClass, KeystrokeLog)> {
    let mut out = Vec::new();
    for i in 0..20u64 {
        let class = if i < 8 { TextingClass::Normal } else { TextingClass::Distracted };
        out.push((class, generate_keystrokes(class, letters, seed_for(seed, 400, i))));
    }
    out
}
