//! Seat localization.
//!
//! Side detection classifies the pitch/roll signature of a vehicle entry with
//! a dedicated naive Bayes model over four (side, pocket) cases. Row
//! detection uses two independent signals: the magnetic spike of an engine
//! start, seen only from the front row, and the amplitude ratio of the
//! front-wheel and back-wheel hits when crossing a bump.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::activity::{ClassLabel, ClassStats, GaussianNb};
use crate::error::{Error, Result};
use crate::features::{variance, Dct, FeatureVector};
use crate::orientation::EulerAngles;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn flipped(self) -> Self {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pocket {
    LeftPocket,
    RightPocket,
    Unknown,
}

impl Pocket {
    pub fn flipped(self) -> Self {
        match self {
            Pocket::LeftPocket => Pocket::RightPocket,
            Pocket::RightPocket => Pocket::LeftPocket,
            Pocket::Unknown => Pocket::Unknown,
        }
    }
}

/// The four trained entry cases: vehicle side crossed with trouser pocket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EntryCase {
    LeftSideLeftPocket,
    LeftSideRightPocket,
    RightSideLeftPocket,
    RightSideRightPocket,
}

impl EntryCase {
    pub const ALL: [EntryCase; 4] = [
        EntryCase::LeftSideLeftPocket,
        EntryCase::LeftSideRightPocket,
        EntryCase::RightSideLeftPocket,
        EntryCase::RightSideRightPocket,
    ];

    pub fn new(side: Side, pocket: Pocket) -> Option<Self> {
        Some(match (side, pocket) {
            (Side::Left, Pocket::LeftPocket) => EntryCase::LeftSideLeftPocket,
            (Side::Left, Pocket::RightPocket) => EntryCase::LeftSideRightPocket,
            (Side::Right, Pocket::LeftPocket) => EntryCase::RightSideLeftPocket,
            (Side::Right, Pocket::RightPocket) => EntryCase::RightSideRightPocket,
            (_, Pocket::Unknown) => return None,
        })
    }

    pub fn side(self) -> Side {
        match self {
            EntryCase::LeftSideLeftPocket | EntryCase::LeftSideRightPocket => Side::Left,
            _ => Side::Right,
        }
    }

    pub fn pocket(self) -> Pocket {
        match self {
            EntryCase::LeftSideLeftPocket | EntryCase::RightSideLeftPocket => Pocket::LeftPocket,
            _ => Pocket::RightPocket,
        }
    }

    pub fn mirrored(self) -> Self {
        EntryCase::new(self.side().flipped(), self.pocket().flipped()).expect("known pocket")
    }

    pub fn name(self) -> &'static str {
        match self {
            EntryCase::LeftSideLeftPocket => "LeftSideLeftPocket",
            EntryCase::LeftSideRightPocket => "LeftSideRightPocket",
            EntryCase::RightSideLeftPocket => "RightSideLeftPocket",
            EntryCase::RightSideRightPocket => "RightSideRightPocket",
        }
    }
}

impl fmt::Display for EntryCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EntryCase {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        EntryCase::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown entry case {s:?}"))
    }
}

impl ClassLabel for EntryCase {}

pub type SideModel = GaussianNb<EntryCase>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SideVerdict {
    pub side: Side,
    pub confidence: f64,
    pub pocket: Pocket,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Row {
    Front,
    Back,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSource {
    EngineSpike,
    Bump,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RowVerdict {
    pub row: Row,
    pub source: RowSource,
    pub confidence: f64,
}

impl RowVerdict {
    pub const UNKNOWN: RowVerdict = RowVerdict {
        row: Row::Back,
        source: RowSource::None,
        confidence: 0.0,
    };
}

/// Side-detection feature layout: pitch DCT, roll DCT, pitch and roll
/// variance, then the acceleration feature vector of the same window.
///
/// The pitch and roll channels are the only ones that change sign under a
/// left/right reflection, and only roll does.
pub fn side_features(euler: &[EulerAngles], fv: &FeatureVector, dct: &Dct, k: usize) -> Result<Vec<f64>> {
    if euler.len() != dct.len() {
        return Err(Error::InvalidParams(format!(
            "attitude window has {} samples, expected {}",
            euler.len(),
            dct.len()
        )));
    }
    if k > euler.len() {
        return Err(Error::KTooLarge {
            k,
            available: euler.len(),
        });
    }
    let pitch: Vec<f64> = euler.iter().map(|e| e.pitch).collect();
    let roll: Vec<f64> = euler.iter().map(|e| e.roll).collect();
    let mut out = Vec::with_capacity(2 * k + 2 + fv.len());
    out.extend_from_slice(&dct.forward(&pitch)[..k]);
    out.extend_from_slice(&dct.forward(&roll)[..k]);
    out.push(variance(&pitch));
    out.push(variance(&roll));
    out.extend(fv.to_vec());
    Ok(out)
}

/// Applies the left/right reflection to a side feature vector built by
/// [`side_features`] with `k` coefficients per channel.
pub fn mirror_side_features(x: &[f64], k: usize) -> Vec<f64> {
    let mut m = x.to_vec();
    for v in &mut m[k..2 * k] {
        *v = -*v;
    }
    m
}

/// Trains the side model so that it is exactly symmetric under a left/right
/// flip: right-side examples are reflected onto the left side, the left-side
/// classes are fitted, and the right-side classes are their reflections.
pub fn train_side_model(examples: &[(Vec<f64>, EntryCase)], k: usize) -> Result<SideModel> {
    let canonical: Vec<(Vec<f64>, EntryCase)> = examples
        .iter()
        .map(|(x, c)| match c.side() {
            Side::Left => (x.clone(), *c),
            Side::Right => (mirror_side_features(x, k), c.mirrored()),
        })
        .collect();
    let left = SideModel::train(canonical.iter().map(|(x, c)| (x.as_slice(), *c)))?;
    let mut classes = left.classes.clone();
    for c in &left.classes {
        classes.push(ClassStats {
            label: c.label.mirrored(),
            prior: c.prior,
            count: c.count,
            mean: mirror_side_features(&c.mean, k),
            m2: c.m2.clone(),
        });
    }
    classes.sort_by_key(|c| c.label);
    let total: u64 = classes.iter().map(|c| c.count).sum();
    for c in &mut classes {
        c.prior = c.count as f64 / total as f64;
    }
    Ok(SideModel { classes, ..left })
}

pub fn detect_side(model: &SideModel, features: &[f64]) -> Result<SideVerdict> {
    if model.classes.len() < 2 {
        return Err(Error::ModelNotTrained("side"));
    }
    let (_, posterior) = model.classify(features)?;
    let mass = |side: Side| -> f64 {
        posterior
            .probs
            .iter()
            .filter(|(c, _)| c.side() == side)
            .map(|(_, p)| p)
            .sum()
    };
    let (left, right) = (mass(Side::Left), mass(Side::Right));
    let side = if right > left { Side::Right } else { Side::Left };
    let side_mass = left.max(right);
    let pocket_of = |pocket: Pocket| EntryCase::new(side, pocket).map_or(0.0, |c| posterior.get(c));
    let (lp, rp) = (pocket_of(Pocket::LeftPocket), pocket_of(Pocket::RightPocket));
    let pocket = if side_mass > 0.0 && lp.max(rp) / side_mass >= 0.6 {
        if rp > lp {
            Pocket::RightPocket
        } else {
            Pocket::LeftPocket
        }
    } else {
        Pocket::Unknown
    };
    Ok(SideVerdict {
        side,
        confidence: side_mass,
        pocket,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeConfig {
    /// Minimum excursion above the trailing baseline, µT.
    pub threshold: f64,
    pub baseline_ms: i64,
    /// Minimum history before a baseline is trusted.
    pub min_baseline_ms: i64,
    /// The excursion must fall below half its peak within this time.
    pub max_duration_ms: i64,
    /// Moving-average length applied to the raw magnitude.
    pub smoothing: usize,
}

impl Default for SpikeConfig {
    fn default() -> Self {
        Self {
            threshold: 2.0,
            baseline_ms: 2000,
            min_baseline_ms: 1000,
            max_duration_ms: 1000,
            smoothing: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeDetection {
    pub detected: bool,
    /// Peak minus baseline, µT.
    pub amplitude: f64,
    pub t_ms: i64,
}

#[derive(Debug, Clone, Copy)]
struct OpenSpike {
    start_ms: i64,
    baseline: f64,
    peak: f64,
    peak_ms: i64,
}

/// Streaming transient detector over the magnetic field magnitude.
#[derive(Debug, Clone)]
pub struct SpikeDetector {
    config: SpikeConfig,
    raw: VecDeque<f64>,
    /// Recent smoothed values held back from the baseline, since they may
    /// already carry the leading edge of a spike.
    recent: VecDeque<(i64, f64)>,
    history: VecDeque<(i64, f64)>,
    history_sum: f64,
    open: Option<OpenSpike>,
}

impl SpikeDetector {
    pub fn new(config: SpikeConfig) -> Self {
        Self {
            config,
            raw: VecDeque::with_capacity(config.smoothing.max(1)),
            recent: VecDeque::with_capacity(config.smoothing.max(1) + 1),
            history: VecDeque::new(),
            history_sum: 0.0,
            open: None,
        }
    }

    pub fn buffered(&self) -> usize {
        self.raw.len() + self.recent.len() + self.history.len()
    }

    pub fn reset(&mut self) {
        self.raw.clear();
        self.recent.clear();
        self.history.clear();
        self.history_sum = 0.0;
        self.open = None;
    }

    fn baseline(&self, t_ms: i64) -> Option<f64> {
        let (oldest, _) = *self.history.front()?;
        (t_ms - oldest >= self.config.min_baseline_ms).then(|| self.history_sum / self.history.len() as f64)
    }

    fn remember(&mut self, t_ms: i64, v: f64) {
        self.recent.push_back((t_ms, v));
        if self.recent.len() <= self.config.smoothing.max(1) {
            return;
        }
        let (t_ms, v) = self.recent.pop_front().expect("non-empty");
        self.history.push_back((t_ms, v));
        self.history_sum += v;
        while let Some(&(t0, v0)) = self.history.front() {
            if t_ms - t0 > self.config.baseline_ms {
                self.history.pop_front();
                self.history_sum -= v0;
            } else {
                break;
            }
        }
    }

    /// Feeds one magnitude reading; returns a detection when a spike has
    /// risen and decayed.
    pub fn push(&mut self, t_ms: i64, magnitude: f64) -> Option<SpikeDetection> {
        self.raw.push_back(magnitude);
        if self.raw.len() > self.config.smoothing.max(1) {
            self.raw.pop_front();
        }
        let smooth = self.raw.iter().sum::<f64>() / self.raw.len() as f64;

        if let Some(mut open) = self.open {
            if smooth > open.peak {
                open.peak = smooth;
                open.peak_ms = t_ms;
            }
            let excursion = open.peak - open.baseline;
            if smooth - open.baseline <= 0.5 * excursion {
                self.open = None;
                self.remember(t_ms, smooth);
                return Some(SpikeDetection {
                    detected: true,
                    amplitude: excursion,
                    t_ms: open.peak_ms,
                });
            }
            if t_ms - open.start_ms > self.config.max_duration_ms {
                // A level shift rather than a transient: re-baseline.
                self.open = None;
                self.recent.clear();
                self.history.clear();
                self.history_sum = 0.0;
                self.remember(t_ms, smooth);
            } else {
                self.open = Some(open);
            }
            return None;
        }

        match self.baseline(t_ms) {
            Some(b) if smooth - b > self.config.threshold => {
                self.open = Some(OpenSpike {
                    start_ms: t_ms,
                    baseline: b,
                    peak: smooth,
                    peak_ms: t_ms,
                });
            }
            _ => self.remember(t_ms, smooth),
        }
        None
    }
}

/// Runs the spike detector over `(t_ms, |mag|)` pairs and returns the first
/// detection.
pub fn detect_engine_spike(stream: &[(i64, f64)], config: &SpikeConfig) -> SpikeDetection {
    let mut det = SpikeDetector::new(*config);
    stream
        .iter()
        .find_map(|&(t, m)| det.push(t, m))
        .unwrap_or(SpikeDetection {
            detected: false,
            amplitude: 0.0,
            t_ms: stream.last().map_or(0, |s| s.0),
        })
}

/// Outcome of the engine-start search between entry and motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpikeSearch {
    NotObserved,
    Observed(Option<SpikeDetection>),
}

pub const SPIKE_FRONT_CONFIDENCE: f64 = 0.9;
pub const SPIKE_ABSENT_CONFIDENCE: f64 = 0.6;

pub fn classify_row_by_spike(search: SpikeSearch) -> RowVerdict {
    match search {
        SpikeSearch::Observed(Some(d)) if d.detected => RowVerdict {
            row: Row::Front,
            source: RowSource::EngineSpike,
            confidence: SPIKE_FRONT_CONFIDENCE,
        },
        SpikeSearch::Observed(_) => RowVerdict {
            row: Row::Back,
            source: RowSource::EngineSpike,
            confidence: SPIKE_ABSENT_CONFIDENCE,
        },
        SpikeSearch::NotObserved => RowVerdict::UNKNOWN,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpConfig {
    /// |vertical acceleration| that opens an excursion, m/s².
    pub threshold: f64,
    /// Excursions closer than this are merged into one wheel hit.
    pub merge_gap_ms: i64,
    pub min_lag_ms: i64,
    pub max_lag_ms: i64,
    /// Second/first amplitude ratio at and above which a pair votes Back.
    pub ratio_threshold: f64,
}

impl Default for BumpConfig {
    fn default() -> Self {
        Self {
            threshold: 1.0,
            merge_gap_ms: 150,
            min_lag_ms: 200,
            max_lag_ms: 2000,
            ratio_threshold: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpEvent {
    pub t_front_ms: i64,
    pub t_back_ms: i64,
    pub amp_first: f64,
    pub amp_second: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy)]
struct Hit {
    t_ms: i64,
    amp: f64,
    last_above_ms: i64,
}

/// Streaming wheel-hit pairing over the vertical earth-frame acceleration.
#[derive(Debug, Clone)]
pub struct BumpDetector {
    config: BumpConfig,
    open: Option<Hit>,
    pending: Option<Hit>,
}

impl BumpDetector {
    pub fn new(config: BumpConfig) -> Self {
        Self {
            config,
            open: None,
            pending: None,
        }
    }

    fn pair(&mut self, hit: Hit) -> Option<BumpEvent> {
        let Some(first) = self.pending else {
            self.pending = Some(hit);
            return None;
        };
        let lag = hit.t_ms - first.t_ms;
        if lag < self.config.min_lag_ms {
            if hit.amp > first.amp {
                self.pending = Some(hit);
            }
            None
        } else if lag <= self.config.max_lag_ms {
            self.pending = None;
            Some(BumpEvent {
                t_front_ms: first.t_ms,
                t_back_ms: hit.t_ms,
                amp_first: first.amp,
                amp_second: hit.amp,
                ratio: hit.amp / first.amp,
            })
        } else {
            self.pending = Some(hit);
            None
        }
    }

    pub fn push(&mut self, t_ms: i64, vertical: f64) -> Option<BumpEvent> {
        let a = vertical.abs();
        let mut closed = None;
        if let Some(open) = &mut self.open {
            if a >= self.config.threshold {
                open.last_above_ms = t_ms;
                if a > open.amp {
                    open.amp = a;
                    open.t_ms = t_ms;
                }
                return None;
            }
            if t_ms - open.last_above_ms > self.config.merge_gap_ms {
                closed = self.open.take();
            }
        } else if a >= self.config.threshold {
            self.open = Some(Hit {
                t_ms,
                amp: a,
                last_above_ms: t_ms,
            });
        }
        closed.and_then(|hit| self.pair(hit))
    }

    /// Closes any open excursion at end of stream.
    pub fn finish(&mut self) -> Option<BumpEvent> {
        let hit = self.open.take()?;
        self.pair(hit)
    }
}

pub fn detect_bumps(vertical: &[(i64, f64)], config: &BumpConfig) -> Vec<BumpEvent> {
    let mut det = BumpDetector::new(*config);
    let mut out: Vec<BumpEvent> = vertical.iter().filter_map(|&(t, v)| det.push(t, v)).collect();
    out.extend(det.finish());
    out
}

/// Majority vote over bump pairs. Confidence is the vote margin.
pub fn classify_row_by_bump(events: &[BumpEvent], config: &BumpConfig) -> Result<RowVerdict> {
    if events.is_empty() {
        return Err(Error::EmptyEvidence);
    }
    let back = events.iter().filter(|e| e.ratio >= config.ratio_threshold).count();
    let front = events.len() - back;
    Ok(RowVerdict {
        row: if back > front { Row::Back } else { Row::Front },
        source: RowSource::Bump,
        confidence: back.abs_diff(front) as f64 / events.len() as f64,
    })
}

/// Row votes accumulated while driving.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BumpVotes {
    pub front: usize,
    pub back: usize,
}

impl BumpVotes {
    pub fn add(&mut self, e: &BumpEvent, config: &BumpConfig) {
        if e.ratio >= config.ratio_threshold {
            self.back += 1;
        } else {
            self.front += 1;
        }
    }

    pub fn total(&self) -> usize {
        self.front + self.back
    }

    pub fn verdict(&self) -> Option<RowVerdict> {
        let n = self.total();
        (n > 0).then(|| RowVerdict {
            row: if self.back > self.front { Row::Back } else { Row::Front },
            source: RowSource::Bump,
            confidence: self.back.abs_diff(self.front) as f64 / n as f64,
        })
    }
}

/// Combines the engine-spike and bump evidence. The spike verdict stands
/// whenever its search window was observed; bumps decide otherwise.
pub fn resolve_row(spike: RowVerdict, bump: Option<RowVerdict>) -> RowVerdict {
    match bump {
        Some(b) if spike.source == RowSource::None => b,
        _ => spike,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(values: impl IntoIterator<Item = f64>) -> Vec<(i64, f64)> {
        values.into_iter().enumerate().map(|(i, v)| (i as i64 * 50, v)).collect()
    }

    fn with_spike(base: f64, amp: f64, at: usize, len: usize, total: usize) -> Vec<(i64, f64)> {
        stream((0..total).map(|i| if i >= at && i < at + len { base + amp } else { base }))
    }

    #[test]
    fn flat_stream_has_no_spike() {
        let d = detect_engine_spike(&stream(std::iter::repeat_n(45.0, 400)), &SpikeConfig::default());
        assert!(!d.detected);
    }

    #[test]
    fn dashboard_spike() {
        let d = detect_engine_spike(&with_spike(65.0, 20.0, 100, 6, 200), &SpikeConfig::default());
        assert!(d.detected);
        assert!((d.amplitude - 20.0).abs() < 1e-9, "{d:?}");
    }

    #[test]
    fn pocket_spike() {
        let d = detect_engine_spike(&with_spike(50.0, 3.0, 100, 6, 200), &SpikeConfig::default());
        assert!(d.detected);
        assert!((d.amplitude - 3.0).abs() < 1e-9, "{d:?}");
    }

    #[test]
    fn level_shift_is_not_a_spike() {
        let s = stream((0..300).map(|i| if i < 100 { 50.0 } else { 58.0 }));
        assert!(!detect_engine_spike(&s, &SpikeConfig::default()).detected);
    }

    #[test]
    fn row_from_spike() {
        let hit = SpikeDetection {
            detected: true,
            amplitude: 3.0,
            t_ms: 0,
        };
        assert_eq!(classify_row_by_spike(SpikeSearch::Observed(Some(hit))).row, Row::Front);
        let clean = classify_row_by_spike(SpikeSearch::Observed(None));
        assert_eq!((clean.row, clean.source), (Row::Back, RowSource::EngineSpike));
        assert_eq!(classify_row_by_spike(SpikeSearch::NotObserved), RowVerdict::UNKNOWN);
    }

    #[test]
    fn smooth_road_has_no_bumps() {
        let s = stream((0..2000).map(|i| 0.4 * (i as f64 * 0.9).sin()));
        assert!(detect_bumps(&s, &BumpConfig::default()).is_empty());
    }

    #[test]
    fn double_peak_pairs() {
        let mut v = vec![0.0; 200];
        v[50] = 2.0;
        v[62] = -6.0;
        let events = detect_bumps(&stream(v), &BumpConfig::default());
        assert_eq!(events.len(), 1);
        let e = events[0];
        assert_eq!((e.t_front_ms, e.t_back_ms), (2500, 3100));
        assert!((e.ratio - 3.0).abs() < 1e-12);
    }

    #[test]
    fn bump_majority() {
        let ev = |ratio: f64| BumpEvent {
            t_front_ms: 0,
            t_back_ms: 500,
            amp_first: 2.0,
            amp_second: 2.0 * ratio,
            ratio,
        };
        let cfg = BumpConfig::default();
        let front: Vec<_> = (0..10).map(|_| ev(1.2)).collect();
        let back: Vec<_> = (0..10).map(|_| ev(3.5)).collect();
        assert_eq!(classify_row_by_bump(&front, &cfg).unwrap().row, Row::Front);
        let b = classify_row_by_bump(&back, &cfg).unwrap();
        assert_eq!((b.row, b.confidence), (Row::Back, 1.0));
        assert_eq!(classify_row_by_bump(&[], &cfg), Err(Error::EmptyEvidence));
    }

    #[test]
    fn entry_case_mirror() {
        for c in EntryCase::ALL {
            assert_eq!(c.mirrored().mirrored(), c);
            assert_ne!(c.mirrored().side(), c.side());
            assert_eq!(c.name().parse::<EntryCase>().unwrap(), c);
        }
    }

    #[test]
    fn untrained_side_model() {
        let m = SideModel {
            variance_floor: 1e-6,
            n_features: 3,
            classes: vec![],
        };
        assert_eq!(detect_side(&m, &[0.0; 3]), Err(Error::ModelNotTrained("side")));
    }

    #[test]
    fn row_resolution_order() {
        let front_spike = classify_row_by_spike(SpikeSearch::Observed(Some(SpikeDetection {
            detected: true,
            amplitude: 4.0,
            t_ms: 0,
        })));
        let bump_back = RowVerdict {
            row: Row::Back,
            source: RowSource::Bump,
            confidence: 0.8,
        };
        assert_eq!(resolve_row(front_spike, Some(bump_back)), front_spike);
        let absent = classify_row_by_spike(SpikeSearch::Observed(None));
        assert_eq!(resolve_row(absent, Some(bump_back)), absent);
        assert_eq!(resolve_row(RowVerdict::UNKNOWN, None), RowVerdict::UNKNOWN);
        assert_eq!(resolve_row(RowVerdict::UNKNOWN, Some(bump_back)), bump_back);
    }
}
