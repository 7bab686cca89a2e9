//! Single-pass detection pipeline and evidence fusion.
//!
//! Samples are consumed in order and never revisited. The only retained
//! history is one analysis window of earth-frame samples, the orientation
//! filter's initialization buffer and the magnetic baseline.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::activity::{ActivityModel, ConfirmConfig, ConsecutiveLatch, DriveAwayDetector};
use crate::error::{Error, Result};
use crate::features::{Dct, FeatureExtractor, DEFAULT_COEFFS, DEFAULT_WINDOW_MS};
use crate::localize::{
    classify_row_by_spike, detect_side, resolve_row, side_features, BumpConfig, BumpDetector, BumpVotes, Pocket, Row,
    RowSource, RowVerdict, Side, SideModel, SideVerdict, SpikeConfig, SpikeDetection, SpikeDetector, SpikeSearch,
};
use crate::orientation::{EfcSample, EkfConfig, EulerAngles, OrientationTracker};
use crate::texting::{classify_texting, compute_stats, TextingClass, TextingConfig, TextingVerdict};
use crate::trace_io::{KeyEvent, KeystrokeLog};
use crate::types::{ActivityLabel, SensorSample, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Region {
    LeftHandDrive,
    RightHandDrive,
}

impl FromStr for Region {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "left-hand-drive" | "lhd" => Ok(Region::LeftHandDrive),
            "right-hand-drive" | "rhd" => Ok(Region::RightHandDrive),
            _ => Err(format!("unknown region {s:?} (left-hand-drive, right-hand-drive)")),
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Region::LeftHandDrive => "left-hand-drive",
            Region::RightHandDrive => "right-hand-drive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Role {
    Driver,
    Passenger,
    NotInVehicle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evidence {
    pub entered_vehicle: bool,
    pub entry_confidence: f64,
    pub entry_t_ms: Option<i64>,
    pub side: Option<SideVerdict>,
    pub side_t_ms: Option<i64>,
    pub row: RowVerdict,
    pub row_t_ms: Option<i64>,
    pub texting: Option<TextingVerdict>,
    pub texting_t_ms: Option<i64>,
    pub moving: bool,
}

impl Default for Evidence {
    fn default() -> Self {
        Self {
            entered_vehicle: false,
            entry_confidence: 0.0,
            entry_t_ms: None,
            side: None,
            side_t_ms: None,
            row: RowVerdict::UNKNOWN,
            row_t_ms: None,
            texting: None,
            texting_t_ms: None,
            moving: false,
        }
    }
}

impl Evidence {
    /// The same evidence with the side verdict reflected.
    pub fn mirrored(&self) -> Self {
        let mut e = self.clone();
        e.side = self.side.map(|s| SideVerdict {
            side: s.side.flipped(),
            pocket: s.pocket.flipped(),
            ..s
        });
        e
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoleVerdict {
    pub role: Role,
    pub distracted: bool,
    pub confidence: f64,
    pub latency_ms: Option<i64>,
}

impl RoleVerdict {
    pub const NOT_IN_VEHICLE: RoleVerdict = RoleVerdict {
        role: Role::NotInVehicle,
        distracted: false,
        confidence: 1.0,
        latency_ms: None,
    };
}

/// Discount applied when no row evidence exists.
pub const MISSING_ROW_DISCOUNT: f64 = 0.5;

/// Rule table mapping evidence to a role. Right-hand-drive regions are the
/// mirror image of left-hand-drive ones.
pub fn fuse(evidence: &Evidence, region: Region) -> Result<RoleVerdict> {
    if !evidence.entered_vehicle {
        return Err(Error::NoEntryEvidence);
    }
    let side = evidence.side.ok_or(Error::NoEntryEvidence)?;
    let driver_side = match region {
        Region::LeftHandDrive => Side::Left,
        Region::RightHandDrive => Side::Right,
    };
    let row = evidence.row;
    let (role, confidence) = if side.side != driver_side {
        (Role::Passenger, side.confidence)
    } else if row.source == RowSource::None {
        (Role::Driver, side.confidence * MISSING_ROW_DISCOUNT)
    } else if row.row == Row::Front {
        (Role::Driver, side.confidence * row.confidence)
    } else {
        (Role::Passenger, side.confidence * row.confidence)
    };
    let distracted = role == Role::Driver
        && evidence.moving
        && evidence.texting.is_some_and(|t| t.class == TextingClass::Distracted);
    Ok(RoleVerdict {
        role,
        distracted,
        confidence,
        latency_ms: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConfirmedBy {
    Magnetic,
    DriveAway,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "event")]
pub enum EventKind {
    Activity { label: ActivityLabel },
    EntryCandidate,
    EntryConfirmed { via: ConfirmedBy },
    Side { side: Side, pocket: Pocket },
    MotionStart,
    EngineSpike { amplitude_ut: f64 },
    Bump { ratio: f64 },
    Row { row: Row, source: RowSource },
    Texting { class: TextingClass },
    Role { role: Role, distracted: bool, provisional: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionEvent {
    pub t_ms: i64,
    #[serde(flatten)]
    pub kind: EventKind,
    pub confidence: f64,
}

impl DetectionEvent {
    pub fn is_entry(&self) -> bool {
        matches!(self.kind, EventKind::EntryCandidate | EventKind::EntryConfirmed { .. })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("event serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineConfig {
    pub window_ms: i64,
    pub step_ms: i64,
    pub rate_hz: f64,
    pub coeffs: usize,
    /// Consecutive windows needed before a label is accepted.
    pub latch: usize,
    /// How long to wait for drive-away when the magnetic check fails.
    pub confirm_timeout_ms: i64,
    /// Upper bound on the engine-start search after entry.
    pub spike_search_ms: i64,
    pub region: Region,
    pub ekf: EkfConfig,
    pub confirm: ConfirmConfig,
    pub spike: SpikeConfig,
    pub bump: BumpConfig,
    pub texting: TextingConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window_ms: DEFAULT_WINDOW_MS,
            step_ms: 500,
            rate_hz: crate::types::NOMINAL_RATE_HZ,
            coeffs: DEFAULT_COEFFS,
            latch: 2,
            confirm_timeout_ms: 60_000,
            spike_search_ms: 120_000,
            region: Region::LeftHandDrive,
            ekf: EkfConfig::default(),
            confirm: ConfirmConfig::default(),
            spike: SpikeConfig::default(),
            bump: BumpConfig::default(),
            texting: TextingConfig::default(),
        }
    }
}

impl PipelineConfig {
    fn period_ms(&self) -> i64 {
        (1000.0 / self.rate_hz).round().max(1.0) as i64
    }

    pub fn window_len(&self) -> usize {
        (self.window_ms / self.period_ms()).max(1) as usize
    }

    pub fn step_len(&self) -> usize {
        (self.step_ms / self.period_ms()).max(1) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) || self.window_ms <= 0 || self.step_ms <= 0 {
            return Err(Error::InvalidParams("window, step and rate must be positive".into()));
        }
        if self.coeffs == 0 || self.coeffs > self.window_len() {
            return Err(Error::KTooLarge {
                k: self.coeffs,
                available: self.window_len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub activity: ActivityModel,
    pub side: SideModel,
}

#[derive(Debug, Clone)]
struct Candidate {
    margin: f64,
    confidence: f64,
    side_features: Vec<f64>,
    mag_var: f64,
    windows: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Search {
    NotStarted,
    Active { start: i64, deadline: i64 },
    Done(SpikeSearch),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Scanning,
    Pending { deadline: i64 },
    InVehicle,
}

/// Output of a complete run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub evidence: Evidence,
    pub verdict: RoleVerdict,
    pub events: Vec<DetectionEvent>,
    pub max_buffered: usize,
}

/// Streaming pipeline. Feed samples with [`Pipeline::push`], then call
/// [`Pipeline::finish`].
#[derive(Debug, Clone)]
pub struct Pipeline {
    models: Models,
    config: PipelineConfig,
    tracker: OrientationTracker,
    extractor: FeatureExtractor,
    side_dct: Dct,
    ring: VecDeque<(EfcSample, EulerAngles)>,
    win_len: usize,
    step_len: usize,
    since_step: usize,
    latch: ConsecutiveLatch<ActivityLabel>,
    run: Option<Candidate>,
    pending: Option<Candidate>,
    phase: Phase,
    drive: DriveAwayDetector,
    spike: SpikeDetector,
    spike_found: Option<SpikeDetection>,
    search: Search,
    bumps: BumpDetector,
    votes: BumpVotes,
    evidence: Evidence,
    events: Vec<DetectionEvent>,
    motion_start: Option<i64>,
    last_t: Option<i64>,
    max_buffered: usize,
}

impl Pipeline {
    pub fn new(models: Models, config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let win_len = config.window_len();
        let expected = models.activity.n_features;
        if !models.activity.classes.is_empty() && expected != 2 * config.coeffs + 3 {
            return Err(Error::DimensionMismatch {
                expected: 2 * config.coeffs + 3,
                found: expected,
            });
        }
        Ok(Self {
            extractor: FeatureExtractor::new(win_len, config.coeffs)?,
            side_dct: Dct::new(win_len)?,
            tracker: OrientationTracker::new(config.ekf),
            ring: VecDeque::with_capacity(win_len + 1),
            win_len,
            step_len: config.step_len(),
            since_step: 0,
            latch: ConsecutiveLatch::new(config.latch),
            run: None,
            pending: None,
            phase: Phase::Scanning,
            drive: DriveAwayDetector::new(config.confirm),
            spike: SpikeDetector::new(config.spike),
            spike_found: None,
            search: Search::NotStarted,
            bumps: BumpDetector::new(config.bump),
            votes: BumpVotes::default(),
            evidence: Evidence::default(),
            events: Vec::new(),
            motion_start: None,
            last_t: None,
            max_buffered: 0,
            models,
            config,
        })
    }

    pub fn events(&self) -> &[DetectionEvent] {
        &self.events
    }

    pub fn evidence(&self) -> &Evidence {
        &self.evidence
    }

    /// Samples currently retained across all stages.
    pub fn buffered(&self) -> usize {
        self.ring.len() + self.tracker.buffered() + self.spike.buffered()
    }

    pub fn max_buffered(&self) -> usize {
        self.max_buffered
    }

    fn emit(&mut self, t_ms: i64, kind: EventKind, confidence: f64) {
        self.events.push(DetectionEvent { t_ms, kind, confidence });
    }

    pub fn push(&mut self, sample: &SensorSample) -> Result<()> {
        let t = sample.t_ms;
        self.last_t = Some(t);

        if let Some(d) = self.spike.push(t, sample.mag.norm()) {
            if let Search::Active { start, .. } = self.search {
                if d.t_ms >= start && self.spike_found.is_none() {
                    self.spike_found = Some(d);
                    self.emit(t, EventKind::EngineSpike { amplitude_ut: d.amplitude }, 1.0);
                }
            }
        }

        if let Some((efc, euler)) = self.tracker.push(sample)? {
            self.ring.push_back((efc, euler));
            if self.ring.len() > self.win_len {
                self.ring.pop_front();
            }
            self.since_step += 1;
            match self.phase {
                Phase::Scanning => self.scan(t)?,
                Phase::Pending { deadline } => {
                    if self.drive.push(&efc) {
                        let cand = self.pending.take().ok_or(Error::NoEntryEvidence)?;
                        self.motion(t);
                        self.confirm(t, ConfirmedBy::DriveAway, cand)?;
                    } else {
                        self.scan(t)?;
                        if self.phase == (Phase::Pending { deadline }) && t > deadline {
                            self.phase = Phase::Scanning;
                            self.pending = None;
                        }
                    }
                }
                Phase::InVehicle => self.in_vehicle(t, &efc),
            }
        }
        self.max_buffered = self.max_buffered.max(self.buffered());
        Ok(())
    }

    fn scan(&mut self, t: i64) -> Result<()> {
        if self.ring.len() < self.win_len || self.since_step < self.step_len {
            return Ok(());
        }
        self.since_step = 0;
        let fv = self.extractor.extract(self.ring.iter().map(|(e, _)| e))?;
        let x = fv.to_vec();
        let (label, posterior) = self.models.activity.classify(&x)?;
        if self.latch.push(label).is_some() {
            self.emit(t, EventKind::Activity { label }, posterior.get(label));
        }
        if label != ActivityLabel::EnteringVehicle {
            return self.close_run(t);
        }

        let scores = self.models.activity.log_scores(&x)?;
        let ev = self.models.activity.classes.iter().position(|c| c.label == label).expect("label from model");
        let rival = scores
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != ev)
            .map(|(_, s)| *s)
            .fold(f64::NEG_INFINITY, f64::max);
        let margin = scores[ev] - rival;
        let windows = self.run.as_ref().map_or(0, |c| c.windows) + 1;
        let mag_var = self.run.as_ref().map_or(0.0, |c| c.mag_var).max(fv.mag_var);
        if self.run.as_ref().is_none_or(|c| margin > c.margin) {
            let euler: Vec<EulerAngles> = self.ring.iter().map(|(_, e)| *e).collect();
            self.run = Some(Candidate {
                margin,
                confidence: posterior.get(label),
                side_features: side_features(&euler, &fv, &self.side_dct, self.config.coeffs)?,
                mag_var,
                windows,
            });
        } else if let Some(c) = &mut self.run {
            c.mag_var = mag_var;
            c.windows = windows;
        }
        if windows >= self.max_run_windows() {
            self.close_run(t)?;
        }
        Ok(())
    }

    /// An entry run lasting this many windows is judged without waiting for
    /// it to end.
    fn max_run_windows(&self) -> usize {
        2 * self.win_len.div_ceil(self.step_len.max(1))
    }

    /// Judges a finished run of entry windows.
    fn close_run(&mut self, t: i64) -> Result<()> {
        let Some(cand) = self.run.take() else {
            return Ok(());
        };
        if cand.windows < self.config.latch {
            return Ok(());
        }
        self.emit(t, EventKind::EntryCandidate, cand.confidence);
        if cand.mag_var > self.config.confirm.mag_var_threshold {
            self.confirm(t, ConfirmedBy::Magnetic, cand)
        } else {
            self.pending = Some(cand);
            self.phase = Phase::Pending {
                deadline: t + self.config.confirm_timeout_ms,
            };
            self.drive.reset();
            Ok(())
        }
    }

    fn confirm(&mut self, t: i64, via: ConfirmedBy, cand: Candidate) -> Result<()> {
        self.run = None;
        self.pending = None;
        self.phase = Phase::InVehicle;
        self.evidence.entered_vehicle = true;
        self.evidence.entry_confidence = cand.confidence;
        self.evidence.entry_t_ms = Some(t);
        self.emit(t, EventKind::EntryConfirmed { via }, cand.confidence);

        let side = detect_side(&self.models.side, &cand.side_features)?;
        self.evidence.side = Some(side);
        self.evidence.side_t_ms = Some(t);
        self.emit(
            t,
            EventKind::Side {
                side: side.side,
                pocket: side.pocket,
            },
            side.confidence,
        );

        self.search = match via {
            ConfirmedBy::Magnetic => Search::Active {
                start: t,
                deadline: t + self.config.spike_search_ms,
            },
            ConfirmedBy::DriveAway => Search::Done(SpikeSearch::NotObserved),
        };
        if via == ConfirmedBy::Magnetic {
            self.drive.reset();
        }
        let provisional = fuse(&self.evidence, self.config.region)?;
        self.emit(
            t,
            EventKind::Role {
                role: provisional.role,
                distracted: false,
                provisional: true,
            },
            provisional.confidence,
        );
        Ok(())
    }

    fn motion(&mut self, t: i64) {
        if self.motion_start.is_some() {
            return;
        }
        self.motion_start = Some(t);
        self.evidence.moving = true;
        self.emit(t, EventKind::MotionStart, 1.0);
    }

    fn close_search(&mut self) {
        if let Search::Active { .. } = self.search {
            self.search = Search::Done(SpikeSearch::Observed(self.spike_found));
        }
    }

    fn in_vehicle(&mut self, t: i64, efc: &EfcSample) {
        if let Search::Active { deadline, .. } = self.search {
            if t > deadline {
                self.close_search();
            }
        }
        if self.motion_start.is_none() {
            if self.drive.push(efc) {
                self.motion(t);
                self.close_search();
            }
            return;
        }
        if let Some(b) = self.bumps.push(t, efc.linear_accel_efc.z) {
            self.votes.add(&b, &self.config.bump);
            self.emit(t, EventKind::Bump { ratio: b.ratio }, 1.0);
        }
    }

    /// Closes all detectors and produces the final verdict.
    pub fn finish(mut self, keystrokes: Option<&KeystrokeLog>, entry_end_ms: Option<i64>) -> Result<PipelineOutput> {
        let t_end = self.last_t.ok_or(Error::EmptyTrace)?;
        if !self.evidence.entered_vehicle {
            self.emit(
                t_end,
                EventKind::Role {
                    role: Role::NotInVehicle,
                    distracted: false,
                    provisional: false,
                },
                1.0,
            );
            return Ok(PipelineOutput {
                evidence: self.evidence,
                verdict: RoleVerdict::NOT_IN_VEHICLE,
                events: self.events,
                max_buffered: self.max_buffered,
            });
        }

        if self.motion_start.is_some() {
            if let Some(b) = self.bumps.finish() {
                self.votes.add(&b, &self.config.bump);
                self.emit(t_end, EventKind::Bump { ratio: b.ratio }, 1.0);
            }
        }
        self.close_search();
        let spike = match self.search {
            Search::Done(s) => classify_row_by_spike(s),
            _ => RowVerdict::UNKNOWN,
        };
        let row = resolve_row(spike, self.votes.verdict());
        self.evidence.row = row;
        if row.source != RowSource::None {
            self.evidence.row_t_ms = Some(t_end);
            self.emit(
                t_end,
                EventKind::Row {
                    row: row.row,
                    source: row.source,
                },
                row.confidence,
            );
        }

        if let (Some(log), Some(start)) = (keystrokes, self.motion_start) {
            let events: Vec<KeyEvent> = log.events.iter().filter(|e| e.t_ms >= start).copied().collect();
            let stats = compute_stats(&KeystrokeLog { events });
            if let Ok(verdict) = stats.and_then(|s| classify_texting(&s, &self.config.texting)) {
                self.evidence.texting = Some(verdict);
                self.evidence.texting_t_ms = Some(t_end);
                self.emit(t_end, EventKind::Texting { class: verdict.class }, verdict.confidence);
            }
        }

        let mut verdict = fuse(&self.evidence, self.config.region)?;
        self.emit(
            t_end,
            EventKind::Role {
                role: verdict.role,
                distracted: verdict.distracted,
                provisional: false,
            },
            verdict.confidence,
        );
        let first_role = self
            .events
            .iter()
            .find(|e| matches!(e.kind, EventKind::Role { .. }))
            .map(|e| e.t_ms);
        verdict.latency_ms = entry_end_ms.zip(first_role).map(|(end, t)| t - end);
        Ok(PipelineOutput {
            evidence: self.evidence,
            verdict,
            events: self.events,
            max_buffered: self.max_buffered,
        })
    }
}

/// Runs the pipeline over a whole trace. Entry latency is measured against
/// the first labeled vehicle entry, when the trace carries labels.
pub fn run_pipeline(
    trace: &Trace,
    keystrokes: Option<&KeystrokeLog>,
    models: &Models,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    if trace.samples.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut config = *config;
    config.rate_hz = trace.nominal_rate_hz;
    let mut p = Pipeline::new(models.clone(), config)?;
    for s in &trace.samples {
        p.push(s)?;
    }
    let entry_end = trace
        .labels
        .iter()
        .find(|l| l.label == ActivityLabel::EnteringVehicle)
        .map(|l| l.end_ms);
    p.finish(keystrokes, entry_end)
}
