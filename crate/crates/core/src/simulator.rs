//! Seeded synthetic sensor traces and keystroke logs.
//!
//! A scenario is a list of segments. Each segment produces an attitude
//! trajectory (roll, pitch, yaw of the phone), an earth-frame linear
//! acceleration and a change in magnetic field magnitude. Body-frame
//! readings are derived from those, so every trace comes with exact ground
//! truth. Per-sample noise is drawn from per-channel streams with a fixed
//! number of draws per sample, so appending segments never changes earlier
//! samples.

use std::f64::consts::PI;

use nalgebra::UnitQuaternion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::localize::{Pocket, Row, Side};
use crate::orientation::{from_euler, EulerAngles};
use crate::texting::{TextingClass, DISTRACTED_MEAN_MS, DISTRACTED_SD_MS, NORMAL_MEAN_MS, NORMAL_SD_MS};
use crate::trace_io::{KeyEvent, KeyKind, KeystrokeLog};
use crate::types::{ActivityLabel, LabelSpan, SensorSample, Trace, Vec3, NOMINAL_RATE_HZ, STANDARD_GRAVITY};

/// Earth magnetic field in the simulated earth frame, µT.
pub const EARTH_FIELD: [f64; 3] = [30.0, 0.0, 40.0];
/// Magnitude offset inside a vehicle cabin, µT.
pub const CABIN_OFFSET_UT: f64 = 6.0;
const SEATED_PITCH: f64 = 60.0 * PI / 180.0;
const POCKET_ROLL: f64 = 10.0 * PI / 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub accel: f64,
    pub gyro: f64,
    pub mag: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            accel: 0.05,
            gyro: 0.01,
            mag: 0.25,
        }
    }
}

impl NoiseConfig {
    pub const ZERO: NoiseConfig = NoiseConfig {
        accel: 0.0,
        gyro: 0.0,
        mag: 0.0,
    };
}

/// Where the phone sits when the engine starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Placement {
    Dashboard,
    CupHolder,
    Pocket,
    BackSeat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SegmentKind {
    Walk,
    Stairs,
    SitDown,
    EnterVehicleLeft,
    EnterVehicleRight,
    Idle,
    EngineStart {
        placement: Placement,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        amplitude_ut: Option<f64>,
    },
    Drive {
        bump_rate: f64,
        seat: Row,
    },
    BusBoard,
    Run,
    Jump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    #[serde(flatten)]
    pub kind: SegmentKind,
    pub duration_s: f64,
}

impl Segment {
    pub fn new(kind: SegmentKind, duration_s: f64) -> Self {
        Self { kind, duration_s }
    }
}

fn default_rate() -> f64 {
    NOMINAL_RATE_HZ
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    #[serde(default = "default_rate")]
    pub rate_hz: f64,
    pub pocket: Pocket,
    #[serde(default)]
    pub heading_deg: f64,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(rename = "segment")]
    pub segments: Vec<Segment>,
}

impl Scenario {
    pub fn new(seed: u64, pocket: Pocket, segments: Vec<Segment>) -> Self {
        Self {
            seed,
            rate_hz: NOMINAL_RATE_HZ,
            pocket,
            heading_deg: 0.0,
            noise: NoiseConfig::default(),
            segments,
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.segments.iter().map(|s| s.duration_s).sum()
    }

    /// The left/right reflection of this scenario.
    pub fn mirrored(&self) -> Self {
        let mut m = self.clone();
        m.pocket = self.pocket.flipped();
        m.heading_deg = -self.heading_deg;
        for s in &mut m.segments {
            s.kind = match s.kind {
                SegmentKind::EnterVehicleLeft => SegmentKind::EnterVehicleRight,
                SegmentKind::EnterVehicleRight => SegmentKind::EnterVehicleLeft,
                k => k,
            };
        }
        m
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0 && self.rate_hz <= 1000.0) {
            return bad(format!("rate_hz {} out of range", self.rate_hz));
        }
        if self.pocket == Pocket::Unknown {
            return bad("pocket must be LeftPocket or RightPocket".into());
        }
        if !self.heading_deg.is_finite() {
            return bad("heading_deg must be finite".into());
        }
        let n = self.noise;
        if ![n.accel, n.gyro, n.mag].iter().all(|v| v.is_finite() && *v >= 0.0) {
            return bad("noise levels must be finite and non-negative".into());
        }
        if self.segments.is_empty() {
            return bad("scenario has no segments".into());
        }
        for (i, s) in self.segments.iter().enumerate() {
            if !(s.duration_s.is_finite() && s.duration_s > 0.0) {
                return bad(format!("segment {i}: duration must be positive"));
            }
            match s.kind {
                SegmentKind::EnterVehicleLeft | SegmentKind::EnterVehicleRight if s.duration_s < 3.0 => {
                    return bad(format!("segment {i}: vehicle entry needs at least 3 s"));
                }
                SegmentKind::EngineStart { amplitude_ut: Some(a), .. } if !(a.is_finite() && a >= 0.0) => {
                    return bad(format!("segment {i}: spike amplitude must be non-negative"));
                }
                SegmentKind::EngineStart { .. } if s.duration_s < 1.0 => {
                    return bad(format!("segment {i}: engine start needs at least 1 s"));
                }
                SegmentKind::Drive { bump_rate, .. } if !(bump_rate.is_finite() && bump_rate >= 0.0) => {
                    return bad(format!("segment {i}: bump rate must be non-negative"));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// One simulated road bump: the front and back wheel hits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpTruth {
    pub t_front_s: f64,
    pub t_back_s: f64,
    pub amp_first: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryTruth {
    pub start_ms: i64,
    pub end_ms: i64,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub labels: Vec<LabelSpan>,
    pub entry: Option<EntryTruth>,
    pub seat: Option<Row>,
    pub motion_start_ms: Option<i64>,
    /// (peak time, amplitude) of every engine-start spike.
    pub spikes: Vec<(i64, f64)>,
    pub bumps: Vec<BumpTruth>,
    /// Per-sample ground-truth attitude.
    pub attitude: Vec<UnitQuaternion<f64>>,
}

/// Raised-cosine step from 0 at `x <= 0` to 1 at `x >= 1`.
fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        0.5 - 0.5 * (PI * x).cos()
    }
}

/// Raised-cosine bump on `[0, 1]`, peak 1 at 0.5.
fn hump(x: f64) -> f64 {
    if (0.0..=1.0).contains(&x) {
        0.5 - 0.5 * (2.0 * PI * x).cos()
    } else {
        0.0
    }
}

/// Half-sine pulse of width `w` seconds starting at `t0`.
fn pulse(t: f64, t0: f64, w: f64) -> f64 {
    let x = (t - t0) / w;
    if (0.0..=1.0).contains(&x) {
        (PI * x).sin()
    } else {
        0.0
    }
}

/// Fades a periodic pattern in and out at the segment edges.
fn edges(tau: f64, d: f64, ramp: f64) -> f64 {
    smoothstep(tau / ramp) * smoothstep((d - tau) / ramp)
}

#[derive(Debug, Clone, Copy, Default)]
struct Gait {
    freq: f64,
    amp: f64,
    phase: f64,
}

#[derive(Debug, Clone, Default)]
struct SegParams {
    gait: Gait,
    roll_amp: f64,
    pitch_amp: f64,
    shift: f64,
    fluct: [(f64, f64); 3],
    spike_amp: f64,
    bumps: Vec<BumpTruth>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Carry {
    heading: f64,
    seated: bool,
    in_vehicle: bool,
    engine: bool,
    mag_offset: f64,
}

#[derive(Debug, Clone)]
struct SegPlan {
    start_s: f64,
    seg: Segment,
    at_start: Carry,
    params: SegParams,
}

/// Kinematic state of the phone at one instant.
#[derive(Debug, Clone, Copy, Default)]
struct Kin {
    roll: f64,
    pitch: f64,
    yaw: f64,
    /// Earth-frame linear acceleration, m/s².
    accel: Vec3,
    /// Change of field magnitude, µT.
    mag_delta: f64,
    /// 0 standing, 1 seated.
    posture: f64,
    engine: bool,
    driving: bool,
}

fn segment_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1000 + index as u64);
    rng
}

fn channel_rng(seed: u64, channel: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(channel);
    rng
}

/// Poisson arrival times on `[0, duration_s)`.
pub fn poisson_arrivals<R: Rng + ?Sized>(rate: f64, duration_s: f64, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::new();
    let Ok(gap) = Exp::new(rate) else {
        return out;
    };
    if rate <= 0.0 {
        return out;
    }
    let mut t = 0.0;
    loop {
        t += gap.sample(rng);
        if t >= duration_s {
            return out;
        }
        out.push(t);
    }
}

fn uni(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

fn draw_gait(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Gait {
    Gait {
        freq: uni(rng, lo, hi),
        amp: uni(rng, 0.85, 1.15),
        phase: uni(rng, 0.0, 2.0 * PI),
    }
}

fn draw_params(kind: SegmentKind, d: f64, rng: &mut ChaCha8Rng) -> SegParams {
    let mut p = SegParams::default();
    match kind {
        SegmentKind::Walk | SegmentKind::BusBoard => p.gait = draw_gait(rng, 1.8, 2.2),
        SegmentKind::Stairs => p.gait = draw_gait(rng, 1.4, 1.8),
        SegmentKind::Run => p.gait = draw_gait(rng, 2.6, 3.0),
        SegmentKind::Jump => p.gait = draw_gait(rng, 1.1, 1.4),
        SegmentKind::SitDown => p.pitch_amp = uni(rng, 0.8, 1.2),
        SegmentKind::EnterVehicleLeft | SegmentKind::EnterVehicleRight => {
            p.gait = draw_gait(rng, 1.8, 2.2);
            p.roll_amp = uni(rng, 0.8, 1.2);
            p.pitch_amp = uni(rng, 0.85, 1.15);
            p.shift = uni(rng, -0.04, 0.04);
            for f in &mut p.fluct {
                *f = (uni(rng, 0.4, 1.5), uni(rng, 0.0, 2.0 * PI));
            }
        }
        SegmentKind::EngineStart { placement, amplitude_ut } => {
            p.spike_amp = match (amplitude_ut, placement) {
                (Some(a), _) => a,
                (None, Placement::Dashboard) => uni(rng, 18.0, 22.0),
                (None, Placement::CupHolder | Placement::Pocket) => uni(rng, 3.0, 5.0),
                (None, Placement::BackSeat) => 0.0,
            };
        }
        SegmentKind::Drive { bump_rate, seat } => {
            let arrivals = poisson_arrivals(bump_rate, d, rng);
            p.bumps = arrivals
                .into_iter()
                .map(|t| {
                    let lag = uni(rng, 0.3, 0.8);
                    let ratio = match seat {
                        Row::Front => uni(rng, 1.0, 1.4),
                        Row::Back => uni(rng, 2.6, 3.4),
                    };
                    BumpTruth {
                        t_front_s: t,
                        t_back_s: t + lag,
                        amp_first: uni(rng, 2.0, 3.0),
                        ratio,
                    }
                })
                .collect();
        }
        SegmentKind::Idle => {}
    }
    p
}

fn after(kind: SegmentKind, c: Carry) -> Carry {
    let mut c = c;
    match kind {
        SegmentKind::Walk | SegmentKind::Stairs | SegmentKind::Run | SegmentKind::Jump | SegmentKind::BusBoard => {
            c.seated = false;
        }
        SegmentKind::SitDown => c.seated = true,
        SegmentKind::EnterVehicleLeft | SegmentKind::EnterVehicleRight => {
            let s = if kind == SegmentKind::EnterVehicleLeft { 1.0 } else { -1.0 };
            c.heading += s * PI / 2.0;
            c.seated = true;
            c.in_vehicle = true;
            c.mag_offset = CABIN_OFFSET_UT;
        }
        SegmentKind::EngineStart { .. } => c.engine = true,
        SegmentKind::Drive { .. } | SegmentKind::Idle => {}
    }
    c
}

/// Periodic gait in the earth frame: vertical, forward and lateral
/// acceleration plus thigh swing.
fn gait(tau: f64, g: Gait, amps: (f64, f64, f64, f64)) -> (f64, f64, f64, f64) {
    let w = 2.0 * PI * g.freq * tau + g.phase;
    let (v, f, l, sw) = amps;
    (
        g.amp * v * w.sin(),
        g.amp * f * (w + PI / 2.0).sin(),
        g.amp * l * (0.5 * w).sin(),
        g.amp * sw * (0.5 * w).sin(),
    )
}

fn eval(plan: &SegPlan, tau: f64, pocket_sign: f64) -> Kin {
    let d = plan.seg.duration_s;
    let c = plan.at_start;
    let p = &plan.params;
    let mut k = Kin {
        roll: 0.0,
        pitch: 0.0,
        yaw: c.heading,
        accel: Vec3::zeros(),
        mag_delta: c.mag_offset,
        posture: if c.seated { 1.0 } else { 0.0 },
        engine: c.engine,
        driving: false,
    };
    let fwd = Vec3::new(c.heading.cos(), c.heading.sin(), 0.0);
    let lat = Vec3::new(-c.heading.sin(), c.heading.cos(), 0.0);
    let up = Vec3::z();
    let deg = PI / 180.0;

    let walk_like = |amps: (f64, f64, f64, f64), k: &mut Kin| {
        // Standing up first if seated.
        let t0 = if c.seated { 1.0 } else { 0.0 };
        if c.seated {
            k.posture = 1.0 - smoothstep(tau / t0);
            k.accel += up * 1.5 * pulse(tau, 0.0, t0);
        }
        if tau >= t0 {
            let e = edges(tau - t0, d - t0, 0.5);
            let (v, f, l, sw) = gait(tau - t0, p.gait, amps);
            k.accel += e * (up * v + fwd * f + lat * (pocket_sign * l));
            k.pitch += e * sw * deg;
        }
    };

    match plan.seg.kind {
        SegmentKind::Idle => {}
        SegmentKind::Walk => walk_like((2.0, 1.0, 0.4, 20.0), &mut k),
        SegmentKind::Stairs => {
            walk_like((3.0, 0.6, 0.3, 35.0), &mut k);
            let e = edges(tau, d, 0.5);
            let w = 4.0 * PI * p.gait.freq * tau + p.gait.phase;
            k.accel += up * e * p.gait.amp * 1.0 * w.sin();
        }
        SegmentKind::Run => walk_like((6.0, 3.0, 1.0, 40.0), &mut k),
        SegmentKind::Jump => {
            let t0 = if c.seated { 1.0 } else { 0.0 };
            walk_like((0.0, 0.0, 0.0, 0.0), &mut k);
            if tau >= t0 {
                let period = 1.0 / p.gait.freq;
                let x = ((tau - t0 + p.gait.phase / (2.0 * PI) * period) % period) / period;
                let e = edges(tau - t0, d - t0, 0.3);
                let a = 8.0 * hump(x / 0.25) - 7.0 * hump((x - 0.25) / 0.35) + 12.0 * hump((x - 0.6) / 0.2);
                k.accel += up * e * p.gait.amp * a;
                k.pitch += e * 15.0 * deg * hump((x - 0.55) / 0.45);
            }
        }
        SegmentKind::SitDown => {
            let x = (tau / d - 0.2) / 0.6;
            k.posture = smoothstep(x);
            let s = if (0.0..=1.0).contains(&x) { (2.0 * PI * x).sin() } else { 0.0 };
            k.accel += -(up * 2.5 + fwd * 0.8) * p.pitch_amp * s;
        }
        SegmentKind::BusBoard => {
            let x = tau / d;
            if x < 0.4 {
                let e = edges(tau, 0.4 * d, 0.4);
                let (v, f, l, sw) = gait(tau, p.gait, (2.0, 1.0, 0.4, 20.0));
                k.accel += e * (up * v + fwd * f + lat * (pocket_sign * l));
                k.pitch += e * sw * deg;
            }
            for start in [0.42, 0.62] {
                let h = hump((x - start) / 0.18);
                k.accel += up * 4.0 * p.gait.amp * h + fwd * 0.8 * h;
                k.pitch += 40.0 * deg * h;
            }
            k.mag_delta += 0.5 * smoothstep((x - 0.3) / 0.1) * (2.0 * PI * 0.7 * tau + p.gait.phase).sin();
        }
        SegmentKind::EnterVehicleLeft | SegmentKind::EnterVehicleRight => {
            let s = if plan.seg.kind == SegmentKind::EnterVehicleLeft { 1.0 } else { -1.0 };
            let x = tau / d - p.shift;
            // Approach: slowing gait.
            let approach = 0.3 * d;
            if tau < approach {
                let e = edges(tau, approach, 0.3) * (1.0 - 0.7 * tau / approach);
                let (v, f, l, sw) = gait(tau, p.gait, (2.0, 1.0, 0.4, 20.0));
                k.accel += e * (up * v + fwd * f + lat * (pocket_sign * l));
                k.pitch += e * sw * deg;
            }
            // Turn to face the direction of travel.
            k.yaw += s * PI / 2.0 * smoothstep((x - 0.3) / 0.3);
            // The leg nearer the cabin goes in first.
            let inner = s * pocket_sign < 0.0;
            let (lift_at, pitch_peak, roll_peak) = if inner { (0.3, 50.0, 30.0) } else { (0.5, 45.0, 20.0) };
            let h = hump((x - lift_at) / 0.25);
            k.pitch += p.pitch_amp * pitch_peak * deg * h;
            k.roll += s * p.roll_amp * roll_peak * deg * h;
            k.accel += lat * s * 1.2 * hump((x - 0.3) / 0.3);
            // Sit.
            let sit = (x - 0.55) / 0.3;
            k.posture = smoothstep(sit);
            let drop = if (0.0..=1.0).contains(&sit) { (2.0 * PI * sit).sin() } else { 0.0 };
            k.accel += -up * 2.5 * drop;
            // Cabin field: fluctuation on approach, then a level offset.
            let env = smoothstep(x / 0.1) * smoothstep((0.55 - x) / 0.1);
            let fl: f64 = p.fluct.iter().map(|&(f, ph)| (2.0 * PI * f * tau + ph).sin()).sum();
            k.mag_delta += 2.2 * env * fl + CABIN_OFFSET_UT * smoothstep(sit);
        }
        SegmentKind::EngineStart { .. } => {
            let peak = (0.5_f64).min(d / 2.0);
            // 0.3 s plateau with 0.1 s edges.
            let edge = |t: f64| smoothstep(t / 0.1);
            let shape = edge(tau - (peak - 0.25)) * edge((peak + 0.25) - tau);
            k.mag_delta += p.spike_amp * shape;
            k.engine = tau >= peak - 0.25;
        }
        SegmentKind::Drive { .. } => {
            k.driving = true;
            let launch = smoothstep(tau / 0.5) * smoothstep((5.5 - tau) / 0.5);
            let cruise = smoothstep((tau - 6.0) / 2.0) * 0.3 * (2.0 * PI * tau / 20.0).sin();
            k.accel += fwd * (1.8 * launch + cruise);
            for b in &p.bumps {
                k.accel += up
                    * (b.amp_first * pulse(tau, b.t_front_s, 0.2) + b.amp_first * b.ratio * pulse(tau, b.t_back_s, 0.2));
            }
        }
    }
    k.pitch += SEATED_PITCH * k.posture;
    // The thigh rolls outward in the pocket once seated.
    k.roll += pocket_sign * POCKET_ROLL * k.posture;
    k
}

fn label_for(kind: SegmentKind, c: Carry) -> Option<ActivityLabel> {
    Some(match kind {
        SegmentKind::Walk => ActivityLabel::Walking,
        SegmentKind::Stairs => ActivityLabel::Stairs,
        SegmentKind::SitDown => ActivityLabel::SittingDown,
        SegmentKind::EnterVehicleLeft | SegmentKind::EnterVehicleRight => ActivityLabel::EnteringVehicle,
        SegmentKind::BusBoard => ActivityLabel::GettingOnBus,
        SegmentKind::Run | SegmentKind::Jump => ActivityLabel::Other,
        SegmentKind::Idle if !c.seated && !c.in_vehicle => ActivityLabel::Standing,
        _ => return None,
    })
}

/// Generates the trace and its ground truth. Deterministic in the scenario.
pub fn generate(scenario: &Scenario) -> Result<(Trace, GroundTruth)> {
    scenario.validate()?;
    let pocket_sign = if scenario.pocket == Pocket::LeftPocket { 1.0 } else { -1.0 };
    let mut plans = Vec::with_capacity(scenario.segments.len());
    let mut carry = Carry {
        heading: scenario.heading_deg.to_radians(),
        ..Carry::default()
    };
    let mut start = 0.0;
    for (i, seg) in scenario.segments.iter().enumerate() {
        let mut rng = segment_rng(scenario.seed, i);
        let params = draw_params(seg.kind, seg.duration_s, &mut rng);
        let next = after(seg.kind, carry);
        plans.push(SegPlan {
            start_s: start,
            seg: *seg,
            at_start: carry,
            params,
        });
        carry = next;
        start += seg.duration_s;
    }
    let total_s = start;

    let period_ms = (1000.0 / scenario.rate_hz).round().max(1.0) as i64;
    let dt = period_ms as f64 / 1000.0;
    let n = ((total_s * 1000.0) as i64 / period_ms + 1).max(2) as usize;
    let last_ms = (n as i64 - 1) * period_ms;

    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut accel_rng = channel_rng(scenario.seed, 1);
    let mut gyro_rng = channel_rng(scenario.seed, 2);
    let mut mag_rng = channel_rng(scenario.seed, 3);
    let mut vib_rng = channel_rng(scenario.seed, 4);
    let mut road_rng = channel_rng(scenario.seed, 5);
    let draw3 = |rng: &mut ChaCha8Rng| Vec3::new(unit.sample(rng), unit.sample(rng), unit.sample(rng));

    let field = Vec3::from(EARTH_FIELD);
    let field_norm = field.norm();
    let gravity = Vec3::new(0.0, 0.0, STANDARD_GRAVITY);
    let noise = scenario.noise;

    let mut samples = Vec::with_capacity(n);
    let mut attitude = Vec::with_capacity(n);
    let mut q_prev: Option<UnitQuaternion<f64>> = None;
    let mut seg_idx = 0;
    for i in 0..n {
        let t_ms = i as i64 * period_ms;
        let t = t_ms as f64 / 1000.0;
        while seg_idx + 1 < plans.len() && t >= plans[seg_idx + 1].start_s {
            seg_idx += 1;
        }
        let plan = &plans[seg_idx];
        let tau = (t - plan.start_s).min(plan.seg.duration_s);
        let kin = eval(plan, tau, pocket_sign);

        let q = from_euler(&EulerAngles {
            pitch: kin.pitch,
            roll: kin.roll,
            yaw: kin.yaw,
        });
        let omega = match q_prev {
            Some(prev) => (prev.inverse() * q).scaled_axis() / dt,
            None => Vec3::zeros(),
        };
        q_prev = Some(q);

        let vib = draw3(&mut vib_rng);
        let road = unit.sample(&mut road_rng);
        let mut lin = kin.accel;
        if kin.engine {
            lin += vib * 0.15;
        }
        if kin.driving {
            lin.z += 0.1 * road;
        }
        let b = field * ((field_norm + kin.mag_delta) / field_norm);
        let inv = q.inverse();
        let accel = inv * (lin + gravity) + draw3(&mut accel_rng) * noise.accel;
        let gyro = omega + draw3(&mut gyro_rng) * noise.gyro;
        let mag = inv * b + draw3(&mut mag_rng) * noise.mag;
        samples.push(SensorSample { t_ms, accel, mag, gyro });
        attitude.push(q);
    }

    let to_ms = |s: f64| ((s * 1000.0).round() as i64).min(last_ms);
    let mut truth = GroundTruth {
        attitude,
        ..GroundTruth::default()
    };
    for plan in &plans {
        let s_ms = to_ms(plan.start_s);
        let e_ms = to_ms(plan.start_s + plan.seg.duration_s);
        if let Some(label) = label_for(plan.seg.kind, plan.at_start) {
            if e_ms > s_ms {
                truth.labels.push(LabelSpan {
                    start_ms: s_ms,
                    end_ms: e_ms,
                    label,
                });
            }
        }
        match plan.seg.kind {
            SegmentKind::EnterVehicleLeft | SegmentKind::EnterVehicleRight if truth.entry.is_none() => {
                truth.entry = Some(EntryTruth {
                    start_ms: s_ms,
                    end_ms: e_ms,
                    side: if plan.seg.kind == SegmentKind::EnterVehicleLeft { Side::Left } else { Side::Right },
                });
            }
            SegmentKind::EngineStart { .. } if plan.params.spike_amp > 0.0 => {
                let peak = 0.5_f64.min(plan.seg.duration_s / 2.0);
                truth.spikes.push((to_ms(plan.start_s + peak), plan.params.spike_amp));
            }
            SegmentKind::Drive { seat, .. } => {
                truth.seat.get_or_insert(seat);
                truth.motion_start_ms.get_or_insert(s_ms);
                truth.bumps.extend(plan.params.bumps.iter().map(|b| BumpTruth {
                    t_front_s: b.t_front_s + plan.start_s,
                    t_back_s: b.t_back_s + plan.start_s,
                    ..*b
                }));
            }
            _ => {}
        }
    }

    let mut trace = Trace::new(samples);
    trace.nominal_rate_hz = scenario.rate_hz;
    trace.labels = truth.labels.clone();
    Ok((trace, truth))
}

/// Applies the left/right reflection to a body-frame sample: the lateral
/// axis of accelerometer and magnetometer flips, and the angular rate about
/// the other two axes flips.
pub fn mirror_sample(s: &SensorSample) -> SensorSample {
    SensorSample {
        t_ms: s.t_ms,
        accel: Vec3::new(s.accel.x, -s.accel.y, s.accel.z),
        mag: Vec3::new(s.mag.x, -s.mag.y, s.mag.z),
        gyro: Vec3::new(-s.gyro.x, s.gyro.y, -s.gyro.z),
    }
}

/// Inter-key interval mixture: a fast typing component plus a slow one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalMixture {
    pub fast_mean: f64,
    pub fast_sd: f64,
    pub slow_weight: f64,
    pub slow_mean: f64,
    pub slow_sd: f64,
    /// Mean letters between typos.
    pub typo_every: f64,
}

impl IntervalMixture {
    /// Solves the slow component so the mixture has the given overall mean
    /// and standard deviation.
    pub fn matched(mean: f64, sd: f64, fast_mean: f64, fast_sd: f64, slow_weight: f64, typo_every: f64) -> Self {
        let w = slow_weight;
        let slow_mean = (mean - (1.0 - w) * fast_mean) / w;
        let second = sd * sd + mean * mean;
        let slow_second = (second - (1.0 - w) * (fast_sd * fast_sd + fast_mean * fast_mean)) / w;
        Self {
            fast_mean,
            fast_sd,
            slow_weight: w,
            slow_mean,
            slow_sd: (slow_second - slow_mean * slow_mean).sqrt(),
            typo_every,
        }
    }

    pub fn for_class(class: TextingClass) -> Self {
        match class {
            TextingClass::Normal => Self::matched(NORMAL_MEAN_MS, NORMAL_SD_MS, 460.0, 150.0, 0.10, 50.0),
            TextingClass::Distracted => Self::matched(DISTRACTED_MEAN_MS, DISTRACTED_SD_MS, 480.0, 250.0, 0.25, 30.0),
        }
    }

    pub fn mean(&self) -> f64 {
        (1.0 - self.slow_weight) * self.fast_mean + self.slow_weight * self.slow_mean
    }
}

fn gamma(mean: f64, sd: f64) -> Gamma<f64> {
    let shape = (mean / sd).powi(2);
    Gamma::new(shape, sd * sd / mean).expect("positive gamma parameters")
}

pub fn generate_keystrokes(class: TextingClass, n_letters: usize, seed: u64) -> KeystrokeLog {
    generate_keystrokes_from(&IntervalMixture::for_class(class), n_letters, seed, 0)
}

/// Letters separated by mixture intervals; a typo is a backspace halfway to
/// the next letter.
pub fn generate_keystrokes_from(mix: &IntervalMixture, n_letters: usize, seed: u64, t0_ms: i64) -> KeystrokeLog {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fast = gamma(mix.fast_mean, mix.fast_sd);
    let slow = gamma(mix.slow_mean, mix.slow_sd);
    let mut events = Vec::with_capacity(n_letters + n_letters / 10);
    let mut t = t0_ms;
    for i in 0..n_letters {
        if i > 0 {
            let dist = if rng.random::<f64>() < mix.slow_weight { &slow } else { &fast };
            let gap = dist.sample(&mut rng).round().max(1.0) as i64;
            if rng.random::<f64>() < 1.0 / mix.typo_every {
                events.push(KeyEvent {
                    t_ms: t + gap / 2,
                    kind: KeyKind::Backspace,
                });
            }
            t += gap;
        }
        events.push(KeyEvent {
            t_ms: t,
            kind: KeyKind::Letter,
        });
    }
    KeystrokeLog { events }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(segments: Vec<Segment>) -> Scenario {
        Scenario::new(11, Pocket::LeftPocket, segments)
    }

    #[test]
    fn idle_noiseless() {
        let mut s = scenario(vec![Segment::new(SegmentKind::Idle, 10.0)]);
        s.noise = NoiseConfig::ZERO;
        let (trace, truth) = generate(&s).unwrap();
        assert_eq!(trace.samples.len(), 201);
        assert_eq!(truth.labels[0].label, ActivityLabel::Standing);
        for x in &trace.samples {
            assert_eq!(x.accel, Vec3::new(0.0, 0.0, STANDARD_GRAVITY));
            assert_eq!(x.gyro, Vec3::zeros());
        }
    }

    #[test]
    fn seated_pocket_roll() {
        let mut s = scenario(vec![
            Segment::new(SegmentKind::Idle, 2.0),
            Segment::new(SegmentKind::SitDown, 2.5),
            Segment::new(SegmentKind::Idle, 2.0),
        ]);
        s.noise = NoiseConfig::ZERO;
        let (_, truth) = generate(&s).unwrap();
        let e = crate::orientation::to_euler(truth.attitude.last().unwrap());
        assert!((e.roll - POCKET_ROLL).abs() < 1e-9);
        assert!((e.pitch - SEATED_PITCH).abs() < 1e-9);
    }

    #[test]
    fn deterministic() {
        let s = scenario(vec![
            Segment::new(SegmentKind::Idle, 2.0),
            Segment::new(SegmentKind::Walk, 4.0),
        ]);
        assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
    }

    #[test]
    fn appending_keeps_prefix() {
        let short = scenario(vec![
            Segment::new(SegmentKind::Idle, 2.0),
            Segment::new(SegmentKind::Walk, 4.0),
        ]);
        let mut long = short.clone();
        long.segments.push(Segment::new(SegmentKind::Run, 3.0));
        let (a, _) = generate(&short).unwrap();
        let (b, _) = generate(&long).unwrap();
        let k = a.samples.len() - 1;
        assert_eq!(a.samples[..k], b.samples[..k]);
    }

    #[test]
    fn invalid() {
        assert!(matches!(
            generate(&scenario(vec![Segment::new(SegmentKind::Walk, 0.0)])),
            Err(Error::InvalidScenario(_))
        ));
        assert!(generate(&scenario(vec![])).is_err());
        let mut s = scenario(vec![Segment::new(SegmentKind::Idle, 1.0)]);
        s.pocket = Pocket::Unknown;
        assert!(generate(&s).is_err());
    }

    #[test]
    fn mixture_moments() {
        for (class, mean, sd) in [
            (TextingClass::Normal, NORMAL_MEAN_MS, NORMAL_SD_MS),
            (TextingClass::Distracted, DISTRACTED_MEAN_MS, DISTRACTED_SD_MS),
        ] {
            let m = IntervalMixture::for_class(class);
            assert!((m.mean() - mean).abs() < 1e-9);
            let w = m.slow_weight;
            let second = (1.0 - w) * (m.fast_sd.powi(2) + m.fast_mean.powi(2)) + w * (m.slow_sd.powi(2) + m.slow_mean.powi(2));
            assert!(((second - mean * mean).sqrt() - sd).abs() < 1e-9);
        }
    }

    #[test]
    fn keystrokes_deterministic() {
        let a = generate_keystrokes(TextingClass::Normal, 200, 3);
        assert_eq!(a, generate_keystrokes(TextingClass::Normal, 200, 3));
        assert_eq!(a.events.iter().filter(|e| e.kind == KeyKind::Letter).count(), 200);
        assert!(a.events.windows(2).all(|w| w[0].t_ms <= w[1].t_ms));
    }
}
