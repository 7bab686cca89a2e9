use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Standard gravity in m/s².
pub const STANDARD_GRAVITY: f64 = 9.80665;

pub const NOMINAL_RATE_HZ: f64 = 20.0;

/// One body-frame reading: accelerometer (m/s²), magnetometer (µT) and
/// gyroscope (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSample {
    pub t_ms: i64,
    pub accel: Vec3,
    pub mag: Vec3,
    pub gyro: Vec3,
}

impl SensorSample {
    pub fn channels(&self) -> [f64; 9] {
        [
            self.accel.x,
            self.accel.y,
            self.accel.z,
            self.mag.x,
            self.mag.y,
            self.mag.z,
            self.gyro.x,
            self.gyro.y,
            self.gyro.z,
        ]
    }

    pub fn from_channels(t_ms: i64, c: [f64; 9]) -> Self {
        Self {
            t_ms,
            accel: Vec3::new(c[0], c[1], c[2]),
            mag: Vec3::new(c[3], c[4], c[5]),
            gyro: Vec3::new(c[6], c[7], c[8]),
        }
    }
}

/// Activities the recognizer and the transition model know about.
///
/// Declaration order is the canonical order used for tie-breaking and for
/// serialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActivityLabel {
    Walking,
    EnteringVehicle,
    SittingDown,
    Stairs,
    Standing,
    GettingOnBus,
    Other,
}

impl ActivityLabel {
    pub const ALL: [ActivityLabel; 7] = [
        ActivityLabel::Walking,
        ActivityLabel::EnteringVehicle,
        ActivityLabel::SittingDown,
        ActivityLabel::Stairs,
        ActivityLabel::Standing,
        ActivityLabel::GettingOnBus,
        ActivityLabel::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActivityLabel::Walking => "Walking",
            ActivityLabel::EnteringVehicle => "EnteringVehicle",
            ActivityLabel::SittingDown => "SittingDown",
            ActivityLabel::Stairs => "Stairs",
            ActivityLabel::Standing => "Standing",
            ActivityLabel::GettingOnBus => "GettingOnBus",
            ActivityLabel::Other => "Other",
        }
    }
}

impl fmt::Display for ActivityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivityLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActivityLabel::ALL
            .iter()
            .copied()
            .find(|l| l.name() == s)
            .ok_or_else(|| format!("unknown activity label {s:?}"))
    }
}

/// Ground-truth span `[start_ms, end_ms]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpan {
    pub start_ms: i64,
    pub end_ms: i64,
    pub label: ActivityLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub samples: Vec<SensorSample>,
    pub nominal_rate_hz: f64,
    pub labels: Vec<LabelSpan>,
}

impl Trace {
    pub fn new(samples: Vec<SensorSample>) -> Self {
        Self {
            samples,
            nominal_rate_hz: NOMINAL_RATE_HZ,
            labels: Vec::new(),
        }
    }

    pub fn period_ms(&self) -> i64 {
        (1000.0 / self.nominal_rate_hz).round() as i64
    }

    pub fn duration_ms(&self) -> i64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t_ms - a.t_ms,
            _ => 0,
        }
    }

    /// Label covering `t_ms`, if any.
    pub fn label_at(&self, t_ms: i64) -> Option<ActivityLabel> {
        self.labels
            .iter()
            .find(|s| s.start_ms <= t_ms && t_ms <= s.end_ms)
            .map(|s| s.label)
    }
}
