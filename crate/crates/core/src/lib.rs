//! Driver versus passenger detection from smartphone inertial traces.
//!
//! The crate turns a 20 Hz stream of accelerometer, magnetometer and
//! gyroscope readings into a role verdict for the phone's owner:
//!
//! 1. [`orientation`] tracks attitude with an error-state EKF and rotates
//!    readings into the earth frame.
//! 2. [`features`] cuts the earth-frame stream into sliding windows and
//!    extracts DCT coefficients and variances.
//! 3. [`activity`] classifies windows with Gaussian naive Bayes and confirms
//!    vehicle entry from magnetic and drive-away evidence.
//! 4. [`localize`] decides the entry side and the seat row.
//! 5. [`texting`] flags distracted typing from keystroke timing.
//! 6. [`pipeline`] fuses everything in a single bounded-memory pass.
//!
//! [`scheduler`] holds the duty-cycle and Markov transition models,
//! [`simulator`] produces labeled synthetic traces and [`trace_io`] /
//! [`model_file`] handle persistence.

pub mod activity;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod localize;
pub mod metrics;
pub mod model_file;
pub mod orientation;
pub mod pipeline;
pub mod scheduler;
pub mod simulator;
pub mod texting;
pub mod trace_io;
pub mod types;

pub use error::{Error, Result};
pub use types::{ActivityLabel, LabelSpan, SensorSample, Trace, Vec3, NOMINAL_RATE_HZ, STANDARD_GRAVITY};
