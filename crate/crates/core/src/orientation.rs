//! Attitude tracking with a multiplicative (error-state) extended Kalman filter.
//!
//! The nominal state is a unit quaternion rotating body-frame vectors into the
//! earth frame. The filter keeps a 3×3 covariance over a small body-frame
//! rotation error. Gyro readings drive the prediction; the accelerometer
//! corrects tilt and the magnetometer corrects heading.
//!
//! Earth frame axes: x points to magnetic north, z is aligned with the at-rest
//! accelerometer reading and y completes a right-handed frame. The linear
//! acceleration returned by [`to_efc`] therefore has gravity removed from z.

use nalgebra::{Matrix3, Rotation3, RowVector3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::types::{SensorSample, Vec3, STANDARD_GRAVITY};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfConfig {
    /// Gyro noise variance, (rad/s)².
    pub gyro_var: f64,
    /// Accelerometer measurement variance, (m/s²)².
    pub accel_var: f64,
    /// Heading measurement variance, rad².
    pub heading_var: f64,
    /// Initial attitude variance per axis, rad².
    pub initial_attitude_var: f64,
    /// Skip the tilt correction when `| |a| - g |` exceeds this, m/s².
    pub accel_gate: f64,
    /// Chi-square bound on the normalized tilt innovation (3 dof).
    pub accel_innovation_gate: f64,
    /// Chi-square bound on the normalized heading innovation (1 dof).
    pub heading_innovation_gate: f64,
    pub gyro_bias: Vec3,
    pub use_mag: bool,
    pub min_init_span_ms: i64,
    pub max_init_gyro: f64,
}

impl Default for EkfConfig {
    fn default() -> Self {
        Self {
            gyro_var: 1e-3,
            accel_var: 5e-2,
            heading_var: 1e-1,
            initial_attitude_var: 5f64.to_radians().powi(2),
            accel_gate: 2.0,
            accel_innovation_gate: 11.34,
            heading_innovation_gate: 6.63,
            gyro_bias: Vec3::zeros(),
            use_mag: true,
            min_init_span_ms: 500,
            max_init_gyro: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationState {
    /// Body to earth rotation.
    pub q: UnitQuaternion<f64>,
    /// Covariance of the body-frame attitude error, rad².
    pub p: Matrix3<f64>,
    pub t_ms: i64,
}

impl OrientationState {
    pub fn new(q: UnitQuaternion<f64>, t_ms: i64, config: &EkfConfig) -> Self {
        Self {
            q,
            p: Matrix3::identity() * config.initial_attitude_var,
            t_ms,
        }
    }

    pub fn euler(&self) -> EulerAngles {
        to_euler(&self.q)
    }
}

/// Z-Y-X intrinsic angles of the body to earth rotation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerAngles {
    pub pitch: f64,
    pub roll: f64,
    pub yaw: f64,
}

impl EulerAngles {
    /// Left/right reflection: the lateral axis flips, so roll and yaw change
    /// sign and pitch is preserved.
    pub fn mirrored(self) -> Self {
        Self {
            pitch: self.pitch,
            roll: -self.roll,
            yaw: -self.yaw,
        }
    }
}

/// Earth-frame view of one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfcSample {
    pub t_ms: i64,
    /// (north, east, down) with gravity removed from the third axis.
    pub linear_accel_efc: Vec3,
    pub mag_efc: Vec3,
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn symmetrize(p: &Matrix3<f64>) -> Matrix3<f64> {
    (p + p.transpose()) * 0.5
}

/// Rotation taking the measured gravity reaction to +z and the horizontal
/// part of the magnetic field to +x.
fn triad(accel: &Vec3, mag: &Vec3) -> Option<UnitQuaternion<f64>> {
    let z = accel.try_normalize(1e-9)?;
    let horizontal = mag - z * mag.dot(&z);
    let x = match horizontal.try_normalize(1e-9) {
        Some(x) => x,
        // No usable heading reference: pick any axis orthogonal to z.
        None => {
            let seed = if z.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
            (seed - z * seed.dot(&z)).normalize()
        }
    };
    let y = z.cross(&x);
    let r = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
    Some(UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r)))
}

/// Initializes the filter from an approximately static window.
pub fn ekf_init(window: &[SensorSample], config: &EkfConfig) -> Result<OrientationState> {
    let (first, last) = match (window.first(), window.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::NotStatic("empty window".into())),
    };
    let span = last.t_ms - first.t_ms;
    if span < config.min_init_span_ms {
        return Err(Error::NotStatic(format!(
            "window spans {span} ms, need {} ms",
            config.min_init_span_ms
        )));
    }
    let n = window.len() as f64;
    let mean_gyro = window.iter().map(|s| (s.gyro - config.gyro_bias).norm()).sum::<f64>() / n;
    if mean_gyro >= config.max_init_gyro {
        return Err(Error::NotStatic(format!("mean gyro magnitude {mean_gyro:.3} rad/s")));
    }
    let accel = window.iter().map(|s| s.accel).sum::<Vec3>() / n;
    let mag = window.iter().map(|s| s.mag).sum::<Vec3>() / n;
    let q = triad(&accel, &mag).ok_or_else(|| Error::NotStatic("zero mean acceleration".into()))?;
    Ok(OrientationState::new(q, last.t_ms, config))
}

/// One predict/correct cycle.
pub fn ekf_step(state: &OrientationState, sample: &SensorSample, config: &EkfConfig) -> Result<OrientationState> {
    if sample.t_ms <= state.t_ms {
        return Err(Error::NonIncreasingTime {
            last: state.t_ms,
            current: sample.t_ms,
        });
    }
    let dt = (sample.t_ms - state.t_ms) as f64 / 1000.0;

    // Predict.
    let omega = sample.gyro - config.gyro_bias;
    let dq = UnitQuaternion::from_scaled_axis(omega * dt);
    let mut q = state.q * dq;
    let f = dq.to_rotation_matrix().into_inner().transpose();
    let mut p = f * state.p * f.transpose() + Matrix3::identity() * (config.gyro_var * dt * dt);

    // Tilt correction.
    let accel_norm = sample.accel.norm();
    if (accel_norm - STANDARD_GRAVITY).abs() <= config.accel_gate {
        let r = q.to_rotation_matrix().into_inner();
        let h = r.transpose() * Vec3::new(0.0, 0.0, STANDARD_GRAVITY);
        let y = sample.accel - h;
        let jac = skew(&h);
        let s = jac * p * jac.transpose() + Matrix3::identity() * config.accel_var;
        if let Some(s_inv) = s.try_inverse() {
            let nis = (y.transpose() * s_inv * y)[(0, 0)];
            if nis <= config.accel_innovation_gate {
                let k = p * jac.transpose() * s_inv;
                q *= UnitQuaternion::from_scaled_axis(k * y);
                let a = Matrix3::identity() - k * jac;
                p = a * p * a.transpose() + k * k.transpose() * config.accel_var;
            }
        }
    }

    // Heading correction.
    if config.use_mag {
        let r = q.to_rotation_matrix().into_inner();
        let m = r * sample.mag;
        if m.x.hypot(m.y) > 1e-6 {
            let innovation = -m.y.atan2(m.x);
            let jac: RowVector3<f64> = r.row(2).into_owned();
            let s = (jac * p * jac.transpose())[(0, 0)] + config.heading_var;
            if innovation * innovation / s <= config.heading_innovation_gate {
                let k = p * jac.transpose() / s;
                q *= UnitQuaternion::from_scaled_axis(k * innovation);
                let a = Matrix3::identity() - k * jac;
                p = a * p * a.transpose() + k * k.transpose() * config.heading_var;
            }
        }
    }

    q.renormalize();
    Ok(OrientationState {
        q,
        p: symmetrize(&p),
        t_ms: sample.t_ms,
    })
}

pub fn to_euler(q: &UnitQuaternion<f64>) -> EulerAngles {
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    let roll = (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y));
    let pitch = (2.0 * (w * y - z * x)).clamp(-1.0, 1.0).asin();
    let yaw = (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z));
    let wrap = |a: f64| if a <= -std::f64::consts::PI { a + 2.0 * std::f64::consts::PI } else { a };
    EulerAngles {
        pitch,
        roll: wrap(roll),
        yaw: wrap(yaw),
    }
}

pub fn from_euler(e: &EulerAngles) -> UnitQuaternion<f64> {
    UnitQuaternion::from_euler_angles(e.roll, e.pitch, e.yaw)
}

pub fn rotate(q: &UnitQuaternion<f64>, v: &Vec3) -> Vec3 {
    q.transform_vector(v)
}

pub fn to_efc(state: &OrientationState, sample: &SensorSample) -> EfcSample {
    let accel = rotate(&state.q, &sample.accel);
    EfcSample {
        t_ms: sample.t_ms,
        linear_accel_efc: accel - Vec3::new(0.0, 0.0, STANDARD_GRAVITY),
        mag_efc: rotate(&state.q, &sample.mag),
    }
}

/// Streaming wrapper: buffers samples until a static initialization window
/// is found, then advances the filter one sample at a time.
#[derive(Debug, Clone)]
pub struct OrientationTracker {
    config: EkfConfig,
    state: Option<OrientationState>,
    pending: Vec<SensorSample>,
}

impl OrientationTracker {
    pub fn new(config: EkfConfig) -> Self {
        Self {
            config,
            state: None,
            pending: Vec::new(),
        }
    }

    pub fn state(&self) -> Option<&OrientationState> {
        self.state.as_ref()
    }

    /// Samples held while waiting for initialization.
    pub fn buffered(&self) -> usize {
        self.pending.len()
    }

    /// Feeds one sample. Returns the earth-frame sample and attitude once the
    /// filter is running.
    pub fn push(&mut self, sample: &SensorSample) -> Result<Option<(EfcSample, EulerAngles)>> {
        match &self.state {
            Some(state) => {
                let next = ekf_step(state, sample, &self.config)?;
                let out = (to_efc(&next, sample), next.euler());
                self.state = Some(next);
                Ok(Some(out))
            }
            None => {
                self.pending.push(*sample);
                let span = sample.t_ms - self.pending[0].t_ms;
                if span < self.config.min_init_span_ms {
                    return Ok(None);
                }
                match ekf_init(&self.pending, &self.config) {
                    Ok(state) => {
                        let out = (to_efc(&state, sample), state.euler());
                        self.state = Some(state);
                        self.pending.clear();
                        Ok(Some(out))
                    }
                    Err(Error::NotStatic(_)) => {
                        self.pending.remove(0);
                        Ok(None)
                    }
                    Err(e) => Err(e),
                }
            }
        }
    }
}
