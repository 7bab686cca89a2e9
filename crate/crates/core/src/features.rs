//! Sliding windows over earth-frame streams and DCT feature extraction.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::orientation::EfcSample;
use crate::types::NOMINAL_RATE_HZ;

/// Default number of DCT coefficients kept per channel.
pub const DEFAULT_COEFFS: usize = 20;
pub const DEFAULT_WINDOW_MS: i64 = 4500;

pub fn horizontal_magnitude(s: &EfcSample) -> f64 {
    s.linear_accel_efc.x.hypot(s.linear_accel_efc.y)
}

/// Orthonormal DCT-II of a fixed length, computed with one complex FFT
/// (Makhoul's even/odd reordering).
pub struct Dct {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `exp(-iπk / 2N)`
    twiddle: Vec<Complex64>,
}

impl std::fmt::Debug for Dct {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dct").field("n", &self.n).finish()
    }
}

impl Clone for Dct {
    fn clone(&self) -> Self {
        Self {
            n: self.n,
            forward: Arc::clone(&self.forward),
            inverse: Arc::clone(&self.inverse),
            twiddle: self.twiddle.clone(),
        }
    }
}

impl Dct {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySignal);
        }
        let mut planner = FftPlanner::new();
        let twiddle = (0..n)
            .map(|k| Complex64::from_polar(1.0, -std::f64::consts::PI * k as f64 / (2.0 * n as f64)))
            .collect();
        Ok(Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            twiddle,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn scale(&self, k: usize) -> f64 {
        let n = self.n as f64;
        if k == 0 {
            (1.0 / n).sqrt()
        } else {
            (2.0 / n).sqrt()
        }
    }

    /// Writes the first `out.len()` coefficients of `input`. `buf` is scratch
    /// space of length `len()`.
    pub fn forward_into(&self, input: &[f64], out: &mut [f64], buf: &mut [Complex64]) {
        let n = self.n;
        assert_eq!(input.len(), n);
        assert!(out.len() <= n && buf.len() == n);
        for (i, slot) in buf.iter_mut().enumerate() {
            // v[i] = x[2i] for the first half, v[n-1-i] = x[2i+1] for the rest.
            let src = if 2 * i < n { 2 * i } else { 2 * (n - 1 - i) + 1 };
            *slot = Complex64::new(input[src], 0.0);
        }
        self.forward.process(buf);
        for (k, o) in out.iter_mut().enumerate() {
            *o = (buf[k] * self.twiddle[k]).re * self.scale(k);
        }
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        let mut buf = vec![Complex64::default(); self.n];
        self.forward_into(input, &mut out, &mut buf);
        out
    }

    /// Orthonormal DCT-III, the inverse of [`Dct::forward`].
    pub fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(coeffs.len(), n);
        let unscaled: Vec<f64> = coeffs.iter().enumerate().map(|(k, c)| c / self.scale(k)).collect();
        let mut buf: Vec<Complex64> = (0..n)
            .map(|k| {
                let mirror = if k == 0 { 0.0 } else { unscaled[n - k] };
                Complex64::new(unscaled[k], -mirror) * self.twiddle[k].conj()
            })
            .collect();
        self.inverse.process(&mut buf);
        let mut out = vec![0.0; n];
        for (i, v) in buf.iter().enumerate() {
            let dst = if 2 * i < n { 2 * i } else { 2 * (n - 1 - i) + 1 };
            out[dst] = v.re / n as f64;
        }
        out
    }
}

pub fn dct(signal: &[f64]) -> Result<Vec<f64>> {
    Ok(Dct::new(signal.len())?.forward(signal))
}

pub fn idct(coeffs: &[f64]) -> Result<Vec<f64>> {
    Ok(Dct::new(coeffs.len())?.inverse(coeffs))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowConfig {
    pub duration_ms: i64,
    pub step_ms: i64,
    pub rate_hz: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            duration_ms: DEFAULT_WINDOW_MS,
            step_ms: 1000,
            rate_hz: NOMINAL_RATE_HZ,
        }
    }
}

impl WindowConfig {
    pub fn samples_per_window(&self) -> usize {
        (self.rate_hz * self.duration_ms as f64 / 1000.0).round() as usize
    }

    pub fn samples_per_step(&self) -> usize {
        ((self.rate_hz * self.step_ms as f64 / 1000.0).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Window<'a> {
    pub start_ms: i64,
    pub duration_ms: i64,
    pub samples: &'a [EfcSample],
}

/// Full windows only; a trailing partial window is dropped.
pub fn sliding_windows<'a>(stream: &'a [EfcSample], config: &WindowConfig) -> impl Iterator<Item = Window<'a>> + 'a {
    let len = config.samples_per_window();
    let step = config.samples_per_step();
    let duration_ms = config.duration_ms;
    let count = if len == 0 || stream.len() < len {
        0
    } else {
        (stream.len() - len) / step + 1
    };
    (0..count).map(move |i| {
        let samples = &stream[i * step..i * step + len];
        Window {
            start_ms: samples[0].t_ms,
            duration_ms,
            samples,
        }
    })
}

/// DCT coefficients and variances for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub horiz_dct: Vec<f64>,
    pub vert_dct: Vec<f64>,
    pub horiz_var: f64,
    pub vert_var: f64,
    /// Variance of the magnetic field magnitude, µT².
    pub mag_var: f64,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.horiz_dct.len() + self.vert_dct.len() + 3
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat layout: horizontal DCT, vertical DCT, then the three variances.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.extend_from_slice(&self.horiz_dct);
        v.extend_from_slice(&self.vert_dct);
        v.extend([self.horiz_var, self.vert_var, self.mag_var]);
        v
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Reusable extractor holding the DCT plan and scratch buffers for one
/// window length.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    k: usize,
    dct: Dct,
    buf: Vec<Complex64>,
    horiz: Vec<f64>,
    vert: Vec<f64>,
    mag: Vec<f64>,
}

impl FeatureExtractor {
    pub fn new(window_len: usize, k: usize) -> Result<Self> {
        if k > window_len {
            return Err(Error::KTooLarge {
                k,
                available: window_len,
            });
        }
        Ok(Self {
            k,
            dct: Dct::new(window_len)?,
            buf: vec![Complex64::default(); window_len],
            horiz: Vec::with_capacity(window_len),
            vert: Vec::with_capacity(window_len),
            mag: Vec::with_capacity(window_len),
        })
    }

    pub fn coeffs(&self) -> usize {
        self.k
    }

    pub fn window_len(&self) -> usize {
        self.dct.len()
    }

    pub fn extract<'a, I>(&mut self, samples: I) -> Result<FeatureVector>
    where
        I: IntoIterator<Item = &'a EfcSample>,
    {
        self.horiz.clear();
        self.vert.clear();
        self.mag.clear();
        for s in samples {
            self.horiz.push(horizontal_magnitude(s));
            self.vert.push(s.linear_accel_efc.z);
            self.mag.push(s.mag_efc.norm());
        }
        if self.horiz.len() != self.dct.len() {
            return Err(Error::InvalidParams(format!(
                "window has {} samples, extractor expects {}",
                self.horiz.len(),
                self.dct.len()
            )));
        }
        let mut horiz_dct = vec![0.0; self.k];
        let mut vert_dct = vec![0.0; self.k];
        self.dct.forward_into(&self.horiz, &mut horiz_dct, &mut self.buf);
        self.dct.forward_into(&self.vert, &mut vert_dct, &mut self.buf);
        Ok(FeatureVector {
            horiz_dct,
            vert_dct,
            horiz_var: variance(&self.horiz),
            vert_var: variance(&self.vert),
            mag_var: variance(&self.mag),
        })
    }

    /// First `k` DCT coefficients of an arbitrary series of the window length.
    pub fn channel_dct(&mut self, series: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.k];
        self.dct.forward_into(series, &mut out, &mut self.buf);
        out
    }
}

pub fn extract_features(window: &Window<'_>, k: usize) -> Result<FeatureVector> {
    if window.samples.is_empty() {
        return Err(Error::EmptySignal);
    }
    FeatureExtractor::new(window.samples.len(), k)?.extract(window.samples)
}
