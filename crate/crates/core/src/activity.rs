//! Gaussian naive Bayes activity recognition with online updates, plus the
//! magnetic and drive-away filters that confirm a vehicle entry.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::{horizontal_magnitude, FeatureVector};
use crate::orientation::EfcSample;
use crate::types::ActivityLabel;

pub const VARIANCE_FLOOR: f64 = 1e-6;

/// A class label usable by [`GaussianNb`]. `Ord` is the canonical order used
/// to break ties.
pub trait ClassLabel: Copy + Ord + Debug + Display + FromStr + Send + Sync + 'static {}

impl ClassLabel for ActivityLabel {}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats<L> {
    pub label: L,
    pub prior: f64,
    pub count: u64,
    pub mean: Vec<f64>,
    /// Sum of squared deviations from the mean, per feature.
    pub m2: Vec<f64>,
}

impl<L> ClassStats<L> {
    /// Population variance, floored.
    pub fn variance(&self, j: usize, floor: f64) -> f64 {
        (self.m2[j] / self.count as f64).max(floor)
    }

    pub fn variances(&self, floor: f64) -> Vec<f64> {
        (0..self.mean.len()).map(|j| self.variance(j, floor)).collect()
    }

    fn push(&mut self, x: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = v - *m;
            *m += delta / n;
            *s += delta * (v - *m);
        }
    }
}

/// Per-class Gaussian naive Bayes with classes kept in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNb<L> {
    pub variance_floor: f64,
    pub n_features: usize,
    pub classes: Vec<ClassStats<L>>,
}

pub type ActivityModel = GaussianNb<ActivityLabel>;

/// Per-label probabilities in canonical label order.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior<L> {
    pub probs: Vec<(L, f64)>,
}

impl<L: ClassLabel> Posterior<L> {
    pub fn get(&self, label: L) -> f64 {
        self.probs.iter().find(|(l, _)| *l == label).map_or(0.0, |(_, p)| *p)
    }
}

impl<L: ClassLabel> GaussianNb<L> {
    /// Batch fit. Needs at least two classes with at least two examples each.
    pub fn train<'a, I>(examples: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a [f64], L)>,
    {
        let mut grouped: std::collections::BTreeMap<L, Vec<&'a [f64]>> = Default::default();
        let mut dim = None;
        for (x, label) in examples {
            match dim {
                None => dim = Some(x.len()),
                Some(d) if d != x.len() => {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        found: x.len(),
                    })
                }
                _ => {}
            }
            grouped.entry(label).or_default().push(x);
        }
        if grouped.len() < 2 {
            return Err(Error::InsufficientExamples(format!("{} class(es), need 2", grouped.len())));
        }
        if let Some((l, xs)) = grouped.iter().find(|(_, xs)| xs.len() < 2) {
            return Err(Error::InsufficientExamples(format!("class {l} has {} example(s)", xs.len())));
        }
        let n_features = dim.unwrap_or(0);
        let total: usize = grouped.values().map(Vec::len).sum();
        let classes = grouped
            .into_iter()
            .map(|(label, xs)| {
                let n = xs.len() as f64;
                let mean: Vec<f64> = (0..n_features).map(|j| xs.iter().map(|x| x[j]).sum::<f64>() / n).collect();
                let m2 = (0..n_features)
                    .map(|j| xs.iter().map(|x| (x[j] - mean[j]).powi(2)).sum::<f64>())
                    .collect();
                ClassStats {
                    label,
                    prior: n / total as f64,
                    count: xs.len() as u64,
                    mean,
                    m2,
                }
            })
            .collect();
        Ok(Self {
            variance_floor: VARIANCE_FLOOR,
            n_features,
            classes,
        })
    }

    pub fn labels(&self) -> impl Iterator<Item = L> + '_ {
        self.classes.iter().map(|c| c.label)
    }

    /// Unnormalized log posterior per class.
    pub fn log_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        Ok(self
            .classes
            .iter()
            .map(|c| {
                let ll: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(j, &v)| {
                        let var = c.variance(j, self.variance_floor);
                        let d = v - c.mean[j];
                        -0.5 * (ln_2pi + var.ln()) - d * d / (2.0 * var)
                    })
                    .sum();
                c.prior.ln() + ll
            })
            .collect())
    }

    /// Most probable class and the normalized posterior. Ties go to the
    /// earliest label in canonical order.
    pub fn classify(&self, x: &[f64]) -> Result<(L, Posterior<L>)> {
        if self.classes.is_empty() {
            return Err(Error::ModelNotTrained("naive Bayes"));
        }
        let scores = self.log_scores(x)?;
        let mut best = 0;
        for (i, s) in scores.iter().enumerate() {
            if *s > scores[best] {
                best = i;
            }
        }
        let max = scores[best];
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        let probs = self.classes.iter().zip(exps).map(|(c, e)| (c.label, e / z)).collect();
        Ok((self.classes[best].label, Posterior { probs }))
    }

    /// Streaming update with one labeled example. Unknown labels start a new
    /// class. Priors are re-derived from the class counts.
    pub fn update(&self, x: &[f64], label: L) -> Result<Self> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        let mut next = self.clone();
        match next.classes.binary_search_by(|c| c.label.cmp(&label)) {
            Ok(i) => next.classes[i].push(x),
            Err(i) => next.classes.insert(
                i,
                ClassStats {
                    label,
                    prior: 0.0,
                    count: 1,
                    mean: x.to_vec(),
                    m2: vec![0.0; x.len()],
                },
            ),
        }
        let total: u64 = next.classes.iter().map(|c| c.count).sum();
        for c in &mut next.classes {
            c.prior = c.count as f64 / total as f64;
        }
        Ok(next)
    }

    /// Multiplies every prior by `factor`; normalized posteriors and the
    /// argmax are unaffected.
    pub fn with_scaled_priors(&self, factor: f64) -> Self {
        let mut m = self.clone();
        for c in &mut m.classes {
            c.prior *= factor;
        }
        m
    }
}

impl ActivityModel {
    pub fn train_features<'a, I>(examples: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a (FeatureVector, ActivityLabel)>,
    {
        let flat: Vec<(Vec<f64>, ActivityLabel)> = examples.into_iter().map(|(f, l)| (f.to_vec(), *l)).collect();
        Self::train(flat.iter().map(|(x, l)| (x.as_slice(), *l)))
    }

    pub fn classify_features(&self, fv: &FeatureVector) -> Result<(ActivityLabel, Posterior<ActivityLabel>)> {
        self.classify(&fv.to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfirmConfig {
    /// Magnetic magnitude variance over the approach window, µT².
    pub mag_var_threshold: f64,
    /// Horizontal acceleration that counts as a vehicle pulling away, m/s².
    pub drive_accel: f64,
    pub drive_duration_ms: i64,
}

impl Default for ConfirmConfig {
    fn default() -> Self {
        Self {
            mag_var_threshold: 1.0,
            drive_accel: 1.0,
            drive_duration_ms: 2000,
        }
    }
}

/// Tracks runs of sustained horizontal acceleration.
#[derive(Debug, Clone, Copy)]
pub struct DriveAwayDetector {
    config: ConfirmConfig,
    run_start: Option<i64>,
}

impl DriveAwayDetector {
    pub fn new(config: ConfirmConfig) -> Self {
        Self {
            config,
            run_start: None,
        }
    }

    /// Returns true once the current run has lasted long enough.
    pub fn push(&mut self, s: &EfcSample) -> bool {
        if horizontal_magnitude(s) >= self.config.drive_accel {
            let start = *self.run_start.get_or_insert(s.t_ms);
            s.t_ms - start >= self.config.drive_duration_ms
        } else {
            self.run_start = None;
            false
        }
    }

    pub fn reset(&mut self) {
        self.run_start = None;
    }
}

/// Confirms that a sit-like event happened in a vehicle: either the magnetic
/// field fluctuated on approach or the phone saw sustained acceleration
/// afterwards.
pub fn confirm_in_vehicle(window_mag_var: f64, post_accel: &[EfcSample], config: &ConfirmConfig) -> bool {
    if window_mag_var > config.mag_var_threshold {
        return true;
    }
    let mut detector = DriveAwayDetector::new(*config);
    post_accel.iter().any(|s| detector.push(s))
}

/// Emits a label only after it has been seen on `required` consecutive
/// windows.
#[derive(Debug, Clone)]
pub struct ConsecutiveLatch<L> {
    required: usize,
    current: Option<L>,
    run: usize,
}

impl<L: Copy + PartialEq> ConsecutiveLatch<L> {
    pub fn new(required: usize) -> Self {
        Self {
            required: required.max(1),
            current: None,
            run: 0,
        }
    }

    /// Returns the label exactly when its run reaches the required length.
    pub fn push(&mut self, label: L) -> Option<L> {
        if self.current == Some(label) {
            self.run += 1;
        } else {
            self.current = Some(label);
            self.run = 1;
        }
        (self.run == self.required).then_some(label)
    }

    pub fn run_length(&self) -> usize {
        self.run
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Vec3;

    fn one_d(values: &[(f64, ActivityLabel)]) -> ActivityModel {
        let xs: Vec<([f64; 1], ActivityLabel)> = values.iter().map(|(v, l)| ([*v], *l)).collect();
        ActivityModel::train(xs.iter().map(|(x, l)| (&x[..], *l))).unwrap()
    }

    #[test]
    fn separated_classes() {
        use ActivityLabel::*;
        let m = one_d(&[(0.0, Walking), (0.1, Walking), (10.0, Other), (10.1, Other)]);
        assert!((m.classes[0].mean[0] - 0.05).abs() < 1e-12);
        assert!((m.classes[1].mean[0] - 10.05).abs() < 1e-12);
        assert_eq!(m.classes[0].prior, 0.5);
        assert_eq!(m.classify(&[0.02]).unwrap().0, Walking);
        assert_eq!(m.classify(&[10.05]).unwrap().0, Other);
    }

    #[test]
    fn variance_floor_engages() {
        use ActivityLabel::*;
        let m = one_d(&[(1.0, Walking), (1.0, Walking), (3.0, Other), (5.0, Other)]);
        assert_eq!(m.classes[0].variance(0, m.variance_floor), VARIANCE_FLOOR);
        assert_eq!(m.classes[1].variance(0, m.variance_floor), 1.0);
    }

    #[test]
    fn insufficient_examples() {
        use ActivityLabel::*;
        let xs = [([0.0], Walking), ([1.0], Walking)];
        assert!(matches!(
            ActivityModel::train(xs.iter().map(|(x, l)| (&x[..], *l))),
            Err(Error::InsufficientExamples(_))
        ));
        let xs = [([0.0], Walking), ([1.0], Walking), ([1.0], Other)];
        assert!(matches!(
            ActivityModel::train(xs.iter().map(|(x, l)| (&x[..], *l))),
            Err(Error::InsufficientExamples(_))
        ));
    }

    #[test]
    fn dimension_checked() {
        use ActivityLabel::*;
        let m = one_d(&[(0.0, Walking), (0.1, Walking), (10.0, Other), (10.1, Other)]);
        assert_eq!(
            m.classify(&[1.0, 2.0]).unwrap_err(),
            Error::DimensionMismatch { expected: 1, found: 2 }
        );
    }

    #[test]
    fn ties_follow_canonical_order() {
        use ActivityLabel::*;
        let m = one_d(&[(-1.0, Stairs), (1.0, Stairs), (-1.0, Walking), (1.0, Walking)]);
        let (label, post) = m.classify(&[0.3]).unwrap();
        assert_eq!(label, Walking);
        assert_eq!(post.get(Walking), post.get(Stairs));
    }

    #[test]
    fn update_at_mean_keeps_mean() {
        use ActivityLabel::*;
        let m = one_d(&[(1.0, Walking), (3.0, Walking), (10.0, Other), (12.0, Other)]);
        let u = m.update(&[2.0], Walking).unwrap();
        assert_eq!(u.classes[0].mean[0], 2.0);
        assert_eq!(u.classes[0].count, 3);
        assert!((u.classes[0].prior - 0.6).abs() < 1e-15);
        let sum: f64 = u.classes.iter().map(|c| c.prior).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn update_creates_class() {
        use ActivityLabel::*;
        let m = one_d(&[(1.0, Walking), (3.0, Walking), (10.0, Other), (12.0, Other)]);
        let u = m.update(&[5.0], Stairs).unwrap();
        let labels: Vec<_> = u.labels().collect();
        assert_eq!(labels, vec![Walking, Stairs, Other]);
    }

    fn efc(t: i64, horiz: f64) -> EfcSample {
        EfcSample {
            t_ms: t,
            linear_accel_efc: Vec3::new(horiz, 0.0, 0.0),
            mag_efc: Vec3::new(45.0, 0.0, 0.0),
        }
    }

    #[test]
    fn confirmation_filters() {
        let cfg = ConfirmConfig::default();
        let still: Vec<_> = (0..200).map(|i| efc(i * 50, 0.05)).collect();
        assert!(!confirm_in_vehicle(0.02, &still, &cfg));
        assert!(confirm_in_vehicle(5.0, &still, &cfg));
        let drive: Vec<_> = (0..200).map(|i| efc(i * 50, if (100..160).contains(&i) { 1.5 } else { 0.0 })).collect();
        assert!(confirm_in_vehicle(0.02, &drive, &cfg));
        let short: Vec<_> = (0..200).map(|i| efc(i * 50, if (100..130).contains(&i) { 1.5 } else { 0.0 })).collect();
        assert!(!confirm_in_vehicle(0.02, &short, &cfg));
    }

    #[test]
    fn latch_needs_consecutive_labels() {
        use ActivityLabel::*;
        let mut l = ConsecutiveLatch::new(2);
        assert_eq!(l.push(Walking), None);
        assert_eq!(l.push(EnteringVehicle), None);
        assert_eq!(l.push(EnteringVehicle), Some(EnteringVehicle));
        assert_eq!(l.push(EnteringVehicle), None);
        assert_eq!(l.run_length(), 3);
    }
}
