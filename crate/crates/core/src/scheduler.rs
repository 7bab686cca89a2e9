//! Energy-aware sampling: activity transition statistics, the entry-time
//! sampling plan and the duty-cycled bump detection model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::types::ActivityLabel;

/// States of the daily-activity chain, in table order.
pub const CHAIN_STATES: [ActivityLabel; 6] = [
    ActivityLabel::Walking,
    ActivityLabel::EnteringVehicle,
    ActivityLabel::Standing,
    ActivityLabel::SittingDown,
    ActivityLabel::Stairs,
    ActivityLabel::Other,
];

/// Published activity frequencies, aligned with [`CHAIN_STATES`].
pub const TABLE_FREQUENCIES: [f64; 6] = [0.4225, 0.1408, 0.0986, 0.1127, 0.1549, 0.0705];

pub const DEFAULT_BUMP_RATE: f64 = 0.032;
pub const DEFAULT_SAMPLE_PERIOD_S: f64 = 0.05;
pub const DEFAULT_ALPHA: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionModel {
    pub states: Vec<ActivityLabel>,
    pub initial: Vec<f64>,
    pub transitions: Vec<Vec<f64>>,
}

impl TransitionModel {
    pub fn index(&self, label: ActivityLabel) -> Option<usize> {
        self.states.iter().position(|&s| s == label)
    }

    pub fn prob(&self, from: ActivityLabel, to: ActivityLabel) -> Option<f64> {
        Some(self.transitions[self.index(from)?][self.index(to)?])
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.states.len();
        let stochastic = |row: &[f64]| {
            row.len() == n && row.iter().all(|p| p.is_finite() && *p >= 0.0) && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-9
        };
        if n == 0 || !stochastic(&self.initial) || self.transitions.len() != n || !self.transitions.iter().all(|r| stochastic(r)) {
            return Err(Error::InvalidParams("transition model is not stochastic".into()));
        }
        Ok(())
    }

    /// Draws `count` sequences of `len` states each.
    pub fn sample(&self, count: usize, len: usize, seed: u64) -> Vec<Vec<ActivityLabel>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |p: &[f64], rng: &mut ChaCha8Rng| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            for (i, pi) in p.iter().enumerate() {
                acc += pi;
                if u < acc {
                    return i;
                }
            }
            p.len() - 1
        };
        (0..count)
            .map(|_| {
                let mut i = draw(&self.initial, &mut rng);
                let mut seq = vec![self.states[i]];
                for _ in 1..len {
                    i = draw(&self.transitions[i], &mut rng);
                    seq.push(self.states[i]);
                }
                seq
            })
            .collect()
    }
}

/// Fits the chain over [`CHAIN_STATES`]. Labels outside the state set are
/// dropped before counting.
pub fn fit_transitions(sequences: &[Vec<ActivityLabel>]) -> Result<TransitionModel> {
    fit_transitions_over(sequences, &CHAIN_STATES)
}

pub fn fit_transitions_over(sequences: &[Vec<ActivityLabel>], states: &[ActivityLabel]) -> Result<TransitionModel> {
    let n = states.len();
    let idx = |l: &ActivityLabel| states.iter().position(|s| s == l);
    let mut first = vec![0.0; n];
    let mut counts = vec![vec![1.0; n]; n];
    let mut usable = 0usize;
    for seq in sequences {
        let ids: Vec<usize> = seq.iter().filter_map(idx).collect();
        if ids.len() < 2 {
            continue;
        }
        usable += 1;
        first[ids[0]] += 1.0;
        for w in ids.windows(2) {
            counts[w[0]][w[1]] += 1.0;
        }
    }
    if usable == 0 || n == 0 {
        return Err(Error::EmptyData);
    }
    let normalize = |row: &mut Vec<f64>| {
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= total);
    };
    normalize(&mut first);
    counts.iter_mut().for_each(normalize);
    Ok(TransitionModel {
        states: states.to_vec(),
        initial: first,
        transitions: counts,
    })
}

/// Chain whose every row equals the published frequencies, so that both the
/// first state and the stationary law follow the table.
pub fn table_chain() -> TransitionModel {
    TransitionModel {
        states: CHAIN_STATES.to_vec(),
        initial: TABLE_FREQUENCIES.to_vec(),
        transitions: vec![TABLE_FREQUENCIES.to_vec(); CHAIN_STATES.len()],
    }
}

pub fn plan_entry_sampling(t_mean_s: f64, sigma_s: f64) -> Result<Vec<f64>> {
    plan_entry_sampling_with_period(t_mean_s, sigma_s, DEFAULT_SAMPLE_PERIOD_S)
}

/// Intervals `(T − σ)·2^-i` for `i = 1..` while at least one sample period.
pub fn plan_entry_sampling_with_period(t_mean_s: f64, sigma_s: f64, period_s: f64) -> Result<Vec<f64>> {
    if !(t_mean_s.is_finite() && sigma_s.is_finite() && sigma_s >= 0.0 && t_mean_s > sigma_s) {
        return Err(Error::InvalidParams(format!(
            "need T > sigma >= 0, got T={t_mean_s}, sigma={sigma_s}"
        )));
    }
    if period_s.is_nan() || period_s <= 0.0 {
        return Err(Error::InvalidParams(format!("sample period must be positive, got {period_s}")));
    }
    let mut out = Vec::new();
    let mut t = (t_mean_s - sigma_s) * 0.5;
    while t >= period_s {
        out.push(t);
        t *= 0.5;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommuteWindow {
    /// Habitual departure time, seconds since midnight.
    pub t_d_s: f64,
    /// Spread of the departure time, seconds.
    pub t_th_s: f64,
    pub alpha: f64,
}

impl CommuteWindow {
    pub fn new(t_d_s: f64, t_th_s: f64) -> Self {
        Self {
            t_d_s,
            t_th_s,
            alpha: DEFAULT_ALPHA,
        }
    }

    pub fn start_s(&self) -> f64 {
        self.t_d_s - self.alpha * self.t_th_s
    }

    pub fn end_s(&self) -> f64 {
        self.t_d_s + self.alpha * self.t_th_s
    }

    pub fn contains(&self, t_s: f64) -> bool {
        (self.start_s()..=self.end_s()).contains(&t_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub intervals_s: Vec<f64>,
    pub commute_windows: Vec<CommuteWindow>,
    pub f_commute: f64,
    pub f_idle: f64,
}

impl SamplingPlan {
    pub fn frequency_at(&self, t_s: f64) -> f64 {
        if self.commute_windows.iter().any(|w| w.contains(t_s)) {
            self.f_commute
        } else {
            self.f_idle
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpModel {
    /// Bumps per second.
    pub lambda: f64,
    /// Detection-on seconds per cycle.
    pub w: f64,
    /// Sleep seconds per cycle.
    pub s: f64,
    /// Power per unit time.
    pub c: f64,
}

impl BumpModel {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.lambda) && ok(self.w) && ok(self.s) && ok(self.c) {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("bump model fields must be positive: {self:?}")))
        }
    }
}

/// Poisson mass `P(k) = e^{-λτ} (λτ)^k / k!`, evaluated in log space.
pub fn poisson_pk(lambda: f64, tau: f64, k: u64) -> f64 {
    let mu = lambda * tau;
    if mu == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if k == 0 {
        return (-mu).exp();
    }
    (k as f64 * mu.ln() - mu - ln_factorial(k)).exp()
}

/// Sums the mass function until the remaining tail is below `1e-12`.
pub fn poisson_total_mass(lambda: f64, tau: f64) -> f64 {
    let mu = lambda * tau;
    let mut total = 0.0;
    let mut k = 0u64;
    loop {
        let p = poisson_pk(lambda, tau, k);
        total += p;
        // Past the mode the terms shrink geometrically with ratio mu/(k+1).
        if k as f64 > mu && p * (k as f64 + 1.0) / (k as f64 + 1.0 - mu) < 1e-12 {
            return total;
        }
        k += 1;
    }
}

pub fn detection_cycle_prob(m: &BumpModel) -> f64 {
    (1.0 - (-m.w * m.lambda).exp()) * (m.s / (m.s + m.w))
}

pub fn expected_cost(m: &BumpModel, i: u32, t: f64) -> f64 {
    detection_cycle_prob(m) * (m.c * ((f64::from(i) - 1.0) * (m.w + m.s) + t))
}

/// Monte-Carlo view of the same duty cycle, reported next to the closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DutyCycleSimulation {
    pub formula: f64,
    /// Share of runs whose first detected bump falls in the first cycle.
    pub first_cycle_hit: f64,
    /// Mean number of cycles until the first detection.
    pub mean_cycles: f64,
    /// Mean time to the first detection, seconds.
    pub mean_detection_s: f64,
    /// Mean on-time spent until detection times `c`.
    pub mean_energy: f64,
}

pub fn simulate_duty_cycle(m: &BumpModel, trials: usize, seed: u64) -> Result<DutyCycleSimulation> {
    m.validate()?;
    if trials == 0 {
        return Err(Error::InvalidParams("trials must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gap = Exp::new(m.lambda).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let period = m.w + m.s;
    let (mut first, mut cycles, mut time, mut energy) = (0usize, 0.0, 0.0, 0.0);
    for _ in 0..trials {
        let mut t = 0.0;
        loop {
            t += gap.sample(&mut rng);
            let cycle = (t / period).floor();
            if t - cycle * period < m.w {
                if cycle == 0.0 {
                    first += 1;
                }
                cycles += cycle + 1.0;
                time += t;
                energy += m.c * (cycle * m.w + (t - cycle * period));
                break;
            }
        }
    }
    let n = trials as f64;
    Ok(DutyCycleSimulation {
        formula: detection_cycle_prob(m),
        first_cycle_hit: first as f64 / n,
        mean_cycles: cycles / n,
        mean_detection_s: time / n,
        mean_energy: energy / n,
    })
}
