//! Texting-while-driving classification from keystroke timing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace_io::{KeyKind, KeystrokeLog};

pub const NORMAL_MEAN_MS: f64 = 536.55;
pub const NORMAL_SD_MS: f64 = 327.03;
pub const DISTRACTED_MEAN_MS: f64 = 742.42;
pub const DISTRACTED_SD_MS: f64 = 528.68;
/// Midpoint of the two class means.
pub const THRESHOLD_MS: f64 = (NORMAL_MEAN_MS + DISTRACTED_MEAN_MS) / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TypingStats {
    pub mean_interval_ms: f64,
    pub sd_interval_ms: f64,
    pub frac_under_800ms: f64,
    /// Letters per typo; infinite when no typo was made.
    pub inputs_per_typo: f64,
    pub n_intervals: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TextingClass {
    Normal,
    Distracted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TextingVerdict {
    pub class: TextingClass,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextingConfig {
    pub threshold_ms: f64,
    /// Half-width of the band around the threshold where typo rate may
    /// tip the verdict.
    pub borderline_ms: f64,
    pub typo_inputs_threshold: f64,
    pub min_intervals: usize,
}

impl Default for TextingConfig {
    fn default() -> Self {
        Self {
            threshold_ms: THRESHOLD_MS,
            borderline_ms: 50.0,
            typo_inputs_threshold: 40.0,
            min_intervals: 10,
        }
    }
}

pub fn compute_stats(log: &KeystrokeLog) -> Result<TypingStats> {
    let letters: Vec<i64> = log
        .events
        .iter()
        .filter(|e| e.kind == KeyKind::Letter)
        .map(|e| e.t_ms)
        .collect();
    if letters.len() < 2 {
        return Err(Error::TooFewEvents {
            needed: 2,
            found: letters.len(),
        });
    }
    let intervals: Vec<f64> = letters.windows(2).map(|w| (w[1] - w[0]) as f64).collect();
    let n = intervals.len() as f64;
    let mean = intervals.iter().sum::<f64>() / n;
    let var = intervals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let under = intervals.iter().filter(|&&x| x <= 800.0).count() as f64 / n;

    let mut typos = 0usize;
    let mut in_run = false;
    for e in &log.events {
        let is_back = e.kind == KeyKind::Backspace;
        if is_back && !in_run {
            typos += 1;
        }
        in_run = is_back;
    }
    let inputs_per_typo = if typos == 0 {
        f64::INFINITY
    } else {
        letters.len() as f64 / typos as f64
    };

    Ok(TypingStats {
        mean_interval_ms: mean,
        sd_interval_ms: var.sqrt(),
        frac_under_800ms: under,
        inputs_per_typo,
        n_intervals: intervals.len(),
    })
}

pub fn classify_texting(stats: &TypingStats, config: &TextingConfig) -> Result<TextingVerdict> {
    if stats.n_intervals < config.min_intervals {
        return Err(Error::TooFewEvents {
            needed: config.min_intervals + 1,
            found: stats.n_intervals + 1,
        });
    }
    let d = stats.mean_interval_ms - config.threshold_ms;
    let mut class = if d > 0.0 {
        TextingClass::Distracted
    } else {
        TextingClass::Normal
    };
    if class == TextingClass::Normal
        && d.abs() <= config.borderline_ms
        && stats.inputs_per_typo < config.typo_inputs_threshold
    {
        class = TextingClass::Distracted;
    }
    let half_gap = (DISTRACTED_MEAN_MS - NORMAL_MEAN_MS) / 2.0;
    Ok(TextingVerdict {
        class,
        confidence: (d.abs() / half_gap).clamp(0.0, 1.0),
    })
}
