//! Scoring of the detectors against the synthetic corpora.

use serde::Serialize;

use crate::activity::{confirm_in_vehicle, ActivityModel};
use crate::corpus::{self, bump_run_scenario, ActivityCase, ClipKind};
use crate::error::{Error, Result};
use crate::localize::{classify_row_by_bump, detect_bumps, detect_side, EntryCase, Row, SideModel};
use crate::metrics::MetricsReport;
use crate::pipeline::{run_pipeline, Models, PipelineConfig, Role};
use crate::simulator::generate;
use crate::types::ActivityLabel;

pub const EVAL_SEED: u64 = 7_331;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActivityEvaluation {
    /// Non-entry cases and how many were labeled correctly.
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub entries: usize,
    pub ev_tp_raw: usize,
    pub ev_fp_raw: usize,
    pub ev_tp_confirmed: usize,
    pub ev_fp_confirmed: usize,
}

pub fn evaluate_activity(model: &ActivityModel, cases: &[ActivityCase], config: &PipelineConfig) -> Result<ActivityEvaluation> {
    let mut e = ActivityEvaluation {
        total: 0,
        correct: 0,
        accuracy: 0.0,
        entries: 0,
        ev_tp_raw: 0,
        ev_fp_raw: 0,
        ev_tp_confirmed: 0,
        ev_fp_confirmed: 0,
    };
    for case in cases {
        let truth = case.kind.label();
        let (pred, _) = model.classify(&case.window.features.to_vec())?;
        let is_entry = truth == ActivityLabel::EnteringVehicle;
        if is_entry {
            e.entries += 1;
        } else {
            e.total += 1;
            e.correct += usize::from(pred == truth);
        }
        if pred == ActivityLabel::EnteringVehicle {
            let confirmed = confirm_in_vehicle(case.window.features.mag_var, &case.window.after, &config.confirm);
            match (is_entry, confirmed) {
                (true, c) => {
                    e.ev_tp_raw += 1;
                    e.ev_tp_confirmed += usize::from(c);
                }
                (false, c) => {
                    e.ev_fp_raw += 1;
                    e.ev_fp_confirmed += usize::from(c);
                }
            }
        }
    }
    if e.total == 0 {
        return Err(Error::EmptyInput);
    }
    e.accuracy = e.correct as f64 / e.total as f64;
    Ok(e)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SideEvaluation {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// Share of left-side verdicts that were left-side entries.
    pub left_precision: f64,
    pub pocket_correct: usize,
}

pub fn evaluate_side(model: &SideModel, examples: &[(Vec<f64>, EntryCase)]) -> Result<SideEvaluation> {
    if examples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (mut correct, mut pocket_correct, mut said_left, mut left_right) = (0, 0, 0, 0);
    for (x, case) in examples {
        let v = detect_side(model, x)?;
        correct += usize::from(v.side == case.side());
        pocket_correct += usize::from(v.pocket == case.pocket());
        if v.side == crate::localize::Side::Left {
            said_left += 1;
            left_right += usize::from(case.side() == crate::localize::Side::Left);
        }
    }
    Ok(SideEvaluation {
        total: examples.len(),
        correct,
        accuracy: correct as f64 / examples.len() as f64,
        left_precision: if said_left == 0 { f64::NAN } else { left_right as f64 / said_left as f64 },
        pocket_correct,
    })
}

/// Rows indexed by truth, columns by verdict, front first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowEvaluation {
    pub confusion: [[usize; 2]; 2],
    pub undecided: usize,
}

fn row_index(r: Row) -> usize {
    match r {
        Row::Front => 0,
        Row::Back => 1,
    }
}

pub fn evaluate_bump_rows(seed: u64, per_row: usize, bump_rate: f64, drive_s: f64, config: &PipelineConfig) -> Result<RowEvaluation> {
    let mut out = RowEvaluation {
        confusion: [[0; 2]; 2],
        undecided: 0,
    };
    for (g, seat) in [Row::Front, Row::Back].into_iter().enumerate() {
        for i in 0..per_row {
            let scenario = bump_run_scenario(seat, bump_rate, drive_s, seed.wrapping_add((g * 1000 + i) as u64));
            let (trace, truth) = generate(&scenario)?;
            let start = truth.motion_start_ms.unwrap_or(0);
            let vertical: Vec<(i64, f64)> = corpus::track(&trace, &config.ekf)?
                .into_iter()
                .filter(|(e, _)| e.t_ms >= start)
                .map(|(e, _)| (e.t_ms, e.linear_accel_efc.z))
                .collect();
            match classify_row_by_bump(&detect_bumps(&vertical, &config.bump), &config.bump) {
                Ok(v) => out.confusion[row_index(seat)][row_index(v.row)] += 1,
                Err(Error::EmptyEvidence) => out.undecided += 1,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TripResult {
    pub truth: Role,
    pub verdict: Role,
    pub confidence: f64,
    pub latency_ms: Option<i64>,
    pub max_buffered: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndToEndEvaluation {
    /// Driver is the positive class.
    pub metrics: MetricsReport,
    pub max_latency_ms: Option<i64>,
    pub trips: Vec<TripResult>,
}

pub fn evaluate_end_to_end(models: &Models, seed: u64, drive_s: f64, config: &PipelineConfig) -> Result<EndToEndEvaluation> {
    let mut trips = Vec::new();
    for (spec, scenario) in corpus::trip_corpus(seed, drive_s) {
        let (trace, _) = generate(&scenario)?;
        let out = run_pipeline(&trace, None, models, config)?;
        trips.push(TripResult {
            truth: spec.role(),
            verdict: out.verdict.role,
            confidence: out.verdict.confidence,
            latency_ms: out.verdict.latency_ms,
            max_buffered: out.max_buffered,
        });
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for t in &trips {
        match (t.truth == Role::Driver, t.verdict == Role::Driver) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(EndToEndEvaluation {
        metrics: MetricsReport::from_counts(tp, fp, fn_, tn)?,
        max_latency_ms: trips.iter().filter_map(|t| t.latency_ms).max(),
        trips,
    })
}

/// Convenience for the activity corpus used throughout the tools.
pub fn activity_cases(seed: u64, config: &PipelineConfig) -> Result<Vec<ActivityCase>> {
    corpus::activity_test_set(seed, 20, config)
}

pub fn is_entry_kind(kind: ClipKind) -> bool {
    matches!(kind, ClipKind::Entry(_))
}
