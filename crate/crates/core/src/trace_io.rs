//! Trace and keystroke log parsing, validation, serialization and resampling.
//!
//! Trace CSV layout:
//!
//! ```text
//! t_ms,ax,ay,az,mx,my,mz,gx,gy,gz
//! 0,0,0,9.81,30,0,40,0,0,0
//! ...
//! # rate_hz,25
//! # label,start_ms,end_ms,name
//! # label,0,5000,Walking
//! ```
//!
//! The trailing comment block is optional. `rate_hz` is only written when the
//! nominal rate differs from 20 Hz. JSONL carries one sample object per line
//! plus a single `{"rate_hz":..,"labels":[..]}` record.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ActivityLabel, LabelSpan, SensorSample, Trace, Vec3, NOMINAL_RATE_HZ};

pub const TRACE_HEADER: &str = "t_ms,ax,ay,az,mx,my,mz,gx,gy,gz";
pub const KEYSTROKE_HEADER: &str = "t_ms,kind";
const COLUMNS: [&str; 10] = ["t_ms", "ax", "ay", "az", "mx", "my", "mz", "gx", "gy", "gz"];
const LABEL_BLOCK_HEADER: &str = "# label,start_ms,end_ms,name";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Csv,
    Jsonl,
}

impl std::str::FromStr for TraceFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "csv" => Ok(TraceFormat::Csv),
            "jsonl" => Ok(TraceFormat::Jsonl),
            other => Err(format!("unknown trace format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyKind {
    Letter,
    Backspace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyEvent {
    pub t_ms: i64,
    pub kind: KeyKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeystrokeLog {
    pub events: Vec<KeyEvent>,
}

fn utf8(bytes: &[u8]) -> Result<&str> {
    std::str::from_utf8(bytes).map_err(|e| Error::MalformedRecord {
        line: 0,
        reason: format!("input is not UTF-8: {e}"),
    })
}

fn malformed(line: usize, reason: impl Into<String>) -> Error {
    Error::MalformedRecord {
        line,
        reason: reason.into(),
    }
}

fn parse_t_ms(field: &str, line: usize) -> Result<i64> {
    let t: i64 = field
        .trim()
        .parse()
        .map_err(|_| malformed(line, format!("timestamp {field:?} is not an integer")))?;
    if t < 0 {
        return Err(malformed(line, "negative timestamp"));
    }
    Ok(t)
}

fn parse_value(field: &str, line: usize, column: &str) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| malformed(line, format!("{column}: {field:?} is not a number")))?;
    if !v.is_finite() {
        return Err(Error::NonFiniteValue {
            line,
            column: column.to_string(),
        });
    }
    Ok(v)
}

/// Checks timestamps and label spans. `lines` maps sample index to source
/// line number for error reporting.
fn validate(trace: &Trace, lines: Option<&[usize]>) -> Result<()> {
    let line_of = |i: usize| lines.map_or(i + 1, |l| l[i]);
    for (i, s) in trace.samples.iter().enumerate() {
        if s.t_ms < 0 {
            return Err(malformed(line_of(i), "negative timestamp"));
        }
        for (c, v) in COLUMNS[1..].iter().zip(s.channels()) {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    line: line_of(i),
                    column: (*c).to_string(),
                });
            }
        }
        if i > 0 && s.t_ms <= trace.samples[i - 1].t_ms {
            return Err(Error::NonMonotonicTimestamp {
                line: line_of(i),
                previous: trace.samples[i - 1].t_ms,
                current: s.t_ms,
            });
        }
    }
    if !(trace.nominal_rate_hz.is_finite() && trace.nominal_rate_hz > 0.0) {
        return Err(malformed(0, "nominal rate must be positive"));
    }
    validate_labels(trace)
}

fn validate_labels(trace: &Trace) -> Result<()> {
    if trace.labels.is_empty() {
        return Ok(());
    }
    let (first, last) = match (trace.samples.first(), trace.samples.last()) {
        (Some(a), Some(b)) => (a.t_ms, b.t_ms),
        _ => return Err(malformed(0, "labels present on an empty trace")),
    };
    let mut prev_end = i64::MIN;
    for span in &trace.labels {
        if span.start_ms > span.end_ms || span.start_ms < first || span.end_ms > last {
            return Err(malformed(
                0,
                format!("label span {}..{} outside trace {first}..{last}", span.start_ms, span.end_ms),
            ));
        }
        // Adjacent spans may share their boundary timestamp.
        if span.start_ms < prev_end {
            return Err(malformed(0, format!("label span at {} overlaps its predecessor", span.start_ms)));
        }
        prev_end = span.end_ms;
    }
    Ok(())
}

pub fn parse_trace(bytes: &[u8], format: TraceFormat) -> Result<Trace> {
    let text = utf8(bytes)?;
    match format {
        TraceFormat::Csv => parse_csv(text),
        TraceFormat::Jsonl => parse_jsonl(text),
    }
}

fn parse_csv(text: &str) -> Result<Trace> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    match lines.next() {
        Some((_, h)) if h.trim() == TRACE_HEADER => {}
        Some((n, h)) => return Err(malformed(n, format!("expected header {TRACE_HEADER:?}, found {h:?}"))),
        None => return Err(malformed(1, "missing header")),
    }

    let mut trace = Trace::new(Vec::new());
    let mut line_numbers = Vec::new();
    let mut in_trailer = false;
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            in_trailer = true;
            parse_trailer_line(comment.trim(), n, &mut trace)?;
            continue;
        }
        if in_trailer {
            return Err(malformed(n, "sample record after trailing comment block"));
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != COLUMNS.len() {
            return Err(malformed(n, format!("expected {} fields, found {}", COLUMNS.len(), fields.len())));
        }
        let t_ms = parse_t_ms(fields[0], n)?;
        let mut c = [0.0; 9];
        for (j, slot) in c.iter_mut().enumerate() {
            *slot = parse_value(fields[j + 1], n, COLUMNS[j + 1])?;
        }
        if let Some(prev) = trace.samples.last() {
            if t_ms <= prev.t_ms {
                return Err(Error::NonMonotonicTimestamp {
                    line: n,
                    previous: prev.t_ms,
                    current: t_ms,
                });
            }
        }
        trace.samples.push(SensorSample::from_channels(t_ms, c));
        line_numbers.push(n);
    }
    validate(&trace, Some(&line_numbers))?;
    Ok(trace)
}

fn parse_trailer_line(comment: &str, n: usize, trace: &mut Trace) -> Result<()> {
    if comment == LABEL_BLOCK_HEADER[1..].trim() {
        return Ok(());
    }
    let fields: Vec<&str> = comment.split(',').map(str::trim).collect();
    match fields.as_slice() {
        ["rate_hz", rate] => {
            let r = parse_value(rate, n, "rate_hz")?;
            if r <= 0.0 {
                return Err(malformed(n, "rate_hz must be positive"));
            }
            trace.nominal_rate_hz = r;
        }
        ["label", start, end, name] => {
            let label: ActivityLabel = name.parse().map_err(|e: String| malformed(n, e))?;
            trace.labels.push(LabelSpan {
                start_ms: parse_t_ms(start, n)?,
                end_ms: parse_t_ms(end, n)?,
                label,
            });
        }
        // Free-form comments are tolerated.
        _ => {}
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonSample {
    t_ms: i64,
    accel: [f64; 3],
    mag: [f64; 3],
    gyro: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonMeta {
    rate_hz: f64,
    labels: Vec<LabelSpan>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonRecord {
    Sample(JsonSample),
    Meta(JsonMeta),
}

fn parse_jsonl(text: &str) -> Result<Trace> {
    let mut trace = Trace::new(Vec::new());
    let mut line_numbers = Vec::new();
    let mut meta_seen = false;
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: JsonRecord =
            serde_json::from_str(line).map_err(|e| malformed(n, format!("invalid JSON record: {e}")))?;
        match record {
            JsonRecord::Sample(s) => {
                if meta_seen {
                    return Err(malformed(n, "sample record after metadata record"));
                }
                if s.t_ms < 0 {
                    return Err(malformed(n, "negative timestamp"));
                }
                let mut c = [0.0; 9];
                c[..3].copy_from_slice(&s.accel);
                c[3..6].copy_from_slice(&s.mag);
                c[6..].copy_from_slice(&s.gyro);
                if let Some(j) = c.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteValue {
                        line: n,
                        column: COLUMNS[j + 1].to_string(),
                    });
                }
                if let Some(prev) = trace.samples.last() {
                    if s.t_ms <= prev.t_ms {
                        return Err(Error::NonMonotonicTimestamp {
                            line: n,
                            previous: prev.t_ms,
                            current: s.t_ms,
                        });
                    }
                }
                trace.samples.push(SensorSample::from_channels(s.t_ms, c));
                line_numbers.push(n);
            }
            JsonRecord::Meta(m) => {
                if meta_seen {
                    return Err(malformed(n, "duplicate metadata record"));
                }
                meta_seen = true;
                trace.nominal_rate_hz = m.rate_hz;
                trace.labels = m.labels;
            }
        }
    }
    validate(&trace, Some(&line_numbers))?;
    Ok(trace)
}

pub fn serialize_trace(trace: &Trace, format: TraceFormat) -> Vec<u8> {
    match format {
        TraceFormat::Csv => serialize_csv(trace).into_bytes(),
        TraceFormat::Jsonl => serialize_jsonl(trace).into_bytes(),
    }
}

fn serialize_csv(trace: &Trace) -> String {
    let mut out = String::with_capacity(64 * (trace.samples.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for s in &trace.samples {
        write!(out, "{}", s.t_ms).unwrap();
        for v in s.channels() {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    if trace.nominal_rate_hz != NOMINAL_RATE_HZ {
        writeln!(out, "# rate_hz,{}", trace.nominal_rate_hz).unwrap();
    }
    if !trace.labels.is_empty() {
        out.push_str(LABEL_BLOCK_HEADER);
        out.push('\n');
        for l in &trace.labels {
            writeln!(out, "# label,{},{},{}", l.start_ms, l.end_ms, l.label).unwrap();
        }
    }
    out
}

fn serialize_jsonl(trace: &Trace) -> String {
    let mut out = String::new();
    for s in &trace.samples {
        let rec = JsonSample {
            t_ms: s.t_ms,
            accel: s.accel.into(),
            mag: s.mag.into(),
            gyro: s.gyro.into(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("sample serializes"));
        out.push('\n');
    }
    let meta = JsonMeta {
        rate_hz: trace.nominal_rate_hz,
        labels: trace.labels.clone(),
    };
    out.push_str(&serde_json::to_string(&meta).expect("metadata serializes"));
    out.push('\n');
    out
}

/// Linear resampling onto a uniform grid starting at the first timestamp.
///
/// The grid step is `round(1000 / rate_hz)` ms, so the last output timestamp
/// is the last input timestamp clipped down to the grid. Labels are clipped
/// to the new extent.
pub fn resample(trace: &Trace, rate_hz: f64) -> Result<Trace> {
    if trace.samples.len() < 2 {
        return Err(Error::EmptyTrace);
    }
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(Error::InvalidParams(format!("rate {rate_hz} Hz")));
    }
    let step = (1000.0 / rate_hz).round() as i64;
    if step <= 0 {
        return Err(Error::InvalidParams(format!("rate {rate_hz} Hz is above 1 kHz")));
    }
    let first = trace.samples[0].t_ms;
    let last = trace.samples[trace.samples.len() - 1].t_ms;
    let n = ((last - first) / step + 1) as usize;

    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    for i in 0..n {
        let t = first + i as i64 * step;
        while j + 1 < trace.samples.len() && trace.samples[j + 1].t_ms <= t {
            j += 1;
        }
        let a = &trace.samples[j];
        if a.t_ms == t || j + 1 == trace.samples.len() {
            out.push(SensorSample { t_ms: t, ..*a });
            continue;
        }
        let b = &trace.samples[j + 1];
        let frac = (t - a.t_ms) as f64 / (b.t_ms - a.t_ms) as f64;
        let lerp = |x: Vec3, y: Vec3| x + (y - x) * frac;
        out.push(SensorSample {
            t_ms: t,
            accel: lerp(a.accel, b.accel),
            mag: lerp(a.mag, b.mag),
            gyro: lerp(a.gyro, b.gyro),
        });
    }

    let end = out.last().map_or(first, |s| s.t_ms);
    let labels = trace
        .labels
        .iter()
        .filter(|l| l.start_ms <= end)
        .map(|l| LabelSpan {
            end_ms: l.end_ms.min(end),
            ..*l
        })
        .collect();
    Ok(Trace {
        samples: out,
        nominal_rate_hz: rate_hz,
        labels,
    })
}

pub fn parse_keystrokes(bytes: &[u8]) -> Result<KeystrokeLog> {
    let text = utf8(bytes)?;
    let mut log = KeystrokeLog::default();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line == KEYSTROKE_HEADER) {
            continue;
        }
        let (t, kind) = line
            .split_once(',')
            .ok_or_else(|| malformed(n, "expected t_ms,kind"))?;
        let t_ms = parse_t_ms(t, n)?;
        let kind = match kind.trim() {
            "letter" => KeyKind::Letter,
            "backspace" => KeyKind::Backspace,
            other => return Err(malformed(n, format!("unknown key kind {other:?}"))),
        };
        if let Some(prev) = log.events.last() {
            if t_ms < prev.t_ms {
                return Err(Error::NonMonotonicTimestamp {
                    line: n,
                    previous: prev.t_ms,
                    current: t_ms,
                });
            }
        }
        log.events.push(KeyEvent { t_ms, kind });
    }
    Ok(log)
}

pub fn serialize_keystrokes(log: &KeystrokeLog) -> Vec<u8> {
    let mut out = String::with_capacity(16 * (log.events.len() + 1));
    out.push_str(KEYSTROKE_HEADER);
    out.push('\n');
    for e in &log.events {
        let kind = match e.kind {
            KeyKind::Letter => "letter",
            KeyKind::Backspace => "backspace",
        };
        writeln!(out, "{},{kind}", e.t_ms).unwrap();
    }
    out.into_bytes()
}
