//! Versioned text format for trained models and scenarios.
//!
//! The file is TOML with a top-level `format` tag. Naive Bayes sections hold
//! one `[[<section>.class]]` block per class; floats are written in shortest
//! round-trip form so parsing reproduces the model bit for bit.

use serde::{Deserialize, Serialize};

use crate::activity::{ActivityModel, ClassLabel, ClassStats, GaussianNb};
use crate::error::{Error, Result};
use crate::localize::SideModel;
use crate::scheduler::TransitionModel;
use crate::simulator::Scenario;

pub const MODEL_FORMAT: &str = "drivesense-model/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassBlock {
    label: String,
    prior: f64,
    count: u64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NbSection {
    variance_floor: f64,
    n_features: usize,
    class: Vec<ClassBlock>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    activity: Option<NbSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    side: Option<NbSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    transitions: Option<TransitionModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scenario: Option<Scenario>,
}

impl ModelDoc {
    fn empty() -> Self {
        Self {
            format: MODEL_FORMAT.to_string(),
            activity: None,
            side: None,
            transitions: None,
            scenario: None,
        }
    }
}

/// Every model the pipeline can load from one file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelBundle {
    pub activity: Option<ActivityModel>,
    pub side: Option<SideModel>,
    pub transitions: Option<TransitionModel>,
}

fn to_section<L: ClassLabel>(m: &GaussianNb<L>) -> NbSection {
    NbSection {
        variance_floor: m.variance_floor,
        n_features: m.n_features,
        class: m
            .classes
            .iter()
            .map(|c| ClassBlock {
                label: c.label.to_string(),
                prior: c.prior,
                count: c.count,
                mean: c.mean.clone(),
                m2: c.m2.clone(),
            })
            .collect(),
    }
}

fn from_section<L: ClassLabel>(s: NbSection, name: &str) -> Result<GaussianNb<L>> {
    let bad = |reason: String| Error::MalformedRecord { line: 0, reason };
    let mut classes = Vec::with_capacity(s.class.len());
    for b in s.class {
        let label = b
            .label
            .parse::<L>()
            .map_err(|_| bad(format!("[{name}] unknown class label {:?}", b.label)))?;
        if b.mean.len() != s.n_features || b.m2.len() != s.n_features {
            return Err(bad(format!(
                "[{name}] class {label}: expected {} features, found {}/{}",
                s.n_features,
                b.mean.len(),
                b.m2.len()
            )));
        }
        if b.count == 0 || !b.prior.is_finite() || b.prior < 0.0 {
            return Err(bad(format!("[{name}] class {label}: invalid count or prior")));
        }
        if b.mean.iter().chain(&b.m2).any(|v| !v.is_finite()) || b.m2.iter().any(|v| *v < 0.0) {
            return Err(bad(format!("[{name}] class {label}: non-finite statistics")));
        }
        classes.push(ClassStats {
            label,
            prior: b.prior,
            count: b.count,
            mean: b.mean,
            m2: b.m2,
        });
    }
    if classes.windows(2).any(|w| w[0].label >= w[1].label) {
        return Err(bad(format!("[{name}] classes must be unique and in canonical order")));
    }
    if !(s.variance_floor.is_finite() && s.variance_floor > 0.0) {
        return Err(bad(format!("[{name}] variance_floor must be positive")));
    }
    Ok(GaussianNb {
        variance_floor: s.variance_floor,
        n_features: s.n_features,
        classes,
    })
}

fn line_of(text: &str, offset: usize) -> usize {
    text.as_bytes()[..offset.min(text.len())].iter().filter(|&&b| b == b'\n').count() + 1
}

fn parse_doc(bytes: &[u8]) -> Result<ModelDoc> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::MalformedRecord {
        line: line_of(&String::from_utf8_lossy(bytes), e.valid_up_to()),
        reason: "invalid UTF-8".into(),
    })?;
    let malformed = |e: toml::de::Error| Error::MalformedRecord {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        reason: e.message().to_string(),
    };
    // Check the tag before the schema so that a future version reports a
    // version error rather than a field error.
    let table: toml::Table = toml::from_str(text).map_err(malformed)?;
    match table.get("format").and_then(|v| v.as_str()) {
        Some(MODEL_FORMAT) => {}
        Some(other) => {
            return Err(Error::SchemaVersionMismatch {
                found: other.to_string(),
                expected: MODEL_FORMAT,
            })
        }
        None => {
            return Err(Error::MalformedRecord {
                line: 1,
                reason: "missing format tag".into(),
            })
        }
    }
    toml::from_str(text).map_err(malformed)
}

fn write_doc(doc: &ModelDoc) -> Vec<u8> {
    toml::to_string(doc).expect("model document serializes").into_bytes()
}

pub fn serialize_model(model: &ActivityModel) -> Vec<u8> {
    write_doc(&ModelDoc {
        activity: Some(to_section(model)),
        ..ModelDoc::empty()
    })
}

pub fn parse_model(bytes: &[u8]) -> Result<ActivityModel> {
    let doc = parse_doc(bytes)?;
    let section = doc.activity.ok_or(Error::ModelNotTrained("activity"))?;
    from_section(section, "activity")
}

pub fn serialize_bundle(bundle: &ModelBundle) -> Vec<u8> {
    write_doc(&ModelDoc {
        activity: bundle.activity.as_ref().map(to_section),
        side: bundle.side.as_ref().map(to_section),
        transitions: bundle.transitions.clone(),
        ..ModelDoc::empty()
    })
}

pub fn parse_bundle(bytes: &[u8]) -> Result<ModelBundle> {
    let doc = parse_doc(bytes)?;
    let transitions = doc.transitions;
    if let Some(t) = &transitions {
        t.validate().map_err(|e| Error::MalformedRecord {
            line: 0,
            reason: format!("[transitions] {e}"),
        })?;
    }
    Ok(ModelBundle {
        activity: doc.activity.map(|s| from_section(s, "activity")).transpose()?,
        side: doc.side.map(|s| from_section(s, "side")).transpose()?,
        transitions,
    })
}

pub fn serialize_scenario(scenario: &Scenario) -> Vec<u8> {
    write_doc(&ModelDoc {
        scenario: Some(scenario.clone()),
        ..ModelDoc::empty()
    })
}

pub fn parse_scenario(bytes: &[u8]) -> Result<Scenario> {
    let doc = parse_doc(bytes)?;
    let scenario = doc.scenario.ok_or_else(|| Error::InvalidScenario("file has no [scenario] section".into()))?;
    scenario.validate()?;
    Ok(scenario)
}
