//! Evaluation reports and byte-stable JSON.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;
use crate::image::{BinaryMask, Connectivity};
use crate::metrics::{esd_errors_with, ConfusionCounts, EsdReport, PixelMetrics};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationConfig {
    pub min_overlap: usize,
    /// 4 or 8.
    pub connectivity: u8,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            min_overlap: 1,
            connectivity: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageEvaluation {
    pub image_id: String,
    pub esd: EsdReport,
    pub pixels: PixelMetrics,
    pub confusion: ConfusionCounts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub image_count: usize,
    /// Summed counts; the rate is recomputed from the sums.
    pub esd: EsdReport,
    /// Pixel metrics of the pooled confusion counts.
    pub pixels: PixelMetrics,
    pub confusion: ConfusionCounts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub tool_version: String,
    /// Unix seconds.
    pub timestamp: u64,
    pub config: EvaluationConfig,
    pub images: Vec<ImageEvaluation>,
    pub aggregate: Aggregate,
}

impl EvaluationReport {
    pub fn new(config: EvaluationConfig, images: Vec<ImageEvaluation>, timestamp: u64) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_owned(),
            timestamp,
            config,
            aggregate: aggregate(&images),
            images,
        }
    }
}

pub fn evaluate_pair(
    image_id: impl Into<String>,
    pred: &BinaryMask,
    gt: &BinaryMask,
    cfg: &EvaluationConfig,
) -> Result<ImageEvaluation> {
    let connectivity = Connectivity::from_count(cfg.connectivity)
        .ok_or_else(|| crate::Error::param("connectivity", format!("{} is not 4 or 8", cfg.connectivity)))?;
    let esd = esd_errors_with(pred, gt, cfg.min_overlap, connectivity)?;
    let confusion = ConfusionCounts::of(pred, gt)?;
    Ok(ImageEvaluation {
        image_id: image_id.into(),
        esd,
        pixels: confusion.metrics(),
        confusion,
    })
}

pub fn aggregate(images: &[ImageEvaluation]) -> Aggregate {
    let esd = images
        .iter()
        .fold(EsdReport::from_counts(0, 0, 0, 0, 0), |acc, e| acc.combine(&e.esd));
    let confusion = images
        .iter()
        .fold(ConfusionCounts::default(), |acc, e| acc.add(&e.confusion));
    Aggregate {
        image_count: images.len(),
        esd,
        pixels: confusion.metrics(),
        confusion,
    }
}

/// Per-image ESD counts without masks, e.g. totals reported elsewhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountsManifest {
    pub name: String,
    pub entries: Vec<CountsEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountsEntry {
    pub image_id: String,
    pub opens: u64,
    pub shorts: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub gt_line_count: u64,
}

impl CountsManifest {
    pub fn aggregate(&self) -> EsdReport {
        self.entries.iter().fold(EsdReport::from_counts(0, 0, 0, 0, 0), |acc, e| {
            acc.combine(&EsdReport::from_counts(
                e.opens,
                e.shorts,
                e.false_positives,
                e.false_negatives,
                e.gt_line_count,
            ))
        })
    }
}

/// `SOURCE_DATE_EPOCH` when set, otherwise the current Unix time.
pub fn timestamp_now() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or_else(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
}

/// `x` rounded to `digits` significant decimal digits.
pub fn round_significant(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

fn stabilize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_significant(n.as_f64().unwrap_or(0.0), 9);
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(stabilize).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, stabilize(v))).collect()),
        other => other,
    }
}

/// Pretty JSON with sorted keys and floats rounded to 9 significant digits,
/// newline-terminated.
pub fn to_stable_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let v = stabilize(serde_json::to_value(value)?);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}
