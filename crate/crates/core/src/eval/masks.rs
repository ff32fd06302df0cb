use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ash::{ash_presence, AshThresholds};
use super::confusion::{compute_confusion, compute_metrics, ConfusionMatrix, MetricReport};
use crate::dataset::{list_images, load_rgb};
use crate::error::{Error, Result};

pub const CONFUSION_FILE: &str = "confusion.json";

#[derive(Debug, Deserialize)]
struct TruthRow {
    id: String,
    has_ash: bool,
}

/// Reads `id,has_ash` ground truth; other columns are ignored.
pub fn read_truth_csv(path: &Path) -> Result<Vec<(String, bool)>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::Data(format!("reading {}: {e}", path.display())))?;
    reader
        .deserialize::<TruthRow>()
        .enumerate()
        .map(|(i, row)| {
            row.map(|r| (r.id, r.has_ash))
                .map_err(|e| Error::Data(format!("{}: row {}: {e}", path.display(), i + 2)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageOutcome {
    pub id: String,
    pub predicted: bool,
    pub truth: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskEvaluation {
    pub images: Vec<ImageOutcome>,
    pub confusion: ConfusionMatrix,
    pub metrics: MetricReport,
    pub thresholds: AshThresholds,
}

impl MaskEvaluation {
    pub fn to_json(&self, paper_compat: bool) -> String {
        let value = serde_json::json!({
            "counts": self.confusion,
            "total": self.confusion.total(),
            "metrics": self.metrics.to_json_value(paper_compat),
            "paper_compat": paper_compat,
            "thresholds": self.thresholds,
            "images": self.images,
        });
        let mut s = serde_json::to_string_pretty(&value).expect("json");
        s.push('\n');
        s
    }
}

/// Judges every mask in `mask_dir` for ash and scores the verdicts against
/// `truth`. Each mask's file stem is its id; truth rows without a mask are
/// ignored, masks without a truth row are an error.
pub fn evaluate_masks(
    mask_dir: &Path,
    truth: &[(String, bool)],
    thresholds: &AshThresholds,
) -> Result<MaskEvaluation> {
    let truth_map: BTreeMap<&str, bool> = truth.iter().map(|(id, b)| (id.as_str(), *b)).collect();
    let mut predictions = Vec::new();
    let mut matched = Vec::new();
    for path in list_images(mask_dir)? {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let truth = *truth_map
            .get(id.as_str())
            .ok_or_else(|| Error::Data(format!("no ground truth for mask {id:?}")))?;
        predictions.push((id.clone(), ash_presence(&load_rgb(&path)?, thresholds)));
        matched.push((id, truth));
    }
    if predictions.is_empty() {
        return Err(Error::Data(format!(
            "no masks found in {}",
            mask_dir.display()
        )));
    }
    let confusion = compute_confusion(&predictions, &matched)?;
    let images = predictions
        .iter()
        .zip(&matched)
        .map(|((id, predicted), (_, truth))| ImageOutcome {
            id: id.clone(),
            predicted: *predicted,
            truth: *truth,
        })
        .collect();
    Ok(MaskEvaluation {
        images,
        confusion,
        metrics: compute_metrics(&confusion),
        thresholds: *thresholds,
    })
}

/// Writes `confusion.json` into `out_dir`.
pub fn write_evaluation(
    evaluation: &MaskEvaluation,
    out_dir: &Path,
    paper_compat: bool,
) -> Result<PathBuf> {
    let path = out_dir.join(CONFUSION_FILE);
    crate::write_atomic(&path, evaluation.to_json(paper_compat).as_bytes())?;
    Ok(path)
}
