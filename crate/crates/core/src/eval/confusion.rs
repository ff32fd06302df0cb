use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-image ash presence outcomes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// Ash in the image, ash in the mask.
    pub tp: usize,
    /// No ash in the image, ash in the mask.
    pub fp: usize,
    /// Ash in the image, none in the mask.
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// No ash in the image, none in the mask.
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn new(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn record(&mut self, predicted: bool, truth: bool) {
        match (truth, predicted) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }
}

fn index(kind: &str, rows: &[(String, bool)]) -> Result<BTreeMap<String, bool>> {
    let mut map = BTreeMap::new();
    for (id, v) in rows {
        if map.insert(id.clone(), *v).is_some() {
            return Err(Error::Data(format!("{kind} lists {id:?} twice")));
        }
    }
    Ok(map)
}

/// Tallies predictions against ground truth; both lists must cover exactly
/// the same ids.
pub fn compute_confusion(
    predictions: &[(String, bool)],
    truth: &[(String, bool)],
) -> Result<ConfusionMatrix> {
    let predicted = index("predictions", predictions)?;
    let truth = index("truth", truth)?;
    let unmatched: Vec<&String> = predicted
        .keys()
        .filter(|id| !truth.contains_key(*id))
        .chain(truth.keys().filter(|id| !predicted.contains_key(*id)))
        .collect();
    if !unmatched.is_empty() {
        return Err(Error::Data(format!(
            "prediction and truth ids differ: {unmatched:?}"
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (id, &p) in &predicted {
        cm.record(p, truth[id]);
    }
    Ok(cm)
}

/// Ratio metrics; `None` marks a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> MetricReport {
    MetricReport {
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
        precision: ratio(cm.tp, cm.tp + cm.fp),
        sensitivity: ratio(cm.tp, cm.tp + cm.fn_),
        specificity: ratio(cm.tn, cm.tn + cm.fp),
    }
}

impl MetricReport {
    /// Undefined metrics become 0, matching how published tables report them.
    pub fn paper_compat(&self) -> [(&'static str, f64); 4] {
        self.named().map(|(n, v)| (n, v.unwrap_or(0.0)))
    }

    pub fn named(&self) -> [(&'static str, Option<f64>); 4] {
        [
            ("accuracy", self.accuracy),
            ("precision", self.precision),
            ("sensitivity", self.sensitivity),
            ("specificity", self.specificity),
        ]
    }

    /// One `name: value` line per metric.
    pub fn to_text(&self, paper_compat: bool) -> String {
        self.named()
            .iter()
            .map(|(name, v)| match (v, paper_compat) {
                (Some(v), _) => format!("{name}: {v:.4}\n"),
                (None, true) => format!("{name}: 0.0000\n"),
                (None, false) => format!("{name}: undefined\n"),
            })
            .collect()
    }

    /// JSON object; undefined metrics are `null` unless `paper_compat`.
    pub fn to_json_value(&self, paper_compat: bool) -> serde_json::Value {
        let map = self
            .named()
            .iter()
            .map(|(name, v)| {
                let v = match (v, paper_compat) {
                    (Some(v), _) => serde_json::json!(v),
                    (None, true) => serde_json::json!(0.0),
                    (None, false) => serde_json::Value::Null,
                };
                (name.to_string(), v)
            })
            .collect();
        serde_json::Value::Object(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(v: &[(&str, bool)]) -> Vec<(String, bool)> {
        v.iter().map(|(id, b)| (id.to_string(), *b)).collect()
    }

    #[test]
    fn published_counts() {
        let mut preds = Vec::new();
        let mut truth = Vec::new();
        for i in 0..30 {
            let id = format!("img{i}");
            preds.push((id.clone(), i < 23));
            truth.push((id, true));
        }
        let cm = compute_confusion(&preds, &truth).unwrap();
        assert_eq!(cm, ConfusionMatrix::new(23, 0, 7, 0));
        let m = compute_metrics(&cm);
        assert!((m.accuracy.unwrap() - 0.7667).abs() < 1e-4);
        assert_eq!(m.precision, Some(1.0));
        assert!((m.sensitivity.unwrap() - 0.7667).abs() < 1e-4);
        assert_eq!(m.specificity, None);
        assert_eq!(m.paper_compat()[3], ("specificity", 0.0));
        assert!(m.to_text(false).contains("specificity: undefined"));
        assert!(m.to_text(true).contains("specificity: 0.0000"));
        assert_eq!(
            m.to_json_value(false)["specificity"],
            serde_json::Value::Null
        );
        assert_eq!(m.to_json_value(true)["specificity"], 0.0);
    }

    #[test]
    fn small_examples() {
        let t = rows(&[("a", true), ("b", true), ("c", false), ("d", false)]);
        assert_eq!(
            compute_confusion(&t, &t).unwrap(),
            ConfusionMatrix::new(2, 0, 0, 2)
        );
        assert_eq!(
            compute_confusion(&[], &[]).unwrap(),
            ConfusionMatrix::default()
        );
        let perfect = compute_metrics(&ConfusionMatrix::new(1, 0, 0, 1));
        assert!(perfect.named().iter().all(|(_, v)| *v == Some(1.0)));
        let half = compute_metrics(&ConfusionMatrix::new(5, 5, 5, 5));
        assert!(half.named().iter().all(|(_, v)| *v == Some(0.5)));
        let empty = compute_metrics(&ConfusionMatrix::default());
        assert!(empty.named().iter().all(|(_, v)| v.is_none()));
    }

    #[test]
    fn mismatched_or_duplicate_ids_are_rejected() {
        let a = rows(&[("a", true), ("b", false)]);
        let b = rows(&[("a", true), ("c", false)]);
        assert!(compute_confusion(&a, &b).is_err());
        let dup = rows(&[("a", true), ("a", false)]);
        assert!(compute_confusion(&dup, &dup).is_err());
    }

    /// Every presence/absence pattern over four images, for both truth and
    /// prediction, against a direct recount.
    #[test]
    fn matches_brute_force_on_all_four_pair_patterns() {
        for truth_bits in 0u32..16 {
            for pred_bits in 0u32..16 {
                let ids: Vec<String> = (0..4).map(|i| format!("p{i}")).collect();
                let truth: Vec<_> = ids
                    .iter()
                    .enumerate()
                    .map(|(i, id)| (id.clone(), truth_bits >> i & 1 == 1))
                    .collect();
                let preds: Vec<_> = ids
                    .iter()
                    .enumerate()
                    .map(|(i, id)| (id.clone(), pred_bits >> i & 1 == 1))
                    .collect();
                let cm = compute_confusion(&preds, &truth).unwrap();
                let count = |t: bool, p: bool| {
                    (0..4)
                        .filter(|i| {
                            (truth_bits >> i & 1 == 1) == t && (pred_bits >> i & 1 == 1) == p
                        })
                        .count()
                };
                assert_eq!(
                    cm,
                    ConfusionMatrix::new(
                        count(true, true),
                        count(false, true),
                        count(true, false),
                        count(false, false)
                    )
                );
                let m = compute_metrics(&cm);
                let acc = m.accuracy.unwrap();
                assert_eq!((acc * 4.0).round() as usize, cm.tp + cm.tn);
                let expect = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
                assert_eq!(m.precision, expect(cm.tp, cm.tp + cm.fp));
                assert_eq!(m.sensitivity, expect(cm.tp, cm.tp + cm.fn_));
                assert_eq!(m.specificity, expect(cm.tn, cm.tn + cm.fp));
            }
        }
    }
}
