//! Binary confusion-matrix metrics, evaluation reports and report deltas.
//!
//! Percentages are `None` when their denominator is zero (for example
//! specificity on a test set without negatives). Text output writes those as
//! `NA`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::tensor::{cross_entropy, softmax, Network, Tensor};
use crate::{Error, Result};

/// Counts for a binary classifier; label 1 is the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl ConfusionMatrix {
    pub fn from_predictions(predicted: &[usize], actual: &[usize]) -> Result<Self> {
        if predicted.len() != actual.len() {
            return Err(Error::Shape(format!(
                "{} predictions for {} labels",
                predicted.len(),
                actual.len()
            )));
        }
        let mut m = Self::default();
        for (&p, &a) in predicted.iter().zip(actual) {
            m.record(p, a)?;
        }
        Ok(m)
    }

    pub fn record(&mut self, predicted: usize, actual: usize) -> Result<()> {
        match (predicted, actual) {
            (1, 1) => self.tp += 1,
            (1, 0) => self.fp += 1,
            (0, 0) => self.tn += 1,
            (0, 1) => self.fn_ += 1,
            _ => {
                return Err(Error::Data(format!(
                    "binary metrics need labels in {{0, 1}}, got {predicted}/{actual}"
                )))
            }
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    /// TP / (TP + FN)
    pub fn sensitivity(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// TN / (TN + FP)
    pub fn specificity(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn false_negative_rate(&self) -> Option<f64> {
        ratio(self.fn_, self.tp + self.fn_)
    }

    pub fn false_positive_rate(&self) -> Option<f64> {
        ratio(self.fp, self.tn + self.fp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub accuracy_pct: Option<f64>,
    pub specificity_pct: Option<f64>,
    pub sensitivity_pct: Option<f64>,
    /// Mean cross-entropy over the evaluated samples.
    pub loss: f64,
    pub confusion: ConfusionMatrix,
}

impl EvalReport {
    pub fn from_confusion(model: impl Into<String>, confusion: ConfusionMatrix, loss: f64) -> Self {
        let pct = |v: Option<f64>| v.map(|x| x * 100.0);
        Self {
            model: model.into(),
            accuracy_pct: pct(confusion.accuracy()),
            specificity_pct: pct(confusion.specificity()),
            sensitivity_pct: pct(confusion.sensitivity()),
            loss,
            confusion,
        }
    }

    /// A report built from published percentages only (no counts).
    pub fn published(
        model: impl Into<String>,
        accuracy: f64,
        specificity: f64,
        sensitivity: f64,
    ) -> Self {
        Self {
            model: model.into(),
            accuracy_pct: Some(accuracy),
            specificity_pct: Some(specificity),
            sensitivity_pct: Some(sensitivity),
            loss: f64::NAN,
            confusion: ConfusionMatrix::default(),
        }
    }
}

/// Runs `model` over `inputs` (`[N, ...]`), takes the argmax class and
/// accumulates the confusion matrix and mean cross-entropy.
pub fn evaluate(
    model: &Network,
    inputs: &Tensor,
    labels: &[usize],
    name: &str,
) -> Result<EvalReport> {
    if labels.is_empty() {
        return Err(Error::Data("cannot evaluate on an empty dataset".into()));
    }
    if inputs.outer() != labels.len() {
        return Err(Error::Shape(format!(
            "{} inputs for {} labels",
            inputs.outer(),
            labels.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::Data(format!("label {bad} is not binary")));
    }
    let logits = model.predict(inputs)?;
    let classes = logits.len() / labels.len();
    if classes < 2 {
        return Err(Error::Config(format!(
            "model has {classes} output(s); binary evaluation needs at least 2"
        )));
    }
    let mut confusion = ConfusionMatrix::default();
    let mut loss = 0.0;
    for (row, &label) in logits.data().chunks(classes).zip(labels) {
        confusion.record(Tensor::argmax(row), label)?;
        let p = softmax(row)?;
        let mut target = vec![0.0; classes];
        target[label] = 1.0;
        loss += cross_entropy(&p, &target)?;
    }
    Ok(EvalReport::from_confusion(
        name,
        confusion,
        loss / labels.len() as f64,
    ))
}

pub(crate) fn fmt_pct(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_owned(), |x| format!("{x:.2}"))
}

pub(crate) fn fmt_loss(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        "NA".to_owned()
    }
}

pub const REPORT_CSV_HEADER: &str = "model,accuracy_pct,specificity_pct,sensitivity_pct,loss";

/// CSV in the accuracy / specificity / sensitivity column order of the
/// published comparison tables, with the loss column appended.
pub fn reports_to_csv(reports: &[EvalReport]) -> String {
    let mut out = String::from(REPORT_CSV_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.model,
            fmt_pct(r.accuracy_pct),
            fmt_pct(r.specificity_pct),
            fmt_pct(r.sensitivity_pct),
            fmt_loss(r.loss)
        );
    }
    out
}

/// Signed percentage-point change of one model against the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub model: String,
    pub accuracy_pp: Option<f64>,
    pub specificity_pp: Option<f64>,
    pub sensitivity_pp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaTable {
    pub baseline: String,
    pub rows: Vec<DeltaRow>,
}

/// Per-model metric deltas relative to the report named `baseline`.
pub fn compare(reports: &[EvalReport], baseline: &str) -> Result<DeltaTable> {
    let base = reports
        .iter()
        .find(|r| r.model == baseline)
        .ok_or_else(|| Error::Config(format!("baseline {baseline:?} not among the reports")))?;
    let diff = |a: Option<f64>, b: Option<f64>| Some(a? - b?);
    let rows = reports
        .iter()
        .map(|r| DeltaRow {
            model: r.model.clone(),
            accuracy_pp: diff(r.accuracy_pct, base.accuracy_pct),
            specificity_pp: diff(r.specificity_pct, base.specificity_pct),
            sensitivity_pp: diff(r.sensitivity_pct, base.sensitivity_pct),
        })
        .collect();
    Ok(DeltaTable {
        baseline: baseline.to_owned(),
        rows,
    })
}

impl DeltaTable {
    pub fn to_markdown(&self) -> String {
        let signed = |v: Option<f64>| v.map_or_else(|| "NA".to_owned(), |x| format!("{x:+.2}"));
        let mut out = format!(
            "| model | accuracy (pp vs {b}) | specificity (pp vs {b}) | sensitivity (pp vs {b}) |\n|---|---:|---:|---:|\n",
            b = self.baseline
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} |",
                r.model,
                signed(r.accuracy_pp),
                signed(r.specificity_pp),
                signed(r.sensitivity_pp)
            );
        }
        out
    }
}

/// Integer confusion matrix implied by published percentages on a split with
/// known class sizes, and how far its accuracy lands from the published one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyCheck {
    pub implied_tp: u64,
    pub implied_tn: u64,
    pub implied_accuracy_pct: f64,
    pub reported_accuracy_pct: f64,
    pub discrepancy_pp: f64,
}

/// Rounds `sensitivity * positives` and `specificity * negatives` to counts
/// and recomputes accuracy from them. Informational only.
pub fn consistency_check(
    report: &EvalReport,
    positives: u64,
    negatives: u64,
) -> Option<ConsistencyCheck> {
    let tp = (report.sensitivity_pct? / 100.0 * positives as f64).round() as u64;
    let tn = (report.specificity_pct? / 100.0 * negatives as f64).round() as u64;
    let implied = (tp + tn) as f64 / (positives + negatives) as f64 * 100.0;
    let reported = report.accuracy_pct?;
    Some(ConsistencyCheck {
        implied_tp: tp,
        implied_tn: tn,
        implied_accuracy_pct: implied,
        reported_accuracy_pct: reported,
        discrepancy_pp: reported - implied,
    })
}
