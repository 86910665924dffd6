use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub class: String,
    pub n_instances: usize,
    pub n_correct: usize,
    /// Percentage rounded half-up to one decimal.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub per_class: Vec<ClassAccuracy>,
    pub n_instances: usize,
    pub n_correct: usize,
    pub overall_accuracy: f64,
    /// `confusion[true][predicted]` counts.
    pub confusion: BTreeMap<String, BTreeMap<String, usize>>,
}

/// `100 * correct / total` rounded half-up to one decimal, computed in
/// integers so that e.g. 17 of 20 gives exactly 85.0.
pub fn percent(correct: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let (c, t) = (correct as u128, total as u128);
    let tenths = (2000 * c + t) / (2 * t);
    tenths as f64 / 10.0
}

/// Scores predictions against truths over the class set `classes`.
pub fn accuracy_table(predictions: &[String], truths: &[String], classes: &[String]) -> Result<AccuracyReport> {
    if predictions.len() != truths.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    let mut confusion: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for (p, t) in predictions.iter().zip(truths) {
        for c in [p, t] {
            if !classes.contains(c) {
                return Err(Error::InvalidInput(format!("class {c} is not in the scored class set")));
            }
        }
        *confusion.entry(t.clone()).or_default().entry(p.clone()).or_default() += 1;
    }
    let per_class: Vec<ClassAccuracy> = confusion
        .iter()
        .map(|(class, row)| {
            let n_instances = row.values().sum();
            let n_correct = row.get(class).copied().unwrap_or(0);
            ClassAccuracy {
                class: class.clone(),
                n_instances,
                n_correct,
                accuracy: percent(n_correct, n_instances),
            }
        })
        .collect();
    let n_instances = truths.len();
    let n_correct = per_class.iter().map(|c| c.n_correct).sum();
    Ok(AccuracyReport {
        per_class,
        n_instances,
        n_correct,
        overall_accuracy: percent(n_correct, n_instances),
        confusion,
    })
}

impl AccuracyReport {
    /// Overall accuracy recomputed from the confusion counts.
    pub fn accuracy_from_confusion(&self) -> f64 {
        let total: usize = self.confusion.values().flat_map(|r| r.values()).sum();
        let correct: usize = self.confusion.iter().map(|(t, r)| r.get(t).copied().unwrap_or(0)).sum();
        percent(correct, total)
    }
}

/// Writes the per-class bar-chart data as `class,accuracy`, sorted by class.
pub fn emit_plots(report: &AccuracyReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["class", "accuracy"])?;
    let mut rows: Vec<&ClassAccuracy> = report.per_class.iter().collect();
    rows.sort_by(|a, b| a.class.cmp(&b.class));
    for r in rows {
        w.write_record([r.class.as_str(), &format!("{:.1}", r.accuracy)])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_plot_data(path: &Path) -> Result<Vec<(String, f64)>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(class: &str, n: usize, correct: usize) -> (Vec<String>, Vec<String>) {
        let truths = vec![class.to_string(); n];
        let preds = (0..n).map(|i| if i < correct { class.to_string() } else { "other".to_string() }).collect();
        (preds, truths)
    }

    #[test]
    fn documented_rows() {
        let classes = vec!["about".to_string(), "help".to_string(), "other".to_string()];
        let (p, t) = pattern("about", 20, 17);
        let r = accuracy_table(&p, &t, &classes).unwrap();
        assert_eq!(r.per_class[0].accuracy, 85.0);
        let (p, t) = pattern("help", 100, 83);
        assert_eq!(accuracy_table(&p, &t, &classes).unwrap().per_class[0].accuracy, 83.0);
        let (p, t) = pattern("help", 7, 0);
        assert_eq!(accuracy_table(&p, &t, &classes).unwrap().overall_accuracy, 0.0);
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(percent(1, 8), 12.5);
        assert_eq!(percent(1, 16), 6.3);
        assert_eq!(percent(2, 3), 66.7);
        assert_eq!(percent(1, 3), 33.3);
        assert_eq!(percent(1, 2000), 0.1);
        assert_eq!(percent(1, 2001), 0.0);
    }

    #[test]
    fn unknown_classes_and_length_mismatch() {
        let classes = vec!["a".to_string()];
        assert!(accuracy_table(&["b".into()], &["a".into()], &classes).is_err());
        assert!(accuracy_table(&["a".into()], &[], &classes).is_err());
    }

    #[test]
    fn confusion_agrees_and_plots_roundtrip() {
        let classes: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let truths: Vec<String> = ["c", "a", "a", "b", "c", "c"].iter().map(|s| s.to_string()).collect();
        let preds: Vec<String> = ["c", "b", "a", "b", "a", "c"].iter().map(|s| s.to_string()).collect();
        let r = accuracy_table(&preds, &truths, &classes).unwrap();
        assert_eq!(r.overall_accuracy, r.accuracy_from_confusion());
        assert_eq!((r.n_correct, r.n_instances), (4, 6));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("acc.csv");
        emit_plots(&r, &path).unwrap();
        let rows = read_plot_data(&path).unwrap();
        assert_eq!(rows.len(), 3);
        for (row, c) in rows.iter().zip(&r.per_class) {
            assert_eq!((&row.0, row.1), (&c.class, c.accuracy));
        }
    }
}
