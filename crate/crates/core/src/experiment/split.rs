use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synth::{GestureDataset, Instance, Observation};

/// One entry of the execution log: which target-side labels an operation
/// was given.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub stage: String,
    pub target_classes: Vec<String>,
    pub held_out_labels: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditLog {
    pub events: Vec<AuditEvent>,
}

/// Stage allowed to read held-out labels.
pub const SCORING_STAGE: &str = "accuracy_table";

impl AuditLog {
    pub fn record(&mut self, stage: &str, target_classes: &[String], held_out_labels: bool) {
        let mut classes = target_classes.to_vec();
        classes.sort();
        classes.dedup();
        self.events.push(AuditEvent {
            stage: stage.to_string(),
            target_classes: classes,
            held_out_labels,
        });
    }

    /// Fails if any event other than scoring read held-out labels or saw an
    /// unseen class on the target side.
    pub fn check_label_hygiene(&self, unseen: &[String]) -> Result<()> {
        for e in &self.events {
            if e.stage == SCORING_STAGE {
                continue;
            }
            if e.held_out_labels {
                return Err(Error::Config(format!("stage {} read held-out labels", e.stage)));
            }
            if let Some(c) = e.target_classes.iter().find(|c| unseen.contains(c)) {
                return Err(Error::Config(format!("stage {} saw unseen class {c}", e.stage)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledInstance {
    pub id: String,
    pub user: u32,
    pub data: Observation,
}

/// Labels of the unlabelled domain, released only to scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct HeldOutLabels {
    labels: BTreeMap<String, String>,
}

impl HeldOutLabels {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Releases the labels, logging the access under `stage`.
    pub fn reveal(self, audit: &mut AuditLog, stage: &str) -> BTreeMap<String, String> {
        let classes: Vec<String> = self.labels.values().cloned().collect();
        audit.record(stage, &classes, true);
        self.labels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledDomain {
    pub instances: Vec<UnlabeledInstance>,
    pub labels: HeldOutLabels,
}

/// Splits a target dataset into the labelled domain (classes in `labeled`)
/// and the unlabelled domain (classes in `unseen`, labels sequestered).
/// Instances of other classes are dropped.
pub fn split_domains(
    dataset: &GestureDataset,
    labeled: &[String],
    unseen: &[String],
    audit: &mut AuditLog,
) -> Result<(Vec<Instance>, UnlabeledDomain)> {
    let present = dataset.classes();
    if let Some(c) = labeled.iter().chain(unseen).find(|c| !present.contains(c)) {
        return Err(Error::InvalidInput(format!("class {c} has no instances in the {} dataset", dataset.modality)));
    }
    let mut d_l = Vec::new();
    let mut instances = Vec::new();
    let mut labels = BTreeMap::new();
    for inst in &dataset.instances {
        if labeled.contains(&inst.class) {
            d_l.push(inst.clone());
        } else if unseen.contains(&inst.class) {
            if labels.insert(inst.id.clone(), inst.class.clone()).is_some() {
                return Err(Error::Dataset {
                    instance: inst.id.clone(),
                    reason: "duplicate instance id".into(),
                });
            }
            instances.push(UnlabeledInstance {
                id: inst.id.clone(),
                user: inst.user,
                data: inst.data.clone(),
            });
        }
    }
    audit.record("split_domains", labeled, false);
    Ok((
        d_l,
        UnlabeledDomain {
            instances,
            labels: HeldOutLabels { labels },
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::Modality;

    fn dataset(n_classes: usize, per_class: usize) -> GestureDataset {
        let instances = (0..n_classes)
            .flat_map(|c| {
                (0..per_class).map(move |r| Instance {
                    id: format!("i{c}-{r}"),
                    class: format!("g{c:02}"),
                    user: r as u32,
                    data: Observation::Accel(vec![vec![0.0]; 3]),
                })
            })
            .collect();
        GestureDataset::new(Modality::Accel, instances).unwrap()
    }

    fn ids(range: std::ops::Range<usize>) -> Vec<String> {
        range.map(|i| format!("g{i:02}")).collect()
    }

    #[test]
    fn counts_are_conserved() {
        let ds = dataset(25, 4);
        let mut audit = AuditLog::default();
        let (d_l, d_u) = split_domains(&ds, &ids(0..15), &ids(15..25), &mut audit).unwrap();
        assert_eq!(d_l.len(), 60);
        assert_eq!(d_u.instances.len(), 40);
        assert_eq!(d_u.labels.len(), 40);
        let unseen_classes: std::collections::BTreeSet<String> = d_u.labels.clone().reveal(&mut AuditLog::default(), "t").into_values().collect();
        assert_eq!(unseen_classes.len(), 10);
        audit.check_label_hygiene(&ids(15..25)).unwrap();
    }

    #[test]
    fn missing_class_is_an_error() {
        let ds = dataset(3, 2);
        assert!(split_domains(&ds, &ids(0..2), &ids(2..4), &mut AuditLog::default()).is_err());
    }

    #[test]
    fn hygiene_audit_flags_early_reads() {
        let ds = dataset(4, 2);
        let mut audit = AuditLog::default();
        let (_, d_u) = split_domains(&ds, &ids(0..2), &ids(2..4), &mut audit).unwrap();
        let mut early = audit.clone();
        d_u.labels.clone().reveal(&mut early, "align");
        assert!(early.check_label_hygiene(&ids(2..4)).is_err());
        d_u.labels.reveal(&mut audit, SCORING_STAGE);
        audit.check_label_hygiene(&ids(2..4)).unwrap();
        let mut leaky = AuditLog::default();
        leaky.record("align", &ids(1..3), false);
        assert!(leaky.check_label_hygiene(&ids(2..4)).is_err());
    }
}
