use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::records::FeatureTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub class_count: usize,
    pub samples_per_class: BTreeMap<String, usize>,
    pub average_samples_per_class: f64,
}

impl DatasetStats {
    /// Per-class synthetic sample count: the average rounded to the nearest
    /// integer.
    pub fn generation_count(&self) -> usize {
        self.average_samples_per_class.round() as usize
    }
}

pub fn dataset_stats(table: &FeatureTable) -> Result<DatasetStats> {
    if table.is_empty() {
        return Err(Error::format(None, "cannot compute statistics of an empty table"));
    }
    let mut samples_per_class = BTreeMap::new();
    for r in table.records() {
        *samples_per_class.entry(r.class_label.clone()).or_insert(0usize) += 1;
    }
    let class_count = samples_per_class.len();
    Ok(DatasetStats {
        class_count,
        average_samples_per_class: table.len() as f64 / class_count as f64,
        samples_per_class,
    })
}
