//! Seen/unseen class partitions.
//!
//! Built-in tables live in `data/partitions.json`. Numeric ids there index each
//! dataset's label list in the same file, so a corrected label ordering only
//! needs a data edit. For k-fold datasets a named fold is the unseen set and
//! every other class is seen; split-style datasets list both sides.

use std::collections::HashSet;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    pub name: String,
    #[serde(rename = "seen")]
    pub seen_classes: Vec<String>,
    #[serde(rename = "unseen")]
    pub unseen_classes: Vec<String>,
}

impl PartitionSpec {
    pub fn new(name: impl Into<String>, seen: Vec<String>, unseen: Vec<String>) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            seen_classes: seen,
            unseen_classes: unseen,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seen_classes.is_empty() || self.unseen_classes.is_empty() {
            return Err(Error::Config(format!(
                "partition `{}` must have non-empty seen and unseen sets",
                self.name
            )));
        }
        let seen: HashSet<&str> = self.seen_classes.iter().map(String::as_str).collect();
        if seen.len() != self.seen_classes.len() {
            return Err(Error::Config(format!("partition `{}` repeats a seen class", self.name)));
        }
        let mut unseen = HashSet::new();
        for u in &self.unseen_classes {
            if seen.contains(u.as_str()) {
                return Err(Error::Config(format!(
                    "partition `{}`: class `{u}` is both seen and unseen",
                    self.name
                )));
            }
            if !unseen.insert(u.as_str()) {
                return Err(Error::Config(format!(
                    "partition `{}` repeats unseen class `{u}`",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

pub fn load_partition(path: impl AsRef<Path>) -> Result<PartitionSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let spec: PartitionSpec = serde_json::from_str(&text)?;
    spec.validate()?;
    Ok(spec)
}

pub fn write_partition(path: impl AsRef<Path>, spec: &PartitionSpec) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(spec)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[derive(Debug, Deserialize)]
struct PartitionData {
    datasets: Vec<DatasetPartitions>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Scheme {
    Kfold,
    Split,
}

#[derive(Debug, Clone, Deserialize)]
struct DatasetPartitions {
    name: String,
    labels: Vec<String>,
    scheme: Scheme,
    partitions: Vec<RawPartition>,
}

#[derive(Debug, Clone, Deserialize)]
struct RawPartition {
    name: String,
    #[serde(default)]
    seen: Option<Vec<usize>>,
    unseen: Vec<usize>,
}

fn table() -> &'static PartitionData {
    static DATA: OnceLock<PartitionData> = OnceLock::new();
    DATA.get_or_init(|| {
        serde_json::from_str(include_str!("../../data/partitions.json")).expect("bundled partitions.json is valid")
    })
}

pub fn known_datasets() -> Vec<String> {
    table().datasets.iter().map(|d| d.name.clone()).collect()
}

fn dataset(name: &str) -> Result<&'static DatasetPartitions> {
    let key = name.to_ascii_lowercase().replace(['-', ' '], "_");
    table()
        .datasets
        .iter()
        .find(|d| d.name == key)
        .ok_or_else(|| Error::UnknownDataset {
            name: name.to_owned(),
            known: known_datasets(),
        })
}

/// Canonical label universe of a built-in dataset.
pub fn dataset_labels(dataset_name: &str) -> Result<Vec<String>> {
    Ok(dataset(dataset_name)?.labels.clone())
}

pub fn builtin_partitions(dataset_name: &str) -> Result<Vec<PartitionSpec>> {
    let ds = dataset(dataset_name)?;
    let label = |i: usize| -> Result<String> {
        ds.labels
            .get(i)
            .cloned()
            .ok_or_else(|| Error::Config(format!("class id {i} out of range for dataset `{}`", ds.name)))
    };
    ds.partitions
        .iter()
        .map(|p| {
            let unseen: Vec<String> = p.unseen.iter().map(|&i| label(i)).collect::<Result<_>>()?;
            let seen_ids: Vec<usize> = match (&ds.scheme, &p.seen) {
                (_, Some(seen)) => seen.clone(),
                (Scheme::Kfold, None) => (0..ds.labels.len()).filter(|i| !p.unseen.contains(i)).collect(),
                (Scheme::Split, None) => {
                    return Err(Error::Config(format!(
                        "split partition `{}` of `{}` lists no seen classes",
                        p.name, ds.name
                    )))
                }
            };
            let seen = seen_ids.into_iter().map(label).collect::<Result<_>>()?;
            PartitionSpec::new(p.name.clone(), seen, unseen)
        })
        .collect()
}

pub fn builtin_partition(dataset_name: &str, partition: &str) -> Result<PartitionSpec> {
    builtin_partitions(dataset_name)?
        .into_iter()
        .find(|p| p.name == partition)
        .ok_or_else(|| Error::Config(format!("dataset `{dataset_name}` has no partition `{partition}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(dataset: &str, labels: &[String]) -> Vec<usize> {
        let universe = dataset_labels(dataset).unwrap();
        let mut out: Vec<usize> = labels
            .iter()
            .map(|l| universe.iter().position(|u| u == l).unwrap())
            .collect();
        out.sort_unstable();
        out
    }

    #[test]
    fn esc50_fold0_matches_table() {
        let p = builtin_partition("esc50", "fold0").unwrap();
        assert_eq!(
            ids("esc50", &p.unseen_classes),
            vec![2, 3, 27, 29, 31, 35, 38, 40, 46, 48]
        );
        assert_eq!(p.seen_classes.len(), 40);
    }

    #[test]
    fn ten_class_splits_match_table() {
        let g = builtin_partition("gtzan", "val").unwrap();
        assert_eq!(ids("gtzan", &g.unseen_classes), vec![3, 4, 5]);
        assert_eq!(ids("gtzan", &g.seen_classes), vec![0, 1, 2, 6, 7, 8, 9]);
        let u = builtin_partition("urbansound8k", "val").unwrap();
        assert_eq!(ids("urbansound8k", &u.seen_classes), vec![0, 1, 2, 4, 5, 7, 8]);
        assert_eq!(ids("urbansound8k", &u.unseen_classes), vec![3, 6, 9]);
        let t = builtin_partition("tau2019", "val").unwrap();
        assert_eq!(ids("tau2019", &t.unseen_classes), vec![0, 1, 6]);
    }

    #[test]
    fn arca_folds_use_table_names() {
        let folds = builtin_partitions("arca23k_fsd").unwrap();
        assert_eq!(folds.len(), 7);
        assert!(folds[1]
            .unseen_classes
            .contains(&"female speech woman speaking".to_string()));
        assert!(folds[0].unseen_classes.contains(&"zipper (clothing)".to_string()));
        assert_eq!(folds[0].seen_classes.len(), 60);
    }

    #[test]
    fn fsc22_test_split_trains_on_train_and_val() {
        let val = builtin_partition("fsc22", "val").unwrap();
        let test = builtin_partition("fsc22", "test").unwrap();
        assert_eq!(val.seen_classes.len(), 13);
        assert_eq!(test.seen_classes.len(), 20);
        assert_eq!(test.unseen_classes.len(), 7);
    }

    #[test]
    fn every_builtin_partition_is_disjoint_and_in_universe() {
        for ds in known_datasets() {
            let universe: HashSet<String> = dataset_labels(&ds).unwrap().into_iter().collect();
            for p in builtin_partitions(&ds).unwrap() {
                p.validate().unwrap();
                for l in p.seen_classes.iter().chain(&p.unseen_classes) {
                    assert!(universe.contains(l), "{ds}/{}: {l}", p.name);
                }
            }
        }
    }

    #[test]
    fn k_fold_unseen_sets_cover_every_class_once() {
        for ds in ["esc50", "arca23k_fsd"] {
            let mut all: Vec<String> = builtin_partitions(ds)
                .unwrap()
                .into_iter()
                .flat_map(|p| p.unseen_classes)
                .collect();
            let n = all.len();
            all.sort();
            all.dedup();
            assert_eq!(all.len(), n);
            assert_eq!(n, dataset_labels(ds).unwrap().len());
        }
    }

    #[test]
    fn unknown_dataset_lists_known_names() {
        let err = builtin_partitions("imagenet").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("esc50") && msg.contains("gtzan"), "{msg}");
    }

    #[test]
    fn overlapping_partition_is_rejected() {
        let err = PartitionSpec::new("bad", vec!["a".into(), "b".into()], vec!["b".into()]);
        assert!(err.is_err());
        assert!(PartitionSpec::new("empty", vec![], vec!["b".into()]).is_err());
    }

    #[test]
    fn partition_file_roundtrip_and_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let spec = builtin_partition("gtzan", "val").unwrap();
        write_partition(&path, &spec).unwrap();
        assert_eq!(load_partition(&path).unwrap(), spec);
        std::fs::write(&path, r#"{"name":"x","seen":["a"],"unseen":["b"],"extra":1}"#).unwrap();
        assert!(load_partition(&path).is_err());
    }
}
