//! Feature and class embedding tables and their on-disk formats.
//!
//! Feature tables are JSON Lines (`{"id", "class", "vector"}`) or the binary
//! `ZDEM` layout:
//!
//! ```text
//! magic "ZDEM" | version u16 | dim u32 | count u64
//! per record: id_len u16 | id | class_len u16 | class | dim × f32
//! ```
//!
//! All integers and floats are little-endian.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const FEATURE_MAGIC: &[u8; 4] = b"ZDEM";
pub const FEATURE_FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    #[serde(rename = "class")]
    pub class_label: String,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEmbedding {
    pub label: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
    pub vector: Vec<f64>,
}

/// Records with a uniform, validated dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    dim: usize,
    records: Vec<EmbeddingRecord>,
}

impl FeatureTable {
    pub fn new(records: Vec<EmbeddingRecord>) -> Result<Self> {
        let dim = records.first().map_or(0, |r| r.vector.len());
        for r in &records {
            validate_vector(&r.id, &r.vector, dim)?;
        }
        Ok(Self { dim, records })
    }

    /// An empty table that will only accept vectors of `dim`.
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            records: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<EmbeddingRecord> {
        self.records
    }

    pub fn push(&mut self, record: EmbeddingRecord) -> Result<()> {
        if self.records.is_empty() && self.dim == 0 {
            self.dim = record.vector.len();
        }
        validate_vector(&record.id, &record.vector, self.dim)?;
        self.records.push(record);
        Ok(())
    }

    pub fn extend(&mut self, other: FeatureTable) -> Result<()> {
        for r in other.records {
            self.push(r)?;
        }
        Ok(())
    }

    /// Records whose class is in `labels`, in table order.
    pub fn filter_classes(&self, labels: &[String]) -> FeatureTable {
        let wanted: std::collections::HashSet<&str> = labels.iter().map(String::as_str).collect();
        FeatureTable {
            dim: self.dim,
            records: self
                .records
                .iter()
                .filter(|r| wanted.contains(r.class_label.as_str()))
                .cloned()
                .collect(),
        }
    }

    /// Distinct class labels in order of first appearance.
    pub fn class_labels(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        self.records
            .iter()
            .filter(|r| seen.insert(r.class_label.as_str()))
            .map(|r| r.class_label.clone())
            .collect()
    }

    /// Stacks the vectors of the given rows into a matrix.
    pub fn matrix_of(&self, indices: &[usize]) -> Matrix {
        let mut m = Matrix::zeros(indices.len(), self.dim);
        for (row, &i) in indices.iter().enumerate() {
            m.row_mut(row).copy_from_slice(&self.records[i].vector);
        }
        m
    }

    pub fn to_matrix(&self) -> Matrix {
        let all: Vec<usize> = (0..self.records.len()).collect();
        self.matrix_of(&all)
    }
}

fn validate_vector(id: &str, vector: &[f64], dim: usize) -> Result<()> {
    if vector.len() != dim {
        return Err(Error::format(
            Some(id),
            format!("vector has dimension {}, table dimension is {dim}", vector.len()),
        ));
    }
    if let Some(pos) = vector.iter().position(|v| !v.is_finite()) {
        return Err(Error::format(Some(id), format!("non-finite value at position {pos}")));
    }
    Ok(())
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| Error::format(None, format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        out.push(item);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads a feature table, picking the binary reader when the file starts with
/// the `ZDEM` magic and JSON Lines otherwise.
pub fn load_feature_table(path: impl AsRef<Path>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let mut head = [0u8; 4];
    let is_binary = {
        let mut f = open(path)?;
        f.read(&mut head).map_err(|e| Error::io(path, e))? == 4 && &head == FEATURE_MAGIC
    };
    if is_binary {
        return load_feature_table_binary(path);
    }
    FeatureTable::new(read_jsonl(path)?)
}

pub fn write_feature_table(path: impl AsRef<Path>, table: &FeatureTable) -> Result<()> {
    write_jsonl(path.as_ref(), table.records())
}

pub fn write_feature_table_binary(path: impl AsRef<Path>, table: &FeatureTable) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(create(path)?);
    let mut buf = Vec::with_capacity(18);
    buf.extend_from_slice(FEATURE_MAGIC);
    buf.extend_from_slice(&FEATURE_FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(table.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(table.len() as u64).to_le_bytes());
    for r in table.records() {
        write_short_string(&mut buf, &r.id)?;
        write_short_string(&mut buf, &r.class_label)?;
        for &v in &r.vector {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    w.write_all(&buf).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_short_string(buf: &mut Vec<u8>, s: &str) -> Result<()> {
    let len = u16::try_from(s.len()).map_err(|_| Error::format(Some(s), "string longer than 65535 bytes"))?;
    buf.extend_from_slice(&len.to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format(
                None,
                format!("truncated binary table at byte {}", self.pos),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn short_string(&mut self) -> Result<String> {
        let len = self.u16()? as usize;
        String::from_utf8(self.take(len)?.to_vec()).map_err(|_| Error::format(None, "invalid utf-8 in binary table"))
    }
}

pub fn load_feature_table_binary(path: impl AsRef<Path>) -> Result<FeatureTable> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    open(path)?.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };
    if c.take(4)? != FEATURE_MAGIC {
        return Err(Error::format(None, "missing ZDEM magic"));
    }
    let version = c.u16()?;
    if version != FEATURE_FORMAT_VERSION {
        return Err(Error::format(None, format!("unsupported ZDEM version {version}")));
    }
    let dim = c.u32()? as usize;
    let count = c.u64()?;
    let mut table = FeatureTable::empty(dim);
    for _ in 0..count {
        let id = c.short_string()?;
        let class_label = c.short_string()?;
        let mut vector = Vec::with_capacity(dim);
        for _ in 0..dim {
            vector.push(f64::from(c.f32()?));
        }
        table.push(EmbeddingRecord {
            id,
            class_label,
            vector,
        })?;
    }
    if c.pos != bytes.len() {
        return Err(Error::format(None, "trailing bytes after last record"));
    }
    Ok(table)
}

/// Class embeddings keyed by label, with a uniform dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassTable {
    dim: usize,
    classes: BTreeMap<String, ClassEmbedding>,
}

impl ClassTable {
    pub fn new(classes: Vec<ClassEmbedding>) -> Result<Self> {
        let dim = classes.first().map_or(0, |c| c.vector.len());
        let mut map = BTreeMap::new();
        for c in classes {
            validate_vector(&c.label, &c.vector, dim)?;
            if map.contains_key(&c.label) {
                return Err(Error::format(Some(&c.label), "duplicate class label"));
            }
            map.insert(c.label.clone(), c);
        }
        Ok(Self { dim, classes: map })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<&ClassEmbedding> {
        self.classes.get(label)
    }

    pub fn vector(&self, label: &str) -> Result<&[f64]> {
        self.classes
            .get(label)
            .map(|c| c.vector.as_slice())
            .ok_or_else(|| Error::MissingClass(label.to_owned()))
    }

    /// Sorted by label.
    pub fn iter(&self) -> impl Iterator<Item = &ClassEmbedding> {
        self.classes.values()
    }

    /// Stacks class vectors for `labels` (in that order) into a `C × dim` matrix.
    pub fn matrix(&self, labels: &[String]) -> Result<Matrix> {
        let mut m = Matrix::zeros(labels.len(), self.dim);
        for (i, l) in labels.iter().enumerate() {
            m.row_mut(i).copy_from_slice(self.vector(l)?);
        }
        Ok(m)
    }
}

pub fn load_class_table(path: impl AsRef<Path>) -> Result<ClassTable> {
    ClassTable::new(read_jsonl(path.as_ref())?)
}

pub fn write_class_table(path: impl AsRef<Path>, table: &ClassTable) -> Result<()> {
    let items: Vec<&ClassEmbedding> = table.iter().collect();
    write_jsonl(path.as_ref(), &items)
}

/// Word-vector lookup used to build class vectors.
pub trait WordLookup {
    fn lookup(&self, token: &str) -> Option<&[f64]>;
}

impl WordLookup for HashMap<String, Vec<f64>> {
    fn lookup(&self, token: &str) -> Option<&[f64]> {
        self.get(token).map(Vec::as_slice)
    }
}

impl WordLookup for BTreeMap<String, Vec<f64>> {
    fn lookup(&self, token: &str) -> Option<&[f64]> {
        self.get(token).map(Vec::as_slice)
    }
}

/// Splits a label into lookup tokens: whitespace-separated, with surrounding
/// punctuation such as the parentheses in `zipper (clothing)` stripped.
pub fn tokenize(label: &str) -> Vec<&str> {
    label
        .split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric() && c != '_' && c != '-'))
        .filter(|t| !t.is_empty())
        .collect()
}

/// Flat mean of the word vectors of every token in the label and in each
/// synonym.
pub fn class_vector(class: &ClassEmbedding, words: &impl WordLookup) -> Result<Vec<f64>> {
    let phrases = std::iter::once(class.label.as_str()).chain(class.synonyms.iter().map(String::as_str));
    let mut sum: Option<Vec<f64>> = None;
    let mut count = 0usize;
    let mut missing = Vec::new();
    for phrase in phrases {
        for token in tokenize(phrase) {
            let Some(v) = words.lookup(token) else {
                if !missing.iter().any(|m| m == token) {
                    missing.push(token.to_owned());
                }
                continue;
            };
            match sum.as_mut() {
                None => sum = Some(v.to_vec()),
                Some(s) => {
                    if s.len() != v.len() {
                        return Err(Error::dim(format!("word vector `{token}`"), s.len(), v.len()));
                    }
                    for (a, b) in s.iter_mut().zip(v) {
                        *a += b;
                    }
                }
            }
            count += 1;
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingTokens(missing));
    }
    let sum = sum.ok_or_else(|| Error::format(Some(&class.label), "label has no tokens"))?;
    Ok(sum.into_iter().map(|v| v / count as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, class: &str, v: &[f64]) -> EmbeddingRecord {
        EmbeddingRecord {
            id: id.into(),
            class_label: class.into(),
            vector: v.to_vec(),
        }
    }

    #[test]
    fn jsonl_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.jsonl");
        let table = FeatureTable::new(vec![
            rec("a", "dog", &[0.1, -0.2, 1.0 / 3.0, 4.0]),
            rec("b", "cat", &[1e-300, 0.0, -0.0, 7.5]),
        ])
        .unwrap();
        write_feature_table(&path, &table).unwrap();
        let back = load_feature_table(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.dim(), 4);
        assert_eq!(back, table);
    }

    #[test]
    fn short_vector_names_offending_record() {
        let mut good = vec![rec("r0", "x", &vec![0.0; 128])];
        good.push(rec("r1-short", "x", &vec![0.0; 127]));
        let err = FeatureTable::new(good).unwrap_err();
        assert!(err.to_string().contains("r1-short"), "{err}");

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            "{\"id\":\"ok\",\"class\":\"c\",\"vector\":[1,2]}\n{\"id\":\"bad\",\"class\":\"c\",\"vector\":[1]}\n",
        )
        .unwrap();
        let err = load_feature_table(&path).unwrap_err();
        assert!(err.to_string().contains("bad"), "{err}");
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let err = FeatureTable::new(vec![rec("nan", "c", &[0.0, f64::NAN])]).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }

    #[test]
    fn binary_roundtrip_at_f32_precision() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.zdem");
        let table = FeatureTable::new(vec![
            rec("clip-1", "rain", &[0.5, -0.25, 0.125]),
            rec("clip-2", "wind", &[1.0, 2.0, f64::from(0.3f32)]),
        ])
        .unwrap();
        write_feature_table_binary(&path, &table).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"ZDEM");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        assert_eq!(u32::from_le_bytes(bytes[6..10].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(bytes[10..18].try_into().unwrap()), 2);
        assert_eq!(load_feature_table(&path).unwrap(), table);
    }

    #[test]
    fn truncated_binary_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.zdem");
        let table = FeatureTable::new(vec![rec("a", "b", &[1.0, 2.0])]).unwrap();
        write_feature_table_binary(&path, &table).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 2);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(load_feature_table(&path), Err(Error::Format { .. })));
    }

    fn words() -> HashMap<String, Vec<f64>> {
        [
            ("dog", vec![1.0, 1.0]),
            ("hound", vec![3.0, 3.0]),
            ("female", vec![1.0, 0.0]),
            ("speech", vec![0.0, 1.0]),
            ("woman", vec![2.0, 2.0]),
            ("speaking", vec![5.0, -1.0]),
            ("zipper", vec![4.0, 0.0]),
            ("clothing", vec![0.0, 4.0]),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_owned(), v))
        .collect()
    }

    fn class(label: &str, synonyms: &[&str]) -> ClassEmbedding {
        ClassEmbedding {
            label: label.into(),
            synonyms: synonyms.iter().map(|s| s.to_string()).collect(),
            vector: vec![],
        }
    }

    #[test]
    fn class_vector_without_synonyms_is_the_label_vector() {
        assert_eq!(class_vector(&class("dog", &[]), &words()).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn class_vector_two_point_mean() {
        assert_eq!(
            class_vector(&class("dog", &["hound"]), &words()).unwrap(),
            vec![2.0, 2.0]
        );
    }

    #[test]
    fn class_vector_flat_mean_over_tokens_and_synonyms() {
        // four vectors: dog, hound, woman, speaking -> sum (11, 5) / 4
        let v = class_vector(&class("dog", &["hound", "woman", "speaking"]), &words()).unwrap();
        assert_eq!(v, vec![11.0 / 4.0, 5.0 / 4.0]);
        let v = class_vector(&class("female speech woman speaking", &[]), &words()).unwrap();
        assert_eq!(v, vec![2.0, 0.5]);
        let v = class_vector(&class("zipper (clothing)", &[]), &words()).unwrap();
        assert_eq!(v, vec![2.0, 2.0]);
    }

    #[test]
    fn class_vector_lists_missing_tokens() {
        let err = class_vector(&class("dog", &["wolf", "coyote"]), &words()).unwrap_err();
        match err {
            Error::MissingTokens(t) => assert_eq!(t, vec!["wolf".to_string(), "coyote".to_string()]),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn class_table_rejects_mixed_dimensions() {
        let a = ClassEmbedding {
            label: "a".into(),
            synonyms: vec![],
            vector: vec![0.0; 3],
        };
        let b = ClassEmbedding {
            label: "b".into(),
            synonyms: vec![],
            vector: vec![0.0; 2],
        };
        assert!(ClassTable::new(vec![a, b]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn class_vector_is_permutation_invariant(
                perm in proptest::sample::subsequence(vec!["hound", "woman", "speaking", "zipper"], 0..=4)
                    .prop_shuffle()
            ) {
                let mut sorted = perm.clone();
                sorted.sort_unstable();
                let a = class_vector(&class("dog", &perm), &words()).unwrap();
                let b = class_vector(&class("dog", &sorted), &words()).unwrap();
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }
}
