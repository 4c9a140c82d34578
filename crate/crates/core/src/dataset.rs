//! Corpus ingestion: JSONL records, toxicity/attribute binarization, word
//! vectors, and feature assembly (precomputed embeddings, EmbedSum,
//! EmbedMean, indicator concatenation).

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

/// One ingested JSONL row. `toxicity` and every group score live in [0, 1];
/// `embedding`, when present, must match the corpus-wide dimension.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    pub toxicity: f64,
    #[serde(default)]
    pub groups: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f32>>,
}

/// A sensitive attribute as a cluster of corpus group names.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct SensitiveMapping {
    pub attribute_name: String,
    pub member_groups: Vec<String>,
}

impl SensitiveMapping {
    pub fn new(name: &str, groups: &[&str]) -> Self {
        SensitiveMapping {
            attribute_name: name.to_string(),
            member_groups: groups.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.member_groups.is_empty() {
            return Err(Error::Schema(format!(
                "sensitive attribute `{}` has no member groups",
                self.attribute_name
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for g in &self.member_groups {
            if !seen.insert(g) {
                return Err(Error::Schema(format!(
                    "duplicate group `{g}` in attribute `{}`",
                    self.attribute_name
                )));
            }
        }
        Ok(())
    }
}

/// The four identity clusters that ship as the default attribute set.
pub fn default_mappings() -> Vec<SensitiveMapping> {
    vec![
        SensitiveMapping::new("Black", &["black"]),
        SensitiveMapping::new(
            "LGBTQ",
            &[
                "homosexual_gay_or_lesbian",
                "bisexual",
                "other_sexual_orientation",
                "other_gender",
                "transgender",
            ],
        ),
        SensitiveMapping::new("Muslim", &["muslim"]),
        SensitiveMapping::new(
            "NeuroDiv",
            &[
                "psychiatric_or_mental_illness",
                "intellectual_or_learning_disability",
            ],
        ),
    ]
}

/// Fully assembled corpus: ids, n×d feature matrix, binary labels, binary
/// sensitive attribute.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub ids: Vec<String>,
    pub features: Matrix,
    pub y: Vec<u8>,
    pub z: Vec<u8>,
}

impl Corpus {
    pub fn new(ids: Vec<String>, features: Matrix, y: Vec<u8>, z: Vec<u8>) -> Result<Self> {
        let n = ids.len();
        if features.rows() != n || y.len() != n || z.len() != n {
            return Err(Error::Shape {
                expected: format!("{n} rows in every array"),
                got: format!("features {}, y {}, z {}", features.rows(), y.len(), z.len()),
            });
        }
        if y.iter().chain(z.iter()).any(|&b| b > 1) {
            return Err(Error::Schema("labels and attributes must be 0/1".into()));
        }
        let mut seen = std::collections::HashSet::with_capacity(n);
        for id in &ids {
            if !seen.insert(id) {
                return Err(Error::Schema(format!("duplicate id `{id}`")));
            }
        }
        Ok(Corpus {
            ids,
            features,
            y,
            z,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Write `<stem>.json` (ids, labels, attributes) plus `<stem>.irmb`
    /// (features). The pair re-reads bit-identically.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.features.save(&dir.join(format!("{stem}.irmb")))?;
        let header = CorpusHeader {
            version: 1,
            matrix: format!("{stem}.irmb"),
            ids: self.ids.clone(),
            y: self.y.clone(),
            z: self.z.clone(),
        };
        let json =
            serde_json::to_string_pretty(&header).map_err(|e| Error::Schema(e.to_string()))?;
        std::fs::write(dir.join(format!("{stem}.json")), json)?;
        Ok(())
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Corpus> {
        let text = std::fs::read_to_string(dir.join(format!("{stem}.json")))?;
        let header: CorpusHeader =
            serde_json::from_str(&text).map_err(|e| Error::Schema(e.to_string()))?;
        if header.version != 1 {
            return Err(Error::Format(format!(
                "unsupported corpus version {}",
                header.version
            )));
        }
        let features = Matrix::load(&dir.join(&header.matrix))?;
        Corpus::new(header.ids, features, header.y, header.z)
    }
}

#[derive(Serialize, Deserialize)]
struct CorpusHeader {
    version: u32,
    matrix: String,
    ids: Vec<String>,
    y: Vec<u8>,
    z: Vec<u8>,
}

/// Read a JSONL corpus. Every line must be an object with `id` and
/// `toxicity`; `text`, `groups` and `embedding` are optional. Empty lines are
/// not permitted mid-file but a trailing newline is fine.
pub fn load_corpus(path: &Path) -> Result<Vec<RawRecord>> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut records = Vec::new();
    let mut dim: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: RawRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        validate_record(&record)?;
        if let Some(emb) = &record.embedding {
            match dim {
                None => dim = Some(emb.len()),
                Some(d) if d != emb.len() => {
                    return Err(Error::Schema(format!(
                        "embedding at line {lineno} has dimension {}, corpus declares {d}",
                        emb.len()
                    )));
                }
                _ => {}
            }
        }
        records.push(record);
    }
    Ok(records)
}

fn validate_record(record: &RawRecord) -> Result<()> {
    if !(0.0..=1.0).contains(&record.toxicity) {
        return Err(Error::Range {
            field: "toxicity".into(),
            value: record.toxicity,
        });
    }
    for (name, &score) in &record.groups {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::Range {
                field: format!("groups.{name}"),
                value: score,
            });
        }
    }
    Ok(())
}

/// 1 iff the toxicity score is 0.5 or greater.
pub fn binarize_toxicity(score: f64) -> Result<u8> {
    if !(0.0..=1.0).contains(&score) {
        return Err(Error::Range {
            field: "toxicity".into(),
            value: score,
        });
    }
    Ok(if score >= 0.5 { 1 } else { 0 })
}

/// Outcome of resolving one record against one attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttributeResolution {
    /// About the queried attribute and no other: z = 1.
    Present,
    /// About no attribute at all: z = 0.
    Absent,
    /// About a different attribute, or about several: dropped from the task.
    Excluded,
}

fn is_about(record: &RawRecord, mapping: &SensitiveMapping) -> bool {
    // Group names missing from the record's score map count as score 0.
    mapping
        .member_groups
        .iter()
        .any(|g| record.groups.get(g).copied().unwrap_or(0.0) > 0.0)
}

/// A record is "about" an attribute iff any member group's score is positive.
/// Records about the queried attribute exclusively get z = 1; records about
/// no attribute get z = 0; everything else is excluded.
pub fn resolve_sensitive_attribute(
    record: &RawRecord,
    mapping: &SensitiveMapping,
    all_mappings: &[SensitiveMapping],
) -> AttributeResolution {
    let about_queried = is_about(record, mapping);
    let about_other = all_mappings
        .iter()
        .filter(|m| m.attribute_name != mapping.attribute_name)
        .any(|m| is_about(record, m));
    match (about_queried, about_other) {
        (true, false) => AttributeResolution::Present,
        (false, false) => AttributeResolution::Absent,
        _ => AttributeResolution::Excluded,
    }
}

/// Token → vector table read from text word-vector files.
#[derive(Debug, Clone)]
pub struct WordVectorTable {
    pub dim: usize,
    pub entries: BTreeMap<String, Vec<f32>>,
}

/// A loaded table plus how many duplicate tokens were overwritten
/// (last occurrence wins).
#[derive(Debug)]
pub struct LoadedWordVectors {
    pub table: WordVectorTable,
    pub duplicates_replaced: usize,
}

/// Parse the `<count> <dim>` header line, then one `<token> <v1> ... <vdim>`
/// entry per line, whitespace-delimited. The header count is advisory; the
/// table holds exactly the parsed entries.
pub fn load_word_vectors(path: &Path) -> Result<LoadedWordVectors> {
    let file = std::fs::File::open(path)?;
    let mut lines = std::io::BufReader::new(file).lines();
    let header = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing `<count> <dim>` header".into(),
    })??;
    let mut parts = header.split_whitespace();
    let _count: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or(Error::Parse {
            line: 1,
            message: "header must start with an integer count".into(),
        })?;
    let dim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or(Error::Parse {
            line: 1,
            message: "header must give an integer dimension".into(),
        })?;
    let mut entries = BTreeMap::new();
    let mut duplicates = 0;
    for (idx, line) in lines.enumerate() {
        let line = line?;
        let lineno = idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().ok_or(Error::Parse {
            line: lineno,
            message: "missing token".into(),
        })?;
        let mut vector = Vec::with_capacity(dim);
        for field in fields {
            let v: f32 = field.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("`{field}` is not a number"),
            })?;
            vector.push(v);
        }
        if vector.len() != dim {
            return Err(Error::Parse {
                line: lineno,
                message: format!(
                    "vector for `{token}` has {} components, header declares {dim}",
                    vector.len()
                ),
            });
        }
        if entries.insert(token.to_string(), vector).is_some() {
            duplicates += 1;
        }
    }
    Ok(LoadedWordVectors {
        table: WordVectorTable { dim, entries },
        duplicates_replaced: duplicates,
    })
}

/// Text normalization knobs for EmbedSum/EmbedMean.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokenizerOptions {
    pub lowercase: bool,
    /// Strip leading/trailing non-alphanumeric characters from each token.
    pub strip_punctuation: bool,
}

impl Default for TokenizerOptions {
    fn default() -> Self {
        TokenizerOptions {
            lowercase: true,
            strip_punctuation: true,
        }
    }
}

/// Split on Unicode whitespace, optionally lowercase and strip surrounding
/// punctuation. Tokens that become empty are dropped.
pub fn tokenize(text: &str, opts: &TokenizerOptions) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let token = if opts.strip_punctuation {
                raw.trim_matches(|c: char| !c.is_alphanumeric())
            } else {
                raw
            };
            if token.is_empty() {
                return None;
            }
            Some(if opts.lowercase {
                token.to_lowercase()
            } else {
                token.to_string()
            })
        })
        .collect()
}

/// Componentwise sum of the vectors for in-table tokens. Unknown tokens are
/// skipped; if nothing matches the result is the zero vector.
pub fn embed_sum(tokens: &[String], table: &WordVectorTable) -> Vec<f32> {
    let mut acc = vec![0.0f64; table.dim];
    for token in tokens {
        if let Some(v) = table.entries.get(token) {
            for (a, &x) in acc.iter_mut().zip(v) {
                *a += x as f64;
            }
        }
    }
    acc.into_iter().map(|v| v as f32).collect()
}

/// EmbedSum divided by the number of in-table tokens; zero vector when no
/// token is known.
pub fn embed_mean(tokens: &[String], table: &WordVectorTable) -> Vec<f32> {
    let mut acc = vec![0.0f64; table.dim];
    let mut hits = 0usize;
    for token in tokens {
        if let Some(v) = table.entries.get(token) {
            hits += 1;
            for (a, &x) in acc.iter_mut().zip(v) {
                *a += x as f64;
            }
        }
    }
    if hits == 0 {
        return vec![0.0; table.dim];
    }
    acc.into_iter().map(|v| (v / hits as f64) as f32).collect()
}

/// Count of tokens that have a table entry (the EmbedMean divisor).
pub fn in_table_count(tokens: &[String], table: &WordVectorTable) -> usize {
    tokens
        .iter()
        .filter(|t| table.entries.contains_key(*t))
        .count()
}

/// Append the sensitive attribute as a final {0.0, 1.0} column.
pub fn concat_indicator(features: &Matrix, z: &[u8]) -> Result<Matrix> {
    features.with_indicator_column(z)
}

/// How comment features are produced during corpus assembly.
pub enum FeatureSource<'a> {
    /// Use the per-record `embedding` field, or rows of a sidecar matrix
    /// aligned with the JSONL line order.
    Precomputed { sidecar: Option<&'a Matrix> },
    /// Sum of word vectors over the tokenized text.
    EmbedSum {
        table: &'a WordVectorTable,
        tokenizer: TokenizerOptions,
    },
    /// Mean of word vectors over the tokenized text.
    EmbedMean {
        table: &'a WordVectorTable,
        tokenizer: TokenizerOptions,
    },
}

/// Binarize labels, resolve the sensitive attribute (dropping excluded
/// records), and build the feature matrix.
pub fn assemble_corpus(
    records: &[RawRecord],
    attribute: &SensitiveMapping,
    all_mappings: &[SensitiveMapping],
    source: &FeatureSource,
) -> Result<Corpus> {
    attribute.validate()?;
    if let FeatureSource::Precomputed {
        sidecar: Some(matrix),
    } = source
    {
        if matrix.rows() != records.len() {
            return Err(Error::Schema(format!(
                "sidecar has {} rows for {} records",
                matrix.rows(),
                records.len()
            )));
        }
    }
    let mut ids = Vec::new();
    let mut rows: Vec<Vec<f32>> = Vec::new();
    let mut y = Vec::new();
    let mut z = Vec::new();
    for (index, record) in records.iter().enumerate() {
        let bit = match resolve_sensitive_attribute(record, attribute, all_mappings) {
            AttributeResolution::Present => 1,
            AttributeResolution::Absent => 0,
            AttributeResolution::Excluded => continue,
        };
        let features = match source {
            FeatureSource::Precomputed { sidecar } => match (&record.embedding, sidecar) {
                (Some(emb), _) => emb.clone(),
                (None, Some(matrix)) => matrix.row(index).to_vec(),
                (None, None) => {
                    return Err(Error::Schema(format!(
                        "record `{}` has no embedding and no sidecar was given",
                        record.id
                    )));
                }
            },
            FeatureSource::EmbedSum { table, tokenizer } => {
                let text = record.text.as_deref().unwrap_or("");
                embed_sum(&tokenize(text, tokenizer), table)
            }
            FeatureSource::EmbedMean { table, tokenizer } => {
                let text = record.text.as_deref().unwrap_or("");
                embed_mean(&tokenize(text, tokenizer), table)
            }
        };
        ids.push(record.id.clone());
        rows.push(features);
        y.push(binarize_toxicity(record.toxicity)?);
        z.push(bit);
    }
    Corpus::new(ids, Matrix::from_rows(&rows)?, y, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_corpus_preserves_order() {
        let f = write_temp(
            "{\"id\":\"a\",\"toxicity\":0.7,\"groups\":{\"black\":0.5}}\n\
             {\"id\":\"b\",\"toxicity\":0.1}\n",
        );
        let records = load_corpus(f.path()).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].id, "a");
        assert_eq!(records[1].id, "b");
        assert!(records[1].groups.is_empty());
    }

    #[test]
    fn load_corpus_empty_file_is_empty_list() {
        let f = write_temp("");
        assert!(load_corpus(f.path()).unwrap().is_empty());
    }

    #[test]
    fn load_corpus_rejects_out_of_range_toxicity() {
        let f = write_temp("{\"id\":\"a\",\"toxicity\":1.3}\n");
        match load_corpus(f.path()) {
            Err(Error::Range { field, value }) => {
                assert_eq!(field, "toxicity");
                assert_eq!(value, 1.3);
            }
            other => panic!("expected range error, got {other:?}"),
        }
    }

    #[test]
    fn load_corpus_reports_line_of_malformed_json() {
        let f = write_temp("{\"id\":\"a\",\"toxicity\":0.2}\nnot json\n");
        match load_corpus(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn load_corpus_rejects_inconsistent_embedding_dims() {
        let f = write_temp(
            "{\"id\":\"a\",\"toxicity\":0.2,\"embedding\":[1.0,2.0]}\n\
             {\"id\":\"b\",\"toxicity\":0.2,\"embedding\":[1.0]}\n",
        );
        assert!(matches!(load_corpus(f.path()), Err(Error::Schema(_))));
    }

    #[test]
    fn binarize_threshold_is_inclusive_at_half() {
        assert_eq!(binarize_toxicity(0.5).unwrap(), 1);
        assert_eq!(binarize_toxicity(0.49).unwrap(), 0);
        assert_eq!(binarize_toxicity(0.0).unwrap(), 0);
        assert_eq!(binarize_toxicity(1.0).unwrap(), 1);
        assert!(binarize_toxicity(-0.1).is_err());
        assert!(binarize_toxicity(1.01).is_err());
    }

    fn record_with_groups(pairs: &[(&str, f64)]) -> RawRecord {
        RawRecord {
            id: "r".into(),
            text: None,
            toxicity: 0.0,
            groups: pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            embedding: None,
        }
    }

    #[test]
    fn resolve_exclusive_membership() {
        let mappings = default_mappings();
        let black = &mappings[0];

        let r = record_with_groups(&[("black", 0.1)]);
        assert_eq!(
            resolve_sensitive_attribute(&r, black, &mappings),
            AttributeResolution::Present
        );

        let r = record_with_groups(&[]);
        assert_eq!(
            resolve_sensitive_attribute(&r, black, &mappings),
            AttributeResolution::Absent
        );

        let r = record_with_groups(&[("black", 0.2), ("muslim", 0.3)]);
        assert_eq!(
            resolve_sensitive_attribute(&r, black, &mappings),
            AttributeResolution::Excluded
        );

        // About a different attribute only: excluded, not z=0.
        let r = record_with_groups(&[("muslim", 0.3)]);
        assert_eq!(
            resolve_sensitive_attribute(&r, black, &mappings),
            AttributeResolution::Excluded
        );
    }

    #[test]
    fn resolve_partition_property() {
        // Exactly one of the three outcomes holds for any score pattern over
        // the default groups.
        let mappings = default_mappings();
        let names: Vec<&str> = mappings
            .iter()
            .flat_map(|m| m.member_groups.iter().map(String::as_str))
            .collect();
        for mask in 0u32..(1 << names.len().min(10)) {
            let pairs: Vec<(&str, f64)> = names
                .iter()
                .enumerate()
                .map(|(i, &n)| (n, if mask >> i & 1 == 1 { 0.5 } else { 0.0 }))
                .collect();
            let r = record_with_groups(&pairs);
            for m in &mappings {
                // each call returns exactly one variant by construction; check
                // the documented semantics instead
                let about_m = m
                    .member_groups
                    .iter()
                    .any(|g| r.groups.get(g).copied().unwrap_or(0.0) > 0.0);
                let about_count = mappings
                    .iter()
                    .filter(|mm| {
                        mm.member_groups
                            .iter()
                            .any(|g| r.groups.get(g).copied().unwrap_or(0.0) > 0.0)
                    })
                    .count();
                let got = resolve_sensitive_attribute(&r, m, &mappings);
                let want = if about_m && about_count == 1 {
                    AttributeResolution::Present
                } else if about_count == 0 {
                    AttributeResolution::Absent
                } else {
                    AttributeResolution::Excluded
                };
                assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn unknown_group_in_mapping_counts_as_zero() {
        let mapping = SensitiveMapping::new("Ghost", &["no_such_group"]);
        let r = record_with_groups(&[]);
        assert_eq!(
            resolve_sensitive_attribute(&r, &mapping, std::slice::from_ref(&mapping)),
            AttributeResolution::Absent
        );
    }

    #[test]
    fn word_vectors_happy_path() {
        let f = write_temp("2 3\nfoo 1 0 0.5\nbar -1 2 3\n");
        let loaded = load_word_vectors(f.path()).unwrap();
        assert_eq!(loaded.table.dim, 3);
        assert_eq!(loaded.table.entries.len(), 2);
        assert_eq!(loaded.duplicates_replaced, 0);
        assert_eq!(loaded.table.entries["foo"], vec![1.0, 0.0, 0.5]);
    }

    #[test]
    fn word_vectors_length_mismatch_names_line() {
        let f = write_temp("2 3\nfoo 1 0 0.5\nbar -1 2\n");
        match load_word_vectors(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn word_vectors_empty_body() {
        let f = write_temp("0 3\n");
        let loaded = load_word_vectors(f.path()).unwrap();
        assert_eq!(loaded.table.dim, 3);
        assert!(loaded.table.entries.is_empty());
    }

    #[test]
    fn word_vectors_duplicate_last_wins() {
        let f = write_temp("2 1\nfoo 1\nfoo 2\n");
        let loaded = load_word_vectors(f.path()).unwrap();
        assert_eq!(loaded.duplicates_replaced, 1);
        assert_eq!(loaded.table.entries["foo"], vec![2.0]);
    }

    fn small_table() -> WordVectorTable {
        let mut entries = BTreeMap::new();
        entries.insert("a".to_string(), vec![1.0, 0.0]);
        entries.insert("b".to_string(), vec![0.0, 2.0]);
        WordVectorTable { dim: 2, entries }
    }

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn embed_sum_examples() {
        let t = small_table();
        assert_eq!(embed_sum(&toks(&["a", "b"]), &t), vec![1.0, 2.0]);
        assert_eq!(embed_sum(&toks(&["a", "a"]), &t), vec![2.0, 0.0]);
        assert_eq!(embed_sum(&toks(&["unk"]), &t), vec![0.0, 0.0]);
        assert_eq!(embed_sum(&[], &t), vec![0.0, 0.0]);
    }

    #[test]
    fn embed_mean_examples() {
        let t = small_table();
        assert_eq!(embed_mean(&toks(&["a", "b"]), &t), vec![0.5, 1.0]);
        let mut entries = BTreeMap::new();
        entries.insert("a".to_string(), vec![3.0, 3.0]);
        let singleton = WordVectorTable { dim: 2, entries };
        assert_eq!(embed_mean(&toks(&["a"]), &singleton), vec![3.0, 3.0]);
        assert_eq!(embed_mean(&toks(&["unk"]), &t), vec![0.0, 0.0]);
    }

    #[test]
    fn embed_mean_times_count_equals_embed_sum() {
        // Oracle: EmbedMean is EmbedSum divided by the in-table token count.
        let t = small_table();
        let mut rng = crate::rng::Rng::new(11);
        let vocab = ["a", "b", "unk", "zz"];
        for _ in 0..200 {
            let len = rng.below(12) as usize;
            let tokens: Vec<String> = (0..len)
                .map(|_| vocab[rng.below(4) as usize].to_string())
                .collect();
            let k = in_table_count(&tokens, &t);
            let sum = embed_sum(&tokens, &t);
            let mean = embed_mean(&tokens, &t);
            for (s, m) in sum.iter().zip(&mean) {
                let scaled = *m as f64 * k as f64;
                let err = (scaled - *s as f64).abs();
                let denom = (*s as f64).abs().max(1.0);
                assert!(err / denom <= 1e-6, "sum {s} vs mean*k {scaled}");
            }
        }
    }

    #[test]
    fn tokenize_strips_and_lowercases() {
        let opts = TokenizerOptions::default();
        assert_eq!(
            tokenize("Hello, WORLD!  (rust)", &opts),
            vec!["hello", "world", "rust"]
        );
        assert_eq!(tokenize("--- ...", &opts), Vec::<String>::new());
        let keep = TokenizerOptions {
            lowercase: false,
            strip_punctuation: false,
        };
        assert_eq!(tokenize("Hi!", &keep), vec!["Hi!"]);
    }

    #[test]
    fn concat_indicator_examples() {
        let m = Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let out = concat_indicator(&m, &[1, 0]).unwrap();
        assert_eq!(out.row(0), &[1.0, 2.0, 1.0]);
        assert_eq!(out.row(1), &[3.0, 4.0, 0.0]);

        let empty = Matrix::zeros(0, 3);
        let out = concat_indicator(&empty, &[]).unwrap();
        assert_eq!((out.rows(), out.cols()), (0, 4));

        let degenerate = Matrix::zeros(1, 0);
        let out = concat_indicator(&degenerate, &[1]).unwrap();
        assert_eq!(out.row(0), &[1.0]);

        assert!(concat_indicator(&m, &[1]).is_err());
    }

    #[test]
    fn assemble_corpus_filters_and_binarizes() {
        let records = vec![
            RawRecord {
                id: "keep-z1".into(),
                text: None,
                toxicity: 0.9,
                groups: [("black".to_string(), 0.4)].into_iter().collect(),
                embedding: Some(vec![1.0, 2.0]),
            },
            RawRecord {
                id: "drop-multi".into(),
                text: None,
                toxicity: 0.9,
                groups: [("black".to_string(), 0.4), ("muslim".to_string(), 0.2)]
                    .into_iter()
                    .collect(),
                embedding: Some(vec![9.0, 9.0]),
            },
            RawRecord {
                id: "keep-z0".into(),
                text: None,
                toxicity: 0.2,
                groups: BTreeMap::new(),
                embedding: Some(vec![3.0, 4.0]),
            },
        ];
        let mappings = default_mappings();
        let corpus = assemble_corpus(
            &records,
            &mappings[0],
            &mappings,
            &FeatureSource::Precomputed { sidecar: None },
        )
        .unwrap();
        assert_eq!(corpus.ids, vec!["keep-z1", "keep-z0"]);
        assert_eq!(corpus.y, vec![1, 0]);
        assert_eq!(corpus.z, vec![1, 0]);
        assert_eq!(corpus.features.row(1), &[3.0, 4.0]);
    }

    #[test]
    fn assemble_corpus_sidecar_rows_align_with_jsonl_order() {
        // The excluded middle record still occupies sidecar row 1.
        let records = vec![
            RawRecord {
                id: "a".into(),
                text: None,
                toxicity: 0.9,
                groups: [("black".to_string(), 0.4)].into_iter().collect(),
                embedding: None,
            },
            RawRecord {
                id: "skip".into(),
                text: None,
                toxicity: 0.9,
                groups: [("black".to_string(), 0.4), ("muslim".to_string(), 0.1)]
                    .into_iter()
                    .collect(),
                embedding: None,
            },
            RawRecord {
                id: "b".into(),
                text: None,
                toxicity: 0.1,
                groups: BTreeMap::new(),
                embedding: None,
            },
        ];
        let sidecar = Matrix::from_vec(3, 2, vec![10.0, 11.0, 20.0, 21.0, 30.0, 31.0]).unwrap();
        let mappings = default_mappings();
        let corpus = assemble_corpus(
            &records,
            &mappings[0],
            &mappings,
            &FeatureSource::Precomputed {
                sidecar: Some(&sidecar),
            },
        )
        .unwrap();
        assert_eq!(corpus.ids, vec!["a", "b"]);
        assert_eq!(corpus.features.row(0), &[10.0, 11.0]);
        assert_eq!(corpus.features.row(1), &[30.0, 31.0]);

        let short = Matrix::zeros(2, 2);
        assert!(matches!(
            assemble_corpus(
                &records,
                &mappings[0],
                &mappings,
                &FeatureSource::Precomputed {
                    sidecar: Some(&short)
                },
            ),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn corpus_save_load_round_trip_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = Corpus::new(
            vec!["x".into(), "y".into()],
            Matrix::from_vec(2, 2, vec![0.25, -1.5, 3.0, 1e-20]).unwrap(),
            vec![1, 0],
            vec![0, 1],
        )
        .unwrap();
        corpus.save(dir.path(), "c").unwrap();
        let loaded = Corpus::load(dir.path(), "c").unwrap();
        loaded.save(dir.path(), "c2").unwrap();
        let a = std::fs::read(dir.path().join("c.irmb")).unwrap();
        let b = std::fs::read(dir.path().join("c2.irmb")).unwrap();
        assert_eq!(a, b);
        assert_eq!(loaded.ids, corpus.ids);
        assert_eq!(loaded.features, corpus.features);
    }

    #[test]
    fn corpus_rejects_duplicate_ids() {
        let result = Corpus::new(
            vec!["a".into(), "a".into()],
            Matrix::zeros(2, 1),
            vec![0, 1],
            vec![0, 1],
        );
        assert!(matches!(result, Err(Error::Schema(_))));
    }
}
