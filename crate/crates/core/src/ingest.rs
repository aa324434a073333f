//! Embedding containers, evaluation manifests and step-level dataset
//! construction.
//!
//! # Container layout
//!
//! All integers little-endian:
//!
//! | offset     | size          | content                                   |
//! |------------|---------------|-------------------------------------------|
//! | 0          | 4             | magic `MFE1`                              |
//! | 4          | 2             | version, `u16` = 1                        |
//! | 6          | 4             | metadata length `L`, `u32`                |
//! | 10         | L             | metadata, compact UTF-8 JSON              |
//! | 10 + L     | rows·dims·4   | row-major `f32` payload                   |

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scoring::{EmbeddingMatrix, EncoderMeta};
use crate::text::split_sentences;

pub const MAGIC: &[u8; 4] = b"MFE1";
pub const CONTAINER_VERSION: u16 = 1;
pub const PAYLOAD_DTYPE: &str = "float32-le";
pub const SCHEMA_VERSION: u32 = 1;
const HEADER_LEN: usize = 10;

fn default_dtype() -> String {
    PAYLOAD_DTYPE.to_string()
}

/// JSON metadata block of a container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContainerMeta {
    pub rows: usize,
    pub dims: usize,
    #[serde(default = "default_dtype")]
    pub dtype: String,
    pub ids: Vec<String>,
    pub l2_normalized: bool,
    pub encoder: EncoderMeta,
    /// Per-row flag set by text encoders that cut input at their length limit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncated: Option<Vec<bool>>,
}

impl ContainerMeta {
    fn validate(&self) -> Result<()> {
        if self.dtype != PAYLOAD_DTYPE {
            return Err(Error::Format(format!("unsupported payload dtype {:?}", self.dtype)));
        }
        if self.ids.len() != self.rows {
            return Err(Error::Integrity(format!(
                "{} ids for {} rows",
                self.ids.len(),
                self.rows
            )));
        }
        if let Some(t) = &self.truncated {
            if t.len() != self.rows {
                return Err(Error::Integrity(format!(
                    "{} truncation flags for {} rows",
                    t.len(),
                    self.rows
                )));
            }
        }
        Ok(())
    }

    fn payload_len(&self) -> Result<u64> {
        (self.rows as u64)
            .checked_mul(self.dims as u64)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Integrity("payload size overflows".into()))
    }
}

/// An id-indexed embedding matrix with encoder provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub matrix: EmbeddingMatrix,
    pub ids: Vec<String>,
    pub encoder: EncoderMeta,
    pub truncated: Option<Vec<bool>>,
}

impl Container {
    pub fn new(matrix: EmbeddingMatrix, ids: Vec<String>, encoder: EncoderMeta) -> Result<Self> {
        let c = Self {
            matrix,
            ids,
            encoder,
            truncated: None,
        };
        c.meta().validate()?;
        Ok(c)
    }

    pub fn meta(&self) -> ContainerMeta {
        ContainerMeta {
            rows: self.matrix.rows(),
            dims: self.matrix.dims(),
            dtype: default_dtype(),
            ids: self.ids.clone(),
            l2_normalized: self.matrix.is_l2_normalized(),
            encoder: self.encoder.clone(),
            truncated: self.truncated.clone(),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = self.meta();
        meta.validate()?;
        let json = serde_json::to_vec(&meta)?;
        let json_len = u32::try_from(json.len())
            .map_err(|_| Error::Integrity("metadata larger than 4 GiB".into()))?;
        let mut out = Vec::with_capacity(HEADER_LEN + json.len() + self.matrix.data().len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
        out.extend_from_slice(&json_len.to_le_bytes());
        out.extend_from_slice(&json);
        for v in self.matrix.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (meta, offset) = parse_header(bytes)?;
        let payload = &bytes[offset..];
        check_payload_len(&meta, payload.len() as u64)?;
        let data = decode_f32(payload);
        from_parts(meta, data)
    }
}

fn unexpected_eof() -> Error {
    Error::Format("unexpected end of data".into())
}

/// Parses magic, version and metadata from the start of `bytes`, returning
/// the metadata and the payload offset.
fn parse_header(bytes: &[u8]) -> Result<(ContainerMeta, usize)> {
    if bytes.len() < 4 {
        return Err(unexpected_eof());
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(unexpected_eof());
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != CONTAINER_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let json_len = u32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]) as usize;
    let end = HEADER_LEN + json_len;
    if bytes.len() < end {
        return Err(unexpected_eof());
    }
    let meta: ContainerMeta = serde_json::from_slice(&bytes[HEADER_LEN..end])
        .map_err(|e| Error::Format(format!("bad metadata: {e}")))?;
    meta.validate()?;
    Ok((meta, end))
}

fn check_payload_len(meta: &ContainerMeta, actual: u64) -> Result<()> {
    let expected = meta.payload_len()?;
    if actual < expected {
        return Err(unexpected_eof());
    }
    if actual > expected {
        return Err(Error::Integrity(format!(
            "payload has {actual} bytes, expected {expected}"
        )));
    }
    Ok(())
}

fn decode_f32(payload: &[u8]) -> Vec<f32> {
    payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

fn from_parts(meta: ContainerMeta, data: Vec<f32>) -> Result<Container> {
    let matrix = EmbeddingMatrix::new(meta.rows, meta.dims, data, meta.l2_normalized)?;
    Ok(Container {
        matrix,
        ids: meta.ids,
        encoder: meta.encoder,
        truncated: meta.truncated,
    })
}

/// Writes a container atomically (temporary file in the target directory,
/// then rename).
pub fn write_container(container: &Container, path: impl AsRef<Path>) -> Result<()> {
    let bytes = container.to_bytes()?;
    write_atomic(path.as_ref(), &bytes)
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Reads and validates a whole container.
pub fn read_container(path: impl AsRef<Path>) -> Result<Container> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Container::from_bytes(&bytes)
}

/// Container handle that reads row ranges on demand.
#[derive(Debug)]
pub struct ContainerReader {
    file: File,
    meta: ContainerMeta,
    data_offset: u64,
}

impl ContainerReader {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
        let file_len = file.metadata().map_err(|e| Error::io(path, e))?.len();
        let mut head = [0u8; HEADER_LEN];
        let got = read_up_to(&mut file, &mut head).map_err(|e| Error::io(path, e))?;
        // parse_header reports bad magic before length problems
        if got < HEADER_LEN {
            parse_header(&head[..got])?;
            return Err(unexpected_eof());
        }
        let json_len = u32::from_le_bytes([head[6], head[7], head[8], head[9]]) as usize;
        let mut buf = head.to_vec();
        buf.resize(HEADER_LEN + json_len.min(file_len as usize), 0);
        let got = read_up_to(&mut file, &mut buf[HEADER_LEN..]).map_err(|e| Error::io(path, e))?;
        buf.truncate(HEADER_LEN + got);
        let (meta, offset) = parse_header(&buf)?;
        check_payload_len(&meta, file_len - offset as u64)?;
        Ok(Self {
            file,
            meta,
            data_offset: offset as u64,
        })
    }

    pub fn meta(&self) -> &ContainerMeta {
        &self.meta
    }

    /// Reads rows `range` (end exclusive); normalized containers have the
    /// rows' norms checked.
    pub fn read_rows(&mut self, range: Range<usize>) -> Result<EmbeddingMatrix> {
        if range.start > range.end || range.end > self.meta.rows {
            return Err(Error::Range(format!(
                "rows {}..{} outside container with {} rows",
                range.start, range.end, self.meta.rows
            )));
        }
        let row_bytes = self.meta.dims as u64 * 4;
        let mut buf = vec![0u8; range.len() * row_bytes as usize];
        self.file
            .seek(SeekFrom::Start(self.data_offset + range.start as u64 * row_bytes))
            .and_then(|_| self.file.read_exact(&mut buf))
            .map_err(|e| Error::Format(format!("reading rows: {e}")))?;
        let m = EmbeddingMatrix::new(range.len(), self.meta.dims, decode_f32(&buf), false)?;
        if self.meta.l2_normalized {
            m.check_unit_rows(range.start)?;
        }
        EmbeddingMatrix::new(m.rows(), m.dims(), m.data().to_vec(), self.meta.l2_normalized)
    }

    pub fn read_all(&mut self) -> Result<Container> {
        let m = self.read_rows(0..self.meta.rows)?;
        Ok(Container {
            matrix: m,
            ids: self.meta.ids.clone(),
            encoder: self.meta.encoder.clone(),
            truncated: self.meta.truncated.clone(),
        })
    }
}

fn read_up_to(r: &mut impl Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..])? {
            0 => break,
            n => filled += n,
        }
    }
    Ok(filled)
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

fn check_schema_version(v: u32, line: usize) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(Error::parse(line, format!("unsupported schema_version {v}")));
    }
    Ok(())
}

/// A block of rows inside a container file, `start..end`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowRef {
    pub container: String,
    pub start: usize,
    pub end: usize,
}

/// One line of an evaluation manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub example_id: String,
    #[serde(default)]
    pub system_id: String,
    pub doc_tokens: RowRef,
    pub summary_tokens: RowRef,
    pub summary_sentences: RowRef,
    pub images: RowRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
}

/// Everything needed to score one example.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleBundle {
    pub example_id: String,
    pub system_id: String,
    pub split: Option<String>,
    pub doc_tokens: EmbeddingMatrix,
    pub summary_tokens: EmbeddingMatrix,
    pub summary_sentences: EmbeddingMatrix,
    pub images: EmbeddingMatrix,
    pub image_encoder: EncoderMeta,
    pub token_encoder: EncoderMeta,
}

/// Streams [`ExampleBundle`]s from a JSON-lines manifest, in file order.
/// Container files are opened once and then read by row range.
pub struct ManifestResolver<R> {
    lines: std::io::Lines<R>,
    line: usize,
    dir: PathBuf,
    readers: HashMap<String, ContainerReader>,
}

impl<R: BufRead> ManifestResolver<R> {
    pub fn new(reader: R, containers_dir: impl Into<PathBuf>) -> Self {
        Self {
            lines: reader.lines(),
            line: 0,
            dir: containers_dir.into(),
            readers: HashMap::new(),
        }
    }

    fn fetch(&mut self, r: &RowRef) -> Result<(EmbeddingMatrix, EncoderMeta)> {
        if !self.readers.contains_key(&r.container) {
            let path = self.dir.join(&r.container);
            let reader = ContainerReader::open(&path).map_err(|e| match e {
                Error::Io { path, source } => Error::Data(format!("container {path}: {source}")),
                other => other,
            })?;
            self.readers.insert(r.container.clone(), reader);
        }
        let reader = self.readers.get_mut(&r.container).expect("inserted above");
        let m = reader
            .read_rows(r.start..r.end)
            .map_err(|e| Error::Data(format!("container {}: {e}", r.container)))?;
        Ok((m, reader.meta().encoder.clone()))
    }

    fn resolve(&mut self, rec: ManifestRecord) -> Result<ExampleBundle> {
        let (doc_tokens, token_encoder) = self.fetch(&rec.doc_tokens)?;
        let (summary_tokens, _) = self.fetch(&rec.summary_tokens)?;
        let (summary_sentences, _) = self.fetch(&rec.summary_sentences)?;
        let (images, image_encoder) = self.fetch(&rec.images)?;
        Ok(ExampleBundle {
            example_id: rec.example_id,
            system_id: rec.system_id,
            split: rec.split,
            doc_tokens,
            summary_tokens,
            summary_sentences,
            images,
            image_encoder,
            token_encoder,
        })
    }
}

impl<R: BufRead> Iterator for ManifestResolver<R> {
    type Item = Result<ExampleBundle>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let raw = self.lines.next()?;
            self.line += 1;
            let line = self.line;
            let text = match raw {
                Ok(t) => t,
                Err(e) => return Some(Err(Error::parse(line, e.to_string()))),
            };
            if text.trim().is_empty() {
                continue;
            }
            let result = serde_json::from_str::<ManifestRecord>(&text)
                .map_err(|e| Error::parse(line, e.to_string()))
                .and_then(|rec| {
                    check_schema_version(rec.schema_version, line)?;
                    self.resolve(rec).map_err(|e| match e {
                        Error::Data(m) => Error::Data(format!("manifest line {line}: {m}")),
                        other => Error::Data(format!("manifest line {line}: {other}")),
                    })
                });
            return Some(result);
        }
    }
}

/// Opens a manifest file and resolves it against `containers_dir`.
pub fn resolve_manifest(
    manifest: impl AsRef<Path>,
    containers_dir: impl Into<PathBuf>,
) -> Result<ManifestResolver<BufReader<File>>> {
    let path = manifest.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(ManifestResolver::new(BufReader::new(f), containers_dir))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// One article as supplied for dataset construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleRecord {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub article_id: String,
    pub steps: Vec<ArticleStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleStep {
    pub paragraph: String,
    pub image_ref: String,
}

/// A step-level example: first sentence as summary, the rest as document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepExample {
    pub article_id: String,
    pub step_index: usize,
    pub summary_text: String,
    pub document_text: String,
    pub image_ref: String,
    pub split: Split,
}

/// How many articles go to a held-out split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitSize {
    /// Exactly this many articles, taken in seeded-shuffle order.
    Count(usize),
    /// Each article lands here independently with this probability; the
    /// assignment depends only on the article id and the seed.
    Fraction(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub seed: u64,
    pub validation: SplitSize,
    pub test: SplitSize,
}

/// Seeded sort key of an article: first 8 bytes of SHA-256(seed || id).
pub fn article_key(article_id: &str, seed: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(article_id.as_bytes());
    let d = h.finalize();
    u64::from_be_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Assigns every article id to a split.
pub fn assign_splits(article_ids: &[&str], config: &SplitConfig) -> Result<HashMap<String, Split>> {
    let mut out = HashMap::with_capacity(article_ids.len());
    match (config.validation, config.test) {
        (SplitSize::Count(nv), SplitSize::Count(nt)) => {
            if nv + nt > article_ids.len() {
                return Err(Error::Config(format!(
                    "{nv} validation + {nt} test articles requested but only {} available",
                    article_ids.len()
                )));
            }
            let mut keyed: Vec<(u64, &str)> =
                article_ids.iter().map(|id| (article_key(id, config.seed), *id)).collect();
            keyed.sort();
            for (rank, (_, id)) in keyed.into_iter().enumerate() {
                let split = if rank < nv {
                    Split::Validation
                } else if rank < nv + nt {
                    Split::Test
                } else {
                    Split::Train
                };
                out.insert(id.to_string(), split);
            }
        }
        (SplitSize::Fraction(fv), SplitSize::Fraction(ft)) => {
            if !(fv >= 0.0 && ft >= 0.0 && fv + ft <= 1.0) {
                return Err(Error::Config(format!(
                    "split fractions {fv} + {ft} must be non-negative and sum to at most 1"
                )));
            }
            for id in article_ids {
                let u = article_key(id, config.seed) as f64 / 2f64.powi(64);
                let split = if u < fv {
                    Split::Validation
                } else if u < fv + ft {
                    Split::Test
                } else {
                    Split::Train
                };
                out.insert(id.to_string(), split);
            }
        }
        _ => {
            return Err(Error::Config(
                "validation and test sizes must both be counts or both be fractions".into(),
            ))
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedStep {
    pub article_id: String,
    pub step_index: usize,
    pub sentences: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepDataset {
    pub examples: Vec<StepExample>,
    pub skipped: Vec<SkippedStep>,
}

/// Breaks articles into step examples. Steps with fewer than two sentences
/// have no document and are skipped with a warning.
pub fn build_step_dataset(articles: &[ArticleRecord], config: &SplitConfig) -> Result<StepDataset> {
    let mut seen = HashSet::new();
    for a in articles {
        if !seen.insert(a.article_id.as_str()) {
            return Err(Error::Integrity(format!("duplicate article_id {}", a.article_id)));
        }
    }
    let ids: Vec<&str> = articles.iter().map(|a| a.article_id.as_str()).collect();
    let splits = assign_splits(&ids, config)?;
    let mut out = StepDataset::default();
    for a in articles {
        let split = splits[&a.article_id];
        for (step_index, step) in a.steps.iter().enumerate() {
            if step.image_ref.trim().is_empty() {
                return Err(Error::Data(format!(
                    "article {} step {step_index} has no image_ref",
                    a.article_id
                )));
            }
            let sentences = split_sentences(&step.paragraph);
            if sentences.len() < 2 {
                tracing::warn!(
                    article_id = %a.article_id,
                    step_index,
                    sentences = sentences.len(),
                    "skipping step without a document"
                );
                out.skipped.push(SkippedStep {
                    article_id: a.article_id.clone(),
                    step_index,
                    sentences: sentences.len(),
                });
                continue;
            }
            out.examples.push(StepExample {
                article_id: a.article_id.clone(),
                step_index,
                summary_text: sentences[0].clone(),
                document_text: sentences[1..].join(" "),
                image_ref: step.image_ref.clone(),
                split,
            });
        }
    }
    Ok(out)
}

/// Reads JSON-lines records, skipping blank lines, with line-numbered errors.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::parse(i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?);
    }
    Ok(out)
}

pub fn read_articles(path: impl AsRef<Path>) -> Result<Vec<ArticleRecord>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::parse(i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ArticleRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        check_schema_version(rec.schema_version, i + 1)?;
        out.push(rec);
    }
    Ok(out)
}

/// Serializes records as JSON lines and writes them atomically.
pub fn write_jsonl<T: Serialize>(records: &[T], path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    write_atomic(path.as_ref(), &buf)
}
