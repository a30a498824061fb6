//! Per-token embedding providers.
//!
//! A provider maps a [`TokenSeq`] to one vector per token. Pad rows are never
//! stored: an [`EmbeddingMatrix`] holds the rows before the padding and
//! remembers how many pad rows follow, which the classifiers mask out anyway.
//!
//! Precomputed embedding files are a sequence of blocks, each a text header
//! line `id rows dim` followed by `rows * dim` little-endian `f32` values.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::tokenizer::TokenSeq;
use crate::{rng_from_seed, sub_seed, Error, Result};

pub const DEFAULT_DIM: usize = 768;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    /// Deterministic unit vector per token string.
    Hashed,
    /// Rows read from an embedding file keyed by report id.
    Precomputed,
    /// Every non-pad token gets the same vector. A known-useless baseline.
    Constant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingProviderSpec {
    pub kind: EmbeddingKind,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default = "default_pad")]
    pub pad_token: String,
}

fn default_dim() -> usize {
    DEFAULT_DIM
}
fn default_pad() -> String {
    crate::tokenizer::PAD_TOKEN.into()
}

impl EmbeddingProviderSpec {
    pub fn hashed(dim: usize, seed: u64) -> Self {
        EmbeddingProviderSpec {
            kind: EmbeddingKind::Hashed,
            dim,
            seed,
            path: None,
            pad_token: default_pad(),
        }
    }

    pub fn constant(dim: usize) -> Self {
        EmbeddingProviderSpec {
            kind: EmbeddingKind::Constant,
            ..Self::hashed(dim, 0)
        }
    }

    pub fn precomputed(dim: usize, path: impl Into<PathBuf>) -> Self {
        EmbeddingProviderSpec {
            kind: EmbeddingKind::Precomputed,
            path: Some(path.into()),
            ..Self::hashed(dim, 0)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("embedding dim must be positive".into()));
        }
        if self.kind == EmbeddingKind::Precomputed && self.path.is_none() {
            return Err(Error::Config("precomputed embeddings need a path".into()));
        }
        Ok(())
    }
}

/// Per-token vectors for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    /// Rows before the padding, row-major.
    data: Vec<f32>,
    pad_rows: usize,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, data: Vec<f32>, pad_rows: usize) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::Format(format!(
                "{} values do not form rows of width {dim}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("embedding contains a non-finite value".into()));
        }
        Ok(EmbeddingMatrix { dim, data, pad_rows })
    }

    /// Builds a matrix from f64 rows (tests and oracles).
    pub fn from_rows(rows: &[Vec<f64>], pad_rows: usize) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Format("ragged rows".into()));
        }
        let data = rows.iter().flatten().map(|&v| v as f32).collect();
        Self::new(dim.max(1), data, pad_rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total rows, padding included.
    pub fn len(&self) -> usize {
        self.valid_rows() + self.pad_rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn valid_rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn pad_rows(&self) -> usize {
        self.pad_rows
    }

    /// Row `i` (must be a non-pad row).
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }
}

/// 64-bit FNV-1a.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// The hashed embedding of `token`: a unit vector drawn from a Gaussian
/// seeded by the token bytes and `seed`.
pub fn hashed_vector(token: &str, seed: u64, dim: usize) -> Vec<f32> {
    let mut rng = rng_from_seed(sub_seed(seed, fnv1a(token.as_bytes())));
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| (x / norm) as f32).collect()
}

/// Embeddings loaded from a precomputed file.
#[derive(Debug, Clone, Default)]
pub struct PrecomputedStore {
    dim: usize,
    entries: HashMap<String, (usize, Vec<f32>)>,
}

impl PrecomputedStore {
    pub fn read(path: impl AsRef<Path>, expected_dim: usize) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let mut store = PrecomputedStore {
            dim: expected_dim,
            entries: HashMap::new(),
        };
        let mut header = String::new();
        loop {
            header.clear();
            let n = reader.read_line(&mut header).map_err(|e| Error::io(path, e))?;
            if n == 0 {
                break;
            }
            let fields: Vec<&str> = header.split_whitespace().collect();
            let [id, rows, dim] = fields[..] else {
                return Err(Error::Format(format!("bad embedding header {header:?}")));
            };
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::Format(format!("bad embedding header {header:?}")))
            };
            let (rows, dim) = (parse(rows)?, parse(dim)?);
            if dim != expected_dim {
                return Err(Error::Format(format!(
                    "embedding `{id}` has dim {dim}, expected {expected_dim}"
                )));
            }
            let mut bytes = vec![0u8; rows * dim * 4];
            reader.read_exact(&mut bytes).map_err(|_| {
                Error::Format(format!("embedding `{id}` is truncated"))
            })?;
            let values = bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            store.entries.insert(id.to_string(), (rows, values));
        }
        Ok(store)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn lookup(&self, id: &str, seq: &TokenSeq) -> Result<EmbeddingMatrix> {
        let (rows, values) = self
            .entries
            .get(id)
            .ok_or_else(|| Error::MissingEmbedding(id.to_string()))?;
        if *rows != seq.len() {
            return Err(Error::Format(format!(
                "embedding `{id}` has {rows} rows for a {}-token sequence",
                seq.len()
            )));
        }
        let valid = seq.valid_len() * self.dim;
        EmbeddingMatrix::new(self.dim, values[..valid].to_vec(), seq.pad_length)
    }
}

/// Writes matrices in the precomputed format; pad rows are written as zeros.
pub fn write_embeddings<'a, I>(path: impl AsRef<Path>, items: I) -> Result<()>
where
    I: IntoIterator<Item = (&'a str, &'a EmbeddingMatrix)>,
{
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (id, m) in items {
        if id.is_empty() || id.contains(char::is_whitespace) {
            return Err(Error::Format(format!("id {id:?} cannot be written to an embedding header")));
        }
        write_block(&mut w, id, m).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_block<W: Write>(w: &mut W, id: &str, m: &EmbeddingMatrix) -> std::io::Result<()> {
    writeln!(w, "{id} {} {}", m.len(), m.dim())?;
    for v in m.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    let zero = 0f32.to_le_bytes();
    for _ in 0..m.pad_rows() * m.dim() {
        w.write_all(&zero)?;
    }
    Ok(())
}

/// A ready-to-use provider built from an [`EmbeddingProviderSpec`].
#[derive(Debug, Clone)]
pub struct Embedder {
    spec: EmbeddingProviderSpec,
    store: Option<PrecomputedStore>,
}

impl Embedder {
    pub fn new(spec: EmbeddingProviderSpec) -> Result<Self> {
        spec.validate()?;
        let store = match (&spec.kind, &spec.path) {
            (EmbeddingKind::Precomputed, Some(path)) => Some(PrecomputedStore::read(path, spec.dim)?),
            _ => None,
        };
        Ok(Embedder { spec, store })
    }

    pub fn spec(&self) -> &EmbeddingProviderSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    /// Embeds the sequence of report `id`.
    pub fn embed(&self, id: &str, seq: &TokenSeq) -> Result<EmbeddingMatrix> {
        let dim = self.spec.dim;
        let valid = seq.valid_tokens();
        match self.spec.kind {
            EmbeddingKind::Precomputed => self
                .store
                .as_ref()
                .expect("precomputed store loaded at construction")
                .lookup(id, seq),
            EmbeddingKind::Hashed => {
                let mut data = Vec::with_capacity(valid.len() * dim);
                for token in valid {
                    if *token == self.spec.pad_token {
                        data.extend(std::iter::repeat_n(0.0, dim));
                    } else {
                        data.extend(hashed_vector(token, self.spec.seed, dim));
                    }
                }
                EmbeddingMatrix::new(dim, data, seq.pad_length)
            }
            EmbeddingKind::Constant => {
                let value = (1.0 / (dim as f64).sqrt()) as f32;
                let mut data = Vec::with_capacity(valid.len() * dim);
                for token in valid {
                    let v = if *token == self.spec.pad_token { 0.0 } else { value };
                    data.extend(std::iter::repeat_n(v, dim));
                }
                EmbeddingMatrix::new(dim, data, seq.pad_length)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::{tokenize, TokenizerConfig, TruncateSide};

    fn norm(v: &[f32]) -> f64 {
        v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
    }

    #[test]
    fn hashed_rows_are_deterministic_unit_vectors() {
        let a = hashed_vector("thrombus", 13, 768);
        assert_eq!(a, hashed_vector("thrombus", 13, 768));
        assert_ne!(a, hashed_vector("thrombus", 14, 768));
        assert!((norm(&a) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn pad_rows_are_not_stored_and_count_toward_length() {
        let config = TokenizerConfig::new(10, TruncateSide::Right);
        let seq = tokenize("filling defect", &config);
        let embedder = Embedder::new(EmbeddingProviderSpec::hashed(16, 1)).unwrap();
        let m = embedder.embed("r1", &seq).unwrap();
        assert_eq!(m.len(), 10);
        assert_eq!(m.valid_rows(), 3);
        assert_eq!(m.pad_rows(), 7);
        for row in m.rows() {
            assert!((norm(row) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn distinct_tokens_are_nearly_orthogonal() {
        let vectors: Vec<Vec<f32>> = (0..10_000)
            .map(|i| hashed_vector(&format!("tok{i}"), 13, 768))
            .collect();
        let small = vectors
            .windows(2)
            .filter(|w| {
                let dot: f64 = w[0].iter().zip(&w[1]).map(|(&a, &b)| a as f64 * b as f64).sum();
                dot.abs() < 0.5
            })
            .count();
        assert!(small as f64 / 9_999.0 >= 0.99);
    }

    #[test]
    fn constant_provider_collapses_tokens() {
        let seq = tokenize("a b", &TokenizerConfig::new(5, TruncateSide::Right));
        let m = Embedder::new(EmbeddingProviderSpec::constant(4)).unwrap().embed("x", &seq).unwrap();
        assert_eq!(m.row(1), m.row(2));
        assert!((norm(m.row(0)) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn precomputed_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.bin");
        let config = TokenizerConfig::new(6, TruncateSide::Right);
        let hashed = Embedder::new(EmbeddingProviderSpec::hashed(8, 4)).unwrap();
        let seqs = [("r1", tokenize("small filling defect", &config)), ("r2", tokenize("no pe", &config))];
        let mats: Vec<EmbeddingMatrix> = seqs.iter().map(|(id, s)| hashed.embed(id, s).unwrap()).collect();
        write_embeddings(&path, seqs.iter().map(|(id, _)| *id).zip(mats.iter())).unwrap();

        let pre = Embedder::new(EmbeddingProviderSpec::precomputed(8, &path)).unwrap();
        for ((id, seq), m) in seqs.iter().zip(&mats) {
            let back = pre.embed(id, seq).unwrap();
            assert_eq!(&back, m);
            let bits: Vec<u32> = back.as_slice().iter().map(|v| v.to_bits()).collect();
            let orig: Vec<u32> = m.as_slice().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits, orig);
        }
        assert!(matches!(pre.embed("missing", &seqs[0].1), Err(Error::MissingEmbedding(id)) if id == "missing"));
        assert!(matches!(
            Embedder::new(EmbeddingProviderSpec::precomputed(9, &path)),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn truncated_file_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, b"r1 2 4\n\x00\x00").unwrap();
        assert!(matches!(PrecomputedStore::read(&path, 4), Err(Error::Format(_))));
    }
}
