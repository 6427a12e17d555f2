//! On-disk embedding store.
//!
//! A store is a directory with three files:
//!
//! * `manifest.json`: `{"granularity": "single"|"token", "dim", "count", "dtype": "f32le", "normalized"}`,
//!   where `count` is the number of keys;
//! * `ids.tsv`: one key per line, `q:<query_id>` or `p:<judgment_id>:<para_num>`,
//!   followed by a tab and the token count for token-granularity stores;
//! * `vectors.bin`: row-major little-endian `f32`, rows in `ids.tsv` order,
//!   with each key's token rows contiguous.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::dense::Matrix;
use crate::error::{Error, Result};

pub const DTYPE: &str = "f32le";
const NORM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Single,
    Token,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub granularity: Granularity,
    pub dim: usize,
    pub count: usize,
    pub dtype: String,
    pub normalized: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EmbeddingKey {
    Query(String),
    Paragraph { judgment_id: String, para_num: u32 },
}

impl EmbeddingKey {
    pub fn paragraph(judgment_id: impl Into<String>, para_num: u32) -> Self {
        EmbeddingKey::Paragraph {
            judgment_id: judgment_id.into(),
            para_num,
        }
    }
}

impl fmt::Display for EmbeddingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmbeddingKey::Query(q) => write!(f, "q:{q}"),
            EmbeddingKey::Paragraph {
                judgment_id,
                para_num,
            } => write!(f, "p:{judgment_id}:{para_num}"),
        }
    }
}

impl FromStr for EmbeddingKey {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if let Some(q) = s.strip_prefix("q:") {
            if !q.is_empty() {
                return Ok(EmbeddingKey::Query(q.to_string()));
            }
        } else if let Some(p) = s.strip_prefix("p:") {
            if let Some((jid, num)) = p.rsplit_once(':') {
                if let (false, Ok(para_num)) = (jid.is_empty(), num.parse::<u32>()) {
                    return Ok(EmbeddingKey::paragraph(jid, para_num));
                }
            }
        }
        Err(format!("malformed embedding key {s:?}"))
    }
}

#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    manifest: Manifest,
    keys: Vec<EmbeddingKey>,
    rows: HashMap<EmbeddingKey, (usize, usize)>,
    data: Vec<f32>,
}

impl EmbeddingStore {
    /// Builds a store from `(key, rows × dim floats)` entries.
    pub fn from_entries(
        granularity: Granularity,
        dim: usize,
        normalized: bool,
        entries: Vec<(EmbeddingKey, Vec<f32>)>,
    ) -> Result<Self> {
        let mut store = EmbeddingStore {
            manifest: Manifest {
                granularity,
                dim,
                count: entries.len(),
                dtype: DTYPE.to_string(),
                normalized,
            },
            keys: Vec::with_capacity(entries.len()),
            rows: HashMap::with_capacity(entries.len()),
            data: Vec::new(),
        };
        if dim == 0 {
            return Err(Error::Embedding("dim must be positive".into()));
        }
        for (key, values) in entries {
            if values.is_empty() || values.len() % dim != 0 {
                return Err(Error::Embedding(format!(
                    "{key}: {} floats is not a positive multiple of dim {dim}",
                    values.len()
                )));
            }
            let n = values.len() / dim;
            if granularity == Granularity::Single && n != 1 {
                return Err(Error::Embedding(format!("{key}: single store holds {n} rows")));
            }
            store.push(key, n, &values)?;
        }
        store.check_norms()?;
        Ok(store)
    }

    fn push(&mut self, key: EmbeddingKey, n_rows: usize, values: &[f32]) -> Result<()> {
        let start = self.data.len() / self.manifest.dim;
        if self.rows.insert(key.clone(), (start, n_rows)).is_some() {
            return Err(Error::Embedding(format!("duplicate key {key}")));
        }
        self.keys.push(key);
        self.data.extend_from_slice(values);
        Ok(())
    }

    fn check_norms(&self) -> Result<()> {
        if !self.manifest.normalized {
            return Ok(());
        }
        for (i, row) in self.data.chunks_exact(self.manifest.dim).enumerate() {
            let norm = row.iter().map(|&x| f64::from(x).powi(2)).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::Embedding(format!(
                    "row {i} has norm {norm} but the store is marked normalized"
                )));
            }
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: Manifest = crate::io::read_json(&dir.join("manifest.json"))?;
        if manifest.dtype != DTYPE {
            return Err(Error::Embedding(format!("unsupported dtype {}", manifest.dtype)));
        }
        if manifest.dim == 0 {
            return Err(Error::Embedding("dim must be positive".into()));
        }
        let ids_path = dir.join("ids.tsv");
        let ids = std::fs::read_to_string(&ids_path).map_err(|e| Error::io(&ids_path, e))?;
        let mut layout: Vec<(EmbeddingKey, usize)> = Vec::new();
        for (i, line) in ids.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let bad = |m: String| Error::format(&ids_path, i + 1, m);
            let mut fields = line.split('\t');
            let key: EmbeddingKey = fields.next().unwrap_or("").parse().map_err(bad)?;
            let n_rows = match (manifest.granularity, fields.next()) {
                (Granularity::Single, None) => 1,
                (Granularity::Single, Some(_)) => {
                    return Err(bad("token count given for a single-vector store".into()))
                }
                (Granularity::Token, Some(c)) => c
                    .trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&n| n >= 1)
                    .ok_or_else(|| bad(format!("invalid token count {c:?}")))?,
                (Granularity::Token, None) => return Err(bad("missing token count".into())),
            };
            layout.push((key, n_rows));
        }
        if layout.len() != manifest.count {
            return Err(Error::Embedding(format!(
                "manifest count {} but ids.tsv has {} keys",
                manifest.count,
                layout.len()
            )));
        }

        let vec_path = dir.join("vectors.bin");
        let bytes = std::fs::read(&vec_path).map_err(|e| Error::io(&vec_path, e))?;
        let total_rows: usize = layout.iter().map(|(_, n)| n).sum();
        let expected = total_rows * manifest.dim * 4;
        if bytes.len() != expected {
            return Err(Error::Embedding(format!(
                "vectors.bin has {} bytes, expected {expected}",
                bytes.len()
            )));
        }
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();

        let mut store = EmbeddingStore {
            manifest: manifest.clone(),
            keys: Vec::with_capacity(layout.len()),
            rows: HashMap::with_capacity(layout.len()),
            data: Vec::with_capacity(data.len()),
        };
        let mut offset = 0;
        for (key, n_rows) in layout {
            let len = n_rows * manifest.dim;
            store.push(key, n_rows, &data[offset..offset + len])?;
            offset += len;
        }
        store.check_norms()?;
        Ok(store)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        crate::io::write_json(&dir.join("manifest.json"), &self.manifest)?;
        let mut ids = String::new();
        for key in &self.keys {
            ids.push_str(&key.to_string());
            if self.manifest.granularity == Granularity::Token {
                ids.push('\t');
                ids.push_str(&self.rows[key].1.to_string());
            }
            ids.push('\n');
        }
        let ids_path = dir.join("ids.tsv");
        std::fs::write(&ids_path, ids).map_err(|e| Error::io(&ids_path, e))?;
        let bytes: Vec<u8> = self.data.iter().flat_map(|x| x.to_le_bytes()).collect();
        let vec_path = dir.join("vectors.bin");
        std::fs::write(&vec_path, bytes).map_err(|e| Error::io(&vec_path, e))
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn dim(&self) -> usize {
        self.manifest.dim
    }

    pub fn granularity(&self) -> Granularity {
        self.manifest.granularity
    }

    pub fn keys(&self) -> &[EmbeddingKey] {
        &self.keys
    }

    /// All rows stored for `key`.
    pub fn matrix(&self, key: &EmbeddingKey) -> Option<Matrix<'_>> {
        let &(start, n) = self.rows.get(key)?;
        let dim = self.manifest.dim;
        Some(Matrix::new(&self.data[start * dim..(start + n) * dim], dim).expect("aligned rows"))
    }

    /// The vector of a single-granularity key.
    pub fn vector(&self, key: &EmbeddingKey) -> Option<&[f32]> {
        let m = self.matrix(key)?;
        (m.rows() == 1).then(|| m.row(0))
    }
}
