//! Text-embedding files, as JSON Lines or packed binary.
//!
//! JSON Lines: one `{"id", "lang", "vector"}` object per node, every vector
//! the same length. Binary: the magic `MU2XEMB1`, a little-endian `u32`
//! dimension, then per record a little-endian `u16` id length, the UTF-8 id
//! and `dim` little-endian `f32` values. The binary form carries no
//! language. [`read_embeddings`] recognizes either by the magic.

use std::collections::HashSet;
use std::io::{BufRead, Read, Write};
use std::path::Path;

use mu2x_core::features::{EmbeddingTable, FeatureError};
use mu2x_core::Lang;
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::io::{create, open};

pub const MAGIC: &[u8; 8] = b"MU2XEMB1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingFormat {
    Jsonl,
    Binary,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lang: Option<Lang>,
    vector: Vec<f32>,
}

fn insert(table: &mut EmbeddingTable, path: &Path, line: usize, seen: &mut HashSet<String>, rec: Record) -> Result<(), DataError> {
    if !seen.insert(rec.id.clone()) {
        return Err(DataError::DuplicateId {
            path: path.into(),
            line,
            id: rec.id,
        });
    }
    table.insert(rec.id, rec.lang, rec.vector).map_err(|e| match e {
        FeatureError::DimensionMismatch { .. } | FeatureError::NonFiniteEmbedding(_) => DataError::malformed(path, line, e),
        source => DataError::Feature { path: path.into(), source },
    })
}

/// Reads JSON Lines embeddings; the first record fixes the dimension.
pub fn read_jsonl<R: BufRead>(reader: R, path: &Path) -> Result<EmbeddingTable, DataError> {
    let mut table: Option<EmbeddingTable> = None;
    let mut seen = HashSet::new();
    for (i, l) in reader.lines().enumerate() {
        let l = l.map_err(|e| DataError::io(path, e))?;
        if l.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&l).map_err(|e| DataError::malformed(path, i + 1, e))?;
        let t = table.get_or_insert_with(|| EmbeddingTable::new(rec.vector.len()));
        insert(t, path, i + 1, &mut seen, rec)?;
    }
    Ok(table.unwrap_or_default())
}

/// Reads the packed binary form. Line numbers in errors count records from 1.
pub fn read_binary<R: Read>(mut reader: R, path: &Path) -> Result<EmbeddingTable, DataError> {
    let io = |e| DataError::io(path, e);
    let mut magic = [0u8; 8];
    reader.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(DataError::malformed(path, 0, "missing MU2XEMB1 magic"));
    }
    let mut b4 = [0u8; 4];
    reader.read_exact(&mut b4).map_err(io)?;
    let dim = u32::from_le_bytes(b4) as usize;
    let mut table = EmbeddingTable::new(dim);
    let mut seen = HashSet::new();
    let mut values = vec![0u8; 4 * dim];
    for record in 1.. {
        let mut b2 = [0u8; 2];
        match reader.read(&mut b2[..1]).map_err(io)? {
            0 => break,
            _ => reader.read_exact(&mut b2[1..]).map_err(|_| DataError::malformed(path, record, "truncated id length"))?,
        }
        let mut id = vec![0u8; u16::from_le_bytes(b2) as usize];
        reader.read_exact(&mut id).map_err(|_| DataError::malformed(path, record, "truncated id"))?;
        let id = String::from_utf8(id).map_err(|_| DataError::malformed(path, record, "id is not UTF-8"))?;
        reader.read_exact(&mut values).map_err(|_| DataError::malformed(path, record, "truncated vector"))?;
        let vector = values.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        insert(&mut table, path, record, &mut seen, Record { id, lang: None, vector })?;
    }
    Ok(table)
}

/// Reads either format, telling them apart by the magic.
pub fn read_embeddings(path: &Path) -> Result<EmbeddingTable, DataError> {
    let mut r = open(path)?;
    let head = r.fill_buf().map_err(|e| DataError::io(path, e))?;
    if head.starts_with(MAGIC) {
        read_binary(r, path)
    } else {
        read_jsonl(r, path)
    }
}

pub fn write_jsonl<W: Write>(mut w: W, table: &EmbeddingTable) -> std::io::Result<()> {
    for (id, e) in &table.entries {
        let rec = Record {
            id: id.clone(),
            lang: e.lang,
            vector: e.vector.clone(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn write_binary<W: Write>(mut w: W, table: &EmbeddingTable) -> std::io::Result<()> {
    let invalid = |m: &str| std::io::Error::new(std::io::ErrorKind::InvalidInput, m.to_string());
    let dim = u32::try_from(table.dim).map_err(|_| invalid("dimension exceeds u32"))?;
    w.write_all(MAGIC)?;
    w.write_all(&dim.to_le_bytes())?;
    for (id, e) in &table.entries {
        let len = u16::try_from(id.len()).map_err(|_| invalid("id longer than 65535 bytes"))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(id.as_bytes())?;
        for v in &e.vector {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

pub fn save_embeddings(table: &EmbeddingTable, path: &Path, format: EmbeddingFormat) -> Result<(), DataError> {
    let w = create(path)?;
    match format {
        EmbeddingFormat::Jsonl => write_jsonl(w, table),
        EmbeddingFormat::Binary => write_binary(w, table),
    }
    .map_err(|e| DataError::io(path, e))
}
