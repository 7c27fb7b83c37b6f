use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{QppError, Result};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"QPPE";
pub const EMBEDDING_VERSION: u32 = 1;

/// The vector representing one (query, document) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEmbedding {
    pub qid: String,
    pub docid: String,
    pub rank: u32,
    pub vec: Vec<f32>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    dim: u32,
    #[serde(rename = "encoder-name")]
    encoder_name: String,
}

/// A set of pair embeddings sharing one dimension.
#[derive(Debug, Clone)]
pub struct PairEmbeddingStore {
    dim: usize,
    encoder_name: String,
    records: Vec<PairEmbedding>,
    index: HashMap<(String, String), usize>,
}

impl PartialEq for PairEmbeddingStore {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                a.qid == b.qid
                    && a.docid == b.docid
                    && a.rank == b.rank
                    && a.vec.len() == b.vec.len()
                    && a.vec.iter().zip(&b.vec).all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}

impl PairEmbeddingStore {
    pub fn new(dim: usize, encoder_name: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(QppError::Input("embedding dimension must be >= 1".into()));
        }
        Ok(Self {
            dim,
            encoder_name: encoder_name.into(),
            records: Vec::new(),
            index: HashMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn encoder_name(&self) -> &str {
        &self.encoder_name
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[PairEmbedding] {
        &self.records
    }

    pub fn push(&mut self, rec: PairEmbedding) -> Result<()> {
        if rec.vec.len() != self.dim {
            return Err(QppError::Format(format!(
                "record ({}, {}) has dimension {}, store has {}",
                rec.qid,
                rec.docid,
                rec.vec.len(),
                self.dim
            )));
        }
        if rec.qid.len() > u16::MAX as usize || rec.docid.len() > u16::MAX as usize {
            return Err(QppError::Format("identifier longer than 65535 bytes".into()));
        }
        let key = (rec.qid.clone(), rec.docid.clone());
        if self.index.contains_key(&key) {
            return Err(QppError::Format(format!(
                "duplicate embedding for ({}, {})",
                rec.qid, rec.docid
            )));
        }
        self.index.insert(key, self.records.len());
        self.records.push(rec);
        Ok(())
    }

    pub fn get(&self, qid: &str, docid: &str) -> Option<&PairEmbedding> {
        self.index
            .get(&(qid.to_string(), docid.to_string()))
            .map(|&i| &self.records[i])
    }

    /// Binary interchange: header then length-prefixed records, all little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(EMBEDDING_MAGIC)?;
        w.write_all(&EMBEDDING_VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        for r in &self.records {
            for s in [&r.qid, &r.docid] {
                w.write_all(&(s.len() as u16).to_le_bytes())?;
                w.write_all(s.as_bytes())?;
            }
            w.write_all(&r.rank.to_le_bytes())?;
            for x in &r.vec {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.flush()
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)
            .map_err(|e| QppError::Format(format!("read failed: {e}")))?;
        let mut cur = Cursor { buf: &buf, pos: 0 };
        if cur.take(4)? != EMBEDDING_MAGIC {
            return Err(QppError::Format("bad magic, expected QPPE".into()));
        }
        let version = cur.u32()?;
        if version != EMBEDDING_VERSION {
            return Err(QppError::Format(format!("unsupported version {version}")));
        }
        let dim = cur.u32()? as usize;
        let mut store = Self::new(dim, "")?;
        while !cur.at_end() {
            let qid = cur.string()?;
            let docid = cur.string()?;
            let rank = cur.u32()?;
            let mut vec = Vec::with_capacity(dim);
            for _ in 0..dim {
                vec.push(f32::from_le_bytes(cur.take(4)?.try_into().unwrap()));
            }
            store.push(PairEmbedding { qid, docid, rank, vec })?;
        }
        Ok(store)
    }

    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| QppError::io(path, e))?;
        self.write_binary(BufWriter::new(f))
            .map_err(|e| QppError::io(path, e))
    }

    pub fn load_binary(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| QppError::io(path, e))?;
        let mut store = Self::read_binary(BufReader::new(f))?;
        // The binary header carries no encoder name; pick it up from a sidecar if present.
        if let Ok(raw) = std::fs::read_to_string(sidecar_path(path)) {
            if let Ok(meta) = serde_json::from_str::<Sidecar>(&raw) {
                store.encoder_name = meta.encoder_name;
            }
        }
        Ok(store)
    }

    /// Textual interchange: one JSON object per line plus a `<path>.meta.json` sidecar.
    pub fn save_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| QppError::io(path, e))?;
        let mut w = BufWriter::new(f);
        for r in &self.records {
            let line = serde_json::to_string(r).expect("embedding records serialize");
            writeln!(w, "{line}").map_err(|e| QppError::io(path, e))?;
        }
        w.flush().map_err(|e| QppError::io(path, e))?;
        self.write_sidecar(path)
    }

    pub fn write_sidecar(&self, path: &Path) -> Result<()> {
        let meta = Sidecar {
            dim: self.dim as u32,
            encoder_name: self.encoder_name.clone(),
        };
        let side = sidecar_path(path);
        std::fs::write(&side, serde_json::to_string_pretty(&meta).unwrap() + "\n")
            .map_err(|e| QppError::io(&side, e))
    }

    pub fn load_text(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let side = sidecar_path(path);
        let meta: Sidecar = serde_json::from_str(&super::read_to_string(&side)?)
            .map_err(|e| QppError::Format(format!("bad sidecar {}: {e}", side.display())))?;
        let mut store = Self::new(meta.dim as usize, meta.encoder_name)?;
        let f = std::fs::File::open(path).map_err(|e| QppError::io(path, e))?;
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| QppError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: PairEmbedding = serde_json::from_str(&line)
                .map_err(|e| QppError::Format(format!("line {}: {e}", i + 1)))?;
            store.push(rec)?;
        }
        Ok(store)
    }

    /// Load either format: `.jsonl` means textual, anything else binary.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if path.extension().is_some_and(|e| e == "jsonl") {
            Self::load_text(path)
        } else {
            Self::load_binary(path)
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if path.extension().is_some_and(|e| e == "jsonl") {
            self.save_text(path)
        } else {
            self.save_binary(path)?;
            self.write_sidecar(path)
        }
    }
}

pub(crate) fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn at_end(&self) -> bool {
        self.pos >= self.buf.len()
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(QppError::Format(format!(
                "truncated file: need {n} bytes at offset {}",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = u16::from_le_bytes(self.take(2)?.try_into().unwrap()) as usize;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| QppError::Format("identifier is not UTF-8".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(q: &str, d: &str, vec: Vec<f32>) -> PairEmbedding {
        PairEmbedding {
            qid: q.into(),
            docid: d.into(),
            rank: 1,
            vec,
        }
    }

    fn bytes(store: &PairEmbeddingStore) -> Vec<u8> {
        let mut out = Vec::new();
        store.write_binary(&mut out).unwrap();
        out
    }

    #[test]
    fn single_record_round_trip() {
        let mut s = PairEmbeddingStore::new(4, "toy").unwrap();
        s.push(rec("301", "d1", vec![0.1, -2.0, 3.5, f32::MIN_POSITIVE]))
            .unwrap();
        let b = bytes(&s);
        assert_eq!(b.len(), 12 + 2 + 3 + 2 + 2 + 4 + 16);
        assert_eq!(&b[..4], b"QPPE");
        let back = PairEmbeddingStore::read_binary(&b[..]).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn header_dimension_mismatch() {
        let mut s = PairEmbeddingStore::new(4, "").unwrap();
        s.push(rec("q", "d", vec![1.0; 4])).unwrap();
        let mut b = bytes(&s);
        b[8..12].copy_from_slice(&8u32.to_le_bytes());
        assert!(matches!(
            PairEmbeddingStore::read_binary(&b[..]),
            Err(QppError::Format(_))
        ));
        assert!(s.push(rec("q2", "d", vec![1.0; 3])).is_err());
    }

    #[test]
    fn truncated_file() {
        let mut s = PairEmbeddingStore::new(2, "").unwrap();
        s.push(rec("q", "d", vec![1.0, 2.0])).unwrap();
        let b = bytes(&s);
        for cut in [3, 11, b.len() - 1, b.len() - 5] {
            assert!(matches!(
                PairEmbeddingStore::read_binary(&b[..cut]),
                Err(QppError::Format(_))
            ));
        }
    }

    #[test]
    fn empty_store_is_valid() {
        let s = PairEmbeddingStore::new(3, "").unwrap();
        let b = bytes(&s);
        assert_eq!(b.len(), 12);
        let back = PairEmbeddingStore::read_binary(&b[..]).unwrap();
        assert_eq!(back.len(), 0);
        assert_eq!(back.dim(), 3);
    }

    #[test]
    fn text_format_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.jsonl");
        let mut s = PairEmbeddingStore::new(2, "toy-encoder").unwrap();
        s.push(rec("q", "d", vec![0.1, 1e-7])).unwrap();
        s.save(&p).unwrap();
        let meta = std::fs::read_to_string(sidecar_path(&p)).unwrap();
        assert!(meta.contains("\"dim\": 2") && meta.contains("\"encoder-name\": \"toy-encoder\""));
        let back = PairEmbeddingStore::load(&p).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.encoder_name(), "toy-encoder");
    }

    proptest! {
        #[test]
        fn binary_and_text_round_trips(
            dim in 1usize..6,
            raw in prop::collection::vec((any::<u32>(), prop::collection::vec(any::<f32>().prop_filter("finite", |x| x.is_finite()), 6)), 0..8),
        ) {
            let mut s = PairEmbeddingStore::new(dim, "p").unwrap();
            for (i, (rank, v)) in raw.iter().enumerate() {
                s.push(PairEmbedding { qid: format!("q{i}"), docid: "d".into(), rank: *rank, vec: v[..dim].to_vec() }).unwrap();
            }
            let back = PairEmbeddingStore::read_binary(&bytes(&s)[..]).unwrap();
            prop_assert_eq!(&back, &s);

            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("e.jsonl");
            s.save_text(&p).unwrap();
            let t = PairEmbeddingStore::load_text(&p).unwrap();
            for (a, b) in t.records().iter().zip(s.records()) {
                for (x, y) in a.vec.iter().zip(&b.vec) {
                    let ulps = (x.to_bits() as i64 - y.to_bits() as i64).abs();
                    prop_assert!(ulps <= 1, "{} vs {}", x, y);
                }
            }
        }
    }
}
