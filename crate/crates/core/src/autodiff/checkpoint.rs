//! Binary parameter checkpoints: magic "QPPM", version, then a named table of
//! tensors. All integers are u32 little-endian, values f64 little-endian.

use std::io::{Read, Write};
use std::path::Path;

use super::params::ParamSet;
use super::tensor::Tensor;
use crate::error::{QppError, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"QPPM";
pub const CHECKPOINT_VERSION: u32 = 1;

impl ParamSet {
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(self.len() as u32).to_le_bytes())?;
        for (name, t) in self.names().iter().zip(self.tensors()) {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
            for &d in t.shape() {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            for v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        w.flush()
    }

    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)
            .map_err(|e| QppError::Format(format!("read failed: {e}")))?;
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            if pos + n > buf.len() {
                return Err(QppError::Format("truncated checkpoint".into()));
            }
            pos += n;
            Ok(&buf[pos - n..pos])
        };
        if take(4)? != CHECKPOINT_MAGIC {
            return Err(QppError::Format("bad magic, expected QPPM".into()));
        }
        let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
        let version = u32_at(take(4)?);
        if version != CHECKPOINT_VERSION {
            return Err(QppError::Format(format!("unsupported checkpoint version {version}")));
        }
        let count = u32_at(take(4)?);
        let mut params = ParamSet::new();
        for _ in 0..count {
            let len = u32_at(take(4)?) as usize;
            let name = String::from_utf8(take(len)?.to_vec())
                .map_err(|_| QppError::Format("parameter name is not UTF-8".into()))?;
            let rank = u32_at(take(4)?) as usize;
            let shape: Vec<usize> = (0..rank)
                .map(|_| take(4).map(|b| u32_at(b) as usize))
                .collect::<Result<_>>()?;
            let n: usize = shape.iter().product();
            let data: Vec<f64> = (0..n)
                .map(|_| take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())))
                .collect::<Result<_>>()?;
            params.insert(name, Tensor::new(shape, data)?)?;
        }
        if pos != buf.len() {
            return Err(QppError::Format("trailing bytes after checkpoint".into()));
        }
        Ok(params)
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        self.write_checkpoint(&mut bytes).expect("vec write");
        std::fs::write(path, bytes).map_err(|e| QppError::io(path, e))
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| QppError::io(path, e))?;
        Self::read_checkpoint(std::io::BufReader::new(f))
    }
}
