use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::GcnParams;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"TSSGCN01";

/// Binary dump: magic, `d h C` as u64, both weight matrices row-major as
/// f64, then a length-prefixed UTF-8 config string. Little-endian.
pub fn write_checkpoint<T: Scalar>(path: impl AsRef<Path>, params: &GcnParams<T>, config: &str) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(MAGIC).map_err(io)?;
    for n in [params.input_dim(), params.hidden(), params.num_classes()] {
        w.write_all(&(n as u64).to_le_bytes()).map_err(io)?;
    }
    for &v in params.w1.as_slice().iter().chain(params.w2.as_slice()) {
        w.write_all(&v.as_f64().to_le_bytes()).map_err(io)?;
    }
    w.write_all(&(config.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(config.as_bytes()).map_err(io)?;
    w.flush().map_err(io)
}

struct Cursor<'a> {
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.bytes.len() < n {
            return None;
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Some(head)
    }

    fn word(&mut self) -> Option<[u8; 8]> {
        self.take(8).map(|b| b.try_into().unwrap())
    }

    fn matrix<T: Scalar>(&mut self, rows: usize, cols: usize) -> Option<DenseMatrix<T>> {
        let data = (0..rows * cols)
            .map(|_| self.word().map(|b| T::of(f64::from_le_bytes(b))))
            .collect::<Option<Vec<_>>>()?;
        DenseMatrix::from_vec(rows, cols, data).ok()
    }
}

pub fn read_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<(GcnParams<T>, String)> {
    let path = path.as_ref();
    let corrupt = |msg: &str| Error::Format {
        path: path.to_path_buf(),
        msg: msg.to_string(),
    };
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    let mut cur = Cursor { bytes: &bytes };
    if cur.take(8) != Some(MAGIC.as_slice()) {
        return Err(corrupt("bad magic"));
    }
    let truncated = || corrupt("truncated checkpoint");
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = u64::from_le_bytes(cur.word().ok_or_else(truncated)?) as usize;
    }
    let [d, h, c] = dims;
    let w1 = cur.matrix(d, h).ok_or_else(truncated)?;
    let w2 = cur.matrix(h, c).ok_or_else(truncated)?;
    let len = u64::from_le_bytes(cur.word().ok_or_else(truncated)?) as usize;
    let raw = cur.take(len).ok_or_else(truncated)?;
    let config = String::from_utf8(raw.to_vec()).map_err(|_| corrupt("config is not UTF-8"))?;
    if !cur.bytes.is_empty() {
        return Err(corrupt("trailing bytes"));
    }
    Ok((GcnParams { w1, w2 }, config))
}
