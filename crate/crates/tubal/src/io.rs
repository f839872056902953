//! Flat little-endian binary containers shared by all tools.
//!
//! Tensor files: magic `TBL3`, u32 version = 1, u32 n1, u32 n2, u32 k,
//! then `n1*n2*k` f64 values in slice-major, column-major-within-slice
//! order (exactly the in-memory layout of [`Tensor3`]).
//!
//! Operator files: magic `TSNS`, u32 version = 1, u32 n, u32 k, u32 m,
//! u32 scaling flag, u64 seed, then `m` concatenated tensor payloads in the
//! tensor format above.
//!
//! Mask files: the tensor header with magic `TMSK` and a u8 payload.
//! Measurement vectors: a u64 length prefix followed by f64 values.

use std::fs;
use std::path::Path;

use crate::completion::Mask3;
use crate::error::{Result, TubalError};
use crate::sensing::{Scaling, SensingOperator};
use crate::talg::Tensor3;

const TENSOR_MAGIC: &[u8; 4] = b"TBL3";
const OPERATOR_MAGIC: &[u8; 4] = b"TSNS";
const MASK_MAGIC: &[u8; 4] = b"TMSK";
pub const FORMAT_VERSION: u32 = 1;

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(TubalError::CorruptFile("unexpected end of file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn magic(&mut self, expect: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != expect {
            return Err(TubalError::CorruptFile(format!(
                "bad magic {:?}, expected {:?}",
                got, expect
            )));
        }
        Ok(())
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let raw = self.take(count * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn done(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(TubalError::CorruptFile(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn version_check(v: u32) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(TubalError::CorruptFile(format!("unsupported version {v}")));
    }
    Ok(())
}

pub fn tensor_to_bytes(t: &Tensor3) -> Vec<u8> {
    let (n1, n2, k) = t.dims();
    let mut out = Vec::with_capacity(20 + t.len() * 8);
    out.extend_from_slice(TENSOR_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(n1 as u32).to_le_bytes());
    out.extend_from_slice(&(n2 as u32).to_le_bytes());
    out.extend_from_slice(&(k as u32).to_le_bytes());
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn tensor_from_bytes(buf: &[u8]) -> Result<Tensor3> {
    let mut r = Reader::new(buf);
    let t = read_tensor_payload(&mut r)?;
    r.done()?;
    Ok(t)
}

fn read_tensor_payload(r: &mut Reader<'_>) -> Result<Tensor3> {
    r.magic(TENSOR_MAGIC)?;
    version_check(r.u32()?)?;
    let n1 = r.u32()? as usize;
    let n2 = r.u32()? as usize;
    let k = r.u32()? as usize;
    if n1 == 0 || n2 == 0 || k == 0 {
        return Err(TubalError::CorruptFile("zero dimension".into()));
    }
    let data = r.f64s(n1 * n2 * k)?;
    Tensor3::from_data(n1, n2, k, data)
}

pub fn write_tensor<P: AsRef<Path>>(path: P, t: &Tensor3) -> Result<()> {
    fs::write(path, tensor_to_bytes(t))?;
    Ok(())
}

pub fn read_tensor<P: AsRef<Path>>(path: P) -> Result<Tensor3> {
    tensor_from_bytes(&fs::read(path)?)
}

pub fn operator_to_bytes(op: &SensingOperator) -> Vec<u8> {
    let (n, k, m) = (op.n(), op.k(), op.m());
    let d = op.dim();
    let mut out = Vec::with_capacity(32 + m * (20 + d * 8));
    out.extend_from_slice(OPERATOR_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(k as u32).to_le_bytes());
    out.extend_from_slice(&(m as u32).to_le_bytes());
    out.extend_from_slice(&op.scaling().flag().to_le_bytes());
    out.extend_from_slice(&op.seed().to_le_bytes());
    for i in 0..m {
        let row = &op.rows_flat()[i * d..(i + 1) * d];
        let t = Tensor3::from_data(n, n, k, row.to_vec()).expect("operator row");
        out.extend_from_slice(&tensor_to_bytes(&t));
    }
    out
}

pub fn operator_from_bytes(buf: &[u8]) -> Result<SensingOperator> {
    let mut r = Reader::new(buf);
    r.magic(OPERATOR_MAGIC)?;
    version_check(r.u32()?)?;
    let n = r.u32()? as usize;
    let k = r.u32()? as usize;
    let m = r.u32()? as usize;
    let scaling = Scaling::from_flag(r.u32()?)?;
    let seed = r.u64()?;
    let d = n * n * k;
    let mut rows = Vec::with_capacity(m * d);
    for _ in 0..m {
        let t = read_tensor_payload(&mut r)?;
        if t.dims() != (n, n, k) {
            return Err(TubalError::CorruptFile("measurement shape".into()));
        }
        rows.extend_from_slice(t.data());
    }
    r.done()?;
    SensingOperator::from_parts(n, k, m, seed, scaling, rows)
}

pub fn write_operator<P: AsRef<Path>>(path: P, op: &SensingOperator) -> Result<()> {
    fs::write(path, operator_to_bytes(op))?;
    Ok(())
}

pub fn read_operator<P: AsRef<Path>>(path: P) -> Result<SensingOperator> {
    operator_from_bytes(&fs::read(path)?)
}

pub fn vector_to_bytes(v: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + v.len() * 8);
    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn vector_from_bytes(buf: &[u8]) -> Result<Vec<f64>> {
    let mut r = Reader::new(buf);
    let len = r.u64()? as usize;
    let v = r.f64s(len)?;
    r.done()?;
    Ok(v)
}

pub fn write_vector<P: AsRef<Path>>(path: P, v: &[f64]) -> Result<()> {
    fs::write(path, vector_to_bytes(v))?;
    Ok(())
}

pub fn read_vector<P: AsRef<Path>>(path: P) -> Result<Vec<f64>> {
    vector_from_bytes(&fs::read(path)?)
}

pub fn mask_to_bytes(m: &Mask3) -> Vec<u8> {
    let (n1, n2, k) = m.dims();
    let mut out = Vec::with_capacity(20 + m.data().len());
    out.extend_from_slice(MASK_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(n1 as u32).to_le_bytes());
    out.extend_from_slice(&(n2 as u32).to_le_bytes());
    out.extend_from_slice(&(k as u32).to_le_bytes());
    out.extend(m.data().iter().map(|b| u8::from(*b)));
    out
}

pub fn mask_from_bytes(buf: &[u8]) -> Result<Mask3> {
    let mut r = Reader::new(buf);
    r.magic(MASK_MAGIC)?;
    version_check(r.u32()?)?;
    let n1 = r.u32()? as usize;
    let n2 = r.u32()? as usize;
    let k = r.u32()? as usize;
    let raw = r.take(n1 * n2 * k)?;
    r.done()?;
    let mut m = Mask3::new_false(n1, n2, k);
    for (dst, src) in m.data_mut().iter_mut().zip(raw) {
        *dst = match src {
            0 => false,
            1 => true,
            other => {
                return Err(TubalError::CorruptFile(format!(
                    "mask byte {other} is not 0/1"
                )))
            }
        };
    }
    Ok(m)
}

pub fn write_mask<P: AsRef<Path>>(path: P, m: &Mask3) -> Result<()> {
    fs::write(path, mask_to_bytes(m))?;
    Ok(())
}

pub fn read_mask<P: AsRef<Path>>(path: P) -> Result<Mask3> {
    mask_from_bytes(&fs::read(path)?)
}

/// FNV-1a 64-bit checksum, used by experiment manifests.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
