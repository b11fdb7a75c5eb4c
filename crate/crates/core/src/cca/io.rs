//! Versioned little-endian model file.
//!
//! ```text
//! "MVCM" | u32 version | u32 m
//! m x { u16 name_len | name (UTF-8) | u32 n_i }
//! u32 p | f64 q | f64 epsilon | u64 N
//! p x f64 eigenvalues
//! m x { n_i x f64 input mean | p x f64 embedding mean | n_i*p x f64 W_i (row-major) }
//! ```
//!
//! `epsilon` carries the ridge: non-negative for an absolute ridge, sign bit
//! set for a trace-scaled factor.

use std::fs;
use std::path::Path;

use super::{CcaConfig, CcaModel, Ridge, ViewSpec, MAX_VIEWS};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const MODEL_MAGIC: &[u8; 4] = b"MVCM";
pub const MODEL_VERSION: u32 = 1;

pub fn save_model(model: &CcaModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<CcaModel> {
    model_from_bytes(&fs::read(path)?)
}

pub fn model_to_bytes(model: &CcaModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.views.len() as u32).to_le_bytes());
    for v in &model.views {
        out.extend_from_slice(&(v.name.len() as u16).to_le_bytes());
        out.extend_from_slice(v.name.as_bytes());
        out.extend_from_slice(&(v.dim as u32).to_le_bytes());
    }
    let cfg = model.config;
    out.extend_from_slice(&(cfg.p as u32).to_le_bytes());
    out.extend_from_slice(&cfg.q.to_le_bytes());
    out.extend_from_slice(&cfg.ridge.to_bits().to_le_bytes());
    out.extend_from_slice(&model.sample_count.to_le_bytes());
    put_f64s(&mut out, &model.eigenvalues);
    for i in 0..model.views.len() {
        put_f64s(&mut out, &model.input_means[i]);
        put_f64s(&mut out, &model.embedding_means[i]);
        put_f64s(&mut out, model.projections[i].as_slice());
    }
    out
}

fn put_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::format(format!(
                "model file truncated while reading {what} at byte {}",
                self.pos
            ))),
        }
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = self.take(
            n.checked_mul(8)
                .ok_or_else(|| Error::format("size overflow"))?,
            what,
        )?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn model_from_bytes(buf: &[u8]) -> Result<CcaModel> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4, "magic")? != MODEL_MAGIC {
        return Err(Error::format("bad magic bytes, not a model file"));
    }
    let version = r.u32("version")?;
    if version != MODEL_VERSION {
        return Err(Error::format(format!(
            "unsupported model version {version}"
        )));
    }
    let m = r.u32("view count")? as usize;
    if m == 0 || m > MAX_VIEWS {
        return Err(Error::format(format!("view count {m} out of range")));
    }
    let mut views = Vec::with_capacity(m);
    for _ in 0..m {
        let len = r.u16("view name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "view name")?)
            .map_err(|_| Error::format("view name is not UTF-8"))?
            .to_owned();
        let dim = r.u32("view dim")? as usize;
        if dim == 0 {
            return Err(Error::format(format!("view `{name}` has zero dimension")));
        }
        views.push(ViewSpec { name, dim });
    }
    let p = r.u32("p")? as usize;
    if p == 0 || views.iter().any(|v| v.dim < p) {
        return Err(Error::format(format!(
            "p = {p} inconsistent with view dims"
        )));
    }
    let q = r.f64("q")?;
    let ridge = Ridge::from_bits(r.f64("epsilon")?);
    let sample_count = r.u64("sample count")?;
    let eigenvalues = r.f64s(p, "eigenvalues")?;
    let mut input_means = Vec::with_capacity(m);
    let mut embedding_means = Vec::with_capacity(m);
    let mut projections = Vec::with_capacity(m);
    for v in &views {
        input_means.push(r.f64s(v.dim, "input mean")?);
        embedding_means.push(r.f64s(p, "embedding mean")?);
        let w = r.f64s(v.dim * p, "projection")?;
        projections.push(Matrix::from_vec(v.dim, p, w)?);
    }
    if r.pos != buf.len() {
        return Err(Error::format(format!(
            "{} trailing bytes after model payload",
            buf.len() - r.pos
        )));
    }
    CcaModel::from_parts(
        views,
        projections,
        eigenvalues,
        input_means,
        embedding_means,
        CcaConfig { p, q, ridge },
        sample_count,
    )
    .map_err(|e| Error::format(format!("inconsistent model: {e}")))
}
