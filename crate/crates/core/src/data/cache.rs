//! Little-endian binary dataset format.

use std::io::{Read, Write};

use ndarray::Array2;

use super::{Dataset, FitStats};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"CSFD";
const VERSION: u32 = 1;

fn put_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_bytes<W: Write>(w: &mut W, b: &[u8]) -> Result<()> {
    put_u64(w, b.len() as u64)?;
    w.write_all(b)?;
    Ok(())
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_len<R: Read>(r: &mut R) -> Result<usize> {
    let v = get_u64(r)?;
    usize::try_from(v).ok().filter(|&v| v < 1 << 40).ok_or_else(|| Error::Format(format!("implausible length {v}")))
}

fn get_bytes<R: Read>(r: &mut R) -> Result<Vec<u8>> {
    let len = get_len(r)?;
    let mut b = vec![0u8; len];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn get_string<R: Read>(r: &mut R) -> Result<String> {
    String::from_utf8(get_bytes(r)?).map_err(|e| Error::Format(e.to_string()))
}

pub(super) fn write_dataset<W: Write>(d: &Dataset, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let (n, p) = d.x.dim();
    let k = d.s.ncols();
    for v in [n, p, k] {
        put_u64(&mut w, v as u64)?;
    }
    for v in d.x.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&d.y)?;
    for v in d.s.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    for c in &d.group_cardinalities {
        w.write_all(&c.to_le_bytes())?;
    }
    put_u64(&mut w, d.feature_names.len() as u64)?;
    for name in &d.feature_names {
        put_bytes(&mut w, name.as_bytes())?;
    }
    put_bytes(&mut w, &serde_json::to_vec(&d.stats)?)?;
    put_u64(&mut w, d.unseen_categories as u64)?;
    w.flush()?;
    Ok(())
}

pub(super) fn read_dataset<R: Read>(mut r: R) -> Result<Dataset> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a dataset cache file".into()));
    }
    let mut ver = [0u8; 4];
    r.read_exact(&mut ver)?;
    let ver = u32::from_le_bytes(ver);
    if ver != VERSION {
        return Err(Error::Format(format!("unsupported dataset cache version {ver}")));
    }
    let n = get_len(&mut r)?;
    let p = get_len(&mut r)?;
    let k = get_len(&mut r)?;
    let mut buf8 = [0u8; 8];
    let mut buf4 = [0u8; 4];
    let mut x = Vec::with_capacity(n * p);
    for _ in 0..n * p {
        r.read_exact(&mut buf8)?;
        x.push(f64::from_le_bytes(buf8));
    }
    let mut y = vec![0u8; n];
    r.read_exact(&mut y)?;
    let mut s = Vec::with_capacity(n * k);
    for _ in 0..n * k + k {
        r.read_exact(&mut buf4)?;
        s.push(u32::from_le_bytes(buf4));
    }
    let group_cardinalities = s.split_off(n * k);
    let names_len = get_len(&mut r)?;
    let feature_names = (0..names_len).map(|_| get_string(&mut r)).collect::<Result<Vec<_>>>()?;
    let stats: FitStats = serde_json::from_slice(&get_bytes(&mut r)?)?;
    let unseen_categories = get_len(&mut r)?;
    let shape_err = |e: ndarray::ShapeError| Error::Format(e.to_string());
    Ok(Dataset {
        x: Array2::from_shape_vec((n, p), x).map_err(shape_err)?,
        y,
        s: Array2::from_shape_vec((n, k), s).map_err(shape_err)?,
        feature_names,
        group_cardinalities,
        stats,
        unseen_categories,
    })
}
