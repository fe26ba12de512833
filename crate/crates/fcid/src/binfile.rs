//! Little-endian binary encoding helpers shared by the codebook, dataset,
//! and checkpoint file formats. All float payloads are stored as f32.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::tensor::Tensor2;

pub fn write_magic(w: &mut impl Write, magic: &[u8; 4]) -> Result<()> {
    w.write_all(magic)?;
    Ok(())
}

pub fn expect_magic(r: &mut impl Read, magic: &[u8; 4], what: &str) -> Result<()> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format(format!("{what}: truncated magic")))?;
    if &buf != magic {
        return Err(Error::Format(format!(
            "{what}: bad magic {:?}, expected {:?}",
            buf, magic
        )));
    }
    Ok(())
}

pub fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format(format!("{what}: truncated header")))?;
    Ok(u32::from_le_bytes(buf))
}

pub fn write_f32_slice(w: &mut impl Write, values: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 4);
    for &v in values {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_f32_tensor(r: &mut impl Read, rows: usize, cols: usize, what: &str) -> Result<Tensor2> {
    let n = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::Format(format!("{what}: dimension overflow {rows}x{cols}")))?;
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)
        .map_err(|_| Error::Format(format!("{what}: truncated payload")))?;
    let mut data = Vec::with_capacity(rows * cols);
    for chunk in buf.chunks_exact(4) {
        let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        data.push(v as f64);
    }
    Tensor2::from_vec(rows, cols, data)
}
