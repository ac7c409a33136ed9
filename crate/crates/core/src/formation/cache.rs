//! Binary operator cache.
//!
//! Layout, little-endian: magic `TXOP`, version `u32`, pixel count `u64`,
//! texel count `u64`, then for every pixel row an entry count `u32` followed
//! by that many `(texel u32, weight f64)` pairs.

use std::io::{Read, Write};

use super::{FormationError, SparseProjectionOperator};

pub const CACHE_MAGIC: &[u8; 4] = b"TXOP";
pub const CACHE_VERSION: u32 = 1;

pub fn write_operator(op: &SparseProjectionOperator, mut out: impl Write) -> Result<(), FormationError> {
    let (row_ptr, cols, vals) = op.raw_rows();
    out.write_all(CACHE_MAGIC)?;
    out.write_all(&CACHE_VERSION.to_le_bytes())?;
    out.write_all(&(op.pixel_count() as u64).to_le_bytes())?;
    out.write_all(&(op.texel_count() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(4 + 12 * 32);
    for p in 0..op.pixel_count() {
        buf.clear();
        let range = row_ptr[p]..row_ptr[p + 1];
        buf.extend_from_slice(&(range.len() as u32).to_le_bytes());
        for e in range {
            buf.extend_from_slice(&cols[e].to_le_bytes());
            buf.extend_from_slice(&vals[e].to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

fn read_array<const N: usize>(input: &mut impl Read) -> Result<[u8; N], FormationError> {
    let mut b = [0u8; N];
    input.read_exact(&mut b).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            FormationError::Cache("truncated file".into())
        } else {
            FormationError::Io(e)
        }
    })?;
    Ok(b)
}

/// Reads a cached operator. The caller supplies the view and atlas sizes,
/// which must agree with the stored pixel and texel counts.
pub fn read_operator(
    mut input: impl Read,
    view: (usize, usize),
    atlas: (usize, usize),
) -> Result<SparseProjectionOperator, FormationError> {
    if &read_array::<4>(&mut input)? != CACHE_MAGIC {
        return Err(FormationError::Cache("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut input)?);
    if version != CACHE_VERSION {
        return Err(FormationError::Cache(format!("unsupported version {version}")));
    }
    let pixels = u64::from_le_bytes(read_array(&mut input)?) as usize;
    let texels = u64::from_le_bytes(read_array(&mut input)?) as usize;
    if pixels != view.0 * view.1 || texels != atlas.0 * atlas.1 {
        return Err(FormationError::DimensionMismatch {
            expected: format!("{} pixels, {} texels", view.0 * view.1, atlas.0 * atlas.1),
            found: format!("{pixels} pixels, {texels} texels"),
        });
    }
    let mut row_ptr = Vec::with_capacity(pixels + 1);
    row_ptr.push(0);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for _ in 0..pixels {
        let n = u32::from_le_bytes(read_array(&mut input)?) as usize;
        for _ in 0..n {
            let c = u32::from_le_bytes(read_array(&mut input)?);
            let w = f64::from_le_bytes(read_array(&mut input)?);
            if c as usize >= texels || !(w >= 0.0) {
                return Err(FormationError::Cache(format!("invalid entry ({c}, {w})")));
            }
            cols.push(c);
            vals.push(w);
        }
        row_ptr.push(cols.len());
    }
    let mut rest = [0u8; 1];
    if input.read(&mut rest)? != 0 {
        return Err(FormationError::Cache("trailing bytes".into()));
    }
    Ok(SparseProjectionOperator::from_rows(view, atlas, row_ptr, cols, vals))
}
