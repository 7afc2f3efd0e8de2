//! `MST1` columnar point-cloud files.
//!
//! Layout (all little-endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 4 | magic `MST1` |
//! | 4 | `u32` format version (currently 1) |
//! | 8 | `u64` point count `n` |
//! | 4 | `u32` presence bitmap of optional columns |
//! | 4 + len | `u32` length of the UTF-8 CRS note, then its bytes |
//!
//! followed by contiguous column arrays: `x`, `y`, `z` as `f64[n]`,
//! `channel` as `u8[n]` (0 = 532 nm, 1 = 1064 nm), `reflectance_db` as
//! `f32[n]`, `label` as `u8[n]` (0 non-tree, 1 tree, 255 unlabeled), then every
//! optional column whose bit is set, in bit order: `ground_flag` `u8`,
//! `h_norm` `f32`, `refl_green_db` `f32`, `refl_nir_db` `f32`,
//! `cross_missing` `u8`, `pndvi` `f32`, `split` `u8` (0 train, 1 val, 2 test).

use std::fs;
use std::path::Path;

use crate::cloud::{Channel, Label, PointCloud, SplitTag, OPTIONAL_COLUMNS};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MST1";
pub const VERSION: u32 = 1;

pub fn encode_columnar(cloud: &PointCloud) -> Result<Vec<u8>> {
    cloud.validate()?;
    let n = cloud.len();
    let mut buf = Vec::with_capacity(32 + n * 48);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    buf.extend_from_slice(&cloud.presence_bits().to_le_bytes());
    let note = cloud.crs_note.as_bytes();
    buf.extend_from_slice(&(note.len() as u32).to_le_bytes());
    buf.extend_from_slice(note);

    for col in [&cloud.x, &cloud.y, &cloud.z] {
        col.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
    }
    buf.extend(cloud.channel.iter().map(|c| c.code()));
    put_f32(&mut buf, &cloud.reflectance_db);
    buf.extend(cloud.label.iter().map(|l| l.code()));

    if let Some(c) = &cloud.ground_flag {
        buf.extend(c.iter().map(|&b| b as u8));
    }
    for col in [&cloud.h_norm, &cloud.refl_green_db, &cloud.refl_nir_db] {
        if let Some(c) = col {
            put_f32(&mut buf, c);
        }
    }
    if let Some(c) = &cloud.cross_missing {
        buf.extend(c.iter().map(|&b| b as u8));
    }
    if let Some(c) = &cloud.pndvi {
        put_f32(&mut buf, c);
    }
    if let Some(c) = &cloud.split {
        buf.extend(c.iter().map(|s| s.code()));
    }
    Ok(buf)
}

fn put_f32(buf: &mut Vec<u8>, col: &[f32]) {
    col.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.pos + len > self.data.len() {
            return Err(Error::MalformedHeader("unexpected end of file".into()));
        }
        let s = &self.data[self.pos..self.pos + len];
        self.pos += len;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Vec<f64> {
        let s = &self.data[self.pos..self.pos + 8 * n];
        self.pos += 8 * n;
        s.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect()
    }

    fn f32s(&mut self, n: usize) -> Vec<f32> {
        let s = &self.data[self.pos..self.pos + 4 * n];
        self.pos += 4 * n;
        s.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect()
    }

    fn bytes(&mut self, n: usize) -> &'a [u8] {
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        s
    }
}

pub fn decode_columnar(data: &[u8]) -> Result<PointCloud> {
    let mut r = Reader { data, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::MalformedHeader("bad magic, not an MST1 file".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::VersionMismatch { found: version, expected: VERSION });
    }
    let n = usize::try_from(r.u64()?).map_err(|_| Error::MalformedHeader("count overflow".into()))?;
    let bits = r.u32()?;
    if bits >> OPTIONAL_COLUMNS.len() != 0 {
        return Err(Error::MalformedHeader(format!("unknown presence bits {bits:#x}")));
    }
    let note_len = r.u32()? as usize;
    let crs_note = String::from_utf8(r.take(note_len)?.to_vec())
        .map_err(|_| Error::MalformedHeader("CRS note is not UTF-8".into()))?;

    let has = |bit: usize| bits & (1 << bit) != 0;
    let widths = [1usize, 4, 4, 4, 1, 4, 1];
    let row_bytes = 8 * 3 + 1 + 4 + 1 + (0..widths.len()).filter(|&b| has(b)).map(|b| widths[b]).sum::<usize>();
    let remaining = data.len() - r.pos;
    if remaining != n * row_bytes {
        return Err(Error::LengthMismatch(format!(
            "header declares {n} points ({} bytes of columns) but {remaining} bytes follow",
            n * row_bytes
        )));
    }

    let x = r.f64s(n);
    let y = r.f64s(n);
    let z = r.f64s(n);
    let channel = r
        .bytes(n)
        .iter()
        .map(|&c| Channel::from_code(c).ok_or_else(|| Error::MalformedHeader(format!("bad channel code {c}"))))
        .collect::<Result<Vec<_>>>()?;
    let reflectance_db = r.f32s(n);
    let label = r.bytes(n).iter().map(|&c| Label::from_code(c)).collect();

    let ground_flag = has(0).then(|| r.bytes(n).iter().map(|&b| b != 0).collect());
    let h_norm = has(1).then(|| r.f32s(n));
    let refl_green_db = has(2).then(|| r.f32s(n));
    let refl_nir_db = has(3).then(|| r.f32s(n));
    let cross_missing = has(4).then(|| r.bytes(n).iter().map(|&b| b != 0).collect());
    let pndvi = has(5).then(|| r.f32s(n));
    let split = if has(6) {
        Some(
            r.bytes(n)
                .iter()
                .map(|&c| SplitTag::from_code(c).ok_or_else(|| Error::MalformedHeader(format!("bad split code {c}"))))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };

    let cloud = PointCloud {
        x,
        y,
        z,
        channel,
        reflectance_db,
        label,
        ground_flag,
        h_norm,
        refl_green_db,
        refl_nir_db,
        cross_missing,
        pndvi,
        split,
        crs_note,
    };
    cloud.validate()?;
    Ok(cloud)
}

pub fn write_columnar(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_columnar(cloud)?)?;
    Ok(())
}

pub fn read_columnar(path: impl AsRef<Path>) -> Result<PointCloud> {
    decode_columnar(&fs::read(path)?)
}
