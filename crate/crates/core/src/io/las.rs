//! Minimal LAS reader (1.2 – 1.4, point formats 0 – 10) and LAS 1.4 writer.
//!
//! Only the fields the pipeline uses are decoded: coordinates, intensity,
//! classification, the 1.4 scanner channel bits, and typed extra-bytes
//! attributes declared in the `LASF_Spec` / 4 VLR.

use std::fs;
use std::path::Path;

use crate::cloud::{Channel, Label, PointCloud};
use crate::error::{Error, Result};

const BASE_RECORD_LEN: [usize; 11] = [20, 28, 26, 34, 57, 63, 30, 36, 38, 59, 67];
const HEADER_LEN_14: usize = 375;
const VLR_HEADER_LEN: usize = 54;
const EXTRA_BYTES_DESCRIPTOR_LEN: usize = 192;

/// Where a point's reflectance value comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReflectanceSource {
    /// The standard `intensity` field, copied as-is.
    Intensity,
    /// A named extra-bytes attribute (scale/offset applied when declared).
    ExtraBytes(String),
}

impl ReflectanceSource {
    pub fn parse(s: &str) -> Self {
        if s.eq_ignore_ascii_case("intensity") {
            ReflectanceSource::Intensity
        } else {
            ReflectanceSource::ExtraBytes(s.to_string())
        }
    }
}

/// How the channel tag is assigned to every point of a file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelSource {
    Fixed(Channel),
    /// LAS 1.4 scanner-channel bits (0 = green, 1 = NIR), as written by [`write_las`].
    ScannerChannel,
}

#[derive(Debug, Clone)]
pub struct LasReadOptions {
    pub reflectance: ReflectanceSource,
    pub channel: ChannelSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ExtraType {
    U8,
    I8,
    U16,
    I16,
    U32,
    I32,
    U64,
    I64,
    F32,
    F64,
    Raw(usize),
}

impl ExtraType {
    fn from_code(code: u8, options: u8) -> Result<Self> {
        Ok(match code {
            0 => ExtraType::Raw(options as usize),
            1 => ExtraType::U8,
            2 => ExtraType::I8,
            3 => ExtraType::U16,
            4 => ExtraType::I16,
            5 => ExtraType::U32,
            6 => ExtraType::I32,
            7 => ExtraType::U64,
            8 => ExtraType::I64,
            9 => ExtraType::F32,
            10 => ExtraType::F64,
            other => return Err(Error::MalformedHeader(format!("unsupported extra-bytes data type {other}"))),
        })
    }

    fn size(self) -> usize {
        match self {
            ExtraType::U8 | ExtraType::I8 => 1,
            ExtraType::U16 | ExtraType::I16 => 2,
            ExtraType::U32 | ExtraType::I32 | ExtraType::F32 => 4,
            ExtraType::U64 | ExtraType::I64 | ExtraType::F64 => 8,
            ExtraType::Raw(n) => n,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            ExtraType::U8 => b[0] as f64,
            ExtraType::I8 => b[0] as i8 as f64,
            ExtraType::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            ExtraType::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            ExtraType::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            ExtraType::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            ExtraType::U64 => u64::from_le_bytes(b[..8].try_into().unwrap()) as f64,
            ExtraType::I64 => i64::from_le_bytes(b[..8].try_into().unwrap()) as f64,
            ExtraType::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            ExtraType::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
            ExtraType::Raw(_) => f64::NAN,
        }
    }

    fn code(self) -> u8 {
        match self {
            ExtraType::Raw(_) => 0,
            ExtraType::U8 => 1,
            ExtraType::I8 => 2,
            ExtraType::U16 => 3,
            ExtraType::I16 => 4,
            ExtraType::U32 => 5,
            ExtraType::I32 => 6,
            ExtraType::U64 => 7,
            ExtraType::I64 => 8,
            ExtraType::F32 => 9,
            ExtraType::F64 => 10,
        }
    }
}

#[derive(Debug, Clone)]
struct ExtraAttr {
    name: String,
    kind: ExtraType,
    offset: usize,
    scale: Option<f64>,
    add: Option<f64>,
}

impl ExtraAttr {
    fn value(&self, record: &[u8], base: usize) -> f64 {
        let start = base + self.offset;
        let raw = self.kind.decode(&record[start..start + self.kind.size()]);
        raw * self.scale.unwrap_or(1.0) + self.add.unwrap_or(0.0)
    }
}

/// Parsed header fields needed to walk the point records.
#[derive(Debug, Clone)]
pub struct LasHeader {
    pub version: (u8, u8),
    pub point_format: u8,
    pub record_len: usize,
    pub point_count: u64,
    pub offset_to_points: usize,
    pub scale: [f64; 3],
    pub offset: [f64; 3],
    extras: Vec<ExtraAttr>,
}

impl LasHeader {
    pub fn extra_names(&self) -> Vec<&str> {
        self.extras.iter().map(|e| e.name.as_str()).collect()
    }
}

fn rd_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}
fn rd_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}
fn rd_u64(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}
fn rd_f64(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}
fn rd_name(b: &[u8]) -> String {
    let end = b.iter().position(|&c| c == 0).unwrap_or(b.len());
    String::from_utf8_lossy(&b[..end]).trim().to_string()
}

pub fn parse_header(data: &[u8]) -> Result<LasHeader> {
    if data.len() < 227 {
        return Err(Error::MalformedHeader(format!("file is {} bytes, shorter than a LAS header", data.len())));
    }
    if &data[0..4] != b"LASF" {
        return Err(Error::MalformedHeader("missing LASF signature".into()));
    }
    let version = (data[24], data[25]);
    if version.0 != 1 || !(0..=4).contains(&version.1) {
        return Err(Error::MalformedHeader(format!("unsupported LAS version {}.{}", version.0, version.1)));
    }
    let header_size = rd_u16(data, 94) as usize;
    if header_size < 227 || header_size > data.len() {
        return Err(Error::MalformedHeader(format!("header size {header_size} out of range")));
    }
    let offset_to_points = rd_u32(data, 96) as usize;
    let n_vlrs = rd_u32(data, 100) as usize;
    // bits 6/7 flag LAZ compression
    let point_format = data[104] & 0x3f;
    if point_format as usize >= BASE_RECORD_LEN.len() {
        return Err(Error::MalformedHeader(format!("unsupported point format {}", data[104])));
    }
    let record_len = rd_u16(data, 105) as usize;
    let base = BASE_RECORD_LEN[point_format as usize];
    if record_len < base {
        return Err(Error::MalformedHeader(format!(
            "record length {record_len} shorter than format {point_format} base size {base}"
        )));
    }
    let legacy_count = rd_u32(data, 107) as u64;
    let point_count = if version.1 >= 4 && header_size >= HEADER_LEN_14 {
        let c = rd_u64(data, 247);
        if c == 0 {
            legacy_count
        } else {
            c
        }
    } else {
        legacy_count
    };
    let scale = [rd_f64(data, 131), rd_f64(data, 139), rd_f64(data, 147)];
    let offset = [rd_f64(data, 155), rd_f64(data, 163), rd_f64(data, 171)];

    let mut extras = Vec::new();
    let mut pos = header_size;
    for _ in 0..n_vlrs {
        if pos + VLR_HEADER_LEN > data.len() || pos + VLR_HEADER_LEN > offset_to_points {
            return Err(Error::MalformedHeader("VLR runs past the point data offset".into()));
        }
        let user = rd_name(&data[pos + 2..pos + 18]);
        let record_id = rd_u16(data, pos + 18);
        let len = rd_u16(data, pos + 20) as usize;
        let body_start = pos + VLR_HEADER_LEN;
        if body_start + len > data.len() {
            return Err(Error::MalformedHeader("truncated VLR".into()));
        }
        if user == "LASF_Spec" && record_id == 4 {
            let mut attr_offset = 0usize;
            for d in data[body_start..body_start + len].chunks_exact(EXTRA_BYTES_DESCRIPTOR_LEN) {
                let kind = ExtraType::from_code(d[2], d[3])?;
                let options = if matches!(kind, ExtraType::Raw(_)) { 0 } else { d[3] };
                let name = rd_name(&d[4..36]);
                let scale = (options & 0x08 != 0).then(|| rd_f64(d, 112));
                let add = (options & 0x10 != 0).then(|| rd_f64(d, 136));
                extras.push(ExtraAttr { name, kind, offset: attr_offset, scale, add });
                attr_offset += kind.size();
            }
            if base + attr_offset > record_len {
                return Err(Error::MalformedHeader("extra-bytes descriptors exceed the record length".into()));
            }
        }
        pos = body_start + len;
    }
    if offset_to_points > data.len() {
        return Err(Error::MalformedHeader("point data offset beyond end of file".into()));
    }
    Ok(LasHeader { version, point_format, record_len, point_count, offset_to_points, scale, offset, extras })
}

pub fn read_las(path: impl AsRef<Path>, opts: &LasReadOptions) -> Result<PointCloud> {
    decode_las(&fs::read(path)?, opts)
}

/// Decodes a LAS byte buffer. Classification 0 / 1 map to non-tree / tree;
/// every other class is read as unlabeled.
pub fn decode_las(data: &[u8], opts: &LasReadOptions) -> Result<PointCloud> {
    let h = parse_header(data)?;
    if h.point_count == 0 {
        return Err(Error::NoPoints);
    }
    let n = h.point_count as usize;
    let needed = h.offset_to_points + n * h.record_len;
    if data.len() < needed {
        return Err(Error::MalformedHeader(format!(
            "point data truncated: header declares {n} records of {} bytes",
            h.record_len
        )));
    }
    let base = BASE_RECORD_LEN[h.point_format as usize];
    let extended = h.point_format >= 6;

    let refl_attr = match &opts.reflectance {
        ReflectanceSource::Intensity => None,
        ReflectanceSource::ExtraBytes(name) => Some(
            h.extras
                .iter()
                .find(|e| &e.name == name && !matches!(e.kind, ExtraType::Raw(_)))
                .ok_or_else(|| Error::MissingField(name.clone()))?,
        ),
    };
    if opts.channel == ChannelSource::ScannerChannel && !extended {
        return Err(Error::MissingField(format!(
            "scanner channel (point format {} has none)",
            h.point_format
        )));
    }
    let find = |name: &str| h.extras.iter().find(|e| e.name == name && !matches!(e.kind, ExtraType::Raw(_)));
    let optional: Vec<(&str, Option<&ExtraAttr>)> =
        ["h_norm", "refl_green_db", "refl_nir_db", "pndvi"].iter().map(|&n| (n, find(n))).collect();
    let mut opt_cols: Vec<Vec<f32>> = optional.iter().map(|_| Vec::with_capacity(n)).collect();

    let mut cloud = PointCloud::with_capacity(n);
    for i in 0..n {
        let rec = &data[h.offset_to_points + i * h.record_len..h.offset_to_points + (i + 1) * h.record_len];
        let xi = i32::from_le_bytes(rec[0..4].try_into().unwrap()) as f64;
        let yi = i32::from_le_bytes(rec[4..8].try_into().unwrap()) as f64;
        let zi = i32::from_le_bytes(rec[8..12].try_into().unwrap()) as f64;
        let x = xi * h.scale[0] + h.offset[0];
        let y = yi * h.scale[1] + h.offset[1];
        let z = zi * h.scale[2] + h.offset[2];
        let intensity = rd_u16(rec, 12);
        let class = if extended { rec[16] } else { rec[15] & 0x1f };
        let channel = match opts.channel {
            ChannelSource::Fixed(c) => c,
            ChannelSource::ScannerChannel => {
                let bits = (rec[15] >> 4) & 0x03;
                Channel::from_code(bits)
                    .ok_or_else(|| Error::MalformedHeader(format!("scanner channel {bits} has no wavelength mapping")))?
            }
        };
        let refl = match refl_attr {
            None => intensity as f64,
            Some(a) => a.value(rec, base),
        };
        cloud.push(x, y, z, channel, refl as f32, Label::from_code(class));
        for (col, (_, attr)) in opt_cols.iter_mut().zip(&optional) {
            if let Some(a) = attr {
                col.push(a.value(rec, base) as f32);
            }
        }
    }
    let mut opt_cols = opt_cols.into_iter();
    for (name, attr) in &optional {
        let col = opt_cols.next().unwrap();
        if attr.is_none() {
            continue;
        }
        match *name {
            "h_norm" => cloud.h_norm = Some(col),
            "refl_green_db" => cloud.refl_green_db = Some(col),
            "refl_nir_db" => cloud.refl_nir_db = Some(col),
            "pndvi" => cloud.pndvi = Some(col),
            _ => unreachable!(),
        }
    }
    Ok(cloud)
}

/// Extra attributes and overrides for [`write_las`].
#[derive(Debug, Clone, Default)]
pub struct LasWriteOptions {
    /// Classification per point; defaults to the label codes.
    pub classification: Option<Vec<u8>>,
    /// Additional `u8` extra-bytes attributes.
    pub extra_u8: Vec<(String, Vec<u8>)>,
}

struct OutAttr<'a> {
    name: &'a str,
    kind: ExtraType,
    f32_values: Option<&'a [f32]>,
    u8_values: Option<&'a [u8]>,
}

/// Writes LAS 1.4, point format 6, millimetre quantization. Extra bytes:
/// `reflectance` plus whichever of `refl_green_db`, `refl_nir_db`, `pndvi`,
/// `h_norm` the cloud carries (all `f32`), then any caller `u8` attributes.
pub fn encode_las(cloud: &PointCloud, opts: &LasWriteOptions) -> Result<Vec<u8>> {
    cloud.validate()?;
    if cloud.is_empty() {
        return Err(Error::EmptyInput("cannot write an empty LAS file".into()));
    }
    let n = cloud.len();
    if let Some(c) = &opts.classification {
        if c.len() != n {
            return Err(Error::LengthMismatch(format!("classification has {} rows, cloud {n}", c.len())));
        }
    }
    for (name, v) in &opts.extra_u8 {
        if v.len() != n {
            return Err(Error::LengthMismatch(format!("extra attribute `{name}` has {} rows, cloud {n}", v.len())));
        }
        if name.len() > 31 {
            return Err(Error::InvalidParameter(format!("extra attribute name `{name}` too long")));
        }
    }

    let mut attrs: Vec<OutAttr> =
        vec![OutAttr { name: "reflectance", kind: ExtraType::F32, f32_values: Some(&cloud.reflectance_db), u8_values: None }];
    for (name, col) in [
        ("refl_green_db", &cloud.refl_green_db),
        ("refl_nir_db", &cloud.refl_nir_db),
        ("pndvi", &cloud.pndvi),
        ("h_norm", &cloud.h_norm),
    ] {
        if let Some(c) = col {
            attrs.push(OutAttr { name, kind: ExtraType::F32, f32_values: Some(c), u8_values: None });
        }
    }
    for (name, v) in &opts.extra_u8 {
        attrs.push(OutAttr { name, kind: ExtraType::U8, f32_values: None, u8_values: Some(v) });
    }

    let (lo, hi) = cloud.bounds().unwrap();
    let scale = [0.001; 3];
    let offset = [lo[0].floor(), lo[1].floor(), lo[2].floor()];
    for a in 0..3 {
        if ((hi[a] - offset[a]) / scale[a]).round() > i32::MAX as f64 {
            return Err(Error::InvalidParameter("coordinate extent too large for millimetre quantization".into()));
        }
    }
    let extra_len: usize = attrs.iter().map(|a| a.kind.size()).sum();
    let record_len = BASE_RECORD_LEN[6] + extra_len;
    let vlr_len = VLR_HEADER_LEN + attrs.len() * EXTRA_BYTES_DESCRIPTOR_LEN;
    let offset_to_points = HEADER_LEN_14 + vlr_len;

    let mut buf = vec![0u8; offset_to_points];
    buf[0..4].copy_from_slice(b"LASF");
    buf[6..8].copy_from_slice(&0x0010u16.to_le_bytes());
    buf[24] = 1;
    buf[25] = 4;
    put_name(&mut buf[26..58], "mstree");
    put_name(&mut buf[58..90], concat!("mstree ", env!("CARGO_PKG_VERSION")));
    buf[94..96].copy_from_slice(&(HEADER_LEN_14 as u16).to_le_bytes());
    buf[96..100].copy_from_slice(&(offset_to_points as u32).to_le_bytes());
    buf[100..104].copy_from_slice(&1u32.to_le_bytes());
    buf[104] = 6;
    buf[105..107].copy_from_slice(&(record_len as u16).to_le_bytes());
    for a in 0..3 {
        buf[131 + 8 * a..139 + 8 * a].copy_from_slice(&scale[a].to_le_bytes());
        buf[155 + 8 * a..163 + 8 * a].copy_from_slice(&offset[a].to_le_bytes());
        buf[179 + 16 * a..187 + 16 * a].copy_from_slice(&hi[a].to_le_bytes());
        buf[187 + 16 * a..195 + 16 * a].copy_from_slice(&lo[a].to_le_bytes());
    }
    buf[247..255].copy_from_slice(&(n as u64).to_le_bytes());
    buf[255..263].copy_from_slice(&(n as u64).to_le_bytes());

    let vlr = HEADER_LEN_14;
    put_name(&mut buf[vlr + 2..vlr + 18], "LASF_Spec");
    buf[vlr + 18..vlr + 20].copy_from_slice(&4u16.to_le_bytes());
    buf[vlr + 20..vlr + 22].copy_from_slice(&((attrs.len() * EXTRA_BYTES_DESCRIPTOR_LEN) as u16).to_le_bytes());
    put_name(&mut buf[vlr + 22..vlr + 54], "extra bytes");
    for (k, a) in attrs.iter().enumerate() {
        let d = vlr + VLR_HEADER_LEN + k * EXTRA_BYTES_DESCRIPTOR_LEN;
        buf[d + 2] = a.kind.code();
        put_name(&mut buf[d + 4..d + 36], a.name);
    }

    buf.reserve(n * record_len);
    let mut rec = vec![0u8; record_len];
    for i in 0..n {
        rec.iter_mut().for_each(|b| *b = 0);
        let p = cloud.position(i);
        for a in 0..3 {
            let q = ((p[a] - offset[a]) / scale[a]).round() as i32;
            rec[4 * a..4 * a + 4].copy_from_slice(&q.to_le_bytes());
        }
        rec[14] = 0x11;
        rec[15] = cloud.channel[i].code() << 4;
        rec[16] = match &opts.classification {
            Some(c) => c[i],
            None => cloud.label[i].code(),
        };
        let mut at = BASE_RECORD_LEN[6];
        for a in &attrs {
            match a.kind {
                ExtraType::F32 => rec[at..at + 4].copy_from_slice(&a.f32_values.unwrap()[i].to_le_bytes()),
                ExtraType::U8 => rec[at] = a.u8_values.unwrap()[i],
                _ => unreachable!(),
            }
            at += a.kind.size();
        }
        buf.extend_from_slice(&rec);
    }
    Ok(buf)
}

fn put_name(dst: &mut [u8], name: &str) {
    let b = name.as_bytes();
    let len = b.len().min(dst.len());
    dst[..len].copy_from_slice(&b[..len]);
}

pub fn write_las(cloud: &PointCloud, path: impl AsRef<Path>, opts: &LasWriteOptions) -> Result<()> {
    fs::write(path, encode_las(cloud, opts)?)?;
    Ok(())
}
