//! Model file format.
//!
//! ```text
//! magic "TRMLPMOD" (8) | version u8
//! section* : tag u8 | payload_len u64 | payload | crc32(payload) u32
//! ```
//!
//! Sections appear in a fixed order: header, codec, standardizer, then one
//! section per layer. All numbers are little-endian; matrices are row-major
//! `f64`. Any trailing bytes, missing section or checksum mismatch rejects the
//! whole file.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::domain::TemplateId;

use super::{ClassifierError, LabelCodec, Layer, MlpModel, Standardizer};

const MAGIC: &[u8; 8] = b"TRMLPMOD";
/// Current model file version.
pub const MODEL_FORMAT_VERSION: u8 = 1;

const TAG_HEADER: u8 = 1;
const TAG_CODEC: u8 = 2;
const TAG_STANDARDIZER: u8 = 3;
const TAG_LAYER: u8 = 4;

/// Serializes a model to bytes.
pub fn encode_model(model: &MlpModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(MODEL_FORMAT_VERSION);

    let dims = model.dims();
    let mut header = Vec::new();
    put_u32(&mut header, dims.len() as u32);
    dims.iter().for_each(|&d| put_u32(&mut header, d as u32));
    put_f64(&mut header, model.l2_alpha);
    section(&mut out, TAG_HEADER, &header);

    let mut codec = vec![model.codec.len() as u8];
    for label in model.codec.labels() {
        let name = label.as_str().as_bytes();
        codec.push(name.len() as u8);
        codec.extend_from_slice(name);
    }
    section(&mut out, TAG_CODEC, &codec);

    let s = &model.standardizer;
    let mut st = Vec::new();
    put_u32(&mut st, s.dim() as u32);
    put_f64(&mut st, s.epsilon);
    s.mean.iter().chain(s.std.iter()).for_each(|&v| put_f64(&mut st, v));
    section(&mut out, TAG_STANDARDIZER, &st);

    for (i, layer) in model.layers.iter().enumerate() {
        let mut p = Vec::with_capacity(12 + 8 * layer.param_count());
        put_u32(&mut p, i as u32);
        put_u32(&mut p, layer.fan_in() as u32);
        put_u32(&mut p, layer.fan_out() as u32);
        layer.w.iter().chain(layer.b.iter()).for_each(|&v| put_f64(&mut p, v));
        section(&mut out, TAG_LAYER, &p);
    }
    out
}

/// Writes the model to `path` via a temporary file and rename.
pub fn save_model(model: &MlpModel, path: impl AsRef<Path>) -> Result<(), ClassifierError> {
    let path = path.as_ref();
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&encode_model(model))?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<MlpModel, ClassifierError> {
    decode_model(&fs::read(path)?)
}

fn corrupt(section: &str, detail: impl Into<String>) -> ClassifierError {
    ClassifierError::Corrupt {
        section: section.to_string(),
        detail: detail.into(),
    }
}

/// Parses bytes produced by [`encode_model`].
pub fn decode_model(bytes: &[u8]) -> Result<MlpModel, ClassifierError> {
    if bytes.len() < MAGIC.len() + 1 || &bytes[..8] != MAGIC {
        return Err(corrupt("magic", "not a model file"));
    }
    if bytes[8] != MODEL_FORMAT_VERSION {
        return Err(ClassifierError::UnsupportedVersion { found: bytes[8] });
    }
    let mut sections = Sections { bytes, pos: 9 };

    let mut r = sections.next(TAG_HEADER, "header")?;
    let n = r.u32()? as usize;
    if !(2..=64).contains(&n) {
        return Err(corrupt("header", format!("{n} layer widths")));
    }
    let dims: Vec<usize> = (0..n).map(|_| r.u32().map(|d| d as usize)).collect::<Result<_, _>>()?;
    let l2_alpha = r.f64()?;
    r.finish()?;

    let mut r = sections.next(TAG_CODEC, "codec")?;
    let count = r.u8()? as usize;
    let mut labels = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u8()? as usize;
        let name = std::str::from_utf8(r.take(len)?).map_err(|_| corrupt("codec", "label is not UTF-8"))?;
        let id = TemplateId::parse_known(name).ok_or_else(|| corrupt("codec", format!("unknown label `{name}`")))?;
        labels.push(id);
    }
    r.finish()?;
    let codec = LabelCodec::new(labels.clone()).map_err(|e| corrupt("codec", e.to_string()))?;
    if codec.labels() != labels.as_slice() {
        return Err(corrupt("codec", "labels not in canonical order or repeated"));
    }

    let mut r = sections.next(TAG_STANDARDIZER, "standardizer")?;
    let dim = r.u32()? as usize;
    if dim != dims[0] {
        return Err(corrupt("standardizer", format!("width {dim}, header says {}", dims[0])));
    }
    let epsilon = r.f64()?;
    let mean = Array1::from(r.f64s(dim)?);
    let std = Array1::from(r.f64s(dim)?);
    r.finish()?;
    let standardizer = Standardizer { mean, std, epsilon };

    let mut layers = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let name = format!("layer {i}");
        let mut r = sections.next(TAG_LAYER, &name)?;
        let (idx, rows, cols) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        if idx != i || rows != dims[i] || cols != dims[i + 1] {
            return Err(corrupt(&name, format!("shape {idx}:{rows}x{cols} disagrees with header")));
        }
        let w = Array2::from_shape_vec((rows, cols), r.f64s(rows * cols)?).expect("length checked");
        let b = Array1::from(r.f64s(cols)?);
        r.finish()?;
        layers.push(Layer { w, b });
    }
    if sections.pos != bytes.len() {
        return Err(corrupt("trailer", format!("{} unexpected bytes", bytes.len() - sections.pos)));
    }

    let model = MlpModel {
        layers,
        l2_alpha,
        codec,
        standardizer,
    };
    if model.num_classes() != model.codec.len() {
        return Err(corrupt("codec", "label count disagrees with output width"));
    }
    if !model.is_finite() {
        return Err(corrupt("layers", "non-finite parameter"));
    }
    Ok(model)
}

fn section(out: &mut Vec<u8>, tag: u8, payload: &[u8]) {
    out.push(tag);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
    out.extend_from_slice(&crc32fast::hash(payload).to_le_bytes());
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

struct Sections<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Sections<'a> {
    fn next(&mut self, tag: u8, name: &str) -> Result<Reader<'a>, ClassifierError> {
        let b = self.bytes;
        if self.pos + 9 > b.len() {
            return Err(corrupt(name, "section missing or truncated"));
        }
        if b[self.pos] != tag {
            return Err(corrupt(name, format!("expected tag {tag}, found {}", b[self.pos])));
        }
        let len = u64::from_le_bytes(b[self.pos + 1..self.pos + 9].try_into().expect("8 bytes"));
        let start = self.pos + 9;
        let end = usize::try_from(len)
            .ok()
            .and_then(|l| start.checked_add(l))
            .filter(|&e| e.checked_add(4).is_some_and(|e| e <= b.len()))
            .ok_or_else(|| corrupt(name, "truncated payload"))?;
        let payload = &b[start..end];
        let crc = u32::from_le_bytes(b[end..end + 4].try_into().expect("4 bytes"));
        if crc32fast::hash(payload) != crc {
            return Err(corrupt(name, "checksum mismatch"));
        }
        self.pos = end + 4;
        Ok(Reader {
            name: name.to_string(),
            bytes: payload,
            pos: 0,
        })
    }
}

struct Reader<'a> {
    name: String,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ClassifierError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| corrupt(&self.name, "payload too short"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, ClassifierError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, ClassifierError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64, ClassifierError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, ClassifierError> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| corrupt(&self.name, "size overflow"))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn finish(self) -> Result<(), ClassifierError> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(corrupt(&self.name, "payload has trailing bytes"))
        }
    }
}
