//! DFZ: a small little-endian container for depth fields and quadrature
//! stacks.
//!
//! Layout:
//!
//! ```text
//! "DPFL"            4 bytes magic
//! version           u32 (= 1)
//! header_len        u32
//! header            header_len bytes of UTF-8 JSON
//! arrays            one per name in header.arrays, in that order
//! ```
//!
//! Real-valued arrays are `f32`, masks are `u8` (0 or 1). All arrays are
//! row-major over `(u, v, x, y)`, or `(k, u, v, x, y)` for quadrature
//! frames. Values are held as `f64` in memory and narrowed to `f32` on
//! write, so a write/read cycle is bit-exact for any `f32`-representable
//! grid and idempotent after the first cycle otherwise.

use std::fs;
use std::io;
use std::path::Path;

use ndarray::{Array4, Array5};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::CameraArrayConfig;
use crate::field::{DepthField, QuadratureStack};

pub const MAGIC: [u8; 4] = *b"DPFL";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DfzError {
    #[error("bad magic {0:?}, expected \"DPFL\"")]
    BadMagic([u8; 4]),
    #[error("unsupported DFZ version {0}, expected {VERSION}")]
    UnsupportedVersion(u32),
    #[error("truncated {what}: need {expected} bytes, have {available}")]
    Truncated { what: String, expected: usize, available: usize },
    #[error("inconsistent header: {0}")]
    Header(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    #[serde(rename = "depthfield")]
    DepthField,
    Quadrature,
}

/// The JSON header, field order as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub kind: Kind,
    pub nu: usize,
    pub nv: usize,
    pub nx: usize,
    pub ny: usize,
    pub f_mod_hz: f64,
    pub baseline_u_m: f64,
    pub baseline_v_m: f64,
    pub focal_length_m: f64,
    pub pixel_pitch_m: f64,
    pub c_mps: f64,
    pub wrapped: bool,
    pub arrays: Vec<String>,
}

impl Header {
    fn from_config(kind: Kind, c: &CameraArrayConfig, wrapped: bool, arrays: Vec<String>) -> Self {
        Self {
            kind,
            nu: c.nu,
            nv: c.nv,
            nx: c.nx,
            ny: c.ny,
            f_mod_hz: c.f_mod,
            baseline_u_m: c.baseline_u,
            baseline_v_m: c.baseline_v,
            focal_length_m: c.focal_length,
            pixel_pitch_m: c.pixel_pitch,
            c_mps: c.c,
            wrapped,
            arrays,
        }
    }

    pub fn config(&self) -> CameraArrayConfig {
        CameraArrayConfig {
            nu: self.nu,
            nv: self.nv,
            baseline_u: self.baseline_u_m,
            baseline_v: self.baseline_v_m,
            nx: self.nx,
            ny: self.ny,
            focal_length: self.focal_length_m,
            pixel_pitch: self.pixel_pitch_m,
            f_mod: self.f_mod_hz,
            c: self.c_mps,
        }
    }
}

/// Anything a DFZ file can hold.
#[derive(Debug, Clone, PartialEq)]
pub enum Dfz {
    Field(DepthField),
    Quadrature(QuadratureStack),
}

impl Dfz {
    pub fn into_field(self) -> Result<DepthField, DfzError> {
        match self {
            Dfz::Field(f) => Ok(f),
            Dfz::Quadrature(_) => Err(DfzError::Header("expected a depthfield, found quadrature".into())),
        }
    }

    pub fn into_quadrature(self) -> Result<QuadratureStack, DfzError> {
        match self {
            Dfz::Quadrature(q) => Ok(q),
            Dfz::Field(_) => Err(DfzError::Header("expected quadrature, found a depthfield".into())),
        }
    }
}

impl From<DepthField> for Dfz {
    fn from(f: DepthField) -> Self {
        Dfz::Field(f)
    }
}

impl From<QuadratureStack> for Dfz {
    fn from(q: QuadratureStack) -> Self {
        Dfz::Quadrature(q)
    }
}

#[derive(Clone, Copy)]
enum Elem {
    F32,
    U8,
}

fn array_elem(kind: Kind, name: &str) -> Option<Elem> {
    match (kind, name) {
        (Kind::DepthField, "albedo" | "phase") => Some(Elem::F32),
        (Kind::DepthField, "valid" | "low_confidence") => Some(Elem::U8),
        (Kind::Quadrature, "frames") => Some(Elem::F32),
        _ => None,
    }
}

fn required_arrays(kind: Kind) -> &'static [&'static str] {
    match kind {
        Kind::DepthField => &["albedo", "phase", "valid"],
        Kind::Quadrature => &["frames"],
    }
}

pub fn encode(object: &Dfz) -> Vec<u8> {
    let (header, payload) = match object {
        Dfz::Field(f) => {
            let mut names = vec!["albedo".to_string(), "phase".to_string(), "valid".to_string()];
            let mut payload = Vec::with_capacity(f.albedo.len() * 9);
            put_f32(&mut payload, f.albedo.iter());
            put_f32(&mut payload, f.phase.iter());
            put_u8(&mut payload, f.valid.iter());
            if let Some(flags) = &f.low_confidence {
                names.push("low_confidence".into());
                put_u8(&mut payload, flags.iter());
            }
            (Header::from_config(Kind::DepthField, &f.config, f.wrapped, names), payload)
        }
        Dfz::Quadrature(q) => {
            let mut payload = Vec::with_capacity(q.frames.len() * 4);
            put_f32(&mut payload, q.frames.iter());
            (Header::from_config(Kind::Quadrature, &q.config, false, vec!["frames".into()]), payload)
        }
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(12 + json.len() + payload.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&payload);
    out
}

fn put_f32<'a>(buf: &mut Vec<u8>, values: impl Iterator<Item = &'a f64>) {
    for v in values {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
}

fn put_u8<'a>(buf: &mut Vec<u8>, values: impl Iterator<Item = &'a bool>) {
    buf.extend(values.map(|b| *b as u8));
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], DfzError> {
        let available = self.bytes.len() - self.pos;
        if available < n {
            return Err(DfzError::Truncated { what: what.to_string(), expected: n, available });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32, DfzError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Parses only the magic, version and JSON header.
pub fn decode_header(bytes: &[u8]) -> Result<Header, DfzError> {
    let mut cur = Cursor { bytes, pos: 0 };
    decode_header_at(&mut cur)
}

fn decode_header_at(cur: &mut Cursor<'_>) -> Result<Header, DfzError> {
    let magic = cur.take(4, "magic")?;
    let magic = [magic[0], magic[1], magic[2], magic[3]];
    if magic != MAGIC {
        return Err(DfzError::BadMagic(magic));
    }
    let version = cur.u32("version")?;
    if version != VERSION {
        return Err(DfzError::UnsupportedVersion(version));
    }
    let len = cur.u32("header length")? as usize;
    let json = cur.take(len, "header")?;
    let header: Header = serde_json::from_slice(json).map_err(|e| DfzError::Header(e.to_string()))?;
    header
        .config()
        .validate()
        .map_err(|e| DfzError::Header(e.to_string()))?;
    let required = required_arrays(header.kind);
    for (i, name) in header.arrays.iter().enumerate() {
        if array_elem(header.kind, name).is_none() {
            return Err(DfzError::Header(format!("unknown array {name:?} for {:?}", header.kind)));
        }
        if header.arrays[..i].contains(name) {
            return Err(DfzError::Header(format!("array {name:?} listed twice")));
        }
    }
    if header.arrays.len() < required.len() || required.iter().zip(&header.arrays).any(|(r, a)| r != a) {
        return Err(DfzError::Header(format!("arrays must start with {required:?}, got {:?}", header.arrays)));
    }
    if header.kind == Kind::Quadrature && header.wrapped {
        return Err(DfzError::Header("quadrature stacks cannot be wrapped".into()));
    }
    Ok(header)
}

pub fn decode(bytes: &[u8]) -> Result<Dfz, DfzError> {
    let mut cur = Cursor { bytes, pos: 0 };
    let header = decode_header_at(&mut cur)?;
    let config = header.config();
    let shape = config.shape4();
    let n = config.views() * config.pixels();
    let header_err = |e: crate::error::Error| DfzError::Header(e.to_string());

    let object = match header.kind {
        Kind::DepthField => {
            let albedo = take_f32(&mut cur, n, "albedo")?;
            let phase = take_f32(&mut cur, n, "phase")?;
            let valid = take_mask(&mut cur, n, "valid")?;
            let low = if header.arrays.len() > 3 { Some(take_mask(&mut cur, n, "low_confidence")?) } else { None };
            let grid = |v: Vec<f64>| Array4::from_shape_vec(shape, v).expect("length checked");
            let mask = |v: Vec<bool>| Array4::from_shape_vec(shape, v).expect("length checked");
            let valid = mask(valid);
            let phase = grid(phase);
            if phase.iter().zip(valid.iter()).any(|(p, ok)| !ok && *p != 0.0) {
                return Err(DfzError::Header("invalid rays must carry phase 0".into()));
            }
            let mut field = DepthField::new(config, grid(albedo), phase, valid, header.wrapped).map_err(header_err)?;
            if let Some(low) = low {
                field = field.with_low_confidence(mask(low)).map_err(header_err)?;
            }
            Dfz::Field(field)
        }
        Kind::Quadrature => {
            let frames = take_f32(&mut cur, 4 * n, "frames")?;
            let frames = Array5::from_shape_vec((4, shape.0, shape.1, shape.2, shape.3), frames).expect("length checked");
            Dfz::Quadrature(QuadratureStack::new(config, frames).map_err(header_err)?)
        }
    };
    let rest = bytes.len() - cur.pos;
    if rest != 0 {
        return Err(DfzError::Header(format!("{rest} trailing bytes after declared arrays")));
    }
    Ok(object)
}

fn take_f32(cur: &mut Cursor<'_>, n: usize, what: &str) -> Result<Vec<f64>, DfzError> {
    let raw = cur.take(n * 4, what)?;
    Ok(raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect())
}

fn take_mask(cur: &mut Cursor<'_>, n: usize, what: &str) -> Result<Vec<bool>, DfzError> {
    let raw = cur.take(n, what)?;
    raw.iter()
        .map(|b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(DfzError::Header(format!("mask {what} holds byte {other}"))),
        })
        .collect()
}

pub fn write_dfz(object: &Dfz, path: impl AsRef<Path>) -> Result<(), DfzError> {
    fs::write(path, encode(object))?;
    Ok(())
}

pub fn read_dfz(path: impl AsRef<Path>) -> Result<Dfz, DfzError> {
    decode(&fs::read(path)?)
}

pub fn read_header(path: impl AsRef<Path>) -> Result<Header, DfzError> {
    decode_header(&fs::read(path)?)
}
