//! Point and weight files.
//!
//! * XYZ text: one `x y z` line per point, LF endings, coordinates written
//!   with Rust's shortest round-trip formatting. Blank lines are skipped.
//! * PCF1 binary: `b"PCF1"`, `u32` LE point count `N`, then `3N` `f32` LE.
//! * PWT1 binary weights: `b"PWT1"`, `u32` LE tensor count, then per
//!   tensor a `u16` LE name length, the UTF-8 name, a `u8` rank, `rank`
//!   `u32` LE dimensions and the row-major `f32` LE values.
//!
//! Values are `f64` in memory and `f32` on disk for the binary formats.

use std::fs;
use std::path::Path;

use crate::cloud::{Point3, PointCloud};
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::nn::{Tensor, WeightStore};

pub const PCF_MAGIC: &[u8; 4] = b"PCF1";
pub const PWT_MAGIC: &[u8; 4] = b"PWT1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Xyz,
    Pcf,
}

impl CloudFormat {
    /// `.pcf` selects PCF1; anything else is XYZ.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("pcf") => CloudFormat::Pcf,
            _ => CloudFormat::Xyz,
        }
    }
}

fn with_path(path: &Path, e: std::io::Error) -> Error {
    Error::Io(std::io::Error::new(
        e.kind(),
        format!("{}: {e}", path.display()),
    ))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| with_path(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| with_path(path, e))
}

pub fn format_xyz(cloud: &PointCloud) -> String {
    let mut s = String::with_capacity(cloud.len() * 48);
    for p in cloud {
        s.push_str(&format!("{} {} {}\n", p[0], p[1], p[2]));
    }
    s
}

pub fn parse_xyz(text: &str) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let at = || format!("line {}", n + 1);
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 3 {
            return Err(Error::parse(
                at(),
                format!("expected 3 values, found {}", tokens.len()),
            ));
        }
        let mut p = [0.0; 3];
        for (v, tok) in p.iter_mut().zip(&tokens) {
            *v = tok
                .parse::<f64>()
                .map_err(|_| Error::parse(at(), format!("`{tok}` is not a number")))?;
            if !v.is_finite() {
                return Err(Error::parse(at(), format!("`{tok}` is not finite")));
            }
        }
        points.push(p);
    }
    PointCloud::new(points)
}

pub fn encode_pcf(cloud: &PointCloud) -> Result<Vec<u8>> {
    let count =
        u32::try_from(cloud.len()).map_err(|_| Error::invalid("too many points for PCF1"))?;
    let mut out = Vec::with_capacity(8 + 12 * cloud.len());
    out.extend_from_slice(PCF_MAGIC);
    out.extend_from_slice(&count.to_le_bytes());
    for p in cloud {
        for &c in p {
            let v = c as f32;
            if !v.is_finite() {
                return Err(Error::invalid(format!("coordinate {c} overflows f32")));
            }
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Little-endian cursor that reports failures with byte offsets.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::parse(
                format!("byte {}", self.pos),
                format!(
                    "truncated {what}: need {n} bytes, {} left",
                    self.bytes.len() - self.pos
                ),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn magic(&mut self, magic: &[u8; 4]) -> Result<()> {
        let got = self.take(4, "magic")?;
        if got != magic {
            return Err(Error::parse(
                "byte 0",
                format!(
                    "bad magic {got:?}, expected {:?}",
                    std::str::from_utf8(magic).unwrap()
                ),
            ));
        }
        Ok(())
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let start = self.pos;
        let raw = self.take(n.checked_mul(4).unwrap_or(usize::MAX), what)?;
        raw.chunks_exact(4)
            .enumerate()
            .map(|(i, c)| {
                let v = f32::from_le_bytes(c.try_into().unwrap());
                if v.is_finite() {
                    Ok(v as f64)
                } else {
                    Err(Error::parse(
                        format!("byte {}", start + 4 * i),
                        "non-finite value",
                    ))
                }
            })
            .collect()
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::parse(
                format!("byte {}", self.pos),
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}

pub fn decode_pcf(bytes: &[u8]) -> Result<PointCloud> {
    let mut r = Reader::new(bytes);
    r.magic(PCF_MAGIC)?;
    let n = r.u32("point count")? as usize;
    let values = r.f32s(3 * n, "point payload")?;
    r.finish()?;
    let points: Vec<Point3> = values.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
    PointCloud::new(points)
}

/// Reads a cloud, detecting PCF1 by its magic bytes.
pub fn read_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let bytes = read_file(path.as_ref())?;
    if bytes.starts_with(PCF_MAGIC) {
        return decode_pcf(&bytes);
    }
    let text = std::str::from_utf8(&bytes).map_err(|e| {
        Error::parse(
            format!("byte {}", e.valid_up_to()),
            "not UTF-8 text and not PCF1",
        )
    })?;
    parse_xyz(text)
}

pub fn write_cloud(path: impl AsRef<Path>, cloud: &PointCloud, format: CloudFormat) -> Result<()> {
    let bytes = match format {
        CloudFormat::Xyz => format_xyz(cloud).into_bytes(),
        CloudFormat::Pcf => encode_pcf(cloud)?,
    };
    write_file(path.as_ref(), &bytes)
}

pub fn encode_weights(store: &WeightStore) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(PWT_MAGIC);
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    for (name, t) in store.iter() {
        let len = u16::try_from(name.len()).map_err(|_| Error::tensor(name, "name too long"))?;
        let rank =
            u8::try_from(t.shape().len()).map_err(|_| Error::tensor(name, "rank too large"))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(rank);
        for &d in t.shape() {
            let d = u32::try_from(d).map_err(|_| Error::tensor(name, "dimension too large"))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_weights(bytes: &[u8]) -> Result<WeightStore> {
    let mut r = Reader::new(bytes);
    r.magic(PWT_MAGIC)?;
    let count = r.u32("tensor count")?;
    let mut store = WeightStore::new();
    for _ in 0..count {
        let at = r.pos;
        let len = r.u16("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "tensor name")?)
            .map_err(|_| Error::parse(format!("byte {}", at + 2), "tensor name is not UTF-8"))?
            .to_string();
        let rank = r.u8("rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("dimension")? as usize);
        }
        let n = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        let n = n.ok_or_else(|| Error::tensor(&name, "shape overflows"))?;
        let data = r.f32s(n, &format!("data of `{name}`"))?;
        let t = Tensor::new(shape, data).map_err(|e| Error::tensor(&name, e.to_string()))?;
        if store.get(&name).is_ok() {
            return Err(Error::tensor(name, "duplicate tensor"));
        }
        store.insert(name, t);
    }
    r.finish()?;
    Ok(store)
}

pub fn write_weights(path: impl AsRef<Path>, store: &WeightStore) -> Result<()> {
    write_file(path.as_ref(), &encode_weights(store)?)
}

/// Reads a weight file without checking it against a config.
pub fn read_weights(path: impl AsRef<Path>) -> Result<WeightStore> {
    decode_weights(&read_file(path.as_ref())?)
}

/// Reads a weight file and checks every tensor `cfg` needs.
pub fn load_weights(path: impl AsRef<Path>, cfg: &ModelConfig) -> Result<WeightStore> {
    let store = read_weights(path)?;
    store.validate(cfg)?;
    Ok(store)
}

pub fn read_config(path: impl AsRef<Path>) -> Result<ModelConfig> {
    let bytes = read_file(path.as_ref())?;
    let text = std::str::from_utf8(&bytes).map_err(|_| Error::parse("config", "not UTF-8"))?;
    ModelConfig::from_toml(text)
}
