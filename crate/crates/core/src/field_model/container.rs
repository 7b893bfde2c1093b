//! Single-file container for named fields sharing one grid.
//!
//! Layout:
//! 1. 16-byte magic `ADMITREC-CONT-01`
//! 2. `u64` little-endian header length, then that many bytes of UTF-8 JSON
//!    (grid, field directory with kinds/symmetry tags/byte offsets, metadata)
//! 3. raw data blobs: little-endian IEEE-754 `f64`, complex values as
//!    `(re, im)` pairs, component-major with x3 fastest; masks as one `u8`
//!    per voxel (0 or 1)
//!
//! Byte offsets in the directory are relative to the start of the data
//! section (the first byte after the header). Round trips are bit-exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Grid3, Mask, MatrixFieldC, ScalarFieldC, Symmetry, VectorFieldC};
use crate::{Error, Result};

pub const MAGIC: &[u8; 16] = b"ADMITREC-CONT-01";
pub const FORMAT_VERSION: u32 = 1;

/// A named field as stored in a container.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldData {
    Scalar(ScalarFieldC),
    Vector(VectorFieldC),
    Matrix(MatrixFieldC),
    Mask(Mask),
}

impl FieldData {
    fn kind(&self) -> &'static str {
        match self {
            FieldData::Scalar(_) => "scalar",
            FieldData::Vector(_) => "vector",
            FieldData::Matrix(_) => "matrix",
            FieldData::Mask(_) => "mask",
        }
    }

    fn grid(&self) -> &Grid3 {
        match self {
            FieldData::Scalar(f) => f.grid(),
            FieldData::Vector(f) => f.grid(),
            FieldData::Matrix(f) => f.grid(),
            FieldData::Mask(m) => m.grid(),
        }
    }

    fn byte_len(&self, nvox: usize) -> u64 {
        match self {
            FieldData::Scalar(_) => (nvox * 2 * 8) as u64,
            FieldData::Vector(_) => (nvox * 3 * 2 * 8) as u64,
            FieldData::Matrix(_) => (nvox * 9 * 2 * 8) as u64,
            FieldData::Mask(_) => nvox as u64,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    grid: Grid3,
    fields: Vec<FieldEntry>,
    metadata: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct FieldEntry {
    name: String,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    symmetry: Option<Symmetry>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    provenance: Option<String>,
    offset: u64,
    len_bytes: u64,
}

/// Named fields plus free-form metadata, all on one grid.
#[derive(Debug, Clone)]
pub struct Container {
    grid: Grid3,
    entries: Vec<(String, FieldData)>,
    pub metadata: serde_json::Value,
}

impl Container {
    pub fn new(grid: Grid3) -> Self {
        Self {
            grid,
            entries: Vec::new(),
            metadata: serde_json::Value::Null,
        }
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn push(&mut self, name: impl Into<String>, data: FieldData) -> Result<()> {
        let name = name.into();
        if data.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        if self.entries.iter().any(|(n, _)| *n == name) {
            return Err(Error::DuplicateField(name));
        }
        self.entries.push((name, data));
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&FieldData> {
        self.entries
            .iter()
            .find_map(|(n, d)| (n == name).then_some(d))
    }

    pub fn get_vector(&self, name: &str) -> Result<&VectorFieldC> {
        match self.get(name) {
            Some(FieldData::Vector(v)) => Ok(v),
            Some(_) => Err(Error::Format(format!("field {name:?} is not a vector"))),
            None => Err(Error::Format(format!("missing field {name:?}"))),
        }
    }

    pub fn get_scalar(&self, name: &str) -> Result<&ScalarFieldC> {
        match self.get(name) {
            Some(FieldData::Scalar(v)) => Ok(v),
            Some(_) => Err(Error::Format(format!("field {name:?} is not a scalar"))),
            None => Err(Error::Format(format!("missing field {name:?}"))),
        }
    }

    pub fn get_matrix(&self, name: &str) -> Result<&MatrixFieldC> {
        match self.get(name) {
            Some(FieldData::Matrix(v)) => Ok(v),
            Some(_) => Err(Error::Format(format!("field {name:?} is not a matrix"))),
            None => Err(Error::Format(format!("missing field {name:?}"))),
        }
    }

    pub fn get_mask(&self, name: &str) -> Result<&Mask> {
        match self.get(name) {
            Some(FieldData::Mask(v)) => Ok(v),
            Some(_) => Err(Error::Format(format!("field {name:?} is not a mask"))),
            None => Err(Error::Format(format!("missing field {name:?}"))),
        }
    }

    pub fn entries(&self) -> &[(String, FieldData)] {
        &self.entries
    }

    /// Serializes to `path` atomically (temp file in the same directory,
    /// then rename).
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let nvox = self.grid.len();

        let mut offset = 0u64;
        let mut dir = Vec::with_capacity(self.entries.len());
        for (name, data) in &self.entries {
            let len_bytes = data.byte_len(nvox);
            let provenance = match data {
                FieldData::Mask(m) => Some(m.provenance().to_string()),
                _ => None,
            };
            dir.push(FieldEntry {
                name: name.clone(),
                kind: data.kind().to_string(),
                symmetry: match data {
                    FieldData::Matrix(m) => Some(m.symmetry()),
                    _ => None,
                },
                provenance,
                offset,
                len_bytes,
            });
            offset += len_bytes;
        }
        let header = Header {
            version: FORMAT_VERSION,
            grid: self.grid.clone(),
            fields: dir,
            metadata: self.metadata.clone(),
        };
        let header_json = serde_json::to_vec(&header)
            .map_err(|e| Error::Format(format!("header serialization: {e}")))?;

        let mut buf = Vec::with_capacity(24 + header_json.len() + offset as usize);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
        buf.extend_from_slice(&header_json);
        for (_, data) in &self.entries {
            match data {
                FieldData::Scalar(f) => write_complex(&mut buf, f.values()),
                FieldData::Vector(f) => write_complex(&mut buf, f.values()),
                FieldData::Matrix(f) => write_complex(&mut buf, f.values()),
                FieldData::Mask(m) => buf.extend(m.flags().iter().map(|&b| b as u8)),
            }
        }

        let dir_path = path.parent().unwrap_or_else(|| Path::new("."));
        fs::create_dir_all(dir_path)?;
        let mut tmp = tempfile_in(dir_path)?;
        tmp.1.write_all(&buf)?;
        tmp.1.flush()?;
        drop(tmp.1);
        fs::rename(&tmp.0, path)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let bytes = fs::read(path.as_ref())?;
        if bytes.len() < 24 || &bytes[..16] != MAGIC {
            return Err(Error::Format("bad magic or truncated file".into()));
        }
        let header_len = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
        let data_start = 24 + header_len;
        if bytes.len() < data_start {
            return Err(Error::Format("truncated header".into()));
        }
        let header: Header = serde_json::from_slice(&bytes[24..data_start])
            .map_err(|e| Error::Format(format!("header parse: {e}")))?;
        if header.version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unknown format version {}",
                header.version
            )));
        }
        let grid = Grid3::new(header.grid.dims(), header.grid.spacing(), header.grid.origin())?;
        let nvox = grid.len();
        let data = &bytes[data_start..];

        let mut out = Container::new(grid.clone());
        out.metadata = header.metadata;
        for entry in header.fields {
            let start = entry.offset as usize;
            let end = start
                .checked_add(entry.len_bytes as usize)
                .ok_or_else(|| Error::Format("offset overflow".into()))?;
            if end > data.len() {
                return Err(Error::Format(format!(
                    "field {:?}: blob [{start}, {end}) exceeds data section of {} bytes",
                    entry.name,
                    data.len()
                )));
            }
            let blob = &data[start..end];
            let field = match entry.kind.as_str() {
                "scalar" => {
                    expect_len(&entry, blob.len(), nvox * 16)?;
                    FieldData::Scalar(ScalarFieldC::from_values(grid.clone(), read_complex(blob))?)
                }
                "vector" => {
                    expect_len(&entry, blob.len(), nvox * 48)?;
                    FieldData::Vector(VectorFieldC::from_values(grid.clone(), read_complex(blob))?)
                }
                "matrix" => {
                    expect_len(&entry, blob.len(), nvox * 144)?;
                    let symmetry = entry.symmetry.unwrap_or(Symmetry::General);
                    FieldData::Matrix(MatrixFieldC::from_values(
                        grid.clone(),
                        read_complex(blob),
                        symmetry,
                    )?)
                }
                "mask" => {
                    expect_len(&entry, blob.len(), nvox)?;
                    let mut flags = Vec::with_capacity(nvox);
                    for &b in blob {
                        match b {
                            0 => flags.push(false),
                            1 => flags.push(true),
                            _ => {
                                return Err(Error::Format(format!(
                                    "mask {:?}: invalid byte {b}",
                                    entry.name
                                )))
                            }
                        }
                    }
                    FieldData::Mask(Mask::from_flags(
                        grid.clone(),
                        flags,
                        entry.provenance.clone().unwrap_or_default(),
                    )?)
                }
                other => return Err(Error::Format(format!("unknown field kind {other:?}"))),
            };
            out.push(entry.name, field)?;
        }
        Ok(out)
    }
}

fn expect_len(entry: &FieldEntry, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Format(format!(
            "field {:?}: blob length {got} does not match expected {want}",
            entry.name
        )));
    }
    Ok(())
}

fn write_complex(buf: &mut Vec<u8>, values: &[Complex64]) {
    for v in values {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
}

fn read_complex(blob: &[u8]) -> Vec<Complex64> {
    blob.chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[0..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..16].try_into().unwrap()),
            )
        })
        .collect()
}

fn tempfile_in(dir: &Path) -> Result<(std::path::PathBuf, fs::File)> {
    use std::time::{SystemTime, UNIX_EPOCH};
    let nanos = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.subsec_nanos())
        .unwrap_or(0);
    let pid = std::process::id();
    for attempt in 0..100u32 {
        let cand = dir.join(format!(".admitrec-tmp-{pid}-{nanos}-{attempt}"));
        match fs::OpenOptions::new().write(true).create_new(true).open(&cand) {
            Ok(f) => return Ok((cand, f)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(Error::Format("could not create temp file".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::CVec3;

    fn grid() -> Grid3 {
        Grid3::new([5, 6, 7], [0.1, 0.2, 0.3], [0.0, -1.0, 2.0]).unwrap()
    }

    #[test]
    fn zero_vector_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.cont");
        let mut c = Container::new(grid());
        c.push("v", FieldData::Vector(VectorFieldC::zeros(grid()))).unwrap();
        c.write(&path).unwrap();
        let c2 = Container::read(&path).unwrap();
        assert_eq!(c2.get_vector("v").unwrap(), c.get_vector("v").unwrap());
        // rewrite must reproduce identical bytes
        let path2 = dir.path().join("z2.cont");
        c2.write(&path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn truncated_blob_is_length_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.cont");
        let mut c = Container::new(grid());
        c.push("v", FieldData::Vector(VectorFieldC::zeros(grid()))).unwrap();
        c.write(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        let err = Container::read(&path).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
    }

    #[test]
    fn unknown_version_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.cont");
        let c = Container::new(grid());
        c.write(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // bump "version":1 in the JSON header
        let pos = bytes.windows(11).position(|w| w == b"\"version\":1").unwrap();
        bytes[pos + 10] = b'9';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(Container::read(&path), Err(Error::Format(_))));
    }

    #[test]
    fn mixed_fields_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.cont");
        let g = grid();
        let mut c = Container::new(g.clone());
        c.metadata = serde_json::json!({"omega": 1.5, "note": "test"});
        let s = ScalarFieldC::from_fn(g.clone(), |x| Complex64::new(x[0], x[1] * x[2]));
        let v = VectorFieldC::from_fn(g.clone(), |x| {
            CVec3::new(
                Complex64::new(x[0], 1.0),
                Complex64::new(x[1], -1.0),
                Complex64::new(x[2], 0.5),
            )
        });
        let m = Mask::interior(g.clone(), 1).unwrap();
        c.push("s", FieldData::Scalar(s.clone())).unwrap();
        c.push("v", FieldData::Vector(v.clone())).unwrap();
        c.push("valid", FieldData::Mask(m.clone())).unwrap();
        c.write(&path).unwrap();
        let c2 = Container::read(&path).unwrap();
        assert_eq!(c2.get_scalar("s").unwrap(), &s);
        assert_eq!(c2.get_vector("v").unwrap(), &v);
        assert_eq!(c2.get_mask("valid").unwrap().flags(), m.flags());
        assert_eq!(c2.get_mask("valid").unwrap().provenance(), m.provenance());
        assert_eq!(c2.metadata["omega"], serde_json::json!(1.5));
    }

    #[test]
    fn grid_mismatch_rejected_on_push() {
        let mut c = Container::new(grid());
        let other = Grid3::unit_cube(5).unwrap();
        let err = c.push("v", FieldData::Vector(VectorFieldC::zeros(other))).unwrap_err();
        assert!(matches!(err, Error::GridMismatch));
    }
}
