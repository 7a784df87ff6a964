//! Little-endian named-array container.
//!
//! ```text
//! magic    4 bytes  "RPRI"
//! version  u32      1
//! count    u32      number of arrays
//! per array:
//!   name_len u16, name (UTF-8)
//!   dtype    u8     1 = f32, 2 = u8
//!   ndim     u8
//!   dims     u64 x ndim
//!   payload  product(dims) x dtype size, row-major
//! ```
//!
//! Decoding is strict: any byte beyond the last array is an error, so a file
//! that decodes re-encodes to the same bytes.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"RPRI";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated {what}: need {needed} bytes at offset {offset}, {available} available")]
    TruncatedPayload {
        what: &'static str,
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("duplicate array name '{0}'")]
    DuplicateName(String),
    #[error("unknown dtype code {0}")]
    BadDtype(u8),
    #[error("dimensions of array '{0}' overflow the addressable size")]
    DimOverflow(String),
    #[error("array name is not valid UTF-8")]
    InvalidName,
    #[error("array name of {0} bytes exceeds the u16 length field")]
    NameTooLong(usize),
    #[error("{0} trailing bytes after the last array")]
    TrailingBytes(usize),
    #[error("array '{name}': {reason}")]
    BadArray { name: String, reason: String },
    #[error("missing array '{0}'")]
    MissingArray(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    F32 = 1,
    U8 = 2,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::U8 => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self, ContainerError> {
        match code {
            1 => Ok(DType::F32),
            2 => Ok(DType::U8),
            other => Err(ContainerError::BadDtype(other)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArrayData {
    F32(Vec<f32>),
    U8(Vec<u8>),
}

impl ArrayData {
    pub fn dtype(&self) -> DType {
        match self {
            ArrayData::F32(_) => DType::F32,
            ArrayData::U8(_) => DType::U8,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ArrayData::F32(v) => v.len(),
            ArrayData::U8(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    name: String,
    dims: Vec<u64>,
    data: ArrayData,
}

impl NamedArray {
    pub fn new(name: impl Into<String>, dims: Vec<u64>, data: ArrayData) -> Result<Self, ContainerError> {
        let name = name.into();
        if name.len() > u16::MAX as usize {
            return Err(ContainerError::NameTooLong(name.len()));
        }
        if dims.len() > u8::MAX as usize {
            return Err(ContainerError::BadArray {
                name,
                reason: format!("{} dimensions exceed the u8 field", dims.len()),
            });
        }
        let count = element_count(&dims).ok_or_else(|| ContainerError::DimOverflow(name.clone()))?;
        if count != data.len() {
            return Err(ContainerError::BadArray {
                name,
                reason: format!("dims imply {count} elements, data has {}", data.len()),
            });
        }
        Ok(Self { name, dims, data })
    }

    pub fn f32(name: &str, dims: &[usize], data: Vec<f32>) -> Result<Self, ContainerError> {
        Self::new(name, dims.iter().map(|&d| d as u64).collect(), ArrayData::F32(data))
    }

    pub fn u8(name: &str, dims: &[usize], data: Vec<u8>) -> Result<Self, ContainerError> {
        Self::new(name, dims.iter().map(|&d| d as u64).collect(), ArrayData::U8(data))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dims(&self) -> &[u64] {
        &self.dims
    }

    pub fn data(&self) -> &ArrayData {
        &self.data
    }

    pub fn as_f32(&self) -> Result<&[f32], ContainerError> {
        match &self.data {
            ArrayData::F32(v) => Ok(v),
            _ => Err(self.wrong_type("f32")),
        }
    }

    pub fn as_u8(&self) -> Result<&[u8], ContainerError> {
        match &self.data {
            ArrayData::U8(v) => Ok(v),
            _ => Err(self.wrong_type("u8")),
        }
    }

    fn wrong_type(&self, expected: &str) -> ContainerError {
        ContainerError::BadArray {
            name: self.name.clone(),
            reason: format!("expected dtype {expected}, found {:?}", self.data.dtype()),
        }
    }
}

fn element_count(dims: &[u64]) -> Option<usize> {
    dims.iter()
        .try_fold(1u64, |acc, &d| acc.checked_mul(d))
        .and_then(|n| usize::try_from(n).ok())
}

/// Ordered list of uniquely named arrays.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContainerFile {
    arrays: Vec<NamedArray>,
}

impl ContainerFile {
    pub fn new(arrays: Vec<NamedArray>) -> Result<Self, ContainerError> {
        let mut file = Self::default();
        for a in arrays {
            file.push(a)?;
        }
        Ok(file)
    }

    pub fn push(&mut self, array: NamedArray) -> Result<(), ContainerError> {
        if self.get(array.name()).is_some() {
            return Err(ContainerError::DuplicateName(array.name));
        }
        self.arrays.push(array);
        Ok(())
    }

    pub fn arrays(&self) -> &[NamedArray] {
        &self.arrays
    }

    pub fn get(&self, name: &str) -> Option<&NamedArray> {
        self.arrays.iter().find(|a| a.name == name)
    }

    pub fn require(&self, name: &str) -> Result<&NamedArray, ContainerError> {
        self.get(name)
            .ok_or_else(|| ContainerError::MissingArray(name.to_string()))
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.arrays.len() as u32).to_le_bytes());
        for a in &self.arrays {
            out.extend_from_slice(&(a.name.len() as u16).to_le_bytes());
            out.extend_from_slice(a.name.as_bytes());
            out.push(a.data.dtype() as u8);
            out.push(a.dims.len() as u8);
            for d in &a.dims {
                out.extend_from_slice(&d.to_le_bytes());
            }
            match &a.data {
                ArrayData::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
                ArrayData::U8(v) => out.extend_from_slice(v),
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ContainerError> {
        let mut r = ByteReader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4, "magic")?.try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(ContainerError::BadMagic(magic));
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(ContainerError::UnsupportedVersion(version));
        }
        let count = r.u32("array count")?;
        let mut file = ContainerFile::default();
        for _ in 0..count {
            let name_len = r.u16("name length")? as usize;
            let name = std::str::from_utf8(r.take(name_len, "name")?)
                .map_err(|_| ContainerError::InvalidName)?
                .to_string();
            let dtype = DType::from_code(r.u8("dtype")?)?;
            let ndim = r.u8("ndim")? as usize;
            let dims = (0..ndim)
                .map(|_| r.u64("dims"))
                .collect::<Result<Vec<_>, _>>()?;
            let nbytes = element_count(&dims)
                .and_then(|n| n.checked_mul(dtype.size()))
                .ok_or_else(|| ContainerError::DimOverflow(name.clone()))?;
            let payload = r.take(nbytes, "payload")?;
            let data = match dtype {
                DType::F32 => ArrayData::F32(
                    payload
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                        .collect(),
                ),
                DType::U8 => ArrayData::U8(payload.to_vec()),
            };
            file.push(NamedArray { name, dims, data })?;
        }
        if r.pos != bytes.len() {
            return Err(ContainerError::TrailingBytes(bytes.len() - r.pos));
        }
        Ok(file)
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], ContainerError> {
        let available = self.bytes.len() - self.pos;
        if n > available {
            return Err(ContainerError::TruncatedPayload {
                what,
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, ContainerError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, ContainerError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, ContainerError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self, what: &'static str) -> Result<u64, ContainerError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }
}

/// Writes atomically: the bytes go to a sibling temp file which is renamed
/// over `path`.
pub fn write_container(path: impl AsRef<Path>, file: &ContainerFile) -> Result<(), ContainerError> {
    write_atomic(path.as_ref(), &file.encode())?;
    Ok(())
}

pub fn read_container(path: impl AsRef<Path>) -> Result<ContainerFile, ContainerError> {
    ContainerFile::decode(&fs::read(path)?)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{file_name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}
