//! On-disk cache for reference trajectories.
//!
//! File layout (little endian):
//!
//! ```text
//! magic      8 bytes   "KGLRREF\0"
//! version    u32       CACHE_FORMAT_VERSION
//! key        32 bytes  SHA-256 of the trajectory inputs
//! M          u64
//! t          f64
//! q          2M x (re f64, im f64)
//! p          2M x (re f64, im f64)
//! ```
//!
//! Files are named `<hex key>.kgref` inside the cache directory.

use std::fs;
use std::path::{Path, PathBuf};

use rustfft::num_complex::Complex;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::problem::{ProblemSpec, SpectralState};
use crate::spectral::CoeffVector;

pub const CACHE_MAGIC: &[u8; 8] = b"KGLRREF\0";
pub const CACHE_FORMAT_VERSION: u32 = 1;

/// Content hash of everything that determines a reference trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CacheKey([u8; 32]);

impl CacheKey {
    pub fn new(
        spec: &ProblemSpec<f64>,
        init: &SpectralState<f64>,
        t_final: f64,
        h_ref: f64,
    ) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(CACHE_MAGIC);
        hasher.update(CACHE_FORMAT_VERSION.to_le_bytes());
        hasher.update(spec.nonlinearity.name().as_bytes());
        hasher.update([0u8]);
        hasher.update(spec.rho.to_bits().to_le_bytes());
        hasher.update(t_final.to_bits().to_le_bytes());
        hasher.update(h_ref.to_bits().to_le_bytes());
        hasher.update((init.len() as u64).to_le_bytes());
        hasher.update(init.t.to_bits().to_le_bytes());
        for c in init.q.as_slice().iter().chain(init.p.as_slice()) {
            hasher.update(c.re.to_bits().to_le_bytes());
            hasher.update(c.im.to_bits().to_le_bytes());
        }
        CacheKey(hasher.finalize().into())
    }

    pub fn hex(&self) -> String {
        hex::encode(self.0)
    }
}

#[derive(Clone, Debug)]
pub struct ReferenceCache {
    dir: PathBuf,
}

impl ReferenceCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ReferenceCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(format!("{}.kgref", key.hex()))
    }

    /// Returns the cached state, `None` if absent.
    pub fn load(&self, key: &CacheKey) -> Result<Option<SpectralState<f64>>> {
        let path = self.path_for(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        decode(&bytes, key)
            .map(Some)
            .map_err(|reason| Error::CacheFormat { path, reason })
    }

    pub fn store(&self, key: &CacheKey, state: &SpectralState<f64>) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        let path = self.path_for(key);
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, encode(key, state))?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }
}

pub fn encode(key: &CacheKey, state: &SpectralState<f64>) -> Vec<u8> {
    let len = state.len();
    let mut out = Vec::with_capacity(60 + 32 * len);
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&key.0);
    out.extend_from_slice(&((len / 2) as u64).to_le_bytes());
    out.extend_from_slice(&state.t.to_le_bytes());
    for c in state.q.as_slice().iter().chain(state.p.as_slice()) {
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], key: &CacheKey) -> std::result::Result<SpectralState<f64>, String> {
    let mut cursor = Cursor { bytes, pos: 0 };
    if cursor.take(8)? != CACHE_MAGIC {
        return Err("bad magic header".into());
    }
    let version = u32::from_le_bytes(cursor.take(4)?.try_into().unwrap());
    if version != CACHE_FORMAT_VERSION {
        return Err(format!("unsupported format version {version}"));
    }
    if cursor.take(32)? != key.0 {
        return Err("key mismatch".into());
    }
    let half_modes =
        usize::try_from(cursor.u64()?).map_err(|_| "mode count overflow".to_string())?;
    let t = cursor.f64()?;
    let len = 2 * half_modes;
    let mut read_vec = || -> std::result::Result<CoeffVector<f64>, String> {
        (0..len)
            .map(|_| Ok(Complex::new(cursor.f64()?, cursor.f64()?)))
            .collect::<std::result::Result<Vec<_>, String>>()
            .map(CoeffVector::from_vec)
    };
    let q = read_vec()?;
    let p = read_vec()?;
    if cursor.pos != bytes.len() {
        return Err("trailing bytes".into());
    }
    Ok(SpectralState { q, p, t })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos + n;
        let slice = self.bytes.get(self.pos..end).ok_or("truncated file")?;
        self.pos = end;
        Ok(slice)
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}
