//! Shared, thread-safe cache of spectral decompositions.
//!
//! Entries are keyed by `(2J, Λ)` with Λ rounded to 12 significant digits.
//! When a directory is configured, decompositions are also persisted there
//! as binary records:
//!
//! ```text
//! offset  size  field
//! 0       8     magic  b"LMGDECMP"
//! 8       4     format version (u32, currently 1)
//! 12      4     2J (u32)
//! 16      8     Λ (f64)
//! 24      4     even sector size n₊ (u32)
//! 28      4     odd sector size n₋ (u32)
//! 32      ...   n₊ even eigenvalues, n₊·n₊ even eigenvectors (column-major),
//!               n₋ odd eigenvalues, n₋·n₋ odd eigenvectors (column-major)
//! ```
//!
//! All integers and floats are little-endian. Doublet pairing is derived on
//! load, not stored.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use crate::spectral::{eigensolve, HamiltonianParams, Sector, SpectralDecomposition};
use crate::spin::{Parity, SpinBasis};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"LMGDECMP";
pub const FORMAT_VERSION: u32 = 1;
/// Environment variable naming the on-disk cache directory.
pub const CACHE_DIR_ENV: &str = "LMG_CACHE_DIR";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    pub two_j: u32,
    pub lambda: String,
}

impl CacheKey {
    pub fn new(basis: SpinBasis, lambda: f64) -> Self {
        Self {
            two_j: basis.two_j(),
            lambda: format!("{lambda:.11e}"),
        }
    }

    fn file_name(&self) -> String {
        format!("lmg_2j{}_lambda{}.bin", self.two_j, self.lambda)
    }
}

#[derive(Debug, Default)]
pub struct DecompositionCache {
    entries: RwLock<HashMap<CacheKey, Arc<SpectralDecomposition>>>,
    dir: Option<PathBuf>,
}

impl DecompositionCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> Self {
        Self {
            entries: RwLock::default(),
            dir: Some(dir.into()),
        }
    }

    /// Uses `$LMG_CACHE_DIR` when set.
    pub fn from_env() -> Self {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(dir) if !dir.is_empty() => Self::with_dir(dir),
            _ => Self::in_memory(),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, params: &HamiltonianParams) -> Option<Arc<SpectralDecomposition>> {
        let key = CacheKey::new(params.basis(), params.lambda());
        self.entries.read().expect("cache lock").get(&key).cloned()
    }

    pub fn get_or_compute(&self, params: &HamiltonianParams) -> Result<Arc<SpectralDecomposition>> {
        let key = CacheKey::new(params.basis(), params.lambda());
        if let Some(hit) = self.entries.read().expect("cache lock").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let dec = match self.load_from_disk(&key, params)? {
            Some(dec) => dec,
            None => {
                let dec = eigensolve(params)?;
                if let Some(dir) = &self.dir {
                    fs::create_dir_all(dir)?;
                    write_atomic(&dir.join(key.file_name()), &encode(&dec))?;
                }
                dec
            }
        };
        let mut map = self.entries.write().expect("cache lock");
        Ok(Arc::clone(map.entry(key).or_insert_with(|| Arc::new(dec))))
    }

    fn load_from_disk(
        &self,
        key: &CacheKey,
        params: &HamiltonianParams,
    ) -> Result<Option<SpectralDecomposition>> {
        let Some(dir) = &self.dir else {
            return Ok(None);
        };
        let path = dir.join(key.file_name());
        match fs::read(&path) {
            Ok(bytes) => decode(&bytes, &path, Some(params)).map(Some),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn encode(dec: &SpectralDecomposition) -> Vec<u8> {
    let even = dec.sector(Parity::Even);
    let odd = dec.sector(Parity::Odd);
    let floats = even.dim() * (even.dim() + 1) + odd.dim() * (odd.dim() + 1);
    let mut out = Vec::with_capacity(32 + 8 * floats);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&dec.basis().two_j().to_le_bytes());
    out.extend_from_slice(&dec.lambda().to_le_bytes());
    out.extend_from_slice(&(even.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(odd.dim() as u32).to_le_bytes());
    for sector in [even, odd] {
        for x in sector.energies.iter().chain(&sector.vectors) {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

/// Parses a record; when `expect` is given the header must match it.
pub fn decode(
    bytes: &[u8],
    path: &Path,
    expect: Option<&HamiltonianParams>,
) -> Result<SpectralDecomposition> {
    let bad = |reason: &str| Error::CacheFormat {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    if bytes.len() < 32 || &bytes[..8] != MAGIC {
        return Err(bad("missing magic header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let version = u32_at(8);
    if version != FORMAT_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let two_j = u32_at(12);
    let lambda = f64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes"));
    let n_even = u32_at(24) as usize;
    let n_odd = u32_at(28) as usize;
    let basis = SpinBasis::from_two_j(two_j);
    if let Some(p) = expect {
        if p.basis() != basis || CacheKey::new(basis, lambda) != CacheKey::new(p.basis(), p.lambda()) {
            return Err(bad("header does not match the requested parameters"));
        }
    }
    if n_even != basis.sector_dim(Parity::Even) || n_odd != basis.sector_dim(Parity::Odd) {
        return Err(bad("sector sizes inconsistent with 2J"));
    }
    let want = 32 + 8 * (n_even * (n_even + 1) + n_odd * (n_odd + 1));
    if bytes.len() != want {
        return Err(bad(&format!("expected {want} bytes, found {}", bytes.len())));
    }
    let mut floats = bytes[32..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut sector = |parity: Parity, n: usize| Sector {
        parity,
        energies: floats.by_ref().take(n).collect(),
        vectors: floats.by_ref().take(n * n).collect(),
    };
    let even = sector(Parity::Even, n_even);
    let odd = sector(Parity::Odd, n_odd);
    let params = HamiltonianParams::new(basis, lambda).map_err(|_| bad("invalid lambda"))?;
    SpectralDecomposition::from_sectors(params, even, odd)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(two_j: u32, lambda: f64) -> HamiltonianParams {
        HamiltonianParams::new(SpinBasis::from_two_j(two_j), lambda).unwrap()
    }

    #[test]
    fn key_rounds_to_twelve_digits() {
        let b = SpinBasis::from_two_j(10);
        assert_eq!(CacheKey::new(b, 3.5), CacheKey::new(b, 3.5 + 1e-14));
        assert_ne!(CacheKey::new(b, 3.5), CacheKey::new(b, 3.5 + 1e-9));
        assert_ne!(CacheKey::new(b, 3.5), CacheKey::new(SpinBasis::from_two_j(12), 3.5));
    }

    #[test]
    fn memory_cache_shares_entries() {
        let cache = DecompositionCache::in_memory();
        let p = params(12, 2.0);
        assert!(cache.get(&p).is_none());
        let a = cache.get_or_compute(&p).unwrap();
        let b = cache.get_or_compute(&p).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn disk_roundtrip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = params(15, 1.7);
        let first = DecompositionCache::with_dir(dir.path()).get_or_compute(&p).unwrap();
        let files: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(files.len(), 1);
        let second = DecompositionCache::with_dir(dir.path()).get_or_compute(&p).unwrap();
        for parity in Parity::BOTH {
            assert_eq!(first.sector(parity).energies, second.sector(parity).energies);
            assert_eq!(first.sector(parity).vectors, second.sector(parity).vectors);
        }
        assert_eq!(first.doublets(), second.doublets());
    }

    #[test]
    fn header_layout() {
        let dec = eigensolve(&params(4, 2.0)).unwrap();
        let bytes = encode(&dec);
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 4);
        assert_eq!(f64::from_le_bytes(bytes[16..24].try_into().unwrap()), 2.0);
        assert_eq!(u32::from_le_bytes(bytes[24..28].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[28..32].try_into().unwrap()), 2);
        let e0 = f64::from_le_bytes(bytes[32..40].try_into().unwrap());
        assert_eq!(e0, dec.sector(Parity::Even).energies[0]);
        assert_eq!(bytes.len(), 32 + 8 * (3 * 4 + 2 * 3));
    }

    #[test]
    fn corrupt_records_are_rejected() {
        let dec = eigensolve(&params(4, 2.0)).unwrap();
        let bytes = encode(&dec);
        let path = Path::new("x.bin");
        assert!(decode(&bytes[..40], path, None).is_err());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(decode(&wrong, path, None).is_err());
        let mut version = bytes.clone();
        version[8] = 9;
        assert!(decode(&version, path, None).is_err());
        assert!(decode(&bytes, path, Some(&params(4, 2.5))).is_err());
        assert!(decode(&bytes, path, Some(&params(4, 2.0))).is_ok());
    }
}
