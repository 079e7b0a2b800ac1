//! On-disk cache of Green tables.
//!
//! Files are named by the SHA-256 of (step fingerprint, method, radius,
//! accuracy parameter) and hold a one-line text header followed by the raw
//! little-endian values of the canonical sites, so reloaded tables are
//! bit-identical to freshly computed ones.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{green_convolution, green_quadrature, GreenError, GreenMethod, GreenTable, Symmetry};
use crate::distributions::StepDistribution;

/// Environment variable overriding the cache directory.
pub const CACHE_ENV: &str = "BRWLAB_CACHE_DIR";

const MAGIC: &str = "brwlab-green-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheOutcome {
    Hit,
    Miss,
}

/// The cache directory: `$BRWLAB_CACHE_DIR` if set, else `fallback`.
pub fn cache_dir(fallback: &Path) -> PathBuf {
    std::env::var_os(CACHE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| fallback.to_path_buf())
}

/// `accuracy` is the absolute tolerance for quadrature and n_max for convolution.
fn key(step: &StepDistribution, method: GreenMethod, radius: i64, accuracy: f64) -> String {
    let mut h = Sha256::new();
    h.update(step.fingerprint().as_bytes());
    h.update(format!("|{method}|{radius}|{:016x}", accuracy.to_bits()).as_bytes());
    hex::encode(h.finalize())
}

fn build(
    step: &StepDistribution,
    method: GreenMethod,
    radius: i64,
    accuracy: f64,
) -> Result<GreenTable, GreenError> {
    match method {
        GreenMethod::Quadrature => green_quadrature(step, radius, accuracy),
        GreenMethod::Convolution => {
            if !(accuracy >= 0.0 && accuracy.fract() == 0.0) {
                return Err(GreenError::InvalidParameter(format!("n_max {accuracy}")));
            }
            Ok(green_convolution(step, radius, accuracy as u64)?.estimate)
        }
    }
}

fn write_table(path: &Path, table: &GreenTable) -> Result<(), GreenError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::io::BufWriter::new(fs::File::create(&tmp)?);
        writeln!(
            f,
            "{MAGIC} {} {} {:016x} {}",
            table.method(),
            table.radius(),
            table.abs_tol().to_bits(),
            table.len()
        )?;
        for (_, v) in table.entries() {
            f.write_all(&v.to_le_bytes())?;
        }
        f.flush()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}

fn read_table(path: &Path, step: &StepDistribution) -> Result<GreenTable, GreenError> {
    let corrupt = |m: &str| GreenError::CacheCorrupt(format!("{}: {m}", path.display()));
    let mut r = BufReader::new(fs::File::open(path)?);
    let mut header = String::new();
    r.read_line(&mut header)?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [magic, method, radius, tol, count] = fields[..] else {
        return Err(corrupt("bad header"));
    };
    if magic != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let method: GreenMethod = method.parse()?;
    let radius: i64 = radius.parse().map_err(|_| corrupt("bad radius"))?;
    let tol = f64::from_bits(u64::from_str_radix(tol, 16).map_err(|_| corrupt("bad tol"))?);
    let count: usize = count.parse().map_err(|_| corrupt("bad count"))?;
    let symmetry = Symmetry::of_step(step);
    let sites = symmetry.canonical_sites(radius);
    if sites.len() != count {
        return Err(corrupt("site count mismatch"));
    }
    let mut bytes = Vec::with_capacity(8 * count);
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * count {
        return Err(corrupt("truncated values"));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(GreenTable::from_parts(step, radius, method, tol, symmetry, sites, values))
}

/// Loads a table from `dir` or builds and stores it.
pub fn load_or_build(
    dir: &Path,
    step: &StepDistribution,
    method: GreenMethod,
    radius: i64,
    accuracy: f64,
) -> Result<(GreenTable, CacheOutcome), GreenError> {
    let path = dir.join(format!("{}.green", key(step, method, radius, accuracy)));
    if path.exists() {
        if let Ok(t) = read_table(&path, step) {
            return Ok((t, CacheOutcome::Hit));
        }
    }
    let table = build(step, method, radius, accuracy)?;
    fs::create_dir_all(dir)?;
    write_table(&path, &table)?;
    Ok((table, CacheOutcome::Miss))
}
