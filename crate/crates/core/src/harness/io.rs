//! File formats and reproducibility plumbing: the point-pattern exchange
//! format, curve CSVs, JSON records, atomic writes, seed derivation and plan
//! fingerprints.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::geometry::{Configuration, DomainKind, Point};
use crate::stats::CurveData;

use super::{HarnessError, Result};

/// Stream roles for seed derivation; part of the documented contract.
pub const ROLE_CHAIN: u32 = 0;
pub const ROLE_TUNE: u32 = 1;
pub const ROLE_INIT: u32 = 2;

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Replicate seeds derive from a 64-bit splittable hash of
/// (seed_root, replicate index, stream role).
pub fn derive_seed(seed_root: u64, replicate: u64, role: u32) -> u64 {
    let mut h = mix64(seed_root ^ 0xA076_1D64_78BD_642F);
    h = mix64(h ^ replicate);
    mix64(h ^ u64::from(role) << 32)
}

/// Stable 128-bit hex fingerprint of any serialisable value (canonical JSON).
pub fn fingerprint<T: serde::Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value).map_err(HarnessError::Serialize)?;
    let mut a = 0x243F_6A88_85A3_08D3u64;
    let mut b = 0x1319_8A2E_0370_7344u64;
    for chunk in bytes.chunks(8) {
        let mut word = [0u8; 8];
        word[..chunk.len()].copy_from_slice(chunk);
        let w = u64::from_le_bytes(word);
        a = mix64(a ^ w);
        b = mix64(b.rotate_left(23) ^ w ^ a);
    }
    Ok(format!("{a:016x}{b:016x}"))
}

/// Write via a temporary file in the same directory plus rename, so readers
/// never observe a partial file.
pub fn atomic_write(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.persist(path)
        .map_err(|e| HarnessError::Io(e.error))?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(HarnessError::Serialize)?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

/// Point-pattern exchange format: '#'-prefixed "key: value" header lines,
/// then one whitespace-separated point per line. Coordinates use 17
/// significant digits so a write/read round trip is bit-exact.
pub fn pattern_string(config: &Configuration, seed: u64, fingerprint: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# pattern v1");
    let _ = writeln!(out, "# domain: {}", config.domain);
    let _ = writeln!(out, "# seed: {seed}");
    let _ = writeln!(out, "# fingerprint: {fingerprint}");
    let _ = writeln!(out, "# points: {}", config.points.len());
    for p in &config.points {
        let _ = writeln!(out, "{:.16e} {:.16e}", p.x, p.y);
    }
    out
}

pub fn write_pattern(
    path: &Path,
    config: &Configuration,
    seed: u64,
    fingerprint: &str,
) -> Result<()> {
    atomic_write(path, pattern_string(config, seed, fingerprint).as_bytes())
}

/// Parse the pattern exchange format; returns the configuration and the seed
/// recorded in the header (if any).
pub fn read_pattern(path: &Path) -> Result<(Configuration, Option<u64>)> {
    let text = std::fs::read_to_string(path)?;
    parse_pattern(&text)
}

pub fn parse_pattern(text: &str) -> Result<(Configuration, Option<u64>)> {
    let mut domain = DomainKind::Square;
    let mut seed = None;
    let mut points = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(value) = comment.strip_prefix("domain:") {
                domain = match value.trim() {
                    "circle" => DomainKind::Circle,
                    "square" => DomainKind::Square,
                    "torus" => DomainKind::Torus,
                    other => {
                        return Err(HarnessError::Precondition(format!(
                            "unknown domain '{other}' in pattern header"
                        )))
                    }
                };
            } else if let Some(value) = comment.strip_prefix("seed:") {
                seed = value.trim().parse::<u64>().ok();
            }
            continue;
        }
        let mut fields = line.split_whitespace();
        let (x, y) = match (fields.next(), fields.next()) {
            (Some(x), Some(y)) => (x, y),
            _ => {
                return Err(HarnessError::Precondition(format!(
                    "pattern line {} needs two coordinates",
                    lineno + 1
                )))
            }
        };
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|_| {
                HarnessError::Precondition(format!(
                    "bad coordinate '{s}' on pattern line {}",
                    lineno + 1
                ))
            })
        };
        points.push(Point::new(parse(x)?, parse(y)?));
    }
    if points.is_empty() {
        return Err(HarnessError::Precondition(
            "pattern file holds no points".into(),
        ));
    }
    Ok((Configuration::new(domain, points), seed))
}

/// CSV with r, F, G, J, ln J, sd(ln J) and the draw count, prefixed with
/// fingerprint/version comment lines. Unreliable radii (beyond the F cap)
/// leave the J columns empty.
pub fn curves_csv_string(curves: &CurveData, fingerprint: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# fingerprint: {fingerprint}");
    let _ = writeln!(out, "# version: {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "r,f_hat,g_hat,j_hat,ln_j,sd_j,draws");
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    for i in 0..curves.r.len() {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{},{},{},{}",
            curves.r[i],
            curves.f_hat[i],
            curves.g_hat[i],
            opt(curves.j_hat[i]),
            opt(curves.ln_j[i]),
            opt(curves.sd_j[i]),
            curves.draws,
        );
    }
    out
}

pub fn write_curves_csv(path: &Path, curves: &CurveData, fingerprint: &str) -> Result<()> {
    atomic_write(path, curves_csv_string(curves, fingerprint).as_bytes())
}
