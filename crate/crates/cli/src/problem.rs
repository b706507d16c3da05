//! Plain-text problem files: one `key = value` per line, `#` starts a comment.
//!
//! Keys and defaults:
//!
//! | key | default |
//! |-----|---------|
//! | dim | 1 |
//! | Lx, Ly, Lz | 1 |
//! | k0_re, k0_im | 0 |
//! | kx0_re, kx0_im, ky0_re, ky0_im, kz0_re, kz0_im | 0 |
//! | regime | inferred from the wavenumbers |
//! | Dx, Dy, Dz | Lx, Ly, Lz |
//! | i_d | 1 |
//! | far_order | 3 |
//! | far_grid | 10 (one count or `nx,ny,nz`) |
//! | near_order | 2 |
//! | near_grid | auto (or one count, or `nx,ny,nz`) |
//! | series_tol | 1e-10 |
//! | er_range_boxes | 1 |
//! | neutrality_tol | 1e-12 |
//! | sources_path, observers_path, output_path, kernel_cache | unset |

use std::path::{Path, PathBuf};

use pim_core::{NearGrid, PeriodicityConfig, Periodicity, Regime, SolverParams, TargetBox, C64};

use crate::CliError;

pub const KEYS: [&str; 28] = [
    "dim",
    "Lx",
    "Ly",
    "Lz",
    "k0_re",
    "k0_im",
    "kx0_re",
    "kx0_im",
    "ky0_re",
    "ky0_im",
    "kz0_re",
    "kz0_im",
    "regime",
    "Dx",
    "Dy",
    "Dz",
    "i_d",
    "far_order",
    "far_grid",
    "near_order",
    "near_grid",
    "series_tol",
    "er_range_boxes",
    "neutrality_tol",
    "sources_path",
    "observers_path",
    "output_path",
    "kernel_cache",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub cfg: PeriodicityConfig,
    pub target: TargetBox,
    pub params: SolverParams,
    pub sources_path: Option<PathBuf>,
    pub observers_path: Option<PathBuf>,
    pub output_path: Option<PathBuf>,
    pub kernel_cache: Option<PathBuf>,
}

impl Default for ProblemFile {
    fn default() -> Self {
        Self::from_pairs(&[]).expect("defaults are valid")
    }
}

/// Splits problem-file text into (key, value) pairs, rejecting unknown and
/// repeated keys.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Validation(format!("line {}: expected `key = value`", i + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        check_key(key)?;
        if pairs.iter().any(|(k, _)| k == key) {
            return Err(CliError::Validation(format!("line {}: key `{key}` given twice", i + 1)));
        }
        pairs.push((key.to_string(), value.to_string()));
    }
    Ok(pairs)
}

pub fn check_key(key: &str) -> Result<(), CliError> {
    if KEYS.contains(&key) {
        Ok(())
    } else {
        Err(CliError::Validation(format!("unknown key `{key}`")))
    }
}

fn invalid(key: &str, value: &str, what: &str) -> CliError {
    CliError::Validation(format!("{key} = {value}: expected {what}"))
}

fn float(key: &str, v: &str) -> Result<f64, CliError> {
    v.parse().map_err(|_| invalid(key, v, "a number"))
}

fn count(key: &str, v: &str) -> Result<usize, CliError> {
    v.parse().map_err(|_| invalid(key, v, "a non-negative integer"))
}

fn triple(key: &str, v: &str) -> Result<[usize; 3], CliError> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [n] => Ok([count(key, n)?; 3]),
        [a, b, c] => Ok([count(key, a)?, count(key, b)?, count(key, c)?]),
        _ => Err(invalid(key, v, "one count or three comma-separated counts")),
    }
}

impl ProblemFile {
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self, CliError> {
        let get = |k: &str| pairs.iter().rev().find(|(key, _)| key == k).map(|(_, v)| v.as_str());
        for (k, _) in pairs {
            check_key(k)?;
        }
        let num = |k: &str, default: f64| get(k).map_or(Ok(default), |v| float(k, v));

        let dim = match get("dim") {
            None => Periodicity::P1D,
            Some(v) => count("dim", v)
                .ok()
                .and_then(Periodicity::from_count)
                .ok_or_else(|| invalid("dim", v, "1, 2 or 3"))?,
        };
        let lattice = [num("Lx", 1.0)?, num("Ly", 1.0)?, num("Lz", 1.0)?];
        let k0 = C64::new(num("k0_re", 0.0)?, num("k0_im", 0.0)?);
        let kshift = [
            C64::new(num("kx0_re", 0.0)?, num("kx0_im", 0.0)?),
            C64::new(num("ky0_re", 0.0)?, num("ky0_im", 0.0)?),
            C64::new(num("kz0_re", 0.0)?, num("kz0_im", 0.0)?),
        ];
        let cfg = match get("regime") {
            None | Some("auto") => PeriodicityConfig::inferred(dim, lattice, k0, kshift),
            Some(v) => {
                let regime: Regime = v.parse().map_err(|_| invalid("regime", v, "dynamic, static-shifted or npsp"))?;
                PeriodicityConfig::new(dim, lattice, k0, kshift, regime)
            }
        };
        let target = TargetBox::new([num("Dx", lattice[0])?, num("Dy", lattice[1])?, num("Dz", lattice[2])?]);

        let d = SolverParams::default();
        let int = |k: &str, default: usize| get(k).map_or(Ok(default), |v| count(k, v));
        let params = SolverParams {
            i_d: int("i_d", d.i_d)?,
            far_order: int("far_order", d.far_order)?,
            far_grid: get("far_grid").map_or(Ok(d.far_grid), |v| triple("far_grid", v))?,
            near_order: int("near_order", d.near_order)?,
            near_grid: match get("near_grid") {
                None | Some("auto") => NearGrid::Auto,
                Some(v) => NearGrid::Fixed(triple("near_grid", v)?),
            },
            series_tol: num("series_tol", d.series_tol)?,
            er_range_boxes: int("er_range_boxes", d.er_range_boxes)?,
            neutrality_tol: num("neutrality_tol", d.neutrality_tol)?,
        };
        let path = |k: &str| get(k).map(PathBuf::from);
        Ok(Self {
            cfg,
            target,
            params,
            sources_path: path("sources_path"),
            observers_path: path("observers_path"),
            output_path: path("output_path"),
            kernel_cache: path("kernel_cache"),
        })
    }

    /// Reads `file` (if any) and applies `overrides` on top.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut pairs = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                parse_pairs(&text)?
            }
            None => Vec::new(),
        };
        pairs.extend(overrides.iter().cloned());
        Self::from_pairs(&pairs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(text: &str) -> Vec<(String, String)> {
        parse_pairs(text).unwrap()
    }

    #[test]
    fn defaults() {
        let p = ProblemFile::default();
        assert_eq!(p.cfg, PeriodicityConfig::npsp(Periodicity::P1D, [1.0; 3]));
        assert_eq!(p.target.extent, [1.0; 3]);
        assert_eq!(p.params, SolverParams::default());
        assert!(p.sources_path.is_none());
    }

    #[test]
    fn full_file() {
        let text = "# coax\ndim = 2\nLx = 2\nLy=3  # inline\nk0_re = 1\nk0_im = -0.5\nkx0_re = 0.25\n\
                    Dx = 1.5\nfar_grid = 8,9,10\nnear_grid = 17\nregime = dynamic\nsources_path = a.csv\n";
        let p = ProblemFile::from_pairs(&pairs(text)).unwrap();
        assert_eq!(p.cfg.dim, Periodicity::P2D);
        assert_eq!(p.cfg.lattice, [2.0, 3.0, 1.0]);
        assert_eq!(p.cfg.k0, C64::new(1.0, -0.5));
        assert_eq!(p.cfg.kshift[0], C64::new(0.25, 0.0));
        assert_eq!(p.cfg.regime, Regime::Dynamic);
        assert_eq!(p.target.extent, [1.5, 3.0, 1.0]);
        assert_eq!(p.params.far_grid, [8, 9, 10]);
        assert_eq!(p.params.near_grid, NearGrid::Fixed([17; 3]));
        assert_eq!(p.sources_path, Some(PathBuf::from("a.csv")));
    }

    #[test]
    fn later_pairs_override() {
        let mut p = pairs("Lx = 2\n");
        p.push(("Lx".to_string(), "5".to_string()));
        assert_eq!(ProblemFile::from_pairs(&p).unwrap().cfg.lattice[0], 5.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_pairs("colour = red").is_err());
        assert!(parse_pairs("Lx = 1\nLx = 2").is_err());
        assert!(parse_pairs("Lx 1").is_err());
        for bad in ["dim = 4", "Lx = one", "far_grid = 1,2", "regime = magic", "i_d = -1"] {
            assert!(ProblemFile::from_pairs(&pairs(bad)).is_err(), "{bad}");
        }
    }
}
