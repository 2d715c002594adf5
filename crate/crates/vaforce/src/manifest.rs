//! Model manifests: a plain `key = value` text file naming one Matrix Market
//! file per block plus the fluid constants and zero-based index lists.
//!
//! ```text
//! # blocks, relative to the manifest
//! Ms = ms.mtx
//! Ks = ks.mtx
//! Mf = mf.mtx
//! Kf = kf.mtx
//! C  = c.mtx
//! rho_f = 1010
//! c = 1480
//! acc_idx = 2, 4, 8
//! force_idx = 4, 8
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use vaforce_core::{CoupledSystem, SelectionConfig};

use crate::error::IoError;
use crate::mtx;

const BLOCKS: [&str; 5] = ["Ms", "Ks", "Mf", "Kf", "C"];

fn parse_pairs(path: &Path, text: &str) -> Result<BTreeMap<String, String>, IoError> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| IoError::format(path, format!("line {}: expected key = value", n + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn parse_indices(path: &Path, key: &str, value: Option<&String>) -> Result<Vec<usize>, IoError> {
    let Some(value) = value else {
        return Ok(Vec::new());
    };
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| IoError::format(path, format!("{key}: {s:?} is not a DOF index")))
        })
        .collect()
}

fn require<'a>(path: &Path, map: &'a BTreeMap<String, String>, key: &str) -> Result<&'a String, IoError> {
    map.get(key).ok_or_else(|| IoError::MissingKey {
        path: path.to_path_buf(),
        key: key.to_string(),
    })
}

fn parse_scalar(path: &Path, map: &BTreeMap<String, String>, key: &str) -> Result<f64, IoError> {
    let v = require(path, map, key)?;
    v.parse()
        .map_err(|_| IoError::format(path, format!("{key}: {v:?} is not a number")))
}

/// Loads a coupled system and its selection from a manifest. Every
/// invariant of the system and the index lists is checked.
pub fn load_model(path: &Path) -> Result<(CoupledSystem, SelectionConfig), IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    let map = parse_pairs(path, &text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut blocks = Vec::with_capacity(BLOCKS.len());
    for key in BLOCKS {
        let file = base.join(require(path, &map, key)?);
        blocks.push(mtx::read(&file)?);
    }
    let rho_f = parse_scalar(path, &map, "rho_f")?;
    let c = parse_scalar(path, &map, "c")?;
    let [ms, ks, mf, kf, cm]: [_; 5] = blocks.try_into().expect("five blocks");
    let sys = CoupledSystem::new(ms, ks, mf, kf, cm, rho_f, c).map_err(|source| IoError::Model {
        path: path.to_path_buf(),
        source,
    })?;
    let sel = SelectionConfig {
        disp_idx: parse_indices(path, "disp_idx", map.get("disp_idx"))?,
        vel_idx: parse_indices(path, "vel_idx", map.get("vel_idx"))?,
        acc_idx: parse_indices(path, "acc_idx", map.get("acc_idx"))?,
        force_idx: parse_indices(path, "force_idx", map.get("force_idx"))?,
    };
    sel.validate(sys.n_dof()).map_err(|source| IoError::Model {
        path: path.to_path_buf(),
        source,
    })?;
    Ok((sys, sel))
}

fn join(idx: &[usize]) -> String {
    idx.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")
}

/// Writes the five blocks and a manifest named `model.txt` into `dir`,
/// returning the manifest path.
pub fn save_model(dir: &Path, sys: &CoupledSystem, sel: &SelectionConfig) -> Result<PathBuf, IoError> {
    fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    let mats = [sys.ms(), sys.ks(), sys.mf(), sys.kf(), sys.coupling()];
    let mut text = String::new();
    for (key, m) in BLOCKS.iter().zip(mats) {
        let name = format!("{}.mtx", key.to_ascii_lowercase());
        mtx::write(&dir.join(&name), m)?;
        let _ = writeln!(text, "{key} = {name}");
    }
    let _ = writeln!(text, "rho_f = {:e}", sys.rho_f());
    let _ = writeln!(text, "c = {:e}", sys.sound_speed());
    for (key, idx) in [
        ("disp_idx", &sel.disp_idx),
        ("vel_idx", &sel.vel_idx),
        ("acc_idx", &sel.acc_idx),
        ("force_idx", &sel.force_idx),
    ] {
        let _ = writeln!(text, "{key} = {}", join(idx));
    }
    let path = dir.join("model.txt");
    fs::write(&path, text).map_err(|e| IoError::io(&path, e))?;
    Ok(path)
}
