//! Coarse/fine training pairs cut from a path-loss map, and their on-disk cache.
//!
//! Cache layout (one directory):
//!
//! * `manifest.json`: sizes, downsample factor, split seed and the list of
//!   pairs per split (`ap_position_m`, `file`, `condition`).
//! * `pair_<ap>.csv`: header `receiver_index,fine_db,mask,coarse_db`, one row
//!   per fine receiver; `coarse_db` is empty except on coarse knots.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ApPosition, PathLossMap, PathLossProfile, ReceiverGrid, TunnelGeometry};
use crate::error::{Error, Result};

pub const MIN_PROFILES: usize = 10;
pub const CONDITION_DIM: usize = 5;
pub const PAIR_HEADER: &str = "receiver_index,fine_db,mask,coarse_db";
const MANIFEST_FORMAT: &str = "apopt-cgan-dataset";

#[derive(Debug, Clone, PartialEq)]
pub struct CganPair {
    pub ap_position_m: ApPosition,
    pub coarse: Vec<f64>,
    pub condition: Vec<f64>,
    pub fine: Vec<f64>,
    pub mask: Vec<f64>,
    /// `coarse` linearly interpolated back onto the fine grid.
    pub upsampled: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CganDataset {
    pub downsample: usize,
    /// Fine-grid indices sampled into the coarse profile.
    pub knots: Vec<usize>,
    pub split_seed: u64,
    pub train: Vec<CganPair>,
    pub val: Vec<CganPair>,
}

impl CganDataset {
    pub fn n_x(&self) -> usize {
        self.knots.len()
    }

    pub fn n_y(&self) -> usize {
        self.knots.last().map_or(0, |k| k + 1)
    }

    pub fn n_c(&self) -> usize {
        CONDITION_DIM
    }

    pub fn pairs(&self) -> impl Iterator<Item = &CganPair> {
        self.train.iter().chain(&self.val)
    }
}

/// Every `downsample`-th fine index, plus the last one if the stride misses it.
pub fn coarse_knots(n_y: usize, downsample: usize) -> Vec<usize> {
    let mut knots: Vec<usize> = (0..n_y).step_by(downsample.max(1)).collect();
    if let Some(&last) = knots.last() {
        if last + 1 != n_y {
            knots.push(n_y - 1);
        }
    }
    knots
}

/// Piecewise-linear interpolation of `coarse` (sampled at `knots`) onto
/// `0..=knots.last()`.
pub fn upsample(coarse: &[f64], knots: &[usize]) -> Vec<f64> {
    assert_eq!(coarse.len(), knots.len(), "one coarse value per knot");
    let n_y = knots.last().map_or(0, |k| k + 1);
    let mut out = Vec::with_capacity(n_y);
    if let [single] = coarse {
        out.push(*single);
        return out;
    }
    for (w, v) in knots.windows(2).zip(coarse.windows(2)) {
        let span = (w[1] - w[0]) as f64;
        for i in w[0]..w[1] {
            let t = (i - w[0]) as f64 / span;
            out.push(v[0] + t * (v[1] - v[0]));
        }
    }
    out.push(*coarse.last().unwrap());
    out
}

/// `[p / L, L / 1000, 100 / R, eps_r / 10, 10 * sigma]`.
pub fn condition_vector(ap: ApPosition, geometry: &TunnelGeometry) -> Vec<f64> {
    vec![
        ap as f64 / geometry.length_m,
        geometry.length_m / 1000.0,
        100.0 / geometry.curvature_radius_m,
        geometry.rel_permittivity / 10.0,
        10.0 * geometry.conductivity_s_per_m,
    ]
}

/// 1 for receivers at or beyond the AP, 0 behind it.
pub fn forward_mask(ap: ApPosition, grid: &ReceiverGrid) -> Vec<f64> {
    let first = grid.first_index_at_or_after(ap as f64);
    (0..grid.count)
        .map(|i| if i >= first { 1.0 } else { 0.0 })
        .collect()
}

pub fn make_pair(
    profile: &PathLossProfile,
    geometry: &TunnelGeometry,
    grid: &ReceiverGrid,
    knots: &[usize],
) -> CganPair {
    let ap = profile.ap_position_m;
    let coarse: Vec<f64> = knots.iter().map(|&k| profile.values[k]).collect();
    let upsampled = upsample(&coarse, knots);
    CganPair {
        ap_position_m: ap,
        condition: condition_vector(ap, geometry),
        fine: profile.values.clone(),
        mask: forward_mask(ap, grid),
        coarse,
        upsampled,
    }
}

fn check_downsample(downsample: usize) -> Result<()> {
    if downsample < 2 {
        return Err(Error::config(format!(
            "downsample factor must be >= 2, got {downsample}"
        )));
    }
    Ok(())
}

/// Pairs for every profile in `map`, split into train/validation by a seeded
/// shuffle of AP positions (`val_fraction` of them, rounded, go to validation).
pub fn build_dataset(
    map: &PathLossMap,
    downsample: usize,
    split_seed: u64,
    val_fraction: f64,
) -> Result<CganDataset> {
    check_downsample(downsample)?;
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::config("val_fraction must lie in [0, 1)"));
    }
    if map.len() < MIN_PROFILES {
        return Err(Error::domain(format!(
            "map holds {} profiles, need at least {MIN_PROFILES}",
            map.len()
        )));
    }
    let grid = map.grid();
    let knots = coarse_knots(grid.count, downsample);
    let mut positions: Vec<ApPosition> = map.positions().collect();
    positions.shuffle(&mut ChaCha8Rng::seed_from_u64(split_seed));
    let n_val = (val_fraction * positions.len() as f64).round() as usize;
    let (val_pos, train_pos) = positions.split_at(n_val);
    let collect = |pos: &[ApPosition]| -> Result<Vec<CganPair>> {
        let mut pos = pos.to_vec();
        pos.sort_unstable();
        pos.iter()
            .map(|&p| Ok(make_pair(map.get(p)?, map.geometry(), grid, &knots)))
            .collect()
    };
    Ok(CganDataset {
        downsample,
        split_seed,
        train: collect(train_pos)?,
        val: collect(val_pos)?,
        knots,
    })
}

/// Copy of `map` keeping only AP positions that are multiples of `stride`.
pub fn subsample_positions(map: &PathLossMap, stride: i64) -> Result<PathLossMap> {
    if stride < 1 {
        return Err(Error::config("position stride must be >= 1"));
    }
    let mut out = PathLossMap::new(*map.geometry(), *map.grid())?;
    for p in map.positions().filter(|p| p % stride == 0) {
        out.insert(map.get(p)?.clone())?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestEntry {
    ap_position_m: ApPosition,
    file: String,
    condition: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    downsample: usize,
    n_x: usize,
    n_y: usize,
    n_c: usize,
    split_seed: u64,
    train: Vec<ManifestEntry>,
    val: Vec<ManifestEntry>,
}

fn pair_file(ap: ApPosition) -> String {
    format!("pair_{ap}.csv")
}

/// Writes the dataset cache into `dir` (created if missing).
pub fn save_dataset(ds: &CganDataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let entries = |pairs: &[CganPair]| -> Result<Vec<ManifestEntry>> {
        pairs
            .iter()
            .map(|p| {
                let file = pair_file(p.ap_position_m);
                let path = dir.join(&file);
                let mut buf = Vec::new();
                write_pair(p, &ds.knots, &mut buf).expect("writing to memory");
                std::fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
                Ok(ManifestEntry {
                    ap_position_m: p.ap_position_m,
                    file,
                    condition: p.condition.clone(),
                })
            })
            .collect()
    };
    let manifest = Manifest {
        format: MANIFEST_FORMAT.into(),
        version: 1,
        downsample: ds.downsample,
        n_x: ds.n_x(),
        n_y: ds.n_y(),
        n_c: ds.n_c(),
        split_seed: ds.split_seed,
        train: entries(&ds.train)?,
        val: entries(&ds.val)?,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn write_pair<W: Write>(p: &CganPair, knots: &[usize], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{PAIR_HEADER}")?;
    let mut k = knots.iter().zip(&p.coarse).peekable();
    for (i, (y, m)) in p.fine.iter().zip(&p.mask).enumerate() {
        write!(w, "{i},{y},{m},")?;
        if let Some((_, c)) = k.next_if(|(&idx, _)| idx == i) {
            write!(w, "{c}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn read_pair(path: &Path, entry: &ManifestEntry, knots: &[usize], n_y: usize) -> Result<CganPair> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| Error::io(path, e))?
        .unwrap_or_default();
    if header.trim() != PAIR_HEADER {
        return Err(err(1, format!("expected header `{PAIR_HEADER}`")));
    }
    let mut fine = Vec::with_capacity(n_y);
    let mut mask = Vec::with_capacity(n_y);
    let mut coarse = Vec::with_capacity(knots.len());
    for (n, line) in lines.enumerate() {
        let lineno = n + 2;
        let line = line.map_err(|e| Error::io(path, e))?;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(err(lineno, format!("expected 4 fields, found {}", f.len())));
        }
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(lineno, format!("invalid number `{s}`")))
        };
        if f[0].trim().parse::<usize>().ok() != Some(fine.len()) {
            return Err(err(lineno, format!("expected receiver index {}", fine.len())));
        }
        let is_knot = knots.get(coarse.len()) == Some(&fine.len());
        match (is_knot, f[3].trim().is_empty()) {
            (true, false) => coarse.push(num(f[3])?),
            (false, true) => {}
            (true, true) => return Err(err(lineno, "missing coarse value on a knot".into())),
            (false, false) => return Err(err(lineno, "coarse value off the knot grid".into())),
        }
        fine.push(num(f[1])?);
        let m = num(f[2])?;
        if m != 0.0 && m != 1.0 {
            return Err(err(lineno, format!("mask must be 0 or 1, got {m}")));
        }
        mask.push(m);
    }
    if fine.len() != n_y {
        return Err(err(fine.len() + 1, format!("expected {n_y} rows, found {}", fine.len())));
    }
    Ok(CganPair {
        ap_position_m: entry.ap_position_m,
        condition: entry.condition.clone(),
        upsampled: upsample(&coarse, knots),
        coarse,
        fine,
        mask,
    })
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<CganDataset> {
    let dir = dir.as_ref();
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: Manifest = serde_json::from_str(&text)?;
    if m.format != MANIFEST_FORMAT || m.version != 1 {
        return Err(Error::Shape(format!(
            "unsupported dataset cache {} v{}",
            m.format, m.version
        )));
    }
    check_downsample(m.downsample)?;
    let knots = coarse_knots(m.n_y, m.downsample);
    if knots.len() != m.n_x || m.n_c != CONDITION_DIM {
        return Err(Error::Shape("manifest sizes are inconsistent".into()));
    }
    let read = |entries: &[ManifestEntry]| -> Result<Vec<CganPair>> {
        entries
            .iter()
            .map(|e| read_pair(&dir.join(&e.file), e, &knots, m.n_y))
            .collect()
    };
    Ok(CganDataset {
        downsample: m.downsample,
        split_seed: m.split_seed,
        train: read(&m.train)?,
        val: read(&m.val)?,
        knots,
    })
}
