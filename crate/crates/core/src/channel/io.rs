//! Path-loss map CSV.
//!
//! ```text
//! ap_position_m,receiver_index,path_loss_db
//! 0,0,40.004225
//! 0,1,40.004225
//! ...
//! ```
//!
//! One row per (AP, receiver), sorted by AP position then receiver index,
//! UTF-8 with LF line endings. Path loss is written with exactly 6 decimals,
//! so `save(load(save(m)))` is byte-identical to `save(m)`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ApPosition, PathLossMap, PathLossProfile, ReceiverGrid, TunnelGeometry};
use crate::error::{Error, Result};

pub const MAP_HEADER: &str = "ap_position_m,receiver_index,path_loss_db";

pub fn save_map(map: &PathLossMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::with_capacity(1 << 20, file);
    write_map(map, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_map<W: Write>(map: &PathLossMap, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{MAP_HEADER}")?;
    for profile in map.profiles() {
        for (i, v) in profile.values.iter().enumerate() {
            writeln!(w, "{},{},{:.6}", profile.ap_position_m, i, v)?;
        }
    }
    Ok(())
}

/// Load a map written by [`save_map`]. The CSV carries no geometry, so the
/// caller supplies the geometry and grid the profiles must fit.
pub fn load_map(
    path: impl AsRef<Path>,
    geometry: TunnelGeometry,
    grid: ReceiverGrid,
) -> Result<PathLossMap> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_map(file, path, geometry, grid)
}

pub fn read_map<R: Read>(
    reader: R,
    path: &Path,
    geometry: TunnelGeometry,
    grid: ReceiverGrid,
) -> Result<PathLossMap> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut map = PathLossMap::new(geometry, grid)?;
    let mut current: Option<(ApPosition, Vec<f64>)> = None;
    let mut last_line = 0;

    let finish = |map: &mut PathLossMap, current: Option<(ApPosition, Vec<f64>)>, line: usize| {
        if let Some((pos, values)) = current {
            if values.len() != grid.count {
                return Err(err(
                    line,
                    format!(
                        "profile at {pos} m has {} receivers, expected grid count {}",
                        values.len(),
                        grid.count
                    ),
                ));
            }
            map.insert(PathLossProfile::new(pos, values))
                .map_err(|e| err(line, e.to_string()))?;
        }
        Ok(())
    };

    for (n, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = n + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if lineno == 1 {
            if line.trim_end_matches('\r') != MAP_HEADER {
                return Err(err(1, format!("expected header `{MAP_HEADER}`")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        last_line = lineno;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(err(
                lineno,
                format!("expected 3 fields, found {}", fields.len()),
            ));
        }
        let pos: ApPosition = fields[0]
            .parse()
            .map_err(|_| err(lineno, format!("invalid AP position `{}`", fields[0])))?;
        let idx: usize = fields[1]
            .parse()
            .map_err(|_| err(lineno, format!("invalid receiver index `{}`", fields[1])))?;
        let value: f64 = fields[2]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| err(lineno, format!("invalid path loss `{}`", fields[2])))?;

        let switch = match &current {
            Some((p, _)) => *p != pos,
            None => true,
        };
        if switch {
            if map.contains(pos) {
                return Err(err(lineno, format!("duplicate AP position {pos}")));
            }
            if let Some((p, _)) = &current {
                if pos < *p {
                    return Err(err(
                        lineno,
                        format!("rows not sorted: AP position {pos} after {p}"),
                    ));
                }
            }
            finish(&mut map, current.take(), lineno - 1)?;
            current = Some((pos, Vec::with_capacity(grid.count)));
        }
        let (_, values) = current.as_mut().expect("set above");
        if idx != values.len() {
            let message = if idx >= grid.count {
                format!(
                    "receiver index {idx} out of range for grid count {}",
                    grid.count
                )
            } else if idx < values.len() {
                format!("duplicate receiver index {idx} for AP position {pos}")
            } else {
                format!(
                    "receiver index {idx} out of order, expected {}",
                    values.len()
                )
            };
            return Err(err(lineno, message));
        }
        if idx >= grid.count {
            return Err(err(
                lineno,
                format!(
                    "profile at {pos} m exceeds expected grid count {}",
                    grid.count
                ),
            ));
        }
        values.push(value);
    }
    finish(&mut map, current, last_line)?;
    Ok(map)
}
