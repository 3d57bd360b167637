//! Per-AP path-loss profiles over a fixed receiver grid.
//!
//! A [`PathLossMap`] holds one [`PathLossProfile`] per integer AP position.
//! Profiles come from the closed-form waveguide model in [`synthetic`], from a
//! CSV file ([`io`]) or from a trained surrogate. Multi-AP coverage is the
//! receiver-wise minimum over the deployed APs' profiles.

pub mod io;
pub mod synthetic;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_map, read_map, save_map, write_map};
pub use synthetic::{synth_map, synth_map_at, synth_profile, SyntheticModelParams};

/// AP position along the tunnel axis, in whole meters.
pub type ApPosition = i64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TunnelGeometry {
    pub length_m: f64,
    pub curvature_radius_m: f64,
    pub rel_permittivity: f64,
    pub conductivity_s_per_m: f64,
    pub ap_height_m: f64,
    pub ap_wall_offset_m: f64,
}

impl Default for TunnelGeometry {
    fn default() -> Self {
        Self {
            length_m: 1500.0,
            curvature_radius_m: 477.5,
            rel_permittivity: 5.0,
            conductivity_s_per_m: 0.01,
            ap_height_m: 3.0,
            ap_wall_offset_m: 0.5,
        }
    }
}

impl TunnelGeometry {
    pub fn with_length(length_m: f64) -> Self {
        Self {
            length_m,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_m.is_finite() && self.length_m > 0.0) {
            return Err(Error::config(format!(
                "tunnel length must be > 0, got {}",
                self.length_m
            )));
        }
        if !(self.curvature_radius_m.is_finite() && self.curvature_radius_m > 0.0) {
            return Err(Error::config("curvature radius must be > 0"));
        }
        if !(self.rel_permittivity >= 1.0) {
            return Err(Error::config("relative permittivity must be >= 1"));
        }
        if !(self.conductivity_s_per_m >= 0.0) {
            return Err(Error::config("conductivity must be >= 0"));
        }
        Ok(())
    }

    /// Largest integer AP position inside the tunnel.
    pub fn max_position(&self) -> ApPosition {
        self.length_m.floor() as ApPosition
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AntennaConfig {
    /// Transmit power P0 used to turn path loss back into received power.
    pub tx_power_dbm: f64,
    pub tx_gain_dbi: f64,
    pub frequency_hz: f64,
}

impl Default for AntennaConfig {
    fn default() -> Self {
        Self {
            tx_power_dbm: 20.0,
            tx_gain_dbi: 7.0,
            frequency_hz: 2.4e9,
        }
    }
}

impl AntennaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.frequency_hz.is_finite() && self.frequency_hz > 0.0) {
            return Err(Error::config("frequency must be > 0"));
        }
        if !self.tx_power_dbm.is_finite() {
            return Err(Error::config("tx power must be finite"));
        }
        Ok(())
    }
}

/// Uniformly spaced receiver points along the tunnel axis, starting at 0 m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverGrid {
    pub spacing_m: f64,
    pub count: usize,
}

impl ReceiverGrid {
    /// Grid covering `[0, length_m]` with `floor(length / spacing) + 1` points.
    pub fn for_geometry(geometry: &TunnelGeometry, spacing_m: f64) -> Result<Self> {
        geometry.validate()?;
        if !(spacing_m.is_finite() && spacing_m > 0.0) {
            return Err(Error::config(format!(
                "receiver spacing must be > 0, got {spacing_m}"
            )));
        }
        // tolerate representation error in length / spacing (1500 / 0.1)
        let count = (geometry.length_m / spacing_m + 1e-9).floor() as usize + 1;
        let grid = Self { spacing_m, count };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing_m.is_finite() && self.spacing_m > 0.0) {
            return Err(Error::config("receiver spacing must be > 0"));
        }
        if self.count < 2 {
            return Err(Error::config(format!(
                "receiver grid needs at least 2 points, got {}",
                self.count
            )));
        }
        Ok(())
    }

    /// Axial position of receiver `index` in meters.
    ///
    /// When the spacing is the reciprocal of an integer (0.1 m, 0.5 m, ...)
    /// positions are computed by division so whole-meter receivers land on
    /// exact integers.
    pub fn position(&self, index: usize) -> f64 {
        let per_meter = 1.0 / self.spacing_m;
        let rounded = per_meter.round();
        if rounded >= 1.0 && (per_meter - rounded).abs() < 1e-9 {
            index as f64 / rounded
        } else {
            index as f64 * self.spacing_m
        }
    }

    /// Index of the first receiver at or beyond `x_m`.
    pub fn first_index_at_or_after(&self, x_m: f64) -> usize {
        (0..self.count)
            .find(|&i| self.position(i) >= x_m - 1e-9)
            .unwrap_or(self.count)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathLossProfile {
    pub ap_position_m: ApPosition,
    /// Path loss in dB at each receiver of the map's grid.
    pub values: Vec<f64>,
}

impl PathLossProfile {
    pub fn new(ap_position_m: ApPosition, values: Vec<f64>) -> Self {
        Self {
            ap_position_m,
            values,
        }
    }

    fn validate(&self, geometry: &TunnelGeometry, grid: &ReceiverGrid) -> Result<()> {
        if self.ap_position_m < 0 || self.ap_position_m as f64 > geometry.length_m {
            return Err(Error::domain(format!(
                "AP position {} outside [0, {}]",
                self.ap_position_m, geometry.length_m
            )));
        }
        if self.values.len() != grid.count {
            return Err(Error::Shape(format!(
                "profile at {} m has {} values, expected grid count {}",
                self.ap_position_m,
                self.values.len(),
                grid.count
            )));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "profile at {} m has non-finite value at receiver {i}",
                self.ap_position_m
            )));
        }
        Ok(())
    }
}

/// Database of path-loss profiles keyed by AP position, all on one grid.
///
/// Built single-writer, then shared read-only.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLossMap {
    geometry: TunnelGeometry,
    grid: ReceiverGrid,
    profiles: BTreeMap<ApPosition, PathLossProfile>,
}

impl PathLossMap {
    pub fn new(geometry: TunnelGeometry, grid: ReceiverGrid) -> Result<Self> {
        geometry.validate()?;
        grid.validate()?;
        Ok(Self {
            geometry,
            grid,
            profiles: BTreeMap::new(),
        })
    }

    pub fn geometry(&self) -> &TunnelGeometry {
        &self.geometry
    }

    pub fn grid(&self) -> &ReceiverGrid {
        &self.grid
    }

    /// Insert or replace a profile after checking it against the map's grid.
    pub fn insert(&mut self, profile: PathLossProfile) -> Result<()> {
        profile.validate(&self.geometry, &self.grid)?;
        self.profiles.insert(profile.ap_position_m, profile);
        Ok(())
    }

    pub fn get(&self, position: ApPosition) -> Result<&PathLossProfile> {
        self.profiles
            .get(&position)
            .ok_or(Error::MissingProfile { position })
    }

    pub fn contains(&self, position: ApPosition) -> bool {
        self.profiles.contains_key(&position)
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = ApPosition> + '_ {
        self.profiles.keys().copied()
    }

    pub fn profiles(&self) -> impl Iterator<Item = &PathLossProfile> + '_ {
        self.profiles.values()
    }

    /// True when every integer position in `[0, floor(L)]` has a profile.
    pub fn covers_all_positions(&self) -> bool {
        (0..=self.geometry.max_position()).all(|p| self.profiles.contains_key(&p))
    }
}

/// Path loss from transmit and received power: `pl = P0 - P_rx`.
pub fn path_loss_from_power(p0_dbm: f64, p_rx_dbm: f64) -> f64 {
    p0_dbm - p_rx_dbm
}

/// Receiver-wise minimum path loss over the APs at `positions`.
pub fn combine_min(positions: &[ApPosition], map: &PathLossMap) -> Result<Vec<f64>> {
    let (first, rest) = positions
        .split_first()
        .ok_or_else(|| Error::domain("at least one AP position is required"))?;
    let mut out = map.get(*first)?.values.clone();
    for &x in rest {
        let profile = map.get(x)?;
        for (o, &v) in out.iter_mut().zip(&profile.values) {
            if v < *o {
                *o = v;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_map(values: &[(ApPosition, Vec<f64>)]) -> PathLossMap {
        let geometry = TunnelGeometry::with_length(10.0);
        let grid = ReceiverGrid {
            spacing_m: 5.0,
            count: values[0].1.len(),
        };
        let mut map = PathLossMap::new(geometry, grid).unwrap();
        for (p, v) in values {
            map.insert(PathLossProfile::new(*p, v.clone())).unwrap();
        }
        map
    }

    #[test]
    fn path_loss_from_power_cases() {
        assert_eq!(path_loss_from_power(30.0, 30.0), 0.0);
        assert_eq!(path_loss_from_power(30.0, -70.0), 100.0);
        assert_eq!(path_loss_from_power(0.0, 20.0), -20.0);
    }

    #[test]
    fn combine_min_single_and_triple() {
        let map = toy_map(&[
            (0, vec![80.0, 60.0, 90.0]),
            (5, vec![95.0, 50.0, 91.0]),
            (10, vec![70.0, 55.0, 92.0]),
        ]);
        assert_eq!(combine_min(&[5], &map).unwrap(), vec![95.0, 50.0, 91.0]);
        assert_eq!(
            combine_min(&[0, 5, 10], &map).unwrap(),
            vec![70.0, 50.0, 90.0]
        );
        assert_eq!(
            combine_min(&[5, 5, 5], &map).unwrap(),
            combine_min(&[5], &map).unwrap()
        );
    }

    #[test]
    fn combine_min_missing_profile_names_position() {
        let map = toy_map(&[(0, vec![1.0, 2.0, 3.0])]);
        let err = combine_min(&[0, 7], &map).unwrap_err();
        assert!(matches!(err, Error::MissingProfile { position: 7 }));
        assert!(err.to_string().contains('7'));
    }

    #[test]
    fn insert_rejects_wrong_length_and_range() {
        let mut map = toy_map(&[(0, vec![1.0, 2.0, 3.0])]);
        assert!(map.insert(PathLossProfile::new(5, vec![1.0])).is_err());
        assert!(map
            .insert(PathLossProfile::new(11, vec![1.0, 2.0, 3.0]))
            .is_err());
        assert!(map
            .insert(PathLossProfile::new(3, vec![1.0, f64::NAN, 3.0]))
            .is_err());
    }

    #[test]
    fn grid_count_and_positions() {
        let g = TunnelGeometry::default();
        let grid = ReceiverGrid::for_geometry(&g, 0.1).unwrap();
        assert_eq!(grid.count, 15001);
        assert_eq!(grid.position(10_000), 1000.0);
        assert_eq!(grid.position(15_000), 1500.0);
        assert_eq!(grid.first_index_at_or_after(100.0), 1000);
        assert!(ReceiverGrid::for_geometry(&g, 0.0).is_err());
    }
}
