//! Closed-form waveguide path-loss model used in place of a full-wave solver.
//!
//! ```text
//! PL(d) = PL_ref + a_wg*d + 10*n*log10(max(d, d0) / d0) + (k / R)*d + ripple(d)
//! PL_ref    = 32.4 + 20*log10(f_MHz) + 20*log10(d0_km)
//! ripple(d) = A * sin(2*pi*d / P1) * cos(2*pi*d / P2)
//! ```
//!
//! `d` is the axial distance between receiver and AP. Tunnel curvature only
//! enters through the linear `k / R` term.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{
    AntennaConfig, ApPosition, PathLossMap, PathLossProfile, ReceiverGrid, TunnelGeometry,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticModelParams {
    /// Free-space anchor distance.
    pub d0_m: f64,
    /// Linear waveguide attenuation, dB/m.
    pub waveguide_atten_db_per_m: f64,
    pub path_loss_exponent: f64,
    /// Curvature penalty numerator k in dB*m; the slope is k / radius.
    pub curvature_coeff_db_m: f64,
    pub ripple_amplitude_db: f64,
    pub ripple_period1_m: f64,
    pub ripple_period2_m: f64,
}

impl Default for SyntheticModelParams {
    fn default() -> Self {
        Self {
            d0_m: 1.0,
            waveguide_atten_db_per_m: 0.02,
            path_loss_exponent: 1.8,
            curvature_coeff_db_m: 10.0,
            ripple_amplitude_db: 3.0,
            ripple_period1_m: 37.0,
            ripple_period2_m: 11.0,
        }
    }
}

impl SyntheticModelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d0_m", self.d0_m),
            ("ripple_period1_m", self.ripple_period1_m),
            ("ripple_period2_m", self.ripple_period2_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be > 0, got {v}")));
            }
        }
        let finite = [
            self.waveguide_atten_db_per_m,
            self.path_loss_exponent,
            self.curvature_coeff_db_m,
            self.ripple_amplitude_db,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("synthetic model parameters must be finite"));
        }
        Ok(())
    }

    /// Free-space loss at the anchor distance.
    pub fn reference_db(&self, antenna: &AntennaConfig) -> f64 {
        let f_mhz = antenna.frequency_hz / 1e6;
        32.4 + 20.0 * f_mhz.log10() + 20.0 * (self.d0_m / 1000.0).log10()
    }

    pub fn ripple_db(&self, d: f64) -> f64 {
        self.ripple_amplitude_db
            * (2.0 * PI * d / self.ripple_period1_m).sin()
            * (2.0 * PI * d / self.ripple_period2_m).cos()
    }

    /// Path loss at axial distance `d` (meters) with the ripple excluded.
    pub fn trend_db(&self, d: f64, reference_db: f64, geometry: &TunnelGeometry) -> f64 {
        let curve_slope = self.curvature_coeff_db_m / geometry.curvature_radius_m;
        reference_db
            + self.waveguide_atten_db_per_m * d
            + 10.0 * self.path_loss_exponent * (d.max(self.d0_m) / self.d0_m).log10()
            + curve_slope * d
    }

    pub fn path_loss_db(&self, d: f64, reference_db: f64, geometry: &TunnelGeometry) -> f64 {
        self.trend_db(d, reference_db, geometry) + self.ripple_db(d)
    }
}

/// Profile for an AP at `ap_pos` over every receiver of `grid`.
pub fn synth_profile(
    ap_pos: ApPosition,
    geometry: &TunnelGeometry,
    antenna: &AntennaConfig,
    grid: &ReceiverGrid,
    params: &SyntheticModelParams,
) -> Result<PathLossProfile> {
    if ap_pos < 0 || ap_pos as f64 > geometry.length_m {
        return Err(Error::domain(format!(
            "AP position {ap_pos} outside [0, {}]",
            geometry.length_m
        )));
    }
    let reference = params.reference_db(antenna);
    let ap = ap_pos as f64;
    let values = (0..grid.count)
        .map(|i| params.path_loss_db((grid.position(i) - ap).abs(), reference, geometry))
        .collect();
    Ok(PathLossProfile::new(ap_pos, values))
}

/// Synthetic map with a profile for every integer AP position in `[0, L]`.
pub fn synth_map(
    geometry: &TunnelGeometry,
    antenna: &AntennaConfig,
    grid: &ReceiverGrid,
    params: &SyntheticModelParams,
) -> Result<PathLossMap> {
    synth_map_at(geometry, antenna, grid, params, 0..=geometry.max_position())
}

/// Synthetic map holding only the requested AP positions.
pub fn synth_map_at(
    geometry: &TunnelGeometry,
    antenna: &AntennaConfig,
    grid: &ReceiverGrid,
    params: &SyntheticModelParams,
    positions: impl IntoIterator<Item = ApPosition>,
) -> Result<PathLossMap> {
    use rayon::prelude::*;

    geometry.validate()?;
    antenna.validate()?;
    params.validate()?;
    let positions: Vec<ApPosition> = positions.into_iter().collect();
    let profiles = positions
        .par_iter()
        .map(|&p| synth_profile(p, geometry, antenna, grid, params))
        .collect::<Result<Vec<_>>>()?;
    let mut map = PathLossMap::new(*geometry, *grid)?;
    for profile in profiles {
        map.insert(profile)?;
    }
    Ok(map)
}
