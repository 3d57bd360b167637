//! Coverage statistics for a placement: path-loss histogram (PDF/CDF) and
//! the per-receiver best-server profile.

use std::io::Write;

use serde::Serialize;

use crate::channel::{combine_min, ApPosition, PathLossMap};
use crate::error::{Error, Result};

pub const HISTOGRAM_HEADER: &str = "bin_lo_db,bin_hi_db,pdf,cdf";
pub const COVERAGE_HEADER: &str = "receiver_index,position_m,path_loss_db,received_power_dbm";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo_db: f64,
    pub hi_db: f64,
    /// Fraction of samples in `[lo, hi)` (the last bin also holds the maximum).
    pub pdf: f64,
    /// Fraction of samples below `hi`.
    pub cdf: f64,
}

/// Histogram with bins of `bin_width_db` aligned to multiples of the width,
/// spanning the data range.
pub fn histogram(values: &[f64], bin_width_db: f64) -> Result<Vec<HistogramBin>> {
    if values.is_empty() {
        return Err(Error::domain("histogram of an empty sample"));
    }
    if !(bin_width_db > 0.0) {
        return Err(Error::domain("bin width must be > 0"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("histogram input must be finite"));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let first = (min / bin_width_db).floor();
    let nbins = (((max / bin_width_db).floor() - first) as usize) + 1;
    let mut counts = vec![0usize; nbins];
    for v in values {
        let k = ((v / bin_width_db).floor() - first) as usize;
        counts[k.min(nbins - 1)] += 1;
    }
    let n = values.len() as f64;
    let mut acc = 0usize;
    Ok(counts
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            acc += c;
            let lo = (first + k as f64) * bin_width_db;
            HistogramBin {
                lo_db: lo,
                hi_db: lo + bin_width_db,
                pdf: c as f64 / n,
                cdf: acc as f64 / n,
            }
        })
        .collect())
}

pub fn write_histogram<W: Write>(bins: &[HistogramBin], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{HISTOGRAM_HEADER}")?;
    for b in bins {
        writeln!(w, "{},{},{},{}", b.lo_db, b.hi_db, b.pdf, b.cdf)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReceiverRow {
    pub receiver_index: usize,
    pub position_m: f64,
    /// Best-server path loss over the placed APs.
    pub path_loss_db: f64,
    pub received_power_dbm: f64,
}

/// Best-server path loss and received power `p0 - PL` at every receiver.
pub fn coverage(positions: &[ApPosition], map: &PathLossMap, tx_power_dbm: f64) -> Result<Vec<ReceiverRow>> {
    let pl = combine_min(positions, map)?;
    let grid = map.grid();
    Ok(pl
        .iter()
        .enumerate()
        .map(|(i, &v)| ReceiverRow {
            receiver_index: i,
            position_m: grid.position(i),
            path_loss_db: v,
            received_power_dbm: tx_power_dbm - v,
        })
        .collect())
}

pub fn write_coverage<W: Write>(rows: &[ReceiverRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{COVERAGE_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            r.receiver_index, r.position_m, r.path_loss_db, r.received_power_dbm
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bins_are_unit_aligned() {
        let h = histogram(&[0.5, 1.2, 1.7, 3.0], 1.0).unwrap();
        assert_eq!(h.len(), 4);
        assert_eq!((h[0].lo_db, h[0].hi_db), (0.0, 1.0));
        assert_eq!(h.iter().map(|b| b.pdf).collect::<Vec<_>>(), vec![0.25, 0.5, 0.0, 0.25]);
        assert_eq!(h.last().unwrap().cdf, 1.0);
    }

    #[test]
    fn constant_sample_has_one_bin() {
        let h = histogram(&[7.0; 5], 1.0).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(h[0].pdf, 1.0);
    }

    #[test]
    fn symmetric_sample_median_cdf() {
        let v: Vec<f64> = (-500..=500).map(|i| 60.0 + i as f64 * 0.02).collect();
        let h = histogram(&v, 1.0).unwrap();
        let median_bin = h.iter().find(|b| b.lo_db <= 60.0 && 60.0 < b.hi_db).unwrap();
        let below = median_bin.cdf - median_bin.pdf;
        assert!(below <= 0.5 && 0.5 <= median_bin.cdf);
    }

    #[test]
    fn empty_is_rejected() {
        assert!(histogram(&[], 1.0).is_err());
    }

    proptest! {
        #[test]
        fn masses_sum_to_one(v in prop::collection::vec(-200.0f64..200.0, 1..300)) {
            let h = histogram(&v, 1.0).unwrap();
            let total: f64 = h.iter().map(|b| b.pdf).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            prop_assert_eq!(h.last().unwrap().cdf, 1.0);
            for w in h.windows(2) {
                prop_assert!(w[1].cdf >= w[0].cdf);
            }
        }
    }
}
