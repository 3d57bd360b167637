use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::channel::ApPosition;
use crate::error::{Error, Result};

pub const ERROR_REPORT_HEADER: &str = "ap_position_m,mse_db2,mae_db";

fn masked_count(y: &[f64], y_hat: &[f64], mask: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() || y.len() != mask.len() {
        return Err(Error::Shape(format!(
            "metric inputs differ in length: {} / {} / {}",
            y.len(),
            y_hat.len(),
            mask.len()
        )));
    }
    let n: f64 = mask.iter().sum();
    if n == 0.0 {
        return Err(Error::domain("mask selects no entries"));
    }
    Ok(n)
}

/// `sum(m * (y - y_hat)^2) / sum(m)`.
pub fn masked_mse(y: &[f64], y_hat: &[f64], mask: &[f64]) -> Result<f64> {
    let n = masked_count(y, y_hat, mask)?;
    let s: f64 = y
        .iter()
        .zip(y_hat)
        .zip(mask)
        .map(|((a, b), m)| m * (a - b) * (a - b))
        .sum();
    Ok(s / n)
}

/// `sum(m * |y - y_hat|) / sum(m)`.
pub fn masked_mae(y: &[f64], y_hat: &[f64], mask: &[f64]) -> Result<f64> {
    let n = masked_count(y, y_hat, mask)?;
    let s: f64 = y
        .iter()
        .zip(y_hat)
        .zip(mask)
        .map(|((a, b), m)| m * (a - b).abs())
        .sum();
    Ok(s / n)
}

/// Percentile with linear interpolation between order statistics at rank
/// `p * (n - 1)`; `p` in `[0, 1]`.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("percentile of an empty sample"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("percentile {p} outside [0, 1]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = p * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    Ok(v[lo] + (rank - lo as f64) * (v[hi] - v[lo]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Aggregate {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub p90: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Result<Self> {
        let n = values.len() as f64;
        let p90 = percentile(values, 0.9)?;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Ok(Self {
            mean,
            std: var.sqrt(),
            p90,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorRow {
    pub ap_position_m: ApPosition,
    pub mse_db2: f64,
    pub mae_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorSummary {
    pub count: usize,
    pub mse_db2: Aggregate,
    pub mae_db: Aggregate,
    /// How the statistics were computed, so external readers can reproduce them.
    pub definitions: Definitions,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Definitions {
    pub normalizer: &'static str,
    pub mask: &'static str,
    pub std: &'static str,
    pub percentile: &'static str,
}

impl Default for Definitions {
    fn default() -> Self {
        Self {
            normalizer: "N = sum of mask entries per profile",
            mask: "1 for receivers at or beyond the AP position, else 0",
            std: "population (divide by count)",
            percentile: "linear interpolation at rank p*(n-1) of the sorted values",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
    pub summary: ErrorSummary,
}

impl ErrorReport {
    pub fn from_rows(rows: Vec<ErrorRow>) -> Result<Self> {
        let mse: Vec<f64> = rows.iter().map(|r| r.mse_db2).collect();
        let mae: Vec<f64> = rows.iter().map(|r| r.mae_db).collect();
        let summary = ErrorSummary {
            count: rows.len(),
            mse_db2: Aggregate::of(&mse)?,
            mae_db: Aggregate::of(&mae)?,
            definitions: Definitions::default(),
        };
        Ok(Self { rows, summary })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{ERROR_REPORT_HEADER}")?;
        for r in &self.rows {
            writeln!(w, "{},{},{}", r.ap_position_m, r.mse_db2, r.mae_db)?;
        }
        Ok(())
    }

    /// Writes `error_report.csv` and `error_summary.json` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let csv = dir.join("error_report.csv");
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        std::fs::write(&csv, buf).map_err(|e| Error::io(&csv, e))?;
        let json = dir.join("error_summary.json");
        let text = serde_json::to_string_pretty(&self.summary)?;
        std::fs::write(&json, text).map_err(|e| Error::io(&json, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_example() {
        let (y, yh, m) = ([10.0, 20.0], [11.0, 18.0], [1.0, 1.0]);
        assert_eq!(masked_mse(&y, &yh, &m).unwrap(), 2.5);
        assert_eq!(masked_mae(&y, &yh, &m).unwrap(), 1.5);
    }

    #[test]
    fn identity_is_zero_and_mask_excludes_entries() {
        let y = [1.0, 2.0, 3.0];
        assert_eq!(masked_mse(&y, &y, &[1.0, 0.0, 1.0]).unwrap(), 0.0);
        let yh = [1.5, 1e6, 2.0];
        let m = [1.0, 0.0, 1.0];
        assert_eq!(
            masked_mae(&y, &yh, &m).unwrap(),
            masked_mae(&[1.0, 3.0], &[1.5, 2.0], &[1.0, 1.0]).unwrap()
        );
    }

    #[test]
    fn all_zero_mask_and_length_mismatch_rejected() {
        assert!(matches!(
            masked_mse(&[1.0], &[2.0], &[0.0]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            masked_mae(&[1.0, 2.0], &[2.0], &[1.0]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn p90_of_one_to_ten() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert!((percentile(&v, 0.9).unwrap() - 9.1).abs() < 1e-12);
        assert_eq!(percentile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&v, 1.0).unwrap(), 10.0);
    }

    #[test]
    fn single_row_summary() {
        let r = ErrorReport::from_rows(vec![ErrorRow {
            ap_position_m: 40,
            mse_db2: 0.3,
            mae_db: 0.2,
        }])
        .unwrap();
        assert_eq!(r.summary.mse_db2.mean, 0.3);
        assert_eq!(r.summary.mse_db2.std, 0.0);
        assert_eq!(r.summary.mae_db.p90, 0.2);
    }

    proptest! {
        #[test]
        fn metrics_are_nonnegative_and_equal_error_case_is_tight(
            y in prop::collection::vec(-100.0f64..100.0, 1..40),
            e in 0.0f64..5.0,
        ) {
            let yh: Vec<f64> = y.iter().map(|v| v + e).collect();
            let m = vec![1.0; y.len()];
            let mse = masked_mse(&y, &yh, &m).unwrap();
            let mae = masked_mae(&y, &yh, &m).unwrap();
            prop_assert!(mse >= 0.0 && mae >= 0.0);
            prop_assert!((mse - mae * mae).abs() <= 1e-9 * (1.0 + mse));
        }
    }
}
