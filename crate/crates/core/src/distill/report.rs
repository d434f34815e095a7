use std::io::Write;

use crate::datagen::fmt_f64;
use crate::error::{Error, Result};

/// Distilled variance at or below this marks a numerically constant
/// teacher, whose shares are undefined.
pub const CONSTANT_VARIANCE: f64 = 1e-12;

/// Variance attributed to each interaction order.
///
/// `variance[k - 1]` is order `k` for `k < K`; the last entry is the `>= K`
/// bucket.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectSizeReport {
    pub variance: Vec<f64>,
    /// `None` when the total is at most [`CONSTANT_VARIANCE`].
    pub shares: Option<Vec<f64>>,
    /// Variance of the teacher itself on the evaluation sample.
    pub prediction_variance: f64,
    /// Per-order ratio against a baseline report, once one is attached.
    pub shrinkage_ratio: Option<Vec<f64>>,
}

impl EffectSizeReport {
    pub fn new(variance: Vec<f64>, prediction_variance: f64) -> Self {
        let total: f64 = variance.iter().sum();
        let shares =
            (total > CONSTANT_VARIANCE).then(|| variance.iter().map(|v| v / total).collect());
        EffectSizeReport {
            variance,
            shares,
            prediction_variance,
            shrinkage_ratio: None,
        }
    }

    pub fn max_order(&self) -> usize {
        self.variance.len()
    }

    pub fn total(&self) -> f64 {
        self.variance.iter().sum()
    }

    /// Label of entry `i`: `"1"`, `"2"`, ... and `">=K"` for the last.
    pub fn order_label(&self, i: usize) -> String {
        if i + 1 == self.variance.len() {
            format!(">={}", i + 1)
        } else {
            (i + 1).to_string()
        }
    }

    /// Ratio regularized / baseline per order. Two zero variances give 1.
    pub fn ratios_against(&self, baseline: &EffectSizeReport) -> Result<Vec<f64>> {
        if baseline.variance.len() != self.variance.len() {
            return Err(Error::Dimension {
                expected: baseline.variance.len(),
                got: self.variance.len(),
                context: "orders in baseline report",
            });
        }
        Ok(self
            .variance
            .iter()
            .zip(&baseline.variance)
            .map(|(&v, &b)| if v == b { 1.0 } else { v / b })
            .collect())
    }

    pub fn with_baseline(mut self, baseline: &EffectSizeReport) -> Result<Self> {
        self.shrinkage_ratio = Some(self.ratios_against(baseline)?);
        Ok(self)
    }

    /// `order,variance,share,shrinkage_ratio`; missing values are `NaN`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("<effect sizes>", e);
        writeln!(out, "order,variance,share,shrinkage_ratio").map_err(io)?;
        for i in 0..self.variance.len() {
            let share = self.shares.as_ref().map_or(f64::NAN, |s| s[i]);
            let ratio = self.shrinkage_ratio.as_ref().map_or(f64::NAN, |r| r[i]);
            writeln!(
                out,
                "{},{},{},{}",
                self.order_label(i),
                fmt_f64(self.variance[i]),
                fmt_f64(share),
                fmt_f64(ratio)
            )
            .map_err(io)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shares_sum_to_one() {
        let r = EffectSizeReport::new(vec![3.0, 1.0, 0.5, 0.5], 5.0);
        let s = r.shares.unwrap();
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(s[0], 0.6);
    }

    #[test]
    fn zero_report_flags_shares() {
        let r = EffectSizeReport::new(vec![0.0; 4], 0.0);
        assert!(r.shares.is_none());
    }

    #[test]
    fn ratio_identity() {
        let a = EffectSizeReport::new(vec![2.0, 1.0, 0.0], 3.0);
        let r = a.clone().with_baseline(&a).unwrap();
        assert_eq!(r.shrinkage_ratio.unwrap(), vec![1.0; 3]);
        let b = EffectSizeReport::new(vec![1.0, 0.25, 0.0], 1.25);
        assert_eq!(b.ratios_against(&a).unwrap(), vec![0.5, 0.25, 1.0]);
        assert!(b
            .ratios_against(&EffectSizeReport::new(vec![1.0], 1.0))
            .is_err());
    }

    #[test]
    fn csv_layout() {
        let r = EffectSizeReport::new(vec![1.0, 1.0, 2.0], 4.0);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "order,variance,share,shrinkage_ratio");
        assert!(lines[3].starts_with(">=3,"));
        assert!(lines[1].ends_with(",NaN"));
    }
}
