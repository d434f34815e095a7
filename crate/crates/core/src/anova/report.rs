use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use super::{EffectTable, Subset};
use crate::datagen::{fmt_f64, parse_f64};
use crate::error::{Error, Result};

/// Effect sizes of a decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionReport {
    /// Variance of every non-empty stored effect.
    pub variance_by_subset: BTreeMap<Subset, f64>,
    /// `variance_by_order[k - 1]` sums the order-`k` subsets.
    pub variance_by_order: Vec<f64>,
    /// Variance of the lumped effects above the last stored order, if any.
    pub overflow: Option<f64>,
    /// Variance of the function itself.
    pub total_variance: f64,
}

impl DecompositionReport {
    pub fn max_order(&self) -> usize {
        self.variance_by_order.len()
    }

    /// Sum of component variances (equals `total_variance` for product weights).
    pub fn component_total(&self) -> f64 {
        self.variance_by_order.iter().sum::<f64>() + self.overflow.unwrap_or(0.0)
    }

    /// Per-order shares of the component total (overflow last), `None` when
    /// every component is zero.
    pub fn order_shares(&self) -> Option<Vec<f64>> {
        let total = self.component_total();
        if total <= 0.0 {
            return None;
        }
        let mut v: Vec<f64> = self.variance_by_order.iter().map(|x| x / total).collect();
        if let Some(o) = self.overflow {
            v.push(o / total);
        }
        Some(v)
    }

    /// `subset;variance` rows, a blank line, then the `order;variance`
    /// summary ending with `total`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("<decomposition report>", e);
        writeln!(out, "subset;variance").map_err(io)?;
        let mut subsets: Vec<_> = self.variance_by_subset.iter().collect();
        subsets.sort_by_key(|(u, _)| (u.order(), u.bits()));
        for (u, v) in subsets {
            writeln!(out, "{u};{}", fmt_f64(*v)).map_err(io)?;
        }
        writeln!(out).map_err(io)?;
        writeln!(out, "order;variance").map_err(io)?;
        for (k, v) in self.variance_by_order.iter().enumerate() {
            writeln!(out, "{};{}", k + 1, fmt_f64(*v)).map_err(io)?;
        }
        if let Some(o) = self.overflow {
            writeln!(out, ">={};{}", self.max_order() + 1, fmt_f64(o)).map_err(io)?;
        }
        writeln!(out, "total;{}", fmt_f64(self.total_variance)).map_err(io)?;
        Ok(())
    }
}

pub fn report(t: &EffectTable) -> DecompositionReport {
    let mut variance_by_subset = BTreeMap::new();
    let mut variance_by_order = vec![0.0; t.max_order()];
    for u in t.subsets().filter(|u| !u.is_empty()) {
        let v = t.variance(u).expect("stored subset");
        variance_by_order[u.order() - 1] += v;
        variance_by_subset.insert(u, v);
    }
    let w = t.grid().tensor_weights();
    let f = t.reconstruct();
    let mean: f64 = w.iter().zip(&f).map(|(w, v)| w * v).sum();
    let total_variance = w.iter().zip(&f).map(|(w, v)| w * (v - mean).powi(2)).sum();
    DecompositionReport {
        variance_by_subset,
        variance_by_order,
        overflow: t.overflow().map(|_| t.overflow_variance()),
        total_variance,
    }
}

pub fn read_report_csv<R: BufRead>(input: R) -> Result<DecompositionReport> {
    let bad = |d: String| Error::parse("decomposition report", d);
    let mut lines = Vec::new();
    for line in input.lines() {
        lines.push(line.map_err(|e| Error::io("<decomposition report>", e))?);
    }
    let mut it = lines.iter().map(|l| l.trim());
    if it.next() != Some("subset;variance") {
        return Err(bad("missing `subset;variance` header".into()));
    }
    let split = |line: &str| -> Result<(String, f64)> {
        let (k, v) = line
            .split_once(';')
            .ok_or_else(|| bad(format!("no `;` in `{line}`")))?;
        Ok((k.to_string(), parse_f64(v)?))
    };
    let mut variance_by_subset = BTreeMap::new();
    for line in it.by_ref() {
        if line.is_empty() {
            break;
        }
        let (k, v) = split(line)?;
        variance_by_subset.insert(k.parse::<Subset>()?, v);
    }
    if it.next() != Some("order;variance") {
        return Err(bad("missing `order;variance` summary".into()));
    }
    let mut variance_by_order = Vec::new();
    let mut overflow = None;
    let mut total = None;
    for line in it.filter(|l| !l.is_empty()) {
        let (k, v) = split(line)?;
        if k == "total" {
            total = Some(v);
        } else if k.starts_with(">=") {
            overflow = Some(v);
        } else {
            let order: usize = k.parse().map_err(|_| bad(format!("bad order `{k}`")))?;
            if order != variance_by_order.len() + 1 {
                return Err(bad(format!("order {order} out of sequence")));
            }
            variance_by_order.push(v);
        }
    }
    Ok(DecompositionReport {
        variance_by_subset,
        variance_by_order,
        overflow,
        total_variance: total.ok_or_else(|| bad("missing total row".into()))?,
    })
}
