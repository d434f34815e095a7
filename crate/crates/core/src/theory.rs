//! Closed-form dropout quantities and Monte Carlo checks of the scaling
//! results on multilinear basis models.
//!
//! For a monomial `f_u(x) = theta_u * prod_{i in u} x_i`, plain input dropout
//! keeps the term intact only when every coordinate in `u` survives, which
//! happens with probability `(1 - p)^|u|`. The verifiers estimate that factor
//! both for the conditional mean of the masked model and for the masked
//! squared-loss gradient.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use rand::Rng;

use crate::anova::Subset;
use crate::datagen::{fmt_f64, parse_f64, Dataset};
use crate::error::{Error, Result};
use crate::seed::{self, LabRng};

fn check_rate(p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Domain(format!(
            "dropout rate must lie in [0, 1), got {p}"
        )));
    }
    Ok(())
}

/// `(1 - p)^k`, built by repeated multiplication so that
/// `r(k + 1) == (1 - p) * r(k)` holds exactly.
pub fn effective_rate(p: f64, k: usize) -> Result<f64> {
    check_rate(p)?;
    let q = 1.0 - p;
    Ok((0..k).fold(1.0, |r, _| r * q))
}

/// `effective_rate(p, k)` for `k = 0..=k_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    pub p: f64,
    pub values: Vec<f64>,
}

impl RateCurve {
    pub fn new(p: f64, k_max: usize) -> Result<Self> {
        check_rate(p)?;
        let q = 1.0 - p;
        let mut values = Vec::with_capacity(k_max + 1);
        let mut r = 1.0;
        for _ in 0..=k_max {
            values.push(r);
            r *= q;
        }
        Ok(RateCurve { p, values })
    }

    pub fn rate(&self, k: usize) -> f64 {
        self.values[k]
    }
}

/// Exact binomial coefficient `C(n, k)`.
pub fn hypothesis_count(n: usize, k: usize) -> Result<u128> {
    if k > n {
        return Err(Error::Domain(format!(
            "order {k} exceeds the {n} available features"
        )));
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        // c * (n - i) is divisible by (i + 1) at every step
        c = c
            .checked_mul((n - i) as u128)
            .ok_or_else(|| Error::Domain(format!("C({n}, {k}) overflows 128 bits")))?
            / (i + 1) as u128;
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalancePoint {
    pub k: usize,
    pub rate: f64,
    pub count: u128,
    /// `rate * count`
    pub product: f64,
}

/// `r_p(k) * C(n, k)` for `k = 1..=k_max`.
pub fn balance_curve(n: usize, p: f64, k_max: usize) -> Result<Vec<BalancePoint>> {
    if k_max > n {
        return Err(Error::Domain(format!("k_max {k_max} exceeds {n}")));
    }
    let rates = RateCurve::new(p, k_max)?;
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let count = hypothesis_count(n, k)?;
        let bound = (n as f64).powi(k as i32);
        if count as f64 > bound {
            return Err(Error::Domain(format!(
                "C({n}, {k}) = {count} exceeds {n}^{k}"
            )));
        }
        let rate = rates.rate(k);
        out.push(BalancePoint {
            k,
            rate,
            count,
            product: rate * count as f64,
        });
    }
    Ok(out)
}

/// `x -> sum_u theta_u * prod_{i in u} x_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisModel {
    dim: usize,
    terms: Vec<(Subset, f64)>,
}

impl BasisModel {
    pub fn new(dim: usize, terms: Vec<(Subset, f64)>) -> Result<Self> {
        if dim == 0 || dim > 32 {
            return Err(Error::InvalidSpec(format!(
                "basis model dimension must be 1..=32, got {dim}"
            )));
        }
        let mut seen = BTreeSet::new();
        for (u, theta) in &terms {
            if !u.is_subset_of(Subset::full(dim)) {
                return Err(Error::InvalidSpec(format!(
                    "term {{{u}}} uses axes beyond {dim}"
                )));
            }
            if !seen.insert(*u) {
                return Err(Error::InvalidSpec(format!("duplicate term {{{u}}}")));
            }
            if !theta.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "coefficient of {{{u}}} is not finite"
                )));
            }
        }
        Ok(BasisModel { dim, terms })
    }

    /// A single term `theta * prod_{i in u} x_i`.
    pub fn monomial(dim: usize, u: Subset, theta: f64) -> Result<Self> {
        BasisModel::new(dim, vec![(u, theta)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[(Subset, f64)] {
        &self.terms
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|&(u, theta)| theta * monomial(u, x))
            .sum()
    }

    /// Evaluate at `x * mask` without materializing the product.
    fn evaluate_masked(&self, x: &[f64], keep: &[bool]) -> f64 {
        self.terms
            .iter()
            .filter(|(u, _)| u.indices().iter().all(|&i| keep[i]))
            .map(|&(u, theta)| theta * monomial(u, x))
            .sum()
    }

    /// Dataset with `y = target(x) + noise`, inputs iid `Unif(-1, 1)`.
    pub fn sample_dataset(target: &BasisModel, n: usize, noise: f64, seed: u64) -> Result<Dataset> {
        let mut rng = seed::rng(seed);
        let d = target.dim;
        let x = ndarray::Array2::from_shape_simple_fn((n, d), || rng.gen_range(-1.0..1.0));
        let y: Vec<f64> = x
            .rows()
            .into_iter()
            .map(|r| {
                let r = r.to_vec();
                target.evaluate(&r) + noise * rng.gen_range(-1.0..1.0)
            })
            .collect();
        Dataset::new(
            x,
            crate::datagen::Response::Regression(y),
            crate::datagen::DensitySpec::ProductUniform {
                lo: -1.0,
                hi: 1.0,
                d,
            },
        )
    }
}

fn monomial(u: Subset, x: &[f64]) -> f64 {
    u.indices().iter().map(|&i| x[i]).product()
}

/// One checked term of a verifier report.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremRow {
    pub subset: Subset,
    pub order: usize,
    pub theoretical: f64,
    pub estimate: f64,
    pub stderr: f64,
    /// `None` when the ratio is undefined (zero clean gradient).
    pub pass: Option<bool>,
}

impl TheoremRow {
    fn new(subset: Subset, p: f64, estimate: f64, stderr: f64) -> Result<Self> {
        let theoretical = effective_rate(p, subset.order())?;
        let pass = estimate
            .is_finite()
            .then(|| (estimate - theoretical).abs() <= 3.0 * stderr + 1e-12);
        Ok(TheoremRow {
            subset,
            order: subset.order(),
            theoretical,
            estimate,
            stderr,
            pass,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremReport {
    pub rows: Vec<TheoremRow>,
}

impl TheoremReport {
    /// True when every row is defined and within 3 standard errors.
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass == Some(true))
    }

    /// `subset,order,theoretical,estimate,stderr,pass` with `pass` one of
    /// `true`, `false`, `undefined`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "subset",
            "order",
            "theoretical",
            "estimate",
            "stderr",
            "pass",
        ])?;
        for r in &self.rows {
            let pass = match r.pass {
                Some(true) => "true",
                Some(false) => "false",
                None => "undefined",
            };
            w.write_record([
                r.subset.to_string(),
                r.order.to_string(),
                fmt_f64(r.theoretical),
                fmt_f64(r.estimate),
                fmt_f64(r.stderr),
                pass.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<theorem report>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let header = rd.headers()?.clone();
        if header.iter().collect::<Vec<_>>()
            != [
                "subset",
                "order",
                "theoretical",
                "estimate",
                "stderr",
                "pass",
            ]
        {
            return Err(Error::parse(
                "theorem report",
                format!("unexpected header {header:?}"),
            ));
        }
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let pass = match &rec[5] {
                "true" => Some(true),
                "false" => Some(false),
                "undefined" => None,
                other => {
                    return Err(Error::parse(
                        "theorem report",
                        format!("bad pass value `{other}`"),
                    ))
                }
            };
            rows.push(TheoremRow {
                subset: rec[0].parse()?,
                order: rec[1]
                    .parse()
                    .map_err(|_| Error::parse("theorem report", "bad order"))?,
                theoretical: parse_f64(&rec[2])?,
                estimate: parse_f64(&rec[3])?,
                stderr: parse_f64(&rec[4])?,
                pass,
            });
        }
        Ok(TheoremReport { rows })
    }
}

fn draw_keep(keep: &mut [bool], p: f64, rng: &mut LabRng) {
    for k in keep.iter_mut() {
        *k = rng.gen::<f64>() >= p;
    }
}

/// Estimate, for every nonzero term `u`, the factor by which plain input
/// dropout scales `E[f_u(X * M) | X]`.
///
/// At each of `n_points` uniform inputs the `u`-component of the masked
/// model is averaged over `n_masks` masks; the scaling is the
/// through-origin regression slope of that average on `f_u(X)`, with a
/// standard error from the per-point Monte Carlo variance.
pub fn verify_theorem1(
    model: &BasisModel,
    p: f64,
    n_points: usize,
    n_masks: usize,
    seed: u64,
) -> Result<TheoremReport> {
    check_rate(p)?;
    if n_points == 0 || n_masks == 0 {
        return Err(Error::Config("need at least one point and one mask".into()));
    }
    let terms: Vec<(Subset, f64)> = model
        .terms()
        .iter()
        .copied()
        .filter(|(_, t)| *t != 0.0)
        .collect();
    if terms.is_empty() {
        return Err(Error::NothingToVerify("every coefficient is zero".into()));
    }
    let mut rng = seed::rng(seed);
    let d = model.dim();
    let mut x = vec![0.0; d];
    let mut rows = Vec::with_capacity(terms.len());
    for (u, theta) in terms {
        let idx = u.indices();
        let (mut sxy, mut sxx, mut var_num) = (0.0, 0.0, 0.0);
        for _ in 0..n_points {
            x.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
            let f = theta * monomial(u, &x);
            // the component is f when all of u survives, else 0
            let kept = (0..n_masks)
                .filter(|_| idx.iter().all(|_| rng.gen::<f64>() >= p))
                .count();
            let q = kept as f64 / n_masks as f64;
            sxy += f * f * q;
            sxx += f * f;
            let s2 = if n_masks > 1 {
                q * (1.0 - q) * n_masks as f64 / (n_masks - 1) as f64
            } else {
                0.0
            };
            var_num += f.powi(4) * s2 / n_masks as f64;
        }
        let (estimate, stderr) = if sxx > 0.0 {
            (sxy / sxx, var_num.sqrt() / sxx)
        } else {
            (f64::NAN, f64::NAN)
        };
        rows.push(TheoremRow::new(u, p, estimate, stderr)?);
    }
    Ok(TheoremReport { rows })
}

/// Estimate, for every term `u`, the ratio between the expected
/// masked-input squared-loss gradient and the clean gradient
/// `mean_i (model(x_i) - y_i) * prod_{j in u} x_ij`.
///
/// The `n_masks` draws are spread evenly over the samples (at least one
/// each). The ratio of means has a delta-method standard error over
/// samples, so it covers data noise as well as mask noise.
pub fn verify_theorem2(
    model: &BasisModel,
    data: &Dataset,
    p: f64,
    n_masks: usize,
    seed: u64,
) -> Result<TheoremReport> {
    check_rate(p)?;
    if data.d() != model.dim() {
        return Err(Error::Dimension {
            expected: model.dim(),
            got: data.d(),
            context: "dataset features",
        });
    }
    let y = data
        .targets()
        .ok_or_else(|| Error::Config("gradient concordance needs a regression dataset".into()))?;
    let n = data.n();
    if n < 2 {
        return Err(Error::Config("need at least two samples".into()));
    }
    let per_sample = (n_masks / n).max(1);
    let mut rng = seed::rng(seed);
    let k = model.terms().len();
    // a[i][t]: mask-averaged masked gradient contribution, b[i][t]: clean
    let mut a = vec![vec![0.0; k]; n];
    let mut b = vec![vec![0.0; k]; n];
    let mut keep = vec![true; model.dim()];
    for i in 0..n {
        let x = data.row(i);
        let r = model.evaluate(x) - y[i];
        for (t, &(u, _)) in model.terms().iter().enumerate() {
            b[i][t] = r * monomial(u, x);
        }
        if p == 0.0 {
            a[i].clone_from(&b[i]);
            continue;
        }
        for _ in 0..per_sample {
            draw_keep(&mut keep, p, &mut rng);
            let rm = model.evaluate_masked(x, &keep) - y[i];
            for (t, &(u, _)) in model.terms().iter().enumerate() {
                if u.indices().iter().all(|&j| keep[j]) {
                    a[i][t] += rm * monomial(u, x);
                }
            }
        }
        a[i].iter_mut().for_each(|v| *v /= per_sample as f64);
    }
    let nf = n as f64;
    let mut rows = Vec::with_capacity(k);
    for (t, &(u, _)) in model.terms().iter().enumerate() {
        let a_bar = a.iter().map(|v| v[t]).sum::<f64>() / nf;
        let b_bar = b.iter().map(|v| v[t]).sum::<f64>() / nf;
        let (estimate, stderr) = if b_bar == 0.0 {
            (f64::NAN, f64::NAN)
        } else if p == 0.0 {
            (1.0, 0.0)
        } else {
            let ratio = a_bar / b_bar;
            let s2 = a
                .iter()
                .zip(&b)
                .map(|(ai, bi)| (ai[t] - ratio * bi[t]).powi(2))
                .sum::<f64>()
                / (nf - 1.0);
            (ratio, (s2 / nf).sqrt() / b_bar.abs())
        };
        rows.push(TheoremRow::new(u, p, estimate, stderr)?);
    }
    Ok(TheoremReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(ix: &[usize]) -> Subset {
        Subset::from_indices(ix)
    }

    #[test]
    fn rates() {
        assert_eq!(effective_rate(0.0, 7).unwrap(), 1.0);
        assert_eq!(effective_rate(0.5, 3).unwrap(), 0.125);
        assert!((effective_rate(0.2, 2).unwrap() - 0.64).abs() < 1e-15);
        assert!(effective_rate(1.0, 1).is_err());
        assert!(effective_rate(-0.1, 1).is_err());
        let c = RateCurve::new(0.3, 10).unwrap();
        assert_eq!(c.rate(0), 1.0);
        for k in 0..10 {
            assert_eq!(c.rate(k + 1), 0.7 * c.rate(k));
            assert!(c.rate(k + 1) < c.rate(k));
            assert_eq!(c.rate(k), effective_rate(0.3, k).unwrap());
        }
    }

    #[test]
    fn counts() {
        assert_eq!(hypothesis_count(25, 2).unwrap(), 300);
        assert_eq!(hypothesis_count(25, 3).unwrap(), 2300);
        assert_eq!(hypothesis_count(25, 25).unwrap(), 1);
        assert_eq!(hypothesis_count(25, 0).unwrap(), 1);
        assert!(hypothesis_count(3, 4).is_err());
        assert_eq!(
            hypothesis_count(100, 50).unwrap(),
            100_891_344_545_564_193_334_812_497_256
        );
    }

    #[test]
    fn balance() {
        let c = balance_curve(25, 0.5, 3).unwrap();
        assert_eq!(c[2].k, 3);
        assert_eq!(c[2].product, 287.5);
        let raw = balance_curve(25, 0.0, 5).unwrap();
        for pt in &raw {
            assert_eq!(pt.product, pt.count as f64);
        }
        let c = balance_curve(25, 0.99, 2).unwrap();
        assert!((c[1].product - 0.03).abs() < 1e-12);
        assert!(balance_curve(3, 0.5, 4).is_err());
    }

    #[test]
    fn basis_model_validation() {
        assert!(BasisModel::new(2, vec![(s(&[0]), 1.0), (s(&[0]), 2.0)]).is_err());
        assert!(BasisModel::new(2, vec![(s(&[2]), 1.0)]).is_err());
        let m = BasisModel::new(3, vec![(s(&[0, 1]), 2.0), (s(&[2]), -1.0)]).unwrap();
        assert_eq!(m.evaluate(&[0.5, 2.0, 3.0]), -1.0);
    }

    #[test]
    fn theorem1_examples() {
        let m = BasisModel::monomial(2, s(&[0, 1]), 1.0).unwrap();
        let r = verify_theorem1(&m, 0.2, 20, 20_000, 1).unwrap();
        assert!((r.rows[0].estimate - 0.64).abs() < 0.01);
        assert!(r.all_pass());
        let r = verify_theorem1(&m, 0.0, 10, 100, 1).unwrap();
        assert_eq!(r.rows[0].estimate, 1.0);
        assert!(r.all_pass());
        let m3 = BasisModel::monomial(3, s(&[0, 1, 2]), 1.0).unwrap();
        let r = verify_theorem1(&m3, 0.5, 20, 20_000, 2).unwrap();
        assert!((r.rows[0].estimate - 0.125).abs() < 0.01);
        let zero = BasisModel::monomial(2, s(&[0]), 0.0).unwrap();
        assert!(matches!(
            verify_theorem1(&zero, 0.2, 5, 5, 0),
            Err(Error::NothingToVerify(_))
        ));
    }

    #[test]
    fn theorem2_examples() {
        let target =
            BasisModel::new(3, vec![(s(&[0]), 1.0), (s(&[0, 1]), 1.5), (s(&[2]), -0.5)]).unwrap();
        let data = BasisModel::sample_dataset(&target, 2000, 0.1, 7).unwrap();
        let m = BasisModel::monomial(3, s(&[0]), 0.2).unwrap();
        let r = verify_theorem2(&m, &data, 0.3, 200_000, 3).unwrap();
        assert!((r.rows[0].estimate - 0.7).abs() < 0.05, "{:?}", r.rows[0]);
        assert!(r.all_pass());
        let r = verify_theorem2(&m, &data, 0.0, 1000, 3).unwrap();
        assert_eq!(r.rows[0].estimate, 1.0);
        let m2 = BasisModel::monomial(3, s(&[0, 1]), 0.3).unwrap();
        let r = verify_theorem2(&m2, &data, 0.3, 200_000, 4).unwrap();
        assert!((r.rows[0].estimate - 0.49).abs() < 0.05, "{:?}", r.rows[0]);
        assert!(r.all_pass());
    }

    #[test]
    fn zero_clean_gradient_is_flagged() {
        // the model fits the data exactly, so the clean gradient vanishes
        let m = BasisModel::monomial(2, s(&[0]), 1.0).unwrap();
        let data = BasisModel::sample_dataset(&m, 50, 0.0, 1).unwrap();
        let r = verify_theorem2(&m, &data, 0.3, 100, 1).unwrap();
        assert_eq!(r.rows[0].pass, None);
        assert!(!r.all_pass());
    }

    #[test]
    fn report_csv_round_trip() {
        let m = BasisModel::new(3, vec![(s(&[0]), 1.0), (s(&[0, 2]), 0.5)]).unwrap();
        let r = verify_theorem1(&m, 0.5, 5, 100, 9).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("subset,order,theoretical,estimate,stderr,pass\n"));
        assert!(text.contains("\"0,2\",2,"));
        assert_eq!(TheoremReport::read_csv(buf.as_slice()).unwrap(), r);
    }
}
