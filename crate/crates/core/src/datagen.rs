//! Seeded synthetic datasets: pure noise, the three signal generators used
//! for training-dynamics traces, the correlated product toy, and the
//! planted k-way interaction classification surrogate.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::seed;

/// Feature count used by the noise and signal generators unless overridden.
pub const DEFAULT_FEATURES: usize = 25;
/// Noise std used by the signal generators unless overridden.
pub const DEFAULT_SIGMA: f64 = 0.1;
/// Std of the Gaussian-blob class centres in the planted surrogate.
pub const DEFAULT_BLOB_SPREAD: f64 = 0.35;
/// Extra features above this value all together trigger the planted class.
pub const PLANTED_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub enum DensitySpec {
    ProductUniform {
        lo: f64,
        hi: f64,
        d: usize,
    },
    BivariateGaussian {
        rho: f64,
    },
    /// The dataset's own rows; no closed form.
    Empirical,
}

impl DensitySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DensitySpec::ProductUniform { lo, hi, d } => {
                if !(lo < hi) {
                    return Err(Error::InvalidSpec(format!(
                        "product-uniform needs lo < hi, got [{lo}, {hi}]"
                    )));
                }
                if d == 0 {
                    return Err(Error::InvalidSpec("product-uniform needs d >= 1".into()));
                }
                Ok(())
            }
            DensitySpec::BivariateGaussian { rho } => {
                if !(rho.abs() < 1.0) {
                    return Err(Error::InvalidSpec(format!(
                        "bivariate-gaussian needs |rho| < 1, got {rho}"
                    )));
                }
                Ok(())
            }
            DensitySpec::Empirical => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Regression(Vec<f64>),
    Classification { labels: Vec<usize>, classes: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    response: Response,
    density: DensitySpec,
}

impl Dataset {
    pub fn new(features: Array2<f64>, response: Response, density: DensitySpec) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 || d == 0 {
            return Err(Error::InvalidSpec(format!(
                "dataset needs n >= 1 and d >= 1, got {n}x{d}"
            )));
        }
        let len = match &response {
            Response::Regression(y) => y.len(),
            Response::Classification { labels, classes } => {
                if let Some(bad) = labels.iter().find(|&&l| l >= *classes) {
                    return Err(Error::InvalidSpec(format!(
                        "label {bad} outside 0..{classes}"
                    )));
                }
                labels.len()
            }
        };
        if len != n {
            return Err(Error::Dimension {
                expected: n,
                got: len,
                context: "response length",
            });
        }
        density.validate()?;
        let features = if features.is_standard_layout() {
            features
        } else {
            features.as_standard_layout().into_owned()
        };
        Ok(Dataset {
            features,
            response,
            density,
        })
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn response(&self) -> &Response {
        &self.response
    }

    pub fn density(&self) -> &DensitySpec {
        &self.density
    }

    pub fn targets(&self) -> Option<&[f64]> {
        match &self.response {
            Response::Regression(y) => Some(y),
            Response::Classification { .. } => None,
        }
    }

    pub fn labels(&self) -> Option<&[usize]> {
        match &self.response {
            Response::Classification { labels, .. } => Some(labels),
            Response::Regression(_) => None,
        }
    }

    pub fn classes(&self) -> Option<usize> {
        match &self.response {
            Response::Classification { classes, .. } => Some(*classes),
            Response::Regression(_) => None,
        }
    }

    pub fn is_classification(&self) -> bool {
        matches!(self.response, Response::Classification { .. })
    }

    /// Row `i` as a contiguous slice.
    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.d();
        &self.features.as_slice().expect("standard layout")[i * d..(i + 1) * d]
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.features.column(j)
    }

    /// Split into the first `head` rows and the rest.
    pub fn split_at(&self, head: usize) -> Result<(Dataset, Dataset)> {
        if head == 0 || head >= self.n() {
            return Err(Error::InvalidSpec(format!(
                "cannot split {} rows at {head}",
                self.n()
            )));
        }
        let (a, b) = self.features.view().split_at(Axis(0), head);
        let (ra, rb) = match &self.response {
            Response::Regression(y) => (
                Response::Regression(y[..head].to_vec()),
                Response::Regression(y[head..].to_vec()),
            ),
            Response::Classification { labels, classes } => (
                Response::Classification {
                    labels: labels[..head].to_vec(),
                    classes: *classes,
                },
                Response::Classification {
                    labels: labels[head..].to_vec(),
                    classes: *classes,
                },
            ),
        };
        Ok((
            Dataset::new(a.to_owned(), ra, self.density.clone())?,
            Dataset::new(b.to_owned(), rb, self.density.clone())?,
        ))
    }

    /// CSV with header `x0,...,x{d-1},y` or `...,label`; floats carry 17
    /// significant digits so a write/read cycle is lossless.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (0..self.d()).map(|j| format!("x{j}")).collect();
        header.push(
            if self.is_classification() {
                "label"
            } else {
                "y"
            }
            .to_string(),
        );
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(self.d() + 1);
        for i in 0..self.n() {
            record.clear();
            record.extend(self.row(i).iter().map(|v| fmt_f64(*v)));
            record.push(match &self.response {
                Response::Regression(y) => fmt_f64(y[i]),
                Response::Classification { labels, .. } => labels[i].to_string(),
            });
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<dataset csv>", e))?;
        Ok(())
    }

    /// Read a dataset CSV. The class count for classification data is
    /// `max label + 1`; the density is recorded as empirical.
    pub fn read_csv<R: Read>(input: R) -> Result<Dataset> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let cols = header.len();
        if cols < 2 {
            return Err(Error::parse(
                "dataset csv",
                "need at least one feature and a response column",
            ));
        }
        let d = cols - 1;
        for (j, name) in header.iter().take(d).enumerate() {
            if name != format!("x{j}") {
                return Err(Error::parse(
                    "dataset csv",
                    format!("column {j} is `{name}`, expected `x{j}`"),
                ));
            }
        }
        let classification = match &header[d] {
            "y" => false,
            "label" => true,
            other => {
                return Err(Error::parse(
                    "dataset csv",
                    format!("unknown response column `{other}`"),
                ))
            }
        };
        let mut feats = Vec::new();
        let mut ys = Vec::new();
        let mut labels = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            for field in rec.iter().take(d) {
                feats.push(parse_f64(field)?);
            }
            if classification {
                labels.push(
                    rec[d]
                        .parse::<usize>()
                        .map_err(|e| Error::parse("dataset label", e.to_string()))?,
                );
            } else {
                ys.push(parse_f64(&rec[d])?);
            }
        }
        let n = if classification {
            labels.len()
        } else {
            ys.len()
        };
        let features = Array2::from_shape_vec((n, d), feats)
            .map_err(|e| Error::parse("dataset csv", e.to_string()))?;
        let response = if classification {
            let classes = labels.iter().max().map_or(1, |m| m + 1);
            Response::Classification { labels, classes }
        } else {
            Response::Regression(ys)
        };
        Dataset::new(features, response, DensitySpec::Empirical)
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|e| Error::parse("float", format!("`{s}`: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeneratorKind {
    Noise,
    MainEffects,
    PairEffects,
    ThreeWayEffects,
    CorrelatedProduct,
    PlantedInteraction,
}

impl GeneratorKind {
    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::Noise => "noise",
            GeneratorKind::MainEffects => "main-effects",
            GeneratorKind::PairEffects => "pair-effects",
            GeneratorKind::ThreeWayEffects => "three-way-effects",
            GeneratorKind::CorrelatedProduct => "correlated-product",
            GeneratorKind::PlantedInteraction => "planted-interaction",
        }
    }

    /// Nominal interaction order of a signal generator's mean function.
    pub fn nominal_order(self) -> Option<usize> {
        match self {
            GeneratorKind::MainEffects => Some(1),
            GeneratorKind::PairEffects => Some(2),
            GeneratorKind::ThreeWayEffects => Some(3),
            _ => None,
        }
    }

    /// Mean function of a signal generator.
    pub fn mean_function(self, x: &[f64]) -> Option<f64> {
        match self {
            GeneratorKind::MainEffects => Some(x[0].sin() + x[1].cos()),
            GeneratorKind::PairEffects => Some(x[0].sin() * x[1].cos()),
            GeneratorKind::ThreeWayEffects => Some(x[0].sin() * x[1].cos() * x[2]),
            _ => None,
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "noise" => GeneratorKind::Noise,
            "main-effects" | "main" => GeneratorKind::MainEffects,
            "pair-effects" | "pair" => GeneratorKind::PairEffects,
            "three-way-effects" | "three-way" => GeneratorKind::ThreeWayEffects,
            "correlated-product" => GeneratorKind::CorrelatedProduct,
            "planted-interaction" => GeneratorKind::PlantedInteraction,
            other => {
                return Err(Error::InvalidSpec(format!(
                    "unknown generator kind `{other}`"
                )))
            }
        })
    }
}

/// Full description of a synthetic dataset. Fields that do not apply to
/// `kind` must be left `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub d: Option<usize>,
    pub sigma: Option<f64>,
    pub rho: Option<f64>,
    pub k: Option<usize>,
    pub d_base: Option<usize>,
    pub c_base: Option<usize>,
    pub spread: Option<f64>,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, n: usize, seed: u64) -> Self {
        GeneratorSpec {
            kind,
            n,
            d: None,
            sigma: None,
            rho: None,
            k: None,
            d_base: None,
            c_base: None,
            spread: None,
            seed,
        }
    }

    pub fn noise(n: usize, d: usize, seed: u64) -> Self {
        GeneratorSpec {
            d: Some(d),
            ..Self::new(GeneratorKind::Noise, n, seed)
        }
    }

    pub fn signal(kind: GeneratorKind, n: usize, sigma: f64, seed: u64) -> Self {
        GeneratorSpec {
            sigma: Some(sigma),
            ..Self::new(kind, n, seed)
        }
    }

    pub fn correlated_product(n: usize, rho: f64, seed: u64) -> Self {
        GeneratorSpec {
            rho: Some(rho),
            ..Self::new(GeneratorKind::CorrelatedProduct, n, seed)
        }
    }

    pub fn planted(n: usize, d_base: usize, c_base: usize, k: usize, seed: u64) -> Self {
        GeneratorSpec {
            d_base: Some(d_base),
            c_base: Some(c_base),
            k: Some(k),
            ..Self::new(GeneratorKind::PlantedInteraction, n, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        use GeneratorKind::*;
        if self.n == 0 {
            return Err(Error::InvalidSpec("n must be >= 1".into()));
        }
        let allowed: &[&str] = match self.kind {
            Noise => &["d"],
            MainEffects | PairEffects | ThreeWayEffects => &["d", "sigma"],
            CorrelatedProduct => &["rho"],
            PlantedInteraction => &["k", "d_base", "c_base", "spread"],
        };
        let set = [
            ("d", self.d.is_some()),
            ("sigma", self.sigma.is_some()),
            ("rho", self.rho.is_some()),
            ("k", self.k.is_some()),
            ("d_base", self.d_base.is_some()),
            ("c_base", self.c_base.is_some()),
            ("spread", self.spread.is_some()),
        ];
        for (name, present) in set {
            if present && !allowed.contains(&name) {
                return Err(Error::InvalidSpec(format!(
                    "parameter `{name}` does not apply to {}",
                    self.kind
                )));
            }
        }
        if let Some(d) = self.d {
            if d == 0 {
                return Err(Error::InvalidSpec("d must be >= 1".into()));
            }
            if self.kind.nominal_order().is_some_and(|k| d < k) {
                return Err(Error::InvalidSpec(format!(
                    "{} needs d >= {}",
                    self.kind,
                    self.kind.nominal_order().unwrap_or(1)
                )));
            }
        }
        if let Some(sigma) = self.sigma {
            if !(sigma >= 0.0) || !sigma.is_finite() {
                return Err(Error::InvalidSpec(format!(
                    "sigma must be finite and >= 0, got {sigma}"
                )));
            }
        }
        match self.kind {
            CorrelatedProduct => {
                let rho = self
                    .rho
                    .ok_or_else(|| Error::InvalidSpec("correlated-product needs rho".into()))?;
                DensitySpec::BivariateGaussian { rho }.validate()?;
            }
            PlantedInteraction => {
                let k = self
                    .k
                    .ok_or_else(|| Error::InvalidSpec("planted-interaction needs k".into()))?;
                let c = self
                    .c_base
                    .ok_or_else(|| Error::InvalidSpec("planted-interaction needs c_base".into()))?;
                let db = self
                    .d_base
                    .ok_or_else(|| Error::InvalidSpec("planted-interaction needs d_base".into()))?;
                if k == 0 {
                    return Err(Error::InvalidSpec("planted order k must be >= 1".into()));
                }
                if c < 2 {
                    return Err(Error::InvalidSpec("planted task needs c_base >= 2".into()));
                }
                if db == 0 {
                    return Err(Error::InvalidSpec("planted task needs d_base >= 1".into()));
                }
                if let Some(s) = self.spread {
                    if !(s > 0.0) {
                        return Err(Error::InvalidSpec(format!(
                            "blob spread must be > 0, got {s}"
                        )));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<Dataset> {
        self.validate()?;
        let n = self.n;
        match self.kind {
            GeneratorKind::Noise => noise_impl(n, self.d.unwrap_or(DEFAULT_FEATURES), self.seed),
            kind @ (GeneratorKind::MainEffects
            | GeneratorKind::PairEffects
            | GeneratorKind::ThreeWayEffects) => signal_impl(
                kind,
                n,
                self.d.unwrap_or(DEFAULT_FEATURES),
                self.sigma.unwrap_or(DEFAULT_SIGMA),
                self.seed,
            ),
            GeneratorKind::CorrelatedProduct => {
                correlated_impl(n, self.rho.unwrap_or(0.0), self.seed)
            }
            GeneratorKind::PlantedInteraction => planted_impl(
                n,
                self.d_base.unwrap_or(50),
                self.c_base.unwrap_or(20),
                self.k.unwrap_or(1),
                self.spread.unwrap_or(DEFAULT_BLOB_SPREAD),
                self.seed,
            )
            .map(|(ds, _)| ds),
        }
    }
}

/// `n` rows of `d` i.i.d. Unif(-1, 1) features with Y ~ N(0, 1) independent of X.
pub fn gen_noise(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    GeneratorSpec::noise(n, d, seed).generate()
}

/// One of the three signal generators at the default width of 25 features.
pub fn gen_signal(kind: GeneratorKind, n: usize, sigma: f64, seed: u64) -> Result<Dataset> {
    if kind.nominal_order().is_none() {
        return Err(Error::InvalidSpec(format!(
            "`{kind}` is not a signal generator"
        )));
    }
    GeneratorSpec::signal(kind, n, sigma, seed).generate()
}

/// (X1, X2) standard bivariate Gaussian with correlation `rho`, Y = X1 * X2.
pub fn gen_correlated_product(n: usize, rho: f64, seed: u64) -> Result<Dataset> {
    GeneratorSpec::correlated_product(n, rho, seed).generate()
}

/// Gaussian-blob classification task with `k` extra Unif(0, 1) features;
/// rows whose extra features all exceed 0.5 are relabelled to class `c_base`.
pub fn gen_planted_interaction(
    n: usize,
    d_base: usize,
    c_base: usize,
    k: usize,
    seed: u64,
) -> Result<Dataset> {
    GeneratorSpec::planted(n, d_base, c_base, k, seed).generate()
}

/// Same as [`gen_planted_interaction`] but also returns the base-task labels
/// before the planted class was written over them.
pub fn gen_planted_with_base(
    n: usize,
    d_base: usize,
    c_base: usize,
    k: usize,
    spread: f64,
    seed: u64,
) -> Result<(Dataset, Vec<usize>)> {
    let mut spec = GeneratorSpec::planted(n, d_base, c_base, k, seed);
    spec.spread = Some(spread);
    spec.validate()?;
    planted_impl(n, d_base, c_base, k, spread, seed)
}

/// Label rule of the planted task.
pub fn planted_label(base_label: usize, extras: &[f64], c_base: usize) -> usize {
    if extras.iter().all(|&u| u > PLANTED_THRESHOLD) {
        c_base
    } else {
        base_label
    }
}

fn uniform_features(rng: &mut seed::LabRng, n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, d), || rng.gen_range(-1.0..=1.0))
}

fn noise_impl(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    let mut rng = seed::rng(seed);
    let x = uniform_features(&mut rng, n, d);
    let y = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    Dataset::new(
        x,
        Response::Regression(y),
        DensitySpec::ProductUniform {
            lo: -1.0,
            hi: 1.0,
            d,
        },
    )
}

fn signal_impl(kind: GeneratorKind, n: usize, d: usize, sigma: f64, seed: u64) -> Result<Dataset> {
    let mut rng = seed::rng(seed);
    let x = uniform_features(&mut rng, n, d);
    let y = x
        .rows()
        .into_iter()
        .map(|row| {
            let mean = kind
                .mean_function(row.as_slice().expect("row"))
                .expect("signal kind");
            let eps: f64 = StandardNormal.sample(&mut rng);
            mean + sigma * eps
        })
        .collect();
    Dataset::new(
        x,
        Response::Regression(y),
        DensitySpec::ProductUniform {
            lo: -1.0,
            hi: 1.0,
            d,
        },
    )
}

fn correlated_impl(n: usize, rho: f64, seed: u64) -> Result<Dataset> {
    let mut rng = seed::rng(seed);
    let c = (1.0 - rho * rho).sqrt();
    let mut x = Array2::zeros((n, 2));
    let mut y = Vec::with_capacity(n);
    for mut row in x.rows_mut() {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        let x1 = z1;
        let x2 = rho * z1 + c * z2;
        row[0] = x1;
        row[1] = x2;
        y.push(x1 * x2);
    }
    Dataset::new(
        x,
        Response::Regression(y),
        DensitySpec::BivariateGaussian { rho },
    )
}

fn planted_impl(
    n: usize,
    d_base: usize,
    c_base: usize,
    k: usize,
    spread: f64,
    seed: u64,
) -> Result<(Dataset, Vec<usize>)> {
    let mut rng = seed::rng(seed);
    let centres: Vec<Vec<f64>> = (0..c_base)
        .map(|_| {
            (0..d_base)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    spread * z
                })
                .collect()
        })
        .collect();
    let d = d_base + k;
    let mut x = Array2::zeros((n, d));
    let mut base = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for mut row in x.rows_mut() {
        let class = rng.gen_range(0..c_base);
        for (j, c) in centres[class].iter().enumerate() {
            let z: f64 = StandardNormal.sample(&mut rng);
            row[j] = c + z;
        }
        for j in 0..k {
            row[d_base + j] = rng.gen_range(0.0..=1.0);
        }
        let extras = row.as_slice().expect("row")[d_base..].to_vec();
        base.push(class);
        labels.push(planted_label(class, &extras, c_base));
    }
    let ds = Dataset::new(
        x,
        Response::Classification {
            labels,
            classes: c_base + 1,
        },
        DensitySpec::Empirical,
    )?;
    Ok((ds, base))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(v: impl Iterator<Item = f64>) -> f64 {
        let (s, c) = v.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
        s / c as f64
    }

    #[test]
    fn noise_shape_and_feature_means() {
        let ds = gen_noise(1500, 25, 7).unwrap();
        assert_eq!((ds.n(), ds.d()), (1500, 25));
        for j in 0..25 {
            assert!(
                mean(ds.column(j).iter().copied()).abs() < 0.05,
                "feature {j}"
            );
        }
        assert_eq!(
            ds.density(),
            &DensitySpec::ProductUniform {
                lo: -1.0,
                hi: 1.0,
                d: 25
            }
        );
    }

    #[test]
    fn noise_single_row() {
        let ds = gen_noise(1, 1, 0).unwrap();
        let v = ds.row(0)[0];
        assert!((-1.0..=1.0).contains(&v));
    }

    #[test]
    fn noise_targets_independent_of_features() {
        let ds = gen_noise(10_000, 2, 3).unwrap();
        let y = ds.targets().unwrap();
        let my = mean(y.iter().copied());
        for j in 0..2 {
            let col = ds.column(j);
            let mx = mean(col.iter().copied());
            let cov = mean(col.iter().zip(y).map(|(x, y)| (x - mx) * (y - my)));
            assert!(cov.abs() < 0.03, "cov {cov}");
        }
    }

    #[test]
    fn zero_sizes_rejected() {
        assert!(matches!(gen_noise(0, 3, 1), Err(Error::InvalidSpec(_))));
        assert!(matches!(gen_noise(3, 0, 1), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn main_effects_without_noise_is_exact() {
        let ds = gen_signal(GeneratorKind::MainEffects, 1500, 0.0, 1).unwrap();
        for (i, y) in ds.targets().unwrap().iter().enumerate() {
            let r = ds.row(i);
            assert_eq!(*y, r[0].sin() + r[1].cos());
        }
        assert_eq!(ds.d(), 25);
    }

    #[test]
    fn pair_effects_variance_matches_quadrature() {
        // Oracle: Gauss-Legendre-free composite Simpson on [-1, 1].
        let simpson = |f: &dyn Fn(f64) -> f64| {
            let m = 2000;
            let h = 2.0 / m as f64;
            let mut s = f(-1.0) + f(1.0);
            for i in 1..m {
                let x = -1.0 + i as f64 * h;
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
            }
            s * h / 3.0 / 2.0
        };
        let e_sin2 = simpson(&|x: f64| x.sin().powi(2));
        let e_cos2 = simpson(&|x: f64| x.cos().powi(2));
        let e_sin = simpson(&|x: f64| x.sin());
        let e_cos = simpson(&|x: f64| x.cos());
        let var = e_sin2 * e_cos2 - (e_sin * e_cos).powi(2);
        assert!((var - 0.198_35).abs() < 1e-4, "oracle variance {var}");

        let ds = gen_signal(GeneratorKind::PairEffects, 100_000, 0.0, 2).unwrap();
        let y = ds.targets().unwrap();
        let my = mean(y.iter().copied());
        let vy = mean(y.iter().map(|v| (v - my).powi(2)));
        assert!((vy / var - 1.0).abs() < 0.02, "sample {vy} vs {var}");
    }

    #[test]
    fn three_way_residual_variance_is_sigma_squared() {
        let ds = gen_signal(GeneratorKind::ThreeWayEffects, 1500, 0.1, 5).unwrap();
        let y = ds.targets().unwrap();
        let resid: Vec<f64> = (0..ds.n())
            .map(|i| {
                y[i] - GeneratorKind::ThreeWayEffects
                    .mean_function(ds.row(i))
                    .unwrap()
            })
            .collect();
        let m = mean(resid.iter().copied());
        let v = mean(resid.iter().map(|r| (r - m).powi(2)));
        assert!((v / 0.01 - 1.0).abs() < 0.15, "{v}");
    }

    #[test]
    fn non_signal_kind_rejected_by_gen_signal() {
        assert!(gen_signal(GeneratorKind::Noise, 10, 0.1, 0).is_err());
    }

    #[test]
    fn correlated_product_statistics() {
        let ds = gen_correlated_product(50_000, 0.01, 4).unwrap();
        let a = ds.column(0);
        let b = ds.column(1);
        let (ma, mb) = (mean(a.iter().copied()), mean(b.iter().copied()));
        let cov = mean(a.iter().zip(b.iter()).map(|(x, y)| (x - ma) * (y - mb)));
        let va = mean(a.iter().map(|x| (x - ma).powi(2)));
        let vb = mean(b.iter().map(|x| (x - mb).powi(2)));
        let corr = cov / (va * vb).sqrt();
        assert!((corr - 0.01).abs() < 0.01, "corr {corr}");

        let hi = gen_correlated_product(50_000, 0.99, 4).unwrap();
        let my = mean(hi.targets().unwrap().iter().copied());
        assert!((my / 0.99 - 1.0).abs() < 0.02, "mean {my}");
    }

    #[test]
    fn correlated_product_target_is_product() {
        let ds = gen_correlated_product(10, 0.0, 0).unwrap();
        for i in 0..10 {
            let r = ds.row(i);
            assert_eq!(ds.targets().unwrap()[i], r[0] * r[1]);
        }
        assert!(gen_correlated_product(10, 1.0, 0).is_err());
        assert!(gen_correlated_product(10, -1.5, 0).is_err());
    }

    #[test]
    fn planted_class_fraction() {
        for (k, expect, tol) in [(1usize, 0.5, 0.03), (3, 0.125, 0.02)] {
            let ds = gen_planted_interaction(4000, 50, 20, k, 9).unwrap();
            let frac = ds.labels().unwrap().iter().filter(|&&l| l == 20).count() as f64 / 4000.0;
            assert!((frac - expect).abs() < tol, "k={k} frac={frac}");
            assert_eq!(ds.d(), 50 + k);
            assert_eq!(ds.classes(), Some(21));
        }
    }

    #[test]
    fn planted_rule_holds_row_by_row() {
        let (ds, base) = gen_planted_with_base(3000, 10, 5, 2, DEFAULT_BLOB_SPREAD, 11).unwrap();
        let labels = ds.labels().unwrap();
        for i in 0..ds.n() {
            let extras = &ds.row(i)[10..];
            let planted = extras.iter().all(|&u| u > 0.5);
            if planted {
                assert_eq!(labels[i], 5);
            } else {
                assert_eq!(labels[i], base[i]);
                assert!(labels[i] < 5);
            }
        }
    }

    #[test]
    fn planted_label_unchanged_below_threshold() {
        assert_eq!(planted_label(7, &[0.4], 20), 7);
        assert_eq!(planted_label(7, &[0.6], 20), 20);
        assert_eq!(planted_label(7, &[0.6, 0.2, 0.9], 20), 7);
    }

    #[test]
    fn irrelevant_parameters_rejected() {
        let mut spec = GeneratorSpec::noise(10, 3, 0);
        spec.rho = Some(0.5);
        assert!(spec.generate().is_err());
        let mut spec = GeneratorSpec::correlated_product(10, 0.5, 0);
        spec.sigma = Some(0.1);
        assert!(spec.generate().is_err());
        let spec = GeneratorSpec::signal(GeneratorKind::MainEffects, 10, -0.1, 0);
        assert!(spec.generate().is_err());
        assert!(GeneratorSpec::planted(10, 5, 1, 1, 0).generate().is_err());
        assert!(GeneratorSpec::planted(10, 5, 3, 0, 0).generate().is_err());
    }

    #[test]
    fn density_validation() {
        assert!(DensitySpec::ProductUniform {
            lo: 1.0,
            hi: 1.0,
            d: 1
        }
        .validate()
        .is_err());
        assert!(DensitySpec::BivariateGaussian { rho: 1.0 }
            .validate()
            .is_err());
        assert!(DensitySpec::BivariateGaussian { rho: 0.3 }
            .validate()
            .is_ok());
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let ds = gen_noise(20, 3, 1).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x0,x1,x2,y\n"));
        let back = Dataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.features(), ds.features());
        assert_eq!(back.targets(), ds.targets());

        let cls = gen_planted_interaction(30, 4, 3, 1, 2).unwrap();
        let mut buf = Vec::new();
        cls.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf)
            .lines()
            .next()
            .unwrap()
            .ends_with(",label"));
        let back = Dataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.labels(), cls.labels());
    }

    #[test]
    fn split_keeps_rows() {
        let ds = gen_noise(10, 2, 3).unwrap();
        let (a, b) = ds.split_at(7).unwrap();
        assert_eq!((a.n(), b.n()), (7, 3));
        assert_eq!(b.row(0), ds.row(7));
    }
}
