//! Depth-staged boosted trees that distill a black-box predictor.
//!
//! Stage `k` boosts depth-`k` trees on whatever the shallower stages left
//! unexplained, so its prediction is read as the order-`k` part of the
//! teacher. Whatever survives the last stage is reported as the `>= K`
//! bucket.

mod report;
mod text;
mod tree;

pub use report::{EffectSizeReport, CONSTANT_VARIANCE};
pub use text::{read_distillation, write_distillation};
pub use tree::{fit_tree, fit_tree_with, Node, Presorted, Tree, TreeBuilder, DEFAULT_MIN_LEAF};

use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DistillConfig {
    /// Stages cover orders `1..max_order`; the residual is the `>= max_order` bucket.
    pub max_order: usize,
    pub rounds: usize,
    pub shrinkage: f64,
    pub min_leaf: usize,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            max_order: 4,
            rounds: 300,
            shrinkage: 0.3,
            min_leaf: DEFAULT_MIN_LEAF,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_order < 2 {
            return Err(Error::Config("distillation needs max order K >= 2".into()));
        }
        if self.rounds == 0 {
            return Err(Error::Config("boosting needs at least one round".into()));
        }
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return Err(Error::Config(format!(
                "shrinkage must lie in (0, 1], got {}",
                self.shrinkage
            )));
        }
        Ok(())
    }
}

/// Boosted ensemble of trees sharing one depth bound.
#[derive(Debug, Clone, PartialEq)]
pub struct StageEnsemble {
    pub depth: usize,
    pub shrinkage: f64,
    pub trees: Vec<Tree>,
    /// Training MSE against the stage's target after each round.
    pub train_mse: Vec<f64>,
}

impl StageEnsemble {
    pub fn rounds(&self) -> usize {
        self.trees.len()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.shrinkage * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

/// Standard least-squares boosting of depth-`depth` trees on `target`.
pub fn fit_stage(
    x: &Array2<f64>,
    target: &[f64],
    depth: usize,
    rounds: usize,
    shrinkage: f64,
) -> Result<StageEnsemble> {
    if target.len() != x.nrows() {
        return Err(Error::Dimension {
            expected: x.nrows(),
            got: target.len(),
            context: "stage target",
        });
    }
    if x.nrows() < 2 || depth == 0 || rounds == 0 {
        return Err(Error::Config(
            "stage needs >= 2 samples, depth >= 1 and rounds >= 1".into(),
        ));
    }
    let data = Presorted::new(x);
    let mut residual = target.to_vec();
    Ok(fit_stage_presorted(
        &data,
        &mut residual,
        depth,
        rounds,
        shrinkage,
        DEFAULT_MIN_LEAF,
    ))
}

/// Boost on `residual` in place; on return it holds what the stage left.
fn fit_stage_presorted(
    data: &Presorted,
    residual: &mut [f64],
    depth: usize,
    rounds: usize,
    shrinkage: f64,
    min_leaf: usize,
) -> StageEnsemble {
    let mut trees = Vec::with_capacity(rounds);
    let mut train_mse = Vec::with_capacity(rounds);
    let n = residual.len() as f64;
    for _ in 0..rounds {
        let (tree, fitted) = TreeBuilder::new(data, residual, depth, min_leaf).fit();
        for (r, f) in residual.iter_mut().zip(&fitted) {
            *r -= shrinkage * f;
        }
        train_mse.push(residual.iter().map(|r| r * r).sum::<f64>() / n);
        trees.push(tree);
    }
    StageEnsemble {
        depth,
        shrinkage,
        trees,
        train_mse,
    }
}

/// Teacher mean plus one boosted stage per order below `max_order`.
#[derive(Debug, Clone, PartialEq)]
pub struct StagedDistillation {
    pub max_order: usize,
    pub teacher_mean: f64,
    pub stages: Vec<StageEnsemble>,
    /// Rows the stages were fit on (empty when loaded from text).
    pub reference_inputs: Array2<f64>,
}

impl StagedDistillation {
    pub fn predict_stage(&self, order: usize, x: &[f64]) -> f64 {
        self.stages[order - 1].predict(x)
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.teacher_mean + self.stages.iter().map(|s| s.predict(x)).sum::<f64>()
    }

    /// Per-order effect sizes on `x_eval`: the variance of each stage's
    /// prediction, and for the `>= K` bucket the variance of teacher minus
    /// the whole distilled model.
    pub fn effect_sizes<F>(&self, teacher: F, x_eval: &Array2<f64>) -> Result<EffectSizeReport>
    where
        F: Fn(&[f64]) -> f64,
    {
        let n = x_eval.nrows();
        if n == 0 {
            return Err(Error::Config(
                "effect sizes need at least one evaluation sample".into(),
            ));
        }
        let x_eval = x_eval.as_standard_layout();
        let d = x_eval.ncols();
        let flat = x_eval.as_slice().expect("standard layout");
        let k = self.max_order;
        let mut cols = vec![Vec::with_capacity(n); k];
        let mut teacher_vals = Vec::with_capacity(n);
        for i in 0..n {
            let row = &flat[i * d..(i + 1) * d];
            let t = teacher(row);
            if !t.is_finite() {
                return Err(Error::Distillation {
                    sample: i,
                    value: t,
                });
            }
            let mut rest = t - self.teacher_mean;
            for (s, stage) in self.stages.iter().enumerate() {
                let p = stage.predict(row);
                rest -= p;
                cols[s].push(p);
            }
            cols[k - 1].push(rest);
            teacher_vals.push(t);
        }
        let variance: Vec<f64> = cols.iter().map(|c| population_variance(c)).collect();
        Ok(EffectSizeReport::new(
            variance,
            population_variance(&teacher_vals),
        ))
    }
}

/// Distill `teacher` on the rows of `x` into depth-staged ensembles.
pub fn distill<F>(teacher: F, x: &Array2<f64>, cfg: &DistillConfig) -> Result<StagedDistillation>
where
    F: Fn(&[f64]) -> f64,
{
    cfg.validate()?;
    if x.nrows() < 2 {
        return Err(Error::Config(
            "distillation needs at least 2 samples".into(),
        ));
    }
    let data = Presorted::new(x);
    let mut y = Vec::with_capacity(data.n());
    for i in 0..data.n() {
        let v = teacher(data.row(i));
        if !v.is_finite() {
            return Err(Error::Distillation {
                sample: i,
                value: v,
            });
        }
        y.push(v);
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let mut residual: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let stages = (1..cfg.max_order)
        .map(|depth| {
            fit_stage_presorted(
                &data,
                &mut residual,
                depth,
                cfg.rounds,
                cfg.shrinkage,
                cfg.min_leaf,
            )
        })
        .collect();
    Ok(StagedDistillation {
        max_order: cfg.max_order,
        teacher_mean: mean,
        stages,
        reference_inputs: x.to_owned(),
    })
}

pub(crate) fn population_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    fn uniform(n: usize, d: usize, s: u64) -> Array2<f64> {
        let mut rng = seed::rng(s);
        Array2::from_shape_simple_fn((n, d), || rng.gen_range(-1.0..1.0))
    }

    fn rows(x: &Array2<f64>) -> impl Iterator<Item = &[f64]> {
        x.as_slice().unwrap().chunks(x.ncols())
    }

    #[test]
    fn single_round_full_shrinkage_equals_tree() {
        let x = uniform(200, 3, 1);
        let r: Vec<f64> = rows(&x).map(|v| v[0].sin() + v[1] * v[2]).collect();
        let stage = fit_stage(&x, &r, 2, 1, 1.0).unwrap();
        let tree = fit_tree(&x, &r, 2).unwrap();
        for v in rows(&x) {
            assert_eq!(stage.predict(v), tree.predict(v));
        }
    }

    #[test]
    fn boosting_mse_is_non_increasing() {
        let x = uniform(300, 4, 2);
        let r: Vec<f64> = rows(&x).map(|v| v[0] * v[1] + v[2].cos()).collect();
        for depth in 1..=3 {
            let s = fit_stage(&x, &r, depth, 50, 0.1).unwrap();
            assert!(s.train_mse.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        }
    }

    #[test]
    fn stumps_recover_additive_teacher() {
        let x = uniform(1500, 3, 3);
        let teacher = |v: &[f64]| v[0].sin() + v[1].cos();
        let y: Vec<f64> = rows(&x).map(teacher).collect();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let centred: Vec<f64> = y.iter().map(|v| v - mean).collect();
        let stage = fit_stage(&x, &centred, 1, 300, 0.1).unwrap();
        let held = uniform(2000, 3, 4);
        let (mut sse, mut sst) = (0.0, 0.0);
        let ht: Vec<f64> = rows(&held).map(teacher).collect();
        let hm = ht.iter().sum::<f64>() / ht.len() as f64;
        for (v, t) in rows(&held).zip(&ht) {
            sse += (t - mean - stage.predict(v)).powi(2);
            sst += (t - hm).powi(2);
        }
        let r2 = 1.0 - sse / sst;
        assert!(r2 >= 0.95, "R^2 {r2}");
    }

    #[test]
    fn stumps_cannot_capture_pure_pair() {
        let x = uniform(1500, 2, 5);
        let r: Vec<f64> = rows(&x).map(|v| v[0] * v[1]).collect();
        let stage = fit_stage(&x, &r, 1, 300, 0.1).unwrap();
        let held = uniform(4000, 2, 6);
        let preds: Vec<f64> = rows(&held).map(|v| stage.predict(v)).collect();
        let target: Vec<f64> = rows(&held).map(|v| v[0] * v[1]).collect();
        let ratio = population_variance(&preds) / population_variance(&target);
        assert!(ratio < 0.05, "stage/residual variance {ratio}");
    }

    #[test]
    fn distill_additive_teacher_is_order_one() {
        let x = uniform(1500, 3, 7);
        let teacher = |v: &[f64]| v[0].sin() + v[1].cos();
        let cfg = DistillConfig {
            max_order: 3,
            ..DistillConfig::default()
        };
        let d = distill(teacher, &x, &cfg).unwrap();
        assert_eq!(d.stages.len(), 2);
        let rep = d.effect_sizes(teacher, &uniform(3000, 3, 8)).unwrap();
        let shares = rep.shares.as_ref().unwrap();
        assert!(shares[0] >= 0.9, "{shares:?}");
        assert!(shares[1] <= 0.05, "{shares:?}");
    }

    #[test]
    fn distill_product_teacher_is_order_two() {
        let x = uniform(1500, 3, 9);
        let teacher = |v: &[f64]| v[0] * v[1];
        let cfg = DistillConfig {
            max_order: 3,
            ..DistillConfig::default()
        };
        let d = distill(teacher, &x, &cfg).unwrap();
        let rep = d.effect_sizes(teacher, &uniform(3000, 3, 10)).unwrap();
        let shares = rep.shares.as_ref().unwrap();
        assert!(shares[1] >= 0.8, "{shares:?}");
    }

    #[test]
    fn constant_teacher_has_no_effects() {
        let x = uniform(100, 2, 11);
        let d = distill(|_| 3.0, &x, &DistillConfig::default()).unwrap();
        assert_eq!(d.teacher_mean, 3.0);
        let rep = d.effect_sizes(|_| 3.0, &uniform(50, 2, 12)).unwrap();
        assert!(rep.variance.iter().all(|&v| v == 0.0));
        assert!(rep.shares.is_none());
    }

    #[test]
    fn non_finite_teacher_is_an_error() {
        let x = uniform(20, 2, 13);
        let r = distill(
            |v: &[f64]| if v[0] > 0.5 { f64::NAN } else { 0.0 },
            &x,
            &DistillConfig::default(),
        );
        assert!(matches!(r, Err(Error::Distillation { .. })));
    }

    #[test]
    fn config_validation() {
        let x = uniform(20, 2, 14);
        for cfg in [
            DistillConfig {
                max_order: 1,
                ..DistillConfig::default()
            },
            DistillConfig {
                rounds: 0,
                ..DistillConfig::default()
            },
            DistillConfig {
                shrinkage: 0.0,
                ..DistillConfig::default()
            },
        ] {
            assert!(distill(|v: &[f64]| v[0], &x, &cfg).is_err());
        }
    }
}
