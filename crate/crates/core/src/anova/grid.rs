use std::sync::Arc;

use super::{Subset, MAX_DIM};
use crate::error::{Error, Result};

/// Bivariate-Gaussian grids cover `[-3, 3]` on each axis.
pub const GAUSSIAN_TRUNCATION: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
enum Weights {
    /// One normalized weight vector per axis.
    Product(Vec<Vec<f64>>),
    /// Normalized weight per grid point, row-major with axis 0 slowest.
    Tensor(Vec<f64>),
}

/// Tensor grid of points with a discrete probability mass on them.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGrid {
    axes: Vec<Vec<f64>>,
    weights: Weights,
}

fn check_axes(axes: &[Vec<f64>]) -> Result<()> {
    if axes.is_empty() || axes.len() > MAX_DIM {
        return Err(Error::UnsupportedDimension(format!(
            "grids need 1..={MAX_DIM} axes, got {}",
            axes.len()
        )));
    }
    for (a, axis) in axes.iter().enumerate() {
        if axis.is_empty() {
            return Err(Error::InvalidSpec(format!("axis {a} has no points")));
        }
        if axis.iter().any(|v| !v.is_finite()) || axis.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSpec(format!(
                "axis {a} must be finite and strictly increasing"
            )));
        }
    }
    Ok(())
}

fn normalized(w: &[f64], what: &str) -> Result<Vec<f64>> {
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidSpec(format!(
            "{what} must be finite and nonnegative"
        )));
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidSpec(format!("{what} carry no mass")));
    }
    Ok(w.iter().map(|v| v / total).collect())
}

fn midpoints(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo < hi) || n == 0 {
        return Err(Error::InvalidSpec(format!(
            "bad interval [{lo}, {hi}] with {n} points"
        )));
    }
    let h = (hi - lo) / n as f64;
    Ok((0..n).map(|i| lo + (i as f64 + 0.5) * h).collect())
}

impl WeightedGrid {
    /// Product-form weights from per-axis (unnormalized) weights.
    pub fn product(axes: Vec<Vec<f64>>, axis_weights: Vec<Vec<f64>>) -> Result<Self> {
        check_axes(&axes)?;
        if axis_weights.len() != axes.len() {
            return Err(Error::Dimension {
                expected: axes.len(),
                got: axis_weights.len(),
                context: "per-axis weight vectors",
            });
        }
        let mut ws = Vec::with_capacity(axes.len());
        for (a, (axis, w)) in axes.iter().zip(&axis_weights).enumerate() {
            if w.len() != axis.len() {
                return Err(Error::Dimension {
                    expected: axis.len(),
                    got: w.len(),
                    context: "axis weights",
                });
            }
            ws.push(normalized(w, &format!("axis {a} weights"))?);
        }
        Ok(WeightedGrid {
            axes,
            weights: Weights::Product(ws),
        })
    }

    /// Full tensor of (unnormalized) weights. Weights that factor across
    /// axes up to rounding are stored in product form.
    pub fn tensor(axes: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        check_axes(&axes)?;
        let size: usize = axes.iter().map(Vec::len).product();
        if weights.len() != size {
            return Err(Error::Dimension {
                expected: size,
                got: weights.len(),
                context: "grid weights",
            });
        }
        let w = normalized(&weights, "grid weights")?;
        let mut grid = WeightedGrid {
            axes,
            weights: Weights::Tensor(w),
        };
        let marginals: Vec<Vec<f64>> = (0..grid.dim())
            .map(|a| grid.marginal(Subset::from_indices(&[a])))
            .collect();
        let Weights::Tensor(w) = &grid.weights else {
            unreachable!()
        };
        let max = w.iter().cloned().fold(0.0, f64::max);
        let shape = grid.shape();
        let mut digits = vec![0usize; shape.len()];
        let factors = w.iter().all(|&v| {
            let p: f64 = digits
                .iter()
                .enumerate()
                .map(|(a, &i)| marginals[a][i])
                .product();
            advance(&mut digits, &shape);
            (v - p).abs() <= 1e-13 * max
        });
        if factors {
            grid.weights = Weights::Product(marginals);
        }
        Ok(grid)
    }

    /// Cell midpoints of `[lo, hi]^d`, `n` per axis, equal weights.
    pub fn uniform_midpoint(lo: f64, hi: f64, n: usize, d: usize) -> Result<Self> {
        let axis = midpoints(lo, hi, n)?;
        WeightedGrid::product(vec![axis; d], vec![vec![1.0; n]; d])
    }

    /// `n >= 2` points per axis including both endpoints, trapezoid weights.
    pub fn uniform_linspace(lo: f64, hi: f64, n: usize, d: usize) -> Result<Self> {
        if !(lo < hi) || n < 2 {
            return Err(Error::InvalidSpec(format!(
                "bad interval [{lo}, {hi}] with {n} points"
            )));
        }
        let h = (hi - lo) / (n - 1) as f64;
        let axis: Vec<f64> = (0..n)
            .map(|i| if i == n - 1 { hi } else { lo + i as f64 * h })
            .collect();
        let mut w = vec![1.0; n];
        w[0] = 0.5;
        w[n - 1] = 0.5;
        WeightedGrid::product(vec![axis; d], vec![w; d])
    }

    /// Standard bivariate normal with correlation `rho`, midpoint cells on
    /// `[-3, 3]^2`, weights renormalized after truncation.
    pub fn bivariate_gaussian(rho: f64, n: usize) -> Result<Self> {
        if !(rho > -1.0 && rho < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "correlation must lie in (-1, 1), got {rho}"
            )));
        }
        let axis = midpoints(-GAUSSIAN_TRUNCATION, GAUSSIAN_TRUNCATION, n)?;
        let c = 1.0 / (2.0 * (1.0 - rho * rho));
        let mut w = Vec::with_capacity(n * n);
        for &x in &axis {
            for &y in &axis {
                w.push((-c * (x * x - 2.0 * rho * x * y + y * y)).exp());
            }
        }
        WeightedGrid::tensor(vec![axis.clone(), axis], w)
    }

    /// Parse `uniform:LO:HI:N` (midpoint cells on `[LO, HI]^d`) or
    /// `gaussian:RHO:N` (bivariate normal, `d` must be 2).
    pub fn parse_spec(spec: &str, d: usize) -> Result<Self> {
        let bad = |why: &str| Error::parse("grid spec", format!("`{spec}`: {why}"));
        let parts: Vec<&str> = spec.split(':').collect();
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| bad("expected a number"))
        };
        let count = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| bad("expected a point count"))
        };
        match parts.as_slice() {
            ["uniform", lo, hi, n] => {
                WeightedGrid::uniform_midpoint(num(lo)?, num(hi)?, count(n)?, d)
            }
            ["gaussian", rho, n] if d == 2 => {
                WeightedGrid::bivariate_gaussian(num(rho)?, count(n)?)
            }
            ["gaussian", ..] => Err(bad("the Gaussian grid is two-dimensional")),
            _ => Err(bad("expected uniform:LO:HI:N or gaussian:RHO:N")),
        }
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_product(&self) -> bool {
        matches!(self.weights, Weights::Product(_))
    }

    pub fn axis(&self, a: usize) -> &[f64] {
        &self.axes[a]
    }

    /// Per-axis weights when the grid is product-form.
    pub fn axis_weights(&self) -> Option<&[Vec<f64>]> {
        match &self.weights {
            Weights::Product(w) => Some(w),
            Weights::Tensor(_) => None,
        }
    }

    /// Coordinates of grid point `i` (row-major, axis 0 slowest).
    pub fn point(&self, i: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.dim()];
        self.point_into(i, &mut p);
        p
    }

    pub fn point_into(&self, mut i: usize, out: &mut [f64]) {
        for a in (0..self.dim()).rev() {
            let n = self.axes[a].len();
            out[a] = self.axes[a][i % n];
            i /= n;
        }
    }

    /// Flat index of the point with per-axis indices `digits`.
    pub fn index_of(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, axis)| acc * axis.len() + i)
    }

    /// Normalized weights at every grid point.
    pub fn tensor_weights(&self) -> Vec<f64> {
        match &self.weights {
            Weights::Tensor(w) => w.clone(),
            Weights::Product(ws) => {
                let shape = self.shape();
                let mut digits = vec![0usize; shape.len()];
                (0..self.len())
                    .map(|_| {
                        let p = digits.iter().enumerate().map(|(a, &i)| ws[a][i]).product();
                        advance(&mut digits, &shape);
                        p
                    })
                    .collect()
            }
        }
    }

    /// Shape of the sub-grid spanned by the axes in `u`.
    pub fn sub_shape(&self, u: Subset) -> Vec<usize> {
        u.indices().iter().map(|&a| self.axes[a].len()).collect()
    }

    pub fn sub_len(&self, u: Subset) -> usize {
        self.sub_shape(u).iter().product()
    }

    /// Marginal mass on the `u` sub-grid.
    pub fn marginal(&self, u: Subset) -> Vec<f64> {
        match &self.weights {
            Weights::Product(ws) => {
                let shape = self.sub_shape(u);
                let idx = u.indices();
                let mut digits = vec![0usize; shape.len()];
                (0..self.sub_len(u))
                    .map(|_| {
                        let p = digits.iter().zip(&idx).map(|(&i, &a)| ws[a][i]).product();
                        advance(&mut digits, &shape);
                        p
                    })
                    .collect()
            }
            Weights::Tensor(w) => {
                let map = self.projection(Subset::full(self.dim()), u);
                let mut m = vec![0.0; self.sub_len(u)];
                for (v, &j) in w.iter().zip(&map) {
                    m[j as usize] += v;
                }
                m
            }
        }
    }

    /// For each point of the `from` sub-grid, its index in the `to`
    /// sub-grid (`to` must be a subset of `from`).
    pub fn projection(&self, from: Subset, to: Subset) -> Vec<u32> {
        debug_assert!(to.is_subset_of(from));
        let from_axes = from.indices();
        let shape = self.sub_shape(from);
        // stride of each `from` axis inside the `to` sub-grid (0 if dropped)
        let mut strides = vec![0usize; from_axes.len()];
        let mut s = 1;
        for (k, &a) in from_axes.iter().enumerate().rev() {
            if to.contains(a) {
                strides[k] = s;
                s *= self.axes[a].len();
            }
        }
        let mut digits = vec![0usize; shape.len()];
        (0..self.sub_len(from))
            .map(|_| {
                let j: usize = digits.iter().zip(&strides).map(|(d, s)| d * s).sum();
                advance(&mut digits, &shape);
                j as u32
            })
            .collect()
    }
}

/// Odometer increment, last axis fastest.
pub(crate) fn advance(digits: &mut [usize], shape: &[usize]) {
    for k in (0..digits.len()).rev() {
        digits[k] += 1;
        if digits[k] < shape[k] {
            return;
        }
        digits[k] = 0;
    }
}

/// Function values at every point of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<WeightedGrid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<WeightedGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension {
                expected: grid.len(),
                got: values.len(),
                context: "grid function values",
            });
        }
        Ok(GridFunction { grid, values })
    }

    pub fn grid(&self) -> &Arc<WeightedGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.grid
            .tensor_weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.grid
            .tensor_weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * (v - m).powi(2))
            .sum()
    }
}

/// Evaluate `predictor` at every grid point.
pub fn tabulate<F>(predictor: F, grid: Arc<WeightedGrid>) -> Result<GridFunction>
where
    F: Fn(&[f64]) -> f64,
{
    let mut p = vec![0.0; grid.dim()];
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        grid.point_into(i, &mut p);
        let v = predictor(&p);
        if !v.is_finite() {
            return Err(Error::Tabulation { point: p, value: v });
        }
        values.push(v);
    }
    GridFunction::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_specs() {
        let g = WeightedGrid::parse_spec("uniform:-1:1:5", 3).unwrap();
        assert_eq!(g.shape(), vec![5, 5, 5]);
        assert!(g.is_product());
        let g = WeightedGrid::parse_spec("gaussian:0.5:9", 2).unwrap();
        assert!(!g.is_product());
        assert!(WeightedGrid::parse_spec("gaussian:0.5:9", 3).is_err());
        assert!(WeightedGrid::parse_spec("uniform:1:-1:5", 2).is_err());
        assert!(WeightedGrid::parse_spec("cube:3", 2).is_err());
    }

    #[test]
    fn constant_tabulation() {
        let g = Arc::new(WeightedGrid::uniform_midpoint(-1.0, 1.0, 5, 3).unwrap());
        let f = tabulate(|_| 3.0, g).unwrap();
        assert!(f.values().iter().all(|&v| v == 3.0));
        assert_eq!(f.values().len(), 125);
    }

    #[test]
    fn linspace_corner_value() {
        let g = Arc::new(WeightedGrid::uniform_linspace(-1.0, 1.0, 41, 2).unwrap());
        let f = tabulate(|x| x[0] * x[1], g.clone()).unwrap();
        assert_eq!(g.point(0), vec![-1.0, -1.0]);
        assert_eq!(f.values()[0], 1.0);
        assert_eq!(g.point(40), vec![-1.0, 1.0]);
        assert_eq!(g.point(g.len() - 1), vec![1.0, 1.0]);
    }

    #[test]
    fn nan_predictor_names_point() {
        let g = Arc::new(WeightedGrid::uniform_midpoint(0.0, 1.0, 4, 1).unwrap());
        let err = tabulate(|x| if x[0] > 0.5 { f64::NAN } else { 1.0 }, g).unwrap_err();
        match err {
            Error::Tabulation { point, .. } => assert_eq!(point, vec![0.625]),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn weights_normalize_and_factor() {
        let g = WeightedGrid::bivariate_gaussian(0.5, 31).unwrap();
        assert!(!g.is_product());
        let s: f64 = g.tensor_weights().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(WeightedGrid::bivariate_gaussian(0.0, 31)
            .unwrap()
            .is_product());
        let axes = vec![vec![0.0, 1.0], vec![0.0, 1.0, 2.0]];
        let w = vec![1.0, 2.0, 3.0, 2.0, 4.0, 6.0];
        let g = WeightedGrid::tensor(axes.clone(), w).unwrap();
        assert!(g.is_product());
        let g = WeightedGrid::tensor(axes, vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(!g.is_product());
    }

    #[test]
    fn truncation_mass_loss_is_small() {
        // each axis keeps erf(3/sqrt 2) of the mass
        let kept = 0.997_300_203_936_739_8_f64;
        assert!(1.0 - kept * kept < 0.006);
        assert!(1.0 - kept < 0.003);
    }

    #[test]
    fn marginals_and_projection() {
        let g = WeightedGrid::bivariate_gaussian(0.9, 21).unwrap();
        let m0 = g.marginal(Subset::from_indices(&[0]));
        let m1 = g.marginal(Subset::from_indices(&[1]));
        assert!((m0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, b) in m0.iter().zip(&m1) {
            assert!((a - b).abs() < 1e-15);
        }
        let full = Subset::full(2);
        let p = g.projection(full, Subset::from_indices(&[1]));
        assert_eq!(&p[..3], &[0, 1, 2]);
        assert_eq!(p[21], 0);
        let p = g.projection(full, Subset::from_indices(&[0]));
        assert_eq!(p[20], 0);
        assert_eq!(p[21], 1);
        assert!(g.projection(full, Subset::EMPTY).iter().all(|&j| j == 0));
    }

    #[test]
    fn bad_grids() {
        assert!(WeightedGrid::uniform_midpoint(1.0, -1.0, 5, 2).is_err());
        assert!(WeightedGrid::uniform_midpoint(-1.0, 1.0, 5, 5).is_err());
        assert!(WeightedGrid::bivariate_gaussian(1.0, 5).is_err());
        assert!(WeightedGrid::product(vec![vec![0.0, 1.0]], vec![vec![0.0, 0.0]]).is_err());
        assert!(WeightedGrid::product(vec![vec![1.0, 0.0]], vec![vec![1.0, 1.0]]).is_err());
    }
}
