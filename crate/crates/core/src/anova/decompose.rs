use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;

use super::{GridFunction, Subset, WeightedGrid};
use crate::error::{Error, Result};
use crate::seed;

/// Largest dimension accepted by [`decompose_weighted`].
pub const WEIGHTED_MAX_DIM: usize = 3;

/// Pure effects `f_u`, each stored on the sub-grid of its own axes.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectTable {
    grid: Arc<WeightedGrid>,
    effects: BTreeMap<Subset, Vec<f64>>,
    /// Sum of the effects above `max_order`, on the full grid.
    overflow: Option<Vec<f64>>,
    max_order: usize,
    residual_tolerance: f64,
}

impl EffectTable {
    pub fn grid(&self) -> &Arc<WeightedGrid> {
        &self.grid
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn residual_tolerance(&self) -> f64 {
        self.residual_tolerance
    }

    /// Subsets with a stored effect, the empty set first.
    pub fn subsets(&self) -> impl Iterator<Item = Subset> + '_ {
        self.effects.keys().copied()
    }

    pub fn effect(&self, u: Subset) -> Option<&[f64]> {
        self.effects.get(&u).map(Vec::as_slice)
    }

    /// The empty-set effect, i.e. the weighted mean of the function.
    pub fn constant(&self) -> f64 {
        self.effects[&Subset::EMPTY][0]
    }

    pub fn overflow(&self) -> Option<&[f64]> {
        self.overflow.as_deref()
    }

    /// Effect `u` evaluated at every point of the full grid.
    pub fn expand(&self, u: Subset) -> Option<Vec<f64>> {
        let f = self.effects.get(&u)?;
        let map = self.grid.projection(Subset::full(self.grid.dim()), u);
        Some(map.iter().map(|&j| f[j as usize]).collect())
    }

    /// Sum of all effects (and the overflow) on the full grid.
    pub fn reconstruct(&self) -> Vec<f64> {
        let full = Subset::full(self.grid.dim());
        let mut out = self
            .overflow
            .clone()
            .unwrap_or_else(|| vec![0.0; self.grid.len()]);
        for (&u, f) in &self.effects {
            let map = self.grid.projection(full, u);
            for (o, &j) in out.iter_mut().zip(&map) {
                *o += f[j as usize];
            }
        }
        out
    }

    /// Weighted RMS of `F - reconstruct()`.
    pub fn reconstruction_error(&self, f: &GridFunction) -> f64 {
        let w = self.grid.tensor_weights();
        let r = self.reconstruct();
        r.iter()
            .zip(f.values())
            .zip(&w)
            .map(|((a, b), w)| w * (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Variance of effect `u` under the grid weights.
    pub fn variance(&self, u: Subset) -> Option<f64> {
        let f = self.effects.get(&u)?;
        let w = self.grid.marginal(u);
        let mean: f64 = w.iter().zip(f).map(|(w, v)| w * v).sum();
        let sq: f64 = w.iter().zip(f).map(|(w, v)| w * v * v).sum();
        Some((sq - mean * mean).max(0.0))
    }

    /// Variance of the overflow term, 0 when there is none.
    pub fn overflow_variance(&self) -> f64 {
        let Some(o) = &self.overflow else { return 0.0 };
        let w = self.grid.tensor_weights();
        let mean: f64 = w.iter().zip(o).map(|(w, v)| w * v).sum();
        w.iter().zip(o).map(|(w, v)| w * (v - mean).powi(2)).sum()
    }

    /// Largest `|<f_u, g>|` over stored `u`, strict subsets `v` of `u` and
    /// `n_random` functions `g` of the `v` axes with entries in `[-1, 1]`.
    pub fn orthogonality_violation(&self, n_random: usize, seed: u64) -> f64 {
        let mut rng = seed::rng(seed);
        let mut worst: f64 = 0.0;
        for (&u, f) in &self.effects {
            if u.is_empty() {
                continue;
            }
            let w = self.grid.marginal(u);
            for v in u.subsets().filter(|&v| v != u) {
                let map = self.grid.projection(u, v);
                for _ in 0..n_random {
                    let g: Vec<f64> = (0..self.grid.sub_len(v))
                        .map(|_| rng.gen_range(-1.0..1.0))
                        .collect();
                    let ip: f64 = f
                        .iter()
                        .zip(&w)
                        .zip(&map)
                        .map(|((f, w), &j)| f * w * g[j as usize])
                        .sum();
                    worst = worst.max(ip.abs());
                }
            }
        }
        worst
    }
}

fn degenerate_check(grid: &WeightedGrid) -> Result<()> {
    for a in 0..grid.dim() {
        let m = grid.marginal(Subset::from_indices(&[a]));
        if let Some(i) = m.iter().position(|&v| v <= 0.0) {
            return Err(Error::DegenerateDensity(format!(
                "axis {a} value {} carries no mass",
                grid.axis(a)[i]
            )));
        }
    }
    Ok(())
}

fn scatter(values: &[f64], map: &[u32], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for (v, &j) in values.iter().zip(map) {
        out[j as usize] += v;
    }
    out
}

/// Full decomposition, using the product-weight path when it applies.
pub fn decompose(f: &GridFunction) -> Result<EffectTable> {
    if f.grid().is_product() {
        decompose_product(f)
    } else {
        decompose_weighted(f, f.grid().dim())
    }
}

/// Exact decomposition for product-form weights by inclusion-exclusion of
/// conditional means: `f_u = sum_{v in u} (-1)^{|u|-|v|} E[F | X_v]`.
pub fn decompose_product(f: &GridFunction) -> Result<EffectTable> {
    let grid = f.grid().clone();
    if !grid.is_product() {
        return Err(Error::WrongWeights);
    }
    degenerate_check(&grid)?;
    let d = grid.dim();
    let full = Subset::full(d);
    let w = grid.tensor_weights();
    let wf: Vec<f64> = w.iter().zip(f.values()).map(|(w, v)| w * v).collect();
    let mut cond = BTreeMap::new();
    for v in Subset::all(d) {
        let map = grid.projection(full, v);
        let mut m = scatter(&wf, &map, grid.sub_len(v));
        for (m, wv) in m.iter_mut().zip(grid.marginal(v)) {
            *m /= wv;
        }
        cond.insert(v, m);
    }
    let mut effects = BTreeMap::new();
    for u in Subset::all(d) {
        let mut e = vec![0.0; grid.sub_len(u)];
        for v in u.subsets() {
            let sign = if (u.order() - v.order()) % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            let map = grid.projection(u, v);
            let m = &cond[&v];
            for (e, &j) in e.iter_mut().zip(&map) {
                *e += sign * m[j as usize];
            }
        }
        effects.insert(u, e);
    }
    Ok(EffectTable {
        grid,
        effects,
        overflow: None,
        max_order: d,
        residual_tolerance: 1e-10,
    })
}

/// Exact decomposition for arbitrary grid weights (d <= 3).
///
/// Works top-down: the part of `h_u` explained by functions of the maximal
/// proper subsets of `u` is found by a weighted least-squares projection and
/// handed down to those subsets, and what is left is `f_u`. Effects above
/// `max_order` are summed into a single overflow term.
pub fn decompose_weighted(f: &GridFunction, max_order: usize) -> Result<EffectTable> {
    let grid = f.grid().clone();
    let d = grid.dim();
    if d > WEIGHTED_MAX_DIM {
        return Err(Error::UnsupportedDimension(format!(
            "general-weights decomposition supports d <= {WEIGHTED_MAX_DIM}, got {d}"
        )));
    }
    if max_order == 0 {
        return Err(Error::Config("max_order must be at least 1".into()));
    }
    degenerate_check(&grid)?;
    let full = Subset::full(d);
    let mut h: BTreeMap<Subset, Vec<f64>> = Subset::all(d)
        .into_iter()
        .map(|u| (u, vec![0.0; grid.sub_len(u)]))
        .collect();
    h.insert(full, f.values().to_vec());
    let mut effects = BTreeMap::new();
    for u in Subset::all(d).into_iter().rev() {
        let hu = h.remove(&u).expect("every subset seeded");
        if u.is_empty() {
            effects.insert(u, hu);
            continue;
        }
        let (fu, pieces) = project_out(&grid, u, hu)?;
        for (t, g) in pieces {
            for (a, b) in h
                .get_mut(&t)
                .expect("lower subsets pending")
                .iter_mut()
                .zip(&g)
            {
                *a += b;
            }
        }
        effects.insert(u, fu);
    }
    let max_order = max_order.min(d);
    let mut overflow: Option<Vec<f64>> = None;
    let high: Vec<Subset> = effects
        .keys()
        .copied()
        .filter(|u| u.order() > max_order)
        .collect();
    for u in high {
        let e = effects.remove(&u).expect("listed");
        let map = grid.projection(full, u);
        let o = overflow.get_or_insert_with(|| vec![0.0; grid.len()]);
        for (o, &j) in o.iter_mut().zip(&map) {
            *o += e[j as usize];
        }
    }
    Ok(EffectTable {
        grid,
        effects,
        overflow,
        max_order,
        residual_tolerance: 1e-8,
    })
}

/// Split `h` (on the `u` sub-grid) into `h - P h` and the pieces of `P h`
/// living on each maximal proper subset, where `P` is the weighted
/// projection onto sums of functions of those subsets.
fn project_out(
    grid: &WeightedGrid,
    u: Subset,
    h: Vec<f64>,
) -> Result<(Vec<f64>, Vec<(Subset, Vec<f64>)>)> {
    let w = grid.marginal(u);
    let blocks = u.maximal_proper_subsets();
    let maps: Vec<Vec<u32>> = blocks.iter().map(|&t| grid.projection(u, t)).collect();
    let lens: Vec<usize> = blocks.iter().map(|&t| grid.sub_len(t)).collect();
    let diag: Vec<Vec<f64>> = maps
        .iter()
        .zip(&lens)
        .map(|(m, &n)| scatter(&w, m, n))
        .collect();
    let solver = BlockSystem {
        w: &w,
        maps: &maps,
        lens: &lens,
        diag: &diag,
    };

    let mut resid = h;
    let mut pieces: Vec<Vec<f64>> = lens.iter().map(|&n| vec![0.0; n]).collect();
    let scale = resid
        .iter()
        .zip(&w)
        .map(|(v, w)| w * v * v)
        .sum::<f64>()
        .sqrt();
    // a second pass mops up what rounding left in the first
    for _ in 0..3 {
        let g = solver.solve(&resid)?;
        let fitted = solver.expand(&g);
        for (r, f) in resid.iter_mut().zip(&fitted) {
            *r -= f;
        }
        for (p, gj) in pieces.iter_mut().zip(&g) {
            for (a, b) in p.iter_mut().zip(gj) {
                *a += b;
            }
        }
        let wr: Vec<f64> = resid.iter().zip(&w).map(|(r, w)| r * w).collect();
        let violation = maps
            .iter()
            .zip(&lens)
            .flat_map(|(m, &n)| scatter(&wr, m, n))
            .fold(0.0f64, |a, v| a.max(v.abs()));
        if violation <= 1e-15 * scale.max(1e-300) {
            break;
        }
    }
    Ok((resid, blocks.into_iter().zip(pieces).collect()))
}

/// Normal equations `A g = b` with `A_jk = M_j W E_k`, where `E_k` expands a
/// block to the `u` grid and `M_j` sums back down.
struct BlockSystem<'a> {
    w: &'a [f64],
    maps: &'a [Vec<u32>],
    lens: &'a [usize],
    diag: &'a [Vec<f64>],
}

impl BlockSystem<'_> {
    fn expand(&self, g: &[Vec<f64>]) -> Vec<f64> {
        let mut s = vec![0.0; self.w.len()];
        for (gj, m) in g.iter().zip(self.maps) {
            for (s, &j) in s.iter_mut().zip(m) {
                *s += gj[j as usize];
            }
        }
        s
    }

    fn reduce(&self, s: &[f64]) -> Vec<Vec<f64>> {
        let ws: Vec<f64> = s.iter().zip(self.w).map(|(s, w)| s * w).collect();
        self.maps
            .iter()
            .zip(self.lens)
            .map(|(m, &n)| scatter(&ws, m, n))
            .collect()
    }

    fn precondition(&self, r: &[Vec<f64>]) -> Vec<Vec<f64>> {
        r.iter()
            .zip(self.diag)
            .map(|(rj, dj)| {
                rj.iter()
                    .zip(dj)
                    .map(|(r, &d)| if d > 0.0 { r / d } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    /// Jacobi-preconditioned conjugate gradients from zero. The system is
    /// singular (blocks overlap) but consistent, so CG still converges to
    /// a valid projection.
    fn solve(&self, h: &[f64]) -> Result<Vec<Vec<f64>>> {
        let dot = |a: &[Vec<f64>], b: &[Vec<f64>]| -> f64 {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
                .sum()
        };
        let b = self.reduce(h);
        let b_norm = dot(&b, &b).sqrt();
        let mut x: Vec<Vec<f64>> = self.lens.iter().map(|&n| vec![0.0; n]).collect();
        if b_norm == 0.0 {
            return Ok(x);
        }
        let mut r = b;
        let mut z = self.precondition(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let unknowns: usize = self.lens.iter().sum();
        let max_iter = (4 * unknowns).clamp(100, 20_000);
        let mut best = f64::INFINITY;
        for _ in 0..max_iter {
            let ap = self.reduce(&self.expand(&p));
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            for j in 0..x.len() {
                for i in 0..x[j].len() {
                    x[j][i] += alpha * p[j][i];
                    r[j][i] -= alpha * ap[j][i];
                }
            }
            let r_norm = dot(&r, &r).sqrt();
            best = best.min(r_norm);
            if r_norm <= 1e-15 * b_norm {
                return Ok(x);
            }
            z = self.precondition(&r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for j in 0..p.len() {
                for i in 0..p[j].len() {
                    p[j][i] = z[j][i] + beta * p[j][i];
                }
            }
        }
        if best <= 1e-9 * b_norm {
            Ok(x)
        } else {
            Err(Error::DegenerateDensity(format!(
                "projection did not converge (residual {:.3e} of {:.3e})",
                best, b_norm
            )))
        }
    }
}
