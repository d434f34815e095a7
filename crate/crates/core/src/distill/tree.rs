use ndarray::Array2;

use crate::error::{Error, Result};

pub const DEFAULT_MIN_LEAF: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Axis-aligned regression tree. Node 0 is the root; children always have
/// larger indices than their parent (pre-order layout).
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
    max_depth: usize,
}

impl Tree {
    pub fn leaf(value: f64, max_depth: usize) -> Self {
        Tree {
            nodes: vec![Node::Leaf { value }],
            max_depth,
        }
    }

    pub fn from_nodes(nodes: Vec<Node>, max_depth: usize) -> Result<Self> {
        let tree = Tree { nodes, max_depth };
        if tree.nodes.is_empty() {
            return Err(Error::parse("tree", "no nodes"));
        }
        for (i, n) in tree.nodes.iter().enumerate() {
            if let Node::Split { left, right, .. } = *n {
                if left <= i || right <= i || left >= tree.nodes.len() || right >= tree.nodes.len()
                {
                    return Err(Error::parse(
                        "tree",
                        format!("node {i} has invalid children"),
                    ));
                }
            }
        }
        if tree.depth() > max_depth {
            return Err(Error::parse(
                "tree",
                format!("depth {} exceeds bound {max_depth}", tree.depth()),
            ));
        }
        Ok(tree)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    /// Number of split levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Distinct features on every root-to-leaf path.
    pub fn path_features(&self) -> Vec<Vec<usize>> {
        fn walk(nodes: &[Node], at: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            match nodes[at] {
                Node::Leaf { .. } => {
                    let mut p = path.clone();
                    p.sort_unstable();
                    p.dedup();
                    out.push(p);
                }
                Node::Split {
                    feature,
                    left,
                    right,
                    ..
                } => {
                    path.push(feature);
                    walk(nodes, left, path, out);
                    walk(nodes, right, path, out);
                    path.pop();
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.nodes, 0, &mut Vec::new(), &mut out);
        out
    }

    /// `(depth, node)` pairs in pre-order.
    pub fn preorder(&self) -> Vec<(usize, Node)> {
        fn walk(nodes: &[Node], at: usize, depth: usize, out: &mut Vec<(usize, Node)>) {
            out.push((depth, nodes[at]));
            if let Node::Split { left, right, .. } = nodes[at] {
                walk(nodes, left, depth + 1, out);
                walk(nodes, right, depth + 1, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.nodes, 0, 0, &mut out);
        out
    }
}

/// Sample indices sorted by each feature, computed once per input matrix.
/// Ties keep ascending sample order.
#[derive(Debug, Clone)]
pub struct Presorted {
    n: usize,
    d: usize,
    values: Vec<f64>,
    order: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(x: &Array2<f64>) -> Self {
        let (n, d) = x.dim();
        let values = x.as_standard_layout().iter().copied().collect::<Vec<_>>();
        let order = (0..d)
            .map(|f| {
                let mut idx: Vec<u32> = (0..n as u32).collect();
                idx.sort_by(|&a, &b| {
                    values[a as usize * d + f]
                        .total_cmp(&values[b as usize * d + f])
                        .then(a.cmp(&b))
                });
                idx
            })
            .collect();
        Presorted {
            n,
            d,
            values,
            order,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    fn value(&self, sample: u32, feature: usize) -> f64 {
        self.values[sample as usize * self.d + feature]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }
}

/// Greedy squared-error CART with exhaustive midpoint thresholds.
pub struct TreeBuilder<'a> {
    data: &'a Presorted,
    residual: &'a [f64],
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
    goes_left: Vec<bool>,
    /// leaf value assigned to each training sample
    fitted: Vec<f64>,
}

struct BestSplit {
    gain: f64,
    feature: usize,
    threshold: f64,
    left_count: usize,
}

impl<'a> TreeBuilder<'a> {
    pub fn new(
        data: &'a Presorted,
        residual: &'a [f64],
        max_depth: usize,
        min_leaf: usize,
    ) -> Self {
        TreeBuilder {
            data,
            residual,
            max_depth,
            min_leaf: min_leaf.max(1),
            nodes: Vec::new(),
            goes_left: vec![false; data.n()],
            fitted: vec![0.0; data.n()],
        }
    }

    /// Fit and return the tree along with its prediction on every training row.
    pub fn fit(mut self) -> (Tree, Vec<f64>) {
        let root_lists = self.data.order.clone();
        self.grow(root_lists, 0);
        let tree = Tree {
            nodes: self.nodes,
            max_depth: self.max_depth,
        };
        (tree, self.fitted)
    }

    fn grow(&mut self, lists: Vec<Vec<u32>>, depth: usize) -> usize {
        let members = &lists[0];
        let n = members.len();
        let (sum, sumsq) = members.iter().fold((0.0, 0.0), |(s, q), &i| {
            let r = self.residual[i as usize];
            (s + r, q + r * r)
        });
        let mean = sum / n as f64;
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: mean });

        let split = if depth < self.max_depth && n >= 2 * self.min_leaf {
            self.best_split(&lists, sum, sumsq)
        } else {
            None
        };
        let Some(split) = split else {
            for &i in members {
                self.fitted[i as usize] = mean;
            }
            return id;
        };

        for (pos, &i) in lists[split.feature].iter().enumerate() {
            self.goes_left[i as usize] = pos < split.left_count;
        }
        let mut left_lists = Vec::with_capacity(lists.len());
        let mut right_lists = Vec::with_capacity(lists.len());
        for list in lists {
            let (l, r): (Vec<u32>, Vec<u32>) =
                list.into_iter().partition(|&i| self.goes_left[i as usize]);
            left_lists.push(l);
            right_lists.push(r);
        }
        let left = self.grow(left_lists, depth + 1);
        let right = self.grow(right_lists, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }

    fn best_split(&self, lists: &[Vec<u32>], sum: f64, sumsq: f64) -> Option<BestSplit> {
        let n = lists[0].len();
        let parent = sum * sum / n as f64;
        // gains below this are rounding noise (constant residuals)
        let floor = 1e-12 * sumsq.max(f64::MIN_POSITIVE);
        let mut best: Option<BestSplit> = None;
        for (f, list) in lists.iter().enumerate() {
            let mut left_sum = 0.0;
            for pos in 0..n - 1 {
                let i = list[pos];
                left_sum += self.residual[i as usize];
                let nl = pos + 1;
                let nr = n - nl;
                if nl < self.min_leaf {
                    continue;
                }
                if nr < self.min_leaf {
                    break;
                }
                let xv = self.data.value(i, f);
                let xn = self.data.value(list[pos + 1], f);
                if xv >= xn {
                    continue;
                }
                let right_sum = sum - left_sum;
                let gain =
                    left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64 - parent;
                if gain > floor && best.as_ref().map_or(true, |b| gain > b.gain) {
                    best = Some(BestSplit {
                        gain,
                        feature: f,
                        threshold: 0.5 * (xv + xn),
                        left_count: nl,
                    });
                }
            }
        }
        best
    }
}

/// Depth-limited squared-error tree fit to `residual`.
pub fn fit_tree(x: &Array2<f64>, residual: &[f64], depth: usize) -> Result<Tree> {
    fit_tree_with(x, residual, depth, DEFAULT_MIN_LEAF)
}

pub fn fit_tree_with(
    x: &Array2<f64>,
    residual: &[f64],
    depth: usize,
    min_leaf: usize,
) -> Result<Tree> {
    if x.nrows() < 2 {
        return Err(Error::InvalidSpec(
            "tree fitting needs at least 2 samples".into(),
        ));
    }
    if depth == 0 {
        return Err(Error::InvalidSpec("tree depth must be >= 1".into()));
    }
    if residual.len() != x.nrows() {
        return Err(Error::Dimension {
            expected: x.nrows(),
            got: residual.len(),
            context: "residual length",
        });
    }
    let data = Presorted::new(x);
    Ok(TreeBuilder::new(&data, residual, depth, min_leaf).fit().0)
}
