//! Tree-list text format:
//!
//! ```text
//! intxlab-distill 1
//! max_order 4
//! teacher_mean <float>
//! stage <depth> <shrinkage> <trees>
//! tree <nodes>
//! <depth> <feature> <threshold> -     split node
//! <depth> - - <value>                 leaf
//! ```
//!
//! Nodes are listed in pre-order, so the depth column alone fixes the shape.

use std::io::{BufRead, Write};

use ndarray::Array2;

use super::{Node, StageEnsemble, StagedDistillation, Tree};
use crate::datagen::{fmt_f64, parse_f64};
use crate::error::{Error, Result};

const MAGIC: &str = "intxlab-distill 1";

pub fn write_distillation<W: Write>(d: &StagedDistillation, mut out: W) -> Result<()> {
    let io = |e| Error::io("<distillation>", e);
    writeln!(out, "{MAGIC}").map_err(io)?;
    writeln!(out, "max_order {}", d.max_order).map_err(io)?;
    writeln!(out, "teacher_mean {}", fmt_f64(d.teacher_mean)).map_err(io)?;
    for stage in &d.stages {
        writeln!(
            out,
            "stage {} {} {}",
            stage.depth,
            fmt_f64(stage.shrinkage),
            stage.trees.len()
        )
        .map_err(io)?;
        for tree in &stage.trees {
            let nodes = tree.preorder();
            writeln!(out, "tree {}", nodes.len()).map_err(io)?;
            for (depth, node) in nodes {
                match node {
                    Node::Split {
                        feature, threshold, ..
                    } => writeln!(out, "{depth} {feature} {} -", fmt_f64(threshold)).map_err(io)?,
                    Node::Leaf { value } => {
                        writeln!(out, "{depth} - - {}", fmt_f64(value)).map_err(io)?
                    }
                }
            }
        }
    }
    Ok(())
}

enum Row {
    Split(usize, usize, f64),
    Leaf(usize, f64),
}

impl Row {
    fn depth(&self) -> usize {
        match *self {
            Row::Split(d, ..) | Row::Leaf(d, _) => d,
        }
    }
}

fn bad(detail: impl Into<String>) -> Error {
    Error::parse("distillation file", detail)
}

fn parse_row(line: &str) -> Result<Row> {
    let t: Vec<&str> = line.split_whitespace().collect();
    if t.len() != 4 {
        return Err(bad(format!("node line `{line}` needs 4 fields")));
    }
    let depth = t[0]
        .parse()
        .map_err(|_| bad(format!("bad depth in `{line}`")))?;
    match (t[1], t[2], t[3]) {
        ("-", "-", v) => Ok(Row::Leaf(depth, parse_f64(v)?)),
        (f, th, "-") => Ok(Row::Split(
            depth,
            f.parse()
                .map_err(|_| bad(format!("bad feature in `{line}`")))?,
            parse_f64(th)?,
        )),
        _ => Err(bad(format!("node line `{line}` is neither split nor leaf"))),
    }
}

/// Rebuild the node vector from pre-order rows; returns the next unread row.
fn rebuild(rows: &[Row], at: usize, depth: usize, nodes: &mut Vec<Node>) -> Result<usize> {
    let row = rows
        .get(at)
        .ok_or_else(|| bad("tree ends inside a split"))?;
    if row.depth() != depth {
        return Err(bad(format!(
            "node {at} has depth {} where {depth} was expected",
            row.depth()
        )));
    }
    let id = nodes.len();
    match *row {
        Row::Leaf(_, value) => {
            nodes.push(Node::Leaf { value });
            Ok(at + 1)
        }
        Row::Split(_, feature, threshold) => {
            nodes.push(Node::Leaf { value: 0.0 });
            let left = nodes.len();
            let next = rebuild(rows, at + 1, depth + 1, nodes)?;
            let right = nodes.len();
            let next = rebuild(rows, next, depth + 1, nodes)?;
            nodes[id] = Node::Split {
                feature,
                threshold,
                left,
                right,
            };
            Ok(next)
        }
    }
}

pub fn read_distillation<R: BufRead>(input: R) -> Result<StagedDistillation> {
    let mut lines = input
        .lines()
        .map(|l| l.map_err(|e| Error::io("<distillation>", e)))
        .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
    let mut next = || {
        lines
            .next()
            .unwrap_or_else(|| Err(bad("unexpected end of file")))
    };
    if next()?.trim() != MAGIC {
        return Err(bad("missing `intxlab-distill 1` header"));
    }
    let keyed = |line: String, key: &str| -> Result<String> {
        line.trim()
            .strip_prefix(key)
            .map(|s| s.trim().to_string())
            .ok_or_else(|| bad(format!("expected `{key}` line, found `{line}`")))
    };
    let max_order: usize = keyed(next()?, "max_order")?
        .parse()
        .map_err(|_| bad("bad max_order"))?;
    let teacher_mean = parse_f64(&keyed(next()?, "teacher_mean")?)?;
    let mut stages = Vec::new();
    for expect_depth in 1..max_order {
        let header = keyed(next()?, "stage")?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 3 {
            return Err(bad(format!(
                "stage header `{header}` needs depth, shrinkage, trees"
            )));
        }
        let depth: usize = h[0].parse().map_err(|_| bad("bad stage depth"))?;
        if depth != expect_depth {
            return Err(bad(format!(
                "stage depth {depth} where {expect_depth} was expected"
            )));
        }
        let shrinkage = parse_f64(h[1])?;
        let count: usize = h[2].parse().map_err(|_| bad("bad tree count"))?;
        let mut trees = Vec::with_capacity(count);
        for _ in 0..count {
            let n: usize = keyed(next()?, "tree")?
                .parse()
                .map_err(|_| bad("bad node count"))?;
            let rows = (0..n)
                .map(|_| parse_row(&next()?))
                .collect::<Result<Vec<_>>>()?;
            let mut nodes = Vec::with_capacity(n);
            if rebuild(&rows, 0, 0, &mut nodes)? != n {
                return Err(bad("tree has trailing nodes"));
            }
            trees.push(Tree::from_nodes(nodes, depth)?);
        }
        stages.push(StageEnsemble {
            depth,
            shrinkage,
            trees,
            train_mse: Vec::new(),
        });
    }
    Ok(StagedDistillation {
        max_order,
        teacher_mean,
        stages,
        reference_inputs: Array2::zeros((0, 0)),
    })
}
