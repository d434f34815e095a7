//! Plain-text model format:
//!
//! ```text
//! intxlab-mlp 1
//! task regression
//! dims 25 32 32 32 1
//! layer 0 32 25
//! w <25 floats>      (one line per output unit)
//! b <32 floats>
//! ...
//! ```

use std::io::{BufRead, Write};

use super::{Activation, Layer, MlpConfig, MlpModel, Task};
use crate::datagen::{fmt_f64, parse_f64};
use crate::error::{Error, Result};

const MAGIC: &str = "intxlab-mlp 1";

pub fn write_model<W: Write>(model: &MlpModel, mut out: W) -> Result<()> {
    let io = |e| Error::io("<model>", e);
    writeln!(out, "{MAGIC}").map_err(io)?;
    let task = match model.config.task {
        Task::Regression => "regression",
        Task::Classification => "classification",
    };
    writeln!(out, "task {task}").map_err(io)?;
    let dims: Vec<String> = model.config.dims().iter().map(usize::to_string).collect();
    writeln!(out, "dims {}", dims.join(" ")).map_err(io)?;
    for (l, layer) in model.layers.iter().enumerate() {
        writeln!(out, "layer {l} {} {}", layer.outputs, layer.inputs).map_err(io)?;
        for o in 0..layer.outputs {
            let row: Vec<String> = layer.row(o).iter().map(|v| fmt_f64(*v)).collect();
            writeln!(out, "w {}", row.join(" ")).map_err(io)?;
        }
        let bias: Vec<String> = layer.bias.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(out, "b {}", bias.join(" ")).map_err(io)?;
    }
    Ok(())
}

pub fn read_model<R: BufRead>(input: R) -> Result<MlpModel> {
    let bad = |d: String| Error::parse("model file", d);
    let mut lines = input
        .lines()
        .map(|l| l.map_err(|e| Error::io("<model>", e)));
    let mut next = || -> Result<String> {
        loop {
            match lines.next() {
                Some(line) => {
                    let line = line?;
                    if !line.trim().is_empty() {
                        return Ok(line);
                    }
                }
                None => return Err(Error::parse("model file", "unexpected end of file")),
            }
        }
    };
    if next()?.trim() != MAGIC {
        return Err(bad("missing `intxlab-mlp 1` header".into()));
    }
    let task = match next()?.trim() {
        "task regression" => Task::Regression,
        "task classification" => Task::Classification,
        other => return Err(bad(format!("unknown task line `{other}`"))),
    };
    let dims_line = next()?;
    let dims: Vec<usize> = dims_line
        .strip_prefix("dims ")
        .ok_or_else(|| bad("missing dims line".into()))?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad(format!("bad dim `{t}`"))))
        .collect::<Result<_>>()?;
    if dims.len() < 3 {
        return Err(bad("need input, at least one hidden and output dim".into()));
    }
    let config = MlpConfig {
        input_dim: dims[0],
        hidden_widths: dims[1..dims.len() - 1].to_vec(),
        output_dim: dims[dims.len() - 1],
        activation: Activation::Relu,
        task,
    };
    let floats = |line: &str, prefix: &str, expect: usize| -> Result<Vec<f64>> {
        let body = line
            .strip_prefix(prefix)
            .ok_or_else(|| bad(format!("expected `{}` line", prefix.trim())))?;
        let v: Vec<f64> = body
            .split_whitespace()
            .map(parse_f64)
            .collect::<Result<_>>()?;
        if v.len() != expect {
            return Err(bad(format!("expected {expect} values, found {}", v.len())));
        }
        Ok(v)
    };
    let mut layers = Vec::new();
    for (l, w) in dims.windows(2).enumerate() {
        let (inputs, outputs) = (w[0], w[1]);
        let header = next()?;
        if header.trim() != format!("layer {l} {outputs} {inputs}") {
            return Err(bad(format!("layer header `{header}` does not match dims")));
        }
        let mut weights = Vec::with_capacity(inputs * outputs);
        for _ in 0..outputs {
            weights.extend(floats(&next()?, "w ", inputs)?);
        }
        let bias = floats(&next()?, "b ", outputs)?;
        layers.push(Layer {
            inputs,
            outputs,
            weights,
            bias,
        });
    }
    MlpModel::from_layers(config, layers)
}
