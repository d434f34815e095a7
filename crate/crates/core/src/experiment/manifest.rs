use std::io::{BufRead, Write};
use std::path::Path;
use std::time::Duration;

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

const HEADER: &str = "intxlab-manifest 1";

/// What a run used and produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    /// `(label, seed)` for every repetition.
    pub seeds: Vec<(String, u64)>,
    /// Files written into the output directory, relative to it.
    pub artifacts: Vec<String>,
    pub warnings: Vec<String>,
    pub duration: Duration,
}

impl RunManifest {
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("<manifest>", e);
        writeln!(out, "{HEADER}").map_err(io)?;
        writeln!(out, "duration_seconds {:.3}", self.duration.as_secs_f64()).map_err(io)?;
        writeln!(out, "[config]").map_err(io)?;
        write!(out, "{}", self.config.to_text()).map_err(io)?;
        writeln!(out, "[seeds]").map_err(io)?;
        for (label, s) in &self.seeds {
            writeln!(out, "{label} {s}").map_err(io)?;
        }
        writeln!(out, "[artifacts]").map_err(io)?;
        for a in &self.artifacts {
            writeln!(out, "{a}").map_err(io)?;
        }
        writeln!(out, "[warnings]").map_err(io)?;
        for w in &self.warnings {
            writeln!(out, "{}", w.replace('\n', " ")).map_err(io)?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let bad = |d: String| Error::parse("manifest", d);
        let lines: Vec<String> = input
            .lines()
            .collect::<std::io::Result<_>>()
            .map_err(|e| Error::io("<manifest>", e))?;
        let mut it = lines.iter();
        if it.next().map(|s| s.trim()) != Some(HEADER) {
            return Err(bad(format!("missing `{HEADER}` header")));
        }
        let mut duration = None;
        let mut section = "";
        let (mut config, mut seeds, mut artifacts, mut warnings) =
            (String::new(), Vec::new(), Vec::new(), Vec::new());
        for line in it {
            let t = line.trim();
            if t.starts_with('[') && t.ends_with(']') {
                section = match t {
                    "[config]" | "[seeds]" | "[artifacts]" | "[warnings]" => &t[1..t.len() - 1],
                    _ => return Err(bad(format!("unknown section `{t}`"))),
                };
                continue;
            }
            match section {
                "" => {
                    if let Some(v) = t.strip_prefix("duration_seconds ") {
                        let secs: f64 =
                            v.parse().map_err(|_| bad(format!("bad duration `{v}`")))?;
                        duration = Some(Duration::from_secs_f64(secs.max(0.0)));
                    } else if !t.is_empty() {
                        return Err(bad(format!("unexpected line `{t}`")));
                    }
                }
                "config" => {
                    config.push_str(line);
                    config.push('\n');
                }
                "seeds" if !t.is_empty() => {
                    let (label, s) = t
                        .rsplit_once(' ')
                        .ok_or_else(|| bad(format!("bad seed line `{t}`")))?;
                    let s = s.parse().map_err(|_| bad(format!("bad seed `{s}`")))?;
                    seeds.push((label.to_string(), s));
                }
                "artifacts" if !t.is_empty() => artifacts.push(t.to_string()),
                "warnings" if !t.is_empty() => warnings.push(t.to_string()),
                _ => {}
            }
        }
        Ok(RunManifest {
            config: ExperimentConfig::parse(&config, None)?,
            seeds,
            artifacts,
            warnings,
            duration: duration.ok_or_else(|| bad("missing duration".into()))?,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(std::io::BufReader::new(f))
    }
}
