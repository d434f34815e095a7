use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::datagen::{parse_f64, GeneratorKind};
use crate::error::{Error, Result};
use crate::mlp::{DropoutMode, DropoutSpec};

/// The experiments the harness knows how to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Experiment {
    NoiseSweep,
    WidthContrast,
    EpochsTrace,
    WeightDecaySweep,
    ToyDecomposition,
    PlantedSweep,
    BalanceCurve,
    VerifyTheorems,
}

impl Experiment {
    pub const ALL: [Experiment; 8] = [
        Experiment::NoiseSweep,
        Experiment::WidthContrast,
        Experiment::EpochsTrace,
        Experiment::WeightDecaySweep,
        Experiment::ToyDecomposition,
        Experiment::PlantedSweep,
        Experiment::BalanceCurve,
        Experiment::VerifyTheorems,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::NoiseSweep => "noise-sweep",
            Experiment::WidthContrast => "width-contrast",
            Experiment::EpochsTrace => "epochs-trace",
            Experiment::WeightDecaySweep => "weight-decay-sweep",
            Experiment::ToyDecomposition => "toy-decomposition",
            Experiment::PlantedSweep => "planted-sweep",
            Experiment::BalanceCurve => "balance-curve",
            Experiment::VerifyTheorems => "verify-theorems",
        }
    }

    fn params(self) -> Vec<Param> {
        use Kind::*;
        let mut v = vec![Param::new("seed", "0", U64)];
        let training = |v: &mut Vec<Param>, width: &'static str| {
            v.extend([
                Param::new("layers", "3", Count),
                Param::new("width", width, Count),
                Param::new("lr", "0.03", Positive),
                Param::new("batch", "32", Count),
                Param::new("epochs", "2000", Count),
                Param::new("patience", "200", Usize),
                Param::new("mode", "plain", Mode),
            ]);
        };
        let distill = |v: &mut Vec<Param>, n: &'static str| {
            v.extend([
                Param::new("distill_n", n, Count),
                Param::new("eval_n", "2000", Count),
                Param::new("max_order", "4", Count),
                Param::new("rounds", "300", Count),
                Param::new("shrinkage", "0.3", Positive),
                Param::new("min_leaf", "5", Count),
            ]);
        };
        let noise_data = |v: &mut Vec<Param>| {
            v.extend([
                Param::new("n_train", "1500", Count),
                Param::new("n_heldout", "500", Count),
                Param::new("n_features", "25", Count),
            ]);
        };
        let theorems = |v: &mut Vec<Param>| {
            v.extend([
                Param::new("theorem_p", "0.2,0.5", Rates),
                Param::new("orders", "1,2,3", Counts),
                Param::new("n_masks", "100000", Count),
                Param::new("n_points", "20", Count),
                Param::new("n_samples", "2000", Count),
                Param::new("data_noise", "0.1", NonNegative),
            ]);
        };
        const NOISE_GRID: &str = "0,0.1,0.2,0.3,0.4,0.5";
        match self {
            Experiment::NoiseSweep => {
                v.push(Param::new("reps", "10", Count));
                training(&mut v, "32");
                noise_data(&mut v);
                distill(&mut v, "1500");
                v.push(Param::new("variants", "input,activation,both", Variants));
                v.push(Param::new("dropout_grid", NOISE_GRID, Rates));
                v.push(Param::new("weight_decay", "0", NonNegative));
            }
            Experiment::WidthContrast => {
                v.push(Param::new("reps", "5", Count));
                training(&mut v, "32");
                v.retain(|p| p.key != "width");
                v.push(Param::new("widths", "32,128", Counts));
                noise_data(&mut v);
                distill(&mut v, "1500");
                v.push(Param::new("variants", "input,activation", Variants));
                v.push(Param::new("dropout_grid", NOISE_GRID, Rates));
                v.push(Param::new("contrast_width", "128", Count));
                v.push(Param::new("contrast_max_rate", "0.4", Rate));
            }
            Experiment::EpochsTrace => {
                v.push(Param::new("reps", "10", Count));
                training(&mut v, "32");
                set_default(&mut v, "epochs", "300");
                set_default(&mut v, "patience", "0");
                v.extend([
                    Param::new("checkpoint_every", "15", Count),
                    Param::new(
                        "generators",
                        "main-effects,pair-effects,three-way-effects",
                        Generators,
                    ),
                    Param::new("sigma", "0.5", NonNegative),
                    Param::new("n_train", "1500", Count),
                    Param::new("n_heldout", "500", Count),
                    Param::new("variant", "input", Variant),
                    Param::new("dropout_grid", "0,0.4", Rates),
                    Param::new("crossing_share", "0.1", Rate),
                ]);
                distill(&mut v, "1000");
                set_default(&mut v, "eval_n", "1000");
            }
            Experiment::WeightDecaySweep => {
                v.push(Param::new("reps", "10", Count));
                training(&mut v, "32");
                noise_data(&mut v);
                distill(&mut v, "1500");
                v.push(Param::new(
                    "lambda_grid",
                    "0,0.001,0.01,0.05,0.1,0.2,0.5",
                    NonNegatives,
                ));
                v.push(Param::new("reference_input_rate", "0.3", Rate));
                v.push(Param::new("compare_lambda", "0.05", NonNegative));
                v.push(Param::new("collapse_lambda", "0.5", NonNegative));
            }
            Experiment::ToyDecomposition => {
                v.push(Param::new("rhos", "0.01,0.99", Correlations));
                v.push(Param::new("grid_n", "41", Count));
            }
            Experiment::PlantedSweep => {
                v.push(Param::new("reps", "5", Count));
                training(&mut v, "64");
                set_default(&mut v, "layers", "2");
                set_default(&mut v, "epochs", "100");
                set_default(&mut v, "patience", "0");
                v.extend([
                    Param::new("meta_reps", "5", Count),
                    Param::new("k_grid", "1,2,3", Counts),
                    Param::new("dropout_grid", "0,0.125,0.25,0.375,0.5,0.625", Rates),
                    Param::new("variant", "activation", Variant),
                    Param::new("n_train", "2000", Count),
                    Param::new("n_test", "2000", Count),
                    Param::new("d_base", "50", Count),
                    Param::new("c_base", "20", Count),
                    Param::new("spread", "0.35", Positive),
                ]);
            }
            Experiment::BalanceCurve => {
                v.push(Param::new("reps", "10", Count));
                v.extend([
                    Param::new("n_features", "25", Count),
                    Param::new("p_grid", "0.1,0.25,0.5,0.75", Rates),
                    Param::new("k_max", "25", Count),
                    Param::new("linear_k_max", "4", Count),
                ]);
                theorems(&mut v);
            }
            Experiment::VerifyTheorems => {
                v.push(Param::new("reps", "10", Count));
                theorems(&mut v);
            }
        }
        v
    }
}

fn set_default(v: &mut [Param], key: &str, value: &'static str) {
    v.iter_mut()
        .find(|p| p.key == key)
        .expect("known key")
        .default = value;
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// Dropout placement used by the sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Input,
    Activation,
    Both,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Input => "input",
            Variant::Activation => "activation",
            Variant::Both => "both",
        }
    }

    pub fn spec(self, rate: f64, mode: DropoutMode) -> DropoutSpec {
        match self {
            Variant::Input => DropoutSpec::input(rate),
            Variant::Activation => DropoutSpec::activation(rate),
            Variant::Both => DropoutSpec::both(rate),
        }
        .with_mode(mode)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "input" => Ok(Variant::Input),
            "activation" => Ok(Variant::Activation),
            "both" => Ok(Variant::Both),
            _ => Err(Error::Config(format!("unknown dropout variant `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    U64,
    Usize,
    /// Integer >= 1.
    Count,
    Counts,
    Positive,
    NonNegative,
    NonNegatives,
    /// Probability in [0, 1).
    Rate,
    Rates,
    Correlations,
    Mode,
    Variant,
    Variants,
    Generators,
}

#[derive(Debug, Clone)]
struct Param {
    key: &'static str,
    default: &'static str,
    kind: Kind,
}

impl Param {
    fn new(key: &'static str, default: &'static str, kind: Kind) -> Self {
        Param { key, default, kind }
    }
}

fn list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty())
}

fn check_value(key: &str, kind: Kind, value: &str) -> Result<()> {
    let bad = |why: &str| Error::Config(format!("`{key} = {value}`: {why}"));
    let float = |t: &str| parse_f64(t).map_err(|_| bad("not a number"));
    let nonempty = |n: usize| {
        if n == 0 {
            Err(bad("list is empty"))
        } else {
            Ok(())
        }
    };
    match kind {
        Kind::U64 => value
            .parse::<u64>()
            .map(drop)
            .map_err(|_| bad("expected an unsigned integer")),
        Kind::Usize => value
            .parse::<usize>()
            .map(drop)
            .map_err(|_| bad("expected an unsigned integer")),
        Kind::Count => match value.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(()),
            _ => Err(bad("expected an integer >= 1")),
        },
        Kind::Counts => {
            let mut n = 0;
            for t in list(value) {
                check_value(key, Kind::Count, t)?;
                n += 1;
            }
            nonempty(n)
        }
        Kind::Positive => match float(value)? {
            v if v > 0.0 && v.is_finite() => Ok(()),
            _ => Err(bad("expected a positive number")),
        },
        Kind::NonNegative => match float(value)? {
            v if v >= 0.0 && v.is_finite() => Ok(()),
            _ => Err(bad("expected a number >= 0")),
        },
        Kind::NonNegatives | Kind::Rates | Kind::Correlations => {
            let mut n = 0;
            for t in list(value) {
                let v = float(t)?;
                let ok = match kind {
                    Kind::NonNegatives => v >= 0.0 && v.is_finite(),
                    Kind::Rates => (0.0..1.0).contains(&v),
                    _ => v.abs() < 1.0,
                };
                if !ok {
                    return Err(bad(match kind {
                        Kind::Rates => "rates must lie in [0, 1)",
                        Kind::Correlations => "correlations must lie in (-1, 1)",
                        _ => "values must be >= 0",
                    }));
                }
                n += 1;
            }
            nonempty(n)
        }
        Kind::Rate => match float(value)? {
            v if (0.0..1.0).contains(&v) => Ok(()),
            _ => Err(bad("rate must lie in [0, 1)")),
        },
        Kind::Mode => match value {
            "plain" | "inverted" => Ok(()),
            _ => Err(bad("mode is `plain` or `inverted`")),
        },
        Kind::Variant => value.parse::<Variant>().map(drop),
        Kind::Variants => {
            let mut n = 0;
            for t in list(value) {
                t.parse::<Variant>()?;
                n += 1;
            }
            nonempty(n)
        }
        Kind::Generators => {
            let mut n = 0;
            for t in list(value) {
                let g: GeneratorKind = t.parse().map_err(|_| bad("unknown generator"))?;
                if g.nominal_order().is_none() {
                    return Err(bad("only signal generators can be traced"));
                }
                n += 1;
            }
            nonempty(n)
        }
    }
}

/// Experiment name plus a complete, validated parameter table.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    experiment: Experiment,
    values: BTreeMap<String, String>,
}

impl ExperimentConfig {
    /// The defaults of `experiment`.
    pub fn new(experiment: Experiment) -> Self {
        let values = experiment
            .params()
            .into_iter()
            .map(|p| (p.key.to_string(), p.default.to_string()))
            .collect();
        ExperimentConfig { experiment, values }
    }

    /// Parse flat `key = value` text; `#` starts a comment. An `experiment`
    /// line, when present, must agree with `expected` if that is given.
    pub fn parse(text: &str, expected: Option<Experiment>) -> Result<Self> {
        let mut pairs = Vec::new();
        let mut named = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    i + 1
                ))
            })?;
            let (k, v) = (k.trim(), v.trim());
            if k == "experiment" {
                named = Some(v.parse::<Experiment>()?);
            } else {
                pairs.push((k.to_string(), v.to_string()));
            }
        }
        let experiment = match (named, expected) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!("config is for `{a}`, not `{b}`")));
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(Error::Config("config names no experiment".into())),
        };
        let mut cfg = ExperimentConfig::new(experiment);
        for (k, v) in pairs {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path, expected: Option<Experiment>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, expected)
    }

    pub fn experiment(&self) -> Experiment {
        self.experiment
    }

    /// Change one parameter; the key must exist and the value must be valid.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let param = self
            .experiment
            .params()
            .into_iter()
            .find(|p| p.key == key)
            .ok_or_else(|| {
                Error::Config(format!("`{key}` is not a parameter of {}", self.experiment))
            })?;
        check_value(key, param.kind, value)?;
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Apply a `key=value` override.
    pub fn apply_override(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{pair}` is not `key=value`")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Result<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Config(format!("{} has no `{key}` parameter", self.experiment)))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let v = self.raw(key)?;
        v.parse()
            .map_err(|_| Error::Config(format!("`{key} = {v}` is not an integer")))
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        let v = self.raw(key)?;
        v.parse()
            .map_err(|_| Error::Config(format!("`{key} = {v}` is not an integer")))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        parse_f64(self.raw(key)?)
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        list(self.raw(key)?).map(parse_f64).collect()
    }

    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>> {
        list(self.raw(key)?)
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Config(format!("`{key}`: `{t}` is not an integer")))
            })
            .collect()
    }

    pub fn variants(&self, key: &str) -> Result<Vec<Variant>> {
        list(self.raw(key)?).map(str::parse).collect()
    }

    pub fn generators(&self, key: &str) -> Result<Vec<GeneratorKind>> {
        list(self.raw(key)?).map(str::parse).collect()
    }

    pub fn mode(&self) -> Result<DropoutMode> {
        Ok(match self.raw("mode")? {
            "inverted" => DropoutMode::Inverted,
            _ => DropoutMode::Plain,
        })
    }

    /// `experiment = name` followed by every parameter, sorted by key.
    pub fn to_text(&self) -> String {
        let mut s = format!("experiment = {}\n", self.experiment);
        for (k, v) in &self.values {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        for e in Experiment::ALL {
            let cfg = ExperimentConfig::new(e);
            for p in e.params() {
                check_value(p.key, p.kind, p.default).unwrap();
            }
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
            let back = ExperimentConfig::parse(&cfg.to_text(), None).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn parse_comments_and_overrides() {
        let text = "# sweep\nexperiment = noise-sweep\nreps = 3 # fewer\n\nwidth=16\n";
        let mut cfg = ExperimentConfig::parse(text, Some(Experiment::NoiseSweep)).unwrap();
        assert_eq!(cfg.usize("reps").unwrap(), 3);
        assert_eq!(cfg.usize("width").unwrap(), 16);
        cfg.apply_override("dropout_grid=0, 0.25").unwrap();
        assert_eq!(cfg.f64_list("dropout_grid").unwrap(), vec![0.0, 0.25]);
        assert!(ExperimentConfig::parse(text, Some(Experiment::PlantedSweep)).is_err());
        assert!(ExperimentConfig::parse("reps = 2", None).is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = ExperimentConfig::new(Experiment::WidthContrast);
        assert!(cfg.set("dropout_grid", "").is_err());
        assert!(cfg.set("dropout_grid", "0,1.0").is_err());
        assert!(cfg.set("dropout_grid", "-0.1").is_err());
        assert!(cfg.set("reps", "0").is_err());
        assert!(cfg.set("width", "32").is_err());
        assert!(cfg.set("nonsense", "1").is_err());
        assert!(cfg.apply_override("reps").is_err());
        let mut b = ExperimentConfig::new(Experiment::BalanceCurve);
        assert!(b.set("p_grid", "0.5,1.0").is_err());
        assert!(b.set("theorem_p", "0.2").is_ok());
        let mut t = ExperimentConfig::new(Experiment::EpochsTrace);
        assert!(t.set("generators", "noise").is_err());
        assert_eq!(t.generators("generators").unwrap().len(), 3);
        let mut toy = ExperimentConfig::new(Experiment::ToyDecomposition);
        assert!(toy.set("rhos", "0.5,1").is_err());
    }
}
