//! Where a dataset comes from: a named generator or a CSV file.
//!
//! Grammar, as used by `--dataset` and the config file:
//!
//! ```text
//! gen:<name>[:key=value[,key=value...]]     e.g. gen:simple:n=100,d=10
//! <path>[?header=yes|no][&label=last|none|<column>]
//! ```
//!
//! A bare path is read as the generator dialect: a header row and the class
//! label in the last column.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use protoclust::data::{gen_banana, gen_highleyman, gen_lines, gen_simple, gen_spherical, load_csv};
use protoclust::{Dataset, RngSeed};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    Lines,
    Banana,
    Highleyman,
    Spherical,
    Simple,
}

impl Generator {
    pub const ALL: [Generator; 5] = [
        Generator::Lines,
        Generator::Banana,
        Generator::Highleyman,
        Generator::Spherical,
        Generator::Simple,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Generator::Lines => "lines",
            Generator::Banana => "banana",
            Generator::Highleyman => "highleyman",
            Generator::Spherical => "spherical",
            Generator::Simple => "simple",
        }
    }

    /// Accepted parameters with their defaults. `n` is the total for `lines`
    /// and the per-class count elsewhere.
    pub fn defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            Generator::Lines => &[("n", 1000.0), ("segments", 10.0), ("seed", 0.0)],
            Generator::Banana => &[("n", 500.0), ("s", 1.0), ("seed", 0.0)],
            Generator::Highleyman => &[("n", 500.0), ("seed", 0.0)],
            Generator::Spherical => &[("n", 500.0), ("u", 0.0), ("seed", 0.0)],
            Generator::Simple => &[("n", 500.0), ("d", 1.0), ("seed", 0.0)],
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Generator {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        Generator::ALL.into_iter().find(|g| g.name().eq_ignore_ascii_case(s)).ok_or_else(|| {
            let names: Vec<&str> = Generator::ALL.iter().map(|g| g.name()).collect();
            anyhow!("unknown generator `{s}`; expected one of {}", names.join(", "))
        })
    }
}

/// A generator with explicit parameter overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub generator: Generator,
    overrides: BTreeMap<String, f64>,
}

impl GeneratorSpec {
    pub fn new(generator: Generator) -> Self {
        GeneratorSpec {
            generator,
            overrides: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: f64) -> anyhow::Result<()> {
        if !self.generator.defaults().iter().any(|(k, _)| *k == key) {
            let keys: Vec<&str> = self.generator.defaults().iter().map(|(k, _)| *k).collect();
            bail!("generator `{}` has no parameter `{key}`; expected one of {}", self.generator, keys.join(", "));
        }
        if !value.is_finite() {
            bail!("generator parameter `{key}` must be finite");
        }
        self.overrides.insert(key.to_owned(), value);
        Ok(())
    }

    pub fn has(&self, key: &str) -> bool {
        self.overrides.contains_key(key)
    }

    fn real(&self, key: &str) -> f64 {
        self.overrides.get(key).copied().unwrap_or_else(|| {
            self.generator
                .defaults()
                .iter()
                .find(|(k, _)| *k == key)
                .map(|&(_, v)| v)
                .expect("key is declared")
        })
    }

    fn count(&self, key: &str) -> anyhow::Result<usize> {
        let v = self.real(key);
        if v < 0.0 || v.fract() != 0.0 {
            bail!("generator parameter `{key}` must be a non-negative integer, got {v}");
        }
        Ok(v as usize)
    }

    pub fn generate(&self) -> anyhow::Result<Dataset> {
        let seed = RngSeed(self.count("seed")? as u64);
        let ds = match self.generator {
            Generator::Lines => gen_lines(self.count("n")?, self.count("segments")?, seed),
            Generator::Banana => gen_banana(self.count("n")?, self.real("s"), seed),
            Generator::Highleyman => gen_highleyman(self.count("n")?, seed),
            Generator::Spherical => gen_spherical(self.count("n")?, self.real("u"), seed),
            Generator::Simple => gen_simple(self.count("n")?, self.real("d"), seed),
        };
        Ok(ds?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelColumn {
    Last,
    None,
    Index(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Generated(GeneratorSpec),
    Csv {
        path: PathBuf,
        has_header: bool,
        label: LabelColumn,
    },
}

impl DatasetSource {
    /// Load or generate. Generated sources without an explicit `seed` use `seed`.
    pub fn load(&self, seed: RngSeed) -> anyhow::Result<Dataset> {
        match self {
            DatasetSource::Generated(spec) => {
                let mut spec = spec.clone();
                if !spec.has("seed") {
                    spec.overrides.insert("seed".into(), seed.0 as f64);
                }
                spec.generate()
            }
            DatasetSource::Csv { path, has_header, label } => {
                let label_column = match label {
                    LabelColumn::None => None,
                    LabelColumn::Index(i) => Some(*i),
                    LabelColumn::Last => Some(first_row_width(path)?.saturating_sub(1)),
                };
                load_csv(path, *has_header, label_column).with_context(|| format!("reading {}", path.display()))
            }
        }
    }

    pub fn is_file(&self) -> bool {
        matches!(self, DatasetSource::Csv { .. })
    }
}

fn first_row_width(path: &PathBuf) -> anyhow::Result<usize> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    for line in BufReader::new(file).lines() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if !line.trim().is_empty() {
            return Ok(line.split(',').count());
        }
    }
    bail!("{} is empty", path.display())
}

impl FromStr for DatasetSource {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        if let Some(rest) = s.strip_prefix("gen:") {
            let (name, params) = rest.split_once(':').unwrap_or((rest, ""));
            let mut spec = GeneratorSpec::new(name.parse()?);
            for pair in params.split(',').filter(|p| !p.is_empty()) {
                let (k, v) = pair
                    .split_once('=')
                    .ok_or_else(|| anyhow!("expected key=value in `{s}`, got `{pair}`"))?;
                let v: f64 = v.parse().map_err(|_| anyhow!("`{k}` in `{s}` is not a number: `{v}`"))?;
                spec.set(k.trim(), v)?;
            }
            return Ok(DatasetSource::Generated(spec));
        }
        let (path, query) = s.split_once('?').unwrap_or((s, ""));
        if path.is_empty() {
            bail!("empty dataset path");
        }
        let mut has_header = true;
        let mut label = LabelColumn::Last;
        for pair in query.split('&').filter(|p| !p.is_empty()) {
            match pair.split_once('=') {
                Some(("header", "yes" | "true")) => has_header = true,
                Some(("header", "no" | "false")) => has_header = false,
                Some(("label", "last")) => label = LabelColumn::Last,
                Some(("label", "none")) => label = LabelColumn::None,
                Some(("label", v)) => {
                    label = LabelColumn::Index(v.parse().map_err(|_| anyhow!("label must be last, none or a column index, got `{v}`"))?)
                }
                _ => bail!("unknown CSV option `{pair}` in `{s}`"),
            }
        }
        Ok(DatasetSource::Csv {
            path: PathBuf::from(path),
            has_header,
            label,
        })
    }
}
