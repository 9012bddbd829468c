//! Scenario sweep configuration, loaded from TOML or assembled from flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use chargraph::{DemandSpec, Topology};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

/// Evenly spaced grid `start, .., stop` with `count` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    pub fn new(start: f64, stop: f64, count: usize) -> CliResult<Self> {
        for v in [start, stop] {
            if !(0.0..=1.0).contains(&v) {
                return Err(CliError::Config(format!("grid bound {v} outside [0, 1]")));
            }
        }
        if count == 0 {
            return Err(CliError::Config("grid count must be at least 1".into()));
        }
        Ok(Self { start, stop, count })
    }

    pub fn single(v: f64) -> CliResult<Self> {
        Self::new(v, v, 1)
    }

    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.stop
                } else {
                    self.start + step * i as f64
                }
            })
            .collect()
    }
}

impl FromStr for Grid {
    type Err = CliError;

    /// `a,b,count`, or a single value.
    fn from_str(s: &str) -> CliResult<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let num = |t: &str| {
            t.parse::<f64>()
                .map_err(|_| CliError::Config(format!("bad grid value {t:?} in {s:?}")))
        };
        match parts.as_slice() {
            [v] => Self::single(num(v)?),
            [a, b, c] => {
                let count = c
                    .parse::<usize>()
                    .map_err(|_| CliError::Config(format!("bad grid count {c:?}")))?;
                Self::new(num(a)?, num(b)?, count)
            }
            _ => Err(CliError::Config(format!(
                "grid {s:?} is not `start,stop,count`"
            ))),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GridRepr {
    Text(String),
    Value(f64),
    Triple(f64, f64, f64),
}

impl TryFrom<GridRepr> for Grid {
    type Error = CliError;

    fn try_from(r: GridRepr) -> CliResult<Self> {
        match r {
            GridRepr::Text(s) => s.parse(),
            GridRepr::Value(v) => Grid::single(v),
            GridRepr::Triple(a, b, c) => {
                if c.fract() != 0.0 || c < 1.0 {
                    return Err(CliError::Config(format!(
                        "grid count {c} is not a positive integer"
                    )));
                }
                Grid::new(a, b, c as usize)
            }
        }
    }
}

fn de_grid<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<Grid>, D::Error> {
    let r = Option::<GridRepr>::deserialize(d)?;
    r.map(Grid::try_from)
        .transpose()
        .map_err(serde::de::Error::custom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioId {
    S1,
    S2Table2,
    S2Diniz,
    S3,
    Multilinear,
    Custom,
}

impl ScenarioId {
    /// Name of the second swept parameter.
    pub fn second_name(self) -> &'static str {
        match self {
            ScenarioId::S2Table2 => "p",
            _ => "rho",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// `T(N, K, Kc, M, Nr)`; `m` defaults to the cyclic storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub n: usize,
    pub k: usize,
    #[serde(default = "one")]
    pub kc: usize,
    pub m: Option<usize>,
    pub nr: usize,
}

fn one() -> usize {
    1
}

impl TopologySpec {
    pub fn build(&self) -> CliResult<Topology> {
        Ok(match self.m {
            Some(m) => Topology::new(self.n, self.k, self.kc, m, self.nr)?,
            None => Topology::cyclic(self.n, self.k, self.kc, self.nr)?,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioId,
    /// Single-topology shorthand, or a list under `topologies`.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub kc: Option<usize>,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub nr: Option<usize>,
    #[serde(default)]
    pub topologies: Vec<TopologySpec>,
    #[serde(default, deserialize_with = "de_grid")]
    pub eps_grid: Option<Grid>,
    #[serde(default, deserialize_with = "de_grid")]
    pub rho_grid: Option<Grid>,
    #[serde(default, deserialize_with = "de_grid")]
    pub p_grid: Option<Grid>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub format: Format,
    /// Demand of the `custom` scenario.
    #[serde(default)]
    pub demand: Option<DemandSpec>,
}

impl ScenarioConfig {
    pub fn empty(scenario: ScenarioId) -> Self {
        Self {
            scenario,
            n: None,
            k: None,
            kc: None,
            m: None,
            nr: None,
            topologies: Vec::new(),
            eps_grid: None,
            rho_grid: None,
            p_grid: None,
            out: None,
            seed: 0,
            format: Format::Csv,
            demand: None,
        }
    }

    /// Reads a TOML file; a relative `out` is resolved against the
    /// directory of the file.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        let mut cfg: ScenarioConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let (Some(out), Some(dir)) = (&cfg.out, path.parent()) {
            if out.is_relative() {
                cfg.out = Some(dir.join(out));
            }
        }
        Ok(cfg)
    }

    /// Topologies to sweep. The Scenario II variants fix their own.
    pub fn topology_specs(&self) -> CliResult<Vec<TopologySpec>> {
        if matches!(self.scenario, ScenarioId::S2Table2 | ScenarioId::S2Diniz) {
            return Ok(vec![TopologySpec {
                n: 3,
                k: 3,
                kc: 2,
                m: Some(2),
                nr: 2,
            }]);
        }
        let mut specs = self.topologies.clone();
        match (self.n, self.k, self.nr) {
            (Some(n), Some(k), Some(nr)) => specs.push(TopologySpec {
                n,
                k,
                kc: self.kc.unwrap_or(1),
                m: self.m,
                nr,
            }),
            (None, None, None) => {}
            _ => {
                return Err(CliError::Config(
                    "a topology needs all of n, k and nr".into(),
                ))
            }
        }
        if specs.is_empty() {
            return Err(CliError::Config(format!(
                "scenario {:?} needs a topology",
                self.scenario
            )));
        }
        Ok(specs)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.eps_grid.is_none() {
            return Err(CliError::Config("eps grid is required".into()));
        }
        if self.scenario == ScenarioId::Custom && self.demand.is_none() {
            return Err(CliError::Config("custom scenario needs a demand".into()));
        }
        if self.p_grid.is_some() && self.scenario != ScenarioId::S2Table2 {
            return Err(CliError::Config(
                "a p grid only applies to s2-table2".into(),
            ));
        }
        if self.rho_grid.is_some()
            && matches!(
                self.scenario,
                ScenarioId::S2Table2 | ScenarioId::S3 | ScenarioId::Multilinear
            )
        {
            return Err(CliError::Config(format!(
                "scenario {:?} takes no rho grid",
                self.scenario
            )));
        }
        for spec in self.topology_specs()? {
            spec.build()?;
        }
        Ok(())
    }
}
