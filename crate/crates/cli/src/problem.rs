//! Instance assembly for the `simulate` and `graph` commands.

use chargraph::{cyclic_placement, DemandSpec, DinizModel, JointPmf, Placement, Topology};
use clap::Args;

use crate::config::TopologySpec;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Use the three-server instance with demands W2 and W2 + W3.
    #[arg(long)]
    pub scenario2: bool,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub kc: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub nr: Option<usize>,
    /// Demand as JSON, or `@path` to a JSON file; defaults to the product
    /// of all datasets over F_2.
    #[arg(long)]
    pub demand: Option<String>,
    /// Bernoulli parameter of every dataset.
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    /// Correlation of the exchangeable model; 0 gives i.i.d. datasets.
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
}

pub struct Problem {
    pub topology: Topology,
    pub placement: Placement,
    pub demand: DemandSpec,
    pub joint: JointPmf,
}

pub fn parse_demand(text: &str) -> CliResult<DemandSpec> {
    let body = match text.strip_prefix('@') {
        Some(path) => {
            std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {path}"), e))?
        }
        None => text.to_string(),
    };
    Ok(DemandSpec::from_json(&body)?)
}

/// Binary datasets from the exchangeable model over `k` bits.
pub fn binary_joint(k: usize, eps: f64, rho: f64) -> CliResult<JointPmf> {
    Ok(DinizModel::new(eps, rho)?.joint(k as u32)?)
}

impl ProblemArgs {
    pub fn build(&self) -> CliResult<Problem> {
        let (spec, demand) = if self.scenario2 {
            let spec = TopologySpec {
                n: 3,
                k: 3,
                kc: 2,
                m: None,
                nr: 2,
            };
            (
                spec,
                DemandSpec::linear(2, vec![vec![0, 1, 0], vec![0, 1, 1]])?,
            )
        } else {
            let (Some(n), Some(k), Some(nr)) = (self.n, self.k, self.nr) else {
                return Err(CliError::Config(
                    "give --n, --k and --nr, or --scenario2".into(),
                ));
            };
            let demand = match &self.demand {
                Some(text) => parse_demand(text)?,
                None => DemandSpec::multilinear(2)?,
            };
            let kc = self.kc.unwrap_or(demand.kc());
            (
                TopologySpec {
                    n,
                    k,
                    kc,
                    m: self.m,
                    nr,
                },
                demand,
            )
        };
        if demand.q() != 2 {
            return Err(CliError::Config("only binary datasets are sampled".into()));
        }
        let topology = spec.build()?;
        let placement = cyclic_placement(&topology)?;
        let joint = binary_joint(topology.n_datasets, self.eps, self.rho)?;
        Ok(Problem {
            topology,
            placement,
            demand,
            joint,
        })
    }
}
