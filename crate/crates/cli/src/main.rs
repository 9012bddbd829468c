//! `chargraph`: batch front end producing CSV and JSON rate tables.

mod config;
mod error;
mod problem;
mod sweep;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chargraph::chargraph::{build_char_graph, or_power};
use chargraph::simulator::verify_all_subsets;
use chargraph::{
    build_decode_table, build_encoders, conditional_graph_entropy, cyclic_placement, graph_entropy,
    run_simulation, CharGraph, JointPmf, SolverOptions, Topology,
};
use clap::{Parser, Subcommand};
use serde::Deserialize;

use config::{Format, Grid, ScenarioConfig, ScenarioId};
use error::{CliError, CliResult};
use problem::ProblemArgs;

#[derive(Parser)]
#[command(
    name = "chargraph",
    version,
    about = "Characteristic-graph rates for distributed function computation"
)]
struct Cli {
    /// Worker threads for grid sweeps and sampling.
    #[arg(long, global = true, env = "CHARGRAPH_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the cyclic dataset placement as JSON.
    Placement {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        nr: usize,
    },
    /// Graph entropy of a graph described in a JSON file.
    Entropy {
        /// JSON with `pmf`, `edges` or `complete`, optional `labels` and an
        /// optional `side` matrix `P(x, y)` for the conditional variant.
        spec: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 100_000)]
        max_iters: usize,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Sweep a scenario over parameter grids.
    Scenario(ScenarioArgs),
    /// Exhaustively verify zero-error decoding, then estimate rates by
    /// sampling.
    Simulate {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 1)]
        blocklength: usize,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// 1-based servers that decode in the sampled run; defaults to the
        /// first Nr.
        #[arg(long, value_delimiter = ',')]
        subset: Option<Vec<usize>>,
    },
    /// Print a server's union characteristic graph in DOT.
    Graph {
        #[command(flatten)]
        problem: ProblemArgs,
        /// 1-based server.
        #[arg(long, default_value_t = 1)]
        server: usize,
        /// OR power of the graph.
        #[arg(long, default_value_t = 1)]
        power: usize,
    },
}

#[derive(clap::Args)]
struct ScenarioArgs {
    /// Scenario id; may come from `--config` instead.
    #[arg(value_enum)]
    scenario: Option<ScenarioId>,
    /// TOML config; flags given alongside override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    kc: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    nr: Option<usize>,
    /// `start,stop,count` or a single value.
    #[arg(long)]
    eps_grid: Option<Grid>,
    #[arg(long)]
    rho_grid: Option<Grid>,
    #[arg(long)]
    p_grid: Option<Grid>,
    /// Demand for `custom`, as JSON or `@path`.
    #[arg(long)]
    demand: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl ScenarioArgs {
    fn into_config(self) -> CliResult<ScenarioConfig> {
        let mut cfg = match (&self.config, self.scenario) {
            (Some(path), _) => ScenarioConfig::load(path)?,
            (None, Some(id)) => ScenarioConfig::empty(id),
            (None, None) => return Err(CliError::Config("give a scenario id or --config".into())),
        };
        if let Some(id) = self.scenario {
            cfg.scenario = id;
        }
        if self.n.is_some() || self.k.is_some() || self.nr.is_some() {
            cfg.topologies.clear();
            cfg.n = self.n.or(cfg.n);
            cfg.k = self.k.or(cfg.k);
            cfg.nr = self.nr.or(cfg.nr);
        }
        cfg.kc = self.kc.or(cfg.kc);
        cfg.m = self.m.or(cfg.m);
        cfg.eps_grid = self.eps_grid.or(cfg.eps_grid);
        cfg.rho_grid = self.rho_grid.or(cfg.rho_grid);
        cfg.p_grid = self.p_grid.or(cfg.p_grid);
        cfg.out = self.out.or(cfg.out);
        cfg.seed = self.seed.unwrap_or(cfg.seed);
        cfg.format = self.format.unwrap_or(cfg.format);
        if let Some(d) = &self.demand {
            cfg.demand = Some(problem::parse_demand(d)?);
        }
        Ok(cfg)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphSpec {
    pmf: Vec<f64>,
    #[serde(default)]
    edges: Vec<(usize, usize)>,
    #[serde(default)]
    complete: bool,
    #[serde(default)]
    labels: Option<Vec<Vec<u32>>>,
    #[serde(default)]
    side: Option<Vec<Vec<f64>>>,
}

fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)
                    .map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
            }
            std::fs::write(path, text)
                .map_err(|e| CliError::io(format!("writing {}", path.display()), e))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::io("writing stdout", e))
        }
    }
}

fn json_line<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("result serializes") + "\n"
}

fn cmd_entropy(spec: &Path, opts: SolverOptions) -> CliResult<String> {
    let text = std::fs::read_to_string(spec)
        .map_err(|e| CliError::io(format!("reading {}", spec.display()), e))?;
    let g: GraphSpec = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", spec.display())))?;
    let n = g.pmf.len();
    let labels = g
        .labels
        .unwrap_or_else(|| (0..n as u32).map(|v| vec![v]).collect());
    let edges: Vec<(usize, usize)> = if g.complete {
        (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .collect()
    } else {
        g.edges
    };
    let graph = CharGraph::new(labels, g.pmf.clone(), &edges)?;
    let result = match g.side {
        None => graph_entropy(&graph, &opts)?,
        Some(rows) => {
            if rows.len() != n || g.pmf.iter().any(|&p| p <= 0.0) {
                return Err(CliError::Config(
                    "side matrix needs one row per positive-mass vertex".into(),
                ));
            }
            let ny = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|r| r.len() != ny) {
                return Err(CliError::Config("side matrix rows differ in length".into()));
            }
            let joint = JointPmf::new(vec![n, ny], rows.concat())?;
            conditional_graph_entropy(&graph, &joint, &opts)?
        }
    };
    if !result.converged {
        return Err(chargraph::Error::NonConvergence {
            iterations: opts.max_iters,
        }
        .into());
    }
    Ok(json_line(&result))
}

fn cmd_simulate(
    problem: &ProblemArgs,
    n: usize,
    trials: u64,
    seed: u64,
    subset: Option<Vec<usize>>,
) -> CliResult<String> {
    let pb = problem.build()?;
    let (t, p, d, j) = (&pb.topology, &pb.placement, &pb.demand, &pb.joint);
    let encoders = build_encoders(t, p, d, j, n)?;
    verify_all_subsets(&encoders, t, p, d, j)?;
    let subset: Vec<usize> = match subset {
        Some(s) => {
            if s.iter().any(|&i| i == 0 || i > t.n_servers) {
                return Err(CliError::Config(format!(
                    "subset {s:?} names servers outside 1..={}",
                    t.n_servers
                )));
            }
            s.iter().map(|i| i - 1).collect()
        }
        None => (0..t.recovery_threshold).collect(),
    };
    let table = build_decode_table(&encoders, t, p, d, j, &subset)?;
    let result = run_simulation(&encoders, &table, d, j, n, trials, seed)?;
    Ok(json_line(&result))
}

fn cmd_graph(problem: &ProblemArgs, server: usize, power: usize) -> CliResult<String> {
    let pb = problem.build()?;
    if server == 0 || server > pb.topology.n_servers {
        return Err(CliError::Config(format!(
            "server {server} outside 1..={}",
            pb.topology.n_servers
        )));
    }
    let all: Vec<usize> = (0..pb.demand.kc()).collect();
    let g = build_char_graph(&pb.demand, &pb.placement, &pb.joint, server - 1, &all)?;
    Ok(or_power(&g, power)?.to_dot())
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(threads) = cli.threads {
        // An already-initialized global pool is kept.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global();
    }
    match cli.command {
        Command::Placement { n, k, nr } => {
            let t = Topology::cyclic(n, k, 1, nr)?;
            emit(&(cyclic_placement(&t)?.to_json() + "\n"), None)
        }
        Command::Entropy {
            spec,
            tol,
            max_iters,
            restarts,
            seed,
        } => {
            let opts = SolverOptions {
                tol,
                max_iters,
                restarts: restarts.max(1),
                seed,
            };
            emit(&cmd_entropy(&spec, opts)?, None)
        }
        Command::Scenario(args) => {
            let cfg = args.into_config()?;
            let rows = sweep::run(&cfg)?;
            emit(&sweep::render(&cfg, &rows)?, cfg.out.as_deref())
        }
        Command::Simulate {
            problem,
            blocklength,
            trials,
            seed,
            subset,
        } => emit(
            &cmd_simulate(&problem, blocklength, trials, seed, subset)?,
            None,
        ),
        Command::Graph {
            problem,
            server,
            power,
        } => emit(&cmd_graph(&problem, server, power)?, None),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
