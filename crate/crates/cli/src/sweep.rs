//! Grid sweeps over the scenario rate comparisons.

use chargraph::rates::{
    all_orderings, multilinear_rates, scenario1_rates, scenario2_diniz, scenario2_rho0,
    scenario2_table2, scenario3_rates,
};
use chargraph::{
    chain_rate, cyclic_placement, gains, slepian_wolf_rate, DinizModel, GainReport, SideInfo,
    SolverOptions, Topology,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Format, ScenarioConfig, ScenarioId, TopologySpec};
use crate::error::{CliError, CliResult};
use crate::problem::binary_joint;

/// Largest server count for which `custom` searches every ordering.
const MAX_CUSTOM_ORDERING: usize = 6;

pub struct Row {
    pub topology: TopologySpec,
    pub eps: f64,
    pub second: f64,
    pub gains: GainReport,
}

struct Point {
    spec: TopologySpec,
    topology: Topology,
    eps: f64,
    second: Option<f64>,
}

fn evaluate(cfg: &ScenarioConfig, pt: &Point) -> CliResult<(f64, GainReport)> {
    let (t, eps) = (&pt.topology, pt.eps);
    let rho = pt.second.unwrap_or(0.0);
    let report = match cfg.scenario {
        ScenarioId::S1 => scenario1_rates(t, DinizModel::new(eps, rho)?)?,
        ScenarioId::S2Table2 => match pt.second {
            Some(p) => scenario2_table2(eps, p)?,
            None => return Ok((1.0 - eps, scenario2_rho0(eps)?)),
        },
        ScenarioId::S2Diniz => scenario2_diniz(DinizModel::new(eps, rho)?)?,
        ScenarioId::S3 => scenario3_rates(t, eps, t.n_demands)?,
        ScenarioId::Multilinear => multilinear_rates(t, eps)?,
        ScenarioId::Custom => {
            let d = cfg.demand.as_ref().expect("validated");
            if d.q() != 2 {
                return Err(CliError::Config(
                    "custom scenario supports binary datasets only".into(),
                ));
            }
            let p = cyclic_placement(t)?;
            let joint = binary_joint(t.n_datasets, eps, rho)?;
            let orderings = if t.n_servers <= MAX_CUSTOM_ORDERING {
                all_orderings(t.n_servers)?
            } else {
                vec![(0..t.n_servers).collect()]
            };
            let opts = SolverOptions {
                seed: cfg.seed,
                ..SolverOptions::default()
            };
            let graph = chain_rate(t, &p, d, &joint, &orderings, SideInfo::Shared, &opts)?;
            if !graph.converged {
                return Err(chargraph::Error::NonConvergence {
                    iterations: opts.max_iters,
                }
                .into());
            }
            gains(graph, None, slepian_wolf_rate(&joint)?)?
        }
    };
    Ok((rho, report))
}

/// Evaluates every grid point in parallel; rows come back in grid order
/// (topology, then eps, then the second parameter).
pub fn run(cfg: &ScenarioConfig) -> CliResult<Vec<Row>> {
    cfg.validate()?;
    let eps = cfg.eps_grid.expect("validated").points();
    let second: Vec<Option<f64>> = match cfg.rho_grid.or(cfg.p_grid) {
        Some(g) => g.points().into_iter().map(Some).collect(),
        None => vec![None],
    };
    let mut points = Vec::new();
    for spec in cfg.topology_specs()? {
        let topology = spec.build()?;
        for &e in &eps {
            for &s in &second {
                points.push(Point {
                    spec,
                    topology,
                    eps: e,
                    second: s,
                });
            }
        }
    }
    points
        .par_iter()
        .map(|pt| {
            let (second, gains) = evaluate(cfg, pt)?;
            Ok(Row {
                topology: pt.spec,
                eps: pt.eps,
                second,
                gains,
            })
        })
        .collect()
}

/// Nine significant digits in plain decimal notation; `inf` for infinite
/// values.
pub fn fmt9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if mag > 8 {
        let unit = 10f64.powi(mag - 8);
        return format!("{:.0}", (x / unit).round() * unit);
    }
    let decimals = (8 - mag) as usize;
    let s = format!("{x:.decimals$}");
    // Rounding can carry into a new leading digit.
    let digits = s.chars().filter(char::is_ascii_digit).collect::<String>();
    if digits.trim_start_matches('0').len() > 9 && decimals > 0 {
        let d = decimals - 1;
        return format!("{x:.d$}");
    }
    s
}

fn header(cfg: &ScenarioConfig) -> Vec<String> {
    [
        "n",
        "k",
        "kc",
        "m",
        "nr",
        "eps",
        cfg.scenario.second_name(),
        "r_graph",
        "r_lin",
        "r_sw",
        "eta_lin",
        "eta_sw",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn topology_fields(r: &Row) -> CliResult<[usize; 5]> {
    let t = r.topology.build()?;
    Ok([
        t.n_servers,
        t.n_datasets,
        t.n_demands,
        t.storage,
        t.recovery_threshold,
    ])
}

pub fn to_csv(cfg: &ScenarioConfig, rows: &[Row]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Config(format!("csv: {e}"));
    w.write_record(header(cfg)).map_err(csv_err)?;
    for r in rows {
        let g = &r.gains;
        let mut rec: Vec<String> = topology_fields(r)?.iter().map(usize::to_string).collect();
        rec.extend([
            fmt9(r.eps),
            fmt9(r.second),
            fmt9(g.graph.sum_rate),
            g.lin.as_ref().map(|l| fmt9(l.sum_rate)).unwrap_or_default(),
            fmt9(g.sw.sum_rate),
            g.eta_lin.map(fmt9).unwrap_or_default(),
            fmt9(g.eta_sw),
        ]);
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(fmt9(x))
    }
}

pub fn to_json(cfg: &ScenarioConfig, rows: &[Row]) -> CliResult<String> {
    let names = header(cfg);
    let mut out = Vec::new();
    for r in rows {
        let g = &r.gains;
        let mut values: Vec<Value> = topology_fields(r)?.iter().map(|&v| json!(v)).collect();
        values.extend([
            num(r.eps),
            num(r.second),
            num(g.graph.sum_rate),
            g.lin.as_ref().map_or(Value::Null, |l| num(l.sum_rate)),
            num(g.sw.sum_rate),
            g.eta_lin.map_or(Value::Null, num),
            num(g.eta_sw),
        ]);
        let obj: serde_json::Map<String, Value> = names.iter().cloned().zip(values).collect();
        out.push(Value::Object(obj));
    }
    Ok(serde_json::to_string_pretty(&out).expect("json values serialize") + "\n")
}

pub fn render(cfg: &ScenarioConfig, rows: &[Row]) -> CliResult<String> {
    match cfg.format {
        Format::Csv => to_csv(cfg, rows),
        Format::Json => to_json(cfg, rows),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Grid;

    #[test]
    fn nine_digits() {
        assert_eq!(fmt9(1.0), "1.00000000");
        assert_eq!(fmt9(1.0765982), "1.07659820");
        assert_eq!(fmt9(0.000123456789123), "0.000123456789");
        assert_eq!(fmt9(123456.0), "123456.000");
        assert_eq!(fmt9(9.9999999999), "10.0000000");
        assert_eq!(fmt9(2432115734842557440.0), "2432115730000000000");
        assert_eq!(fmt9(f64::INFINITY), "inf");
        assert_eq!(fmt9(0.0), "0");
        assert_eq!(fmt9(-0.5), "-0.500000000");
    }

    #[test]
    fn table2_independent_row() {
        let mut cfg = ScenarioConfig::empty(ScenarioId::S2Table2);
        cfg.eps_grid = Some(Grid::single(0.5).unwrap());
        cfg.p_grid = Some(Grid::single(0.5).unwrap());
        let rows = run(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].gains.eta_lin.unwrap() - 1.0).abs() < 1e-12);
        let csv = to_csv(&cfg, &rows).unwrap();
        assert!(csv.starts_with("n,k,kc,m,nr,eps,p,r_graph"));
    }

    #[test]
    fn grid_order_and_shape() {
        let mut cfg = ScenarioConfig::empty(ScenarioId::S2Diniz);
        cfg.eps_grid = Some("0.1,0.3,3".parse().unwrap());
        cfg.rho_grid = Some("0,1,2".parse().unwrap());
        let rows = run(&cfg).unwrap();
        let keys: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, r.second)).collect();
        assert_eq!(
            keys,
            vec![
                (0.1, 0.0),
                (0.1, 1.0),
                (0.2, 0.0),
                (0.2, 1.0),
                (0.3, 0.0),
                (0.3, 1.0)
            ]
        );
    }

    #[test]
    fn custom_matches_closed_form() {
        let mut cfg = ScenarioConfig::empty(ScenarioId::Custom);
        cfg.n = Some(3);
        cfg.k = Some(3);
        cfg.kc = Some(2);
        cfg.nr = Some(2);
        cfg.demand =
            Some(chargraph::DemandSpec::linear(2, vec![vec![0, 1, 0], vec![0, 1, 1]]).unwrap());
        cfg.eps_grid = Some(Grid::single(0.2).unwrap());
        let rows = run(&cfg).unwrap();
        let want = scenario2_rho0(0.2).unwrap();
        assert!((rows[0].gains.graph.sum_rate - want.graph.sum_rate).abs() < 1e-7);
        assert!((rows[0].gains.sw.sum_rate - want.sw.sum_rate).abs() < 1e-9);
    }
}
