//! `mfe`: solves the stationary mean-field equilibrium and writes
//! plot-ready CSV/JSON artifacts.

mod format;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mfe_core::equilibrium::EquilibriumOptions;
use mfe_core::metrics::{concentration, elasticities, equilibrium_v_star, table1, ElasticityParam, ValueReport};
use mfe_core::simulate::{simulate_params, Reflection, SimConfig};
use mfe_core::sweep::{grid, sweep, PointOutputs};
use mfe_core::{Equilibrium, Error, Execution, ModelParams, Regime};
use serde_json::{json, Value};

use format::{json_num, json_opt, num, opt, write_json, Csv};

#[derive(Parser)]
#[command(name = "mfe", version, about = "Stationary mean-field equilibrium of a regime-switching investment game")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibrium, fixed-point trace and value functions.
    Solve(Common),
    /// Monte Carlo paths reflected at the equilibrium thresholds.
    Simulate(Common),
    /// One-parameter sweep in long format.
    Sweep(Common),
    /// Stationary firm value and its elasticities.
    Elasticities(Common),
    /// Elasticity table over the symmetric volatility/price grid.
    Table1(Common),
    /// Stationary distribution on a log grid.
    Dist(Common),
    /// Concentration indices and the capacity-share curve.
    Gini(Common),
}

#[derive(Args, Clone)]
#[command(allow_negative_numbers = true)]
struct Common {
    /// Parameter file (`key = value` lines or a JSON object).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Swept parameter (any config key, or `inv_p1`).
    #[arg(long)]
    param: Option<String>,
    #[arg(long)]
    from: Option<f64>,
    #[arg(long)]
    to: Option<f64>,
    /// Grid size for sweeps, distribution and curve output.
    #[arg(long)]
    points: Option<usize>,
    /// Relative fixed-point residual target.
    #[arg(long)]
    tol: Option<f64>,
    /// Fixed-point iteration cap.
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, default_value_t = 200)]
    paths: usize,
    #[arg(long, default_value_t = 2000.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0.1)]
    dt: f64,
    #[arg(long, value_enum, default_value_t = ReflectionArg::Exact)]
    reflection: ReflectionArg,
    /// Run every batch on the calling thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReflectionArg {
    Exact,
    Projection,
}

enum Failure {
    Core(Error),
    Io(PathBuf, std::io::Error),
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(Error::NonConvergence { .. } | Error::Numerical { .. }) => 2,
            Failure::Core(Error::DivergentMoment { .. }) => 3,
            _ => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Core(e) => e.to_string(),
            Failure::Io(p, e) => format!("{}: {e}", p.display()),
            Failure::Usage(m) => m.clone(),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

impl Common {
    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    fn options(&self) -> EquilibriumOptions {
        let mut o = EquilibriumOptions::default();
        if let Some(t) = self.tol {
            o.tol = t;
        }
        if let Some(n) = self.max_iter {
            o.max_iter = n;
        }
        o
    }

    fn params(&self) -> Result<ModelParams, Failure> {
        let text = fs::read_to_string(&self.config).map_err(|e| Failure::Io(self.config.clone(), e))?;
        let p = ModelParams::from_config_str(&text)?;
        let report = p.validate();
        if !report.is_admissible() {
            return Err(Error::InvalidParams(report).into());
        }
        for w in report.warnings() {
            eprintln!("warning: {:?}: {}", w.constraint, w.message);
        }
        Ok(p)
    }

    fn out_path(&self, name: &str) -> Result<PathBuf, Failure> {
        fs::create_dir_all(&self.out).map_err(|e| Failure::Io(self.out.clone(), e))?;
        Ok(self.out.join(name))
    }

    fn write_csv(&self, name: &str, csv: &Csv) -> Outcome {
        let path = self.out_path(name)?;
        csv.write(&path).map_err(|e| Failure::Io(path, e))
    }

    fn write_json(&self, name: &str, v: &Value) -> Outcome {
        let path = self.out_path(name)?;
        write_json(&path, v).map_err(|e| Failure::Io(path, e))
    }

    fn solve(&self, p: &ModelParams) -> Result<Equilibrium, Failure> {
        Ok(mfe_core::equilibrium::solve_equilibrium_with(p, &self.options())?)
    }
}

fn pair(x: [f64; 2]) -> Value {
    json!([json_num(x[0]), json_num(x[1])])
}

fn params_json(p: &ModelParams) -> Value {
    let map: serde_json::Map<String, Value> = mfe_core::params::CONFIG_KEYS
        .iter()
        .map(|k| (k.to_string(), json_num(p.get(k).unwrap())))
        .collect();
    Value::Object(map)
}

/// `n` log-spaced points on `[lo, hi]`.
fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    grid(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect()
}

fn run_solve(c: &Common) -> Outcome {
    let p = c.params()?;
    let eq = c.solve(&p)?;
    let v_star = match equilibrium_v_star(&eq) {
        Ok(v) => Some(v),
        Err(Error::DivergentMoment { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let doc = json!({
        "params": params_json(&p),
        "Q_star": pair(eq.q_star),
        "a_star": pair(eq.a_star),
        "eta_star": pair(eq.eta_star),
        "k": pair([eq.thresholds.k(Regime::One), eq.thresholds.k(Regime::Two)]),
        "theta2": json_num(eq.theta2()),
        "pi": pair([eq.law.pi(Regime::One), eq.law.pi(Regime::Two)]),
        "residual": json_num(eq.residual),
        "smooth_fit_residual": json_num(eq.thresholds.smooth_fit_residual()),
        "iterations": eq.iterations,
        "bracket": json!([pair(eq.bracket[0]), pair(eq.bracket[1])]),
        "bounds": json!({"Q_low": pair(eq.bounds.q_low), "Q_high": pair(eq.bounds.q_high)}),
        "probe_gap": json_opt(eq.probe.map(|(_, g)| g)),
        "V_star": json_opt(v_star),
        "warnings": p.validate().warnings().map(|w| format!("{:?}", w.constraint)).collect::<Vec<_>>(),
    });
    c.write_json("equilibrium.json", &doc)?;

    let mut trace = Csv::new(&["iter", "Q1", "Q2", "RQ1", "RQ2", "residual", "omega", "step"]);
    for r in &eq.trace {
        trace.row([
            r.iter.to_string(),
            num(r.q[0]),
            num(r.q[1]),
            num(r.rq[0]),
            num(r.rq[1]),
            num(r.residual),
            num(r.omega),
            r.step.to_string(),
        ]);
    }
    c.write_csv("trace.csv", &trace)?;

    let [lo, hi] = eq.law.ordered_thresholds();
    let mut vf = Csv::new(&["x", "v1", "v2", "V1", "V2"]);
    for x in log_grid(0.5 * lo, 10.0 * hi, c.points.unwrap_or(200)) {
        let t = &eq.thresholds;
        vf.row([
            num(x),
            num(t.v(x, Regime::One)?),
            num(t.v(x, Regime::Two)?),
            num(t.V(x, Regime::One)?),
            num(t.V(x, Regime::Two)?),
        ]);
    }
    c.write_csv("thresholds.csv", &vf)
}

fn run_simulate(c: &Common) -> Outcome {
    let p = c.params()?;
    let eq = c.solve(&p)?;
    let every = ((1.0 / c.dt).round() as usize).max(1);
    let mut cfg = SimConfig::new(eq.a_star);
    cfg.dt = c.dt;
    cfg.horizon = c.horizon;
    cfg.n_paths = c.paths;
    cfg.seed = c.seed;
    cfg.sample_every = every;
    cfg.record_every = every;
    cfg.trajectories = 1;
    cfg.reflection = match c.reflection {
        ReflectionArg::Exact => Reflection::Exact,
        ReflectionArg::Projection => Reflection::Projection,
    };
    let stats = simulate_params(&p, &cfg, c.exec())?;

    let mut traj = Csv::new(&["t", "X", "regime", "I_cumulative"]);
    for pt in stats.trajectories.first().into_iter().flatten() {
        traj.row([num(pt.t), num(pt.x), pt.regime.label().to_string(), num(pt.invested)]);
    }
    c.write_csv("trajectory.csv", &traj)?;

    let doc = json!({
        "seed": c.seed,
        "paths": c.paths,
        "horizon": json_num(c.horizon),
        "dt": json_num(c.dt),
        "burn_in": json_num(cfg.burn_in),
        "a_star": pair(eq.a_star),
        "Q_star": pair(eq.q_star),
        "records": stats.n_records(),
        "samples": stats.samples.len(),
        "occupation": pair(stats.occupation()),
        "conditional_means": pair(stats.conditional_means()),
        "conditional_mean_stderr": pair(stats.conditional_mean_stderr()),
        "mean": json_num(stats.mean()),
        "corridor_probability": json_num(stats.corridor_probability()),
        "corridor_share": json_num(stats.corridor_share()),
        "max_reflection_violation": json_num(stats.max_reflection_violation()),
        "ks_distance": json_num(stats.joint_ks_distance(&eq.law)),
    });
    c.write_json("stats.json", &doc)
}

fn run_sweep(c: &Common) -> Outcome {
    let (Some(name), Some(from), Some(to), Some(n)) = (&c.param, c.from, c.to, c.points) else {
        return Err(Failure::Usage("sweep needs --param, --from, --to and --points".into()));
    };
    if n == 0 || !from.is_finite() || !to.is_finite() {
        return Err(Failure::Usage("sweep range must be finite with at least one point".into()));
    }
    let p = c.params()?;
    let mut opts = c.options();
    opts.probe = false;
    let points = sweep(&p, name, &grid(from, to, n), &opts, c.exec())?;
    let mut csv = Csv::new(&["param", "value", "quantity", "result", "status"]);
    for pt in &points {
        match &pt.outputs {
            Ok(o) => {
                for (q, v) in PointOutputs::NAMES.iter().zip(o.values()) {
                    let status = if v.is_some() { "ok" } else { "divergent_moment" };
                    csv.row([name.as_str(), &num(pt.value), q, &opt(v), status]);
                }
            }
            Err(f) => {
                eprintln!("{name} = {}: {}", num(pt.value), f.message);
                for q in PointOutputs::NAMES {
                    csv.row([name.as_str(), &num(pt.value), q, "", f.code]);
                }
            }
        }
    }
    c.write_csv("sweep.csv", &csv)
}

fn elasticity_rows(csv: &mut Csv, lead: &[String], r: &ValueReport) {
    for e in &r.elasticities {
        let mut row = lead.to_vec();
        row.extend([
            e.param.key().to_string(),
            num(e.value),
            num(e.coarse),
            num(e.fine),
            e.stable.to_string(),
        ]);
        csv.row(row);
    }
}

fn run_elasticities(c: &Common) -> Outcome {
    let p = c.params()?;
    let r = elasticities(&p, c.exec())?;
    let mut csv = Csv::new(&["param", "elasticity", "coarse", "fine", "stable"]);
    elasticity_rows(&mut csv, &[], &r);
    c.write_csv("elasticities.csv", &csv)?;
    let doc = json!({
        "V_star": json_num(r.v_star),
        "elasticities": r.elasticities.iter().map(|e| json!({
            "param": e.param.key(),
            "value": json_num(e.value),
            "coarse": json_num(e.coarse),
            "fine": json_num(e.fine),
            "stable": e.stable,
        })).collect::<Vec<_>>(),
    });
    c.write_json("elasticities.json", &doc)
}

fn run_table1(c: &Common) -> Outcome {
    let p = c.params()?;
    let rows = table1(&p, c.exec())?;
    let mut csv = Csv::new(&["sigma2", "varphi2", "V_star", "chi_sigma1", "chi_p1", "chi_varphi1", "stable"]);
    for r in &rows {
        let rep = &r.report;
        csv.row([
            num(r.sigma2),
            num(r.varphi2),
            num(rep.v_star),
            num(rep.get(ElasticityParam::Sigma1)),
            num(rep.get(ElasticityParam::P1)),
            num(rep.get(ElasticityParam::Varphi1)),
            rep.elasticities.iter().all(|e| e.stable).to_string(),
        ]);
    }
    c.write_csv("table1.csv", &csv)
}

fn run_dist(c: &Common) -> Outcome {
    let p = c.params()?;
    let eq = c.solve(&p)?;
    let law = &eq.law;
    let lo = law.ordered_thresholds()[0];
    let hi = law.quantile(0.999)?;
    let mut csv = Csv::new(&["x", "cdf1", "cdf2", "pdf1", "pdf2", "cdf"]);
    for x in log_grid(lo, hi, c.points.unwrap_or(400)) {
        csv.row([
            num(x),
            num(law.cdf(x, Regime::One)),
            num(law.cdf(x, Regime::Two)),
            num(law.pdf(x, Regime::One)),
            num(law.pdf(x, Regime::Two)),
            num(law.marginal_cdf(x)),
        ]);
    }
    c.write_csv("dist.csv", &csv)
}

fn run_gini(c: &Common) -> Outcome {
    let p = c.params()?;
    let eq = c.solve(&p)?;
    let r = concentration(&eq.law, c.points.unwrap_or(101).max(2))?;
    let mut csv = Csv::new(&["q", "share"]);
    for &(q, s) in &r.gini_curve {
        csv.row([num(q), num(s)]);
    }
    c.write_csv("gini.csv", &csv)?;
    let doc = json!({
        "mean": json_num(r.mean),
        "variance": json_opt(r.variance),
        "ratio": json_opt(r.ratio),
        "gini_H": json_num(r.gini_h),
        "gini_H_conditional": json_num(r.gini_h_conditional),
        "theta2": json_num(eq.theta2()),
    });
    c.write_json("gini.json", &doc)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Solve(c) => run_solve(c),
        Command::Simulate(c) => run_simulate(c),
        Command::Sweep(c) => run_sweep(c),
        Command::Elasticities(c) => run_elasticities(c),
        Command::Table1(c) => run_table1(c),
        Command::Dist(c) => run_dist(c),
        Command::Gini(c) => run_gini(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}

