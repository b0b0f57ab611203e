//! Task execution and output files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use lowdev_core::deviation::{emit_regime_table, ModelSpec, Regime, TableFormat};
use lowdev_core::rare_event::{
    bottcher_geometric_bound, bottcher_uniform_bound, geometric_delta_sweep, optimize_schroder_bound,
    schroder_strategy_bound, BoundReport,
};
use lowdev_core::rng::StreamKey;
use lowdev_core::simulator::{
    biggins_slope, cramer_is_estimate, heavy_tail_sum_check, run_brw, BrwConfig, GenerationRecord, Mode, RecordMode,
    Threshold,
};
use lowdev_core::stats::mean_se;
use lowdev_core::Error;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, SimMode, StrategyChoice, Sweep, Task, TaskKind};
use crate::error::CliError;

pub struct RunOptions {
    pub out: PathBuf,
    pub seed: u64,
    /// Run only tasks of this kind.
    pub only: Option<TaskKind>,
}

/// Writes files under one output directory, stamping each with the config
/// hash and seed.
struct Output {
    dir: PathBuf,
    hash: String,
    seed: u64,
    written: Vec<PathBuf>,
}

impl Output {
    fn path(&self, rel: &str) -> Result<PathBuf, CliError> {
        let p = self.dir.join(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(CliError::io(parent))?;
        }
        Ok(p)
    }

    fn write(&mut self, rel: &str, text: &str) -> Result<(), CliError> {
        let p = self.path(rel)?;
        fs::write(&p, text).map_err(CliError::io(&p))?;
        self.written.push(p);
        Ok(())
    }

    fn csv(&mut self, rel: &str, body: &str) -> Result<(), CliError> {
        let text = format!("# config_hash={}\n# seed={}\n{body}", self.hash, self.seed);
        self.write(rel, &text)
    }

    fn json(&mut self, rel: &str, value: Value) -> Result<(), CliError> {
        let mut doc = json!({ "config_hash": self.hash, "seed": self.seed });
        match value {
            Value::Object(m) => doc.as_object_mut().expect("object").extend(m),
            other => {
                doc["result"] = other;
            }
        }
        let text = serde_json::to_string_pretty(&doc).expect("JSON values serialize") + "\n";
        self.write(rel, &text)
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// Runs the configured tasks in order and returns the files written.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<PathBuf>, CliError> {
    let spec = cfg.model.build()?;
    let mut tasks: Vec<(usize, Task)> = cfg
        .tasks
        .iter()
        .cloned()
        .enumerate()
        .filter(|(_, t)| opts.only.is_none_or(|k| t.kind() == k))
        .collect();
    if tasks.is_empty() {
        match opts.only {
            Some(TaskKind::Rates) | None => tasks.push((cfg.tasks.len(), Task::Rates { a_sweep: None })),
            Some(k) => return Err(CliError::Config(format!("config has no {k:?} tasks").to_lowercase())),
        }
    }
    let mut out = Output { dir: opts.out.clone(), hash: cfg.hash(), seed: opts.seed, written: Vec::new() };
    let mut summary = String::new();
    let _ = writeln!(summary, "<!-- config_hash={} seed={} -->", out.hash, out.seed);
    let _ = writeln!(summary, "# Lower-deviation run\n");
    let _ = writeln!(
        summary,
        "Model: θ = {}, a = {}, m = {:.6}, x* = {:.6}.\n",
        spec.theta(),
        spec.a(),
        spec.offspring().mean(),
        spec.x_star()
    );
    let root = StreamKey::new(opts.seed);
    for (i, task) in tasks {
        let key = root.child(i as u64);
        match task {
            Task::Rates { a_sweep } => rates(&spec, a_sweep, &mut out, &mut summary)?,
            Task::Simulate { n_max, runs, mode, thetas, window } => {
                simulate(&spec, i, n_max, runs, mode, &thetas, window, key, &mut out, &mut summary)?
            }
            Task::Oracle { x, n, reps } => oracle(&spec, i, x, n, reps, key, &mut out, &mut summary)?,
            Task::Strategy { strategy, n, reps, rho, rho_points, eps, delta, l_prime, deltas } => {
                let p = StrategyParams { n, reps, rho, rho_points, eps, delta, l_prime, deltas };
                bound(&spec, i, strategy, &p, key, &mut out, &mut summary)?
            }
            Task::Table { models } => {
                let specs = models.iter().map(|m| m.build()).collect::<Result<Vec<_>, _>>()?;
                let md = emit_regime_table(&specs, TableFormat::Markdown);
                out.write(&format!("tables/regime_{i}.md"), &format!("<!-- config_hash={} seed={} -->\n{md}", out.hash, out.seed))?;
                out.csv(&format!("tables/regime_{i}.csv"), &emit_regime_table(&specs, TableFormat::Csv))?;
                let _ = writeln!(summary, "## Regime table (task {i})\n\n{md}");
            }
        }
    }
    out.write("summary.md", &summary)?;
    Ok(out.written)
}

fn rates(spec: &ModelSpec, sweep: Option<Sweep>, out: &mut Output, summary: &mut String) -> Result<(), CliError> {
    let r = spec.rate().map_err(CliError::op("rate constant"))?;
    let mut v = to_value(&r);
    v["model"] = json!({
        "theta": spec.theta(),
        "a": spec.a(),
        "log_m": spec.log_m(),
        "x_star": spec.x_star(),
        "L": spec.l(),
        "a_upper": spec.a_upper(),
    });
    out.json("rates.json", v)?;

    let rf = spec.rate_fn();
    let lo = rf.ess_inf().max(-10.0);
    let hi = rf.ess_sup().min(10.0);
    let mut body = String::from("x,I\n");
    for k in 0..=200 {
        let x = lo + (hi - lo) * k as f64 / 200.0;
        let _ = writeln!(body, "{x},{}", spec.i(x));
    }
    out.csv("curves/rate_fn.csv", &body)?;
    match r.regime {
        Regime::SchroderLight => {
            let mut buf = Vec::new();
            spec.schroder_curves_csv(&mut buf, 200).map_err(CliError::op("Schröder curves"))?;
            out.csv("curves/schroder.csv", &String::from_utf8_lossy(&buf))?;
        }
        Regime::BottcherBounded => {
            let mut buf = Vec::new();
            spec.f_l_curve_csv(&mut buf, 200).map_err(CliError::op("F_L curve"))?;
            out.csv("curves/f_l.csv", &String::from_utf8_lossy(&buf))?;
        }
        _ => {}
    }

    let _ = writeln!(summary, "## Rate constant\n");
    let _ = writeln!(summary, "| regime | scale | exponent | constant | branch |\n|---|---|---|---|---|");
    let exp = r.exponent.map_or_else(|| "-".to_string(), |e| format!("{e}"));
    let _ = writeln!(summary, "| {} | {} | {exp} | {:.10} | {} |\n", r.regime, r.scale, r.constant, r.branch);

    if let Some(sw) = sweep {
        let mut body = String::from("a,regime,scale,constant,branch\n");
        for a in sw.values() {
            let s = spec.with_a(a).map_err(CliError::from_model)?;
            let r = s.rate().map_err(CliError::op("rate sweep"))?;
            let _ = writeln!(body, "{a},{},{},{},{}", r.regime, r.scale, r.constant, r.branch);
        }
        out.csv("rates_sweep.csv", &body)?;
        let _ = writeln!(summary, "Sweep over a written to `rates_sweep.csv` ({} points).\n", sw.points);
    }
    Ok(())
}

fn mode_name(m: RecordMode) -> &'static str {
    match m {
        RecordMode::ExactParticles => "exact_particles",
        RecordMode::LatticeCohort => "lattice_cohort",
        RecordMode::MeanField => "mean_field",
    }
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    spec: &ModelSpec,
    i: usize,
    n_max: usize,
    runs: u64,
    mode: SimMode,
    thetas: &[f64],
    window: Option<(usize, usize)>,
    key: StreamKey,
    out: &mut Output,
    summary: &mut String,
) -> Result<(), CliError> {
    let mode = match mode {
        SimMode::Particle => Mode::Particle,
        SimMode::LatticeCohort => Mode::LatticeCohort,
    };
    let cfg = BrwConfig::new(n_max, mode);
    let levels: Vec<Threshold> =
        thetas.iter().map(|t| Threshold::Affine { slope: t * spec.x_star(), offset: 0.0 }).collect();
    let records: Vec<Vec<GenerationRecord>> = (0..runs)
        .into_par_iter()
        .map(|r| run_brw(spec.offspring(), spec.step(), &cfg, &levels, key.replica(r)))
        .collect::<Result<_, _>>()
        .map_err(CliError::op("simulation"))?;

    let mut body = String::from("run,n,total");
    for t in thetas {
        let _ = write!(body, ",count_theta_{t}");
    }
    body.push_str(",mode\n");
    for (r, recs) in records.iter().enumerate() {
        for g in recs {
            let _ = write!(body, "{r},{},{}", g.n, g.total);
            for c in &g.level_counts {
                let _ = write!(body, ",{c}");
            }
            let _ = writeln!(body, ",{}", mode_name(g.mode));
        }
    }
    out.csv(&format!("sim/simulate_{i}.csv"), &body)?;

    let window = window.unwrap_or((n_max / 2, n_max));
    let mut slopes = Vec::new();
    let _ = writeln!(summary, "## Level-set growth (task {i}, window {window:?}, {runs} runs)\n");
    let _ = writeln!(summary, "| θ | mean slope | s.e. | log m − I(θx*) | runs used |\n|---|---|---|---|---|");
    for (j, &theta) in thetas.iter().enumerate() {
        let mut vals = Vec::new();
        let mut empty = 0;
        for recs in &records {
            match biggins_slope(recs, j, window) {
                Ok(s) => vals.push(s),
                Err(Error::EmptyLevelSet { .. }) => empty += 1,
                Err(e) => return Err(CliError::op("slope fit")(e)),
            }
        }
        let (m, se) = if vals.is_empty() { (f64::NAN, f64::NAN) } else { mean_se(&vals) };
        let target = spec.log_m() - spec.i(theta * spec.x_star());
        let _ = writeln!(summary, "| {theta} | {m:.6} | {se:.2e} | {target:.6} | {} |", vals.len());
        slopes.push(json!({
            "theta": theta,
            "mean_slope": if m.is_finite() { json!(m) } else { Value::Null },
            "std_error": if se.is_finite() { json!(se) } else { Value::Null },
            "target": target,
            "runs_used": vals.len(),
            "runs_empty": empty,
        }));
    }
    summary.push('\n');
    out.json(
        &format!("sim/simulate_{i}.json"),
        json!({ "n_max": n_max, "runs": runs, "window": [window.0, window.1], "slopes": slopes }),
    )
}

#[allow(clippy::too_many_arguments)]
fn oracle(
    spec: &ModelSpec,
    i: usize,
    x: f64,
    n: usize,
    reps: usize,
    key: StreamKey,
    out: &mut Output,
    summary: &mut String,
) -> Result<(), CliError> {
    let theory = spec.i(-x);
    let (method, log_p, rel_se) = match cramer_is_estimate(spec.rate_fn(), x, n, reps, key) {
        Ok(r) => ("tilted", r.log_prob_estimate, r.rel_std_error),
        Err(Error::TiltOutsideDomain { .. }) => {
            // heavy left tail: plain Monte Carlo
            let rep = heavy_tail_sum_check(spec.step(), n, &[x * n as f64], reps, key)
                .map_err(CliError::op("direct walk estimate"))?;
            let p = &rep.points[0];
            ("direct", p.p_hat.ln(), p.std_error / p.p_hat)
        }
        Err(e) => return Err(CliError::op("walk oracle")(e)),
    };
    let rate = -log_p / n as f64;
    out.csv(
        &format!("sim/oracle_{i}.csv"),
        &format!(
            "method,n,x,log_prob_estimate,rel_std_error,rate_estimate,theory_rate\n\
             {method},{n},{x},{log_p},{rel_se},{rate},{theory}\n"
        ),
    )?;
    let _ = writeln!(
        summary,
        "## Walk oracle (task {i})\n\n−(1/n) log P(S_n ≤ −xn) at n = {n}, x = {x}: {rate:.6} ({method} estimate); I(−x) = {theory:.6}.\n"
    );
    Ok(())
}

struct StrategyParams {
    n: usize,
    reps: usize,
    rho: Option<f64>,
    rho_points: usize,
    eps: Option<f64>,
    delta: Option<f64>,
    l_prime: Option<f64>,
    deltas: Vec<f64>,
}

fn bound(
    spec: &ModelSpec,
    i: usize,
    choice: StrategyChoice,
    p: &StrategyParams,
    key: StreamKey,
    out: &mut Output,
    summary: &mut String,
) -> Result<(), CliError> {
    let (name, best, extra): (&str, BoundReport, Vec<BoundReport>) = match choice {
        StrategyChoice::Schroder => {
            let op = CliError::op("single-line strategy bound");
            match p.rho {
                Some(rho) => ("schroder", schroder_strategy_bound(spec, rho, p.eps, p.n, p.reps, key).map_err(op)?, vec![]),
                None => {
                    let (best, grid) =
                        optimize_schroder_bound(spec, p.eps, p.n, p.rho_points, p.reps, key).map_err(op)?;
                    ("schroder", best, grid)
                }
            }
        }
        StrategyChoice::BottcherUniform => {
            let l_prime = p.l_prime.unwrap_or_else(|| spec.l());
            let delta = p.delta.unwrap_or_else(|| 0.05 * spec.c_hat());
            let r = bottcher_uniform_bound(spec, l_prime, delta, p.n, p.reps, key)
                .map_err(CliError::op("uniform strategy bound"))?;
            ("bottcher_uniform", r, vec![])
        }
        StrategyChoice::BottcherGeometric => {
            let r = bottcher_geometric_bound(spec, p.n, p.delta, p.reps, key)
                .map_err(CliError::op("geometric strategy bound"))?;
            let sweep = if p.deltas.is_empty() {
                vec![]
            } else {
                geometric_delta_sweep(spec, p.n, &p.deltas, p.reps, key.child(1))
                    .map_err(CliError::op("geometric delta sweep"))?
            };
            ("bottcher_geometric", r, sweep)
        }
    };
    let label = if choice == StrategyChoice::Schroder { "grid" } else { "sweep" };
    out.json(&format!("bounds/{name}_{i}.json"), json!({ "bound": to_value(&best), label: to_value(&extra) }))?;
    let _ = writeln!(summary, "## Strategy bound (task {i}, {name}, n = {})\n", p.n);
    let _ = writeln!(summary, "| log L | normalized | theory | ratio |\n|---|---|---|---|");
    let _ = writeln!(
        summary,
        "| {:.6} | {:.6} | {:.6} | {:.4} |\n",
        best.log_bound, best.normalized, best.theory_constant, best.ratio
    );
    Ok(())
}

/// Output directory: the flag, then the config, then the environment, then
/// `lowdev-out`.
pub fn resolve_out_dir(flag: Option<&Path>, cfg: &ExperimentConfig, env: Option<&str>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| env.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("lowdev-out"))
}
