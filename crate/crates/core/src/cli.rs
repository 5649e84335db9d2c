//! Command-line front end: TOML experiment files in, JSON reports and CSV
//! tables out.
//!
//! Every command is a pure function of the parsed [`RunConfig`], so the same
//! file (and seed) always yields byte-identical output. See [`execute`].

use crate::copula::Theta;
use crate::distlib::DistributionSpec;
use crate::error::{Context, Error, Result};
use crate::invert::invert_cdf;
use crate::model::{Family, OmegaAtom, OmegaAtoms, QueueModel};
use crate::par::{map_slice, with_threads, Execution};
use crate::sim::{self, SimConfig};
use crate::solver::erlang::{self, ErlangOptions};
use crate::solver::mg1::{self, MeanFormulaDiagnostic};
use crate::solver::{self, Analysis, Boundary, SolverDiagnostics};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// `|z|` above this fails `compare` with exit code 4.
pub const COMPARE_FAIL_Z: f64 = 4.0;
pub const EXIT_COMPARISON: i32 = 4;
pub const DEFAULT_INVERT_POINTS: usize = 101;
/// Default inversion grid ends at this multiple of `E(M)`.
pub const DEFAULT_INVERT_SPAN: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Analyze,
    Simulate,
    Compare,
    Sweep,
    Invert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyName {
    Mg1,
    Erlang,
    Proportional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: FamilyName,
    /// Give exactly one of `lambda` and `rho`.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default)]
    pub theta: f64,
    /// Erlang arrival shape.
    #[serde(default)]
    pub n: Option<u32>,
    pub service: DistributionSpec,
    #[serde(default)]
    pub omega: Option<Vec<OmegaAtom>>,
}

fn field<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Config(format!("{name}: {e}")))
}

impl ModelConfig {
    pub fn build(&self) -> Result<QueueModel> {
        let theta = field("model.theta", Theta::new(self.theta))?;
        if self.family != FamilyName::Erlang && self.n.is_some() {
            return Err(Error::Config("model.n only applies to the erlang family".into()));
        }
        if self.family != FamilyName::Proportional && self.omega.is_some() {
            return Err(Error::Config("model.omega only applies to the proportional family".into()));
        }
        let family = match self.family {
            FamilyName::Mg1 => Family::Mg1,
            FamilyName::Erlang => Family::Erlang {
                n: self
                    .n
                    .ok_or_else(|| Error::Config("model.n is required for the erlang family".into()))?,
            },
            FamilyName::Proportional => {
                let atoms = self.omega.clone().ok_or_else(|| {
                    Error::Config("model.omega is required for the proportional family".into())
                })?;
                Family::Proportional {
                    atoms: field("model.omega", OmegaAtoms::new(atoms))?,
                }
            }
        };
        let lambda = match (self.lambda, self.rho) {
            (Some(l), None) => l,
            (None, Some(_)) => 1.0,
            _ => return Err(Error::Config("set exactly one of model.lambda and model.rho".into())),
        };
        let model = field("model", QueueModel::new(family, lambda, theta, self.service.clone()))?;
        match self.rho {
            Some(rho) => field("model.rho", model.with_rho(rho)),
            None => Ok(model),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "minus_one")]
    pub theta_min: f64,
    #[serde(default = "plus_one")]
    pub theta_max: f64,
    /// Number of intervals; the grid has `steps + 1` points.
    #[serde(default = "default_steps")]
    pub steps: u32,
    /// Traffic intensities to sweep; defaults to the model's own.
    #[serde(default)]
    pub rho: Option<Vec<f64>>,
}

fn minus_one() -> f64 {
    -1.0
}
fn plus_one() -> f64 {
    1.0
}
fn default_steps() -> u32 {
    20
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            theta_min: -1.0,
            theta_max: 1.0,
            steps: default_steps(),
            rho: None,
        }
    }
}

impl SweepConfig {
    pub fn thetas(&self) -> Result<Vec<f64>> {
        let (lo, hi) = (self.theta_min, self.theta_max);
        if !(-1.0..=1.0).contains(&lo) || !(-1.0..=1.0).contains(&hi) || lo > hi {
            return Err(Error::Config(format!(
                "sweep.theta_min/theta_max must satisfy -1 <= min <= max <= 1, got {lo}, {hi}"
            )));
        }
        if self.steps == 0 {
            return Ok(vec![lo]);
        }
        let h = (hi - lo) / self.steps as f64;
        Ok((0..=self.steps)
            .map(|i| if i == self.steps { hi } else { lo + i as f64 * h })
            .collect())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvertConfig {
    /// Explicit time grid; overrides `t_max` / `points`.
    #[serde(default)]
    pub t: Option<Vec<f64>>,
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    /// Added to the analytic value of the named statistic before comparing.
    #[serde(default)]
    pub perturb: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Used by `fgmq run`; the other subcommands ignore it.
    #[serde(default)]
    pub action: Option<Action>,
    pub model: ModelConfig,
    #[serde(default)]
    pub sim: Option<SimConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub invert: Option<InvertConfig>,
    #[serde(default)]
    pub compare: Option<CompareConfig>,
    #[serde(default)]
    pub output: Option<OutputConfig>,
}

impl RunConfig {
    fn sim(&self) -> Result<&SimConfig> {
        self.sim
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs a [sim] block".into()))
    }
}

/// Parses a config and applies `path=value` overrides.
pub fn load_config(text: &str, overrides: &[String]) -> Result<RunConfig> {
    if overrides.is_empty() {
        return toml::from_str(text).map_err(|e| Error::Config(e.to_string()));
    }
    let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let merged = toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?;
    toml::from_str(&merged).map_err(|e| Error::Config(format!("after --set overrides: {e}")))
}

pub fn load_config_file(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    load_config(&text, overrides).context(path.display().to_string())
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--set expects path=value, got `{spec}`")))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let keys: Vec<&str> = path.trim().split('.').collect();
    let (last, parents) = keys.split_last().expect("split yields at least one item");
    let mut cur = table;
    for k in parents {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("--set {path}: `{k}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// `%.12g`-style formatting, locale independent.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..12).contains(&exp) {
        trim_zeros(format!("{:.*}", (11 - exp) as usize, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mant.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// JSON body of `fgmq analyze`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzeReport {
    pub family: FamilyName,
    pub n: Option<u32>,
    pub lambda: f64,
    pub theta: f64,
    pub rho: f64,
    pub load: f64,
    /// `[re, im]` of the single right-half-plane root; absent for Erlang arrivals.
    pub tau1: Option<[f64; 2]>,
    pub roots: Vec<[f64; 2]>,
    pub root_multiplicities: Vec<usize>,
    pub verified_root_count: i64,
    pub boundary: Boundary,
    pub mean_wait: f64,
    pub mean_max_overlap: f64,
    pub mean_min_overlap: f64,
    pub mean_positive_part: f64,
    pub prob_s_gt_a: f64,
    pub mean_formula: Option<MeanFormulaDiagnostic>,
    pub splus_variant: Option<String>,
    pub diagnostics: SolverDiagnostics,
}

fn family_name(model: &QueueModel) -> (FamilyName, Option<u32>) {
    match model.family {
        Family::Mg1 => (FamilyName::Mg1, None),
        Family::Erlang { n } => (FamilyName::Erlang, Some(n)),
        Family::Proportional { .. } => (FamilyName::Proportional, None),
    }
}

fn analyze_full(model: &QueueModel) -> Result<(Analysis, Option<String>)> {
    match model.family {
        Family::Erlang { .. } => {
            let (a, res) = erlang::analyze_with(model, ErlangOptions::default())?;
            Ok((a, Some(res.selected.to_string())))
        }
        _ => Ok((solver::analyze(model)?, None)),
    }
}

pub fn analyze_report(model: &QueueModel) -> Result<AnalyzeReport> {
    let (a, variant) = analyze_full(model)?;
    let (family, n) = family_name(model);
    let mean_formula = match model.family {
        Family::Mg1 => Some(mg1::mean_max_formula_diagnostic(model)?),
        _ => None,
    };
    let w = &a.waiting;
    Ok(AnalyzeReport {
        family,
        n,
        lambda: model.lambda,
        theta: model.theta.value(),
        rho: model.rho(),
        load: model.load(),
        tau1: w.tau1().map(|z| [z.re, z.im]),
        roots: w.roots.roots.iter().map(|z| [z.re, z.im]).collect(),
        root_multiplicities: w.roots.multiplicities.clone(),
        verified_root_count: w.roots.verified_count,
        boundary: w.boundary.clone(),
        mean_wait: a.waiting_law.mean,
        mean_max_overlap: a.max_overlap.mean,
        mean_min_overlap: a.min_overlap.mean,
        mean_positive_part: a.splus.mean,
        prob_s_gt_a: a.prob_s_gt_a,
        mean_formula,
        splus_variant: variant,
        diagnostics: w.diagnostics.clone(),
    })
}

/// Text produced by a command and the process exit code it implies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub text: String,
    pub exit_code: i32,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Self { text, exit_code: 0 }
    }
}

pub fn execute(action: Action, cfg: &RunConfig, exec: Execution) -> Result<Outcome> {
    let model = cfg.model.build()?;
    match action {
        Action::Analyze => {
            let report = analyze_report(&model)?;
            let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
            text.push('\n');
            Ok(Outcome::ok(text))
        }
        Action::Simulate => simulate(&model, cfg, exec).map(Outcome::ok),
        Action::Compare => compare(&model, cfg, exec),
        Action::Sweep => sweep(&model, cfg, exec).map(Outcome::ok),
        Action::Invert => invert(&model, cfg, exec).map(Outcome::ok),
    }
}

fn provenance(r: &sim::SimResult, customers: u64) -> String {
    format!(
        "# seed={},replications={},customers={},warmup={},streams=0-{}\n",
        r.seed,
        r.streams.len(),
        customers,
        r.warmup,
        r.streams.len().saturating_sub(1)
    )
}

fn simulate(model: &QueueModel, cfg: &RunConfig, exec: Execution) -> Result<String> {
    let sc = cfg.sim()?;
    let r = sim::run(model, sc, exec)?;
    let mut out = provenance(&r, sc.customers);
    if r.diverged {
        out.push_str("# diverged=true\n");
    }
    out.push_str("statistic,sim_mean,sim_se,count\n");
    for (name, m) in [
        ("mean_wait", r.wait),
        ("mean_max_overlap", r.max_overlap),
        ("mean_min_overlap", r.min_overlap),
        ("prob_s_gt_a", r.prob_s_gt_a),
    ] {
        writeln!(out, "{name},{},{},{}", fmt_num(m.mean), fmt_num(m.se), m.count).unwrap();
    }
    Ok(out)
}

/// One row of the `compare` table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub statistic: &'static str,
    pub analytic: f64,
    pub sim_mean: f64,
    pub sim_se: f64,
    pub z_score: f64,
}

pub fn compare_rows(
    model: &QueueModel,
    sc: &SimConfig,
    perturb: &BTreeMap<String, f64>,
    exec: Execution,
) -> Result<(Vec<CompareRow>, sim::SimResult)> {
    const NAMES: [&str; 4] = ["mean_wait", "mean_max_overlap", "mean_min_overlap", "prob_s_gt_a"];
    if let Some(bad) = perturb.keys().find(|k| !NAMES.contains(&k.as_str())) {
        return Err(Error::Config(format!("compare.perturb: unknown statistic `{bad}`")));
    }
    let a = solver::analyze(model)?;
    let r = sim::run(model, sc, exec)?;
    let analytic = [a.waiting_law.mean, a.max_overlap.mean, a.min_overlap.mean, a.prob_s_gt_a];
    let simulated = [r.wait, r.max_overlap, r.min_overlap, r.prob_s_gt_a];
    let rows = NAMES
        .iter()
        .zip(analytic)
        .zip(simulated)
        .map(|((&name, an), s)| {
            let an = an + perturb.get(name).copied().unwrap_or(0.0);
            CompareRow {
                statistic: name,
                analytic: an,
                sim_mean: s.mean,
                sim_se: s.se,
                z_score: (s.mean - an) / s.se,
            }
        })
        .collect();
    Ok((rows, r))
}

fn compare(model: &QueueModel, cfg: &RunConfig, exec: Execution) -> Result<Outcome> {
    let sc = cfg.sim()?;
    let perturb = cfg.compare.clone().unwrap_or_default().perturb;
    let (rows, r) = compare_rows(model, sc, &perturb, exec)?;
    let mut text = provenance(&r, sc.customers);
    text.push_str("statistic,analytic,sim_mean,sim_se,z_score\n");
    let mut failed = r.diverged;
    for row in &rows {
        writeln!(
            text,
            "{},{},{},{},{}",
            row.statistic,
            fmt_num(row.analytic),
            fmt_num(row.sim_mean),
            fmt_num(row.sim_se),
            fmt_num(row.z_score)
        )
        .unwrap();
        if !(row.z_score.abs() <= COMPARE_FAIL_Z) {
            log::error!("{}: |z| = {:.2} exceeds {COMPARE_FAIL_Z}", row.statistic, row.z_score.abs());
            failed = true;
        }
    }
    Ok(Outcome {
        text,
        exit_code: if failed { EXIT_COMPARISON } else { 0 },
    })
}

/// One row of the `sweep` table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub theta: f64,
    pub rho: f64,
    pub mean_wait: f64,
    pub mean_max_overlap: f64,
    pub mean_min_overlap: f64,
    /// Real part of the right-half-plane root; `None` for Erlang arrivals.
    pub tau1: Option<f64>,
}

pub fn sweep_rows(model: &QueueModel, sw: &SweepConfig, exec: Execution) -> Result<Vec<SweepRow>> {
    let thetas = sw.thetas()?;
    let bases = match &sw.rho {
        Some(list) => list
            .iter()
            .map(|&r| model.with_rho(r).context(format!("sweep rho = {r}")))
            .collect::<Result<Vec<_>>>()?,
        None => vec![model.clone()],
    };
    let mut rows = Vec::with_capacity(bases.len() * thetas.len());
    for base in &bases {
        let batch = map_slice(exec, &thetas, |&th| -> Result<SweepRow> {
            let m = base.with_theta(Theta::new(th)?);
            let a = solver::analyze(&m).context(format!("sweep theta = {th}, rho = {}", m.rho()))?;
            Ok(SweepRow {
                theta: th,
                rho: m.rho(),
                mean_wait: a.waiting_law.mean,
                mean_max_overlap: a.max_overlap.mean,
                mean_min_overlap: a.min_overlap.mean,
                tau1: a.waiting.tau1().map(|z| z.re),
            })
        });
        for row in batch {
            rows.push(row?);
        }
    }
    Ok(rows)
}

fn sweep(model: &QueueModel, cfg: &RunConfig, exec: Execution) -> Result<String> {
    let sw = cfg.sweep.clone().unwrap_or_default();
    let rows = sweep_rows(model, &sw, exec)?;
    let mut out = String::from("theta,rho,mean_wait,mean_max_overlap,mean_min_overlap,tau1\n");
    for r in &rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_num(r.theta),
            fmt_num(r.rho),
            fmt_num(r.mean_wait),
            fmt_num(r.mean_max_overlap),
            fmt_num(r.mean_min_overlap),
            fmt_opt(r.tau1)
        )
        .unwrap();
    }
    Ok(out)
}

/// Analytic (and, with a `[sim]` block, empirical) distribution functions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvertTable {
    pub t: Vec<f64>,
    pub wait: Vec<f64>,
    pub max_overlap: Vec<f64>,
    pub min_overlap: Vec<f64>,
    pub empirical: Option<sim::EmpiricalCdfs>,
    pub seed: Option<u64>,
}

pub fn invert_table(
    model: &QueueModel,
    inv: &InvertConfig,
    sim_cfg: Option<&SimConfig>,
    exec: Execution,
) -> Result<InvertTable> {
    let a = solver::analyze(model)?;
    let grid = match &inv.t {
        Some(t) => t.clone(),
        None => {
            let t_max = inv.t_max.unwrap_or(DEFAULT_INVERT_SPAN * a.max_overlap.mean);
            let points = inv.points.unwrap_or(DEFAULT_INVERT_POINTS).max(2);
            if !(t_max > 0.0 && t_max.is_finite()) {
                return Err(Error::Config(format!("invert.t_max must be positive, got {t_max}")));
            }
            (0..points).map(|i| t_max * i as f64 / (points - 1) as f64).collect()
        }
    };
    let scale = model.scale();
    let cdf = |law: &solver::OverlapLaw| invert_cdf(&*law.evaluator(), &grid, scale, exec).map(|g| g.f);
    let wait = cdf(&a.waiting_law).context("inverting the waiting time")?;
    let max_overlap = cdf(&a.max_overlap).context("inverting the maximum overlap")?;
    let min_overlap = cdf(&a.min_overlap).context("inverting the minimum overlap")?;
    let (empirical, seed) = match sim_cfg {
        Some(sc) => {
            let mut sc = sc.clone();
            sc.cdf_grid = Some(grid.clone());
            let r = sim::run(model, &sc, exec)?;
            (r.cdf, Some(sc.seed))
        }
        None => (None, None),
    };
    Ok(InvertTable {
        t: grid,
        wait,
        max_overlap,
        min_overlap,
        empirical,
        seed,
    })
}

fn invert(model: &QueueModel, cfg: &RunConfig, exec: Execution) -> Result<String> {
    let inv = cfg.invert.clone().unwrap_or_default();
    let table = invert_table(model, &inv, cfg.sim.as_ref(), exec)?;
    let mut out = String::new();
    if let Some(seed) = table.seed {
        writeln!(out, "# seed={seed}").unwrap();
    }
    out.push_str("t,F_wait,F_max,F_min");
    if table.empirical.is_some() {
        out.push_str(",F_wait_empirical,F_max_empirical,F_min_empirical");
    }
    out.push('\n');
    for i in 0..table.t.len() {
        write!(
            out,
            "{},{},{},{}",
            fmt_num(table.t[i]),
            fmt_num(table.wait[i]),
            fmt_num(table.max_overlap[i]),
            fmt_num(table.min_overlap[i])
        )
        .unwrap();
        if let Some(e) = &table.empirical {
            write!(
                out,
                ",{},{},{}",
                fmt_num(e.wait[i]),
                fmt_num(e.max_overlap[i]),
                fmt_num(e.min_overlap[i])
            )
            .unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

#[derive(Debug, Parser)]
#[command(name = "fgmq", version, about = "Waiting and overlap times in FGM-dependent single-server queues")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Override a config value, e.g. `--set model.theta=0.5` (repeatable).
    #[arg(long = "set", value_name = "PATH=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Worker threads for the parallel sections.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// TOML experiment file.
    pub config: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analytic means, roots and boundary values as JSON.
    Analyze(ConfigArg),
    /// Monte Carlo means with standard errors.
    Simulate(ConfigArg),
    /// Analytic vs simulated means; exits 4 when any |z| > 4.
    Compare(ConfigArg),
    /// Analytic means over a theta grid.
    Sweep(ConfigArg),
    /// Distribution functions by transform inversion.
    Invert(ConfigArg),
    /// Runs the `action` named in the config file.
    Run(ConfigArg),
}

/// Entry point behind the binary; returns the process exit code.
pub fn run_cli(cli: Cli) -> i32 {
    let (action, path) = match &cli.command {
        Command::Analyze(c) => (Some(Action::Analyze), &c.config),
        Command::Simulate(c) => (Some(Action::Simulate), &c.config),
        Command::Compare(c) => (Some(Action::Compare), &c.config),
        Command::Sweep(c) => (Some(Action::Sweep), &c.config),
        Command::Invert(c) => (Some(Action::Invert), &c.config),
        Command::Run(c) => (None, &c.config),
    };
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let result = load_config_file(path, &cli.overrides).and_then(|cfg| {
        let action = action
            .or(cfg.action)
            .ok_or_else(|| Error::Config("`run` needs an `action` key in the config".into()))?;
        let outcome = match cli.threads {
            Some(t) => with_threads(t, || execute(action, &cfg, exec)),
            None => execute(action, &cfg, exec),
        }?;
        if let Some(p) = cfg.output.as_ref().and_then(|o| o.path.as_ref()) {
            std::fs::write(p, &outcome.text)
                .map_err(|e| Error::Config(format!("cannot write {}: {e}", p.display())))?;
        }
        Ok(outcome)
    });
    match result {
        Ok(outcome) => {
            print!("{}", outcome.text);
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
