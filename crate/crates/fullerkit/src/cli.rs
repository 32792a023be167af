//! Command-line front end. Every subcommand writes one RunReport as JSON and,
//! with `--csv-dir`, plot-ready CSV views of the same data.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use fullerkit_core::continuation::{self, OrbitBranch, SkyMode};
use fullerkit_core::correspondence;
use fullerkit_core::flow;
use fullerkit_core::geometry::VectorFieldFamily;
use fullerkit_core::index::{self, CapProvider, IndexReport};
use fullerkit_core::orbits::{OrbitSet, PeriodicOrbit};
use fullerkit_core::reeb;
use fullerkit_core::scenarios::{self, Scenario};
use fullerkit_core::{Config, Error};

use crate::parallel;
use crate::report::{self, CsvTable, Meta, RunReport, Stage, Timings};
use crate::scenario_io::{self, LoadError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("{0}")]
    Domain(#[from] Error),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Load(_) => EXIT_USAGE,
            CliError::Domain(_) | CliError::Io(_) => EXIT_DOMAIN,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "fullerkit", version, about = "Fuller indices, orbit continuation and sky-catastrophe detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Omit timings and run metadata so identical runs give identical bytes.
    #[arg(long, global = true)]
    pub no_meta: bool,
    /// JSON file overriding any part of the numeric configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Single overrides such as `newton.max_iter=80`, applied after --config.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Worker threads (default: FULLERKIT_THREADS, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Directory for CSV views of the results.
    #[arg(long, global = true)]
    pub csv_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ScenarioArgs {
    /// Built-in id or path to a scenario JSON file.
    #[arg(long)]
    pub scenario: String,
    /// Override the number of seeds in the scenario.
    #[arg(long)]
    pub seeds: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct SampleArgs {
    /// Homotopy parameter.
    #[arg(long, default_value_t = 0.0)]
    pub t: f64,
    /// Period cap (default: the scenario's sampling cap, else its first level).
    #[arg(long)]
    pub cap: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Partial,
    Full,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample the orbit set S(X_t, cap).
    FindOrbits {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        sample: SampleArgs,
        /// Dump the dense trajectory of this orbit id as CSV.
        #[arg(long)]
        dense: Option<usize>,
    },
    /// Fixed-point (and, for Reeb fields, Conley-Zehnder) indices and the local Fuller sum.
    Index {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        sample: SampleArgs,
    },
    /// Finite or infinite type from capped Fuller sums.
    ClassifyType {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Increasing caps (default: the scenario's cap levels).
        #[arg(long, value_delimiter = ',')]
        caps: Vec<f64>,
        /// Homotopy parameter.
        #[arg(long, default_value_t = 0.0)]
        t: f64,
    },
    /// Continue one orbit across the homotopy.
    Continue {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        sample: SampleArgs,
        /// Index into the sampled orbit set.
        #[arg(long, default_value_t = 0)]
        orbit_id: usize,
        /// Parameter value to continue towards.
        #[arg(long, default_value_t = 1.0)]
        t_target: f64,
        /// Period cap for continuation (default: the scenario's, else pmax_factor times the cap).
        #[arg(long)]
        pmax: Option<f64>,
    },
    /// Continue every sampled orbit and decide admissibility.
    DetectSky {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Period cap for continuation (default: the scenario's, else pmax_factor times the sampling cap).
        #[arg(long)]
        pmax: Option<f64>,
        /// Cap for the orbit sets seeding the continuation.
        #[arg(long)]
        sample_cap: Option<f64>,
        /// Sample at t = 0 only (partial) or at both ends (full).
        #[arg(long, value_enum, default_value_t = ModeArg::Full)]
        mode: ModeArg,
    },
    /// Lift an orbit to the cyclic k-fold configuration space and compare indices.
    Correspond {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        sample: SampleArgs,
        /// Prime number of tuple points.
        #[arg(long, default_value_t = 3)]
        k: u32,
        /// Index into the sampled orbit set.
        #[arg(long, default_value_t = 0)]
        orbit_id: usize,
    },
    /// Build the Morse-Bott perturbation system of a perturbation scenario.
    BuildPsys {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Number of levels (default: the scenario's).
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Check the exp(L K) period-growth bound along a Reeb branch.
    ReebBound {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Branch JSON: an OrbitBranch or the report of `continue`.
        #[arg(long)]
        branch_file: Option<PathBuf>,
        /// Use this K instead of estimating it.
        #[arg(long, allow_negative_numbers = true)]
        k_override: Option<f64>,
    },
    /// List the built-in scenarios.
    ListScenarios,
    /// Parse, validate and self-check a scenario file or built-in id.
    ValidateScenario {
        /// Path or built-in id.
        path: String,
    },
}

struct Outcome {
    scenario: Option<String>,
    results: Value,
    warnings: Vec<String>,
    tables: Vec<CsvTable>,
    stages: Vec<Stage>,
}

struct Ctx {
    cfg: Config,
    started: Instant,
    stages: Vec<Stage>,
}

impl Ctx {
    fn stage(&mut self, name: &str, since: Instant) {
        self.stages.push(Stage { name: name.into(), ms: since.elapsed().as_secs_f64() * 1e3 });
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialise")
}

/// Applies a dotted `key=value` override to a JSON image of the config.
fn apply_override(root: &mut Value, arg: &str) -> Result<(), CliError> {
    let (key, raw) = arg.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got '{arg}'")))?;
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.into()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, p) in parts.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| CliError::Usage(format!("unknown config key '{key}'")))?;
        if !obj.contains_key(*p) {
            return Err(CliError::Usage(format!("unknown config key '{key}'")));
        }
        if i + 1 == parts.len() {
            obj.insert(p.to_string(), value);
            return Ok(());
        }
        node = obj.get_mut(*p).expect("checked");
    }
    Ok(())
}

pub fn load_config(path: Option<&PathBuf>, sets: &[String]) -> Result<Config, CliError> {
    let base = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str::<Config>(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", p.display())))?
        }
        None => Config::default(),
    };
    if sets.is_empty() {
        return Ok(base);
    }
    let mut v = to_value(&base);
    for s in sets {
        apply_override(&mut v, s)?;
    }
    serde_json::from_value(v).map_err(|e| CliError::Usage(format!("bad config override: {e}")))
}

fn threads(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(n) = flag {
        return if n > 0 { Ok(n) } else { Err(CliError::Usage("--threads must be positive".into())) };
    }
    match std::env::var("FULLERKIT_THREADS") {
        Ok(s) => s
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| CliError::Usage(format!("FULLERKIT_THREADS must be a positive integer, got '{s}'"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn load(args: &ScenarioArgs) -> Result<Scenario, CliError> {
    let mut s = scenario_io::load_scenario(&args.scenario)?;
    if let Some(n) = args.seeds {
        if n == 0 {
            return Err(CliError::Usage("--seeds must be positive".into()));
        }
        s.seeds = n;
    }
    Ok(s)
}

fn default_cap(s: &Scenario, sample: &SampleArgs) -> Result<f64, CliError> {
    sample
        .cap
        .or(s.caps.sample)
        .or_else(|| s.caps.levels.first().copied())
        .ok_or_else(|| CliError::Usage("no period cap: pass --cap".into()))
}

fn pick(set: &OrbitSet, id: usize) -> Result<PeriodicOrbit, CliError> {
    set.orbits
        .get(id)
        .cloned()
        .ok_or_else(|| CliError::Usage(format!("orbit id {id} out of range: {} orbits found", set.orbits.len())))
}

fn sample_set(ctx: &mut Ctx, fam: &dyn VectorFieldFamily, s: &Scenario, t: f64, cap: f64) -> Result<OrbitSet, CliError> {
    let t0 = Instant::now();
    let set = parallel::sample(fam, t, cap, &s.seed_net(), &ctx.cfg)?;
    ctx.stage("sample", t0);
    Ok(set)
}

fn sampling_warnings(set: &OrbitSet) -> Vec<String> {
    let mut w = Vec::new();
    if set.morse_bott_suspect {
        w.push("degenerate orbits found: the orbit set is likely a Morse-Bott family".to_string());
    }
    if set.orbits.is_empty() {
        w.push(format!("no orbits with period below {}", set.period_cap));
    }
    w
}

/// Fields for classification of a plain scenario: the same field at every cap.
struct SingleField<'a> {
    scenario: &'a Scenario,
    t: f64,
}

impl CapProvider for SingleField<'_> {
    fn field_for_cap(&self, _cap: f64) -> fullerkit_core::Result<Box<dyn VectorFieldFamily>> {
        Ok(self.scenario.field())
    }
    fn param_t(&self) -> f64 {
        self.t
    }
}

fn build_psys(ctx: &mut Ctx, s: &Scenario, levels: Option<usize>) -> Result<reeb::PerturbationSystem, CliError> {
    let p = s
        .perturbation
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("scenario {} has no perturbation block", s.id)))?;
    let n = levels.unwrap_or(p.levels);
    if n == 0 {
        return Err(CliError::Usage("--levels must be positive".into()));
    }
    let seeds = s.seed_net();
    let cfg = ctx.cfg.clone();
    let sampler = |f: &dyn VectorFieldFamily, t: f64, cap: f64| parallel::sample(f, t, cap, &seeds, &cfg);
    let t0 = Instant::now();
    let sys = reeb::build_perturbation_system(n, p.morse, &vec![p.mu0; n], &sampler, &ctx.cfg)?;
    ctx.stage("perturbation-system", t0);
    Ok(sys)
}

fn dispatch(ctx: &mut Ctx, cmd: &Command) -> Result<Outcome, CliError> {
    let mut warnings = Vec::new();
    let mut tables = Vec::new();
    let (scenario, results) = match cmd {
        Command::FindOrbits { scenario, sample, dense } => {
            let s = load(scenario)?;
            let fam = s.field();
            let cap = default_cap(&s, sample)?;
            let set = sample_set(ctx, fam.as_ref(), &s, sample.t, cap)?;
            warnings.extend(sampling_warnings(&set));
            tables.push(report::orbit_table(&set));
            if let Some(id) = dense {
                let o = pick(&set, *id)?;
                let r = flow::flow_map_opts(fam.as_ref(), &o.base, o.period, o.param_t, &ctx.cfg, true)?;
                tables.push(report::trajectory_table(&format!("trajectory_{id}"), &r.trajectory.unwrap_or_default()));
            }
            (Some(s.id), to_value(&set))
        }
        Command::Index { scenario, sample } => {
            let s = load(scenario)?;
            let fam = s.field();
            let cap = default_cap(&s, sample)?;
            let set = sample_set(ctx, fam.as_ref(), &s, sample.t, cap)?;
            warnings.extend(sampling_warnings(&set));
            let t0 = Instant::now();
            let mut reports = parallel::index_reports(fam.as_ref(), &set, &ctx.cfg)?;
            if let Some(c) = s.contact_form() {
                for r in reports.iter_mut() {
                    match index::conley_zehnder(&r.orbit, fam.as_ref(), &c, &ctx.cfg) {
                        Ok(cz) => {
                            r.cz_index = cz.integer();
                            if cz.degenerate {
                                warnings.push(format!("orbit of period {} has a degenerate CZ path", r.orbit.period));
                            }
                        }
                        Err(e) => warnings.push(format!("no CZ index for period {}: {e}", r.orbit.period)),
                    }
                }
            }
            ctx.stage("index", t0);
            let fuller = index::fuller_index_local(&set, &reports)?;
            (Some(s.id), json!({ "orbit_set": set, "reports": reports, "fuller": fuller }))
        }
        Command::ClassifyType { scenario, caps, t } => {
            let s = load(scenario)?;
            let caps = if caps.is_empty() { s.caps.levels.clone() } else { caps.clone() };
            if caps.is_empty() {
                return Err(CliError::Usage("no caps: pass --caps".into()));
            }
            let seeds = s.seed_net();
            let cfg = ctx.cfg.clone();
            let sampler = |f: &dyn VectorFieldFamily, t: f64, cap: f64| parallel::sample(f, t, cap, &seeds, &cfg);
            let (value, reports): (_, Vec<Vec<IndexReport>>) = if s.perturbation.is_some() {
                let sys = build_psys(ctx, &s, None)?;
                let t0 = Instant::now();
                let r = index::classify_definite_type(&sys, &caps, &sampler, &ctx.cfg)?;
                ctx.stage("classify", t0);
                r
            } else {
                let t0 = Instant::now();
                let r = index::classify_definite_type(&SingleField { scenario: &s, t: *t }, &caps, &sampler, &ctx.cfg)?;
                ctx.stage("classify", t0);
                r
            };
            (Some(s.id), json!({ "value": value, "reports": reports }))
        }
        Command::Continue { scenario, sample, orbit_id, t_target, pmax } => {
            let s = load(scenario)?;
            let fam = s.field();
            let cap = default_cap(&s, sample)?;
            let pmax = pmax.or(s.caps.pmax).unwrap_or(ctx.cfg.continuation.pmax_factor * cap);
            let set = sample_set(ctx, fam.as_ref(), &s, sample.t, cap)?;
            let start = pick(&set, *orbit_id)?;
            let t0 = Instant::now();
            let branch = continuation::continue_branch(fam.as_ref(), &start, *t_target, pmax, &ctx.cfg)?;
            ctx.stage("continue", t0);
            tables.push(report::branch_table(&format!("branch_{orbit_id}"), &branch));
            (Some(s.id), json!({ "source_orbit_id": orbit_id, "period_cap": pmax, "branch": branch }))
        }
        Command::DetectSky { scenario, pmax, sample_cap, mode } => {
            let s = load(scenario)?;
            let fam = s.field();
            let sample_cap = sample_cap
                .or(s.caps.sample)
                .or_else(|| s.caps.levels.first().copied())
                .unwrap_or(ctx.cfg.continuation.sample_cap);
            let pmax = pmax.or(s.caps.pmax).unwrap_or(ctx.cfg.continuation.pmax_factor * sample_cap);
            let mode = match mode {
                ModeArg::Partial => SkyMode::Partial,
                ModeArg::Full => SkyMode::Full,
            };
            let t0 = Instant::now();
            let rep = parallel::detect_sky(fam.as_ref(), &s.seed_net(), pmax, sample_cap, mode, &ctx.cfg)?;
            ctx.stage("detect-sky", t0);
            for (i, b) in rep.branches.iter().enumerate() {
                tables.push(report::branch_table(&format!("branch_{i}"), b));
            }
            if !rep.branching_components.is_empty() {
                warnings.push(format!("components {:?} branch on a t-slice", rep.branching_components));
            }
            (Some(s.id), to_value(&rep))
        }
        Command::Correspond { scenario, sample, k, orbit_id } => {
            let s = load(scenario)?;
            let fam = s.field();
            let cap = default_cap(&s, sample)?;
            let set = sample_set(ctx, fam.as_ref(), &s, sample.t, cap)?;
            let orbit = pick(&set, *orbit_id)?;
            let t0 = Instant::now();
            let lifted = correspondence::fuller_map(fam.as_ref(), &orbit, *k, &ctx.cfg)?;
            let check = correspondence::verify_correspondence(fam.as_ref(), &orbit, *k, &ctx.cfg)?;
            ctx.stage("correspond", t0);
            (Some(s.id), json!({ "source_orbit_id": orbit_id, "lifted": lifted, "report": check }))
        }
        Command::BuildPsys { scenario, levels } => {
            let s = load(scenario)?;
            let sys = build_psys(ctx, &s, *levels)?;
            (Some(s.id), to_value(&sys))
        }
        Command::ReebBound { scenario, branch_file, k_override } => {
            let s = load(scenario)?;
            let contact = s
                .contact
                .clone()
                .ok_or_else(|| CliError::Usage(format!("scenario {} has no contact form family", s.id)))?;
            let fam = s.field();
            let branch = match branch_file {
                Some(p) => read_branch(p)?,
                None => {
                    let cap = default_cap(&s, &SampleArgs { t: 0.0, cap: None })?;
                    let set = sample_set(ctx, fam.as_ref(), &s, 0.0, cap)?;
                    let start = pick(&set, 0)?;
                    let pmax = s.caps.pmax.unwrap_or(ctx.cfg.continuation.pmax_factor * cap);
                    let t0 = Instant::now();
                    let b = continuation::continue_branch(fam.as_ref(), &start, 1.0, pmax, &ctx.cfg)?;
                    ctx.stage("continue", t0);
                    b
                }
            };
            let rep = reeb::growth_bound_check_with_k(&branch, fam.as_ref(), &contact, *k_override, &ctx.cfg)?;
            if !rep.pass {
                warnings.push("measured period growth exceeds exp(L K)".into());
            }
            (Some(s.id), to_value(&rep))
        }
        Command::ListScenarios => {
            let list: Vec<Value> = scenarios::BUILTIN_IDS
                .iter()
                .map(|id| {
                    let s = scenarios::builtin(id).expect("listed ids exist");
                    json!({ "id": s.id, "manifold": s.manifold.name(), "description": s.description })
                })
                .collect();
            (None, Value::Array(list))
        }
        Command::ValidateScenario { path } => {
            let s = scenario_io::load_scenario(path)?;
            let t0 = Instant::now();
            let min_norm = scenarios::self_check(&s, 2000, &ctx.cfg)?;
            ctx.stage("self-check", t0);
            (Some(s.id.clone()), json!({ "id": s.id, "valid": true, "min_field_norm": min_norm }))
        }
    };
    Ok(Outcome { scenario, results, warnings, tables, stages: std::mem::take(&mut ctx.stages) })
}

fn read_branch(p: &PathBuf) -> Result<OrbitBranch, CliError> {
    let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad branch file: {e}")))?;
    let inner = v.get("results").and_then(|r| r.get("branch")).cloned().unwrap_or(v);
    serde_json::from_value(inner).map_err(|e| CliError::Usage(format!("bad branch file: {e}")))
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::FindOrbits { .. } => "find-orbits",
        Command::Index { .. } => "index",
        Command::ClassifyType { .. } => "classify-type",
        Command::Continue { .. } => "continue",
        Command::DetectSky { .. } => "detect-sky",
        Command::Correspond { .. } => "correspond",
        Command::BuildPsys { .. } => "build-psys",
        Command::ReebBound { .. } => "reeb-bound",
        Command::ListScenarios => "list-scenarios",
        Command::ValidateScenario { .. } => "validate-scenario",
    }
}

fn execute(cli: &Cli) -> Result<RunReport, CliError> {
    let cfg = load_config(cli.config.as_ref(), &cli.set)?;
    let n_threads = threads(cli.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n_threads)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {n_threads} threads: {e}")))?;
    let mut ctx = Ctx { cfg, started: Instant::now(), stages: Vec::new() };
    let outcome = pool.install(|| dispatch(&mut ctx, &cli.command))?;
    if let Some(dir) = &cli.csv_dir {
        for t in &outcome.tables {
            t.write(dir)?;
        }
    }
    let (timings, meta) = if cli.no_meta {
        (None, None)
    } else {
        let unix_time = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        (
            Some(Timings { total_ms: ctx.started.elapsed().as_secs_f64() * 1e3, stages: outcome.stages }),
            Some(Meta { version: env!("CARGO_PKG_VERSION").into(), unix_time, threads: n_threads }),
        )
    };
    Ok(RunReport {
        command: command_name(&cli.command).into(),
        scenario: outcome.scenario,
        config: ctx.cfg,
        results: outcome.results,
        warnings: outcome.warnings,
        timings,
        meta,
    })
}

/// Parses arguments, runs the command and writes the report. Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(rep) => {
            let text = rep.to_json();
            let written = match &cli.out {
                Some(p) => std::fs::write(p, text),
                None => {
                    use std::io::Write;
                    std::io::stdout().write_all(text.as_bytes())
                }
            };
            match written {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    eprintln!("error: cannot write report: {e}");
                    EXIT_DOMAIN
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
