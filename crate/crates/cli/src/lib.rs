//! Scenario runner behind the `fdosc` binary: loads a TOML scenario, runs
//! an integration or a criterion check and writes JSON/CSV outputs.
//!
//! Every JSON output embeds the resolved scenario and is a pure function of
//! it (and the seed), so repeated runs are byte-identical.

pub mod config;
pub mod presets;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use fdosc_core::criteria::{
    check_interval_osc_thm22, check_nonoscillation_cor31, check_nonoscillation_thm31, check_oscillation_cor32,
    check_oscillation_thm32, default_histories, find_zero_free, random_histories, wong_test, CriteriaError, CriterionReport,
    CrossCheck, IntervalOscInstance, IntervalOscOptions, IntervalStrategy, NonoscOptions, NonoscWitness, OscOptions,
    TrialFamily, WongInstance, WongOptions,
};
use fdosc_core::expr::PiecewiseFn;
use fdosc_core::integrator::{solve_cauchy, EquationSpec, HistorySpec, SolveError, SolveOptions, Trajectory, ZeroReport};
use fdosc_core::OscillationVerdict;

pub use config::ScenarioConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("output error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) | CliError::Io(_) => 3,
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<CriteriaError> for CliError {
    fn from(e: CriteriaError) -> Self {
        match e {
            CriteriaError::ShapeMismatch { .. }
            | CriteriaError::InvalidWindow { .. }
            | CriteriaError::InvalidPartition(_)
            | CriteriaError::InvalidEpsilon(_)
            | CriteriaError::DegenerateInterval { .. } => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Integrate,
    Check { criterion: Option<String> },
    IntervalOsc,
    Wong,
    Reproduce { id: String },
}

/// Command-line settings that take precedence over the scenario file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub horizon: Option<f64>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub verdict: Option<OscillationVerdict>,
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize)]
struct Bundle<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a ScenarioConfig,
    #[serde(flatten)]
    body: T,
}

#[derive(Serialize)]
struct ReportBody<'a> {
    report: &'a CriterionReport,
}

#[derive(Serialize)]
struct ReportsBody<'a> {
    reports: &'a [CriterionReport],
}

#[derive(Serialize)]
struct ZerosBody<'a> {
    t1: f64,
    zeros: &'a ZeroReport,
    max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroFreeRecord {
    pub found: bool,
    pub horizon: f64,
    pub tried: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_abs_phi: Option<f64>,
}

#[derive(Serialize)]
struct NonoscBundle<'a> {
    report: &'a CriterionReport,
    zero_free: &'a ZeroFreeRecord,
}

#[derive(Serialize)]
struct OscBundle<'a> {
    report: &'a CriterionReport,
    interval_reports: &'a [CriterionReport],
}

/// Apply command-line overrides. `--horizon` also moves the window end.
pub fn apply_overrides(cfg: &mut ScenarioConfig, o: &Overrides) {
    if let Some(h) = o.horizon {
        cfg.analysis.horizon = Some(h.into());
        if let Some(w) = &mut cfg.analysis.window {
            w[1] = h.into();
        }
        if let Some(cc) = &mut cfg.analysis.cross_check {
            cc.horizon = Some(h.into());
        }
    }
    if let Some(t) = o.tol {
        cfg.analysis.tol = t;
    }
    if let Some(s) = o.seed {
        cfg.analysis.seed = s;
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let src = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    ScenarioConfig::from_toml(&src)
}

fn write(path: &Path, bytes: &[u8], files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    files.push(path.to_path_buf());
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    write(path, s.as_bytes(), files)
}

fn write_csv(path: &Path, traj: &Trajectory, files: &mut Vec<PathBuf>) -> Result<(), CliError> {
    let mut buf = Vec::new();
    traj.write_csv(&mut buf).map_err(|e| CliError::Io(e.to_string()))?;
    write(path, &buf, files)
}

fn solve_options(cfg: &ScenarioConfig) -> SolveOptions {
    SolveOptions::with_tol(cfg.analysis.tol)
}

pub fn verdict_text(v: &OscillationVerdict) -> String {
    match v {
        OscillationVerdict::CertifiedOscillatory => "certified oscillatory".into(),
        OscillationVerdict::CertifiedNonoscillatory => "certified nonoscillatory".into(),
        OscillationVerdict::CertifiedOscillatoryOn { a, b } => format!("certified oscillatory on [{a:.6}, {b:.6}]"),
        OscillationVerdict::NumericOscillatory { horizon } => format!("numerically oscillatory up to {horizon}"),
        OscillationVerdict::NumericNonoscillatory { horizon } => format!("numerically nonoscillatory up to {horizon}"),
        OscillationVerdict::Inconclusive => "inconclusive".into(),
    }
}

/// One-line verdict description for the terminal.
pub fn describe(rep: &CriterionReport) -> String {
    let failed: Vec<String> = rep
        .hypotheses
        .iter()
        .filter(|h| !h.verified())
        .map(|h| format!("{} {}", h.id, serde_json::to_value(h.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()))
        .collect();
    let mut s = format!("{}: {}", rep.criterion, verdict_text(&rep.verdict));
    if !failed.is_empty() {
        s.push_str(&format!(" ({})", failed.join(", ")));
    }
    s
}

pub fn run(cmd: &Command, cfg: &ScenarioConfig, out_dir: &Path) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let mut out = Outcome { verdict: None, files: Vec::new(), summary: Vec::new() };
    match cmd {
        Command::Integrate => integrate(cfg, out_dir, &mut out)?,
        Command::Check { criterion } => {
            let id = criterion
                .clone()
                .or_else(|| cfg.analysis.criterion.clone())
                .ok_or_else(|| CliError::Config("no criterion given; use --criterion or analysis.criterion".into()))?;
            check(&id, cfg, out_dir, &mut out)?;
        }
        Command::IntervalOsc => check("thm22", cfg, out_dir, &mut out)?,
        Command::Wong => check("wong", cfg, out_dir, &mut out)?,
        Command::Reproduce { id } => {
            return Err(CliError::Config(format!("reproduce {id} must be run through run_reproduce")));
        }
    }
    Ok(out)
}

fn integrate(cfg: &ScenarioConfig, out_dir: &Path, out: &mut Outcome) -> Result<(), CliError> {
    let eq = cfg.equation()?;
    let hist = cfg.history()?;
    let horizon = cfg.horizon()?;
    let traj = solve_cauchy(&eq, &hist, horizon, &solve_options(cfg))?;
    write_csv(&out_dir.join("trajectory.csv"), &traj, &mut out.files)?;
    let report = traj.zero_report();
    let bundle = Bundle {
        tool: "fdosc",
        version: TOOL_VERSION,
        command: "integrate",
        config: cfg,
        body: ZerosBody { t1: traj.t1, zeros: &report, max_residual: traj.max_residual },
    };
    write_json(&out_dir.join("zeros.json"), &bundle, &mut out.files)?;
    out.summary.push(format!("integrated on [{}, {}]: {} zeros", traj.t1, traj.horizon, report.zeros.len()));
    Ok(())
}

fn witness_histories(cfg: &ScenarioConfig, t1: f64) -> Result<Vec<HistorySpec>, CliError> {
    if cfg.analysis.witness_histories.is_empty() {
        return Ok(default_histories(t1));
    }
    cfg.analysis
        .witness_histories
        .iter()
        .enumerate()
        .map(|(i, h)| config::history_from(h, &format!("analysis.witness_histories[{i}]"), t1))
        .collect()
}

fn nonosc_options(cfg: &ScenarioConfig) -> NonoscOptions {
    NonoscOptions { grid_step: cfg.analysis.grid_step, solve: solve_options(cfg), ..NonoscOptions::default() }
}

fn interval_options(cfg: &ScenarioConfig) -> IntervalOscOptions {
    IntervalOscOptions {
        eps_schedule: cfg.eps_schedule(),
        scan_points: cfg.analysis.scan_points,
        tol: cfg.analysis.tol,
        grid_step: cfg.analysis.grid_step,
    }
}

fn cross_check(cfg: &ScenarioConfig) -> Result<Option<CrossCheck>, CliError> {
    let Some(cc) = &cfg.analysis.cross_check else { return Ok(None) };
    let mut intervals = Vec::new();
    for (i, iv) in cc.intervals.iter().enumerate() {
        intervals.push(config::resolve2(iv, &format!("analysis.cross_check.intervals[{i}]"))?);
    }
    if let Some(p) = &cc.periodic {
        let start = p.start.resolve("analysis.cross_check.periodic.start")?;
        let period = p.period.resolve("analysis.cross_check.periodic.period")?;
        intervals.extend((0..p.count).map(|l| (start + l as f64 * period, start + (l + 1) as f64 * period)));
    }
    let horizon = match &cc.horizon {
        Some(h) => h.resolve("analysis.cross_check.horizon")?,
        None => cfg.window()?.1,
    };
    Ok(Some(CrossCheck { histories: cc.histories, seed: cfg.analysis.seed, horizon, intervals }))
}

fn osc_options(cfg: &ScenarioConfig) -> Result<OscOptions, CliError> {
    let a = &cfg.analysis;
    let strategy = match a.strategy.as_str() {
        "thm22" => IntervalStrategy::Thm22 { partitions: cfg.partitions()?, interval: interval_options(cfg) },
        "assume" => IntervalStrategy::Assume,
        _ => IntervalStrategy::ConjugateScan,
    };
    Ok(OscOptions {
        repetitions: a.repetitions,
        grid_step: a.grid_step,
        min_len: a.min_len.as_ref().map(|n| n.resolve("analysis.min_len")).transpose()?,
        strategy,
        scan_points: a.scan_points,
        tol: a.tol,
        cross_check: cross_check(cfg)?,
        solve: solve_options(cfg),
    })
}

fn interval_reports(cfg: &ScenarioConfig, eq: &EquationSpec) -> Result<Vec<CriterionReport>, CliError> {
    let partitions = cfg.partitions()?;
    if partitions.is_empty() {
        return Err(CliError::Config("no partitions configured (analysis.partitions or analysis.partition_family)".into()));
    }
    let r1 = cfg.comparison(eq)?;
    let opts = interval_options(cfg);
    partitions
        .iter()
        .map(|&partition| {
            let inst = IntervalOscInstance {
                p: eq.p.clone(),
                terms: r1.iter().zip(&eq.terms).map(|(r, d)| (r.clone(), d.alpha.clone())).collect(),
                partition,
            };
            check_interval_osc_thm22(&inst, &opts).map_err(CliError::from)
        })
        .collect()
}

fn wong_instance(cfg: &ScenarioConfig) -> Result<(WongInstance, WongOptions), CliError> {
    let window = cfg.window()?;
    let (inst, tol) = match &cfg.wong {
        Some(w) => {
            let intervals = match &w.intervals {
                Some([a, b]) => Some([config::resolve2(a, "wong.intervals[0]")?, config::resolve2(b, "wong.intervals[1]")?]),
                None => None,
            };
            let inst = WongInstance {
                d: config::parse_fn("wong.d", &w.d)?,
                r: config::parse_fn("wong.r", &w.r)?,
                g: config::parse_fn("wong.g", &w.g)?,
                intervals,
                family: TrialFamily { sine_powers: w.sine_powers.clone(), hat_peaks: w.hat_peaks },
            };
            (inst, w.tol)
        }
        None => {
            let eq = cfg.equation()?;
            if eq.q.as_constant() != Some(0.0) || !eq.terms.iter().all(|d| d.alpha.is_identity()) {
                return Err(CliError::Config("wong needs a [wong] block or an equation with q = 0 and no deviation".into()));
            }
            let mut r = PiecewiseFn::constant(0.0);
            if let Some(first) = eq.terms.first() {
                r = first.r.clone();
            }
            if eq.terms.len() > 1 {
                return Err(CliError::Config("wong without a [wong] block needs exactly one term".into()));
            }
            (WongInstance { d: eq.p, r, g: eq.f, intervals: None, family: TrialFamily::default() }, 1e-10)
        }
    };
    let opts = WongOptions { window, repetitions: cfg.analysis.repetitions, grid_step: cfg.analysis.grid_step, tol };
    Ok((inst, opts))
}

fn check(id: &str, cfg: &ScenarioConfig, out_dir: &Path, out: &mut Outcome) -> Result<(), CliError> {
    let report = match id {
        "thm31" | "cor31" => {
            let eq = cfg.equation()?;
            let window = cfg.window()?;
            let opts = nonosc_options(cfg);
            if id == "thm31" {
                let witness = match &cfg.analysis.witness {
                    Some(w) => NonoscWitness::Expression(config::parse_fn("analysis.witness", w)?),
                    None => NonoscWitness::Numeric(witness_histories(cfg, window.0.max(eq.t0))?),
                };
                check_nonoscillation_thm31(&eq, &cfg.comparison(&eq)?, &witness, window, &opts)?
            } else {
                let hs = if cfg.analysis.witness_histories.is_empty() { None } else { Some(witness_histories(cfg, window.0.max(eq.t0))?) };
                check_nonoscillation_cor31(&eq, window, hs, &opts)?
            }
        }
        "thm32" | "cor32" => {
            let eq = cfg.equation()?;
            let window = cfg.window()?;
            let opts = osc_options(cfg)?;
            if id == "thm32" {
                check_oscillation_thm32(&eq, &cfg.comparison(&eq)?, window, &opts)?
            } else {
                check_oscillation_cor32(&eq, window, &opts)?
            }
        }
        "thm22" => {
            let eq = cfg.equation()?;
            let reports = interval_reports(cfg, &eq)?;
            let bundle =
                Bundle { tool: "fdosc", version: TOOL_VERSION, command: "interval-osc", config: cfg, body: ReportsBody { reports: &reports } };
            write_json(&out_dir.join("interval_osc.json"), &bundle, &mut out.files)?;
            for r in &reports {
                out.summary.push(describe(r));
            }
            let all_certified = reports.iter().all(|r| r.verdict.is_certified());
            out.verdict = Some(if all_certified { reports[0].verdict } else { OscillationVerdict::Inconclusive });
            return Ok(());
        }
        "wong" => {
            let (inst, opts) = wong_instance(cfg)?;
            wong_test(&inst, &opts)?
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown criterion '{other}' (expected thm31, cor31, thm22, thm32, cor32 or wong)"
            )))
        }
    };
    let bundle = Bundle { tool: "fdosc", version: TOOL_VERSION, command: "check", config: cfg, body: ReportBody { report: &report } };
    write_json(&out_dir.join(format!("report_{id}.json")), &bundle, &mut out.files)?;
    out.summary.push(describe(&report));
    out.verdict = Some(report.verdict);
    Ok(())
}

/// Run a shipped scenario end to end, including its numeric cross-checks.
pub fn run_reproduce(id: &str, overrides: &Overrides, out_dir: &Path) -> Result<Outcome, CliError> {
    let preset = presets::for_example(id).ok_or_else(|| {
        CliError::Config(format!("unknown example id '{id}' (expected one of {})", presets::EXAMPLE_IDS.join(", ")))
    })?;
    let mut cfg = preset.config()?;
    apply_overrides(&mut cfg, overrides);
    cfg.validate()?;
    let mut out = Outcome { verdict: None, files: Vec::new(), summary: Vec::new() };
    let dir = out_dir.join(format!("reproduce-{}", preset.name));
    match cfg.analysis.criterion.as_deref() {
        Some("thm31") => reproduce_nonosc(&cfg, &dir, &mut out)?,
        Some("thm32") => reproduce_osc(&cfg, &dir, &mut out)?,
        other => return Err(CliError::Config(format!("preset criterion {other:?} has no reproduction"))),
    }
    Ok(out)
}

fn reproduce_nonosc(cfg: &ScenarioConfig, dir: &Path, out: &mut Outcome) -> Result<(), CliError> {
    let eq = cfg.equation()?;
    let window = cfg.window()?;
    let witness = match &cfg.analysis.witness {
        Some(w) => NonoscWitness::Expression(config::parse_fn("analysis.witness", w)?),
        None => NonoscWitness::Numeric(witness_histories(cfg, window.0.max(eq.t0))?),
    };
    let report = check_nonoscillation_thm31(&eq, &cfg.comparison(&eq)?, &witness, window, &nonosc_options(cfg))?;

    let zf = cfg.analysis.zero_free.as_ref().ok_or_else(|| CliError::Config("preset lacks analysis.zero_free".into()))?;
    let horizon = zf.horizon.resolve("analysis.zero_free.horizon")?;
    let mut hs = Vec::new();
    for (i, h) in zf.histories.iter().enumerate() {
        hs.push(config::history_from(h, &format!("analysis.zero_free.histories[{i}]"), eq.t0)?);
    }
    hs.extend(random_histories(zf.random, cfg.analysis.seed, eq.t0));
    let found = find_zero_free(&eq, &hs, horizon, eq.t0, &solve_options(cfg))?;
    let record = match &found {
        Some((h, traj)) => {
            let min_abs = traj.mesh().iter().filter_map(|&t| traj.phi(t)).fold(f64::INFINITY, |m, v| m.min(v.abs()));
            ZeroFreeRecord {
                found: true,
                horizon,
                tried: hs.iter().position(|x| x == h).map_or(hs.len(), |i| i + 1),
                theta: Some(h.theta.to_string()),
                zeta: Some(h.zeta),
                min_abs_phi: Some(min_abs),
            }
        }
        None => ZeroFreeRecord { found: false, horizon, tried: hs.len(), theta: None, zeta: None, min_abs_phi: None },
    };
    if let Some((_, traj)) = &found {
        write_csv(&dir.join("trajectory.csv"), traj, &mut out.files)?;
    }
    let bundle =
        Bundle { tool: "fdosc", version: TOOL_VERSION, command: "reproduce", config: cfg, body: NonoscBundle { report: &report, zero_free: &record } };
    write_json(&dir.join("bundle.json"), &bundle, &mut out.files)?;
    out.summary.push(describe(&report));
    out.summary.push(if record.found {
        format!("zero-free solution on [{}, {horizon}] after {} histories", eq.t0, record.tried)
    } else {
        format!("no zero-free solution on [{}, {horizon}] among {} histories", eq.t0, record.tried)
    });
    out.verdict = Some(report.verdict);
    if !record.found {
        return Err(CliError::Numeric(format!("no zero-free solution found on [{}, {horizon}]", eq.t0)));
    }
    Ok(())
}

fn reproduce_osc(cfg: &ScenarioConfig, dir: &Path, out: &mut Outcome) -> Result<(), CliError> {
    let eq = cfg.equation()?;
    let window = cfg.window()?;
    let interval = interval_reports(cfg, &eq)?;
    let mut opts = osc_options(cfg)?;
    if opts.cross_check.is_none() {
        opts.cross_check = Some(CrossCheck { horizon: window.1, seed: cfg.analysis.seed, ..CrossCheck::default() });
    }
    let report = check_oscillation_thm32(&eq, &cfg.comparison(&eq)?, window, &opts)?;
    let bundle = Bundle {
        tool: "fdosc",
        version: TOOL_VERSION,
        command: "reproduce",
        config: cfg,
        body: OscBundle { report: &report, interval_reports: &interval },
    };
    write_json(&dir.join("bundle.json"), &bundle, &mut out.files)?;
    for r in &interval {
        out.summary.push(describe(r));
    }
    out.summary.push(describe(&report));
    if let Some(t) = &report.cross_check {
        let hit = t.rows.iter().filter(|r| r.all_hit).count();
        out.summary.push(format!("cross-check: {hit} of {} histories hit every interval", t.rows.len()));
    }
    out.verdict = Some(report.verdict);
    Ok(())
}
