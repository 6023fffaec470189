//! Command dispatch, artifact emission and exit codes for `isolab`.
//!
//! Exit codes: 0 success, 1 hypothesis violation, 2 numerical failure,
//! 3 malformed configuration.

use std::f64::consts::PI;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::ball_expansion::{
    expansion_report, ricci_bound_check_with, scalar_bound_check_with, FitWindow, ProfileSource, DEFAULT_FIT_SAMPLES,
};
use crate::cmc_shooting::compare_with_profile_with;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::format::num;
use crate::geodesic_balls::{candidate_profile, ProfileTable, S3_VOLUME};
use crate::hawking::{
    check_monotonicity_with, hawking_table_with, inequality_ledger, integrate_rigidity_ode_on,
    max_isoperimetric_area_with,
};
use crate::warp_metric::{
    build_metric, curvature_at, double_with, hypothesis_grid, verify_hypotheses_with, HypothesisReport, Pole,
    WarpedMetric,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Curvature,
    Profile,
    Hawking,
    Rigidity,
    Expansion,
    Inequalities,
    Double,
    Cmc,
    FullReport,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Curvature => "curvature",
            Command::Profile => "profile",
            Command::Hawking => "hawking",
            Command::Rigidity => "rigidity",
            Command::Expansion => "expansion",
            Command::Inequalities => "inequalities",
            Command::Double => "double",
            Command::Cmc => "cmc",
            Command::FullReport => "full-report",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "isolab",
    version,
    about = "Isoperimetric profile and scalar-curvature rigidity laboratory"
)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `outputDir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides both grid sizes.
    #[arg(long)]
    pub grid: Option<usize>,
    /// JSON object of tolerance overrides applied on top of the config.
    #[arg(long)]
    pub seed_tolerances: Option<PathBuf>,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_HYPOTHESIS: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::MalformedSpec(_) | Error::GeometryViolation(_) | Error::Config(_) => EXIT_CONFIG,
        Error::HypothesisFailure(_) | Error::NotTotallyGeodesic(_) | Error::PreconditionNotRigid(_) => EXIT_HYPOTHESIS,
        _ => EXIT_NUMERICAL,
    }
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub summary: String,
    pub artifacts: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckStep {
    pub name: String,
    pub passed: bool,
    pub detail: Value,
}

/// Verdict document written by `rigidity` and `full-report`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Verdict {
    pub command: String,
    pub metric: String,
    pub doubled: bool,
    pub rigid: Option<bool>,
    pub verdict: String,
    pub steps: Vec<CheckStep>,
    pub exit_code: i32,
}

pub const RIGID_VERDICT: &str = "rigid: profile coincides with S³, R ≡ 6, Einstein at poles";
pub const MIN_OO_VERDICT: &str = "rigid (Min-Oo instance)";

struct Writer {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn text(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)?;
        self.written.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.text(name, &text)
    }
}

fn to_value<T: Serialize>(value: &T) -> Result<Value> {
    Ok(serde_json::to_value(value)?)
}

fn step<T: Serialize>(name: &str, passed: bool, detail: &T) -> Result<CheckStep> {
    Ok(CheckStep {
        name: name.into(),
        passed,
        detail: to_value(detail)?,
    })
}

/// The metric as configured, doubled when it has a boundary.
struct Prepared {
    original: WarpedMetric,
    closed: WarpedMetric,
}

impl Prepared {
    fn doubled(&self) -> bool {
        self.closed.is_doubled()
    }
}

fn prepare(config: &RunConfig) -> Result<Prepared> {
    let original = build_metric(&config.metric)?;
    let closed = if original.is_closed() {
        original.clone()
    } else {
        double_with(&original, &config.tolerances)?
    };
    Ok(Prepared { original, closed })
}

fn curvature_csv(metric: &WarpedMetric, config: &RunConfig) -> String {
    let mut out = String::from("r,scalar,ricRadial,ricTangential\n");
    for r in hypothesis_grid(metric, config.grid.curvature_size, &config.tolerances) {
        let c = curvature_at(metric, r);
        let _ = writeln!(
            out,
            "{},{},{},{}",
            num(c.r),
            num(c.scalar),
            num(c.ric_radial),
            num(c.ric_tangential)
        );
    }
    out
}

fn hypotheses(metric: &WarpedMetric, config: &RunConfig) -> Result<HypothesisReport> {
    verify_hypotheses_with(metric, config.grid.curvature_size, &config.tolerances)
}

fn hypothesis_summary(report: &HypothesisReport) -> String {
    format!(
        "hypotheses violated: min R = {}, min Ricci eigenvalue = {}",
        report.min_scalar, report.min_ricci_eigenvalue
    )
}

fn require_hypotheses(report: &HypothesisReport) -> Result<()> {
    if report.passed() {
        Ok(())
    } else {
        Err(Error::HypothesisFailure(hypothesis_summary(report)))
    }
}

fn inequality_radii(metric: &WarpedMetric) -> Vec<f64> {
    let length = metric.length();
    (1..=50).map(|k| length * k as f64 / 51.0).collect()
}

fn cmc_volumes(metric: &WarpedMetric) -> Vec<f64> {
    let total = metric.total_volume();
    (1..=10).map(|k| total * k as f64 / 11.0).collect()
}

fn fit_window(metric: &WarpedMetric, config: &RunConfig) -> FitWindow {
    config.fit_window.unwrap_or_else(|| FitWindow::default_for(metric))
}

/// Largest deviation of the warping function from `sin r`, when the length
/// is that of the round sphere.
fn round_deviation(metric: &WarpedMetric) -> Option<f64> {
    if (metric.length() - PI).abs() > 1e-12 {
        return None;
    }
    let n = 4096;
    Some(
        (0..=n)
            .map(|k| {
                let r = PI * k as f64 / n as f64;
                (metric.f(r) - r.sin()).abs()
            })
            .fold(0.0, f64::max),
    )
}

fn cmd_curvature(config: &RunConfig, out: &mut Writer) -> Result<Outcome> {
    let metric = build_metric(&config.metric)?;
    let report = hypotheses(&metric, config)?;
    out.text("curvature.csv", &curvature_csv(&metric, config))?;
    out.json("hypotheses.json", &report)?;
    let (exit_code, summary) = if report.passed() {
        (
            EXIT_OK,
            format!(
                "hypotheses hold: min R = {}, min Ricci eigenvalue = {}",
                report.min_scalar, report.min_ricci_eigenvalue
            ),
        )
    } else {
        (EXIT_HYPOTHESIS, hypothesis_summary(&report))
    };
    Ok(Outcome {
        exit_code,
        summary,
        artifacts: Vec::new(),
    })
}

fn profile_summary(profile: &ProfileTable) -> Value {
    let top = profile.max_area();
    json!({
        "nodes": profile.entries.len(),
        "totalVolume": profile.total_volume,
        "maxArea": top.map(|e| e.i),
        "maxAreaVolume": top.map(|e| e.v),
        "poleSwitches": profile.pole_switches().len(),
    })
}

fn cmd_profile(config: &RunConfig, out: &mut Writer) -> Result<Outcome> {
    let prepared = prepare(config)?;
    let profile = candidate_profile(&prepared.closed, config.grid.profile_size)?;
    out.text("profile.csv", &profile.to_csv())?;
    let mut summary = profile_summary(&profile);
    summary["metric"] = json!(prepared.closed.label());
    out.json("profile.json", &summary)?;
    Ok(Outcome {
        exit_code: EXIT_OK,
        summary: format!(
            "profile: {} nodes, max area {}",
            profile.entries.len(),
            summary["maxArea"]
        ),
        artifacts: Vec::new(),
    })
}

fn cmd_hawking(config: &RunConfig, out: &mut Writer) -> Result<Outcome> {
    let prepared = prepare(config)?;
    let profile = candidate_profile(&prepared.closed, config.grid.profile_size)?;
    let table = hawking_table_with(&profile, &config.tolerances)?;
    let verdict = check_monotonicity_with(&table, profile.total_volume, &config.tolerances);
    out.text("hawking.csv", &table.to_csv())?;
    out.json(
        "hawking.json",
        &json!({
            "metric": prepared.closed.label(),
            "monotonicity": verdict,
            "limitAtZero": table.limit_at_zero,
            "maxAbsMass": table.max_abs_mass(),
        }),
    )?;
    Ok(Outcome {
        exit_code: EXIT_OK,
        summary: format!(
            "Hawking mass monotone on first half: {}, min derivative {}",
            verdict.monotone, verdict.min_derivative
        ),
        artifacts: Vec::new(),
    })
}

fn cmd_expansion(config: &RunConfig, out: &mut Writer) -> Result<Outcome> {
    let prepared = prepare(config)?;
    let metric = &prepared.closed;
    let window = fit_window(metric, config);
    let mut reports = Vec::new();
    for pole in [Pole::North, Pole::South] {
        let report = expansion_report(metric, pole, window, DEFAULT_FIT_SAMPLES)?;
        if let Some(fit) = &report.fit {
            out.text(&format!("expansion_fit_{}.csv", pole.name()), &fit.to_csv())?;
        }
        reports.push(report);
    }
    out.json(
        "expansion.json",
        &json!({ "metric": metric.label(), "poles": reports, "offPoleBalls": "not evaluated" }),
    )?;
    let north = &reports[0];
    Ok(Outcome {
        exit_code: EXIT_OK,
        summary: format!(
            "north pole: c1 = {} (fitted {:?}), c2 = {}",
            north.c1_analytic,
            north.fit.as_ref().map(|f| f.c1_fitted),
            north.c2_analytic
        ),
        artifacts: Vec::new(),
    })
}

fn cmd_inequalities(config: &RunConfig, out: &mut Writer) -> Result<Outcome> {
    let prepared = prepare(config)?;
    let metric = &prepared.closed;
    require_hypotheses(&hypotheses(metric, config)?)?;
    let ledger = inequality_ledger(metric, &inequality_radii(metric))?;
    out.text("inequalities.csv", &ledger.to_csv())?;
    out.json(
        "inequalities.json",
        &json!({ "metric": metric.label(), "records": ledger.records }),
    )?;
    let worst_cy = ledger.records.iter().map(|r| r.cy_slack).fold(f64::INFINITY, f64::min);
    Ok(Outcome {
        exit_code: EXIT_OK,
        summary: format!(
            "inequality ledger: {} radii, min CY slack {worst_cy}",
            ledger.records.len()
        ),
        artifacts: Vec::new(),
    })
}

fn cmd_double(config: &RunConfig, out: &mut Writer) -> Result<Outcome> {
    let original = build_metric(&config.metric)?;
    let doubled = double_with(&original, &config.tolerances)?;
    let report = hypotheses(&doubled, config)?;
    out.text("doubled_curvature.csv", &curvature_csv(&doubled, config))?;
    out.json(
        "double.json",
        &json!({
            "metric": original.label(),
            "doubled": doubled.label(),
            "length": doubled.length(),
            "seam": doubled.seam(),
            "totalVolume": doubled.total_volume(),
            "roundDeviation": round_deviation(&doubled),
            "hypotheses": report,
        }),
    )?;
    let exit_code = if report.passed() { EXIT_OK } else { EXIT_HYPOTHESIS };
    Ok(Outcome {
        exit_code,
        summary: format!("doubled {} to length {}", original.label(), doubled.length()),
        artifacts: Vec::new(),
    })
}

fn cmd_cmc(config: &RunConfig, out: &mut Writer) -> Result<Outcome> {
    let prepared = prepare(config)?;
    let metric = &prepared.closed;
    let profile = candidate_profile(metric, config.grid.profile_size)?;
    let report = compare_with_profile_with(metric, &profile, &cmc_volumes(metric), &config.tolerances)?;
    for (k, entry) in report.entries.iter().enumerate() {
        if let Some(best) = &entry.best {
            out.text(&format!("cmc_curve_{:02}.csv", k + 1), &best.to_csv())?;
        }
    }
    out.json("cmc.json", &json!({ "metric": metric.label(), "report": report }))?;
    Ok(Outcome {
        exit_code: EXIT_OK,
        summary: report.summary.clone(),
        artifacts: Vec::new(),
    })
}

/// The full rigidity chain on a closed metric.
pub fn rigidity_pipeline(metric: &WarpedMetric, config: &RunConfig, command: Command) -> Result<Verdict> {
    let tol = &config.tolerances;
    let mut verdict = Verdict {
        command: command.name().into(),
        metric: metric.label().into(),
        doubled: metric.is_doubled(),
        rigid: None,
        verdict: String::new(),
        steps: Vec::new(),
        exit_code: EXIT_OK,
    };

    let report = hypotheses(metric, config)?;
    verdict.steps.push(step("hypotheses", report.passed(), &report)?);
    if !report.passed() {
        verdict.verdict = hypothesis_summary(&report);
        verdict.exit_code = EXIT_HYPOTHESIS;
        return Ok(verdict);
    }

    let profile = candidate_profile(metric, config.grid.profile_size)?;
    verdict.steps.push(step("profile", true, &profile_summary(&profile))?);

    let table = hawking_table_with(&profile, tol)?;
    let monotone = check_monotonicity_with(&table, profile.total_volume, tol);
    verdict.steps.push(step(
        "hawkingMonotonicity",
        monotone.monotone,
        &json!({ "monotonicity": monotone, "limitAtZero": table.limit_at_zero }),
    )?);

    let area = max_isoperimetric_area_with(&profile, tol)?;
    verdict.steps.push(step("maxArea", area.rigid, &area)?);
    if !area.rigid {
        verdict.rigid = Some(false);
        verdict.verdict = format!("not rigid: max area {:.4} < 4π", area.max_area);
        return Ok(verdict);
    }

    // Equality branch: the profile solves the rigidity ODE.
    let v_max = (0.5 * profile.total_volume).min(0.5 * S3_VOLUME);
    let nodes: Vec<_> = profile.entries.iter().filter(|e| e.v >= 1e-3 && e.v <= v_max).collect();
    let outputs: Vec<f64> = nodes.iter().map(|e| e.v).collect();
    let ode = integrate_rigidity_ode_on(1e-3, None, &outputs)?;
    let ode_deviation = ode
        .entries
        .iter()
        .zip(&nodes)
        .map(|(o, p)| (p.i - o.i).abs() / o.i)
        .fold(0.0, f64::max);
    verdict.steps.push(step(
        "rigidityOde",
        ode_deviation <= tol.rigidity_rel,
        &json!({ "maxRelativeDeviation": ode_deviation, "seedVolume": 1e-3, "endVolume": v_max }),
    )?);

    for pole in [Pole::North, Pole::South] {
        match scalar_bound_check_with(metric, pole, ProfileSource::Candidate, tol) {
            Ok(rep) => verdict.steps.push(step(
                &format!("scalarBound.{}", pole.name()),
                rep.scalar_equals_six,
                &rep,
            )?),
            Err(e @ Error::PreconditionNotRigid(_)) => {
                verdict
                    .steps
                    .push(step(&format!("scalarBound.{}", pole.name()), false, &e.to_string())?)
            }
            Err(e) => return Err(e),
        }
        match ricci_bound_check_with(metric, pole, tol) {
            Ok(rep) => verdict
                .steps
                .push(step(&format!("ricciBound.{}", pole.name()), rep.einstein, &rep)?),
            Err(e @ Error::PreconditionNotRigid(_)) => {
                verdict
                    .steps
                    .push(step(&format!("ricciBound.{}", pole.name()), false, &e.to_string())?)
            }
            Err(e) => return Err(e),
        }
    }

    let failed: Vec<&str> = verdict
        .steps
        .iter()
        .filter(|s| !s.passed)
        .map(|s| s.name.as_str())
        .collect();
    if failed.is_empty() {
        verdict.rigid = Some(true);
        verdict.verdict = if metric.is_doubled() {
            MIN_OO_VERDICT.into()
        } else {
            RIGID_VERDICT.into()
        };
    } else {
        verdict.rigid = Some(true);
        verdict.verdict = format!("inconsistent: round profile but failed checks {}", failed.join(", "));
        verdict.exit_code = EXIT_NUMERICAL;
    }
    Ok(verdict)
}

fn verdict_outcome(verdict: &Verdict) -> Outcome {
    Outcome {
        exit_code: verdict.exit_code,
        summary: verdict.verdict.clone(),
        artifacts: Vec::new(),
    }
}

fn cmd_rigidity(config: &RunConfig, out: &mut Writer) -> Result<Outcome> {
    let prepared = prepare(config)?;
    let verdict = rigidity_pipeline(&prepared.closed, config, Command::Rigidity)?;
    out.json("verdict.json", &verdict)?;
    Ok(verdict_outcome(&verdict))
}

fn cmd_full_report(config: &RunConfig, out: &mut Writer) -> Result<Outcome> {
    let prepared = prepare(config)?;
    let metric = &prepared.closed;
    if prepared.doubled() {
        out.text("original_curvature.csv", &curvature_csv(&prepared.original, config))?;
    }
    out.text("curvature.csv", &curvature_csv(metric, config))?;
    let report = hypotheses(metric, config)?;
    out.json("hypotheses.json", &report)?;

    let mut verdict = rigidity_pipeline(metric, config, Command::FullReport)?;
    let mut sections = json!({ "roundDeviation": round_deviation(metric) });
    if report.passed() {
        let profile = candidate_profile(metric, config.grid.profile_size)?;
        out.text("profile.csv", &profile.to_csv())?;
        let table = hawking_table_with(&profile, &config.tolerances)?;
        out.text("hawking.csv", &table.to_csv())?;

        let ledger = inequality_ledger(metric, &inequality_radii(metric))?;
        out.text("inequalities.csv", &ledger.to_csv())?;

        let window = fit_window(metric, config);
        let mut expansions = Vec::new();
        for pole in [Pole::North, Pole::South] {
            let rep = expansion_report(metric, pole, window, DEFAULT_FIT_SAMPLES)?;
            if let Some(fit) = &rep.fit {
                out.text(&format!("expansion_fit_{}.csv", pole.name()), &fit.to_csv())?;
            }
            expansions.push(rep);
        }

        let competitors = compare_with_profile_with(metric, &profile, &cmc_volumes(metric), &config.tolerances)?;
        for (k, entry) in competitors.entries.iter().enumerate() {
            if let Some(best) = &entry.best {
                out.text(&format!("cmc_curve_{:02}.csv", k + 1), &best.to_csv())?;
            }
        }
        verdict
            .steps
            .push(step("cmcCompetitors", !competitors.any_beaten, &competitors)?);
        sections["expansion"] = to_value(&expansions)?;
        sections["inequalities"] = json!({
            "minCySlack": ledger.records.iter().map(|r| r.cy_slack).fold(f64::INFINITY, f64::min),
            "maxBasicLhs": ledger.records.iter().map(|r| r.basic_lhs).fold(f64::NEG_INFINITY, f64::max),
        });
    }
    out.json("verdict.json", &verdict)?;
    out.json("report.json", &json!({ "verdict": verdict, "sections": sections }))?;
    Ok(verdict_outcome(&verdict))
}

/// Runs `command` and writes its artifacts under `config.output_dir`.
pub fn run_command(command: Command, config: &RunConfig) -> Result<Outcome> {
    config.validate()?;
    let mut out = Writer::new(&config.output_dir)?;
    let mut outcome = match command {
        Command::Curvature => cmd_curvature(config, &mut out),
        Command::Profile => cmd_profile(config, &mut out),
        Command::Hawking => cmd_hawking(config, &mut out),
        Command::Rigidity => cmd_rigidity(config, &mut out),
        Command::Expansion => cmd_expansion(config, &mut out),
        Command::Inequalities => cmd_inequalities(config, &mut out),
        Command::Double => cmd_double(config, &mut out),
        Command::Cmc => cmd_cmc(config, &mut out),
        Command::FullReport => cmd_full_report(config, &mut out),
    }?;
    outcome.artifacts = out.written;
    Ok(outcome)
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = RunConfig::load(&cli.config)?;
    if let Some(dir) = &cli.out {
        config.output_dir = dir.clone();
    }
    if let Some(n) = cli.grid {
        config.grid.profile_size = n;
        config.grid.curvature_size = n;
    }
    if let Some(path) = &cli.seed_tolerances {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        config.apply_tolerance_overrides(&text)?;
    }
    config.validate()?;
    Ok(config)
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = load_config(&cli).and_then(|config| run_command(cli.command, &config));
    match result {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("isolab {}: {e}", cli.command.name());
            exit_code(&e)
        }
    }
}
