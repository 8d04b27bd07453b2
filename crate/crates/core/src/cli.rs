//! Command-line front end.
//!
//! Exit codes: 0 pass, 1 a hypothesis or scan check failed, 2 a solve,
//! smoothing or output step failed, 3 the configuration was rejected.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::config::{Command, ConfigError, OutputFormat, RunConfig};
use crate::functionals::{check_criteria, evaluate, Certificate, Method};
use crate::mollifier::{drift_table, mollify, rebalance, Drift, FreeParameter, MOLLIFIED_QUAD};
use crate::scans::{
    asymptotic_scaling, fmt_float, log_space, uniform_ball_floor, virial_unbounded_below, witness_grid,
    Execution, ScanGrid, ScanRow, CSV_HEADER, UNIFORM_VIRIAL_BOUND,
};
use crate::solvers::{solve_threshold_a, FamilyKind, SolvedFamily};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_ERROR: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

/// Environment variable capping the number of scan threads.
pub const THREADS_ENV: &str = "VIRIAL_FORGE_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "virial-forge",
    version,
    about = "Zero-energy initial data with negative virial, certified"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Solve the family's free parameter and check the blow-up hypotheses.
    Certify(RunArgs),
    /// Every functional by closed form and by quadrature, plus the threshold cutoff.
    Report(RunArgs),
    /// Smooth the step datum, restore zero energy, and certify again.
    Mollify(RunArgs),
    /// Sweep a grid and write one CSV row per point.
    Scan(RunArgs),
    /// Fit the large-P scaling of the core-halo family.
    Asymptotics(RunArgs),
}

fn parse_family(s: &str) -> Result<FamilyKind, String> {
    match s {
        "uniform" => Ok(FamilyKind::Uniform),
        "core-halo" => Ok(FamilyKind::CoreHalo),
        "monotonic" => Ok(FamilyKind::Monotonic),
        "custom" => Ok(FamilyKind::Custom),
        _ => Err("expected one of uniform, core-halo, monotonic, custom".into()),
    }
}

fn parse_target(s: &str) -> Result<crate::mollifier::MollifyTarget, String> {
    use crate::mollifier::MollifyTarget as T;
    match s {
        "spatial" => Ok(T::Spatial),
        "momentum" => Ok(T::Momentum),
        "angular" => Ok(T::Angular),
        "all" => Ok(T::All),
        _ => Err("expected one of spatial, momentum, angular, all".into()),
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML config file; flags override its settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_family)]
    pub family: Option<FamilyKind>,
    #[arg(long)]
    pub r1: Option<f64>,
    #[arg(long)]
    pub r2: Option<f64>,
    #[arg(long)]
    pub r3: Option<f64>,
    /// Momentum cutoff.
    #[arg(long)]
    pub p: Option<f64>,
    /// Atmosphere exponent (monotonic family).
    #[arg(long)]
    pub n: Option<f64>,
    /// Angular cutoff: momenta satisfy cos θ ≤ a.
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    /// Halo amplitude override (core-halo family).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Absolute ramp half-width.
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// Ramp half-width relative to the smallest piece width.
    #[arg(long, allow_negative_numbers = true)]
    pub delta_rel: Option<f64>,
    #[arg(long, value_parser = parse_target)]
    pub target: Option<crate::mollifier::MollifyTarget>,
    #[arg(long, allow_negative_numbers = true)]
    pub tol_energy: Option<f64>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Write output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub p_min: Option<f64>,
    #[arg(long)]
    pub p_max: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub a_points: Option<usize>,
    /// Virial level the witness search must undercut.
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
}

impl RunArgs {
    fn as_config(&self) -> RunConfig {
        RunConfig {
            family: self.family,
            r1: self.r1,
            r2: self.r2,
            r3: self.r3,
            p: self.p,
            n: self.n,
            a: self.a,
            alpha: self.alpha,
            delta: self.delta,
            delta_rel: self.delta_rel,
            target: self.target,
            tol_energy: self.tol_energy,
            format: self.format,
            out: self.out.clone(),
            p_min: self.p_min,
            p_max: self.p_max,
            points: self.points,
            a_points: self.a_points,
            threshold: self.threshold,
            ..RunConfig::default()
        }
    }
}

/// What a run produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn error(code: i32, msg: impl std::fmt::Display) -> Self {
        Self {
            code,
            stdout: String::new(),
            stderr: format!("error: {msg}\n"),
        }
    }
}

enum Failure {
    Config(ConfigError),
    Run(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

fn run_err(e: impl std::fmt::Display) -> Failure {
    Failure::Run(e.to_string())
}

/// Ordered key-value document; the `kv` and `human` formats both render it.
#[derive(Default)]
struct Doc {
    pairs: Vec<(String, String)>,
}

impl Doc {
    fn put(&mut self, k: impl Into<String>, v: impl Into<String>) {
        self.pairs.push((k.into(), v.into()));
    }

    fn num(&mut self, k: impl Into<String>, v: f64) {
        self.put(k, fmt_float(v));
    }

    fn opt(&mut self, k: impl Into<String>, v: Option<f64>) {
        self.put(k, v.map(fmt_float).unwrap_or_default());
    }

    fn kv(&self) -> String {
        self.pairs.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    fn human(&self, title: &str) -> String {
        let width = self.pairs.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut s = format!("{title}\n");
        for (k, v) in &self.pairs {
            s.push_str(&format!("  {k:<width$}  {v}\n"));
        }
        s
    }

    fn render(&self, format: OutputFormat, title: &str) -> String {
        match format {
            OutputFormat::Human => self.human(title),
            OutputFormat::Kv | OutputFormat::Csv => self.kv(),
        }
    }
}

fn comment_lines(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("# {k}={v}\n")).collect()
}

fn certificate_keys(doc: &mut Doc, family: FamilyKind, alpha: Option<f64>, c: &Certificate) {
    doc.put("family", family.as_str());
    doc.opt("alpha", alpha);
    doc.num("energy_residual", c.energy_residual);
    doc.num("virial", c.report.virial);
    doc.num("virial_margin", c.virial_margin);
    doc.num("l32_norm", c.report.l32_norm);
    doc.num("norm_margin", c.norm_margin);
    doc.put("verdict", c.verdict.as_str());
}

fn report_keys(doc: &mut Doc, c: &Certificate) {
    let r = &c.report;
    doc.num("kinetic", r.kinetic);
    doc.num("potential", r.potential);
    doc.num("total_energy", r.total_energy);
    doc.num("mass", r.mass);
    doc.num("norm_constant", r.norm_constant);
    doc.num("critical_norm", c.critical_norm);
    doc.num("energy_tolerance", c.energy_tolerance);
    doc.put("method", r.method.as_str());
}

fn list(xs: &[f64]) -> String {
    xs.iter().map(|x| fmt_float(*x)).collect::<Vec<_>>().join(";")
}

fn solved_keys(doc: &mut Doc, s: &SolvedFamily) {
    doc.opt("radius", s.radius);
    doc.num("momentum", s.momentum);
    doc.num("a", s.a);
    doc.put("alpha_roots", list(&s.alpha_roots));
    doc.opt("threshold_a", solve_threshold_a(&s.ansatz).ok());
}

fn single_row_csv(family: FamilyKind, s: Option<&SolvedFamily>, c: &Certificate) -> String {
    let r = &c.report;
    let row = ScanRow {
        family,
        p: s.map_or(f64::NAN, |s| s.momentum),
        a: s.map_or(f64::NAN, |s| s.a),
        alpha: s.and_then(|s| s.alpha),
        radius: s.and_then(|s| s.radius),
        kinetic: r.kinetic,
        potential: r.potential,
        energy: r.total_energy,
        virial: r.virial,
        l32_norm: r.l32_norm,
    };
    format!("{CSV_HEADER}\n{}\n", row.to_csv())
}

fn cmd_certify(cfg: &RunConfig) -> Result<(i32, String), Failure> {
    let format = cfg.format();
    let tol = cfg.tol_energy();
    let family = cfg.family.expect("resolved");
    let (solved, certificate) = if family == FamilyKind::Custom {
        let f = cfg.custom_ansatz()?;
        (None, check_criteria(&f, tol).map_err(run_err)?)
    } else {
        let s = cfg.family()?.solve().map_err(run_err)?;
        let c = check_criteria(&s.ansatz, tol).map_err(run_err)?;
        (Some(s), c)
    };
    let mut doc = Doc::default();
    certificate_keys(
        &mut doc,
        family,
        solved.as_ref().and_then(|s| s.alpha),
        &certificate,
    );
    report_keys(&mut doc, &certificate);
    if let Some(s) = &solved {
        solved_keys(&mut doc, s);
    }
    let echo = cfg.echo();
    let text = match format {
        OutputFormat::Csv => {
            let mut t = single_row_csv(family, solved.as_ref(), &certificate);
            t.push_str(&comment_lines(&echo));
            t.push_str(&comment_lines(&doc.pairs));
            t
        }
        _ => {
            doc.pairs.extend(echo);
            doc.render(format, &format!("certify: {} family", family.as_str()))
        }
    };
    let code = if certificate.passed() {
        EXIT_PASS
    } else {
        EXIT_FAIL
    };
    Ok((code, text))
}

fn rel_diff(x: f64, y: f64) -> f64 {
    if x == y {
        0.0
    } else {
        (x - y).abs() / x.abs().max(y.abs())
    }
}

fn cmd_report(cfg: &RunConfig) -> Result<(i32, String), Failure> {
    let family = cfg.family.expect("resolved");
    let (solved, ansatz) = if family == FamilyKind::Custom {
        (None, cfg.custom_ansatz()?)
    } else {
        let s = cfg.family()?.solve().map_err(run_err)?;
        let f = s.ansatz.clone();
        (Some(s), f)
    };
    let closed = evaluate(&ansatz, Method::ClosedForm).map_err(run_err)?;
    let quad = evaluate(&ansatz, Method::Quadrature).map_err(run_err)?;
    let certificate = Certificate::from_report(closed, cfg.tol_energy());
    let rows = [
        ("norm_constant", closed.norm_constant, quad.norm_constant),
        ("mass", closed.mass, quad.mass),
        ("l32_norm", closed.l32_norm, quad.l32_norm),
        ("kinetic", closed.kinetic, quad.kinetic),
        ("potential", closed.potential, quad.potential),
        ("total_energy", closed.total_energy, quad.total_energy),
        ("virial", closed.virial, quad.virial),
    ];
    let echo = cfg.echo();
    let text = if cfg.format() == OutputFormat::Csv {
        let mut t = String::from("functional,closed_form,quadrature,rel_diff\n");
        for (name, c, q) in rows {
            t.push_str(&format!(
                "{name},{},{},{}\n",
                fmt_float(c),
                fmt_float(q),
                fmt_float(rel_diff(c, q))
            ));
        }
        t.push_str(&comment_lines(&echo));
        t
    } else {
        let mut doc = Doc::default();
        certificate_keys(
            &mut doc,
            family,
            solved.as_ref().and_then(|s| s.alpha),
            &certificate,
        );
        if let Some(s) = &solved {
            solved_keys(&mut doc, s);
        }
        for (name, c, q) in rows {
            doc.num(format!("closed.{name}"), c);
            doc.num(format!("quad.{name}"), q);
            doc.num(format!("rel_diff.{name}"), rel_diff(c, q));
        }
        doc.pairs.extend(echo);
        doc.render(cfg.format(), &format!("report: {} family", family.as_str()))
    };
    Ok((EXIT_PASS, text))
}

fn drift_keys(doc: &mut Doc, drift: &[Drift]) {
    for d in drift {
        doc.num(format!("drift.{}.step", d.name), d.step);
        doc.num(format!("drift.{}.mollified", d.name), d.mollified);
        doc.num(format!("drift.{}.abs", d.name), d.abs());
    }
}

fn cmd_mollify(cfg: &RunConfig) -> Result<(i32, String), Failure> {
    let family = cfg.family.expect("resolved");
    let spec = cfg.mollify_spec();
    let tol = cfg.tol_energy();
    let mut doc = Doc::default();
    let (certificate, drift) = if family == FamilyKind::Custom {
        let step = cfg.custom_ansatz()?;
        let delta = spec.resolve(&step).map_err(run_err)?;
        let smooth = mollify(&step, &spec).map_err(run_err)?;
        let step_report = evaluate(&step, Method::ClosedForm).map_err(run_err)?;
        let report = crate::functionals::evaluate_with(&smooth, Method::Quadrature, MOLLIFIED_QUAD)
            .map_err(run_err)?;
        let c = Certificate::from_report(report, tol);
        certificate_keys(&mut doc, family, None, &c);
        doc.num("delta", delta);
        (c, drift_table(&step_report, &report))
    } else {
        let out = rebalance(&cfg.family()?, &spec, tol).map_err(run_err)?;
        let alpha = match out.parameter {
            FreeParameter::Alpha(a) => Some(a),
            _ => None,
        };
        certificate_keys(&mut doc, family, alpha, &out.certificate);
        doc.num("delta", out.delta);
        doc.put("parameter", out.parameter.name());
        doc.num("parameter_step", out.step_parameter.value());
        doc.num("parameter_mollified", out.parameter.value());
        doc.put("alpha_roots", list(&out.alpha_roots));
        (out.certificate, out.drift())
    };
    doc.put("target", spec.target.as_str());
    report_keys(&mut doc, &certificate);
    let echo = cfg.echo();
    let text = if cfg.format() == OutputFormat::Csv {
        let mut t = String::from("functional,step,mollified,abs_drift\n");
        for d in &drift {
            t.push_str(&format!(
                "{},{},{},{}\n",
                d.name,
                fmt_float(d.step),
                fmt_float(d.mollified),
                fmt_float(d.abs())
            ));
        }
        t.push_str(&comment_lines(&echo));
        t.push_str(&comment_lines(&doc.pairs));
        t
    } else {
        drift_keys(&mut doc, &drift);
        doc.pairs.extend(echo);
        doc.render(cfg.format(), &format!("mollify: {} family", family.as_str()))
    };
    let code = if certificate.passed() {
        EXIT_PASS
    } else {
        EXIT_FAIL
    };
    Ok((code, text))
}

fn p_grid(cfg: &RunConfig) -> Vec<f64> {
    log_space(
        cfg.p_min.expect("resolved"),
        cfg.p_max.expect("resolved"),
        cfg.points.expect("resolved"),
    )
}

fn cmd_scan(cfg: &RunConfig, exec: Execution) -> Result<(i32, String), Failure> {
    let family = cfg.family.expect("resolved");
    let mut summary = Doc::default();
    let (rows, code, verdict_line) = if family == FamilyKind::Uniform {
        let mut grid = ScanGrid::uniform_floor();
        grid.p_values = p_grid(cfg);
        grid.a_values = crate::scans::lin_space(-1.0 + 1e-6, 0.9, cfg.a_points.expect("resolved"));
        let scan = uniform_ball_floor(&grid, exec).map_err(run_err)?;
        summary.num("min_virial", scan.min_virial);
        summary.num("argmin_p", scan.argmin.0);
        summary.num("argmin_a", scan.argmin.1);
        summary.num("gap", scan.gap);
        cross_check_keys(&mut summary, &scan.cross_check);
        let ok = scan.floor_holds && scan.cross_check.ok;
        let line = format!(
            "min_virial > {UNIFORM_VIRIAL_BOUND}: {}",
            if scan.floor_holds { "OK" } else { "FAIL" }
        );
        (scan.rows, if ok { EXIT_PASS } else { EXIT_FAIL }, line)
    } else {
        let scan = asymptotic_scaling(&p_grid(cfg), cfg.a.expect("resolved"), exec).map_err(run_err)?;
        fit_keys(&mut summary, &scan);
        let line = format!(
            "alpha_slope={} virial_slope={}",
            fmt_float(scan.alpha_fit.slope),
            fmt_float(scan.virial_fit.slope)
        );
        let code = if scan.cross_check.ok { EXIT_PASS } else { EXIT_FAIL };
        (scan.rows, code, line)
    };
    let echo = cfg.echo();
    let text = match cfg.format() {
        OutputFormat::Csv => {
            let mut t = format!("{CSV_HEADER}\n");
            for r in &rows {
                t.push_str(&r.to_csv());
                t.push('\n');
            }
            t.push_str(&comment_lines(&echo));
            t.push_str(&comment_lines(&summary.pairs));
            t.push_str(&format!("# {verdict_line}\n"));
            t
        }
        format => {
            summary.put("rows", rows.len().to_string());
            summary.put("summary", verdict_line);
            summary.pairs.extend(echo);
            summary.render(format, &format!("scan: {} family", family.as_str()))
        }
    };
    Ok((code, text))
}

fn cross_check_keys(doc: &mut Doc, c: &crate::scans::CrossCheck) {
    doc.num("cross_check_p", c.p);
    doc.num("cross_check_a", c.a);
    doc.num("cross_check_rel_diff", c.max_rel_diff);
    doc.put("cross_check", if c.ok { "ok" } else { "fail" });
}

fn fit_keys(doc: &mut Doc, scan: &crate::scans::AsymptoticScan) {
    for (name, fit) in [("alpha", &scan.alpha_fit), ("virial", &scan.virial_fit)] {
        doc.num(format!("{name}_slope"), fit.slope);
        doc.num(format!("{name}_intercept"), fit.intercept);
        doc.num(format!("{name}_max_residual"), fit.max_residual);
        doc.put(format!("{name}_points"), fit.points.to_string());
    }
    doc.num("fit_p_min", scan.alpha_fit.range.0);
    doc.num("fit_p_max", scan.alpha_fit.range.1);
    let failed: Vec<f64> = scan.failures.iter().map(|f| f.0).collect();
    doc.put("failed_points", list(&failed));
    cross_check_keys(doc, &scan.cross_check);
}

fn cmd_asymptotics(cfg: &RunConfig, exec: Execution) -> Result<(i32, String), Failure> {
    let a = cfg.a.expect("resolved");
    let scan = asymptotic_scaling(&p_grid(cfg), a, exec).map_err(run_err)?;
    let threshold = cfg.threshold.expect("resolved");
    let witness = virial_unbounded_below(threshold, &witness_grid(), exec).map_err(run_err)?;
    let mut doc = Doc::default();
    doc.put("family", FamilyKind::CoreHalo.as_str());
    doc.num("a", a);
    fit_keys(&mut doc, &scan);
    doc.num("witness_threshold", threshold);
    doc.num("witness_p", witness.p);
    doc.num("witness_alpha", witness.alpha);
    doc.num("witness_virial", witness.virial);
    let echo = cfg.echo();
    let text = if cfg.format() == OutputFormat::Csv {
        let mut t = format!("{CSV_HEADER}\n");
        for r in &scan.rows {
            t.push_str(&r.to_csv());
            t.push('\n');
        }
        t.push_str(&comment_lines(&echo));
        t.push_str(&comment_lines(&doc.pairs));
        t
    } else {
        doc.pairs.extend(echo);
        doc.render(cfg.format(), "asymptotics: core-halo family")
    };
    let code = if scan.cross_check.ok { EXIT_PASS } else { EXIT_FAIL };
    Ok((code, text))
}

fn execute(cmd: Command, args: &RunArgs, exec: Execution) -> Result<(i32, String, Option<PathBuf>), Failure> {
    let file = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mut layered = file.layered(args.as_config());
    if matches!(cmd, Command::Scan) {
        layered.format.get_or_insert(OutputFormat::Csv);
    }
    let cfg = layered.resolve(cmd)?;
    let (code, text) = match cmd {
        Command::Certify => cmd_certify(&cfg)?,
        Command::Report => cmd_report(&cfg)?,
        Command::Mollify => cmd_mollify(&cfg)?,
        Command::Scan => cmd_scan(&cfg, exec)?,
        Command::Asymptotics => cmd_asymptotics(&cfg, exec)?,
    };
    Ok((code, text, cfg.out.clone()))
}

fn thread_cap() -> Result<Option<usize>, String> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("{THREADS_ENV} must be a positive integer, got `{s}`")),
        },
    }
}

#[cfg(feature = "parallel")]
fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, String> {
    match threads {
        None => Ok(f()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| e.to_string()),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<R: Send>(_threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, String> {
    Ok(f())
}

/// Parses `args` (program name first) and runs the chosen command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Outcome {
                    code: EXIT_PASS,
                    stdout: text,
                    stderr: String::new(),
                },
                _ => Outcome {
                    code: EXIT_CONFIG,
                    stdout: String::new(),
                    stderr: text,
                },
            };
        }
    };
    let threads = match thread_cap() {
        Ok(t) => t,
        Err(msg) => return Outcome::error(EXIT_CONFIG, msg),
    };
    let (cmd, args) = match &cli.command {
        Cmd::Certify(a) => (Command::Certify, a),
        Cmd::Report(a) => (Command::Report, a),
        Cmd::Mollify(a) => (Command::Mollify, a),
        Cmd::Scan(a) => (Command::Scan, a),
        Cmd::Asymptotics(a) => (Command::Asymptotics, a),
    };
    let result = match with_threads(threads, || execute(cmd, args, Execution::default())) {
        Ok(r) => r,
        Err(msg) => return Outcome::error(EXIT_ERROR, msg),
    };
    match result {
        Ok((code, text, None)) => Outcome {
            code,
            stdout: text,
            stderr: String::new(),
        },
        Ok((code, text, Some(path))) => match std::fs::write(&path, text) {
            Ok(()) => Outcome {
                code,
                stdout: String::new(),
                stderr: format!("wrote {}\n", path.display()),
            },
            Err(e) => Outcome::error(EXIT_ERROR, format!("cannot write {}: {e}", path.display())),
        },
        Err(Failure::Config(e)) => Outcome::error(EXIT_CONFIG, e),
        Err(Failure::Run(msg)) => Outcome::error(EXIT_ERROR, msg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> Outcome {
        run(std::iter::once("virial-forge").chain(args.iter().copied()))
    }

    fn value<'a>(out: &'a Outcome, key: &str) -> &'a str {
        out.stdout
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{key}=")))
            .unwrap_or_else(|| panic!("no {key} in\n{}", out.stdout))
    }

    #[test]
    fn certify_core_halo_passes() {
        let out = run_args(&[
            "certify",
            "--family",
            "core-halo",
            "--r1",
            "0.2",
            "--r2",
            "1",
            "--r3",
            "2",
            "--p",
            "1",
            "--a",
            "-0.8",
            "--format",
            "kv",
        ]);
        assert_eq!(out.code, EXIT_PASS, "{out:?}");
        assert_eq!(value(&out, "verdict"), "pass");
        let v: f64 = value(&out, "virial").parse().unwrap();
        assert!((v + 0.5007).abs() < 1e-4);
        assert_eq!(value(&out, "config.r3"), fmt_float(2.0));
    }

    #[test]
    fn uniform_fails_on_virial() {
        let out = run_args(&[
            "certify", "--family", "uniform", "--p", "1", "--a", "-0.99", "--format", "kv",
        ]);
        assert_eq!(out.code, EXIT_FAIL);
        assert!(value(&out, "virial_margin").starts_with('-'));
    }

    #[test]
    fn bad_configs_exit_3() {
        for args in [
            vec!["certify", "--family", "uniform", "--n", "3"],
            vec!["certify", "--family", "nonsense"],
            vec!["certify", "--family", "core-halo", "--r1", "5"],
            vec!["certify", "--family", "uniform", "--bogus"],
            vec!["scan", "--family", "uniform", "--points", "0"],
            vec!["scan", "--family", "monotonic"],
            vec!["certify"],
        ] {
            let out = run_args(&args);
            assert_eq!(out.code, EXIT_CONFIG, "{args:?}: {out:?}");
        }
        assert_eq!(run_args(&["--help"]).code, EXIT_PASS);
    }

    #[test]
    fn overlap_exits_2_naming_the_pair() {
        let out = run_args(&[
            "mollify",
            "--family",
            "core-halo",
            "--r2",
            "1.9999",
            "--alpha",
            "0.1",
            "--delta",
            "1e-3",
        ]);
        assert_eq!(out.code, EXIT_ERROR, "{out:?}");
        assert!(
            out.stderr.contains("1.9999") && out.stderr.contains('2'),
            "{}",
            out.stderr
        );
    }
}
