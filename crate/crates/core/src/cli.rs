//! Configuration and command implementations behind the `shrinkflow` binary.
//!
//! Exit codes: `0` success, `1` usage or configuration error, `2` a checked
//! implication failed, `3` numerical failure.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::doubling::{self, AuditOutcome, OrderClass};
use crate::drift_heat::{self, GapChoice, ModeSeries, Verdict};
use crate::error::{Error, Result};
use crate::export;
use crate::flow::{self, FlowConfig, Trajectory};
use crate::grid::GridSpec;
use crate::shrinker::{RadialGraph, Shrinker};
use crate::spectral::{self, ModeVector, Spectrum, SCHEMA_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_COUNTEREXAMPLE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Output formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShrinkerSection {
    pub n: usize,
}

impl Default for ShrinkerSection {
    fn default() -> Self {
        ShrinkerSection { n: 1 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    /// Number of distinct eigenvalue levels; defaults depend on `n`.
    pub cutoff: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    /// Circle nodes, or sphere latitude rings (longitudes are twice that).
    pub grid_size: Option<usize>,
    pub dtau: f64,
    pub tau_end: f64,
    pub sample_dtau: f64,
    /// Smallness cutoff; defaults to `0.2 R`.
    pub c0: Option<f64>,
    pub epsilon: f64,
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection {
            grid_size: None,
            dtau: FlowConfig::DEFAULT_DTAU,
            tau_end: 3.0,
            sample_dtau: 0.01,
            c0: None,
            epsilon: FlowConfig::DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(alias = "L0")]
    pub l0: f64,
    #[serde(alias = "C0")]
    pub c0: f64,
    /// Exponent `A`; derived from `B` and `γ₀` when absent.
    #[serde(alias = "A")]
    pub a: Option<f64>,
    pub gamma0: f64,
    pub trials: usize,
    pub seed: u64,
    pub k_max: usize,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            l0: 0.4,
            c0: 2.0,
            a: None,
            gamma0: doubling::DEFAULT_GAMMA0,
            trials: 1000,
            seed: 0,
            k_max: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

/// Everything a command needs; loaded from a file and overridden by flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub shrinker: ShrinkerSection,
    pub spectrum: SpectrumSection,
    pub flow: FlowSection,
    pub analysis: AnalysisSection,
    pub output: OutputSection,
}

impl ExperimentConfig {
    /// Parse either a JSON document or `section.key = value` lines (`#`
    /// starts a comment; values are JSON literals or bare strings).
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        let value = if trimmed.starts_with('{') {
            serde_json::from_str::<Value>(text).map_err(|e| Error::Parse {
                context: format!("config line {}, column {}", e.line(), e.column()),
                message: e.to_string(),
            })?
        } else {
            parse_key_values(text)?
        };
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        Shrinker::new(self.shrinker.n)?;
        if let Some(c) = self.spectrum.cutoff {
            if c < 4 {
                return Err(Error::Config(format!(
                    "spectrum.cutoff must be at least 4, got {c}"
                )));
            }
        }
        let f = &self.flow;
        for (name, v) in [
            ("flow.dtau", f.dtau),
            ("flow.tau_end", f.tau_end),
            ("flow.sample_dtau", f.sample_dtau),
            ("flow.epsilon", f.epsilon),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(c0) = f.c0 {
            if !(c0 > 0.0) {
                return Err(Error::Config(format!("flow.c0 must be positive, got {c0}")));
            }
        }
        let a = &self.analysis;
        if !(a.l0 > 0.0 && a.l0 < 0.5) {
            return Err(Error::Config(format!(
                "analysis.l0 must lie in (0, 0.5), got {}",
                a.l0
            )));
        }
        if !(a.c0 > 1.0 && a.c0.is_finite()) {
            return Err(Error::Config(format!(
                "analysis.c0 must exceed 1, got {}",
                a.c0
            )));
        }
        if !(a.gamma0 > 0.0) {
            return Err(Error::Config(format!(
                "analysis.gamma0 must be positive, got {}",
                a.gamma0
            )));
        }
        if let Some(x) = a.a {
            if !(x > 0.0) {
                return Err(Error::Config(format!(
                    "analysis.a must be positive, got {x}"
                )));
            }
        }
        if a.trials == 0 || a.k_max == 0 {
            return Err(Error::Config(
                "analysis.trials and analysis.k_max must be positive".into(),
            ));
        }
        if self.output.formats.is_empty() {
            return Err(Error::Config("output.formats must not be empty".into()));
        }
        Ok(())
    }

    pub fn shrinker(&self) -> Result<Shrinker> {
        Shrinker::new(self.shrinker.n)
    }

    pub fn cutoff(&self) -> usize {
        self.spectrum.cutoff.unwrap_or(match self.shrinker.n {
            1 => spectral::DEFAULT_CIRCLE_LEVELS,
            _ => spectral::DEFAULT_SPHERE_LEVELS,
        })
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        let s = self.shrinker()?;
        Ok(match (self.flow.grid_size, s.dimension()) {
            (None, _) => s.default_grid_spec(),
            (Some(nodes), 1) => GridSpec::Circle { nodes },
            (Some(nlat), _) => GridSpec::Sphere {
                nlat,
                nlon: 2 * nlat,
            },
        })
    }

    pub fn flow_config(&self) -> Result<FlowConfig> {
        let s = self.shrinker()?;
        let mut c = FlowConfig::for_shrinker(&s);
        c.dtau = self.flow.dtau;
        c.epsilon = self.flow.epsilon;
        if let Some(c0) = self.flow.c0 {
            c.c0 = c0;
        }
        c.validate()?;
        Ok(c)
    }

    fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }
}

fn parse_key_values(text: &str) -> Result<Value> {
    let mut root = serde_json::Map::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let ctx = || format!("config line {}", idx + 1);
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            context: ctx(),
            message: format!("expected `section.key = value`, found {line:?}"),
        })?;
        let (section, field) = key.trim().split_once('.').ok_or_else(|| Error::Parse {
            context: ctx(),
            message: format!("key {:?} must have the form section.key", key.trim()),
        })?;
        let value = value.trim();
        let parsed = serde_json::from_str::<Value>(value).unwrap_or_else(|_| {
            if field.trim() == "formats" {
                Value::Array(
                    value
                        .split(',')
                        .map(|s| Value::String(s.trim().to_string()))
                        .collect(),
                )
            } else {
                Value::String(value.to_string())
            }
        });
        let entry = root
            .entry(section.trim().to_string())
            .or_insert_with(|| Value::Object(Default::default()));
        match entry {
            Value::Object(map) => {
                map.insert(field.trim().to_string(), parsed);
            }
            _ => unreachable!("sections are always objects"),
        }
    }
    Ok(Value::Object(root))
}

#[derive(Debug, Parser)]
#[command(
    name = "shrinkflow",
    version,
    about = "Spectral and flow experiments near round self-shrinkers"
)]
pub struct Cli {
    /// Configuration file (JSON or `section.key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every randomized battery.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output formats, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub format: Option<Vec<Format>>,
    /// Shrinker dimension (1 or 2).
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Number of eigenvalue levels.
    #[arg(long, global = true)]
    pub cutoff: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AuditKind {
    Monotonicity,
    Semicontinuity,
    Frequency,
    Doubling,
    InfiniteOrder,
    ThreeAnnulus,
    GapEstimate,
    Duhamel,
}

impl AuditKind {
    fn name(self) -> &'static str {
        match self {
            AuditKind::Monotonicity => "monotonicity",
            AuditKind::Semicontinuity => "semicontinuity",
            AuditKind::Frequency => "frequency",
            AuditKind::Doubling => "doubling",
            AuditKind::InfiniteOrder => "infinite-order",
            AuditKind::ThreeAnnulus => "three-annulus",
            AuditKind::GapEstimate => "gap-estimate",
            AuditKind::Duhamel => "duhamel",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the eigenvalues of the drift operator.
    Spectrum,
    /// Run the rescaled flow from an initial graph.
    Evolve {
        /// `zero`, `mode k=K amp=A [m=M] [sin]`, `constant amp=A`, or
        /// `samples PATH`.
        #[arg(long, default_value = "mode k=2 amp=1e-3")]
        initial: String,
        #[arg(long)]
        tau_end: Option<f64>,
        #[arg(long)]
        dtau: Option<f64>,
        #[arg(long)]
        grid_size: Option<usize>,
    },
    /// Run an audit on a trajectory or a randomized battery.
    Audit {
        #[arg(value_enum)]
        which: AuditKind,
        /// Trajectory directory or file written by `evolve`.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Evolve a family of amplitudes and tabulate decay orders.
    Sweep {
        #[arg(long, value_delimiter = ',', default_value = "1e-3,5e-4,2.5e-4")]
        amplitudes: Vec<f64>,
        /// Harmonic degree of the initial mode.
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        tau_end: Option<f64>,
    },
}

/// Result of a successful command.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub counterexample: bool,
    /// Warnings for stderr.
    pub notes: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.counterexample {
            EXIT_COUNTEREXAMPLE
        } else {
            EXIT_OK
        }
    }
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidInput(_)
        | Error::UnsupportedGeometry { .. }
        | Error::Dimension { .. }
        | Error::OutOfContract(_)
        | Error::TooFewSamples { .. }
        | Error::WindowOutOfSpan { .. }
        | Error::Config(_)
        | Error::Parse { .. }
        | Error::Io(_)
        | Error::Json(_) => EXIT_USAGE,
        Error::DegenerateGraph { .. }
        | Error::InsufficientSpectrum(_)
        | Error::Range { .. }
        | Error::ZeroVector
        | Error::Stiffness { .. }
        | Error::UndefinedOrder { .. }
        | Error::InfiniteDistance(_) => EXIT_NUMERICAL,
    }
}

/// Merge the config file and flag overrides.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.analysis.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output.directory = o.clone();
    }
    if let Some(f) = &cli.format {
        cfg.output.formats = f.clone();
    }
    if let Some(n) = cli.n {
        cfg.shrinker.n = n;
    }
    if let Some(c) = cli.cutoff {
        cfg.spectrum.cutoff = Some(c);
    }
    match &cli.command {
        Command::Evolve {
            tau_end,
            dtau,
            grid_size,
            ..
        } => {
            if let Some(t) = tau_end {
                cfg.flow.tau_end = *t;
            }
            if let Some(d) = dtau {
                cfg.flow.dtau = *d;
            }
            if grid_size.is_some() {
                cfg.flow.grid_size = *grid_size;
            }
        }
        Command::Audit {
            trials: Some(t), ..
        } => cfg.analysis.trials = *t,
        Command::Sweep {
            tau_end: Some(t), ..
        } => cfg.flow.tau_end = *t,
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Execute a parsed command line.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let cfg = resolve_config(cli)?;
    match &cli.command {
        Command::Spectrum => cmd_spectrum(&cfg),
        Command::Evolve { initial, .. } => cmd_evolve(&cfg, initial),
        Command::Audit {
            which, trajectory, ..
        } => cmd_audit(&cfg, *which, trajectory.as_deref()),
        Command::Sweep { amplitudes, k, .. } => cmd_sweep(&cfg, amplitudes, *k),
    }
}

fn out_path(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cfg.output.directory.join(name)
}

/// Write `spectrum.json` and `eigenvalues.csv`.
pub fn cmd_spectrum(cfg: &ExperimentConfig) -> Result<Outcome> {
    let shrinker = cfg.shrinker()?;
    let spectrum = spectral::build_spectrum(&shrinker, cfg.cutoff())?;
    let mut files = Vec::new();
    if cfg.wants(Format::Json) {
        let p = out_path(cfg, "spectrum.json");
        export::write_json(&p, &spectrum.to_json())?;
        files.push(p);
    }
    if cfg.wants(Format::Csv) {
        let p = out_path(cfg, "eigenvalues.csv");
        export::write_text(&p, &spectrum.eigenvalue_csv())?;
        files.push(p);
    }
    Ok(Outcome {
        files,
        counterexample: false,
        notes: Vec::new(),
    })
}

/// Initial data for `evolve`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    Zero,
    Mode {
        degree: usize,
        order: Option<usize>,
        sine: bool,
        amplitude: f64,
    },
    Samples(PathBuf),
}

impl InitialSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut words = text.split_whitespace();
        let bad = |m: String| Error::Parse {
            context: format!("initial spec {text:?}"),
            message: m,
        };
        let head = words.next().ok_or_else(|| bad("empty".into()))?;
        match head {
            "zero" => Ok(InitialSpec::Zero),
            "samples" => {
                let p = words.next().ok_or_else(|| bad("missing path".into()))?;
                Ok(InitialSpec::Samples(PathBuf::from(p)))
            }
            "mode" | "constant" => {
                let mut degree = if head == "constant" { Some(0) } else { None };
                let mut order = None;
                let mut sine = false;
                let mut amplitude = None;
                for w in words {
                    if w == "sin" || w == "cos" {
                        sine = w == "sin";
                        continue;
                    }
                    let (k, v) = w
                        .split_once('=')
                        .ok_or_else(|| bad(format!("unexpected token {w:?}")))?;
                    match k {
                        "k" | "l" => {
                            degree = Some(v.parse().map_err(|e| bad(format!("degree: {e}")))?)
                        }
                        "m" => order = Some(v.parse().map_err(|e| bad(format!("order: {e}")))?),
                        "amp" => {
                            amplitude = Some(v.parse().map_err(|e| bad(format!("amplitude: {e}")))?)
                        }
                        _ => return Err(bad(format!("unknown key {k:?}"))),
                    }
                }
                Ok(InitialSpec::Mode {
                    degree: degree.ok_or_else(|| bad("missing k=".into()))?,
                    order,
                    sine,
                    amplitude: amplitude.ok_or_else(|| bad("missing amp=".into()))?,
                })
            }
            other => Err(bad(format!("unknown recipe {other:?}"))),
        }
    }

    pub fn build(&self, shrinker: Shrinker, spec: GridSpec) -> Result<RadialGraph> {
        let grid = shrinker.grid(spec)?;
        match self {
            InitialSpec::Zero => RadialGraph::zero(shrinker, grid),
            InitialSpec::Mode {
                degree,
                order,
                sine,
                amplitude,
            } => {
                let order = match shrinker.dimension() {
                    1 => *degree,
                    _ => order.unwrap_or(0),
                };
                let p = flow::mode_profile(&grid, *degree, order, *sine)?;
                RadialGraph::new(
                    shrinker,
                    grid,
                    p.into_iter().map(|v| v * amplitude).collect(),
                )
            }
            InitialSpec::Samples(path) => {
                let text = std::fs::read_to_string(path)?;
                let samples = parse_samples(&text)?;
                RadialGraph::new(shrinker, grid, samples)
            }
        }
    }
}

fn parse_samples(text: &str) -> Result<Vec<f64>> {
    if text.trim_start().starts_with('[') {
        return serde_json::from_str(text).map_err(|e| Error::Parse {
            context: format!("samples line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        });
    }
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        for tok in line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
        {
            out.push(tok.parse().map_err(|e| Error::Parse {
                context: format!("samples line {}", idx + 1),
                message: format!("{e}: {tok:?}"),
            })?);
        }
    }
    Ok(out)
}

/// Write `trajectory.csv`, `manifest.json` and `states.json`.
pub fn cmd_evolve(cfg: &ExperimentConfig, initial: &str) -> Result<Outcome> {
    let spec = InitialSpec::parse(initial)?;
    let shrinker = cfg.shrinker()?;
    let graph = spec.build(shrinker, cfg.grid_spec()?)?;
    crate::shrinker::graph_geometry(&graph).map_err(|e| match e {
        Error::DegenerateGraph { node, radius } => Error::InvalidInput(format!(
            "initial graph is not embedded: radius {radius} at node {node}"
        )),
        other => other,
    })?;
    let fc = cfg.flow_config()?;
    let traj = flow::run(&graph, &fc, cfg.flow.tau_end, cfg.flow.sample_dtau)?;
    let mut notes = Vec::new();
    if let Some(t) = traj.step_log.halted_at {
        notes.push(format!(
            "graph left the small-graph regime at tau = {t}; distance is infinite"
        ));
    }
    let mut files = Vec::new();
    if cfg.wants(Format::Csv) {
        let p = out_path(cfg, "trajectory.csv");
        export::write_text(&p, &traj.to_csv())?;
        files.push(p);
    }
    if cfg.wants(Format::Json) {
        let mut manifest = traj.manifest();
        manifest["initial"] = initial.into();
        manifest["tau_end"] = cfg.flow.tau_end.into();
        manifest["sample_dtau"] = cfg.flow.sample_dtau.into();
        manifest["left_small_graph_regime"] = traj.step_log.halted_at.is_some().into();
        manifest["experiment"] = serde_json::to_value(cfg)?;
        let p = out_path(cfg, "manifest.json");
        export::write_json(&p, &manifest)?;
        files.push(p);
        let p = out_path(cfg, "states.json");
        export::write_json(&p, &traj.states_json()?)?;
        files.push(p);
    }
    Ok(Outcome {
        files,
        counterexample: false,
        notes,
    })
}

/// Load a trajectory from a directory written by `evolve` or from a single
/// CSV or states JSON file.
pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    let file = if path.is_dir() {
        let states = path.join("states.json");
        if states.exists() {
            states
        } else {
            path.join("trajectory.csv")
        }
    } else {
        path.to_path_buf()
    };
    let text = std::fs::read_to_string(&file)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", file.display())))?;
    match file.extension().and_then(|e| e.to_str()) {
        Some("json") => Trajectory::from_states_json(&text),
        _ => Trajectory::from_csv(&text),
    }
}

fn exponent_a(cfg: &ExperimentConfig, choice: Option<&GapChoice>) -> Result<f64> {
    match (cfg.analysis.a, choice) {
        (Some(a), _) => Ok(a),
        (None, Some(c)) => doubling::exponent_from_b(c.b, cfg.analysis.gamma0),
        (None, None) => Err(Error::Config("analysis.a is required".into())),
    }
}

/// Run one audit and write `audit_<name>.json`.
pub fn cmd_audit(
    cfg: &ExperimentConfig,
    which: AuditKind,
    trajectory: Option<&Path>,
) -> Result<Outcome> {
    let needs_traj = matches!(
        which,
        AuditKind::Monotonicity
            | AuditKind::Semicontinuity
            | AuditKind::Frequency
            | AuditKind::Doubling
            | AuditKind::InfiniteOrder
    );
    let traj = if needs_traj {
        let p = trajectory
            .ok_or_else(|| Error::Config(format!("audit {} needs --trajectory", which.name())))?;
        Some(load_trajectory(p)?)
    } else {
        None
    };
    let shrinker = cfg.shrinker()?;
    let (report, violated) = match which {
        AuditKind::Monotonicity => {
            let t = traj.as_ref().expect("loaded above");
            let tol = cfg.flow_config()?.excess_tolerance;
            let r = flow::monotonicity_audit(t, tol)?;
            let bad = r.verdict.is_violation();
            (serde_json::to_value(r)?, bad)
        }
        AuditKind::Semicontinuity => {
            let r =
                flow::semicontinuity_audit(traj.as_ref().expect("loaded above"), cfg.flow.epsilon)?;
            let bad = r.verdict.is_violation();
            (serde_json::to_value(r)?, bad)
        }
        AuditKind::Frequency => frequency_scan(cfg, traj.as_ref().expect("loaded above"))?,
        AuditKind::Doubling => {
            let t = traj.as_ref().expect("loaded above");
            let spectrum = spectral::build_spectrum(&shrinker, cfg.cutoff())?;
            let choice = drift_heat::choose_gap_l(&spectrum, cfg.analysis.l0, cfg.analysis.c0)?;
            let a = exponent_a(cfg, Some(&choice))?;
            let mut audit = doubling::doubling_certificate(t, cfg.analysis.l0, a, cfg.analysis.c0)?;
            audit.constants.b = Some(choice.b);
            let bad = audit.verdict == AuditOutcome::Violated;
            (audit.to_json(), bad)
        }
        AuditKind::InfiniteOrder => {
            let r = doubling::infinite_order_classifier(
                traj.as_ref().expect("loaded above"),
                cfg.analysis.k_max,
            )?;
            let verdict = match r.class {
                OrderClass::Zero => "zero",
                OrderClass::FiniteOrder { .. } => "finite_order",
                OrderClass::Undetermined => "undetermined",
            };
            let mut v = serde_json::to_value(&r)?;
            v["verdict"] = verdict.into();
            (v, false)
        }
        AuditKind::ThreeAnnulus => three_annulus_battery(cfg)?,
        AuditKind::GapEstimate => gap_estimate_battery(cfg)?,
        AuditKind::Duhamel => duhamel_battery(cfg)?,
    };
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "audit": which.name(),
        "shrinker": shrinker,
        "seed": cfg.analysis.seed,
        "counterexample": violated,
        "report": report,
    });
    let p = out_path(cfg, &format!("audit_{}.json", which.name()));
    export::write_json(&p, &doc)?;
    Ok(Outcome {
        files: vec![p],
        counterexample: violated,
        notes: Vec::new(),
    })
}

fn frequency_scan(cfg: &ExperimentConfig, traj: &Trajectory) -> Result<(Value, bool)> {
    let shrinker = cfg.shrinker()?;
    let spectrum = spectral::build_spectrum(&shrinker, cfg.cutoff())?;
    let choice = drift_heat::choose_gap_l(&spectrum, cfg.analysis.l0, cfg.analysis.c0)?;
    let a = exponent_a(cfg, Some(&choice))?;
    let (start, end) = traj.span();
    let l0 = cfg.analysis.l0;
    let mut windows = 0;
    let mut admissible = 0;
    let mut violations = 0;
    let mut min_margin = f64::INFINITY;
    for s in &traj.states {
        if s.tau < start || s.tau + 1.0f64.max(2.0 * l0) > end + 1e-9 {
            continue;
        }
        for j in 0..doubling::SCALE_SCAN_POINTS {
            let l = 0.5 * l0 + 0.5 * l0 * j as f64 / (doubling::SCALE_SCAN_POINTS - 1) as f64;
            let at = GapChoice { l, ..choice };
            let r = doubling::frequency_window_check(traj, s.tau, &at, a, cfg.flow.epsilon)?;
            windows += 1;
            match r.verdict {
                Verdict::Holds => {
                    admissible += 1;
                    min_margin = min_margin.min(r.margin);
                }
                Verdict::Violated => {
                    admissible += 1;
                    violations += 1;
                }
                _ => {}
            }
        }
    }
    Ok((
        json!({
            "hypotheses": admissible > 0,
            "quantities": {"windows": windows, "admissible": admissible, "A": a, "L0": l0, "C0": cfg.analysis.c0},
            "margin": if min_margin.is_finite() { Value::from(min_margin) } else { Value::Null },
            "violations": violations,
            "verdict": if violations > 0 { "violated" } else { "holds" },
        }),
        violations > 0,
    ))
}

/// Uniform coefficients on the modes of degree at most `max_degree`, each
/// level switched on with probability ½ (at least one stays on).
pub fn random_band_vector(
    spectrum: &Spectrum,
    max_degree: usize,
    rng: &mut ChaCha8Rng,
) -> ModeVector {
    let levels: Vec<_> = spectrum
        .levels()
        .iter()
        .filter(|l| l.degree <= max_degree)
        .copied()
        .collect();
    let mut on: Vec<bool> = levels.iter().map(|_| rng.random_bool(0.5)).collect();
    if !on.iter().any(|b| *b) {
        let i = rng.random_range(0..levels.len());
        on[i] = true;
    }
    let mut c = vec![0.0; spectrum.len()];
    for (level, active) in levels.iter().zip(&on) {
        for v in &mut c[level.start..level.start + level.multiplicity] {
            let x: f64 = rng.random_range(-1.0..1.0);
            *v = if *active { x } else { 0.0 };
        }
    }
    ModeVector::new(spectrum, c).expect("finite coefficients of the right length")
}

fn three_annulus_battery(cfg: &ExperimentConfig) -> Result<(Value, bool)> {
    let shrinker = cfg.shrinker()?;
    let spectrum = spectral::build_spectrum(&shrinker, cfg.cutoff())?;
    let delta = drift_heat::certified_delta(&spectrum);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.analysis.seed);
    let max_degree = 6.min(spectrum.cutoff() - 1);
    let (mut dichotomy_violations, mut hyp, mut annulus_violations) = (0, 0, 0);
    let mut min_margin = f64::INFINITY;
    for _ in 0..cfg.analysis.trials {
        let a = random_band_vector(&spectrum, max_degree, &mut rng);
        let t: f64 = rng.random_range(-1.0..1.0);
        let d = drift_heat::zero_mode_dichotomy(&a, t)?;
        if d.verdict.is_violation() {
            dichotomy_violations += 1;
        }
        min_margin = min_margin.min(d.margin);
        let delta1 = rng.random_range(0.0..delta);
        let r = drift_heat::three_annulus_check(&a, t, delta1)?;
        if r.hypotheses {
            hyp += 1;
        }
        if r.verdict.is_violation() {
            annulus_violations += 1;
        }
    }
    let bad = dichotomy_violations + annulus_violations > 0;
    Ok((
        json!({
            "hypotheses": true,
            "quantities": {
                "trials": cfg.analysis.trials,
                "certified_delta": delta,
                "dichotomy_violations": dichotomy_violations,
                "growth_hypothesis_met": hyp,
                "three_annulus_violations": annulus_violations,
            },
            "margin": min_margin,
            "verdict": if bad { "violated" } else { "holds" },
        }),
        bad,
    ))
}

/// Random coefficients on the levels up to `2·threshold + 2`, scaled so that
/// `I(0) ≤ 2C₀` and `I(2L) ≤ 1/(2C₀)`; half of the draws meet one of the
/// hypotheses with equality.
pub fn random_admissible_vector(
    spectrum: &Spectrum,
    choice: &GapChoice,
    rng: &mut ChaCha8Rng,
) -> ModeVector {
    let top = spectrum
        .levels()
        .iter()
        .filter(|l| l.eigenvalue <= 2.0 * choice.threshold + 2.0)
        .map(|l| l.degree)
        .max()
        .unwrap_or(0);
    let a = random_band_vector(spectrum, top, rng);
    let n0 = drift_heat::norm_at(&a, 0.0);
    let n2 = drift_heat::norm_at(&a, 2.0 * choice.l);
    let scale = (2.0 * choice.c0 / n0).min(1.0 / (2.0 * choice.c0 * n2));
    let factor = if rng.random_bool(0.5) {
        1.0
    } else {
        rng.random_range(0.05..1.0)
    };
    a.scaled(scale * factor)
}

fn gap_estimate_battery(cfg: &ExperimentConfig) -> Result<(Value, bool)> {
    let shrinker = cfg.shrinker()?;
    let spectrum = spectral::build_spectrum(&shrinker, cfg.cutoff())?;
    let choice = drift_heat::choose_gap_l(&spectrum, cfg.analysis.l0, cfg.analysis.c0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.analysis.seed);
    let mut violations = 0;
    let mut cosh_failures = 0;
    let mut min_margin = f64::INFINITY;
    for _ in 0..cfg.analysis.trials {
        let a = random_admissible_vector(&spectrum, &choice, &mut rng);
        let r = drift_heat::quantitative_three_annulus(&a, &choice);
        if r.verdict.is_violation() {
            violations += 1;
        }
        if !r.quantities.cosh_sum_holds {
            cosh_failures += 1;
        }
        min_margin = min_margin.min(r.margin);
    }
    let bad = violations + cosh_failures > 0;
    Ok((
        json!({
            "hypotheses": true,
            "quantities": {
                "trials": cfg.analysis.trials,
                "choice": choice,
                "gap_certificate": choice.gap_certificate_holds(),
                "b_certificate": choice.b_certificate_holds(),
                "violations": violations,
                "cosh_failures": cosh_failures,
            },
            "margin": min_margin,
            "verdict": if bad { "violated" } else { "holds" },
        }),
        bad,
    ))
}

/// Smooth source `aᵢ(t) = αᵢ + βᵢ sin(ωᵢt + θᵢ)` on the modes of degree at
/// most `max_degree`, zero elsewhere.
pub fn random_smooth_source(
    spectrum: &Spectrum,
    max_degree: usize,
    dt: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ModeSeries> {
    let params: Vec<Option<[f64; 4]>> = spectrum
        .labels()
        .iter()
        .map(|l| {
            (l.degree <= max_degree).then(|| {
                [
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(0.5..6.0),
                    rng.random_range(0.0..std::f64::consts::TAU),
                ]
            })
        })
        .collect();
    ModeSeries::sample(spectrum, 1.0, dt, |t| {
        params
            .iter()
            .map(|p| p.map_or(0.0, |[a, b, w, th]| a + b * (w * t + th).sin()))
            .collect()
    })
}

fn duhamel_battery(cfg: &ExperimentConfig) -> Result<(Value, bool)> {
    let shrinker = cfg.shrinker()?;
    let cutoff = cfg.cutoff();
    let coarse = spectral::build_spectrum(&shrinker, cutoff)?;
    let fine = spectral::build_spectrum(&shrinker, 2 * cutoff)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.analysis.seed);
    let dt = 1e-3;
    let trials = cfg.analysis.trials.min(50);
    let max_degree = 3;
    let mut max_residual: f64 = 0.0;
    let mut c_coarse: f64 = 0.0;
    let mut c_fine: f64 = 0.0;
    for _ in 0..trials {
        let f = random_smooth_source(&coarse, max_degree, dt, &mut rng)?;
        let w = drift_heat::duhamel_inverse(&f, 1.0)?;
        for (_, r) in drift_heat::duhamel_residual(&w, &f)? {
            max_residual = max_residual.max(r);
        }
        c_coarse = c_coarse.max(drift_heat::duhamel_bound_constant(&w, &f));
        let padded = pad_series(&f, &fine)?;
        let wf = drift_heat::duhamel_inverse(&padded, 1.0)?;
        c_fine = c_fine.max(drift_heat::duhamel_bound_constant(&wf, &padded));
    }
    let drift = (c_fine - c_coarse).abs() / c_coarse;
    let bad = max_residual > 1e-5 || drift > 0.1;
    Ok((
        json!({
            "hypotheses": true,
            "quantities": {
                "trials": trials,
                "dt": dt,
                "max_residual": max_residual,
                "bound_constant": c_coarse,
                "bound_constant_refined": c_fine,
                "relative_change": drift,
            },
            "margin": 1e-5 - max_residual,
            "verdict": if bad { "violated" } else { "holds" },
        }),
        bad,
    ))
}

/// Same source on a larger spectrum, zero on the new modes.
pub fn pad_series(f: &ModeSeries, target: &Spectrum) -> Result<ModeSeries> {
    let modes = f
        .modes()
        .iter()
        .map(|m| {
            let mut c = m.coefficients().to_vec();
            c.resize(target.len(), 0.0);
            ModeVector::new(target, c)
        })
        .collect::<Result<Vec<_>>>()?;
    ModeSeries::new(f.times().to_vec(), modes)
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    amplitude: f64,
    decay_order: Option<f64>,
    deviation: Option<f64>,
    doubling_constant: Option<f64>,
    final_distance: f64,
    halted: bool,
}

/// Evolve `amp · mode_k` for each amplitude; write `sweep.csv` and
/// `sweep.json`.
pub fn cmd_sweep(cfg: &ExperimentConfig, amplitudes: &[f64], k: usize) -> Result<Outcome> {
    if amplitudes.is_empty() {
        return Err(Error::Config("sweep needs at least one amplitude".into()));
    }
    let shrinker = cfg.shrinker()?;
    let fc = cfg.flow_config()?;
    let mut rows = Vec::new();
    for &amp in amplitudes {
        let spec = InitialSpec::Mode {
            degree: k,
            order: None,
            sine: false,
            amplitude: amp,
        };
        let graph = spec.build(shrinker, cfg.grid_spec()?)?;
        let traj = flow::run(&graph, &fc, cfg.flow.tau_end, cfg.flow.sample_dtau)?;
        let order = flow::decay_order(&traj, 1.0).ok();
        let dc = doubling::doubling_constant(&traj)
            .ok()
            .filter(|d| !d.degenerate)
            .map(|d| d.value);
        rows.push(SweepRow {
            amplitude: amp,
            decay_order: order,
            deviation: order.map(|o| o - level_rate(&shrinker, k)),
            doubling_constant: dc,
            final_distance: traj.states.last().map_or(f64::NAN, |s| s.distance),
            halted: traj.step_log.halted_at.is_some(),
        });
    }
    let mut files = Vec::new();
    if cfg.wants(Format::Csv) {
        let opt = |v: Option<f64>| v.map(export::fmt_real).unwrap_or_default();
        let mut csv = String::from(
            "amplitude,decay_order,deviation,doubling_constant,final_distance,halted\n",
        );
        for r in &rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                export::fmt_real(r.amplitude),
                opt(r.decay_order),
                opt(r.deviation),
                opt(r.doubling_constant),
                export::fmt_real(r.final_distance),
                r.halted
            ));
        }
        let p = out_path(cfg, "sweep.csv");
        export::write_text(&p, &csv)?;
        files.push(p);
    }
    if cfg.wants(Format::Json) {
        let p = out_path(cfg, "sweep.json");
        export::write_json(
            &p,
            &json!({
                "schema_version": SCHEMA_VERSION,
                "degree": k,
                "expected_order": level_rate(&shrinker, k),
                "rows": rows,
                "experiment": cfg,
            }),
        )?;
        files.push(p);
    }
    Ok(Outcome {
        files,
        counterexample: false,
        notes: Vec::new(),
    })
}

fn level_rate(shrinker: &Shrinker, k: usize) -> f64 {
    spectral::level_eigenvalue(shrinker, k)
}
