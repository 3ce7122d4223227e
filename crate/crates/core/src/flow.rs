//! Rescaled mean curvature flow of radial graphs over a round shrinker.
//!
//! A graph `{p + u(p)ν(p)}` moves by `∂_τ u = Mu`, the normal velocity
//! `−H + ½⟨x, ν⟩` converted to radial height speed. `Mu = Lu + Qu` where `L`
//! is the drift operator and `Q` collects the nonlinear terms. Time stepping
//! treats `L` exactly through the grid transform (integrating-factor RK4) and
//! `Q` explicitly.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::fmt_real;
use crate::grid::{Grid, GridSpec, LocalDerivatives};
use crate::shrinker::{self, gaussian_weight, RadialGraph, Shrinker};
use crate::spectral::SCHEMA_VERSION;

/// Solver and cutoff settings for a flow run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    /// Nominal time step.
    pub dtau: f64,
    /// Smallness cutoff on `sup|u| + sup|∇u| + sup|Hess u|`.
    pub c0: f64,
    /// Threshold on `D_Σ` and on the excess drop used by the semicontinuity
    /// audit.
    pub epsilon: f64,
    /// Consecutive halvings allowed before giving up on a step.
    pub max_rejections: usize,
    /// Largest accepted increase of the excess per step.
    pub excess_tolerance: f64,
}

impl FlowConfig {
    pub const DEFAULT_DTAU: f64 = 1e-3;
    pub const DEFAULT_EPSILON: f64 = 0.05;

    /// Defaults scaled to the shrinker (`c₀ = 0.2 R`).
    pub fn for_shrinker(shrinker: &Shrinker) -> Self {
        FlowConfig {
            dtau: Self::DEFAULT_DTAU,
            c0: 0.2 * shrinker.radius(),
            epsilon: Self::DEFAULT_EPSILON,
            max_rejections: 5,
            excess_tolerance: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.dtau) {
            return Err(Error::Config(format!(
                "dtau must be positive, got {}",
                self.dtau
            )));
        }
        if !(self.c0 > 0.0) {
            return Err(Error::Config(format!(
                "c0 must be positive, got {}",
                self.c0
            )));
        }
        if !positive(self.epsilon) {
            return Err(Error::Config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.excess_tolerance >= 0.0) {
            return Err(Error::Config(
                "excess tolerance must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Largest admissible step: ten times the inverse of the largest Laplacian
/// eigenvalue carried by the grid.
pub fn max_time_step(grid: &Grid) -> f64 {
    let r2 = 2.0 * grid.dimension() as f64;
    10.0 * r2 / grid.max_laplacian_eigenvalue()
}

/// Samples of `amp · h` where `h` is the real harmonic of the given degree,
/// order and parity scaled to unit supremum: `cos kθ`, `sin kθ` on the
/// circle, the Legendre polynomial `P_l(z)` for zonal harmonics on the sphere.
/// Non-zonal sphere harmonics are scaled by their largest grid value.
pub fn mode_profile(grid: &Grid, degree: usize, order: usize, sine: bool) -> Result<Vec<f64>> {
    let h = grid.unit_harmonic(degree, order, sine)?;
    let scale = match grid.dimension() {
        1 if degree == 0 => (2.0 * PI).sqrt(),
        1 => PI.sqrt(),
        _ if order == 0 => (4.0 * PI / (2.0 * degree as f64 + 1.0)).sqrt(),
        _ => 1.0 / h.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
    };
    Ok(h.into_iter().map(|v| v * scale).collect())
}

fn velocity_from_derivatives(graph: &RadialGraph, derivs: &[LocalDerivatives]) -> Result<Vec<f64>> {
    let geom = shrinker::geometry_from_derivatives(graph, derivs)?;
    let r0 = graph.shrinker().radius();
    Ok(geom
        .iter()
        .zip(derivs)
        .map(|(g, d)| -g.speed_factor * g.mean_curvature + 0.5 * (r0 + d.value))
        .collect())
}

/// `Mu = w_u(−H + ½⟨x, ν⟩)`, the height speed of the rescaled flow at
/// every node.
pub fn rescaled_velocity(graph: &RadialGraph) -> Result<Vec<f64>> {
    let derivs = graph.derivatives()?;
    velocity_from_derivatives(graph, &derivs)
}

/// `Lu = Δ_Σu + u` from precomputed derivatives (the drift term vanishes on
/// a round shrinker).
fn linear_part(shrinker: &Shrinker, derivs: &[LocalDerivatives]) -> Vec<f64> {
    let r2 = 2.0 * shrinker.dimension() as f64;
    derivs.iter().map(|d| d.laplacian / r2 + d.value).collect()
}

fn q_from_derivatives(graph: &RadialGraph, derivs: &[LocalDerivatives]) -> Result<Vec<f64>> {
    let m = velocity_from_derivatives(graph, derivs)?;
    let l = linear_part(graph.shrinker(), derivs);
    Ok(m.iter().zip(&l).map(|(a, b)| a - b).collect())
}

/// Nonlinear remainder `Qu = Mu − Lu`.
pub fn q_remainder(graph: &RadialGraph) -> Result<Vec<f64>> {
    let derivs = graph.derivatives()?;
    q_from_derivatives(graph, &derivs)
}

/// `Qu` together with the smallest `C` for which
/// `|Qu| ≤ C(|u| + |∇u|)² + C(|u| + |∇u|)|Hess u|` holds at every node.
#[derive(Debug, Clone, Serialize)]
pub struct QReport {
    pub values: Vec<f64>,
    pub sup_norm: f64,
    pub empirical_constant: f64,
}

pub fn q_remainder_report(graph: &RadialGraph) -> Result<QReport> {
    let derivs = graph.derivatives()?;
    let values = q_from_derivatives(graph, &derivs)?;
    let r = graph.shrinker().radius();
    let mut c: f64 = 0.0;
    for (q, d) in values.iter().zip(&derivs) {
        let low = d.value.abs() + d.grad_sq.sqrt() / r;
        let bound = low * low + low * d.hess_norm / (r * r);
        if bound > 0.0 {
            c = c.max(q.abs() / bound);
        }
    }
    Ok(QReport {
        sup_norm: values.iter().fold(0.0, |m, v| m.max(v.abs())),
        values,
        empirical_constant: c,
    })
}

/// `D_Σ`: the weighted `L²` norm of `u` when the graph passes the smallness
/// test with cutoff `c0`, and `+∞` otherwise.
pub fn distance(graph: &RadialGraph, c0: f64) -> f64 {
    match graph.proxy_norm() {
        Ok(p) if p <= c0 => graph.weighted_l2(),
        _ => f64::INFINITY,
    }
}

/// `∫_M |H − ½⟨x, ν⟩|² ρ`, the rate at which the Gaussian area decreases.
pub fn dissipation(graph: &RadialGraph) -> Result<f64> {
    let geom = shrinker::graph_geometry(graph)?;
    let n = graph.shrinker().dimension();
    Ok(geom
        .iter()
        .zip(graph.grid().unit_weights())
        .map(|(g, w)| {
            let v = -g.mean_curvature + 0.5 * g.support;
            w * g.area_element * gaussian_weight(&g.position, n) * v * v
        })
        .sum())
}

/// One sampled point of a flow.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub tau: f64,
    pub distance: f64,
    pub excess: f64,
    pub gaussian_area: f64,
    /// Share of `∫u²` carried by the unstable modes (degree ≤ 1).
    pub unstable_fraction: f64,
    /// The graph itself; absent for trajectories loaded from CSV.
    pub graph: Option<RadialGraph>,
}

impl FlowState {
    pub fn new(graph: RadialGraph, tau: f64, c0: f64) -> Result<Self> {
        let derivs = graph.derivatives()?;
        let excess = shrinker::excess_from_derivatives(&graph, &derivs)?;
        let unstable_fraction = graph.grid().low_degree_fraction(graph.samples(), 1)?;
        Ok(FlowState {
            tau,
            distance: distance(&graph, c0),
            excess,
            gaussian_area: graph.shrinker().gaussian_area() + excess,
            unstable_fraction,
            graph: Some(graph),
        })
    }

    /// A state known only through its scalar summaries.
    pub fn summary(
        tau: f64,
        distance: f64,
        excess: f64,
        gaussian_area: f64,
        unstable_fraction: f64,
    ) -> Self {
        FlowState {
            tau,
            distance,
            excess,
            gaussian_area,
            unstable_fraction,
            graph: None,
        }
    }

    fn graph(&self) -> Result<&RadialGraph> {
        self.graph.as_ref().ok_or_else(|| {
            Error::InvalidInput(format!("state at tau = {} has no graph samples", self.tau))
        })
    }
}

/// Solver statistics of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub accepted: usize,
    pub rejected: usize,
    pub min_step: f64,
    pub max_step: f64,
    /// Time at which the graph left the small-graph regime, if it did.
    pub halted_at: Option<f64>,
}

impl StepLog {
    fn record(&mut self, h: f64, rejections: usize) {
        if self.accepted == 0 {
            self.min_step = h;
            self.max_step = h;
        } else {
            self.min_step = self.min_step.min(h);
            self.max_step = self.max_step.max(h);
        }
        self.accepted += 1;
        self.rejected += rejections;
    }
}

/// Time-ordered samples of a flow.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<FlowState>,
    pub step_log: StepLog,
    pub config: Option<FlowConfig>,
}

/// Outcome of one accepted step.
#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    pub dtau: f64,
    pub rejections: usize,
}

struct Stepper<'a> {
    shrinker: Shrinker,
    grid: &'a std::sync::Arc<Grid>,
}

impl Stepper<'_> {
    fn propagate(&self, u: &[f64], h: f64) -> Result<Vec<f64>> {
        let r2 = 2.0 * self.shrinker.dimension() as f64;
        self.grid
            .apply_multiplier(u, |kappa| (h * (1.0 - kappa / r2)).exp())
    }

    fn nonlinear(&self, u: &[f64]) -> Result<Vec<f64>> {
        let graph = RadialGraph::new(self.shrinker, self.grid.clone(), u.to_vec())?;
        graph.check_finite()?;
        q_remainder(&graph)
    }

    /// Lawson RK4 for `u' = Lu + Q(u)` with the linear flow exact.
    fn advance(&self, u: &[f64], h: f64) -> Result<Vec<f64>> {
        let axpy = |x: &[f64], a: f64, y: &[f64]| -> Vec<f64> {
            x.iter().zip(y).map(|(p, q)| p + a * q).collect()
        };
        let half = 0.5 * h;
        let k1 = self.nonlinear(u)?;
        let u_half = self.propagate(u, half)?;
        let k1_half = self.propagate(&k1, half)?;
        let k2 = self.nonlinear(&axpy(&u_half, half, &k1_half))?;
        let k3 = self.nonlinear(&axpy(&u_half, half, &k2))?;
        let k3_half = self.propagate(&k3, half)?;
        let u_full = self.propagate(&u_half, half)?;
        let k4 = self.nonlinear(&axpy(&u_full, h, &k3_half))?;
        let k1_full = self.propagate(&k1_half, half)?;
        let k23_half = self.propagate(&axpy(&k2, 1.0, &k3), half)?;
        Ok((0..u.len())
            .map(|i| u_full[i] + h / 6.0 * (k1_full[i] + 2.0 * k23_half[i] + k4[i]))
            .collect())
    }
}

/// Advance a state by `dtau`, halving the step whenever the excess rises by
/// more than the configured tolerance. Returns the new state and the step
/// actually taken.
pub fn step(state: &FlowState, dtau: f64, config: &FlowConfig) -> Result<(FlowState, StepOutcome)> {
    let graph = state.graph()?;
    let grid = graph.grid();
    let limit = max_time_step(grid);
    if !(dtau > 0.0 && dtau <= limit) {
        return Err(Error::OutOfContract(format!(
            "time step {dtau} outside (0, {limit}] for this grid"
        )));
    }
    let stepper = Stepper {
        shrinker: *graph.shrinker(),
        grid,
    };
    let mut h = dtau;
    for rejections in 0..=config.max_rejections {
        let u = stepper.advance(graph.samples(), h)?;
        let next = FlowState::new(graph.with_samples(u)?, state.tau + h, config.c0)?;
        if next.excess <= state.excess + config.excess_tolerance {
            return Ok((
                next,
                StepOutcome {
                    dtau: h,
                    rejections,
                },
            ));
        }
        h *= 0.5;
    }
    Err(Error::Stiffness {
        tau: state.tau,
        attempts: config.max_rejections + 1,
    })
}

/// Integrate from `initial` to `tau_end`, recording a state every
/// `sample_dtau`. Stops early, keeping the offending state, once the graph
/// leaves the small-graph regime.
pub fn run(
    initial: &RadialGraph,
    config: &FlowConfig,
    tau_end: f64,
    sample_dtau: f64,
) -> Result<Trajectory> {
    config.validate()?;
    if !(tau_end > 0.0) || !(sample_dtau > 0.0) || !tau_end.is_finite() {
        return Err(Error::InvalidInput(format!(
            "need tau_end > 0 and sample_dtau > 0, got {tau_end} and {sample_dtau}"
        )));
    }
    let first = FlowState::new(initial.clone(), 0.0, config.c0)?;
    let mut log = StepLog::default();
    if first.distance.is_infinite() {
        log.halted_at = Some(0.0);
        return Ok(Trajectory {
            states: vec![first],
            step_log: log,
            config: Some(*config),
        });
    }
    let samples = (tau_end / sample_dtau - 1e-9).ceil() as usize;
    let mut states = vec![first];
    let mut current = states[0].clone();
    'outer: for k in 1..=samples {
        let target = (k as f64 * sample_dtau).min(tau_end);
        while target - current.tau > 1e-12 * target.max(1.0) {
            let remaining = target - current.tau;
            let pieces = (remaining / config.dtau - 1e-9).ceil().max(1.0);
            let h = remaining / pieces;
            let (next, outcome) = step(&current, h, config)?;
            log.record(outcome.dtau, outcome.rejections);
            current = next;
            if current.distance.is_infinite() {
                log.halted_at = Some(current.tau);
                states.push(current.clone());
                break 'outer;
            }
        }
        current.tau = target;
        states.push(current.clone());
    }
    Ok(Trajectory {
        states,
        step_log: log,
        config: Some(*config),
    })
}

/// Columns of the trajectory CSV.
pub const TRAJECTORY_COLUMNS: [&str; 6] = [
    "tau",
    "distance",
    "excess",
    "gaussian_area",
    "decay_order",
    "unstable_fraction",
];

#[derive(Serialize, Deserialize)]
struct StateDoc {
    tau: f64,
    samples: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct StatesDoc {
    schema_version: u32,
    shrinker: Shrinker,
    grid: GridSpec,
    c0: f64,
    states: Vec<StateDoc>,
}

impl Trajectory {
    /// Trajectory built from scalar summaries only.
    pub fn from_states(states: Vec<FlowState>) -> Result<Self> {
        let traj = Trajectory {
            states,
            step_log: StepLog::default(),
            config: None,
        };
        traj.check_times()?;
        Ok(traj)
    }

    /// A trajectory with prescribed distances and zero excess, for audits of
    /// synthetic distance profiles.
    pub fn from_distances(taus: &[f64], distances: &[f64]) -> Result<Self> {
        if taus.len() != distances.len() {
            return Err(Error::Dimension {
                expected: taus.len(),
                found: distances.len(),
            });
        }
        Self::from_states(
            taus.iter()
                .zip(distances)
                .map(|(&t, &d)| FlowState::summary(t, d, 0.0, f64::NAN, 0.0))
                .collect(),
        )
    }

    /// Graphs `u(s) = Σ aᵢe^{-μᵢs}φᵢ` of the linear drift heat flow,
    /// sampled at `times`, with distances cut off at `c0`.
    pub fn from_linear(a: &crate::spectral::ModeVector, times: &[f64], c0: f64) -> Result<Self> {
        let spectrum = a.spectrum();
        let mut states = Vec::with_capacity(times.len());
        for &t in times {
            let at = crate::drift_heat::evolve_linear(a, t)?;
            let u = crate::spectral::synthesize(&at);
            let graph = RadialGraph::new(*spectrum.shrinker(), spectrum.grid().clone(), u)?;
            states.push(FlowState::new(graph, t, c0)?);
        }
        Self::from_states(states)
    }

    fn check_times(&self) -> Result<()> {
        if self.states.is_empty() {
            return Err(Error::TooFewSamples {
                needed: 1,
                found: 0,
            });
        }
        if let Some(w) = self.states.windows(2).find(|w| !(w[1].tau > w[0].tau)) {
            return Err(Error::InvalidInput(format!(
                "trajectory times must increase strictly ({} then {})",
                w[0].tau, w[1].tau
            )));
        }
        Ok(())
    }

    pub fn taus(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.tau).collect()
    }

    pub fn distances(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.distance).collect()
    }

    pub fn span(&self) -> (f64, f64) {
        (self.states[0].tau, self.states[self.states.len() - 1].tau)
    }

    /// Largest increase of the excess between consecutive samples.
    pub fn max_excess_increase(&self) -> f64 {
        self.states
            .windows(2)
            .map(|w| w[1].excess - w[0].excess)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn bracket(&self, tau: f64) -> Result<(usize, f64)> {
        let (a, b) = self.span();
        let tol = 1e-9 * b.abs().max(1.0);
        if tau < a - tol || tau > b + tol {
            return Err(Error::WindowOutOfSpan {
                start: tau,
                end: tau,
                span_start: a,
                span_end: b,
            });
        }
        let taus = self.taus();
        let idx = taus.partition_point(|&t| t <= tau + tol);
        let i = idx.saturating_sub(1).min(taus.len().saturating_sub(2));
        if taus.len() == 1 {
            return Ok((0, 0.0));
        }
        let theta = ((tau - taus[i]) / (taus[i + 1] - taus[i])).clamp(0.0, 1.0);
        Ok((i, theta))
    }

    /// `D_Σ` at any time in the span. Between samples the logarithm of the
    /// distance is interpolated linearly (the distance itself when an
    /// endpoint vanishes).
    pub fn distance_at(&self, tau: f64) -> Result<f64> {
        let (i, theta) = self.bracket(tau)?;
        let d0 = self.states[i].distance;
        if theta == 0.0 {
            return Ok(d0);
        }
        let d1 = self.states[i + 1].distance;
        if theta == 1.0 {
            return Ok(d1);
        }
        if d0.is_infinite() || d1.is_infinite() {
            return Ok(f64::INFINITY);
        }
        if d0 > 0.0 && d1 > 0.0 {
            Ok((d0.ln() * (1.0 - theta) + d1.ln() * theta).exp())
        } else {
            Ok(d0 * (1.0 - theta) + d1 * theta)
        }
    }

    /// Excess at any time in the span, linearly interpolated.
    pub fn excess_at(&self, tau: f64) -> Result<f64> {
        let (i, theta) = self.bracket(tau)?;
        if theta == 0.0 {
            return Ok(self.states[i].excess);
        }
        Ok(self.states[i].excess * (1.0 - theta) + self.states[i + 1].excess * theta)
    }

    /// Unstable-mode fraction at any time in the span, linearly interpolated.
    pub fn unstable_fraction_at(&self, tau: f64) -> Result<f64> {
        let (i, theta) = self.bracket(tau)?;
        if theta == 0.0 {
            return Ok(self.states[i].unstable_fraction);
        }
        Ok(self.states[i].unstable_fraction * (1.0 - theta)
            + self.states[i + 1].unstable_fraction * theta)
    }

    /// CSV with the columns in [`TRAJECTORY_COLUMNS`]. The decay order is left
    /// empty where it is undefined.
    pub fn to_csv(&self) -> String {
        let mut out = TRAJECTORY_COLUMNS.join(",");
        out.push('\n');
        for s in &self.states {
            let order = decay_order(self, s.tau).map(fmt_real).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt_real(s.tau),
                fmt_real(s.distance),
                fmt_real(s.excess),
                fmt_real(s.gaussian_area),
                order,
                fmt_real(s.unstable_fraction)
            ));
        }
        out
    }

    /// Parse the CSV written by [`Trajectory::to_csv`]. The decay-order
    /// column is recomputed rather than read.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::Parse {
            context: "trajectory csv".into(),
            message: "empty file".into(),
        })?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols != TRAJECTORY_COLUMNS {
            return Err(Error::Parse {
                context: "trajectory csv line 1".into(),
                message: format!("expected header {}", TRAJECTORY_COLUMNS.join(",")),
            });
        }
        let mut states = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != TRAJECTORY_COLUMNS.len() {
                return Err(Error::Parse {
                    context: format!("trajectory csv line {}", idx + 1),
                    message: format!(
                        "expected {} fields, found {}",
                        TRAJECTORY_COLUMNS.len(),
                        fields.len()
                    ),
                });
            }
            let field = |j: usize| -> Result<f64> {
                fields[j].trim().parse::<f64>().map_err(|e| Error::Parse {
                    context: format!(
                        "trajectory csv line {}, field {}",
                        idx + 1,
                        TRAJECTORY_COLUMNS[j]
                    ),
                    message: format!("{e}: {:?}", fields[j]),
                })
            };
            states.push(FlowState::summary(
                field(0)?,
                field(1)?,
                field(2)?,
                field(3)?,
                field(5)?,
            ));
        }
        Self::from_states(states)
    }

    /// JSON manifest with solver settings, grid metadata and step statistics.
    pub fn manifest(&self) -> serde_json::Value {
        let graph = self.states.iter().find_map(|s| s.graph.as_ref());
        serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "shrinker": graph.map(|g| *g.shrinker()),
            "grid": graph.map(|g| g.grid().spec()),
            "config": self.config,
            "step_log": self.step_log,
            "samples": self.states.len(),
            "span": [self.span().0, self.span().1],
            "columns": TRAJECTORY_COLUMNS,
        })
    }

    /// JSON document holding every sampled graph, readable by
    /// [`Trajectory::from_states_json`].
    pub fn states_json(&self) -> Result<serde_json::Value> {
        let graph = self
            .states
            .iter()
            .find_map(|s| s.graph.as_ref())
            .ok_or_else(|| Error::InvalidInput("trajectory carries no graphs".into()))?;
        let doc = StatesDoc {
            schema_version: SCHEMA_VERSION,
            shrinker: *graph.shrinker(),
            grid: graph.grid().spec(),
            c0: self.config.map(|c| c.c0).unwrap_or(f64::INFINITY),
            states: self
                .states
                .iter()
                .map(|s| StateDoc {
                    tau: s.tau,
                    samples: s
                        .graph
                        .as_ref()
                        .map(|g| g.samples().to_vec())
                        .unwrap_or_default(),
                })
                .collect(),
        };
        Ok(serde_json::to_value(doc)?)
    }

    /// Rebuild a trajectory with graphs from [`Trajectory::states_json`].
    pub fn from_states_json(text: &str) -> Result<Self> {
        let doc: StatesDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
            context: format!("states json line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::Parse {
                context: "states json".into(),
                message: format!("unsupported schema_version {}", doc.schema_version),
            });
        }
        let grid = doc.shrinker.grid(doc.grid)?;
        let states = doc
            .states
            .into_iter()
            .map(|s| {
                let graph = RadialGraph::new(doc.shrinker, grid.clone(), s.samples)?;
                FlowState::new(graph, s.tau, doc.c0)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_states(states)
    }
}

/// `N_Σ(τ) = ln(D_Σ(τ)/D_Σ(τ+1))`.
pub fn decay_order(traj: &Trajectory, tau: f64) -> Result<f64> {
    let d0 = traj.distance_at(tau)?;
    let d1 = traj.distance_at(tau + 1.0)?;
    for (t, d) in [(tau, d0), (tau + 1.0, d1)] {
        if d == 0.0 {
            return Err(Error::UndefinedOrder {
                tau,
                reason: format!("zero distance at {t}"),
            });
        }
        if d.is_infinite() {
            return Err(Error::UndefinedOrder {
                tau,
                reason: format!("infinite distance at {t}"),
            });
        }
    }
    Ok((d0 / d1).ln())
}

/// [`decay_order`] restricted to times where the unstable modes carry less
/// than `max_fraction` of the energy at both ends of the window.
pub fn windowed_decay_order(traj: &Trajectory, tau: f64, max_fraction: f64) -> Result<f64> {
    for t in [tau, tau + 1.0] {
        let f = traj.unstable_fraction_at(t)?;
        if f >= max_fraction {
            return Err(Error::UndefinedOrder {
                tau,
                reason: format!("unstable modes carry {f} of the energy at {t}"),
            });
        }
    }
    decay_order(traj, tau)
}

/// Longest initial stretch of samples whose unstable fraction stays below
/// `max_fraction`, as `(start, end)` times.
pub fn stable_window(traj: &Trajectory, max_fraction: f64) -> Option<(f64, f64)> {
    let n = traj
        .states
        .iter()
        .take_while(|s| s.unstable_fraction < max_fraction && s.distance.is_finite())
        .count();
    (n > 0).then(|| (traj.states[0].tau, traj.states[n - 1].tau))
}

/// Comparison of the discrete excess derivative with the dissipation.
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub hypotheses: bool,
    pub samples: usize,
    /// `(τ, dF/dτ by central differences, −∫|H − ½⟨x,ν⟩|²ρ)`.
    pub rows: Vec<(f64, f64, f64)>,
    pub max_defect: f64,
    pub max_excess_increase: f64,
    pub margin: f64,
    pub verdict: crate::drift_heat::Verdict,
}

/// Check `dF/dτ = −∫|H − ½⟨x, ν⟩|²ρ` at interior samples. The verdict
/// fails when the excess ever increases by more than `tolerance` between
/// samples.
pub fn monotonicity_audit(traj: &Trajectory, tolerance: f64) -> Result<MonotonicityReport> {
    let n = traj.states.len();
    if n < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            found: n,
        });
    }
    let mut rows = Vec::with_capacity(n - 2);
    let mut max_defect: f64 = 0.0;
    for k in 1..n - 1 {
        let (a, b, c) = (&traj.states[k - 1], &traj.states[k], &traj.states[k + 1]);
        let h0 = b.tau - a.tau;
        let h1 = c.tau - b.tau;
        // Three-point derivative on a possibly uneven grid.
        let dfdt = -h1 / (h0 * (h0 + h1)) * a.excess
            + (h1 - h0) / (h0 * h1) * b.excess
            + h0 / (h1 * (h0 + h1)) * c.excess;
        let rhs = -dissipation(b.graph()?)?;
        max_defect = max_defect.max((dfdt - rhs).abs());
        rows.push((b.tau, dfdt, rhs));
    }
    let increase = traj.max_excess_increase();
    let ok = increase <= tolerance;
    Ok(MonotonicityReport {
        hypotheses: true,
        samples: n,
        rows,
        max_defect,
        max_excess_increase: increase,
        margin: tolerance - increase,
        verdict: if ok {
            crate::drift_heat::Verdict::Holds
        } else {
            crate::drift_heat::Verdict::Violated
        },
    })
}

/// Empirical constant of `sup_{s∈[0,1]} D_Σ(τ+s) ≤ C₀ D_Σ(τ)` over sample
/// times where `D_Σ(τ) < ε` and the excess drop over `[τ, τ+1]` is below `ε`.
#[derive(Debug, Clone, Serialize)]
pub struct SemicontinuityReport {
    pub hypotheses: bool,
    pub epsilon: f64,
    pub windows: usize,
    pub empirical_c0: f64,
    /// `(τ, sup ratio)` for each admissible window.
    pub rows: Vec<(f64, f64)>,
    pub verdict: crate::drift_heat::Verdict,
}

pub fn semicontinuity_audit(traj: &Trajectory, epsilon: f64) -> Result<SemicontinuityReport> {
    let (_, end) = traj.span();
    let mut rows = Vec::new();
    let mut c0: f64 = 0.0;
    for (i, s) in traj.states.iter().enumerate() {
        if s.tau + 1.0 > end + 1e-9 {
            break;
        }
        if !(s.distance < epsilon) || s.distance == 0.0 {
            continue;
        }
        let drop = s.excess - traj.excess_at(s.tau + 1.0)?;
        if !(drop < epsilon) {
            continue;
        }
        let mut sup: f64 = 0.0;
        for later in &traj.states[i..] {
            if later.tau > s.tau + 1.0 + 1e-9 {
                break;
            }
            sup = sup.max(later.distance / s.distance);
        }
        c0 = c0.max(sup);
        rows.push((s.tau, sup));
    }
    let windows = rows.len();
    Ok(SemicontinuityReport {
        hypotheses: windows > 0,
        epsilon,
        windows,
        empirical_c0: c0,
        rows,
        verdict: if windows == 0 {
            crate::drift_heat::Verdict::HypothesisNotMet
        } else if c0.is_finite() {
            crate::drift_heat::Verdict::Holds
        } else {
            crate::drift_heat::Verdict::Violated
        },
    })
}
