//! Audits of distance trajectories: the frequency-monotonicity implication,
//! the shrinking-scale doubling iteration, the doubling constant, and the
//! infinite-order classifier.

use serde::Serialize;

use crate::drift_heat::{GapChoice, Verdict};
use crate::error::{Error, Result};
use crate::export::fmt_real;
use crate::flow::Trajectory;
use crate::spectral::SCHEMA_VERSION;

/// Candidate scales scanned per stage.
pub const SCALE_SCAN_POINTS: usize = 256;

/// Default `γ₀` in `A = (B − 1)/γ₀`.
pub const DEFAULT_GAMMA0: f64 = 0.5;

/// Distances below this are treated as zero by the classifier.
pub const ZERO_DISTANCE: f64 = 1e-12;

/// Growth rate of `ln C_k` over the second half of the span above which
/// `C_k` is declared divergent.
pub const DIVERGENCE_RATE: f64 = 0.05;

/// `A = (B − 1)/γ₀`.
pub fn exponent_from_b(b: f64, gamma0: f64) -> Result<f64> {
    if !(gamma0 > 0.0) {
        return Err(Error::OutOfContract(format!(
            "γ₀ = {gamma0} must be positive"
        )));
    }
    let a = (b - 1.0) / gamma0;
    if !(a > 0.0) {
        return Err(Error::OutOfContract(format!(
            "B = {b} gives non-positive A = {a}"
        )));
    }
    Ok(a)
}

/// `Lᵢ = (½)^{i/A} L₀` for `i < count`.
pub fn scale_sequence(l0: f64, a: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| 0.5f64.powf(i as f64 / a) * l0).collect()
}

/// `Σᵢ Lᵢ`, summed term by term until the terms no longer change the total.
pub fn scale_series_sum(l0: f64, a: f64) -> f64 {
    let ratio = 0.5f64.powf(1.0 / a);
    let mut terms = Vec::new();
    let mut term = l0;
    while term > l0 * 1e-18 {
        terms.push(term);
        term *= ratio;
    }
    // Smallest terms first.
    terms.iter().rev().sum()
}

/// `L₀/(1 − (½)^{1/A})`.
pub fn scale_series_closed_form(l0: f64, a: f64) -> f64 {
    l0 / -(-(2f64.ln()) / a).exp_m1()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FrequencyQuantities {
    pub tau: f64,
    pub l: f64,
    pub d_0: f64,
    pub d_l: f64,
    pub d_2l: f64,
    /// `D(τ+L) ≥ D(τ)/(2C₀)`.
    pub implication_hypothesis: bool,
    /// `D(τ+2L) ≥ D(τ+L)/(2C₀)`.
    pub implication_conclusion: bool,
    /// Whether `D(τ) < ε`, the excess drop over `[τ, τ+1]` is below `ε`,
    /// and `D(τ+L) ≤ L₀^A`.
    pub smallness: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FrequencyReport {
    pub hypotheses: bool,
    pub quantities: FrequencyQuantities,
    /// `ln(2C₀ D(τ+2L)/D(τ+L))`, positive when the conclusion holds.
    pub margin: f64,
    pub verdict: Verdict,
}

/// Test the implication `D(τ+L) ≥ D(τ)/(2C₀) ⇒ D(τ+2L) ≥ D(τ+L)/(2C₀)`
/// on a trajectory, under the smallness hypotheses with threshold `epsilon`.
pub fn frequency_window_check(
    traj: &Trajectory,
    tau: f64,
    choice: &GapChoice,
    a: f64,
    epsilon: f64,
) -> Result<FrequencyReport> {
    let l = choice.l;
    let c0 = choice.c0;
    let (start, end) = traj.span();
    let far = (tau + 2.0 * l).max(tau + 1.0);
    if tau < start - 1e-9 || far > end + 1e-9 {
        return Err(Error::WindowOutOfSpan {
            start: tau,
            end: far,
            span_start: start,
            span_end: end,
        });
    }
    let d0 = traj.distance_at(tau)?;
    let dl = traj.distance_at(tau + l)?;
    let d2l = traj.distance_at(tau + 2.0 * l)?;
    for (t, d) in [(tau, d0), (tau + l, dl), (tau + 2.0 * l, d2l)] {
        if d.is_infinite() {
            return Err(Error::InfiniteDistance(t));
        }
    }
    let drop = traj.excess_at(tau)? - traj.excess_at(tau + 1.0)?;
    let smallness = d0 < epsilon && drop < epsilon && dl <= choice.l0.powf(a);
    let k = 2.0 * c0;
    let implication_hypothesis = k * dl >= d0;
    let implication_conclusion = k * d2l >= dl;
    let quantities = FrequencyQuantities {
        tau,
        l,
        d_0: d0,
        d_l: dl,
        d_2l: d2l,
        implication_hypothesis,
        implication_conclusion,
        smallness,
    };
    if d0 == 0.0 || dl == 0.0 {
        return Ok(FrequencyReport {
            hypotheses: false,
            quantities,
            margin: f64::NAN,
            verdict: Verdict::Degenerate,
        });
    }
    let margin = (k * d2l / dl).ln();
    let verdict = if !smallness || !implication_hypothesis {
        Verdict::HypothesisNotMet
    } else if implication_conclusion {
        Verdict::Holds
    } else {
        Verdict::Violated
    };
    Ok(FrequencyReport {
        hypotheses: smallness && implication_hypothesis,
        quantities,
        margin,
        verdict,
    })
}

/// `sup_τ D(τ)/D(τ+1)` over sample times with `τ + 1` inside the span.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DoublingEstimate {
    pub value: f64,
    pub at_tau: f64,
    /// Zero distance somewhere in the span: the ratio is undefined.
    pub degenerate: bool,
}

pub fn doubling_constant(traj: &Trajectory) -> Result<DoublingEstimate> {
    doubling_constant_from(traj, traj.span().0)
}

fn doubling_constant_from(traj: &Trajectory, from: f64) -> Result<DoublingEstimate> {
    let (_, end) = traj.span();
    let mut best = DoublingEstimate {
        value: f64::NEG_INFINITY,
        at_tau: f64::NAN,
        degenerate: false,
    };
    let mut any = false;
    for s in &traj.states {
        if s.tau < from - 1e-9 || s.tau + 1.0 > end + 1e-9 {
            continue;
        }
        let d1 = traj.distance_at(s.tau + 1.0)?;
        if s.distance.is_infinite() || d1.is_infinite() {
            return Err(Error::InfiniteDistance(if s.distance.is_infinite() {
                s.tau
            } else {
                s.tau + 1.0
            }));
        }
        if s.distance == 0.0 || d1 == 0.0 {
            return Ok(DoublingEstimate {
                value: f64::NAN,
                at_tau: s.tau,
                degenerate: true,
            });
        }
        any = true;
        let r = s.distance / d1;
        if r > best.value {
            best.value = r;
            best.at_tau = s.tau;
        }
    }
    if !any {
        return Err(Error::TooFewSamples {
            needed: 2,
            found: traj.states.len(),
        });
    }
    Ok(best)
}

/// Which case of the iteration a stage fell into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageBranch {
    /// Some scale gave `D(T) ≥ 2C₀ D(T+L)`; the audit advanced by `Lᵢ`.
    Decay,
    /// Every scanned scale had a bounded ratio; the chain bound applies.
    BoundedRatio,
    /// The distance vanished.
    Zero,
    /// Not enough trajectory left to run the stage.
    OutOfSpan,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StageRecord {
    pub stage: usize,
    pub start: f64,
    pub scale: f64,
    pub branch: StageBranch,
    /// Largest `D(T)/D(T+L)` over the scanned scales.
    pub max_ratio: f64,
    /// Scale that achieved the decay, for the decay branch.
    pub decay_scale: Option<f64>,
    /// For the decay branch: `D(T+Lᵢ) ≤ ½Lᵢ^A`.
    pub bound_holds: Option<bool>,
}

/// Overall outcome of the iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditOutcome {
    /// The bounded-ratio branch fired and its chain constant bounds every
    /// sampled ratio on the remaining span.
    Bounded,
    /// The distance vanishes: consistent with the static flow.
    Degenerate,
    /// The trajectory ended before any stage could conclude.
    Partial,
    /// A checked inequality failed.
    Violated,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AuditConstants {
    #[serde(rename = "C0")]
    pub c0: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: Option<f64>,
    #[serde(rename = "L0")]
    pub l0: f64,
}

/// Trace of the shrinking-scale iteration on a trajectory.
#[derive(Debug, Clone, Serialize)]
pub struct DoublingAudit {
    pub constants: AuditConstants,
    pub scale_sequence: Vec<f64>,
    /// Time consumed by decay stages.
    pub consumed: f64,
    /// `L₀/(1 − (½)^{1/A})`.
    pub series_limit: f64,
    pub branch_history: Vec<StageRecord>,
    /// `(2C₀)^m C₀²` when the bounded-ratio branch fired.
    pub chain_constant: Option<f64>,
    pub chain_steps: Option<usize>,
    pub doubling_constant: Option<f64>,
    pub frequency_checked: usize,
    pub frequency_violations: usize,
    pub verdict: AuditOutcome,
    /// `(τ, D(τ)/D(τ+1))` at every sample with `τ + 1` in the span.
    #[serde(skip)]
    pub ratios: Vec<(f64, f64)>,
}

impl DoublingAudit {
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("audit is serializable");
        v["schema_version"] = SCHEMA_VERSION.into();
        v
    }

    /// CSV with columns `tau,ratio`.
    pub fn ratios_csv(&self) -> String {
        let mut out = String::from("tau,ratio\n");
        for (t, r) in &self.ratios {
            out.push_str(&format!("{},{}\n", fmt_real(*t), fmt_real(*r)));
        }
        out
    }
}

/// Run the proof's case analysis on a trajectory. At stage `i` with scale
/// `Lᵢ`, scan `L ∈ [Lᵢ/2, Lᵢ]`: if some `L` has `D(T) ≥ 2C₀D(T+L)` advance
/// `T` by `Lᵢ`, otherwise check the chain bound `D(τ) ≤ (2C₀)^m C₀² D(τ+1)`
/// and the frequency-monotonicity chain on the rest of the trajectory.
pub fn doubling_certificate(traj: &Trajectory, l0: f64, a: f64, c0: f64) -> Result<DoublingAudit> {
    if !(l0 > 0.0 && l0 < 0.5) {
        return Err(Error::OutOfContract(format!(
            "L₀ = {l0} must lie in (0, 1/2)"
        )));
    }
    if !(a > 0.0) || !(c0 > 0.0) {
        return Err(Error::OutOfContract(format!(
            "need A > 0 and C₀ > 0, got {a}, {c0}"
        )));
    }
    let (start, end) = traj.span();
    let series_limit = scale_series_closed_form(l0, a);
    let ratios = sampled_ratios(traj)?;
    let mut audit = DoublingAudit {
        constants: AuditConstants { c0, a, b: None, l0 },
        scale_sequence: Vec::new(),
        consumed: 0.0,
        series_limit,
        branch_history: Vec::new(),
        chain_constant: None,
        chain_steps: None,
        doubling_constant: None,
        frequency_checked: 0,
        frequency_violations: 0,
        verdict: AuditOutcome::Partial,
        ratios,
    };
    let mut t = start;
    let mut stage = 0;
    loop {
        let li = 0.5f64.powf(stage as f64 / a) * l0;
        // The stage needs [T, T + Lᵢ] for the scan and one more unit of time
        // to evaluate the doubling ratio.
        if t + li > end + 1e-9 {
            audit.branch_history.push(StageRecord {
                stage,
                start: t,
                scale: li,
                branch: StageBranch::OutOfSpan,
                max_ratio: f64::NAN,
                decay_scale: None,
                bound_holds: None,
            });
            break;
        }
        audit.scale_sequence.push(li);
        let dt = traj.distance_at(t)?;
        if dt.is_infinite() {
            return Err(Error::InfiniteDistance(t));
        }
        if dt < ZERO_DISTANCE {
            audit.branch_history.push(StageRecord {
                stage,
                start: t,
                scale: li,
                branch: StageBranch::Zero,
                max_ratio: f64::NAN,
                decay_scale: None,
                bound_holds: None,
            });
            audit.verdict = AuditOutcome::Degenerate;
            break;
        }
        let mut max_ratio: f64 = 0.0;
        let mut decay_scale = None;
        for j in 0..SCALE_SCAN_POINTS {
            let l = 0.5 * li + 0.5 * li * j as f64 / (SCALE_SCAN_POINTS - 1) as f64;
            let dl = traj.distance_at(t + l)?;
            if dl.is_infinite() {
                return Err(Error::InfiniteDistance(t + l));
            }
            let ratio = if dl == 0.0 { f64::INFINITY } else { dt / dl };
            max_ratio = max_ratio.max(ratio);
            if decay_scale.is_none() && ratio >= 2.0 * c0 {
                decay_scale = Some(l);
            }
        }
        if let Some(l) = decay_scale {
            let next = traj.distance_at(t + li)?;
            audit.branch_history.push(StageRecord {
                stage,
                start: t,
                scale: li,
                branch: StageBranch::Decay,
                max_ratio,
                decay_scale: Some(l),
                bound_holds: Some(next <= 0.5 * li.powf(a)),
            });
            audit.consumed += li;
            t += li;
            stage += 1;
            continue;
        }
        // Bounded-ratio branch.
        let m = ((1.0 + li) / (0.5 * li)).ceil() as usize + 1;
        let chain = (2.0 * c0).powi(m as i32) * c0 * c0;
        audit.branch_history.push(StageRecord {
            stage,
            start: t,
            scale: li,
            branch: StageBranch::BoundedRatio,
            max_ratio,
            decay_scale: None,
            bound_holds: None,
        });
        audit.chain_constant = Some(chain);
        audit.chain_steps = Some(m);
        if t + 1.0 > end + 1e-9 {
            audit.verdict = AuditOutcome::Partial;
            break;
        }
        let est = doubling_constant_from(traj, t)?;
        if est.degenerate {
            audit.verdict = AuditOutcome::Degenerate;
            break;
        }
        audit.doubling_constant = Some(est.value);
        let (checked, violations) = monotonicity_chain(traj, t, li, c0)?;
        audit.frequency_checked = checked;
        audit.frequency_violations = violations;
        audit.verdict = if est.value <= chain && violations == 0 {
            AuditOutcome::Bounded
        } else {
            AuditOutcome::Violated
        };
        break;
    }
    if audit.verdict == AuditOutcome::Partial && audit.doubling_constant.is_none() {
        if let Ok(est) = doubling_constant(traj) {
            if !est.degenerate {
                audit.doubling_constant = Some(est.value);
            }
        }
    }
    Ok(audit)
}

/// For every scanned `L ∈ [Lᵢ/2, Lᵢ]` and every `k` with `T+(k+2)L` in the
/// span, check `D(T+kL) ≤ 2C₀D(T+(k+1)L) ⇒ D(T+(k+1)L) ≤ 2C₀D(T+(k+2)L)`.
fn monotonicity_chain(traj: &Trajectory, t: f64, li: f64, c0: f64) -> Result<(usize, usize)> {
    let (_, end) = traj.span();
    let mut checked = 0;
    let mut violations = 0;
    for j in 0..SCALE_SCAN_POINTS {
        let l = 0.5 * li + 0.5 * li * j as f64 / (SCALE_SCAN_POINTS - 1) as f64;
        let mut k = 0;
        while t + (k as f64 + 2.0) * l <= end + 1e-9 {
            let d0 = traj.distance_at(t + k as f64 * l)?;
            let d1 = traj.distance_at(t + (k as f64 + 1.0) * l)?;
            let d2 = traj.distance_at(t + (k as f64 + 2.0) * l)?;
            if d0 <= 2.0 * c0 * d1 {
                checked += 1;
                if d1 > 2.0 * c0 * d2 {
                    violations += 1;
                }
            }
            k += 1;
        }
    }
    Ok((checked, violations))
}

fn sampled_ratios(traj: &Trajectory) -> Result<Vec<(f64, f64)>> {
    let (_, end) = traj.span();
    let mut out = Vec::new();
    for s in &traj.states {
        if s.tau + 1.0 > end + 1e-9 {
            break;
        }
        let d1 = traj.distance_at(s.tau + 1.0)?;
        out.push((s.tau, s.distance / d1));
    }
    Ok(out)
}

/// Outcome of the infinite-order classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OrderClass {
    /// `C_k` stays bounded for `k ≤ k_star` and diverges at `k_star + 1`.
    FiniteOrder { k_star: usize },
    /// Every sampled distance is numerically zero.
    Zero,
    /// `C_k` stayed bounded for every requested `k`.
    Undetermined,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderRow {
    pub k: usize,
    /// `sup_τ D(τ)e^{kτ}` over the first half of the window.
    pub c_half: f64,
    /// The same supremum over the whole window.
    pub c_full: f64,
    /// Least-squares slope of `ln(D e^{kτ})` over the second half of the
    /// window: the rate at which `C_k` grows as the span is extended.
    pub growth_rate: f64,
    pub diverges: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderReport {
    /// Times analysed: the initial stretch where the unstable modes carry
    /// less than [`UNSTABLE_FRACTION_LIMIT`] of the energy.
    pub window: (f64, f64),
    pub rows: Vec<OrderRow>,
    pub class: OrderClass,
}

/// Unstable-mode energy fraction above which samples are excluded from the
/// classifier.
pub const UNSTABLE_FRACTION_LIMIT: f64 = 0.1;

/// For each `k = 1..=k_max` decide whether `C_k = sup D(τ)e^{kτ}` diverges
/// as the span is extended. The tail slope of `ln D` decides this, so a
/// fast transient early in the run does not mask the slowest rate.
pub fn infinite_order_classifier(traj: &Trajectory, k_max: usize) -> Result<OrderReport> {
    if let Some(s) = traj.states.iter().find(|s| !s.distance.is_finite()) {
        return Err(Error::InfiniteDistance(s.tau));
    }
    let (s0, s1) = traj.span();
    if s1 - s0 < 2.0 || k_max == 0 {
        return Err(Error::InvalidInput(format!(
            "classifier needs a span of at least 2 and k_max ≥ 1 (span {}, k_max {k_max})",
            s1 - s0
        )));
    }
    // Round-off in a zero run has no meaningful mode split, so this test
    // comes before the unstable-mode window.
    if traj.states.iter().all(|s| s.distance < ZERO_DISTANCE) {
        return Ok(OrderReport {
            window: (s0, s1),
            rows: Vec::new(),
            class: OrderClass::Zero,
        });
    }
    let window = crate::flow::stable_window(traj, UNSTABLE_FRACTION_LIMIT).unwrap_or((s0, s0));
    let (start, end) = window;
    let span = end - start;
    if span < 2.0 {
        return Err(Error::InvalidInput(format!(
            "unstable modes exceed {UNSTABLE_FRACTION_LIMIT} of the energy after {span}; the classifier needs a stable window of at least 2"
        )));
    }
    let states: Vec<_> = traj.states.iter().filter(|s| s.tau <= end).collect();
    let mid = start + 0.5 * span;
    let tail: Vec<(f64, f64)> = states
        .iter()
        .filter(|s| s.tau >= mid && s.distance >= ZERO_DISTANCE)
        .map(|s| (s.tau, s.distance.ln()))
        .collect();
    let slope = if tail.len() < 2 {
        f64::NEG_INFINITY
    } else {
        let n = tail.len() as f64;
        let tm = tail.iter().map(|p| p.0).sum::<f64>() / n;
        let ym = tail.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = tail.iter().map(|(t, y)| (t - tm) * (y - ym)).sum();
        let sxx: f64 = tail.iter().map(|(t, _)| (t - tm) * (t - tm)).sum();
        sxy / sxx
    };
    let mut rows = Vec::with_capacity(k_max);
    let mut class = OrderClass::Undetermined;
    for k in 1..=k_max {
        let kf = k as f64;
        // Logarithms relative to the window start; e^{kτ} overflows long
        // before D underflows.
        let log_c = |upto: f64| {
            states
                .iter()
                .filter(|s| s.tau <= upto + 1e-12 && s.distance > 0.0)
                .map(|s| s.distance.ln() + kf * (s.tau - start))
                .fold(f64::NEG_INFINITY, f64::max)
        };
        let growth_rate = kf + slope;
        let diverges = growth_rate > DIVERGENCE_RATE;
        rows.push(OrderRow {
            k,
            c_half: (log_c(mid) + kf * start).exp(),
            c_full: (log_c(end) + kf * start).exp(),
            growth_rate,
            diverges,
        });
        if diverges && class == OrderClass::Undetermined {
            class = OrderClass::FiniteOrder { k_star: k - 1 };
        }
    }
    Ok(OrderReport {
        window,
        rows,
        class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_traj(rate: f64, span: f64) -> Trajectory {
        let taus: Vec<f64> = (0..=(span * 100.0) as usize)
            .map(|k| k as f64 * 0.01)
            .collect();
        let d: Vec<f64> = taus.iter().map(|t| 1e-3 * (-rate * t).exp()).collect();
        Trajectory::from_distances(&taus, &d).unwrap()
    }

    #[test]
    fn scale_series_matches_closed_form() {
        for a in [0.7, 2.4, 10.0] {
            let s = scale_series_sum(0.4, a);
            let c = scale_series_closed_form(0.4, a);
            assert!((s - c).abs() <= 1e-12 * c, "{s} vs {c}");
        }
        let seq = scale_sequence(0.4, 2.0, 3);
        assert!((seq[2] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn doubling_of_pure_decay() {
        let e = doubling_constant(&exp_traj(1.0, 4.0)).unwrap();
        assert!((e.value - 1f64.exp()).abs() < 1e-10);
        let e = doubling_constant(&exp_traj(3.5, 4.0)).unwrap();
        assert!((e.value - 3.5f64.exp()).abs() < 1e-8);
    }

    #[test]
    fn certificate_on_pure_decay() {
        let audit = doubling_certificate(&exp_traj(1.0, 4.0), 0.4, 2.4, 2.0).unwrap();
        assert_eq!(audit.verdict, AuditOutcome::Bounded);
        assert_eq!(audit.branch_history[0].branch, StageBranch::BoundedRatio);
        assert!((audit.doubling_constant.unwrap() - 1f64.exp()).abs() < 1e-10);
        assert_eq!(audit.frequency_violations, 0);
    }

    #[test]
    fn certificate_on_zero_trajectory() {
        let taus: Vec<f64> = (0..=300).map(|k| k as f64 * 0.01).collect();
        let traj = Trajectory::from_distances(&taus, &vec![0.0; taus.len()]).unwrap();
        let audit = doubling_certificate(&traj, 0.4, 2.4, 2.0).unwrap();
        assert_eq!(audit.verdict, AuditOutcome::Degenerate);
        let class = infinite_order_classifier(&traj, 5).unwrap().class;
        assert_eq!(class, OrderClass::Zero);
    }

    #[test]
    fn fast_decay_advances_stages() {
        // Rate 8 makes e^{8L} ≥ 4 for L ≥ 0.18.
        let audit = doubling_certificate(&exp_traj(8.0, 3.0), 0.4, 2.4, 2.0).unwrap();
        assert_eq!(audit.branch_history[0].branch, StageBranch::Decay);
        assert!(audit.consumed <= audit.series_limit);
    }

    #[test]
    fn classifier_finds_slowest_rate() {
        let r = infinite_order_classifier(&exp_traj(1.0, 6.0), 4).unwrap();
        assert_eq!(r.class, OrderClass::FiniteOrder { k_star: 1 });
        let r = infinite_order_classifier(&exp_traj(1.0, 1.0), 4);
        assert!(r.is_err());
        // A fast transient with the larger amplitude does not hide rate 3.5.
        let taus: Vec<f64> = (0..=400).map(|k| k as f64 * 0.01).collect();
        let d: Vec<f64> = taus
            .iter()
            .map(|t| (1e-3 * (-3.5 * t).exp()).hypot(1e-2 * (-11.5 * t).exp()))
            .collect();
        let r =
            infinite_order_classifier(&Trajectory::from_distances(&taus, &d).unwrap(), 6).unwrap();
        assert_eq!(r.class, OrderClass::FiniteOrder { k_star: 3 });
    }
}
