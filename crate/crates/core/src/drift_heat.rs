//! Linear drift heat flow `∂ₛu = Lu` in the eigenbasis: the weighted norm
//! `I(u, s)`, log-convexity, the three-annulus dichotomy, gap selection for
//! the quantitative three-annulus estimate, and the Duhamel right inverse of
//! `∂ₜ − L`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::export::fmt_real;
use crate::spectral::{self, ModeVector, Spectrum};

/// Number of candidate scales scanned by [`choose_gap_l`].
pub const GAP_SEARCH_POINTS: usize = 10_000;

/// Amount added to the smallest admissible `B`.
pub const B_MARGIN: f64 = 0.1;

/// Relative slack when testing hypotheses that may hold with equality.
const HYPOTHESIS_RTOL: f64 = 1e-12;

/// Largest `x` with `e^x` finite.
const MAX_EXP: f64 = 709.78;

/// Outcome of a checked implication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    HypothesisNotMet,
    Violated,
    Degenerate,
}

impl Verdict {
    pub fn is_violation(self) -> bool {
        self == Verdict::Violated
    }
}

/// `aᵢ ↦ aᵢ e^{-μᵢ s}`.
pub fn evolve_linear(a: &ModeVector, s: f64) -> Result<ModeVector> {
    if !s.is_finite() {
        return Err(Error::InvalidInput(format!("time must be finite, got {s}")));
    }
    let mut out = Vec::with_capacity(a.len());
    for (i, (&c, &mu)) in a.coefficients().iter().zip(a.eigenvalues()).enumerate() {
        if c == 0.0 {
            out.push(0.0);
            continue;
        }
        let x = -mu * s;
        let v = c * x.exp();
        if x > MAX_EXP || !v.is_finite() {
            return Err(Error::Range {
                mode: i,
                eigenvalue: mu,
                s,
            });
        }
        out.push(v);
    }
    ModeVector::new(a.spectrum(), out)
}

/// `ln I(u, s)` with `I² = Σ aᵢ² e^{-2μᵢ s}`, via log-sum-exp. Returns
/// `-∞` for the zero vector.
pub fn log_norm_at(a: &ModeVector, s: f64) -> f64 {
    log_norm(a.coefficients(), a.eigenvalues(), s)
}

/// `I(u, s)`.
pub fn norm_at(a: &ModeVector, s: f64) -> f64 {
    log_norm_at(a, s).exp()
}

fn log_norm(coefficients: &[f64], eigenvalues: &[f64], s: f64) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    for (&c, &mu) in coefficients.iter().zip(eigenvalues) {
        if c != 0.0 {
            peak = peak.max(2.0 * c.abs().ln() - 2.0 * mu * s);
        }
    }
    if peak == f64::NEG_INFINITY {
        return peak;
    }
    let sum: f64 = coefficients
        .iter()
        .zip(eigenvalues)
        .filter(|(c, _)| **c != 0.0)
        .map(|(&c, &mu)| (2.0 * c.abs().ln() - 2.0 * mu * s - peak).exp())
        .sum();
    0.5 * (peak + sum.ln())
}

/// `I(u, s)` sampled on a time grid.
#[derive(Debug, Clone, Serialize)]
pub struct LinearEvolution {
    pub times: Vec<f64>,
    pub profile: Vec<f64>,
    pub log_profile: Vec<f64>,
    /// `a = 0`: the profile is identically zero.
    pub zero_solution: bool,
    /// All weight sits on one eigenvalue, so `ln I` is affine.
    pub single_eigenvalue: bool,
}

impl LinearEvolution {
    /// Second differences of `ln I` normalised by the local step sizes.
    /// Empty for the zero solution.
    pub fn log_second_differences(&self) -> Vec<f64> {
        if self.zero_solution {
            return Vec::new();
        }
        self.times
            .windows(3)
            .zip(self.log_profile.windows(3))
            .map(|(t, y)| {
                let h0 = t[1] - t[0];
                let h1 = t[2] - t[1];
                // Weighted so that a uniform grid gives y₀ − 2y₁ + y₂.
                let avg = 0.5 * (h0 + h1);
                avg * ((y[2] - y[1]) / h1 - (y[1] - y[0]) / h0)
            })
            .collect()
    }
}

/// Sample `I(u, s)` on a sorted grid of times.
pub fn l2_profile(a: &ModeVector, s_grid: &[f64]) -> Result<LinearEvolution> {
    if s_grid.is_empty() {
        return Err(Error::InvalidInput("empty time grid".into()));
    }
    if s_grid.iter().any(|s| !s.is_finite()) || s_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput(
            "time grid must be finite and sorted".into(),
        ));
    }
    let log_profile: Vec<f64> = s_grid.iter().map(|&s| log_norm_at(a, s)).collect();
    let profile = log_profile.iter().map(|l| l.exp()).collect();
    Ok(LinearEvolution {
        times: s_grid.to_vec(),
        profile,
        log_profile,
        zero_solution: a.is_zero(),
        single_eigenvalue: supported_on_single_eigenvalue(a),
    })
}

/// True when every nonzero coefficient belongs to the same eigenvalue.
pub fn supported_on_single_eigenvalue(a: &ModeVector) -> bool {
    let mut seen: Option<f64> = None;
    for (&c, &mu) in a.coefficients().iter().zip(a.eigenvalues()) {
        if c == 0.0 {
            continue;
        }
        match seen {
            None => seen = Some(mu),
            Some(m) if m == mu => {}
            Some(_) => return false,
        }
    }
    seen.is_some()
}

fn distinct_eigenvalues(spectrum: &Spectrum) -> Vec<f64> {
    spectrum.levels().iter().map(|l| l.eigenvalue).collect()
}

/// Growth threshold `δ` for the unit-time dichotomy
/// `I(t+1) ≥ e^δ I(t)` or `I(t−1) ≥ e^δ I(t)`.
///
/// Starts from half the smallest nonzero `|μ|` and lowers it to the exact
/// worst case over the resolved spectrum. With `I(t) = 1` the squared norms
/// at `t ± 1` are linear in the weights `aᵢ² e^{-2μᵢ t}`, so the worst case
/// of their maximum is attained on at most two distinct eigenvalues.
pub fn certified_delta(spectrum: &Spectrum) -> f64 {
    let mus = distinct_eigenvalues(spectrum);
    let half_gap = 0.5
        * mus
            .iter()
            .filter(|m| **m != 0.0)
            .map(|m| m.abs())
            .fold(f64::INFINITY, f64::min);
    half_gap.min(exact_dichotomy_delta(&mus))
}

/// `½ ln min_w max(Σ wᵢ e^{-2μᵢ}, Σ wᵢ e^{2μᵢ})` over probability vectors on
/// the given eigenvalues.
pub fn exact_dichotomy_delta(mus: &[f64]) -> f64 {
    let mut worst = f64::INFINITY;
    for (i, &mi) in mus.iter().enumerate() {
        let (ai, bi) = ((-2.0 * mi).exp(), (2.0 * mi).exp());
        worst = worst.min(ai.max(bi));
        for &mj in &mus[i + 1..] {
            let (aj, bj) = ((-2.0 * mj).exp(), (2.0 * mj).exp());
            // Crossing of w·aᵢ + (1−w)aⱼ and w·bᵢ + (1−w)bⱼ.
            let denom = (ai - aj) - (bi - bj);
            if denom != 0.0 {
                let w = (bj - aj) / denom;
                if (0.0..=1.0).contains(&w) {
                    // Rounding can push the crossing onto a vertex, so take
                    // the larger of the two sides.
                    let f1 = w * ai + (1.0 - w) * aj;
                    let f2 = w * bi + (1.0 - w) * bj;
                    worst = worst.min(f1.max(f2));
                }
            }
        }
    }
    0.5 * worst.ln()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThreeAnnulusQuantities {
    pub t: f64,
    pub delta1: f64,
    pub certified_delta: f64,
    /// `ln(I(t+1)/I(t))`.
    pub first_growth: f64,
    /// Achieved `δ₂ = ln(I(t+2)/I(t+1))`.
    pub delta2: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThreeAnnulusReport {
    pub hypotheses: bool,
    pub quantities: ThreeAnnulusQuantities,
    pub margin: f64,
    pub verdict: Verdict,
}

/// If `I(t+1) ≥ e^{δ₁} I(t)`, check `I(t+2) ≥ e^{δ₂} I(t+1)` with the
/// achieved `δ₂ ≥ δ₁`.
pub fn three_annulus_check(a: &ModeVector, t: f64, delta1: f64) -> Result<ThreeAnnulusReport> {
    if a.is_zero() {
        return Err(Error::ZeroVector);
    }
    let delta = certified_delta(a.spectrum());
    if !(delta1 < delta) {
        return Err(Error::OutOfContract(format!(
            "δ₁ = {delta1} must be below the certified threshold {delta}"
        )));
    }
    let l0 = log_norm_at(a, t);
    let l1 = log_norm_at(a, t + 1.0);
    let l2 = log_norm_at(a, t + 2.0);
    let first_growth = l1 - l0;
    let delta2 = l2 - l1;
    let hypotheses = first_growth >= delta1;
    let margin = delta2 - delta1;
    let verdict = match (hypotheses, margin >= -1e-12) {
        (false, _) => Verdict::HypothesisNotMet,
        (true, true) => Verdict::Holds,
        (true, false) => Verdict::Violated,
    };
    Ok(ThreeAnnulusReport {
        hypotheses,
        quantities: ThreeAnnulusQuantities {
            t,
            delta1,
            certified_delta: delta,
            first_growth,
            delta2,
        },
        margin,
        verdict,
    })
}

/// Which side of the dichotomy holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Forward,
    Backward,
    Neither,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DichotomyQuantities {
    pub t: f64,
    pub delta: f64,
    /// `ln(I(t+1)/I(t))`.
    pub forward_growth: f64,
    /// `ln(I(t−1)/I(t))`.
    pub backward_growth: f64,
    pub branch: Branch,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DichotomyReport {
    pub hypotheses: bool,
    pub quantities: DichotomyQuantities,
    pub margin: f64,
    pub verdict: Verdict,
}

/// Check `I(t+1) ≥ e^δ I(t)` or `I(t−1) ≥ e^δ I(t)` at the certified `δ`
/// for data without a zero-eigenvalue component.
pub fn zero_mode_dichotomy(a: &ModeVector, t: f64) -> Result<DichotomyReport> {
    if a.is_zero() {
        return Err(Error::ZeroVector);
    }
    if let Some(i) = a
        .coefficients()
        .iter()
        .zip(a.eigenvalues())
        .position(|(c, mu)| *mu == 0.0 && *c != 0.0)
    {
        return Err(Error::OutOfContract(format!(
            "mode {i} has eigenvalue zero and a nonzero coefficient"
        )));
    }
    let delta = certified_delta(a.spectrum());
    let l0 = log_norm_at(a, t);
    let forward_growth = log_norm_at(a, t + 1.0) - l0;
    let backward_growth = log_norm_at(a, t - 1.0) - l0;
    let tol = 1e-12;
    let branch = if forward_growth >= delta - tol {
        Branch::Forward
    } else if backward_growth >= delta - tol {
        Branch::Backward
    } else {
        Branch::Neither
    };
    let margin = forward_growth.max(backward_growth) - delta;
    Ok(DichotomyReport {
        hypotheses: true,
        quantities: DichotomyQuantities {
            t,
            delta,
            forward_growth,
            backward_growth,
            branch,
        },
        margin,
        verdict: if branch == Branch::Neither {
            Verdict::Violated
        } else {
            Verdict::Holds
        },
    })
}

/// A scale `L` with an eigenvalue-free window around `ln(2C₀)/L`, and the
/// exponent `B` of the quantitative three-annulus estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapChoice {
    pub l0: f64,
    pub l: f64,
    pub c0: f64,
    pub b: f64,
    /// Smallest `B` satisfying the strict inequality.
    pub b_min: f64,
    /// `ln(2C₀)/L`.
    pub threshold: f64,
    /// `minⱼ |μⱼ − ln(2C₀)/L|`.
    pub gap: f64,
    /// Weyl constant, raised where needed so that the certificate holds.
    pub c1: f64,
    /// Weyl constant fitted from the counting function.
    pub c1_fit: f64,
    pub exponent: f64,
}

impl GapChoice {
    /// `gap ≥ C₁⁻¹ L^{m−1}`.
    pub fn gap_certificate_holds(&self) -> bool {
        self.gap >= self.l.powf(self.exponent - 1.0) / self.c1
    }

    /// `(1 + C₁⁻¹L^m)⁻¹ < (1 − L^B)²`.
    pub fn b_certificate_holds(&self) -> bool {
        let kappa = self.l.powf(self.exponent) / self.c1;
        1.0 / (1.0 + kappa) < (1.0 - self.l.powf(self.b)).powi(2)
    }

    /// `C₁⁻¹ L^m`, the lower bound on `cosh(2μⱼL − ln 4C₀²) − 1`.
    pub fn kappa(&self) -> f64 {
        self.l.powf(self.exponent) / self.c1
    }
}

fn gap_at(mus: &[f64], threshold: f64) -> f64 {
    mus.iter()
        .map(|m| (m - threshold).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Scan `L ∈ [L₀/2, L₀]` for the largest eigenvalue-free window around
/// `ln(2C₀)/L` and derive the certificate constants.
pub fn choose_gap_l(spectrum: &Spectrum, l0: f64, c0: f64) -> Result<GapChoice> {
    if !(l0 > 0.0 && l0 < 0.5) {
        return Err(Error::OutOfContract(format!(
            "L₀ = {l0} must lie in (0, 1/2)"
        )));
    }
    if !(c0 > 1.0) || !c0.is_finite() {
        return Err(Error::OutOfContract(format!("C₀ = {c0} must exceed 1")));
    }
    let mus = distinct_eigenvalues(spectrum);
    let top = spectrum.top_eigenvalue();
    let log2c0 = (2.0 * c0).ln();
    let mut best: Option<(f64, f64)> = None;
    let mut best_unresolved = 0.0_f64;
    for j in 0..GAP_SEARCH_POINTS {
        let l = 0.5 * l0 + 0.5 * l0 * j as f64 / (GAP_SEARCH_POINTS - 1) as f64;
        let threshold = log2c0 / l;
        let gap = gap_at(&mus, threshold);
        // The window must close below the largest resolved eigenvalue,
        // otherwise an unresolved eigenvalue could sit inside it.
        if threshold + gap > top {
            best_unresolved = best_unresolved.max(gap);
            continue;
        }
        if best.is_none_or(|(_, g)| gap > g) {
            best = Some((l, gap));
        }
    }
    let Some((l, gap)) = best else {
        return Err(Error::InsufficientSpectrum(format!(
            "no scale in [{}, {l0}] has its window below the top resolved eigenvalue {top}; best gap found {best_unresolved}",
            0.5 * l0
        )));
    };
    if gap <= 0.0 {
        return Err(Error::InsufficientSpectrum(
            "every scanned scale hits an eigenvalue".into(),
        ));
    }
    let fit = spectrum.weyl_fit();
    let m = fit.exponent;
    let c1 = fit
        .c1
        .max(l.powf(m - 1.0) / gap)
        .max(l.powf(m) / ((2.0 * l * gap).cosh() - 1.0));
    let kappa = l.powf(m) / c1;
    let b_min = (1.0 - (1.0 + kappa).powf(-0.5)).ln() / l.ln();
    Ok(GapChoice {
        l0,
        l,
        c0,
        b: b_min + B_MARGIN,
        b_min,
        threshold: log2c0 / l,
        gap,
        c1,
        c1_fit: fit.c1,
        exponent: m,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuantitativeQuantities {
    pub l: f64,
    pub b: f64,
    pub norm_at_0: f64,
    pub norm_at_l: f64,
    pub norm_at_2l: f64,
    /// `1 − L^B`.
    pub bound: f64,
    /// `Σ aⱼ² e^{−2μⱼL} cosh(2μⱼL − ln 4C₀²)`.
    pub cosh_sum: f64,
    pub cosh_sum_holds: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuantitativeReport {
    pub hypotheses: bool,
    pub quantities: QuantitativeQuantities,
    pub margin: f64,
    pub verdict: Verdict,
}

/// Given `I(0) ≤ 2C₀` and `I(2L) ≤ 1/(2C₀)`, check `I(L) ≤ 1 − L^B` and the
/// intermediate cosh inequality.
pub fn quantitative_three_annulus(a: &ModeVector, choice: &GapChoice) -> QuantitativeReport {
    let l = choice.l;
    let c0 = choice.c0;
    let n0 = norm_at(a, 0.0);
    let nl = norm_at(a, l);
    let n2l = norm_at(a, 2.0 * l);
    let hypotheses =
        n0 <= 2.0 * c0 * (1.0 + HYPOTHESIS_RTOL) && n2l <= (1.0 + HYPOTHESIS_RTOL) / (2.0 * c0);
    let shift = (4.0 * c0 * c0).ln();
    let cosh_sum: f64 = a
        .coefficients()
        .iter()
        .zip(a.eigenvalues())
        .filter(|(c, _)| **c != 0.0)
        // e^{-2μL} cosh(2μL − s) written without the overflowing cosh.
        .map(|(&c, &mu)| 0.5 * c * c * ((-shift).exp() + (shift - 4.0 * mu * l).exp()))
        .sum();
    let bound = 1.0 - l.powf(choice.b);
    let cosh_sum_holds = cosh_sum <= 1.0 + 1e-12;
    let margin = bound - nl;
    let verdict = if !hypotheses {
        Verdict::HypothesisNotMet
    } else if margin >= 0.0 && cosh_sum_holds {
        Verdict::Holds
    } else {
        Verdict::Violated
    };
    QuantitativeReport {
        hypotheses,
        quantities: QuantitativeQuantities {
            l,
            b: choice.b,
            norm_at_0: n0,
            norm_at_l: nl,
            norm_at_2l: n2l,
            bound,
            cosh_sum,
            cosh_sum_holds,
        },
        margin,
        verdict,
    }
}

/// Mode vectors sampled at increasing times.
#[derive(Debug, Clone)]
pub struct ModeSeries {
    times: Vec<f64>,
    modes: Vec<ModeVector>,
}

impl ModeSeries {
    pub fn new(times: Vec<f64>, modes: Vec<ModeVector>) -> Result<Self> {
        if times.is_empty() || times.len() != modes.len() {
            return Err(Error::InvalidInput(format!(
                "{} times for {} mode vectors",
                times.len(),
                modes.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "times must be finite and strictly increasing".into(),
            ));
        }
        let len = modes[0].len();
        if let Some(m) = modes.iter().find(|m| m.len() != len) {
            return Err(Error::Dimension {
                expected: len,
                found: m.len(),
            });
        }
        Ok(ModeSeries { times, modes })
    }

    /// Sample `t ↦ f(t)` at `0, dt, 2dt, …` up to `t_end` (inclusive).
    pub fn sample(
        spectrum: &Spectrum,
        t_end: f64,
        dt: f64,
        f: impl Fn(f64) -> Vec<f64>,
    ) -> Result<Self> {
        if !(dt > 0.0) || !(t_end > 0.0) {
            return Err(Error::InvalidInput(
                "sampling needs positive dt and t_end".into(),
            ));
        }
        let steps = (t_end / dt).round() as usize;
        let steps = steps.max(1);
        let times: Vec<f64> = (0..=steps)
            .map(|k| t_end * k as f64 / steps as f64)
            .collect();
        let modes = times
            .iter()
            .map(|&t| ModeVector::new(spectrum, f(t)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(times, modes)
    }

    /// Project grid samples onto the spectrum. Fails if any sample carries
    /// energy beyond the retained modes.
    pub fn from_grid_samples(
        spectrum: &Spectrum,
        times: Vec<f64>,
        samples: &[Vec<f64>],
    ) -> Result<Self> {
        let mut modes = Vec::with_capacity(samples.len());
        for (k, u) in samples.iter().enumerate() {
            let a = spectral::project(u, spectrum)?;
            let back = spectral::synthesize(&a);
            let diff: Vec<f64> = u.iter().zip(&back).map(|(x, y)| x - y).collect();
            let lost = spectral::inner_product(&diff, &diff, spectrum)?.sqrt();
            let total = spectral::inner_product(u, u, spectrum)?.sqrt();
            if lost > 1e-10 * total.max(1e-300) && lost > 1e-14 {
                return Err(Error::InsufficientSpectrum(format!(
                    "source at sample {k} has weighted norm {lost} outside the retained modes"
                )));
            }
            modes.push(a);
        }
        Self::new(times, modes)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn modes(&self) -> &[ModeVector] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn spectrum(&self) -> &Spectrum {
        self.modes[0].spectrum()
    }

    /// Coefficient `i` as a function of time.
    pub fn coefficient_track(&self, i: usize) -> Vec<f64> {
        self.modes.iter().map(|m| m.coefficients()[i]).collect()
    }

    /// CSV with columns `t,index,coefficient`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,index,coefficient\n");
        for (t, m) in self.times.iter().zip(&self.modes) {
            for (i, c) in m.coefficients().iter().enumerate() {
                out.push_str(&format!("{},{i},{}\n", fmt_real(*t), fmt_real(*c)));
            }
        }
        out
    }
}

/// `φ₁(x) = (e^x − 1)/x` and `φ₂(x) = (e^x − 1 − x)/x²`.
fn phi12(x: f64) -> (f64, f64) {
    if x.abs() < 1e-3 {
        let phi1 = 1.0 + x / 2.0 + x * x / 6.0 + x * x * x / 24.0;
        let phi2 = 0.5 + x / 6.0 + x * x / 24.0 + x * x * x / 120.0;
        (phi1, phi2)
    } else {
        let e = x.exp_m1();
        (e / x, (e - x) / (x * x))
    }
}

/// Solve `b' = −μb + a`, `b(0) = 0` on the sample times by integrating the
/// variation-of-constants formula against the piecewise-linear interpolant
/// of `a`. Exact for piecewise-linear sources; `μ = 0` gives the trapezoid
/// rule for `∫₀ᵗ a`.
pub fn duhamel_coefficient(mu: f64, times: &[f64], a: &[f64]) -> Vec<f64> {
    let mut b = vec![0.0; times.len()];
    for k in 0..times.len().saturating_sub(1) {
        let h = times[k + 1] - times[k];
        let x = -mu * h;
        let (phi1, phi2) = phi12(x);
        b[k + 1] = x.exp() * b[k] + h * ((phi1 - phi2) * a[k] + phi2 * a[k + 1]);
    }
    b
}

/// Right inverse of `∂ₜ − L`: the solution `w` of `(∂ₜ − L)w = f`,
/// `w(0) = 0`, sampled at the times of `f` up to `t_end ≤ 1`.
pub fn duhamel_inverse(f: &ModeSeries, t_end: f64) -> Result<ModeSeries> {
    if !(t_end > 0.0) || t_end > 1.0 {
        return Err(Error::OutOfContract(format!(
            "t_end = {t_end} must lie in (0, 1]"
        )));
    }
    if f.times[0] != 0.0 {
        return Err(Error::InvalidInput(
            "source samples must start at t = 0".into(),
        ));
    }
    let last = f
        .times
        .iter()
        .rposition(|&t| t <= t_end * (1.0 + 1e-12))
        .unwrap_or(0);
    if (f.times[last] - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(Error::InvalidInput(format!(
            "source samples do not reach t_end = {t_end} (last sample {})",
            f.times[last]
        )));
    }
    let times = f.times[..=last].to_vec();
    let spectrum = f.spectrum().clone();
    let n = spectrum.len();
    let mut coeffs = vec![vec![0.0; n]; times.len()];
    for (i, &mu) in spectrum.eigenvalues().iter().enumerate() {
        let a: Vec<f64> = f.modes[..=last]
            .iter()
            .map(|m| m.coefficients()[i])
            .collect();
        if a.iter().all(|v| *v == 0.0) {
            continue;
        }
        for (k, b) in duhamel_coefficient(mu, &times, &a).into_iter().enumerate() {
            coeffs[k][i] = b;
        }
    }
    let modes = coeffs
        .into_iter()
        .map(|c| ModeVector::new(&spectrum, c))
        .collect::<Result<Vec<_>>>()?;
    ModeSeries::new(times, modes)
}

/// `‖(∂ₜ − L)w − f‖` at interior samples, with the time derivative taken by
/// fourth-order central differences. Needs a uniform time grid with at
/// least five samples. Returns `(time, residual)` pairs.
pub fn duhamel_residual(w: &ModeSeries, f: &ModeSeries) -> Result<Vec<(f64, f64)>> {
    let n = w.len();
    if n < 5 {
        return Err(Error::TooFewSamples {
            needed: 5,
            found: n,
        });
    }
    if f.len() < n {
        return Err(Error::Dimension {
            expected: n,
            found: f.len(),
        });
    }
    let h = w.times[1] - w.times[0];
    if w.times
        .windows(2)
        .any(|p| ((p[1] - p[0]) - h).abs() > 1e-9 * h)
    {
        return Err(Error::InvalidInput(
            "residual needs a uniform time grid".into(),
        ));
    }
    let mus = w.spectrum().eigenvalues();
    let mut out = Vec::with_capacity(n - 4);
    for k in 2..n - 2 {
        let mut sq = 0.0;
        for (i, &mu) in mus.iter().enumerate() {
            let b = |j: usize| w.modes[j].coefficients()[i];
            let db = (b(k - 2) - 8.0 * b(k - 1) + 8.0 * b(k + 1) - b(k + 2)) / (12.0 * h);
            let r = db + mu * b(k) - f.modes[k].coefficients()[i];
            sq += r * r;
        }
        out.push((w.times[k], sq.sqrt()));
    }
    Ok(out)
}

/// Empirical `C` in `‖w(t)‖ ≤ C t sup_{τ≤t}‖f(τ)‖`, the maximum of the ratio
/// over sample times `t > 0` with nonzero source.
pub fn duhamel_bound_constant(w: &ModeSeries, f: &ModeSeries) -> f64 {
    let mut sup_f: f64 = 0.0;
    let mut c: f64 = 0.0;
    for (k, (&t, wm)) in w.times.iter().zip(&w.modes).enumerate() {
        sup_f = sup_f.max(f.modes[k].norm());
        if t > 0.0 && sup_f > 0.0 {
            c = c.max(wm.norm() / (t * sup_f));
        }
    }
    c
}
