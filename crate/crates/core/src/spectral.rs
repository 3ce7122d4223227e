//! Eigentheory of the drift operator `L = Δ − ½x·∇ + |A|² + ½` on the round
//! shrinkers.
//!
//! On `S^n(R)` the eigenfunctions of `−L` are the spherical harmonics (Fourier
//! modes for `n = 1`) and the eigenvalue of degree `k` is
//! `κ_k / R² − 1`, where `κ_k` is the `−Δ` eigenvalue on the unit sphere.
//! Eigenfunctions are normalized in `⟨u, v⟩ = ∫_Σ u v e^{-|x|²/4}`, without
//! the `(4π)^{-n/2}` factor that appears in the Gaussian area.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::export::fmt_real;
use crate::grid::{Grid, GridSpec};
use crate::shrinker::Shrinker;

/// Version tag written into every JSON document produced by the crate.
pub const SCHEMA_VERSION: u32 = 1;

/// Default number of distinct eigenvalue levels.
pub const DEFAULT_CIRCLE_LEVELS: usize = 64;
pub const DEFAULT_SPHERE_LEVELS: usize = 32;

/// Shift applied to eigenvalues before Weyl counting so that all of them are
/// at least one.
pub const WEYL_OFFSET: f64 = 2.0;

/// Degree, order and parity of a real harmonic. On the circle `order` equals
/// `degree`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ModeLabel {
    pub degree: usize,
    pub order: usize,
    pub sine: bool,
}

/// One distinct eigenvalue with its multiplicity and first index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Level {
    pub degree: usize,
    pub eigenvalue: f64,
    pub multiplicity: usize,
    pub start: usize,
}

/// Constants `(C₁, m)` of `#{j : μⱼ + offset ≤ N} ≤ C₁ N^m` for `N > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeylFit {
    pub c1: f64,
    pub exponent: f64,
    pub offset: f64,
}

/// Result of [`weyl_count`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeylCount {
    pub count: usize,
    pub fit: WeylFit,
}

struct SpectrumInner {
    shrinker: Shrinker,
    grid: Arc<Grid>,
    levels: Vec<Level>,
    eigenvalues: Vec<f64>,
    labels: Vec<ModeLabel>,
    eigenfunctions: Vec<Vec<f64>>,
    weyl: WeylFit,
}

/// Truncated eigen-decomposition of `−L`, with eigenfunctions sampled on a
/// grid. Cheap to clone.
#[derive(Clone)]
pub struct Spectrum(Arc<SpectrumInner>);

impl fmt::Debug for Spectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Spectrum")
            .field("n", &self.0.shrinker.dimension())
            .field("levels", &self.0.levels.len())
            .field("modes", &self.0.eigenvalues.len())
            .field("grid", &self.0.grid.spec())
            .finish()
    }
}

/// Eigenvalue of `−L` for harmonics of degree `k`.
pub fn level_eigenvalue(shrinker: &Shrinker, k: usize) -> f64 {
    let kf = k as f64;
    let kappa = match shrinker.dimension() {
        1 => kf * kf,
        _ => kf * (kf + 1.0),
    };
    // R² = 2n exactly; using it avoids rounding in R = √(2n).
    kappa / (2.0 * shrinker.dimension() as f64) - (shrinker.second_fundamental_norm_sq() + 0.5)
}

fn level_multiplicity(n: usize, k: usize) -> usize {
    match (n, k) {
        (1, 0) => 1,
        (1, _) => 2,
        _ => 2 * k + 1,
    }
}

/// Build the spectrum with `cutoff` distinct levels on a default grid large
/// enough to integrate products of retained modes exactly.
pub fn build_spectrum(shrinker: &Shrinker, cutoff: usize) -> Result<Spectrum> {
    let spec = match shrinker.dimension() {
        1 => GridSpec::Circle {
            nodes: (4 * cutoff).next_power_of_two().max(256),
        },
        _ => {
            let nlat = (cutoff + cutoff / 2).max(48);
            GridSpec::Sphere {
                nlat,
                nlon: 2 * nlat,
            }
        }
    };
    build_spectrum_on(shrinker, shrinker.grid(spec)?, cutoff)
}

/// Build the spectrum on a given grid.
pub fn build_spectrum_on(shrinker: &Shrinker, grid: Arc<Grid>, cutoff: usize) -> Result<Spectrum> {
    if cutoff < 4 {
        return Err(Error::InvalidInput(format!(
            "spectrum cutoff must retain at least 4 levels, got {cutoff}"
        )));
    }
    Spectrum::assemble(shrinker, grid, cutoff)
}

impl Spectrum {
    pub(crate) fn assemble(
        shrinker: &Shrinker,
        grid: Arc<Grid>,
        cutoff: usize,
    ) -> Result<Spectrum> {
        if grid.dimension() != shrinker.dimension() {
            return Err(Error::UnsupportedGeometry {
                n: grid.dimension(),
            });
        }
        if cutoff == 0 || cutoff - 1 > grid.max_degree() {
            return Err(Error::InsufficientSpectrum(format!(
                "{cutoff} levels need harmonics of degree {} but the grid resolves {}",
                cutoff.saturating_sub(1),
                grid.max_degree()
            )));
        }
        let n = shrinker.dimension();
        let scale = 1.0 / (shrinker.radius().powi(n as i32) * shrinker.weight_on_surface()).sqrt();

        let mut levels = Vec::with_capacity(cutoff);
        let mut eigenvalues = Vec::new();
        let mut labels = Vec::new();
        let mut eigenfunctions = Vec::new();
        for k in 0..cutoff {
            let mu = level_eigenvalue(shrinker, k);
            let multiplicity = level_multiplicity(n, k);
            levels.push(Level {
                degree: k,
                eigenvalue: mu,
                multiplicity,
                start: eigenvalues.len(),
            });
            let mut push = |order: usize, sine: bool| -> Result<()> {
                let y = grid.unit_harmonic(k, order, sine)?;
                eigenfunctions.push(y.into_iter().map(|v| v * scale).collect());
                eigenvalues.push(mu);
                labels.push(ModeLabel {
                    degree: k,
                    order,
                    sine,
                });
                Ok(())
            };
            match n {
                1 => {
                    push(k, false)?;
                    if k > 0 {
                        push(k, true)?;
                    }
                }
                _ => {
                    push(0, false)?;
                    for m in 1..=k {
                        push(m, false)?;
                        push(m, true)?;
                    }
                }
            }
        }
        let weyl = fit_weyl(&levels, n);
        Ok(Spectrum(Arc::new(SpectrumInner {
            shrinker: *shrinker,
            grid,
            levels,
            eigenvalues,
            labels,
            eigenfunctions,
            weyl,
        })))
    }

    pub fn shrinker(&self) -> &Shrinker {
        &self.0.shrinker
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.0.grid
    }

    /// Eigenvalues with multiplicity, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.0.eigenvalues
    }

    pub fn labels(&self) -> &[ModeLabel] {
        &self.0.labels
    }

    pub fn levels(&self) -> &[Level] {
        &self.0.levels
    }

    /// Number of retained modes (with multiplicity).
    pub fn len(&self) -> usize {
        self.0.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.eigenvalues.is_empty()
    }

    /// Number of distinct levels retained.
    pub fn cutoff(&self) -> usize {
        self.0.levels.len()
    }

    pub fn eigenfunction(&self, i: usize) -> &[f64] {
        &self.0.eigenfunctions[i]
    }

    pub fn weyl_fit(&self) -> WeylFit {
        self.0.weyl
    }

    /// Largest retained eigenvalue.
    pub fn top_eigenvalue(&self) -> f64 {
        self.0
            .levels
            .last()
            .map(|l| l.eigenvalue)
            .unwrap_or(f64::NEG_INFINITY)
    }

    /// The first eigenvalue that is *not* retained.
    pub fn first_unresolved_eigenvalue(&self) -> f64 {
        level_eigenvalue(&self.0.shrinker, self.0.levels.len())
    }

    /// Index of the first mode of the given degree/order/parity.
    pub fn index_of(&self, label: ModeLabel) -> Option<usize> {
        self.0.labels.iter().position(|l| *l == label)
    }

    /// Same spectrum with fewer levels (shares the grid).
    pub fn truncated(&self, cutoff: usize) -> Result<Spectrum> {
        Spectrum::assemble(&self.0.shrinker, self.0.grid.clone(), cutoff)
    }

    /// JSON document: eigenvalues, multiplicities, and the Weyl fit.
    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Doc<'a> {
            schema_version: u32,
            shrinker: Shrinker,
            grid: GridSpec,
            cutoff: usize,
            modes: usize,
            eigenvalues: &'a [f64],
            levels: &'a [Level],
            weyl: WeylFit,
        }
        serde_json::to_value(Doc {
            schema_version: SCHEMA_VERSION,
            shrinker: self.0.shrinker,
            grid: self.0.grid.spec(),
            cutoff: self.cutoff(),
            modes: self.len(),
            eigenvalues: self.eigenvalues(),
            levels: self.levels(),
            weyl: self.0.weyl,
        })
        .expect("spectrum document is serializable")
    }

    /// CSV with columns `index,degree,order,parity,eigenvalue`.
    pub fn eigenvalue_csv(&self) -> String {
        let mut out = String::from("index,degree,order,parity,eigenvalue\n");
        for (i, (mu, l)) in self.eigenvalues().iter().zip(self.labels()).enumerate() {
            let parity = if l.sine { "sin" } else { "cos" };
            out.push_str(&format!(
                "{i},{},{},{parity},{}\n",
                l.degree,
                l.order,
                fmt_real(*mu)
            ));
        }
        out
    }
}

fn fit_weyl(levels: &[Level], n: usize) -> WeylFit {
    let exponent = n as f64 / 2.0 + 0.5;
    // The counting function only jumps at shifted eigenvalues, so its ratio
    // to N^m peaks at one of them (or as N → 1⁺).
    let mut c1: f64 = 0.0;
    let mut count = 0;
    for level in levels {
        count += level.multiplicity;
        let shifted = level.eigenvalue + WEYL_OFFSET;
        if shifted > 1.0 {
            c1 = c1.max(count as f64 / shifted.powf(exponent));
        } else {
            c1 = c1.max(count as f64);
        }
    }
    WeylFit {
        c1,
        exponent,
        offset: WEYL_OFFSET,
    }
}

/// `#{j : μⱼ ≤ N}` together with the stored Weyl constants.
pub fn weyl_count(spectrum: &Spectrum, threshold: f64) -> Result<WeylCount> {
    if !threshold.is_finite() || threshold >= spectrum.first_unresolved_eigenvalue() {
        return Err(Error::InsufficientSpectrum(format!(
            "N = {threshold} reaches the unresolved eigenvalue {}",
            spectrum.first_unresolved_eigenvalue()
        )));
    }
    let count = spectrum
        .eigenvalues()
        .iter()
        .filter(|&&mu| mu <= threshold)
        .count();
    Ok(WeylCount {
        count,
        fit: spectrum.weyl_fit(),
    })
}

/// Coefficients of a function in the `L`-eigenbasis.
#[derive(Debug, Clone)]
pub struct ModeVector {
    spectrum: Spectrum,
    coefficients: Vec<f64>,
}

impl ModeVector {
    pub fn new(spectrum: &Spectrum, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != spectrum.len() {
            return Err(Error::Dimension {
                expected: spectrum.len(),
                found: coefficients.len(),
            });
        }
        if let Some(i) = coefficients.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite coefficient at index {i}"
            )));
        }
        Ok(ModeVector {
            spectrum: spectrum.clone(),
            coefficients,
        })
    }

    pub fn zeros(spectrum: &Spectrum) -> Self {
        ModeVector {
            spectrum: spectrum.clone(),
            coefficients: vec![0.0; spectrum.len()],
        }
    }

    /// The `i`-th basis vector.
    pub fn unit(spectrum: &Spectrum, i: usize) -> Result<Self> {
        let mut c = vec![0.0; spectrum.len()];
        *c.get_mut(i).ok_or(Error::Dimension {
            expected: spectrum.len(),
            found: i + 1,
        })? = 1.0;
        Self::new(spectrum, c)
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.spectrum.eigenvalues()
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(|c| *c == 0.0)
    }

    /// Weighted `L²` norm via Plancherel.
    pub fn norm(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> ModeVector {
        ModeVector {
            spectrum: self.spectrum.clone(),
            coefficients: self.coefficients.iter().map(|c| c * factor).collect(),
        }
    }

    /// CSV with columns `index,eigenvalue,coefficient`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,eigenvalue,coefficient\n");
        for (i, (mu, a)) in self
            .eigenvalues()
            .iter()
            .zip(&self.coefficients)
            .enumerate()
        {
            out.push_str(&format!("{i},{},{}\n", fmt_real(*mu), fmt_real(*a)));
        }
        out
    }
}

/// `x·∇u` at each node. Identically zero on a round shrinker because the
/// position vector is normal to `Σ`; computed literally from the tangential
/// gradient so the cancellation can be checked.
pub fn drift_term(u: &[f64], spectrum: &Spectrum) -> Result<Vec<f64>> {
    let grid = spectrum.grid();
    let derivs = grid.derivatives(u)?;
    // x = R ω and ∇_Σ u = ∇_S u / R.
    Ok(derivs
        .iter()
        .zip(grid.directions())
        .map(|(d, w)| w[0] * d.grad[0] + w[1] * d.grad[1] + w[2] * d.grad[2])
        .collect())
}

/// `Lu = Δu − ½x·∇u + |A|²u + ½u`, with the Laplacian taken spectrally on
/// the grid.
pub fn apply_l(u: &[f64], spectrum: &Spectrum) -> Result<Vec<f64>> {
    let grid = spectrum.grid();
    let shrinker = spectrum.shrinker();
    let r2 = 2.0 * shrinker.dimension() as f64;
    let potential = shrinker.second_fundamental_norm_sq() + 0.5;
    let lap = grid.unit_laplacian(u)?;
    let drift = drift_term(u, spectrum)?;
    Ok(lap
        .iter()
        .zip(&drift)
        .zip(u)
        .map(|((l, d), v)| l / r2 - 0.5 * d + potential * v)
        .collect())
}

/// Weighted projection `aᵢ = ⟨u, φᵢ⟩`.
pub fn project(u: &[f64], spectrum: &Spectrum) -> Result<ModeVector> {
    let grid = spectrum.grid();
    grid.check_len(u)?;
    let weight = spectrum.shrinker().weight_on_surface();
    let wu: Vec<f64> = grid
        .weights()
        .iter()
        .zip(u)
        .map(|(w, v)| w * v * weight)
        .collect();
    let coefficients = (0..spectrum.len())
        .map(|i| {
            spectrum
                .eigenfunction(i)
                .iter()
                .zip(&wu)
                .map(|(p, q)| p * q)
                .sum()
        })
        .collect();
    ModeVector::new(spectrum, coefficients)
}

/// `Σ aᵢ φᵢ` on the grid.
pub fn synthesize(a: &ModeVector) -> Vec<f64> {
    let spectrum = a.spectrum();
    let mut out = vec![0.0; spectrum.grid().len()];
    for (i, &c) in a.coefficients().iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        for (o, p) in out.iter_mut().zip(spectrum.eigenfunction(i)) {
            *o += c * p;
        }
    }
    out
}

/// Weighted inner product `∫_Σ u v e^{-|x|²/4}` by quadrature.
pub fn inner_product(u: &[f64], v: &[f64], spectrum: &Spectrum) -> Result<f64> {
    let grid = spectrum.grid();
    grid.check_len(u)?;
    grid.check_len(v)?;
    let w = spectrum.shrinker().weight_on_surface();
    Ok(grid
        .weights()
        .iter()
        .zip(u.iter().zip(v))
        .map(|(q, (a, b))| q * a * b)
        .sum::<f64>()
        * w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle() -> Spectrum {
        build_spectrum(&Shrinker::circle(), 8).unwrap()
    }

    #[test]
    fn circle_eigenvalue_list() {
        let s = circle();
        let expected = [-1.0, -0.5, -0.5, 1.0, 1.0, 3.5, 3.5];
        for (a, b) in s.eigenvalues().iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(s.len(), 15);
    }

    #[test]
    fn sphere_eigenvalue_list() {
        let s = build_spectrum(&Shrinker::sphere(), 4).unwrap();
        let mut expected = vec![-1.0];
        expected.extend([-0.5; 3]);
        expected.extend([0.5; 5]);
        expected.extend([2.0; 7]);
        assert_eq!(s.len(), expected.len());
        for (a, b) in s.eigenvalues().iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn cutoff_below_four_levels_is_rejected() {
        assert!(build_spectrum(&Shrinker::circle(), 3).is_err());
    }

    #[test]
    fn cutoff_beyond_grid_is_rejected() {
        let s = Shrinker::circle();
        let grid = s.grid(GridSpec::Circle { nodes: 16 }).unwrap();
        assert!(matches!(
            build_spectrum_on(&s, grid, 9),
            Err(Error::InsufficientSpectrum(_))
        ));
    }

    #[test]
    fn constant_is_the_bottom_eigenfunction() {
        for s in [circle(), build_spectrum(&Shrinker::sphere(), 4).unwrap()] {
            let one = vec![1.0; s.grid().len()];
            let lu = apply_l(&one, &s).unwrap();
            assert!(lu.iter().all(|v| (v - 1.0).abs() < 1e-10));
        }
    }

    #[test]
    fn apply_l_on_cos_2theta() {
        let s = circle();
        let u: Vec<f64> = s
            .grid()
            .directions()
            .iter()
            .map(|d| 2.0 * d[0] * d[0] - 1.0)
            .collect();
        let lu = apply_l(&u, &s).unwrap();
        for (a, b) in lu.iter().zip(&u) {
            assert!((a + b).abs() < 1e-10);
        }
        let zero = vec![0.0; u.len()];
        assert!(apply_l(&zero, &s).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn grid_mismatch_is_a_dimension_error() {
        let s = circle();
        assert!(matches!(
            apply_l(&[0.0; 5], &s),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            project(&[0.0; 5], &s),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn projection_of_scaled_basis_functions() {
        let s = circle();
        let u: Vec<f64> = s.eigenfunction(1).iter().map(|v| 3.0 * v).collect();
        let a = project(&u, &s).unwrap();
        for (i, c) in a.coefficients().iter().enumerate() {
            let expected = if i == 1 { 3.0 } else { 0.0 };
            assert!((c - expected).abs() < 1e-10);
        }
        let u: Vec<f64> = s
            .eigenfunction(0)
            .iter()
            .zip(s.eigenfunction(3))
            .map(|(a, b)| a + b)
            .collect();
        let a = project(&u, &s).unwrap();
        assert!((a.coefficients()[0] - 1.0).abs() < 1e-10);
        assert!((a.coefficients()[3] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn weyl_count_examples() {
        let s = circle();
        assert_eq!(weyl_count(&s, 1.0).unwrap().count, 5);
        assert_eq!(weyl_count(&s, 0.0).unwrap().count, 3);
        assert_eq!(weyl_count(&s, -1.5).unwrap().count, 0);
        assert!(matches!(
            weyl_count(&s, 1e6),
            Err(Error::InsufficientSpectrum(_))
        ));
    }

    #[test]
    fn weyl_fit_bounds_count() {
        for s in [circle(), build_spectrum(&Shrinker::sphere(), 10).unwrap()] {
            let fit = s.weyl_fit();
            assert!((fit.exponent - (s.shrinker().dimension() as f64 / 2.0 + 0.5)).abs() < 1e-15);
            let top = s.top_eigenvalue() + fit.offset;
            let mut big_n = 1.0 + 1e-9;
            while big_n <= top {
                let count = s
                    .eigenvalues()
                    .iter()
                    .filter(|&&mu| mu + fit.offset <= big_n)
                    .count();
                assert!(count as f64 <= fit.c1 * big_n.powf(fit.exponent) * (1.0 + 1e-12));
                big_n += 0.01;
            }
        }
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let s = circle();
        let a = ModeVector::unit(&s, 2).unwrap();
        let csv = a.to_csv();
        assert!(csv.starts_with("index,eigenvalue,coefficient\n0,-1,0\n1,-0.5,0\n2,-0.5,1\n"));
        let json = s.to_json();
        assert_eq!(json["schema_version"], 1);
        assert_eq!(json["levels"][1]["multiplicity"], 2);
    }
}
