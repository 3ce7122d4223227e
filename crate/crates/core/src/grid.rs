//! Quadrature grids on the round shrinkers and their grid-level spectral
//! calculus: a uniform angular grid with FFT differentiation on the circle,
//! and a Gauss–Legendre × uniform-longitude product grid with a real
//! spherical-harmonic transform on the 2-sphere.
//!
//! All derivative data is expressed on the *unit* sphere; callers scale by
//! the shrinker radius where intrinsic quantities are needed.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{gauss_legendre, harmonic_index, LegendreTable};

/// Smallest admissible number of quadrature nodes.
pub const MIN_NODES: usize = 16;

/// Serializable description of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    Circle { nodes: usize },
    Sphere { nlat: usize, nlon: usize },
}

impl GridSpec {
    pub fn dimension(&self) -> usize {
        match self {
            GridSpec::Circle { .. } => 1,
            GridSpec::Sphere { .. } => 2,
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            GridSpec::Circle { nodes } => nodes,
            GridSpec::Sphere { nlat, nlon } => nlat * nlon,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// First and second derivative data of a grid function at one node, with
/// respect to the unit-sphere metric.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LocalDerivatives {
    pub value: f64,
    /// Tangential gradient as an ambient vector (third entry zero on the circle).
    pub grad: [f64; 3],
    /// `|∇u|²`.
    pub grad_sq: f64,
    pub laplacian: f64,
    /// `Hess u(∇u, ∇u)`.
    pub hess_grad_grad: f64,
    /// Frobenius norm of the covariant Hessian.
    pub hess_norm: f64,
}

struct CircleData {
    angles: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

struct SphereData {
    nlat: usize,
    nlon: usize,
    lmax: usize,
    cos_colat: Vec<f64>,
    sin_colat: Vec<f64>,
    lat_weights: Vec<f64>,
    legendre: Vec<LegendreTable>,
    /// `cos(m φ_j)` at `m * nlon + j`.
    cos_table: Vec<f64>,
    sin_table: Vec<f64>,
}

enum Layout {
    Circle(CircleData),
    Sphere(SphereData),
}

/// A quadrature grid on a round sphere of a given radius.
pub struct Grid {
    spec: GridSpec,
    radius: f64,
    directions: Vec<[f64; 3]>,
    unit_weights: Vec<f64>,
    layout: Layout,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("spec", &self.spec)
            .field("radius", &self.radius)
            .finish()
    }
}

impl Grid {
    pub fn new(spec: GridSpec, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidInput(format!("grid radius {radius}")));
        }
        match spec {
            GridSpec::Circle { nodes } => Self::circle(nodes, radius),
            GridSpec::Sphere { nlat, nlon } => Self::sphere(nlat, nlon, radius),
        }
    }

    fn circle(nodes: usize, radius: f64) -> Result<Self> {
        if nodes < MIN_NODES {
            return Err(Error::InvalidInput(format!(
                "circle grid needs at least {MIN_NODES} nodes, got {nodes}"
            )));
        }
        let angles: Vec<f64> = (0..nodes)
            .map(|j| 2.0 * PI * j as f64 / nodes as f64)
            .collect();
        let directions = angles.iter().map(|t| [t.cos(), t.sin(), 0.0]).collect();
        let unit_weights = vec![2.0 * PI / nodes as f64; nodes];
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(nodes);
        let inverse = planner.plan_fft_inverse(nodes);
        Ok(Grid {
            spec: GridSpec::Circle { nodes },
            radius,
            directions,
            unit_weights,
            layout: Layout::Circle(CircleData {
                angles,
                forward,
                inverse,
            }),
        })
    }

    fn sphere(nlat: usize, nlon: usize, radius: f64) -> Result<Self> {
        if nlat < 4 || nlon < 8 || nlat * nlon < MIN_NODES {
            return Err(Error::InvalidInput(format!(
                "sphere grid {nlat}x{nlon} is too coarse"
            )));
        }
        let lmax = (nlat - 1).min((nlon - 1) / 2);
        let (x, w) = gauss_legendre(nlat);
        let sin_colat: Vec<f64> = x.iter().map(|x| (1.0 - x * x).sqrt()).collect();
        let dphi = 2.0 * PI / nlon as f64;
        let phis: Vec<f64> = (0..nlon).map(|j| j as f64 * dphi).collect();

        let mut directions = Vec::with_capacity(nlat * nlon);
        let mut unit_weights = Vec::with_capacity(nlat * nlon);
        for i in 0..nlat {
            for phi in &phis {
                directions.push([sin_colat[i] * phi.cos(), sin_colat[i] * phi.sin(), x[i]]);
                unit_weights.push(w[i] * dphi);
            }
        }

        let mut cos_table = vec![0.0; (lmax + 1) * nlon];
        let mut sin_table = vec![0.0; (lmax + 1) * nlon];
        for m in 0..=lmax {
            for (j, phi) in phis.iter().enumerate() {
                cos_table[m * nlon + j] = (m as f64 * phi).cos();
                sin_table[m * nlon + j] = (m as f64 * phi).sin();
            }
        }
        let legendre = x.iter().map(|&x| LegendreTable::new(lmax, x)).collect();

        Ok(Grid {
            spec: GridSpec::Sphere { nlat, nlon },
            radius,
            directions,
            unit_weights,
            layout: Layout::Sphere(SphereData {
                nlat,
                nlon,
                lmax,
                cos_colat: x,
                sin_colat,
                lat_weights: w,
                legendre,
                cos_table,
                sin_table,
            }),
        })
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dimension(&self) -> usize {
        self.spec.dimension()
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Unit position vectors of the nodes.
    pub fn directions(&self) -> &[[f64; 3]] {
        &self.directions
    }

    /// Quadrature weights for the unit-sphere measure `dω`.
    pub fn unit_weights(&self) -> &[f64] {
        &self.unit_weights
    }

    /// Quadrature weights for the intrinsic measure of the sphere of radius
    /// `radius`, i.e. `radius^n dω`.
    pub fn weights(&self) -> Vec<f64> {
        let scale = self.radius.powi(self.dimension() as i32);
        self.unit_weights.iter().map(|w| w * scale).collect()
    }

    /// Highest harmonic degree resolved exactly by the grid transform.
    pub fn max_degree(&self) -> usize {
        match &self.layout {
            Layout::Circle(c) => c.angles.len() / 2 - 1,
            Layout::Sphere(s) => s.lmax,
        }
    }

    /// Largest eigenvalue of `-Δ` on the unit sphere carried by the grid.
    pub fn max_laplacian_eigenvalue(&self) -> f64 {
        match &self.layout {
            Layout::Circle(c) => {
                let k = (c.angles.len() / 2) as f64;
                k * k
            }
            Layout::Sphere(s) => (s.lmax * (s.lmax + 1)) as f64,
        }
    }

    pub fn check_len(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                found: u.len(),
            });
        }
        Ok(())
    }

    /// Samples of the real harmonic of the given degree/order, normalized in
    /// `L²(dω)` on the unit sphere. On the circle `order` is ignored and the
    /// harmonic is `cos(kθ)` or `sin(kθ)`.
    pub fn unit_harmonic(&self, degree: usize, order: usize, sine: bool) -> Result<Vec<f64>> {
        if degree > self.max_degree() {
            return Err(Error::InsufficientSpectrum(format!(
                "degree {degree} exceeds grid resolution {}",
                self.max_degree()
            )));
        }
        match &self.layout {
            Layout::Circle(c) => {
                let k = degree as f64;
                Ok(c.angles
                    .iter()
                    .map(|t| {
                        if degree == 0 {
                            1.0 / (2.0 * PI).sqrt()
                        } else if sine {
                            (k * t).sin() / PI.sqrt()
                        } else {
                            (k * t).cos() / PI.sqrt()
                        }
                    })
                    .collect())
            }
            Layout::Sphere(s) => {
                if order > degree || (order == 0 && sine) {
                    return Err(Error::InvalidInput(format!(
                        "no harmonic with l = {degree}, m = {order}, sine = {sine}"
                    )));
                }
                let norm = if order == 0 { 1.0 } else { 2f64.sqrt() };
                let trig = if sine { &s.sin_table } else { &s.cos_table };
                let mut out = Vec::with_capacity(self.len());
                for i in 0..s.nlat {
                    let p = norm * s.legendre[i].value(degree, order);
                    for j in 0..s.nlon {
                        out.push(p * trig[order * s.nlon + j]);
                    }
                }
                Ok(out)
            }
        }
    }

    /// Multiply each grid-level harmonic component by `multiplier(κ)`, where
    /// `κ` is its eigenvalue of `-Δ` on the unit sphere. On the sphere the
    /// result is the band-limited projection to degree `max_degree`.
    pub fn apply_multiplier(&self, u: &[f64], multiplier: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        self.check_len(u)?;
        match &self.layout {
            Layout::Circle(c) => {
                let n = u.len();
                let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                c.forward.process(&mut buf);
                for (j, z) in buf.iter_mut().enumerate() {
                    let k = signed_wavenumber(j, n) as f64;
                    *z *= multiplier(k * k);
                }
                c.inverse.process(&mut buf);
                Ok(buf.iter().map(|z| z.re / n as f64).collect())
            }
            Layout::Sphere(s) => {
                let mut coeffs = s.forward(u);
                for l in 0..=s.lmax {
                    let f = multiplier((l * (l + 1)) as f64);
                    for c in &mut coeffs[l * l..(l + 1) * (l + 1)] {
                        *c *= f;
                    }
                }
                Ok(s.synthesize_values(&coeffs))
            }
        }
    }

    /// Laplace–Beltrami operator of the unit sphere, applied spectrally.
    pub fn unit_laplacian(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.apply_multiplier(u, |kappa| -kappa)
    }

    /// Gradient and Hessian data at every node.
    pub fn derivatives(&self, u: &[f64]) -> Result<Vec<LocalDerivatives>> {
        self.check_len(u)?;
        match &self.layout {
            Layout::Circle(c) => Ok(c.derivatives(u)),
            Layout::Sphere(s) => Ok(s.derivatives(u, &self.directions)),
        }
    }

    /// Fraction of `∫u² dω` carried by harmonics of degree at most `degree`.
    /// Returns zero for the zero function.
    pub fn low_degree_fraction(&self, u: &[f64], degree: usize) -> Result<f64> {
        self.check_len(u)?;
        let total: f64 = u
            .iter()
            .zip(&self.unit_weights)
            .map(|(v, w)| w * v * v)
            .sum();
        if total == 0.0 {
            return Ok(0.0);
        }
        let low = match &self.layout {
            Layout::Circle(c) => {
                let n = u.len();
                let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                c.forward.process(&mut buf);
                let scale = 2.0 * PI / (n as f64 * n as f64);
                buf.iter()
                    .enumerate()
                    .filter(|(j, _)| signed_wavenumber(*j, n).unsigned_abs() as usize <= degree)
                    .map(|(_, z)| z.norm_sqr() * scale)
                    .sum::<f64>()
            }
            Layout::Sphere(s) => {
                let coeffs = s.forward(u);
                let top = (degree.min(s.lmax) + 1).pow(2);
                coeffs[..top].iter().map(|c| c * c).sum::<f64>()
            }
        };
        Ok((low / total).clamp(0.0, 1.0))
    }
}

#[inline]
fn signed_wavenumber(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

impl CircleData {
    fn derivatives(&self, u: &[f64]) -> Vec<LocalDerivatives> {
        let n = u.len();
        let mut hat: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut hat);

        let mut d1 = hat.clone();
        let mut d2 = hat;
        for j in 0..n {
            let k = signed_wavenumber(j, n);
            let kf = k as f64;
            // The Nyquist mode has no odd derivative.
            d1[j] = if n.is_multiple_of(2) && j == n / 2 {
                Complex64::new(0.0, 0.0)
            } else {
                d1[j] * Complex64::new(0.0, kf)
            };
            d2[j] *= -kf * kf;
        }
        self.inverse.process(&mut d1);
        self.inverse.process(&mut d2);

        let inv_n = 1.0 / n as f64;
        (0..n)
            .map(|j| {
                let du = d1[j].re * inv_n;
                let ddu = d2[j].re * inv_n;
                let t = self.angles[j];
                LocalDerivatives {
                    value: u[j],
                    grad: [-t.sin() * du, t.cos() * du, 0.0],
                    grad_sq: du * du,
                    laplacian: ddu,
                    hess_grad_grad: ddu * du * du,
                    hess_norm: ddu.abs(),
                }
            })
            .collect()
    }
}

impl SphereData {
    fn forward(&self, u: &[f64]) -> Vec<f64> {
        let (nlat, nlon, lmax) = (self.nlat, self.nlon, self.lmax);
        let dphi = 2.0 * PI / nlon as f64;
        let mut coeffs = vec![0.0; (lmax + 1) * (lmax + 1)];
        let mut fc = vec![0.0; lmax + 1];
        let mut fs = vec![0.0; lmax + 1];
        for i in 0..nlat {
            let ring = &u[i * nlon..(i + 1) * nlon];
            for m in 0..=lmax {
                let ct = &self.cos_table[m * nlon..(m + 1) * nlon];
                let st = &self.sin_table[m * nlon..(m + 1) * nlon];
                fc[m] = ring.iter().zip(ct).map(|(a, b)| a * b).sum::<f64>() * dphi;
                fs[m] = ring.iter().zip(st).map(|(a, b)| a * b).sum::<f64>() * dphi;
            }
            let w = self.lat_weights[i];
            let table = &self.legendre[i];
            for l in 0..=lmax {
                coeffs[harmonic_index(l, 0, false)] += w * table.value(l, 0) * fc[0];
                for m in 1..=l {
                    let p = w * 2f64.sqrt() * table.value(l, m);
                    coeffs[harmonic_index(l, m, false)] += p * fc[m];
                    coeffs[harmonic_index(l, m, true)] += p * fs[m];
                }
            }
        }
        coeffs
    }

    /// Per-latitude Fourier amplitudes `(A_m, B_m)` of the synthesized field
    /// and of its first and second colatitude derivatives.
    fn ring_amplitudes(&self, coeffs: &[f64], i: usize, order: usize) -> [Vec<f64>; 2] {
        let lmax = self.lmax;
        let table = &self.legendre[i];
        let mut a = vec![0.0; lmax + 1];
        let mut b = vec![0.0; lmax + 1];
        for l in 0..=lmax {
            let p = |m| match order {
                0 => table.value(l, m),
                1 => table.dtheta(l, m),
                _ => table.d2theta(l, m),
            };
            a[0] += coeffs[harmonic_index(l, 0, false)] * p(0);
            for m in 1..=l {
                let pm = 2f64.sqrt() * p(m);
                a[m] += coeffs[harmonic_index(l, m, false)] * pm;
                b[m] += coeffs[harmonic_index(l, m, true)] * pm;
            }
        }
        [a, b]
    }

    fn synthesize_values(&self, coeffs: &[f64]) -> Vec<f64> {
        let nlon = self.nlon;
        let mut out = Vec::with_capacity(self.nlat * nlon);
        for i in 0..self.nlat {
            let [a, b] = self.ring_amplitudes(coeffs, i, 0);
            for j in 0..nlon {
                let mut v = 0.0;
                for m in 0..=self.lmax {
                    v += a[m] * self.cos_table[m * nlon + j] + b[m] * self.sin_table[m * nlon + j];
                }
                out.push(v);
            }
        }
        out
    }

    fn derivatives(&self, u: &[f64], directions: &[[f64; 3]]) -> Vec<LocalDerivatives> {
        let coeffs = self.forward(u);
        let nlon = self.nlon;
        let mut out = Vec::with_capacity(u.len());
        for i in 0..self.nlat {
            let [a0, b0] = self.ring_amplitudes(&coeffs, i, 0);
            let [a1, b1] = self.ring_amplitudes(&coeffs, i, 1);
            let [a2, b2] = self.ring_amplitudes(&coeffs, i, 2);
            let (c, s) = (self.cos_colat[i], self.sin_colat[i]);
            for j in 0..nlon {
                let (mut val, mut ut, mut up, mut utt, mut utp, mut upp) =
                    (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
                for m in 0..=self.lmax {
                    let cm = self.cos_table[m * nlon + j];
                    let sm = self.sin_table[m * nlon + j];
                    let mf = m as f64;
                    val += a0[m] * cm + b0[m] * sm;
                    ut += a1[m] * cm + b1[m] * sm;
                    utt += a2[m] * cm + b2[m] * sm;
                    up += mf * (-a0[m] * sm + b0[m] * cm);
                    utp += mf * (-a1[m] * sm + b1[m] * cm);
                    upp += -mf * mf * (a0[m] * cm + b0[m] * sm);
                }
                let h_tt = utt;
                let h_tp = utp - (c / s) * up;
                let h_pp = upp + s * c * ut;
                let s2 = s * s;
                let grad_sq = ut * ut + up * up / s2;
                let laplacian = h_tt + h_pp / s2;
                let hess_grad_grad =
                    h_tt * ut * ut + 2.0 * h_tp * ut * up / s2 + h_pp * up * up / (s2 * s2);
                let hess_norm =
                    (h_tt * h_tt + 2.0 * h_tp * h_tp / s2 + h_pp * h_pp / (s2 * s2)).sqrt();

                let d = directions[i * nlon + j];
                let (cp, sp) = (d[0] / s, d[1] / s);
                let e_theta = [c * cp, c * sp, -s];
                let e_phi = [-sp, cp, 0.0];
                let g_phi = up / s;
                let grad = [
                    ut * e_theta[0] + g_phi * e_phi[0],
                    ut * e_theta[1] + g_phi * e_phi[1],
                    ut * e_theta[2] + g_phi * e_phi[2],
                ];
                out.push(LocalDerivatives {
                    value: val,
                    grad,
                    grad_sq,
                    laplacian,
                    hess_grad_grad,
                    hess_norm,
                });
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(n: usize) -> Grid {
        Grid::new(GridSpec::Circle { nodes: n }, 2f64.sqrt()).unwrap()
    }

    fn sphere() -> Grid {
        Grid::new(GridSpec::Sphere { nlat: 16, nlon: 32 }, 2.0).unwrap()
    }

    #[test]
    fn weights_sum_to_intrinsic_area() {
        let g = circle(64);
        let total: f64 = g.weights().iter().sum();
        assert!((total / (2.0 * PI * 2f64.sqrt()) - 1.0).abs() < 1e-12);
        let g = sphere();
        let total: f64 = g.weights().iter().sum();
        assert!((total / (16.0 * PI) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_tiny_grids() {
        assert!(Grid::new(GridSpec::Circle { nodes: 8 }, 1.0).is_err());
        assert!(Grid::new(GridSpec::Sphere { nlat: 2, nlon: 8 }, 1.0).is_err());
    }

    #[test]
    fn circle_derivatives_of_trig_polynomial() {
        let g = circle(64);
        let u: Vec<f64> = g
            .directions()
            .iter()
            .map(|d| {
                let t = d[1].atan2(d[0]);
                (2.0 * t).cos() + 0.5 * (3.0 * t).sin()
            })
            .collect();
        let derivs = g.derivatives(&u).unwrap();
        for (d, dir) in derivs.iter().zip(g.directions()) {
            let t = dir[1].atan2(dir[0]);
            let du = -2.0 * (2.0 * t).sin() + 1.5 * (3.0 * t).cos();
            let ddu = -4.0 * (2.0 * t).cos() - 4.5 * (3.0 * t).sin();
            assert!((d.grad_sq - du * du).abs() < 1e-11);
            assert!((d.laplacian - ddu).abs() < 1e-11);
        }
    }

    #[test]
    fn sphere_harmonics_are_laplacian_eigenfunctions() {
        let g = sphere();
        for (l, m, sine) in [(0, 0, false), (1, 1, true), (3, 2, false), (5, 4, true)] {
            let y = g.unit_harmonic(l, m, sine).unwrap();
            let lap = g.unit_laplacian(&y).unwrap();
            let derivs = g.derivatives(&y).unwrap();
            let kappa = (l * (l + 1)) as f64;
            for ((a, b), d) in lap.iter().zip(&y).zip(&derivs) {
                assert!((a + kappa * b).abs() < 1e-11);
                assert!((d.laplacian + kappa * b).abs() < 1e-10);
                assert!((d.value - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sphere_gradient_of_height_function() {
        // u = z = cos θ has tangential gradient e_z - (e_z·ω)ω.
        let g = sphere();
        let u: Vec<f64> = g.directions().iter().map(|d| d[2]).collect();
        let derivs = g.derivatives(&u).unwrap();
        for (d, w) in derivs.iter().zip(g.directions()) {
            let expected = [-w[2] * w[0], -w[2] * w[1], 1.0 - w[2] * w[2]];
            for (g, e) in d.grad.iter().zip(expected) {
                assert!((g - e).abs() < 1e-12);
            }
            // Hess z = -z g on the unit sphere.
            assert!((d.hess_norm - 2f64.sqrt() * w[2].abs()).abs() < 1e-11);
        }
    }

    #[test]
    fn low_degree_fraction_splits_energy() {
        let g = circle(32);
        let u: Vec<f64> = g
            .directions()
            .iter()
            .map(|d| 1.0 + d[0] * d[0] * d[0])
            .collect();
        let f = g.low_degree_fraction(&u, 1).unwrap();
        // 1 + cos³θ = 1 + (3/4)cosθ + (1/4)cos3θ
        let (e0, e1, e3) = (2.0 * PI, PI * 9.0 / 16.0, PI / 16.0);
        assert!((f - (e0 + e1) / (e0 + e1 + e3)).abs() < 1e-13);
    }
}
