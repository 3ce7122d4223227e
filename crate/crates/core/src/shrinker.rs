//! Round compact self-shrinkers, the Gaussian weight, Gaussian area and
//! excess, and the geometry of radial graphs over a shrinker.
//!
//! Sign convention: `H` is the sum of principal curvatures with respect to
//! the outward normal, so a round sphere of radius `r` in `R^{n+1}` has
//! `H = n / r` and the rescaled normal speed `-H + ½⟨x, ν⟩` vanishes on the
//! shrinker. The other common convention (`H + ½x^⊥` with the mean curvature
//! vector) differs by the orientation of `ν` only.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridSpec, LocalDerivatives};

/// Default grid resolutions.
pub const DEFAULT_CIRCLE_NODES: usize = 256;
pub const DEFAULT_SPHERE_NLAT: usize = 48;
pub const DEFAULT_SPHERE_NLON: usize = 96;

/// Area of the unit sphere `S^n`.
pub fn unit_sphere_area(n: usize) -> f64 {
    match n {
        1 => 2.0 * PI,
        2 => 4.0 * PI,
        _ => unreachable!("only n = 1, 2 are supported"),
    }
}

/// Gaussian weight `(4π)^{-n/2} e^{-|x|²/4}`.
pub fn gaussian_weight(x: &[f64], n: usize) -> f64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    (4.0 * PI).powf(-(n as f64) / 2.0) * (-r2 / 4.0).exp()
}

/// The round shrinker `S^n(√(2n))` for `n ∈ {1, 2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ShrinkerDoc", into = "ShrinkerDoc")]
pub struct Shrinker {
    n: usize,
    radius: f64,
    second_fundamental_norm_sq: f64,
    gaussian_area: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct ShrinkerDoc {
    n: usize,
    radius: f64,
}

impl From<Shrinker> for ShrinkerDoc {
    fn from(s: Shrinker) -> Self {
        ShrinkerDoc {
            n: s.n,
            radius: s.radius,
        }
    }
}

impl TryFrom<ShrinkerDoc> for Shrinker {
    type Error = Error;

    fn try_from(doc: ShrinkerDoc) -> Result<Self> {
        let s = Shrinker::new(doc.n)?;
        if (doc.radius - s.radius).abs() > 1e-9 * s.radius {
            return Err(Error::InvalidInput(format!(
                "radius {} is not the shrinker radius √(2n) = {}",
                doc.radius, s.radius
            )));
        }
        Ok(s)
    }
}

impl Shrinker {
    pub fn new(n: usize) -> Result<Self> {
        if !(n == 1 || n == 2) {
            return Err(Error::UnsupportedGeometry { n });
        }
        let nf = n as f64;
        let radius = (2.0 * nf).sqrt();
        let area = unit_sphere_area(n) * radius.powi(n as i32);
        Ok(Shrinker {
            n,
            radius,
            second_fundamental_norm_sq: nf / (2.0 * nf),
            gaussian_area: area * (4.0 * PI).powf(-nf / 2.0) * (-nf / 2.0).exp(),
        })
    }

    /// `S¹(√2)`.
    pub fn circle() -> Self {
        Self::new(1).expect("n = 1 is supported")
    }

    /// `S²(2)`.
    pub fn sphere() -> Self {
        Self::new(2).expect("n = 2 is supported")
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `|A|²`, constant on a round shrinker.
    pub fn second_fundamental_norm_sq(&self) -> f64 {
        self.second_fundamental_norm_sq
    }

    /// Closed-form Gaussian area `F(Σ)`.
    pub fn gaussian_area(&self) -> f64 {
        self.gaussian_area
    }

    /// Intrinsic `n`-dimensional area of `Σ`.
    pub fn intrinsic_area(&self) -> f64 {
        unit_sphere_area(self.n) * self.radius.powi(self.n as i32)
    }

    /// The unnormalized weight `e^{-|x|²/4}` evaluated on `Σ`, which is constant there.
    pub fn weight_on_surface(&self) -> f64 {
        (-(self.n as f64) / 2.0).exp()
    }

    pub fn default_grid_spec(&self) -> GridSpec {
        match self.n {
            1 => GridSpec::Circle {
                nodes: DEFAULT_CIRCLE_NODES,
            },
            _ => GridSpec::Sphere {
                nlat: DEFAULT_SPHERE_NLAT,
                nlon: DEFAULT_SPHERE_NLON,
            },
        }
    }

    /// Build a grid of the given shape on this shrinker.
    pub fn grid(&self, spec: GridSpec) -> Result<Arc<Grid>> {
        if spec.dimension() != self.n {
            return Err(Error::InvalidInput(format!(
                "grid {spec:?} does not live on an n = {} shrinker",
                self.n
            )));
        }
        Ok(Arc::new(Grid::new(spec, self.radius)?))
    }

    pub fn default_grid(&self) -> Result<Arc<Grid>> {
        self.grid(self.default_grid_spec())
    }
}

/// A hypersurface `{p + u(p) ν_Σ(p)}` written as a radial graph over the
/// shrinker, sampled at the grid nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RadialGraphDoc", into = "RadialGraphDoc")]
pub struct RadialGraph {
    shrinker: Shrinker,
    grid: Arc<Grid>,
    samples: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RadialGraphDoc {
    shrinker: Shrinker,
    grid: GridSpec,
    samples: Vec<f64>,
}

impl From<RadialGraph> for RadialGraphDoc {
    fn from(g: RadialGraph) -> Self {
        RadialGraphDoc {
            shrinker: g.shrinker,
            grid: g.grid.spec(),
            samples: g.samples,
        }
    }
}

impl TryFrom<RadialGraphDoc> for RadialGraph {
    type Error = Error;

    fn try_from(doc: RadialGraphDoc) -> Result<Self> {
        let grid = doc.shrinker.grid(doc.grid)?;
        RadialGraph::new(doc.shrinker, grid, doc.samples)
    }
}

/// Geometric data of a radial graph at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeGeometry {
    pub position: [f64; 3],
    /// Outward unit normal.
    pub normal: [f64; 3],
    pub mean_curvature: f64,
    /// Support function `⟨x, ν⟩`.
    pub support: f64,
    /// Area element of the graph with respect to the unit-sphere measure.
    pub area_element: f64,
    /// Graph factor `w_u` converting normal speed to radial height speed.
    pub speed_factor: f64,
}

impl RadialGraph {
    pub fn new(shrinker: Shrinker, grid: Arc<Grid>, samples: Vec<f64>) -> Result<Self> {
        if grid.dimension() != shrinker.dimension()
            || (grid.radius() - shrinker.radius()).abs() > 1e-12
        {
            return Err(Error::InvalidInput(
                "grid does not belong to the shrinker".into(),
            ));
        }
        grid.check_len(&samples)?;
        Ok(RadialGraph {
            shrinker,
            grid,
            samples,
        })
    }

    /// The shrinker itself, `u ≡ 0`.
    pub fn zero(shrinker: Shrinker, grid: Arc<Grid>) -> Result<Self> {
        let n = grid.len();
        Self::new(shrinker, grid, vec![0.0; n])
    }

    /// Sample `u` from a function of the unit direction of each node.
    pub fn from_fn(
        shrinker: Shrinker,
        grid: Arc<Grid>,
        f: impl Fn(&[f64; 3]) -> f64,
    ) -> Result<Self> {
        let samples = grid.directions().iter().map(f).collect();
        Self::new(shrinker, grid, samples)
    }

    /// Same grid and shrinker, different heights.
    pub fn with_samples(&self, samples: Vec<f64>) -> Result<Self> {
        Self::new(self.shrinker, self.grid.clone(), samples)
    }

    pub fn shrinker(&self) -> &Shrinker {
        &self.shrinker
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Quadrature weights in the intrinsic measure of `Σ`.
    pub fn node_weights(&self) -> Vec<f64> {
        self.grid.weights()
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.samples.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::InvalidInput(format!(
                "non-finite height {} at node {i}",
                self.samples[i]
            ))),
            None => Ok(()),
        }
    }

    pub fn derivatives(&self) -> Result<Vec<LocalDerivatives>> {
        self.check_finite()?;
        self.grid.derivatives(&self.samples)
    }

    /// `(∫_Σ u² e^{-|x|²/4})^{1/2}`.
    pub fn weighted_l2(&self) -> f64 {
        let w = self.shrinker.weight_on_surface();
        let s: f64 = self
            .node_weights()
            .iter()
            .zip(&self.samples)
            .map(|(a, u)| a * u * u)
            .sum();
        (w * s).sqrt()
    }

    /// Smallness proxy `sup|u| + sup|∇u| + sup|Hess u|`, derivatives taken
    /// intrinsically on `Σ`.
    pub fn proxy_norm(&self) -> Result<f64> {
        let r = self.shrinker.radius;
        let d = self.derivatives()?;
        let sup = |f: &dyn Fn(&LocalDerivatives) -> f64| d.iter().map(f).fold(0.0, f64::max);
        Ok(sup(&|x| x.value.abs())
            + sup(&|x| x.grad_sq.sqrt()) / r
            + sup(&|x| x.hess_norm) / (r * r))
    }
}

/// Per-node geometry of the graph `{p + u(p)ν_Σ(p)}`.
pub fn graph_geometry(graph: &RadialGraph) -> Result<Vec<NodeGeometry>> {
    let derivs = graph.derivatives()?;
    geometry_from_derivatives(graph, &derivs)
}

pub(crate) fn geometry_from_derivatives(
    graph: &RadialGraph,
    derivs: &[LocalDerivatives],
) -> Result<Vec<NodeGeometry>> {
    let n = graph.shrinker.n as f64;
    let r0 = graph.shrinker.radius;
    graph
        .grid
        .directions()
        .iter()
        .zip(derivs)
        .enumerate()
        .map(|(node, (dir, d))| {
            let f = r0 + d.value;
            if !(f > 0.0) {
                return Err(Error::DegenerateGraph { node, radius: f });
            }
            let q = d.grad_sq;
            let w = (f * f + q).sqrt();
            let h = n / w + q / (w * w * w) - d.laplacian / (f * w)
                + d.hess_grad_grad / (f * w * w * w);
            let position = [f * dir[0], f * dir[1], f * dir[2]];
            let normal = [
                (f * dir[0] - d.grad[0]) / w,
                (f * dir[1] - d.grad[1]) / w,
                (f * dir[2] - d.grad[2]) / w,
            ];
            Ok(NodeGeometry {
                position,
                normal,
                mean_curvature: h,
                support: f * f / w,
                area_element: f.powi(graph.shrinker.n as i32 - 1) * w,
                speed_factor: w / f,
            })
        })
        .collect()
}

/// Gaussian area `∫_M ρ dH^n` by quadrature with the graph's own area element.
pub fn gaussian_area(graph: &RadialGraph) -> Result<f64> {
    let geom = graph_geometry(graph)?;
    let n = graph.shrinker.n;
    Ok(geom
        .iter()
        .zip(graph.grid.unit_weights())
        .map(|(g, w)| w * g.area_element * gaussian_weight(&g.position, n))
        .sum())
}

/// Excess `F(M) − F(Σ)`.
///
/// Evaluated node by node as a difference against the shrinker integrand,
/// so the result keeps full relative precision even when it is many orders
/// of magnitude below `F(Σ)`.
pub fn excess(graph: &RadialGraph) -> Result<f64> {
    let derivs = graph.derivatives()?;
    excess_from_derivatives(graph, &derivs)
}

pub(crate) fn excess_from_derivatives(
    graph: &RadialGraph,
    derivs: &[LocalDerivatives],
) -> Result<f64> {
    let n = graph.shrinker.n;
    let nf = n as f64;
    let r0 = graph.shrinker.radius;
    let norm = (4.0 * PI).powf(-nf / 2.0);
    let base = r0.powi(n as i32) * (-r0 * r0 / 4.0).exp();
    let mut total = 0.0;
    for (node, (d, w)) in derivs.iter().zip(graph.grid.unit_weights()).enumerate() {
        let u = d.value;
        let f = r0 + u;
        if !(f > 0.0) {
            return Err(Error::DegenerateGraph { node, radius: f });
        }
        // log(f^n e^{-f²/4}) − log(R^n e^{-R²/4}) with R² = 2n, whose linear term cancels.
        let x = u / r0;
        let dlog = nf * (x.ln_1p() - x) - u * u / 4.0;
        let radial = base * dlog.exp_m1();
        let q = d.grad_sq;
        let tilt = f.powi(n as i32 - 1) * (-f * f / 4.0).exp() * q / ((f * f + q).sqrt() + f);
        total += w * norm * (radial + tilt);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_weight_values() {
        assert!((gaussian_weight(&[0.0, 0.0], 1) - 0.2820947917738781).abs() < 1e-15);
        assert!((gaussian_weight(&[0.0; 3], 2) - 0.07957747154594767).abs() < 1e-15);
        let x = [1.0, 1.0];
        let expected = (4.0 * PI).powf(-0.5) * (-0.5f64).exp();
        assert!((gaussian_weight(&x, 1) - expected).abs() < 1e-15);
        assert!(gaussian_weight(&[2.0, 0.0], 1) < gaussian_weight(&[1.0, 0.0], 1));
    }

    #[test]
    fn shrinker_invariants() {
        for s in [Shrinker::circle(), Shrinker::sphere()] {
            let n = s.dimension() as f64;
            assert!((s.radius().powi(2) - 2.0 * n).abs() < 1e-14);
            assert!((s.second_fundamental_norm_sq() - 0.5).abs() < 1e-15);
        }
        assert!(
            (Shrinker::circle().gaussian_area() - (2.0 * PI / 1f64.exp()).sqrt()).abs() < 1e-14
        );
        assert!((Shrinker::sphere().gaussian_area() - 4.0 / 1f64.exp()).abs() < 1e-14);
        assert!(matches!(
            Shrinker::new(3),
            Err(Error::UnsupportedGeometry { n: 3 })
        ));
    }

    #[test]
    fn shrinker_json_rejects_wrong_radius() {
        let ok: Shrinker = serde_json::from_str(r#"{"n":1,"radius":1.4142135623730951}"#).unwrap();
        assert_eq!(ok, Shrinker::circle());
        assert!(serde_json::from_str::<Shrinker>(r#"{"n":1,"radius":1.5}"#).is_err());
    }

    #[test]
    fn round_graphs_have_constant_curvature() {
        let s = Shrinker::circle();
        let grid = s.default_grid().unwrap();
        for c in [0.0, 0.1, -0.3] {
            let g = RadialGraph::from_fn(s, grid.clone(), |_| c).unwrap();
            for node in graph_geometry(&g).unwrap() {
                assert!((node.mean_curvature - 1.0 / (s.radius() + c)).abs() < 1e-12);
                assert!(node.area_element > 0.0);
            }
        }
        let s = Shrinker::sphere();
        let g = RadialGraph::zero(s, s.default_grid().unwrap()).unwrap();
        for node in graph_geometry(&g).unwrap() {
            assert!((node.mean_curvature - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shrinker_equation_holds_at_zero() {
        for s in [Shrinker::circle(), Shrinker::sphere()] {
            let g = RadialGraph::zero(s, s.default_grid().unwrap()).unwrap();
            for node in graph_geometry(&g).unwrap() {
                assert!((node.mean_curvature - 0.5 * node.support).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn degenerate_graph_is_rejected() {
        let s = Shrinker::circle();
        let g = RadialGraph::from_fn(s, s.default_grid().unwrap(), |_| -2.0).unwrap();
        assert!(matches!(
            graph_geometry(&g),
            Err(Error::DegenerateGraph { .. })
        ));
    }

    #[test]
    fn non_finite_heights_are_invalid() {
        let s = Shrinker::circle();
        let grid = s.default_grid().unwrap();
        let mut samples = vec![0.0; grid.len()];
        samples[3] = f64::NAN;
        let g = RadialGraph::new(s, grid, samples).unwrap();
        assert!(matches!(gaussian_area(&g), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn excess_of_round_circle_matches_closed_form() {
        let s = Shrinker::circle();
        let grid = s.default_grid().unwrap();
        for c in [1e-4, 0.05, -0.2] {
            let g = RadialGraph::from_fn(s, grid.clone(), |_| c).unwrap();
            let r = s.radius() + c;
            let closed = 2.0 * PI * r * gaussian_weight(&[r, 0.0], 1) - s.gaussian_area();
            let e = excess(&g).unwrap();
            assert!((e - closed).abs() < 1e-14, "{e} vs {closed}");
            // Both routes agree.
            let direct = gaussian_area(&g).unwrap() - s.gaussian_area();
            assert!((e - direct).abs() < 1e-13);
        }
    }

    #[test]
    fn graph_json_roundtrip() {
        let s = Shrinker::sphere();
        let grid = s.grid(GridSpec::Sphere { nlat: 8, nlon: 16 }).unwrap();
        let g = RadialGraph::from_fn(s, grid, |d| 0.01 * d[2]).unwrap();
        let text = serde_json::to_string(&g).unwrap();
        assert!(text.contains(r#""shrinker":{"n":2"#));
        let back: RadialGraph = serde_json::from_str(&text).unwrap();
        assert_eq!(back.samples(), g.samples());
        assert_eq!(back.grid().spec(), g.grid().spec());
    }
}
