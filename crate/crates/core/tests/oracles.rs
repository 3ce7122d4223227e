//! Independent oracles: finite-difference eigen-solves, closed-form Gaussian
//! areas and Duhamel coefficients, and direct quadrature.

use nalgebra::{DMatrix, SymmetricEigen};
use shrinkflow::drift_heat::{self, ModeSeries};
use shrinkflow::flow;
use shrinkflow::shrinker::{self, RadialGraph, Shrinker};
use shrinkflow::spectral::{self, ModeVector};
use std::f64::consts::{E, PI};

/// Eigenvalues of `−Δ − 1` on the circle of radius `√2` by fourth-order
/// periodic finite differences.
fn circle_fd_eigenvalues(nodes: usize) -> Vec<f64> {
    let h = 2.0 * PI * 2f64.sqrt() / nodes as f64;
    let mut a = DMatrix::<f64>::zeros(nodes, nodes);
    let stencil = [(0, 30.0), (1, -16.0), (2, 1.0)];
    for i in 0..nodes {
        for &(off, w) in &stencil {
            let c = w / (12.0 * h * h);
            a[(i, (i + off) % nodes)] = c;
            a[(i, (i + nodes - off) % nodes)] = c;
        }
        a[(i, i)] -= 1.0;
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Eigenvalues of `−Δ − 1` on the sphere of radius 2 restricted to
/// longitudinal order `m`, by cell-centred finite differences in colatitude
/// (symmetrised with the `sin θ` weight).
fn sphere_fd_order(m: usize, cells: usize, count: usize) -> Vec<f64> {
    let h = PI / cells as f64;
    let centre = |i: usize| ((i as f64 + 0.5) * h).sin();
    let face = |i: usize| (i as f64 * h).sin();
    let mut a = DMatrix::<f64>::zeros(cells, cells);
    let mf = m as f64;
    for i in 0..cells {
        let s = centre(i);
        a[(i, i)] = (face(i) + face(i + 1)) / (h * h * s) + mf * mf / (s * s);
        if i + 1 < cells {
            let off = -face(i + 1) / (h * h * (s * centre(i + 1)).sqrt());
            a[(i, i + 1)] = off;
            a[(i + 1, i)] = off;
        }
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(a)
        .eigenvalues
        .iter()
        .map(|l| l / 4.0 - 1.0)
        .collect();
    ev.sort_by(f64::total_cmp);
    ev.truncate(count);
    ev
}

#[test]
fn circle_spectrum_matches_finite_differences() {
    let spectrum = spectral::build_spectrum(&Shrinker::circle(), 16).unwrap();
    let fd = circle_fd_eigenvalues(256);
    for (i, (mu, o)) in spectrum.eigenvalues().iter().zip(&fd).take(10).enumerate() {
        assert!((mu - o).abs() < 1e-4, "index {i}: {mu} vs {o}");
    }
}

#[test]
fn sphere_spectrum_matches_finite_differences() {
    let spectrum = spectral::build_spectrum(&Shrinker::sphere(), 8).unwrap();
    // Richardson-extrapolate two resolutions per order; orders m > 0 come
    // in cosine/sine pairs.
    let mut oracle = Vec::new();
    for m in 0..5usize {
        let coarse = sphere_fd_order(m, 200, 5 - m);
        let fine = sphere_fd_order(m, 400, 5 - m);
        for (c, f) in coarse.iter().zip(&fine) {
            let v = (4.0 * f - c) / 3.0;
            oracle.push(v);
            if m > 0 {
                oracle.push(v);
            }
        }
    }
    oracle.sort_by(f64::total_cmp);
    assert_eq!(oracle.len(), 25);
    for (i, (mu, o)) in spectrum.eigenvalues().iter().zip(&oracle).enumerate() {
        assert!((mu - o).abs() < 1e-4, "index {i}: {mu} vs {o}");
    }
}

#[test]
fn galerkin_matrix_of_l_is_diagonal() {
    for s in [Shrinker::circle(), Shrinker::sphere()] {
        let spectrum = spectral::build_spectrum(&s, 6).unwrap();
        let n = spectrum.len();
        for j in 0..n {
            let lphi = spectral::apply_l(spectrum.eigenfunction(j), &spectrum).unwrap();
            for i in 0..n {
                let g =
                    spectral::inner_product(spectrum.eigenfunction(i), &lphi, &spectrum).unwrap();
                let expected = if i == j {
                    -spectrum.eigenvalues()[j]
                } else {
                    0.0
                };
                assert!(
                    (g - expected).abs() < 1e-9,
                    "n={} ({i},{j}): {g}",
                    s.dimension()
                );
            }
        }
    }
}

#[test]
fn gaussian_areas_match_closed_forms() {
    let c = shrinker::gaussian_area(
        &RadialGraph::zero(
            Shrinker::circle(),
            Shrinker::circle().default_grid().unwrap(),
        )
        .unwrap(),
    )
    .unwrap();
    assert!((c - (2.0 * PI / E).sqrt()).abs() < 1e-6);
    let s = shrinker::gaussian_area(
        &RadialGraph::zero(
            Shrinker::sphere(),
            Shrinker::sphere().default_grid().unwrap(),
        )
        .unwrap(),
    )
    .unwrap();
    assert!((s - 4.0 / E).abs() < 1e-6);
}

#[test]
fn gaussian_area_of_dilated_circle_matches_direct_quadrature() {
    // r = √2 + c is a circle; F = (4π)^{-1/2} 2πr e^{-r²/4}.
    let circle = Shrinker::circle();
    let grid = circle.default_grid().unwrap();
    for c in [-0.1, 0.05, 0.2] {
        let g = RadialGraph::from_fn(circle, grid.clone(), |_| c).unwrap();
        let r = 2f64.sqrt() + c;
        let exact = 2.0 * PI * r * (-r * r / 4.0).exp() / (4.0 * PI).sqrt();
        assert!((shrinker::gaussian_area(&g).unwrap() - exact).abs() < 1e-12);
    }
}

#[test]
fn duhamel_constant_source_matches_closed_form() {
    for s in [Shrinker::circle(), Shrinker::sphere()] {
        let spectrum = spectral::build_spectrum(&s, 6).unwrap();
        for i in [0, 1, 3, spectrum.len() - 1] {
            let f = ModeSeries::sample(&spectrum, 1.0, 1e-3, |_| {
                let mut c = vec![0.0; spectrum.len()];
                c[i] = 1.0;
                c
            })
            .unwrap();
            let w = drift_heat::duhamel_inverse(&f, 1.0).unwrap();
            let mu = spectrum.eigenvalues()[i];
            for (t, b) in w.times().iter().zip(w.coefficient_track(i)) {
                let exact = if mu == 0.0 {
                    *t
                } else {
                    (1.0 - (-mu * t).exp()) / mu
                };
                assert!((b - exact).abs() < 1e-8, "mode {i} at {t}: {b} vs {exact}");
            }
        }
    }
}

#[test]
fn q_remainder_is_quadratic() {
    for s in [Shrinker::circle(), Shrinker::sphere()] {
        let grid = s.default_grid().unwrap();
        let p = flow::mode_profile(&grid, 2, 0, false).unwrap();
        let norm = |eps: f64| {
            let g = RadialGraph::new(s, grid.clone(), p.iter().map(|v| v * eps).collect()).unwrap();
            let q = flow::q_remainder(&g).unwrap();
            g.node_weights()
                .iter()
                .zip(&q)
                .map(|(w, v)| w * v * v)
                .sum::<f64>()
                .sqrt()
        };
        let eps = [1e-2, 5e-3, 2.5e-3];
        let q: Vec<f64> = eps.iter().map(|&e| norm(e)).collect();
        for w in q.windows(2) {
            let ratio = w[0] / w[1];
            assert!(
                (3.6..=4.4).contains(&ratio),
                "n={}: ratio {ratio}",
                s.dimension()
            );
        }
    }
}

#[test]
fn projection_recovers_harmonic_coefficients() {
    let s = Shrinker::sphere();
    let spectrum = spectral::build_spectrum(&s, 5).unwrap();
    let mut c = vec![0.0; spectrum.len()];
    c[2] = 0.3;
    c[7] = -1.2;
    let a = ModeVector::new(&spectrum, c.clone()).unwrap();
    let back = spectral::project(&spectral::synthesize(&a), &spectrum).unwrap();
    for (x, y) in back.coefficients().iter().zip(&c) {
        assert!((x - y).abs() < 1e-12);
    }
}
