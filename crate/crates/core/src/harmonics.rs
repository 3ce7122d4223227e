//! Gauss–Legendre quadrature and fully normalized associated Legendre
//! functions, the ingredients of the real spherical-harmonic transform.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes in descending order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        weights[i] = w;
        nodes[n - 1 - i] = -x;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Flat index of `(l, m)` with `0 <= m <= l` in a triangular table.
#[inline]
pub fn tri_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Values and colatitude derivatives of the normalized functions
/// `p̄_l^m(cos θ)`, scaled so that `p̄_l^0` and `√2 p̄_l^m cos(mφ)`,
/// `√2 p̄_l^m sin(mφ)` are orthonormal on the unit sphere.
#[derive(Debug, Clone)]
pub struct LegendreTable {
    lmax: usize,
    values: Vec<f64>,
    dtheta: Vec<f64>,
    d2theta: Vec<f64>,
}

impl LegendreTable {
    /// Tabulate at colatitude θ given through `x = cos θ`. The point must
    /// not be a pole (`|x| < 1`).
    pub fn new(lmax: usize, x: f64) -> Self {
        let size = tri_index(lmax, lmax) + 1;
        let mut values = vec![0.0; size];
        let s = (1.0 - x * x).max(0.0).sqrt();

        let mut pmm = (1.0 / (4.0 * PI)).sqrt();
        for m in 0..=lmax {
            if m > 0 {
                let mf = m as f64;
                pmm *= ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s;
            }
            values[tri_index(m, m)] = pmm;
            if m < lmax {
                values[tri_index(m + 1, m)] = (2.0 * m as f64 + 3.0).sqrt() * x * pmm;
            }
            for l in (m + 2)..=lmax {
                let lf = l as f64;
                let mf = m as f64;
                let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
                values[tri_index(l, m)] =
                    a * (x * values[tri_index(l - 1, m)] - b * values[tri_index(l - 2, m)]);
            }
        }

        let mut dtheta = vec![0.0; size];
        let mut d2theta = vec![0.0; size];
        let cot = x / s;
        for m in 0..=lmax {
            for l in m..=lmax {
                let lf = l as f64;
                let mf = m as f64;
                let p = values[tri_index(l, m)];
                let prev = if l > m {
                    let c = ((2.0 * lf + 1.0) * (lf * lf - mf * mf) / (2.0 * lf - 1.0)).sqrt();
                    c * values[tri_index(l - 1, m)]
                } else {
                    0.0
                };
                let d = (lf * x * p - prev) / s;
                dtheta[tri_index(l, m)] = d;
                d2theta[tri_index(l, m)] = -cot * d - (lf * (lf + 1.0) - mf * mf / (s * s)) * p;
            }
        }

        LegendreTable {
            lmax,
            values,
            dtheta,
            d2theta,
        }
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    #[inline]
    pub fn value(&self, l: usize, m: usize) -> f64 {
        self.values[tri_index(l, m)]
    }

    #[inline]
    pub fn dtheta(&self, l: usize, m: usize) -> f64 {
        self.dtheta[tri_index(l, m)]
    }

    #[inline]
    pub fn d2theta(&self, l: usize, m: usize) -> f64 {
        self.d2theta[tri_index(l, m)]
    }
}

/// Position of the real harmonic `(l, m, parity)` in degree-major order:
/// `m = 0` first, then cosine before sine for each `m >= 1`.
#[inline]
pub fn harmonic_index(l: usize, m: usize, sine: bool) -> usize {
    if m == 0 {
        l * l
    } else {
        l * l + 2 * m - 1 + usize::from(sine)
    }
}

/// Inverse of [`harmonic_index`].
pub fn harmonic_label(index: usize) -> (usize, usize, bool) {
    let l = (index as f64).sqrt() as usize;
    let l = if (l + 1) * (l + 1) <= index { l + 1 } else { l };
    let r = index - l * l;
    if r == 0 {
        (l, 0, false)
    } else {
        (l, r.div_ceil(2), r.is_multiple_of(2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(12);
        for p in 0..24 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum();
            let exact = if p % 2 == 1 {
                0.0
            } else {
                2.0 / (p as f64 + 1.0)
            };
            assert!((q - exact).abs() < 1e-14, "degree {p}: {q} vs {exact}");
        }
        assert!(x.windows(2).all(|p| p[0] > p[1]));
    }

    #[test]
    fn low_degree_values_match_closed_forms() {
        let theta: f64 = 0.7;
        let t = LegendreTable::new(3, theta.cos());
        let (c, s) = (theta.cos(), theta.sin());
        let k = |v: f64| v.sqrt();
        assert!((t.value(0, 0) - k(1.0 / (4.0 * PI))).abs() < 1e-15);
        assert!((t.value(1, 0) - k(3.0 / (4.0 * PI)) * c).abs() < 1e-15);
        assert!((t.value(1, 1) - k(3.0 / (8.0 * PI)) * s).abs() < 1e-15);
        assert!((t.value(2, 0) - k(5.0 / (16.0 * PI)) * (3.0 * c * c - 1.0)).abs() < 1e-14);
        assert!((t.value(2, 2) - k(15.0 / (32.0 * PI)) * s * s).abs() < 1e-14);
    }

    #[test]
    fn theta_derivatives_match_finite_differences() {
        let lmax = 9;
        let h = 1e-5;
        for &theta in &[0.3_f64, 1.1, 2.5] {
            let t = LegendreTable::new(lmax, theta.cos());
            let tp = LegendreTable::new(lmax, (theta + h).cos());
            let tm = LegendreTable::new(lmax, (theta - h).cos());
            for l in 0..=lmax {
                for m in 0..=l {
                    let fd = (tp.value(l, m) - tm.value(l, m)) / (2.0 * h);
                    let fd2 = (tp.value(l, m) - 2.0 * t.value(l, m) + tm.value(l, m)) / (h * h);
                    assert!((t.dtheta(l, m) - fd).abs() < 1e-8, "d/dθ l={l} m={m}");
                    assert!((t.d2theta(l, m) - fd2).abs() < 1e-4, "d²/dθ² l={l} m={m}");
                }
            }
        }
    }

    #[test]
    fn harmonic_index_roundtrip() {
        for l in 0..10 {
            for m in 0..=l {
                for sine in [false, true] {
                    if m == 0 && sine {
                        continue;
                    }
                    assert_eq!(harmonic_label(harmonic_index(l, m, sine)), (l, m, sine));
                }
            }
        }
    }
}
