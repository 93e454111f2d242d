//! Shared helpers for integration tests: an independent Gauss-Legendre
//! quadrature oracle and direct (slow) evaluation of truncated sine series.
//! Nothing here reuses the crate's transform code paths, so agreement
//! between the two is meaningful evidence.
//!
//! Each test binary compiles this module separately and uses a subset of it.
#![allow(dead_code)]

use ndarray::IxDyn;
use std::f64::consts::PI;

use kszk::basis::SpectralField;

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre polynomial.
pub fn gauss_legendre(points: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(points >= 2);
    let mut nodes = vec![0.0; points];
    let mut weights = vec![0.0; points];
    for i in 0..points {
        let mut x = (PI * (i as f64 + 0.75) / (points as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x) by the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=points {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let dp = points as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let mut p0 = 1.0;
        let mut p1 = x;
        for k in 2..=points {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = points as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre rule over [0, length]: `panels` equal panels
/// with `points` nodes each.
pub struct Quadrature1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn panel_gauss(length: f64, panels: usize, points: usize) -> Quadrature1d {
    let (xs, ws) = gauss_legendre(points);
    let h = length / panels as f64;
    let mut nodes = Vec::with_capacity(panels * points);
    let mut weights = Vec::with_capacity(panels * points);
    for p in 0..panels {
        let left = p as f64 * h;
        for (x, w) in xs.iter().zip(&ws) {
            nodes.push(left + 0.5 * h * (x + 1.0));
            weights.push(0.5 * h * w);
        }
    }
    Quadrature1d { nodes, weights }
}

/// Which 1D factor to use when evaluating a separable basis term.
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    Sine,
    /// d/dx of the sine factor: `(k pi / L) cos(k pi x / L)`.
    SineDeriv,
}

/// Evaluate a truncated 2D sine series (or a first derivative of it) on the
/// tensor grid of two quadrature rules, by direct summation.
pub fn eval_series_2d(
    field: &SpectralField,
    qx: &Quadrature1d,
    qy: &Quadrature1d,
    factors: [Factor; 2],
    extra_symbol_power: i32,
) -> Vec<Vec<f64>> {
    let grid = field.grid();
    let lengths = grid.domain().lengths();
    let shape = grid.coeff_shape();
    let table = |q: &Quadrature1d, dim: usize, f: Factor| -> Vec<Vec<f64>> {
        (1..=shape[dim])
            .map(|k| {
                let w = k as f64 * PI / lengths[dim];
                q.nodes
                    .iter()
                    .map(|&x| match f {
                        Factor::Sine => (w * x).sin(),
                        Factor::SineDeriv => w * (w * x).cos(),
                    })
                    .collect()
            })
            .collect()
    };
    let tx = table(qx, 0, factors[0]);
    let ty = table(qy, 1, factors[1]);

    let mut out = vec![vec![0.0; qy.nodes.len()]; qx.nodes.len()];
    for k1 in 0..shape[0] {
        for k2 in 0..shape[1] {
            let mut c = field.coeffs()[IxDyn(&[k1, k2])];
            if c == 0.0 {
                continue;
            }
            if extra_symbol_power != 0 {
                let mu = grid.mode_symbol_at(&[k1, k2]);
                c *= mu.powi(extra_symbol_power);
            }
            for (a, row) in out.iter_mut().enumerate() {
                let f1 = tx[k1][a];
                for (b, v) in row.iter_mut().enumerate() {
                    *v += c * f1 * ty[k2][b];
                }
            }
        }
    }
    out
}

/// Tensor-product integral of `f(values)` against the two rules.
pub fn integrate_2d(values: &[Vec<f64>], qx: &Quadrature1d, qy: &Quadrature1d) -> f64 {
    let mut acc = 0.0;
    for (a, row) in values.iter().enumerate() {
        let wa = qx.weights[a];
        let mut inner = 0.0;
        for (b, v) in row.iter().enumerate() {
            inner += qy.weights[b] * v;
        }
        acc += wa * inner;
    }
    acc
}

/// Galerkin coefficient of `values` (point samples on the tensor grid)
/// against basis mode `k` (1-based), including the normalization by the
/// basis norm.
pub fn project_onto_mode_2d(
    values: &[Vec<f64>],
    k: [usize; 2],
    lengths: &[f64],
    qx: &Quadrature1d,
    qy: &Quadrature1d,
) -> f64 {
    let wx: Vec<f64> = qx
        .nodes
        .iter()
        .map(|&x| (k[0] as f64 * PI * x / lengths[0]).sin())
        .collect();
    let wy: Vec<f64> = qy
        .nodes
        .iter()
        .map(|&y| (k[1] as f64 * PI * y / lengths[1]).sin())
        .collect();
    let mut acc = 0.0;
    for (a, row) in values.iter().enumerate() {
        let fa = qx.weights[a] * wx[a];
        let mut inner = 0.0;
        for (b, v) in row.iter().enumerate() {
            inner += qy.weights[b] * wy[b] * v;
        }
        acc += fa * inner;
    }
    acc / (lengths[0] / 2.0 * (lengths[1] / 2.0))
}
