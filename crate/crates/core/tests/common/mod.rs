//! Independent numeric oracles shared by the integration suites.
//!
//! Every oracle here solves the mirror-map optimality conditions by a
//! different route than the library (bisection on KKT multipliers,
//! golden-section search, exact case analysis), so library and oracle can
//! cross-check each other.

#![allow(dead_code)]

use smd_core::vecops::{dot, norm_l2, sub};

/// Golden-section maximization of a concave 1-D function on [lo, hi].
pub fn golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, iters: usize) -> f64 {
    let inv_phi = 0.618_033_988_749_894_9_f64;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// argmax over a box of `<y, x> - ||x||^2/2`, solved coordinatewise by
/// golden-section search.
pub fn oracle_box_euclidean(y: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    y.iter()
        .zip(lower.iter().zip(upper))
        .map(|(&yi, (&l, &u))| golden_max(|x| yi * x - 0.5 * x * x, l, u, 200))
        .collect()
}

/// argmax over the unit simplex of `<y, x> - ||x||^2/2`: KKT stationarity
/// gives `x(nu) = max(y - nu, 0)`; bisect the multiplier until the mass is 1.
pub fn oracle_simplex_euclidean(y: &[f64]) -> Vec<f64> {
    let max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let mass = |nu: f64| -> f64 { y.iter().map(|v| (v - nu).max(0.0)).sum() };
    let (mut lo, mut hi) = (min - 1.0, max); // mass(lo) >= 1, mass(hi) = 0
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let nu = 0.5 * (lo + hi);
    y.iter().map(|v| (v - nu).max(0.0)).collect()
}

/// argmax over the unit simplex of `<y, x> - sum x_i log x_i`: stationarity
/// gives `x_i = exp(y_i - 1 - nu)`; bisect `nu` until the mass is 1.
pub fn oracle_simplex_entropic(y: &[f64]) -> Vec<f64> {
    let max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let d = y.len() as f64;
    let mass = |nu: f64| -> f64 { y.iter().map(|v| (v - 1.0 - nu).exp()).sum() };
    // mass(max - 1) >= 1 and mass(max - 1 + ln d + 1) < 1: a valid bracket.
    let (mut lo, mut hi) = (max - 1.0 - 1.0, max - 1.0 + d.ln() + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let nu = 0.5 * (lo + hi);
    y.iter().map(|v| (v - 1.0 - nu).exp()).collect()
}

/// argmax over a Euclidean ball of `<y, x> - ||x||^2/2`: with multiplier
/// `lam >= 0` the stationary point is `x = (y + lam c) / (1 + lam)`; bisect
/// `lam` against the radius constraint.
pub fn oracle_ball_euclidean(y: &[f64], center: &[f64], radius: f64) -> Vec<f64> {
    let x_of = |lam: f64| -> Vec<f64> {
        y.iter()
            .zip(center)
            .map(|(yi, ci)| (yi + lam * ci) / (1.0 + lam))
            .collect()
    };
    let excess = |lam: f64| -> f64 { norm_l2(&sub(&x_of(lam), center)) - radius };
    if excess(0.0) <= 0.0 {
        return x_of(0.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while excess(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    x_of(0.5 * (lo + hi))
}

/// Exact Euclidean projection onto the triangle
/// `{ x >= 0, x1 + x2 <= 1 }` in the plane, by case analysis over the
/// interior, the three edges and the three vertices.
pub fn oracle_triangle_project(y: &[f64]) -> Vec<f64> {
    let candidates: &mut Vec<Vec<f64>> = &mut Vec::new();
    // Interior.
    if y[0] >= 0.0 && y[1] >= 0.0 && y[0] + y[1] <= 1.0 {
        return y.to_vec();
    }
    // Edge x1 = 0, x2 in [0, 1].
    candidates.push(vec![0.0, y[1].clamp(0.0, 1.0)]);
    // Edge x2 = 0, x1 in [0, 1].
    candidates.push(vec![y[0].clamp(0.0, 1.0), 0.0]);
    // Edge x1 + x2 = 1: project onto the line, clamp the parameter.
    let t = ((y[0] - y[1] + 1.0) / 2.0).clamp(0.0, 1.0);
    candidates.push(vec![t, 1.0 - t]);
    candidates
        .iter()
        .min_by(|a, b| {
            let da = norm_l2(&sub(a, y));
            let db = norm_l2(&sub(b, y));
            da.partial_cmp(&db).unwrap()
        })
        .unwrap()
        .clone()
}

/// Objective value `<y, x> - h(x)` used to evaluate conjugates at oracle
/// argmax points. `h_euclidean = ||x||^2/2`, `h_entropic = sum x log x`.
pub fn phi_euclidean(y: &[f64], x: &[f64]) -> f64 {
    dot(y, x) - 0.5 * dot(x, x)
}

pub fn phi_entropic(y: &[f64], x: &[f64]) -> f64 {
    let h: f64 = x.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum();
    dot(y, x) - h
}

/// Median of a sample (copies and sorts).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
