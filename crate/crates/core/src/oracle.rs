//! Brute-force references for tests: radial quadrature of Riesz potentials of
//! uniform sphere and ball measures, exhaustive simplex search for the
//! localized constant, and direct quadrature of Lorentz norms.
//!
//! Nothing here calls into the kernel, potential or rearrangement code; the
//! quadrature rules are local too.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::measure::Measure;

const GK_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WK[7] * fc;
    let mut g = GK_WG[3] * fc;
    for i in 0..7 {
        let s = f(c - h * GK_X[i]) + f(c + h * GK_X[i]);
        k += GK_WK[i] * s;
        if i % 2 == 1 {
            g += GK_WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod 7/15 with bisection until the local error estimate
/// is below `tol` (absolute, split evenly between halves).
pub fn adaptive_gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> Result<f64> {
        let (v, err) = gk15(f, a, b);
        if err <= tol || (err <= 1e-15 * v.abs()) {
            return Ok(v);
        }
        if depth == 0 {
            return Err(Error::Quadrature(format!(
                "no convergence on [{a}, {b}], error estimate {err:e}"
            )));
        }
        let m = 0.5 * (a + b);
        Ok(rec(f, a, m, 0.5 * tol, depth - 1)? + rec(f, m, b, 0.5 * tol, depth - 1)?)
    }
    rec(f, a, b, tol, 48)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadialKind {
    Sphere,
    Ball,
}

/// Default absolute tolerance of [`radial_reduction`].
pub const RADIAL_TOL: f64 = 1e-10;

fn sphere_average(alpha: f64, n: usize, radius: f64, r_x: f64, tol: f64) -> Result<f64> {
    let e = (alpha - n as f64) / 2.0;
    let w = |t: f64| t.sin().powi(n as i32 - 2);
    let norm = adaptive_gk15(&w, 0.0, PI, 1e-14)?;
    let f = |t: f64| (r_x * r_x + radius * radius - 2.0 * r_x * radius * t.cos()).powf(e) * w(t);
    Ok(adaptive_gk15(&f, 0.0, PI, tol * norm)? / norm)
}

/// `∫ |x-y|^{α-n} dμ(y)` for `μ` uniform of total `mass` on the sphere or
/// ball of the given radius centered at the origin.
pub fn radial_reduction(
    alpha: f64,
    n: usize,
    kind: RadialKind,
    radius: f64,
    mass: f64,
    x: &[f64],
) -> Result<f64> {
    radial_reduction_with(alpha, n, kind, radius, mass, x, RADIAL_TOL)
}

pub fn radial_reduction_with(
    alpha: f64,
    n: usize,
    kind: RadialKind,
    radius: f64,
    mass: f64,
    x: &[f64],
    tol: f64,
) -> Result<f64> {
    if n < 2 || x.len() != n {
        return Err(Error::param(
            "n",
            "radial reduction needs n >= 2 and a point of that dimension",
        ));
    }
    if !(radius > 0.0) {
        return Err(Error::param("radius", "must be positive"));
    }
    let r_x = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = mass.abs().max(1e-300);
    match kind {
        RadialKind::Sphere => {
            if (r_x - radius).abs() <= 1e-12 * radius {
                return Err(Error::param("x", "target lies on the sphere"));
            }
            Ok(mass * sphere_average(alpha, n, radius, r_x, tol / scale)?)
        }
        RadialKind::Ball => {
            let nf = n as f64;
            let inner_tol = 1e-3 * tol / scale;
            let f = |rho: f64| -> f64 {
                if rho <= 0.0 || (rho - r_x).abs() <= 1e-13 * radius {
                    return 0.0;
                }
                let avg = sphere_average(alpha, n, rho, r_x, inner_tol).unwrap_or(f64::NAN);
                nf * rho.powf(nf - 1.0) / radius.powf(nf) * avg
            };
            let total = if r_x > 0.0 && r_x < radius {
                adaptive_gk15(&f, 0.0, r_x, 0.5 * tol / scale)?
                    + adaptive_gk15(&f, r_x, radius, 0.5 * tol / scale)?
            } else {
                adaptive_gk15(&f, 0.0, radius, tol / scale)?
            };
            if total.is_nan() {
                return Err(Error::Quadrature("inner angular integral failed".into()));
            }
            Ok(mass * total)
        }
    }
}

/// Best value of `(∫ (Σ_c w_c c_k |x - y_c|^{α-n})^q dσ_B(x))^{1/q}` over the
/// weights `w` on the simplex grid of step `resolution`. A lower bound for the
/// supremum over all probability measures on the candidates.
pub fn simplex_enumerate_kappa(
    sigma_b: &Measure,
    q: f64,
    alpha: f64,
    kernel_constant: f64,
    candidates: &[Vec<f64>],
    resolution: f64,
) -> Result<f64> {
    if candidates.is_empty() || candidates.len() > 4 {
        return Err(Error::param("candidates", "between 1 and 4 candidates"));
    }
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::param("resolution", "must lie in (0, 1]"));
    }
    let steps = (1.0 / resolution).round() as usize;
    let n = sigma_b.dim() as f64;
    let support: Vec<(Vec<f64>, f64)> = sigma_b
        .point_masses()
        .into_iter()
        .filter(|(_, m)| *m > 0.0)
        .collect();
    if support.is_empty() {
        return Ok(0.0);
    }
    let table: Vec<Vec<f64>> = support
        .iter()
        .map(|(p, _)| {
            candidates
                .iter()
                .map(|c| {
                    let d: f64 = p
                        .iter()
                        .zip(c)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    kernel_constant * d.powf(alpha - n)
                })
                .collect()
        })
        .collect();
    let nc = candidates.len();
    let mut best = 0.0f64;
    let mut w = vec![0usize; nc];
    // enumerate compositions of `steps` into `nc` parts
    fn walk(pos: usize, left: usize, w: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        if pos + 1 == w.len() {
            w[pos] = left;
            visit(w);
            return;
        }
        for k in 0..=left {
            w[pos] = k;
            walk(pos + 1, left - k, w, visit);
        }
    }
    let mut visit = |w: &[usize]| {
        let mut s = 0.0;
        for ((_, m), row) in support.iter().zip(&table) {
            let pot: f64 = row
                .iter()
                .zip(w)
                .map(|(k, &wi)| k * wi as f64 / steps as f64)
                .sum();
            s += m * pot.powf(q);
        }
        best = best.max(s.powf(1.0 / q));
    };
    walk(0, steps, &mut w, &mut visit);
    Ok(best)
}

fn gauss_nodes(m: usize) -> Vec<(f64, f64)> {
    // Newton iteration on P_m from the Chebyshev-like initial guesses
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// `(∫_0^∞ (t^{1/r} f*(t))^ρ dt/t)^{1/ρ}` by Gauss quadrature on dyadic pieces
/// of each level set of `f*`, with the piece next to `t = 0` in closed form.
pub fn lorentz_by_quadrature(f: &GridFunction, r: f64, rho: f64) -> Result<f64> {
    if !(r > 0.0 && rho > 0.0 && rho.is_finite()) {
        return Err(Error::param("r", "needs r > 0 and finite rho > 0"));
    }
    let vol = f.grid().cell_volume();
    let mut vals: Vec<f64> = f
        .values()
        .iter()
        .map(|v| v.abs())
        .filter(|v| *v > 0.0)
        .collect();
    if vals.is_empty() {
        return Ok(0.0);
    }
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let nodes = gauss_nodes(24);
    let e = rho / r - 1.0;
    let t_min = vol * 2f64.powi(-60);
    // f*(0+) on (0, t_min]
    let mut total = vals[0].powf(rho) * r / rho * t_min.powf(rho / r);
    let mut a = t_min;
    for (i, &v) in vals.iter().enumerate() {
        let b = (i + 1) as f64 * vol;
        let c = v.powf(rho);
        while a < b {
            let next = (2.0 * a).min(b);
            let h = 0.5 * (next - a);
            let mid = 0.5 * (next + a);
            let s: f64 = nodes.iter().map(|(x, w)| w * (mid + h * x).powf(e)).sum();
            total += c * h * s;
            a = next;
        }
    }
    Ok(total.powf(1.0 / rho))
}
