//! Homogeneous fractional seminorms of grid functions, the energy identity of
//! finite-energy solutions and convexity along `Γ_t = ((1-t)v² + tu²)^{1/2}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::fft::{fft_nd, signed_index};
use crate::grid::{BoxGrid, GridFunction};
use crate::kernels::{equal_volume_radius, unit_sphere_area};
use crate::potentials::{GridOperator, RieszConvolver};
use crate::problem::ProblemSpec;

/// Largest grid (in cells) accepted by the double-sum seminorm.
pub const GAGLIARDO_CELL_BUDGET: usize = 20_000;

/// Boundary values above this fraction of the interior max trigger a warning.
pub const BOUNDARY_DECAY_RATIO: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GagliardoDomain {
    /// Pairs of grid cells only; constants have seminorm 0.
    Grid,
    /// `u` extended by zero to the whole lattice, exterior pairs included.
    ZeroExtended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SeminormKind {
    /// Fourier multiplier `|ξ|^α`, optionally zero-padded by one box per axis.
    Fourier {
        pad: bool,
    },
    Gagliardo(GagliardoDomain),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Seminorm {
    pub value: f64,
    /// Set when `u` does not decay to numerical zero at the box boundary.
    pub boundary_warning: bool,
}

/// `C(n, s) = s 4^s Γ(n/2 + s) / (π^{n/2} Γ(1 - s))`, `s = α/2`: the factor
/// with `‖u‖²_{Ḣ^{s}} = C(n,s)/2 · ∬ |u(x)-u(y)|² |x-y|^{-n-2s}`.
pub fn gagliardo_constant(n: usize, alpha: f64) -> f64 {
    let s = alpha / 2.0;
    let nf = n as f64;
    s * 4f64.powf(s) * gamma(nf / 2.0 + s) / (PI.powf(nf / 2.0) * gamma(1.0 - s))
}

fn boundary_warning(u: &GridFunction) -> bool {
    let interior = u.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    interior > 0.0 && u.boundary_max() >= BOUNDARY_DECAY_RATIO * interior
}

/// `‖u‖²_{Ḣ^{α/2}} = (2π)^{-n} ∫ |ξ|^α |û|² dξ`, discretized as
/// `δ^n/N Σ_k |ξ_k|^α |U_k|²` with `ξ_k = 2πk/(N_d δ)` per axis.
pub fn fractional_seminorm(u: &GridFunction, alpha: f64, pad: bool) -> Result<Seminorm> {
    if !(alpha > 0.0) {
        return Err(Error::param("alpha", "must be positive"));
    }
    if u.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::param("u", "seminorm needs finite values"));
    }
    let g = u.grid();
    let shape: Vec<usize> = if pad {
        g.shape().iter().map(|s| 2 * s).collect()
    } else {
        g.shape().to_vec()
    };
    let big = BoxGrid::new(vec![0.0; g.dim()], 1.0, shape.clone())?;
    let total = big.len();
    let mut buf = vec![Complex64::new(0.0, 0.0); total];
    for (i, &v) in u.values().iter().enumerate() {
        buf[big.ravel(&g.unravel(i))] = Complex64::new(v, 0.0);
    }
    fft_nd(&mut buf, &shape, false);
    let delta = g.spacing();
    let mut sum = 0.0;
    for (flat, c) in buf.iter().enumerate() {
        let idx = big.unravel(flat);
        let mut xi2 = 0.0;
        for (d, &k) in idx.iter().enumerate() {
            let xi = 2.0 * PI * signed_index(k, shape[d]) as f64 / (shape[d] as f64 * delta);
            xi2 += xi * xi;
        }
        if xi2 > 0.0 {
            sum += xi2.powf(alpha / 2.0) * c.norm_sqr();
        }
    }
    Ok(Seminorm {
        value: sum * g.cell_volume() / total as f64,
        boundary_warning: boundary_warning(u),
    })
}

pub fn fractional_seminorm_sq(u: &GridFunction, alpha: f64) -> Result<f64> {
    Ok(fractional_seminorm(u, alpha, true)?.value)
}

/// `Σ_{x≠y} |u(x)-u(y)|² |x-y|^{-n-α} vol²` over ordered pairs of cells, plus
/// the pairs with one point outside the box when `domain` is `ZeroExtended`.
pub fn gagliardo_seminorm(u: &GridFunction, alpha: f64, domain: GagliardoDomain) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::param("alpha", "the double sum needs 0 < alpha < 2"));
    }
    let g = u.grid();
    if g.len() > GAGLIARDO_CELL_BUDGET {
        return Err(Error::OverBudget {
            cells: g.len(),
            budget: GAGLIARDO_CELL_BUDGET,
        });
    }
    if u.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::param("u", "seminorm needs finite values"));
    }
    let n = g.dim();
    let e = -(n as f64 + alpha);
    let h = g.spacing();
    // weights by absolute lattice offset, in lattice units
    let table: Vec<f64> = (0..g.len())
        .map(|i| {
            let r2: f64 = g.unravel(i).iter().map(|&k| (k * k) as f64).sum();
            if r2 == 0.0 {
                0.0
            } else {
                r2.powf(e / 2.0)
            }
        })
        .collect();
    let vals = u.values();
    let idxs: Vec<Vec<usize>> = (0..g.len()).map(|i| g.unravel(i)).collect();
    let interior_sum: Vec<f64> = (0..g.len())
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for j in 0..g.len() {
                if i == j {
                    continue;
                }
                let off: Vec<usize> = idxs[i]
                    .iter()
                    .zip(&idxs[j])
                    .map(|(a, b)| a.abs_diff(*b))
                    .collect();
                let d = vals[i] - vals[j];
                s += d * d * table[g.ravel(&off)];
            }
            s
        })
        .collect();
    let mut total: f64 = interior_sum.iter().sum();
    if domain == GagliardoDomain::ZeroExtended {
        let zeta = lattice_zeta(n, alpha);
        let ext: Vec<f64> = (0..g.len())
            .into_par_iter()
            .map(|i| {
                let mut inside = 0.0;
                for j in 0..g.len() {
                    if i != j {
                        let off: Vec<usize> = idxs[i]
                            .iter()
                            .zip(&idxs[j])
                            .map(|(a, b)| a.abs_diff(*b))
                            .collect();
                        inside += table[g.ravel(&off)];
                    }
                }
                2.0 * vals[i] * vals[i] * (zeta - inside)
            })
            .collect();
        total += ext.iter().sum::<f64>();
    }
    Ok(total * h.powf(e) * g.cell_volume() * g.cell_volume())
}

/// `Σ_{k ∈ Z^n, k≠0} |k|^{-n-α}`: lattice sum up to radius `L` plus the
/// continuum tail `|S^{n-1}| L^{-α}/α`.
pub fn lattice_zeta(n: usize, alpha: f64) -> f64 {
    let l: i64 = if n == 2 { 400 } else { 60 };
    let e = -(n as f64 + alpha) / 2.0;
    let side = (2 * l + 1) as usize;
    let count = side.pow(n as u32);
    let l2 = (l * l) as f64;
    let sum: f64 = (0..count)
        .into_par_iter()
        .map(|code| {
            let mut rem = code;
            let mut r2 = 0.0;
            for _ in 0..n {
                let k = (rem % side) as i64 - l;
                rem /= side;
                r2 += (k * k) as f64;
            }
            if r2 == 0.0 || r2 > l2 {
                0.0
            } else {
                r2.powf(e)
            }
        })
        .sum();
    sum + unit_sphere_area(n) * (l as f64 + 0.5).powf(-alpha) / alpha
}

/// Contribution of pairs inside one cell, missing from the lattice double sum:
/// `Σ_x vol |∇u(x)|² |S^{n-1}| ρ^{2-α} / (n (2-α))` with `ρ` the radius of the
/// ball of cell volume and `∇u` by central differences (zero outside the box).
pub fn near_diagonal_correction(u: &GridFunction, alpha: f64) -> f64 {
    let g = u.grid();
    let n = g.dim();
    let h = g.spacing();
    let vals = u.values();
    let at = |idx: &[usize], d: usize, step: i64| -> f64 {
        let t = idx[d] as i64 + step;
        if t < 0 || t >= g.shape()[d] as i64 {
            return 0.0;
        }
        let mut j = idx.to_vec();
        j[d] = t as usize;
        vals[g.ravel(&j)]
    };
    let rho = equal_volume_radius(n, g.cell_volume());
    let factor = unit_sphere_area(n) * rho.powf(2.0 - alpha) / (n as f64 * (2.0 - alpha));
    let mut s = 0.0;
    for i in 0..g.len() {
        let idx = g.unravel(i);
        let mut grad2 = 0.0;
        for d in 0..n {
            let gd = (at(&idx, d, 1) - at(&idx, d, -1)) / (2.0 * h);
            grad2 += gd * gd;
        }
        s += grad2;
    }
    s * g.cell_volume() * factor
}

pub fn gagliardo_seminorm_sq(u: &GridFunction, alpha: f64) -> Result<f64> {
    gagliardo_seminorm(u, alpha, GagliardoDomain::Grid)
}

/// `‖u‖²_{Ḣ^{α/2}}` in the chosen discretization. For the double sum the
/// near-diagonal term is added and the constant `C(n, α/2)/2` applied, so both
/// kinds estimate the same quantity.
pub fn seminorm_sq(u: &GridFunction, alpha: f64, kind: SeminormKind) -> Result<f64> {
    match kind {
        SeminormKind::Fourier { pad } => Ok(fractional_seminorm(u, alpha, pad)?.value),
        SeminormKind::Gagliardo(domain) => {
            let pairs = gagliardo_seminorm(u, alpha, domain)? + near_diagonal_correction(u, alpha);
            Ok(0.5 * gagliardo_constant(u.grid().dim(), alpha) * pairs)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub seminorm_sq: f64,
    pub rhs_identity: f64,
    pub relative_gap: f64,
    pub gagliardo_sq: Option<f64>,
    pub boundary_warning: bool,
    pub extension: usize,
}

/// Default enlargement (box widths per side) for the energy identity.
pub const ENERGY_EXTENSION: usize = 8;

/// `‖u‖²_{Ḣ^{α/2}}` against `Σ_i ∫u^{1+q_i} dσ_i + ∫u dω` (`γ = 1`).
///
/// With `μ = Σ_i u^{q_i} σ_i + ω` the left side is the seminorm of `Gμ`; for
/// Riesz kernels `Gμ` is recomputed on the grid enlarged by `extension` box
/// widths so that its slowly decaying tail is kept. Green potentials vanish
/// outside their domain and use the grid as is.
pub fn energy_identity_check(
    p: &ProblemSpec,
    u: &GridFunction,
    extension: usize,
) -> Result<EnergyReport> {
    if p.gamma() != 1.0 {
        return Err(Error::param("gamma", "energy identity requires gamma = 1"));
    }
    if !u.grid().same_lattice(p.grid()) {
        return Err(Error::InvalidGrid("u is not on the problem grid".into()));
    }
    if p.omega().has_atoms() {
        return Err(Error::Degenerate(
            "atoms in omega have infinite energy".into(),
        ));
    }
    let alpha = p.kernel().riesz_order().ok_or_else(|| {
        Error::InvalidKernel("energy identity needs a Riesz or Green kernel".into())
    })?;
    let grid = p.grid();
    let vol = grid.cell_volume();
    let mut mu = vec![0.0; grid.len()];
    if let Some(d) = p.omega().density() {
        if !d.grid().same_lattice(grid) {
            return Err(Error::InvalidMeasure(
                "omega density must live on the solution grid for the energy identity".into(),
            ));
        }
        mu.copy_from_slice(d.values());
    }
    let mut rhs = 0.0;
    for (i, t) in p.terms().iter().enumerate() {
        for ((m, &s), &uv) in mu.iter_mut().zip(&p.sigma_values(i)).zip(u.values()) {
            if s > 0.0 {
                let w = uv.powf(t.q) * s;
                *m += w;
                rhs += w * uv * vol;
            }
        }
    }
    if let Some(d) = p.omega().density() {
        for (w, uv) in d.values().iter().zip(u.values()) {
            if *w > 0.0 {
                rhs += w * uv * vol;
            }
        }
    }
    let (potential, ext) = if p.kernel().is_riesz() {
        let pad = extension * grid.shape().iter().copied().max().unwrap_or(1);
        let outer = grid.padded(pad);
        let dens = GridFunction::new(grid.clone(), mu)?.embed_into(&outer)?;
        let conv = RieszConvolver::new(p.kernel(), &outer)?;
        (
            GridFunction::new(outer, conv.apply(dens.values()))?,
            extension,
        )
    } else {
        let op = GridOperator::new(p.kernel(), grid)?;
        (GridFunction::new(grid.clone(), op.apply(&mu))?, 0)
    };
    let s = fractional_seminorm(&potential, alpha, true)?;
    let gagliardo_sq = if alpha < 2.0 && u.grid().len() <= 1024 {
        Some(seminorm_sq(
            u,
            alpha,
            SeminormKind::Gagliardo(GagliardoDomain::ZeroExtended),
        )?)
    } else {
        None
    };
    Ok(EnergyReport {
        seminorm_sq: s.value,
        rhs_identity: rhs,
        relative_gap: if rhs > 0.0 {
            (s.value - rhs).abs() / rhs
        } else {
            s.value.abs()
        },
        gagliardo_sq,
        boundary_warning: s.boundary_warning,
        extension: ext,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

/// `Γ_t = (v² + t(u² - v²))^{1/2}`, equal to `v` at `t = 0` and to `u` at `t = 1`.
pub fn gamma_curve(u: &GridFunction, v: &GridFunction, t: f64) -> Result<GridFunction> {
    if t == 1.0 {
        return Ok(u.clone());
    }
    v.zip_with(u, |vv, uu| (vv * vv + t * (uu * uu - vv * vv)).sqrt())
}

/// `seminorm²(Γ_t)` against `(1-t) seminorm²(v) + t seminorm²(u)`.
pub fn hidden_convexity_check(
    u: &GridFunction,
    v: &GridFunction,
    t: f64,
    alpha: f64,
    kind: SeminormKind,
) -> Result<ConvexityReport> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::param("t", "must lie in [0, 1]"));
    }
    if u.values().iter().chain(v.values()).any(|&x| x < 0.0) {
        return Err(Error::param("u", "u and v must be nonnegative"));
    }
    let curve = gamma_curve(u, v, t)?;
    let lhs = seminorm_sq(&curve, alpha, kind)?;
    let su = seminorm_sq(u, alpha, kind)?;
    let sv = if u == v {
        su
    } else {
        seminorm_sq(v, alpha, kind)?
    };
    let rhs = if t == 1.0 { su } else { sv + t * (su - sv) };
    Ok(ConvexityReport {
        lhs,
        rhs,
        slack: rhs - lhs,
    })
}
