//! Pointwise and norm inequalities checked on computed potentials and
//! solutions: iterated inequalities, the pointwise lower bound, the bilateral
//! bracket, the Lorentz bound for `Gσ`, Havin–Maz'ya boundedness and the
//! semigroup property of Riesz potentials.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{BoxGrid, GridFunction};
use crate::kernels::KernelSpec;
use crate::lorentz::{lorentz_norm, LorentzPair};
use crate::measure::Measure;
use crate::potentials::{
    havin_mazya_extended, intrinsic_potential, potential_at, riesz_on_extended, GridOperator,
    IntrinsicOptions, RieszConvolver,
};
use crate::solver::{supersolution_excess, Discretization};

/// Cells whose lattice neighborhood of radius `collar` (in cells, Euclidean)
/// lies entirely inside or entirely outside `{f > 0}`.
pub fn away_from_support_boundary(f: &GridFunction, collar: usize) -> Vec<bool> {
    let g = f.grid();
    let inside: Vec<bool> = f.values().iter().map(|&v| v > 0.0).collect();
    let n = g.dim();
    let c = collar as i64;
    let side = (2 * c + 1) as usize;
    let offsets: Vec<Vec<i64>> = (0..side.pow(n as u32))
        .map(|code| {
            let mut rem = code;
            (0..n)
                .map(|_| {
                    let o = (rem % side) as i64 - c;
                    rem /= side;
                    o
                })
                .collect::<Vec<i64>>()
        })
        .filter(|o| o.iter().map(|v| v * v).sum::<i64>() <= c * c)
        .collect();
    (0..g.len())
        .into_par_iter()
        .map(|i| {
            let idx = g.unravel(i);
            let me = inside[i];
            offsets.iter().all(|o| {
                let mut nb = Vec::with_capacity(n);
                for d in 0..n {
                    let t = idx[d] as i64 + o[d];
                    if t < 0 || t >= g.shape()[d] as i64 {
                        // outside the box counts as outside the support
                        return !me;
                    }
                    nb.push(t as usize);
                }
                inside[g.ravel(&nb)] == me
            })
        })
        .collect()
}

/// Grid points farther than `collar` cells from every atom and cell of `m`.
pub fn probes_outside_collar(grid: &BoxGrid, m: &Measure, collar: usize) -> Vec<Vec<f64>> {
    let reach = collar as f64 * grid.spacing();
    let support: Vec<Vec<f64>> = m
        .point_masses()
        .into_iter()
        .filter(|(_, w)| *w > 0.0)
        .map(|(p, _)| p)
        .collect();
    grid.points()
        .into_iter()
        .filter(|x| {
            support
                .iter()
                .all(|s| crate::measure::dist(x, s) > reach * (1.0 + 1e-12))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IteratedReport {
    pub a: f64,
    pub h: f64,
    /// `lhs ≤ rhs` is checked for `a ≥ 1`, `lhs ≥ rhs` for `a < 1`.
    pub upper: bool,
    /// Largest relative violation over the probes; negative means slack.
    pub max_violation: f64,
}

/// `(Gσ)^a` against `a h^{a-1} G((Gσ)^{a-1} dσ)` at the probes.
pub fn iterated_check(
    sigma: &Measure,
    a: f64,
    k: &KernelSpec,
    probes: &[Vec<f64>],
) -> Result<IteratedReport> {
    if !(a > 0.0) {
        return Err(Error::param("a", "must be positive"));
    }
    if sigma.has_atoms() {
        return Err(Error::AtomicSigma(
            "iterated inequalities are checked for densities".into(),
        ));
    }
    let h = k.wmp_h();
    let upper = a >= 1.0;
    let weighted = match sigma.density() {
        Some(d) => {
            let op = GridOperator::new(k, d.grid())?;
            let gs = op.apply(d.values());
            let vals = d
                .values()
                .iter()
                .zip(&gs)
                .map(|(&w, &g)| if w > 0.0 { w * g.powf(a - 1.0) } else { 0.0 })
                .collect();
            Measure::from_density(GridFunction::new(d.grid().clone(), vals)?)?
        }
        None => Measure::zero(sigma.dim()),
    };
    let factor = a * h.powf(a - 1.0);
    let max_violation = probes
        .par_iter()
        .map(|x| {
            let lhs = potential_at(k, sigma, x).powf(a);
            let rhs = factor * potential_at(k, &weighted, x);
            let gap = if upper { lhs - rhs } else { rhs - lhs };
            if gap == 0.0 {
                0.0
            } else if rhs > 0.0 {
                gap / rhs
            } else {
                f64::INFINITY
            }
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    Ok(IteratedReport {
        a,
        h,
        upper,
        max_violation: if probes.is_empty() {
            0.0
        } else {
            max_violation
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundReport {
    /// Per term: largest `(bound - u)/bound` over the grid, negative means slack.
    pub max_violation: Vec<f64>,
    pub constants: Vec<f64>,
}

/// `u ≥ (1-q_i)^{1/(1-q_i)} h^{-q_i/(1-q_i)} (Gσ_i)^{1/(1-q_i)}` at every grid point.
pub fn pointwise_lower_bound_check(
    disc: &Discretization,
    u: &GridFunction,
) -> Result<LowerBoundReport> {
    let p = disc.problem();
    let h = p.kernel().wmp_h();
    let mut max_violation = Vec::new();
    let mut constants = Vec::new();
    for (i, t) in p.terms().iter().enumerate() {
        let e = 1.0 / (1.0 - t.q);
        let c = (1.0 - t.q).powf(e) * h.powf(-t.q * e);
        let gs = disc.g_sigma(i);
        let worst = u
            .values()
            .iter()
            .zip(gs.values())
            .filter(|(uv, _)| uv.is_finite())
            .map(|(uv, g)| {
                let b = c * g.powf(e);
                if b > 0.0 {
                    (b - uv) / b
                } else {
                    f64::NEG_INFINITY
                }
            })
            .fold(f64::NEG_INFINITY, f64::max);
        max_violation.push(worst);
        constants.push(c);
    }
    Ok(LowerBoundReport {
        max_violation,
        constants,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BracketReport {
    pub c_low: f64,
    pub c_up: f64,
    pub probes: Vec<Vec<f64>>,
    /// Set when `σ = 0`, so that the bracket vanishes identically.
    pub degenerate: bool,
    /// `K_α σ` enters through a Frank–Wolfe lower bound of `κ(B)`: `c_up` is
    /// certified, `c_low` may be conservative.
    pub kappa_is_lower_bound: bool,
}

/// `(Gσ)^{1/(1-q)} + K_α σ` at one point.
pub fn bracket_at(
    k: &KernelSpec,
    sigma: &Measure,
    q: f64,
    x: &[f64],
    opts: &IntrinsicOptions,
) -> Result<f64> {
    let g = potential_at(k, sigma, x);
    let kk = intrinsic_potential(k, sigma, q, x, opts)?.value;
    Ok(g.powf(1.0 / (1.0 - q)) + kk)
}

/// Best constants with `c_low B + Gω ≤ u ≤ c_up B + Gω` at the probes, where
/// `B = (Gσ)^{1/(1-q)} + K_α σ`. Probes must be grid points of `u`.
pub fn bilateral_bracket(
    u: &GridFunction,
    sigma: &Measure,
    omega: &Measure,
    q: f64,
    k: &KernelSpec,
    probes: &[Vec<f64>],
    opts: &IntrinsicOptions,
) -> Result<BracketReport> {
    if sigma.is_zero() {
        return Ok(BracketReport {
            c_low: 0.0,
            c_up: 0.0,
            probes: probes.to_vec(),
            degenerate: true,
            kappa_is_lower_bound: true,
        });
    }
    let g = u.grid();
    let tol = 1e-6 * g.spacing();
    let ratios: Vec<Result<f64>> = probes
        .par_iter()
        .map(|x| {
            let i = g
                .locate(x, tol)
                .ok_or_else(|| Error::InvalidGrid(format!("probe {x:?} is not a grid point")))?;
            let b = bracket_at(k, sigma, q, x, opts)?;
            let excess = u.values()[i] - potential_at(k, omega, x);
            if b == 0.0 {
                if excess > 0.0 {
                    return Err(Error::Degenerate(format!("bracket vanishes at {x:?}")));
                }
                return Ok(f64::NAN);
            }
            Ok(excess / b)
        })
        .collect();
    let mut c_low = f64::INFINITY;
    let mut c_up = f64::NEG_INFINITY;
    for r in ratios {
        let r = r?;
        if r.is_nan() {
            continue;
        }
        c_low = c_low.min(r);
        c_up = c_up.max(r);
    }
    Ok(BracketReport {
        c_low,
        c_up,
        probes: probes.to_vec(),
        degenerate: false,
        kappa_is_lower_bound: true,
    })
}

/// `B = Σ_i (Gσ_i)^{1/(1-q_i)} + K_α σ_i` at every grid point.
pub fn bracket_base(disc: &Discretization, opts: &IntrinsicOptions) -> Result<GridFunction> {
    let p = disc.problem();
    let pts = p.grid().points();
    let mut total = vec![0.0; pts.len()];
    for (i, t) in p.terms().iter().enumerate() {
        let e = 1.0 / (1.0 - t.q);
        let gs = disc.g_sigma(i);
        let kk: Vec<f64> = pts
            .par_iter()
            .map(|x| Ok(intrinsic_potential(p.kernel(), &t.sigma, t.q, x, opts)?.value))
            .collect::<Result<_>>()?;
        for ((b, g), k) in total.iter_mut().zip(gs.values()).zip(&kk) {
            *b += g.powf(e) + k;
        }
    }
    GridFunction::new(p.grid().clone(), total)
}

/// Upper bracket `c B + Gω` scaled up from `c_start` by doubling until it is a
/// numerical supersolution. Returns the function and the constant used.
pub fn bracket_supersolution(
    disc: &Discretization,
    base: &GridFunction,
    c_start: f64,
    tol: f64,
    max_doublings: usize,
) -> Result<(GridFunction, f64)> {
    let g_omega = disc.g_omega();
    let mut c = c_start.max(f64::MIN_POSITIVE);
    for _ in 0..=max_doublings {
        let start = base.zip_with(&g_omega, |b, w| c * b + w)?;
        if supersolution_excess(disc, start.values())? <= tol {
            return Ok((start, c));
        }
        c *= 2.0;
    }
    Err(Error::Degenerate(format!(
        "no supersolution found up to c = {c:e}"
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub pair: LorentzPair,
}

fn ratio_of(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else {
        lhs / rhs
    }
}

/// `‖Gσ‖_{L^{r,ρ}}` against `(∫(Gσ)^β dσ)^{1/(β+1)}` with
/// `r = n(β+1)/(n-α)`, `ρ = β+1`; the Lorentz norm is taken over the grid of σ.
pub fn key_lorentz_check(sigma: &Measure, beta: f64, k: &KernelSpec) -> Result<RatioReport> {
    if !(beta > 0.0) {
        return Err(Error::param("beta", "must be positive"));
    }
    let alpha = k
        .riesz_order()
        .ok_or_else(|| Error::InvalidKernel("needs a Riesz or Green kernel".into()))?;
    let n = k.dim() as f64;
    let pair = LorentzPair::new(n * (beta + 1.0) / (n - alpha), beta + 1.0)?;
    if sigma.has_atoms() {
        return Err(Error::AtomicSigma(
            "the Lorentz bound is checked for densities".into(),
        ));
    }
    let Some(d) = sigma.density() else {
        return Ok(RatioReport {
            lhs: 0.0,
            rhs: 0.0,
            ratio: 0.0,
            pair,
        });
    };
    let op = GridOperator::new(k, d.grid())?;
    let g = GridFunction::new(d.grid().clone(), op.apply(d.values()))?;
    let lhs = lorentz_norm(&g, pair)?;
    let vol = d.grid().cell_volume();
    let mut energy = 0.0;
    for (w, gv) in d.values().iter().zip(g.values()) {
        if *w > 0.0 {
            energy += w * vol * gv.powf(beta);
        }
    }
    let rhs = energy.powf(1.0 / (beta + 1.0));
    Ok(RatioReport {
        lhs,
        rhs,
        ratio: ratio_of(lhs, rhs),
        pair,
    })
}

/// `‖V_{α,p} f‖_{L^{sn(p-1)/(n-sαp), t(p-1)}}` against `‖f‖^{1/(p-1)}_{L^{s,t}}`,
/// both over the grid of `f`; the intermediate potential uses an enlarged grid.
pub fn havin_mazya_bound_check(
    f: &GridFunction,
    alpha: f64,
    p: f64,
    s: f64,
    t: f64,
    extension: usize,
) -> Result<RatioReport> {
    let n = f.grid().dim() as f64;
    if !(p > 1.0) {
        return Err(Error::param("p", "must exceed 1"));
    }
    if !(alpha > 0.0 && alpha < n / p) {
        return Err(Error::param(
            "alpha",
            format!("must lie in (0, n/p) = (0, {})", n / p),
        ));
    }
    if !(s > 1.0 && s < n / (alpha * p)) {
        return Err(Error::param(
            "s",
            format!("must lie in (1, n/(alpha p)) = (1, {})", n / (alpha * p)),
        ));
    }
    if !(t > 0.0) {
        return Err(Error::param("t", "must be positive"));
    }
    let pair = LorentzPair::new(s * n * (p - 1.0) / (n - s * alpha * p), t * (p - 1.0))?;
    let v = havin_mazya_extended(alpha, p, f, extension)?.restrict_to(f.grid())?;
    let lhs = lorentz_norm(&v, pair)?;
    let rhs = lorentz_norm(f, LorentzPair::new(s, t)?)?.powf(1.0 / (p - 1.0));
    Ok(RatioReport {
        lhs,
        rhs,
        ratio: ratio_of(lhs, rhs),
        pair,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemigroupReport {
    /// Largest relative gap over the compared cells.
    pub max_relative_gap: f64,
    pub compared: usize,
}

/// Compares `I_b(I_a |f|)` with `I_{a+b}|f|` (classical normalization) on the
/// grid of `f`, at cells at least `collar` cells from the boundary of
/// `{f > 0}`. The inner potential is taken on the grid enlarged by
/// `extension` box widths and the outer one is summed over that grid.
pub fn semigroup_check(
    a: f64,
    b: f64,
    f: &GridFunction,
    extension: usize,
    collar: usize,
) -> Result<SemigroupReport> {
    let inner = riesz_on_extended(a, f, extension)?;
    let kb = KernelSpec::riesz(f.grid().dim(), b)?;
    let conv = RieszConvolver::new(&kb, inner.grid())?;
    let nested = GridFunction::new(inner.grid().clone(), conv.apply(inner.values()))?
        .restrict_to(f.grid())?;
    let kab = KernelSpec::riesz(f.grid().dim(), a + b)?;
    let direct = RieszConvolver::new(&kab, f.grid())?.apply(&f.map(f64::abs).into_values());
    compare_masked(
        nested.values(),
        &direct,
        &away_from_support_boundary(f, collar),
    )
}

/// Compares `V_{α,2} f` with `I_{2α}|f|`, which coincide with classical normalization.
pub fn havin_mazya_reduction_check(
    alpha: f64,
    f: &GridFunction,
    extension: usize,
    collar: usize,
) -> Result<SemigroupReport> {
    let v = havin_mazya_extended(alpha, 2.0, f, extension)?.restrict_to(f.grid())?;
    let k2 = KernelSpec::riesz(f.grid().dim(), 2.0 * alpha)?;
    let direct = RieszConvolver::new(&k2, f.grid())?.apply(&f.map(f64::abs).into_values());
    compare_masked(v.values(), &direct, &away_from_support_boundary(f, collar))
}

fn compare_masked(a: &[f64], b: &[f64], mask: &[bool]) -> Result<SemigroupReport> {
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for ((x, y), m) in a.iter().zip(b).zip(mask) {
        if *m && *y > 0.0 {
            worst = worst.max((x - y).abs() / y);
            compared += 1;
        }
    }
    if compared == 0 {
        return Err(Error::Degenerate("no cells left to compare".into()));
    }
    Ok(SemigroupReport {
        max_relative_gap: worst,
        compared,
    })
}
