//! Monotone iteration for the minimal positive solution of
//! `u = Σ_i G(u^{q_i} dσ_i) + G ω`, plus the downward iteration from a
//! supersolution and the residual.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::lorentz::{lorentz_norm, LorentzPair};
use crate::potentials::{potential_on_grid, GridOperator};
use crate::problem::ProblemSpec;

/// Slack allowed when checking that iterates move in one direction.
pub const EPS_MONO: f64 = 1e-12;

/// Grid operator, `Gω` and the `σ_i` densities of a problem, prepared once.
#[derive(Debug, Clone)]
pub struct Discretization {
    problem: ProblemSpec,
    op: GridOperator,
    g_omega: Vec<f64>,
    sigmas: Vec<Vec<f64>>,
}

impl Discretization {
    pub fn new(p: &ProblemSpec) -> Result<Self> {
        let op = GridOperator::new(p.kernel(), p.grid())?;
        Self::with_operator(p, op)
    }

    pub fn with_operator(p: &ProblemSpec, op: GridOperator) -> Result<Self> {
        let g_omega = potential_on_grid(p.kernel(), p.omega(), p.grid(), Some(&op))?.into_values();
        let sigmas = (0..p.terms().len()).map(|i| p.sigma_values(i)).collect();
        Ok(Self {
            problem: p.clone(),
            op,
            g_omega,
            sigmas,
        })
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.problem
    }

    pub fn operator(&self) -> &GridOperator {
        &self.op
    }

    pub fn g_omega(&self) -> GridFunction {
        GridFunction::new(self.problem.grid().clone(), self.g_omega.clone())
            .expect("Gω lives on the problem grid")
    }

    /// `G σ_i` on the grid.
    pub fn g_sigma(&self, i: usize) -> GridFunction {
        GridFunction::new(self.problem.grid().clone(), self.op.apply(&self.sigmas[i]))
            .expect("potential lives on the problem grid")
    }

    /// `G(f dσ_i)` for a function `f` on the grid.
    pub fn weighted_potential(&self, i: usize, f: &[f64]) -> Result<Vec<f64>> {
        let dens = weighted_density(f, &self.sigmas[i], 1.0)?;
        Ok(self.op.apply(&dens))
    }

    /// `Σ_i G(u^{q_i} dσ_i)` by a single application of the operator.
    pub fn sublinear_part(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut dens = vec![0.0; u.len()];
        for (t, sigma) in self.problem.terms().iter().zip(&self.sigmas) {
            let d = weighted_density(u, sigma, t.q)?;
            for (a, b) in dens.iter_mut().zip(d) {
                *a += b;
            }
        }
        Ok(self.op.apply(&dens))
    }

    /// `T u = Σ_i G(u^{q_i} dσ_i) + G ω`.
    pub fn iterate(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.iter().any(|v| v.is_nan()) {
            return Err(Error::NotANumber("iterate"));
        }
        let mut out = self.sublinear_part(u)?;
        for (a, b) in out.iter_mut().zip(&self.g_omega) {
            *a += b;
        }
        if out.iter().any(|v| v.is_nan()) {
            return Err(Error::NotANumber("iterate"));
        }
        Ok(out)
    }

    /// `‖f‖_{L^p(dσ_i)}`.
    pub fn sigma_norm(&self, i: usize, f: &[f64], p: f64) -> f64 {
        let vol = self.problem.grid().cell_volume();
        let mut s = 0.0;
        for (v, w) in f.iter().zip(&self.sigmas[i]) {
            if *w > 0.0 {
                s += w * vol * v.abs().powf(p);
            }
        }
        s.powf(1.0 / p)
    }
}

/// `f^q σ` cellwise; `+∞` on the support of `σ` is a degenerate instance.
fn weighted_density(f: &[f64], sigma: &[f64], q: f64) -> Result<Vec<f64>> {
    f.iter()
        .zip(sigma)
        .map(|(&v, &w)| {
            if w == 0.0 {
                Ok(0.0)
            } else if v.is_infinite() {
                Err(Error::Degenerate(
                    "u = +inf on the support of sigma_i".into(),
                ))
            } else {
                Ok(v.max(0.0).powf(q) * w)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialLower {
    /// One `κ` for all terms: the smallest of the per-term admissible values.
    pub kappa: f64,
    /// `u_i^{(0)} = κ (Gσ_i)^{1/(1-q_i)}`.
    #[serde(skip)]
    pub functions: Vec<GridFunction>,
    /// Largest relative excess of `u_i^{(0)}` over `G((u_i^{(0)})^{q_i} dσ_i)`.
    pub max_excess: f64,
}

/// Admissible `κ` for one exponent: `min{(1/c)^{1/(1-q)}, (1-q)^{1/(1-q)} h^{-q/(1-q)}}`
/// with `c = a h^{a-1}`, `a = 1/(1-q)`.
pub fn kappa_for(q: f64, h: f64) -> f64 {
    let a = 1.0 / (1.0 - q);
    let c = a * h.powf(a - 1.0);
    let from_iterated = (1.0 / c).powf(a);
    let from_lower_bound = (1.0 - q).powf(a) * h.powf(-q * a);
    from_iterated.min(from_lower_bound)
}

pub fn initial_lower(p: &ProblemSpec) -> Result<InitialLower> {
    initial_lower_with(&Discretization::new(p)?)
}

pub fn initial_lower_with(disc: &Discretization) -> Result<InitialLower> {
    let p = disc.problem();
    let h = p.kernel().wmp_h();
    let kappa = p
        .terms()
        .iter()
        .map(|t| kappa_for(t.q, h))
        .fold(f64::INFINITY, f64::min);
    if !(kappa > 0.0) {
        return Err(Error::Degenerate(format!(
            "kappa = {kappa} is not positive"
        )));
    }
    let mut functions = Vec::new();
    let mut max_excess: f64 = 0.0;
    for (i, t) in p.terms().iter().enumerate() {
        let u0 = disc.g_sigma(i).map(|v| kappa * v.powf(1.0 / (1.0 - t.q)));
        let back = disc.weighted_potential(i, &u0.map(|v| v.powf(t.q)).into_values())?;
        for (a, b) in u0.values().iter().zip(&back) {
            if *a > *b {
                let excess = if *b > 0.0 { (a - b) / b } else { f64::INFINITY };
                max_excess = max_excess.max(excess);
            }
        }
        functions.push(u0);
    }
    Ok(InitialLower {
        kappa,
        functions,
        max_excess,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterate_count: usize,
    /// `sup |u_{j+1} - u_j|` per step.
    pub residual_history: Vec<f64>,
    /// `sup |u - T u|` at the returned `u`.
    pub final_residual_fp: f64,
    pub monotonicity_violations: usize,
    /// `‖u‖_{L^{γ+q_i}(dσ_i)}`.
    pub norms: Vec<f64>,
    /// `L^{r,ρ}` norm of `u` over the grid with the solution exponents, when
    /// `u` is finite everywhere.
    pub lorentz_norm: Option<f64>,
    pub lorentz_pair: Option<LorentzPair>,
    pub kappa: f64,
    pub initial_excess: f64,
    pub tolerance: f64,
    pub converged: bool,
}

/// Applies `T` once.
pub fn iterate_once(p: &ProblemSpec, u: &GridFunction) -> Result<GridFunction> {
    let disc = Discretization::new(p)?;
    GridFunction::new(p.grid().clone(), disc.iterate(u.values())?)
}

/// `sup |u - T u|` over points where both are finite.
pub fn residual(p: &ProblemSpec, u: &GridFunction) -> Result<f64> {
    residual_with(&Discretization::new(p)?, u)
}

pub fn residual_with(disc: &Discretization, u: &GridFunction) -> Result<f64> {
    let next = disc.iterate(u.values())?;
    Ok(sup_diff(u.values(), &next))
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn count_violations(prev: &[f64], next: &[f64], increasing: bool) -> usize {
    prev.iter()
        .zip(next)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .filter(|(a, b)| {
            let slack = EPS_MONO * a.abs().max(1.0);
            if increasing {
                **b < **a - slack
            } else {
                **b > **a + slack
            }
        })
        .count()
}

fn finish_report(
    disc: &Discretization,
    u: &[f64],
    mut report: SolveReport,
) -> Result<(GridFunction, SolveReport)> {
    let p = disc.problem();
    let grid = p.grid().clone();
    let u = GridFunction::new(grid, u.to_vec())?;
    report.final_residual_fp = residual_with(disc, &u)?;
    report.norms = p
        .terms()
        .iter()
        .enumerate()
        .map(|(i, t)| disc.sigma_norm(i, u.values(), p.gamma() + t.q))
        .collect();
    if let Some(alpha) = p.kernel().riesz_order() {
        let n = p.kernel().dim() as f64;
        if alpha < n && u.values().iter().all(|v| v.is_finite()) {
            let pair = LorentzPair::new(n * (p.gamma() + 1.0) / (n - alpha), p.gamma() + 1.0)?;
            report.lorentz_norm = Some(lorentz_norm(&u, pair)?);
            report.lorentz_pair = Some(pair);
        }
    }
    let last = report.residual_history.last().copied().unwrap_or(0.0);
    report.converged =
        last <= report.tolerance && report.final_residual_fp <= 10.0 * report.tolerance;
    Ok((u, report))
}

fn empty_report(tol: f64) -> SolveReport {
    SolveReport {
        iterate_count: 0,
        residual_history: Vec::new(),
        final_residual_fp: 0.0,
        monotonicity_violations: 0,
        norms: Vec::new(),
        lorentz_norm: None,
        lorentz_pair: None,
        kappa: 0.0,
        initial_excess: 0.0,
        tolerance: tol,
        converged: false,
    }
}

/// Minimal solution by the nondecreasing iteration started from
/// `u_0 = Σ_i G((u_i^{(0)})^{q_i} dσ_i) + Gω`. Non-convergence is reported
/// through `SolveReport::converged`, not as an error.
pub fn solve_minimal(
    p: &ProblemSpec,
    tol: f64,
    max_iter: usize,
) -> Result<(GridFunction, SolveReport)> {
    solve_minimal_with(&Discretization::new(p)?, tol, max_iter)
}

pub fn solve_minimal_with(
    disc: &Discretization,
    tol: f64,
    max_iter: usize,
) -> Result<(GridFunction, SolveReport)> {
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let p = disc.problem();
    let init = initial_lower_with(disc)?;
    let mut dens = vec![0.0; p.grid().len()];
    for (i, (t, u0)) in p.terms().iter().zip(&init.functions).enumerate() {
        let d = weighted_density(u0.values(), &p.sigma_values(i), t.q)?;
        for (a, b) in dens.iter_mut().zip(d) {
            *a += b;
        }
    }
    let mut u = disc.operator().apply(&dens);
    for (a, b) in u.iter_mut().zip(&disc.g_omega) {
        *a += b;
    }
    let mut report = empty_report(tol);
    report.kappa = init.kappa;
    report.initial_excess = init.max_excess;
    for _ in 0..max_iter {
        let next = disc.iterate(&u)?;
        let diff = sup_diff(&u, &next);
        report.monotonicity_violations += count_violations(&u, &next, true);
        report.residual_history.push(diff);
        report.iterate_count += 1;
        u = next;
        if diff <= tol {
            break;
        }
    }
    finish_report(disc, &u, report)
}

/// Nonincreasing iteration from a supersolution `start ≥ T start - tol`.
pub fn downward_solve(
    p: &ProblemSpec,
    start: &GridFunction,
    tol: f64,
    max_iter: usize,
) -> Result<(GridFunction, SolveReport)> {
    downward_solve_with(&Discretization::new(p)?, start, tol, max_iter)
}

/// Largest amount by which `T start` exceeds `start`.
pub fn supersolution_excess(disc: &Discretization, start: &[f64]) -> Result<f64> {
    let next = disc.iterate(start)?;
    Ok(start
        .iter()
        .zip(&next)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| b - a)
        .fold(0.0, f64::max))
}

pub fn downward_solve_with(
    disc: &Discretization,
    start: &GridFunction,
    tol: f64,
    max_iter: usize,
) -> Result<(GridFunction, SolveReport)> {
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    if !start.grid().same_lattice(disc.problem().grid()) {
        return Err(Error::InvalidGrid(
            "start is not on the problem grid".into(),
        ));
    }
    let excess = supersolution_excess(disc, start.values())?;
    if excess > tol {
        return Err(Error::NotSupersolution { excess, tol });
    }
    let mut u = start.values().to_vec();
    let mut report = empty_report(tol);
    for _ in 0..max_iter {
        let next = disc.iterate(&u)?;
        let diff = sup_diff(&u, &next);
        report.monotonicity_violations += count_violations(&u, &next, false);
        report.residual_history.push(diff);
        report.iterate_count += 1;
        u = next;
        if diff <= tol {
            break;
        }
    }
    finish_report(disc, &u, report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormBound {
    /// `‖u‖_{L^{γ+q_i}(dσ_i)}`.
    pub norms: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
    pub q_max: f64,
    /// `(C_1 M)^{1/(1-q)} + C_2/(1-q)`.
    pub bound: f64,
    pub holds: bool,
}

/// Assembles the constants of the a priori bound from the solution itself:
/// `C_2 = max_i ‖Gω‖_{L^{γ+q_i}(dσ_i)}` and `C_1` the smallest constant with
/// `Σ_l ‖G(u^{q_l} dσ_l)‖_{L^{γ+q_i}(dσ_i)} ≤ C_1 M N^{q_max}` for every `i`,
/// `N = max_i ‖u‖_{L^{γ+q_i}(dσ_i)}`.
pub fn norm_bound_check(disc: &Discretization, u: &GridFunction) -> Result<NormBound> {
    let p = disc.problem();
    let m = p.terms().len();
    let q = p.q_max();
    let exps: Vec<f64> = p.terms().iter().map(|t| p.gamma() + t.q).collect();
    let norms: Vec<f64> = (0..m)
        .map(|i| disc.sigma_norm(i, u.values(), exps[i]))
        .collect();
    let n_max = norms.iter().copied().fold(0.0, f64::max);
    let g_omega = disc.g_omega.clone();
    let c2 = (0..m)
        .map(|i| disc.sigma_norm(i, &g_omega, exps[i]))
        .fold(0.0, f64::max);
    let pieces: Vec<Vec<f64>> = p
        .terms()
        .iter()
        .enumerate()
        .map(|(l, t)| {
            let f: Vec<f64> = u.values().iter().map(|v| v.max(0.0).powf(t.q)).collect();
            disc.weighted_potential(l, &f)
        })
        .collect::<Result<_>>()?;
    let mut c1: f64 = 0.0;
    if n_max > 0.0 {
        for i in 0..m {
            let s: f64 = pieces.iter().map(|g| disc.sigma_norm(i, g, exps[i])).sum();
            c1 = c1.max(s / (m as f64 * n_max.powf(q)));
        }
    }
    let bound = (c1 * m as f64).powf(1.0 / (1.0 - q)) + c2 / (1.0 - q);
    Ok(NormBound {
        holds: n_max <= bound * (1.0 + 1e-9),
        norms,
        c1,
        c2,
        q_max: q,
        bound,
    })
}
