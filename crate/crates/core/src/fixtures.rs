//! Reference problems used by the acceptance suite, the CLI and the Python
//! module. All densities are smooth bumps `h (1 - |x-c|²/R²)₊`.

use crate::error::Result;
use crate::grid::BoxGrid;
use crate::kernels::KernelSpec;
use crate::measure::{density_from_fn, Measure};
use crate::problem::{ProblemSpec, Term};

pub fn bump(grid: &BoxGrid, center: &[f64], radius: f64, height: f64) -> Result<Measure> {
    density_from_fn(grid, |x| {
        let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
        let v = 1.0 - r2 / (radius * radius);
        if v > 0.0 {
            height * v
        } else {
            0.0
        }
    })
}

/// Two terms (`q = 1/4`, `1/2`), `n = 2`, `α = 1`, classical normalization,
/// `γ = 1`, 64² cells on `[-2, 2]²`.
pub fn two_term() -> Result<ProblemSpec> {
    let grid = BoxGrid::centered(&[0.0, 0.0], 1.0 / 16.0, vec![64, 64])?;
    let s1 = bump(&grid, &[-0.6, 0.0], 0.5, 1.0)?;
    let s2 = bump(&grid, &[0.6, 0.0], 0.5, 1.0)?;
    let omega = bump(&grid, &[0.0, 0.6], 0.4, 0.5)?;
    ProblemSpec::new(
        KernelSpec::riesz(2, 1.0)?,
        vec![Term { sigma: s1, q: 0.25 }, Term { sigma: s2, q: 0.5 }],
        omega,
        1.0,
        grid,
    )
}

/// One term `q = 1/2`, `n = 2`, `α = 1`, `γ = 1`, on `shape` cells covering `[-2, 2]²`.
pub fn one_term(cells: usize) -> Result<ProblemSpec> {
    let grid = BoxGrid::centered(&[0.0, 0.0], 4.0 / cells as f64, vec![cells, cells])?;
    let sigma = bump(&grid, &[0.0, 0.0], 0.6, 1.0)?;
    let omega = bump(&grid, &[0.3, 0.2], 0.4, 0.5)?;
    ProblemSpec::new(
        KernelSpec::riesz(2, 1.0)?,
        vec![Term { sigma, q: 0.5 }],
        omega,
        1.0,
        grid,
    )
}

/// `u = √u + 2` as a one-point matrix kernel problem; the solution is 4.
pub fn scalar() -> Result<ProblemSpec> {
    let grid = BoxGrid::new(vec![0.0, 0.0], 1.0, vec![1, 1])?;
    let k = KernelSpec::matrix(vec![vec![0.0, 0.0]], vec![vec![1.0]], 1.0)?;
    let sigma = Measure::from_density(crate::grid::GridFunction::constant(grid.clone(), 1.0))?;
    let omega = Measure::from_atoms(2, vec![(vec![0.0, 0.0], 2.0)])?;
    ProblemSpec::new(k, vec![Term { sigma, q: 0.5 }], omega, 1.0, grid)
}

/// Green kernel of the unit ball in `n = 3`, `q = 1/2`, on `cells³` cells
/// covering `[-1, 1]³`.
pub fn green_ball(cells: usize) -> Result<ProblemSpec> {
    let grid = BoxGrid::centered(
        &[0.0, 0.0, 0.0],
        2.0 / cells as f64,
        vec![cells, cells, cells],
    )?;
    let sigma = bump(&grid, &[0.0, 0.0, 0.0], 0.3, 1.0)?;
    let omega = bump(&grid, &[0.3, 0.0, 0.0], 0.2, 1.0)?;
    ProblemSpec::new(
        KernelSpec::green_ball(3, vec![0.0, 0.0, 0.0], 1.0)?,
        vec![Term { sigma, q: 0.5 }],
        omega,
        1.0,
        grid,
    )
}

/// Every named fixture.
pub fn by_name(name: &str) -> Option<Result<ProblemSpec>> {
    match name {
        "two-term" => Some(two_term()),
        "one-term" => Some(one_term(32)),
        "scalar" => Some(scalar()),
        "green-ball" => Some(green_ball(32)),
        _ => None,
    }
}

pub const NAMES: [&str; 4] = ["two-term", "one-term", "scalar", "green-ball"];
