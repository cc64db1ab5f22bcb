//! Problem specification `u = Σ_i G(u^{q_i} dσ_i) + G ω` on a box grid.

use crate::error::{Error, Result};
use crate::grid::BoxGrid;
use crate::kernels::KernelSpec;
use crate::measure::Measure;

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub sigma: Measure,
    pub q: f64,
}

/// The solution lives on `grid`; every `σ_i` is a density on that grid (or
/// zero). `ω` may combine atoms with a density on any grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    kernel: KernelSpec,
    terms: Vec<Term>,
    omega: Measure,
    gamma: f64,
    grid: BoxGrid,
}

impl ProblemSpec {
    pub fn new(
        kernel: KernelSpec,
        terms: Vec<Term>,
        omega: Measure,
        gamma: f64,
        grid: BoxGrid,
    ) -> Result<Self> {
        let n = kernel.dim();
        if grid.dim() != n {
            return Err(Error::InvalidGrid(format!(
                "grid dimension {} differs from kernel dimension {n}",
                grid.dim()
            )));
        }
        if terms.is_empty() {
            return Err(Error::param(
                "terms",
                "at least one (sigma, q) term is required",
            ));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::param(
                "gamma",
                format!("must be positive, got {gamma}"),
            ));
        }
        for t in &terms {
            if !(t.q > 0.0 && t.q < 1.0) {
                return Err(Error::param(
                    "q",
                    format!("q must lie in (0,1), got {}", t.q),
                ));
            }
            if t.sigma.dim() != n {
                return Err(Error::InvalidMeasure(
                    "sigma has the wrong dimension".into(),
                ));
            }
            if t.sigma.has_atoms() {
                return Err(Error::AtomicSigma(
                    "sigma_i must be a density (atoms make its self-energy infinite)".into(),
                ));
            }
            if let Some(d) = t.sigma.density() {
                if !d.grid().same_lattice(&grid) && !t.sigma.is_zero() {
                    return Err(Error::InvalidMeasure(
                        "sigma_i density must live on the solution grid".into(),
                    ));
                }
            }
            check_in_domain(&kernel, &t.sigma)?;
        }
        if omega.dim() != n {
            return Err(Error::InvalidMeasure(
                "omega has the wrong dimension".into(),
            ));
        }
        check_in_domain(&kernel, &omega)?;
        if terms.iter().all(|t| t.sigma.is_zero()) && omega.is_zero() {
            return Err(Error::Degenerate(
                "all of sigma_1..sigma_M and omega are zero".into(),
            ));
        }
        Ok(Self {
            kernel,
            terms,
            omega,
            gamma,
            grid,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn omega(&self) -> &Measure {
        &self.omega
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn q_min(&self) -> f64 {
        self.terms.iter().map(|t| t.q).fold(f64::INFINITY, f64::min)
    }

    pub fn q_max(&self) -> f64 {
        self.terms.iter().map(|t| t.q).fold(0.0, f64::max)
    }

    /// Copy with `gamma` replaced.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(
            self.kernel.clone(),
            self.terms.clone(),
            self.omega.clone(),
            gamma,
            self.grid.clone(),
        )
    }

    /// Density of `σ_i` on the solution grid (zeros when `σ_i` has none).
    pub fn sigma_values(&self, i: usize) -> Vec<f64> {
        match self.terms[i].sigma.density() {
            Some(d) => d.values().to_vec(),
            None => vec![0.0; self.grid.len()],
        }
    }
}

fn check_in_domain(k: &KernelSpec, m: &Measure) -> Result<()> {
    for (p, mass) in m.point_masses() {
        if mass > 0.0 && !k.in_domain(&p) {
            return Err(Error::OutsideDomain { point: p });
        }
    }
    Ok(())
}
