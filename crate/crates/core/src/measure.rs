//! Nonnegative measures: finite sums of atoms plus an optional grid density.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BoxGrid, GridFunction};
use crate::quadrature::gauss_legendre_on;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: Vec<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    dim: usize,
    atoms: Vec<Atom>,
    density: Option<GridFunction>,
}

impl Measure {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            atoms: Vec::new(),
            density: None,
        }
    }

    pub fn new(dim: usize, atoms: Vec<Atom>, density: Option<GridFunction>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidMeasure(format!(
                "dimension must be at least 2, got {dim}"
            )));
        }
        for (k, a) in atoms.iter().enumerate() {
            if a.location.len() != dim {
                return Err(Error::InvalidMeasure(format!(
                    "atom {k} has {} coordinates, expected {dim}",
                    a.location.len()
                )));
            }
            if !(a.mass >= 0.0) || !a.mass.is_finite() {
                return Err(Error::InvalidMeasure(format!(
                    "atom {k} has mass {}, masses must be finite and nonnegative",
                    a.mass
                )));
            }
            if a.location.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidMeasure(format!(
                    "atom {k} has a non-finite location"
                )));
            }
        }
        if let Some(d) = &density {
            if d.grid().dim() != dim {
                return Err(Error::InvalidMeasure(
                    "density grid dimension mismatch".into(),
                ));
            }
            if d.values().iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::InvalidMeasure(
                    "density values must be finite and nonnegative".into(),
                ));
            }
        }
        Ok(Self {
            dim,
            atoms,
            density,
        })
    }

    pub fn from_atoms(dim: usize, atoms: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let atoms = atoms
            .into_iter()
            .map(|(location, mass)| Atom { location, mass })
            .collect();
        Self::new(dim, atoms, None)
    }

    pub fn from_density(density: GridFunction) -> Result<Self> {
        Self::new(density.grid().dim(), Vec::new(), Some(density))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&GridFunction> {
        self.density.as_ref()
    }

    pub fn has_atoms(&self) -> bool {
        self.atoms.iter().any(|a| a.mass > 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|a| a.mass == 0.0)
            && self
                .density
                .as_ref()
                .is_none_or(|d| d.values().iter().all(|&v| v == 0.0))
    }

    /// Point masses of the measure: atoms first, then nonzero density cells
    /// (flat index ascending) with mass `density * cell_volume`.
    pub fn point_masses(&self) -> Vec<(Vec<f64>, f64)> {
        let mut out: Vec<(Vec<f64>, f64)> = self
            .atoms
            .iter()
            .map(|a| (a.location.clone(), a.mass))
            .collect();
        if let Some(d) = &self.density {
            let vol = d.grid().cell_volume();
            for (i, &v) in d.values().iter().enumerate() {
                if v > 0.0 {
                    out.push((d.grid().point(i), v * vol));
                }
            }
        }
        out
    }

    pub fn total_mass(&self) -> f64 {
        let mut total = 0.0;
        for a in &self.atoms {
            total += a.mass;
        }
        if let Some(d) = &self.density {
            let vol = d.grid().cell_volume();
            for &v in d.values() {
                total += v * vol;
            }
        }
        total
    }

    /// Keeps atoms and density cells whose location lies strictly inside the ball.
    pub fn restrict_to_ball(&self, center: &[f64], radius: f64) -> Measure {
        let inside = |x: &[f64]| dist2(x, center) < radius * radius;
        let atoms = self
            .atoms
            .iter()
            .filter(|a| inside(&a.location))
            .cloned()
            .collect();
        let density = self.density.as_ref().map(|d| {
            let g = d.grid();
            let values = d
                .values()
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    if v > 0.0 && inside(&g.point(i)) {
                        v
                    } else {
                        0.0
                    }
                })
                .collect();
            GridFunction::new(g.clone(), values).expect("restriction keeps the grid")
        });
        Measure {
            dim: self.dim,
            atoms,
            density,
        }
    }

    pub fn scaled(&self, lambda: f64) -> Result<Measure> {
        if !(lambda >= 0.0) {
            return Err(Error::param("lambda", "scaling factor must be nonnegative"));
        }
        Ok(Measure {
            dim: self.dim,
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    location: a.location.clone(),
                    mass: lambda * a.mass,
                })
                .collect(),
            density: self.density.as_ref().map(|d| d.scaled(lambda)),
        })
    }

    /// Sum of two measures; densities must share a grid.
    pub fn sum(&self, other: &Measure) -> Result<Measure> {
        if self.dim != other.dim {
            return Err(Error::InvalidMeasure("dimension mismatch in sum".into()));
        }
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        let density = match (&self.density, &other.density) {
            (None, None) => None,
            (Some(a), None) => Some(a.clone()),
            (None, Some(b)) => Some(b.clone()),
            (Some(a), Some(b)) => Some(a.zip_with(b, |x, y| x + y)?),
        };
        Ok(Measure {
            dim: self.dim,
            atoms,
            density,
        })
    }

    /// Smallest axis-aligned box containing the support, if nonempty.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let pts = self.point_masses();
        let mut it = pts.iter().filter(|(_, m)| *m > 0.0);
        let (first, _) = it.next()?;
        let mut lo = first.clone();
        let mut hi = first.clone();
        for (p, _) in it {
            for d in 0..self.dim {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        Some((lo, hi))
    }

    /// Uniform measure of total `mass` on the sphere `|y - center| = radius`,
    /// discretized by a product Gauss rule into atoms.
    pub fn uniform_sphere(center: &[f64], radius: f64, mass: f64, order: usize) -> Result<Measure> {
        let n = center.len();
        let atoms = match n {
            2 => {
                let k = order.max(3);
                (0..k)
                    .map(|j| {
                        let t = 2.0 * PI * j as f64 / k as f64;
                        (
                            vec![center[0] + radius * t.cos(), center[1] + radius * t.sin()],
                            mass / k as f64,
                        )
                    })
                    .collect()
            }
            3 => {
                let polar = gauss_legendre_on(order.max(2), -1.0, 1.0);
                let nphi = 2 * order.max(2);
                let mut atoms = Vec::with_capacity(polar.len() * nphi);
                for &(c, w) in &polar {
                    let s = (1.0 - c * c).sqrt();
                    for j in 0..nphi {
                        let phi = 2.0 * PI * j as f64 / nphi as f64;
                        let loc = vec![
                            center[0] + radius * s * phi.cos(),
                            center[1] + radius * s * phi.sin(),
                            center[2] + radius * c,
                        ];
                        atoms.push((loc, mass * w / (2.0 * nphi as f64)));
                    }
                }
                atoms
            }
            _ => {
                return Err(Error::param(
                    "dim",
                    "sphere discretization is available for n = 2 and n = 3",
                ))
            }
        };
        Measure::from_atoms(n, atoms)
    }

    /// Uniform measure of total `mass` on the ball of given radius, as a
    /// radial Gauss rule over spheres.
    pub fn uniform_ball(center: &[f64], radius: f64, mass: f64, order: usize) -> Result<Measure> {
        let n = center.len() as i32;
        let radial = gauss_legendre_on(order.max(2), 0.0, radius);
        let norm = radius.powi(n) / n as f64;
        let mut atoms = Vec::new();
        for &(r, w) in &radial {
            let shell_mass = mass * w * r.powi(n - 1) / norm;
            let shell = Measure::uniform_sphere(center, r, shell_mass, order)?;
            atoms.extend(shell.atoms);
        }
        Measure::new(center.len(), atoms, None)
    }
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

/// Density measure on `grid` with values produced by `f` at cell centers.
pub fn density_from_fn(grid: &BoxGrid, f: impl FnMut(&[f64]) -> f64) -> Result<Measure> {
    Measure::from_density(GridFunction::from_fn(grid.clone(), f))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn total_mass_examples() {
        assert_eq!(Measure::zero(2).total_mass(), 0.0);
        let one = Measure::from_atoms(2, vec![(vec![0.0, 0.0], 2.5)]).unwrap();
        assert_eq!(one.total_mass(), 2.5);
        let g = BoxGrid::new(vec![0.0, 0.0], 0.5, vec![4, 4]).unwrap();
        let dens = Measure::from_density(GridFunction::constant(g, 1.0)).unwrap();
        assert_eq!(dens.total_mass(), 4.0);
    }

    #[test]
    fn rejects_negative_mass() {
        assert!(Measure::from_atoms(2, vec![(vec![0.0, 0.0], -1.0)]).is_err());
        let g = BoxGrid::new(vec![0.0, 0.0], 0.5, vec![1, 2]).unwrap();
        let f = GridFunction::new(g, vec![1.0, -0.1]).unwrap();
        assert!(Measure::from_density(f).is_err());
    }

    #[test]
    fn restrict_examples() {
        let far = Measure::from_atoms(2, vec![(vec![2.0, 0.0], 1.0)]).unwrap();
        assert!(far.restrict_to_ball(&[0.0, 0.0], 1.0).is_zero());
        let near = Measure::from_atoms(2, vec![(vec![0.0, 0.0], 1.0)]).unwrap();
        assert_eq!(near.restrict_to_ball(&[0.0, 0.0], 1.0), near);
    }

    #[test]
    fn restricted_disk_area_converges() {
        // uniform density on [-1,1]^2, ball radius 0.5: area pi/4 up to cell counting
        let mut prev_err = f64::INFINITY;
        for &m in &[40usize, 80, 160, 320] {
            let h = 2.0 / m as f64;
            let g = BoxGrid::centered(&[0.0, 0.0], h, vec![m, m]).unwrap();
            let dens = Measure::from_density(GridFunction::constant(g, 1.0)).unwrap();
            let r = dens.restrict_to_ball(&[0.0, 0.0], 0.5);
            let err = (r.total_mass() - PI * 0.25).abs() / (PI * 0.25);
            assert!(err < 4.0 * h, "m={m} err={err}");
            prev_err = prev_err.min(err);
        }
        assert!(prev_err < 0.01);
    }

    #[test]
    fn restrict_is_idempotent_and_keeps_mass_bounded() {
        let g = BoxGrid::centered(&[0.0, 0.0], 0.25, vec![9, 9]).unwrap();
        let dens = density_from_fn(&g, |x| 1.0 + x[0] * x[0]).unwrap();
        let once = dens.restrict_to_ball(&[0.3, -0.2], 0.7);
        let twice = once.restrict_to_ball(&[0.3, -0.2], 0.7);
        assert_eq!(once, twice);
        assert!(once.total_mass() <= dens.total_mass());
    }

    #[test]
    fn sphere_and_ball_rules_carry_the_mass() {
        let s = Measure::uniform_sphere(&[0.0, 0.0, 0.0], 1.0, 3.0, 12).unwrap();
        assert!((s.total_mass() - 3.0).abs() < 1e-12);
        for a in s.atoms() {
            assert!((dist(&a.location, &[0.0; 3]) - 1.0).abs() < 1e-12);
        }
        let b = Measure::uniform_ball(&[0.0, 0.0], 2.0, 1.5, 10).unwrap();
        assert!((b.total_mass() - 1.5).abs() < 1e-12);
    }
}
