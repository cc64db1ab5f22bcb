//! Kernels `G(x, y)`: Riesz kernels on the whole space, Green functions of the
//! Laplacian on a ball and a half-space, and explicit kernel matrices.
//!
//! Besides pointwise evaluation every kernel knows how to regularize its own
//! singularity when a grid cell acts on its own center: the cell is replaced
//! by the ball of equal volume and the kernel is averaged over that ball.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::measure::{dist, dist2, Measure};
use crate::potentials::potential_at;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// `|x - y|^(alpha - n)` without constant.
    Unit,
    /// `c(n, alpha) |x - y|^(alpha - n)`, the kernel of `(-Laplacian)^(-alpha/2)`.
    #[default]
    Classical,
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelVariant {
    Riesz {
        alpha: f64,
        n: usize,
        normalization: Normalization,
    },
    GreenBall {
        n: usize,
        radius: f64,
        center: Vec<f64>,
    },
    GreenHalfSpace {
        n: usize,
    },
    Matrix {
        points: Vec<Vec<f64>>,
        entries: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    variant: KernelVariant,
    quasi_sym_a: f64,
    wmp_h: f64,
    wmp_estimated: bool,
}

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    PI.powf(n as f64 / 2.0) / gamma(n as f64 / 2.0 + 1.0)
}

/// Surface area of the unit sphere in `R^n`.
pub fn unit_sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma(n as f64 / 2.0)
}

/// `c(n, alpha) = Gamma((n - alpha)/2) / (2^alpha pi^(n/2) Gamma(alpha/2))`.
pub fn riesz_constant(n: usize, alpha: f64) -> f64 {
    let nf = n as f64;
    gamma((nf - alpha) / 2.0) / (2f64.powf(alpha) * PI.powf(nf / 2.0) * gamma(alpha / 2.0))
}

/// Radius of the ball whose volume equals `cell_volume`.
pub fn equal_volume_radius(n: usize, cell_volume: f64) -> f64 {
    (cell_volume / unit_ball_volume(n)).powf(1.0 / n as f64)
}

/// Default WMP constant used for Riesz kernels of order `alpha > 2`.
pub const DEFAULT_WMP_H_ESTIMATED: f64 = 2.0;

impl KernelSpec {
    /// Riesz kernel with the classical normalization.
    pub fn riesz(n: usize, alpha: f64) -> Result<Self> {
        Self::riesz_with(n, alpha, Normalization::Classical)
    }

    pub fn riesz_unit(n: usize, alpha: f64) -> Result<Self> {
        Self::riesz_with(n, alpha, Normalization::Unit)
    }

    pub fn riesz_with(n: usize, alpha: f64, normalization: Normalization) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidKernel(format!(
                "dimension must be at least 2, got {n}"
            )));
        }
        if !(alpha > 0.0 && alpha < n as f64) {
            return Err(Error::InvalidKernel(format!(
                "Riesz order alpha must lie in (0, n) = (0, {n}), got {alpha}"
            )));
        }
        let (wmp_h, wmp_estimated) = if alpha <= 2.0 {
            (1.0, false)
        } else {
            (DEFAULT_WMP_H_ESTIMATED, true)
        };
        Ok(Self {
            variant: KernelVariant::Riesz {
                alpha,
                n,
                normalization,
            },
            quasi_sym_a: 1.0,
            wmp_h,
            wmp_estimated,
        })
    }

    pub fn green_ball(n: usize, center: Vec<f64>, radius: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidKernel(format!(
                "Green functions need n >= 3, got {n}"
            )));
        }
        if center.len() != n {
            return Err(Error::InvalidKernel(
                "ball center has the wrong dimension".into(),
            ));
        }
        if !(radius > 0.0) {
            return Err(Error::InvalidKernel("ball radius must be positive".into()));
        }
        Ok(Self {
            variant: KernelVariant::GreenBall { n, radius, center },
            quasi_sym_a: 1.0,
            wmp_h: 1.0,
            wmp_estimated: false,
        })
    }

    pub fn green_half_space(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidKernel(format!(
                "Green functions need n >= 3, got {n}"
            )));
        }
        Ok(Self {
            variant: KernelVariant::GreenHalfSpace { n },
            quasi_sym_a: 1.0,
            wmp_h: 1.0,
            wmp_estimated: false,
        })
    }

    /// Explicit kernel on a finite point set. The quasi-symmetry constant is
    /// the largest entry ratio; `wmp_h` must be supplied by the caller.
    pub fn matrix(points: Vec<Vec<f64>>, entries: Vec<Vec<f64>>, wmp_h: f64) -> Result<Self> {
        let m = points.len();
        if m == 0 {
            return Err(Error::InvalidKernel(
                "matrix kernel needs at least one point".into(),
            ));
        }
        let dim = points[0].len();
        if dim < 2 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidKernel(
                "matrix kernel points must share a dimension of at least 2".into(),
            ));
        }
        if entries.len() != m || entries.iter().any(|row| row.len() != m) {
            return Err(Error::InvalidKernel(format!(
                "entries must form a {m}x{m} matrix"
            )));
        }
        if entries.iter().flatten().any(|v| !(*v >= 0.0) || v.is_nan()) {
            return Err(Error::InvalidKernel(
                "matrix entries must be nonnegative".into(),
            ));
        }
        if !(wmp_h >= 1.0) {
            return Err(Error::InvalidKernel("wmp_h must be at least 1".into()));
        }
        let mut a: f64 = 1.0;
        for i in 0..m {
            for j in 0..m {
                let (x, y) = (entries[i][j], entries[j][i]);
                if x > 0.0 && y > 0.0 {
                    a = a.max(x / y);
                } else if x != y {
                    a = f64::INFINITY;
                }
            }
        }
        if !a.is_finite() {
            return Err(Error::InvalidKernel(
                "matrix kernel is not quasi-symmetric (zero paired with a positive entry)".into(),
            ));
        }
        Ok(Self {
            variant: KernelVariant::Matrix { points, entries },
            quasi_sym_a: a,
            wmp_h,
            wmp_estimated: false,
        })
    }

    /// Overrides the WMP constant, e.g. for Riesz kernels with `alpha > 2`.
    pub fn with_wmp_h(mut self, h: f64) -> Result<Self> {
        if !(h >= 1.0) {
            return Err(Error::InvalidKernel("wmp_h must be at least 1".into()));
        }
        let strong = matches!(
            self.variant,
            KernelVariant::GreenBall { .. } | KernelVariant::GreenHalfSpace { .. }
        ) || matches!(self.variant, KernelVariant::Riesz { alpha, .. } if alpha <= 2.0);
        if strong && h != 1.0 {
            return Err(Error::InvalidKernel(
                "this kernel satisfies the strong maximum principle, wmp_h must be 1".into(),
            ));
        }
        self.wmp_h = h;
        self.wmp_estimated = false;
        Ok(self)
    }

    pub fn variant(&self) -> &KernelVariant {
        &self.variant
    }

    pub fn quasi_sym_a(&self) -> f64 {
        self.quasi_sym_a
    }

    pub fn wmp_h(&self) -> f64 {
        self.wmp_h
    }

    /// True when `wmp_h` is a configured estimate rather than a known constant.
    pub fn wmp_estimated(&self) -> bool {
        self.wmp_estimated
    }

    pub fn dim(&self) -> usize {
        match &self.variant {
            KernelVariant::Riesz { n, .. }
            | KernelVariant::GreenBall { n, .. }
            | KernelVariant::GreenHalfSpace { n } => *n,
            KernelVariant::Matrix { points, .. } => points[0].len(),
        }
    }

    /// Order of the Riesz kernel that dominates `G` (2 for Green functions).
    pub fn riesz_order(&self) -> Option<f64> {
        match &self.variant {
            KernelVariant::Riesz { alpha, .. } => Some(*alpha),
            KernelVariant::GreenBall { .. } | KernelVariant::GreenHalfSpace { .. } => Some(2.0),
            KernelVariant::Matrix { .. } => None,
        }
    }

    pub fn is_riesz(&self) -> bool {
        matches!(self.variant, KernelVariant::Riesz { .. })
    }

    pub fn is_translation_invariant(&self) -> bool {
        self.is_riesz()
    }

    /// Multiplicative constant in front of `|x - y|^(alpha - n)` (Newtonian
    /// constant for Green functions).
    pub fn constant(&self) -> f64 {
        match &self.variant {
            KernelVariant::Riesz {
                alpha,
                n,
                normalization,
            } => match normalization {
                Normalization::Unit => 1.0,
                Normalization::Classical => riesz_constant(*n, *alpha),
            },
            KernelVariant::GreenBall { n, .. } | KernelVariant::GreenHalfSpace { n } => {
                riesz_constant(*n, 2.0)
            }
            KernelVariant::Matrix { .. } => 1.0,
        }
    }

    /// Closed domain test: points on the boundary are accepted (the kernel
    /// vanishes there), points strictly outside are not.
    pub fn in_domain(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match &self.variant {
            KernelVariant::Riesz { .. } => true,
            KernelVariant::GreenBall { radius, center, .. } => {
                dist2(x, center) <= radius * radius * (1.0 + 1e-12)
            }
            KernelVariant::GreenHalfSpace { n } => x[n - 1] >= 0.0,
            KernelVariant::Matrix { .. } => self.matrix_index(x).is_some(),
        }
    }

    fn matrix_index(&self, x: &[f64]) -> Option<usize> {
        match &self.variant {
            KernelVariant::Matrix { points, .. } => points.iter().position(|p| {
                let scale = 1.0 + p.iter().map(|v| v.abs()).fold(0.0, f64::max);
                dist(p, x) <= 1e-9 * scale
            }),
            _ => None,
        }
    }

    /// `G(x, y)`, `+inf` on the diagonal for singular kernels.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if !self.in_domain(x) {
            return Err(Error::OutsideDomain { point: x.to_vec() });
        }
        if !self.in_domain(y) {
            return Err(Error::OutsideDomain { point: y.to_vec() });
        }
        Ok(self.eval_unchecked(x, y))
    }

    /// Evaluation without domain checks; points outside a Green domain give 0.
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.variant {
            KernelVariant::Riesz { alpha, n, .. } => {
                let r2 = dist2(x, y);
                if r2 == 0.0 {
                    f64::INFINITY
                } else {
                    self.constant() * riesz_power(r2, *alpha, *n)
                }
            }
            KernelVariant::GreenBall { n, radius, center } => {
                let r2 = dist2(x, y);
                if r2 == 0.0 {
                    return f64::INFINITY;
                }
                let image = ball_image_distance2(x, y, center, *radius);
                let r_ball2 = radius * radius;
                if dist2(x, center) >= r_ball2 || dist2(y, center) >= r_ball2 {
                    return 0.0;
                }
                let c = self.constant();
                (c * (riesz_power(r2, 2.0, *n) - riesz_power(image, 2.0, *n))).max(0.0)
            }
            KernelVariant::GreenHalfSpace { n } => {
                let last = n - 1;
                if x[last] <= 0.0 || y[last] <= 0.0 {
                    return 0.0;
                }
                let r2 = dist2(x, y);
                if r2 == 0.0 {
                    return f64::INFINITY;
                }
                let image = r2 + 4.0 * x[last] * y[last];
                let c = self.constant();
                (c * (riesz_power(r2, 2.0, *n) - riesz_power(image, 2.0, *n))).max(0.0)
            }
            KernelVariant::Matrix { entries, .. } => {
                match (self.matrix_index(x), self.matrix_index(y)) {
                    (Some(i), Some(j)) => entries[i][j],
                    _ => 0.0,
                }
            }
        }
    }

    /// Regularized value of the kernel of a cell of volume `cell_volume`
    /// centered at `x` acting on `x` itself: the average of the singular part
    /// over the ball of equal volume, minus the smooth image part.
    pub fn self_cell(&self, x: &[f64], cell_volume: f64) -> f64 {
        match &self.variant {
            KernelVariant::Riesz { alpha, n, .. } => {
                let rho = equal_volume_radius(*n, cell_volume);
                self.constant() * (*n as f64 / alpha) * rho.powf(alpha - *n as f64)
            }
            KernelVariant::GreenBall { n, radius, center } => {
                let r_ball2 = radius * radius;
                let x2 = dist2(x, center);
                if x2 >= r_ball2 {
                    return 0.0;
                }
                let rho = equal_volume_radius(*n, cell_volume);
                let nf = *n as f64;
                let singular = (nf / 2.0) * rho.powf(2.0 - nf);
                let image = ((r_ball2 - x2) / radius).powf(2.0 - nf);
                (self.constant() * (singular - image)).max(0.0)
            }
            KernelVariant::GreenHalfSpace { n } => {
                let last = n - 1;
                if x[last] <= 0.0 {
                    return 0.0;
                }
                let rho = equal_volume_radius(*n, cell_volume);
                let nf = *n as f64;
                let singular = (nf / 2.0) * rho.powf(2.0 - nf);
                let image = (2.0 * x[last]).powf(2.0 - nf);
                (self.constant() * (singular - image)).max(0.0)
            }
            KernelVariant::Matrix { entries, .. } => match self.matrix_index(x) {
                Some(i) => entries[i][i],
                None => 0.0,
            },
        }
    }

    /// Kernel between a target `x` and a cell centered at `y` of volume
    /// `cell_volume`: the regularized self value when they coincide.
    pub fn cell_eval(&self, x: &[f64], y: &[f64], cell_volume: f64) -> f64 {
        let h = cell_volume.powf(1.0 / x.len() as f64);
        if dist2(x, y) <= 1e-18 * h * h {
            self.self_cell(x, cell_volume)
        } else {
            self.eval_unchecked(x, y)
        }
    }
}

#[inline]
fn riesz_power(r2: f64, alpha: f64, n: usize) -> f64 {
    let e = alpha - n as f64;
    if e == -1.0 {
        1.0 / r2.sqrt()
    } else if e == -2.0 {
        1.0 / r2
    } else {
        r2.powf(0.5 * e)
    }
}

/// Squared `|y - c| |x - y*| / R` with `y*` the Kelvin image of `y`; written
/// symmetrically so that `x = c` or `y = c` needs no special case.
fn ball_image_distance2(x: &[f64], y: &[f64], center: &[f64], radius: f64) -> f64 {
    let mut xx = 0.0;
    let mut yy = 0.0;
    let mut xy = 0.0;
    for ((a, b), c) in x.iter().zip(y).zip(center) {
        let (u, v) = (a - c, b - c);
        xx += u * u;
        yy += v * v;
        xy += u * v;
    }
    (xx * yy / (radius * radius) - 2.0 * xy + radius * radius).max(0.0)
}

/// Largest ratio `max(G(x,y)/G(y,x), G(y,x)/G(x,y))` over the sample pairs.
pub fn check_quasi_symmetry(k: &KernelSpec, samples: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
    let mut worst: f64 = 1.0;
    for (x, y) in samples {
        let a = k.eval(x, y)?;
        let b = k.eval(y, x)?;
        if a == b {
            continue;
        }
        if a == 0.0 || b == 0.0 {
            return Ok(f64::INFINITY);
        }
        worst = worst.max(a / b).max(b / a);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WmpVerdict {
    pub sup_on_support: f64,
    pub sup_on_probes: f64,
    pub h: f64,
    pub holds: bool,
    /// Probe at which the largest potential was observed when the verdict fails.
    pub witness: Option<Vec<f64>>,
}

/// Compares `sup G sigma` on the support of `sigma` with the sup over probes.
pub fn check_wmp_empirical(
    k: &KernelSpec,
    sigma: &Measure,
    probes: &[Vec<f64>],
) -> Result<WmpVerdict> {
    let support: Vec<Vec<f64>> = sigma
        .point_masses()
        .into_iter()
        .filter(|(_, m)| *m > 0.0)
        .map(|(p, _)| p)
        .collect();
    if support.is_empty() {
        return Err(Error::Degenerate("sigma has empty support".into()));
    }
    let sup_on_support = support
        .iter()
        .map(|p| potential_at(k, sigma, p))
        .fold(0.0, f64::max);
    let mut sup_on_probes: f64 = 0.0;
    let mut arg = None;
    for p in probes {
        let v = potential_at(k, sigma, p);
        if v > sup_on_probes {
            sup_on_probes = v;
            arg = Some(p.clone());
        }
    }
    let h = k.wmp_h();
    let holds = sup_on_probes <= h * sup_on_support * (1.0 + 1e-9);
    Ok(WmpVerdict {
        sup_on_support,
        sup_on_probes,
        h,
        holds,
        witness: if holds { None } else { arg },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn riesz_closed_forms() {
        let k = KernelSpec::riesz_unit(3, 2.0).unwrap();
        assert_eq!(k.eval(&[2.0, 0.0, 0.0], &[0.0; 3]).unwrap(), 0.5);
        let k = KernelSpec::riesz_unit(2, 1.0).unwrap();
        assert_eq!(k.eval(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(k.eval(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn classical_constant_matches_newton() {
        assert!((riesz_constant(3, 2.0) - 1.0 / (4.0 * PI)).abs() < 1e-15);
        // n = 2, alpha = 1: Gamma(1/2) / (2 pi Gamma(1/2)) = 1 / (2 pi)
        assert!((riesz_constant(2, 1.0) - 1.0 / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(KernelSpec::riesz(3, 3.0).is_err());
        assert!(KernelSpec::riesz(3, 0.0).is_err());
        assert!(KernelSpec::green_ball(2, vec![0.0, 0.0], 1.0).is_err());
        assert!(KernelSpec::green_half_space(2).is_err());
        assert!(KernelSpec::matrix(vec![vec![0.0, 0.0]], vec![vec![-1.0]], 1.0).is_err());
        assert!(KernelSpec::riesz(3, 1.0).unwrap().with_wmp_h(2.0).is_err());
    }

    #[test]
    fn wmp_defaults() {
        assert_eq!(KernelSpec::riesz(3, 1.5).unwrap().wmp_h(), 1.0);
        let k = KernelSpec::riesz(3, 2.5).unwrap();
        assert_eq!(k.wmp_h(), 2.0);
        assert!(k.wmp_estimated());
        assert_eq!(KernelSpec::green_half_space(3).unwrap().wmp_h(), 1.0);
    }

    #[test]
    fn half_space_reflection_example() {
        let k = KernelSpec::green_half_space(3).unwrap();
        let v = k.eval(&[0.0, 0.0, 1.0], &[0.0, 0.0, 2.0]).unwrap();
        let c3 = 1.0 / (4.0 * PI);
        assert!((v - c3 * (1.0 - 1.0 / 3.0)).abs() < 1e-15);
        assert!(k.eval(&[0.0, 0.0, -1.0], &[0.0, 0.0, 2.0]).is_err());
    }

    #[test]
    fn green_ball_center_and_boundary() {
        let k = KernelSpec::green_ball(3, vec![0.0; 3], 2.0).unwrap();
        // G(0, y) = c (|y|^-1 - R^-1)
        let v = k.eval(&[0.0; 3], &[1.0, 0.0, 0.0]).unwrap();
        assert!((v - (1.0 - 0.5) / (4.0 * PI)).abs() < 1e-15);
        let b = k.eval(&[2.0, 0.0, 0.0], &[0.5, 0.3, 0.0]).unwrap();
        assert!(b.abs() < 1e-15);
        assert!(k.eval(&[2.5, 0.0, 0.0], &[0.0; 3]).is_err());
    }

    #[test]
    fn quasi_symmetry_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let riesz = KernelSpec::riesz(3, 1.3).unwrap();
        let ball = KernelSpec::green_ball(3, vec![0.5, 0.0, -0.5], 1.5).unwrap();
        let mut pairs = Vec::new();
        while pairs.len() < 200 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p: Vec<f64> = x.iter().zip([0.5, 0.0, -0.5]).map(|(a, c)| a + c).collect();
            let q: Vec<f64> = y.iter().zip([0.5, 0.0, -0.5]).map(|(a, c)| a + c).collect();
            if ball.in_domain(&p) && ball.in_domain(&q) {
                pairs.push((p, q));
            }
        }
        assert_eq!(check_quasi_symmetry(&riesz, &pairs).unwrap(), 1.0);
        let r = check_quasi_symmetry(&ball, &pairs).unwrap();
        assert!((r - 1.0).abs() < 1e-12, "{r}");
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0]];
        let m = KernelSpec::matrix(pts.clone(), vec![vec![1.0, 2.0], vec![1.0, 1.0]], 1.0).unwrap();
        assert_eq!(m.quasi_sym_a(), 2.0);
        let r = check_quasi_symmetry(&m, &[(pts[0].clone(), pts[1].clone())]).unwrap();
        assert_eq!(r, 2.0);
    }

    #[test]
    fn radial_monotonicity() {
        let k = KernelSpec::riesz(2, 0.7).unwrap();
        let x = [0.1, 0.2];
        assert!(k.eval(&x, &[0.5, 0.2]).unwrap() > k.eval(&x, &[0.1, 0.9]).unwrap());
    }

    #[test]
    fn self_cell_is_ball_average() {
        // n = 3, alpha = 2, unit normalization: (3/2) rho^-1
        let k = KernelSpec::riesz_unit(3, 2.0).unwrap();
        let rho = equal_volume_radius(3, 0.001);
        assert!((k.self_cell(&[0.0; 3], 0.001) - 1.5 / rho).abs() < 1e-12 / rho);
        assert!(k.cell_eval(&[0.0; 3], &[0.0; 3], 0.001).is_finite());
    }

    #[test]
    fn wmp_single_atom_holds() {
        let k = KernelSpec::riesz(3, 2.0).unwrap();
        let s = Measure::from_atoms(3, vec![(vec![0.0; 3], 1.0)]).unwrap();
        let probes = vec![vec![0.5, 0.0, 0.0], vec![0.0, 2.0, 1.0]];
        let v = check_wmp_empirical(&k, &s, &probes).unwrap();
        assert!(v.holds);
        assert_eq!(v.sup_on_support, f64::INFINITY);
    }
}
