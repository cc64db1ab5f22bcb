//! Decreasing rearrangements of grid functions, Lorentz quasi-norms and
//! `L^p` norms against measures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::measure::Measure;

/// Exponent pair `(r, rho)` of a Lorentz space `L^{r, rho}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzPair {
    pub r: f64,
    pub rho: f64,
}

impl LorentzPair {
    pub fn new(r: f64, rho: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::param(
                "r",
                format!("must be positive and finite, got {r}"),
            ));
        }
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::param(
                "rho",
                format!("must be positive and finite, got {rho}"),
            ));
        }
        Ok(Self { r, rho })
    }

    /// `L^{p,p} = L^p`.
    pub fn lebesgue(p: f64) -> Result<Self> {
        Self::new(p, p)
    }
}

/// Step function `f*` equal to `levels[k]` on `[breakpoints[k], breakpoints[k+1])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRearrangement {
    pub breakpoints: Vec<f64>,
    pub levels: Vec<f64>,
}

impl StepRearrangement {
    /// Lebesgue measure of `{f* > lambda}`.
    pub fn distribution(&self, lambda: f64) -> f64 {
        let k = self.levels.partition_point(|&l| l > lambda);
        self.breakpoints[k]
    }

    pub fn total_volume(&self) -> f64 {
        *self.breakpoints.last().expect("breakpoints start at 0")
    }

    /// `f*(t)`, zero beyond the total volume.
    pub fn value_at(&self, t: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= t);
        if k == 0 || k > self.levels.len() {
            0.0
        } else {
            self.levels[k - 1]
        }
    }
}

/// Decreasing rearrangement of `|values|`, each value carrying `cell_volume`.
pub fn rearrange_values(values: &[f64], cell_volume: f64) -> Result<StepRearrangement> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("f", "rearrangement needs finite values"));
    }
    let mut sorted: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut breakpoints = vec![0.0];
    let mut levels = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let level = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == level {
            j += 1;
        }
        levels.push(level);
        // breakpoints from integer counts keep them exact multiples of the volume
        breakpoints.push(j as f64 * cell_volume);
        i = j;
    }
    Ok(StepRearrangement {
        breakpoints,
        levels,
    })
}

pub fn rearrange(f: &GridFunction) -> Result<StepRearrangement> {
    rearrange_values(f.values(), f.grid().cell_volume())
}

/// `(∫_0^∞ (t^{1/r} f*(t))^rho dt/t)^{1/rho}`, integrated exactly on each step.
pub fn lorentz_norm_of(step: &StepRearrangement, p: LorentzPair) -> f64 {
    let LorentzPair { r, rho } = p;
    let e = rho / r;
    let mut sum = 0.0;
    for (k, &level) in step.levels.iter().enumerate() {
        if level == 0.0 {
            continue;
        }
        let (a, b) = (step.breakpoints[k], step.breakpoints[k + 1]);
        sum += level.powf(rho) * (r / rho) * (b.powf(e) - a.powf(e));
    }
    sum.powf(1.0 / rho)
}

pub fn lorentz_norm(f: &GridFunction, p: LorentzPair) -> Result<f64> {
    Ok(lorentz_norm_of(&rearrange(f)?, p))
}

/// `sup_t t^{1/r} f*(t)`, the `rho = ∞` case. For a step function the sup is
/// attained at the right end of a step.
pub fn lorentz_sup_norm(f: &GridFunction, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::param("r", "must be positive"));
    }
    let step = rearrange(f)?;
    Ok(step
        .levels
        .iter()
        .enumerate()
        .map(|(k, l)| step.breakpoints[k + 1].powf(1.0 / r) * l)
        .fold(0.0, f64::max))
}

/// Plain Lebesgue norm `(Σ |f|^p vol)^{1/p}` in flat order.
pub fn lp_norm(f: &GridFunction, p: f64) -> f64 {
    let vol = f.grid().cell_volume();
    let mut s = 0.0;
    for v in f.values() {
        s += v.abs().powf(p) * vol;
    }
    s.powf(1.0 / p)
}

/// `(∫ |f|^p dm)^{1/p}` where every atom and density cell of `m` must sit on
/// a grid point of `f`.
pub fn lp_norm_measure(f: &GridFunction, p: f64, m: &Measure) -> Result<f64> {
    Ok(integrate_power(f, p, m)?.powf(1.0 / p))
}

/// `∫ |f|^p dm` with the same placement rules as [`lp_norm_measure`].
pub fn integrate_power(f: &GridFunction, p: f64, m: &Measure) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::param("p", format!("must be positive, got {p}")));
    }
    let g = f.grid();
    let tol = 1e-6 * g.spacing();
    let mut sum = 0.0;
    // fast path: density on the grid of f
    let mut density_done = false;
    if let Some(d) = m.density() {
        if d.grid().same_lattice(g) {
            let vol = g.cell_volume();
            for (v, w) in f.values().iter().zip(d.values()) {
                if *w > 0.0 {
                    sum += w * vol * v.abs().powf(p);
                }
            }
            density_done = true;
        }
    }
    let n_atoms = m.atoms().len();
    for (idx, (x, mass)) in m.point_masses().into_iter().enumerate() {
        if mass <= 0.0 || (density_done && idx >= n_atoms) {
            continue;
        }
        let i = g.locate(&x, tol).ok_or_else(|| {
            Error::InvalidMeasure(format!("measure point {x:?} is not a grid point of f"))
        })?;
        sum += mass * f.values()[i].abs().powf(p);
    }
    Ok(sum)
}
