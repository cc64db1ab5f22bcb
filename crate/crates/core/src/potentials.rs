//! Potentials `G nu(x) = ∫ G(x, y) dnu(y)` of measures: direct summation,
//! FFT convolution on grids, the Havin–Maz'ya nested potential, the
//! localized constant `kappa(B)` and the intrinsic potential built from it.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fft::fft_nd;
use crate::grid::{BoxGrid, GridFunction};
use crate::kernels::KernelSpec;
use crate::measure::{dist, Measure};

/// Largest padded FFT grid (in cells) a convolver may allocate.
pub const FFT_CELL_BUDGET: usize = 1 << 26;

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Grid(BoxGrid),
    Points(Vec<Vec<f64>>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Grid(g) => g.len(),
            Targets::Points(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        match self {
            Targets::Grid(g) => g.point(i),
            Targets::Points(p) => p[i].clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    pub targets: Targets,
    pub values: Vec<f64>,
}

impl PotentialField {
    pub fn into_grid_function(self) -> Result<GridFunction> {
        match self.targets {
            Targets::Grid(g) => GridFunction::new(g, self.values),
            Targets::Points(_) => Err(Error::InvalidGrid("field is not on a grid".into())),
        }
    }
}

/// Potential of `m` at one point. Atoms use the raw kernel; density cells use
/// the cell-regularized kernel. Summation order: atoms, then cells by flat index.
pub fn potential_at(k: &KernelSpec, m: &Measure, x: &[f64]) -> f64 {
    let mut total = 0.0;
    for a in m.atoms() {
        if a.mass > 0.0 {
            total += a.mass * k.eval_unchecked(x, &a.location);
        }
    }
    if let Some(d) = m.density() {
        let g = d.grid();
        let vol = g.cell_volume();
        for (i, &v) in d.values().iter().enumerate() {
            if v > 0.0 {
                total += v * vol * k.cell_eval(x, &g.point(i), vol);
            }
        }
    }
    total
}

fn check_support_in_domain(k: &KernelSpec, m: &Measure) -> Result<()> {
    for (p, mass) in m.point_masses() {
        if mass > 0.0 && !k.in_domain(&p) {
            return Err(Error::OutsideDomain { point: p });
        }
    }
    Ok(())
}

/// Direct summation of the potential at every target.
pub fn potential_direct(k: &KernelSpec, m: &Measure, targets: &Targets) -> Result<PotentialField> {
    if m.dim() != k.dim() {
        return Err(Error::InvalidMeasure(
            "measure and kernel dimensions differ".into(),
        ));
    }
    check_support_in_domain(k, m)?;
    let pts: Vec<Vec<f64>> = (0..targets.len()).map(|i| targets.point(i)).collect();
    if let Some(bad) = pts.iter().find(|p| !k.in_domain(p)) {
        return Err(Error::OutsideDomain { point: bad.clone() });
    }
    let masses = m.point_masses();
    let vol = m.density().map(|d| d.grid().cell_volume());
    let n_atoms = m.atoms().len();
    let values = pts
        .par_iter()
        .map(|x| {
            let mut total = 0.0;
            for (idx, (y, mass)) in masses.iter().enumerate() {
                if *mass <= 0.0 {
                    continue;
                }
                let kv = if idx < n_atoms {
                    k.eval_unchecked(x, y)
                } else {
                    k.cell_eval(x, y, vol.expect("cells come from a density"))
                };
                total += mass * kv;
            }
            total
        })
        .collect();
    Ok(PotentialField {
        targets: targets.clone(),
        values,
    })
}

/// Linear convolution with a sampled Riesz kernel on a fixed grid, by
/// zero-padding every axis to twice its length.
#[derive(Debug, Clone)]
pub struct RieszConvolver {
    grid: BoxGrid,
    padded: Vec<usize>,
    kernel_hat: Vec<Complex64>,
}

impl RieszConvolver {
    pub fn new(k: &KernelSpec, grid: &BoxGrid) -> Result<Self> {
        if !k.is_riesz() {
            return Err(Error::InvalidKernel(
                "FFT convolution needs a Riesz kernel".into(),
            ));
        }
        if k.dim() != grid.dim() {
            return Err(Error::InvalidGrid(
                "grid and kernel dimensions differ".into(),
            ));
        }
        let padded: Vec<usize> = grid.shape().iter().map(|s| 2 * s).collect();
        let total: usize = padded.iter().product();
        if total > FFT_CELL_BUDGET {
            return Err(Error::OverBudget {
                cells: total,
                budget: FFT_CELL_BUDGET,
            });
        }
        let h = grid.spacing();
        let vol = grid.cell_volume();
        let zero = vec![0.0; grid.dim()];
        let pgrid = BoxGrid::new(vec![0.0; grid.dim()], 1.0, padded.clone())?;
        let mut table = vec![Complex64::new(0.0, 0.0); total];
        for (flat, slot) in table.iter_mut().enumerate() {
            let idx = pgrid.unravel(flat);
            let mut offset = Vec::with_capacity(idx.len());
            let mut used = true;
            for (d, &m) in idx.iter().enumerate() {
                let n = grid.shape()[d];
                let p = padded[d];
                if m < n {
                    offset.push(m as f64 * h);
                } else if m > p - n {
                    offset.push((m as f64 - p as f64) * h);
                } else {
                    used = false;
                    break;
                }
            }
            if used {
                *slot = Complex64::new(k.cell_eval(&zero, &offset, vol), 0.0);
            }
        }
        fft_nd(&mut table, &padded, false);
        Ok(Self {
            grid: grid.clone(),
            padded,
            kernel_hat: table,
        })
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    /// Potential at the grid points of the measure with the given density.
    pub fn apply(&self, density: &[f64]) -> Vec<f64> {
        assert_eq!(
            density.len(),
            self.grid.len(),
            "density length must match the grid"
        );
        if density.iter().all(|&v| v == 0.0) {
            return vec![0.0; density.len()];
        }
        let vol = self.grid.cell_volume();
        let total = self.kernel_hat.len();
        let pgrid = BoxGrid::new(vec![0.0; self.grid.dim()], 1.0, self.padded.clone())
            .expect("padded shape is valid");
        let mut buf = vec![Complex64::new(0.0, 0.0); total];
        for (i, &v) in density.iter().enumerate() {
            let idx = self.grid.unravel(i);
            buf[pgrid.ravel(&idx)] = Complex64::new(v * vol, 0.0);
        }
        fft_nd(&mut buf, &self.padded, false);
        for (b, kh) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= kh;
        }
        fft_nd(&mut buf, &self.padded, true);
        (0..density.len())
            .map(|i| buf[pgrid.ravel(&self.grid.unravel(i))].re.max(0.0))
            .collect()
    }
}

/// FFT evaluation of the potential of a grid density on its own grid.
pub fn potential_grid_fft(k: &KernelSpec, m: &Measure) -> Result<PotentialField> {
    if m.has_atoms() {
        return Err(Error::InvalidMeasure(
            "FFT evaluation takes a density-only measure".into(),
        ));
    }
    let d = m
        .density()
        .ok_or_else(|| Error::InvalidMeasure("FFT evaluation needs a grid density".into()))?;
    let conv = RieszConvolver::new(k, d.grid())?;
    Ok(PotentialField {
        targets: Targets::Grid(d.grid().clone()),
        values: conv.apply(d.values()),
    })
}

/// Maps a density on a grid to its potential at the grid points, by FFT for
/// Riesz kernels and by direct summation otherwise.
#[derive(Debug, Clone)]
pub enum GridOperator {
    Fft(RieszConvolver),
    Direct {
        kernel: KernelSpec,
        grid: BoxGrid,
        points: Vec<Vec<f64>>,
    },
}

impl GridOperator {
    pub fn new(k: &KernelSpec, grid: &BoxGrid) -> Result<Self> {
        if k.dim() != grid.dim() {
            return Err(Error::InvalidGrid(
                "grid and kernel dimensions differ".into(),
            ));
        }
        if k.is_riesz() {
            Ok(GridOperator::Fft(RieszConvolver::new(k, grid)?))
        } else {
            Ok(GridOperator::Direct {
                kernel: k.clone(),
                grid: grid.clone(),
                points: grid.points(),
            })
        }
    }

    /// Direct summation regardless of the kernel type.
    pub fn direct(k: &KernelSpec, grid: &BoxGrid) -> Self {
        GridOperator::Direct {
            kernel: k.clone(),
            grid: grid.clone(),
            points: grid.points(),
        }
    }

    pub fn grid(&self) -> &BoxGrid {
        match self {
            GridOperator::Fft(c) => c.grid(),
            GridOperator::Direct { grid, .. } => grid,
        }
    }

    pub fn apply(&self, density: &[f64]) -> Vec<f64> {
        match self {
            GridOperator::Fft(c) => c.apply(density),
            GridOperator::Direct {
                kernel,
                grid,
                points,
            } => {
                let vol = grid.cell_volume();
                let sources: Vec<(usize, f64)> = density
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v > 0.0)
                    .map(|(i, v)| (i, v * vol))
                    .collect();
                points
                    .par_iter()
                    .map(|x| {
                        let mut total = 0.0;
                        for &(j, mass) in &sources {
                            total += mass * kernel.cell_eval(x, &points[j], vol);
                        }
                        total
                    })
                    .collect()
            }
        }
    }

    pub fn apply_fn(&self, density: &GridFunction) -> Result<GridFunction> {
        if !density.grid().same_lattice(self.grid()) {
            return Err(Error::InvalidGrid(
                "density is not on the operator grid".into(),
            ));
        }
        GridFunction::new(self.grid().clone(), self.apply(density.values()))
    }
}

/// Potential of `m` at the points of `grid`: the density part by the grid
/// operator when the density lives on `grid`, everything else directly.
pub fn potential_on_grid(
    k: &KernelSpec,
    m: &Measure,
    grid: &BoxGrid,
    op: Option<&GridOperator>,
) -> Result<GridFunction> {
    check_support_in_domain(k, m)?;
    let mut values = vec![0.0; grid.len()];
    let mut density_done = false;
    if let (Some(d), Some(op)) = (m.density(), op) {
        if d.grid().same_lattice(grid) && op.grid().same_lattice(grid) {
            values = op.apply(d.values());
            density_done = true;
        }
    }
    let rest = Measure::new(
        m.dim(),
        m.atoms().to_vec(),
        if density_done {
            None
        } else {
            m.density().cloned()
        },
    )?;
    if !rest.is_zero() {
        let pts = grid.points();
        let extra: Vec<f64> = pts.par_iter().map(|x| potential_at(k, &rest, x)).collect();
        for (v, e) in values.iter_mut().zip(extra) {
            *v += e;
        }
    }
    GridFunction::new(grid.clone(), values)
}

/// Riesz potential (classical normalization) of a grid density, evaluated on
/// the grid enlarged by `extension` box widths on every side.
pub fn riesz_on_extended(alpha: f64, f: &GridFunction, extension: usize) -> Result<GridFunction> {
    let grid = f.grid();
    let k = KernelSpec::riesz(grid.dim(), alpha)?;
    let pad = extension * grid.shape().iter().copied().max().unwrap_or(1);
    let outer = grid.padded(pad);
    let dens = f.map(f64::abs).embed_into(&outer)?;
    let conv = RieszConvolver::new(&k, &outer)?;
    GridFunction::new(outer, conv.apply(dens.values()))
}

/// Default enlargement used by [`havin_mazya`] for the intermediate potential.
pub const HAVIN_MAZYA_EXTENSION: usize = 3;

/// `V_{alpha,p} f = I_alpha (I_alpha |f|)^(1/(p-1))` on the enlarged grid.
pub fn havin_mazya_extended(
    alpha: f64,
    p: f64,
    f: &GridFunction,
    extension: usize,
) -> Result<GridFunction> {
    if !(p > 1.0) {
        return Err(Error::param("p", format!("must exceed 1, got {p}")));
    }
    let inner = riesz_on_extended(alpha, f, extension)?;
    let powered = inner.map(|v| v.powf(1.0 / (p - 1.0)));
    let k = KernelSpec::riesz(f.grid().dim(), alpha)?;
    let conv = RieszConvolver::new(&k, powered.grid())?;
    GridFunction::new(powered.grid().clone(), conv.apply(powered.values()))
}

/// Havin–Maz'ya potential restricted to the grid of `f`.
pub fn havin_mazya(alpha: f64, p: f64, f: &GridFunction) -> Result<GridFunction> {
    havin_mazya_extended(alpha, p, f, HAVIN_MAZYA_EXTENSION)?.restrict_to(f.grid())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaResult {
    pub value: f64,
    /// Objective after each accepted Frank–Wolfe step (first entry: best Dirac).
    pub history: Vec<f64>,
    /// Weights of the maximizing probability measure on the candidates.
    pub weights: Vec<f64>,
}

/// Relative objective gain below which Frank–Wolfe stops.
pub const KAPPA_REL_TOL: f64 = 1e-8;

/// Lower bound for the localized constant
/// `kappa(B) = sup { ||G nu||_{L^q(sigma_B)} : nu probability }`, with `nu`
/// ranging over measures on the candidate points. The objective is concave
/// on the simplex for `0 < q < 1`, so Frank–Wolfe ascent with exact line
/// search is used.
pub fn kappa_ball(
    k: &KernelSpec,
    sigma_b: &Measure,
    q: f64,
    candidates: &[Vec<f64>],
    budget: usize,
) -> Result<KappaResult> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::param("q", format!("must lie in (0,1), got {q}")));
    }
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let support: Vec<(Vec<f64>, f64)> = sigma_b
        .point_masses()
        .into_iter()
        .filter(|(_, m)| *m > 0.0)
        .collect();
    let nc = candidates.len();
    if support.is_empty() {
        return Ok(KappaResult {
            value: 0.0,
            history: vec![0.0],
            weights: {
                let mut w = vec![0.0; nc];
                w[0] = 1.0;
                w
            },
        });
    }
    let ns = support.len();
    let mut a = vec![0.0; ns * nc];
    a.par_chunks_mut(nc).enumerate().for_each(|(j, row)| {
        for (c, slot) in row.iter_mut().enumerate() {
            *slot = k.eval_unchecked(&support[j].0, &candidates[c]);
        }
    });
    if a.iter().any(|v| v.is_infinite()) {
        return Ok(KappaResult {
            value: f64::INFINITY,
            history: vec![f64::INFINITY],
            weights: vec![1.0 / nc as f64; nc],
        });
    }
    let masses: Vec<f64> = support.iter().map(|(_, m)| *m).collect();

    let phi = |pot: &dyn Fn(usize) -> f64| -> f64 {
        let mut s = 0.0;
        for j in 0..ns {
            s += masses[j] * pot(j).powf(q);
        }
        s
    };

    let mut best_c = 0;
    let mut best_phi = f64::NEG_INFINITY;
    for c in 0..nc {
        let v = phi(&|j| a[j * nc + c]);
        if v > best_phi {
            best_phi = v;
            best_c = c;
        }
    }
    let mut weights = vec![0.0; nc];
    weights[best_c] = 1.0;
    let mut pot: Vec<f64> = (0..ns).map(|j| a[j * nc + best_c]).collect();
    let mut value = best_phi.powf(1.0 / q);
    let mut history = vec![value];

    for _ in 0..budget {
        // supergradient of phi, up to a positive factor
        let mut grad = vec![0.0; nc];
        for j in 0..ns {
            if pot[j] <= 0.0 {
                continue;
            }
            let w = masses[j] * pot[j].powf(q - 1.0);
            let row = &a[j * nc..(j + 1) * nc];
            for (g, &v) in grad.iter_mut().zip(row) {
                *g += w * v;
            }
        }
        let (s, gs) = grad
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (c, &g)| if g > acc.1 { (c, g) } else { acc },
            );
        let g_nu: f64 = grad.iter().zip(&weights).map(|(g, w)| g * w).sum();
        if gs - g_nu <= 1e-14 * g_nu.abs() {
            break;
        }
        let along = |t: f64| phi(&|j| (1.0 - t) * pot[j] + t * a[j * nc + s]);
        let t = golden_max(along, 0.0, 1.0, 100);
        let new_phi = along(t);
        let new_value = new_phi.powf(1.0 / q);
        if !(new_value > value) {
            break;
        }
        for (c, w) in weights.iter_mut().enumerate() {
            *w *= 1.0 - t;
            if c == s {
                *w += t;
            }
        }
        for j in 0..ns {
            pot[j] = (1.0 - t) * pot[j] + t * a[j * nc + s];
        }
        let gain = (new_value - value) / value;
        value = new_value;
        history.push(value);
        if gain < KAPPA_REL_TOL {
            break;
        }
    }
    Ok(KappaResult {
        value,
        history,
        weights,
    })
}

/// Maximizer of a concave function on `[lo, hi]` by golden-section search,
/// with the endpoints considered as well.
fn golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, iters: usize) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    [lo, hi, mid]
        .into_iter()
        .map(|t| (t, f(t)))
        .fold((mid, f64::NEG_INFINITY), |acc, (t, v)| {
            if v > acc.1 {
                (t, v)
            } else {
                acc
            }
        })
        .0
}

/// Default candidate set for `kappa_ball`: grid points (of the density grid,
/// padded by `shell` cells) that are not support cells but lie within
/// `shell` cells of the support.
pub fn default_candidates(sigma_b: &Measure, shell: usize) -> Vec<Vec<f64>> {
    let Some(d) = sigma_b.density() else {
        return Vec::new();
    };
    let grid = d.grid();
    let outer = grid.padded(shell);
    let mut support = vec![false; outer.len()];
    let mut support_cells = Vec::new();
    for (i, &v) in d.values().iter().enumerate() {
        if v > 0.0 {
            let idx: Vec<usize> = grid.unravel(i).iter().map(|k| k + shell).collect();
            support[outer.ravel(&idx)] = true;
            support_cells.push(idx);
        }
    }
    let n = outer.dim();
    let s = shell as i64;
    let mut near = vec![false; outer.len()];
    let stencil_side = (2 * s + 1) as usize;
    let stencil_len = stencil_side.pow(n as u32);
    for idx in &support_cells {
        for code in 0..stencil_len {
            let mut rem = code;
            let mut ok = true;
            let mut r2 = 0i64;
            let mut target = Vec::with_capacity(n);
            for (d, &c) in idx.iter().enumerate() {
                let off = (rem % stencil_side) as i64 - s;
                rem /= stencil_side;
                r2 += off * off;
                let t = c as i64 + off;
                if t < 0 || t >= outer.shape()[d] as i64 {
                    ok = false;
                    break;
                }
                target.push(t as usize);
            }
            if ok && r2 <= s * s {
                near[outer.ravel(&target)] = true;
            }
        }
    }
    (0..outer.len())
        .filter(|&i| near[i] && !support[i])
        .map(|i| outer.point(i))
        .collect()
}

#[derive(Debug, Clone)]
pub struct IntrinsicOptions {
    pub r_count: usize,
    /// Smallest radius; defaults to half a cell.
    pub r_min: Option<f64>,
    /// Largest radius; defaults to 4x the support diameter, enlarged if needed
    /// so that the ball of radius `r_max` around `x` contains the support.
    pub r_max: Option<f64>,
    pub shell: usize,
    pub budget: usize,
}

impl Default for IntrinsicOptions {
    fn default() -> Self {
        Self {
            r_count: 64,
            r_min: None,
            r_max: None,
            shell: 2,
            budget: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IntrinsicResult {
    pub value: f64,
    /// Closed-form contribution of `r > r_max`.
    pub tail: f64,
    pub radii: Vec<f64>,
    pub kappas: Vec<f64>,
}

/// Intrinsic potential `K sigma(x) = ∫_0^∞ kappa(B(x,r))^(q/(1-q)) r^(alpha-n) dr/r`.
///
/// `kappa(B(x, r))` is a step function of `r` that jumps only where `r`
/// crosses the distance from `x` to a support cell. On each interval of the
/// log-spaced radius grid the integrand is integrated exactly when at most one
/// such jump falls inside, and by the trapezoid rule otherwise.
pub fn intrinsic_potential(
    k: &KernelSpec,
    sigma: &Measure,
    q: f64,
    x: &[f64],
    opts: &IntrinsicOptions,
) -> Result<IntrinsicResult> {
    let alpha = k.riesz_order().ok_or_else(|| {
        Error::InvalidKernel("intrinsic potential needs a Riesz-type kernel".into())
    })?;
    let n = k.dim() as f64;
    if !(alpha < n) {
        return Err(Error::param(
            "alpha",
            "the radial integral diverges for alpha >= n",
        ));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::param("q", format!("must lie in (0,1), got {q}")));
    }
    if sigma.has_atoms() {
        return Err(Error::AtomicSigma(
            "the intrinsic potential is evaluated for density measures".into(),
        ));
    }
    let Some(d) = sigma.density() else {
        return Ok(IntrinsicResult {
            value: 0.0,
            tail: 0.0,
            radii: Vec::new(),
            kappas: Vec::new(),
        });
    };
    if sigma.is_zero() {
        return Ok(IntrinsicResult {
            value: 0.0,
            tail: 0.0,
            radii: Vec::new(),
            kappas: Vec::new(),
        });
    }
    let h = d.grid().spacing();
    let support: Vec<Vec<f64>> = sigma
        .point_masses()
        .into_iter()
        .filter(|(_, m)| *m > 0.0)
        .map(|(p, _)| p)
        .collect();
    let (lo, hi) = sigma
        .bounding_box()
        .expect("nonzero measure has a bounding box");
    let diameter = dist(&lo, &hi).max(h);
    let mut breaks: Vec<f64> = support.iter().map(|p| dist(p, x)).collect();
    breaks.sort_by(f64::total_cmp);
    let farthest = *breaks.last().expect("support is nonempty");
    let r_min = opts.r_min.unwrap_or(0.5 * h);
    let r_max = opts
        .r_max
        .unwrap_or(4.0 * diameter)
        .max(farthest * (1.0 + 1e-9) + 1e-12 * h);
    let count = opts.r_count.max(2);
    let ratio = (r_max / r_min).ln() / (count - 1) as f64;
    let radii: Vec<f64> = (0..count)
        .map(|i| r_min * (ratio * i as f64).exp())
        .collect();
    let expo = q / (1.0 - q);

    let mut cache: Vec<(usize, f64)> = Vec::new();
    let mut kappa_at = |r: f64| -> Result<f64> {
        let inside = breaks.partition_point(|&b| b < r);
        if inside == 0 {
            return Ok(0.0);
        }
        if let Some(&(_, v)) = cache.iter().find(|(c, _)| *c == inside) {
            return Ok(v);
        }
        let sb = sigma.restrict_to_ball(x, r);
        let cands = default_candidates(&sb, opts.shell);
        let v = kappa_ball(k, &sb, q, &cands, opts.budget)?.value;
        cache.push((inside, v));
        Ok(v)
    };

    let kappas: Vec<f64> = radii.iter().map(|&r| kappa_at(r)).collect::<Result<_>>()?;
    let e = alpha - n;
    // ∫_a^b r^(e-1) dr
    let power_integral = |a: f64, b: f64| (b.powf(e) - a.powf(e)) / e;
    let mut value = 0.0;
    for i in 0..count - 1 {
        let (a, b) = (radii[i], radii[i + 1]);
        let lo_idx = breaks.partition_point(|&t| t <= a);
        let hi_idx = breaks.partition_point(|&t| t < b);
        let jumps = hi_idx.saturating_sub(lo_idx);
        let (ka, kb) = (kappas[i].powf(expo), kappas[i + 1].powf(expo));
        value += match jumps {
            0 => kb * power_integral(a, b),
            1 => {
                let t = breaks[lo_idx];
                let before = kappa_at(0.5 * (a + t).max(a))?.powf(expo);
                before * power_integral(a, t) + kb * power_integral(t, b)
            }
            _ => {
                let fa = ka * a.powf(e);
                let fb = kb * b.powf(e);
                0.5 * (fa + fb) * (b / a).ln()
            }
        };
    }
    let tail = kappas[count - 1].powf(expo) * r_max.powf(e) / (n - alpha);
    Ok(IntrinsicResult {
        value: value + tail,
        tail,
        radii,
        kappas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_atom_and_superposition() {
        let k = KernelSpec::riesz_unit(3, 2.0).unwrap();
        let m = Measure::from_atoms(3, vec![(vec![0.0; 3], 1.0)]).unwrap();
        let f = potential_direct(&k, &m, &Targets::Points(vec![vec![0.0, 0.0, 2.0]])).unwrap();
        assert_eq!(f.values, vec![0.5]);
        let m = Measure::from_atoms(
            3,
            vec![(vec![1.0, 0.0, 0.0], 1.0), (vec![-1.0, 0.0, 0.0], 1.0)],
        )
        .unwrap();
        let f = potential_direct(&k, &m, &Targets::Points(vec![vec![0.0; 3]])).unwrap();
        assert_eq!(f.values, vec![2.0]);
        let f = potential_direct(&k, &m, &Targets::Points(vec![vec![1.0, 0.0, 0.0]])).unwrap();
        assert_eq!(f.values[0], f64::INFINITY);
    }

    #[test]
    fn fft_matches_direct_for_one_cell() {
        let k = KernelSpec::riesz(2, 1.0).unwrap();
        let g = BoxGrid::centered(&[0.0, 0.0], 0.1, vec![12, 9]).unwrap();
        let mut vals = vec![0.0; g.len()];
        vals[g.ravel(&[3, 5])] = 2.0;
        let m = Measure::from_density(GridFunction::new(g.clone(), vals).unwrap()).unwrap();
        let fast = potential_grid_fft(&k, &m).unwrap();
        let slow = potential_direct(&k, &m, &Targets::Grid(g)).unwrap();
        for (a, b) in fast.values.iter().zip(&slow.values) {
            assert!((a - b).abs() <= 1e-10 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn fft_of_zero_is_zero() {
        let k = KernelSpec::riesz(2, 1.0).unwrap();
        let g = BoxGrid::centered(&[0.0, 0.0], 0.1, vec![8, 8]).unwrap();
        let m = Measure::from_density(GridFunction::zeros(g)).unwrap();
        assert!(potential_grid_fft(&k, &m)
            .unwrap()
            .values
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn green_operator_vanishes_outside_ball() {
        let k = KernelSpec::green_ball(3, vec![0.0; 3], 1.0).unwrap();
        let g = BoxGrid::centered(&[0.0; 3], 0.25, vec![9, 9, 9]).unwrap();
        let op = GridOperator::new(&k, &g).unwrap();
        let mut dens = vec![0.0; g.len()];
        dens[g.ravel(&[4, 4, 4])] = 1.0;
        let u = op.apply(&dens);
        assert!(u[g.ravel(&[4, 4, 4])] > 0.0);
        assert_eq!(u[g.ravel(&[0, 0, 0])], 0.0);
    }

    #[test]
    fn kappa_one_candidate_closed_form() {
        let k = KernelSpec::riesz(2, 1.0).unwrap();
        let g = BoxGrid::centered(&[0.0, 0.0], 0.5, vec![3, 3]).unwrap();
        let mut vals = vec![0.0; 9];
        vals[4] = 2.0;
        let sb = Measure::from_density(GridFunction::new(g, vals).unwrap()).unwrap();
        let m: f64 = 2.0 * 0.25;
        let y0 = vec![1.5, 0.5];
        let q = 0.5;
        let r = kappa_ball(&k, &sb, q, std::slice::from_ref(&y0), 50).unwrap();
        let expected = m.powf(1.0 / q) * k.eval(&[0.0, 0.0], &y0).unwrap();
        assert!((r.value - expected).abs() < 1e-14 * expected);
        let zero = Measure::zero(2);
        assert_eq!(kappa_ball(&k, &zero, q, &[y0], 50).unwrap().value, 0.0);
        assert!(matches!(
            kappa_ball(&k, &sb, q, &[], 50),
            Err(Error::EmptyCandidates)
        ));
    }

    #[test]
    fn default_candidates_ring() {
        let g = BoxGrid::centered(&[0.0, 0.0], 1.0, vec![5, 5]).unwrap();
        let mut vals = vec![0.0; 25];
        vals[12] = 1.0;
        let sb = Measure::from_density(GridFunction::new(g, vals).unwrap()).unwrap();
        let c = default_candidates(&sb, 1);
        assert_eq!(c.len(), 4);
        for p in &c {
            assert!((dist(p, &[0.0, 0.0]) - 1.0).abs() < 1e-12);
        }
        assert_eq!(default_candidates(&sb, 2).len(), 12);
    }
}
