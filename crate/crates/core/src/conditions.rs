//! Existence conditions and weighted norm inequalities: the energies
//! `∫(Gσ)^{(γ+q)/(1-q)} dσ`, `∫(Gω)^γ dω`, the two-weight interaction
//! estimate, exponent formulas and randomized audits of the weighted norm
//! inequalities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::kernels::KernelSpec;
use crate::lorentz::{lorentz_norm, LorentzPair};
use crate::measure::Measure;
use crate::potentials::{potential_at, potential_on_grid, GridOperator};
use crate::problem::ProblemSpec;

/// Seed used by the randomized audits unless one is given.
pub const DEFAULT_SEED: u64 = 0x5eed_2024;

/// `(mass, G source)` at every point mass of `target` (atoms first, then
/// density cells in flat order).
pub fn potential_on_support(
    k: &KernelSpec,
    source: &Measure,
    target: &Measure,
) -> Result<Vec<(f64, f64)>> {
    let masses: Vec<(Vec<f64>, f64)> = target
        .point_masses()
        .into_iter()
        .filter(|(_, m)| *m > 0.0)
        .collect();
    if source.is_zero() {
        return Ok(masses.into_iter().map(|(_, m)| (m, 0.0)).collect());
    }
    let shared_grid = target.density().filter(|td| {
        k.is_riesz()
            && source
                .density()
                .is_none_or(|sd| sd.grid().same_lattice(td.grid()))
    });
    if let Some(td) = shared_grid {
        let op = GridOperator::new(k, td.grid())?;
        let on_grid = potential_on_grid(k, source, td.grid(), Some(&op))?;
        let mut out = Vec::with_capacity(masses.len());
        for a in target.atoms() {
            if a.mass > 0.0 {
                out.push((a.mass, potential_at(k, source, &a.location)));
            }
        }
        let vol = td.grid().cell_volume();
        for (i, &w) in td.values().iter().enumerate() {
            if w > 0.0 {
                out.push((w * vol, on_grid.values()[i]));
            }
        }
        return Ok(out);
    }
    Ok(masses
        .par_iter()
        .map(|(x, m)| (*m, potential_at(k, source, x)))
        .collect())
}

/// `∫ (G source)^e d target`.
pub fn power_integral(k: &KernelSpec, source: &Measure, target: &Measure, e: f64) -> Result<f64> {
    let pairs = potential_on_support(k, source, target)?;
    let mut sum = 0.0;
    for (m, v) in pairs {
        sum += m * v.powf(e);
    }
    Ok(sum)
}

fn reject_atoms(sigma: &Measure) -> Result<()> {
    if sigma.has_atoms() {
        Err(Error::AtomicSigma(
            "condition integrals need a density sigma; atoms give infinite self-energy".into(),
        ))
    } else {
        Ok(())
    }
}

fn check_q(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::param("q", format!("q must lie in (0,1), got {q}")))
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::param(
            "gamma",
            format!("must be positive, got {gamma}"),
        ))
    }
}

/// `∫ (Gσ)^{(γ+q)/(1-q)} dσ`.
pub fn sigma_energy(sigma: &Measure, q: f64, gamma: f64, k: &KernelSpec) -> Result<f64> {
    check_q(q)?;
    check_gamma(gamma)?;
    reject_atoms(sigma)?;
    power_integral(k, sigma, sigma, (gamma + q) / (1.0 - q))
}

/// `∫ (Gω)^γ dω`; with `γ = 1` this is the dual energy.
pub fn omega_energy(omega: &Measure, gamma: f64, k: &KernelSpec) -> Result<f64> {
    check_gamma(gamma)?;
    power_integral(k, omega, omega, gamma)
}

/// `∫ (Gω)^{γ+q} dσ`.
pub fn cross_integral(
    sigma: &Measure,
    omega: &Measure,
    q: f64,
    gamma: f64,
    k: &KernelSpec,
) -> Result<f64> {
    power_integral(k, omega, sigma, gamma + q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoWeight {
    pub lhs: f64,
    pub rhs_product: f64,
    pub ratio: f64,
}

/// Both sides of the interaction estimate
/// `∫(Gω)^{γ+q} dσ ≤ C [∫(Gω)^γ dω]^{(γ+q)/(γ+1)} [∫(Gσ)^{(γ+q)/(1-q)} dσ]^{(1-q)/(γ+1)}`,
/// valid for `-γ < q < 1`.
pub fn two_weight_check(
    sigma: &Measure,
    omega: &Measure,
    q: f64,
    gamma: f64,
    k: &KernelSpec,
) -> Result<TwoWeight> {
    check_gamma(gamma)?;
    if !(q > -gamma && q < 1.0) {
        return Err(Error::param(
            "q",
            format!("must lie in (-gamma, 1), got {q}"),
        ));
    }
    reject_atoms(sigma)?;
    let lhs = cross_integral(sigma, omega, q, gamma, k)?;
    let w = omega_energy(omega, gamma, k)?;
    let s = power_integral(k, sigma, sigma, (gamma + q) / (1.0 - q))?;
    let rhs_product = w.powf((gamma + q) / (gamma + 1.0)) * s.powf((1.0 - q) / (gamma + 1.0));
    let ratio = if lhs == 0.0 {
        0.0
    } else if rhs_product == 0.0 {
        return Err(Error::Degenerate(format!(
            "two-weight right-hand side vanishes while the left-hand side is {lhs:e}"
        )));
    } else {
        lhs / rhs_product
    };
    Ok(TwoWeight {
        lhs,
        rhs_product,
        ratio,
    })
}

fn check_alpha(alpha: f64, n: usize) -> Result<()> {
    if alpha > 0.0 && alpha < n as f64 {
        Ok(())
    } else {
        Err(Error::param(
            "alpha",
            format!("must lie in (0, n) = (0, {n}), got {alpha}"),
        ))
    }
}

/// `r = n(γ+1)/(n-α)`, `ρ = γ+1`.
pub fn solution_exponents(gamma: f64, alpha: f64, n: usize) -> Result<LorentzPair> {
    check_gamma(gamma)?;
    check_alpha(alpha, n)?;
    let nf = n as f64;
    LorentzPair::new(nf * (gamma + 1.0) / (nf - alpha), gamma + 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SufficientExponents {
    /// `(s_i, t_i)` for each `σ_i`.
    pub terms: Vec<LorentzPair>,
    /// `(s̃, t̃)` for `ω`.
    pub omega: LorentzPair,
}

/// `s_i = n(γ+1)/(n(1-q_i)+α(γ+q_i))`, `t_i = (γ+1)/(1-q_i)`,
/// `s̃ = n(γ+1)/(n+αγ)`, `t̃ = γ+1`. With `α = 2` these are the exponents of
/// the Green-function problem.
pub fn sufficient_exponents(
    gamma: f64,
    qs: &[f64],
    alpha: f64,
    n: usize,
) -> Result<SufficientExponents> {
    check_gamma(gamma)?;
    check_alpha(alpha, n)?;
    let nf = n as f64;
    let terms = qs
        .iter()
        .map(|&q| {
            check_q(q)?;
            LorentzPair::new(
                nf * (gamma + 1.0) / (nf * (1.0 - q) + alpha * (gamma + q)),
                (gamma + 1.0) / (1.0 - q),
            )
        })
        .collect::<Result<_>>()?;
    let omega = LorentzPair::new(nf * (gamma + 1.0) / (nf + alpha * gamma), gamma + 1.0)?;
    Ok(SufficientExponents { terms, omega })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub sigma_integrals: Vec<f64>,
    pub omega_integral: f64,
    pub cross_integrals: Vec<f64>,
    pub verdict: bool,
    pub solution_exponents: LorentzPair,
    pub sufficient: SufficientExponents,
    /// `‖σ_i‖_{L^{s_i,t_i}}` of the density part of each `σ_i`.
    pub sigma_lorentz: Vec<f64>,
    /// `‖ω‖_{L^{s̃,t̃}}` of the density part of `ω`, when it has atoms this is
    /// reported for the density alone.
    pub omega_lorentz: f64,
}

/// Every condition integral of the problem plus the exponents and the Lorentz
/// norms of the data in the sufficient exponents.
pub fn evaluate_conditions(p: &ProblemSpec) -> Result<ConditionReport> {
    let k = p.kernel();
    let gamma = p.gamma();
    let alpha = k
        .riesz_order()
        .ok_or_else(|| Error::InvalidKernel("exponents need a Riesz or Green kernel".into()))?;
    let n = k.dim();
    let mut sigma_integrals = Vec::new();
    let mut cross_integrals = Vec::new();
    let mut sigma_lorentz = Vec::new();
    let qs: Vec<f64> = p.terms().iter().map(|t| t.q).collect();
    let sufficient = sufficient_exponents(gamma, &qs, alpha, n)?;
    for (t, pair) in p.terms().iter().zip(&sufficient.terms) {
        sigma_integrals.push(sigma_energy(&t.sigma, t.q, gamma, k)?);
        cross_integrals.push(cross_integral(&t.sigma, p.omega(), t.q, gamma, k)?);
        sigma_lorentz.push(match t.sigma.density() {
            Some(d) => lorentz_norm(d, *pair)?,
            None => 0.0,
        });
    }
    let omega_integral = omega_energy(p.omega(), gamma, k)?;
    let omega_lorentz = match p.omega().density() {
        Some(d) => lorentz_norm(d, sufficient.omega)?,
        None => 0.0,
    };
    let verdict = sigma_integrals
        .iter()
        .chain(&cross_integrals)
        .chain(std::iter::once(&omega_integral))
        .all(|v| v.is_finite());
    Ok(ConditionReport {
        sigma_integrals,
        omega_integral,
        cross_integrals,
        verdict,
        solution_exponents: solution_exponents(gamma, alpha, n)?,
        sufficient,
        sigma_lorentz,
        omega_lorentz,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub max_ratio: f64,
    /// Ratio for the test function `f ≡ 1`.
    pub constant_ratio: f64,
    pub trials: usize,
    pub seed: u64,
}

fn sigma_density(sigma: &Measure) -> Result<Option<&GridFunction>> {
    reject_atoms(sigma)?;
    Ok(sigma.density().filter(|_| !sigma.is_zero()))
}

fn random_on_support(d: &GridFunction, rng: &mut ChaCha8Rng) -> Vec<f64> {
    d.values()
        .iter()
        .map(|&w| if w > 0.0 { rng.gen::<f64>() } else { 0.0 })
        .collect()
}

/// `∫|g|^p w dx` over the cells of a density `w` on the same grid.
fn weighted_power(g: &[f64], w: &GridFunction, p: f64) -> f64 {
    let vol = w.grid().cell_volume();
    let mut s = 0.0;
    for (gv, &wv) in g.iter().zip(w.values()) {
        if wv > 0.0 {
            s += wv * vol * gv.abs().powf(p);
        }
    }
    s
}

fn product_density(f: &[f64], w: &GridFunction) -> Vec<f64> {
    f.iter().zip(w.values()).map(|(a, b)| a * b).collect()
}

/// Max over random `f ≥ 0` of `‖G(f dσ)‖_{L^{γ+q}(dσ)} / ‖f‖_{L^{(γ+q)/q}(dσ)}`.
pub fn weighted_norm_audit(
    sigma: &Measure,
    q: f64,
    gamma: f64,
    k: &KernelSpec,
    trials: usize,
    seed: u64,
) -> Result<AuditReport> {
    check_q(q)?;
    check_gamma(gamma)?;
    let Some(d) = sigma_density(sigma)? else {
        return Ok(AuditReport {
            max_ratio: 0.0,
            constant_ratio: 0.0,
            trials,
            seed,
        });
    };
    let op = GridOperator::new(k, d.grid())?;
    let r = gamma + q;
    let p = r / q;
    let ratio = |f: &[f64]| -> f64 {
        let den = weighted_power(f, d, p).powf(1.0 / p);
        if den == 0.0 {
            return 0.0;
        }
        let g = op.apply(&product_density(f, d));
        weighted_power(&g, d, r).powf(1.0 / r) / den
    };
    let ones = vec![1.0; d.values().len()];
    let constant_ratio = ratio(&ones);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs: Vec<Vec<f64>> = (0..trials)
        .map(|_| random_on_support(d, &mut rng))
        .collect();
    let max_ratio = fs.iter().map(|f| ratio(f)).fold(0.0, f64::max);
    Ok(AuditReport {
        max_ratio,
        constant_ratio,
        trials,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LorentzAuditReport {
    pub s: f64,
    /// `‖Gσ‖_{L^{r/(1-q), ρ/(1-q)}}`.
    pub sigma_potential_norm: f64,
    pub max_ratio: f64,
    pub trials: usize,
    pub seed: u64,
}

/// `s = (r(n-α) - n(1-q))/(nq)`.
pub fn lorentz_audit_exponent(r: f64, q: f64, alpha: f64, n: usize) -> f64 {
    let nf = n as f64;
    (r * (nf - alpha) - nf * (1.0 - q)) / (nf * q)
}

/// Max over random `f ≥ 0` of
/// `‖G(f dσ)‖_{L^{r,ρ}} / (‖Gσ‖_{L^{r/(1-q),ρ/(1-q)}}^{1/s'} ‖f‖_{L^s(dσ)})`,
/// Lorentz norms taken over the grid of `σ`.
pub fn lorentz_weighted_audit(
    sigma: &Measure,
    q: f64,
    pair: LorentzPair,
    k: &KernelSpec,
    trials: usize,
    seed: u64,
) -> Result<LorentzAuditReport> {
    check_q(q)?;
    let alpha = k.riesz_order().ok_or_else(|| {
        Error::InvalidKernel("Lorentz audit needs a Riesz or Green kernel".into())
    })?;
    let n = k.dim();
    let nf = n as f64;
    if !(pair.r > nf / (nf - alpha)) {
        return Err(Error::param(
            "r",
            format!("must exceed n/(n-alpha) = {}", nf / (nf - alpha)),
        ));
    }
    let s = lorentz_audit_exponent(pair.r, q, alpha, n);
    if !(s > 1.0) {
        return Err(Error::param("s", format!("exponent s = {s} must exceed 1")));
    }
    let Some(d) = sigma_density(sigma)? else {
        return Ok(LorentzAuditReport {
            s,
            sigma_potential_norm: 0.0,
            max_ratio: 0.0,
            trials,
            seed,
        });
    };
    let op = GridOperator::new(k, d.grid())?;
    let grid = d.grid().clone();
    let g_sigma = GridFunction::new(grid.clone(), op.apply(d.values()))?;
    let big = LorentzPair::new(pair.r / (1.0 - q), pair.rho / (1.0 - q))?;
    let sigma_potential_norm = lorentz_norm(&g_sigma, big)?;
    let s_conj = s / (s - 1.0);
    let factor = sigma_potential_norm.powf(1.0 / s_conj);
    let ratio = |f: &[f64]| -> Result<f64> {
        let fn_norm = weighted_power(f, d, s).powf(1.0 / s);
        if fn_norm == 0.0 {
            return Ok(0.0);
        }
        let g = GridFunction::new(grid.clone(), op.apply(&product_density(f, d)))?;
        Ok(lorentz_norm(&g, pair)? / (factor * fn_norm))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_ratio: f64 = 0.0;
    for _ in 0..trials {
        let f = random_on_support(d, &mut rng);
        max_ratio = max_ratio.max(ratio(&f)?);
    }
    Ok(LorentzAuditReport {
        s,
        sigma_potential_norm,
        max_ratio,
        trials,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prop36Report {
    /// `∫ (Gω)^β dω`.
    pub lhs: f64,
    /// `‖Gω‖^β_{L^{βs', βt'}}`.
    pub potential_factor: f64,
    /// `‖ω‖_{L^{s,t}}`.
    pub omega_norm: f64,
    pub product: f64,
    pub s: f64,
    pub t: f64,
    pub holds: bool,
}

/// Hölder step `∫(Gω)^β dω ≤ ‖Gω‖^β_{L^{βs',βt'}} ‖ω‖_{L^{s,t}}` with
/// `s = n(β+1)/(n+αβ)`, `t = β+1`, all norms over the grid of `ω`.
pub fn prop36_check(omega: &GridFunction, beta: f64, k: &KernelSpec) -> Result<Prop36Report> {
    if !(beta > 0.0) {
        return Err(Error::param("beta", "must be positive"));
    }
    let alpha = k
        .riesz_order()
        .ok_or_else(|| Error::InvalidKernel("needs a Riesz or Green kernel".into()))?;
    let nf = k.dim() as f64;
    let s = nf * (beta + 1.0) / (nf + alpha * beta);
    let t = beta + 1.0;
    let (s_c, t_c) = (s / (s - 1.0), t / (t - 1.0));
    if omega.values().iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidMeasure(
            "omega density must be nonnegative".into(),
        ));
    }
    let op = GridOperator::new(k, omega.grid())?;
    let g = GridFunction::new(omega.grid().clone(), op.apply(omega.values()))?;
    let lhs = weighted_power(g.values(), omega, beta);
    let potential_factor = lorentz_norm(&g, LorentzPair::new(beta * s_c, beta * t_c)?)?.powf(beta);
    let omega_norm = lorentz_norm(omega, LorentzPair::new(s, t)?)?;
    let product = potential_factor * omega_norm;
    Ok(Prop36Report {
        lhs,
        potential_factor,
        omega_norm,
        product,
        s,
        t,
        holds: lhs <= product * (1.0 + 1e-9),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoxGrid;
    use crate::kernels::unit_ball_volume;

    fn one_cell(mass_density: f64) -> Measure {
        let g = BoxGrid::centered(&[0.0, 0.0], 0.25, vec![5, 5]).unwrap();
        let mut v = vec![0.0; 25];
        v[12] = mass_density;
        Measure::from_density(GridFunction::new(g, v).unwrap()).unwrap()
    }

    #[test]
    fn single_cell_energies() {
        let k = KernelSpec::riesz_unit(2, 1.0).unwrap();
        let sigma = one_cell(3.0);
        let m = 3.0 * 0.0625;
        let rho = (0.0625 / unit_ball_volume(2)).sqrt();
        let expected = m * m * 2.0 / rho;
        // (γ+q)/(1-q) = 1 for q = 1/4, γ = 1/2
        let e = sigma_energy(&sigma, 0.25, 0.5, &k).unwrap();
        assert!((e - expected).abs() < 1e-12 * expected, "{e} vs {expected}");
        let w = omega_energy(&sigma, 1.0, &k).unwrap();
        assert!((w - expected).abs() < 1e-12 * expected);
        assert_eq!(sigma_energy(&Measure::zero(2), 0.5, 1.0, &k).unwrap(), 0.0);
        let atomic = Measure::from_atoms(2, vec![(vec![0.0, 0.0], 1.0)]).unwrap();
        assert!(matches!(
            sigma_energy(&atomic, 0.5, 1.0, &k),
            Err(Error::AtomicSigma(_))
        ));
    }

    #[test]
    fn constant_potential_gives_ratio_one() {
        let k = KernelSpec::riesz(2, 1.0).unwrap();
        let sigma = one_cell(2.0);
        let tw = two_weight_check(&sigma, &sigma, 0.5, 1.0, &k).unwrap();
        assert!((tw.ratio - 1.0).abs() < 1e-9, "{tw:?}");
        let zero = two_weight_check(&sigma, &Measure::zero(2), 0.5, 1.0, &k).unwrap();
        assert_eq!(zero.lhs, 0.0);
        assert_eq!(zero.ratio, 0.0);
    }

    #[test]
    fn exponent_examples() {
        let p = solution_exponents(1.0, 2.0, 3).unwrap();
        assert_eq!((p.r, p.rho), (6.0, 2.0));
        let p = solution_exponents(1.0, 1.0, 2).unwrap();
        assert_eq!((p.r, p.rho), (4.0, 2.0));
        let s = sufficient_exponents(1.0, &[0.5], 2.0, 3).unwrap();
        assert_eq!(s.terms[0].r, 4.0 / 3.0);
        assert_eq!(s.terms[0].rho, 4.0);
        assert_eq!(s.omega.r, 6.0 / 5.0);
        assert_eq!(s.omega.rho, 2.0);
        assert_eq!(lorentz_audit_exponent(6.0, 0.5, 2.0, 3), 3.0);
        assert!(solution_exponents(1.0, 3.0, 3).is_err());
    }

    #[test]
    fn audit_constant_function() {
        let k = KernelSpec::riesz(2, 1.0).unwrap();
        let g = BoxGrid::centered(&[0.0, 0.0], 0.25, vec![8, 8]).unwrap();
        let sigma =
            crate::measure::density_from_fn(&g, |x| if x[0] > 0.0 { 1.0 } else { 0.0 }).unwrap();
        let a = weighted_norm_audit(&sigma, 0.5, 1.0, &k, 10, 1).unwrap();
        let gs = power_integral(&k, &sigma, &sigma, 1.5)
            .unwrap()
            .powf(1.0 / 1.5);
        let expected = gs / sigma.total_mass().powf(0.5 / 1.5);
        assert!((a.constant_ratio - expected).abs() < 1e-10 * expected);
        assert!(a.max_ratio > 0.0);
        let z = weighted_norm_audit(&Measure::zero(2), 0.5, 1.0, &k, 10, 1).unwrap();
        assert_eq!(z.max_ratio, 0.0);
    }

    #[test]
    fn holder_bound_zero_and_single_cell() {
        let k = KernelSpec::riesz(2, 1.0).unwrap();
        let g = BoxGrid::centered(&[0.0, 0.0], 0.25, vec![5, 5]).unwrap();
        let r = prop36_check(&GridFunction::zeros(g), 1.0, &k).unwrap();
        assert_eq!((r.lhs, r.product), (0.0, 0.0));
        let om = one_cell(4.0);
        let r = prop36_check(om.density().unwrap(), 1.0, &k).unwrap();
        assert!(r.holds && r.lhs > 0.0, "{r:?}");
    }
}
