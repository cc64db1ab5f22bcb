use std::fmt::Display;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sublinpot::conditions::{evaluate_conditions, two_weight_check, ConditionReport, TwoWeight};
use sublinpot::energy::{
    energy_identity_check, hidden_convexity_check, ConvexityReport, EnergyReport, SeminormKind,
};
use sublinpot::estimates::{
    bilateral_bracket, iterated_check, pointwise_lower_bound_check, probes_outside_collar,
    BracketReport,
};
use sublinpot::io::{atomic_write, load_grid_function, save_grid_function};
use sublinpot::kernels::{check_quasi_symmetry, check_wmp_empirical};
use sublinpot::potentials::IntrinsicOptions;
use sublinpot::solver::{norm_bound_check, solve_minimal_with, Discretization, SolveReport};
use sublinpot::{fixtures, Error, GridFunction, ProblemSpec};

use crate::config::{write_problem, Run};
use crate::{CliError, SweepParam};

/// Largest relative violation accepted for the proven inequalities.
const INEQUALITY_TOL: f64 = 1e-9;
/// Largest relative gap accepted for the energy identity.
const ENERGY_TOL: f64 = 0.05;
/// Grid enlargement (box widths) for the potential of `μ` in the energy identity.
const ENERGY_EXTENSION: usize = 8;
const MAX_PROBES: usize = 256;
const BRACKET_PROBES: usize = 12;
const ITERATED_EXPONENTS: [f64; 4] = [0.5, 1.0, 2.0, 3.0];

fn core(context: &str) -> impl Fn(Error) -> CliError + '_ {
    move |e| match e {
        Error::Degenerate(m) => CliError::Violated(format!("{context}: {m}")),
        Error::InvalidParameter { name, reason } => CliError::Config(format!("{name}: {reason}")),
        other => CliError::Config(format!("{context}: {other}")),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    text.push('\n');
    atomic_write(path, text.as_bytes()).map_err(core("output"))
}

fn float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn thin<T: Clone>(items: Vec<T>, max: usize) -> Vec<T> {
    if items.len() <= max {
        return items;
    }
    let step = items.len().div_ceil(max);
    items.into_iter().step_by(step).collect()
}

#[derive(Serialize)]
struct ConditionsOutput {
    report: Option<ConditionReport>,
    unavailable: Option<String>,
    /// One entry per term; absent when either side vanishes.
    two_weight: Vec<Option<TwoWeight>>,
}

fn conditions(p: &ProblemSpec) -> Result<ConditionsOutput, CliError> {
    let (report, unavailable) = match evaluate_conditions(p) {
        Ok(r) => (Some(r), None),
        Err(Error::InvalidKernel(m)) => (None, Some(m)),
        Err(e) => return Err(core("conditions")(e)),
    };
    let mut two_weight = Vec::new();
    for t in p.terms() {
        two_weight.push(if t.sigma.is_zero() || p.omega().is_zero() {
            None
        } else {
            match two_weight_check(&t.sigma, p.omega(), t.q, p.gamma(), p.kernel()) {
                Ok(r) => Some(r),
                Err(Error::Degenerate(_)) => None,
                Err(e) => return Err(core("two-weight")(e)),
            }
        });
    }
    Ok(ConditionsOutput {
        report,
        unavailable,
        two_weight,
    })
}

fn solve_run(run: &Run, p: &ProblemSpec) -> Result<(GridFunction, SolveReport), CliError> {
    let disc = Discretization::new(p).map_err(core("kernel"))?;
    solve_minimal_with(&disc, run.config.tol, run.config.max_iter).map_err(core("solve"))
}

pub fn solve(path: &Path) -> Result<(), CliError> {
    let run = Run::load(path)?;
    let p = run.problem()?;
    let out = run.out_dir();
    let (u, rep) = solve_run(&run, &p)?;
    save_grid_function(&u, &out.join("solution")).map_err(core("out_dir"))?;
    write_json(&out.join("solve_report.json"), &rep)?;
    write_json(&out.join("conditions.json"), &conditions(&p)?)?;
    let mut csv = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Config(format!("residuals.csv: {e}"));
    csv.write_record(["iteration", "sup_step"]).map_err(io)?;
    for (i, r) in rep.residual_history.iter().enumerate() {
        csv.write_record([(i + 1).to_string(), float(*r)])
            .map_err(io)?;
    }
    let bytes = csv
        .into_inner()
        .map_err(|e| CliError::Config(format!("residuals.csv: {e}")))?;
    atomic_write(&out.join("residuals.csv"), &bytes).map_err(core("out_dir"))?;
    println!(
        "iterations {}  residual {:e}  kappa {:e}  converged {}",
        rep.iterate_count, rep.final_residual_fp, rep.kappa, rep.converged
    );
    println!("wrote {}", out.display());
    if rep.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged(format!(
            "max_iter: no convergence after {} iterations (last step {:e}, tol {:e})",
            rep.iterate_count,
            rep.residual_history.last().copied().unwrap_or(f64::NAN),
            run.config.tol
        )))
    }
}

pub fn check(path: &Path) -> Result<(), CliError> {
    let run = Run::load(path)?;
    let p = run.problem()?;
    let c = conditions(&p)?;
    write_json(&run.out_dir().join("conditions.json"), &c)?;
    let Some(r) = &c.report else {
        return Err(CliError::Config(format!(
            "kernel.variant: {}",
            c.unavailable.unwrap_or_default()
        )));
    };
    println!(
        "solution exponents r = {}  rho = {}",
        r.solution_exponents.r, r.solution_exponents.rho
    );
    for (i, (s, x)) in r.sigma_integrals.iter().zip(&r.cross_integrals).enumerate() {
        let pair = r.sufficient.terms[i];
        println!(
            "term {}: sigma integral {:e}  cross integral {:e}  |sigma| in L^({}, {}) = {:e}",
            i + 1,
            s,
            x,
            pair.r,
            pair.rho,
            r.sigma_lorentz[i]
        );
        if let Some(tw) = &c.two_weight[i] {
            println!("        two-weight ratio {:e}", tw.ratio);
        }
    }
    println!(
        "omega integral {:e}  |omega| in L^({}, {}) = {:e}",
        r.omega_integral, r.sufficient.omega.r, r.sufficient.omega.rho, r.omega_lorentz
    );
    if r.verdict {
        println!("all condition integrals finite");
        Ok(())
    } else {
        Err(CliError::Violated(
            "conditions: at least one condition integral is infinite".into(),
        ))
    }
}

#[derive(Debug, Serialize)]
struct Row {
    check: String,
    value: f64,
    threshold: f64,
    pass: bool,
}

impl Row {
    fn at_most(check: impl Display, value: f64, threshold: f64) -> Self {
        Row {
            check: check.to_string(),
            value,
            threshold,
            pass: value <= threshold,
        }
    }
}

#[derive(Serialize, Default)]
struct VerifyOutput {
    rows: Vec<Row>,
    bracket: Option<BracketReport>,
    energy: Option<EnergyReport>,
    convexity: Option<ConvexityReport>,
}

fn load_solution(run: &Run, p: &ProblemSpec) -> Result<GridFunction, CliError> {
    let out = run.out_dir();
    let header = out.join("solution.toml");
    if !header.exists() {
        return Err(CliError::Config(format!(
            "out_dir: no solution artifact found in {} (run `sublinpot solve` first)",
            out.display()
        )));
    }
    let u = load_grid_function(&header).map_err(core("out_dir"))?;
    if !u.grid().same_lattice(p.grid()) {
        return Err(CliError::Config(
            "grid: the stored solution lives on a different grid".into(),
        ));
    }
    Ok(u)
}

fn verify_estimates(
    p: &ProblemSpec,
    disc: &Discretization,
    u: &GridFunction,
    out: &mut VerifyOutput,
) -> Result<(), CliError> {
    let lb = pointwise_lower_bound_check(disc, u).map_err(core("estimates"))?;
    for (i, v) in lb.max_violation.iter().enumerate() {
        out.rows.push(Row::at_most(
            format!("lower bound, term {}", i + 1),
            *v,
            INEQUALITY_TOL,
        ));
    }
    let nb = norm_bound_check(disc, u).map_err(core("estimates"))?;
    let worst = nb.norms.iter().copied().fold(0.0, f64::max);
    out.rows.push(Row::at_most(
        "a priori norm bound (norm / bound)",
        worst / nb.bound,
        1.0,
    ));
    for (i, t) in p.terms().iter().enumerate() {
        if t.sigma.is_zero() {
            continue;
        }
        let inside: Vec<Vec<f64>> = probes_outside_collar(p.grid(), &t.sigma, 2)
            .into_iter()
            .filter(|x| p.kernel().in_domain(x))
            .collect();
        let probes = thin(inside, MAX_PROBES);
        for a in ITERATED_EXPONENTS {
            let r = iterated_check(&t.sigma, a, p.kernel(), &probes).map_err(core("estimates"))?;
            out.rows.push(Row::at_most(
                format!("iterated inequality a = {a}, term {}", i + 1),
                r.max_violation,
                INEQUALITY_TOL,
            ));
        }
    }
    if p.terms().len() == 1 && p.kernel().is_riesz() && !p.terms()[0].sigma.is_zero() {
        let t = &p.terms()[0];
        let probes = thin(probes_outside_collar(p.grid(), &t.sigma, 2), BRACKET_PROBES);
        let opts = IntrinsicOptions {
            r_count: 16,
            budget: 20,
            shell: 1,
            ..Default::default()
        };
        out.bracket = Some(
            bilateral_bracket(u, &t.sigma, p.omega(), t.q, p.kernel(), &probes, &opts)
                .map_err(core("estimates"))?,
        );
    }
    Ok(())
}

fn verify_energy(
    p: &ProblemSpec,
    disc: &Discretization,
    u: &GridFunction,
    out: &mut VerifyOutput,
) -> Result<(), CliError> {
    let alpha = p.kernel().riesz_order().ok_or_else(|| {
        CliError::Config("kernel.variant: the energy identity needs a Riesz or Green kernel".into())
    })?;
    let e = energy_identity_check(p, u, ENERGY_EXTENSION).map_err(core("energy"))?;
    out.rows.push(Row::at_most(
        "energy identity relative gap",
        e.relative_gap,
        ENERGY_TOL,
    ));
    out.energy = Some(e);
    let v = disc.g_omega();
    let c = hidden_convexity_check(u, &v, 0.5, alpha, SeminormKind::Fourier { pad: true })
        .map_err(core("energy"))?;
    let scale = c.rhs.abs().max(f64::MIN_POSITIVE);
    out.rows.push(Row::at_most(
        "hidden convexity (u, G omega, t = 1/2)",
        -c.slack / scale,
        INEQUALITY_TOL,
    ));
    out.convexity = Some(c);
    Ok(())
}

fn verify_kernel(p: &ProblemSpec, out: &mut VerifyOutput) -> Result<(), CliError> {
    let k = p.kernel();
    let pts: Vec<Vec<f64>> = p
        .grid()
        .points()
        .into_iter()
        .filter(|x| k.in_domain(x))
        .collect();
    let len = pts.len();
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..len.min(200))
        .map(|i| {
            (
                pts[i * len / len.min(200)].clone(),
                pts[(i * 7919 + 13) % len].clone(),
            )
        })
        .filter(|(x, y)| x != y)
        .collect();
    if !pairs.is_empty() {
        let a = check_quasi_symmetry(k, &pairs).map_err(core("kernel"))?;
        out.rows.push(Row::at_most(
            "quasi-symmetry ratio",
            a,
            k.quasi_sym_a() * (1.0 + 1e-12),
        ));
    }
    let probes = thin(pts, 4 * MAX_PROBES);
    for (i, t) in p.terms().iter().enumerate() {
        if t.sigma.is_zero() {
            continue;
        }
        let w = check_wmp_empirical(k, &t.sigma, &probes).map_err(core("kernel"))?;
        out.rows.push(Row::at_most(
            format!(
                "maximum principle, term {} (sup probes / sup support)",
                i + 1
            ),
            w.sup_on_probes / w.sup_on_support,
            w.h * (1.0 + 1e-9),
        ));
    }
    Ok(())
}

/// With `implicit` (no check selected), the energy checks are skipped for
/// runs they do not apply to instead of failing.
pub fn verify(
    path: &Path,
    estimates: bool,
    energy: bool,
    kernel_axioms: bool,
    implicit: bool,
) -> Result<(), CliError> {
    let run = Run::load(path)?;
    let energy =
        energy && !(implicit && (run.config.gamma != 1.0 || run.config.kernel.variant == "matrix"));
    if energy && run.config.gamma != 1.0 {
        return Err(CliError::Config(
            "gamma: energy identity requires gamma = 1".into(),
        ));
    }
    let p = run.problem()?;
    let u = load_solution(&run, &p)?;
    let disc = Discretization::new(&p).map_err(core("kernel"))?;
    let mut out = VerifyOutput::default();
    if estimates {
        verify_estimates(&p, &disc, &u, &mut out)?;
    }
    if energy {
        verify_energy(&p, &disc, &u, &mut out)?;
    }
    if kernel_axioms {
        verify_kernel(&p, &mut out)?;
    }
    write_json(&run.out_dir().join("verify.json"), &out)?;
    for r in &out.rows {
        println!(
            "{} {}: {:e} (limit {:e})",
            if r.pass { "PASS" } else { "FAIL" },
            r.check,
            r.value,
            r.threshold
        );
    }
    if let Some(b) = &out.bracket {
        println!("bracket constants c_low {:e}  c_up {:e}", b.c_low, b.c_up);
    }
    let failed: Vec<&str> = out
        .rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.check.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Violated(format!(
            "verify: failed checks: {}",
            failed.join("; ")
        )))
    }
}

pub fn sweep(path: &Path, param: SweepParam, values: &[f64]) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(CliError::Config(
            "--values: at least one value is required".into(),
        ));
    }
    let base = Run::load(path)?;
    if param == SweepParam::Alpha && base.config.kernel.variant != "riesz" {
        return Err(CliError::Config(
            "--param alpha: needs the riesz kernel variant".into(),
        ));
    }
    let m = base.config.terms.len();
    let name = match param {
        SweepParam::Gamma => "gamma",
        SweepParam::Q => "q",
        SweepParam::Alpha => "alpha",
    };
    let mut header: Vec<String> = vec!["param".into(), "value".into(), "r".into(), "rho".into()];
    header.extend((1..=m).map(|i| format!("sigma_integral_{i}")));
    header.extend((1..=m).map(|i| format!("cross_integral_{i}")));
    header.extend(
        [
            "omega_integral",
            "verdict",
            "converged",
            "iterations",
            "final_residual",
            "solution_lorentz_norm",
        ]
        .map(String::from),
    );
    let mut csv = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Config(format!("sweep csv: {e}"));
    csv.write_record(&header).map_err(io)?;
    for &v in values {
        let mut run = base.clone();
        match param {
            SweepParam::Gamma => run.config.gamma = v,
            SweepParam::Q => run.config.terms.iter_mut().for_each(|t| t.q = v),
            SweepParam::Alpha => run.config.kernel.alpha = Some(v),
        }
        let p = run.problem()?;
        let c = evaluate_conditions(&p).map_err(core(name))?;
        let (_, rep) = solve_run(&run, &p)?;
        let mut row = vec![
            name.to_string(),
            float(v),
            float(c.solution_exponents.r),
            float(c.solution_exponents.rho),
        ];
        row.extend(c.sigma_integrals.iter().map(|x| float(*x)));
        row.extend(c.cross_integrals.iter().map(|x| float(*x)));
        row.push(float(c.omega_integral));
        row.push(c.verdict.to_string());
        row.push(rep.converged.to_string());
        row.push(rep.iterate_count.to_string());
        row.push(float(rep.final_residual_fp));
        row.push(rep.lorentz_norm.map(float).unwrap_or_default());
        csv.write_record(&row).map_err(io)?;
    }
    let bytes = csv
        .into_inner()
        .map_err(|e| CliError::Config(format!("sweep csv: {e}")))?;
    let target: PathBuf = base.out_dir().join(format!("sweep_{name}.csv"));
    atomic_write(&target, &bytes).map_err(core("out_dir"))?;
    print!("{}", String::from_utf8_lossy(&bytes));
    Ok(())
}

pub fn make_fixture(name: &str, out: &Path) -> Result<(), CliError> {
    let p = fixtures::by_name(name)
        .ok_or_else(|| {
            CliError::Config(format!(
                "name: unknown fixture `{name}` ({})",
                fixtures::NAMES.join(", ")
            ))
        })?
        .map_err(core("fixture"))?;
    let tol = match name {
        "scalar" => 1e-15,
        "one-term" => 1e-10,
        "green-ball" => 1e-8,
        _ => 1e-9,
    };
    let path = write_problem(&p, out, tol, 200)?;
    println!("wrote {}", path.display());
    Ok(())
}
