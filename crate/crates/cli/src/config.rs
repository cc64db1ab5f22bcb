//! TOML run configuration. Paths are relative to the config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sublinpot::io::{load_matrix_kernel, load_measure, save_measure, MatrixFile};
use sublinpot::{
    BoxGrid, Error, KernelSpec, KernelVariant, Measure, Normalization, ProblemSpec, Term,
};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    /// `riesz`, `green-ball`, `green-half-space` or `matrix`.
    pub variant: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    /// Matrix kernel file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wmp_h: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub sigma: String,
    pub q: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub origin: Vec<f64>,
    pub spacing: f64,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub out_dir: String,
    /// Absent means `ω = 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<String>,
    pub kernel: KernelConfig,
    pub grid: GridConfig,
    pub terms: Vec<TermConfig>,
}

/// A parsed config together with the directory its paths are relative to.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: Config,
    pub base: PathBuf,
}

fn field(name: impl Into<String>, e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}: {e}", name.into()))
}

impl Run {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| field(path.display().to_string(), e))?;
        let config: Config = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok(Self { config, base })
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.base.join(rel)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.config.out_dir)
    }

    pub fn kernel(&self) -> Result<KernelSpec, CliError> {
        let kc = &self.config.kernel;
        let k =
            match kc.variant.as_str() {
                "riesz" => {
                    let alpha = kc
                        .alpha
                        .ok_or_else(|| field("kernel.alpha", "required for the riesz variant"))?;
                    KernelSpec::riesz_with(kc.n, alpha, kc.normalization.unwrap_or_default())
                        .map_err(|e| field("kernel", e))?
                }
                "green-ball" => {
                    check_green_alpha(kc)?;
                    let radius = kc
                        .radius
                        .ok_or_else(|| field("kernel.radius", "required for green-ball"))?;
                    let center = kc
                        .center
                        .clone()
                        .ok_or_else(|| field("kernel.center", "required for green-ball"))?;
                    KernelSpec::green_ball(kc.n, center, radius).map_err(|e| field("kernel", e))?
                }
                "green-half-space" => {
                    check_green_alpha(kc)?;
                    KernelSpec::green_half_space(kc.n).map_err(|e| field("kernel", e))?
                }
                "matrix" => {
                    let file = kc
                        .matrix
                        .as_ref()
                        .ok_or_else(|| field("kernel.matrix", "required for the matrix variant"))?;
                    let k = load_matrix_kernel(&self.resolve(file))
                        .map_err(|e| field("kernel.matrix", e))?;
                    if k.dim() != kc.n {
                        return Err(field(
                            "kernel.n",
                            format!("matrix points have dimension {}", k.dim()),
                        ));
                    }
                    k
                }
                other => return Err(field(
                    "kernel.variant",
                    format!(
                        "unknown variant `{other}` (riesz, green-ball, green-half-space, matrix)"
                    ),
                )),
            };
        match kc.wmp_h {
            Some(h) => k.with_wmp_h(h).map_err(|e| field("kernel.wmp_h", e)),
            None => Ok(k),
        }
    }

    pub fn grid(&self) -> Result<BoxGrid, CliError> {
        let g = &self.config.grid;
        BoxGrid::new(g.origin.clone(), g.spacing, g.shape.clone()).map_err(|e| field("grid", e))
    }

    pub fn problem(&self) -> Result<ProblemSpec, CliError> {
        let c = &self.config;
        if !(c.gamma > 0.0 && c.gamma.is_finite()) {
            return Err(field("gamma", format!("must be positive, got {}", c.gamma)));
        }
        if !(c.tol > 0.0) {
            return Err(field("tol", format!("must be positive, got {}", c.tol)));
        }
        if c.max_iter == 0 {
            return Err(field("max_iter", "must be at least 1"));
        }
        if c.terms.is_empty() {
            return Err(field("terms", "at least one term is required"));
        }
        let kernel = self.kernel()?;
        let grid = self.grid()?;
        let mut terms = Vec::with_capacity(c.terms.len());
        for (i, t) in c.terms.iter().enumerate() {
            if !(t.q > 0.0 && t.q < 1.0) {
                return Err(field(
                    format!("terms[{i}].q"),
                    format!("q must lie in (0,1), got {}", t.q),
                ));
            }
            let sigma = load_measure(&self.resolve(&t.sigma))
                .map_err(|e| field(format!("terms[{i}].sigma"), e))?;
            if sigma.has_atoms() {
                return Err(field(
                    format!("terms[{i}].sigma"),
                    "atoms rejected: sigma_i must be a density on the solution grid",
                ));
            }
            terms.push(Term { sigma, q: t.q });
        }
        let omega = match &c.omega {
            Some(f) => load_measure(&self.resolve(f)).map_err(|e| field("omega", e))?,
            None => Measure::zero(kernel.dim()),
        };
        ProblemSpec::new(kernel, terms, omega, c.gamma, grid).map_err(|e| match e {
            Error::Degenerate(m) => CliError::Violated(format!("data: {m}")),
            Error::InvalidGrid(m) => field("grid", m),
            Error::AtomicSigma(m) => field("terms.sigma", m),
            Error::InvalidMeasure(m) => field("terms.sigma / omega", m),
            Error::OutsideDomain { point } => field(
                "terms.sigma / omega",
                format!("mass at {point:?} lies outside the kernel domain"),
            ),
            other => field("problem", other),
        })
    }
}

fn check_green_alpha(kc: &KernelConfig) -> Result<(), CliError> {
    match kc.alpha {
        None => Ok(()),
        Some(2.0) => Ok(()),
        Some(a) => Err(field(
            "kernel.alpha",
            format!("Green kernels have order 2, got {a}"),
        )),
    }
}

fn kernel_config(k: &KernelSpec, dir: &Path) -> Result<KernelConfig, CliError> {
    let mut kc = KernelConfig {
        variant: String::new(),
        n: k.dim(),
        alpha: None,
        normalization: None,
        radius: None,
        center: None,
        matrix: None,
        wmp_h: None,
    };
    match k.variant() {
        KernelVariant::Riesz {
            alpha,
            normalization,
            ..
        } => {
            kc.variant = "riesz".into();
            kc.alpha = Some(*alpha);
            kc.normalization = Some(*normalization);
        }
        KernelVariant::GreenBall { radius, center, .. } => {
            kc.variant = "green-ball".into();
            kc.radius = Some(*radius);
            kc.center = Some(center.clone());
        }
        KernelVariant::GreenHalfSpace { .. } => kc.variant = "green-half-space".into(),
        KernelVariant::Matrix { points, entries } => {
            kc.variant = "matrix".into();
            let mf = MatrixFile {
                points: points.clone(),
                entries: entries.clone(),
                wmp_h: Some(k.wmp_h()),
            };
            let text = toml::to_string(&mf).map_err(|e| field("kernel.matrix", e))?;
            sublinpot::io::atomic_write(&dir.join("kernel.toml"), text.as_bytes())
                .map_err(|e| field("kernel.matrix", e))?;
            kc.matrix = Some("kernel.toml".into());
        }
    }
    Ok(kc)
}

/// Writes `config.toml` and the measure files for `p` into `dir`.
pub fn write_problem(
    p: &ProblemSpec,
    dir: &Path,
    tol: f64,
    max_iter: usize,
) -> Result<PathBuf, CliError> {
    let io = |e: Error| CliError::Config(format!("{}: {e}", dir.display()));
    let mut terms = Vec::new();
    for (i, t) in p.terms().iter().enumerate() {
        let name = format!("sigma_{}.toml", i + 1);
        save_measure(&t.sigma, &dir.join(&name)).map_err(io)?;
        terms.push(TermConfig {
            sigma: name,
            q: t.q,
        });
    }
    let omega = if p.omega().is_zero() {
        None
    } else {
        save_measure(p.omega(), &dir.join("omega.toml")).map_err(io)?;
        Some("omega.toml".to_string())
    };
    let g = p.grid();
    let config = Config {
        gamma: p.gamma(),
        tol,
        max_iter,
        out_dir: "out".into(),
        omega,
        kernel: kernel_config(p.kernel(), dir)?,
        grid: GridConfig {
            origin: g.origin().to_vec(),
            spacing: g.spacing(),
            shape: g.shape().to_vec(),
        },
        terms,
    };
    let path = dir.join("config.toml");
    let text = toml::to_string(&config).map_err(|e| field("config", e))?;
    sublinpot::io::atomic_write(&path, text.as_bytes()).map_err(io)?;
    Ok(path)
}
