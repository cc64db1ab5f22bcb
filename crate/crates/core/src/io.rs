//! On-disk formats.
//!
//! A grid function is a TOML header `name.toml` (dim, origin, spacing, shape,
//! value_count, data) next to a raw little-endian `f64` array `name.f64` in
//! row-major order. Measures are TOML with `atoms = [[x1, .., xn, mass], ..]`
//! and an optional `density` header path, relative to the measure file.
//! Matrix kernels are TOML with `points`, `entries` and optional `wmp_h`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BoxGrid, GridFunction};
use crate::kernels::KernelSpec;
use crate::measure::Measure;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Writes to a temporary file in the target directory, then renames.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| format_err(path, "not a file path"))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{}.tmp{}", name, std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
        f.write_all(bytes).map_err(|e| io_err(&tmp, e))?;
        f.sync_all().map_err(|e| io_err(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub dim: usize,
    pub origin: Vec<f64>,
    pub spacing: f64,
    pub shape: Vec<usize>,
    pub value_count: usize,
    /// Raw data file, relative to the header.
    pub data: String,
}

/// Writes `base.toml` and `base.f64`; returns the header path.
pub fn save_grid_function(f: &GridFunction, base: &Path) -> Result<PathBuf> {
    let header_path = base.with_extension("toml");
    let data_path = base.with_extension("f64");
    let g = f.grid();
    let header = GridHeader {
        dim: g.dim(),
        origin: g.origin().to_vec(),
        spacing: g.spacing(),
        shape: g.shape().to_vec(),
        value_count: g.len(),
        data: data_path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let mut raw = Vec::with_capacity(8 * g.len());
    for v in f.values() {
        raw.extend_from_slice(&v.to_le_bytes());
    }
    atomic_write(&data_path, &raw)?;
    let text = toml::to_string(&header).map_err(|e| format_err(&header_path, e.to_string()))?;
    atomic_write(&header_path, text.as_bytes())?;
    Ok(header_path)
}

pub fn load_grid_function(header_path: &Path) -> Result<GridFunction> {
    let text = fs::read_to_string(header_path).map_err(|e| io_err(header_path, e))?;
    let h: GridHeader =
        toml::from_str(&text).map_err(|e| format_err(header_path, e.to_string()))?;
    if h.origin.len() != h.dim || h.shape.len() != h.dim {
        return Err(format_err(
            header_path,
            "origin and shape must have `dim` entries",
        ));
    }
    let grid = BoxGrid::new(h.origin, h.spacing, h.shape)?;
    if grid.len() != h.value_count {
        return Err(format_err(header_path, "value_count does not match shape"));
    }
    let data_path = header_path.parent().unwrap_or(Path::new(".")).join(&h.data);
    let raw = fs::read(&data_path).map_err(|e| io_err(&data_path, e))?;
    if raw.len() != 8 * h.value_count {
        return Err(format_err(
            &data_path,
            format!("expected {} bytes, found {}", 8 * h.value_count, raw.len()),
        ));
    }
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    GridFunction::new(grid, values)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MeasureFile {
    pub dim: usize,
    #[serde(default)]
    pub atoms: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<String>,
}

pub fn parse_measure(text: &str, path: &Path) -> Result<Measure> {
    let mf: MeasureFile = toml::from_str(text).map_err(|e| format_err(path, e.to_string()))?;
    let mut atoms = Vec::with_capacity(mf.atoms.len());
    for (i, row) in mf.atoms.iter().enumerate() {
        if row.len() != mf.dim + 1 {
            return Err(format_err(
                path,
                format!("atoms[{i}] needs {} coordinates and a mass", mf.dim),
            ));
        }
        atoms.push((row[..mf.dim].to_vec(), row[mf.dim]));
    }
    let density = match &mf.density {
        Some(rel) => Some(load_grid_function(
            &path.parent().unwrap_or(Path::new(".")).join(rel),
        )?),
        None => None,
    };
    let base = Measure::from_atoms(mf.dim, atoms)?;
    match density {
        Some(d) => Measure::new(mf.dim, base.atoms().to_vec(), Some(d)),
        None => Ok(base),
    }
}

pub fn load_measure(path: &Path) -> Result<Measure> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_measure(&text, path)
}

/// Writes `path` and, for a density, a grid dump next to it.
pub fn save_measure(m: &Measure, path: &Path) -> Result<()> {
    let density = match m.density() {
        Some(d) => {
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "measure".into());
            let base = path.with_file_name(format!("{stem}_density"));
            let header = save_grid_function(d, &base)?;
            header.file_name().map(|s| s.to_string_lossy().into_owned())
        }
        None => None,
    };
    let mf = MeasureFile {
        dim: m.dim(),
        atoms: m
            .atoms()
            .iter()
            .map(|a| {
                let mut row = a.location.clone();
                row.push(a.mass);
                row
            })
            .collect(),
        density,
    };
    let text = toml::to_string(&mf).map_err(|e| format_err(path, e.to_string()))?;
    atomic_write(path, text.as_bytes())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixFile {
    pub points: Vec<Vec<f64>>,
    pub entries: Vec<Vec<f64>>,
    #[serde(default)]
    pub wmp_h: Option<f64>,
}

pub fn load_matrix_kernel(path: &Path) -> Result<KernelSpec> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mf: MatrixFile = toml::from_str(&text).map_err(|e| format_err(path, e.to_string()))?;
    KernelSpec::matrix(mf.points, mf.entries, mf.wmp_h.unwrap_or(1.0))
}
