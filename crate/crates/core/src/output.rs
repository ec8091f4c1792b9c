//! CSV, JSON and manifest writers. Column orders are fixed; see `docs/formats.md`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::equilibrium::EquilibriumSnapshot;
use crate::error::{Error, Result};
use crate::functionals::FunctionalRow;
use crate::harness::{ConvergenceTable, ErrorMeasure, SweepParameter};
use crate::solver::{Grid, Profile, RelaxationField};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "RELAX_OUTPUT_ROOT";

/// `explicit`, else `$RELAX_OUTPUT_ROOT`, else `./relax-output`.
pub fn output_root(explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from("relax-output"),
    }
}

/// Shortest round-trip representation; exponent form outside `[1e-4, 1e15)`, `nan` for NaN.
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if x.is_nan() {
        "nan".into()
    } else if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".into(), fmt_num)
}

fn component_headers(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |k| format!("{prefix}_{k}"))
}

fn write_rows(path: &Path, header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn field_rows(grid: &Grid<f64>, u: &Profile<f64>, v: &Profile<f64>, r: &Profile<f64>) -> (Vec<String>, Vec<Vec<String>>) {
    let n = u.comps;
    let header = std::iter::once("x".to_string())
        .chain(component_headers("u", n))
        .chain(component_headers("v", n))
        .chain(component_headers("R", n))
        .collect();
    let rows = (0..u.cells())
        .map(|i| {
            std::iter::once(grid.x(i as isize))
                .chain(u.cell(i).iter().copied())
                .chain(v.cell(i).iter().copied())
                .chain(r.cell(i).iter().copied())
                .map(fmt_num)
                .collect()
        })
        .collect();
    (header, rows)
}

/// Columns `x, u_1..u_n, v_1..v_n, R_1..R_n`.
pub fn write_snapshot_csv(path: &Path, grid: &Grid<f64>, f: &RelaxationField<f64>) -> Result<()> {
    let (header, rows) = field_rows(grid, &f.u, &f.v, &f.global_term);
    write_rows(path, header, rows.into_iter())
}

/// Same columns as a relaxation snapshot, with `v = F(ubar) - R(ubar)`.
pub fn write_equilibrium_csv(
    path: &Path,
    grid: &Grid<f64>,
    snap: &EquilibriumSnapshot<f64>,
    v: &Profile<f64>,
    r: &Profile<f64>,
) -> Result<()> {
    let (header, rows) = field_rows(grid, &snap.u, v, r);
    write_rows(path, header, rows.into_iter())
}

pub const FUNCTIONAL_COLUMNS: [&str; 23] = [
    "time",
    "phi",
    "psi",
    "lyapunov_G",
    "int_R",
    "int_R_rel",
    "energy_residual_L1",
    "relative_residual_L1",
    "I1",
    "I2",
    "I3",
    "I4",
    "I5",
    "I6",
    "a1",
    "a2",
    "b1",
    "b2",
    "c1",
    "c2",
    "d1",
    "d2",
    "d3",
];

/// One row per time; missing values are written as `nan`.
pub fn write_functional_csv(path: &Path, rows: &[FunctionalRow<f64>]) -> Result<()> {
    let header = FUNCTIONAL_COLUMNS.iter().map(|s| s.to_string()).collect();
    let body = rows.iter().map(|r| {
        let d = &r.dissipation;
        let terms = r.error_terms.as_ref();
        let t = |f: fn(&crate::functionals::ErrorTerms<f64>) -> f64| fmt_opt(terms.map(f));
        vec![
            fmt_num(r.time),
            fmt_num(r.phi),
            fmt_opt(r.psi),
            fmt_opt(r.lyapunov),
            fmt_opt(r.potential),
            fmt_opt(r.relative_potential),
            fmt_opt(r.energy_residual),
            fmt_opt(r.relative_residual),
            fmt_num(d.i1_proxy),
            fmt_num(d.i2_proxy),
            fmt_num(d.i3),
            fmt_num(d.i4),
            fmt_num(d.i5),
            fmt_opt(d.i6),
            t(|e| e.a1),
            t(|e| e.a2),
            t(|e| e.b1),
            t(|e| e.b2),
            t(|e| e.c1),
            t(|e| e.c2),
            t(|e| e.d1),
            t(|e| e.d2),
            t(|e| e.d3),
        ]
    });
    write_rows(path, header, body)
}

fn column_names(table: &ConvergenceTable) -> (&'static str, &'static str) {
    let p = match table.parameter {
        SweepParameter::Eps => "eps",
        SweepParameter::Dx => "dx",
    };
    let m = match table.measure {
        ErrorMeasure::SupTPsi => "sup_t_psi",
        ErrorMeasure::FinalL2VsExact => "final_l2_vs_exact",
        ErrorMeasure::ResidualL1 => "residual_l1",
    };
    (p, m)
}

/// `table.csv`: parameter and error, parameter descending.
pub fn write_table_csv(path: &Path, table: &ConvergenceTable) -> Result<()> {
    let (p, m) = column_names(table);
    write_rows(path, vec![p.into(), m.into()], table.rows.iter().map(|&(x, e)| vec![fmt_num(x), fmt_num(e)]))
}

/// Whitespace-separated two-column file with a `#` header line.
pub fn write_plot_file(path: &Path, table: &ConvergenceTable) -> Result<()> {
    let (p, m) = column_names(table);
    let mut text = format!("# {p} {m}\n");
    for &(x, e) in &table.rows {
        text.push_str(&format!("{} {}\n", fmt_num(x), fmt_num(e)));
    }
    fs::write(path, text)?;
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn unix_seconds() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Everything needed to reproduce an output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub code_version: String,
    pub seed: u32,
    /// Unix seconds.
    pub started_at: f64,
    pub finished_at: f64,
    /// File names relative to the manifest, sorted.
    pub files: Vec<String>,
    /// Canonical configuration the hash was computed from.
    pub config: serde_json::Value,
    /// Subcommand options not contained in the config.
    #[serde(default)]
    pub options: serde_json::Value,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Records files written into one output directory and finishes with `manifest.json`.
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<String>,
    started_at: f64,
}

impl OutputDir {
    pub fn create(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, files: Vec::new(), started_at: unix_seconds() })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    /// Path for `name`, recorded in the manifest.
    pub fn file(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    pub fn finish(
        mut self,
        command: &str,
        config: &RunConfig,
        options: serde_json::Value,
    ) -> Result<RunManifest> {
        self.files.sort();
        self.files.dedup();
        let manifest = RunManifest {
            command: command.into(),
            config_hash: config.hash()?,
            code_version: env!("CARGO_PKG_VERSION").into(),
            seed: config.seed,
            started_at: self.started_at,
            finished_at: unix_seconds(),
            files: self.files,
            config: serde_json::from_str(&config.canonical_json()?)?,
            options,
        };
        write_json(&self.dir.join(MANIFEST_FILE), &manifest)?;
        Ok(manifest)
    }
}

/// Reads a manifest and checks that the stored hash matches its config and every file exists.
pub fn verify_manifest(dir: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let manifest: RunManifest = serde_json::from_str(&text)?;
    let config = RunConfig::from_json(&manifest.config.to_string())?;
    let hash = config.hash()?;
    if hash != manifest.config_hash {
        return Err(Error::InvalidParameter(format!("manifest hash {} does not match config hash {hash}", manifest.config_hash)));
    }
    if let Some(missing) = manifest.files.iter().find(|f| !dir.join(f).exists()) {
        return Err(Error::InvalidParameter(format!("manifest lists missing file {missing}")));
    }
    Ok(manifest)
}

/// Digest of the listed files' contents, for golden comparisons that ignore wall times.
pub fn content_digest(dir: &Path, files: &[String]) -> Result<String> {
    let mut h = Sha256::new();
    for f in files {
        h.update(f.as_bytes());
        h.update(fs::read(dir.join(f))?);
    }
    Ok(format!("{:x}", h.finalize()))
}
