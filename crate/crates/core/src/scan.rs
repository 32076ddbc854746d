//! Parameter sweeps: parallel evaluation, peak refinement, CSV and metadata output.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ConfigErrors, PeakRefinement, PeakStrategy, Quantity, ScanConfig, SweepAxis};
use crate::green::RateClass;
use crate::kernel::Polarization;
use crate::modes;
use crate::numerics::golden_max;
use crate::rates::{self, RateBreakdown};

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigErrors),
    #[error("cannot evaluate the base stack: {0}")]
    Setup(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Grid,
    Refined,
}

impl Origin {
    pub fn label(self) -> &'static str {
        match self {
            Origin::Grid => "grid",
            Origin::Refined => "refined",
        }
    }
}

/// One evaluated sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanRow {
    pub value: f64,
    pub d3_prime: f64,
    pub z0_prime: f64,
    pub omega: f64,
    pub result: Result<RateBreakdown, String>,
    pub origin: Origin,
}

impl ScanRow {
    pub fn quantity(&self, q: Quantity) -> Option<f64> {
        self.result.as_ref().ok().map(|r| q.extract(r))
    }

    pub fn is_ok(&self) -> bool {
        matches!(&self.result, Ok(r) if r.converged)
    }
}

/// Outcome of one peak search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakRecord {
    pub quantity: String,
    pub minimize: bool,
    pub strategy: PeakStrategy,
    pub axis_value: f64,
    pub value: f64,
    /// Double-root thickness the search started from.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_d3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_pol: Option<Polarization>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub config: ScanConfig,
    pub rows: Vec<ScanRow>,
    pub peaks: Vec<PeakRecord>,
}

impl ScanResult {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.is_ok()).count()
    }

    /// Largest value of `q` over all rows.
    pub fn max_of(&self, q: Quantity) -> Option<(f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.quantity(q).map(|v| (r.value, v)))
            .filter(|(_, v)| v.is_finite())
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn min_of(&self, q: Quantity) -> Option<(f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.quantity(q).map(|v| (r.value, v)))
            .filter(|(_, v)| v.is_finite())
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Rates at one sweep value.
pub fn evaluate_point(cfg: &ScanConfig, value: f64, origin: Origin) -> ScanRow {
    let (stack, omega) = cfg.point(value);
    let result = rates::evaluate(&stack, omega, &cfg.green).map_err(|e| e.to_string());
    ScanRow {
        value,
        d3_prime: stack.d3_prime,
        z0_prime: stack.z0_prime(),
        omega,
        result,
        origin,
    }
}

fn objective(row: &ScanRow, r: &PeakRefinement) -> f64 {
    match row.quantity(r.quantity) {
        Some(v) if v.is_finite() => {
            if r.minimize {
                -v
            } else {
                v
            }
        }
        _ => f64::NEG_INFINITY,
    }
}

fn golden_refine(cfg: &ScanConfig, r: &PeakRefinement, a: f64, b: f64, tol: f64) -> ScanRow {
    let (x, _) = golden_max(
        |v| objective(&evaluate_point(cfg, v, Origin::Refined), r),
        a,
        b,
        tol,
        200,
    );
    evaluate_point(cfg, x, Origin::Refined)
}

fn refine_grid_extremum(
    cfg: &ScanConfig,
    r: &PeakRefinement,
    grid: &[ScanRow],
) -> Option<(ScanRow, PeakRecord)> {
    let (i, _) = grid
        .iter()
        .enumerate()
        .map(|(i, row)| (i, objective(row, r)))
        .filter(|(_, v)| v.is_finite())
        .max_by(|a, b| a.1.total_cmp(&b.1))?;
    let a = grid[i.saturating_sub(1)].value;
    let b = grid[(i + 1).min(grid.len() - 1)].value;
    let row = golden_refine(cfg, r, a, b, 1e-13 * b.abs().max(1e-300));
    let best = if objective(&row, r) >= objective(&grid[i], r) {
        row
    } else {
        ScanRow {
            origin: Origin::Refined,
            ..grid[i].clone()
        }
    };
    let record = PeakRecord {
        quantity: r.quantity.name(),
        minimize: r.minimize,
        strategy: r.strategy,
        axis_value: best.value,
        value: best.quantity(r.quantity).unwrap_or(f64::NAN),
        critical_d3: None,
        critical_pol: None,
    };
    Some((best, record))
}

fn refine_critical(
    cfg: &ScanConfig,
    r: &PeakRefinement,
) -> Result<Vec<(ScanRow, PeakRecord)>, ScanError> {
    let (stack, omega) = cfg.point(cfg.sweep.lo);
    let optics = stack
        .optics(omega)
        .map_err(|e| ScanError::Setup(e.to_string()))?;
    let scale = optics.core.eps.im.abs().max(optics.core.mu.im.abs());
    if !(scale > 0.0) {
        // lossless peaks are singular; there is nothing finite to refine
        return Ok(Vec::new());
    }
    let mut points: Vec<(f64, Polarization)> = Vec::new();
    for pol in Polarization::BOTH {
        let found = modes::critical_thicknesses(&optics, pol, cfg.sweep.lo, cfg.sweep.hi)
            .map_err(|e| ScanError::Setup(e.to_string()))?;
        for c in found {
            if !points.iter().any(|(d, _)| (d - c.d3).abs() < 1e-9 * c.d3) {
                points.push((c.d3, pol));
            }
        }
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = r.samples.max(3);
    let out = points
        .par_iter()
        .map(|&(dc, pol)| {
            let step = 2.0 * r.window * scale / (n - 1) as f64;
            let samples: Vec<ScanRow> = (0..n)
                .into_par_iter()
                .map(|i| dc - r.window * scale + step * i as f64)
                .filter(|&d| d > cfg.sweep.lo && d < cfg.sweep.hi)
                .map(|d| evaluate_point(cfg, d, Origin::Refined))
                .collect();
            let best = samples
                .iter()
                .max_by(|a, b| objective(a, r).total_cmp(&objective(b, r)))
                .filter(|row| objective(row, r).is_finite())?;
            let a = (best.value - step).max(cfg.sweep.lo);
            let b = (best.value + step).min(cfg.sweep.hi);
            let row = golden_refine(cfg, r, a, b, 1e-4 * scale);
            let row = if objective(&row, r) >= objective(best, r) {
                row
            } else {
                best.clone()
            };
            let record = PeakRecord {
                quantity: r.quantity.name(),
                minimize: r.minimize,
                strategy: r.strategy,
                axis_value: row.value,
                value: row.quantity(r.quantity).unwrap_or(f64::NAN),
                critical_d3: Some(dc),
                critical_pol: Some(pol),
            };
            Some((row, record))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Ok(out)
}

fn run_in_pool(cfg: &ScanConfig) -> Result<ScanResult, ScanError> {
    let values = cfg.sweep.values();
    let grid: Vec<ScanRow> = values
        .par_iter()
        .map(|&v| evaluate_point(cfg, v, Origin::Grid))
        .collect();
    let mut extra = Vec::new();
    let mut peaks = Vec::new();
    for r in &cfg.refine {
        let found = match r.strategy {
            PeakStrategy::GridExtremum => refine_grid_extremum(cfg, r, &grid).into_iter().collect(),
            PeakStrategy::CriticalThickness => refine_critical(cfg, r)?,
        };
        for (row, record) in found {
            extra.push(row);
            peaks.push(record);
        }
    }
    let mut rows = grid;
    for row in extra {
        if !rows.iter().any(|x| x.value == row.value) {
            rows.push(row);
        }
    }
    rows.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(ScanResult {
        config: cfg.clone(),
        rows,
        peaks,
    })
}

/// Evaluates every sweep point on a pool of `cfg.jobs` workers.
///
/// Rows come back in ascending axis order, including refined peak points;
/// failed points are kept with their error message.
pub fn run_scan(cfg: &ScanConfig) -> Result<ScanResult, ScanError> {
    let raw = serde_json::to_value(cfg)?;
    crate::config::validate_config(&raw)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()?;
    pool.install(|| run_in_pool(cfg))
}

/// Runs the sweep once per absorption variant (or once if there are none).
pub fn run_variants(cfg: &ScanConfig) -> Result<Vec<(Option<f64>, ScanResult)>, ScanError> {
    if cfg.absorption_variants.is_empty() {
        return Ok(vec![(None, run_scan(cfg)?)]);
    }
    cfg.absorption_variants
        .iter()
        .map(|&g| Ok((Some(g), run_scan(&cfg.with_absorption(g))?)))
        .collect()
}

pub fn header(cfg: &ScanConfig) -> Vec<String> {
    let mut h: Vec<String> = ["d3_prime", "z0_prime", "omega"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if cfg.sweep.axis == SweepAxis::GammaAbsorption {
        h.push("gamma_absorption".into());
    }
    h.extend(cfg.columns().iter().map(|q| q.name()));
    for s in [
        "background_x",
        "background_z",
        "error_estimate",
        "converged",
        "methods",
        "status",
        "origin",
    ] {
        h.push(s.into());
    }
    h
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn methods_label(r: &RateBreakdown) -> String {
    RateClass::ALL
        .iter()
        .map(|&c| format!("{}={}", c.label(), r.method(c).label()))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn write_csv<W: Write>(result: &ScanResult, out: W) -> Result<(), ScanError> {
    let cfg = &result.config;
    let cols = cfg.columns();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(cfg))?;
    for row in &result.rows {
        let mut rec = vec![num(row.d3_prime), num(row.z0_prime), num(row.omega)];
        if cfg.sweep.axis == SweepAxis::GammaAbsorption {
            rec.push(num(row.value));
        }
        match &row.result {
            Ok(r) => {
                rec.extend(cols.iter().map(|q| num(q.extract(r))));
                rec.push(num(r.background.x()));
                rec.push(num(r.background.z()));
                rec.push(num(r.error_estimate));
                rec.push(r.converged.to_string());
                rec.push(methods_label(r));
                rec.push(if r.converged {
                    "ok".into()
                } else {
                    "not_converged".into()
                });
            }
            Err(e) => {
                rec.extend(cols.iter().map(|_| "nan".to_string()));
                rec.extend([
                    "nan".into(),
                    "nan".into(),
                    "inf".into(),
                    "false".into(),
                    String::new(),
                ]);
                rec.push(format!("error: {e}"));
            }
        }
        rec.push(row.origin.label().into());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Hex SHA-256 of the canonical JSON form of `cfg`.
pub fn config_hash(cfg: &ScanConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("config serializes");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Provenance record written next to each CSV.
pub fn metadata(result: &ScanResult, absorption: Option<f64>) -> serde_json::Value {
    let cfg = &result.config;
    let mut methods: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    let mut max_err: f64 = 0.0;
    let mut converged = true;
    for row in &result.rows {
        match &row.result {
            Ok(r) => {
                for c in RateClass::ALL {
                    *methods
                        .entry(c.label())
                        .or_default()
                        .entry(r.method(c).label())
                        .or_default() += 1;
                }
                max_err = max_err.max(r.error_estimate);
                converged &= r.converged;
            }
            Err(_) => converged = false,
        }
    }
    json!({
        "name": cfg.name,
        "config": cfg,
        "config_sha256": config_hash(cfg),
        "version": env!("CARGO_PKG_VERSION"),
        "absorption": absorption,
        "columns": header(cfg),
        "rows": result.rows.len(),
        "grid_points": result.rows.iter().filter(|r| r.origin == Origin::Grid).count(),
        "refined_points": result.rows.iter().filter(|r| r.origin == Origin::Refined).count(),
        "failures": result.failures(),
        "tolerances": {
            "requested": cfg.green,
            "max_error_estimate": max_err,
            "all_converged": converged,
        },
        "methods": methods,
        "peaks": result.peaks,
    })
}

/// CSV path of one absorption variant.
pub fn variant_path(base: &Path, absorption: Option<f64>) -> PathBuf {
    match absorption {
        None => base.to_path_buf(),
        Some(g) => {
            let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("scan");
            let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
            base.with_file_name(format!("{stem}_gamma_{g:e}.{ext}"))
        }
    }
}

/// Writes `path` (CSV) and `path` with a `.json` extension (metadata).
pub fn write_outputs(
    result: &ScanResult,
    absorption: Option<f64>,
    path: &Path,
) -> Result<(), ScanError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_csv(result, fs::File::create(path)?)?;
    let meta = serde_json::to_string_pretty(&metadata(result, absorption))?;
    fs::write(path.with_extension("json"), meta + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Spacing, Sweep};
    use crate::green::GreenOptions;
    use crate::materials::{AtomPosition, LayerStack, MaterialModel};

    fn vacuum_cfg(points: usize, jobs: usize) -> ScanConfig {
        ScanConfig {
            name: "vacuum".into(),
            notes: Vec::new(),
            stack: LayerStack {
                lower: MaterialModel::vacuum(),
                upper: MaterialModel::vacuum(),
                core: MaterialModel::vacuum(),
                d3_prime: 1.0,
                atom: AtomPosition::Fraction(0.5),
            },
            omega: 1.0,
            sweep: Sweep {
                axis: SweepAxis::D3Prime,
                lo: 0.5,
                hi: 3.0,
                points,
                spacing: Spacing::Linear,
            },
            outputs: Vec::new(),
            output: None,
            jobs,
            green: GreenOptions::default(),
            refine: Vec::new(),
            absorption_variants: Vec::new(),
            scale_lengths_with_omega: false,
        }
    }

    #[test]
    fn vacuum_sweep_is_flat() {
        let r = run_scan(&vacuum_cfg(4, 2)).unwrap();
        assert_eq!(r.rows.len(), 4);
        for row in &r.rows {
            let b = row.result.as_ref().unwrap();
            assert!((b.gamma_n - 1.0).abs() < 1e-9 && b.kappa.abs() < 1e-9);
        }
        assert_eq!(r.failures(), 0);
    }

    #[test]
    fn csv_is_independent_of_jobs() {
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_csv(&run_scan(&vacuum_cfg(5, 1)).unwrap(), &mut a).unwrap();
        write_csv(&run_scan(&vacuum_cfg(5, 3)).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("d3_prime,z0_prime,omega,Gr,Gsub,Gg,Gs,Gx,Gz,Gtot,kappa,"));
    }

    #[test]
    fn failed_points_are_kept() {
        let mut cfg = vacuum_cfg(3, 1);
        cfg.stack.core =
            MaterialModel::DrudeLorentz(crate::materials::DrudeLorentz::symmetric(1.0, 1.0, 0.0));
        cfg.omega = 1.2;
        let r = run_scan(&cfg).unwrap();
        assert_eq!(r.rows.len(), 3);
        assert_eq!(r.failures(), 3);
        let mut out = Vec::new();
        write_csv(&r, &mut out).unwrap();
        assert!(String::from_utf8(out)
            .unwrap()
            .contains("error: layer ordering violated"));
    }

    #[test]
    fn hash_tracks_config() {
        let a = vacuum_cfg(3, 1);
        let mut b = a.clone();
        assert_eq!(config_hash(&a), config_hash(&b));
        b.sweep.points = 4;
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn variant_paths() {
        let p = variant_path(Path::new("out/fig4.csv"), Some(1e-8));
        assert_eq!(p, Path::new("out/fig4_gamma_1e-8.csv"));
        assert_eq!(variant_path(Path::new("a.csv"), None), Path::new("a.csv"));
    }
}
