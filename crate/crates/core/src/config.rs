//! Sweep configuration: JSON layout, column identifiers and validation.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::green::{GreenOptions, RateClass};
use crate::materials::{AtomPosition, LayerStack, MaterialModel};
use crate::rates::RateBreakdown;

/// Component of a class entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Entry {
    XP,
    XS,
    ZP,
}

impl Entry {
    pub const ALL: [Entry; 3] = [Entry::XP, Entry::XS, Entry::ZP];

    pub fn label(self) -> &'static str {
        match self {
            Entry::XP => "x_p",
            Entry::XS => "x_s",
            Entry::ZP => "z_p",
        }
    }
}

/// A scalar derived from a [`RateBreakdown`]; doubles as a CSV column name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Quantity {
    Radiation,
    Substrate,
    Guided,
    Surface,
    GammaX,
    GammaZ,
    Total,
    Kappa,
    Class(RateClass, Entry),
}

impl Quantity {
    pub const SUMMARY: [Quantity; 8] = [
        Quantity::Radiation,
        Quantity::Substrate,
        Quantity::Guided,
        Quantity::Surface,
        Quantity::GammaX,
        Quantity::GammaZ,
        Quantity::Total,
        Quantity::Kappa,
    ];

    /// Summary columns followed by every class entry.
    pub fn all() -> Vec<Quantity> {
        let mut v = Quantity::SUMMARY.to_vec();
        for class in RateClass::ALL {
            for e in Entry::ALL {
                v.push(Quantity::Class(class, e));
            }
        }
        v
    }

    pub fn name(self) -> String {
        match self {
            Quantity::Radiation => "Gr".into(),
            Quantity::Substrate => "Gsub".into(),
            Quantity::Guided => "Gg".into(),
            Quantity::Surface => "Gs".into(),
            Quantity::GammaX => "Gx".into(),
            Quantity::GammaZ => "Gz".into(),
            Quantity::Total => "Gtot".into(),
            Quantity::Kappa => "kappa".into(),
            Quantity::Class(c, e) => format!("{}_{}", c.label(), e.label()),
        }
    }

    pub fn extract(self, r: &RateBreakdown) -> f64 {
        match self {
            Quantity::Radiation => r.class(RateClass::Radiation).total(),
            Quantity::Substrate => r.class(RateClass::Substrate).total(),
            Quantity::Guided => r.class(RateClass::Guided).total(),
            Quantity::Surface => r.surface().total(),
            Quantity::GammaX => r.gamma_x,
            Quantity::GammaZ => r.gamma_z,
            Quantity::Total => r.gamma_n,
            Quantity::Kappa => r.kappa,
            Quantity::Class(c, e) => {
                let v = r.class(c);
                match e {
                    Entry::XP => v.x_p,
                    Entry::XS => v.x_s,
                    Entry::ZP => v.z_p,
                }
            }
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Quantity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Quantity::all()
            .into_iter()
            .find(|q| q.name() == s)
            .ok_or_else(|| format!("unknown quantity '{s}'"))
    }
}

impl TryFrom<String> for Quantity {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Quantity> for String {
    fn from(q: Quantity) -> String {
        q.name()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    D3Prime,
    Z0Prime,
    Omega,
    GammaAbsorption,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::D3Prime => "d3_prime",
            SweepAxis::Z0Prime => "z0_prime",
            SweepAxis::Omega => "omega",
            SweepAxis::GammaAbsorption => "gamma_absorption",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl Sweep {
    /// Ascending grid values.
    pub fn values(&self) -> Vec<f64> {
        let n = self.points.max(2);
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                if i == 0 {
                    return self.lo;
                }
                if i == n - 1 {
                    return self.hi;
                }
                match self.spacing {
                    Spacing::Linear => self.lo + (self.hi - self.lo) * t,
                    Spacing::Log => (self.lo.ln() + (self.hi.ln() - self.lo.ln()) * t).exp(),
                }
            })
            .collect()
    }
}

/// Where refined peak points are searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakStrategy {
    /// Golden-section search between the neighbours of the best grid point.
    #[default]
    GridExtremum,
    /// Local scan and golden search around every double-root thickness of
    /// the guided dispersion relation (thickness sweeps only).
    CriticalThickness,
}

fn default_window() -> f64 {
    20.0
}

fn default_samples() -> usize {
    81
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeakRefinement {
    pub quantity: Quantity,
    #[serde(default)]
    pub strategy: PeakStrategy,
    /// Search for a minimum instead of a maximum.
    #[serde(default)]
    pub minimize: bool,
    /// Half-width of the local scan in units of the core loss `max(Im eps, Im mu)`.
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_jobs() -> usize {
    1
}

/// A parameter sweep over one axis of a stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    #[serde(default)]
    pub name: String,
    /// Free-form remarks carried into the run metadata.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub stack: LayerStack,
    /// Transition frequency in units of the scaling frequency.
    pub omega: f64,
    pub sweep: Sweep,
    /// Requested columns; empty means all.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outputs: Vec<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default)]
    pub green: GreenOptions,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub refine: Vec<PeakRefinement>,
    /// Run the whole sweep once per core damping value.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub absorption_variants: Vec<f64>,
    /// In frequency sweeps keep the physical geometry fixed: `d3_prime` and an
    /// absolute `z0_prime` refer to `omega` and scale with the swept frequency.
    #[serde(default)]
    pub scale_lengths_with_omega: bool,
}

impl ScanConfig {
    pub fn columns(&self) -> Vec<Quantity> {
        if self.outputs.is_empty() {
            Quantity::all()
        } else {
            self.outputs.clone()
        }
    }

    /// Stack and frequency at one sweep value.
    pub fn point(&self, value: f64) -> (LayerStack, f64) {
        let mut stack = self.stack;
        let mut omega = self.omega;
        match self.sweep.axis {
            SweepAxis::D3Prime => stack.d3_prime = value,
            SweepAxis::Z0Prime => stack.atom = AtomPosition::Absolute(value),
            SweepAxis::Omega => {
                omega = value;
                if self.scale_lengths_with_omega {
                    let s = value / self.omega;
                    stack.d3_prime *= s;
                    if let AtomPosition::Absolute(z) = stack.atom {
                        stack.atom = AtomPosition::Absolute(z * s);
                    }
                }
            }
            SweepAxis::GammaAbsorption => stack.core = stack.core.with_absorption(value),
        }
        (stack, omega)
    }

    /// Copy with the core damping replaced.
    pub fn with_absorption(&self, gamma: f64) -> ScanConfig {
        let mut c = self.clone();
        c.stack.core = c.stack.core.with_absorption(gamma);
        c.absorption_variants.clear();
        c
    }

    pub fn from_json(text: &str) -> Result<ScanConfig, ConfigErrors> {
        let raw: Value = serde_json::from_str(text)
            .map_err(|e| ConfigErrors(vec![ConfigError::new("", e.to_string())]))?;
        validate_config(&raw)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

/// Every problem found in one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.0.iter().map(|e| e.to_string()).collect();
        f.write_str(&lines.join("; "))
    }
}

impl std::error::Error for ConfigErrors {}

const TOP_LEVEL: [&str; 12] = [
    "name",
    "notes",
    "stack",
    "omega",
    "sweep",
    "outputs",
    "output",
    "jobs",
    "green",
    "refine",
    "absorption_variants",
    "scale_lengths_with_omega",
];
const REQUIRED: [&str; 3] = ["stack", "omega", "sweep"];
const STACK_FIELDS: [&str; 5] = ["lower", "upper", "core", "d3_prime", "atom"];

fn part<T: DeserializeOwned>(
    obj: &serde_json::Map<String, Value>,
    key: &str,
    path: &str,
    errs: &mut Vec<ConfigError>,
) -> Option<T> {
    let v = obj.get(key)?;
    match serde_json::from_value(v.clone()) {
        Ok(t) => Some(t),
        Err(e) => {
            errs.push(ConfigError::new(path, e.to_string()));
            None
        }
    }
}

/// Parses a raw JSON document, reporting all schema and invariant violations together.
pub fn validate_config(raw: &Value) -> Result<ScanConfig, ConfigErrors> {
    let mut errs = Vec::new();
    let Some(obj) = raw.as_object() else {
        return Err(ConfigErrors(vec![ConfigError::new(
            "",
            "configuration must be a JSON object",
        )]));
    };
    for key in obj.keys() {
        if !TOP_LEVEL.contains(&key.as_str()) {
            errs.push(ConfigError::new(key.clone(), "unknown field"));
        }
    }
    for key in REQUIRED {
        if !obj.contains_key(key) {
            errs.push(ConfigError::new(key, "missing field"));
        }
    }
    let mut stack_ok = true;
    if let Some(stack) = obj.get("stack") {
        match stack.as_object() {
            Some(s) => {
                for key in STACK_FIELDS {
                    if !s.contains_key(key) {
                        errs.push(ConfigError::new(format!("stack.{key}"), "missing field"));
                        stack_ok = false;
                    }
                }
                for key in s.keys() {
                    if !STACK_FIELDS.contains(&key.as_str()) {
                        errs.push(ConfigError::new(format!("stack.{key}"), "unknown field"));
                        stack_ok = false;
                    }
                }
                for key in ["lower", "upper", "core"] {
                    let m: Option<MaterialModel> = part(s, key, &format!("stack.{key}"), &mut errs);
                    match m {
                        Some(m) => {
                            if let Err(e) = m.validate() {
                                errs.push(ConfigError::new(format!("stack.{key}"), e.to_string()));
                            }
                        }
                        None => stack_ok = false,
                    }
                }
                stack_ok &= part::<f64>(s, "d3_prime", "stack.d3_prime", &mut errs).is_some();
                stack_ok &= part::<AtomPosition>(s, "atom", "stack.atom", &mut errs).is_some();
            }
            None => {
                errs.push(ConfigError::new("stack", "must be an object"));
                stack_ok = false;
            }
        }
    }
    let omega: Option<f64> = part(obj, "omega", "omega", &mut errs);
    let sweep: Option<Sweep> = part(obj, "sweep", "sweep", &mut errs);
    let _: Option<Vec<Quantity>> = part(obj, "outputs", "outputs", &mut errs);
    let _: Option<GreenOptions> = part(obj, "green", "green", &mut errs);
    let _: Option<Vec<PeakRefinement>> = part(obj, "refine", "refine", &mut errs);
    let _: Option<usize> = part(obj, "jobs", "jobs", &mut errs);
    let _: Option<Vec<f64>> = part(obj, "absorption_variants", "absorption_variants", &mut errs);
    let _: Option<bool> = part(
        obj,
        "scale_lengths_with_omega",
        "scale_lengths_with_omega",
        &mut errs,
    );
    let _: Option<Vec<String>> = part(obj, "notes", "notes", &mut errs);
    let _: Option<String> = part(obj, "name", "name", &mut errs);
    let _: Option<PathBuf> = part(obj, "output", "output", &mut errs);

    if let Some(w) = omega {
        if !(w > 0.0 && w.is_finite()) {
            errs.push(ConfigError::new("omega", format!("must be > 0, got {w}")));
        }
    }
    if let Some(s) = sweep {
        check_sweep(&s, &mut errs);
    }
    if !errs.is_empty() || !stack_ok {
        return Err(ConfigErrors(errs));
    }
    let cfg: ScanConfig = match serde_json::from_value(raw.clone()) {
        Ok(c) => c,
        Err(e) => return Err(ConfigErrors(vec![ConfigError::new("", e.to_string())])),
    };
    check_invariants(&cfg, &mut errs);
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigErrors(errs))
    }
}

fn check_sweep(s: &Sweep, errs: &mut Vec<ConfigError>) {
    if !(s.lo.is_finite() && s.hi.is_finite() && s.lo < s.hi) {
        errs.push(ConfigError::new(
            "sweep",
            format!("need lo < hi, got [{}, {}]", s.lo, s.hi),
        ));
    }
    if s.points < 2 {
        errs.push(ConfigError::new(
            "sweep.points",
            format!("need at least 2 points, got {}", s.points),
        ));
    }
    if s.spacing == Spacing::Log && !(s.lo > 0.0) {
        errs.push(ConfigError::new("sweep.lo", "log spacing needs lo > 0"));
    }
}

fn check_invariants(cfg: &ScanConfig, errs: &mut Vec<ConfigError>) {
    let s = &cfg.stack;
    let sweep = &cfg.sweep;
    if !(s.d3_prime > 0.0 && s.d3_prime.is_finite()) {
        errs.push(ConfigError::new(
            "stack.d3_prime",
            format!("must be > 0, got {}", s.d3_prime),
        ));
    }
    match s.atom {
        AtomPosition::Fraction(f) if !(f > 0.0 && f < 1.0) => {
            errs.push(ConfigError::new(
                "stack.atom.fraction",
                format!("must lie in (0, 1), got {f}"),
            ));
        }
        AtomPosition::Absolute(z)
            if sweep.axis != SweepAxis::Z0Prime && !(z > 0.0 && z < s.d3_prime) =>
        {
            errs.push(ConfigError::new(
                "stack.atom.absolute",
                format!("must lie in (0, d3_prime = {}), got {z}", s.d3_prime),
            ));
        }
        _ => {}
    }
    match sweep.axis {
        SweepAxis::D3Prime => {
            if !(sweep.lo > 0.0) {
                errs.push(ConfigError::new("sweep.lo", "core thickness must stay > 0"));
            }
            if let AtomPosition::Absolute(z) = s.atom {
                if !(z < sweep.lo) {
                    errs.push(ConfigError::new(
                        "stack.atom.absolute",
                        format!(
                            "atom height {z} leaves the core at the low end of the thickness sweep"
                        ),
                    ));
                }
            }
        }
        SweepAxis::Z0Prime => {
            if !(sweep.lo > 0.0 && sweep.hi < s.d3_prime) {
                errs.push(ConfigError::new(
                    "sweep",
                    format!("atom heights must stay inside (0, {})", s.d3_prime),
                ));
            }
        }
        SweepAxis::Omega => {
            if !(sweep.lo > 0.0) {
                errs.push(ConfigError::new("sweep.lo", "frequency must stay > 0"));
            }
        }
        SweepAxis::GammaAbsorption => {
            if !s.core.is_dispersive() {
                errs.push(ConfigError::new(
                    "sweep.axis",
                    "absorption sweeps need a drude_lorentz core",
                ));
            }
            if !(sweep.lo >= 0.0) {
                errs.push(ConfigError::new("sweep.lo", "damping must be >= 0"));
            }
        }
    }
    if cfg.jobs == 0 {
        errs.push(ConfigError::new("jobs", "must be >= 1"));
    }
    let g = &cfg.green;
    if !(g.rel_tol > 0.0 && g.abs_tol > 0.0 && g.pole_threshold >= 0.0 && g.max_panels > 0) {
        errs.push(ConfigError::new(
            "green",
            "tolerances and panel budget must be positive",
        ));
    }
    for (i, r) in cfg.refine.iter().enumerate() {
        if r.strategy == PeakStrategy::CriticalThickness && sweep.axis != SweepAxis::D3Prime {
            errs.push(ConfigError::new(
                format!("refine[{i}].strategy"),
                "critical_thickness needs a d3_prime sweep",
            ));
        }
        if !(r.window > 0.0) || r.samples < 3 {
            errs.push(ConfigError::new(
                format!("refine[{i}]"),
                "window must be > 0 and samples >= 3",
            ));
        }
    }
    if !cfg.absorption_variants.is_empty() {
        if !s.core.is_dispersive() {
            errs.push(ConfigError::new(
                "absorption_variants",
                "needs a drude_lorentz core",
            ));
        }
        if sweep.axis == SweepAxis::GammaAbsorption {
            errs.push(ConfigError::new(
                "absorption_variants",
                "cannot be combined with an absorption sweep",
            ));
        }
        for (i, g) in cfg.absorption_variants.iter().enumerate() {
            if !(*g >= 0.0 && g.is_finite()) {
                errs.push(ConfigError::new(
                    format!("absorption_variants[{i}]"),
                    format!("must be >= 0, got {g}"),
                ));
            }
        }
    }
    if cfg.scale_lengths_with_omega && sweep.axis != SweepAxis::Omega {
        errs.push(ConfigError::new(
            "scale_lengths_with_omega",
            "only meaningful for omega sweeps",
        ));
    }
}
