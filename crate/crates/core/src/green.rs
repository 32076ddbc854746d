//! Integration of the imaginary part of the layered Green tensor over the
//! in-plane wavenumber, split by mode class.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{KernelError, Polarization, TransverseContext};
use crate::materials::StackOptics;
use crate::modes::{self, ModeClass, ModeError};
use crate::quadrature::{integrate_segments, Endpoint, QuadError, QuadOptions, QuadResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GreenError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Modes(#[from] ModeError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// Spectral class of a band of in-plane wavenumbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateClass {
    Radiation,
    Substrate,
    Guided,
    SurfaceNear,
    SurfaceFar,
}

impl RateClass {
    pub const ALL: [RateClass; 5] = [
        RateClass::Radiation,
        RateClass::Substrate,
        RateClass::Guided,
        RateClass::SurfaceNear,
        RateClass::SurfaceFar,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RateClass::Radiation => "radiation",
            RateClass::Substrate => "substrate",
            RateClass::Guided => "guided",
            RateClass::SurfaceNear => "surface_near",
            RateClass::SurfaceFar => "surface_far",
        }
    }

    pub fn mode_class(self) -> Option<ModeClass> {
        match self {
            RateClass::Guided => Some(ModeClass::Guided),
            RateClass::SurfaceNear => Some(ModeClass::SurfaceNear),
            RateClass::SurfaceFar => Some(ModeClass::SurfaceFar),
            _ => None,
        }
    }
}

/// How a class entry was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassMethod {
    Quadrature,
    /// Real-root residues of the lossless kernel.
    Residue,
    /// Lorentzian weights of the complex roots of the lossy kernel.
    PoleSum,
    /// The class interval is empty for this stack.
    Empty,
}

impl ClassMethod {
    pub fn label(self) -> &'static str {
        match self {
            ClassMethod::Quadrature => "quadrature",
            ClassMethod::Residue => "residue",
            ClassMethod::PoleSum => "pole_sum",
            ClassMethod::Empty => "empty",
        }
    }
}

/// Rates in units of the free-space rate, resolved by polarization and
/// dipole component. A z dipole only couples to p waves.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RateComponents {
    pub x_p: f64,
    pub x_s: f64,
    pub z_p: f64,
}

impl RateComponents {
    pub fn x(&self) -> f64 {
        self.x_p + self.x_s
    }

    pub fn z(&self) -> f64 {
        self.z_p
    }

    pub fn total(&self) -> f64 {
        self.x() + self.z()
    }

    pub fn add(&mut self, other: &RateComponents) {
        self.x_p += other.x_p;
        self.x_s += other.x_s;
        self.z_p += other.z_p;
    }

    pub fn sub(&self, other: &RateComponents) -> RateComponents {
        RateComponents {
            x_p: self.x_p - other.x_p,
            x_s: self.x_s - other.x_s,
            z_p: self.z_p - other.z_p,
        }
    }

    fn from_array(v: [f64; 3]) -> Self {
        RateComponents {
            x_p: v[0],
            x_s: v[1],
            z_p: v[2],
        }
    }
}

/// Differential rates per unit `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateDensity {
    pub k: f64,
    pub d_gamma_x_p: f64,
    pub d_gamma_x_s: f64,
    pub d_gamma_z_p: f64,
}

impl RateDensity {
    fn as_array(&self) -> [f64; 3] {
        [self.d_gamma_x_p, self.d_gamma_x_s, self.d_gamma_z_p]
    }
}

/// Normalized rate density at a real `k`.
pub fn rate_density(optics: &StackOptics, k: f64) -> Result<RateDensity, KernelError> {
    let ctx = TransverseContext::real(optics, k);
    let (zp, xp) = ctx
        .spectral(Polarization::P, optics.z0, optics.d3)?
        .density();
    let (_, xs) = ctx
        .spectral(Polarization::S, optics.z0, optics.d3)?
        .density();
    Ok(RateDensity {
        k,
        d_gamma_x_p: xp,
        d_gamma_x_s: xs,
        d_gamma_z_p: zp,
    })
}

/// Class intervals on the real `k` axis, from the real parts of `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionSplit {
    /// Both claddings propagating: `[0, radiation_end)`.
    pub radiation_end: f64,
    /// One cladding propagating: `[radiation_end, substrate_end)`.
    pub substrate_end: f64,
    /// Core propagating, claddings evanescent: `[substrate_end, guided_end)`.
    pub guided_end: f64,
}

impl RegionSplit {
    pub fn new(optics: &StackOptics) -> Self {
        let (e1, e2) = (optics.lower.eta().re, optics.upper.eta().re);
        let radiation_end = e1.min(e2).max(0.0).sqrt();
        let substrate_end = e1.max(e2).max(0.0).sqrt();
        let guided_end = optics.core.eta().re.max(0.0).sqrt().max(substrate_end);
        RegionSplit {
            radiation_end,
            substrate_end,
            guided_end,
        }
    }

    /// `[lo, hi)` of the class; surface classes share the evanescent interval.
    pub fn interval(&self, class: RateClass) -> (f64, f64) {
        match class {
            RateClass::Radiation => (0.0, self.radiation_end),
            RateClass::Substrate => (self.radiation_end, self.substrate_end),
            RateClass::Guided => (self.substrate_end, self.guided_end),
            RateClass::SurfaceNear | RateClass::SurfaceFar => (self.guided_end, f64::INFINITY),
        }
    }

    pub fn substrate_is_empty(&self) -> bool {
        self.substrate_end <= self.radiation_end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreenOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
    /// Below this absorption the guided class uses pole sums instead of quadrature.
    pub pole_threshold: f64,
    /// Integrate the evanescent side of a lossy stack to report the non-modal remainder.
    pub background: bool,
}

impl Default for GreenOptions {
    fn default() -> Self {
        GreenOptions {
            rel_tol: 1e-6,
            abs_tol: 1e-10,
            max_panels: 20_000,
            pole_threshold: 1e-8,
            background: true,
        }
    }
}

impl GreenOptions {
    fn quad(&self) -> QuadOptions {
        QuadOptions {
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            max_depth: 60,
            max_panels: self.max_panels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassResult {
    pub class: RateClass,
    pub method: ClassMethod,
    pub rates: RateComponents,
    pub error: f64,
    pub converged: bool,
    /// Pole-sum value of a class that was integrated by quadrature.
    pub comparison: Option<RateComponents>,
}

impl ClassResult {
    fn empty(class: RateClass) -> Self {
        ClassResult {
            class,
            method: ClassMethod::Empty,
            rates: RateComponents::default(),
            error: 0.0,
            converged: true,
            comparison: None,
        }
    }
}

/// Per-class rates for one stack at one frequency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreenBreakdown {
    pub classes: BTreeMap<RateClass, ClassResult>,
    /// Evanescent-side quadrature minus its pole sums (lossy stacks only):
    /// non-modal absorption in the core, kept out of the class totals.
    pub background: RateComponents,
    pub error_estimate: f64,
    pub converged: bool,
}

impl GreenBreakdown {
    pub fn class(&self, class: RateClass) -> RateComponents {
        self.classes
            .get(&class)
            .map(|c| c.rates)
            .unwrap_or_default()
    }

    pub fn method(&self, class: RateClass) -> ClassMethod {
        self.classes
            .get(&class)
            .map(|c| c.method)
            .unwrap_or(ClassMethod::Empty)
    }

    pub fn total(&self) -> RateComponents {
        let mut t = RateComponents::default();
        for c in self.classes.values() {
            t.add(&c.rates);
        }
        t
    }
}

fn density_array(optics: &StackOptics, k: f64) -> [f64; 3] {
    match rate_density(optics, k) {
        Ok(d) => d.as_array(),
        // exact Fresnel poles are measure-zero; the quadrature flags NaN
        Err(_) => [f64::NAN; 3],
    }
}

/// Adaptive quadrature of the density over `[a, b]` with extra breakpoints.
///
/// Both ends are treated as square-root branch points.
pub fn integrate_interval(
    optics: &StackOptics,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: &GreenOptions,
) -> Result<QuadResult<3>, GreenError> {
    let mut pts = vec![a];
    pts.extend(breakpoints.iter().copied().filter(|&p| p > a && p < b));
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let n = pts.len();
    let (first, last) = (pts[0], pts[n - 1]);
    let endpoint = move |lo: f64, hi: f64| match (lo == first, hi == last) {
        (true, true) => Endpoint::SqrtBoth,
        (true, false) => Endpoint::SqrtLeft,
        (false, true) => Endpoint::SqrtRight,
        (false, false) => Endpoint::Regular,
    };
    Ok(integrate_segments(
        |k| density_array(optics, k),
        &pts,
        endpoint,
        &opts.quad(),
    )?)
}

fn lorentz_breakpoints(poles: &[modes::ComplexPole]) -> Vec<f64> {
    let mut pts = Vec::new();
    for p in poles {
        let w = p.k.im.abs();
        pts.push(p.k.re);
        for m in [1.0, 5.0, 25.0] {
            pts.push(p.k.re - m * w);
            pts.push(p.k.re + m * w);
        }
    }
    pts
}

fn pole_sum(poles: &[modes::ComplexPole]) -> RateComponents {
    let mut r = RateComponents::default();
    for p in poles {
        match p.pol {
            Polarization::P => {
                r.x_p += p.weight_x;
                r.z_p += p.weight_z;
            }
            Polarization::S => r.x_s += p.weight_x,
        }
    }
    r
}

fn residue_sum(optics: &StackOptics, class: ModeClass) -> Result<RateComponents, GreenError> {
    let mut r = RateComponents::default();
    for pol in Polarization::BOTH {
        let roots = match class {
            ModeClass::Guided => modes::find_guided_roots(optics, pol)?,
            _ => modes::find_surface_roots(optics, pol)?,
        };
        for root in roots.iter().filter(|x| x.class == class) {
            if !(root.residue_x.is_finite() && root.residue_z.is_finite()) {
                return Err(ModeError::Tangency {
                    k: root.k,
                    magnitude: root.d_dk.norm(),
                }
                .into());
            }
            match pol {
                Polarization::P => {
                    r.x_p += root.residue_x;
                    r.z_p += root.residue_z;
                }
                Polarization::S => r.x_s += root.residue_x,
            }
        }
    }
    Ok(r)
}

fn all_poles(
    optics: &StackOptics,
    class: ModeClass,
) -> Result<Vec<modes::ComplexPole>, GreenError> {
    let mut out = Vec::new();
    for pol in Polarization::BOTH {
        out.extend(modes::complex_poles(optics, pol, class)?);
    }
    Ok(out)
}

/// Rates of one class.
///
/// `absorption` is the damping scale of the stack; lossless stacks are
/// detected from the optics themselves.
pub fn integrate_class(
    optics: &StackOptics,
    class: RateClass,
    absorption: f64,
    opts: &GreenOptions,
) -> Result<ClassResult, GreenError> {
    let split = RegionSplit::new(optics);
    let (lo, hi) = split.interval(class);
    if hi <= lo {
        return Ok(ClassResult::empty(class));
    }
    let lossless = optics.is_lossless();
    match class.mode_class() {
        None => {
            let q = integrate_interval(optics, lo, hi, &[], opts)?;
            Ok(ClassResult {
                class,
                method: ClassMethod::Quadrature,
                rates: RateComponents::from_array(q.value),
                error: q.max_error(),
                converged: q.converged,
                comparison: None,
            })
        }
        Some(mc) if lossless => Ok(ClassResult {
            class,
            method: ClassMethod::Residue,
            rates: residue_sum(optics, mc)?,
            error: 0.0,
            converged: true,
            comparison: None,
        }),
        Some(ModeClass::Guided) if absorption >= opts.pole_threshold => {
            let poles = all_poles(optics, ModeClass::Guided)?;
            let q = integrate_interval(optics, lo, hi, &lorentz_breakpoints(&poles), opts)?;
            Ok(ClassResult {
                class,
                method: ClassMethod::Quadrature,
                rates: RateComponents::from_array(q.value),
                error: q.max_error(),
                converged: q.converged,
                comparison: Some(pole_sum(&poles)),
            })
        }
        Some(mc) => {
            let poles = all_poles(optics, mc)?;
            Ok(ClassResult {
                class,
                method: ClassMethod::PoleSum,
                rates: pole_sum(&poles),
                error: 0.0,
                converged: true,
                comparison: None,
            })
        }
    }
}

/// Truncation point of the evanescent-side quadrature.
pub fn evanescent_k_max(optics: &StackOptics) -> f64 {
    let dist = optics.z0.min(optics.d3 - optics.z0).max(1e-12);
    modes::surface_k_max(optics).max(40.0 / dist)
}

/// Quadrature over the evanescent side, with a bound on the truncated tail.
pub fn evanescent_quadrature(
    optics: &StackOptics,
    poles: &[modes::ComplexPole],
    opts: &GreenOptions,
) -> Result<(RateComponents, f64, bool), GreenError> {
    let split = RegionSplit::new(optics);
    let lo = split.guided_end;
    let k_max = evanescent_k_max(optics);
    let q = integrate_interval(optics, lo, k_max, &lorentz_breakpoints(poles), opts)?;
    let dist = optics.z0.min(optics.d3 - optics.z0).max(1e-12);
    let edge: f64 = density_array(optics, k_max).iter().map(|v| v.abs()).sum();
    let tail = if edge.is_finite() {
        edge / (2.0 * dist)
    } else {
        0.0
    };
    Ok((
        RateComponents::from_array(q.value),
        q.max_error() + tail,
        q.converged,
    ))
}

/// Every class plus the non-modal background.
pub fn total_breakdown(
    optics: &StackOptics,
    absorption: f64,
    opts: &GreenOptions,
) -> Result<GreenBreakdown, GreenError> {
    let mut classes = BTreeMap::new();
    let mut error = 0.0;
    let mut converged = true;
    for class in RateClass::ALL {
        let r = integrate_class(optics, class, absorption, opts)?;
        error += r.error;
        converged &= r.converged;
        classes.insert(class, r);
    }
    let mut background = RateComponents::default();
    if opts.background && !optics.is_lossless() {
        let mut poles = all_poles(optics, ModeClass::SurfaceNear)?;
        poles.extend(all_poles(optics, ModeClass::SurfaceFar)?);
        let (quad, err, ok) = evanescent_quadrature(optics, &poles, opts)?;
        background = quad.sub(&pole_sum(&poles));
        error += err;
        converged &= ok;
    }
    Ok(GreenBreakdown {
        classes,
        background,
        error_estimate: error,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::Medium;
    use num_complex::Complex64 as C64;

    #[test]
    fn vacuum_normalization() {
        let v = StackOptics::vacuum(1.0, 0.5);
        let b = total_breakdown(&v, 0.0, &GreenOptions::default()).unwrap();
        let t = b.total();
        assert!(
            (t.x() - 0.5).abs() < 1e-9 && (t.z() - 0.5).abs() < 1e-9,
            "{t:?}"
        );
        assert_eq!(b.method(RateClass::Substrate), ClassMethod::Empty);
        assert_eq!(b.class(RateClass::Guided).total(), 0.0);
    }

    #[test]
    fn homogeneous_medium_law() {
        for n in [1.5, 2.0] {
            let m = Medium::real(n, n);
            let o = StackOptics::new(m, m, m, 1.0, 0.3);
            let t = total_breakdown(&o, 0.0, &GreenOptions::default())
                .unwrap()
                .total();
            assert!(
                (t.total() / (n * n) - 1.0).abs() < 1e-6,
                "n={n}: {}",
                t.total()
            );
        }
    }

    #[test]
    fn region_split_ordering() {
        let o = StackOptics::new(
            Medium::real(2.0, 1.0),
            Medium::real(1.0, 1.0),
            Medium::real(-1.99, -1.99),
            1.0,
            0.5,
        );
        let s = RegionSplit::new(&o);
        assert!(s.radiation_end < s.substrate_end && s.substrate_end < s.guided_end);
        assert!((s.radiation_end - 1.0).abs() < 1e-15);
        let sym = RegionSplit::new(&StackOptics::vacuum(1.0, 0.5));
        assert!(sym.substrate_is_empty());
    }

    #[test]
    fn mirror_symmetry_of_density() {
        let core = Medium::new(C64::new(-1.99, 1e-3), C64::new(-1.99, 1e-3));
        let o = StackOptics::new(
            Medium::real(1.0, 1.0),
            Medium::real(1.0, 1.0),
            core,
            1.3,
            0.3,
        );
        let m = o.with_geometry(1.3, 1.0);
        for k in [0.3, 1.1, 1.6, 2.5, 7.0] {
            let a = rate_density(&o, k).unwrap();
            let b = rate_density(&m, k).unwrap();
            for (x, y) in a.as_array().iter().zip(b.as_array()) {
                assert!(
                    (x - y).abs() <= 1e-10 * x.abs().max(1e-12),
                    "k={k}: {x} vs {y}"
                );
            }
        }
    }
}
