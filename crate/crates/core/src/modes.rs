//! Real and complex roots of the resonance denominator, mode-resolved rates
//! and existence conditions.

use std::f64::consts::PI;

use log::{debug, warn};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{
    guided_phase, surface_phase, KernelError, Layer, PhaseFold, Polarization, TransverseContext,
};
use crate::materials::StackOptics;
use crate::numerics::{bisect, derivative, newton_deflated};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModeError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("derivative of D vanishes at k = {k} (|D'| = {magnitude:.3e}); refine the root")]
    Tangency { k: f64, magnitude: f64 },
    #[error("mode at k = {k} sits on the cladding light line (mode birth)")]
    BirthSingularity { k: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeClass {
    Guided,
    SurfaceNear,
    SurfaceFar,
}

impl ModeClass {
    pub const ALL: [ModeClass; 3] = [
        ModeClass::Guided,
        ModeClass::SurfaceNear,
        ModeClass::SurfaceFar,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ModeClass::Guided => "guided",
            ModeClass::SurfaceNear => "surface_near",
            ModeClass::SurfaceFar => "surface_far",
        }
    }

    pub fn is_surface(self) -> bool {
        !matches!(self, ModeClass::Guided)
    }
}

/// A real root of `D = 0` on the lossless kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeRoot {
    pub pol: Polarization,
    pub class: ModeClass,
    /// 1-based position within its (polarization, class) list, ascending in `k`.
    pub m: usize,
    pub k: f64,
    /// Integer `n` in `half_phase = n pi` for guided roots.
    pub phase_index: Option<i64>,
    pub d_dk: C64,
    pub residue_x: f64,
    pub residue_z: f64,
}

impl ModeRoot {
    pub fn residue(&self, component: Component) -> f64 {
        match component {
            Component::X => self.residue_x,
            Component::Z => self.residue_z,
        }
    }
}

/// Dipole orientation relative to the interfaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    X,
    Z,
}

impl Component {
    pub const BOTH: [Component; 2] = [Component::X, Component::Z];

    pub fn label(self) -> &'static str {
        match self {
            Component::X => "x",
            Component::Z => "z",
        }
    }
}

impl std::str::FromStr for Component {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(Component::X),
            "z" => Ok(Component::Z),
            other => Err(format!("unknown component '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub grid_points: usize,
    pub refine_factor: usize,
    pub refine_levels: usize,
    pub bisect_rel_tol: f64,
    pub root_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            grid_points: 2000,
            refine_factor: 10,
            refine_levels: 2,
            bisect_rel_tol: 1e-12,
            root_tol: 1e-10,
        }
    }
}

/// Relative offset keeping grids off the branch points.
const EDGE: f64 = 1e-9;

/// `(sqrt(max Re eta_cladding), sqrt(Re eta3))`, or `None` when the core cannot guide.
pub fn guided_interval(optics: &StackOptics) -> Option<(f64, f64)> {
    let lo = optics
        .lower
        .eta()
        .re
        .max(optics.upper.eta().re)
        .max(0.0)
        .sqrt();
    let hi = optics.core.eta().re.max(0.0).sqrt();
    (hi > lo).then_some((lo, hi))
}

/// Upper integration and search bound for the evanescent side.
pub fn surface_k_max(optics: &StackOptics) -> f64 {
    let n3 = optics
        .core
        .eta()
        .re
        .max(optics.lower.eta().re)
        .max(optics.upper.eta().re)
        .max(0.0)
        .sqrt();
    (10.0 * n3).max(40.0 / optics.d3)
}

/// Lower edge of the surface search: the largest light line of the stack.
pub fn surface_k_min(optics: &StackOptics) -> f64 {
    optics
        .core
        .eta()
        .re
        .max(optics.lower.eta().re)
        .max(optics.upper.eta().re)
        .max(0.0)
        .sqrt()
}

fn classify_surface(optics: &StackOptics, k: f64) -> ModeClass {
    if k * k < 4.0 * optics.core.eta().re {
        ModeClass::SurfaceNear
    } else {
        ModeClass::SurfaceFar
    }
}

/// `dD/dk` at (possibly complex) `k`, holding the core branch fixed.
pub fn d_derivative(optics: &StackOptics, pol: Polarization, k: C64) -> Result<C64, KernelError> {
    let reference = TransverseContext::new(optics, k).beta(Layer::Core);
    let failure = std::cell::Cell::new(None);
    let h = 1e-3 * k.norm().max(1e-2).min(1.0 / optics.d3.max(1e-3)).max(1e-6);
    let d = derivative(
        |z| match TransverseContext::continued(optics, z, reference).d_factor(pol, optics.d3) {
            Ok(v) => v,
            Err(e) => {
                failure.set(Some(e));
                C64::new(f64::NAN, 0.0)
            }
        },
        k,
        h,
    );
    match failure.take() {
        Some(e) if !d.re.is_finite() => Err(e),
        _ => Ok(d),
    }
}

/// Contribution of a pole at `kc` to the normalized rates `(z, x)`.
///
/// Real roots (lossless kernel) give `pi |Re(N / D')|`; complex roots give
/// the Lorentzian weight `Im[i pi sgn(Im kc) N / D']`.
pub fn pole_weight(
    optics: &StackOptics,
    pol: Polarization,
    kc: C64,
) -> Result<(f64, f64), ModeError> {
    let dd = d_derivative(optics, pol, kc)?;
    if dd.norm() < 1e-12 {
        return Err(ModeError::Tangency {
            k: kc.re,
            magnitude: dd.norm(),
        });
    }
    let ctx = TransverseContext::new(optics, kc);
    let sp = ctx.spectral_with(pol, optics.z0, optics.d3, false)?;
    let (nz, nx) = (sp.z / dd, sp.x / dd);
    if kc.im == 0.0 {
        Ok((PI * nz.re.abs(), PI * nx.re.abs()))
    } else {
        let w = C64::new(0.0, PI * kc.im.signum());
        Ok(((w * nz).im, (w * nx).im))
    }
}

fn finish_root(
    optics: &StackOptics,
    pol: Polarization,
    class: ModeClass,
    k: f64,
    phase_index: Option<i64>,
    opts: &SolverOptions,
) -> Result<Option<ModeRoot>, ModeError> {
    let mut k = k;
    let dd = d_derivative(optics, pol, C64::new(k, 0.0))?;
    let d_at = |k: f64| TransverseContext::real(optics, k).d_factor(pol, optics.d3);
    let d0 = d_at(k)?;
    // one Newton polish
    if dd.norm() > 0.0 {
        let trial = k - (d0 / dd).re;
        if trial.is_finite() && (trial - k).abs() < 1e-6 * k.max(1.0) {
            if let Ok(d1) = d_at(trial) {
                if d1.norm() < d0.norm() {
                    k = trial;
                }
            }
        }
    }
    let resid = d_at(k)?.norm();
    if resid >= opts.root_tol {
        if resid > 1e-6 {
            // a sign change through a reflection-coefficient pole, not a root
            debug!("rejecting {pol:?} bracket at k = {k}: |D| = {resid:.3e}");
            return Ok(None);
        }
        warn!("{pol:?} root at k = {k} only reaches |D| = {resid:.3e}");
    }
    let dd = d_derivative(optics, pol, C64::new(k, 0.0))?;
    let (residue_z, residue_x) = if dd.norm() < 1e-12 {
        (f64::INFINITY, f64::INFINITY)
    } else {
        pole_weight(optics, pol, C64::new(k, 0.0))?
    };
    Ok(Some(ModeRoot {
        pol,
        class,
        m: 0,
        k,
        phase_index,
        d_dk: dd,
        residue_x,
        residue_z,
    }))
}

/// Sample points on `[a, b]` with extra density around local extrema of `g`.
fn refined_grid<G>(g: &mut G, a: f64, b: f64, opts: &SolverOptions) -> Vec<(f64, f64)>
where
    G: FnMut(f64) -> f64,
{
    let n = opts.grid_points.max(2);
    let mut pts: Vec<(f64, f64)> = (0..=n)
        .map(|i| a + (b - a) * i as f64 / n as f64)
        .map(|k| (k, g(k)))
        .collect();
    for _ in 0..opts.refine_levels {
        let mut extra = Vec::new();
        for i in 1..pts.len() - 1 {
            let (l, c, r) = (pts[i - 1].1, pts[i].1, pts[i + 1].1);
            if (c - l) * (r - c) < 0.0 {
                for (lo, hi) in [(pts[i - 1].0, pts[i].0), (pts[i].0, pts[i + 1].0)] {
                    for j in 1..opts.refine_factor {
                        let k = lo + (hi - lo) * j as f64 / opts.refine_factor as f64;
                        extra.push((k, g(k)));
                    }
                }
            }
        }
        if extra.is_empty() {
            break;
        }
        pts.extend(extra);
        pts.sort_by(|x, y| x.0.total_cmp(&y.0));
        pts.dedup_by(|x, y| x.0 == y.0);
    }
    pts
}

fn number_roots(mut roots: Vec<ModeRoot>) -> Vec<ModeRoot> {
    roots.sort_by(|a, b| {
        (a.class, a.k.total_cmp(&b.k))
            .cmp(&(b.class, std::cmp::Ordering::Equal))
            .then(a.k.total_cmp(&b.k))
    });
    let mut counter = std::collections::BTreeMap::new();
    for r in roots.iter_mut() {
        let c = counter.entry(r.class).or_insert(0usize);
        *c += 1;
        r.m = *c;
    }
    roots.sort_by(|a, b| a.k.total_cmp(&b.k));
    roots
}

/// Guided roots of the lossless kernel, ascending in `k`.
pub fn find_guided_roots(
    optics: &StackOptics,
    pol: Polarization,
) -> Result<Vec<ModeRoot>, ModeError> {
    find_guided_roots_with(optics, pol, &SolverOptions::default())
}

pub fn find_guided_roots_with(
    optics: &StackOptics,
    pol: Polarization,
    opts: &SolverOptions,
) -> Result<Vec<ModeRoot>, ModeError> {
    let optics = optics.lossless();
    let Some((lo, hi)) = guided_interval(&optics) else {
        return Ok(Vec::new());
    };
    let (a, b) = (lo + EDGE * hi, hi * (1.0 - EDGE));
    if b <= a {
        return Ok(Vec::new());
    }
    let failure = std::cell::Cell::new(None);
    let h = |k: f64| match TransverseContext::real(&optics, k).half_phase(pol, optics.d3) {
        Ok(v) => v,
        Err(e) => {
            failure.set(Some(e));
            f64::NAN
        }
    };
    let pts = refined_grid(&mut &h, a, b, opts);
    if let Some(e) = failure.take() {
        return Err(e.into());
    }
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let ((k0, h0), (k1, h1)) = (w[0], w[1]);
        let (mlo, mhi) = (
            (h0.min(h1) / PI).ceil() as i64,
            (h0.max(h1) / PI).floor() as i64,
        );
        for m in mlo..=mhi {
            let target = m as f64 * PI;
            let (g0, g1) = (h0 - target, h1 - target);
            if !(g0 == 0.0 || g0 * g1 < 0.0) {
                continue;
            }
            let tol = opts.bisect_rel_tol * k1;
            let Some(k) = bisect(|k| h(k) - target, k0, k1, tol) else {
                continue;
            };
            if let Some(root) = finish_root(&optics, pol, ModeClass::Guided, k, Some(m), opts)? {
                out.push(root);
            }
        }
    }
    if let Some(e) = failure.take() {
        return Err(e.into());
    }
    Ok(number_roots(out))
}

/// Surface roots (`k^2 > Re eta3`) of the lossless kernel.
pub fn find_surface_roots(
    optics: &StackOptics,
    pol: Polarization,
) -> Result<Vec<ModeRoot>, ModeError> {
    find_surface_roots_with(optics, pol, &SolverOptions::default())
}

pub fn find_surface_roots_with(
    optics: &StackOptics,
    pol: Polarization,
    opts: &SolverOptions,
) -> Result<Vec<ModeRoot>, ModeError> {
    let optics = optics.lossless();
    let k_lo = surface_k_min(&optics);
    let k_max = surface_k_max(&optics);
    let a = k_lo * (1.0 + EDGE) + EDGE;
    if k_max <= a {
        return Ok(Vec::new());
    }
    let failure = std::cell::Cell::new(None);
    let g = |k: f64| match TransverseContext::real(&optics, k).d_factor(pol, optics.d3) {
        Ok(v) => v.re,
        // reflection-coefficient poles: treat as a sign flip through infinity
        Err(e @ KernelError::FresnelPole { .. }) => {
            debug!("{e}");
            f64::NAN
        }
        Err(e) => {
            failure.set(Some(e));
            f64::NAN
        }
    };
    let mut pts = refined_grid(&mut &g, a, k_max, opts);
    // logarithmic coverage of the light line, where near roots enter
    let eta = k_lo * k_lo;
    let n_log = 200;
    for i in 0..n_log {
        let kappa = k_lo.max(1.0) * 10f64.powf(-7.0 + 7.0 * i as f64 / n_log as f64);
        let k = (eta + kappa * kappa).sqrt();
        if k > a && k < pts[1].0 {
            pts.push((k, g(k)));
        }
    }
    if let Some(e) = failure.take() {
        return Err(e.into());
    }
    pts.retain(|p| p.1.is_finite());
    pts.sort_by(|x, y| x.0.total_cmp(&y.0));
    pts.dedup_by(|x, y| x.0 == y.0);
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let ((k0, g0), (k1, g1)) = (w[0], w[1]);
        if !(g0 == 0.0 || g0 * g1 < 0.0) {
            continue;
        }
        let Some(k) = bisect(g, k0, k1, opts.bisect_rel_tol * k1) else {
            continue;
        };
        if let Some(root) = finish_root(&optics, pol, classify_surface(&optics, k), k, None, opts)?
        {
            out.push(root);
        }
    }
    if let Some(e) = failure.take() {
        return Err(e.into());
    }
    Ok(number_roots(out))
}

/// Every real root of both polarizations, guided then surface, ascending in `k` within each.
pub fn find_all_roots(optics: &StackOptics) -> Result<Vec<ModeRoot>, ModeError> {
    let mut all = Vec::new();
    for pol in Polarization::BOTH {
        all.extend(find_guided_roots(optics, pol)?);
        all.extend(find_surface_roots(optics, pol)?);
    }
    Ok(all)
}

/// Residue-based rate of one root for one dipole component, in units of the
/// free-space rate.
pub fn residue_rate(
    optics: &StackOptics,
    root: &ModeRoot,
    component: Component,
) -> Result<f64, ModeError> {
    if root.pol == Polarization::S && component == Component::Z {
        return Ok(0.0);
    }
    let lossless = optics.lossless();
    let dd = d_derivative(&lossless, root.pol, C64::new(root.k, 0.0))?;
    if dd.norm() < 1e-12 {
        return Err(ModeError::Tangency {
            k: root.k,
            magnitude: dd.norm(),
        });
    }
    let (z, x) = pole_weight(&lossless, root.pol, C64::new(root.k, 0.0))?;
    Ok(match component {
        Component::X => x,
        Component::Z => z,
    })
}

fn cladding_layers() -> [Layer; 2] {
    [Layer::Lower, Layer::Upper]
}

/// Per-root terms of the analytic p-polarized guided rate for a z dipole.
///
/// The standing-wave factor is written with the distance to the upper
/// interface and its reflection phase, which is exact at any root.
pub fn guided_terms_pz(
    optics: &StackOptics,
    roots: &[ModeRoot],
    fold: PhaseFold,
) -> Result<Vec<f64>, ModeError> {
    let optics = optics.lossless();
    let eps3 = optics.core.eps.re;
    let mut out = Vec::new();
    for root in roots
        .iter()
        .filter(|r| r.pol == Polarization::P && r.class == ModeClass::Guided)
    {
        let ctx = TransverseContext::real(&optics, root.k);
        let mut denom = optics.d3;
        for layer in cladding_layers() {
            let b = ctx.beta(layer).norm();
            if b < 1e-9 {
                return Err(ModeError::BirthSingularity { k: root.k });
            }
            let term = (ctx.medium(layer).eps.re * eps3 / b) * ctx.chi(Polarization::P, layer)?.re;
            if optics.core.is_left_handed() && term >= 0.0 {
                debug!(
                    "non-negative lateral-shift term {term} at k = {} ({layer:?})",
                    root.k
                );
            }
            denom += term;
        }
        let r32 = ctx.fresnel(Polarization::P, Layer::Core, Layer::Upper)?;
        let phi = guided_phase(r32, fold)?;
        let b3 = ctx.beta(Layer::Core).re;
        let standing = 1.0 + (2.0 * (b3 * (optics.d3 - optics.z0) - phi)).cos();
        out.push(3.0 * PI / (4.0 * eps3.abs()) * root.k * root.k * standing / denom.abs());
    }
    Ok(out)
}

/// Analytic p-polarized guided rate for a z dipole.
pub fn guided_rate_pz(
    optics: &StackOptics,
    roots: &[ModeRoot],
    fold: PhaseFold,
) -> Result<f64, ModeError> {
    Ok(guided_terms_pz(optics, roots, fold)?.iter().sum())
}

/// Per-root terms of the analytic p-polarized surface rate for a z dipole.
pub fn surface_terms_pz(optics: &StackOptics, roots: &[ModeRoot]) -> Result<Vec<f64>, ModeError> {
    let optics = optics.lossless();
    let eps3 = optics.core.eps.re;
    let mut out = Vec::new();
    for root in roots
        .iter()
        .filter(|r| r.pol == Polarization::P && r.class.is_surface())
    {
        let ctx = TransverseContext::real(&optics, root.k);
        let mut denom = optics.d3;
        for layer in cladding_layers() {
            let kj = ctx.beta(layer).norm();
            denom -= (ctx.medium(layer).eps.re * eps3 / kj)
                * ctx.chi_surface(Polarization::P, layer)?.re;
        }
        let r32 = ctx.fresnel(Polarization::P, Layer::Core, Layer::Upper)?;
        let phi = surface_phase(r32)?;
        let k3 = ctx.beta(Layer::Core).norm();
        let hyper = (2.0 * (k3 * (optics.d3 - optics.z0) - phi)).cosh() - 1.0;
        out.push(3.0 * PI / (4.0 * eps3.abs()) * root.k * root.k * hyper / denom.abs());
    }
    Ok(out)
}

pub fn surface_rate_pz(optics: &StackOptics, roots: &[ModeRoot]) -> Result<f64, ModeError> {
    Ok(surface_terms_pz(optics, roots)?.iter().sum())
}

/// Thin-film reduction of [`surface_rate_pz`] for a symmetric stack, valid
/// when `k` greatly exceeds every light line.
pub fn surface_rate_pz_thin_film(
    optics: &StackOptics,
    roots: &[ModeRoot],
) -> Result<f64, ModeError> {
    let optics = optics.lossless();
    let (e1, e3) = (optics.lower.eps.re, optics.core.eps.re);
    let (n1, n3) = (optics.lower.eta().re, optics.core.eta().re);
    let mut total = 0.0;
    for root in roots
        .iter()
        .filter(|r| r.pol == Polarization::P && r.class.is_surface())
    {
        let ctx = TransverseContext::real(&optics, root.k);
        let k = root.k;
        let denom = optics.d3 - 2.0 * e1 * e3 * (n3 - n1) / (k.powi(3) * (e1 * e1 - e3 * e3));
        let r32 = ctx.fresnel(Polarization::P, Layer::Core, Layer::Upper)?;
        let phi = surface_phase(r32)?;
        let k3 = ctx.beta(Layer::Core).norm();
        let hyper = (2.0 * (k3 * (optics.d3 - optics.z0) - phi)).cosh() - 1.0;
        total += 3.0 * PI / (4.0 * e3.abs()) * k * k * hyper / denom.abs();
    }
    Ok(total)
}

/// Near-light-line approximation of the surface rate.
pub fn surface_rate_pz_near(optics: &StackOptics, roots: &[ModeRoot]) -> Result<f64, ModeError> {
    let optics = optics.lossless();
    let dmax = surface_cutoff_thickness(&optics)?;
    let gap = optics.d3 - dmax;
    if gap >= 0.0 {
        return Err(ModeError::Precondition(format!(
            "near-light-line formula needs d3 < d3max = {dmax}, got {}",
            optics.d3
        )));
    }
    if gap.abs() < 1e-12 {
        return Err(ModeError::Precondition(
            "d3 sits on the cutoff; the formula diverges".into(),
        ));
    }
    let eta3 = optics.core.eta().re;
    let shift = (optics.d3 - 2.0 * optics.z0).powi(2);
    let total: f64 = roots
        .iter()
        .filter(|r| r.pol == Polarization::P && r.class == ModeClass::SurfaceNear)
        .map(|r| (r.k * r.k - eta3) * shift)
        .sum();
    Ok(3.0 * PI * optics.core.mu.re.abs() / 8.0 * total / gap.abs())
}

/// Thickness above which near-light-line surface modes cease to exist.
pub fn surface_cutoff_thickness(optics: &StackOptics) -> Result<f64, ModeError> {
    let e1 = optics.lower.eps.re;
    let e3 = optics.core.eps.re;
    let excess = optics.core.eta().re - optics.lower.eta().re;
    if e3 >= 0.0 {
        return Err(ModeError::Precondition(format!(
            "core permittivity must be negative, got {e3}"
        )));
    }
    if excess <= 0.0 {
        return Err(ModeError::Precondition(
            "core index must exceed the cladding index".into(),
        ));
    }
    Ok(-2.0 * e1 / (e3 * excess.sqrt()))
}

/// `k d3` of the thin-film surface root, `ln|(e1 - e3)/(e1 + e3)|`.
pub fn thin_film_product(optics: &StackOptics) -> f64 {
    let (e1, e3) = (optics.lower.eps.re, optics.core.eps.re);
    ((e1 - e3) / (e1 + e3)).abs().ln()
}

/// A root of the lossy `D` near the real axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexPole {
    pub pol: Polarization,
    pub class: ModeClass,
    pub k: C64,
    pub weight_z: f64,
    pub weight_x: f64,
}

/// Complex roots of `D` with real part in `(a, b)` and `|Im k| < im_max`.
///
/// Seeds come from the lossless real roots, from minima of `|D|` on the real
/// axis and from the mirror images of the roots found so far; deflation keeps
/// Newton from landing twice on the same root.
pub fn find_complex_roots(
    optics: &StackOptics,
    pol: Polarization,
    a: f64,
    b: f64,
    seeds: &[f64],
    im_max: f64,
    grid_points: usize,
) -> Vec<C64> {
    let d_at = |k: C64, reference: C64| {
        TransverseContext::continued(optics, k, reference)
            .d_factor(pol, optics.d3)
            .unwrap_or(C64::new(f64::NAN, 0.0))
    };
    let accept = |z: C64| {
        z.re > a - 0.05 * (b - a) && z.re < b + 0.05 * (b - a) && z.im.abs() < 2.0 * im_max
    };
    let mut all_seeds: Vec<C64> = seeds.iter().map(|&k| C64::new(k, 0.0)).collect();
    let n = grid_points.max(2);
    let vals: Vec<(f64, f64)> = (0..=n)
        .map(|i| a + (b - a) * (i as f64 + 0.5) / (n as f64 + 1.0))
        .map(|k| {
            let c = C64::new(k, 0.0);
            (
                k,
                d_at(c, TransverseContext::new(optics, c).beta(Layer::Core)).norm(),
            )
        })
        .collect();
    for i in 1..vals.len() - 1 {
        if vals[i].1 < vals[i - 1].1 && vals[i].1 <= vals[i + 1].1 && vals[i].1 < 0.2 {
            // off-axis twins: Newton started between a mirror pair stays on the axis
            let off = 0.25 * im_max;
            all_seeds.push(C64::new(vals[i].0, 0.0));
            all_seeds.push(C64::new(vals[i].0, off));
            all_seeds.push(C64::new(vals[i].0, -off));
        }
    }
    let mut found: Vec<C64> = Vec::new();
    let try_seed = |seed: C64, found: &mut Vec<C64>| {
        let reference = TransverseContext::new(optics, C64::new(seed.re, 0.0)).beta(Layer::Core);
        if let Some(z) = newton_deflated(|z| d_at(z, reference), seed, found, 1e-13, accept) {
            let dup = found
                .iter()
                .any(|f| (f - z).norm() < 1e-9 * z.norm().max(1.0));
            if !dup && d_at(z, reference).norm() < 1e-8 {
                found.push(z);
            }
        }
    };
    for s in all_seeds {
        try_seed(s, &mut found);
    }
    let mut i = 0;
    while i < found.len() {
        try_seed(found[i].conj(), &mut found);
        i += 1;
    }
    found.retain(|z| z.re > a && z.re < b && z.im.abs() < im_max);
    found.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    found
}

/// Lorentzian pole contributions of every near-real root of the lossy `D`
/// whose real part falls in the requested class interval.
pub fn complex_poles(
    optics: &StackOptics,
    pol: Polarization,
    class: ModeClass,
) -> Result<Vec<ComplexPole>, ModeError> {
    let (a, b, seeds) = match class {
        ModeClass::Guided => {
            let Some((lo, hi)) = guided_interval(optics) else {
                return Ok(Vec::new());
            };
            let seeds: Vec<f64> = find_guided_roots(optics, pol)?
                .iter()
                .map(|r| r.k)
                .collect();
            (lo, hi, seeds)
        }
        ModeClass::SurfaceNear | ModeClass::SurfaceFar => {
            let lo = surface_k_min(optics);
            let split = 2.0 * optics.core.eta().re.max(0.0).sqrt();
            let hi = surface_k_max(optics);
            let (a, b) = if class == ModeClass::SurfaceNear {
                (lo, split.max(lo))
            } else {
                (split.max(lo), hi)
            };
            let seeds: Vec<f64> = find_surface_roots(optics, pol)?
                .iter()
                .filter(|r| r.class == class)
                .map(|r| r.k)
                .collect();
            (a, b, seeds)
        }
    };
    if b <= a {
        return Ok(Vec::new());
    }
    let scale = optics
        .core
        .eps
        .im
        .abs()
        .max(optics.core.mu.im.abs())
        .max(1e-12);
    // simple poles sit O(loss) off the axis; near-degenerate pairs O(sqrt(loss))
    let im_max = (50.0 * scale * b)
        .max(20.0 * scale.sqrt())
        .clamp(1e-6, 0.1 * (b - a).max(1e-3));
    let grid = if class == ModeClass::SurfaceFar {
        4000
    } else {
        2000
    };
    let roots = find_complex_roots(optics, pol, a, b, &seeds, im_max, grid);
    let mut out = Vec::with_capacity(roots.len());
    for k in roots {
        let (weight_z, weight_x) = pole_weight(optics, pol, k)?;
        out.push(ComplexPole {
            pol,
            class,
            k,
            weight_z,
            weight_x,
        });
    }
    Ok(out)
}

/// Core thickness at which the lateral-shift denominator vanishes for a given `k`.
fn critical_thickness_at(
    optics: &StackOptics,
    pol: Polarization,
    k: f64,
) -> Result<f64, KernelError> {
    let ctx = TransverseContext::real(optics, k);
    let z3 = pol.response(&optics.core).re;
    let mut d = 0.0;
    for layer in cladding_layers() {
        let zj = pol.response(ctx.medium(layer)).re;
        d -= zj * z3 / ctx.beta(layer).norm() * ctx.chi(pol, layer)?.re;
    }
    Ok(d)
}

/// A thickness where a pair of guided roots is born (double root of `D`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub pol: Polarization,
    pub d3: f64,
    pub k: f64,
    pub phase_index: i64,
}

/// Double-root thicknesses in `[d_lo, d_hi]`, ascending.
pub fn critical_thicknesses(
    optics: &StackOptics,
    pol: Polarization,
    d_lo: f64,
    d_hi: f64,
) -> Result<Vec<CriticalPoint>, ModeError> {
    let optics = optics.lossless();
    let Some((lo, hi)) = guided_interval(&optics) else {
        return Ok(Vec::new());
    };
    let (a, b) = (lo + 1e-7 * hi, hi * (1.0 - 1e-7));
    let n = 4000;
    let failure = std::cell::Cell::new(None);
    let phase = |k: f64| -> (f64, f64) {
        let res = critical_thickness_at(&optics, pol, k).and_then(|d| {
            let h = TransverseContext::real(&optics, k).half_phase(pol, d)?;
            Ok((d, h))
        });
        match res {
            Ok(v) => v,
            Err(e) => {
                failure.set(Some(e));
                (f64::NAN, f64::NAN)
            }
        }
    };
    let samples: Vec<(f64, f64, f64)> = (0..=n)
        .map(|i| a + (b - a) * i as f64 / n as f64)
        .map(|k| {
            let (d, h) = phase(k);
            (k, d, h)
        })
        .collect();
    let mut out = Vec::new();
    for w in samples.windows(2) {
        let ((k0, d0, h0), (k1, d1, h1)) = (w[0], w[1]);
        if !(d0 > 0.0 && d1 > 0.0) || !h0.is_finite() || !h1.is_finite() {
            continue;
        }
        let (mlo, mhi) = (
            (h0.min(h1) / PI).ceil() as i64,
            (h0.max(h1) / PI).floor() as i64,
        );
        for m in mlo..=mhi {
            let target = m as f64 * PI;
            if !((h0 - target) == 0.0 || (h0 - target) * (h1 - target) < 0.0) {
                continue;
            }
            let Some(k) = bisect(|k| phase(k).1 - target, k0, k1, 1e-13 * k1) else {
                continue;
            };
            let d = phase(k).0;
            if d >= d_lo && d <= d_hi {
                out.push(CriticalPoint {
                    pol,
                    d3: d,
                    k,
                    phase_index: m,
                });
            }
        }
    }
    if let Some(e) = failure.take() {
        return Err(e.into());
    }
    out.sort_by(|x, y| x.d3.total_cmp(&y.d3));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::Medium;

    fn nri(d3: f64, frac: f64) -> StackOptics {
        StackOptics::new(
            Medium::real(1.0, 1.0),
            Medium::real(1.0, 1.0),
            Medium::real(-1.99, -1.99),
            d3,
            frac * d3,
        )
    }

    #[test]
    fn vacuum_has_no_modes() {
        let v = StackOptics::vacuum(1.0, 0.5);
        assert!(find_all_roots(&v).unwrap().is_empty());
        assert!(guided_interval(&v).is_none());
    }

    #[test]
    fn positive_index_guide_has_no_surface_modes() {
        let o = StackOptics::new(
            Medium::real(1.0, 1.0),
            Medium::real(1.0, 1.0),
            Medium::real(2.0, 2.0),
            1.0,
            0.25,
        );
        for pol in Polarization::BOTH {
            assert!(find_surface_roots(&o, pol).unwrap().is_empty());
        }
        // a thick regular guide does have guided modes
        assert!(
            !find_guided_roots(&o.with_geometry(3.0, 0.75), Polarization::P)
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn single_mode_window() {
        assert!(find_guided_roots(&nri(0.4, 0.25), Polarization::P)
            .unwrap()
            .is_empty());
        assert_eq!(
            find_guided_roots(&nri(1.2, 0.25), Polarization::P)
                .unwrap()
                .len(),
            1
        );
        assert!(find_guided_roots(&nri(2.5, 0.25), Polarization::P)
            .unwrap()
            .is_empty());
        assert_eq!(
            find_guided_roots(&nri(3.4, 0.25), Polarization::P)
                .unwrap()
                .len(),
            2
        );
    }

    #[test]
    fn roots_are_roots() {
        for d in [0.8, 1.5, 3.4, 4.2, 5.3] {
            let o = nri(d, 0.25);
            for r in find_all_roots(&o).unwrap() {
                let dv = TransverseContext::real(&o, r.k).d_factor(r.pol, d).unwrap();
                assert!(dv.norm() < 1e-10, "d={d} {r:?} |D|={}", dv.norm());
                assert!(r.residue_x >= 0.0 && r.residue_z >= 0.0);
            }
        }
    }

    #[test]
    fn cutoff_thickness() {
        let d = surface_cutoff_thickness(&nri(1.0, 0.5)).unwrap();
        assert!((d - 2.0 / (1.99 * 2.9601f64.sqrt())).abs() < 1e-12);
        assert!((d - 0.584).abs() < 1e-3);
        let pos = StackOptics::new(
            Medium::real(1.0, 1.0),
            Medium::real(1.0, 1.0),
            Medium::real(2.0, 2.0),
            1.0,
            0.5,
        );
        assert!(surface_cutoff_thickness(&pos).is_err());
        let mut near = nri(1.0, 0.5);
        let mut prev = 0.0;
        for excess in [1e-1, 1e-3, 1e-6] {
            near.core = Medium::real(-1.0, -(1.0 + excess));
            let d = surface_cutoff_thickness(&near).unwrap();
            assert!(d > prev);
            prev = d;
        }
    }

    #[test]
    fn near_roots_vanish_above_cutoff() {
        let below = find_surface_roots(&nri(0.5, 0.25), Polarization::P).unwrap();
        assert!(below.iter().any(|r| r.class == ModeClass::SurfaceNear));
        let above = find_surface_roots(&nri(0.65, 0.25), Polarization::P).unwrap();
        assert!(above.iter().all(|r| r.class != ModeClass::SurfaceNear));
    }

    #[test]
    fn thin_film_root() {
        let o = nri(0.2, 0.25);
        let roots = find_surface_roots(&o, Polarization::P).unwrap();
        let target = (2.99f64 / 0.99).ln();
        assert!((thin_film_product(&o) - target).abs() < 1e-12);
        assert!(
            roots.iter().any(|r| (r.k * 0.2 / target - 1.0).abs() < 0.1),
            "{roots:?}"
        );
    }

    #[test]
    fn guided_formula_matches_residue() {
        for d in [0.8, 1.2, 3.3, 4.5] {
            let o = nri(d, 0.25);
            let roots = find_guided_roots(&o, Polarization::P).unwrap();
            let terms = guided_terms_pz(&o, &roots, PhaseFold::Pi).unwrap();
            for (r, t) in roots.iter().zip(terms) {
                let res = residue_rate(&o, r, Component::Z).unwrap();
                assert!(
                    (t / res - 1.0).abs() < 1e-6,
                    "d={d} formula {t} residue {res}"
                );
            }
        }
    }

    #[test]
    fn surface_formula_matches_residue() {
        for d in [0.1, 0.3, 0.5] {
            let o = nri(d, 0.25);
            let roots = find_surface_roots(&o, Polarization::P).unwrap();
            assert!(!roots.is_empty());
            let terms = surface_terms_pz(&o, &roots).unwrap();
            for (r, t) in roots.iter().zip(terms) {
                let res = residue_rate(&o, r, Component::Z).unwrap();
                assert!(
                    (t / res - 1.0).abs() < 1e-6,
                    "d={d} formula {t} residue {res}"
                );
            }
        }
    }

    #[test]
    fn node_rule_at_centre() {
        for d in [1.0, 3.4, 4.0, 5.3] {
            let o = nri(d, 0.5);
            let roots = find_guided_roots(&o, Polarization::P).unwrap();
            let terms = guided_terms_pz(&o, &roots, PhaseFold::Pi).unwrap();
            for (r, t) in roots.iter().zip(terms) {
                if r.phase_index.unwrap().rem_euclid(2) == 1 {
                    assert!(t < 1e-8, "{r:?} {t}");
                    assert!(r.residue_z < 1e-8);
                }
            }
        }
    }

    #[test]
    fn critical_points_are_double_roots() {
        let o = nri(1.0, 0.25);
        let crit = critical_thicknesses(&o, Polarization::P, 0.1, 6.0).unwrap();
        assert!(!crit.is_empty());
        assert!(
            crit.iter().any(|c| (c.d3 - 3.0637).abs() < 2e-3),
            "{crit:?}"
        );
        for c in &crit {
            let oc = o.with_geometry(c.d3, c.d3 / 4.0);
            let k = C64::new(c.k, 0.0);
            let dv = TransverseContext::new(&oc, k)
                .d_factor(Polarization::P, c.d3)
                .unwrap();
            let dd = d_derivative(&oc, Polarization::P, k).unwrap();
            assert!(dv.norm() < 1e-8 && dd.norm() < 1e-5, "{c:?} D={dv} D'={dd}");
        }
    }

    #[test]
    fn lossy_poles_track_lossless_roots() {
        let mut o = nri(1.2, 0.25);
        let r = find_guided_roots(&o, Polarization::P).unwrap();
        o.core = Medium::new(C64::new(-1.99, 1e-6), C64::new(-1.99, 1e-6));
        let poles = complex_poles(&o, Polarization::P, ModeClass::Guided).unwrap();
        assert_eq!(poles.len(), r.len());
        for (p, r) in poles.iter().zip(&r) {
            assert!((p.k.re - r.k).abs() < 1e-4);
            assert!((p.weight_z / r.residue_z - 1.0).abs() < 1e-3);
        }
    }
}
