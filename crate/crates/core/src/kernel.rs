//! Branch-aware transverse wavenumbers, interface reflection coefficients and
//! the waveguide resonance denominator.
//!
//! All wavenumbers are scaled by `omega / c`. Layer numbering follows the
//! usual convention for this geometry: the lower cladding, the upper cladding
//! and the core sit between them.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::materials::{Medium, StackOptics};

const I: C64 = C64 { re: 0.0, im: 1.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("{pol:?} reflection coefficient has a pole at k = {k}")]
    FresnelPole { pol: Polarization, k: C64 },
    #[error("reflection coefficient {r} is not unimodular (|r| - 1 = {deviation:.3e})")]
    NotUnimodular { r: C64, deviation: f64 },
    #[error("reflection coefficient {r} is not real and <= -1")]
    NotSurfaceReflection { r: C64 },
    #[error("chi denominator vanishes for the {layer:?} layer at k = {k} (mode birth point)")]
    ChiDivergence { layer: Layer, k: C64 },
}

/// TM (`P`) or TE (`S`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    P,
    S,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::P, Polarization::S];

    /// The constitutive parameter entering this polarization's reflection coefficient.
    pub fn response(self, m: &Medium) -> C64 {
        match self {
            Polarization::P => m.eps,
            Polarization::S => m.mu,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Polarization::P => "p",
            Polarization::S => "s",
        }
    }
}

impl std::str::FromStr for Polarization {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "p" | "tm" => Ok(Polarization::P),
            "s" | "te" => Ok(Polarization::S),
            other => Err(format!("unknown polarization '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Lower,
    Upper,
    Core,
}

impl Layer {
    fn index(self) -> usize {
        match self {
            Layer::Lower => 0,
            Layer::Upper => 1,
            Layer::Core => 2,
        }
    }
}

/// How `guided_phase` maps `-arg(r)/2` into its reporting range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseFold {
    /// Reduce modulo pi; keeps `cos(2 phi)` intact.
    #[default]
    Pi,
    /// Reduce modulo pi/2 into `[0, pi/2)`.
    HalfPi,
}

/// z-component of the wavevector in a layer.
///
/// Propagating side (`Re k^2 < Re eta`): principal root of `eta - k^2`,
/// negated for left-handed media. Evanescent side: `i sqrt(k^2 - eta)` for
/// every medium type. Lossy media use the same rules with complex `eta`.
pub fn beta(medium: &Medium, k: C64) -> C64 {
    let eta = medium.eta();
    let k2 = k * k;
    if k2.re < eta.re {
        let s = (eta - k2).sqrt();
        if medium.is_left_handed() {
            -s
        } else {
            s
        }
    } else {
        I * (k2 - eta).sqrt()
    }
}

/// All kernel quantities that depend only on the stack and the in-plane wavenumber.
#[derive(Debug, Clone, Copy)]
pub struct TransverseContext {
    pub k: C64,
    media: [Medium; 3],
    betas: [C64; 3],
}

impl TransverseContext {
    pub fn new(optics: &StackOptics, k: C64) -> Self {
        let media = [optics.lower, optics.upper, optics.core];
        let mut betas = [beta(&media[0], k), beta(&media[1], k), beta(&media[2], k)];
        // bounded fields in the semi-infinite claddings
        for b in betas.iter_mut().take(2) {
            if b.im < 0.0 {
                *b = -*b;
            }
        }
        TransverseContext { k, media, betas }
    }

    pub fn real(optics: &StackOptics, k: f64) -> Self {
        Self::new(optics, C64::new(k, 0.0))
    }

    /// Like [`TransverseContext::new`] but with the core root chosen as the
    /// sign of `sqrt(eta3 - k^2)` nearest `beta3_ref`.
    ///
    /// The branch rule flips sign across `Re k^2 = Re eta3`; derivatives and
    /// Newton steps need a locally analytic `D`, so they continue from a
    /// reference value instead.
    pub fn continued(optics: &StackOptics, k: C64, beta3_ref: C64) -> Self {
        let mut ctx = Self::new(optics, k);
        let s = (ctx.eta(Layer::Core) - k * k).sqrt();
        ctx.betas[2] = if (s - beta3_ref).norm() <= (s + beta3_ref).norm() {
            s
        } else {
            -s
        };
        ctx
    }

    pub fn beta(&self, layer: Layer) -> C64 {
        self.betas[layer.index()]
    }

    pub fn medium(&self, layer: Layer) -> &Medium {
        &self.media[layer.index()]
    }

    pub fn eta(&self, layer: Layer) -> C64 {
        self.medium(layer).eta()
    }

    /// Reflection coefficient for a wave in `from` hitting the interface with `to`.
    pub fn fresnel(&self, pol: Polarization, from: Layer, to: Layer) -> Result<C64, KernelError> {
        let (zi, zj) = (
            pol.response(self.medium(from)),
            pol.response(self.medium(to)),
        );
        let (bi, bj) = (self.beta(from), self.beta(to));
        let num = zj * bi - zi * bj;
        let den = zj * bi + zi * bj;
        if den.norm() <= 1e-300 || den.norm() <= 1e-15 * (zj * bi).norm().max((zi * bj).norm()) {
            if num.norm() == 0.0 {
                return Ok(C64::new(0.0, 0.0));
            }
            return Err(KernelError::FresnelPole { pol, k: self.k });
        }
        Ok(num / den)
    }

    /// `(r31, r32)`: reflections at the lower and upper interface, seen from the core.
    pub fn reflections(&self, pol: Polarization) -> Result<(C64, C64), KernelError> {
        Ok((
            self.fresnel(pol, Layer::Core, Layer::Lower)?,
            self.fresnel(pol, Layer::Core, Layer::Upper)?,
        ))
    }

    /// `D = 1 - r31 r32 exp(2 i beta3 d3)`.
    pub fn d_factor(&self, pol: Polarization, d3: f64) -> Result<C64, KernelError> {
        let (r31, r32) = self.reflections(pol)?;
        Ok(ONE - r31 * r32 * (2.0 * I * self.beta(Layer::Core) * d3).exp())
    }

    /// `(I+, I-)` with `I± = (1 ± r31 e^{2i b3 z0})(1 ± r32 e^{2i b3 (d3 - z0)})`.
    pub fn i_factors(
        &self,
        pol: Polarization,
        z0: f64,
        d3: f64,
    ) -> Result<(C64, C64), KernelError> {
        let (r31, r32) = self.reflections(pol)?;
        let b3 = self.beta(Layer::Core);
        let a = r31 * (2.0 * I * b3 * z0).exp();
        let b = r32 * (2.0 * I * b3 * (d3 - z0)).exp();
        Ok(((ONE + a) * (ONE + b), (ONE - a) * (ONE - b)))
    }

    /// `chi_i = (eta3 - eta_i) / (z_i^2 |b3|^2 + z3^2 |b_i|^2)` on the guided side
    /// (core propagating, cladding evanescent), with `z = eps` for p and `mu` for s.
    pub fn chi(&self, pol: Polarization, layer: Layer) -> Result<C64, KernelError> {
        let zi = pol.response(self.medium(layer));
        let z3 = pol.response(self.medium(Layer::Core));
        let den =
            zi * zi * self.beta(Layer::Core).norm_sqr() + z3 * z3 * self.beta(layer).norm_sqr();
        if den.norm() < 1e-300 {
            return Err(KernelError::ChiDivergence { layer, k: self.k });
        }
        Ok((self.eta(Layer::Core) - self.eta(layer)) / den)
    }

    /// Surface-side counterpart (everything evanescent):
    /// `(eta3 - eta_i) / (z_i^2 |b3|^2 - z3^2 |b_i|^2)`.
    pub fn chi_surface(&self, pol: Polarization, layer: Layer) -> Result<C64, KernelError> {
        let zi = pol.response(self.medium(layer));
        let z3 = pol.response(self.medium(Layer::Core));
        let den =
            zi * zi * self.beta(Layer::Core).norm_sqr() - z3 * z3 * self.beta(layer).norm_sqr();
        if den.norm() < 1e-300 {
            return Err(KernelError::ChiDivergence { layer, k: self.k });
        }
        Ok((self.eta(Layer::Core) - self.eta(layer)) / den)
    }

    /// Whether the homogeneous-core term is removed from the integrand here.
    ///
    /// Only on the evanescent side of the core, where that term carries no
    /// modal information but makes the integral diverge for a lossy core.
    pub fn subtracts_bulk(&self) -> bool {
        (self.k * self.k).re > self.eta(Layer::Core).re
    }

    /// Denominator and component numerators of the normalized rate density.
    ///
    /// The density is `Im(z / d)` and `Im(x / d)`, scaled so that free space
    /// yields one half per component after integration over `k`.
    pub fn spectral(&self, pol: Polarization, z0: f64, d3: f64) -> Result<Spectral, KernelError> {
        self.spectral_with(pol, z0, d3, self.subtracts_bulk())
    }

    /// [`TransverseContext::spectral`] with explicit control over the bulk subtraction.
    pub fn spectral_with(
        &self,
        pol: Polarization,
        z0: f64,
        d3: f64,
        subtract_bulk: bool,
    ) -> Result<Spectral, KernelError> {
        let d = self.d_factor(pol, d3)?;
        let (mut ip, mut im) = self.i_factors(pol, z0, d3)?;
        if subtract_bulk {
            ip -= d;
            im -= d;
        }
        let core = self.medium(Layer::Core);
        let b3 = self.beta(Layer::Core);
        let eta3 = core.eta();
        let c = 3.0 * I * core.mu * self.k / (8.0 * eta3 * b3);
        let k2 = self.k * self.k;
        Ok(match pol {
            Polarization::P => Spectral {
                d,
                z: c * 2.0 * k2 * ip,
                x: c * b3 * b3 * im,
            },
            Polarization::S => Spectral {
                d,
                z: C64::new(0.0, 0.0),
                x: c * eta3 * ip,
            },
        })
    }

    /// Half the round-trip phase, `beta3 d3 + (arg r31 + arg r32) / 2`.
    ///
    /// On the guided side of a lossless stack `D = 1 - exp(2 i h)`, so modes
    /// sit at `h = m pi`. Each `arg r` stays inside `(-pi, 0]` there, so the
    /// function is continuous in `k`.
    pub fn half_phase(&self, pol: Polarization, d3: f64) -> Result<f64, KernelError> {
        let (r31, r32) = self.reflections(pol)?;
        Ok(self.beta(Layer::Core).re * d3 + 0.5 * (r31.arg() + r32.arg()))
    }
}

/// Rate-density pieces for one polarization at one `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectral {
    pub d: C64,
    pub z: C64,
    pub x: C64,
}

impl Spectral {
    /// `(dGamma_z, dGamma_x)`.
    pub fn density(&self) -> (f64, f64) {
        ((self.z / self.d).im, (self.x / self.d).im)
    }
}

/// `phi` in `r = exp(-2 i phi)` for a unimodular reflection coefficient.
pub fn guided_phase(r: C64, fold: PhaseFold) -> Result<f64, KernelError> {
    let deviation = r.norm() - 1.0;
    if deviation.abs() > 1e-6 {
        return Err(KernelError::NotUnimodular { r, deviation });
    }
    let phi = -0.5 * r.arg();
    let period = match fold {
        PhaseFold::Pi => PI,
        PhaseFold::HalfPi => FRAC_PI_2,
    };
    Ok(phi.rem_euclid(period))
}

/// `phi` in `r = -exp(2 phi)` for a real reflection coefficient `<= -1`.
pub fn surface_phase(r: C64) -> Result<f64, KernelError> {
    let tol = 1e-9 * r.norm().max(1.0);
    if r.im.abs() > tol || r.re > -1.0 + 1e-12 {
        return Err(KernelError::NotSurfaceReflection { r });
    }
    Ok(0.5 * (-r.re).max(1.0).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nri_core(d3: f64, z0: f64) -> StackOptics {
        StackOptics::new(
            Medium::real(1.0, 1.0),
            Medium::real(1.0, 1.0),
            Medium::real(-1.99, -1.99),
            d3,
            z0,
        )
    }

    #[test]
    fn beta_branches() {
        let vac = Medium::real(1.0, 1.0);
        let b = beta(&vac, C64::new(0.5, 0.0));
        assert!((b - C64::new(0.75f64.sqrt(), 0.0)).norm() < 1e-15);
        let b = beta(&vac, C64::new(1.5, 0.0));
        assert!((b - C64::new(0.0, 1.25f64.sqrt())).norm() < 1e-15);
        let nri = Medium::real(-1.99, -1.99);
        let b = beta(&nri, C64::new(0.5, 0.0));
        assert!((b.re + 1.926_161).abs() < 1e-6 && b.im == 0.0, "{b}");
        // evanescent rule ignores handedness
        let b = beta(&nri, C64::new(2.5, 0.0));
        assert!(b.re == 0.0 && b.im > 0.0);
    }

    #[test]
    fn beta_squares_back() {
        let lossy = Medium::new(C64::new(-2.38, 0.0219), C64::new(-1.48, 0.0161));
        for k in [0.1, 0.9, 1.5, 1.9, 2.5, 10.0] {
            let b = beta(&lossy, C64::new(k, 0.0));
            let back = lossy.eta() - C64::new(k * k, 0.0);
            assert!((b * b - back).norm() < 1e-12 * back.norm().max(1.0));
            // passive lossy core: fields decay along their direction of travel
            assert!(b.im > 0.0, "k={k} b={b}");
        }
    }

    #[test]
    fn lossy_branch_approaches_lossless_rule() {
        let k = C64::new(1.2, 0.0);
        let lossless = beta(&Medium::real(-1.99, -1.99), k);
        let mut prev = f64::INFINITY;
        for g in [1e-4, 1e-6, 1e-8] {
            let m = Medium::new(C64::new(-1.99, g), C64::new(-1.99, g));
            let dist = (beta(&m, k) - lossless).norm();
            assert!(dist < prev);
            prev = dist;
        }
        assert!(prev < 1e-7);
    }

    #[test]
    fn identical_layers_do_not_reflect() {
        let optics = StackOptics::new(
            Medium::real(2.0, 1.0),
            Medium::real(2.0, 1.0),
            Medium::real(2.0, 1.0),
            1.0,
            0.5,
        );
        let ctx = TransverseContext::real(&optics, 0.7);
        for pol in Polarization::BOTH {
            let (r31, r32) = ctx.reflections(pol).unwrap();
            assert_eq!(r31, C64::new(0.0, 0.0));
            assert_eq!(r32, C64::new(0.0, 0.0));
            assert_eq!(ctx.d_factor(pol, 1.0).unwrap(), ONE);
            assert_eq!(ctx.i_factors(pol, 0.5, 1.0).unwrap(), (ONE, ONE));
        }
    }

    #[test]
    fn impedance_matched_nri_normal_incidence() {
        let ctx = TransverseContext::real(&nri_core(1.0, 0.5), 0.0);
        let r = ctx
            .fresnel(Polarization::P, Layer::Core, Layer::Lower)
            .unwrap();
        assert!(r.norm() < 1e-15);
    }

    #[test]
    fn reciprocity() {
        let optics = StackOptics::new(
            Medium::real(1.5, 1.0),
            Medium::real(1.0, 1.0),
            Medium::new(C64::new(-2.38, 0.0219), C64::new(-1.48, 0.0161)),
            1.0,
            0.3,
        );
        for i in 1..60 {
            let ctx = TransverseContext::real(&optics, 0.05 * i as f64 + 0.013);
            for pol in Polarization::BOTH {
                for other in [Layer::Lower, Layer::Upper] {
                    let a = ctx.fresnel(pol, Layer::Core, other).unwrap();
                    let b = ctx.fresnel(pol, other, Layer::Core).unwrap();
                    assert!((a + b).norm() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn reflectivity_can_exceed_one_with_nri() {
        let optics = nri_core(1.0, 0.25);
        let over = (0..400).map(|i| 2.0 + 0.02 * i as f64).any(|k| {
            let ctx = TransverseContext::real(&optics, k);
            ctx.fresnel(Polarization::P, Layer::Core, Layer::Upper)
                .unwrap()
                .norm()
                > 1.0
        });
        assert!(over);
    }

    #[test]
    fn positive_index_propagating_reflectivity_bounded() {
        let optics = StackOptics::new(
            Medium::real(1.0, 1.0),
            Medium::real(1.0, 1.0),
            Medium::real(2.25, 1.0),
            1.0,
            0.25,
        );
        for i in 1..100 {
            let ctx = TransverseContext::real(&optics, 0.0099 * i as f64);
            for pol in Polarization::BOTH {
                assert!(ctx.fresnel(pol, Layer::Core, Layer::Lower).unwrap().norm() <= 1.0 + 1e-14);
            }
        }
    }

    #[test]
    fn zero_thickness_d_factor() {
        let ctx = TransverseContext::real(&nri_core(1.0, 0.5), 3.0);
        let (r31, r32) = ctx.reflections(Polarization::P).unwrap();
        let d = ctx.d_factor(Polarization::P, 0.0).unwrap();
        assert!((d - (ONE - r31 * r32)).norm() < 1e-15);
    }

    #[test]
    fn guided_side_d_is_phase_only() {
        // lossless guided side: D = 1 - exp(2 i h)
        let optics = nri_core(2.0, 0.5);
        for k in [1.1, 1.4, 1.8] {
            let ctx = TransverseContext::real(&optics, k);
            for pol in Polarization::BOTH {
                let h = ctx.half_phase(pol, 2.0).unwrap();
                let d = ctx.d_factor(pol, 2.0).unwrap();
                assert!((d - (ONE - (2.0 * I * h).exp())).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn symmetric_midpoint_i_factors() {
        let optics = nri_core(2.0, 1.0);
        let ctx = TransverseContext::real(&optics, 1.3);
        let (r31, r32) = ctx.reflections(Polarization::P).unwrap();
        let b3 = ctx.beta(Layer::Core);
        let a = ONE + r31 * (2.0 * I * b3 * 1.0).exp();
        let b = ONE + r32 * (2.0 * I * b3 * 1.0).exp();
        assert!((a - b).norm() < 1e-15);
    }

    #[test]
    fn phases() {
        assert_eq!(guided_phase(ONE, PhaseFold::Pi).unwrap(), 0.0);
        assert!((guided_phase(-ONE, PhaseFold::Pi).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!(matches!(
            guided_phase(C64::new(0.5, 0.0), PhaseFold::Pi),
            Err(KernelError::NotUnimodular { .. })
        ));
        let r = C64::from_polar(1.0, -0.5 * PI);
        assert!((guided_phase(r, PhaseFold::Pi).unwrap() - 0.25 * PI).abs() < 1e-12);
        assert!((guided_phase(r, PhaseFold::HalfPi).unwrap() - 0.25 * PI).abs() < 1e-12);
        // the two folds differ once -arg(r)/2 leaves [0, pi/2)
        let r = C64::from_polar(1.0, 0.5 * PI);
        assert!((guided_phase(r, PhaseFold::Pi).unwrap() - 0.75 * PI).abs() < 1e-12);
        assert!((guided_phase(r, PhaseFold::HalfPi).unwrap() - 0.25 * PI).abs() < 1e-12);

        assert_eq!(surface_phase(-ONE).unwrap(), 0.0);
        let r = C64::new(-(2.0f64).exp(), 0.0);
        assert!((surface_phase(r).unwrap() - 1.0).abs() < 1e-14);
        assert!(surface_phase(C64::new(0.5, 0.0)).is_err());
        assert!(surface_phase(C64::new(-2.0, 0.1)).is_err());
    }

    #[test]
    fn guided_phase_inside_guided_region() {
        let optics = nri_core(3.0, 0.75);
        let ctx = TransverseContext::real(&optics, 1.5);
        let r32 = ctx
            .fresnel(Polarization::P, Layer::Core, Layer::Upper)
            .unwrap();
        let phi = guided_phase(r32, PhaseFold::Pi).unwrap();
        assert!(phi > 0.0 && phi < FRAC_PI_2);
        assert_eq!(phi, guided_phase(r32, PhaseFold::HalfPi).unwrap());
    }

    #[test]
    fn chi_values() {
        let same = StackOptics::new(
            Medium::real(2.0, 1.0),
            Medium::real(1.0, 1.0),
            Medium::real(2.0, 1.0),
            1.0,
            0.5,
        );
        let ctx = TransverseContext::real(&same, 1.2);
        assert_eq!(
            ctx.chi(Polarization::P, Layer::Lower).unwrap(),
            C64::new(0.0, 0.0)
        );

        let ctx = TransverseContext::real(&nri_core(1.0, 0.5), 1.2);
        // (3.9601 - 1) / (1 * 2.5201 + 3.9601 * 0.44)
        let chi = ctx.chi(Polarization::P, Layer::Lower).unwrap();
        assert!((chi.re - 2.9601 / (2.5201 + 3.9601 * 0.44)).abs() < 1e-12);
        assert_eq!(chi.im, 0.0);
        // the matching denominator term is negative for a left-handed core
        let term = ctx.medium(Layer::Lower).eps * ctx.medium(Layer::Core).eps
            / ctx.beta(Layer::Lower).norm()
            * chi;
        assert!(term.re < 0.0);
    }

    #[test]
    fn continued_branch_is_continuous_across_core_light_line() {
        let optics = nri_core(1.0, 0.5);
        let k = C64::new(1.3, 0.0);
        let ctx = TransverseContext::new(&optics, k);
        let cont = TransverseContext::continued(&optics, k, ctx.beta(Layer::Core));
        assert_eq!(ctx.beta(Layer::Core), cont.beta(Layer::Core));
        // lossy core: the branch point leaves the real axis and both agree
        let lossy = StackOptics::new(
            Medium::real(1.0, 1.0),
            Medium::real(1.0, 1.0),
            Medium::new(C64::new(-1.99, 0.02), C64::new(-1.99, 0.02)),
            1.0,
            0.5,
        );
        let edge = lossy.core.eta().re.sqrt();
        let below = TransverseContext::new(&lossy, C64::new(edge - 1e-4, 0.0)).beta(Layer::Core);
        let above = C64::new(edge + 1e-4, 0.0);
        let rule = TransverseContext::new(&lossy, above).beta(Layer::Core);
        let cont = TransverseContext::continued(&lossy, above, below).beta(Layer::Core);
        assert!((cont - below).norm() < 0.01);
        assert!((cont - rule).norm() < 1e-12);
    }

    #[test]
    fn density_is_even_in_core_root() {
        let optics = StackOptics::new(
            Medium::real(1.0, 1.0),
            Medium::real(1.2, 1.0),
            Medium::new(C64::new(-1.99, 1e-3), C64::new(-1.99, 1e-3)),
            0.8,
            0.3,
        );
        for k in [0.4, 1.2, 1.7] {
            let kc = C64::new(k, 0.0);
            let a = TransverseContext::new(&optics, kc);
            let b = TransverseContext::continued(&optics, kc, -a.beta(Layer::Core));
            assert!((a.beta(Layer::Core) + b.beta(Layer::Core)).norm() < 1e-14);
            for pol in Polarization::BOTH {
                let (za, xa) = a.spectral(pol, 0.3, 0.8).unwrap().density();
                let (zb, xb) = b.spectral(pol, 0.3, 0.8).unwrap().density();
                assert!((za - zb).abs() < 1e-12 * za.abs().max(1.0));
                assert!((xa - xb).abs() < 1e-12 * xa.abs().max(1.0));
            }
        }
    }

    #[test]
    fn free_space_density() {
        // plane-wave angular spectrum of a dipole in vacuum
        let optics = StackOptics::vacuum(1.0, 0.5);
        for k in [0.1, 0.5, 0.9] {
            let ctx = TransverseContext::real(&optics, k);
            let p = ctx.spectral(Polarization::P, 0.5, 1.0).unwrap().density();
            let s = ctx.spectral(Polarization::S, 0.5, 1.0).unwrap().density();
            let b = (1.0 - k * k).sqrt();
            assert!((p.0 - 0.75 * k.powi(3) / b).abs() < 1e-13);
            assert!((p.1 - 0.375 * k * b).abs() < 1e-13);
            assert!((s.1 - 0.375 * k / b).abs() < 1e-13);
            assert_eq!(s.0, 0.0);
        }
        // evanescent side of free space contributes nothing
        let ctx = TransverseContext::real(&optics, 1.7);
        let p = ctx.spectral(Polarization::P, 0.5, 1.0).unwrap().density();
        assert!(p.0.abs() < 1e-15 && p.1.abs() < 1e-15);
    }

    #[test]
    fn chi_divergence_flagged() {
        // both betas vanish when the core index matches and k sits on the light line
        let optics = StackOptics::new(
            Medium::real(1.0, 1.0),
            Medium::real(1.0, 1.0),
            Medium::real(1.0, 1.0),
            1.0,
            0.5,
        );
        let ctx = TransverseContext::real(&optics, 1.0);
        assert!(matches!(
            ctx.chi(Polarization::P, Layer::Lower),
            Err(KernelError::ChiDivergence { .. })
        ));
    }
}
