//! Decay rates of the two V-transitions and their interference parameter.
//!
//! Both excited levels couple to the ground level through the dipole vectors
//! `e1,2 = (ez +- i ex) / sqrt(2)`. Class entries produced by
//! [`crate::green`] already carry the 1/2 projection weight, so an entry of
//! 0.5 on each component is the free-space rate.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::green::{
    self, ClassMethod, GreenBreakdown, GreenError, GreenOptions, RateClass, RateComponents,
};
use crate::materials::{enforce_ordering, AtomPosition, LayerStack, MaterialError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Green(#[from] GreenError),
    #[error("{class} {entry} entry is not finite")]
    NonFinite {
        class: &'static str,
        entry: &'static str,
    },
    #[error("{class} {entry} entry is negative: {value:e}")]
    Negative {
        class: &'static str,
        entry: &'static str,
        value: f64,
    },
    #[error("total rate vanishes, kappa is undefined")]
    Quenched,
    #[error("kappa = {0} lies outside [-1, 1] beyond rounding")]
    KappaOutOfRange(f64),
}

/// Squared projections of one dipole vector plus the cross weight entering
/// the interference term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectionWeights {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Weight of the x response in `e1* . Im G . e2`.
    pub cross_x: f64,
    /// Weight of the z response in `e1* . Im G . e2`.
    pub cross_z: f64,
}

/// Projection weights of `e1` and `e2`.
pub fn dipole_projection_weights() -> [ProjectionWeights; 2] {
    let w = ProjectionWeights {
        x: 0.5,
        y: 0.0,
        z: 0.5,
        cross_x: -0.5,
        cross_z: 0.5,
    };
    [w, w]
}

/// Rates by class, polarization and component, plus the derived totals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateBreakdown {
    pub entries: BTreeMap<RateClass, RateComponents>,
    pub methods: BTreeMap<RateClass, ClassMethod>,
    pub gamma_x: f64,
    pub gamma_z: f64,
    pub gamma_n: f64,
    pub kappa: f64,
    /// Non-modal evanescent remainder of lossy stacks; not part of `gamma_n`.
    pub background: RateComponents,
    pub error_estimate: f64,
    pub converged: bool,
}

impl RateBreakdown {
    pub fn class(&self, class: RateClass) -> RateComponents {
        self.entries.get(&class).copied().unwrap_or_default()
    }

    pub fn method(&self, class: RateClass) -> ClassMethod {
        self.methods
            .get(&class)
            .copied()
            .unwrap_or(ClassMethod::Empty)
    }

    /// Near and far surface classes together.
    pub fn surface(&self) -> RateComponents {
        let mut s = self.class(RateClass::SurfaceNear);
        s.add(&self.class(RateClass::SurfaceFar));
        s
    }
}

fn check_entry(
    class: &'static str,
    entry: &'static str,
    value: f64,
    floor: f64,
) -> Result<(), RateError> {
    if !value.is_finite() {
        return Err(RateError::NonFinite { class, entry });
    }
    if value < -floor {
        return Err(RateError::Negative {
            class,
            entry,
            value,
        });
    }
    Ok(())
}

/// `(gz - gx) / norm`, clamped to [-1, 1] only for rounding-size overshoot.
pub fn interference(gamma_z: f64, gamma_x: f64, norm: f64) -> Result<f64, RateError> {
    if !(norm > 0.0) {
        return Err(RateError::Quenched);
    }
    let [w, _] = dipole_projection_weights();
    let cross = w.cross_z / w.z * gamma_z + w.cross_x / w.x * gamma_x;
    let kappa = cross / norm;
    if kappa.abs() > 1.0 + 1e-9 {
        return Err(RateError::KappaOutOfRange(kappa));
    }
    Ok(kappa.clamp(-1.0, 1.0))
}

/// Sums the class entries and forms the degenerate-transition kappa.
pub fn assemble(raw: &GreenBreakdown) -> Result<RateBreakdown, RateError> {
    let mut entries = BTreeMap::new();
    let mut methods = BTreeMap::new();
    let mut total = RateComponents::default();
    for class in RateClass::ALL {
        let c = raw.class(class);
        entries.insert(class, c);
        methods.insert(class, raw.method(class));
        total.add(&c);
    }
    // passive media: allow only quadrature-size negative excursions
    let floor = 1e-9 * total.total().abs().max(1.0);
    for (class, c) in &entries {
        let label = class.label();
        check_entry(label, "x_p", c.x_p, floor)?;
        check_entry(label, "x_s", c.x_s, floor)?;
        check_entry(label, "z_p", c.z_p, floor)?;
    }
    let (gamma_x, gamma_z) = (total.x(), total.z());
    let gamma_n = gamma_x + gamma_z;
    let kappa = interference(gamma_z, gamma_x, gamma_n)?;
    Ok(RateBreakdown {
        entries,
        methods,
        gamma_x,
        gamma_z,
        gamma_n,
        kappa,
        background: raw.background,
        error_estimate: raw.error_estimate,
        converged: raw.converged,
    })
}

/// Full breakdown of `stack` at `omega`, after the layer-ordering check.
pub fn evaluate(
    stack: &LayerStack,
    omega: f64,
    opts: &GreenOptions,
) -> Result<RateBreakdown, RateError> {
    enforce_ordering(stack, omega)?;
    let optics = stack.optics(omega)?;
    let absorption = stack
        .core
        .absorption()
        .max(stack.lower.absorption())
        .max(stack.upper.absorption());
    let raw = green::total_breakdown(&optics, absorption, opts)?;
    assemble(&raw)
}

/// Rates of a non-degenerate V-atom whose transitions sit at different frequencies.
///
/// Experimental. Lengths in `stack` refer to `reference`; at each transition
/// frequency they are rescaled by `omega_n / reference` so that the physical
/// geometry stays fixed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoChannelRates {
    pub omega: [f64; 2],
    pub gamma: [f64; 2],
    pub kappa: [f64; 2],
    pub breakdowns: [RateBreakdown; 2],
}

pub fn evaluate_two_frequency(
    stack: &LayerStack,
    omegas: [f64; 2],
    reference: f64,
    opts: &GreenOptions,
) -> Result<TwoChannelRates, RateError> {
    let at = |omega: f64| {
        let mut s = *stack;
        let scale = omega / reference;
        s.d3_prime *= scale;
        if let AtomPosition::Absolute(z) = s.atom {
            s.atom = AtomPosition::Absolute(z * scale);
        }
        evaluate(&s, omega, opts)
    };
    let b1 = at(omegas[0])?;
    let b2 = at(omegas[1])?;
    let norm = (b1.gamma_n * b2.gamma_n).sqrt();
    let kappa = [
        interference(b1.gamma_z, b1.gamma_x, norm)?,
        interference(b2.gamma_z, b2.gamma_x, norm)?,
    ];
    Ok(TwoChannelRates {
        omega: omegas,
        gamma: [b1.gamma_n, b2.gamma_n],
        kappa,
        breakdowns: [b1, b2],
    })
}
