//! Master-equation dynamics of the V-type atom with cross-damping terms.
//!
//! Basis order is `|1>, |2>` (excited) and `|3>` (ground). With the generator
//! written as `sum_n G_n (rho_nn A33 - A_nn rho) + sqrt(G1 G2) sum_n k_n
//! (A_mn rho - rho_nm A33) + h.c.`, populations decay at `2 G_n`.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rates::RateBreakdown;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("time step {dt} exceeds the stability limit {limit}")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("trace drifted by {drift:e} at t = {t}")]
    TraceDrift { t: f64, drift: f64 },
    #[error("negative eigenvalue {value:e} at t = {t}")]
    Positivity { t: f64, value: f64 },
    #[error("no convergence after {halvings} step halvings (change {change:e})")]
    NoConvergence { halvings: usize, change: f64 },
}

/// Decay constants and interference strengths of the two channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgcParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub kappa1: f64,
    pub kappa2: f64,
}

impl SgcParams {
    pub fn degenerate(gamma: f64, kappa: f64) -> Self {
        SgcParams {
            gamma1: gamma,
            gamma2: gamma,
            kappa1: kappa,
            kappa2: kappa,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        for (name, g) in [("gamma1", self.gamma1), ("gamma2", self.gamma2)] {
            if !(g >= 0.0 && g.is_finite()) {
                return Err(DynamicsError::InvalidParams(format!(
                    "{name} must be finite and >= 0, got {g}"
                )));
            }
        }
        for (name, k) in [("kappa1", self.kappa1), ("kappa2", self.kappa2)] {
            if !(k.abs() <= 1.0) {
                return Err(DynamicsError::InvalidParams(format!(
                    "{name} must lie in [-1, 1], got {k}"
                )));
            }
        }
        Ok(())
    }

    pub fn max_rate(&self) -> f64 {
        self.gamma1.max(self.gamma2)
    }

    /// Excited-manifold decay generator `M`; the excited block evolves as
    /// `-(M rho + rho M^dagger)`.
    fn decay_generator(&self) -> Matrix3<C64> {
        let c = (self.gamma1 * self.gamma2).sqrt();
        let mut m = Matrix3::zeros();
        m[(0, 0)] = C64::new(self.gamma1, 0.0);
        m[(1, 1)] = C64::new(self.gamma2, 0.0);
        m[(0, 1)] = C64::new(-c * self.kappa2, 0.0);
        m[(1, 0)] = C64::new(-c * self.kappa1, 0.0);
        m
    }
}

impl From<&RateBreakdown> for SgcParams {
    fn from(r: &RateBreakdown) -> Self {
        SgcParams::degenerate(r.gamma_n, r.kappa)
    }
}

/// Hermitian, unit-trace, positive 3x3 density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix3(Matrix3<C64>);

impl DensityMatrix3 {
    pub const HERMITICITY_TOL: f64 = 1e-12;
    pub const TRACE_TOL: f64 = 1e-9;
    pub const EIGEN_TOL: f64 = 1e-8;

    pub fn new(m: Matrix3<C64>) -> Result<Self, DynamicsError> {
        let herm = max_abs(&(m - m.adjoint()));
        if herm > Self::HERMITICITY_TOL {
            return Err(DynamicsError::InvalidState(format!(
                "not Hermitian (deviation {herm:e})"
            )));
        }
        let rho = DensityMatrix3(m);
        let drift = (rho.trace() - 1.0).abs();
        if drift > Self::TRACE_TOL {
            return Err(DynamicsError::InvalidState(format!(
                "trace differs from 1 by {drift:e}"
            )));
        }
        let low = rho.min_eigenvalue();
        if low < -Self::EIGEN_TOL {
            return Err(DynamicsError::InvalidState(format!(
                "negative eigenvalue {low:e}"
            )));
        }
        Ok(rho)
    }

    /// Projector on a normalized copy of `psi`.
    pub fn pure(psi: Vector3<C64>) -> Result<Self, DynamicsError> {
        let n = psi.norm();
        if !(n > 0.0) {
            return Err(DynamicsError::InvalidState("zero state vector".into()));
        }
        let psi = psi / C64::new(n, 0.0);
        Self::new(psi * psi.adjoint())
    }

    pub fn ground() -> Self {
        Self::basis(2)
    }

    /// `|n><n|` for `n` in 0..3.
    pub fn basis(n: usize) -> Self {
        let mut m = Matrix3::zeros();
        m[(n, n)] = C64::new(1.0, 0.0);
        DensityMatrix3(m)
    }

    /// Pure state `a |1> + b |2>` (normalized).
    pub fn excited_superposition(a: C64, b: C64) -> Result<Self, DynamicsError> {
        Self::pure(Vector3::new(a, b, C64::new(0.0, 0.0)))
    }

    pub fn matrix(&self) -> &Matrix3<C64> {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn excited_population(&self) -> f64 {
        self.0[(0, 0)].re + self.0[(1, 1)].re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

fn max_abs(m: &Matrix3<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Time derivative of `rho`.
pub fn rhs(rho: &Matrix3<C64>, params: &SgcParams) -> Matrix3<C64> {
    let m = params.decay_generator();
    let mut out = -(m * rho + rho * m.adjoint());
    let c = (params.gamma1 * params.gamma2).sqrt();
    let coh = rho[(0, 1)] + rho[(1, 0)];
    out[(2, 2)] += C64::new(
        2.0 * params.gamma1 * rho[(0, 0)].re + 2.0 * params.gamma2 * rho[(1, 1)].re,
        0.0,
    ) - c * (params.kappa1 + params.kappa2) * coh;
    out
}

fn rk4_step(rho: &Matrix3<C64>, params: &SgcParams, dt: f64) -> Matrix3<C64> {
    let h = C64::new(dt, 0.0);
    let half = C64::new(0.5 * dt, 0.0);
    let k1 = rhs(rho, params);
    let k2 = rhs(&(rho + k1 * half), params);
    let k3 = rhs(&(rho + k2 * half), params);
    let k4 = rhs(&(rho + k3 * h), params);
    let next = rho + (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * (h / 6.0);
    (next + next.adjoint()) * C64::new(0.5, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub rho11: f64,
    pub rho22: f64,
    pub rho33: f64,
    pub re_rho12: f64,
    pub im_rho12: f64,
}

impl Sample {
    fn of(t: f64, rho: &Matrix3<C64>) -> Self {
        Sample {
            t,
            rho11: rho[(0, 0)].re,
            rho22: rho[(1, 1)].re,
            rho33: rho[(2, 2)].re,
            re_rho12: rho[(0, 1)].re,
            im_rho12: rho[(0, 1)].im,
        }
    }

    pub fn abs_rho12(&self) -> f64 {
        self.re_rho12.hypot(self.im_rho12)
    }

    pub fn excited(&self) -> f64 {
        self.rho11 + self.rho22
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub final_state: DensityMatrix3,
    pub max_trace_drift: f64,
    pub min_eigenvalue: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    /// Record every `sample_every` steps (and always the last step).
    pub sample_every: usize,
    /// Check positivity every this many steps; 0 disables the check.
    pub positivity_every: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            sample_every: 1,
            positivity_every: 1,
        }
    }
}

/// Fixed-step fourth-order Runge-Kutta integration up to `t_end`.
///
/// The trace is monitored but never renormalized.
pub fn evolve(
    rho0: &DensityMatrix3,
    params: &SgcParams,
    t_end: f64,
    dt: f64,
    opts: &EvolveOptions,
) -> Result<Trajectory, DynamicsError> {
    params.validate()?;
    if !(dt > 0.0 && t_end >= 0.0 && dt.is_finite() && t_end.is_finite()) {
        return Err(DynamicsError::InvalidParams(format!(
            "need dt > 0 and t_end >= 0, got dt={dt}, t_end={t_end}"
        )));
    }
    let limit = if params.max_rate() > 0.0 {
        0.01 / params.max_rate()
    } else {
        f64::INFINITY
    };
    if dt > limit * (1.0 + 1e-12) {
        return Err(DynamicsError::StepTooLarge { dt, limit });
    }
    let steps = (t_end / dt).round() as usize;
    let mut rho = rho0.0;
    let mut samples = vec![Sample::of(0.0, &rho)];
    let mut max_drift: f64 = 0.0;
    let mut min_eig = rho0.min_eigenvalue();
    let every = opts.sample_every.max(1);
    for n in 1..=steps {
        rho = rk4_step(&rho, params, dt);
        let t = n as f64 * dt;
        let drift = (rho.trace().re - 1.0).abs();
        max_drift = max_drift.max(drift);
        if drift > 1e-6 {
            return Err(DynamicsError::TraceDrift { t, drift });
        }
        if opts.positivity_every > 0 && (n % opts.positivity_every == 0 || n == steps) {
            let low = DensityMatrix3(rho).min_eigenvalue();
            min_eig = min_eig.min(low);
            if low < -DensityMatrix3::EIGEN_TOL {
                return Err(DynamicsError::Positivity { t, value: low });
            }
        }
        if n % every == 0 || n == steps {
            samples.push(Sample::of(t, &rho));
        }
    }
    Ok(Trajectory {
        samples,
        final_state: DensityMatrix3(rho),
        max_trace_drift: max_drift,
        min_eigenvalue: min_eig,
        steps,
    })
}

/// Halves `dt` until the final populations change by less than `tol`.
pub fn evolve_converged(
    rho0: &DensityMatrix3,
    params: &SgcParams,
    t_end: f64,
    dt: f64,
    tol: f64,
    max_halvings: usize,
) -> Result<(Trajectory, f64), DynamicsError> {
    let opts = EvolveOptions {
        sample_every: usize::MAX,
        positivity_every: 0,
    };
    let pops = |t: &Trajectory| {
        let s = t
            .samples
            .last()
            .copied()
            .unwrap_or(Sample::of(0.0, &t.final_state.0));
        [s.rho11, s.rho22, s.rho33]
    };
    let mut dt = dt;
    let mut coarse = evolve(rho0, params, t_end, dt, &opts)?;
    let mut change = f64::INFINITY;
    for _ in 0..max_halvings {
        let fine = evolve(rho0, params, t_end, 0.5 * dt, &opts)?;
        change = pops(&coarse)
            .iter()
            .zip(pops(&fine))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        dt *= 0.5;
        coarse = fine;
        if change < tol {
            return Ok((coarse, dt));
        }
    }
    Err(DynamicsError::NoConvergence {
        halvings: max_halvings,
        change,
    })
}

/// Eigen-decomposition of the excited-manifold decay matrix `2 M`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DarkStateAnalysis {
    /// Ascending population decay rates.
    pub eigenvalues: [f64; 2],
    /// Amplitudes on `|1>, |2>` of the matching eigenvectors.
    pub eigenvectors: [[f64; 2]; 2],
}

impl DarkStateAnalysis {
    /// Slowest-decaying superposition.
    pub fn dark(&self) -> [f64; 2] {
        self.eigenvectors[0]
    }
}

/// Degenerate-kappa decay matrix `[[2 G1, -2 c k], [-2 c k, 2 G2]]` with `c = sqrt(G1 G2)`.
pub fn dark_state(params: &SgcParams) -> Result<DarkStateAnalysis, DynamicsError> {
    params.validate()?;
    if !(params.gamma1 > 0.0 && params.gamma2 > 0.0) {
        return Err(DynamicsError::InvalidParams(
            "dark-state analysis needs gamma1, gamma2 > 0".into(),
        ));
    }
    let kappa = 0.5 * (params.kappa1 + params.kappa2);
    let c = (params.gamma1 * params.gamma2).sqrt();
    let m = Matrix2::new(
        2.0 * params.gamma1,
        -2.0 * c * kappa,
        -2.0 * c * kappa,
        2.0 * params.gamma2,
    );
    let eig = m.symmetric_eigen();
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vec_of = |i: usize| -> [f64; 2] {
        let v: Vector2<f64> = eig.eigenvectors.column(i).into();
        // deterministic sign: first nonzero amplitude positive
        let s = if v[0].abs() > 1e-14 {
            v[0].signum()
        } else {
            v[1].signum()
        };
        [s * v[0], s * v[1]]
    };
    Ok(DarkStateAnalysis {
        eigenvalues: [eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]],
        eigenvectors: [vec_of(order[0]), vec_of(order[1])],
    })
}

/// Named initial states used by the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    #[value(name = "1")]
    #[serde(rename = "1")]
    Level1,
    #[value(name = "2")]
    #[serde(rename = "2")]
    Level2,
    /// `(|1> + |2>) / sqrt(2)`
    Sym,
    /// `(|1> - |2>) / sqrt(2)`
    Antisym,
}

impl InitialState {
    pub fn state(self) -> DensityMatrix3 {
        let one = C64::new(1.0, 0.0);
        match self {
            InitialState::Level1 => DensityMatrix3::basis(0),
            InitialState::Level2 => DensityMatrix3::basis(1),
            InitialState::Sym => DensityMatrix3::excited_superposition(one, one).expect("nonzero"),
            InitialState::Antisym => {
                DensityMatrix3::excited_superposition(one, -one).expect("nonzero")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_steps() -> EvolveOptions {
        EvolveOptions {
            sample_every: 1,
            positivity_every: 1,
        }
    }

    #[test]
    fn ground_state_is_stationary() {
        let p = SgcParams::degenerate(1.0, -0.7);
        let d = rhs(DensityMatrix3::ground().matrix(), &p);
        assert_eq!(max_abs(&d), 0.0);
    }

    #[test]
    fn uncoupled_decay_is_exponential() {
        let p = SgcParams::degenerate(1.0, 0.0);
        let t = evolve(&DensityMatrix3::basis(0), &p, 2.0, 1e-3, &all_steps()).unwrap();
        for s in t.samples.iter().step_by(100) {
            assert!((s.rho11 - (-2.0 * s.t).exp()).abs() < 1e-10, "t={}", s.t);
        }
    }

    #[test]
    fn dark_state_eigenvalues() {
        let d = dark_state(&SgcParams::degenerate(1.0, 0.0)).unwrap();
        assert_eq!(d.eigenvalues, [2.0, 2.0]);
        for kappa in [-1.0, 1.0] {
            let d = dark_state(&SgcParams::degenerate(1.0, kappa)).unwrap();
            assert!(d.eigenvalues[0].abs() < 1e-12 && (d.eigenvalues[1] - 4.0).abs() < 1e-12);
            let v = d.dark();
            let h = std::f64::consts::FRAC_1_SQRT_2;
            assert!(
                (v[0] - h).abs() < 1e-12 && (v[1] - kappa * h).abs() < 1e-12,
                "{v:?}"
            );
        }
        let d = dark_state(&SgcParams::degenerate(1.0, 0.5)).unwrap();
        assert!((d.eigenvalues[0] - 1.0).abs() < 1e-12 && (d.eigenvalues[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn step_limit_enforced() {
        let p = SgcParams::degenerate(2.0, 0.0);
        let err = evolve(&DensityMatrix3::basis(0), &p, 1.0, 0.01, &all_steps()).unwrap_err();
        assert!(matches!(err, DynamicsError::StepTooLarge { .. }));
    }

    #[test]
    fn invalid_states_rejected() {
        let mut m = Matrix3::zeros();
        m[(0, 0)] = C64::new(0.5, 0.0);
        assert!(DensityMatrix3::new(m).is_err());
        m[(1, 1)] = C64::new(0.5, 0.0);
        m[(0, 1)] = C64::new(0.1, 0.0);
        assert!(DensityMatrix3::new(m).is_err());
        m[(1, 0)] = C64::new(0.1, 0.0);
        assert!(DensityMatrix3::new(m).is_ok());
        m[(0, 1)] = C64::new(0.9, 0.0);
        m[(1, 0)] = C64::new(0.9, 0.0);
        assert!(DensityMatrix3::new(m).is_err());
    }

    #[test]
    fn step_halving_converges() {
        let p = SgcParams::degenerate(1.0, -0.5);
        let (t, dt) = evolve_converged(&DensityMatrix3::basis(0), &p, 3.0, 0.01, 1e-8, 6).unwrap();
        assert!(dt < 0.01);
        let exact = evolve(&DensityMatrix3::basis(0), &p, 3.0, 1e-4, &all_steps()).unwrap();
        let a = t.samples.last().unwrap();
        let b = exact.samples.last().unwrap();
        assert!((a.rho11 - b.rho11).abs() < 1e-8);
    }

    #[test]
    fn breakdown_maps_to_degenerate_params() {
        let r = RateBreakdown {
            entries: Default::default(),
            methods: Default::default(),
            gamma_x: 1.0,
            gamma_z: 3.0,
            gamma_n: 4.0,
            kappa: 0.5,
            background: Default::default(),
            error_estimate: 0.0,
            converged: true,
        };
        assert_eq!(SgcParams::from(&r), SgcParams::degenerate(4.0, 0.5));
    }
}
