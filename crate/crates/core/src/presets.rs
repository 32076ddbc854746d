//! Built-in sweep presets.
//!
//! Each preset exists twice: as a builder here and as a JSON file under
//! `presets/`. The files are what users edit and copy; the builders are the
//! reference the files are checked against.

use crate::config::{
    ConfigErrors, Entry, PeakRefinement, PeakStrategy, Quantity, ScanConfig, Spacing, Sweep,
    SweepAxis,
};
use crate::green::{GreenOptions, RateClass};
use crate::materials::{AtomPosition, DrudeLorentz, LayerStack, MaterialModel};

pub const NAMES: [&str; 7] = ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7a", "fig7b"];

/// Core thickness of the first z-polarized guided peak at damping 1e-10
/// (`fig2` material, `omega = 1.09`), located by the critical-thickness search.
pub const FIG4_D3_PRIME: f64 = 3.06371549599;

const FILES: [(&str, &str); 7] = [
    ("fig2", include_str!("../presets/fig2.json")),
    ("fig3", include_str!("../presets/fig3.json")),
    ("fig4", include_str!("../presets/fig4.json")),
    ("fig5", include_str!("../presets/fig5.json")),
    ("fig6", include_str!("../presets/fig6.json")),
    ("fig7a", include_str!("../presets/fig7a.json")),
    ("fig7b", include_str!("../presets/fig7b.json")),
];

fn core(omega_pe: f64, omega_pm: f64, gamma: f64) -> MaterialModel {
    MaterialModel::DrudeLorentz(DrudeLorentz {
        omega_pe,
        omega_te: 1.0,
        gamma_e: gamma,
        omega_pm,
        omega_tm: 1.0,
        gamma_m: gamma,
    })
}

fn stack(core: MaterialModel, d3_prime: f64, fraction: f64) -> LayerStack {
    LayerStack {
        lower: MaterialModel::vacuum(),
        upper: MaterialModel::vacuum(),
        core,
        d3_prime,
        atom: AtomPosition::Fraction(fraction),
    }
}

fn thickness_sweep(lo: f64, hi: f64, points: usize) -> Sweep {
    Sweep {
        axis: SweepAxis::D3Prime,
        lo,
        hi,
        points,
        spacing: Spacing::Linear,
    }
}

fn refine(quantity: Quantity, strategy: PeakStrategy, minimize: bool) -> PeakRefinement {
    PeakRefinement {
        quantity,
        strategy,
        minimize,
        window: 20.0,
        samples: 81,
    }
}

fn base(name: &str, notes: &[&str], stack: LayerStack, omega: f64, sweep: Sweep) -> ScanConfig {
    ScanConfig {
        name: name.into(),
        notes: notes.iter().map(|s| s.to_string()).collect(),
        stack,
        omega,
        sweep,
        outputs: Vec::new(),
        output: Some(format!("{name}.csv").into()),
        jobs: 1,
        green: GreenOptions::default(),
        refine: Vec::new(),
        absorption_variants: Vec::new(),
        scale_lengths_with_omega: false,
    }
}

const LOW_LOSS_NOTES: [&str; 4] = [
    "eps1 = eps2 = mu1 = mu2 = 1",
    "omega_Te = omega_Tm = 1, omega_a = 1.09, gamma_e = gamma_m = 1e-10",
    "eps3 = mu3 = -1.99 + 1.73e-9 i at omega_a",
    "omega_pe = omega_pm = 1.25 reproduces eps3 = mu3 = -1.99; the alternative value 1.32 would give eps3 = mu3 = -2.95 and is not used",
];

const HIGH_LOSS_NOTES: [&str; 4] = [
    "eps1 = eps2 = mu1 = mu2 = 1",
    "omega_pe = 1.25, omega_pm = 1.189, omega_Te = omega_Tm = 1",
    "omega_a = 1.08, gamma_e = gamma_m = 1e-3",
    "eps3 = -2.38 + 2.19e-2 i, mu3 = -1.48 + 1.61e-2 i at omega_a",
];

fn with_note(notes: &[&str], extra: &str) -> Vec<String> {
    let mut v: Vec<String> = notes.iter().map(|s| s.to_string()).collect();
    v.push(extra.into());
    v
}

/// Reference configuration of a preset.
pub fn builder(name: &str) -> Option<ScanConfig> {
    let guided_z = Quantity::Class(RateClass::Guided, Entry::ZP);
    let cfg = match name {
        "fig2" => {
            let mut c = base(
                name,
                &[],
                stack(core(1.25, 1.25, 1e-10), 1.0, 0.25),
                1.09,
                thickness_sweep(0.1, 10.0, 991),
            );
            c.notes = with_note(&LOW_LOSS_NOTES, "z0' = 0.25 d3'");
            c.refine = vec![
                refine(Quantity::Guided, PeakStrategy::CriticalThickness, false),
                refine(guided_z, PeakStrategy::CriticalThickness, false),
            ];
            c
        }
        "fig3" => {
            let mut c = base(
                name,
                &[],
                stack(core(1.25, 1.25, 1e-10), 0.5, 0.25),
                1.09,
                thickness_sweep(0.02, 1.2, 591),
            );
            c.notes = with_note(&LOW_LOSS_NOTES, "z0' = 0.25 d3'");
            c
        }
        "fig4" => {
            let mut c = base(
                name,
                &[],
                stack(core(1.25, 1.25, 1e-10), FIG4_D3_PRIME, 0.25),
                1.09,
                Sweep {
                    axis: SweepAxis::Omega,
                    lo: 1.088,
                    hi: 1.092,
                    points: 201,
                    spacing: Spacing::Linear,
                },
            );
            c.notes = with_note(
                &LOW_LOSS_NOTES,
                "z0' = 0.25 d3', d3' at the first guided z_p peak, damping 1e-10 and 1e-8",
            );
            c.absorption_variants = vec![1e-10, 1e-8];
            c.scale_lengths_with_omega = true;
            c.refine = vec![refine(Quantity::Total, PeakStrategy::GridExtremum, false)];
            c
        }
        "fig5" => {
            let mut c = base(
                name,
                &[],
                stack(core(1.25, 1.189, 1e-3), 1.0, 0.5),
                1.08,
                thickness_sweep(0.1, 10.0, 991),
            );
            c.notes = with_note(&HIGH_LOSS_NOTES, "z0' = 0.5 d3'");
            c.refine = vec![refine(Quantity::Guided, PeakStrategy::GridExtremum, false)];
            c
        }
        "fig6" => {
            let mut c = base(
                name,
                &[],
                stack(core(1.25, 1.189, 1e-3), 0.5, 0.5),
                1.08,
                thickness_sweep(0.02, 1.0, 491),
            );
            c.notes = with_note(&HIGH_LOSS_NOTES, "z0' = 0.5 d3'");
            c
        }
        "fig7a" => {
            let mut c = base(
                name,
                &[],
                stack(core(1.25, 1.189, 1e-10), 1.0, 0.5),
                1.09,
                thickness_sweep(0.1, 10.0, 991),
            );
            c.notes = vec![
                "eps1 = eps2 = mu1 = mu2 = 1".into(),
                "omega_pe = 1.25, omega_pm = 1.189, omega_Te = omega_Tm = 1".into(),
                "omega_a = 1.09, gamma_e = gamma_m = 1e-10".into(),
                "mu3 = -1.20 + 1.27e-9 i at omega_a".into(),
                "z0' = 0.5 d3'".into(),
            ];
            c.refine = vec![
                refine(Quantity::Kappa, PeakStrategy::CriticalThickness, false),
                refine(Quantity::Kappa, PeakStrategy::GridExtremum, true),
            ];
            c
        }
        "fig7b" => {
            let mut c = base(
                name,
                &[],
                stack(core(1.25, 1.189, 1e-3), 1.0, 0.5),
                1.08,
                Sweep {
                    axis: SweepAxis::D3Prime,
                    lo: 0.02,
                    hi: 10.0,
                    points: 500,
                    spacing: Spacing::Log,
                },
            );
            c.notes = with_note(&HIGH_LOSS_NOTES, "z0' = 0.5 d3'");
            c.refine = vec![
                refine(Quantity::Kappa, PeakStrategy::GridExtremum, false),
                refine(Quantity::Kappa, PeakStrategy::GridExtremum, true),
            ];
            c
        }
        _ => return None,
    };
    Some(cfg)
}

/// Raw JSON text of a shipped preset file.
pub fn file_text(name: &str) -> Option<&'static str> {
    FILES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Parsed and validated preset file.
pub fn load(name: &str) -> Option<Result<ScanConfig, ConfigErrors>> {
    file_text(name).map(ScanConfig::from_json)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_has_builder_and_file() {
        for name in NAMES {
            assert!(builder(name).is_some(), "{name}");
            assert!(file_text(name).is_some(), "{name}");
        }
        assert!(builder("fig9").is_none());
    }

    #[test]
    fn files_match_builders() {
        for name in NAMES {
            let parsed = load(name)
                .unwrap()
                .unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(parsed, builder(name).unwrap(), "{name}");
        }
    }

    #[test]
    fn preset_materials_match_quoted_values() {
        let c = builder("fig2").unwrap();
        let eps = c.stack.core.permittivity(c.omega).unwrap();
        assert!((eps.re + 1.99).abs() < 5e-3 && (eps.im - 1.73e-9).abs() < 1e-11);
        let c = builder("fig5").unwrap();
        let mu = c.stack.core.permeability(c.omega).unwrap();
        assert!((mu.re + 1.48).abs() < 1e-2 && (mu.im - 1.61e-2).abs() < 1e-4);
    }
}
