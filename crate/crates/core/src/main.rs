use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64 as C64;
use serde_json::{json, Value};

use nriguide::config::{Quantity, ScanConfig};
use nriguide::dynamics::{self, EvolveOptions, InitialState, SgcParams};
use nriguide::green;
use nriguide::kernel::{
    guided_phase, surface_phase, Layer, PhaseFold, Polarization, TransverseContext,
};
use nriguide::materials::{validate_stack, LayerStack, StackOptics};
use nriguide::modes;
use nriguide::presets;
use nriguide::rates;
use nriguide::scan::{self, ScanResult};

#[derive(Parser)]
#[command(
    name = "nriguide",
    version,
    about = "Emission rates and interference for a V-type atom in a three-layer waveguide"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Layer permittivities, permeabilities and the ordering check.
    Materials(StackArgs),
    /// Kernel quantities at one in-plane wavenumber, as JSON.
    EmEval {
        #[command(flatten)]
        stack: StackArgs,
        #[arg(long)]
        k: f64,
        #[arg(long, default_value = "p")]
        pol: Polarization,
    },
    /// Real guided and surface roots of the lossless dispersion relation (CSV).
    Modes {
        #[command(flatten)]
        stack: StackArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rate density over a grid of in-plane wavenumbers (CSV).
    Density {
        #[command(flatten)]
        stack: StackArgs,
        #[arg(long, default_value_t = 0.01)]
        k_min: f64,
        #[arg(long, default_value_t = 5.0)]
        k_max: f64,
        #[arg(long, default_value_t = 500)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rate breakdown and kappa for the configured stack, as JSON.
    Rates(StackArgs),
    /// Run a sweep and write CSV plus a JSON metadata sidecar.
    Scan {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Integrate the master equation (CSV: t, rho11, rho22, rho33, re_rho12, im_rho12).
    #[command(allow_negative_numbers = true)]
    Dynamics {
        #[arg(long, default_value_t = 1.0)]
        gamma1: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma2: f64,
        /// Interference strength used for both channels.
        #[arg(long, default_value_t = 0.0)]
        kappa: f64,
        #[arg(long)]
        kappa1: Option<f64>,
        #[arg(long)]
        kappa2: Option<f64>,
        #[arg(long, value_enum, default_value = "1")]
        rho0: InitialState,
        #[arg(long, default_value_t = 10.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 10)]
        sample_every: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named preset, writing its configuration, data and metadata.
    Figure {
        #[arg(long)]
        preset: String,
        #[arg(long, default_value = "figures")]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Args, Clone)]
struct SourceArgs {
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args, Clone)]
struct StackArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Override the transition frequency.
    #[arg(long)]
    omega: Option<f64>,
    /// Override the core thickness.
    #[arg(long)]
    d3: Option<f64>,
}

enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<scan::ScanError> for CliError {
    fn from(e: scan::ScanError) -> Self {
        match e {
            scan::ScanError::Config(c) => CliError::Config(c.to_string()),
            scan::ScanError::Setup(m) => CliError::Config(m),
            other => CliError::Io(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn load_config(src: &SourceArgs) -> CliResult<ScanConfig> {
    match (&src.config, &src.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            ScanConfig::from_json(&text).map_err(|e| CliError::Config(e.to_string()))
        }
        (None, Some(name)) => match presets::load(name) {
            Some(r) => r.map_err(|e| CliError::Config(e.to_string())),
            None => Err(CliError::Config(format!(
                "unknown preset '{name}' (known: {})",
                presets::NAMES.join(", ")
            ))),
        },
        (None, None) => Err(CliError::Config(
            "pass --config PATH or --preset NAME".into(),
        )),
    }
}

fn load_stack(args: &StackArgs) -> CliResult<(LayerStack, f64)> {
    let cfg = load_config(&args.source)?;
    let mut stack = cfg.stack;
    if let Some(d) = args.d3 {
        stack.d3_prime = d;
    }
    let omega = args.omega.unwrap_or(cfg.omega);
    Ok((stack, omega))
}

fn optics_of(stack: &LayerStack, omega: f64) -> CliResult<StackOptics> {
    stack
        .optics(omega)
        .map_err(|e| CliError::Config(e.to_string()))
}

fn c(z: C64) -> Value {
    json!([z.re, z.im])
}

fn print_json(v: &Value) -> CliResult<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn sink(out: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            Box::new(io::BufWriter::new(fs::File::create(p)?))
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn cmd_materials(args: &StackArgs) -> CliResult<()> {
    let (stack, omega) = load_stack(args)?;
    let mut layers = serde_json::Map::new();
    for (name, m) in [
        ("lower", &stack.lower),
        ("upper", &stack.upper),
        ("core", &stack.core),
    ] {
        let med = m
            .medium(omega)
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        layers.insert(
            name.into(),
            json!({"eps": c(med.eps), "mu": c(med.mu), "eta": c(med.eta()), "left_handed": med.is_left_handed()}),
        );
    }
    let report = validate_stack(&stack, omega).map_err(|e| CliError::Numerical(e.to_string()))?;
    let optics = optics_of(&stack, omega)?;
    let cutoff = modes::surface_cutoff_thickness(&optics.lossless()).ok();
    print_json(&json!({
        "omega": omega,
        "layers": layers,
        "ordering": report.checks,
        "ordering_passes": report.passes(),
        "surface_cutoff_thickness": cutoff,
    }))
}

fn cmd_em_eval(args: &StackArgs, k: f64, pol: Polarization) -> CliResult<()> {
    let (stack, omega) = load_stack(args)?;
    let optics = optics_of(&stack, omega)?;
    let ctx = TransverseContext::real(&optics, k);
    let num = |e: nriguide::kernel::KernelError| CliError::Numerical(e.to_string());
    let (r31, r32) = ctx.reflections(pol).map_err(num)?;
    let (ip, im) = ctx.i_factors(pol, optics.z0, optics.d3).map_err(num)?;
    let spec = ctx.spectral(pol, optics.z0, optics.d3).map_err(num)?;
    let (dz, dx) = spec.density();
    let chi = |layer| ctx.chi(pol, layer).ok().map(c);
    print_json(&json!({
        "omega": omega,
        "k": k,
        "pol": pol.label(),
        "d3_prime": optics.d3,
        "z0_prime": optics.z0,
        "beta": [c(ctx.beta(Layer::Lower)), c(ctx.beta(Layer::Upper)), c(ctx.beta(Layer::Core))],
        "r31": c(r31),
        "r32": c(r32),
        "d": c(spec.d),
        "i_plus": c(ip),
        "i_minus": c(im),
        "chi_lower": chi(Layer::Lower),
        "chi_upper": chi(Layer::Upper),
        "guided_phase_32": guided_phase(r32, PhaseFold::Pi).ok(),
        "surface_phase_32": surface_phase(r32).ok(),
        "half_phase": ctx.half_phase(pol, optics.d3).ok(),
        "density_z": dz,
        "density_x": dx,
    }))
}

fn cmd_modes(args: &StackArgs, out: &Option<PathBuf>) -> CliResult<()> {
    let (stack, omega) = load_stack(args)?;
    let optics = optics_of(&stack, omega)?.lossless();
    let roots = modes::find_all_roots(&optics).map_err(|e| CliError::Numerical(e.to_string()))?;
    let mut w = csv::Writer::from_writer(sink(out)?);
    w.write_record(["pol", "class", "m", "k", "residue_x", "residue_z"])?;
    for r in roots {
        w.write_record([
            r.pol.label().to_string(),
            r.class.label().to_string(),
            r.m.to_string(),
            format!("{:e}", r.k),
            format!("{:e}", r.residue_x),
            format!("{:e}", r.residue_z),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_density(
    args: &StackArgs,
    k_min: f64,
    k_max: f64,
    points: usize,
    out: &Option<PathBuf>,
) -> CliResult<()> {
    if !(k_min > 0.0 && k_max > k_min && points >= 2) {
        return Err(CliError::Config(
            "need 0 < k_min < k_max and points >= 2".into(),
        ));
    }
    let (stack, omega) = load_stack(args)?;
    let optics = optics_of(&stack, omega)?;
    let mut w = csv::Writer::from_writer(sink(out)?);
    w.write_record(["k", "dGx_p", "dGx_s", "dGz_p"])?;
    for i in 0..points {
        let k = k_min + (k_max - k_min) * i as f64 / (points - 1) as f64;
        let rec = match green::rate_density(&optics, k) {
            Ok(d) => vec![d.k, d.d_gamma_x_p, d.d_gamma_x_s, d.d_gamma_z_p],
            Err(_) => vec![k, f64::NAN, f64::NAN, f64::NAN],
        };
        w.write_record(rec.iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_rates(args: &StackArgs) -> CliResult<()> {
    let (stack, omega) = load_stack(args)?;
    let r = rates::evaluate(&stack, omega, &green::GreenOptions::default())
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    print_json(
        &json!({"omega": omega, "d3_prime": stack.d3_prime, "z0_prime": stack.z0_prime(), "rates": r}),
    )?;
    if !r.converged {
        return Err(CliError::Numerical(
            "quadrature did not reach the requested tolerance".into(),
        ));
    }
    Ok(())
}

fn check_numerics(results: &[(Option<f64>, ScanResult)]) -> CliResult<()> {
    let failures: usize = results.iter().map(|(_, r)| r.failures()).sum();
    if failures > 0 {
        return Err(CliError::Numerical(format!(
            "{failures} sweep point(s) failed or missed tolerance"
        )));
    }
    Ok(())
}

fn run_and_write(cfg: &ScanConfig, csv_path: &Path) -> CliResult<Vec<(Option<f64>, ScanResult)>> {
    let results = scan::run_variants(cfg)?;
    for (g, r) in &results {
        let path = scan::variant_path(csv_path, *g);
        scan::write_outputs(r, *g, &path).map_err(CliError::from)?;
        log::info!("wrote {} ({} rows)", path.display(), r.rows.len());
    }
    Ok(results)
}

fn cmd_scan(src: &SourceArgs, out: &Option<PathBuf>, jobs: Option<usize>) -> CliResult<()> {
    let mut cfg = load_config(src)?;
    if let Some(j) = jobs {
        cfg.jobs = j;
    }
    let path = out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| {
            PathBuf::from(if cfg.name.is_empty() {
                "scan.csv".into()
            } else {
                format!("{}.csv", cfg.name)
            })
        });
    let results = run_and_write(&cfg, &path)?;
    check_numerics(&results)
}

fn peak_summary(results: &[(Option<f64>, ScanResult)]) -> Value {
    let variants: Vec<Value> = results
        .iter()
        .map(|(g, r)| {
            let extremes: serde_json::Map<String, Value> = [Quantity::Guided, Quantity::Surface, Quantity::Total, Quantity::Kappa]
                .iter()
                .map(|q| (q.name(), json!({"max": r.max_of(*q), "min": r.min_of(*q)})))
                .collect();
            json!({"absorption": g, "rows": r.rows.len(), "failures": r.failures(), "peaks": r.peaks, "extremes": extremes})
        })
        .collect();
    let totals: Vec<f64> = results
        .iter()
        .filter_map(|(_, r)| r.max_of(Quantity::Total).map(|p| p.1))
        .collect();
    let ratio = (totals.len() == 2).then(|| totals[0] / totals[1]);
    json!({"variants": variants, "peak_ratio": ratio})
}

fn cmd_figure(name: &str, out: &Path, jobs: Option<usize>) -> CliResult<()> {
    let mut cfg = match presets::load(name) {
        Some(r) => r.map_err(|e| CliError::Config(e.to_string()))?,
        None => {
            return Err(CliError::Config(format!(
                "unknown preset '{name}' (known: {})",
                presets::NAMES.join(", ")
            )))
        }
    };
    if let Some(j) = jobs {
        cfg.jobs = j;
    }
    fs::create_dir_all(out)?;
    fs::write(
        out.join(format!("{name}.config.json")),
        serde_json::to_string_pretty(&cfg)? + "\n",
    )?;
    let results = run_and_write(&cfg, &out.join(format!("{name}.csv")))?;
    print_json(&json!({"preset": name, "summary": peak_summary(&results)}))?;
    check_numerics(&results)
}

fn cmd_dynamics(
    params: SgcParams,
    rho0: InitialState,
    t_end: f64,
    dt: f64,
    sample_every: usize,
    out: &Option<PathBuf>,
) -> CliResult<()> {
    params
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let opts = EvolveOptions {
        sample_every,
        positivity_every: sample_every.max(1),
    };
    let traj = dynamics::evolve(&rho0.state(), &params, t_end, dt, &opts).map_err(|e| match e {
        dynamics::DynamicsError::StepTooLarge { .. }
        | dynamics::DynamicsError::InvalidParams(_) => CliError::Config(e.to_string()),
        other => CliError::Numerical(other.to_string()),
    })?;
    let mut w = csv::Writer::from_writer(sink(out)?);
    w.write_record(["t", "rho11", "rho22", "rho33", "re_rho12", "im_rho12"])?;
    for s in &traj.samples {
        w.write_record(
            [s.t, s.rho11, s.rho22, s.rho33, s.re_rho12, s.im_rho12]
                .iter()
                .map(|v| format!("{v:e}")),
        )?;
    }
    w.flush()?;
    log::info!(
        "max trace drift {:e}, min eigenvalue {:e}",
        traj.max_trace_drift,
        traj.min_eigenvalue
    );
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Materials(a) => cmd_materials(&a),
        Command::EmEval { stack, k, pol } => cmd_em_eval(&stack, k, pol),
        Command::Modes { stack, out } => cmd_modes(&stack, &out),
        Command::Density {
            stack,
            k_min,
            k_max,
            points,
            out,
        } => cmd_density(&stack, k_min, k_max, points, &out),
        Command::Rates(a) => cmd_rates(&a),
        Command::Scan { source, out, jobs } => cmd_scan(&source, &out, jobs),
        Command::Dynamics {
            gamma1,
            gamma2,
            kappa,
            kappa1,
            kappa2,
            rho0,
            t_end,
            dt,
            sample_every,
            out,
        } => {
            let params = SgcParams {
                gamma1,
                gamma2,
                kappa1: kappa1.unwrap_or(kappa),
                kappa2: kappa2.unwrap_or(kappa),
            };
            cmd_dynamics(params, rho0, t_end, dt, sample_every, &out)
        }
        Command::Figure { preset, out, jobs } => cmd_figure(&preset, &out, jobs),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
