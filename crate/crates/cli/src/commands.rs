use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;

use twinmill::compensation::{compensate, fit_rigid, noise_trials, residual_report, simulate_deformation, PathTrace};
use twinmill::config::SystemConfig;
use twinmill::io::{self, write_file};
use twinmill::modal::{frf_synthesize, h1_estimate, peak_pick, fit_shift, Axis, FitScope, H1Options};
use twinmill::par::Execution;
use twinmill::pathplan::{parse_gcode, plan_sync, ToolPath};
use twinmill::{Error, Result, Wrench};

#[derive(Debug, Parser)]
#[command(name = "twinmill", version, about = "Coupled dual-robot milling models")]
pub struct Cli {
    /// System config (JSON). Falls back to $TWINMILL_CONFIG.
    #[arg(long, global = true, env = "TWINMILL_CONFIG")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize FRFs over a tension sweep and fit the frequency shift.
    Modal(ModalArgs),
    /// H1 FRF estimate from impact-test CSV files.
    Frf(FrfArgs),
    /// Plan synchronized setpoints for both robots along a path.
    Plan(PlanArgs),
    /// Simulate tension deformation of a planned program.
    Deform(DeformArgs),
}

#[derive(Debug, Args)]
pub struct ModalArgs {
    /// Tensions in N, comma separated.
    #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
    pub tensions: Vec<f64>,
    #[arg(long, default_value = "x")]
    pub axis: Axis,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FrfArgs {
    /// Impact CSV files; `<name>.json` next to a file is read as metadata.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// FFT length; defaults to the longest record.
    #[arg(long)]
    pub nfft: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Tool path: native JSON (`.json`) or G-code.
    pub path: PathBuf,
    /// Tension in N along the inter-robot axis, or six comma-separated
    /// wrench components `fx,fy,fz,mx,my,mz` (N, N·m).
    #[arg(long, default_value = "0", value_delimiter = ',', allow_negative_numbers = true)]
    pub tension: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DeformArgs {
    /// Program CSV written by `plan`.
    pub program: PathBuf,
    /// Also fit and remove the rigid part of the deformation.
    #[arg(long)]
    pub compensate: bool,
    /// Gaussian noise (m) added to the deformed trace before fitting.
    #[arg(long, requires = "seed")]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of noisy compensation trials; needs `--noise-sigma`.
    #[arg(long, requires = "noise_sigma", default_value_t = 1)]
    pub trials: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub enum Failure {
    Usage(String),
    Model(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Model(e)
    }
}

pub fn run(cli: Cli) -> std::result::Result<(), Failure> {
    let config = || SystemConfig::resolve(cli.config.as_deref());
    match &cli.command {
        Command::Modal(a) => modal(&config()?, a),
        Command::Frf(a) => frf(a),
        Command::Plan(a) => plan(&config()?, a),
        Command::Deform(a) => deform(&config()?, a),
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn modal(cfg: &SystemConfig, a: &ModalArgs) -> std::result::Result<(), Failure> {
    let model = cfg.modal_model(a.axis)?;
    let grid = cfg.frf_grid();
    let [lo, hi] = cfg.defaults.peak_band_hz;
    let mut points = Vec::with_capacity(a.tensions.len());
    for &t in &a.tensions {
        let frf = frf_synthesize(&model, t, &grid)?;
        let peaks = peak_pick(&frf, lo, hi, cfg.defaults.prominence_factor)?;
        let best = peaks
            .iter()
            .max_by(|x, y| x.magnitude.total_cmp(&y.magnitude))
            .ok_or_else(|| Error::DegenerateSignal(format!("no resonance in [{lo}, {hi}] Hz at {t} N")))?;
        points.push((t, best.frequency));
        write_file(&a.out.join(format!("frf_{}_{}N.csv", a.axis, t)), |w| io::write_frf_csv(w, &frf))?;
    }
    let fit = fit_shift(&points, FitScope::Global)?;
    write_file(&a.out.join(format!("shift_fit_{}.csv", a.axis)), |w| {
        io::write_shift_fit_csv(w, &fit, &points)
    })?;
    println!(
        "axis {}: slope {:.6} Hz/N, intercept {:.3} Hz, max |residual| {:.3} Hz",
        a.axis,
        fit.slope,
        fit.intercept,
        fit.max_abs_residual()
    );
    Ok(())
}

fn frf(a: &FrfArgs) -> std::result::Result<(), Failure> {
    let records = a.files.iter().map(|p| io::load_impact(p)).collect::<Result<Vec<_>>>()?;
    let nfft = a
        .nfft
        .unwrap_or_else(|| records.iter().map(|r| r.len()).max().unwrap_or(0));
    let frf = h1_estimate(&records, &H1Options::new(nfft))?;
    write_file(&a.out, |w| io::write_frf_csv(w, &frf))?;
    println!("{} records, {} bins -> {}", records.len(), frf.len(), a.out.display());
    Ok(())
}

fn plan(cfg: &SystemConfig, a: &PlanArgs) -> std::result::Result<(), Failure> {
    let sys = cfg.system()?;
    let tension = match a.tension.as_slice() {
        [n] => Wrench::new(sys.inter_robot_axis() * *n, Vector3::zeros()),
        [fx, fy, fz, mx, my, mz] => Wrench::new(Vector3::new(*fx, *fy, *fz), Vector3::new(*mx, *my, *mz)),
        other => {
            return Err(Failure::Usage(format!(
                "--tension takes one value or six, got {}",
                other.len()
            )))
        }
    };
    if !tension.is_finite() {
        return Err(Failure::Usage("--tension must be finite".into()));
    }
    let text = read_text(&a.path)?;
    let path = if a.path.extension().is_some_and(|e| e == "json") {
        ToolPath::from_json(&text)?
    } else {
        parse_gcode(&text)?
    };
    let program = plan_sync(&sys, &path, &tension, cfg.seeds(), &cfg.plan_options())?;
    write_file(&a.out, |w| io::write_program_csv(w, &program))?;
    println!("{} setpoint pairs -> {}", program.len(), a.out.display());
    Ok(())
}

fn mm(v: f64) -> String {
    format!("{:.4} mm", v * 1e3)
}

fn deform(cfg: &SystemConfig, a: &DeformArgs) -> std::result::Result<(), Failure> {
    let sys = cfg.system()?;
    let program = io::read_program_csv(&read_text(&a.program)?)?;
    let nominal = PathTrace::nominal(&program);
    let deformed = simulate_deformation(&sys, &program, Execution::default())?;
    let before = residual_report(&nominal, &deformed)?;
    write_file(&a.out.join("trace_nominal.csv"), |w| io::write_trace_csv(w, &nominal))?;
    write_file(&a.out.join("trace_deformed.csv"), |w| io::write_trace_csv(w, &deformed))?;
    write_file(&a.out.join("residual_deformed.csv"), |w| io::write_residual_csv(w, &before))?;
    println!(
        "deformation: rms {}, max {}, mean offset ({}, {}, {})",
        mm(before.rms),
        mm(before.max),
        mm(before.per_axis[0].mean),
        mm(before.per_axis[1].mean),
        mm(before.per_axis[2].mean)
    );
    if !a.compensate {
        return Ok(());
    }

    let measured = match (a.noise_sigma, a.seed) {
        (Some(sigma), Some(seed)) => deformed.with_noise(sigma, seed)?,
        _ => deformed.clone(),
    };
    let transform = fit_rigid(&nominal, &measured)?;
    let compensated = compensate(&measured, &transform);
    let after = residual_report(&nominal, &compensated)?;
    write_file(&a.out.join("trace_measured.csv"), |w| io::write_trace_csv(w, &measured))?;
    write_file(&a.out.join("trace_compensated.csv"), |w| io::write_trace_csv(w, &compensated))?;
    write_file(&a.out.join("residual_compensated.csv"), |w| io::write_residual_csv(w, &after))?;
    let t = transform.translation;
    println!(
        "fitted transform: rotation {:.3e} rad, translation ({}, {}, {})",
        transform.rotation.angle(),
        mm(t.x),
        mm(t.y),
        mm(t.z)
    );
    println!("after compensation: rms {}, max {}", mm(after.rms), mm(after.max));

    if let (Some(sigma), Some(seed)) = (a.noise_sigma, a.seed) {
        if a.trials > 1 {
            let outcomes = noise_trials(&nominal, &deformed, sigma, a.trials, seed, Execution::default())?;
            write_file(&a.out.join("trials.csv"), |w| {
                use std::io::Write;
                writeln!(w, "trial,seed,rms_before_m,rms_after_m")?;
                for (i, o) in outcomes.iter().enumerate() {
                    writeln!(
                        w,
                        "{i},{},{},{}",
                        seed.wrapping_add(i as u64),
                        io::fmt_f64(o.rms_before),
                        io::fmt_f64(o.rms_after)
                    )?;
                }
                Ok(())
            })?;
            let worst = outcomes.iter().map(|o| o.rms_after).fold(0.0, f64::max);
            println!("{} noisy trials: worst rms after compensation {}", a.trials, mm(worst));
        }
    }
    Ok(())
}
