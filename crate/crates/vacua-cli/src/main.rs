//! `vacua` — ground-state spectroscopy of ultrastrongly coupled cavity-QED
//! models from the command line.
//!
//! Four commands: `levels` (excitation ladder + spectroscopic weights),
//! `lambshift` (numeric vs analytic ancilla shift), `spectroscopy`
//! (driven-dissipative drive-frequency maps), and `validate` (invariant
//! battery). Sweeps come from a named preset (`--preset`) or a JSON config
//! (`--config`); results land as `<stem>_<command>.csv` plus a provenance
//! sidecar `<stem>_<command>.json` in `--out`.
//!
//! All frequencies are dimensionless multiples of the cavity frequency.
//!
//! Exit status: 0 on full success, 1 when any row recorded an error (or any
//! validation check failed), 2 on fatal errors (bad flags, bad config).

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use vacua::dynamics::{self, DissipationMode, DissipationSpec};
use vacua::models::{AncillaSpec, ModelKind, ModelSpec};
use vacua::spectra;
use vacua::sweep::{self, Quantity, SweepSpec, Task};

#[derive(Parser)]
#[command(
    name = "vacua",
    version,
    about = "Ancilla-qubit spectroscopy of ultrastrongly coupled cavity-QED ground states"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Excitation energies and spectroscopic weights along a coupling grid
    Levels(RunArgs),
    /// Ancilla Lamb shift: numeric transition vs second-order formula
    Lambshift(RunArgs),
    /// Driven-dissipative scans: ancilla population and measurement fidelity
    Spectroscopy(RunArgs),
    /// Invariant battery: truncation, symmetries, steady-state stability
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Named preset (see `--preset list`)
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// JSON sweep configuration path
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the worker count
    #[arg(long)]
    workers: Option<usize>,
    /// Suppress progress output
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Check this preset's parameters instead of the default battery
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Check this JSON config's parameters instead of the default battery
    #[arg(long)]
    config: Option<PathBuf>,
    /// Suppress commentary, print only check lines
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Levels(args) => run_command("levels", args),
        Command::Lambshift(args) => run_command("lambshift", args),
        Command::Spectroscopy(args) => run_command("spectroscopy", args),
        Command::Validate(args) => cmd_validate(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Load the sweep spec from `--preset` or `--config` (exactly one).
fn load_spec(args: &RunArgs) -> Result<(SweepSpec, String), vacua::Error> {
    match (&args.preset, &args.config) {
        (Some(name), None) => Ok((sweep::preset(name)?, name.clone())),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)?;
            let spec: SweepSpec = serde_json::from_str(&text)
                .map_err(|e| vacua::Error::Config(format!("{}: {e}", path.display())))?;
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "sweep".to_string());
            Ok((spec, stem))
        }
        _ => Err(vacua::Error::Config(
            "provide exactly one of --preset <name> or --config <path>".into(),
        )),
    }
}

/// Adapt the spec's outputs to the invoked command, so any preset can feed
/// any compatible command.
fn adapt_outputs(spec: &mut SweepSpec, command: &str) -> Result<(), vacua::Error> {
    match command {
        // the levels product is fixed
        "levels" => spec.outputs = vec![Quantity::Energies, Quantity::Weights],
        "lambshift" => {
            if spec.task()? != Task::LambShift {
                spec.outputs = vec![
                    Quantity::ShiftNumeric,
                    Quantity::ShiftAnalytic,
                    Quantity::FidelityG,
                    Quantity::NPhot,
                    Quantity::Anomalous,
                ];
            }
        }
        "spectroscopy" => {
            if spec.task()? != Task::Spectroscopy {
                return Err(vacua::Error::Config(
                    "spectroscopy needs n_up/fidelity_F outputs and a drive_amplitude; \
                     use a fig4/fig5 preset or add them to the config"
                        .into(),
                ));
            }
        }
        _ => unreachable!(),
    }
    Ok(())
}

fn run_command(command: &str, args: RunArgs) -> Result<bool, vacua::Error> {
    if args.preset.as_deref() == Some("list") {
        for (name, _) in sweep::figure_presets() {
            println!("{name}");
        }
        return Ok(true);
    }
    let (mut spec, stem) = load_spec(&args)?;
    adapt_outputs(&mut spec, command)?;
    if let Some(w) = args.workers {
        spec.workers = w;
    }
    if !args.quiet {
        println!(
            "running {command} — model {}, axis {}, {} point(s), {} worker(s)",
            spec.model.kind.name(),
            spec.axis.column_name(),
            spec.values.len(),
            spec.workers
        );
    }
    let result = sweep::run_sweep(&spec)?;
    let (csv_path, json_path) = sweep::persist(&result, &args.out, &format!("{stem}_{command}"))?;
    let failed: usize = result.rows.iter().filter(|r| r.error.is_some()).count();
    if !args.quiet {
        println!(
            "wrote {} ({} rows, n_max {}) and {}",
            csv_path.display(),
            result.rows.len(),
            result.provenance.n_max,
            json_path.display()
        );
        println!("elapsed {:.1}s", result.provenance.elapsed_seconds);
    }
    if failed > 0 {
        eprintln!("{failed} row(s) recorded errors; see the error column");
    }
    Ok(failed == 0)
}

struct Check {
    name: String,
    pass: bool,
    detail: String,
}

fn check(name: impl Into<String>, pass: bool, detail: String) -> Check {
    Check { name: name.into(), pass, detail }
}

/// Invariant battery. With a preset/config the checks run on that model;
/// otherwise on all three models at representative couplings.
fn cmd_validate(args: ValidateArgs) -> Result<bool, vacua::Error> {
    let targets: Vec<(ModelSpec, AncillaSpec)> = match (&args.preset, &args.config) {
        (None, None) => {
            let anc = AncillaSpec::new(2.75, 0.1);
            let anc_h = AncillaSpec::new(6.75, 0.1);
            vec![
                (ModelSpec::new(ModelKind::Dicke, 1.0, 3), anc),
                (ModelSpec::new(ModelKind::TavisCummings, 1.0, 3), anc),
                (ModelSpec::new(ModelKind::Hopfield, 1.0, 3), anc_h),
            ]
        }
        _ => {
            let run_args = RunArgs {
                preset: args.preset.clone(),
                config: args.config.clone(),
                out: PathBuf::from("."),
                workers: None,
                quiet: args.quiet,
            };
            let (spec, _) = load_spec(&run_args)?;
            let lambda = spec
                .inner_lambda
                .as_ref()
                .and_then(|v| v.last().copied())
                .or_else(|| match spec.axis {
                    sweep::Axis::LambdaGrid => spec.values.last().copied(),
                    _ => None,
                })
                .unwrap_or(spec.model.lambda);
            let mut model = spec.model;
            model.lambda = lambda;
            vec![(model, spec.ancilla)]
        }
    };

    let mut checks: Vec<Check> = Vec::new();
    for (model, ancilla) in &targets {
        let tag = model.kind.name();
        // Fock-truncation convergence at the target coupling
        let start = model.space(8, true)?;
        match spectra::validate_truncation(model, ancilla, &start, 1e-8) {
            Ok(rep) => checks.push(check(
                format!("{tag}: truncation convergence"),
                rep.converged,
                format!(
                    "n_max {} (tail {:.1e}, shift delta {:.1e})",
                    rep.recommended_n_max, rep.tail_occupancy, rep.shift_delta
                ),
            )),
            Err(e) => checks.push(check(format!("{tag}: truncation convergence"), false, e.to_string())),
        }
        // Hamiltonian structure
        let space_s = model.space(10, false)?;
        let defect = vacua::models::conserved_charge_defect(model, &space_s)?;
        checks.push(check(
            format!("{tag}: conserved-charge commutator"),
            defect < 1e-10,
            format!("|[H, Q]| = {defect:.2e}"),
        ));
        // dressed-mode stability: the undriven dynamics keeps the ground
        // state dark (propagation handles degenerate crossings where the
        // algebraic null-space solve would be singular)
        for lambda in [0.0, 0.5, model.lambda] {
            let mut m = *model;
            m.lambda = lambda;
            let diss = DissipationSpec::uniform(0.01);
            let outcome = (|| -> Result<f64, vacua::Error> {
                let frame = dynamics::build_frame(&m, ancilla, &diss, 20, 16, 1e-9)?;
                let ground = dynamics::DensityMatrix::pure(frame.k_levels, 0);
                let drive = dynamics::DriveSpec::new(ancilla.omega_m, 0.0);
                let rho = dynamics::propagate(
                    &frame,
                    &drive,
                    &ground,
                    &dynamics::PropagateSettings::default(),
                )?;
                rho.trace_distance(&ground)
            })();
            checks.push(match outcome {
                Ok(dist) => check(
                    format!("{tag}: dressed steady state = ground at lambda={lambda}"),
                    dist < 1e-8,
                    format!("trace distance {dist:.2e}"),
                ),
                Err(e) => check(
                    format!("{tag}: dressed steady state = ground at lambda={lambda}"),
                    false,
                    e.to_string(),
                ),
            });
        }
    }
    // bare-operator diagnostics: the zero-temperature reservoir must excite
    // the Dicke system once the vacuum is reshaped (expected failure mode)
    {
        let model = ModelSpec::new(ModelKind::Dicke, 1.0, 3);
        let ancilla = AncillaSpec::new(2.75, 0.1);
        let diss = DissipationSpec::new(0.01, 0.01, 0.01, DissipationMode::Bare);
        let outcome = (|| -> Result<f64, vacua::Error> {
            let frame = dynamics::build_frame(&model, &ancilla, &diss, 20, 16, 1e-9)?;
            let rho = dynamics::steady_state_undriven(&frame)?;
            Ok(1.0 - rho.entries[[0, 0]].re)
        })();
        checks.push(match outcome {
            Ok(excited) => check(
                "dicke: bare-mode instability reproduced (naive dissipator heats the vacuum)",
                excited > 1e-3,
                format!("excited population {excited:.3e}"),
            ),
            Err(e) => check("dicke: bare-mode instability reproduced", false, e.to_string()),
        });
    }

    let mut all_pass = true;
    for c in &checks {
        let status = if c.pass { "PASS" } else { "FAIL" };
        println!("check: {:<70} {status} — {}", c.name, c.detail);
        all_pass &= c.pass;
    }
    if !args.quiet {
        println!(
            "{} of {} checks passed",
            checks.iter().filter(|c| c.pass).count(),
            checks.len()
        );
    }
    Ok(all_pass)
}
