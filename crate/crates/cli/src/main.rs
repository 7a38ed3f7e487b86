//! Command-line front door: decide comparability or attractiveness, build
//! and validate coupling tables, run simulations, and replay the published
//! worked examples.
//!
//! Exit codes are the machine contract: 0 for success (comparable, valid,
//! clean run), 1 for a negative verdict or a detected violation, 2 for
//! usage and parse errors.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use ipsflow::comparability::{check_model_comparability, EnumerationConfig, Verdict};
use ipsflow::config::LocalConfiguration;
use ipsflow::coupling::{
    assemble_generator, parse_coupling_csv, solve_bundle, validate_coupling, CouplingTable,
};
use ipsflow::fixtures::{
    nonconservative_example, replay_example, two_species_example,
    worked_nonconservative_rates, worked_two_species_rates,
};
use ipsflow::lattice::{Lattice, Site};
use ipsflow::model::RateModel;
use ipsflow::models::{
    check_allee_attractive, check_bdm_attractive, check_bdm_comparability,
    check_exclusion_attractive, check_gs_conservative, check_msdc_attractive,
    check_two_species_chain, load_model_file, CheckOutcome, ClosedForm, LoadedModel,
};
use ipsflow::sim::{simulate_coupled, simulate_single, SimConfig, SimError};

#[derive(Parser)]
#[command(name = "ipsflow", version, about = "stochastic ordering and couplings for particle systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decide stochastic comparability of two models, or attractiveness of one.
    Check(CheckArgs),
    /// Build the coupling table for a fixed ordered window pair.
    Couple(CoupleArgs),
    /// Simulate a single process or a coupled pair on a torus.
    Simulate(SimulateArgs),
    /// Replay a published worked example and audit its tables.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct CheckArgs {
    /// Model file(s); one with --attractive, two for comparability.
    #[arg(short, long = "model", required = true)]
    model: Vec<PathBuf>,
    /// Check the single model against itself.
    #[arg(long)]
    attractive: bool,
    /// Window radius for the enumeration (defaults to the dependency range).
    #[arg(long)]
    radius: Option<u32>,
    /// Enumeration budget (number of per-site condition checks).
    #[arg(long, default_value_t = 5_000_000)]
    budget: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CoupleArgs {
    /// Model file(s); a single model is coupled with itself.
    #[arg(short, long = "model", required = true)]
    model: Vec<PathBuf>,
    /// Lower window values, comma separated (odd length, centred).
    #[arg(long)]
    eta: String,
    /// Upper window values.
    #[arg(long)]
    xi: String,
    /// Write the coupling table CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Validate an existing table CSV against the window instead of solving.
    #[arg(long)]
    validate_only: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Model file(s); two models run the coupled simulation.
    #[arg(short, long = "model", required = true)]
    model: Vec<PathBuf>,
    /// Torus side length.
    #[arg(short = 'L', long, default_value_t = 10)]
    side: u32,
    /// Simulated time horizon.
    #[arg(short = 'T', long, default_value_t = 100.0)]
    t_max: f64,
    /// Random seed (required; runs are reproducible by construction).
    #[arg(long)]
    seed: u64,
    /// Initial configuration: one value for all sites, or L comma-separated values.
    #[arg(long, default_value = "0")]
    init1: String,
    /// Initial upper configuration for coupled runs.
    #[arg(long)]
    init2: Option<String>,
    /// Skip the comparability precondition check.
    #[arg(long)]
    force: bool,
    /// Budget for the precondition check.
    #[arg(long, default_value_t = 5_000_000)]
    budget: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Output prefix; writes <out>.events.csv and <out>.summary.txt.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Test hook: corrupt the state after this many events.
    #[arg(long)]
    inject_violation: Option<u64>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Which worked example: two-species or nonconservative.
    #[arg(long)]
    example: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check(args) => cmd_check(args),
        Command::Couple(args) => cmd_couple(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Reproduce(args) => cmd_reproduce(args),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn closed_form_attractive(m: &LoadedModel) -> Option<Result<CheckOutcome, String>> {
    let res = match &m.closed_form {
        ClosedForm::Bdm(p) => check_bdm_attractive(p).map_err(|e| e.to_string()),
        ClosedForm::Msdc(p) => check_msdc_attractive(p).map_err(|e| e.to_string()),
        ClosedForm::Allee(p) => check_allee_attractive(p).map_err(|e| e.to_string()),
        ClosedForm::TwoSpecies(r) => Ok(check_two_species_chain(r)),
        ClosedForm::GeneralExclusion(p) => Ok(check_exclusion_attractive(p)),
        ClosedForm::GsConservative(t) => Ok(check_gs_conservative(t)),
        ClosedForm::None => return None,
    };
    Some(res)
}

fn closed_form_pair(a: &LoadedModel, b: &LoadedModel) -> Option<Result<CheckOutcome, String>> {
    match (&a.closed_form, &b.closed_form) {
        (
            ClosedForm::Bdm(p1) | ClosedForm::Msdc(p1),
            ClosedForm::Bdm(p2) | ClosedForm::Msdc(p2),
        ) => Some(check_bdm_comparability(p1, p2).map_err(|e| e.to_string())),
        _ => None,
    }
}

fn render_outcome(report: &mut String, label: &str, outcome: Option<Result<CheckOutcome, String>>) {
    match outcome {
        None => report.push_str(&format!("{label}: n/a (no closed form for this family)\n")),
        Some(Err(e)) => report.push_str(&format!("{label}: not applicable ({e})\n")),
        Some(Ok(o)) => {
            if o.holds {
                report.push_str(&format!("{label}: HOLDS\n"));
            } else {
                report.push_str(&format!(
                    "{label}: FAILS\n  {}\n",
                    o.certificate.unwrap_or_default()
                ));
            }
        }
    }
}

fn cmd_check(args: CheckArgs) -> Result<ExitCode, String> {
    let models: Vec<LoadedModel> = args
        .model
        .iter()
        .map(|p| load_model_file(p).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let cfg = EnumerationConfig {
        radius: args.radius,
        budget: args.budget,
        threads: args.threads,
    };
    let mut report = String::new();
    let mut closed_holds: Option<bool> = None;

    let verdict: Verdict = if args.attractive {
        if models.len() != 1 {
            return Err("--attractive takes exactly one model".to_string());
        }
        let m = &models[0];
        report.push_str(&format!("model: {} ({})\n", m.name, m.family));
        let closed = closed_form_attractive(m);
        if let Some(Ok(o)) = &closed {
            closed_holds = Some(o.holds);
        }
        render_outcome(&mut report, "closed-form attractiveness", closed);
        check_model_comparability(m.model.as_ref(), m.model.as_ref(), &cfg)
            .map_err(|e| e.to_string())?
    } else {
        if models.len() != 2 {
            return Err("comparability takes exactly two models (or use --attractive)".to_string());
        }
        report.push_str(&format!(
            "lower model: {} ({})\nupper model: {} ({})\n",
            models[0].name, models[0].family, models[1].name, models[1].family
        ));
        let closed = closed_form_pair(&models[0], &models[1]);
        if let Some(Ok(o)) = &closed {
            closed_holds = Some(o.holds);
        }
        render_outcome(&mut report, "closed-form comparability", closed);
        check_model_comparability(models[0].model.as_ref(), models[1].model.as_ref(), &cfg)
            .map_err(|e| e.to_string())?
    };

    if verdict.holds {
        report.push_str("general conditions: HOLD\n");
        if closed_holds == Some(false) {
            report
                .push_str("note: closed-form sufficient condition fails, general condition holds\n");
        }
    } else {
        report.push_str("general conditions: FAIL\n");
        if let Some(cert) = &verdict.certificate {
            report.push_str(&format!("certificate: {}\n", cert.describe()));
        }
    }
    emit(&args.out, &report)?;
    Ok(if verdict.holds {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn parse_window(s: &str) -> Result<Vec<u32>, String> {
    let vals: Result<Vec<u32>, _> = s.split(',').map(|t| t.trim().parse::<u32>()).collect();
    let vals = vals.map_err(|_| format!("bad window {s:?}"))?;
    if vals.is_empty() || vals.len() % 2 == 0 {
        return Err("window needs an odd number of values".to_string());
    }
    Ok(vals)
}

fn cmd_couple(args: CoupleArgs) -> Result<ExitCode, String> {
    let models: Vec<LoadedModel> = args
        .model
        .iter()
        .map(|p| load_model_file(p).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let (m1, m2): (Arc<dyn RateModel>, Arc<dyn RateModel>) = match models.len() {
        1 => (models[0].model.clone(), models[0].model.clone()),
        2 => (models[0].model.clone(), models[1].model.clone()),
        _ => return Err("couple takes one or two models".to_string()),
    };
    if m1.dim() != 1 {
        return Err("window coupling is one-dimensional".to_string());
    }
    let lo = parse_window(&args.eta)?;
    let hi = parse_window(&args.xi)?;
    if lo.len() != hi.len() {
        return Err("eta and xi must have the same length".to_string());
    }
    let radius = (lo.len() / 2) as u32;
    let n = m1.max_value();
    let eta = LocalConfiguration::new(ipsflow::lattice::Window::path_1d(0, radius), lo, n)
        .map_err(|e| e.to_string())?;
    let xi = LocalConfiguration::new(ipsflow::lattice::Window::path_1d(0, radius), hi, n)
        .map_err(|e| e.to_string())?;
    if !eta.leq(&xi).map_err(|e| e.to_string())? {
        return Err("eta must be below xi site-wise".to_string());
    }

    if let Some(path) = &args.validate_only {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let entries = parse_coupling_csv(&text)?;
        let table = CouplingTable {
            eta,
            xi,
            entries,
            covered_sites: vec![],
            fully_covered: vec![],
            covered_pairs: vec![],
        };
        let report = validate_coupling(&table, m1.as_ref(), m2.as_ref())
            .map_err(|e| e.to_string())?;
        emit(&args.out, &report.render())?;
        return Ok(if report.all_pass() {
            ExitCode::SUCCESS
        } else {
            ExitCode::from(1)
        });
    }

    // sites whose dependency window fits inside the given values
    let need = m1.delta().max(m2.delta()) + m1.dep_radius().max(m2.dep_radius());
    if radius < need {
        return Err(format!(
            "window radius {radius} below the dependency requirement {need}"
        ));
    }
    let span = (radius - need) as i32;
    let sites: Vec<Site> = (-span..=span).map(Site::at).collect();
    let bundle = match solve_bundle(m1.as_ref(), m2.as_ref(), &eta, &xi, &sites) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("coupling construction failed: {e}");
            return Ok(ExitCode::from(1));
        }
    };
    let table = assemble_generator(m1.as_ref(), m2.as_ref(), &bundle).map_err(|e| e.to_string())?;
    let report = validate_coupling(&table, m1.as_ref(), m2.as_ref()).map_err(|e| e.to_string())?;
    if let Some(path) = &args.out {
        std::fs::write(path, table.to_csv())
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    } else {
        print!("{}", table.to_csv());
    }
    eprint!("{}", report.render());
    Ok(if report.all_pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn parse_init(s: &str, len: usize) -> Result<Vec<u32>, String> {
    let vals: Result<Vec<u32>, _> = s.split(',').map(|t| t.trim().parse::<u32>()).collect();
    let vals = vals.map_err(|_| format!("bad configuration {s:?}"))?;
    if vals.len() == 1 {
        Ok(vec![vals[0]; len])
    } else if vals.len() == len {
        Ok(vals)
    } else {
        Err(format!(
            "configuration has {} values, torus has {len}",
            vals.len()
        ))
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<ExitCode, String> {
    let models: Vec<LoadedModel> = args
        .model
        .iter()
        .map(|p| load_model_file(p).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    if models.is_empty() || models.len() > 2 {
        return Err("simulate takes one or two models".to_string());
    }
    let m1 = models[0].model.clone();
    let lattice = Lattice::new(m1.dim(), args.side, m1.delta(), m1.dep_radius())
        .map_err(|e| e.to_string())?;
    let n_sites = lattice.num_sites();
    let init1 = parse_init(&args.init1, n_sites)?;
    let config = SimConfig {
        lattice,
        t_max: args.t_max,
        seed: args.seed,
        record_events: true,
        inject_violation_after: args.inject_violation,
        audit_every: None,
    };

    let traj = if models.len() == 2 {
        let m2 = models[1].model.clone();
        let init2 = parse_init(
            args.init2.as_deref().ok_or("coupled runs need --init2")?,
            n_sites,
        )?;
        if !args.force {
            let cfg = EnumerationConfig {
                radius: None,
                budget: args.budget,
                threads: args.threads,
            };
            let verdict = check_model_comparability(m1.as_ref(), m2.as_ref(), &cfg)
                .map_err(|e| e.to_string())?;
            if !verdict.holds {
                let cert = verdict
                    .certificate
                    .map(|c| c.describe())
                    .unwrap_or_default();
                return Err(format!(
                    "models are not comparable ({cert}); pass --force to simulate anyway"
                ));
            }
        }
        simulate_coupled(m1.as_ref(), m2.as_ref(), &init1, &init2, &config)
    } else {
        simulate_single(m1.as_ref(), &init1, &config)
    };

    match traj {
        Ok(traj) => {
            if let Some(prefix) = &args.out {
                let events_path = prefix.with_extension("events.csv");
                let summary_path = prefix.with_extension("summary.txt");
                std::fs::write(&events_path, traj.export_events())
                    .map_err(|e| format!("cannot write {}: {e}", events_path.display()))?;
                std::fs::write(&summary_path, traj.summary())
                    .map_err(|e| format!("cannot write {}: {e}", summary_path.display()))?;
            } else {
                print!("{}", traj.summary());
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(SimError::OrderViolation { t, effect1, effect2 }) => {
            eprintln!("order violation at t = {t}: {effect1:?} / {effect2:?}");
            Ok(ExitCode::from(1))
        }
        Err(e) => Err(e.to_string()),
    }
}

fn cmd_reproduce(args: ReproduceArgs) -> Result<ExitCode, String> {
    let example = match args.example.as_str() {
        "two-species" => two_species_example(&worked_two_species_rates()),
        "nonconservative" => nonconservative_example(&worked_nonconservative_rates(), 5),
        other => return Err(format!("unknown example {other:?}")),
    };
    let replay = replay_example(&example).map_err(|e| e.to_string())?;
    emit(&args.out, &replay.report)?;
    Ok(if replay.ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}
