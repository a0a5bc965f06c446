use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Parser, Subcommand};
use hems_core::analysis::{check_complementarity, default_eps_c};
use hems_core::model::HouseholdScenario;
use hems_core::oracle::{compare, solve_exact, DEFAULT_K_LIMIT};
use hems_core::program_builder::{objective_value, schedule_from_controls};
use hems_cli::batch::{run_batch, solve_and_certify, write_batch, HouseInput, RunOptions};
use hems_cli::config::ScenarioConfig;
use hems_cli::profiles::{house_id_of, load_profiles, profile_files, write_profiles};
use hems_cli::schedule::{load_schedule, write_schedule};
use hems_cli::sweep::{parse_eta_grid, sweep_condition};
use hems_cli::synth::{synth_house, synth_houses};
use hems_cli::{ausgrid, exit, InputError};
use serde_json::json;

#[derive(Parser)]
#[command(name = "hems", version, about = "Household energy scheduling with complementarity certificates")]
struct Cli {
    /// Complementarity tolerance in kW (default 1e-6 * max(u_ch_max, u_dch_max, 1)).
    #[arg(long, global = true)]
    eps_c: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one house and write its schedule and certificate.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a schedule CSV against the optimum of its scenario.
    Certify {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        solution: PathBuf,
    },
    /// Compare the relaxed optimum with exhaustive enumeration of charge/discharge patterns.
    Oracle {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long, default_value_t = DEFAULT_K_LIMIT)]
        k_limit: usize,
    },
    /// Solve and certify every profile CSV in a directory.
    Batch {
        #[arg(long)]
        profiles_dir: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write synthetic house profiles.
    Synth {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        houses: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-solve one house over a grid of battery efficiencies.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated `eta_ch:eta_dch` pairs.
        #[arg(long)]
        eta_grid: String,
        #[arg(long)]
        out: PathBuf,
        /// Profile CSV of the base house (default: synthetic house 0 of seed 42, 24 steps).
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
    /// Convert the half-hourly solar-home dataset into profile CSVs.
    ConvertAusgrid {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_house(scenario: &Path, profiles: &Path) -> Result<(ScenarioConfig, HouseholdScenario<f64>)> {
    let cfg = ScenarioConfig::load(scenario)?;
    let table = load_profiles(profiles, None)?;
    let s = cfg.scenario(&table);
    Ok((cfg, s))
}

fn options(eps_c: Option<f64>) -> RunOptions {
    RunOptions {
        eps_c,
        ..RunOptions::default()
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| InputError::io(path, e))?;
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| InputError::io(dir, e))?;
    Ok(())
}

fn cmd_solve(scenario: &Path, profiles: &Path, out: &Path, eps_c: Option<f64>) -> Result<u8> {
    let (_, s) = load_house(scenario, profiles)?;
    let id = house_id_of(profiles);
    let o = solve_and_certify(&s, &options(eps_c));
    create_dir(out)?;
    if let Some(sol) = &o.schedule {
        write_schedule(&out.join(format!("{id}_schedule.csv")), &s, sol)?;
    }
    let report = json!({
        "house_id": id,
        "status": o.status,
        "message": o.message,
        "objective": o.schedule.as_ref().map(|x| x.objective),
        "bill": o.schedule.as_ref().map(|x| x.bill),
        "theorem_holds": o.theorem_holds,
        "certified": o.certified(),
        "certificate": o.certificate,
    });
    write_json(&out.join(format!("{id}_certificate.json")), &report)?;
    println!("{id}: {} certified={}", o.status, o.certified());
    Ok(if o.is_certificate_failure() {
        exit::CERTIFICATE_FAILED
    } else if o.status == hems_cli::batch::STATUS_INVALID {
        eprintln!("{}", o.message);
        exit::INPUT
    } else {
        exit::OK
    })
}

/// The supplied schedule passes when it is feasible for the scenario, its cost
/// matches the re-solved optimum, and (under the sufficient condition) it has
/// no simultaneous steps. The KKT certificate comes from the re-solve, since a
/// schedule file carries no multipliers.
fn cmd_certify(scenario: &Path, profiles: &Path, solution: &Path, eps_c: Option<f64>) -> Result<u8> {
    let (_, s) = load_house(scenario, profiles)?;
    let file = load_schedule(solution)?;
    if file.controls.u_ch.len() != s.steps() {
        return Err(anyhow!(InputError::RowCount {
            path: solution.to_path_buf(),
            expected: s.steps(),
            found: file.controls.u_ch.len(),
        }));
    }
    let o = solve_and_certify(&s, &options(eps_c));
    let (Some(prog), Some(opt)) = (&o.program, &o.schedule) else {
        println!("re-solve status {}: {}", o.status, o.message);
        return Ok(if o.status == hems_cli::batch::STATUS_INVALID { exit::INPUT } else { exit::OK });
    };
    let given = schedule_from_controls(&s, file.controls, Vec::new())?;
    let x = prog.assemble_primal(&s, &given.controls)?;
    let violation = prog
        .qp
        .ineq_values(&x)
        .into_iter()
        .fold(0.0_f64, f64::max)
        .max(prog.qp.eq_values(&x).into_iter().fold(0.0, |a, v| a.max(v.abs())));
    let feasible = violation <= 1e-7;
    let objective = objective_value(&s, &given);
    let rel_gap = (objective - opt.objective) / (1.0 + opt.objective.abs());
    let optimal = rel_gap.abs() <= 1e-6;
    let complementarity = match &s.battery {
        Some(b) => Some(check_complementarity(&given, eps_c.unwrap_or_else(|| default_eps_c(b)))?),
        None => None,
    };
    let non_simultaneous = complementarity.as_ref().map_or(true, |c| c.non_simultaneous);
    let holds = o.theorem_holds == Some(true);
    let passed = feasible && optimal && o.certified() && (!holds || non_simultaneous);
    let report = json!({
        "solution": solution.display().to_string(),
        "max_constraint_violation": violation,
        "feasible": feasible,
        "objective": objective,
        "optimal_objective": opt.objective,
        "relative_gap": rel_gap,
        "optimal": optimal,
        "theorem_holds": o.theorem_holds,
        "complementarity": complementarity,
        "resolve_certificate": o.certificate,
        "passed": passed,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(if passed || !holds { exit::OK } else { exit::CERTIFICATE_FAILED })
}

fn cmd_oracle(scenario: &Path, profiles: &Path, k_limit: usize, eps_c: Option<f64>) -> Result<u8> {
    let (_, s) = load_house(scenario, profiles)?;
    let o = solve_and_certify(&s, &options(eps_c));
    let relaxed = o
        .schedule
        .as_ref()
        .ok_or_else(|| anyhow!("relaxed problem not solved: {} {}", o.status, o.message))?;
    let exact = solve_exact(&s, k_limit, &Default::default())?;
    let best = exact.best.as_ref().ok_or_else(|| anyhow!("no feasible charge/discharge pattern"))?;
    let gap = compare(relaxed, best);
    let report = json!({
        "steps": s.steps(),
        "patterns": exact.all.len(),
        "feasible_patterns": exact.all.iter().filter(|p| p.is_feasible()).count(),
        "unresolved_patterns": exact.unresolved,
        "best_pattern": format!("{:0width$b}", best.pattern, width = s.steps()),
        "theorem_holds": o.theorem_holds,
        "gap": gap,
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(exit::OK)
}

fn cmd_batch(profiles_dir: &Path, scenario: &Path, out: &Path, eps_c: Option<f64>) -> Result<u8> {
    let cfg = ScenarioConfig::load(scenario)?;
    let inputs: Vec<HouseInput> = profile_files(profiles_dir)?
        .iter()
        .map(|p| HouseInput {
            house_id: house_id_of(p),
            scenario: load_profiles(p, None)
                .map(|t| cfg.scenario(&t))
                .map_err(|e| e.to_string()),
        })
        .collect();
    let (report, results) = run_batch(&inputs, &cfg.currency, &options(eps_c));
    write_batch(out, &report, &results)?;
    let steps: usize = results
        .iter()
        .filter_map(|r| r.scenario.as_ref().filter(|s| s.battery.is_some()).map(|s| s.steps()))
        .sum();
    println!(
        "houses={} certified={} simultaneous_steps={}/{} max_margin={}",
        report.rows.len(),
        report.certified_count(),
        report.simultaneous_steps(),
        steps,
        report.max_margin().map_or("-".into(), |m| format!("{m:e}")),
    );
    Ok(report.exit_code())
}

fn cmd_synth(seed: u64, houses: usize, k: usize, out: &Path) -> Result<u8> {
    if houses == 0 || k == 0 {
        return Err(anyhow!(InputError::Other("--houses and --k must be at least 1".into())));
    }
    create_dir(out)?;
    for t in synth_houses(seed, houses, k) {
        write_profiles(&out.join(format!("{}.csv", t.house_id)), &t)?;
    }
    println!("wrote {houses} profiles to {}", out.display());
    Ok(exit::OK)
}

fn cmd_sweep(scenario: &Path, grid: &str, out: &Path, profiles: Option<&Path>, eps_c: Option<f64>) -> Result<u8> {
    let cfg = ScenarioConfig::load(scenario)?;
    let table = match profiles {
        Some(p) => load_profiles(p, None)?,
        None => synth_house(42, 0, 24),
    };
    let grid = parse_eta_grid(grid)?;
    let report = sweep_condition(&cfg.scenario(&table), &grid, &options(eps_c))?;
    report.write(out)?;
    for r in &report.rows {
        println!(
            "eta={}:{} product={} status={} max_margin={} theorem_holds={}",
            r.eta_ch,
            r.eta_dch,
            r.product,
            r.status,
            r.max_margin.map_or("-".into(), |m| format!("{m:e}")),
            r.theorem_holds
        );
    }
    Ok(if report.violations() > 0 { exit::CERTIFICATE_FAILED } else { exit::OK })
}

fn run(cli: Cli) -> Result<u8> {
    let eps_c = cli.eps_c;
    if eps_c.is_some_and(|e| !(e >= 0.0 && e.is_finite())) {
        return Err(anyhow!(InputError::Other("--eps-c must be a finite value >= 0".into())));
    }
    match cli.command {
        Command::Solve { scenario, profiles, out } => cmd_solve(&scenario, &profiles, &out, eps_c),
        Command::Certify { scenario, profiles, solution } => cmd_certify(&scenario, &profiles, &solution, eps_c),
        Command::Oracle { scenario, profiles, k_limit } => cmd_oracle(&scenario, &profiles, k_limit, eps_c),
        Command::Batch { profiles_dir, scenario, out } => cmd_batch(&profiles_dir, &scenario, &out, eps_c),
        Command::Synth { seed, houses, k, out } => cmd_synth(seed, houses, k, &out),
        Command::Sweep { scenario, eta_grid, out, profiles } => {
            cmd_sweep(&scenario, &eta_grid, &out, profiles.as_deref(), eps_c)
        }
        Command::ConvertAusgrid { input, out } => {
            let written = ausgrid::convert_ausgrid(&input, &out)?;
            println!("wrote {} profiles to {}", written.len(), out.display());
            Ok(exit::OK)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::INPUT } else { exit::OK });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit::INPUT)
        }
    }
}
