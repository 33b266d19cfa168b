//! `rhhc`: generate instances, solve them, check plans, run factor grids.
//!
//! Exit codes: 0 success or proven optimum, 1 runtime error, 2 bad flags,
//! 3 time limit hit (best plan written), 4 infeasible instance, 5 invalid plan.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rhhc_core::evaluator::SimulationConfig;
use rhhc_core::{
    generate, load_instance, profit, simulate, solve, validate_plan, Discipline, Error,
    GeneratorConfig, Instance, Plan, PlanStatus, Region, SolveConfig, TwLevel, UncertaintyLevel,
};

const EXIT_ERROR: u8 = 1;
const EXIT_TIME_LIMIT: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;
const EXIT_INVALID_PLAN: u8 = 5;

#[derive(Parser)]
#[command(
    name = "rhhc",
    version,
    about = "Robust home healthcare routing and scheduling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic instance.
    Generate(GenerateArgs),
    /// Solve an instance and write the plan.
    Solve(SolveArgs),
    /// Validate a plan and report its profit.
    Evaluate(EvaluateArgs),
    /// Generate and solve every region x discipline x window x uncertainty cell.
    Grid(GridArgs),
}

#[derive(Args, Clone)]
struct SizeArgs {
    /// Existing patients.
    #[arg(long, default_value_t = 20)]
    existing: usize,
    /// New patients per day of the horizon.
    #[arg(long, default_value_t = 3)]
    new_per_day: usize,
    #[arg(long, default_value_t = 3)]
    caregivers: usize,
    #[arg(long, default_value_t = 5)]
    days: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = "t20")]
    region: Region,
    /// nursing or pt
    #[arg(long, default_value = "nursing")]
    discipline: Discipline,
    /// wide, narrow or tight
    #[arg(long, default_value = "wide")]
    tw: TwLevel,
    /// none, low, medium or high
    #[arg(long, default_value = "none")]
    uncertainty: UncertaintyLevel,
    #[command(flatten)]
    size: SizeArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Seconds; 0 returns the heuristic plan.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Accepted for pipeline symmetry; the solver is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    plan: PathBuf,
    /// Monte Carlo scenarios to simulate.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-scenario CSV destination; stdout when omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    #[command(flatten)]
    size: SizeArgs,
    /// Seconds per cell.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("RHHC_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Grid(a) => cmd_grid(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = match e.downcast_ref::<Error>() {
                Some(Error::Infeasible(_)) => EXIT_INFEASIBLE,
                Some(Error::InvalidPlan(_)) => EXIT_INVALID_PLAN,
                _ => EXIT_ERROR,
            };
            ExitCode::from(code)
        }
    }
}

fn time_limit(secs: Option<f64>) -> anyhow::Result<Option<Duration>> {
    secs.map(|s| {
        Duration::try_from_secs_f64(s)
            .context("--time-limit must be a nonnegative number of seconds")
    })
    .transpose()
}

fn generator_config(size: &SizeArgs) -> GeneratorConfig {
    GeneratorConfig {
        n_existing: size.existing,
        n_new_per_day: size.new_per_day,
        n_caregivers: size.caregivers,
        n_days: size.days,
        seed: size.seed,
        ..GeneratorConfig::default()
    }
}

fn cmd_generate(a: GenerateArgs) -> anyhow::Result<u8> {
    let config = GeneratorConfig {
        region: a.region,
        discipline: a.discipline,
        tw: a.tw,
        uncertainty: a.uncertainty,
        ..generator_config(&a.size)
    };
    let inst = generate(&config);
    inst.save(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "instance={} patients={} new={} caregivers={} days={} budgets=({},{})",
        a.out.display(),
        inst.n_patients(),
        inst.new_patients().len(),
        inst.n_caregivers(),
        inst.n_days(),
        inst.budgets.gamma_p,
        inst.budgets.gamma_t
    );
    Ok(0)
}

fn read_instance(path: &Path) -> anyhow::Result<Instance> {
    load_instance(path).with_context(|| format!("reading instance {}", path.display()))
}

fn cmd_solve(a: SolveArgs) -> anyhow::Result<u8> {
    let inst = read_instance(&a.instance)?;
    let config = SolveConfig {
        time_limit: time_limit(a.time_limit)?,
        threads: a.threads,
        ..SolveConfig::default()
    };
    let out = solve(&inst, &config)?;
    log::info!("solver stats: {:?}", out.stats);
    out.plan
        .save(&inst, &a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    let p = &out.plan;
    let s = &out.stats;
    let status = match p.status {
        PlanStatus::Optimal => "optimal",
        PlanStatus::TimeLimit => "time_limit",
        PlanStatus::Heuristic => "heuristic",
    };
    println!(
        "status={status} profit={} revenue={} travel={} wage={} accepted={} weekly_columns={} route_columns={} nodes1={} nodes2={} seconds={:.3}",
        p.profit,
        p.revenue,
        p.travel,
        p.wage,
        p.accepted.len(),
        s.weekly_columns,
        s.route_columns,
        s.nodes1,
        s.nodes2,
        s.elapsed.as_secs_f64()
    );
    Ok(if p.status == PlanStatus::Optimal {
        0
    } else {
        EXIT_TIME_LIMIT
    })
}

fn cmd_evaluate(a: EvaluateArgs) -> anyhow::Result<u8> {
    let inst = read_instance(&a.instance)?;
    let plan =
        Plan::load(&a.plan, &inst).with_context(|| format!("reading plan {}", a.plan.display()))?;
    let violations = validate_plan(&plan, &inst);
    if !violations.is_empty() {
        println!("verdict=Invalid violations={}", violations.len());
        for v in &violations {
            println!("{v}");
        }
        return Ok(EXIT_INVALID_PLAN);
    }
    let money = profit(&plan, &inst)?;
    println!(
        "verdict=Valid profit={} revenue={} travel={} wage={}",
        money.profit, money.revenue, money.travel, money.wage
    );
    if let Some(samples) = a.samples {
        let report = simulate(&plan, &inst, samples, a.seed, SimulationConfig::default())?;
        println!(
            "samples={samples} late_visits={} total_lateness={} max_lateness={} overtime_routes={} total_overtime={} max_overtime={}",
            report.late_visits,
            report.total_lateness,
            report.max_lateness,
            report.overtime_routes,
            report.total_overtime,
            report.max_overtime
        );
        match &a.csv {
            Some(path) => report.write_csv(
                File::create(path).with_context(|| format!("writing {}", path.display()))?,
            )?,
            None => report.write_csv(io::stdout().lock())?,
        }
    }
    Ok(0)
}

pub const GRID_HEADER: [&str; 12] = [
    "region",
    "discipline",
    "tw",
    "uncertainty",
    "status",
    "profit",
    "revenue",
    "wage",
    "travel",
    "accepted",
    "seconds",
    "error",
];

fn cmd_grid(a: GridArgs) -> anyhow::Result<u8> {
    let limit = time_limit(a.time_limit)?;
    let sink: Box<dyn Write> = match &a.out {
        Some(path) => {
            Box::new(File::create(path).with_context(|| format!("writing {}", path.display()))?)
        }
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(GRID_HEADER)?;
    for region in Region::ALL {
        for discipline in Discipline::ALL {
            for tw in TwLevel::ALL {
                for uncertainty in UncertaintyLevel::ALL {
                    let config = GeneratorConfig {
                        region,
                        discipline,
                        tw,
                        uncertainty,
                        ..generator_config(&a.size)
                    };
                    let inst = generate(&config);
                    let started = Instant::now();
                    let solved = solve(
                        &inst,
                        &SolveConfig {
                            time_limit: limit,
                            threads: a.threads,
                            ..SolveConfig::default()
                        },
                    );
                    let seconds = format!("{:.3}", started.elapsed().as_secs_f64());
                    let mut row = vec![
                        region.to_string(),
                        discipline.to_string(),
                        tw.to_string(),
                        uncertainty.name().to_string(),
                    ];
                    match solved {
                        Ok(out) => {
                            let p = out.plan;
                            let status = if p.status == PlanStatus::Optimal {
                                "optimal"
                            } else {
                                "time_limit"
                            };
                            row.extend([
                                status.to_string(),
                                p.profit.to_string(),
                                p.revenue.to_string(),
                                p.wage.to_string(),
                                p.travel.to_string(),
                                p.accepted.len().to_string(),
                                seconds,
                                String::new(),
                            ]);
                        }
                        Err(e) => {
                            log::warn!(
                                "grid cell {region}/{discipline}/{tw}/{} failed: {e}",
                                uncertainty.name()
                            );
                            row.extend(["failed".to_string()]);
                            row.extend(std::iter::repeat_n(String::new(), 5));
                            row.extend([seconds, e.to_string()]);
                        }
                    }
                    w.write_record(&row)?;
                    w.flush()?;
                }
            }
        }
    }
    Ok(0)
}
