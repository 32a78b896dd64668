use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hev_seqopt::ac_mpc::{run_ac_controller, AcMode};
use hev_seqopt::pipeline::{load_scenario_dir, run_fleet, run_pipeline, Scenario, StageToggles};
use hev_seqopt::power_split::{dp_optimize, read_series_csv, rule_based, simulate_schedule, PowerDemand};
use hev_seqopt::report;
use hev_seqopt::sim::{simulate_corridor, traction_series, Driver};
use hev_seqopt::speed_planner::Trajectory;
use hev_seqopt::{Error, Result};

#[derive(Parser)]
#[command(name = "hev-seqopt", version, about = "Sequential speed, A/C and power-split optimization for a connected HEV")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Eco,
    Constant,
}

#[derive(Subcommand)]
enum Command {
    /// Baseline and cumulative stage configurations for one scenario.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated subset of speed,ac,dp (default: the scenario's toggles).
        #[arg(long)]
        stages: Option<String>,
        /// Directory for report.json / report.csv; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Speed optimization alone over every scenario in a directory.
    Fleet {
        #[arg(long)]
        scenarios: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Eco-driving speed trace for the scenario's connected vehicle.
    PlanSpeed {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        vehicle: u32,
        /// Directory for trajectory.csv and traction.csv; trajectory to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// A/C load along a speed trajectory CSV.
    PlanAc {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long, value_enum, default_value = "eco")]
        mode: Mode,
        /// Scenario supplying plant, ambient and controller settings (defaults otherwise).
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Power split over per-second traction and A/C power series.
    OptimizeSplit {
        /// CSV with a `P_trac` column, W.
        #[arg(long)]
        traction: PathBuf,
        /// CSV with a `P_AC` column, W; A/C off when omitted.
        #[arg(long)]
        ac: Option<PathBuf>,
        /// Rule-based load leveling instead of dynamic programming.
        #[arg(long)]
        baseline: bool,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        soc0: Option<f64>,
        /// Directory for schedule.csv and energy_report.json; report to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn finish<W: Write>(mut w: W, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn load_or_default(path: Option<&Path>) -> Result<Option<Scenario>> {
    path.map(Scenario::load).transpose()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            scenario,
            stages,
            out,
            format,
        } => {
            let mut s = Scenario::load(&scenario)?;
            if let Some(list) = stages {
                s.stages = StageToggles::parse(&list)?;
            }
            let r = run_pipeline(&s)?;
            let write = |w: &mut dyn Write| match format {
                Format::Json => report::write_json(&r, w),
                Format::Csv => report::write_csv(&r, w),
            };
            match out {
                Some(dir) => {
                    ensure_dir(&dir)?;
                    let path = dir.join(match format {
                        Format::Json => "report.json",
                        Format::Csv => "report.csv",
                    });
                    let mut f = create(&path)?;
                    write(&mut f)?;
                    finish(f, &path)
                }
                None => write(&mut io::stdout().lock()),
            }
        }
        Command::Fleet { scenarios, out } => {
            let summary = run_fleet(&load_scenario_dir(&scenarios)?)?;
            match out {
                Some(dir) => {
                    ensure_dir(&dir)?;
                    let path = dir.join("fleet.json");
                    let mut f = create(&path)?;
                    serde_json::to_writer_pretty(&mut f, &summary)?;
                    finish(f, &path)
                }
                None => {
                    serde_json::to_writer_pretty(io::stdout().lock(), &summary)?;
                    println!();
                    Ok(())
                }
            }
        }
        Command::PlanSpeed { scenario, vehicle, out } => {
            let s = Scenario::load(&scenario)?;
            if vehicle != s.ego.vehicle_id {
                return Err(Error::InvalidInput(format!(
                    "vehicle {vehicle} is not the scenario's connected vehicle ({})",
                    s.ego.vehicle_id
                )));
            }
            let driver = Driver::Eco {
                limits: s.planner,
                queue: s.queue,
            };
            let trace = simulate_corridor(&s.corridor, &s.background.arrivals(), &s.ego, &driver, &s.sim)?;
            for p in &trace.plans {
                let strategy = p.strategy.map_or("fallback".to_string(), |k| format!("{k:?}"));
                eprintln!("intersection {} at t={:.1} s: {strategy}", p.intersection, p.time);
            }
            match out {
                Some(dir) => {
                    ensure_dir(&dir)?;
                    let path = dir.join("trajectory.csv");
                    let mut f = create(&path)?;
                    trace.trajectory.write_csv(&mut f)?;
                    finish(f, &path)?;

                    let path = dir.join("traction.csv");
                    let mut w = csv::Writer::from_writer(create(&path)?);
                    w.write_record(["time", "P_trac"])?;
                    for (k, p) in traction_series(&trace.trajectory, &s.vehicle, s.regen_limit).iter().enumerate() {
                        w.write_record([k.to_string(), p.to_string()])?;
                    }
                    w.flush().map_err(|e| Error::Io { path, source: e })
                }
                None => trace.trajectory.write_csv(io::stdout().lock()),
            }
        }
        Command::PlanAc {
            trajectory,
            mode,
            scenario,
            out,
        } => {
            let s = load_or_default(scenario.as_deref())?;
            let traj = Trajectory::read_csv(open(&trajectory)?)?;
            let mode = match mode {
                Mode::Eco => AcMode::EcoCool,
                Mode::Constant => AcMode::ConstantSetpoint,
            };
            let ac = match &s {
                Some(s) => run_ac_controller(
                    &traj,
                    &s.initial_cabin,
                    &s.ambient_profile(),
                    &s.thermal,
                    &s.scheduling,
                    &s.piloting,
                    mode,
                )?,
                None => {
                    let d = Scenario::from_json(DEFAULT_STAGE_SCENARIO)?;
                    run_ac_controller(
                        &traj,
                        &d.initial_cabin,
                        &d.ambient_profile(),
                        &d.thermal,
                        &d.scheduling,
                        &d.piloting,
                        mode,
                    )?
                }
            };
            eprintln!("A/C energy {:.1} kJ", ac.energy() / 1e3);
            match out {
                Some(path) => {
                    let mut f = create(&path)?;
                    ac.write_csv(&mut f)?;
                    finish(f, &path)
                }
                None => ac.write_csv(io::stdout().lock()),
            }
        }
        Command::OptimizeSplit {
            traction,
            ac,
            baseline,
            scenario,
            soc0,
            out,
        } => {
            let s = match load_or_default(scenario.as_deref())? {
                Some(s) => s,
                None => Scenario::from_json(DEFAULT_STAGE_SCENARIO)?,
            };
            let p_trac = read_series_csv(open(&traction)?, "P_trac")?;
            let (p_ac, ac_on) = match &ac {
                Some(path) => {
                    let p = read_series_csv(open(path)?, "P_AC")?;
                    let on = vec![true; p.len()];
                    (p, on)
                }
                None => (vec![0.0; p_trac.len()], vec![false; p_trac.len()]),
            };
            if p_ac.len() != p_trac.len() {
                return Err(Error::InvalidInput(format!(
                    "traction has {} samples but A/C has {}",
                    p_trac.len(),
                    p_ac.len()
                )));
            }
            let demand = PowerDemand {
                p_trac: &p_trac,
                p_ac: &p_ac,
                ac_on: &ac_on,
            };
            let soc0 = soc0.unwrap_or(s.soc0);
            let schedule = if baseline {
                rule_based(demand, soc0, &s.rule_based, &s.powertrain)?
            } else {
                dp_optimize(demand, soc0, &s.dp, &s.powertrain)?.schedule
            };
            let energy = simulate_schedule(&schedule, demand, &s.powertrain)?;
            match out {
                Some(dir) => {
                    ensure_dir(&dir)?;
                    let path = dir.join("schedule.csv");
                    let mut f = create(&path)?;
                    schedule.write_csv(&mut f)?;
                    finish(f, &path)?;
                    let path = dir.join("energy_report.json");
                    let mut f = create(&path)?;
                    serde_json::to_writer_pretty(&mut f, &energy)?;
                    finish(f, &path)
                }
                None => {
                    serde_json::to_writer_pretty(io::stdout().lock(), &energy)?;
                    println!();
                    Ok(())
                }
            }
        }
    }
}

/// Stage-level commands without `--scenario` use these defaults.
const DEFAULT_STAGE_SCENARIO: &str = r#"{
    "name": "defaults",
    "corridor": {"length": 1.0, "speed_limit": 15.0, "intersections": []},
    "ego": {"vehicle_id": 0, "entry_time": 0.0, "entry_speed": 0.0}
}"#;

fn exit_code(e: &Error) -> u8 {
    if e.is_infeasible() {
        3
    } else if e.is_io() {
        4
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
