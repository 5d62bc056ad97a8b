use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

mod config;
mod error;
mod scenarios;
mod table;

use config::ScenarioConfig;
use error::{CliError, ConfigError};
use scenarios::SolverTolerances;

#[derive(Parser)]
#[command(name = "uom-sim", version, about = "Run qubit-mediated optomechanics scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and write `<scenario>.csv` and `<scenario>.meta.json`.
    Run {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Worker threads for sweeps.
        #[arg(long, env = "UOM_SIM_JOBS")]
        jobs: Option<usize>,
        /// Also write `<scenario>.svg`.
        #[arg(long)]
        svg: bool,
        #[arg(long, allow_negative_numbers = true)]
        rtol: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        atol: Option<f64>,
    },
    /// Check a config without solving anything.
    Validate { config: PathBuf },
    /// Print the resolved parameters and derived constants as JSON.
    Params { config: PathBuf },
}

fn load(path: &Path) -> Result<(String, ScenarioConfig), ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let cfg = ScenarioConfig::from_json(&text)?;
    cfg.validate()?;
    Ok((text, cfg))
}

fn tolerances(rtol: Option<f64>, atol: Option<f64>) -> Result<SolverTolerances, ConfigError> {
    let d = SolverTolerances::default();
    let t = SolverTolerances {
        rtol: rtol.unwrap_or(d.rtol),
        atol: atol.unwrap_or(d.atol),
    };
    for (name, v) in [("--rtol", t.rtol), ("--atol", t.atol)] {
        if !(v.is_finite() && v > 0.0 && v < 1.0) {
            return Err(ConfigError::field(name, format!("must lie in (0, 1), got {v}")));
        }
    }
    Ok(t)
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn run(config: &Path, out: &Path, jobs: Option<usize>, svg: bool, tol: (Option<f64>, Option<f64>)) -> Result<(), CliError> {
    let (text, cfg) = load(config)?;
    let tol = tolerances(tol.0, tol.1)?;
    if jobs == Some(0) {
        return Err(ConfigError::field("--jobs", "must be at least 1").into());
    }
    let resolved = cfg.resolve()?;
    let name = cfg.scenario.name();
    std::fs::create_dir_all(out).map_err(|e| CliError::Output {
        path: out.display().to_string(),
        message: e.to_string(),
    })?;

    log::info!("running {name}");
    let start = Instant::now();
    let solved = uom_core::parallel::with_jobs(jobs, || scenarios::run(&cfg, &resolved, &tol))
        .and_then(|r| r)
        .map_err(|source| CliError::Solver { scenario: name, source })?;
    let wall = start.elapsed().as_secs_f64();

    let csv = solved.table.to_csv().map_err(|e| CliError::Output {
        path: format!("{name}.csv"),
        message: e.to_string(),
    })?;
    let (nc, nm) = scenarios::dims(&cfg);
    let meta = json!({
        "scenario": name,
        "config": cfg,
        "config_source": text,
        "params_angular": resolved.params,
        "truncations_used": { "cavity": nc, "mech": nm },
        "truncation": solved.truncation,
        "truncation_tail_limit": scenarios::TAIL_LIMIT,
        "tolerances": tol,
        "columns": solved.table.columns,
        "notes": solved.notes,
        "jobs": jobs,
        "parallel": uom_core::parallel::parallel_enabled(),
        "wall_time_s": wall,
        "version": env!("CARGO_PKG_VERSION"),
    });
    write(&out.join(format!("{name}.csv")), &csv)?;
    let meta = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    write(&out.join(format!("{name}.meta.json")), meta.as_bytes())?;
    if svg {
        if let Some(s) = solved.table.to_svg() {
            write(&out.join(format!("{name}.svg")), s.as_bytes())?;
        } else {
            log::warn!("{name} has no plot layout; skipping svg");
        }
    }
    for f in solved.truncation.iter().filter(|f| f.flagged) {
        log::warn!("{} truncation {} looks too small (tail {:?})", f.mode, f.dim, f.tail);
    }
    println!("{name}: {} rows in {wall:.2} s -> {}", solved.table.rows.len(), out.display());
    Ok(())
}

fn params(config: &Path) -> Result<(), CliError> {
    let (_, cfg) = load(config)?;
    let r = cfg.resolve()?;
    let (_, nm) = scenarios::dims(&cfg);
    let derived = scenarios::derived_quantities(&r.params, r.drive.as_ref(), nm).map_err(|source| CliError::Solver {
        scenario: cfg.scenario.name(),
        source,
    })?;
    let derived: Vec<_> = derived
        .into_iter()
        .map(|(q, v, u)| json!({ "quantity": q, "value": v, "unit": u }))
        .collect();
    let v = json!({
        "params_hz": cfg.params,
        "params_angular": r.params,
        "drive_angular": r.drive,
        "derived": derived,
    });
    println!("{}", serde_json::to_string_pretty(&v).expect("serializes"));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            jobs,
            svg,
            rtol,
            atol,
        } => run(&config, &out, jobs, svg, (rtol, atol)),
        Command::Validate { config } => load(&config).map_err(CliError::from).map(|(_, c)| {
            println!("{}: ok", c.scenario.name());
        }),
        Command::Params { config } => params(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::FAILURE
        }
    }
}
