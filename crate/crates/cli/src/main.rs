//! `gridkeysim` — run scenario files, execute the attack suite, and
//! benchmark group-key scaling.
//!
//! Exit codes: 0 success, 1 scenario assertion failure, 2 usage or parse
//! error. The seed comes from `--seed`, falling back to the
//! `GRIDKEYSIM_SEED` environment variable, then 1.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gridkey_core::bgkm::Backend;
use gridkey_sim::{parse_scenario, threats, Simulation};

#[derive(Parser)]
#[command(name = "gridkeysim", version, about = "Metering-network key management simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its log, metrics, and report.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario's group-key backend (acp | lock).
        #[arg(long)]
        backend: Option<String>,
        /// Output directory (log + metrics + report files). Without it,
        /// everything prints to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run attack scenarios and print one verdict row each.
    Attack {
        /// `all` or a comma-separated list of scenario ids.
        #[arg(long, default_value = "all")]
        suite: String,
        /// Extra mode flags as `key=value[,key=value...]`, applied to every
        /// selected scenario instead of the default matrix.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Print the suite manifest (scenario ids + modes) without running.
        #[arg(long)]
        list: bool,
    },
    /// Benchmark key management across group sizes.
    Bench {
        #[arg(long, default_value = "8,64,512")]
        sizes: String,
        #[arg(long, default_value = "acp")]
        backend: String,
        #[arg(long, default_value_t = 3)]
        trials: u32,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| {
        std::env::var("GRIDKEYSIM_SEED")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(1)
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    match s {
        "acp" => Ok(Backend::Acp),
        "lock" => Ok(Backend::Lock),
        other => Err(format!("unknown backend '{other}' (expected acp or lock)")),
    }
}

fn parse_modes(s: &str) -> Result<BTreeMap<String, String>, String> {
    let mut modes = BTreeMap::new();
    for part in s.split(',').filter(|p| !p.is_empty()) {
        let Some((k, v)) = part.split_once('=') else {
            return Err(format!("mode flag '{part}' is not key=value"));
        };
        if let Some(prev) = modes.insert(k.to_string(), v.to_string()) {
            if prev != v {
                return Err(format!("contradictory mode flags for '{k}': '{prev}' vs '{v}'"));
            }
        }
    }
    Ok(modes)
}

const EXIT_OK: u8 = 0;
const EXIT_ASSERTION: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            scenario,
            seed,
            backend,
            out,
        } => cmd_run(&scenario, resolve_seed(seed), backend.as_deref(), out.as_deref()),
        Command::Attack {
            suite,
            mode,
            seed,
            list,
        } => cmd_attack(&suite, mode.as_deref(), resolve_seed(seed), list),
        Command::Bench {
            sizes,
            backend,
            trials,
            seed,
        } => cmd_bench(&sizes, &backend, trials, resolve_seed(seed)),
    };
    ExitCode::from(code)
}

fn cmd_run(path: &std::path::Path, seed: u64, backend: Option<&str>, out: Option<&std::path::Path>) -> u8 {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return EXIT_USAGE;
        }
    };
    let mut scenario = match parse_scenario(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return EXIT_USAGE;
        }
    };
    if let Some(b) = backend {
        match parse_backend(b) {
            Ok(b) => scenario.params.backend = b,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        }
    }
    let mut sim = match Simulation::new(&scenario, seed) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return EXIT_USAGE;
        }
    };
    sim.run(None);

    let failures = sim.assertion_failures().to_vec();
    let status = if failures.is_empty() { "ok" } else { "assertion_failed" };
    let verdicts: Vec<String> = threats::SCENARIO_IDS
        .iter()
        .filter_map(|id| sim.attack_verdict(id).map(|v| format!("{id}:{v}")))
        .collect();
    let mut report = String::new();
    report.push_str(&format!("scenario={}\n", path.display()));
    report.push_str(&format!("seed={seed}\n"));
    report.push_str(&format!("backend={}\n", sim.params.backend.name()));
    report.push_str(&format!("status={status}\n"));
    report.push_str(&format!("assertions_failed={}\n", failures.len()));
    for f in &failures {
        report.push_str(&format!("failure={f}\n"));
    }
    report.push_str(&format!(
        "attack_verdicts={}\n",
        if verdicts.is_empty() { "-".to_string() } else { verdicts.join(",") }
    ));
    report.push_str(&sim.metrics.to_text());

    match out {
        Some(dir) => {
            if let Err(e) = std::fs::create_dir_all(dir) {
                eprintln!("error: cannot create {}: {e}", dir.display());
                return EXIT_USAGE;
            }
            let log_path = dir.join("events.log");
            report.push_str(&format!("event_log={}\n", log_path.display()));
            let writes = [
                (log_path.clone(), sim.log.to_text()),
                (dir.join("metrics.txt"), sim.metrics.to_text()),
                (dir.join("report.txt"), report.clone()),
            ];
            for (p, content) in writes {
                if let Err(e) = std::fs::write(&p, content) {
                    eprintln!("error: cannot write {}: {e}", p.display());
                    return EXIT_USAGE;
                }
            }
            print!("{report}");
        }
        None => {
            print!("{report}");
            print!("{}", sim.log.to_text());
        }
    }
    if failures.is_empty() {
        EXIT_OK
    } else {
        EXIT_ASSERTION
    }
}

fn cmd_attack(suite: &str, mode: Option<&str>, seed: u64, list: bool) -> u8 {
    if list {
        match threats::select_from_matrix(suite) {
            Ok(selected) => {
                for (id, modes) in selected {
                    let mode_str = if modes.is_empty() {
                        "-".to_string()
                    } else {
                        modes
                            .iter()
                            .map(|(k, v)| format!("{k}={v}"))
                            .collect::<Vec<_>>()
                            .join(",")
                    };
                    println!("{id}\t{mode_str}");
                }
                return EXIT_OK;
            }
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        }
    }

    let runs: Vec<(String, BTreeMap<String, String>)> = match mode {
        Some(m) => {
            let modes = match parse_modes(m) {
                Ok(m) => m,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_USAGE;
                }
            };
            let ids: Vec<String> = if suite == "all" {
                threats::SCENARIO_IDS.iter().map(|s| s.to_string()).collect()
            } else {
                suite.split(',').map(|s| s.trim().to_string()).collect()
            };
            ids.into_iter().map(|id| (id, modes.clone())).collect()
        }
        None => match threats::select_from_matrix(suite) {
            Ok(selected) => selected
                .into_iter()
                .map(|(id, modes)| (id.to_string(), modes))
                .collect(),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        },
    };

    for (id, modes) in runs {
        match threats::run_standalone(&id, &modes, seed) {
            Ok(report) => println!("{}", report.to_row()),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_USAGE;
            }
        }
    }
    EXIT_OK
}

fn cmd_bench(sizes: &str, backend: &str, trials: u32, seed: u64) -> u8 {
    let backend = match parse_backend(backend) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let sizes: Result<Vec<usize>, _> = sizes.split(',').map(|s| s.trim().parse()).collect();
    let sizes = match sizes {
        Ok(s) if !s.is_empty() => s,
        _ => {
            eprintln!("error: --sizes must be a comma list of positive integers");
            return EXIT_USAGE;
        }
    };
    let (rows, r2) = gridkey_cli::bench::run(backend, &sizes, trials, seed);
    print!("{}", gridkey_cli::bench::render(backend, &rows, r2));
    EXIT_OK
}
