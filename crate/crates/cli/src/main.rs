//! `endoscope`: runs the verification suites from a TOML config and writes a JSON manifest.

mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use endoscope::checks::{self, Check};
use endoscope::elliptic::EllipticConfig;

use crate::config::RunConfig;
use crate::manifest::{Phase, RunManifest};

#[derive(Parser, Debug)]
#[command(name = "endoscope", version, about = "Verification suites for the ramified elliptic terms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config; built-in defaults when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// manifest path (default: endoscope-<command>.json)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// worker threads
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// multiplies every numerical tolerance; exact checks stay exact
    #[arg(long, global = true)]
    tolerance_scale: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// criteria 1-3: closed orbital integrals, germs, Hecke volumes
    OrbitalOracle,
    /// criterion 4
    Kloosterman,
    /// criterion 5
    DirichletSeries,
    /// criterion 6
    Specfun,
    /// criterion 7
    ZagierFe,
    /// criterion 8
    ZagierAfe,
    /// criterion 9
    Poisson,
    /// criterion 10: blockwise Poisson on the configured data
    SigmaTerms,
    /// criterion 11
    Traces,
    /// criterion 12
    FinalIdentity,
    /// everything
    All,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::OrbitalOracle => "orbital-oracle",
            Command::Kloosterman => "kloosterman",
            Command::DirichletSeries => "dirichlet-series",
            Command::Specfun => "specfun",
            Command::ZagierFe => "zagier-fe",
            Command::ZagierAfe => "zagier-afe",
            Command::Poisson => "poisson",
            Command::SigmaTerms => "sigma-terms",
            Command::Traces => "traces",
            Command::FinalIdentity => "final-identity",
            Command::All => "all",
        }
    }

    fn criteria(self) -> Vec<u32> {
        match self {
            Command::OrbitalOracle => vec![1, 2, 3],
            Command::Kloosterman => vec![4],
            Command::DirichletSeries => vec![5],
            Command::Specfun => vec![6],
            Command::ZagierFe => vec![7],
            Command::ZagierAfe => vec![8],
            Command::Poisson => vec![9],
            Command::SigmaTerms => vec![10],
            Command::Traces => vec![11],
            Command::FinalIdentity => vec![12],
            Command::All => (1..=12).collect(),
        }
    }
}

fn fixed_check(id: u32) -> Check {
    match id {
        1 => checks::orbital_closed_forms(),
        2 => checks::germ_identity(),
        3 => checks::hecke_volumes(),
        4 => checks::kloosterman_crt(),
        5 => checks::dirichlet_series(),
        6 => checks::special_functions(),
        7 => checks::zagier_functional_equation(),
        8 => checks::zagier_afe(),
        9 => checks::poisson_pairs(),
        _ => unreachable!("criterion {id} needs elliptic data"),
    }
}

/// Runs the config-independent criteria on at most `jobs` threads; output order is `ids`.
fn run_fixed(ids: &[u32], jobs: usize) -> Vec<Check> {
    let mut out: Vec<Option<Check>> = vec![None; ids.len()];
    for chunk in ids.chunks(jobs.max(1)).zip(out.chunks_mut(jobs.max(1))) {
        std::thread::scope(|s| {
            let handles: Vec<_> = chunk.0.iter().map(|&id| s.spawn(move || fixed_check(id))).collect();
            for (slot, h) in chunk.1.iter_mut().zip(handles) {
                *slot = Some(h.join().expect("check thread panicked"));
            }
        });
    }
    out.into_iter().map(|c| c.unwrap()).collect()
}

/// One check over every configured `(n, vartheta)`.
fn run_elliptic(id: u32, ecs: &[EllipticConfig]) -> Check {
    if id == 12 {
        return checks::final_identity(ecs);
    }
    let parts: Vec<Check> = ecs
        .iter()
        .map(|ec| match id {
            10 => checks::poisson_blocks(ec),
            11 => checks::spectral_equalities(ec),
            _ => unreachable!(),
        })
        .collect();
    manifest::merge(parts)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let t_start = Instant::now();
    if let Ok(seed) = std::env::var("ENDOSCOPE_SEED") {
        eprintln!("ENDOSCOPE_SEED={seed} is ignored (no randomness in the computations)");
    }
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(format!("endoscope-{}.json", cli.command.name())));
    let t0 = Instant::now();
    let rc = match RunConfig::load(cli.config.as_deref()) {
        Ok(rc) => rc,
        Err(e) => {
            eprintln!("config error: {e}");
            let m = RunManifest::invalid(cli.command.name(), cli.config.as_deref(), &e);
            if let Err(w) = m.write(&out) {
                eprintln!("cannot write {}: {w}", out.display());
            }
            return ExitCode::from(2);
        }
    };
    let scale = cli.tolerance_scale.unwrap_or(rc.tolerance.scale);
    let jobs = cli.jobs.unwrap_or(rc.jobs).max(1);
    let mut phases = vec![Phase::new("config", t0)];

    let ids = cli.command.criteria();
    let t_fixed = Instant::now();
    let mut checks_out: Vec<Check> = run_fixed(&ids.iter().copied().filter(|&i| i <= 9).collect::<Vec<_>>(), jobs);
    if !checks_out.is_empty() {
        phases.push(Phase::new("fixed criteria", t_fixed));
    }
    let needs_elliptic = ids.iter().any(|&i| i >= 10);
    if needs_elliptic {
        let t1 = Instant::now();
        let ecs = match rc.elliptic_configs(jobs) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("config error: {e}");
                let m = RunManifest::invalid(cli.command.name(), cli.config.as_deref(), &e);
                let _ = m.write(&out);
                return ExitCode::from(2);
            }
        };
        phases.push(Phase::new("theta data", t1));
        for id in ids.iter().copied().filter(|&i| i >= 10) {
            let t = Instant::now();
            checks_out.push(run_elliptic(id, &ecs));
            phases.push(Phase::new(&format!("criterion {id}"), t));
        }
    }
    phases.push(Phase::new("total", t_start));

    let m = RunManifest::new(cli.command.name(), &rc, scale, &checks_out);
    manifest::print_table(&checks_out, scale, cli.command == Command::Kloosterman);
    for p in &phases {
        println!("phase {:<16} {:>9.2}s", p.name, p.seconds);
    }
    if let Err(e) = m.write(&out) {
        eprintln!("cannot write {}: {e}", out.display());
        return ExitCode::from(2);
    }
    if let Err(e) = manifest::write_timings(&out, &checks_out, &phases) {
        eprintln!("cannot write timings: {e}");
    }
    println!("manifest: {}", out.display());
    if m.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
