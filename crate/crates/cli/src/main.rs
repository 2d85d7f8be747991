use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ldgmg_cli::config::parse_list;
use ldgmg_cli::run::{write_header, write_history, write_records};
use ldgmg_cli::studies::{parse_case, write_manufactured, TAU_VALUES};
use ldgmg_cli::{run_manufactured, run_solve, run_sweep, tau_study_configs, Bc, ExperimentConfig, Solver, SweepOptions, Table, TauKind};

#[derive(Parser)]
#[command(name = "ldgmg", version, about = "Multigrid convergence experiments for LDG Poisson discretizations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure the convergence factor of one configuration.
    Solve {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Also write the per-iteration norm history here.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Run a supplementary table (S1..S8), appending to the output CSV.
    Sweep {
        #[arg(long)]
        table: String,
        #[arg(long)]
        max_n: Option<usize>,
        #[arg(long)]
        max_p: Option<usize>,
        /// Memory budget in GiB; larger entries are skipped.
        #[arg(long, default_value_t = 8.0)]
        budget_gib: f64,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Sweep a penalty parameter over grid sizes.
    TauStudy {
        /// tau0 (periodic) or tauD (Dirichlet)
        #[arg(long, default_value = "tau0")]
        kind: String,
        /// Comma-separated penalty values.
        #[arg(long)]
        values: Option<String>,
        /// Comma-separated grid sizes.
        #[arg(long, default_value = "4,8,16,32,64,128")]
        sizes: String,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// L² convergence study for a manufactured Dirichlet problem.
    Manufactured {
        /// sin-product or polynomial<q>
        #[arg(long, default_value = "sin-product")]
        case: String,
        #[arg(long, default_value = "8,16,32,64")]
        sizes: String,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// key = value file applied before the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<String>,
    /// uniform, corner or annulus
    #[arg(long)]
    grid: Option<String>,
    /// Cells per side (1/h_min on adaptive grids).
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    p: Option<String>,
    /// primal or flux
    #[arg(long)]
    mode: Option<String>,
    /// vcycle or mgpcg
    #[arg(long)]
    solver: Option<String>,
    /// h, p or hp
    #[arg(long)]
    mgkind: Option<String>,
    #[arg(long)]
    tau0: Option<String>,
    #[arg(long = "tauD")]
    tau_d: Option<String>,
    #[arg(long)]
    nu: Option<String>,
    /// neumann, dirichlet or periodic
    #[arg(long)]
    bc: Option<String>,
    /// Comma-separated seeds.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
    /// Output CSV (stdout if omitted).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        self.resolve_from(ExperimentConfig::default())
    }

    fn resolve_from(&self, mut cfg: ExperimentConfig) -> Result<ExperimentConfig> {
        if let Some(p) = &self.config {
            cfg.apply_kv_file(p).with_context(|| format!("reading {}", p.display()))?;
        }
        let flags = [
            ("dim", &self.dim),
            ("grid", &self.grid),
            ("n", &self.n),
            ("p", &self.p),
            ("mode", &self.mode),
            ("solver", &self.solver),
            ("mgkind", &self.mgkind),
            ("tau0", &self.tau0),
            ("tauD", &self.tau_d),
            ("nu", &self.nu),
            ("bc", &self.bc),
            ("seeds", &self.seeds),
            ("tol", &self.tol),
            ("max_iter", &self.max_iter),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        if let Some(o) = &self.output {
            cfg.output = Some(o.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout()),
    })
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Solve { cfg, history } => {
            let cfg = cfg.resolve()?;
            let out = run_solve(&cfg)?;
            let mut w = csv::Writer::from_writer(sink(&cfg.output)?);
            write_header(&mut w)?;
            write_records(&mut w, &out.records)?;
            if let Some(h) = history {
                write_history(File::create(&h)?, &out.records)?;
            }
            log::info!("mean rho {:.4}", out.mean_rho());
            Ok(out.all_converged())
        }
        Command::Sweep {
            table,
            max_n,
            max_p,
            budget_gib,
            cfg,
        } => {
            let cfg = cfg.resolve()?;
            let table: Table = table.parse()?;
            let path = cfg.output.clone().unwrap_or_else(|| PathBuf::from(format!("{table}.csv")));
            let opts = SweepOptions {
                max_n,
                max_p,
                memory_budget: (budget_gib * (1u64 << 30) as f64) as u64,
            };
            let s = run_sweep(&table.configs(&cfg), &opts, &path)?;
            eprintln!(
                "{table}: {} rows written, {} resumed, {} skipped over budget, {} not converged -> {}",
                s.written,
                s.resumed,
                s.skipped,
                s.not_converged,
                path.display()
            );
            Ok(s.not_converged == 0)
        }
        Command::TauStudy { kind, values, sizes, cfg } => {
            let cfg = cfg.resolve_from(ExperimentConfig {
                p: 2,
                solver: Solver::Mgpcg,
                ..Default::default()
            })?;
            let kind: TauKind = kind.parse()?;
            let values: Vec<f64> = match values {
                Some(v) => parse_list(&v)?,
                None => TAU_VALUES.to_vec(),
            };
            let configs = tau_study_configs(kind, &values, &parse_list(&sizes)?, &cfg);
            let mut w = csv::Writer::from_writer(sink(&cfg.output)?);
            write_header(&mut w)?;
            let mut ok = true;
            for c in &configs {
                let out = run_solve(c)?;
                ok &= out.all_converged();
                write_records(&mut w, &out.records)?;
            }
            Ok(ok)
        }
        Command::Manufactured { case, sizes, cfg } => {
            let cfg = cfg.resolve_from(ExperimentConfig {
                bc: Bc::Dirichlet,
                ..Default::default()
            })?;
            let rows = run_manufactured(&cfg, parse_case(&case)?, &parse_list(&sizes)?)?;
            write_manufactured(sink(&cfg.output)?, &rows)?;
            Ok(rows.iter().all(|r| r.converged))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
