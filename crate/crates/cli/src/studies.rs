use std::fmt;
use std::io::Write;
use std::str::FromStr;

use ldgmg::ldg::Manufactured;
use ldgmg::{solve_manufactured, SolveOptions};

use crate::config::{Bc, ExperimentConfig, Grid};
use crate::run::format_float;
use crate::CliError;

/// Which penalty a τ-study varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauKind {
    /// Interior penalty on a periodic mesh.
    Interior,
    /// Dirichlet penalty on a homogeneous Dirichlet problem.
    Dirichlet,
}

impl fmt::Display for TauKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Interior => "tau0",
            Self::Dirichlet => "tauD",
        })
    }
}

impl FromStr for TauKind {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "tau0" | "interior" => Ok(Self::Interior),
            "tauD" | "taud" | "dirichlet" => Ok(Self::Dirichlet),
            _ => Err(CliError::Config(format!("unknown tau study '{s}' (tau0, tauD)"))),
        }
    }
}

pub const TAU_VALUES: [f64; 6] = [1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3];

/// Configurations of a τ-study: every value in `values` at every grid size in `ns`.
pub fn tau_study_configs(kind: TauKind, values: &[f64], ns: &[usize], base: &ExperimentConfig) -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    for &t in values {
        for &n in ns {
            let mut c = ExperimentConfig {
                grid: Grid::Uniform,
                n,
                ..base.clone()
            };
            match kind {
                TauKind::Interior => {
                    c.bc = Bc::Periodic;
                    c.tau0 = t;
                }
                TauKind::Dirichlet => {
                    c.bc = Bc::Dirichlet;
                    c.tau_d = t;
                }
            }
            out.push(c);
        }
    }
    out
}

pub fn parse_case(s: &str) -> Result<Manufactured, CliError> {
    match s {
        "sin" | "sin-product" => Ok(Manufactured::SinProduct),
        _ => s
            .strip_prefix("polynomial")
            .and_then(|q| q.parse().ok())
            .filter(|q| *q >= 1)
            .map(Manufactured::Polynomial)
            .ok_or_else(|| CliError::Config(format!("unknown case '{s}' (sin-product, polynomial<q>)"))),
    }
}

/// One line of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedRow {
    pub n: usize,
    pub p: usize,
    pub case: String,
    pub l2_error: f64,
    /// `log₂(e_{n/2} / e_n)` against the previous row.
    pub order: Option<f64>,
    pub converged: bool,
}

/// L² errors of the manufactured Dirichlet problem on each `n`, with observed orders.
pub fn run_manufactured(cfg: &ExperimentConfig, case: Manufactured, ns: &[usize]) -> Result<Vec<ManufacturedRow>, CliError> {
    cfg.validate()?;
    let opts = SolveOptions {
        tol: cfg.tol.min(1e-12),
        max_iter: cfg.max_iter,
    };
    let mut rows: Vec<ManufacturedRow> = Vec::new();
    for &n in ns {
        let s = solve_manufactured::<f64>(cfg.dim, n, cfg.p, case, &cfg.ldg(), opts)?;
        let order = rows.last().map(|prev| (prev.l2_error / s.l2_error).log2() / ((n / prev.n) as f64).log2());
        log::info!("{} n={n} p={}: error {:e}", case.name(), cfg.p, s.l2_error);
        rows.push(ManufacturedRow {
            n,
            p: cfg.p,
            case: case.name(),
            l2_error: s.l2_error,
            order,
            converged: s.report.converged,
        });
    }
    Ok(rows)
}

pub fn write_manufactured<W: Write>(out: W, rows: &[ManufacturedRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "p", "case", "l2_error", "order"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.p.to_string(),
            r.case.clone(),
            format!("{:.6e}", r.l2_error),
            r.order.map(format_float).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
