use std::collections::HashSet;
use std::fmt;
use std::fs::{self, OpenOptions};
use std::path::Path;
use std::str::FromStr;

use ldgmg::{Coarsening, MgKind};

use crate::config::{ExperimentConfig, Grid, Solver};
use crate::run::{estimate_bytes, row_key, run_seeds, skipped, write_header, write_records, RunRecord, Status};
use crate::CliError;

/// Supplementary convergence tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
    S7,
    S8,
}

impl Table {
    pub const ALL: [Table; 8] = [Self::S1, Self::S2, Self::S3, Self::S4, Self::S5, Self::S6, Self::S7, Self::S8];

    pub fn dim(&self) -> usize {
        match self {
            Self::S1 | Self::S2 | Self::S5 | Self::S7 => 2,
            _ => 3,
        }
    }

    pub fn solver(&self) -> Solver {
        match self {
            Self::S1 | Self::S3 => Solver::VCycle,
            _ => Solver::Mgpcg,
        }
    }

    pub fn mgkind(&self) -> MgKind {
        match self {
            Self::S5 | Self::S6 => MgKind::P,
            _ => MgKind::H,
        }
    }

    pub fn grid(&self) -> Grid {
        match self {
            Self::S7 | Self::S8 => Grid::Adaptive("corner".into()),
            _ => Grid::Uniform,
        }
    }

    /// Grid sizes (`1/h_min` on adaptive grids) as listed in the table.
    pub fn sizes(&self) -> Vec<usize> {
        let range = |lo: u32, hi: u32| (lo..=hi).map(|k| 1usize << k).collect();
        match self {
            Self::S1 | Self::S2 | Self::S5 => range(2, 9),
            Self::S3 | Self::S4 | Self::S6 => range(2, 6),
            Self::S7 => range(4, 9),
            Self::S8 => range(4, 8),
        }
    }

    pub fn degrees(&self) -> Vec<usize> {
        match self {
            Self::S5 | Self::S6 => vec![1, 2, 4, 8],
            _ => (1..=5).collect(),
        }
    }

    /// Every configuration of the table, both coarsening modes.
    pub fn configs(&self, base: &ExperimentConfig) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for mode in [Coarsening::Primal, Coarsening::Flux] {
            for p in self.degrees() {
                for n in self.sizes() {
                    out.push(ExperimentConfig {
                        dim: self.dim(),
                        grid: self.grid(),
                        n,
                        p,
                        mode,
                        solver: self.solver(),
                        mgkind: self.mgkind(),
                        ..base.clone()
                    });
                }
            }
        }
        out
    }
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", *self as usize + 1)
    }
}

impl FromStr for Table {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        let k: usize = s
            .trim_start_matches(['S', 's'])
            .parse()
            .map_err(|_| CliError::Config(format!("unknown table '{s}' (S1..S8)")))?;
        Self::ALL
            .get(k.wrapping_sub(1))
            .copied()
            .ok_or_else(|| CliError::Config(format!("unknown table '{s}' (S1..S8)")))
    }
}

/// Limits applied to a sweep.
#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub max_n: Option<usize>,
    pub max_p: Option<usize>,
    pub memory_budget: u64,
}

pub const DEFAULT_BUDGET: u64 = 8 << 30;

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            max_n: None,
            max_p: None,
            memory_budget: DEFAULT_BUDGET,
        }
    }
}

impl SweepOptions {
    pub fn admits(&self, c: &ExperimentConfig) -> bool {
        self.max_n.is_none_or(|m| c.n <= m) && self.max_p.is_none_or(|m| c.p <= m)
    }
}

/// Summary of a sweep run.
#[derive(Debug, Clone, Default)]
pub struct SweepSummary {
    pub written: usize,
    pub resumed: usize,
    pub skipped: usize,
    pub not_converged: usize,
}

fn existing_keys(path: &Path) -> Result<HashSet<String>, CliError> {
    let mut keys = HashSet::new();
    if !path.exists() || fs::metadata(path)?.len() == 0 {
        return Ok(keys);
    }
    let mut r = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_path(path)?;
    for rec in r.records() {
        let rec = rec?;
        let fields: Vec<&str> = rec.iter().collect();
        keys.insert(row_key(&fields));
    }
    Ok(keys)
}

/// Runs `configs`, appending rows to `path` and skipping rows already present.
///
/// Entries whose estimated memory exceeds the budget are written as `skipped-memory` rows.
pub fn run_sweep(configs: &[ExperimentConfig], opts: &SweepOptions, path: &Path) -> Result<SweepSummary, CliError> {
    for c in configs {
        c.validate()?;
    }
    let done = existing_keys(path)?;
    let fresh = done.is_empty() && (!path.exists() || fs::metadata(path)?.len() == 0);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if fresh {
        write_header(&mut w)?;
        w.flush()?;
    }
    let mut summary = SweepSummary::default();
    for cfg in configs.iter().filter(|c| opts.admits(c)) {
        let todo: Vec<u64> = cfg
            .seeds
            .iter()
            .copied()
            .filter(|&s| !done.contains(&skipped(cfg, s).key()))
            .collect();
        summary.resumed += cfg.seeds.len() - todo.len();
        if todo.is_empty() {
            continue;
        }
        let records: Vec<RunRecord> = if estimate_bytes(cfg) > opts.memory_budget {
            log::warn!("skipping {}D n={} p={} {}: over memory budget", cfg.dim, cfg.n, cfg.p, cfg.mode);
            todo.iter().map(|&s| skipped(cfg, s)).collect()
        } else {
            run_seeds(cfg, &todo)?
        };
        for r in &records {
            match r.status {
                Status::SkippedMemory => summary.skipped += 1,
                Status::MaxIter => summary.not_converged += 1,
                Status::Converged => {}
            }
        }
        summary.written += records.len();
        write_records(&mut w, &records)?;
    }
    Ok(summary)
}
