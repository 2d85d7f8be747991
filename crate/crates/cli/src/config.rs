use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ldgmg::{BcKind, Boundary, Coarsening, HierarchyOptions, LdgConfig, MeshSpec, MgKind, ProblemSpec};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    VCycle,
    Mgpcg,
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::VCycle => "vcycle",
            Self::Mgpcg => "mgpcg",
        })
    }
}

impl FromStr for Solver {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "vcycle" | "v" => Ok(Self::VCycle),
            "mgpcg" | "pcg" => Ok(Self::Mgpcg),
            _ => Err(CliError::Config(format!("unknown solver '{s}' (vcycle, mgpcg)"))),
        }
    }
}

/// Mesh family. Adaptive grids are named by their refinement preset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Grid {
    Uniform,
    Adaptive(String),
}

impl Grid {
    pub fn is_adaptive(&self) -> bool {
        matches!(self, Grid::Adaptive(_))
    }
}

pub const PRESETS: [&str; 2] = ["corner", "annulus"];

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform => f.write_str("uniform"),
            Self::Adaptive(p) => f.write_str(p),
        }
    }
}

impl FromStr for Grid {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "uniform" => Ok(Self::Uniform),
            p if PRESETS.contains(&p) => Ok(Self::Adaptive(p.to_string())),
            _ => Err(CliError::Config(format!("unknown grid '{s}' (uniform, {})", PRESETS.join(", ")))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bc {
    Neumann,
    Dirichlet,
    Periodic,
}

impl fmt::Display for Bc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Neumann => "neumann",
            Self::Dirichlet => "dirichlet",
            Self::Periodic => "periodic",
        })
    }
}

impl FromStr for Bc {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "neumann" => Ok(Self::Neumann),
            "dirichlet" => Ok(Self::Dirichlet),
            "periodic" => Ok(Self::Periodic),
            _ => Err(CliError::Config(format!("unknown bc '{s}' (neumann, dirichlet, periodic)"))),
        }
    }
}

impl Bc {
    pub fn boundary(self) -> Boundary {
        Boundary::uniform(match self {
            Self::Neumann => BcKind::Neumann,
            Self::Dirichlet => BcKind::Dirichlet,
            Self::Periodic => BcKind::Periodic,
        })
    }
}

/// One experiment: problem, hierarchy, solver and measurement protocol.
///
/// `n` is the number of cells per side; on adaptive grids it is `1/h_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub grid: Grid,
    pub n: usize,
    pub p: usize,
    pub mode: Coarsening,
    pub solver: Solver,
    pub mgkind: MgKind,
    pub tau0: f64,
    pub tau_d: f64,
    pub nu: usize,
    pub bc: Bc,
    pub seeds: Vec<u64>,
    pub tol: f64,
    pub max_iter: usize,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let ldg = LdgConfig::default();
        Self {
            dim: 2,
            grid: Grid::Uniform,
            n: 16,
            p: 1,
            mode: Coarsening::Flux,
            solver: Solver::VCycle,
            mgkind: MgKind::H,
            tau0: ldg.tau0,
            tau_d: ldg.tau_d,
            nu: HierarchyOptions::default().nu,
            bc: Bc::Neumann,
            seeds: vec![1, 2, 3],
            tol: 1e-10,
            max_iter: 500,
            output: None,
        }
    }
}

pub const MAX_DEGREE: usize = 8;

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.dim != 2 && self.dim != 3 {
            return bad(format!("dim must be 2 or 3, got {}", self.dim));
        }
        if !self.n.is_power_of_two() {
            return bad(format!("n must be a power of two, got {}", self.n));
        }
        if let Grid::Adaptive(_) = self.grid {
            if self.n < 2 {
                return bad("adaptive grids need n >= 2".into());
            }
            if self.bc == Bc::Periodic {
                return bad("periodic boundaries are only supported on uniform grids".into());
            }
            if self.mgkind != MgKind::H {
                return bad("adaptive grids support only h-multigrid".into());
            }
        }
        if self.p == 0 || self.p > MAX_DEGREE {
            return bad(format!("p must be in 1..={MAX_DEGREE}, got {}", self.p));
        }
        if !(self.tau0 >= 0.0 && self.tau0.is_finite()) {
            return bad(format!("tau0 must be finite and >= 0, got {}", self.tau0));
        }
        if !(self.tau_d > 0.0 && self.tau_d.is_finite()) {
            return bad(format!("tauD must be finite and > 0, got {}", self.tau_d));
        }
        if self.nu == 0 {
            return bad("nu must be >= 1".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad(format!("tol must be in (0, 1), got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be >= 1".into());
        }
        Ok(())
    }

    pub fn max_level(&self) -> u8 {
        self.n.trailing_zeros() as u8
    }

    pub fn ldg(&self) -> LdgConfig {
        LdgConfig::default().with_boundary(self.bc.boundary()).with_tau(self.tau0, self.tau_d)
    }

    pub fn mesh(&self) -> MeshSpec {
        match &self.grid {
            Grid::Uniform => MeshSpec::Uniform { n: self.n },
            Grid::Adaptive(preset) => MeshSpec::Adaptive {
                preset: preset.clone(),
                max_level: self.max_level(),
            },
        }
    }

    pub fn problem_spec(&self) -> ProblemSpec {
        ProblemSpec {
            dim: self.dim,
            mesh: self.mesh(),
            p: self.p,
            ldg: self.ldg(),
            kind: self.mgkind,
            hierarchy: HierarchyOptions {
                mode: self.mode,
                nu: self.nu,
                keep_flux: false,
            },
        }
    }

    /// Sets one field from its textual `key` and `value`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T, CliError> {
            v.parse().map_err(|_| CliError::Config(format!("invalid value '{v}' for {key}")))
        }
        let v = value.trim();
        match key.trim() {
            "dim" => self.dim = num(key, v)?,
            "grid" => self.grid = v.parse()?,
            "n" => self.n = num(key, v)?,
            "p" => self.p = num(key, v)?,
            "mode" => self.mode = v.parse().map_err(|e: ldgmg::Error| CliError::Config(e.to_string()))?,
            "solver" => self.solver = v.parse()?,
            "mgkind" => self.mgkind = v.parse().map_err(|e: ldgmg::Error| CliError::Config(e.to_string()))?,
            "tau0" => self.tau0 = num(key, v)?,
            "tauD" | "tau_d" => self.tau_d = num(key, v)?,
            "nu" => self.nu = num(key, v)?,
            "bc" => self.bc = v.parse()?,
            "seed" | "seeds" => self.seeds = parse_list(v)?,
            "tol" => self.tol = num(key, v)?,
            "max_iter" => self.max_iter = num(key, v)?,
            "output" => self.output = Some(PathBuf::from(v)),
            other => return Err(CliError::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Reads `key = value` lines; blank lines and `#` comments are ignored.
    pub fn from_kv_str(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        cfg.apply_kv_str(text)?;
        Ok(cfg)
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply_kv_str(&mut self, text: &str) -> Result<(), CliError> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_kv_file(&mut self, path: &Path) -> Result<(), CliError> {
        self.apply_kv_str(&fs::read_to_string(path)?)
    }
}

/// Parses a comma-separated list such as `1,2,3`.
pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse().map_err(|_| CliError::Config(format!("invalid list entry '{t}'"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_file_round_trip() {
        let cfg = ExperimentConfig::from_kv_str(
            "# comment\ndim = 3\ngrid=corner\nn=32\np=2\nmode=primal\nsolver=mgpcg\ntauD=10\nseeds=4,5\n",
        )
        .unwrap();
        assert_eq!(cfg.dim, 3);
        assert_eq!(cfg.grid, Grid::Adaptive("corner".into()));
        assert_eq!(cfg.max_level(), 5);
        assert_eq!(cfg.mode, Coarsening::Primal);
        assert_eq!(cfg.solver, Solver::Mgpcg);
        assert_eq!(cfg.tau_d, 10.0);
        assert_eq!(cfg.seeds, vec![4, 5]);
        cfg.validate().unwrap();
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = ExperimentConfig::default();
        let cases: Vec<Box<dyn Fn(&mut ExperimentConfig)>> = vec![
            Box::new(|c| c.dim = 4),
            Box::new(|c| c.n = 12),
            Box::new(|c| c.p = 0),
            Box::new(|c| c.tau_d = 0.0),
            Box::new(|c| c.tau0 = -1.0),
            Box::new(|c| c.seeds.clear()),
            Box::new(|c| c.nu = 0),
            Box::new(|c| {
                c.grid = Grid::Adaptive("corner".into());
                c.bc = Bc::Periodic;
            }),
        ];
        for f in cases {
            let mut c = base.clone();
            f(&mut c);
            assert!(c.validate().is_err(), "{c:?}");
        }
        assert!(ExperimentConfig::from_kv_str("nope = 1").is_err());
        assert!(ExperimentConfig::from_kv_str("dim").is_err());
        assert!(ExperimentConfig::from_kv_str("grid = hex").is_err());
    }
}
