//! Experiment driver: flat key=value configs with flag overrides, problem
//! assembly, sequential references, the parallel-in-time runs, and CSV/JSON
//! output. Each study from the accompanying experiments maps onto one
//! config.

use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use pint_core::diagnostics::{
    physics_trace, write_json, write_report_csv, write_trace_csv, ConvergenceReport, GridWeights,
    NormKind, PhysicsTrace,
};
use pint_core::pint_ch::{run_pint_ch_with_state, ChVariant, InnerOptions};
use pint_core::pint_linear::{run_pint_linear, PintConfig};
use pint_core::spatial::{
    assemble_operator_1d, assemble_operator_2d, LaplacianOp, Mesh1D, Mesh2D, OperatorKind,
    MAX_2D_POINTS_PER_DIR,
};
use pint_core::steppers::{
    solve_ch_sequential, solve_linear_sequential, ChProblem, ChScheme, TimeGrid,
};
use pint_core::theory;

/// Environment variable overriding the output directory.
pub const ENV_OUTPUT_DIR: &str = "PINT_OUTPUT_DIR";
/// Environment variable overriding the worker count.
pub const ENV_WORKERS: &str = "PINT_WORKERS";

/// Which experiment family to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Problem {
    #[serde(rename = "biharmonic_1d")]
    Biharmonic1d,
    #[serde(rename = "biharmonic_2d")]
    Biharmonic2d,
    #[serde(rename = "lin_ch_1d")]
    LinCh1d,
    #[serde(rename = "lin_ch_2d")]
    LinCh2d,
    #[serde(rename = "ch_1d_pint1")]
    Ch1dPintI,
    #[serde(rename = "ch_1d_pint2")]
    Ch1dPintII,
    #[serde(rename = "ch_2d_pint1")]
    Ch2dPintI,
    #[serde(rename = "ch_2d_pint2")]
    Ch2dPintII,
    #[serde(rename = "general4th_1d")]
    General4th1d,
}

impl Problem {
    pub const ALL: [Problem; 9] = [
        Problem::Biharmonic1d,
        Problem::Biharmonic2d,
        Problem::LinCh1d,
        Problem::LinCh2d,
        Problem::Ch1dPintI,
        Problem::Ch1dPintII,
        Problem::Ch2dPintI,
        Problem::Ch2dPintII,
        Problem::General4th1d,
    ];

    pub fn key(&self) -> &'static str {
        match self {
            Problem::Biharmonic1d => "biharmonic_1d",
            Problem::Biharmonic2d => "biharmonic_2d",
            Problem::LinCh1d => "lin_ch_1d",
            Problem::LinCh2d => "lin_ch_2d",
            Problem::Ch1dPintI => "ch_1d_pint1",
            Problem::Ch1dPintII => "ch_1d_pint2",
            Problem::Ch2dPintI => "ch_2d_pint1",
            Problem::Ch2dPintII => "ch_2d_pint2",
            Problem::General4th1d => "general4th_1d",
        }
    }

    fn parse(s: &str) -> Option<Problem> {
        Problem::ALL.iter().copied().find(|p| p.key() == s)
    }

    pub fn dim(&self) -> usize {
        match self {
            Problem::Biharmonic1d
            | Problem::LinCh1d
            | Problem::Ch1dPintI
            | Problem::Ch1dPintII
            | Problem::General4th1d => 1,
            _ => 2,
        }
    }

    pub fn is_nonlinear(&self) -> bool {
        matches!(
            self,
            Problem::Ch1dPintI | Problem::Ch1dPintII | Problem::Ch2dPintI | Problem::Ch2dPintII
        )
    }

    fn ch_variant(&self) -> Option<ChVariant> {
        match self {
            Problem::Ch1dPintI | Problem::Ch2dPintI => Some(ChVariant::PintI),
            Problem::Ch1dPintII | Problem::Ch2dPintII => Some(ChVariant::PintII),
            _ => None,
        }
    }
}

/// Built-in initial conditions plus file-backed custom samples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialConditionKind {
    /// 0.75 sin(2 pi x) + 0.25 cos(4 pi x) on the 1D grid.
    PaperCh1d,
    /// 0.1 * uniform[-1, 1] per site, seeded.
    PaperCh2dRandom,
    /// One sample per line, read from a file.
    Custom(PathBuf),
}

impl InitialConditionKind {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "paper_ch_1d" => Some(Self::PaperCh1d),
            "paper_ch_2d_random" => Some(Self::PaperCh2dRandom),
            other => other
                .strip_prefix("custom:")
                .map(|p| Self::Custom(PathBuf::from(p))),
        }
    }
}

impl fmt::Display for InitialConditionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PaperCh1d => write!(f, "paper_ch_1d"),
            Self::PaperCh2dRandom => write!(f, "paper_ch_2d_random"),
            Self::Custom(p) => write!(f, "custom:{}", p.display()),
        }
    }
}

/// Fully resolved experiment parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub h: f64,
    pub dt: f64,
    pub t_final: f64,
    pub alpha: f64,
    pub theta: f64,
    pub eps2: f64,
    pub beta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// 0 means one worker per logical CPU.
    pub workers: usize,
    pub domain_length: f64,
    pub norm: NormKind,
    pub output: PathBuf,
    pub initial_condition: InitialConditionKind,
}

impl ExperimentConfig {
    /// Headline defaults for each study.
    pub fn defaults_for(problem: Problem) -> Self {
        let mut cfg = ExperimentConfig {
            problem,
            h: 1.0 / 64.0,
            dt: 1e-3,
            t_final: 1.0,
            alpha: 1e-3,
            theta: 1.0,
            eps2: 0.01,
            beta: 0.2,
            tol: 1e-10,
            max_iter: 50,
            seed: 0,
            workers: 0,
            domain_length: 1.0,
            norm: NormKind::LinfL2,
            output: PathBuf::from("pint_run"),
            initial_condition: InitialConditionKind::PaperCh1d,
        };
        match problem {
            Problem::Biharmonic1d | Problem::General4th1d => {}
            Problem::Biharmonic2d => {
                cfg.h = 0.1;
                cfg.domain_length = std::f64::consts::PI;
                cfg.initial_condition = InitialConditionKind::PaperCh2dRandom;
            }
            Problem::LinCh1d => {
                cfg.h = 1.0 / 128.0;
                cfg.dt = 1e-4;
            }
            Problem::LinCh2d => {
                cfg.h = 0.1;
                cfg.dt = 1e-4;
                cfg.domain_length = std::f64::consts::PI;
                cfg.initial_condition = InitialConditionKind::PaperCh2dRandom;
            }
            Problem::Ch1dPintI => {
                cfg.h = 1.0 / 128.0;
                cfg.dt = 1e-4;
                cfg.t_final = 0.1;
                cfg.alpha = 0.005;
                cfg.max_iter = 15;
            }
            Problem::Ch1dPintII => {
                cfg.h = 1.0 / 128.0;
                cfg.dt = 1e-4;
                cfg.t_final = 0.1;
                cfg.eps2 = 0.05;
                cfg.alpha = 0.01;
                cfg.max_iter = 15;
            }
            Problem::Ch2dPintI | Problem::Ch2dPintII => {
                cfg.h = 1.0 / 64.0;
                cfg.dt = 1e-5;
                cfg.t_final = 0.1;
                cfg.eps2 = 1e-4;
                cfg.alpha = 0.05;
                cfg.max_iter = 20;
                cfg.initial_condition = InitialConditionKind::PaperCh2dRandom;
            }
        }
        cfg
    }

    /// Grid points per direction after snapping h to divide the domain.
    pub fn points_per_dir(&self) -> usize {
        (self.domain_length / self.h).round() as usize + 1
    }

    /// Spacing actually used: domain_length / (points - 1).
    pub fn effective_h(&self) -> f64 {
        self.domain_length / (self.points_per_dir() - 1) as f64
    }
}

/// Configuration failure carrying every offending field.
#[derive(Debug)]
pub struct ConfigError {
    pub problems: Vec<String>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration:")?;
        for p in &self.problems {
            writeln!(f, "  - {p}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

fn parse_kv_text(text: &str, source: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    let mut problems = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => {
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
            None => problems.push(format!("{source}:{}: expected key=value, got '{line}'", lineno + 1)),
        }
    }
    if problems.is_empty() {
        Ok(map)
    } else {
        Err(ConfigError { problems })
    }
}

/// Builds an [`ExperimentConfig`] from an optional key=value file plus
/// key=value overrides (later entries win), then applies environment
/// overrides and validates. Every offending field is reported.
pub fn parse_config(
    file: Option<&Path>,
    overrides: &[String],
) -> Result<ExperimentConfig, ConfigError> {
    let mut entries: Vec<(String, String)> = Vec::new();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            problems: vec![format!("cannot read {}: {e}", path.display())],
        })?;
        let map = parse_kv_text(&text, &path.display().to_string())?;
        entries.extend(map);
    }
    for (i, item) in overrides.iter().enumerate() {
        match item.split_once('=') {
            Some((k, v)) => entries.push((k.trim().to_string(), v.trim().to_string())),
            None => {
                return Err(ConfigError {
                    problems: vec![format!("override {}: expected key=value, got '{item}'", i + 1)],
                })
            }
        }
    }

    // problem first: it selects the defaults everything else overrides
    let mut problems = Vec::new();
    let problem = match entries.iter().rev().find(|(k, _)| k == "problem") {
        Some((_, v)) => match Problem::parse(v) {
            Some(p) => p,
            None => {
                problems.push(format!(
                    "problem '{v}' unknown; expected one of {}",
                    Problem::ALL.map(|p| p.key()).join(", ")
                ));
                Problem::Biharmonic1d
            }
        },
        None => Problem::Biharmonic1d,
    };
    let mut cfg = ExperimentConfig::defaults_for(problem);

    macro_rules! parse_num {
        ($field:expr, $key:expr, $value:expr, $ty:ty) => {
            match $value.parse::<$ty>() {
                Ok(v) => $field = v,
                Err(_) => problems.push(format!("{}: cannot parse '{}'", $key, $value)),
            }
        };
    }

    for (key, value) in &entries {
        match key.as_str() {
            "problem" => {}
            "h" => parse_num!(cfg.h, key, value, f64),
            "dt" => parse_num!(cfg.dt, key, value, f64),
            "t_final" => parse_num!(cfg.t_final, key, value, f64),
            "alpha" => parse_num!(cfg.alpha, key, value, f64),
            "theta" => parse_num!(cfg.theta, key, value, f64),
            "eps2" => parse_num!(cfg.eps2, key, value, f64),
            "beta" => parse_num!(cfg.beta, key, value, f64),
            "tol" => parse_num!(cfg.tol, key, value, f64),
            "max_iter" => parse_num!(cfg.max_iter, key, value, usize),
            "seed" => parse_num!(cfg.seed, key, value, u64),
            "workers" => parse_num!(cfg.workers, key, value, usize),
            "domain_length" => parse_num!(cfg.domain_length, key, value, f64),
            "norm" => match value.as_str() {
                "linf_l2" => cfg.norm = NormKind::LinfL2,
                "linf_linf" => cfg.norm = NormKind::LinfLinf,
                other => problems.push(format!(
                    "norm '{other}' unknown; expected linf_l2 or linf_linf"
                )),
            },
            "output" => cfg.output = PathBuf::from(value),
            "initial_condition" => match InitialConditionKind::parse(value) {
                Some(kind) => cfg.initial_condition = kind,
                None => problems.push(format!(
                    "initial_condition '{value}' unknown; expected paper_ch_1d, \
                     paper_ch_2d_random, or custom:<path>"
                )),
            },
            unknown => problems.push(format!("unknown key '{unknown}'")),
        }
    }

    if let Ok(dir) = std::env::var(ENV_OUTPUT_DIR) {
        if !dir.is_empty() {
            let name = cfg.output.file_name().map(|s| s.to_owned());
            if let Some(name) = name {
                cfg.output = PathBuf::from(dir).join(name);
            }
        }
    }
    if let Ok(w) = std::env::var(ENV_WORKERS) {
        if !w.is_empty() {
            match w.parse::<usize>() {
                Ok(v) => cfg.workers = v,
                Err(_) => problems.push(format!("{ENV_WORKERS}: cannot parse '{w}'")),
            }
        }
    }

    validate(&cfg, &mut problems);
    if problems.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError { problems })
    }
}

fn validate(cfg: &ExperimentConfig, problems: &mut Vec<String>) {
    if !(cfg.h > 0.0) {
        problems.push(format!("h = {} must be positive", cfg.h));
    }
    if !(cfg.domain_length > 0.0) {
        problems.push(format!(
            "domain_length = {} must be positive",
            cfg.domain_length
        ));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        problems.push(format!(
            "alpha = {} must lie strictly inside (0, 1)",
            cfg.alpha
        ));
    }
    if !(0.0..=1.0).contains(&cfg.theta) {
        problems.push(format!("theta = {} must lie in [0, 1]", cfg.theta));
    }
    if !(cfg.tol > 0.0) {
        problems.push(format!("tol = {} must be positive", cfg.tol));
    }
    if cfg.max_iter == 0 {
        problems.push("max_iter must be at least 1".into());
    }
    if cfg.problem.is_nonlinear() && !(cfg.eps2 > 0.0) {
        problems.push(format!(
            "eps2 = {} must be positive for Cahn-Hilliard runs",
            cfg.eps2
        ));
    }
    if cfg.eps2 < 0.0 {
        problems.push(format!("eps2 = {} must be nonnegative", cfg.eps2));
    }
    match TimeGrid::new(cfg.t_final, cfg.dt) {
        Ok(grid) => {
            if grid.n_t() > 2_000_000 {
                problems.push(format!(
                    "n_t = {} is beyond the desk-scale cap of 2e6 steps",
                    grid.n_t()
                ));
            }
        }
        Err(e) => problems.push(e.to_string()),
    }
    if cfg.h > 0.0 && cfg.domain_length > 0.0 {
        let n = cfg.points_per_dir();
        if n < 3 {
            problems.push(format!(
                "h = {} leaves fewer than 3 grid points on the domain",
                cfg.h
            ));
        }
        if cfg.problem.dim() == 2 && n > MAX_2D_POINTS_PER_DIR {
            problems.push(format!(
                "2D dense assembly is capped at {MAX_2D_POINTS_PER_DIR} points per \
                 direction; h = {} gives {n}",
                cfg.h
            ));
        }
        let snapped = cfg.effective_h();
        if (snapped - cfg.h).abs() > 1e-9 * cfg.h {
            log::warn!(
                "h = {} does not divide the domain length {}; using h = {snapped}",
                cfg.h,
                cfg.domain_length
            );
        }
    }
    if let InitialConditionKind::Custom(path) = &cfg.initial_condition {
        if !path.exists() {
            problems.push(format!(
                "initial_condition file {} does not exist",
                path.display()
            ));
        }
    }
    if cfg.initial_condition == InitialConditionKind::PaperCh1d && cfg.problem.dim() == 2 {
        problems.push("initial_condition paper_ch_1d is one-dimensional".into());
    }
    if cfg.initial_condition == InitialConditionKind::PaperCh2dRandom && cfg.problem.dim() == 1 {
        problems.push("initial_condition paper_ch_2d_random is two-dimensional".into());
    }
}

/// Deterministic initial state for a run.
pub fn builtin_initial_condition(
    kind: &InitialConditionKind,
    dim: usize,
    n_per_dir: usize,
    h: f64,
    seed: u64,
) -> Result<DVector<f64>, String> {
    match kind {
        InitialConditionKind::PaperCh1d => {
            if dim != 1 {
                return Err("paper_ch_1d needs a 1D grid".into());
            }
            Ok(DVector::from_fn(n_per_dir, |i, _| {
                let x = i as f64 * h;
                0.75 * (2.0 * std::f64::consts::PI * x).sin()
                    + 0.25 * (4.0 * std::f64::consts::PI * x).cos()
            }))
        }
        InitialConditionKind::PaperCh2dRandom => {
            if dim != 2 {
                return Err("paper_ch_2d_random needs a 2D grid".into());
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(DVector::from_fn(n_per_dir * n_per_dir, |_, _| {
                0.1 * rng.gen_range(-1.0..=1.0)
            }))
        }
        InitialConditionKind::Custom(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            let mut values = Vec::new();
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                values.push(line.parse::<f64>().map_err(|e| {
                    format!("{}:{}: {e}", path.display(), lineno + 1)
                })?);
            }
            let expect = if dim == 1 {
                n_per_dir
            } else {
                n_per_dir * n_per_dir
            };
            if values.len() != expect {
                return Err(format!(
                    "{} supplies {} samples, grid needs {expect}",
                    path.display(),
                    values.len()
                ));
            }
            Ok(DVector::from_vec(values))
        }
    }
}

/// Solver health counters mirrored out of the report for quick inspection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverHealth {
    pub imag_residue_max: f64,
    pub inner_iterations: Vec<usize>,
    pub points_per_dir: usize,
    pub effective_h: f64,
    pub n_t: usize,
}

/// Everything one run produces: config echo, convergence report, physics
/// trace, health counters. Serializes losslessly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub report: ConvergenceReport,
    pub trace: PhysicsTrace,
    pub solver_health: SolverHealth,
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// The three files a run writes, derived from the output stem by appending
/// (values with dots, like swept alphas, stay intact).
pub fn output_paths(cfg: &ExperimentConfig) -> (PathBuf, PathBuf, PathBuf) {
    (
        with_suffix(&cfg.output, ".csv"),
        with_suffix(&cfg.output, ".trace.csv"),
        with_suffix(&cfg.output, ".json"),
    )
}

/// Runs one experiment end to end and writes `<output>.csv`,
/// `<output>.trace.csv`, and `<output>.json`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary, String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| format!("worker pool: {e}"))?;
    let summary = pool.install(|| execute(cfg))?;

    if let Some(dir) = cfg.output.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| format!("mkdir {}: {e}", dir.display()))?;
        }
    }
    let (csv_path, trace_path, json_path) = output_paths(cfg);
    write_report_csv(&summary.report, &csv_path).map_err(|e| e.to_string())?;
    write_trace_csv(&summary.trace, &trace_path).map_err(|e| e.to_string())?;
    write_json(&summary, &json_path).map_err(|e| e.to_string())?;
    Ok(summary)
}

fn execute(cfg: &ExperimentConfig) -> Result<RunSummary, String> {
    let grid = TimeGrid::new(cfg.t_final, cfg.dt).map_err(|e| e.to_string())?;
    let n = cfg.points_per_dir();
    let h = cfg.effective_h();
    let eps = cfg.eps2.max(0.0).sqrt();
    let u0 = builtin_initial_condition(&cfg.initial_condition, cfg.problem.dim(), n, h, cfg.seed)?;

    let mut pint = PintConfig::new(cfg.alpha);
    pint.tol = cfg.tol;
    pint.max_iter = cfg.max_iter;
    pint.norm_kind = cfg.norm;
    pint.seed = cfg.seed;

    let (report, trace) = if let Some(variant) = cfg.problem.ch_variant() {
        let lap = match cfg.problem.dim() {
            1 => LaplacianOp::new_1d(&Mesh1D::new(n, h).map_err(|e| e.to_string())?),
            _ => LaplacianOp::new_2d(&Mesh2D::new(n, h).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?,
        };
        let prob = ChProblem::new(eps).map_err(|e| e.to_string())?;
        let scheme = match variant {
            ChVariant::PintI => ChScheme::Implicit,
            ChVariant::PintII => ChScheme::Eyre,
        };
        let reference = solve_ch_sequential(
            &lap,
            &prob,
            scheme,
            &grid,
            &u0,
            pint_core::steppers::NEWTON_TOL,
            pint_core::steppers::NEWTON_MAX,
        )
        .map_err(|e| e.to_string())?;
        let consts = theory::ch_constants(
            prob.lipschitz_bound(),
            eps,
            cfg.t_final,
            h,
            n,
            cfg.dt,
            grid.n_t(),
            Some(cfg.alpha),
        );
        let rho = if consts.l_valid {
            theory::rho_ch_fully_discrete(cfg.alpha, consts.l, cfg.dt, grid.n_t())
                .ok()
                .filter(|b| !b.vacuous)
                .map(|b| b.rho)
        } else {
            None
        };
        let (report, state) = run_pint_ch_with_state(
            variant,
            &lap,
            &prob,
            &grid,
            &pint,
            &InnerOptions::default(),
            &u0,
            &reference,
            rho,
        )
        .map_err(|e| e.to_string())?;
        // physics trace of the final parallel iterate, u0 included
        let weights = GridWeights::for_laplacian(&lap);
        let mut states = vec![u0.clone()];
        states.extend(state);
        let trace = physics_trace(&states, eps, &weights, cfg.dt);
        (report, trace)
    } else {
        let kind = match cfg.problem {
            Problem::Biharmonic1d | Problem::Biharmonic2d => OperatorKind::Biharmonic,
            Problem::LinCh1d | Problem::LinCh2d => OperatorKind::LinearizedCh {
                eps,
                beta: cfg.beta,
            },
            _ => OperatorKind::GeneralFourthOrder,
        };
        let op = match cfg.problem.dim() {
            1 => assemble_operator_1d(kind, &Mesh1D::new(n, h).map_err(|e| e.to_string())?),
            _ => assemble_operator_2d(kind, &Mesh2D::new(n, h).map_err(|e| e.to_string())?),
        }
        .map_err(|e| e.to_string())?;
        let reference =
            solve_linear_sequential(&op, cfg.theta, &grid, &u0).map_err(|e| e.to_string())?;
        let rho = match kind {
            OperatorKind::LinearizedCh { .. } => {
                theory::rho_linch_fully_discrete(cfg.alpha, cfg.dt, grid.n_t(), eps, cfg.beta, cfg.theta)
                    .ok()
                    .filter(|b| !b.vacuous)
                    .map(|b| b.rho)
            }
            _ => theory::rho_discrete_simple(cfg.alpha).ok(),
        };
        let report = run_pint_linear(&op, &grid, cfg.theta, &pint, &u0, &reference, rho)
            .map_err(|e| e.to_string())?;
        (report, PhysicsTrace::default())
    };

    Ok(RunSummary {
        config: cfg.clone(),
        solver_health: SolverHealth {
            imag_residue_max: report.imag_residue_max,
            inner_iterations: report.inner_iterations.clone(),
            points_per_dir: n,
            effective_h: h,
            n_t: grid.n_t(),
        },
        report,
        trace,
    })
}

/// One sweep step: the key set to a value, output suffixed with it.
pub fn sweep_config(base: &ExperimentConfig, key: &str, value: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut overrides = vec![format!("{key}={value}")];
    // re-derive output name from the base rather than env
    let stem = base.output.display().to_string();
    overrides.push(format!("output={stem}_{key}_{value}"));
    let mut entries = vec![
        format!("problem={}", base.problem.key()),
        format!("h={}", base.h),
        format!("dt={}", base.dt),
        format!("t_final={}", base.t_final),
        format!("alpha={}", base.alpha),
        format!("theta={}", base.theta),
        format!("eps2={}", base.eps2),
        format!("beta={}", base.beta),
        format!("tol={}", base.tol),
        format!("max_iter={}", base.max_iter),
        format!("seed={}", base.seed),
        format!("workers={}", base.workers),
        format!("domain_length={}", base.domain_length),
        format!(
            "norm={}",
            match base.norm {
                NormKind::LinfL2 => "linf_l2",
                NormKind::LinfLinf => "linf_linf",
            }
        ),
        format!("initial_condition={}", base.initial_condition),
        format!("output={stem}"),
    ];
    entries.extend(overrides);
    parse_config(None, &entries)
}
