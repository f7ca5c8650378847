//! Error norms, discrete energy, total mass, per-iteration histories, and
//! CSV/JSON serialization for figure reproduction.
//!
//! Spatial integrals use trapezoid weights (1/2, 1, ..., 1, 1/2), tensorized
//! in 2D. That choice pairs with the Neumann stencil: the weighted column
//! sums of the discrete Laplacian vanish, so the discrete mass is conserved
//! for the same reason the continuous one is.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::spatial::{LaplacianOp, SpatialOperator};

/// Trapezoid weights (1/2, 1, ..., 1, 1/2) for n points.
pub fn trapezoid_weights(n: usize) -> Vec<f64> {
    let mut w = vec![1.0; n];
    w[0] = 0.5;
    w[n - 1] = 0.5;
    w
}

/// Quadrature context for a 1D or 2D tensor grid.
#[derive(Debug, Clone)]
pub struct GridWeights {
    dim: usize,
    n_per_dir: usize,
    h: f64,
    w1: Vec<f64>,
}

impl GridWeights {
    pub fn new_1d(n_per_dir: usize, h: f64) -> Self {
        Self {
            dim: 1,
            n_per_dir,
            h,
            w1: trapezoid_weights(n_per_dir),
        }
    }

    pub fn new_2d(n_per_dir: usize, h: f64) -> Self {
        Self {
            dim: 2,
            n_per_dir,
            h,
            w1: trapezoid_weights(n_per_dir),
        }
    }

    pub fn for_operator(op: &SpatialOperator) -> Self {
        match op.dim() {
            1 => Self::new_1d(op.n_per_dir(), op.h()),
            _ => Self::new_2d(op.n_per_dir(), op.h()),
        }
    }

    pub fn for_laplacian(lap: &LaplacianOp) -> Self {
        match lap.dim() {
            1 => Self::new_1d(lap.n_per_dir(), lap.h()),
            _ => Self::new_2d(lap.n_per_dir(), lap.h()),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_dof(&self) -> usize {
        if self.dim == 1 {
            self.n_per_dir
        } else {
            self.n_per_dir * self.n_per_dir
        }
    }

    fn weight(&self, idx: usize) -> f64 {
        if self.dim == 1 {
            self.w1[idx]
        } else {
            self.w1[idx / self.n_per_dir] * self.w1[idx % self.n_per_dir]
        }
    }

    fn cell_volume(&self) -> f64 {
        if self.dim == 1 {
            self.h
        } else {
            self.h * self.h
        }
    }

    /// Weighted L2 norm sqrt(h^dim sum w_i v_i^2).
    pub fn weighted_l2(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.n_dof());
        let mut acc = 0.0;
        for (i, &x) in v.iter().enumerate() {
            acc += self.weight(i) * x * x;
        }
        (self.cell_volume() * acc).sqrt()
    }
}

/// Trapezoid-weighted total mass h^dim sum w_i u_i.
pub fn total_mass(u: &[f64], w: &GridWeights) -> f64 {
    debug_assert_eq!(u.len(), w.n_dof());
    let mut acc = 0.0;
    for (i, &x) in u.iter().enumerate() {
        acc += w.weight(i) * x;
    }
    w.cell_volume() * acc
}

fn double_well(u: f64) -> f64 {
    let q = u * u - 1.0;
    0.25 * q * q
}

/// Discrete Ginzburg-Landau energy: trapezoid-weighted double-well potential
/// plus the forward-difference gradient term eps^2/2 |grad u|^2.
pub fn discrete_energy(u: &[f64], eps: f64, w: &GridWeights) -> f64 {
    debug_assert_eq!(u.len(), w.n_dof());
    let n = w.n_per_dir;
    let h = w.h;
    let mut pot = 0.0;
    for (i, &x) in u.iter().enumerate() {
        pot += w.weight(i) * double_well(x);
    }
    pot *= w.cell_volume();

    let mut grad = 0.0;
    match w.dim {
        1 => {
            for i in 0..n - 1 {
                let d = (u[i + 1] - u[i]) / h;
                grad += d * d;
            }
            grad *= h;
        }
        _ => {
            // x-direction differences, trapezoid in y (and vice versa)
            for i1 in 0..n - 1 {
                for i2 in 0..n {
                    let d = (u[(i1 + 1) * n + i2] - u[i1 * n + i2]) / h;
                    grad += w.w1[i2] * d * d;
                }
            }
            for i1 in 0..n {
                for i2 in 0..n - 1 {
                    let d = (u[i1 * n + i2 + 1] - u[i1 * n + i2]) / h;
                    grad += w.w1[i1] * d * d;
                }
            }
            grad *= h * h;
        }
    }
    pot + 0.5 * eps * eps * grad
}

fn check_pairs(candidate: &[DVector<f64>], reference: &[DVector<f64>]) -> Result<()> {
    if candidate.len() != reference.len() {
        return Err(Error::ShapeMismatch(format!(
            "candidate has {} states, reference has {}",
            candidate.len(),
            reference.len()
        )));
    }
    for (c, r) in candidate.iter().zip(reference.iter()) {
        if c.len() != r.len() {
            return Err(Error::ShapeMismatch(format!(
                "state lengths differ: {} vs {}",
                c.len(),
                r.len()
            )));
        }
    }
    Ok(())
}

/// L-infinity in time of the weighted L2 spatial norm of the difference.
pub fn error_linf_l2(
    candidate: &[DVector<f64>],
    reference: &[DVector<f64>],
    w: &GridWeights,
) -> Result<f64> {
    check_pairs(candidate, reference)?;
    let mut worst = 0.0f64;
    let mut diff = vec![0.0; w.n_dof()];
    for (c, r) in candidate.iter().zip(reference.iter()) {
        for i in 0..diff.len() {
            diff[i] = c[i] - r[i];
        }
        worst = worst.max(w.weighted_l2(&diff));
    }
    Ok(worst)
}

/// L-infinity in time of the max-abs spatial norm of the difference.
pub fn error_linf_linf(candidate: &[DVector<f64>], reference: &[DVector<f64>]) -> Result<f64> {
    check_pairs(candidate, reference)?;
    let mut worst = 0.0f64;
    for (c, r) in candidate.iter().zip(reference.iter()) {
        for i in 0..c.len() {
            worst = worst.max((c[i] - r[i]).abs());
        }
    }
    Ok(worst)
}

/// Which trajectory norm a run is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    LinfL2,
    LinfLinf,
}

/// Energy and mass along a trajectory, one entry per time index.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PhysicsTrace {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub mass: Vec<f64>,
}

/// Evaluates energy and mass over a sequence of states spaced dt apart,
/// starting at t = 0.
pub fn physics_trace(states: &[DVector<f64>], eps: f64, w: &GridWeights, dt: f64) -> PhysicsTrace {
    let mut trace = PhysicsTrace::default();
    for (n, s) in states.iter().enumerate() {
        trace.times.push(n as f64 * dt);
        trace.energy.push(discrete_energy(s.as_slice(), eps, w));
        trace.mass.push(total_mass(s.as_slice(), w));
    }
    trace
}

/// Per-iteration convergence history of one waveform-relaxation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub norm_kind: NormKind,
    /// Error of the initial guess (iteration 0).
    pub initial_error: f64,
    /// Errors at iterations 1..=iterations; nonempty.
    pub errors: Vec<f64>,
    /// Same histories measured in eigenbasis coordinates, when available.
    pub initial_error_eigenbasis: Option<f64>,
    pub errors_eigenbasis: Option<Vec<f64>>,
    /// Theoretical per-iteration contraction factor, if one applies.
    pub theoretical_rho: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Largest relative imaginary residue truncated after Step-(3).
    pub imag_residue_max: f64,
    pub wallclock_seconds: f64,
    /// Inner quasi-Newton iterations per outer iteration (nonlinear runs).
    pub inner_iterations: Vec<usize>,
    /// Set when the run stopped for any reason other than reaching tol.
    pub failure: Option<String>,
}

impl ConvergenceReport {
    /// Ratio of successive errors, e_k / e_{k-1}, for k = 2..=iterations.
    pub fn contraction_ratios(errors: &[f64]) -> Vec<f64> {
        errors.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Output format for [`write_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes the iteration table: header `k,error,bound`, one row per
/// iteration, '.' decimal separator, newline-terminated rows. The bound
/// column is `initial_error * rho^k` and stays empty without a rho.
pub fn write_report_csv(report: &ConvergenceReport, path: &Path) -> Result<()> {
    let mut out = String::from("k,error,bound\n");
    for (i, e) in report.errors.iter().enumerate() {
        let k = i + 1;
        match report.theoretical_rho {
            Some(rho) => {
                let bound = report.initial_error * rho.powi(k as i32);
                out.push_str(&format!("{k},{e},{bound}\n"));
            }
            None => out.push_str(&format!("{k},{e},\n")),
        }
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Writes the physics trace: header `t,energy,mass`, one row per time index.
pub fn write_trace_csv(trace: &PhysicsTrace, path: &Path) -> Result<()> {
    let mut out = String::from("t,energy,mass\n");
    for i in 0..trace.times.len() {
        out.push_str(&format!(
            "{},{},{}\n",
            trace.times[i], trace.energy[i], trace.mass[i]
        ));
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Serializes any value as pretty-printed JSON.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::InvalidParameter(format!("json serialization: {e}")))?;
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))?;
    f.write_all(b"\n").map_err(io_err(path))
}

#[derive(Serialize)]
struct ReportBundle<'a> {
    report: &'a ConvergenceReport,
    trace: &'a PhysicsTrace,
}

/// Writes report plus trace at `path`. CSV emits two files (the iteration
/// table at `path`, the trace next to it with a `.trace.csv` suffix); JSON
/// emits one document holding both.
pub fn write_report(
    report: &ConvergenceReport,
    trace: &PhysicsTrace,
    path: &Path,
    format: ReportFormat,
) -> Result<()> {
    match format {
        ReportFormat::Csv => {
            write_report_csv(report, path)?;
            let trace_path = path.with_extension("trace.csv");
            write_trace_csv(trace, &trace_path)
        }
        ReportFormat::Json => write_json(&ReportBundle { report, trace }, path),
    }
}
