//! Sequential time integrators. Their trajectories are the references the
//! parallel-in-time iterations are measured against: the theta-method for
//! the linear problems, and fully implicit / Eyre convex-splitting steps
//! (each solved by Newton) for the nonlinear Cahn-Hilliard equation.

use nalgebra::DVector;

use crate::band::BandSystem;
use crate::error::{Error, Result};
use crate::spatial::{Eigenbasis, LaplacianOp, SpatialOperator};

/// Default absolute tolerance for per-step Newton residuals; internally
/// floored at the f64 roundoff limit of the residual evaluation.
pub const NEWTON_TOL: f64 = 1e-12;
/// Default Newton iteration cap per time step.
pub const NEWTON_MAX: usize = 25;

/// Uniform time grid with `n_t * dt = t_final`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    dt: f64,
    n_t: usize,
}

impl TimeGrid {
    /// Derives the step count from `t_final / dt`, which must be an integer
    /// to about 1e-12 relative rounding.
    pub fn new(t_final: f64, dt: f64) -> Result<Self> {
        if !(t_final > 0.0) || !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "time grid needs t_final > 0 and dt > 0, got ({t_final}, {dt})"
            )));
        }
        let ratio = t_final / dt;
        let n_t = ratio.round() as usize;
        if n_t == 0 || (n_t as f64 * dt - t_final).abs() > 1e-12 * t_final.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "t_final/dt = {ratio} is not an integer; pick dt dividing t_final (e.g. dt = {})",
                t_final / ratio.round().max(1.0)
            )));
        }
        Ok(Self { t_final, dt, n_t })
    }

    pub fn from_steps(n_t: usize, dt: f64) -> Result<Self> {
        if n_t == 0 || !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "time grid needs n_t >= 1 and dt > 0, got ({n_t}, {dt})"
            )));
        }
        Ok(Self {
            t_final: n_t as f64 * dt,
            dt,
            n_t,
        })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }
}

/// States u_0 .. u_{N_t} produced by a sequential integrator; state 0 is the
/// supplied initial condition, bit for bit.
#[derive(Debug, Clone)]
pub struct Trajectory {
    states: Vec<DVector<f64>>,
    grid: TimeGrid,
}

impl Trajectory {
    pub fn new(states: Vec<DVector<f64>>, grid: TimeGrid) -> Result<Self> {
        if states.len() != grid.n_t() + 1 {
            return Err(Error::ShapeMismatch(format!(
                "trajectory has {} states for {} steps",
                states.len(),
                grid.n_t()
            )));
        }
        Ok(Self { states, grid })
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn state(&self, n: usize) -> &DVector<f64> {
        &self.states[n]
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("n_t >= 1")
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
}

/// Double-well Cahn-Hilliard nonlinearity with interface width eps.
///
/// f(u) = u^3 - u is the derivative of the potential F(u) = (u^2 - 1)^2 / 4;
/// the Lipschitz bound M covers |f'(u)| on the working range [-u_max, u_max].
#[derive(Debug, Clone, Copy)]
pub struct ChProblem {
    eps: f64,
    u_max: f64,
    lipschitz: f64,
}

impl ChProblem {
    pub fn new(eps: f64) -> Result<Self> {
        Self::with_working_range(eps, 2.0)
    }

    pub fn with_working_range(eps: f64, u_max: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "interface width eps = {eps} must be positive"
            )));
        }
        if !(u_max > 0.0) {
            return Err(Error::InvalidParameter(format!("u_max = {u_max}")));
        }
        // max |3u^2 - 1| on [-u_max, u_max]
        let lipschitz = (3.0 * u_max * u_max - 1.0).abs().max(1.0);
        Ok(Self {
            eps,
            u_max,
            lipschitz,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn eps2(&self) -> f64 {
        self.eps * self.eps
    }

    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    /// Lipschitz bound M for f' on the working range.
    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz
    }

    pub fn f(&self, u: f64) -> f64 {
        u * u * u - u
    }

    pub fn f_prime(&self, u: f64) -> f64 {
        3.0 * u * u - 1.0
    }

    pub fn potential(&self, u: f64) -> f64 {
        let q = u * u - 1.0;
        0.25 * q * q
    }
}

fn l2(v: &DVector<f64>) -> f64 {
    v.norm()
}

/// One theta-method step: solves (I + theta dt A) u_next =
/// (I - (1-theta) dt A) u_prev to 1e-12 relative residual.
pub fn theta_step(
    op: &SpatialOperator,
    theta: f64,
    dt: f64,
    u_prev: &DVector<f64>,
) -> Result<DVector<f64>> {
    if u_prev.len() != op.n_dof() {
        return Err(Error::ShapeMismatch(format!(
            "u_prev has {} entries, operator has {} dof",
            u_prev.len(),
            op.n_dof()
        )));
    }
    let band = op.band();
    let mut sys = BandSystem::<f64>::zeros(op.n_dof(), band.kl(), band.ku());
    sys.add_band(band, theta * dt);
    sys.add_identity(1.0);
    let lu = sys
        .factor()
        .map_err(|e| Error::SingularSystem(format!("implicit theta matrix, column {}", e.column)))?;
    let au = op.apply(u_prev.as_slice());
    let rhs = DVector::from_fn(op.n_dof(), |i, _| u_prev[i] - (1.0 - theta) * dt * au[i]);
    let mut x = DVector::from_vec(lu.solve(rhs.as_slice()));

    let residual = |x: &DVector<f64>| -> DVector<f64> {
        let ax = op.apply(x.as_slice());
        DVector::from_fn(op.n_dof(), |i, _| rhs[i] - x[i] - theta * dt * ax[i])
    };
    // 1e-12 relative, floored at the backward-stable certificate for stiff
    // fine-mesh operators
    let rhs_norm = l2(&rhs).max(f64::MIN_POSITIVE);
    let op_scale = 1.0 + theta * dt * band.norm_inf();
    let accept = |x: &DVector<f64>, r: &DVector<f64>| {
        l2(r) <= (1e-12 * rhs_norm).max(8.0 * f64::EPSILON * op_scale * l2(x))
    };
    let mut r = residual(&x);
    if !accept(&x, &r) {
        x += DVector::from_vec(lu.solve(r.as_slice()));
        r = residual(&x);
        if !accept(&x, &r) {
            return Err(Error::SingularSystem(
                "theta step did not reach the residual tolerance".into(),
            ));
        }
    }
    Ok(x)
}

/// Runs `grid.n_t()` successive theta steps from u0.
///
/// The recursion runs in the operator's analytic eigenbasis: each mode is
/// damped by the exact stability factor per step, so the trajectory stays
/// within a few eps of the true discrete solution even on fine meshes,
/// where a factored-matrix path accumulates eps * |A| * dt per step (at
/// h = 1/256 that alone exceeds the 1e-10 convergence targets this
/// trajectory is the yardstick for). [`theta_step`] keeps the banded LU
/// route; the two agree to solver tolerance on coarse grids.
pub fn solve_linear_sequential(
    op: &SpatialOperator,
    theta: f64,
    grid: &TimeGrid,
    u0: &DVector<f64>,
) -> Result<Trajectory> {
    if u0.len() != op.n_dof() {
        return Err(Error::ShapeMismatch(format!(
            "u0 has {} entries, operator has {} dof",
            u0.len(),
            op.n_dof()
        )));
    }
    let dt = grid.dt();
    let basis = Eigenbasis::for_operator(op)?;
    let mut amplification = Vec::with_capacity(op.n_dof());
    for &mu in op.spectrum() {
        let denom = 1.0 + theta * dt * mu;
        if denom == 0.0 {
            return Err(Error::SingularSystem(format!(
                "implicit theta matrix is singular at eigenvalue {mu}"
            )));
        }
        amplification.push((1.0 - (1.0 - theta) * dt * mu) / denom);
    }
    let mut xi = basis.coords(u0)?;
    let mut states = Vec::with_capacity(grid.n_t() + 1);
    states.push(u0.clone());
    for _ in 0..grid.n_t() {
        for (x, &r) in xi.iter_mut().zip(amplification.iter()) {
            *x *= r;
        }
        states.push(basis.synthesize(&xi)?);
    }
    Trajectory::new(states, *grid)
}

/// Newton outcome for one nonlinear step.
#[derive(Debug, Clone)]
pub struct NewtonStep {
    pub u: DVector<f64>,
    /// Residual norms per evaluated iterate, first entry at the initial guess.
    pub residuals: Vec<f64>,
}

/// Which Cahn-Hilliard time discretization to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChScheme {
    /// Backward Euler on the full right-hand side; gradient stable only for
    /// dt of order eps^2.
    Implicit,
    /// Eyre convex splitting: implicit u^3 and interface term, explicit -u;
    /// unconditionally gradient stable.
    Eyre,
}

struct ChStep<'a> {
    lap: &'a LaplacianOp,
    prob: &'a ChProblem,
    dt: f64,
    scheme: ChScheme,
}

impl ChStep<'_> {
    /// Residual in the dt-scaled form r(u) = u - u_prev - dt * (...), whose
    /// entries stay O(u) across step sizes.
    fn residual(&self, u: &DVector<f64>, u_prev: &DVector<f64>) -> DVector<f64> {
        let n = self.lap.n_dof();
        let lap_sq_u = self.lap.apply_lap_sq(u.as_slice());
        let eps2 = self.prob.eps2();
        match self.scheme {
            ChScheme::Implicit => {
                let fu: Vec<f64> = u.iter().map(|&v| self.prob.f(v)).collect();
                let lap_fu = self.lap.apply_lap(&fu);
                DVector::from_fn(n, |i, _| {
                    u[i] - u_prev[i] - self.dt * (lap_fu[i] - eps2 * lap_sq_u[i])
                })
            }
            ChScheme::Eyre => {
                let cubes: Vec<f64> = u.iter().map(|&v| v * v * v).collect();
                let lap_cubes = self.lap.apply_lap(&cubes);
                let lap_prev = self.lap.apply_lap(u_prev.as_slice());
                DVector::from_fn(n, |i, _| {
                    u[i] - u_prev[i]
                        - self.dt * (lap_cubes[i] - lap_prev[i] - eps2 * lap_sq_u[i])
                })
            }
        }
    }

    /// Newton matrix I - dt Lap diag(g'(u)) + dt eps^2 Lap^2, where g is the
    /// implicitly treated part of the right-hand side.
    fn jacobian(&self, u: &DVector<f64>) -> BandSystem<f64> {
        let band2 = self.lap.lap_sq_band();
        let mut sys = BandSystem::<f64>::zeros(self.lap.n_dof(), band2.kl(), band2.ku());
        let gprime: Vec<f64> = match self.scheme {
            ChScheme::Implicit => u.iter().map(|&v| self.prob.f_prime(v)).collect(),
            ChScheme::Eyre => u.iter().map(|&v| 3.0 * v * v).collect(),
        };
        sys.add_band_col_scaled(self.lap.lap_band(), -self.dt, Some(&gprime));
        sys.add_band(band2, self.dt * self.prob.eps2());
        sys.add_identity(1.0);
        sys
    }

    /// Smallest residual norm that f64 evaluation can certify: roundoff of
    /// the largest term in the residual, bounded via operator infinity
    /// norms (the absolute-value products do not cancel even for smooth u).
    fn residual_floor(&self, u_prev: &DVector<f64>) -> f64 {
        let fu: Vec<f64> = u_prev.iter().map(|&v| self.prob.f(v)).collect();
        let fu = DVector::from_vec(fu);
        let scale = l2(u_prev)
            + self.dt
                * (self.lap.lap_band().norm_inf() * l2(&fu)
                    + self.prob.eps2() * self.lap.lap_sq_band().norm_inf() * l2(u_prev));
        4.0 * f64::EPSILON * scale
    }

    fn newton(&self, u_prev: &DVector<f64>, tol: f64, max_iter: usize) -> Result<NewtonStep> {
        let tol_abs = tol.max(self.residual_floor(u_prev));
        let mut u = u_prev.clone();
        let mut r = self.residual(&u, u_prev);
        let mut rn = l2(&r);
        let mut residuals = vec![rn];
        let mut m = 0usize;
        while rn > tol_abs {
            if m == max_iter {
                return Err(Error::NewtonDiverged {
                    iterations: m,
                    last_residual: rn,
                });
            }
            let lu = self.jacobian(&u).factor().map_err(|e| {
                Error::SingularSystem(format!("newton matrix, column {}", e.column))
            })?;
            let delta = DVector::from_vec(lu.solve(r.as_slice()));
            u -= &delta;
            r = self.residual(&u, u_prev);
            rn = l2(&r);
            residuals.push(rn);
            m += 1;
        }
        Ok(NewtonStep { u, residuals })
    }
}

/// One fully implicit step of the Cahn-Hilliard equation, Newton-solved with
/// the exact per-step Jacobian. Gradient stability needs dt of order eps^2;
/// [`solve_ch_sequential`] warns outside that regime rather than rejecting.
pub fn ch_implicit_step(
    lap: &LaplacianOp,
    prob: &ChProblem,
    dt: f64,
    u_prev: &DVector<f64>,
    newton_tol: f64,
    newton_max: usize,
) -> Result<NewtonStep> {
    check_ch_shapes(lap, u_prev)?;
    ChStep {
        lap,
        prob,
        dt,
        scheme: ChScheme::Implicit,
    }
    .newton(u_prev, newton_tol, newton_max)
}

/// One Eyre convex-splitting step; the implicit cubic still needs Newton.
pub fn ch_eyre_step(
    lap: &LaplacianOp,
    prob: &ChProblem,
    dt: f64,
    u_prev: &DVector<f64>,
    newton_tol: f64,
    newton_max: usize,
) -> Result<NewtonStep> {
    check_ch_shapes(lap, u_prev)?;
    ChStep {
        lap,
        prob,
        dt,
        scheme: ChScheme::Eyre,
    }
    .newton(u_prev, newton_tol, newton_max)
}

fn check_ch_shapes(lap: &LaplacianOp, u_prev: &DVector<f64>) -> Result<()> {
    if u_prev.len() != lap.n_dof() {
        return Err(Error::ShapeMismatch(format!(
            "state has {} entries, Laplacian has {} dof",
            u_prev.len(),
            lap.n_dof()
        )));
    }
    Ok(())
}

/// Sequential Cahn-Hilliard trajectory with either scheme.
pub fn solve_ch_sequential(
    lap: &LaplacianOp,
    prob: &ChProblem,
    scheme: ChScheme,
    grid: &TimeGrid,
    u0: &DVector<f64>,
    newton_tol: f64,
    newton_max: usize,
) -> Result<Trajectory> {
    check_ch_shapes(lap, u0)?;
    if scheme == ChScheme::Implicit && grid.dt() > prob.eps2() {
        log::warn!(
            "implicit CH scheme with dt = {} > eps^2 = {}: outside the conditional \
             gradient-stability regime",
            grid.dt(),
            prob.eps2()
        );
    }
    let step = ChStep {
        lap,
        prob,
        dt: grid.dt(),
        scheme,
    };
    let mut states = Vec::with_capacity(grid.n_t() + 1);
    states.push(u0.clone());
    let mut u = u0.clone();
    for _ in 0..grid.n_t() {
        u = step.newton(&u, newton_tol, newton_max)?.u;
        states.push(u.clone());
    }
    Trajectory::new(states, *grid)
}
