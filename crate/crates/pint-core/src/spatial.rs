//! Finite-difference spatial operators on equidistant Neumann grids.
//!
//! The 1D Laplacian uses the ghost-point Neumann closure with corner entries
//! `2/h^2`, which makes the matrix non-symmetric but keeps the classic cosine
//! spectrum exact. Fourth-order operators are built from it by squaring, and
//! the 2D versions by Kronecker sums. Every assembled operator knows its
//! analytic spectrum and carries a band representation for fast shifted
//! solves.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::band::{BandMatrix, BandSystem};
use crate::error::{Error, Result};

/// Relative residual accepted by [`shifted_solve`] before declaring the
/// shifted system numerically singular.
pub const SHIFTED_SOLVE_TOL: f64 = 1e-12;

/// Default cap on grid points per direction for dense 2D assembly.
pub const MAX_2D_POINTS_PER_DIR: usize = 65;

/// 1D equidistant grid with `n_x >= 3` points and spacing `h > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh1D {
    n_x: usize,
    h: f64,
}

impl Mesh1D {
    pub fn new(n_x: usize, h: f64) -> Result<Self> {
        if n_x < 3 {
            return Err(Error::InvalidMesh(format!(
                "n_x = {n_x}, but the Neumann stencil needs at least 3 points"
            )));
        }
        if !(h > 0.0) {
            return Err(Error::InvalidMesh(format!("h = {h} must be positive")));
        }
        Ok(Self { n_x, h })
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn h(&self) -> f64 {
        self.h
    }
}

/// 2D tensor grid, equidistant with the same spacing in both directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh2D {
    n_x: usize,
    h: f64,
}

impl Mesh2D {
    pub fn new(n_x: usize, h: f64) -> Result<Self> {
        if n_x < 3 {
            return Err(Error::InvalidMesh(format!(
                "n_x = {n_x}, but the Neumann stencil needs at least 3 points per direction"
            )));
        }
        if !(h > 0.0) {
            return Err(Error::InvalidMesh(format!("h = {h} must be positive")));
        }
        Ok(Self { n_x, h })
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn h(&self) -> f64 {
        self.h
    }
}

/// Which semi-discrete operator A (in `u' + A u = 0`) to assemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorKind {
    /// A = Laplacian^2
    Biharmonic,
    /// A = beta^2 * Laplacian + eps^2 * Laplacian^2
    LinearizedCh { eps: f64, beta: f64 },
    /// A = Laplacian^2 - Laplacian (from u_t = -Lap^2 u + Lap u)
    GeneralFourthOrder,
    /// A = Laplacian itself, as an assembly building block
    LaplacianOnly,
}

/// Assembled spatial operator with mesh metadata and analytic spectrum.
#[derive(Debug, Clone)]
pub struct SpatialOperator {
    kind: OperatorKind,
    dim: usize,
    n_per_dir: usize,
    h: f64,
    matrix: DMatrix<f64>,
    band: BandMatrix,
    spectrum: Vec<f64>,
}

impl SpatialOperator {
    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_per_dir(&self) -> usize {
        self.n_per_dir
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_dof(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn band(&self) -> &BandMatrix {
        &self.band
    }

    /// Analytic eigenvalues, ordered p-major (and q-minor in 2D).
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// y = A x for a real vector.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.band.apply(x)
    }
}

/// The N_x x N_x Neumann Laplacian: first row (-2, 2)/h^2, interior rows
/// (1, -2, 1)/h^2, last row (2, -2)/h^2.
pub fn assemble_laplacian_1d(mesh: &Mesh1D) -> DMatrix<f64> {
    let n = mesh.n_x;
    let s = 1.0 / (mesh.h * mesh.h);
    let mut m = DMatrix::zeros(n, n);
    m[(0, 0)] = -2.0 * s;
    m[(0, 1)] = 2.0 * s;
    for i in 1..n - 1 {
        m[(i, i - 1)] = s;
        m[(i, i)] = -2.0 * s;
        m[(i, i + 1)] = s;
    }
    m[(n - 1, n - 2)] = 2.0 * s;
    m[(n - 1, n - 1)] = -2.0 * s;
    m
}

/// Eigenvalues lambda_p = 2/h^2 (cos((p-1) pi / (N_x - 1)) - 1), p = 1..N_x.
///
/// All nonpositive and pairwise distinct.
pub fn analytic_spectrum_laplacian_1d(mesh: &Mesh1D) -> Vec<f64> {
    let n = mesh.n_x;
    let s = 2.0 / (mesh.h * mesh.h);
    (0..n)
        .map(|p| s * ((p as f64 * PI / (n - 1) as f64).cos() - 1.0))
        .collect()
}

/// Kronecker-sum 2D Laplacian `I (x) Lap + Lap (x) I`, side `n_x^2`.
pub fn assemble_laplacian_2d(mesh: &Mesh2D) -> Result<DMatrix<f64>> {
    assemble_laplacian_2d_with_cap(mesh, MAX_2D_POINTS_PER_DIR)
}

pub fn assemble_laplacian_2d_with_cap(mesh: &Mesh2D, cap: usize) -> Result<DMatrix<f64>> {
    if mesh.n_x > cap {
        return Err(Error::SizeCap {
            size: mesh.n_x,
            cap,
        });
    }
    let lap1 = assemble_laplacian_1d(&Mesh1D::new(mesh.n_x, mesh.h)?);
    let n = mesh.n_x;
    let eye = DMatrix::<f64>::identity(n, n);
    Ok(eye.kronecker(&lap1) + lap1.kronecker(&eye))
}

fn spectrum_for_kind(kind: OperatorKind, lap_eigs: &[f64]) -> Vec<f64> {
    lap_eigs
        .iter()
        .map(|&l| match kind {
            OperatorKind::Biharmonic => l * l,
            OperatorKind::LinearizedCh { eps, beta } => beta * beta * l + eps * eps * l * l,
            OperatorKind::GeneralFourthOrder => l * l - l,
            OperatorKind::LaplacianOnly => l,
        })
        .collect()
}

fn matrix_for_kind(kind: OperatorKind, lap: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    match kind {
        OperatorKind::Biharmonic => Ok(lap * lap),
        OperatorKind::LinearizedCh { eps, beta } => {
            if eps < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "interface width eps = {eps} must be nonnegative"
                )));
            }
            let spinodal_limit = 1.0 / 3f64.sqrt();
            if beta.abs() > spinodal_limit {
                log::warn!(
                    "spinodal parameter beta = {beta} lies outside [-1/sqrt(3), 1/sqrt(3)]"
                );
            }
            Ok(lap * lap * (eps * eps) + lap * (beta * beta))
        }
        OperatorKind::GeneralFourthOrder => Ok(lap * lap - lap),
        OperatorKind::LaplacianOnly => Ok(lap.clone()),
    }
}

/// Assembles A and its analytic spectrum on a 1D mesh.
pub fn assemble_operator_1d(kind: OperatorKind, mesh: &Mesh1D) -> Result<SpatialOperator> {
    let lap = assemble_laplacian_1d(mesh);
    let matrix = matrix_for_kind(kind, &lap)?;
    let spectrum = spectrum_for_kind(kind, &analytic_spectrum_laplacian_1d(mesh));
    let band = BandMatrix::from_dense(&matrix);
    Ok(SpatialOperator {
        kind,
        dim: 1,
        n_per_dir: mesh.n_x,
        h: mesh.h,
        matrix,
        band,
        spectrum,
    })
}

/// Assembles A and its analytic spectrum on a 2D tensor mesh. The Laplacian
/// eigenvalues combine as lambda_{p,q} = lambda_p + lambda_q (p-major order).
pub fn assemble_operator_2d(kind: OperatorKind, mesh: &Mesh2D) -> Result<SpatialOperator> {
    let lap = assemble_laplacian_2d(mesh)?;
    let matrix = matrix_for_kind(kind, &lap)?;
    let eigs1 = analytic_spectrum_laplacian_1d(&Mesh1D::new(mesh.n_x, mesh.h)?);
    let mut lap_eigs = Vec::with_capacity(mesh.n_x * mesh.n_x);
    for &lp in &eigs1 {
        for &lq in &eigs1 {
            lap_eigs.push(lp + lq);
        }
    }
    let spectrum = spectrum_for_kind(kind, &lap_eigs);
    let band = BandMatrix::from_dense(&matrix);
    Ok(SpatialOperator {
        kind,
        dim: 2,
        n_per_dir: mesh.n_x,
        h: mesh.h,
        matrix,
        band,
        spectrum,
    })
}

/// Solves (sigma I + tau A) x = rhs by banded LU with partial pivoting,
/// with one step of iterative refinement if the relative residual exceeds
/// [`SHIFTED_SOLVE_TOL`].
///
/// The residual contract is `max` of 1e-12 * |rhs| and the backward-stable
/// certificate eps * (|sigma| + |tau| |A|) * |x|; the latter only matters
/// for stiff fine-mesh operators, where a smaller computed residual does
/// not exist in f64.
pub fn shifted_solve(
    op: &SpatialOperator,
    sigma: Complex64,
    tau: Complex64,
    rhs: &[Complex64],
) -> Result<Vec<Complex64>> {
    shifted_solve_banded(op.band(), sigma, tau, rhs)
}

pub(crate) fn shifted_solve_banded(
    band: &BandMatrix,
    sigma: Complex64,
    tau: Complex64,
    rhs: &[Complex64],
) -> Result<Vec<Complex64>> {
    let n = band.n();
    if rhs.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "rhs has {} entries, operator has {} dof",
            rhs.len(),
            n
        )));
    }
    if sigma.norm_sqr() == 0.0 && tau.norm_sqr() == 0.0 {
        return Err(Error::SingularShift { sigma, tau });
    }
    let mut sys = BandSystem::<Complex64>::zeros(n, band.kl(), band.ku());
    sys.add_band(band, tau);
    sys.add_identity(sigma);
    let lu = sys
        .factor()
        .map_err(|_| Error::SingularShift { sigma, tau })?;
    let mut x = lu.solve(rhs);

    let rhs_norm = l2_norm_c(rhs).max(f64::MIN_POSITIVE);
    let op_scale = sigma.norm() + tau.norm() * band.norm_inf();
    let accept = |x: &[Complex64], r: &[Complex64]| {
        let floor = 8.0 * f64::EPSILON * op_scale * l2_norm_c(x);
        l2_norm_c(r) <= (SHIFTED_SOLVE_TOL * rhs_norm).max(floor)
    };
    let mut r = shifted_residual(band, sigma, tau, &x, rhs);
    if !accept(&x, &r) {
        let dx = lu.solve(&r);
        for (xi, di) in x.iter_mut().zip(dx.iter()) {
            *xi += di;
        }
        r = shifted_residual(band, sigma, tau, &x, rhs);
        if !accept(&x, &r) {
            return Err(Error::SingularShift { sigma, tau });
        }
    }
    Ok(x)
}

fn shifted_residual(
    band: &BandMatrix,
    sigma: Complex64,
    tau: Complex64,
    x: &[Complex64],
    rhs: &[Complex64],
) -> Vec<Complex64> {
    let mut ax = vec![Complex64::new(0.0, 0.0); x.len()];
    band.matvec_complex(x, &mut ax);
    rhs.iter()
        .zip(x.iter().zip(ax.iter()))
        .map(|(&b, (&xi, &axi))| b - sigma * xi - tau * axi)
        .collect()
}

fn l2_norm_c(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// The raw Neumann Laplacian together with its square, both dense and
/// banded. The Cahn-Hilliard solvers need the two pieces separately (the
/// nonlinearity sits under the Laplacian, the interface term under its
/// square), so they take this rather than a combined [`SpatialOperator`].
#[derive(Debug, Clone)]
pub struct LaplacianOp {
    dim: usize,
    n_per_dir: usize,
    h: f64,
    lap: DMatrix<f64>,
    lap_band: BandMatrix,
    lap_sq: DMatrix<f64>,
    lap_sq_band: BandMatrix,
}

impl LaplacianOp {
    pub fn new_1d(mesh: &Mesh1D) -> Self {
        let lap = assemble_laplacian_1d(mesh);
        Self::from_lap(1, mesh.n_x, mesh.h, lap)
    }

    pub fn new_2d(mesh: &Mesh2D) -> Result<Self> {
        let lap = assemble_laplacian_2d(mesh)?;
        Ok(Self::from_lap(2, mesh.n_x, mesh.h, lap))
    }

    fn from_lap(dim: usize, n_per_dir: usize, h: f64, lap: DMatrix<f64>) -> Self {
        let lap_sq = &lap * &lap;
        let lap_band = BandMatrix::from_dense(&lap);
        let lap_sq_band = BandMatrix::from_dense(&lap_sq);
        Self {
            dim,
            n_per_dir,
            h,
            lap,
            lap_band,
            lap_sq,
            lap_sq_band,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_per_dir(&self) -> usize {
        self.n_per_dir
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n_dof(&self) -> usize {
        self.lap.nrows()
    }

    pub fn lap_matrix(&self) -> &DMatrix<f64> {
        &self.lap
    }

    pub fn lap_sq_matrix(&self) -> &DMatrix<f64> {
        &self.lap_sq
    }

    pub fn lap_band(&self) -> &BandMatrix {
        &self.lap_band
    }

    pub fn lap_sq_band(&self) -> &BandMatrix {
        &self.lap_sq_band
    }

    pub fn apply_lap(&self, x: &[f64]) -> Vec<f64> {
        self.lap_band.apply(x)
    }

    pub fn apply_lap_sq(&self, x: &[f64]) -> Vec<f64> {
        self.lap_sq_band.apply(x)
    }
}

/// Cosine eigenbasis of the Neumann Laplacian (and hence of every assembled
/// operator kind). Column p is cos((p-1)(j-1) pi / (n-1)) over grid index j,
/// normalized to unit length. Used for the eigen-coordinate norms that the
/// discrete contraction estimates are stated in.
pub struct Eigenbasis {
    dim: usize,
    n_per_dir: usize,
    p: DMatrix<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl Eigenbasis {
    pub fn new(dim: usize, n_per_dir: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidParameter(format!("dim = {dim}")));
        }
        if n_per_dir < 3 {
            return Err(Error::InvalidMesh(format!("n_per_dir = {n_per_dir}")));
        }
        let n = n_per_dir;
        let mut p = DMatrix::zeros(n, n);
        for col in 0..n {
            let mut norm_sq = 0.0;
            for row in 0..n {
                let v = (col as f64 * row as f64 * PI / (n - 1) as f64).cos();
                p[(row, col)] = v;
                norm_sq += v * v;
            }
            let inv = 1.0 / norm_sq.sqrt();
            for row in 0..n {
                p[(row, col)] *= inv;
            }
        }
        Ok(Self {
            dim,
            n_per_dir,
            lu: p.clone().lu(),
            p,
        })
    }

    pub fn for_operator(op: &SpatialOperator) -> Result<Self> {
        Self::new(op.dim(), op.n_per_dir())
    }

    pub fn n_dof(&self) -> usize {
        if self.dim == 1 {
            self.n_per_dir
        } else {
            self.n_per_dir * self.n_per_dir
        }
    }

    /// Mode coefficients of a real vector: solves (P or P (x) P) xi = v.
    /// `xi[p]` pairs with `spectrum()[p]` of the operator the basis was
    /// built for (p-major, q-minor in 2D).
    pub fn coords(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.n_dof() {
            return Err(Error::ShapeMismatch(format!(
                "vector length {} != {}",
                v.len(),
                self.n_dof()
            )));
        }
        let n = self.n_per_dir;
        match self.dim {
            1 => self
                .lu
                .solve(v)
                .ok_or_else(|| Error::SingularSystem("eigenbasis".into())),
            _ => {
                // v[i1*n + i2] = (P Xi' P^T)[(i2, i1)] with
                // Xi'[(p2, p1)] = xi[p1*n + p2]
                let e = DMatrix::from_fn(n, n, |i2, i1| v[i1 * n + i2]);
                let y = self
                    .lu
                    .solve(&e)
                    .ok_or_else(|| Error::SingularSystem("eigenbasis".into()))?;
                let z = self
                    .lu
                    .solve(&y.transpose())
                    .ok_or_else(|| Error::SingularSystem("eigenbasis".into()))?;
                // z[(p1, p2)] = xi[p1*n + p2]
                let mut xi = DVector::zeros(n * n);
                for p1 in 0..n {
                    for p2 in 0..n {
                        xi[p1 * n + p2] = z[(p1, p2)];
                    }
                }
                Ok(xi)
            }
        }
    }

    /// Complex variant of [`Eigenbasis::coords`], done per real/imag part.
    pub fn coords_complex(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        let re = DVector::from_fn(v.len(), |i, _| v[i].re);
        let im = DVector::from_fn(v.len(), |i, _| v[i].im);
        let cre = self.coords(&re)?;
        let cim = self.coords(&im)?;
        Ok((0..v.len())
            .map(|i| Complex64::new(cre[i], cim[i]))
            .collect())
    }

    /// Reassembles a vector from real mode coefficients: (P or P (x) P) xi.
    pub fn synthesize(&self, xi: &DVector<f64>) -> Result<DVector<f64>> {
        if xi.len() != self.n_dof() {
            return Err(Error::ShapeMismatch(format!(
                "coefficient length {} != {}",
                xi.len(),
                self.n_dof()
            )));
        }
        let n = self.n_per_dir;
        Ok(match self.dim {
            1 => &self.p * xi,
            _ => {
                let xi_mat = DMatrix::from_fn(n, n, |p2, p1| xi[p1 * n + p2]);
                let e = &self.p * xi_mat * self.p.transpose();
                DVector::from_fn(n * n, |idx, _| e[(idx % n, idx / n)])
            }
        })
    }

    /// Complex variant of [`Eigenbasis::synthesize`].
    pub fn synthesize_complex(&self, xi: &[Complex64]) -> Result<Vec<Complex64>> {
        let re = self.synthesize(&DVector::from_fn(xi.len(), |i, _| xi[i].re))?;
        let im = self.synthesize(&DVector::from_fn(xi.len(), |i, _| xi[i].im))?;
        Ok((0..xi.len())
            .map(|i| Complex64::new(re[i], im[i]))
            .collect())
    }
}
