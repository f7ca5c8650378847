//! Strang-type alpha-circulant time matrices, their diagonalization, and the
//! scaled DFT transforms applied before and after the frequency-wise solves.
//!
//! All eigenvalue sequences are computed from the same first-column formula
//! `D_j = diag(sqrt(N_t) * F * Gamma_alpha * C_j(:,1))` with one fixed
//! transform convention, so the pairing across j is consistent by
//! construction; the closed forms from the derivation serve only as test
//! oracles (they agree up to index reordering).

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Below this alpha, the Gamma_alpha scaling amplifies roundoff by roughly
/// 1/alpha; runs are allowed but flagged.
pub const ALPHA_ROUNDOFF_FLOOR: f64 = 1e-3;

/// The pair of Strang-type alpha-circulant time matrices, stored by first
/// column. `C1` carries the 1/dt factor of the difference quotient; `C2`
/// carries the theta weights. Their dense forms follow the alpha-circulant
/// shift rule: entry (i, j) is `col[(i - j) mod n]`, scaled by alpha above
/// the diagonal.
#[derive(Debug, Clone)]
pub struct AlphaCirculant {
    n_t: usize,
    alpha: f64,
    dt: f64,
    theta: f64,
    first_col_c1: Vec<f64>,
    first_col_c2: Vec<f64>,
}

impl AlphaCirculant {
    /// Builds C1 and C2 for `n_t` time steps.
    ///
    /// `n_t = 1` is accepted as the degenerate single-step system: the
    /// wrap-around entry then lands on the diagonal, so the stored first
    /// columns are `[(1 - alpha)/dt]` and `[theta + (1 - theta) alpha]`.
    pub fn new(n_t: usize, alpha: f64, dt: f64, theta: f64) -> Result<Self> {
        if n_t == 0 {
            return Err(Error::InvalidParameter("n_t must be at least 1".into()));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha = {alpha} must lie strictly inside (0, 1)"
            )));
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dt = {dt} must be positive"
            )));
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidParameter(format!(
                "theta = {theta} must lie in [0, 1]"
            )));
        }
        if alpha < ALPHA_ROUNDOFF_FLOOR {
            log::warn!(
                "alpha = {alpha} is below the tested floor {ALPHA_ROUNDOFF_FLOOR}; \
                 expect roundoff amplification of order 1/alpha in the transforms"
            );
        }
        let (first_col_c1, first_col_c2) = if n_t == 1 {
            (
                vec![(1.0 - alpha) / dt],
                vec![theta + (1.0 - theta) * alpha],
            )
        } else {
            let mut c1 = vec![0.0; n_t];
            c1[0] = 1.0 / dt;
            c1[1] = -1.0 / dt;
            let mut c2 = vec![0.0; n_t];
            c2[0] = theta;
            c2[1] = 1.0 - theta;
            (c1, c2)
        };
        Ok(Self {
            n_t,
            alpha,
            dt,
            theta,
            first_col_c1,
            first_col_c2,
        })
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn first_col_c1(&self) -> &[f64] {
        &self.first_col_c1
    }

    pub fn first_col_c2(&self) -> &[f64] {
        &self.first_col_c2
    }

    /// First column of C3, which is C2 at theta = 0.
    pub fn first_col_c3(&self) -> Vec<f64> {
        if self.n_t == 1 {
            vec![self.alpha]
        } else {
            let mut c3 = vec![0.0; self.n_t];
            c3[1] = 1.0;
            c3
        }
    }

    fn dense_from_first_col(&self, col: &[f64]) -> DMatrix<f64> {
        let n = self.n_t;
        DMatrix::from_fn(n, n, |i, j| {
            let v = col[(i + n - j) % n];
            if i < j {
                self.alpha * v
            } else {
                v
            }
        })
    }

    pub fn dense_c1(&self) -> DMatrix<f64> {
        self.dense_from_first_col(&self.first_col_c1)
    }

    pub fn dense_c2(&self) -> DMatrix<f64> {
        self.dense_from_first_col(&self.first_col_c2)
    }

    pub fn dense_c3(&self) -> DMatrix<f64> {
        self.dense_from_first_col(&self.first_col_c3())
    }

    /// Computes Gamma_alpha and the three eigenvalue sequences.
    pub fn diagonalize(&self) -> DiagonalizationData {
        let n = self.n_t;
        let ln_alpha = self.alpha.ln();
        // alpha^(r/n) via exp(r ln(alpha) / n): stable for tiny alpha
        let gamma: Vec<f64> = (0..n)
            .map(|r| (r as f64 * ln_alpha / n as f64).exp())
            .collect();
        let transforms = TimeTransforms::new(n);
        let eig = |col: &[f64]| -> Vec<Complex64> {
            let mut v: Vec<Complex64> = col
                .iter()
                .zip(gamma.iter())
                .map(|(&c, &g)| Complex64::new(c * g, 0.0))
                .collect();
            transforms.idft_unnormalized(&mut v);
            v
        };
        let eigs_c1 = eig(&self.first_col_c1);
        let eigs_c2 = eig(&self.first_col_c2);
        let eigs_c3 = eig(&self.first_col_c3());
        DiagonalizationData {
            n_t: n,
            alpha: self.alpha,
            dt: self.dt,
            theta: self.theta,
            gamma,
            eigs_c1,
            eigs_c2,
            eigs_c3,
        }
    }
}

/// Eigenvalue data for the three circulants, all produced by the same scaled
/// transform so the frequency pairing is consistent across j.
#[derive(Debug, Clone)]
pub struct DiagonalizationData {
    n_t: usize,
    alpha: f64,
    dt: f64,
    theta: f64,
    gamma: Vec<f64>,
    eigs_c1: Vec<Complex64>,
    eigs_c2: Vec<Complex64>,
    eigs_c3: Vec<Complex64>,
}

impl DiagonalizationData {
    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn eigs_c1(&self) -> &[Complex64] {
        &self.eigs_c1
    }

    pub fn eigs_c2(&self) -> &[Complex64] {
        &self.eigs_c2
    }

    pub fn eigs_c3(&self) -> &[Complex64] {
        &self.eigs_c3
    }
}

/// Transform backend for the block-wise DFTs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformBackend {
    /// rustfft (mixed radix / Bluestein), any length.
    Fft,
    /// Dense matrix-vector DFT; O(n_t^2) but trivially auditable.
    DenseDft,
}

/// Planned transforms of length `n_t` for Step-(1) and Step-(3).
///
/// With `F = IDFT/sqrt(n)` (positive-exponent convention) the steps are
/// `S1 = (F (x) I)(Gamma (x) I) b` and `U = (Gamma^{-1} (x) I)(F* (x) I) S2`.
pub struct TimeTransforms {
    n_t: usize,
    backend: TransformBackend,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl TimeTransforms {
    pub fn new(n_t: usize) -> Self {
        Self::with_backend(n_t, TransformBackend::Fft)
    }

    pub fn with_backend(n_t: usize, backend: TransformBackend) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n_t);
        let inv = planner.plan_fft_inverse(n_t);
        Self {
            n_t,
            backend,
            fwd,
            inv,
        }
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    /// Unnormalized inverse DFT (positive exponent) of one length-n_t buffer.
    pub fn idft_unnormalized(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n_t);
        match self.backend {
            TransformBackend::Fft => {
                let mut scratch =
                    vec![Complex64::new(0.0, 0.0); self.inv.get_inplace_scratch_len()];
                self.inv.process_with_scratch(buf, &mut scratch);
            }
            TransformBackend::DenseDft => {
                dense_dft(buf, 1.0);
            }
        }
    }

    /// Unnormalized forward DFT (negative exponent) of one buffer.
    pub fn dft_unnormalized(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n_t);
        match self.backend {
            TransformBackend::Fft => {
                let mut scratch =
                    vec![Complex64::new(0.0, 0.0); self.fwd.get_inplace_scratch_len()];
                self.fwd.process_with_scratch(buf, &mut scratch);
            }
            TransformBackend::DenseDft => {
                dense_dft(buf, -1.0);
            }
        }
    }

    /// Step-(1): scale block r by gamma[r], then apply F across the block
    /// index independently for each of the n_dof spatial components.
    ///
    /// `flat` is block-major: block r occupies `flat[r*n_dof .. (r+1)*n_dof]`.
    pub fn step1(&self, flat: &mut [Complex64], n_dof: usize, gamma: &[f64]) -> Result<()> {
        self.transform_blocks(flat, n_dof, gamma, true)
    }

    /// Step-(3): apply F* across the block index, then unscale block r by
    /// gamma[r]. Exact inverse of [`TimeTransforms::step1`].
    pub fn step3(&self, flat: &mut [Complex64], n_dof: usize, gamma: &[f64]) -> Result<()> {
        self.transform_blocks(flat, n_dof, gamma, false)
    }

    fn transform_blocks(
        &self,
        flat: &mut [Complex64],
        n_dof: usize,
        gamma: &[f64],
        forward_step: bool,
    ) -> Result<()> {
        let n_t = self.n_t;
        if gamma.len() != n_t || n_dof == 0 || flat.len() != n_t * n_dof {
            return Err(Error::ShapeMismatch(format!(
                "expected {} blocks of {} entries, got a buffer of {}",
                n_t,
                n_dof,
                flat.len()
            )));
        }
        if forward_step {
            for (r, &g) in gamma.iter().enumerate() {
                for v in &mut flat[r * n_dof..(r + 1) * n_dof] {
                    *v *= g;
                }
            }
        }
        // time-contiguous scratch, one column per spatial component
        let mut cols = vec![Complex64::new(0.0, 0.0); n_t * n_dof];
        for r in 0..n_t {
            for i in 0..n_dof {
                cols[i * n_t + r] = flat[r * n_dof + i];
            }
        }
        let scale = 1.0 / (n_t as f64).sqrt();
        use rayon::prelude::*;
        cols.par_chunks_mut(n_t).for_each(|col| {
            let mut buf = col.to_vec();
            if forward_step {
                self.idft_unnormalized(&mut buf);
            } else {
                self.dft_unnormalized(&mut buf);
            }
            for (c, b) in col.iter_mut().zip(buf.iter()) {
                *c = b * scale;
            }
        });
        for r in 0..n_t {
            for i in 0..n_dof {
                flat[r * n_dof + i] = cols[i * n_t + r];
            }
        }
        if !forward_step {
            for (r, &g) in gamma.iter().enumerate() {
                let ginv = 1.0 / g;
                for v in &mut flat[r * n_dof..(r + 1) * n_dof] {
                    *v *= ginv;
                }
            }
        }
        Ok(())
    }
}

fn dense_dft(buf: &mut [Complex64], sign: f64) {
    let n = buf.len();
    let input = buf.to_vec();
    for (k, out) in buf.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, &x) in input.iter().enumerate() {
            let angle = sign * 2.0 * std::f64::consts::PI * (j * k % n) as f64 / n as f64;
            acc += x * Complex64::new(angle.cos(), angle.sin());
        }
        *out = acc;
    }
}

/// The DFT factor F with entries omega0^{(l1-1)(l2-1)} / sqrt(n),
/// omega0 = exp(2 pi i / n). Dense; used for reconstruction tests.
pub fn dft_matrix_f(n: usize) -> DMatrix<Complex64> {
    let scale = 1.0 / (n as f64).sqrt();
    DMatrix::from_fn(n, n, |l1, l2| {
        let angle = 2.0 * std::f64::consts::PI * ((l1 * l2) % n) as f64 / n as f64;
        Complex64::new(angle.cos(), angle.sin()) * scale
    })
}
