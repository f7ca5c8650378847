//! Banded matrix storage and LU factorization with partial pivoting.
//!
//! All spatial operators in this crate are banded (tridiagonal Laplacian,
//! pentadiagonal fourth-order stencils, block-banded Kronecker sums), and the
//! diagonalization sweep factors one shifted operator per time frequency, so
//! factorization cost dominates everything else. The working array follows
//! the LAPACK `gbtrf` layout: `2*kl + ku + 1` band rows per column, the top
//! `kl` rows reserved for pivoting fill.

use num_complex::Complex64;

/// Scalar supported by the banded factorization.
pub trait BandScalar:
    Copy
    + PartialEq
    + std::fmt::Debug
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + 'static
{
    fn zero() -> Self;
    fn from_real(x: f64) -> Self;
    /// Squared modulus, used for pivot selection and singularity detection.
    fn mag_sq(self) -> f64;
}

impl BandScalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn mag_sq(self) -> f64 {
        self * self
    }
}

impl BandScalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn mag_sq(self) -> f64 {
        self.norm_sqr()
    }
}

/// Real banded matrix in plain band storage (`kl + ku + 1` rows per column).
///
/// Entry `(i, j)` lives at `data[j * ld + ku + i - j]`.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    /// Extracts the band structure of a dense square matrix.
    pub fn from_dense(m: &nalgebra::DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "band extraction needs a square matrix");
        let n = m.nrows();
        let mut kl = 0usize;
        let mut ku = 0usize;
        for i in 0..n {
            for j in 0..n {
                if m[(i, j)] != 0.0 {
                    if i > j {
                        kl = kl.max(i - j);
                    } else {
                        ku = ku.max(j - i);
                    }
                }
            }
        }
        let ld = kl + ku + 1;
        let mut data = vec![0.0; ld * n];
        for j in 0..n {
            let lo = j.saturating_sub(ku);
            let hi = (j + kl).min(n - 1);
            for i in lo..=hi {
                data[j * ld + ku + i - j] = m[(i, j)];
            }
        }
        Self { n, kl, ku, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kl(&self) -> usize {
        self.kl
    }

    pub fn ku(&self) -> usize {
        self.ku
    }

    /// y = A x.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.fill(0.0);
        let ld = self.kl + self.ku + 1;
        for j in 0..self.n {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            let col = &self.data[j * ld..];
            for i in lo..=hi {
                y[i] += col[self.ku + i - j] * xj;
            }
        }
    }

    /// Applies A to a real vector, returning a fresh output vector.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        let ld = self.kl + self.ku + 1;
        let mut row_sums = vec![0.0; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for i in lo..=hi {
                row_sums[i] += self.data[j * ld + self.ku + i - j].abs();
            }
        }
        row_sums.into_iter().fold(0.0, f64::max)
    }

    /// y = A x for a complex vector (A stays real).
    pub fn matvec_complex(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.fill(Complex64::new(0.0, 0.0));
        let ld = self.kl + self.ku + 1;
        for j in 0..self.n {
            let xj = x[j];
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            let col = &self.data[j * ld..];
            for i in lo..=hi {
                y[i] += xj * col[self.ku + i - j];
            }
        }
    }
}

/// Error raised when a banded factorization encounters an exactly zero pivot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingularBand {
    /// Column at which factorization broke down.
    pub column: usize,
}

/// Banded system under assembly: a linear combination of real band matrices
/// plus a scalar multiple of the identity, ready to be factored in place.
pub struct BandSystem<T: BandScalar> {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    data: Vec<T>,
}

impl<T: BandScalar> BandSystem<T> {
    /// Zero system with the given bandwidths. The working array already
    /// carries the extra `kl` fill rows needed by partial pivoting.
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        assert!(n > 0);
        let ld = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ld,
            data: vec![T::zero(); ld * n],
        }
    }

    /// self += c * M. Panics if M does not fit in the declared bandwidths.
    pub fn add_band(&mut self, m: &BandMatrix, c: T) {
        self.add_band_col_scaled(m, c, None);
    }

    /// self += c * M * diag(scale), i.e. column j of M is multiplied by
    /// scale[j]. Used for the averaged-Jacobian term where the spatial
    /// operator is composed with a diagonal matrix on the right.
    pub fn add_band_col_scaled(&mut self, m: &BandMatrix, c: T, scale: Option<&[f64]>) {
        assert_eq!(m.n, self.n);
        assert!(m.kl <= self.kl && m.ku <= self.ku, "band does not fit");
        let mld = m.kl + m.ku + 1;
        for j in 0..self.n {
            let cs = match scale {
                Some(s) => c * T::from_real(s[j]),
                None => c,
            };
            let lo = j.saturating_sub(m.ku);
            let hi = (j + m.kl).min(self.n - 1);
            for i in lo..=hi {
                let v = m.data[j * mld + m.ku + i - j];
                if v != 0.0 {
                    let slot = &mut self.data[j * self.ld + self.kl + self.ku + i - j];
                    *slot = *slot + cs * T::from_real(v);
                }
            }
        }
    }

    /// self += c * I.
    pub fn add_identity(&mut self, c: T) {
        for j in 0..self.n {
            let slot = &mut self.data[j * self.ld + self.kl + self.ku];
            *slot = *slot + c;
        }
    }

    /// self += c * diag(d).
    pub fn add_diagonal(&mut self, d: &[f64], c: T) {
        assert_eq!(d.len(), self.n);
        for j in 0..self.n {
            let slot = &mut self.data[j * self.ld + self.kl + self.ku];
            *slot = *slot + c * T::from_real(d[j]);
        }
    }

    /// LU factorization with partial pivoting (gbtrf-style, unblocked).
    ///
    /// Row interchanges stay within the band window, so U widens to at most
    /// `ku + kl` superdiagonals; the reserved fill rows absorb that growth.
    pub fn factor(mut self) -> Result<BandLu<T>, SingularBand> {
        let n = self.n;
        let (kl, ku, ld) = (self.kl, self.ku, self.ld);
        let diag = kl + ku;
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let base = j * ld + diag;
            let mut p = 0usize;
            let mut best = self.data[base].mag_sq();
            for q in 1..=km {
                let cand = self.data[base + q].mag_sq();
                if cand > best {
                    best = cand;
                    p = q;
                }
            }
            if best == 0.0 {
                return Err(SingularBand { column: j });
            }
            ipiv[j] = j + p;
            // columns touched by row j extend to ju <= j + ku + kl
            ju = ju.max((j + ku + p).min(n - 1));
            if p != 0 {
                for c in j..=ju {
                    // matrix rows j and j+p inside column c; diag + j >= c
                    // holds because ju - j <= ku + kl = diag
                    let a = c * ld + (diag + j - c);
                    let b = c * ld + (diag + j + p - c);
                    self.data.swap(a, b);
                }
            }
            let piv = self.data[base];
            for q in 1..=km {
                self.data[base + q] = self.data[base + q] / piv;
            }
            for c in (j + 1)..=ju {
                let f = self.data[c * ld + (diag + j - c)];
                if f != T::zero() {
                    for q in 1..=km {
                        let idx = c * ld + (diag + j + q - c);
                        self.data[idx] = self.data[idx] - self.data[base + q] * f;
                    }
                }
            }
        }
        Ok(BandLu {
            n,
            kl,
            ku,
            ld,
            data: self.data,
            ipiv,
        })
    }
}

/// Factored banded system.
pub struct BandLu<T: BandScalar> {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    data: Vec<T>,
    ipiv: Vec<usize>,
}

impl<T: BandScalar> BandLu<T> {
    /// Solves A x = b in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        assert_eq!(b.len(), self.n);
        let diag = self.kl + self.ku;
        // L (unit lower, stored multipliers) with row interchanges
        for j in 0..self.n {
            let jp = self.ipiv[j];
            if jp != j {
                b.swap(j, jp);
            }
            let km = self.kl.min(self.n - 1 - j);
            let bj = b[j];
            if bj != T::zero() {
                let base = j * self.ld + diag;
                for q in 1..=km {
                    b[j + q] = b[j + q] - self.data[base + q] * bj;
                }
            }
        }
        // U (bandwidth ku + kl after pivoting)
        let ubw = self.ku + self.kl;
        for j in (0..self.n).rev() {
            let x = b[j] / self.data[j * self.ld + diag];
            b[j] = x;
            if x != T::zero() {
                let top = j.saturating_sub(ubw);
                for r in top..j {
                    b[r] = b[r] - self.data[j * self.ld + (diag + r - j)] * x;
                }
            }
        }
    }

    /// Solves A x = b, returning a fresh vector.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
