//! Closed-form per-iteration contraction factors for every problem class,
//! evaluated as plain functions so runs can overlay theory against measured
//! error histories.
//!
//! Conventions: a "vacuous" bound (denominator <= 0) is reported as +inf
//! with a flag rather than thrown, so plots can annotate it; genuinely
//! invalid inputs (hypothesis violations like |alpha| >= 1/2 where the
//! estimate requires less) are errors. Powers like R^{N_t} for N_t ~ 1e4
//! are computed in the log domain.

use crate::error::{Error, Result};

/// A contraction factor plus its validity flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub rho: f64,
    pub vacuous: bool,
}

impl Bound {
    fn from_q(q: f64) -> Self {
        if q >= 1.0 {
            log::warn!("vacuous contraction bound: |alpha|-weighted amplification {q} >= 1");
            Bound {
                rho: f64::INFINITY,
                vacuous: true,
            }
        } else {
            Bound {
                rho: q / (1.0 - q),
                vacuous: false,
            }
        }
    }
}

/// Which branch of the piecewise linearized-CH factor applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinChRegime {
    /// Low frequencies amplify (backward diffusion wins somewhere).
    Amplifying,
    /// Everything decays; the factor reduces to |alpha|/(1-|alpha|).
    Simple,
}

/// Piecewise factor for the linearized CH estimates, with the k-independent
/// prefactor that multiplies the k-th power form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinChBound {
    pub rho: f64,
    pub regime: LinChRegime,
    pub prefactor: f64,
    pub vacuous: bool,
}

fn check_alpha_open_unit(alpha: f64) -> Result<f64> {
    if !(alpha.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "|alpha| = {} must be below 1",
            alpha.abs()
        )));
    }
    Ok(alpha.abs())
}

fn check_alpha_half(alpha: f64) -> Result<f64> {
    if !(alpha.abs() < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "|alpha| = {} must be below 1/2 for this estimate",
            alpha.abs()
        )));
    }
    Ok(alpha.abs())
}

/// Continuous-level biharmonic factor
/// |alpha| e^{-omega_min^4 T} / (1 - |alpha| e^{-omega_min^4 T}).
pub fn rho_biharmonic_continuous(alpha: f64, t_final: f64, omega_min: f64) -> Result<f64> {
    let a = check_alpha_open_unit(alpha)?;
    let q = a * (-omega_min.powi(4) * t_final).exp();
    if 1.0 - q <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "denominator 1 - {q} is not positive"
        )));
    }
    Ok(q / (1.0 - q))
}

/// 2D continuous-level biharmonic factor with the second lowest frequency.
pub fn rho_biharmonic_continuous_2d(
    alpha: f64,
    t_final: f64,
    omega_min: f64,
    xi_min: f64,
) -> Result<f64> {
    let a = check_alpha_open_unit(alpha)?;
    let q = a * (-(omega_min.powi(4) + xi_min.powi(4)) * t_final).exp();
    if 1.0 - q <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "denominator 1 - {q} is not positive"
        )));
    }
    Ok(q / (1.0 - q))
}

/// The discrete-level factor |alpha| / (1 - |alpha|), valid for |alpha| < 1/2.
pub fn rho_discrete_simple(alpha: f64) -> Result<f64> {
    let a = check_alpha_half(alpha)?;
    Ok(a / (1.0 - a))
}

/// Continuous-level linearized CH factor. The growth function is
/// g(z) = -eps^2 z^2 + beta^2 sqrt(T) z with maximum at
/// z* = beta^2 sqrt(T) / (2 eps^2).
pub fn rho_linch_continuous(alpha: f64, t_final: f64, eps: f64, beta: f64) -> Result<LinChBound> {
    let a = check_alpha_half(alpha)?;
    if !(eps > 0.0) || t_final < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "need eps > 0 and T >= 0, got ({eps}, {t_final})"
        )));
    }
    let eps2 = eps * eps;
    let beta2 = beta * beta;
    let z_star = beta2 * t_final.sqrt() / (2.0 * eps2);
    let g_star = -eps2 * z_star * z_star + beta2 * t_final.sqrt() * z_star;
    linch_bound_from_growth(a, g_star)
}

/// 2D continuous-level linearized CH factor. The growth function becomes
/// g(z1, z2) = -eps^2 (z1^2 + z2^2) + beta^2 sqrt(T) (z1 + z2), maximized
/// at z1* = z2* = beta^2 sqrt(T) / (2 eps^2), i.e. twice the 1D growth.
pub fn rho_linch_continuous_2d(
    alpha: f64,
    t_final: f64,
    eps: f64,
    beta: f64,
) -> Result<LinChBound> {
    let a = check_alpha_half(alpha)?;
    if !(eps > 0.0) || t_final < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "need eps > 0 and T >= 0, got ({eps}, {t_final})"
        )));
    }
    let eps2 = eps * eps;
    let beta2 = beta * beta;
    let z_star = beta2 * t_final.sqrt() / (2.0 * eps2);
    let g_star = 2.0 * (-eps2 * z_star * z_star + beta2 * t_final.sqrt() * z_star);
    linch_bound_from_growth(a, g_star)
}

/// Semi-discrete linearized CH factor. Here g(z) = eps^2 z^2 / T + beta^2 z
/// over z <= 0 with minimum at z* = -beta^2 T / (2 eps^2); the factor uses
/// e^{-g(z*)}.
pub fn rho_linch_semidiscrete(alpha: f64, t_final: f64, eps: f64, beta: f64) -> Result<LinChBound> {
    let a = check_alpha_half(alpha)?;
    if !(eps > 0.0) || !(t_final > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need eps > 0 and T > 0, got ({eps}, {t_final})"
        )));
    }
    let eps2 = eps * eps;
    let beta2 = beta * beta;
    let z_star = -beta2 * t_final / (2.0 * eps2);
    let g_star = eps2 / t_final * z_star * z_star + beta2 * z_star;
    linch_bound_from_growth(a, -g_star)
}

fn linch_bound_from_growth(a: f64, growth: f64) -> Result<LinChBound> {
    if growth <= 0.0 {
        // no amplifying frequencies: plain discrete factor
        return Ok(LinChBound {
            rho: a / (1.0 - a),
            regime: LinChRegime::Simple,
            prefactor: 1.0,
            vacuous: false,
        });
    }
    let prefactor = growth.exp();
    let q = a * prefactor;
    let b = Bound::from_q(q);
    Ok(LinChBound {
        rho: b.rho,
        regime: LinChRegime::Amplifying,
        prefactor,
        vacuous: b.vacuous,
    })
}

/// Fully discrete linearized CH factor
/// rho = |alpha| R_theta^{N_t}(z*) / (1 - |alpha| R_theta^{N_t}(z*)) with
/// phi(z) = -beta^2 z + eps^2 z^2 / dt and z* = beta^2 dt / (2 eps^2);
/// theta must be 1 (backward Euler) or 1/2 (trapezoidal).
pub fn rho_linch_fully_discrete(
    alpha: f64,
    dt: f64,
    n_t: usize,
    eps: f64,
    beta: f64,
    theta: f64,
) -> Result<Bound> {
    let a = check_alpha_half(alpha)?;
    if !(eps > 0.0) || !(dt > 0.0) || n_t == 0 {
        return Err(Error::InvalidParameter(format!(
            "need eps > 0, dt > 0, n_t >= 1, got ({eps}, {dt}, {n_t})"
        )));
    }
    let eps2 = eps * eps;
    let beta2 = beta * beta;
    let z_star = beta2 * dt / (2.0 * eps2);
    let phi = -beta2 * z_star + eps2 / dt * z_star * z_star;
    let r = if theta == 1.0 {
        1.0 / (1.0 + phi)
    } else if theta == 0.5 {
        (1.0 - 0.5 * phi) / (1.0 + 0.5 * phi)
    } else {
        return Err(Error::InvalidParameter(format!(
            "theta = {theta}: the fully discrete estimate covers theta = 1 and 1/2"
        )));
    };
    if r <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "stability function R({z_star}) = {r} is not positive"
        )));
    }
    let r_pow = (n_t as f64 * r.ln()).exp();
    Ok(Bound::from_q(a * r_pow))
}

/// Constants of the nonlinear CH estimates.
#[derive(Debug, Clone, Copy)]
pub struct ChConstants {
    /// C* = M/2 + M^2/(8 eps^2)
    pub c_star: f64,
    /// gamma = |alpha| e^{C* T} / (1 - |alpha| e^{C* T}), if alpha was given
    pub gamma: Option<Bound>,
    /// One-sided Lipschitz rate L = 16 eps^2 / (sqrt(N_x) h^4) - 4 M / h^2
    pub l: f64,
    /// L > 0 requires h^{3/2} < 4 eps^2 / M
    pub l_valid: bool,
    /// C_1 = (1 / (1 + 2 L dt))^{N_t / 2}
    pub c1_thm43: f64,
}

/// Evaluates C*, gamma, L, and C_1 for the nonlinear CH estimates.
#[allow(clippy::too_many_arguments)]
pub fn ch_constants(
    m: f64,
    eps: f64,
    t_final: f64,
    h: f64,
    n_x: usize,
    dt: f64,
    n_t: usize,
    alpha: Option<f64>,
) -> ChConstants {
    let eps2 = eps * eps;
    let c_star = 0.5 * m + m * m / (8.0 * eps2);
    let l = 16.0 * eps2 / ((n_x as f64).sqrt() * h.powi(4)) - 4.0 * m / (h * h);
    let l_valid = l > 0.0;
    let base = 1.0 + 2.0 * l * dt;
    let c1_thm43 = if base > 0.0 {
        (-(n_t as f64) / 2.0 * base.ln()).exp()
    } else {
        f64::NAN
    };
    let gamma = alpha.map(|a| Bound::from_q(a.abs() * (c_star * t_final).exp()));
    ChConstants {
        c_star,
        gamma,
        l,
        l_valid,
        c1_thm43,
    }
}

/// Semi-discrete nonlinear CH factor
/// |alpha| e^{-L T} / (1 - |alpha| e^{-L T}) for a one-sided Lipschitz rate
/// L > 0.
pub fn rho_ch_semidiscrete(alpha: f64, l: f64, t_final: f64) -> Result<Bound> {
    let a = check_alpha_open_unit(alpha)?;
    if !(l > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "one-sided Lipschitz rate L = {l} must be positive"
        )));
    }
    Ok(Bound::from_q(a * (-l * t_final).exp()))
}

/// Fully discrete nonlinear CH factor rho = |alpha| C_1 / (1 - |alpha| C_1)
/// with C_1 = (1/(1 + 2 L dt))^{N_t/2}.
pub fn rho_ch_fully_discrete(alpha: f64, l: f64, dt: f64, n_t: usize) -> Result<Bound> {
    let a = check_alpha_open_unit(alpha)?;
    let base = 1.0 + 2.0 * l * dt;
    if !(base > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "1 + 2 L dt = {base} must be positive"
        )));
    }
    let c1 = (-(n_t as f64) / 2.0 * base.ln()).exp();
    Ok(Bound::from_q(a * c1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn biharmonic_continuous_values() {
        // alpha = 0.001, T = 1, omega_min = 0: 0.001/0.999
        let rho = rho_biharmonic_continuous(0.001, 1.0, 0.0).unwrap();
        assert!((rho - 0.001 / 0.999).abs() < 1e-15);
        // high frequency kills the factor
        assert!(rho_biharmonic_continuous(0.5, 1.0, 50.0).unwrap() < 1e-300);
        // T = 0: plain 0.5/0.5 = 1
        assert!((rho_biharmonic_continuous(0.5, 0.0, 7.0).unwrap() - 1.0).abs() < 1e-15);
        // 2D variant
        let r2 = rho_biharmonic_continuous_2d(0.001, 1.0, 0.0, 0.0).unwrap();
        assert!((r2 - 0.001 / 0.999).abs() < 1e-15);
    }

    #[test]
    fn discrete_simple_values() {
        assert!((rho_discrete_simple(0.001).unwrap() - 0.001 / 0.999).abs() < 1e-15);
        assert!((rho_discrete_simple(0.25).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(rho_discrete_simple(0.5).is_err());
        assert!(rho_discrete_simple(-0.6).is_err());
    }

    #[test]
    fn linch_continuous_example() {
        // beta^2 = 0.04, eps^2 = 0.01, T = 1: z* = 2, g(z*) = 0.04
        let b = rho_linch_continuous(0.1, 1.0, 0.1, 0.2).unwrap();
        assert_eq!(b.regime, LinChRegime::Amplifying);
        assert!((b.prefactor - 0.04f64.exp()).abs() < 1e-14);
        let q = 0.1 * 0.04f64.exp();
        assert!((b.rho - q / (1.0 - q)).abs() < 1e-14);
        // beta = 0 reduces to the simple factor
        let b0 = rho_linch_continuous(0.1, 1.0, 0.1, 0.0).unwrap();
        assert_eq!(b0.regime, LinChRegime::Simple);
        assert!((b0.rho - rho_discrete_simple(0.1).unwrap()).abs() < 1e-15);
        // large eps approaches the simple factor
        let blarge = rho_linch_continuous(0.1, 1.0, 50.0, 0.2).unwrap();
        assert!((blarge.rho - rho_discrete_simple(0.1).unwrap()).abs() < 1e-6);
        // the 2D growth is twice the 1D growth at the shared extremum
        let b2 = rho_linch_continuous_2d(0.1, 1.0, 0.1, 0.2).unwrap();
        assert!((b2.prefactor - 0.08f64.exp()).abs() < 1e-14);
        let q = 0.1 * 0.08f64.exp();
        assert!((b2.rho - q / (1.0 - q)).abs() < 1e-14);
    }

    #[test]
    fn linch_continuous_extremum_against_grid_scan() {
        let (t_final, eps, beta): (f64, f64, f64) = (2.0, 0.15, 0.3);
        let eps2 = eps * eps;
        let beta2 = beta * beta;
        let g = |z: f64| -eps2 * z * z + beta2 * t_final.sqrt() * z;
        let mut best = f64::NEG_INFINITY;
        let mut best_z = 0.0;
        for k in 0..200_000 {
            let z = k as f64 * 1e-4;
            if g(z) > best {
                best = g(z);
                best_z = z;
            }
        }
        let z_star = beta2 * t_final.sqrt() / (2.0 * eps2);
        assert!((best_z - z_star).abs() < 1e-3, "{best_z} vs {z_star}");
        let b = rho_linch_continuous(0.2, t_final, eps, beta).unwrap();
        assert!((b.prefactor.ln() - best).abs() < 1e-7);
    }

    #[test]
    fn linch_semidiscrete_example() {
        // beta^2 = 0.04, eps^2 = 0.01, T = 1: z* = -2, g(z*) = -0.04,
        // factor uses e^{+0.04}
        let b = rho_linch_semidiscrete(0.1, 1.0, 0.1, 0.2).unwrap();
        assert_eq!(b.regime, LinChRegime::Amplifying);
        assert!((b.prefactor - 0.04f64.exp()).abs() < 1e-14);
        // grid-scan of the minimum
        let g = |z: f64| 0.01 / 1.0 * z * z + 0.04 * z;
        let mut best = f64::INFINITY;
        for k in 0..100_000 {
            let z = -k as f64 * 1e-4;
            best = best.min(g(z));
        }
        assert!((best - (-0.04)).abs() < 1e-7);
        // beta = 0 and T -> 0 both reduce to the simple factor
        let b0 = rho_linch_semidiscrete(0.1, 1.0, 0.1, 0.0).unwrap();
        assert_eq!(b0.regime, LinChRegime::Simple);
        let bt = rho_linch_semidiscrete(0.1, 1e-12, 0.1, 0.2).unwrap();
        assert!((bt.rho - rho_discrete_simple(0.1).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn linch_fully_discrete_paper_scale_value() {
        // beta = 0.2, eps^2 = 0.01, dt = 1e-4, n_t = 1e4, theta = 1,
        // alpha = 1e-3: R^{n_t} ~ e^{0.04}, rho ~ 1.042e-3
        let b = rho_linch_fully_discrete(1e-3, 1e-4, 10_000, 0.1, 0.2, 1.0).unwrap();
        assert!(!b.vacuous);
        let r_pow = 0.04f64.exp();
        let expected = 1e-3 * r_pow / (1.0 - 1e-3 * r_pow);
        assert!(
            (b.rho - expected).abs() < 1e-8,
            "rho = {}, expected ~ {expected}",
            b.rho
        );
        assert!((b.rho - 1.042e-3).abs() < 1e-6);
        // beta = 0: z* = 0, R = 1, simple factor
        let b0 = rho_linch_fully_discrete(0.3, 1e-2, 100, 0.1, 0.0, 1.0).unwrap();
        assert!((b0.rho - rho_discrete_simple(0.3).unwrap()).abs() < 1e-14);
        // huge eps^2/dt: phi -> 0 from the quadratic, simple factor again
        let bh = rho_linch_fully_discrete(0.3, 1e-8, 10, 10.0, 0.2, 0.5).unwrap();
        assert!((bh.rho - rho_discrete_simple(0.3).unwrap()).abs() < 1e-9);
        assert!(rho_linch_fully_discrete(0.3, 1e-2, 10, 0.1, 0.2, 0.75).is_err());
    }

    #[test]
    fn ch_constants_values() {
        // M = 0 keeps only the interface part of L
        let c = ch_constants(0.0, 0.1, 1.0, 0.1, 10, 0.1, 10, None);
        assert_eq!(c.c_star, 0.0);
        let expected_l = 16.0 * 0.01 / (10f64.sqrt() * 0.1f64.powi(4));
        assert!((c.l - expected_l).abs() < 1e-9);
        assert!(c.l_valid);

        // M = 11, eps^2 = 0.05: C* = 5.5 + 121/0.4 = 308
        let c = ch_constants(11.0, 0.05f64.sqrt(), 1.0, 0.01, 100, 0.1, 10, None);
        assert!((c.c_star - 308.0).abs() < 1e-9);

        // L = 1, dt = 0.1, n_t = 10: C1 = (1/1.2)^5
        let c1 = rho_ch_fully_discrete(0.01, 1.0, 0.1, 10).unwrap();
        let c1_direct = (1.0f64 / 1.2).powi(5);
        assert!((c1_direct - 0.4018775720164609).abs() < 1e-12);
        let expected = 0.01 * c1_direct / (1.0 - 0.01 * c1_direct);
        assert!((c1.rho - expected).abs() < 1e-12);
        assert!((c1.rho - 4.035e-3).abs() < 1e-5);
    }

    #[test]
    fn ch_semidiscrete_values() {
        let b = rho_ch_semidiscrete(0.01, 1.0, 0.1).unwrap();
        let q = 0.01 * (-0.1f64).exp();
        assert!((b.rho - q / (1.0 - q)).abs() < 1e-15);
        assert!((b.rho - 9.131e-3).abs() < 1e-6);
        // L -> infinity kills the factor; T = 0 gives the simple one
        assert!(rho_ch_semidiscrete(0.3, 1e6, 1.0).unwrap().rho < 1e-300);
        let b0 = rho_ch_semidiscrete(0.3, 1.0, 0.0).unwrap();
        assert!((b0.rho - 0.3 / 0.7).abs() < 1e-15);
        assert!(rho_ch_semidiscrete(0.3, -1.0, 1.0).is_err());
    }

    #[test]
    fn ch_fully_discrete_limits() {
        // L = 0: C1 = 1, simple factor
        let b = rho_ch_fully_discrete(0.3, 0.0, 0.1, 50).unwrap();
        assert!((b.rho - 0.3 / 0.7).abs() < 1e-15);
        // dt -> infinity: C1 -> 0, rho -> 0
        let b = rho_ch_fully_discrete(0.3, 1.0, 1e9, 10).unwrap();
        assert!(b.rho < 1e-40);
    }

    #[test]
    fn vacuous_bounds_are_flagged_not_thrown() {
        // gamma = |alpha| e^{C* T} exceeds 1 for sizable C* T
        let c = ch_constants(11.0, 0.1, 1.0, 0.01, 100, 0.1, 10, Some(0.4));
        let gamma = c.gamma.unwrap();
        assert!(gamma.vacuous && gamma.rho.is_infinite());
        let lb = rho_linch_continuous(0.45, 4.0, 0.05, 0.5).unwrap();
        assert!(lb.vacuous && lb.rho.is_infinite());
    }

    #[test]
    fn every_factor_is_monotone_in_alpha() {
        let alphas = [1e-4, 1e-3, 1e-2, 0.1, 0.2, 0.3, 0.4];
        let evals: Vec<Box<dyn Fn(f64) -> f64>> = vec![
            Box::new(|a| rho_biharmonic_continuous(a, 1.0, 1.0).unwrap()),
            Box::new(|a| rho_discrete_simple(a).unwrap()),
            Box::new(|a| rho_linch_continuous(a, 1.0, 0.1, 0.2).unwrap().rho),
            Box::new(|a| rho_linch_semidiscrete(a, 1.0, 0.1, 0.2).unwrap().rho),
            Box::new(|a| {
                rho_linch_fully_discrete(a, 1e-3, 100, 0.1, 0.2, 1.0)
                    .unwrap()
                    .rho
            }),
            Box::new(|a| rho_ch_semidiscrete(a, 0.5, 0.5).unwrap().rho),
            Box::new(|a| rho_ch_fully_discrete(a, 0.5, 0.1, 20).unwrap().rho),
        ];
        for (i, f) in evals.iter().enumerate() {
            let mut prev = 0.0;
            for &a in &alphas {
                let v = f(a);
                assert!(v > prev, "factor {i} not increasing at alpha = {a}");
                prev = v;
            }
        }
    }
}
