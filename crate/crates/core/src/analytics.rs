//! Closed forms for SO*(2N) coherent states: normalization, overlaps,
//! generator matrix elements, area statistics and the rank-2 total-area
//! distribution.
//!
//! Everything is a rational expression in `sigma = (1 - zeta* zeta)^{-1}`
//! and resolvents `(1 - omega* zeta)^{-1}`; determinants are accumulated in
//! log space with the phase tracked separately.

use num_complex::Complex64;

use crate::antisym::{canonical_decompose, AntisymMatrix};
use crate::linalg::{self, CMatrix};
use crate::{Error, Result};

/// A domain-checked label with the cached resolvent `sigma`.
#[derive(Debug, Clone)]
pub struct CoherentLabel {
    zeta: AntisymMatrix,
    sigma: CMatrix,
    /// Condition estimate of `1 - zeta* zeta`, reported only near the domain
    /// boundary (top eigenvalue above 0.99) where the inversion is stiff.
    pub condition: Option<f64>,
}

impl CoherentLabel {
    pub fn new(zeta: AntisymMatrix) -> Result<Self> {
        zeta.require_in_domain()?;
        let n = zeta.n();
        let gram = zeta.gram();
        let (vals, _) = linalg::hermitian_eigen_desc(&gram)?;
        let top = vals.first().copied().unwrap_or(0.0).max(0.0);
        // sigma from a linear solve, not an explicit inverse.
        let sigma = linalg::solve(&(linalg::identity(n) - &gram), &linalg::identity(n))?;
        let condition = if top > 0.99 {
            let bottom = vals.last().copied().unwrap_or(0.0).max(0.0);
            Some((1.0 - bottom) / (1.0 - top))
        } else {
            None
        };
        Ok(CoherentLabel {
            zeta,
            sigma,
            condition,
        })
    }

    pub fn zeta(&self) -> &AntisymMatrix {
        &self.zeta
    }

    /// `(1 - zeta* zeta)^{-1}`, Hermitian with all eigenvalues >= 1.
    pub fn sigma(&self) -> &CMatrix {
        &self.sigma
    }
}

/// `ln det(1 - zeta* zeta)`; the matrix is Hermitian positive definite on
/// the domain so the determinant is a positive real.
fn ln_det_one_minus_gram(zeta: &AntisymMatrix) -> Result<f64> {
    let n = zeta.n();
    let m = linalg::identity(n) - zeta.gram();
    let (vals, _) = linalg::hermitian_eigen_desc(&m)?;
    let mut ln = 0.0;
    for v in vals {
        if v <= 0.0 {
            return Err(Error::DomainViolation {
                spectral_norm_sq: 1.0 - v,
            });
        }
        ln += v.ln();
    }
    Ok(ln)
}

/// `N(zeta) = det(1 - zeta* zeta)^{1/2}`, in (0, 1].
pub fn normalization(zeta: &AntisymMatrix) -> Result<f64> {
    zeta.require_in_domain()?;
    Ok((0.5 * ln_det_one_minus_gram(zeta)?).exp())
}

/// `<omega|zeta> = N(zeta) N(omega) / det(1 - omega* zeta)`.
pub fn overlap(omega: &AntisymMatrix, zeta: &AntisymMatrix) -> Result<Complex64> {
    omega.require_in_domain()?;
    zeta.require_in_domain()?;
    let n = zeta.n();
    let denom = linalg::identity(n) - omega.mat().adjoint() * zeta.mat();
    let (ln_abs, arg) = linalg::log_det(&denom)?;
    let ln_num = 0.5 * (ln_det_one_minus_gram(zeta)? + ln_det_one_minus_gram(omega)?);
    Ok(Complex64::from_polar((ln_num - ln_abs).exp(), -arg))
}

/// Matrix elements `<omega| E_ab, F_ab, Ftilde_ab |zeta>` in one sweep.
#[derive(Debug, Clone)]
pub struct MatrixElements {
    pub e: CMatrix,
    pub f: CMatrix,
    pub ftilde: CMatrix,
}

/// `E = <w|z>[1 + 2 w*z (1-w*z)^{-1}]`, `F = <w|z>[2 z (1-w*z)^{-1}]`,
/// `Ftilde = <w|z>[2 (1-w*z)^{-1} conj(w)]`.
pub fn matrix_elements(omega: &AntisymMatrix, zeta: &AntisymMatrix) -> Result<MatrixElements> {
    let braket = overlap(omega, zeta)?;
    let n = zeta.n();
    let id = linalg::identity(n);
    let wz = omega.mat().adjoint() * zeta.mat();
    let resolvent = linalg::solve(&(&id - &wz), &id).map_err(|_| Error::SingularDenominator)?;
    let e = (&id + (&wz * &resolvent).map(|z| z * 2.0)).map(|z| z * braket);
    let f = (zeta.mat() * &resolvent).map(|z| z * 2.0 * braket);
    let ftilde = (&resolvent * linalg::conj(omega.mat())).map(|z| z * 2.0 * braket);
    Ok(MatrixElements { e, f, ftilde })
}

/// Area statistics of a coherent state.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AreaReport {
    pub per_leg_mean: Vec<f64>,
    pub total_mean: f64,
    pub per_leg_var: Vec<f64>,
    pub total_var: f64,
    pub covariance: Vec<Vec<f64>>,
    pub cv: f64,
    pub cv_upper_bound: f64,
}

/// Expectations, variances and covariances of the area operators:
/// `<A_a> = [zeta* zeta sigma]_aa`, `<A> = tr(sigma - 1)`,
/// `Var(A_a) = <A_a>(<A_a>+1)/2`,
/// `Cov(A_a,A_b) = (sigma_ab sigma_ba + (sigma zeta*)_ab (zeta sigma)_ba
///                  - delta_ab sigma_ab)/2`, `Var(A) = tr(sigma(sigma-1))`.
pub fn area_report(label: &CoherentLabel) -> AreaReport {
    let n = label.zeta.n();
    let sigma = label.sigma();
    let zeta = label.zeta.mat();

    // zeta* zeta sigma = sigma - 1.
    let per_leg_mean: Vec<f64> = (0..n).map(|a| (sigma[(a, a)].re - 1.0).max(0.0)).collect();
    let total_mean: f64 = per_leg_mean.iter().sum();

    let sigma_zs = sigma * zeta.adjoint();
    let z_sigma = zeta * sigma;
    let mut covariance = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in 0..n {
            let mut c = 0.5 * (sigma[(a, b)] * sigma[(b, a)]).re
                + 0.5 * (sigma_zs[(a, b)] * z_sigma[(b, a)]).re;
            if a == b {
                c -= 0.5 * sigma[(a, b)].re;
            }
            covariance[a][b] = c;
        }
    }
    let per_leg_var: Vec<f64> = (0..n).map(|a| covariance[a][a]).collect();
    let total_var: f64 = covariance.iter().flatten().sum();

    let tr_sigma: f64 = (0..n).map(|a| sigma[(a, a)].re).sum();
    let cv = if total_mean > 0.0 {
        total_var.max(0.0).sqrt() / total_mean
    } else {
        f64::INFINITY
    };
    let cv_upper_bound = if tr_sigma > n as f64 {
        (tr_sigma / (tr_sigma - n as f64)).sqrt()
    } else {
        f64::INFINITY
    };

    AreaReport {
        per_leg_mean,
        total_mean,
        per_leg_var,
        total_var,
        covariance,
        cv,
        cv_upper_bound,
    }
}

/// Requires `rank(zeta) = 2`; returns `lambda^2 = tr(zeta* zeta)/2`.
fn require_rank_two(zeta: &AntisymMatrix) -> Result<f64> {
    let form = canonical_decompose(zeta)?;
    if form.half_rank != 1 {
        return Err(Error::RankNotTwo {
            rank: 2 * form.half_rank,
        });
    }
    Ok(form.lambdas[0] * form.lambdas[0])
}

/// Total-area distribution for a rank-2 label:
/// `P(J) = det(1 - zeta* zeta) (tr(zeta* zeta)/2)^J (J + 1)` for `J <= j_max`.
pub fn area_distribution(zeta: &AntisymMatrix, j_max: u32) -> Result<Vec<(u32, f64)>> {
    zeta.require_in_domain()?;
    let lambda_sq = require_rank_two(zeta)?;
    let det = ln_det_one_minus_gram(zeta)?.exp();
    let mut out = Vec::with_capacity(j_max as usize + 1);
    let mut power = 1.0;
    for j in 0..=j_max {
        out.push((j, det * power * (j + 1) as f64));
        power *= lambda_sq;
    }
    Ok(out)
}

/// `<J,zeta|J,zeta> = J! (J+1)! (tr(zeta* zeta)/2)^J` for rank-2 labels,
/// solving the recurrence `<J|J> = J(J+1) (tr/2) <J-1|J-1>`.
pub fn fixed_area_norm(zeta: &AntisymMatrix, j: u32) -> Result<f64> {
    let lambda_sq = require_rank_two(zeta)?;
    let mut ln = 0.0;
    for k in 1..=j as u64 {
        ln += (k as f64).ln() + ((k + 1) as f64).ln() + lambda_sq.ln();
    }
    Ok(ln.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::antisym::sigma_block;
    use crate::group::{four_leg_zeta, g_of_zeta, moebius_act};
    use crate::linalg::{fro_norm, random_antisymmetric};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zeta_star() -> AntisymMatrix {
        sigma_block(3, 0.5f64.sqrt())
    }

    #[test]
    fn normalization_examples() {
        assert_abs_diff_eq!(
            normalization(&AntisymMatrix::zeros(3)).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(normalization(&zeta_star()).unwrap(), 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(
            normalization(&four_leg_zeta()).unwrap(),
            0.25,
            epsilon = 1e-13
        );
    }

    #[test]
    fn overlap_examples() {
        let z = zeta_star();
        let self_overlap = overlap(&z, &z).unwrap();
        assert_abs_diff_eq!(self_overlap.re, 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(self_overlap.im, 0.0, epsilon = 1e-13);

        let from_vacuum = overlap(&AntisymMatrix::zeros(3), &z).unwrap();
        assert_abs_diff_eq!(from_vacuum.re, 0.5, epsilon = 1e-13);

        let minus = AntisymMatrix::new(z.mat().map(|v| -v)).unwrap();
        let cross = overlap(&z, &minus).unwrap();
        assert_abs_diff_eq!(cross.re, 1.0 / 9.0, epsilon = 1e-13);
        assert_abs_diff_eq!(cross.im, 0.0, epsilon = 1e-13);
    }

    #[test]
    fn overlap_is_bounded_by_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let a = AntisymMatrix::new(random_antisymmetric(&mut rng, 4, 0.8)).unwrap();
            let b = AntisymMatrix::new(random_antisymmetric(&mut rng, 4, 0.6)).unwrap();
            assert!(overlap(&a, &b).unwrap().norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn matrix_element_examples() {
        let zero = AntisymMatrix::zeros(3);
        let at_vacuum = matrix_elements(&zero, &zero).unwrap();
        assert!(fro_norm(&(&at_vacuum.e - linalg::identity(3))) < 1e-14);
        assert_eq!(linalg::max_abs(&at_vacuum.f), 0.0);
        assert_eq!(linalg::max_abs(&at_vacuum.ftilde), 0.0);

        let z = zeta_star();
        let at_star = matrix_elements(&z, &z).unwrap();
        assert_abs_diff_eq!(at_star.e[(0, 0)].re, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(at_star.f[(0, 1)].re, -2.0 * 2f64.sqrt(), epsilon = 1e-12);

        // F and Ftilde antisymmetric; diagonal E reproduces the total area.
        assert!(fro_norm(&(at_star.f.transpose() + &at_star.f)) < 1e-12);
        assert!(fro_norm(&(at_star.ftilde.transpose() + &at_star.ftilde)) < 1e-12);
        let total: f64 = (0..3).map(|a| (at_star.e[(a, a)].re - 1.0) / 2.0).sum();
        assert_abs_diff_eq!(total, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn adjoint_relation_between_f_and_ftilde() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let w = AntisymMatrix::new(random_antisymmetric(&mut rng, 4, 0.5)).unwrap();
        let z = AntisymMatrix::new(random_antisymmetric(&mut rng, 4, 0.7)).unwrap();
        let forward = matrix_elements(&w, &z).unwrap();
        let backward = matrix_elements(&z, &w).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let lhs = forward.ftilde[(a, b)];
                let rhs = backward.f[(a, b)].conj();
                assert_abs_diff_eq!(lhs.re, rhs.re, epsilon = 1e-12);
                assert_abs_diff_eq!(lhs.im, rhs.im, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn area_report_examples() {
        let vac = area_report(&CoherentLabel::new(AntisymMatrix::zeros(3)).unwrap());
        assert_eq!(vac.total_mean, 0.0);
        assert!(vac.cv.is_infinite());

        let report = area_report(&CoherentLabel::new(zeta_star()).unwrap());
        assert_abs_diff_eq!(report.per_leg_mean[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.per_leg_mean[1], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.per_leg_mean[2], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.total_mean, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.per_leg_var[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.total_var, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.cv, 1.0, epsilon = 1e-12);
        assert!(report.cv <= report.cv_upper_bound);
    }

    #[test]
    fn cv_limit_for_rank_two() {
        // c^2 -> 1: cv -> 1/sqrt(2) for a scaled sigma block.
        let c = 0.999f64.sqrt();
        let report = area_report(&CoherentLabel::new(sigma_block(3, c)).unwrap());
        assert_abs_diff_eq!(report.cv, 1.0 / (2f64.sqrt() * c), epsilon = 1e-9);
        assert!((report.cv - 1.0 / 2f64.sqrt()).abs() < 5e-4);
    }

    #[test]
    fn cv_diverges_at_small_area() {
        let mut last = 0.0;
        for &eps in &[1e-2, 1e-3, 1e-4] {
            let report = area_report(&CoherentLabel::new(sigma_block(3, eps)).unwrap());
            assert!(report.cv > last);
            last = report.cv;
        }
        assert!(last > 1e3);
    }

    #[test]
    fn covariance_matrix_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for n in 2..=6 {
            let zeta = AntisymMatrix::new(random_antisymmetric(&mut rng, n, 0.8)).unwrap();
            let report = area_report(&CoherentLabel::new(zeta).unwrap());
            let cov = nalgebra::DMatrix::<f64>::from_fn(n, n, |i, j| report.covariance[i][j]);
            assert!((&cov - cov.transpose()).abs().max() < 1e-12);
            let sym = nalgebra::SymmetricEigen::new(cov);
            assert!(sym.eigenvalues.iter().all(|&v| v > -1e-10));
        }
    }

    #[test]
    fn distribution_examples() {
        let d = area_distribution(&zeta_star(), 2).unwrap();
        assert_abs_diff_eq!(d[0].1, 0.25, epsilon = 1e-13);
        assert_abs_diff_eq!(d[1].1, 0.25, epsilon = 1e-13);
        assert_abs_diff_eq!(d[2].1, 3.0 / 16.0, epsilon = 1e-13);

        let partial: f64 = area_distribution(&zeta_star(), 200)
            .unwrap()
            .iter()
            .map(|(_, p)| p)
            .sum();
        assert_abs_diff_eq!(partial, 1.0, epsilon = 1e-10);

        assert!(matches!(
            area_distribution(&four_leg_zeta(), 5),
            Err(Error::RankNotTwo { rank: 4 })
        ));
    }

    #[test]
    fn fixed_area_norm_examples() {
        let z = zeta_star();
        assert_abs_diff_eq!(fixed_area_norm(&z, 0).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(fixed_area_norm(&z, 1).unwrap(), 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(fixed_area_norm(&z, 2).unwrap(), 3.0, epsilon = 1e-12);
        // Recurrence <J|J> = J(J+1) (tr/2) <J-1|J-1>.
        for j in 1..=10u32 {
            let expected = fixed_area_norm(&z, j - 1).unwrap() * (j * (j + 1)) as f64 * 0.5;
            assert_abs_diff_eq!(
                fixed_area_norm(&z, j).unwrap(),
                expected,
                epsilon = 1e-9 * expected
            );
        }
    }

    #[test]
    fn group_action_preserves_transition_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for _ in 0..10 {
            let zeta = AntisymMatrix::new(random_antisymmetric(&mut rng, 3, 0.5)).unwrap();
            let omega = AntisymMatrix::new(random_antisymmetric(&mut rng, 3, 0.4)).unwrap();
            let g =
                g_of_zeta(&AntisymMatrix::new(random_antisymmetric(&mut rng, 3, 0.6)).unwrap())
                    .unwrap();
            let before = overlap(&omega, &zeta).unwrap().norm();
            let after = overlap(
                &moebius_act(&g, &omega).unwrap(),
                &moebius_act(&g, &zeta).unwrap(),
            )
            .unwrap()
            .norm();
            assert_abs_diff_eq!(before, after, epsilon = 1e-9);
        }
    }

    #[test]
    fn domain_violation_surfaces() {
        let outside = sigma_block(3, 1.05);
        assert!(matches!(
            normalization(&outside),
            Err(Error::DomainViolation { .. })
        ));
    }
}
