//! The U(N) layer: intertwiners at fixed total area. Dimension counting,
//! the rank-2 coherent states `|J, xi>`, their overlaps, expectations,
//! covariances, spinor extraction and the GL(N,C) action on the highest
//! weight vector.
//!
//! Unlike the bounded-domain labels, the `xi` here only needs rank 2; the
//! states are projective in `xi` (proportional labels give the same state up
//! to a phase).

use num_complex::Complex64;

use crate::antisym::{canonical_decompose, AntisymMatrix};
use crate::linalg::{self, CMatrix};
use crate::semiclassical::Spinor;
use crate::{Error, Result};

/// Label of a fixed-area coherent state.
#[derive(Debug, Clone)]
pub struct UNLabel {
    pub j: u32,
    pub xi: AntisymMatrix,
}

impl UNLabel {
    pub fn new(j: u32, xi: AntisymMatrix) -> Result<Self> {
        require_rank_two(&xi)?;
        Ok(UNLabel { j, xi })
    }
}

fn require_rank_two(xi: &AntisymMatrix) -> Result<crate::antisym::CanonicalForm> {
    let form = canonical_decompose(xi)?;
    if form.half_rank != 1 {
        return Err(Error::RankNotTwo {
            rank: 2 * form.half_rank,
        });
    }
    Ok(form)
}

/// Half trace of `xi* xi`; errors on the zero matrix.
fn half_trace(xi: &AntisymMatrix) -> Result<f64> {
    let h: f64 = xi.mat().iter().map(|z| z.norm_sqr()).sum::<f64>() * 0.5;
    if h <= 0.0 {
        return Err(Error::ZeroMatrix);
    }
    Ok(h)
}

/// Number of N-legged intertwiners with total area J:
/// `(N+J-1)! (N+J-2)! / (J! (J+1)! (N-1)! (N-2)!)`, exact.
pub fn dim_fixed_area(n: u32, j: u32) -> Result<u64> {
    if n < 2 {
        return Err(Error::IncompatibleShape {
            what: format!("dimension formula needs n >= 2, got {n}"),
        });
    }
    // dim = C(J+N-1, J) * C(J+N-2, J) / (J+1)
    let c1 = binomial_u128((j + n - 1) as u64, j as u64)?;
    let c2 = binomial_u128((j + n - 2) as u64, j as u64)?;
    let prod = c1.checked_mul(c2).ok_or(Error::Overflow {
        what: "fixed-area dimension",
    })?;
    debug_assert_eq!(prod % (j as u128 + 1), 0);
    let dim = prod / (j as u128 + 1);
    u64::try_from(dim).map_err(|_| Error::Overflow {
        what: "fixed-area dimension",
    })
}

fn binomial_u128(n: u64, k: u64) -> Result<u128> {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 1..=k {
        acc = acc
            .checked_mul((n - k + i) as u128)
            .ok_or(Error::Overflow { what: "binomial" })?;
        acc /= i as u128; // exact: C(n-k+i, i) divides the running product
    }
    Ok(acc)
}

/// `ln(J! (J+1)!)`.
fn ln_double_factorial_pair(j: u32) -> f64 {
    let mut ln = 0.0;
    for k in 2..=(j as u64 + 1) {
        ln += (k as f64).ln();
        if k <= j as u64 {
            ln += (k as f64).ln();
        }
    }
    ln
}

/// `N_J(xi) = (tr(xi* xi)/2)^{-J/2} / sqrt(J!(J+1)!)`.
pub fn un_normalization(xi: &AntisymMatrix, j: u32) -> Result<f64> {
    require_rank_two(xi)?;
    let h = half_trace(xi)?;
    let ln = -(j as f64) * 0.5 * h.ln() - 0.5 * ln_double_factorial_pair(j);
    Ok(ln.exp())
}

/// Normalized overlap
/// `<J,eta|J,xi> = [tr(eta* xi)/2]^J (tr(eta* eta)/2)^{-J/2} (tr(xi* xi)/2)^{-J/2}`.
pub fn un_overlap(eta: &AntisymMatrix, xi: &AntisymMatrix, j: u32) -> Result<Complex64> {
    require_rank_two(eta)?;
    require_rank_two(xi)?;
    let cross: Complex64 = (eta.mat().adjoint() * xi.mat()).diagonal().sum() * 0.5;
    let he = half_trace(eta)?;
    let hx = half_trace(xi)?;
    if cross.norm() == 0.0 {
        return Ok(Complex64::new(if j == 0 { 1.0 } else { 0.0 }, 0.0));
    }
    let ln_mag = (j as f64) * (cross.norm().ln() - 0.5 * (he.ln() + hx.ln()));
    Ok(Complex64::from_polar(ln_mag.exp(), j as f64 * cross.arg()))
}

/// `<E_ab> = delta_ab + 2J (xi* xi)_ab / tr(xi* xi)`; trace `N + 2J`.
pub fn un_expectation_e(xi: &AntisymMatrix, j: u32) -> Result<CMatrix> {
    require_rank_two(xi)?;
    let h = half_trace(xi)?;
    let gram = xi.gram();
    let n = xi.n();
    Ok(linalg::identity(n) + gram.map(|z| z * (j as f64) / h))
}

/// The 2N spinors `|z_a> = sqrt(J) (U_a1, U_a2)` from `xi = lambda U (sigma (+) 0) U^T`.
pub fn un_spinors(xi: &AntisymMatrix, j: u32) -> Result<Vec<Spinor>> {
    let form = require_rank_two(xi)?;
    let s = Complex64::new((j as f64).sqrt(), 0.0);
    Ok((0..xi.n())
        .map(|a| Spinor {
            x: form.u[(a, 0)] * s,
            y: form.u[(a, 1)] * s,
        })
        .collect())
}

/// Area covariance matrix and per-leg variances in spinor form:
/// `Cov(A_a, A_b) = delta_ab <z_a|z_a>/4 + |[z_a|z_b>|^2/(4J)
///                  - <z_a|z_a><z_b|z_b>/(4J)`.
pub fn un_covariance(xi: &AntisymMatrix, j: u32) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let n = xi.n();
    if j == 0 {
        require_rank_two(xi)?;
        return Ok((vec![vec![0.0; n]; n], vec![0.0; n]));
    }
    let spinors = un_spinors(xi, j)?;
    let jf = j as f64;
    let mut cov = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in 0..n {
            let mut c = spinors[a].bracket(&spinors[b]).norm_sqr() / (4.0 * jf)
                - spinors[a].norm_sq() * spinors[b].norm_sq() / (4.0 * jf);
            if a == b {
                c += 0.25 * spinors[a].norm_sq();
            }
            cov[a][b] = c;
        }
    }
    let var = (0..n).map(|a| cov[a][a]).collect();
    Ok((cov, var))
}

/// GL(N,C) action on the highest weight: returns `(det g, g xi g^T)`; the
/// transformed state is `det(g) (Ftilde_{g xi g^T}/2)^J |0> / sqrt(J!(J+1)!)`.
pub fn gl_action(g: &CMatrix, xi: &AntisymMatrix) -> Result<(Complex64, AntisymMatrix)> {
    let det = linalg::det(g)?;
    if det.norm() < 1e-300 {
        return Err(Error::SingularMatrix);
    }
    let moved = AntisymMatrix::antisymmetrize(g * xi.mat() * g.transpose())?;
    Ok((det, moved))
}

/// `xi_0 = sigma (+) 0_{n-2}`, the highest-weight representative.
pub fn xi_zero(n: usize) -> AntisymMatrix {
    crate::antisym::sigma_block(n, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{fro_norm, random_antisymmetric, random_unitary};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_rank_two(rng: &mut ChaCha8Rng, n: usize) -> AntisymMatrix {
        // Congruence of xi_0 by a random invertible matrix keeps rank 2.
        let g = linalg::random_ginibre(rng, n);
        AntisymMatrix::antisymmetrize(&g * xi_zero(n).mat() * g.transpose()).unwrap()
    }

    #[test]
    fn dimension_examples() {
        assert_eq!(dim_fixed_area(4, 1).unwrap(), 6);
        assert_eq!(dim_fixed_area(3, 0).unwrap(), 1);
        for j in 0..30 {
            assert_eq!(dim_fixed_area(2, j).unwrap(), 1);
        }
        // Closed form for N = 3: dimension is (2J+1)(J+2)... check a value
        // against the explicit formula product.
        assert_eq!(dim_fixed_area(3, 2).unwrap(), 6);
        assert_eq!(dim_fixed_area(4, 4).unwrap(), 105);
    }

    #[test]
    fn dimension_overflow_reported() {
        assert!(matches!(
            dim_fixed_area(64, 200),
            Err(Error::Overflow { .. })
        ));
    }

    #[test]
    fn normalization_examples() {
        let x0 = xi_zero(3);
        assert_abs_diff_eq!(un_normalization(&x0, 0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            un_normalization(&x0, 1).unwrap(),
            1.0 / 2f64.sqrt(),
            epsilon = 1e-14
        );
        let doubled = AntisymMatrix::new(x0.mat().map(|z| z * 2.0)).unwrap();
        assert_abs_diff_eq!(
            un_normalization(&doubled, 1).unwrap(),
            0.5 / 2f64.sqrt(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn overlap_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let xi = random_rank_two(&mut rng, 4);
        for j in [0, 1, 3] {
            let same = un_overlap(&xi, &xi, j).unwrap();
            assert_abs_diff_eq!(same.re, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(same.im, 0.0, epsilon = 1e-12);
        }

        // Orthogonal supports: tr(eta* xi) = 0 kills the overlap for J >= 1.
        let mut eta = CMatrix::zeros(4, 4);
        eta[(2, 3)] = Complex64::new(-1.0, 0.0);
        eta[(3, 2)] = Complex64::new(1.0, 0.0);
        let eta = AntisymMatrix::new(eta).unwrap();
        let disjoint = un_overlap(&eta, &xi_zero(4), 2).unwrap();
        assert_eq!(disjoint.norm(), 0.0);
    }

    #[test]
    fn projective_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let xi = random_rank_two(&mut rng, 4);
        for &lambda in &[
            Complex64::new(2.0, 0.0),
            Complex64::new(0.0, 0.5),
            Complex64::new(-1.3, 0.7),
        ] {
            let scaled = AntisymMatrix::new(xi.mat().map(|z| z * lambda)).unwrap();
            let overlap = un_overlap(&scaled, &xi, 3).unwrap();
            assert_abs_diff_eq!(overlap.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn expectation_examples() {
        let x0 = xi_zero(3);
        let at_zero = un_expectation_e(&x0, 0).unwrap();
        assert!(fro_norm(&(&at_zero - linalg::identity(3))) < 1e-14);

        let at_five = un_expectation_e(&x0, 5).unwrap();
        assert_abs_diff_eq!(at_five[(0, 0)].re, 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(at_five[(1, 1)].re, 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(at_five[(2, 2)].re, 1.0, epsilon = 1e-12);

        // Trace identity N + 2J for random labels.
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for n in 3..=5 {
            let xi = random_rank_two(&mut rng, n);
            for j in [1u32, 4, 9] {
                let e = un_expectation_e(&xi, j).unwrap();
                let trace: f64 = (0..n).map(|a| e[(a, a)].re).sum();
                assert_abs_diff_eq!(trace, n as f64 + 2.0 * j as f64, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn spinors_satisfy_closure_and_total_norm() {
        let x0 = xi_zero(3);
        let spinors = un_spinors(&x0, 1).unwrap();
        // Closure and total norm 2J; individual entries are frame-dependent.
        let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
        let mut total = 0.0;
        for z in &spinors {
            m[0][0] += z.x * z.x.conj();
            m[0][1] += z.x * z.y.conj();
            m[1][0] += z.y * z.x.conj();
            m[1][1] += z.y * z.y.conj();
            total += z.norm_sq();
        }
        assert_abs_diff_eq!(total, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m[0][0].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m[1][1].re, 1.0, epsilon = 1e-12);
        assert!(m[0][1].norm() < 1e-12);

        // Normals of the spinors sum to zero and areas sum to J.
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let xi = random_rank_two(&mut rng, 5);
        let j = 7;
        let spinors = un_spinors(&xi, j).unwrap();
        let mut sum = [0.0; 3];
        let mut area = 0.0;
        for z in &spinors {
            let v = z.normal();
            for i in 0..3 {
                sum[i] += v[i];
            }
            area += 0.5 * z.norm_sq();
        }
        assert!(sum.iter().all(|c| c.abs() < 1e-10));
        assert_abs_diff_eq!(area, j as f64, epsilon = 1e-10);
    }

    #[test]
    fn covariance_examples() {
        // J = 0: all zeros.
        let (cov, var) = un_covariance(&xi_zero(3), 0).unwrap();
        assert!(cov.iter().flatten().all(|&c| c == 0.0));
        assert!(var.iter().all(|&v| v == 0.0));

        // xi_0 in N = 3: legs 1 and 2 each carry exactly J/2, so their
        // variance vanishes.
        let (_, var) = un_covariance(&xi_zero(3), 6).unwrap();
        assert_abs_diff_eq!(var[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(var[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(var[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn per_leg_cv_scales_as_inverse_sqrt_j() {
        // log-log slope of the first-leg cv across J in {4, ..., 256}.
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let xi = random_rank_two(&mut rng, 4);
        let mut points = Vec::new();
        let mut j = 4u32;
        while j <= 256 {
            let (_, var) = un_covariance(&xi, j).unwrap();
            let spinors = un_spinors(&xi, j).unwrap();
            let mean = 0.5 * spinors[0].norm_sq();
            points.push(((j as f64).ln(), (var[0].max(1e-300).sqrt() / mean).ln()));
            j *= 2;
        }
        let m = points.len() as f64;
        let sx: f64 = points.iter().map(|p| p.0).sum();
        let sy: f64 = points.iter().map(|p| p.1).sum();
        let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
        let slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
        assert!((slope + 0.5).abs() < 0.05, "slope {slope}");
    }

    #[test]
    fn gl_action_examples() {
        let x0 = xi_zero(3);
        let id = linalg::identity(3);
        let (det, moved) = gl_action(&id, &x0).unwrap();
        assert_abs_diff_eq!(det.re, 1.0, epsilon = 1e-14);
        assert!(fro_norm(&(moved.mat() - x0.mat())) < 1e-14);

        // Scalar: det = c^N, label scales as c^2.
        let c = Complex64::new(1.5, 0.5);
        let scalar = id.map(|z| z * c);
        let (det, moved) = gl_action(&scalar, &x0).unwrap();
        assert!((det - c.powu(3)).norm() < 1e-12);
        assert!(fro_norm(&(moved.mat() - x0.mat().map(|z| z * c * c))) < 1e-12);

        // Unitary: moved label keeps rank 2.
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let u = random_unitary(&mut rng, 3);
        let (_, moved) = gl_action(&u, &x0).unwrap();
        assert_eq!(canonical_decompose(&moved).unwrap().half_rank, 1);

        let singular = CMatrix::zeros(3, 3);
        assert!(gl_action(&singular, &x0).is_err());
    }

    #[test]
    fn rank_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let rank4 = AntisymMatrix::new(random_antisymmetric(&mut rng, 4, 0.5)).unwrap();
        assert!(matches!(
            un_normalization(&rank4, 2),
            Err(Error::RankNotTwo { rank: 4 })
        ));
        assert!(matches!(
            un_normalization(&AntisymMatrix::zeros(3), 1),
            Err(Error::RankNotTwo { rank: 0 })
        ));
    }
}
