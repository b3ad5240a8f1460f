//! Dense complex linear algebra helpers shared by all modules.
//!
//! Everything here operates on `nalgebra::DMatrix<Complex64>`. The matrices
//! involved are small (N is the number of intertwiner legs, rarely above 8),
//! so clarity wins over blocking tricks. The few nontrivial routines are the
//! Hermitian eigendecomposition wrapper with a descending eigenvalue order,
//! principal matrix logarithms via inverse scaling-and-squaring, and
//! determinants accumulated in log space.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = nalgebra::DVector<Complex64>;

pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Conjugate (not transposed) copy.
pub fn conj(m: &CMatrix) -> CMatrix {
    m.map(|z| z.conj())
}

/// Frobenius norm.
pub fn fro_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn has_non_finite(m: &CMatrix) -> bool {
    m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.
/// Returns `(values, vectors)` with the k-th column of `vectors` the unit
/// eigenvector for `values[k]`.
pub fn hermitian_eigen_desc(h: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = h.nrows();
    if n == 0 {
        return Ok((Vec::new(), CMatrix::zeros(0, 0)));
    }
    let eig = h
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 10_000)
        .ok_or(Error::ConvergenceFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Apply `f` to the eigenvalues of a Hermitian matrix: `V f(D) V*`.
pub fn hermitian_function(h: &CMatrix, f: impl Fn(f64) -> f64) -> Result<CMatrix> {
    let (vals, vecs) = hermitian_eigen_desc(h)?;
    let d = CMatrix::from_diagonal(&CVector::from_iterator(
        vals.len(),
        vals.iter().map(|&v| Complex64::new(f(v), 0.0)),
    ));
    Ok(&vecs * d * vecs.adjoint())
}

/// Unique positive semi-definite square root of a Hermitian PSD matrix.
/// Small negative eigenvalues from roundoff are clamped to zero.
pub fn hermitian_sqrt(h: &CMatrix) -> Result<CMatrix> {
    hermitian_function(h, |v| v.max(0.0).sqrt())
}

/// Inverse square root of a Hermitian positive definite matrix.
pub fn hermitian_inv_sqrt(h: &CMatrix) -> Result<CMatrix> {
    hermitian_function(h, |v| 1.0 / v.max(f64::MIN_POSITIVE).sqrt())
}

/// Solve `A X = B` by LU with partial pivoting.
pub fn solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    a.clone().lu().solve(b).ok_or(Error::SingularMatrix)
}

pub fn inverse(a: &CMatrix) -> Result<CMatrix> {
    a.clone().try_inverse().ok_or(Error::SingularMatrix)
}

/// log(det A) for a general complex matrix, accumulated factor by factor in
/// log space so that determinants of large well-conditioned matrices neither
/// overflow nor underflow. Returns `(log |det|, arg det)`.
pub fn log_det(a: &CMatrix) -> Result<(f64, f64)> {
    let n = a.nrows();
    let lu = a.clone().lu();
    let mut log_abs = 0.0;
    let mut arg = 0.0;
    for i in 0..n {
        let d = lu.u()[(i, i)];
        if d == ZERO {
            return Err(Error::SingularMatrix);
        }
        log_abs += d.norm().ln();
        arg += d.arg();
    }
    // Permutation parity contributes a sign.
    if lu.p().len() % 2 == 1 {
        arg += std::f64::consts::PI;
    }
    Ok((log_abs, arg))
}

/// det(A) through [`log_det`]; phase tracked separately from magnitude.
pub fn det(a: &CMatrix) -> Result<Complex64> {
    let (log_abs, arg) = log_det(a)?;
    Ok(Complex64::from_polar(log_abs.exp(), arg))
}

/// Matrix exponential by scaling and squaring with a Taylor tail.
pub fn mat_exp(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let norm = fro_norm(a);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.map(|z| z / pow2(squarings));
    let mut term = identity(n);
    let mut sum = identity(n);
    for k in 1..=24 {
        term = &term * &scaled / Complex64::new(k as f64, 0.0);
        sum += &term;
        if fro_norm(&term) < 1e-18 * fro_norm(&sum) {
            break;
        }
    }
    let mut out = sum;
    for _ in 0..squarings {
        out = &out * &out;
    }
    out
}

fn pow2(s: u32) -> f64 {
    (2.0f64).powi(s as i32)
}

/// Principal matrix logarithm by inverse scaling-and-squaring: repeated
/// principal square roots (Denman–Beavers) until the matrix is close to the
/// identity, then a Taylor series for log(1 + X). Defined for invertible
/// matrices with no eigenvalue on the closed negative real axis; for the
/// group elements handled here that is the principal branch convention.
pub fn mat_log_principal(a: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut scale = 0u32;
    // Square-root until ||M - 1|| is small enough for the series.
    while fro_norm(&(&m - identity(n))) > 0.25 {
        m = principal_sqrt(&m)?;
        scale += 1;
        if scale > 60 {
            return Err(Error::ConvergenceFailure);
        }
    }
    let x = &m - identity(n);
    let mut term = x.clone();
    let mut sum = x.clone();
    for k in 2..=40 {
        term = &term * &x;
        let coeff = if k % 2 == 0 { -1.0 } else { 1.0 } / k as f64;
        sum += term.map(|z| z * coeff);
        if fro_norm(&term) / (k as f64) < 1e-18 {
            break;
        }
    }
    Ok(sum.map(|z| z * pow2(scale)))
}

/// Principal square root via the Denman–Beavers iteration.
fn principal_sqrt(a: &CMatrix) -> Result<CMatrix> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = identity(n);
    for _ in 0..60 {
        let y_inv = inverse(&y)?;
        let z_inv = inverse(&z)?;
        let y_next = (&y + z_inv).map(|v| v * 0.5);
        let z_next = (&z + y_inv).map(|v| v * 0.5);
        let delta = fro_norm(&(&y_next - &y));
        y = y_next;
        z = z_next;
        if delta < 1e-15 * (1.0 + fro_norm(&y)) {
            return Ok(y);
        }
    }
    Err(Error::ConvergenceFailure)
}

/// Unitary polar factor of an invertible matrix: `A (A* A)^{-1/2}`.
pub fn polar_unitary(a: &CMatrix) -> Result<CMatrix> {
    let p_inv_sqrt = hermitian_inv_sqrt(&(a.adjoint() * a))?;
    Ok(a * p_inv_sqrt)
}

/// Random matrix with i.i.d. standard complex Gaussian entries.
pub fn random_ginibre<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(standard_normal(rng), standard_normal(rng))
    })
}

/// Haar-distributed unitary via QR of a Ginibre matrix with the standard
/// phase fix on the R diagonal.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let g = random_ginibre(rng, n);
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut u = q.clone();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..n {
            u[(i, j)] *= phase;
        }
    }
    u
}

/// Random antisymmetric complex matrix rescaled so that the largest
/// eigenvalue of `zeta* zeta` equals `lambda1_sq`.
pub fn random_antisymmetric<R: Rng + ?Sized>(rng: &mut R, n: usize, lambda1_sq: f64) -> CMatrix {
    let g = random_ginibre(rng, n);
    let mut zeta = (&g - g.transpose()).map(|z| z * 0.5);
    let h = zeta.adjoint() * &zeta;
    let top = hermitian_eigen_desc(&h)
        .map(|(v, _)| v.first().copied().unwrap_or(0.0))
        .unwrap_or(0.0);
    if top > 0.0 {
        let s = (lambda1_sq / top).sqrt();
        zeta.apply(|z| *z *= Complex64::new(s, 0.0));
    }
    zeta
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller; rand_distr would also do, but this is the only draw needed.
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            let v: f64 = rng.random();
            return (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hermitian_eigen_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_ginibre(&mut rng, 5);
        let h = g.adjoint() * &g;
        let (vals, vecs) = hermitian_eigen_desc(&h).unwrap();
        assert!(vals.windows(2).all(|w| w[0] >= w[1] - 1e-12));
        let d = CMatrix::from_diagonal(&CVector::from_iterator(
            5,
            vals.iter().map(|&v| Complex64::new(v, 0.0)),
        ));
        let recon = &vecs * d * vecs.adjoint();
        assert!(fro_norm(&(recon - h)) < 1e-10);
    }

    #[test]
    fn sqrt_of_psd_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = random_ginibre(&mut rng, 4);
        let h = g.adjoint() * &g;
        let s = hermitian_sqrt(&h).unwrap();
        assert!(fro_norm(&(&s * &s - &h)) < 1e-10 * (1.0 + fro_norm(&h)));
    }

    #[test]
    fn log_exp_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_ginibre(&mut rng, 4).map(|z| z * 0.4);
        let a = mat_exp(&x);
        let l = mat_log_principal(&a).unwrap();
        assert!(fro_norm(&(mat_exp(&l) - a)) < 1e-11);
    }

    #[test]
    fn det_matches_log_det() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_ginibre(&mut rng, 4);
        let d = det(&a).unwrap();
        let reference = a.determinant();
        assert_abs_diff_eq!(d.re, reference.re, epsilon = 1e-9 * reference.norm().max(1.0));
        assert_abs_diff_eq!(d.im, reference.im, epsilon = 1e-9 * reference.norm().max(1.0));
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_unitary(&mut rng, 6);
        assert!(fro_norm(&(u.adjoint() * &u - identity(6))) < 1e-12);
    }

    #[test]
    fn random_antisymmetric_hits_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let z = random_antisymmetric(&mut rng, 5, 0.3);
        assert!(fro_norm(&(z.transpose() + &z)) < 1e-14);
        let (vals, _) = hermitian_eigen_desc(&(z.adjoint() * &z)).unwrap();
        assert_abs_diff_eq!(vals[0], 0.3, epsilon = 1e-12);
    }
}
