//! Complex antisymmetric matrices and their canonical decomposition.
//!
//! Antisymmetric matrices on the bounded domain (all eigenvalues of
//! `zeta* zeta` below one) label the coherent states. Every such matrix
//! factors as `zeta = U M U^T` with `U` unitary and `M` a direct sum of
//! 2x2 blocks `lambda * [[0,-1],[1,0]]` padded by zeros; the lambdas are the
//! positive square roots of the nonzero eigenvalues of `zeta* zeta`, each of
//! which comes with even multiplicity.

use num_complex::Complex64;

use crate::linalg::{self, CMatrix, CVector};
use crate::{Error, Result};

/// Relative antisymmetry tolerance (times the Frobenius norm).
pub const TOL_SYM: f64 = 1e-12;
/// Relative reconstruction tolerance (times the Frobenius norm).
pub const TOL_REC: f64 = 1e-12;
/// Singular values below this are treated as zero rank.
pub const RANK_CUTOFF: f64 = 1e-10;
/// Relative part of the rank cutoff. Zero eigenvalues of `zeta* zeta` come
/// back from the eigensolver as noise of order `eps * lambda_1^2`, so the
/// lambda floor must scale with `lambda_1`.
pub const RANK_CUTOFF_REL: f64 = 1e-6;

fn rank_cutoff(lambda_max: f64) -> f64 {
    RANK_CUTOFF.max(RANK_CUTOFF_REL * lambda_max)
}
/// Domain margin: membership requires the top eigenvalue of `zeta* zeta`
/// to stay below `1 - TOL_DOM`.
pub const TOL_DOM: f64 = 1e-12;
/// Default relative tolerance for grouping equal lambdas.
pub const TOL_MULT: f64 = 1e-9;

/// A validated complex antisymmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AntisymMatrix {
    mat: CMatrix,
}

impl AntisymMatrix {
    /// Validates finiteness and antisymmetry (`zeta^T = -zeta` within
    /// `TOL_SYM` relative to the Frobenius norm).
    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::IncompatibleShape {
                what: format!("expected square matrix, got {}x{}", mat.nrows(), mat.ncols()),
            });
        }
        if linalg::has_non_finite(&mat) {
            return Err(Error::NonFinite);
        }
        let norm = linalg::fro_norm(&mat);
        let residual = linalg::max_abs(&(mat.transpose() + &mat));
        if residual > TOL_SYM * norm {
            return Err(Error::NotAntisymmetric { residual });
        }
        Ok(AntisymMatrix { mat })
    }

    /// Projects onto the antisymmetric part, `(m - m^T)/2`. Used for results
    /// of group actions whose antisymmetry holds only up to roundoff.
    pub fn antisymmetrize(mat: CMatrix) -> Result<Self> {
        if linalg::has_non_finite(&mat) {
            return Err(Error::NonFinite);
        }
        let projected = (&mat - mat.transpose()).map(|z| z * 0.5);
        Ok(AntisymMatrix { mat: projected })
    }

    pub fn zeros(n: usize) -> Self {
        AntisymMatrix {
            mat: CMatrix::zeros(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.mat.nrows()
    }

    pub fn mat(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_mat(self) -> CMatrix {
        self.mat
    }

    /// `zeta* zeta`, Hermitian positive semi-definite.
    pub fn gram(&self) -> CMatrix {
        self.mat.adjoint() * &self.mat
    }

    /// Largest eigenvalue of `zeta* zeta`.
    pub fn spectral_norm_sq(&self) -> Result<f64> {
        if self.n() == 0 {
            return Ok(0.0);
        }
        let (vals, _) = linalg::hermitian_eigen_desc(&self.gram())?;
        Ok(vals[0].max(0.0))
    }

    /// Errors with `DomainViolation` unless the top eigenvalue of
    /// `zeta* zeta` is below `1 - TOL_DOM`.
    pub fn require_in_domain(&self) -> Result<f64> {
        let top = self.spectral_norm_sq()?;
        if top < 1.0 - TOL_DOM {
            Ok(top)
        } else {
            Err(Error::DomainViolation {
                spectral_norm_sq: top,
            })
        }
    }
}

/// Outcome of [`validate_domain`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct DomainReport {
    pub is_antisymmetric: bool,
    pub spectral_norm_sq: f64,
    pub in_domain: bool,
}

/// Checks antisymmetry and domain membership of an arbitrary square matrix.
pub fn validate_domain(mat: &CMatrix) -> Result<DomainReport> {
    if linalg::has_non_finite(mat) {
        return Err(Error::NonFinite);
    }
    let norm = linalg::fro_norm(mat);
    let residual = linalg::max_abs(&(mat.transpose() + mat));
    let is_antisymmetric = residual <= TOL_SYM * norm;
    let (vals, _) = linalg::hermitian_eigen_desc(&(mat.adjoint() * mat))?;
    let spectral_norm_sq = vals.first().copied().unwrap_or(0.0).max(0.0);
    Ok(DomainReport {
        is_antisymmetric,
        spectral_norm_sq,
        in_domain: is_antisymmetric && spectral_norm_sq < 1.0 - TOL_DOM,
    })
}

/// The factorization `zeta = U M U^T`.
#[derive(Debug, Clone)]
pub struct CanonicalForm {
    /// Unitary factor; only determined up to the stabilizer of `M`.
    pub u: CMatrix,
    /// Positive singular pairs, sorted descending; length is `half_rank`.
    pub lambdas: Vec<f64>,
    /// Half the rank of `zeta`.
    pub half_rank: usize,
    /// Number of zero columns, `N - 2 * half_rank`.
    pub padding: usize,
    /// Distinct lambdas with multiplicities, `sum(mu_i) = half_rank`.
    pub groups: Vec<(f64, usize)>,
}

impl CanonicalForm {
    /// The block matrix `M = sum_a lambda_a sigma (+) 0`.
    pub fn block_matrix(&self, n: usize) -> CMatrix {
        let mut m = CMatrix::zeros(n, n);
        for (alpha, &lambda) in self.lambdas.iter().enumerate() {
            let i = 2 * alpha;
            m[(i, i + 1)] = Complex64::new(-lambda, 0.0);
            m[(i + 1, i)] = Complex64::new(lambda, 0.0);
        }
        m
    }

    /// `U M U^T`, for residual checks.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.u.nrows();
        &self.u * self.block_matrix(n) * self.u.transpose()
    }
}

/// Canonical decomposition of an antisymmetric matrix.
///
/// Eigendecomposes the Hermitian PSD matrix `zeta* zeta`; inside each
/// eigenspace with eigenvalue `lambda^2 > 0` the columns are paired through
/// the antilinear map `w -> conj(zeta) conj(w) / lambda`, which lands in the
/// same eigenspace and is automatically orthogonal to `w`. The kernel
/// provides the zero padding. Output is deterministic for a fixed input:
/// eigenvector phases are fixed and equal-lambda pairs are ordered by their
/// leading `U` column.
pub fn canonical_decompose(zeta: &AntisymMatrix) -> Result<CanonicalForm> {
    let n = zeta.n();
    let (vals, vecs) = linalg::hermitian_eigen_desc(&zeta.gram())?;
    let zeta_conj = linalg::conj(zeta.mat());
    let cutoff = rank_cutoff(vals.first().copied().unwrap_or(0.0).max(0.0).sqrt());

    // Columns of conj(U), accumulated pair by pair.
    let mut v_cols: Vec<CVector> = Vec::with_capacity(n);
    let mut lambdas: Vec<f64> = Vec::new();

    for i in 0..n {
        let lambda = vals[i].max(0.0).sqrt();
        if lambda <= cutoff {
            continue;
        }
        let mut w = vecs.column(i).clone_owned();
        project_out(&mut w, &v_cols);
        let norm = w.norm();
        if norm < 1e-8 {
            continue; // already spanned by an earlier pair of this eigenvalue
        }
        w /= Complex64::new(norm, 0.0);
        fix_phase(&mut w);
        // Partner inside the same eigenspace.
        let mut partner = &zeta_conj * w.map(|z| z.conj()) / Complex64::new(lambda, 0.0);
        project_out(&mut partner, &v_cols);
        let pnorm = partner.norm();
        if pnorm < 0.5 {
            return Err(Error::ConvergenceFailure);
        }
        partner /= Complex64::new(pnorm, 0.0);
        v_cols.push(w);
        v_cols.push(partner);
        lambdas.push(lambda);
    }

    let half_rank = lambdas.len();

    // Kernel columns complete the unitary.
    for i in 0..n {
        if v_cols.len() == n {
            break;
        }
        let mut w = vecs.column(i).clone_owned();
        project_out(&mut w, &v_cols);
        let norm = w.norm();
        if norm > 1e-8 {
            w /= Complex64::new(norm, 0.0);
            fix_phase(&mut w);
            v_cols.push(w);
        }
    }
    if v_cols.len() != n {
        return Err(Error::ConvergenceFailure);
    }

    // Deterministic order among equal lambdas: sort pairs by leading column.
    let mut order: Vec<usize> = (0..half_rank).collect();
    order.sort_by(|&a, &b| {
        lambdas[b]
            .partial_cmp(&lambdas[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| {
                if (lambdas[a] - lambdas[b]).abs() <= TOL_MULT * lambdas[a].max(f64::MIN_POSITIVE) {
                    column_cmp(&v_cols[2 * a], &v_cols[2 * b])
                } else {
                    std::cmp::Ordering::Equal
                }
            })
    });

    let mut u = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        u.set_column(2 * dst, &v_cols[2 * src].map(|z| z.conj()));
        u.set_column(2 * dst + 1, &v_cols[2 * src + 1].map(|z| z.conj()));
    }
    for pad in 0..(n - 2 * half_rank) {
        u.set_column(
            2 * half_rank + pad,
            &v_cols[2 * half_rank + pad].map(|z| z.conj()),
        );
    }
    let lambdas: Vec<f64> = order.iter().map(|&i| lambdas[i]).collect();
    let groups = group_multiplicities(&lambdas, TOL_MULT);

    Ok(CanonicalForm {
        u,
        half_rank,
        padding: n - 2 * half_rank,
        lambdas,
        groups,
    })
}

/// Merges consecutive lambdas (sorted descending, all positive) whose
/// relative distance is below `tol_mult` into `(group mean, multiplicity)`
/// entries. The multiplicities sum to the number of lambdas.
pub fn group_multiplicities(lambdas: &[f64], tol_mult: f64) -> Vec<(f64, usize)> {
    let mut groups: Vec<(f64, usize)> = Vec::new();
    let mut start = 0;
    while start < lambdas.len() {
        let mut end = start + 1;
        while end < lambdas.len()
            && (lambdas[end - 1] - lambdas[end]).abs()
                <= tol_mult * lambdas[end - 1].max(f64::MIN_POSITIVE)
        {
            end += 1;
        }
        let mean = lambdas[start..end].iter().sum::<f64>() / (end - start) as f64;
        groups.push((mean, end - start));
        start = end;
    }
    groups
}

fn project_out(v: &mut CVector, basis: &[CVector]) {
    // Two Gram-Schmidt passes keep orthogonality near machine precision.
    for _ in 0..2 {
        for b in basis {
            let overlap = b.dotc(v);
            *v -= b.map(|z| z * overlap);
        }
    }
}

/// Rotates the phase so the entry of largest magnitude is real positive.
fn fix_phase(v: &mut CVector) {
    let mut best = 0;
    let mut best_norm = 0.0;
    for (i, z) in v.iter().enumerate() {
        if z.norm() > best_norm + 1e-14 {
            best_norm = z.norm();
            best = i;
        }
    }
    if best_norm > 0.0 {
        let phase = v[best].conj() / Complex64::new(best_norm, 0.0);
        v.apply(|z| *z *= phase);
    }
}

fn column_cmp(a: &CVector, b: &CVector) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.re.partial_cmp(&y.re) {
            Some(std::cmp::Ordering::Equal) | None => {}
            Some(other) => return other,
        }
        match x.im.partial_cmp(&y.im) {
            Some(std::cmp::Ordering::Equal) | None => {}
            Some(other) => return other,
        }
    }
    std::cmp::Ordering::Equal
}

/// `sqrt(1/2) * (sigma (+) 0_{n-2})`: the standard rank-2 representative used
/// in examples and tests.
pub fn sigma_block(n: usize, lambda: f64) -> AntisymMatrix {
    let mut m = CMatrix::zeros(n, n);
    m[(0, 1)] = Complex64::new(-lambda, 0.0);
    m[(1, 0)] = Complex64::new(lambda, 0.0);
    AntisymMatrix::new(m).expect("sigma block is antisymmetric")
}
