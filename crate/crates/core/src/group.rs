//! Matrix realization of SO*(2N) and its Lie algebra.
//!
//! Group elements are stored as the block pair `(A, B)` of
//! `g = [[A, B], [-conj(B), conj(A)]]`; the full 2N x 2N matrix is
//! materialized on demand. Membership is reported as a residual so callers
//! pick their own thresholds.

use num_complex::Complex64;

use crate::antisym::AntisymMatrix;
use crate::linalg::{self, CMatrix};
use crate::{Error, Result};

/// Default group-condition tolerance (relative).
pub const TOL_GRP: f64 = 1e-10;

/// An element of SO*(2N) in `(A, B)` block form.
#[derive(Debug, Clone)]
pub struct BlockGroupElement {
    pub a: CMatrix,
    pub b: CMatrix,
}

/// An element of so*(2N): `X` anti-Hermitian, `Y` antisymmetric.
#[derive(Debug, Clone)]
pub struct AlgebraElement {
    pub x: CMatrix,
    pub y: CMatrix,
}

impl AlgebraElement {
    pub fn new(x: CMatrix, y: CMatrix) -> Result<Self> {
        let n = x.nrows();
        if y.nrows() != n || x.ncols() != n || y.ncols() != n {
            return Err(Error::IncompatibleShape {
                what: "algebra blocks must be square of equal size".into(),
            });
        }
        let scale = linalg::fro_norm(&x) + linalg::fro_norm(&y);
        if linalg::max_abs(&(x.adjoint() + &x)) > TOL_GRP * scale.max(1.0) {
            return Err(Error::IncompatibleShape {
                what: "X block is not anti-Hermitian".into(),
            });
        }
        if linalg::max_abs(&(y.transpose() + &y)) > TOL_GRP * scale.max(1.0) {
            return Err(Error::IncompatibleShape {
                what: "Y block is not antisymmetric".into(),
            });
        }
        Ok(AlgebraElement { x, y })
    }

    /// `[[X, Y], [-conj(Y), conj(X)]]`.
    pub fn to_full(&self) -> CMatrix {
        assemble_blocks(
            &self.x,
            &self.y,
            &self.y.map(|z| -z.conj()),
            &self.x.map(|z| z.conj()),
        )
    }
}

impl BlockGroupElement {
    pub fn new(a: CMatrix, b: CMatrix) -> Self {
        BlockGroupElement { a, b }
    }

    pub fn identity(n: usize) -> Self {
        BlockGroupElement {
            a: linalg::identity(n),
            b: CMatrix::zeros(n, n),
        }
    }

    /// Embeds `U` from the maximal compact subgroup: `A = U`, `B = 0`.
    pub fn from_unitary(u: CMatrix) -> Self {
        let n = u.nrows();
        BlockGroupElement {
            a: u,
            b: CMatrix::zeros(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// The full `[[A, B], [-conj(B), conj(A)]]` matrix.
    pub fn to_full(&self) -> CMatrix {
        assemble_blocks(
            &self.a,
            &self.b,
            &self.b.map(|z| -z.conj()),
            &self.a.map(|z| z.conj()),
        )
    }

    /// Group inverse `(A*, B^T; -B*, A^T)`.
    pub fn inverse(&self) -> Self {
        BlockGroupElement {
            a: self.a.adjoint(),
            b: self.b.transpose(),
        }
    }

    /// Group product; the block form is closed under multiplication.
    pub fn mul(&self, other: &Self) -> Self {
        let a = &self.a * &other.a - &self.b * linalg::conj(&other.b);
        let b = &self.a * &other.b + &self.b * linalg::conj(&other.a);
        BlockGroupElement { a, b }
    }
}

fn assemble_blocks(tl: &CMatrix, tr: &CMatrix, bl: &CMatrix, br: &CMatrix) -> CMatrix {
    let n = tl.nrows();
    let mut full = CMatrix::zeros(2 * n, 2 * n);
    full.view_mut((0, 0), (n, n)).copy_from(tl);
    full.view_mut((0, n), (n, n)).copy_from(tr);
    full.view_mut((n, 0), (n, n)).copy_from(bl);
    full.view_mut((n, n), (n, n)).copy_from(br);
    full
}

/// Max Frobenius residual over the four block conditions together with the
/// SU(N,N) indefinite-form and SO(2N,C) bilinear-form conditions.
pub fn check_group_membership(g: &BlockGroupElement) -> f64 {
    let n = g.n();
    let a = &g.a;
    let b = &g.b;
    let id = linalg::identity(n);
    let a_conj = linalg::conj(a);
    let b_conj = linalg::conj(b);

    let mut worst: f64 = linalg::fro_norm(&(a * a.adjoint() - b * b.adjoint() - &id));
    worst = worst.max(linalg::fro_norm(
        &(a.adjoint() * a - b.transpose() * &b_conj - &id),
    ));
    worst = worst.max(linalg::fro_norm(
        &(a.adjoint() * b + b.transpose() * &a_conj),
    ));
    worst = worst.max(linalg::fro_norm(&(b * a.transpose() + a * b.transpose())));

    let full = g.to_full();
    // g* eta g = eta with eta = diag(1, -1).
    let mut eta = linalg::identity(2 * n);
    for i in n..2 * n {
        eta[(i, i)] = Complex64::new(-1.0, 0.0);
    }
    worst = worst.max(linalg::fro_norm(&(full.adjoint() * &eta * &full - &eta)));
    // g^T J g = J with J the off-diagonal bilinear form.
    let mut j = CMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = linalg::ONE;
        j[(n + i, i)] = linalg::ONE;
    }
    worst = worst.max(linalg::fro_norm(&(full.transpose() * &j * &full - &j)));
    worst
}

/// Which basis family a generator matrix belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    E,
    F,
    Ftilde,
}

/// A so*(2N)_C basis matrix with its labels.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    pub kind: GeneratorKind,
    pub a: usize,
    pub b: usize,
    pub matrix: CMatrix,
}

/// The basis matrices: `E_ab = [[D_ab, 0], [0, -D_ba]]`,
/// `F_ab = [[0, 0], [D_ab - D_ba, 0]]`, `Ftilde_ab` its mirror image.
/// Indices are 1-based as in the commutation relations.
pub fn generator_matrix(
    kind: GeneratorKind,
    a: usize,
    b: usize,
    n: usize,
) -> Result<GeneratorMatrix> {
    if a < 1 || b < 1 || a > n || b > n {
        return Err(Error::IndexOutOfRange { a, b, n });
    }
    let (i, j) = (a - 1, b - 1);
    let mut matrix = CMatrix::zeros(2 * n, 2 * n);
    match kind {
        GeneratorKind::E => {
            matrix[(i, j)] += linalg::ONE;
            matrix[(n + j, n + i)] -= linalg::ONE;
        }
        GeneratorKind::F => {
            matrix[(n + i, j)] += linalg::ONE;
            matrix[(n + j, i)] -= linalg::ONE;
        }
        GeneratorKind::Ftilde => {
            matrix[(i, n + j)] += linalg::ONE;
            matrix[(j, n + i)] -= linalg::ONE;
        }
    }
    Ok(GeneratorMatrix { kind, a, b, matrix })
}

/// Evaluates every commutator of basis matrices against the structure
/// constants and returns the maximum entrywise deviation. The arithmetic is
/// exact in floating point (entries are small integers), so anything other
/// than zero indicates a wrong basis.
pub fn structure_constant_check(n: usize) -> Result<f64> {
    let e = |a, b| generator_matrix(GeneratorKind::E, a, b, n).map(|g| g.matrix);
    let f = |a, b| generator_matrix(GeneratorKind::F, a, b, n).map(|g| g.matrix);
    let ft = |a, b| generator_matrix(GeneratorKind::Ftilde, a, b, n).map(|g| g.matrix);
    let comm = |x: &CMatrix, y: &CMatrix| x * y - y * x;
    let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };

    let mut worst: f64 = 0.0;
    for a in 1..=n {
        for b in 1..=n {
            for c in 1..=n {
                for d in 1..=n {
                    // [E_ab, E_cd] = d_cb E_ad - d_ad E_cb
                    let lhs = comm(&e(a, b)?, &e(c, d)?);
                    let rhs = e(a, d)?.map(|z| z * delta(c, b)) - e(c, b)?.map(|z| z * delta(a, d));
                    worst = worst.max(linalg::max_abs(&(lhs - rhs)));

                    // [E_ab, Ftilde_cd] = d_bc Ftilde_ad - d_bd Ftilde_ac
                    let lhs = comm(&e(a, b)?, &ft(c, d)?);
                    let rhs =
                        ft(a, d)?.map(|z| z * delta(b, c)) - ft(a, c)?.map(|z| z * delta(b, d));
                    worst = worst.max(linalg::max_abs(&(lhs - rhs)));

                    // [E_ab, F_cd] = d_ad F_bc - d_ac F_bd
                    let lhs = comm(&e(a, b)?, &f(c, d)?);
                    let rhs = f(b, c)?.map(|z| z * delta(a, d)) - f(b, d)?.map(|z| z * delta(a, c));
                    worst = worst.max(linalg::max_abs(&(lhs - rhs)));

                    // [F_ab, Ftilde_cd] = d_db E_ca + d_ca E_db - d_cb E_da - d_da E_cb
                    let lhs = comm(&f(a, b)?, &ft(c, d)?);
                    let rhs = e(c, a)?.map(|z| z * delta(d, b))
                        + e(d, b)?.map(|z| z * delta(c, a))
                        - e(d, a)?.map(|z| z * delta(c, b))
                        - e(c, b)?.map(|z| z * delta(d, a));
                    worst = worst.max(linalg::max_abs(&(lhs - rhs)));

                    // [F, F] and [Ftilde, Ftilde] vanish.
                    worst = worst.max(linalg::max_abs(&comm(&f(a, b)?, &f(c, d)?)));
                    worst = worst.max(linalg::max_abs(&comm(&ft(a, b)?, &ft(c, d)?)));
                }
            }
        }
    }
    Ok(worst)
}

/// The distinguished element `g_zeta` with `A = X_zeta`, `B = zeta conj(X)`,
/// `X_zeta = sqrt((1 - zeta zeta*)^{-1})` (positive square root).
pub fn g_of_zeta(zeta: &AntisymMatrix) -> Result<BlockGroupElement> {
    zeta.require_in_domain()?;
    let n = zeta.n();
    let id = linalg::identity(n);
    let zz = zeta.mat() * zeta.mat().adjoint();
    let x = linalg::hermitian_inv_sqrt(&(id - zz))?;
    let b = zeta.mat() * linalg::conj(&x);
    Ok(BlockGroupElement { a: x, b })
}

/// Holomorphic action `g . zeta = (A zeta + B)(C zeta + D)^{-1}` with
/// `C = -conj(B)`, `D = conj(A)`.
pub fn moebius_act(g: &BlockGroupElement, zeta: &AntisymMatrix) -> Result<AntisymMatrix> {
    let num = &g.a * zeta.mat() + &g.b;
    let den = g.b.map(|z| -z.conj()) * zeta.mat() + linalg::conj(&g.a);
    let den_lu = den.transpose().lu();
    if !den_lu.is_invertible() {
        return Err(Error::SingularDenominator);
    }
    // num * den^{-1} via the transposed solve.
    let result = den_lu
        .solve(&num.transpose())
        .ok_or(Error::SingularDenominator)?
        .transpose();
    AntisymMatrix::antisymmetrize(result)
}

/// The UDL factorization `g = exp(Ftilde_upper / 2) exp(E_L) exp(-F_lower / 2)`.
#[derive(Debug, Clone)]
pub struct UdlDecomposition {
    /// `B conj(A)^{-1}`, antisymmetric.
    pub upper: AntisymMatrix,
    /// Principal logarithm of `(A*)^{-1}`.
    pub l_matrix: CMatrix,
    /// `A^{-1} B`, antisymmetric.
    pub lower: AntisymMatrix,
}

impl UdlDecomposition {
    /// Reassembles the three exponential factors as 2N x 2N matrices. The
    /// upper and lower factors are unipotent so their exponentials close in
    /// block-triangular form; the diagonal factor exponentiates `l_matrix`.
    pub fn reassemble(&self) -> CMatrix {
        let n = self.upper.n();
        let id = linalg::identity(n);
        let zero = CMatrix::zeros(n, n);
        let up = assemble_blocks(&id, self.upper.mat(), &zero, &id);
        let exp_l = linalg::mat_exp(&self.l_matrix);
        let exp_l_t_inv = linalg::mat_exp(&self.l_matrix.transpose().map(|z| -z));
        let diag = assemble_blocks(&exp_l, &zero, &zero, &exp_l_t_inv);
        let low = assemble_blocks(&id, &zero, &linalg::conj(self.lower.mat()).map(|z| -z), &id);
        up * diag * low
    }
}

/// Factorizes `g` into raising, diagonal and lowering exponentials (block
/// UDL). Requires `A` invertible.
pub fn udl_decompose(g: &BlockGroupElement) -> Result<UdlDecomposition> {
    let a_conj = linalg::conj(&g.a);
    // upper = B conj(A)^{-1} via solving X conj(A) = B as conj(A)^T X^T = B^T.
    let upper = a_conj
        .transpose()
        .lu()
        .solve(&g.b.transpose())
        .ok_or(Error::SingularA)?
        .transpose();
    let lower = linalg::solve(&g.a, &g.b).map_err(|_| Error::SingularA)?;
    let exp_l = linalg::inverse(&g.a.adjoint()).map_err(|_| Error::SingularA)?;
    let l_matrix = linalg::mat_log_principal(&exp_l)?;
    Ok(UdlDecomposition {
        upper: AntisymMatrix::antisymmetrize(upper)?,
        l_matrix,
        lower: AntisymMatrix::antisymmetrize(lower)?,
    })
}

/// Embedding into Sp(4N,R) acting on the `2N` oscillators: the Bogoliubov
/// block pattern
/// `[[A,0,0,-B],[0,A,B,0],[0,-conj(B),conj(A),0],[conj(B),0,0,conj(A)]]`.
pub fn sp4n_embed(g: &BlockGroupElement) -> CMatrix {
    let n = g.n();
    let mut out = CMatrix::zeros(4 * n, 4 * n);
    let a = &g.a;
    let b = &g.b;
    let a_conj = linalg::conj(a);
    let b_conj = linalg::conj(b);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((0, 3 * n), (n, n)).copy_from(&b.map(|z| -z));
    out.view_mut((n, n), (n, n)).copy_from(a);
    out.view_mut((n, 2 * n), (n, n)).copy_from(b);
    out.view_mut((2 * n, n), (n, n))
        .copy_from(&b_conj.map(|z| -z));
    out.view_mut((2 * n, 2 * n), (n, n)).copy_from(&a_conj);
    out.view_mut((3 * n, 0), (n, n)).copy_from(&b_conj);
    out.view_mut((3 * n, 3 * n), (n, n)).copy_from(&a_conj);
    out
}

/// The `(U, V)` Bogoliubov blocks of a 4N x 4N embedded element.
pub fn bogoliubov_blocks(embedded: &CMatrix) -> (CMatrix, CMatrix) {
    let m = embedded.nrows() / 2;
    (
        embedded.view((0, 0), (m, m)).clone_owned(),
        embedded.view((0, m), (m, m)).clone_owned(),
    )
}

/// Residual of the Bogoliubov canonical conditions
/// `U U^dag - V V^dag = 1`, `U V^T = V U^T` for an embedded element.
pub fn symplectic_residual(embedded: &CMatrix) -> f64 {
    let (u, v) = bogoliubov_blocks(embedded);
    let m = u.nrows();
    let r1 = linalg::fro_norm(&(&u * u.adjoint() - &v * v.adjoint() - linalg::identity(m)));
    let r2 = linalg::fro_norm(&(&u * v.transpose() - &v * u.transpose()));
    r1.max(r2)
}

/// The symmetric squeezing matrix `S = [[0, -zeta], [zeta, 0]]` whose
/// squeezed vacuum is the coherent state; equals `-U^{-1} V` for the
/// Bogoliubov blocks of the embedded `g_zeta^{-1}`.
pub fn squeeze_matrix(zeta: &AntisymMatrix) -> Result<CMatrix> {
    zeta.require_in_domain()?;
    let n = zeta.n();
    let mut s = CMatrix::zeros(2 * n, 2 * n);
    s.view_mut((0, n), (n, n))
        .copy_from(&zeta.mat().map(|z| -z));
    s.view_mut((n, 0), (n, n)).copy_from(zeta.mat());
    Ok(s)
}

/// `|| S + U^{-1} V ||_F` for the Bogoliubov blocks of `phi(g_zeta^{-1})`;
/// the independent route to [`squeeze_matrix`].
pub fn squeeze_residual(zeta: &AntisymMatrix) -> Result<f64> {
    let s = squeeze_matrix(zeta)?;
    let embedded = sp4n_embed(&g_of_zeta(zeta)?.inverse());
    let (u, v) = bogoliubov_blocks(&embedded);
    let u_inv_v = linalg::solve(&u, &v)?;
    Ok(linalg::fro_norm(&(s + u_inv_v)))
}

/// The paper's explicit 4-leg unitary and the matrix `zeta` built from it
/// with both singular pairs at `sqrt(1/2)`. Used by tests and the CLI.
pub fn four_leg_unitary() -> CMatrix {
    let h = 0.5f64.sqrt();
    let c = |re: f64, im: f64| Complex64::new(re, im);
    CMatrix::from_row_slice(
        4,
        4,
        &[
            c(0.5, 0.0),
            c(0.5, 0.0),
            c(-0.5 * h, -0.5 * h),
            c(-0.5 * h, 0.5 * h),
            c(0.5, 0.0),
            c(-0.5, 0.0),
            c(0.5 * h, -0.5 * h),
            c(0.5 * h, 0.5 * h),
            c(0.0, 0.5),
            c(0.5, 0.0),
            c(0.0, 0.0),
            c(h, 0.0),
            c(0.0, -0.5),
            c(0.5, 0.0),
            c(h, 0.0),
            c(0.0, 0.0),
        ],
    )
}

/// `zeta = U (sqrt(1/2) sigma (+) sqrt(1/2) sigma) U^T` for the 4-leg unitary.
pub fn four_leg_zeta() -> AntisymMatrix {
    let u = four_leg_unitary();
    let lambda = 0.5f64.sqrt();
    let mut m = CMatrix::zeros(4, 4);
    for alpha in 0..2 {
        let i = 2 * alpha;
        m[(i, i + 1)] = Complex64::new(-lambda, 0.0);
        m[(i + 1, i)] = Complex64::new(lambda, 0.0);
    }
    AntisymMatrix::new(&u * m * u.transpose()).expect("congruence preserves antisymmetry")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::antisym::sigma_block;
    use crate::linalg::{fro_norm, identity, random_antisymmetric, random_unitary};
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zeta_star() -> AntisymMatrix {
        sigma_block(3, 0.5f64.sqrt())
    }

    #[test]
    fn identity_passes_membership() {
        assert_eq!(check_group_membership(&BlockGroupElement::identity(3)), 0.0);
    }

    #[test]
    fn unitary_embedding_passes_membership() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = BlockGroupElement::from_unitary(random_unitary(&mut rng, 4));
        assert!(check_group_membership(&g) <= 1e-14);
    }

    #[test]
    fn four_leg_unitary_is_unitary() {
        let u = four_leg_unitary();
        assert!(fro_norm(&(u.adjoint() * &u - identity(4))) < 1e-15);
    }

    #[test]
    fn g_of_zeta_star_blocks() {
        let g = g_of_zeta(&zeta_star()).unwrap();
        let s2 = 2f64.sqrt();
        let expected_a = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(s2, 0.0),
            Complex64::new(s2, 0.0),
            Complex64::new(1.0, 0.0),
        ]));
        assert!(fro_norm(&(&g.a - &expected_a)) < 1e-12);
        let expected_b = zeta_star().mat() * &expected_a;
        assert!(fro_norm(&(&g.b - expected_b)) < 1e-12);
        assert!(check_group_membership(&g) <= 1e-12);
    }

    #[test]
    fn g_of_zeta_diamond_membership() {
        let g = g_of_zeta(&four_leg_zeta()).unwrap();
        assert!(check_group_membership(&g) <= 1e-12);
    }

    #[test]
    fn g_of_zeta_rejects_boundary() {
        let too_big = sigma_block(3, 1.0);
        assert!(matches!(
            g_of_zeta(&too_big),
            Err(Error::DomainViolation { .. })
        ));
    }

    #[test]
    fn generator_examples() {
        let e11 = generator_matrix(GeneratorKind::E, 1, 1, 2).unwrap().matrix;
        let expected = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, 0.0),
        ]));
        assert_eq!(e11, expected);

        let faa = generator_matrix(GeneratorKind::F, 2, 2, 3).unwrap().matrix;
        assert_eq!(linalg::max_abs(&faa), 0.0);

        let ft12 = generator_matrix(GeneratorKind::Ftilde, 1, 2, 2)
            .unwrap()
            .matrix;
        let mut expected = CMatrix::zeros(4, 4);
        expected[(0, 3)] = Complex64::new(1.0, 0.0);
        expected[(1, 2)] = Complex64::new(-1.0, 0.0);
        assert_eq!(ft12, expected);

        assert!(generator_matrix(GeneratorKind::E, 0, 1, 2).is_err());
        assert!(generator_matrix(GeneratorKind::E, 1, 3, 2).is_err());
    }

    #[test]
    fn structure_constants_exact() {
        for n in [2, 3, 5] {
            assert_eq!(structure_constant_check(n).unwrap(), 0.0, "n = {n}");
        }
    }

    #[test]
    fn moebius_examples() {
        let zeta = zeta_star();
        let id = BlockGroupElement::identity(3);
        let same = moebius_act(&id, &zeta).unwrap();
        assert!(fro_norm(&(same.mat() - zeta.mat())) < 1e-14);

        let g = g_of_zeta(&zeta).unwrap();
        let from_zero = moebius_act(&g, &AntisymMatrix::zeros(3)).unwrap();
        assert!(fro_norm(&(from_zero.mat() - zeta.mat())) < 1e-12);

        // Unitary action is congruence by U.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let u = random_unitary(&mut rng, 3);
        let k = BlockGroupElement::from_unitary(u.clone());
        let rotated = moebius_act(&k, &zeta).unwrap();
        let expected = &u * zeta.mat() * u.transpose();
        assert!(fro_norm(&(rotated.mat() - expected)) < 1e-12);
    }

    #[test]
    fn udl_identity_and_g_zeta() {
        let id = BlockGroupElement::identity(3);
        let udl = udl_decompose(&id).unwrap();
        assert!(fro_norm(udl.upper.mat()) < 1e-14);
        assert!(fro_norm(&udl.l_matrix) < 1e-14);
        assert!(fro_norm(udl.lower.mat()) < 1e-14);

        let zeta = zeta_star();
        let udl = udl_decompose(&g_of_zeta(&zeta).unwrap()).unwrap();
        assert!(fro_norm(&(udl.upper.mat() - zeta.mat())) < 1e-12);
    }

    #[test]
    fn udl_round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let zeta = AntisymMatrix::new(random_antisymmetric(&mut rng, 3, 0.6)).unwrap();
            let k = BlockGroupElement::from_unitary(random_unitary(&mut rng, 3));
            let g = g_of_zeta(&zeta).unwrap().mul(&k);
            let udl = udl_decompose(&g).unwrap();
            let residual = fro_norm(&(udl.reassemble() - g.to_full()));
            assert!(residual <= 1e-10, "UDL reassembly residual {residual:e}");
        }
    }

    #[test]
    fn sp4n_embedding() {
        let id = BlockGroupElement::identity(2);
        assert_eq!(sp4n_embed(&id), identity(8));

        let g = g_of_zeta(&zeta_star()).unwrap();
        assert!(symplectic_residual(&sp4n_embed(&g)) <= 1e-12);

        // Homomorphism on a random pair.
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let z1 = AntisymMatrix::new(random_antisymmetric(&mut rng, 3, 0.4)).unwrap();
        let z2 = AntisymMatrix::new(random_antisymmetric(&mut rng, 3, 0.7)).unwrap();
        let g1 = g_of_zeta(&z1).unwrap();
        let g2 = g_of_zeta(&z2).unwrap();
        let lhs = sp4n_embed(&g1) * sp4n_embed(&g2);
        let rhs = sp4n_embed(&g1.mul(&g2));
        assert!(fro_norm(&(lhs - rhs)) <= 1e-10);
    }

    #[test]
    fn squeeze_examples() {
        let zero = AntisymMatrix::zeros(2);
        assert_eq!(linalg::max_abs(&squeeze_matrix(&zero).unwrap()), 0.0);

        let s = squeeze_matrix(&zeta_star()).unwrap();
        let l = 0.5f64.sqrt();
        assert_abs_diff_eq!(s[(0, 4)].re, l, epsilon = 1e-15); // -zeta_12
        assert_abs_diff_eq!(s[(3, 1)].re, -l, epsilon = 1e-15); // zeta_12
        assert!(fro_norm(&(s.transpose() - &s)) < 1e-15);

        assert!(squeeze_residual(&zeta_star()).unwrap() <= 1e-12);
        assert!(squeeze_residual(&four_leg_zeta()).unwrap() <= 1e-12);
    }

    #[test]
    fn group_closure_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        for _ in 0..20 {
            let z1 = AntisymMatrix::new(random_antisymmetric(&mut rng, 4, 0.5)).unwrap();
            let z2 = AntisymMatrix::new(random_antisymmetric(&mut rng, 4, 0.8)).unwrap();
            let g1 = g_of_zeta(&z1).unwrap();
            let g2 = g_of_zeta(&z2).unwrap();
            let r1 = check_group_membership(&g1);
            let r2 = check_group_membership(&g2);
            let product = g1.mul(&g2);
            assert!(check_group_membership(&product) <= 10.0 * (r1 + r2).max(1e-13));
            let unit = product.mul(&product.inverse());
            assert!(fro_norm(&(unit.to_full() - identity(8))) < 1e-10);
        }
    }

    #[test]
    fn action_is_compatible_with_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..20 {
            let zeta = AntisymMatrix::new(random_antisymmetric(&mut rng, 3, 0.5)).unwrap();
            let g1 =
                g_of_zeta(&AntisymMatrix::new(random_antisymmetric(&mut rng, 3, 0.6)).unwrap())
                    .unwrap();
            let g2 =
                g_of_zeta(&AntisymMatrix::new(random_antisymmetric(&mut rng, 3, 0.3)).unwrap())
                    .unwrap();
            let step = moebius_act(&g2, &zeta).unwrap();
            let two_steps = moebius_act(&g1, &step).unwrap();
            let direct = moebius_act(&g1.mul(&g2), &zeta).unwrap();
            assert!(fro_norm(&(two_steps.mat() - direct.mat())) <= 1e-10);
        }
    }

    #[test]
    fn transitivity_witness() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let zeta = AntisymMatrix::new(random_antisymmetric(&mut rng, 4, 0.45)).unwrap();
            let omega = AntisymMatrix::new(random_antisymmetric(&mut rng, 4, 0.75)).unwrap();
            let mover = g_of_zeta(&omega)
                .unwrap()
                .mul(&g_of_zeta(&zeta).unwrap().inverse());
            let moved = moebius_act(&mover, &zeta).unwrap();
            assert!(fro_norm(&(moved.mat() - omega.mat())) <= 1e-9);
        }
    }
}
