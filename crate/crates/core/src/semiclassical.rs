//! Semiclassical limit machinery: spinor families extracted from a coherent
//! label, face normals and closure, classical quadratic observables with
//! their exact Poisson brackets, the coarse-graining no-go defect, and
//! sampling of the canonical-form stabilizer.
//!
//! A rank-2k label yields k families of N spinors. Each family closes on its
//! own; the coarse-grained observables summed over families never do for
//! k >= 2 (the defect equals `-sum_{a != b} Lambda_a Lambda_b`).

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::antisym::{canonical_decompose, AntisymMatrix};
use crate::linalg::{self, CMatrix};
use crate::{Error, Result};

/// A two-component spinor `|z> = (x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spinor {
    pub x: Complex64,
    pub y: Complex64,
}

impl Spinor {
    pub fn zero() -> Self {
        Spinor {
            x: Complex64::new(0.0, 0.0),
            y: Complex64::new(0.0, 0.0),
        }
    }

    /// The dual spinor `|z] = (conj(y), -conj(x))`; `<z|z] = 0` exactly.
    pub fn dual(&self) -> Spinor {
        Spinor {
            x: self.y.conj(),
            y: -self.x.conj(),
        }
    }

    /// `<self|other> = conj(x) x' + conj(y) y'`.
    pub fn inner(&self, other: &Spinor) -> Complex64 {
        self.x.conj() * other.x + self.y.conj() * other.y
    }

    /// `[self|other> = y x' - x y'` (bra of the dual spinor).
    pub fn bracket(&self, other: &Spinor) -> Complex64 {
        self.y * other.x - self.x * other.y
    }

    pub fn norm_sq(&self) -> f64 {
        self.x.norm_sqr() + self.y.norm_sqr()
    }

    /// Face normal `V = <z|sigma_vec|z>/2`.
    pub fn normal(&self) -> [f64; 3] {
        let p = self.x.conj() * self.y;
        [p.re, p.im, 0.5 * (self.x.norm_sqr() - self.y.norm_sqr())]
    }

    fn scaled(&self, s: Complex64) -> Spinor {
        Spinor {
            x: self.x * s,
            y: self.y * s,
        }
    }
}

/// `k` families of `N` spinors with their singular values.
#[derive(Debug, Clone)]
pub struct SpinorFamily {
    /// `families[alpha][a]` is `|z^alpha_a>`.
    pub families: Vec<Vec<Spinor>>,
    /// Singular values of the source label, one per family.
    pub lambdas: Vec<f64>,
    /// The unitary and per-family radial scales the spinors came from, kept
    /// so stabilizer transformations can recompute them; absent for boosted
    /// families, which no longer come from a unitary.
    source: Option<FamilySource>,
}

#[derive(Debug, Clone)]
struct FamilySource {
    u: CMatrix,
    scales: Vec<f64>,
}

impl SpinorFamily {
    /// Builds families directly from a unitary: family `alpha` of spinors is
    /// `scale_alpha * (U_{a,2a-1}, U_{a,2a})`.
    pub fn from_unitary(u: CMatrix, lambdas: Vec<f64>, scales: Vec<f64>) -> Result<Self> {
        let n = u.nrows();
        let k = lambdas.len();
        if scales.len() != k || 2 * k > n {
            return Err(Error::IncompatibleShape {
                what: format!("{k} families need {} columns, unitary has {n}", 2 * k),
            });
        }
        let families = (0..k)
            .map(|alpha| {
                let s = Complex64::new(scales[alpha], 0.0);
                (0..n)
                    .map(|a| {
                        Spinor {
                            x: u[(a, 2 * alpha)],
                            y: u[(a, 2 * alpha + 1)],
                        }
                        .scaled(s)
                    })
                    .collect()
            })
            .collect();
        Ok(SpinorFamily {
            families,
            lambdas,
            source: Some(FamilySource { u, scales }),
        })
    }

    pub fn k(&self) -> usize {
        self.families.len()
    }

    pub fn n(&self) -> usize {
        self.families.first().map_or(0, Vec::len)
    }

    /// Half the total spinor norm of family `alpha`: its total face area.
    pub fn total_area(&self, alpha: usize) -> f64 {
        0.5 * self.families[alpha]
            .iter()
            .map(Spinor::norm_sq)
            .sum::<f64>()
    }
}

/// Spinor families of an in-domain label, scaled per the semiclassical
/// expansion: `|z^alpha_a> = sqrt(2 lambda^2/(1-lambda^2)) (U_{a,2a-1}, U_{a,2a})`.
pub fn extract_spinor_families(zeta: &AntisymMatrix) -> Result<SpinorFamily> {
    zeta.require_in_domain()?;
    let form = canonical_decompose(zeta)?;
    if form.half_rank == 0 {
        return Err(Error::ZeroRank);
    }
    let scales: Vec<f64> = form
        .lambdas
        .iter()
        .map(|&l| (2.0 * l * l / (1.0 - l * l)).sqrt())
        .collect();
    SpinorFamily::from_unitary(form.u, form.lambdas, scales)
}

/// Frobenius norm of
/// `sum_a |z^alpha_a><z^beta_a| - delta_{alpha beta} Lambda_alpha 1`.
pub fn closure_residual(family: &SpinorFamily, alpha: usize, beta: usize) -> f64 {
    let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
    for a in 0..family.n() {
        let za = &family.families[alpha][a];
        let zb = &family.families[beta][a];
        // |z_a^alpha><z_b^beta| entries: row by (x, y), column conjugated.
        m[0][0] += za.x * zb.x.conj();
        m[0][1] += za.x * zb.y.conj();
        m[1][0] += za.y * zb.x.conj();
        m[1][1] += za.y * zb.y.conj();
    }
    if alpha == beta {
        let lam = family.total_area(alpha);
        m[0][0] -= Complex64::new(lam, 0.0);
        m[1][1] -= Complex64::new(lam, 0.0);
    }
    m.iter()
        .flatten()
        .map(|z| z.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Face normals of family `alpha`; they sum to zero by closure.
pub fn face_normals(family: &SpinorFamily, alpha: usize) -> Vec<[f64; 3]> {
    family.families[alpha].iter().map(Spinor::normal).collect()
}

/// Per-family and coarse-grained quadratic observables.
#[derive(Debug, Clone)]
pub struct ClassicalObservables {
    /// `e^alpha_ab = <z^alpha_a|z^alpha_b>`, Hermitian.
    pub e_per_family: Vec<CMatrix>,
    /// `f^alpha_ab = [z^alpha_a|z^alpha_b>`, antisymmetric.
    pub f_per_family: Vec<CMatrix>,
    /// `conj(f^alpha_ab)`.
    pub ftilde_per_family: Vec<CMatrix>,
    pub e_coarse: CMatrix,
    pub f_coarse: CMatrix,
    pub ftilde_coarse: CMatrix,
}

pub fn classical_observables(family: &SpinorFamily) -> ClassicalObservables {
    let n = family.n();
    let k = family.k();
    let mut e_per = Vec::with_capacity(k);
    let mut f_per = Vec::with_capacity(k);
    let mut ft_per = Vec::with_capacity(k);
    for alpha in 0..k {
        let zs = &family.families[alpha];
        let e = CMatrix::from_fn(n, n, |a, b| zs[a].inner(&zs[b]));
        let f = CMatrix::from_fn(n, n, |a, b| zs[a].bracket(&zs[b]));
        let ft = linalg::conj(&f);
        e_per.push(e);
        f_per.push(f);
        ft_per.push(ft);
    }
    let sum = |mats: &[CMatrix]| {
        mats.iter()
            .fold(CMatrix::zeros(n, n), |acc, m| acc + m)
    };
    ClassicalObservables {
        e_coarse: sum(&e_per),
        f_coarse: sum(&f_per),
        ftilde_coarse: sum(&ft_per),
        e_per_family: e_per,
        f_per_family: f_per,
        ftilde_per_family: ft_per,
    }
}

/// `sum_ab (e_ab e_ba / 2 - e_aa e_bb / 4)` for the coarse-grained `e`;
/// zero exactly when the coarse normals close, and equal to
/// `-sum_{alpha != beta} Lambda_alpha Lambda_beta` for closed families.
pub fn coarse_closure_defect(family: &SpinorFamily) -> f64 {
    let obs = classical_observables(family);
    let n = family.n();
    let e = &obs.e_coarse;
    let mut defect = 0.0;
    for a in 0..n {
        for b in 0..n {
            defect += 0.5 * (e[(a, b)] * e[(b, a)]).re - 0.25 * e[(a, a)].re * e[(b, b)].re;
        }
    }
    defect
}

/// The stabilizer of the canonical block matrix.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SymmetryDescriptor {
    pub n: usize,
    pub half_rank: usize,
    /// `(Lambda_i, mu_i)`: one compact symplectic factor Sp(2 mu_i) per
    /// distinct singular value.
    pub groups: Vec<(f64, usize)>,
    /// Dimension of the residual unitary factor `U(N - 2k)`.
    pub residual_unitary_dim: usize,
}

pub fn symmetry_group_of(zeta: &AntisymMatrix) -> Result<SymmetryDescriptor> {
    zeta.require_in_domain()?;
    let form = canonical_decompose(zeta)?;
    Ok(SymmetryDescriptor {
        n: zeta.n(),
        half_rank: form.half_rank,
        groups: form.groups.clone(),
        residual_unitary_dim: form.padding,
    })
}

/// Draws a block-diagonal stabilizer element: one compact symplectic block
/// `Sp(2 mu_i) = Sp(2 mu_i, C) ∩ U(2 mu_i)` per group plus a Haar block from
/// `U(N - 2k)`. Satisfies `W M W^T = M` for the canonical block matrix.
///
/// The symplectic blocks are produced by averaging a Haar unitary with its
/// image under the antilinear involution `W -> Omega conj(W) Omega^{-1}` and
/// re-unitarizing with a polar decomposition.
pub fn sample_symmetry(descriptor: &SymmetryDescriptor, seed: u64) -> Result<CMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = descriptor.n;
    let mut w = CMatrix::zeros(n, n);
    let mut offset = 0;
    for &(_, mu) in &descriptor.groups {
        let block = sample_compact_symplectic(&mut rng, mu)?;
        w.view_mut((offset, offset), (2 * mu, 2 * mu)).copy_from(&block);
        offset += 2 * mu;
    }
    let residual = descriptor.residual_unitary_dim;
    if residual > 0 {
        let block = linalg::random_unitary(&mut rng, residual);
        w.view_mut((offset, offset), (residual, residual))
            .copy_from(&block);
    }
    Ok(w)
}

fn sample_compact_symplectic(rng: &mut ChaCha8Rng, mu: usize) -> Result<CMatrix> {
    let dim = 2 * mu;
    let omega = symplectic_form(mu);
    for _ in 0..20 {
        let u = linalg::random_unitary(rng, dim);
        // theta(U) = Omega conj(U) Omega^{-1}; fixed points are Sp(dim).
        let theta = &omega * linalg::conj(&u) * omega.transpose();
        let averaged = (&u + theta).map(|z| z * 0.5);
        if let Ok(w) = linalg::polar_unitary(&averaged) {
            let sympl = linalg::fro_norm(&(&w * &omega * w.transpose() - &omega));
            let unit = linalg::fro_norm(&(w.adjoint() * &w - linalg::identity(dim)));
            if sympl < 1e-11 && unit < 1e-11 {
                return Ok(w);
            }
        }
    }
    Err(Error::ConvergenceFailure)
}

/// `Omega = sigma (+) ... (+) sigma` (mu copies).
fn symplectic_form(mu: usize) -> CMatrix {
    let mut omega = CMatrix::zeros(2 * mu, 2 * mu);
    for i in 0..mu {
        omega[(2 * i, 2 * i + 1)] = Complex64::new(-1.0, 0.0);
        omega[(2 * i + 1, 2 * i)] = Complex64::new(1.0, 0.0);
    }
    omega
}

/// Residual of `W M W^T = M` for the canonical block matrix assembled from
/// the descriptor's groups.
pub fn stabilizer_residual(descriptor: &SymmetryDescriptor, w: &CMatrix) -> f64 {
    let n = descriptor.n;
    let mut m = CMatrix::zeros(n, n);
    let mut alpha = 0;
    for &(lambda, mu) in &descriptor.groups {
        for _ in 0..mu {
            m[(2 * alpha, 2 * alpha + 1)] = Complex64::new(-lambda, 0.0);
            m[(2 * alpha + 1, 2 * alpha)] = Complex64::new(lambda, 0.0);
            alpha += 1;
        }
    }
    linalg::fro_norm(&(w * &m * w.transpose() - &m))
}

/// Recomputes the spinors from `U W`. Coarse observables are unchanged for
/// stabilizer `W`; per-family observables change once a multiplicity exceeds
/// one.
pub fn apply_symmetry(family: &SpinorFamily, w: &CMatrix) -> Result<SpinorFamily> {
    let source = family.source.as_ref().ok_or(Error::IncompatibleShape {
        what: "family does not carry a source unitary (boosted families cannot be re-framed)"
            .into(),
    })?;
    let n = family.n();
    if w.nrows() != n || w.ncols() != n {
        return Err(Error::IncompatibleShape {
            what: format!("W must be {n}x{n}, got {}x{}", w.nrows(), w.ncols()),
        });
    }
    SpinorFamily::from_unitary(&source.u * w, family.lambdas.clone(), source.scales.clone())
}

/// Applies an overall SL(2,C) transformation `|z> -> X^T |z>` to every
/// spinor. Areas change, closure within a family is generally lost, and the
/// coarse defect stays negative for k >= 2.
pub fn sl2c_boost(family: &SpinorFamily, x: &nalgebra::Matrix2<Complex64>) -> Result<SpinorFamily> {
    let det = x[(0, 0)] * x[(1, 1)] - x[(0, 1)] * x[(1, 0)];
    let deviation = (det - Complex64::new(1.0, 0.0)).norm();
    if deviation > 1e-10 {
        return Err(Error::NonUnitDeterminant { deviation });
    }
    let families = family
        .families
        .iter()
        .map(|zs| {
            zs.iter()
                .map(|z| Spinor {
                    x: x[(0, 0)] * z.x + x[(1, 0)] * z.y,
                    y: x[(0, 1)] * z.x + x[(1, 1)] * z.y,
                })
                .collect()
        })
        .collect();
    Ok(SpinorFamily {
        families,
        lambdas: family.lambdas.clone(),
        source: None,
    })
}

// ---------------------------------------------------------------------------
// Exact Poisson brackets of quadratic spinor observables.
// ---------------------------------------------------------------------------

/// Phase-space variable: a component of `|z^family_leg>` or its conjugate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Var {
    pub family: usize,
    pub leg: usize,
    pub component: Component,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Component {
    X,
    Y,
    XBar,
    YBar,
}

/// A quadratic form `sum c (v1 v2)` in the spinor variables. The canonical
/// Poisson structure is `{x, conj(x)} = {y, conj(y)} = -i` per mode.
#[derive(Debug, Clone)]
pub struct QuadraticObservable {
    terms: Vec<(Complex64, Var, Var)>,
}

impl QuadraticObservable {
    /// Builds from raw terms; every monomial must have exactly two factors.
    pub fn try_from_terms(raw: Vec<(Complex64, Vec<Var>)>) -> Result<Self> {
        let mut terms = Vec::with_capacity(raw.len());
        for (c, vars) in raw {
            match <[Var; 2]>::try_from(vars) {
                Ok([v1, v2]) => terms.push((c, v1, v2)),
                Err(_) => return Err(Error::UnsupportedObservable),
            }
        }
        Ok(QuadraticObservable { terms }.normalized())
    }

    /// `e_ab = conj(x_a) x_b + conj(y_a) y_b`.
    pub fn e(family: usize, a: usize, b: usize) -> Self {
        let v = |leg, component| Var {
            family,
            leg,
            component,
        };
        QuadraticObservable {
            terms: vec![
                (Complex64::new(1.0, 0.0), v(a, Component::XBar), v(b, Component::X)),
                (Complex64::new(1.0, 0.0), v(a, Component::YBar), v(b, Component::Y)),
            ],
        }
        .normalized()
    }

    /// `f_ab = y_a x_b - x_a y_b`.
    pub fn f(family: usize, a: usize, b: usize) -> Self {
        let v = |leg, component| Var {
            family,
            leg,
            component,
        };
        QuadraticObservable {
            terms: vec![
                (Complex64::new(1.0, 0.0), v(a, Component::Y), v(b, Component::X)),
                (Complex64::new(-1.0, 0.0), v(a, Component::X), v(b, Component::Y)),
            ],
        }
        .normalized()
    }

    /// `ftilde_ab = conj(f_ab)`.
    pub fn ftilde(family: usize, a: usize, b: usize) -> Self {
        let v = |leg, component| Var {
            family,
            leg,
            component,
        };
        QuadraticObservable {
            terms: vec![
                (Complex64::new(1.0, 0.0), v(a, Component::YBar), v(b, Component::XBar)),
                (Complex64::new(-1.0, 0.0), v(a, Component::XBar), v(b, Component::YBar)),
            ],
        }
        .normalized()
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        QuadraticObservable {
            terms: self.terms.iter().map(|&(c, a, b)| (c * s, a, b)).collect(),
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        QuadraticObservable { terms }.normalized()
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.terms.iter().all(|(c, _, _)| c.norm() <= tol)
    }

    /// Max coefficient difference against another observable.
    pub fn difference(&self, other: &Self) -> f64 {
        self.plus(&other.scaled(Complex64::new(-1.0, 0.0)))
            .terms
            .iter()
            .map(|(c, _, _)| c.norm())
            .fold(0.0, f64::max)
    }

    /// Evaluates on concrete spinor data.
    pub fn evaluate(&self, family: &SpinorFamily) -> Complex64 {
        let value = |v: &Var| {
            let z = &family.families[v.family][v.leg];
            match v.component {
                Component::X => z.x,
                Component::Y => z.y,
                Component::XBar => z.x.conj(),
                Component::YBar => z.y.conj(),
            }
        };
        self.terms
            .iter()
            .map(|(c, v1, v2)| c * value(v1) * value(v2))
            .sum()
    }

    fn normalized(mut self) -> Self {
        for term in &mut self.terms {
            if term.2 < term.1 {
                std::mem::swap(&mut term.1, &mut term.2);
            }
        }
        self.terms.sort_by(|l, r| (l.1, l.2).cmp(&(r.1, r.2)));
        let mut merged: Vec<(Complex64, Var, Var)> = Vec::with_capacity(self.terms.len());
        for (c, a, b) in self.terms {
            match merged.last_mut() {
                Some(last) if last.1 == a && last.2 == b => last.0 += c,
                _ => merged.push((c, a, b)),
            }
        }
        merged.retain(|(c, _, _)| c.norm() > 1e-15);
        QuadraticObservable { terms: merged }
    }
}

/// `{v1, v2}` for single variables: `-i` for `(x, xbar)` and `(y, ybar)`
/// pairs on the same mode, `+i` reversed, zero otherwise.
fn elementary_bracket(v1: &Var, v2: &Var) -> Complex64 {
    if v1.family != v2.family || v1.leg != v2.leg {
        return Complex64::new(0.0, 0.0);
    }
    use Component::*;
    match (v1.component, v2.component) {
        (X, XBar) | (Y, YBar) => Complex64::new(0.0, -1.0),
        (XBar, X) | (YBar, Y) => Complex64::new(0.0, 1.0),
        _ => Complex64::new(0.0, 0.0),
    }
}

/// Exact Poisson bracket of two quadratic observables, computed from the
/// bilinear rule by the Leibniz expansion; the result is again quadratic.
pub fn poisson_bracket(
    o1: &QuadraticObservable,
    o2: &QuadraticObservable,
) -> QuadraticObservable {
    let mut terms = Vec::new();
    for &(c1, a, b) in &o1.terms {
        for &(c2, c, d) in &o2.terms {
            let coeff = c1 * c2;
            // {ab, cd} = ac{b,d} + ad{b,c} + bc{a,d} + bd{a,c}
            let contributions = [
                (elementary_bracket(&b, &d), a, c),
                (elementary_bracket(&b, &c), a, d),
                (elementary_bracket(&a, &d), b, c),
                (elementary_bracket(&a, &c), b, d),
            ];
            for (scalar, u, v) in contributions {
                if scalar.norm() > 0.0 {
                    terms.push((coeff * scalar, u, v));
                }
            }
        }
    }
    QuadraticObservable { terms }.normalized()
}
