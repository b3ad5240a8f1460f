//! Sector-streaming coherent-state oracle.
//!
//! The raising operator adds one quantum of area per application, so the
//! fixed-area pieces `v_J = (Ftilde_zeta/2)^J |0> / J!` live in the balanced
//! `(J, J)` sectors and can be generated one sector at a time. All
//! validations here stream over `J`, holding at most a handful of sector
//! blocks; the explicit basis is never materialized.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::analytics;
use crate::antisym::{canonical_decompose, AntisymMatrix};
use crate::group::{udl_decompose, BlockGroupElement};
use crate::linalg::{self, CMatrix};
use crate::{Error, Result};

use super::comp::{comp_dim, lower_tables, move_tables, raise_tables, Binomials, FactorSpace};

const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Cutoff and allocation bounds for streaming operations. The capacity
/// applies to what a routine actually allocates (live sector blocks or a
/// materialized state), not to the size of the ambient truncated space.
#[derive(Debug, Clone, Copy)]
pub struct SectorLimits {
    pub n_legs: usize,
    pub j_max: u32,
    pub capacity: u64,
}

impl SectorLimits {
    pub fn new(n_legs: usize, j_max: u32) -> Self {
        SectorLimits {
            n_legs,
            j_max,
            capacity: super::capacity_from_env(),
        }
    }

    pub fn with_capacity(n_legs: usize, j_max: u32, capacity: u64) -> Self {
        SectorLimits {
            n_legs,
            j_max,
            capacity,
        }
    }

    fn binomials(&self) -> Binomials {
        Binomials::new(2 * self.j_max as usize + self.n_legs + 4)
    }

    fn check_alloc(&self, states: u64) -> Result<()> {
        if states > self.capacity {
            Err(Error::CapacityExceeded {
                needed: states,
                capacity: self.capacity,
            })
        } else {
            Ok(())
        }
    }
}

/// A state stored as dense blocks over `(q_A, q_B)` sectors; row-major
/// `rank_A * dim_B + rank_B` inside a block.
#[derive(Debug, Clone)]
pub struct StateVector {
    pub n_legs: usize,
    pub blocks: BTreeMap<(u32, u32), Vec<Complex64>>,
    /// Set when a raising operation had to drop weight at the cutoff.
    pub truncated: bool,
}

impl StateVector {
    pub fn vacuum(n_legs: usize) -> Self {
        let mut blocks = BTreeMap::new();
        blocks.insert((0, 0), vec![Complex64::new(1.0, 0.0)]);
        StateVector {
            n_legs,
            blocks,
            truncated: false,
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.blocks
            .values()
            .flat_map(|b| b.iter())
            .map(|z| z.norm_sqr())
            .sum()
    }

    pub fn dot(&self, other: &StateVector) -> Complex64 {
        let mut acc = C_ZERO;
        for (key, block) in &self.blocks {
            if let Some(other_block) = other.blocks.get(key) {
                for (x, y) in block.iter().zip(other_block.iter()) {
                    acc += x.conj() * y;
                }
            }
        }
        acc
    }

    pub fn scale(&mut self, s: Complex64) {
        for block in self.blocks.values_mut() {
            for z in block {
                *z *= s;
            }
        }
    }

    fn add_block(&mut self, key: (u32, u32), contribution: Vec<Complex64>) {
        match self.blocks.get_mut(&key) {
            Some(existing) => {
                for (dst, src) in existing.iter_mut().zip(contribution) {
                    *dst += src;
                }
            }
            None => {
                self.blocks.insert(key, contribution);
            }
        }
    }

    fn prune(&mut self) {
        self.blocks
            .retain(|_, block| block.iter().any(|z| z.norm_sqr() > 0.0));
    }
}

// ---------------------------------------------------------------------------
// Block-level ladder applications.
// ---------------------------------------------------------------------------

/// `(Ftilde_zeta / 2) v = sum_ab zeta_ab B+_a A+_b v`, mapping a
/// `(q_a, q_b)` block to `(q_a + 1, q_b + 1)`.
fn apply_half_ftilde(
    zeta: &CMatrix,
    binom: &Binomials,
    n: usize,
    q_a: u32,
    q_b: u32,
    block: &[Complex64],
) -> Vec<Complex64> {
    let space_a = FactorSpace::new(binom, n, q_a);
    let space_b = FactorSpace::new(binom, n, q_b);
    let raise_a = raise_tables(binom, &space_a);
    let raise_b = raise_tables(binom, &space_b);
    let dim_b = space_b.dim;
    let dim_b_up = comp_dim(binom, n, q_b + 1) as usize;
    let dim_a_up = comp_dim(binom, n, q_a + 1) as usize;
    let mut out = vec![C_ZERO; dim_a_up * dim_b_up];
    for a in 0..n {
        for b in 0..n {
            let coeff = zeta[(a, b)];
            if coeff == C_ZERO {
                continue;
            }
            for ra in 0..space_a.dim {
                let (ta, amp_a) = raise_a[b][ra];
                let scale = coeff * amp_a;
                let src = &block[ra * dim_b..(ra + 1) * dim_b];
                let dst_row = ta as usize * dim_b_up;
                for (rb, &value) in src.iter().enumerate() {
                    if value == C_ZERO {
                        continue;
                    }
                    let (tb, amp_b) = raise_b[a][rb];
                    out[dst_row + tb as usize] += scale * amp_b * value;
                }
            }
        }
    }
    out
}

/// `sum_ab coeffs_ab B_a A_b v`: lowers both species by one.
fn apply_lowering_bilinear(
    coeffs: &CMatrix,
    binom: &Binomials,
    n: usize,
    q_a: u32,
    q_b: u32,
    block: &[Complex64],
) -> Vec<Complex64> {
    debug_assert!(q_a > 0 && q_b > 0);
    let down_a = FactorSpace::new(binom, n, q_a - 1);
    let down_b = FactorSpace::new(binom, n, q_b - 1);
    // (B_a A_b v)[ra', rb'] = amp_a amp_b v[raise_b(ra'), raise_a(rb')].
    let raise_a = raise_tables(binom, &down_a);
    let raise_b = raise_tables(binom, &down_b);
    let dim_b = comp_dim(binom, n, q_b) as usize;
    let mut out = vec![C_ZERO; down_a.dim * down_b.dim];
    for a in 0..n {
        for b in 0..n {
            let coeff = coeffs[(a, b)];
            if coeff == C_ZERO {
                continue;
            }
            for ra in 0..down_a.dim {
                let (sa, amp_a) = raise_a[b][ra];
                let scale = coeff * amp_a;
                let src_row = sa as usize * dim_b;
                let dst_row = ra * down_b.dim;
                for rb in 0..down_b.dim {
                    let (sb, amp_b) = raise_b[a][rb];
                    out[dst_row + rb] += scale * amp_b * block[src_row + sb as usize];
                }
            }
        }
    }
    out
}

/// `sum_ab m_ab (A+_a A_b + B+_a B_b) v` within one sector.
fn apply_e_bilinear(
    m: &CMatrix,
    binom: &Binomials,
    n: usize,
    q_a: u32,
    q_b: u32,
    block: &[Complex64],
) -> Vec<Complex64> {
    let space_a = FactorSpace::new(binom, n, q_a);
    let space_b = FactorSpace::new(binom, n, q_b);
    let move_a = move_tables(binom, &space_a);
    let move_b = move_tables(binom, &space_b);
    let dim_b = space_b.dim;
    let mut out = vec![C_ZERO; block.len()];
    for a in 0..n {
        for b in 0..n {
            let coeff = m[(a, b)];
            if coeff == C_ZERO {
                continue;
            }
            for ra in 0..space_a.dim {
                if let Some((ta, amp)) = move_a[a][b][ra] {
                    let scale = coeff * amp;
                    let src = &block[ra * dim_b..(ra + 1) * dim_b];
                    let dst_row = ta as usize * dim_b;
                    for (rb, &value) in src.iter().enumerate() {
                        out[dst_row + rb] += scale * value;
                    }
                }
            }
            for rb in 0..dim_b {
                if let Some((tb, amp)) = move_b[a][b][rb] {
                    let scale = coeff * amp;
                    for ra in 0..space_a.dim {
                        out[ra * dim_b + tb as usize] += scale * block[ra * dim_b + rb];
                    }
                }
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// The coherent-sector scan.
// ---------------------------------------------------------------------------

/// Generates `v_J = (Ftilde_zeta/2)^J |0> / J!` on the balanced sectors.
struct CoherentScan<'a> {
    zeta: &'a CMatrix,
    n: usize,
    binom: &'a Binomials,
    j: u32,
    block: Vec<Complex64>,
}

impl<'a> CoherentScan<'a> {
    fn new(zeta: &'a CMatrix, binom: &'a Binomials) -> Self {
        CoherentScan {
            zeta,
            n: zeta.nrows(),
            binom,
            j: 0,
            block: vec![Complex64::new(1.0, 0.0)],
        }
    }

    fn advance(&mut self) {
        let raised = apply_half_ftilde(self.zeta, self.binom, self.n, self.j, self.j, &self.block);
        let inv = Complex64::new(1.0 / (self.j as f64 + 1.0), 0.0);
        self.block = raised.into_iter().map(|z| z * inv).collect();
        self.j += 1;
    }
}

fn balanced_dim(binom: &Binomials, n: usize, j: u32) -> u64 {
    let d = comp_dim(binom, n, j);
    d * d
}

/// Geometric-type bound on the probability mass above `j_max`:
/// `N(zeta)^2 sum_{J > j_max} C(J + 2k - 1, 2k - 1) lambda_1^{2J}`.
pub fn tail_bound(zeta: &AntisymMatrix, j_max: u32) -> Result<f64> {
    let form = canonical_decompose(zeta)?;
    if form.half_rank == 0 {
        return Ok(0.0);
    }
    let k = form.half_rank;
    let lambda_sq = form.lambdas[0] * form.lambdas[0];
    let norm_sq = analytics::normalization(zeta)?.powi(2);
    // C(J + 2k - 1, 2k - 1) built up iteratively.
    let mut comb = 1.0f64;
    for i in 1..2 * k {
        comb *= (j_max as f64 + 1.0 + i as f64) / i as f64;
    }
    let mut power = lambda_sq.powi(j_max as i32 + 1);
    let mut acc = 0.0;
    let mut j = j_max as f64 + 1.0;
    loop {
        let term = comb * power;
        acc += term;
        if term < 1e-30 * acc.max(1e-300) || term < f64::MIN_POSITIVE {
            break;
        }
        comb *= (j + 2.0 * k as f64) / (j + 1.0);
        power *= lambda_sq;
        j += 1.0;
    }
    Ok(norm_sq * acc)
}

/// Smallest cutoff whose cross tail estimate for the given labels is below
/// `tol`, with the peak live allocation within capacity. Errors with
/// `CapacityExceeded` when no such cutoff exists.
pub fn suggest_j_max(
    states: &[&AntisymMatrix],
    tol: f64,
    limits_template: SectorLimits,
) -> Result<u32> {
    let n = limits_template.n_legs;
    let binom = Binomials::new(1200);
    for m in 1..=500u32 {
        // For a pair the cross term is bounded by the geometric mean of the
        // two norm tails; a single state contributes its own tail directly.
        let bound = if states.len() >= 2 {
            let mut product = 1.0;
            for zeta in states {
                product *= tail_bound(zeta, m)?;
            }
            product.powf(1.0 / states.len() as f64)
        } else {
            tail_bound(states[0], m)?
        };
        let bound = bound * (2.0 * m as f64 + 2.0 * n as f64 + 2.0);
        if bound < tol {
            // Four live blocks is the worst case for the cross scans.
            let live = 4 * balanced_dim(&binom, n, m);
            limits_template.check_alloc(live)?;
            return Ok(m);
        }
    }
    Err(Error::CapacityExceeded {
        needed: u64::MAX,
        capacity: limits_template.capacity,
    })
}

/// Like [`suggest_j_max`] but for second moments of the area, whose
/// truncation error carries an extra `J^2` weight:
/// requires `N^2 sum_{J > m} (J+1)^2 C(J+2k-1, 2k-1) lambda_1^{2J} < tol`.
pub fn suggest_j_max_moments(
    zeta: &AntisymMatrix,
    tol: f64,
    limits_template: SectorLimits,
) -> Result<u32> {
    let form = canonical_decompose(zeta)?;
    if form.half_rank == 0 {
        return Ok(0);
    }
    let k = form.half_rank;
    let lambda_sq = form.lambdas[0] * form.lambdas[0];
    let norm_sq = analytics::normalization(zeta)?.powi(2);
    let binom = Binomials::new(1200);
    for m in 1..=500u32 {
        let mut comb = 1.0f64;
        for i in 1..2 * k {
            comb *= (m as f64 + 1.0 + i as f64) / i as f64;
        }
        let mut power = lambda_sq.powi(m as i32 + 1);
        let mut acc = 0.0;
        let mut j = m as f64 + 1.0;
        loop {
            let term = (j + 1.0) * (j + 1.0) * comb * power;
            acc += term;
            if term < 1e-30 * acc.max(1e-300) || term < f64::MIN_POSITIVE {
                break;
            }
            comb *= (j + 2.0 * k as f64) / (j + 1.0);
            power *= lambda_sq;
            j += 1.0;
        }
        if norm_sq * acc < tol {
            let live = 2 * balanced_dim(&binom, limits_template.n_legs, m);
            limits_template.check_alloc(live)?;
            return Ok(m);
        }
    }
    Err(Error::CapacityExceeded {
        needed: u64::MAX,
        capacity: limits_template.capacity,
    })
}

/// Projection distribution `P(J) = N(zeta)^2 ||v_J||^2` for `J <= j_max`.
pub fn oracle_distribution(zeta: &AntisymMatrix, limits: SectorLimits) -> Result<Vec<(u32, f64)>> {
    zeta.require_in_domain()?;
    let norm_sq = analytics::normalization(zeta)?.powi(2);
    let binom = limits.binomials();
    limits.check_alloc(2 * balanced_dim(&binom, limits.n_legs, limits.j_max))?;
    let mut scan = CoherentScan::new(zeta.mat(), &binom);
    let mut out = Vec::with_capacity(limits.j_max as usize + 1);
    for j in 0..=limits.j_max {
        let mass: f64 = scan.block.iter().map(|z| z.norm_sqr()).sum();
        out.push((j, norm_sq * mass));
        if j < limits.j_max {
            scan.advance();
        }
    }
    Ok(out)
}

/// `<omega|zeta>` on the truncated space.
pub fn oracle_overlap(
    omega: &AntisymMatrix,
    zeta: &AntisymMatrix,
    limits: SectorLimits,
) -> Result<Complex64> {
    Ok(oracle_cross_elements(omega, zeta, limits)?.overlap)
}

/// Truncated matrix elements between two coherent states, all generators at
/// once, with the normalization prefactors included.
#[derive(Debug, Clone)]
pub struct OracleElements {
    pub overlap: Complex64,
    pub e: CMatrix,
    pub f: CMatrix,
    pub ftilde: CMatrix,
}

pub fn oracle_cross_elements(
    omega: &AntisymMatrix,
    zeta: &AntisymMatrix,
    limits: SectorLimits,
) -> Result<OracleElements> {
    omega.require_in_domain()?;
    zeta.require_in_domain()?;
    let n = limits.n_legs;
    let binom = limits.binomials();
    limits.check_alloc(4 * balanced_dim(&binom, n, limits.j_max))?;

    let mut w_scan = CoherentScan::new(omega.mat(), &binom);
    let mut z_scan = CoherentScan::new(zeta.mat(), &binom);

    let mut overlap = C_ZERO;
    let mut e_acc = CMatrix::zeros(n, n);
    let mut f_acc = CMatrix::zeros(n, n);
    let mut ft_acc = CMatrix::zeros(n, n);

    let mut w_prev: Vec<Complex64> = Vec::new();
    let mut z_prev: Vec<Complex64> = Vec::new();

    for j in 0..=limits.j_max {
        let w = &w_scan.block;
        let z = &z_scan.block;
        let space = FactorSpace::new(&binom, n, j);
        let dim = space.dim;

        for (x, y) in w.iter().zip(z.iter()) {
            overlap += x.conj() * y;
        }

        // E within the sector: number-conserving hops on either species.
        let moves = move_tables(&binom, &space);
        for a in 0..n {
            for b in 0..n {
                let mut acc = C_ZERO;
                for ra in 0..dim {
                    if let Some((ta, amp)) = moves[a][b][ra] {
                        let w_row = &w[ta as usize * dim..(ta as usize + 1) * dim];
                        let z_row = &z[ra * dim..(ra + 1) * dim];
                        let mut partial = C_ZERO;
                        for (x, y) in w_row.iter().zip(z_row.iter()) {
                            partial += x.conj() * y;
                        }
                        acc += partial * amp;
                    }
                }
                for rb in 0..dim {
                    if let Some((tb, amp)) = moves[a][b][rb] {
                        let mut partial = C_ZERO;
                        for ra in 0..dim {
                            partial += w[ra * dim + tb as usize].conj() * z[ra * dim + rb];
                        }
                        acc += partial * amp;
                    }
                }
                e_acc[(a, b)] += acc;
            }
        }

        if j > 0 {
            // F: <w_{J-1}| B_a A_b - A_a B_b |z_J>, via raising maps of the
            // smaller sector. Ftilde is the mirror image with w and z roles
            // swapped.
            let small = FactorSpace::new(&binom, n, j - 1);
            let raise = raise_tables(&binom, &small);
            let small_dim = small.dim;
            for a in 0..n {
                for b in 0..n {
                    let mut f_term = C_ZERO;
                    let mut ft_term = C_ZERO;
                    for ra in 0..small_dim {
                        let (ta, amp_a) = raise[b][ra];
                        let ta = ta as usize;
                        for rb in 0..small_dim {
                            let (tb, amp_b) = raise[a][rb];
                            let amp = amp_a * amp_b;
                            f_term += w_prev[ra * small_dim + rb].conj()
                                * z[ta * dim + tb as usize]
                                * amp;
                            ft_term += w[ta * dim + tb as usize].conj()
                                * z_prev[ra * small_dim + rb]
                                * amp;
                        }
                    }
                    // Antisymmetrized counterparts (A_a B_b and A+_a B+_b).
                    for ra in 0..small_dim {
                        let (ta, amp_a) = raise[a][ra];
                        let ta = ta as usize;
                        for rb in 0..small_dim {
                            let (tb, amp_b) = raise[b][rb];
                            let amp = amp_a * amp_b;
                            f_term -= w_prev[ra * small_dim + rb].conj()
                                * z[ta * dim + tb as usize]
                                * amp;
                            ft_term -= w[ta * dim + tb as usize].conj()
                                * z_prev[ra * small_dim + rb]
                                * amp;
                        }
                    }
                    f_acc[(a, b)] += f_term;
                    ft_acc[(a, b)] += ft_term;
                }
            }
        }

        if j < limits.j_max {
            w_prev = w_scan.block.clone();
            z_prev = z_scan.block.clone();
            w_scan.advance();
            z_scan.advance();
        }
    }

    let prefactor = Complex64::new(
        analytics::normalization(omega)? * analytics::normalization(zeta)?,
        0.0,
    );
    overlap *= prefactor;
    let e = e_acc.map(|v| v * prefactor) + linalg::identity(n).map(|v| v * overlap);
    Ok(OracleElements {
        overlap,
        e,
        f: f_acc.map(|v| v * prefactor),
        ftilde: ft_acc.map(|v| v * prefactor),
    })
}

/// First and second moments of the (mutually commuting) area operators.
#[derive(Debug, Clone)]
pub struct AreaMoments {
    pub means: Vec<f64>,
    /// `<A_a A_b>`.
    pub second: Vec<Vec<f64>>,
    /// Probability mass captured below the cutoff.
    pub captured: f64,
}

pub fn oracle_area_moments(zeta: &AntisymMatrix, limits: SectorLimits) -> Result<AreaMoments> {
    zeta.require_in_domain()?;
    let n = limits.n_legs;
    let norm_sq = analytics::normalization(zeta)?.powi(2);
    let binom = limits.binomials();
    limits.check_alloc(2 * balanced_dim(&binom, n, limits.j_max))?;

    let mut scan = CoherentScan::new(zeta.mat(), &binom);
    let mut means = vec![0.0; n];
    let mut second = vec![vec![0.0; n]; n];
    let mut captured = 0.0;
    let mut halves = vec![0.0; n];

    for j in 0..=limits.j_max {
        let space = FactorSpace::new(&binom, n, j);
        let dim = space.dim;
        // Occupations per rank, cached for both species (same space).
        let mut occs = vec![0u32; dim * n];
        space.for_each(&binom, |rank, occ| {
            occs[rank * n..(rank + 1) * n].copy_from_slice(occ);
        });
        let block = &scan.block;
        for ra in 0..dim {
            for rb in 0..dim {
                let p = norm_sq * block[ra * dim + rb].norm_sqr();
                if p == 0.0 {
                    continue;
                }
                captured += p;
                for a in 0..n {
                    halves[a] = 0.5 * (occs[ra * n + a] + occs[rb * n + a]) as f64;
                }
                for a in 0..n {
                    means[a] += p * halves[a];
                    for b in 0..n {
                        second[a][b] += p * halves[a] * halves[b];
                    }
                }
            }
        }
        if j < limits.j_max {
            scan.advance();
        }
    }
    Ok(AreaMoments {
        means,
        second,
        captured,
    })
}

/// `(Ftilde_zeta/2)^j |0>`: exact eigenvector of the total area with
/// eigenvalue `j`, annihilated by the total angular momentum.
pub fn fixed_area_state(
    zeta: &AntisymMatrix,
    j: u32,
    limits: SectorLimits,
) -> Result<StateVector> {
    if j > limits.j_max {
        return Err(Error::CutoffExceeded {
            j_max: limits.j_max,
        });
    }
    let n = limits.n_legs;
    let binom = limits.binomials();
    limits.check_alloc(2 * balanced_dim(&binom, n, j))?;
    let mut block = vec![Complex64::new(1.0, 0.0)];
    for q in 0..j {
        block = apply_half_ftilde(zeta.mat(), &binom, n, q, q, &block);
    }
    let mut blocks = BTreeMap::new();
    blocks.insert((j, j), block);
    Ok(StateVector {
        n_legs: n,
        blocks,
        truncated: false,
    })
}

/// The normalized truncated coherent state together with the tail bound on
/// the dropped mass.
pub fn coherent_state(zeta: &AntisymMatrix, limits: SectorLimits) -> Result<(StateVector, f64)> {
    zeta.require_in_domain()?;
    let n = limits.n_legs;
    let binom = limits.binomials();
    let total: u64 = (0..=limits.j_max)
        .map(|j| balanced_dim(&binom, n, j))
        .sum();
    limits.check_alloc(total)?;

    let norm = analytics::normalization(zeta)?;
    let mut scan = CoherentScan::new(zeta.mat(), &binom);
    let mut blocks = BTreeMap::new();
    for j in 0..=limits.j_max {
        let scaled: Vec<Complex64> = scan
            .block
            .iter()
            .map(|z| z * Complex64::new(norm, 0.0))
            .collect();
        blocks.insert((j, j), scaled);
        if j < limits.j_max {
            scan.advance();
        }
    }
    let tail = tail_bound(zeta, limits.j_max)?;
    Ok((
        StateVector {
            n_legs: n,
            blocks,
            truncated: tail > 0.0,
        },
        tail,
    ))
}

/// Norm of `(J_z, J_+, J_-) psi` relative to `||psi||`: zero for intertwiner
/// states.
pub fn su2_invariance_residual(state: &StateVector, limits: SectorLimits) -> f64 {
    let n = state.n_legs;
    let binom = limits.binomials();
    let mut residual_sq = 0.0;
    for (&(q_a, q_b), block) in &state.blocks {
        // J_z is diagonal with eigenvalue (q_a - q_b)/2 on the whole block.
        let jz = 0.5 * (q_a as f64 - q_b as f64);
        residual_sq += jz * jz * block.iter().map(|z| z.norm_sqr()).sum::<f64>();

        let space_a = FactorSpace::new(&binom, n, q_a);
        let space_b = FactorSpace::new(&binom, n, q_b);
        // J+ = sum_a A+_a B_a.
        if q_b > 0 {
            let raise_a = raise_tables(&binom, &space_a);
            let lower_b = lower_tables(&binom, &space_b);
            let up_dim_a = comp_dim(&binom, n, q_a + 1) as usize;
            let down_dim_b = comp_dim(&binom, n, q_b - 1) as usize;
            let mut image = vec![C_ZERO; up_dim_a * down_dim_b];
            for leg in 0..n {
                for ra in 0..space_a.dim {
                    let (ta, amp_a) = raise_a[leg][ra];
                    for rb in 0..space_b.dim {
                        if let Some((tb, amp_b)) = lower_b[leg][rb] {
                            image[ta as usize * down_dim_b + tb as usize] +=
                                block[ra * space_b.dim + rb] * (amp_a * amp_b);
                        }
                    }
                }
            }
            residual_sq += image.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        // J- = sum_a B+_a A_a.
        if q_a > 0 {
            let lower_a = lower_tables(&binom, &space_a);
            let raise_b = raise_tables(&binom, &space_b);
            let down_dim_a = comp_dim(&binom, n, q_a - 1) as usize;
            let up_dim_b = comp_dim(&binom, n, q_b + 1) as usize;
            let mut image = vec![C_ZERO; down_dim_a * up_dim_b];
            for leg in 0..n {
                for ra in 0..space_a.dim {
                    if let Some((ta, amp_a)) = lower_a[leg][ra] {
                        for rb in 0..space_b.dim {
                            let (tb, amp_b) = raise_b[leg][rb];
                            image[ta as usize * up_dim_b + tb as usize] +=
                                block[ra * space_b.dim + rb] * (amp_a * amp_b);
                        }
                    }
                }
            }
            residual_sq += image.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
    }
    (residual_sq / state.norm_sq().max(f64::MIN_POSITIVE)).sqrt()
}

/// Squeezed-vacuum annihilation residual: the largest norm over modes of
/// `(C_d - S^{dc} C+_c)|zeta>` across the interior shells.
pub fn annihilator_check(zeta: &AntisymMatrix, limits: SectorLimits) -> Result<f64> {
    zeta.require_in_domain()?;
    let n = limits.n_legs;
    let binom = limits.binomials();
    limits.check_alloc(3 * balanced_dim(&binom, n, limits.j_max))?;
    let norm = analytics::normalization(zeta)?;
    let z = zeta.mat();

    let mut scan = CoherentScan::new(z, &binom);
    let mut prev: Vec<Complex64> = Vec::new();
    let mut residual_sq = vec![0.0f64; 2 * n];

    for j in 1..=limits.j_max {
        prev = std::mem::take(&mut scan.block);
        scan.block = {
            let raised = apply_half_ftilde(z, &binom, n, j - 1, j - 1, &prev);
            let inv = Complex64::new(1.0 / j as f64, 0.0);
            raised.into_iter().map(|v| v * inv).collect()
        };
        scan.j = j;

        let small = FactorSpace::new(&binom, n, j - 1);
        let big = FactorSpace::new(&binom, n, j);
        let raise = raise_tables(&binom, &small);
        let lower = lower_tables(&binom, &big);
        let (sd, bd) = (small.dim, big.dim);
        let cur = &scan.block;

        // A-species mode d: (A_d v_j)[ra', rb] - sum_a zeta_ad (B+_a v_{j-1})[ra', rb]
        // on the (j-1, j) sector.
        for d in 0..n {
            let mut acc = 0.0;
            for ra in 0..sd {
                let (sa, amp_a) = raise[d][ra];
                for rb in 0..bd {
                    let mut value = cur[sa as usize * bd + rb] * amp_a;
                    for a in 0..n {
                        if let Some((tb, amp_b)) = lower[a][rb] {
                            value -= z[(a, d)] * amp_b * prev[ra * sd + tb as usize];
                        }
                    }
                    acc += value.norm_sqr();
                }
            }
            residual_sq[d] += acc;
        }
        // B-species mode d on the (j, j-1) sector:
        // (B_d v_j)[ra, rb'] - sum_c zeta_dc (A+_c v_{j-1})[ra, rb'].
        for d in 0..n {
            let mut acc = 0.0;
            for ra in 0..bd {
                for rb in 0..sd {
                    let (sb, amp_b) = raise[d][rb];
                    let mut value = cur[ra * bd + sb as usize] * amp_b;
                    for c in 0..n {
                        if let Some((ta, amp_a)) = lower[c][ra] {
                            value -= z[(d, c)] * amp_a * prev[ta as usize * sd + rb];
                        }
                    }
                    acc += value.norm_sqr();
                }
            }
            residual_sq[n + d] += acc;
        }
    }
    let _ = prev;
    Ok(residual_sq
        .iter()
        .map(|&r| norm * r.sqrt())
        .fold(0.0, f64::max))
}

/// Applies a group element through its UDL factors: polynomial lowering,
/// sector-wise exponential of the diagonal piece, truncated raising.
pub fn apply_group_element(
    g: &BlockGroupElement,
    state: &StateVector,
    limits: SectorLimits,
) -> Result<StateVector> {
    let udl = udl_decompose(g)?;
    let n = limits.n_legs;
    let binom = limits.binomials();

    // exp(-F_lower/2) = exp(-sum conj(lower)_ab B_a A_b): terminating series.
    let lower_coeffs = linalg::conj(udl.lower.mat()).map(|v| -v);
    let mut after_lower = state.clone();
    {
        let mut term = state.clone();
        let mut order = 1u32;
        loop {
            let mut next = StateVector {
                n_legs: n,
                blocks: BTreeMap::new(),
                truncated: false,
            };
            for (&(q_a, q_b), block) in &term.blocks {
                if q_a == 0 || q_b == 0 {
                    continue;
                }
                let lowered =
                    apply_lowering_bilinear(&lower_coeffs, &binom, n, q_a, q_b, block);
                let inv = Complex64::new(1.0 / order as f64, 0.0);
                next.add_block(
                    (q_a - 1, q_b - 1),
                    lowered.into_iter().map(|v| v * inv).collect(),
                );
            }
            next.prune();
            if next.blocks.is_empty() {
                break;
            }
            for (key, block) in &next.blocks {
                after_lower.add_block(*key, block.clone());
            }
            term = next;
            order += 1;
        }
    }

    // exp(E_L) = e^{tr L} exp(dGamma(L)) sector by sector, by scaled Taylor.
    let l = &udl.l_matrix;
    let trace: Complex64 = l.diagonal().sum();
    let trace_factor = trace.exp();
    let l_norm = linalg::fro_norm(l);
    let mut after_diag = StateVector {
        n_legs: n,
        blocks: BTreeMap::new(),
        truncated: after_lower.truncated,
    };
    for (&(q_a, q_b), block) in &after_lower.blocks {
        let op_norm = l_norm * (q_a + q_b) as f64;
        let mut halvings = 0u32;
        let mut scaled_norm = op_norm;
        while scaled_norm > 0.5 && halvings < 24 {
            scaled_norm *= 0.5;
            halvings += 1;
        }
        let scaled_l = l.map(|v| v / Complex64::new(f64::powi(2.0, halvings as i32), 0.0));
        let mut current = block.clone();
        for _ in 0..(1u32 << halvings) {
            // Taylor of exp applied to the block.
            let mut acc = current.clone();
            let mut term = current;
            for order in 1..=40u32 {
                term = apply_e_bilinear(&scaled_l, &binom, n, q_a, q_b, &term);
                let inv = Complex64::new(1.0 / order as f64, 0.0);
                for v in &mut term {
                    *v *= inv;
                }
                let term_norm: f64 = term.iter().map(|v| v.norm_sqr()).sum();
                for (dst, src) in acc.iter_mut().zip(term.iter()) {
                    *dst += src;
                }
                if term_norm < 1e-32 * acc.iter().map(|v| v.norm_sqr()).sum::<f64>() {
                    break;
                }
            }
            current = acc;
        }
        for v in &mut current {
            *v *= trace_factor;
        }
        after_diag.add_block((q_a, q_b), current);
    }

    // exp(Ftilde_upper/2): raising series, truncated at the cutoff.
    let upper = udl.upper.mat();
    let mut result = after_diag.clone();
    let mut term = after_diag;
    let mut order = 1u32;
    let mut truncated = result.truncated;
    loop {
        let mut next = StateVector {
            n_legs: n,
            blocks: BTreeMap::new(),
            truncated: false,
        };
        for (&(q_a, q_b), block) in &term.blocks {
            if q_a + 1 > limits.j_max || q_b + 1 > limits.j_max {
                if block.iter().any(|v| v.norm_sqr() > 1e-30) {
                    truncated = true;
                }
                continue;
            }
            let raised = apply_half_ftilde(upper, &binom, n, q_a, q_b, block);
            let inv = Complex64::new(1.0 / order as f64, 0.0);
            next.add_block(
                (q_a + 1, q_b + 1),
                raised.into_iter().map(|v| v * inv).collect(),
            );
        }
        next.prune();
        if next.blocks.is_empty() {
            break;
        }
        let live: u64 = next.blocks.values().map(|b| b.len() as u64).sum();
        limits.check_alloc(live)?;
        for (key, block) in &next.blocks {
            result.add_block(*key, block.clone());
        }
        term = next;
        order += 1;
    }
    result.truncated = truncated;
    Ok(result)
}

/// Compares `exp(E_alpha)|psi_J>` (with `alpha = log g`) against
/// `det(g) (Ftilde_{g xi0 g^T}/2)^J |0> / sqrt(J!(J+1)!)`; returns the
/// relative deviation.
pub fn highest_weight_check(g: &CMatrix, j: u32, limits: SectorLimits) -> Result<f64> {
    let n = limits.n_legs;
    if j > limits.j_max {
        return Err(Error::CutoffExceeded {
            j_max: limits.j_max,
        });
    }
    let det = linalg::det(g)?;
    if det.norm() < 1e-300 {
        return Err(Error::SingularMatrix);
    }
    let alpha = linalg::mat_log_principal(g)?;
    let binom = limits.binomials();

    let xi0 = crate::un::xi_zero(n);
    // v_J = (Ftilde/2)^J |0> / J!; the normalized highest weight is
    // v_J / sqrt(J + 1).
    let mut block = vec![Complex64::new(1.0, 0.0)];
    for q in 0..j {
        block = apply_half_ftilde(xi0.mat(), &binom, n, q, q, &block);
        let inv = Complex64::new(1.0 / (q as f64 + 1.0), 0.0);
        for v in &mut block {
            *v *= inv;
        }
    }
    let scale = Complex64::new(1.0 / ((j as f64) + 1.0).sqrt(), 0.0);
    for v in &mut block {
        *v *= scale;
    }

    // Left side: exp(E_alpha) acting inside the (j, j) sector.
    let trace_factor = alpha.diagonal().sum().exp();
    let alpha_norm = linalg::fro_norm(&alpha);
    let mut halvings = 0u32;
    let mut scaled_norm = alpha_norm * (2 * j) as f64;
    while scaled_norm > 0.5 && halvings < 24 {
        scaled_norm *= 0.5;
        halvings += 1;
    }
    let scaled_alpha = alpha.map(|v| v / Complex64::new(f64::powi(2.0, halvings as i32), 0.0));
    let mut lhs = block;
    for _ in 0..(1u32 << halvings) {
        let mut acc = lhs.clone();
        let mut term = lhs;
        for order in 1..=60u32 {
            term = apply_e_bilinear(&scaled_alpha, &binom, n, j, j, &term);
            let inv = Complex64::new(1.0 / order as f64, 0.0);
            for v in &mut term {
                *v *= inv;
            }
            for (dst, src) in acc.iter_mut().zip(term.iter()) {
                *dst += src;
            }
            if term.iter().map(|v| v.norm_sqr()).sum::<f64>()
                < 1e-32 * acc.iter().map(|v| v.norm_sqr()).sum::<f64>()
            {
                break;
            }
        }
        lhs = acc;
    }
    for v in &mut lhs {
        *v *= trace_factor;
    }

    // Right side: det(g) v'_J / sqrt(J + 1) with xi' = g xi0 g^T.
    let xi_moved = g * xi0.mat() * g.transpose();
    let mut rhs = vec![Complex64::new(1.0, 0.0)];
    for q in 0..j {
        rhs = apply_half_ftilde(&xi_moved, &binom, n, q, q, &rhs);
        let inv = Complex64::new(1.0 / (q as f64 + 1.0), 0.0);
        for v in &mut rhs {
            *v *= inv;
        }
    }
    let rhs_scale = det * scale;
    for v in &mut rhs {
        *v *= rhs_scale;
    }

    let diff_sq: f64 = lhs
        .iter()
        .zip(rhs.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();
    let rhs_sq: f64 = rhs.iter().map(|v| v.norm_sqr()).sum();
    Ok((diff_sq / rhs_sq.max(f64::MIN_POSITIVE)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::antisym::sigma_block;
    use crate::group::{four_leg_zeta, g_of_zeta, moebius_act, BlockGroupElement};
    use crate::linalg::{random_antisymmetric, random_unitary};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zeta_star() -> AntisymMatrix {
        sigma_block(3, 0.5f64.sqrt())
    }

    #[test]
    fn fixed_area_norms_match_closed_form() {
        let limits = SectorLimits::with_capacity(3, 12, 1_000_000);
        let z = zeta_star();
        for j in 0..=10u32 {
            let state = fixed_area_state(&z, j, limits).unwrap();
            let expected = crate::analytics::fixed_area_norm(&z, j).unwrap();
            assert_abs_diff_eq!(state.norm_sq(), expected, epsilon = 1e-9 * expected.max(1.0));
        }
    }

    #[test]
    fn fixed_area_states_are_su2_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let limits = SectorLimits::with_capacity(3, 8, 1_000_000);
        for _ in 0..5 {
            let zeta = AntisymMatrix::new(random_antisymmetric(&mut rng, 3, 0.6)).unwrap();
            let state = fixed_area_state(&zeta, 3, limits).unwrap();
            assert!(su2_invariance_residual(&state, limits) <= 1e-12);
        }
    }

    #[test]
    fn coherent_norm_approaches_one() {
        let limits = SectorLimits::with_capacity(3, 40, 8_000_000);
        let (state, tail) = coherent_state(&zeta_star(), limits).unwrap();
        assert!((state.norm_sq() - 1.0).abs() < 1e-10);
        assert!(tail < 1e-9);
    }

    #[test]
    fn distribution_matches_closed_form() {
        let limits = SectorLimits::with_capacity(3, 25, 2_000_000);
        let oracle = oracle_distribution(&zeta_star(), limits).unwrap();
        let closed = crate::analytics::area_distribution(&zeta_star(), 25).unwrap();
        for ((ja, pa), (jb, pb)) in oracle.iter().zip(closed.iter()) {
            assert_eq!(ja, jb);
            assert_abs_diff_eq!(pa, pb, epsilon = 1e-10);
        }
        // Rank-4 labels have no closed form but the projection still works.
        let limits4 = SectorLimits::with_capacity(4, 12, 2_000_000);
        let d4 = oracle_distribution(&four_leg_zeta(), limits4).unwrap();
        let total: f64 = d4.iter().map(|(_, p)| p).sum();
        assert!(total <= 1.0 + 1e-12);
        assert!(total > 0.9);
    }

    #[test]
    fn overlap_matches_closed_form() {
        let limits = SectorLimits::with_capacity(3, 40, 8_000_000);
        let z = zeta_star();
        let minus = AntisymMatrix::new(z.mat().map(|v| -v)).unwrap();
        let got = oracle_overlap(&z, &minus, limits).unwrap();
        assert_abs_diff_eq!(got.re, 1.0 / 9.0, epsilon = 1e-9);
        assert_abs_diff_eq!(got.im, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn cross_elements_match_closed_form_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let omega = AntisymMatrix::new(random_antisymmetric(&mut rng, 2, 0.4)).unwrap();
        let zeta = AntisymMatrix::new(random_antisymmetric(&mut rng, 2, 0.5)).unwrap();
        let limits = SectorLimits::with_capacity(2, 60, 1_000_000);
        let oracle = oracle_cross_elements(&omega, &zeta, limits).unwrap();
        let closed = crate::analytics::matrix_elements(&omega, &zeta).unwrap();
        let closed_overlap = crate::analytics::overlap(&omega, &zeta).unwrap();
        assert!((oracle.overlap - closed_overlap).norm() < 1e-10);
        for a in 0..2 {
            for b in 0..2 {
                assert!((oracle.e[(a, b)] - closed.e[(a, b)]).norm() < 1e-9);
                assert!((oracle.f[(a, b)] - closed.f[(a, b)]).norm() < 1e-9);
                assert!((oracle.ftilde[(a, b)] - closed.ftilde[(a, b)]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn area_moments_match_closed_form() {
        let limits = SectorLimits::with_capacity(3, 40, 8_000_000);
        let moments = oracle_area_moments(&zeta_star(), limits).unwrap();
        assert_abs_diff_eq!(moments.means[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(moments.means[2], 0.0, epsilon = 1e-12);
        // Var(A_1) = <A_1^2> - 1 = 1.
        assert_abs_diff_eq!(moments.second[0][0] - 1.0, 1.0, epsilon = 1e-8);
        assert!(moments.captured > 1.0 - 1e-10);
    }

    #[test]
    fn annihilator_residual_small() {
        let limits = SectorLimits::with_capacity(3, 20, 2_000_000);
        assert!(annihilator_check(&zeta_star(), limits).unwrap() <= 1e-10);
        let limits0 = SectorLimits::with_capacity(2, 10, 100_000);
        assert!(annihilator_check(&AntisymMatrix::zeros(2), limits0).unwrap() <= 1e-14);
    }

    #[test]
    fn group_action_identity_fixes_states() {
        let limits = SectorLimits::with_capacity(3, 10, 500_000);
        let (state, _) = coherent_state(&zeta_star(), limits).unwrap();
        let id = BlockGroupElement::identity(3);
        let moved = apply_group_element(&id, &state, limits).unwrap();
        let mut diff = 0.0;
        for (key, block) in &state.blocks {
            let other = &moved.blocks[key];
            diff += block
                .iter()
                .zip(other.iter())
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>();
        }
        assert!(diff.sqrt() < 1e-12);
    }

    #[test]
    fn compact_action_is_coherent() {
        // g = diag-embed(U): |<U zeta U^T| g |zeta>| = 1.
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let limits = SectorLimits::with_capacity(2, 40, 500_000);
        let zeta = AntisymMatrix::new(random_antisymmetric(&mut rng, 2, 0.3)).unwrap();
        let u = random_unitary(&mut rng, 2);
        let k = BlockGroupElement::from_unitary(u);
        let (state, _) = coherent_state(&zeta, limits).unwrap();
        let moved = apply_group_element(&k, &state, limits).unwrap();
        let target = moebius_act(&k, &zeta).unwrap();
        let (target_state, _) = coherent_state(&target, limits).unwrap();
        let amp = target_state.dot(&moved).norm();
        assert_abs_diff_eq!(amp, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn noncompact_action_is_coherent_within_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(54);
        let limits = SectorLimits::with_capacity(2, 40, 500_000);
        let zeta = AntisymMatrix::new(random_antisymmetric(&mut rng, 2, 0.3)).unwrap();
        let omega = AntisymMatrix::new(random_antisymmetric(&mut rng, 2, 0.1)).unwrap();
        let g = g_of_zeta(&omega).unwrap();
        let (state, _) = coherent_state(&zeta, limits).unwrap();
        let moved = apply_group_element(&g, &state, limits).unwrap();
        let target = moebius_act(&g, &zeta).unwrap();
        let (target_state, _) = coherent_state(&target, limits).unwrap();
        let amp = target_state.dot(&moved).norm();
        assert_abs_diff_eq!(amp, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn highest_weight_identity_and_unitary() {
        let limits = SectorLimits::with_capacity(3, 6, 200_000);
        let id = linalg::identity(3);
        assert!(highest_weight_check(&id, 2, limits).unwrap() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let u = random_unitary(&mut rng, 3);
        assert!(highest_weight_check(&u, 2, limits).unwrap() < 1e-10);

        let diag = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(2.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
        ]));
        assert!(highest_weight_check(&diag, 1, limits).unwrap() < 1e-9);
    }

    #[test]
    fn tail_bound_dominates_actual_tail() {
        let z = zeta_star();
        let limits = SectorLimits::with_capacity(3, 30, 4_000_000);
        let dist = oracle_distribution(&z, limits).unwrap();
        for m in [5u32, 10, 20] {
            let bound = tail_bound(&z, m).unwrap();
            let actual: f64 = dist.iter().filter(|(j, _)| *j > m).map(|(_, p)| p).sum();
            assert!(bound >= actual - 1e-12, "m = {m}");
        }
    }

    #[test]
    fn suggest_j_max_is_monotone_in_tolerance() {
        let z = zeta_star();
        let limits = SectorLimits::with_capacity(3, 100, 50_000_000);
        let loose = suggest_j_max(&[&z], 1e-6, limits).unwrap();
        let tight = suggest_j_max(&[&z], 1e-12, limits).unwrap();
        assert!(tight > loose);
    }
}
