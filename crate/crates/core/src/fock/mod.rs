//! Independent truncated Fock-space oracle.
//!
//! The 2N oscillators `(A_a, B_a)` are truncated by total quanta
//! `sum(n_A + n_B) <= 2 j_max`. Each sector with fixed per-species totals
//! `(q_A, q_B)` factorizes into two small composition spaces, so states are
//! stored sector-blocked and operators act through factor-space tables
//! ([`comp`]). Small bases can be materialized explicitly with sparse
//! operators; the coherent-state validations stream sector by sector and
//! never hold more than a few blocks ([`stream`]).

mod comp;
mod stream;

pub use stream::{
    annihilator_check, apply_group_element, coherent_state, fixed_area_state,
    highest_weight_check, oracle_area_moments, oracle_cross_elements, oracle_distribution,
    oracle_overlap, su2_invariance_residual, suggest_j_max, suggest_j_max_moments, tail_bound,
    AreaMoments, OracleElements, SectorLimits, StateVector,
};

use std::collections::HashMap;

use num_complex::Complex64;

use crate::linalg::CMatrix;
use crate::{Error, Result};

use comp::{comp_dim, lower_tables, move_tables, raise_tables, Binomials, FactorSpace};

/// Default cap on materialized state counts; `COHERENT_MAX_DIM` overrides.
pub const DEFAULT_CAPACITY: u64 = 5_000_000;

pub(crate) fn capacity_from_env() -> u64 {
    std::env::var("COHERENT_MAX_DIM")
        .ok()
        .and_then(|s| s.parse::<f64>().ok())
        .map(|v| v as u64)
        .unwrap_or(DEFAULT_CAPACITY)
}

/// One `(q_A, q_B)` sector of the truncated space.
#[derive(Debug, Clone, Copy)]
pub struct Sector {
    pub q_a: u32,
    pub q_b: u32,
    pub dim_a: usize,
    pub dim_b: usize,
    pub offset: u64,
}

impl Sector {
    pub fn dim(&self) -> u64 {
        self.dim_a as u64 * self.dim_b as u64
    }
}

/// Explicitly enumerated truncated basis: every occupation vector
/// `(n_A, n_B)` with total quanta at most `2 j_max`, grouped by grade
/// (total quanta) and sector. Use this for exact operator algebra on small
/// cutoffs; the coherent-state machinery streams instead.
#[derive(Debug, Clone)]
pub struct FockBasis {
    pub n_legs: usize,
    pub j_max: u32,
    pub capacity: u64,
    sectors: Vec<Sector>,
    total_states: u64,
    binomials: Binomials,
}

impl FockBasis {
    pub fn new(n_legs: usize, j_max: u32) -> Result<Self> {
        Self::with_capacity(n_legs, j_max, capacity_from_env())
    }

    pub fn with_capacity(n_legs: usize, j_max: u32, capacity: u64) -> Result<Self> {
        assert!(n_legs >= 1, "need at least one leg");
        let binomials = Binomials::new(2 * j_max as usize + n_legs + 2);
        let mut sectors = Vec::new();
        let mut offset = 0u64;
        for grade in 0..=(2 * j_max) {
            for q_a in 0..=grade {
                let q_b = grade - q_a;
                let dim_a = comp_dim(&binomials, n_legs, q_a) as usize;
                let dim_b = comp_dim(&binomials, n_legs, q_b) as usize;
                let sector = Sector {
                    q_a,
                    q_b,
                    dim_a,
                    dim_b,
                    offset,
                };
                offset = offset
                    .checked_add(sector.dim())
                    .ok_or(Error::CapacityExceeded {
                        needed: u64::MAX,
                        capacity,
                    })?;
                sectors.push(sector);
            }
        }
        if offset > capacity {
            return Err(Error::CapacityExceeded {
                needed: offset,
                capacity,
            });
        }
        Ok(FockBasis {
            n_legs,
            j_max,
            capacity,
            sectors,
            total_states: offset,
            binomials,
        })
    }

    pub fn total_states(&self) -> u64 {
        self.total_states
    }

    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    pub fn limits(&self) -> SectorLimits {
        SectorLimits {
            n_legs: self.n_legs,
            j_max: self.j_max,
            capacity: self.capacity,
        }
    }

    fn sector_index(&self, q_a: u32, q_b: u32) -> Option<usize> {
        let grade = q_a + q_b;
        if grade > 2 * self.j_max {
            return None;
        }
        // Sectors are stored grade by grade; grade g starts at index
        // g(g+1)/2 and holds g+1 sectors ordered by q_a.
        let base = (grade as usize * (grade as usize + 1)) / 2;
        Some(base + q_a as usize)
    }

    /// Global index of an occupation pair, if inside the cutoff.
    pub fn index_of(&self, occ_a: &[u32], occ_b: &[u32]) -> Option<u64> {
        let q_a: u32 = occ_a.iter().sum();
        let q_b: u32 = occ_b.iter().sum();
        let sector = self.sectors[self.sector_index(q_a, q_b)?];
        let space_a = FactorSpace::new(&self.binomials, self.n_legs, q_a);
        let space_b = FactorSpace::new(&self.binomials, self.n_legs, q_b);
        let ra = space_a.rank(&self.binomials, occ_a) as u64;
        let rb = space_b.rank(&self.binomials, occ_b) as u64;
        Some(sector.offset + ra * sector.dim_b as u64 + rb)
    }

    /// Occupation pair at a global index.
    pub fn occupation_at(&self, index: u64) -> (Vec<u32>, Vec<u32>) {
        let sector_pos = match self
            .sectors
            .binary_search_by(|s| s.offset.cmp(&index))
        {
            Ok(pos) => pos,
            Err(pos) => pos - 1,
        };
        let sector = self.sectors[sector_pos];
        let local = index - sector.offset;
        let ra = local / sector.dim_b as u64;
        let rb = local % sector.dim_b as u64;
        let space_a = FactorSpace::new(&self.binomials, self.n_legs, sector.q_a);
        let space_b = FactorSpace::new(&self.binomials, self.n_legs, sector.q_b);
        let mut occ_a = vec![0u32; self.n_legs];
        let mut occ_b = vec![0u32; self.n_legs];
        space_a.unrank(&self.binomials, ra, &mut occ_a);
        space_b.unrank(&self.binomials, rb, &mut occ_b);
        (occ_a, occ_b)
    }
}

/// Labels for the generator map. Leg indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorLabel {
    E(usize, usize),
    F(usize, usize),
    Ftilde(usize, usize),
    Area(usize),
    Jz,
    Jplus,
    Jminus,
}

/// Column-major sparse operator on an explicit basis.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pub dim: usize,
    cols: Vec<Vec<(u32, Complex64)>>,
}

impl SparseOperator {
    fn zeros(dim: usize) -> Self {
        SparseOperator {
            dim,
            cols: vec![Vec::new(); dim],
        }
    }

    fn push(&mut self, row: u32, col: u32, value: Complex64) {
        if value != Complex64::new(0.0, 0.0) {
            self.cols[col as usize].push((row, value));
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (u32, u32, Complex64)> + '_ {
        self.cols
            .iter()
            .enumerate()
            .flat_map(|(c, col)| col.iter().map(move |&(r, v)| (r, c as u32, v)))
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim];
        for (c, col) in self.cols.iter().enumerate() {
            let amp = v[c];
            if amp == Complex64::new(0.0, 0.0) {
                continue;
            }
            for &(r, val) in col {
                out[r as usize] += val * amp;
            }
        }
        out
    }

    /// `self * other` (apply `other` first).
    pub fn compose(&self, other: &Self) -> Self {
        let mut out = SparseOperator::zeros(self.dim);
        for (c, col) in other.cols.iter().enumerate() {
            let mut acc: HashMap<u32, Complex64> = HashMap::new();
            for &(mid, v1) in col {
                for &(r, v2) in &self.cols[mid as usize] {
                    *acc.entry(r).or_insert(Complex64::new(0.0, 0.0)) += v2 * v1;
                }
            }
            let mut entries: Vec<(u32, Complex64)> = acc.into_iter().collect();
            entries.sort_by_key(|&(r, _)| r);
            out.cols[c] = entries;
        }
        out
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.compose(other).sub(&other.compose(self))
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = SparseOperator::zeros(self.dim);
        for c in 0..self.dim {
            let mut acc: HashMap<u32, Complex64> = HashMap::new();
            for &(r, v) in &self.cols[c] {
                *acc.entry(r).or_insert(Complex64::new(0.0, 0.0)) += v;
            }
            for &(r, v) in &other.cols[c] {
                *acc.entry(r).or_insert(Complex64::new(0.0, 0.0)) -= v;
            }
            let mut entries: Vec<(u32, Complex64)> =
                acc.into_iter().filter(|(_, v)| v.norm() > 0.0).collect();
            entries.sort_by_key(|&(r, _)| r);
            out.cols[c] = entries;
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for col in &mut out.cols {
            for entry in col {
                entry.1 *= s;
            }
        }
        out
    }

    /// Largest entry magnitude over the given columns.
    pub fn max_abs_on_columns(&self, keep: &[bool]) -> f64 {
        let mut worst: f64 = 0.0;
        for (c, col) in self.cols.iter().enumerate() {
            if !keep[c] {
                continue;
            }
            for &(_, v) in col {
                worst = worst.max(v.norm());
            }
        }
        worst
    }
}

/// Builds sparse matrices for every `E_ab`, `F_ab`, `Ftilde_ab`, the area
/// operators and the total angular momentum. `Ftilde` entries that would
/// leave the cutoff are dropped (that is the truncation).
pub fn build_generators(basis: &FockBasis) -> HashMap<OperatorLabel, SparseOperator> {
    let n = basis.n_legs;
    let dim = basis.total_states as usize;
    let mut ops: HashMap<OperatorLabel, SparseOperator> = HashMap::new();
    for a in 0..n {
        for b in 0..n {
            ops.insert(OperatorLabel::E(a, b), SparseOperator::zeros(dim));
            ops.insert(OperatorLabel::F(a, b), SparseOperator::zeros(dim));
            ops.insert(OperatorLabel::Ftilde(a, b), SparseOperator::zeros(dim));
        }
        ops.insert(OperatorLabel::Area(a), SparseOperator::zeros(dim));
    }
    ops.insert(OperatorLabel::Jz, SparseOperator::zeros(dim));
    ops.insert(OperatorLabel::Jplus, SparseOperator::zeros(dim));
    ops.insert(OperatorLabel::Jminus, SparseOperator::zeros(dim));

    let binom = &basis.binomials;
    for sector in &basis.sectors {
        let space_a = FactorSpace::new(binom, n, sector.q_a);
        let space_b = FactorSpace::new(binom, n, sector.q_b);
        let move_a = move_tables(binom, &space_a);
        let move_b = move_tables(binom, &space_b);
        let raise_a = raise_tables(binom, &space_a);
        let raise_b = raise_tables(binom, &space_b);
        let lower_a = lower_tables(binom, &space_a);
        let lower_b = lower_tables(binom, &space_b);

        let up_sector = basis
            .sector_index(sector.q_a + 1, sector.q_b + 1)
            .map(|i| basis.sectors[i]);
        let down_sector = if sector.q_a > 0 && sector.q_b > 0 {
            basis
                .sector_index(sector.q_a - 1, sector.q_b - 1)
                .map(|i| basis.sectors[i])
        } else {
            None
        };
        let jp_sector = if sector.q_b > 0 {
            basis
                .sector_index(sector.q_a + 1, sector.q_b - 1)
                .map(|i| basis.sectors[i])
        } else {
            None
        };
        let jm_sector = if sector.q_a > 0 {
            basis
                .sector_index(sector.q_a - 1, sector.q_b + 1)
                .map(|i| basis.sectors[i])
        } else {
            None
        };

        let d_b = sector.dim_b as u64;
        let mut occ_a = vec![0u32; n];
        for ra in 0..sector.dim_a {
            space_a.unrank(binom, ra as u64, &mut occ_a);
            let mut occ_b = vec![0u32; n];
            for rb in 0..sector.dim_b {
                space_b.unrank(binom, rb as u64, &mut occ_b);
                let col = (sector.offset + ra as u64 * d_b + rb as u64) as u32;

                // Diagonal pieces.
                for a in 0..n {
                    let quanta = (occ_a[a] + occ_b[a]) as f64;
                    ops.get_mut(&OperatorLabel::Area(a)).unwrap().push(
                        col,
                        col,
                        Complex64::new(0.5 * quanta, 0.0),
                    );
                }
                let jz = 0.5 * (sector.q_a as f64 - sector.q_b as f64);
                ops.get_mut(&OperatorLabel::Jz)
                    .unwrap()
                    .push(col, col, Complex64::new(jz, 0.0));

                for a in 0..n {
                    for b in 0..n {
                        // E_ab = A+_a A_b + B+_a B_b + delta_ab.
                        let e = ops.get_mut(&OperatorLabel::E(a, b)).unwrap();
                        if let Some((ta, amp)) = move_a[a][b][ra] {
                            let row = sector.offset + ta as u64 * d_b + rb as u64;
                            e.push(row as u32, col, Complex64::new(amp, 0.0));
                        }
                        if let Some((tb, amp)) = move_b[a][b][rb] {
                            let row = sector.offset + ra as u64 * d_b + tb as u64;
                            e.push(row as u32, col, Complex64::new(amp, 0.0));
                        }
                        if a == b {
                            e.push(col, col, Complex64::new(1.0, 0.0));
                        }

                        // F_ab = B_a A_b - A_a B_b: lowers both species.
                        if let Some(target) = down_sector {
                            let f = ops.get_mut(&OperatorLabel::F(a, b)).unwrap();
                            if let (Some((ta, aa)), Some((tb, ab))) =
                                (lower_a[b][ra], lower_b[a][rb])
                            {
                                let row =
                                    target.offset + ta as u64 * target.dim_b as u64 + tb as u64;
                                f.push(row as u32, col, Complex64::new(aa * ab, 0.0));
                            }
                            if let (Some((ta, aa)), Some((tb, ab))) =
                                (lower_a[a][ra], lower_b[b][rb])
                            {
                                let row =
                                    target.offset + ta as u64 * target.dim_b as u64 + tb as u64;
                                f.push(row as u32, col, Complex64::new(-aa * ab, 0.0));
                            }
                        }

                        // Ftilde_ab = B+_a A+_b - A+_b... mirror raising;
                        // dropped (truncated) above the cutoff.
                        if let Some(target) = up_sector {
                            let ft = ops.get_mut(&OperatorLabel::Ftilde(a, b)).unwrap();
                            let (ta, aa) = raise_a[b][ra];
                            let (tb, ab) = raise_b[a][rb];
                            let row = target.offset + ta as u64 * target.dim_b as u64 + tb as u64;
                            ft.push(row as u32, col, Complex64::new(aa * ab, 0.0));
                            let (ta, aa) = raise_a[a][ra];
                            let (tb, ab) = raise_b[b][rb];
                            let row = target.offset + ta as u64 * target.dim_b as u64 + tb as u64;
                            ft.push(row as u32, col, Complex64::new(-aa * ab, 0.0));
                        }

                        // J+ = sum_a A+_a B_a, J- adjoint (only build once).
                        if a == b {
                            if let Some(target) = jp_sector {
                                if let Some((tb, ab)) = lower_b[a][rb] {
                                    let (ta, aa) = raise_a[a][ra];
                                    let row = target.offset
                                        + ta as u64 * target.dim_b as u64
                                        + tb as u64;
                                    ops.get_mut(&OperatorLabel::Jplus).unwrap().push(
                                        row as u32,
                                        col,
                                        Complex64::new(aa * ab, 0.0),
                                    );
                                }
                            }
                            if let Some(target) = jm_sector {
                                if let Some((ta, aa)) = lower_a[a][ra] {
                                    let (tb, ab) = raise_b[a][rb];
                                    let row = target.offset
                                        + ta as u64 * target.dim_b as u64
                                        + tb as u64;
                                    ops.get_mut(&OperatorLabel::Jminus).unwrap().push(
                                        row as u32,
                                        col,
                                        Complex64::new(aa * ab, 0.0),
                                    );
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    ops
}

/// Max residual of all so*(2N) commutation relations on interior states
/// (total quanta at most `2 j_max - 2`), where the truncation cannot bite.
pub fn commutator_check(basis: &FockBasis) -> Result<f64> {
    if basis.j_max < 2 {
        return Err(Error::IncompatibleShape {
            what: "commutator check needs j_max >= 2".into(),
        });
    }
    let n = basis.n_legs;
    let ops = build_generators(basis);
    let e = |a: usize, b: usize| &ops[&OperatorLabel::E(a, b)];
    let f = |a: usize, b: usize| &ops[&OperatorLabel::F(a, b)];
    let ft = |a: usize, b: usize| &ops[&OperatorLabel::Ftilde(a, b)];

    // Interior columns.
    let mut keep = vec![false; basis.total_states as usize];
    for sector in &basis.sectors {
        if sector.q_a + sector.q_b <= 2 * basis.j_max - 2 {
            for i in sector.offset..sector.offset + sector.dim() {
                keep[i as usize] = true;
            }
        }
    }

    let one = Complex64::new(1.0, 0.0);
    let mut worst: f64 = 0.0;
    let mut check = |lhs: SparseOperator, rhs: SparseOperator| {
        worst = worst.max(lhs.sub(&rhs).max_abs_on_columns(&keep));
    };

    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for d in 0..n {
                    let delta =
                        |i: usize, j: usize| if i == j { one } else { Complex64::new(0.0, 0.0) };

                    check(
                        e(a, b).commutator(e(c, d)),
                        e(a, d).scale(delta(c, b)).sub(&e(c, b).scale(delta(a, d))),
                    );
                    check(
                        e(a, b).commutator(ft(c, d)),
                        ft(a, d).scale(delta(b, c)).sub(&ft(a, c).scale(delta(b, d))),
                    );
                    check(
                        e(a, b).commutator(f(c, d)),
                        f(b, c).scale(delta(a, d)).sub(&f(b, d).scale(delta(a, c))),
                    );
                    let rhs = e(c, a)
                        .scale(delta(d, b))
                        .sub(&e(d, a).scale(delta(c, b)))
                        .sub(&e(c, b).scale(delta(d, a)))
                        .sub(&e(d, b).scale(-delta(c, a)));
                    check(f(a, b).commutator(ft(c, d)), rhs);
                    check(
                        f(a, b).commutator(f(c, d)),
                        SparseOperator::zeros(basis.total_states as usize),
                    );
                    check(
                        ft(a, b).commutator(ft(c, d)),
                        SparseOperator::zeros(basis.total_states as usize),
                    );
                }
            }
        }
    }
    Ok(worst)
}

/// Dimension of the SU(2)-invariant subspace at total area `j`: the joint
/// null space of `J+` and `J-` inside the balanced sector, computed as the
/// zero eigenspace of `J+^dag J+ + J-^dag J-`.
pub fn intertwiner_dimension(n_legs: usize, j: u32) -> Result<u64> {
    let binom = Binomials::new(2 * j as usize + n_legs + 4);
    let space = FactorSpace::new(&binom, n_legs, j);
    let dim = space.dim * space.dim;
    if dim == 0 {
        return Ok(0);
    }
    let raise = raise_tables(&binom, &space);
    let lower = lower_tables(&binom, &space);
    let up_dim = comp_dim(&binom, n_legs, j + 1) as usize;
    let down_dim = if j > 0 {
        comp_dim(&binom, n_legs, j - 1) as usize
    } else {
        0
    };

    // J+ maps (j, j) -> (j+1, j-1); J- maps (j, j) -> (j-1, j+1).
    let mut j_plus = CMatrix::zeros(up_dim * down_dim.max(1), dim);
    let mut j_minus = CMatrix::zeros(down_dim.max(1) * up_dim, dim);
    if j > 0 {
        for ra in 0..space.dim {
            for rb in 0..space.dim {
                let col = ra * space.dim + rb;
                for leg in 0..n_legs {
                    if let Some((tb, ab)) = lower[leg][rb] {
                        let (ta, aa) = raise[leg][ra];
                        j_plus[(ta as usize * down_dim + tb as usize, col)] +=
                            Complex64::new(aa * ab, 0.0);
                    }
                    if let Some((ta, aa)) = lower[leg][ra] {
                        let (tb, ab) = raise[leg][rb];
                        j_minus[(ta as usize * up_dim + tb as usize, col)] +=
                            Complex64::new(aa * ab, 0.0);
                    }
                }
            }
        }
    }
    let gram = j_plus.adjoint() * &j_plus + j_minus.adjoint() * &j_minus;
    let (vals, _) = crate::linalg::hermitian_eigen_desc(&gram)?;
    Ok(vals.iter().filter(|&&v| v.abs() < 1e-8).count() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_counts_match_stars_and_bars() {
        assert_eq!(FockBasis::new(1, 0).unwrap().total_states(), 1);
        assert_eq!(FockBasis::new(1, 1).unwrap().total_states(), 6);
        assert_eq!(FockBasis::new(2, 1).unwrap().total_states(), 15);
        assert_eq!(FockBasis::new(3, 3).unwrap().total_states(), 924);
    }

    #[test]
    fn capacity_guard_trips() {
        assert!(matches!(
            FockBasis::with_capacity(3, 40, 5_000_000),
            Err(Error::CapacityExceeded { .. })
        ));
    }

    #[test]
    fn index_round_trip() {
        let basis = FockBasis::new(2, 2).unwrap();
        for idx in 0..basis.total_states() {
            let (occ_a, occ_b) = basis.occupation_at(idx);
            assert_eq!(basis.index_of(&occ_a, &occ_b), Some(idx));
        }
        assert_eq!(basis.index_of(&[5, 0], &[0, 0]), None);
    }

    #[test]
    fn vacuum_expectations() {
        let basis = FockBasis::new(2, 2).unwrap();
        let ops = build_generators(&basis);
        let mut vacuum = vec![Complex64::new(0.0, 0.0); basis.total_states() as usize];
        vacuum[0] = Complex64::new(1.0, 0.0);
        // <0|E_aa|0> = 1 (identity shift).
        for a in 0..2 {
            let image = ops[&OperatorLabel::E(a, a)].apply(&vacuum);
            assert!((image[0].re - 1.0).abs() < 1e-15);
        }
        // F_ab |0> = 0.
        for a in 0..2 {
            for b in 0..2 {
                let image = ops[&OperatorLabel::F(a, b)].apply(&vacuum);
                assert!(image.iter().all(|z| z.norm() < 1e-15));
            }
        }
    }

    #[test]
    fn commutators_close_on_interior() {
        let basis = FockBasis::new(2, 3).unwrap();
        assert!(commutator_check(&basis).unwrap() <= 1e-12);
    }

    #[test]
    fn intertwiner_dimensions_match_formula() {
        for n in 2..=4u32 {
            for j in 0..=4u32 {
                let expected = crate::un::dim_fixed_area(n, j).unwrap();
                let counted = intertwiner_dimension(n as usize, j).unwrap();
                assert_eq!(counted, expected, "n = {n}, j = {j}");
            }
        }
    }
}
