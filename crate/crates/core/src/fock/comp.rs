//! Weak compositions of a quantum total into N mode occupations, with exact
//! ranking. A sector of the 2N-oscillator Fock space factorizes as
//! (A-compositions) x (B-compositions); all ladder operators act on one
//! factor at a time, so the transition tables here are built on the small
//! factor spaces, never on the product.

/// Binomial table up to `rows` inclusive, `C(i, j)` saturating at u64.
#[derive(Debug, Clone)]
pub struct Binomials {
    rows: usize,
    table: Vec<u64>,
}

impl Binomials {
    pub fn new(rows: usize) -> Self {
        let mut table = vec![0u64; (rows + 1) * (rows + 1)];
        for i in 0..=rows {
            table[i * (rows + 1)] = 1;
            for j in 1..=i {
                let above = table[(i - 1) * (rows + 1) + j];
                let left = table[(i - 1) * (rows + 1) + j - 1];
                table[i * (rows + 1) + j] = above.saturating_add(left);
            }
        }
        Binomials { rows, table }
    }

    pub fn get(&self, n: usize, k: usize) -> u64 {
        if k > n || n > self.rows {
            return 0;
        }
        self.table[n * (self.rows + 1) + k]
    }
}

/// Number of weak compositions of `q` into `n` parts: `C(q + n - 1, n - 1)`.
pub fn comp_dim(binomials: &Binomials, n: usize, q: u32) -> u64 {
    if n == 0 {
        return u64::from(q == 0);
    }
    binomials.get(q as usize + n - 1, n - 1)
}

/// One factor space: compositions of `q` quanta into `n` modes, ordered by
/// the first mode ascending, then recursively. Rank/unrank are exact.
#[derive(Debug, Clone)]
pub struct FactorSpace {
    pub n: usize,
    pub q: u32,
    pub dim: usize,
}

impl FactorSpace {
    pub fn new(binomials: &Binomials, n: usize, q: u32) -> Self {
        FactorSpace {
            n,
            q,
            dim: comp_dim(binomials, n, q) as usize,
        }
    }

    pub fn rank(&self, binomials: &Binomials, occ: &[u32]) -> usize {
        debug_assert_eq!(occ.len(), self.n);
        let mut rank = 0u64;
        let mut remaining = self.q;
        for (pos, &c) in occ.iter().enumerate() {
            let tail_modes = self.n - pos - 1;
            for v in 0..c {
                rank += comp_dim(binomials, tail_modes, remaining - v);
            }
            remaining -= c;
        }
        rank as usize
    }

    pub fn unrank(&self, binomials: &Binomials, mut rank: u64, occ: &mut [u32]) {
        let mut remaining = self.q;
        for pos in 0..self.n {
            let tail_modes = self.n - pos - 1;
            let mut v = 0u32;
            loop {
                let below = comp_dim(binomials, tail_modes, remaining - v);
                if rank < below {
                    break;
                }
                rank -= below;
                v += 1;
            }
            occ[pos] = v;
            remaining -= v;
        }
    }

    /// Visits compositions in rank order, passing `(rank, occ)`.
    pub fn for_each(&self, binomials: &Binomials, mut f: impl FnMut(usize, &[u32])) {
        let mut occ = vec![0u32; self.n];
        for rank in 0..self.dim {
            self.unrank(binomials, rank as u64, &mut occ);
            f(rank, &occ);
        }
    }
}

/// Raising map `a+_leg` on a factor space: `tables[leg][rank]` is the target
/// rank in the `q + 1` space and the amplitude `sqrt(occ_leg + 1)`.
pub fn raise_tables(binomials: &Binomials, space: &FactorSpace) -> Vec<Vec<(u32, f64)>> {
    let up = FactorSpace::new(binomials, space.n, space.q + 1);
    let mut tables = vec![Vec::with_capacity(space.dim); space.n];
    let mut occ = vec![0u32; space.n];
    for rank in 0..space.dim {
        space.unrank(binomials, rank as u64, &mut occ);
        for leg in 0..space.n {
            occ[leg] += 1;
            let target = up.rank(binomials, &occ) as u32;
            tables[leg].push((target, f64::from(occ[leg]).sqrt()));
            occ[leg] -= 1;
        }
    }
    tables
}

/// Lowering map `a_leg`: target rank in the `q - 1` space with amplitude
/// `sqrt(occ_leg)`, or `None` on an empty mode.
pub fn lower_tables(binomials: &Binomials, space: &FactorSpace) -> Vec<Vec<Option<(u32, f64)>>> {
    let mut tables = vec![Vec::with_capacity(space.dim); space.n];
    if space.q == 0 {
        for table in &mut tables {
            table.resize(space.dim, None);
        }
        return tables;
    }
    let down = FactorSpace::new(binomials, space.n, space.q - 1);
    let mut occ = vec![0u32; space.n];
    for rank in 0..space.dim {
        space.unrank(binomials, rank as u64, &mut occ);
        for leg in 0..space.n {
            if occ[leg] == 0 {
                tables[leg].push(None);
                continue;
            }
            let amp = f64::from(occ[leg]).sqrt();
            occ[leg] -= 1;
            let target = down.rank(binomials, &occ) as u32;
            tables[leg].push(Some((target, amp)));
            occ[leg] += 1;
        }
    }
    tables
}

/// Number-conserving hop `a+_a a_b` within one factor space:
/// `tables[a][b][rank]` is the target rank and `sqrt(occ_b) sqrt(occ_a + 1)`
/// after the removal (so `a == b` gives the plain occupation number).
pub fn move_tables(
    binomials: &Binomials,
    space: &FactorSpace,
) -> Vec<Vec<Vec<Option<(u32, f64)>>>> {
    let mut tables = vec![vec![Vec::with_capacity(space.dim); space.n]; space.n];
    let mut occ = vec![0u32; space.n];
    for rank in 0..space.dim {
        space.unrank(binomials, rank as u64, &mut occ);
        for a in 0..space.n {
            for b in 0..space.n {
                if occ[b] == 0 {
                    tables[a][b].push(None);
                    continue;
                }
                let amp_lower = f64::from(occ[b]).sqrt();
                occ[b] -= 1;
                let amp_raise = f64::from(occ[a] + 1).sqrt();
                occ[a] += 1;
                let target = space.rank(binomials, &occ) as u32;
                occ[a] -= 1;
                occ[b] += 1;
                tables[a][b].push(Some((target, amp_lower * amp_raise)));
            }
        }
    }
    tables
}
