//! Non-cyclic block tridiagonal and block penta-diagonal operators with a
//! factor-once, solve-many block elimination.
//!
//! Elimination runs strictly top to bottom with no pivoting across block
//! rows; pivoting happens only inside each pivot block's LU. After row `k` is
//! processed it reads
//!
//! ```text
//! x_k + G_k x_{k+1} + H_k x_{k+2} = y_k
//! ```
//!
//! where `G_k` and `H_k` are the updated super-bands. Row `k` of the source
//! is reduced by first removing its `E_k` coupling with row `k-2`, then the
//! (modified) `A_k` coupling with row `k-1`, so fill never leaves the two
//! super-bands.

use crate::block::{lu_factor, mul, sub_mul_assign, Block, BlockLU, BlockRhs, OpCounts, SmallVec};
use crate::error::{Error, Result};
use crate::layout::BlockOperator;

/// Block tridiagonal matrix: `sub` holds `A_2..A_n`, `diag` holds `B_1..B_n`,
/// `sup` holds `C_1..C_{n-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTriMatrix {
    m: usize,
    sub: Vec<Block>,
    diag: Vec<Block>,
    sup: Vec<Block>,
}

impl BlockTriMatrix {
    pub fn new(sub: Vec<Block>, diag: Vec<Block>, sup: Vec<Block>) -> Result<Self> {
        let n = diag.len();
        if n < 2 {
            return Err(Error::dim(format!("block tridiagonal needs n >= 2, got {n}")));
        }
        check_len("sub", &sub, n - 1)?;
        check_len("sup", &sup, n - 1)?;
        let m = shared_order([&sub, &diag, &sup])?;
        Ok(BlockTriMatrix { m, sub, diag, sup })
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn sub(&self) -> &[Block] {
        &self.sub
    }

    pub fn diag(&self) -> &[Block] {
        &self.diag
    }

    pub fn sup(&self) -> &[Block] {
        &self.sup
    }

    pub fn factor(&self) -> Result<BandedFactorization> {
        factor_counted(&self.bands(), &mut OpCounts::default())
    }

    pub(crate) fn bands(&self) -> Bands<'_> {
        Bands {
            m: self.m,
            subsub: None,
            sub: &self.sub,
            diag: &self.diag,
            sup: &self.sup,
            supsup: None,
        }
    }
}

impl BlockOperator for BlockTriMatrix {
    fn n(&self) -> usize {
        self.diag.len()
    }
    fn m(&self) -> usize {
        self.m
    }
    fn row_blocks(&self, k: usize) -> Vec<(usize, &Block)> {
        self.bands().row_blocks(k)
    }
}

/// Block penta-diagonal matrix: `subsub` holds `E_3..E_n`, `sub` `A_2..A_n`,
/// `diag` `B_1..B_n`, `sup` `C_1..C_{n-1}`, `supsup` `D_1..D_{n-2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPentaMatrix {
    m: usize,
    subsub: Vec<Block>,
    sub: Vec<Block>,
    diag: Vec<Block>,
    sup: Vec<Block>,
    supsup: Vec<Block>,
}

impl BlockPentaMatrix {
    pub fn new(
        subsub: Vec<Block>,
        sub: Vec<Block>,
        diag: Vec<Block>,
        sup: Vec<Block>,
        supsup: Vec<Block>,
    ) -> Result<Self> {
        let n = diag.len();
        if n < 3 {
            return Err(Error::dim(format!("block penta-diagonal needs n >= 3, got {n}")));
        }
        check_len("subsub", &subsub, n - 2)?;
        check_len("sub", &sub, n - 1)?;
        check_len("sup", &sup, n - 1)?;
        check_len("supsup", &supsup, n - 2)?;
        let m = shared_order([&subsub, &sub, &diag, &sup, &supsup])?;
        Ok(BlockPentaMatrix {
            m,
            subsub,
            sub,
            diag,
            sup,
            supsup,
        })
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn subsub(&self) -> &[Block] {
        &self.subsub
    }

    pub fn sub(&self) -> &[Block] {
        &self.sub
    }

    pub fn diag(&self) -> &[Block] {
        &self.diag
    }

    pub fn sup(&self) -> &[Block] {
        &self.sup
    }

    pub fn supsup(&self) -> &[Block] {
        &self.supsup
    }

    pub fn factor(&self) -> Result<BandedFactorization> {
        factor_counted(&self.bands(), &mut OpCounts::default())
    }

    pub(crate) fn bands(&self) -> Bands<'_> {
        Bands {
            m: self.m,
            subsub: Some(&self.subsub),
            sub: &self.sub,
            diag: &self.diag,
            sup: &self.sup,
            supsup: Some(&self.supsup),
        }
    }
}

impl BlockOperator for BlockPentaMatrix {
    fn n(&self) -> usize {
        self.diag.len()
    }
    fn m(&self) -> usize {
        self.m
    }
    fn row_blocks(&self, k: usize) -> Vec<(usize, &Block)> {
        self.bands().row_blocks(k)
    }
}

fn check_len(name: &str, v: &[Block], want: usize) -> Result<()> {
    if v.len() != want {
        return Err(Error::dim(format!("{name} band needs {want} blocks, got {}", v.len())));
    }
    Ok(())
}

fn shared_order<const N: usize>(bands: [&Vec<Block>; N]) -> Result<usize> {
    let m = bands
        .iter()
        .flat_map(|b| b.iter())
        .map(Block::order)
        .next()
        .ok_or_else(|| Error::dim("operator has no blocks"))?;
    if bands.iter().flat_map(|b| b.iter()).any(|b| b.order() != m) {
        return Err(Error::dim("all blocks must share the same order"));
    }
    Ok(m)
}

/// Borrowed band arrays, 0-based by block row. Outer bands are absent for
/// tridiagonal operators.
pub(crate) struct Bands<'a> {
    m: usize,
    subsub: Option<&'a [Block]>,
    sub: &'a [Block],
    diag: &'a [Block],
    sup: &'a [Block],
    supsup: Option<&'a [Block]>,
}

impl<'a> Bands<'a> {
    fn n(&self) -> usize {
        self.diag.len()
    }

    fn far_sub(&self, k: usize) -> Option<&'a Block> {
        if k >= 2 {
            self.subsub.map(|e| &e[k - 2])
        } else {
            None
        }
    }

    fn near_sub(&self, k: usize) -> Option<&'a Block> {
        (k >= 1).then(|| &self.sub[k - 1])
    }

    fn near_sup(&self, k: usize) -> Option<&'a Block> {
        self.sup.get(k)
    }

    fn far_sup(&self, k: usize) -> Option<&'a Block> {
        self.supsup.and_then(|d| d.get(k))
    }

    fn row_blocks(&self, k: usize) -> Vec<(usize, &'a Block)> {
        let mut v = Vec::with_capacity(5);
        if let Some(b) = self.far_sub(k) {
            v.push((k - 2, b));
        }
        if let Some(b) = self.near_sub(k) {
            v.push((k - 1, b));
        }
        v.push((k, &self.diag[k]));
        if let Some(b) = self.near_sup(k) {
            v.push((k + 1, b));
        }
        if let Some(b) = self.far_sup(k) {
            v.push((k + 2, b));
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandKind {
    Tri,
    Penta,
}

/// Reusable elimination of a block tri- or penta-diagonal operator.
#[derive(Debug, Clone)]
pub struct BandedFactorization {
    kind: BandKind,
    m: usize,
    /// Reduced pivot blocks, one per block row.
    pivots: Vec<Block>,
    pivot_lus: Vec<BlockLU>,
    /// `E_k` eliminated against row `k-2` (penta only, rows 3..n).
    far_multipliers: Vec<Option<Block>>,
    /// Modified `A_k` eliminated against row `k-1` (rows 2..n).
    near_multipliers: Vec<Option<Block>>,
    /// `G_k`, rows 1..n-1.
    upper_near: Vec<Block>,
    /// `H_k`, rows 1..n-2 (penta only).
    upper_far: Vec<Block>,
}

impl BandedFactorization {
    pub fn kind(&self) -> BandKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.pivots.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn pivots(&self) -> &[Block] {
        &self.pivots
    }

    pub fn pivot_lus(&self) -> &[BlockLU] {
        &self.pivot_lus
    }

    /// Eliminated sub-band blocks of row `k` (0-based): `(far, near)`.
    pub fn multipliers(&self, k: usize) -> (Option<&Block>, Option<&Block>) {
        (self.far_multipliers[k].as_ref(), self.near_multipliers[k].as_ref())
    }

    pub fn updated_near_band(&self) -> &[Block] {
        &self.upper_near
    }

    pub fn updated_far_band(&self) -> &[Block] {
        &self.upper_far
    }

    pub fn solve<R: BlockRhs>(&self, rhs: &[R]) -> Result<Vec<R>> {
        self.solve_counted(rhs, &mut OpCounts::default())
    }

    pub(crate) fn solve_counted<R: BlockRhs>(&self, rhs: &[R], counts: &mut OpCounts) -> Result<Vec<R>> {
        let n = self.n();
        if rhs.len() != n {
            return Err(Error::dim(format!("rhs has {} block rows, operator has {n}", rhs.len())));
        }
        if let Some(k) = rhs.iter().position(|r| r.order() != self.m) {
            return Err(Error::dim(format!(
                "rhs block row {} has {} rows, expected {}",
                k + 1,
                rhs[k].order(),
                self.m
            )));
        }
        if rhs.windows(2).any(|w| w[0].ncols() != w[1].ncols()) {
            return Err(Error::dim("rhs block rows disagree on column count"));
        }

        let mut y: Vec<R> = Vec::with_capacity(n);
        for k in 0..n {
            let mut r = rhs[k].clone();
            if let Some(e) = &self.far_multipliers[k] {
                sub_mul_assign(&mut r, e, &y[k - 2]);
                counts.matmuls += 1;
            }
            if let Some(a) = &self.near_multipliers[k] {
                sub_mul_assign(&mut r, a, &y[k - 1]);
                counts.matmuls += 1;
            }
            y.push(self.pivot_lus[k].solve_owned(r)?);
            counts.solves += 1;
        }

        for k in (0..n.saturating_sub(1)).rev() {
            let (head, tail) = y.split_at_mut(k + 1);
            let yk = &mut head[k];
            sub_mul_assign(yk, &self.upper_near[k], &tail[0]);
            counts.matmuls += 1;
            if let Some(h) = self.upper_far.get(k) {
                sub_mul_assign(yk, h, &tail[1]);
                counts.matmuls += 1;
            }
        }
        Ok(y)
    }
}

pub(crate) fn factor_counted(a: &Bands<'_>, counts: &mut OpCounts) -> Result<BandedFactorization> {
    let n = a.n();
    let kind = if a.subsub.is_some() { BandKind::Penta } else { BandKind::Tri };
    let mut pivots = Vec::with_capacity(n);
    let mut pivot_lus = Vec::with_capacity(n);
    let mut far_multipliers = Vec::with_capacity(n);
    let mut near_multipliers = Vec::with_capacity(n);
    let mut upper_near: Vec<Block> = Vec::with_capacity(n.saturating_sub(1));
    let mut upper_far: Vec<Block> = Vec::with_capacity(n.saturating_sub(2));

    for k in 0..n {
        let far = a.far_sub(k).cloned();
        let mut near = a.near_sub(k).cloned();
        let mut pivot = a.diag[k].clone();
        let mut coupling = a.near_sup(k).cloned();

        if let Some(e) = &far {
            let near = near.as_mut().expect("row with a far sub-band has a near one");
            sub_mul_assign(near, e, &upper_near[k - 2]);
            sub_mul_assign(&mut pivot, e, &upper_far[k - 2]);
            counts.matmuls += 2;
        }
        if let Some(a_mod) = &near {
            sub_mul_assign(&mut pivot, a_mod, &upper_near[k - 1]);
            counts.matmuls += 1;
            if let (Some(c), Some(h)) = (coupling.as_mut(), upper_far.get(k - 1)) {
                sub_mul_assign(c, a_mod, h);
                counts.matmuls += 1;
            }
        }

        let lu = lu_factor(&pivot).map_err(|_| Error::SingularPivot { row: k + 1 })?;
        counts.lus += 1;
        if let Some(c) = coupling.take() {
            upper_near.push(lu.solve_owned(c)?);
            counts.solves += 1;
        }
        if let Some(d) = a.far_sup(k) {
            upper_far.push(lu.solve(d)?);
            counts.solves += 1;
        }
        pivots.push(pivot);
        pivot_lus.push(lu);
        far_multipliers.push(far);
        near_multipliers.push(near);
    }

    Ok(BandedFactorization {
        kind,
        m: a.m,
        pivots,
        pivot_lus,
        far_multipliers,
        near_multipliers,
        upper_near,
        upper_far,
    })
}

/// Anything [`factor_banded`] accepts.
pub trait Banded: BlockOperator {
    fn factor(&self) -> Result<BandedFactorization>;
}

impl Banded for BlockTriMatrix {
    fn factor(&self) -> Result<BandedFactorization> {
        BlockTriMatrix::factor(self)
    }
}

impl Banded for BlockPentaMatrix {
    fn factor(&self) -> Result<BandedFactorization> {
        BlockPentaMatrix::factor(self)
    }
}

pub fn factor_banded<A: Banded>(a: &A) -> Result<BandedFactorization> {
    a.factor()
}

pub fn solve_banded<R: BlockRhs>(f: &BandedFactorization, rhs: &[R]) -> Result<Vec<R>> {
    f.solve(rhs)
}

pub fn apply_banded<A: Banded>(a: &A, x: &[SmallVec]) -> Result<Vec<SmallVec>> {
    a.matvec(x)
}

/// Re-derives the source bands from a factorization: `(row, col, block)`
/// for every band position. Used to audit the elimination.
pub fn reassemble_bands(f: &BandedFactorization) -> Vec<(usize, usize, Block)> {
    let n = f.n();
    let mut out = Vec::new();
    for k in 0..n {
        let p = &f.pivots[k];
        let far = f.far_multipliers[k].as_ref();
        let near = f.near_multipliers[k].as_ref();
        if let Some(e) = far {
            out.push((k, k - 2, e.clone()));
        }
        if let Some(a) = near {
            let mut orig = a.clone();
            if let Some(e) = far {
                orig = add(&orig, &mul(e, &f.upper_near[k - 2]));
            }
            out.push((k, k - 1, orig));
        }
        let mut diag = p.clone();
        if let Some(a) = near {
            diag = add(&diag, &mul(a, &f.upper_near[k - 1]));
        }
        if let Some(e) = far {
            diag = add(&diag, &mul(e, &f.upper_far[k - 2]));
        }
        out.push((k, k, diag));
        if let Some(g) = f.upper_near.get(k) {
            let mut c = mul(p, g);
            let h_prev = k.checked_sub(1).and_then(|j| f.upper_far.get(j));
            if let (Some(a), Some(h)) = (near, h_prev) {
                c = add(&c, &mul(a, h));
            }
            out.push((k, k + 1, c));
        }
        if let Some(h) = f.upper_far.get(k) {
            out.push((k, k + 2, mul(p, h)));
        }
    }
    out
}

fn add(a: &Block, b: &Block) -> Block {
    crate::block::axpy(1.0, a, b)
}
