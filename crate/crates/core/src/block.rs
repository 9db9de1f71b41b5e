//! Dense m×m block kernels.
//!
//! Every scalar floating-point matrix operation in the crate goes through this
//! module: block products, scaled sums, and the partially pivoted LU used for
//! pivot blocks and capacitance matrices. Blocks are small, so the kernels are
//! plain row-major loops.

use std::ops::AddAssign;

use crate::error::{Error, Result};

/// A dense square block of order `m`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    m: usize,
    data: Vec<f64>,
}

impl Block {
    pub fn zeros(m: usize) -> Self {
        assert!(m >= 1, "block order must be at least 1");
        Block {
            m,
            data: vec![0.0; m * m],
        }
    }

    pub fn identity(m: usize) -> Self {
        Self::scaled_identity(m, 1.0)
    }

    /// `s·I` of order `m`.
    pub fn scaled_identity(m: usize, s: f64) -> Self {
        let mut b = Self::zeros(m);
        for i in 0..m {
            b.data[i * m + i] = s;
        }
        b
    }

    /// Builds a block from `m²` row-major entries. Rejects wrong lengths and
    /// non-finite values.
    pub fn from_row_major(m: usize, data: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::dim("block order must be at least 1"));
        }
        if data.len() != m * m {
            return Err(Error::dim(format!(
                "block of order {m} needs {} entries, got {}",
                m * m,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("block entry {pos} is {}", data[pos])));
        }
        Ok(Block { m, data })
    }

    /// Builds a block from nested rows, e.g. `Block::from_rows(&[[1.0, 2.0], [3.0, 4.0]])`.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let m = rows.len();
        let mut data = Vec::with_capacity(m * m);
        for r in rows {
            let r = r.as_ref();
            if r.len() != m {
                return Err(Error::dim(format!("row of length {} in a block of order {m}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Self::from_row_major(m, data)
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.m + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.m)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    pub fn transpose(&self) -> Block {
        let m = self.m;
        let mut t = Block::zeros(m);
        for i in 0..m {
            for j in 0..m {
                t.data[j * m + i] = self.data[i * m + j];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Block {
        Block {
            m: self.m,
            data: self.data.iter().map(|v| s * v).collect(),
        }
    }
}

/// A vector of length `m`: one block row of a right-hand side or solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallVec {
    data: Vec<f64>,
}

impl SmallVec {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::dim("vector length must be at least 1"));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("vector entry {pos} is {}", data[pos])));
        }
        Ok(SmallVec { data })
    }

    pub fn zeros(m: usize) -> Self {
        SmallVec { data: vec![0.0; m] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// A rectangular `rows × cols` right-hand side (row-major) for multi-column solves.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Panel {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dim("panel must have at least one row and one column"));
        }
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "panel {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("panel entry".into()));
        }
        Ok(Panel { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Panel {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> SmallVec {
        SmallVec {
            data: (0..self.rows).map(|i| self.get(i, j)).collect(),
        }
    }
}

/// Anything a block can multiply or an LU can solve against: an `m`-row,
/// row-major array with one or more columns.
pub trait BlockRhs: Clone {
    /// Row count; must equal the order of the block acting on it.
    fn order(&self) -> usize;
    fn ncols(&self) -> usize;
    fn values(&self) -> &[f64];
    fn values_mut(&mut self) -> &mut [f64];
    fn zeros_like(&self) -> Self;
}

impl BlockRhs for SmallVec {
    fn order(&self) -> usize {
        self.data.len()
    }
    fn ncols(&self) -> usize {
        1
    }
    fn values(&self) -> &[f64] {
        &self.data
    }
    fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    fn zeros_like(&self) -> Self {
        SmallVec::zeros(self.data.len())
    }
}

impl BlockRhs for Block {
    fn order(&self) -> usize {
        self.m
    }
    fn ncols(&self) -> usize {
        self.m
    }
    fn values(&self) -> &[f64] {
        &self.data
    }
    fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    fn zeros_like(&self) -> Self {
        Block::zeros(self.m)
    }
}

impl BlockRhs for Panel {
    fn order(&self) -> usize {
        self.rows
    }
    fn ncols(&self) -> usize {
        self.cols
    }
    fn values(&self) -> &[f64] {
        &self.data
    }
    fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
    fn zeros_like(&self) -> Self {
        Panel::zeros(self.rows, self.cols)
    }
}

/// Per-solve tallies of block-level work.
///
/// `matmuls` counts every product of a block with a block, vector or panel;
/// `lus` counts block factorizations; `solves` counts LU applications.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub matmuls: u64,
    pub lus: u64,
    pub solves: u64,
}

impl AddAssign for OpCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.matmuls += rhs.matmuls;
        self.lus += rhs.lus;
        self.solves += rhs.solves;
    }
}

fn check_same_order(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::dim(format!("{what}: order {a} vs {b}")));
    }
    Ok(())
}

/// The product `a·b`.
pub fn block_matmul(a: &Block, b: &Block) -> Result<Block> {
    check_same_order(a.m, b.m, "block_matmul")?;
    Ok(mul(a, b))
}

/// `alpha·a + b`, entrywise.
pub fn block_axpy(alpha: f64, a: &Block, b: &Block) -> Result<Block> {
    check_same_order(a.m, b.m, "block_axpy")?;
    Ok(axpy(alpha, a, b))
}

pub(crate) fn axpy(alpha: f64, a: &Block, b: &Block) -> Block {
    Block {
        m: a.m,
        data: a.data.iter().zip(&b.data).map(|(x, y)| alpha * x + y).collect(),
    }
}

/// `a·x` for any right-hand-side shape. Caller guarantees matching order.
pub(crate) fn mul<R: BlockRhs>(a: &Block, x: &R) -> R {
    let mut out = x.zeros_like();
    let m = a.m;
    let k = x.ncols();
    let xv = x.values();
    let ov = out.values_mut();
    for i in 0..m {
        let arow = a.row(i);
        for j in 0..k {
            let mut s = 0.0;
            for (l, &ail) in arow.iter().enumerate() {
                s += ail * xv[l * k + j];
            }
            ov[i * k + j] = s;
        }
    }
    out
}

/// `out -= a·x`, entry by entry; the product entry is formed in full before
/// subtracting, so each column matches a single-vector run bit for bit.
pub(crate) fn sub_mul_assign<R: BlockRhs>(out: &mut R, a: &Block, x: &R) {
    let m = a.m;
    let k = x.ncols();
    let xv = x.values();
    let ov = out.values_mut();
    for i in 0..m {
        let arow = a.row(i);
        for j in 0..k {
            let mut s = 0.0;
            for (l, &ail) in arow.iter().enumerate() {
                s += ail * xv[l * k + j];
            }
            ov[i * k + j] -= s;
        }
    }
}

/// `out += a·x`.
pub(crate) fn add_mul_assign<R: BlockRhs>(out: &mut R, a: &Block, x: &R) {
    let m = a.m;
    let k = x.ncols();
    let xv = x.values();
    let ov = out.values_mut();
    for i in 0..m {
        let arow = a.row(i);
        for j in 0..k {
            let mut s = 0.0;
            for (l, &ail) in arow.iter().enumerate() {
                s += ail * xv[l * k + j];
            }
            ov[i * k + j] += s;
        }
    }
}

/// LU factorization with partial (row) pivoting: `P·A = L·U`.
///
/// `lu` holds the unit-lower `L` strictly below the diagonal and `U` on and
/// above it. `perm[i]` is the source row placed at row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLU {
    m: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl BlockLU {
    pub fn order(&self) -> usize {
        self.m
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn lower(&self) -> Block {
        let m = self.m;
        let mut l = Block::identity(m);
        for i in 0..m {
            for j in 0..i {
                l.set(i, j, self.lu[i * m + j]);
            }
        }
        l
    }

    pub fn upper(&self) -> Block {
        let m = self.m;
        let mut u = Block::zeros(m);
        for i in 0..m {
            for j in i..m {
                u.set(i, j, self.lu[i * m + j]);
            }
        }
        u
    }

    /// `Pᵀ·L·U`, i.e. the factored block up to rounding.
    pub fn reconstruct(&self) -> Block {
        let lu = mul(&self.lower(), &self.upper());
        let mut out = Block::zeros(self.m);
        for (i, &src) in self.perm.iter().enumerate() {
            for j in 0..self.m {
                out.set(src, j, lu.get(i, j));
            }
        }
        out
    }

    pub fn solve<R: BlockRhs>(&self, rhs: &R) -> Result<R> {
        lu_solve(self, rhs)
    }

    /// Like [`BlockLU::solve`], reusing `rhs` as the output buffer when no
    /// rows were exchanged.
    pub fn solve_owned<R: BlockRhs>(&self, mut rhs: R) -> Result<R> {
        if self.perm.iter().enumerate().any(|(i, &p)| i != p) {
            return lu_solve(self, &rhs);
        }
        check_same_order(self.m, rhs.order(), "lu_solve")?;
        let k = rhs.ncols();
        substitute(self, rhs.values_mut(), k);
        Ok(rhs)
    }
}

/// Factors `a`, failing when a pivot `p` satisfies `|p| <= m·ε·‖a‖∞`.
pub fn lu_factor(a: &Block) -> Result<BlockLU> {
    let m = a.m;
    let tol = m as f64 * f64::EPSILON * a.norm_inf();
    let mut lu = a.data.clone();
    let mut perm: Vec<usize> = (0..m).collect();

    for k in 0..m {
        let mut piv = k;
        let mut best = lu[k * m + k].abs();
        for i in k + 1..m {
            let v = lu[i * m + k].abs();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best <= tol {
            return Err(Error::SingularBlock { column: k + 1 });
        }
        if piv != k {
            for j in 0..m {
                lu.swap(k * m + j, piv * m + j);
            }
            perm.swap(k, piv);
        }
        let p = lu[k * m + k];
        for i in k + 1..m {
            let f = lu[i * m + k] / p;
            lu[i * m + k] = f;
            if f != 0.0 {
                for j in k + 1..m {
                    lu[i * m + j] -= f * lu[k * m + j];
                }
            }
        }
    }
    Ok(BlockLU { m, lu, perm })
}

/// Solves `block · s = rhs` with a prior factorization.
pub fn lu_solve<R: BlockRhs>(f: &BlockLU, rhs: &R) -> Result<R> {
    let m = f.m;
    check_same_order(m, rhs.order(), "lu_solve")?;
    let k = rhs.ncols();
    let src = rhs.values();
    let mut out = rhs.zeros_like();
    let x = out.values_mut();
    for (i, &p) in f.perm.iter().enumerate() {
        x[i * k..(i + 1) * k].copy_from_slice(&src[p * k..(p + 1) * k]);
    }
    substitute(f, x, k);
    Ok(out)
}

/// Forward and back substitution on already permuted values, in place.
fn substitute(f: &BlockLU, x: &mut [f64], k: usize) {
    let m = f.m;
    for c in 0..k {
        for i in 1..m {
            let mut s = x[i * k + c];
            for j in 0..i {
                s -= f.lu[i * m + j] * x[j * k + c];
            }
            x[i * k + c] = s;
        }
        for i in (0..m).rev() {
            let mut s = x[i * k + c];
            for j in i + 1..m {
                s -= f.lu[i * m + j] * x[j * k + c];
            }
            x[i * k + c] = s / f.lu[i * m + i];
        }
    }
}
