//! Woodbury-corrected solvers for cyclic block tridiagonal and cyclic block
//! penta-diagonal systems.
//!
//! The cyclic operator `A` is split as `A = Ã + U·Vᵀ` (tridiagonal) or
//! `A = Ã + U·Vᵀ + P·Qᵀ` (penta-diagonal), where `Ã` is the ordinary banded
//! operator left after moving the corner blocks into low-rank terms. With the
//! free scalars `α, β, γ, δ`:
//!
//! ```text
//! U_1 = I/α   U_n = I/γ        V_1 = γ C_n   V_n = α A_1
//!                              V_2 = γ D_n   V_{n-1} = α E_1
//! P_2 = I/β   P_{n-1} = I/δ    Q_1 = δ D_{n-1}   Q_n = β E_2
//! ```
//!
//! The solve factors `Ã` once, forms `Z = Ã⁻¹U`, `W = Ã⁻¹P` and `y = Ã⁻¹f`,
//! solves the small capacitance system `M·[u; v] = [Vᵀy; Qᵀy]` and returns
//! `x = y − Z·u − W·v`. `M` has order `m` (tri) or `2m` (penta).

use crate::banded::{factor_counted, BlockPentaMatrix, BlockTriMatrix};
use crate::block::{
    add_mul_assign, axpy, lu_factor, mul, sub_mul_assign, Block, BlockLU, OpCounts, SmallVec,
};
use crate::error::{Error, Result};
use crate::layout::{check_block_vector, residual_inf, BlockOperator};

/// Cyclic block tridiagonal operator. Row `k` holds `A_k`, `B_k`, `C_k` at
/// block columns `k-1`, `k`, `k+1` taken modulo `n`, so `A_1` sits in the
/// top-right corner and `C_n` in the bottom-left one.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicBlockTri {
    m: usize,
    a: Vec<Block>,
    b: Vec<Block>,
    c: Vec<Block>,
}

impl CyclicBlockTri {
    pub const MIN_N: usize = 3;

    pub fn new(a: Vec<Block>, b: Vec<Block>, c: Vec<Block>) -> Result<Self> {
        let n = b.len();
        if n < Self::MIN_N {
            return Err(Error::dim(format!(
                "cyclic block tridiagonal needs n >= 3 so that A_1, B_1, C_1 occupy distinct columns; got n = {n}"
            )));
        }
        let m = validate_arrays(n, [&a, &b, &c])?;
        Ok(CyclicBlockTri { m, a, b, c })
    }

    pub fn n(&self) -> usize {
        self.b.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn a(&self) -> &[Block] {
        &self.a
    }

    pub fn b(&self) -> &[Block] {
        &self.b
    }

    pub fn c(&self) -> &[Block] {
        &self.c
    }
}

impl BlockOperator for CyclicBlockTri {
    fn n(&self) -> usize {
        self.b.len()
    }
    fn m(&self) -> usize {
        self.m
    }
    fn row_blocks(&self, k: usize) -> Vec<(usize, &Block)> {
        let n = self.n();
        let mut v = vec![
            ((k + n - 1) % n, &self.a[k]),
            (k, &self.b[k]),
            ((k + 1) % n, &self.c[k]),
        ];
        v.sort_by_key(|&(col, _)| col);
        v
    }
}

/// Cyclic block penta-diagonal operator. Row `k` holds `E_k, A_k, B_k, C_k,
/// D_k` at block columns `k-2 .. k+2` modulo `n`. The wrapped positions are
/// the corners `E_1, A_1, E_2` (top right) and `D_{n-1}, C_n, D_n` (bottom
/// left).
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicBlockPenta {
    m: usize,
    a: Vec<Block>,
    b: Vec<Block>,
    c: Vec<Block>,
    d: Vec<Block>,
    e: Vec<Block>,
}

impl CyclicBlockPenta {
    /// At `n = 4` the corner `E_1` would share block column 3 with `D_1`.
    pub const MIN_N: usize = 5;

    pub fn new(a: Vec<Block>, b: Vec<Block>, c: Vec<Block>, d: Vec<Block>, e: Vec<Block>) -> Result<Self> {
        let n = b.len();
        if n < Self::MIN_N {
            return Err(Error::dim(format!(
                "cyclic block penta-diagonal needs n >= 5; at n = {n} corner blocks would overlap band blocks"
            )));
        }
        let m = validate_arrays(n, [&a, &b, &c, &d, &e])?;
        Ok(CyclicBlockPenta { m, a, b, c, d, e })
    }

    /// Embeds a cyclic tridiagonal operator with zero `D` and `E` blocks.
    pub fn from_tri(t: &CyclicBlockTri) -> Result<Self> {
        let n = t.n();
        let z = vec![Block::zeros(t.m); n];
        Self::new(t.a.clone(), t.b.clone(), t.c.clone(), z.clone(), z)
    }

    pub fn n(&self) -> usize {
        self.b.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn a(&self) -> &[Block] {
        &self.a
    }

    pub fn b(&self) -> &[Block] {
        &self.b
    }

    pub fn c(&self) -> &[Block] {
        &self.c
    }

    pub fn d(&self) -> &[Block] {
        &self.d
    }

    pub fn e(&self) -> &[Block] {
        &self.e
    }
}

impl BlockOperator for CyclicBlockPenta {
    fn n(&self) -> usize {
        self.b.len()
    }
    fn m(&self) -> usize {
        self.m
    }
    fn row_blocks(&self, k: usize) -> Vec<(usize, &Block)> {
        let n = self.n();
        let mut v = vec![
            ((k + n - 2) % n, &self.e[k]),
            ((k + n - 1) % n, &self.a[k]),
            (k, &self.b[k]),
            ((k + 1) % n, &self.c[k]),
            ((k + 2) % n, &self.d[k]),
        ];
        v.sort_by_key(|&(col, _)| col);
        v
    }
}

fn validate_arrays<const N: usize>(n: usize, arrays: [&Vec<Block>; N]) -> Result<usize> {
    if let Some(bad) = arrays.iter().find(|v| v.len() != n) {
        return Err(Error::dim(format!(
            "every block array needs n = {n} entries, found one with {}",
            bad.len()
        )));
    }
    let m = arrays[0][0].order();
    if arrays.iter().flat_map(|v| v.iter()).any(|b| b.order() != m) {
        return Err(Error::dim("all blocks must share the same order"));
    }
    Ok(m)
}

/// The free scalars of the low-rank split. Only `alpha` and `gamma` enter the
/// tridiagonal case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WoodburyParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for WoodburyParams {
    fn default() -> Self {
        WoodburyParams {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            delta: 1.0,
        }
    }
}

impl WoodburyParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, delta: f64) -> Result<Self> {
        let p = WoodburyParams {
            alpha,
            beta,
            gamma,
            delta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delta", self.delta),
        ] {
            if !v.is_finite() || v == 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite and nonzero, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// A single defining product `lhs·rhs = target` of the split.
#[derive(Debug, Clone)]
pub struct Condition {
    pub name: &'static str,
    pub product: Block,
    pub target: Block,
}

impl Condition {
    fn new(name: &'static str, lhs: &Block, rhs: &Block, target: &Block) -> Self {
        Condition {
            name,
            product: mul(lhs, rhs),
            target: target.clone(),
        }
    }

    /// Largest entrywise deviation divided by `‖target‖∞`, or the raw
    /// deviation when the target is zero.
    pub fn relative_error(&self) -> f64 {
        let diff = self
            .product
            .as_slice()
            .iter()
            .zip(self.target.as_slice())
            .fold(0.0f64, |acc, (p, t)| acc.max((p - t).abs()));
        let scale = self.target.norm_inf();
        if scale > 0.0 {
            diff / scale
        } else {
            diff
        }
    }

    pub fn holds(&self) -> bool {
        self.relative_error() <= 2.0 * f64::EPSILON
    }
}

fn check_conditions(conds: Vec<Condition>) -> Result<()> {
    match conds.iter().find(|c| !c.holds()) {
        Some(c) => Err(Error::InvalidParameter(format!(
            "split condition {} violated (relative error {:e}); scalars too extreme for the block magnitudes",
            c.name,
            c.relative_error()
        ))),
        None => Ok(()),
    }
}

/// `A = Ã + U·Vᵀ` for a cyclic block tridiagonal `A`.
#[derive(Debug, Clone)]
pub struct CbtsDecomposition {
    pub a_tilde: BlockTriMatrix,
    pub u1: Block,
    pub un: Block,
    pub v1: Block,
    pub vn: Block,
    pub x1: Block,
    pub xn: Block,
}

impl CbtsDecomposition {
    /// The four defining products, in the order `U_1V_n = A_1`,
    /// `U_nV_1 = C_n`, `U_1V_1 = X_1`, `U_nV_n = X_n`.
    pub fn conditions(&self, sys: &CyclicBlockTri) -> Vec<Condition> {
        let n = sys.n();
        vec![
            Condition::new("U1*Vn = A1", &self.u1, &self.vn, &sys.a[0]),
            Condition::new("Un*V1 = Cn", &self.un, &self.v1, &sys.c[n - 1]),
            Condition::new("U1*V1 = X1", &self.u1, &self.v1, &self.x1),
            Condition::new("Un*Vn = Xn", &self.un, &self.vn, &self.xn),
        ]
    }
}

/// `A = Ã + U·Vᵀ + P·Qᵀ` for a cyclic block penta-diagonal `A`.
#[derive(Debug, Clone)]
pub struct CbpsDecomposition {
    pub a_tilde: BlockPentaMatrix,
    pub u1: Block,
    pub un: Block,
    pub v1: Block,
    pub v2: Block,
    pub v_nm1: Block,
    pub vn: Block,
    pub p2: Block,
    pub p_nm1: Block,
    pub q1: Block,
    pub qn: Block,
    pub x1: Block,
    pub y1: Block,
    pub xn: Block,
    pub yn: Block,
    pub x2: Block,
    pub x_nm1: Block,
}

impl CbpsDecomposition {
    /// The eight `U·Vᵀ` products followed by the four `P·Qᵀ` products.
    pub fn conditions(&self, sys: &CyclicBlockPenta) -> Vec<Condition> {
        let n = sys.n();
        vec![
            Condition::new("U1*Vn = A1", &self.u1, &self.vn, &sys.a[0]),
            Condition::new("Un*V1 = Cn", &self.un, &self.v1, &sys.c[n - 1]),
            Condition::new("U1*V(n-1) = E1", &self.u1, &self.v_nm1, &sys.e[0]),
            Condition::new("Un*V2 = Dn", &self.un, &self.v2, &sys.d[n - 1]),
            Condition::new("U1*V1 = X1", &self.u1, &self.v1, &self.x1),
            Condition::new("U1*V2 = Y1", &self.u1, &self.v2, &self.y1),
            Condition::new("Un*V(n-1) = Yn", &self.un, &self.v_nm1, &self.yn),
            Condition::new("Un*Vn = Xn", &self.un, &self.vn, &self.xn),
            Condition::new("P2*Qn = E2", &self.p2, &self.qn, &sys.e[1]),
            Condition::new("P(n-1)*Q1 = D(n-1)", &self.p_nm1, &self.q1, &sys.d[n - 2]),
            Condition::new("P2*Q1 = X2", &self.p2, &self.q1, &self.x2),
            Condition::new("P(n-1)*Qn = X(n-1)", &self.p_nm1, &self.qn, &self.x_nm1),
        ]
    }
}

/// Outcome of a cyclic solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: Vec<SmallVec>,
    /// `‖Ax − f‖∞ / (‖A‖∞‖x‖∞ + ‖f‖∞)`.
    pub residual_inf: f64,
    pub params: WoodburyParams,
    pub counts: OpCounts,
    /// Order of the capacitance matrix that was factored: `m` for the
    /// tridiagonal path, `2m` for penta, 0 when no correction was needed.
    pub capacitance_order: usize,
    /// Column count of the correction stack `Z` or `[Z, W]`.
    pub correction_rank: usize,
}

pub fn decompose_cbts(sys: &CyclicBlockTri, p: &WoodburyParams) -> Result<CbtsDecomposition> {
    decompose_cbts_counted(sys, p, &mut OpCounts::default())
}

fn decompose_cbts_counted(
    sys: &CyclicBlockTri,
    p: &WoodburyParams,
    counts: &mut OpCounts,
) -> Result<CbtsDecomposition> {
    p.validate()?;
    let (n, m) = (sys.n(), sys.m());
    let u1 = Block::scaled_identity(m, 1.0 / p.alpha);
    let un = Block::scaled_identity(m, 1.0 / p.gamma);
    let v1 = sys.c[n - 1].scale(p.gamma);
    let vn = sys.a[0].scale(p.alpha);
    let x1 = mul(&u1, &v1);
    let xn = mul(&un, &vn);
    counts.matmuls += 2;

    let mut diag = sys.b.clone();
    diag[0] = axpy(-1.0, &x1, &diag[0]);
    diag[n - 1] = axpy(-1.0, &xn, &diag[n - 1]);
    let a_tilde = BlockTriMatrix::new(sys.a[1..].to_vec(), diag, sys.c[..n - 1].to_vec())?;

    let dec = CbtsDecomposition {
        a_tilde,
        u1,
        un,
        v1,
        vn,
        x1,
        xn,
    };
    check_conditions(dec.conditions(sys))?;
    Ok(dec)
}

pub fn decompose_cbps(sys: &CyclicBlockPenta, p: &WoodburyParams) -> Result<CbpsDecomposition> {
    decompose_cbps_counted(sys, p, &mut OpCounts::default())
}

fn decompose_cbps_counted(
    sys: &CyclicBlockPenta,
    p: &WoodburyParams,
    counts: &mut OpCounts,
) -> Result<CbpsDecomposition> {
    p.validate()?;
    let (n, m) = (sys.n(), sys.m());
    let u1 = Block::scaled_identity(m, 1.0 / p.alpha);
    let un = Block::scaled_identity(m, 1.0 / p.gamma);
    let v1 = sys.c[n - 1].scale(p.gamma);
    let v2 = sys.d[n - 1].scale(p.gamma);
    let v_nm1 = sys.e[0].scale(p.alpha);
    let vn = sys.a[0].scale(p.alpha);
    let p2 = Block::scaled_identity(m, 1.0 / p.beta);
    let p_nm1 = Block::scaled_identity(m, 1.0 / p.delta);
    let q1 = sys.d[n - 2].scale(p.delta);
    let qn = sys.e[1].scale(p.beta);

    // Corrections are defined by their products, so U_nV_n = X_n yields
    // (α/γ)A_1 for the bottom-right block.
    let x1 = mul(&u1, &v1);
    let y1 = mul(&u1, &v2);
    let yn = mul(&un, &v_nm1);
    let xn = mul(&un, &vn);
    let x2 = mul(&p2, &q1);
    let x_nm1 = mul(&p_nm1, &qn);
    counts.matmuls += 6;

    let mut diag = sys.b.clone();
    diag[0] = axpy(-1.0, &x1, &diag[0]);
    diag[n - 1] = axpy(-1.0, &xn, &diag[n - 1]);
    let mut sup = sys.c[..n - 1].to_vec();
    sup[0] = axpy(-1.0, &y1, &sup[0]);
    sup[n - 2] = axpy(-1.0, &x_nm1, &sup[n - 2]);
    let mut sub = sys.a[1..].to_vec();
    sub[0] = axpy(-1.0, &x2, &sub[0]);
    sub[n - 2] = axpy(-1.0, &yn, &sub[n - 2]);
    let a_tilde = BlockPentaMatrix::new(
        sys.e[2..].to_vec(),
        sub,
        diag,
        sup,
        sys.d[..n - 2].to_vec(),
    )?;

    let dec = CbpsDecomposition {
        a_tilde,
        u1,
        un,
        v1,
        v2,
        v_nm1,
        vn,
        p2,
        p_nm1,
        q1,
        qn,
        x1,
        y1,
        xn,
        yn,
        x2,
        x_nm1,
    };
    check_conditions(dec.conditions(sys))?;
    Ok(dec)
}

/// A block column of `n` blocks that is zero except at the given rows.
fn sparse_column(n: usize, m: usize, entries: [(usize, &Block); 2]) -> Vec<Block> {
    let mut col = vec![Block::zeros(m); n];
    for (k, b) in entries {
        col[k] = b.clone();
    }
    col
}

fn factor_capacitance(mat: &Block, counts: &mut OpCounts) -> Result<BlockLU> {
    let lu = lu_factor(mat).map_err(|_| Error::SingularCapacitance { order: mat.order() })?;
    counts.lus += 1;
    Ok(lu)
}

/// Solves a cyclic block tridiagonal system.
pub fn solve_cbts(sys: &CyclicBlockTri, f: &[SmallVec], p: &WoodburyParams) -> Result<SolveReport> {
    let (n, m) = (sys.n(), sys.m());
    check_block_vector(f, n, m)?;
    let mut counts = OpCounts::default();

    let dec = decompose_cbts_counted(sys, p, &mut counts)?;
    let fact = factor_counted(&dec.a_tilde.bands(), &mut counts)?;

    let u = sparse_column(n, m, [(0, &dec.u1), (n - 1, &dec.un)]);
    let z = fact.solve_counted(&u, &mut counts)?;
    let y = fact.solve_counted(f, &mut counts)?;
    assert_eq!(z.len(), n);
    assert!(z.iter().all(|b| b.order() == m), "Z must have exactly m columns");

    // M = I + VᵀZ = I + γC_nZ_1 + αA_1Z_n
    let mut cap = Block::identity(m);
    add_mul_assign(&mut cap, &dec.v1, &z[0]);
    add_mul_assign(&mut cap, &dec.vn, &z[n - 1]);
    let mut rhs = mul(&dec.v1, &y[0]);
    add_mul_assign(&mut rhs, &dec.vn, &y[n - 1]);
    counts.matmuls += 4;
    assert_eq!(cap.order(), m, "capacitance matrix must be m x m");

    let lu = factor_capacitance(&cap, &mut counts)?;
    let corr = lu.solve(&rhs)?;
    counts.solves += 1;

    let mut x = y;
    for (xk, zk) in x.iter_mut().zip(&z) {
        sub_mul_assign(xk, zk, &corr);
    }
    counts.matmuls += n as u64;

    let residual_inf = residual_inf(sys, &x, f)?;
    Ok(SolveReport {
        x,
        residual_inf,
        params: *p,
        counts,
        capacitance_order: cap.order(),
        correction_rank: m,
    })
}

/// Solves a cyclic block penta-diagonal system.
pub fn solve_cbps(sys: &CyclicBlockPenta, f: &[SmallVec], p: &WoodburyParams) -> Result<SolveReport> {
    let (n, m) = (sys.n(), sys.m());
    check_block_vector(f, n, m)?;
    let mut counts = OpCounts::default();

    let dec = decompose_cbps_counted(sys, p, &mut counts)?;
    let fact = factor_counted(&dec.a_tilde.bands(), &mut counts)?;

    let u = sparse_column(n, m, [(0, &dec.u1), (n - 1, &dec.un)]);
    let pcol = sparse_column(n, m, [(1, &dec.p2), (n - 2, &dec.p_nm1)]);
    let z = fact.solve_counted(&u, &mut counts)?;
    let w = fact.solve_counted(&pcol, &mut counts)?;
    let y = fact.solve_counted(f, &mut counts)?;
    let rank = z[0].order() + w[0].order();
    assert_eq!(rank, 2 * m, "[Z, W] must have exactly 2m columns");

    // Vᵀ(·) = γC_n(·)_1 + γD_n(·)_2 + αE_1(·)_{n-1} + αA_1(·)_n
    // Qᵀ(·) = δD_{n-1}(·)_1 + βE_2(·)_n
    let v_terms = [(&dec.v1, 0), (&dec.v2, 1), (&dec.v_nm1, n - 2), (&dec.vn, n - 1)];
    let q_terms = [(&dec.q1, 0), (&dec.qn, n - 1)];

    let mut vz = Block::identity(m);
    let mut vw = Block::zeros(m);
    let mut vy = SmallVec::zeros(m);
    for &(v, k) in &v_terms {
        add_mul_assign(&mut vz, v, &z[k]);
        add_mul_assign(&mut vw, v, &w[k]);
        add_mul_assign(&mut vy, v, &y[k]);
    }
    let mut qz = Block::zeros(m);
    let mut qw = Block::identity(m);
    let mut qy = SmallVec::zeros(m);
    for &(q, k) in &q_terms {
        add_mul_assign(&mut qz, q, &z[k]);
        add_mul_assign(&mut qw, q, &w[k]);
        add_mul_assign(&mut qy, q, &y[k]);
    }
    counts.matmuls += 3 * (v_terms.len() + q_terms.len()) as u64;

    let cap = stack_2x2(&vz, &vw, &qz, &qw);
    assert_eq!(cap.order(), 2 * m, "capacitance matrix must be 2m x 2m");
    let mut stacked = vy.into_vec();
    stacked.extend_from_slice(qy.as_slice());
    let stacked = SmallVec::new(stacked)?;

    let lu = factor_capacitance(&cap, &mut counts)?;
    let uv = lu.solve(&stacked)?;
    counts.solves += 1;
    let corr_u = SmallVec::new(uv.as_slice()[..m].to_vec())?;
    let corr_v = SmallVec::new(uv.as_slice()[m..].to_vec())?;

    let mut x = y;
    for k in 0..n {
        sub_mul_assign(&mut x[k], &z[k], &corr_u);
        sub_mul_assign(&mut x[k], &w[k], &corr_v);
    }
    counts.matmuls += 2 * n as u64;

    let residual_inf = residual_inf(sys, &x, f)?;
    Ok(SolveReport {
        x,
        residual_inf,
        params: *p,
        counts,
        capacitance_order: cap.order(),
        correction_rank: rank,
    })
}

/// `[[a, b], [c, d]]` as a block of twice the order.
fn stack_2x2(a: &Block, b: &Block, c: &Block, d: &Block) -> Block {
    let m = a.order();
    let mut out = Block::zeros(2 * m);
    for i in 0..m {
        for j in 0..m {
            out.set(i, j, a.get(i, j));
            out.set(i, m + j, b.get(i, j));
            out.set(m + i, j, c.get(i, j));
            out.set(m + i, m + j, d.get(i, j));
        }
    }
    out
}

/// Anything [`apply_cyclic`] accepts.
pub trait Cyclic: BlockOperator {}
impl Cyclic for CyclicBlockTri {}
impl Cyclic for CyclicBlockPenta {}

pub fn apply_cyclic<A: Cyclic>(sys: &A, x: &[SmallVec]) -> Result<Vec<SmallVec>> {
    sys.matvec(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::test_util::*;
    use crate::dense::{assemble_dense, dense_solve, Assemble, DenseSystem};
    use crate::layout::{flatten, rel_inf_diff, unflatten};
    use rand_chacha::ChaCha8Rng;

    const EPS: f64 = f64::EPSILON;

    fn scalar(v: f64) -> Block {
        Block::from_row_major(1, vec![v]).unwrap()
    }

    fn scalars(v: &[f64]) -> Vec<Block> {
        v.iter().map(|&x| scalar(x)).collect()
    }

    fn boosted(rng: &mut ChaCha8Rng, m: usize, boost: f64) -> Block {
        axpy(1.0, &Block::scaled_identity(m, boost), &random_block(rng, m))
    }

    fn random_cbts(rng: &mut ChaCha8Rng, n: usize, m: usize) -> CyclicBlockTri {
        let boost = 3.0 * m as f64 + 1.0;
        let a = (0..n).map(|_| random_block(rng, m)).collect();
        let b = (0..n).map(|_| boosted(rng, m, boost)).collect();
        let c = (0..n).map(|_| random_block(rng, m)).collect();
        CyclicBlockTri::new(a, b, c).unwrap()
    }

    fn random_cbps(rng: &mut ChaCha8Rng, n: usize, m: usize) -> CyclicBlockPenta {
        let boost = 5.0 * m as f64 + 1.0;
        let mut gen = |diag: bool| -> Vec<Block> {
            (0..n)
                .map(|_| if diag { boosted(rng, m, boost) } else { random_block(rng, m) })
                .collect()
        };
        let a = gen(false);
        let b = gen(true);
        let c = gen(false);
        let d = gen(false);
        let e = gen(false);
        CyclicBlockPenta::new(a, b, c, d, e).unwrap()
    }

    fn rhs(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<SmallVec> {
        (0..n).map(|_| random_vec(rng, m)).collect()
    }

    fn oracle<A: Assemble>(a: &A, f: &[SmallVec]) -> Vec<f64> {
        dense_solve(&assemble_dense(a), &flatten(f)).unwrap()
    }

    /// Dense `U·Vᵀ`-style term with nonzero row blocks `rows` and column
    /// blocks `cols`, each entry the block product.
    fn dense_outer(n: usize, m: usize, rows: &[(usize, &Block)], cols: &[(usize, &Block)]) -> DenseSystem {
        let mut d = DenseSystem::zeros(n * m);
        for &(r, ub) in rows {
            for &(c, vb) in cols {
                d.set_block(r, c, &mul(ub, vb));
            }
        }
        d
    }

    #[test]
    fn params_reject_zero_and_nonfinite() {
        assert!(WoodburyParams::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(WoodburyParams::new(1.0, f64::NAN, 1.0, 1.0).is_err());
        assert!(WoodburyParams::new(1.0, 1.0, 1.0, f64::INFINITY).is_err());
        assert_eq!(WoodburyParams::default(), WoodburyParams::new(1.0, 1.0, 1.0, 1.0).unwrap());
    }

    #[test]
    fn minimum_n() {
        let two = vec![Block::identity(1); 2];
        assert!(matches!(
            CyclicBlockTri::new(two.clone(), two.clone(), two),
            Err(Error::Dimension(_))
        ));
        let four = vec![Block::identity(1); 4];
        let err = CyclicBlockPenta::new(four.clone(), four.clone(), four.clone(), four.clone(), four)
            .unwrap_err();
        assert!(matches!(err, Error::Dimension(ref s) if s.contains("n >= 5")));
    }

    #[test]
    fn cbts_without_corners_passes_through() {
        let mut r = rng(1);
        let mut sys = random_cbts(&mut r, 6, 2);
        sys.a[0] = Block::zeros(2);
        sys.c[5] = Block::zeros(2);
        let dec = decompose_cbts(&sys, &WoodburyParams::default()).unwrap();
        assert!(dec.x1.is_zero() && dec.xn.is_zero());
        assert_eq!(dec.a_tilde.diag(), sys.b());
    }

    #[test]
    fn cbts_scalar_corrections() {
        let sys = CyclicBlockTri::new(
            scalars(&[2.0, 1.0, 1.0, 1.0]),
            scalars(&[4.0; 4]),
            scalars(&[1.0, 1.0, 1.0, 3.0]),
        )
        .unwrap();
        let dec = decompose_cbts(&sys, &WoodburyParams::default()).unwrap();
        assert_eq!(dec.x1.get(0, 0), 3.0);
        assert_eq!(dec.xn.get(0, 0), 2.0);
        assert_eq!(dec.v1.get(0, 0), 3.0);
        assert_eq!(dec.vn.get(0, 0), 2.0);
        assert_eq!(dec.a_tilde.diag()[0].get(0, 0), 1.0);
        assert_eq!(dec.a_tilde.diag()[3].get(0, 0), 2.0);
    }

    #[test]
    fn cbts_conditions_with_unequal_scalars() {
        let mut r = rng(55);
        let sys = random_cbts(&mut r, 5, 2);
        let p = WoodburyParams::new(2.0, 1.0, 0.5, 1.0).unwrap();
        let dec = decompose_cbts(&sys, &p).unwrap();
        for c in dec.conditions(&sys) {
            assert!(c.holds(), "{} off by {:e}", c.name, c.relative_error());
        }
        // X_1 = (γ/α)C_n and X_n = (α/γ)A_1
        let want_x1 = sys.c[4].scale(0.25);
        let want_xn = sys.a[0].scale(4.0);
        for (got, want) in [(&dec.x1, &want_x1), (&dec.xn, &want_xn)] {
            for (g, w) in got.as_slice().iter().zip(want.as_slice()) {
                assert!((g - w).abs() <= 2.0 * EPS * want.norm_inf());
            }
        }
    }

    #[test]
    fn cbps_without_corners_passes_through() {
        let mut r = rng(2);
        let mut sys = random_cbps(&mut r, 7, 2);
        let z = Block::zeros(2);
        sys.a[0] = z.clone();
        sys.e[0] = z.clone();
        sys.e[1] = z.clone();
        sys.d[5] = z.clone();
        sys.c[6] = z.clone();
        sys.d[6] = z;
        let dec = decompose_cbps(&sys, &WoodburyParams::default()).unwrap();
        for b in [&dec.x1, &dec.y1, &dec.xn, &dec.yn, &dec.x2, &dec.x_nm1] {
            assert!(b.is_zero());
        }
        assert_eq!(dec.a_tilde.diag(), sys.b());
        assert_eq!(dec.a_tilde.sup(), &sys.c()[..6]);
        assert_eq!(dec.a_tilde.sub(), &sys.a()[1..]);
    }

    #[test]
    fn cbps_scalar_corrections() {
        // Corners A_1=1, E_1=2, E_2=3, D_{n-1}=4, C_n=5, D_n=6.
        let n = 6;
        let mut a = scalars(&[9.0; 6]);
        let mut c = scalars(&[9.0; 6]);
        let mut d = scalars(&[9.0; 6]);
        let mut e = scalars(&[9.0; 6]);
        a[0] = scalar(1.0);
        e[0] = scalar(2.0);
        e[1] = scalar(3.0);
        d[n - 2] = scalar(4.0);
        c[n - 1] = scalar(5.0);
        d[n - 1] = scalar(6.0);
        let sys = CyclicBlockPenta::new(a, scalars(&[50.0; 6]), c, d, e).unwrap();
        let dec = decompose_cbps(&sys, &WoodburyParams::default()).unwrap();
        let got: Vec<f64> = [&dec.x1, &dec.y1, &dec.yn, &dec.xn, &dec.x2, &dec.x_nm1]
            .iter()
            .map(|b| b.get(0, 0))
            .collect();
        assert_eq!(got, vec![5.0, 6.0, 2.0, 1.0, 4.0, 3.0]);
    }

    #[test]
    fn cbps_twelve_conditions() {
        let mut r = rng(71);
        let sys = random_cbps(&mut r, 7, 2);
        let p = WoodburyParams::new(1.0, 2.0, 3.0, 0.5).unwrap();
        let dec = decompose_cbps(&sys, &p).unwrap();
        let conds = dec.conditions(&sys);
        assert_eq!(conds.len(), 12);
        for c in conds {
            assert!(c.holds(), "{} off by {:e}", c.name, c.relative_error());
        }
    }

    #[test]
    fn cbps_reassembly_matches_operator() {
        let mut r = rng(90);
        for p in [WoodburyParams::default(), WoodburyParams::new(2.0, 0.5, 3.0, 0.25).unwrap()] {
            let sys = random_cbps(&mut r, 6, 3);
            let (n, m) = (6, 3);
            let dec = decompose_cbps(&sys, &p).unwrap();
            let mut total = assemble_dense(&dec.a_tilde);
            let uv = dense_outer(
                n,
                m,
                &[(0, &dec.u1), (n - 1, &dec.un)],
                &[(0, &dec.v1), (1, &dec.v2), (n - 2, &dec.v_nm1), (n - 1, &dec.vn)],
            );
            let pq = dense_outer(n, m, &[(1, &dec.p2), (n - 2, &dec.p_nm1)], &[(0, &dec.q1), (n - 1, &dec.qn)]);
            total.add_assign(&uv);
            total.add_assign(&pq);
            let a = assemble_dense(&sys);
            let tol = 4.0 * EPS * sys.norm_inf();
            assert!(total.max_abs_diff(&a) <= tol);
        }
    }

    #[test]
    fn identity_systems_return_rhs() {
        let mut r = rng(9);
        let m = 3;
        let n = 6;
        let z = vec![Block::zeros(m); n];
        let id = vec![Block::identity(m); n];
        let f = rhs(&mut r, n, m);
        let t = CyclicBlockTri::new(z.clone(), id.clone(), z.clone()).unwrap();
        let rep = solve_cbts(&t, &f, &WoodburyParams::default()).unwrap();
        assert_eq!(rep.x, f);
        assert_eq!(rep.residual_inf, 0.0);
        let p = CyclicBlockPenta::new(z.clone(), id, z.clone(), z.clone(), z).unwrap();
        let rep = solve_cbps(&p, &f, &WoodburyParams::default()).unwrap();
        assert_eq!(rep.x, f);
    }

    #[test]
    fn cbts_scalar_all_ones_solution() {
        let sys = CyclicBlockTri::new(scalars(&[1.0; 4]), scalars(&[4.0; 4]), scalars(&[1.0; 4])).unwrap();
        let f = unflatten(&[6.0; 4], 1).unwrap();
        let rep = solve_cbts(&sys, &f, &WoodburyParams::default()).unwrap();
        for v in flatten(&rep.x) {
            assert!((v - 1.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn cbts_m2_n10_seed_3_matches_oracle() {
        let mut r = rng(3);
        let sys = random_cbts(&mut r, 10, 2);
        let f = rhs(&mut r, 10, 2);
        let rep = solve_cbts(&sys, &f, &WoodburyParams::default()).unwrap();
        assert!(rel_inf_diff(&flatten(&rep.x), &oracle(&sys, &f)) <= 1e-9);
        assert_eq!(rep.capacitance_order, 2);
        assert_eq!(rep.correction_rank, 2);
    }

    #[test]
    fn cbps_m2_n8_seed_5_matches_oracle() {
        let mut r = rng(5);
        let sys = random_cbps(&mut r, 8, 2);
        let f = rhs(&mut r, 8, 2);
        let rep = solve_cbps(&sys, &f, &WoodburyParams::default()).unwrap();
        assert!(rel_inf_diff(&flatten(&rep.x), &oracle(&sys, &f)) <= 1e-9);
        assert_eq!(rep.capacitance_order, 4);
        assert_eq!(rep.correction_rank, 4);
    }

    #[test]
    fn cbps_reduces_to_cbts() {
        let mut r = rng(6);
        let tri = random_cbts(&mut r, 9, 3);
        let penta = CyclicBlockPenta::from_tri(&tri).unwrap();
        let f = rhs(&mut r, 9, 3);
        let a = solve_cbts(&tri, &f, &WoodburyParams::default()).unwrap();
        let b = solve_cbps(&penta, &f, &WoodburyParams::default()).unwrap();
        assert!(rel_inf_diff(&flatten(&b.x), &flatten(&a.x)) <= 1e-10);
    }

    #[test]
    fn apply_identity_and_all_ones() {
        let m = 2;
        let n = 5;
        let z = vec![Block::zeros(m); n];
        let id = vec![Block::identity(m); n];
        let x: Vec<SmallVec> = (0..n).map(|k| SmallVec::new(vec![k as f64, 1.0 - k as f64]).unwrap()).collect();
        let t = CyclicBlockTri::new(z.clone(), id, z).unwrap();
        assert_eq!(apply_cyclic(&t, &x).unwrap(), x);

        let ones = scalars(&[1.0; 5]);
        let p = CyclicBlockPenta::new(ones.clone(), ones.clone(), ones.clone(), ones.clone(), ones).unwrap();
        let y = apply_cyclic(&p, &unflatten(&[1.0; 5], 1).unwrap()).unwrap();
        assert_eq!(flatten(&y), vec![5.0; 5]);
    }

    #[test]
    fn apply_matches_dense_exactly() {
        let mut r = rng(12);
        let t = random_cbts(&mut r, 7, 3);
        let p = random_cbps(&mut r, 8, 2);
        let xt = rhs(&mut r, 7, 3);
        let xp = rhs(&mut r, 8, 2);
        assert_eq!(flatten(&apply_cyclic(&t, &xt).unwrap()), assemble_dense(&t).matvec(&flatten(&xt)));
        assert_eq!(flatten(&apply_cyclic(&p, &xp).unwrap()), assemble_dense(&p).matvec(&flatten(&xp)));
    }

    #[test]
    fn singular_pivot_reported() {
        let m = 2;
        let n = 5;
        let mut b = vec![Block::identity(m); n];
        b[0] = Block::zeros(m);
        let z = vec![Block::zeros(m); n];
        let t = CyclicBlockTri::new(z.clone(), b, z).unwrap();
        let f = vec![SmallVec::zeros(m); n];
        assert_eq!(
            solve_cbts(&t, &f, &WoodburyParams::default()).unwrap_err(),
            Error::SingularPivot { row: 1 }
        );
    }

    #[test]
    fn singular_capacitance_reported() {
        // Ã = diag(4, 1, 4); M = 1 + (-2)(1/4) + (-2)(1/4) = 0 exactly.
        let sys = CyclicBlockTri::new(
            scalars(&[-2.0, 0.0, 0.0]),
            scalars(&[2.0, 1.0, 2.0]),
            scalars(&[0.0, 0.0, -2.0]),
        )
        .unwrap();
        let f = unflatten(&[1.0, 1.0, 1.0], 1).unwrap();
        assert_eq!(
            solve_cbts(&sys, &f, &WoodburyParams::default()).unwrap_err(),
            Error::SingularCapacitance { order: 1 }
        );
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut r = rng(10);
        let sys = random_cbts(&mut r, 5, 2);
        let f = rhs(&mut r, 4, 2);
        assert!(matches!(
            solve_cbts(&sys, &f, &WoodburyParams::default()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn counters_grow_linearly() {
        let m = 3;
        let counts: Vec<u64> = [10usize, 20, 40, 80, 160]
            .iter()
            .map(|&n| {
                let mut r = rng(n as u64);
                let sys = random_cbps(&mut r, n, m);
                let f = rhs(&mut r, n, m);
                solve_cbps(&sys, &f, &WoodburyParams::default()).unwrap().counts.matmuls
            })
            .collect();
        let c = counts[0] as f64 / 10.0;
        for (n, cnt) in [10usize, 20, 40, 80, 160].iter().zip(&counts) {
            assert!(*cnt as f64 <= 1.2 * c * *n as f64, "n={n}: {cnt}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn parameter_invariance(seed in any::<u64>(), n in 5usize..=30, m in 1usize..=4) {
                let mut r = rng(seed);
                let sys = random_cbps(&mut r, n, m);
                let tri = random_cbts(&mut r, n, m);
                let f = rhs(&mut r, n, m);
                let p1 = WoodburyParams::default();
                let p2 = WoodburyParams::new(2.0, 0.5, 3.0, 0.25).unwrap();
                let a = solve_cbps(&sys, &f, &p1).unwrap();
                let b = solve_cbps(&sys, &f, &p2).unwrap();
                prop_assert!(rel_inf_diff(&flatten(&b.x), &flatten(&a.x)) <= 1e-8);
                let a = solve_cbts(&tri, &f, &p1).unwrap();
                let b = solve_cbts(&tri, &f, &p2).unwrap();
                prop_assert!(rel_inf_diff(&flatten(&b.x), &flatten(&a.x)) <= 1e-8);
            }

            #[test]
            fn residual_and_oracle(seed in any::<u64>(), n in 5usize..=30, m in 1usize..=5) {
                let mut r = rng(seed);
                let sys = random_cbps(&mut r, n, m);
                let f = rhs(&mut r, n, m);
                let rep = solve_cbps(&sys, &f, &WoodburyParams::default()).unwrap();
                prop_assert!(rep.residual_inf <= 1e-10);
                prop_assert!(rel_inf_diff(&flatten(&rep.x), &oracle(&sys, &f)) <= 1e-9);
            }

            #[test]
            fn unit_scalars_reconstruct_corners_exactly(seed in any::<u64>(), n in 5usize..=12, m in 1usize..=3) {
                let mut r = rng(seed);
                let sys = random_cbts(&mut r, n, m);
                let dec = decompose_cbts(&sys, &WoodburyParams::default()).unwrap();
                prop_assert_eq!(&dec.x1, &sys.c[n - 1]);
                prop_assert_eq!(&dec.xn, &sys.a[0]);
                for c in dec.conditions(&sys) {
                    prop_assert_eq!(&c.product, &c.target);
                }
            }
        }
    }
}
