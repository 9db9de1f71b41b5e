//! A tagged union over the four operator kinds the CLI and file format handle.

use std::fmt;
use std::str::FromStr;

use crate::banded::{BlockPentaMatrix, BlockTriMatrix};
use crate::block::{OpCounts, SmallVec};
use crate::cyclic::{solve_cbps, solve_cbts, CyclicBlockPenta, CyclicBlockTri, SolveReport, WoodburyParams};
use crate::dense::{dense_solve, Assemble, DenseSystem};
use crate::error::{Error, Result};
use crate::layout::{check_block_vector, flatten, residual_inf, unflatten, BlockOperator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Cbts,
    Cbps,
    Tri,
    Penta,
}

impl Kind {
    pub const ALL: [Kind; 4] = [Kind::Cbts, Kind::Cbps, Kind::Tri, Kind::Penta];

    pub fn token(self) -> &'static str {
        match self {
            Kind::Cbts => "cbts",
            Kind::Cbps => "cbps",
            Kind::Tri => "tri",
            Kind::Penta => "penta",
        }
    }

    /// Blocks stored per block row in the CBX layout.
    pub fn blocks_per_row(self) -> usize {
        match self {
            Kind::Cbts | Kind::Tri => 3,
            Kind::Cbps | Kind::Penta => 5,
        }
    }

    pub fn min_n(self) -> usize {
        match self {
            Kind::Cbts => CyclicBlockTri::MIN_N,
            Kind::Cbps => CyclicBlockPenta::MIN_N,
            Kind::Tri => 2,
            Kind::Penta => 3,
        }
    }

    pub fn is_cyclic(self) -> bool {
        matches!(self, Kind::Cbts | Kind::Cbps)
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Kind::ALL
            .into_iter()
            .find(|k| k.token() == s)
            .ok_or_else(|| format!("unknown kind '{s}' (expected cbts, cbps, tri or penta)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operator {
    Cbts(CyclicBlockTri),
    Cbps(CyclicBlockPenta),
    Tri(BlockTriMatrix),
    Penta(BlockPentaMatrix),
}

impl Operator {
    pub fn kind(&self) -> Kind {
        match self {
            Operator::Cbts(_) => Kind::Cbts,
            Operator::Cbps(_) => Kind::Cbps,
            Operator::Tri(_) => Kind::Tri,
            Operator::Penta(_) => Kind::Penta,
        }
    }

    pub fn as_block_operator(&self) -> &dyn BlockOperator {
        match self {
            Operator::Cbts(a) => a,
            Operator::Cbps(a) => a,
            Operator::Tri(a) => a,
            Operator::Penta(a) => a,
        }
    }

    pub fn n(&self) -> usize {
        self.as_block_operator().n()
    }

    pub fn m(&self) -> usize {
        self.as_block_operator().m()
    }

    pub fn apply(&self, x: &[SmallVec]) -> Result<Vec<SmallVec>> {
        self.as_block_operator().matvec(x)
    }

    pub fn residual_inf(&self, x: &[SmallVec], f: &[SmallVec]) -> Result<f64> {
        residual_inf(self.as_block_operator(), x, f)
    }

    pub fn assemble_dense(&self) -> DenseSystem {
        match self {
            Operator::Cbts(a) => a.assemble_dense(),
            Operator::Cbps(a) => a.assemble_dense(),
            Operator::Tri(a) => a.assemble_dense(),
            Operator::Penta(a) => a.assemble_dense(),
        }
    }

    /// Structured solve: Woodbury correction for cyclic kinds, a plain banded
    /// elimination for non-cyclic ones (no capacitance matrix).
    pub fn solve_woodbury(&self, f: &[SmallVec], p: &WoodburyParams) -> Result<SolveReport> {
        match self {
            Operator::Cbts(a) => solve_cbts(a, f, p),
            Operator::Cbps(a) => solve_cbps(a, f, p),
            Operator::Tri(a) => banded_report(a, &a.bands(), f, p),
            Operator::Penta(a) => banded_report(a, &a.bands(), f, p),
        }
    }

    /// Dense oracle solve. Counts one factorization and one solve of the
    /// full matrix; block products are not tallied.
    pub fn solve_dense(&self, f: &[SmallVec], p: &WoodburyParams) -> Result<SolveReport> {
        check_block_vector(f, self.n(), self.m())?;
        let x = dense_solve(&self.assemble_dense(), &flatten(f))?;
        let x = unflatten(&x, self.m())?;
        let residual_inf = self.residual_inf(&x, f)?;
        Ok(SolveReport {
            x,
            residual_inf,
            params: *p,
            counts: OpCounts {
                matmuls: 0,
                lus: 1,
                solves: 1,
            },
            capacitance_order: 0,
            correction_rank: 0,
        })
    }
}

fn banded_report<A: BlockOperator>(
    a: &A,
    bands: &crate::banded::Bands<'_>,
    f: &[SmallVec],
    p: &WoodburyParams,
) -> Result<SolveReport> {
    check_block_vector(f, a.n(), a.m())?;
    let mut counts = OpCounts::default();
    let fact = crate::banded::factor_counted(bands, &mut counts)?;
    let x = fact.solve_counted(f, &mut counts)?;
    let residual_inf = residual_inf(a, &x, f)?;
    Ok(SolveReport {
        x,
        residual_inf,
        params: *p,
        counts,
        capacitance_order: 0,
        correction_rank: 0,
    })
}

impl From<CyclicBlockTri> for Operator {
    fn from(a: CyclicBlockTri) -> Self {
        Operator::Cbts(a)
    }
}

impl From<CyclicBlockPenta> for Operator {
    fn from(a: CyclicBlockPenta) -> Self {
        Operator::Cbps(a)
    }
}

impl From<BlockTriMatrix> for Operator {
    fn from(a: BlockTriMatrix) -> Self {
        Operator::Tri(a)
    }
}

impl From<BlockPentaMatrix> for Operator {
    fn from(a: BlockPentaMatrix) -> Self {
        Operator::Penta(a)
    }
}

pub(crate) fn check_min_n(kind: Kind, n: usize) -> Result<()> {
    if n < kind.min_n() {
        return Err(Error::dim(format!(
            "{kind} needs n >= {}, got n = {n}",
            kind.min_n()
        )));
    }
    Ok(())
}
