//! Solvers for cyclic block tridiagonal and cyclic block penta-diagonal
//! linear systems.
//!
//! A cyclic (periodic) block system is an ordinary block-banded system plus
//! corner blocks that couple the first and last block rows. [`cyclic`] moves
//! those corners into low-rank terms, solves the remaining banded system with
//! [`banded`], and restores the coupling through a small capacitance solve of
//! order `m` or `2m` (Woodbury identity). [`dense`] is an independent brute
//! force path used to check every result.
//!
//! ```
//! use cbsolve::{generate, GenSpec, Kind, Operator, WoodburyParams};
//!
//! let (op, rhs) = generate(&GenSpec::new(Kind::Cbps, 8, 2, 1, 1.5)).unwrap();
//! let report = op.solve_woodbury(&rhs, &WoodburyParams::default()).unwrap();
//! assert!(report.residual_inf < 1e-12);
//! assert_eq!(report.capacitance_order, 4);
//! ```

pub mod banded;
pub mod block;
pub mod cbx;
pub mod cli;
pub mod cyclic;
pub mod dense;
pub mod error;
pub mod generate;
pub mod layout;
pub mod operator;

pub use banded::{
    apply_banded, factor_banded, solve_banded, BandKind, BandedFactorization, BlockPentaMatrix, BlockTriMatrix,
};
pub use block::{block_axpy, block_matmul, lu_factor, lu_solve, Block, BlockLU, BlockRhs, OpCounts, Panel, SmallVec};
pub use cbx::{parse_cbx, write_cbx, CbxFile};
pub use cyclic::{
    apply_cyclic, decompose_cbps, decompose_cbts, solve_cbps, solve_cbts, CbpsDecomposition, CbtsDecomposition,
    CyclicBlockPenta, CyclicBlockTri, SolveReport, WoodburyParams,
};
pub use dense::{assemble_dense, dense_solve, Assemble, DenseSystem};
pub use error::{Error, Result};
pub use generate::{generate, GenSpec};
pub use layout::{flatten, rel_inf_diff, residual_inf, unflatten, BlockOperator};
pub use operator::{Kind, Operator};
