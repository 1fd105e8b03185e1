//! Sparse matrices, Krylov and multigrid solvers for the block system.

pub mod amg;
pub mod block;
pub mod csr;
pub mod dense;
pub mod gmres;

pub use amg::{build_amg, AmgHierarchy, AmgOptions, NearNullSpace};
pub use block::{assemble_pattern, BlockPreconditioner, BlockSystem, PreconditionerKind};
pub use csr::CsrMatrix;
pub use dense::{Cholesky, DenseMatrix, Lu, MAX_DENSE};
pub use gmres::{gmres, GmresOptions, GmresOutcome, Identity, LinearOperator, Preconditioner};
