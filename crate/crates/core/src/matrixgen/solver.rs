use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use super::{BinaryFirstSolver, ConstraintMatrix, GaussianSolver, InactivationSolver};
use crate::fieldmath::SymbolData;

/// Rank reached by a system that could not be solved uniquely.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingularReport {
    pub rank: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("{rhs} right-hand sides for {rows} rows")]
    DimensionMismatch { rows: usize, rhs: usize },
    #[error("right-hand side symbols have mixed sizes ({expected} and {found} bytes)")]
    SymbolSizeMismatch { expected: usize, found: usize },
    #[error("matrix is rank deficient: rank {} of {}", .0.rank, .0.cols)]
    Singular(SingularReport),
}

/// A method for solving `M * C = D` over GF(256).
///
/// Every implementation must return the same solution for a full-rank system
/// (it is unique) and the same rank for any matrix.
pub trait Solver: Send + Sync {
    fn name(&self) -> &'static str;

    fn rank(&self, matrix: &ConstraintMatrix) -> usize;

    fn solve(
        &self,
        matrix: &ConstraintMatrix,
        rhs: &[SymbolData],
    ) -> Result<Vec<SymbolData>, SolveError>;
}

pub(crate) fn check_rhs(
    matrix: &ConstraintMatrix,
    rhs: &[SymbolData],
) -> Result<usize, SolveError> {
    if rhs.len() != matrix.row_count() {
        return Err(SolveError::DimensionMismatch {
            rows: matrix.row_count(),
            rhs: rhs.len(),
        });
    }
    let t = rhs.first().map_or(0, |s| s.len());
    if let Some(bad) = rhs.iter().find(|s| s.len() != t) {
        return Err(SolveError::SymbolSizeMismatch {
            expected: t,
            found: bad.len(),
        });
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown solver {name:?}; available: {available}")]
pub struct UnknownSolver {
    pub name: String,
    pub available: String,
}

/// Solvers by name.
#[derive(Clone, Default)]
pub struct SolverRegistry {
    solvers: BTreeMap<String, Arc<dyn Solver>>,
}

impl SolverRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registry with `gaussian`, `binary-first` and `inactivation`.
    pub fn with_builtins() -> Self {
        let mut reg = Self::new();
        reg.register(Arc::new(GaussianSolver));
        reg.register(Arc::new(BinaryFirstSolver));
        reg.register(Arc::new(InactivationSolver));
        reg
    }

    pub fn register(&mut self, solver: Arc<dyn Solver>) {
        self.solvers.insert(solver.name().to_string(), solver);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Solver>, UnknownSolver> {
        self.solvers
            .get(name)
            .cloned()
            .ok_or_else(|| UnknownSolver {
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&str> {
        self.solvers.keys().map(String::as_str).collect()
    }
}

impl std::fmt::Debug for SolverRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.names()).finish()
    }
}
