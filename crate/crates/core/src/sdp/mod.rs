//! Dense primal-dual interior-point solver for block-diagonal SDPs with
//! free variables.
//!
//! Primal form:
//!
//! ```text
//! minimize    sum_b <C_b, X_b> + c_f^T y + c0
//! subject to  sum_b <A_kb, X_b> + F_k^T y = b_k,   X_b PSD,  y free
//! ```
//!
//! Constraint and objective matrices are given as linear functionals on the
//! upper-triangular entries `X[i][j]` (`i <= j`), so a coefficient `a` on the
//! entry `(i, j)` with `i < j` contributes `a * X[i][j]` once.

mod dump;
mod ipm;
mod presolve;
mod residual;

use nalgebra::DMatrix;

pub use dump::{dump_problem, load_problem};
pub use residual::{residuals, Residuals};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SdpError {
    #[error("block {block} does not exist (problem has {nblocks})")]
    BadBlock { block: usize, nblocks: usize },
    #[error("entry ({i}, {j}) is out of range for block {block} of size {dim}")]
    BadEntry {
        block: usize,
        i: usize,
        j: usize,
        dim: usize,
    },
    #[error("free variable {index} out of range (problem has {nfree})")]
    BadFree { index: usize, nfree: usize },
    #[error("non-finite coefficient in {0}")]
    NonFinite(String),
    #[error("malformed problem dump at line {line}: {message}")]
    Dump { line: usize, message: String },
}

/// One upper-triangular entry of a block matrix with its coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockEntry {
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub coef: f64,
}

/// A linear functional over block entries and free variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearForm {
    pub entries: Vec<BlockEntry>,
    pub free: Vec<(usize, f64)>,
}

impl LinearForm {
    pub fn new() -> Self {
        LinearForm::default()
    }

    /// Adds `coef * X_block[i][j]`; the pair is normalized to `i <= j`.
    pub fn add_entry(&mut self, block: usize, i: usize, j: usize, coef: f64) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.entries.push(BlockEntry { block, i, j, coef });
    }

    pub fn add_free(&mut self, index: usize, coef: f64) {
        self.free.push((index, coef));
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty() && self.free.is_empty()
    }

    /// Value of the functional at a point.
    pub fn evaluate(&self, blocks: &[DMatrix<f64>], free: &[f64]) -> f64 {
        let mut acc = 0.0;
        for e in &self.entries {
            acc += e.coef * blocks[e.block][(e.i, e.j)];
        }
        for &(k, c) in &self.free {
            acc += c * free[k];
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub form: LinearForm,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SdpProblem {
    pub block_dims: Vec<usize>,
    pub num_free: usize,
    pub constraints: Vec<Constraint>,
    pub objective: LinearForm,
    pub objective_constant: f64,
}

impl SdpProblem {
    pub fn new(block_dims: Vec<usize>, num_free: usize) -> Self {
        SdpProblem {
            block_dims,
            num_free,
            ..Default::default()
        }
    }

    pub fn add_block(&mut self, dim: usize) -> usize {
        self.block_dims.push(dim);
        self.block_dims.len() - 1
    }

    pub fn add_free(&mut self, count: usize) -> usize {
        self.num_free += count;
        self.num_free - count
    }

    pub fn add_constraint(&mut self, form: LinearForm, rhs: f64) {
        self.constraints.push(Constraint { form, rhs });
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Structural checks: indices in range and coefficients finite.
    pub fn validate(&self) -> Result<(), SdpError> {
        let check = |form: &LinearForm, what: &str| -> Result<(), SdpError> {
            for e in &form.entries {
                let Some(&dim) = self.block_dims.get(e.block) else {
                    return Err(SdpError::BadBlock {
                        block: e.block,
                        nblocks: self.block_dims.len(),
                    });
                };
                if e.i > e.j || e.j >= dim {
                    return Err(SdpError::BadEntry {
                        block: e.block,
                        i: e.i,
                        j: e.j,
                        dim,
                    });
                }
                if !e.coef.is_finite() {
                    return Err(SdpError::NonFinite(what.to_string()));
                }
            }
            for &(k, c) in &form.free {
                if k >= self.num_free {
                    return Err(SdpError::BadFree {
                        index: k,
                        nfree: self.num_free,
                    });
                }
                if !c.is_finite() {
                    return Err(SdpError::NonFinite(what.to_string()));
                }
            }
            Ok(())
        };
        check(&self.objective, "objective")?;
        if !self.objective_constant.is_finite() {
            return Err(SdpError::NonFinite("objective constant".into()));
        }
        for (k, c) in self.constraints.iter().enumerate() {
            check(&c.form, &format!("constraint {k}"))?;
            if !c.rhs.is_finite() {
                return Err(SdpError::NonFinite(format!("rhs of constraint {k}")));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, blocks: &[DMatrix<f64>], free: &[f64]) -> f64 {
        self.objective.evaluate(blocks, free) + self.objective_constant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIterations,
    NumericalFailure,
}

impl std::fmt::Display for SdpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SdpStatus::Optimal => "optimal",
            SdpStatus::Infeasible => "infeasible",
            SdpStatus::Unbounded => "unbounded",
            SdpStatus::MaxIterations => "max-iterations",
            SdpStatus::NumericalFailure => "numerical-failure",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
    /// Threshold for improving-ray detection.
    pub infeas_tol: f64,
    /// A stalled or iteration-limited run whose best point meets this
    /// looser tolerance is reported optimal at reduced accuracy.
    pub reduced_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iter: 200,
            infeas_tol: 1e-8,
            reduced_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub blocks: Vec<DMatrix<f64>>,
    pub free: Vec<f64>,
    /// One multiplier per constraint (dual `y`).
    pub duals: Vec<f64>,
    /// Dual slack matrices `S_b = C_b - sum_k y_k A_kb`.
    pub dual_slacks: Vec<DMatrix<f64>>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub residuals: Residuals,
    /// Set when infeasibility or unboundedness was detected but the
    /// certificate is poorly conditioned.
    pub certified: bool,
    pub message: String,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }
}

/// Solves the problem; structural errors are reported as `Err`, numerical
/// outcomes through `SdpSolution::status`.
pub fn solve(problem: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution, SdpError> {
    problem.validate()?;
    Ok(presolve::solve_with_presolve(problem, opts))
}

/// Block offsets and sizes in symmetric-vectorized coordinates.
#[derive(Debug, Clone)]
pub(crate) struct SvecLayout {
    pub dims: Vec<usize>,
    pub offsets: Vec<usize>,
    pub len: usize,
}

impl SvecLayout {
    pub fn new(dims: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(dims.len());
        let mut len = 0;
        for &d in dims {
            offsets.push(len);
            len += d * (d + 1) / 2;
        }
        SvecLayout {
            dims: dims.to_vec(),
            offsets,
            len,
        }
    }

    #[inline]
    pub fn index(&self, block: usize, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.offsets[block] + j * (j + 1) / 2 + i
    }

    pub fn svec_into(&self, block: usize, m: &DMatrix<f64>, out: &mut [f64]) {
        let n = self.dims[block];
        let off = self.offsets[block];
        let r2 = std::f64::consts::SQRT_2;
        for j in 0..n {
            let base = off + j * (j + 1) / 2;
            for i in 0..j {
                out[base + i] = r2 * 0.5 * (m[(i, j)] + m[(j, i)]);
            }
            out[base + j] = m[(j, j)];
        }
    }

    pub fn smat(&self, block: usize, v: &[f64]) -> DMatrix<f64> {
        let n = self.dims[block];
        let off = self.offsets[block];
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            let base = off + j * (j + 1) / 2;
            for i in 0..j {
                let val = v[base + i] * s;
                m[(i, j)] = val;
                m[(j, i)] = val;
            }
            m[(j, j)] = v[base + j];
        }
        m
    }

    /// Converts an entry-functional coefficient to its svec coefficient.
    #[inline]
    pub fn coef_to_svec(i: usize, j: usize, coef: f64) -> f64 {
        if i == j {
            coef
        } else {
            coef * std::f64::consts::FRAC_1_SQRT_2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_round_trip_and_inner_product() {
        let lay = SvecLayout::new(&[2, 3]);
        assert_eq!(lay.len, 3 + 6);
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let b = DMatrix::from_row_slice(3, 3, &[0.5, -1.0, 0.0, -1.0, 2.0, 1.5, 0.0, 1.5, -3.0]);
        let mut va = vec![0.0; lay.len];
        let mut vb = vec![0.0; lay.len];
        lay.svec_into(1, &a, &mut va);
        lay.svec_into(1, &b, &mut vb);
        let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
        assert!((dot - a.dot(&b)).abs() < 1e-12);
        assert!((lay.smat(1, &va) - &a).amax() < 1e-14);
    }

    #[test]
    fn validation_catches_bad_indices() {
        let mut p = SdpProblem::new(vec![2], 1);
        let mut f = LinearForm::new();
        f.add_entry(0, 0, 2, 1.0);
        p.add_constraint(f, 1.0);
        assert!(matches!(p.validate(), Err(SdpError::BadEntry { .. })));
        let mut p = SdpProblem::new(vec![2], 1);
        let mut f = LinearForm::new();
        f.add_free(1, 1.0);
        p.add_constraint(f, 1.0);
        assert!(matches!(p.validate(), Err(SdpError::BadFree { .. })));
        let mut p = SdpProblem::new(vec![2], 0);
        p.objective.add_entry(3, 0, 0, 1.0);
        assert!(matches!(p.validate(), Err(SdpError::BadBlock { .. })));
    }
}
