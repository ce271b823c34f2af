use nalgebra::DMatrix;

use super::{LinearForm, SdpProblem, SdpSolution};

/// Residuals of a candidate solution, computed directly from the problem
/// data. `gap` is the signed difference `primal - dual` of objectives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    pub primal_infeas: f64,
    pub dual_infeas: f64,
    pub gap: f64,
    pub relative_gap: f64,
    pub primal_min_eig: f64,
    pub dual_min_eig: f64,
}

/// Symmetric matrix `M` with `<M, X> = form(X)` restricted to one block.
pub(crate) fn form_block_matrix(form: &LinearForm, block: usize, dim: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(dim, dim);
    accumulate_form(&mut m, form, block, 1.0);
    m
}

pub(crate) fn accumulate_form(m: &mut DMatrix<f64>, form: &LinearForm, block: usize, scale: f64) {
    for e in form.entries.iter().filter(|e| e.block == block) {
        if e.i == e.j {
            m[(e.i, e.i)] += scale * e.coef;
        } else {
            let h = 0.5 * scale * e.coef;
            m[(e.i, e.j)] += h;
            m[(e.j, e.i)] += h;
        }
    }
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

pub fn residuals(problem: &SdpProblem, sol: &SdpSolution) -> Residuals {
    residuals_of(problem, &sol.blocks, &sol.free, &sol.duals, &sol.dual_slacks)
}

pub(crate) fn residuals_of(
    problem: &SdpProblem,
    blocks: &[DMatrix<f64>],
    free: &[f64],
    duals: &[f64],
    slacks: &[DMatrix<f64>],
) -> Residuals {
    let mut pr = 0.0;
    let mut bnorm = 0.0;
    for c in &problem.constraints {
        let r = c.form.evaluate(blocks, free) - c.rhs;
        pr += r * r;
        bnorm += c.rhs * c.rhs;
    }
    let primal_infeas = pr.sqrt() / (1.0 + bnorm.sqrt());

    let mut dr = 0.0;
    let mut cnorm = 0.0;
    for (b, &dim) in problem.block_dims.iter().enumerate() {
        let cb = form_block_matrix(&problem.objective, b, dim);
        cnorm += cb.norm_squared();
        let mut r = cb;
        for (c, &y) in problem.constraints.iter().zip(duals) {
            accumulate_form(&mut r, &c.form, b, -y);
        }
        if let Some(s) = slacks.get(b) {
            r -= s;
        }
        dr += r.norm_squared();
    }
    let mut cf = vec![0.0; problem.num_free];
    for &(k, c) in &problem.objective.free {
        cf[k] += c;
    }
    cnorm += cf.iter().map(|v| v * v).sum::<f64>();
    for (c, &y) in problem.constraints.iter().zip(duals) {
        for &(k, a) in &c.form.free {
            cf[k] -= y * a;
        }
    }
    dr += cf.iter().map(|v| v * v).sum::<f64>();
    let dual_infeas = dr.sqrt() / (1.0 + cnorm.sqrt());

    let pobj = problem.objective_value(blocks, free);
    let dobj: f64 = problem
        .constraints
        .iter()
        .zip(duals)
        .map(|(c, y)| c.rhs * y)
        .sum::<f64>()
        + problem.objective_constant;
    let gap = pobj - dobj;
    Residuals {
        primal_infeas,
        dual_infeas,
        gap,
        relative_gap: gap.abs() / (1.0 + pobj.abs() + dobj.abs()),
        primal_min_eig: blocks.iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min),
        dual_min_eig: slacks.iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min),
    }
}
