//! Reduction of the general problem to a cone-only problem with orthonormal
//! rows, and recovery of the original variables.
//!
//! Free variables `y` with constraint matrix `F` are eliminated by projecting
//! the equalities onto the left null space of `F`. When `F` is badly
//! conditioned each free variable is split into a difference of two
//! nonnegative scalars instead.

use nalgebra::{DMatrix, DVector};

use super::ipm::{solve_cone, ConeProblem};
use super::residual::residuals_of;
use super::{LinearForm, SdpProblem, SdpSolution, SdpStatus, SolverOptions, SvecLayout};

const RANK_TOL: f64 = 1e-12;
const SPLIT_COND: f64 = 1e8;

struct Dense {
    layout: SvecLayout,
    a: DMatrix<f64>,
    f: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
    cf: DVector<f64>,
}

fn densify(problem: &SdpProblem) -> Dense {
    let layout = SvecLayout::new(&problem.block_dims);
    let m = problem.constraints.len();
    let mut a = DMatrix::zeros(m, layout.len);
    let mut f = DMatrix::zeros(m, problem.num_free);
    let mut b = DVector::zeros(m);
    for (k, con) in problem.constraints.iter().enumerate() {
        for e in &con.form.entries {
            a[(k, layout.index(e.block, e.i, e.j))] += SvecLayout::coef_to_svec(e.i, e.j, e.coef);
        }
        for &(j, v) in &con.form.free {
            f[(k, j)] += v;
        }
        b[k] = con.rhs;
    }
    let (c, cf) = objective_vectors(&layout, problem.num_free, &problem.objective);
    Dense {
        layout,
        a,
        f,
        b,
        c,
        cf,
    }
}

fn objective_vectors(
    layout: &SvecLayout,
    nfree: usize,
    form: &LinearForm,
) -> (DVector<f64>, DVector<f64>) {
    let mut c = DVector::zeros(layout.len);
    let mut cf = DVector::zeros(nfree);
    for e in &form.entries {
        c[layout.index(e.block, e.i, e.j)] += SvecLayout::coef_to_svec(e.i, e.j, e.coef);
    }
    for &(j, v) in &form.free {
        cf[j] += v;
    }
    (c, cf)
}

/// Orthonormal basis of the complement of the columns of `u1` in `R^m`.
fn complement_basis(u1: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    let r = u1.ncols();
    if r == 0 {
        return DMatrix::identity(m, m);
    }
    if r >= m {
        return DMatrix::zeros(m, 0);
    }
    let proj = DMatrix::identity(m, m) - u1 * u1.transpose();
    let eig = proj.symmetric_eigen();
    let keep: Vec<usize> = (0..m).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    let mut out = DMatrix::zeros(m, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        out.set_column(c, &eig.eigenvectors.column(i));
    }
    out
}

fn failure(problem: &SdpProblem, status: SdpStatus, message: &str) -> SdpSolution {
    let blocks: Vec<DMatrix<f64>> = problem
        .block_dims
        .iter()
        .map(|&d| DMatrix::zeros(d, d))
        .collect();
    let free = vec![0.0; problem.num_free];
    let duals = vec![0.0; problem.constraints.len()];
    let residuals = residuals_of(problem, &blocks, &free, &duals, &blocks);
    SdpSolution {
        status,
        dual_slacks: blocks.clone(),
        blocks,
        free,
        duals,
        primal_objective: f64::NAN,
        dual_objective: f64::NAN,
        iterations: 0,
        residuals,
        certified: true,
        message: message.into(),
    }
}

pub(crate) fn solve_with_presolve(problem: &SdpProblem, opts: &SolverOptions) -> SdpSolution {
    let d = densify(problem);
    let m = d.a.nrows();
    let p = d.f.ncols();

    // Free-variable elimination.
    let mut u1 = DMatrix::zeros(m, 0);
    let mut sig1 = DVector::zeros(0);
    let mut v1 = DMatrix::zeros(p, 0);
    if p > 0 && m > 0 {
        let svd = d.f.clone().svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let sv = &svd.singular_values;
        let smax = sv.max();
        let mut idx: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > RANK_TOL * smax).collect();
        idx.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
        if let Some(&last) = idx.last() {
            if smax / sv[last] > SPLIT_COND {
                log::debug!("free-variable block is ill-conditioned; splitting");
                return solve_split(problem, opts);
            }
        }
        u1 = DMatrix::zeros(m, idx.len());
        v1 = DMatrix::zeros(p, idx.len());
        sig1 = DVector::zeros(idx.len());
        for (c, &i) in idx.iter().enumerate() {
            u1.set_column(c, &u.column(i));
            v1.set_column(c, &vt.row(i).transpose());
            sig1[c] = sv[i];
        }
    }
    if p > 0 {
        let resid = &d.cf - &v1 * v1.tr_mul(&d.cf);
        if resid.norm() > 1e-9 * (1.0 + d.cf.norm()) {
            return failure(
                problem,
                SdpStatus::Unbounded,
                "objective decreases along a free direction that no constraint restricts",
            );
        }
    }
    let w = &u1 * v1.tr_mul(&d.cf).component_div(&sig1);
    let c_shift = &d.c - d.a.tr_mul(&w);
    let u2 = complement_basis(&u1, m);
    let ar = u2.tr_mul(&d.a);
    let br = u2.tr_mul(&d.b);

    // Row orthonormalization.
    let mr = ar.nrows();
    let (ao, bo, tmap) = if mr == 0 {
        (
            DMatrix::zeros(0, d.layout.len),
            DVector::zeros(0),
            DMatrix::zeros(0, 0),
        )
    } else {
        let svd = ar.clone().svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let sv = &svd.singular_values;
        let smax = sv.max();
        let keep: Vec<usize> = (0..sv.len())
            .filter(|&i| smax > 0.0 && sv[i] > RANK_TOL * smax)
            .collect();
        let mut ao = DMatrix::zeros(keep.len(), d.layout.len);
        let mut t = DMatrix::zeros(keep.len(), mr);
        for (r, &i) in keep.iter().enumerate() {
            ao.set_row(r, &vt.row(i));
            t.set_row(r, &(u.column(i).transpose() / sv[i]));
        }
        let bo = &t * &br;
        let mut uk = DMatrix::zeros(mr, keep.len());
        for (r, &i) in keep.iter().enumerate() {
            uk.set_column(r, &u.column(i));
        }
        let incons = &br - &uk * uk.tr_mul(&br);
        if incons.norm() > 1e-9 * (1.0 + br.norm()) {
            return failure(
                problem,
                SdpStatus::Infeasible,
                "equality constraints are inconsistent",
            );
        }
        (ao, bo, t)
    };

    let cone = ConeProblem {
        layout: d.layout.clone(),
        a: ao,
        b: bo,
        c: c_shift,
    };
    let recover = |x: &DVector<f64>, y: &DVector<f64>, s: &DVector<f64>| {
        let blocks: Vec<DMatrix<f64>> = (0..problem.block_dims.len())
            .map(|k| d.layout.smat(k, x.as_slice()))
            .collect();
        let slacks: Vec<DMatrix<f64>> = (0..problem.block_dims.len())
            .map(|k| d.layout.smat(k, s.as_slice()))
            .collect();
        let duals = &w + &u2 * tmap.tr_mul(y);
        let free = if p > 0 {
            let rhs = &d.b - &d.a * x;
            &v1 * u1.tr_mul(&rhs).component_div(&sig1)
        } else {
            DVector::zeros(0)
        };
        (
            blocks,
            free.as_slice().to_vec(),
            duals.as_slice().to_vec(),
            slacks,
        )
    };
    let accept = |x: &DVector<f64>, y: &DVector<f64>, s: &DVector<f64>| {
        let (blocks, free, duals, slacks) = recover(x, y, s);
        meets(&residuals_of(problem, &blocks, &free, &duals, &slacks), opts)
    };
    let res = solve_cone(&cone, opts, &accept);
    let (blocks, free, duals, slacks) = recover(&res.x, &res.y, &res.s);
    assemble(
        problem,
        blocks,
        free,
        duals,
        slacks,
        res.status,
        res.iterations,
        res.certified,
        res.message,
        opts,
    )
}

fn meets(r: &super::Residuals, opts: &SolverOptions) -> bool {
    r.primal_infeas < opts.feas_tol
        && r.dual_infeas < opts.feas_tol
        && r.relative_gap < opts.gap_tol
        && r.primal_min_eig >= -opts.feas_tol
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    problem: &SdpProblem,
    blocks: Vec<DMatrix<f64>>,
    free: Vec<f64>,
    duals: Vec<f64>,
    slacks: Vec<DMatrix<f64>>,
    mut status: SdpStatus,
    iterations: usize,
    certified: bool,
    mut message: String,
    opts: &SolverOptions,
) -> SdpSolution {
    let residuals = residuals_of(problem, &blocks, &free, &duals, &slacks);
    if status == SdpStatus::Optimal && !meets(&residuals, opts) {
        status = SdpStatus::NumericalFailure;
        message = format!(
            "reduced problem converged but recovered residuals are too large \
             (primal {:.2e}, dual {:.2e}, gap {:.2e})",
            residuals.primal_infeas, residuals.dual_infeas, residuals.relative_gap
        );
    }
    let loose = SolverOptions {
        gap_tol: opts.reduced_tol,
        feas_tol: opts.reduced_tol,
        ..*opts
    };
    if matches!(status, SdpStatus::MaxIterations | SdpStatus::NumericalFailure)
        && !certified
        && meets(&residuals, &loose)
    {
        status = SdpStatus::Optimal;
        message = format!("{message}; accepted at reduced accuracy");
    }
    let primal_objective = problem.objective_value(&blocks, &free);
    let dual_objective = problem
        .constraints
        .iter()
        .zip(&duals)
        .map(|(c, y)| c.rhs * y)
        .sum::<f64>()
        + problem.objective_constant;
    SdpSolution {
        status,
        blocks,
        free,
        duals,
        dual_slacks: slacks,
        primal_objective,
        dual_objective,
        iterations,
        residuals,
        certified,
        message,
    }
}

/// Fallback: each free variable becomes `p - n` with `p, n >= 0` held in
/// 1x1 blocks.
fn solve_split(problem: &SdpProblem, opts: &SolverOptions) -> SdpSolution {
    let nb = problem.block_dims.len();
    let nf = problem.num_free;
    let mut split = SdpProblem::new(problem.block_dims.clone(), 0);
    split.block_dims.extend(std::iter::repeat_n(1, 2 * nf));
    let map = |form: &LinearForm| -> LinearForm {
        let mut out = LinearForm {
            entries: form.entries.clone(),
            free: vec![],
        };
        for &(k, c) in &form.free {
            out.add_entry(nb + 2 * k, 0, 0, c);
            out.add_entry(nb + 2 * k + 1, 0, 0, -c);
        }
        out
    };
    split.objective = map(&problem.objective);
    split.objective_constant = problem.objective_constant;
    for c in &problem.constraints {
        split.add_constraint(map(&c.form), c.rhs);
    }
    let sol = solve_with_presolve(&split, opts);
    let free: Vec<f64> = (0..nf)
        .map(|k| sol.blocks[nb + 2 * k][(0, 0)] - sol.blocks[nb + 2 * k + 1][(0, 0)])
        .collect();
    assemble(
        problem,
        sol.blocks[..nb].to_vec(),
        free,
        sol.duals,
        sol.dual_slacks[..nb].to_vec(),
        sol.status,
        sol.iterations,
        sol.certified,
        sol.message,
        opts,
    )
}
