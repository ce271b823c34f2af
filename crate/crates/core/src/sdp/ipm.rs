//! Infeasible-start primal-dual path following on a cone-only problem with
//! orthonormal constraint rows:
//! `min c^T x  s.t.  A x = b,  x in the product of PSD cones` (svec form).

use nalgebra::{Cholesky, DMatrix, DVector};

use super::{SdpStatus, SolverOptions, SvecLayout};

pub(crate) struct ConeProblem {
    pub layout: SvecLayout,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
}

pub(crate) struct ConeResult {
    pub status: SdpStatus,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub s: DVector<f64>,
    pub iterations: usize,
    pub certified: bool,
    pub message: String,
}

const STEP_FRACTION: f64 = 0.98;

struct Iterate {
    x: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    s: Vec<DMatrix<f64>>,
}

struct Scaling {
    g: DMatrix<f64>,
    ginv: DMatrix<f64>,
    lambda: DVector<f64>,
    w: DMatrix<f64>,
}

struct Metrics {
    pinf: f64,
    dinf: f64,
    relgap: f64,
    mu: f64,
}

impl Metrics {
    fn merit(&self) -> f64 {
        self.pinf.max(self.dinf).max(self.relgap)
    }
}

struct Ctx<'a> {
    p: &'a ConeProblem,
    b: DVector<f64>,
    c: DVector<f64>,
    /// Dense constraint matrices per block, `None` when identically zero.
    amats: Vec<Vec<Option<DMatrix<f64>>>>,
    ntot: usize,
}

impl Ctx<'_> {
    fn m(&self) -> usize {
        self.p.a.nrows()
    }

    fn svec(&self, blocks: &[DMatrix<f64>]) -> DVector<f64> {
        let lay = &self.p.layout;
        let mut v = DVector::zeros(lay.len);
        for (k, blk) in blocks.iter().enumerate() {
            lay.svec_into(k, blk, v.as_mut_slice());
        }
        v
    }

    fn smat(&self, v: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let lay = &self.p.layout;
        (0..lay.dims.len())
            .map(|k| lay.smat(k, v.as_slice()))
            .collect()
    }

    fn apply_a(&self, blocks: &[DMatrix<f64>]) -> DVector<f64> {
        &self.p.a * self.svec(blocks)
    }

    fn apply_at(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.smat(&(self.p.a.tr_mul(y)))
    }
}

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn frob(a: &[DMatrix<f64>]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn nt_scaling(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<Scaling> {
    let lx = Cholesky::new(x.clone())?.l();
    let ls = Cholesky::new(s.clone())?.l();
    let svd = (ls.transpose() * &lx).svd(true, true);
    let u = svd.u?;
    let vt = svd.v_t?;
    let sig = svd.singular_values;
    if sig.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    let isq = sig.map(|v| 1.0 / v.sqrt());
    let g = &lx * vt.transpose() * DMatrix::from_diagonal(&isq);
    let ginv = DMatrix::from_diagonal(&isq) * u.transpose() * ls.transpose();
    let w = &g * g.transpose();
    Some(Scaling {
        g,
        ginv,
        lambda: sig,
        w,
    })
}

/// Largest `alpha` keeping `x + alpha * dx` PSD (infinite when unbounded).
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let Some(ch) = Cholesky::new(x.clone()) else {
        return 0.0;
    };
    let l = ch.l();
    let Some(t) = l.solve_lower_triangular(dx) else {
        return 0.0;
    };
    let Some(m) = l.solve_lower_triangular(&t.transpose()) else {
        return 0.0;
    };
    let lmin = sym(m).symmetric_eigenvalues().min();
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn max_step_all(x: &[DMatrix<f64>], dx: &[DMatrix<f64>]) -> f64 {
    x.iter()
        .zip(dx)
        .map(|(a, d)| max_step(a, d))
        .fold(f64::INFINITY, f64::min)
}

/// `accept` receives unscaled `(x, y, s)` once the internal measures meet
/// the tolerances and decides whether the point is good enough for the
/// caller's own residual test.
pub(crate) fn solve_cone(
    p: &ConeProblem,
    opts: &SolverOptions,
    accept: &dyn Fn(&DVector<f64>, &DVector<f64>, &DVector<f64>) -> bool,
) -> ConeResult {
    let lay = &p.layout;
    let nb = lay.dims.len();
    let m = p.a.nrows();
    let bscale = p.b.norm().max(1.0);
    let cscale = p.c.norm().max(1.0);
    let bnorm = p.b.norm();
    let cnorm = p.c.norm();

    let mut amats = vec![Vec::with_capacity(m); nb];
    for (blk, mats) in amats.iter_mut().enumerate() {
        let off = lay.offsets[blk];
        let d = lay.dims[blk];
        let len = d * (d + 1) / 2;
        for k in 0..m {
            let row = p.a.view((k, off), (1, len));
            if row.iter().all(|v| *v == 0.0) {
                mats.push(None);
            } else {
                let mut full = vec![0.0; lay.len];
                full[off..off + len].copy_from_slice(row.transpose().as_slice());
                mats.push(Some(lay.smat(blk, &full)));
            }
        }
    }
    let ctx = Ctx {
        p,
        b: &p.b / bscale,
        c: &p.c / cscale,
        amats,
        ntot: lay.dims.iter().sum(),
    };
    let cmats = ctx.smat(&ctx.c);

    let mut it = initial_point(&ctx, &cmats);
    let mut best: Option<(f64, Iterate)> = None;
    let mut status = SdpStatus::MaxIterations;
    let mut certified = false;
    let mut message = String::from("iteration limit reached");
    let mut iters = 0;
    let mut stall = 0;
    let mut last_merit = f64::INFINITY;

    if ctx.ntot == 0 {
        return finish(
            &ctx,
            Iterate {
                x: vec![],
                y: DVector::zeros(m),
                s: vec![],
            },
            bscale,
            cscale,
            if p.b.norm() == 0.0 {
                SdpStatus::Optimal
            } else {
                SdpStatus::Infeasible
            },
            0,
            true,
            "empty cone".into(),
        );
    }

    for k in 0..=opts.max_iter {
        iters = k;
        let ax = ctx.apply_a(&it.x);
        let rp = &ctx.b - &ax;
        let aty = ctx.apply_at(&it.y);
        let rd: Vec<DMatrix<f64>> = cmats
            .iter()
            .zip(&aty)
            .zip(&it.s)
            .map(|((c, a), s)| c - a - s)
            .collect();
        let ctx_val = inner(&cmats, &it.x);
        let bty = ctx.b.dot(&it.y);
        let pobj = ctx_val * bscale * cscale;
        let dobj = bty * bscale * cscale;
        let xs = inner(&it.x, &it.s);
        let met = Metrics {
            pinf: rp.norm() * bscale / (1.0 + bnorm),
            dinf: frob(&rd) * cscale / (1.0 + cnorm),
            relgap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
            mu: xs / ctx.ntot as f64,
        };
        log::trace!(
            "ipm {k}: pobj={pobj:.9e} dobj={dobj:.9e} pinf={:.2e} dinf={:.2e} gap={:.2e} mu={:.2e}",
            met.pinf,
            met.dinf,
            met.relgap,
            met.mu
        );
        if met.relgap < opts.gap_tol
            && met.pinf < opts.feas_tol
            && met.dinf < opts.feas_tol
            && accept(
                &(ctx.svec(&it.x) * bscale),
                &(&it.y * cscale),
                &(ctx.svec(&it.s) * cscale),
            )
        {
            status = SdpStatus::Optimal;
            message = "converged".into();
            best = None;
            break;
        }
        // Improving rays.
        let aty_s: Vec<DMatrix<f64>> = aty.iter().zip(&it.s).map(|(a, s)| a + s).collect();
        if bty > 0.0 && frob(&aty_s) / bty < opts.infeas_tol {
            status = SdpStatus::Infeasible;
            certified = true;
            message = "dual improving ray found".into();
            best = None;
            break;
        }
        if ctx_val < 0.0 && ax.norm() / (-ctx_val) < opts.infeas_tol {
            status = SdpStatus::Unbounded;
            certified = true;
            message = "primal improving ray found".into();
            best = None;
            break;
        }
        let merit = met.merit();
        if best.as_ref().is_none_or(|(bm, _)| merit < *bm) {
            best = Some((
                merit,
                Iterate {
                    x: it.x.clone(),
                    y: it.y.clone(),
                    s: it.s.clone(),
                },
            ));
        }
        if merit > 0.999 * last_merit {
            stall += 1;
        } else {
            stall = 0;
        }
        last_merit = last_merit.min(merit);
        if stall >= 15 {
            message = "progress stalled".into();
            status = stall_status(bty, ctx_val, &aty_s, &ax, &mut certified, &mut message);
            break;
        }
        if k == opts.max_iter {
            status = stall_status(bty, ctx_val, &aty_s, &ax, &mut certified, &mut message);
            break;
        }

        match step(&ctx, &mut it, &rp, &rd, met.mu) {
            Ok(()) => {}
            Err(msg) => {
                message = msg;
                status = match stall_status(bty, ctx_val, &aty_s, &ax, &mut certified, &mut message) {
                    SdpStatus::MaxIterations => SdpStatus::NumericalFailure,
                    s => s,
                };
                break;
            }
        }
    }

    let out = match best {
        Some((_, b)) if status != SdpStatus::Infeasible && status != SdpStatus::Unbounded => b,
        _ => it,
    };
    finish(&ctx, out, bscale, cscale, status, iters, certified, message)
}

/// Weaker ray test used when the iteration ends without convergence.
fn stall_status(
    bty: f64,
    ctx_val: f64,
    aty_s: &[DMatrix<f64>],
    ax: &DVector<f64>,
    certified: &mut bool,
    message: &mut String,
) -> SdpStatus {
    const WEAK: f64 = 1e-5;
    if bty > 0.0 && frob(aty_s) / bty < WEAK {
        *certified = false;
        *message = format!("{message}; likely infeasible (not certified)");
        return SdpStatus::Infeasible;
    }
    if ctx_val < 0.0 && ax.norm() / (-ctx_val) < WEAK {
        *certified = false;
        *message = format!("{message}; likely unbounded (not certified)");
        return SdpStatus::Unbounded;
    }
    SdpStatus::MaxIterations
}

#[allow(clippy::too_many_arguments)]
fn finish(
    ctx: &Ctx,
    it: Iterate,
    bscale: f64,
    cscale: f64,
    status: SdpStatus,
    iterations: usize,
    certified: bool,
    message: String,
) -> ConeResult {
    let x = ctx.svec(&it.x) * bscale;
    let s = ctx.svec(&it.s) * cscale;
    let y = it.y * cscale;
    ConeResult {
        status,
        x,
        y,
        s,
        iterations,
        certified,
        message,
    }
}

fn initial_point(ctx: &Ctx, cmats: &[DMatrix<f64>]) -> Iterate {
    let lay = &ctx.p.layout;
    let m = ctx.m();
    let mut x = Vec::new();
    let mut s = Vec::new();
    for (blk, &d) in lay.dims.iter().enumerate() {
        let n = d as f64;
        let mut xi: f64 = 10f64.max(n.sqrt());
        let mut eta: f64 = 10f64.max(n.sqrt()).max(cmats[blk].norm());
        for k in 0..m {
            if let Some(a) = &ctx.amats[blk][k] {
                let an = a.norm();
                xi = xi.max(n.sqrt() * (1.0 + ctx.b[k].abs()) / (1.0 + an));
                eta = eta.max(an);
            }
        }
        x.push(DMatrix::identity(d, d) * xi);
        s.push(DMatrix::identity(d, d) * eta);
    }
    Iterate {
        x,
        y: DVector::zeros(m),
        s,
    }
}

fn schur(ctx: &Ctx, sc: &[Scaling]) -> DMatrix<f64> {
    let lay = &ctx.p.layout;
    let m = ctx.m();
    let mut mat = DMatrix::zeros(m, m);
    for (blk, scb) in sc.iter().enumerate() {
        let d = lay.dims[blk];
        let off = lay.offsets[blk];
        let len = d * (d + 1) / 2;
        if len == 0 {
            continue;
        }
        let mut bmat = DMatrix::zeros(len, m);
        let mut any = false;
        let mut buf = vec![0.0; lay.len];
        for k in 0..m {
            if let Some(a) = &ctx.amats[blk][k] {
                let p = &scb.w * a * &scb.w;
                lay.svec_into(blk, &p, &mut buf);
                bmat.column_mut(k).copy_from_slice(&buf[off..off + len]);
                any = true;
            }
        }
        if any {
            let ab = ctx.p.a.columns(off, len);
            mat += ab * bmat;
        }
    }
    sym(mat)
}

fn factor(mut mat: DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    let m = mat.nrows();
    let dmax = (0..m).map(|i| mat[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    if let Some(ch) = Cholesky::new(mat.clone()) {
        return Some(ch);
    }
    let mut reg = 1e-14 * dmax;
    for _ in 0..8 {
        for i in 0..m {
            mat[(i, i)] += reg;
        }
        if let Some(ch) = Cholesky::new(mat.clone()) {
            return Some(ch);
        }
        reg *= 100.0;
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn corrected(
    ctx: &Ctx,
    sc: &[Scaling],
    chol: &Cholesky<f64, nalgebra::Dyn>,
    rp: &DVector<f64>,
    rd: &[DMatrix<f64>],
    it: &Iterate,
    dxa: &[DMatrix<f64>],
    dsa: &[DMatrix<f64>],
    target: f64,
    second_order: bool,
) -> (Vec<DMatrix<f64>>, DVector<f64>, Vec<DMatrix<f64>>, f64, f64) {
    let mut r = Vec::with_capacity(sc.len());
    for ((s, dx), ds) in sc.iter().zip(dxa).zip(dsa) {
        let n = s.lambda.len();
        let corr = if second_order {
            let dxt = &s.ginv * dx * s.ginv.transpose();
            let dst = s.g.transpose() * ds * &s.g;
            sym(&dxt * &dst)
        } else {
            DMatrix::zeros(n, n)
        };
        let mut e = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut rc = -corr[(i, j)];
                if i == j {
                    rc += target - s.lambda[i] * s.lambda[i];
                }
                e[(i, j)] = 2.0 * rc / (s.lambda[i] + s.lambda[j]);
            }
        }
        r.push(sym(&s.g * e * s.g.transpose()));
    }
    let (dx, dy, ds) = direction(ctx, sc, chol, rp, rd, &r);
    let ap = (STEP_FRACTION * max_step_all(&it.x, &dx)).min(1.0);
    let ad = (STEP_FRACTION * max_step_all(&it.s, &ds)).min(1.0);
    (dx, dy, ds, ap, ad)
}

type Direction = (Vec<DMatrix<f64>>, DVector<f64>, Vec<DMatrix<f64>>);

fn direction(
    ctx: &Ctx,
    sc: &[Scaling],
    chol: &Cholesky<f64, nalgebra::Dyn>,
    rp: &DVector<f64>,
    rd: &[DMatrix<f64>],
    r: &[DMatrix<f64>],
) -> Direction {
    let t: Vec<DMatrix<f64>> = r
        .iter()
        .zip(rd)
        .zip(sc)
        .map(|((rb, rdb), s)| rb - &s.w * rdb * &s.w)
        .collect();
    let h = rp - ctx.apply_a(&t);
    let mut dy = chol.solve(&h);
    // Iterative refinement against the unfactored operator.
    for _ in 0..2 {
        let wat: Vec<DMatrix<f64>> = ctx
            .apply_at(&dy)
            .iter()
            .zip(sc)
            .map(|(a, s)| &s.w * a * &s.w)
            .collect();
        let res = &h - ctx.apply_a(&wat);
        if res.norm() <= 1e-15 * h.norm() {
            break;
        }
        dy += chol.solve(&res);
    }
    let atdy = ctx.apply_at(&dy);
    let ds: Vec<DMatrix<f64>> = rd.iter().zip(&atdy).map(|(a, b)| a - b).collect();
    let dx: Vec<DMatrix<f64>> = r
        .iter()
        .zip(&ds)
        .zip(sc)
        .map(|((rb, dsb), s)| sym(rb - &s.w * dsb * &s.w))
        .collect();
    (dx, dy, ds)
}

fn step(
    ctx: &Ctx,
    it: &mut Iterate,
    rp: &DVector<f64>,
    rd: &[DMatrix<f64>],
    mu: f64,
) -> Result<(), String> {
    let mut sc = Vec::with_capacity(it.x.len());
    for (x, s) in it.x.iter().zip(&it.s) {
        sc.push(nt_scaling(x, s).ok_or("scaling failed: iterate left the cone")?);
    }
    let chol = factor(schur(ctx, &sc)).ok_or("Schur complement is singular")?;

    // Predictor.
    let r_aff: Vec<DMatrix<f64>> = it.x.iter().map(|x| -x).collect();
    let (dxa, _, dsa) = direction(ctx, &sc, &chol, rp, rd, &r_aff);
    let ap = max_step_all(&it.x, &dxa).min(1.0);
    let ad = max_step_all(&it.s, &dsa).min(1.0);
    let xa: Vec<DMatrix<f64>> = it.x.iter().zip(&dxa).map(|(x, d)| x + d * ap).collect();
    let sa: Vec<DMatrix<f64>> = it.s.iter().zip(&dsa).map(|(s, d)| s + d * ad).collect();
    let mu_aff = inner(&xa, &sa) / ctx.ntot as f64;
    let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

    let (mut dx, mut dy, mut ds, mut ap, mut ad) =
        corrected(ctx, &sc, &chol, rp, rd, it, &dxa, &dsa, sigma * mu, true);
    // A short Mehrotra step signals lost centrality: retry with a more
    // centered first-order direction and keep the longer step.
    if ap.min(ad) < 0.2 {
        let target = sigma.max(0.5) * mu;
        let alt = corrected(ctx, &sc, &chol, rp, rd, it, &dxa, &dsa, target, false);
        if alt.3.min(alt.4) > ap.min(ad) {
            (dx, dy, ds, ap, ad) = alt;
        }
    }
    log::trace!("  sigma={sigma:.2e} step=({ap:.2e}, {ad:.2e})");
    if !(ap.is_finite() && ad.is_finite()) || (ap < 1e-12 && ad < 1e-12) {
        return Err("step length collapsed".into());
    }
    for (x, d) in it.x.iter_mut().zip(&dx) {
        *x = sym(&*x + d * ap);
    }
    for (s, d) in it.s.iter_mut().zip(&ds) {
        *s = sym(&*s + d * ad);
    }
    it.y += dy * ad;
    Ok(())
}
