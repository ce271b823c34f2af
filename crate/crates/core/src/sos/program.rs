use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;

use super::certificate::{CertTolerance, GramCertificate};
use super::expr::{AffineExpr, PolyExpr, VarId};
use super::SosError;
use crate::poly::{monomial_basis, BoxRegion, Monomial, Polynomial};
use crate::sdp::{self, LinearForm, SdpProblem, SdpSolution, SdpStatus, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
enum VarKind {
    Free(usize),
    Entry { block: usize, i: usize, j: usize },
}

#[derive(Debug, Clone)]
struct VarSlot {
    name: String,
    kind: VarKind,
}

#[derive(Debug, Clone)]
struct BlockInfo {
    name: String,
    dim: usize,
}

#[derive(Debug, Clone)]
struct SosConstraint {
    name: String,
    expr: PolyExpr,
    basis: Vec<Monomial>,
    block: Option<usize>,
}

#[derive(Debug, Clone)]
struct Equality {
    name: String,
    expr: AffineExpr,
    rhs: f64,
}

/// Decision polynomial `sum_k c_k m_k(x)` with free coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionPoly {
    name: String,
    nvars: usize,
    basis: Vec<Monomial>,
    vars: Vec<VarId>,
}

impl DecisionPoly {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn basis(&self) -> &[Monomial] {
        &self.basis
    }

    pub fn vars(&self) -> &[VarId] {
        &self.vars
    }

    pub fn expr(&self) -> PolyExpr {
        let mut e = PolyExpr::zero(self.nvars);
        for (m, &v) in self.basis.iter().zip(&self.vars) {
            e.add_var_term(v, &Polynomial::monomial(m.clone(), 1.0));
        }
        e
    }
}

/// Symmetric PSD matrix variable; entry handles are shared by `(i, j)` and
/// `(j, i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdBlock {
    name: String,
    dim: usize,
    vars: Vec<VarId>,
}

impl PsdBlock {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> VarId {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.vars[j * (j + 1) / 2 + i]
    }

    pub fn trace(&self) -> AffineExpr {
        let mut e = AffineExpr::default();
        for i in 0..self.dim {
            e.add_term(self.get(i, i), 1.0);
        }
        e
    }
}

/// SOS decision polynomial `m(x)^T Q m(x)` with `Q` a PSD block.
#[derive(Debug, Clone, PartialEq)]
pub struct SosPoly {
    nvars: usize,
    basis: Vec<Monomial>,
    gram: PsdBlock,
}

impl SosPoly {
    pub fn name(&self) -> &str {
        self.gram.name()
    }

    pub fn basis(&self) -> &[Monomial] {
        &self.basis
    }

    pub fn gram(&self) -> &PsdBlock {
        &self.gram
    }

    pub fn expr(&self) -> PolyExpr {
        let mut e = PolyExpr::zero(self.nvars);
        for j in 0..self.basis.len() {
            for i in 0..=j {
                let w = if i == j { 1.0 } else { 2.0 };
                let m = self.basis[i].mul(&self.basis[j]);
                e.add_var_term(self.gram.get(i, j), &Polynomial::monomial(m, w));
            }
        }
        e
    }
}

/// A declarative SOS program: minimize an affine objective subject to SOS,
/// PSD and linear constraints on decision variables.
#[derive(Debug, Clone)]
pub struct SosProgram {
    nvars: usize,
    vars: Vec<VarSlot>,
    num_free: usize,
    blocks: Vec<BlockInfo>,
    names: BTreeSet<String>,
    sos: Vec<SosConstraint>,
    equalities: Vec<Equality>,
    objective: AffineExpr,
    tolerance: CertTolerance,
}

/// Solver outcome with decision values and one certificate per SOS
/// constraint.
#[derive(Debug, Clone)]
pub struct SosSolution {
    pub status: SdpStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    pub certificates: Vec<GramCertificate>,
    /// Optimal status, every SOS certificate valid and every PSD block
    /// within the eigenvalue tolerance.
    pub certified: bool,
    pub sdp: SdpSolution,
}

impl SosSolution {
    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }

    pub fn affine(&self, e: &AffineExpr) -> f64 {
        e.evaluate(&self.values)
    }

    pub fn poly(&self, p: &DecisionPoly) -> Polynomial {
        p.expr().evaluate(&self.values)
    }

    pub fn sos_poly(&self, p: &SosPoly) -> Polynomial {
        p.expr().evaluate(&self.values)
    }

    pub fn expr(&self, e: &PolyExpr) -> Polynomial {
        e.evaluate(&self.values)
    }

    pub fn matrix(&self, b: &PsdBlock) -> DMatrix<f64> {
        DMatrix::from_fn(b.dim, b.dim, |i, j| self.values[b.get(i, j).0])
    }

    pub fn certificate(&self, name: &str) -> Option<&GramCertificate> {
        self.certificates.iter().find(|c| c.name == name)
    }
}

/// Half-basis for an SOS expression with the given support: total degree in
/// `[ceil(dmin/2), dmax/2]` and per-variable exponents within half the
/// support's exponent range.
pub fn half_basis(nvars: usize, support: &BTreeSet<Monomial>) -> Result<Vec<Monomial>, u32> {
    if support.is_empty() {
        return Ok(Vec::new());
    }
    let dmax = support.iter().map(Monomial::degree).max().unwrap();
    if dmax % 2 == 1 {
        return Err(dmax);
    }
    let dmin = support.iter().map(Monomial::degree).min().unwrap();
    let mut hi = vec![0u32; nvars];
    let mut lo = vec![u32::MAX; nvars];
    for m in support {
        for (k, &e) in m.exponents().iter().enumerate() {
            hi[k] = hi[k].max(e);
            lo[k] = lo[k].min(e);
        }
    }
    Ok(monomial_basis(nvars, dmin.div_ceil(2), dmax / 2)
        .into_iter()
        .filter(|m| {
            m.exponents()
                .iter()
                .enumerate()
                .all(|(k, &e)| e <= hi[k] / 2 && e >= lo[k].div_ceil(2))
        })
        .collect())
}

impl SosProgram {
    pub fn new(nvars: usize) -> Self {
        SosProgram {
            nvars,
            vars: Vec::new(),
            num_free: 0,
            blocks: Vec::new(),
            names: BTreeSet::new(),
            sos: Vec::new(),
            equalities: Vec::new(),
            objective: AffineExpr::default(),
            tolerance: CertTolerance::default(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn set_tolerance(&mut self, tol: CertTolerance) {
        self.tolerance = tol;
    }

    pub fn tolerance(&self) -> CertTolerance {
        self.tolerance
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_sos_constraints(&self) -> usize {
        self.sos.len()
    }

    fn claim(&mut self, name: &str) -> Result<(), SosError> {
        if !self.names.insert(name.to_string()) {
            return Err(SosError::DuplicateName(name.to_string()));
        }
        Ok(())
    }

    fn new_free(&mut self, name: String) -> VarId {
        self.vars.push(VarSlot {
            name,
            kind: VarKind::Free(self.num_free),
        });
        self.num_free += 1;
        VarId(self.vars.len() - 1)
    }

    pub fn var_name(&self, v: VarId) -> &str {
        &self.vars[v.0].name
    }

    pub fn declare_scalar(&mut self, name: &str) -> Result<VarId, SosError> {
        self.claim(name)?;
        Ok(self.new_free(name.to_string()))
    }

    pub fn declare_poly(&mut self, name: &str, basis: Vec<Monomial>) -> Result<DecisionPoly, SosError> {
        self.check_basis(name, &basis)?;
        self.claim(name)?;
        let vars = basis
            .iter()
            .map(|m| self.new_free(format!("{name}[{m}]")))
            .collect();
        Ok(DecisionPoly {
            name: name.to_string(),
            nvars: self.nvars,
            basis,
            vars,
        })
    }

    fn check_basis(&self, name: &str, basis: &[Monomial]) -> Result<(), SosError> {
        if basis.is_empty() {
            return Err(SosError::EmptyBasis(name.to_string()));
        }
        let set: BTreeSet<&Monomial> = basis.iter().collect();
        if set.len() != basis.len() {
            return Err(SosError::DuplicateMonomial(name.to_string()));
        }
        if let Some(m) = basis.iter().find(|m| m.nvars() != self.nvars) {
            return Err(SosError::Dimension {
                expected: self.nvars,
                found: m.nvars(),
            });
        }
        Ok(())
    }

    fn new_block(&mut self, name: &str, dim: usize) -> PsdBlock {
        let block = self.blocks.len();
        self.blocks.push(BlockInfo {
            name: name.to_string(),
            dim,
        });
        let mut vars = Vec::with_capacity(dim * (dim + 1) / 2);
        for j in 0..dim {
            for i in 0..=j {
                self.vars.push(VarSlot {
                    name: format!("{name}[{i},{j}]"),
                    kind: VarKind::Entry { block, i, j },
                });
                vars.push(VarId(self.vars.len() - 1));
            }
        }
        PsdBlock {
            name: name.to_string(),
            dim,
            vars,
        }
    }

    pub fn declare_psd(&mut self, name: &str, dim: usize) -> Result<PsdBlock, SosError> {
        if dim == 0 {
            return Err(SosError::EmptyBasis(name.to_string()));
        }
        self.claim(name)?;
        Ok(self.new_block(name, dim))
    }

    pub fn declare_sos_poly(&mut self, name: &str, half_basis: Vec<Monomial>) -> Result<SosPoly, SosError> {
        self.check_basis(name, &half_basis)?;
        self.claim(name)?;
        let gram = self.new_block(name, half_basis.len());
        Ok(SosPoly {
            nvars: self.nvars,
            basis: half_basis,
            gram,
        })
    }

    /// Product of two expressions, rejecting products of decisions.
    pub fn mul(&self, a: &PolyExpr, b: &PolyExpr) -> Result<PolyExpr, SosError> {
        a.try_mul(b).map_err(|(l, r)| SosError::Bilinear {
            left: self.var_name(l).to_string(),
            right: self.var_name(r).to_string(),
        })
    }

    /// Requires `expr` to be SOS; the half-basis is derived from its support.
    pub fn add_sos(&mut self, name: &str, expr: PolyExpr) -> Result<usize, SosError> {
        let support = expr.support();
        let basis = half_basis(self.nvars, &support).map_err(|degree| SosError::OddDegree {
            constraint: name.to_string(),
            degree,
        })?;
        self.add_sos_with_basis(name, expr, basis)
    }

    pub fn add_sos_with_basis(
        &mut self,
        name: &str,
        expr: PolyExpr,
        basis: Vec<Monomial>,
    ) -> Result<usize, SosError> {
        if expr.nvars() != self.nvars {
            return Err(SosError::Dimension {
                expected: self.nvars,
                found: expr.nvars(),
            });
        }
        self.claim(name)?;
        let block = if basis.is_empty() {
            None
        } else {
            self.new_block(name, basis.len());
            Some(self.blocks.len() - 1)
        };
        self.sos.push(SosConstraint {
            name: name.to_string(),
            expr,
            basis,
            block,
        });
        Ok(self.sos.len() - 1)
    }

    /// Requires `expr >= 0` on the box via `expr - sum_j s_j g_j` SOS with SOS
    /// multipliers `s_j` of degree `multiplier_degree` and box inequalities
    /// `g_j`. Returns the constraint index and the multipliers.
    pub fn add_sos_on_box(
        &mut self,
        name: &str,
        expr: PolyExpr,
        region: &BoxRegion,
        multiplier_degree: u32,
    ) -> Result<(usize, Vec<SosPoly>), SosError> {
        self.add_sos_on_set(name, expr, &region.inequalities(), multiplier_degree)
    }

    /// As `add_sos_on_box` for a general list of inequalities `g_j >= 0`.
    pub fn add_sos_on_set(
        &mut self,
        name: &str,
        expr: PolyExpr,
        ineqs: &[Polynomial],
        multiplier_degree: u32,
    ) -> Result<(usize, Vec<SosPoly>), SosError> {
        let mut total = expr;
        let mut mults = Vec::with_capacity(ineqs.len());
        let half = multiplier_degree / 2;
        for (j, g) in ineqs.iter().enumerate() {
            let s = self.declare_sos_poly(&format!("{name}.s{j}"), monomial_basis(self.nvars, 0, half))?;
            total = total.sub(&s.expr().mul_poly(g));
            mults.push(s);
        }
        let idx = self.add_sos(name, total)?;
        Ok((idx, mults))
    }

    pub fn add_equality(&mut self, name: &str, expr: AffineExpr, rhs: f64) {
        self.equalities.push(Equality {
            name: name.to_string(),
            expr,
            rhs,
        });
    }

    /// `expr >= 0` through a nonnegative slack.
    pub fn add_inequality(&mut self, name: &str, expr: AffineExpr) -> Result<(), SosError> {
        let slack = self.declare_psd(&format!("{name}.slack"), 1)?;
        let e = expr.sub(&AffineExpr::var(slack.get(0, 0)));
        self.add_equality(name, AffineExpr { constant: 0.0, ..e.clone() }, -e.constant);
        Ok(())
    }

    /// Symmetric matrix of affine expressions (upper triangle used) required
    /// to be PSD.
    pub fn add_psd(&mut self, name: &str, m: &[Vec<AffineExpr>]) -> Result<PsdBlock, SosError> {
        let blk = self.declare_psd(name, m.len())?;
        for j in 0..m.len() {
            for i in 0..=j {
                let e = AffineExpr::var(blk.get(i, j)).sub(&m[i][j]);
                let rhs = -e.constant;
                self.add_equality(
                    &format!("{name}[{i},{j}]"),
                    AffineExpr { constant: 0.0, ..e },
                    rhs,
                );
            }
        }
        Ok(blk)
    }

    /// Minimize `objective`.
    pub fn set_objective(&mut self, objective: AffineExpr) {
        self.objective = objective;
    }

    fn form_of(&self, e: &AffineExpr) -> LinearForm {
        let mut f = LinearForm::new();
        for (&v, &c) in &e.terms {
            match self.vars[v.0].kind {
                VarKind::Free(k) => f.add_free(k, c),
                VarKind::Entry { block, i, j } => f.add_entry(block, i, j, c),
            }
        }
        f
    }

    /// Coefficient-matching rows of one SOS constraint, keyed by monomial.
    fn sos_rows(&self, c: &SosConstraint) -> BTreeMap<Monomial, LinearForm> {
        let mut rows: BTreeMap<Monomial, LinearForm> = BTreeMap::new();
        for m in c.expr.support() {
            rows.insert(m, LinearForm::new());
        }
        if let Some(block) = c.block {
            for j in 0..c.basis.len() {
                for i in 0..=j {
                    let m = c.basis[i].mul(&c.basis[j]);
                    let w = if i == j { 1.0 } else { 2.0 };
                    rows.entry(m).or_default().add_entry(block, i, j, w);
                }
            }
        }
        for (m, row) in rows.iter_mut() {
            let coef = c.expr.coefficient(m);
            let lin = self.form_of(&coef.scale(-1.0));
            row.entries.extend(lin.entries);
            row.free.extend(lin.free);
        }
        rows
    }

    /// Block SDP with one PSD block per SOS constraint, SOS decision and PSD
    /// device, in declaration order.
    pub fn compile(&self) -> SdpProblem {
        let mut p = SdpProblem::new(self.blocks.iter().map(|b| b.dim).collect(), self.num_free);
        for eq in &self.equalities {
            p.add_constraint(self.form_of(&eq.expr), eq.rhs - eq.expr.constant);
        }
        for c in &self.sos {
            let rows = self.sos_rows(c);
            for (m, row) in rows {
                let rhs = c.expr.constant_part().coeff(&m);
                p.add_constraint(row, rhs);
            }
        }
        p.objective = self.form_of(&self.objective);
        p.objective_constant = self.objective.constant;
        p
    }

    /// Stable textual description of the compiled problem.
    pub fn summary(&self) -> String {
        let p = self.compile();
        let mut s = format!(
            "variables {} (free {})\nblocks {}\n",
            self.vars.len(),
            self.num_free,
            self.blocks.len()
        );
        for (k, b) in self.blocks.iter().enumerate() {
            s.push_str(&format!("  block {k} {} size {}\n", b.name, b.dim));
        }
        s.push_str(&format!("rows {}\n", p.num_constraints()));
        for eq in &self.equalities {
            s.push_str(&format!("  linear {}\n", eq.name));
        }
        for c in &self.sos {
            s.push_str(&format!(
                "  sos {} rows {} half-basis {}\n",
                c.name,
                self.sos_rows(c).len(),
                c.basis.len()
            ));
        }
        s.push_str(&format!("objective constant {:e}\n", self.objective.constant));
        for (v, c) in &self.objective.terms {
            s.push_str(&format!("  {:e} {}\n", c, self.var_name(*v)));
        }
        s
    }

    pub fn solve(&self, opts: &SolverOptions) -> Result<SosSolution, SosError> {
        let problem = self.compile();
        let sol = sdp::solve(&problem, opts)?;
        Ok(self.interpret(sol))
    }

    /// Maps an SDP solution back to decision values and certificates.
    pub fn interpret(&self, sol: SdpSolution) -> SosSolution {
        let values: Vec<f64> = self
            .vars
            .iter()
            .map(|v| match v.kind {
                VarKind::Free(k) => sol.free[k],
                VarKind::Entry { block, i, j } => sol.blocks[block][(i, j)],
            })
            .collect();
        let mut certificates = Vec::with_capacity(self.sos.len());
        for c in &self.sos {
            let target = c.expr.evaluate(&values);
            let q = match c.block {
                Some(b) => sol.blocks[b].clone(),
                None => DMatrix::zeros(0, 0),
            };
            let mut cert = GramCertificate::new(&c.name, c.basis.clone(), q, &target);
            if !cert.is_valid(&self.tolerance) {
                let polished = cert.polished(&target);
                if polished.is_valid(&self.tolerance) {
                    cert = polished;
                }
            }
            certificates.push(cert);
        }
        let blocks_psd = sol
            .blocks
            .iter()
            .filter(|b| b.nrows() > 0)
            .all(|b| b.clone().symmetric_eigenvalues().min() >= -self.tolerance.eigenvalue);
        let certified = sol.status == SdpStatus::Optimal
            && blocks_psd
            && certificates.iter().all(|c| c.is_valid(&self.tolerance));
        SosSolution {
            status: sol.status,
            objective: sol.primal_objective,
            values,
            certificates,
            certified,
            sdp: sol,
        }
    }
}
