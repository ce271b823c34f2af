//! Plant, cost and safety descriptions: control-affine polynomial dynamics
//! `x' = f(x) + g(x)(u + d)` with `|d_i| <= d_max_i`, reward
//! `q(x) + u'Ru`, and initial/unsafe sets.

mod builtin;
mod file;
mod riccati;
mod suspension;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::poly::{BoxRegion, PolyError, PolyMatrix, Polynomial};
use crate::sos::GramCertificate;

pub use builtin::{builtin, builtin_names, lq_toy_model};
pub use file::{model_from_toml, model_to_toml, BoxFile, ModelFile, SafetyFile};
pub use riccati::{lqr_gain, solve_care};
pub use suspension::{suspension_model, SUSPENSION_X0, SUSPENSION_X0_DEFLECTED, SuspensionParams, SuspensionVariant};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("model invariant violated: {0}")]
    Invariant(String),
    #[error("linearization is not stabilizable: {0}")]
    Unstabilizable(String),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Control-affine polynomial plant with quadratic control cost.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    pub name: String,
    pub f: Vec<Polynomial>,
    pub g: PolyMatrix,
    pub d_max: Vec<f64>,
    pub q: Polynomial,
    pub r: DMatrix<f64>,
    /// Region on which certificates are required.
    pub state_region: BoxRegion,
    /// Region over which the value function is integrated.
    pub perf_region: BoxRegion,
}

impl SystemModel {
    /// Builds a model and checks its invariants.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: &str,
        f: Vec<Polynomial>,
        g: PolyMatrix,
        d_max: Vec<f64>,
        q: Polynomial,
        r: DMatrix<f64>,
        state_region: BoxRegion,
        perf_region: BoxRegion,
    ) -> Result<Self, ModelError> {
        let model = SystemModel {
            name: name.to_string(),
            f,
            g,
            d_max,
            q,
            r,
            state_region,
            perf_region,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    pub fn m(&self) -> usize {
        self.g.shape().1
    }

    fn validate(&self) -> Result<(), ModelError> {
        let n = self.n();
        let m = self.m();
        let dim = |what: &str, expected: usize, found: usize| {
            if expected == found {
                Ok(())
            } else {
                Err(ModelError::Config(format!(
                    "{what}: expected dimension {expected}, found {found}"
                )))
            }
        };
        if n == 0 || m == 0 {
            return Err(ModelError::Config("empty state or input".into()));
        }
        for p in &self.f {
            dim("f variables", n, p.nvars())?;
        }
        dim("g rows", n, self.g.shape().0)?;
        dim("g variables", n, self.g.nvars())?;
        dim("q variables", n, self.q.nvars())?;
        dim("d_max", m, self.d_max.len())?;
        dim("R rows", m, self.r.nrows())?;
        dim("R columns", m, self.r.ncols())?;
        dim("state region", n, self.state_region.nvars())?;
        dim("performance region", n, self.perf_region.nvars())?;
        if self.d_max.iter().any(|d| !(*d >= 0.0)) {
            return Err(ModelError::Config("d_max must be nonnegative".into()));
        }
        let origin = vec![0.0; n];
        if self.f.iter().any(|p| p.evaluate(&origin) != 0.0) {
            return Err(ModelError::Invariant("f(0) must vanish".into()));
        }
        if (&self.r - self.r.transpose()).amax() > 1e-12 * self.r.amax().max(1.0) {
            return Err(ModelError::Invariant("R must be symmetric".into()));
        }
        if !(self.r.clone().symmetric_eigenvalues().min() > 0.0) {
            return Err(ModelError::Invariant("R must be positive definite".into()));
        }
        if self.q.evaluate(&origin) != 0.0 {
            return Err(ModelError::Invariant("q(0) must vanish".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..100 {
            let x = self.state_region.sample(&mut rng);
            if x.iter().any(|v| *v != 0.0) && !(self.q.evaluate(&x) > 0.0) {
                return Err(ModelError::Invariant(format!(
                    "q is not positive at {x:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn f_at(&self, x: &[f64]) -> Vec<f64> {
        self.f.iter().map(|p| p.evaluate(x)).collect()
    }

    /// `g(x)` as an `n x m` matrix.
    pub fn g_at(&self, x: &[f64]) -> DMatrix<f64> {
        let (n, m) = self.g.shape();
        DMatrix::from_row_slice(n, m, &self.g.evaluate(x))
    }

    /// `f(x) + g(x)(u + d)`.
    pub fn rhs(&self, x: &[f64], u: &[f64], d: &[f64]) -> Vec<f64> {
        let mut dx = self.f_at(x);
        let g = self.g_at(x);
        for (i, v) in dx.iter_mut().enumerate() {
            for k in 0..self.m() {
                *v += g[(i, k)] * (u[k] + d[k]);
            }
        }
        dx
    }

    /// Jacobian of `f` and value of `g` at the origin.
    pub fn linearize(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.n();
        let origin = vec![0.0; n];
        let a = DMatrix::from_fn(n, n, |i, j| self.f[i].derivative(j).evaluate(&origin));
        (a, self.g_at(&origin))
    }

    /// Symmetric `Q` with `x'Qx` the quadratic part of `q`.
    pub fn q_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let origin = vec![0.0; n];
        DMatrix::from_fn(n, n, |i, j| {
            0.5 * self.q.derivative(i).derivative(j).evaluate(&origin)
        })
    }

    pub fn r_inv(&self) -> DMatrix<f64> {
        self.r.clone().try_inverse().expect("R is positive definite")
    }

    /// `d_max' R d_max`.
    pub fn disturbance_cost(&self) -> f64 {
        let d = nalgebra::DVector::from_column_slice(&self.d_max);
        (d.transpose() * &self.r * &d)[(0, 0)]
    }

    /// `u' R u` for a polynomial control.
    pub fn control_cost(&self, u: &[Polynomial]) -> Polynomial {
        crate::poly::quadratic_form(u, self.r.transpose().as_slice())
    }

    /// `grad(p)' f`.
    pub fn lie_f(&self, p: &Polynomial) -> Polynomial {
        crate::poly::dot(&p.gradient(), &self.f).expect("dimensions checked")
    }

    /// `grad(p)' g`, one polynomial per input.
    pub fn lie_g(&self, p: &Polynomial) -> Vec<Polynomial> {
        self.g.left_mul_vec(&p.gradient()).expect("dimensions checked")
    }

    /// Copy with `d_max` replaced.
    pub fn with_disturbance(&self, d_max: Vec<f64>) -> Result<Self, ModelError> {
        let mut m = self.clone();
        m.d_max = d_max;
        m.validate()?;
        Ok(m)
    }
}

/// Initial and unsafe sets. Each set is the intersection of `g_j(x) >= 0`;
/// the unsafe set is a union of such pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetySpec {
    pub initial: Vec<Polynomial>,
    /// Box form of the initial set, when it has one.
    pub initial_box: Option<BoxRegion>,
    pub unsafe_sets: Vec<Vec<Polynomial>>,
}

impl SafetySpec {
    pub fn from_box(initial: BoxRegion, unsafe_sets: Vec<Vec<Polynomial>>) -> Self {
        SafetySpec {
            initial: initial.inequalities(),
            initial_box: Some(initial),
            unsafe_sets,
        }
    }

    pub fn in_initial(&self, x: &[f64]) -> bool {
        match &self.initial_box {
            Some(b) => b.contains(x),
            None => self.initial.iter().all(|g| g.evaluate(x) >= 0.0),
        }
    }

    pub fn in_unsafe(&self, x: &[f64]) -> bool {
        self.unsafe_sets
            .iter()
            .any(|piece| piece.iter().all(|g| g.evaluate(x) >= 0.0))
    }

    /// Samples `region` and fails at the first point lying in both sets.
    pub fn check_disjoint(&self, region: &BoxRegion, samples: usize, seed: u64) -> Result<(), ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sampler = self.initial_box.as_ref().unwrap_or(region);
        for _ in 0..samples {
            let x = sampler.sample(&mut rng);
            if self.in_initial(&x) && self.in_unsafe(&x) {
                return Err(ModelError::Invariant(format!(
                    "initial and unsafe sets intersect at {x:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Certified barrier `h` with `C = {h >= 0}`, multiplier `Z` for the
/// zeroing condition, and the certificates backing both.
#[derive(Debug, Clone)]
pub struct BarrierFunction {
    pub h: Polynomial,
    pub z: Polynomial,
    /// Separation margin `eps` with `h >= eps` on the initial set and
    /// `h <= -eps` on the unsafe set.
    pub margin: f64,
    pub separation: Vec<GramCertificate>,
    pub zcbf: Option<GramCertificate>,
}

/// Selectability and rejectability indices at `x`:
/// `p_s = [-grad V'(f+gu), grad h'(f+gu) - |grad h' g|^2]` and
/// `p_r = [rbar(x,u), -eta Z(x) h(x)]`.
#[allow(clippy::too_many_arguments)]
pub fn satisficing_indices(
    model: &SystemModel,
    v: &Polynomial,
    h: &Polynomial,
    z: &Polynomial,
    u: &[Polynomial],
    beta_u: f64,
    x: &[f64],
    eta: f64,
) -> ([f64; 2], [f64; 2]) {
    let uval: Vec<f64> = u.iter().map(|p| p.evaluate(x)).collect();
    let zero = vec![0.0; model.m()];
    let xdot = model.rhs(x, &uval, &zero);
    let dv: f64 = v.gradient().iter().zip(&xdot).map(|(p, d)| p.evaluate(x) * d).sum();
    let grad_h: Vec<f64> = h.gradient().iter().map(|p| p.evaluate(x)).collect();
    let dh: f64 = grad_h.iter().zip(&xdot).map(|(a, b)| a * b).sum();
    let g = model.g_at(x);
    let hg: f64 = (0..model.m())
        .map(|k| {
            let s: f64 = (0..model.n()).map(|i| grad_h[i] * g[(i, k)]).sum();
            s * s
        })
        .sum();
    let uv = nalgebra::DVector::from_vec(uval);
    let uru = (uv.transpose() * &model.r * &uv)[(0, 0)];
    let rbar = model.q.evaluate(x) + uru + beta_u + model.disturbance_cost();
    (
        [-dv, dh - hg],
        [rbar, -eta * z.evaluate(x) * h.evaluate(x)],
    )
}

#[cfg(test)]
mod tests;
