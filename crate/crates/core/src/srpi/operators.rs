use crate::model::SystemModel;
use crate::poly::{dot, Polynomial};

/// Control law `u = u_opt + u_safe`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub u: Vec<Polynomial>,
    pub u_opt: Vec<Polynomial>,
    pub u_safe: Vec<Polynomial>,
}

impl Policy {
    pub fn new(u_opt: Vec<Polynomial>, u_safe: Vec<Polynomial>) -> Self {
        let u = u_opt.iter().zip(&u_safe).map(|(a, b)| a + b).collect();
        Policy { u, u_opt, u_safe }
    }

    /// Policy with no safety correction.
    pub fn unconstrained(u_opt: Vec<Polynomial>) -> Self {
        let zero = u_opt.iter().map(|p| Polynomial::zero(p.nvars())).collect();
        Policy::new(u_opt, zero)
    }

    pub fn zero(nvars: usize, m: usize) -> Self {
        Policy::unconstrained(vec![Polynomial::zero(nvars); m])
    }

    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        self.u.iter().map(|p| p.evaluate(x)).collect()
    }

    pub fn degree(&self) -> u32 {
        self.u.iter().map(Polynomial::degree).max().unwrap_or(0)
    }

    /// Largest coefficient mismatch of `u - u_opt - u_safe`.
    pub fn decomposition_error(&self) -> f64 {
        self.u
            .iter()
            .zip(self.u_opt.iter().zip(&self.u_safe))
            .map(|(u, (a, b))| u.max_coeff_diff(&(a + b)))
            .fold(0.0, f64::max)
    }

    /// Same law under the substitution `x_i -> s_i x_i`.
    pub fn scale_vars(&self, s: &[f64]) -> Policy {
        let map = |v: &[Polynomial]| v.iter().map(|p| p.scale_vars(s)).collect::<Vec<_>>();
        Policy {
            u: map(&self.u),
            u_opt: map(&self.u_opt),
            u_safe: map(&self.u_safe),
        }
    }
}

/// `rbar = q + u'Ru + beta_u + d_max'R d_max`.
pub fn modified_reward(model: &SystemModel, u: &[Polynomial], beta_u: f64) -> Polynomial {
    (&model.q + &model.control_cost(u)).add_constant(beta_u + model.disturbance_cost())
}

/// `grad V'(f + g u)`.
pub fn closed_loop_derivative(model: &SystemModel, v: &Polynomial, u: &[Polynomial]) -> Polynomial {
    let vg = model.lie_g(v);
    &model.lie_f(v) + &dot(&vg, u).expect("input dimension")
}

/// `L(V, u) = -grad V'(f + g u) - rbar(x, u)`.
pub fn bellman_residual(
    model: &SystemModel,
    v: &Polynomial,
    u: &[Polynomial],
    beta_u: f64,
) -> Polynomial {
    -&(&closed_loop_derivative(model, v, u) + &modified_reward(model, u, beta_u))
}

/// `Hbar(V) = q + grad V' f - 1/4 grad V' g R^-1 g' grad V + d_max'R d_max + beta_u`.
pub fn hjb_operator(model: &SystemModel, v: &Polynomial, beta_u: f64) -> Polynomial {
    let vg = model.lie_g(v);
    let quad = crate::poly::quadratic_form(&vg, model.r_inv().transpose().as_slice());
    (&(&model.q + &model.lie_f(v)) - &quad.scale(0.25))
        .add_constant(model.disturbance_cost() + beta_u)
}

/// `u = -1/2 R^-1 (grad V' g)'`.
pub fn extract_controller(model: &SystemModel, v: &Polynomial) -> Policy {
    let vg = model.lie_g(v);
    let rinv = model.r_inv();
    let m = model.m();
    let u_opt = (0..m)
        .map(|a| {
            let mut acc = Polynomial::zero(model.n());
            for (b, p) in vg.iter().enumerate() {
                acc = &acc + &p.scale(-0.5 * rinv[(a, b)]);
            }
            acc
        })
        .collect();
    Policy::unconstrained(u_opt)
}
