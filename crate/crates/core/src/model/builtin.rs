use nalgebra::DMatrix;

use super::{
    solve_care, suspension_model, ModelError, SafetySpec, SuspensionParams, SuspensionVariant,
    SystemModel,
};
use crate::poly::{quadratic_form, BoxRegion, PolyMatrix, Polynomial};

/// Linear plant `x' = a x + b u` with cost `x'Qx + u'Ru`, no disturbance,
/// and unit boxes as regions. Rejects pairs without a stabilizing Riccati
/// solution.
pub fn lq_toy_model(
    name: &str,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<SystemModel, ModelError> {
    let n = a.nrows();
    let m = b.ncols();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(ModelError::Config("inconsistent LQ dimensions".into()));
    }
    solve_care(a, b, q, r)?;
    let x: Vec<Polynomial> = (0..n).map(|i| Polynomial::var(n, i)).collect();
    let f = (0..n)
        .map(|i| {
            let mut acc = Polynomial::zero(n);
            for j in 0..n {
                acc = &acc + &x[j].scale(a[(i, j)]);
            }
            acc
        })
        .collect();
    let g = PolyMatrix::constant(n, n, m, b.transpose().as_slice());
    let unit = BoxRegion::symmetric(&vec![1.0; n]);
    SystemModel::new(
        name,
        f,
        g,
        vec![0.0; m],
        quadratic_form(&x, q.transpose().as_slice()),
        r.clone(),
        unit.clone(),
        unit,
    )
}

pub fn builtin_names() -> &'static [&'static str] {
    &[
        "suspension",
        "suspension_printed",
        "lq_toy_scalar",
        "lq_toy_integrator",
        "lq_toy_2state",
    ]
}

/// Built-in instance by name, with its safety specification if it has one.
pub fn builtin(name: &str) -> Result<(SystemModel, Option<SafetySpec>), ModelError> {
    let m = |r: usize, c: usize, d: &[f64]| DMatrix::from_row_slice(r, c, d);
    let one = m(1, 1, &[1.0]);
    match name {
        "suspension" => {
            let (model, spec) = suspension_model(&SuspensionParams::default())?;
            Ok((model, Some(spec)))
        }
        "suspension_printed" => {
            let params = SuspensionParams {
                variant: SuspensionVariant::AsPrinted,
                ..SuspensionParams::default()
            };
            let (model, spec) = suspension_model(&params)?;
            Ok((model, Some(spec)))
        }
        "lq_toy_scalar" => Ok((lq_toy_model(name, &m(1, 1, &[-1.0]), &one, &one, &one)?, None)),
        "lq_toy_integrator" => Ok((lq_toy_model(name, &m(1, 1, &[0.0]), &one, &one, &one)?, None)),
        "lq_toy_2state" => Ok((
            lq_toy_model(
                name,
                &m(2, 2, &[0.0, 1.0, 0.0, 0.0]),
                &m(2, 1, &[0.0, 1.0]),
                &DMatrix::identity(2, 2),
                &one,
            )?,
            None,
        )),
        _ => Err(ModelError::Config(format!(
            "unknown built-in model '{name}' (known: {})",
            builtin_names().join(", ")
        ))),
    }
}
