use nalgebra::DMatrix;

use super::ModelError;

/// Stabilizing solution of `A'P + PA - P B R^-1 B' P + Q = 0` via the matrix
/// sign function of the Hamiltonian.
pub fn solve_care(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>, ModelError> {
    let n = a.nrows();
    let rinv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| ModelError::Config("R is singular".into()))?;
    let s = b * &rinv * b.transpose();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&s));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let mut z = h;
    let mut converged = false;
    for _ in 0..100 {
        let det = z.clone().lu().determinant().abs();
        if !(det.is_finite() && det > 0.0) {
            return Err(ModelError::Unstabilizable(
                "Hamiltonian has eigenvalues on the imaginary axis".into(),
            ));
        }
        let c = det.powf(-1.0 / (2 * n) as f64);
        let inv = (&z * c)
            .try_inverse()
            .ok_or_else(|| ModelError::Unstabilizable("sign iteration broke down".into()))?;
        let next = (&z * c + inv) * 0.5;
        let diff = (&next - &z).norm();
        z = next;
        if diff <= 1e-13 * z.norm() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(ModelError::Unstabilizable(
            "sign iteration did not converge".into(),
        ));
    }
    let w11 = z.view((0, 0), (n, n));
    let w12 = z.view((0, n), (n, n));
    let w21 = z.view((n, 0), (n, n));
    let w22 = z.view((n, n), (n, n));
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w12);
    lhs.view_mut((n, 0), (n, n))
        .copy_from(&(w22 + DMatrix::identity(n, n)));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(-(w11 + DMatrix::identity(n, n))));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w21));
    let p = lhs
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| ModelError::Unstabilizable(e.to_string()))?;
    let p = (&p + p.transpose()) * 0.5;

    let closed = a - &s * &p;
    if closed
        .complex_eigenvalues()
        .iter()
        .any(|e| !(e.re < 0.0))
    {
        return Err(ModelError::Unstabilizable(
            "closed loop under the Riccati gain is not Hurwitz".into(),
        ));
    }
    Ok(p)
}

/// `R^-1 B' P`, so that `u = -K x`.
pub fn lqr_gain(b: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>) -> DMatrix<f64> {
    r.clone().try_inverse().expect("R invertible") * b.transpose() * p
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(r: usize, c: usize, d: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, d)
    }

    #[test]
    fn scalar_closed_forms() {
        let one = m(1, 1, &[1.0]);
        let p = solve_care(&m(1, 1, &[-1.0]), &one, &one, &one).unwrap();
        assert!((p[(0, 0)] - (2f64.sqrt() - 1.0)).abs() < 1e-12);
        let p = solve_care(&m(1, 1, &[0.0]), &one, &one, &one).unwrap();
        assert!((p[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn double_integrator() {
        let a = m(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = m(2, 1, &[0.0, 1.0]);
        let p = solve_care(&a, &b, &DMatrix::identity(2, 2), &m(1, 1, &[1.0])).unwrap();
        let s3 = 3f64.sqrt();
        assert!((&p - m(2, 2, &[s3, 1.0, 1.0, s3])).amax() < 1e-10);
    }

    #[test]
    fn unstabilizable_pair_is_rejected() {
        let a = m(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let b = m(2, 1, &[0.0, 1.0]);
        assert!(solve_care(&a, &b, &DMatrix::identity(2, 2), &m(1, 1, &[1.0])).is_err());
    }
}
