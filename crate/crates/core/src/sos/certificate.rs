use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::poly::{Monomial, Polynomial};

/// Acceptance thresholds for Gram certificates. The reconstruction bound is
/// applied per coefficient, relative to `max(1, largest coefficient)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertTolerance {
    pub reconstruction: f64,
    pub eigenvalue: f64,
}

impl Default for CertTolerance {
    fn default() -> Self {
        CertTolerance {
            reconstruction: 1e-6,
            eigenvalue: 1e-7,
        }
    }
}

/// `p(x) = m(x)^T Q m(x)` with `Q` PSD.
#[derive(Debug, Clone, PartialEq)]
pub struct GramCertificate {
    pub name: String,
    pub basis: Vec<Monomial>,
    pub q: DMatrix<f64>,
    pub min_eig: f64,
    /// Largest coefficient mismatch against the certified polynomial.
    pub reconstruction_error: f64,
    /// Normalization used for the relative reconstruction test.
    pub scale: f64,
}

impl GramCertificate {
    /// Builds and measures a certificate against `target`.
    pub fn new(name: &str, basis: Vec<Monomial>, q: DMatrix<f64>, target: &Polynomial) -> Self {
        let q = (&q + q.transpose()) * 0.5;
        let min_eig = if q.nrows() == 0 {
            0.0
        } else {
            q.clone().symmetric_eigenvalues().min()
        };
        let mut cert = GramCertificate {
            name: name.to_string(),
            basis,
            q,
            min_eig,
            reconstruction_error: 0.0,
            scale: 1.0,
        };
        let recon = cert.polynomial(target.nvars());
        cert.reconstruction_error = recon.max_coeff_diff(target);
        cert.scale = 1f64.max(target.max_abs_coeff()).max(cert.q.amax());
        cert
    }

    /// Least-norm symmetric correction of `Q` that reconstructs `target`
    /// exactly wherever the basis products reach it, re-measured.
    pub fn polished(&self, target: &Polynomial) -> GramCertificate {
        let k = self.basis.len();
        let mut groups: BTreeMap<Monomial, Vec<(usize, usize)>> = BTreeMap::new();
        for i in 0..k {
            for j in 0..k {
                groups.entry(self.basis[i].mul(&self.basis[j])).or_default().push((i, j));
            }
        }
        let mut q = self.q.clone();
        for (m, cells) in &groups {
            let have: f64 = cells.iter().map(|&(i, j)| self.q[(i, j)]).sum();
            let delta = (target.coeff(m) - have) / cells.len() as f64;
            for &(i, j) in cells {
                q[(i, j)] += delta;
            }
        }
        GramCertificate::new(&self.name, self.basis.clone(), q, target)
    }

    /// `m^T Q m`.
    pub fn polynomial(&self, nvars: usize) -> Polynomial {
        let mut terms = Vec::new();
        for i in 0..self.basis.len() {
            for j in 0..self.basis.len() {
                let c = self.q[(i, j)];
                if c != 0.0 {
                    terms.push((self.basis[i].mul(&self.basis[j]), c));
                }
            }
        }
        Polynomial::from_terms(nvars, terms)
    }

    pub fn is_valid(&self, tol: &CertTolerance) -> bool {
        self.reconstruction_error <= tol.reconstruction * self.scale
            && self.min_eig >= -tol.eigenvalue
    }

    /// Re-measures the certificate from scratch against `target`.
    pub fn validate(&self, target: &Polynomial, tol: &CertTolerance) -> bool {
        GramCertificate::new(&self.name, self.basis.clone(), self.q.clone(), target).is_valid(tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_polynomial;

    #[test]
    fn hand_certificates() {
        let basis = vec![Monomial::one(1), Monomial::var(1, 0)];
        let p = parse_polynomial("x1^2 + 2*x1 + 1", 1).unwrap();
        let c = GramCertificate::new("sq", basis.clone(), DMatrix::from_element(2, 2, 1.0), &p);
        assert!(c.is_valid(&CertTolerance::default()));
        assert!(c.min_eig.abs() < 1e-12);
        let q = parse_polynomial("x1^2 + 1", 1).unwrap();
        let c = GramCertificate::new("id", basis.clone(), DMatrix::identity(2, 2), &q);
        assert_eq!(c.reconstruction_error, 0.0);
        let bad = GramCertificate::new("bad", basis, DMatrix::identity(2, 2), &p);
        assert!(!bad.is_valid(&CertTolerance::default()));
    }
}
