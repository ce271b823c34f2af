use super::{PolyError, Polynomial};

/// Dense matrix of polynomials sharing one variable count. A column vector
/// is a matrix with `cols == 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMatrix {
    nvars: usize,
    rows: usize,
    cols: usize,
    entries: Vec<Polynomial>,
}

impl PolyMatrix {
    pub fn zeros(nvars: usize, rows: usize, cols: usize) -> Self {
        PolyMatrix {
            nvars,
            rows,
            cols,
            entries: vec![Polynomial::zero(nvars); rows * cols],
        }
    }

    /// Row-major construction.
    pub fn from_rows(nvars: usize, rows: Vec<Vec<Polynomial>>) -> Result<Self, PolyError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut entries = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(PolyError::DimensionMismatch {
                    expected: c,
                    found: row.len(),
                });
            }
            for p in row {
                if p.nvars() != nvars {
                    return Err(PolyError::DimensionMismatch {
                        expected: nvars,
                        found: p.nvars(),
                    });
                }
                entries.push(p);
            }
        }
        Ok(PolyMatrix {
            nvars,
            rows: r,
            cols: c,
            entries,
        })
    }

    pub fn column(entries: Vec<Polynomial>) -> Result<Self, PolyError> {
        let nvars = entries.first().map_or(0, Polynomial::nvars);
        PolyMatrix::from_rows(nvars, entries.into_iter().map(|p| vec![p]).collect())
    }

    /// Constant matrix from row-major data.
    pub fn constant(nvars: usize, rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols);
        PolyMatrix {
            nvars,
            rows,
            cols,
            entries: data.iter().map(|&c| Polynomial::constant(nvars, c)).collect(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, r: usize, c: usize) -> &Polynomial {
        &self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, p: Polynomial) {
        assert_eq!(p.nvars(), self.nvars);
        self.entries[r * self.cols + c] = p;
    }

    pub fn entries(&self) -> &[Polynomial] {
        &self.entries
    }

    pub fn col(&self, c: usize) -> Vec<Polynomial> {
        (0..self.rows).map(|r| self.get(r, c).clone()).collect()
    }

    pub fn transpose(&self) -> PolyMatrix {
        let mut out = PolyMatrix::zeros(self.nvars, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c).clone());
            }
        }
        out
    }

    /// `self * v` for a polynomial vector `v`.
    pub fn mul_vec(&self, v: &[Polynomial]) -> Result<Vec<Polynomial>, PolyError> {
        if v.len() != self.cols {
            return Err(PolyError::DimensionMismatch {
                expected: self.cols,
                found: v.len(),
            });
        }
        let mut out = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            let mut acc = Polynomial::zero(self.nvars);
            for (c, vc) in v.iter().enumerate() {
                acc = acc.try_add(&self.get(r, c).try_mul(vc)?)?;
            }
            out.push(acc);
        }
        Ok(out)
    }

    /// `w^T * self` for a polynomial row vector `w`.
    pub fn left_mul_vec(&self, w: &[Polynomial]) -> Result<Vec<Polynomial>, PolyError> {
        self.transpose().mul_vec(w)
    }

    /// Numeric value at `x`, row-major.
    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        self.entries.iter().map(|p| p.evaluate(x)).collect()
    }

    pub fn max_degree(&self) -> u32 {
        self.entries.iter().map(Polynomial::degree).max().unwrap_or(0)
    }
}

/// Inner product of two polynomial vectors.
pub fn dot(a: &[Polynomial], b: &[Polynomial]) -> Result<Polynomial, PolyError> {
    if a.len() != b.len() {
        return Err(PolyError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let nvars = a.first().map_or(0, Polynomial::nvars);
    let mut acc = Polynomial::zero(nvars);
    for (p, q) in a.iter().zip(b) {
        acc = acc.try_add(&p.try_mul(q)?)?;
    }
    Ok(acc)
}

/// `v^T M v` for a constant symmetric matrix `m` (row-major, `k x k`).
pub fn quadratic_form(v: &[Polynomial], m: &[f64]) -> Polynomial {
    let k = v.len();
    assert_eq!(m.len(), k * k);
    let nvars = v.first().map_or(0, Polynomial::nvars);
    let mut acc = Polynomial::zero(nvars);
    for i in 0..k {
        for j in 0..k {
            let w = m[i * k + j];
            if w != 0.0 {
                acc = &acc + &(&v[i] * &v[j]).scale(w);
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_vector_product_shapes() {
        let n = 2;
        let x1 = Polynomial::var(n, 0);
        let x2 = Polynomial::var(n, 1);
        let m = PolyMatrix::from_rows(
            n,
            vec![
                vec![x1.clone(), Polynomial::constant(n, 1.0)],
                vec![Polynomial::zero(n), x2.clone()],
                vec![x2.clone(), x1.clone()],
            ],
        )
        .unwrap();
        let v = vec![x2.clone(), x1.clone()];
        let out = m.mul_vec(&v).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[0], &(&x1 * &x2) + &x1);
        assert!(m.mul_vec(&[x1.clone()]).is_err());
        assert_eq!(m.transpose().shape(), (2, 3));
    }
}
