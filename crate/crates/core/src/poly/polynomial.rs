use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use super::{monomial::Monomial, BoxRegion, PolyError};

/// Coefficients with magnitude below this are dropped after arithmetic.
pub const DROP_TOL: f64 = 1e-14;

/// Sparse multivariate polynomial with real coefficients.
///
/// Terms are kept in graded lexicographic order and never store a zero
/// coefficient, so two equal polynomials have identical term maps.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Polynomial::zero(nvars);
        p.add_term(Monomial::one(nvars), c);
        p
    }

    /// The coordinate polynomial `x_{var+1}`.
    pub fn var(nvars: usize, var: usize) -> Self {
        Polynomial::monomial(Monomial::var(nvars, var), 1.0)
    }

    pub fn monomial(m: Monomial, c: f64) -> Self {
        let mut p = Polynomial::zero(m.nvars());
        p.add_term(m, c);
        p
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Monomial, f64)>) -> Self {
        let mut p = Polynomial::zero(nvars);
        for (m, c) in terms {
            assert_eq!(m.nvars(), nvars, "monomial arity mismatch");
            p.add_term(m, c);
        }
        p.canonicalize();
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, &c)| (m, c))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn constant_term(&self) -> f64 {
        self.coeff(&Monomial::one(self.nvars))
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Lowest total degree among the stored terms.
    pub fn min_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).min().unwrap_or(0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    fn add_term(&mut self, m: Monomial, c: f64) {
        if c == 0.0 {
            return;
        }
        *self.terms.entry(m).or_insert(0.0) += c;
    }

    fn canonicalize(&mut self) {
        self.terms.retain(|_, c| c.abs() >= DROP_TOL);
    }

    fn check_nvars(&self, other: &Polynomial) -> Result<(), PolyError> {
        if self.nvars != other.nvars {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars,
                found: other.nvars,
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_nvars(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), c);
        }
        out.canonicalize();
        Ok(out)
    }

    pub fn try_sub(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_nvars(other)?;
        let mut out = self.clone();
        for (m, &c) in &other.terms {
            out.add_term(m.clone(), -c);
        }
        out.canonicalize();
        Ok(out)
    }

    pub fn try_mul(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.check_nvars(other)?;
        let mut out = Polynomial::zero(self.nvars);
        for (ma, &ca) in &self.terms {
            for (mb, &cb) in &other.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out.canonicalize();
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (m, &c) in &self.terms {
            out.add_term(m.clone(), c * s);
        }
        out.canonicalize();
        out
    }

    pub fn add_constant(&self, c: f64) -> Polynomial {
        let mut out = self.clone();
        out.add_term(Monomial::one(self.nvars), c);
        out.canonicalize();
        out
    }

    pub fn pow(&self, k: u32) -> Polynomial {
        let mut out = Polynomial::constant(self.nvars, 1.0);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// Sums terms in monomial order; the result is deterministic for a given
    /// polynomial.
    pub fn try_evaluate(&self, x: &[f64]) -> Result<f64, PolyError> {
        if x.len() != self.nvars {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars,
                found: x.len(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    /// Panics if `x.len() != nvars`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nvars, "evaluation point has wrong dimension");
        self.eval_unchecked(x)
    }

    fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(m, &c)| c * m.evaluate(x)).sum()
    }

    pub fn derivative(&self, var: usize) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (m, &c) in &self.terms {
            if let Some((e, dm)) = m.derivative(var) {
                out.add_term(dm, c * e as f64);
            }
        }
        out.canonicalize();
        out
    }

    pub fn gradient(&self) -> Vec<Polynomial> {
        (0..self.nvars).map(|i| self.derivative(i)).collect()
    }

    /// Exact integral over an axis-aligned box, term by term:
    /// `prod_i (hi^{k+1} - lo^{k+1}) / (k+1)`.
    pub fn integrate_box(&self, region: &BoxRegion) -> Result<f64, PolyError> {
        if region.nvars() != self.nvars {
            return Err(PolyError::DimensionMismatch {
                expected: self.nvars,
                found: region.nvars(),
            });
        }
        Ok(self
            .terms
            .iter()
            .map(|(m, &c)| c * monomial_moment(m, region))
            .sum())
    }

    /// Substitution `x_i -> s_i * x_i`.
    pub fn scale_vars(&self, s: &[f64]) -> Polynomial {
        assert_eq!(s.len(), self.nvars);
        let mut out = Polynomial::zero(self.nvars);
        for (m, &c) in &self.terms {
            out.add_term(m.clone(), c * m.scale_factor(s));
        }
        out.canonicalize();
        out
    }

    /// Keeps only terms whose monomial satisfies `keep`.
    pub fn filter_terms(&self, mut keep: impl FnMut(&Monomial) -> bool) -> Polynomial {
        Polynomial {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| keep(m))
                .map(|(m, &c)| (m.clone(), c))
                .collect(),
        }
    }

    /// Largest coefficient difference against `other`.
    pub fn max_coeff_diff(&self, other: &Polynomial) -> f64 {
        let mut worst: f64 = 0.0;
        for (m, &c) in &self.terms {
            worst = worst.max((c - other.coeff(m)).abs());
        }
        for (m, &c) in &other.terms {
            if !self.terms.contains_key(m) {
                worst = worst.max(c.abs());
            }
        }
        worst
    }
}

/// `integral over region of m(x) dx`.
pub fn monomial_moment(m: &Monomial, region: &BoxRegion) -> f64 {
    m.exponents()
        .iter()
        .zip(region.lo().iter().zip(region.hi()))
        .map(|(&k, (&lo, &hi))| {
            let k1 = k as i32 + 1;
            (hi.powi(k1) - lo.powi(k1)) / k1 as f64
        })
        .product()
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.try_add(rhs).expect("polynomial arity mismatch")
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.try_sub(rhs).expect("polynomial arity mismatch")
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        self.try_mul(rhs).expect("polynomial arity mismatch")
    }
}

impl Mul<f64> for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: f64) -> Polynomial {
        self.scale(rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $method(self, rhs: Polynomial) -> Polynomial {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&Polynomial> for Polynomial {
            type Output = Polynomial;
            fn $method(self, rhs: &Polynomial) -> Polynomial {
                (&self).$method(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}
