use std::collections::{BTreeMap, BTreeSet};

use crate::poly::{Monomial, Polynomial};

/// Handle to a scalar decision variable of an `SosProgram`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

/// `constant + sum_k c_k v_k` over scalar decision variables.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExpr {
    pub constant: f64,
    pub terms: BTreeMap<VarId, f64>,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        AffineExpr {
            constant: c,
            terms: BTreeMap::new(),
        }
    }

    pub fn var(v: VarId) -> Self {
        AffineExpr::term(v, 1.0)
    }

    pub fn term(v: VarId, c: f64) -> Self {
        let mut e = AffineExpr::default();
        e.add_term(v, c);
        e
    }

    pub fn add_term(&mut self, v: VarId, c: f64) {
        if c != 0.0 {
            *self.terms.entry(v).or_insert(0.0) += c;
        }
    }

    pub fn add(&self, other: &AffineExpr) -> AffineExpr {
        let mut out = self.clone();
        out.constant += other.constant;
        for (&v, &c) in &other.terms {
            out.add_term(v, c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> AffineExpr {
        AffineExpr {
            constant: self.constant * s,
            terms: self.terms.iter().map(|(&v, &c)| (v, c * s)).collect(),
        }
    }

    pub fn sub(&self, other: &AffineExpr) -> AffineExpr {
        self.add(&other.scale(-1.0))
    }

    pub fn evaluate(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(v, c)| c * values[v.0]).sum::<f64>()
    }
}

/// Polynomial in `x` whose coefficients are affine in decision variables:
/// `p_0(x) + sum_k v_k p_k(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyExpr {
    constant: Polynomial,
    linear: BTreeMap<VarId, Polynomial>,
}

impl PolyExpr {
    pub fn zero(nvars: usize) -> Self {
        PolyExpr::from_poly(Polynomial::zero(nvars))
    }

    pub fn from_poly(p: Polynomial) -> Self {
        PolyExpr {
            constant: p,
            linear: BTreeMap::new(),
        }
    }

    /// `v * p`.
    pub fn from_var(v: VarId, p: Polynomial) -> Self {
        let mut e = PolyExpr::zero(p.nvars());
        e.add_var_term(v, &p);
        e
    }

    pub fn nvars(&self) -> usize {
        self.constant.nvars()
    }

    pub fn constant_part(&self) -> &Polynomial {
        &self.constant
    }

    pub fn linear_parts(&self) -> impl Iterator<Item = (VarId, &Polynomial)> {
        self.linear.iter().map(|(&v, p)| (v, p))
    }

    pub fn is_constant(&self) -> bool {
        self.linear.is_empty()
    }

    pub fn add_var_term(&mut self, v: VarId, p: &Polynomial) {
        let entry = self
            .linear
            .entry(v)
            .or_insert_with(|| Polynomial::zero(p.nvars()));
        *entry = &*entry + p;
        if entry.is_zero() {
            self.linear.remove(&v);
        }
    }

    pub fn add(&self, other: &PolyExpr) -> PolyExpr {
        let mut out = self.clone();
        out.constant = &out.constant + &other.constant;
        for (&v, p) in &other.linear {
            out.add_var_term(v, p);
        }
        out
    }

    pub fn sub(&self, other: &PolyExpr) -> PolyExpr {
        self.add(&other.scale(-1.0))
    }

    pub fn add_poly(&self, p: &Polynomial) -> PolyExpr {
        let mut out = self.clone();
        out.constant = &out.constant + p;
        out
    }

    pub fn scale(&self, s: f64) -> PolyExpr {
        PolyExpr {
            constant: self.constant.scale(s),
            linear: self
                .linear
                .iter()
                .map(|(&v, p)| (v, p.scale(s)))
                .filter(|(_, p)| !p.is_zero())
                .collect(),
        }
    }

    pub fn mul_poly(&self, q: &Polynomial) -> PolyExpr {
        PolyExpr {
            constant: &self.constant * q,
            linear: self
                .linear
                .iter()
                .map(|(&v, p)| (v, p * q))
                .filter(|(_, p)| !p.is_zero())
                .collect(),
        }
    }

    /// Product of two expressions; fails with the first pair of decision
    /// variables that would multiply each other.
    pub fn try_mul(&self, other: &PolyExpr) -> Result<PolyExpr, (VarId, VarId)> {
        if let (Some((&a, _)), Some((&b, _))) =
            (self.linear.iter().next(), other.linear.iter().next())
        {
            return Err((a, b));
        }
        if self.is_constant() {
            Ok(other.mul_poly(&self.constant))
        } else {
            Ok(self.mul_poly(&other.constant))
        }
    }

    /// Substitutes decision values.
    pub fn evaluate(&self, values: &[f64]) -> Polynomial {
        let mut acc = self.constant.clone();
        for (v, p) in &self.linear {
            acc = &acc + &p.scale(values[v.0]);
        }
        acc
    }

    /// Every monomial that can carry a nonzero coefficient.
    pub fn support(&self) -> BTreeSet<Monomial> {
        let mut s: BTreeSet<Monomial> = self.constant.terms().map(|(m, _)| m.clone()).collect();
        for p in self.linear.values() {
            s.extend(p.terms().map(|(m, _)| m.clone()));
        }
        s
    }

    pub fn degree(&self) -> u32 {
        self.support().iter().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Coefficient of `m` as an affine expression in the decisions.
    pub fn coefficient(&self, m: &Monomial) -> AffineExpr {
        let mut e = AffineExpr::constant(self.constant.coeff(m));
        for (&v, p) in &self.linear {
            e.add_term(v, p.coeff(m));
        }
        e
    }

    /// Decision variables appearing with a nonzero polynomial.
    pub fn variables(&self) -> impl Iterator<Item = VarId> + '_ {
        self.linear.keys().copied()
    }
}

impl From<Polynomial> for PolyExpr {
    fn from(p: Polynomial) -> Self {
        PolyExpr::from_poly(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_products_and_bilinear_rejection() {
        let x = Polynomial::var(1, 0);
        let a = PolyExpr::from_var(VarId(0), x.clone());
        let b = PolyExpr::from_var(VarId(1), Polynomial::constant(1, 1.0));
        let k = PolyExpr::from_poly(&x * &x);
        assert!(a.try_mul(&k).is_ok());
        assert_eq!(a.try_mul(&b), Err((VarId(0), VarId(1))));
        let e = a.add(&b).add(&k);
        let p = e.evaluate(&[2.0, 3.0]);
        assert_eq!(p.evaluate(&[1.5]), 2.0 * 1.5 + 3.0 + 2.25);
        let c = e.coefficient(&Monomial::var(1, 0));
        assert_eq!(c.terms.get(&VarId(0)), Some(&1.0));
        assert_eq!(e.sub(&e).support().len(), 0);
    }
}
