use std::cmp::Ordering;
use std::fmt;

/// Exponent vector over the state variables `x1..xn`.
///
/// Ordering is graded lexicographic: lower total degree first, and within a
/// degree the monomial with the larger power of `x1` (then `x2`, ...) first.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    exps: Vec<u32>,
}

impl Monomial {
    pub fn new(exps: Vec<u32>) -> Self {
        Monomial { exps }
    }

    pub fn one(nvars: usize) -> Self {
        Monomial { exps: vec![0; nvars] }
    }

    /// The monomial `x_{var+1}`.
    pub fn var(nvars: usize, var: usize) -> Self {
        let mut exps = vec![0; nvars];
        exps[var] = 1;
        Monomial { exps }
    }

    pub fn nvars(&self) -> usize {
        self.exps.len()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exps
    }

    pub fn degree(&self) -> u32 {
        self.exps.iter().sum()
    }

    pub fn is_constant(&self) -> bool {
        self.exps.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.nvars(), other.nvars());
        Monomial {
            exps: self.exps.iter().zip(&other.exps).map(|(a, b)| a + b).collect(),
        }
    }

    /// Exponent of the partial derivative with respect to `var`, with the
    /// multiplicative factor it produces, or `None` if the derivative vanishes.
    pub fn derivative(&self, var: usize) -> Option<(u32, Monomial)> {
        let e = self.exps[var];
        if e == 0 {
            return None;
        }
        let mut exps = self.exps.clone();
        exps[var] -= 1;
        Some((e, Monomial { exps }))
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.exps
            .iter()
            .zip(x)
            .filter(|(&e, _)| e > 0)
            .map(|(&e, &xi)| xi.powi(e as i32))
            .product()
    }

    /// Product of `s_i^{e_i}`, the factor a term picks up under `x_i -> s_i x_i`.
    pub fn scale_factor(&self, s: &[f64]) -> f64 {
        self.evaluate(s)
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.exps.cmp(&self.exps))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_constant() {
            return write!(f, "1");
        }
        let mut first = true;
        for (i, &e) in self.exps.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "x{}", i + 1)?;
            } else {
                write!(f, "x{}^{}", i + 1, e)?;
            }
        }
        Ok(())
    }
}

/// All monomials in `nvars` variables with `dmin <= degree <= dmax`, in graded
/// lexicographic order.
pub fn monomial_basis(nvars: usize, dmin: u32, dmax: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    for d in dmin..=dmax {
        let mut exps = vec![0u32; nvars];
        push_degree(&mut out, &mut exps, 0, d);
    }
    out
}

fn push_degree(out: &mut Vec<Monomial>, exps: &mut Vec<u32>, var: usize, remaining: u32) {
    let n = exps.len();
    if n == 0 {
        if remaining == 0 {
            out.push(Monomial::new(Vec::new()));
        }
        return;
    }
    if var == n - 1 {
        exps[var] = remaining;
        out.push(Monomial::new(exps.clone()));
        exps[var] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        exps[var] = e;
        push_degree(out, exps, var + 1, remaining - e);
    }
    exps[var] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: u64, k: u64) -> u64 {
        if k > n {
            return 0;
        }
        (1..=k).fold(1, |acc, i| acc * (n - k + i) / i)
    }

    #[test]
    fn basis_examples() {
        let b = monomial_basis(2, 1, 1);
        assert_eq!(b, vec![Monomial::new(vec![1, 0]), Monomial::new(vec![0, 1])]);
        let b = monomial_basis(2, 2, 2);
        assert_eq!(
            b,
            vec![
                Monomial::new(vec![2, 0]),
                Monomial::new(vec![1, 1]),
                Monomial::new(vec![0, 2])
            ]
        );
        assert_eq!(monomial_basis(4, 2, 2).len(), 10);
    }

    #[test]
    fn basis_sizes_match_binomial_counts() {
        for n in 1..=6u64 {
            for dmax in 0..=6u64 {
                for dmin in 0..=dmax {
                    let expected = binom(n + dmax, dmax)
                        - if dmin == 0 { 0 } else { binom(n + dmin - 1, dmin - 1) };
                    let got = monomial_basis(n as usize, dmin as u32, dmax as u32).len() as u64;
                    assert_eq!(got, expected, "n={n} dmin={dmin} dmax={dmax}");
                }
            }
        }
    }

    #[test]
    fn basis_is_sorted_and_unique() {
        let b = monomial_basis(3, 0, 4);
        for w in b.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn display() {
        assert_eq!(Monomial::new(vec![2, 0, 1]).to_string(), "x1^2*x3");
        assert_eq!(Monomial::one(3).to_string(), "1");
    }
}
