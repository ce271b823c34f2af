use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{PolyError, Polynomial};

/// Axis-aligned box `[lo_1, hi_1] x ... x [lo_n, hi_n]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, PolyError> {
        if lo.len() != hi.len() {
            return Err(PolyError::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        if let Some(i) = lo
            .iter()
            .zip(&hi)
            .position(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite())
        {
            return Err(PolyError::InvalidBox {
                var: i,
                lo: lo[i],
                hi: hi[i],
            });
        }
        Ok(BoxRegion { lo, hi })
    }

    /// `|x_i| <= half_widths[i]`.
    pub fn symmetric(half_widths: &[f64]) -> Self {
        BoxRegion::new(half_widths.iter().map(|w| -w).collect(), half_widths.to_vec())
            .expect("half widths must be nonnegative")
    }

    pub fn nvars(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.nvars()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    /// Largest `|lo_i|, |hi_i|` per coordinate; used as a variable scaling.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| l.abs().max(h.abs()).max(f64::MIN_POSITIVE))
            .collect()
    }

    /// Box scaled about the origin by `factor`.
    pub fn scaled(&self, factor: f64) -> BoxRegion {
        BoxRegion {
            lo: self.lo.iter().map(|l| l * factor).collect(),
            hi: self.hi.iter().map(|h| h * factor).collect(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| if l == h { l } else { rng.gen_range(l..=h) })
            .collect()
    }

    /// Defining inequalities `g_i(x) = (x_i - lo_i)(hi_i - x_i) >= 0`.
    pub fn inequalities(&self) -> Vec<Polynomial> {
        let n = self.nvars();
        (0..n)
            .map(|i| {
                let xi = Polynomial::var(n, i);
                let a = xi.add_constant(-self.lo[i]);
                let b = (-&xi).add_constant(self.hi[i]);
                &a * &b
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inverted_intervals() {
        assert!(matches!(
            BoxRegion::new(vec![1.0], vec![0.0]),
            Err(PolyError::InvalidBox { var: 0, .. })
        ));
    }

    #[test]
    fn inequalities_vanish_on_faces() {
        let b = BoxRegion::new(vec![-20.0, 0.0], vec![25.0, 1.0]).unwrap();
        let g = b.inequalities();
        assert_eq!(g[0].evaluate(&[25.0, 0.5]), 0.0);
        assert_eq!(g[0].evaluate(&[-20.0, 0.5]), 0.0);
        assert!(g[0].evaluate(&[0.0, 0.5]) > 0.0);
        assert!(g[1].evaluate(&[0.0, 2.0]) < 0.0);
    }
}
