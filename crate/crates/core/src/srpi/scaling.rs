use crate::model::{ModelError, SafetySpec, SystemModel};
use crate::poly::{BoxRegion, PolyMatrix, Polynomial};

/// Diagonal change of variables `x = D z` with `D` the magnitudes of the
/// state region, so that the region maps into `[-1, 1]^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaling {
    pub d: Vec<f64>,
}

impl Scaling {
    pub fn for_model(model: &SystemModel) -> Self {
        Scaling {
            d: model.state_region.magnitudes(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Scaling { d: vec![1.0; n] }
    }

    fn inv(&self) -> Vec<f64> {
        self.d.iter().map(|v| 1.0 / v).collect()
    }

    /// `p(x) -> p(D z)`.
    pub fn to_z(&self, p: &Polynomial) -> Polynomial {
        p.scale_vars(&self.d)
    }

    /// `p(z) -> p(x / D)`.
    pub fn to_x(&self, p: &Polynomial) -> Polynomial {
        p.scale_vars(&self.inv())
    }

    pub fn point_to_z(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.d).map(|(v, d)| v / d).collect()
    }

    pub fn region_to_z(&self, b: &BoxRegion) -> BoxRegion {
        let lo = b.lo().iter().zip(&self.d).map(|(v, d)| v / d).collect();
        let hi = b.hi().iter().zip(&self.d).map(|(v, d)| v / d).collect();
        BoxRegion::new(lo, hi).expect("positive scaling keeps boxes valid")
    }

    /// `det D`, the Jacobian of `x = D z`.
    pub fn jacobian(&self) -> f64 {
        self.d.iter().product()
    }

    /// Dynamics in `z`: `z' = D^-1 f(Dz) + D^-1 g(Dz)(u + d)`.
    pub fn model(&self, model: &SystemModel) -> Result<SystemModel, ModelError> {
        let n = model.n();
        let (_, m) = model.g.shape();
        let f = model
            .f
            .iter()
            .zip(&self.d)
            .map(|(p, d)| self.to_z(p).scale(1.0 / d))
            .collect();
        let mut g = PolyMatrix::zeros(n, n, m);
        for i in 0..n {
            for k in 0..m {
                g.set(i, k, self.to_z(model.g.get(i, k)).scale(1.0 / self.d[i]));
            }
        }
        SystemModel::new(
            &model.name,
            f,
            g,
            model.d_max.clone(),
            self.to_z(&model.q),
            model.r.clone(),
            self.region_to_z(&model.state_region),
            self.region_to_z(&model.perf_region),
        )
    }

    pub fn spec(&self, spec: &SafetySpec) -> SafetySpec {
        let map = |v: &[Polynomial]| v.iter().map(|p| self.to_z(p)).collect::<Vec<_>>();
        let unsafe_sets = spec.unsafe_sets.iter().map(|s| map(s)).collect();
        match &spec.initial_box {
            Some(b) => SafetySpec::from_box(self.region_to_z(b), unsafe_sets),
            None => SafetySpec {
                initial: map(&spec.initial),
                initial_box: None,
                unsafe_sets,
            },
        }
    }
}
