//! TOML model files. Polynomials are stored in the plain-text polynomial
//! format over `x1..xn`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{ModelError, SafetySpec, SystemModel};
use crate::poly::{parse_polynomial, BoxRegion, PolyMatrix, Polynomial};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxFile {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafetyFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_box: Option<BoxFile>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial: Vec<String>,
    #[serde(rename = "unsafe")]
    pub unsafe_sets: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub f: Vec<String>,
    pub g: Vec<Vec<String>>,
    pub d_max: Vec<f64>,
    pub q: String,
    pub r: Vec<Vec<f64>>,
    pub state_region: BoxFile,
    pub perf_region: BoxFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub safety: Option<SafetyFile>,
}

fn box_file(b: &BoxRegion) -> BoxFile {
    BoxFile {
        lo: b.lo().to_vec(),
        hi: b.hi().to_vec(),
    }
}

fn region(b: &BoxFile) -> Result<BoxRegion, ModelError> {
    Ok(BoxRegion::new(b.lo.clone(), b.hi.clone())?)
}

fn polys(texts: &[String], n: usize) -> Result<Vec<Polynomial>, ModelError> {
    texts
        .iter()
        .map(|t| parse_polynomial(t, n).map_err(ModelError::from))
        .collect()
}

/// Serializes a model and optional safety specification.
pub fn model_to_toml(model: &SystemModel, spec: Option<&SafetySpec>) -> String {
    let (n, m) = model.g.shape();
    let file = ModelFile {
        name: model.name.clone(),
        n,
        m,
        f: model.f.iter().map(|p| p.to_string()).collect(),
        g: (0..n)
            .map(|i| (0..m).map(|k| model.g.get(i, k).to_string()).collect())
            .collect(),
        d_max: model.d_max.clone(),
        q: model.q.to_string(),
        r: (0..m)
            .map(|i| (0..m).map(|k| model.r[(i, k)]).collect())
            .collect(),
        state_region: box_file(&model.state_region),
        perf_region: box_file(&model.perf_region),
        safety: spec.map(|s| SafetyFile {
            initial_box: s.initial_box.as_ref().map(box_file),
            initial: if s.initial_box.is_some() {
                Vec::new()
            } else {
                s.initial.iter().map(|p| p.to_string()).collect()
            },
            unsafe_sets: s
                .unsafe_sets
                .iter()
                .map(|piece| piece.iter().map(|p| p.to_string()).collect())
                .collect(),
        }),
    };
    toml::to_string(&file).expect("model file serializes")
}

/// Parses and validates a model file.
pub fn model_from_toml(text: &str) -> Result<(SystemModel, Option<SafetySpec>), ModelError> {
    let file: ModelFile =
        toml::from_str(text).map_err(|e| ModelError::Config(e.message().to_string()))?;
    let n = file.n;
    if file.f.len() != n || file.g.len() != n {
        return Err(ModelError::Config(format!("f and g need {n} rows")));
    }
    let f = polys(&file.f, n)?;
    let g_rows = file
        .g
        .iter()
        .map(|row| {
            if row.len() != file.m {
                return Err(ModelError::Config(format!("g rows need {} entries", file.m)));
            }
            polys(row, n)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let g = PolyMatrix::from_rows(n, g_rows)?;
    if file.r.len() != file.m || file.r.iter().any(|row| row.len() != file.m) {
        return Err(ModelError::Config(format!("R must be {0}x{0}", file.m)));
    }
    let r = DMatrix::from_fn(file.m, file.m, |i, k| file.r[i][k]);
    let model = SystemModel::new(
        &file.name,
        f,
        g,
        file.d_max,
        parse_polynomial(&file.q, n)?,
        r,
        region(&file.state_region)?,
        region(&file.perf_region)?,
    )?;
    let spec = match file.safety {
        None => None,
        Some(s) => {
            let unsafe_sets = s
                .unsafe_sets
                .iter()
                .map(|piece| polys(piece, n))
                .collect::<Result<Vec<_>, _>>()?;
            let spec = match (&s.initial_box, s.initial.is_empty()) {
                (Some(b), true) => SafetySpec::from_box(region(b)?, unsafe_sets),
                (None, false) => SafetySpec {
                    initial: polys(&s.initial, n)?,
                    initial_box: None,
                    unsafe_sets,
                },
                _ => {
                    return Err(ModelError::Config(
                        "safety needs exactly one of initial_box or initial".into(),
                    ))
                }
            };
            spec.check_disjoint(&model.state_region, 10_000, 7)?;
            Some(spec)
        }
    };
    Ok((model, spec))
}
