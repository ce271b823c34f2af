use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{ModelError, SafetySpec, SystemModel};
use crate::poly::{BoxRegion, PolyMatrix, Polynomial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuspensionVariant {
    /// Standard quarter-car force balance.
    Corrected,
    /// Equations exactly as typeset, including `x3' = x3` and the tire
    /// force entering with a positive sign.
    AsPrinted,
}

/// Default simulation start.
pub const SUSPENSION_X0: [f64; 4] = [0.2, 5.0, 0.1, -15.0];

/// Start with a large tire deflection; without control the wheel velocity
/// swings below `x4_min`.
pub const SUSPENSION_X0_DEFLECTED: [f64; 4] = [0.2, 5.0, 0.4, -15.0];

/// Quarter-car parameters and regions. States are body position, body
/// velocity, wheel position, wheel velocity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuspensionParams {
    pub m_b: f64,
    pub m_w: f64,
    pub b_s: f64,
    pub k_s: f64,
    pub k_t: f64,
    pub k_n: f64,
    pub c: f64,
    pub d_max: f64,
    pub variant: SuspensionVariant,
    /// Wheel velocity limits of the safe set.
    pub x4_min: f64,
    pub x4_max: f64,
    pub state_lo: Vec<f64>,
    pub state_hi: Vec<f64>,
    pub perf_half_widths: Vec<f64>,
    pub initial_half_widths: Vec<f64>,
}

impl Default for SuspensionParams {
    fn default() -> Self {
        SuspensionParams {
            m_b: 300.0,
            m_w: 60.0,
            b_s: 1000.0,
            k_s: 16000.0,
            k_t: 190000.0,
            k_n: 1600.0,
            c: 1.0,
            d_max: 1.0,
            variant: SuspensionVariant::Corrected,
            x4_min: -20.0,
            x4_max: 25.0,
            state_lo: vec![-2.0, -12.0, -0.5, -30.0],
            state_hi: vec![2.0, 12.0, 0.5, 30.0],
            perf_half_widths: vec![0.5, 10.0, 0.5, 10.0],
            initial_half_widths: vec![0.1, 2.0, 0.05, 10.0],
        }
    }
}

/// Quarter-car plant, cost `100 x1^2 + x2^2 + x3^2 + x4^2`, `R = 1`, and
/// the safety specification `x4_min <= x4 <= x4_max`.
pub fn suspension_model(p: &SuspensionParams) -> Result<(SystemModel, SafetySpec), ModelError> {
    let n = 4;
    let x = |i: usize| Polynomial::var(n, i);
    let c = |v: f64| Polynomial::constant(n, v);
    let (x1, x2, x3, x4) = (x(0), x(1), x(2), x(3));
    let d = &x1 - &x3;
    let cubic = d.pow(3).scale(p.k_n);
    let damper = (&x4 - &x2).scale(p.b_s);
    // Suspension force on the body.
    let body = &(&(-&d).scale(p.k_s) - &cubic) + &damper;
    let f = match p.variant {
        SuspensionVariant::Corrected => {
            let tire = x3.scale(p.k_t);
            vec![
                x2.clone(),
                body.scale(1.0 / p.m_b),
                x4.clone(),
                (&(-&body) - &tire).scale(1.0 / p.m_w),
            ]
        }
        SuspensionVariant::AsPrinted => {
            let tire = x3.scale(p.k_t);
            vec![
                x2.clone(),
                body.scale(1.0 / p.m_b),
                x3.clone(),
                (&body + &tire).scale(1.0 / p.m_w),
            ]
        }
    };
    let wheel_gain = match p.variant {
        SuspensionVariant::Corrected => -p.c / p.m_w,
        SuspensionVariant::AsPrinted => p.c / p.m_w,
    };
    let g = PolyMatrix::column(vec![c(0.0), c(p.c / p.m_b), c(0.0), c(wheel_gain)])?;
    let q = &(&(&x1.pow(2).scale(100.0) + &x2.pow(2)) + &x3.pow(2)) + &x4.pow(2);
    let region = |lo: &[f64], hi: &[f64]| -> Result<BoxRegion, ModelError> {
        if lo.len() != n || hi.len() != n {
            return Err(ModelError::Config("suspension regions need 4 entries".into()));
        }
        Ok(BoxRegion::new(lo.to_vec(), hi.to_vec())?)
    };
    let half = |w: &[f64]| -> Result<BoxRegion, ModelError> {
        let lo: Vec<f64> = w.iter().map(|v| -v).collect();
        region(&lo, w)
    };
    let model = SystemModel::new(
        match p.variant {
            SuspensionVariant::Corrected => "suspension",
            SuspensionVariant::AsPrinted => "suspension_printed",
        },
        f,
        g,
        vec![p.d_max],
        q,
        DMatrix::from_element(1, 1, 1.0),
        region(&p.state_lo, &p.state_hi)?,
        half(&p.perf_half_widths)?,
    )?;
    if !(p.x4_min < p.x4_max) {
        return Err(ModelError::Config("x4_min must be below x4_max".into()));
    }
    let spec = SafetySpec::from_box(
        half(&p.initial_half_widths)?,
        vec![
            vec![x4.add_constant(-p.x4_max)],
            vec![(-&x4).add_constant(p.x4_min)],
        ],
    );
    spec.check_disjoint(&model.state_region, 10_000, 7)?;
    Ok((model, spec))
}
