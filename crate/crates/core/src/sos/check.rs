use super::{GramCertificate, PolyExpr, SosError, SosProgram};
use crate::poly::{BoxRegion, Polynomial};
use crate::sdp::{SdpStatus, SolverOptions};

/// Outcome of an SOS membership test.
#[derive(Debug, Clone)]
pub struct SosCheck {
    pub certified: bool,
    pub status: SdpStatus,
    pub certificate: GramCertificate,
    /// Gram matrices of the box multipliers, if any.
    pub multipliers: Vec<GramCertificate>,
}

/// Tests whether `p` is SOS, or with a region, whether
/// `p - sum_j s_j g_j` is SOS for SOS multipliers `s_j` of the given degree.
pub fn check_sos(
    p: &Polynomial,
    region: Option<(&BoxRegion, u32)>,
    opts: &SolverOptions,
) -> Result<SosCheck, SosError> {
    let n = p.nvars();
    let mut prog = SosProgram::new(n);
    let expr = PolyExpr::from_poly(p.clone());
    let mults = match region {
        None => {
            prog.add_sos("p", expr)?;
            Vec::new()
        }
        Some((b, deg)) => prog.add_sos_on_box("p", expr, b, deg)?.1,
    };
    let sol = prog.solve(opts)?;
    let multipliers = mults
        .iter()
        .map(|s| {
            let target = sol.sos_poly(s);
            GramCertificate::new(s.name(), s.basis().to_vec(), sol.matrix(s.gram()), &target)
        })
        .collect();
    Ok(SosCheck {
        certified: sol.certified,
        status: sol.status,
        certificate: sol.certificates[0].clone(),
        multipliers,
    })
}
