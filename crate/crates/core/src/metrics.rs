//! State comparison and entanglement measures.

use serde::{Deserialize, Serialize};

use crate::catalog::Gate;
use crate::error::{Error, Result};
use crate::linalg::{conjugate_entrywise, psd_sqrt, DensityMatrix, Ket, Operator, Tensor};

/// Eigenvalues below this are roundoff of exact zeros; their square roots
/// would otherwise add errors of order 1e-8.
const SPECTRAL_FLOOR: f64 = 1e-13;

fn root_spectrum(op: &Operator) -> Vec<f64> {
    op.eigenvalues_hermitian().iter().map(|&l| if l > SPECTRAL_FLOOR { l.sqrt() } else { 0.0 }).collect()
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, found: b });
    }
    Ok(())
}

/// Jozsa fidelity `(Tr sqrt(sqrt(a) b sqrt(a)))^2`, clamped to `[0, 1]`.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    let root = psd_sqrt(a.operator())?;
    let inner = (&(&root * b.operator()) * &root).hermitian_part();
    let sum: f64 = root_spectrum(&inner).iter().sum();
    Ok((sum * sum).clamp(0.0, 1.0))
}

/// `<psi| rho |psi>`
pub fn fidelity_with_ket(rho: &DensityMatrix, target: &Ket) -> Result<f64> {
    check_dims(rho.dim(), target.dim())?;
    Ok(rho.operator().expectation(target).re.clamp(0.0, 1.0))
}

pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.operator().trace_product(rho.operator()).re
}

/// Half the trace norm of `a - b`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    let diff = a.operator() - b.operator();
    Ok(0.5 * diff.eigenvalues_hermitian().iter().map(|l| l.abs()).sum::<f64>())
}

/// Wootters concurrence of a two-qubit state.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    check_dims(4, rho.dim())?;
    let yy = Gate::Y.matrix().tensor(&Gate::Y.matrix());
    let flipped = yy.sandwich(&conjugate_entrywise(rho.operator()));
    let root = psd_sqrt(rho.operator())?;
    let r: Operator = (&(&root * &flipped) * &root).hermitian_part();
    let mut s = root_spectrum(&r);
    s.sort_by(|a, b| b.total_cmp(a));
    Ok((s[0] - s[1] - s[2] - s[3]).clamp(0.0, 1.0))
}

/// Squared concurrence.
pub fn tangle(rho: &DensityMatrix) -> Result<f64> {
    Ok(concurrence(rho)?.powi(2))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub fidelity: f64,
    pub purity: f64,
    /// Present for two-qubit states only.
    pub tangle: Option<f64>,
}

pub fn metric_report(rho: &DensityMatrix, target: &Ket) -> Result<MetricReport> {
    Ok(MetricReport {
        fidelity: fidelity_with_ket(rho, target)?,
        purity: purity(rho),
        tangle: if rho.dim() == 4 { Some(tangle(rho)?) } else { None },
    })
}
