//! The four-outcome qubit POVM, built four independent ways.
//!
//! * [`povm_from_ancilla`]: an ancilla `|+>` attached by CZ, then projective
//!   measurements on ancilla and system, marginalized onto the system.
//! * [`povm_chi`]: the closed form `1/2 sigma_m |chi><chi| sigma_m^dagger`.
//! * [`povm_experimental`]: `1/2 {Z rho* Z, rho*, X rho* X, XZ rho* ZX}` with
//!   `rho = |psi(phi, theta)><psi(phi, theta)|`.
//! * [`optics::optical_model_povm`]: Jones calculus through the beam-displacer
//!   interferometer.
//!
//! Outcomes are labelled by the detector pair that fires (see [`OutcomeLabel`]).
//! The chi-form and ancilla-form constructors label their elements with the
//! experimental outcome they coincide with under [`parameter_map`].

pub mod optics;

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::catalog::{self, Gate};
use crate::error::{Error, Result};
use crate::linalg::{psd_sqrt, DensityMatrix, Operator, Tensor, STATE_TOLERANCE};

/// Detector pair for one POVM outcome: first letter is the first PBS
/// (T)ransmitted or (R)eflected arm, second letter the second PBS.
///
/// The index bijection `1 <-> TT, 2 <-> TR, 3 <-> RT, 4 <-> RR` follows the
/// element order `{Z rho* Z, rho*, X rho* X, XZ rho* ZX}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutcomeLabel {
    TT,
    TR,
    RT,
    RR,
}

impl OutcomeLabel {
    pub const ALL: [OutcomeLabel; 4] = [OutcomeLabel::TT, OutcomeLabel::TR, OutcomeLabel::RT, OutcomeLabel::RR];

    /// 1-based index in the experimental element order.
    pub fn index(self) -> usize {
        match self {
            OutcomeLabel::TT => 1,
            OutcomeLabel::TR => 2,
            OutcomeLabel::RT => 3,
            OutcomeLabel::RR => 4,
        }
    }

    pub fn from_index(n: usize) -> Result<Self> {
        Self::ALL
            .get(n.wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("outcome index {n} outside 1..=4")))
    }

    /// Reflected at the first PBS.
    pub fn first_reflected(self) -> bool {
        matches!(self, OutcomeLabel::RT | OutcomeLabel::RR)
    }

    /// Reflected at the second PBS.
    pub fn second_reflected(self) -> bool {
        matches!(self, OutcomeLabel::TR | OutcomeLabel::RR)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeLabel::TT => "TT",
            OutcomeLabel::TR => "TR",
            OutcomeLabel::RT => "RT",
            OutcomeLabel::RR => "RR",
        }
    }
}

impl fmt::Display for OutcomeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OutcomeLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "TT" => Ok(OutcomeLabel::TT),
            "TR" => Ok(OutcomeLabel::TR),
            "RT" => Ok(OutcomeLabel::RT),
            "RR" => Ok(OutcomeLabel::RR),
            _ => Err(Error::UnknownLabel(s.to_string())),
        }
    }
}

/// Measurement parameters: polar angle and the second angle (gamma for the
/// chi form, theta for the psi form).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PovmParams {
    pub phi: f64,
    pub second_angle: f64,
}

/// Ordered, labelled list of effects.
#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    labels: Vec<OutcomeLabel>,
    elements: Vec<Operator>,
}

impl Povm {
    pub fn new(labels: Vec<OutcomeLabel>, elements: Vec<Operator>) -> Result<Self> {
        if labels.len() != elements.len() {
            return Err(Error::MalformedPovm(format!("{} labels for {} elements", labels.len(), elements.len())));
        }
        Ok(Povm { labels, elements })
    }

    pub fn labels(&self) -> &[OutcomeLabel] {
        &self.labels
    }

    pub fn elements(&self) -> &[Operator] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (OutcomeLabel, &Operator)> {
        self.labels.iter().copied().zip(self.elements.iter())
    }

    pub fn element(&self, label: OutcomeLabel) -> Option<&Operator> {
        self.iter().find(|(l, _)| *l == label).map(|(_, e)| e)
    }

    /// Elements reordered to the experimental index order.
    pub fn sorted_by_label(&self) -> Povm {
        let mut pairs: Vec<(OutcomeLabel, Operator)> = self.iter().map(|(l, e)| (l, e.clone())).collect();
        pairs.sort_by_key(|(l, _)| *l);
        let (labels, elements) = pairs.into_iter().unzip();
        Povm { labels, elements }
    }

    /// `U E U^dagger` for every element.
    pub fn conjugated(&self, unitary: &Operator) -> Povm {
        Povm { labels: self.labels.clone(), elements: self.elements.iter().map(|e| unitary.sandwich(e)).collect() }
    }

    pub fn scaled(&self, factor: f64) -> Povm {
        Povm { labels: self.labels.clone(), elements: self.elements.iter().map(|e| e.scale_real(factor)).collect() }
    }

    pub fn sum(&self) -> Operator {
        let dim = self.elements.first().map_or(2, Operator::dim);
        self.elements.iter().fold(Operator::zeros(dim), |acc, e| &acc + e)
    }

    /// Largest entrywise difference between elements sharing a label;
    /// infinite when the label sets differ.
    pub fn labelled_distance(&self, other: &Povm) -> f64 {
        if self.len() != other.len() {
            return f64::INFINITY;
        }
        self.iter().map(|(l, e)| other.element(l).map_or(f64::INFINITY, |o| e.max_abs_diff(o))).fold(0.0, f64::max)
    }

    /// Label-blind comparison: every element of `self` has a partner in
    /// `other` within `tol`, and vice versa.
    pub fn same_element_set(&self, other: &Povm, tol: f64) -> bool {
        let covered =
            |a: &Povm, b: &Povm| a.elements.iter().all(|e| b.elements.iter().any(|o| e.max_abs_diff(o) <= tol));
        self.len() == other.len() && covered(self, other) && covered(other, self)
    }
}

/// Kraus operators `K_n = sqrt(E_n)`.
#[derive(Clone, Debug)]
pub struct KrausSet {
    pub labels: Vec<OutcomeLabel>,
    pub operators: Vec<Operator>,
}

impl KrausSet {
    pub fn from_povm(povm: &Povm) -> Result<Self> {
        let operators = povm.elements().iter().map(psd_sqrt).collect::<Result<Vec<_>>>()?;
        Ok(KrausSet { labels: povm.labels().to_vec(), operators })
    }

    /// Frobenius norm of `sum K^dagger K - 1`.
    pub fn completeness_deviation(&self) -> f64 {
        let dim = self.operators.first().map_or(2, Operator::dim);
        let sum = self.operators.iter().fold(Operator::zeros(dim), |acc, k| &acc + &(&k.adjoint() * k));
        sum.frobenius_distance(&Operator::identity(dim))
    }
}

fn half_sandwiches(base: &Operator, sigmas: &[Operator], labels: [OutcomeLabel; 4]) -> Povm {
    let elements = sigmas.iter().map(|s| s.sandwich(base).scale_real(0.5)).collect();
    Povm { labels: labels.to_vec(), elements }
}

/// Labels of the chi-form elements `sigma_m in {1, X, XZ, Z}`, m = 1..4.
pub const CHI_FORM_LABELS: [OutcomeLabel; 4] = [OutcomeLabel::TR, OutcomeLabel::RT, OutcomeLabel::RR, OutcomeLabel::TT];

/// `(a, b)` ancilla/system outcome pairs in chi-form order m = 1..4: the
/// `(a, b)` element equals `1/2 X^a Z^b |chi><chi| Z^b X^a`.
pub const ANCILLA_BRANCHES: [(u8, u8); 4] = [(0, 0), (1, 0), (1, 1), (0, 1)];

fn chi_sigmas() -> [Operator; 4] {
    let x = Gate::X.matrix();
    let z = Gate::Z.matrix();
    [Operator::identity(2), x.clone(), &x * &z, z]
}

/// `1/2 sigma_m |chi(phi, gamma)><chi(phi, gamma)| sigma_m^dagger` with
/// `sigma_m = 1, X, XZ, Z`.
pub fn povm_chi(phi: f64, gamma: f64) -> Povm {
    let base = catalog::chi(phi, gamma).projector();
    half_sandwiches(&base, &chi_sigmas(), CHI_FORM_LABELS)
}

/// `E_ab = <+_A| CZ Pi_ab CZ |+_A>` with ancilla A measured in
/// `Z^a |phi_+>` and the system in `X^a Z^b |gamma_+>`.
pub fn povm_from_ancilla(phi: f64, gamma: f64) -> Povm {
    let x = Gate::X.matrix();
    let z = Gate::Z.matrix();
    let cz = Gate::CZ.matrix();
    let power = |op: &Operator, k: u8| if k == 1 { op.clone() } else { Operator::identity(2) };

    // Isometry |s> -> |+>_A |s>, ancilla as the leading qubit.
    let plus_amp = catalog::plus();
    let isometry = {
        let mut m = nalgebra::DMatrix::zeros(4, 2);
        for a in 0..2 {
            for s in 0..2 {
                m[(a * 2 + s, s)] = plus_amp.amplitudes()[a];
            }
        }
        m
    };

    let ancilla_plus = catalog::alpha(phi, true).projector();
    let system_plus = catalog::alpha(gamma, true).projector();
    let elements = ANCILLA_BRANCHES
        .iter()
        .map(|&(a, b)| {
            let za = power(&z, a);
            let xazb = &power(&x, a) * &power(&z, b);
            let pi = za.sandwich(&ancilla_plus).tensor(&xazb.sandwich(&system_plus));
            let inner = cz.sandwich(&pi);
            let reduced = isometry.adjoint() * inner.matrix() * &isometry;
            Operator::from_matrix(reduced).expect("2x2 effect")
        })
        .collect();
    Povm { labels: CHI_FORM_LABELS.to_vec(), elements }
}

/// `1/2 {Z rho* Z, rho*, X rho* X, XZ rho* ZX}`, labelled TT, TR, RT, RR.
pub fn povm_experimental(phi: f64, theta: f64) -> Povm {
    let rho_conj = catalog::psi(phi, theta).projector().conjugate();
    let x = Gate::X.matrix();
    let z = Gate::Z.matrix();
    let sigmas = [z.clone(), Operator::identity(2), x.clone(), &x * &z];
    half_sandwiches(&rho_conj, &sigmas, OutcomeLabel::ALL)
}

pub const CHI_AZIMUTH_OFFSET: f64 = FRAC_PI_2;
pub const CHI_AZIMUTH_SLOPE: f64 = -1.0;

/// The chi-form azimuth `gamma` realizing the experimental POVM at `theta`:
/// `psi*(phi, theta)` and `chi(phi, pi/2 - theta)` are the same vector.
pub fn parameter_map(theta: f64) -> f64 {
    CHI_AZIMUTH_OFFSET + CHI_AZIMUTH_SLOPE * theta
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PovmDiagnostics {
    pub max_hermiticity_deviation: f64,
    pub min_eigenvalue: f64,
    /// Frobenius norm of `sum E_n - 1`.
    pub completeness_deviation: f64,
    pub hermitian: bool,
    pub positive: bool,
    pub complete: bool,
    pub passes: bool,
}

/// Hermiticity, positivity and completeness checks at [`STATE_TOLERANCE`].
pub fn validate(p: &Povm) -> Result<PovmDiagnostics> {
    if p.len() != 4 {
        return Err(Error::MalformedPovm(format!("expected 4 elements, found {}", p.len())));
    }
    if let Some(bad) = p.elements().iter().find(|e| e.dim() != 2) {
        return Err(Error::MalformedPovm(format!("element of dimension {}", bad.dim())));
    }
    let max_hermiticity_deviation = p.elements().iter().map(Operator::hermiticity_deviation).fold(0.0, f64::max);
    let min_eigenvalue = p.elements().iter().map(Operator::min_eigenvalue).fold(f64::INFINITY, f64::min);
    let completeness_deviation = p.sum().frobenius_distance(&Operator::identity(2));
    let hermitian = max_hermiticity_deviation <= STATE_TOLERANCE;
    let positive = min_eigenvalue >= -STATE_TOLERANCE;
    let complete = completeness_deviation <= STATE_TOLERANCE;
    Ok(PovmDiagnostics {
        max_hermiticity_deviation,
        min_eigenvalue,
        completeness_deviation,
        hermitian,
        positive,
        complete,
        passes: hermitian && positive && complete,
    })
}

/// Below this, a branch is treated as impossible.
pub const ZERO_PROBABILITY: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct MeasurementBranch {
    pub label: OutcomeLabel,
    pub probability: f64,
    /// `None` for zero-probability outcomes.
    pub post_state: Option<DensityMatrix>,
}

/// Applies `povm` to qubit `target_qubit` (1-based) of `state`.
///
/// Probabilities are `Tr[(E_n on target) rho]`; the post-measurement state is
/// `K_n rho K_n^dagger / p_n` with `K_n = sqrt(E_n)`.
pub fn measure(state: &DensityMatrix, povm: &Povm, target_qubit: usize) -> Result<Vec<MeasurementBranch>> {
    let n_qubits = state.n_qubits();
    if !(1..=3).contains(&n_qubits) {
        return Err(Error::UnsupportedQubits(n_qubits));
    }
    if target_qubit == 0 || target_qubit > n_qubits {
        return Err(Error::QubitOutOfRange { index: target_qubit, n_qubits });
    }
    let kraus = KrausSet::from_povm(povm)?;
    povm.iter()
        .zip(kraus.operators.iter())
        .map(|((label, element), k)| {
            let lifted_e = Operator::embed(element, target_qubit, n_qubits)?;
            let probability = lifted_e.trace_product(state.operator()).re.max(0.0);
            let post_state = if probability > ZERO_PROBABILITY {
                let lifted_k = Operator::embed(k, target_qubit, n_qubits)?;
                let unnormalized = lifted_k.sandwich(state.operator()).hermitian_part();
                Some(DensityMatrix::normalized(unnormalized)?)
            } else {
                None
            };
            Ok(MeasurementBranch { label, probability, post_state })
        })
        .collect()
}

/// `(E on target) rho (E on target)^dagger`, unnormalized.
pub fn sandwich_update(state: &DensityMatrix, element: &Operator, target_qubit: usize) -> Result<Operator> {
    let lifted = Operator::embed(element, target_qubit, state.n_qubits())?;
    Ok(lifted.sandwich(state.operator()))
}
